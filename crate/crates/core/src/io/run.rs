//! Single runs, refinement ladders and parameter sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::diagnostics::{conserved_quantities, lyapunov, smallness_condition, DiagnosticsRecord, Smallness};
use crate::error::{NsacError, Result};
use crate::io::config::RunConfig;
use crate::io::output::{
    fmt_f64, read_history, write_history, write_key_values, write_repr_csv, write_series_csv,
    write_snapshot_csv,
};
use crate::representation::{reconstruct_v, ReprResult};
use crate::state::{
    make_initial_state, normalize_initial_data, validate_initial_data, FieldState, Grid,
    InitialDataReport, Params,
};
use crate::timestepper::{default_snapshot_interval, History, Integrator, StepControl};

/// Mass drift allowed by the conservation verdict.
pub const MASS_TOL: f64 = 1e-11;
/// Slack of the phase-field bounds verdict.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-6;
/// Errors at or below this level count as exact in refinement tables.
pub const ROUNDOFF: f64 = 1e-12;

/// Initial data after construction, normalization and validation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: Grid,
    pub params: Params,
    pub state: FieldState,
    pub report: InitialDataReport,
    pub normalized: bool,
    pub theta_shift: f64,
    pub note: Option<String>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let raw = make_initial_state(&grid, &cfg.preset()?)?;
    let (state, normalized, theta_shift, note) = if cfg.normalize {
        let n = normalize_initial_data(&grid, &raw, &cfg.params)?;
        (n.state, n.normalized, n.theta_shift, n.note)
    } else {
        (raw, false, 0.0, None)
    };
    let report = validate_initial_data(&grid, &state)?;
    Ok(Prepared { grid, params: cfg.params.clone(), state, report, normalized, theta_shift, note })
}

/// A finished (or aborted) time integration with its recorded history.
#[derive(Debug)]
pub struct Simulation {
    pub prepared: Prepared,
    pub history: History,
    pub control: StepControl,
    /// The state at `t_end`, or the solver error that stopped the run.
    pub outcome: Result<FieldState>,
}

impl Simulation {
    pub fn final_state(&self) -> Result<&FieldState> {
        match &self.outcome {
            Ok(s) => Ok(s),
            Err(e) => Err(NsacError::InvalidParam(format!("run did not complete: {e}"))),
        }
    }
}

/// Integrates prepared data to `t_end`. Setup problems are errors; solver
/// aborts are kept in [`Simulation::outcome`] next to the partial history.
pub fn simulate(cfg: &RunConfig, prepared: Prepared) -> Result<Simulation> {
    let grid = &prepared.grid;
    let params = &prepared.params;
    let interval = cfg.snapshot_dt.unwrap_or_else(|| default_snapshot_interval(grid, params.t_end));
    let mut history = History::new(grid, params, &prepared.state, interval)?;
    let mut integrator = Integrator::new(grid, params);
    let outcome = integrator.advance(&prepared.state, params.t_end, &mut history);
    let control = integrator.control().clone();
    Ok(Simulation { prepared, history, control, outcome })
}

/// Snapshot indices that become series rows.
fn series_indices(n_snapshots: usize, stride: usize, extra: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n_snapshots).step_by(stride.max(1)).collect();
    if n_snapshots > 0 {
        idx.push(n_snapshots - 1);
    }
    idx.extend(extra.iter().copied().filter(|&i| i < n_snapshots));
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Index of the snapshot closest to `t`.
fn nearest_snapshot(history: &History, t: f64) -> usize {
    let last = history.snapshots().len().saturating_sub(1);
    ((t / history.interval()).round().max(0.0) as usize).min(last)
}

/// Representation comparisons at the given times (snapped to the snapshot
/// lattice). Failures are returned as messages.
pub fn representation_checks(history: &History, times: &[f64]) -> (Vec<ReprResult>, Vec<String>) {
    let mut idx: Vec<usize> = times.iter().map(|&t| nearest_snapshot(history, t)).collect();
    idx.sort_unstable();
    idx.dedup();
    let mut results = Vec::new();
    let mut errors = Vec::new();
    for i in idx {
        let t = history.snapshots()[i].state.t;
        match reconstruct_v(history, t) {
            Ok(r) => results.push(r),
            Err(e) => errors.push(format!("t={t}: {e}")),
        }
    }
    (results, errors)
}

/// Time series over the recorded snapshots, with representation residuals
/// filled in where a comparison exists.
pub fn series_records(
    history: &History,
    stride: usize,
    repr: &[ReprResult],
) -> Result<Vec<DiagnosticsRecord>> {
    let snaps = history.snapshots();
    let repr_idx: Vec<usize> = repr.iter().map(|r| nearest_snapshot(history, r.t)).collect();
    series_indices(snaps.len(), stride, &repr_idx)
        .into_par_iter()
        .map(|i| {
            let mut rec = DiagnosticsRecord::from_state(history.grid(), &snaps[i].state, history.params())?;
            if let Some(k) = repr_idx.iter().position(|&j| j == i) {
                rec.repr_residual = Some(repr[k].residual_max);
            }
            Ok(rec)
        })
        .collect()
}

/// Figures and verdicts derived from the time series alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesAssessment {
    pub samples: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// `lyapunov(end) - lyapunov(0)`
    pub lyapunov_change: f64,
    /// Trapezoid of the sampled `W` over the sample times.
    pub w_integral: f64,
    /// `|lyapunov(end) - lyapunov(0) + w_integral|`
    pub lyapunov_residual: f64,
    /// Largest change of any extremum column from its initial value.
    pub extrema_drift: f64,
    pub min_w: f64,
    pub min_v: f64,
    pub min_theta: f64,
    pub min_chi: f64,
    pub max_chi: f64,
    pub theta_bar_min: f64,
    pub theta_bar_max: f64,
    /// `exp(-lyapunov(0))`
    pub gamma1: f64,
    pub repr_residual_max: Option<f64>,
    /// Initial mass and energy both equal one.
    pub normalized: bool,
    pub mass_conserved: bool,
    pub dissipation_nonnegative: bool,
    pub lyapunov_nonincreasing: bool,
    pub max_principle: bool,
    pub positivity: bool,
    /// Only judged for normalized data.
    pub theta_band: Option<bool>,
}

impl SeriesAssessment {
    pub fn verdicts(&self) -> Vec<(&'static str, Option<bool>)> {
        vec![
            ("mass_conserved", Some(self.mass_conserved)),
            ("dissipation_nonnegative", Some(self.dissipation_nonnegative)),
            ("lyapunov_nonincreasing", Some(self.lyapunov_nonincreasing)),
            ("max_principle", Some(self.max_principle)),
            ("positivity", Some(self.positivity)),
            ("theta_band", self.theta_band),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| v.unwrap_or(true))
    }
}

pub fn assess_series(records: &[DiagnosticsRecord]) -> Result<SeriesAssessment> {
    let first = records
        .first()
        .ok_or_else(|| NsacError::InvalidParam("empty time series".into()))?;
    let last = records.last().unwrap_or(first);
    let fold = |f: fn(&DiagnosticsRecord) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        records.iter().map(f).fold(init, pick)
    };
    let mass_drift = records.iter().map(|r| (r.mass - first.mass).abs()).fold(0.0, f64::max);
    let w_integral: f64 = records
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].w + w[1].w))
        .sum();
    let extrema = |r: &DiagnosticsRecord| {
        [r.min_v, r.max_v, r.min_theta, r.max_theta, r.min_chi, r.max_chi]
    };
    let e0 = extrema(first);
    let extrema_drift = records
        .iter()
        .flat_map(|r| extrema(r).into_iter().zip(e0).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let min_w = fold(|r| r.w, f64::INFINITY, f64::min);
    let min_v = fold(|r| r.min_v, f64::INFINITY, f64::min);
    let min_theta = fold(|r| r.min_theta, f64::INFINITY, f64::min);
    let min_chi = fold(|r| r.min_chi, f64::INFINITY, f64::min);
    let max_chi = fold(|r| r.max_chi, f64::NEG_INFINITY, f64::max);
    let theta_bar_min = fold(|r| r.theta_bar, f64::INFINITY, f64::min);
    let theta_bar_max = fold(|r| r.theta_bar, f64::NEG_INFINITY, f64::max);
    let repr_residual_max = records
        .iter()
        .filter_map(|r| r.repr_residual)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
    let gamma1 = (-first.lyapunov).exp();
    let normalized = (first.mass - 1.0).abs() <= ROUNDOFF && (first.total_energy - 1.0).abs() <= ROUNDOFF;
    let lyapunov_change = last.lyapunov - first.lyapunov;
    Ok(SeriesAssessment {
        samples: records.len(),
        mass_drift,
        energy_drift: (last.total_energy - first.total_energy).abs(),
        lyapunov_change,
        w_integral,
        lyapunov_residual: (lyapunov_change + w_integral).abs(),
        extrema_drift,
        min_w,
        min_v,
        min_theta,
        min_chi,
        max_chi,
        theta_bar_min,
        theta_bar_max,
        gamma1,
        repr_residual_max,
        normalized,
        mass_conserved: mass_drift <= MASS_TOL,
        dissipation_nonnegative: min_w >= 0.0,
        lyapunov_nonincreasing: records.windows(2).all(|w| w[1].lyapunov <= w[0].lyapunov + ROUNDOFF),
        max_principle: min_chi >= first.min_chi - MAX_PRINCIPLE_TOL && max_chi <= 1.0 + MAX_PRINCIPLE_TOL,
        positivity: min_v > 0.0 && min_theta > 0.0,
        theta_band: normalized.then_some(
            theta_bar_max <= 1.0 + crate::diagnostics::THETA_BAND_UPPER_TOL
                && theta_bar_min >= gamma1 - crate::diagnostics::THETA_BAND_LOWER_TOL,
        ),
    })
}

/// Smallness bookkeeping for a run: `m1, m2, m3` are the observed lower
/// bounds of `v`, `chi`, `theta` and `N` the largest square root of the
/// Sobolev energy.
pub fn smallness_from_series(records: &[DiagnosticsRecord], alpha: f64) -> Option<Smallness> {
    if records.is_empty() {
        return None;
    }
    let min = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    let n = records.iter().map(|r| r.sobolev_e.sqrt()).fold(0.0, f64::max);
    Some(smallness_condition(min(|r| r.min_v), min(|r| r.min_chi), min(|r| r.min_theta), n, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The solver aborted; outputs cover the run up to the abort.
    Failed,
    /// The initial data did not satisfy the hypotheses; nothing was run.
    Refused,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Failed => "failed",
            RunStatus::Refused => "refused",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub message: Option<String>,
    pub n_cells: usize,
    pub params: Params,
    pub report: Option<InitialDataReport>,
    pub normalized: bool,
    pub theta_shift: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub t_reached: f64,
    pub records: Vec<DiagnosticsRecord>,
    pub assessment: Option<SeriesAssessment>,
    pub smallness: Option<Smallness>,
    pub repr: Vec<ReprResult>,
    /// `|lyapunov(end) - lyapunov(0) + int W|` with the per-step integral of `W`.
    pub lyapunov_residual_exact: Option<f64>,
    pub final_state: Option<FieldState>,
}

impl RunSummary {
    /// Completed and every applicable verdict passes.
    pub fn passed(&self) -> bool {
        self.status == RunStatus::Completed && self.assessment.as_ref().is_some_and(|a| a.all_pass())
    }

    /// Ordered `key=value` pairs for the summary file.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("status", self.status.as_str().into());
        put("passed", self.passed().to_string());
        if let Some(m) = &self.message {
            put("message", m.replace('\n', " "));
        }
        put("n_cells", self.n_cells.to_string());
        put("alpha", fmt_f64(self.params.alpha));
        put("beta", fmt_f64(self.params.beta));
        put("cfl_safety", fmt_f64(self.params.cfl_safety));
        put("t_end", fmt_f64(self.params.t_end));
        put("t_reached", fmt_f64(self.t_reached));
        put("normalized", self.normalized.to_string());
        put("theta_shift", fmt_f64(self.theta_shift));
        if let Some(r) = &self.report {
            put("compliant", r.compliant.to_string());
            put("v0_estimate", fmt_f64(r.v0_estimate));
            put("m0_estimate", fmt_f64(r.m0_estimate));
            put("e0", fmt_f64(r.e0));
            put("gamma1", fmt_f64(r.gamma1));
        }
        put("accepted_steps", self.accepted_steps.to_string());
        put("rejected_steps", self.rejected_steps.to_string());
        if let Some(a) = &self.assessment {
            put("samples", a.samples.to_string());
            put("mass_drift", fmt_f64(a.mass_drift));
            put("energy_drift", fmt_f64(a.energy_drift));
            put("lyapunov_change", fmt_f64(a.lyapunov_change));
            put("w_integral", fmt_f64(a.w_integral));
            put("lyapunov_residual", fmt_f64(a.lyapunov_residual));
            put("extrema_drift", fmt_f64(a.extrema_drift));
            put("min_w", fmt_f64(a.min_w));
            put("min_v", fmt_f64(a.min_v));
            put("min_theta", fmt_f64(a.min_theta));
            put("min_chi", fmt_f64(a.min_chi));
            put("max_chi", fmt_f64(a.max_chi));
            put("theta_bar_min", fmt_f64(a.theta_bar_min));
            put("theta_bar_max", fmt_f64(a.theta_bar_max));
            put("repr_residual_max", a.repr_residual_max.map_or("n/a".into(), fmt_f64));
            for (name, v) in a.verdicts() {
                let text = match v {
                    Some(true) => "pass",
                    Some(false) => "fail",
                    None => "n/a",
                };
                put(&format!("verdict_{name}"), text.into());
            }
        }
        if let Some(x) = self.lyapunov_residual_exact {
            put("lyapunov_residual_stepwise", fmt_f64(x));
        }
        if let Some(s) = &self.smallness {
            put("smallness_h", fmt_f64(s.h));
            put("smallness_alpha_h", fmt_f64(s.alpha_h));
            put("smallness_cond1", s.cond1.to_string());
            put("smallness_cond2", s.cond2.to_string());
        }
        out
    }
}

/// Initial condition → normalization → validation → integration, with all
/// outputs written under `cfg.output_dir` when it is set.
pub fn run_single(cfg: &RunConfig) -> Result<RunSummary> {
    let out_dir = cfg.output_dir.as_deref();
    let mut summary = RunSummary {
        status: RunStatus::Refused,
        message: None,
        n_cells: cfg.n_cells,
        params: cfg.params.clone(),
        report: None,
        normalized: false,
        theta_shift: 0.0,
        accepted_steps: 0,
        rejected_steps: 0,
        t_reached: 0.0,
        records: Vec::new(),
        assessment: None,
        smallness: None,
        repr: Vec::new(),
        lyapunov_residual_exact: None,
        final_state: None,
    };
    let refuse = |summary: &RunSummary| -> Result<()> {
        match out_dir {
            Some(dir) => write_key_values(&dir.join("summary.txt"), &summary.to_pairs()),
            None => Ok(()),
        }
    };

    // initial data outside the admissible class is a refusal, not a crash
    let prepared = match prepare(cfg) {
        Ok(p) => p,
        Err(NsacError::InvalidInitialData(msg)) => {
            summary.message = Some(msg);
            refuse(&summary)?;
            return Ok(summary);
        }
        Err(e) => return Err(e),
    };
    summary.report = Some(prepared.report.clone());
    summary.normalized = prepared.normalized;
    summary.theta_shift = prepared.theta_shift;

    if !prepared.report.compliant {
        summary.message = Some(format!(
            "initial data outside the admissible class (min v = {}, max chi = {})",
            prepared.state.v.iter().cloned().fold(f64::INFINITY, f64::min),
            prepared.state.chi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        ));
        refuse(&summary)?;
        return Ok(summary);
    }
    let note = prepared.note.clone();

    let sim = simulate(cfg, prepared)?;
    summary.accepted_steps = sim.control.accepted;
    summary.rejected_steps = sim.control.rejects;
    summary.t_reached = sim.history.end_time();

    let (repr, repr_errors) = match &sim.outcome {
        Ok(_) => representation_checks(&sim.history, &cfg.check_times()),
        Err(_) => (Vec::new(), Vec::new()),
    };
    summary.records = series_records(&sim.history, cfg.series_stride, &repr)?;
    summary.assessment = Some(assess_series(&summary.records)?);
    summary.smallness = smallness_from_series(&summary.records, cfg.params.alpha);
    let first = &sim.history.snapshots()[0].state;
    let current = &sim.history.current().state;
    summary.lyapunov_residual_exact = Some(
        (lyapunov(&sim.prepared.grid, current)? - lyapunov(&sim.prepared.grid, first)?
            + sim.history.current().w_integral)
            .abs(),
    );
    summary.repr = repr;

    let mut messages: Vec<String> = note.into_iter().collect();
    match &sim.outcome {
        Ok(state) => {
            summary.status = RunStatus::Completed;
            summary.final_state = Some(state.clone());
        }
        Err(e) => {
            summary.status = RunStatus::Failed;
            messages.insert(0, e.to_string());
        }
    }
    messages.extend(repr_errors.into_iter().map(|e| format!("representation: {e}")));
    if !messages.is_empty() {
        summary.message = Some(messages.join("; "));
    }

    if let Some(dir) = out_dir {
        let grid = &sim.prepared.grid;
        write_series_csv(&dir.join("series.csv"), &summary.records)?;
        write_snapshot_csv(&dir.join("snapshot.csv"), grid, current)?;
        write_repr_csv(&dir.join("repr.csv"), grid, &summary.repr)?;
        write_history(&dir.join("history.json"), &sim.history)?;
        write_key_values(&dir.join("summary.txt"), &summary.to_pairs())?;
        if summary.status == RunStatus::Failed {
            let marker = dir.join("FAILED");
            std::fs::write(&marker, summary.message.clone().unwrap_or_default())
                .map_err(|e| NsacError::io(marker, e))?;
        }
    }
    Ok(summary)
}

/// Reconstructs the volume from a stored history and writes the comparison.
pub fn recompute_repr(history_path: &Path, times: &[f64], out: &Path) -> Result<Vec<ReprResult>> {
    let history = read_history(history_path)?;
    let times = if times.is_empty() {
        let end = history.end_time();
        vec![0.5 * end, end]
    } else {
        times.to_vec()
    };
    let (results, errors) = representation_checks(&history, &times);
    if let Some(e) = errors.into_iter().next() {
        return Err(NsacError::InvalidParam(format!("representation failed at {e}")));
    }
    write_repr_csv(out, history.grid(), &results)?;
    Ok(results)
}

/// Observed convergence order between two successive error levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// Both errors at roundoff.
    Exact,
    Observed(f64),
    /// One of the errors is unavailable or only one side is at roundoff.
    Undefined,
}

impl Order {
    pub fn between(coarse: Option<f64>, fine: Option<f64>) -> Order {
        match (coarse, fine) {
            (Some(c), Some(f)) if c <= ROUNDOFF && f <= ROUNDOFF => Order::Exact,
            (Some(c), Some(f)) if c > 0.0 && f > 0.0 && c.is_finite() && f.is_finite() => {
                Order::Observed((c / f).log2())
            }
            _ => Order::Undefined,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Order::Observed(p) => Some(p),
            _ => None,
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Exact => f.write_str("exact"),
            Order::Observed(p) => write!(f, "{p:.3}"),
            Order::Undefined => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub n_cells: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// `|lyapunov(t_end) - lyapunov(0) + int_0^t_end W|`
    pub lyapunov_residual: f64,
    /// Largest reconstruction mismatch at `t_end`, if the reconstruction succeeded.
    pub repr_residual: Option<f64>,
    pub final_state: FieldState,
}

#[derive(Debug, Clone)]
pub struct RefinementTable {
    pub levels: Vec<LevelResult>,
    /// Max-norm difference of the final states of consecutive levels, on the coarse nodes.
    pub solution_diffs: Vec<f64>,
    pub solution_orders: Vec<Order>,
    pub energy_orders: Vec<Order>,
    pub lyapunov_orders: Vec<Order>,
    pub repr_orders: Vec<Order>,
    /// Why the table stopped early, if it did.
    pub failure: Option<String>,
}

fn run_level(cfg: &RunConfig) -> Result<LevelResult> {
    let prepared = prepare(cfg)?;
    if !prepared.report.compliant {
        return Err(NsacError::InvalidInitialData("initial data outside the admissible class".into()));
    }
    let sim = simulate(cfg, prepared)?;
    let end = sim.outcome?;
    let grid = &sim.prepared.grid;
    let (m0, e0) = conserved_quantities(grid, &sim.prepared.state)?;
    let (m1, e1) = conserved_quantities(grid, &end)?;
    let l0 = lyapunov(grid, &sim.prepared.state)?;
    let l1 = lyapunov(grid, &end)?;
    let repr_residual = reconstruct_v(&sim.history, end.t).ok().map(|r| r.residual_max);
    Ok(LevelResult {
        n_cells: cfg.n_cells,
        mass_drift: (m1 - m0).abs(),
        energy_drift: (e1 - e0).abs(),
        lyapunov_residual: (l1 - l0 + sim.history.current().w_integral).abs(),
        repr_residual,
        final_state: end,
    })
}

/// Largest nodal difference over all four fields, fine grid restricted to coarse nodes.
pub fn restricted_difference(coarse: &FieldState, fine: &FieldState) -> f64 {
    let pairs = [
        (&coarse.v, &fine.v),
        (&coarse.u, &fine.u),
        (&coarse.chi, &fine.chi),
        (&coarse.theta, &fine.theta),
    ];
    pairs
        .iter()
        .flat_map(|(c, f)| c.iter().enumerate().map(move |(i, x)| (x - f[2 * i]).abs()))
        .fold(0.0, f64::max)
}

/// Repeats the scenario at `n_cells * 2^k`, `k < levels`, and reports observed orders.
pub fn run_refinement(cfg: &RunConfig, levels: usize) -> Result<RefinementTable> {
    if !(2..=5).contains(&levels) {
        return Err(NsacError::InvalidParam(format!("refinement needs 2..=5 levels, got {levels}")));
    }
    cfg.validate()?;
    let mut results = Vec::new();
    let mut failure = None;
    for k in 0..levels {
        let level_cfg = RunConfig { n_cells: cfg.n_cells << k, output_dir: None, ..cfg.clone() };
        match run_level(&level_cfg) {
            Ok(r) => results.push(r),
            Err(e) => {
                failure = Some(format!("n_cells = {}: {e}", level_cfg.n_cells));
                break;
            }
        }
    }
    let orders = |f: fn(&LevelResult) -> Option<f64>| -> Vec<Order> {
        results.windows(2).map(|w| Order::between(f(&w[0]), f(&w[1]))).collect()
    };
    let energy_orders = orders(|r| Some(r.energy_drift));
    let lyapunov_orders = orders(|r| Some(r.lyapunov_residual));
    let repr_orders = orders(|r| r.repr_residual);
    let solution_diffs: Vec<f64> = results
        .windows(2)
        .map(|w| restricted_difference(&w[0].final_state, &w[1].final_state))
        .collect();
    let solution_orders = solution_diffs
        .windows(2)
        .map(|d| Order::between(Some(d[0]), Some(d[1])))
        .collect();
    Ok(RefinementTable {
        levels: results,
        solution_diffs,
        solution_orders,
        energy_orders,
        lyapunov_orders,
        repr_orders,
        failure,
    })
}

impl RefinementTable {
    /// CSV with one row per level; orders sit on the finer level of each pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n_cells,mass_drift,energy_drift,energy_order,lyapunov_residual,lyapunov_order,repr_residual,repr_order,solution_diff,solution_order\n",
        );
        for (k, l) in self.levels.iter().enumerate() {
            let order = |v: &Vec<Order>| if k == 0 { "-".to_string() } else { v[k - 1].to_string() };
            let diff = if k == 0 { "-".to_string() } else { fmt_f64(self.solution_diffs[k - 1]) };
            let sol = if k < 2 { "-".to_string() } else { self.solution_orders[k - 2].to_string() };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                l.n_cells,
                fmt_f64(l.mass_drift),
                fmt_f64(l.energy_drift),
                order(&self.energy_orders),
                fmt_f64(l.lyapunov_residual),
                order(&self.lyapunov_orders),
                l.repr_residual.map_or("n/a".into(), fmt_f64),
                order(&self.repr_orders),
                diff,
                sol
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub n_cells: usize,
    pub status: String,
    pub passed: bool,
    pub min_v: f64,
    pub min_theta: f64,
    pub smallness: Option<Smallness>,
    pub message: Option<String>,
}

pub const SWEEP_HEADER: &str = "alpha,beta,n_cells,status,passed,min_v,min_theta,alpha_h,cond1,cond2";

fn sweep_row(cfg: &RunConfig) -> SweepRow {
    let base = SweepRow {
        alpha: cfg.params.alpha,
        beta: cfg.params.beta,
        n_cells: cfg.n_cells,
        status: "error".into(),
        passed: false,
        min_v: f64::NAN,
        min_theta: f64::NAN,
        smallness: None,
        message: None,
    };
    match run_single(cfg) {
        Ok(s) => SweepRow {
            status: s.status.as_str().into(),
            passed: s.passed(),
            min_v: s.assessment.as_ref().map_or(f64::NAN, |a| a.min_v),
            min_theta: s.assessment.as_ref().map_or(f64::NAN, |a| a.min_theta),
            smallness: s.smallness,
            message: s.message,
            ..base
        },
        Err(e) => SweepRow { message: Some(e.to_string()), ..base },
    }
}

fn sweep_dir(root: &Path, alpha: f64, beta: f64, n: usize) -> PathBuf {
    root.join(format!("alpha{alpha}_beta{beta}_n{n}"))
}

/// Cartesian product of the sweep axes; every entry is an independent
/// [`run_single`], executed concurrently. Failures are recorded per row.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    if cfg.sweep_alpha.is_empty() || cfg.sweep_beta.is_empty() {
        return Err(NsacError::InvalidParam("sweep needs nonempty sweep_alpha and sweep_beta".into()));
    }
    let ns = if cfg.sweep_n_cells.is_empty() { vec![cfg.n_cells] } else { cfg.sweep_n_cells.clone() };
    let mut entries = Vec::new();
    for &alpha in &cfg.sweep_alpha {
        for &beta in &cfg.sweep_beta {
            for &n in &ns {
                let mut c = cfg.clone();
                c.params.alpha = alpha;
                c.params.beta = beta;
                c.n_cells = n;
                c.output_dir = cfg.output_dir.as_deref().map(|d| sweep_dir(d, alpha, beta, n));
                entries.push(c);
            }
        }
    }
    let rows: Vec<SweepRow> = entries.par_iter().map(sweep_row).collect();
    if let Some(dir) = &cfg.output_dir {
        let path = dir.join("sweep.csv");
        let mut text = String::from(SWEEP_HEADER);
        text.push('\n');
        for r in &rows {
            let (ah, c1, c2) = r.smallness.map_or(("n/a".into(), "n/a".into(), "n/a".into()), |s| {
                (fmt_f64(s.alpha_h), s.cond1.to_string(), s.cond2.to_string())
            });
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                fmt_f64(r.alpha),
                fmt_f64(r.beta),
                r.n_cells,
                r.status,
                r.passed,
                fmt_f64(r.min_v),
                fmt_f64(r.min_theta),
                ah,
                c1,
                c2
            ));
        }
        std::fs::create_dir_all(dir).map_err(|e| NsacError::io(dir, e))?;
        std::fs::write(&path, text).map_err(|e| NsacError::io(&path, e))?;
    }
    Ok(rows)
}
