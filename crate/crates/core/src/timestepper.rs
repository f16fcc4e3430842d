//! Explicit RK4 time integration with step control and history recording.

use serde::{Deserialize, Serialize};

use crate::discretization::{check_floors, mu_into, Rhs, RhsWork};
use crate::error::{NsacError, Result};
use crate::representation::{integrands_into, Integrands, RateWork};
use crate::state::{FieldState, Grid, Params};

/// Steps below this size abort the run.
pub const DT_MIN: f64 = 1e-14;

/// Growth factor applied to the step after each accepted step.
const DT_RECOVERY: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub dt_current: f64,
    pub dt_max: f64,
    pub rejects: usize,
    pub accepted: usize,
    pub cfl_safety: f64,
}

impl StepControl {
    pub fn new(params: &Params) -> Self {
        StepControl {
            dt_current: f64::INFINITY,
            dt_max: f64::INFINITY,
            rejects: 0,
            accepted: 0,
            cfl_safety: params.cfl_safety,
        }
    }
}

/// Parabolic step limit `cfl dx^2 / (2 max(eta/v, kappa/v, 1/v))`.
pub fn stable_dt(grid: &Grid, state: &FieldState, params: &Params) -> f64 {
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn coefficient_avx2(state: &FieldState, params: &Params) -> f64 {
        coefficient(state, params)
    }
    #[cfg(target_arch = "x86_64")]
    let coef = if crate::simd::avx2_enabled() {
        // SAFETY: AVX2 support was detected at run time.
        unsafe { coefficient_avx2(state, params) }
    } else {
        coefficient(state, params)
    };
    #[cfg(not(target_arch = "x86_64"))]
    let coef = coefficient(state, params);
    params.cfl_safety * grid.dx() * grid.dx() / (2.0 * coef)
}

#[inline(always)]
fn coefficient(state: &FieldState, params: &Params) -> f64 {
    if params.beta == 1.0 {
        max_coefficient(state, params, |t| params.kappa_tilde * t)
    } else if params.beta == 2.0 {
        max_coefficient(state, params, |t| params.kappa_tilde * (t * t))
    } else {
        max_coefficient(state, params, |t| params.kappa(t))
    }
}

/// `max_i max(eta_i, kappa_i, 1) / v_i`; NaN entries are skipped.
#[inline(always)]
fn max_coefficient(state: &FieldState, params: &Params, kappa: impl Fn(f64) -> f64) -> f64 {
    let n = state.len();
    let (v, chi, theta) = (&state.v[..n], &state.chi[..n], &state.theta[..n]);
    let larger = |a: f64, b: f64| if a > b { a } else { b };
    let mut coef: f64 = 0.0;
    if params.alpha == 0.0 {
        let eta = params.eta_tilde;
        for i in 0..n {
            let top = larger(eta, larger(kappa(theta[i]), 1.0));
            coef = larger(top / v[i], coef);
        }
    } else {
        for i in 0..n {
            let floor = larger(kappa(theta[i]), 1.0);
            // chi^alpha <= 1 for chi <= 1, so eta cannot win when eta_tilde <= floor
            let skip_eta = chi[i] <= 1.0 && params.eta_tilde <= floor;
            let top = if skip_eta { floor } else { larger(params.eta(chi[i]), floor) };
            coef = larger(top / v[i], coef);
        }
    }
    coef
}

/// Classical four-stage integrator over the semi-discrete system.
#[derive(Debug, Clone)]
pub(crate) struct Rk4 {
    work: RhsWork,
    k: [Rhs; 4],
    stage: [Vec<f64>; 4],
    /// Result of the last successful [`Rk4::step_into`].
    pub(crate) out: FieldState,
}

impl Rk4 {
    pub(crate) fn new(grid: &Grid) -> Self {
        let n = grid.len();
        Rk4 {
            work: RhsWork::new(grid),
            k: std::array::from_fn(|_| Rhs::zeros(n)),
            stage: std::array::from_fn(|_| vec![0.0; n]),
            out: FieldState {
                t: 0.0,
                v: vec![0.0; n],
                u: vec![0.0; n],
                chi: vec![0.0; n],
                theta: vec![0.0; n],
                mu: vec![0.0; n],
            },
        }
    }

    #[inline(always)]
    fn eval_stage(&mut self, params: &Params, idx: usize) -> Result<()> {
        let [v, u, chi, theta] = &self.stage;
        self.work.eval(params, v, u, chi, theta, &mut self.k[idx])
    }

    #[inline(always)]
    fn set_stage(&mut self, state: &FieldState, from: Option<usize>, h: f64) {
        let fields = [&state.v, &state.u, &state.chi, &state.theta];
        for (f, base) in fields.iter().enumerate() {
            let out = &mut self.stage[f];
            match from {
                None => out.copy_from_slice(base),
                Some(k) => axpy(out, base, h, rhs_field(&self.k[k], f)),
            }
        }
    }

    /// One step from `state`; the result is left in `self.out`.
    pub(crate) fn step_into(&mut self, grid: &Grid, state: &FieldState, dt: f64, params: &Params) -> Result<()> {
        #[cfg(target_arch = "x86_64")]
        if crate::simd::avx2_enabled() {
            // SAFETY: AVX2 support was detected at run time.
            return unsafe { self.step_avx2(grid, state, dt, params) };
        }
        self.step_body(grid, state, dt, params)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn step_avx2(&mut self, grid: &Grid, state: &FieldState, dt: f64, params: &Params) -> Result<()> {
        self.step_body(grid, state, dt, params)
    }

    #[inline(always)]
    fn step_body(&mut self, grid: &Grid, state: &FieldState, dt: f64, params: &Params) -> Result<()> {
        let reject = |e| NsacError::StepRejected(Box::new(e));
        self.set_stage(state, None, 0.0);
        self.eval_stage(params, 0).map_err(reject)?;
        self.set_stage(state, Some(0), 0.5 * dt);
        self.eval_stage(params, 1).map_err(reject)?;
        self.set_stage(state, Some(1), 0.5 * dt);
        self.eval_stage(params, 2).map_err(reject)?;
        self.set_stage(state, Some(2), dt);
        self.eval_stage(params, 3).map_err(reject)?;

        let w = dt / 6.0;
        let out = &mut self.out;
        let targets = [&mut out.v, &mut out.u, &mut out.chi, &mut out.theta];
        let bases = [&state.v, &state.u, &state.chi, &state.theta];
        for (f, (target, base)) in targets.into_iter().zip(bases).enumerate() {
            let [a, b, c, d] = [0, 1, 2, 3].map(|k| rhs_field(&self.k[k], f));
            combine(target, base, w, [a, b, c, d]);
        }
        let last = out.u.len() - 1;
        out.u[0] = 0.0;
        out.u[last] = 0.0;
        out.t = state.t + dt;
        check_floors(params, &out.v, &out.chi, &out.theta).map_err(reject)?;
        mu_into(grid.dx(), &out.v, &out.chi, &mut out.mu).map_err(reject)
    }

    pub(crate) fn step(&mut self, grid: &Grid, state: &FieldState, dt: f64, params: &Params) -> Result<FieldState> {
        self.step_into(grid, state, dt, params)?;
        Ok(self.out.clone())
    }
}

/// `out = base + h * slope`
#[inline(always)]
fn axpy(out: &mut [f64], base: &[f64], h: f64, slope: &[f64]) {
    for ((o, b), s) in out.iter_mut().zip(base).zip(slope) {
        *o = b + h * s;
    }
}

/// `out = base + w * (a + 2 (b + c) + d)`
#[inline(always)]
fn combine(out: &mut [f64], base: &[f64], w: f64, [a, b, c, d]: [&[f64]; 4]) {
    let slopes = a.iter().zip(b).zip(c).zip(d);
    for ((o, x), (((a, b), c), d)) in out.iter_mut().zip(base).zip(slopes) {
        *o = x + w * (a + 2.0 * (b + c) + d);
    }
}

fn rhs_field(r: &Rhs, f: usize) -> &[f64] {
    match f {
        0 => &r.dv_dt,
        1 => &r.du_dt,
        2 => &r.dchi_dt,
        _ => &r.dtheta_dt,
    }
}

/// One RK4 step; a floor violation at any stage rejects the step.
pub fn step_rk(grid: &Grid, state: &FieldState, dt: f64, params: &Params) -> Result<FieldState> {
    for f in [&state.v, &state.u, &state.chi, &state.theta] {
        grid.check_len(f)?;
    }
    Rk4::new(grid).step(grid, state, dt, params)
}

/// A recorded state together with the running time integrals at its time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: FieldState,
    /// `int_0^t int_0^1 ((theta+u^2)/eta + chi_x^2/(2 eta v)) dx dtau`
    pub b_integral: f64,
    /// `int_0^t (u_x/v - theta/(eta v) - chi_x^2/(2 eta v^2) - int_0^x g) dtau` per node.
    pub phi_integral: Vec<f64>,
    /// `int_0^t W dtau`
    pub w_integral: f64,
}

/// Snapshots on a uniform time lattice plus running integrals that are
/// updated on every accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    grid: Grid,
    params: Params,
    interval: f64,
    snapshots: Vec<Snapshot>,
    current: Snapshot,
    #[serde(skip)]
    rates: RateCache,
}

/// Integrands at the last accepted step plus scratch for the next one.
/// Derived data only, so it never takes part in comparisons.
#[derive(Debug, Clone, Default)]
struct RateCache {
    last: Option<Integrands>,
    next: Integrands,
    work: RateWork,
}

impl PartialEq for RateCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Default snapshot spacing: about one `dx`, at least 32 intervals (so that the
/// reconstruction at `t_end / 2` has enough samples), and an even number of
/// intervals so that `t_end / 2` is on the lattice.
pub fn default_snapshot_interval(grid: &Grid, t_end: f64) -> f64 {
    let mut m = ((t_end / grid.dx()).ceil() as usize).max(2 * crate::representation::MIN_SNAPSHOTS);
    if m % 2 == 1 {
        m += 1;
    }
    t_end / m as f64
}

impl History {
    pub fn new(grid: &Grid, params: &Params, initial: &FieldState, interval: f64) -> Result<Self> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(NsacError::InvalidParam(format!("snapshot interval {interval}")));
        }
        for f in [&initial.v, &initial.u, &initial.chi, &initial.theta] {
            grid.check_len(f)?;
        }
        let first = Snapshot {
            state: initial.clone(),
            b_integral: 0.0,
            phi_integral: vec![0.0; grid.len()],
            w_integral: 0.0,
        };
        Ok(History {
            grid: grid.clone(),
            params: params.clone(),
            interval,
            snapshots: vec![first.clone()],
            current: first,
            rates: RateCache::default(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// Running integrals at the most recent accepted step.
    pub fn current(&self) -> &Snapshot {
        &self.current
    }

    pub fn end_time(&self) -> f64 {
        self.current.state.t
    }

    /// Snapshot `k` sits at `t0 + k * interval`; counting the stored ones
    /// (rather than dividing the current time) cannot skip a lattice point
    /// when the running time drifts by rounding.
    fn next_sample_time(&self) -> f64 {
        self.snapshots[0].state.t + self.snapshots.len() as f64 * self.interval
    }

    pub fn snapshot_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.snapshots
            .binary_search_by(|s| s.state.t.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
            .ok()
            .or_else(|| self.snapshots.iter().position(|s| (s.state.t - t).abs() <= tol))
            .ok_or(NsacError::TimeOutOfRange {
                t,
                start: self.snapshots[0].state.t,
                end: self.snapshots.last().map_or(0.0, |s| s.state.t),
            })
    }

    pub fn snapshot_at(&self, t: f64) -> Result<&Snapshot> {
        Ok(&self.snapshots[self.snapshot_index(t)?])
    }

    /// Folds an accepted step into the running integrals (trapezoid in time).
    fn accept(&mut self, state: &FieldState, is_sample: bool) -> Result<()> {
        let h = state.t - self.current.state.t;
        let cache = &mut self.rates;
        if cache.last.is_none() {
            let mut first = Integrands::default();
            integrands_into(&mut cache.work, &self.grid, &self.current.state, &self.params, &mut first)?;
            cache.last = Some(first);
        }
        integrands_into(&mut cache.work, &self.grid, state, &self.params, &mut cache.next)?;
        let (old, new) = (cache.last.as_mut().expect("filled above"), &mut cache.next);
        self.current.b_integral += 0.5 * h * (old.b_rate + new.b_rate);
        self.current.w_integral += 0.5 * h * (old.w_rate + new.w_rate);
        trapezoid_step(&mut self.current.phi_integral, &old.phi_rate, &new.phi_rate, h);
        std::mem::swap(old, new);
        self.current.state.clone_from(state);
        if is_sample {
            self.snapshots.push(self.current.clone());
        }
        Ok(())
    }
}

/// `acc += h/2 (a + b)` elementwise.
fn trapezoid_step(acc: &mut [f64], a: &[f64], b: &[f64], h: f64) {
    #[inline(always)]
    fn kernel(acc: &mut [f64], a: &[f64], b: &[f64], h: f64) {
        for ((acc, a), b) in acc.iter_mut().zip(a).zip(b) {
            *acc += 0.5 * h * (a + b);
        }
    }
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn kernel_avx2(acc: &mut [f64], a: &[f64], b: &[f64], h: f64) {
        kernel(acc, a, b, h)
    }
    #[cfg(target_arch = "x86_64")]
    if crate::simd::avx2_enabled() {
        // SAFETY: AVX2 support was detected at run time.
        return unsafe { kernel_avx2(acc, a, b, h) };
    }
    kernel(acc, a, b, h)
}

/// Stateful driver: step control plus reusable RK buffers.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: Grid,
    params: Params,
    control: StepControl,
    rk: Rk4,
}

impl Integrator {
    pub fn new(grid: &Grid, params: &Params) -> Self {
        Integrator {
            grid: grid.clone(),
            params: params.clone(),
            control: StepControl::new(params),
            rk: Rk4::new(grid),
        }
    }

    pub fn control(&self) -> &StepControl {
        &self.control
    }

    /// Advances to exactly `t_target`, landing on every snapshot time on the way.
    pub fn advance(
        &mut self,
        state: &FieldState,
        t_target: f64,
        history: &mut History,
    ) -> Result<FieldState> {
        if (history.end_time() - state.t).abs() > 1e-12 * state.t.abs().max(1.0) {
            return Err(NsacError::InvalidParam(format!(
                "history ends at t = {}, state is at t = {}",
                history.end_time(),
                state.t
            )));
        }
        let mut current = state.clone();
        let eps = 1e-12 * t_target.abs().max(1.0);
        while current.t < t_target - eps {
            let stable = stable_dt(&self.grid, &current, &self.params);
            self.control.dt_max = stable;
            self.control.dt_current = self.control.dt_current.min(stable);

            let sample_t = history.next_sample_time();
            let mut h = self.control.dt_current;
            let mut land_at = None;
            let mut is_sample = false;
            for (stop, sample) in [(t_target, false), (sample_t, true)] {
                let remaining = stop - current.t;
                // never leave a remainder the loop condition would ignore
                if h * (1.0 + 1e-9) + eps >= remaining {
                    h = remaining;
                    land_at = Some(stop);
                    is_sample = sample;
                }
            }
            if let Some(stop) = land_at {
                is_sample = is_sample || (stop - sample_t).abs() <= eps;
            }

            match self.rk.step_into(&self.grid, &current, h, &self.params) {
                Ok(()) => {
                    let next = &mut self.rk.out;
                    if let Some(stop) = land_at {
                        next.t = stop;
                    }
                    history.accept(next, is_sample)?;
                    std::mem::swap(&mut current, next);
                    self.control.accepted += 1;
                    self.control.dt_current = (self.control.dt_current * DT_RECOVERY).min(stable);
                }
                Err(cause) => {
                    self.control.rejects += 1;
                    self.control.dt_current *= 0.5;
                    if self.control.dt_current < DT_MIN {
                        return Err(NsacError::DtUnderflow { t: current.t, cause: Box::new(cause) });
                    }
                }
            }
        }
        Ok(current)
    }
}

/// Convenience wrapper around [`Integrator::advance`] with fresh step control.
pub fn advance(
    grid: &Grid,
    state: &FieldState,
    t_target: f64,
    params: &Params,
    history: &mut History,
) -> Result<FieldState> {
    Integrator::new(grid, params).advance(state, t_target, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::trapezoid;
    use crate::state::{make_initial_state, CosineAmplitudes, Preset};
    use approx::assert_abs_diff_eq;

    #[test]
    fn stable_dt_examples() {
        let p = Params::default();
        let g = Grid::new(8).unwrap();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        assert_abs_diff_eq!(stable_dt(&g, &s, &p), 3.125e-3, epsilon = 1e-18);
        let g16 = Grid::new(16).unwrap();
        let s16 = make_initial_state(&g16, &Preset::Steady).unwrap();
        assert_abs_diff_eq!(stable_dt(&g16, &s16, &p), 3.125e-3 / 4.0, epsilon = 1e-18);
        let hot = FieldState::new(&g, 0.0, vec![1.0; 9], vec![0.0; 9], vec![1.0; 9], vec![4.0; 9]).unwrap();
        assert_abs_diff_eq!(stable_dt(&g, &hot, &p), 3.125e-3 / 4.0, epsilon = 1e-18);
    }

    #[test]
    fn steady_step_is_identity() {
        let g = Grid::new(16).unwrap();
        let p = Params { alpha: 0.1, beta: 3.0, ..Params::default() };
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let next = step_rk(&g, &s, 1e-3, &p).unwrap();
        assert_eq!(next.v, s.v);
        assert_eq!(next.theta, s.theta);
        assert_eq!(next.chi, s.chi);
        assert_eq!(next.u, s.u);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = Grid::new(64).unwrap();
        let p = Params::default();
        let amps = CosineAmplitudes { amp_theta: 0.5, ..Default::default() };
        let s = make_initial_state(&g, &Preset::Cosine(amps)).unwrap();
        let before = s.clone();
        match step_rk(&g, &s, 0.5, &p) {
            Err(NsacError::StepRejected(_)) => {}
            other => panic!("expected rejection, got {:?}", other.map(|s| s.t)),
        }
        assert_eq!(s, before);
    }

    #[test]
    fn every_lattice_time_is_recorded_despite_clock_drift() {
        // hundreds of equal steps per interval: the running time drifts off
        // the lattice by rounding well before t = 3
        let g = Grid::new(64).unwrap();
        let p = Params { t_end: 3.0, ..Params::default() };
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let interval = default_snapshot_interval(&g, p.t_end);
        let mut h = History::new(&g, &p, &s, interval).unwrap();
        advance(&g, &s, p.t_end, &p, &mut h).unwrap();
        assert_eq!(h.snapshots().len(), 193);
        for (k, snap) in h.snapshots().iter().enumerate() {
            assert_eq!(snap.state.t, k as f64 * interval);
        }
    }

    #[test]
    fn steady_advance_and_identity_interval() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let mut h = History::new(&g, &p, &s, 0.25).unwrap();
        let mut integ = Integrator::new(&g, &p);
        let out = integ.advance(&s, 5.0, &mut h).unwrap();
        assert_eq!(out.t, 5.0);
        assert_eq!(integ.control().rejects, 0);
        for (a, b) in out.v.iter().zip(&s.v) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(h.snapshots().len(), 21);
        let again = integ.advance(&out, 5.0, &mut h).unwrap();
        assert_eq!(again, out);
        // B's integrand is identically one on the steady state
        assert_abs_diff_eq!(h.current().b_integral, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.snapshot_at(2.5).unwrap().b_integral, 2.5, epsilon = 1e-12);
        assert_eq!(h.current().w_integral, 0.0);
    }

    #[test]
    fn snapshot_times_are_strictly_increasing() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Cosine(Default::default())).unwrap();
        let mut h = History::new(&g, &p, &s, 0.01).unwrap();
        let mid = advance(&g, &s, 0.037, &p, &mut h).unwrap();
        advance(&g, &mid, 0.1, &p, &mut h).unwrap();
        let times: Vec<f64> = h.snapshots().iter().map(|s| s.state.t).collect();
        assert_eq!(times[0], 0.0);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(times.len(), 11);
        assert_abs_diff_eq!(times[10], 0.1, epsilon = 1e-15);
        assert!(h.snapshot_at(0.05).is_ok());
        assert!(h.snapshot_at(0.055).is_err());
    }

    #[test]
    fn mass_is_conserved_by_steps() {
        let g = Grid::new(32).unwrap();
        let p = Params { alpha: 0.05, beta: 2.0, ..Params::default() };
        let s = make_initial_state(&g, &Preset::Cosine(Default::default())).unwrap();
        let m0 = trapezoid(&g, &s.v).unwrap();
        let mut h = History::new(&g, &p, &s, 0.05).unwrap();
        let out = advance(&g, &s, 0.5, &p, &mut h).unwrap();
        assert!((trapezoid(&g, &out.v).unwrap() - m0).abs() <= 1e-12);
    }

    #[test]
    fn history_requires_matching_start() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let mut h = History::new(&g, &p, &s, 0.1).unwrap();
        let mut later = s.clone();
        later.t = 1.0;
        assert!(advance(&g, &later, 2.0, &p, &mut h).is_err());
        assert!(History::new(&g, &p, &s, 0.0).is_err());
    }
}
