//! Grid, parameters, field state and initial data.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::discretization;
use crate::error::{NsacError, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 8;

/// Slack used when checking `chi <= 1` on constructed data.
const CHI_UPPER_SLACK: f64 = 1e-12;

/// Uniform partition of the mass coordinate interval `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
    dx: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(NsacError::GridTooSmall(n_cells));
        }
        let dx = 1.0 / n_cells as f64;
        let nodes = (0..=n_cells).map(|i| i as f64 / n_cells as f64).collect();
        Ok(Grid { n_cells, dx, nodes })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub(crate) fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(NsacError::LengthMismatch {
                expected: self.len(),
                actual: f.len(),
            });
        }
        Ok(())
    }

    /// Evaluate `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Shorthand for [`Grid::new`].
pub fn build_grid(n_cells: usize) -> Result<Grid> {
    Grid::new(n_cells)
}

/// Physical exponents, fixed constants, floors and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Exponent of the phase-dependent viscosity `eta(chi) = eta_tilde * chi^alpha`.
    pub alpha: f64,
    /// Exponent of the conductivity `kappa(theta) = kappa_tilde * theta^beta`.
    pub beta: f64,
    pub r: f64,
    pub c_v: f64,
    pub eta_tilde: f64,
    pub kappa_tilde: f64,
    pub delta: f64,
    pub v_floor: f64,
    pub theta_floor: f64,
    pub chi_floor: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    /// Slack of the maximum-principle flag.
    pub tol_mp: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 0.0,
            beta: 1.0,
            r: 1.0,
            c_v: 1.0,
            eta_tilde: 1.0,
            kappa_tilde: 1.0,
            delta: 1.0,
            v_floor: 1e-8,
            theta_floor: 1e-8,
            chi_floor: 1e-8,
            cfl_safety: 0.4,
            t_end: 5.0,
            tol_mp: 1e-8,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NsacError::InvalidParam(msg));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be > 0, got {}", self.beta));
        }
        for (name, value) in [("eta_tilde", self.eta_tilde), ("kappa_tilde", self.kappa_tilde)] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{name} must be > 0, got {value}"));
            }
        }
        // The Lagrangian system is only implemented in its unit-constant form.
        for (name, value) in [("R", self.r), ("c_v", self.c_v), ("delta", self.delta)] {
            if value != 1.0 {
                return bad(format!("{name} must equal 1, got {value}"));
            }
        }
        for (name, value) in [
            ("v_floor", self.v_floor),
            ("theta_floor", self.theta_floor),
            ("chi_floor", self.chi_floor),
            ("tol_mp", self.tol_mp),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{name} must be > 0, got {value}"));
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        Ok(())
    }

    /// Viscosity `eta(chi)`.
    #[inline]
    pub fn eta(&self, chi: f64) -> f64 {
        if self.alpha == 0.0 {
            self.eta_tilde
        } else {
            self.eta_tilde * (self.alpha * chi.ln()).exp()
        }
    }

    /// [`Params::eta`] over a slice.
    #[inline(always)]
    pub(crate) fn eta_into(&self, chi: &[f64], out: &mut [f64]) {
        if self.alpha == 0.0 {
            out.fill(self.eta_tilde);
        } else {
            for (e, &c) in out.iter_mut().zip(chi) {
                *e = self.eta_tilde * (self.alpha * c.ln()).exp();
            }
        }
    }

    /// Replaces every temperature in `theta` by [`Params::kappa`] of it.
    #[inline(always)]
    pub(crate) fn kappa_in_place(&self, theta: &mut [f64]) {
        let k = self.kappa_tilde;
        if self.beta == 1.0 {
            theta.iter_mut().for_each(|t| *t *= k);
        } else if self.beta == 2.0 {
            theta.iter_mut().for_each(|t| *t = k * *t * *t);
        } else {
            theta.iter_mut().for_each(|t| *t = self.kappa(*t));
        }
    }

    /// Heat conductivity `kappa(theta)`.
    #[inline]
    pub fn kappa(&self, theta: f64) -> f64 {
        let base = if self.beta == 1.0 {
            theta
        } else if self.beta == 2.0 {
            theta * theta
        } else if self.beta == 0.5 {
            theta.sqrt()
        } else if self.beta.fract() == 0.0 && self.beta <= 16.0 {
            theta.powi(self.beta as i32)
        } else {
            theta.powf(self.beta)
        };
        self.kappa_tilde * base
    }
}

/// The four unknowns at one instant plus the cached chemical potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub chi: Vec<f64>,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
}

impl FieldState {
    /// Builds a state and caches `mu`. Fails on length mismatch or nonpositive `v`.
    pub fn new(
        grid: &Grid,
        t: f64,
        v: Vec<f64>,
        u: Vec<f64>,
        chi: Vec<f64>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        for f in [&v, &u, &chi, &theta] {
            grid.check_len(f)?;
        }
        let mu = discretization::mu_from_fields(grid, &v, &chi)?;
        Ok(FieldState {
            t,
            v,
            u,
            chi,
            theta,
            mu,
        })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Reflection `x -> 1 - x`, `u -> -u`.
    pub fn reflected(&self, grid: &Grid) -> Result<Self> {
        let rev = |f: &[f64]| f.iter().rev().copied().collect::<Vec<_>>();
        let u = self.u.iter().rev().map(|&x| -x).collect();
        FieldState::new(grid, self.t, rev(&self.v), u, rev(&self.chi), rev(&self.theta))
    }
}

/// Amplitudes of the cosine-perturbation preset:
/// `v0 = 1 + amp_v cos(pi x)`, `u0 = amp_u sin(pi x)`,
/// `chi0 = chi_base + amp_chi cos(pi x)`, `theta0 = theta_base + amp_theta cos(pi x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineAmplitudes {
    pub amp_v: f64,
    pub amp_u: f64,
    pub amp_chi: f64,
    pub chi_base: f64,
    pub amp_theta: f64,
    pub theta_base: f64,
}

impl Default for CosineAmplitudes {
    fn default() -> Self {
        CosineAmplitudes {
            amp_v: 0.1,
            amp_u: 0.1,
            amp_chi: 0.3,
            chi_base: 0.7,
            amp_theta: 0.1,
            theta_base: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Preset {
    Steady,
    Cosine(CosineAmplitudes),
    Tabulated(PathBuf),
}

pub fn make_initial_state(grid: &Grid, preset: &Preset) -> Result<FieldState> {
    let (v, mut u, chi, theta) = match preset {
        Preset::Steady => {
            let n = grid.len();
            (vec![1.0; n], vec![0.0; n], vec![1.0; n], vec![1.0; n])
        }
        Preset::Cosine(a) => (
            grid.sample(|x| 1.0 + a.amp_v * (PI * x).cos()),
            grid.sample(|x| a.amp_u * (PI * x).sin()),
            grid.sample(|x| a.chi_base + a.amp_chi * (PI * x).cos()),
            grid.sample(|x| a.theta_base + a.amp_theta * (PI * x).cos()),
        ),
        Preset::Tabulated(path) => read_tabulated(grid, path)?,
    };
    // sin(pi) is not exactly zero in floating point
    let last = u.len() - 1;
    u[0] = 0.0;
    u[last] = 0.0;

    if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
        return Err(NsacError::InvalidInitialData(format!(
            "v0 = {} at node {i} is not positive",
            v[i]
        )));
    }
    if let Some(i) = theta.iter().position(|&x| !(x > 0.0)) {
        return Err(NsacError::InvalidInitialData(format!(
            "theta0 = {} at node {i} is not positive",
            theta[i]
        )));
    }
    if let Some(i) = chi
        .iter()
        .position(|&x| !(x > 0.0 && x <= 1.0 + CHI_UPPER_SLACK))
    {
        return Err(NsacError::InvalidInitialData(format!(
            "chi0 = {} at node {i} is outside (0, 1]",
            chi[i]
        )));
    }
    FieldState::new(grid, 0.0, v, u, chi, theta)
}

type Columns = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// Reads `x v u chi theta` rows (whitespace or comma separated, `#` comments,
/// optional header line).
fn read_tabulated(grid: &Grid, path: &Path) -> Result<Columns> {
    let text = std::fs::read_to_string(path).map_err(|e| NsacError::io(path, e))?;
    let parse_err = |message: String| NsacError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut cols: Columns = Default::default();
    let mut xs = Vec::new();
    let mut rows = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if rows == 0 && tokens.first().is_some_and(|t| t.parse::<f64>().is_err()) {
            continue; // header
        }
        if tokens.len() != 5 {
            return Err(parse_err(format!(
                "line {}: expected 5 columns (x v u chi theta), found {}",
                lineno + 1,
                tokens.len()
            )));
        }
        let mut vals = [0.0; 5];
        for (slot, tok) in vals.iter_mut().zip(&tokens) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(format!("line {}: cannot parse {tok:?}", lineno + 1)))?;
        }
        xs.push((lineno + 1, vals[0]));
        cols.0.push(vals[1]);
        cols.1.push(vals[2]);
        cols.2.push(vals[3]);
        cols.3.push(vals[4]);
        rows += 1;
    }
    if rows != grid.len() {
        return Err(parse_err(format!(
            "table has {rows} rows, grid has {} nodes",
            grid.len()
        )));
    }
    for ((lineno, x), node) in xs.into_iter().zip(grid.nodes()) {
        if (x - node).abs() > 1e-9 {
            return Err(parse_err(format!("line {lineno}: x = {x} does not match grid node {node}")));
        }
    }
    Ok(cols)
}

/// Outcome of [`normalize_initial_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub state: FieldState,
    pub normalized: bool,
    /// Additive shift applied to theta (zero when normalization was refused).
    pub theta_shift: f64,
    pub note: Option<String>,
}

/// Rescales `v` to unit mass, then shifts `theta` so the total energy is one.
pub fn normalize_initial_data(grid: &Grid, state: &FieldState, params: &Params) -> Result<Normalized> {
    let mass = diagnostics::trapezoid(grid, &state.v)?;
    let v: Vec<f64> = state.v.iter().map(|&x| x / mass).collect();
    let scaled = FieldState::new(
        grid,
        state.t,
        v,
        state.u.clone(),
        state.chi.clone(),
        state.theta.clone(),
    )?;
    let (_, energy) = diagnostics::conserved_quantities(grid, &scaled)?;
    let shift = 1.0 - energy;
    let min_theta = scaled.theta.iter().copied().fold(f64::INFINITY, f64::min);
    if min_theta + shift <= params.theta_floor {
        return Ok(Normalized {
            state: state.clone(),
            normalized: false,
            theta_shift: 0.0,
            note: Some(format!(
                "energy shift {shift:e} would push min theta0 to {:e}",
                min_theta + shift
            )),
        });
    }
    let theta = scaled.theta.iter().map(|&x| x + shift).collect();
    let state = FieldState { theta, ..scaled };
    Ok(Normalized {
        state,
        normalized: true,
        theta_shift: shift,
        note: None,
    })
}

/// Measured properties of initial data against the global-existence hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataReport {
    /// `min` over nodes of `min(v0, chi0, theta0)`.
    pub v0_estimate: f64,
    /// Discrete surrogate of `||(v0,u0,theta0)||_{H^2} + ||chi0||_{H^3}`.
    pub m0_estimate: f64,
    pub mass0: f64,
    pub energy0: f64,
    /// Lyapunov functional at t = 0.
    pub e0: f64,
    pub gamma1: f64,
    pub compliant: bool,
}

pub fn validate_initial_data(grid: &Grid, state: &FieldState) -> Result<InitialDataReport> {
    let v0_estimate = state
        .v
        .iter()
        .chain(&state.chi)
        .chain(&state.theta)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let h2 = |f: &[f64]| diagnostics::sobolev_norm(grid, f, 2);
    let (nv, nu, nt) = (h2(&state.v)?, h2(&state.u)?, h2(&state.theta)?);
    let m0_estimate =
        (nv * nv + nu * nu + nt * nt).sqrt() + diagnostics::sobolev_norm(grid, &state.chi, 3)?;
    let (mass0, energy0) = diagnostics::conserved_quantities(grid, state)?;
    let e0 = diagnostics::lyapunov(grid, state)?;
    let chi_max = state.chi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(InitialDataReport {
        v0_estimate,
        m0_estimate,
        mass0,
        energy0,
        e0,
        gamma1: (-e0).exp(),
        compliant: v0_estimate > 0.0 && chi_max <= 1.0 + CHI_UPPER_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_basics() {
        let g = Grid::new(8).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.dx(), 0.125);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[8], 1.0);
        assert_eq!(g.nodes()[3], 0.375);
        assert!(matches!(Grid::new(1), Err(NsacError::GridTooSmall(1))));
        assert!(Grid::new(7).is_err());
        assert_eq!(Grid::new(256).unwrap().nodes()[128], 0.5);
    }

    #[test]
    fn params_validation() {
        assert!(Params::default().validate().is_ok());
        let p = Params { beta: 0.0, ..Params::default() };
        assert!(p.validate().is_err());
        let p = Params { alpha: -0.1, ..Params::default() };
        assert!(p.validate().is_err());
        let p = Params { cfl_safety: 1.5, ..Params::default() };
        assert!(p.validate().is_err());
        let p = Params { r: 2.0, ..Params::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn constitutive_laws() {
        let p = Params { alpha: 0.5, beta: 3.0, ..Params::default() };
        assert_abs_diff_eq!(p.eta(0.25), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.kappa(2.0), 8.0, epsilon = 1e-12);
        assert_eq!(Params::default().eta(0.3), 1.0);
    }

    #[test]
    fn steady_preset() {
        let g = Grid::new(16).unwrap();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        assert!(s.v.iter().all(|&x| x == 1.0));
        assert!(s.u.iter().all(|&x| x == 0.0));
        assert!(s.chi.iter().all(|&x| x == 1.0));
        assert!(s.theta.iter().all(|&x| x == 1.0));
        assert!(s.mu.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cosine_preset_values() {
        let g = Grid::new(64).unwrap();
        let a = CosineAmplitudes::default();
        let s = make_initial_state(&g, &Preset::Cosine(a)).unwrap();
        assert_abs_diff_eq!(s.chi[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.chi[64], 0.4, epsilon = 1e-15);
        assert!(s.chi.iter().all(|&c| (0.4 - 1e-15..=1.0 + 1e-15).contains(&c)));
        assert_eq!(s.u[0], 0.0);
        assert_eq!(s.u[64], 0.0);
    }

    #[test]
    fn cosine_preset_rejects_out_of_range() {
        let g = Grid::new(16).unwrap();
        let too_high = CosineAmplitudes { chi_base: 0.9, amp_chi: 0.3, ..Default::default() };
        assert!(matches!(
            make_initial_state(&g, &Preset::Cosine(too_high)),
            Err(NsacError::InvalidInitialData(_))
        ));
        let neg_v = CosineAmplitudes { amp_v: 1.5, ..Default::default() };
        assert!(make_initial_state(&g, &Preset::Cosine(neg_v)).is_err());
        let neg_theta = CosineAmplitudes { amp_theta: -1.2, ..Default::default() };
        assert!(make_initial_state(&g, &Preset::Cosine(neg_theta)).is_err());
    }

    #[test]
    fn preset_boundaries_are_exact() {
        use crate::discretization::{ddx_central, Bc};
        let g = Grid::new(32).unwrap();
        let s = make_initial_state(&g, &Preset::Cosine(Default::default())).unwrap();
        let n = g.n_cells();
        for f in [&s.chi, &s.theta] {
            let d = ddx_central(&g, f, Bc::EvenExtension).unwrap();
            assert_eq!(d[0], 0.0);
            assert_eq!(d[n], 0.0);
        }
        assert_eq!((s.u[0], s.u[n]), (0.0, 0.0));
    }

    #[test]
    fn tabulated_round_trip_and_wrong_count() {
        let g = Grid::new(8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ic.txt");
        let mut text = String::from("x v u chi theta\n");
        for &x in g.nodes() {
            text.push_str(&format!("{x} 1.0 0.0 {} 1.5\n", 0.9 + 0.1 * (PI * x).cos()));
        }
        std::fs::write(&path, &text).unwrap();
        let s = make_initial_state(&g, &Preset::Tabulated(path.clone())).unwrap();
        assert_eq!(s.theta[3], 1.5);
        assert_abs_diff_eq!(s.chi[0], 1.0, epsilon = 1e-15);

        let g16 = Grid::new(16).unwrap();
        let err = make_initial_state(&g16, &Preset::Tabulated(path)).unwrap_err();
        assert!(err.to_string().contains("9 rows"), "{err}");
    }

    #[test]
    fn normalize_fixed_point_and_scaling() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let n = normalize_initial_data(&g, &s, &p).unwrap();
        assert!(n.normalized);
        assert_eq!(n.state, s);

        let doubled = FieldState::new(&g, 0.0, vec![2.0; 17], s.u.clone(), s.chi.clone(), s.theta.clone()).unwrap();
        let n = normalize_initial_data(&g, &doubled, &p).unwrap();
        assert!(n.state.v.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn normalize_cosine_and_idempotence() {
        let g = Grid::new(64).unwrap();
        let p = Params::default();
        let amps = CosineAmplitudes { amp_v: 0.2, amp_u: 0.3, ..Default::default() };
        let s = make_initial_state(&g, &Preset::Cosine(amps)).unwrap();
        let once = normalize_initial_data(&g, &s, &p).unwrap();
        assert!(once.normalized);
        // Re-measure both integrals independently of the normalizer.
        let (mass, energy) = diagnostics::conserved_quantities(&g, &once.state).unwrap();
        assert!((mass - 1.0).abs() <= 1e-12);
        assert!((energy - 1.0).abs() <= 1e-12);
        let twice = normalize_initial_data(&g, &once.state, &p).unwrap();
        for (a, b) in once.state.theta.iter().zip(&twice.state.theta) {
            assert!((a - b).abs() <= 1e-14);
        }
        for (a, b) in once.state.v.iter().zip(&twice.state.v) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn normalize_refuses_negative_theta() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        // Large kinetic energy forces a shift below zero.
        let u: Vec<f64> = g.sample(|x| 3.0 * (PI * x).sin());
        let s = FieldState::new(&g, 0.0, vec![1.0; 17], u, vec![1.0; 17], vec![0.5; 17]).unwrap();
        let n = normalize_initial_data(&g, &s, &p).unwrap();
        assert!(!n.normalized);
        assert_eq!(n.state, s);
        assert!(n.note.is_some());
    }

    #[test]
    fn validate_steady_and_noncompliant() {
        let g = Grid::new(16).unwrap();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let r = validate_initial_data(&g, &s).unwrap();
        assert_eq!(r.v0_estimate, 1.0);
        assert_eq!(r.e0, 0.0);
        assert_eq!(r.gamma1, 1.0);
        assert!(r.compliant);
        assert_eq!((r.mass0, r.energy0), (1.0, 1.0));

        let chi = g.sample(|x| 1.0 + 0.2 * (PI * x).cos());
        let bad = FieldState::new(&g, 0.0, vec![1.0; 17], vec![0.0; 17], chi, vec![1.0; 17]).unwrap();
        let r = validate_initial_data(&g, &bad).unwrap();
        assert!(!r.compliant);
        assert!(r.gamma1 > 0.0 && r.gamma1 <= 1.0);
    }

    #[test]
    fn validate_e0_matches_diagnostics() {
        let g = Grid::new(64).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Cosine(Default::default())).unwrap();
        let s = normalize_initial_data(&g, &s, &p).unwrap().state;
        let r = validate_initial_data(&g, &s).unwrap();
        let (lyap, _w) = diagnostics::lyapunov_and_w(&g, &s, &p).unwrap();
        assert!((r.e0 - lyap).abs() <= 1e-12);
        assert!(r.gamma1 > 0.0 && r.gamma1 < 1.0);
        assert!(r.m0_estimate.is_finite() && r.m0_estimate > 0.0);
    }
}
