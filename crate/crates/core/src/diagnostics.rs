//! Monitored functionals: conserved integrals, Lyapunov functional and
//! dissipation, extrema, discrete Sobolev norms and decay summaries.

use serde::{Deserialize, Serialize};

use crate::discretization::{ddx_central, eval_mu, Bc};
use crate::error::{NsacError, Result};
use crate::state::{FieldState, Grid, Params};

/// Composite trapezoid rule over `[0, 1]`.
pub fn trapezoid(grid: &Grid, f: &[f64]) -> Result<f64> {
    grid.check_len(f)?;
    Ok(trapezoid_unchecked(grid.dx(), f))
}

#[inline(always)]
pub(crate) fn trapezoid_unchecked(dx: f64, f: &[f64]) -> f64 {
    let n = f.len() - 1;
    let inner: f64 = f[1..n].iter().sum();
    dx * (0.5 * (f[0] + f[n]) + inner)
}

/// Running trapezoid integral `F(x_i) = int_0^{x_i} f`.
pub fn cumulative_trapezoid(grid: &Grid, f: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(f)?;
    Ok(cumulative_unchecked(grid.dx(), f))
}

pub(crate) fn cumulative_unchecked(dx: f64, f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in f.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// `Phi(s) = s - ln s - 1`.
#[inline]
pub fn phi(s: f64) -> f64 {
    s - s.ln() - 1.0
}

fn positive(state: &FieldState) -> Result<()> {
    use crate::error::Field;
    for (field, f) in [(Field::V, &state.v), (Field::Theta, &state.theta)] {
        if let Some(node) = f.iter().position(|&x| !(x > 0.0)) {
            return Err(NsacError::FloorViolation { node, field, value: f[node] });
        }
    }
    Ok(())
}

/// Nodal gradient energy `chi_x^2/(2v)`.
///
/// `chi_x^2` at a node is the mean of the squared differences on its two
/// sides of the evenly reflected field (both sides coincide at an end), each
/// divided by the face-averaged `v`. Its trapezoid integral is the energy the
/// semi-discrete scheme balances exactly.
pub fn gradient_energy_density(grid: &Grid, v: &[f64], chi: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(v)?;
    grid.check_len(chi)?;
    let dx = grid.dx();
    let n = grid.n_cells();
    let face: Vec<f64> = (0..n)
        .map(|i| {
            let d = (chi[i + 1] - chi[i]) / dx;
            d * d / (v[i] + v[i + 1])
        })
        .collect();
    let mut out = vec![0.0; n + 1];
    out[0] = face[0];
    out[n] = face[n - 1];
    for i in 1..n {
        out[i] = 0.5 * (face[i - 1] + face[i]);
    }
    Ok(out)
}

/// Density of the total energy `theta + u^2/2 + (chi^2-1)^2/4 + chi_x^2/(2v)`.
fn energy_density(state: &FieldState, grad: &[f64]) -> Vec<f64> {
    (0..state.len())
        .map(|i| {
            let c2 = state.chi[i] * state.chi[i] - 1.0;
            state.theta[i] + 0.5 * state.u[i] * state.u[i] + 0.25 * c2 * c2 + grad[i]
        })
        .collect()
}

/// `(int v, int total energy density)`.
pub fn conserved_quantities(grid: &Grid, state: &FieldState) -> Result<(f64, f64)> {
    let grad = gradient_energy_density(grid, &state.v, &state.chi)?;
    let mass = trapezoid(grid, &state.v)?;
    let energy = trapezoid(grid, &energy_density(state, &grad))?;
    Ok((mass, energy))
}

pub fn lyapunov(grid: &Grid, state: &FieldState) -> Result<f64> {
    positive(state)?;
    let grad = gradient_energy_density(grid, &state.v, &state.chi)?;
    let density: Vec<f64> = (0..state.len())
        .map(|i| {
            let c2 = state.chi[i] * state.chi[i] - 1.0;
            0.5 * state.u[i] * state.u[i]
                + 0.25 * c2 * c2
                + grad[i]
                + phi(state.v[i])
                + phi(state.theta[i])
        })
        .collect();
    trapezoid(grid, &density)
}

/// Dissipation rate
/// `W = int( kappa theta_x^2/(v theta^2) + eta u_x^2/(v theta) + v mu^2/theta )`.
pub fn dissipation(grid: &Grid, state: &FieldState, params: &Params) -> Result<f64> {
    positive(state)?;
    let th_x = ddx_central(grid, &state.theta, Bc::EvenExtension)?;
    let u_x = ddx_central(grid, &state.u, Bc::OddExtension)?;
    let mu = eval_mu(grid, state)?;
    let density: Vec<f64> = (0..state.len())
        .map(|i| {
            let (v, th) = (state.v[i], state.theta[i]);
            params.kappa(th) * th_x[i] * th_x[i] / (v * th * th)
                + params.eta(state.chi[i]) * u_x[i] * u_x[i] / (v * th)
                + v * mu[i] * mu[i] / th
        })
        .collect();
    trapezoid(grid, &density)
}

pub fn lyapunov_and_w(grid: &Grid, state: &FieldState, params: &Params) -> Result<(f64, f64)> {
    Ok((lyapunov(grid, state)?, dissipation(grid, state, params)?))
}

/// Extrema of the unknowns and the maximum-principle verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_v: f64,
    pub max_v: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub min_chi: f64,
    pub max_chi: f64,
    /// `v0 - tol_mp <= chi <= 1 + tol_mp` at every node.
    pub max_principle: bool,
}

fn extrema(f: &[f64]) -> (f64, f64) {
    f.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn bounds_monitor(state: &FieldState, v0: f64, tol_mp: f64) -> Bounds {
    let (min_v, max_v) = extrema(&state.v);
    let (min_theta, max_theta) = extrema(&state.theta);
    let (min_chi, max_chi) = extrema(&state.chi);
    Bounds {
        min_v,
        max_v,
        min_theta,
        max_theta,
        min_chi,
        max_chi,
        max_principle: min_chi >= v0 - tol_mp && max_chi <= 1.0 + tol_mp,
    }
}

/// Tolerances of the mean-temperature band `[gamma1, 1]`.
pub const THETA_BAND_LOWER_TOL: f64 = 1e-6;
pub const THETA_BAND_UPPER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaBarCheck {
    pub theta_bar: f64,
    /// `None` when the run did not start from normalized data.
    pub in_band: Option<bool>,
}

/// Mean temperature and its band check; pass `gamma1 = None` for unnormalized runs.
pub fn theta_bar_check(grid: &Grid, state: &FieldState, gamma1: Option<f64>) -> Result<ThetaBarCheck> {
    let theta_bar = trapezoid(grid, &state.theta)?;
    let in_band = gamma1.map(|g| {
        theta_bar >= g - THETA_BAND_LOWER_TOL && theta_bar <= 1.0 + THETA_BAND_UPPER_TOL
    });
    Ok(ThetaBarCheck { theta_bar, in_band })
}

/// Discrete `H^k` norm: `sqrt(sum_{j<=k} ||d^j f||_{L^2}^2)` with repeated
/// central differences (one-sided at the ends).
pub fn sobolev_norm(grid: &Grid, f: &[f64], order: usize) -> Result<f64> {
    if order > 3 {
        return Err(NsacError::SobolevOrder(order));
    }
    grid.check_len(f)?;
    let sq: Vec<f64> = f.iter().map(|x| x * x).collect();
    let mut total = trapezoid(grid, &sq)?;
    let mut d = f.to_vec();
    for _ in 0..order {
        d = ddx_central(grid, &d, Bc::OneSided)?;
        let sq: Vec<f64> = d.iter().map(|x| x * x).collect();
        total += trapezoid(grid, &sq)?;
    }
    Ok(total.sqrt())
}

/// `||(v_x, u_x, chi_x, theta_x)||_{H^1}^2`.
pub fn sobolev_e(grid: &Grid, state: &FieldState) -> Result<f64> {
    let mut total = 0.0;
    for f in [&state.v, &state.u, &state.chi, &state.theta] {
        let fx = ddx_central(grid, f, Bc::OneSided)?;
        let n = sobolev_norm(grid, &fx, 1)?;
        total += n * n;
    }
    Ok(total)
}

/// Bookkeeping for the smallness hypotheses of the volume bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smallness {
    /// `(1 + 1/m1 + 1/m2 + 1/m3 + N)^8`
    pub h: f64,
    /// `m2^(-alpha) <= 2`
    pub cond1: bool,
    /// `(2N)^alpha <= 1`
    pub cond2: bool,
    /// `alpha * H`; its threshold is not known explicitly.
    pub alpha_h: f64,
}

pub fn smallness_condition(m1: f64, m2: f64, m3: f64, n: f64, alpha: f64) -> Smallness {
    let h = (1.0 + 1.0 / m1 + 1.0 / m2 + 1.0 / m3 + n).powi(8);
    Smallness {
        h,
        cond1: m2.powf(-alpha) <= 2.0,
        cond2: (2.0 * n).powf(alpha) <= 1.0,
        alpha_h: alpha * h,
    }
}

/// Eulerian position `x~(x) = int_0^x v`.
pub fn eulerian_map(grid: &Grid, state: &FieldState) -> Result<Vec<f64>> {
    cumulative_trapezoid(grid, &state.v)
}

/// One row of the monitored time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub total_energy: f64,
    pub lyapunov: f64,
    pub w: f64,
    pub theta_bar: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub min_chi: f64,
    pub max_chi: f64,
    pub sobolev_e: f64,
    pub repr_residual: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn from_state(grid: &Grid, state: &FieldState, params: &Params) -> Result<Self> {
        let (mass, total_energy) = conserved_quantities(grid, state)?;
        let (lyapunov, w) = lyapunov_and_w(grid, state, params)?;
        let b = bounds_monitor(state, 0.0, params.tol_mp);
        Ok(DiagnosticsRecord {
            t: state.t,
            mass,
            total_energy,
            lyapunov,
            w,
            theta_bar: trapezoid(grid, &state.theta)?,
            min_v: b.min_v,
            max_v: b.max_v,
            min_theta: b.min_theta,
            max_theta: b.max_theta,
            min_chi: b.min_chi,
            max_chi: b.max_chi,
            sobolev_e: sobolev_e(grid, state)?,
            repr_residual: None,
        })
    }
}

/// Decay-related quantities of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub t: f64,
    /// `||theta - theta_bar||_inf`
    pub theta_oscillation: f64,
    /// `||u||_inf`
    pub u_max: f64,
    /// `||chi^2 - 1||_{L^1}`
    pub chi_defect: f64,
    pub w: f64,
}

impl DecaySample {
    pub fn from_state(grid: &Grid, state: &FieldState, params: &Params) -> Result<Self> {
        let theta_bar = trapezoid(grid, &state.theta)?;
        let defect: Vec<f64> = state.chi.iter().map(|c| (c * c - 1.0).abs()).collect();
        Ok(DecaySample {
            t: state.t,
            theta_oscillation: state.theta.iter().fold(0.0, |m, &x| m.max((x - theta_bar).abs())),
            u_max: state.u.iter().fold(0.0, |m, &x| m.max(x.abs())),
            chi_defect: trapezoid(grid, &defect)?,
            w: dissipation(grid, state, params)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    /// Identically zero (below 1e-14) over the window.
    Flat,
    Decreasing,
    NotDecreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    pub samples: Vec<DecaySample>,
    /// Running trapezoid of `W` in time, aligned with `samples`.
    pub w_integral: Vec<f64>,
    pub theta_trend: Trend,
    pub u_trend: Trend,
    pub chi_trend: Trend,
}

fn trend(values: &[f64]) -> Trend {
    if values.iter().all(|v| v.abs() < 1e-14) {
        return Trend::Flat;
    }
    let (first, last) = (values[0], values[values.len() - 1]);
    if last < first {
        Trend::Decreasing
    } else {
        Trend::NotDecreasing
    }
}

/// Time series plus trend over the final quartile of the samples.
pub fn long_time_metrics(samples: &[DecaySample]) -> Result<DecaySummary> {
    if samples.len() < 2 {
        return Err(NsacError::TooFewSnapshots { required: 2, available: samples.len() });
    }
    let mut w_integral = vec![0.0];
    for pair in samples.windows(2) {
        let last = *w_integral.last().unwrap();
        w_integral.push(last + 0.5 * (pair[1].t - pair[0].t) * (pair[0].w + pair[1].w));
    }
    let start = (3 * (samples.len() - 1)) / 4;
    let tail = &samples[start..];
    let series = |f: fn(&DecaySample) -> f64| tail.iter().map(f).collect::<Vec<_>>();
    Ok(DecaySummary {
        samples: samples.to_vec(),
        w_integral,
        theta_trend: trend(&series(|s| s.theta_oscillation)),
        u_trend: trend(&series(|s| s.u_max)),
        chi_trend: trend(&series(|s| s.chi_defect)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_initial_state, Preset};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn trapezoid_examples() {
        let g = Grid::new(16).unwrap();
        assert_eq!(trapezoid(&g, &[2.5; 17]).unwrap(), 2.5);
        assert_eq!(trapezoid(&g, g.nodes()).unwrap(), 0.5);
        let c = g.sample(|x| (2.0 * PI * x).cos());
        assert!(trapezoid(&g, &c).unwrap().abs() < 1e-15);
        assert!(trapezoid(&g, &[1.0; 3]).is_err());
        let cum = cumulative_trapezoid(&g, g.nodes()).unwrap();
        assert_abs_diff_eq!(cum[16], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cum[8], 0.125, epsilon = 1e-15);
    }

    #[test]
    fn steady_diagnostics() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        assert_eq!(conserved_quantities(&g, &s).unwrap(), (1.0, 1.0));
        assert_eq!(lyapunov_and_w(&g, &s, &p).unwrap(), (0.0, 0.0));
        let b = bounds_monitor(&s, 1.0, 1e-8);
        assert!(b.max_principle);
        assert_eq!((b.min_v, b.max_chi, b.min_theta), (1.0, 1.0, 1.0));
        let tb = theta_bar_check(&g, &s, Some(1.0)).unwrap();
        assert_eq!(tb, ThetaBarCheck { theta_bar: 1.0, in_band: Some(true) });
        assert_eq!(theta_bar_check(&g, &s, None).unwrap().in_band, None);
        assert_eq!(eulerian_map(&g, &s).unwrap(), g.nodes().to_vec());
    }

    #[test]
    fn doubled_volume() {
        let g = Grid::new(16).unwrap();
        let s = FieldState::new(&g, 0.0, vec![2.0; 17], vec![0.0; 17], vec![1.0; 17], vec![1.0; 17]).unwrap();
        let (l, w) = lyapunov_and_w(&g, &s, &Params::default()).unwrap();
        assert_abs_diff_eq!(l, 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.306853, epsilon = 1e-6);
        assert_eq!(w, 0.0);
        assert_eq!(eulerian_map(&g, &s).unwrap()[16], 2.0);
    }

    #[test]
    fn max_principle_flag() {
        let g = Grid::new(16).unwrap();
        let chi = g.sample(|x| 1.0 + 0.2 * (PI * x).cos());
        let s = FieldState::new(&g, 0.0, vec![1.0; 17], vec![0.0; 17], chi, vec![1.0; 17]).unwrap();
        assert!(!bounds_monitor(&s, 0.8, 1e-8).max_principle);
    }

    #[test]
    fn dissipation_rejects_nonpositive() {
        let g = Grid::new(8).unwrap();
        let s = FieldState::new(&g, 0.0, vec![1.0; 9], vec![0.0; 9], vec![1.0; 9], vec![0.0; 9]).unwrap();
        assert!(lyapunov_and_w(&g, &s, &Params::default()).is_err());
    }

    #[test]
    fn sobolev_examples() {
        let g = Grid::new(32).unwrap();
        for k in 0..=3 {
            assert_eq!(sobolev_norm(&g, &[0.0; 33], k).unwrap(), 0.0);
            assert_abs_diff_eq!(sobolev_norm(&g, &[1.5; 33], k).unwrap(), 1.5, epsilon = 1e-14);
        }
        assert!(matches!(sobolev_norm(&g, &[0.0; 33], 4), Err(NsacError::SobolevOrder(4))));
        // ||sin 2 pi x||^2 = 1/2, ||2 pi cos 2 pi x||^2 = 2 pi^2
        let exact = (0.5 + 2.0 * PI * PI).sqrt();
        let err = |n: usize| {
            let g = Grid::new(n).unwrap();
            (sobolev_norm(&g, &g.sample(|x| (2.0 * PI * x).sin()), 1).unwrap() - exact).abs()
        };
        assert!(err(512) < 1e-3, "{}", err(512));
        assert!(err(512) < err(128));
    }

    #[test]
    fn smallness_examples() {
        let s = smallness_condition(0.3, 0.2, 0.5, 9.0, 0.0);
        assert!(s.cond1 && s.cond2);
        assert_eq!(s.alpha_h, 0.0);
        let s = smallness_condition(1.0, 1.0, 1.0, 8.0, 0.01);
        assert_eq!(s.h, 429981696.0);
        assert!(!s.cond2);
        assert!(smallness_condition(1.0, 1.0, 1.0, 0.5, 1.0).cond2);
        assert!(!smallness_condition(1.0, 0.25, 1.0, 0.5, 1.0).cond1);
    }

    #[test]
    fn decay_summary_steady() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let samples: Vec<_> = (0..8)
            .map(|k| {
                let mut st = s.clone();
                st.t = k as f64;
                DecaySample::from_state(&g, &st, &p).unwrap()
            })
            .collect();
        let d = long_time_metrics(&samples).unwrap();
        assert!(d.samples.iter().all(|s| s.theta_oscillation == 0.0 && s.u_max == 0.0 && s.chi_defect == 0.0));
        assert_eq!(d.theta_trend, Trend::Flat);
        assert_eq!(*d.w_integral.last().unwrap(), 0.0);
        assert!(long_time_metrics(&samples[..1]).is_err());
    }
}
