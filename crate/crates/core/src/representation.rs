//! Reconstruction of the specific volume from recorded history through the
//! Kazhikhov-type representation
//!
//! ```text
//! v(x,t) = B(t) D(x,t) + int_0^t  B(t) D(x,t) / (B(tau) D(x,tau)) * v(x,tau) J(x,tau) dtau
//! ```
//!
//! and its comparison with the simulated volume. All spatial integrals use the
//! same composite trapezoid rule as [`crate::diagnostics`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{cumulative_unchecked, trapezoid_unchecked};
use crate::discretization::{ddx_into, eval_mu, Bc};
use crate::error::{NsacError, Result};
use crate::state::{FieldState, Grid, Params};
use crate::timestepper::{History, Snapshot};

/// Smallest number of snapshots on `[0, t]` accepted by [`reconstruct_v`] for `t > 0`.
pub const MIN_SNAPSHOTS: usize = 16;

/// Slack for the mean-value target falling outside the range of `phi`.
pub const ALPHA0_TOL: f64 = 1e-9;

/// Per-step time integrands accumulated by the history.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Integrands {
    /// `int ((theta + u^2)/eta + chi_x^2/(2 eta v)) dx`
    pub b_rate: f64,
    /// `u_x/v - theta/(eta v) - chi_x^2/(2 eta v^2) - int_0^x g`
    pub phi_rate: Vec<f64>,
    /// Dissipation rate `W`.
    pub w_rate: f64,
}

/// Scratch buffers reused by [`integrands_into`].
#[derive(Debug, Clone, Default)]
pub(crate) struct RateWork {
    u_x: Vec<f64>,
    chi_x: Vec<f64>,
    theta_x: Vec<f64>,
    eta: Vec<f64>,
    kappa: Vec<f64>,
    big_g: Vec<f64>,
    b_density: Vec<f64>,
    w_density: Vec<f64>,
}

struct Derivatives {
    u_x: Vec<f64>,
    chi_x: Vec<f64>,
    theta_x: Vec<f64>,
    mu: Vec<f64>,
}

fn derivatives(grid: &Grid, state: &FieldState) -> Result<Derivatives> {
    let n = grid.len();
    let dx = grid.dx();
    let mut d = Derivatives {
        u_x: vec![0.0; n],
        chi_x: vec![0.0; n],
        theta_x: vec![0.0; n],
        mu: eval_mu(grid, state)?,
    };
    ddx_into(dx, &state.u, Bc::OddExtension, &mut d.u_x);
    ddx_into(dx, &state.chi, Bc::EvenExtension, &mut d.chi_x);
    ddx_into(dx, &state.theta, Bc::EvenExtension, &mut d.theta_x);
    Ok(d)
}

fn g_from(state: &FieldState, params: &Params, d: &Derivatives, eta: &[f64]) -> Result<Vec<f64>> {
    let n = state.len();
    if params.alpha == 0.0 {
        return Ok(vec![0.0; n]);
    }
    if let Some(node) = state.chi.iter().position(|&c| !(c > params.chi_floor)) {
        return Err(NsacError::FloorViolation {
            node,
            field: crate::error::Field::Chi,
            value: state.chi[node],
        });
    }
    let a = params.alpha;
    Ok((0..n)
        .map(|i| {
            let (v, u, c, th) = (state.v[i], state.u[i], state.chi[i], state.theta[i]);
            let chi_t = -v * d.mu[i];
            // d(1/eta)/d(chi) = -alpha chi^(-alpha-1) / eta_tilde
            let dinv = -a / (eta[i] * c);
            let inv_eta_t = dinv * chi_t;
            let inv_eta_x = dinv * d.chi_x[i];
            let eta_x_over_eta = a * d.chi_x[i] / c;
            -(u * inv_eta_t
                + th / v * inv_eta_x
                + d.chi_x[i] * d.chi_x[i] / (2.0 * v * v) * inv_eta_x
                + eta_x_over_eta * d.u_x[i] / v)
        })
        .collect())
}

/// The source `g` that collects every term carrying a derivative of `1/eta`.
pub fn eval_g(grid: &Grid, state: &FieldState, params: &Params) -> Result<Vec<f64>> {
    let d = derivatives(grid, state)?;
    let eta: Vec<f64> = state.chi.iter().map(|&c| params.eta(c)).collect();
    g_from(state, params, &d, &eta)
}

/// `J = theta/(eta v) + chi_x^2/(2 eta v^2) + int_0^x g - int_0^1 v int_0^x g`.
pub fn eval_j(grid: &Grid, state: &FieldState, g: &[f64], params: &Params) -> Result<Vec<f64>> {
    grid.check_len(g)?;
    let mut chi_x = vec![0.0; grid.len()];
    ddx_into(grid.dx(), &state.chi, Bc::EvenExtension, &mut chi_x);
    Ok(j_from(grid, state, g, &chi_x, params))
}

fn j_from(grid: &Grid, state: &FieldState, g: &[f64], chi_x: &[f64], params: &Params) -> Vec<f64> {
    let dx = grid.dx();
    let big_g = cumulative_unchecked(dx, g);
    let weighted: Vec<f64> = state.v.iter().zip(&big_g).map(|(v, gg)| v * gg).collect();
    let correction = trapezoid_unchecked(dx, &weighted);
    (0..grid.len())
        .map(|i| {
            let v = state.v[i];
            let eta = params.eta(state.chi[i]);
            state.theta[i] / (eta * v) + chi_x[i] * chi_x[i] / (2.0 * eta * v * v) + big_g[i]
                - correction
        })
        .collect()
}

/// Per-step integrands of `state`, written into `out` with the buffers in
/// `work` reused. Uses the chemical potential cached in `state`.
pub(crate) fn integrands_into(
    work: &mut RateWork,
    grid: &Grid,
    state: &FieldState,
    params: &Params,
    out: &mut Integrands,
) -> Result<()> {
    let n = grid.len();
    grid.check_len(&state.mu)?;
    for buf in [
        &mut work.u_x,
        &mut work.chi_x,
        &mut work.theta_x,
        &mut work.eta,
        &mut work.kappa,
        &mut work.big_g,
        &mut work.b_density,
        &mut work.w_density,
        &mut out.phi_rate,
    ] {
        buf.resize(n, 0.0);
    }
    params.eta_into(&state.chi, &mut work.eta);
    ddx_into(grid.dx(), &state.chi, Bc::EvenExtension, &mut work.chi_x);
    if params.alpha == 0.0 {
        work.big_g.fill(0.0);
    } else {
        let d = Derivatives {
            u_x: derivative(grid, &state.u, Bc::OddExtension),
            chi_x: work.chi_x.clone(),
            theta_x: Vec::new(),
            mu: state.mu.clone(),
        };
        work.big_g = cumulative_unchecked(grid.dx(), &g_from(state, params, &d, &work.eta)?);
    }
    #[cfg(target_arch = "x86_64")]
    if crate::simd::avx2_enabled() {
        // SAFETY: AVX2 support was detected at run time.
        unsafe { rate_kernel_avx2(work, grid.dx(), state, params, out) };
        return Ok(());
    }
    rate_kernel(work, grid.dx(), state, params, out);
    Ok(())
}

fn derivative(grid: &Grid, f: &[f64], bc: Bc) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    ddx_into(grid.dx(), f, bc, &mut out);
    out
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn rate_kernel_avx2(work: &mut RateWork, dx: f64, state: &FieldState, params: &Params, out: &mut Integrands) {
    rate_kernel(work, dx, state, params, out)
}

#[inline(always)]
fn rate_kernel(work: &mut RateWork, dx: f64, state: &FieldState, params: &Params, out: &mut Integrands) {
    let n = work.eta.len();
    ddx_into(dx, &state.u, Bc::OddExtension, &mut work.u_x);
    ddx_into(dx, &state.theta, Bc::EvenExtension, &mut work.theta_x);
    work.kappa.copy_from_slice(&state.theta);
    params.kappa_in_place(&mut work.kappa);

    let (v, u, th, mu) = (&state.v[..n], &state.u[..n], &state.theta[..n], &state.mu[..n]);
    let (u_x, chi_x, th_x) = (&work.u_x[..n], &work.chi_x[..n], &work.theta_x[..n]);
    let (eta, kappa, big_g) = (&work.eta[..n], &work.kappa[..n], &work.big_g[..n]);
    let (b_density, w_density) = (&mut work.b_density[..n], &mut work.w_density[..n]);
    let phi_rate = &mut out.phi_rate[..n];
    for i in 0..n {
        // one division per node
        let inv = 1.0 / (v[i] * th[i] * eta[i]);
        let inv_v = th[i] * eta[i] * inv;
        let inv_th = v[i] * eta[i] * inv;
        let inv_eta = v[i] * th[i] * inv;
        let half_cx2 = 0.5 * chi_x[i] * chi_x[i] * inv_eta * inv_v;
        b_density[i] = (th[i] + u[i] * u[i]) * inv_eta + half_cx2;
        phi_rate[i] = (u_x[i] - th[i] * inv_eta - half_cx2) * inv_v - big_g[i];
        w_density[i] = (kappa[i] * th_x[i] * th_x[i] * inv_th + eta[i] * u_x[i] * u_x[i]) * inv_v * inv_th
            + v[i] * mu[i] * mu[i] * inv_th;
    }
    out.b_rate = trapezoid_unchecked(dx, b_density);
    out.w_rate = trapezoid_unchecked(dx, w_density);
}

/// Data fixed by the initial snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprInputs<'a> {
    pub history: &'a History,
    /// `eta(chi0)` per node.
    pub eta0: Vec<f64>,
    /// `int_0^x u0/eta0`.
    pub initial_potential: Vec<f64>,
    /// `int_0^1 v0 int_0^x u0/eta0`.
    pub initial_offset: f64,
}

impl<'a> ReprInputs<'a> {
    pub fn new(history: &'a History) -> Result<Self> {
        let first = history.snapshots().first().ok_or(NsacError::TooFewSnapshots {
            required: 1,
            available: 0,
        })?;
        if first.state.t != 0.0 {
            return Err(NsacError::TimeOutOfRange {
                t: 0.0,
                start: first.state.t,
                end: history.end_time(),
            });
        }
        let params = history.params();
        let dx = history.grid().dx();
        let s0 = &first.state;
        let eta0: Vec<f64> = s0.chi.iter().map(|&c| params.eta(c)).collect();
        let ratio: Vec<f64> = s0.u.iter().zip(&eta0).map(|(u, e)| u / e).collect();
        let initial_potential = cumulative_unchecked(dx, &ratio);
        let weighted: Vec<f64> = s0.v.iter().zip(&initial_potential).map(|(v, p)| v * p).collect();
        Ok(ReprInputs {
            history,
            eta0,
            initial_potential,
            initial_offset: trapezoid_unchecked(dx, &weighted),
        })
    }

    fn phi_of(&self, snap: &Snapshot) -> Vec<f64> {
        snap.phi_integral
            .iter()
            .zip(&self.initial_potential)
            .map(|(a, b)| a + b)
            .collect()
    }

    fn d_of(&self, snap: &Snapshot, alpha0: f64) -> Vec<f64> {
        let grid = self.history.grid();
        let params = self.history.params();
        let s = &snap.state;
        let ratio: Vec<f64> = s.u.iter().zip(&s.chi).map(|(u, &c)| u / params.eta(c)).collect();
        let potential = cumulative_unchecked(grid.dx(), &ratio);
        let at_alpha0 = interpolate(grid, &potential, alpha0);
        let v0 = &self.history.snapshots()[0].state.v;
        (0..grid.len())
            .map(|i| {
                v0[i]
                    * (potential[i] - at_alpha0 - self.initial_potential[i] + self.initial_offset)
                        .exp()
            })
            .collect()
    }
}

/// Piecewise-linear interpolation of nodal values at `x` in `[0, 1]`.
fn interpolate(grid: &Grid, f: &[f64], x: f64) -> f64 {
    let n = grid.n_cells();
    let s = (x / grid.dx()).clamp(0.0, n as f64);
    let i = (s.floor() as usize).min(n - 1);
    let w = s - i as f64;
    (1.0 - w) * f[i] + w * f[i + 1]
}

/// `phi(., t)`: the recorded time integral plus `int_0^x u0/eta0`.
pub fn eval_phi(history: &History, t: f64) -> Result<Vec<f64>> {
    let inputs = ReprInputs::new(history)?;
    let snap = history.snapshot_at(t)?;
    Ok(inputs.phi_of(snap))
}

/// Leftmost `x` where the piecewise-linear interpolant of `phi` attains `int v phi`.
pub fn find_alpha0(grid: &Grid, phi: &[f64], v: &[f64]) -> Result<f64> {
    grid.check_len(phi)?;
    grid.check_len(v)?;
    let weighted: Vec<f64> = v.iter().zip(phi).map(|(v, p)| v * p).collect();
    let target = trapezoid_unchecked(grid.dx(), &weighted);
    let nodes = grid.nodes();
    for i in 0..grid.n_cells() {
        let (a, b) = (phi[i] - target, phi[i + 1] - target);
        if a == 0.0 {
            return Ok(nodes[i]);
        }
        if a * b <= 0.0 {
            let frac = a / (a - b);
            return Ok(nodes[i] + frac * grid.dx());
        }
    }
    if phi[grid.n_cells()] == target {
        return Ok(1.0);
    }
    let (mut imin, mut imax) = (0, 0);
    for (i, &p) in phi.iter().enumerate() {
        if p < phi[imin] {
            imin = i;
        }
        if p > phi[imax] {
            imax = i;
        }
    }
    let (lo, hi) = (phi[imin], phi[imax]);
    if target < lo && lo - target <= ALPHA0_TOL {
        Ok(nodes[imin])
    } else if target > hi && target - hi <= ALPHA0_TOL {
        Ok(nodes[imax])
    } else {
        Err(NsacError::Alpha0NotFound { target, min: lo, max: hi })
    }
}

/// `B(t) = exp(-int_0^t int_0^1 ((theta+u^2)/eta + chi_x^2/(2 eta v)))`.
pub fn eval_b(history: &History, t: f64) -> Result<f64> {
    Ok((-history.snapshot_at(t)?.b_integral).exp())
}

pub fn eval_d(history: &History, t: f64, alpha0: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha0) {
        return Err(NsacError::InvalidParam(format!("alpha0 = {alpha0} outside [0, 1]")));
    }
    let inputs = ReprInputs::new(history)?;
    Ok(inputs.d_of(history.snapshot_at(t)?, alpha0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprResult {
    pub t: f64,
    pub v_repr: Vec<f64>,
    pub v_sim: Vec<f64>,
    pub alpha0: f64,
    pub b_value: f64,
    /// `v / (B D)` at the evaluation time.
    pub a_implied: Vec<f64>,
    pub residual_max: f64,
    pub residual_l2: f64,
}

struct SnapshotTerms {
    t: f64,
    alpha0: f64,
    b: f64,
    d: Vec<f64>,
    /// `v J / v0`
    amplitude: Vec<f64>,
    /// `-ln(B D / v0)`, so that `v J / (B D) = amplitude * exp(exponent)`.
    exponent: Vec<f64>,
}

fn snapshot_terms(inputs: &ReprInputs<'_>, snap: &Snapshot) -> Result<SnapshotTerms> {
    let grid = inputs.history.grid();
    let params = inputs.history.params();
    let s = &snap.state;
    let v0 = &inputs.history.snapshots()[0].state.v;
    let phi = inputs.phi_of(snap);
    let alpha0 = find_alpha0(grid, &phi, &s.v)?;
    let b = (-snap.b_integral).exp();
    let d = inputs.d_of(snap, alpha0);
    let derivs = derivatives(grid, s)?;
    let eta: Vec<f64> = s.chi.iter().map(|&c| params.eta(c)).collect();
    let g = g_from(s, params, &derivs, &eta)?;
    let j = j_from(grid, s, &g, &derivs.chi_x, params);
    let amplitude = (0..grid.len()).map(|i| s.v[i] * j[i] / v0[i]).collect();
    let exponent = (0..grid.len()).map(|i| snap.b_integral - (d[i] / v0[i]).ln()).collect();
    Ok(SnapshotTerms { t: s.t, alpha0, b, d, amplitude, exponent })
}

/// Weights of `int_0^1 ((1-s) f0 + s f1) exp(delta s) ds = w0 f0 + w1 f1`.
fn exp_trapezoid_weights(delta: f64) -> (f64, f64) {
    if delta.abs() < 1e-2 {
        let d = delta;
        let w0 = 0.5 + d * (1.0 / 6.0 + d * (1.0 / 24.0 + d * (1.0 / 120.0 + d / 720.0)));
        let w1 = 0.5 + d * (1.0 / 3.0 + d * (1.0 / 8.0 + d * (1.0 / 30.0 + d / 144.0)));
        (w0, w1)
    } else {
        let em1 = delta.exp_m1();
        let d2 = delta * delta;
        ((em1 - delta) / d2, (delta * (em1 + 1.0) - em1) / d2)
    }
}

/// Evaluates the representation at snapshot time `t` and compares with the simulated `v`.
pub fn reconstruct_v(history: &History, t: f64) -> Result<ReprResult> {
    let inputs = ReprInputs::new(history)?;
    let k = history.snapshot_index(t)?;
    if k > 0 && k + 1 < MIN_SNAPSHOTS {
        return Err(NsacError::TooFewSnapshots { required: MIN_SNAPSHOTS, available: k + 1 });
    }
    let terms: Vec<SnapshotTerms> = history.snapshots()[..=k]
        .par_iter()
        .map(|snap| snapshot_terms(&inputs, snap))
        .collect::<Result<_>>()?;

    // Product trapezoid: amplitudes are interpolated linearly, the factor
    // 1/(B D) exponentially, which is exact when both are constant in x.
    let grid = history.grid();
    let n = grid.len();
    let last = &terms[k];
    let v0 = &history.snapshots()[0].state.v;
    let mut integral = vec![0.0; n];
    for pair in terms.windows(2) {
        let h = pair[1].t - pair[0].t;
        for (i, acc) in integral.iter_mut().enumerate() {
            let (e0, e1) = (pair[0].exponent[i], pair[1].exponent[i]);
            let (w0, w1) = exp_trapezoid_weights(e1 - e0);
            *acc += h
                * (e0 - last.exponent[i]).exp()
                * (w0 * pair[0].amplitude[i] + w1 * pair[1].amplitude[i]);
        }
    }
    let v_sim = history.snapshots()[k].state.v.clone();
    let v_repr: Vec<f64> = (0..n)
        .map(|i| last.b * last.d[i] + v0[i] * integral[i])
        .collect();
    let a_implied = (0..n).map(|i| v_sim[i] / (last.b * last.d[i])).collect();
    let diff_sq: Vec<f64> = v_repr.iter().zip(&v_sim).map(|(a, b)| (a - b) * (a - b)).collect();
    let residual_max = v_repr.iter().zip(&v_sim).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    Ok(ReprResult {
        t: last.t,
        residual_l2: trapezoid_unchecked(grid.dx(), &diff_sq).sqrt(),
        residual_max,
        alpha0: last.alpha0,
        b_value: last.b,
        a_implied,
        v_repr,
        v_sim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_initial_state, CosineAmplitudes, Preset};
    use crate::timestepper::{advance, History};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn g_vanishes_for_alpha_zero_and_unit_chi() {
        let g = Grid::new(32).unwrap();
        let s = make_initial_state(&g, &Preset::Cosine(Default::default())).unwrap();
        assert!(eval_g(&g, &s, &Params::default()).unwrap().iter().all(|&x| x == 0.0));
        let u = g.sample(|x| 0.2 * (PI * x).sin());
        let unit = FieldState::new(&g, 0.0, s.v.clone(), u, vec![1.0; 33], s.theta.clone()).unwrap();
        let p = Params { alpha: 0.3, ..Params::default() };
        assert!(eval_g(&g, &unit, &p).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn j_reductions() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s = make_initial_state(&g, &Preset::Steady).unwrap();
        let j = eval_j(&g, &s, &[0.0; 17], &p).unwrap();
        assert!(j.iter().all(|&x| x == 1.0));

        let s = make_initial_state(&g, &Preset::Cosine(Default::default())).unwrap();
        let j = eval_j(&g, &s, &[0.0; 17], &p).unwrap();
        let chi_x = crate::discretization::ddx_central(&g, &s.chi, Bc::EvenExtension).unwrap();
        for i in 0..17 {
            let v = s.v[i];
            let expect = s.theta[i] / v + chi_x[i] * chi_x[i] / (2.0 * v * v);
            assert_abs_diff_eq!(j[i], expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn alpha0_examples() {
        let g = Grid::new(16).unwrap();
        assert_eq!(find_alpha0(&g, &[-0.7; 17], &[1.0; 17]).unwrap(), 0.0);
        let a = find_alpha0(&g, g.nodes(), &[1.0; 17]).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        // mass 2 pushes the target outside the range of phi
        let phi = g.nodes().to_vec();
        assert!(matches!(
            find_alpha0(&g, &phi, &g.sample(|x| 4.0 * x)),
            Err(NsacError::Alpha0NotFound { .. })
        ));
    }

    #[test]
    fn alpha0_postcondition_on_generic_phi() {
        let g = Grid::new(40).unwrap();
        let phi = g.sample(|x| (3.0 * x).sin() - x * x);
        let v = g.sample(|x| 1.0 + 0.3 * (PI * x).cos());
        let a = find_alpha0(&g, &phi, &v).unwrap();
        let weighted: Vec<f64> = v.iter().zip(&phi).map(|(v, p)| v * p).collect();
        let target = crate::diagnostics::trapezoid(&g, &weighted).unwrap();
        assert!((interpolate(&g, &phi, a) - target).abs() <= 1e-9);
    }

    #[test]
    fn phi_at_time_zero() {
        let g = Grid::new(128).unwrap();
        let p = Params::default();
        let s0 = make_initial_state(&g, &Preset::Steady).unwrap();
        let h = History::new(&g, &p, &s0, 0.1).unwrap();
        assert!(eval_phi(&h, 0.0).unwrap().iter().all(|&x| x == 0.0));

        let err = |n: usize| {
            let g = Grid::new(n).unwrap();
            let mut u = g.sample(|x| (PI * x).sin());
            u[n] = 0.0;
            let s = FieldState::new(&g, 0.0, vec![1.0; n + 1], u, vec![1.0; n + 1], vec![1.0; n + 1]).unwrap();
            let h = History::new(&g, &p, &s, 0.1).unwrap();
            let phi = eval_phi(&h, 0.0).unwrap();
            phi.iter()
                .zip(g.nodes())
                .map(|(f, &x)| (f - (1.0 - (PI * x).cos()) / PI).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn steady_history_closed_forms() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s0 = make_initial_state(&g, &Preset::Steady).unwrap();
        let mut h = History::new(&g, &p, &s0, 0.05).unwrap();
        advance(&g, &s0, 1.0, &p, &mut h).unwrap();
        assert_abs_diff_eq!(eval_b(&h, 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-12);
        assert_eq!(eval_b(&h, 0.0).unwrap(), 1.0);
        let phi = eval_phi(&h, 1.0).unwrap();
        assert!(phi.iter().all(|&x| (x + 1.0).abs() < 1e-12));
        let d = eval_d(&h, 1.0, 0.0).unwrap();
        assert!(d.iter().all(|&x| x == 1.0));
        let r = reconstruct_v(&h, 1.0).unwrap();
        assert!(r.residual_max <= 1e-10, "{}", r.residual_max);
        assert_eq!(r.alpha0, 0.0);
        assert!(eval_b(&h, 2.0).is_err());
        assert!(eval_d(&h, 1.0, 1.5).is_err());
    }

    #[test]
    fn time_zero_reconstruction_is_v0() {
        let g = Grid::new(32).unwrap();
        let p = Params { alpha: 0.05, ..Params::default() };
        let amps = CosineAmplitudes { amp_v: 0.2, amp_u: 0.3, ..Default::default() };
        let s0 = make_initial_state(&g, &Preset::Cosine(amps)).unwrap();
        let h = History::new(&g, &p, &s0, 0.1).unwrap();
        let r = reconstruct_v(&h, 0.0).unwrap();
        assert!(r.residual_max <= 1e-12, "{}", r.residual_max);
        assert!(r.v_repr.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn exp_weights_match_quadrature() {
        for &delta in &[-3.0, -0.5, -0.02, -1e-3, 0.0, 1e-5, 0.009, 0.011, 0.7, 2.5] {
            let (w0, w1) = exp_trapezoid_weights(delta);
            // midpoint rule with many panels as an independent reference
            let m = 20000;
            let (mut r0, mut r1) = (0.0, 0.0);
            for k in 0..m {
                let s = (k as f64 + 0.5) / m as f64;
                r0 += (1.0 - s) * (delta * s).exp() / m as f64;
                r1 += s * (delta * s).exp() / m as f64;
            }
            assert_abs_diff_eq!(w0, r0, epsilon = 1e-8);
            assert_abs_diff_eq!(w1, r1, epsilon = 1e-8);
        }
    }

    #[test]
    fn too_few_snapshots() {
        let g = Grid::new(16).unwrap();
        let p = Params::default();
        let s0 = make_initial_state(&g, &Preset::Steady).unwrap();
        let mut h = History::new(&g, &p, &s0, 0.1).unwrap();
        advance(&g, &s0, 0.5, &p, &mut h).unwrap();
        assert!(matches!(reconstruct_v(&h, 0.5), Err(NsacError::TooFewSnapshots { .. })));
    }
}
