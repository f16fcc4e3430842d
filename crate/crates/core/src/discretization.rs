//! Spatial operators on the collocated grid and the semi-discrete right-hand side.
//!
//! Divergence terms are written in face form: primitives are averaged to the
//! face midpoints, derivatives there are two-point differences, and the nodal
//! divergence is the flux difference. Boundary nodes own a half cell and see
//! a zero physical flux, which is the same as reflecting the fields evenly
//! (`v`, `chi`, `theta`) and oddly (`u`) across each end.
//!
//! The momentum stress is assembled so that the discrete total energy can
//! only decrease: pressure `theta/v` and viscous coefficient `eta/v` are
//! nodal quantities averaged to faces, and the capillary stress is a face
//! average of nodal averages of `chi_x^2/(2 v^2)`. With the nodal `u_x`
//! being the mass-flux divergence, pressure and capillary work cancel
//! exactly against the temperature and gradient-energy budgets, and the
//! viscous heating falls short of the kinetic loss by a non-negative
//! `O(dx^2)` amount.

use crate::error::{Field, NsacError, Result};
use crate::state::{FieldState, Grid, Params};

/// Boundary closure for [`ddx_central`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    /// Point reflection about the boundary value (velocity).
    OddExtension,
    /// Mirror reflection; the endpoint derivative is exactly zero (Neumann fields).
    EvenExtension,
    /// Second-order biased three-point stencils.
    OneSided,
}

/// Nodal first derivative: central in the interior, `bc` at the endpoints.
pub fn ddx_central(grid: &Grid, f: &[f64], bc: Bc) -> Result<Vec<f64>> {
    grid.check_len(f)?;
    let mut out = vec![0.0; f.len()];
    ddx_into(grid.dx(), f, bc, &mut out);
    Ok(out)
}

#[inline(always)]
pub(crate) fn ddx_into(dx: f64, f: &[f64], bc: Bc, out: &mut [f64]) {
    let n = f.len() - 1;
    let inv2dx = 0.5 / dx;
    for i in 1..n {
        out[i] = (f[i + 1] - f[i - 1]) * inv2dx;
    }
    match bc {
        Bc::EvenExtension => {
            out[0] = 0.0;
            out[n] = 0.0;
        }
        Bc::OddExtension => {
            out[0] = (f[1] - f[0]) / dx;
            out[n] = (f[n] - f[n - 1]) / dx;
        }
        Bc::OneSided => {
            out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv2dx;
            out[n] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) * inv2dx;
        }
    }
}

/// Conservative divergence of a face field (`faces[i]` lives at `x_{i+1/2}`).
///
/// Boundary nodes use the half-cell closure with zero boundary flux, so the
/// trapezoid-weighted sum of the result telescopes to zero.
pub fn div_flux(grid: &Grid, faces: &[f64]) -> Result<Vec<f64>> {
    if faces.len() != grid.n_cells() {
        return Err(NsacError::LengthMismatch {
            expected: grid.n_cells(),
            actual: faces.len(),
        });
    }
    let mut out = vec![0.0; grid.len()];
    div_into(grid.dx(), faces, &mut out);
    Ok(out)
}

#[inline(always)]
fn div_into(dx: f64, faces: &[f64], out: &mut [f64]) {
    let n = faces.len();
    let out = &mut out[..=n];
    let inv = 1.0 / dx;
    out[0] = 2.0 * faces[0] * inv;
    for i in 1..n {
        out[i] = (faces[i] - faces[i - 1]) * inv;
    }
    out[n] = -2.0 * faces[n - 1] * inv;
}

/// Chemical potential `mu = -(chi_x / v)_x + chi^3 - chi`.
pub fn eval_mu(grid: &Grid, state: &FieldState) -> Result<Vec<f64>> {
    mu_from_fields(grid, &state.v, &state.chi)
}

pub(crate) fn mu_from_fields(grid: &Grid, v: &[f64], chi: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(v)?;
    grid.check_len(chi)?;
    let mut mu = vec![0.0; grid.len()];
    mu_into(grid.dx(), v, chi, &mut mu)?;
    Ok(mu)
}

/// [`mu_from_fields`] into a buffer of the same length as `v`.
#[inline(always)]
pub(crate) fn mu_into(dx: f64, v: &[f64], chi: &[f64], mu: &mut [f64]) -> Result<()> {
    if let Some(node) = v.iter().position(|&x| !(x > 0.0)) {
        return Err(NsacError::FloorViolation {
            node,
            field: Field::V,
            value: v[node],
        });
    }
    let n = v.len() - 1;
    let (chi, mu) = (&chi[..=n], &mut mu[..=n]);
    let inv_dx = 1.0 / dx;
    // flux through the face to the left of node i
    let mut left = 0.0;
    for i in 0..n {
        let right = (chi[i + 1] - chi[i]) * inv_dx * (2.0 / (v[i] + v[i + 1]));
        let div = if i == 0 { 2.0 * right } else { right - left };
        mu[i] = chi[i] * chi[i] * chi[i] - chi[i] - div * inv_dx;
        left = right;
    }
    mu[n] = chi[n] * chi[n] * chi[n] - chi[n] + 2.0 * left * inv_dx;
    Ok(())
}

/// Time derivatives of the four unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub dv_dt: Vec<f64>,
    pub du_dt: Vec<f64>,
    pub dchi_dt: Vec<f64>,
    pub dtheta_dt: Vec<f64>,
}

impl Rhs {
    pub fn zeros(len: usize) -> Self {
        Rhs {
            dv_dt: vec![0.0; len],
            du_dt: vec![0.0; len],
            dchi_dt: vec![0.0; len],
            dtheta_dt: vec![0.0; len],
        }
    }
}

pub fn eval_rhs(grid: &Grid, state: &FieldState, params: &Params) -> Result<Rhs> {
    for f in [&state.v, &state.u, &state.chi, &state.theta] {
        grid.check_len(f)?;
    }
    let mut work = RhsWork::new(grid);
    let mut out = Rhs::zeros(grid.len());
    work.eval(params, &state.v, &state.u, &state.chi, &state.theta, &mut out)?;
    Ok(out)
}

#[inline(always)]
pub(crate) fn check_floors(
    params: &Params,
    v: &[f64],
    chi: &[f64],
    theta: &[f64],
) -> Result<()> {
    let n = v.len();
    let (chi, theta) = (&chi[..n], &theta[..n]);
    // chi^alpha only needs a positive base when alpha is nonzero
    let chi_free = params.alpha == 0.0;
    // branch-free scan first; NaN fails every comparison
    let mut bad = 0u32;
    for i in 0..n {
        let low = !(v[i] > params.v_floor) | !(theta[i] > params.theta_floor);
        bad += (low | (!chi_free & !(chi[i] > params.chi_floor))) as u32;
    }
    if bad == 0 {
        return Ok(());
    }
    for i in 0..n {
        if !(v[i] > params.v_floor) {
            return Err(NsacError::FloorViolation { node: i, field: Field::V, value: v[i] });
        }
        if !(theta[i] > params.theta_floor) {
            return Err(NsacError::FloorViolation { node: i, field: Field::Theta, value: theta[i] });
        }
        if !chi_free && !(chi[i] > params.chi_floor) {
            return Err(NsacError::FloorViolation { node: i, field: Field::Chi, value: chi[i] });
        }
    }
    Ok(())
}

/// Reusable scratch for repeated right-hand-side evaluations.
#[derive(Debug, Clone)]
pub(crate) struct RhsWork {
    dx: f64,
    mass_flux: Vec<f64>,
    momentum_flux: Vec<f64>,
    phase_flux: Vec<f64>,
    heat_flux: Vec<f64>,
    cap: Vec<f64>,
    // nodal eta/v, theta/v and averaged capillary stress
    visc: Vec<f64>,
    press: Vec<f64>,
    q: Vec<f64>,
    pub(crate) mu: Vec<f64>,
}

impl RhsWork {
    pub(crate) fn new(grid: &Grid) -> Self {
        let nf = grid.n_cells();
        RhsWork {
            dx: grid.dx(),
            mass_flux: vec![0.0; nf],
            momentum_flux: vec![0.0; nf],
            phase_flux: vec![0.0; nf],
            heat_flux: vec![0.0; nf],
            cap: vec![0.0; nf],
            visc: vec![0.0; nf + 1],
            press: vec![0.0; nf + 1],
            q: vec![0.0; nf + 1],
            mu: vec![0.0; nf + 1],
        }
    }

    pub(crate) fn eval(
        &mut self,
        params: &Params,
        v: &[f64],
        u: &[f64],
        chi: &[f64],
        theta: &[f64],
        out: &mut Rhs,
    ) -> Result<()> {
        #[cfg(target_arch = "x86_64")]
        if crate::simd::avx2_enabled() {
            // SAFETY: AVX2 support was detected at run time.
            return unsafe { eval_avx2(self, params, v, u, chi, theta, out) };
        }
        eval_checked(self, params, v, u, chi, theta, out)
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn eval_avx2(
    w: &mut RhsWork,
    params: &Params,
    v: &[f64],
    u: &[f64],
    chi: &[f64],
    theta: &[f64],
    out: &mut Rhs,
) -> Result<()> {
    eval_checked(w, params, v, u, chi, theta, out)
}

#[inline(always)]
fn eval_checked(
    w: &mut RhsWork,
    params: &Params,
    v: &[f64],
    u: &[f64],
    chi: &[f64],
    theta: &[f64],
    out: &mut Rhs,
) -> Result<()> {
    check_floors(params, v, chi, theta)?;
    eval_kernel(w, params, v, u, chi, theta, out);
    Ok(())
}

// The kernels below take every buffer as its own slice argument so the
// compiler knows they do not overlap and can vectorize the loops.

#[inline(always)]
fn nodal_coefficients(v: &[f64], theta: &[f64], visc: &mut [f64], press: &mut [f64]) {
    let n = v.len();
    let (theta, visc, press) = (&theta[..n], &mut visc[..n], &mut press[..n]);
    for i in 0..n {
        let inv_v = 1.0 / v[i];
        visc[i] *= inv_v;
        press[i] = theta[i] * inv_v;
    }
}

/// Face fluxes; `heat` holds the face conductivity on entry.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn face_fluxes(
    inv_dx: f64,
    v: &[f64],
    u: &[f64],
    chi: &[f64],
    theta: &[f64],
    heat: &mut [f64],
    mass: &mut [f64],
    phase: &mut [f64],
    cap: &mut [f64],
) {
    let n = heat.len();
    let (v, u, chi, theta) = (&v[..=n], &u[..=n], &chi[..=n], &theta[..=n]);
    let (mass, phase, cap) = (&mut mass[..n], &mut phase[..n], &mut cap[..n]);
    for i in 0..n {
        let inv_vf = 2.0 / (v[i] + v[i + 1]);
        let chix = (chi[i + 1] - chi[i]) * inv_dx;
        let thx = (theta[i + 1] - theta[i]) * inv_dx;
        mass[i] = 0.5 * (u[i] + u[i + 1]);
        phase[i] = chix * inv_vf;
        cap[i] = 0.5 * phase[i] * phase[i];
        heat[i] *= thx * inv_vf;
    }
}

#[inline(always)]
fn face_means(f: &[f64], out: &mut [f64]) {
    let n = out.len();
    let f = &f[..=n];
    for i in 0..n {
        out[i] = 0.5 * (f[i] + f[i + 1]);
    }
}

/// Node averages of a face field; an end node sees its single face.
#[inline(always)]
fn node_means(faces: &[f64], out: &mut [f64]) {
    let n = faces.len();
    let out = &mut out[..=n];
    out[0] = faces[0];
    out[n] = faces[n - 1];
    for i in 1..n {
        out[i] = 0.5 * (faces[i - 1] + faces[i]);
    }
}

#[inline(always)]
fn momentum_fluxes(inv_dx: f64, u: &[f64], visc: &[f64], press: &[f64], q: &[f64], momentum: &mut [f64]) {
    let n = momentum.len();
    let (u, visc, press, q) = (&u[..=n], &visc[..=n], &press[..=n], &q[..=n]);
    for i in 0..n {
        let ux = (u[i + 1] - u[i]) * inv_dx;
        momentum[i] = 0.5 * ((visc[i] + visc[i + 1]) * ux - (press[i] + press[i + 1]) - (q[i] + q[i + 1]));
    }
}

/// Turns the phase-flux divergence in `mu` into the chemical potential and
/// adds the nodal sources.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn nodal_sources(
    v: &[f64],
    chi: &[f64],
    visc: &[f64],
    press: &[f64],
    dv: &[f64],
    mu: &mut [f64],
    dchi: &mut [f64],
    dtheta: &mut [f64],
) {
    let n = v.len();
    let (chi, visc, press, dv) = (&chi[..n], &visc[..n], &press[..n], &dv[..n]);
    let (mu, dchi, dtheta) = (&mut mu[..n], &mut dchi[..n], &mut dtheta[..n]);
    for i in 0..n {
        let c = chi[i];
        let m = c * c * c - c - mu[i];
        mu[i] = m;
        dchi[i] = -v[i] * m;
        // nodal u_x with odd reflection equals the mass-flux divergence
        let ux = dv[i];
        dtheta[i] += (visc[i] * ux - press[i]) * ux + v[i] * m * m;
    }
}

#[inline(always)]
fn eval_kernel(w: &mut RhsWork, params: &Params, v: &[f64], u: &[f64], chi: &[f64], theta: &[f64], out: &mut Rhs) {
    let dx = w.dx;
    let inv_dx = 1.0 / dx;
    let n = w.mass_flux.len();
    let (v, u, chi, theta) = (&v[..=n], &u[..=n], &chi[..=n], &theta[..=n]);

    params.eta_into(chi, &mut w.visc);
    nodal_coefficients(v, theta, &mut w.visc, &mut w.press);
    face_means(theta, &mut w.heat_flux);
    params.kappa_in_place(&mut w.heat_flux);
    face_fluxes(inv_dx, v, u, chi, theta, &mut w.heat_flux, &mut w.mass_flux, &mut w.phase_flux, &mut w.cap);
    node_means(&w.cap, &mut w.q);
    momentum_fluxes(inv_dx, u, &w.visc, &w.press, &w.q, &mut w.momentum_flux);

    div_into(dx, &w.mass_flux, &mut out.dv_dt);
    div_into(dx, &w.momentum_flux, &mut out.du_dt);
    out.du_dt[0] = 0.0;
    out.du_dt[n] = 0.0;
    div_into(dx, &w.phase_flux, &mut w.mu);
    div_into(dx, &w.heat_flux, &mut out.dtheta_dt);
    nodal_sources(v, chi, &w.visc, &w.press, &out.dv_dt, &mut w.mu, &mut out.dchi_dt, &mut out.dtheta_dt);
}
