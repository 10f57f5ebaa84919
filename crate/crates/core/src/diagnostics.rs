//! Energy forms, weighted norms, decay fits and discrete audits of the
//! energy identity and Hardy's inequality.

use serde::{Deserialize, Serialize};

use crate::background::BackgroundState;
use crate::error::{Error, Result};
use crate::gas::GasParams;
use crate::geometry::{Dim, FlattenedGrid};
use crate::solver::FieldState;

/// Largest admissible `beta * L` before the weight overflows the useful range.
pub const MAX_WEIGHT_EXPONENT: f64 = 500.0;

/// `eta(r) = r - ln r - 1`.
pub fn eta(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain {
            quantity: "eta argument",
            value: r,
        });
    }
    // ln_1p keeps the quadratic behaviour near r = 1
    let x = r - 1.0;
    Ok(x - x.ln_1p())
}

/// Closed interval of abscissae used by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl FitWindow {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn all() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// `value ~ prefactor * exp(-sigma * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub sigma: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub points: usize,
}

/// Log-linear least squares on the samples inside `window`.
pub fn fit_decay_rate(ts: &[f64], values: &[f64], window: FitWindow) -> Result<DecayFit> {
    if ts.len() != values.len() {
        return Err(Error::FitFailed("abscissae and values differ in length".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in ts.iter().zip(values) {
        if !window.contains(t) {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::FitFailed(format!("nonpositive value {v} at t = {t}")));
        }
        xs.push(t);
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::FitFailed(format!("{n} samples in the fit window")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitFailed("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(DecayFit {
        sigma: -slope,
        prefactor: icpt.exp(),
        r2,
        points: n,
    })
}

fn check_beta(beta: f64, grid: &FlattenedGrid) -> Result<()> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("weight exponent must be nonnegative, got {beta}"),
        });
    }
    if beta * grid.length > MAX_WEIGHT_EXPONENT {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!(
                "beta * L = {} exceeds {MAX_WEIGHT_EXPONENT}",
                beta * grid.length
            ),
        });
    }
    Ok(())
}

/// Per-column weights `e^{beta y1}` (exactly 1 when `beta = 0`).
fn weights(beta: f64, grid: &FlattenedGrid) -> Vec<f64> {
    (0..grid.n1)
        .map(|i| if beta == 0.0 { 1.0 } else { (beta * grid.y1(i)).exp() })
        .collect()
}

/// `int e^{beta y1} f` by the trapezoidal rule.
pub fn weighted_integral(f: &[f64], beta: f64, grid: &FlattenedGrid) -> Result<f64> {
    check_beta(beta, grid)?;
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} values on {} nodes", f.len(), grid.len())));
    }
    let w = weights(beta, grid);
    let mut s = 0.0;
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            s += grid.quad_weight(i) * w[i] * f[grid.idx(i, j)];
        }
    }
    Ok(s)
}

/// `||f||_{L^2_{e,beta}}` with weight `e^{beta y1}`.
pub fn weighted_norm(f: &[f64], beta: f64, grid: &FlattenedGrid) -> Result<f64> {
    Ok(weighted_norm_sq(&[f], beta, grid)?.sqrt())
}

/// Sum of squared weighted norms of several fields.
pub fn weighted_norm_sq(fields: &[&[f64]], beta: f64, grid: &FlattenedGrid) -> Result<f64> {
    check_beta(beta, grid)?;
    let w = weights(beta, grid);
    let mut s = 0.0;
    for f in fields {
        if f.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values on {} nodes", f.len(), grid.len())));
        }
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                let v = f[grid.idx(i, j)];
                s += grid.quad_weight(i) * w[i] * v * v;
            }
        }
    }
    Ok(s)
}

/// Perturbation `Phi = state - reference` as component fields
/// `(phi, psi_1, .., psi_d, zeta)`.
pub fn difference(a: &FieldState, b: &FieldState) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 + a.u.len());
    out.push(a.rho.iter().zip(&b.rho).map(|(x, y)| x - y).collect());
    for (ua, ub) in a.u.iter().zip(&b.u) {
        out.push(ua.iter().zip(ub).map(|(x, y)| x - y).collect());
    }
    out.push(a.theta.iter().zip(&b.theta).map(|(x, y)| x - y).collect());
    out
}

fn as_slices(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

/// `E_{0,beta} = ||Phi||^2_{e,beta} + ||Phi||^2`.
pub fn e0_beta(phi: &[Vec<f64>], beta: f64, grid: &FlattenedGrid) -> Result<f64> {
    let s = as_slices(phi);
    Ok(weighted_norm_sq(&s, beta, grid)? + weighted_norm_sq(&s, 0.0, grid)?)
}

/// `E_{1,beta} = ||Phi||^2_{e,beta} + ||Phi||^2_{H^1}` with hat gradients.
pub fn e1_beta(phi: &[Vec<f64>], beta: f64, grid: &FlattenedGrid) -> Result<f64> {
    let mut acc = e0_beta(phi, beta, grid)?;
    for f in phi {
        let g = grid.hat_gradient(f)?;
        acc += weighted_norm_sq(&as_slices(&g), 0.0, grid)?;
    }
    Ok(acc)
}

/// `D_{0,beta} = beta ||Phi||^2_{e,beta} + ||(grad psi, grad zeta)||^2_{e,beta}
/// + ||d phi/dt||^2 + ||phi|_boundary||^2`, where `material_phi` holds
/// `phi_t + u . grad phi` at the nodes.
pub fn d0_beta(phi: &[Vec<f64>], material_phi: &[f64], beta: f64, grid: &FlattenedGrid) -> Result<f64> {
    let s = as_slices(phi);
    let mut acc = beta * weighted_norm_sq(&s, beta, grid)?;
    for f in &phi[1..] {
        let g = grid.hat_gradient(f)?;
        acc += weighted_norm_sq(&as_slices(&g), beta, grid)?;
    }
    acc += weighted_norm_sq(&[material_phi], 0.0, grid)?;
    let trace: Vec<f64> = (0..grid.n2).map(|j| phi[0][grid.idx(0, j)].powi(2)).collect();
    acc += surface_integral(&trace, grid);
    Ok(acc)
}

/// Integral over the boundary curve with the arc-length element `sqrt(1 + M'^2) dy2`.
pub fn surface_integral(trace: &[f64], grid: &FlattenedGrid) -> f64 {
    match grid.dim {
        Dim::One => trace[0],
        Dim::Two => trace
            .iter()
            .zip(&grid.dm)
            .map(|(v, mp)| v * (1.0 + mp * mp).sqrt())
            .sum::<f64>()
            * grid.h2,
    }
}

/// Reference state of an energy form: density, velocity and the two
/// temperatures appearing in the pressure and internal-energy parts.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReference {
    pub rho: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    /// Temperature multiplying the density part.
    pub theta_p: Vec<f64>,
    /// Temperature of the internal-energy part.
    pub theta_e: Vec<f64>,
}

impl EnergyReference {
    /// Background variant: `rho~`, `u~ + U`, `theta~` and `theta~ + Theta`.
    pub fn background(bg: &BackgroundState) -> Self {
        Self {
            rho: bg.rho.clone(),
            u: bg.u.clone(),
            theta_p: bg.theta_tilde.clone(),
            theta_e: bg.theta.clone(),
        }
    }

    /// Stationary variant: every reference quantity from the stationary state.
    pub fn stationary(s: &FieldState) -> Self {
        Self {
            rho: s.rho.clone(),
            u: s.u.clone(),
            theta_p: s.theta.clone(),
            theta_e: s.theta.clone(),
        }
    }
}

/// Pointwise `rho E = R rho theta_p eta(rho_r/rho) + rho |u - u_r|^2/2
/// + cv rho theta_e eta(theta/theta_e)`.
pub fn energy_density(state: &FieldState, r: &EnergyReference, g: &GasParams) -> Result<Vec<f64>> {
    let n = state.rho.len();
    let cv = g.cv();
    let mut out = vec![0.0; n];
    for c in 0..n {
        let rho = state.rho[c];
        let th = state.theta[c];
        if !(rho > 0.0) {
            return Err(Error::Domain {
                quantity: "density",
                value: rho,
            });
        }
        if !(th > 0.0) {
            return Err(Error::Domain {
                quantity: "temperature",
                value: th,
            });
        }
        let ke: f64 = state.u.iter().zip(&r.u).map(|(u, ur)| (u[c] - ur[c]).powi(2)).sum();
        out[c] = g.r_gas * rho * r.theta_p[c] * eta(r.rho[c] / rho)?
            + 0.5 * rho * ke
            + cv * rho * r.theta_e[c] * eta(th / r.theta_e[c])?;
    }
    Ok(out)
}

/// `int rho E` over the grid.
pub fn energy_integral(state: &FieldState, r: &EnergyReference, g: &GasParams, grid: &FlattenedGrid) -> Result<f64> {
    Ok(grid.integrate(&energy_density(state, r, g)?))
}

/// Range of `rho E / (phi^2 + |psi|^2 + zeta^2)` over nodes with a nonzero
/// perturbation, `None` when every node is unperturbed.
pub fn equivalence_ratio(state: &FieldState, r: &EnergyReference, g: &GasParams) -> Result<Option<(f64, f64)>> {
    let e = energy_density(state, r, g)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for c in 0..e.len() {
        let sq = (state.rho[c] - r.rho[c]).powi(2)
            + state.u.iter().zip(&r.u).map(|(u, ur)| (u[c] - ur[c]).powi(2)).sum::<f64>()
            + (state.theta[c] - r.theta_e[c]).powi(2);
        if sq > 0.0 {
            let q = e[c] / sq;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    Ok(if lo.is_finite() { Some((lo, hi)) } else { None })
}

/// `(1/2) int e^{beta y1} [ R theta_w/rho_m phibar^2 + rho_m |psibar|^2
/// + cv/theta_w rho_m zetabar^2 ]` for the difference of two states, with
/// `rho_m` the midpoint density of the pair so the value is symmetric.
pub fn contraction_functional(
    a: &FieldState,
    b: &FieldState,
    theta_w: &[f64],
    beta: f64,
    g: &GasParams,
    grid: &FlattenedGrid,
) -> Result<f64> {
    let n = grid.len();
    let cv = g.cv();
    let mut dens = vec![0.0; n];
    for c in 0..n {
        let rm = 0.5 * (a.rho[c] + b.rho[c]);
        if !(rm > 0.0) {
            return Err(Error::Domain {
                quantity: "density",
                value: rm,
            });
        }
        let phi = a.rho[c] - b.rho[c];
        let psi: f64 = a.u.iter().zip(&b.u).map(|(x, y)| (x[c] - y[c]).powi(2)).sum();
        let zeta = a.theta[c] - b.theta[c];
        dens[c] = 0.5 * (g.r_gas * theta_w[c] / rm * phi * phi + rm * psi + cv / theta_w[c] * rm * zeta * zeta);
    }
    weighted_integral(&dens, beta, grid)
}

/// Terms of the 1-D energy balance over one snapshot interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBudget {
    pub t0: f64,
    pub t1: f64,
    /// `d/dt int rho E` by differencing the endpoints.
    pub rate: f64,
    /// `int mu1 psi'^2 + kappa/theta zeta'^2`, never negative.
    pub dissipation: f64,
    /// Outflow through `x1 = 0`: `rho u E` there.
    pub boundary_flux: f64,
    /// `int R11`.
    pub remainder: f64,
    pub residual: f64,
}

struct PointTerms {
    energy: f64,
    dissipation: f64,
    flux: f64,
    remainder: f64,
}

fn budget_terms(s: &FieldState, bg: &BackgroundState, g: &GasParams) -> Result<PointTerms> {
    let grid = &bg.grid;
    let n = grid.n1;
    let r = g.r_gas;
    let cv = g.cv();
    let mu1 = g.mu1();
    let k = g.kappa;
    let refr = EnergyReference::background(bg);
    let e = energy_density(s, &refr, g)?;
    let phi: Vec<f64> = (0..n).map(|i| s.rho[i] - bg.rho[i]).collect();
    let psi: Vec<f64> = (0..n).map(|i| s.u[0][i] - bg.u[0][i]).collect();
    let zeta: Vec<f64> = (0..n).map(|i| s.theta[i] - bg.theta[i]).collect();
    let dpsi = grid.y_derivatives(&psi)?.d1;
    let dzeta = grid.y_derivatives(&zeta)?.d1;
    let dtheta = grid.y_derivatives(&s.theta)?.d1;
    let mut diss = vec![0.0; n];
    let mut r11 = vec![0.0; n];
    for i in 0..n {
        let jet = &bg.profile_jets[i];
        let (rt, ut, tt) = (jet.rho, jet.u1, jet.theta);
        let (drt, dut, dtt) = (jet.drho, jet.du1, jet.dtheta);
        let rho = s.rho[i];
        let u = s.u[0][i];
        let th = s.theta[i];
        let (p, q, z) = (phi[i], psi[i], zeta[i]);
        let (dq, dz) = (dpsi[i], dzeta[i]);
        diss[i] = mu1 * dq * dq + k / th * dz * dz;
        let f = -drt * q - dut * p;
        let gg = -rho * q * dut - p * ut * dut - r * z * drt - r * p * dtt;
        let h = -cv * rho * q * dtt - cv * p * ut * dtt - r * rt * z * dut - r * p * th * dut + 2.0 * mu1 * dq * dut;
        // the 1-D background solves the stationary equations exactly, so F = G = H = 0
        let d_inv_theta = -dtt / (tt * tt);
        r11[i] = r * tt * p / rho * f
            + q * gg
            + z / th * h
            + r * p * q * dtt
            + r * z * q * drt
            + r * rho * eta(rt / rho)? * u * dtt
            - r * tt * p * p / (rho * rt) * u * drt
            + cv * rho * eta(th / tt)? * u * dtt
            + cv * rho * tt / th * z * z * u * d_inv_theta
            + k * z / (th * th) * dtheta[i] * dz
            + z / th * mu1 * dq * dq;
    }
    Ok(PointTerms {
        energy: grid.integrate(&e),
        dissipation: grid.integrate(&diss),
        flux: s.rho[0] * s.u[0][0] * e[0],
        remainder: grid.integrate(&r11),
    })
}

/// Residual of the 1-D energy identity over each consecutive pair of
/// snapshots on a flat boundary with `U = Theta = 0`.
pub fn energy_identity_residual(
    snapshots: &[FieldState],
    bg: &BackgroundState,
    g: &GasParams,
) -> Result<Vec<EnergyBudget>> {
    let grid = &bg.grid;
    if grid.dim != Dim::One {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "the energy identity audit is one-dimensional".into(),
        });
    }
    if !bg.extensions_zero {
        return Err(Error::InvalidParameter {
            name: "boundary data",
            reason: "the energy identity audit needs U = Theta = 0".into(),
        });
    }
    if snapshots.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "snapshots",
            reason: "need at least two snapshots".into(),
        });
    }
    let terms: Vec<PointTerms> = snapshots
        .iter()
        .map(|s| budget_terms(s, bg, g))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(snapshots.len() - 1);
    for k in 0..snapshots.len() - 1 {
        let (a, b) = (&terms[k], &terms[k + 1]);
        let dt = snapshots[k + 1].t - snapshots[k].t;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "snapshots",
                reason: "snapshot times must increase".into(),
            });
        }
        let rate = (b.energy - a.energy) / dt;
        let dissipation = 0.5 * (a.dissipation + b.dissipation);
        let boundary_flux = 0.5 * (a.flux + b.flux);
        let remainder = 0.5 * (a.remainder + b.remainder);
        out.push(EnergyBudget {
            t0: snapshots[k].t,
            t1: snapshots[k + 1].t,
            rate,
            dissipation,
            boundary_flux,
            remainder,
            residual: rate + dissipation - boundary_flux - remainder,
        });
    }
    Ok(out)
}

/// Both sides of `int e^{-alpha x1} |f|^2 <= C (||grad f||^2 + ||f|_boundary||^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, zero when both sides vanish.
    pub ratio: f64,
    /// Ratio above the implementation constant 10.
    pub flagged: bool,
}

pub const HARDY_FLAG: f64 = 10.0;

/// Quadrature check of Hardy's inequality for a nodal field `f`.
pub fn hardy_check(f: &[f64], alpha: f64, grid: &FlattenedGrid) -> Result<HardyReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("decay rate must be positive, got {alpha}"),
        });
    }
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} values on {} nodes", f.len(), grid.len())));
    }
    let mut w = vec![0.0; grid.len()];
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let c = grid.idx(i, j);
            let x1 = grid.x(i, j)[0];
            w[c] = (-alpha * x1).exp() * f[c] * f[c];
        }
    }
    let lhs = grid.integrate(&w);
    let grad = grid.hat_gradient(f)?;
    let mut rhs = weighted_norm_sq(&as_slices(&grad), 0.0, grid)?;
    let trace: Vec<f64> = (0..grid.n2).map(|j| f[grid.idx(0, j)].powi(2)).collect();
    rhs += surface_integral(&trace, grid);
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(HardyReport {
        lhs,
        rhs,
        ratio,
        flagged: ratio > HARDY_FLAG,
    })
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub weighted_norm: f64,
    pub l2_norm: f64,
    pub e0: f64,
    pub e1: f64,
    pub energy: f64,
    pub contraction: Option<f64>,
    pub dissipation: Option<f64>,
    pub boundary_flux: Option<f64>,
    pub remainder: Option<f64>,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str = "t,weighted_norm,l2_norm,e0,e1,energy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.t, self.weighted_norm, self.l2_norm, self.e0, self.e1, self.energy
        )
    }
}

/// Norms and energy of `state` relative to the background.
pub fn energy_report(state: &FieldState, bg: &BackgroundState, beta: f64, g: &GasParams) -> Result<EnergyReport> {
    let grid = &bg.grid;
    let phi = difference(state, &bg.as_state(state.t));
    let s = as_slices(&phi);
    let wn = weighted_norm_sq(&s, beta, grid)?.sqrt();
    let l2 = weighted_norm_sq(&s, 0.0, grid)?.sqrt();
    Ok(EnergyReport {
        t: state.t,
        weighted_norm: wn,
        l2_norm: l2,
        e0: wn * wn + l2 * l2,
        e1: e1_beta(&phi, beta, grid)?,
        energy: energy_integral(state, &EnergyReference::background(bg), g, grid)?,
        contraction: None,
        dissipation: None,
        boundary_flux: None,
        remainder: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eta_values() {
        assert_eq!(eta(1.0).unwrap(), 0.0);
        assert_relative_eq!(eta(std::f64::consts::E).unwrap(), std::f64::consts::E - 2.0, epsilon = 1e-15);
        assert!(eta(0.0).is_err());
        assert!(eta(-1.0).is_err());
        for &d in &[1e-3, -1e-3] {
            let r = 1.0 + d;
            let diff = eta(r).unwrap() - d * d / 2.0;
            // third-order Taylor term is -d^3/3
            assert!((diff + d * d * d / 3.0).abs() < 1e-12);
            assert!(diff.abs() <= 0.4 * d.abs().powi(3));
        }
    }

    #[test]
    fn exact_exponential_fit() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 5.0 * (-0.3 * t).exp()).collect();
        let fit = fit_decay_rate(&ts, &vs, FitWindow::all()).unwrap();
        assert_relative_eq!(fit.sigma, 0.3, epsilon = 1e-12);
        assert_relative_eq!(fit.prefactor, 5.0, epsilon = 1e-11);
        assert_relative_eq!(fit.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noisy_fit_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ts: Vec<f64> = (0..200).map(|k| k as f64 * 0.1).collect();
        let vs: Vec<f64> = ts
            .iter()
            .map(|t| 5.0 * (-0.3 * t).exp() * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            .collect();
        let fit = fit_decay_rate(&ts, &vs, FitWindow::all()).unwrap();
        assert!((fit.sigma - 0.3).abs() < 0.01);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let ts = [0.0, 1.0, 2.0, 3.0];
        let fit = fit_decay_rate(&ts, &[2.0; 4], FitWindow::all()).unwrap();
        assert_eq!(fit.sigma, 0.0);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn fit_rejects_nonpositive_and_respects_window() {
        assert!(fit_decay_rate(&[0.0, 1.0], &[1.0, 0.0], FitWindow::all()).is_err());
        // the bad sample is outside the window
        let fit = fit_decay_rate(&[0.0, 1.0, 2.0, 3.0], &[-1.0, 1.0, 0.5, 0.25], FitWindow::new(0.5, 3.0)).unwrap();
        assert_relative_eq!(fit.sigma, 2f64.ln(), epsilon = 1e-12);
        assert!(fit_decay_rate(&[0.0, 1.0], &[1.0, 1.0], FitWindow::new(5.0, 6.0)).is_err());
    }

    #[test]
    fn weighted_norm_of_exponential() {
        // ||e^{-y}||^2 with weight e^{y} on [0, 40] is 1 - e^{-40}
        let grid = FlattenedGrid::one_d(4001, 40.0).unwrap();
        let f = grid.sample(|y, _| (-y).exp());
        let n = weighted_norm(&f, 1.0, &grid).unwrap();
        assert!((n * n - 1.0).abs() < 1e-4);
        let coarse = FlattenedGrid::one_d(2001, 40.0).unwrap();
        let fc = coarse.sample(|y, _| (-y).exp());
        let nc = weighted_norm(&fc, 1.0, &coarse).unwrap();
        let ratio = (nc * nc - 1.0).abs() / (n * n - 1.0).abs();
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn zero_beta_is_plain_l2_bitwise() {
        let grid = FlattenedGrid::one_d(101, 3.0).unwrap();
        let f = grid.sample(|y, _| y.sin());
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let plain = grid.integrate(&sq).sqrt();
        assert_eq!(weighted_norm(&f, 0.0, &grid).unwrap().to_bits(), plain.to_bits());
    }

    #[test]
    fn overflow_guard() {
        let grid = FlattenedGrid::one_d(11, 100.0).unwrap();
        let f = vec![1.0; 11];
        assert!(weighted_norm(&f, 6.0, &grid).is_err());
        assert!(weighted_norm(&f, -1.0, &grid).is_err());
    }

    #[test]
    fn hardy_constant_function() {
        let grid = FlattenedGrid::one_d(4001, 30.0).unwrap();
        let f = vec![1.0; grid.len()];
        let h = hardy_check(&f, 1.0, &grid).unwrap();
        assert!((h.lhs - 1.0).abs() < 1e-4);
        assert_eq!(h.rhs, 1.0);
        assert!(!h.flagged);
        let z = hardy_check(&vec![0.0; grid.len()], 1.0, &grid).unwrap();
        assert_eq!((z.lhs, z.rhs, z.ratio), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hardy_vanishing_trace() {
        let grid = FlattenedGrid::one_d(801, 20.0).unwrap();
        let f = grid.sample(|y, _| (3.0 * y).sin() * (-0.1 * y).exp());
        let h = hardy_check(&f, 1.0, &grid).unwrap();
        assert!(h.lhs < h.rhs);
    }

    #[test]
    fn random_energy_equivalence() {
        use crate::solver::FieldState;
        let g = GasParams::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1000;
        let rr = EnergyReference {
            rho: (0..n).map(|_| 1.0 + 0.01 * rng.gen_range(-1.0..1.0)).collect(),
            u: vec![vec![-2.0; n]],
            theta_p: vec![1.0; n],
            theta_e: vec![1.0; n],
        };
        let s = FieldState {
            t: 0.0,
            rho: rr.rho.iter().map(|r| r + 0.05 * rng.gen_range(-1.0..1.0)).collect(),
            u: vec![(0..n).map(|_| -2.0 + 0.05 * rng.gen_range(-1.0..1.0)).collect()],
            theta: (0..n).map(|_| 1.0 + 0.05 * rng.gen_range(-1.0..1.0)).collect(),
        };
        let (lo, hi) = equivalence_ratio(&s, &rr, &g).unwrap().unwrap();
        assert!(lo > 0.1 && hi < 2.0, "{lo} {hi}");
    }
}
