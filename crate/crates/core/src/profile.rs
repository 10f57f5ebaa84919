//! Planar stationary profiles `(rho, u1, theta)(x1)` on the half line.
//!
//! The momentum and energy equations are integrated once against the far
//! field, leaving an autonomous 2x2 system for `(u1, theta)`; density follows
//! from the conserved mass flux `rho u1 = rho_+ u_+`. Under the supersonic
//! condition the end state is a stable node of that system, so the profile is
//! obtained by forward integration from the boundary values.
//!
//! Internally the system is written in deviation variables
//! `v = u1 - u_+`, `w = theta - theta_+` so the exponentially small tail keeps
//! full relative precision.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{fit_decay_rate, FitWindow};
use crate::error::{Error, Result};
use crate::gas::{require_supersonic, FarFieldState, GasParams};
use crate::ode::{self, Tolerance};

/// Boundary values `(u_b, theta_b)` of the planar problem at `x1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanarBoundaryData {
    pub u_b: f64,
    pub theta_b: f64,
}

/// `(-1.99, 1)`: a weak boundary layer against the canonical far field.
impl Default for PlanarBoundaryData {
    fn default() -> Self {
        Self { u_b: -1.99, theta_b: 1.0 }
    }
}

impl PlanarBoundaryData {
    /// Boundary strength `|u_b - u_+| + |theta_b - theta_+|`.
    pub fn delta_tilde(&self, ff: &FarFieldState) -> f64 {
        (self.u_b - ff.u_plus).abs() + (self.theta_b - ff.theta_plus).abs()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_b > 0.0) {
            return Err(Error::Domain {
                quantity: "theta_b",
                value: self.theta_b,
            });
        }
        if !(self.u_b < 0.0) {
            return Err(Error::InvalidParameter {
                name: "u_b",
                reason: format!("boundary velocity must be negative (outflow), got {}", self.u_b),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileOptions {
    /// Right end of the sampled interval.
    pub length: f64,
    /// Number of uniform samples including both ends.
    pub samples: usize,
    /// Relative tolerance of the integrator (applied to the deviations).
    pub tol: f64,
    /// Required decay `|dev(L)| <= tail_tol * delta_tilde` at the right end.
    pub tail_tol: f64,
    /// Largest admissible boundary strength.
    pub delta_max: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            length: 40.0,
            samples: 801,
            tol: 1e-10,
            tail_tol: 1e-6,
            delta_max: 0.1,
        }
    }
}

impl ProfileOptions {
    pub fn spacing(&self) -> f64 {
        self.length / (self.samples - 1) as f64
    }
}

/// Sampled planar profile together with the problem it solves.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarProfile {
    pub gas: GasParams,
    pub far_field: FarFieldState,
    pub boundary: PlanarBoundaryData,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub u1: Vec<f64>,
    pub theta: Vec<f64>,
    /// `rho - rho_+`, `u1 - u_+`, `theta - theta_+` without cancellation.
    pub dev_rho: Vec<f64>,
    pub dev_u1: Vec<f64>,
    pub dev_theta: Vec<f64>,
    pub delta_tilde: f64,
    /// Tail decay rate from the log-linear fit; `None` for the constant profile.
    pub alpha_fit: Option<f64>,
    pub fit_r2: Option<f64>,
}

/// Pointwise first and second derivatives of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileJet {
    pub rho: f64,
    pub u1: f64,
    pub theta: f64,
    pub drho: f64,
    pub du1: f64,
    pub dtheta: f64,
    pub ddrho: f64,
    pub ddu1: f64,
    pub ddtheta: f64,
}

/// Linearization of the reduced system at the end state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndstateLinearization {
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [Complex64; 2],
}

impl EndstateLinearization {
    /// Both eigenvalues strictly in the left half plane.
    pub fn is_stable(&self) -> bool {
        self.eigenvalues.iter().all(|e| e.re < 0.0)
    }

    /// `min |Re lambda|` over the eigenvalues: the slowest spatial decay rate.
    pub fn slowest_rate(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| -e.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// `max |Re lambda|`: the boundary-layer rate.
    pub fn fastest_rate(&self) -> f64 {
        self.eigenvalues.iter().map(|e| -e.re).fold(0.0, f64::max)
    }
}

/// Right-hand side in deviation variables, together with the pieces the
/// derivative formulas reuse. Returns `(v', w', a, u)` where `a = mu1 v'`.
#[inline]
fn rhs_dev(v: f64, w: f64, ff: &FarFieldState, g: &GasParams) -> Result<(f64, f64, f64, f64)> {
    let up = ff.u_plus;
    let tp = ff.theta_plus;
    let u = up + v;
    if !(u < 0.0) {
        return Err(Error::Singular(format!("u1 = {u} is not negative")));
    }
    let m = ff.mass_flux();
    let r = g.r_gas;
    // theta/u - theta_+/u_+ = (w u_+ - theta_+ v) / (u u_+)
    let a = m * v + m * r * (w * up - tp * v) / (u * up);
    let b = m * (g.cv() + r) * w + m * v * (2.0 * up + v) / 2.0;
    let du = a / g.mu1();
    let dw = (b - u * a) / g.kappa;
    Ok((du, dw, a, u))
}

/// Derivatives `(u1', theta')` of the reduced planar system.
pub fn reduced_rhs(u1: f64, theta: f64, ff: &FarFieldState, g: &GasParams) -> Result<(f64, f64)> {
    if u1 == 0.0 {
        return Err(Error::Singular("u1 = 0: theta/u1 undefined".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::Domain {
            quantity: "temperature",
            value: theta,
        });
    }
    let (du, dw, _, _) = rhs_dev(u1 - ff.u_plus, theta - ff.theta_plus, ff, g)?;
    Ok((du, dw))
}

/// Analytic Jacobian of [`reduced_rhs`] at `(u1, theta)`.
pub fn reduced_jacobian(u1: f64, theta: f64, ff: &FarFieldState, g: &GasParams) -> [[f64; 2]; 2] {
    let m = ff.mass_flux();
    let r = g.r_gas;
    let mu1 = g.mu1();
    let a = m * (u1 - ff.u_plus) + m * r * (theta / u1 - ff.theta_plus / ff.u_plus);
    let a_u = m - m * r * theta / (u1 * u1);
    let a_t = m * r / u1;
    // kappa theta' = B - u A with B_u = m u, B_theta = m (cv + R)
    let c_u = m * u1 - a - u1 * a_u;
    let c_t = m * (g.cv() + r) - u1 * a_t;
    [[a_u / mu1, a_t / mu1], [c_u / g.kappa, c_t / g.kappa]]
}

fn eigen2(j: &[[f64; 2]; 2]) -> [Complex64; 2] {
    let half_tr = 0.5 * (j[0][0] + j[1][1]);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = Complex64::new(half_tr * half_tr - det, 0.0).sqrt();
    let mut ev = [half_tr + disc, half_tr - disc];
    ev.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    ev
}

/// Jacobian of the reduced system at `(u_+, theta_+)` and its eigenvalues,
/// ordered by decreasing real part.
pub fn endstate_jacobian(ff: &FarFieldState, g: &GasParams) -> EndstateLinearization {
    let jacobian = reduced_jacobian(ff.u_plus, ff.theta_plus, ff, g);
    EndstateLinearization {
        jacobian,
        eigenvalues: eigen2(&jacobian),
    }
}

/// Solve the planar problem on `[0, opts.length]`.
pub fn solve_profile(
    bd: &PlanarBoundaryData,
    ff: &FarFieldState,
    g: &GasParams,
    opts: &ProfileOptions,
) -> Result<PlanarProfile> {
    g.validate()?;
    ff.validate()?;
    require_supersonic(ff, g)?;
    bd.validate()?;
    if !(opts.tol > 0.0) || !(opts.tail_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "tolerances must be positive".into(),
        });
    }
    if opts.samples < 5 || !(opts.length > 0.0) {
        return Err(Error::GridTooSmall(format!(
            "profile needs at least 5 samples on a positive length, got {} on {}",
            opts.samples, opts.length
        )));
    }
    let delta_tilde = bd.delta_tilde(ff);
    if delta_tilde > opts.delta_max {
        return Err(Error::BoundaryTooStrong {
            delta: delta_tilde,
            max: opts.delta_max,
        });
    }

    let n = opts.samples;
    let h = opts.spacing();
    let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mut dev_u1 = vec![0.0; n];
    let mut dev_theta = vec![0.0; n];
    dev_u1[0] = bd.u_b - ff.u_plus;
    dev_theta[0] = bd.theta_b - ff.theta_plus;

    if delta_tilde > 0.0 {
        let tol = Tolerance {
            rtol: opts.tol,
            atol: opts.tol * delta_tilde * 1e-8,
        };
        let mut f = |y: &[f64; 2]| -> Result<[f64; 2]> {
            let (dv, dw, _, _) = rhs_dev(y[0], y[1], ff, g)?;
            Ok([dv, dw])
        };
        let mut y = [dev_u1[0], dev_theta[0]];
        let mut step = h.min(0.01);
        for i in 1..n {
            let (y_next, last) = ode::integrate(&mut f, x[i - 1], x[i], y, step, tol).map_err(|e| match e {
                Error::Singular(_) => Error::ProfileDiverged { x1: x[i - 1] },
                other => other,
            })?;
            y = y_next;
            step = last.max(1e-6);
            if !(ff.u_plus + y[0] < 0.0) || !(ff.theta_plus + y[1] > 0.0) || !y[0].is_finite() {
                return Err(Error::ProfileDiverged { x1: x[i] });
            }
            dev_u1[i] = y[0];
            dev_theta[i] = y[1];
        }
        let tail = dev_u1[n - 1].abs() + dev_theta[n - 1].abs();
        if tail > opts.tail_tol * delta_tilde {
            return Err(Error::DomainTooShort {
                length: opts.length,
                tail,
                tol: opts.tail_tol * delta_tilde,
            });
        }
    }

    let m = ff.mass_flux();
    let u1: Vec<f64> = dev_u1.iter().map(|v| ff.u_plus + v).collect();
    let theta: Vec<f64> = dev_theta.iter().map(|w| ff.theta_plus + w).collect();
    let rho: Vec<f64> = u1.iter().map(|u| m / u).collect();
    let dev_rho: Vec<f64> = dev_u1
        .iter()
        .zip(&u1)
        .map(|(v, u)| -m * v / (u * ff.u_plus))
        .collect();

    let mut p = PlanarProfile {
        gas: *g,
        far_field: *ff,
        boundary: *bd,
        x,
        rho,
        u1,
        theta,
        dev_rho,
        dev_u1,
        dev_theta,
        delta_tilde,
        alpha_fit: None,
        fit_r2: None,
    };
    if delta_tilde > 0.0 {
        let dev: Vec<f64> = p.dev_u1.iter().zip(&p.dev_theta).map(|(v, w)| v.abs() + w.abs()).collect();
        let fit = fit_decay_rate(&p.x, &dev, FitWindow::new(0.5 * opts.length, 0.9 * opts.length))?;
        p.alpha_fit = Some(fit.sigma);
        p.fit_r2 = Some(fit.r2);
    }
    Ok(p)
}

impl PlanarProfile {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn length(&self) -> f64 {
        *self.x.last().unwrap_or(&0.0)
    }

    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// `max |rho u1 - rho_+ u_+|` over the samples.
    pub fn mass_flux_residual(&self) -> f64 {
        let m = self.far_field.mass_flux();
        self.rho
            .iter()
            .zip(&self.u1)
            .map(|(r, u)| (r * u - m).abs())
            .fold(0.0, f64::max)
    }

    /// Exact derivatives at sample `i` from the reduced system.
    pub fn jet(&self, i: usize) -> ProfileJet {
        let ff = &self.far_field;
        let g = &self.gas;
        let (v, w) = (self.dev_u1[i], self.dev_theta[i]);
        let (du, dth) = match rhs_dev(v, w, ff, g) {
            Ok((du, dw, _, _)) => (du, dw),
            Err(_) => (0.0, 0.0),
        };
        let u = self.u1[i];
        let j = reduced_jacobian(u, self.theta[i], ff, g);
        let ddu = j[0][0] * du + j[0][1] * dth;
        let ddth = j[1][0] * du + j[1][1] * dth;
        let m = ff.mass_flux();
        let drho = -m * du / (u * u);
        let ddrho = -m * ddu / (u * u) + 2.0 * m * du * du / (u * u * u);
        ProfileJet {
            rho: self.rho[i],
            u1: u,
            theta: self.theta[i],
            drho,
            du1: du,
            dtheta: dth,
            ddrho,
            ddu1: ddu,
            ddtheta: ddth,
        }
    }

    /// CSV with header `x1,rho,u1,theta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1,rho,u1,theta\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{},{}\n", self.x[i], self.rho[i], self.u1[i], self.theta[i]));
        }
        out
    }
}

/// Exponential tail envelope `|d^k (profile - end state)| <= C delta e^{-alpha x1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub c: f64,
    pub alpha: f64,
    pub order: usize,
}

fn centered_derivative(f: &[f64], h: f64, k: usize) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![f64::NAN; n];
    for i in 1..n - 1 {
        d[i] = match k {
            0 => f[i],
            1 => (f[i + 1] - f[i - 1]) / (2.0 * h),
            _ => (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h),
        };
    }
    if k == 0 {
        d[0] = f[0];
        d[n - 1] = f[n - 1];
    }
    d
}

/// Fit the tail envelope of the `k`-th derivative (`k <= 2`), derivatives by
/// centered differences. The returned pair satisfies the inequality at every
/// sample with `x1 >= 1`.
pub fn profile_tail_bound(p: &PlanarProfile, k: usize) -> Result<TailBound> {
    if k > 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "derivative order must be 0, 1 or 2".into(),
        });
    }
    if !(p.delta_tilde > 0.0) {
        return Err(Error::FitFailed("constant profile has no tail to fit".into()));
    }
    let h = p.spacing();
    let parts = [&p.dev_rho, &p.dev_u1, &p.dev_theta];
    let derivs: Vec<Vec<f64>> = parts.iter().map(|f| centered_derivative(f, h, k)).collect();
    let n = p.len();
    let d: Vec<f64> = (0..n).map(|i| derivs.iter().map(|c| c[i].abs()).sum()).collect();

    let len = p.length();
    let window = FitWindow::new(0.5 * len, 0.9 * len);
    let idx: Vec<usize> = (0..n).filter(|&i| window.contains(p.x[i]) && d[i].is_finite()).collect();
    let peak = idx.iter().map(|&i| d[i]).fold(0.0, f64::max);
    let floor = 1e-9 * peak;
    for pair in idx.windows(2) {
        if d[pair[1]] > d[pair[0]] + floor {
            return Err(Error::FitFailed(format!(
                "derivative of order {k} is not monotone near x1 = {}",
                p.x[pair[1]]
            )));
        }
    }
    let xs: Vec<f64> = idx.iter().map(|&i| p.x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let fit = fit_decay_rate(&xs, &ys, FitWindow::all())?;
    let alpha = fit.sigma;
    let c = (0..n)
        .filter(|&i| p.x[i] >= 1.0 && d[i].is_finite())
        .map(|i| d[i] * (alpha * p.x[i]).exp() / p.delta_tilde)
        .fold(0.0, f64::max);
    Ok(TailBound { c, alpha, order: k })
}
