//! Compressible Navier-Stokes in flattened coordinates, primitive variables.
//!
//! ```text
//! rho_t   = -u.grad(rho) - rho div(u)
//! u_t     = -u.grad(u) - grad(R rho theta)/rho + (mu lap u + (mu+lambda) grad div u)/rho
//! theta_t = -u.grad(theta) + (-R rho theta div u + kappa lap theta
//!                             + 2 mu |D(u)|^2 + lambda (div u)^2)/(cv rho)
//! ```
//!
//! All `x` derivatives are hat operators on the `(y1, y2)` grid. Convection
//! `u.grad f = w1 f_y1 + w2 f_y2` with `w1 = u1 - M' u2`, `w2 = u2` is
//! upwinded per direction; everything else is centered.
//!
//! Boundary conditions: `u`, `theta` are fixed at `y1 = 0`; density there
//! evolves with interior-biased differences. All variables are fixed at
//! `y1 = L`. Both sets of values come from the background state.

use serde::{Deserialize, Serialize};

use crate::background::BackgroundState;
use crate::diagnostics::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::gas::GasParams;
use crate::geometry::{Dim, FlattenedGrid, YDerivatives};

/// Primitive fields at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub rho: Vec<f64>,
    /// One vector per velocity component.
    pub u: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

impl FieldState {
    pub fn zeros_like(other: &FieldState) -> Self {
        let n = other.rho.len();
        Self {
            t: other.t,
            rho: vec![0.0; n],
            u: vec![vec![0.0; n]; other.u.len()],
            theta: vec![0.0; n],
        }
    }

    /// Constant state on `n` nodes.
    pub fn constant(n: usize, rho: f64, u: &[f64], theta: f64) -> Self {
        Self {
            t: 0.0,
            rho: vec![rho; n],
            u: u.iter().map(|&v| vec![v; n]).collect(),
            theta: vec![theta; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Fields in the order `rho, u_1, .., u_d, theta`.
    pub fn fields(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.rho];
        v.extend(self.u.iter().map(|c| c.as_slice()));
        v.push(&self.theta);
        v
    }

    pub fn fields_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v: Vec<&mut Vec<f64>> = vec![&mut self.rho];
        v.extend(self.u.iter_mut());
        v.push(&mut self.theta);
        v
    }

    /// `self = sum c_k s_k` field by field (time untouched).
    fn set_lincomb(&mut self, terms: &[(f64, &FieldState)]) {
        let srcs: Vec<Vec<&[f64]>> = terms.iter().map(|(_, s)| s.fields()).collect();
        for (f, dst) in self.fields_mut().into_iter().enumerate() {
            let c0 = terms[0].0;
            for (x, y) in dst.iter_mut().zip(srcs[0][f]) {
                *x = c0 * y;
            }
            for (k, (c, _)) in terms.iter().enumerate().skip(1) {
                for (x, y) in dst.iter_mut().zip(srcs[k][f]) {
                    *x += c * y;
                }
            }
        }
    }

    /// `max |self - other|` over every field.
    pub fn max_diff(&self, other: &FieldState) -> f64 {
        self.fields()
            .iter()
            .zip(other.fields())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.fields()
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Discretization of the convective terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convection {
    /// Two-point upwind differences.
    #[default]
    FirstOrderUpwind,
    /// Three-point upwind differences (two-point where the stencil is cut).
    SecondOrderUpwind,
    /// First-order upwind plus the minmod of the three-point upwind and
    /// centered corrections.
    SecondOrderLimited,
}

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Two-stage strong-stability-preserving Runge-Kutta (Heun).
    #[default]
    SspRk2,
    /// Damped second-order Runge-Kutta-Chebyshev with the stage count chosen
    /// per step from a spectral radius bound; the step follows the convective
    /// limit only.
    Rkc2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Courant number in `(0, 1)`.
    pub cfl: f64,
    pub t_end: f64,
    /// Snapshot cadence in time units; `None` keeps only the final state.
    pub snapshot_every: Option<f64>,
    /// Diagnostics cadence in time units.
    pub diagnostics_every: Option<f64>,
    pub steady_tol: f64,
    pub convection: Convection,
    pub scheme: TimeScheme,
    /// Fixed step overriding the CFL bound.
    pub dt: Option<f64>,
    /// Weight exponent of the diagnostics norm.
    pub beta: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 10.0,
            snapshot_every: None,
            diagnostics_every: None,
            steady_tol: 1e-9,
            convection: Convection::FirstOrderUpwind,
            scheme: TimeScheme::SspRk2,
            dt: None,
            beta: 0.0,
            max_steps: usize::MAX,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad("cfl", format!("must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("t_end", format!("must be finite and nonnegative, got {}", self.t_end));
        }
        if !(self.steady_tol > 0.0) {
            return bad("steady_tol", format!("must be positive, got {}", self.steady_tol));
        }
        for (name, v) in [("snapshot_every", self.snapshot_every), ("diagnostics_every", self.diagnostics_every), ("dt", self.dt)] {
            if let Some(x) = v {
                if !(x > 0.0) || !x.is_finite() {
                    return bad(name, format!("must be positive, got {x}"));
                }
            }
        }
        if !(self.beta >= 0.0) {
            return bad("beta", format!("must be nonnegative, got {}", self.beta));
        }
        Ok(())
    }
}

/// Failed run: the error and the last state that passed the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowUp {
    pub error: Error,
    pub last_good: FieldState,
}

impl From<BlowUp> for Error {
    fn from(b: BlowUp) -> Self {
        b.error
    }
}

/// Output of [`Problem::evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub final_state: FieldState,
    pub snapshots: Vec<FieldState>,
    pub reports: Vec<EnergyReport>,
    pub steps: usize,
}

/// Scratch buffers reused across right-hand side evaluations.
#[derive(Debug, Clone)]
pub struct Workspace {
    d_rho: YDerivatives,
    d_u: Vec<YDerivatives>,
    d_theta: YDerivatives,
    k0: FieldState,
    k1: FieldState,
    y1: FieldState,
    y2: FieldState,
    y3: FieldState,
    /// One-sided second-order differences per field: forward and backward in
    /// `y1`, then forward and backward in `y2`.
    sided: Vec<[Vec<f64>; 4]>,
}

impl Workspace {
    pub fn new(template: &FieldState) -> Self {
        let n = template.len();
        Self {
            d_rho: YDerivatives::zeros(n),
            d_u: (0..template.u.len()).map(|_| YDerivatives::zeros(n)).collect(),
            d_theta: YDerivatives::zeros(n),
            k0: FieldState::zeros_like(template),
            k1: FieldState::zeros_like(template),
            y1: FieldState::zeros_like(template),
            y2: FieldState::zeros_like(template),
            y3: FieldState::zeros_like(template),
            sided: (0..template.u.len() + 2).map(|_| std::array::from_fn(|_| vec![0.0; n])).collect(),
        }
    }
}

/// Fill `out` with the forward and backward three-point differences of `f`;
/// entries whose stencil leaves `[0, L]` are left untouched.
fn one_sided(g: &FlattenedGrid, f: &[f64], out: &mut [Vec<f64>; 4]) {
    let n1 = g.n1;
    let (c1, c2) = (0.5 / g.h1, 0.5 / g.h2);
    let [f1, b1, f2, b2] = out;
    for j in 0..g.n2 {
        let row = &f[j * n1..(j + 1) * n1];
        let (fw, bw) = (&mut f1[j * n1..(j + 1) * n1], &mut b1[j * n1..(j + 1) * n1]);
        for i in 0..n1 - 2 {
            fw[i] = (-3.0 * row[i] + 4.0 * row[i + 1] - row[i + 2]) * c1;
        }
        for i in 2..n1 {
            bw[i] = (3.0 * row[i] - 4.0 * row[i - 1] + row[i - 2]) * c1;
        }
    }
    if g.dim == Dim::Two {
        for j in 0..g.n2 {
            let (jm, jp) = (g.jm(j), g.jp(j));
            let (jmm, jpp) = (g.jm(jm), g.jp(jp));
            let row = |k: usize| &f[k * n1..(k + 1) * n1];
            let (r0, rm, rmm, rp, rpp) = (row(j), row(jm), row(jmm), row(jp), row(jpp));
            let fw = &mut f2[j * n1..(j + 1) * n1];
            for i in 0..n1 {
                fw[i] = (-3.0 * r0[i] + 4.0 * rp[i] - rpp[i]) * c2;
            }
            let bw = &mut b2[j * n1..(j + 1) * n1];
            for i in 0..n1 {
                bw[i] = (3.0 * r0[i] - 4.0 * rm[i] + rmm[i]) * c2;
            }
        }
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Upwind derivative from the values at offsets `-2..=2`; missing neighbours
/// are `None`. `vel < 0` takes the `+` side.
#[inline]
fn upwind(v: [Option<f64>; 5], h: f64, vel: f64, conv: Convection) -> f64 {
    let f0 = v[2].unwrap_or(0.0);
    let plus = vel < 0.0 && v[3].is_some() || v[1].is_none();
    let (first, second) = if plus {
        let f1 = v[3].unwrap_or(f0);
        let first = (f1 - f0) / h;
        (first, v[4].map(|f2| (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)))
    } else {
        let fm1 = v[1].unwrap_or(f0);
        let first = (f0 - fm1) / h;
        (first, v[0].map(|fm2| (3.0 * f0 - 4.0 * fm1 + fm2) / (2.0 * h)))
    };
    match conv {
        Convection::FirstOrderUpwind => first,
        Convection::SecondOrderUpwind => second.unwrap_or(first),
        Convection::SecondOrderLimited => match (second, v[1], v[3]) {
            (Some(s), Some(m), Some(p)) => first + minmod(s - first, (p - m) / (2.0 * h) - first),
            _ => first,
        },
    }
}

/// Problem data: gas, grid and the background supplying boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub gas: GasParams,
    pub background: BackgroundState,
    pub convection: Convection,
}

impl Problem {
    pub fn new(background: BackgroundState, convection: Convection) -> Self {
        Self {
            gas: background.gas,
            background,
            convection,
        }
    }

    pub fn grid(&self) -> &FlattenedGrid {
        &self.background.grid
    }

    pub fn initial_state(&self) -> FieldState {
        self.background.as_state(0.0)
    }

    fn check_shape(&self, s: &FieldState) -> Result<()> {
        let n = self.grid().len();
        if s.rho.len() != n || s.theta.len() != n || s.u.len() != self.grid().d() || s.u.iter().any(|c| c.len() != n) {
            return Err(Error::GridMismatch(format!("state does not match the {}-node grid", n)));
        }
        Ok(())
    }

    /// Overwrite the boundary values with the background ones.
    pub fn apply_bc(&self, s: &mut FieldState) {
        let g = self.grid();
        let bg = &self.background;
        let last = g.n1 - 1;
        for j in 0..g.n2 {
            let c0 = g.idx(0, j);
            let cl = g.idx(last, j);
            for (uk, bk) in s.u.iter_mut().zip(&bg.u) {
                uk[c0] = bk[c0];
                uk[cl] = bk[cl];
            }
            s.theta[c0] = bg.theta[c0];
            s.theta[cl] = bg.theta[cl];
            s.rho[cl] = bg.rho[cl];
        }
    }

    /// Positivity of `rho`, `theta` and finiteness of every field.
    pub fn check_state(&self, s: &FieldState) -> Result<()> {
        let g = self.grid();
        let report = |field: &'static str, value: f64, c: usize| Error::Positivity {
            field,
            value,
            i1: c % g.n1,
            i2: c / g.n1,
            t: s.t,
        };
        for c in 0..s.len() {
            if !(s.rho[c] > 0.0) || !s.rho[c].is_finite() {
                return Err(report("rho", s.rho[c], c));
            }
            if !(s.theta[c] > 0.0) || !s.theta[c].is_finite() {
                return Err(report("theta", s.theta[c], c));
            }
            for uk in &s.u {
                if !uk[c].is_finite() {
                    return Err(report("u", uk[c], c));
                }
            }
        }
        Ok(())
    }

    /// `(w . grad) f` at node `(i, rows[2] / n1)`; `rows` holds the offsets
    /// of the tangential rows `j-2 ..= j+2`, `sided` the output of
    /// [`one_sided`] when the convection is second-order upwind.
    #[inline]
    fn conv_term(&self, f: &[f64], sided: &[Vec<f64>; 4], i: usize, rows: &[usize; 5], w1: f64, w2: f64) -> f64 {
        let g = self.grid();
        let n1 = g.n1;
        let c = rows[2] + i;
        let fast = self.convection == Convection::SecondOrderUpwind;
        let acc = if fast && i >= 2 && i + 2 < n1 {
            w1 * if w1 < 0.0 { sided[0][c] } else { sided[1][c] }
        } else {
            let base = rows[2];
            let at = |k: isize| -> Option<f64> {
                let ii = i as isize + k;
                if ii < 0 || ii >= n1 as isize {
                    None
                } else {
                    Some(f[base + ii as usize])
                }
            };
            w1 * upwind([at(-2), at(-1), at(0), at(1), at(2)], g.h1, w1, self.convection)
        };
        if g.dim == Dim::One {
            return acc;
        }
        let d2 = if fast {
            if w2 < 0.0 {
                sided[2][c]
            } else {
                sided[3][c]
            }
        } else {
            upwind(rows.map(|r| Some(f[r + i])), g.h2, w2, self.convection)
        };
        acc + w2 * d2
    }

    /// Time derivative of every field; zero at Dirichlet nodes.
    pub fn rhs_into(&self, s: &FieldState, ws: &mut Workspace, out: &mut FieldState) {
        let g = self.grid();
        let gas = &self.gas;
        let (mu, lam, kap, r, cv) = (gas.mu, gas.lambda, gas.kappa, gas.r_gas, gas.cv());
        let two_d = g.dim == Dim::Two;
        g.y_derivatives_into(&s.rho, &mut ws.d_rho);
        for (k, uk) in s.u.iter().enumerate() {
            g.y_derivatives_into(uk, &mut ws.d_u[k]);
        }
        g.y_derivatives_into(&s.theta, &mut ws.d_theta);
        if self.convection == Convection::SecondOrderUpwind {
            for (f, out) in s.fields().into_iter().zip(ws.sided.iter_mut()) {
                one_sided(g, f, out);
            }
        }
        let nu = s.u.len();
        let n1 = g.n1;
        out.t = s.t;
        for j in 0..g.n2 {
            let (mp, mpp) = (g.dm[j], g.ddm[j]);
            let rows = if two_d {
                let (jm, jp) = (g.jm(j), g.jp(j));
                [g.jm(jm) * n1, jm * n1, j * n1, jp * n1, g.jp(jp) * n1]
            } else {
                [0; 5]
            };
            let x2 = |d: &YDerivatives, c: usize| d.d2[c] - mp * d.d1[c];
            let x12 = |d: &YDerivatives, c: usize| d.d12[c] - mp * d.d11[c];
            let x22 = |d: &YDerivatives, c: usize| mp * mp * d.d11[c] - 2.0 * mp * d.d12[c] - mpp * d.d1[c] + d.d22[c];
            let lap = |d: &YDerivatives, c: usize| {
                if two_d {
                    (1.0 + mp * mp) * d.d11[c] - 2.0 * mp * d.d12[c] - mpp * d.d1[c] + d.d22[c]
                } else {
                    d.d11[c]
                }
            };
            for i in 0..n1 {
                let c = j * n1 + i;
                if i == n1 - 1 {
                    out.rho[c] = 0.0;
                    for uk in out.u.iter_mut() {
                        uk[c] = 0.0;
                    }
                    out.theta[c] = 0.0;
                    continue;
                }
                let rho = s.rho[c];
                let th = s.theta[c];
                let u1 = s.u[0][c];
                let u2 = if two_d { s.u[1][c] } else { 0.0 };
                let w1 = u1 - mp * u2;
                let w2 = u2;
                let du1 = &ws.d_u[0];
                // velocity gradient a[k][l] = d_{x_l} u_k
                let mut a = [[du1.d1[c], 0.0], [0.0, 0.0]];
                if two_d {
                    let du2 = &ws.d_u[1];
                    a[0][1] = x2(du1, c);
                    a[1][0] = du2.d1[c];
                    a[1][1] = x2(du2, c);
                }
                let div = a[0][0] + a[1][1];
                out.rho[c] = -self.conv_term(&s.rho, &ws.sided[0], i, &rows, w1, w2) - rho * div;
                if i == 0 {
                    for uk in out.u.iter_mut() {
                        uk[c] = 0.0;
                    }
                    out.theta[c] = 0.0;
                    continue;
                }
                let dr = &ws.d_rho;
                let dt = &ws.d_theta;
                let grad_p = [
                    r * (th * dr.d1[c] + rho * dt.d1[c]),
                    if two_d { r * (th * x2(dr, c) + rho * x2(dt, c)) } else { 0.0 },
                ];
                let grad_div = if two_d {
                    let du2 = &ws.d_u[1];
                    [du1.d11[c] + x12(du2, c), x12(du1, c) + x22(du2, c)]
                } else {
                    [du1.d11[c], 0.0]
                };
                for k in 0..s.u.len() {
                    let dk = &ws.d_u[k];
                    let visc = mu * lap(dk, c) + (mu + lam) * grad_div[k];
                    out.u[k][c] = -self.conv_term(&s.u[k], &ws.sided[1 + k], i, &rows, w1, w2) + (visc - grad_p[k]) / rho;
                }
                let def_sq = a[0][0] * a[0][0] + a[1][1] * a[1][1] + 0.5 * (a[0][1] + a[1][0]).powi(2);
                let heat = -r * rho * th * div + kap * lap(dt, c) + 2.0 * mu * def_sq + lam * div * div;
                out.theta[c] = -self.conv_term(&s.theta, &ws.sided[1 + nu], i, &rows, w1, w2) + heat / (cv * rho);
            }
        }
    }

    /// Allocating form of [`Problem::rhs_into`].
    pub fn rhs_eval(&self, s: &FieldState) -> Result<FieldState> {
        self.check_shape(s)?;
        let mut ws = Workspace::new(s);
        let mut out = FieldState::zeros_like(s);
        self.rhs_into(s, &mut ws, &mut out);
        Ok(out)
    }

    /// `cfl * min(h/(|u| + c), h^2/(2 max(mu1/rho, kappa/(cv rho))))` with
    /// `h = min(h1, h2)`.
    pub fn stable_dt(&self, s: &FieldState, cfl: f64) -> Result<f64> {
        if !(cfl > 0.0) {
            return Err(Error::InvalidParameter {
                name: "cfl",
                reason: format!("must be positive, got {cfl}"),
            });
        }
        let g = self.grid();
        let h = if g.dim == Dim::Two { g.h1.min(g.h2) } else { g.h1 };
        let gas = &self.gas;
        let mut best = f64::INFINITY;
        for c in 0..s.len() {
            let speed = s.u.iter().map(|uk| uk[c] * uk[c]).sum::<f64>().sqrt();
            let cs = gas.sound_speed(s.theta[c]);
            let nu = (gas.mu1() / s.rho[c]).max(gas.kappa / (gas.cv() * s.rho[c]));
            best = best.min(h / (speed + cs)).min(h * h / (2.0 * nu));
        }
        Ok(cfl * best)
    }

    /// Convective step `cfl / max((|w1| + c s)/h1 + (|u2| + c)/h2)` with
    /// `s = sqrt(1 + M'^2)`, and the spectral radius bound of the full
    /// operator at that step.
    fn convective_dt(&self, s: &FieldState, cfl: f64) -> (f64, f64) {
        let g = self.grid();
        let gas = &self.gas;
        let mut rate = 0.0f64;
        let mut diff = 0.0f64;
        for j in 0..g.n2 {
            let mp = g.dm[j];
            let sm = (1.0 + mp * mp).sqrt();
            for i in 0..g.n1 {
                let c = g.idx(i, j);
                let cs = gas.sound_speed(s.theta[c]);
                let u2 = if g.dim == Dim::Two { s.u[1][c] } else { 0.0 };
                let w1 = s.u[0][c] - mp * u2;
                let mut r_c = (w1.abs() + cs * sm) / g.h1;
                let nu = (gas.mu1() / s.rho[c]).max(gas.kappa / (gas.cv() * s.rho[c]));
                let mut d_c = 4.0 * nu * (1.0 + mp * mp) / (g.h1 * g.h1);
                if g.dim == Dim::Two {
                    r_c += (u2.abs() + cs) / g.h2;
                    d_c += 4.0 * nu * (1.0 / (g.h2 * g.h2) + mp.abs() / (g.h1 * g.h2));
                }
                rate = rate.max(r_c);
                diff = diff.max(d_c + 2.0 * r_c);
            }
        }
        (cfl / rate, diff)
    }

    /// One SSP-RK2 step of size `dt`, boundary values reimposed per stage.
    pub fn step(&self, s: &FieldState, dt: f64, ws: &mut Workspace) -> FieldState {
        let mut k = std::mem::replace(&mut ws.k0, FieldState::zeros_like(s));
        self.rhs_into(s, ws, &mut k);
        let mut s1 = FieldState::zeros_like(s);
        s1.set_lincomb(&[(1.0, s), (dt, &k)]);
        s1.t = s.t + dt;
        self.apply_bc(&mut s1);
        self.rhs_into(&s1, ws, &mut k);
        let mut out = FieldState::zeros_like(s);
        out.set_lincomb(&[(0.5, s), (0.5, &s1), (0.5 * dt, &k)]);
        out.t = s.t + dt;
        self.apply_bc(&mut out);
        ws.k0 = k;
        out
    }

    /// One damped RKC2 step with `stages >= 2`.
    pub fn step_rkc(&self, s: &FieldState, dt: f64, stages: usize, ws: &mut Workspace) -> FieldState {
        let c = rkc_coefficients(stages);
        let mut f0 = std::mem::replace(&mut ws.k0, FieldState::zeros_like(s));
        let mut fj = std::mem::replace(&mut ws.k1, FieldState::zeros_like(s));
        let mut y_prev2 = std::mem::replace(&mut ws.y1, FieldState::zeros_like(s));
        let mut y_prev = std::mem::replace(&mut ws.y2, FieldState::zeros_like(s));
        let mut y_new = std::mem::replace(&mut ws.y3, FieldState::zeros_like(s));
        self.rhs_into(s, ws, &mut f0);
        y_prev2.set_lincomb(&[(1.0, s)]);
        y_prev.set_lincomb(&[(1.0, s), (c.mu_t[1] * dt, &f0)]);
        self.apply_bc(&mut y_prev);
        for j in 2..=stages {
            y_prev.t = s.t + c.cj[j - 1] * dt;
            self.rhs_into(&y_prev, ws, &mut fj);
            y_new.set_lincomb(&[
                (1.0 - c.mu[j] - c.nu[j], s),
                (c.mu[j], &y_prev),
                (c.nu[j], &y_prev2),
                (c.mu_t[j] * dt, &fj),
                (c.gamma_t[j] * dt, &f0),
            ]);
            self.apply_bc(&mut y_new);
            std::mem::swap(&mut y_prev2, &mut y_prev);
            std::mem::swap(&mut y_prev, &mut y_new);
        }
        let mut out = y_prev.clone();
        out.t = s.t + dt;
        ws.k0 = f0;
        ws.k1 = fj;
        ws.y1 = y_prev2;
        ws.y2 = y_prev;
        ws.y3 = y_new;
        out
    }

    /// Step size for the next step under `cfg`, with the RKC stage count.
    pub fn next_dt(&self, s: &FieldState, cfg: &SolverConfig) -> Result<(f64, usize)> {
        match cfg.scheme {
            TimeScheme::SspRk2 => Ok((cfg.dt.map_or_else(|| self.stable_dt(s, cfg.cfl), Ok)?, 2)),
            TimeScheme::Rkc2 => {
                let (dt_conv, radius) = self.convective_dt(s, cfg.cfl);
                let dt = cfg.dt.unwrap_or(dt_conv);
                Ok((dt, rkc_stages(dt * radius)))
            }
        }
    }

    /// Advance `s` to exactly `target`, calling `on_step(old, new, dt)` after
    /// every accepted step.
    pub fn advance_to<F>(&self, mut s: FieldState, target: f64, cfg: &SolverConfig, ws: &mut Workspace, steps: &mut usize, mut on_step: F) -> Result<FieldState, BlowUp>
    where
        F: FnMut(&FieldState, &FieldState, f64),
    {
        let fail = |error: Error, last_good: &FieldState| BlowUp {
            error,
            last_good: last_good.clone(),
        };
        while s.t < target {
            if *steps >= cfg.max_steps {
                return Err(fail(
                    Error::NotConverged {
                        t: s.t,
                        rate: f64::NAN,
                    },
                    &s,
                ));
            }
            let (mut dt, stages) = self.next_dt(&s, cfg).map_err(|e| fail(e, &s))?;
            let remaining = target - s.t;
            let landing = dt >= remaining * (1.0 - 1e-12);
            if landing {
                dt = remaining;
            } else if dt > 0.5 * remaining {
                // avoid a sliver step before the landing point
                dt = 0.5 * remaining;
            }
            let mut next = match cfg.scheme {
                TimeScheme::SspRk2 => self.step(&s, dt, ws),
                TimeScheme::Rkc2 => self.step_rkc(&s, dt, stages, ws),
            };
            if landing {
                next.t = target;
            }
            self.check_state(&next).map_err(|e| fail(e, &s))?;
            *steps += 1;
            on_step(&s, &next, dt);
            s = next;
        }
        Ok(s)
    }

    /// Integrate to `cfg.t_end`, recording snapshots and diagnostics at their
    /// cadences (landing exactly on each event time).
    pub fn evolve(&self, s0: FieldState, cfg: &SolverConfig) -> Result<Trajectory, BlowUp> {
        let fail = |error: Error, s: &FieldState| BlowUp {
            error,
            last_good: s.clone(),
        };
        cfg.validate().map_err(|e| fail(e, &s0))?;
        self.check_shape(&s0).map_err(|e| fail(e, &s0))?;
        self.check_state(&s0).map_err(|e| fail(e, &s0))?;
        let mut s = s0;
        self.apply_bc(&mut s);
        let mut ws = Workspace::new(&s);
        let mut snapshots = Vec::new();
        let mut reports = Vec::new();
        let report = |st: &FieldState| energy_report(st, &self.background, cfg.beta, &self.gas);
        if cfg.snapshot_every.is_some() {
            snapshots.push(s.clone());
        }
        if cfg.diagnostics_every.is_some() {
            reports.push(report(&s).map_err(|e| fail(e, &s))?);
        }
        let t0 = s.t;
        let mut k_snap = 1u64;
        let mut k_diag = 1u64;
        let mut steps = 0usize;
        while s.t < cfg.t_end {
            let next_snap = cfg.snapshot_every.map_or(f64::INFINITY, |p| t0 + k_snap as f64 * p);
            let next_diag = cfg.diagnostics_every.map_or(f64::INFINITY, |p| t0 + k_diag as f64 * p);
            let target = cfg.t_end.min(next_snap).min(next_diag);
            s = self.advance_to(s, target, cfg, &mut ws, &mut steps, |_, _, _| {})?;
            if target == next_snap {
                snapshots.push(s.clone());
                k_snap += 1;
            }
            if target == next_diag {
                reports.push(report(&s).map_err(|e| fail(e, &s))?);
                k_diag += 1;
            }
        }
        Ok(Trajectory {
            final_state: s,
            snapshots,
            reports,
            steps,
        })
    }
}

/// Damping parameter of the RKC2 scheme.
const RKC_EPS: f64 = 2.0 / 13.0;

#[derive(Debug, Clone)]
struct RkcCoefficients {
    mu: Vec<f64>,
    nu: Vec<f64>,
    mu_t: Vec<f64>,
    gamma_t: Vec<f64>,
    /// Stage abscissae `c_j`.
    cj: Vec<f64>,
    /// Length of the real stability interval.
    beta: f64,
}

fn chebyshev(s: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; s + 1];
    let mut dt = vec![0.0; s + 1];
    let mut ddt = vec![0.0; s + 1];
    t[0] = 1.0;
    t[1] = x;
    dt[1] = 1.0;
    for j in 2..=s {
        t[j] = 2.0 * x * t[j - 1] - t[j - 2];
        dt[j] = 2.0 * t[j - 1] + 2.0 * x * dt[j - 1] - dt[j - 2];
        ddt[j] = 4.0 * dt[j - 1] + 2.0 * x * ddt[j - 1] - ddt[j - 2];
    }
    (t, dt, ddt)
}

fn rkc_coefficients(s: usize) -> RkcCoefficients {
    let s = s.max(2);
    let w0 = 1.0 + RKC_EPS / (s * s) as f64;
    let (t, dt, ddt) = chebyshev(s, w0);
    let w1 = dt[s] / ddt[s];
    let mut b = vec![0.0; s + 1];
    for j in 2..=s {
        b[j] = ddt[j] / (dt[j] * dt[j]);
    }
    b[0] = b[2];
    b[1] = b[2];
    let a: Vec<f64> = (0..=s).map(|j| 1.0 - b[j] * t[j]).collect();
    let mut mu = vec![0.0; s + 1];
    let mut nu = vec![0.0; s + 1];
    let mut mu_t = vec![0.0; s + 1];
    let mut gamma_t = vec![0.0; s + 1];
    let mut cj = vec![0.0; s + 1];
    mu_t[1] = b[1] * w1;
    cj[1] = mu_t[1];
    for j in 2..=s {
        mu[j] = 2.0 * b[j] * w0 / b[j - 1];
        nu[j] = -b[j] / b[j - 2];
        mu_t[j] = 2.0 * b[j] * w1 / b[j - 1];
        gamma_t[j] = -a[j - 1] * mu_t[j];
        cj[j] = mu[j] * cj[j - 1] + nu[j] * cj[j - 2] + mu_t[j] + gamma_t[j];
    }
    RkcCoefficients {
        mu,
        nu,
        mu_t,
        gamma_t,
        cj,
        beta: (1.0 + w0) / w1,
    }
}

/// Smallest stage count whose real stability interval covers `z / 0.8`.
fn rkc_stages(z: f64) -> usize {
    let mut s = 2;
    while rkc_coefficients(s).beta * 0.8 < z && s < 1000 {
        s += 1;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::{BoundaryData, OutflowThresholds};
    use crate::gas::FarFieldState;
    use crate::geometry::BoundaryShape;
    use crate::profile::{PlanarBoundaryData, ProfileOptions};

    fn problem(shape: BoundaryShape, n1: usize, n2: usize, l: f64, bd: PlanarBoundaryData, conv: Convection) -> Problem {
        let g = GasParams::canonical();
        let ff = FarFieldState::canonical();
        let grid = FlattenedGrid::new(shape, n1, n2, l).unwrap();
        let data = BoundaryData::reference(bd, grid.dim);
        let bg = BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), OutflowThresholds::default()).unwrap();
        Problem::new(bg, conv)
    }

    fn far() -> PlanarBoundaryData {
        PlanarBoundaryData { u_b: -2.0, theta_b: 1.0 }
    }

    #[test]
    fn constant_state_has_zero_rhs() {
        for shape in [BoundaryShape::flat_1d(), BoundaryShape::flat_2d(1.0)] {
            let p = problem(shape, 21, 8, 4.0, far(), Convection::SecondOrderLimited);
            let r = p.rhs_eval(&p.initial_state()).unwrap();
            assert_eq!(r.max_abs(), 0.0);
        }
    }

    #[test]
    fn curved_constant_state_rhs_is_rounding() {
        let p = problem(BoundaryShape::sine(1.0, 0.1), 21, 16, 4.0, far(), Convection::SecondOrderUpwind);
        let r = p.rhs_eval(&p.initial_state()).unwrap();
        assert!(r.max_abs() < 1e-12, "{}", r.max_abs());
    }

    #[test]
    fn stable_dt_arithmetic() {
        let p = problem(BoundaryShape::flat_1d(), 81, 1, 4.0, far(), Convection::FirstOrderUpwind);
        let s = p.initial_state();
        let h: f64 = 0.05;
        let c = (5.0f64 / 3.0).sqrt();
        let expect = 0.4 * (h / (2.0 + c)).min(h * h / (2.0 * 2.0));
        assert!((p.stable_dt(&s, 0.4).unwrap() - expect).abs() < 1e-15);
        assert!(p.stable_dt(&s, 0.0).is_err());
        // heavy fluid: convective bound dominates
        let mut heavy = s.clone();
        heavy.rho.iter_mut().for_each(|r| *r = 1e6);
        let conv = 0.4 * h / (2.0 + c);
        assert!((p.stable_dt(&heavy, 0.4).unwrap() - conv).abs() < 1e-15);
    }

    #[test]
    fn constant_state_is_preserved() {
        let p = problem(BoundaryShape::flat_2d(1.0), 11, 6, 2.0, far(), Convection::SecondOrderUpwind);
        let s0 = p.initial_state();
        let mut ws = Workspace::new(&s0);
        let mut s = s0.clone();
        let dt = p.stable_dt(&s, 0.4).unwrap();
        for _ in 0..1000 {
            s = p.step(&s, dt, &mut ws);
        }
        assert!(s.max_diff(&s0) <= 1e-12);
    }

    #[test]
    fn upwind_stencils() {
        let v = [Some(0.0), Some(1.0), Some(4.0), Some(9.0), Some(16.0)];
        // f = x^2 around x = 2 with h = 1
        assert_eq!(upwind(v, 1.0, -1.0, Convection::FirstOrderUpwind), 5.0);
        assert_eq!(upwind(v, 1.0, 1.0, Convection::FirstOrderUpwind), 3.0);
        assert_eq!(upwind(v, 1.0, -1.0, Convection::SecondOrderUpwind), 4.0);
        assert_eq!(upwind(v, 1.0, 1.0, Convection::SecondOrderUpwind), 4.0);
        assert_eq!(upwind(v, 1.0, 1.0, Convection::SecondOrderLimited), 4.0);
        // boundary: missing minus side falls back to the interior
        let b = [None, None, Some(4.0), Some(9.0), Some(16.0)];
        assert_eq!(upwind(b, 1.0, 1.0, Convection::SecondOrderUpwind), 4.0);
        // extremum: limiter returns first order
        let e = [Some(1.0), Some(0.0), Some(1.0), Some(0.0), Some(1.0)];
        assert_eq!(upwind(e, 1.0, 1.0, Convection::SecondOrderLimited), 1.0);
    }

    #[test]
    fn rkc_coefficients_are_consistent() {
        for s in [2usize, 3, 5, 10, 20] {
            let c = rkc_coefficients(s);
            assert!((c.cj[s] - 1.0).abs() < 1e-12, "{s}: {}", c.cj[s]);
            let approx = 0.653 * (s * s) as f64;
            assert!(c.beta > 0.5 * approx && c.beta < 1.5 * approx);
        }
        assert_eq!(rkc_stages(0.0), 2);
        assert!(rkc_stages(100.0) > 10);
    }

    #[test]
    fn rkc_matches_ssp_on_smooth_problem() {
        let bd = PlanarBoundaryData { u_b: -1.99, theta_b: 1.0 };
        let p = problem(BoundaryShape::flat_1d(), 161, 1, 40.0, bd, Convection::SecondOrderUpwind);
        let mut s0 = p.initial_state();
        let g = p.grid().clone();
        for i in 0..g.n1 {
            let y = g.y1(i);
            if (2.0..6.0).contains(&y) {
                s0.u[0][i] += 1e-3 * (std::f64::consts::PI * (y - 2.0) / 4.0).sin().powi(2);
            }
        }
        let base = SolverConfig {
            t_end: 2.0,
            convection: Convection::SecondOrderUpwind,
            ..Default::default()
        };
        let a = p.evolve(s0.clone(), &base).unwrap().final_state;
        let b = p
            .evolve(
                s0.clone(),
                &SolverConfig {
                    scheme: TimeScheme::Rkc2,
                    cfl: 0.3,
                    ..base
                },
            )
            .unwrap()
            .final_state;
        let diff = a.max_diff(&b);
        let moved = a.max_diff(&s0);
        assert!(diff < 1e-2 * moved, "{diff} vs {moved}");
    }

    #[test]
    fn blow_up_reports_last_good_state() {
        let p = problem(BoundaryShape::flat_1d(), 21, 1, 4.0, far(), Convection::FirstOrderUpwind);
        let mut s0 = p.initial_state();
        s0.theta[10] = 3.0;
        s0.rho[9] = 0.2;
        let cfg = SolverConfig {
            dt: Some(0.5),
            t_end: 50.0,
            ..Default::default()
        };
        let err = p.evolve(s0, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::Positivity { .. }));
        assert!(p.check_state(&err.last_good).is_ok());
    }

    #[test]
    fn evolve_lands_on_event_times() {
        let p = problem(BoundaryShape::flat_1d(), 21, 1, 4.0, far(), Convection::FirstOrderUpwind);
        let cfg = SolverConfig {
            t_end: 1.0,
            snapshot_every: Some(0.25),
            diagnostics_every: Some(0.5),
            ..Default::default()
        };
        let tr = p.evolve(p.initial_state(), &cfg).unwrap();
        let ts: Vec<f64> = tr.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let td: Vec<f64> = tr.reports.iter().map(|r| r.t).collect();
        assert_eq!(td, vec![0.0, 0.5, 1.0]);
        assert_eq!(tr.final_state.t, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig { cfl: 0.0, ..Default::default() },
            SolverConfig { cfl: 1.0, ..Default::default() },
            SolverConfig { steady_tol: 0.0, ..Default::default() },
            SolverConfig { dt: Some(-1.0), ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
