//! Stationary solutions by plain time marching, and their audits.

use serde::{Deserialize, Serialize};

use crate::background::{extract_perturbation, Perturbation};
use crate::diagnostics::{contraction_functional, difference, fit_decay_rate, weighted_norm_sq, DecayFit, FitWindow};
use crate::error::{Error, Result};
use crate::geometry::{Dim, FlattenedGrid};
use crate::solver::{BlowUp, FieldState, Problem, SolverConfig, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteadyConfig {
    /// Shift period `T*` of the difference series.
    pub period: f64,
    pub t_max: f64,
    /// Weight exponent of the shift-difference norm.
    pub beta: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            period: 1.0,
            t_max: 300.0,
            beta: 0.0,
        }
    }
}

impl SteadyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !(self.t_max >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "steady",
                reason: format!(
                    "need period > 0, t_max >= 0, beta >= 0; got {}, {}, {}",
                    self.period, self.t_max, self.beta
                ),
            });
        }
        Ok(())
    }
}

/// One entry of the shift-difference series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftSample {
    pub k: usize,
    pub t: f64,
    /// `||state(t + T*) - state(t)||_{L^2_{e,beta}}` with `t = k T*`.
    pub s: f64,
}

/// Outcome of [`march_to_steady`].
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub state: FieldState,
    pub perturbation: Perturbation,
    pub converged: bool,
    /// `(t, max |rhs|)` at every period end, starting at the initial time.
    pub history: Vec<(f64, f64)>,
    /// `max |state(t + dt) - state(t)| / dt` of the last step taken.
    pub last_step_rate: f64,
    pub shift_series: Vec<ShiftSample>,
    pub steps: usize,
}

impl StationaryResult {
    pub fn final_rate(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.1)
    }

    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                t: self.state.t,
                rate: self.final_rate(),
            })
        }
    }

    /// Log-linear fit of `s_k` against `k` over the samples with `k >= k_min`
    /// that are above the rounding floor `floor`.
    pub fn shift_fit(&self, k_min: usize, floor: f64) -> Result<DecayFit> {
        let pts: Vec<&ShiftSample> = self.shift_series.iter().filter(|p| p.k >= k_min && p.s > floor).collect();
        let ks: Vec<f64> = pts.iter().map(|p| p.k as f64).collect();
        let ss: Vec<f64> = pts.iter().map(|p| p.s).collect();
        fit_decay_rate(&ks, &ss, FitWindow::all())
    }

    /// `||Phi^s||^2_{L^2_{e,beta}}`.
    pub fn perturbation_norm_sq(&self, beta: f64, grid: &FlattenedGrid) -> Result<f64> {
        weighted_norm_sq(&self.perturbation.components(), beta, grid)
    }
}

fn sup_rhs(p: &Problem, s: &FieldState, ws: &mut Workspace) -> f64 {
    let mut r = FieldState::zeros_like(s);
    p.rhs_into(s, ws, &mut r);
    r.max_abs()
}

/// March from `s0` until `max |rhs| <= solver.steady_tol` at a period end or
/// `t_max` is reached, recording the shift-difference series at period `T*`.
pub fn march_to_steady(p: &Problem, s0: FieldState, solver: &SolverConfig, cfg: &SteadyConfig) -> Result<StationaryResult> {
    solver.validate()?;
    cfg.validate()?;
    p.check_state(&s0)?;
    let grid = p.grid().clone();
    let mut ws = Workspace::new(&s0);
    let mut s = s0;
    p.apply_bc(&mut s);
    let t0 = s.t;
    let mut history = vec![(s.t, sup_rhs(p, &s, &mut ws))];
    let mut shift = Vec::new();
    let mut steps = 0usize;
    let mut last_step_rate = 0.0;
    let mut converged = history[0].1 <= solver.steady_tol;
    let mut k = 0usize;
    while !converged && s.t < t0 + cfg.t_max {
        let target = (t0 + (k + 1) as f64 * cfg.period).min(t0 + cfg.t_max);
        let prev = s.clone();
        s = p
            .advance_to(s, target, solver, &mut ws, &mut steps, |a, b, dt| {
                last_step_rate = a.max_diff(b) / dt;
            })
            .map_err(|b: BlowUp| b.error)?;
        let diff = difference(&s, &prev);
        let slices: Vec<&[f64]> = diff.iter().map(|d| d.as_slice()).collect();
        shift.push(ShiftSample {
            k,
            t: prev.t,
            s: weighted_norm_sq(&slices, cfg.beta, &grid)?.sqrt(),
        });
        let rate = sup_rhs(p, &s, &mut ws);
        history.push((s.t, rate));
        converged = rate <= solver.steady_tol;
        k += 1;
    }
    let perturbation = extract_perturbation(&s, &p.background)?;
    Ok(StationaryResult {
        state: s,
        perturbation,
        converged,
        history,
        last_step_rate,
        shift_series: shift,
        steps,
    })
}

/// Norms of the stationary residual of one equation set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ResidualNorms {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

impl ResidualNorms {
    pub fn total(&self) -> f64 {
        (self.mass * self.mass + self.momentum * self.momentum + self.energy * self.energy).sqrt()
    }
}

/// Stationary residuals with the solver's operators and with independent
/// fourth-order centered operators, plus the integrated mass balance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Max norms of the solver's own residual.
    pub second_order_max: ResidualNorms,
    /// Discrete `L^2` norms over nodes `2 ..= n1 - 3` with fourth-order stencils.
    pub fourth_order_l2: ResidualNorms,
    /// Fourth-order residual of all equations per `y1` column, `L^2` in `y2`.
    pub fourth_order_columns: Vec<f64>,
    /// `int div(rho u)` over the domain.
    pub mass_interior: f64,
    /// Net mass flux through `y1 = L` and the boundary graph.
    pub mass_boundary: f64,
}

impl ResidualReport {
    pub fn mass_balance_mismatch(&self) -> f64 {
        (self.mass_interior - self.mass_boundary).abs()
    }

    /// Fourth-order residual `L^2` over the columns with `y1 >= y_min`. The
    /// window is a fixed physical region, so grids of different spacing are
    /// compared on the same set.
    pub fn fourth_order_window(&self, grid: &FlattenedGrid, y_min: f64) -> f64 {
        self.fourth_order_columns
            .iter()
            .enumerate()
            .filter(|(i, _)| grid.y1(*i) >= y_min - 1e-12)
            .map(|(_, c)| c * c)
            .sum::<f64>()
            .sqrt()
    }
}

/// Five-point fourth-order first and second derivatives along one line.
#[inline]
fn d4(f: [f64; 5], h: f64) -> (f64, f64) {
    let d1 = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
    let d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
    (d1, d2)
}

struct Jet4 {
    v: f64,
    d1: f64,
    d2: f64,
    d11: f64,
    d12: f64,
    d22: f64,
}

/// Fourth-order `x`-jet of `f` at interior node `(i, j)`, `2 <= i <= n1 - 3`.
fn jet4(f: &[f64], g: &FlattenedGrid, i: usize, j: usize) -> Jet4 {
    let n1 = g.n1;
    let row = |jj: usize, ii: usize| f[jj * n1 + ii];
    let line1 = |jj: usize| [row(jj, i - 2), row(jj, i - 1), row(jj, i), row(jj, i + 1), row(jj, i + 2)];
    let (y1, y11) = d4(line1(j), g.h1);
    if g.dim == Dim::One {
        return Jet4 {
            v: f[j * n1 + i],
            d1: y1,
            d2: 0.0,
            d11: y11,
            d12: 0.0,
            d22: 0.0,
        };
    }
    let (jm, jp) = (g.jm(j), g.jp(j));
    let (jmm, jpp) = (g.jm(jm), g.jp(jp));
    let js = [jmm, jm, j, jp, jpp];
    let (y2, y22) = d4(js.map(|jj| row(jj, i)), g.h2);
    let d1s = js.map(|jj| d4(line1(jj), g.h1).0);
    let (y12, _) = d4(d1s, g.h2);
    let (mp, mpp) = (g.dm[j], g.ddm[j]);
    Jet4 {
        v: f[j * n1 + i],
        d1: y1,
        d2: y2 - mp * y1,
        d11: y11,
        d12: y12 - mp * y11,
        d22: mp * mp * y11 - 2.0 * mp * y12 - mpp * y1 + y22,
    }
}

/// Residuals of the stationary equations at `state`.
pub fn stationary_residual(p: &Problem, state: &FieldState) -> Result<ResidualReport> {
    let g = p.grid();
    let gas = &p.gas;
    let (mu, lam, kap, r, cv) = (gas.mu, gas.lambda, gas.kappa, gas.r_gas, gas.cv());
    let rhs = p.rhs_eval(state)?;
    let mut second = ResidualNorms::default();
    for c in 0..state.len() {
        second.mass = second.mass.max(rhs.rho[c].abs());
        for uk in &rhs.u {
            second.momentum = second.momentum.max((state.rho[c] * uk[c]).abs());
        }
        second.energy = second.energy.max((cv * state.rho[c] * rhs.theta[c]).abs());
    }

    let d = g.d();
    let mut fourth = ResidualNorms::default();
    let mut columns = vec![0.0; g.n1];
    if g.n1 >= 7 {
        let w = g.h1 * g.h2;
        for j in 0..g.n2 {
            for i in 2..g.n1 - 2 {
                let rho = jet4(&state.rho, g, i, j);
                let th = jet4(&state.theta, g, i, j);
                let u: Vec<Jet4> = state.u.iter().map(|uk| jet4(uk, g, i, j)).collect();
                let uv = |k: usize| if k < d { u[k].v } else { 0.0 };
                let div = u[0].d1 + if d == 2 { u[1].d2 } else { 0.0 };
                let mass = rho.d1 * uv(0) + rho.d2 * uv(1) + rho.v * div;
                let grad_div = if d == 2 {
                    [u[0].d11 + u[1].d12, u[0].d12 + u[1].d22]
                } else {
                    [u[0].d11, 0.0]
                };
                let mut mom_sq = 0.0;
                for k in 0..d {
                    let grad_p = if k == 0 {
                        r * (th.v * rho.d1 + rho.v * th.d1)
                    } else {
                        r * (th.v * rho.d2 + rho.v * th.d2)
                    };
                    let m = rho.v * (uv(0) * u[k].d1 + uv(1) * u[k].d2) + grad_p
                        - mu * (u[k].d11 + u[k].d22)
                        - (mu + lam) * grad_div[k];
                    mom_sq += m * m;
                }
                let a = if d == 2 {
                    [[u[0].d1, u[0].d2], [u[1].d1, u[1].d2]]
                } else {
                    [[u[0].d1, 0.0], [0.0, 0.0]]
                };
                let def_sq = a[0][0].powi(2) + a[1][1].powi(2) + 0.5 * (a[0][1] + a[1][0]).powi(2);
                let en = cv * rho.v * (uv(0) * th.d1 + uv(1) * th.d2) + r * rho.v * th.v * div
                    - kap * (th.d11 + th.d22)
                    - 2.0 * mu * def_sq
                    - lam * div * div;
                fourth.mass += w * mass * mass;
                fourth.momentum += w * mom_sq;
                fourth.energy += w * en * en;
                columns[i] += w * (mass * mass + mom_sq + en * en);
            }
        }
        fourth.mass = fourth.mass.sqrt();
        fourth.momentum = fourth.momentum.sqrt();
        fourth.energy = fourth.energy.sqrt();
        for c in &mut columns {
            *c = c.sqrt();
        }
    }

    // divergence theorem for rho u in flattened coordinates
    let flux: Vec<Vec<f64>> = state
        .u
        .iter()
        .map(|uk| uk.iter().zip(&state.rho).map(|(a, b)| a * b).collect())
        .collect();
    let div = g.hat_divergence(&flux)?;
    let mass_interior = g.integrate(&div);
    let last = g.n1 - 1;
    let mut top = 0.0;
    let mut bottom = 0.0;
    for j in 0..g.n2 {
        let (c0, cl) = (g.idx(0, j), g.idx(last, j));
        let m2_0 = if d == 2 { g.dm[j] * flux[1][c0] } else { 0.0 };
        top += flux[0][cl];
        bottom += flux[0][c0] - m2_0;
    }
    let mass_boundary = (top - bottom) * g.h2;
    Ok(ResidualReport {
        second_order_max: second,
        fourth_order_l2: fourth,
        fourth_order_columns: columns,
        mass_interior,
        mass_boundary,
    })
}

/// Co-evolution of two initial states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// Contraction functional of the difference.
    pub functional: Vec<f64>,
    /// `||Phi_a - Phi_b||_{L^2_{e,beta}}`.
    pub distance: Vec<f64>,
    /// Largest `d_{k+1} / d_k` over the series (1 for an all-zero series).
    pub max_step_ratio: f64,
    pub fit: Option<DecayFit>,
}

impl ContractionReport {
    /// `d_{k+1} <= (1 + tol) d_k` for every recorded interval.
    pub fn nonincreasing_within(&self, tol: f64) -> bool {
        self.max_step_ratio <= 1.0 + tol
    }
}

/// Evolve two states side by side and record their distance every `every`
/// time units up to `t_end`; the decay fit uses samples in `window`.
pub fn two_solution_contraction(
    p: &Problem,
    a0: FieldState,
    b0: FieldState,
    solver: &SolverConfig,
    every: f64,
    beta: f64,
    window: FitWindow,
) -> Result<ContractionReport> {
    solver.validate()?;
    if !(every > 0.0) {
        return Err(Error::InvalidParameter {
            name: "every",
            reason: "sampling interval must be positive".into(),
        });
    }
    let grid = p.grid().clone();
    let theta_w = &p.background.theta_tilde;
    let mut a = a0;
    let mut b = b0;
    p.apply_bc(&mut a);
    p.apply_bc(&mut b);
    let mut wa = Workspace::new(&a);
    let mut wb = Workspace::new(&b);
    let mut steps = 0usize;
    let mut times = Vec::new();
    let mut functional = Vec::new();
    let mut distance = Vec::new();
    let t0 = a.t;
    let mut k = 0usize;
    loop {
        times.push(a.t);
        functional.push(contraction_functional(&a, &b, theta_w, beta, &p.gas, &grid)?);
        let diff = difference(&a, &b);
        let sl: Vec<&[f64]> = diff.iter().map(|d| d.as_slice()).collect();
        distance.push(weighted_norm_sq(&sl, beta, &grid)?.sqrt());
        if a.t >= solver.t_end {
            break;
        }
        k += 1;
        let target = (t0 + k as f64 * every).min(solver.t_end);
        a = p.advance_to(a, target, solver, &mut wa, &mut steps, |_, _, _| {}).map_err(|e| e.error)?;
        b = p.advance_to(b, target, solver, &mut wb, &mut steps, |_, _, _| {}).map_err(|e| e.error)?;
    }
    let mut max_step_ratio = 1.0f64;
    for w in functional.windows(2) {
        if w[0] > 0.0 {
            max_step_ratio = max_step_ratio.max(w[1] / w[0]);
        } else if w[1] > 0.0 {
            max_step_ratio = f64::INFINITY;
        }
    }
    let fit = fit_decay_rate(&times, &distance, window).ok();
    Ok(ContractionReport {
        times,
        functional,
        distance,
        max_step_ratio,
        fit,
    })
}

/// Tangential structure of a stationary state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultidirectionalReport {
    pub max_u2: f64,
    /// `max |u(i, j) - mean_j u(i, .)|` over nodes and components.
    pub tangential_variation: f64,
    /// Both quantities above the noise floor `1e-10`.
    pub multidirectional: bool,
}

pub const NOISE_FLOOR: f64 = 1e-10;

pub fn multidirectional_audit(state: &FieldState, grid: &FlattenedGrid) -> MultidirectionalReport {
    if grid.dim == Dim::One {
        return MultidirectionalReport {
            max_u2: 0.0,
            tangential_variation: 0.0,
            multidirectional: false,
        };
    }
    let max_u2 = state.u[1].iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let mut var = 0.0f64;
    for uk in &state.u {
        for i in 0..grid.n1 {
            let mean = (0..grid.n2).map(|j| uk[grid.idx(i, j)]).sum::<f64>() / grid.n2 as f64;
            for j in 0..grid.n2 {
                var = var.max((uk[grid.idx(i, j)] - mean).abs());
            }
        }
    }
    MultidirectionalReport {
        max_u2,
        tangential_variation: var,
        multidirectional: max_u2 > NOISE_FLOOR && var > NOISE_FLOOR,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::BackgroundState;
    use crate::extension::{BoundaryData, OutflowThresholds};
    use crate::gas::{FarFieldState, GasParams};
    use crate::geometry::BoundaryShape;
    use crate::profile::{PlanarBoundaryData, ProfileOptions};
    use crate::solver::Convection;

    fn problem(shape: BoundaryShape, n1: usize, n2: usize, l: f64, bd: PlanarBoundaryData) -> Problem {
        let g = GasParams::canonical();
        let ff = FarFieldState::canonical();
        let grid = FlattenedGrid::new(shape, n1, n2, l).unwrap();
        let data = BoundaryData::reference(bd, grid.dim);
        let bg = BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), OutflowThresholds::default()).unwrap();
        Problem::new(bg, Convection::SecondOrderUpwind)
    }

    fn cfg() -> SolverConfig {
        SolverConfig {
            convection: Convection::SecondOrderUpwind,
            ..Default::default()
        }
    }

    #[test]
    fn trivial_case_converges_at_start() {
        let p = problem(BoundaryShape::flat_2d(1.0), 21, 8, 8.0, PlanarBoundaryData { u_b: -2.0, theta_b: 1.0 });
        let r = march_to_steady(&p, p.initial_state(), &cfg(), &SteadyConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 0);
        assert_eq!(r.perturbation.max_abs(), 0.0);
        let res = stationary_residual(&p, &r.state).unwrap();
        assert!(res.second_order_max.mass <= 1e-12 && res.fourth_order_l2.total() <= 1e-12);
        let audit = multidirectional_audit(&r.state, p.grid());
        assert!(!audit.multidirectional);
    }

    #[test]
    fn one_d_profile_converges_and_restarts_idempotently() {
        let p = problem(BoundaryShape::flat_1d(), 81, 1, 34.0, PlanarBoundaryData { u_b: -1.99, theta_b: 1.0 });
        let sc = SteadyConfig {
            t_max: 200.0,
            ..Default::default()
        };
        let r = march_to_steady(&p, p.initial_state(), &cfg(), &sc).unwrap();
        assert!(r.converged, "rate {}", r.final_rate());
        assert!(r.perturbation.max_abs() < 1e-3);
        let again = march_to_steady(&p, r.state.clone(), &cfg(), &sc).unwrap();
        assert_eq!(again.steps, 0);
        assert_eq!(again.state, r.state);
        let fit = r.shift_fit(3, 1e-14).unwrap();
        assert!(fit.sigma > 0.0);
    }

    #[test]
    fn identical_states_have_zero_contraction() {
        let p = problem(BoundaryShape::flat_1d(), 41, 1, 34.0, PlanarBoundaryData { u_b: -1.99, theta_b: 1.0 });
        let s = p.initial_state();
        let c = SolverConfig { t_end: 1.0, ..cfg() };
        let rep = two_solution_contraction(&p, s.clone(), s, &c, 0.25, 0.0, FitWindow::all()).unwrap();
        assert!(rep.functional.iter().all(|&v| v == 0.0));
        assert!(rep.nonincreasing_within(0.05));
        assert!(rep.fit.is_none());
    }

    #[test]
    fn residual_columns_add_up_to_the_total() {
        let (g, ff) = (GasParams::canonical(), FarFieldState::canonical());
        let bd = PlanarBoundaryData::default();
        let grid = FlattenedGrid::new(BoundaryShape::sine(1.0, 0.1), 41, 8, 34.0).unwrap();
        let data = BoundaryData::normal_outflow(bd, Dim::Two);
        let bg = BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), OutflowThresholds::default()).unwrap();
        let p = Problem::new(bg, Convection::SecondOrderUpwind);
        let r = stationary_residual(&p, &p.initial_state()).unwrap();
        let total = r.fourth_order_l2.total();
        assert!(total > 0.0);
        assert!((r.fourth_order_window(&grid, 0.0) - total).abs() <= 1e-12 * total);
        assert!(r.fourth_order_window(&grid, 5.0) < total);
        assert_eq!(r.fourth_order_window(&grid, 35.0), 0.0);
    }

    #[test]
    fn jet4_exact_on_quartic() {
        let g = FlattenedGrid::new(BoundaryShape::flat_2d(1.0), 21, 16, 2.0).unwrap();
        let f = g.sample(|a, _| a.powi(4) - a * a);
        let j = jet4(&f, &g, 10, 3);
        let y = g.y1(10);
        assert!((j.d1 - (4.0 * y.powi(3) - 2.0 * y)).abs() < 1e-9);
        assert!((j.d11 - (12.0 * y * y - 2.0)).abs() < 1e-9);
    }
}
