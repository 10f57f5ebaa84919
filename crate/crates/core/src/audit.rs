//! Property audits shared by the `verify` command and the acceptance suite.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::background::{forcing_audit, forcing_terms, BackgroundState, ForcingAudit};
use crate::diagnostics::{energy_identity_residual, energy_integral, hardy_check, weighted_norm_sq, EnergyReference, HardyReport};
use crate::error::{Error, Result};
use crate::extension::{BoundaryData, OutflowThresholds};
use crate::gas::{det3, f1_determinant, f1_matrix, FarFieldState, GasParams};
use crate::geometry::{BoundaryShape, FlattenedGrid};
use crate::profile::{PlanarBoundaryData, ProfileOptions};
use crate::solver::{Convection, FieldState, Problem, SolverConfig};

/// One Mach number of the boundary-form scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub mach: f64,
    pub min_eigenvalue: f64,
    pub determinant: f64,
    pub determinant_closed_form: f64,
    /// `sign(min eigenvalue) == sign(Mach - 1)`.
    pub sign_matches: bool,
}

pub fn min_eigenvalue(m: &[[f64; 3]; 3]) -> f64 {
    let a = Matrix3::from_fn(|i, j| m[i][j]);
    SymmetricEigen::new(a).eigenvalues.min()
}

/// Far-field states `(rho_+, -Mach c(theta_+), theta_+)` for each Mach number.
pub fn supersonic_scan(g: &GasParams, rho_plus: f64, theta_plus: f64, machs: &[f64]) -> Result<Vec<ScanRow>> {
    machs
        .iter()
        .map(|&mach| {
            let ff = FarFieldState::new(rho_plus, -mach * g.sound_speed(theta_plus), theta_plus)?;
            let m = f1_matrix(&ff, g);
            let ev = min_eigenvalue(&m);
            Ok(ScanRow {
                mach,
                min_eigenvalue: ev,
                determinant: det3(&m),
                determinant_closed_form: f1_determinant(&ff, g),
                sign_matches: (ev > 0.0) == (mach > 1.0) && ev != 0.0,
            })
        })
        .collect()
}

/// Manufactured field with exact `x` derivatives `[f, f1, f2, f11, f12, f22]`.
pub type Manufactured = fn(f64, f64, f64) -> [f64; 6];

fn field_a(x1: f64, x2: f64, ell: f64) -> [f64; 6] {
    let w = 2.0 * std::f64::consts::PI / ell;
    let (s1, c1) = x1.sin_cos();
    let (s2, c2) = (w * x2).sin_cos();
    [s1 * c2, c1 * c2, -w * s1 * s2, -s1 * c2, -w * c1 * s2, -w * w * s1 * c2]
}

fn field_b(x1: f64, x2: f64, ell: f64) -> [f64; 6] {
    let w = 2.0 * std::f64::consts::PI / ell;
    let e = (-0.5 * x1).exp();
    let (s2, c2) = (w * x2).sin_cos();
    [e * s2, -0.5 * e * s2, w * e * c2, 0.25 * e * s2, -0.5 * w * e * c2, -w * w * e * s2]
}

fn field_c(x1: f64, x2: f64, ell: f64) -> [f64; 6] {
    let w = 4.0 * std::f64::consts::PI / ell;
    let (s2, c2) = (w * x2).sin_cos();
    let p = x1 * x1 / (1.0 + x1 * x1);
    let dp = 2.0 * x1 / (1.0 + x1 * x1).powi(2);
    let ddp = (2.0 - 6.0 * x1 * x1) / (1.0 + x1 * x1).powi(3);
    [p * c2 + x1, dp * c2 + 1.0, -w * p * s2, ddp * c2, -w * dp * s2, -w * w * p * c2]
}

pub const MANUFACTURED: [(&str, Manufactured); 3] = [("sin_cos", field_a), ("exp_sin", field_b), ("rational", field_c)];

/// Max-norm errors of the hat operators on grid `h` and `h/2` and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub field: String,
    pub operator: &'static str,
    pub error_h: f64,
    pub error_h2: f64,
    pub ratio: f64,
}

fn operator_errors(grid: &FlattenedGrid, f: Manufactured, g: Manufactured) -> Result<[f64; 3]> {
    let ell = grid.shape.period;
    let mut vals = vec![0.0; grid.len()];
    let mut other = vec![0.0; grid.len()];
    let mut exact = vec![[0.0; 6]; grid.len()];
    let mut exact_g = vec![[0.0; 6]; grid.len()];
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let c = grid.idx(i, j);
            let [x1, x2] = grid.x(i, j);
            exact[c] = f(x1, x2, ell);
            exact_g[c] = g(x1, x2, ell);
            vals[c] = exact[c][0];
            other[c] = exact_g[c][0];
        }
    }
    let grad = grid.hat_gradient(&vals)?;
    let lap = grid.hat_laplacian(&vals)?;
    let div = grid.hat_divergence(&[vals.clone(), other])?;
    let mut e = [0.0f64; 3];
    for c in 0..grid.len() {
        e[0] = e[0].max((grad[0][c] - exact[c][1]).abs()).max((grad[1][c] - exact[c][2]).abs());
        e[1] = e[1].max((lap[c] - exact[c][3] - exact[c][5]).abs());
        e[2] = e[2].max((div[c] - exact[c][1] - exact_g[c][2]).abs());
    }
    Ok(e)
}

/// Refinement study of gradient, Laplacian and divergence (paired with the
/// next manufactured field) on `n1 x n2` and `(2 n1 - 1) x 2 n2`.
pub fn transform_order(shape: &BoundaryShape, n1: usize, n2: usize, length: f64) -> Result<Vec<OrderRow>> {
    let coarse = FlattenedGrid::new(shape.clone(), n1, n2, length)?;
    let fine = FlattenedGrid::new(shape.clone(), 2 * n1 - 1, 2 * n2, length)?;
    let mut rows = Vec::new();
    for (k, (name, f)) in MANUFACTURED.iter().enumerate() {
        let g = MANUFACTURED[(k + 1) % MANUFACTURED.len()].1;
        let ec = operator_errors(&coarse, *f, g)?;
        let ef = operator_errors(&fine, *f, g)?;
        for (op, idx) in [("gradient", 0), ("laplacian", 1), ("divergence", 2)] {
            rows.push(OrderRow {
                field: name.to_string(),
                operator: op,
                error_h: ec[idx],
                error_h2: ef[idx],
                ratio: ec[idx] / ef[idx],
            });
        }
    }
    Ok(rows)
}

/// Maximum energy-identity residual at two resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityRefinement {
    pub residual_h: f64,
    pub residual_h2: f64,
    pub ratio: f64,
    /// Largest `|d/dt int rho E|` seen, for scale.
    pub rate_scale: f64,
}

/// 1-D flat fixture: background of `bd` plus a `u1` bump, evolved to
/// `t_end` on `n1` and `2 n1 - 1` nodes with snapshot cadence `every` and
/// `every / 2`.
pub fn energy_identity_refinement(
    gas: &GasParams,
    ff: &FarFieldState,
    bd: PlanarBoundaryData,
    n1: usize,
    length: f64,
    t_end: f64,
    every: f64,
    amplitude: f64,
) -> Result<IdentityRefinement> {
    let mut out = [0.0; 2];
    let mut rate_scale = 0.0f64;
    for (k, (n, cadence)) in [(n1, every), (2 * n1 - 1, 0.5 * every)].into_iter().enumerate() {
        let grid = FlattenedGrid::one_d(n, length)?;
        let data = BoundaryData::reference(bd, grid.dim);
        let bg = BackgroundState::build(gas, ff, &data, &grid, &ProfileOptions::default(), OutflowThresholds::default())?;
        let p = Problem::new(bg.clone(), Convection::SecondOrderUpwind);
        let mut s0 = p.initial_state();
        for i in 1..n - 1 {
            let z = (grid.y1(i) - 4.0) / 3.0;
            if z.abs() < 1.0 {
                s0.u[0][i] += amplitude * (1.0 - z * z).powi(4);
            }
        }
        let cfg = SolverConfig {
            t_end,
            snapshot_every: Some(cadence),
            convection: Convection::SecondOrderUpwind,
            ..Default::default()
        };
        let traj = p.evolve(s0, &cfg).map_err(Error::from)?;
        let budget = energy_identity_residual(&traj.snapshots, &bg, gas)?;
        out[k] = budget.iter().fold(0.0, |m: f64, b| m.max(b.residual.abs()));
        rate_scale = rate_scale.max(budget.iter().fold(0.0, |m: f64, b| m.max(b.rate.abs())));
    }
    Ok(IdentityRefinement {
        residual_h: out[0],
        residual_h2: out[1],
        ratio: out[0] / out[1],
        rate_scale,
    })
}

/// Hardy check over a family of nodal fields on `grid`.
pub fn hardy_family(alpha: f64, grid: &FlattenedGrid) -> Result<Vec<(String, HardyReport)>> {
    let ell = grid.shape.period;
    let l = grid.length;
    let mut fields: Vec<(String, Vec<f64>)> = vec![("constant".into(), vec![1.0; grid.len()])];
    for &(c, w) in &[(2.0, 1.0), (5.0, 3.0), (10.0, 4.0)] {
        fields.push((
            format!("bump_c{c}_w{w}"),
            grid.sample(|y1, _| {
                let z = (y1 - c) / w;
                if z.abs() < 1.0 {
                    (1.0 - z * z).powi(4)
                } else {
                    0.0
                }
            }),
        ));
    }
    for m in 1..=3 {
        fields.push((
            format!("sine_{m}"),
            grid.sample(|y1, y2| (m as f64 * std::f64::consts::PI * y1 / l).sin() * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * y2 / ell).cos())),
        ));
    }
    fields.push(("decay".into(), grid.sample(|y1, _| (-0.5 * y1).exp())));
    fields
        .into_iter()
        .map(|(name, f)| Ok((name, hardy_check(&f, alpha, grid)?)))
        .collect()
}

/// Extremes of `int rho E / ||Phi||^2` over random states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceAudit {
    pub samples: usize,
    pub amplitude: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// `samples` random perturbations of the background with nodal values
/// uniform in `[-amplitude, amplitude]`.
pub fn equivalence_sampling(bg: &BackgroundState, samples: usize, amplitude: f64, seed: u64) -> Result<EquivalenceAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refr = EnergyReference::background(bg);
    let base = bg.as_state(0.0);
    let grid = &bg.grid;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut s: FieldState = base.clone();
    for _ in 0..samples {
        let scale = amplitude * rng.gen_range(0.01..1.0);
        for (f, b) in s.fields_mut().into_iter().zip(base.fields()) {
            for (x, y) in f.iter_mut().zip(b) {
                *x = y + scale * rng.gen_range(-1.0..1.0);
            }
        }
        let e = energy_integral(&s, &refr, &bg.gas, grid)?;
        let diff = crate::diagnostics::difference(&s, &base);
        let sl: Vec<&[f64]> = diff.iter().map(|d| d.as_slice()).collect();
        let sq = weighted_norm_sq(&sl, 0.0, grid)?;
        if sq > 0.0 {
            lo = lo.min(e / sq);
            hi = hi.max(e / sq);
        }
    }
    Ok(EquivalenceAudit {
        samples,
        amplitude,
        min_ratio: lo,
        max_ratio: hi,
    })
}

/// Forcing audit at boundary strength `delta` and `delta / 10`, scaling the
/// planar deviation and the tangential series together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcingScaling {
    pub strong: ForcingAudit,
    pub weak: ForcingAudit,
    /// `strong.ratio / weak.ratio`.
    pub ratio_of_ratios: f64,
}

pub fn forcing_scaling(gas: &GasParams, ff: &FarFieldState, data: &BoundaryData, grid: &FlattenedGrid, opts: &ProfileOptions) -> Result<ForcingScaling> {
    let weak_data = BoundaryData {
        reference: PlanarBoundaryData {
            u_b: ff.u_plus + 0.1 * (data.reference.u_b - ff.u_plus),
            theta_b: ff.theta_plus + 0.1 * (data.reference.theta_b - ff.theta_plus),
        },
        ..data.with_scaled_series(0.1)
    };
    let mut audits = Vec::new();
    for d in [data, &weak_data] {
        let bg = BackgroundState::build(gas, ff, d, grid, opts, OutflowThresholds::default())?;
        let alpha = bg.alpha().ok_or_else(|| Error::FitFailed("background has no decay rate".into()))?;
        audits.push(forcing_audit(&forcing_terms(&bg), &bg, alpha)?);
    }
    Ok(ForcingScaling {
        strong: audits[0],
        weak: audits[1],
        ratio_of_ratios: audits[0].ratio / audits[1].ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_signs() {
        let g = GasParams::canonical();
        let rows = supersonic_scan(&g, 1.0, 1.0, &[0.5, 0.99, 1.01, 2.0]).unwrap();
        assert!(rows.iter().all(|r| r.sign_matches));
        for r in &rows {
            assert!((r.determinant - r.determinant_closed_form).abs() < 1e-12);
        }
    }

    #[test]
    fn manufactured_derivatives_consistent() {
        for (_, f) in MANUFACTURED {
            let h = 1e-5;
            let (x1, x2, ell) = (0.7, 0.3, 1.0);
            let v = f(x1, x2, ell);
            let d1 = (f(x1 + h, x2, ell)[0] - f(x1 - h, x2, ell)[0]) / (2.0 * h);
            let d22 = (f(x1, x2 + h, ell)[2] - f(x1, x2 - h, ell)[2]) / (2.0 * h);
            let d12 = (f(x1, x2 + h, ell)[1] - f(x1, x2 - h, ell)[1]) / (2.0 * h);
            assert!((d1 - v[1]).abs() < 1e-8);
            assert!((d22 - v[5]).abs() < 1e-6);
            assert!((d12 - v[4]).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_transform_errors_are_small() {
        let rows = transform_order(&BoundaryShape::flat_2d(1.0), 41, 32, 4.0).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.error_h2 < r.error_h));
    }

    #[test]
    fn equivalence_ratio_positive() {
        let g = GasParams::canonical();
        let ff = FarFieldState::canonical();
        let grid = FlattenedGrid::one_d(21, 34.0).unwrap();
        let data = BoundaryData::reference(PlanarBoundaryData { u_b: -1.99, theta_b: 1.0 }, grid.dim);
        let bg = BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), OutflowThresholds::default()).unwrap();
        let a = equivalence_sampling(&bg, 200, 0.1, 1).unwrap();
        assert!(a.min_ratio > 0.0 && a.max_ratio < 10.0);
    }
}
