//! Lifts of the boundary data into a unit collar next to the boundary.
//!
//! `U(y) = (u_b(y2) - (u_b_ref, 0)) chi(y1)` and `Theta(y) = (theta_b(y2) - theta_b_ref) chi(y1)`
//! where `chi` is a smooth cutoff equal to 1 at `y1 = 0` and vanishing for
//! `y1 >= 1` (i.e. `x1 >= M(x2) + 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normal_vector, series_eval, BoundaryShape, Dim, FlattenedGrid, FourierMode, XJet, MAX_MODES};
use crate::profile::PlanarBoundaryData;

/// `1 - S(t)` with `S` the septic smoothstep `35t^4 - 84t^5 + 70t^6 - 20t^7`,
/// `t = clamp(s, 0, 1)`. The cutoff is C^3, so second differences stay
/// second-order accurate across the collar edge.
pub fn cutoff(s: f64) -> f64 {
    cutoff_jet(s)[0]
}

/// Cutoff value and its first two derivatives.
pub fn cutoff_jet(s: f64) -> [f64; 3] {
    if s <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    if s >= 1.0 {
        return [0.0, 0.0, 0.0];
    }
    let t = s;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t2 * t2;
    let om = 1.0 - t;
    let step = t4 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t3);
    let d1 = 140.0 * t3 * om * om * om;
    let d2 = 420.0 * t2 * om * om * (1.0 - 2.0 * t);
    [1.0 - step, -d1, -d2]
}

/// Trigonometric series `mean + sum a cos + b sin` in the tangential variable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrigSeries {
    pub mean: f64,
    pub modes: Vec<FourierMode>,
}

impl TrigSeries {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            modes: Vec::new(),
        }
    }

    pub fn eval(&self, period: f64, s: f64) -> [f64; 3] {
        let e = series_eval(&self.modes, period, s);
        [self.mean + e[0], e[1], e[2]]
    }

    pub fn is_zero(&self) -> bool {
        self.mean == 0.0 && self.modes.iter().all(|m| m.a == 0.0 && m.b == 0.0)
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            mean: s * self.mean,
            modes: self
                .modes
                .iter()
                .map(|m| FourierMode {
                    k: m.k,
                    a: s * m.a,
                    b: s * m.b,
                })
                .collect(),
        }
    }
}

/// Base boundary velocity before the additive series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFlow {
    /// `u_b = (u_b_ref, 0)`.
    #[default]
    Reference,
    /// `u_b = |u_b_ref| n(x2)`: outflow along the normal only.
    NormalOutflow,
}

/// Boundary velocity and temperature on `x1 = M(x2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub reference: PlanarBoundaryData,
    pub base: BaseFlow,
    /// Additive velocity series, one per component.
    pub u_series: Vec<TrigSeries>,
    pub theta_series: TrigSeries,
}

/// Values and tangential derivatives `[f, f', f'']` of the boundary deviation
/// `(u_b - (u_b_ref, 0), theta_b - theta_b_ref)` at one tangential point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationJet {
    pub u: [[f64; 3]; 2],
    pub theta: [f64; 3],
}

/// Outflow thresholds `u_b . n >= c1`, `theta_b >= c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutflowThresholds {
    pub c1: f64,
    pub c2: f64,
}

impl Default for OutflowThresholds {
    fn default() -> Self {
        Self { c1: 1e-6, c2: 1e-6 }
    }
}

impl BoundaryData {
    /// Boundary data equal to the planar reference: `U = Theta = 0`.
    pub fn reference(reference: PlanarBoundaryData, dim: Dim) -> Self {
        Self {
            reference,
            base: BaseFlow::Reference,
            u_series: vec![TrigSeries::default(); dim.count()],
            theta_series: TrigSeries::default(),
        }
    }

    pub fn normal_outflow(reference: PlanarBoundaryData, dim: Dim) -> Self {
        Self {
            base: BaseFlow::NormalOutflow,
            ..Self::reference(reference, dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.u_series.len()
    }

    pub fn validate_series(&self) -> Result<()> {
        let all = self.u_series.iter().chain(std::iter::once(&self.theta_series));
        for s in all {
            if s.modes.len() > MAX_MODES {
                return Err(Error::InvalidParameter {
                    name: "boundary series",
                    reason: format!("at most {MAX_MODES} modes"),
                });
            }
        }
        Ok(())
    }

    /// Deviation jet at tangential coordinate `y2`.
    pub fn deviation(&self, shape: &BoundaryShape, y2: f64) -> DeviationJet {
        let period = shape.period;
        let mut u = [[0.0; 3]; 2];
        for (c, s) in self.u_series.iter().enumerate() {
            u[c] = s.eval(period, y2);
        }
        if self.base == BaseFlow::NormalOutflow {
            let ub = self.reference.u_b;
            let speed = ub.abs();
            match shape.dim {
                Dim::One => {
                    // n = -1: |u_b| n = u_b
                    u[0][0] += -speed - ub;
                }
                Dim::Two => {
                    let [_, mp, mpp, mppp] = shape.eval(y2);
                    let s2 = 1.0 + mp * mp;
                    let s = s2.sqrt();
                    let s3 = s2 * s;
                    let s5 = s3 * s2;
                    let n1 = [
                        -1.0 / s,
                        mp * mpp / s3,
                        (mpp * mpp + mp * mppp) / s3 - 3.0 * mp * mp * mpp * mpp / s5,
                    ];
                    let n2 = [mp / s, mpp / s3, mppp / s3 - 3.0 * mp * mpp * mpp / s5];
                    for k in 0..3 {
                        u[0][k] += speed * n1[k];
                        u[1][k] += speed * n2[k];
                    }
                    u[0][0] -= ub;
                }
            }
        }
        DeviationJet {
            u,
            theta: self.theta_series.eval(period, y2),
        }
    }

    /// Boundary velocity at `y2`.
    pub fn u_b(&self, shape: &BoundaryShape, y2: f64) -> [f64; 2] {
        let dev = self.deviation(shape, y2);
        [self.reference.u_b + dev.u[0][0], dev.u[1][0]]
    }

    pub fn theta_b(&self, shape: &BoundaryShape, y2: f64) -> f64 {
        self.reference.theta_b + self.theta_series.eval(shape.period, y2)[0]
    }

    /// Nodal boundary values `(u_b per component, theta_b)` on the grid.
    pub fn nodal(&self, grid: &FlattenedGrid) -> (Vec<Vec<f64>>, Vec<f64>) {
        let d = grid.d();
        let mut u = vec![vec![0.0; grid.n2]; d];
        let mut th = vec![0.0; grid.n2];
        for j in 0..grid.n2 {
            let y2 = grid.y2(j);
            let ub = self.u_b(&grid.shape, y2);
            for c in 0..d {
                u[c][j] = ub[c];
            }
            th[j] = self.theta_b(&grid.shape, y2);
        }
        (u, th)
    }

    /// Check `u_b . n >= c1` and `theta_b >= c2` at every tangential node.
    pub fn check_outflow(&self, grid: &FlattenedGrid, thr: OutflowThresholds) -> Result<()> {
        for j in 0..grid.n2 {
            let y2 = grid.y2(j);
            let n = normal_vector(&grid.shape, y2);
            let ub = self.u_b(&grid.shape, y2);
            let flux: f64 = n.iter().zip(ub.iter()).map(|(a, b)| a * b).sum();
            if !(flux >= thr.c1) {
                return Err(Error::OutflowViolated { node: j, y2, flux });
            }
            let th = self.theta_b(&grid.shape, y2);
            if !(th >= thr.c2) {
                return Err(Error::Domain {
                    quantity: "theta_b",
                    value: th,
                });
            }
        }
        Ok(())
    }

    /// Discrete tangential `H^1` norm of the boundary deviation.
    pub fn tangential_norm(&self, grid: &FlattenedGrid) -> f64 {
        let d = grid.d();
        let mut parts = vec![0.0; d + 1];
        for j in 0..grid.n2 {
            let dev = self.deviation(&grid.shape, grid.y2(j));
            let deriv_weight = if grid.dim == Dim::Two { 1.0 } else { 0.0 };
            for c in 0..d {
                parts[c] += grid.h2 * (dev.u[c][0].powi(2) + deriv_weight * dev.u[c][1].powi(2));
            }
            parts[d] += grid.h2 * (dev.theta[0].powi(2) + deriv_weight * dev.theta[1].powi(2));
        }
        parts.iter().map(|p| p.sqrt()).sum()
    }

    /// `delta = tangential norm of the deviation + planar boundary strength`.
    pub fn delta(&self, grid: &FlattenedGrid, far_u: f64, far_theta: f64) -> f64 {
        let dt = (self.reference.u_b - far_u).abs() + (self.reference.theta_b - far_theta).abs();
        self.tangential_norm(grid) + dt
    }

    /// Scale the additive series by `s` (the base flow is unchanged).
    pub fn with_scaled_series(&self, s: f64) -> Self {
        Self {
            u_series: self.u_series.iter().map(|t| t.scaled(s)).collect(),
            theta_series: self.theta_series.scaled(s),
            ..self.clone()
        }
    }
}

/// Nodal values of one extension component.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionField {
    pub values: Vec<f64>,
}

/// Velocity and temperature extensions on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Extensions {
    pub u: Vec<ExtensionField>,
    pub theta: ExtensionField,
    pub data: BoundaryData,
    /// Collar width in `y1`.
    pub collar: f64,
}

/// Build `U` and `Theta` on the grid after checking the outflow condition.
pub fn build_extension(bd: &BoundaryData, grid: &FlattenedGrid, thr: OutflowThresholds) -> Result<Extensions> {
    if bd.dim() != grid.d() {
        return Err(Error::GridMismatch(format!(
            "boundary data has {} velocity components, grid dimension is {}",
            bd.dim(),
            grid.d()
        )));
    }
    bd.validate_series()?;
    bd.check_outflow(grid, thr)?;
    let d = grid.d();
    let mut u = vec![vec![0.0; grid.len()]; d];
    let mut th = vec![0.0; grid.len()];
    for j in 0..grid.n2 {
        let dev = bd.deviation(&grid.shape, grid.y2(j));
        for i in 0..grid.n1 {
            let chi = cutoff(grid.y1(i));
            let c = grid.idx(i, j);
            for k in 0..d {
                u[k][c] = dev.u[k][0] * chi;
            }
            th[c] = dev.theta[0] * chi;
        }
    }
    Ok(Extensions {
        u: u.into_iter().map(|values| ExtensionField { values }).collect(),
        theta: ExtensionField { values: th },
        data: bd.clone(),
        collar: 1.0,
    })
}

impl Extensions {
    pub fn is_zero(&self) -> bool {
        self.u.iter().all(|f| f.values.iter().all(|&v| v == 0.0)) && self.theta.values.iter().all(|&v| v == 0.0)
    }

    /// Exact `x`-jets of `(U_1, U_2, Theta)` at node `(i1, i2)`.
    pub fn jets(&self, grid: &FlattenedGrid, i1: usize, i2: usize) -> ([XJet; 2], XJet) {
        let dev = self.data.deviation(&grid.shape, grid.y2(i2));
        let chi = cutoff_jet(grid.y1(i1));
        let (mp, mpp) = (grid.dm[i2], grid.ddm[i2]);
        let mut u = [XJet::default(); 2];
        for (k, jet) in u.iter_mut().enumerate().take(grid.d()) {
            *jet = XJet::separable(dev.u[k], chi, mp, mpp);
        }
        (u, XJet::separable(dev.theta, chi, mp, mpp))
    }

    /// Discrete `H^2` norm of `(U, Theta)` from the exact nodal jets.
    pub fn h2_norm(&self, grid: &FlattenedGrid) -> f64 {
        let mut acc = 0.0;
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                let (u, th) = self.jets(grid, i, j);
                let w = grid.quad_weight(i);
                for jet in u.iter().take(grid.d()).chain(std::iter::once(&th)) {
                    acc += w
                        * (jet.v * jet.v
                            + jet.d1 * jet.d1
                            + jet.d2 * jet.d2
                            + jet.d11 * jet.d11
                            + 2.0 * jet.d12 * jet.d12
                            + jet.d22 * jet.d22);
                }
            }
        }
        acc.sqrt()
    }

    /// Discrete `L^2` and `H^1` norms from nodal values and hat gradients.
    pub fn l2_h1_norms(&self, grid: &FlattenedGrid) -> Result<(f64, f64)> {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for f in self.u.iter().chain(std::iter::once(&self.theta)) {
            let sq: Vec<f64> = f.values.iter().map(|v| v * v).collect();
            let part = grid.integrate(&sq);
            l2 += part;
            h1 += part;
            for g in grid.hat_gradient(&f.values)? {
                let gs: Vec<f64> = g.iter().map(|v| v * v).collect();
                h1 += grid.integrate(&gs);
            }
        }
        Ok((l2.sqrt(), h1.sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gamma_map, normal_vector};

    fn reference() -> PlanarBoundaryData {
        PlanarBoundaryData {
            u_b: -1.99,
            theta_b: 1.0,
        }
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff(-1.0), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert!((cutoff(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
    }

    #[test]
    fn cutoff_derivatives_match_finite_differences() {
        for &s in &[0.1, 0.3, 0.5, 0.77, 0.95] {
            let e = 1e-5;
            let j = cutoff_jet(s);
            let d1 = (cutoff(s + e) - cutoff(s - e)) / (2.0 * e);
            let d2 = (cutoff(s + e) - 2.0 * cutoff(s) + cutoff(s - e)) / (e * e);
            assert!((j[1] - d1).abs() < 1e-8);
            assert!((j[2] - d2).abs() < 1e-4);
        }
        // C^2 at both ends
        for s in [0.0, 1.0] {
            let j = cutoff_jet(s);
            assert_eq!(j[1], 0.0);
            assert_eq!(j[2], 0.0);
        }
    }

    #[test]
    fn zero_deviation_gives_zero_extension() {
        let grid = FlattenedGrid::new(BoundaryShape::sine(1.0, 0.1), 21, 8, 4.0).unwrap();
        let bd = BoundaryData::reference(reference(), Dim::Two);
        let ext = build_extension(&bd, &grid, OutflowThresholds::default()).unwrap();
        assert!(ext.is_zero());
    }

    fn wavy(grid_dim: Dim) -> BoundaryData {
        let mut bd = BoundaryData::reference(reference(), grid_dim);
        bd.u_series[0] = TrigSeries {
            mean: 0.002,
            modes: vec![FourierMode { k: 1, a: 0.003, b: -0.001 }],
        };
        if grid_dim == Dim::Two {
            bd.u_series[1] = TrigSeries {
                mean: 0.0,
                modes: vec![FourierMode { k: 2, a: 0.0, b: 0.004 }],
            };
        }
        bd.theta_series = TrigSeries {
            mean: -0.001,
            modes: vec![FourierMode { k: 3, a: 0.002, b: 0.0 }],
        };
        bd
    }

    #[test]
    fn trace_and_support_are_exact() {
        let grid = FlattenedGrid::new(BoundaryShape::sine(1.0, 0.1), 41, 16, 4.0).unwrap();
        let bd = wavy(Dim::Two);
        let ext = build_extension(&bd, &grid, OutflowThresholds::default()).unwrap();
        let (ub, tb) = bd.nodal(&grid);
        for j in 0..grid.n2 {
            let c = grid.idx(0, j);
            assert!((ext.u[0].values[c] - (ub[0][j] - bd.reference.u_b)).abs() < 1e-15);
            assert!((ext.u[1].values[c] - ub[1][j]).abs() < 1e-15);
            assert!((ext.theta.values[c] - (tb[j] - bd.reference.theta_b)).abs() < 1e-15);
            for i in 0..grid.n1 {
                if grid.y1(i) >= 1.0 {
                    let c = grid.idx(i, j);
                    assert_eq!(ext.u[0].values[c], 0.0);
                    assert_eq!(ext.u[1].values[c], 0.0);
                    assert_eq!(ext.theta.values[c], 0.0);
                }
            }
        }
    }

    #[test]
    fn normal_outflow_trace() {
        let shape = BoundaryShape::sine(1.0, 0.1);
        let grid = FlattenedGrid::new(shape.clone(), 21, 32, 3.0).unwrap();
        let bd = BoundaryData::normal_outflow(reference(), Dim::Two);
        let ext = build_extension(&bd, &grid, OutflowThresholds::default()).unwrap();
        for j in 0..grid.n2 {
            let n = normal_vector(&shape, grid.y2(j));
            let c = grid.idx(0, j);
            let speed = bd.reference.u_b.abs();
            assert!((ext.u[0].values[c] - (speed * n[0] - bd.reference.u_b)).abs() <= 1e-14);
            assert!((ext.u[1].values[c] - speed * n[1]).abs() <= 1e-14);
            // boundary point lies on the graph
            let x = gamma_map(&shape, [0.0, grid.y2(j)]);
            assert_eq!(x[0], shape.m(x[1]));
        }
    }

    #[test]
    fn normal_outflow_derivatives_match_differences() {
        let shape = BoundaryShape::sine(1.0, 0.1);
        let bd = BoundaryData::normal_outflow(reference(), Dim::Two);
        for &y in &[0.05, 0.3, 0.71] {
            let e = 1e-5;
            let j = bd.deviation(&shape, y);
            let p = bd.deviation(&shape, y + e);
            let m = bd.deviation(&shape, y - e);
            for c in 0..2 {
                let d1 = (p.u[c][0] - m.u[c][0]) / (2.0 * e);
                let d2 = (p.u[c][0] - 2.0 * j.u[c][0] + m.u[c][0]) / (e * e);
                assert!((j.u[c][1] - d1).abs() < 1e-8, "{c} {} {}", j.u[c][1], d1);
                assert!((j.u[c][2] - d2).abs() < 1e-4, "{c} {} {}", j.u[c][2], d2);
            }
        }
    }

    #[test]
    fn inflow_rejected_with_location() {
        let grid = FlattenedGrid::new(BoundaryShape::flat_2d(1.0), 11, 8, 2.0).unwrap();
        let mut bd = BoundaryData::reference(reference(), Dim::Two);
        bd.u_series[0] = TrigSeries {
            mean: 0.0,
            modes: vec![FourierMode { k: 1, a: 3.0, b: 0.0 }],
        };
        match build_extension(&bd, &grid, OutflowThresholds::default()) {
            Err(Error::OutflowViolated { node, .. }) => assert_eq!(node, 0),
            other => panic!("expected outflow violation, got {other:?}"),
        }
    }

    #[test]
    fn extension_is_linear_in_the_deviation() {
        let grid = FlattenedGrid::new(BoundaryShape::sine(1.0, 0.1), 31, 16, 3.0).unwrap();
        let a = wavy(Dim::Two);
        let b = a.with_scaled_series(2.5);
        let ea = build_extension(&a, &grid, OutflowThresholds::default()).unwrap();
        let eb = build_extension(&b, &grid, OutflowThresholds::default()).unwrap();
        for (fa, fb) in ea.u.iter().chain([&ea.theta]).zip(eb.u.iter().chain([&eb.theta])) {
            for (x, y) in fa.values.iter().zip(&fb.values) {
                assert!((2.5 * x - y).abs() <= 1e-15);
            }
        }
        let (l2a, h1a) = ea.l2_h1_norms(&grid).unwrap();
        let (l2b, h1b) = eb.l2_h1_norms(&grid).unwrap();
        assert!((l2b / l2a - 2.5).abs() < 1e-12);
        assert!((h1b / h1a - 2.5).abs() < 1e-12);
        let ratio_a = ea.h2_norm(&grid) / a.tangential_norm(&grid);
        let ratio_b = eb.h2_norm(&grid) / b.tangential_norm(&grid);
        assert!((ratio_a - ratio_b).abs() < 1e-12 * ratio_a);
    }
}
