//! Boundary shape, flattening map and hat operators on a uniform grid in
//! flattened coordinates `y`.
//!
//! The domain `{x1 > M(x2)}` is mapped to `{y1 > 0}` by `x1 = y1 + M(y2)`,
//! `x2 = y2`. Derivatives in `x` become `A(y2) grad_y` with
//! `A = [[1, 0], [-M'(y2), 1]]`, which is lower triangular with unit diagonal.
//!
//! Fields are stored row-major with shape `(n2, n1)`: node `(i1, i2)` lives at
//! `i2 * n1 + i1`, so `y1` runs fastest. The tangential direction is periodic
//! with period `ell`; in 1-D there is a single row and `n2 = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of Fourier modes accepted in a shape or boundary series.
pub const MAX_MODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Dim {
    pub fn count(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

/// One term `a cos(2 pi k s / ell) + b sin(2 pi k s / ell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: u32,
    pub a: f64,
    pub b: f64,
}

/// Finite trigonometric series and its first three exact derivatives.
pub(crate) fn series_eval(modes: &[FourierMode], period: f64, s: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for md in modes {
        let w = 2.0 * PI * md.k as f64 / period;
        let (sn, cs) = (w * s).sin_cos();
        let even = md.a * cs + md.b * sn;
        let odd = -md.a * sn + md.b * cs;
        out[0] += even;
        out[1] += w * odd;
        out[2] -= w * w * even;
        out[3] -= w * w * w * odd;
    }
    out
}

/// Value and `x` derivatives up to second order of a scalar field at a node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct XJet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl XJet {
    /// Jet of `q(y) = t(y2) c(y1)` in physical coordinates, given
    /// `t = [T, T', T'']`, `c = [c, c', c'']` and `M'`, `M''` at the node.
    /// Uses `d/dx1 = d/dy1` and `d/dx2 = d/dy2 - M' d/dy1`.
    pub fn separable(t: [f64; 3], c: [f64; 3], mp: f64, mpp: f64) -> Self {
        Self {
            v: t[0] * c[0],
            d1: t[0] * c[1],
            d2: t[1] * c[0] - mp * t[0] * c[1],
            d11: t[0] * c[2],
            d12: t[1] * c[1] - mp * t[0] * c[2],
            d22: t[2] * c[0] - 2.0 * mp * t[1] * c[1] - mpp * t[0] * c[1] + mp * mp * t[0] * c[2],
        }
    }

    pub fn lap(&self) -> f64 {
        self.d11 + self.d22
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.d1, self.d2]
    }
}

/// Boundary graph `x1 = M(x2)`; `M = 0` in 1-D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryShape {
    pub dim: Dim,
    /// Tangential period `ell`.
    pub period: f64,
    pub modes: Vec<FourierMode>,
}

impl BoundaryShape {
    pub fn flat_1d() -> Self {
        Self {
            dim: Dim::One,
            period: 1.0,
            modes: Vec::new(),
        }
    }

    pub fn flat_2d(period: f64) -> Self {
        Self {
            dim: Dim::Two,
            period,
            modes: Vec::new(),
        }
    }

    /// `M(x2) = amplitude * sin(2 pi x2 / period)`.
    pub fn sine(period: f64, amplitude: f64) -> Self {
        Self {
            dim: Dim::Two,
            period,
            modes: vec![FourierMode { k: 1, a: 0.0, b: amplitude }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::InvalidParameter {
                name: "period",
                reason: format!("tangential period must be positive, got {}", self.period),
            });
        }
        if self.modes.len() > MAX_MODES {
            return Err(Error::InvalidParameter {
                name: "modes",
                reason: format!("at most {MAX_MODES} modes, got {}", self.modes.len()),
            });
        }
        if self.dim == Dim::One && self.modes.iter().any(|m| m.a != 0.0 || m.b != 0.0) {
            return Err(Error::InvalidParameter {
                name: "modes",
                reason: "a 1-D boundary is flat".into(),
            });
        }
        if self.modes.iter().any(|m| !m.a.is_finite() || !m.b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "modes",
                reason: "non-finite amplitude".into(),
            });
        }
        Ok(())
    }

    pub fn is_flat(&self) -> bool {
        self.modes.iter().all(|m| m.a == 0.0 && m.b == 0.0)
    }

    /// `(M, M', M'', M''')` at `x2`.
    pub fn eval(&self, x2: f64) -> [f64; 4] {
        if self.dim == Dim::One {
            return [0.0; 4];
        }
        series_eval(&self.modes, self.period, x2)
    }

    pub fn m(&self, x2: f64) -> f64 {
        self.eval(x2)[0]
    }

    pub fn dm(&self, x2: f64) -> f64 {
        self.eval(x2)[1]
    }

    /// Bound on `|M|` from the coefficients.
    pub fn sup_norm_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.a.hypot(m.b)).sum()
    }
}

/// Unit outer normal `(-1, M')/sqrt(1 + M'^2)`; `(-1)` in 1-D.
pub fn normal_vector(shape: &BoundaryShape, x2: f64) -> Vec<f64> {
    match shape.dim {
        Dim::One => vec![-1.0],
        Dim::Two => {
            let dm = shape.dm(x2);
            let s = (1.0 + dm * dm).sqrt();
            vec![-1.0 / s, dm / s]
        }
    }
}

/// `x = Gamma(y)`.
pub fn gamma_map(shape: &BoundaryShape, y: [f64; 2]) -> [f64; 2] {
    [y[0] + shape.m(y[1]), y[1]]
}

/// `y = Gamma^{-1}(x)`.
pub fn gamma_inverse(shape: &BoundaryShape, x: [f64; 2]) -> [f64; 2] {
    [x[0] - shape.m(x[1]), x[1]]
}

/// First and second derivatives of a field with respect to `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct YDerivatives {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d11: Vec<f64>,
    pub d12: Vec<f64>,
    pub d22: Vec<f64>,
}

impl YDerivatives {
    pub fn zeros(n: usize) -> Self {
        Self {
            d1: vec![0.0; n],
            d2: vec![0.0; n],
            d11: vec![0.0; n],
            d12: vec![0.0; n],
            d22: vec![0.0; n],
        }
    }
}

/// Uniform grid on `[0, L] x [0, ell)` in flattened coordinates with the
/// geometry sampled at the tangential nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlattenedGrid {
    pub dim: Dim,
    pub n1: usize,
    pub n2: usize,
    pub length: f64,
    pub h1: f64,
    /// Tangential spacing; `1` in 1-D so quadrature weights stay per unit width.
    pub h2: f64,
    pub shape: BoundaryShape,
    /// `M`, `M'`, `M''` at the tangential nodes.
    pub m: Vec<f64>,
    pub dm: Vec<f64>,
    pub ddm: Vec<f64>,
}

impl FlattenedGrid {
    pub fn new(shape: BoundaryShape, n1: usize, n2: usize, length: f64) -> Result<Self> {
        shape.validate()?;
        if n1 < 5 {
            return Err(Error::GridTooSmall(format!("n1 = {n1} < 5")));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "length",
                reason: format!("domain length must be positive, got {length}"),
            });
        }
        let n2 = match shape.dim {
            Dim::One => 1,
            Dim::Two => {
                if n2 < 4 {
                    return Err(Error::GridTooSmall(format!("n2 = {n2} < 4")));
                }
                n2
            }
        };
        let h1 = length / (n1 - 1) as f64;
        let h2 = match shape.dim {
            Dim::One => 1.0,
            Dim::Two => shape.period / n2 as f64,
        };
        let mut m = Vec::with_capacity(n2);
        let mut dm = Vec::with_capacity(n2);
        let mut ddm = Vec::with_capacity(n2);
        for j in 0..n2 {
            let e = shape.eval(j as f64 * h2);
            m.push(e[0]);
            dm.push(e[1]);
            ddm.push(e[2]);
        }
        Ok(Self {
            dim: shape.dim,
            n1,
            n2,
            length,
            h1,
            h2,
            shape,
            m,
            dm,
            ddm,
        })
    }

    pub fn one_d(n1: usize, length: f64) -> Result<Self> {
        Self::new(BoundaryShape::flat_1d(), n1, 1, length)
    }

    pub fn d(&self) -> usize {
        self.dim.count()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i1: usize, i2: usize) -> usize {
        i2 * self.n1 + i1
    }

    pub fn y1(&self, i1: usize) -> f64 {
        i1 as f64 * self.h1
    }

    pub fn y2(&self, i2: usize) -> f64 {
        match self.dim {
            Dim::One => 0.0,
            Dim::Two => i2 as f64 * self.h2,
        }
    }

    /// Physical position of node `(i1, i2)`.
    pub fn x(&self, i1: usize, i2: usize) -> [f64; 2] {
        [self.y1(i1) + self.m[i2], self.y2(i2)]
    }

    /// `A(y2)` at tangential node `i2`.
    pub fn a_matrix(&self, i2: usize) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [-self.dm[i2], 1.0]]
    }

    /// Sample `f(y1, y2)` at every node.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                out[self.idx(i, j)] = f(self.y1(i), self.y2(j));
            }
        }
        out
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn jp(&self, j: usize) -> usize {
        if j + 1 == self.n2 {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub(crate) fn jm(&self, j: usize) -> usize {
        if j == 0 {
            self.n2 - 1
        } else {
            j - 1
        }
    }

    /// Second-order `y` derivatives: centered in the interior, one-sided at
    /// `y1 = 0` and `y1 = L`, periodic in `y2`.
    pub fn y_derivatives(&self, f: &[f64]) -> Result<YDerivatives> {
        self.check_len(f)?;
        let mut d = YDerivatives::zeros(self.len());
        self.y_derivatives_into(f, &mut d);
        Ok(d)
    }

    /// In-place variant of [`FlattenedGrid::y_derivatives`]; `f` and `d` must
    /// match the grid.
    pub(crate) fn y_derivatives_into(&self, f: &[f64], d: &mut YDerivatives) {
        let (n1, h1, h2) = (self.n1, self.h1, self.h2);
        let row_d1 = |row: &[f64], out: &mut [f64]| {
            out[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * h1);
            for i in 1..n1 - 1 {
                out[i] = (row[i + 1] - row[i - 1]) / (2.0 * h1);
            }
            out[n1 - 1] = (3.0 * row[n1 - 1] - 4.0 * row[n1 - 2] + row[n1 - 3]) / (2.0 * h1);
        };
        let hh = h1 * h1;
        for j in 0..self.n2 {
            let row = &f[j * n1..(j + 1) * n1];
            row_d1(row, &mut d.d1[j * n1..(j + 1) * n1]);
            let out = &mut d.d11[j * n1..(j + 1) * n1];
            out[0] = (2.0 * row[0] - 5.0 * row[1] + 4.0 * row[2] - row[3]) / hh;
            for i in 1..n1 - 1 {
                out[i] = (row[i + 1] - 2.0 * row[i] + row[i - 1]) / hh;
            }
            out[n1 - 1] = (2.0 * row[n1 - 1] - 5.0 * row[n1 - 2] + 4.0 * row[n1 - 3] - row[n1 - 4]) / hh;
        }
        if self.dim == Dim::Two {
            for j in 0..self.n2 {
                let (jp, jm) = (self.jp(j), self.jm(j));
                for i in 0..n1 {
                    let (c, p, m) = (j * n1 + i, jp * n1 + i, jm * n1 + i);
                    d.d2[c] = (f[p] - f[m]) / (2.0 * h2);
                    d.d22[c] = (f[p] - 2.0 * f[c] + f[m]) / (h2 * h2);
                }
            }
            // mixed derivative: one-sided in y1 at the ends, consistent with d1
            for j in 0..self.n2 {
                let r = j * n1..(j + 1) * n1;
                row_d1(&d.d2[r.clone()], &mut d.d12[r]);
            }
        }
    }

    /// `grad_hat f = A grad_y f`, one vector per component.
    pub fn hat_gradient(&self, f: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.y_derivatives(f)?;
        Ok(match self.dim {
            Dim::One => vec![d.d1],
            Dim::Two => {
                let mut g2 = d.d2;
                for j in 0..self.n2 {
                    let a21 = -self.dm[j];
                    for i in 0..self.n1 {
                        let c = self.idx(i, j);
                        g2[c] += a21 * d.d1[c];
                    }
                }
                vec![d.d1, g2]
            }
        })
    }

    /// `div_hat v = (A grad_y) . v`.
    pub fn hat_divergence(&self, v: &[Vec<f64>]) -> Result<Vec<f64>> {
        if v.len() != self.d() {
            return Err(Error::GridMismatch(format!("vector field has {} components", v.len())));
        }
        let g1 = self.hat_gradient(&v[0])?;
        let mut out = g1[0].clone();
        if self.dim == Dim::Two {
            let g2 = self.hat_gradient(&v[1])?;
            for (o, x) in out.iter_mut().zip(&g2[1]) {
                *o += x;
            }
        }
        Ok(out)
    }

    /// `lap_hat f = (A grad_y) . (A grad_y f)` with compact second differences:
    /// `(1 + M'^2) f_11 - 2 M' f_12 - M'' f_1 + f_22`.
    pub fn hat_laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        let d = self.y_derivatives(f)?;
        Ok(self.laplacian_from(&d))
    }

    pub(crate) fn laplacian_from(&self, d: &YDerivatives) -> Vec<f64> {
        match self.dim {
            Dim::One => d.d11.clone(),
            Dim::Two => {
                let mut out = vec![0.0; self.len()];
                for j in 0..self.n2 {
                    let (mp, mpp) = (self.dm[j], self.ddm[j]);
                    for i in 0..self.n1 {
                        let c = self.idx(i, j);
                        out[c] = (1.0 + mp * mp) * d.d11[c] - 2.0 * mp * d.d12[c] - mpp * d.d1[c] + d.d22[c];
                    }
                }
                out
            }
        }
    }

    /// Plain `grad_y` (no flattening factor).
    pub fn plain_gradient(&self, f: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.y_derivatives(f)?;
        Ok(match self.dim {
            Dim::One => vec![d.d1],
            Dim::Two => vec![d.d1, d.d2],
        })
    }

    pub fn plain_divergence(&self, v: &[Vec<f64>]) -> Result<Vec<f64>> {
        if v.len() != self.d() {
            return Err(Error::GridMismatch(format!("vector field has {} components", v.len())));
        }
        let mut out = self.y_derivatives(&v[0])?.d1;
        if self.dim == Dim::Two {
            for (o, x) in out.iter_mut().zip(self.y_derivatives(&v[1])?.d2) {
                *o += x;
            }
        }
        Ok(out)
    }

    pub fn plain_laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        let d = self.y_derivatives(f)?;
        Ok(match self.dim {
            Dim::One => d.d11,
            Dim::Two => d.d11.iter().zip(&d.d22).map(|(a, b)| a + b).collect(),
        })
    }

    /// Trapezoidal weight of node `i1` in `y1` (periodic rule in `y2`).
    #[inline]
    pub fn quad_weight(&self, i1: usize) -> f64 {
        let w1 = if i1 == 0 || i1 + 1 == self.n1 { 0.5 * self.h1 } else { self.h1 };
        w1 * self.h2
    }

    /// Trapezoidal integral of a nodal field over the flattened domain
    /// (the Jacobian of the flattening map is 1).
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                s += self.quad_weight(i) * f[self.idx(i, j)];
            }
        }
        s
    }

    /// Integral over the boundary `y1 = 0` per unit tangential width element.
    pub fn integrate_boundary(&self, f_boundary: &[f64]) -> f64 {
        f_boundary.iter().sum::<f64>() * self.h2
    }
}
