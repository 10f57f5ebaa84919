//! Adaptive Dormand-Prince 5(4) integrator for small autonomous systems.
//! Stage nodes are not needed since the right-hand sides are autonomous.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b_hat (the 4th-order weights include a 1/40 on the FSAL stage)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

type Vec2 = [f64; 2];

#[inline]
fn axpy(y: &Vec2, terms: &[(f64, &Vec2)], h: f64) -> Vec2 {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrate `y' = f(y)` from `x0` to `x1`, starting with step `h0`.
/// Returns the end value and the last accepted step size.
pub(crate) fn integrate<F>(f: &mut F, x0: f64, x1: f64, y0: Vec2, h0: f64, tol: Tolerance) -> Result<(Vec2, f64)>
where
    F: FnMut(&Vec2) -> Result<Vec2>,
{
    let span = x1 - x0;
    if span <= 0.0 {
        return Ok((y0, h0));
    }
    let mut x = x0;
    let mut y = y0;
    let mut h = h0.min(span).max(1e-12 * span);
    let mut k1 = f(&y)?;
    let mut last_ok = h;
    let mut rejects = 0usize;
    while x < x1 {
        let landing = x + h >= x1 - 1e-14 * span.max(1.0);
        let step = if landing { x1 - x } else { h };
        let k2 = f(&axpy(&y, &[(A21, &k1)], step))?;
        let k3 = f(&axpy(&y, &[(A31, &k1), (A32, &k2)], step))?;
        let k4 = f(&axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], step))?;
        let k5 = f(&axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], step))?;
        let k6 = f(&axpy(
            &y,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            step,
        ))?;
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], step);
        let k7 = f(&y_new)?;
        let mut err = 0.0f64;
        for c in 0..2 {
            let e = step * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c]);
            let scale = tol.atol + tol.rtol * y[c].abs().max(y_new[c].abs());
            err = err.max((e / scale).abs());
        }
        if err <= 1.0 {
            x = if landing { x1 } else { x + step };
            y = y_new;
            k1 = k7;
            last_ok = step;
            rejects = 0;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * fac;
        } else {
            rejects += 1;
            if rejects > 60 {
                return Err(Error::Singular(format!("step size underflow near x = {x}")));
            }
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h = step * fac;
        }
    }
    Ok((y, last_ok))
}
