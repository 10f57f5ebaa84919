//! Ideal-gas closure and far-field classification.
//!
//! All quantities are nondimensional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transport and thermodynamic constants of the gas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasParams {
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    #[serde(rename = "r")]
    pub r_gas: f64,
    pub gamma: f64,
}

impl GasParams {
    pub fn new(mu: f64, lambda: f64, kappa: f64, r_gas: f64, gamma: f64) -> Result<Self> {
        let g = Self {
            mu,
            lambda,
            kappa,
            r_gas,
            gamma,
        };
        g.validate()?;
        Ok(g)
    }

    /// Monatomic test gas: `R = 1`, `gamma = 5/3`, `mu = 1`, `lambda = 0`, `kappa = 1`.
    pub fn canonical() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.0,
            kappa: 1.0,
            r_gas: 1.0,
            gamma: 5.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.mu > 0.0) {
            return bad("mu", "viscosity must be positive");
        }
        if !(2.0 * self.mu + 3.0 * self.lambda >= 0.0) {
            return bad("lambda", "2 mu + 3 lambda must be nonnegative");
        }
        if !(self.kappa > 0.0) {
            return bad("kappa", "heat conductivity must be positive");
        }
        if !(self.r_gas > 0.0) {
            return bad("r", "gas constant must be positive");
        }
        if !(self.gamma > 1.0) {
            return bad("gamma", "adiabatic exponent must exceed 1");
        }
        Ok(())
    }

    /// Specific heat at constant volume, `R / (gamma - 1)`.
    pub fn cv(&self) -> f64 {
        self.r_gas / (self.gamma - 1.0)
    }

    /// Longitudinal viscosity `2 mu + lambda`.
    pub fn mu1(&self) -> f64 {
        2.0 * self.mu + self.lambda
    }

    pub fn sound_speed(&self, theta: f64) -> f64 {
        (self.gamma * self.r_gas * theta).sqrt()
    }
}

/// Far-field end state `(rho_+, u_+, theta_+)` with `u_+ < 0` (flow toward the boundary).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarFieldState {
    pub rho_plus: f64,
    pub u_plus: f64,
    pub theta_plus: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self::canonical()
    }
}

impl Default for FarFieldState {
    fn default() -> Self {
        Self::canonical()
    }
}

impl FarFieldState {
    pub fn new(rho_plus: f64, u_plus: f64, theta_plus: f64) -> Result<Self> {
        let ff = Self {
            rho_plus,
            u_plus,
            theta_plus,
        };
        ff.validate()?;
        Ok(ff)
    }

    /// `(1, -2, 1)`: Mach 1.549 for the canonical gas.
    pub fn canonical() -> Self {
        Self {
            rho_plus: 1.0,
            u_plus: -2.0,
            theta_plus: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_plus > 0.0) {
            return Err(Error::Domain {
                quantity: "rho_plus",
                value: self.rho_plus,
            });
        }
        if !(self.theta_plus > 0.0) {
            return Err(Error::Domain {
                quantity: "theta_plus",
                value: self.theta_plus,
            });
        }
        if !(self.u_plus < 0.0) {
            return Err(Error::InvalidParameter {
                name: "u_plus",
                reason: format!("far-field velocity must be negative, got {}", self.u_plus),
            });
        }
        Ok(())
    }

    /// Mass flux `rho_+ u_+` (negative).
    pub fn mass_flux(&self) -> f64 {
        self.rho_plus * self.u_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supersonic,
    SonicOrSubsonic,
}

pub fn pressure(rho: f64, theta: f64, g: &GasParams) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain {
            quantity: "density",
            value: rho,
        });
    }
    if !(theta > 0.0) {
        return Err(Error::Domain {
            quantity: "temperature",
            value: theta,
        });
    }
    Ok(g.r_gas * rho * theta)
}

pub fn mach_number(ff: &FarFieldState, g: &GasParams) -> f64 {
    ff.u_plus.abs() / g.sound_speed(ff.theta_plus)
}

/// Strict test: Mach exactly 1 is not supersonic.
pub fn check_supersonic(ff: &FarFieldState, g: &GasParams) -> Verdict {
    if mach_number(ff, g) > 1.0 {
        Verdict::Supersonic
    } else {
        Verdict::SonicOrSubsonic
    }
}

/// Reject anything that is not strictly supersonic.
pub fn require_supersonic(ff: &FarFieldState, g: &GasParams) -> Result<()> {
    match check_supersonic(ff, g) {
        Verdict::Supersonic => Ok(()),
        Verdict::SonicOrSubsonic => Err(Error::SubsonicFarField {
            mach: mach_number(ff, g),
        }),
    }
}

/// Symmetric matrix of the boundary-flux quadratic form in `(phi, psi1, zeta)`:
///
/// `F1 = (R th |u|/2 rho) phi^2 + (rho |u|/2) psi1^2 + (cv rho |u|/2 th) zeta^2
///       - R th phi psi1 - R rho zeta psi1`
/// evaluated at the far-field state.
pub fn f1_matrix(ff: &FarFieldState, g: &GasParams) -> [[f64; 3]; 3] {
    let r = g.r_gas;
    let rho = ff.rho_plus;
    let th = ff.theta_plus;
    let a = ff.u_plus.abs();
    let d0 = r * th * a / (2.0 * rho);
    let d1 = rho * a / 2.0;
    let d2 = g.cv() * rho * a / (2.0 * th);
    let o01 = -r * th / 2.0;
    let o12 = -r * rho / 2.0;
    [[d0, o01, 0.0], [o01, d1, o12], [0.0, o12, d2]]
}

/// Closed form of `det f1_matrix`: `(R cv rho |u| / 8)(|u|^2 - gamma R theta)`.
pub fn f1_determinant(ff: &FarFieldState, g: &GasParams) -> f64 {
    let a = ff.u_plus.abs();
    (g.r_gas * g.cv() * ff.rho_plus * a / 8.0) * (a * a - g.gamma * g.r_gas * ff.theta_plus)
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Sylvester's criterion on the leading principal minors.
pub fn is_positive_definite(m: &[[f64; 3]; 3]) -> bool {
    let m1 = m[0][0];
    let m2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    m1 > 0.0 && m2 > 0.0 && det3(m) > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pressure_values() {
        let g = GasParams::canonical();
        assert_eq!(pressure(1.0, 1.0, &g).unwrap(), 1.0);
        assert_eq!(pressure(2.0, 3.0, &g).unwrap(), 6.0);
        assert!(matches!(pressure(0.0, 1.0, &g), Err(Error::Domain { .. })));
        assert!(matches!(pressure(1.0, -1.0, &g), Err(Error::Domain { .. })));
    }

    #[test]
    fn mach_values() {
        let g = GasParams::canonical();
        let ff = FarFieldState::canonical();
        // 2 / sqrt(5/3) = 2 sqrt(3/5)
        assert_relative_eq!(mach_number(&ff, &g), 1.549_193_338_482_966_6, epsilon = 1e-15);
        let slow = FarFieldState::new(1.0, -1.0, 1.0).unwrap();
        assert_relative_eq!(mach_number(&slow, &g), 0.774_596_669_241_483_3, epsilon = 1e-15);
        assert_eq!(check_supersonic(&ff, &g), Verdict::Supersonic);
        assert_eq!(check_supersonic(&slow, &g), Verdict::SonicOrSubsonic);
    }

    #[test]
    fn sonic_is_not_supersonic() {
        // gamma = 4 makes the sound speed exactly 2
        let g = GasParams::new(1.0, 0.0, 1.0, 1.0, 4.0).unwrap();
        let ff = FarFieldState::new(1.0, -2.0, 1.0).unwrap();
        assert_eq!(mach_number(&ff, &g), 1.0);
        assert_eq!(check_supersonic(&ff, &g), Verdict::SonicOrSubsonic);
        assert_eq!(f1_determinant(&ff, &g), 0.0);
        assert!(require_supersonic(&ff, &g).is_err());
    }

    #[test]
    fn f1_canonical_determinant() {
        let g = GasParams::canonical();
        let ff = FarFieldState::canonical();
        let m = f1_matrix(&ff, &g);
        assert_relative_eq!(det3(&m), 0.875, epsilon = 1e-14);
        assert_relative_eq!(f1_determinant(&ff, &g), 0.875, epsilon = 1e-15);
        assert!(is_positive_definite(&m));
        let sub = FarFieldState::new(1.0, -1.0, 1.0).unwrap();
        assert!(det3(&f1_matrix(&sub, &g)) < 0.0);
        assert!(!is_positive_definite(&f1_matrix(&sub, &g)));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GasParams::new(0.0, 0.0, 1.0, 1.0, 1.4).is_err());
        assert!(GasParams::new(1.0, -1.0, 1.0, 1.0, 1.4).is_err());
        assert!(GasParams::new(1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(FarFieldState::new(1.0, 0.5, 1.0).is_err());
        assert!(FarFieldState::new(-1.0, -0.5, 1.0).is_err());
    }

    #[test]
    fn derived_constants() {
        let g = GasParams::canonical();
        assert_relative_eq!(g.cv(), 1.5, epsilon = 1e-15);
        assert_eq!(g.mu1(), 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn f1_positive_iff_supersonic(
                rho in 0.2f64..5.0,
                u in 0.1f64..6.0,
                th in 0.2f64..5.0,
                gamma in 1.05f64..3.0,
                r in 0.2f64..3.0,
            ) {
                let g = GasParams::new(1.0, 0.0, 1.0, r, gamma).unwrap();
                let ff = FarFieldState::new(rho, -u, th).unwrap();
                let mach = mach_number(&ff, &g);
                prop_assume!((mach - 1.0).abs() > 1e-6);
                let m = f1_matrix(&ff, &g);
                prop_assert_eq!(is_positive_definite(&m), mach > 1.0);
                let det = det3(&m);
                let closed = f1_determinant(&ff, &g);
                prop_assert!((det - closed).abs() <= 1e-10 * (1.0 + closed.abs()));
            }

            #[test]
            fn mach_scaling_invariance(s in 0.1f64..10.0, u in 0.1f64..5.0, th in 0.1f64..5.0) {
                let g = GasParams::canonical();
                let a = FarFieldState::new(1.0, -u, th).unwrap();
                let b = FarFieldState::new(1.0, -s * u, s * s * th).unwrap();
                prop_assert!((mach_number(&a, &g) - mach_number(&b, &g)).abs() < 1e-12);
            }

            #[test]
            fn far_field_pressure_positive(rho in 1e-3f64..1e3, th in 1e-3f64..1e3) {
                let g = GasParams::canonical();
                prop_assert!(pressure(rho, th, &g).unwrap() > 0.0);
            }
        }
    }
}
