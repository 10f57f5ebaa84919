//! Run configuration: one TOML file per run, schema-versioned.
//!
//! Every section is optional and falls back to the values of
//! [`RunConfig::default`]; [`reference_document`] prints them all.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::background::BackgroundState;
use crate::diagnostics::FitWindow;
use crate::error::{Error, Result};
use crate::extension::{BaseFlow, BoundaryData, OutflowThresholds, TrigSeries};
use crate::gas::{FarFieldState, GasParams};
use crate::geometry::{BoundaryShape, Dim, FlattenedGrid, FourierMode};
use crate::profile::{PlanarBoundaryData, ProfileOptions};
use crate::solver::{FieldState, SolverConfig};
use crate::steady::SteadyConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Spatial dimension, 1 or 2.
    pub dim: u8,
    pub n1: usize,
    /// Tangential nodes (ignored in 1-D).
    pub n2: usize,
    /// Truncation length `L` of the normal direction.
    pub length: f64,
    /// Tangential period `ell` (ignored in 1-D).
    pub period: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n1: 201,
            n2: 32,
            length: 34.0,
            period: 1.0,
        }
    }
}

/// Boundary data on top of the planar reference values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryDataConfig {
    pub base: BaseFlow,
    /// One series per velocity component; missing components are zero.
    pub u_series: Vec<TrigSeries>,
    pub theta_series: TrigSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Weight exponent of the weighted norms.
    pub beta: f64,
    /// If set, `beta = beta_fraction * alpha_fit` once the profile is known.
    pub beta_fraction: Option<f64>,
    /// Time window of the decay fits.
    pub window: FitWindow,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            beta_fraction: None,
            window: FitWindow::new(5.0, 40.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Start at the background.
    #[default]
    None,
    /// Compactly supported bump `A (1 - s^2)^4`, `s = (y1 - center) / width`.
    Bump,
    /// Seeded random combination of `sin(m pi y1 / L)`, `m = 1..=4`, per field.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Rho,
    #[default]
    U1,
    U2,
    Theta,
}

/// Initial perturbation added to the background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub component: Component,
    /// Tangential factor `cos(2 pi k y2 / ell)` of the bump; 0 for none.
    pub tangential_mode: u32,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            kind: PerturbationKind::None,
            amplitude: 1e-3,
            center: 5.0,
            width: 2.0,
            component: Component::U1,
            tangential_mode: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub gas: GasParams,
    pub far_field: FarFieldState,
    pub boundary: PlanarBoundaryData,
    /// Boundary shape `M`: Fourier modes with period `grid.period`.
    pub shape: Vec<FourierMode>,
    pub boundary_data: BoundaryDataConfig,
    pub grid: GridConfig,
    pub profile: ProfileOptions,
    pub thresholds: OutflowThresholds,
    pub solver: SolverConfig,
    pub steady: SteadyConfig,
    pub diagnostics: DiagnosticsConfig,
    pub perturbation: PerturbationConfig,
    /// Default output directory when `--out` is not given.
    pub output_dir: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            gas: GasParams::canonical(),
            far_field: FarFieldState::canonical(),
            boundary: PlanarBoundaryData::default(),
            shape: Vec::new(),
            boundary_data: BoundaryDataConfig::default(),
            grid: GridConfig::default(),
            profile: ProfileOptions::default(),
            thresholds: OutflowThresholds::default(),
            solver: SolverConfig::default(),
            steady: SteadyConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            perturbation: PerturbationConfig::default(),
            output_dir: "out".into(),
            seed: 0,
        }
    }
}

fn config_err(m: impl Into<String>) -> Error {
    Error::Config(m.into())
}

impl RunConfig {
    /// Parse and validate. Syntax and schema problems are config errors;
    /// parameter problems keep their own kind.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dim(&self) -> Result<Dim> {
        match self.grid.dim {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            d => Err(Error::InvalidParameter {
                name: "grid.dim",
                reason: format!("must be 1 or 2, got {d}"),
            }),
        }
    }

    /// Checks that need no profile solve.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.gas.validate()?;
        self.far_field.validate()?;
        self.boundary.validate()?;
        let dim = self.dim()?;
        self.shape()?.validate()?;
        let bd = self.boundary_data()?;
        bd.validate_series()?;
        if self.boundary_data.u_series.len() > dim.count() {
            return Err(Error::InvalidParameter {
                name: "boundary_data.u_series",
                reason: format!("{} series for {} components", self.boundary_data.u_series.len(), dim.count()),
            });
        }
        self.grid()?;
        self.solver.validate()?;
        self.steady.validate()?;
        let d = &self.diagnostics;
        if !(d.beta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "diagnostics.beta",
                reason: format!("must be nonnegative, got {}", d.beta),
            });
        }
        if let Some(f) = d.beta_fraction {
            if !(0.0..=0.5).contains(&f) {
                return Err(Error::InvalidParameter {
                    name: "diagnostics.beta_fraction",
                    reason: format!("must lie in [0, 1/2], got {f}"),
                });
            }
        }
        if !(d.window.lo <= d.window.hi) {
            return Err(Error::InvalidParameter {
                name: "diagnostics.window",
                reason: "lo must not exceed hi".into(),
            });
        }
        let p = &self.perturbation;
        if p.kind != PerturbationKind::None && (!p.amplitude.is_finite() || !(p.width > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "perturbation",
                reason: "amplitude must be finite and width positive".into(),
            });
        }
        if p.component == Component::U2 && dim == Dim::One {
            return Err(Error::InvalidParameter {
                name: "perturbation.component",
                reason: "u2 needs a 2-D grid".into(),
            });
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<BoundaryShape> {
        Ok(match self.dim()? {
            Dim::One => {
                if !self.shape.is_empty() {
                    return Err(Error::InvalidParameter {
                        name: "shape",
                        reason: "a 1-D boundary is flat".into(),
                    });
                }
                BoundaryShape::flat_1d()
            }
            Dim::Two => BoundaryShape {
                modes: self.shape.clone(),
                ..BoundaryShape::flat_2d(self.grid.period)
            },
        })
    }

    pub fn grid(&self) -> Result<FlattenedGrid> {
        let n2 = if self.dim()? == Dim::One { 1 } else { self.grid.n2 };
        FlattenedGrid::new(self.shape()?, self.grid.n1, n2, self.grid.length)
    }

    pub fn boundary_data(&self) -> Result<BoundaryData> {
        let dim = self.dim()?;
        let mut u_series = self.boundary_data.u_series.clone();
        u_series.resize(dim.count(), TrigSeries::default());
        Ok(BoundaryData {
            reference: self.boundary,
            base: self.boundary_data.base,
            u_series,
            theta_series: self.boundary_data.theta_series.clone(),
        })
    }

    pub fn background(&self) -> Result<BackgroundState> {
        BackgroundState::build(
            &self.gas,
            &self.far_field,
            &self.boundary_data()?,
            &self.grid()?,
            &self.profile,
            self.thresholds,
        )
    }

    /// Weight exponent after the profile solve, checked against `alpha_fit / 2`.
    pub fn resolved_beta(&self, bg: &BackgroundState) -> Result<f64> {
        let beta = match self.diagnostics.beta_fraction {
            Some(f) => f * bg.alpha_fit.unwrap_or(0.0),
            None => self.diagnostics.beta,
        };
        bg.validate_beta(beta)?;
        Ok(beta)
    }

    /// Background plus the configured perturbation, boundary values untouched.
    pub fn initial_state(&self, bg: &BackgroundState) -> Result<FieldState> {
        let mut s = bg.as_state(0.0);
        let g = &bg.grid;
        let p = &self.perturbation;
        let last = g.n1 - 1;
        let interior = |i: usize| i > 0 && i < last;
        match p.kind {
            PerturbationKind::None => {}
            PerturbationKind::Bump => {
                let field = match p.component {
                    Component::Rho => &mut s.rho,
                    Component::U1 => &mut s.u[0],
                    Component::U2 => &mut s.u[1],
                    Component::Theta => &mut s.theta,
                };
                for j in 0..g.n2 {
                    let tang = if p.tangential_mode == 0 || g.dim == Dim::One {
                        1.0
                    } else {
                        (2.0 * std::f64::consts::PI * p.tangential_mode as f64 * g.y2(j) / g.shape.period).cos()
                    };
                    for i in (0..g.n1).filter(|&i| interior(i)) {
                        let z = (g.y1(i) - p.center) / p.width;
                        if z.abs() < 1.0 {
                            field[g.idx(i, j)] += p.amplitude * tang * (1.0 - z * z).powi(4);
                        }
                    }
                }
            }
            PerturbationKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let nf = 2 + g.d();
                let coeffs: Vec<[f64; 4]> = (0..nf).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
                let mut fields = s.fields_mut();
                for (f, c) in fields.iter_mut().zip(&coeffs) {
                    for j in 0..g.n2 {
                        for i in (0..g.n1).filter(|&i| interior(i)) {
                            let x = std::f64::consts::PI * g.y1(i) / g.length;
                            let v: f64 = (0..4).map(|m| c[m] * ((m + 1) as f64 * x).sin()).sum();
                            f[g.idx(i, j)] += 0.25 * p.amplitude * v;
                        }
                    }
                }
            }
        }
        Ok(s)
    }
}

/// Annotated TOML listing every key with its default value.
pub fn reference_document() -> String {
    let mut out = String::from(
        "# Run configuration reference. Every key is optional; the values below are the defaults.\n\
         # grid.dim: 1 or 2. shape: list of {k, a, b} Fourier modes of M with period grid.period (2-D only).\n\
         # boundary_data.base: \"reference\" (constant planar data) or \"normal_outflow\" (|u_b| times the outward normal).\n\
         # solver.convection: first_order_upwind | second_order_upwind | second_order_limited.\n\
         # solver.scheme: ssp_rk2 | rkc2. perturbation.kind: none | bump | random (seeded).\n\
         # diagnostics.beta_fraction: if set, beta = fraction * alpha_fit (at most 1/2).\n\n",
    );
    let mut example = RunConfig::default();
    example.solver.snapshot_every = Some(1.0);
    example.solver.diagnostics_every = Some(0.5);
    example.solver.dt = None;
    example.diagnostics.beta_fraction = Some(0.5);
    out.push_str(&example.to_toml());
    out.push_str(
        "\n# solver.snapshot_every, solver.diagnostics_every, solver.dt and diagnostics.beta_fraction\n\
         # default to unset; they are shown above with example values.\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.grid.dim = 2;
        c.shape = vec![FourierMode { k: 1, a: 0.0, b: 0.1 }];
        c.boundary_data.base = BaseFlow::NormalOutflow;
        c.solver.snapshot_every = Some(0.5);
        let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn reference_document_parses() {
        let text = reference_document();
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.grid, GridConfig::default());
    }

    #[test]
    fn partial_tables_fill_from_defaults() {
        let c = RunConfig::from_toml_str("[boundary]\nu_b = -2.0\n[far_field]\ntheta_plus = 2.0\n[gas]\nmu = 3.0\n").unwrap();
        assert_eq!(c.boundary.theta_b, 1.0);
        assert_eq!(c.far_field.u_plus, -2.0);
        assert_eq!(c.far_field.theta_plus, 2.0);
        assert_eq!(c.gas.gamma, GasParams::canonical().gamma);
        assert!(RunConfig::from_toml_str("[far_field]\nrho = 1.0\n").is_err());
    }

    #[test]
    fn schema_and_unknown_keys_rejected() {
        assert_eq!(RunConfig::from_toml_str("schema_version = 7").unwrap_err().kind(), "config");
        assert_eq!(RunConfig::from_toml_str("bogus = 1").unwrap_err().kind(), "config");
        assert_eq!(RunConfig::from_toml_str("[grid]\nn1 = \"x\"").unwrap_err().kind(), "config");
    }

    #[test]
    fn parameter_errors_keep_kind() {
        let e = RunConfig::from_toml_str("[grid]\ndim = 3").unwrap_err();
        assert_eq!(e.kind(), "invalid_parameter");
        let e = RunConfig::from_toml_str("[far_field]\nrho_plus = 1.0\nu_plus = -2.0\ntheta_plus = -1.0").unwrap_err();
        assert_eq!(e.kind(), "domain");
        let e = RunConfig::from_toml_str("shape = [{k = 1, a = 0.1, b = 0.0}]").unwrap_err();
        assert_eq!(e.kind(), "invalid_parameter");
    }

    #[test]
    fn seeded_random_perturbation_is_reproducible() {
        let mut c = RunConfig::default();
        c.grid.n1 = 41;
        c.perturbation.kind = PerturbationKind::Random;
        c.seed = 7;
        let bg = c.background().unwrap();
        let a = c.initial_state(&bg).unwrap();
        let b = c.initial_state(&bg).unwrap();
        assert_eq!(a, b);
        c.seed = 8;
        assert_ne!(c.initial_state(&bg).unwrap(), a);
        let last = bg.grid.n1 - 1;
        assert_eq!(a.u[0][0], bg.u[0][0]);
        assert_eq!(a.theta[last], bg.theta[last]);
    }

    #[test]
    fn beta_fraction_resolves_against_alpha() {
        let mut c = RunConfig::default();
        c.grid.n1 = 41;
        c.diagnostics.beta_fraction = Some(0.5);
        let bg = c.background().unwrap();
        let beta = c.resolved_beta(&bg).unwrap();
        assert!((beta - 0.5 * bg.alpha_fit.unwrap()).abs() < 1e-15);
        c.diagnostics.beta_fraction = None;
        c.diagnostics.beta = bg.alpha_fit.unwrap();
        assert!(c.resolved_beta(&bg).is_err());
    }
}
