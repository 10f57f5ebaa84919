//! Background state `(rho~, u~ + U, theta~ + Theta)` on the flattened grid,
//! the perturbation split and the stationary forcing terms.
//!
//! In flattened coordinates `x1 - M(x2) = y1`, so the planar profile is
//! sampled directly at the `y1` nodes.

use serde::Serialize;

use crate::diagnostics::weighted_norm_sq;
use crate::error::{Error, Result};
use crate::extension::{build_extension, BoundaryData, Extensions, OutflowThresholds};
use crate::gas::{FarFieldState, GasParams};
use crate::geometry::{FlattenedGrid, XJet};
use crate::profile::{solve_profile, PlanarProfile, ProfileJet, ProfileOptions};
use crate::solver::FieldState;

/// Background fields per node plus the pieces needed to rebuild them.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundState {
    pub grid: FlattenedGrid,
    pub gas: GasParams,
    pub far_field: FarFieldState,
    /// `rho~(y1)`.
    pub rho: Vec<f64>,
    /// `u~(y1) + U`, one vector per component.
    pub u: Vec<Vec<f64>>,
    /// `theta~(y1) + Theta`.
    pub theta: Vec<f64>,
    /// `theta~(y1)` alone.
    pub theta_tilde: Vec<f64>,
    /// Profile values and exact derivatives at the `y1` nodes.
    pub profile_jets: Vec<ProfileJet>,
    pub extensions: Extensions,
    pub extensions_zero: bool,
    pub delta_tilde: f64,
    /// Boundary strength including the tangential deviation norm.
    pub delta: f64,
    pub alpha_fit: Option<f64>,
}

/// Stride between profile samples that lands on every grid node.
fn profile_stride(profile: &PlanarProfile, grid: &FlattenedGrid) -> Result<usize> {
    let len_ok = (profile.length() - grid.length).abs() <= 1e-12 * grid.length;
    let intervals = profile.len().saturating_sub(1);
    if !len_ok || !intervals.is_multiple_of(grid.n1 - 1) {
        return Err(Error::GridMismatch(format!(
            "profile with {} samples on [0, {}] does not contain the {} grid nodes on [0, {}]",
            profile.len(),
            profile.length(),
            grid.n1,
            grid.length
        )));
    }
    Ok(intervals / (grid.n1 - 1))
}

/// Profile options whose samples contain the grid nodes (at least 801 samples).
pub fn matching_profile_options(grid: &FlattenedGrid, base: &ProfileOptions) -> ProfileOptions {
    let k = 800usize.div_ceil(grid.n1 - 1).max(1);
    ProfileOptions {
        length: grid.length,
        samples: k * (grid.n1 - 1) + 1,
        ..*base
    }
}

/// Sample the profile and add the extensions.
pub fn assemble_background(profile: &PlanarProfile, extensions: &Extensions, grid: &FlattenedGrid) -> Result<BackgroundState> {
    let stride = profile_stride(profile, grid)?;
    if extensions.u.len() != grid.d() || extensions.theta.values.len() != grid.len() {
        return Err(Error::GridMismatch("extensions were built on a different grid".into()));
    }
    let n = grid.len();
    let d = grid.d();
    let jets: Vec<ProfileJet> = (0..grid.n1).map(|i| profile.jet(i * stride)).collect();
    let mut rho = vec![0.0; n];
    let mut u = vec![vec![0.0; n]; d];
    let mut theta = vec![0.0; n];
    let mut theta_tilde = vec![0.0; n];
    for j in 0..grid.n2 {
        for (i, jet) in jets.iter().enumerate() {
            let c = grid.idx(i, j);
            rho[c] = jet.rho;
            u[0][c] = jet.u1 + extensions.u[0].values[c];
            for k in 1..d {
                u[k][c] = extensions.u[k].values[c];
            }
            theta_tilde[c] = jet.theta;
            theta[c] = jet.theta + extensions.theta.values[c];
        }
    }
    if let Some(c) = theta.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::Domain {
            quantity: "background temperature",
            value: theta[c],
        });
    }
    let ff = profile.far_field;
    Ok(BackgroundState {
        grid: grid.clone(),
        gas: profile.gas,
        far_field: ff,
        rho,
        u,
        theta,
        theta_tilde,
        profile_jets: jets,
        extensions: extensions.clone(),
        extensions_zero: extensions.is_zero(),
        delta_tilde: profile.delta_tilde,
        delta: extensions.data.delta(grid, ff.u_plus, ff.theta_plus),
        alpha_fit: profile.alpha_fit,
    })
}

impl BackgroundState {
    /// Solve the profile on the grid's interval, lift the boundary data and
    /// assemble.
    pub fn build(
        gas: &GasParams,
        ff: &FarFieldState,
        data: &BoundaryData,
        grid: &FlattenedGrid,
        opts: &ProfileOptions,
        thr: OutflowThresholds,
    ) -> Result<Self> {
        let profile = solve_profile(&data.reference, ff, gas, &matching_profile_options(grid, opts))?;
        let ext = build_extension(data, grid, thr)?;
        assemble_background(&profile, &ext, grid)
    }

    /// Background as a field state at time `t`.
    pub fn as_state(&self, t: f64) -> FieldState {
        FieldState {
            t,
            rho: self.rho.clone(),
            u: self.u.clone(),
            theta: self.theta.clone(),
        }
    }

    /// Slowest spatial decay rate: the fitted one, or `None` for a constant profile.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha_fit
    }

    /// Check `0 <= beta <= alpha_fit / 2` (any `beta >= 0` for a constant profile).
    pub fn validate_beta(&self, beta: f64) -> Result<()> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be nonnegative, got {beta}"),
            });
        }
        if let Some(a) = self.alpha_fit {
            if beta > 0.5 * a * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter {
                    name: "beta",
                    reason: format!("beta = {beta} exceeds alpha_fit / 2 = {}", 0.5 * a),
                });
            }
        }
        Ok(())
    }
}

/// `Phi = (phi, psi, zeta) = state - background`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub phi: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
}

/// Boundary values of `psi` and `zeta` above this are reported as violations.
pub const BOUNDARY_TOL: f64 = 1e-12;

fn check_shape(state: &FieldState, bg: &BackgroundState) -> Result<()> {
    let n = bg.grid.len();
    if state.rho.len() != n || state.theta.len() != n || state.u.len() != bg.u.len() || state.u.iter().any(|c| c.len() != n) {
        return Err(Error::GridMismatch("state and background live on different grids".into()));
    }
    Ok(())
}

impl Perturbation {
    /// Plain difference without the boundary check.
    pub fn difference(state: &FieldState, bg: &BackgroundState) -> Result<Self> {
        check_shape(state, bg)?;
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
        Ok(Self {
            phi: sub(&state.rho, &bg.rho),
            psi: state.u.iter().zip(&bg.u).map(|(a, b)| sub(a, b)).collect(),
            zeta: sub(&state.theta, &bg.theta),
        })
    }

    /// `psi = 0` and `zeta = 0` on `y1 = 0`.
    pub fn check_boundary(&self, grid: &FlattenedGrid) -> Result<()> {
        for j in 0..grid.n2 {
            let c = grid.idx(0, j);
            for (k, p) in self.psi.iter().enumerate() {
                if p[c].abs() > BOUNDARY_TOL {
                    return Err(Error::Invariant(format!(
                        "psi_{} = {} on the boundary at tangential node {j}",
                        k + 1,
                        p[c]
                    )));
                }
            }
            if self.zeta[c].abs() > BOUNDARY_TOL {
                return Err(Error::Invariant(format!(
                    "zeta = {} on the boundary at tangential node {j}",
                    self.zeta[c]
                )));
            }
        }
        Ok(())
    }

    pub fn components(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.phi];
        v.extend(self.psi.iter().map(|p| p.as_slice()));
        v.push(&self.zeta);
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Perturbation of `state`, checking the boundary conditions of `psi`, `zeta`.
pub fn extract_perturbation(state: &FieldState, bg: &BackgroundState) -> Result<Perturbation> {
    let p = Perturbation::difference(state, bg)?;
    p.check_boundary(&bg.grid)?;
    Ok(p)
}

/// `background + pert` as a field state at time `t`.
pub fn embed(bg: &BackgroundState, pert: &Perturbation, t: f64) -> Result<FieldState> {
    let n = bg.grid.len();
    if pert.phi.len() != n || pert.zeta.len() != n || pert.psi.len() != bg.u.len() {
        return Err(Error::GridMismatch("perturbation and background live on different grids".into()));
    }
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
    Ok(FieldState {
        t,
        rho: add(&bg.rho, &pert.phi),
        u: bg.u.iter().zip(&pert.psi).map(|(a, b)| add(a, b)).collect(),
        theta: add(&bg.theta, &pert.zeta),
    })
}

/// Stationary forcing `F` (mass), `G` (momentum), `H` (energy) per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTerms {
    pub f: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

/// Exact `x`-jets of the profile part and the extensions at a node.
pub(crate) struct NodeJets {
    pub rho: XJet,
    pub u1: XJet,
    pub theta: XJet,
    pub ext_u: [XJet; 2],
    pub ext_theta: XJet,
}

pub(crate) fn node_jets(bg: &BackgroundState, i1: usize, i2: usize) -> NodeJets {
    let grid = &bg.grid;
    let p = &bg.profile_jets[i1];
    let (mp, mpp) = (grid.dm[i2], grid.ddm[i2]);
    let one = [1.0, 0.0, 0.0];
    let (ext_u, ext_theta) = bg.extensions.jets(grid, i1, i2);
    NodeJets {
        rho: XJet::separable(one, [p.rho, p.drho, p.ddrho], mp, mpp),
        u1: XJet::separable(one, [p.u1, p.du1, p.ddu1], mp, mpp),
        theta: XJet::separable(one, [p.theta, p.dtheta, p.ddtheta], mp, mpp),
        ext_u,
        ext_theta,
    }
}

/// `F`, `G`, `H` from their closed forms (two-dimensional restriction) with
/// exact profile and geometry derivatives.
pub fn forcing_terms(bg: &BackgroundState) -> ForcingTerms {
    let grid = &bg.grid;
    let g = &bg.gas;
    let (mu, lam, kap, r, cv) = (g.mu, g.lambda, g.kappa, g.r_gas, g.cv());
    let n = grid.len();
    let d = grid.d();
    let mut out = ForcingTerms {
        f: vec![0.0; n],
        g: vec![vec![0.0; n]; d],
        h: vec![0.0; n],
    };
    for j in 0..grid.n2 {
        let (mp, mpp) = (grid.dm[j], grid.ddm[j]);
        for i in 0..grid.n1 {
            let c = grid.idx(i, j);
            let nj = node_jets(bg, i, j);
            let p = &bg.profile_jets[i];
            let (rt, tt) = (p.rho, p.theta);
            let [uu1, uu2] = nj.ext_u;
            let th = nj.ext_theta;
            let ub = [p.u1 + uu1.v, uu2.v];
            let thb = tt + th.v;
            let div_u = uu1.d1 + uu2.d2;
            let div_ut = nj.u1.d1;

            out.f[c] = -(nj.rho.d1 * uu1.v + nj.rho.d2 * uu2.v) - rt * div_u;

            let ext = [uu1, uu2];
            let grad_div = [uu1.d11 + uu2.d12, uu1.d12 + uu2.d22];
            let u_dot_grad_ut = uu1.v * nj.u1.d1 + uu2.v * nj.u1.d2;
            let bracket = [
                mu * p.ddu1 * mp * mp - mu * p.du1 * mpp,
                (r * tt * p.drho + r * rt * p.dtheta - (mu + lam) * p.ddu1) * mp,
            ];
            for k in 0..d {
                let e = &ext[k];
                let adv = ub[0] * e.d1 + ub[1] * e.d2;
                let lu = mu * e.lap() + (mu + lam) * grad_div[k];
                let rot = if k == 0 { u_dot_grad_ut } else { 0.0 };
                out.g[k][c] = -rt * adv - rt * rot + lu - r * rt * th.grad()[k] - r * th.v * nj.rho.grad()[k] + bracket[k];
            }

            // deformation tensors of U and u~
            let gu = [[uu1.d1, uu1.d2], [uu2.d1, uu2.d2]];
            let du = [
                [gu[0][0], 0.5 * (gu[0][1] + gu[1][0])],
                [0.5 * (gu[0][1] + gu[1][0]), gu[1][1]],
            ];
            let dut = [[nj.u1.d1, 0.5 * nj.u1.d2], [0.5 * nj.u1.d2, 0.0]];
            let du_sq: f64 = du.iter().flatten().map(|x| x * x).sum();
            let du_dut: f64 = du.iter().flatten().zip(dut.iter().flatten()).map(|(a, b)| a * b).sum();
            out.h[c] = -cv * rt * (uu1.v * nj.theta.d1 + uu2.v * nj.theta.d2)
                - cv * rt * (ub[0] * th.d1 + ub[1] * th.d2)
                - r * rt * th.v * div_ut
                - r * rt * thb * div_u
                + kap * p.ddtheta * mp * mp
                - kap * p.dtheta * mpp
                + kap * th.lap()
                + 2.0 * mu * du_sq
                + 4.0 * mu * du_dut
                + lam * div_u * div_u
                + 2.0 * lam * div_ut * div_u
                + mu * p.du1 * p.du1 * mp * mp;
        }
    }
    out
}

impl ForcingTerms {
    pub fn components(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.f];
        v.extend(self.g.iter().map(|x| x.as_slice()));
        v.push(&self.h);
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Time derivatives `(rho_t, u_t, theta_t)` of the background implied by
    /// the forcing: `(F, G / rho~, H / (cv rho~))`.
    pub fn composition(&self, bg: &BackgroundState) -> FieldState {
        let cv = bg.gas.cv();
        FieldState {
            t: 0.0,
            rho: self.f.clone(),
            u: self
                .g
                .iter()
                .map(|gk| gk.iter().zip(&bg.rho).map(|(x, r)| x / r).collect())
                .collect(),
            theta: self.h.iter().zip(&bg.rho).map(|(x, r)| x / (cv * r)).collect(),
        }
    }
}

/// Weighted size of the forcing relative to the boundary strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcingAudit {
    pub beta: f64,
    pub norm: f64,
    pub delta: f64,
    /// `norm / delta`; zero when both vanish.
    pub ratio: f64,
}

/// `||(F, G, H)||_{L^2_{e, 3 alpha / 2}}` and its ratio to `delta`.
pub fn forcing_audit(ft: &ForcingTerms, bg: &BackgroundState, alpha: f64) -> Result<ForcingAudit> {
    let beta = 1.5 * alpha;
    let norm = weighted_norm_sq(&ft.components(), beta, &bg.grid)?.sqrt();
    let ratio = if bg.delta > 0.0 {
        norm / bg.delta
    } else if norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ForcingAudit {
        beta,
        norm,
        delta: bg.delta,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::TrigSeries;
    use crate::geometry::{BoundaryShape, Dim, FourierMode};
    use crate::profile::PlanarBoundaryData;

    fn canon() -> (GasParams, FarFieldState) {
        (GasParams::canonical(), FarFieldState::canonical())
    }

    fn bg_for(shape: BoundaryShape, n1: usize, n2: usize, l: f64, data: BoundaryData) -> BackgroundState {
        let (g, ff) = canon();
        let grid = FlattenedGrid::new(shape, n1, n2, l).unwrap();
        BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), OutflowThresholds::default()).unwrap()
    }

    fn flat_ref(dim: Dim) -> BoundaryData {
        let ff = FarFieldState::canonical();
        BoundaryData::reference(
            PlanarBoundaryData {
                u_b: ff.u_plus,
                theta_b: ff.theta_plus,
            },
            dim,
        )
    }

    fn wavy_data() -> BoundaryData {
        let mut d = BoundaryData::reference(PlanarBoundaryData { u_b: -1.99, theta_b: 1.005 }, Dim::Two);
        d.u_series[0] = TrigSeries {
            mean: 0.0,
            modes: vec![FourierMode { k: 1, a: 0.002, b: 0.0 }],
        };
        d.u_series[1] = TrigSeries {
            mean: 0.001,
            modes: vec![FourierMode { k: 2, a: 0.0, b: 0.003 }],
        };
        d.theta_series = TrigSeries {
            mean: 0.0,
            modes: vec![FourierMode { k: 1, a: 0.0, b: -0.002 }],
        };
        d
    }

    #[test]
    fn zero_strength_background_is_far_field() {
        let bg = bg_for(BoundaryShape::flat_2d(1.0), 21, 8, 10.0, flat_ref(Dim::Two));
        let ff = FarFieldState::canonical();
        assert!(bg.rho.iter().all(|&r| r == ff.rho_plus));
        assert!(bg.u[0].iter().all(|&u| u == ff.u_plus));
        assert!(bg.u[1].iter().all(|&u| u == 0.0));
        assert!(bg.theta.iter().all(|&t| t == ff.theta_plus));
        let ft = forcing_terms(&bg);
        assert_eq!(ft.max_abs(), 0.0);
    }

    #[test]
    fn flat_zero_extension_forcing_vanishes_to_rounding() {
        let data = BoundaryData::reference(PlanarBoundaryData { u_b: -1.99, theta_b: 1.0 }, Dim::Two);
        let bg = bg_for(BoundaryShape::flat_2d(1.0), 101, 8, 40.0, data);
        let ft = forcing_terms(&bg);
        assert!(ft.max_abs() < 1e-13, "{}", ft.max_abs());
    }

    #[test]
    fn curved_constant_profile_forcing_vanishes() {
        let bg = bg_for(BoundaryShape::sine(1.0, 0.1), 21, 16, 10.0, flat_ref(Dim::Two));
        assert_eq!(forcing_terms(&bg).max_abs(), 0.0);
    }

    #[test]
    fn boundary_trace_and_mass_flux() {
        let data = wavy_data();
        let bg = bg_for(BoundaryShape::sine(1.0, 0.1), 161, 16, 40.0, data.clone());
        let grid = &bg.grid;
        let (ub, tb) = data.nodal(grid);
        for j in 0..grid.n2 {
            let c = grid.idx(0, j);
            assert!((bg.u[0][c] - ub[0][j]).abs() <= 1e-15);
            assert_eq!(bg.u[1][c], ub[1][j]);
            assert!((bg.theta[c] - tb[j]).abs() <= 1e-15);
            for i in 0..grid.n1 {
                if grid.y1(i) > 1.0 {
                    let c = grid.idx(i, j);
                    let m = bg.rho[c] * bg.u[0][c];
                    assert!((m - bg.far_field.mass_flux()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_direct_residual() {
        let bg = bg_for(BoundaryShape::sine(1.0, 0.1), 161, 16, 40.0, wavy_data());
        let ft = forcing_terms(&bg);
        let g = bg.gas;
        let (mu, lam, kap, r, cv) = (g.mu, g.lambda, g.kappa, g.r_gas, g.cv());
        let grid = &bg.grid;
        let add = |a: XJet, b: XJet| XJet {
            v: a.v + b.v,
            d1: a.d1 + b.d1,
            d2: a.d2 + b.d2,
            d11: a.d11 + b.d11,
            d12: a.d12 + b.d12,
            d22: a.d22 + b.d22,
        };
        let mut worst = 0.0f64;
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                let c = grid.idx(i, j);
                let nj = node_jets(&bg, i, j);
                let u = [add(nj.u1, nj.ext_u[0]), nj.ext_u[1]];
                let th = add(nj.theta, nj.ext_theta);
                let rho = nj.rho;
                let div = u[0].d1 + u[1].d2;
                let f = -(rho.d1 * u[0].v + rho.v * u[0].d1 + rho.d2 * u[1].v + rho.v * u[1].d2);
                let gd = [u[0].d11 + u[1].d12, u[0].d12 + u[1].d22];
                let mut gg = [0.0; 2];
                for k in 0..2 {
                    let p_k = r * (rho.grad()[k] * th.v + rho.v * th.grad()[k]);
                    gg[k] = -rho.v * (u[0].v * u[k].d1 + u[1].v * u[k].d2) - p_k + mu * u[k].lap() + (mu + lam) * gd[k];
                }
                let a = [[u[0].d1, u[0].d2], [u[1].d1, u[1].d2]];
                let dsq = a[0][0].powi(2) + a[1][1].powi(2) + 0.5 * (a[0][1] + a[1][0]).powi(2);
                let h = -cv * rho.v * (u[0].v * th.d1 + u[1].v * th.d2) - r * rho.v * th.v * div
                    + kap * th.lap()
                    + 2.0 * mu * dsq
                    + lam * div * div;
                worst = worst
                    .max((f - ft.f[c]).abs())
                    .max((gg[0] - ft.g[0][c]).abs())
                    .max((gg[1] - ft.g[1][c]).abs())
                    .max((h - ft.h[c]).abs());
            }
        }
        assert!(worst < 1e-12, "{worst}");
        assert!(ft.max_abs() > 1e-4);
    }

    #[test]
    fn perturbation_roundtrip_and_boundary_flag() {
        let bg = bg_for(BoundaryShape::sine(1.0, 0.1), 81, 8, 40.0, wavy_data());
        let mut s = bg.as_state(0.0);
        let p0 = extract_perturbation(&s, &bg).unwrap();
        assert_eq!(p0.max_abs(), 0.0);
        for (k, v) in s.theta.iter_mut().enumerate() {
            *v += 1e-3 * ((k % 7) as f64);
        }
        let grid = &bg.grid;
        for j in 0..grid.n2 {
            s.theta[grid.idx(0, j)] = bg.theta[grid.idx(0, j)];
        }
        let p = extract_perturbation(&s, &bg).unwrap();
        let back = embed(&bg, &p, 0.0).unwrap();
        for (a, b) in back.theta.iter().zip(&s.theta) {
            assert!((a - b).abs() <= 1e-14);
        }
        s.u[0][grid.idx(0, 3)] += 1e-6;
        assert!(matches!(extract_perturbation(&s, &bg), Err(Error::Invariant(_))));
    }

    #[test]
    fn mismatched_profile_rejected() {
        let (g, ff) = canon();
        let grid = FlattenedGrid::one_d(101, 40.0).unwrap();
        let bd = PlanarBoundaryData { u_b: -1.99, theta_b: 1.0 };
        let p = solve_profile(&bd, &ff, &g, &ProfileOptions { samples: 151, ..Default::default() }).unwrap();
        let ext = build_extension(&BoundaryData::reference(bd, Dim::One), &grid, OutflowThresholds::default()).unwrap();
        assert!(matches!(assemble_background(&p, &ext, &grid), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn forcing_scales_with_delta() {
        let mk = |s: f64| {
            let mut d = wavy_data().with_scaled_series(s);
            d.reference = PlanarBoundaryData {
                u_b: -2.0 + 0.01 * s,
                theta_b: 1.0 + 0.005 * s,
            };
            bg_for(BoundaryShape::sine(1.0, 0.1), 161, 16, 40.0, d)
        };
        let a = mk(0.1);
        let b = mk(1.0);
        let alpha = b.alpha_fit.unwrap();
        let ra = forcing_audit(&forcing_terms(&a), &a, alpha).unwrap().ratio;
        let rb = forcing_audit(&forcing_terms(&b), &b, alpha).unwrap().ratio;
        assert!(ra / rb < 2.0 && rb / ra < 2.0, "{ra} {rb}");
    }

    #[test]
    fn beta_validated_against_alpha() {
        let data = BoundaryData::reference(PlanarBoundaryData { u_b: -1.99, theta_b: 1.0 }, Dim::One);
        let (g, ff) = canon();
        let grid = FlattenedGrid::one_d(201, 40.0).unwrap();
        let bg = BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), OutflowThresholds::default()).unwrap();
        let a = bg.alpha_fit.unwrap();
        assert!(bg.validate_beta(0.5 * a).is_ok());
        assert!(bg.validate_beta(0.6 * a).is_err());
        assert!(bg.validate_beta(-0.1).is_err());
    }
}
