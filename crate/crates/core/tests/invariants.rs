use outflow_core::diagnostics::weighted_norm_sq;
use outflow_core::profile::solve_profile;
use outflow_core::snapshot::{read_snapshot, write_snapshot};
use outflow_core::*;
use proptest::prelude::*;

fn field(n: usize, seed: u32) -> Vec<f64> {
    (0..n).map(|c| ((c as f64 + 1.0) * (seed as f64 + 0.37)).sin()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn profile_conserves_mass_and_reaches_far_field(du in -0.02f64..0.02, dth in -0.02f64..0.02) {
        let g = GasParams::canonical();
        let ff = FarFieldState::canonical();
        let bd = PlanarBoundaryData { u_b: ff.u_plus + du, theta_b: ff.theta_plus + dth };
        let p = solve_profile(&bd, &ff, &g, &ProfileOptions::default()).unwrap();
        prop_assert!(p.mass_flux_residual() <= 1e-10);
        let last = p.len() - 1;
        let tail = (p.u1[last] - ff.u_plus).abs() + (p.theta[last] - ff.theta_plus).abs();
        prop_assert!(tail <= 1e-6 * (du.abs() + dth.abs()).max(1e-12) + 1e-12);
        prop_assert_eq!(p.u1[0], bd.u_b);
        prop_assert_eq!(p.theta[0], bd.theta_b);
    }

    #[test]
    fn matched_far_field_is_a_discrete_steady_state(
        rho in 0.5f64..2.0,
        mach in 1.1f64..3.0,
        th in 0.5f64..2.0,
        amp in 0.0f64..0.2,
    ) {
        let g = GasParams::canonical();
        let ff = FarFieldState::new(rho, -mach * g.sound_speed(th), th).unwrap();
        let bd = PlanarBoundaryData { u_b: ff.u_plus, theta_b: ff.theta_plus };
        let grid = FlattenedGrid::new(BoundaryShape::sine(1.0, amp), 41, 8, 34.0).unwrap();
        let data = BoundaryData::reference(bd, Dim::Two);
        let bg = BackgroundState::build(&g, &ff, &data, &grid, &ProfileOptions::default(), Default::default()).unwrap();
        let p = Problem::new(bg, Convection::SecondOrderUpwind);
        let r = p.rhs_eval(&p.initial_state()).unwrap();
        prop_assert!(r.max_abs() <= 1e-12, "max rhs {}", r.max_abs());
    }

    #[test]
    fn weighted_norm_is_quadratic_and_monotone_in_beta(
        seed in 0u32..1000,
        c in -10.0f64..10.0,
        b1 in 0.0f64..0.2,
        b2 in 0.0f64..0.2,
    ) {
        let grid = FlattenedGrid::new(BoundaryShape::sine(1.0, 0.1), 21, 4, 10.0).unwrap();
        let f = field(grid.len(), seed);
        let g: Vec<f64> = f.iter().map(|x| c * x).collect();
        let n = weighted_norm_sq(&[&f], b1, &grid).unwrap();
        let m = weighted_norm_sq(&[&g], b1, &grid).unwrap();
        prop_assert!(n > 0.0);
        prop_assert!((m - c * c * n).abs() <= 1e-12 * (1.0 + m.abs()));
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(weighted_norm_sq(&[&f], lo, &grid).unwrap() <= weighted_norm_sq(&[&f], hi, &grid).unwrap());
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(seed in 0u32..1000, t in 0.0f64..1e3, two_d in any::<bool>()) {
        let grid = if two_d {
            FlattenedGrid::new(BoundaryShape::sine(1.0, 0.1), 7, 5, 3.0).unwrap()
        } else {
            FlattenedGrid::new(BoundaryShape::flat_1d(), 7, 1, 3.0).unwrap()
        };
        let n = grid.len();
        let s = FieldState {
            t,
            rho: field(n, seed),
            u: (0..grid.d()).map(|k| field(n, seed + 1 + k as u32)).collect(),
            theta: field(n, seed + 7),
        };
        let dir = tempfile::tempdir().unwrap();
        let (bin, _) = write_snapshot(&dir.path().join("s"), &s, &grid).unwrap();
        let (h, back) = read_snapshot(&bin).unwrap();
        prop_assert_eq!(h.n1, 7);
        prop_assert_eq!(back, s);
    }
}
