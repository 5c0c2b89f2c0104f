//! Property tests for the lattice norms, the semigroup, and the
//! regularized drifts.

use proptest::prelude::*;

use stoheat_core::drift::{verify_one_sided_lipschitz, DriftSpec, YosidaApprox};
use stoheat_core::grid::{
    weight, weighted_sup_norm, FieldRole, GridSpec, SpaceTimeField, WeightParams,
};
use stoheat_core::kernel::HeatSemigroup;

fn test_grid() -> GridSpec {
    GridSpec::new(1, 8.0, 64, 0.5, 4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_is_at_least_one(theta in 0.05f64..3.0, x in -8.0f64..8.0, x0 in -8.0f64..8.0) {
        let g = test_grid();
        let wp = WeightParams::new(theta, [x0, 0.0], &g).unwrap();
        let w = weight(&wp, [x, 0.0]);
        prop_assert!(w >= 1.0);
        if x != x0 {
            prop_assert!(w > 1.0);
        }
        let ws = weight(&wp.smooth(), [x, 0.0]);
        prop_assert!(ws >= 1.0);
    }

    #[test]
    fn smooth_and_plain_weights_are_equivalent_within_two(
        theta in 0.05f64..2.0,
        x in -8.0f64..8.0,
        x0 in -8.0f64..8.0,
    ) {
        let g = test_grid();
        let wp = WeightParams::new(theta, [x0, 0.0], &g).unwrap();
        let ratio = weight(&wp.smooth(), [x, 0.0]) / weight(&wp, [x, 0.0]);
        prop_assert!(ratio <= 2.0 + 1e-12 && ratio >= 0.5 - 1e-12, "ratio {ratio}");
    }

    #[test]
    fn weighted_norm_homogeneity_and_triangle(
        scale in -3.0f64..3.0,
        theta in 0.1f64..2.0,
        seed_a in 0u64..1000,
        seed_b in 0u64..1000,
    ) {
        let g = test_grid();
        let f = SpaceTimeField::from_fn(g, FieldRole::Generic, |t, x| {
            ((x[0] * 1.3 + seed_a as f64).sin() + t).cos()
        });
        let h = SpaceTimeField::from_fn(g, FieldRole::Generic, |t, x| {
            (x[0] * 0.7 - seed_b as f64).cos() * (1.0 + t)
        });
        let wp = WeightParams::new(theta, [0.0, 0.0], &g).unwrap();
        let range = 0..=g.steps();
        let nf = weighted_sup_norm(&f, &wp, range.clone()).unwrap();
        let nh = weighted_sup_norm(&h, &wp, range.clone()).unwrap();
        let nscaled = weighted_sup_norm(&f.map(|v| scale * v), &wp, range.clone()).unwrap();
        prop_assert!((nscaled - scale.abs() * nf).abs() <= 1e-12 * (1.0 + nf));
        let nsum = weighted_sup_norm(&f.add(&h).unwrap(), &wp, range).unwrap();
        prop_assert!(nsum <= nf + nh + 1e-12);
    }

    #[test]
    fn norms_with_shifted_centers_are_equivalent(
        theta in 0.1f64..1.0,
        c0 in -4.0f64..4.0,
        c1 in -4.0f64..4.0,
    ) {
        // For theta <= 1 the sharp grid constant is 1 + |x0 - x1|^theta.
        let g = test_grid();
        let f = SpaceTimeField::from_fn(g, FieldRole::Generic, |_, x| (0.9 * x[0]).sin() + 0.2);
        let w0 = WeightParams::new(theta, [c0, 0.0], &g).unwrap();
        let w1 = WeightParams::new(theta, [c1, 0.0], &g).unwrap();
        let n0 = weighted_sup_norm(&f, &w0, 0..=g.steps()).unwrap();
        let n1 = weighted_sup_norm(&f, &w1, 0..=g.steps()).unwrap();
        let c = 1.0 + (c0 - c1).abs().powf(theta);
        prop_assert!(n0 <= c * n1 * (1.0 + 1e-12));
        prop_assert!(n1 <= c * n0 * (1.0 + 1e-12));
    }

    #[test]
    fn semigroup_contracts_and_preserves_order(
        t in 0.001f64..1.0,
        amp1 in 0.1f64..3.0,
        amp2 in 0.1f64..3.0,
        c1 in -6.0f64..6.0,
        c2 in -6.0f64..6.0,
    ) {
        // Spectrally resolved data (bump widths well above dx): this is the
        // regime the solver operates in, where the discrete comparison
        // principle holds to rounding. Under-resolved lattice data can
        // overshoot through the trigonometric interpolant instead.
        let grid = GridSpec::new(1, 16.0, 128, 1.0, 4).unwrap();
        let s = HeatSemigroup::new(grid);
        let bump = |x: f64, c: f64, w: f64| (-(x - c) * (x - c) / (2.0 * w * w)).exp();
        let f: Vec<f64> = (0..grid.node_count())
            .map(|i| {
                let x = grid.node_coord(i)[0];
                amp1 * bump(x, c1, 1.0) - amp2 * bump(x, c2, 1.4)
            })
            .collect();
        let sf = s.apply(&f, t).unwrap();
        let sup_f = f.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let sup_sf = sf.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        prop_assert!(sup_sf <= sup_f * (1.0 + 1e-12), "{sup_sf} > {sup_f}");

        // Monotonicity: g >= f pointwise is preserved.
        let g: Vec<f64> = f.iter().map(|&v| v + 0.5).collect();
        let sg = s.apply(&g, t).unwrap();
        for (a, b) in sf.iter().zip(&sg) {
            prop_assert!(*b >= *a - 1e-12 * (1.0 + sup_f));
        }

        // Positivity up to spectral ringing.
        let pos: Vec<f64> = (0..grid.node_count())
            .map(|i| {
                let x = grid.node_coord(i)[0];
                amp1 * bump(x, c1, 1.0) + amp2 * bump(x, c2, 1.4)
            })
            .collect();
        let spos = s.apply(&pos, t).unwrap();
        let sup_pos = pos.iter().fold(0.0f64, |m, &v| m.max(v));
        for &v in &spos {
            prop_assert!(v >= -1e-12 * sup_pos);
        }
    }

    #[test]
    fn yosida_contract_on_random_pairs(u1 in -5.0f64..5.0, u2 in -5.0f64..5.0, n in 1u32..200) {
        let drift = DriftSpec::allen_cahn();
        let y = YosidaApprox::new(drift.clone(), n).unwrap();
        let (p1, p2) = (y.phi_n(u1).unwrap(), y.phi_n(u2).unwrap());
        // 2n-Lipschitz.
        prop_assert!((p2 - p1).abs() <= 2.0 * n as f64 * (u2 - u1).abs() + 1e-8);
        // Non-increasing.
        if u1 < u2 {
            prop_assert!(p2 <= p1 + 1e-9);
        }
        // Dominated by |phi|.
        prop_assert!(p1.abs() <= drift.phi(u1).abs() + 1e-8);
    }

    #[test]
    fn regularized_drift_keeps_the_one_sided_constant(n in 1u32..100, seed in 0u64..1000) {
        let base = DriftSpec::allen_cahn();
        let y = YosidaApprox::new(base.clone(), n).unwrap();
        let reg = DriftSpec::from_fn(
            "regularized",
            move |u| y.regularized_drift(u).unwrap(),
            base.kappa(),
            base.growth_k(),
            base.growth_nu(),
        );
        let report = verify_one_sided_lipschitz(&reg, 300, (-4.0, 4.0), seed).unwrap();
        prop_assert!(report.pass, "violation {}", report.max_violation);
    }
}
