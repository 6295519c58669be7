use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use projphase::injectivity::{
    alternating_search, bilinear_objective, find_witness, measurement_map, spanning_defect, Tolerances,
    WitnessBudget,
};
use projphase::linalg::{gaussian_matrix, random_unit};
use projphase::projection::{Projection, ProjectionCollection, TOL_STRUCT};
use projphase::reconstruction::{objective_and_gradient, MeasurementVector};
use projphase::rng::substream;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..7).prop_flat_map(|m| (Just(m), 1..m))
}

fn collection() -> impl Strategy<Value = ProjectionCollection> {
    (2usize..6, 1usize..9, any::<u64>()).prop_flat_map(|(m, n, seed)| {
        prop::collection::vec(1..m, n)
            .prop_map(move |ranks| ProjectionCollection::sample(m, &ranks, seed).unwrap())
    })
}

fn unit(m: usize, seed: u64) -> DVector<f64> {
    random_unit(m, &mut substream(seed, &[]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_projections_are_valid((m, k) in dims(), seed in any::<u64>()) {
        let p = Projection::sample_grassmannian(m, k, &mut substream(seed, &[])).unwrap();
        prop_assert!(p.validate(TOL_STRUCT).is_empty());
        prop_assert_eq!(p.rank(), k);
    }

    #[test]
    fn projection_ignores_choice_of_basis((m, k) in dims(), seed in any::<u64>()) {
        let mut s = substream(seed, &[]);
        let basis = gaussian_matrix(m, k, &mut s);
        let mix = gaussian_matrix(k, k, &mut s);
        prop_assume!(mix.determinant().abs() > 1e-3);
        let a = Projection::from_basis(&basis).unwrap();
        let b = Projection::from_basis(&(&basis * mix)).unwrap();
        prop_assert!((a.matrix() - b.matrix()).amax() < 1e-9);
    }

    #[test]
    fn complement_is_an_involution((m, k) in dims(), seed in any::<u64>()) {
        let p = Projection::sample_grassmannian(m, k, &mut substream(seed, &[])).unwrap();
        let q = p.complement();
        prop_assert_eq!(q.rank(), m - k);
        prop_assert!((q.complement().matrix() - p.matrix()).amax() < 1e-12);
        prop_assert!((p.matrix() * q.matrix()).amax() < 1e-9);
    }

    #[test]
    fn measurements_and_defect_ignore_sign(c in collection(), seed in any::<u64>()) {
        let x = unit(c.ambient_dim(), seed) * 1.7;
        prop_assert_eq!(measurement_map(&c, &x), measurement_map(&c, &-&x));
        let d1 = spanning_defect(&c, &x).unwrap().defect;
        let d2 = spanning_defect(&c, &-&x).unwrap().defect;
        prop_assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(c in collection(), seed in any::<u64>()) {
        let m = c.ambient_dim();
        let b = MeasurementVector::of(&c, &unit(m, seed), "prop");
        let z = unit(m, seed ^ 1) * 1.3;
        let (_, g) = objective_and_gradient(&c, &b, &z).unwrap();
        let h = 1e-5;
        for j in 0..m {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let fd = (objective_and_gradient(&c, &b, &zp).unwrap().0
                - objective_and_gradient(&c, &b, &zm).unwrap().0) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn alternation_never_increases_the_objective(c in collection(), seed in any::<u64>()) {
        let run = alternating_search(&c, &unit(c.ambient_dim(), seed), 30, 0, 0.0);
        for w in run.history.windows(2) {
            // Eigenvalues of G carry absolute error of order ε·‖G‖ ≤ ε·N.
            prop_assert!(w[1] <= w[0] + 4.0 * f64::EPSILON * c.len() as f64, "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn witness_x_is_a_critical_direction(c in collection(), seed in any::<u64>()) {
        let budget = WitnessBudget { restarts: 8, seed, ..WitnessBudget::default() };
        if let Some(w) = find_witness(&c, &budget, Tolerances::default().witness) {
            // y is orthogonal to every Pᵢx, so the image vectors miss a direction.
            let m = c.ambient_dim();
            let images = DMatrix::from_columns(&c.iter().map(|p| p.apply(&w.x)).collect::<Vec<_>>());
            prop_assert!((images.transpose() * &w.y).amax() <= 1e-8);
            prop_assert!(spanning_defect(&c, &w.x).unwrap().defect <= 1e-8 * (c.len() as f64).sqrt() + 1e-15);
            prop_assert!(bilinear_objective(&c, &w.x, &w.y) <= (c.len() as f64) * 1e-16);
            prop_assert_eq!(w.x.len(), m);
        }
    }
}
