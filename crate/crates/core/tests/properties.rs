mod common;

use loopflat::cli::config::RunConfig;
use loopflat::cli::output::to_json;
use loopflat::grid::Grid;
use loopflat::lie::octonion::right_mul_matrix;
use loopflat::lie::Subspace;
use loopflat::linalg::C64;
use loopflat::loops::LaurentLoop;
use loopflat::obstruction::GeometryCase;
use loopflat::stencil::stencil_width;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CASES: [&str; 6] = ["sphere:n=4,k=2", "sphere:n=5,k=1", "cpn-real:n=2", "cpn-complex:n=2,k=1", "hpn:n=2", "g2"];

fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn involutions_are_commuting_automorphisms(case in 0..CASES.len(), seed in any::<u64>()) {
        let pair = GeometryCase::parse(CASES[case]).unwrap().build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = Subspace::new(&pair.algebra.basis);
        let x = common::gaussian_in(&all, &mut rng);
        let y = common::gaussian_in(&all, &mut rng);
        let alg = &pair.algebra;
        for inv in [&pair.tau, &pair.sigma] {
            let lhs = inv.apply(alg, &bracket(&x, &y));
            let rhs = bracket(&inv.apply(alg, &x), &inv.apply(alg, &y));
            prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + x.norm() * y.norm()));
            prop_assert!((inv.apply(alg, &inv.apply(alg, &x)) - &x).norm() <= 1e-10 * (1.0 + x.norm()));
        }
        let ts = pair.tau.apply(alg, &pair.sigma.apply(alg, &x));
        let st = pair.sigma.apply(alg, &pair.tau.apply(alg, &x));
        prop_assert!((ts - st).norm() <= 1e-10 * (1.0 + x.norm()));
        prop_assert!(pair.bracket_relation_residuals().iter().all(|&r| r <= 1e-9));
    }

    #[test]
    fn laurent_evaluation_is_multiplicative(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        prop_assume!(re.hypot(im) > 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |low: i32, len: usize| {
            LaurentLoop::new(low, (0..len).map(|_| DMatrix::<f64>::from_fn(3, 3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0))).collect())
        };
        let a = draw(-2, 4);
        let b = draw(-1, 3);
        let z = C64::new(re, im);
        let prod = a.mul(&b).evaluate(z);
        let direct = a.evaluate(z) * b.evaluate(z);
        prop_assert!((prod - &direct).norm() <= 1e-12 * (1.0 + direct.norm()));
    }

    #[test]
    fn stencils_differentiate_polynomials_exactly(width in prop::sample::select(vec![3usize, 5, 7]), idx in 0usize..17, c in prop::collection::vec(-1.0f64..1.0, 7)) {
        let g = Grid::new(1, 1.0, 0.125).unwrap();
        let deg = width - 1;
        let p = |x: f64| c[..=deg].iter().rev().fold(0.0, |acc, &ci| acc * x + ci);
        let dp = |x: f64| (1..=deg).rev().fold(0.0, |acc, k| acc * x + k as f64 * c[k]);
        let valid = vec![true; g.len()];
        let s = stencil_width(&g, &valid, idx, 0, 1, width).unwrap();
        let est: f64 = s.terms.iter().map(|&(q, w)| w * p(g.coord(q))).sum();
        prop_assert!((est - dp(g.coord(idx))).abs() <= 1e-9);
    }

    #[test]
    fn grid_indices_round_trip(dims in 1usize..4, idx in 0usize..10_000) {
        let g = Grid::new(dims, 1.0, 0.25).unwrap();
        let i = idx % g.len();
        prop_assert_eq!(g.index(&g.multi(i)), i);
        prop_assert_eq!(g.point(i).len(), dims);
    }

    #[test]
    fn json_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = to_json(&v, false).unwrap();
        let back: f64 = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }

    #[test]
    fn run_config_round_trips(seed in any::<u64>(), lambdas in prop::collection::vec(0.01f64..10.0, 1..6), h in 1e-3f64..0.5, deg in 1usize..40) {
        let mut c = RunConfig::default();
        c.rng_seed = seed;
        c.lambdas = lambdas;
        c.grid.spacing = h;
        c.degree = deg;
        let text = c.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn octonion_right_multiplication_is_a_complex_structure(v in prop::collection::vec(-1.0f64..1.0, 7), w in prop::collection::vec(-1.0f64..1.0, 7)) {
        let u = DVector::from_vec(v);
        prop_assume!(u.norm() > 0.1);
        let u = u.normalize();
        let r = right_mul_matrix(&u);
        prop_assert!((&r + r.transpose()).norm() < 1e-12);
        prop_assert!((&r * &u).norm() < 1e-12);
        let w = DVector::from_vec(w);
        let w = &w - &u * u.dot(&w);
        prop_assert!((&r * (&r * &w) + &w).norm() < 1e-12);
    }
}
