use loopflat::cli::commands::verify_field;
use loopflat::cli::config::Tolerances;
use loopflat::cli::output::{to_json, FrameDump};
use loopflat::construct::{construct, ConstructOptions, SeedMode};
use loopflat::flows::DEFAULT_LAMBDAS;
use loopflat::geometry::{geometry_report, metric_scaling_complex, project, Target};
use loopflat::linalg::C64;
use loopflat::loops::extract_connection_unchecked;
use loopflat::obstruction::GeometryCase;
use loopflat::Error;

fn coarse() -> ConstructOptions {
    ConstructOptions { half_width: 0.5, spacing: 0.0625, ..Default::default() }
}

#[test]
fn sphere_report_on_small_grid() {
    let case = GeometryCase::parse("sphere:n=4,k=2").unwrap();
    let c = construct(&case, &coarse()).unwrap();
    assert_eq!(c.family.failures, 0);
    let f = c.family.field(&DEFAULT_LAMBDAS);
    let conn = extract_connection_unchecked(&f, &c.pair).unwrap();
    let r1 = geometry_report(&f, &conn, &case, &c.pair, 1.0).unwrap();
    assert!(r1.sff_max < 1e-10);
    assert!(r1.span.as_ref().unwrap().max_distance < 1e-10);
    assert!(r1.unit_residual < 1e-12);
    let r2 = geometry_report(&f, &conn, &case, &c.pair, 2.0).unwrap();
    assert!((r2.metric.mean - 1.5625).abs() < 1e-8);
    assert!(r2.sff_max > 1e-2, "the deformation leaves the great sphere");
    let k = r2.curvature.as_ref().unwrap();
    assert!((k.metric_mean - 0.64).abs() < 1e-4 && (k.connection.as_ref().unwrap().c - 0.64).abs() < 1e-4);
    assert!(r2.normal_curvature.unwrap().max < 1e-6);
}

#[test]
fn constant_gauge_leaves_samples_unchanged() {
    let case = GeometryCase::parse("sphere:n=4,k=2").unwrap();
    let c = construct(&case, &coarse()).unwrap();
    let f = c.family.field(&[1.0, 2.0]);
    // rotation in the (0,1) plane: fixes e_f and commutes with tau and sigma
    let mut h = nalgebra::DMatrix::identity(5, 5);
    let (s, co) = 0.7f64.sin_cos();
    h[(0, 0)] = co;
    h[(1, 1)] = co;
    h[(0, 1)] = -s;
    h[(1, 0)] = s;
    let g = f.gauge(&h);
    for lam in [1.0, 2.0] {
        let a = project(&f, &case, &c.pair, Target::Uk, lam).unwrap();
        let b = project(&g, &case, &c.pair, Target::Uk, lam).unwrap();
        let d = a.points.iter().zip(&b.points).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(d < 1e-14, "{d}");
    }
}

#[test]
fn complex_lambda_metric_is_bilinear_scaling() {
    let case = GeometryCase::parse("cpn-real:n=2").unwrap();
    let c = construct(&case, &coarse()).unwrap();
    let z = C64::from_polar(1.0, std::f64::consts::PI / 6.0);
    let m = metric_scaling_complex(&c.family, &case, z).unwrap();
    assert!((m.mean - 0.75).abs() < 1e-8 && m.rel_spread < 1e-8 && m.imag_max < 1e-10);
}

#[test]
fn lagrangian_diagnostics_cpn() {
    let case = GeometryCase::parse("cpn-real:n=2").unwrap();
    let c = construct(&case, &coarse()).unwrap();
    let f = c.family.field(&DEFAULT_LAMBDAS);
    let conn = extract_connection_unchecked(&f, &c.pair).unwrap();
    let r1 = geometry_report(&f, &conn, &case, &c.pair, 1.0).unwrap();
    let l1 = r1.lagrangian.unwrap();
    assert!(l1.totally_real_max < 1e-10 && l1.legendrian_max < 1e-10 && l1.symplectic_max < 1e-10);
    assert!(!l1.degenerate);
    let l2 = geometry_report(&f, &conn, &case, &c.pair, 2.0).unwrap().lagrangian.unwrap();
    assert!(l2.totally_real_max < 1e-9 && l2.symplectic_max < 1e-9);
    assert!(l2.legendrian_max > 1e-4, "horizontal only at lambda = 1");
}

#[test]
fn explicit_and_random_seeds() {
    let case = GeometryCase::parse("sphere:n=4,k=2").unwrap();
    let aligned = construct(&case, &coarse()).unwrap();
    let rows: Vec<Vec<f64>> = aligned.seed.generators.iter().map(|g| g.transpose().as_slice().to_vec()).collect();
    let explicit = construct(&case, &ConstructOptions { seed_mode: SeedMode::Explicit(rows), ..coarse() }).unwrap();
    assert!(explicit.alignment.is_none());
    let i = explicit.family.base_index + 5;
    let d = (explicit.family.frame(i, 2.0).unwrap() - aligned.family.frame(i, 2.0).unwrap()).norm();
    assert!(d < 1e-14);
    let random = construct(&case, &ConstructOptions { seed_mode: SeedMode::Random, ..coarse() }).unwrap();
    assert_eq!(random.seed.generators.len(), 2);
    let bad = construct(&case, &ConstructOptions { seed_mode: SeedMode::Explicit(vec![vec![1.0; 25]]), ..coarse() });
    assert!(matches!(bad, Err(Error::Config(_))));
}

#[test]
fn curve_seed_has_no_curvature_report() {
    let case = GeometryCase::parse("sphere:n=4,k=2").unwrap();
    let c = construct(&case, &ConstructOptions { dims: Some(1), ..coarse() }).unwrap();
    let f = c.family.field(&DEFAULT_LAMBDAS);
    let conn = extract_connection_unchecked(&f, &c.pair).unwrap();
    let r = geometry_report(&f, &conn, &case, &c.pair, 2.0).unwrap();
    assert!(r.curvature.is_none() && r.flatness.is_none());
    assert!((r.metric.mean - 1.5625).abs() < 1e-8);
}

#[test]
fn obstructed_case_needs_force() {
    let case = GeometryCase::parse("cpn-complex:n=2,k=1").unwrap();
    assert!(matches!(construct(&case, &coarse()), Err(Error::Obstruction { dim: 2, rank: 1 })));
    let forced = construct(&case, &ConstructOptions { force: true, ..coarse() }).unwrap();
    assert!(forced.truncated && forced.seed.generators.len() == 1);
    let nc = GeometryCase::parse("rhn:n=4,k=2").unwrap();
    assert!(matches!(construct(&nc, &coarse()), Err(Error::Config(_))));
}

#[test]
fn dump_round_trip_and_battery() {
    let case = GeometryCase::parse("g2").unwrap();
    let c = construct(&case, &coarse()).unwrap();
    let f = c.family.field(&DEFAULT_LAMBDAS);
    let tol = Tolerances::default();
    let text = to_json(&FrameDump::from_field("g2", &f, &tol), false).unwrap();
    let back = FrameDump::parse(&text).unwrap().to_field();
    for (a, b) in f.frames.iter().flatten().zip(back.frames.iter().flatten()) {
        assert_eq!(a, b);
    }
    let rep = verify_field("g2", &back, &tol).unwrap();
    assert!(rep.pass, "{:?}", rep.checks);
}
