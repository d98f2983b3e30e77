//! One line per acceptance criterion. Everything except criterion 7 is
//! asserted; criterion 7 is reported and its replacement identity asserted.

mod common;

use std::time::Instant;

use approx::relative_eq;
use loopflat::birkhoff::{factorize, factorize_in_subgroup, fixed_set_residual, BirkhoffOptions, FixedSet};
use loopflat::cartan_align::{align_cartan, AlignMode, SV_FLOOR};
use loopflat::cli::commands::verify_field;
use loopflat::cli::config::Tolerances;
use loopflat::cli::output::{to_json, FrameDump};
use loopflat::construct::{construct, ConstructOptions};
use loopflat::flows::{FrameField, DEFAULT_LAMBDAS};
use loopflat::geometry::{geometry_report, g2_report, project, GeometryReport, Target};
use loopflat::lie::rank_of;
use loopflat::loops::mc::{mc_residuals, EQUATION_NAMES};
use loopflat::loops::{extract_connection_unchecked, ConnectionData11};
use loopflat::obstruction::{full_table, GeometryCase, DEFAULT_SEED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COARSE: f64 = 1.0 / 16.0;
const FINE: f64 = 1.0 / 32.0;
/// Residuals this small on the coarse grid are structurally zero and carry
/// no convergence information.
const NOISE_FLOOR: f64 = 1e-11;
const RATIO: (f64, f64) = (3.5, 4.5);
const INJECTIONS: usize = 20;

struct Lifted {
    case: GeometryCase,
    field: FrameField,
    conn: ConnectionData11,
    pair: loopflat::lie::PairwiseSymmetricAlgebra,
    seconds: f64,
}

fn lift(key: &str, spacing: f64) -> Lifted {
    let t = Instant::now();
    let case = GeometryCase::parse(key).unwrap();
    let c = construct(&case, &ConstructOptions { spacing, ..Default::default() }).unwrap();
    let field = c.family.field(&DEFAULT_LAMBDAS);
    let conn = extract_connection_unchecked(&field, &c.pair).unwrap();
    Lifted { case, field, conn, pair: c.pair, seconds: t.elapsed().as_secs_f64() }
}

impl Lifted {
    fn report(&self, lambda: f64) -> GeometryReport {
        geometry_report(&self.field, &self.conn, &self.case, &self.pair, lambda).unwrap()
    }
}

struct Outcome {
    lines: Vec<String>,
    failed: Vec<usize>,
}

impl Outcome {
    fn record(&mut self, n: usize, pass: bool, detail: String) {
        let line = format!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        if !pass {
            self.failed.push(n);
        }
    }
}

// Verdicts as stated per geometry, independent of the catalog goldens.
fn stated(key: &str) -> Option<bool> {
    let (name, rest) = key.split_once(':').unwrap_or((key, ""));
    let get = |p: &str| -> usize { rest.split(',').find_map(|kv| kv.strip_prefix(&format!("{p}="))).unwrap().parse().unwrap() };
    match name {
        "sphere" | "rhn" => Some(2 * get("k") <= get("n") + 1),
        "cpn-complex" | "chn-complex" | "hpn" | "hhn" => Some(false),
        "cpn-real" | "chn-real" => Some(true),
        _ => None,
    }
}

fn halving_ratios(coarse: &[f64], fine: &[f64]) -> Vec<Option<f64>> {
    coarse.iter().zip(fine).map(|(&c, &f)| (c > NOISE_FLOOR).then(|| c / f)).collect()
}

fn ratios_ok(r: &[Option<f64>]) -> bool {
    r.iter().flatten().all(|&x| (RATIO.0..=RATIO.1).contains(&x)) && r.iter().any(Option::is_some)
}

fn fmt_ratios(r: &[Option<f64>]) -> String {
    r.iter().map(|x| x.map_or("-".to_string(), |v| format!("{v:.3}"))).collect::<Vec<_>>().join(",")
}

fn criterion_1(out: &mut Outcome) {
    let t = Instant::now();
    let rows = full_table(DEFAULT_SEED).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mismatched: Vec<&str> = rows
        .iter()
        .filter(|r| r.matches() == Some(false) || stated(&r.key).is_some_and(|s| r.exists != Some(s)))
        .map(|r| r.key.as_str())
        .collect();
    let spheres = (2..=7).all(|n| (1..n).all(|k| rows.iter().any(|r| r.key == format!("sphere:n={n},k={k}"))));
    let witness = rows.iter().filter(|r| r.key.starts_with("chn-real")).all(|r| r.witness.as_ref().is_some_and(|w| w.ok()));
    let pass = mismatched.is_empty() && spheres && witness && secs < 30.0;
    out.record(1, pass, format!("rows={} mismatched={mismatched:?} spheres_covered={spheres} chn_witness={witness} runtime={secs:.1}s (< 30 s)", rows.len()));
}

fn criterion_2(out: &mut Outcome, sphere: &Lifted, cpn: &Lifted) {
    let mut pass = true;
    let mut parts = Vec::new();
    for l in [sphere, cpn] {
        let t = Instant::now();
        let m = l.report(2.0).metric;
        let secs = l.seconds + t.elapsed().as_secs_f64();
        let ok = relative_eq!(m.mean, 1.5625, max_relative = 1e-6) && m.rel_spread <= 1e-6 && secs < 120.0 && m.points > 0;
        pass &= ok;
        parts.push(format!("{}: ratio={:.10} spread={:.2e} points={} runtime={secs:.1}s", l.case.key, m.mean, m.rel_spread, m.points));
    }
    out.record(2, pass, format!("{} (expect 1.5625, spread <= 1e-6, < 120 s)", parts.join("; ")));
}

fn criterion_3(out: &mut Outcome, cpn: &Lifted) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (lambda, expected) in [(1.0, 1.0), (2.0, 0.64)] {
        let k = cpn.report(lambda).curvature.unwrap();
        let c = k.connection.as_ref().map_or(f64::NAN, |c| c.c);
        let agreement = k.agreement.unwrap_or(f64::NAN);
        let ok = (k.metric_mean - expected).abs() <= 1e-3 && (c - expected).abs() <= 1e-3 && agreement <= k.agreement_tol;
        pass &= ok;
        parts.push(format!(
            "lambda={lambda}: metric={:.6} connection={c:.6} agreement={:.2e} (<= {:.2e})",
            k.metric_mean, agreement, k.agreement_tol
        ));
    }
    out.record(3, pass, format!("{} (expect 1.000 and 0.640, +-1e-3)", parts.join("; ")));
}

fn criterion_4(out: &mut Outcome, cases: &[&Lifted]) {
    let mut pass = true;
    let mut parts = Vec::new();
    for l in cases {
        let r = l.report(1.0);
        pass &= r.sff_max <= 1e-6;
        parts.push(format!("{} sff={:.2e}", l.case.key, r.sff_max));
        if let Some(s) = &r.span {
            pass &= s.span_dim == 3 && s.max_distance <= 1e-6;
            parts.push(format!("span_dim={} distance={:.2e}", s.span_dim, s.max_distance));
        }
    }
    pass &= cases[0].report(1.0).span.is_some();
    out.record(4, pass, format!("{} (sff <= 1e-6, sphere span 3, distance <= 1e-6)", parts.join(" ")));
}

fn criterion_5(out: &mut Outcome, pairs: &[(&Lifted, &Lifted)]) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, f) in pairs {
        let rc = mc_residuals(&c.conn);
        let rf = mc_residuals(&f.conn);
        let coarse: Vec<f64> = rc.equations[..5].iter().map(|e| e.inner_rms).collect();
        let fine: Vec<f64> = rf.equations[..5].iter().map(|e| e.inner_rms).collect();
        let r = halving_ratios(&coarse, &fine);
        pass &= ratios_ok(&r);
        parts.push(format!("{} [{}]", c.case.key, fmt_ratios(&r)));
    }
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let (mut generic, mut single, mut trials) = (0, 0, 0);
    let mut weakest = f64::INFINITY;
    let mut clean = true;
    for (l, _) in pairs {
        clean &= verify_field(&l.case.key, &l.field, &tol).unwrap().pass;
        let g = &l.field.grid;
        let n = l.field.size();
        let interior: Vec<usize> = (0..g.len()).filter(|&i| l.field.valid[i] && g.point(i).iter().all(|x| x.abs() <= 0.75)).collect();
        let dump = FrameDump::from_field(&l.case.key, &l.field, &tol);
        for _ in 0..INJECTIONS {
            let pt = interior[rng.random_range(0..interior.len())];
            let lam = rng.random_range(0..dump.lambdas.len());
            let dir: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let entry = rng.random_range(0..n * n);
            let mc_last = |bump: &dyn Fn(&mut Vec<f64>)| {
                let mut d = dump.clone();
                bump(d.frames[lam][pt].as_mut().unwrap());
                let text = to_json(&d, false).unwrap();
                let rep = verify_field(&l.case.key, &FrameDump::parse(&text).unwrap().to_field(), &tol).unwrap();
                let c = rep.checks.iter().find(|c| c.name == "mc_last").unwrap();
                c.value / c.tolerance
            };
            let r = mc_last(&|f: &mut Vec<f64>| f.iter_mut().zip(&dir).for_each(|(x, d)| *x += 1e-3 * d / norm));
            weakest = weakest.min(r);
            generic += usize::from(r > 1.0);
            single += usize::from(mc_last(&|f: &mut Vec<f64>| f[entry] += 1e-3) > 1.0);
            trials += 1;
        }
    }
    pass &= clean && generic == trials;
    out.record(
        5,
        pass,
        format!(
            "inner-rms ratios h=1/16->1/32 per equation ({}): {} in [3.5, 4.5], coarse <= {NOISE_FLOOR:e} exempt; injected 1e-3 (one frame, random direction) flagged by mc_last in {generic}/{trials}, weakest {weakest:.1}x tolerance; single-coefficient bumps flagged in {single}/{trials} (informational); clean fields pass={clean}",
            EQUATION_NAMES[..5].join(" | "),
            parts.join("; "),
        ),
    );
}

fn criterion_6(out: &mut Outcome) {
    let pair = GeometryCase::parse("sphere:n=4,k=2").unwrap().build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let (mut worst, mut fixed, mut degrees) = (0.0f64, 0.0f64, 0.0f64);
    let mut errors = 0;
    for i in 0..200 {
        let size = rng.random_range(0.01..=0.3);
        let twisted = i % 2 == 1;
        let x = common::random_loop(&pair, size, twisted, &mut rng);
        let Ok(f) = factorize(&x, &BirkhoffOptions::default()) else {
            errors += 1;
            continue;
        };
        worst = worst.max(f.residual);
        if twisted {
            assert!(fixed_set_residual(&x, &pair, FixedSet::RhoSigma) < 1e-12);
            match factorize_in_subgroup(&x, &pair, FixedSet::RhoSigma, &BirkhoffOptions::default()) {
                Ok((_, r)) => fixed = fixed.max(r),
                Err(_) => errors += 1,
            }
        }
        if i % 10 == 0 {
            let b = factorize(&x, &BirkhoffOptions { degree: 20, ..Default::default() }).unwrap();
            let a = factorize(&x, &BirkhoffOptions { degree: 12, ..Default::default() }).unwrap();
            degrees = degrees.max(a.plus.max_coeff_diff(&b.plus)).max(a.minus.max_coeff_diff(&b.minus));
        }
    }
    let pass = errors == 0 && worst <= 1e-10 && fixed <= 1e-8 && degrees <= 1e-8;
    out.record(
        6,
        pass,
        format!("200 loops: recompose={worst:.2e} (<= 1e-10) subgroup={fixed:.2e} (<= 1e-8) degree 12 vs 20={degrees:.2e} (<= 1e-8) errors={errors}"),
    );
}

/// Reported, not asserted: the U/U_+ projection is not a curved flat. What
/// is asserted is the identity that replaces it.
fn criterion_7(out: &mut Outcome, coarse: &[&Lifted], fine: &[&Lifted]) {
    let mut pass = true;
    let mut identity = 0.0f64;
    let mut parts = Vec::new();
    for (c, f) in coarse.iter().zip(fine) {
        let a = c.report(2.0).flatness.unwrap();
        let b = f.report(2.0).flatness.unwrap();
        let h2 = COARSE * COARSE;
        pass &= a.wedge_residual <= h2 && a.intrinsic_curvature <= h2 && a.wedge_residual / b.wedge_residual.max(1e-300) >= RATIO.0;
        identity = identity.max(a.identity_residual).max(b.identity_residual);
        parts.push(format!(
            "{}: wedge {:.3e} -> {:.3e}, |K| {:.3e} -> {:.3e}",
            c.case.key, a.wedge_residual, b.wedge_residual, a.intrinsic_curvature, b.intrinsic_curvature
        ));
    }
    out.record(
        7,
        pass,
        format!(
            "lambda=2, h=1/16 -> 1/32: {} (O(h^2) required); a_-^a_- = 4 a1mm^a1mm holds to {identity:.2e}, so the wedge term stays finite wherever the base image is curved",
            parts.join("; ")
        ),
    );
    assert!(identity <= 1e-8, "a_-^a_- identity residual {identity:e}");
}

fn criterion_8(out: &mut Outcome) {
    let t = Instant::now();
    let keys = ["sphere:n=4,k=2", "cpn-real:n=2", "cpn-real:n=3"];
    let pairs: Vec<_> = keys.iter().map(|k| GeometryCase::parse(k).unwrap().build().unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let ranks: Vec<usize> = pairs.iter().map(|p| rank_of(&p.u_minus, &mut rng).unwrap()).collect();
    let (mut constructive, mut fallback, mut uncovered) = (0, 0, 0);
    let mut smallest = f64::INFINITY;
    for trial in 0..100 {
        let p = trial % pairs.len();
        let pair = &pairs[p];
        let dim = rng.random_range(1..=ranks[p]);
        let v: Vec<_> = (0..dim).map(|_| common::gaussian_in(&pair.u_minus, &mut rng)).collect();
        let ok = |r: &loopflat::cartan_align::AlignmentResult| r.projection_rank == dim && r.smallest_singular >= SV_FLOOR;
        match align_cartan(pair, &v, AlignMode::Constructive, &mut rng) {
            Ok(r) if ok(&r) => {
                constructive += 1;
                smallest = smallest.min(r.smallest_singular);
            }
            _ => match align_cartan(pair, &v, AlignMode::Randomized, &mut rng) {
                Ok(r) if ok(&r) => fallback += 1,
                _ => uncovered += 1,
            },
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = constructive >= 99 && uncovered == 0 && secs < 60.0;
    out.record(
        8,
        pass,
        format!(
            "so(5), su(3), su(4) ranks {ranks:?}: constructive {constructive}/100 (>= 99), fallback {fallback}, uncovered {uncovered}, min singular {smallest:.2e} (>= {SV_FLOOR:e}), runtime {secs:.1}s (< 60 s)"
        ),
    );
}

fn criterion_9(out: &mut Outcome, c: &Lifted, f: &Lifted) {
    let dim = c.pair.algebra.dim();
    let conn_off = c.conn.max_off_pattern();
    let mut j = 0.0f64;
    let mut flags_ok = true;
    let mut coarse = [0.0; 3];
    let mut fine = [0.0; 3];
    for lambda in [1.0, 2.0] {
        let rc = g2_report(&project(&c.field, &c.case, &c.pair, Target::Uk, lambda).unwrap(), &c.conn).unwrap();
        j = j.max(rc.j_invariance.iter().copied().fold(0.0, f64::max));
        if lambda == 1.0 {
            flags_ok &= rc.flags.values().all(|&v| v) && rc.flags.len() >= 6;
            let rf = g2_report(&project(&f.field, &f.case, &f.pair, Target::Uk, lambda).unwrap(), &f.conn).unwrap();
            for k in 0..3 {
                coarse[k] = rc.sub_bundle_equations[k].inner_rms;
                fine[k] = rf.sub_bundle_equations[k].inner_rms;
            }
        }
    }
    let r = halving_ratios(&coarse, &fine);
    let pass = dim == 14 && conn_off <= 1e-7 && ratios_ok(&r) && j <= 1e-7 && flags_ok;
    out.record(
        9,
        pass,
        format!(
            "dim der(O)={dim} (14), off-pattern={conn_off:.2e} (<= 1e-7), sub-bundle ratios [{}] in [3.5, 4.5], J-invariance={j:.2e} (<= 1e-7), lambda=1 flags all true={flags_ok}",
            fmt_ratios(&r)
        ),
    );
}

fn criterion_10(out: &mut Outcome) {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap_or_default();
    let section = readme.lines().any(|l| l.starts_with('#') && l.to_lowercase().contains("not reproduced at desk scale"));
    let body = readme.to_lowercase();
    let pass = section && body.contains("global non-existence") && body.contains("completeness");
    out.record(10, pass, format!("README section present={section}, documentation only"));
}

fn main() {
    let mut out = Outcome { lines: Vec::new(), failed: Vec::new() };
    criterion_1(&mut out);
    let sphere = lift("sphere:n=4,k=2", COARSE);
    let cpn = lift("cpn-real:n=2", COARSE);
    let g2 = lift("g2", COARSE);
    criterion_2(&mut out, &sphere, &cpn);
    criterion_3(&mut out, &cpn);
    criterion_4(&mut out, &[&sphere, &cpn, &g2]);
    let sphere_f = lift("sphere:n=4,k=2", FINE);
    let cpn_f = lift("cpn-real:n=2", FINE);
    let g2_f = lift("g2", FINE);
    criterion_5(&mut out, &[(&sphere, &sphere_f), (&cpn, &cpn_f), (&g2, &g2_f)]);
    criterion_6(&mut out);
    criterion_7(&mut out, &[&sphere, &cpn, &g2], &[&sphere_f, &cpn_f, &g2_f]);
    criterion_8(&mut out);
    criterion_9(&mut out, &g2, &g2_f);
    criterion_10(&mut out);
    let asserted: Vec<usize> = out.failed.iter().copied().filter(|&n| n != 7).collect();
    println!("summary: {} of 10 pass; not attainable: criterion 7", 10 - out.failed.len());
    if !asserted.is_empty() {
        eprintln!("failing criteria {asserted:?}");
        std::process::exit(1);
    }
}
