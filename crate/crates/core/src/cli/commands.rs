use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::cartan_align::AlignMode;
use crate::construct::{construct, Construction};
use crate::error::{Error, Result};
use crate::flows::{FrameField, DEFAULT_LAMBDAS};
use crate::geometry::{geometry_report, project, GeometryReport, Target};
use crate::loops::extract_connection_unchecked;
use crate::loops::mc::{mc_residuals, McResiduals, EQUATION_NAMES};
use crate::obstruction::{full_table, verdict, GeometryCase, VerdictRow};

use super::config::{Format, RunConfig, Tolerances};
use super::output::{fmt17, obj_mesh, samples_csv, to_json, FrameDump};
use super::{EXIT_OK, EXIT_VERIFY};

/// Stdout, where a closed reader (`| head`) ends output quietly.
fn emit(text: &str) -> Result<()> {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io(e)),
        _ => Ok(()),
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn opt(v: Option<impl ToString>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn classify_table(rows: &[VerdictRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {:>4} {:>4} {:>5} {:>6} {:>8} {:>5}  method", "case", "dim", "rank", "riem", "exists", "expected", "match");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<22} {:>4} {:>4} {:>5} {:>6} {:>8} {:>5}  {}",
            r.key,
            opt(r.dim_p_prime),
            opt(r.rank),
            opt(r.riemannian_secondary),
            opt(r.exists),
            opt(r.expected),
            opt(r.matches()),
            r.method
        );
    }
    s
}

fn classify_csv(rows: &[VerdictRow]) -> String {
    let mut s = String::from("case,reality,dim_p_prime,rank,riemannian_secondary,exists,expected,match,method\n");
    for r in rows {
        let _ = writeln!(
            s,
            "\"{}\",{:?},{},{},{},{},{},{},{}",
            r.key,
            r.reality,
            opt(r.dim_p_prime),
            opt(r.rank),
            opt(r.riemannian_secondary),
            opt(r.exists),
            opt(r.expected),
            opt(r.matches()),
            r.method
        );
    }
    s
}

pub fn classify(cfg: &RunConfig, single: Option<&str>) -> Result<i32> {
    let rows = match single {
        Some(key) => {
            let case = GeometryCase::parse(key).map_err(|e| Error::Config(e.to_string()))?;
            vec![verdict(&case, cfg.rng_seed)?]
        }
        None => full_table(cfg.rng_seed)?,
    };
    let (text, ext) = match cfg.output.format {
        Format::Json => (to_json(&rows, true)? + "\n", "json"),
        Format::Csv => (classify_csv(&rows), "csv"),
        Format::Table => (classify_table(&rows), "txt"),
    };
    emit(&text)?;
    if let Some(dir) = &cfg.output.dir {
        write_file(Path::new(dir), &format!("classify.{ext}"), &text)?;
    }
    let bad: Vec<&VerdictRow> = rows.iter().filter(|r| r.matches() == Some(false)).collect();
    for r in &bad {
        eprintln!("mismatch: {} exists={} expected={}", r.key, opt(r.exists), opt(r.expected));
    }
    Ok(if bad.is_empty() { EXIT_OK } else { EXIT_VERIFY })
}

#[derive(Serialize)]
struct AlignmentSummary {
    mode: AlignMode,
    steps: usize,
    projection_rank: usize,
    smallest_singular: f64,
    restarts: usize,
}

#[derive(Serialize)]
struct LiftSummary {
    failures: usize,
    max_residual: f64,
    valid_points: usize,
    masked_fraction: f64,
    orthogonality: f64,
}

#[derive(Serialize)]
struct ConnectionSummary {
    fit_residual: f64,
    off_pattern: f64,
    form_scale: f64,
}

#[derive(Serialize)]
struct ConstructReport<'a> {
    config: &'a RunConfig,
    case: String,
    truncated: bool,
    alignment: Option<AlignmentSummary>,
    /// Row-major seed generators.
    generators: Vec<Vec<f64>>,
    lift: LiftSummary,
    connection: ConnectionSummary,
    maurer_cartan: McResiduals,
    reports: Vec<GeometryReport>,
}

/// Requested λ values plus the default fit samples, sorted, without
/// duplicates.
pub fn sample_lambdas(requested: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = requested.iter().chain(DEFAULT_LAMBDAS.iter()).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    all
}

fn construct_table(reports: &[GeometryReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>8} {:>12} {:>10} {:>12} {:>12} {:>10} {:>10}  failed flags", "lambda", "metric", "spread", "K conn", "K metric", "sff", "normal");
    for r in reports {
        let (kc, km) = match &r.curvature {
            Some(c) => (c.connection.as_ref().map_or("-".into(), |x| format!("{:.6}", x.c)), format!("{:.6}", c.metric_mean)),
            None => ("-".into(), "-".into()),
        };
        let failed: Vec<&str> = r.flags.iter().filter(|(_, &v)| !v).map(|(k, _)| k.as_str()).collect();
        let _ = writeln!(
            s,
            "{:>8} {:>12.8} {:>10.2e} {:>12} {:>12} {:>10.2e} {:>10}  {}",
            r.lambda,
            r.metric.mean,
            r.metric.rel_spread,
            kc,
            km,
            r.sff_max,
            r.normal_curvature.map_or("-".into(), |n| format!("{:.2e}", n.max)),
            if failed.is_empty() { "none".to_string() } else { failed.join(" ") }
        );
    }
    s
}

fn construct_csv(reports: &[GeometryReport]) -> String {
    let mut s = String::from("lambda,metric_mean,metric_spread,metric_expected,curvature_connection,curvature_metric,sff_max,masked_fraction\n");
    for r in reports {
        let c = r.curvature.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt17(r.lambda),
            fmt17(r.metric.mean),
            fmt17(r.metric.rel_spread),
            fmt17(r.metric.expected),
            c.and_then(|c| c.connection.as_ref()).map_or(String::new(), |x| fmt17(x.c)),
            c.map_or(String::new(), |c| fmt17(c.metric_mean)),
            fmt17(r.sff_max),
            fmt17(r.masked_fraction)
        );
    }
    s
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn construct_cmd(cfg: &RunConfig) -> Result<i32> {
    let case = GeometryCase::parse(&cfg.case).map_err(|e| Error::Config(e.to_string()))?;
    let Construction { pair, seed, alignment, family, truncated, .. } = construct(&case, &cfg.construct_options())?;
    if family.valid.iter().all(|v| !v) {
        return Err(Error::EmptyDomain);
    }
    let field = family.field(&sample_lambdas(&cfg.lambdas));
    let conn = extract_connection_unchecked(&field, &pair)?;
    let reports = cfg.lambdas.iter().map(|&l| geometry_report(&field, &conn, &case, &pair, l)).collect::<Result<Vec<_>>>()?;
    let report = ConstructReport {
        config: cfg,
        case: case.key.clone(),
        truncated,
        alignment: alignment.map(|a| AlignmentSummary {
            mode: a.mode,
            steps: a.steps,
            projection_rank: a.projection_rank,
            smallest_singular: a.smallest_singular,
            restarts: a.restarts,
        }),
        generators: seed.generators.iter().map(row_major).collect(),
        lift: LiftSummary {
            failures: family.failures,
            max_residual: family.max_residual(),
            valid_points: field.valid_count(),
            masked_fraction: field.masked_fraction(),
            orthogonality: field.orthogonality_residual(),
        },
        connection: ConnectionSummary {
            fit_residual: conn.max_fit_residual(),
            off_pattern: conn.max_off_pattern(),
            form_scale: conn.form_scale(),
        },
        maurer_cartan: mc_residuals(&conn),
        reports,
    };
    let json = to_json(&report, true)? + "\n";
    match cfg.output.format {
        Format::Json => emit(&json)?,
        Format::Csv => emit(&construct_csv(&report.reports))?,
        Format::Table => emit(&construct_table(&report.reports))?,
    }
    if let Some(dir) = &cfg.output.dir {
        let dir = Path::new(dir);
        write_file(dir, "report.json", &json)?;
        let samples = cfg.lambdas.iter().map(|&l| project(&field, &case, &pair, Target::Uk, l)).collect::<Result<Vec<_>>>()?;
        if cfg.output.samples_csv {
            write_file(dir, "samples.csv", &samples_csv(&samples))?;
        }
        if cfg.output.frame_dump {
            write_file(dir, "frames.json", &to_json(&FrameDump::from_field(&case.key, &field, &cfg.tolerances), false)?)?;
        }
        if cfg.output.obj && field.grid.dims == 2 {
            for s in &samples {
                write_file(dir, &format!("mesh_lambda_{}.obj", s.lambda), &obj_mesh(s)?)?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub description: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub case: String,
    pub lambdas: Vec<f64>,
    pub spacing: f64,
    pub valid_points: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub const MC_CHECK_NAMES: [&str; 6] = ["mc_first", "mc_second", "mc_third", "mc_fourth", "mc_last", "mc_reduced"];

fn check(name: &str, description: &str, value: f64, tolerance: f64) -> Check {
    Check { name: name.into(), description: description.into(), value, tolerance, pass: value <= tolerance }
}

/// Invariant battery on a frame field.
pub fn verify_field(case: &str, field: &FrameField, tol: &Tolerances) -> Result<VerifyReport> {
    let case_parsed = GeometryCase::parse(case).map_err(|e| Error::Parse(e.to_string()))?;
    let pair = case_parsed.build()?;
    if field.size() != pair.algebra.ambient_dim {
        return Err(Error::Parse(format!("frame size {} does not fit case {case}", field.size())));
    }
    let conn = extract_connection_unchecked(field, &pair)?;
    let mc = mc_residuals(&conn);
    let h2 = field.grid.spacing.powi(2);
    let mut checks = vec![
        check("orthogonality", "max |F^T F - I|", field.orthogonality_residual(), tol.orthogonality),
        check("lambda_fit", "relative residual of the (-1,1) lambda fit", conn.max_fit_residual(), tol.fit),
        check("off_pattern", "coefficient mass outside the block pattern", conn.max_off_pattern(), tol.off_pattern),
    ];
    for (k, e) in mc.equations.iter().enumerate() {
        checks.push(check(MC_CHECK_NAMES[k], EQUATION_NAMES[k], e.max, tol.mc_per_h2 * h2));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        case: case.into(),
        lambdas: field.lambdas.clone(),
        spacing: field.grid.spacing,
        valid_points: field.valid_count(),
        checks,
        pass,
    })
}

pub fn verify_cmd(path: &Path, cfg: &RunConfig, tol_override: Option<&Tolerances>) -> Result<i32> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let dump = FrameDump::parse(&text)?;
    let tol = tol_override.unwrap_or(&dump.tolerances);
    let report = verify_field(&dump.case, &dump.to_field(), tol)?;
    let text = match cfg.output.format {
        Format::Json => to_json(&report, true)? + "\n",
        Format::Csv => {
            let mut s = String::from("check,value,tolerance,pass\n");
            for c in &report.checks {
                let _ = writeln!(s, "{},{},{},{}", c.name, fmt17(c.value), fmt17(c.tolerance), c.pass);
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for c in &report.checks {
                let _ = writeln!(s, "{:<14} {:>10.3e} <= {:>10.3e}  {}", c.name, c.value, c.tolerance, if c.pass { "pass" } else { "FAIL" });
            }
            let _ = writeln!(s, "overall: {}", if report.pass { "pass" } else { "FAIL" });
            s
        }
    };
    emit(&text)?;
    if let Some(dir) = &cfg.output.dir {
        write_file(Path::new(dir), "verify.json", &(to_json(&report, true)? + "\n"))?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
}
