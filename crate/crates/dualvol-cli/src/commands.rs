//! CLI surface: compute, check, john, search, curve.
//!
//! Exit codes: 0 success (or inequality holds), 2 input/config error,
//! 3 evaluation error, 4 violation candidate.

use crate::manifest;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dualvol::bodies::ConvexBody;
use dualvol::error::Error;
use dualvol::functionals::{
    entropy_constants, omega, DualVolumeResult, Formulation, GaussianProfile, LayerCakeGrid,
    SphereProfile,
};
use dualvol::john::{contact_points, john_ellipsoid, to_john_position, CONTACT_TOL};
use dualvol::numeric::sphere_surface;
use dualvol::quad::{sphere_rule, GaussianSample, Scheme, SphereRule};
use dualvol::verify::{self, SearchConfig, Verdict};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "dualvol",
    version,
    about = "Dual quermassintegrals of origin-symmetric convex bodies: \
             compute, check inequalities, John-position, search"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Ṽ_q and V̄_q for a list of exponents
    Compute(ComputeArgs),
    /// Check one inequality instance (bm, logconcave, rvip, ss-tail)
    Check(CheckArgs),
    /// Move a body to John position; write body, ellipsoid, and contacts
    John(JohnArgs),
    /// Run a counterexample search from a JSON config
    Search(SearchArgs),
    /// Sweep q and tabulate V̄_q(K) against V̄_q(B∞ⁿ)
    Curve(CurveArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormulationArg {
    Sphere,
    Gaussian,
    Layercake,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RuleOpts {
    /// Quadrature scheme (default: trapezoid for n=2, fibonacci for n=3,
    /// mc-antipodal for n≥4)
    #[arg(long)]
    scheme: Option<String>,
    /// Rule size: half-circle angles (trapezoid) or total nodes (others)
    #[arg(long)]
    rule_size: Option<usize>,
    /// Gaussian sample size for gaussian/layercake formulations
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
    /// Master seed for stochastic rules and samples
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RuleOpts {
    fn build_rule(&self, dim: usize) -> Result<SphereRule, Error> {
        match (&self.scheme, self.rule_size) {
            (None, None) => SphereRule::default_for_dim(dim, self.seed),
            (scheme, size) => {
                let scheme = match scheme {
                    Some(s) => s.parse::<Scheme>()?,
                    None => match dim {
                        2 => Scheme::Trapezoid,
                        3 => Scheme::Fibonacci,
                        _ => Scheme::McAntipodal,
                    },
                };
                let size = size.unwrap_or(match dim {
                    2 => 4096,
                    3 => 20_000,
                    _ => 100_000,
                });
                sphere_rule(dim, scheme, size, self.seed)
            }
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    /// Body file (JSON)
    #[arg(long)]
    body: PathBuf,
    /// Comma-separated list of exponents
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FormulationArg::Sphere)]
    formulation: FormulationArg,
    #[command(flatten)]
    rule: RuleOpts,
    /// Output directory (report files + manifest)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct CheckArgs {
    /// Inequality to check
    #[arg(value_parser = ["bm", "logconcave", "rvip", "ss-tail"])]
    name: String,
    /// First (or only) body file
    #[arg(long, alias = "body")]
    k: PathBuf,
    /// Second body file (bm, logconcave)
    #[arg(long)]
    l: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    q: Vec<f64>,
    /// Interpolation weight (logconcave)
    #[arg(long)]
    lambda: Option<f64>,
    /// Tail thresholds (ss-tail)
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    /// Move the body to John position first (rvip, ss-tail)
    #[arg(long, default_value_t = false)]
    auto_john: bool,
    #[command(flatten)]
    rule: RuleOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct JohnArgs {
    #[arg(long)]
    body: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    /// Search configuration (JSON, see SearchConfig)
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    body: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    q_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    q_max: f64,
    #[arg(long, default_value_t = 0.25)]
    step: f64,
    #[arg(long, default_value_t = false)]
    auto_john: bool,
    #[command(flatten)]
    rule: RuleOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::Json(_) | Error::Io(_) | Error::BadScheme(_) => 2,
        _ => 3,
    }
}

pub fn run(cli: Cli) -> i32 {
    let started = manifest::now_unix();
    let timer = Instant::now();
    let outcome = match cli.command {
        Command::Compute(args) => cmd_compute(args, started, timer),
        Command::Check(args) => cmd_check(args, started, timer),
        Command::John(args) => cmd_john(args, started, timer),
        Command::Search(args) => cmd_search(args, started, timer),
        Command::Curve(args) => cmd_curve(args, started, timer),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn load_body(path: &Path) -> Result<ConvexBody, Error> {
    ConvexBody::load(path)
}

/// V̄_q from an implied Ṽ_q (q ≠ 0).
fn vbar_from(result: &DualVolumeResult, n: usize) -> (f64, f64) {
    let v = (result.value / omega(n)).powf(1.0 / result.q);
    let se = if result.value > 0.0 {
        v * result.stderr / (result.q.abs() * result.value)
    } else {
        f64::NAN
    };
    (v, se)
}

struct ComputeRow {
    q: f64,
    value: f64,
    vbar: f64,
    stderr: f64,
    formulation: Formulation,
}

fn cmd_compute(args: ComputeArgs, started: u64, timer: Instant) -> Result<i32, Error> {
    let body = load_body(&args.body)?;
    let n = body.dim();
    let mut rows: Vec<ComputeRow> = Vec::new();
    let rule_meta;
    match args.formulation {
        FormulationArg::Sphere => {
            let rule = args.rule.build_rule(n)?;
            rule_meta = rule.meta();
            let profile = SphereProfile::new(&body, &rule)?;
            for &q in &args.q {
                let vq = profile.dual_querm(q);
                let vbar = profile.normalized_dual_querm(q);
                rows.push(ComputeRow {
                    q,
                    value: vq.value,
                    vbar: vbar.value,
                    stderr: vq.stderr,
                    formulation: Formulation::Sphere,
                });
            }
        }
        FormulationArg::Gaussian | FormulationArg::Layercake => {
            let sample = GaussianSample::new(n, args.rule.samples, args.rule.seed);
            rule_meta = sample.meta();
            let profile = GaussianProfile::new(&body, &sample)?;
            let grid = LayerCakeGrid::default();
            for &q in &args.q {
                if q == 0.0 {
                    // entropy branch through E_{γn} = c₀E + c₁
                    let e_gauss = profile.entropy();
                    let (c0, c1) = entropy_constants(n);
                    let e_sphere = (e_gauss.value - c1) / c0;
                    let vbar = (e_sphere / sphere_surface(n)).exp();
                    rows.push(ComputeRow {
                        q,
                        value: omega(n),
                        vbar,
                        stderr: vbar * e_gauss.stderr / (c0 * sphere_surface(n)),
                        formulation: Formulation::Gaussian,
                    });
                    continue;
                }
                let vq = match args.formulation {
                    FormulationArg::Gaussian => profile.dual_querm(q)?,
                    _ => profile.layer_cake(q, &grid)?,
                };
                let (vbar, _) = vbar_from(&vq, n);
                rows.push(ComputeRow {
                    q,
                    value: vq.value,
                    vbar,
                    stderr: vq.stderr,
                    formulation: vq.formulation,
                });
            }
        }
    }

    let body_hash = body.content_hash();
    let config = serde_json::json!({
        "command": "compute",
        "body": args.body,
        "body_hash": body_hash,
        "q": args.q,
        "formulation": format!("{:?}", args.formulation).to_lowercase(),
        "rule_meta": rule_meta,
        "seed": args.rule.seed,
    });
    let hash = manifest::config_hash(&config);

    let mut csv = format!("# manifest_sha256={hash}\nq,v_q,vbar_q,stderr,formulation\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{}\n",
            r.q, r.value, r.vbar, r.stderr, r.formulation
        ));
        println!(
            "q={:<8} V_q={:.9e}  Vbar_q={:.9e}  stderr={:.3e}  [{}]",
            r.q, r.value, r.vbar, r.stderr, r.formulation
        );
    }
    let json = serde_json::json!({
        "manifest": hash,
        "rows": rows.iter().map(|r| serde_json::json!({
            "body_hash": body_hash,
            "q": r.q,
            "formulation": r.formulation,
            "value": r.value,
            "vbar": r.vbar,
            "stderr": r.stderr,
            "rule_meta": rule_meta,
        })).collect::<Vec<_>>(),
    });
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        match args.format {
            FormatArg::Csv => std::fs::write(dir.join("compute.csv"), &csv)?,
            FormatArg::Json => {}
        }
        std::fs::write(dir.join("compute.json"), serde_json::to_string_pretty(&json)?)?;
        manifest::write_manifest(dir, config, started, timer.elapsed().as_secs_f64())?;
    }
    Ok(0)
}

fn cmd_check(args: CheckArgs, started: u64, timer: Instant) -> Result<i32, Error> {
    let k = load_body(&args.k)?;
    let n = k.dim();
    let mut reports = Vec::new();
    let rule_meta;
    match args.name.as_str() {
        "bm" | "logconcave" => {
            let l = match &args.l {
                Some(p) => load_body(p)?,
                None => k.clone(),
            };
            if args.q.is_empty() {
                return Err(Error::InvalidConfig("--q is required for this check".into()));
            }
            let rule = args.rule.build_rule(n)?;
            rule_meta = rule.meta();
            if args.name == "bm" {
                let checker = verify::BmChecker::new(&k, &l, &rule)?;
                for &q in &args.q {
                    reports.push(checker.check(q)?);
                }
            } else {
                let lambda = args.lambda.unwrap_or(0.5);
                let checker = verify::LogConcaveChecker::new(&k, &l, lambda, &rule)?;
                for &q in &args.q {
                    reports.push(checker.check(q)?);
                }
            }
        }
        "rvip" => {
            if args.q.is_empty() {
                return Err(Error::InvalidConfig("--q is required for rvip".into()));
            }
            let rule = args.rule.build_rule(n)?;
            rule_meta = rule.meta();
            let checker = verify::RvipChecker::new(&k, &rule, args.auto_john)?;
            for &q in &args.q {
                reports.push(checker.check(q)?);
            }
        }
        "ss-tail" => {
            let ts = if args.t.is_empty() {
                vec![0.5, 1.0, 2.0]
            } else {
                args.t.clone()
            };
            let sample = GaussianSample::new(n, args.rule.samples, args.rule.seed);
            rule_meta = sample.meta();
            let checker = verify::SsTailChecker::new(&k, &sample, args.auto_john)?;
            for &t in &ts {
                reports.push(checker.check(t)?);
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!("unknown check {other:?}")));
        }
    }

    for rep in &reports {
        println!("{}", rep.human_line());
    }
    let any_violation = reports
        .iter()
        .any(|r| r.verdict == Verdict::ViolationCandidate);

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let config = serde_json::json!({
            "command": "check",
            "name": args.name,
            "k": args.k,
            "l": args.l,
            "q": args.q,
            "lambda": args.lambda,
            "t": args.t,
            "auto_john": args.auto_john,
            "rule_meta": rule_meta,
            "seed": args.rule.seed,
        });
        let hash = manifest::config_hash(&config);
        let json = serde_json::json!({ "manifest": hash, "reports": reports });
        std::fs::write(dir.join("check.json"), serde_json::to_string_pretty(&json)?)?;
        manifest::write_manifest(dir, config, started, timer.elapsed().as_secs_f64())?;
    }
    Ok(if any_violation { 4 } else { 0 })
}

fn cmd_john(args: JohnArgs, started: u64, timer: Instant) -> Result<i32, Error> {
    let body = load_body(&args.body)?;
    let jp = to_john_position(&body)?;
    let contacts = contact_points(&jp.body, CONTACT_TOL)?;
    // self-check: the positioned body's inscribed ellipsoid is the unit ball
    let recheck = john_ellipsoid(&jp.body, 1e-7)?;
    let n = body.dim();
    let id_err = {
        let mut err = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((recheck.matrix()[(i, j)] - target).abs());
            }
        }
        err
    };

    std::fs::create_dir_all(&args.out)?;
    let config = serde_json::json!({
        "command": "john",
        "body": args.body,
        "body_hash": body.content_hash(),
    });
    let hash = manifest::config_hash(&config);
    jp.body.save(&args.out.join("body_john.json"))?;
    let ell = serde_json::json!({
        "manifest": hash,
        "matrix": (0..n).map(|i| (0..n).map(|j| jp.ellipsoid_before.matrix()[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    std::fs::write(args.out.join("ellipsoid.json"), serde_json::to_string_pretty(&ell)?)?;
    let contacts_json = serde_json::json!({
        "manifest": hash,
        "directions": contacts.directions.iter()
            .map(|u| u.iter().cloned().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "weights": contacts.weights,
        "residual": contacts.residual,
        "recheck_identity_error": id_err,
    });
    std::fs::write(
        args.out.join("contacts.json"),
        serde_json::to_string_pretty(&contacts_json)?,
    )?;
    manifest::write_manifest(&args.out, config, started, timer.elapsed().as_secs_f64())?;
    println!(
        "john: {} contacts, isotropy residual {:.3e}, recheck |M - I| = {:.3e}",
        contacts.directions.len(),
        contacts.residual,
        id_err
    );
    Ok(0)
}

fn cmd_search(args: SearchArgs, started: u64, timer: Instant) -> Result<i32, Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let cfg: SearchConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    let findings = verify::search_counterexamples(&cfg)?;
    std::fs::create_dir_all(&args.out)?;
    verify::write_findings(&args.out, &findings)?;
    let config = serde_json::to_value(&cfg)?;
    manifest::write_manifest(&args.out, config, started, timer.elapsed().as_secs_f64())?;
    let candidates = findings
        .iter()
        .filter(|f| f.final_verdict() == Verdict::ViolationCandidate)
        .count();
    let errors = findings.iter().filter(|f| f.error.is_some()).count();
    println!(
        "search: {} records, {} surviving violation candidates, {} trial errors",
        findings.len(),
        candidates,
        errors
    );
    // exploration contract: margins are reported, never asserted
    Ok(0)
}

fn cmd_curve(args: CurveArgs, started: u64, timer: Instant) -> Result<i32, Error> {
    let body = load_body(&args.body)?;
    let n = body.dim();
    if args.q_min < -10.0 || args.q_max > n as f64 || args.q_min > args.q_max {
        return Err(Error::InvalidConfig(format!(
            "q range must lie within [-10, n] = [-10, {n}], got [{}, {}]",
            args.q_min, args.q_max
        )));
    }
    if !(args.step > 0.0) {
        return Err(Error::InvalidConfig("step must be positive".into()));
    }
    let positioned = if args.auto_john {
        to_john_position(&body)?.body
    } else {
        body.clone()
    };
    let rule = args.rule.build_rule(n)?;
    let profile_k = SphereProfile::new(&positioned, &rule)?;
    let cube = ConvexBody::cube(n, 1.0)?;
    let profile_c = SphereProfile::new(&cube, &rule)?;

    let config = serde_json::json!({
        "command": "curve",
        "body": args.body,
        "body_hash": body.content_hash(),
        "q_min": args.q_min,
        "q_max": args.q_max,
        "step": args.step,
        "auto_john": args.auto_john,
        "rule_meta": rule.meta(),
        "seed": args.rule.seed,
    });
    let hash = manifest::config_hash(&config);
    let mut csv = format!("# manifest_sha256={hash}\nq,vbar_body,vbar_cube,margin\n");
    let mut q = args.q_min;
    while q <= args.q_max + 1e-12 {
        // snap tiny float drift onto the entropy branch
        let qq = if q.abs() < 1e-12 { 0.0 } else { q };
        let vk = profile_k.normalized_dual_querm(qq).value;
        let vc = profile_c.normalized_dual_querm(qq).value;
        csv.push_str(&format!("{},{:.17e},{:.17e},{:.17e}\n", qq, vk, vc, vc - vk));
        q += args.step;
    }
    print!("{csv}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("curve.csv"), &csv)?;
        manifest::write_manifest(dir, config, started, timer.elapsed().as_secs_f64())?;
    }
    Ok(0)
}
