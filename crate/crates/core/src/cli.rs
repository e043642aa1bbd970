//! Command-line front end. `run` returns the process exit code.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::chain::{self, ChainFailure, ChainVerdict};
use crate::domains::{make_archipelago, DomainInput};
use crate::error::Error;
use crate::kernels::{KernelEvaluator, PointQuad};
use crate::leveldeform::{self, TestFunction};
use crate::positivity::{self, KernelTag, OverlapVerdict, SamplePlan};
use crate::spherical;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "qdpack", version, about = "Quadrature-domain kernels, certificates and chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether a union of disks (or raw P, Q data) overlaps.
    Overlap {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Run the block-matrix chain and report its verdict and trace.
    Chain {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Unit disks centered at -a and a.
        #[arg(long)]
        two_disk_a: Option<f64>,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Write the per-step trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also compute the two-disk survival thresholds for k = 0..=K.
        #[arg(long, value_name = "K")]
        thresholds: Option<usize>,
    },
    /// Evaluate kernels at one quadruple and check sampled Gram matrices.
    Kernel {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// `[[wr,wi],[zr,zi],[ur,ui],[vr,vi]]`.
        #[arg(long)]
        at: Option<String>,
    },
    /// Quadrature identity on the level sets of the two-disk polynomial.
    Levelset {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// 1, z, z2, z3, rez2, imz2 or poly:c0,c1,...
        #[arg(long, default_value = "1")]
        h: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = leveldeform::DEFAULT_X_MAX)]
        x_max: f64,
        /// Write the density grid as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Spherical areas and the orthogonal half-plane picture.
    Sphere {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Union identities between the first disk and the remaining ones.
    Identities {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Truncation size for the operator path (two disks only).
        #[arg(long, default_value_t = 40)]
        n: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct DomainArgs {
    /// Disks as `[[cx, cy, r], ...]`.
    #[arg(long)]
    disks: Option<String>,
    /// JSON file with `{"P": [...], "Q": [[...]]}`.
    #[arg(long)]
    pq: Option<PathBuf>,
    /// JSON file with either schema.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long, default_value_t = positivity::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 32)]
    samples: usize,
    /// `LO,HI`; defaults to `[1.05 R0, 2 R0]`.
    #[arg(long)]
    band: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

impl DomainArgs {
    fn given(&self) -> bool {
        self.disks.is_some() || self.pq.is_some() || self.input.is_some()
    }

    fn load(&self) -> CliResult<DomainInput> {
        let read = |p: &PathBuf| {
            std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        };
        match (&self.disks, &self.pq, &self.input) {
            (Some(d), None, None) => Ok(DomainInput::Disks(DomainInput::from_triples(d)?)),
            (None, Some(p), None) => match DomainInput::from_json(&read(p)?)? {
                raw @ DomainInput::Raw(_) => Ok(raw),
                DomainInput::Disks(_) => Err(CliError::Usage("--pq expects P and Q".into())),
            },
            (None, None, Some(p)) => Ok(DomainInput::from_json(&read(p)?)?),
            (None, None, None) => Err(CliError::Usage("one of --disks, --pq, --input is required".into())),
            _ => Err(CliError::Usage("--disks, --pq and --input are mutually exclusive".into())),
        }
    }

    fn echo(&self) -> Value {
        json!({
            "disks": self.disks,
            "pq": self.pq.as_ref().map(|p| p.display().to_string()),
            "input": self.input.as_ref().map(|p| p.display().to_string()),
        })
    }
}

impl CommonArgs {
    fn plan(&self, bounding_radius: f64) -> CliResult<SamplePlan> {
        let plan = match &self.band {
            None => SamplePlan::default_band(self.samples, bounding_radius, self.seed)?,
            Some(b) => {
                let parts: Vec<f64> = b
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| CliError::Usage(format!("--band expects LO,HI, got {b:?}")))?;
                let [lo, hi] = parts[..] else {
                    return Err(CliError::Usage(format!("--band expects LO,HI, got {b:?}")));
                };
                SamplePlan::new(self.samples, lo, hi, self.seed)?
            }
        };
        Ok(plan.with_tol(self.tol))
    }

    fn echo(&self) -> Value {
        json!({
            "tol": self.tol,
            "samples": self.samples,
            "band": self.band,
            "seed": self.seed,
            "out": self.out.as_ref().map(|p| p.display().to_string()),
            "no_timestamp": self.no_timestamp,
        })
    }
}

fn verdict_code(v: &OverlapVerdict) -> i32 {
    match v {
        OverlapVerdict::DisjointCertified => EXIT_OK,
        OverlapVerdict::OverlapDetected => EXIT_FAIL,
        OverlapVerdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn write_file(path: &PathBuf, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse_quad(text: &str) -> CliResult<PointQuad> {
    let pts: Vec<[f64; 2]> =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("--at: {e}")))?;
    let [w, z, u, v] = pts[..] else {
        return Err(CliError::Usage("--at expects four [re, im] pairs".into()));
    };
    let c = |p: [f64; 2]| Complex64::new(p[0], p[1]);
    Ok(PointQuad::new(c(w), c(z), c(u), c(v)))
}

fn cmd_overlap(domain: &DomainArgs, common: &CommonArgs, max_iter: usize) -> CliResult<(Value, i32)> {
    let input = domain.load()?;
    let plan = common.plan(input.bounding_radius())?;
    let report = positivity::decide_overlap_input(&input, &plan, max_iter);
    let code = verdict_code(&report.verdict);
    let mut v = to_value(&report);
    v["verdict"] = json!(report.verdict.to_string());
    Ok((v, code))
}

fn cmd_chain(
    domain: &DomainArgs,
    common: &CommonArgs,
    two_disk_a: Option<f64>,
    max_iter: usize,
    csv: &Option<PathBuf>,
    thresholds: Option<usize>,
) -> CliResult<(Value, i32)> {
    let input = match (two_disk_a, domain.given()) {
        (Some(a), false) => {
            let arch = make_archipelago(&[(Complex64::new(-a, 0.0), 1.0), (Complex64::new(a, 0.0), 1.0)])?;
            DomainInput::Disks(arch)
        }
        (None, true) => domain.load()?,
        (Some(_), true) => return Err(CliError::Usage("--two-disk-a excludes other domain flags".into())),
        (None, false) => return Err(CliError::Usage("a domain or --two-disk-a is required".into())),
    };
    let bits = chain::precision_for_steps(max_iter);
    let seed = match &input {
        DomainInput::Disks(a) => chain::sos_seed_disks(a, bits),
        DomainInput::Raw(q) => chain::sos_seed(q, bits),
    };
    let table = thresholds.map(chain::two_disk_threshold_table);
    let mut out = json!({ "precision_bits": bits, "thresholds": table });
    let code = match seed {
        Err(Error::NotPsd { min_eig }) => {
            out["verdict"] = json!("NOT_PSD");
            out["seed"] = json!({ "min_eig": min_eig });
            EXIT_FAIL
        }
        Err(Error::DegenerateSeed { residual }) => {
            out["verdict"] = json!("DEGENERATE_SEED");
            out["seed"] = json!({ "residual": residual });
            EXIT_INCONCLUSIVE
        }
        Err(e) => return Err(e.into()),
        Ok(seed) => {
            let cap = chain::default_norm_cap(input.bounding_radius());
            let (rep, _) = chain::chain_run(&seed, max_iter, common.tol, cap);
            if let Some(p) = csv {
                write_file(p, &rep.to_csv())?;
            }
            out["verdict"] = json!(rep.verdict.to_string());
            out["seed"] = json!({
                "d": seed.d,
                "rank": seed.rank,
                "coeff_min_eig": seed.coeff_min_eig,
                "xi_norm_sqr": seed.xi_norm_sqr(),
            });
            out["norm_cap"] = json!(cap);
            out["trace"] = to_value(&rep.trace);
            match rep.verdict {
                ChainVerdict::CertifiedUpToK { .. } => EXIT_OK,
                ChainVerdict::FailedAt { mode: ChainFailure::NormBlowup, .. } => EXIT_INCONCLUSIVE,
                ChainVerdict::FailedAt { .. } => EXIT_FAIL,
            }
        }
    };
    Ok((out, code))
}

fn cmd_kernel(domain: &DomainArgs, common: &CommonArgs, at: &Option<String>) -> CliResult<(Value, i32)> {
    let input = domain.load()?;
    let ev = KernelEvaluator::from_input(&input);
    let r = 2.0 * input.bounding_radius().max(0.5);
    let q = match at {
        Some(s) => parse_quad(s)?,
        None => {
            let p = |a: f64| Complex64::from_polar(r, a);
            PointQuad::new(p(0.3), p(1.1), p(2.0), p(2.9))
        }
    };
    let plan = common.plan(input.bounding_radius())?;
    let mut code = EXIT_OK;
    let mut out = json!({ "at": to_value(&q) });
    match ev.kernel_l_paths(&q) {
        Ok(paths) => {
            out["L"] = to_value(&paths.quotient.unwrap_or(paths.divided));
            out["L_divided"] = to_value(&paths.divided);
            out["L_quotient"] = to_value(&paths.quotient);
            out["E_wz"] = to_value(&ev.exp_transform(q.w, q.z)?);
            out["B"] = to_value(&ev.kernel_b(&q)?);
            out["antidiagonal_L_wz"] = to_value(&ev.antidiagonal_l(q.w, q.z)?);
            let (m, n) = ev.kernel_m_n(q.w, q.z)?;
            out["M_wz"] = to_value(&m);
            out["N_wz"] = to_value(&n);
        }
        Err(e) => {
            out["error"] = json!(e.to_string());
            code = EXIT_FAIL;
        }
    }
    let mut grams = Vec::new();
    for tag in [KernelTag::L, KernelTag::OneMinusE, KernelTag::B] {
        match positivity::gram_psd(&ev, tag, &plan) {
            Ok(g) => {
                if !g.is_psd() {
                    code = EXIT_FAIL;
                }
                grams.push(to_value(&g));
            }
            Err(e) => {
                code = EXIT_FAIL;
                grams.push(json!({ "kernel": to_value(&tag), "error": e.to_string() }));
            }
        }
    }
    match positivity::cnd_check_e(&ev, &plan) {
        Ok(g) => {
            if g.max_projected_form.unwrap_or(0.0) > common.tol {
                code = EXIT_FAIL;
            }
            grams.push(to_value(&g));
        }
        Err(e) => grams.push(json!({ "kernel": "cnd_e", "error": e.to_string() })),
    }
    out["grams"] = Value::Array(grams);
    out["plan"] = to_value(&plan);
    Ok((out, code))
}

fn cmd_levelset(t: f64, h: &str, n: usize, x_max: f64, csv: &Option<PathBuf>) -> CliResult<(Value, i32)> {
    let h: TestFunction = h.parse()?;
    let field = leveldeform::density_field(t, n, x_max)?;
    if let Some(p) = csv {
        let f = std::fs::File::create(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        field
            .write_csv(std::io::BufWriter::new(f))
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
    }
    let rep = leveldeform::check_on_field(&field, &h);
    let code = if rep.rel_error <= 0.005 { EXIT_OK } else { EXIT_FAIL };
    Ok((
        json!({
            "quadrature": to_value(&rep),
            "mass": field.mass(),
            "hole_cells": field.hole_cells(),
            "branch_points": to_value(&leveldeform::branch_points(t)),
        }),
        code,
    ))
}

fn cmd_sphere(domain: &DomainArgs, n: usize) -> CliResult<(Value, i32)> {
    let check = spherical::orthogonal_halfplane_check(n)?;
    let mut code = if check.passed() { EXIT_OK } else { EXIT_FAIL };
    let mut areas = Vec::new();
    if domain.given() {
        let DomainInput::Disks(arch) = domain.load()? else {
            return Err(CliError::Usage("sphere takes disks only".into()));
        };
        for d in arch.disks() {
            let a = spherical::spherical_area(d, n.max(512))?;
            if a.abs_error > 1e-6 * (1.0 + a.closed_form) {
                code = EXIT_FAIL;
            }
            areas.push(to_value(&a));
        }
    }
    Ok((json!({ "halfplane": to_value(&check), "areas": areas }), code))
}

fn cmd_identities(domain: &DomainArgs, common: &CommonArgs, n: usize) -> CliResult<(Value, i32)> {
    let DomainInput::Disks(arch) = domain.load()? else {
        return Err(CliError::Usage("identities takes disks only".into()));
    };
    let disks = arch.disks();
    if disks.len() < 2 {
        return Err(CliError::Usage("identities needs at least two disks".into()));
    }
    let first = KernelEvaluator::new(&make_archipelago(&[(disks[0].center, disks[0].radius)])?);
    let rest_list: Vec<_> = disks[1..].iter().map(|d| (d.center, d.radius)).collect();
    let rest = KernelEvaluator::new(&make_archipelago(&rest_list)?);
    let plan = common.plan(arch.bounding_radius())?;
    let pts = plan.points();
    let mut worst = json!({});
    let mut max_merging = 0.0f64;
    let mut min_rcs = f64::INFINITY;
    for k in 0..pts.len() {
        let (a, b) = (pts[k], pts[(k + 1) % pts.len()]);
        let q = PointQuad::new(a.0, a.1, b.0, b.1);
        let r = first.identity_suite(&rest, &q)?;
        if r.max_merging() >= max_merging {
            worst = to_value(&r);
        }
        max_merging = max_merging.max(r.max_merging());
        min_rcs = min_rcs.min(r.reverse_cauchy_schwarz);
    }
    let mut code = if max_merging <= common.tol && min_rcs >= -common.tol { EXIT_OK } else { EXIT_FAIL };
    let mut out = json!({
        "quadruples": pts.len(),
        "max_merging_residual": max_merging,
        "worst": worst,
        "min_reverse_cauchy_schwarz": min_rcs,
        "plan": to_value(&plan),
    });
    if disks.len() == 2 && positivity::two_disk_closed_form(&disks[0], &disks[1]) {
        let lam: Vec<Complex64> = pts.iter().take(8).map(|p| p.0).collect();
        match chain::merging_gram_residual(&disks[0], &disks[1], n, &lam) {
            Ok(m) => {
                if m.operator > 1e-8 {
                    code = EXIT_FAIL;
                }
                out["merging_gram"] = to_value(&m);
            }
            Err(e) => out["merging_gram"] = json!({ "error": e.to_string() }),
        }
    }
    Ok((out, code))
}

fn execute(cli: &Cli) -> CliResult<(Value, i32, &CommonArgs)> {
    let (name, res, config, common) = match &cli.command {
        Command::Overlap { domain, common, max_iter } => (
            "overlap",
            cmd_overlap(domain, common, *max_iter)?,
            json!({ "domain": domain.echo(), "common": common.echo(), "max_iter": max_iter }),
            common,
        ),
        Command::Chain { domain, common, two_disk_a, max_iter, csv, thresholds } => (
            "chain",
            cmd_chain(domain, common, *two_disk_a, *max_iter, csv, *thresholds)?,
            json!({
                "domain": domain.echo(),
                "common": common.echo(),
                "two_disk_a": two_disk_a,
                "max_iter": max_iter,
                "csv": csv.as_ref().map(|p| p.display().to_string()),
                "thresholds": thresholds,
            }),
            common,
        ),
        Command::Kernel { domain, common, at } => (
            "kernel",
            cmd_kernel(domain, common, at)?,
            json!({ "domain": domain.echo(), "common": common.echo(), "at": at }),
            common,
        ),
        Command::Levelset { common, t, h, n, x_max, csv } => (
            "levelset",
            cmd_levelset(*t, h, *n, *x_max, csv)?,
            json!({
                "common": common.echo(),
                "t": t,
                "h": h,
                "n": n,
                "x_max": x_max,
                "csv": csv.as_ref().map(|p| p.display().to_string()),
            }),
            common,
        ),
        Command::Sphere { domain, common, n } => (
            "sphere",
            cmd_sphere(domain, *n)?,
            json!({ "domain": domain.echo(), "common": common.echo(), "n": n }),
            common,
        ),
        Command::Identities { domain, common, n } => (
            "identities",
            cmd_identities(domain, common, *n)?,
            json!({ "domain": domain.echo(), "common": common.echo(), "n": n }),
            common,
        ),
    };
    let (result, code) = res;
    let report = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "result": result,
        "exit_code": code,
    });
    Ok((report, code, common))
}

/// Parses `args` (including the program name), runs the command and writes the report.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Ok((mut report, code, common)) => {
            if !common.no_timestamp {
                let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                report["generated_unix"] = json!(secs);
            }
            let text = serde_json::to_string_pretty(&report).unwrap_or_default() + "\n";
            match &common.out {
                Some(p) => {
                    if let Err(e) = std::fs::write(p, &text) {
                        eprintln!("error: {}: {e}", p.display());
                        return EXIT_USAGE;
                    }
                    let v = report["result"]["verdict"].as_str().unwrap_or("done");
                    println!("{}: {v} (exit {code})", report["command"].as_str().unwrap_or(""));
                }
                None => print!("{text}"),
            }
            code
        }
    }
}
