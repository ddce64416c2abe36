//! Command line front end.
//!
//! | exit | meaning |
//! |------|---------|
//! | 0 | success: certified monotone, violation found, solve converged |
//! | 1 | `falsify` found no violation |
//! | 2 | input could not be read or parsed |
//! | 3 | solver did not converge |
//! | 4 | law is not certified and no metadata override was allowed |
//! | 5 | other runtime failure (for example writing outputs) |
//! | 10 | `certify`: every certificate inconclusive |
//! | 20 | `certify`: law is not monotone |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, Function, HashMapContext,
    Node, Value as ExprValue,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::certify::{certify_all, certify_and_attach, certify_composite, strongest, Certificate, Verdict};
use crate::constitutive::{ConstitutiveLaw, LawSpec, MetadataSource};
use crate::error::Error;
use crate::falsify::{search_violation, SearchConfig, Violation, ViolationReport};
use crate::solver::{
    dependence_experiment, manufactured_case, solve_steady, state_distance, DependenceTable, Grid2D,
    Perturbation, ProblemData, SolveReport, SolverConfig, StaggeredState,
};

pub mod exit {
    pub const OK: i32 = 0;
    pub const NOT_FOUND: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const NO_CONVERGENCE: i32 = 3;
    pub const UNCERTIFIED: i32 = 4;
    pub const RUNTIME: i32 = 5;
    pub const INCONCLUSIVE: i32 = 10;
    pub const NOT_MONOTONE: i32 = 20;
}

#[derive(Debug, Parser)]
#[command(
    name = "forchflow",
    version,
    about = "Monotonicity certificates and steady solves for Forchheimer-type laws"
)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (certify, falsify, dependence) or directory (solve).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Source,
    Boundary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every applicable certificate on a law file.
    Certify {
        config: PathBuf,
        /// Falsifier budget used when no certificate is conclusive.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Search for a pair violating monotonicity.
    Falsify {
        config: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Solve a steady problem.
    Solve {
        problem: PathBuf,
        /// Trust growth metadata from the law file instead of certifying.
        #[arg(long)]
        assume_metadata: bool,
        #[arg(long)]
        picard_tol: Option<f64>,
        #[arg(long)]
        max_picard: Option<usize>,
    },
    /// Measure solution change against data perturbations.
    Dependence {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = Target::Source)]
        target: Target,
        /// Perturbation shape as an expression in `x`, `y`.
        #[arg(long, default_value = "1.0")]
        shape: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-1, 1e-2, 1e-3, 1e-4])]
        scales: Vec<f64>,
        #[arg(long)]
        assume_metadata: bool,
    },
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: u64,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub assume_metadata: bool,
}

/// A failure mapped to an exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    fn parse(message: impl Into<String>) -> Self {
        Self::new(exit::PARSE, message)
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self::new(exit::RUNTIME, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments and runs; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                exit::PARSE
            } else {
                exit::OK
            }
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Certify { config, samples } => cmd_certify(cli, config, *samples),
        Command::Falsify { config, samples } => cmd_falsify(cli, config, *samples),
        Command::Solve { problem, assume_metadata, picard_tol, max_picard } => {
            cmd_solve(cli, problem, *assume_metadata, *picard_tol, *max_picard)
        }
        Command::Dependence { problem, target, shape, scales, assume_metadata } => {
            cmd_dependence(cli, problem, *target, shape, scales, *assume_metadata)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Reads a TOML or JSON file into `T`, reporting parse errors with line and
/// column. Also returns the canonical digest of the document.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<(T, String)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let is_json = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => true,
        Some("toml") => false,
        _ => text.trim_start().starts_with('{'),
    };
    let at = |line: usize, col: usize, msg: &str| {
        CliError::parse(format!("{}:{line}:{col}: {msg}", path.display()))
    };
    let (typed, value): (T, Value) = if is_json {
        let typed = serde_json::from_str(&text).map_err(|e| at(e.line(), e.column(), &e.to_string()))?;
        let value = serde_json::from_str(&text).map_err(|e| at(e.line(), e.column(), &e.to_string()))?;
        (typed, value)
    } else {
        let locate = |e: toml::de::Error| {
            let (line, col) = e.span().map(|s| line_col(&text, s.start)).unwrap_or((1, 1));
            at(line, col, e.message())
        };
        (toml::from_str(&text).map_err(locate)?, toml::from_str(&text).map_err(locate)?)
    };
    Ok((typed, digest_value(&value)))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |k| before.len() - k - 1) + 1;
    (line, col)
}

/// sha256 of the compact JSON form of a document with sorted keys, so that
/// formatting and key order do not matter.
pub fn digest_value(value: &Value) -> String {
    let json = serde_json::to_string(value).expect("json values serialize");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_law(path: &Path) -> CliResult<(ConstitutiveLaw, String)> {
    let (spec, digest): (LawSpec, String) = read_config(path)?;
    let law = spec.to_law().map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    Ok((law, digest))
}

fn manifest(cli: &Cli, command: &str, digest: &str, outputs: Vec<String>, assume: bool) -> RunManifest {
    RunManifest {
        command: command.into(),
        config_digest: digest.into(),
        seed: cli.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        outputs,
        assume_metadata: assume,
    }
}

/// Writes the primary output to `--out` (or stdout) and the manifest to a
/// `.manifest.json` sidecar, so the primary output stays byte-reproducible.
fn emit(cli: &Cli, content: &str, man: RunManifest) -> CliResult<()> {
    let man_json = serde_json::to_string_pretty(&man).expect("manifest serializes");
    match &cli.out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, content)?;
            fs::write(sidecar(p), man_json + "\n")?;
        }
        None => {
            print!("{content}");
            if !cli.quiet {
                eprintln!("{man_json}");
            }
        }
    }
    Ok(())
}

fn sidecar(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn out_name(cli: &Cli) -> Vec<String> {
    cli.out.iter().map(|p| p.display().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutput {
    pub law_digest: String,
    pub certificates: Vec<Certificate>,
    pub combined: Verdict,
    /// Which certificate or procedure decided the combined verdict.
    pub decided_by: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

fn cmd_certify(cli: &Cli, config: &Path, samples: usize) -> CliResult<i32> {
    let (law, digest) = load_law(config)?;
    let certificates = certify_all(&law);
    let composite = certify_composite(&law);
    // per-component certificates speak for the law only when it has one component
    let single = law.terms().len() + usize::from(law.gb().is_some()) == 1;
    let law_level: Vec<Certificate> = if single { certificates.clone() } else { vec![composite.clone()] };
    let mut violation = None;
    let (combined, decided_by) = match strongest(&law_level).filter(|c| c.is_monotone()) {
        Some(c) => (c.verdict, format!("{:?}", c.theorem)),
        None => match law_level.iter().find(|c| c.verdict == Verdict::NotMonotone) {
            Some(c) => (Verdict::NotMonotone, format!("{:?}", c.theorem)),
            None => {
                let cfg = SearchConfig::default().with_samples(samples).with_seed(cli.seed);
                violation = search_violation(&law, &cfg).map_err(CliError::runtime)?;
                if violation.is_some() {
                    (Verdict::NotMonotone, "falsifier".to_string())
                } else {
                    (Verdict::Inconclusive, "none".to_string())
                }
            }
        },
    };
    if violation.is_none() && combined == Verdict::NotMonotone {
        let cfg = SearchConfig::default().with_samples(samples).with_seed(cli.seed);
        violation = search_violation(&law, &cfg).map_err(CliError::runtime)?;
    }
    let out = CertifyOutput { law_digest: law.digest(), certificates, combined, decided_by, violation };
    let content = match cli.format {
        Format::Json => serde_json::to_string_pretty(&out).expect("serializes") + "\n",
        Format::Csv => certify_csv(&out),
    };
    emit(cli, &content, manifest(cli, "certify", &digest, out_name(cli), false))?;
    if !cli.quiet {
        eprintln!("combined verdict: {} ({})", verdict_label(&out.combined), out.decided_by);
    }
    Ok(match out.combined {
        Verdict::Monotone | Verdict::PowerMonotone { .. } => exit::OK,
        Verdict::Inconclusive => exit::INCONCLUSIVE,
        Verdict::NotMonotone => exit::NOT_MONOTONE,
    })
}

fn verdict_label(v: &Verdict) -> String {
    match v {
        Verdict::Monotone => "monotone".into(),
        Verdict::PowerMonotone { order, .. } => format!("power_monotone({order})"),
        Verdict::NotMonotone => "not_monotone".into(),
        Verdict::Inconclusive => "inconclusive".into(),
    }
}

fn certify_csv(out: &CertifyOutput) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row = |w: &mut csv::Writer<Vec<u8>>, name: &str, v: &Verdict| {
        let opt = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
        let label = match v {
            Verdict::PowerMonotone { .. } => "power_monotone".to_string(),
            other => verdict_label(other),
        };
        w.write_record([name, &label, &opt(v.order()), &opt(v.constant())])
    };
    w.write_record(["theorem", "verdict", "order", "constant"]).expect("in-memory write");
    for c in &out.certificates {
        row(&mut w, &format!("{:?}", c.theorem), &c.verdict).expect("in-memory write");
    }
    row(&mut w, "combined", &out.combined).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn cmd_falsify(cli: &Cli, config: &Path, samples: usize) -> CliResult<i32> {
    let (law, digest) = load_law(config)?;
    let cfg = SearchConfig::default().with_samples(samples).with_seed(cli.seed);
    let violation = search_violation(&law, &cfg).map_err(CliError::runtime)?;
    let found = violation.is_some();
    let report = ViolationReport { law_digest: law.digest(), samples, seed: cli.seed, violation };
    let content = match cli.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("serializes") + "\n",
        Format::Csv => {
            let mut s = String::from("u,v,value\n");
            match &report.violation {
                Some(v) => {
                    let join =
                        |x: &crate::VecN| x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
                    let _ = writeln!(s, "{},{},{}", join(&v.u), join(&v.v), v.value);
                }
                None => s.push_str("none,none,none\n"),
            }
            s
        }
    };
    emit(cli, &content, manifest(cli, "falsify", &digest, out_name(cli), false))?;
    if !cli.quiet {
        eprintln!("{}", if found { "violation found" } else { "no violation found" });
    }
    Ok(if found { exit::OK } else { exit::NOT_FOUND })
}

/// A field given as a constant, an expression in `x`, `y`, or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Expr(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawRef {
    /// Path to a law file, relative to the problem file.
    Path(PathBuf),
    Inline(LawSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

fn one() -> f64 {
    1.0
}

/// Problem file: a grid with either a named manufactured case or a law with
/// source `f` and boundary pressure `psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    #[serde(default)]
    pub manufactured: Option<String>,
    #[serde(default)]
    pub law: Option<LawRef>,
    #[serde(default)]
    pub f: Option<FieldSpec>,
    #[serde(default)]
    pub psi: Option<FieldSpec>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

pub struct LoadedProblem {
    pub data: ProblemData,
    pub exact: Option<StaggeredState>,
    pub solver: SolverConfig,
    pub digest: String,
}

/// Compiled expression in `x`, `y` with `pi`, `e` and the usual elementary
/// functions.
pub struct FieldExpr {
    node: Node,
    ctx: HashMapContext,
}

type UnaryFn = (&'static str, fn(f64) -> f64);

impl FieldExpr {
    pub fn compile(expr: &str) -> Result<Self, String> {
        let node = build_operator_tree(expr).map_err(|e| format!("expression `{expr}`: {e}"))?;
        let mut ctx = HashMapContext::new();
        let unary: [UnaryFn; 8] = [
            ("sin", f64::sin),
            ("cos", f64::cos),
            ("tan", f64::tan),
            ("exp", f64::exp),
            ("ln", f64::ln),
            ("sqrt", f64::sqrt),
            ("abs", f64::abs),
            ("tanh", f64::tanh),
        ];
        for (name, f) in unary {
            ctx.set_function(
                name.into(),
                Function::new(move |a: &ExprValue| Ok(ExprValue::Float(f(a.as_number()?)))),
            )
            .map_err(|e| e.to_string())?;
        }
        for (name, v) in [("pi", std::f64::consts::PI), ("e", std::f64::consts::E)] {
            ctx.set_value(name.into(), ExprValue::Float(v)).map_err(|e| e.to_string())?;
        }
        let mut f = FieldExpr { node, ctx };
        // evalexpr accepts some malformed input at parse time
        f.eval(0.5, 0.5).map_err(|e| format!("expression `{expr}`: {e}"))?;
        Ok(f)
    }

    pub fn eval(&mut self, x: f64, y: f64) -> Result<f64, String> {
        self.ctx.set_value("x".into(), ExprValue::Float(x)).map_err(|e| e.to_string())?;
        self.ctx.set_value("y".into(), ExprValue::Float(y)).map_err(|e| e.to_string())?;
        self.node.eval_number_with_context(&self.ctx).map_err(|e| e.to_string())
    }
}

fn sample_field(spec: &FieldSpec, points: &[(f64, f64)], name: &str) -> CliResult<Vec<f64>> {
    match spec {
        FieldSpec::Constant(c) => Ok(vec![*c; points.len()]),
        FieldSpec::Values(v) if v.len() == points.len() => Ok(v.clone()),
        FieldSpec::Values(v) => {
            Err(CliError::parse(format!("`{name}` has {} values, expected {}", v.len(), points.len())))
        }
        FieldSpec::Expr(e) => {
            let mut f = FieldExpr::compile(e).map_err(CliError::parse)?;
            points
                .iter()
                .map(|&(x, y)| f.eval(x, y).map_err(|m| CliError::parse(format!("`{name}`: {m}"))))
                .collect()
        }
    }
}

pub fn load_problem(path: &Path) -> CliResult<LoadedProblem> {
    let (spec, digest): (ProblemSpec, String) = read_config(path)?;
    let g = &spec.grid;
    let grid = Grid2D::new(g.nx, g.ny, g.lx, g.ly).map_err(|e| CliError::parse(e.to_string()))?;
    let solver = spec.solver.clone().unwrap_or_default();
    solver.validate().map_err(|e| CliError::parse(format!("[solver]: {e}")))?;
    if let Some(name) = &spec.manufactured {
        if spec.law.is_some() || spec.f.is_some() || spec.psi.is_some() {
            return Err(CliError::parse("a manufactured case fixes law, f and psi"));
        }
        let (data, exact) = manufactured_case(name, grid).map_err(|e| CliError::parse(e.to_string()))?;
        return Ok(LoadedProblem { data, exact: Some(exact), solver, digest });
    }
    let law = match &spec.law {
        None => return Err(CliError::parse("problem needs `law` or `manufactured`")),
        Some(LawRef::Inline(l)) => l.to_law().map_err(|e| CliError::parse(e.to_string()))?,
        Some(LawRef::Path(p)) => {
            let full = path.parent().map_or_else(|| p.clone(), |d| d.join(p));
            load_law(&full)?.0
        }
    };
    let cells: Vec<(f64, f64)> = (0..grid.n_cells()).map(|c| grid.cell_center(c)).collect();
    let bnd: Vec<(f64, f64)> = grid.boundary_faces().iter().map(|b| (b.x, b.y)).collect();
    let zero = FieldSpec::Constant(0.0);
    let f = sample_field(spec.f.as_ref().unwrap_or(&zero), &cells, "f")?;
    let psi = sample_field(spec.psi.as_ref().unwrap_or(&zero), &bnd, "psi")?;
    let data = ProblemData::new(grid, law, f, psi).map_err(|e| CliError::parse(e.to_string()))?;
    Ok(LoadedProblem { data, exact: None, solver, digest })
}

/// Enforces the growth assumption: certify unless the caller explicitly
/// trusts metadata from the law file.
fn prepare_law(data: &mut ProblemData, assume_metadata: bool) -> CliResult<Option<Certificate>> {
    let user = data.law.metadata().copied().filter(|m| m.source == MetadataSource::UserOverride);
    if assume_metadata && user.is_some() {
        return Ok(None);
    }
    let (cert, law) = certify_and_attach(data.law.clone().without_metadata());
    if law.metadata().is_none() {
        return Err(CliError::new(
            exit::UNCERTIFIED,
            format!(
                "law is not certified power monotone (verdict: {}); pass --assume-metadata with \
                 metadata in the law file to override",
                verdict_label(&cert.verdict)
            ),
        ));
    }
    data.law = law;
    Ok(Some(cert))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub law_digest: String,
    pub certificate: Option<Certificate>,
    pub s: f64,
    pub r: f64,
    pub metadata_source: MetadataSource,
    pub report: SolveReportSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_vs_exact: Option<ExactError>,
}

/// [`SolveReport`] without the fields, which go to CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReportSummary {
    pub stages: Vec<crate::solver::StageReport>,
    pub final_residual: f64,
    pub data_scale: f64,
    pub floored_cells: usize,
    pub norm_u: f64,
    pub norm_div_u: f64,
    pub norm_p: f64,
    pub norm_f: f64,
    pub norm_psi: f64,
    pub estimate_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactError {
    pub max_abs: f64,
    pub distance: f64,
}

fn cmd_solve(
    cli: &Cli,
    problem: &Path,
    assume_metadata: bool,
    picard_tol: Option<f64>,
    max_picard: Option<usize>,
) -> CliResult<i32> {
    let mut loaded = load_problem(problem)?;
    if let Some(t) = picard_tol {
        loaded.solver.picard_tol = t;
    }
    if let Some(m) = max_picard {
        loaded.solver.max_picard = m;
    }
    loaded.solver.validate().map_err(|e| CliError::parse(e.to_string()))?;
    let certificate = prepare_law(&mut loaded.data, assume_metadata)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("forchflow-out"));
    fs::create_dir_all(&dir)?;
    let data = &loaded.data;
    let digest = loaded.digest.clone();
    let report = match solve_steady(data, &loaded.solver) {
        Ok(r) => r,
        Err(Error::NoConvergence { iterations, residual, history }) => {
            let path = dir.join("residual_history.csv");
            let mut s = String::from("iteration,residual\n");
            for (k, r) in history.iter().enumerate() {
                let _ = writeln!(s, "{},{r:e}", k + 1);
            }
            fs::write(&path, s)?;
            let man = manifest(cli, "solve", &digest, vec![path.display().to_string()], assume_metadata);
            fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man).expect("serializes"))?;
            eprintln!("no convergence after {iterations} iterations (residual {residual:e})");
            return Ok(exit::NO_CONVERGENCE);
        }
        Err(e) => return Err(CliError::runtime(e)),
    };
    let meta = *data.law.metadata().expect("prepared law has metadata");
    let error_vs_exact = loaded.exact.as_ref().map(|ex| ExactError {
        max_abs: report.state.max_abs_diff(ex),
        distance: state_distance(&data.grid, &report.state, ex, meta.s),
    });
    let summary = SolveSummary {
        law_digest: data.law.digest(),
        certificate,
        s: meta.s,
        r: meta.r(),
        metadata_source: meta.source,
        report: summarize(data, &report),
        error_vs_exact,
    };
    let paths = [dir.join("report.json"), dir.join("faces.csv"), dir.join("cells.csv")];
    fs::write(&paths[0], serde_json::to_string_pretty(&summary).expect("serializes") + "\n")?;
    fs::write(&paths[1], faces_csv(&data.grid, &report.state))?;
    fs::write(&paths[2], cells_csv(data, &report.state))?;
    let outs = paths.iter().map(|p| p.display().to_string()).collect();
    let man = manifest(cli, "solve", &digest, outs, assume_metadata);
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man).expect("serializes") + "\n")?;
    if !cli.quiet {
        eprintln!(
            "converged: residual {:e}, {} iterations, estimate ratio {:.4}",
            report.final_residual,
            report.total_iterations(),
            report.estimate_ratio
        );
    }
    Ok(exit::OK)
}

fn summarize(data: &ProblemData, r: &SolveReport) -> SolveReportSummary {
    SolveReportSummary {
        stages: r.stages.clone(),
        final_residual: r.final_residual,
        data_scale: data.data_scale(),
        floored_cells: r.floored_cells,
        norm_u: r.norm_u,
        norm_div_u: r.norm_div_u,
        norm_p: r.norm_p,
        norm_f: r.norm_f,
        norm_psi: r.norm_psi,
        estimate_ratio: r.estimate_ratio,
    }
}

/// One row per face: index, orientation, midpoint and normal velocity.
pub fn faces_csv(grid: &Grid2D, state: &StaggeredState) -> String {
    let mut s = String::from("face,orientation,x,y,u\n");
    for (f, u) in state.faces().iter().enumerate() {
        let (x, y) = grid.face_center(f);
        let o = if grid.face_coords(f).0 { "x" } else { "y" };
        let _ = writeln!(s, "{f},{o},{x},{y},{u:e}");
    }
    s
}

/// One row per cell: index, center, pressure, divergence and source.
pub fn cells_csv(data: &ProblemData, state: &StaggeredState) -> String {
    let g = &data.grid;
    let d = g.div(&state.faces());
    let mut s = String::from("cell,x,y,p,div_u,f\n");
    for (c, (dc, fc)) in d.iter().zip(&data.f).enumerate() {
        let (x, y) = g.cell_center(c);
        let _ = writeln!(s, "{c},{x},{y},{:e},{dc:e},{fc:e}", state.p[c]);
    }
    s
}

/// CSV with header `delta,Delta,slope`; `slope` is the local log-log slope
/// against the previous row, empty where undefined.
pub fn dependence_csv(table: &DependenceTable) -> String {
    let mut s = String::from("delta,Delta,slope\n");
    for (k, row) in table.rows.iter().enumerate() {
        let local = k
            .checked_sub(1)
            .and_then(|j| crate::solver::loglog_slope(&table.rows[j..=k]))
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(s, "{:e},{:e},{local}", row.delta, row.big_delta);
    }
    s
}

fn cmd_dependence(
    cli: &Cli,
    problem: &Path,
    target: Target,
    shape: &str,
    scales: &[f64],
    assume_metadata: bool,
) -> CliResult<i32> {
    let mut loaded = load_problem(problem)?;
    prepare_law(&mut loaded.data, assume_metadata)?;
    let g = loaded.data.grid;
    let pts: Vec<(f64, f64)> = match target {
        Target::Source => (0..g.n_cells()).map(|c| g.cell_center(c)).collect(),
        Target::Boundary => g.boundary_faces().iter().map(|b| (b.x, b.y)).collect(),
    };
    let values = sample_field(&FieldSpec::Expr(shape.to_string()), &pts, "shape")?;
    let pert = match target {
        Target::Source => Perturbation::Source(values),
        Target::Boundary => Perturbation::Boundary(values),
    };
    let table = match dependence_experiment(&loaded.data, &pert, scales, &loaded.solver) {
        Ok(t) => t,
        Err(Error::NoConvergence { iterations, residual, .. }) => {
            eprintln!("no convergence after {iterations} iterations (residual {residual:e})");
            return Ok(exit::NO_CONVERGENCE);
        }
        Err(e @ (Error::Domain(_) | Error::Dimension(_))) => return Err(CliError::parse(e.to_string())),
        Err(e) => return Err(CliError::runtime(e)),
    };
    let content = match cli.format {
        Format::Csv => dependence_csv(&table),
        Format::Json => serde_json::to_string_pretty(&table).expect("serializes") + "\n",
    };
    emit(cli, &content, manifest(cli, "dependence", &loaded.digest, out_name(cli), assume_metadata))?;
    if !cli.quiet {
        match table.slope {
            Some(s) => eprintln!("fitted slope over the smallest decade: {s:.4}"),
            None => eprintln!("slope undefined: degenerate table"),
        }
    }
    Ok(exit::OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_positions() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn expressions() {
        let mut f = FieldExpr::compile("sin(pi*x) + y^2").unwrap();
        assert!((f.eval(0.5, 2.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(FieldExpr::compile("x +* 1").is_err());
    }

    #[test]
    fn digest_ignores_formatting() {
        let a: Value = serde_json::from_str(r#"{"b": 1, "a": [1.0, 2.0]}"#).unwrap();
        let b: Value = serde_json::from_str("{\n  \"a\":[1.0,2.0],\"b\":1}").unwrap();
        assert_eq!(digest_value(&a), digest_value(&b));
        let c: Value = toml::from_str("a = [1.0, 2.0]\nb = 1").unwrap();
        assert_eq!(digest_value(&a), digest_value(&c));
    }

    mod contract {
        use super::*;
        use std::path::PathBuf;

        fn data(name: &str) -> String {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
        }

        fn run_args(args: &[&str]) -> i32 {
            let mut full = vec!["forchflow", "--quiet"];
            full.extend_from_slice(args);
            run_from(full)
        }

        fn out_path(dir: &tempfile::TempDir, name: &str) -> String {
            dir.path().join(name).display().to_string()
        }

        #[test]
        fn certify_exit_codes() {
            let dir = tempfile::tempdir().unwrap();
            let out = out_path(&dir, "cert.json");
            assert_eq!(run_args(&["certify", &data("gb_field_data.toml"), "--out", &out]), exit::OK);
            let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
            assert_eq!(report["combined"]["verdict"], "power_monotone");
            assert!(PathBuf::from(format!("{out}.manifest.json")).exists());

            assert_eq!(
                run_args(&["certify", &data("gb_counterexample.toml"), "--samples", "20000"]),
                exit::NOT_MONOTONE
            );

            let bad = out_path(&dir, "bad.toml");
            fs::write(&bad, "dimension = 2\n\n[[terms]\nalpha = 1\n").unwrap();
            assert_eq!(run_args(&["certify", &bad]), exit::PARSE);
            assert_eq!(run_args(&["certify", &out_path(&dir, "missing.toml")]), exit::PARSE);
        }

        #[test]
        fn law_digest_ignores_formatting() {
            let dir = tempfile::tempdir().unwrap();
            let reformatted = out_path(&dir, "law.json");
            fs::write(&reformatted, r#"{"gb":[[[0.2,0],[0,1.04]],[[0.67,0],[0,1.15]]],   "dimension":2}"#)
                .unwrap();
            let (a, b) = (out_path(&dir, "a.json"), out_path(&dir, "b.json"));
            assert_eq!(run_args(&["certify", &data("gb_field_data.toml"), "--out", &a]), exit::OK);
            assert_eq!(run_args(&["certify", &reformatted, "--out", &b]), exit::OK);
            let digest = |p: &str| -> Value {
                serde_json::from_str::<Value>(&fs::read_to_string(p).unwrap()).unwrap()["law_digest"].clone()
            };
            assert_eq!(digest(&a), digest(&b));
        }

        #[test]
        fn falsify_is_reproducible() {
            let dir = tempfile::tempdir().unwrap();
            let (a, b) = (out_path(&dir, "a.json"), out_path(&dir, "b.json"));
            let law = data("power_counterexample.json");
            for out in [&a, &b] {
                assert_eq!(
                    run_args(&["falsify", &law, "--samples", "5000", "--seed", "3", "--out", out]),
                    exit::OK
                );
            }
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
            let csv = out_path(&dir, "v.csv");
            assert_eq!(
                run_args(&["falsify", &law, "--samples", "5000", "--format", "csv", "--out", &csv]),
                exit::OK
            );
            assert!(!fs::read_to_string(&csv).unwrap().is_empty());
            assert_eq!(run_args(&["falsify", &data("darcy.toml"), "--samples", "5000"]), exit::NOT_FOUND);
        }

        #[test]
        fn solve_exit_codes_and_outputs() {
            let dir = tempfile::tempdir().unwrap();
            let out = out_path(&dir, "zero");
            assert_eq!(run_args(&["solve", &data("zero.toml"), "--out", &out]), exit::OK);
            for f in ["report.json", "faces.csv", "cells.csv", "manifest.json"] {
                assert!(dir.path().join("zero").join(f).exists(), "{f}");
            }
            let report: Value =
                serde_json::from_str(&fs::read_to_string(dir.path().join("zero/report.json")).unwrap())
                    .unwrap();
            assert_eq!(report["report"]["final_residual"], 0.0);

            assert_eq!(
                run_args(&["solve", &data("uncertified.toml"), "--out", &out_path(&dir, "u")]),
                exit::UNCERTIFIED
            );

            let stalled = out_path(&dir, "stalled");
            assert_eq!(
                run_args(&["solve", &data("m1.toml"), "--max-picard", "3", "--out", &stalled]),
                exit::NO_CONVERGENCE
            );
            assert!(dir.path().join("stalled/residual_history.csv").exists());
        }

        #[test]
        fn dependence_table() {
            let dir = tempfile::tempdir().unwrap();
            let problem = out_path(&dir, "small.toml");
            fs::write(&problem, "manufactured = \"M1\"\n\n[grid]\nnx = 6\nny = 6\n").unwrap();
            let out = out_path(&dir, "dep.csv");
            let code = run_args(&[
                "dependence",
                &problem,
                "--target",
                "boundary",
                "--shape",
                "1 + x*y",
                "--scales",
                "1e-1,1e-2,1e-3",
                "--format",
                "csv",
                "--out",
                &out,
            ]);
            assert_eq!(code, exit::OK);
            let text = fs::read_to_string(&out).unwrap();
            assert!(text.starts_with("delta,Delta,slope"));
            assert_eq!(text.lines().count(), 4);
            assert_eq!(run_args(&["dependence", &problem, "--shape", "x +* 1"]), exit::PARSE);
        }
    }
}
