//! Command implementations behind the `ssrkit` binary.
//!
//! Every command returns an [`Output`] holding the text to print and the
//! process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | malformed input or bad flags |
//! | 2 | no (unique) answer: infeasible, ambiguous, or numerically unsolvable |
//! | 3 | subset-search budget exhausted (partial report still printed) |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ssrkit::decompose::{decompose_system, project_measurements};
use ssrkit::harness::{run_grid, BenchCell, BenchRecord};
use ssrkit::io::{self, Instance};
use ssrkit::observability::{classify_eigenvalues, eig_report_with, sparse_observability_report};
use ssrkit::reductions::{cs_to_ssr, degeneracy_to_unobservability, CsInstance, DegeneracyInstance};
use ssrkit::simulate::{measure, random_attack, stealth_attack, AttackScenario};
use ssrkit::solvers::{
    brute_force_ssr, decomposition_ssr, trimmed_mean_ssr, vote_ssr, SolveOptions, SsrSolution, Uniqueness,
};
use ssrkit::spectral::{canonical_projectors, eigen_label, eigenstructure};
use ssrkit::{linalg, Mat, SearchConfig, SsrError, Tolerances, Vector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_ANSWER: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

/// Environment variable overriding the subset-search budget.
pub const BUDGET_ENV: &str = "SSRKIT_BUDGET";

#[derive(Parser, Debug)]
#[command(name = "ssrkit", version, about = "Secure state reconstruction for LTI systems under sensor attacks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Relative tolerance for rank decisions (overrides the instance).
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    /// Relative residual tolerance (overrides the instance).
    #[arg(long, global = true)]
    pub tol_residual: Option<f64>,
    /// Print JSON instead of a text summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for the parallel searches (1 disables parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenstructure, observability indices and eigenvalue classification.
    Analyze {
        path: PathBuf,
        /// Number of attacked sensors to classify for (defaults to the instance's `s`, then 1).
        #[arg(long)]
        s: Option<usize>,
    },
    /// Per-eigenvalue subsystems and sensor splits.
    Decompose { path: PathBuf },
    /// Reconstruct the initial state from the instance's measurements.
    Solve {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Decompose)]
        method: Method,
        #[arg(long)]
        s: Option<usize>,
        /// Scan all attack sets up to `s` for a second explanation.
        #[arg(long)]
        exhaustive_unique: bool,
        /// Skip sensors already flagged by voting when brute-forcing subsystems.
        #[arg(long)]
        prune: bool,
    },
    /// Generate (attacked) measurements for an instance.
    Simulate {
        path: PathBuf,
        /// Initial state as a JSON array or comma-separated list.
        #[arg(long)]
        x0: String,
        #[arg(long, value_enum, default_value_t = AttackKind::None)]
        attack: AttackKind,
        #[arg(long)]
        s: Option<usize>,
        /// Uniform measurement noise bound.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Amplitude of random attack signals.
        #[arg(long, default_value_t = 10.0)]
        magnitude: f64,
        /// Write the instance with measurements here instead of stdout.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Build SSR instances from the hardness reductions.
    Reduce {
        #[command(subcommand)]
        kind: ReduceKind,
    },
    /// Time the decomposed solver against monolithic brute force.
    Bench {
        /// State dimensions per eigenvalue.
        #[arg(long, value_delimiter = ',', default_value = "2")]
        nj: Vec<usize>,
        /// Numbers of distinct eigenvalues.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        r: Vec<usize>,
        #[arg(long, default_value_t = 12)]
        sensors: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
        /// Seeds per grid point, starting at `--seed`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Per-cell limit in seconds.
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the table as JSON.
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ReduceKind {
    /// Compressed sensing `{"F": m x n, "b": m}` to SSR.
    Cs { path: PathBuf },
    /// Linear degeneracy `{"F": p x n}` to sparse unobservability.
    Degeneracy { path: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Decompose,
    Brute,
    Vote,
    Trimmed,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    None,
    Random,
    Stealth,
}

/// Text to print and the exit code.
#[derive(Debug, Default)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Ssr(SsrError),
    Input(String),
}

impl From<SsrError> for CliError {
    fn from(e: SsrError) -> Self {
        CliError::Ssr(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Ssr(e) => write!(f, "{e}"),
            CliError::Input(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Ssr(e) => exit_code(e),
        }
    }
}

/// Maps every library error to one of the documented exit codes.
pub fn exit_code(e: &SsrError) -> i32 {
    use SsrError::*;
    match e {
        Json(_) | Invalid(_) | InvalidTolerance(_) | DimensionMismatch(_) | NonFinite(_) | DuplicateSensor(_)
        | NoSensors | UnknownSensor(_) => EXIT_INPUT,
        BudgetExhausted(_) => EXIT_BUDGET,
        Infeasible(_) | NoStealthAttack(_) | EigenFailure | IllSeparatedSpectrum(_) | NotDirectSum(_)
        | NotInvariant(_) | NumericalDegeneracy(_) | NotObservable | VoteFailure { .. } | TooFewEstimates { .. }
        | MissingParts(_) => EXIT_NO_ANSWER,
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct Context {
    json: bool,
    seed: u64,
    cfg: SearchConfig,
    tol_rank: Option<f64>,
    tol_residual: Option<f64>,
    warnings: Vec<String>,
}

impl Context {
    fn tolerances(&self, base: Tolerances) -> CliResult<Tolerances> {
        let mut tol = base;
        if let Some(v) = self.tol_rank {
            tol.rank_rtol = v;
        }
        if let Some(v) = self.tol_residual {
            tol.residual = v;
        }
        tol.validate()?;
        Ok(tol)
    }

    fn load(&mut self, path: &Path) -> CliResult<(Instance, Tolerances)> {
        let text = read(path)?;
        let (inst, warnings) = io::parse_instance(&text)?;
        self.warnings.extend(warnings);
        let tol = self.tolerances(inst.tolerances)?;
        Ok((inst, tol))
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn budget_from_env() -> CliResult<Option<u64>> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::Input(format!("{BUDGET_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn configure(global: &GlobalOpts) -> CliResult<SearchConfig> {
    let mut cfg = SearchConfig::default();
    if let Some(b) = budget_from_env()? {
        cfg.budget = b;
    }
    match global.threads {
        Some(0) => return Err(CliError::Input("--threads must be at least 1".into())),
        Some(1) => cfg.parallel = false,
        #[cfg(feature = "parallel")]
        Some(t) => {
            // A second call in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {}
        None => {}
    }
    Ok(cfg)
}

/// Parses the command line (without the program name handling of clap's
/// exit) and runs it.
pub fn run(cli: Cli) -> Output {
    let cfg = match configure(&cli.global) {
        Ok(c) => c,
        Err(e) => return failure(e, Vec::new()),
    };
    let mut ctx = Context {
        json: cli.global.json,
        seed: cli.global.seed,
        cfg,
        tol_rank: cli.global.tol_rank,
        tol_residual: cli.global.tol_residual,
        warnings: Vec::new(),
    };
    let res = match &cli.command {
        Command::Analyze { path, s } => cmd_analyze(&mut ctx, path, *s),
        Command::Decompose { path } => cmd_decompose(&mut ctx, path),
        Command::Solve {
            path,
            method,
            s,
            exhaustive_unique,
            prune,
        } => cmd_solve(&mut ctx, path, *method, *s, *exhaustive_unique, *prune),
        Command::Simulate {
            path,
            x0,
            attack,
            s,
            noise,
            magnitude,
            emit,
        } => cmd_simulate(&mut ctx, path, x0, *attack, *s, *noise, *magnitude, emit.as_deref()),
        Command::Reduce { kind } => match kind {
            ReduceKind::Cs { path } => cmd_reduce_cs(&mut ctx, path),
            ReduceKind::Degeneracy { path } => cmd_reduce_degeneracy(&mut ctx, path),
        },
        Command::Bench {
            nj,
            r,
            sensors,
            s,
            seeds,
            timeout,
            csv,
            out_json,
        } => cmd_bench(&mut ctx, nj, r, *sensors, *s, *seeds, *timeout, csv.as_deref(), out_json.as_deref()),
    };
    match res {
        Ok(mut out) => {
            out.stderr.splice(0..0, ctx.warnings.iter().map(|w| format!("warning: {w}")));
            out
        }
        Err(e) => failure(e, ctx.warnings),
    }
}

fn failure(e: CliError, warnings: Vec<String>) -> Output {
    let mut stderr: Vec<String> = warnings.into_iter().map(|w| format!("warning: {w}")).collect();
    stderr.push(format!("error: {e}"));
    Output {
        code: e.exit_code(),
        stdout: String::new(),
        stderr,
    }
}

fn list(ids: &[usize]) -> String {
    let parts: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn cmd_analyze_report(inst: &Instance, tol: &Tolerances, cfg: &SearchConfig, s: usize) -> CliResult<(Value, bool)> {
    let sys = &inst.system;
    let es = eigenstructure(sys.a(), tol)?;
    let eig = eig_report_with(sys, &es, tol);
    let sparse = sparse_observability_report(sys, tol, cfg);
    let ds = canonical_projectors(&es, tol)?;
    let bundle = decompose_system(sys, &es, &ds, tol, cfg)?;
    let class = classify_eigenvalues(&bundle, s, tol, cfg);
    let complete = sparse.exhaustive && class.is_exhaustive();
    let report = json!({
        "eigenstructure": io::eigenstructure_json(&es),
        "eig": io::eig_report_json(&es, &eig),
        "sparse": io::sparse_report_json(&sparse),
        "classification": io::classification_json(&es, &class),
    });
    Ok((report, complete))
}

fn cmd_analyze(ctx: &mut Context, path: &Path, s: Option<usize>) -> CliResult<Output> {
    let (inst, tol) = ctx.load(path)?;
    let s = s.or(inst.s).unwrap_or(1);
    let (report, complete) = cmd_analyze_report(&inst, &tol, &ctx.cfg, s)?;
    let code = if complete { EXIT_OK } else { EXIT_BUDGET };
    let mut stderr = Vec::new();
    if !complete {
        stderr.push("warning: search budget exhausted; indices are lower bounds".into());
    }
    let stdout = if ctx.json { pretty(&report) } else { analyze_text(&report) };
    Ok(Output { code, stdout, stderr })
}

fn analyze_text(r: &Value) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "eigenvalues:");
    for b in r["eigenstructure"]["blocks"].as_array().into_iter().flatten() {
        let label = b["label"].as_str().unwrap_or_default();
        let _ = writeln!(
            out,
            "  {label:<12} alpha {} gamma {}  observers {}",
            b["alpha"],
            b["gamma"],
            r["eig"]["S"][label]
        );
    }
    let _ = writeln!(out, "eigenvalue observability index: {}", r["eig"]["index"]);
    let sp = &r["sparse"];
    let _ = writeln!(
        out,
        "sparse observability index: {} (witness {}{})",
        sp["index"],
        sp["witness"],
        if sp["exhaustive"] == json!(true) { "" } else { ", search cut short" }
    );
    let c = &r["classification"];
    let names = |key: &str| -> String {
        let v: Vec<&str> = c[key].as_array().into_iter().flatten().filter_map(|x| x.as_str()).collect();
        format!("{{{}}}", v.join(", "))
    };
    let _ = writeln!(
        out,
        "classification (s = {}): J1 = {}  J2 = {}  J3 = {}",
        c["s"],
        names("J1"),
        names("J2"),
        names("J3")
    );
    out
}

fn cmd_decompose(ctx: &mut Context, path: &Path) -> CliResult<Output> {
    let (inst, tol) = ctx.load(path)?;
    let sys = &inst.system;
    let es = eigenstructure(sys.a(), &tol)?;
    let ds = canonical_projectors(&es, &tol)?;
    let bundle = decompose_system(sys, &es, &ds, &tol, &ctx.cfg)?;
    let mut v = io::bundle_json(&bundle, &tol);
    v["n"] = json!(sys.n());
    Ok(Output {
        code: EXIT_OK,
        stdout: pretty(&v),
        stderr: Vec::new(),
    })
}

fn cmd_solve(
    ctx: &mut Context,
    path: &Path,
    method: Method,
    s: Option<usize>,
    exhaustive_unique: bool,
    prune: bool,
) -> CliResult<Output> {
    let (inst, tol) = ctx.load(path)?;
    let s = s
        .or(inst.s)
        .ok_or_else(|| CliError::Input("number of attacked sensors unknown: pass --s or set \"s\"".into()))?;
    let meas = inst
        .measurements
        .as_ref()
        .ok_or_else(|| CliError::Input("instance has no measurements".into()))?;
    let sys = &inst.system;
    let cfg = ctx.cfg;
    let es = eigenstructure(sys.a(), &tol)?;
    let ds = canonical_projectors(&es, &tol)?;
    let bundle = decompose_system(sys, &es, &ds, &tol, &cfg)?;
    let proj = project_measurements(&bundle, meas)?;
    let mut opts = SolveOptions {
        tol,
        search: cfg,
        exhaustive_unique,
        prune,
        sparse_index: None,
    };
    let mut stderr = Vec::new();
    let mut code = EXIT_OK;
    let (sol, class_json): (SsrSolution, Option<Value>) = match method {
        Method::Brute => {
            let sparse = sparse_observability_report(sys, &tol, &cfg);
            if sparse.exhaustive {
                opts.sparse_index = Some(sparse.index);
            }
            (brute_force_ssr(&bundle, meas, s, &opts)?, None)
        }
        Method::Decompose | Method::Vote | Method::Trimmed => {
            let class = classify_eigenvalues(&bundle, s, &tol, &cfg);
            if !class.is_exhaustive() {
                code = EXIT_BUDGET;
                stderr.push("warning: classification search budget exhausted; uniqueness unknown".into());
            }
            let sol = match method {
                Method::Decompose => decomposition_ssr(&bundle, &class, &proj, &opts)?,
                Method::Vote => vote_ssr(&bundle, &class, &proj, &opts)?,
                _ => trimmed_mean_ssr(&bundle, &class.observers, &proj, s, &tol)?,
            };
            if !class.j1.is_empty() {
                let labels: Vec<String> = class.j1.iter().map(|&j| eigen_label(es.blocks[j].lambda)).collect();
                stderr.push(format!(
                    "warning: substates of eigenvalues {{{}}} cannot be reconstructed",
                    labels.join(", ")
                ));
            }
            (sol, Some(io::classification_json(&es, &class)))
        }
    };
    if sol.unique == Uniqueness::Ambiguous && code == EXIT_OK {
        code = EXIT_NO_ANSWER;
    }
    let mut v = io::solution_json(&sol, if sol.per_eigenvalue_status.is_empty() { None } else { Some(&es) });
    v["method"] = json!(format!("{method:?}").to_lowercase());
    if let Some(c) = class_json {
        v["classification"] = c;
    }
    let stdout = if ctx.json { pretty(&v) } else { solve_text(&v) };
    Ok(Output { code, stdout, stderr })
}

fn solve_text(v: &Value) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "x0 = {}", v["x"]);
    let ids: Vec<usize> = v["attack_set"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|x| x.as_u64().map(|i| i as usize))
        .collect();
    let _ = writeln!(out, "attacked sensors: {}", list(&ids));
    let _ = writeln!(out, "uniqueness: {}", v["unique"].as_str().unwrap_or("?"));
    let _ = writeln!(out, "residual: {:.3e}", v["residual"].as_f64().unwrap_or(f64::NAN));
    if let Some(m) = v["per_eigenvalue_status"].as_object() {
        for (label, st) in m {
            let _ = writeln!(out, "  {label:<12} {}", st.as_str().unwrap_or("?"));
        }
    }
    let _ = writeln!(out, "subsets examined: {}", v["examined"]);
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    ctx: &mut Context,
    path: &Path,
    x0: &str,
    attack: AttackKind,
    s: Option<usize>,
    noise: f64,
    magnitude: f64,
    emit: Option<&Path>,
) -> CliResult<Output> {
    let (mut inst, tol) = ctx.load(path)?;
    let x0 = io::parse_vector(x0)?;
    let sys = inst.system.clone();
    if x0.len() != sys.n() {
        return Err(CliError::Input(format!("x0 has length {}, expected {}", x0.len(), sys.n())));
    }
    let obs = sys.observability_matrices(&tol);
    let need_s = || {
        s.or(inst.s)
            .ok_or_else(|| CliError::Input("number of attacked sensors unknown: pass --s or set \"s\"".into()))
    };
    let scenario = match attack {
        AttackKind::None => AttackScenario::none(),
        AttackKind::Random => random_attack(&obs, need_s()?, magnitude, ctx.seed)?,
        AttackKind::Stealth => stealth_attack(&sys, need_s()?, &x0, &tol, &ctx.cfg)?,
    };
    let meas = measure(&obs, &x0, &scenario, noise, ctx.seed)?;
    if let Some(s) = s {
        inst.s = Some(s);
    }
    inst.measurements = Some(meas);
    let mut sc = io::scenario_json(&scenario);
    sc["x0"] = json!(x0.as_slice());
    sc["noise"] = json!(noise);
    sc["seed"] = json!(ctx.seed);
    inst.scenario = Some(sc);
    let text = pretty(&io::instance_to_json(&inst));
    let mut out = Output::default();
    match emit {
        Some(p) => {
            write(p, &text)?;
            out.stderr.push(format!("wrote {}", p.display()));
        }
        None => out.stdout = text,
    }
    Ok(out)
}

fn matrix_field(v: &Value, key: &str) -> CliResult<Mat> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.get(key).cloned().unwrap_or(Value::Null))
        .map_err(|e| CliError::Input(format!("field \"{key}\": {e}")))?;
    let cols = rows.first().map_or(0, |r| r.len());
    linalg::from_rows(&rows, cols).ok_or_else(|| CliError::Input(format!("field \"{key}\" has ragged rows")))
}

fn load_object(ctx: &mut Context, path: &Path, known: &[&str]) -> CliResult<Value> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(SsrError::from)?;
    let Some(obj) = v.as_object() else {
        return Err(CliError::Input("expected a JSON object".into()));
    };
    for k in obj.keys().filter(|k| !known.contains(&k.as_str())) {
        ctx.warnings.push(format!("ignoring unknown key \"{k}\""));
    }
    Ok(v)
}

fn cmd_reduce_cs(ctx: &mut Context, path: &Path) -> CliResult<Output> {
    let v = load_object(ctx, path, &["F", "b"])?;
    let tol = ctx.tolerances(Tolerances::default())?;
    let f = matrix_field(&v, "F")?;
    let b: Vec<f64> = serde_json::from_value(v.get("b").cloned().unwrap_or(Value::Null))
        .map_err(|e| CliError::Input(format!("field \"b\": {e}")))?;
    let cs = CsInstance::new(f, Vector::from_vec(b), &tol)?;
    let red = cs_to_ssr(&cs, &tol)?;
    let mut inst = Instance::new(red.system.clone());
    inst.s = Some(cs.n());
    inst.measurements = Some(red.measurements.clone());
    inst.mapping = Some(json!({
        "source": "compressed_sensing",
        "F": linalg::to_rows(&cs.f),
        "b": cs.b.as_slice(),
        "kernel": linalg::to_rows(&red.kernel),
        "particular": red.particular.as_slice(),
        "back_translation": "sensor i measures row i of the kernel basis C; for a reconstructed state x the \
                             sparse vector is e = particular - C x, and its support is the attack set",
    }));
    Ok(Output {
        code: EXIT_OK,
        stdout: pretty(&io::instance_to_json(&inst)),
        stderr: Vec::new(),
    })
}

fn cmd_reduce_degeneracy(ctx: &mut Context, path: &Path) -> CliResult<Output> {
    let v = load_object(ctx, path, &["F"])?;
    let tol = ctx.tolerances(Tolerances::default())?;
    let di = DegeneracyInstance::new(matrix_field(&v, "F")?, &tol)?;
    let (sys, r) = degeneracy_to_unobservability(&di)?;
    let mut inst = Instance::new(sys);
    inst.mapping = Some(json!({
        "source": "linear_degeneracy",
        "F": linalg::to_rows(&di.f),
        "r": r,
        "back_translation": "F has a singular square submatrix iff removing some r sensors leaves the \
                             system unobservable (its sparse observability index is below r); the removed \
                             sensors are the rows outside the singular submatrix",
    }));
    Ok(Output {
        code: EXIT_OK,
        stdout: pretty(&io::instance_to_json(&inst)),
        stderr: Vec::new(),
    })
}

/// Writes bench records as CSV.
pub fn records_csv(records: &[BenchRecord]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| CliError::Input(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    ctx: &mut Context,
    nj: &[usize],
    r: &[usize],
    sensors: usize,
    s: usize,
    seeds: u64,
    timeout: f64,
    csv_path: Option<&Path>,
    json_path: Option<&Path>,
) -> CliResult<Output> {
    if !(timeout.is_finite() && timeout > 0.0) {
        return Err(CliError::Input(format!("--timeout must be positive, got {timeout}")));
    }
    if nj.contains(&0) || r.contains(&0) || sensors == 0 || s > sensors {
        return Err(CliError::Input("grid values must be positive and s at most the number of sensors".into()));
    }
    let tol = ctx.tolerances(Tolerances::default())?;
    let mut cells = Vec::new();
    for &nj in nj {
        for &r in r {
            for k in 0..seeds {
                cells.push(BenchCell {
                    nj,
                    r,
                    n_sensors: sensors,
                    s,
                    seed: ctx.seed.wrapping_add(k),
                });
            }
        }
    }
    let records = run_grid(&cells, &tol, &ctx.cfg, Duration::from_secs_f64(timeout))?;
    let csv_text = records_csv(&records)?;
    let json_text = pretty(&json!(records));
    if let Some(p) = csv_path {
        write(p, &csv_text)?;
    }
    if let Some(p) = json_path {
        write(p, &json_text)?;
    }
    let mut out = Output {
        code: EXIT_OK,
        stdout: if ctx.json { json_text } else { csv_text },
        stderr: Vec::new(),
    };
    for rec in records.iter().filter(|r| r.timed_out) {
        out.stderr.push(format!(
            "warning: cell n={} N={} r={} seed={} timed out",
            rec.n, rec.n_sensors, rec.r, rec.seed
        ));
    }
    Ok(out)
}
