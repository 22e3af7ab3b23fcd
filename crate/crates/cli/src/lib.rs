//! Command implementations behind the `apdeploy` binary.
//!
//! Every command writes `manifest.json` into the output directory before any
//! result, then its artifacts. Wall-clock timings go to `timings.txt` so the
//! JSON and CSV outputs stay byte-identical across reruns.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use apdeploy_core::baselines::{cem_optimize, grid_oracle, random_search, Problem};
use apdeploy_core::report::{self, SummaryStats};
use apdeploy_core::sac::train_with_trace;
use apdeploy_core::{
    seeded_rng, sample_trajectory, AgentState, Deployment, DeploymentEnv, Error, ExperimentConfig, MetricReport,
    ObjectiveKind, ObjectiveSpec, OracleResult, SacConfig, SolverKind, SolverSpec, SweepSpec,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stream for random search inside the CLI pipelines.
const RANDOM_SEARCH_STREAM: u64 = 5;

#[derive(Debug, Parser)]
#[command(name = "apdeploy", version, about = "AP placement for cell-free sensing and communication")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Overrides the objective kind (max-sum, max-min, comm-only,
    /// sensing-only, weighted-sum).
    #[arg(long, global = true)]
    pub objective: Option<String>,

    /// Overrides the solver (sac, cem, random, grid).
    #[arg(long, global = true)]
    pub solver: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Scores a deployment file.
    Evaluate {
        /// JSON file `{"tx": [[x, y], ...], "rx": [[x, y], ...]}`.
        #[arg(long)]
        deployment: PathBuf,
    },
    /// Trains a SAC agent.
    Train,
    /// Runs one reference optimizer (grid by default).
    Oracle,
    /// Runs every optimizer on the same problem.
    Compare,
    /// Runs the configured solver over AP counts and objectives.
    Sweep {
        /// Comma separated `MxN` pairs, e.g. `1x1,2x2`.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        /// Comma separated objective kinds.
        #[arg(long, value_delimiter = ',')]
        objectives: Vec<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evaluate { .. } => "evaluate",
            Command::Train => "train",
            Command::Oracle => "oracle",
            Command::Compare => "compare",
            Command::Sweep { .. } => "sweep",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] Error),

    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "not-found",
            CliError::File { .. } => "io",
            CliError::Json { .. } => "parse",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "not-found" => 3,
            "parse" => 4,
            "validation" => 5,
            "budget" => 6,
            "io" => 7,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub objective: ObjectiveSpec,
    pub solver: SolverSpec,
    /// The effective config, as TOML.
    pub config: String,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub timings: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.txt";

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

/// Loads the config and applies the global overrides.
pub fn load_config(global: &GlobalArgs) -> CliResult<ExperimentConfig> {
    let path = global.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let text = read_file(path)?;
    let mut config = ExperimentConfig::from_toml_str(&text)?;
    if let Some(seed) = global.seed {
        config = config.with_seed(seed);
    }
    if let Some(kind) = &global.objective {
        config.objective.kind = kind.parse()?;
    }
    if let Some(kind) = &global.solver {
        config.solver.kind = kind.parse()?;
    }
    config.validate()?;
    Ok(config)
}

pub fn load_deployment(path: &Path) -> CliResult<Deployment> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

struct Timings {
    start: Instant,
    lines: String,
}

impl Timings {
    fn new() -> Self {
        Self { start: Instant::now(), lines: String::new() }
    }

    fn record(&mut self, label: &str, since: Instant) {
        writeln!(self.lines, "{label}\t{:.3}s", since.elapsed().as_secs_f64()).unwrap();
    }

    fn finish(mut self, dir: &Path) -> CliResult<()> {
        let total = self.start;
        self.record("total", total);
        write_file(&dir.join(TIMINGS_FILE), &self.lines)
    }
}

/// Output directory plus the list of files the manifest promises.
struct Run {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Run {
    fn start(global: &GlobalArgs, command: &str, config: &ExperimentConfig, outputs: &[&str]) -> CliResult<Self> {
        let dir = global.out_dir.clone();
        fs::create_dir_all(&dir).map_err(|source| CliError::File { path: dir.clone(), source })?;
        let mut outputs: Vec<String> = outputs.iter().map(|s| s.to_string()).collect();
        outputs.push(TIMINGS_FILE.to_string());
        let manifest = RunManifest {
            tool: "apdeploy".into(),
            version: VERSION.into(),
            command: command.into(),
            seed: config.seed(),
            objective: config.objective,
            solver: config.solver.clone(),
            config: config.to_toml_string(),
            outputs: outputs.clone(),
            timings: TIMINGS_FILE.into(),
        };
        write_file(&dir.join(MANIFEST_FILE), &report::to_json(&manifest))?;
        Ok(Self { dir, outputs })
    }

    fn path(&self, name: &str) -> PathBuf {
        debug_assert!(self.outputs.iter().any(|o| o == name), "{name} missing from manifest");
        self.dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        write_file(&self.path(name), contents)
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Evaluate { deployment } => cmd_evaluate(&cli.global, deployment),
        Command::Train => cmd_train(&cli.global),
        Command::Oracle => cmd_oracle(&cli.global),
        Command::Compare => cmd_compare(&cli.global),
        Command::Sweep { pairs, objectives } => cmd_sweep(&cli.global, pairs, objectives),
    }
}

fn deployment_plot(problem: &Problem, config: &ExperimentConfig, deployment: &Deployment, title: &str) -> String {
    report::deployment_svg(
        &problem.region,
        deployment,
        &problem.ues,
        &config.scenario.trajectory,
        &problem.targets,
        title,
    )
}

fn write_report(run: &Run, r: &MetricReport) -> CliResult<()> {
    run.write("report.json", &report::to_json(r))?;
    run.write("report.csv", &report::metric_csv(r))
}

pub fn cmd_evaluate(global: &GlobalArgs, deployment_path: &Path) -> CliResult<()> {
    let config = load_config(global)?;
    let deployment = load_deployment(deployment_path)?;
    if deployment.tx.is_empty() || deployment.rx.is_empty() {
        return Err(Error::validation("deployment", "needs at least one tx and one rx AP").into());
    }
    deployment.validate_in(&config.scenario.region)?;
    let timings = Timings::new();
    let run = Run::start(global, "evaluate", &config, &["report.json", "report.csv", "deployment.svg"])?;

    let mut scenario = config.scenario.clone();
    scenario.num_tx = deployment.tx.len();
    scenario.num_rx = deployment.rx.len();
    let problem = Problem::from_scenario(&scenario, config.objective)?;
    let r = problem.report(&deployment);
    write_report(&run, &r)?;
    run.write("deployment.svg", &deployment_plot(&problem, &config, &deployment, "evaluated deployment"))?;
    timings.finish(&run.dir)
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    seed: u64,
    config: &'a SacConfig,
    agent: &'a AgentState,
}

pub fn cmd_train(global: &GlobalArgs) -> CliResult<()> {
    let config = load_config(global)?;
    let mut timings = Timings::new();
    let run = Run::start(
        global,
        "train",
        &config,
        &["checkpoint.json", "curve.csv", "trace.csv", "report.json", "report.csv", "deployment.svg"],
    )?;

    let sac = config.sac_config();
    let mut env = DeploymentEnv::new(config.env_config())?;
    let trace_path = run.path("trace.csv");
    let trace_file = fs::File::create(&trace_path).map_err(|source| CliError::File { path: trace_path, source })?;
    let mut trace = BufWriter::new(trace_file);
    let t = Instant::now();
    let out = train_with_trace(&mut env, &sac, Some(&mut trace))?;
    trace.flush().map_err(Error::from)?;
    timings.record("train", t);

    let checkpoint = Checkpoint { seed: sac.seed, config: &sac, agent: &out.agent };
    run.write("checkpoint.json", &report::to_json(&checkpoint))?;
    run.write("curve.csv", &report::curve_csv(&out.curve))?;
    write_report(&run, &out.greedy_report)?;
    let svg = report::deployment_svg(
        &config.scenario.region,
        &out.greedy_deployment,
        &out.eval_ues,
        &config.scenario.trajectory,
        &sample_trajectory(&config.scenario.trajectory),
        "SAC greedy deployment",
    );
    run.write("deployment.svg", &svg)?;
    timings.finish(&run.dir)
}

/// Runs one baseline solver on `problem` with the config's settings.
pub fn run_baseline(kind: SolverKind, problem: &Problem, config: &ExperimentConfig) -> CliResult<OracleResult> {
    Ok(match kind {
        SolverKind::Grid => {
            let g = &config.solver.grid;
            grid_oracle(problem, g.points_per_axis, g.max_evaluations)?
        }
        SolverKind::Random => {
            let mut rng = seeded_rng(config.seed(), RANDOM_SEARCH_STREAM);
            random_search(problem, config.solver.random.budget, &mut rng)?
        }
        SolverKind::Cem => cem_optimize(problem, &config.cem_config())?,
        SolverKind::Sac => return Err(CliError::Usage("sac is not a baseline solver".into())),
    })
}

/// Trains SAC on `config` and scores its greedy deployment on `problem`.
pub fn run_sac(problem: &Problem, config: &ExperimentConfig) -> CliResult<OracleResult> {
    let sac = config.sac_config();
    let mut env = DeploymentEnv::new(config.env_config())?;
    let out = apdeploy_core::train(&mut env, &sac)?;
    Ok(OracleResult {
        method: "sac".into(),
        best_value: problem.value(&out.greedy_deployment),
        best_deployment: out.greedy_deployment,
        evaluations: sac.total_steps as u64,
    })
}

fn solve(kind: SolverKind, problem: &Problem, config: &ExperimentConfig) -> CliResult<OracleResult> {
    match kind {
        SolverKind::Sac => run_sac(problem, config),
        _ => run_baseline(kind, problem, config),
    }
}

pub fn cmd_oracle(global: &GlobalArgs) -> CliResult<()> {
    let mut config = load_config(global)?;
    if global.solver.is_none() {
        config.solver.kind = SolverKind::Grid;
    }
    if config.solver.kind == SolverKind::Sac {
        return Err(CliError::Usage("oracle runs grid, random or cem; use `train` for sac".into()));
    }
    let mut timings = Timings::new();
    let run = Run::start(global, "oracle", &config, &["oracle.json", "report.json", "report.csv", "deployment.svg"])?;
    let problem = Problem::from_scenario(&config.scenario, config.objective)?;
    let t = Instant::now();
    let result = run_baseline(config.solver.kind, &problem, &config)?;
    timings.record(&result.method, t);
    run.write("oracle.json", &report::to_json(&result))?;
    write_report(&run, &problem.report(&result.best_deployment))?;
    let title = format!("{} optimum", result.method);
    run.write("deployment.svg", &deployment_plot(&problem, &config, &result.best_deployment, &title))?;
    timings.finish(&run.dir)
}

pub const COMPARE_CSV_HEADER: &str = "method,objective_kind,value,evaluations";

/// Grid (when within its budget), random search, CEM and SAC on one fixed
/// problem.
pub fn cmd_compare(global: &GlobalArgs) -> CliResult<()> {
    let config = load_config(global)?;
    let mut timings = Timings::new();
    let run = Run::start(global, "compare", &config, &["compare.csv", "compare.json"])?;
    let problem = Problem::from_scenario(&config.scenario, config.objective)?;

    let mut results = Vec::new();
    for kind in [SolverKind::Grid, SolverKind::Random, SolverKind::Cem, SolverKind::Sac] {
        let t = Instant::now();
        match solve(kind, &problem, &config) {
            Ok(r) => {
                timings.record(kind.as_str(), t);
                results.push(r);
            }
            Err(CliError::Core(Error::BudgetExceeded { count, cap })) => {
                eprintln!("skipping grid: {count} evaluations exceed the cap of {cap}");
            }
            Err(e) => return Err(e),
        }
    }

    let mut csv = format!("{COMPARE_CSV_HEADER}\n");
    for r in &results {
        writeln!(csv, "{},{},{},{}", r.method, config.objective.kind, r.best_value, r.evaluations).unwrap();
    }
    run.write("compare.csv", &csv)?;
    run.write("compare.json", &report::to_json(&results))?;
    timings.finish(&run.dir)
}

pub const SWEEP_CSV_HEADER: &str = "cell,num_tx,num_rx,objective,solver,seed,rate_per_sample,fim_per_sample,min_rate,min_fim_det,objective_value,evaluations";

/// One sweep row.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub num_tx: usize,
    pub num_rx: usize,
    pub objective: ObjectiveKind,
    pub solver: SolverKind,
    pub seed: u64,
    pub stats: SummaryStats,
    pub evaluations: u64,
}

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.cell,
            self.num_tx,
            self.num_rx,
            self.objective,
            self.solver.as_str(),
            self.seed,
            self.stats.csv_fields(),
            self.evaluations
        )
    }
}

fn parse_pair(s: &str) -> CliResult<[usize; 2]> {
    let bad = || CliError::Usage(format!("bad AP pair `{s}`, expected MxN"));
    let (m, n) = s.split_once('x').ok_or_else(bad)?;
    Ok([m.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?])
}

/// Sweep cells from the command line, falling back to the `[sweep]` table.
pub fn sweep_spec(config: &ExperimentConfig, pairs: &[String], objectives: &[String]) -> CliResult<SweepSpec> {
    let spec = if pairs.is_empty() && objectives.is_empty() {
        config.sweep.clone().ok_or_else(|| Error::validation("sweep", "no [sweep] table and no --pairs/--objectives"))?
    } else {
        SweepSpec {
            ap_pairs: pairs.iter().map(|p| parse_pair(p)).collect::<CliResult<_>>()?,
            objectives: objectives.iter().map(|o| o.parse()).collect::<Result<_, Error>>()?,
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Solves every cell in order, handing each row to `sink` as soon as it is
/// done.
pub fn sweep_rows(
    config: &ExperimentConfig,
    spec: &SweepSpec,
    mut sink: impl FnMut(&SweepRow) -> CliResult<()>,
) -> CliResult<Vec<SweepRow>> {
    let s = &config.scenario;
    let pairs = if spec.ap_pairs.is_empty() { vec![[s.num_tx, s.num_rx]] } else { spec.ap_pairs.clone() };
    let objectives = if spec.objectives.is_empty() { vec![config.objective.kind] } else { spec.objectives.clone() };
    let mut rows = Vec::new();
    for [m, n] in pairs {
        for &kind in &objectives {
            let mut cell = config.clone();
            cell.scenario.num_tx = m;
            cell.scenario.num_rx = n;
            cell.objective.kind = kind;
            let problem = Problem::from_scenario(&cell.scenario, cell.objective)?;
            let result = solve(cell.solver.kind, &problem, &cell)?;
            let row = SweepRow {
                cell: rows.len(),
                num_tx: m,
                num_rx: n,
                objective: kind,
                solver: cell.solver.kind,
                seed: cell.seed(),
                stats: SummaryStats::from(&problem.report(&result.best_deployment)),
                evaluations: result.evaluations,
            };
            sink(&row)?;
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(global: &GlobalArgs, pairs: &[String], objectives: &[String]) -> CliResult<()> {
    let config = load_config(global)?;
    let spec = sweep_spec(&config, pairs, objectives)?;
    let mut manifest_config = config.clone();
    manifest_config.sweep = Some(spec.clone());
    let mut timings = Timings::new();
    let run = Run::start(global, "sweep", &manifest_config, &["sweep.csv"])?;

    let path = run.path("sweep.csv");
    let file = fs::File::create(&path).map_err(|source| CliError::File { path: path.clone(), source })?;
    let mut out = BufWriter::new(file);
    let io = |source| CliError::File { path: path.clone(), source };
    writeln!(out, "{SWEEP_CSV_HEADER}").map_err(io)?;
    out.flush().map_err(io)?;
    let mut last = Instant::now();
    sweep_rows(&config, &spec, |row| {
        writeln!(out, "{}", row.csv()).map_err(io)?;
        out.flush().map_err(io)?;
        timings.record(&format!("cell {} ({}x{} {})", row.cell, row.num_tx, row.num_rx, row.objective), last);
        last = Instant::now();
        Ok(())
    })?;
    timings.finish(&run.dir)
}
