use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mictact::detect::{response_time_study, MicDetector, MicDetectorConfig, StudyConfig};
use mictact::harness::SplitStrategy;
use mictact::pipeline::{self, CorpusSpec, DragGrid, RunConfig, RunInputs, MANIFEST_FILE};
use mictact::signal::WindowConfig;
use mictact::sim::{build_layout, SimConfig};
use mictact::storage::WindowDataset;
use mictact::Task;

/// Vibration-array tactile sensing: simulate, preprocess, train, evaluate, detect.
#[derive(Parser, Debug)]
#[command(name = "mictact", version)]
struct Cli {
    /// Root for default output locations.
    #[arg(long, global = true, env = "MICTACT_OUT", default_value = "runs")]
    out_root: PathBuf,

    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a drag or tap corpus with a manifest.
    Simulate(SimulateArgs),
    /// Turn a corpus into a labeled window dataset.
    Preprocess(PreprocessArgs),
    /// Train and evaluate models over the folds of a split plan.
    Train(TrainArgs),
    /// Re-evaluate the checkpoints of a finished run.
    Eval(EvalArgs),
    /// Contact-detection response-time study, or live onset detection.
    Detect(DetectArgs),
    /// Combine reports from run directories.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Drag,
    Tap,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Texture,
    Localize,
    Velocity,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Texture => Task::Texture,
            TaskArg::Localize => Task::Localize,
            TaskArg::Velocity => Task::Velocity,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    HeldOut,
    Cv,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "drag")]
    kind: Kind,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Drags per texture and velocity.
    #[arg(long, default_value_t = pipeline::DESK_DRAGS_PER_CELL, conflicts_with = "full")]
    drags_per_cell: usize,
    /// Full-size grid (200 drags per texture and velocity).
    #[arg(long)]
    full: bool,
    /// Taps per distance and velocity.
    #[arg(long, default_value_t = 45)]
    taps_per_cell: usize,
    /// Simulator parameters (TOML); missing keys keep their defaults.
    #[arg(long)]
    sim_config: Option<PathBuf>,
    /// Output directory [default: <out-root>/corpus or <out-root>/taps].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Window length in samples [default: per task].
    #[arg(long)]
    window: Option<usize>,
    /// Stride between windows in samples.
    #[arg(long)]
    offset: Option<usize>,
    /// Output file [default: <out-root>/<task>.mtwd].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Window dataset written by `preprocess`.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    dataset: Option<PathBuf>,
    /// Corpus manifest; windows are extracted in memory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    /// Velocity only: history lengths in seconds, one run each (needs --manifest).
    #[arg(long, value_delimiter = ',', requires = "manifest")]
    histories: Vec<f64>,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Run only these folds (repeatable).
    #[arg(long = "fold")]
    folds: Vec<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Seeds initialization, shuffling and the split plan.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    lr: Option<f64>,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
    /// Localization run whose checkpoints drive the velocity baseline.
    #[arg(long)]
    position_run: Option<PathBuf>,
    /// Simulator config giving the sensor layout [default: the corpus's].
    #[arg(long)]
    sim_config: Option<PathBuf>,
    /// Output directory [default: <out-root>/train-<task>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory of a finished training run.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    position_run: Option<PathBuf>,
    #[arg(long)]
    sim_config: Option<PathBuf>,
    /// Output directory [default: <run>/eval].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Tap corpus to analyze; without it, taps are simulated on the fly.
    #[arg(long, conflicts_with = "stream")]
    manifest: Option<PathBuf>,
    /// Read ADC counts from stdin (one per line) and report the onset.
    #[arg(long)]
    stream: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 45)]
    taps_per_cell: usize,
    /// Microphone feeding the detector.
    #[arg(long, default_value_t = 0)]
    mic: usize,
    /// Rise above the running median, in ADC counts.
    #[arg(long, default_value_t = 18.0)]
    threshold: f64,
    #[arg(long, default_value_t = 20)]
    history: usize,
    #[arg(long)]
    sim_config: Option<PathBuf>,
    /// Output directory [default: <out-root>/detect].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run or study directories.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Output directory [default: <out-root>/report].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Invalid combination of otherwise well-formed arguments.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_sim_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(SimConfig::from_toml(&text)?)
        }
        None => Ok(SimConfig::default()),
    }
}

fn simulate(root: &Path, a: SimulateArgs) -> Result<()> {
    let sim = load_sim_config(a.sim_config.as_deref())?;
    let (spec, default_dir) = match a.kind {
        Kind::Drag => {
            let grid = if a.full {
                DragGrid::full(a.seed)
            } else {
                DragGrid::standard(a.drags_per_cell, a.seed)
            };
            (CorpusSpec::Drags(grid), "corpus")
        }
        Kind::Tap => {
            let study = StudyConfig {
                seed: a.seed,
                episodes_per_cell: a.taps_per_cell,
                ..StudyConfig::default()
            };
            (CorpusSpec::Taps(study), "taps")
        }
    };
    let out = a.out.unwrap_or_else(|| root.join(default_dir));
    let manifest = pipeline::simulate_corpus(&spec, &sim, &out)?;
    println!("{} episodes -> {}", manifest.episodes.len(), out.join(MANIFEST_FILE).display());
    Ok(())
}

fn preprocess(root: &Path, a: PreprocessArgs) -> Result<()> {
    let task: Task = a.task.into();
    let mut cfg = WindowConfig::with_window(a.window.unwrap_or(task.default_window()));
    if let Some(o) = a.offset {
        if o == 0 {
            return Err(usage("--offset must be positive"));
        }
        cfg.offset = o;
    }
    cfg.keep_raw = task == Task::Velocity;
    let ds = pipeline::preprocess(&a.manifest, &cfg)?;
    let out = a.out.unwrap_or_else(|| root.join(format!("{task}.mtwd")));
    ds.write(&out)?;
    print!("{}", pipeline::dataset_summary(&ds));
    println!("-> {}", out.display());
    Ok(())
}

fn layout_for(sim_config: Option<&Path>, manifest: Option<&Path>) -> Result<mictact::SensorLayout> {
    let sim = match (sim_config, manifest) {
        (Some(p), _) => load_sim_config(Some(p))?,
        (None, Some(m)) => pipeline::corpus_sim_config(m)?,
        (None, None) => SimConfig::default(),
    };
    Ok(build_layout(&sim.layout)?)
}

fn train(root: &Path, a: TrainArgs) -> Result<()> {
    let task: Task = a.task.into();
    let out = a.out.clone().unwrap_or_else(|| root.join(format!("train-{task}")));
    let mut cfg = RunConfig::for_task(task, &out);
    if let Some(w) = a.window {
        cfg = cfg.with_window(w);
    }
    if let Some(s) = a.split {
        cfg.split = match s {
            SplitArg::HeldOut => SplitStrategy::HeldOutVelocity,
            SplitArg::Cv => SplitStrategy::VelocityCv,
        };
    }
    cfg.folds = a.folds.clone();
    cfg.split_seed = a.seed;
    cfg.train.seed = a.seed;
    if let Some(e) = a.epochs {
        if e == 0 {
            return Err(usage("--epochs must be positive"));
        }
        cfg.train.max_epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.optimizer.lr = lr;
    }
    cfg.train.patience = a.patience;
    if a.position_run.is_some() && task != Task::Velocity {
        return Err(usage("--position-run only applies to the velocity task"));
    }
    let layout = layout_for(a.sim_config.as_deref(), a.manifest.as_deref())?;
    let inputs = RunInputs {
        layout: &layout,
        position_run: a.position_run.as_deref(),
    };

    if !a.histories.is_empty() {
        if task != Task::Velocity {
            return Err(usage("--histories only applies to the velocity task"));
        }
        if a.window.is_some() {
            return Err(usage("--histories and --window are exclusive"));
        }
        let manifest = a.manifest.as_deref().expect("clap requires --manifest");
        let runs = pipeline::velocity_history_runs(manifest, &cfg, &a.histories, inputs)?;
        for r in &runs {
            print!("{}", mictact::harness::reports_csv(&r.reports));
        }
        println!("-> {}", out.join("velocity_table.csv").display());
        return Ok(());
    }

    let ds = match (&a.dataset, &a.manifest) {
        (Some(d), _) => WindowDataset::read(d)?,
        (None, Some(m)) => {
            let wcfg = WindowConfig {
                keep_raw: task == Task::Velocity,
                ..WindowConfig::with_window(cfg.window)
            };
            pipeline::preprocess(m, &wcfg)?
        }
        (None, None) => unreachable!("clap requires a dataset or manifest"),
    };
    let summary = pipeline::train_run(&ds, &cfg, inputs)?;
    print!("{}", mictact::harness::reports_csv(&summary.reports));
    println!("-> {}", out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ds = WindowDataset::read(&a.dataset)?;
    let layout = layout_for(a.sim_config.as_deref(), None)?;
    let out = a.out.unwrap_or_else(|| a.run.join("eval"));
    let summary = pipeline::eval_run(
        &a.run,
        &ds,
        &out,
        RunInputs {
            layout: &layout,
            position_run: a.position_run.as_deref(),
        },
    )?;
    print!("{}", mictact::harness::reports_csv(&summary.reports));
    println!("-> {}", out.display());
    Ok(())
}

fn detect_stream(cfg: MicDetectorConfig) -> Result<()> {
    let mut det = MicDetector::new(cfg);
    let stdin = std::io::stdin();
    let mut i = 0usize;
    for line in stdin.lock().lines() {
        let line = line.context("reading stdin")?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: u16 = line
            .parse()
            .map_err(|_| mictact::Error::Format(format!("line {}: `{line}` is not an ADC count", i + 1)))?;
        if let Some(idx) = det.feed(v) {
            println!("contact at sample {idx}");
            return Ok(());
        }
        i += 1;
    }
    println!("no contact in {i} samples");
    Ok(())
}

fn detect(root: &Path, a: DetectArgs) -> Result<()> {
    let mic_cfg = MicDetectorConfig {
        threshold_counts: a.threshold,
        history: a.history,
    };
    if a.history == 0 {
        return Err(usage("--history must be positive"));
    }
    if a.stream {
        return detect_stream(mic_cfg);
    }
    let cfg = StudyConfig {
        seed: a.seed,
        episodes_per_cell: a.taps_per_cell,
        mic: a.mic,
        mic_detector: mic_cfg,
        ..StudyConfig::default()
    };
    let table = match &a.manifest {
        Some(m) => pipeline::detect_from_manifest(m, &cfg)?,
        None => {
            let sim = load_sim_config(a.sim_config.as_deref())?;
            let layout = build_layout(&sim.layout)?;
            if a.mic >= layout.mic_positions.len() {
                return Err(usage(format!("--mic {} does not exist", a.mic)));
            }
            response_time_study(&layout, &sim.tap, &cfg)?
        }
    };
    let out = a.out.unwrap_or_else(|| root.join("detect"));
    pipeline::write_study(&out, &cfg, &table)?;
    print!("{}", table.to_text());
    println!("-> {}", out.display());
    Ok(())
}

fn report(root: &Path, a: ReportArgs) -> Result<()> {
    let dirs: Vec<&Path> = a.runs.iter().map(|p| p.as_path()).collect();
    let collected = pipeline::collect_runs(&dirs)?;
    let out = a.out.unwrap_or_else(|| root.join("report"));
    pipeline::write_report(&out, &collected)?;
    if !collected.reports.is_empty() {
        print!("{}", mictact::harness::reports_csv(&collected.reports));
    }
    if !collected.velocity.is_empty() {
        print!("{}", pipeline::velocity_table_csv(&collected.velocity));
    }
    for t in &collected.studies {
        print!("{}", t.to_text());
    }
    println!("-> {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let root = cli.out_root;
    match cli.command {
        Command::Simulate(a) => simulate(&root, a),
        Command::Preprocess(a) => preprocess(&root, a),
        Command::Train(a) => train(&root, a),
        Command::Eval(a) => eval(a),
        Command::Detect(a) => detect(&root, a),
        Command::Report(a) => report(&root, a),
    }
}

/// 1 for usage errors, 3 for numeric failures, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<mictact::Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

