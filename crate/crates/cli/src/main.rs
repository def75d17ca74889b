use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mbdnn_core::dataset::{read_csv, Dataset};
use mbdnn_core::eval::{write_json, write_trajectory, Predictor};
use mbdnn_core::experiment::{self, run_experiment, ExperimentConfig, ExperimentSummary, StructureKind, Trained};
use mbdnn_core::ffn::{load_model, FfnModel};
use mbdnn_core::mbd::TimeGrid;
use mbdnn_core::tuning::{SfixedSuite, SUITE_FILE};
use mbdnn_core::{Error, Result, SystemKind, SystemSpec};

/// Environment variable naming the default output root.
const OUTPUT_ENV: &str = "MBDNN_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "mbdnn", version, about = "Neural meta-models of multibody dynamics")]
struct Cli {
    /// Output root (falls back to the config's output_dir, then ./mbdnn-out).
    #[arg(long, global = true, env = OUTPUT_ENV)]
    out: Option<PathBuf>,

    /// Maximum worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one design point and write its trajectory CSV.
    Simulate {
        #[command(subcommand)]
        system: SimulateSystem,
    },
    /// Build training datasets (CSV + .meta.json) for a configuration.
    GenData(ConfigArgs),
    /// Train a model or per-instant suite from generated datasets.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// `sfull.csv` or a directory of per-instant CSV files.
        #[arg(long)]
        data: PathBuf,
    },
    /// Grid-search hyper-parameters and write the leaderboard.
    GridSearch {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a trained model on random unseen points and showcase trajectories.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// `model.json`, a suite directory, or a training output directory.
        #[arg(long)]
        model: PathBuf,
    },
    /// Generate, train and evaluate one case study end to end.
    Reproduce {
        case: Case,
        #[command(flatten)]
        scaling: Scaling,
        #[arg(long, value_enum)]
        structure: Option<Structure>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Single,
    Double,
    Slider,
}

impl From<Case> for SystemKind {
    fn from(c: Case) -> Self {
        match c {
            Case::Single => SystemKind::Single,
            Case::Double => SystemKind::Double,
            Case::Slider => SystemKind::Slider,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Structure {
    Sfull,
    Sfixed,
}

impl From<Structure> for StructureKind {
    fn from(s: Structure) -> Self {
        match s {
            Structure::Sfull => StructureKind::Sfull,
            Structure::Sfixed => StructureKind::Sfixed,
        }
    }
}

#[derive(Args)]
struct Scaling {
    /// Fraction of lattice intervals kept per dimension, in (0, 1].
    #[arg(long)]
    scale: Option<f64>,
    /// Overrides the number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration; omitted fields take the system defaults.
    #[arg(long, required_unless_present = "system")]
    config: Option<PathBuf>,
    /// Use the default configuration of this system.
    #[arg(long, value_enum, conflicts_with = "config")]
    system: Option<Case>,
    #[arg(long, value_enum)]
    structure: Option<Structure>,
    #[command(flatten)]
    scaling: Scaling,
}

#[derive(Args)]
struct TimeArgs {
    /// Final time (defaults to the system's standard horizon).
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Output CSV (defaults to `<out>/simulate_<system>.csv`).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
#[allow(non_snake_case)]
enum SimulateSystem {
    #[command(allow_negative_numbers = true)]
    Single {
        #[arg(long = "L")]
        L: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        omega0: f64,
        #[command(flatten)]
        time: TimeArgs,
    },
    #[command(allow_negative_numbers = true)]
    Double {
        #[arg(long = "L1")]
        L1: f64,
        #[arg(long = "L2")]
        L2: f64,
        #[arg(long)]
        omega1: f64,
        #[arg(long)]
        omega2: f64,
        #[command(flatten)]
        time: TimeArgs,
    },
    #[command(allow_negative_numbers = true)]
    Slider {
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        r: f64,
        /// Connecting-rod to crank length ratio L/r.
        #[arg(long)]
        ratio: f64,
        #[command(flatten)]
        time: TimeArgs,
    },
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.system) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(case)) => ExperimentConfig::preset(case.into()),
            (None, None) => return Err(Error::InvalidConfig("pass --config or --system".into())),
        };
        if let Some(s) = self.structure {
            cfg.structure = s.into();
        }
        let cfg = cfg.desk_scale(self.scaling.scale, self.scaling.epochs)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_root(cli_out: &Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("mbdnn-out"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_owned(),
        source: e,
    }
}

fn write_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json() + "\n").map_err(io_err(&path))
}

fn simulate(system: &SimulateSystem, out: &Option<PathBuf>) -> Result<()> {
    let (kind, design, time) = match system {
        SimulateSystem::Single { L, c, omega0, time } => (SystemKind::Single, vec![*L, *c, *omega0], time),
        SimulateSystem::Double {
            L1,
            L2,
            omega1,
            omega2,
            time,
        } => (SystemKind::Double, vec![*L1, *L2, *omega1, *omega2], time),
        SimulateSystem::Slider { tau, r, ratio, time } => (SystemKind::Slider, vec![*tau, *r, *ratio], time),
    };
    let spec = SystemSpec::for_kind(kind);
    let grid = TimeGrid::spanning(time.t_final.unwrap_or_else(|| spec.time.t_final()), time.dt)?;
    let traj = spec.model.simulate(&design, &grid)?;
    let path = match &time.output {
        Some(p) => p.clone(),
        None => {
            let root = output_root(out, None);
            fs::create_dir_all(&root).map_err(io_err(&root))?;
            root.join(format!("simulate_{kind}.csv"))
        }
    };
    write_trajectory(&traj, spec.model.label_names(), &path)?;
    println!("wrote {} rows to {}", traj.len(), path.display());
    Ok(())
}

/// A single CSV, or every `*.csv` in a directory sorted by name.
fn read_datasets(path: &Path) -> Result<Vec<Dataset>> {
    if !path.is_dir() {
        return Ok(vec![read_csv(path)?]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidConfig(format!("no CSV datasets in {}", path.display())));
    }
    files.iter().map(|p| read_csv(p)).collect()
}

fn train_from(cfg: &ExperimentConfig, datasets: &[Dataset]) -> Result<Trained> {
    match cfg.structure {
        StructureKind::Sfull => match datasets {
            [one] => experiment::train_sfull(cfg, one),
            _ => Err(Error::InvalidConfig(format!(
                "time-as-input training needs one dataset, got {}",
                datasets.len()
            ))),
        },
        StructureKind::Sfixed => experiment::train_sfixed(cfg, datasets),
    }
}

fn report_trained(trained: &Trained) {
    match trained {
        Trained::Sfull {
            report, leaderboard, ..
        } => {
            if let Some(lb) = leaderboard {
                println!("searched {} configurations", lb.len());
            }
            println!(
                "final train loss {:.6e}, validation loss {:.6e}",
                report.final_train_loss().unwrap_or(f64::NAN),
                report.final_val_loss().unwrap_or(f64::NAN)
            );
        }
        Trained::Sfixed { suite, cost } => println!(
            "trained {} per-instant models ({} trainings, {} failures) in {:.1} s",
            suite.len(),
            cost.trainings,
            cost.failures,
            cost.total_seconds
        ),
    }
}

fn report_summary(summary: &ExperimentSummary, dir: &Path) {
    println!("test points: {}", summary.test_metrics.count);
    for c in &summary.test_metrics.columns {
        let r2 = c.r2.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.6}"));
        println!("  {:<12} R2 {r2}  MSE {:.6e}", c.name, c.mse);
    }
    println!("outputs in {}", dir.display());
}

/// A trained artifact read back from disk.
enum Loaded {
    Model(FfnModel),
    Suite(SfixedSuite),
}

impl Loaded {
    fn predictor(&self) -> Predictor<'_> {
        match self {
            Loaded::Model(m) => Predictor::Sfull(m),
            Loaded::Suite(s) => Predictor::Sfixed(s),
        }
    }
}

fn load_trained(path: &Path) -> Result<Loaded> {
    for dir in [path.to_owned(), path.join("suite")] {
        if dir.join(SUITE_FILE).exists() {
            return Ok(Loaded::Suite(SfixedSuite::load(&dir)?));
        }
    }
    let file = if path.is_dir() {
        path.join("model.json")
    } else {
        path.to_owned()
    };
    Ok(Loaded::Model(load_model(&file)?))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { system } => simulate(system, &cli.out),
        Command::GenData(args) => {
            let cfg = args.resolve()?;
            let dir = output_root(&cli.out, Some(&cfg)).join(&cfg.name).join("data");
            let store = experiment::generate_store(&cfg)?;
            let paths = experiment::write_datasets(&cfg, &store, &dir)?;
            write_config(&cfg, &dir)?;
            println!("wrote {} dataset file(s) under {}", paths.len(), dir.display());
            Ok(())
        }
        Command::Train { config, data } => {
            let cfg = config.resolve()?;
            let dir = output_root(&cli.out, Some(&cfg)).join(&cfg.name).join("train");
            let trained = train_from(&cfg, &read_datasets(data)?)?;
            trained.save(&dir)?;
            write_config(&cfg, &dir)?;
            report_trained(&trained);
            println!("outputs in {}", dir.display());
            Ok(())
        }
        Command::GridSearch { config, data } => {
            let mut cfg = config.resolve()?;
            if cfg.search.is_none() {
                cfg.search = Some(cfg.per_model_space());
            }
            if cfg.structure == StructureKind::Sfixed {
                cfg.sfixed_mode = experiment::SfixedMode::PerModel;
            }
            let dir = output_root(&cli.out, Some(&cfg)).join(&cfg.name).join("grid-search");
            let trained = train_from(&cfg, &read_datasets(data)?)?;
            trained.save(&dir)?;
            write_config(&cfg, &dir)?;
            report_trained(&trained);
            println!("outputs in {}", dir.display());
            Ok(())
        }
        Command::Evaluate { config, model } => {
            let cfg = config.resolve()?;
            let dir = output_root(&cli.out, Some(&cfg)).join(&cfg.name).join("evaluate");
            let trained = load_trained(model)?;
            let summary = experiment::evaluate(&cfg, trained.predictor(), &dir)?;
            write_json(&summary, &dir.join("summary.json"))?;
            write_config(&cfg, &dir)?;
            report_summary(&summary, &dir);
            Ok(())
        }
        Command::Reproduce {
            case,
            scaling,
            structure,
        } => {
            let mut cfg = ExperimentConfig::preset((*case).into());
            if let Some(s) = structure {
                cfg.structure = (*s).into();
            }
            let cfg = cfg.desk_scale(scaling.scale, scaling.epochs)?;
            let dir = output_root(&cli.out, Some(&cfg)).join(&cfg.name);
            let summary = run_experiment(&cfg, &dir)?;
            report_summary(&summary, &dir);
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 4,
        e if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
