//! `uap`: generate datasets, train UAP-Net in two stages, run evaluation
//! studies and inspect dataset files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uap_core::config::RunConfig;
use uap_core::dataset::read_header_only;
use uap_core::pipeline::{generate_dataset, LabelSummary};
use uap_core::train::Variant;
use uap_core::workflow::{self, StageSelection, Study, WorkflowError};

/// Exit status when a dataset was written but its labels are degenerate.
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(name = "uap", version, about = "UAV-assisted proactive handoff: data, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set scene.num_rsus=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate snapshots and write a dataset file.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        snapshots: u64,
    },
    /// Train the handoff stage, the inspection stage, or both.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        stage: StageArg,
        #[arg(long, value_enum, default_value = "uap")]
        variant: VariantArg,
        /// Directory receiving checkpoints and training logs.
        #[arg(long)]
        out: PathBuf,
        /// Handoff checkpoint for the inspection stage; defaults to the one in `--out`.
        #[arg(long)]
        stage1: Option<PathBuf>,
    },
    /// Run evaluation studies on the test split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding the trained checkpoints.
        #[arg(long)]
        checkpoints: PathBuf,
        /// Comma-separated subset of outage, robustness, inspection, baselines.
        #[arg(long, value_delimiter = ',', default_value = "outage,robustness,inspection,baselines")]
        studies: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Outage study of the ground-truth policies only; needs no checkpoint.
        #[arg(long)]
        oracle_only: bool,
    },
    /// Print a dataset header and its label histogram.
    InspectDataset { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Uap,
    RgbOnly,
    LidarOnly,
}

struct Failure {
    code: &'static str,
    message: String,
}

impl From<WorkflowError> for Failure {
    fn from(e: WorkflowError) -> Self {
        Self {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

fn failure(code: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn load_config(a: &ConfigArgs) -> Result<RunConfig, Failure> {
    RunConfig::load(a.config.as_deref(), &a.overrides).map_err(|e| WorkflowError::from(e).into())
}

fn generate(cfg: &RunConfig, out: &Path, snapshots: u64) -> Result<ExitCode, Failure> {
    let (header, records) = generate_dataset(cfg, snapshots).map_err(WorkflowError::from)?;
    workflow::save_dataset(out, &header, &records)?;
    let s = LabelSummary::new(&records, cfg.scene.num_rsus, cfg.num_links());
    println!(
        "wrote {} snapshots ({} samples) to {}",
        records.len(),
        s.direct + s.indirect,
        out.display()
    );
    println!(
        "labels: direct {} ({:.1}%), indirect {} ({:.1}%)",
        s.direct,
        100.0 * (1.0 - s.indirect_fraction()),
        s.indirect,
        100.0 * s.indirect_fraction()
    );
    if s.is_degenerate() {
        eprintln!("warning[W_DEGENERATE_LABELS]: one label class holds under 5% of the samples");
        return Ok(ExitCode::from(EXIT_DEGENERATE));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Generate { cfg, out, snapshots } => generate(&load_config(&cfg)?, &out, snapshots),
        Command::Train {
            cfg,
            dataset,
            stage,
            variant,
            out,
            stage1,
        } => {
            let cfg = load_config(&cfg)?;
            let (header, records) = workflow::load_dataset(&dataset)?;
            workflow::check_dataset(&cfg, &header)?;
            let stages = match stage {
                StageArg::One => StageSelection::Handoff,
                StageArg::Two => StageSelection::Inspection,
                StageArg::Both => StageSelection::Both,
            };
            let variant = match variant {
                VariantArg::Uap => Variant::Uap,
                VariantArg::RgbOnly => Variant::RgbOnly,
                VariantArg::LidarOnly => Variant::LidarOnly,
            };
            let s = workflow::run_train(&cfg, &records, stages, variant, &out, stage1.as_deref())?;
            if let Some(a) = s.handoff_accuracy {
                println!("handoff ({}): best validation accuracy {a:.4}", variant.name());
            }
            if let Some(m) = s.inspection_mse {
                println!("inspection: best validation MSE {m:.4}");
            }
            for p in &s.written {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            cfg,
            dataset,
            checkpoints,
            studies,
            out,
            oracle_only,
        } => {
            let cfg = load_config(&cfg)?;
            let studies = studies
                .iter()
                .map(|s| Study::parse(s.trim()).ok_or_else(|| failure("E_USAGE", format!("unknown study `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            let (header, records) = workflow::load_dataset(&dataset)?;
            workflow::check_dataset(&cfg, &header)?;
            for t in workflow::run_eval(&cfg, &records, &checkpoints, &studies, &out, oracle_only)? {
                println!("{}: {} rows -> {}", t.study, t.rows.len(), out.join(format!("{}.csv", t.study)).display());
                if let Some(c) = t.column("rate_ratio") {
                    let mut seen = Vec::new();
                    for r in &t.rows {
                        if !seen.contains(&r.scheme) {
                            println!("  {} rate ratio {:.4}", r.scheme, r.values[c]);
                            seen.push(r.scheme.clone());
                        }
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::InspectDataset { path } => {
            let file = std::fs::File::open(&path).map_err(|e| failure("E_IO", format!("{}: {e}", path.display())))?;
            let header = read_header_only(&mut std::io::BufReader::new(file)).map_err(WorkflowError::from)?;
            let (_, records) = workflow::load_dataset(&path)?;
            println!("version {}", header.version);
            println!(
                "rsus {} uavs {} vehicles {} lanes {} relays {} links {}",
                header.num_rsus, header.num_uavs, header.num_vehicles, header.num_lanes, header.relays, header.num_links
            );
            println!("grid {:?} image {:?}", header.grid_shape, header.image_shape);
            println!("rng_seed {} records {}", header.rng_seed, header.num_records);
            let hash: String = header.config_hash.iter().map(|b| format!("{b:02x}")).collect();
            println!("config_hash {hash}");
            let s = LabelSummary::new(&records, header.num_rsus as usize, header.num_links as usize);
            println!("label histogram:");
            for (i, n) in s.histogram.iter().enumerate() {
                println!("  {i:>3} {n}");
            }
            println!("direct {} indirect {} ({:.1}% indirect)", s.direct, s.indirect, 100.0 * s.indirect_fraction());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = std::env::var("UAP_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot size the worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            let msg = f.message.replace('\n', " ");
            eprintln!("error[{}]: {msg}", f.code);
            ExitCode::FAILURE
        }
    }
}
