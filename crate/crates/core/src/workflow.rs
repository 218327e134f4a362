//! File-level steps behind the command line: dataset I/O, two-stage
//! training into a checkpoint directory, and evaluation studies into a
//! metrics directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{ConfigError, RunConfig};
use crate::dataset::{read_dataset, write_dataset, DatasetError, DatasetHeader, SampleRecord};
use crate::eval::{self, Dropout, EvalError, MetricTable};
use crate::nnet::{load_checkpoint, save_checkpoint, Checkpoint, NnetError, Stage, UapNet};
use crate::pipeline::{dataset_header, GenerateError};
use crate::train::{self, split_dataset, write_log, Split, TrainError, Variant};

pub const INSPECTION_CHECKPOINT: &str = "inspection.ckpt";
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Checkpoint(#[from] NnetError),
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),
    #[error("dataset does not match the config: {0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl WorkflowError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            WorkflowError::Config(_) => "E_CONFIG",
            WorkflowError::Dataset(_) => "E_DATASET",
            WorkflowError::Generate(_) => "E_GENERATE",
            WorkflowError::Train(TrainError::NonFinite { .. }) => "E_NONFINITE",
            WorkflowError::Train(TrainError::MissingStage1) | WorkflowError::MissingCheckpoint(_) => "E_MISSING_CHECKPOINT",
            WorkflowError::Train(_) => "E_TRAIN",
            WorkflowError::Eval(_) => "E_EVAL",
            WorkflowError::Checkpoint(_) => "E_CHECKPOINT",
            WorkflowError::Mismatch(_) => "E_MISMATCH",
            WorkflowError::Io { .. } => "E_IO",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorkflowError + '_ {
    move |source| WorkflowError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_dataset(path: &Path, header: &DatasetHeader, records: &[SampleRecord]) -> Result<(), WorkflowError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write_dataset(&mut w, header, records)?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<(DatasetHeader, Vec<SampleRecord>), WorkflowError> {
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    Ok(read_dataset(&mut r)?)
}

/// Rejects datasets whose shapes differ from what `cfg` would generate.
pub fn check_dataset(cfg: &RunConfig, header: &DatasetHeader) -> Result<(), WorkflowError> {
    let expect = dataset_header(cfg, header.num_records);
    let shape = |h: &DatasetHeader| (h.num_rsus, h.num_uavs, h.num_lanes, h.relays, h.num_links, h.grid_shape, h.image_shape);
    if shape(&expect) != shape(header) {
        return Err(WorkflowError::Mismatch(format!(
            "dataset (K, M, lanes, relays, links, grid, image) = {:?}, config gives {:?}",
            shape(header),
            shape(&expect)
        )));
    }
    if expect.config_hash != header.config_hash {
        log::warn!("dataset was generated with a different config");
    }
    Ok(())
}

pub fn handoff_checkpoint(variant: Variant) -> String {
    match variant {
        Variant::Uap => "handoff.ckpt".into(),
        v => format!("handoff-{}.ckpt", v.name()),
    }
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<(), WorkflowError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join(CONFIG_ECHO);
    std::fs::write(&p, cfg.to_toml()).map_err(io_err(&p))
}

pub fn dataset_split(cfg: &RunConfig, n: usize) -> Result<Split, WorkflowError> {
    Ok(split_dataset(n, cfg.train.split, cfg.train.rng_seed)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageSelection {
    Handoff,
    Inspection,
    Both,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainSummary {
    /// Best validation top-1 accuracy of the handoff stage.
    pub handoff_accuracy: Option<f64>,
    /// Best validation MSE of the inspection stage.
    pub inspection_mse: Option<f64>,
    pub written: Vec<PathBuf>,
}

/// Runs the selected stages and writes checkpoints and logs into `out_dir`.
/// The inspection stage starts from `stage1` when given and from the UAP
/// handoff checkpoint in `out_dir` otherwise.
pub fn run_train(
    cfg: &RunConfig,
    records: &[SampleRecord],
    stages: StageSelection,
    variant: Variant,
    out_dir: &Path,
    stage1: Option<&Path>,
) -> Result<TrainSummary, WorkflowError> {
    echo_config(cfg, out_dir)?;
    let split = dataset_split(cfg, records.len())?;
    let mut summary = TrainSummary::default();
    if stages != StageSelection::Inspection {
        let net = UapNet::new(cfg.model_config())?;
        let out = train::train_stage1(net, records, &split.train, &split.val, &cfg.train, variant)?;
        let ck = out_dir.join(handoff_checkpoint(variant));
        save_checkpoint(&ck, &Checkpoint::from_model(&out.model, Stage::Handoff))?;
        let log = out_dir.join(format!("train-{}.csv", handoff_checkpoint(variant).trim_end_matches(".ckpt")));
        write_log(&log, &out.log)?;
        summary.handoff_accuracy = out.saves.last().map(|s| s.1);
        summary.written.extend([ck, log]);
    }
    if stages != StageSelection::Handoff {
        if variant != Variant::Uap {
            return Err(WorkflowError::Config(ConfigError::Invalid(
                "the inspection stage builds on the UAP handoff model".into(),
            )));
        }
        let path = stage1.map_or_else(|| out_dir.join(handoff_checkpoint(Variant::Uap)), Path::to_path_buf);
        if !path.exists() {
            return Err(WorkflowError::MissingCheckpoint(path));
        }
        let ck = load_checkpoint(&path)?;
        let out = train::train_stage2(&ck, records, &split.train, &split.val, &cfg.train)?;
        let p = out_dir.join(INSPECTION_CHECKPOINT);
        save_checkpoint(&p, &Checkpoint::from_model(&out.model, Stage::Inspection))?;
        let log = out_dir.join("train-inspection.csv");
        write_log(&log, &out.log)?;
        summary.inspection_mse = out.saves.last().map(|s| s.1);
        summary.written.extend([p, log]);
    }
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    Outage,
    Robustness,
    Inspection,
    Baselines,
}

impl Study {
    pub const ALL: [Study; 4] = [Study::Outage, Study::Robustness, Study::Inspection, Study::Baselines];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "outage" => Some(Study::Outage),
            "robustness" => Some(Study::Robustness),
            "inspection" => Some(Study::Inspection),
            "baselines" => Some(Study::Baselines),
            _ => None,
        }
    }
}

fn load_model(dir: &Path, name: &str) -> Result<UapNet, WorkflowError> {
    let p = dir.join(name);
    if !p.exists() {
        return Err(WorkflowError::MissingCheckpoint(p));
    }
    Ok(load_checkpoint(&p)?.into_model()?)
}

/// Runs the studies on the test split and writes one CSV and one JSON file
/// per study into `out_dir`. With `oracle_only` the outage study needs no
/// checkpoint and covers the ground-truth policies only.
pub fn run_eval(
    cfg: &RunConfig,
    records: &[SampleRecord],
    ckpt_dir: &Path,
    studies: &[Study],
    out_dir: &Path,
    oracle_only: bool,
) -> Result<Vec<MetricTable>, WorkflowError> {
    echo_config(cfg, out_dir)?;
    let split = dataset_split(cfg, records.len())?;
    let test = &split.test;
    let e = &cfg.eval;
    let mut tables = Vec::new();
    for &study in studies {
        let table = match study {
            Study::Outage => {
                let net = if oracle_only {
                    None
                } else {
                    Some(load_model(ckpt_dir, &handoff_checkpoint(Variant::Uap))?)
                };
                eval::outage_study(net.as_ref(), records, test, &e.thresholds, e.bandwidth_hz)?
            }
            Study::Robustness => {
                let net = load_model(ckpt_dir, &handoff_checkpoint(Variant::Uap))?;
                let mut levels: Vec<Dropout> = e
                    .missing_uavs
                    .iter()
                    .map(|&m| Dropout {
                        missing_uavs: m,
                        missing_views: 0,
                    })
                    .collect();
                levels.extend(e.missing_views.iter().filter(|&&v| v > 0).map(|&v| Dropout {
                    missing_uavs: 0,
                    missing_views: v,
                }));
                let seeds: Vec<u64> = (0..3).map(|i| e.dropout_seed + i).collect();
                eval::robustness_sweep(&net, Variant::Uap, records, test, &levels, &seeds)?
            }
            Study::Inspection => {
                let net = load_model(ckpt_dir, INSPECTION_CHECKPOINT)?;
                eval::inspection_study(&net, records, test)?.1
            }
            Study::Baselines => {
                let rgb = load_model(ckpt_dir, &handoff_checkpoint(Variant::RgbOnly))?;
                let lidar = load_model(ckpt_dir, &handoff_checkpoint(Variant::LidarOnly))?;
                eval::run_baselines(records, test, &e.thresholds, Some(&rgb), Some(&lidar))?
            }
        };
        eval::write_table(out_dir, &table)?;
        tables.push(table);
    }
    Ok(tables)
}
