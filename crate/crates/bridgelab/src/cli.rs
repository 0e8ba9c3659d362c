//! Batch command-line surface: data generation, bridge and contrastive
//! training, sampling, NFE sweeps, and scoring. No interactive UI; every
//! run writes its fully resolved configuration next to its outputs so the
//! run is reproducible from that file alone.
//!
//! Exit codes: 0 ok, 1 usage, 2 divergence, 3 missing artifact,
//! 4 empty input.

use crate::cut::{cut_loss_csv, cut_train_loop, CutModel, CutTrainer};
use crate::data::{self, PairedDataset, TaskTag};
use crate::denoiser::DenoiserModel;
use crate::error::BridgeError;
use crate::metrics::{ScoreReport, TaskScore};
use crate::sampler::{self, SamplerConfig};
use crate::schedule::VpSchedule;
use crate::trainer::{self, OptimizerKind, TrainConfig};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Failure cases mapped onto the exit-code taxonomy.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Divergence(String),
    MissingArtifact(String),
    EmptyInput(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Divergence(_) => 2,
            Self::MissingArtifact(_) => 3,
            Self::EmptyInput(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Divergence(m) | Self::MissingArtifact(m) | Self::EmptyInput(m) => m,
        }
    }
}

impl From<BridgeError> for CliError {
    fn from(err: BridgeError) -> Self {
        match &err {
            BridgeError::Divergence { .. } => Self::Divergence(err.to_string()),
            BridgeError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                Self::MissingArtifact(err.to_string())
            }
            _ => Self::Usage(err.to_string()),
        }
    }
}

pub type CliResult = Result<(), CliError>;

/// key=value config file; `#` starts a comment line.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingArtifact(format!("config file {} not found", path.display()))
        } else {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        }
    })?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                return Err(CliError::Usage(format!(
                    "config line {} is not key=value: {line:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(map)
}

/// Setting resolution with flag > config file > default precedence.
/// Every resolved value is recorded for the run manifest.
#[derive(Debug)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self, CliError> {
        let file = match config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    pub fn string(&mut self, flag: Option<&str>, key: &str, default: &str) -> String {
        let value = flag
            .map(str::to_string)
            .or_else(|| self.file.get(key).cloned())
            .unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.to_string(), value.clone());
        value
    }

    pub fn parse<T>(
        &mut self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T: std::str::FromStr + std::fmt::Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw.parse().map_err(|_| {
                    CliError::Usage(format!("config key {key} has invalid value {raw:?}"))
                })?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Write the fully resolved configuration next to the outputs.
    pub fn write_manifest(&self, out_dir: &Path, command: &str) -> CliResult {
        let mut text = format!("command={command}\n");
        for (k, v) in &self.resolved {
            let _ = writeln!(text, "{k}={v}");
        }
        std::fs::create_dir_all(out_dir).map_err(io_err)?;
        std::fs::write(out_dir.join("resolved-config.txt"), text).map_err(io_err)?;
        Ok(())
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Usage(format!("i/o error: {e}"))
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact(format!(
            "{what} not found at {}",
            path.display()
        )))
    }
}

/// Build or load the dataset for a command: `--data` wins, otherwise a
/// synthetic set is generated from (task, n, res, seed).
fn obtain_dataset(
    data_dir: Option<&Path>,
    task: TaskTag,
    n: usize,
    res: usize,
    seed: u64,
) -> Result<PairedDataset, CliError> {
    match data_dir {
        Some(dir) => {
            if !dir.join("manifest.txt").is_file() {
                return Err(CliError::MissingArtifact(format!(
                    "dataset manifest not found under {}",
                    dir.display()
                )));
            }
            Ok(data::load_dataset(dir)?)
        }
        None => {
            if task == TaskTag::Gaussian {
                Ok(data::make_gaussian_pairs(0.8, n, seed)?)
            } else {
                Ok(data::make_toy_translation(task, n, res, seed)?)
            }
        }
    }
}

fn schedule_from(resolver: &mut Resolver, beta_d: Option<f64>, beta_min: Option<f64>) -> Result<VpSchedule, CliError> {
    let beta_d = resolver.parse(beta_d, "beta_d", 2.0)?;
    let beta_min = resolver.parse(beta_min, "beta_min", 0.1)?;
    Ok(VpSchedule::new(beta_d, beta_min)?)
}

// ---------------------------------------------------------------------------
// make-data
// ---------------------------------------------------------------------------

pub struct MakeDataArgs {
    pub task: Option<String>,
    pub n: Option<usize>,
    pub res: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

pub fn cmd_make_data(args: &MakeDataArgs) -> CliResult {
    let mut r = Resolver::new(args.config.as_deref())?;
    let task = TaskTag::parse(&r.string(args.task.as_deref(), "task", "sar2eo"))
        .map_err(|e| CliError::Usage(format!("--task: {e}")))?;
    let n = r.parse(args.n, "n", 64)?;
    let res = r.parse(args.res, "res", 16)?;
    let seed = r.parse(args.seed, "seed", 0)?;
    if n == 0 {
        return Err(CliError::EmptyInput("--n must be at least 1".into()));
    }
    if task == TaskTag::Gaussian {
        return Err(CliError::Usage(
            "--task gaussian has no image dataset; use train-bridge directly".into(),
        ));
    }
    let ds = data::make_toy_translation(task, n, res, crate::rng::derive(seed, 1))?;
    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    data::save_dataset(&ds, &args.out)?;
    r.write_manifest(&args.out, "make-data")?;
    println!(
        "wrote {} pairs ({}ch -> {}ch, {}x{}) under {}",
        ds.len(),
        ds.src_channels,
        ds.tgt_channels,
        res,
        res,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-bridge
// ---------------------------------------------------------------------------

pub struct TrainBridgeArgs {
    pub task: Option<String>,
    pub data: Option<PathBuf>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub optimizer: Option<String>,
    pub n: Option<usize>,
    pub res: Option<usize>,
    pub beta_d: Option<f64>,
    pub beta_min: Option<f64>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

pub fn cmd_train_bridge(args: &TrainBridgeArgs) -> CliResult {
    let mut r = Resolver::new(args.config.as_deref())?;
    let task = TaskTag::parse(&r.string(args.task.as_deref(), "task", "gaussian"))
        .map_err(|e| CliError::Usage(format!("--task: {e}")))?;
    let iters = r.parse(args.iters, "iters", 2000)?;
    let seed = r.parse(args.seed, "seed", 1)?;
    let lr = r.parse(args.lr, "lr", 3e-3)?;
    let batch = r.parse(args.batch, "batch", if task == TaskTag::Gaussian { 256 } else { 8 })?;
    let optimizer = OptimizerKind::parse(&r.string(args.optimizer.as_deref(), "optimizer", "adaptive-moments"))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let n = r.parse(args.n, "n", 64)?;
    let res = r.parse(args.res, "res", 16)?;
    let sched = schedule_from(&mut r, args.beta_d, args.beta_min)?;
    if let Some(dir) = &args.data {
        r.resolved.insert("data".into(), dir.display().to_string());
    }

    let ds = obtain_dataset(args.data.as_deref(), task, n, res, crate::rng::derive(seed, 1))?;
    if ds.is_empty() {
        return Err(CliError::EmptyInput("training dataset is empty".into()));
    }
    let (train_split, _) = ds.split_train_eval();

    let model_channels = ds.src_channels.max(ds.tgt_channels);
    let mut model = if task == TaskTag::Gaussian {
        DenoiserModel::new_mlp(1, 64, sched, crate::rng::derive(seed, 2))
    } else {
        DenoiserModel::new_conv(model_channels, 16, sched, crate::rng::derive(seed, 2))
    };

    let cfg = TrainConfig {
        batch_size: batch,
        n_iterations: iters,
        learning_rate: lr,
        optimizer,
        seed: crate::rng::derive(seed, 3),
        log_every: 50.min(iters.max(1)),
    };
    let curve = trainer::train_loop(&mut model, &train_split, &cfg, &sched).map_err(CliError::from)?;

    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    model.save(&args.out.join("checkpoint.ckpt"))?;
    std::fs::write(args.out.join("loss.csv"), trainer::loss_curve_csv(&curve)).map_err(io_err)?;
    r.write_manifest(&args.out, "train-bridge")?;
    if let Some(last) = curve.last() {
        println!("trained {iters} iterations, final loss {:.6}", last.loss);
    } else {
        println!("trained 0 iterations (checkpoint equals initialization)");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train-cut
// ---------------------------------------------------------------------------

pub struct TrainCutArgs {
    pub task: Option<String>,
    pub data: Option<PathBuf>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub n: Option<usize>,
    pub res: Option<usize>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

pub fn cmd_train_cut(args: &TrainCutArgs) -> CliResult {
    let mut r = Resolver::new(args.config.as_deref())?;
    let task = TaskTag::parse(&r.string(args.task.as_deref(), "task", "sar2ir"))
        .map_err(|e| CliError::Usage(format!("--task: {e}")))?;
    if task == TaskTag::Gaussian {
        return Err(CliError::Usage("train-cut needs an image task".into()));
    }
    let iters = r.parse(args.iters, "iters", 500)?;
    let seed = r.parse(args.seed, "seed", 1)?;
    let lr = r.parse(args.lr, "lr", 1e-3)?;
    let batch = r.parse(args.batch, "batch", 2)?;
    let n = r.parse(args.n, "n", 32)?;
    let res = r.parse(args.res, "res", 16)?;
    if let Some(dir) = &args.data {
        r.resolved.insert("data".into(), dir.display().to_string());
    }

    let ds = obtain_dataset(args.data.as_deref(), task, n, res, crate::rng::derive(seed, 1))?;
    if ds.is_empty() {
        return Err(CliError::EmptyInput("training dataset is empty".into()));
    }
    let (train_split, eval_split) = ds.split_train_eval();

    let model = CutModel::new(ds.src_channels, ds.tgt_channels, 8, crate::rng::derive(seed, 2));
    let mut t = CutTrainer::new(model, lr);
    let curve = cut_train_loop(&mut t, &train_split, iters, batch, crate::rng::derive(seed, 3), 25)
        .map_err(CliError::from)?;

    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    t.model.save(&args.out.join("cut-checkpoint.ckpt"))?;
    std::fs::write(args.out.join("loss.csv"), cut_loss_csv(&curve)).map_err(io_err)?;

    // generated-image dumps on the held-out split plus a score report
    let dump_dir = args.out.join("generated");
    std::fs::create_dir_all(&dump_dir).map_err(io_err)?;
    let mut outputs = Vec::new();
    for (i, src) in eval_split.sources.iter().enumerate() {
        let img = t.model.generate(src)?.map(|v| v.clamp(0.0, 1.0));
        let ext = if eval_split.tgt_channels == 3 { "ppm" } else { "pgm" };
        data::write_image(&dump_dir.join(format!("{i:04}.{ext}")), &img)?;
        outputs.push(img);
    }
    if !outputs.is_empty() {
        let row = sampler::score_outputs(&outputs, &eval_split.targets, 1, 0, seed)?;
        let report = ScoreReport::new(
            vec![TaskScore::new(task.name(), row.fid_norm, row.lpips, row.l1)?],
            0,
        );
        write_report(&args.out, &report)?;
    }
    r.write_manifest(&args.out, "train-cut")?;
    if let Some(last) = curve.last() {
        println!(
            "trained {iters} cut iterations, final loss_g {:.6} loss_d {:.6}",
            last.loss_g, last.loss_d
        );
    } else {
        println!("trained 0 cut iterations (checkpoint equals initialization)");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

pub struct SampleArgs {
    pub ckpt: PathBuf,
    pub data: Option<PathBuf>,
    pub task: Option<String>,
    pub n: Option<usize>,
    pub res: Option<usize>,
    pub nfe: Option<usize>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub dump_direct: bool,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

pub fn cmd_sample(args: &SampleArgs) -> CliResult {
    let mut r = Resolver::new(args.config.as_deref())?;
    require_file(&args.ckpt, "checkpoint")?;
    let model = DenoiserModel::load(&args.ckpt)?;
    let sched = model.sched;
    let task = TaskTag::parse(&r.string(args.task.as_deref(), "task", "sar2eo"))
        .map_err(|e| CliError::Usage(format!("--task: {e}")))?;
    if task == TaskTag::Gaussian {
        return Err(CliError::Usage(
            "sample writes images; the gaussian task has no image output".into(),
        ));
    }
    let nfe = r.parse(args.nfe, "nfe", 8)?;
    let eta = r.parse(args.eta, "eta", 0.0)?;
    let seed = r.parse(args.seed, "seed", 0)?;
    let n = r.parse(args.n, "n", 8)?;
    let res = r.parse(args.res, "res", 16)?;
    r.resolved.insert("ckpt".into(), args.ckpt.display().to_string());
    if let Some(dir) = &args.data {
        r.resolved.insert("data".into(), dir.display().to_string());
    }

    let ds = obtain_dataset(args.data.as_deref(), task, n, res, crate::rng::derive(seed, 1))?;
    if ds.is_empty() {
        return Err(CliError::EmptyInput("no source images to sample from".into()));
    }
    let cfg = SamplerConfig::new(nfe, eta, 0).map_err(CliError::from)?;
    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    let direct_dir = args.out.join("direct");
    if args.dump_direct {
        std::fs::create_dir_all(&direct_dir).map_err(io_err)?;
    }
    let ext = if ds.tgt_channels == 3 { "ppm" } else { "pgm" };
    let started = std::time::Instant::now();
    let model_channels = model.model_channels;
    for (i, src) in ds.sources.iter().enumerate() {
        let x_mc = sampler::to_model_space(src, model_channels)?;
        let per_image = SamplerConfig {
            seed: crate::rng::derive(seed, i as u64),
            ..cfg
        };
        let (y_mc, _) = sampler::dbim_sample(&model, &x_mc, &per_image, &sched).map_err(CliError::from)?;
        let img = sampler::from_model_space(&y_mc, ds.tgt_channels)?.map(|v| v.clamp(0.0, 1.0));
        data::write_image(&args.out.join(format!("{i:04}.{ext}")), &img)?;
        if args.dump_direct {
            let direct = model.forward(&x_mc, sched.t_max, &x_mc)?;
            let dimg = sampler::from_model_space(&direct, ds.tgt_channels)?.map(|v| v.clamp(0.0, 1.0));
            data::write_image(&direct_dir.join(format!("{i:04}.{ext}")), &dimg)?;
        }
    }
    let wall_ms = started.elapsed().as_millis();
    let family = if eta == 0.0 {
        "dbim (deterministic)".to_string()
    } else if eta == 1.0 {
        "rho-chain eta=1 (ddbm-like, not DDBM-exact)".to_string()
    } else {
        format!("rho-chain eta={eta}")
    };
    let metadata = format!(
        "n_steps={nfe}\neta={eta}\nseed={seed}\nwall_ms={wall_ms}\nsampler={family}\nimages={}\n",
        ds.len()
    );
    std::fs::write(args.out.join("metadata.txt"), metadata).map_err(io_err)?;
    r.write_manifest(&args.out, "sample")?;
    println!("sampled {} images at nfe={nfe} eta={eta}", ds.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

pub struct SweepArgs {
    pub ckpt: PathBuf,
    pub data: Option<PathBuf>,
    pub task: Option<String>,
    pub n: Option<usize>,
    pub res: Option<usize>,
    pub steps: Option<String>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let mut r = Resolver::new(args.config.as_deref())?;
    require_file(&args.ckpt, "checkpoint")?;
    let model = DenoiserModel::load(&args.ckpt)?;
    let sched = model.sched;
    let task = TaskTag::parse(&r.string(args.task.as_deref(), "task", "rgb2ir"))
        .map_err(|e| CliError::Usage(format!("--task: {e}")))?;
    let steps_raw = r.string(args.steps.as_deref(), "steps", "1,2,5,10,20,100");
    let eta = r.parse(args.eta, "eta", 0.0)?;
    let seed = r.parse(args.seed, "seed", 0)?;
    let n = r.parse(args.n, "n", 32)?;
    let res = r.parse(args.res, "res", 16)?;
    r.resolved.insert("ckpt".into(), args.ckpt.display().to_string());
    if let Some(dir) = &args.data {
        r.resolved.insert("data".into(), dir.display().to_string());
    }
    let steps: Vec<usize> = steps_raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--steps entry {s:?} is not a positive integer")))
        })
        .collect::<Result<_, _>>()?;

    let ds = obtain_dataset(args.data.as_deref(), task, n, res, crate::rng::derive(seed, 1))?;
    let (_, eval_split) = ds.split_train_eval();
    if eval_split.is_empty() {
        return Err(CliError::EmptyInput("evaluation split is empty".into()));
    }
    let table = sampler::nfe_sweep(&model, &eval_split, &steps, eta, seed, &sched).map_err(CliError::from)?;
    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    std::fs::write(args.out.join("sweep.csv"), table.to_csv()).map_err(io_err)?;
    let best = table.best_index();
    let summary = format!(
        "best row: n_steps={} score={:.6} (fid_norm={:.6} l1={:.6})\n",
        table.rows[best].n_steps, table.rows[best].score, table.rows[best].fid_norm, table.rows[best].l1
    );
    std::fs::write(args.out.join("summary.txt"), &summary).map_err(io_err)?;
    r.write_manifest(&args.out, "sweep")?;
    print!("{summary}");
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub struct EvalArgs {
    pub from_csv: Option<PathBuf>,
    pub unattempted: Option<usize>,
    pub pred: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub task: Option<String>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult {
    let mut r = Resolver::new(args.config.as_deref())?;
    let unattempted = r.parse(args.unattempted, "unattempted", 0)?;
    let report = match (&args.from_csv, &args.pred) {
        (Some(csv_path), None) => {
            require_file(csv_path, "score csv")?;
            r.resolved.insert("from_csv".into(), csv_path.display().to_string());
            let text = std::fs::read_to_string(csv_path).map_err(io_err)?;
            let mut rows = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with("task,") {
                    continue;
                }
                let parts: Vec<&str> = line.split(',').collect();
                if parts.len() < 4 {
                    return Err(CliError::Usage(format!(
                        "csv row needs task,fid_norm,lpips,l1 - got {line:?}"
                    )));
                }
                let parse = |s: &str| -> Result<f64, CliError> {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::Usage(format!("bad number {s:?} in {line:?}")))
                };
                rows.push(TaskScore::new(
                    parts[0].trim(),
                    parse(parts[1])?,
                    parse(parts[2])?,
                    parse(parts[3])?,
                )?);
            }
            if rows.is_empty() && unattempted == 0 {
                return Err(CliError::EmptyInput("score csv has no rows".into()));
            }
            ScoreReport::new(rows, unattempted)
        }
        (None, Some(pred_dir)) => {
            let data_dir = args.data.as_deref().ok_or_else(|| {
                CliError::Usage("--pred needs --data with the reference dataset".into())
            })?;
            if !data_dir.join("manifest.txt").is_file() {
                return Err(CliError::MissingArtifact(format!(
                    "dataset manifest not found under {}",
                    data_dir.display()
                )));
            }
            r.resolved.insert("pred".into(), pred_dir.display().to_string());
            r.resolved.insert("data".into(), data_dir.display().to_string());
            let task = r.string(args.task.as_deref(), "task", "task");
            let ds = data::load_dataset(data_dir)?;
            let (_, eval_split) = ds.split_train_eval();
            if eval_split.is_empty() {
                return Err(CliError::EmptyInput("evaluation split is empty".into()));
            }
            let ext = if eval_split.tgt_channels == 3 { "ppm" } else { "pgm" };
            let mut outputs = Vec::new();
            for i in 0..eval_split.len() {
                let path = pred_dir.join(format!("{i:04}.{ext}"));
                require_file(&path, "prediction image")?;
                outputs.push(data::read_image(&path)?);
            }
            let row = sampler::score_outputs(&outputs, &eval_split.targets, 1, 0, 0)?;
            ScoreReport::new(
                vec![TaskScore::new(task, row.fid_norm, row.lpips, row.l1)?],
                unattempted,
            )
        }
        _ => {
            return Err(CliError::Usage(
                "eval needs exactly one of --from-csv or --pred".into(),
            ))
        }
    };
    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    write_report(&args.out, &report)?;
    r.write_manifest(&args.out, "eval")?;
    println!("combined={:.6}", report.combined);
    Ok(())
}

fn write_report(out_dir: &Path, report: &ScoreReport) -> CliResult {
    std::fs::write(out_dir.join("report.csv"), report.to_csv()).map_err(io_err)?;
    let mut text = report.to_text();
    text.push_str("note: pipeline-computed lpips values are lpips_surrogate (1 - windowed SSIM), not true LPIPS\n");
    std::fs::write(out_dir.join("report.txt"), text).map_err(io_err)?;
    Ok(())
}
