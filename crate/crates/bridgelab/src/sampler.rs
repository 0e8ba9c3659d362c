//! Reverse generative sampling over the bridge.
//!
//! The chain starts at the source, `z_{t_N} = x`, and walks the grid down
//! to t_0 = 0. Each step predicts the clean target, extracts the
//! effective noise of the current state, and forms the next state
//! `z_{t_n} = a·x + b·ẑ₀ + √(c² − ρ_n²)·η̂ + ρ_n·ε`. The first reverse
//! step always uses ρ = c_{t_{N-1}} (booting): c vanishes at t = T, so
//! the noise-extraction term is undefined there and the step must be
//! fully stochastic. Later steps use ρ_n = η·c_{t_n}; η = 0 is the
//! deterministic implicit sampler, η = 1 is ancestral at every step.

use crate::bridge::posterior_step;
use crate::data::PairedDataset;
use crate::denoiser::{channel_mean, channel_repeat, Denoiser};
use crate::error::{BridgeError, Result};
use crate::metrics;
use crate::rng::CounterRng;
use crate::schedule::{TimeGrid, VpSchedule, KARRAS_RHO_DEFAULT};
use crate::tensor::TensorF;
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub n_steps: usize,
    /// Stochasticity in [0, 1]; scales ρ_n = eta·c_{t_n} after booting.
    pub eta: f64,
    pub seed: u64,
    pub karras_rho: f64,
}

impl SamplerConfig {
    pub fn new(n_steps: usize, eta: f64, seed: u64) -> Result<Self> {
        if n_steps == 0 {
            return Err(BridgeError::Argument("n_steps must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(BridgeError::Argument(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(Self {
            n_steps,
            eta,
            seed,
            karras_rho: KARRAS_RHO_DEFAULT,
        })
    }
}

/// Stochasticity level for reverse step n (stepping onto grid time t_n).
/// The first reverse step (n = N-1) boots with ρ = c_{t_{N-1}} no matter
/// what η is.
pub fn rho_for_step(eta: f64, n: usize, n_steps: usize, c_tn: f64) -> f64 {
    if n + 1 == n_steps {
        c_tn
    } else {
        eta * c_tn
    }
}

/// Run the full reverse chain and return every visited state, from
/// (t_N, x) down to (t_0, ŷ).
pub fn dbim_trajectory(
    model: &dyn Denoiser,
    x: &TensorF,
    cfg: &SamplerConfig,
    sched: &VpSchedule,
) -> Result<Vec<(f64, TensorF)>> {
    if !x.all_finite() {
        return Err(BridgeError::Argument("source tensor contains non-finite values".into()));
    }
    let grid: TimeGrid = sched.time_grid(cfg.n_steps, cfg.karras_rho)?;
    let rng = CounterRng::new(cfg.seed);
    let mut states = Vec::with_capacity(cfg.n_steps + 1);
    let mut z = x.clone();
    states.push((grid.time(cfg.n_steps), z.clone()));
    for n in (0..cfg.n_steps).rev() {
        let t_next = grid.time(n + 1);
        let t_n = grid.time(n);
        let z0_hat = model.predict(&z, t_next, x, sched)?;
        let c_tn = sched.bridge_coeffs(t_n)?.c;
        let rho = rho_for_step(cfg.eta, n, cfg.n_steps, c_tn);
        let post = posterior_step(x, &z0_hat, &z, t_n, t_next, rho, sched)?;
        let mut next = post.mean;
        if post.std > 0.0 {
            let nd = next.data_mut();
            for (i, v) in nd.iter_mut().enumerate() {
                *v += post.std * rng.gauss(n as u64, i as u64);
            }
        }
        if !next.all_finite() {
            return Err(BridgeError::Divergence {
                step: n,
                what: format!("non-finite state while stepping to t = {t_n}"),
            });
        }
        z = next;
        states.push((t_n, z.clone()));
    }
    Ok(states)
}

/// Sample one translation; returns the output and the number of denoiser
/// evaluations consumed (equal to the step count).
pub fn dbim_sample(
    model: &dyn Denoiser,
    x: &TensorF,
    cfg: &SamplerConfig,
    sched: &VpSchedule,
) -> Result<(TensorF, usize)> {
    let states = dbim_trajectory(model, x, cfg, sched)?;
    let (_, z0) = states.into_iter().last().expect("trajectory is nonempty");
    Ok((z0, cfg.n_steps))
}

/// Fully ancestral variant (η forced to 1); a DDBM-like stand-in, not an
/// exact reproduction of any particular stochastic solver.
pub fn stochastic_sample(
    model: &dyn Denoiser,
    x: &TensorF,
    cfg: &SamplerConfig,
    sched: &VpSchedule,
) -> Result<TensorF> {
    let mut ancestral = *cfg;
    ancestral.eta = 1.0;
    Ok(dbim_sample(model, x, &ancestral, sched)?.0)
}

/// Expand a tensor to the model-channel space by channel repetition.
pub fn to_model_space(t: &TensorF, model_channels: usize) -> Result<TensorF> {
    if t.channels() == model_channels {
        Ok(t.clone())
    } else if t.channels() == 1 {
        channel_repeat(t, model_channels)
    } else {
        Err(BridgeError::Argument(format!(
            "cannot map {} channels to {} model channels",
            t.channels(),
            model_channels
        )))
    }
}

/// Collapse a model-space tensor back to the target channel count
/// (per-pixel channel mean when the target is single-band).
pub fn from_model_space(t: &TensorF, tgt_channels: usize) -> Result<TensorF> {
    if t.channels() == tgt_channels {
        Ok(t.clone())
    } else if tgt_channels == 1 {
        channel_mean(t)
    } else {
        Err(BridgeError::Argument(format!(
            "cannot map {} model channels to {} target channels",
            t.channels(),
            tgt_channels
        )))
    }
}

/// One row of an NFE sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_steps: usize,
    pub fid_norm: f64,
    pub lpips: f64,
    pub l1: f64,
    pub score: f64,
    pub wall_ms: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub eta: f64,
}

impl SweepTable {
    /// CSV matching the pinned sweep format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_steps,fid_norm,l1,score,wall_ms,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{},{}",
                r.n_steps, r.fid_norm, r.l1, r.score, r.wall_ms, r.seed
            );
        }
        out
    }

    /// Index of the best (lowest-score) row.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.rows.iter().enumerate() {
            if r.score < self.rows[best].score {
                best = i;
            }
        }
        best
    }
}

fn worker_count(n_items: usize) -> usize {
    let cap = std::env::var("BRIDGELAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    cap.min(n_items).max(1)
}

/// Order-preserving parallel map; worker count is capped by the
/// BRIDGELAB_THREADS environment variable.
fn parallel_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = worker_count(n);
    if workers <= 1 {
        return (0..n).map(&f).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots_ref = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                let mut guard = slots_ref.lock().expect("slot lock");
                guard[i] = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every index visited"))
        .collect()
}

/// Evaluate the sampler at each step count on a paired dataset. Every row
/// reuses the same base seed so noise is identical across rows, and each
/// pair gets a per-index derived key so trajectories are independent of
/// batch partitioning.
pub fn nfe_sweep(
    model: &dyn Denoiser,
    dataset: &PairedDataset,
    steps_list: &[usize],
    eta: f64,
    seed: u64,
    sched: &VpSchedule,
) -> Result<SweepTable> {
    if dataset.is_empty() {
        return Err(BridgeError::Argument("nfe_sweep: dataset is empty".into()));
    }
    if steps_list.is_empty() {
        return Err(BridgeError::Argument("nfe_sweep: steps list is empty".into()));
    }
    let model_channels = dataset.src_channels.max(dataset.tgt_channels);
    let mut rows = Vec::with_capacity(steps_list.len());
    for &n_steps in steps_list {
        let started = Instant::now();
        let outputs: Vec<TensorF> = parallel_map(dataset.len(), |i| {
            let x_mc = to_model_space(&dataset.sources[i], model_channels)?;
            let cfg = SamplerConfig {
                n_steps,
                eta,
                seed: crate::rng::derive(seed, i as u64),
                karras_rho: KARRAS_RHO_DEFAULT,
            };
            let (y_mc, _) = dbim_sample(model, &x_mc, &cfg, sched)?;
            Ok(from_model_space(&y_mc, dataset.tgt_channels)?.map(|v| v.clamp(0.0, 1.0)))
        })?;
        let wall_ms = started.elapsed().as_millis() as u64;
        let row = score_outputs(&outputs, &dataset.targets, n_steps, wall_ms, seed)?;
        rows.push(row);
    }
    Ok(SweepTable { rows, eta })
}

/// Shared scoring path for sweeps and evaluation: desk FID over the sets,
/// per-pair perceptual surrogate and L1, composite task score.
pub fn score_outputs(
    outputs: &[TensorF],
    targets: &[TensorF],
    n_steps: usize,
    wall_ms: u64,
    seed: u64,
) -> Result<SweepRow> {
    let fid = metrics::desk_fid(outputs, targets)?;
    let fid_norm = metrics::normalize_fid(fid)?;
    let mut lpips = 0.0;
    let mut l1 = 0.0;
    for (o, t) in outputs.iter().zip(targets) {
        lpips += metrics::lpips_surrogate(o, t)?;
        l1 += metrics::l1_metric(o, t)?;
    }
    lpips /= outputs.len() as f64;
    l1 /= outputs.len() as f64;
    let score = metrics::task_score(fid_norm, lpips, l1)?;
    Ok(SweepRow {
        n_steps,
        fid_norm,
        lpips,
        l1,
        score,
        wall_ms,
        seed,
    })
}
