//! Acceptance suite: one test per shipping criterion, each printing a
//! pass line with the measured numbers. Tolerances are pinned here, in
//! code, and every expected value is either exact arithmetic or was
//! computed by an independent oracle before being frozen.

use bridgelab::bridge::marginal_oracle;
use bridgelab::data::{make_gaussian_pairs, make_toy_translation, TaskTag};
use bridgelab::denoiser::{AnalyticGaussianDenoiser, ConstantDenoiser, DenoiserModel};
use bridgelab::metrics::{combined_score, task_score};
use bridgelab::rng::{derive, CounterRng};
use bridgelab::sampler::{dbim_sample, dbim_trajectory, nfe_sweep, SamplerConfig};
use bridgelab::schedule::VpSchedule;
use bridgelab::tensor::TensorF;
use bridgelab::trainer::{analytic_weighted_risk, heldout_weighted_mse, train_loop, TrainConfig};

fn sched() -> VpSchedule {
    VpSchedule::default_params()
}

// ---------------------------------------------------------------------------
// Criterion 1: score arithmetic reproduces the published challenge tables
// ---------------------------------------------------------------------------

/// MAVIC-T 2025 test-set sweep rows (FID pre-normalized, LPIPS, L1,
/// composite score at three decimals).
const SWEEP_ROWS: &[(&str, f64, f64, f64, f64)] = &[
    ("rgb2ir dbim nfe1", 0.786, 0.293, 0.093, 0.390),
    ("rgb2ir dbim nfe2", 0.342, 0.195, 0.091, 0.209),
    ("rgb2ir dbim nfe5", 0.357, 0.151, 0.090, 0.200),
    ("rgb2ir dbim nfe10", 0.380, 0.150, 0.090, 0.206),
    ("rgb2ir dbim nfe20", 0.601, 0.468, 0.076, 0.382),
    ("rgb2ir dbim nfe100", 0.478, 0.188, 0.108, 0.258),
    ("rgb2ir dbim nfe1000", 0.474, 0.225, 0.110, 0.270),
    ("rgb2ir ddbm nfe100", 0.709, 0.366, 0.154, 0.410),
    ("sar2eo dbim nfe20", 0.737, 0.464, 0.074, 0.425),
    ("sar2eo dbim nfe100", 0.451, 0.477, 0.077, 0.335),
    ("sar2eo dbim nfe500", 0.222, 0.504, 0.080, 0.269),
    ("sar2eo dbim nfe1000", 0.233, 0.511, 0.079, 0.274),
    ("sar2ir cut-huge", 0.645, 0.603, 0.145, 0.464),
    ("sar2ir cut-large", 0.825, 0.610, 0.157, 0.531),
    ("sar2ir ddbm nfe100", 0.874, 0.616, 0.244, 0.578),
    ("sar2ir dbim nfe100", 0.956, 0.706, 0.256, 0.640),
    ("sar2ir dbim nfe1000", 0.958, 0.630, 0.194, 0.594),
    ("sar2rgb dbim nfe1000", 0.878, 0.636, 0.214, 0.576),
    ("sar2rgb ddbm nfe100", 0.894, 0.656, 0.236, 0.595),
    ("sar2rgb nano-banana-pro", 0.957, 0.740, 0.208, 0.635),
];

/// Main-results rows at two decimals. The SAR→IR row is the one place
/// where feeding the 2-decimal metric columns back through the formula
/// lands 0.0067 from the 2-decimal published score (double rounding);
/// the same configuration appears in the sweep table at three decimals
/// (cut-huge: 0.645, 0.603, 0.145) and reconciles with both published
/// scores, so that precision carries the check for this row.
const MAIN_ROWS: &[(&str, f64, f64, f64, f64)] = &[
    ("sar2eo", 0.22, 0.50, 0.08, 0.27),
    ("sar2rgb", 0.88, 0.64, 0.21, 0.58),
    ("rgb2ir", 0.36, 0.15, 0.09, 0.20),
];

const TOL: f64 = 0.005 + 1e-12;

#[test]
fn criterion_1_score_arithmetic_reproduction() {
    let started = std::time::Instant::now();
    for &(name, fid, lpips, l1, published) in SWEEP_ROWS {
        let got = task_score(fid, lpips, l1).unwrap();
        assert!(
            (got - published).abs() <= TOL,
            "{name}: computed {got:.6} vs published {published}"
        );
    }
    for &(name, fid, lpips, l1, published) in MAIN_ROWS {
        let got = task_score(fid, lpips, l1).unwrap();
        assert!(
            (got - published).abs() <= TOL,
            "{name}: computed {got:.6} vs published {published}"
        );
    }
    // sar2ir main row via the three-decimal columns of the same entry
    let sar2ir = task_score(0.645, 0.603, 0.145).unwrap();
    assert!((sar2ir - 0.46).abs() <= TOL, "sar2ir main row: {sar2ir:.6}");
    assert!((sar2ir - 0.464).abs() <= TOL);

    // leaderboard: per-task scores into the combined formula
    let ours = combined_score(&[0.27, 0.58, 0.46, 0.20], 0);
    assert!((ours - 0.38).abs() <= TOL, "combined (ours) = {ours:.6}");
    let first = combined_score(&[0.11, 0.50, 0.49, 0.20], 0);
    assert!((first - 0.32).abs() <= TOL, "combined (1st place) = {first:.6}");
    println!(
        "[acceptance] criterion 1 (score arithmetic, {} rows + 2 combined): PASS in {:?}",
        SWEEP_ROWS.len() + MAIN_ROWS.len() + 1,
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: endpoint identities
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_endpoint_identities() {
    let started = std::time::Instant::now();
    let s = sched();
    let top = s.bridge_coeffs(s.t_max).unwrap();
    assert!((top.a - 1.0).abs() <= 1e-8 && top.b.abs() <= 1e-8 && top.c.abs() <= 1e-8);
    let bottom = s.bridge_coeffs(0.0).unwrap();
    assert!(bottom.a.abs() <= 1e-8 && (bottom.b - 1.0).abs() <= 1e-8 && bottom.c.abs() <= 1e-8);
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        let (a, sg) = s.alpha_sigma(t).unwrap();
        assert!(
            (a * a + sg * sg - 1.0).abs() <= 1e-12,
            "t = {t}: {}",
            a * a + sg * sg
        );
    }
    println!(
        "[acceptance] criterion 2 (endpoint identities at 1e-8, variance identity at 1e-12): PASS in {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: rho-chain marginal preservation
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_rho_chain_marginal_preservation() {
    let started = std::time::Instant::now();
    let s = sched();
    let (x, y) = (0.9f64, -0.4f64);
    let gt = ConstantDenoiser {
        output: TensorF::scalar(y),
    };
    let xs = TensorF::scalar(x);
    let n_steps = 6usize; // five interior grid times
    let n_chains = 100_000usize;
    let grid = s.time_grid(n_steps, 7.0).unwrap();
    for &eta in &[0.0, 0.5, 1.0] {
        let mut sums = vec![0.0; n_steps + 1];
        let mut sumsq = vec![0.0; n_steps + 1];
        for chain in 0..n_chains {
            let cfg = SamplerConfig {
                n_steps,
                eta,
                seed: derive(31337, chain as u64),
                karras_rho: 7.0,
            };
            let states = dbim_trajectory(&gt, &xs, &cfg, &s).unwrap();
            for (k, (_, z)) in states.iter().enumerate() {
                let v = z.data()[0];
                sums[k] += v;
                sumsq[k] += v * v;
            }
        }
        for k in 1..n_steps {
            let t = grid.time(n_steps - k);
            let (om, ov) = marginal_oracle(x, y, t, &s).unwrap();
            let mean = sums[k] / n_chains as f64;
            let var = sumsq[k] / n_chains as f64 - mean * mean;
            let se_mean = (ov / n_chains as f64).sqrt();
            let se_var = ov * (2.0 / n_chains as f64).sqrt();
            assert!(
                (mean - om).abs() <= 3.0 * se_mean,
                "eta {eta}, t {t:.4}: mean {mean:.5} vs {om:.5} (3se {:.5})",
                3.0 * se_mean
            );
            assert!(
                (var - ov).abs() <= 3.0 * se_var,
                "eta {eta}, t {t:.4}: var {var:.5} vs {ov:.5} (3se {:.5})",
                3.0 * se_var
            );
        }
    }
    println!(
        "[acceptance] criterion 3 (marginal preservation, eta in {{0, 0.5, 1}}, 5 grid times, 1e5 chains, 3 SE): PASS in {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: deterministic-sampler convergence on the Gaussian task
// ---------------------------------------------------------------------------

/// Empirical transport error: quantile-coupled mean absolute difference
/// between the sampled outputs and an equal-size draw from the true
/// conditional law N(r·x, 1−r²).
fn transport_error(outputs: &mut [f64], r: f64, x: f64, seed: u64) -> f64 {
    let n = outputs.len();
    let rng = CounterRng::new(seed);
    let mut reference: Vec<f64> = (0..n)
        .map(|i| r * x + (1.0 - r * r).sqrt() * rng.gauss(0, i as u64))
        .collect();
    outputs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
    outputs
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n as f64
}

#[test]
fn criterion_4_deterministic_sampler_convergence() {
    // The output of the η = 0 chain with the posterior-mean denoiser is
    // exactly r·x + B_N·ε_boot (affine recursion): its conditional mean is
    // unbiased at every N, while the output *law* approaches the true
    // conditional N(r·x, 1−r²) as N grows (B_2 ≈ 0.075, B_64 ≈ 0.567,
    // target 0.6). Both faces are asserted: the N = 64 mean error stays
    // under 0.02 absolute (≈ 3 standard errors at 1e4 trajectories), and
    // the N = 64 transport error beats every N = 2 error measure.
    let started = std::time::Instant::now();
    let s = sched();
    let r = 0.8;
    let x = 1.0;
    let d = AnalyticGaussianDenoiser::new(r).unwrap();
    let xs = TensorF::scalar(x);
    let n = 10_000usize;
    let run = |n_steps: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let cfg = SamplerConfig {
                    n_steps,
                    eta: 0.0,
                    seed: derive(4242, i as u64),
                    karras_rho: 7.0,
                };
                dbim_sample(&d, &xs, &cfg, &s).unwrap().0.data()[0]
            })
            .collect()
    };
    let out64 = run(64);
    let out2 = run(2);
    let mean_err_64 = (out64.iter().sum::<f64>() / n as f64 - r * x).abs();
    assert!(mean_err_64 < 0.02, "N=64 mean-output error {mean_err_64:.5}");
    let mae_2 = out2.iter().map(|v| (v - r * x).abs()).sum::<f64>() / n as f64;
    assert!(
        mean_err_64 < mae_2,
        "N=64 mean error {mean_err_64:.5} vs N=2 error {mae_2:.5}"
    );
    let mut o64 = out64.clone();
    let mut o2 = out2.clone();
    let w64 = transport_error(&mut o64, r, x, 999);
    let w2 = transport_error(&mut o2, r, x, 999);
    assert!(
        w64 < w2,
        "transport error must shrink with steps: N=64 {w64:.5} vs N=2 {w2:.5}"
    );
    println!(
        "[acceptance] criterion 4 (sampler convergence: mean err {mean_err_64:.5} < 0.02 and < {mae_2:.5}; transport {w64:.4} < {w2:.4}): PASS in {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: gradient correctness for both topologies
// ---------------------------------------------------------------------------

fn gradcheck(model: &mut DenoiserModel, z: &TensorF, t: f64, x: &TensorF, n_coords: usize) -> f64 {
    use rand::Rng;
    let target = z.map(|_| 0.3);
    let (out, trace) = model.forward_traced(z, t, x).unwrap();
    let gout = out.zip_map(&target, |a, b| a - b).unwrap();
    let grads = model.backward(&trace, &gout).unwrap();
    let loss = |m: &DenoiserModel| -> f64 {
        let o = m.forward(z, t, x).unwrap();
        0.5 * o
            .zip_map(&target, |a, b| (a - b) * (a - b))
            .unwrap()
            .data()
            .iter()
            .sum::<f64>()
    };
    let mut rng = bridgelab::rng::stream(2026);
    let h = 1e-4;
    let mut max_rel = 0.0f64;
    let n_params = model.n_params();
    for _ in 0..n_coords {
        let c = rng.gen_range(0..n_params);
        let orig = model.params()[c];
        model.params_mut()[c] = orig + h;
        let lp = loss(model);
        model.params_mut()[c] = orig - h;
        let lm = loss(model);
        model.params_mut()[c] = orig;
        let fd = (lp - lm) / (2.0 * h);
        let an = grads[c];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    max_rel
}

#[test]
fn criterion_5_gradient_correctness() {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let started = std::time::Instant::now();
    let s = sched();
    let mut warm = bridgelab::rng::stream(71);

    let mut mlp = DenoiserModel::new_mlp(2, 24, s, 17);
    for p in mlp.params_mut() {
        *p += 0.05 * warm.sample::<f64, _>(StandardNormal);
    }
    let z = TensorF::from_vec(&[2], vec![0.8, -0.3]).unwrap();
    let x = TensorF::from_vec(&[2], vec![-0.4, 1.1]).unwrap();
    let rel_mlp = gradcheck(&mut mlp, &z, 0.45, &x, 100);
    assert!(rel_mlp <= 1e-3, "mlp max relative error {rel_mlp:.2e}");

    let mut conv = DenoiserModel::new_conv(1, 4, s, 23);
    for p in conv.params_mut() {
        *p += 0.05 * warm.sample::<f64, _>(StandardNormal);
    }
    let zi = TensorF::from_vec(&[1, 8, 8], (0..64).map(|i| (i % 7) as f64 / 7.0 - 0.5).collect()).unwrap();
    let xi = TensorF::from_vec(&[1, 8, 8], (0..64).map(|i| (i % 5) as f64 / 5.0).collect()).unwrap();
    let rel_conv = gradcheck(&mut conv, &zi, 0.6, &xi, 100);
    assert!(rel_conv <= 1e-3, "conv max relative error {rel_conv:.2e}");
    println!(
        "[acceptance] criterion 5 (gradients vs central differences, 100 coords each: mlp {rel_mlp:.2e}, conv {rel_conv:.2e}): PASS in {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: training closes the oracle gap
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_training_closes_oracle_gap() {
    let started = std::time::Instant::now();
    let s = sched();
    let r = 0.8;
    let ds = make_gaussian_pairs(r, 4096, 100).unwrap();
    let mut model = DenoiserModel::new_mlp(1, 64, s, 12);
    let cfg = TrainConfig::default(); // 2000 iterations
    train_loop(&mut model, &ds, &cfg, &s).unwrap();
    let eval = make_gaussian_pairs(r, 4096, 101).unwrap();
    let mse = heldout_weighted_mse(&model, &eval, 20_000, 555, &s).unwrap();
    let risk = analytic_weighted_risk(r, 200_000, 556, &s).unwrap();
    let ratio = mse / risk;
    assert!(
        ratio <= 1.3,
        "held-out weighted MSE {mse:.4} vs analytic risk {risk:.4}: ratio {ratio:.3}"
    );
    println!(
        "[acceptance] criterion 6 (2k iterations: weighted MSE {mse:.4} <= 1.3x analytic risk {risk:.4}, ratio {ratio:.3}): PASS in {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: PatchNCE unit behavior and LSGAN trivial cases
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_contrastive_unit_behavior() {
    use bridgelab::cut::{lsgan_losses, patch_nce_loss, PatchEmbeddingSet};
    let started = std::time::Instant::now();
    let unit = |dim: usize, axis: usize| {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    };
    // matched pair, one orthogonal negative, tau = 1: -log(e/(e+1))
    let set = PatchEmbeddingSet {
        queries: vec![unit(4, 0)],
        pos_keys: vec![unit(4, 0)],
        neg_keys: vec![unit(4, 1)],
        tau: 1.0,
    };
    let loss = patch_nce_loss(&set).unwrap();
    assert!((loss - (1.0f64 + (-1.0f64).exp()).ln()).abs() < 1e-12);
    assert!((loss - 0.31326).abs() < 1e-5);
    // zero negatives, matched pair
    let empty = PatchEmbeddingSet {
        queries: vec![unit(4, 2)],
        pos_keys: vec![unit(4, 2)],
        neg_keys: vec![],
        tau: 0.5,
    };
    assert_eq!(patch_nce_loss(&empty).unwrap(), 0.0);
    // temperature monotonicity on a separable configuration
    let mk = |tau: f64| PatchEmbeddingSet {
        queries: vec![unit(3, 0)],
        pos_keys: vec![unit(3, 0)],
        neg_keys: vec![unit(3, 1)],
        tau,
    };
    assert!(patch_nce_loss(&mk(0.05)).unwrap() < patch_nce_loss(&mk(1.0)).unwrap());
    // LSGAN trivial cases
    let ones = TensorF::from_vec(&[4], vec![1.0; 4]).unwrap();
    let zeros = TensorF::from_vec(&[4], vec![0.0; 4]).unwrap();
    assert_eq!(lsgan_losses(&zeros, &ones).1, 0.0);
    assert_eq!(lsgan_losses(&ones, &zeros).0, 0.0);
    assert_eq!(lsgan_losses(&zeros, &ones).0, 1.0);
    println!(
        "[acceptance] criterion 7 (contrastive unit behavior exact): PASS in {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: NFE-sweep shape on the shipped toy task
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_nfe_sweep_interior_argmin() {
    // Shipped defaults, pinned: rgb2ir toy analog at 16x16, 48 pairs
    // (24 train / 24 eval), conv denoiser trained 300 iterations at seed
    // 0, sweep seed 0, eta 0. First-run scores were 0.364 / 0.268 /
    // 0.176 / 0.182 / 0.178 / 0.192 over {1,2,5,10,20,100}: the argmin
    // sits at N = 5 and is frozen below.
    let started = std::time::Instant::now();
    let s = sched();
    let seed = 0u64;
    let ds = make_toy_translation(TaskTag::Rgb2Ir, 48, 16, derive(seed, 1)).unwrap();
    let (train_split, eval_split) = ds.split_train_eval();
    let model_channels = ds.src_channels.max(ds.tgt_channels);
    let mut model = DenoiserModel::new_conv(model_channels, 16, s, derive(seed, 2));
    let cfg = TrainConfig {
        batch_size: 8,
        n_iterations: 300,
        learning_rate: 3e-3,
        optimizer: bridgelab::trainer::OptimizerKind::AdaptiveMoments,
        seed: derive(seed, 3),
        log_every: 50,
    };
    train_loop(&mut model, &train_split, &cfg, &s).unwrap();
    let steps = [1usize, 2, 5, 10, 20, 100];
    let table = nfe_sweep(&model, &eval_split, &steps, 0.0, seed, &s).unwrap();
    assert_eq!(table.rows.len(), 6, "sweep must emit one row per step count");
    for (row, &n) in table.rows.iter().zip(&steps) {
        assert_eq!(row.n_steps, n);
        assert!(row.score.is_finite());
    }
    let best = table.best_index();
    assert!(
        best != 0 && best != table.rows.len() - 1,
        "argmin must be interior, got index {best} (N = {})",
        table.rows[best].n_steps
    );
    // frozen after the first run
    assert_eq!(table.rows[best].n_steps, 5, "pinned argmin moved");
    let scores: Vec<String> = table.rows.iter().map(|r| format!("{}:{:.4}", r.n_steps, r.score)).collect();
    println!(
        "[acceptance] criterion 8 (sweep {} -> argmin N=5 interior): PASS in {:?}",
        scores.join(" "),
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-level reproducibility of every command
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_bridgelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_dir_files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Wall-clock columns genuinely vary between runs; strip them before the
/// byte comparison and compare everything else exactly.
fn mask_wall_column(name: &str, bytes: &[u8]) -> Vec<u8> {
    if !name.ends_with(".csv") {
        return bytes.to_vec();
    }
    let text = String::from_utf8_lossy(bytes);
    let mut lines: Vec<String> = Vec::new();
    let mut wall_idx: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            wall_idx = line.split(',').position(|c| c == "wall_ms");
            lines.push(line.to_string());
            continue;
        }
        match wall_idx {
            Some(w) => {
                let cols: Vec<&str> = line.split(',').collect();
                let masked: Vec<&str> = cols
                    .iter()
                    .enumerate()
                    .map(|(j, c)| if j == w { "_" } else { *c })
                    .collect();
                lines.push(masked.join(","));
            }
            None => lines.push(line.to_string()),
        }
    }
    lines.join("\n").into_bytes()
}

fn assert_dirs_identical(a: &std::path::Path, b: &std::path::Path, what: &str) {
    let fa = read_dir_files(a);
    let fb = read_dir_files(b);
    let names_a: Vec<&String> = fa.iter().map(|(n, _)| n).collect();
    let names_b: Vec<&String> = fb.iter().map(|(n, _)| n).collect();
    assert_eq!(names_a, names_b, "{what}: file sets differ");
    for ((name, ba), (_, bb)) in fa.iter().zip(&fb) {
        if name == "metadata.txt" || name == "summary.txt" {
            // timing lines live here; compare the stable lines only
            let stable = |bytes: &[u8]| -> Vec<String> {
                String::from_utf8_lossy(bytes)
                    .lines()
                    .filter(|l| !l.starts_with("wall_ms"))
                    .map(str::to_string)
                    .collect()
            };
            assert_eq!(stable(ba), stable(bb), "{what}: {name} differs");
        } else {
            assert_eq!(
                mask_wall_column(name, ba),
                mask_wall_column(name, bb),
                "{what}: {name} differs"
            );
        }
    }
}

#[test]
fn criterion_9_byte_reproducibility() {
    let started = std::time::Instant::now();
    let root = tempfile::tempdir().unwrap();
    let path = |s: &str| root.path().join(s).display().to_string();

    for round in ["a", "b"] {
        let out = run_cli(&[
            "make-data",
            "--task",
            "sar2ir",
            "--n",
            "6",
            "--res",
            "16",
            "--seed",
            "7",
            "--out",
            &path(&format!("data_{round}")),
        ]);
        assert!(out.status.success(), "make-data failed: {out:?}");
    }
    assert_dirs_identical(
        &root.path().join("data_a"),
        &root.path().join("data_b"),
        "make-data",
    );

    for round in ["a", "b"] {
        let out = run_cli(&[
            "train-bridge",
            "--task",
            "gaussian",
            "--iters",
            "10",
            "--seed",
            "1",
            "--out",
            &path(&format!("tb_{round}")),
        ]);
        assert!(out.status.success(), "train-bridge failed: {out:?}");
    }
    assert_dirs_identical(&root.path().join("tb_a"), &root.path().join("tb_b"), "train-bridge");

    for round in ["a", "b"] {
        let out = run_cli(&[
            "train-bridge",
            "--task",
            "sar2ir",
            "--iters",
            "5",
            "--n",
            "8",
            "--res",
            "16",
            "--batch",
            "2",
            "--seed",
            "2",
            "--out",
            &path(&format!("tbi_{round}")),
        ]);
        assert!(out.status.success(), "train-bridge (image) failed: {out:?}");
    }
    assert_dirs_identical(&root.path().join("tbi_a"), &root.path().join("tbi_b"), "train-bridge image");

    let ckpt = path("tbi_a/checkpoint.ckpt");
    for round in ["a", "b"] {
        let out = run_cli(&[
            "sample",
            "--ckpt",
            &ckpt,
            "--data",
            &path("data_a"),
            "--nfe",
            "3",
            "--eta",
            "0",
            "--seed",
            "5",
            "--out",
            &path(&format!("smp_{round}")),
        ]);
        assert!(out.status.success(), "sample failed: {out:?}");
    }
    assert_dirs_identical(&root.path().join("smp_a"), &root.path().join("smp_b"), "sample");

    for round in ["a", "b"] {
        let out = run_cli(&[
            "sweep",
            "--ckpt",
            &ckpt,
            "--data",
            &path("data_a"),
            "--steps",
            "1,2,4",
            "--eta",
            "0",
            "--seed",
            "5",
            "--out",
            &path(&format!("swp_{round}")),
        ]);
        assert!(out.status.success(), "sweep failed: {out:?}");
    }
    assert_dirs_identical(&root.path().join("swp_a"), &root.path().join("swp_b"), "sweep");

    std::fs::write(
        root.path().join("rows.csv"),
        "task,fid_norm,lpips,l1\nsar2eo,0.22,0.50,0.08\nrgb2ir,0.36,0.15,0.09\n",
    )
    .unwrap();
    for round in ["a", "b"] {
        let out = run_cli(&[
            "eval",
            "--from-csv",
            &path("rows.csv"),
            "--out",
            &path(&format!("ev_{round}")),
        ]);
        assert!(out.status.success(), "eval failed: {out:?}");
    }
    assert_dirs_identical(&root.path().join("ev_a"), &root.path().join("ev_b"), "eval");

    println!(
        "[acceptance] criterion 9 (rerun byte-identity for make-data/train/sample/sweep/eval, wall columns masked): PASS in {:?}",
        started.elapsed()
    );
}
