//! Contrastive translation track: a feed-forward generator trained with
//! an LSGAN adversarial loss plus a patchwise InfoNCE loss that ties each
//! output patch to the source patch at the same location, using the other
//! patches of the same image as negatives.

use crate::error::{BridgeError, Result};
use crate::nn::{Net, NetBuilder, OpKind, Trace};
use crate::tensor::TensorF;
use crate::trainer::{Optimizer, OptimizerKind};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

pub const PATCHES_PER_LAYER: usize = 64;
pub const EMBED_DIM: usize = 32;
pub const TAU_DEFAULT: f64 = 0.1;

/// Weights of the combined generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutWeights {
    pub lambda_gan: f64,
    pub lambda_nce: f64,
}

impl Default for CutWeights {
    fn default() -> Self {
        Self {
            lambda_gan: 0.5,
            lambda_nce: 1.0,
        }
    }
}

/// L2-normalized embeddings for one contrastive evaluation: queries from
/// the translated image, positive keys from the source at the same
/// positions, negatives from other patches.
#[derive(Debug, Clone)]
pub struct PatchEmbeddingSet {
    pub queries: Vec<Vec<f64>>,
    pub pos_keys: Vec<Vec<f64>>,
    pub neg_keys: Vec<Vec<f64>>,
    pub tau: f64,
}

fn check_unit(vectors: &[Vec<f64>], what: &str) -> Result<()> {
    for (i, v) in vectors.iter().enumerate() {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(BridgeError::Argument(format!(
                "{what}[{i}] is not L2-normalized (norm {norm})"
            )));
        }
    }
    Ok(())
}

/// Mean over queries of −log(exp(q·k/τ) / (exp(q·k/τ) + Σ exp(q·k'/τ))).
/// The negative set is shared across queries; an empty negative set makes
/// every matched pair contribute exactly zero.
pub fn patch_nce_loss(set: &PatchEmbeddingSet) -> Result<f64> {
    if !(set.tau > 0.0) {
        return Err(BridgeError::Argument(format!(
            "temperature must be positive, got {}",
            set.tau
        )));
    }
    if set.queries.len() != set.pos_keys.len() {
        return Err(BridgeError::Argument(format!(
            "queries ({}) and positive keys ({}) must pair up",
            set.queries.len(),
            set.pos_keys.len()
        )));
    }
    if set.queries.is_empty() {
        return Err(BridgeError::Argument("no queries".into()));
    }
    check_unit(&set.queries, "queries")?;
    check_unit(&set.pos_keys, "pos_keys")?;
    check_unit(&set.neg_keys, "neg_keys")?;
    let mut total = 0.0;
    for (q, k) in set.queries.iter().zip(&set.pos_keys) {
        let s_pos = dot(q, k) / set.tau;
        let mut logits = vec![s_pos];
        for neg in &set.neg_keys {
            logits.push(dot(q, neg) / set.tau);
        }
        total += log_sum_exp(&logits) - s_pos;
    }
    Ok(total / set.queries.len() as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// LSGAN losses: the discriminator pushes real outputs to 1 and fake to
/// 0; the generator pushes its fakes to 1.
pub fn lsgan_losses(d_real: &TensorF, d_fake: &TensorF) -> (f64, f64) {
    let mean_sq = |t: &TensorF, target: f64| -> f64 {
        t.data().iter().map(|v| (v - target) * (v - target)).sum::<f64>() / t.len() as f64
    };
    let loss_d = 0.5 * mean_sq(d_real, 1.0) + 0.5 * mean_sq(d_fake, 0.0);
    let loss_g = mean_sq(d_fake, 1.0);
    (loss_d, loss_g)
}

/// λ_GAN·L_GAN + λ_NCE·L_NCE.
pub fn generator_objective(loss_gan: f64, loss_nce: f64, w: &CutWeights) -> f64 {
    w.lambda_gan * loss_gan + w.lambda_nce * loss_nce
}

/// Generator, discriminator, and per-layer embedding heads.
#[derive(Debug, Clone)]
pub struct CutModel {
    pub gen: Net,
    pub disc: Net,
    pub heads: Vec<Net>,
    /// Generator node indices whose activations feed the contrastive
    /// heads (encoder stages 1 and 2).
    enc_taps: Vec<usize>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub base: usize,
    pub tau: f64,
    pub weights: CutWeights,
}

impl CutModel {
    pub fn new(in_channels: usize, out_channels: usize, base: usize, seed: u64) -> Self {
        let mut rng = crate::rng::stream(seed);
        let w2 = base * 2;
        let w4 = base * 4;

        // generator: 3-stage encoder, 2 residual blocks, 3-stage decoder
        let mut g = NetBuilder::new();
        let e1c = g.add(OpKind::Conv3x3 { in_ch: in_channels, out_ch: base, stride: 1 }, 0);
        let e1 = g.add(OpKind::Silu, e1c);
        let e2c = g.add(OpKind::Conv3x3 { in_ch: base, out_ch: w2, stride: 2 }, e1);
        let e2 = g.add(OpKind::Silu, e2c);
        let e3c = g.add(OpKind::Conv3x3 { in_ch: w2, out_ch: w4, stride: 2 }, e2);
        let e3 = g.add(OpKind::Silu, e3c);
        let r1a = g.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w4, stride: 1 }, e3);
        let r1b = g.add(OpKind::Silu, r1a);
        let r1c = g.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w4, stride: 1 }, r1b);
        let r1 = g.add(OpKind::AddFrom { node: e3 }, r1c);
        let r2a = g.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w4, stride: 1 }, r1);
        let r2b = g.add(OpKind::Silu, r2a);
        let r2c = g.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w4, stride: 1 }, r2b);
        let r2 = g.add(OpKind::AddFrom { node: r1 }, r2c);
        let u2 = g.add(OpKind::Upsample2x, r2);
        let d2c = g.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w2, stride: 1 }, u2);
        let d2 = g.add(OpKind::Silu, d2c);
        let u1 = g.add(OpKind::Upsample2x, d2);
        let d1c = g.add(OpKind::Conv3x3 { in_ch: w2, out_ch: base, stride: 1 }, u1);
        let d1 = g.add(OpKind::Silu, d1c);
        g.add(OpKind::Conv3x3 { in_ch: base, out_ch: out_channels, stride: 1 }, d1);
        let gen = g.build(&mut rng);

        // 3-layer patch discriminator over target-channel images
        let mut d = NetBuilder::new();
        let dc1 = d.add(OpKind::Conv3x3 { in_ch: out_channels, out_ch: base, stride: 2 }, 0);
        let ds1 = d.add(OpKind::Silu, dc1);
        let dc2 = d.add(OpKind::Conv3x3 { in_ch: base, out_ch: w2, stride: 2 }, ds1);
        let ds2 = d.add(OpKind::Silu, dc2);
        d.add(OpKind::Conv3x3 { in_ch: w2, out_ch: 1, stride: 1 }, ds2);
        let disc = d.build(&mut rng);

        // one 2-layer MLP head per tapped encoder stage
        let heads = [base, w2]
            .iter()
            .map(|&c| {
                let mut h = NetBuilder::new();
                let h1 = h.add(OpKind::Linear { in_dim: c, out_dim: EMBED_DIM }, 0);
                let h2 = h.add(OpKind::Silu, h1);
                h.add(OpKind::Linear { in_dim: EMBED_DIM, out_dim: EMBED_DIM }, h2);
                h.build(&mut rng)
            })
            .collect();

        Self {
            gen,
            disc,
            heads,
            enc_taps: vec![e1, e2],
            in_channels,
            out_channels,
            base,
            tau: TAU_DEFAULT,
            weights: CutWeights::default(),
        }
    }

    pub fn generate(&self, x: &TensorF) -> Result<TensorF> {
        Ok(self.gen.forward(x, &[])?.0)
    }

    fn feature_vector(trace: &Trace, node: usize, pos: (usize, usize)) -> Vec<f64> {
        let act = trace.activation(node);
        let shape = act.shape();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let (y, x) = pos;
        (0..c).map(|ch| act.data()[(ch * h + y) * w + x]).collect()
    }

    fn scatter_feature_grad(
        grad_map: &mut TensorF,
        node_shape: &[usize],
        pos: (usize, usize),
        g: &[f64],
    ) {
        let (h, w) = (node_shape[1], node_shape[2]);
        let (y, x) = pos;
        for (ch, &gv) in g.iter().enumerate() {
            grad_map.data_mut()[(ch * h + y) * w + x] += gv;
        }
    }
}

/// Per-sample result of the generator objective evaluation.
pub struct GeneratorPass {
    pub loss_gan: f64,
    pub loss_nce: f64,
    pub loss_g: f64,
    pub gen_grads: Vec<f64>,
    pub head_grads: Vec<Vec<f64>>,
}

/// Sampled patch positions, one list per tapped layer.
pub type PatchPositions = Vec<Vec<(usize, usize)>>;

/// Draw shared patch positions for every tapped layer of one image.
pub fn sample_positions(model: &CutModel, x: &TensorF, rng: &mut ChaCha8Rng) -> Result<PatchPositions> {
    let (_, trace) = model.gen.forward(x, &[])?;
    let mut out = Vec::new();
    for &tap in &model.enc_taps {
        let shape = trace.activation(tap).shape();
        let (h, w) = (shape[1], shape[2]);
        let mut idx: Vec<usize> = (0..h * w).collect();
        idx.shuffle(rng);
        idx.truncate(PATCHES_PER_LAYER.min(h * w));
        out.push(idx.into_iter().map(|i| (i / w, i % w)).collect());
    }
    Ok(out)
}

/// Evaluate the combined generator objective for one source image and
/// produce exact gradients for the generator and the embedding heads.
///
/// The contrastive term embeds, at each tapped layer, the features of the
/// source (keys) and of the translation (queries) at shared positions;
/// negatives are the keys of the other patches in the same image.
pub fn generator_pass(model: &CutModel, x: &TensorF, positions: &PatchPositions) -> Result<GeneratorPass> {
    let (y_hat, trace_x) = model.gen.forward(x, &[])?;
    let (d_fake, trace_d) = model.disc.forward(&y_hat, &[])?;

    // LSGAN generator term and its gradient back to the image
    let n_d = d_fake.len() as f64;
    let loss_gan = d_fake.data().iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / n_d;
    let gout_d = d_fake.map(|v| 2.0 * (v - 1.0) / n_d);
    let disc_back = model.disc.backward(&trace_d, &gout_d, &[])?;
    let mut grad_y_hat = disc_back.input;
    grad_y_hat.scale(model.weights.lambda_gan);

    // encoder features of the translated image
    let (_, trace_y) = model.gen.forward(&y_hat, &[])?;

    let mut loss_nce = 0.0;
    let mut head_grads: Vec<Vec<f64>> = model.heads.iter().map(|h| vec![0.0; h.n_params()]).collect();
    let mut extra_x: Vec<(usize, TensorF)> = Vec::new();
    let mut extra_y: Vec<(usize, TensorF)> = Vec::new();
    let n_layers = model.enc_taps.len() as f64;

    for (layer, &tap) in model.enc_taps.iter().enumerate() {
        let pos_list = &positions[layer];
        let n_patch = pos_list.len();
        if n_patch == 0 {
            continue;
        }
        let head = &model.heads[layer];

        // forward all patches through the head, keep traces for backward
        let mut key_embeds = Vec::with_capacity(n_patch);
        let mut key_traces = Vec::with_capacity(n_patch);
        let mut key_raw_norm = Vec::with_capacity(n_patch);
        let mut query_embeds = Vec::with_capacity(n_patch);
        let mut query_traces = Vec::with_capacity(n_patch);
        let mut query_raw_norm = Vec::with_capacity(n_patch);
        for &pos in pos_list {
            let fx = CutModel::feature_vector(&trace_x, tap, pos);
            let fy = CutModel::feature_vector(&trace_y, tap, pos);
            let dim = fx.len();
            let (kx, ktr) = head.forward(&TensorF::from_vec(&[dim], fx)?, &[])?;
            let (qy, qtr) = head.forward(&TensorF::from_vec(&[dim], fy)?, &[])?;
            let (ke, kn) = normalize(kx.data());
            let (qe, qn) = normalize(qy.data());
            key_embeds.push(ke);
            key_traces.push(ktr);
            key_raw_norm.push(kn);
            query_embeds.push(qe);
            query_traces.push(qtr);
            query_raw_norm.push(qn);
        }

        // InfoNCE over the patch set: positives pair up by position,
        // negatives are the other keys of the same image
        let scale = 1.0 / (model.tau * n_patch as f64 * n_layers);
        let mut dq = vec![vec![0.0; EMBED_DIM]; n_patch];
        let mut dk = vec![vec![0.0; EMBED_DIM]; n_patch];
        let mut layer_loss = 0.0;
        for i in 0..n_patch {
            let q = &query_embeds[i];
            let logits: Vec<f64> = key_embeds
                .iter()
                .map(|key| dot(q, key) / model.tau)
                .collect();
            let lse = log_sum_exp(&logits);
            layer_loss += lse - logits[i];
            // softmax over all keys; the positive gets p - 1
            for (j, key) in key_embeds.iter().enumerate() {
                let p = (logits[j] - lse).exp();
                let coeff = if j == i { p - 1.0 } else { p };
                for d in 0..EMBED_DIM {
                    dq[i][d] += coeff * key[d] * scale;
                    dk[j][d] += coeff * q[d] * scale;
                }
            }
        }
        loss_nce += layer_loss / n_patch as f64 / n_layers;

        // chain through normalization and the head into the feature maps
        let x_shape = trace_x.activation(tap).shape().to_vec();
        let y_shape = trace_y.activation(tap).shape().to_vec();
        let mut gmap_x = TensorF::zeros(&x_shape);
        let mut gmap_y = TensorF::zeros(&y_shape);
        for i in 0..n_patch {
            let gq_raw = normalize_backward(&query_embeds[i], query_raw_norm[i], &dq[i]);
            let gk_raw = normalize_backward(&key_embeds[i], key_raw_norm[i], &dk[i]);
            let gq = TensorF::from_vec(&[EMBED_DIM], gq_raw)?;
            let gk = TensorF::from_vec(&[EMBED_DIM], gk_raw)?;
            let back_q = head.backward(&query_traces[i], &gq, &[])?;
            let back_k = head.backward(&key_traces[i], &gk, &[])?;
            for (acc, g) in head_grads[layer].iter_mut().zip(&back_q.params) {
                *acc += model.weights.lambda_nce * g;
            }
            for (acc, g) in head_grads[layer].iter_mut().zip(&back_k.params) {
                *acc += model.weights.lambda_nce * g;
            }
            let mut gq_in = back_q.input;
            gq_in.scale(model.weights.lambda_nce);
            let mut gk_in = back_k.input;
            gk_in.scale(model.weights.lambda_nce);
            CutModel::scatter_feature_grad(&mut gmap_y, &y_shape, pos_list[i], gq_in.data());
            CutModel::scatter_feature_grad(&mut gmap_x, &x_shape, pos_list[i], gk_in.data());
        }
        extra_x.push((tap, gmap_x));
        extra_y.push((tap, gmap_y));
    }

    // translated-image encoder pass: parameter grads plus the gradient
    // flowing back into the image itself
    let zero_out = TensorF::zeros(trace_y.output().shape());
    let back_y = model.gen.backward(&trace_y, &zero_out, &extra_y)?;
    grad_y_hat.add_scaled(&back_y.input, 1.0)?;

    // main generator pass: adversarial + contrastive gradient at the
    // output, plus source-feature taps
    let back_x = model.gen.backward(&trace_x, &grad_y_hat, &extra_x)?;

    let mut gen_grads = back_x.params;
    for (acc, g) in gen_grads.iter_mut().zip(&back_y.params) {
        *acc += g;
    }

    Ok(GeneratorPass {
        loss_gan,
        loss_nce,
        loss_g: generator_objective(loss_gan, loss_nce, &model.weights),
        gen_grads,
        head_grads,
    })
}

fn normalize(v: &[f64]) -> (Vec<f64>, f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    (v.iter().map(|x| x / norm).collect(), norm)
}

/// Jacobian-vector product of e = v/‖v‖: dv = (g − (g·e)·e)/‖v‖.
fn normalize_backward(e: &[f64], norm: f64, g: &[f64]) -> Vec<f64> {
    let ge = dot(g, e);
    e.iter()
        .zip(g)
        .map(|(&ei, &gi)| (gi - ge * ei) / norm)
        .collect()
}

/// Discriminator loss on one (real, fake) pair and its parameter grads.
pub fn discriminator_pass(model: &CutModel, y_real: &TensorF, y_fake: &TensorF) -> Result<(f64, Vec<f64>)> {
    let (d_real, trace_r) = model.disc.forward(y_real, &[])?;
    let (d_fake, trace_f) = model.disc.forward(y_fake, &[])?;
    let (loss_d, _) = lsgan_losses(&d_real, &d_fake);
    let n = d_real.len() as f64;
    let gr = d_real.map(|v| (v - 1.0) / n);
    let gf = d_fake.map(|v| v / n);
    let br = model.disc.backward(&trace_r, &gr, &[])?;
    let bf = model.disc.backward(&trace_f, &gf, &[])?;
    let mut grads = br.params;
    for (acc, g) in grads.iter_mut().zip(&bf.params) {
        *acc += g;
    }
    Ok((loss_d, grads))
}

/// Optimizer state for alternating updates.
pub struct CutTrainer {
    pub model: CutModel,
    opt_gen: Optimizer,
    opt_disc: Optimizer,
    opt_heads: Vec<Optimizer>,
    pub learning_rate: f64,
}

impl CutTrainer {
    pub fn new(model: CutModel, learning_rate: f64) -> Self {
        let opt_gen = Optimizer::new(OptimizerKind::AdaptiveMoments, model.gen.n_params());
        let opt_disc = Optimizer::new(OptimizerKind::AdaptiveMoments, model.disc.n_params());
        let opt_heads = model
            .heads
            .iter()
            .map(|h| Optimizer::new(OptimizerKind::AdaptiveMoments, h.n_params()))
            .collect();
        Self {
            model,
            opt_gen,
            opt_disc,
            opt_heads,
            learning_rate,
        }
    }

    /// One alternating step: discriminator update on a (real, fake) pair,
    /// then generator + head update on the combined objective.
    pub fn train_step(
        &mut self,
        xs: &[TensorF],
        y_pool: &[TensorF],
        rng: &mut ChaCha8Rng,
        iter: usize,
    ) -> Result<(f64, f64)> {
        if xs.is_empty() || y_pool.is_empty() {
            return Err(BridgeError::Argument("cut training batch or pool is empty".into()));
        }
        // discriminator step on detached fakes
        let mut loss_d_acc = 0.0;
        let mut d_grads = vec![0.0; self.model.disc.n_params()];
        for x in xs {
            let y_fake = self.model.generate(x)?;
            let y_real = &y_pool[rng.gen_range(0..y_pool.len())];
            let (ld, g) = discriminator_pass(&self.model, y_real, &y_fake)?;
            loss_d_acc += ld;
            for (acc, gi) in d_grads.iter_mut().zip(&g) {
                *acc += gi / xs.len() as f64;
            }
        }
        let loss_d = loss_d_acc / xs.len() as f64;
        self.opt_disc
            .update(self.model.disc.params_mut(), &d_grads, self.learning_rate);

        // generator step
        let mut loss_g_acc = 0.0;
        let mut g_grads = vec![0.0; self.model.gen.n_params()];
        let mut h_grads: Vec<Vec<f64>> = self
            .model
            .heads
            .iter()
            .map(|h| vec![0.0; h.n_params()])
            .collect();
        for x in xs {
            let positions = sample_positions(&self.model, x, rng)?;
            let pass = generator_pass(&self.model, x, &positions)?;
            if !pass.loss_g.is_finite() {
                return Err(BridgeError::Divergence {
                    step: iter,
                    what: format!("generator loss became {}", pass.loss_g),
                });
            }
            loss_g_acc += pass.loss_g;
            for (acc, gi) in g_grads.iter_mut().zip(&pass.gen_grads) {
                *acc += gi / xs.len() as f64;
            }
            for (hacc, hg) in h_grads.iter_mut().zip(&pass.head_grads) {
                for (acc, gi) in hacc.iter_mut().zip(hg) {
                    *acc += gi / xs.len() as f64;
                }
            }
        }
        let loss_g = loss_g_acc / xs.len() as f64;
        self.opt_gen
            .update(self.model.gen.params_mut(), &g_grads, self.learning_rate);
        for ((head, opt), hg) in self
            .model
            .heads
            .iter_mut()
            .zip(&mut self.opt_heads)
            .zip(&h_grads)
        {
            opt.update(head.params_mut(), hg, self.learning_rate);
        }
        Ok((loss_g, loss_d))
    }
}

/// One logged point of a CUT run.
#[derive(Debug, Clone, PartialEq)]
pub struct CutLossPoint {
    pub iter: usize,
    pub loss_g: f64,
    pub loss_d: f64,
    pub wall_ms: u64,
}

pub fn cut_loss_csv(points: &[CutLossPoint]) -> String {
    let mut out = String::from("iter,loss_g,loss_d,wall_ms\n");
    for p in points {
        let _ = writeln!(out, "{},{:.6},{:.6},{}", p.iter, p.loss_g, p.loss_d, p.wall_ms);
    }
    out
}

/// Train on a paired dataset used unpaired: sources drive the generator,
/// targets only fill the adversarial real pool.
pub fn cut_train_loop(
    trainer: &mut CutTrainer,
    dataset: &crate::data::PairedDataset,
    n_iterations: usize,
    batch_size: usize,
    seed: u64,
    log_every: usize,
) -> Result<Vec<CutLossPoint>> {
    if batch_size == 0 || log_every == 0 {
        return Err(BridgeError::Argument("batch_size and log_every must be positive".into()));
    }
    let mut rng = crate::rng::stream(seed);
    let started = std::time::Instant::now();
    let mut curve = Vec::new();
    for iter in 0..n_iterations {
        let xs: Vec<TensorF> = (0..batch_size)
            .map(|_| dataset.sources[rng.gen_range(0..dataset.len())].clone())
            .collect();
        let (loss_g, loss_d) = trainer.train_step(&xs, &dataset.targets, &mut rng, iter)?;
        if iter % log_every == 0 || iter + 1 == n_iterations {
            curve.push(CutLossPoint {
                iter,
                loss_g,
                loss_d,
                wall_ms: started.elapsed().as_millis() as u64,
            });
        }
    }
    Ok(curve)
}

// ---------------------------------------------------------------------------
// Checkpointing: all three component parameter vectors in one text file
// ---------------------------------------------------------------------------

impl CutModel {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("bridgelab-cut-checkpoint v1\n");
        let _ = writeln!(
            out,
            "topology {} {} {} tau {:016x} lambda {:016x} {:016x}",
            self.in_channels,
            self.out_channels,
            self.base,
            self.tau.to_bits(),
            self.weights.lambda_gan.to_bits(),
            self.weights.lambda_nce.to_bits()
        );
        for (name, params) in [("gen", self.gen.params()), ("disc", self.disc.params())]
            .into_iter()
            .chain(self.heads.iter().enumerate().map(|(i, h)| {
                let name: &'static str = if i == 0 { "head0" } else { "head1" };
                (name, h.params())
            }))
        {
            let _ = writeln!(out, "{name} {}", params.len());
            for chunk in params.chunks(8) {
                let line: Vec<String> = chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut line_iter = text.lines();
        let mut offset = 0usize;
        let mut take = move |what: &str| -> Result<(String, usize)> {
            let line = line_iter.next().ok_or_else(|| BridgeError::Parse {
                offset,
                what: format!("missing {what}"),
            })?;
            let at = offset;
            offset += line.len() + 1;
            Ok((line.to_string(), at))
        };
        if take("header")?.0 != "bridgelab-cut-checkpoint v1" {
            return Err(BridgeError::Parse {
                offset: 0,
                what: "unknown cut checkpoint header".into(),
            });
        }
        let (topo, topo_at) = take("topology")?;
        let parts: Vec<&str> = topo.split_whitespace().collect();
        if parts.len() != 9 || parts[0] != "topology" || parts[4] != "tau" || parts[6] != "lambda" {
            return Err(BridgeError::Parse {
                offset: topo_at,
                what: format!("bad topology line {topo:?}"),
            });
        }
        let parse_usize = |s: &str, at: usize| -> Result<usize> {
            s.parse().map_err(|_| BridgeError::Parse {
                offset: at,
                what: format!("expected integer, got {s:?}"),
            })
        };
        let parse_bits = |s: &str, at: usize| -> Result<f64> {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|_| BridgeError::Parse {
                    offset: at,
                    what: format!("expected hex bits, got {s:?}"),
                })
        };
        let (in_ch, out_ch, base) = (
            parse_usize(parts[1], topo_at)?,
            parse_usize(parts[2], topo_at)?,
            parse_usize(parts[3], topo_at)?,
        );
        let tau = parse_bits(parts[5], topo_at)?;
        let weights = CutWeights {
            lambda_gan: parse_bits(parts[7], topo_at)?,
            lambda_nce: parse_bits(parts[8], topo_at)?,
        };
        let mut model = Self::new(in_ch, out_ch, base, 0);
        model.tau = tau;
        model.weights = weights;
        for section in ["gen", "disc", "head0", "head1"] {
            let (head_line, head_at) = take(section)?;
            let hp: Vec<&str> = head_line.split_whitespace().collect();
            if hp.len() != 2 || hp[0] != section {
                return Err(BridgeError::Parse {
                    offset: head_at,
                    what: format!("bad section line {head_line:?}"),
                });
            }
            let count = parse_usize(hp[1], head_at)?;
            let mut params = Vec::with_capacity(count);
            while params.len() < count {
                let (line, at) = take("params")?;
                for tok in line.split_whitespace() {
                    params.push(parse_bits(tok, at)?);
                }
            }
            match section {
                "gen" => model.gen.set_params(params)?,
                "disc" => model.disc.set_params(params)?,
                "head0" => model.heads[0].set_params(params)?,
                _ => model.heads[1].set_params(params)?,
            }
        }
        Ok(model)
    }
}
