//! Minimal reverse-mode network engine.
//!
//! A [`Net`] is a static list of nodes, each reading one earlier node
//! (plus an optional skip source). Forward records every activation into
//! a [`Trace`]; backward walks the list in reverse and accumulates exact
//! gradients with respect to the flat parameter vector and the input.
//! Parameters live in one flat `Vec<f64>` so optimizers and checkpoints
//! treat every topology uniformly.

use crate::error::{BridgeError, Result};
use crate::tensor::TensorF;
use rand::Rng;
use rand_distr::StandardNormal;

/// One primitive operation in the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    /// The graph input; always node 0.
    Input,
    /// Dense affine map on a flat vector: y = W·x + b.
    Linear { in_dim: usize, out_dim: usize },
    /// 3×3 convolution, padding 1, on `[C, H, W]`.
    Conv3x3 { in_ch: usize, out_ch: usize, stride: usize },
    /// x · sigmoid(x), elementwise.
    Silu,
    /// Nearest-neighbor 2× spatial upsample.
    Upsample2x,
    /// Skip connection: adds the activation of an earlier node.
    AddFrom { node: usize },
    /// Adds a learned projection of the time features, broadcast over
    /// space: y[c, ·] = x[c, ·] + (W·feats + b)[c].
    TimeEmbed { features: usize, channels: usize },
}

impl OpKind {
    fn param_len(&self) -> usize {
        match *self {
            OpKind::Linear { in_dim, out_dim } => out_dim * in_dim + out_dim,
            OpKind::Conv3x3 { in_ch, out_ch, .. } => out_ch * in_ch * 9 + out_ch,
            OpKind::TimeEmbed { features, channels } => channels * features + channels,
            _ => 0,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            OpKind::Linear { in_dim, .. } => in_dim,
            OpKind::Conv3x3 { in_ch, .. } => in_ch * 9,
            OpKind::TimeEmbed { features, .. } => features,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: OpKind,
    src: usize,
    param_offset: usize,
    param_len: usize,
    /// He-init by default; the output head is zero-initialized.
    zero_init: bool,
}

/// Builder for a [`Net`]. `add` returns the node index for wiring skips.
#[derive(Debug, Default)]
pub struct NetBuilder {
    nodes: Vec<Node>,
    n_params: usize,
}

impl NetBuilder {
    pub fn new() -> Self {
        let mut b = Self::default();
        b.nodes.push(Node {
            op: OpKind::Input,
            src: 0,
            param_offset: 0,
            param_len: 0,
            zero_init: false,
        });
        b
    }

    pub fn add(&mut self, op: OpKind, src: usize) -> usize {
        self.push(op, src, false)
    }

    /// Add an op whose parameters start at zero (used for output heads so
    /// an untrained model predicts 0).
    pub fn add_zero_init(&mut self, op: OpKind, src: usize) -> usize {
        self.push(op, src, true)
    }

    fn push(&mut self, op: OpKind, src: usize, zero_init: bool) -> usize {
        assert!(src < self.nodes.len(), "source node out of range");
        if let OpKind::AddFrom { node } = op {
            assert!(node < self.nodes.len(), "skip source out of range");
        }
        let param_len = op.param_len();
        let node = Node {
            op,
            src,
            param_offset: self.n_params,
            param_len,
            zero_init,
        };
        self.n_params += param_len;
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn build<R: Rng>(self, rng: &mut R) -> Net {
        let mut params = vec![0.0; self.n_params];
        for node in &self.nodes {
            if node.param_len == 0 || node.zero_init {
                continue;
            }
            let fan_in = node.op.fan_in().max(1);
            let std = (2.0 / fan_in as f64).sqrt();
            let weight_len = node.param_len - bias_len(&node.op);
            for p in &mut params[node.param_offset..node.param_offset + weight_len] {
                let g: f64 = rng.sample(StandardNormal);
                *p = std * g;
            }
            // biases stay zero
        }
        Net {
            nodes: self.nodes,
            params,
            version: 0,
        }
    }
}

fn bias_len(op: &OpKind) -> usize {
    match *op {
        OpKind::Linear { out_dim, .. } => out_dim,
        OpKind::Conv3x3 { out_ch, .. } => out_ch,
        OpKind::TimeEmbed { channels, .. } => channels,
        _ => 0,
    }
}

/// Saved activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<TensorF>,
    time_feats: Vec<f64>,
    version: u64,
}

impl Trace {
    pub fn output(&self) -> &TensorF {
        self.activations.last().expect("trace has at least the input")
    }

    pub fn activation(&self, node: usize) -> &TensorF {
        &self.activations[node]
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: TensorF,
}

#[derive(Debug, Clone)]
pub struct Net {
    nodes: Vec<Node>,
    params: Vec<f64>,
    version: u64,
}

impl Net {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to parameters; invalidates existing traces.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(BridgeError::Argument(format!(
                "parameter vector length {} does not match topology ({})",
                params.len(),
                self.params.len()
            )));
        }
        self.params = params;
        self.version += 1;
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Run the graph. `time_feats` feeds every `TimeEmbed` node; pass an
    /// empty slice when the topology has none.
    pub fn forward(&self, input: &TensorF, time_feats: &[f64]) -> Result<(TensorF, Trace)> {
        let mut acts: Vec<TensorF> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let out = match node.op {
                OpKind::Input => input.clone(),
                _ => self.apply(node, &acts[node.src], &acts, time_feats)?,
            };
            acts.push(out);
        }
        let trace = Trace {
            activations: acts,
            time_feats: time_feats.to_vec(),
            version: self.version,
        };
        Ok((trace.output().clone(), trace))
    }

    fn apply(
        &self,
        node: &Node,
        src: &TensorF,
        acts: &[TensorF],
        time_feats: &[f64],
    ) -> Result<TensorF> {
        let p = &self.params[node.param_offset..node.param_offset + node.param_len];
        match node.op {
            OpKind::Input => unreachable!(),
            OpKind::Linear { in_dim, out_dim } => {
                if src.len() != in_dim {
                    return Err(BridgeError::Argument(format!(
                        "linear layer expects {in_dim} inputs, got {}",
                        src.len()
                    )));
                }
                let w = &p[..out_dim * in_dim];
                let b = &p[out_dim * in_dim..];
                let x = src.data();
                let mut out = vec![0.0; out_dim];
                for o in 0..out_dim {
                    let row = &w[o * in_dim..(o + 1) * in_dim];
                    let mut acc = b[o];
                    for i in 0..in_dim {
                        acc += row[i] * x[i];
                    }
                    out[o] = acc;
                }
                TensorF::from_vec(&[out_dim], out)
            }
            OpKind::Conv3x3 { in_ch, out_ch, stride } => {
                let (h, w) = spatial(src, in_ch)?;
                let (oh, ow) = ((h - 1) / stride + 1, (w - 1) / stride + 1);
                let wgt = &p[..out_ch * in_ch * 9];
                let b = &p[out_ch * in_ch * 9..];
                let x = src.data();
                let mut out = vec![0.0; out_ch * oh * ow];
                for o in 0..out_ch {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = b[o];
                            for i in 0..in_ch {
                                for ky in 0..3usize {
                                    let iy = (oy * stride + ky) as isize - 1;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..3usize {
                                        let ix = (ox * stride + kx) as isize - 1;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        acc += wgt[((o * in_ch + i) * 3 + ky) * 3 + kx]
                                            * x[(i * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                            out[(o * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
                TensorF::from_vec(&[out_ch, oh, ow], out)
            }
            OpKind::Silu => Ok(src.map(silu)),
            OpKind::Upsample2x => {
                let c = src.shape()[0];
                let (h, w) = spatial(src, c)?;
                let x = src.data();
                let mut out = vec![0.0; c * 4 * h * w];
                let (oh, ow) = (2 * h, 2 * w);
                for ch in 0..c {
                    for y in 0..oh {
                        for xx in 0..ow {
                            out[(ch * oh + y) * ow + xx] = x[(ch * h + y / 2) * w + xx / 2];
                        }
                    }
                }
                TensorF::from_vec(&[c, oh, ow], out)
            }
            OpKind::AddFrom { node: other } => src.zip_map(&acts[other], |a, b| a + b),
            OpKind::TimeEmbed { features, channels } => {
                if time_feats.len() != features {
                    return Err(BridgeError::Argument(format!(
                        "time embedding expects {features} features, got {}",
                        time_feats.len()
                    )));
                }
                let w = &p[..channels * features];
                let b = &p[channels * features..];
                let per_ch = src.len() / channels;
                if per_ch * channels != src.len() {
                    return Err(BridgeError::Argument(
                        "time embedding channel count does not divide activation".into(),
                    ));
                }
                let mut out = src.clone();
                let od = out.data_mut();
                for ch in 0..channels {
                    let mut proj = b[ch];
                    for f in 0..features {
                        proj += w[ch * features + f] * time_feats[f];
                    }
                    for v in &mut od[ch * per_ch..(ch + 1) * per_ch] {
                        *v += proj;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Reverse pass. `grad_output` is dLoss/dOutput; `extra` injects
    /// additional gradients at interior nodes (used by objectives that read
    /// intermediate features). Fails with a stale-trace error if parameters
    /// changed since the forward pass.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_output: &TensorF,
        extra: &[(usize, TensorF)],
    ) -> Result<Gradients> {
        if trace.version != self.version {
            return Err(BridgeError::StaleTrace);
        }
        let acts = &trace.activations;
        grad_output.check_same_shape(trace.output(), "backward grad_output")?;
        let mut grads: Vec<Option<TensorF>> = vec![None; self.nodes.len()];
        grads[self.nodes.len() - 1] = Some(grad_output.clone());
        for &(node, ref g) in extra {
            g.check_same_shape(&acts[node], "backward extra grad")?;
            match &mut grads[node] {
                Some(existing) => existing.add_scaled(g, 1.0)?,
                slot => *slot = Some(g.clone()),
            }
        }
        let mut param_grads = vec![0.0; self.params.len()];
        for idx in (1..self.nodes.len()).rev() {
            let gout = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            let src_act = &acts[node.src];
            let p = &self.params[node.param_offset..node.param_offset + node.param_len];
            let pg = &mut param_grads[node.param_offset..node.param_offset + node.param_len];
            let gsrc = match node.op {
                OpKind::Input => unreachable!(),
                OpKind::Linear { in_dim, out_dim } => {
                    let w = &p[..out_dim * in_dim];
                    let x = src_act.data();
                    let gy = gout.data();
                    let (gw, gb) = pg.split_at_mut(out_dim * in_dim);
                    let mut gx = vec![0.0; in_dim];
                    for o in 0..out_dim {
                        let g = gy[o];
                        gb[o] += g;
                        let row = &w[o * in_dim..(o + 1) * in_dim];
                        let grow = &mut gw[o * in_dim..(o + 1) * in_dim];
                        for i in 0..in_dim {
                            grow[i] += g * x[i];
                            gx[i] += g * row[i];
                        }
                    }
                    TensorF::from_vec(&[in_dim], gx)?
                }
                OpKind::Conv3x3 { in_ch, out_ch, stride } => {
                    let (h, w) = spatial(src_act, in_ch)?;
                    let (oh, ow) = ((h - 1) / stride + 1, (w - 1) / stride + 1);
                    let wgt = &p[..out_ch * in_ch * 9];
                    let x = src_act.data();
                    let gy = gout.data();
                    let (gw, gb) = pg.split_at_mut(out_ch * in_ch * 9);
                    let mut gx = vec![0.0; in_ch * h * w];
                    for o in 0..out_ch {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let g = gy[(o * oh + oy) * ow + ox];
                                gb[o] += g;
                                for i in 0..in_ch {
                                    for ky in 0..3usize {
                                        let iy = (oy * stride + ky) as isize - 1;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        for kx in 0..3usize {
                                            let ix = (ox * stride + kx) as isize - 1;
                                            if ix < 0 || ix >= w as isize {
                                                continue;
                                            }
                                            let widx = ((o * in_ch + i) * 3 + ky) * 3 + kx;
                                            let xidx = (i * h + iy as usize) * w + ix as usize;
                                            gw[widx] += g * x[xidx];
                                            gx[xidx] += g * wgt[widx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    TensorF::from_vec(&[in_ch, h, w], gx)?
                }
                OpKind::Silu => gout.zip_map(src_act, |g, x| g * silu_deriv(x))?,
                OpKind::Upsample2x => {
                    let c = src_act.shape()[0];
                    let (h, w) = spatial(src_act, c)?;
                    let gy = gout.data();
                    let mut gx = vec![0.0; c * h * w];
                    let (oh, ow) = (2 * h, 2 * w);
                    for ch in 0..c {
                        for y in 0..oh {
                            for xx in 0..ow {
                                gx[(ch * h + y / 2) * w + xx / 2] += gy[(ch * oh + y) * ow + xx];
                            }
                        }
                    }
                    TensorF::from_vec(&[c, h, w], gx)?
                }
                OpKind::AddFrom { node: other } => {
                    match &mut grads[other] {
                        Some(existing) => existing.add_scaled(&gout, 1.0)?,
                        slot => *slot = Some(gout.clone()),
                    }
                    gout.clone()
                }
                OpKind::TimeEmbed { features, channels } => {
                    let per_ch = src_act.len() / channels;
                    let gy = gout.data();
                    let (gw, gb) = pg.split_at_mut(channels * features);
                    for ch in 0..channels {
                        let gproj: f64 = gy[ch * per_ch..(ch + 1) * per_ch].iter().sum();
                        gb[ch] += gproj;
                        for f in 0..features {
                            gw[ch * features + f] += gproj * trace.time_feats[f];
                        }
                    }
                    gout.clone()
                }
            };
            match &mut grads[node.src] {
                Some(existing) => existing.add_scaled(&gsrc, 1.0)?,
                slot => *slot = Some(gsrc),
            }
        }
        let input = grads[0]
            .take()
            .unwrap_or_else(|| TensorF::zeros(acts[0].shape()));
        Ok(Gradients {
            params: param_grads,
            input,
        })
    }
}

fn spatial(t: &TensorF, channels: usize) -> Result<(usize, usize)> {
    let shape = t.shape();
    if shape.len() != 3 || shape[0] != channels {
        return Err(BridgeError::Argument(format!(
            "expected [{channels}, H, W] activation, got {shape:?}"
        )));
    }
    Ok((shape[1], shape[2]))
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_deriv(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}
