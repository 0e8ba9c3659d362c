//! The data predictor D(z_t, t, x): a small trainable network conditioned
//! on the source by channel concatenation and on time by a sinusoidal
//! log-SNR embedding, plus the analytic Gaussian denoiser used as a
//! ground-truth oracle for the sampler and trainer.

use crate::error::{BridgeError, Result};
use crate::nn::{Net, NetBuilder, OpKind, Trace};
use crate::schedule::VpSchedule;
use crate::tensor::TensorF;
use std::fmt::Write as _;
use std::path::Path;

pub const TIME_EMBED_DIM: usize = 16;

/// Network shape. The MLP covers scalar/point tasks; the convolutional
/// encoder-decoder (3 down / 3 up stages with skip connections) covers toy
/// images. Spatial extent must be divisible by 8 for the conv topology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    Mlp { in_dim: usize, hidden: usize, out_dim: usize },
    ConvUnet { in_ch: usize, base: usize, out_ch: usize },
}

/// Trainable predictor of the clean target from a bridge state.
#[derive(Debug, Clone)]
pub struct DenoiserModel {
    topology: Topology,
    net: Net,
    /// Shared model-channel count; single-band tensors are expanded to it
    /// by channel repetition before entering the network.
    pub model_channels: usize,
    pub sched: VpSchedule,
}

impl DenoiserModel {
    /// MLP over flattened `[z, x]` with the given hidden width (2 hidden
    /// layers). `dim` is the per-tensor element count.
    pub fn new_mlp(dim: usize, hidden: usize, sched: VpSchedule, seed: u64) -> Self {
        let topology = Topology::Mlp {
            in_dim: 2 * dim,
            hidden,
            out_dim: dim,
        };
        Self {
            net: build_net(&topology),
            topology,
            model_channels: 1,
            sched,
        }
        .init(seed)
    }

    /// Convolutional encoder-decoder over `[z ‖ x]` in model-channel space.
    pub fn new_conv(model_channels: usize, base: usize, sched: VpSchedule, seed: u64) -> Self {
        let topology = Topology::ConvUnet {
            in_ch: 2 * model_channels,
            base,
            out_ch: model_channels,
        };
        Self {
            net: build_net(&topology),
            topology,
            model_channels,
            sched,
        }
        .init(seed)
    }

    fn init(mut self, seed: u64) -> Self {
        let mut rng = crate::rng::stream(seed);
        self.net = builder_for(&self.topology).build(&mut rng);
        self
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params()
    }

    pub fn params(&self) -> &[f64] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    /// Sinusoidal features of log-SNR(t), the schedule-aware time code.
    pub fn time_features(&self, t: f64) -> Vec<f64> {
        let log_snr = self.sched.log_snr_clamped(t);
        let mut feats = Vec::with_capacity(TIME_EMBED_DIM);
        for i in 0..TIME_EMBED_DIM / 2 {
            let omega = 0.5f64.powi(i as i32);
            feats.push((omega * log_snr).sin());
            feats.push((omega * log_snr).cos());
        }
        feats
    }

    fn assemble_input(&self, z_t: &TensorF, x: &TensorF) -> Result<TensorF> {
        z_t.check_same_shape(x, "denoiser z/x")?;
        match self.topology {
            Topology::Mlp { in_dim, .. } => {
                if 2 * z_t.len() != in_dim {
                    return Err(BridgeError::Argument(format!(
                        "mlp expects {} elements per tensor, got {}",
                        in_dim / 2,
                        z_t.len()
                    )));
                }
                let mut data = Vec::with_capacity(in_dim);
                data.extend_from_slice(z_t.data());
                data.extend_from_slice(x.data());
                TensorF::from_vec(&[in_dim], data)
            }
            Topology::ConvUnet { in_ch, .. } => {
                let shape = z_t.shape();
                if shape.len() != 3 || shape[0] != in_ch / 2 {
                    return Err(BridgeError::Argument(format!(
                        "conv denoiser expects [{} , H, W], got {:?}",
                        in_ch / 2,
                        shape
                    )));
                }
                if shape[1] % 8 != 0 || shape[2] % 8 != 0 {
                    return Err(BridgeError::Argument(format!(
                        "conv denoiser needs spatial extent divisible by 8, got {:?}",
                        shape
                    )));
                }
                let mut data = Vec::with_capacity(2 * z_t.len());
                data.extend_from_slice(z_t.data());
                data.extend_from_slice(x.data());
                TensorF::from_vec(&[in_ch, shape[1], shape[2]], data)
            }
        }
    }

    /// ẑ₀ = D(z_t, t, x). Output has the shape of z_t.
    pub fn forward(&self, z_t: &TensorF, t: f64, x: &TensorF) -> Result<TensorF> {
        Ok(self.forward_traced(z_t, t, x)?.0)
    }

    /// Forward pass that also returns the activation trace for `backward`.
    pub fn forward_traced(&self, z_t: &TensorF, t: f64, x: &TensorF) -> Result<(TensorF, Trace)> {
        let input = self.assemble_input(z_t, x)?;
        let feats = self.time_features(t);
        let (out, trace) = self.net.forward(&input, &feats)?;
        let out = match self.topology {
            Topology::Mlp { .. } => out.reshaped(z_t.shape())?,
            Topology::ConvUnet { .. } => out,
        };
        if !out.all_finite() {
            return Err(BridgeError::Divergence {
                step: 0,
                what: "denoiser forward produced non-finite values".into(),
            });
        }
        Ok((out, trace))
    }

    /// Exact reverse-mode gradient of a scalar loss with respect to the
    /// parameters, given dLoss/dOutput and the saved activations.
    pub fn backward(&self, trace: &Trace, loss_grad_at_output: &TensorF) -> Result<Vec<f64>> {
        let flat = match self.topology {
            Topology::Mlp { out_dim, .. } => loss_grad_at_output.reshaped(&[out_dim])?,
            Topology::ConvUnet { .. } => loss_grad_at_output.clone(),
        };
        Ok(self.net.backward(trace, &flat, &[])?.params)
    }

    /// Byte-stable text checkpoint: topology, schedule, and the flat
    /// parameter vector (IEEE-754 bits in hex).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("bridgelab-checkpoint v1\n");
        match self.topology {
            Topology::Mlp { in_dim, hidden, out_dim } => {
                let _ = writeln!(out, "topology mlp {in_dim} {hidden} {out_dim}");
            }
            Topology::ConvUnet { in_ch, base, out_ch } => {
                let _ = writeln!(out, "topology conv-unet {in_ch} {base} {out_ch}");
            }
        }
        let _ = writeln!(out, "model-channels {}", self.model_channels);
        let _ = writeln!(
            out,
            "schedule {:016x} {:016x} {:016x} {:016x}",
            self.sched.beta_d.to_bits(),
            self.sched.beta_min.to_bits(),
            self.sched.t_max.to_bits(),
            self.sched.t_min.to_bits()
        );
        let _ = writeln!(out, "params {}", self.net.n_params());
        for chunk in self.net.params().chunks(8) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut offset = 0usize;
        let mut lines = text.lines();
        let mut next = |offset: &mut usize| -> Result<&str> {
            let line = lines.next().ok_or(BridgeError::Parse {
                offset: *offset,
                what: "unexpected end of checkpoint".into(),
            })?;
            *offset += line.len() + 1;
            Ok(line)
        };
        let header = next(&mut offset)?;
        if header != "bridgelab-checkpoint v1" {
            return Err(BridgeError::Parse {
                offset: 0,
                what: format!("unknown checkpoint header {header:?}"),
            });
        }
        let topo_line = next(&mut offset)?.to_string();
        let topo_parts: Vec<&str> = topo_line.split_whitespace().collect();
        let parse_usize = |s: &str, offset: usize| -> Result<usize> {
            s.parse().map_err(|_| BridgeError::Parse {
                offset,
                what: format!("expected integer, got {s:?}"),
            })
        };
        let topology = match topo_parts.as_slice() {
            ["topology", "mlp", a, b, c] => Topology::Mlp {
                in_dim: parse_usize(a, offset)?,
                hidden: parse_usize(b, offset)?,
                out_dim: parse_usize(c, offset)?,
            },
            ["topology", "conv-unet", a, b, c] => Topology::ConvUnet {
                in_ch: parse_usize(a, offset)?,
                base: parse_usize(b, offset)?,
                out_ch: parse_usize(c, offset)?,
            },
            _ => {
                return Err(BridgeError::Parse {
                    offset,
                    what: format!("bad topology line {topo_line:?}"),
                })
            }
        };
        let mc_line = next(&mut offset)?.to_string();
        let model_channels = match mc_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["model-channels", n] => parse_usize(n, offset)?,
            _ => {
                return Err(BridgeError::Parse {
                    offset,
                    what: format!("bad model-channels line {mc_line:?}"),
                })
            }
        };
        let sched_line = next(&mut offset)?.to_string();
        let parse_f64 = |s: &str, offset: usize| -> Result<f64> {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|_| BridgeError::Parse {
                    offset,
                    what: format!("expected hex float bits, got {s:?}"),
                })
        };
        let sched = match sched_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["schedule", bd, bm, tmax, tmin] => VpSchedule::with_horizon(
                parse_f64(bd, offset)?,
                parse_f64(bm, offset)?,
                parse_f64(tmax, offset)?,
                parse_f64(tmin, offset)?,
            )?,
            _ => {
                return Err(BridgeError::Parse {
                    offset,
                    what: format!("bad schedule line {sched_line:?}"),
                })
            }
        };
        let count_line = next(&mut offset)?.to_string();
        let n_params = match count_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["params", n] => parse_usize(n, offset)?,
            _ => {
                return Err(BridgeError::Parse {
                    offset,
                    what: format!("bad params line {count_line:?}"),
                })
            }
        };
        let mut params = Vec::with_capacity(n_params);
        while params.len() < n_params {
            let line = next(&mut offset)?.to_string();
            for tok in line.split_whitespace() {
                params.push(parse_f64(tok, offset)?);
            }
        }
        if params.len() != n_params {
            return Err(BridgeError::Parse {
                offset,
                what: format!("expected {n_params} parameters, found {}", params.len()),
            });
        }
        let mut net = build_net(&topology);
        net.set_params(params)?;
        Ok(Self {
            topology,
            net,
            model_channels,
            sched,
        })
    }
}

fn builder_for(topology: &Topology) -> NetBuilder {
    let mut b = NetBuilder::new();
    match *topology {
        Topology::Mlp { in_dim, hidden, out_dim } => {
            let n1 = b.add(OpKind::Linear { in_dim, out_dim: hidden }, 0);
            let n2 = b.add(
                OpKind::TimeEmbed { features: TIME_EMBED_DIM, channels: hidden },
                n1,
            );
            let n3 = b.add(OpKind::Silu, n2);
            let n4 = b.add(OpKind::Linear { in_dim: hidden, out_dim: hidden }, n3);
            let n5 = b.add(OpKind::Silu, n4);
            b.add_zero_init(OpKind::Linear { in_dim: hidden, out_dim }, n5);
        }
        Topology::ConvUnet { in_ch, base, out_ch } => {
            let w2 = base * 2;
            let w4 = base * 4;
            let stem = b.add(OpKind::Conv3x3 { in_ch, out_ch: base, stride: 1 }, 0);
            let temb = b.add(
                OpKind::TimeEmbed { features: TIME_EMBED_DIM, channels: base },
                stem,
            );
            let a0 = b.add(OpKind::Silu, temb);
            let d1 = b.add(OpKind::Conv3x3 { in_ch: base, out_ch: w2, stride: 2 }, a0);
            let a1 = b.add(OpKind::Silu, d1);
            let d2 = b.add(OpKind::Conv3x3 { in_ch: w2, out_ch: w4, stride: 2 }, a1);
            let a2 = b.add(OpKind::Silu, d2);
            let d3 = b.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w4, stride: 2 }, a2);
            let a3 = b.add(OpKind::Silu, d3);
            let u3 = b.add(OpKind::Upsample2x, a3);
            let c3 = b.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w4, stride: 1 }, u3);
            let s3 = b.add(OpKind::AddFrom { node: a2 }, c3);
            let r3 = b.add(OpKind::Silu, s3);
            let u2 = b.add(OpKind::Upsample2x, r3);
            let c2 = b.add(OpKind::Conv3x3 { in_ch: w4, out_ch: w2, stride: 1 }, u2);
            let s2 = b.add(OpKind::AddFrom { node: a1 }, c2);
            let r2 = b.add(OpKind::Silu, s2);
            let u1 = b.add(OpKind::Upsample2x, r2);
            let c1 = b.add(OpKind::Conv3x3 { in_ch: w2, out_ch: base, stride: 1 }, u1);
            let s1 = b.add(OpKind::AddFrom { node: a0 }, c1);
            let r1 = b.add(OpKind::Silu, s1);
            b.add_zero_init(OpKind::Conv3x3 { in_ch: base, out_ch, stride: 1 }, r1);
        }
    }
    b
}

fn build_net(topology: &Topology) -> Net {
    let mut rng = crate::rng::stream(0);
    builder_for(topology).build(&mut rng)
}

/// Expand a single-channel tensor to k identical channels.
pub fn channel_repeat(img: &TensorF, k: usize) -> Result<TensorF> {
    if k == 0 {
        return Err(BridgeError::Argument("channel repetition count must be >= 1".into()));
    }
    let shape = img.shape();
    match shape {
        [1, h, w] => {
            let mut data = Vec::with_capacity(k * h * w);
            for _ in 0..k {
                data.extend_from_slice(img.data());
            }
            TensorF::from_vec(&[k, *h, *w], data)
        }
        [1] => {
            let v = img.data()[0];
            TensorF::from_vec(&[k], vec![v; k])
        }
        _ => Err(BridgeError::Argument(format!(
            "channel_repeat expects a single-channel tensor, got {shape:?}"
        ))),
    }
}

/// Collapse model channels back to a single band by per-pixel channel mean.
pub fn channel_mean(img: &TensorF) -> Result<TensorF> {
    let shape = img.shape();
    match shape {
        [c, h, w] => {
            let mut data = vec![0.0; h * w];
            for ch in 0..*c {
                for (i, v) in data.iter_mut().enumerate() {
                    *v += img.data()[ch * h * w + i];
                }
            }
            for v in &mut data {
                *v /= *c as f64;
            }
            TensorF::from_vec(&[1, *h, *w], data)
        }
        _ => Err(BridgeError::Argument(format!(
            "channel_mean expects [C, H, W], got {shape:?}"
        ))),
    }
}

/// Anything the sampler can query for a clean-target prediction. `Sync`
/// because sampling fans out read-only across workers.
pub trait Denoiser: Sync {
    fn predict(&self, z_t: &TensorF, t: f64, x: &TensorF, sched: &VpSchedule) -> Result<TensorF>;
}

impl Denoiser for DenoiserModel {
    /// Time conditioning uses the schedule stored in the model (the one it
    /// was trained against); the sampler passes the same schedule.
    fn predict(&self, z_t: &TensorF, t: f64, x: &TensorF, _sched: &VpSchedule) -> Result<TensorF> {
        self.forward(z_t, t, x)
    }
}

/// Test stub that always predicts a fixed tensor; stands in for a
/// ground-truth predictor when the target is known.
#[derive(Debug, Clone)]
pub struct ConstantDenoiser {
    pub output: TensorF,
}

impl Denoiser for ConstantDenoiser {
    fn predict(&self, z_t: &TensorF, _t: f64, _x: &TensorF, _sched: &VpSchedule) -> Result<TensorF> {
        z_t.check_same_shape(&self.output, "constant denoiser")?;
        Ok(self.output.clone())
    }
}

/// Exact conditional mean E[y | z_t, x] for the jointly Gaussian pair
/// model with correlation r and unit marginals; the oracle every learned
/// denoiser is measured against.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticGaussianDenoiser {
    pub r: f64,
}

impl AnalyticGaussianDenoiser {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.abs() < 1.0) {
            return Err(BridgeError::Argument(format!("need |r| < 1, got {r}")));
        }
        Ok(Self { r })
    }

    /// E[y | z_t, x] = r·x + k·(z_t − a·x − b·r·x) with
    /// k = b(1−r²) / (b²(1−r²) + c²).
    pub fn denoise(&self, z_t: f64, t: f64, x: f64, sched: &VpSchedule) -> Result<f64> {
        let co = sched.bridge_coeffs(t)?;
        let one_minus_r2 = 1.0 - self.r * self.r;
        let denom = co.b * co.b * one_minus_r2 + co.c * co.c;
        if denom == 0.0 {
            // endpoints: t = 0 reveals the target, t = T has no bridge info
            return Ok(if co.b == 1.0 { z_t } else { self.r * x });
        }
        let gain = co.b * one_minus_r2 / denom;
        Ok(self.r * x + gain * (z_t - co.a * x - co.b * self.r * x))
    }

    /// Elementwise application over paired (z, x) entries.
    pub fn denoise_tensor(&self, z_t: &TensorF, t: f64, x: &TensorF, sched: &VpSchedule) -> Result<TensorF> {
        z_t.check_same_shape(x, "analytic denoiser z/x")?;
        let mut out = TensorF::zeros(z_t.shape());
        for (i, (&zv, &xv)) in z_t.data().iter().zip(x.data()).enumerate() {
            out.data_mut()[i] = self.denoise(zv, t, xv, sched)?;
        }
        Ok(out)
    }

    /// Posterior variance Var[y | z_t, x] = (1−r²)·c² / (b²(1−r²) + c²);
    /// the pointwise minimum mean-squared error any predictor can reach.
    pub fn posterior_variance(&self, t: f64, sched: &VpSchedule) -> Result<f64> {
        let co = sched.bridge_coeffs(t)?;
        let one_minus_r2 = 1.0 - self.r * self.r;
        let denom = co.b * co.b * one_minus_r2 + co.c * co.c;
        if denom == 0.0 {
            return Ok(if co.b == 1.0 { 0.0 } else { one_minus_r2 });
        }
        Ok(one_minus_r2 * co.c * co.c / denom)
    }
}

impl Denoiser for AnalyticGaussianDenoiser {
    fn predict(&self, z_t: &TensorF, t: f64, x: &TensorF, sched: &VpSchedule) -> Result<TensorF> {
        self.denoise_tensor(z_t, t, x, sched)
    }
}
