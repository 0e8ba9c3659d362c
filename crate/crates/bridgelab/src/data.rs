//! Synthetic paired datasets, the sliding-window crop rule, and portable
//! graymap/pixmap I/O.
//!
//! The toy translation tasks caricature cross-modal aerial pairs:
//! procedurally placed shapes render to a smooth "optical" target while
//! the "SAR-like" source gets edge emphasis, single-look exponential
//! speckle, and log compression. Geometry is shared per pair, so spatial
//! alignment holds by construction.

use crate::error::{BridgeError, Result};
use crate::tensor::TensorF;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use std::fmt::Write as _;
use std::path::Path;

/// Translation task tags. `Gaussian` is the scalar verification task; the
/// four image tags mirror the challenge tracks at toy scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskTag {
    Gaussian,
    Sar2Eo,
    Sar2Rgb,
    Sar2Ir,
    Rgb2Ir,
}

impl TaskTag {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "sar2eo" => Ok(Self::Sar2Eo),
            "sar2rgb" => Ok(Self::Sar2Rgb),
            "sar2ir" => Ok(Self::Sar2Ir),
            "rgb2ir" => Ok(Self::Rgb2Ir),
            _ => Err(BridgeError::Argument(format!(
                "unknown task {s:?} (expected gaussian|sar2eo|sar2rgb|sar2ir|rgb2ir)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Sar2Eo => "sar2eo",
            Self::Sar2Rgb => "sar2rgb",
            Self::Sar2Ir => "sar2ir",
            Self::Rgb2Ir => "rgb2ir",
        }
    }

    pub fn src_channels(&self) -> usize {
        match self {
            Self::Gaussian | Self::Sar2Eo | Self::Sar2Rgb | Self::Sar2Ir => 1,
            Self::Rgb2Ir => 3,
        }
    }

    pub fn tgt_channels(&self) -> usize {
        match self {
            Self::Gaussian | Self::Sar2Eo | Self::Sar2Ir | Self::Rgb2Ir => 1,
            Self::Sar2Rgb => 3,
        }
    }
}

/// Aligned source/target pairs.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    pub sources: Vec<TensorF>,
    pub targets: Vec<TensorF>,
    pub src_channels: usize,
    pub tgt_channels: usize,
    pub resolution: usize,
    pub seed: u64,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Stable split by index parity: even indices train, odd indices eval.
    pub fn split_train_eval(&self) -> (PairedDataset, PairedDataset) {
        let pick = |parity: usize| PairedDataset {
            sources: self
                .sources
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == parity)
                .map(|(_, t)| t.clone())
                .collect(),
            targets: self
                .targets
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == parity)
                .map(|(_, t)| t.clone())
                .collect(),
            src_channels: self.src_channels,
            tgt_channels: self.tgt_channels,
            resolution: self.resolution,
            seed: self.seed,
        };
        (pick(0), pick(1))
    }
}

/// Jointly Gaussian scalar pairs with unit marginals and correlation r.
pub fn make_gaussian_pairs(r: f64, n: usize, seed: u64) -> Result<PairedDataset> {
    if !(r.abs() < 1.0) {
        return Err(BridgeError::Argument(format!(
            "correlation must satisfy |r| < 1, got {r}"
        )));
    }
    let mut rng = crate::rng::stream(seed);
    let mut sources = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let tail = (1.0 - r * r).sqrt();
    for _ in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        let zeta: f64 = rng.sample(StandardNormal);
        sources.push(TensorF::scalar(x));
        targets.push(TensorF::scalar(r * x + tail * zeta));
    }
    Ok(PairedDataset {
        sources,
        targets,
        src_channels: 1,
        tgt_channels: 1,
        resolution: 1,
        seed,
    })
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disk { cx: f64, cy: f64, radius: f64 },
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
}

impl Shape {
    fn contains(&self, y: usize, x: usize) -> bool {
        match *self {
            Shape::Disk { cx, cy, radius } => {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                dx * dx + dy * dy <= radius * radius
            }
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
        }
    }
}

struct Scene {
    /// Per-pixel shape intensity; background where mask is false.
    intensity: Vec<f64>,
    mask: Vec<bool>,
    res: usize,
}

const SCENE_BACKGROUND: f64 = 0.05;

fn make_scene<R: Rng>(rng: &mut R, res: usize) -> Scene {
    let n_shapes = rng.gen_range(2..=4);
    let mut shapes = Vec::with_capacity(n_shapes);
    for _ in 0..n_shapes {
        let level: f64 = rng.gen_range(0.55..0.95);
        let shape = if rng.gen_bool(0.5) {
            let radius = rng.gen_range(res as f64 * 0.2..res as f64 * 0.32);
            Shape::Disk {
                cx: rng.gen_range(radius..res as f64 - radius),
                cy: rng.gen_range(radius..res as f64 - radius),
                radius,
            }
        } else {
            let w = rng.gen_range(res / 3..res / 2);
            let h = rng.gen_range(res / 3..res / 2);
            let x0 = rng.gen_range(0..res - w);
            let y0 = rng.gen_range(0..res - h);
            Shape::Rect {
                x0,
                y0,
                x1: x0 + w,
                y1: y0 + h,
            }
        };
        shapes.push((shape, level));
    }
    let mut intensity = vec![SCENE_BACKGROUND; res * res];
    let mut mask = vec![false; res * res];
    for y in 0..res {
        for x in 0..res {
            for (shape, level) in &shapes {
                if shape.contains(y, x) {
                    intensity[y * res + x] = *level;
                    mask[y * res + x] = true;
                }
            }
        }
    }
    Scene {
        intensity,
        mask,
        res,
    }
}

/// 3×3 box blur per channel with edge clamping.
pub fn box_blur(img: &TensorF) -> Result<TensorF> {
    let shape = img.shape();
    let (c, h, w) = match shape {
        [c, h, w] => (*c, *h, *w),
        _ => {
            return Err(BridgeError::Argument(format!(
                "box_blur expects [C, H, W], got {shape:?}"
            )))
        }
    };
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                let mut cnt = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let yy = y as i64 + dy;
                        let xx = x as i64 + dx;
                        if yy >= 0 && yy < h as i64 && xx >= 0 && xx < w as i64 {
                            acc += img.data()[(ch * h + yy as usize) * w + xx as usize];
                            cnt += 1.0;
                        }
                    }
                }
                out[(ch * h + y) * w + x] = acc / cnt;
            }
        }
    }
    TensorF::from_vec(&[c, h, w], out)
}

fn sobel_magnitude(field: &[f64], res: usize) -> Vec<f64> {
    let mut out = vec![0.0; res * res];
    let at = |y: i64, x: i64| -> f64 {
        let y = y.clamp(0, res as i64 - 1) as usize;
        let x = x.clamp(0, res as i64 - 1) as usize;
        field[y * res + x]
    };
    for y in 0..res as i64 {
        for x in 0..res as i64 {
            let gx = at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)
                - at(y - 1, x - 1)
                - 2.0 * at(y, x - 1)
                - at(y + 1, x - 1);
            let gy = at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)
                - at(y - 1, x - 1)
                - 2.0 * at(y - 1, x)
                - at(y - 1, x + 1);
            out[(y as usize) * res + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Render the SAR-like view: edge emphasis, multiplicative exponential
/// speckle, log compression to [0, 1].
fn render_sar<R: Rng>(scene: &Scene, rng: &mut R) -> TensorF {
    let res = scene.res;
    let edges = sobel_magnitude(&scene.intensity, res);
    let gamma: f64 = 20.0;
    let norm = (1.0 + gamma).ln();
    let mut data = vec![0.0; res * res];
    for (i, v) in data.iter_mut().enumerate() {
        let base = (scene.intensity[i] + 0.25 * edges[i]).clamp(0.0, 1.2);
        let speckle: f64 = rng.sample(Exp1);
        let raw = base * speckle;
        *v = ((1.0 + gamma * raw).ln() / norm).clamp(0.0, 1.0);
    }
    TensorF::from_vec(&[1, res, res], data).expect("shape is consistent")
}

/// Smooth single-band optical rendering; `invert` flips the palette for
/// the IR-like look.
fn render_optical(scene: &Scene, invert: bool) -> TensorF {
    let res = scene.res;
    let mut data = vec![0.0; res * res];
    for (i, out) in data.iter_mut().enumerate() {
        let v = scene.intensity[i];
        *out = if invert {
            if scene.mask[i] {
                (1.05 - v).clamp(0.0, 1.0)
            } else {
                0.35
            }
        } else {
            v
        };
    }
    let img = TensorF::from_vec(&[1, res, res], data).expect("shape is consistent");
    box_blur(&img).expect("blur of valid image")
}

/// Smooth 3-band rendering with per-scene hue weights.
fn render_rgb<R: Rng>(scene: &Scene, rng: &mut R) -> TensorF {
    let res = scene.res;
    let weights = [
        rng.gen_range(0.6..1.0),
        rng.gen_range(0.6..1.0),
        rng.gen_range(0.6..1.0),
    ];
    let mut data = vec![0.0; 3 * res * res];
    for ch in 0..3 {
        for i in 0..res * res {
            let v = scene.intensity[i];
            data[ch * res * res + i] = if scene.mask[i] {
                (v * weights[ch]).clamp(0.0, 1.0)
            } else {
                SCENE_BACKGROUND * (1.0 + 0.4 * ch as f64)
            };
        }
    }
    let img = TensorF::from_vec(&[3, res, res], data).expect("shape is consistent");
    box_blur(&img).expect("blur of valid image")
}

/// Procedurally generated paired scenes for one of the image tasks.
pub fn make_toy_translation(
    tag: TaskTag,
    n: usize,
    resolution: usize,
    seed: u64,
) -> Result<PairedDataset> {
    if tag == TaskTag::Gaussian {
        return Err(BridgeError::Argument(
            "make_toy_translation covers image tasks; use make_gaussian_pairs".into(),
        ));
    }
    if ![16, 32, 64].contains(&resolution) {
        return Err(BridgeError::Argument(format!(
            "resolution must be one of 16, 32, 64, got {resolution}"
        )));
    }
    let mut rng = crate::rng::stream(seed);
    let mut sources = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let scene = make_scene(&mut rng, resolution);
        let (src, tgt) = match tag {
            TaskTag::Sar2Eo => (render_sar(&scene, &mut rng), render_optical(&scene, false)),
            TaskTag::Sar2Ir => (render_sar(&scene, &mut rng), render_optical(&scene, true)),
            TaskTag::Sar2Rgb => (render_sar(&scene, &mut rng), render_rgb(&scene, &mut rng)),
            TaskTag::Rgb2Ir => (render_rgb(&scene, &mut rng), render_optical(&scene, true)),
            TaskTag::Gaussian => unreachable!(),
        };
        sources.push(src);
        targets.push(tgt);
    }
    Ok(PairedDataset {
        sources,
        targets,
        src_channels: tag.src_channels(),
        tgt_channels: tag.tgt_channels(),
        resolution,
        seed,
    })
}

/// Sliding-window crops at offsets {0, s, 2s, …} per axis while the
/// window fits; row-major order over (y, x) offsets.
pub fn crop_augment(img: &TensorF, window: usize, stride: usize) -> Result<Vec<TensorF>> {
    let shape = img.shape();
    let (c, h, w) = match shape {
        [c, h, w] => (*c, *h, *w),
        _ => {
            return Err(BridgeError::Argument(format!(
                "crop_augment expects [C, H, W], got {shape:?}"
            )))
        }
    };
    if window > h || window > w {
        return Err(BridgeError::Argument(format!(
            "window {window} exceeds image extent {h}x{w}"
        )));
    }
    if stride == 0 {
        return Err(BridgeError::Argument("stride must be >= 1".into()));
    }
    let mut crops = Vec::new();
    let mut oy = 0;
    while oy + window <= h {
        let mut ox = 0;
        while ox + window <= w {
            let mut data = Vec::with_capacity(c * window * window);
            for ch in 0..c {
                for y in oy..oy + window {
                    for x in ox..ox + window {
                        data.push(img.data()[(ch * h + y) * w + x]);
                    }
                }
            }
            crops.push(TensorF::from_vec(&[c, window, window], data)?);
            ox += stride;
        }
        oy += stride;
    }
    Ok(crops)
}

// ---------------------------------------------------------------------------
// Portable graymap/pixmap I/O (binary P5/P6, 8-bit, maxval 255)
// ---------------------------------------------------------------------------

/// Write a `[1|3, H, W]` image in [0, 1] as binary PGM/PPM.
pub fn write_image(path: &Path, img: &TensorF) -> Result<()> {
    let shape = img.shape();
    let (c, h, w) = match shape {
        [c @ (1 | 3), h, w] => (*c, *h, *w),
        _ => {
            return Err(BridgeError::Argument(format!(
                "write_image expects [1|3, H, W], got {shape:?}"
            )))
        }
    };
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut bytes = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    // interleave channels per pixel for P6
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let v = img.data()[(ch * h + y) * w + x].clamp(0.0, 1.0);
                bytes.push((v * 255.0).round() as u8);
            }
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<(&'a [u8], usize)> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(BridgeError::Parse {
                offset: start,
                what: "unexpected end of header".into(),
            });
        }
        Ok((&self.bytes[start..self.pos], start))
    }

    fn number(&mut self) -> Result<(usize, usize)> {
        let (tok, at) = self.token()?;
        let s = std::str::from_utf8(tok).map_err(|_| BridgeError::Parse {
            offset: at,
            what: "non-ascii header token".into(),
        })?;
        let v = s.parse().map_err(|_| BridgeError::Parse {
            offset: at,
            what: format!("expected integer, got {s:?}"),
        })?;
        Ok((v, at))
    }
}

/// Read a binary PGM (1 channel) or PPM (3 channels) into [0, 1].
pub fn read_image(path: &Path) -> Result<TensorF> {
    let bytes = std::fs::read(path)?;
    decode_image(&bytes)
}

/// Decode from raw bytes; parse errors carry the byte offset.
pub fn decode_image(bytes: &[u8]) -> Result<TensorF> {
    let mut cur = Cursor { bytes, pos: 0 };
    let (magic, at) = cur.token()?;
    let channels = match magic {
        b"P5" => 1usize,
        b"P6" => 3usize,
        other => {
            return Err(BridgeError::Parse {
                offset: at,
                what: format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            })
        }
    };
    let (w, _) = cur.number()?;
    let (h, _) = cur.number()?;
    let (maxval, at_max) = cur.number()?;
    if maxval != 255 {
        return Err(BridgeError::Parse {
            offset: at_max,
            what: format!("only maxval 255 is supported, got {maxval}"),
        });
    }
    if w == 0 || h == 0 {
        return Err(BridgeError::Parse {
            offset: at_max,
            what: format!("degenerate dimensions {w}x{h}"),
        });
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(BridgeError::Parse {
            offset: cur.pos,
            what: "missing separator before raster data".into(),
        });
    }
    cur.pos += 1;
    let need = w * h * channels;
    if bytes.len() - cur.pos < need {
        return Err(BridgeError::Parse {
            offset: bytes.len(),
            what: format!(
                "raster truncated: need {need} bytes, found {}",
                bytes.len() - cur.pos
            ),
        });
    }
    let raster = &bytes[cur.pos..cur.pos + need];
    let mut data = vec![0.0; need];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..channels {
                data[(ch * h + y) * w + x] = raster[(y * w + x) * channels + ch] as f64 / 255.0;
            }
        }
    }
    TensorF::from_vec(&[channels, h, w], data)
}

// ---------------------------------------------------------------------------
// Dataset directory layout: src/NNNN.pgm|ppm, tgt/NNNN.pgm|ppm, manifest.txt
// ---------------------------------------------------------------------------

fn ext_for(channels: usize) -> &'static str {
    if channels == 3 {
        "ppm"
    } else {
        "pgm"
    }
}

/// Write every pair plus a tab-separated manifest of relative paths.
pub fn save_dataset(ds: &PairedDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("src"))?;
    std::fs::create_dir_all(dir.join("tgt"))?;
    let mut manifest = String::new();
    for (i, (src, tgt)) in ds.sources.iter().zip(&ds.targets).enumerate() {
        let src_rel = format!("src/{i:04}.{}", ext_for(ds.src_channels));
        let tgt_rel = format!("tgt/{i:04}.{}", ext_for(ds.tgt_channels));
        write_image(&dir.join(&src_rel), src)?;
        write_image(&dir.join(&tgt_rel), tgt)?;
        let _ = writeln!(manifest, "{src_rel}\t{tgt_rel}");
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// Load a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<PairedDataset> {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))?;
    let mut sources = Vec::new();
    let mut targets = Vec::new();
    for (lineno, line) in manifest.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (src_rel, tgt_rel) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(BridgeError::Parse {
                    offset: lineno,
                    what: format!("manifest line {} is not tab-separated", lineno + 1),
                })
            }
        };
        sources.push(read_image(&dir.join(src_rel))?);
        targets.push(read_image(&dir.join(tgt_rel))?);
    }
    if sources.is_empty() {
        return Err(BridgeError::Argument(format!(
            "dataset at {} is empty",
            dir.display()
        )));
    }
    let src_channels = sources[0].channels();
    let tgt_channels = targets[0].channels();
    let resolution = match sources[0].shape() {
        [_, h, _] => *h,
        _ => 1,
    };
    Ok(PairedDataset {
        sources,
        targets,
        src_channels,
        tgt_channels,
        resolution,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_pairs_unit_marginals_and_correlation() {
        let n = 100_000;
        let ds = make_gaussian_pairs(0.8, n, 42).unwrap();
        let xs: Vec<f64> = ds.sources.iter().map(|t| t.data()[0]).collect();
        let ys: Vec<f64> = ds.targets.iter().map(|t| t.data()[0]).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mx = mean(&xs);
        let my = mean(&ys);
        let mut sxx = 0.0;
        let mut syy = 0.0;
        let mut sxy = 0.0;
        for i in 0..n {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!((0.79..=0.81).contains(&r), "sample r = {r}");
    }

    #[test]
    fn gaussian_pairs_zero_correlation() {
        let ds = make_gaussian_pairs(0.0, 50_000, 3).unwrap();
        let mut sxy = 0.0;
        for (s, t) in ds.sources.iter().zip(&ds.targets) {
            sxy += s.data()[0] * t.data()[0];
        }
        let cov = sxy / ds.len() as f64;
        assert!(cov.abs() < 3.0 / (ds.len() as f64).sqrt(), "cov = {cov}");
    }

    #[test]
    fn gaussian_pairs_rejects_degenerate_correlation() {
        assert!(make_gaussian_pairs(1.0, 10, 0).is_err());
        assert!(make_gaussian_pairs(-1.0, 10, 0).is_err());
    }

    #[test]
    fn toy_translation_shape_contract() {
        let ds = make_toy_translation(TaskTag::Sar2Rgb, 4, 32, 7).unwrap();
        assert_eq!(ds.len(), 4);
        for s in &ds.sources {
            assert_eq!(s.shape(), &[1, 32, 32]);
        }
        for t in &ds.targets {
            assert_eq!(t.shape(), &[3, 32, 32]);
        }
    }

    #[test]
    fn toy_translation_deterministic_from_seed() {
        let a = make_toy_translation(TaskTag::Sar2Ir, 3, 16, 99).unwrap();
        let b = make_toy_translation(TaskTag::Sar2Ir, 3, 16, 99).unwrap();
        for i in 0..3 {
            assert_eq!(a.sources[i], b.sources[i]);
            assert_eq!(a.targets[i], b.targets[i]);
        }
    }

    #[test]
    fn toy_translation_rejects_bad_inputs() {
        assert!(make_toy_translation(TaskTag::Sar2Eo, 2, 24, 0).is_err());
        assert!(make_toy_translation(TaskTag::Gaussian, 2, 16, 0).is_err());
    }

    /// Mask recovery used by the alignment checks: blur, then threshold at
    /// the midpoint between the 10th and 90th intensity percentiles.
    fn recover_mask(img: &TensorF) -> Vec<bool> {
        let luma = match img.shape() {
            [1, _, _] => img.clone(),
            [_c, _, _] => crate::denoiser::channel_mean(img).unwrap(),
            _ => panic!("unexpected shape"),
        };
        let blurred = box_blur(&box_blur(&box_blur(&luma).unwrap()).unwrap()).unwrap();
        let mut sorted: Vec<f64> = blurred.data().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = sorted[sorted.len() / 10];
        let hi = sorted[sorted.len() * 9 / 10];
        let thr = 0.5 * (lo + hi);
        blurred.data().iter().map(|&v| v > thr).collect()
    }

    fn iou(a: &[bool], b: &[bool]) -> f64 {
        let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
        let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    fn mask_correlation(a: &[bool], b: &[bool]) -> f64 {
        let n = a.len() as f64;
        let pa = a.iter().filter(|v| **v).count() as f64 / n;
        let pb = b.iter().filter(|v| **v).count() as f64 / n;
        let pab = a.iter().zip(b).filter(|(x, y)| **x && **y).count() as f64 / n;
        let denom = (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt();
        if denom == 0.0 {
            return 1.0;
        }
        (pab - pa * pb) / denom
    }

    #[test]
    fn speckle_preserves_scene_geometry() {
        // target-intensity deviation defines the reference mask; the
        // blurred, thresholded SAR source must agree with it
        let ds = make_toy_translation(TaskTag::Sar2Eo, 12, 64, 11).unwrap();
        let mut iou_acc = 0.0;
        let mut corr_acc = 0.0;
        for (src, tgt) in ds.sources.iter().zip(&ds.targets) {
            let src_mask = recover_mask(src);
            let tgt_mask = recover_mask(tgt);
            iou_acc += iou(&src_mask, &tgt_mask);
            corr_acc += mask_correlation(&src_mask, &tgt_mask);
        }
        let mean_iou = iou_acc / ds.len() as f64;
        let mean_corr = corr_acc / ds.len() as f64;
        assert!(mean_iou > 0.8, "mean IoU = {mean_iou}");
        assert!(mean_corr > 0.9, "mean mask correlation = {mean_corr}");
    }

    #[test]
    fn crop_count_matches_enumeration_oracle() {
        let img = TensorF::from_vec(&[1, 64, 64], (0..4096).map(|i| (i % 256) as f64 / 255.0).collect())
            .unwrap();
        // oracle: enumerate all valid offsets directly
        let mut expected = 0;
        let (w, s) = (32usize, 16usize);
        let mut oy = 0;
        while oy + w <= 64 {
            let mut ox = 0;
            while ox + w <= 64 {
                expected += 1;
                ox += s;
            }
            oy += s;
        }
        assert_eq!(expected, 9);
        let crops = crop_augment(&img, w, s).unwrap();
        assert_eq!(crops.len(), expected);
        // formula from the contract
        let formula = ((64 - w) / s + 1) * ((64 - w) / s + 1);
        assert_eq!(crops.len(), formula);
    }

    #[test]
    fn crop_full_window_is_identity() {
        let img = TensorF::from_vec(&[1, 8, 8], (0..64).map(|i| i as f64 / 63.0).collect()).unwrap();
        let crops = crop_augment(&img, 8, 4).unwrap();
        assert_eq!(crops.len(), 1);
        assert_eq!(crops[0], img);
    }

    #[test]
    fn crops_are_exact_subviews_and_tile_without_overlap() {
        let img = TensorF::from_vec(&[1, 64, 64], (0..4096).map(|i| (i % 97) as f64 / 96.0).collect())
            .unwrap();
        let crops = crop_augment(&img, 32, 32).unwrap();
        assert_eq!(crops.len(), 4);
        // top-left crop equals the corresponding region elementwise
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(crops[0].data()[y * 32 + x], img.data()[y * 64 + x]);
                // bottom-right tile
                assert_eq!(
                    crops[3].data()[y * 32 + x],
                    img.data()[(y + 32) * 64 + (x + 32)]
                );
            }
        }
    }

    #[test]
    fn crop_rejects_oversized_window() {
        let img = TensorF::zeros(&[1, 8, 8]);
        assert!(crop_augment(&img, 9, 1).is_err());
        assert!(crop_augment(&img, 4, 0).is_err());
    }

    #[test]
    fn image_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = crate::rng::stream(5);
        for &c in &[1usize, 3] {
            let data: Vec<f64> = (0..c * 16 * 16).map(|_| rng.gen::<f64>()).collect();
            let img = TensorF::from_vec(&[c, 16, 16], data).unwrap();
            let path = dir.path().join(format!("t.{}", ext_for(c)));
            write_image(&path, &img).unwrap();
            let back = read_image(&path).unwrap();
            assert_eq!(back.shape(), img.shape());
            for (a, b) in back.data().iter().zip(img.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0, "a = {a}, b = {b}");
            }
        }
    }

    #[test]
    fn tiny_black_image_roundtrips_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let img = TensorF::zeros(&[1, 1, 1]);
        let path = dir.path().join("black.pgm");
        write_image(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        assert_eq!(back.data(), &[0.0]);
    }

    #[test]
    fn hand_constructed_header_parses() {
        // single-space separators are valid
        let bytes = b"P5 2 2 255\n\x00\x40\x80\xff";
        let img = decode_image(bytes).unwrap();
        assert_eq!(img.shape(), &[1, 2, 2]);
        assert_eq!(img.data()[0], 0.0);
        assert!((img.data()[1] - 64.0 / 255.0).abs() < 1e-12);
        assert!((img.data()[2] - 128.0 / 255.0).abs() < 1e-12);
        assert_eq!(img.data()[3], 1.0);
    }

    #[test]
    fn malformed_headers_report_offset() {
        match decode_image(b"P9 2 2 255\n\x00\x00\x00\x00") {
            Err(BridgeError::Parse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
        match decode_image(b"P5 2 2 199\n\x00\x00\x00\x00") {
            Err(BridgeError::Parse { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
        match decode_image(b"P5 4 4 255\n\x00\x00") {
            Err(BridgeError::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_roundtrip_and_split_stability() {
        let dir = tempfile::tempdir().unwrap();
        let ds = make_toy_translation(TaskTag::Rgb2Ir, 6, 16, 21).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back.src_channels, 3);
        assert_eq!(back.tgt_channels, 1);
        assert_eq!(back.resolution, 16);
        let (train, eval) = back.split_train_eval();
        assert_eq!(train.len(), 3);
        assert_eq!(eval.len(), 3);
        // quantized values agree with the originals
        for (a, b) in back.sources[0].data().iter().zip(ds.sources[0].data()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
        // saving again produces identical bytes
        let dir2 = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir2.path()).unwrap();
        let m1 = std::fs::read(dir.path().join("manifest.txt")).unwrap();
        let m2 = std::fs::read(dir2.path().join("manifest.txt")).unwrap();
        assert_eq!(m1, m2);
        let i1 = std::fs::read(dir.path().join("src/0000.ppm")).unwrap();
        let i2 = std::fs::read(dir2.path().join("src/0000.ppm")).unwrap();
        assert_eq!(i1, i2);
    }
}
