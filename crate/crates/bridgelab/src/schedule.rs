//! Variance-preserving schedule and everything derived from it in closed
//! form: α/σ, SNR, the bridge coefficient triple `(a_t, b_t, c_t)`, the
//! inverse-ρ time grid, training-time sampling, and the loss weight.
//!
//! Conventions: the base process runs data (t = 0) to source (t = T) with
//! `α(t) = exp(-½ B(t))`, `B(t) = ∫₀ᵗ β(s) ds`, `β(s) = beta_min + beta_d·s`,
//! and `σ(t)² = 1 - α(t)²`. The bridge marginal pinned at `x` (t = T) and
//! `y` (t = 0) is `z_t = a_t·x + b_t·y + c_t·ε`.

use crate::error::{BridgeError, Result};
use rand::Rng;

/// Default spacing exponent for grids and training-time sampling.
pub const KARRAS_RHO_DEFAULT: f64 = 7.0;

/// Floor applied to `c_t²` inside the loss weight so the weight stays
/// finite at the endpoints where `c_t = 0`.
pub const LOSS_WEIGHT_FLOOR: f64 = 1e-4;

/// Variance-preserving base schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpSchedule {
    /// Slope of β(t).
    pub beta_d: f64,
    /// Intercept of β(t); must be positive.
    pub beta_min: f64,
    /// Horizon T.
    pub t_max: f64,
    /// Smallest positive time used for interior grid points and
    /// training-time sampling.
    pub t_min: f64,
}

impl VpSchedule {
    pub fn new(beta_d: f64, beta_min: f64) -> Result<Self> {
        Self::with_horizon(beta_d, beta_min, 1.0, 1e-4)
    }

    pub fn with_horizon(beta_d: f64, beta_min: f64, t_max: f64, t_min: f64) -> Result<Self> {
        if !(beta_d >= 0.0) {
            return Err(BridgeError::Argument(format!("beta_d must be >= 0, got {beta_d}")));
        }
        if !(beta_min > 0.0) {
            return Err(BridgeError::Argument(format!("beta_min must be > 0, got {beta_min}")));
        }
        if !(0.0 < t_min && t_min < t_max) {
            return Err(BridgeError::Argument(format!(
                "need 0 < t_min < t_max, got t_min = {t_min}, t_max = {t_max}"
            )));
        }
        Ok(Self {
            beta_d,
            beta_min,
            t_max,
            t_min,
        })
    }

    /// The challenge defaults: β_d = 2.0, β_min = 0.1, T = 1.
    pub fn default_params() -> Self {
        Self::new(2.0, 0.1).expect("default parameters are valid")
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 || t > self.t_max {
            return Err(BridgeError::Domain(format!(
                "time {t} outside [0, {}]",
                self.t_max
            )));
        }
        Ok(())
    }

    /// β(t) = beta_min + beta_d·t.
    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + self.beta_d * t
    }

    /// B(t) = ∫₀ᵗ β(s) ds = beta_min·t + ½·beta_d·t².
    pub fn beta_integral(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * self.beta_d * t * t
    }

    /// (α(t), σ(t)) with α(0) = 1, σ(0) = 0 exactly.
    pub fn alpha_sigma(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok((1.0, 0.0));
        }
        let b = self.beta_integral(t);
        let alpha = (-0.5 * b).exp();
        // 1 - exp(-B) via expm1 keeps precision for small t
        let sigma2 = -(-b).exp_m1();
        Ok((alpha, sigma2.sqrt()))
    }

    /// SNR(t) = α(t)²/σ(t)²; diverges at 0, so the domain starts at t_min.
    pub fn snr(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < self.t_min || t > self.t_max {
            return Err(BridgeError::Domain(format!(
                "snr time {t} outside [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        let b = self.beta_integral(t);
        Ok((-b).exp() / -(-b).exp_m1())
    }

    /// log SNR(t); used by the time embedding. Clamps t into [t_min, t_max].
    pub fn log_snr_clamped(&self, t: f64) -> f64 {
        let t = t.clamp(self.t_min, self.t_max);
        let b = self.beta_integral(t);
        -b - (-(-b).exp_m1()).ln()
    }

    /// Bridge coefficient triple at time t. Endpoints are evaluated by
    /// their analytic limits: (1, 0, 0) at t = T and (0, 1, 0) at t = 0.
    pub fn bridge_coeffs(&self, t: f64) -> Result<BridgeCoeffs> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(BridgeCoeffs { a: 0.0, b: 1.0, c: 0.0, t });
        }
        if t == self.t_max {
            return Ok(BridgeCoeffs { a: 1.0, b: 0.0, c: 0.0, t });
        }
        let b_t = self.beta_integral(t);
        let b_cap = self.beta_integral(self.t_max);
        let (alpha_t, _) = self.alpha_sigma(t)?;
        let (alpha_cap, _) = self.alpha_sigma(self.t_max)?;
        let sigma2_t = -(-b_t).exp_m1();
        let sigma2_cap = -(-b_cap).exp_m1();
        // SNR_T / SNR_t, assembled from logs so tiny t stays accurate
        let ratio = (b_t - b_cap).exp() * sigma2_t / sigma2_cap;
        let a = alpha_t * ratio / alpha_cap;
        let b = alpha_t * (1.0 - ratio);
        let c2 = sigma2_t * (1.0 - ratio);
        Ok(BridgeCoeffs {
            a,
            b,
            c: c2.max(0.0).sqrt(),
            t,
        })
    }

    /// Karras bridge loss weight w(t) = 1 / max(c_t², floor).
    pub fn loss_weight(&self, t: f64) -> Result<f64> {
        let coeffs = self.bridge_coeffs(t)?;
        Ok(loss_weight_from_c2(coeffs.c * coeffs.c))
    }

    /// Discretized sampling grid 0 = t_0 < t_1 < … < t_N = T.
    ///
    /// Indices 1..=N sit at equally spaced positions in the (·)^(1/ρ)
    /// domain between t_min and T; t_0 is pinned to exactly 0 so the final
    /// state is the clean target.
    pub fn time_grid(&self, n_steps: usize, karras_rho: f64) -> Result<TimeGrid> {
        if n_steps == 0 {
            return Err(BridgeError::Argument("n_steps must be >= 1".into()));
        }
        if !(karras_rho >= 1.0) {
            return Err(BridgeError::Argument(format!(
                "karras_rho must be >= 1, got {karras_rho}"
            )));
        }
        let mut times = Vec::with_capacity(n_steps + 1);
        times.push(0.0);
        let lo = self.t_min.powf(1.0 / karras_rho);
        let hi = self.t_max.powf(1.0 / karras_rho);
        for n in 1..=n_steps {
            let u = n as f64 / n_steps as f64;
            times.push((lo + u * (hi - lo)).powf(karras_rho));
        }
        times[n_steps] = self.t_max;
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(BridgeError::Argument(format!(
                    "time grid not strictly increasing near t = {}",
                    w[1]
                )));
            }
        }
        Ok(TimeGrid {
            times,
            n_steps,
            karras_rho,
        })
    }

    /// Map a uniform draw u ∈ [0, 1] to a training time via the inverse-ρ
    /// law t = (t_min^(1/ρ) + u·(T^(1/ρ) - t_min^(1/ρ)))^ρ.
    pub fn train_time_from_uniform(&self, u: f64, karras_rho: f64) -> f64 {
        let lo = self.t_min.powf(1.0 / karras_rho);
        let hi = self.t_max.powf(1.0 / karras_rho);
        (lo + u * (hi - lo)).powf(karras_rho).clamp(self.t_min, self.t_max)
    }

    /// Draw a training time from the inverse-ρ distribution (ρ = 7).
    pub fn sample_train_time<R: Rng>(&self, rng: &mut R) -> f64 {
        self.train_time_from_uniform(rng.gen::<f64>(), KARRAS_RHO_DEFAULT)
    }
}

/// w from c²; exposed separately so the reciprocal-with-floor rule can be
/// tested without hunting for a time that hits a given c².
pub fn loss_weight_from_c2(c2: f64) -> f64 {
    1.0 / c2.max(LOSS_WEIGHT_FLOOR)
}

/// The triple pinning the bridge marginal at time t:
/// `z_t = a·x + b·y + c·ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t: f64,
}

/// Ordered sampling times t_0 = 0 < t_1 < … < t_N = T.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    n_steps: usize,
    karras_rho: f64,
}

impl TimeGrid {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn karras_rho(&self) -> f64 {
        self.karras_rho
    }

    pub fn time(&self, n: usize) -> f64 {
        self.times[n]
    }
}
