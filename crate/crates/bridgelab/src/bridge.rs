//! Forward bridge construction and the ρ-chain posterior step.
//!
//! The forward marginal pinned at source `x` (t = T) and target `y`
//! (t = 0) is `z_t = a_t·x + b_t·y + c_t·ε`. Reverse sampling factorizes
//! through conditional steps whose stochasticity level ρ_n ranges from 0
//! (deterministic implicit update) to c_{t_n} (fully ancestral); every
//! choice preserves the forward marginals when the clean prediction is
//! exact.

use crate::error::{BridgeError, Result};
use crate::schedule::VpSchedule;
use crate::tensor::TensorF;

/// One intermediate state of the bridge.
#[derive(Debug, Clone)]
pub struct BridgeState {
    pub z: TensorF,
    pub t: f64,
    pub x: TensorF,
}

impl BridgeState {
    /// Shapes must agree elementwise; single-band tensors are expected to
    /// have been expanded to model channels before a state is formed.
    pub fn new(z: TensorF, t: f64, x: TensorF) -> Result<Self> {
        z.check_same_shape(&x, "bridge state z/x")?;
        if !t.is_finite() || t < 0.0 {
            return Err(BridgeError::Domain(format!("bridge state time {t} is invalid")));
        }
        Ok(Self { z, t, x })
    }
}

/// Mean and standard deviation of one ρ-chain posterior step.
#[derive(Debug, Clone)]
pub struct PosteriorParams {
    pub mean: TensorF,
    /// Step standard deviation; equals the stochasticity level ρ_n.
    pub std: f64,
    pub rho_n: f64,
}

/// z_t = a_t·x + b_t·y + c_t·eps.
pub fn forward_sample(
    x: &TensorF,
    y: &TensorF,
    t: f64,
    eps: &TensorF,
    sched: &VpSchedule,
) -> Result<TensorF> {
    x.check_same_shape(y, "forward_sample x/y")?;
    x.check_same_shape(eps, "forward_sample x/eps")?;
    let co = sched.bridge_coeffs(t)?;
    let mut z = TensorF::zeros(x.shape());
    let zd = z.data_mut();
    for (i, ((&xv, &yv), &ev)) in x.data().iter().zip(y.data()).zip(eps.data()).enumerate() {
        zd[i] = co.a * xv + co.b * yv + co.c * ev;
    }
    Ok(z)
}

/// Extract the effective noise of a state at `t_next`:
/// η = (z_next - a·x - b·ẑ₀) / c.
///
/// Fails with a singular-coefficient error at the endpoints where c = 0;
/// the booting rule exists exactly so the sampler never calls this at T.
pub fn eta_hat(
    z_next: &TensorF,
    x: &TensorF,
    z0_hat: &TensorF,
    t_next: f64,
    sched: &VpSchedule,
) -> Result<TensorF> {
    z_next.check_same_shape(x, "eta_hat z/x")?;
    z_next.check_same_shape(z0_hat, "eta_hat z/z0")?;
    let co = sched.bridge_coeffs(t_next)?;
    if co.c == 0.0 {
        return Err(BridgeError::SingularCoefficient { t: t_next });
    }
    let mut out = TensorF::zeros(z_next.shape());
    let od = out.data_mut();
    for (i, ((&zv, &xv), &z0)) in z_next
        .data()
        .iter()
        .zip(x.data())
        .zip(z0_hat.data())
        .enumerate()
    {
        od[i] = (zv - co.a * xv - co.b * z0) / co.c;
    }
    Ok(out)
}

/// Parameters of q(z_{t_n} | z₀, z_{t_next}, x) at stochasticity ρ_n:
/// mean = a_{t_n}·x + b_{t_n}·z₀ + √(c_{t_n}² − ρ_n²)·η̂, std = ρ_n.
pub fn posterior_step(
    x: &TensorF,
    z0: &TensorF,
    z_next: &TensorF,
    t_n: f64,
    t_next: f64,
    rho_n: f64,
    sched: &VpSchedule,
) -> Result<PosteriorParams> {
    if !(t_n < t_next) {
        return Err(BridgeError::Argument(format!(
            "posterior_step requires t_n < t_next, got {t_n} >= {t_next}"
        )));
    }
    let co_n = sched.bridge_coeffs(t_n)?;
    if !(0.0..=co_n.c + 1e-15).contains(&rho_n) {
        return Err(BridgeError::Argument(format!(
            "rho_n = {rho_n} outside [0, c_t = {}]",
            co_n.c
        )));
    }
    let rho_n = rho_n.min(co_n.c);
    let carry = (co_n.c * co_n.c - rho_n * rho_n).max(0.0).sqrt();
    let mut mean = TensorF::zeros(x.shape());
    if carry > 0.0 {
        let eta = eta_hat(z_next, x, z0, t_next, sched)?;
        let md = mean.data_mut();
        for (i, ((&xv, &z0v), &ev)) in x.data().iter().zip(z0.data()).zip(eta.data()).enumerate() {
            md[i] = co_n.a * xv + co_n.b * z0v + carry * ev;
        }
    } else {
        let md = mean.data_mut();
        for (i, (&xv, &z0v)) in x.data().iter().zip(z0.data()).enumerate() {
            md[i] = co_n.a * xv + co_n.b * z0v;
        }
    }
    Ok(PosteriorParams {
        mean,
        std: rho_n,
        rho_n,
    })
}

/// Closed-form mean and variance of the scalar bridge marginal at time t:
/// (a·x + b·y, c²). Test oracle for everything built on `forward_sample`.
pub fn marginal_oracle(x_val: f64, y_val: f64, t: f64, sched: &VpSchedule) -> Result<(f64, f64)> {
    let co = sched.bridge_coeffs(t)?;
    Ok((co.a * x_val + co.b * y_val, co.c * co.c))
}
