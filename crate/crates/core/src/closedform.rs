//! Closed-form effective-learning-rate schedules and steady-state relations.
//!
//! Both the squared weight norm of a scale-invariant model trained by SGD with
//! momentum and weight decay, and the RMSProp accumulator, are square roots of
//! an exponentially weighted history of squared gradient norms:
//!
//! ```text
//! r^2(t)     = sqrt( P_bn  ∫ e^{-a (t-τ)} |ĝ(τ)|^2 dτ + e^{-a t} r^4(0) ),  a = 4k/(1-β),  P_bn = 2η(1+β)/(1-β)^3
//! sqrt(G(t)) = sqrt( P_rms ∫ e^{-b (t-τ)} |g(τ)|^2 dτ + e^{-b t} G(0) ),   b = P_rms = (1-ρ)/η
//! ```

use crate::continuous::check_sgd_params;
use crate::error::{Error, Result};

/// Uniformly sampled `|ĝ(τ)|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradNormHistory {
    pub times: Vec<f64>,
    pub gsq: Vec<f64>,
}

impl GradNormHistory {
    pub fn new(times: Vec<f64>, gsq: Vec<f64>) -> Result<Self> {
        if times.len() != gsq.len() || times.len() < 2 {
            return Err(Error::Grid("history needs at least two aligned samples".into()));
        }
        crate::continuous::check_uniform(&times)?;
        if let Some(bad) = gsq.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("squared gradient norm {bad} is negative")));
        }
        Ok(GradNormHistory { times, gsq })
    }

    pub fn constant(value: f64, t_end: f64, dt: f64) -> Result<Self> {
        let n = (t_end / dt).round() as usize;
        let times = (0..=n).map(|i| i as f64 * dt).collect();
        GradNormHistory::new(times, vec![value; n + 1])
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Piecewise-linear interpolation; times outside the record are a gap.
    pub fn at(&self, t: f64) -> Result<f64> {
        let dt = self.step();
        let t0 = self.times[0];
        let pos = (t - t0) / dt;
        let last = (self.times.len() - 1) as f64;
        if pos < -1e-9 || pos > last + 1e-9 {
            return Err(Error::Grid(format!(
                "history covers [{t0}, {}], asked for t = {t}",
                self.times[self.times.len() - 1]
            )));
        }
        let pos = pos.clamp(0.0, last);
        let i = (pos.floor() as usize).min(self.times.len() - 2);
        let w = pos - i as f64;
        Ok((1.0 - w) * self.gsq[i] + w * self.gsq[i + 1])
    }
}

/// `sqrt(prefactor ∫_0^t e^{-rate (t-τ)} h(τ) dτ + e^{-rate t} init)` at every
/// grid time, with trapezoid quadrature evaluated by exact kernel recursion.
pub fn kernel_schedule(history: &GradNormHistory, rate: f64, prefactor: f64, init: f64) -> Vec<f64> {
    let dt = history.step();
    let t0 = history.times[0];
    let decay = (-rate * dt).exp();
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(history.gsq.len());
    for (i, (&t, &g)) in history.times.iter().zip(&history.gsq).enumerate() {
        if i > 0 {
            integral = integral * decay + 0.5 * dt * (history.gsq[i - 1] * decay + g);
        }
        out.push((prefactor * integral + (-rate * (t - t0)).exp() * init).sqrt());
    }
    out
}

/// Kernel rate `4k/(1-β)` and prefactor `2η(1+β)/(1-β)^3` of the weight-norm schedule.
pub fn bn_kernel(eta: f64, beta: f64, k: f64) -> (f64, f64) {
    (4.0 * k / (1.0 - beta), 2.0 * eta * (1.0 + beta) / (1.0 - beta).powi(3))
}

/// Squared weight norm `r^2(t)` of a scale-invariant model under SGD with
/// momentum `beta` and weight decay `k`, driven by the normalized-gradient history.
pub fn r2_schedule(history: &GradNormHistory, eta: f64, beta: f64, k: f64, r0: f64) -> Result<Vec<f64>> {
    check_sgd_params(eta, beta, k)?;
    if !(r0 > 0.0) {
        return Err(Error::InvalidArgument("initial norm must be positive".into()));
    }
    let (rate, prefactor) = bn_kernel(eta, beta, k);
    Ok(kernel_schedule(history, rate, prefactor, r0.powi(4)))
}

/// RMSProp scaling factor `sqrt(G(t))` driven by the raw gradient history.
pub fn g_schedule(history: &GradNormHistory, eta: f64, rho: f64, g0: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument("need eta > 0 and 0 < rho <= 1".into()));
    }
    if !(g0 > 0.0) {
        return Err(Error::InvalidArgument("initial accumulator must be positive".into()));
    }
    let rate = (1.0 - rho) / eta;
    Ok(kernel_schedule(history, rate, rate, g0))
}

/// Per-step angular displacement `|u(t+η) - u(t)| = sqrt(2ηk/(1+β))` at equilibrium.
pub fn steady_angular_speed(eta: f64, beta: f64, k: f64) -> Result<f64> {
    check_sgd_params(eta, beta, k)?;
    Ok((2.0 * eta * k / (1.0 + beta)).sqrt())
}

/// Equilibrium norm `((η(1+β)) / (2k(1-β)^2))^{1/4} sqrt(|ĝ|)`.
pub fn steady_radius(eta: f64, beta: f64, k: f64, gnorm: f64) -> Result<f64> {
    check_sgd_params(eta, beta, k)?;
    if k == 0.0 {
        return Err(Error::InvalidArgument("no steady norm without weight decay".into()));
    }
    if !(gnorm >= 0.0) {
        return Err(Error::InvalidArgument("gradient norm must be non-negative".into()));
    }
    Ok((eta * (1.0 + beta) / (2.0 * k * (1.0 - beta).powi(2))).powf(0.25) * gnorm.sqrt())
}

/// What to hold fixed when matching RMSProp to the weight-norm kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapTarget {
    LearningRate(f64),
    Decay(f64),
}

/// Parameter correspondence between the weight-norm schedule and RMSProp.
#[derive(Debug, Clone, PartialEq)]
pub struct BnRmspropMap {
    pub eta_prime: f64,
    pub rho_prime: f64,
    /// Shared decay rate `4k/(1-β) = (1-ρ')/η'`.
    pub kernel_rate: f64,
    pub bn_prefactor: f64,
    pub rms_prefactor: f64,
    /// `bn_prefactor / rms_prefactor = η(1+β) / (2k(1-β)^2)`; 1 when both constraints hold.
    pub prefactor_ratio: f64,
    /// Initial accumulator corresponding to a weight norm `r0`: `G0' = r0^4`.
    pub g0_exponent: i32,
    /// Both rate and prefactor identities hold (to 1e-12 relative).
    pub satisfiable: bool,
}

impl BnRmspropMap {
    pub fn g0_for(&self, r0: f64) -> f64 {
        r0.powi(self.g0_exponent)
    }

    /// Squared-gradient scale that makes RMSProp reproduce `r^2(t)` exactly when
    /// the prefactors differ.
    pub fn gradient_scale(&self) -> f64 {
        self.prefactor_ratio
    }
}

/// Matches the exponential kernels: `(1-ρ')/η' = 4k/(1-β)`. The prefactor
/// identity `(1-ρ')/η' = 2η(1+β)/(1-β)^3` is generally not satisfiable at the
/// same time, so the residual ratio is reported rather than forced.
pub fn bn_rmsprop_map(eta: f64, beta: f64, k: f64, target: MapTarget) -> Result<BnRmspropMap> {
    check_sgd_params(eta, beta, k)?;
    let (rate, bn_prefactor) = bn_kernel(eta, beta, k);
    let (eta_prime, rho_prime) = match target {
        MapTarget::LearningRate(ep) => {
            if !(ep > 0.0) {
                return Err(Error::InvalidArgument("eta' must be positive".into()));
            }
            let rho = 1.0 - rate * ep;
            if !(rho > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "eta' = {ep} gives rho' = {rho}; need eta' < (1-β)/(4k)"
                )));
            }
            (ep, rho)
        }
        MapTarget::Decay(rho) => {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::InvalidArgument("rho' must lie in (0, 1]".into()));
            }
            if rate == 0.0 {
                if rho < 1.0 {
                    return Err(Error::InvalidArgument(
                        "k = 0 has no decay; only rho' = 1 matches".into(),
                    ));
                }
                return Err(Error::InvalidArgument(
                    "k = 0 with rho' = 1 leaves eta' undetermined; pass a learning rate".into(),
                ));
            }
            (((1.0 - rho) / rate), rho)
        }
    };
    let rms_prefactor = (1.0 - rho_prime) / eta_prime;
    let prefactor_ratio = bn_prefactor / rms_prefactor;
    Ok(BnRmspropMap {
        eta_prime,
        rho_prime,
        kernel_rate: rate,
        bn_prefactor,
        rms_prefactor,
        prefactor_ratio,
        g0_exponent: 4,
        satisfiable: (prefactor_ratio - 1.0).abs() <= 1e-12,
    })
}

/// Weight decay at which both kernel identities hold for given `(η, β)`.
pub fn balanced_weight_decay(eta: f64, beta: f64) -> f64 {
    eta * (1.0 + beta) / (2.0 * (1.0 - beta).powi(2))
}

/// Exact over-damped solution of the radial Bernoulli equation for constant `|ĝ|^2`.
pub fn bernoulli_r2(mass: f64, friction: f64, k: f64, gsq: f64, r0: f64, t: f64) -> f64 {
    let drive = 4.0 * mass / friction.powi(3) * gsq;
    let r4 = r0.powi(4);
    if k == 0.0 {
        return (drive * t + r4).sqrt();
    }
    let rate = 4.0 * k / friction;
    let decay = (-rate * t).exp();
    (drive * (1.0 - decay) / rate + decay * r4).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliCheck {
    pub times: Vec<f64>,
    pub analytic: Vec<f64>,
    pub quadrature: Vec<f64>,
    pub max_relative_deviation: f64,
    pub passed: bool,
}

/// Compares the analytic Bernoulli solution with `r2_schedule` on a constant
/// history, using `m = η(1+β)/2`, `μ = 1-β`.
pub fn solve_bernoulli_check(
    eta: f64,
    beta: f64,
    k: f64,
    gsq: f64,
    r0: f64,
    t_end: f64,
    dt: f64,
) -> Result<BernoulliCheck> {
    let history = GradNormHistory::constant(gsq, t_end, dt)?;
    let quadrature = r2_schedule(&history, eta, beta, k, r0)?;
    let (mass, friction) = (eta * (1.0 + beta) / 2.0, 1.0 - beta);
    let analytic: Vec<f64> = history
        .times
        .iter()
        .map(|&t| bernoulli_r2(mass, friction, k, gsq, r0, t))
        .collect();
    let max_relative_deviation = analytic
        .iter()
        .zip(&quadrature)
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max);
    Ok(BernoulliCheck {
        times: history.times,
        analytic,
        quadrature,
        max_relative_deviation,
        passed: max_relative_deviation <= 1e-8,
    })
}
