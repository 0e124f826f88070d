//! Discrete update rules. Each step is a pure function of the state.

use crate::continuous::check_sgd_params;
use crate::error::{Error, Result};
use crate::geometry::{Metric, MetricKind, Vector};
use crate::losses::Loss;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub q: Vector,
    /// Heavy-ball velocity, or `x_n - x_{n-1}` for Nesterov.
    pub momentum_buffer: Vector,
    /// Scalar RMSProp accumulator.
    pub g_acc: f64,
    pub step_index: u64,
}

impl OptimizerState {
    pub fn new(q: Vector) -> Self {
        let n = q.len();
        OptimizerState { q, momentum_buffer: Vector::zeros(n), g_acc: 1.0, step_index: 0 }
    }

    pub fn with_accumulator(mut self, g: f64) -> Self {
        self.g_acc = g;
        self
    }

    pub fn time(&self, eta: f64) -> f64 {
        self.step_index as f64 * eta
    }
}

/// `buffer <- β buffer - η(∇f + kq)`, `q <- q + buffer`.
pub fn step_gd_momentum_wd(state: &OptimizerState, loss: &Loss, eta: f64, beta: f64, k: f64) -> Result<OptimizerState> {
    check_sgd_params(eta, beta, k)?;
    let g = loss.grad(&state.q)?;
    let buffer = &state.momentum_buffer * beta - (g + &state.q * k) * eta;
    Ok(OptimizerState {
        q: &state.q + &buffer,
        momentum_buffer: buffer,
        g_acc: state.g_acc,
        step_index: state.step_index + 1,
    })
}

/// Momentum factor `(n-1)/(n+power)` at iteration `n`; zero for the first two iterations.
pub fn nesterov_momentum(step_index: u64, power: f64) -> f64 {
    if step_index == 0 {
        0.0
    } else {
        let n = step_index as f64;
        (n - 1.0) / (n + power)
    }
}

/// Accelerated gradient with gradient step `η²`, so `step_index · η` is the
/// continuous time of the `q̈ + ((power+1)/t) q̇ + ∇f = 0` limit.
pub fn step_nesterov(state: &OptimizerState, loss: &Loss, eta: f64, power: f64) -> Result<OptimizerState> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    if !(power > 0.0) {
        return Err(Error::InvalidArgument("schedule power must be positive".into()));
    }
    let lookahead = &state.q + &state.momentum_buffer * nesterov_momentum(state.step_index, power);
    let g = loss.grad(&lookahead)?;
    let q = lookahead - g * (eta * eta);
    Ok(OptimizerState {
        momentum_buffer: &q - &state.q,
        q,
        g_acc: state.g_acc,
        step_index: state.step_index + 1,
    })
}

/// `q <- q - (η/√G) g`, then `G <- ρG + (1-ρ)|g|²`.
pub fn step_rmsprop(state: &OptimizerState, loss: &Loss, eta: f64, rho: f64) -> Result<OptimizerState> {
    if !(eta > 0.0) || !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument("need eta > 0 and 0 < rho < 1".into()));
    }
    if !(state.g_acc > 0.0) || !state.g_acc.is_finite() {
        return Err(Error::StateCorruption(format!("accumulator G = {}", state.g_acc)));
    }
    let g = loss.grad(&state.q)?;
    let q = &state.q - &g * (eta / state.g_acc.sqrt());
    Ok(OptimizerState {
        q,
        momentum_buffer: state.momentum_buffer.clone(),
        g_acc: rho * state.g_acc + (1.0 - rho) * g.norm_squared(),
        step_index: state.step_index + 1,
    })
}

/// Mirror step: `∇h(q') = ∇h(q) - η∇f(q)`.
pub fn step_mirror(state: &OptimizerState, loss: &Loss, eta: f64, metric: &Metric) -> Result<OptimizerState> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    metric.check_domain(&state.q)?;
    let g = loss.grad(&state.q)?;
    let q = match metric.kind() {
        MetricKind::Euclidean => &state.q - &g * eta,
        MetricKind::QuadraticForm { .. } => &state.q - metric.hessian_solve(&state.q, &g)? * eta,
        MetricKind::NegativeEntropy => state.q.zip_map(&g, |x, gi| x * (-eta * gi).exp()),
    };
    metric.check_domain(&q)?;
    Ok(OptimizerState {
        q,
        momentum_buffer: state.momentum_buffer.clone(),
        g_acc: state.g_acc,
        step_index: state.step_index + 1,
    })
}

/// A configured update rule.
#[derive(Debug, Clone)]
pub enum Rule {
    HeavyBall { eta: f64, beta: f64, k: f64 },
    Nesterov { eta: f64, power: f64 },
    Rmsprop { eta: f64, rho: f64 },
    Mirror { eta: f64, metric: Metric },
}

impl Rule {
    pub fn eta(&self) -> f64 {
        match self {
            Rule::HeavyBall { eta, .. }
            | Rule::Nesterov { eta, .. }
            | Rule::Rmsprop { eta, .. }
            | Rule::Mirror { eta, .. } => *eta,
        }
    }

    pub fn step(&self, state: &OptimizerState, loss: &Loss) -> Result<OptimizerState> {
        match self {
            Rule::HeavyBall { eta, beta, k } => step_gd_momentum_wd(state, loss, *eta, *beta, *k),
            Rule::Nesterov { eta, power } => step_nesterov(state, loss, *eta, *power),
            Rule::Rmsprop { eta, rho } => step_rmsprop(state, loss, *eta, *rho),
            Rule::Mirror { eta, metric } => step_mirror(state, loss, *eta, metric),
        }
    }
}

/// Runs `steps` updates and returns every state including the initial one.
pub fn run(rule: &Rule, loss: &Loss, init: OptimizerState, steps: usize) -> Result<Vec<OptimizerState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(init);
    for _ in 0..steps {
        let next = rule.step(out.last().unwrap(), loss)?;
        out.push(next);
    }
    Ok(out)
}

/// `q̇_n = (q_{n+1} - q_{n-1}) / (2η)`, one-sided second order at the ends.
pub fn centered_velocity(qs: &[Vector], eta: f64) -> Result<Vec<Vector>> {
    let n = qs.len();
    if n < 3 {
        return Err(Error::Grid("velocity export needs at least three iterates".into()));
    }
    let h2 = 2.0 * eta;
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                (&qs[1] * 4.0 - &qs[0] * 3.0 - &qs[2]) / h2
            } else if i == n - 1 {
                (&qs[n - 1] * 3.0 - &qs[n - 2] * 4.0 + &qs[n - 3]) / h2
            } else {
                (&qs[i + 1] - &qs[i - 1]) / h2
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Matrix;
    use approx::assert_relative_eq;

    fn quad(d: usize) -> Loss {
        Loss::quadratic(Matrix::identity(d, d), Vector::zeros(d)).unwrap()
    }

    #[test]
    fn heavy_ball_examples() {
        let loss = quad(1);
        let s0 = OptimizerState::new(Vector::from_element(1, 1.0));
        let s1 = step_gd_momentum_wd(&s0, &loss, 0.1, 0.0, 0.0).unwrap();
        assert_relative_eq!(s1.q[0], 0.9, max_relative = 1e-15);

        let s1 = step_gd_momentum_wd(&s0, &loss, 0.1, 0.5, 0.0).unwrap();
        let s2 = step_gd_momentum_wd(&s1, &loss, 0.1, 0.5, 0.0).unwrap();
        assert_relative_eq!(s1.q[0], 0.9, max_relative = 1e-15);
        assert_relative_eq!(s2.momentum_buffer[0], -0.14, max_relative = 1e-14);
        assert_relative_eq!(s2.q[0], 0.76, max_relative = 1e-14);
        assert_eq!(s2.step_index, 2);

        let z = OptimizerState::new(Vector::zeros(1));
        let z1 = step_gd_momentum_wd(&z, &loss, 0.1, 0.9, 0.0).unwrap();
        assert_eq!(z1.q, z.q);
        assert_eq!(z1.step_index, 1);
        assert!(step_gd_momentum_wd(&s0, &loss, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn nesterov_first_step_is_plain_gradient() {
        assert_eq!(nesterov_momentum(0, 2.0), 0.0);
        assert_eq!(nesterov_momentum(1, 2.0), 0.0);
        assert_relative_eq!(nesterov_momentum(4, 2.0), 0.5);
        let loss = quad(2);
        let s0 = OptimizerState::new(Vector::from_vec(vec![1.0, -2.0]));
        let s1 = step_nesterov(&s0, &loss, 0.1, 2.0).unwrap();
        assert_relative_eq!(s1.q, &s0.q * 0.99, max_relative = 1e-15);
        let flat = Loss::quadratic(Matrix::zeros(2, 2), Vector::zeros(2)).unwrap();
        assert_eq!(step_nesterov(&s0, &flat, 0.1, 2.0).unwrap().q, s0.q);
    }

    #[test]
    fn rmsprop_examples() {
        let loss = quad(1);
        let s0 = OptimizerState::new(Vector::from_element(1, 1.0)).with_accumulator(1.0);
        let s1 = step_rmsprop(&s0, &loss, 0.1, 0.9).unwrap();
        assert_relative_eq!(s1.q[0], 0.9, max_relative = 1e-15);
        assert_relative_eq!(s1.g_acc, 1.0, max_relative = 1e-15);

        let at_origin = OptimizerState::new(Vector::zeros(1)).with_accumulator(2.0);
        let z1 = step_rmsprop(&at_origin, &loss, 0.1, 0.9).unwrap();
        assert_eq!(z1.q, at_origin.q);
        assert_relative_eq!(z1.g_acc, 1.8, max_relative = 1e-15);

        let bad = s0.clone().with_accumulator(0.0);
        assert!(matches!(step_rmsprop(&bad, &loss, 0.1, 0.9), Err(Error::StateCorruption(_))));
    }

    #[test]
    fn rmsprop_accumulator_fixed_point() {
        // Linear loss: constant gradient of norm c.
        let c = 0.7;
        let b = Vector::from_vec(vec![c, 0.0]);
        let loss = Loss::quadratic(Matrix::zeros(2, 2), -b).unwrap();
        let mut s = OptimizerState::new(Vector::zeros(2)).with_accumulator(c * c);
        for _ in 0..50 {
            s = step_rmsprop(&s, &loss, 0.05, 0.9).unwrap();
            assert_relative_eq!(s.g_acc, c * c, max_relative = 1e-14);
        }
    }

    #[test]
    fn mirror_examples() {
        let loss = Loss::quadratic(Matrix::zeros(2, 2), Vector::from_vec(vec![-1.0, 0.0])).unwrap();
        let s0 = OptimizerState::new(Vector::from_vec(vec![1.0, 1.0]));
        let ent = Metric::negative_entropy(2);
        let s1 = step_mirror(&s0, &loss, 2f64.ln(), &ent).unwrap();
        assert_relative_eq!(s1.q[0], 0.5, max_relative = 1e-15);
        assert_eq!(s1.q[1], 1.0);

        let flat = Loss::quadratic(Matrix::zeros(2, 2), Vector::zeros(2)).unwrap();
        assert_eq!(step_mirror(&s0, &flat, 0.3, &ent).unwrap().q, s0.q);

        let q2 = quad(2);
        let gd = step_gd_momentum_wd(&s0, &q2, 0.1, 0.0, 0.0).unwrap();
        let md = step_mirror(&s0, &q2, 0.1, &Metric::euclidean(2)).unwrap();
        assert_eq!(gd.q, md.q);

        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let qf = Metric::quadratic_form(a.clone()).unwrap();
        let m = step_mirror(&s0, &q2, 0.1, &qf).unwrap();
        assert_relative_eq!(&a * (&m.q - &s0.q), -(&s0.q) * 0.1, max_relative = 1e-13);

        let outside = OptimizerState::new(Vector::from_vec(vec![-1.0, 1.0]));
        assert!(matches!(step_mirror(&outside, &q2, 0.1, &ent), Err(Error::Domain(_))));
    }

    #[test]
    fn centered_velocity_is_exact_on_quadratics_in_time() {
        let eta = 0.1;
        let qs: Vec<Vector> = (0..6)
            .map(|i| {
                let t = i as f64 * eta;
                Vector::from_element(1, 1.0 + 2.0 * t - 3.0 * t * t)
            })
            .collect();
        let v = centered_velocity(&qs, eta).unwrap();
        for (i, vi) in v.iter().enumerate() {
            let t = i as f64 * eta;
            assert_relative_eq!(vi[0], 2.0 - 6.0 * t, epsilon = 1e-12);
        }
        assert!(centered_velocity(&qs[..2], eta).is_err());
    }

    #[test]
    fn step_index_tracks_time() {
        let loss = quad(1);
        let rule = Rule::HeavyBall { eta: 0.01, beta: 0.9, k: 0.0 };
        let states = run(&rule, &loss, OptimizerState::new(Vector::from_element(1, 1.0)), 100).unwrap();
        assert_relative_eq!(states[100].time(rule.eta()), 1.0, max_relative = 1e-14);
    }
}
