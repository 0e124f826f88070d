//! Distance-generating functions, Bregman divergences and the Bregman Lagrangian.
//!
//! A learning rule is described by a metric `h` (its kinetic energy) and a
//! time schedule `(alpha, beta, gamma)` that fixes damping and step scaling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::losses::Loss;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Coordinates at or below this value are outside the negative-entropy domain.
pub const ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum MetricKind {
    /// `h(x) = |x|^2 / 2`
    Euclidean,
    /// `h(x) = <x, A x> / 2` for symmetric positive-definite `A`.
    QuadraticForm { a: Matrix, chol: Cholesky<f64, Dyn> },
    /// `h(x) = sum_i x_i log x_i` on the open positive orthant.
    NegativeEntropy,
}

#[derive(Debug, Clone)]
pub struct Metric {
    kind: MetricKind,
    dim: usize,
}

impl Metric {
    pub fn euclidean(dim: usize) -> Self {
        Metric {
            kind: MetricKind::Euclidean,
            dim,
        }
    }

    pub fn negative_entropy(dim: usize) -> Self {
        Metric {
            kind: MetricKind::NegativeEntropy,
            dim,
        }
    }

    /// Fails unless `a` is square, symmetric and positive definite.
    pub fn quadratic_form(a: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument("quadratic form must be square".into()));
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 * (1.0 + a.amax()) {
            return Err(Error::InvalidArgument(format!(
                "quadratic form must be symmetric (asymmetry {asym:e})"
            )));
        }
        let dim = a.nrows();
        let chol = Cholesky::new(a.clone())
            .ok_or_else(|| Error::InvalidArgument("quadratic form is not positive definite".into()))?;
        Ok(Metric {
            kind: MetricKind::QuadraticForm { a, chol },
            dim,
        })
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, MetricKind::Euclidean)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MetricKind::Euclidean => "euclidean",
            MetricKind::QuadraticForm { .. } => "quadratic-form",
            MetricKind::NegativeEntropy => "negative-entropy",
        }
    }

    pub fn check_domain(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "point has dimension {}, metric has {}",
                x.len(),
                self.dim
            )));
        }
        if let MetricKind::NegativeEntropy = self.kind {
            if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v > ENTROPY_FLOOR)) {
                return Err(Error::Domain(format!(
                    "negative entropy needs strictly positive coordinates, x[{i}] = {v:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match &self.kind {
            MetricKind::Euclidean => 0.5 * x.norm_squared(),
            MetricKind::QuadraticForm { a, .. } => 0.5 * x.dot(&(a * x)),
            MetricKind::NegativeEntropy => x.iter().map(|v| v * v.ln()).sum(),
        })
    }

    pub fn grad(&self, x: &Vector) -> Result<Vector> {
        self.check_domain(x)?;
        Ok(match &self.kind {
            MetricKind::Euclidean => x.clone(),
            MetricKind::QuadraticForm { a, .. } => a * x,
            MetricKind::NegativeEntropy => x.map(|v| v.ln() + 1.0),
        })
    }

    pub fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.check_domain(x)?;
        Ok(match &self.kind {
            MetricKind::Euclidean => Matrix::identity(self.dim, self.dim),
            MetricKind::QuadraticForm { a, .. } => a.clone(),
            MetricKind::NegativeEntropy => Matrix::from_diagonal(&x.map(|v| 1.0 / v)),
        })
    }

    /// `∇²h(x) v` without materializing the Hessian.
    pub fn hessian_vec(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        self.check_domain(x)?;
        Ok(match &self.kind {
            MetricKind::Euclidean => v.clone(),
            MetricKind::QuadraticForm { a, .. } => a * v,
            MetricKind::NegativeEntropy => v.component_div(x),
        })
    }

    /// Solves `∇²h(x) w = v`.
    pub fn hessian_solve(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        self.check_domain(x)?;
        Ok(match &self.kind {
            MetricKind::Euclidean => v.clone(),
            MetricKind::QuadraticForm { chol, .. } => chol.solve(v),
            MetricKind::NegativeEntropy => v.component_mul(x),
        })
    }

    /// Inverse of the mirror map: the point `x` with `∇h(x) = z`.
    pub fn grad_inverse(&self, z: &Vector) -> Result<Vector> {
        if z.len() != self.dim {
            return Err(Error::InvalidArgument("dual point has wrong dimension".into()));
        }
        let x = match &self.kind {
            MetricKind::Euclidean => z.clone(),
            MetricKind::QuadraticForm { chol, .. } => chol.solve(z),
            MetricKind::NegativeEntropy => z.map(|v| (v - 1.0).exp()),
        };
        self.check_domain(&x)?;
        Ok(x)
    }
}

/// `D_h(y, x) = h(y) - h(x) - <∇h(x), y - x>`, evaluated in closed form per metric.
pub fn bregman_divergence(metric: &Metric, y: &Vector, x: &Vector) -> Result<f64> {
    metric.check_domain(x)?;
    metric.check_domain(y)?;
    let d = y - x;
    Ok(match metric.kind() {
        MetricKind::Euclidean => 0.5 * d.norm_squared(),
        MetricKind::QuadraticForm { a, .. } => 0.5 * d.dot(&(a * &d)),
        MetricKind::NegativeEntropy => y
            .iter()
            .zip(x.iter())
            .map(|(&yi, &xi)| yi * (yi / xi).ln() - yi + xi)
            .sum(),
    })
}

/// Bregman kinetic energy `T_h = e^{alpha} D_h(q + e^{-alpha} q_dot, q)`.
pub fn kinetic_energy(metric: &Metric, q: &Vector, q_dot: &Vector, alpha_t: f64) -> Result<f64> {
    if q_dot.len() != q.len() {
        return Err(Error::InvalidArgument("q and q_dot differ in dimension".into()));
    }
    let y = q + q_dot * (-alpha_t).exp();
    Ok(alpha_t.exp() * bregman_divergence(metric, &y, q)?)
}

/// The time functions `(alpha_t, beta_t, gamma_t)` of a Bregman Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BregmanSchedule {
    /// Particle of mass `m` with friction `mu`: `m q'' + mu q' + ∇f = 0`.
    Natural { mass: f64, friction: f64 },
    /// Heavy-ball SGD at finite learning rate: mass `eta (1 + momentum) / 2`, friction `1 - momentum`.
    Sgdm { eta: f64, momentum: f64 },
    /// Continuous Nesterov family `q'' + (n+1)/t q' + C n^2 t^{n-2} ∇f = 0`.
    Nesterov { power: f64, scale: f64 },
}

/// Schedule values and their time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValues {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub gamma_dot: f64,
}

impl BregmanSchedule {
    pub fn natural(mass: f64, friction: f64) -> Self {
        BregmanSchedule::Natural { mass, friction }
    }

    pub fn sgdm(eta: f64, momentum: f64) -> Self {
        BregmanSchedule::Sgdm { eta, momentum }
    }

    pub fn nesterov(power: f64, scale: f64) -> Self {
        BregmanSchedule::Nesterov { power, scale }
    }

    /// Mass and friction of the equivalent damped particle, for the time-homogeneous presets.
    pub fn mass_friction(&self) -> Option<(f64, f64)> {
        match *self {
            BregmanSchedule::Natural { mass, friction } => Some((mass, friction)),
            BregmanSchedule::Sgdm { eta, momentum } => {
                Some((eta * (1.0 + momentum) / 2.0, 1.0 - momentum))
            }
            BregmanSchedule::Nesterov { .. } => None,
        }
    }

    pub fn at(&self, t: f64) -> Result<ScheduleValues> {
        match *self {
            BregmanSchedule::Natural { .. } | BregmanSchedule::Sgdm { .. } => {
                let (m, mu) = self.mass_friction().unwrap();
                if !(m > 0.0) {
                    return Err(Error::InvalidArgument(format!("mass must be positive, got {m}")));
                }
                Ok(ScheduleValues {
                    alpha: -m.ln(),
                    beta: m.ln(),
                    gamma: mu / m * t,
                    alpha_dot: 0.0,
                    beta_dot: 0.0,
                    gamma_dot: mu / m,
                })
            }
            BregmanSchedule::Nesterov { power: n, scale: c } => {
                if !(t > 0.0) {
                    return Err(Error::Domain(format!(
                        "Nesterov schedule is singular at t = {t}; need t > 0"
                    )));
                }
                if !(n > 0.0 && c > 0.0) {
                    return Err(Error::InvalidArgument("Nesterov needs n > 0 and C > 0".into()));
                }
                Ok(ScheduleValues {
                    alpha: n.ln() - t.ln(),
                    beta: n * t.ln() + c.ln(),
                    gamma: n * t.ln(),
                    alpha_dot: -1.0 / t,
                    beta_dot: n / t,
                    gamma_dot: n / t,
                })
            }
        }
    }

    pub fn alpha(&self, t: f64) -> Result<f64> {
        Ok(self.at(t)?.alpha)
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        Ok(self.at(t)?.beta)
    }

    pub fn gamma(&self, t: f64) -> Result<f64> {
        Ok(self.at(t)?.gamma)
    }

    pub fn alpha_dot(&self, t: f64) -> Result<f64> {
        Ok(self.at(t)?.alpha_dot)
    }

    pub fn gamma_dot(&self, t: f64) -> Result<f64> {
        Ok(self.at(t)?.gamma_dot)
    }
}

/// `L(q, q_dot, t) = e^{alpha+gamma} (D_h(q + e^{-alpha} q_dot, q) - e^{beta} f(q))`.
pub fn lagrangian(
    metric: &Metric,
    schedule: &BregmanSchedule,
    loss: &Loss,
    q: &Vector,
    q_dot: &Vector,
    t: f64,
) -> Result<f64> {
    let s = schedule.at(t)?;
    let y = q + q_dot * (-s.alpha).exp();
    let kinetic = bregman_divergence(metric, &y, q)?;
    let potential = loss.value(q)?;
    Ok((s.alpha + s.gamma).exp() * (kinetic - s.beta.exp() * potential))
}
