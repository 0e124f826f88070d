//! One-parameter symmetry transforms, kinetic asymmetry and Noether's learning dynamics.
//!
//! For a transform `Q(q, s)` with generator `∂_s Q` the Noether charge of a
//! Bregman Lagrangian is `<Δ_h, ∂_s Q>` with
//! `Δ_h = ∇h(q + e^{-alpha} q') - ∇h(q)`. Along Euler-Lagrange trajectories of
//! a loss invariant under `Q` it obeys
//!
//! ```text
//! d/dt <Δ_h, ∂_s Q> + gamma' <Δ_h, ∂_s Q>
//!     = <Δ_h, ∂_s Q'> + e^{alpha} <Δ_h - e^{-alpha} ∇²h(q) q', ∂_s Q>
//! ```
//!
//! and the right-hand side is exactly the kinetic asymmetry `∂_s T_h`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::continuous::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{kinetic_energy, BregmanSchedule, Matrix, Metric, MetricKind, Vector};

/// Finite-difference step in the transform parameter.
const S_STEP: f64 = 6.0554544523933395e-6; // cbrt(f64::EPSILON)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymmetryKind {
    Translation,
    Rotation,
    Scale,
    Rescale,
}

impl SymmetryKind {
    pub fn name(&self) -> &'static str {
        match self {
            SymmetryKind::Translation => "translation",
            SymmetryKind::Rotation => "rotation",
            SymmetryKind::Scale => "scale",
            SymmetryKind::Rescale => "rescale",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymmetryTransform {
    /// `Q = q + s n` for a unit vector `n`.
    Translation { direction: Vector },
    /// `Q = exp(s A) q` for skew-symmetric `A`.
    Rotation { generator: Matrix },
    /// `Q = (1 + s) q`
    Scale,
    /// `Q = ((1 + s) q1, q2 / (1 + s))`, `q1 = q[..split]`.
    Rescale { split: usize },
}

impl SymmetryTransform {
    pub fn translation(direction: Vector) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("translation direction must be non-zero".into()));
        }
        Ok(SymmetryTransform::Translation { direction: direction / n })
    }

    pub fn rotation(generator: Matrix) -> Result<Self> {
        if !generator.is_square() {
            return Err(Error::InvalidArgument("rotation generator must be square".into()));
        }
        let skew = (&generator + generator.transpose()).amax();
        if skew > 1e-12 * (1.0 + generator.amax()) {
            return Err(Error::InvalidArgument(format!(
                "rotation generator must be skew-symmetric (A + A^T has entry {skew:e})"
            )));
        }
        Ok(SymmetryTransform::Rotation { generator })
    }

    pub fn kind(&self) -> SymmetryKind {
        match self {
            SymmetryTransform::Translation { .. } => SymmetryKind::Translation,
            SymmetryTransform::Rotation { .. } => SymmetryKind::Rotation,
            SymmetryTransform::Scale => SymmetryKind::Scale,
            SymmetryTransform::Rescale { .. } => SymmetryKind::Rescale,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            SymmetryTransform::Translation { direction } => Some(direction.len()),
            SymmetryTransform::Rotation { generator } => Some(generator.nrows()),
            _ => None,
        }
    }

    fn check_dim(&self, q: &Vector) -> Result<()> {
        match self {
            SymmetryTransform::Rescale { split } if *split >= q.len() || *split == 0 => Err(
                Error::InvalidArgument(format!("rescale split {split} invalid for dimension {}", q.len())),
            ),
            _ => match self.dim() {
                Some(d) if d != q.len() => Err(Error::InvalidArgument(format!(
                    "transform acts on dimension {d}, point has {}",
                    q.len()
                ))),
                _ => Ok(()),
            },
        }
    }

    pub fn apply(&self, q: &Vector, s: f64) -> Result<Vector> {
        self.check_dim(q)?;
        if s == 0.0 {
            return Ok(q.clone());
        }
        Ok(match self {
            SymmetryTransform::Translation { direction } => q + direction * s,
            SymmetryTransform::Rotation { generator } => (generator * s).exp() * q,
            SymmetryTransform::Scale => q * (1.0 + s),
            SymmetryTransform::Rescale { split } => rescale(q, *split, 1.0 + s),
        })
    }

    /// Velocity of the transformed path, `d/dt Q(q(t), s)`.
    pub fn transport_velocity(&self, q_dot: &Vector, s: f64) -> Result<Vector> {
        self.check_dim(q_dot)?;
        Ok(match self {
            SymmetryTransform::Translation { .. } => q_dot.clone(),
            // linear maps transport velocities like points
            _ => self.apply(q_dot, s)?,
        })
    }

    /// `∂_s Q` at `s = 0`.
    pub fn generator(&self, q: &Vector) -> Vector {
        match self {
            SymmetryTransform::Translation { direction } => direction.clone(),
            SymmetryTransform::Rotation { generator } => generator * q,
            SymmetryTransform::Scale => q.clone(),
            SymmetryTransform::Rescale { split } => flip_tail(q, *split),
        }
    }

    /// `∂_s Q'` at `s = 0`.
    pub fn velocity_generator(&self, _q: &Vector, q_dot: &Vector) -> Vector {
        match self {
            SymmetryTransform::Translation { .. } => Vector::zeros(q_dot.len()),
            SymmetryTransform::Rotation { generator } => generator * q_dot,
            SymmetryTransform::Scale => q_dot.clone(),
            SymmetryTransform::Rescale { split } => flip_tail(q_dot, *split),
        }
    }
}

fn rescale(q: &Vector, split: usize, a: f64) -> Vector {
    let mut out = q.clone();
    for (i, v) in out.iter_mut().enumerate() {
        if i < split {
            *v *= a;
        } else {
            *v /= a;
        }
    }
    out
}

fn flip_tail(q: &Vector, split: usize) -> Vector {
    let mut out = q.clone();
    out.rows_mut(split, q.len() - split).neg_mut();
    out
}

/// A random skew-symmetric matrix with entries in `[-1, 1]`.
pub fn random_skew<R: Rng>(dim: usize, rng: &mut R) -> Matrix {
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = rng.random_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    a
}

/// `Δ_h = ∇h(q + e^{-alpha} q') - ∇h(q)`.
pub fn delta_h(metric: &Metric, q: &Vector, q_dot: &Vector, alpha_t: f64) -> Result<Vector> {
    metric.check_domain(q)?;
    let step = q_dot * (-alpha_t).exp();
    let y = q + &step;
    metric.check_domain(&y)?;
    Ok(match metric.kind() {
        MetricKind::Euclidean => step,
        MetricKind::QuadraticForm { a, .. } => a * step,
        MetricKind::NegativeEntropy => step.zip_map(q, |d, x| (d / x).ln_1p()),
    })
}

/// `<Δ_h, ∂_s Q>`
pub fn noether_charge(
    metric: &Metric,
    transform: &SymmetryTransform,
    q: &Vector,
    q_dot: &Vector,
    alpha_t: f64,
) -> Result<f64> {
    transform.check_dim(q)?;
    Ok(delta_h(metric, q, q_dot, alpha_t)?.dot(&transform.generator(q)))
}

/// `∂_s T_h` at `s = 0` by central differences in `s` of the transported kinetic energy.
pub fn kinetic_asymmetry(
    metric: &Metric,
    transform: &SymmetryTransform,
    q: &Vector,
    q_dot: &Vector,
    alpha_t: f64,
) -> Result<f64> {
    let energy = |s: f64| -> Result<f64> {
        let qs = transform.apply(q, s)?;
        let vs = transform.transport_velocity(q_dot, s)?;
        kinetic_energy(metric, &qs, &vs, alpha_t)
    };
    Ok((energy(S_STEP)? - energy(-S_STEP)?) / (2.0 * S_STEP))
}

/// Closed form of `∂_s T_h`: dynamic asymmetry plus the non-Euclidean term.
/// Reduces to `e^{-alpha} <q', ∂_s Q'>` for the Euclidean metric.
pub fn kinetic_asymmetry_analytic(
    metric: &Metric,
    transform: &SymmetryTransform,
    q: &Vector,
    q_dot: &Vector,
    alpha_t: f64,
) -> Result<f64> {
    let terms = asymmetry_terms(metric, transform, q, q_dot, alpha_t)?;
    Ok(terms.dynamic_asymmetry + terms.noneuclid_term)
}

struct AsymmetryTerms {
    charge: f64,
    dynamic_asymmetry: f64,
    noneuclid_term: f64,
}

fn asymmetry_terms(
    metric: &Metric,
    transform: &SymmetryTransform,
    q: &Vector,
    q_dot: &Vector,
    alpha_t: f64,
) -> Result<AsymmetryTerms> {
    transform.check_dim(q)?;
    let delta = delta_h(metric, q, q_dot, alpha_t)?;
    let gen = transform.generator(q);
    let vgen = transform.velocity_generator(q, q_dot);
    let noneuclid = if metric.is_euclidean() {
        0.0
    } else {
        let curvature = metric.hessian_vec(q, q_dot)? * (-alpha_t).exp();
        alpha_t.exp() * (&delta - curvature).dot(&gen)
    };
    Ok(AsymmetryTerms {
        charge: delta.dot(&gen),
        dynamic_asymmetry: delta.dot(&vgen),
        noneuclid_term: noneuclid,
    })
}

/// Classification threshold for "symmetric" kinetic energy.
pub const SYMMETRIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Cell {
    pub metric: String,
    pub transform: SymmetryKind,
    /// Largest `|∂_s T_h|` over the sampled states.
    pub max_abs: f64,
    pub median_abs: f64,
    pub symmetric: bool,
}

/// Samples random states per (metric, transform) pair and classifies the
/// kinetic energy as symmetric iff `|∂_s T_h| <= 1e-8` at every sample.
pub fn table2_report<R: Rng>(
    metrics: &[Metric],
    transforms: &[SymmetryTransform],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<Table2Cell>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("table2 needs at least one sample".into()));
    }
    let mut cells = Vec::with_capacity(metrics.len() * transforms.len());
    for metric in metrics {
        for transform in transforms {
            let mut values = Vec::with_capacity(samples);
            let mut attempts = 0usize;
            while values.len() < samples {
                attempts += 1;
                if attempts > 100 * samples {
                    return Err(Error::Domain(format!(
                        "could not sample valid states for {} x {}",
                        metric.name(),
                        transform.kind().name()
                    )));
                }
                let (q, q_dot, alpha) = sample_state(metric, rng);
                match kinetic_asymmetry(metric, transform, &q, &q_dot, alpha) {
                    Ok(v) => values.push(v.abs()),
                    Err(Error::Domain(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            values.sort_by(f64::total_cmp);
            let max_abs = *values.last().unwrap();
            cells.push(Table2Cell {
                metric: metric.name().to_string(),
                transform: transform.kind(),
                max_abs,
                median_abs: values[values.len() / 2],
                symmetric: max_abs <= SYMMETRIC_TOL,
            });
        }
    }
    Ok(cells)
}

fn sample_state<R: Rng>(metric: &Metric, rng: &mut R) -> (Vector, Vector, f64) {
    let d = metric.dim();
    let alpha = rng.random_range(-0.5..0.5);
    match metric.kind() {
        MetricKind::NegativeEntropy => (
            Vector::from_fn(d, |_, _| rng.random_range(0.5..2.0)),
            Vector::from_fn(d, |_, _| rng.random_range(-0.3..0.3)),
            alpha,
        ),
        _ => (
            Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)),
            Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
            alpha,
        ),
    }
}

/// Terms of Noether's learning dynamics at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoetherObservables {
    pub t: f64,
    pub charge: f64,
    pub charge_rate: f64,
    pub dissipation: f64,
    pub dynamic_asymmetry: f64,
    pub noneuclid_term: f64,
    /// `charge_rate + dissipation - dynamic_asymmetry - noneuclid_term`
    pub residual: f64,
}

/// Evaluates every term of the charge balance along a sampled trajectory.
///
/// The charge derivative is taken by fourth-order centered differences on
/// the stored grid (one-sided fourth-order stencils at the two ends), so the
/// check stays independent of the equations that produced the trajectory.
pub fn noether_residual(
    metric: &Metric,
    schedule: &BregmanSchedule,
    transform: &SymmetryTransform,
    trajectory: &Trajectory,
) -> Result<Vec<NoetherObservables>> {
    let n = trajectory.len();
    if n < 3 {
        return Err(Error::Grid(format!("need at least 3 samples, got {n}")));
    }
    let dt = trajectory.step()?;
    let mut partial = Vec::with_capacity(n);
    for i in 0..n {
        let t = trajectory.times[i];
        let s = schedule.at(t)?;
        let terms = asymmetry_terms(metric, transform, &trajectory.q[i], &trajectory.qdot[i], s.alpha)?;
        partial.push((t, s.gamma_dot, terms));
    }
    let charges: Vec<f64> = partial.iter().map(|(_, _, c)| c.charge).collect();
    let rates = grid_derivative(&charges, dt);
    Ok(partial
        .into_iter()
        .zip(rates)
        .map(|((t, gamma_dot, terms), rate)| {
            let dissipation = gamma_dot * terms.charge;
            NoetherObservables {
                t,
                charge: terms.charge,
                charge_rate: rate,
                dissipation,
                dynamic_asymmetry: terms.dynamic_asymmetry,
                noneuclid_term: terms.noneuclid_term,
                residual: rate + dissipation - terms.dynamic_asymmetry - terms.noneuclid_term,
            }
        })
        .collect())
}

/// Derivative of uniformly sampled data: fourth order with five or more
/// samples, second order otherwise.
pub fn grid_derivative(y: &[f64], dt: f64) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    if n < 5 {
        for i in 0..n {
            d[i] = if i == 0 {
                (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt)
            } else if i == n - 1 {
                (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dt)
            } else {
                (y[i + 1] - y[i - 1]) / (2.0 * dt)
            };
        }
        return d;
    }
    let h12 = 12.0 * dt;
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / h12;
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / h12;
    for i in 2..n - 2 {
        d[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / h12;
    }
    d[n - 2] = (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]) / h12;
    d[n - 1] = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4] + 3.0 * y[n - 5]) / h12;
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn skew3() -> Matrix {
        Matrix::from_row_slice(3, 3, &[0.0, 0.5, -1.0, -0.5, 0.0, 0.3, 1.0, -0.3, 0.0])
    }

    #[test]
    fn identity_at_zero_parameter() {
        let q = v(&[0.3, -1.0, 2.0]);
        for t in [
            SymmetryTransform::translation(v(&[1.0, 1.0, 0.0])).unwrap(),
            SymmetryTransform::rotation(skew3()).unwrap(),
            SymmetryTransform::Scale,
            SymmetryTransform::Rescale { split: 1 },
        ] {
            assert_eq!(t.apply(&q, 0.0).unwrap(), q);
        }
    }

    #[test]
    fn generators_match_finite_differences() {
        let q = v(&[0.3, -1.0, 2.0]);
        let eps = 1e-6;
        for t in [
            SymmetryTransform::translation(v(&[1.0, 2.0, 0.0])).unwrap(),
            SymmetryTransform::rotation(skew3()).unwrap(),
            SymmetryTransform::Scale,
            SymmetryTransform::Rescale { split: 2 },
        ] {
            let fd = (t.apply(&q, eps).unwrap() - t.apply(&q, -eps).unwrap()) / (2.0 * eps);
            let g = t.generator(&q);
            assert!((fd - &g).norm() <= 1e-6 * g.norm(), "{:?}", t.kind());
        }
    }

    #[test]
    fn rotation_preserves_norm_and_rejects_non_skew() {
        let t = SymmetryTransform::rotation(skew3()).unwrap();
        let q = v(&[0.3, -1.0, 2.0]);
        assert_relative_eq!(t.apply(&q, 0.7).unwrap().norm(), q.norm(), max_relative = 1e-13);
        assert!(SymmetryTransform::rotation(Matrix::identity(3, 3)).is_err());
    }

    #[test]
    fn delta_h_examples() {
        let e = Metric::euclidean(2);
        assert_eq!(delta_h(&e, &v(&[1.0, 1.0]), &v(&[3.0, 0.0]), 0.0).unwrap(), v(&[3.0, 0.0]));
        let ent = Metric::negative_entropy(1);
        assert_eq!(delta_h(&ent, &v(&[0.4]), &v(&[0.0]), 0.3).unwrap(), v(&[0.0]));
        let d = delta_h(&ent, &v(&[1.0]), &v(&[1.0]), 0.0).unwrap();
        assert_relative_eq!(d[0], std::f64::consts::LN_2, epsilon = 1e-15);
        assert!(matches!(delta_h(&ent, &v(&[1.0]), &v(&[-2.0]), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn charge_examples() {
        let e = Metric::euclidean(2);
        let c = noether_charge(&e, &SymmetryTransform::Scale, &v(&[1.0, 1.0]), &v(&[1.0, -1.0]), 0.0).unwrap();
        assert_eq!(c, 0.0);
        let tr = SymmetryTransform::translation(v(&[1.0, 0.0])).unwrap();
        assert_eq!(noether_charge(&e, &tr, &v(&[0.0, 0.0]), &v(&[2.0, 5.0]), 0.0).unwrap(), 2.0);
        let rs = SymmetryTransform::Rescale { split: 1 };
        assert_eq!(noether_charge(&e, &rs, &v(&[2.0, 1.0]), &v(&[1.0, 1.0]), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn euclidean_asymmetry_examples() {
        let e = Metric::euclidean(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tr = SymmetryTransform::translation(v(&[0.6, 0.8])).unwrap();
        let rot = SymmetryTransform::rotation(Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        for _ in 0..20 {
            let q = Vector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let qd = Vector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            assert!(kinetic_asymmetry(&e, &tr, &q, &qd, 0.2).unwrap().abs() <= 1e-8);
            assert!(kinetic_asymmetry(&e, &rot, &q, &qd, 0.2).unwrap().abs() <= 1e-8);
        }
        let scale = kinetic_asymmetry(&e, &SymmetryTransform::Scale, &v(&[0.5, 2.0]), &v(&[1.0, 1.0]), 0.0).unwrap();
        assert_relative_eq!(scale, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn analytic_and_finite_difference_asymmetry_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
        let metrics = [Metric::euclidean(3), Metric::quadratic_form(a).unwrap(), Metric::negative_entropy(3)];
        let transforms = [
            SymmetryTransform::translation(v(&[1.0, -2.0, 0.5])).unwrap(),
            SymmetryTransform::rotation(skew3()).unwrap(),
            SymmetryTransform::Scale,
            SymmetryTransform::Rescale { split: 1 },
        ];
        for m in &metrics {
            for t in &transforms {
                for _ in 0..10 {
                    let q = Vector::from_fn(3, |_, _| rng.random_range(0.5..2.0));
                    let qd = Vector::from_fn(3, |_, _| rng.random_range(-0.3..0.3));
                    let fd = kinetic_asymmetry(m, t, &q, &qd, 0.1).unwrap();
                    let an = kinetic_asymmetry_analytic(m, t, &q, &qd, 0.1).unwrap();
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{} {:?}: {fd} vs {an}", m.name(), t.kind());
                }
            }
        }
    }

    #[test]
    fn table2_rejects_zero_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(table2_report(&[Metric::euclidean(2)], &[SymmetryTransform::Scale], 0, &mut rng).is_err());
    }

    #[test]
    fn grid_derivative_orders() {
        // exact for quartics in the interior and at the ends
        let dt = 0.1;
        let y: Vec<f64> = (0..9).map(|i| (i as f64 * dt).powi(4)).collect();
        let d = grid_derivative(&y, dt);
        for (i, di) in d.iter().enumerate() {
            let t = i as f64 * dt;
            assert_relative_eq!(*di, 4.0 * t.powi(3), epsilon = 1e-12);
        }
        let short = grid_derivative(&[0.0, 1.0, 4.0], 1.0);
        assert_eq!(short, vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn residual_needs_three_samples() {
        let traj = Trajectory::new(vec![0.0, 0.1], vec![v(&[1.0]); 2], vec![v(&[0.0]); 2]).unwrap();
        let err = noether_residual(&Metric::euclidean(1), &BregmanSchedule::natural(1.0, 1.0), &SymmetryTransform::Scale, &traj);
        assert!(matches!(err, Err(Error::Grid(_))));
    }

    #[test]
    fn resting_trajectory_has_zero_terms() {
        let n = 6;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let traj = Trajectory::new(times, vec![v(&[1.0, 2.0]); n], vec![v(&[0.0, 0.0]); n]).unwrap();
        let obs = noether_residual(
            &Metric::negative_entropy(2),
            &BregmanSchedule::natural(1.0, 1.0),
            &SymmetryTransform::Scale,
            &traj,
        )
        .unwrap();
        for o in obs {
            assert_eq!((o.charge, o.dissipation, o.dynamic_asymmetry, o.residual), (0.0, 0.0, 0.0, 0.0));
            assert!(o.noneuclid_term.abs() == 0.0);
        }
    }
}
