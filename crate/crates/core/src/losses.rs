//! Toy objectives with exact parameter-space symmetries.
//!
//! Normalization layers are stood in for by exactly scale-invariant losses
//! (Rayleigh quotient, sphere-composed losses); ReLU rescale symmetry by a
//! diagonal two-layer linear chain.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Matrix, Vector};
use crate::symmetry::{SymmetryKind, SymmetryTransform};

/// Norm below which a scale-invariant loss is considered to sit at the origin.
pub const ORIGIN_TOL: f64 = 1e-12;

/// Radial profile `v(r)` of a rotation-invariant well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    /// `v(r) = stiffness r^2 / 2`
    Harmonic { stiffness: f64 },
    /// `v(r) = (r^2 - radius^2)^2 / 4`
    Quartic { radius: f64 },
}

impl RadialProfile {
    fn value(&self, r2: f64) -> f64 {
        match *self {
            RadialProfile::Harmonic { stiffness } => 0.5 * stiffness * r2,
            RadialProfile::Quartic { radius } => 0.25 * (r2 - radius * radius).powi(2),
        }
    }

    /// `v'(r) / r`, finite at the origin for both profiles.
    fn radial_factor(&self, r2: f64) -> f64 {
        match *self {
            RadialProfile::Harmonic { stiffness } => stiffness,
            RadialProfile::Quartic { radius } => r2 - radius * radius,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Loss {
    /// `<q, A q> / |q|^2`
    RayleighQuotient { a: Matrix },
    /// `base(q / |q|)`
    NormalizedComposite { base: Box<Loss> },
    /// `sum_j (<q1, q2> x_j - y_j)^2 / 2` with `q = (q1, q2)` split at `split`.
    TwoLayerLinear { x: Vec<f64>, y: Vec<f64>, split: usize },
    /// Cross-entropy of `softmax(q)` against a fixed label.
    SoftmaxXent { classes: usize, label: usize },
    RadialWell { profile: RadialProfile },
    /// `<q, A q> / 2 - <b, q>`
    Quadratic { a: Matrix, b: Vector },
}

impl Loss {
    pub fn rayleigh(a: Matrix) -> Result<Self> {
        check_symmetric(&a)?;
        Ok(Loss::RayleighQuotient { a })
    }

    pub fn normalized(base: Loss) -> Self {
        Loss::NormalizedComposite { base: Box::new(base) }
    }

    pub fn two_layer_linear(x: Vec<f64>, y: Vec<f64>, split: usize) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::InvalidArgument("inputs and targets must be non-empty and aligned".into()));
        }
        if split == 0 {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        Ok(Loss::TwoLayerLinear { x, y, split })
    }

    pub fn softmax_xent(classes: usize, label: usize) -> Result<Self> {
        if label >= classes || classes < 2 {
            return Err(Error::InvalidArgument(format!("label {label} invalid for {classes} classes")));
        }
        Ok(Loss::SoftmaxXent { classes, label })
    }

    pub fn radial_well(profile: RadialProfile) -> Self {
        Loss::RadialWell { profile }
    }

    pub fn quadratic(a: Matrix, b: Vector) -> Result<Self> {
        check_symmetric(&a)?;
        if b.len() != a.nrows() {
            return Err(Error::InvalidArgument("linear term has wrong dimension".into()));
        }
        Ok(Loss::Quadratic { a, b })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::RayleighQuotient { .. } => "rayleigh-quotient",
            Loss::NormalizedComposite { .. } => "normalized-composite",
            Loss::TwoLayerLinear { .. } => "two-layer-linear",
            Loss::SoftmaxXent { .. } => "softmax-xent",
            Loss::RadialWell { .. } => "radial-well",
            Loss::Quadratic { .. } => "quadratic",
        }
    }

    /// Fixed parameter dimension, when the loss has one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Loss::RayleighQuotient { a } | Loss::Quadratic { a, .. } => Some(a.nrows()),
            Loss::NormalizedComposite { base } => base.dim(),
            Loss::TwoLayerLinear { split, .. } => Some(2 * split),
            Loss::SoftmaxXent { classes, .. } => Some(*classes),
            Loss::RadialWell { .. } => None,
        }
    }

    pub fn is_scale_invariant(&self) -> bool {
        matches!(self, Loss::RayleighQuotient { .. } | Loss::NormalizedComposite { .. })
    }

    fn check_input(&self, q: &Vector) -> Result<()> {
        if let Some(d) = self.dim() {
            if q.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "{} expects dimension {d}, got {}",
                    self.name(),
                    q.len()
                )));
            }
        }
        if self.is_scale_invariant() && q.norm() <= ORIGIN_TOL {
            return Err(Error::singular(
                "origin is a singular point of scale-invariant losses",
            ));
        }
        Ok(())
    }

    pub fn value(&self, q: &Vector) -> Result<f64> {
        self.check_input(q)?;
        Ok(match self {
            Loss::RayleighQuotient { a } => q.dot(&(a * q)) / q.norm_squared(),
            Loss::NormalizedComposite { base } => base.value(&(q / q.norm()))?,
            Loss::TwoLayerLinear { x, y, split } => {
                let w = chain_weight(q, *split);
                0.5 * x.iter().zip(y).map(|(xj, yj)| (w * xj - yj).powi(2)).sum::<f64>()
            }
            Loss::SoftmaxXent { label, .. } => log_sum_exp(q) - q[*label],
            Loss::RadialWell { profile } => profile.value(q.norm_squared()),
            Loss::Quadratic { a, b } => 0.5 * q.dot(&(a * q)) - b.dot(q),
        })
    }

    pub fn grad(&self, q: &Vector) -> Result<Vector> {
        self.check_input(q)?;
        Ok(match self {
            Loss::RayleighQuotient { a } => {
                let r2 = q.norm_squared();
                let aq = a * q;
                let f = q.dot(&aq) / r2;
                (aq - q * f) * (2.0 / r2)
            }
            Loss::NormalizedComposite { base } => {
                let r = q.norm();
                let unit = q / r;
                let g = base.grad(&unit)?;
                let tangential = &g - &unit * unit.dot(&g);
                tangential / r
            }
            Loss::TwoLayerLinear { x, y, split } => {
                let w = chain_weight(q, *split);
                let s: f64 = x.iter().zip(y).map(|(xj, yj)| (w * xj - yj) * xj).sum();
                let mut g = Vector::zeros(q.len());
                for i in 0..*split {
                    g[i] = s * q[split + i];
                    g[split + i] = s * q[i];
                }
                g
            }
            Loss::SoftmaxXent { label, .. } => {
                let mut p = softmax(q);
                p[*label] -= 1.0;
                p
            }
            Loss::RadialWell { profile } => q * profile.radial_factor(q.norm_squared()),
            Loss::Quadratic { a, b } => a * q - b,
        })
    }

    /// Gradient with respect to normalized weights, `∇f` evaluated at `q / |q|`.
    pub fn grad_on_sphere(&self, q: &Vector) -> Result<Vector> {
        self.check_input(q)?;
        self.grad(&(q / q.norm()))
    }

    /// Symmetry kinds under which this loss is exactly invariant.
    pub fn symmetry_tags(&self) -> Vec<SymmetryKind> {
        match self {
            Loss::RayleighQuotient { .. } | Loss::NormalizedComposite { .. } => vec![SymmetryKind::Scale],
            Loss::TwoLayerLinear { .. } => vec![SymmetryKind::Rescale],
            Loss::SoftmaxXent { .. } => vec![SymmetryKind::Translation],
            Loss::RadialWell { .. } => vec![SymmetryKind::Rotation],
            Loss::Quadratic { .. } => vec![],
        }
    }

    /// Whether `transform`, including its parameters, is a declared exact symmetry.
    pub fn is_invariant_under(&self, transform: &SymmetryTransform) -> bool {
        if !self.symmetry_tags().contains(&transform.kind()) {
            return false;
        }
        match (self, transform) {
            (Loss::TwoLayerLinear { split, .. }, SymmetryTransform::Rescale { split: s }) => split == s,
            (Loss::SoftmaxXent { classes, .. }, SymmetryTransform::Translation { direction }) => {
                let uniform = 1.0 / (*classes as f64).sqrt();
                direction.len() == *classes
                    && direction.iter().all(|v| (v - uniform).abs() < 1e-12)
            }
            _ => true,
        }
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if (a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
        return Err(Error::InvalidArgument("matrix must be symmetric".into()));
    }
    Ok(())
}

fn chain_weight(q: &Vector, split: usize) -> f64 {
    (0..split).map(|i| q[i] * q[split + i]).sum()
}

fn log_sum_exp(q: &Vector) -> f64 {
    let top = q.max();
    top + q.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

fn softmax(q: &Vector) -> Vector {
    let top = q.max();
    let e = q.map(|v| (v - top).exp());
    let z = e.sum();
    e / z
}

/// Outcome of sampling a declared symmetry of a loss.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub samples: usize,
    /// Largest `|f(Q(q, s)) - f(q)| / (1 + |f(q)|)` seen.
    pub max_value_violation: f64,
    /// Largest `|<∇f(q), ∂_s Q>| / (1 + |f(q)|)` seen.
    pub max_orthogonality_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Samples random `q` and `s ∈ [-0.5, 0.5]` and checks exact invariance and
/// orthogonality of the gradient to the generator.
pub fn check_symmetry<R: Rng>(
    loss: &Loss,
    transform: &SymmetryTransform,
    samples: usize,
    rng: &mut R,
) -> Result<SymmetryReport> {
    const TOL: f64 = 1e-10;
    if !loss.is_invariant_under(transform) {
        return Err(Error::Contract(format!(
            "{} is not tagged with {:?}",
            loss.name(),
            transform.kind()
        )));
    }
    let dim = loss.dim().or(transform.dim()).unwrap_or(3);
    let mut worst_value = 0.0f64;
    let mut worst_orth = 0.0f64;
    for _ in 0..samples {
        let q = Vector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
        let s = rng.random_range(-0.5..=0.5);
        let f = loss.value(&q)?;
        let moved = loss.value(&transform.apply(&q, s)?)?;
        let scale = 1.0 + f.abs();
        worst_value = worst_value.max((moved - f).abs() / scale);
        let orth = loss.grad(&q)?.dot(&transform.generator(&q));
        worst_orth = worst_orth.max(orth.abs() / scale);
    }
    Ok(SymmetryReport {
        samples,
        max_value_violation: worst_value,
        max_orthogonality_violation: worst_orth,
        tolerance: TOL,
        passed: worst_value <= TOL && worst_orth <= TOL,
    })
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

    fn rq() -> Loss {
        Loss::rayleigh(Matrix::from_diagonal(&v(&[1.0, 2.0]))).unwrap()
    }

    #[test]
    fn rayleigh_values() {
        assert_eq!(rq().value(&v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(rq().value(&v(&[2.0, 0.0])).unwrap(), 1.0);
        assert_eq!(rq().grad(&v(&[1.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn softmax_uniform_logits() {
        let l = Loss::softmax_xent(2, 0).unwrap();
        assert_relative_eq!(l.value(&v(&[0.0, 0.0])).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn quadratic_gradient() {
        let l = Loss::quadratic(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        assert_eq!(l.grad(&v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));
    }

    #[test]
    fn origin_is_singular_for_scale_invariant_losses() {
        let err = rq().value(&v(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }));
        assert!(Loss::normalized(rq()).grad(&v(&[1e-13, 0.0])).is_err());
    }

    #[test]
    fn scale_invariant_gradient_laws() {
        let q = v(&[0.3, -1.2]);
        for l in [rq(), Loss::normalized(Loss::quadratic(Matrix::from_diagonal(&v(&[1.0, 3.0])), v(&[0.5, 0.1])).unwrap())] {
            let g = l.grad(&q).unwrap();
            assert!(g.dot(&q).abs() < 1e-14);
            let g2 = l.grad(&(&q * 2.0)).unwrap();
            assert_relative_eq!(g2.norm(), 0.5 * g.norm(), max_relative = 1e-10);
            let ghat = l.grad_on_sphere(&q).unwrap();
            assert_relative_eq!((ghat / q.norm() - &g).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetry_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = check_symmetry(&rq(), &SymmetryTransform::Scale, 200, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");

        let chain = Loss::two_layer_linear(vec![1.0, -0.5, 2.0], vec![0.3, 0.1, -1.0], 1).unwrap();
        let r = check_symmetry(&chain, &SymmetryTransform::Rescale { split: 1 }, 200, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");

        let sm = Loss::softmax_xent(3, 1).unwrap();
        let t = SymmetryTransform::translation(Vector::from_element(3, 1.0)).unwrap();
        assert!(check_symmetry(&sm, &t, 200, &mut rng).unwrap().passed);

        let well = Loss::radial_well(RadialProfile::Quartic { radius: 1.5 });
        let rot = SymmetryTransform::rotation(Matrix::from_row_slice(3, 3, &[0.0, 1.0, -0.4, -1.0, 0.0, 0.7, 0.4, -0.7, 0.0])).unwrap();
        assert!(check_symmetry(&well, &rot, 200, &mut rng).unwrap().passed);

        let quad = Loss::quadratic(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let err = check_symmetry(&quad, &SymmetryTransform::Scale, 10, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));

        // wrong translation direction is not a declared symmetry
        let skew = SymmetryTransform::translation(v(&[1.0, 0.0, 0.0])).unwrap();
        assert!(check_symmetry(&sm, &skew, 10, &mut rng).is_err());
    }
}
