//! One module per experiment. Every experiment is a pure function of its
//! configuration, so reruns with the same seed write identical tables.

pub mod conservation;
pub mod flagship;
pub mod modified;
pub mod residual;
pub mod rmsprop;
pub mod table2;

use noetherdyn_core::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::{Artifacts, HarnessError};

pub fn execute(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    match config.kind {
        ExperimentKind::Table2 => table2::run(config),
        ExperimentKind::NoetherResidual => residual::run(config),
        ExperimentKind::Conservation => conservation::run(config),
        ExperimentKind::ModifiedEq => modified::run(config),
        ExperimentKind::BnEffectiveLr => flagship::run_effective_lr(config),
        ExperimentKind::SteadyState => flagship::run_steady_state(config),
        ExperimentKind::RmspropEquiv => rmsprop::run(config),
    }
}

pub(crate) fn rng(config: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed)
}

/// Uniformly random unit vector.
pub(crate) fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// `diag(0, 1/(d-1), ..., 1)`.
pub(crate) fn linspace_diag(dim: usize) -> Matrix {
    let d = dim.max(2);
    Matrix::from_diagonal(&Vector::from_fn(d, |i, _| i as f64 / (d - 1) as f64))
}

/// Least-squares slope of `log y` against `log x`.
pub(crate) fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

pub(crate) fn steps_for(t1: f64, dt: f64) -> usize {
    (t1 / dt).round() as usize
}
