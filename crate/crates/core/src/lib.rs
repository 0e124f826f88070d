//! Lagrangian models of learning rules.
//!
//! Discrete optimizers are compared with continuous-time equations of motion
//! derived from a Bregman Lagrangian. Symmetries of the loss give Noether
//! charges whose dynamics, when the kinetic energy breaks the symmetry, yield
//! closed-form effective learning-rate schedules.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod symmetry;

pub use error::{Error, Result};
pub use geometry::{BregmanSchedule, Matrix, Metric, MetricKind, Vector};
pub use losses::Loss;
pub use symmetry::{SymmetryKind, SymmetryTransform};
