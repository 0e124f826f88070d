//! Residual of the charge balance along integrated Bregman Euler-Lagrange
//! trajectories, for every metric and symmetry on a loss with that symmetry.

use noetherdyn_core::continuous::{eom_bregman, integrate_rk4};
use noetherdyn_core::geometry::BregmanSchedule;
use noetherdyn_core::losses::RadialProfile;
use noetherdyn_core::symmetry::{noether_residual, NoetherObservables, SymmetryTransform};
use noetherdyn_core::{Loss, Matrix, Metric, Vector};

use crate::config::ExperimentConfig;
use crate::output::{Chart, ChannelTable, TextTable};
use crate::verdict::Verdict;
use crate::{Artifacts, HarnessError};

const DIM: usize = 4;

/// Worst absolute stencil weight sum of the charge derivative (one-sided ends).
const STENCIL_WEIGHT: f64 = 128.0 / 12.0;

pub struct Cell {
    pub metric: Metric,
    pub transform: SymmetryTransform,
    pub loss: Loss,
    pub q0: Vector,
    pub v0: Vector,
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

pub fn metric_form() -> Matrix {
    Matrix::from_row_slice(
        DIM,
        DIM,
        &[2.0, 0.3, 0.0, 0.1, 0.3, 1.5, 0.2, 0.0, 0.0, 0.2, 1.0, -0.1, 0.1, 0.0, -0.1, 0.8],
    )
}

fn rotation_generator() -> Matrix {
    Matrix::from_row_slice(
        DIM,
        DIM,
        &[0.0, 1.0, -0.5, 0.2, -1.0, 0.0, 0.3, 0.7, 0.5, -0.3, 0.0, 0.4, -0.2, -0.7, -0.4, 0.0],
    )
}

/// Compatible loss and initial state for each cell. Euclidean and quadratic-form
/// states are fast enough for the integrator error to dominate rounding; entropy
/// states stay inside the positive orthant.
pub fn cells() -> Vec<Cell> {
    let metrics = [
        Metric::euclidean(DIM),
        Metric::quadratic_form(metric_form()).expect("positive definite"),
        Metric::negative_entropy(DIM),
    ];
    let mut out = Vec::new();
    for metric in metrics {
        let entropy = metric.name() == "negative-entropy";
        let rayleigh = Loss::rayleigh(Matrix::from_diagonal(&v(&[0.0, 2.0, 5.0, 10.0]))).unwrap();
        let softmax = Loss::softmax_xent(DIM, 1).unwrap();
        let two_layer = Loss::two_layer_linear(vec![1.0, 2.0, -0.5], vec![1.5, 3.0, -0.7], 2).unwrap();
        let (well, well_start, well_velocity) = if entropy {
            (
                Loss::radial_well(RadialProfile::Quartic { radius: 4.0 }),
                v(&[2.0, 2.5, 1.5, 1.8]),
                v(&[0.3, -0.2, 0.25, -0.1]),
            )
        } else {
            (
                Loss::radial_well(RadialProfile::Harmonic { stiffness: 400.0 }),
                v(&[1.2, -0.4, 0.6, 0.9]),
                v(&[5.0, -3.0, 2.0, 4.0]),
            )
        };
        let setups = if entropy {
            vec![
                (SymmetryTransform::translation(Vector::from_element(DIM, 1.0)).unwrap(), softmax, v(&[1.5, 1.5, 1.2, 2.0]), v(&[0.8, -0.6, 0.5, -1.2])),
                (SymmetryTransform::rotation(rotation_generator()).unwrap(), well, well_start, well_velocity),
                (SymmetryTransform::Scale, rayleigh, v(&[1.5, 1.2, 1.0, 0.8]), v(&[0.2, -0.3, 0.3, -0.2])),
                (SymmetryTransform::Rescale { split: 2 }, two_layer, v(&[1.0, 0.8, 1.2, 0.6]), v(&[0.2, 0.3, -0.3, 0.2])),
            ]
        } else {
            vec![
                (SymmetryTransform::translation(Vector::from_element(DIM, 1.0)).unwrap(), softmax, v(&[0.5, -0.3, 0.2, 0.1]), v(&[3.0, -4.0, 1.0, 2.5])),
                (SymmetryTransform::rotation(rotation_generator()).unwrap(), well, well_start, well_velocity),
                (SymmetryTransform::Scale, rayleigh, v(&[0.6, -0.8, 0.5, 0.3]), v(&[1.0, 0.5, -1.5, 2.0])),
                (SymmetryTransform::Rescale { split: 2 }, two_layer, v(&[1.0, -0.5, 0.8, 1.2]), v(&[1.5, 1.0, -2.0, 0.5])),
            ]
        };
        for (transform, loss, q0, v0) in setups {
            out.push(Cell { metric: metric.clone(), transform, loss, q0, v0 });
        }
    }
    out
}

pub struct CellRun {
    pub observables: Vec<NoetherObservables>,
    pub max_residual: f64,
    /// Rounding level of the residual: charge differences and term sums at machine precision.
    pub rounding_floor: f64,
}

pub fn measure(cell: &Cell, schedule: BregmanSchedule, t1: f64, dt: f64) -> Result<CellRun, HarnessError> {
    let sys = eom_bregman(cell.metric.clone(), schedule, cell.loss.clone());
    let traj = integrate_rk4(&sys, &cell.q0, &cell.v0, 0.0, t1, dt)?;
    let observables = noether_residual(&cell.metric, &schedule, &cell.transform, &traj)?;
    let max_residual = observables.iter().map(|o| o.residual.abs()).fold(0.0, f64::max);
    let max_charge = observables.iter().map(|o| o.charge.abs()).fold(0.0, f64::max);
    let max_term = observables
        .iter()
        .map(|o| o.dissipation.abs().max(o.dynamic_asymmetry.abs()).max(o.noneuclid_term.abs()))
        .fold(0.0, f64::max);
    let rounding_floor = f64::EPSILON * (STENCIL_WEIGHT * max_charge / dt + 4.0 * max_term);
    Ok(CellRun { observables, max_residual, rounding_floor })
}

/// The halving ratio must reach `min_ratio` unless the residual at the coarse
/// step is already at the rounding floor. Truncation error only shrinks with
/// the step, so such a cell has no observable integrator error to halve.
pub fn halving_verdict(id: &str, ratio: f64, min_ratio: f64, coarse: &CellRun) -> Verdict {
    let floor_limited = coarse.max_residual <= coarse.rounding_floor;
    let tolerance = if floor_limited {
        format!(">={min_ratio:e} or rounding-floor-limited (floor {:e})", coarse.rounding_floor)
    } else {
        format!(">={min_ratio:e}")
    };
    Verdict::new(format!("C2.{id}.halving_ratio"), ratio >= min_ratio || floor_limited, ratio, tolerance)
}

pub fn run(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    let dt = config.require("dt")?;
    let t1 = config.require("t1")?;
    let mass = config.get_or("mass", 1.0)?;
    let friction = config.get_or("friction", 1.0)?;
    let tol = config.get_or("residual_tol", 1e-4)?;
    let min_ratio = config.get_or("min_ratio", 8.0)?;
    if !(dt > 0.0 && t1 > 4.0 * dt) {
        return Err(HarnessError::Config("need dt > 0 and t1 > 4 dt".into()));
    }
    let schedule = BregmanSchedule::natural(mass, friction);
    let mut art = Artifacts::default();
    let mut summary = TextTable {
        name: "residual_summary".into(),
        header: ["metric", "transform", "max_residual", "max_residual_half_step", "ratio", "rounding_floor"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: Vec::new(),
    };
    for cell in cells() {
        let id = format!("{}.{}", cell.metric.name(), cell.transform.kind().name());
        let coarse = measure(&cell, schedule, t1, dt)?;
        let fine = measure(&cell, schedule, t1, dt / 2.0)?;
        let ratio = coarse.max_residual / fine.max_residual;
        summary.rows.push(vec![
            cell.metric.name().into(),
            cell.transform.kind().name().into(),
            format!("{:e}", coarse.max_residual),
            format!("{:e}", fine.max_residual),
            format!("{ratio}"),
            format!("{:e}", coarse.rounding_floor),
        ]);
        art.verdicts.push(Verdict::at_most(format!("C2.{id}.residual"), coarse.max_residual, tol));
        art.verdicts.push(halving_verdict(&id, ratio, min_ratio, &coarse));

        let obs = &coarse.observables;
        let times: Vec<f64> = obs.iter().map(|o| o.t).collect();
        let col = |f: fn(&NoetherObservables) -> f64| obs.iter().map(f).collect::<Vec<f64>>();
        let table = ChannelTable::new(&format!("residual_{}", id.replace('.', "_")), times.clone())
            .column("charge", col(|o| o.charge))
            .column("charge_rate", col(|o| o.charge_rate))
            .column("dissipation", col(|o| o.dissipation))
            .column("dynamic_asymmetry", col(|o| o.dynamic_asymmetry))
            .column("noneuclid_term", col(|o| o.noneuclid_term))
            .column("residual", col(|o| o.residual));
        let fine_t: Vec<f64> = fine.observables.iter().map(|o| o.t).collect();
        let fine_r: Vec<f64> = fine.observables.iter().map(|o| o.residual.abs()).collect();
        art.charts.push(
            Chart::new(&table.name, &format!("charge balance residual, {id}"), "t", "|residual|")
                .line(&format!("dt = {dt}"), &times, &col(|o| o.residual.abs()))
                .line(&format!("dt = {}", dt / 2.0), &fine_t, &fine_r)
                .log_scale(),
        );
        art.tables.push(table.decimate(10));
    }
    art.text_tables.push(summary);
    Ok(art)
}
