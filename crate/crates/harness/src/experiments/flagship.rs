//! SGD with momentum and weight decay on a scale-invariant loss, against the
//! closed-form weight-norm schedule and the equilibrium relations.

use noetherdyn_core::closedform::{r2_schedule, steady_angular_speed, steady_radius, GradNormHistory};
use noetherdyn_core::discrete::{step_gd_momentum_wd, OptimizerState};
use noetherdyn_core::Loss;

use super::{linspace_diag, random_direction, rng};
use crate::config::ExperimentConfig;
use crate::output::{Chart, ChannelTable};
use crate::verdict::{compare_channels, Mode, Series, Verdict};
use crate::{Artifacts, HarnessError};

const R2_TOL: f64 = 0.05;
const STEADY_TOL: f64 = 0.10;

pub struct FlagshipRun {
    pub eta: f64,
    pub beta: f64,
    pub k: f64,
    pub times: Vec<f64>,
    pub norm_sq: Vec<f64>,
    /// `|∇f(q/|q|)|^2` at every iterate.
    pub gsq: Vec<f64>,
    /// `|u_{n+1} - u_n|` for unit directions; the last entry repeats the previous one.
    pub angular_step: Vec<f64>,
    pub record_every: usize,
}

impl FlagshipRun {
    /// Start of the comparison window: the kernel time constant `5(1-β)/(4k)`,
    /// capped at a fifth of the run.
    pub fn transient_end(&self) -> f64 {
        let t_end = *self.times.last().unwrap();
        let kernel = if self.k > 0.0 { 5.0 * (1.0 - self.beta) / (4.0 * self.k) } else { f64::INFINITY };
        kernel.min(0.2 * t_end)
    }
}

pub fn flagship(config: &ExperimentConfig) -> Result<FlagshipRun, HarnessError> {
    let eta = config.require("eta")?;
    let beta = config.require("beta")?;
    let k = config.require("wd")?;
    let steps = config.require_count("steps")?;
    let dim = config.count_or("dim", 10)?;
    let r0 = config.get_or("r0", 1.0)?;
    let record_every = config.count_or("record_every", 100)?.max(1);
    if steps < 10 || dim < 2 || !(r0 > 0.0) {
        return Err(HarnessError::Config("need steps >= 10, dim >= 2 and r0 > 0".into()));
    }
    let loss = Loss::rayleigh(linspace_diag(dim))?;
    let mut state = OptimizerState::new(random_direction(dim, &mut rng(config)) * r0);
    let mut run = FlagshipRun {
        eta,
        beta,
        k,
        times: Vec::with_capacity(steps + 1),
        norm_sq: Vec::with_capacity(steps + 1),
        gsq: Vec::with_capacity(steps + 1),
        angular_step: Vec::with_capacity(steps + 1),
        record_every,
    };
    for n in 0..=steps {
        let r2 = state.q.norm_squared();
        run.times.push(n as f64 * eta);
        run.norm_sq.push(r2);
        run.gsq.push(loss.grad_on_sphere(&state.q)?.norm_squared());
        if n == steps {
            break;
        }
        let next = step_gd_momentum_wd(&state, &loss, eta, beta, k)?;
        if !next.q.iter().all(|v| v.is_finite()) || next.q.norm() == 0.0 {
            return Err(noetherdyn_core::Error::StateCorruption(format!("iterate degenerate at step {}", n + 1)).into());
        }
        run.angular_step.push((&next.q / next.q.norm() - &state.q / r2.sqrt()).norm());
        state = next;
    }
    let last = *run.angular_step.last().unwrap();
    run.angular_step.push(last);
    Ok(run)
}

pub fn run_effective_lr(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    let run = flagship(config)?;
    let r0 = run.norm_sq[0].sqrt();
    let history = GradNormHistory::new(run.times.clone(), run.gsq.clone())?;
    let predicted = r2_schedule(&history, run.eta, run.beta, run.k, r0)?;
    let t_end = *run.times.last().unwrap();
    let window = (run.transient_end(), t_end);
    let cmp = compare_channels(
        Series::new(&run.times, &run.norm_sq),
        Series::new(&run.times, &predicted),
        R2_TOL,
        Mode::Relative,
        window,
    )?;
    let mut art = Artifacts::default();
    art.verdicts.push(cmp.verdict("C6.r2_rel_error"));

    let rel: Vec<f64> = run.norm_sq.iter().zip(&predicted).map(|(m, p)| (m - p) / p).collect();
    let table = ChannelTable::new("bn_effective_lr", run.times.clone())
        .column("r2_measured", run.norm_sq.clone())
        .column("r2_predicted", predicted)
        .column("gsq", run.gsq.clone())
        .column("rel_error", rel)
        .decimate(run.record_every);
    art.charts.push(
        Chart::new("bn_effective_lr", "squared weight norm", "t", "|q|^2")
            .line("measured", &table.times, table.get("r2_measured").unwrap())
            .line("closed form", &table.times, table.get("r2_predicted").unwrap()),
    );
    art.charts.push(
        Chart::new("bn_effective_lr_error", "relative error of the closed form", "t", "relative error")
            .line("(measured - predicted) / predicted", &table.times, table.get("rel_error").unwrap())
            .line("window start", &[window.0, window.0], &[-R2_TOL, R2_TOL]),
    );
    art.tables.push(table);
    Ok(art)
}

pub fn run_steady_state(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    let run = flagship(config)?;
    let fraction = config.get_or("late_fraction", 0.1)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(HarnessError::Config("late_fraction must lie in (0, 1]".into()));
    }
    let n = run.times.len();
    let start = n - ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;

    let omega = steady_angular_speed(run.eta, run.beta, run.k)?;
    let measured_step = mean(&run.angular_step[start..]);
    let radii: Vec<f64> = run.norm_sq.iter().map(|r2| r2.sqrt()).collect();
    let gnorm: Vec<f64> = run.gsq.iter().map(|g| g.sqrt()).collect();
    let predicted_radius = steady_radius(run.eta, run.beta, run.k, mean(&gnorm[start..]))?;
    let measured_radius = mean(&radii[start..]);

    let mut art = Artifacts::default();
    art.verdicts.push(Verdict::at_most(
        "C7.angular_step_rel_error",
        (measured_step - omega).abs() / omega,
        STEADY_TOL,
    ));
    art.verdicts.push(Verdict::at_most(
        "C7.radius_rel_error",
        (measured_radius - predicted_radius).abs() / predicted_radius,
        STEADY_TOL,
    ));

    let steady: Vec<f64> = gnorm.iter().map(|g| steady_radius(run.eta, run.beta, run.k, *g)).collect::<Result<_, _>>()?;
    let table = ChannelTable::new("steady_state", run.times.clone())
        .column("angular_step", run.angular_step.clone())
        .column("angular_step_predicted", vec![omega; n])
        .column("radius", radii)
        .column("radius_predicted", steady)
        .decimate(run.record_every);
    art.charts.push(
        Chart::new("steady_state_angular", "per-step angular displacement", "t", "|u_{n+1} - u_n|")
            .line("measured", &table.times, table.get("angular_step").unwrap())
            .line("equilibrium", &table.times, table.get("angular_step_predicted").unwrap())
            .log_scale(),
    );
    art.charts.push(
        Chart::new("steady_state_radius", "weight norm", "t", "|q|")
            .line("measured", &table.times, table.get("radius").unwrap())
            .line("equilibrium", &table.times, table.get("radius_predicted").unwrap())
            .log_scale(),
    );
    art.tables.push(table);
    Ok(art)
}
