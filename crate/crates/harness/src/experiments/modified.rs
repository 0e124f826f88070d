//! Continuous models of discrete momentum methods on quadratics: the
//! finite-learning-rate equation of heavy ball, and the vanishing-step limit of
//! Nesterov's method.

use noetherdyn_core::continuous::{eom_bregman_euclidean, eom_modified, integrate_rk4, nesterov_start, shoot_initial_velocity};
use noetherdyn_core::discrete::{run as run_rule, OptimizerState, Rule};
use noetherdyn_core::geometry::BregmanSchedule;
use noetherdyn_core::{Loss, Matrix, Vector};

use super::steps_for;
use crate::config::ExperimentConfig;
use crate::output::{Chart, ChannelTable};
use crate::verdict::Verdict;
use crate::{Artifacts, HarnessError};

const SUBSTEPS: usize = 100;
const MIN_GAIN: f64 = 5.0;
const NESTEROV_TOL: f64 = 1e-2;

fn curvatures() -> Vector {
    Vector::from_vec(vec![1.0, 0.4, 2.5])
}

fn quadratic() -> Result<Loss, HarnessError> {
    let c = curvatures();
    Ok(Loss::quadratic(Matrix::from_diagonal(&c), Vector::zeros(c.len()))?)
}

/// `J1(x)` by its power series; accurate to rounding for `|x| < 10`.
pub fn bessel_j1(x: f64) -> f64 {
    let mut term = x / 2.0;
    let mut sum = term;
    for k in 1..60 {
        term *= -(x * x / 4.0) / (k as f64 * (k as f64 + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Exact solution of `q'' + (3/t) q' + λ q = 0` with `q(0) = q0`, `q'(0) = 0`.
pub fn nesterov_exact(lambda: f64, q0: f64, t: f64) -> f64 {
    let x = lambda.sqrt() * t;
    if x < 1e-8 {
        q0
    } else {
        q0 * 2.0 * bessel_j1(x) / x
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    let mut art = Artifacts::default();
    heavy_ball(config, &mut art)?;
    nesterov(config, &mut art)?;
    Ok(art)
}

fn heavy_ball(config: &ExperimentConfig, art: &mut Artifacts) -> Result<(), HarnessError> {
    let eta = config.require("eta")?;
    let beta = config.require("beta")?;
    let t1 = config.require("t1")?;
    let k = config.get_or("wd", 0.0)?;
    let loss = quadratic()?;
    let c = curvatures();
    let q0 = Vector::from_element(c.len(), 1.0);
    let steps = steps_for(t1, eta);
    if steps < 2 {
        return Err(HarnessError::Config("t1 must cover at least two steps".into()));
    }
    let states = run_rule(&Rule::HeavyBall { eta, beta, k }, &loss, OptimizerState::new(q0.clone()), steps)?;

    // The slow solution of the second-order model through the first two iterates.
    let sys = eom_modified(eta, beta, k, loss.clone())?;
    let guess = (&states[1].q - &q0) / eta;
    let v0 = shoot_initial_velocity(&sys, &q0, &states[1].q, 0.0, eta, SUBSTEPS, &guess)?;
    let traj = integrate_rk4(&sys, &q0, &v0, 0.0, steps as f64 * eta, eta / SUBSTEPS as f64)?;

    let mut times = Vec::with_capacity(steps + 1);
    let (mut ode_err, mut flow_err) = (Vec::new(), Vec::new());
    for (n, s) in states.iter().enumerate() {
        let t = n as f64 * eta;
        let flow = Vector::from_fn(c.len(), |i, _| q0[i] * (-(c[i] + k) * t / (1.0 - beta)).exp());
        times.push(t);
        ode_err.push((&traj.q[n * SUBSTEPS] - &s.q).norm());
        flow_err.push((flow - &s.q).norm());
    }
    let ode_max = ode_err.iter().cloned().fold(0.0, f64::max);
    let flow_max = flow_err.iter().cloned().fold(0.0, f64::max);
    art.verdicts.push(Verdict::at_least("C4.gain_over_gradient_flow", flow_max / ode_max, MIN_GAIN));

    let table = ChannelTable::new("modified_heavy_ball", times)
        .column("q0_discrete", states.iter().map(|s| s.q[0]).collect())
        .column("q0_modified", (0..=steps).map(|n| traj.q[n * SUBSTEPS][0]).collect())
        .column("err_modified", ode_err)
        .column("err_gradient_flow", flow_err);
    art.charts.push(
        Chart::new("modified_heavy_ball", "heavy ball vs continuous models", "t", "|q_n - q(t_n)|")
            .line("second-order model", &table.times, table.get("err_modified").unwrap())
            .line("rescaled gradient flow", &table.times, table.get("err_gradient_flow").unwrap())
            .log_scale(),
    );
    art.tables.push(table);
    Ok(())
}

fn nesterov(config: &ExperimentConfig, art: &mut Artifacts) -> Result<(), HarnessError> {
    let eta = config.get_or("nesterov_eta", 1e-4)?;
    let t_end = config.get_or("nesterov_t1", 1.0)?;
    let record_every = config.count_or("record_every", 100)?;
    let loss = quadratic()?;
    let c = curvatures();
    let q0 = Vector::from_element(c.len(), 1.0);
    let steps = steps_for(t_end, eta);
    let states = run_rule(&Rule::Nesterov { eta, power: 2.0 }, &loss, OptimizerState::new(q0.clone()), steps)?;

    let exact_f = |t: f64| -> Result<f64, HarnessError> {
        let q = Vector::from_fn(c.len(), |i, _| nesterov_exact(c[i], q0[i], t));
        Ok(loss.value(&q)?)
    };

    // The integrated ODE, checked against the exact solution.
    let t0 = 1e-3;
    let (qs, vs) = nesterov_start(&loss, &q0, t0)?;
    let sys = eom_bregman_euclidean(BregmanSchedule::nesterov(2.0, 0.25), loss.clone());
    let traj = integrate_rk4(&sys, &qs, &vs, t0, t_end, eta)?;
    let f_ode = loss.value(traj.last_q())?;
    let f_exact = exact_f(t_end)?;
    art.verdicts.push(Verdict::at_most("C5.ode_vs_exact", (f_ode - f_exact).abs() / f_exact, 1e-8));

    let f_discrete = loss.value(&states.last().unwrap().q)?;
    art.verdicts.push(Verdict::at_most("C5.f_rel_error", (f_discrete - f_exact).abs() / f_exact, NESTEROV_TOL));

    let mut times = Vec::new();
    let (mut fd, mut fe) = (Vec::new(), Vec::new());
    for (n, s) in states.iter().enumerate() {
        if n % record_every == 0 || n == steps {
            times.push(s.time(eta));
            fd.push(loss.value(&s.q)?);
            fe.push(exact_f(s.time(eta))?);
        }
    }
    let table = ChannelTable::new("nesterov", times)
        .column("f_discrete", fd)
        .column("f_ode", fe);
    art.charts.push(
        Chart::new("nesterov", "Nesterov iterates vs the vanishing-step ODE", "t", "f")
            .line("discrete", &table.times, table.get("f_discrete").unwrap())
            .line("ODE", &table.times, table.get("f_ode").unwrap()),
    );
    art.tables.push(table);
    Ok(())
}
