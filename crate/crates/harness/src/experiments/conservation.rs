//! Plain gradient descent near the gradient-flow limit: the squared norm under a
//! scale-invariant loss and the layer balance under a rescale-invariant chain
//! drift only at first order in the learning rate.

use noetherdyn_core::discrete::{run as run_rule, OptimizerState, Rule};
use noetherdyn_core::{Loss, Vector};

use super::{linspace_diag, log_log_slope, random_direction, rng, steps_for};
use crate::config::ExperimentConfig;
use crate::output::{Chart, ChannelTable, TextTable};
use crate::verdict::Verdict;
use crate::{Artifacts, HarnessError};

const DRIFT_TOL: f64 = 1e-3;
const SWEEP: [f64; 3] = [1e-4, 1e-3, 1e-2];

fn gd(eta: f64) -> Rule {
    Rule::HeavyBall { eta, beta: 0.0, k: 0.0 }
}

/// Relative deviation of `quantity` from its initial value along the run.
fn drift_channel(states: &[OptimizerState], quantity: impl Fn(&Vector) -> f64) -> Vec<f64> {
    let q0 = quantity(&states[0].q);
    states.iter().map(|s| (quantity(&s.q) - q0) / q0.abs()).collect()
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn run(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    let eta = config.require("eta")?;
    let steps = config.require_count("steps")?;
    let dim = config.count_or("dim", 6)?;
    let record_every = config.count_or("record_every", 100)?;
    if !(eta > 0.0) || steps == 0 || dim < 4 {
        return Err(HarnessError::Config("need eta > 0, steps > 0 and dim >= 4".into()));
    }
    let mut rng = rng(config);
    let rayleigh = Loss::rayleigh(linspace_diag(dim))?;
    let q_ray = random_direction(dim, &mut rng) * 1.5;
    let split = dim / 2;
    let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.7 * v - 0.2).collect();
    let chain = Loss::two_layer_linear(x, y, split)?;
    let mut q_chain = random_direction(dim, &mut rng);
    // Keep the balance well away from zero so the relative drift is meaningful.
    for i in 0..split {
        q_chain[i] *= 2.0;
    }
    let balance = move |q: &Vector| q.rows(0, split).norm_squared() - q.rows(split, q.len() - split).norm_squared();

    let ray_states = run_rule(&gd(eta), &rayleigh, OptimizerState::new(q_ray.clone()), steps)?;
    let chain_states = run_rule(&gd(eta), &chain, OptimizerState::new(q_chain), steps)?;
    let norm_drift = drift_channel(&ray_states, |q| q.norm_squared());
    let balance_drift = drift_channel(&chain_states, balance);

    let mut art = Artifacts::default();
    art.verdicts.push(Verdict::at_most("C3.rayleigh.norm_drift", max_abs(&norm_drift), DRIFT_TOL));
    art.verdicts.push(Verdict::at_most("C3.two_layer.balance_drift", max_abs(&balance_drift), DRIFT_TOL));

    let times: Vec<f64> = ray_states.iter().map(|s| s.time(eta)).collect();
    let table = ChannelTable::new("conservation", times)
        .column("norm_sq", ray_states.iter().map(|s| s.q.norm_squared()).collect())
        .column("norm_drift", norm_drift)
        .column("balance", chain_states.iter().map(|s| balance(&s.q)).collect())
        .column("balance_drift", balance_drift)
        .decimate(record_every);
    art.charts.push(
        Chart::new("conservation", "relative drift of conserved quantities", "t", "relative drift")
            .line("|q|^2", &table.times, table.get("norm_drift").unwrap())
            .line("|q1|^2 - |q2|^2", &table.times, table.get("balance_drift").unwrap()),
    );
    art.tables.push(table);

    // Drift at a fixed horizon grows linearly with the learning rate.
    let horizon = config.get_or("sweep_horizon", 1.0)?;
    let mut sweep = TextTable {
        name: "conservation_sweep".into(),
        header: vec!["eta".into(), "steps".into(), "norm_drift".into()],
        rows: Vec::new(),
    };
    let mut drifts = Vec::new();
    for eta in SWEEP {
        let n = steps_for(horizon, eta);
        let states = run_rule(&gd(eta), &rayleigh, OptimizerState::new(q_ray.clone()), n)?;
        let r0 = q_ray.norm_squared();
        let drift = (states.last().unwrap().q.norm_squared() - r0).abs() / r0;
        sweep.rows.push(vec![format!("{eta:e}"), n.to_string(), format!("{drift:e}")]);
        drifts.push(drift);
    }
    let slope = log_log_slope(&SWEEP, &drifts);
    art.verdicts.push(Verdict::within("C3.drift_slope", slope, 1.0, 0.2));
    art.charts.push(
        Chart::new("conservation_sweep", "norm drift at t = horizon", "log10 eta", "relative drift")
            .line("measured", &SWEEP.map(f64::log10), &drifts)
            .log_scale(),
    );
    art.text_tables.push(sweep);
    Ok(art)
}
