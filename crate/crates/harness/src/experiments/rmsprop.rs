//! RMSProp accumulator against its closed form, and the kernel identity
//! between the accumulator and the weight-norm schedule.

use noetherdyn_core::closedform::{
    balanced_weight_decay, bn_rmsprop_map, g_schedule, r2_schedule, GradNormHistory, MapTarget,
};
use noetherdyn_core::discrete::{step_rmsprop, OptimizerState};
use noetherdyn_core::{Loss, Matrix, Vector};
use rand::Rng;

use super::{rng, steps_for};
use crate::config::ExperimentConfig;
use crate::output::{Chart, ChannelTable};
use crate::verdict::{compare_channels, Mode, Series, Verdict};
use crate::{Artifacts, HarnessError};

const G_TOL: f64 = 0.02;
const IDENTITY_TOL: f64 = 1e-10;

pub fn run(config: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    let mut art = Artifacts::default();
    closed_form(config, &mut art)?;
    identity(config, &mut art)?;
    Ok(art)
}

fn closed_form(config: &ExperimentConfig, art: &mut Artifacts) -> Result<(), HarnessError> {
    let eta = config.require("eta")?;
    let rho = config.require("rho")?;
    let t1 = config.require("t1")?;
    let g0 = config.get_or("g0", 1.0)?;
    let loss = Loss::quadratic(Matrix::identity(3, 3), Vector::zeros(3))?;
    let steps = steps_for(t1, eta);
    if steps < 2 {
        return Err(HarnessError::Config("t1 must cover at least two steps".into()));
    }
    let mut state = OptimizerState::new(Vector::from_vec(vec![1.0, -0.5, 2.0])).with_accumulator(g0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut gsq = Vec::with_capacity(steps + 1);
    let mut measured = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        times.push(n as f64 * eta);
        gsq.push(loss.grad(&state.q)?.norm_squared());
        measured.push(state.g_acc.sqrt());
        if n < steps {
            state = step_rmsprop(&state, &loss, eta, rho)?;
        }
    }
    let history = GradNormHistory::new(times.clone(), gsq.clone())?;
    let predicted = g_schedule(&history, eta, rho, g0)?;
    let cmp = compare_channels(
        Series::new(&times, &measured),
        Series::new(&times, &predicted),
        G_TOL,
        Mode::Relative,
        (times[0], times[steps]),
    )?;
    art.verdicts.push(cmp.verdict("C8.sqrt_g_rel_error"));

    let rel = measured.iter().zip(&predicted).map(|(m, p)| (m - p) / p).collect();
    let table = ChannelTable::new("rmsprop", times)
        .column("sqrt_g_measured", measured)
        .column("sqrt_g_predicted", predicted)
        .column("gsq", gsq)
        .column("rel_error", rel);
    art.charts.push(
        Chart::new("rmsprop", "RMSProp scaling factor", "t", "sqrt(G)")
            .line("measured", &table.times, table.get("sqrt_g_measured").unwrap())
            .line("closed form", &table.times, table.get("sqrt_g_predicted").unwrap()),
    );
    art.tables.push(table);
    Ok(())
}

fn identity(config: &ExperimentConfig, art: &mut Artifacts) -> Result<(), HarnessError> {
    let beta = config.get_or("bn_beta", 0.9)?;
    let bn_eta = config.get_or("bn_eta", 0.01)?;
    let bn_wd = config.get_or("bn_wd", 1e-4)?;
    let rho_prime = config.get_or("map_rho", 0.99)?;
    let r0 = config.get_or("r0", 1.0)?;
    let t_end = config.get_or("history_t1", 10.0)?;
    let dt = config.get_or("history_dt", 1e-3)?;
    if !(dt > 0.0 && t_end > dt) {
        return Err(HarnessError::Config("need 0 < history_dt < history_t1".into()));
    }

    // The residual prefactor ratio at the configured weight decay.
    let configured = bn_rmsprop_map(bn_eta, beta, bn_wd, MapTarget::Decay(rho_prime))?;
    art.verdicts.push(Verdict::new(
        "C9.prefactor_ratio",
        true,
        configured.prefactor_ratio,
        "recorded",
    ));

    // At the balanced weight decay both identities hold and the schedules coincide.
    let k = balanced_weight_decay(bn_eta, beta);
    let map = bn_rmsprop_map(bn_eta, beta, k, MapTarget::Decay(rho_prime))?;
    art.verdicts.push(Verdict::new(
        "C9.balanced_satisfiable",
        map.satisfiable,
        map.prefactor_ratio,
        "satisfiable",
    ));
    let mut rng = rng(config);
    let n = steps_for(t_end, dt);
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let gsq: Vec<f64> = times
        .iter()
        .map(|t| (1.0 + 0.5 * (3.0 * t).sin()) * rng.random_range(0.2..2.0))
        .collect();
    let history = GradNormHistory::new(times.clone(), gsq.clone())?;
    let r2 = r2_schedule(&history, bn_eta, beta, k, r0)?;
    let sqrt_g = g_schedule(&history, map.eta_prime, map.rho_prime, map.g0_for(r0))?;
    let cmp = compare_channels(
        Series::new(&times, &sqrt_g),
        Series::new(&times, &r2),
        IDENTITY_TOL,
        Mode::Relative,
        (times[0], times[n]),
    )?;
    art.verdicts.push(cmp.verdict("C9.kernel_identity_rel_error"));

    let table = ChannelTable::new("bn_rmsprop_identity", times)
        .column("gsq", gsq)
        .column("r2", r2)
        .column("sqrt_g", sqrt_g);
    art.charts.push(
        Chart::new("bn_rmsprop_identity", "weight-norm schedule and RMSProp factor", "t", "value")
            .line("r^2", &table.times, table.get("r2").unwrap())
            .line("sqrt(G)", &table.times, table.get("sqrt_g").unwrap()),
    );
    art.tables.push(table.decimate(10));
    Ok(())
}
