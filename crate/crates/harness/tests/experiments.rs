use noetherdyn::experiments::{execute, flagship, modified, residual};
use noetherdyn::{ExperimentConfig, ExperimentKind, HarnessError};

fn config(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig::new(kind, std::env::temp_dir())
}

#[test]
fn table2_pattern_matches_the_reference_rows() {
    let art = execute(&config(ExperimentKind::Table2).with_seed(4)).unwrap();
    let pattern = art.text_tables.iter().find(|t| t.name == "table2_pattern").unwrap();
    assert_eq!(pattern.header, ["metric", "translation", "rotation", "scale", "rescale"]);
    assert_eq!(pattern.rows[0], ["euclidean", "symmetric", "symmetric", "asymmetric", "asymmetric"]);
    assert_eq!(pattern.rows[1], ["negative-entropy", "asymmetric", "asymmetric", "asymmetric", "asymmetric"]);
    // Constant-Hessian metrics keep translation symmetry.
    assert_eq!(pattern.rows[2][1], "symmetric");
    assert!(art.all_pass());
}

#[test]
fn missing_parameters_name_the_key() {
    for (kind, key) in [
        (ExperimentKind::NoetherResidual, "dt"),
        (ExperimentKind::Conservation, "eta"),
        (ExperimentKind::ModifiedEq, "eta"),
        (ExperimentKind::BnEffectiveLr, "eta"),
        (ExperimentKind::SteadyState, "eta"),
        (ExperimentKind::RmspropEquiv, "eta"),
    ] {
        match execute(&config(kind)) {
            Err(HarnessError::Config(msg)) => assert!(msg.contains(key), "{kind}: {msg}"),
            other => panic!("{kind}: expected a configuration error, got {other:?}"),
        }
    }
}

#[test]
fn residual_cells_are_compatible_and_floor_exemption_is_narrow() {
    let cells = residual::cells();
    assert_eq!(cells.len(), 12);
    for cell in &cells {
        assert!(cell.loss.is_invariant_under(&cell.transform), "{} {}", cell.metric.name(), cell.transform.kind().name());
        cell.metric.check_domain(&cell.q0).unwrap();
    }
    let schedule = noetherdyn_core::BregmanSchedule::natural(1.0, 1.0);
    // A truncation-dominated cell is not exempt.
    let scale = &cells[2];
    let run = residual::measure(scale, schedule, 1.0, 1e-3).unwrap();
    assert!(run.max_residual > 10.0 * run.rounding_floor);
    assert!(!residual::halving_verdict("x", 2.0, 8.0, &run).pass);
    assert!(residual::halving_verdict("x", 9.0, 8.0, &run).pass);
}

#[test]
fn transient_window_is_the_kernel_time_capped_at_a_fifth() {
    let base = config(ExperimentKind::BnEffectiveLr).with("eta", 0.01).with("beta", 0.9).with("steps", 1000.0);
    let short = flagship::flagship(&base.clone().with("wd", 1e-4)).unwrap();
    assert!((short.transient_end() - 2.0).abs() < 1e-12);
    let long = flagship::flagship(&base.with("wd", 10.0)).unwrap();
    assert!((long.transient_end() - 5.0 * 0.1 / 40.0).abs() < 1e-15);
}

#[test]
fn bessel_series_matches_tabulated_values() {
    assert!((modified::bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
    assert!((modified::bessel_j1(5.0) + 0.327_579_137_591_465_2).abs() < 1e-14);
    assert_eq!(modified::nesterov_exact(2.0, 3.0, 0.0), 3.0);
}
