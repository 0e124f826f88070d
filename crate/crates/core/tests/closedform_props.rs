use noetherdyn_core::closedform::{
    balanced_weight_decay, bn_rmsprop_map, g_schedule, r2_schedule, GradNormHistory, MapTarget,
};
use proptest::prelude::*;

fn smooth_history(dt: f64) -> GradNormHistory {
    let n = (10.0 / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let gsq = times.iter().map(|t| 1.0 + (1.3 * t).sin() * 0.8).collect();
    GradNormHistory::new(times, gsq).unwrap()
}

#[test]
fn quadrature_converges_at_second_order() {
    let (eta, beta, k, r0) = (0.05, 0.5, 0.05, 1.0);
    let at_end = |dt: f64| *r2_schedule(&smooth_history(dt), eta, beta, k, r0).unwrap().last().unwrap();
    let (a, b, c) = (at_end(0.1), at_end(0.05), at_end(0.025));
    let ratio = (a - b) / (b - c);
    assert!((ratio - 4.0).abs() <= 0.2, "ratio {ratio}");
}

#[test]
fn schedules_decay_without_gradients() {
    let h = GradNormHistory::constant(0.0, 20.0, 0.05).unwrap();
    let r2 = r2_schedule(&h, 0.01, 0.9, 1e-3, 2.0).unwrap();
    let g = g_schedule(&h, 0.01, 0.99, 3.0).unwrap();
    assert!(r2.windows(2).all(|w| w[1] < w[0]));
    assert!(g.windows(2).all(|w| w[1] < w[0]));
}

fn history_strategy() -> impl Strategy<Value = GradNormHistory> {
    proptest::collection::vec(0.0f64..5.0, 2..400).prop_map(|gsq| {
        let times = (0..gsq.len()).map(|i| i as f64 * 0.05).collect();
        GradNormHistory::new(times, gsq).unwrap()
    })
}

proptest! {
    #[test]
    fn outputs_are_positive(h in history_strategy(), eta in 1e-3f64..0.5, beta in 0.0f64..0.95,
                            k in 0.0f64..0.1, r0 in 0.1f64..3.0, rho in 0.5f64..0.999) {
        prop_assert!(r2_schedule(&h, eta, beta, k, r0).unwrap().iter().all(|v| *v > 0.0));
        prop_assert!(g_schedule(&h, eta, rho, r0).unwrap().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn matched_kernels_are_the_same_function(h in history_strategy(), eta in 1e-3f64..0.1,
                                             beta in 0.0f64..0.95, r0 in 0.1f64..3.0, frac in 0.01f64..0.9) {
        let k = balanced_weight_decay(eta, beta);
        let rate = 4.0 * k / (1.0 - beta);
        let map = bn_rmsprop_map(eta, beta, k, MapTarget::LearningRate(frac / rate)).unwrap();
        prop_assert!(map.satisfiable);
        let r2 = r2_schedule(&h, eta, beta, k, r0).unwrap();
        let g = g_schedule(&h, map.eta_prime, map.rho_prime, map.g0_for(r0)).unwrap();
        for (a, b) in r2.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
        }
    }
}
