use noetherdyn_core::geometry::{bregman_divergence, BregmanSchedule, Matrix, Metric, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spd3() -> Matrix {
    Matrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 1.0])
}

fn metrics() -> Vec<Metric> {
    vec![
        Metric::euclidean(3),
        Metric::quadratic_form(spd3()).unwrap(),
        Metric::negative_entropy(3),
    ]
}

fn domain_point<R: Rng>(metric: &Metric, rng: &mut R) -> Vector {
    if metric.name() == "negative-entropy" {
        Vector::from_fn(metric.dim(), |_, _| rng.random_range(0.2..3.0))
    } else {
        Vector::from_fn(metric.dim(), |_, _| rng.random_range(-3.0..3.0))
    }
}

fn vec3() -> impl Strategy<Value = Vector> {
    proptest::collection::vec(-10.0f64..10.0, 3).prop_map(Vector::from_vec)
}

proptest! {
    #[test]
    fn euclidean_divergence_is_half_squared_distance(x in vec3(), y in vec3()) {
        let d = bregman_divergence(&Metric::euclidean(3), &y, &x).unwrap();
        prop_assert!((d - 0.5 * (&x - &y).norm_squared()).abs() <= 1e-12 * (1.0 + d));
    }

    #[test]
    fn closed_forms_match_literal_definition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in metrics() {
            let x = domain_point(&m, &mut rng);
            let y = domain_point(&m, &mut rng);
            let literal = m.value(&y).unwrap() - m.value(&x).unwrap() - m.grad(&x).unwrap().dot(&(&y - &x));
            let closed = bregman_divergence(&m, &y, &x).unwrap();
            prop_assert!((literal - closed).abs() <= 1e-10 * (1.0 + closed.abs()), "{}: {literal} vs {closed}", m.name());
        }
    }
}

#[test]
fn gradients_and_hessians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for m in metrics() {
        for _ in 0..50 {
            let x = domain_point(&m, &mut rng);
            let g = m.grad(&x).unwrap();
            let hess = m.hessian(&x).unwrap();
            for i in 0..m.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (m.value(&xp).unwrap() - m.value(&xm).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "{} grad[{i}]", m.name());
                let col = (m.grad(&xp).unwrap() - m.grad(&xm).unwrap()) / (2.0 * h);
                let exact = hess.column(i).into_owned();
                assert!((&col - &exact).norm() <= 1e-6 * exact.norm().max(1.0), "{} hessian col {i}", m.name());
            }
            let v = domain_point(&Metric::euclidean(3), &mut rng);
            assert!((m.hessian_vec(&x, &v).unwrap() - &hess * &v).norm() <= 1e-12 * (1.0 + v.norm()));
            let w = m.hessian_solve(&x, &v).unwrap();
            assert!((&hess * w - &v).norm() <= 1e-10 * (1.0 + v.norm()));
            let back = m.grad_inverse(&g).unwrap();
            assert!((back - &x).norm() <= 1e-10 * (1.0 + x.norm()));
        }
    }
}

#[test]
fn divergence_is_positive_on_distinct_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in metrics() {
        for _ in 0..1000 {
            let x = domain_point(&m, &mut rng);
            let y = domain_point(&m, &mut rng);
            assert!(x != y);
            assert!(bregman_divergence(&m, &y, &x).unwrap() > 0.0, "{}", m.name());
        }
    }
}

#[test]
fn schedule_derivatives_match_finite_differences() {
    let schedules = [
        BregmanSchedule::natural(0.3, 0.7),
        BregmanSchedule::sgdm(0.1, 0.9),
        BregmanSchedule::nesterov(2.0, 0.25),
        BregmanSchedule::nesterov(3.5, 2.0),
    ];
    let h = 1e-5;
    for s in &schedules {
        for &t in &[0.3, 1.0, 2.5, 7.0] {
            let fd_gamma = (s.gamma(t + h).unwrap() - s.gamma(t - h).unwrap()) / (2.0 * h);
            let fd_alpha = (s.alpha(t + h).unwrap() - s.alpha(t - h).unwrap()) / (2.0 * h);
            let fd_beta = (s.beta(t + h).unwrap() - s.beta(t - h).unwrap()) / (2.0 * h);
            let v = s.at(t).unwrap();
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            if v.gamma_dot != 0.0 {
                assert!(rel(fd_gamma, v.gamma_dot) <= 1e-6, "{s:?} gamma_dot at {t}");
            } else {
                assert!(fd_gamma.abs() <= 1e-9);
            }
            if v.alpha_dot != 0.0 {
                assert!(rel(fd_alpha, v.alpha_dot) <= 1e-6, "{s:?} alpha_dot at {t}");
            }
            if v.beta_dot != 0.0 {
                assert!(rel(fd_beta, v.beta_dot) <= 1e-6, "{s:?} beta_dot at {t}");
            }
        }
    }
}
