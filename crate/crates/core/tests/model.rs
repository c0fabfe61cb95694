use proptest::prelude::*;

use ota_fl_sim::datagen::{gen_synthetic_classification, Dataset};
use ota_fl_sim::model::{
    local_grad, local_loss, local_solve_sgd, prox_grad, prox_objective, read_checkpoint, solve_prox_exact,
    write_checkpoint, Activation, ModelSpec, OracleOptions, ProxConfig,
};
use ota_fl_sim::params::{dist_sq, dot, ParamVector};

fn data(seed: u64) -> Dataset {
    gen_synthetic_classification(40, 3, 3, 1.5, seed).unwrap()
}

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prox_terms_vanish_at_the_reference(theta in vector(12), lambda in 0.0f64..5.0, seed in 0u64..20) {
        let ds = data(seed);
        let spec = ModelSpec::logistic(3, 3);
        prop_assert_eq!(
            prox_objective(&theta, &theta, lambda, &ds, &spec).unwrap().to_bits(),
            local_loss(&theta, &ds, &spec).unwrap().to_bits()
        );
        prop_assert_eq!(
            prox_grad(&theta, &theta, lambda, &ds, &spec).unwrap().to_bits(),
            local_grad(&theta, &ds, &spec).unwrap().to_bits()
        );
    }

    #[test]
    fn prox_surrogate_is_strongly_convex(a in vector(12), b in vector(12), lambda in 0.01f64..3.0, r in vector(12)) {
        let ds = data(5);
        let spec = ModelSpec::logistic(3, 3);
        let h1 = prox_objective(&a, &r, lambda, &ds, &spec).unwrap();
        let h2 = prox_objective(&b, &r, lambda, &ds, &spec).unwrap();
        let g1 = prox_grad(&a, &r, lambda, &ds, &spec).unwrap();
        let diff: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
        let lower = h1 + dot(g1.as_slice(), &diff) + 0.5 * lambda * dist_sq(&a, &b);
        prop_assert!(h2 >= lower - 1e-10 * (1.0 + h2.abs()), "h2 {} < {}", h2, lower);
    }

    #[test]
    fn noisy_sgd_regularizer_is_a_prox_term(theta in vector(12), prev in vector(12), lt in 0.0f64..4.0) {
        let ds = data(6);
        let spec = ModelSpec::logistic(3, 3);
        let h = prox_objective(&theta, &prev, 2.0 * lt, &ds, &spec).unwrap();
        let f = local_loss(&theta, &ds, &spec).unwrap();
        let reg = lt * dist_sq(&theta, &prev);
        prop_assert!((h - f - reg).abs() <= 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn gradient_is_invariant_to_duplication(theta in vector(12), times in 2usize..4) {
        let ds = data(7);
        let spec = ModelSpec::logistic(3, 3);
        let g = local_grad(&theta, &ds, &spec).unwrap();
        let gd = local_grad(&theta, &ds.repeated(times), &spec).unwrap();
        let err = g.as_slice().iter().zip(gd.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12);
    }

    #[test]
    fn local_solver_is_deterministic(seed in any::<u64>(), epochs in 1usize..4) {
        let ds = data(8);
        let spec = ModelSpec::mlp(3, vec![4], Activation::Tanh, 3);
        let theta = spec.init_params(1);
        let cfg = ProxConfig { lambda: 0.3, eta: 0.05, epochs: 3, batch: 8 };
        let a = local_solve_sgd(&ds, &theta, &cfg, epochs, seed, &spec).unwrap();
        let b = local_solve_sgd(&ds, &theta, &cfg, epochs, seed, &spec).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn optimum_of_separable_problem_is_stationary() {
    let ds = gen_synthetic_classification(60, 2, 2, 4.0, 1).unwrap();
    let spec = ModelSpec::logistic(2, 2);
    // A proximal term anchors the otherwise unbounded separable optimum.
    let opt = solve_prox_exact(&ParamVector::zeros(spec.dim()), 1e-2, &ds, &spec, &OracleOptions::default()).unwrap();
    assert!(opt.grad_norm < 1e-6, "grad norm {}", opt.grad_norm);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let spec = ModelSpec::mlp(3, vec![5, 4], Activation::Relu, 3);
    let theta = spec.init_params(77);
    write_checkpoint(&path, &theta, &spec).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 * spec.dim() as u64);
    let (back, back_spec) = read_checkpoint(&path).unwrap();
    assert_eq!(back.to_bits(), theta.to_bits());
    assert_eq!(back_spec, spec);
}
