use sos_tensor::certificate::CrossOperator;
use sos_tensor::instances::sample_components;
use sos_tensor::lab::{self, BernsteinFamily};
use sos_tensor::{rng, Ensemble};

#[test]
fn all_plus_signs_reproduce_the_unsigned_operator() {
    let set = sample_components(6, 14, Ensemble::SphereUniform, 3).unwrap();
    let ones = vec![1.0; 14];
    let signed = lab::build_signed_cross_operator(&set, &ones, &ones).unwrap();
    let plain = CrossOperator::new(&set);
    assert!((signed.to_dense() - plain.to_dense()).amax() <= 1e-14);
}

#[test]
fn coupled_operator_is_invariant_under_global_sign_flip() {
    let set = sample_components(5, 11, Ensemble::RademacherNormalized, 4).unwrap();
    let sigma = rng::signs(&mut rng::stream(4, "lab-test/sigma", 0), 11);
    let flipped: Vec<f64> = sigma.iter().map(|s| -s).collect();
    let a = lab::build_signed_cross_operator(&set, &sigma, &sigma)
        .unwrap()
        .to_dense();
    let b = lab::build_signed_cross_operator(&set, &flipped, &flipped)
        .unwrap()
        .to_dense();
    assert_eq!(a, b);
}

#[test]
fn decoupling_run_is_seed_deterministic() {
    let a = lab::decoupling_experiment(8, 16, 30, 5).unwrap();
    let b = lab::decoupling_experiment(8, 16, 30, 5).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.ratio_median > 0.2 && a.ratio_median < 5.0);
}

#[test]
fn decoupling_rejects_too_few_trials() {
    assert!(lab::decoupling_experiment(8, 16, 5, 5).is_err());
}

#[test]
fn small_bernstein_table_has_no_violations() {
    let set = sample_components(6, 12, Ensemble::RademacherNormalized, 6).unwrap();
    let table = lab::bernstein_empirical_check(&set, BernsteinFamily::CrossSum, 300, 8, 6).unwrap();
    assert_eq!(table.violations, 0);
    assert!(table.rows.windows(2).all(|w| w[0].t < w[1].t));
}
