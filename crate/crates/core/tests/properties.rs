use nalgebra::DVector;
use proptest::prelude::*;
use sos_tensor::certificate;
use sos_tensor::instances::{add_noise, sample_components, sample_instance, NoiseSpec};
use sos_tensor::io::TensorFile;
use sos_tensor::moment::{build_certification_problem, PseudoExpectation};
use sos_tensor::{rng, Ensemble, SymmetricTensor3};

fn ensemble() -> impl Strategy<Value = Ensemble> {
    prop_oneof![
        Just(Ensemble::RademacherNormalized),
        Just(Ensemble::SphereUniform),
        Just(Ensemble::GaussianNormalized),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn densified_tensor_is_symmetric(n in 1usize..7, m in 1usize..12, e in ensemble(), seed in any::<u64>()) {
        let (_, t) = sample_instance(n, m, e, seed).unwrap();
        let d = t.densify(64).unwrap();
        prop_assert!(d.max_asymmetry() <= 1e-15);
    }

    #[test]
    fn file_round_trip_is_exact(n in 1usize..6, m in 1usize..9, e in ensemble(), seed in any::<u64>(), noisy in any::<bool>()) {
        let (_, mut t) = sample_instance(n, m, e, seed).unwrap();
        if noisy {
            t = add_noise(&t, &NoiseSpec::new(0.01, seed).unwrap()).unwrap();
        }
        let text = TensorFile::from_tensor(&t).to_json();
        let back = TensorFile::parse(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        let t2 = back.to_tensor().unwrap();
        let x = rng::unit_vector(&mut rng::stream(seed, "prop/eval", 0), n);
        prop_assert_eq!(t.eval_cubic(&x).unwrap(), t2.eval_cubic(&x).unwrap());
    }

    #[test]
    fn moment_objective_matches_cubic_at_point_masses(n in 1usize..4, m in 1usize..6, seed in any::<u64>()) {
        let (_, t) = sample_instance(n, m, Ensemble::SphereUniform, seed).unwrap();
        let problem = build_certification_problem(&t, 4).unwrap();
        let x = rng::unit_vector(&mut rng::stream(seed, "prop/point", 0), n);
        let pe = PseudoExpectation::point_mass(&problem.basis, &x).unwrap();
        let lhs = problem.objective_value(&pe.moments);
        let rhs = t.eval_cubic(&x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn bound_dominates_sampled_values(n in 2usize..12, m in 1usize..30, e in ensemble(), seed in any::<u64>()) {
        let (_, t) = sample_instance(n, m, e, seed).unwrap();
        let rep = certificate::certify(&t, None, 1e-9).unwrap();
        let mut r = rng::stream(seed, "prop/probe", 0);
        for _ in 0..20 {
            let x: DVector<f64> = rng::unit_vector(&mut r, n);
            prop_assert!(t.eval_cubic(&x).unwrap() <= rep.bound + 1e-9);
        }
    }
}

#[test]
fn bound_dominates_noisy_instances() {
    for seed in 0..5 {
        let set = sample_components(15, 40, Ensemble::RademacherNormalized, seed).unwrap();
        let t = SymmetricTensor3::from_components(set);
        let noisy = add_noise(&t, &NoiseSpec::new(0.05, seed).unwrap()).unwrap();
        let clean = certificate::certify(&t, None, 1e-9).unwrap();
        let rep = certificate::certify(&noisy, None, 1e-9).unwrap();
        assert!(rep.bound >= clean.bound);
        let mut r = rng::stream(seed, "noisy/probe", 0);
        for _ in 0..50 {
            let x = rng::unit_vector(&mut r, 15);
            assert!(noisy.eval_cubic(&x).unwrap() <= rep.bound + 1e-9);
        }
    }
}
