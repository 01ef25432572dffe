//! Random instances: component sets from the supported ensembles, calibrated
//! symmetric noise, and incoherence statistics.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spectral::{self, SpectralOptions};
use crate::tensor::{ComponentSet, DenseTensor, Ensemble, SymmetricTensor3, DEFAULT_DENSE_CAP};

/// Noise budget used by certification, `1 / (2 ln n)`.
pub fn certification_noise_budget(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64).ln())
}

/// Noise budget used by decomposition, `1 / (10 ln n)`.
pub fn decomposition_noise_budget(n: usize) -> f64 {
    1.0 / (10.0 * (n as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseShape {
    SymmetricGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub target_unfolding_norm: f64,
    pub seed: u64,
    pub shape: NoiseShape,
}

impl NoiseSpec {
    pub fn new(target_unfolding_norm: f64, seed: u64) -> Result<Self> {
        if !(0.0..f64::INFINITY).contains(&target_unfolding_norm) {
            return Err(Error::Precondition(format!(
                "noise target must be a finite nonnegative number, got {target_unfolding_norm}"
            )));
        }
        Ok(NoiseSpec {
            target_unfolding_norm,
            seed,
            shape: NoiseShape::SymmetricGaussian,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub max_coherence: f64,
    pub a_norm_sq: f64,
    pub gersh_row_sums: Vec<f64>,
}

/// Draws `m` i.i.d. unit components in `R^n`. Row `i` uses its own stream,
/// so the first rows of an instance do not depend on `m`.
pub fn sample_components(
    n: usize,
    m: usize,
    ensemble: Ensemble,
    seed: u64,
) -> Result<ComponentSet> {
    if n == 0 || m == 0 {
        return Err(Error::Precondition("n and m must be at least 1".into()));
    }
    let mut a = DMatrix::zeros(m, n);
    let scale = 1.0 / (n as f64).sqrt();
    for i in 0..m {
        let mut r = rng::stream(seed, "instances/components", i as u64);
        match ensemble {
            Ensemble::RademacherNormalized => {
                for j in 0..n {
                    a[(i, j)] = if r.random::<bool>() { scale } else { -scale };
                }
            }
            Ensemble::SphereUniform | Ensemble::GaussianNormalized => {
                let v = rng::unit_vector(&mut r, n);
                for j in 0..n {
                    a[(i, j)] = v[j];
                }
            }
            Ensemble::Explicit => {
                return Err(Error::Precondition(
                    "the explicit ensemble has no sampler".into(),
                ))
            }
        }
    }
    ComponentSet::new(a, ensemble, seed)
}

/// Component set and its tensor in component form.
pub fn sample_instance(
    n: usize,
    m: usize,
    ensemble: Ensemble,
    seed: u64,
) -> Result<(ComponentSet, SymmetricTensor3)> {
    let set = sample_components(n, m, ensemble, seed)?;
    let tensor = SymmetricTensor3::from_components(set.clone());
    Ok((set, tensor))
}

/// Symmetric Gaussian tensor rescaled so its unfolding has spectral norm
/// exactly `target` (up to the dense eigensolver's accuracy).
pub fn noise_tensor(n: usize, spec: &NoiseSpec, cap: usize) -> Result<DenseTensor> {
    if n > cap {
        return Err(Error::DensifyCap { n, cap });
    }
    let mut r = rng::stream(spec.seed, "instances/noise", 0);
    let raw: Vec<f64> = (0..n * n * n)
        .map(|_| r.sample::<f64, _>(StandardNormal))
        .collect();
    let mut e = DenseTensor::from_vec(n, raw)?.symmetrized();
    if spec.target_unfolding_norm == 0.0 {
        return Ok(DenseTensor::zeros(n));
    }
    let norm = e.unfolding_norm();
    if norm == 0.0 {
        return Err(Error::InvariantViolation(
            "sampled noise tensor vanished".into(),
        ));
    }
    e.scale(spec.target_unfolding_norm / norm);
    Ok(e)
}

/// `T~ = T + E`; a zero target returns `T` unchanged.
pub fn add_noise(tensor: &SymmetricTensor3, spec: &NoiseSpec) -> Result<SymmetricTensor3> {
    add_noise_capped(tensor, spec, DEFAULT_DENSE_CAP)
}

pub fn add_noise_capped(
    tensor: &SymmetricTensor3,
    spec: &NoiseSpec,
    cap: usize,
) -> Result<SymmetricTensor3> {
    if spec.target_unfolding_norm == 0.0 {
        return Ok(tensor.clone());
    }
    let e = noise_tensor(tensor.n(), spec, cap)?;
    tensor.with_noise(e)
}

/// Pairwise inner products (exact) and `‖A‖²` (iterative, to `tol`).
pub fn instance_stats(components: &ComponentSet, tol: f64) -> Result<InstanceStats> {
    let gram = components.gram();
    let m = components.m();
    let mut max_coherence = 0.0f64;
    let mut gersh_row_sums = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let g = gram[(i, j)].abs();
            max_coherence = max_coherence.max(g);
            gersh_row_sums[i] += g * g * g;
        }
    }
    let est = a_norm(components, tol)?;
    Ok(InstanceStats {
        max_coherence: max_coherence.min(1.0),
        a_norm_sq: est.value * est.value,
        gersh_row_sums,
    })
}

/// Largest singular value of `A` (rows `a_i`), matrix-free.
pub fn a_norm(components: &ComponentSet, tol: f64) -> Result<spectral::SpectralEstimate> {
    let a = components.vectors();
    let opts = SpectralOptions::default()
        .with_tol(tol)
        .with_seed(components.seed());
    let est = spectral::spectral_norm(
        |x| a * x,
        |y| a.tr_mul(y),
        components.n(),
        components.m(),
        &opts,
    )?;
    if !est.converged {
        return Err(Error::NonConvergence {
            what: "spectral norm of A",
            residual: est.residual,
            iterations: est.iterations,
        });
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rademacher_entries_and_determinism() {
        let (a, _) = sample_instance(4, 2, Ensemble::RademacherNormalized, 7).unwrap();
        assert!(a.vectors().iter().all(|v| *v == 0.5 || *v == -0.5));
        let (b, _) = sample_instance(4, 2, Ensemble::RademacherNormalized, 7).unwrap();
        assert_eq!(a, b);
        let (c, _) = sample_instance(4, 2, Ensemble::RademacherNormalized, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sphere_rows_are_unit() {
        let (a, t) = sample_instance(4, 3, Ensemble::SphereUniform, 1).unwrap();
        for row in a.vectors().row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
        assert!(t.components().is_some());
        let (g, _) = sample_instance(6, 5, Ensemble::GaussianNormalized, 1).unwrap();
        for row in g.vectors().row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_do_not_depend_on_m() {
        let small = sample_components(10, 3, Ensemble::RademacherNormalized, 5).unwrap();
        let large = sample_components(10, 8, Ensemble::RademacherNormalized, 5).unwrap();
        assert_eq!(small.vectors().rows(0, 3), large.vectors().rows(0, 3));
    }

    #[test]
    fn rademacher_inner_products_have_parity_of_n() {
        for n in [7usize, 8] {
            let a = sample_components(n, 6, Ensemble::RademacherNormalized, 3).unwrap();
            let g = a.gram();
            for i in 0..6 {
                for j in 0..6 {
                    let scaled = g[(i, j)] * n as f64;
                    let k = scaled.round();
                    assert!((scaled - k).abs() < 1e-9);
                    assert_eq!((k as i64).rem_euclid(2), (n as i64) % 2);
                }
            }
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let (_, t) = sample_instance(5, 4, Ensemble::RademacherNormalized, 2).unwrap();
        let spec = NoiseSpec::new(0.0, 1).unwrap();
        let tn = add_noise(&t, &spec).unwrap();
        assert!(tn.noise().is_none());
        assert_eq!(tn.densify(64).unwrap(), t.densify(64).unwrap());
    }

    #[test]
    fn noise_is_calibrated_and_symmetric() {
        let (_, t) = sample_instance(20, 30, Ensemble::RademacherNormalized, 4).unwrap();
        let spec = NoiseSpec::new(0.05, 9).unwrap();
        let tn = add_noise(&t, &spec).unwrap();
        let e = tn.noise().unwrap();
        assert!(e.max_asymmetry() <= 1e-12);
        // oracle: matrix-free estimator on the unfolding
        let u = e.unfold();
        let ut = u.transpose();
        let est = spectral::spectral_norm(
            |x| &u * x,
            |y| &ut * y,
            400,
            20,
            &SpectralOptions::default(),
        )
        .unwrap();
        assert!(
            est.value >= 0.04999 && est.value <= 0.05001,
            "{}",
            est.value
        );
        assert_relative_eq!(est.value, 0.05, max_relative = 1e-6);
    }

    #[test]
    fn noise_cap_is_enforced() {
        let (_, t) = sample_instance(10, 2, Ensemble::RademacherNormalized, 2).unwrap();
        let spec = NoiseSpec::new(0.1, 1).unwrap();
        assert!(matches!(
            add_noise_capped(&t, &spec, 8),
            Err(Error::DensifyCap { .. })
        ));
        assert!(NoiseSpec::new(-1.0, 0).is_err());
    }

    #[test]
    fn stats_examples() {
        let ortho = ComponentSet::orthonormal(5, 3).unwrap();
        let s = instance_stats(&ortho, 1e-9).unwrap();
        assert_eq!(s.max_coherence, 0.0);
        assert!(s.gersh_row_sums.iter().all(|v| *v == 0.0));
        assert_relative_eq!(s.a_norm_sq, 1.0, max_relative = 1e-8);

        let h = 0.5f64.sqrt();
        let two = ComponentSet::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, h, h]),
            Ensemble::Explicit,
            0,
        )
        .unwrap();
        let s = instance_stats(&two, 1e-9).unwrap();
        assert_relative_eq!(
            s.max_coherence,
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );

        let dup = ComponentSet::new(
            DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.6, 0.8]),
            Ensemble::Explicit,
            0,
        )
        .unwrap();
        assert_relative_eq!(
            instance_stats(&dup, 1e-9).unwrap().max_coherence,
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn coherence_bound_over_seeds() {
        // n = 400, m = 20: max |<a_i,a_j>| <= 6/sqrt(n) on 100 seeds
        for seed in 0..100 {
            let a = sample_components(400, 20, Ensemble::RademacherNormalized, seed).unwrap();
            let g = a.gram();
            let mut worst = 0.0f64;
            for i in 0..20 {
                for j in 0..20 {
                    if i != j {
                        worst = worst.max(g[(i, j)].abs());
                    }
                }
            }
            assert!(worst <= 0.3, "seed {seed}: {worst}");
        }
    }
}
