//! Component-aware injective-norm certificate.
//!
//! For unit `x` the chain is
//!
//! ```text
//! T(x,x,x)^2 <= S4(x) + p(x)                       (Cauchy–Schwarz)
//! S4(x)^2    <= S6(x) + Σ_{i≠j} <a_i,a_j><a_i,x>^3<a_j,x>^3
//!            <= ‖B B^T‖ + sqrt(c) · ‖A‖² · S4(x)
//! p(x)        = (x⊗x)^T M (x⊗x) <= ‖M‖
//! ```
//!
//! where `B` has rows `a_i^{⊗3}`, `c = max_{i≠j} <a_i,a_j>²` and
//! `M = Σ_{i≠j} <a_i,a_j> (a_i⊗a_j)(a_i⊗a_j)^T`. The middle inequality is
//! closed with the quadratic formula; `‖BB^T‖` is bounded by Gershgorin.
//! Noise enters additively through the spectral norm of its unfolding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, SpectralOptions};
use crate::tensor::{ComponentSet, SymmetricTensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub n: usize,
    pub m: usize,
    pub gersh_bound: f64,
    pub max_coherence_sq: f64,
    pub a_norm_sq: f64,
    pub cross_term_norm: f64,
    pub s4_bound: f64,
    pub noise_norm: f64,
    pub bound: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// `1 + 1/ln n`.
pub fn default_threshold(n: usize) -> f64 {
    1.0 + 1.0 / (n as f64).ln()
}

/// `1 + max_i Σ_{j≠i} |<a_i,a_j>|^3`, an upper bound on `‖BB^T‖`.
pub fn gram_cubed_bound(components: &ComponentSet) -> f64 {
    let g = components.gram();
    let m = components.m();
    let mut worst = 0.0f64;
    for i in 0..m {
        let s: f64 = (0..m)
            .filter(|&j| j != i)
            .map(|j| g[(i, j)].abs().powi(3))
            .sum();
        worst = worst.max(s);
    }
    1.0 + worst
}

/// `max_{i≠j} <a_i,a_j>²`, zero for a single component.
pub fn max_coherence_sq(components: &ComponentSet) -> f64 {
    let g = components.gram();
    let m = components.m();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                worst = worst.max(g[(i, j)] * g[(i, j)]);
            }
        }
    }
    worst.min(1.0)
}

/// Matrix-free `y ↦ Σ_{i≠j} w_ij <a_i,a_j> <a_i⊗a_j, y> (a_i⊗a_j)` on `R^{n²}`
/// with optional sign weights `w_ij = σ_i τ_j`.
///
/// Uses `<a_i⊗a_j, y> = a_i^T Y a_j` for `Y` the row-major `n x n` reshape of
/// `y`, so one application costs `O(m n² + m² n)`.
#[derive(Debug, Clone)]
pub struct CrossOperator {
    a: DMatrix<f64>,
    weights: DMatrix<f64>,
}

impl CrossOperator {
    pub fn new(components: &ComponentSet) -> Self {
        let mut g = components.gram();
        g.fill_diagonal(0.0);
        CrossOperator {
            a: components.vectors().clone(),
            weights: g,
        }
    }

    /// Weights `σ_i τ_j <a_i,a_j>` off the diagonal.
    pub fn signed(components: &ComponentSet, sigma: &[f64], tau: &[f64]) -> Result<Self> {
        let m = components.m();
        for (name, s) in [("sigma", sigma), ("tau", tau)] {
            if s.len() != m {
                return Err(Error::Precondition(format!(
                    "{name} has length {}, expected {m}",
                    s.len()
                )));
            }
        }
        let mut op = Self::new(components);
        for (i, si) in sigma.iter().enumerate() {
            for (j, tj) in tau.iter().enumerate() {
                op.weights[(i, j)] *= si * tj;
            }
        }
        Ok(op)
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn dim(&self) -> usize {
        self.n() * self.n()
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let ymat = DMatrix::from_row_slice(n, n, y.as_slice());
        let p = &self.a * ymat * self.a.transpose();
        let w = self.weights.component_mul(&p);
        let r = self.a.tr_mul(&w) * &self.a;
        // row-major flatten of r
        DVector::from_iterator(n * n, r.transpose().iter().copied())
    }

    /// Dense `n² x n²` matrix (small `n` only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for c in 0..d {
            let mut e = DVector::zeros(d);
            e[c] = 1.0;
            out.set_column(c, &self.apply(&e));
        }
        out
    }
}

pub fn build_cross_operator(components: &ComponentSet) -> CrossOperator {
    CrossOperator::new(components)
}

/// Largest singular value of a cross operator, inflated by `1 + 2 tol`.
pub fn operator_norm_upper(op: &CrossOperator, tol: f64, seed: u64) -> Result<f64> {
    if op.weights.iter().all(|w| *w == 0.0) {
        return Ok(0.0);
    }
    let opts = SpectralOptions::default().with_tol(tol).with_seed(seed);
    let est = spectral::symmetric_norm(|y| op.apply(y), op.dim(), &opts)?;
    if !est.converged {
        return Err(Error::NonConvergence {
            what: "cross-term spectral norm",
            residual: est.residual,
            iterations: est.iterations,
        });
    }
    Ok(est.value * (1.0 + 2.0 * tol))
}

/// Certified upper bound on `‖M‖`.
pub fn cross_term_norm(components: &ComponentSet, tol: f64) -> Result<f64> {
    operator_norm_upper(&CrossOperator::new(components), tol, components.seed())
}

/// Certified upper bound on `‖A‖²`; never below 1 since rows are unit.
pub fn a_norm_sq_upper(components: &ComponentSet, tol: f64) -> Result<f64> {
    if components.m() == 1 {
        return Ok(1.0);
    }
    let est = crate::instances::a_norm(components, tol)?;
    let sigma = est.value * (1.0 + 2.0 * tol);
    Ok((sigma * sigma).max(1.0))
}

/// Positive root of `s² = δ_B + β s`, `β = sqrt(c)·α`.
pub fn s4_bound(gersh: f64, max_coherence_sq: f64, a_norm_sq: f64) -> Result<f64> {
    if !(1.0..).contains(&gersh) {
        return Err(Error::Precondition(format!("gersh bound {gersh} < 1")));
    }
    if !(0.0..=1.0).contains(&max_coherence_sq) {
        return Err(Error::Precondition(format!(
            "max coherence squared {max_coherence_sq} outside [0, 1]"
        )));
    }
    if !(1.0..).contains(&a_norm_sq) {
        return Err(Error::Precondition(format!("‖A‖² bound {a_norm_sq} < 1")));
    }
    let beta = max_coherence_sq.sqrt() * a_norm_sq;
    Ok((beta + (beta * beta + 4.0 * gersh).sqrt()) / 2.0)
}

/// Runs the full chain on a component-form tensor. `threshold` defaults to
/// `1 + 1/ln n`.
pub fn certify(
    tensor: &SymmetricTensor3,
    threshold: Option<f64>,
    tol: f64,
) -> Result<CertificateReport> {
    let components = tensor.components().ok_or(Error::MissingComponents)?;
    let gersh = gram_cubed_bound(components);
    let c = max_coherence_sq(components);
    let alpha = a_norm_sq_upper(components, tol)?;
    let mu = cross_term_norm(components, tol)?;
    let nu = tensor.noise().map(|e| e.unfolding_norm()).unwrap_or(0.0);
    let s4 = s4_bound(gersh, c, alpha)?;
    let bound = (s4 + mu).sqrt() + nu;
    let threshold = threshold.unwrap_or_else(|| default_threshold(tensor.n()));
    Ok(CertificateReport {
        n: components.n(),
        m: components.m(),
        gersh_bound: gersh,
        max_coherence_sq: c,
        a_norm_sq: alpha,
        cross_term_norm: mu,
        s4_bound: s4,
        noise_norm: nu,
        bound,
        threshold,
        verdict: if bound <= threshold {
            Verdict::Yes
        } else {
            Verdict::No
        },
    })
}
