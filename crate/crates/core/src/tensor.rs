//! Symmetric third-order tensors, component sets and the linear algebra
//! shared by the certificate, relaxation and decomposition code.
//!
//! Index conventions:
//! * dense storage is lexicographic, entry `(i, j, k)` at `i*n*n + j*n + k`;
//! * the unfolding is `n x n^2` with column `j*n + k`;
//! * `(u ⊗ v)[p*n + q] = u[p] * v[q]`, matching [`kronecker`] on column vectors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densification is refused above this dimension unless a caller raises it.
pub const DEFAULT_DENSE_CAP: usize = 64;

/// Unit-norm tolerance for component rows.
pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    RademacherNormalized,
    SphereUniform,
    GaussianNormalized,
    /// Hand-built component sets (orthonormal fixtures, files from elsewhere).
    Explicit,
}

impl Ensemble {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ensemble::RademacherNormalized => "rademacher-normalized",
            Ensemble::SphereUniform => "sphere-uniform",
            Ensemble::GaussianNormalized => "gaussian-normalized",
            Ensemble::Explicit => "explicit",
        }
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rademacher-normalized" | "rademacher" => Ok(Ensemble::RademacherNormalized),
            "sphere-uniform" | "sphere" => Ok(Ensemble::SphereUniform),
            "gaussian-normalized" | "gaussian" => Ok(Ensemble::GaussianNormalized),
            "explicit" => Ok(Ensemble::Explicit),
            other => Err(Error::format(
                "ensemble",
                format!("unknown ensemble `{other}`"),
            )),
        }
    }
}

/// The `m` unit vectors `a_i ∈ R^n`, stored as the rows of an `m x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    vectors: DMatrix<f64>,
    ensemble: Ensemble,
    seed: u64,
}

impl ComponentSet {
    /// Validates `m, n >= 1` and unit rows.
    pub fn new(vectors: DMatrix<f64>, ensemble: Ensemble, seed: u64) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::InvariantViolation(
                "component set needs m >= 1 and n >= 1".into(),
            ));
        }
        for (i, row) in vectors.row_iter().enumerate() {
            let norm = row.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvariantViolation(format!(
                    "component {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(ComponentSet {
            vectors,
            ensemble,
            seed,
        })
    }

    /// Normalizes every row first; rows must be nonzero.
    pub fn normalized(mut vectors: DMatrix<f64>, ensemble: Ensemble, seed: u64) -> Result<Self> {
        for mut row in vectors.row_iter_mut() {
            let norm = row.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvariantViolation(
                    "cannot normalize a zero row".into(),
                ));
            }
            row /= norm;
        }
        Self::new(vectors, ensemble, seed)
    }

    /// The first `m` standard basis vectors of `R^n`.
    pub fn orthonormal(n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(Error::Precondition(format!(
                "cannot build {m} orthonormal vectors in R^{n}"
            )));
        }
        let mut a = DMatrix::zeros(m, n);
        for i in 0..m {
            a[(i, i)] = 1.0;
        }
        Self::new(a, Ensemble::Explicit, 0)
    }

    pub fn n(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn m(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.vectors.row(i).transpose()
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Gram matrix `A A^T` with entries `<a_i, a_j>`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.vectors * self.vectors.transpose()
    }
}

/// Dense `n x n x n` array in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    n: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(n: usize) -> Self {
        DenseTensor {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n * n,
                found: data.len(),
            });
        }
        Ok(DenseTensor { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        self.data[(i * n + j) * n + k] = v;
    }

    /// Average over the six index permutations.
    pub fn symmetrized(&self) -> DenseTensor {
        let n = self.n;
        let mut out = DenseTensor::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = self.get(i, j, k)
                        + self.get(i, k, j)
                        + self.get(j, i, k)
                        + self.get(j, k, i)
                        + self.get(k, i, j)
                        + self.get(k, j, i);
                    out.set(i, j, k, s / 6.0);
                }
            }
        }
        out
    }

    /// Largest deviation between an entry and any of its index permutations.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    for w in [
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn add_assign(&mut self, other: &DenseTensor) {
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn eval_multilinear(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let mut si = 0.0;
            for j in 0..n {
                let row = &self.data[(i * n + j) * n..(i * n + j + 1) * n];
                let sj: f64 = row.iter().zip(z.iter()).map(|(t, zk)| t * zk).sum();
                si += y[j] * sj;
            }
            total += x[i] * si;
        }
        total
    }

    /// `v_i = T(e_i, x, x)`.
    pub fn contract(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let mut si = 0.0;
                for j in 0..n {
                    let row = &self.data[(i * n + j) * n..(i * n + j + 1) * n];
                    let sj: f64 = row.iter().zip(x.iter()).map(|(t, xk)| t * xk).sum();
                    si += x[j] * sj;
                }
                si
            }),
        )
    }

    /// `n x n^2` matrix with `U[i, j*n + k] = T[i, j, k]`.
    pub fn unfold(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_row_slice(n, n * n, &self.data)
    }

    /// Spectral norm of the unfolding, computed densely through the
    /// `n x n` Gram matrix `U U^T`.
    pub fn unfolding_norm(&self) -> f64 {
        let u = self.unfold();
        crate::spectral::dense_spectral_norm(&u)
    }
}

/// Storage of a [`SymmetricTensor3`].
#[derive(Debug, Clone)]
pub enum Storage {
    Dense(DenseTensor),
    /// `Σ a_i^{⊗3}` plus an optional dense perturbation.
    Components {
        set: Arc<ComponentSet>,
        noise: Option<Arc<DenseTensor>>,
    },
}

#[derive(Debug, Clone)]
pub struct SymmetricTensor3 {
    n: usize,
    storage: Storage,
}

fn check_dim(n: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    Ok(())
}

impl SymmetricTensor3 {
    /// `T = Σ_i a_i^{⊗3}` in component form.
    pub fn from_components(components: ComponentSet) -> Self {
        Self::from_shared_components(Arc::new(components))
    }

    pub fn from_shared_components(components: Arc<ComponentSet>) -> Self {
        SymmetricTensor3 {
            n: components.n(),
            storage: Storage::Components {
                set: components,
                noise: None,
            },
        }
    }

    /// Dense tensor; rejects entries that are not permutation symmetric.
    pub fn from_dense(dense: DenseTensor) -> Result<Self> {
        let asym = dense.max_asymmetry();
        if asym > 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "dense tensor is not symmetric (max deviation {asym:e})"
            )));
        }
        Ok(SymmetricTensor3 {
            n: dense.n(),
            storage: Storage::Dense(dense),
        })
    }

    /// Adds `noise` to the tensor, keeping component form when present.
    pub fn with_noise(&self, noise: DenseTensor) -> Result<Self> {
        if noise.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: noise.n(),
            });
        }
        let storage = match &self.storage {
            Storage::Dense(d) => {
                let mut sum = d.clone();
                sum.add_assign(&noise);
                Storage::Dense(sum)
            }
            Storage::Components { set, noise: old } => {
                let merged = match old {
                    Some(e) => {
                        let mut sum = (**e).clone();
                        sum.add_assign(&noise);
                        sum
                    }
                    None => noise,
                };
                Storage::Components {
                    set: Arc::clone(set),
                    noise: Some(Arc::new(merged)),
                }
            }
        };
        Ok(SymmetricTensor3 { n: self.n, storage })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn components(&self) -> Option<&ComponentSet> {
        match &self.storage {
            Storage::Components { set, .. } => Some(set),
            Storage::Dense(_) => None,
        }
    }

    pub fn noise(&self) -> Option<&DenseTensor> {
        match &self.storage {
            Storage::Components { noise, .. } => noise.as_deref(),
            Storage::Dense(_) => None,
        }
    }

    /// Dense copy of the tensor, refused when `n > cap`.
    pub fn densify(&self, cap: usize) -> Result<DenseTensor> {
        if self.n > cap {
            return Err(Error::DensifyCap { n: self.n, cap });
        }
        match &self.storage {
            Storage::Dense(d) => Ok(d.clone()),
            Storage::Components { set, noise } => {
                let n = self.n;
                let mut out = match noise {
                    Some(e) => (**e).clone(),
                    None => DenseTensor::zeros(n),
                };
                for a in set.vectors().row_iter() {
                    for i in 0..n {
                        let ai = a[i];
                        if ai == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            let aij = ai * a[j];
                            let base = (i * n + j) * n;
                            for k in 0..n {
                                out.data[base + k] += aij * a[k];
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// `T(x, x, x)`.
    pub fn eval_cubic(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.n, x)?;
        Ok(match &self.storage {
            Storage::Dense(d) => d.eval_multilinear(x, x, x),
            Storage::Components { set, noise } => {
                let proj = set.vectors() * x;
                let mut v: f64 = proj.iter().map(|c| c * c * c).sum();
                if let Some(e) = noise {
                    v += e.eval_multilinear(x, x, x);
                }
                v
            }
        })
    }

    /// `T(x, y, z)`.
    pub fn eval_multilinear(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> Result<f64> {
        check_dim(self.n, x)?;
        check_dim(self.n, y)?;
        check_dim(self.n, z)?;
        Ok(match &self.storage {
            Storage::Dense(d) => d.eval_multilinear(x, y, z),
            Storage::Components { set, noise } => {
                let a = set.vectors();
                let (px, py, pz) = (a * x, a * y, a * z);
                let mut v: f64 = (0..px.len()).map(|t| px[t] * py[t] * pz[t]).sum();
                if let Some(e) = noise {
                    v += e.eval_multilinear(x, y, z);
                }
                v
            }
        })
    }

    /// `v` with `v_i = T(e_i, x, x)`; in component form `Σ_t <a_t,x>^2 a_t`.
    pub fn contract(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.n, x)?;
        Ok(match &self.storage {
            Storage::Dense(d) => d.contract(x),
            Storage::Components { set, noise } => {
                let a = set.vectors();
                let sq = (a * x).map(|c| c * c);
                let mut v = a.tr_mul(&sq);
                if let Some(e) = noise {
                    v += e.contract(x);
                }
                v
            }
        })
    }

    /// The `n x n^2` unfolding (column `j*n + k`), subject to the densification cap.
    pub fn unfold(&self, cap: usize) -> Result<DMatrix<f64>> {
        Ok(self.densify(cap)?.unfold())
    }
}

/// Kronecker product; block `(i, j)` of the result is `U[i, j] * V`.
pub fn kronecker(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    u.kronecker(v)
}

/// `u ⊗ v` as a vector of length `len(u) * len(v)`.
pub fn kron_vec(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let (p, q) = (u.len(), v.len());
    DVector::from_iterator(p * q, (0..p * q).map(|idx| u[idx / q] * v[idx % q]))
}
