//! Matrix-free estimates of the largest singular value.
//!
//! The default estimator runs Lanczos with full reorthogonalization on the
//! Gram operator `A^T A` (or on the operator itself when it is self-adjoint),
//! restarting from the current Ritz vector when the basis limit is reached.
//! Plain power iteration is kept as [`SpectralMethod::Power`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Relative change of the estimate over the last convergence window.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    Lanczos,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub tol: f64,
    /// Operator applications allowed; `None` means `10 * dim`.
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub method: SpectralMethod,
    /// Krylov basis size before an explicit restart.
    pub max_basis: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol: 1e-9,
            max_iter: None,
            seed: 0,
            method: SpectralMethod::Lanczos,
            max_basis: 120,
        }
    }
}

impl SpectralOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_method(mut self, method: SpectralMethod) -> Self {
        self.method = method;
        self
    }

    fn budget(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(10 * dim.max(1)).max(1)
    }
}

/// Which extreme of a symmetric spectrum to track.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Largest,
    LargestMagnitude,
}

// iterations over which the Ritz value must settle
const WINDOW: usize = 4;

/// Largest singular value of the operator `apply: R^dim_in -> R^dim_out`.
pub fn spectral_norm<F, G>(
    mut apply: F,
    mut adjoint: G,
    dim_in: usize,
    dim_out: usize,
    opts: &SpectralOptions,
) -> Result<SpectralEstimate>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    G: FnMut(&DVector<f64>) -> DVector<f64>,
{
    check_adjoint(&mut apply, &mut adjoint, dim_in, dim_out, opts.seed)?;
    if dim_in == 0 || dim_out == 0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    // iterate on the smaller Gram operator
    let est = if dim_in <= dim_out {
        let gram = |x: &DVector<f64>| adjoint(&apply(x));
        run(gram, dim_in, opts, Target::Largest)
    } else {
        let gram = |x: &DVector<f64>| apply(&adjoint(x));
        run(gram, dim_out, opts, Target::Largest)
    };
    Ok(SpectralEstimate {
        value: est.value.max(0.0).sqrt(),
        iterations: est.iterations,
        residual: est.residual / 2.0,
        converged: est.converged,
    })
}

/// `max |λ|` of a self-adjoint operator on `R^dim`.
pub fn symmetric_norm<F>(
    mut apply: F,
    dim: usize,
    opts: &SpectralOptions,
) -> Result<SpectralEstimate>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut r = rng::stream(opts.seed, "spectral/self-adjoint-check", 0);
    if dim > 0 {
        let u = rng::gaussian_vector(&mut r, dim);
        let v = rng::gaussian_vector(&mut r, dim);
        let (au, av) = (apply(&u), apply(&v));
        let lhs = au.dot(&v);
        let rhs = u.dot(&av);
        let scale = 1.0f64.max(au.norm() * v.norm());
        if (lhs - rhs).abs() > 1e-8 * scale {
            return Err(Error::AdjointMismatch {
                discrepancy: (lhs - rhs).abs(),
            });
        }
    } else {
        return Ok(SpectralEstimate {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let est = run(apply, dim, opts, Target::LargestMagnitude);
    Ok(SpectralEstimate {
        value: est.value.abs(),
        ..est
    })
}

fn check_adjoint<F, G>(
    apply: &mut F,
    adjoint: &mut G,
    dim_in: usize,
    dim_out: usize,
    seed: u64,
) -> Result<()>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    G: FnMut(&DVector<f64>) -> DVector<f64>,
{
    if dim_in == 0 || dim_out == 0 {
        return Ok(());
    }
    let mut r = rng::stream(seed, "spectral/adjoint-check", 0);
    let u = rng::gaussian_vector(&mut r, dim_in);
    let v = rng::gaussian_vector(&mut r, dim_out);
    let au = apply(&u);
    let atv = adjoint(&v);
    if au.len() != dim_out {
        return Err(Error::DimensionMismatch {
            expected: dim_out,
            found: au.len(),
        });
    }
    if atv.len() != dim_in {
        return Err(Error::DimensionMismatch {
            expected: dim_in,
            found: atv.len(),
        });
    }
    let lhs = au.dot(&v);
    let rhs = u.dot(&atv);
    let scale = 1.0f64.max(au.norm() * v.norm());
    if (lhs - rhs).abs() > 1e-8 * scale {
        return Err(Error::AdjointMismatch {
            discrepancy: (lhs - rhs).abs(),
        });
    }
    Ok(())
}

fn run<F>(apply: F, dim: usize, opts: &SpectralOptions, target: Target) -> SpectralEstimate
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    match opts.method {
        SpectralMethod::Lanczos => lanczos(apply, dim, opts, target),
        SpectralMethod::Power => power(apply, dim, opts, target),
    }
}

fn relative_window_change(history: &[f64]) -> f64 {
    if history.len() <= WINDOW {
        return f64::INFINITY;
    }
    let last = history[history.len() - 1];
    let prev = history[history.len() - 1 - WINDOW];
    let scale = last.abs();
    if scale == 0.0 {
        if prev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (last - prev).abs() / scale
    }
}

fn pick(values: &DVector<f64>, target: Target) -> usize {
    let key = |v: f64| match target {
        Target::Largest => v,
        Target::LargestMagnitude => v.abs(),
    };
    let mut best = 0;
    for i in 1..values.len() {
        if key(values[i]) > key(values[best]) {
            best = i;
        }
    }
    best
}

fn lanczos<F>(mut apply: F, dim: usize, opts: &SpectralOptions, target: Target) -> SpectralEstimate
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let budget = opts.budget(dim);
    let max_basis = opts.max_basis.max(2).min(dim.max(1));
    let mut r = rng::stream(opts.seed, "spectral/lanczos-start", 0);
    let mut start = rng::unit_vector(&mut r, dim);
    let mut history: Vec<f64> = Vec::new();
    let mut applications = 0usize;

    loop {
        let mut basis: Vec<DVector<f64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        start = loop {
            let k = basis.len() - 1;
            let mut w = apply(&basis[k]);
            applications += 1;
            let alpha = basis[k].dot(&w);
            w.axpy(-alpha, &basis[k], 1.0);
            if k > 0 {
                w.axpy(-betas[k - 1], &basis[k - 1], 1.0);
            }
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let beta = w.norm();
            alphas.push(alpha);

            let size = alphas.len();
            let mut tri = DMatrix::zeros(size, size);
            for i in 0..size {
                tri[(i, i)] = alphas[i];
                if i + 1 < size {
                    tri[(i, i + 1)] = betas[i];
                    tri[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(tri);
            let idx = pick(&eig.eigenvalues, target);
            let theta = eig.eigenvalues[idx];
            history.push(theta);
            let scale = theta
                .abs()
                .max(alphas.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            let ritz_residual = beta * eig.eigenvectors[(size - 1, idx)].abs();

            // invariant subspace reached or the Krylov space is the whole space
            let exhausted = beta <= 1e-14 * scale.max(1e-300) || size == dim;
            let change = relative_window_change(&history);
            let settled = change <= opts.tol / 10.0 || ritz_residual <= opts.tol * theta.abs();
            if exhausted || settled {
                return SpectralEstimate {
                    value: theta,
                    iterations: applications,
                    residual: if exhausted {
                        0.0
                    } else {
                        change.min(ritz_residual / theta.abs().max(1e-300))
                    },
                    converged: true,
                };
            }
            if applications >= budget {
                return SpectralEstimate {
                    value: theta,
                    iterations: applications,
                    residual: change,
                    converged: false,
                };
            }
            if size == max_basis {
                let s = eig.eigenvectors.column(idx);
                let mut v = DVector::zeros(dim);
                for (i, b) in basis.iter().enumerate() {
                    v.axpy(s[i], b, 1.0);
                }
                let norm = v.norm();
                break v / norm;
            }
            betas.push(beta);
            basis.push(w / beta);
        };
    }
}

fn power<F>(mut apply: F, dim: usize, opts: &SpectralOptions, target: Target) -> SpectralEstimate
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let budget = opts.budget(dim);
    let mut r = rng::stream(opts.seed, "spectral/power-start", 0);
    let mut x = rng::unit_vector(&mut r, dim);
    let mut history: Vec<f64> = Vec::new();
    let mut restarted = false;
    let mut value = 0.0;
    // for indefinite operators iterate on the square, which has the same top magnitude
    let square = target == Target::LargestMagnitude;
    for it in 1..=budget {
        let mut y = apply(&x);
        if square {
            y = apply(&y);
        }
        let norm = y.norm();
        value = if square { norm.sqrt() } else { x.dot(&y) };
        history.push(value);
        if norm == 0.0 {
            if !restarted {
                restarted = true;
                x = rng::unit_vector(&mut r, dim);
                continue;
            }
            return SpectralEstimate {
                value: 0.0,
                iterations: it,
                residual: 0.0,
                converged: true,
            };
        }
        let change = relative_window_change(&history);
        if change <= opts.tol / 10.0 {
            return SpectralEstimate {
                value,
                iterations: it,
                residual: change,
                converged: true,
            };
        }
        // stagnation: one random restart half way through the budget
        if !restarted && it == budget / 2 {
            restarted = true;
            let fresh = rng::unit_vector(&mut r, dim);
            x = (&y / norm) + fresh * 1e-3;
            let nx = x.norm();
            x /= nx;
            continue;
        }
        x = y / norm;
    }
    SpectralEstimate {
        value,
        iterations: budget,
        residual: relative_window_change(&history),
        converged: false,
    }
}

/// Exact largest singular value through a dense symmetric eigensolve of the
/// smaller Gram matrix.
pub fn dense_spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.max().max(0.0).sqrt()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Draws a random probe; shared by callers that check operators on random inputs.
pub fn random_probe<R: Rng + ?Sized>(r: &mut R, dim: usize) -> DVector<f64> {
    rng::gaussian_vector(r, dim)
}
