//! Component recovery: extraction with deflation, refinement, matching.
//!
//! Candidates come from multi-start runs of the normalized contraction map
//! `x ← T(·,x,x) / ‖T(·,x,x)‖`. A candidate `c` is accepted when
//! `T(c,c,c) >= accept_threshold` and `<s,c>² <= deflation_threshold_sq` for
//! every previously accepted `s`. Accepted candidates are then polished by
//! cyclic single-component updates on the implicit residual.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{ComponentSet, Storage, SymmetricTensor3, DEFAULT_DENSE_CAP};

/// Contractions below this norm cannot be normalized.
pub const VANISHING_CONTRACTION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Uniform on the sphere.
    Uniform,
    /// Top eigenvector of the matrix slice `T(·,·,g)` for Gaussian `g`.
    Contraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub accept_threshold: f64,
    pub deflation_threshold_sq: f64,
    pub restarts_per_component: usize,
    pub ascent_steps: usize,
    pub ascent_tol: f64,
    pub seed: u64,
    pub start_mode: StartMode,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            accept_threshold: 0.99,
            deflation_threshold_sq: 1.0 / 8.0,
            restarts_per_component: 200,
            ascent_steps: 500,
            ascent_tol: 1e-10,
            seed: 0,
            start_mode: StartMode::Uniform,
        }
    }
}

impl ExtractionConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accept_threshold > 0.0 && self.accept_threshold <= 1.0) {
            return Err(Error::Precondition(format!(
                "accept_threshold {} outside (0, 1]",
                self.accept_threshold
            )));
        }
        if !(self.deflation_threshold_sq > 0.0 && self.deflation_threshold_sq < 1.0) {
            return Err(Error::Precondition(format!(
                "deflation_threshold_sq {} outside (0, 1)",
                self.deflation_threshold_sq
            )));
        }
        if self.restarts_per_component == 0 || self.ascent_steps == 0 {
            return Err(Error::Precondition(
                "restart and step budgets must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub point: DVector<f64>,
    pub value: f64,
    pub steps: usize,
    /// Successive iterates came within `tol`.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AscentOutcome {
    Point(Ascent),
    /// The contraction vanished at step `steps`; the caller should restart.
    Restart {
        steps: usize,
    },
}

/// Iterates the normalized contraction map from `x0`.
pub fn ascend(
    tensor: &SymmetricTensor3,
    x0: &DVector<f64>,
    steps: usize,
    tol: f64,
) -> Result<AscentOutcome> {
    if x0.len() != tensor.n() {
        return Err(Error::DimensionMismatch {
            expected: tensor.n(),
            found: x0.len(),
        });
    }
    if (x0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!("start has norm {}", x0.norm())));
    }
    let mut x = x0.clone();
    let mut converged = false;
    let mut taken = 0;
    for step in 1..=steps {
        let v = tensor.contract(&x)?;
        let norm = v.norm();
        if norm < VANISHING_CONTRACTION {
            return Ok(AscentOutcome::Restart { steps: step });
        }
        let next = v / norm;
        let moved = (&next - &x).norm();
        x = next;
        taken = step;
        if moved <= tol {
            converged = true;
            break;
        }
    }
    let value = tensor.eval_cubic(&x)?;
    Ok(AscentOutcome::Point(Ascent {
        point: x,
        value,
        steps: taken,
        converged,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTelemetry {
    /// Restarts consumed, including the accepted one.
    pub restarts: usize,
    pub value: f64,
}

/// What extraction had accepted when it stalled.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialExtraction {
    pub accepted: Vec<DVector<f64>>,
    pub telemetry: Vec<ComponentTelemetry>,
    /// Best ascent value seen during the stalled search, feasible or not.
    pub best_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// `m x n`, accepted candidates as rows in acceptance order.
    pub candidates: DMatrix<f64>,
    pub telemetry: Vec<ComponentTelemetry>,
}

/// `T(·,·,g)` as a dense `n x n` matrix.
fn matrix_slice(tensor: &SymmetricTensor3, g: &DVector<f64>) -> DMatrix<f64> {
    let n = tensor.n();
    let dense_slice = |d: &crate::tensor::DenseTensor| {
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| d.get(i, j, k) * g[k]).sum())
    };
    match tensor.storage() {
        Storage::Dense(d) => dense_slice(d),
        Storage::Components { set, noise } => {
            let a = set.vectors();
            let w = a * g;
            let scaled = DMatrix::from_fn(a.nrows(), n, |t, j| a[(t, j)] * w[t]);
            let mut out = a.tr_mul(&scaled);
            if let Some(e) = noise {
                out += dense_slice(e);
            }
            out
        }
    }
}

fn start_point(
    tensor: &SymmetricTensor3,
    mode: StartMode,
    seed: u64,
    component: usize,
    restart: usize,
) -> DVector<f64> {
    let index = ((component as u64) << 32) | restart as u64;
    let mut r = rng::stream(seed, "decomposition/start", index);
    let n = tensor.n();
    match mode {
        StartMode::Uniform => rng::unit_vector(&mut r, n),
        StartMode::Contraction => {
            let g = rng::gaussian_vector(&mut r, n);
            let eig = SymmetricEigen::new(matrix_slice(tensor, &g));
            let mut best = 0;
            for i in 1..n {
                if eig.eigenvalues[i] > eig.eigenvalues[best] {
                    best = i;
                }
            }
            let v: DVector<f64> = eig.eigenvectors.column(best).into_owned();
            // the eigenvector sign is arbitrary; point it where T is positive
            let c = tensor.eval_cubic(&v).unwrap_or(0.0);
            if c < 0.0 {
                -v
            } else {
                v
            }
        }
    }
}

fn acceptable(candidate: &Ascent, accepted: &[DVector<f64>], config: &ExtractionConfig) -> bool {
    candidate.value >= config.accept_threshold
        && accepted
            .iter()
            .all(|s| s.dot(&candidate.point).powi(2) <= config.deflation_threshold_sq)
}

// restarts evaluated together; the lowest acceptable index wins, so results
// do not depend on scheduling
const BATCH: usize = 8;

/// Runs the extraction loop until `m` candidates are accepted.
pub fn extract_components(
    tensor: &SymmetricTensor3,
    m: usize,
    config: &ExtractionConfig,
) -> Result<Extraction> {
    config.validate()?;
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let n = tensor.n();
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut telemetry = Vec::with_capacity(m);
    for component in 0..m {
        let mut found: Option<(usize, Ascent)> = None;
        let mut best_value = f64::NEG_INFINITY;
        let mut next = 0;
        while found.is_none() && next < config.restarts_per_component {
            let end = (next + BATCH).min(config.restarts_per_component);
            let outcomes: Vec<Result<Option<Ascent>>> = (next..end)
                .into_par_iter()
                .map(|restart| {
                    let x0 =
                        start_point(tensor, config.start_mode, config.seed, component, restart);
                    match ascend(tensor, &x0, config.ascent_steps, config.ascent_tol)? {
                        AscentOutcome::Point(a) => Ok(Some(a)),
                        AscentOutcome::Restart { .. } => Ok(None),
                    }
                })
                .collect();
            for (offset, outcome) in outcomes.into_iter().enumerate() {
                let Some(a) = outcome? else { continue };
                best_value = best_value.max(a.value);
                if acceptable(&a, &accepted, config) {
                    found = Some((next + offset, a));
                    break;
                }
            }
            next = end;
        }
        match found {
            Some((restart, a)) => {
                telemetry.push(ComponentTelemetry {
                    restarts: restart + 1,
                    value: a.value,
                });
                accepted.push(a.point);
            }
            None => {
                return Err(Error::ExtractionStall {
                    index: component,
                    partial: Box::new(PartialExtraction {
                        accepted,
                        telemetry,
                        best_value,
                    }),
                })
            }
        }
    }
    let mut candidates = DMatrix::zeros(m, n);
    for (i, c) in accepted.iter().enumerate() {
        candidates.set_row(i, &c.transpose());
    }
    Ok(Extraction {
        candidates,
        telemetry,
    })
}

fn cube(x: f64) -> f64 {
    x * x * x
}

/// `‖T - Σ_i b_i^{⊗3}‖_F` for rows `b_i` of `found`.
///
/// Densified when `n <= cap`; otherwise through Gram identities, which lose
/// roughly half the digits to cancellation when the residual is small.
pub fn residual_fro(tensor: &SymmetricTensor3, found: &DMatrix<f64>, cap: usize) -> Result<f64> {
    let n = tensor.n();
    if found.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: found.ncols(),
        });
    }
    if n <= cap {
        let mut d = tensor.densify(cap)?;
        let neg = SymmetricTensor3::from_components(ComponentSet::new(
            found.clone(),
            crate::tensor::Ensemble::Explicit,
            0,
        )?)
        .densify(cap)?;
        let mut neg = neg;
        neg.scale(-1.0);
        d.add_assign(&neg);
        return Ok(d.frobenius_norm());
    }
    let bb = found * found.transpose();
    let mut sq: f64 = bb.iter().map(|v| cube(*v)).sum();
    match tensor.storage() {
        Storage::Dense(d) => {
            sq += d.frobenius_norm().powi(2);
            for b in found.row_iter() {
                let b = b.transpose();
                sq -= 2.0 * d.eval_multilinear(&b, &b, &b);
            }
        }
        Storage::Components { set, noise } => {
            let a = set.vectors();
            sq += (a * a.transpose()).iter().map(|v| cube(*v)).sum::<f64>();
            sq -= 2.0
                * (a * found.transpose())
                    .iter()
                    .map(|v| cube(*v))
                    .sum::<f64>();
            if let Some(e) = noise {
                sq += e.frobenius_norm().powi(2);
                for r in a.row_iter() {
                    let r = r.transpose();
                    sq += 2.0 * e.eval_multilinear(&r, &r, &r);
                }
                for b in found.row_iter() {
                    let b = b.transpose();
                    sq -= 2.0 * e.eval_multilinear(&b, &b, &b);
                }
            }
        }
    }
    Ok(sq.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub max_sweeps: usize,
    /// Stop once no row moves more than this in a sweep.
    pub tol: f64,
    /// Halvings tried before a sweep that raises the residual is abandoned.
    pub max_halvings: usize,
    pub dense_cap: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_sweeps: 200,
            tol: 1e-12,
            max_halvings: 30,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub components: DMatrix<f64>,
    pub sweeps: usize,
    pub last_movement: f64,
    /// Residual after each accepted sweep, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// The safeguard could not find a non-increasing step.
    pub diverged: bool,
}

fn normalize_rows(mut b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    for mut row in b.row_iter_mut() {
        let norm = row.norm();
        if norm < VANISHING_CONTRACTION {
            return Err(Error::InvariantViolation(
                "refinement produced a zero row".into(),
            ));
        }
        row /= norm;
    }
    Ok(b)
}

/// One cyclic sweep `b_i ← r(b_i)/‖r(b_i)‖`, `r(x) = T(·,x,x) - Σ_{j≠i} <b_j,x>² b_j`.
fn sweep(tensor: &SymmetricTensor3, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = b.clone();
    for i in 0..out.nrows() {
        let x: DVector<f64> = out.row(i).transpose();
        let mut r = tensor.contract(&x)?;
        let proj = &out * &x;
        for j in 0..out.nrows() {
            if j != i {
                let w = proj[j] * proj[j];
                for k in 0..r.len() {
                    r[k] -= w * out[(j, k)];
                }
            }
        }
        let norm = r.norm();
        if norm < VANISHING_CONTRACTION {
            continue;
        }
        out.set_row(i, &(r / norm).transpose());
    }
    Ok(out)
}

/// Polishes `initial` with residual-safeguarded cyclic sweeps.
pub fn refine(
    tensor: &SymmetricTensor3,
    initial: &DMatrix<f64>,
    opts: &RefineOptions,
) -> Result<Refinement> {
    let n = tensor.n();
    if initial.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: initial.ncols(),
        });
    }
    for (i, row) in initial.row_iter().enumerate() {
        if (row.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Precondition(format!(
                "initial row {i} has norm {}",
                row.norm()
            )));
        }
    }
    let mut current = initial.clone();
    let mut residual = residual_fro(tensor, &current, opts.dense_cap)?;
    let mut history = vec![residual];
    let mut last_movement = 0.0;
    let mut diverged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let proposal = sweep(tensor, &current)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let candidate = if step == 1.0 {
                proposal.clone()
            } else {
                normalize_rows(&current + (&proposal - &current) * step)?
            };
            let r = residual_fro(tensor, &candidate, opts.dense_cap)?;
            if r <= residual {
                accepted = Some((candidate, r));
                break;
            }
            step *= 0.5;
        }
        let Some((next, r)) = accepted else {
            diverged = true;
            break;
        };
        last_movement = (&next - &current)
            .row_iter()
            .map(|row| row.norm())
            .fold(0.0f64, f64::max);
        current = next;
        residual = r;
        history.push(r);
        if last_movement <= opts.tol {
            break;
        }
    }
    Ok(Refinement {
        components: current,
        sweeps,
        last_movement,
        residual_history: history,
        diverged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `permutation[i]` is the found row matched to true row `i`.
    pub permutation: Vec<usize>,
    /// `‖found[permutation[i]] - truth[i]‖`.
    pub distances: Vec<f64>,
}

impl Matching {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

/// Kuhn's augmenting-path matching on edges with `dist <= limit`.
fn perfect_matching(dist: &DMatrix<f64>, limit: f64) -> Option<Vec<usize>> {
    let m = dist.nrows();
    let mut owner: Vec<Option<usize>> = vec![None; m];
    fn augment(
        i: usize,
        dist: &DMatrix<f64>,
        limit: f64,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..dist.ncols() {
            if dist[(i, j)] <= limit && !seen[j] {
                seen[j] = true;
                if owner[j].is_none() || augment(owner[j].unwrap(), dist, limit, seen, owner) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    for i in 0..m {
        let mut seen = vec![false; m];
        if !augment(i, dist, limit, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut perm = vec![0; m];
    for (j, o) in owner.iter().enumerate() {
        perm[o.expect("perfect matching")] = j;
    }
    Some(perm)
}

/// Bottleneck assignment of found rows to true rows.
pub fn match_components(found: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<Matching> {
    if found.shape() != truth.shape() {
        return Err(Error::Precondition(format!(
            "shape mismatch: found {:?}, truth {:?}",
            found.shape(),
            truth.shape()
        )));
    }
    let m = truth.nrows();
    let dist = DMatrix::from_fn(m, m, |i, j| (found.row(j) - truth.row(i)).norm());
    let mut levels: Vec<f64> = dist.iter().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut lo, mut hi) = (0usize, levels.len().saturating_sub(1));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(&dist, levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let permutation = if m == 0 {
        Vec::new()
    } else {
        perfect_matching(&dist, levels[lo]).expect("the largest level admits every edge")
    };
    let distances = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| dist[(i, j)])
        .collect();
    Ok(Matching {
        permutation,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderDiagnostic {
    pub k: u32,
    pub best_component_index: usize,
    /// `max_i <a_i,c>^k`.
    pub correlation_power: f64,
    /// `exp(-(2ε + δ) k)`.
    pub threshold: f64,
    pub passes: bool,
}

pub fn holder_diagnostic(
    candidate: &DVector<f64>,
    truth: &ComponentSet,
    k: u32,
    eps: f64,
    delta: f64,
) -> Result<HolderDiagnostic> {
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "k = {k} must be even and positive"
        )));
    }
    if candidate.len() != truth.n() {
        return Err(Error::DimensionMismatch {
            expected: truth.n(),
            found: candidate.len(),
        });
    }
    let proj = truth.vectors() * candidate;
    let mut best = 0;
    for i in 1..proj.len() {
        if proj[i].abs() > proj[best].abs() {
            best = i;
        }
    }
    let correlation_power = proj[best].powi(k as i32).min(1.0);
    let threshold = (-(2.0 * eps + delta) * k as f64).exp();
    Ok(HolderDiagnostic {
        k,
        best_component_index: best,
        correlation_power,
        threshold,
        passes: correlation_power >= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    /// Recovered unit rows.
    pub components: Vec<Vec<f64>>,
    pub matching: Option<Matching>,
    pub residual_fro: f64,
    pub telemetry: Vec<ComponentTelemetry>,
    /// Distance to truth after extraction, before refinement.
    pub pre_refine_max_distance: Option<f64>,
    pub refine_sweeps: usize,
    pub refine_diverged: bool,
}

/// Extraction, refinement and (with ground truth) matching in one call.
pub fn decompose(
    tensor: &SymmetricTensor3,
    m: usize,
    config: &ExtractionConfig,
    refine_opts: &RefineOptions,
    truth: Option<&ComponentSet>,
) -> Result<DecompositionResult> {
    let extraction = extract_components(tensor, m, config)?;
    let pre = match truth {
        Some(t) => Some(match_components(&extraction.candidates, t.vectors())?.max_distance()),
        None => None,
    };
    let refined = refine(tensor, &extraction.candidates, refine_opts)?;
    let matching = match truth {
        Some(t) => Some(match_components(&refined.components, t.vectors())?),
        None => None,
    };
    Ok(DecompositionResult {
        components: refined
            .components
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        matching,
        residual_fro: *refined.residual_history.last().expect("initial residual"),
        telemetry: extraction.telemetry,
        pre_refine_max_distance: pre,
        refine_sweeps: refined.sweeps,
        refine_diverged: refined.diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::sample_components;
    use crate::tensor::{DenseTensor, Ensemble};
    use approx::assert_relative_eq;

    fn e1_tensor(n: usize) -> SymmetricTensor3 {
        let mut d = DenseTensor::zeros(n);
        d.set(0, 0, 0, 1.0);
        SymmetricTensor3::from_dense(d).unwrap()
    }

    fn perturbed(set: &ComponentSet, scale: f64, seed: u64) -> DMatrix<f64> {
        let mut out = set.vectors().clone();
        for i in 0..out.nrows() {
            let mut r = rng::stream(seed, "decomposition-test/perturb", i as u64);
            let g = rng::unit_vector(&mut r, out.ncols()) * scale;
            let row = out.row(i).transpose() + g;
            out.set_row(i, &(&row / row.norm()).transpose());
        }
        out
    }

    #[test]
    fn ascent_examples() {
        let t = e1_tensor(2);
        let x0 = DVector::from_vec(vec![0.8, 0.6]);
        let AscentOutcome::Point(a) = ascend(&t, &x0, 10, 1e-12).unwrap() else {
            panic!("unexpected restart");
        };
        assert_relative_eq!(a.point[0], 1.0, epsilon = 1e-15);
        assert_eq!(a.value, 1.0);
        assert!(a.converged);

        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        assert!(matches!(
            ascend(&t, &e2, 10, 1e-12).unwrap(),
            AscentOutcome::Restart { steps: 1 }
        ));
        assert!(ascend(&t, &DVector::from_vec(vec![2.0, 0.0]), 10, 1e-12).is_err());
    }

    #[test]
    fn ascent_stays_in_basin_at_low_overcompleteness() {
        // the fixed point near a_1 is offset by about sqrt(3m)/n, so 0.01
        // needs m far below n^{3/2}
        for seed in 0..20 {
            let set = sample_components(1000, 10, Ensemble::SphereUniform, seed).unwrap();
            let t = SymmetricTensor3::from_components(set.clone());
            let mut r = rng::stream(seed, "decomposition-test/basin", 0);
            let a1 = set.row(0);
            let x0 = &a1 + rng::unit_vector(&mut r, 1000) * 0.05;
            let x0 = &x0 / x0.norm();
            let AscentOutcome::Point(a) = ascend(&t, &x0, 500, 1e-12).unwrap() else {
                panic!("restart");
            };
            assert!((&a.point - &a1).norm() <= 0.01, "seed {seed}");
        }
    }

    #[test]
    fn orthonormal_extraction_recovers_basis() {
        let set = ComponentSet::orthonormal(5, 5).unwrap();
        let t = SymmetricTensor3::from_components(set.clone());
        let ex = extract_components(&t, 5, &ExtractionConfig::default().with_seed(3)).unwrap();
        let mat = match_components(&ex.candidates, set.vectors()).unwrap();
        assert!(mat.max_distance() <= 1e-8);
        for tel in &ex.telemetry {
            assert!(tel.value >= 0.99);
        }
    }

    #[test]
    fn single_component_is_found() {
        let set = sample_components(7, 1, Ensemble::SphereUniform, 4).unwrap();
        let t = SymmetricTensor3::from_components(set.clone());
        let ex = extract_components(&t, 1, &ExtractionConfig::default()).unwrap();
        assert!((ex.candidates.row(0) - set.vectors().row(0)).norm() <= 1e-8);
    }

    #[test]
    fn stall_carries_partial_result() {
        // one component cannot supply two deflated candidates
        let t = SymmetricTensor3::from_components(ComponentSet::orthonormal(3, 1).unwrap());
        let cfg = ExtractionConfig {
            restarts_per_component: 5,
            ..ExtractionConfig::default()
        };
        match extract_components(&t, 2, &cfg) {
            Err(Error::ExtractionStall { index, partial }) => {
                assert_eq!(index, 1);
                assert_eq!(partial.accepted.len(), 1);
            }
            other => panic!("expected stall, got {other:?}"),
        }
    }

    #[test]
    fn contraction_starts_work_on_orthonormal_tensors() {
        let set = ComponentSet::orthonormal(6, 6).unwrap();
        let t = SymmetricTensor3::from_components(set.clone());
        let cfg = ExtractionConfig {
            start_mode: StartMode::Contraction,
            ..ExtractionConfig::default()
        };
        let ex = extract_components(&t, 6, &cfg).unwrap();
        assert!(
            match_components(&ex.candidates, set.vectors())
                .unwrap()
                .max_distance()
                <= 1e-8
        );
    }

    #[test]
    fn refine_fixed_point_and_contraction() {
        let set = ComponentSet::orthonormal(6, 6).unwrap();
        let t = SymmetricTensor3::from_components(set.clone());
        let exact = refine(&t, set.vectors(), &RefineOptions::default()).unwrap();
        assert!(exact.last_movement <= 1e-12);
        assert!((&exact.components - set.vectors()).amax() <= 1e-12);

        let start = perturbed(&set, 0.05, 1);
        let opts = RefineOptions {
            max_sweeps: 50,
            ..RefineOptions::default()
        };
        let out = refine(&t, &start, &opts).unwrap();
        let mat = match_components(&out.components, set.vectors()).unwrap();
        assert!(mat.max_distance() <= 1e-8, "{}", mat.max_distance());
        assert!(out.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn residual_paths_agree() {
        let set = sample_components(6, 9, Ensemble::SphereUniform, 2).unwrap();
        let t = SymmetricTensor3::from_components(set.clone());
        let noisy =
            crate::instances::add_noise(&t, &crate::instances::NoiseSpec::new(0.1, 3).unwrap())
                .unwrap();
        let guess = perturbed(&set, 0.2, 5);
        for tensor in [&t, &noisy] {
            let dense = residual_fro(tensor, &guess, 64).unwrap();
            let gram = residual_fro(tensor, &guess, 0).unwrap();
            assert_relative_eq!(dense, gram, max_relative = 1e-9);
        }
        assert!(residual_fro(&t, set.vectors(), 64).unwrap() <= 1e-12);
    }

    fn brute_bottleneck(found: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
        fn permute(k: usize, p: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if k == p.len() {
                f(p);
                return;
            }
            for i in k..p.len() {
                p.swap(k, i);
                permute(k + 1, p, f);
                p.swap(k, i);
            }
        }
        let m = truth.nrows();
        let mut best = f64::INFINITY;
        permute(0, &mut (0..m).collect(), &mut |p| {
            let worst = (0..m)
                .map(|i| (found.row(p[i]) - truth.row(i)).norm())
                .fold(0.0, f64::max);
            best = best.min(worst);
        });
        best
    }

    #[test]
    fn matching_examples() {
        let set = sample_components(8, 5, Ensemble::SphereUniform, 9).unwrap();
        let shuffle = [3usize, 0, 4, 1, 2];
        let found = DMatrix::from_fn(5, 8, |k, c| set.vectors()[(shuffle[k], c)]);
        let mat = match_components(&found, set.vectors()).unwrap();
        assert!(mat.distances.iter().all(|d| *d == 0.0));
        for (i, &j) in mat.permutation.iter().enumerate() {
            assert_eq!(shuffle[j], i);
        }

        // an antipodal row is at distance 2 when it has no other partner
        let one = sample_components(8, 1, Ensemble::SphereUniform, 9).unwrap();
        let neg = -one.vectors();
        let mat = match_components(&neg, one.vectors()).unwrap();
        assert_relative_eq!(mat.distances[0], 2.0, epsilon = 1e-12);
        // with several rows the bottleneck prefers a swap, which costs less than 2
        let mut neg = set.vectors().clone();
        neg.row_mut(2).neg_mut();
        let mat = match_components(&neg, set.vectors()).unwrap();
        assert!(mat.max_distance() < 2.0);
        assert_eq!(mat.max_distance(), brute_bottleneck(&neg, set.vectors()));

        for seed in 0..10 {
            let a = sample_components(8, 5, Ensemble::SphereUniform, 100 + seed).unwrap();
            let b = sample_components(8, 5, Ensemble::SphereUniform, 200 + seed).unwrap();
            let mat = match_components(a.vectors(), b.vectors()).unwrap();
            let mut sorted = mat.permutation.clone();
            sorted.sort();
            assert_eq!(sorted, (0..5).collect::<Vec<_>>());
            assert_eq!(
                mat.max_distance(),
                brute_bottleneck(a.vectors(), b.vectors())
            );
        }
    }

    #[test]
    fn holder_examples() {
        let set = sample_components(4, 3, Ensemble::SphereUniform, 1).unwrap();
        let d = holder_diagnostic(&set.row(0), &set, 8, 0.001, 0.01).unwrap();
        assert!(d.passes);
        assert_eq!(d.best_component_index, 0);
        assert_relative_eq!(d.correlation_power, 1.0, epsilon = 1e-12);

        let ortho = ComponentSet::orthonormal(3, 2).unwrap();
        let c = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let d = holder_diagnostic(&c, &ortho, 4, 0.001, 0.01).unwrap();
        assert_eq!(d.correlation_power, 0.0);
        assert!(!d.passes);

        let s = (1.0 - 0.999f64 * 0.999).sqrt();
        let c = DVector::from_vec(vec![0.999, s, 0.0]);
        let d = holder_diagnostic(&c, &ortho, 20, 0.001, 0.01).unwrap();
        assert_relative_eq!(d.correlation_power, 0.980_189_1, epsilon = 1e-6);
        assert_relative_eq!(d.threshold, (-0.24f64).exp(), epsilon = 1e-15);
        assert!(d.passes);
        assert!(holder_diagnostic(&c, &ortho, 3, 0.0, 0.0).is_err());
    }

    #[test]
    fn negation_lowers_the_cubic_form() {
        let set = sample_components(10, 12, Ensemble::RademacherNormalized, 6).unwrap();
        let t = SymmetricTensor3::from_components(set.clone());
        for i in 0..12 {
            let a = set.row(i);
            assert!(t.eval_cubic(&(-&a)).unwrap() < t.eval_cubic(&a).unwrap());
        }
    }
}
