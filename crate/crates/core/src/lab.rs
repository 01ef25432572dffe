//! Monte Carlo checks of the concentration steps behind the certificate:
//! decoupling of sign products, matrix Bernstein tails, the Kronecker
//! factorization of the per-row cross terms, and the scaling of `‖M‖`.
//!
//! Components are drawn once per experiment and held fixed while the signs
//! are resampled. Trials run in parallel but are reduced in trial order, so
//! every output is a function of `(inputs, seed)` alone.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{self, CrossOperator};
use crate::decomposition::{ascend, AscentOutcome};
use crate::error::{Error, Result};
use crate::instances::{a_norm, sample_components};
use crate::rng;
use crate::spectral::{self, SpectralOptions};
use crate::tensor::{kronecker, ComponentSet, Ensemble, SymmetricTensor3};

/// Largest operator side handled with dense eigensolves.
pub const DENSE_SIDE_CAP: usize = 625;

const CHECK_TOL: f64 = 1e-10;

/// `Σ_{i≠j} σ_i τ_j <a_i,a_j> (a_i⊗a_j)(a_i⊗a_j)^T`, matrix-free.
pub fn build_signed_cross_operator(
    components: &ComponentSet,
    sigma: &[f64],
    tau: &[f64],
) -> Result<CrossOperator> {
    CrossOperator::signed(components, sigma, tau)
}

fn raw_norm(op: &CrossOperator, tol: f64, seed: u64) -> Result<f64> {
    let opts = SpectralOptions::default().with_tol(tol).with_seed(seed);
    let est = spectral::symmetric_norm(|y| op.apply(y), op.dim(), &opts)?;
    if !est.converged {
        return Err(Error::NonConvergence {
            what: "signed cross-term norm",
            residual: est.residual,
            iterations: est.iterations,
        });
    }
    Ok(est.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoupledSample {
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    /// `‖Σ_{i≠j} σ_i σ_j Q_ij‖`
    pub norm_coupled: f64,
    /// `‖Σ_{i≠j} σ_i τ_j Q_ij‖`
    pub norm_decoupled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingSummary {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub samples: Vec<DecoupledSample>,
    /// `quantile_0.5(‖M′‖) / quantile_0.5(‖M″‖)`, 1 when both vanish.
    pub ratio_median: f64,
    pub ratio_q90: f64,
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        1.0
    } else {
        num / den
    }
}

pub const MIN_DECOUPLING_TRIALS: usize = 30;

/// Draws one rademacher component set and compares coupled and decoupled
/// sign sums over `trials` fresh sign draws.
pub fn decoupling_experiment(
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<DecouplingSummary> {
    let components = sample_components(n, m, Ensemble::RademacherNormalized, seed)?;
    decoupling_experiment_on(&components, trials, seed)
}

pub fn decoupling_experiment_on(
    components: &ComponentSet,
    trials: usize,
    seed: u64,
) -> Result<DecouplingSummary> {
    if trials < MIN_DECOUPLING_TRIALS {
        return Err(Error::Precondition(format!(
            "decoupling needs at least {MIN_DECOUPLING_TRIALS} trials, got {trials}"
        )));
    }
    let m = components.m();
    let samples = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, "lab/decoupling-signs", t as u64);
            let sigma = rng::signs(&mut r, m);
            let tau = rng::signs(&mut r, m);
            let coupled = CrossOperator::signed(components, &sigma, &sigma)?;
            let decoupled = CrossOperator::signed(components, &sigma, &tau)?;
            Ok(DecoupledSample {
                norm_coupled: raw_norm(&coupled, 1e-8, seed ^ t as u64)?,
                norm_decoupled: raw_norm(&decoupled, 1e-8, seed ^ t as u64)?,
                sigma,
                tau,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let coupled: Vec<f64> = samples.iter().map(|s| s.norm_coupled).collect();
    let decoupled: Vec<f64> = samples.iter().map(|s| s.norm_decoupled).collect();
    Ok(DecouplingSummary {
        n: components.n(),
        m,
        seed,
        ratio_median: ratio(quantile(&coupled, 0.5), quantile(&decoupled, 0.5)),
        ratio_q90: ratio(quantile(&coupled, 0.9), quantile(&decoupled, 0.9)),
        samples,
    })
}

/// `min(1, d · exp(-(t²/2) / (σ² + R t / 3)))`.
pub fn bernstein_tail(d: usize, r: f64, sigma_sq: f64, t: f64) -> Result<f64> {
    if d == 0 || r.is_nan() || r <= 0.0 || !(0.0..).contains(&sigma_sq) || !(0.0..).contains(&t) {
        return Err(Error::Precondition(format!(
            "bernstein_tail needs d >= 1, R > 0, σ² >= 0, t >= 0 (got d={d}, R={r}, σ²={sigma_sq}, t={t})"
        )));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let exponent = -(t * t / 2.0) / (sigma_sq + r * t / 3.0);
    Ok((d as f64 * exponent.exp()).min(1.0))
}

/// Independent symmetric summand families used in the cross-term argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BernsteinFamily {
    /// `Σ_{j≠i} τ_j <a_i,a_j> a_j a_j^T` over random `τ`.
    RowSum { i: usize },
    /// `Σ_i σ_i T_i` over random `σ`, with `T_i = Σ_{j≠i} τ_j Q_ij` for one fixed `τ`.
    CrossSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub empirical: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinTable {
    pub family: BernsteinFamily,
    pub d: usize,
    pub r: f64,
    pub sigma_sq: f64,
    pub trials: usize,
    pub rows: Vec<TailRow>,
    pub violations: usize,
}

/// `Σ_{j≠i} <a_i,a_j>² a_j a_j^T`, the variance of the row-sum family.
pub fn row_sum_variance(components: &ComponentSet, i: usize) -> DMatrix<f64> {
    let a = components.vectors();
    let g = a * components.row(i);
    let weights = DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|j| if j == i { 0.0 } else { g[j] * g[j] }),
    );
    a.transpose() * DMatrix::from_diagonal(&weights) * a
}

/// `N_i = Σ_{j≠i} τ_j <a_i,a_j> a_j a_j^T`.
pub fn right_factor(components: &ComponentSet, tau: &[f64], i: usize) -> DMatrix<f64> {
    let a = components.vectors();
    let g = a * components.row(i);
    let weights = DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|j| if j == i { 0.0 } else { tau[j] * g[j] }),
    );
    a.transpose() * DMatrix::from_diagonal(&weights) * a
}

fn sym_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Grid of `points` values of `t` from `t_max / points` to `t_max`, where
/// `t_max` is the point where the bound falls to `1e-6`.
fn tail_grid(d: usize, r: f64, sigma_sq: f64, points: usize) -> Vec<f64> {
    // t²/2 = L (σ² + R t / 3) with L = ln(d / 1e-6)
    let l = (d as f64 / 1e-6).ln();
    let b = 2.0 * l * r / 3.0;
    let t_max = (b + (b * b + 8.0 * l * sigma_sq).sqrt()) / 2.0;
    (1..=points)
        .map(|k| t_max * k as f64 / points as f64)
        .collect()
}

/// Empirical tail of the family's norm against the Bernstein bound on a grid
/// of `points` thresholds. `R` and `σ²` are computed exactly.
pub fn bernstein_empirical_check(
    components: &ComponentSet,
    family: BernsteinFamily,
    trials: usize,
    points: usize,
    seed: u64,
) -> Result<BernsteinTable> {
    let (n, m) = (components.n(), components.m());
    if trials == 0 || points == 0 {
        return Err(Error::Precondition(
            "trials and grid points must be positive".into(),
        ));
    }
    let gram = components.gram();
    let (d, r, sigma_sq, norms) = match family {
        BernsteinFamily::RowSum { i } => {
            if i >= m {
                return Err(Error::Precondition(format!(
                    "row {i} out of range for m = {m}"
                )));
            }
            let r = (0..m)
                .filter(|&j| j != i)
                .map(|j| gram[(i, j)].abs())
                .fold(0.0, f64::max);
            let sigma_sq = sym_norm(&row_sum_variance(components, i));
            let norms = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut g = rng::stream(seed, "lab/bernstein-row", t as u64);
                    let tau = rng::signs(&mut g, m);
                    sym_norm(&right_factor(components, &tau, i))
                })
                .collect::<Vec<_>>();
            (n, r, sigma_sq, norms)
        }
        BernsteinFamily::CrossSum => {
            if n * n > DENSE_SIDE_CAP {
                return Err(Error::Precondition(format!(
                    "cross-sum variance needs a dense {0}x{0} eigensolve; cap is {DENSE_SIDE_CAP}",
                    n * n
                )));
            }
            let mut g = rng::stream(seed, "lab/bernstein-cross-tau", 0);
            let tau = rng::signs(&mut g, m);
            // T_i = (a_i a_i^T) ⊗ N_i, so ‖T_i‖ = ‖N_i‖ and T_i² = (a_i a_i^T) ⊗ N_i²
            let mut r = 0.0f64;
            let mut var = DMatrix::zeros(n * n, n * n);
            for i in 0..m {
                let ni = right_factor(components, &tau, i);
                r = r.max(sym_norm(&ni));
                let ai = components.row(i);
                var += kronecker(&(&ai * ai.transpose()), &(&ni * &ni));
            }
            let sigma_sq = sym_norm(&var);
            let norms = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut g = rng::stream(seed, "lab/bernstein-cross-sigma", t as u64);
                    let sigma = rng::signs(&mut g, m);
                    let op = CrossOperator::signed(components, &sigma, &tau)?;
                    raw_norm(&op, 1e-10, seed ^ t as u64)
                })
                .collect::<Result<Vec<_>>>()?;
            (n * n, r, sigma_sq, norms)
        }
    };
    if r == 0.0 {
        // every summand vanishes; the sum is identically zero
        return Ok(BernsteinTable {
            family,
            d,
            r,
            sigma_sq,
            trials,
            rows: Vec::new(),
            violations: 0,
        });
    }
    let mut rows = Vec::with_capacity(points);
    let mut violations = 0;
    for t in tail_grid(d, r, sigma_sq, points) {
        let empirical = norms.iter().filter(|v| **v >= t).count() as f64 / trials as f64;
        let bound = bernstein_tail(d, r, sigma_sq, t)?;
        if empirical > bound {
            violations += 1;
        }
        rows.push(TailRow {
            t,
            empirical,
            bound,
        });
    }
    Ok(BernsteinTable {
        family,
        d,
        r,
        sigma_sq,
        trials,
        rows,
        violations,
    })
}

/// `T_i = Σ_{j≠i} τ_j Q_ij` as a dense `n² x n²` matrix.
pub fn dense_t_i(components: &ComponentSet, tau: &[f64], i: usize) -> DMatrix<f64> {
    let n = components.n();
    let gram = components.gram();
    let ai = components.row(i);
    let mut out = DMatrix::zeros(n * n, n * n);
    for j in 0..components.m() {
        if j == i {
            continue;
        }
        let v = crate::tensor::kron_vec(&ai, &components.row(j));
        out += (&v * v.transpose()) * (tau[j] * gram[(i, j)]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationCheck {
    pub holds: bool,
    /// Smallest eigenvalue of `b (a_i a_i^T) ⊗ I - T_i`.
    pub margin: f64,
}

/// Checks `T_i ⪯ b (a_i a_i^T) ⊗ I` densely.
pub fn t_i_domination_check(
    components: &ComponentSet,
    tau: &[f64],
    i: usize,
    bound_coefficient: f64,
) -> Result<DominationCheck> {
    let n = components.n();
    if n * n > DENSE_SIDE_CAP {
        return Err(Error::Precondition(format!(
            "n = {n} exceeds the dense cap (n <= 25)"
        )));
    }
    if tau.len() != components.m() || i >= components.m() {
        return Err(Error::Precondition(
            "tau length or index out of range".into(),
        ));
    }
    let ai = components.row(i);
    let lhs = kronecker(&(&ai * ai.transpose()), &DMatrix::identity(n, n)) * bound_coefficient;
    let margin = spectral::min_eigenvalue(&(lhs - dense_t_i(components, tau, i)));
    Ok(DominationCheck {
        holds: margin >= -CHECK_TOL,
        margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KroneckerCheck {
    pub holds: bool,
    pub min_eigenvalue: f64,
    pub min_probe: f64,
}

/// Checks `R ⊗ P ⪯ R ⊗ Q` for `P ⪯ Q` and `R ⪰ 0`, refusing inputs that
/// violate the hypothesis.
pub fn kronecker_psd_check(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    probes: usize,
    seed: u64,
) -> Result<KroneckerCheck> {
    if p.shape() != q.shape() || !p.is_square() || !r.is_square() {
        return Err(Error::Precondition(
            "P and Q must be square of equal size, R square".into(),
        ));
    }
    if p.nrows() * r.nrows() > DENSE_SIDE_CAP {
        return Err(Error::Precondition(
            "Kronecker side exceeds the dense cap".into(),
        ));
    }
    let diff = q - p;
    let gap = spectral::min_eigenvalue(&diff);
    if gap < -CHECK_TOL {
        return Err(Error::Precondition(format!(
            "P is not below Q (λ_min(Q - P) = {gap:e})"
        )));
    }
    let r_min = spectral::min_eigenvalue(r);
    if r_min < -CHECK_TOL {
        return Err(Error::Precondition(format!(
            "R is not PSD (λ_min = {r_min:e})"
        )));
    }
    let k = kronecker(r, &diff);
    let min_eigenvalue = spectral::min_eigenvalue(&k);
    let mut g = rng::stream(seed, "lab/kronecker-probes", 0);
    let mut min_probe = f64::INFINITY;
    for _ in 0..probes {
        let y = rng::unit_vector(&mut g, k.nrows());
        min_probe = min_probe.min(y.dot(&(&k * &y)));
    }
    Ok(KroneckerCheck {
        holds: min_eigenvalue >= -CHECK_TOL && min_probe >= -CHECK_TOL,
        min_eigenvalue,
        min_probe,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    pub ensemble: Ensemble,
    pub tol: f64,
    pub ascent_restarts: usize,
    pub ascent_steps: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            ensemble: Ensemble::RademacherNormalized,
            tol: 1e-6,
            ascent_restarts: 5,
            ascent_steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub cross_term_norm: f64,
    pub gersh_excess: f64,
    pub a_norm_sq: f64,
    pub injective_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Self {
        Quartiles {
            q1: quantile(values, 0.25),
            median: quantile(values, 0.5),
            q3: quantile(values, 0.75),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub m: usize,
    pub cross_term_norm: Quartiles,
    pub gersh_excess: Quartiles,
    pub a_norm_sq: Quartiles,
    pub injective_estimate: Quartiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// 1.96 standard errors of the slope.
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRun {
    pub grid: Vec<(usize, usize)>,
    pub trials_per_cell: usize,
    pub seed: u64,
    pub cells: Vec<CellSummary>,
    pub records: Vec<TrialRecord>,
    /// `log ‖M‖` against `log m` at the most populated fixed `n`.
    pub slope_cross_vs_m: Option<SlopeFit>,
    /// `log ‖M‖` against `log n` over cells with `m = n`.
    pub slope_cross_vs_n: Option<SlopeFit>,
    /// `log (gersh - 1)` against `log m` at the same fixed `n`.
    pub slope_gersh_vs_m: Option<SlopeFit>,
}

/// Ordinary least squares on `(log x, log y)`; needs three points with
/// positive coordinates.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let k = pts.len();
    if k < 3 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let se = (rss / (k - 2) as f64 / sxx).sqrt();
    Some(SlopeFit {
        slope,
        half_width: 1.96 * se,
        points: k,
    })
}

fn ascent_estimate(tensor: &SymmetricTensor3, opts: &ScalingOptions, seed: u64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for k in 0..opts.ascent_restarts {
        let mut r = rng::stream(seed, "lab/scaling-ascent", k as u64);
        let x0 = rng::unit_vector(&mut r, tensor.n());
        if let AscentOutcome::Point(a) = ascend(tensor, &x0, opts.ascent_steps, 1e-10)? {
            best = best.max(a.value);
        }
    }
    Ok(best)
}

fn run_trial(
    n: usize,
    m: usize,
    trial: usize,
    seed: u64,
    opts: &ScalingOptions,
) -> Result<TrialRecord> {
    let cell_seed = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(rng::fnv1a64(&format!("{n}x{m}#{trial}")));
    let set = sample_components(n, m, opts.ensemble, cell_seed)?;
    let cross = raw_norm(&CrossOperator::new(&set), opts.tol, cell_seed)?;
    let a = a_norm(&set, opts.tol)?.value;
    let tensor = SymmetricTensor3::from_components(set.clone());
    Ok(TrialRecord {
        n,
        m,
        trial,
        cross_term_norm: cross,
        gersh_excess: certificate::gram_cubed_bound(&set) - 1.0,
        a_norm_sq: a * a,
        injective_estimate: ascent_estimate(&tensor, opts, cell_seed)?,
    })
}

pub fn scaling_experiment(
    grid: &[(usize, usize)],
    trials: usize,
    seed: u64,
    opts: &ScalingOptions,
) -> Result<ScalingRun> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be positive".into()));
    }
    let jobs: Vec<(usize, usize, usize)> = grid
        .iter()
        .flat_map(|&(n, m)| (0..trials).map(move |t| (n, m, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(n, m, t)| run_trial(n, m, t, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<CellSummary> = grid
        .iter()
        .enumerate()
        .map(|(c, &(n, m))| {
            let rs = &records[c * trials..(c + 1) * trials];
            let col = |f: fn(&TrialRecord) -> f64| rs.iter().map(f).collect::<Vec<_>>();
            CellSummary {
                n,
                m,
                cross_term_norm: Quartiles::of(&col(|r| r.cross_term_norm)),
                gersh_excess: Quartiles::of(&col(|r| r.gersh_excess)),
                a_norm_sq: Quartiles::of(&col(|r| r.a_norm_sq)),
                injective_estimate: Quartiles::of(&col(|r| r.injective_estimate)),
            }
        })
        .collect();

    // the fixed n with the most distinct m values
    let mut fixed_n: Option<(usize, usize)> = None;
    for c in &cells {
        let count = cells.iter().filter(|d| d.n == c.n).count();
        if fixed_n.is_none_or(|(_, best)| count > best) {
            fixed_n = Some((c.n, count));
        }
    }
    let at_fixed_n: Vec<&CellSummary> = match fixed_n {
        Some((n, _)) => cells.iter().filter(|c| c.n == n).collect(),
        None => Vec::new(),
    };
    let diagonal: Vec<&CellSummary> = cells.iter().filter(|c| c.n == c.m).collect();
    Ok(ScalingRun {
        grid: grid.to_vec(),
        trials_per_cell: trials,
        seed,
        slope_cross_vs_m: fit_log_slope(
            &at_fixed_n
                .iter()
                .map(|c| (c.m as f64, c.cross_term_norm.median))
                .collect::<Vec<_>>(),
        ),
        slope_cross_vs_n: fit_log_slope(
            &diagonal
                .iter()
                .map(|c| (c.n as f64, c.cross_term_norm.median))
                .collect::<Vec<_>>(),
        ),
        slope_gersh_vs_m: fit_log_slope(
            &at_fixed_n
                .iter()
                .map(|c| (c.m as f64, c.gersh_excess.median))
                .collect::<Vec<_>>(),
        ),
        cells,
        records,
    })
}

impl ScalingRun {
    /// One row per `(cell, trial)`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("n,m,trial,cross_term_norm,gersh_excess,a_norm_sq,injective_estimate\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{:e},{:e}",
                r.n,
                r.m,
                r.trial,
                r.cross_term_norm,
                r.gersh_excess,
                r.a_norm_sq,
                r.injective_estimate
            );
        }
        out
    }
}
