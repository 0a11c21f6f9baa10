//! Missing-entry filling by regularized low-rank factorization.
//!
//! The stacked feature matrix `X` (m×n) is approximated by `UᵀV` with
//! `U` r×m and `V` r×n, minimizing
//!
//! ```text
//! J = Σ_{(i,j) observed} (X_ij − U_iᵀ V_j)² + (λ/2)(‖U‖_F² + ‖V‖_F²)
//! ```
//!
//! by alternating exact ridge solves over columns of `V` then `U`.
//! Observed entries are never touched; only masked-out positions take the
//! reconstructed value.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featureset::{ExtendedFeature, FEATURE_DIM};
use crate::numerics::{solve_ridge, DenseMatrix};
use crate::rng::{self, streams};

/// Feature matrix with an observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    /// Missing positions hold 0.0 and are never read.
    values: DenseMatrix,
    mask: Vec<bool>,
}

impl ObservedMatrix {
    pub fn new(values: DenseMatrix, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.rows() * values.cols() {
            return Err(Error::invalid(format!(
                "mask has {} entries, matrix is {}x{}",
                mask.len(),
                values.rows(),
                values.cols()
            )));
        }
        let mut values = values;
        for i in 0..values.rows() {
            for j in 0..values.cols() {
                if !mask[i * values.cols() + j] {
                    values[(i, j)] = 0.0;
                }
            }
        }
        Ok(Self { values, mask })
    }

    pub fn from_features(features: &[ExtendedFeature]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::insufficient("no feature vectors to stack"));
        }
        let mut data = Vec::with_capacity(features.len() * FEATURE_DIM);
        let mut mask = Vec::with_capacity(features.len() * FEATURE_DIM);
        for f in features {
            for j in 0..FEATURE_DIM {
                data.push(if f.mask[j] { f.values[j] } else { 0.0 });
                mask.push(f.mask[j]);
            }
        }
        Self::new(DenseMatrix::from_vec(features.len(), FEATURE_DIM, data)?, mask)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols() + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.is_observed(i, j).then(|| self.values[(i, j)])
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Rows without a single observed entry; their fill is pure prior.
    pub fn unrecoverable_rows(&self) -> Vec<usize> {
        (0..self.rows())
            .filter(|&i| (0..self.cols()).all(|j| !self.is_observed(i, j)))
            .collect()
    }

    pub fn unrecoverable_cols(&self) -> Vec<usize> {
        (0..self.cols())
            .filter(|&j| (0..self.rows()).all(|i| !self.is_observed(i, j)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorizeConfig {
    pub rank: usize,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FactorizeConfig {
    fn default() -> Self {
        Self {
            rank: 6,
            lambda: 0.1,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    /// r×m; column i is the factor of row i.
    pub u: DenseMatrix,
    /// r×n; column j is the factor of column j.
    pub v: DenseMatrix,
    pub rank: usize,
    pub lambda: f64,
    /// Objective after every full sweep.
    pub objective_trace: Vec<f64>,
}

impl FactorPair {
    /// Reconstructed entry `U_iᵀ V_j`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (0..self.rank).map(|k| self.u[(k, i)] * self.v[(k, j)]).sum()
    }

    fn check_shape(&self, obs: &ObservedMatrix) -> Result<()> {
        if self.u.cols() != obs.rows() || self.v.cols() != obs.cols() || self.u.rows() != self.rank || self.v.rows() != self.rank {
            return Err(Error::invalid(format!(
                "factors U {}x{}, V {}x{} do not fit a {}x{} matrix at rank {}",
                self.u.rows(),
                self.u.cols(),
                self.v.rows(),
                self.v.cols(),
                obs.rows(),
                obs.cols(),
                self.rank
            )));
        }
        Ok(())
    }

    /// Factor of a new row with the given observed entries, solved against
    /// the fixed column factors. Uses exactly the per-row update of
    /// [`factorize`], so a training row folds in to its own factor.
    pub fn fold_in(&self, row: &[Option<f64>]) -> Result<Vec<f64>> {
        if row.len() != self.v.cols() {
            return Err(Error::invalid(format!(
                "row has {} entries, factors expect {}",
                row.len(),
                self.v.cols()
            )));
        }
        let vt = self.v.transpose();
        solve_factor(self.rank, self.lambda, row.iter().enumerate().filter_map(|(j, x)| x.map(|x| (j, x))), |j| vt.row(j))
    }
}

/// Ridge solve for one factor column: minimizes
/// `Σ (x − fᵀ·other)² + (λ/2)‖f‖²` over the supplied observations.
fn solve_factor<'a>(
    rank: usize,
    lambda: f64,
    observations: impl Iterator<Item = (usize, f64)>,
    other: impl Fn(usize) -> &'a [f64],
) -> Result<Vec<f64>> {
    let mut a = vec![0.0; rank * rank];
    let mut b = vec![0.0; rank];
    for (idx, x) in observations {
        let col = &other(idx)[..rank];
        for (p, &cp) in col.iter().enumerate() {
            b[p] += x * cp;
            for (aq, cq) in a[p * rank + p..(p + 1) * rank].iter_mut().zip(&col[p..]) {
                *aq += cp * cq;
            }
        }
    }
    for p in 0..rank {
        for q in 0..p {
            a[p * rank + q] = a[q * rank + p];
        }
    }
    solve_ridge(&a, &b, lambda / 2.0)
}

/// Regularized alternating least squares over the observed entries.
pub fn factorize(obs: &ObservedMatrix, config: &FactorizeConfig, seed: u64) -> Result<FactorPair> {
    let (m, n) = (obs.rows(), obs.cols());
    let FactorizeConfig {
        rank,
        lambda,
        max_iter,
        tol,
    } = *config;
    if obs.observed_count() == 0 {
        return Err(Error::insufficient("no observed entries to factorize"));
    }
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!("rank {rank} outside 1..={}", m.min(n))));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda {lambda} must be finite and non-negative")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }

    let mut rng = rng::stream(seed, streams::FACTORIZE);
    let u = DenseMatrix::from_fn(rank, m, |_, _| rng.random_range(-0.1..0.1));
    let v = DenseMatrix::zeros(rank, n);
    let mut factors = FactorPair {
        u,
        v,
        rank,
        lambda,
        objective_trace: Vec::new(),
    };

    let by_row: Vec<Vec<(usize, f64)>> =
        (0..m).map(|i| (0..n).filter_map(|j| obs.get(i, j).map(|x| (j, x))).collect()).collect();
    let by_col: Vec<Vec<(usize, f64)>> =
        (0..n).map(|j| (0..m).filter_map(|i| obs.get(i, j).map(|x| (i, x))).collect()).collect();

    for _ in 0..max_iter {
        let ut = factors.u.transpose();
        let cols = (0..n)
            .into_par_iter()
            .map(|j| solve_factor(rank, lambda, by_col[j].iter().copied(), |i| ut.row(i)))
            .collect::<Result<Vec<_>>>()?;
        for (j, col) in cols.into_iter().enumerate() {
            for (k, val) in col.into_iter().enumerate() {
                factors.v[(k, j)] = val;
            }
        }
        let vt = factors.v.transpose();
        let rows = (0..m)
            .into_par_iter()
            .map(|i| solve_factor(rank, lambda, by_row[i].iter().copied(), |j| vt.row(j)))
            .collect::<Result<Vec<_>>>()?;
        for (i, col) in rows.into_iter().enumerate() {
            for (k, val) in col.into_iter().enumerate() {
                factors.u[(k, i)] = val;
            }
        }
        let j_now = objective(obs, &factors)?;
        if !j_now.is_finite() {
            return Err(Error::Numeric("factorization objective became non-finite".into()));
        }
        let previous = factors.objective_trace.last().copied();
        factors.objective_trace.push(j_now);
        if let Some(prev) = previous {
            if (prev - j_now).abs() / prev.max(1.0) < tol {
                break;
            }
        }
    }
    Ok(factors)
}

/// Squared residual over observed entries plus the Frobenius penalty.
pub fn objective(obs: &ObservedMatrix, factors: &FactorPair) -> Result<f64> {
    factors.check_shape(obs)?;
    let mut residual = 0.0;
    for i in 0..obs.rows() {
        for j in 0..obs.cols() {
            if let Some(x) = obs.get(i, j) {
                let e = x - factors.entry(i, j);
                residual += e * e;
            }
        }
    }
    let penalty = factors.lambda / 2.0 * (factors.u.frobenius_norm_sq() + factors.v.frobenius_norm_sq());
    Ok(residual + penalty)
}

/// Observed entries verbatim, reconstructed values elsewhere.
pub fn impute(obs: &ObservedMatrix, factors: &FactorPair) -> Result<DenseMatrix> {
    factors.check_shape(obs)?;
    Ok(DenseMatrix::from_fn(obs.rows(), obs.cols(), |i, j| {
        obs.get(i, j).unwrap_or_else(|| factors.entry(i, j))
    }))
}

/// Rounds imputed (never observed) entries to the nearest valid code in
/// `0..=max_codes[j]`.
pub fn snap_to_codes(filled: &DenseMatrix, obs: &ObservedMatrix, max_codes: &[u32]) -> Result<DenseMatrix> {
    if filled.shape() != (obs.rows(), obs.cols()) || max_codes.len() != obs.cols() {
        return Err(Error::invalid("code snapping shapes disagree"));
    }
    let mut out = filled.clone();
    for i in 0..obs.rows() {
        for j in 0..obs.cols() {
            if !obs.is_observed(i, j) {
                out[(i, j)] = snap(filled[(i, j)], max_codes[j]);
            }
        }
    }
    Ok(out)
}

pub(crate) fn snap(value: f64, max_code: u32) -> f64 {
    value.round().clamp(0.0, f64::from(max_code))
}
