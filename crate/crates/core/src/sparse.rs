//! Orthogonal matching pursuit against one dictionary.

use crate::dictionary::{dot, Dictionary};
use crate::error::{invalid, Result};

/// Correlations and Cholesky pivots below this are treated as zero.
const DEGENERATE_EPS: f64 = 1e-12;

/// Sparse representation of one flattened block.
///
/// `indices` are strictly increasing; `coefficients[j]` belongs to atom
/// `indices[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub block_size: usize,
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Squared l2 norm of the residual left by the code.
    pub residual_sq: f64,
}

impl SparseCode {
    pub fn empty(block_size: usize, residual_sq: f64) -> Self {
        Self { block_size, indices: Vec::new(), coefficients: Vec::new(), residual_sq }
    }

    /// Number of atoms used, `||x||_0`.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The squared residual dropped below the tolerance.
    Tolerance,
    /// The atom budget was used up.
    Sparsity,
    /// No remaining atom correlates with the residual, or the best one is
    /// numerically inside the span of the selected atoms.
    Degenerate,
}

/// Full record of one pursuit, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct OmpTrace {
    pub code: SparseCode,
    /// Atoms in the order they were selected.
    pub selection: Vec<usize>,
    /// Final coefficients aligned with `selection`.
    pub selection_coefficients: Vec<f64>,
    /// Squared residual before the first step and after every step.
    pub residual_history: Vec<f64>,
    pub stop: StopReason,
}

/// Sparse-codes `y` with at most `k_max` atoms, stopping early once the
/// squared residual is below `max_error`.
pub fn omp(dict: &Dictionary, y: &[f64], max_error: f64, k_max: usize) -> Result<SparseCode> {
    omp_traced(dict, y, max_error, k_max).map(|t| t.code)
}

/// [`omp`] returning the full [`OmpTrace`].
///
/// Each step picks the atom with the largest absolute correlation with the
/// residual (lowest index on ties), then refits every selected coefficient
/// by least squares through an incrementally updated Cholesky factor of the
/// selected atoms' Gram matrix.
pub fn omp_traced(dict: &Dictionary, y: &[f64], max_error: f64, k_max: usize) -> Result<OmpTrace> {
    let dim = dict.dim();
    let m = dict.a_cols();
    if y.len() != dim {
        return invalid(format!("signal has {} samples, dictionary expects {dim}", y.len()));
    }
    if max_error.is_nan() || max_error < 0.0 {
        return invalid(format!("max_error must be non-negative, got {max_error}"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("signal contains non-finite samples");
    }

    let cap = k_max.min(dim).min(m);
    let y_norm_sq = dot(y, y);

    let mut alpha = vec![0.0; m];
    dict.correlate(y, &mut alpha);
    let mut corr = alpha.clone();

    let mut selected: Vec<usize> = Vec::with_capacity(cap);
    let mut in_support = vec![false; m];
    // Packed lower-triangular Cholesky factor; row j starts at j*(j+1)/2.
    let mut chol: Vec<f64> = Vec::with_capacity(cap * (cap + 1) / 2);
    let mut x: Vec<f64> = Vec::with_capacity(cap);
    let mut residual: Vec<f64> = if dict.has_gram() { Vec::new() } else { y.to_vec() };
    let mut residual_sq = y_norm_sq;
    let mut history = vec![residual_sq];

    let stop = loop {
        if residual_sq < max_error {
            break StopReason::Tolerance;
        }
        if selected.len() >= k_max {
            break StopReason::Sparsity;
        }
        if selected.len() >= cap {
            break StopReason::Degenerate;
        }

        let mut best = None;
        let mut best_abs = 0.0;
        for (i, c) in corr.iter().enumerate() {
            if !in_support[i] && c.abs() > best_abs {
                best_abs = c.abs();
                best = Some(i);
            }
        }
        let Some(atom) = best.filter(|_| best_abs >= DEGENERATE_EPS) else {
            break StopReason::Degenerate;
        };

        let s = selected.len();
        let cross: Vec<f64> = match dict.gram_row(atom) {
            Some(row) => selected.iter().map(|&j| row[j]).collect(),
            None => selected.iter().map(|&j| dot(dict.atom(j), dict.atom(atom))).collect(),
        };
        let w = forward_solve(&chol, &cross);
        let self_dot = dict.gram_row(atom).map_or_else(|| dot(dict.atom(atom), dict.atom(atom)), |r| r[atom]);
        let pivot_sq = self_dot - dot(&w, &w);
        if pivot_sq < DEGENERATE_EPS {
            break StopReason::Degenerate;
        }
        chol.extend_from_slice(&w);
        chol.push(pivot_sq.sqrt());
        debug_assert_eq!(chol.len(), (s + 1) * (s + 2) / 2);

        selected.push(atom);
        in_support[atom] = true;
        let rhs: Vec<f64> = selected.iter().map(|&j| alpha[j]).collect();
        x = backward_solve(&chol, &forward_solve(&chol, &rhs));

        if dict.has_gram() {
            corr.copy_from_slice(&alpha);
            for (&j, &xj) in selected.iter().zip(&x) {
                let row = dict.gram_row(j).expect("gram present");
                for (c, g) in corr.iter_mut().zip(row) {
                    *c -= xj * g;
                }
            }
            residual_sq = (y_norm_sq - dot(&x, &rhs)).max(0.0);
        } else {
            residual.copy_from_slice(y);
            for (&j, &xj) in selected.iter().zip(&x) {
                for (r, a) in residual.iter_mut().zip(dict.atom(j)) {
                    *r -= xj * a;
                }
            }
            dict.correlate(&residual, &mut corr);
            residual_sq = dot(&residual, &residual);
        }
        history.push(residual_sq);
    };

    let mut pairs: Vec<(usize, f64)> = selected.iter().copied().zip(x.iter().copied()).collect();
    pairs.sort_by_key(|p| p.0);
    let code = SparseCode {
        block_size: dict.block_size(),
        indices: pairs.iter().map(|p| p.0).collect(),
        coefficients: pairs.iter().map(|p| p.1).collect(),
        residual_sq,
    };
    Ok(OmpTrace { code, selection: selected, selection_coefficients: x, residual_history: history, stop })
}

/// Solves `L z = b` for the packed lower-triangular `L` whose order is
/// `b.len()` (leading block of a possibly larger factor).
fn forward_solve(chol: &[f64], b: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(b.len());
    for (i, &bi) in b.iter().enumerate() {
        let row = &chol[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
        let s = bi - dot(&row[..i], &z);
        z.push(s / row[i]);
    }
    z
}

/// Solves `L^T x = z`.
fn backward_solve(chol: &[f64], z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut x = z.to_vec();
    for i in (0..n).rev() {
        let diag = chol[i * (i + 1) / 2 + i];
        x[i] /= diag;
        let xi = x[i];
        for (k, xk) in x.iter_mut().enumerate().take(i) {
            *xk -= chol[i * (i + 1) / 2 + k] * xi;
        }
    }
    x
}
