//! Weighted linear least squares over covariance-whitened measurement
//! blocks.

use super::SolveError;
use nalgebra::{Cholesky, DMatrix, DVector};

/// One measurement block: `y ~ A x` with error covariance `sigma`.
#[derive(Debug, Clone)]
pub struct LsBlock {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl LsBlock {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, sigma: DMatrix<f64>) -> Self {
        LsBlock { a, y, sigma }
    }

    /// Block with isotropic covariance `sigma2 * I`.
    pub fn isotropic(a: DMatrix<f64>, y: DVector<f64>, sigma2: f64) -> Self {
        let m = y.len();
        LsBlock {
            a,
            y,
            sigma: DMatrix::identity(m, m) * sigma2,
        }
    }
}

/// A stack of measurement blocks with per-block scalar weights. Blocks are
/// whitened once at construction so residuals come out as Mahalanobis
/// distances and the normal equations need no further covariance handling.
#[derive(Debug, Clone)]
pub struct WeightedLsProblem {
    /// Whitened design matrices `L^-1 A` where `sigma = L L^T`.
    whitened_a: Vec<DMatrix<f64>>,
    /// Whitened observations `L^-1 y`.
    whitened_y: Vec<DVector<f64>>,
    state_dim: usize,
}

impl WeightedLsProblem {
    pub fn new(blocks: Vec<LsBlock>) -> Result<Self, SolveError> {
        assert!(!blocks.is_empty(), "problem needs at least one block");
        let state_dim = blocks[0].a.ncols();
        let mut whitened_a = Vec::with_capacity(blocks.len());
        let mut whitened_y = Vec::with_capacity(blocks.len());
        for (index, block) in blocks.into_iter().enumerate() {
            let (rows, cols) = block.a.shape();
            if cols != state_dim || block.y.len() != rows || block.sigma.shape() != (rows, rows) {
                return Err(SolveError::DimensionMismatch {
                    index,
                    rows,
                    cols,
                    y_len: block.y.len(),
                });
            }
            let chol = Cholesky::new(block.sigma)
                .ok_or(SolveError::CovarianceNotSpd { index })?;
            // L^-1 A and L^-1 y via triangular solves.
            let mut wa = block.a;
            let mut wy = block.y;
            chol.l().solve_lower_triangular_mut(&mut wa);
            chol.l().solve_lower_triangular_mut(&mut wy);
            whitened_a.push(wa);
            whitened_y.push(wy);
        }
        Ok(WeightedLsProblem {
            whitened_a,
            whitened_y,
            state_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.whitened_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.whitened_a.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Mahalanobis residual of each block at state `x`.
    pub fn residuals(&self, x: &DVector<f64>) -> Vec<f64> {
        self.whitened_a
            .iter()
            .zip(&self.whitened_y)
            .map(|(a, y)| (a * x - y).norm())
            .collect()
    }

    /// Minimize `sum_i 1/2 w_i || A_i x - y_i ||^2_{Sigma_i^-1}` by normal
    /// equations. A tiny diagonal jitter is applied only if the plain
    /// factorization fails; if it still fails the problem is rank deficient
    /// and the error names the (approximate) null direction.
    pub fn solve(&self, weights: &[f64]) -> Result<DVector<f64>, SolveError> {
        if weights.len() != self.len() {
            return Err(SolveError::WeightCountMismatch {
                got: weights.len(),
                expected: self.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SolveError::InvalidWeights);
        }
        let p = self.state_dim;
        let mut h = DMatrix::<f64>::zeros(p, p);
        let mut g = DVector::<f64>::zeros(p);
        for ((a, y), &w) in self.whitened_a.iter().zip(&self.whitened_y).zip(weights) {
            if w == 0.0 {
                continue;
            }
            h.gemm_tr(w, a, a, 1.0);
            g.gemv_tr(w, a, y, 1.0);
        }
        solve_spd(h, g)
    }

    /// Unweighted solution (the pseudoinverse estimate for full-rank
    /// stacks).
    pub fn solve_unweighted(&self) -> Result<DVector<f64>, SolveError> {
        self.solve(&vec![1.0; self.len()])
    }
}

/// Solve `H x = g` for symmetric positive semi-definite `H`.
///
/// A plain Cholesky is tried first. On failure the spectrum decides:
/// genuinely rank-deficient systems get an error naming the null
/// direction, while borderline-conditioned ones are retried with a tiny
/// diagonal jitter (which therefore never hides a true deficiency).
pub(crate) fn solve_spd(h: DMatrix<f64>, g: DVector<f64>) -> Result<DVector<f64>, SolveError> {
    let p = h.nrows();
    if let Some(chol) = Cholesky::new(h.clone()) {
        return Ok(chol.solve(&g));
    }
    let eigen = h.clone().symmetric_eigen();
    let (min_idx, &lambda_min) = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if lambda_min <= 1e-12 * lambda_max.max(1e-300) {
        let null_direction = eigen.eigenvectors.column(min_idx).iter().copied().collect();
        return Err(SolveError::RankDeficient { null_direction });
    }
    let jitter = 1e-12 * h.trace().max(1e-300) / p as f64;
    let mut damped = h;
    for i in 0..p {
        damped[(i, i)] += jitter;
    }
    match Cholesky::new(damped) {
        Some(chol) => Ok(chol.solve(&g)),
        None => {
            let null_direction = eigen.eigenvectors.column(min_idx).iter().copied().collect();
            Err(SolveError::RankDeficient { null_direction })
        }
    }
}
