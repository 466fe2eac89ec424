//! Ridge regression and its kernelised form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
    /// Plain dot product; kept so the kernel path can be checked against the
    /// primal solution.
    Linear,
}

pub fn kernel(kind: KernelKind, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        KernelKind::Rbf => {
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * sq).exp()
        }
        KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

pub fn kernel_matrix(kind: KernelKind, gamma: f64, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = kernel(kind, gamma, &rows[i], &rows[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    a.cholesky().map(|chol| chol.solve(&b))
}

/// Ridge weights on a scaled design matrix, intercept unpenalized. Because
/// scaled columns are mean-centered the intercept decouples to mean(y).
pub fn ridge_fit(
    x_scaled: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, f64), ModelError> {
    let n = x_scaled.len();
    let p = x_scaled[0].len();
    let intercept = y.iter().sum::<f64>() / n as f64;

    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    for (row, &yi) in x_scaled.iter().zip(y) {
        for a in 0..p {
            xty[a] += row[a] * (yi - intercept);
            for b in a..p {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
        xtx[(a, a)] += lambda;
    }
    let w = solve_spd(xtx, xty).ok_or(ModelError::SingularSystem)?;
    Ok((w.iter().copied().collect(), intercept))
}

/// Kernel ridge on a scaled design matrix. Targets are centered so an
/// unpenalized intercept rides along, which keeps the linear-kernel fit
/// identical to the primal ridge solution.
pub fn krr_fit(
    x_scaled: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    kind: KernelKind,
    gamma: f64,
) -> Result<(Vec<f64>, f64), ModelError> {
    let n = x_scaled.len();
    let intercept = y.iter().sum::<f64>() / n as f64;
    let k = kernel_matrix(kind, gamma, x_scaled);
    let mut km = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            km[(i, j)] = k[i][j];
        }
        km[(i, i)] += lambda;
    }
    let rhs = DVector::from_iterator(n, y.iter().map(|v| v - intercept));
    let alphas = solve_spd(km, rhs).ok_or(ModelError::SingularSystem)?;
    Ok((alphas.iter().copied().collect(), intercept))
}

pub fn krr_predict_row(
    support: &[Vec<f64>],
    alphas: &[f64],
    intercept: f64,
    kind: KernelKind,
    gamma: f64,
    x_scaled: &[f64],
) -> f64 {
    intercept
        + support
            .iter()
            .zip(alphas)
            .map(|(s, a)| a * kernel(kind, gamma, s, x_scaled))
            .sum::<f64>()
}
