//! Standard scaling fitted on the training matrix.

use serde::{Deserialize, Serialize};

/// Per-column mean and population standard deviation. Constant columns keep
/// std 1 so they scale to exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let p = x.first().map_or(0, Vec::len);
        let mut means = vec![0.0; p];
        for row in x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; p];
        for row in x {
            for ((var, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *var += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column_maps_to_plus_minus_one() {
        let x = vec![vec![1.0], vec![3.0]];
        let scaler = Scaler::fit(&x);
        let xs = scaler.transform(&x);
        assert!((xs[0][0] + 1.0).abs() < 1e-12);
        assert!((xs[1][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = vec![vec![7.0, 1.0], vec![7.0, 2.0], vec![7.0, 3.0]];
        let scaler = Scaler::fit(&x);
        let xs = scaler.transform(&x);
        for row in &xs {
            assert_eq!(row[0], 0.0);
        }
        assert_eq!(scaler.stds[0], 1.0);
    }

    #[test]
    fn transform_then_inverse_recovers_input() {
        let x = vec![
            vec![1.0, 10.0, -3.0],
            vec![2.0, 14.0, 0.5],
            vec![4.0, 9.0, 2.5],
        ];
        let scaler = Scaler::fit(&x);
        for row in &x {
            let back = scaler.inverse_row(&scaler.transform_row(row));
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scaled_columns_have_zero_mean_unit_std() {
        let x = vec![
            vec![1.0, 5.0],
            vec![2.0, 4.0],
            vec![3.0, -1.0],
            vec![10.0, 0.0],
        ];
        let scaler = Scaler::fit(&x);
        let xs = scaler.transform(&x);
        for col in 0..2 {
            let n = xs.len() as f64;
            let mean: f64 = xs.iter().map(|r| r[col]).sum::<f64>() / n;
            let var: f64 = xs.iter().map(|r| (r[col] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }
}
