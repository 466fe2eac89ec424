//! Model-agnostic Shapley attributions by permutation sampling, with
//! mean-absolute aggregation and quality-vertical rollups.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("attribution matrix is all zeros; shares are undefined")]
    AllZero,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One observation's sampled attributions with Monte-Carlo error estimates.
#[derive(Debug, Clone)]
pub struct ShapSample {
    pub attributions: Vec<f64>,
    /// Standard error of each attribution across permutations.
    pub stderr: Vec<f64>,
    /// Mean model output over the full background.
    pub base_value: f64,
}

/// Permutation-sampling Shapley values for one observation.
///
/// Each of `permutations` rounds draws a random feature order and one random
/// background row; features flip from the background value to the observed
/// value one at a time and the prediction deltas accumulate per feature.
/// Attributions are then shifted uniformly so they sum exactly to
/// f(x) - mean_background f.
pub fn shapley_sample_detailed(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    background: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> ShapSample {
    assert!(!background.is_empty(), "background must be non-empty");
    assert!(permutations >= 1, "need at least one permutation");
    let p = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..p).collect();
    let mut sum = vec![0.0f64; p];
    let mut sum_sq = vec![0.0f64; p];
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let row = &background[rng.random_range(0..background.len())];
        let mut z = row.clone();
        let mut prev = f(&z);
        for &idx in &order {
            z[idx] = x[idx];
            let cur = f(&z);
            let delta = cur - prev;
            sum[idx] += delta;
            sum_sq[idx] += delta * delta;
            prev = cur;
        }
    }
    let m = permutations as f64;
    let mut attributions: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let stderr: Vec<f64> = sum_sq
        .iter()
        .zip(&attributions)
        .map(|(sq, mean)| {
            if permutations < 2 {
                0.0
            } else {
                let var = (sq / m - mean * mean).max(0.0) * m / (m - 1.0);
                (var / m).sqrt()
            }
        })
        .collect();

    let base_value = background.iter().map(|b| f(b)).sum::<f64>() / background.len() as f64;
    let target = f(x) - base_value;
    let shift = (target - attributions.iter().sum::<f64>()) / p as f64;
    attributions.iter_mut().for_each(|a| *a += shift);
    ShapSample {
        attributions,
        stderr,
        base_value,
    }
}

/// Attributions only; see [`shapley_sample_detailed`].
pub fn shapley_sample(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    background: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Vec<f64> {
    shapley_sample_detailed(f, x, background, permutations, seed).attributions
}

/// Attribution matrix for many observations, one independently seeded row
/// per observation so the result is stable under any parallel schedule.
pub fn shapley_matrix(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    xs: &[Vec<f64>],
    background: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    xs.par_iter()
        .enumerate()
        .map(|(i, x)| {
            let obs_seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
            shapley_sample(f, x, background, permutations, obs_seed)
        })
        .collect()
}

/// Mean absolute attribution per feature, plus each feature's share of the
/// total.
pub fn mas(shap: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), ExplainError> {
    if shap.is_empty() {
        return Err(ExplainError::Shape("empty attribution matrix".to_string()));
    }
    let p = shap[0].len();
    let mut mas = vec![0.0f64; p];
    for row in shap {
        if row.len() != p {
            return Err(ExplainError::Shape(format!(
                "row of width {} in a {p}-feature matrix",
                row.len()
            )));
        }
        for (m, v) in mas.iter_mut().zip(row) {
            *m += v.abs();
        }
    }
    let n = shap.len() as f64;
    mas.iter_mut().for_each(|m| *m /= n);
    let total: f64 = mas.iter().sum();
    if total == 0.0 {
        return Err(ExplainError::AllZero);
    }
    let share = mas.iter().map(|m| m / total).collect();
    Ok((mas, share))
}

/// Quality vertical of each feature, from the shipped mapping file.
pub fn vertical_labels(feature_names: &[String]) -> Vec<String> {
    let map: BTreeMap<&str, &str> = include_str!("../data/verticals.csv")
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .collect();
    feature_names
        .iter()
        .map(|n| map.get(n.as_str()).unwrap_or(&"other").to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    /// Attribution matrix, observations by features.
    pub shap: Vec<Vec<f64>>,
    pub mas: Vec<f64>,
    pub mas_share: Vec<f64>,
    pub verticals: Vec<String>,
}

pub fn build_importance_report(
    feature_names: &[String],
    shap: Vec<Vec<f64>>,
) -> Result<ImportanceReport, ExplainError> {
    let (mas, mas_share) = mas(&shap)?;
    if mas.len() != feature_names.len() {
        return Err(ExplainError::Shape(format!(
            "{} features but {} attribution columns",
            feature_names.len(),
            mas.len()
        )));
    }
    Ok(ImportanceReport {
        feature_names: feature_names.to_vec(),
        verticals: vertical_labels(feature_names),
        shap,
        mas,
        mas_share,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExplainError> {
    std::fs::write(path, contents).map_err(|e| ExplainError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// shap_summary.csv: one row per (feature, observation) with the raw feature
/// value alongside, enough to redraw a beeswarm summary.
pub fn write_shap_summary_csv(
    report: &ImportanceReport,
    features_raw: &[Vec<f64>],
    path: &Path,
) -> Result<(), ExplainError> {
    if features_raw.len() != report.shap.len() {
        return Err(ExplainError::Shape(format!(
            "{} raw rows vs {} attribution rows",
            features_raw.len(),
            report.shap.len()
        )));
    }
    let mut out = String::from("feature,observation_index,shap_value,raw_feature_value\n");
    for (fi, name) in report.feature_names.iter().enumerate() {
        for (oi, (row, raw)) in report.shap.iter().zip(features_raw).enumerate() {
            out.push_str(&format!("{name},{oi},{},{}\n", row[fi], raw[fi]));
        }
    }
    write_file(path, &out)
}

/// mas.csv ordered by MAS descending.
pub fn write_mas_csv(report: &ImportanceReport, path: &Path) -> Result<(), ExplainError> {
    let mut order: Vec<usize> = (0..report.mas.len()).collect();
    order.sort_by(|&a, &b| report.mas[b].total_cmp(&report.mas[a]));
    let mut out = String::from("feature,vertical,mas,mas_share\n");
    for &i in &order {
        out.push_str(&format!(
            "{},{},{},{}\n",
            report.feature_names[i], report.verticals[i], report.mas[i], report.mas_share[i]
        ));
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact Shapley with a background distribution: enumerate every
    /// permutation and every background row.
    fn exact_shapley(
        f: &dyn Fn(&[f64]) -> f64,
        x: &[f64],
        background: &[Vec<f64>],
    ) -> Vec<f64> {
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for perm in permutations(n - 1) {
                for pos in 0..=perm.len() {
                    let mut next = perm.clone();
                    next.insert(pos, n - 1);
                    out.push(next);
                }
            }
            out
        }
        let p = x.len();
        let perms = permutations(p);
        let mut total = vec![0.0; p];
        for perm in &perms {
            for row in background {
                let mut z = row.clone();
                let mut prev = f(&z);
                for &idx in perm {
                    z[idx] = x[idx];
                    let cur = f(&z);
                    total[idx] += cur - prev;
                    prev = cur;
                }
            }
        }
        let count = (perms.len() * background.len()) as f64;
        total.iter_mut().for_each(|t| *t /= count);
        total
    }

    #[test]
    fn single_feature_attribution_is_the_full_gap() {
        let f = |z: &[f64]| 3.0 * z[0] + 1.0;
        let background = vec![vec![0.5], vec![1.5]];
        let attr = shapley_sample(&f, &[2.0], &background, 4, 0);
        let base = (f(&[0.5]) + f(&[1.5])) / 2.0;
        assert!((attr[0] - (f(&[2.0]) - base)).abs() < 1e-12);
    }

    #[test]
    fn linear_model_with_fixed_background_has_closed_form() {
        let w = [1.5, -2.0, 0.5];
        let f = move |z: &[f64]| w.iter().zip(z).map(|(wi, zi)| wi * zi).sum::<f64>();
        let x = [1.0, 1.0, 1.0];
        let b = vec![vec![0.2, -0.4, 3.0]];
        // With a single background row every permutation yields the same
        // marginal for a linear model, so even few permutations are exact.
        let attr = shapley_sample(&f, &x, &b, 8, 1);
        for i in 0..3 {
            let expected = w[i] * (x[i] - b[0][i]);
            assert!((attr[i] - expected).abs() < 1e-10, "{attr:?}");
        }
    }

    #[test]
    fn sampled_matches_exact_enumeration_within_three_sigma() {
        // Nonlinear model over four features.
        let f = |z: &[f64]| z[0] * z[1] + (z[2] - 0.5).powi(2) - 0.3 * z[3] * z[0];
        let x = vec![1.2, -0.7, 0.9, 0.4];
        let background = vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0, 1.0],
            vec![-0.5, 0.3, 0.2, -1.0],
        ];
        let exact = exact_shapley(&f, &x, &background);
        let sample = shapley_sample_detailed(&f, &x, &background, 4000, 7);
        for (i, expected) in exact.iter().enumerate() {
            let tol = 3.0 * sample.stderr[i] + 1e-9;
            assert!(
                (sample.attributions[i] - expected).abs() < tol,
                "feature {i}: {} vs {expected} (tol {tol})",
                sample.attributions[i],
            );
        }
    }

    #[test]
    fn efficiency_holds_exactly_after_renormalization() {
        let f = |z: &[f64]| (z[0] * z[1]).sin() + z[2];
        let x = vec![0.3, 1.1, -0.2];
        let background = vec![vec![1.0, 0.0, 0.5], vec![0.0, 2.0, -1.0]];
        let sample = shapley_sample_detailed(&f, &x, &background, 16, 3);
        let total: f64 = sample.attributions.iter().sum();
        let target = f(&x) - sample.base_value;
        assert!((total - target).abs() < 1e-12);
    }

    #[test]
    fn duplicated_features_share_attribution() {
        // Features 0 and 1 always carry identical values.
        let f = |z: &[f64]| z[0] + z[1];
        let x = vec![1.0, 1.0];
        let background = vec![vec![0.0, 0.0]];
        let attr = shapley_sample(&f, &x, &background, 2000, 11);
        assert!((attr[0] - attr[1]).abs() < 0.1, "{attr:?}");
        assert!((attr[0] + attr[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ignored_feature_gets_zero_attribution() {
        let f = |z: &[f64]| 2.0 * z[0];
        let x = vec![1.0, 42.0];
        // Single background row: the telescoping sum makes the efficiency
        // shift vanish, so the dummy attribution is exactly zero.
        let one_row = vec![vec![0.0, -7.0]];
        let attr = shapley_sample(&f, &x, &one_row, 50, 5);
        assert!(attr[1].abs() < 1e-12, "{attr:?}");
        // Multi-row backgrounds converge to zero as permutations grow.
        let background = vec![vec![0.0, -7.0], vec![0.5, 100.0]];
        let small = shapley_sample(&f, &x, &background, 100, 5);
        let large = shapley_sample(&f, &x, &background, 20_000, 5);
        assert!(large[1].abs() < small[1].abs().max(0.02), "{large:?}");
        assert!(large[1].abs() < 0.02, "{large:?}");
    }

    #[test]
    fn mas_known_matrix() {
        let shap = vec![vec![1.0, -1.0], vec![-3.0, 1.0]];
        let (mas_vals, shares) = mas(&shap).unwrap();
        assert_eq!(mas_vals, vec![2.0, 1.0]);
        assert!((shares[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((shares[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mas_single_row() {
        let (mas_vals, _) = mas(&[vec![0.5, 0.0]]).unwrap();
        assert_eq!(mas_vals, vec![0.5, 0.0]);
    }

    #[test]
    fn mas_all_zero_is_an_error() {
        assert!(matches!(mas(&[vec![0.0, 0.0]]), Err(ExplainError::AllZero)));
    }

    #[test]
    fn mas_ordering_ignores_signs() {
        let shap = vec![vec![1.0, -0.2], vec![-1.0, 0.1]];
        let flipped: Vec<Vec<f64>> = shap
            .iter()
            .map(|r| r.iter().map(|v| -v).collect())
            .collect();
        let (a, _) = mas(&shap).unwrap();
        let (b, _) = mas(&flipped).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summary_export_shapes_and_ordering() {
        let names = vec!["word_count".to_string(), "fk_easiness".to_string()];
        let shap = vec![vec![0.1, 0.9], vec![-0.2, 0.3], vec![0.05, -0.4]];
        let raw = vec![vec![100.0, 50.0], vec![200.0, 60.0], vec![300.0, 70.0]];
        let report = build_importance_report(&names, shap).unwrap();
        assert_eq!(report.verticals, vec!["topic coverage", "understandability"]);

        let dir = tempfile::TempDir::new().unwrap();
        let summary = dir.path().join("shap_summary.csv");
        let mas_path = dir.path().join("mas.csv");
        write_shap_summary_csv(&report, &raw, &summary).unwrap();
        write_mas_csv(&report, &mas_path).unwrap();

        let text = std::fs::read_to_string(&summary).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        let mas_text = std::fs::read_to_string(&mas_path).unwrap();
        // fk_easiness has the larger mean |shap| and must come first.
        let first = mas_text.lines().nth(1).unwrap();
        assert!(first.starts_with("fk_easiness,"), "{first}");

        // Round trip: parse the summary back into the same matrix.
        let mut parsed = vec![vec![0.0; 2]; 3];
        for line in text.lines().skip(1) {
            let parts: Vec<&str> = line.split(',').collect();
            let fi = names.iter().position(|n| n == parts[0]).unwrap();
            let oi: usize = parts[1].parse().unwrap();
            parsed[oi][fi] = parts[2].parse().unwrap();
        }
        assert_eq!(parsed, report.shap);
    }

    #[test]
    fn matrix_rows_are_schedule_independent() {
        let f = |z: &[f64]| z[0] * 2.0 - z[1];
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        let background = vec![vec![0.0, 0.0]];
        let a = shapley_matrix(&f, &xs, &background, 64, 9);
        let b = shapley_matrix(&f, &xs, &background, 64, 9);
        assert_eq!(a, b);
        // Each row equals an independently seeded single-observation run.
        let row1 = shapley_sample(
            &f,
            &xs[1],
            &background,
            64,
            9u64.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(2)),
        );
        assert_eq!(a[1], row1);
    }
}
