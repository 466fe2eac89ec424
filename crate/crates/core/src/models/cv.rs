//! Seeded k-fold cross-validation and grid-based hyperparameter selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, ModelError, ModelFamily, ModelSpec};
use crate::eval::{pairwise_accuracy, srocc, PairContext, PairFilter};

/// Shuffled fold assignment; fold sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_pairwise: Vec<f64>,
    pub fold_srocc: Vec<f64>,
    pub pairwise_mean: f64,
    /// Sample standard deviation of fold scores over sqrt(k).
    pub pairwise_se: f64,
    pub srocc_mean: f64,
    pub srocc_se: f64,
    /// Out-of-fold prediction for every row, aligned with the input order.
    pub oof_predictions: Vec<f64>,
}

fn mean_and_se(scores: &[f64]) -> (f64, f64) {
    let k = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / k;
    if scores.len() < 2 {
        return (mean, 0.0);
    }
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt() / k.sqrt())
}

/// Evaluation side data for cross-validation, aligned with the input rows.
#[derive(Debug, Clone, Copy, Default)]
pub struct CvContext<'a> {
    pub subjects: Option<&'a [String]>,
    pub mnet: Option<&'a [f64]>,
    pub word_counts: Option<&'a [f64]>,
}

fn subset<T: Clone>(values: Option<&[T]>, idx: &[usize]) -> Option<Vec<T>> {
    values.map(|v| idx.iter().map(|&i| v[i].clone()).collect())
}

/// Seeded k-fold CV: fit on the train folds, score pairwise accuracy and
/// SROCC on the held-out fold, and keep every out-of-fold prediction.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[f64],
    feature_names: &[String],
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    filter: &PairFilter,
    ctx: &CvContext,
) -> Result<CvReport, ModelError> {
    let n = x.len();
    if k < 2 || n < k {
        return Err(ModelError::BadHyperparameter(format!(
            "cannot split {n} rows into {k} folds"
        )));
    }
    let folds = kfold_indices(n, k, seed);
    let mut fold_pairwise = Vec::with_capacity(k);
    let mut fold_srocc = Vec::with_capacity(k);
    let mut oof = vec![f64::NAN; n];

    for test_idx in &folds {
        let test_set: std::collections::HashSet<usize> = test_idx.iter().copied().collect();
        let train_idx: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
        let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let y_train: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let model = train(&x_train, &y_train, feature_names, spec)?;

        let x_test: Vec<Vec<f64>> = test_idx.iter().map(|&i| x[i].clone()).collect();
        let y_test: Vec<f64> = test_idx.iter().map(|&i| y[i]).collect();
        let preds: Vec<f64> = x_test.iter().map(|r| model.predict_row(r)).collect();
        for (&i, &p) in test_idx.iter().zip(&preds) {
            oof[i] = p;
        }

        let subjects = subset(ctx.subjects, test_idx);
        let mnet = subset(ctx.mnet, test_idx);
        let word_counts = subset(ctx.word_counts, test_idx);
        let pair_ctx = PairContext {
            subjects: subjects.as_deref(),
            mnet: mnet.as_deref(),
            word_counts: word_counts.as_deref(),
        };
        let acc = pairwise_accuracy(&y_test, &preds, filter, &pair_ctx)
            .map_err(|e| ModelError::Metric(e.to_string()))?;
        let rho = srocc(&y_test, &preds).map_err(|e| ModelError::Metric(e.to_string()))?;
        fold_pairwise.push(acc);
        fold_srocc.push(rho);
    }

    let (pairwise_mean, pairwise_se) = mean_and_se(&fold_pairwise);
    let (srocc_mean, srocc_se) = mean_and_se(&fold_srocc);
    Ok(CvReport {
        fold_pairwise,
        fold_srocc,
        pairwise_mean,
        pairwise_se,
        srocc_mean,
        srocc_se,
        oof_predictions: oof,
    })
}

/// Conventional default grids per family; every knob stays configurable.
pub fn default_grid(family: ModelFamily, p: usize, seed: u64) -> Vec<ModelSpec> {
    let base = ModelSpec::new(family).with_seed(seed);
    let mut grid = Vec::new();
    let gammas = [0.1 / p as f64, 1.0 / p as f64, 10.0 / p as f64];
    match family {
        ModelFamily::Rr => {
            for lambda in [0.01, 0.1, 1.0, 10.0] {
                let mut s = base.clone();
                s.lambda = lambda;
                grid.push(s);
            }
        }
        ModelFamily::Krr => {
            for lambda in [0.01, 0.1, 1.0, 10.0] {
                for gamma in gammas {
                    let mut s = base.clone();
                    s.lambda = lambda;
                    s.gamma = Some(gamma);
                    grid.push(s);
                }
            }
        }
        ModelFamily::Svr => {
            for c in [0.1, 1.0, 10.0] {
                for eps in [0.01, 0.1] {
                    let mut s = base.clone();
                    s.c = c;
                    s.epsilon_insensitive = eps;
                    grid.push(s);
                }
            }
        }
        ModelFamily::Ksvr => {
            for c in [0.1, 1.0, 10.0] {
                for eps in [0.01, 0.1] {
                    for gamma in gammas {
                        let mut s = base.clone();
                        s.c = c;
                        s.epsilon_insensitive = eps;
                        s.gamma = Some(gamma);
                        grid.push(s);
                    }
                }
            }
        }
        ModelFamily::Rf => {
            for min_leaf in [1, 5] {
                let mut s = base.clone();
                s.trees = 500;
                s.min_leaf = min_leaf;
                grid.push(s);
            }
        }
    }
    grid
}

/// Larger regularisation, then fewer trees count as "simpler" when breaking
/// accuracy ties; grid order decides the rest.
fn simpler_than(candidate: &ModelSpec, incumbent: &ModelSpec) -> bool {
    if candidate.lambda != incumbent.lambda {
        return candidate.lambda > incumbent.lambda;
    }
    if candidate.trees != incumbent.trees {
        return candidate.trees < incumbent.trees;
    }
    false
}

const TIE_TOL: f64 = 1e-12;

/// Pick the grid point with the best inner-CV pairwise accuracy.
pub fn select_hyperparameters(
    x: &[Vec<f64>],
    y: &[f64],
    feature_names: &[String],
    grid: &[ModelSpec],
    inner_k: usize,
    seed: u64,
) -> Result<ModelSpec, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::BadHyperparameter("empty grid".into()));
    }
    let mut best: Option<(f64, ModelSpec)> = None;
    for spec in grid {
        let report = cross_validate(
            x,
            y,
            feature_names,
            spec,
            inner_k,
            seed,
            &PairFilter::AllPairs,
            &CvContext::default(),
        )?;
        let acc = report.pairwise_mean;
        best = match best {
            None => Some((acc, spec.clone())),
            Some((best_acc, best_spec)) => {
                let improves = acc > best_acc + TIE_TOL;
                let wins_tie =
                    (acc - best_acc).abs() <= TIE_TOL && simpler_than(spec, &best_spec);
                if improves || wins_tie {
                    Some((acc, spec.clone()))
                } else {
                    Some((best_acc, best_spec))
                }
            }
        };
    }
    Ok(best.unwrap().1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn linear_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - r[1]).collect();
        (x, y, vec!["a".to_string(), "b".to_string()])
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        let folds = kfold_indices(23, 5, 0);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        let max = sizes.iter().max().unwrap();
        let min = sizes.iter().min().unwrap();
        assert!(max - min <= 1);
        let mut all: Vec<usize> = folds.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_gives_identical_reports() {
        let (x, y, names) = linear_data(30, 1);
        let spec = ModelSpec::new(ModelFamily::Rr);
        let run = || {
            cross_validate(
                &x,
                &y,
                &names,
                &spec,
                5,
                42,
                &PairFilter::AllPairs,
                &CvContext::default(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn perfect_linear_target_scores_one() {
        let (x, y, names) = linear_data(40, 2);
        let mut spec = ModelSpec::new(ModelFamily::Rr);
        spec.lambda = 1e-8;
        let report = cross_validate(
            &x,
            &y,
            &names,
            &spec,
            5,
            7,
            &PairFilter::AllPairs,
            &CvContext::default(),
        )
        .unwrap();
        assert!(report.pairwise_mean >= 0.999, "{}", report.pairwise_mean);
        assert!(report.oof_predictions.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn singleton_grid_returns_that_spec() {
        let (x, y, names) = linear_data(20, 3);
        let spec = ModelSpec::new(ModelFamily::Rr);
        let chosen = select_hyperparameters(&x, &y, &names, std::slice::from_ref(&spec), 3, 0).unwrap();
        assert_eq!(chosen, spec);
    }

    #[test]
    fn dominating_spec_wins() {
        let (x, y, names) = linear_data(30, 4);
        let mut good = ModelSpec::new(ModelFamily::Rr);
        good.lambda = 1e-6;
        let mut bad = ModelSpec::new(ModelFamily::Rr);
        bad.lambda = 1e9; // collapses to the mean, ties everywhere
        let chosen =
            select_hyperparameters(&x, &y, &names, &[bad, good.clone()], 3, 0).unwrap();
        assert_eq!(chosen, good);
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        // Identical specs except lambda, both interpolating the same easy
        // target perfectly: the larger lambda must win the tie.
        let x: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let names = vec!["f".to_string()];
        let mut a = ModelSpec::new(ModelFamily::Rr);
        a.lambda = 1e-9;
        let mut b = ModelSpec::new(ModelFamily::Rr);
        b.lambda = 1e-8;
        let chosen = select_hyperparameters(&x, &y, &names, &[a, b.clone()], 3, 0).unwrap();
        assert_eq!(chosen.lambda, b.lambda);
    }
}
