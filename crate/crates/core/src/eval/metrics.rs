//! Ranking metrics: pairwise accuracy with pair filters, Spearman rank
//! correlation, MAE, and the binned misranking analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Word-count cutoff between short and long lectures.
pub const LENGTH_CUTOFF_WORDS: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthPair {
    ShortShort,
    LongLong,
    ShortLong,
}

/// Restricts which unordered pairs enter the pairwise accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFilter {
    AllPairs,
    SameSubject,
    MnetDiffBin { lo: f64, hi: f64 },
    LengthSplit(LengthPair),
}

impl PairFilter {
    pub fn mnet_diff_bin(lo: f64, hi: f64) -> Result<Self, EvalError> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(EvalError::BadBin { lo, hi });
        }
        Ok(PairFilter::MnetDiffBin { lo, hi })
    }
}

/// Side data a filter may need; only the used fields must be present.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairContext<'a> {
    pub subjects: Option<&'a [String]>,
    pub mnet: Option<&'a [f64]>,
    pub word_counts: Option<&'a [f64]>,
}

fn pair_passes(filter: &PairFilter, ctx: &PairContext, i: usize, j: usize) -> bool {
    match filter {
        PairFilter::AllPairs => true,
        PairFilter::SameSubject => {
            let subjects = ctx.subjects.expect("same_subject filter needs subjects");
            subjects[i] == subjects[j]
        }
        PairFilter::MnetDiffBin { lo, hi } => {
            let mnet = ctx.mnet.expect("mnet_diff_bin filter needs mnet values");
            let d = (mnet[i] - mnet[j]).abs();
            d > *lo && d <= *hi
        }
        PairFilter::LengthSplit(kind) => {
            let wc = ctx.word_counts.expect("length filter needs word counts");
            let si = wc[i] < LENGTH_CUTOFF_WORDS;
            let sj = wc[j] < LENGTH_CUTOFF_WORDS;
            match kind {
                LengthPair::ShortShort => si && sj,
                LengthPair::LongLong => !si && !sj,
                LengthPair::ShortLong => si != sj,
            }
        }
    }
}

/// Half-point tally over eligible pairs: 2 per correctly ordered pair, 1 per
/// prediction tie. Pairs tied on the label are excluded.
fn pairwise_counts(
    y: &[f64],
    y_hat: &[f64],
    filter: &PairFilter,
    ctx: &PairContext,
) -> (u64, u64) {
    let n = y.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut halves = 0u64;
            let mut pairs = 0u64;
            for j in (i + 1)..n {
                if y[i] == y[j] || !pair_passes(filter, ctx, i, j) {
                    continue;
                }
                pairs += 1;
                let dy = y[i] - y[j];
                let dp = y_hat[i] - y_hat[j];
                if dp == 0.0 {
                    halves += 1;
                } else if (dy > 0.0) == (dp > 0.0) {
                    halves += 2;
                }
            }
            (halves, pairs)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Fraction of label-distinct pairs whose predicted ordering matches the
/// label ordering; prediction ties score one half.
pub fn pairwise_accuracy(
    y: &[f64],
    y_hat: &[f64],
    filter: &PairFilter,
    ctx: &PairContext,
) -> Result<f64, EvalError> {
    if y.len() != y_hat.len() || y.len() < 2 {
        return Err(EvalError::LengthMismatch {
            a: y.len(),
            b: y_hat.len(),
        });
    }
    let (halves, pairs) = pairwise_counts(y, y_hat, filter, ctx);
    if pairs == 0 {
        return Err(EvalError::NoEligiblePairs);
    }
    Ok(halves as f64 / (2 * pairs) as f64)
}

/// Average ranks, ties sharing the mean of the positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share rank mean of (i+1)..=(j+1).
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation with average ranks for ties.
pub fn srocc(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(EvalError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let mean_a = ra.iter().sum::<f64>() / n;
    let mean_b = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(EvalError::ZeroRankVariance);
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_hat: &[f64]) -> f64 {
    let n = y.len().min(y_hat.len());
    y.iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisrankBin {
    pub lo: f64,
    pub hi: f64,
    pub pairs: u64,
    /// Absent when the bin holds no pairs.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativePoint {
    pub lower_bound: f64,
    pub pairs: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedReport {
    pub bins: Vec<MisrankBin>,
    pub cumulative: Vec<CumulativePoint>,
}

/// Pairwise accuracy split by |MNET_i - MNET_j| into half-open bins
/// (k*w, (k+1)*w], plus the cumulative curve over (lower_bound, 1.0].
pub fn binned_misranking(
    y_mnet: &[f64],
    y_hat: &[f64],
    bin_width: f64,
) -> Result<BinnedReport, EvalError> {
    if y_mnet.len() != y_hat.len() || y_mnet.len() < 2 {
        return Err(EvalError::LengthMismatch {
            a: y_mnet.len(),
            b: y_hat.len(),
        });
    }
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(EvalError::BadBin {
            lo: 0.0,
            hi: bin_width,
        });
    }
    if let Some(v) = y_mnet.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(EvalError::BadBin { lo: *v, hi: 1.0 });
    }
    let n_bins = (1.0 / bin_width).round() as usize;
    let mut halves = vec![0u64; n_bins];
    let mut pairs = vec![0u64; n_bins];
    let n = y_mnet.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if y_mnet[i] == y_mnet[j] {
                continue;
            }
            let d = (y_mnet[i] - y_mnet[j]).abs();
            let bin = (((d / bin_width) - 1e-9).ceil() as i64 - 1).clamp(0, n_bins as i64 - 1)
                as usize;
            pairs[bin] += 1;
            let dy = y_mnet[i] - y_mnet[j];
            let dp = y_hat[i] - y_hat[j];
            if dp == 0.0 {
                halves[bin] += 1;
            } else if (dy > 0.0) == (dp > 0.0) {
                halves[bin] += 2;
            }
        }
    }
    // Tidy boundary values for the exported tables (3 * 0.1 is not 0.3 in
    // floating point).
    let edge = |k: usize| (k as f64 * bin_width * 1e12).round() / 1e12;
    let bins: Vec<MisrankBin> = (0..n_bins)
        .map(|k| MisrankBin {
            lo: edge(k),
            hi: edge(k + 1),
            pairs: pairs[k],
            accuracy: (pairs[k] > 0).then(|| halves[k] as f64 / (2 * pairs[k]) as f64),
        })
        .collect();
    let cumulative: Vec<CumulativePoint> = (0..n_bins)
        .map(|k| {
            let h: u64 = halves[k..].iter().sum();
            let p: u64 = pairs[k..].iter().sum();
            CumulativePoint {
                lower_bound: edge(k),
                pairs: p,
                accuracy: (p > 0).then(|| h as f64 / (2 * p) as f64),
            }
        })
        .collect();
    Ok(BinnedReport { bins, cumulative })
}
