//! Engagement targets: watch-fraction aggregation and the four label
//! encodings (raw, cleaned, standardised, comparative).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::corpus::{Lecture, LectureId, UserId, ViewEvent};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("duration must be > 0, got {0}")]
    BadDuration(f64),
    #[error("no engagement records for the lecture")]
    NoRecords,
    #[error("no pairwise comparisons could be formed")]
    EmptyComparisons,
    #[error("unknown encoding `{0}`")]
    UnknownEncoding(String),
    #[error("invalid label parameter: {0}")]
    BadParam(String),
    #[error("probit scale fit did not converge")]
    NoConvergence,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Floor applied inside the log transform so the target stays finite.
pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Bot filter: users averaging below this engagement fraction are dropped.
pub const DEFAULT_BOT_THRESHOLD: f64 = 0.05;
/// Quadratic penalty weight for the comparative scale fit.
pub const DEFAULT_SCALE_PENALTY: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    RawLmnet,
    CleanedLmnet,
    StandardisedLmnet,
    Comparative,
}

impl Encoding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Encoding::RawLmnet => "raw",
            Encoding::CleanedLmnet => "cleaned",
            Encoding::StandardisedLmnet => "standardised",
            Encoding::Comparative => "comparative",
        }
    }
}

impl FromStr for Encoding {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" | "raw_lmnet" => Ok(Encoding::RawLmnet),
            "cleaned" | "cleaned_lmnet" => Ok(Encoding::CleanedLmnet),
            "standardised" | "standardized" | "standardised_lmnet" => {
                Ok(Encoding::StandardisedLmnet)
            }
            "comparative" => Ok(Encoding::Comparative),
            other => Err(LabelError::UnknownEncoding(other.to_string())),
        }
    }
}

/// One user's aggregated watch fraction for one lecture.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementRecord {
    pub user_id: UserId,
    pub lecture_id: LectureId,
    pub normalized_engagement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub lecture_id: LectureId,
    pub mnet: Option<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTable {
    pub encoding: Encoding,
    pub entries: Vec<LabelEntry>,
    /// Lectures that could not be labelled under this encoding.
    #[serde(default)]
    pub excluded: Vec<LectureId>,
}

impl LabelTable {
    pub fn target_of(&self, lecture_id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.lecture_id == lecture_id)
            .map(|e| e.target)
    }
}

/// Total watch fraction for one (user, lecture), capped at 1.
pub fn user_lecture_engagement(watch_times_s: &[f64], duration_s: f64) -> Result<f64, LabelError> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(LabelError::BadDuration(duration_s));
    }
    let total: f64 = watch_times_s.iter().sum();
    Ok((total / duration_s).min(1.0))
}

/// Aggregate raw events into one record per (user, lecture). Events whose
/// lecture id is unknown are ignored; the corpus filter removes them upstream.
pub fn engagement_records(
    lectures: &[Lecture],
    events: &[ViewEvent],
) -> Result<Vec<EngagementRecord>, LabelError> {
    let durations: BTreeMap<&str, f64> = lectures
        .iter()
        .map(|l| (l.id.as_str(), l.duration_s))
        .collect();
    let mut sums: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for ev in events {
        if durations.contains_key(ev.lecture_id.as_str()) {
            *sums
                .entry((ev.user_id.as_str(), ev.lecture_id.as_str()))
                .or_insert(0.0) += ev.watch_time_s;
        }
    }
    let mut records = Vec::with_capacity(sums.len());
    for ((user, lecture), total) in sums {
        let duration = durations[lecture];
        records.push(EngagementRecord {
            user_id: user.to_string(),
            lecture_id: lecture.to_string(),
            normalized_engagement: user_lecture_engagement(&[total], duration)?,
        });
    }
    Ok(records)
}

/// Median over per-user engagement fractions, clamped to [0, 1]. An even
/// count takes the mean of the two middle values.
pub fn mnet(values: &[f64]) -> Result<f64, LabelError> {
    if values.is_empty() {
        return Err(LabelError::NoRecords);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(median.clamp(0.0, 1.0))
}

/// Log-transformed engagement target: ln of the fraction, floored at
/// `epsilon` so a zero-engagement lecture maps to ln(epsilon) rather than
/// negative infinity.
pub fn lmnet(mnet_value: f64, epsilon: f64) -> f64 {
    mnet_value.clamp(epsilon, 1.0).ln()
}

/// Drop every event of users whose mean engagement fraction across their
/// (user, lecture) records is strictly below `threshold`.
pub fn clean_bot_users(
    lectures: &[Lecture],
    events: Vec<ViewEvent>,
    threshold: f64,
) -> Result<Vec<ViewEvent>, LabelError> {
    let records = engagement_records(lectures, &events)?;
    let mut per_user: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in &records {
        let entry = per_user.entry(r.user_id.as_str()).or_insert((0.0, 0));
        entry.0 += r.normalized_engagement;
        entry.1 += 1;
    }
    let bots: BTreeSet<String> = per_user
        .iter()
        .filter(|(_, (sum, n))| sum / (*n as f64) < threshold)
        .map(|(u, _)| u.to_string())
        .collect();
    Ok(events
        .into_iter()
        .filter(|e| !bots.contains(&e.user_id))
        .collect())
}

fn per_lecture_values(records: &[EngagementRecord]) -> BTreeMap<&str, Vec<f64>> {
    let mut map: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        map.entry(r.lecture_id.as_str())
            .or_default()
            .push(r.normalized_engagement);
    }
    map
}

fn lmnet_table(
    lectures: &[Lecture],
    records: &[EngagementRecord],
    encoding: Encoding,
    epsilon: f64,
) -> LabelTable {
    let by_lecture = per_lecture_values(records);
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for lecture in lectures {
        match by_lecture.get(lecture.id.as_str()) {
            Some(values) => {
                let m = mnet(values).expect("non-empty by construction");
                entries.push(LabelEntry {
                    lecture_id: lecture.id.clone(),
                    mnet: Some(m),
                    target: lmnet(m, epsilon),
                });
            }
            None => excluded.push(lecture.id.clone()),
        }
    }
    LabelTable {
        encoding,
        entries,
        excluded,
    }
}

/// Per-user z-scoring of log engagement, aggregated to lectures by median.
/// Users with a single record or zero spread contribute nothing.
pub fn standardised_labels(
    lectures: &[Lecture],
    events: &[ViewEvent],
    epsilon: f64,
) -> Result<LabelTable, LabelError> {
    let records = engagement_records(lectures, events)?;
    let mut per_user: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for r in &records {
        per_user
            .entry(r.user_id.as_str())
            .or_default()
            .push((r.lecture_id.as_str(), lmnet(r.normalized_engagement, epsilon)));
    }
    let mut contributions: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for values in per_user.values() {
        if values.len() < 2 {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().map(|(_, v)| v).sum::<f64>() / n;
        let var = values.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / n;
        if var <= 0.0 {
            continue;
        }
        let std = var.sqrt();
        for (lecture, v) in values {
            contributions
                .entry(lecture)
                .or_default()
                .push((v - mean) / std);
        }
    }
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for lecture in lectures {
        match contributions.get(lecture.id.as_str()) {
            Some(zs) => entries.push(LabelEntry {
                lecture_id: lecture.id.clone(),
                mnet: None,
                target: mnet_free_median(zs),
            }),
            None => excluded.push(lecture.id.clone()),
        }
    }
    Ok(LabelTable {
        encoding: Encoding::StandardisedLmnet,
        entries,
        excluded,
    })
}

/// Median without the [0, 1] clamp used by MNET.
fn mnet_free_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Pairwise win counts between items, the input to the probit scale fit.
#[derive(Debug, Clone, Default)]
pub struct ComparisonCounts {
    pub n_items: usize,
    /// `wins[(i, j)]` = number of comparisons item `i` won against item `j`.
    pub wins: BTreeMap<(usize, usize), u64>,
}

impl ComparisonCounts {
    pub fn add_win(&mut self, winner: usize, loser: usize) {
        *self.wins.entry((winner, loser)).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.wins.values().sum()
    }
}

/// Maximum-likelihood interval scale under P(i beats j) = Phi(s_i - s_j),
/// with a quadratic penalty anchoring the solution and mean(s) = 0.
///
/// Plain gradient ascent with a fixed step sized from the comparison counts;
/// stops when the penalized log-likelihood improves by less than `tol`.
pub fn fit_probit_scale(
    counts: &ComparisonCounts,
    penalty: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, LabelError> {
    if counts.wins.is_empty() || counts.n_items == 0 {
        return Err(LabelError::EmptyComparisons);
    }
    let n = counts.n_items;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let pairs: Vec<(usize, usize, f64)> = counts
        .wins
        .iter()
        .map(|(&(i, j), &w)| (i, j, w as f64))
        .collect();

    // Lipschitz-style bound on the gradient: the probit log-likelihood has
    // per-comparison curvature below 1, so the busiest item's comparison
    // count caps a safe fixed step.
    let mut involvement = vec![0.0f64; n];
    for &(i, j, w) in &pairs {
        involvement[i] += w;
        involvement[j] += w;
    }
    let max_involvement = involvement.iter().cloned().fold(0.0, f64::max);
    let step = 1.0 / (max_involvement + 2.0 * penalty + 1.0);

    let phi_floor = 1e-300;
    let objective = |s: &[f64]| -> f64 {
        let mut ll = 0.0;
        for &(i, j, w) in &pairs {
            let p = normal.cdf(s[i] - s[j]).max(phi_floor);
            ll += w * p.ln();
        }
        ll - penalty * s.iter().map(|v| v * v).sum::<f64>()
    };

    let mut s = vec![0.0f64; n];
    let mut grad = vec![0.0f64; n];
    let mut prev = objective(&s);
    for _ in 0..max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &(i, j, w) in &pairs {
            let d = s[i] - s[j];
            let ratio = normal.pdf(d) / normal.cdf(d).max(phi_floor);
            grad[i] += w * ratio;
            grad[j] -= w * ratio;
        }
        for (g, v) in grad.iter_mut().zip(&s) {
            *g -= 2.0 * penalty * v;
        }
        for (v, g) in s.iter_mut().zip(&grad) {
            *v += step * g;
        }
        // Re-anchor to mean zero; the likelihood only sees differences.
        let mean = s.iter().sum::<f64>() / n as f64;
        s.iter_mut().for_each(|v| *v -= mean);

        let cur = objective(&s);
        if (cur - prev).abs() < tol {
            return Ok(s);
        }
        prev = cur;
    }
    Err(LabelError::NoConvergence)
}

/// Comparative scaling of lectures from per-user engagement orderings.
///
/// Each user contributes one comparison per unordered lecture pair they
/// engaged with; ties are skipped. Disconnected comparison graphs are scaled
/// per connected component, each anchored to mean zero.
pub fn comparative_scale(
    lectures: &[Lecture],
    events: &[ViewEvent],
) -> Result<LabelTable, LabelError> {
    let records = engagement_records(lectures, events)?;
    let index: BTreeMap<&str, usize> = lectures
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id.as_str(), i))
        .collect();

    let mut per_user: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for r in &records {
        per_user
            .entry(r.user_id.as_str())
            .or_default()
            .push((index[r.lecture_id.as_str()], r.normalized_engagement));
    }

    let n = lectures.len();
    let mut counts = ComparisonCounts {
        n_items: n,
        wins: BTreeMap::new(),
    };
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for seen in per_user.values() {
        for a in 0..seen.len() {
            for b in (a + 1)..seen.len() {
                let (ia, ea) = seen[a];
                let (ib, eb) = seen[b];
                if ea > eb {
                    counts.add_win(ia, ib);
                } else if eb > ea {
                    counts.add_win(ib, ia);
                } else {
                    continue;
                }
                adjacency[ia].insert(ib);
                adjacency[ib].insert(ia);
            }
        }
    }
    if counts.wins.is_empty() {
        return Err(LabelError::EmptyComparisons);
    }

    // Connected components over the compared graph.
    let mut component = vec![usize::MAX; n];
    let mut n_components = 0usize;
    for start in 0..n {
        if component[start] != usize::MAX || adjacency[start].is_empty() {
            continue;
        }
        let mut stack = vec![start];
        component[start] = n_components;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if component[v] == usize::MAX {
                    component[v] = n_components;
                    stack.push(v);
                }
            }
        }
        n_components += 1;
    }

    let mut scale = vec![f64::NAN; n];
    for comp in 0..n_components {
        let members: Vec<usize> = (0..n).filter(|&i| component[i] == comp).collect();
        let local: BTreeMap<usize, usize> =
            members.iter().enumerate().map(|(li, &gi)| (gi, li)).collect();
        let mut local_counts = ComparisonCounts {
            n_items: members.len(),
            wins: BTreeMap::new(),
        };
        for (&(i, j), &w) in &counts.wins {
            if component[i] == comp {
                *local_counts.wins.entry((local[&i], local[&j])).or_insert(0) += w;
            }
        }
        let fitted = fit_probit_scale(&local_counts, DEFAULT_SCALE_PENALTY, 1e-8, 200_000)?;
        for (li, &gi) in members.iter().enumerate() {
            scale[gi] = fitted[li];
        }
    }

    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for (i, lecture) in lectures.iter().enumerate() {
        if scale[i].is_nan() {
            excluded.push(lecture.id.clone());
        } else {
            entries.push(LabelEntry {
                lecture_id: lecture.id.clone(),
                mnet: None,
                target: scale[i],
            });
        }
    }
    Ok(LabelTable {
        encoding: Encoding::Comparative,
        entries,
        excluded,
    })
}

/// Parameters for label construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LabelParams {
    pub epsilon: f64,
    pub bot_threshold: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            bot_threshold: DEFAULT_BOT_THRESHOLD,
        }
    }
}

impl LabelParams {
    pub fn validate(&self) -> Result<(), LabelError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(LabelError::BadParam(format!(
                "epsilon must be in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.bot_threshold > 0.0 && self.bot_threshold < 1.0) {
            return Err(LabelError::BadParam(format!(
                "bot threshold must be in (0, 1), got {}",
                self.bot_threshold
            )));
        }
        Ok(())
    }
}

/// Build the label table for the requested encoding.
pub fn build_label_table(
    lectures: &[Lecture],
    events: &[ViewEvent],
    encoding: Encoding,
    params: LabelParams,
) -> Result<LabelTable, LabelError> {
    params.validate()?;
    match encoding {
        Encoding::RawLmnet => {
            let records = engagement_records(lectures, events)?;
            Ok(lmnet_table(lectures, &records, encoding, params.epsilon))
        }
        Encoding::CleanedLmnet => {
            let cleaned = clean_bot_users(lectures, events.to_vec(), params.bot_threshold)?;
            let records = engagement_records(lectures, &cleaned)?;
            Ok(lmnet_table(lectures, &records, encoding, params.epsilon))
        }
        Encoding::StandardisedLmnet => standardised_labels(lectures, events, params.epsilon),
        Encoding::Comparative => comparative_scale(lectures, events),
    }
}

/// labels.csv: lecture_id, encoding, mnet (empty where inapplicable), target.
pub fn write_labels_csv(table: &LabelTable, path: &Path) -> Result<(), LabelError> {
    let mut out = String::from("lecture_id,encoding,mnet,target\n");
    for e in &table.entries {
        let mnet = e.mnet.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.lecture_id,
            table.encoding.as_str(),
            mnet,
            e.target
        ));
    }
    std::fs::write(path, out).map_err(|e| LabelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
