//! Experiment drivers: cross-validated ranking evaluation, signal
//! correlations, the personalised-model comparison, and the knowledge-area
//! split.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{
    binned_misranking, mae, pairwise_accuracy, srocc, CumulativePoint, LengthPair, MisrankBin,
    PairContext, PairFilter,
};
use super::EvalError;
use crate::corpus::{KnowledgeArea, Lecture, ViewEvent};
use crate::features::{design_matrix, extract_corpus, feature_names, FeatureMode, Lexicons};
use crate::labels::{build_label_table, lmnet, Encoding, LabelParams, LabelTable};
use crate::models::{cross_validate, train, CvContext, ModelSpec, TrainedModel};

fn write_file(path: &Path, contents: &str) -> Result<(), EvalError> {
    std::fs::write(path, contents).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SroccPair {
    pub srocc: f64,
    pub n: usize,
}

/// Pairwise rank correlations among engagement, view counts, and ratings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalCorrelations {
    pub mnet_vs_views: Option<SroccPair>,
    pub mnet_vs_rating: Option<SroccPair>,
    pub views_vs_rating: Option<SroccPair>,
}

fn srocc_over_overlap(pairs: &[(f64, f64)]) -> Option<SroccPair> {
    if pairs.len() < 2 {
        return None;
    }
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    srocc(&a, &b).ok().map(|r| SroccPair {
        srocc: r,
        n: pairs.len(),
    })
}

/// SROCC among MNET, view count, and mean star rating over the lectures
/// where both signals of a pair exist.
pub fn correlate_signals(
    lectures: &[Lecture],
    labels: &LabelTable,
) -> Result<SignalCorrelations, EvalError> {
    let mnet_by_id: BTreeMap<&str, f64> = labels
        .entries
        .iter()
        .filter_map(|e| e.mnet.map(|m| (e.lecture_id.as_str(), m)))
        .collect();
    let mut mv = Vec::new();
    let mut mr = Vec::new();
    let mut vr = Vec::new();
    for l in lectures {
        let m = mnet_by_id.get(l.id.as_str()).copied();
        if let (Some(m), Some(v)) = (m, l.view_count) {
            mv.push((m, v as f64));
        }
        if let (Some(m), Some(r)) = (m, l.mean_star_rating) {
            mr.push((m, r));
        }
        if let (Some(v), Some(r)) = (l.view_count, l.mean_star_rating) {
            vr.push((v as f64, r));
        }
    }
    let out = SignalCorrelations {
        mnet_vs_views: srocc_over_overlap(&mv),
        mnet_vs_rating: srocc_over_overlap(&mr),
        views_vs_rating: srocc_over_overlap(&vr),
    };
    if out.mnet_vs_views.is_none() && out.mnet_vs_rating.is_none() && out.views_vs_rating.is_none()
    {
        return Err(EvalError::InsufficientOverlap(
            "no signal pair overlaps on two or more lectures".to_string(),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSplitReport {
    pub short_short: Option<f64>,
    pub long_long: Option<f64>,
    pub short_long: Option<f64>,
}

/// Full cross-validated evaluation report for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub encoding: String,
    pub model: String,
    pub feature_mode: String,
    pub folds: usize,
    pub seed: u64,
    pub n_lectures: usize,
    pub same_subject: bool,
    pub pairwise_accuracy: f64,
    pub pairwise_se: f64,
    pub srocc: f64,
    pub srocc_se: f64,
    pub mae: f64,
    pub fold_pairwise: Vec<f64>,
    pub fold_srocc: Vec<f64>,
    pub binned: Vec<MisrankBin>,
    pub cumulative: Vec<CumulativePoint>,
    pub correlations: Option<SignalCorrelations>,
    pub length_split: Option<LengthSplitReport>,
    /// Raw MNET / views / rating triples backing scatter.csv.
    #[serde(skip)]
    pub scatter: Vec<(f64, Option<u64>, Option<f64>)>,
}

pub struct CvExperimentOptions {
    pub mode: FeatureMode,
    pub encoding: Encoding,
    pub label_params: LabelParams,
    pub spec: ModelSpec,
    pub folds: usize,
    pub seed: u64,
    pub same_subject: bool,
    pub length_split: bool,
}

/// Cross-validated experiment: extract features, derive labels, run seeded
/// k-fold CV, and analyse the pooled out-of-fold predictions.
pub fn run_cv_experiment(
    lectures: &[Lecture],
    events: &[ViewEvent],
    lexicons: &Lexicons,
    opts: &CvExperimentOptions,
) -> Result<EvaluationReport, EvalError> {
    let features = extract_corpus(lectures, lexicons, opts.mode)?;
    let names = feature_names(opts.mode);
    let labels = build_label_table(lectures, events, opts.encoding, opts.label_params)?;
    // Raw MNET backs the misranking bins and the scatter export for every
    // encoding, matching how engagement differences are defined.
    let raw = if opts.encoding == Encoding::RawLmnet {
        labels.clone()
    } else {
        build_label_table(lectures, events, Encoding::RawLmnet, opts.label_params)?
    };
    let raw_mnet: BTreeMap<&str, f64> = raw
        .entries
        .iter()
        .filter_map(|e| e.mnet.map(|m| (e.lecture_id.as_str(), m)))
        .collect();

    let target_by_id: BTreeMap<&str, f64> = labels
        .entries
        .iter()
        .map(|e| (e.lecture_id.as_str(), e.target))
        .collect();
    let mut kept_idx = Vec::new();
    let mut y = Vec::new();
    let mut mnet_vals = Vec::new();
    for (i, l) in lectures.iter().enumerate() {
        if let (Some(&t), Some(&m)) = (target_by_id.get(l.id.as_str()), raw_mnet.get(l.id.as_str()))
        {
            kept_idx.push(i);
            y.push(t);
            mnet_vals.push(m);
        }
    }
    let rows = design_matrix(&features, opts.mode);
    let x: Vec<Vec<f64>> = kept_idx.iter().map(|&i| rows[i].clone()).collect();
    let subjects: Vec<String> = kept_idx.iter().map(|&i| lectures[i].subject.clone()).collect();
    let word_counts: Vec<f64> = kept_idx
        .iter()
        .map(|&i| features[i].word_count as f64)
        .collect();

    let filter = if opts.same_subject {
        PairFilter::SameSubject
    } else {
        PairFilter::AllPairs
    };
    let ctx = CvContext {
        subjects: Some(&subjects),
        mnet: Some(&mnet_vals),
        word_counts: Some(&word_counts),
    };
    let cv = cross_validate(
        &x,
        &y,
        &names,
        &opts.spec,
        opts.folds,
        opts.seed,
        &filter,
        &ctx,
    )?;

    let binned = binned_misranking(&mnet_vals, &cv.oof_predictions, 0.1)?;
    let oof_mae = mae(&y, &cv.oof_predictions);

    let length_split = if opts.length_split {
        let pair_ctx = PairContext {
            subjects: Some(&subjects),
            mnet: Some(&mnet_vals),
            word_counts: Some(&word_counts),
        };
        let acc = |kind| {
            pairwise_accuracy(&y, &cv.oof_predictions, &PairFilter::LengthSplit(kind), &pair_ctx)
                .ok()
        };
        Some(LengthSplitReport {
            short_short: acc(LengthPair::ShortShort),
            long_long: acc(LengthPair::LongLong),
            short_long: acc(LengthPair::ShortLong),
        })
    } else {
        None
    };

    let kept_lectures: Vec<Lecture> = kept_idx.iter().map(|&i| lectures[i].clone()).collect();
    let correlations = correlate_signals(&kept_lectures, &raw).ok();
    let scatter: Vec<(f64, Option<u64>, Option<f64>)> = kept_idx
        .iter()
        .zip(&mnet_vals)
        .map(|(&i, &m)| (m, lectures[i].view_count, lectures[i].mean_star_rating))
        .collect();

    Ok(EvaluationReport {
        encoding: opts.encoding.as_str().to_string(),
        model: opts.spec.family.as_str().to_string(),
        feature_mode: opts.mode.as_str().to_string(),
        folds: opts.folds,
        seed: opts.seed,
        n_lectures: y.len(),
        same_subject: opts.same_subject,
        pairwise_accuracy: cv.pairwise_mean,
        pairwise_se: cv.pairwise_se,
        srocc: cv.srocc_mean,
        srocc_se: cv.srocc_se,
        mae: oof_mae,
        fold_pairwise: cv.fold_pairwise,
        fold_srocc: cv.fold_srocc,
        binned: binned.bins,
        cumulative: binned.cumulative,
        correlations,
        length_split,
        scatter,
    })
}

#[derive(Debug, Clone)]
pub struct PersonalisedOptions {
    pub spec: ModelSpec,
    pub top_k_users: usize,
    pub split: f64,
    pub min_events: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl PersonalisedOptions {
    pub fn new(spec: ModelSpec) -> Self {
        Self {
            spec,
            top_k_users: 20,
            split: 0.7,
            min_events: 10,
            seed: 0,
            epsilon: crate::labels::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDelta {
    pub user_id: String,
    pub n_events: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mae_population: f64,
    pub mae_personal: f64,
    /// Positive when the personal model beats the population model.
    pub delta_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalisedReport {
    pub users: Vec<UserDelta>,
    pub skipped: Vec<(String, String)>,
}

/// Population vs personal models for the most active users. The population
/// model is trained on a seeded 70:30 lecture split; each personal model is
/// trained on the user's temporally earliest `split` fraction of events,
/// cross-modal features only, and both are scored on the user's remaining
/// events with per-event log watch fractions as targets.
pub fn personalised_comparison(
    lectures: &[Lecture],
    events: &[ViewEvent],
    lexicons: &Lexicons,
    opts: &PersonalisedOptions,
) -> Result<PersonalisedReport, EvalError> {
    let mode = FeatureMode::ContentOnly;
    let features = extract_corpus(lectures, lexicons, mode)?;
    let names = feature_names(mode);
    let rows = design_matrix(&features, mode);
    let row_by_id: BTreeMap<&str, &Vec<f64>> = lectures
        .iter()
        .zip(&rows)
        .map(|(l, r)| (l.id.as_str(), r))
        .collect();
    let duration_by_id: BTreeMap<&str, f64> = lectures
        .iter()
        .map(|l| (l.id.as_str(), l.duration_s))
        .collect();

    // Population model on the global lecture split.
    let labels = build_label_table(lectures, events, Encoding::RawLmnet, LabelParams::default())?;
    let target_by_id: BTreeMap<&str, f64> = labels
        .entries
        .iter()
        .map(|e| (e.lecture_id.as_str(), e.target))
        .collect();
    let labelled: Vec<usize> = (0..lectures.len())
        .filter(|&i| target_by_id.contains_key(lectures[i].id.as_str()))
        .collect();
    let (train_idx, _) = holdout_split(&labelled, opts.split, opts.seed);
    let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let y_train: Vec<f64> = train_idx
        .iter()
        .map(|&i| target_by_id[lectures[i].id.as_str()])
        .collect();
    let population = train(&x_train, &y_train, &names, &opts.spec)?;

    // Rank users by activity; break count ties by id.
    let mut per_user: BTreeMap<&str, Vec<&ViewEvent>> = BTreeMap::new();
    for ev in events {
        if row_by_id.contains_key(ev.lecture_id.as_str()) {
            per_user.entry(ev.user_id.as_str()).or_default().push(ev);
        }
    }
    let mut ranked: Vec<(&str, usize)> = per_user.iter().map(|(u, evs)| (*u, evs.len())).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(opts.top_k_users);

    let mut report = PersonalisedReport {
        users: Vec::new(),
        skipped: Vec::new(),
    };
    for (user, n_events) in ranked {
        if n_events < opts.min_events {
            report.skipped.push((
                user.to_string(),
                format!("only {n_events} events, need {}", opts.min_events),
            ));
            continue;
        }
        let mut evs: Vec<&ViewEvent> = per_user[user].clone();
        evs.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.lecture_id.cmp(&b.lecture_id))
        });
        let n = evs.len();
        let n_train = ((n as f64 * opts.split).floor() as usize).clamp(1, n - 1);

        let target = |ev: &ViewEvent| {
            let d = duration_by_id[ev.lecture_id.as_str()];
            lmnet((ev.watch_time_s / d).min(1.0), opts.epsilon)
        };
        let x_personal: Vec<Vec<f64>> = evs[..n_train]
            .iter()
            .map(|ev| row_by_id[ev.lecture_id.as_str()].clone())
            .collect();
        let y_personal: Vec<f64> = evs[..n_train].iter().map(|ev| target(ev)).collect();
        let personal = match train(&x_personal, &y_personal, &names, &opts.spec) {
            Ok(m) => m,
            Err(e) => {
                report
                    .skipped
                    .push((user.to_string(), format!("personal fit failed: {e}")));
                continue;
            }
        };

        let x_test: Vec<&Vec<f64>> = evs[n_train..]
            .iter()
            .map(|ev| row_by_id[ev.lecture_id.as_str()])
            .collect();
        let y_test: Vec<f64> = evs[n_train..].iter().map(|ev| target(ev)).collect();
        let pop_preds: Vec<f64> = x_test.iter().map(|r| population.predict_row(r)).collect();
        let per_preds: Vec<f64> = x_test.iter().map(|r| personal.predict_row(r)).collect();
        let mae_population = mae(&y_test, &pop_preds);
        let mae_personal = mae(&y_test, &per_preds);
        report.users.push(UserDelta {
            user_id: user.to_string(),
            n_events: n,
            n_train,
            n_test: n - n_train,
            mae_population,
            mae_personal,
            delta_mae: mae_population - mae_personal,
        });
    }
    Ok(report)
}

/// Seeded holdout split of the given indices; first fraction goes to train.
fn holdout_split(indices: &[usize], split: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order = indices.to_vec();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((order.len() as f64 * split).floor() as usize).clamp(1, order.len() - 1);
    let test = order.split_off(n_train);
    (order, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSplitReport {
    pub agnostic_stem: f64,
    pub agnostic_misc: f64,
    pub specific_stem: f64,
    pub specific_misc: f64,
    pub n_test_stem: usize,
    pub n_test_misc: usize,
}

/// Train on subject-agnostic vs subject-specific data, test per knowledge
/// area on a shared holdout split.
pub fn subject_split_experiment(
    lectures: &[Lecture],
    events: &[ViewEvent],
    lexicons: &Lexicons,
    mode: FeatureMode,
    spec: &ModelSpec,
    split: f64,
    seed: u64,
) -> Result<SubjectSplitReport, EvalError> {
    let features = extract_corpus(lectures, lexicons, mode)?;
    let names = feature_names(mode);
    let rows = design_matrix(&features, mode);
    let labels = build_label_table(lectures, events, Encoding::RawLmnet, LabelParams::default())?;
    let target_by_id: BTreeMap<&str, f64> = labels
        .entries
        .iter()
        .map(|e| (e.lecture_id.as_str(), e.target))
        .collect();
    let labelled: Vec<usize> = (0..lectures.len())
        .filter(|&i| target_by_id.contains_key(lectures[i].id.as_str()))
        .collect();
    for area in [KnowledgeArea::Stem, KnowledgeArea::Miscellaneous] {
        if !labelled.iter().any(|&i| lectures[i].knowledge_area == area) {
            return Err(EvalError::EmptyArea(area.to_string()));
        }
    }

    let (train_idx, test_idx) = holdout_split(&labelled, split, seed);
    let in_area = |idx: &[usize], area: KnowledgeArea| -> Vec<usize> {
        idx.iter()
            .copied()
            .filter(|&i| lectures[i].knowledge_area == area)
            .collect()
    };
    let gather = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter().map(|&i| rows[i].clone()).collect(),
            idx.iter()
                .map(|&i| target_by_id[lectures[i].id.as_str()])
                .collect(),
        )
    };

    let (x_all, y_all) = gather(&train_idx);
    let agnostic = train(&x_all, &y_all, &names, spec)?;
    let mut area_models: BTreeMap<&'static str, TrainedModel> = BTreeMap::new();
    for (key, area) in [
        ("stem", KnowledgeArea::Stem),
        ("misc", KnowledgeArea::Miscellaneous),
    ] {
        let idx = in_area(&train_idx, area);
        if idx.len() < 2 {
            return Err(EvalError::EmptyArea(area.to_string()));
        }
        let (x, y) = gather(&idx);
        area_models.insert(key, train(&x, &y, &names, spec)?);
    }

    let score = |model: &TrainedModel, area: KnowledgeArea| -> Result<(f64, usize), EvalError> {
        let idx = in_area(&test_idx, area);
        if idx.len() < 2 {
            return Err(EvalError::EmptyArea(area.to_string()));
        }
        let (x, y) = gather(&idx);
        let preds: Vec<f64> = x.iter().map(|r| model.predict_row(r)).collect();
        let acc = pairwise_accuracy(&y, &preds, &PairFilter::AllPairs, &PairContext::default())?;
        Ok((acc, idx.len()))
    };

    let (agnostic_stem, n_test_stem) = score(&agnostic, KnowledgeArea::Stem)?;
    let (agnostic_misc, n_test_misc) = score(&agnostic, KnowledgeArea::Miscellaneous)?;
    let (specific_stem, _) = score(&area_models["stem"], KnowledgeArea::Stem)?;
    let (specific_misc, _) = score(&area_models["misc"], KnowledgeArea::Miscellaneous)?;
    Ok(SubjectSplitReport {
        agnostic_stem,
        agnostic_misc,
        specific_stem,
        specific_misc,
        n_test_stem,
        n_test_misc,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_bins_csv(bins: &[MisrankBin], path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("bin_lo,bin_hi,accuracy,pairs\n");
    for b in bins {
        out.push_str(&format!(
            "{},{},{},{}\n",
            b.lo,
            b.hi,
            fmt_opt(b.accuracy),
            b.pairs
        ));
    }
    write_file(path, &out)
}

pub fn write_cumulative_csv(points: &[CumulativePoint], path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("lower_bound,accuracy,pairs\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.lower_bound,
            fmt_opt(p.accuracy),
            p.pairs
        ));
    }
    write_file(path, &out)
}

pub fn write_scatter_csv(
    scatter: &[(f64, Option<u64>, Option<f64>)],
    path: &Path,
) -> Result<(), EvalError> {
    let mut out = String::from("mnet,views,rating\n");
    for (m, v, r) in scatter {
        out.push_str(&format!(
            "{},{},{}\n",
            m,
            v.map(|x| x.to_string()).unwrap_or_default(),
            fmt_opt(*r)
        ));
    }
    write_file(path, &out)
}

pub fn write_personalised_csv(report: &PersonalisedReport, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from(
        "user_id,n_events,n_train,n_test,mae_population,mae_personal,delta_mae\n",
    );
    for u in &report.users {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            u.user_id, u.n_events, u.n_train, u.n_test, u.mae_population, u.mae_personal,
            u.delta_mae
        ));
    }
    write_file(path, &out)
}

pub fn write_subject_split_csv(report: &SubjectSplitReport, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("training_data,test_area,pairwise_accuracy\n");
    out.push_str(&format!("subject_agnostic,STEM,{}\n", report.agnostic_stem));
    out.push_str(&format!(
        "subject_agnostic,Miscellaneous,{}\n",
        report.agnostic_misc
    ));
    out.push_str(&format!("subject_specific,STEM,{}\n", report.specific_stem));
    out.push_str(&format!(
        "subject_specific,Miscellaneous,{}\n",
        report.specific_misc
    ));
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabelEntry;
    use crate::models::ModelFamily;
    use crate::synth::{generate, GeneratorSpec, LatentFn, SynthCorpus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn raw_table(corpus: &SynthCorpus) -> LabelTable {
        build_label_table(
            &corpus.lectures,
            &corpus.events,
            Encoding::RawLmnet,
            LabelParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn views_monotone_in_engagement_correlate_perfectly() {
        let mut corpus = generate(&GeneratorSpec::new(30, 5, LatentFn::Linear, 2));
        for (lecture, &latent) in corpus.lectures.iter_mut().zip(&corpus.latent_targets) {
            lecture.view_count = Some((latent * 100_000.0) as u64);
            lecture.mean_star_rating = None;
        }
        let table = raw_table(&corpus);
        let report = correlate_signals(&corpus.lectures, &table).unwrap();
        let mv = report.mnet_vs_views.unwrap();
        assert!((mv.srocc - 1.0).abs() < 1e-12, "{}", mv.srocc);
        assert!(report.mnet_vs_rating.is_none());
    }

    #[test]
    fn independent_signals_correlate_near_zero() {
        // 1000 lectures with independent random mnet, views, and ratings.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut lectures = Vec::new();
        let mut entries = Vec::new();
        let base = generate(&GeneratorSpec::new(1, 1, LatentFn::Linear, 0)).lectures[0].clone();
        for i in 0..1000 {
            let mut l = base.clone();
            l.id = format!("r{i}");
            l.view_count = Some(rng.random_range(1..100_000));
            l.mean_star_rating = Some(rng.random_range(1.0..5.0));
            lectures.push(l);
            entries.push(LabelEntry {
                lecture_id: format!("r{i}"),
                mnet: Some(rng.random_range(0.0..1.0)),
                target: 0.0,
            });
        }
        let table = LabelTable {
            encoding: Encoding::RawLmnet,
            entries,
            excluded: vec![],
        };
        let report = correlate_signals(&lectures, &table).unwrap();
        for pair in [
            report.mnet_vs_views.unwrap(),
            report.mnet_vs_rating.unwrap(),
            report.views_vs_rating.unwrap(),
        ] {
            assert!(pair.srocc.abs() < 0.1, "{}", pair.srocc);
            assert_eq!(pair.n, 1000);
        }
    }

    #[test]
    fn correlate_signals_errors_without_overlap() {
        let mut corpus = generate(&GeneratorSpec::new(5, 5, LatentFn::Linear, 3));
        for l in &mut corpus.lectures {
            l.view_count = None;
            l.mean_star_rating = None;
        }
        let table = raw_table(&corpus);
        assert!(matches!(
            correlate_signals(&corpus.lectures, &table),
            Err(EvalError::InsufficientOverlap(_))
        ));
    }

    fn rr_options() -> PersonalisedOptions {
        let mut spec = ModelSpec::new(ModelFamily::Rr).with_seed(1);
        spec.lambda = 1e-6;
        PersonalisedOptions {
            top_k_users: 50,
            seed: 5,
            ..PersonalisedOptions::new(spec)
        }
    }

    #[test]
    fn user_matching_the_population_has_near_zero_delta() {
        // Noise-free corpus: every user's per-event engagement equals the
        // lecture-level target, so both models face the same function.
        let corpus = generate(&GeneratorSpec::new(40, 4, LatentFn::Linear, 7));
        let report = personalised_comparison(
            &corpus.lectures,
            &corpus.events,
            &Lexicons::builtin(),
            &rr_options(),
        )
        .unwrap();
        assert_eq!(report.users.len(), 4);
        for user in &report.users {
            assert!(user.delta_mae.abs() < 0.05, "{user:?}");
        }
    }

    #[test]
    fn user_with_too_few_events_is_skipped() {
        let corpus = generate(&GeneratorSpec::new(40, 3, LatentFn::Linear, 9));
        let mut events = corpus.events.clone();
        for lecture in corpus.lectures.iter().take(3) {
            events.push(ViewEvent {
                user_id: "sparse".to_string(),
                lecture_id: lecture.id.clone(),
                timestamp: events[0].timestamp,
                watch_time_s: 10.0,
            });
        }
        let report = personalised_comparison(
            &corpus.lectures,
            &events,
            &Lexicons::builtin(),
            &rr_options(),
        )
        .unwrap();
        assert!(report.skipped.iter().any(|(u, _)| u == "sparse"));
        assert!(report.users.iter().all(|u| u.user_id != "sparse"));
    }

    #[test]
    fn strongly_biased_user_favours_the_personal_model() {
        // One user consistently watches less than the population by a fixed
        // multiplicative factor, an offset in log space the population model
        // cannot see.
        let corpus = generate(&GeneratorSpec::new(40, 4, LatentFn::Linear, 11));
        let bias = (-0.8f64).exp();
        let mut events = corpus.events.clone();
        for ev in &mut events {
            if ev.user_id == "u000" {
                ev.watch_time_s *= bias;
            }
        }
        let report = personalised_comparison(
            &corpus.lectures,
            &events,
            &Lexicons::builtin(),
            &rr_options(),
        )
        .unwrap();
        let biased = report.users.iter().find(|u| u.user_id == "u000").unwrap();
        assert!(
            biased.delta_mae > 0.3,
            "expected a clearly positive delta, got {biased:?}"
        );
    }

    #[test]
    fn identical_generator_across_areas_gives_similar_cells() {
        // Subjects cycle through both knowledge areas while engagement
        // depends only on content features, so all four cells hover at the
        // same (here: perfect) accuracy.
        let corpus = generate(&GeneratorSpec::new(60, 5, LatentFn::Linear, 13));
        let mut spec = ModelSpec::new(ModelFamily::Rr).with_seed(1);
        spec.lambda = 1e-6;
        let report = subject_split_experiment(
            &corpus.lectures,
            &corpus.events,
            &Lexicons::builtin(),
            FeatureMode::ContentOnly,
            &spec,
            0.7,
            3,
        )
        .unwrap();
        let cells = [
            report.agnostic_stem,
            report.agnostic_misc,
            report.specific_stem,
            report.specific_misc,
        ];
        for &c in &cells {
            assert!(c > 0.9, "{report:?}");
        }
        let spread = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - cells.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.1, "{report:?}");
    }

    #[test]
    fn single_area_corpus_is_an_error() {
        let corpus = generate(&GeneratorSpec::new(30, 5, LatentFn::Linear, 17));
        let stem_only: Vec<_> = corpus
            .lectures
            .iter()
            .filter(|l| l.knowledge_area == KnowledgeArea::Stem)
            .cloned()
            .collect();
        let ids: std::collections::BTreeSet<&str> =
            stem_only.iter().map(|l| l.id.as_str()).collect();
        let events: Vec<_> = corpus
            .events
            .iter()
            .filter(|e| ids.contains(e.lecture_id.as_str()))
            .cloned()
            .collect();
        let err = subject_split_experiment(
            &stem_only,
            &events,
            &Lexicons::builtin(),
            FeatureMode::ContentOnly,
            &ModelSpec::new(ModelFamily::Rr).with_seed(1),
            0.7,
            3,
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::EmptyArea(_)));
    }
}
