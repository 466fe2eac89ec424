//! Synthetic corpus generator with known latent engagement, used by property
//! tests and desk-scale acceptance runs.

use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    write_events, write_lectures, CorpusError, Lecture, Segment, SegmentKind, SubjectMap,
    Transcript, ViewEvent, LECTURE_TYPES,
};
use crate::features::{extract_corpus, FeatureMode, Lexicons};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentFn {
    /// Engagement log-linear in a few feature values.
    Linear,
    /// Two-level engagement keyed on word count.
    Step,
    /// Log-engagement proportional to a product of two standardized
    /// features; invisible to linear models.
    Product,
}

impl FromStr for LatentFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(LatentFn::Linear),
            "step" => Ok(LatentFn::Step),
            "product" => Ok(LatentFn::Product),
            other => Err(format!("unknown latent function `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_lectures: usize,
    pub n_users: usize,
    pub latent_fn: LatentFn,
    /// Standard deviation of per-user watch fractions around the latent
    /// target; zero makes every user watch exactly the latent fraction.
    pub noise_sd: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n_lectures: usize, n_users: usize, latent_fn: LatentFn, seed: u64) -> Self {
        Self {
            n_lectures,
            n_users,
            latent_fn,
            noise_sd: 0.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub lectures: Vec<Lecture>,
    pub events: Vec<ViewEvent>,
    /// Latent median watch fraction per lecture, aligned with `lectures`.
    pub latent_targets: Vec<f64>,
}

const CONTENT_POOL: [&str; 96] = [
    "algorithm", "gradient", "matrix", "neuron", "tensor", "graph", "kernel", "vector", "scalar",
    "model", "data", "signal", "sample", "filter", "layer", "network", "node", "edge", "cluster",
    "feature", "weight", "bias", "loss", "error", "metric", "curve", "slope", "peak", "valley",
    "noise", "pattern", "symbol", "theorem", "proof", "lemma", "axiom", "integer", "prime",
    "factor", "product", "series", "limit", "bound", "domain", "range", "field", "group", "ring",
    "space", "norm", "angle", "circle", "square", "cube", "sphere", "plane", "line", "point",
    "origin", "axis", "scale", "unit", "measure", "mass", "energy", "force", "wave", "particle",
    "atom", "molecule", "crystal", "fluid", "heat", "light", "sound", "charge", "current",
    "voltage", "circuit", "code", "loop", "branch", "stack", "queue", "tree", "forest", "leaf",
    "root", "depth", "width", "search", "sort", "hash", "cache", "memory", "disk",
];

const SUFFIX_POOL: [&str; 24] = [
    "education",
    "attention",
    "equation",
    "rotation",
    "translation",
    "regulation",
    "foundation",
    "evaluation",
    "estimation",
    "statement",
    "development",
    "argument",
    "experiment",
    "measurement",
    "difference",
    "reference",
    "evidence",
    "importance",
    "relevance",
    "performance",
    "quality",
    "stability",
    "complexity",
    "awareness",
];

fn build_transcript(
    rng: &mut ChaCha8Rng,
    n_tokens: usize,
    p_stop: f64,
    p_suffix: f64,
    stop_pool: &[&str],
    speech_seconds: f64,
    silence_seconds: f64,
) -> Transcript {
    let mut sentences: Vec<String> = Vec::new();
    let mut sentence: Vec<&str> = Vec::new();
    let mut until_break = rng.random_range(8..=14);
    for _ in 0..n_tokens {
        let r: f64 = rng.random();
        let word = if r < p_stop {
            stop_pool.choose(rng).unwrap()
        } else if r < p_stop + p_suffix {
            SUFFIX_POOL.choose(rng).unwrap()
        } else {
            CONTENT_POOL.choose(rng).unwrap()
        };
        sentence.push(word);
        until_break -= 1;
        if until_break == 0 {
            sentences.push(format!("{}.", sentence.join(" ")));
            sentence.clear();
            until_break = rng.random_range(8..=14);
        }
    }
    if !sentence.is_empty() {
        sentences.push(format!("{}.", sentence.join(" ")));
    }

    // Interleave speech chunks with equal silence gaps.
    let n_speech_chunks = 4.min(sentences.len().max(1));
    let n_silence = if silence_seconds > 0.0 { n_speech_chunks - 1 } else { 0 };
    let chunk_len = sentences.len().div_ceil(n_speech_chunks);
    let speech_chunk_s = speech_seconds / n_speech_chunks as f64;
    let silence_chunk_s = if n_silence > 0 {
        silence_seconds / n_silence as f64
    } else {
        0.0
    };
    let mut segments = Vec::new();
    let mut cursor = 0.0;
    for (i, chunk) in sentences.chunks(chunk_len.max(1)).enumerate() {
        if i > 0 && n_silence > 0 {
            segments.push(Segment {
                start_s: cursor,
                end_s: cursor + silence_chunk_s,
                kind: SegmentKind::Silence,
                text: String::new(),
            });
            cursor += silence_chunk_s;
        }
        segments.push(Segment {
            start_s: cursor,
            end_s: cursor + speech_chunk_s,
            kind: SegmentKind::Speech,
            text: chunk.join(" "),
        });
        cursor += speech_chunk_s;
    }
    Transcript { segments }
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Generate a schema-conformant corpus whose lecture-level median engagement
/// tracks a known function of the extracted features.
pub fn generate(spec: &GeneratorSpec) -> SynthCorpus {
    assert!(spec.n_lectures >= 1 && spec.n_users >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let subjects: Vec<String> = SubjectMap::builtin()
        .subjects()
        .map(|(s, _)| s.to_string())
        .collect();
    let lexicons = Lexicons::builtin();
    let stop_pool: Vec<&str> = lexicons.stopwords.iter().map(String::as_str).collect();

    let mut lectures = Vec::with_capacity(spec.n_lectures);
    for i in 0..spec.n_lectures {
        // Bimodal length so both sides of the short/long cutoff appear.
        let n_tokens = if rng.random::<f64>() < 0.7 {
            rng.random_range(150..1800)
        } else {
            rng.random_range(4000..8000)
        };
        let p_stop = rng.random_range(0.20..0.50);
        let p_suffix = rng.random_range(0.02..0.12);
        let wpm = rng.random_range(90.0..180.0);
        let speech_seconds = n_tokens as f64 / wpm * 60.0;
        let spr = rng.random_range(0.0..0.35);
        let duration_s = speech_seconds / (1.0 - spr);
        let silence_seconds = duration_s - speech_seconds;
        let transcript = build_transcript(
            &mut rng,
            n_tokens,
            p_stop,
            p_suffix,
            &stop_pool,
            speech_seconds,
            silence_seconds,
        );
        let title_len = rng.random_range(3..=8);
        let title: Vec<&str> = (0..title_len)
            .map(|_| *CONTENT_POOL.choose(&mut rng).unwrap())
            .collect();
        let epoch_days = rng.random_range(10_000..17_500);
        let published_date =
            NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + Duration::days(epoch_days);
        let mean_star_rating = (rng.random::<f64>() < 0.75)
            .then(|| (rng.random_range(1.0..=5.0f64) * 100.0).round() / 100.0);
        let view_count = Some(rng.random_range(5..5000u64));
        lectures.push(Lecture {
            id: format!("lec{i:04}"),
            title: title.join(" "),
            subject: subjects[i % subjects.len()].clone(),
            knowledge_area: SubjectMap::builtin()
                .area_of(&subjects[i % subjects.len()])
                .unwrap(),
            lecture_type: LECTURE_TYPES[i % LECTURE_TYPES.len()],
            published_date,
            duration_s,
            num_parts: rng.random_range(1..=3),
            transcript,
            mean_star_rating,
            view_count,
        });
    }

    // Latent engagement from the features the extractors actually see.
    let features = extract_corpus(&lectures, &lexicons, FeatureMode::ContentOnly)
        .expect("generated transcripts always tokenize");
    let z_wc = standardize(&features.iter().map(|f| f.word_count as f64).collect::<Vec<_>>());
    let z_pd =
        standardize(&features.iter().map(|f| f.published_days as f64).collect::<Vec<_>>());
    let z_sp = standardize(
        &features
            .iter()
            .map(|f| f.stopword_presence_rate)
            .collect::<Vec<_>>(),
    );
    let latent_targets: Vec<f64> = (0..spec.n_lectures)
        .map(|i| {
            let u = match spec.latent_fn {
                LatentFn::Linear => -0.5 * z_wc[i] + 0.3 * z_pd[i] - 0.2 * z_sp[i],
                LatentFn::Step => {
                    if z_wc[i] > 0.0 {
                        -1.0
                    } else {
                        1.0
                    }
                }
                LatentFn::Product => (z_wc[i] * z_pd[i]).clamp(-3.0, 3.0) * 0.45 / 0.55,
            };
            (-1.75 + 0.55 * u.clamp(-3.0, 3.0)).exp()
        })
        .collect();

    let base = DateTime::parse_from_rfc3339("2016-12-08T00:00:00Z")
        .unwrap()
        .with_timezone(&Utc);
    let mut events = Vec::with_capacity(spec.n_users * spec.n_lectures);
    for u in 0..spec.n_users {
        for (l, lecture) in lectures.iter().enumerate() {
            let target = latent_targets[l];
            let fraction = if spec.noise_sd <= 0.0 {
                target
            } else {
                let mean = target.clamp(0.02, 0.98);
                let var = spec.noise_sd * spec.noise_sd;
                let kappa = (mean * (1.0 - mean) / var - 1.0).max(0.5);
                let beta = Beta::new(mean * kappa, (1.0 - mean) * kappa).unwrap();
                beta.sample(&mut rng)
            };
            events.push(ViewEvent {
                user_id: format!("u{u:03}"),
                lecture_id: lecture.id.clone(),
                timestamp: base + Duration::seconds((u * spec.n_lectures + l) as i64 * 1800),
                watch_time_s: fraction * lecture.duration_s,
            });
        }
    }

    SynthCorpus {
        lectures,
        events,
        latent_targets,
    }
}

/// Write the corpus in the standard on-disk layout plus latents.csv.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir).map_err(|e| CorpusError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_lectures(
        &corpus.lectures,
        &dir.join("lectures.csv"),
        &dir.join("transcripts"),
    )?;
    write_events(&corpus.events, &dir.join("events.csv"))?;
    let mut latents = String::from("lecture_id,latent_mnet\n");
    for (l, t) in corpus.lectures.iter().zip(&corpus.latent_targets) {
        latents.push_str(&format!("{},{}\n", l.id, t));
    }
    std::fs::write(dir.join("latents.csv"), latents).map_err(|e| CorpusError::Io {
        path: dir.join("latents.csv").display().to_string(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_min_viewers, load_events, load_lectures, FileFormat};
    use crate::labels::{build_label_table, Encoding, LabelParams};

    #[test]
    fn noise_free_mnet_equals_latent_target() {
        let corpus = generate(&GeneratorSpec::new(20, 7, LatentFn::Linear, 3));
        let table = build_label_table(
            &corpus.lectures,
            &corpus.events,
            Encoding::RawLmnet,
            LabelParams::default(),
        )
        .unwrap();
        for (lecture, &latent) in corpus.lectures.iter().zip(&corpus.latent_targets) {
            let entry = table
                .entries
                .iter()
                .find(|e| e.lecture_id == lecture.id)
                .unwrap();
            assert!(
                (entry.mnet.unwrap() - latent).abs() < 1e-9,
                "{} vs {latent}",
                entry.mnet.unwrap()
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GeneratorSpec {
            noise_sd: 0.1,
            ..GeneratorSpec::new(10, 4, LatentFn::Product, 11)
        };
        let a = generate(&spec);
        let b = generate(&spec);
        assert_eq!(a.lectures, b.lectures);
        assert_eq!(a.events, b.events);
        assert_eq!(a.latent_targets, b.latent_targets);
    }

    #[test]
    fn every_lecture_passes_the_min_viewer_filter() {
        let corpus = generate(&GeneratorSpec::new(12, 5, LatentFn::Linear, 5));
        let n = corpus.lectures.len();
        let (kept, _) = filter_min_viewers(corpus.lectures, corpus.events, 5).unwrap();
        assert_eq!(kept.len(), n);
    }

    #[test]
    fn generated_files_round_trip_through_the_corpus_loader() {
        let corpus = generate(&GeneratorSpec::new(6, 3, LatentFn::Step, 9));
        let dir = tempfile::TempDir::new().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        let lectures = load_lectures(
            &dir.path().join("lectures.csv"),
            FileFormat::Csv,
            &dir.path().join("transcripts"),
            &SubjectMap::builtin(),
        )
        .unwrap();
        let events = load_events(&dir.path().join("events.csv")).unwrap();
        assert_eq!(lectures.len(), corpus.lectures.len());
        assert!(events.rejected.is_empty());
        assert_eq!(events.events.len(), corpus.events.len());
        // Transcripts and metadata survive unchanged; timestamps are written
        // at whole-second precision, which the generator already uses.
        assert_eq!(lectures, corpus.lectures);
        assert_eq!(events.events, corpus.events);
    }

    #[test]
    fn latent_targets_stay_in_unit_interval() {
        for latent in [LatentFn::Linear, LatentFn::Step, LatentFn::Product] {
            let corpus = generate(&GeneratorSpec::new(40, 3, latent, 1));
            for &t in &corpus.latent_targets {
                assert!(t > 0.0 && t < 1.0, "{t}");
            }
        }
    }
}
