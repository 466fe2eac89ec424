//! Cross-modal text features and video-specific features for a lecture.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Lecture, LectureType, LECTURE_TYPES};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("undefined feature: {0}")]
    Undefined(String),
    #[error("published date {0} precedes 1970-01-01")]
    DateBeforeEpoch(String),
    #[error("{path}: {message}")]
    Lexicon { path: String, message: String },
}

/// Closed-class word lists and suffixes backing the lexical rate features.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub stopwords: BTreeSet<String>,
    pub prepositions: BTreeSet<String>,
    pub auxiliaries: BTreeSet<String>,
    pub tobe_forms: BTreeSet<String>,
    pub conjunctions: BTreeSet<String>,
    pub pronouns: BTreeSet<String>,
    pub normalization_suffixes: Vec<String>,
}

fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.to_lowercase())
        .collect()
}

impl Lexicons {
    /// Word lists shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            stopwords: parse_word_list(include_str!("../data/lexicons/stopwords.txt")),
            prepositions: parse_word_list(include_str!("../data/lexicons/prepositions.txt")),
            auxiliaries: parse_word_list(include_str!("../data/lexicons/auxiliaries.txt")),
            tobe_forms: parse_word_list(include_str!("../data/lexicons/tobe.txt")),
            conjunctions: parse_word_list(include_str!("../data/lexicons/conjunctions.txt")),
            pronouns: parse_word_list(include_str!("../data/lexicons/pronouns.txt")),
            normalization_suffixes: include_str!("../data/lexicons/suffixes.txt")
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| l.to_lowercase())
                .collect(),
        }
    }

    /// Load lists from a directory holding `stopwords.txt`, `prepositions.txt`,
    /// `auxiliaries.txt`, `tobe.txt`, `conjunctions.txt`, `pronouns.txt`, and
    /// `suffixes.txt`, one lowercase entry per line.
    pub fn from_dir(dir: &Path) -> Result<Self, FeatureError> {
        let read = |name: &str| -> Result<String, FeatureError> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| FeatureError::Lexicon {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        let lex = Self {
            stopwords: parse_word_list(&read("stopwords.txt")?),
            prepositions: parse_word_list(&read("prepositions.txt")?),
            auxiliaries: parse_word_list(&read("auxiliaries.txt")?),
            tobe_forms: parse_word_list(&read("tobe.txt")?),
            conjunctions: parse_word_list(&read("conjunctions.txt")?),
            pronouns: parse_word_list(&read("pronouns.txt")?),
            normalization_suffixes: read("suffixes.txt")?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| l.to_lowercase())
                .collect(),
        };
        for (name, set) in [
            ("stopwords", &lex.stopwords),
            ("prepositions", &lex.prepositions),
            ("auxiliaries", &lex.auxiliaries),
            ("tobe", &lex.tobe_forms),
            ("conjunctions", &lex.conjunctions),
            ("pronouns", &lex.pronouns),
        ] {
            if set.is_empty() {
                return Err(FeatureError::Lexicon {
                    path: dir.display().to_string(),
                    message: format!("{name} list is empty"),
                });
            }
        }
        if lex.normalization_suffixes.is_empty() {
            return Err(FeatureError::Lexicon {
                path: dir.display().to_string(),
                message: "suffix list is empty".to_string(),
            });
        }
        Ok(lex)
    }
}

/// Lowercase word tokens: maximal runs of letters, digits, and apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Sentences are delimited by a run of `.`, `!`, or `?` followed by
/// whitespace or end of text; any text counts as at least one sentence.
pub fn sentence_count(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0usize;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            while i < chars.len() && matches!(chars[i], '.' | '!' | '?') {
                i += 1;
            }
            if i >= chars.len() || chars[i].is_whitespace() {
                count += 1;
            }
        } else {
            i += 1;
        }
    }
    count.max(1)
}

const VOWELS: [char; 6] = ['a', 'e', 'i', 'o', 'u', 'y'];

/// Vowel-group syllable heuristic: count maximal vowel runs, drop one for a
/// silent trailing `e`, minimum one per word.
pub fn syllable_count(word: &str) -> usize {
    let lower = word.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &chars {
        if VOWELS.contains(&c) {
            if !in_group {
                groups += 1;
                in_group = true;
            }
        } else {
            in_group = false;
        }
    }
    if groups > 1 && chars.last() == Some(&'e') {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch Reading Ease of a text.
pub fn fk_easiness(text: &str) -> Result<f64, FeatureError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(FeatureError::Undefined(
            "fk_easiness needs at least one word".to_string(),
        ));
    }
    let words = tokens.len() as f64;
    let sentences = sentence_count(text) as f64;
    let syllables: usize = tokens.iter().map(|t| syllable_count(t)).sum();
    Ok(206.835 - 1.015 * (words / sentences) - 84.6 * (syllables as f64 / words))
}

/// (presence rate, coverage rate) of a stop-word list over the tokens.
pub fn stopword_rates(
    tokens: &[String],
    stopwords: &BTreeSet<String>,
) -> Result<(f64, f64), FeatureError> {
    if tokens.is_empty() {
        return Err(FeatureError::Undefined(
            "stopword rates need at least one token".to_string(),
        ));
    }
    let mut hits = 0usize;
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for t in tokens {
        if stopwords.contains(t) {
            hits += 1;
            seen.insert(t.as_str());
        }
    }
    let presence = hits as f64 / tokens.len() as f64;
    let coverage = seen.len() as f64 / stopwords.len() as f64;
    Ok((presence, coverage))
}

/// Shannon entropy (bits) of the token distribution.
pub fn document_entropy(tokens: &[String]) -> Result<f64, FeatureError> {
    if tokens.is_empty() {
        return Err(FeatureError::Undefined(
            "document entropy needs at least one token".to_string(),
        ));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let n = tokens.len() as f64;
    let mut h = 0.0;
    for &c in counts.values() {
        let p = c as f64 / n;
        h -= p * p.log2();
    }
    Ok(h.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexicalRates {
    pub preposition_rate: f64,
    pub auxiliary_rate: f64,
    pub tobe_rate: f64,
    pub conjunction_rate: f64,
    pub normalization_rate: f64,
    pub pronoun_rate: f64,
}

/// Minimum stem length (in characters) for a suffix match to count towards
/// the normalization rate.
const MIN_STEM_CHARS: usize = 3;

fn has_normalization_suffix(token: &str, suffixes: &[String]) -> bool {
    let token_chars = token.chars().count();
    suffixes.iter().any(|suf| {
        token.ends_with(suf.as_str()) && token_chars >= suf.chars().count() + MIN_STEM_CHARS
    })
}

/// Closed-class rates of Table-style lexical features over the tokens.
pub fn lexical_rates(tokens: &[String], lexicons: &Lexicons) -> Result<LexicalRates, FeatureError> {
    if tokens.is_empty() {
        return Err(FeatureError::Undefined(
            "lexical rates need at least one token".to_string(),
        ));
    }
    let n = tokens.len() as f64;
    let count = |set: &BTreeSet<String>| tokens.iter().filter(|t| set.contains(*t)).count() as f64;
    let normalization = tokens
        .iter()
        .filter(|t| has_normalization_suffix(t, &lexicons.normalization_suffixes))
        .count() as f64;
    Ok(LexicalRates {
        preposition_rate: count(&lexicons.prepositions) / n,
        auxiliary_rate: count(&lexicons.auxiliaries) / n,
        tobe_rate: count(&lexicons.tobe_forms) / n,
        conjunction_rate: count(&lexicons.conjunctions) / n,
        normalization_rate: normalization / n,
        pronoun_rate: count(&lexicons.pronouns) / n,
    })
}

/// Whole days since 1970-01-01.
pub fn published_days(date: chrono::NaiveDate) -> Result<i64, FeatureError> {
    let epoch = chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
    let days = date.signed_duration_since(epoch).num_days();
    if days < 0 {
        return Err(FeatureError::DateBeforeEpoch(date.to_string()));
    }
    Ok(days)
}

/// Fraction of the lecture duration tagged as silence, clamped to [0, 1].
pub fn silence_period_rate(lecture: &Lecture) -> f64 {
    (lecture.transcript.silence_seconds() / lecture.duration_s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoFeatures {
    pub duration_s: f64,
    pub is_chunked: u8,
    pub lecture_type: LectureType,
    pub speaker_speed_wpm: f64,
    pub silence_period_rate: f64,
}

pub fn video_features(lecture: &Lecture, word_count: usize) -> VideoFeatures {
    VideoFeatures {
        duration_s: lecture.duration_s,
        is_chunked: u8::from(lecture.num_parts > 1),
        lecture_type: lecture.lecture_type,
        speaker_speed_wpm: word_count as f64 / (lecture.duration_s / 60.0),
        silence_period_rate: silence_period_rate(lecture),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    ContentOnly,
    ContentPlusVideo,
}

impl FeatureMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureMode::ContentOnly => "content_only",
            FeatureMode::ContentPlusVideo => "content_plus_video",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "content_only" | "content" => Ok(FeatureMode::ContentOnly),
            "content_plus_video" | "content+video" => Ok(FeatureMode::ContentPlusVideo),
            other => Err(format!("unknown feature mode `{other}`")),
        }
    }
}

/// All extracted features for one lecture. `video` is populated only in
/// content-plus-video mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub fk_easiness: f64,
    pub stopword_presence_rate: f64,
    pub stopword_coverage_rate: f64,
    pub document_entropy: f64,
    pub word_count: usize,
    pub title_word_count: usize,
    pub preposition_rate: f64,
    pub auxiliary_rate: f64,
    pub tobe_rate: f64,
    pub conjunction_rate: f64,
    pub normalization_rate: f64,
    pub pronoun_rate: f64,
    pub published_days: i64,
    pub video: Option<VideoFeatures>,
}

pub const CONTENT_FEATURE_NAMES: [&str; 13] = [
    "fk_easiness",
    "stopword_presence_rate",
    "stopword_coverage_rate",
    "document_entropy",
    "word_count",
    "title_word_count",
    "preposition_rate",
    "auxiliary_rate",
    "tobe_rate",
    "conjunction_rate",
    "normalization_rate",
    "pronoun_rate",
    "published_days",
];

/// Column names for the design matrix in the given mode, one-hot expanded.
pub fn feature_names(mode: FeatureMode) -> Vec<String> {
    let mut names: Vec<String> = CONTENT_FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    if mode == FeatureMode::ContentPlusVideo {
        names.push("duration_s".to_string());
        names.push("is_chunked".to_string());
        for t in LECTURE_TYPES {
            names.push(format!("lecture_type_{}", t.slug()));
        }
        names.push("speaker_speed_wpm".to_string());
        names.push("silence_period_rate".to_string());
    }
    names
}

impl FeatureVector {
    /// Numeric row in the fixed column order of [`feature_names`].
    pub fn to_row(&self, mode: FeatureMode) -> Vec<f64> {
        let mut row = vec![
            self.fk_easiness,
            self.stopword_presence_rate,
            self.stopword_coverage_rate,
            self.document_entropy,
            self.word_count as f64,
            self.title_word_count as f64,
            self.preposition_rate,
            self.auxiliary_rate,
            self.tobe_rate,
            self.conjunction_rate,
            self.normalization_rate,
            self.pronoun_rate,
            self.published_days as f64,
        ];
        if mode == FeatureMode::ContentPlusVideo {
            let video = self
                .video
                .expect("video features requested but not extracted");
            row.push(video.duration_s);
            row.push(video.is_chunked as f64);
            let mut onehot = [0.0; LECTURE_TYPES.len()];
            onehot[video.lecture_type.onehot_index()] = 1.0;
            row.extend_from_slice(&onehot);
            row.push(video.speaker_speed_wpm);
            row.push(video.silence_period_rate);
        }
        row
    }
}

/// The 13 content features from a transcript text, title, and publication
/// offset, independent of any video metadata.
pub fn content_features_from_text(
    transcript_text: &str,
    title: &str,
    published_days: i64,
    lexicons: &Lexicons,
) -> Result<FeatureVector, FeatureError> {
    let tokens = tokenize(transcript_text);
    if tokens.is_empty() {
        return Err(FeatureError::Undefined(
            "transcript has no speech tokens".to_string(),
        ));
    }
    let (presence, coverage) = stopword_rates(&tokens, &lexicons.stopwords)?;
    let rates = lexical_rates(&tokens, lexicons)?;
    Ok(FeatureVector {
        fk_easiness: fk_easiness(transcript_text)?,
        stopword_presence_rate: presence,
        stopword_coverage_rate: coverage,
        document_entropy: document_entropy(&tokens)?,
        word_count: tokens.len(),
        title_word_count: tokenize(title).len(),
        preposition_rate: rates.preposition_rate,
        auxiliary_rate: rates.auxiliary_rate,
        tobe_rate: rates.tobe_rate,
        conjunction_rate: rates.conjunction_rate,
        normalization_rate: rates.normalization_rate,
        pronoun_rate: rates.pronoun_rate,
        published_days,
        video: None,
    })
}

/// Extract the full feature vector for a lecture.
pub fn extract_all(
    lecture: &Lecture,
    lexicons: &Lexicons,
    mode: FeatureMode,
) -> Result<FeatureVector, FeatureError> {
    let text = lecture.transcript.speech_text();
    let mut fv = content_features_from_text(
        &text,
        &lecture.title,
        published_days(lecture.published_date)?,
        lexicons,
    )
    .map_err(|e| match e {
        FeatureError::Undefined(_) => FeatureError::Undefined(format!(
            "lecture `{}` has no speech tokens",
            lecture.id
        )),
        other => other,
    })?;
    if mode == FeatureMode::ContentPlusVideo {
        fv.video = Some(video_features(lecture, fv.word_count));
    }
    Ok(fv)
}

/// Extract features for every lecture, in order. Parallel over lectures.
pub fn extract_corpus(
    lectures: &[Lecture],
    lexicons: &Lexicons,
    mode: FeatureMode,
) -> Result<Vec<FeatureVector>, FeatureError> {
    use rayon::prelude::*;
    lectures
        .par_iter()
        .map(|l| extract_all(l, lexicons, mode))
        .collect()
}

/// Design matrix rows in the fixed column order.
pub fn design_matrix(features: &[FeatureVector], mode: FeatureMode) -> Vec<Vec<f64>> {
    features.iter().map(|f| f.to_row(mode)).collect()
}

/// Write features.csv: lecture id followed by the fixed-order feature columns.
pub fn write_features_csv(
    path: &Path,
    ids: &[String],
    features: &[FeatureVector],
    mode: FeatureMode,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str("lecture_id");
    for name in feature_names(mode) {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for (id, f) in ids.iter().zip(features) {
        out.push_str(id);
        for v in f.to_row(mode) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{KnowledgeArea, Segment, SegmentKind, Transcript};
    use chrono::NaiveDate;

    fn lecture_with(
        transcript: Transcript,
        title: &str,
        duration_s: f64,
        num_parts: u32,
        lecture_type: LectureType,
    ) -> Lecture {
        Lecture {
            id: "t".to_string(),
            title: title.to_string(),
            subject: "Physics".to_string(),
            knowledge_area: KnowledgeArea::Stem,
            lecture_type,
            published_date: NaiveDate::from_ymd_opt(2016, 12, 8).unwrap(),
            duration_s,
            num_parts,
            transcript,
            mean_star_rating: None,
            view_count: None,
        }
    }

    fn speech(start: f64, end: f64, text: &str) -> Segment {
        Segment {
            start_s: start,
            end_s: end,
            kind: SegmentKind::Speech,
            text: text.to_string(),
        }
    }

    fn silence(start: f64, end: f64) -> Segment {
        Segment {
            start_s: start,
            end_s: end,
            kind: SegmentKind::Silence,
            text: String::new(),
        }
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_strips_punctuation_and_lowercases() {
        assert_eq!(tokenize("Hello, world!"), toks(&["hello", "world"]));
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("don't stop"), toks(&["don't", "stop"]));
    }

    #[test]
    fn fk_easiness_matches_hand_computation() {
        // 3 words, 1 sentence, 3 syllables.
        let v = fk_easiness("The cat sat.").unwrap();
        assert!((v - 119.19).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn fk_easiness_empty_text_errors() {
        assert!(fk_easiness("").is_err());
        assert!(fk_easiness("?!.").is_err());
    }

    #[test]
    fn fk_easiness_invariant_under_doubling() {
        let text = "The cat sat. A dog ran fast!";
        let doubled = format!("{text} {text}");
        let a = fk_easiness(text).unwrap();
        let b = fk_easiness(&doubled).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn sentence_count_handles_terminator_runs() {
        assert_eq!(sentence_count("Hi!! There."), 2);
        assert_eq!(sentence_count("no terminator"), 1);
        assert_eq!(sentence_count("One. Two? Three!"), 3);
    }

    #[test]
    fn stopword_rates_basic() {
        let stop: BTreeSet<String> = ["the", "a"].iter().map(|s| s.to_string()).collect();
        let (p, c) = stopword_rates(&toks(&["the", "cat", "the", "mat"]), &stop).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(c, 0.5);
        let (p, c) = stopword_rates(&toks(&["cat", "mat"]), &stop).unwrap();
        assert_eq!((p, c), (0.0, 0.0));
        let (p, c) = stopword_rates(&toks(&["the", "a", "a"]), &stop).unwrap();
        assert_eq!((p, c), (1.0, 1.0));
    }

    #[test]
    fn document_entropy_known_values() {
        assert_eq!(document_entropy(&toks(&["a", "a", "a"])).unwrap(), 0.0);
        let h = document_entropy(&toks(&["a", "b", "c", "d"])).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
        // -(2/3 log2 2/3 + 1/3 log2 1/3)
        let h = document_entropy(&toks(&["a", "a", "b"])).unwrap();
        assert!((h - 0.9183).abs() < 1e-4, "got {h}");
    }

    #[test]
    fn lexical_rates_counts_each_class() {
        let lex = Lexicons::builtin();
        let rates = lexical_rates(&toks(&["we", "are", "in", "education"]), &lex).unwrap();
        assert_eq!(rates.pronoun_rate, 0.25);
        assert_eq!(rates.tobe_rate, 0.25);
        assert_eq!(rates.preposition_rate, 0.25);
        assert_eq!(rates.normalization_rate, 0.25);
    }

    #[test]
    fn lexical_rates_no_matches() {
        let lex = Lexicons::builtin();
        let rates = lexical_rates(&toks(&["cat", "sat"]), &lex).unwrap();
        assert_eq!(rates.preposition_rate, 0.0);
        assert_eq!(rates.auxiliary_rate, 0.0);
        assert_eq!(rates.normalization_rate, 0.0);
    }

    #[test]
    fn normalization_needs_minimum_stem() {
        let lex = Lexicons::builtin();
        // "tion" alone and "nation" (stem "na") do not count; "education" does.
        let rates = lexical_rates(&toks(&["tion", "nation", "education"]), &lex).unwrap();
        assert!((rates.normalization_rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn published_days_known_values() {
        let d = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).unwrap();
        assert_eq!(published_days(d(1970, 1, 1)).unwrap(), 0);
        assert_eq!(published_days(d(1970, 1, 2)).unwrap(), 1);
        assert_eq!(published_days(d(2016, 12, 8)).unwrap(), 17143);
        assert!(published_days(d(1969, 12, 31)).is_err());
    }

    /// Independent calendar oracle: days from civil date (Hinnant's algorithm).
    fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
        let y = if m <= 2 { y - 1 } else { y };
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146097 + doe - 719468
    }

    #[test]
    fn published_days_agrees_with_civil_oracle() {
        for (y, m, d) in [(1970, 1, 1), (1999, 6, 15), (2016, 12, 8), (2018, 2, 17)] {
            let date = NaiveDate::from_ymd_opt(y as i32, m, d).unwrap();
            assert_eq!(
                published_days(date).unwrap(),
                days_from_civil(y, m as i64, d as i64)
            );
        }
    }

    #[test]
    fn silence_period_rate_sums_silence() {
        let t = Transcript {
            segments: vec![
                speech(0.0, 30.0, "words here."),
                silence(30.0, 40.0),
                speech(40.0, 75.0, "more words."),
                silence(75.0, 90.0),
            ],
        };
        let lec = lecture_with(t, "Title", 100.0, 1, LectureType::Lecture);
        assert!((silence_period_rate(&lec) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn silence_period_rate_edge_cases() {
        let no_silence = lecture_with(
            Transcript {
                segments: vec![speech(0.0, 100.0, "talk.")],
            },
            "T",
            100.0,
            1,
            LectureType::Lecture,
        );
        assert_eq!(silence_period_rate(&no_silence), 0.0);
        let all_silence = lecture_with(
            Transcript {
                segments: vec![silence(0.0, 100.0)],
            },
            "T",
            100.0,
            1,
            LectureType::Lecture,
        );
        assert_eq!(silence_period_rate(&all_silence), 1.0);
    }

    #[test]
    fn video_features_speed_and_chunking() {
        let lec = lecture_with(
            Transcript {
                segments: vec![speech(0.0, 600.0, "x")],
            },
            "T",
            600.0,
            1,
            LectureType::Tutorial,
        );
        let v = video_features(&lec, 1200);
        assert!((v.speaker_speed_wpm - 120.0).abs() < 1e-12);
        assert_eq!(v.is_chunked, 0);
        let mut lec3 = lec.clone();
        lec3.num_parts = 3;
        assert_eq!(video_features(&lec3, 1200).is_chunked, 1);
    }

    #[test]
    fn onehot_marks_exactly_one_type() {
        let lec = lecture_with(
            Transcript {
                segments: vec![speech(0.0, 50.0, "some speech here.")],
            },
            "A Title",
            100.0,
            1,
            LectureType::Tutorial,
        );
        let fv = extract_all(&lec, &Lexicons::builtin(), FeatureMode::ContentPlusVideo).unwrap();
        let row = fv.to_row(FeatureMode::ContentPlusVideo);
        let names = feature_names(FeatureMode::ContentPlusVideo);
        let onehot: Vec<f64> = names
            .iter()
            .zip(&row)
            .filter(|(n, _)| n.starts_with("lecture_type_"))
            .map(|(_, v)| *v)
            .collect();
        assert_eq!(onehot.iter().sum::<f64>(), 1.0);
        let idx = names
            .iter()
            .position(|n| n == "lecture_type_tutorial")
            .unwrap();
        assert_eq!(row[idx], 1.0);
    }

    #[test]
    fn extract_all_composes_the_per_feature_oracles() {
        // Crafted 4-token lecture; every component checked by hand below.
        let t = Transcript {
            segments: vec![speech(0.0, 60.0, "We are in education."), silence(60.0, 90.0)],
        };
        let lec = lecture_with(t, "Education Lecture", 120.0, 2, LectureType::Workshop);
        let lex = Lexicons::builtin();
        let fv = extract_all(&lec, &lex, FeatureMode::ContentPlusVideo).unwrap();

        assert_eq!(fv.word_count, 4);
        assert_eq!(fv.title_word_count, 2);
        // "we"(1) "are"(1) "in"(1) "education"(e-du-ca-tion -> 4, trailing-e rule off) = 7? by our
        // heuristic: we=1, are=2-1(trailing e)=1, in=1, education: e|u|a|io -> 4 groups = 4; total 7.
        let expected_fk = 206.835 - 1.015 * 4.0 - 84.6 * (7.0 / 4.0);
        assert!((fv.fk_easiness - expected_fk).abs() < 1e-9, "{}", fv.fk_easiness);
        // "we","are","in" are stopwords: presence 3/4; coverage 3/|stopwords|.
        assert!((fv.stopword_presence_rate - 0.75).abs() < 1e-12);
        let expected_cov = 3.0 / lex.stopwords.len() as f64;
        assert!((fv.stopword_coverage_rate - expected_cov).abs() < 1e-12);
        // 4 distinct tokens -> entropy 2 bits.
        assert!((fv.document_entropy - 2.0).abs() < 1e-12);
        assert_eq!(fv.published_days, 17143);
        assert!((fv.pronoun_rate - 0.25).abs() < 1e-12);
        assert!((fv.tobe_rate - 0.25).abs() < 1e-12);
        assert!((fv.preposition_rate - 0.25).abs() < 1e-12);
        assert!((fv.normalization_rate - 0.25).abs() < 1e-12);
        // "are" is also an auxiliary; "in" is not a conjunction.
        assert!((fv.auxiliary_rate - 0.25).abs() < 1e-12);
        assert_eq!(fv.conjunction_rate, 0.0);

        let v = fv.video.unwrap();
        assert_eq!(v.is_chunked, 1);
        assert!((v.silence_period_rate - 0.25).abs() < 1e-12);
        assert!((v.speaker_speed_wpm - 4.0 / 2.0).abs() < 1e-12);
        assert_eq!(v.lecture_type, LectureType::Workshop);
    }

    #[test]
    fn content_only_matrix_has_13_columns() {
        assert_eq!(feature_names(FeatureMode::ContentOnly).len(), 13);
        assert_eq!(feature_names(FeatureMode::ContentPlusVideo).len(), 23);
    }

    #[test]
    fn identical_transcripts_give_identical_features() {
        let t = Transcript {
            segments: vec![speech(0.0, 50.0, "Repeatable content, for sure.")],
        };
        let a = lecture_with(t.clone(), "Same", 100.0, 1, LectureType::Lecture);
        let b = lecture_with(t, "Same", 100.0, 1, LectureType::Lecture);
        let lex = Lexicons::builtin();
        let fa = extract_all(&a, &lex, FeatureMode::ContentOnly).unwrap();
        let fb = extract_all(&b, &lex, FeatureMode::ContentOnly).unwrap();
        assert_eq!(fa, fb);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn token_strategy() -> impl Strategy<Value = Vec<String>> {
            prop::collection::vec("[a-z]{1,8}", 1..60)
        }

        proptest! {
            #[test]
            fn rates_stay_in_unit_interval(tokens in token_strategy()) {
                let lex = Lexicons::builtin();
                let (p, c) = stopword_rates(&tokens, &lex.stopwords).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!((0.0..=1.0).contains(&c));
                let r = lexical_rates(&tokens, &lex).unwrap();
                for v in [
                    r.preposition_rate,
                    r.auxiliary_rate,
                    r.tobe_rate,
                    r.conjunction_rate,
                    r.normalization_rate,
                    r.pronoun_rate,
                ] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }

            #[test]
            fn entropy_bounded_by_log_distinct(tokens in token_strategy()) {
                let h = document_entropy(&tokens).unwrap();
                let distinct: BTreeSet<&String> = tokens.iter().collect();
                prop_assert!(h >= 0.0);
                prop_assert!(h <= (distinct.len() as f64).log2() + 1e-9);
            }

            #[test]
            fn bag_of_words_features_ignore_token_order(
                tokens in token_strategy(),
                seed in 0u64..1000,
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let lex = Lexicons::builtin();
                let mut shuffled = tokens.clone();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                shuffled.shuffle(&mut rng);

                let a = (
                    stopword_rates(&tokens, &lex.stopwords).unwrap(),
                    document_entropy(&tokens).unwrap(),
                    lexical_rates(&tokens, &lex).unwrap(),
                );
                let b = (
                    stopword_rates(&shuffled, &lex.stopwords).unwrap(),
                    document_entropy(&shuffled).unwrap(),
                    lexical_rates(&shuffled, &lex).unwrap(),
                );
                prop_assert_eq!(a.0, b.0);
                prop_assert!((a.1 - b.1).abs() < 1e-12);
                prop_assert_eq!(a.2, b.2);
            }
        }
    }
}
