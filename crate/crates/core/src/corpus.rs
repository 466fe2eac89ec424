//! Lecture corpus: metadata, timed transcripts, view-event logs, and the
//! dataset inclusion rules.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type LectureId = String;
pub type UserId = String;

/// Tolerance for float comparisons on segment boundaries.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path} line {line}: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },
    #[error("duplicate lecture id `{0}`")]
    DuplicateId(LectureId),
    #[error("lecture `{id}`: {message}")]
    InvalidLecture { id: LectureId, message: String },
    #[error("unknown subject `{subject}` for lecture `{id}`")]
    UnknownSubject { id: LectureId, subject: String },
    #[error("transcript of `{id}`: {message}")]
    InvalidTranscript { id: LectureId, message: String },
    #[error("min-viewers threshold must be >= 1")]
    BadMinViewers,
}

/// STEM vs Miscellaneous partition of the subject taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KnowledgeArea {
    Stem,
    Miscellaneous,
}

impl fmt::Display for KnowledgeArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnowledgeArea::Stem => write!(f, "STEM"),
            KnowledgeArea::Miscellaneous => write!(f, "Miscellaneous"),
        }
    }
}

impl FromStr for KnowledgeArea {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stem" => Ok(KnowledgeArea::Stem),
            "miscellaneous" | "misc" => Ok(KnowledgeArea::Miscellaneous),
            other => Err(format!("unknown knowledge area `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LectureType {
    Tutorial,
    Workshop,
    InvitedTalk,
    Keynote,
    Lecture,
    Other,
}

/// One-hot expansion order for the lecture-type indicator block.
pub const LECTURE_TYPES: [LectureType; 6] = [
    LectureType::Tutorial,
    LectureType::Workshop,
    LectureType::InvitedTalk,
    LectureType::Keynote,
    LectureType::Lecture,
    LectureType::Other,
];

impl LectureType {
    pub fn as_str(&self) -> &'static str {
        match self {
            LectureType::Tutorial => "tutorial",
            LectureType::Workshop => "workshop",
            LectureType::InvitedTalk => "invited talk",
            LectureType::Keynote => "keynote",
            LectureType::Lecture => "lecture",
            LectureType::Other => "other",
        }
    }

    /// Identifier-safe name, used for one-hot column headers.
    pub fn slug(&self) -> &'static str {
        match self {
            LectureType::Tutorial => "tutorial",
            LectureType::Workshop => "workshop",
            LectureType::InvitedTalk => "invited_talk",
            LectureType::Keynote => "keynote",
            LectureType::Lecture => "lecture",
            LectureType::Other => "other",
        }
    }

    pub fn onehot_index(&self) -> usize {
        LECTURE_TYPES.iter().position(|t| t == self).unwrap()
    }
}

impl fmt::Display for LectureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for LectureType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tutorial" => Ok(LectureType::Tutorial),
            "workshop" => Ok(LectureType::Workshop),
            "invited talk" | "invited_talk" => Ok(LectureType::InvitedTalk),
            "keynote" => Ok(LectureType::Keynote),
            "lecture" => Ok(LectureType::Lecture),
            "other" => Ok(LectureType::Other),
            other => Err(format!("unknown lecture type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Speech,
    Silence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: SegmentKind,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub segments: Vec<Segment>,
}

impl Transcript {
    /// Concatenated text of all speech segments, in order.
    pub fn speech_text(&self) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            if seg.kind == SegmentKind::Speech && !seg.text.is_empty() {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&seg.text);
            }
        }
        out
    }

    /// Total seconds tagged as silence.
    pub fn silence_seconds(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Silence)
            .map(|s| s.end_s - s.start_s)
            .sum()
    }

    fn validate(&self, id: &str, duration_s: f64) -> Result<(), CorpusError> {
        let mut prev_end = 0.0_f64;
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.start_s >= -TIME_EPS && seg.start_s < seg.end_s) {
                return Err(CorpusError::InvalidTranscript {
                    id: id.to_string(),
                    message: format!(
                        "segment {i} has invalid interval [{}, {})",
                        seg.start_s, seg.end_s
                    ),
                });
            }
            if seg.end_s > duration_s + TIME_EPS {
                return Err(CorpusError::InvalidTranscript {
                    id: id.to_string(),
                    message: format!(
                        "segment {i} ends at {} past lecture duration {duration_s}",
                        seg.end_s
                    ),
                });
            }
            if seg.start_s < prev_end - TIME_EPS {
                return Err(CorpusError::InvalidTranscript {
                    id: id.to_string(),
                    message: format!("segment {i} overlaps the previous segment"),
                });
            }
            if seg.kind == SegmentKind::Silence && !seg.text.trim().is_empty() {
                return Err(CorpusError::InvalidTranscript {
                    id: id.to_string(),
                    message: format!("silence segment {i} carries text"),
                });
            }
            prev_end = seg.end_s;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lecture {
    pub id: LectureId,
    pub title: String,
    pub subject: String,
    pub knowledge_area: KnowledgeArea,
    pub lecture_type: LectureType,
    pub published_date: NaiveDate,
    pub duration_s: f64,
    pub num_parts: u32,
    pub transcript: Transcript,
    pub mean_star_rating: Option<f64>,
    pub view_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewEvent {
    pub user_id: UserId,
    pub lecture_id: LectureId,
    pub timestamp: DateTime<Utc>,
    pub watch_time_s: f64,
}

/// Subject -> knowledge-area mapping, loaded from a data file so the taxonomy
/// can be edited without touching code.
#[derive(Debug, Clone)]
pub struct SubjectMap {
    map: BTreeMap<String, KnowledgeArea>,
}

impl SubjectMap {
    /// The mapping shipped with the crate (21 subjects).
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/subjects.csv"), "<builtin subjects>")
            .expect("builtin subject map is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    fn parse(text: &str, path: &str) -> Result<Self, CorpusError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("subject,")) {
                continue;
            }
            let (subject, area) =
                line.rsplit_once(',')
                    .ok_or_else(|| CorpusError::MalformedRow {
                        path: path.to_string(),
                        line: (i + 1) as u64,
                        message: "expected `subject,knowledge_area`".to_string(),
                    })?;
            let area: KnowledgeArea =
                area.parse().map_err(|message| CorpusError::MalformedRow {
                    path: path.to_string(),
                    line: (i + 1) as u64,
                    message,
                })?;
            map.insert(subject.trim().to_string(), area);
        }
        Ok(Self { map })
    }

    pub fn area_of(&self, subject: &str) -> Option<KnowledgeArea> {
        self.map.get(subject).copied()
    }

    pub fn subjects(&self) -> impl Iterator<Item = (&str, KnowledgeArea)> {
        self.map.iter().map(|(s, a)| (s.as_str(), *a))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Json,
}

/// Flat record mirroring one lectures.csv row; the transcript travels in its
/// own file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LectureRow {
    id: String,
    title: String,
    subject: String,
    lecture_type: String,
    published_date: String,
    duration_s: f64,
    num_parts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_star_rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    view_count: Option<u64>,
}

fn lecture_from_row(
    row: LectureRow,
    line: u64,
    path: &str,
    transcripts_dir: &Path,
    subjects: &SubjectMap,
) -> Result<Lecture, CorpusError> {
    let malformed = |message: String| CorpusError::MalformedRow {
        path: path.to_string(),
        line,
        message,
    };
    if row.id.trim().is_empty() {
        return Err(malformed("empty lecture id".to_string()));
    }
    let lecture_type: LectureType = row.lecture_type.parse().map_err(malformed)?;
    let published_date = NaiveDate::parse_from_str(row.published_date.trim(), "%Y-%m-%d")
        .map_err(|e| malformed(format!("bad published_date `{}`: {e}", row.published_date)))?;
    if !row.duration_s.is_finite() || row.duration_s <= 0.0 {
        return Err(CorpusError::InvalidLecture {
            id: row.id.clone(),
            message: format!("duration_s must be > 0, got {}", row.duration_s),
        });
    }
    if row.num_parts < 1 {
        return Err(CorpusError::InvalidLecture {
            id: row.id.clone(),
            message: "num_parts must be >= 1".to_string(),
        });
    }
    if let Some(r) = row.mean_star_rating {
        if !(1.0..=5.0).contains(&r) {
            return Err(CorpusError::InvalidLecture {
                id: row.id.clone(),
                message: format!("mean_star_rating {r} outside [1, 5]"),
            });
        }
    }
    let knowledge_area =
        subjects
            .area_of(row.subject.trim())
            .ok_or_else(|| CorpusError::UnknownSubject {
                id: row.id.clone(),
                subject: row.subject.clone(),
            })?;

    let tpath = transcripts_dir.join(format!("{}.json", row.id));
    let ttext = std::fs::read_to_string(&tpath).map_err(|e| CorpusError::Io {
        path: tpath.display().to_string(),
        source: e,
    })?;
    let transcript: Transcript =
        serde_json::from_str(&ttext).map_err(|e| CorpusError::Json {
            path: tpath.display().to_string(),
            source: e,
        })?;
    transcript.validate(&row.id, row.duration_s)?;

    Ok(Lecture {
        id: row.id,
        title: row.title,
        subject: row.subject.trim().to_string(),
        knowledge_area,
        lecture_type,
        published_date,
        duration_s: row.duration_s,
        num_parts: row.num_parts,
        transcript,
        mean_star_rating: row.mean_star_rating,
        view_count: row.view_count,
    })
}

/// Load and validate the lecture set. Transcripts are read from
/// `transcripts_dir/<id>.json`.
pub fn load_lectures(
    path: &Path,
    format: FileFormat,
    transcripts_dir: &Path,
    subjects: &SubjectMap,
) -> Result<Vec<Lecture>, CorpusError> {
    let path_str = path.display().to_string();
    let rows: Vec<(LectureRow, u64)> = match format {
        FileFormat::Csv => {
            let mut reader = csv::Reader::from_path(path).map_err(|e| CorpusError::Csv {
                path: path_str.clone(),
                source: e,
            })?;
            let mut rows = Vec::new();
            for result in reader.deserialize::<LectureRow>() {
                match result {
                    Ok(row) => {
                        // csv positions point at the upcoming record; keep a
                        // simple 1-based data-row counter plus the header line.
                        let line = rows.len() as u64 + 2;
                        rows.push((row, line));
                    }
                    Err(e) => {
                        let line = e.position().map(|p| p.line()).unwrap_or(0);
                        return Err(CorpusError::MalformedRow {
                            path: path_str,
                            line,
                            message: e.to_string(),
                        });
                    }
                }
            }
            rows
        }
        FileFormat::Json => {
            let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
                path: path_str.clone(),
                source: e,
            })?;
            let rows: Vec<LectureRow> =
                serde_json::from_str(&text).map_err(|e| CorpusError::Json {
                    path: path_str.clone(),
                    source: e,
                })?;
            rows.into_iter()
                .enumerate()
                .map(|(i, r)| (r, i as u64 + 1))
                .collect()
        }
    };

    let mut seen: HashSet<LectureId> = HashSet::with_capacity(rows.len());
    let mut lectures = Vec::with_capacity(rows.len());
    for (row, line) in rows {
        if !seen.insert(row.id.clone()) {
            return Err(CorpusError::DuplicateId(row.id));
        }
        lectures.push(lecture_from_row(row, line, &path_str, transcripts_dir, subjects)?);
    }
    Ok(lectures)
}

/// One rejected events.csv row, kept for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct EventLoad {
    pub events: Vec<ViewEvent>,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Deserialize)]
struct EventRow {
    user_id: String,
    lecture_id: String,
    timestamp: String,
    watch_time_s: f64,
}

/// Load view events. Rows with negative watch time are rejected and reported
/// rather than failing the whole load; structurally malformed rows are errors.
pub fn load_events(path: &Path) -> Result<EventLoad, CorpusError> {
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| CorpusError::Csv {
        path: path_str.clone(),
        source: e,
    })?;
    let mut load = EventLoad::default();
    // Data rows start on line 2, after the header.
    for (line, result) in (2u64..).zip(reader.deserialize::<EventRow>()) {
        let row = result.map_err(|e| CorpusError::MalformedRow {
            path: path_str.clone(),
            line: e.position().map(|p| p.line()).unwrap_or(line),
            message: e.to_string(),
        })?;
        if row.watch_time_s < 0.0 {
            load.rejected.push(RejectedRow {
                line,
                reason: format!("negative watch_time_s {}", row.watch_time_s),
            });
            continue;
        }
        let timestamp = DateTime::parse_from_rfc3339(row.timestamp.trim())
            .map_err(|e| CorpusError::MalformedRow {
                path: path_str.clone(),
                line,
                message: format!("bad timestamp `{}`: {e}", row.timestamp),
            })?
            .with_timezone(&Utc);
        load.events.push(ViewEvent {
            user_id: row.user_id,
            lecture_id: row.lecture_id,
            timestamp,
            watch_time_s: row.watch_time_s,
        });
    }
    Ok(load)
}

/// Keep only lectures viewed by at least `k` distinct users, dropping the
/// events of removed lectures.
pub fn filter_min_viewers(
    lectures: Vec<Lecture>,
    events: Vec<ViewEvent>,
    k: usize,
) -> Result<(Vec<Lecture>, Vec<ViewEvent>), CorpusError> {
    if k < 1 {
        return Err(CorpusError::BadMinViewers);
    }
    let mut viewers: HashMap<&str, HashSet<&str>> = HashMap::new();
    for ev in &events {
        viewers
            .entry(ev.lecture_id.as_str())
            .or_default()
            .insert(ev.user_id.as_str());
    }
    let retained: HashSet<LectureId> = lectures
        .iter()
        .filter(|l| viewers.get(l.id.as_str()).map_or(0, |s| s.len()) >= k)
        .map(|l| l.id.clone())
        .collect();
    let lectures = lectures
        .into_iter()
        .filter(|l| retained.contains(&l.id))
        .collect();
    let events = events
        .into_iter()
        .filter(|e| retained.contains(&e.lecture_id))
        .collect();
    Ok((lectures, events))
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write lectures.csv plus one transcript JSON file per lecture.
pub fn write_lectures(
    lectures: &[Lecture],
    lectures_path: &Path,
    transcripts_dir: &Path,
) -> Result<(), CorpusError> {
    std::fs::create_dir_all(transcripts_dir).map_err(|e| CorpusError::Io {
        path: transcripts_dir.display().to_string(),
        source: e,
    })?;
    let mut writer = csv::Writer::from_path(lectures_path).map_err(|e| CorpusError::Csv {
        path: lectures_path.display().to_string(),
        source: e,
    })?;
    writer
        .write_record([
            "id",
            "title",
            "subject",
            "lecture_type",
            "published_date",
            "duration_s",
            "num_parts",
            "mean_star_rating",
            "view_count",
        ])
        .map_err(|e| CorpusError::Csv {
            path: lectures_path.display().to_string(),
            source: e,
        })?;
    for l in lectures {
        writer
            .write_record([
                l.id.clone(),
                l.title.clone(),
                l.subject.clone(),
                l.lecture_type.as_str().to_string(),
                l.published_date.format("%Y-%m-%d").to_string(),
                l.duration_s.to_string(),
                l.num_parts.to_string(),
                fmt_opt_f64(l.mean_star_rating),
                l.view_count.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| CorpusError::Csv {
                path: lectures_path.display().to_string(),
                source: e,
            })?;
        let tpath = transcripts_dir.join(format!("{}.json", l.id));
        let json = serde_json::to_string_pretty(&l.transcript).map_err(|e| CorpusError::Json {
            path: tpath.display().to_string(),
            source: e,
        })?;
        std::fs::write(&tpath, json).map_err(|e| CorpusError::Io {
            path: tpath.display().to_string(),
            source: e,
        })?;
    }
    writer.flush().map_err(|e| CorpusError::Io {
        path: lectures_path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

pub fn write_events(events: &[ViewEvent], path: &Path) -> Result<(), CorpusError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CorpusError::Csv {
        path: path.display().to_string(),
        source: e,
    })?;
    writer
        .write_record(["user_id", "lecture_id", "timestamp", "watch_time_s"])
        .map_err(|e| CorpusError::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
    for ev in events {
        writer
            .write_record([
                ev.user_id.clone(),
                ev.lecture_id.clone(),
                ev.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                ev.watch_time_s.to_string(),
            ])
            .map_err(|e| CorpusError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
    }
    writer.flush().map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    fn write_transcript(dir: &Path, id: &str, json: &str) {
        fs::write(dir.join(format!("{id}.json")), json).unwrap();
    }

    const PLAIN_TRANSCRIPT: &str = r#"{"segments":[
        {"start_s":0.0,"end_s":50.0,"kind":"speech","text":"Welcome to the lecture."},
        {"start_s":50.0,"end_s":60.0,"kind":"silence","text":""}
    ]}"#;

    fn setup_corpus(rows: &[&str]) -> (TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = TempDir::new().unwrap();
        let tdir = dir.path().join("transcripts");
        fs::create_dir(&tdir).unwrap();
        let lectures = dir.path().join("lectures.csv");
        let mut csv = String::from(
            "id,title,subject,lecture_type,published_date,duration_s,num_parts,mean_star_rating,view_count\n",
        );
        for row in rows {
            csv.push_str(row);
            csv.push('\n');
        }
        fs::write(&lectures, csv).unwrap();
        (dir, lectures, tdir)
    }

    #[test]
    fn loads_well_formed_csv() {
        let (_dir, lectures_path, tdir) = setup_corpus(&[
            "a,Alpha,Physics,lecture,2016-12-08,60,1,4.5,100",
            "b,Beta,Arts,tutorial,2010-01-01,120,2,,",
            "c,Gamma,Physics,keynote,2005-06-15,60,1,3.0,",
        ]);
        for id in ["a", "b", "c"] {
            write_transcript(&tdir, id, PLAIN_TRANSCRIPT);
        }
        let lectures =
            load_lectures(&lectures_path, FileFormat::Csv, &tdir, &SubjectMap::builtin()).unwrap();
        assert_eq!(lectures.len(), 3);
        assert_eq!(lectures[0].knowledge_area, KnowledgeArea::Stem);
        assert_eq!(lectures[1].knowledge_area, KnowledgeArea::Miscellaneous);
        assert_eq!(lectures[0].mean_star_rating, Some(4.5));
        assert_eq!(lectures[1].mean_star_rating, None);
    }

    #[test]
    fn duplicate_id_is_an_error() {
        let (_dir, lectures_path, tdir) = setup_corpus(&[
            "a,Alpha,Physics,lecture,2016-12-08,60,1,,",
            "a,Alpha2,Arts,lecture,2016-12-08,60,1,,",
        ]);
        write_transcript(&tdir, "a", PLAIN_TRANSCRIPT);
        let err = load_lectures(&lectures_path, FileFormat::Csv, &tdir, &SubjectMap::builtin())
            .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn zero_duration_is_an_error() {
        let (_dir, lectures_path, tdir) =
            setup_corpus(&["a,Alpha,Physics,lecture,2016-12-08,0,1,,"]);
        write_transcript(&tdir, "a", r#"{"segments":[]}"#);
        let err = load_lectures(&lectures_path, FileFormat::Csv, &tdir, &SubjectMap::builtin())
            .unwrap_err();
        assert!(matches!(err, CorpusError::InvalidLecture { .. }));
    }

    #[test]
    fn unknown_subject_is_an_error() {
        let (_dir, lectures_path, tdir) =
            setup_corpus(&["a,Alpha,Alchemy,lecture,2016-12-08,60,1,,"]);
        write_transcript(&tdir, "a", PLAIN_TRANSCRIPT);
        let err = load_lectures(&lectures_path, FileFormat::Csv, &tdir, &SubjectMap::builtin())
            .unwrap_err();
        assert!(matches!(err, CorpusError::UnknownSubject { .. }));
    }

    #[test]
    fn overlapping_segments_rejected() {
        let (_dir, lectures_path, tdir) =
            setup_corpus(&["a,Alpha,Physics,lecture,2016-12-08,60,1,,"]);
        write_transcript(
            &tdir,
            "a",
            r#"{"segments":[
                {"start_s":0.0,"end_s":30.0,"kind":"speech","text":"x"},
                {"start_s":20.0,"end_s":40.0,"kind":"speech","text":"y"}
            ]}"#,
        );
        let err = load_lectures(&lectures_path, FileFormat::Csv, &tdir, &SubjectMap::builtin())
            .unwrap_err();
        assert!(matches!(err, CorpusError::InvalidTranscript { .. }));
    }

    #[test]
    fn silence_with_text_rejected() {
        let (_dir, lectures_path, tdir) =
            setup_corpus(&["a,Alpha,Physics,lecture,2016-12-08,60,1,,"]);
        write_transcript(
            &tdir,
            "a",
            r#"{"segments":[{"start_s":0.0,"end_s":30.0,"kind":"silence","text":"oops"}]}"#,
        );
        let err = load_lectures(&lectures_path, FileFormat::Csv, &tdir, &SubjectMap::builtin())
            .unwrap_err();
        assert!(matches!(err, CorpusError::InvalidTranscript { .. }));
    }

    fn write_events_csv(dir: &TempDir, rows: &[&str]) -> std::path::PathBuf {
        let path = dir.path().join("events.csv");
        let mut csv = String::from("user_id,lecture_id,timestamp,watch_time_s\n");
        for row in rows {
            csv.push_str(row);
            csv.push('\n');
        }
        fs::write(&path, csv).unwrap();
        path
    }

    #[test]
    fn loads_events() {
        let dir = TempDir::new().unwrap();
        let path = write_events_csv(
            &dir,
            &[
                "u1,a,2017-01-01T10:00:00Z,30",
                "u2,a,2017-01-02T10:00:00Z,45.5",
            ],
        );
        let load = load_events(&path).unwrap();
        assert_eq!(load.events.len(), 2);
        assert!(load.rejected.is_empty());
        assert_eq!(load.events[1].watch_time_s, 45.5);
    }

    #[test]
    fn negative_watch_time_rejected_with_report() {
        let dir = TempDir::new().unwrap();
        let path = write_events_csv(
            &dir,
            &["u1,a,2017-01-01T10:00:00Z,-1", "u2,a,2017-01-02T10:00:00Z,5"],
        );
        let load = load_events(&path).unwrap();
        assert_eq!(load.events.len(), 1);
        assert_eq!(load.rejected.len(), 1);
        assert_eq!(load.rejected[0].line, 2);
    }

    #[test]
    fn empty_events_file_is_empty_set() {
        let dir = TempDir::new().unwrap();
        let path = write_events_csv(&dir, &[]);
        let load = load_events(&path).unwrap();
        assert!(load.events.is_empty());
    }

    fn lecture_stub(id: &str) -> Lecture {
        Lecture {
            id: id.to_string(),
            title: format!("Lecture {id}"),
            subject: "Physics".to_string(),
            knowledge_area: KnowledgeArea::Stem,
            lecture_type: LectureType::Lecture,
            published_date: NaiveDate::from_ymd_opt(2016, 12, 8).unwrap(),
            duration_s: 100.0,
            num_parts: 1,
            transcript: Transcript::default(),
            mean_star_rating: None,
            view_count: None,
        }
    }

    fn event_stub(user: &str, lecture: &str) -> ViewEvent {
        ViewEvent {
            user_id: user.to_string(),
            lecture_id: lecture.to_string(),
            timestamp: DateTime::parse_from_rfc3339("2017-01-01T00:00:00Z")
                .unwrap()
                .with_timezone(&Utc),
            watch_time_s: 10.0,
        }
    }

    #[test]
    fn min_viewers_counts_distinct_users() {
        let lectures = vec![lecture_stub("a"), lecture_stub("b")];
        // a: 5 distinct users; b: 4 distinct users, one viewing twice.
        let mut events: Vec<ViewEvent> =
            (0..5).map(|i| event_stub(&format!("u{i}"), "a")).collect();
        for i in 0..4 {
            events.push(event_stub(&format!("v{i}"), "b"));
        }
        events.push(event_stub("v0", "b"));
        let (kept, kept_events) = filter_min_viewers(lectures, events, 5).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
        assert!(kept_events.iter().all(|e| e.lecture_id == "a"));
    }

    #[test]
    fn min_viewers_k1_keeps_any_viewed_lecture() {
        let lectures = vec![lecture_stub("a"), lecture_stub("b")];
        let events = vec![event_stub("u1", "a")];
        let (kept, _) = filter_min_viewers(lectures, events, 1).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
    }

    #[test]
    fn min_viewers_zero_is_rejected() {
        assert!(matches!(
            filter_min_viewers(vec![], vec![], 0),
            Err(CorpusError::BadMinViewers)
        ));
    }

    #[test]
    fn loads_lectures_from_json() {
        let dir = TempDir::new().unwrap();
        let tdir = dir.path().join("transcripts");
        fs::create_dir(&tdir).unwrap();
        write_transcript(&tdir, "j1", PLAIN_TRANSCRIPT);
        let path = dir.path().join("lectures.json");
        fs::write(
            &path,
            r#"[{"id":"j1","title":"Json Lecture","subject":"Arts","lecture_type":"keynote",
                "published_date":"2012-05-01","duration_s":60.0,"num_parts":2,
                "mean_star_rating":4.0,"view_count":17}]"#,
        )
        .unwrap();
        let lectures =
            load_lectures(&path, FileFormat::Json, &tdir, &SubjectMap::builtin()).unwrap();
        assert_eq!(lectures.len(), 1);
        assert_eq!(lectures[0].lecture_type, LectureType::Keynote);
        assert_eq!(lectures[0].view_count, Some(17));
        assert_eq!(lectures[0].knowledge_area, KnowledgeArea::Miscellaneous);
    }

    #[test]
    fn corpus_round_trips_through_files() {
        let dir = TempDir::new().unwrap();
        let mut lec = lecture_stub("rt1");
        lec.transcript = Transcript {
            segments: vec![
                Segment {
                    start_s: 0.0,
                    end_s: 40.0,
                    kind: SegmentKind::Speech,
                    text: "Some speech, with punctuation.".to_string(),
                },
                Segment {
                    start_s: 40.0,
                    end_s: 55.5,
                    kind: SegmentKind::Silence,
                    text: String::new(),
                },
            ],
        };
        lec.mean_star_rating = Some(3.25);
        lec.view_count = Some(42);
        let lectures = vec![lec, lecture_stub("rt2")];
        let events = vec![event_stub("u1", "rt1"), event_stub("u2", "rt2")];

        let lpath = dir.path().join("lectures.csv");
        let tdir = dir.path().join("transcripts");
        let epath = dir.path().join("events.csv");
        write_lectures(&lectures, &lpath, &tdir).unwrap();
        write_events(&events, &epath).unwrap();

        let loaded =
            load_lectures(&lpath, FileFormat::Csv, &tdir, &SubjectMap::builtin()).unwrap();
        assert_eq!(loaded, lectures);
        let eload = load_events(&epath).unwrap();
        assert_eq!(eload.events, events);
    }
}
