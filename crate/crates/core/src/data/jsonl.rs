//! JSON Lines ingestion and persistence of voted pairs.
//!
//! Each line is one object in either vote form
//! `{"context", "y1", "y2", "v1", "v2"}` or score form
//! `{"context", "y1", "y2", "s1", "s2"}`; an optional `"target"` carries an
//! already attached preference. Datasets with a ground truth store it in a
//! `<stem>.truth.json` sidecar next to the JSONL file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::{Dataset, GroundTruth, Provenance, VotedPair};
use crate::error::{Result, VpoError};
use crate::vote_model::{scores_to_pseudovotes, TargetPreference, VoteCounts, DEFAULT_SCORE_BASE};

const KNOWN_FIELDS: [&str; 8] = ["context", "y1", "y2", "v1", "v2", "s1", "s2", "target"];

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Base of the score-to-pseudo-vote transform.
    pub score_base: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            score_base: DEFAULT_SCORE_BASE,
        }
    }
}

/// Counters for everything ingestion tolerated rather than rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub records: usize,
    pub score_records: usize,
    pub clamped_votes: usize,
    pub unknown_fields: usize,
}

/// Parses voted pairs from a JSON Lines stream. Blank lines are skipped.
pub fn parse_jsonl<R: BufRead>(reader: R, opts: &IngestOptions) -> Result<(Dataset, IngestStats)> {
    let mut stats = IngestStats::default();
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| VpoError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| VpoError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| VpoError::Parse {
            line: lineno,
            message: "expected a JSON object".into(),
        })?;
        pairs.push(parse_record(obj, lineno, opts, &mut stats)?);
        stats.records += 1;
    }
    let provenance = if stats.score_records > 0 {
        Provenance::IngestedScores
    } else {
        Provenance::IngestedVotes
    };
    Ok((
        Dataset {
            pairs,
            provenance,
            ground_truth: None,
        },
        stats,
    ))
}

fn parse_record(
    obj: &Map<String, Value>,
    line: usize,
    opts: &IngestOptions,
    stats: &mut IngestStats,
) -> Result<VotedPair> {
    for key in obj.keys().filter(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
        log::warn!("line {line}: ignoring unknown field `{key}`");
        stats.unknown_fields += 1;
    }
    let index = |field: &str| -> Result<usize> {
        let v = obj.get(field).ok_or_else(|| missing(line, field))?;
        v.as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| schema(line, field, format!("expected a non-negative integer, got {v}")))
    };
    let number = |field: &str| -> Result<f64> {
        let v = obj.get(field).ok_or_else(|| missing(line, field))?;
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| schema(line, field, format!("expected a finite number, got {v}")))
    };

    let (context, y1, y2) = (index("context")?, index("y1")?, index("y2")?);
    if y1 == y2 {
        return Err(VpoError::Validation {
            line,
            message: format!("y1 and y2 are both {y1}"),
        });
    }

    let has_votes = obj.contains_key("v1") || obj.contains_key("v2");
    let votes = if has_votes || !(obj.contains_key("s1") || obj.contains_key("s2")) {
        let mut clamp = |v: f64, field: &str| {
            if v < 0.0 {
                log::warn!("line {line}: negative {field} = {v} clamped to 0");
                stats.clamped_votes += 1;
                0.0
            } else {
                v
            }
        };
        let (v1, v2) = (number("v1")?, number("v2")?);
        VoteCounts::new(clamp(v1, "v1"), clamp(v2, "v2"))
    } else {
        stats.score_records += 1;
        scores_to_pseudovotes(number("s1")?, number("s2")?, opts.score_base)
    }
    .map_err(|e| VpoError::Validation {
        line,
        message: e.to_string(),
    })?;

    let mut pair = VotedPair::new(context, y1, y2, votes)?;
    if obj.contains_key("target") {
        let p = number("target")?;
        pair.target = Some(TargetPreference::new(p).map_err(|e| schema(line, "target", e.to_string()))?);
    }
    Ok(pair)
}

fn missing(line: usize, field: &str) -> VpoError {
    schema(line, field, "missing".into())
}

fn schema(line: usize, field: &str, message: String) -> VpoError {
    VpoError::Schema {
        line,
        field: field.into(),
        message,
    }
}

/// Reads a JSONL file of voted pairs.
pub fn load_jsonl(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<(Dataset, IngestStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| VpoError::io(path, e))?;
    parse_jsonl(BufReader::new(file), opts)
}

/// Location of the ground-truth sidecar for a dataset file.
pub fn truth_path(path: impl AsRef<Path>) -> PathBuf {
    path.as_ref().with_extension("truth.json")
}

/// Reads a JSONL dataset and, when present, its ground-truth sidecar.
pub fn load_dataset(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<(Dataset, IngestStats)> {
    let path = path.as_ref();
    let (mut ds, stats) = load_jsonl(path, opts)?;
    let sidecar = truth_path(path);
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| VpoError::io(&sidecar, e))?;
        let integrity = |message: String| VpoError::Integrity {
            path: sidecar.clone(),
            message,
        };
        let value: Value = serde_json::from_str(&text).map_err(|e| integrity(e.to_string()))?;
        let rows: Vec<Vec<f64>> = serde_json::from_value(value["rewards"].clone())
            .map_err(|e| integrity(format!("rewards: {e}")))?;
        let gt = GroundTruth::from_rows(rows).map_err(|e| integrity(e.to_string()))?;
        let declared = (value["contexts"].as_u64(), value["candidates"].as_u64());
        if declared != (Some(gt.contexts as u64), Some(gt.candidates as u64)) {
            return Err(integrity(format!(
                "declared shape {declared:?} disagrees with the reward table {:?}",
                gt.shape()
            )));
        }
        ds.ground_truth = Some(gt);
        ds.provenance = Provenance::Synthetic;
    }
    Ok((ds, stats))
}

/// Writes the dataset in vote form (plus targets when attached) and its
/// ground truth sidecar. A stale sidecar from an earlier save is removed.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| VpoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in &ds.pairs {
        let mut rec = json!({
            "context": p.context.0,
            "y1": p.y1.0,
            "y2": p.y2.0,
            "v1": p.votes.v1(),
            "v2": p.votes.v2(),
        });
        if let Some(t) = p.target {
            rec["target"] = json!(t.value());
        }
        writeln!(w, "{rec}").map_err(|e| VpoError::io(path, e))?;
    }
    w.flush().map_err(|e| VpoError::io(path, e))?;

    let sidecar = truth_path(path);
    match &ds.ground_truth {
        Some(gt) => {
            let doc = json!({
                "contexts": gt.contexts,
                "candidates": gt.candidates,
                "rewards": gt.rewards,
            });
            std::fs::write(&sidecar, format!("{doc}\n")).map_err(|e| VpoError::io(&sidecar, e))?;
        }
        None if sidecar.exists() => {
            std::fs::remove_file(&sidecar).map_err(|e| VpoError::io(&sidecar, e))?;
        }
        None => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(Dataset, IngestStats)> {
        parse_jsonl(text.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn vote_record() {
        let (ds, stats) = parse(r#"{"context":0,"y1":1,"y2":2,"v1":101,"v2":9}"#).unwrap();
        assert_eq!(ds.pairs[0].votes, VoteCounts::new(101.0, 9.0).unwrap());
        assert_eq!(ds.provenance, Provenance::IngestedVotes);
        assert_eq!(stats.records, 1);
    }

    #[test]
    fn score_record() {
        let (ds, stats) = parse(r#"{"context":0,"y1":1,"y2":2,"s1":8,"s2":6}"#).unwrap();
        assert_eq!(ds.pairs[0].votes, VoteCounts::new(256.0, 64.0).unwrap());
        assert_eq!(ds.provenance, Provenance::IngestedScores);
        assert_eq!(stats.score_records, 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        assert!(matches!(parse("{"), Err(VpoError::Parse { line: 1, .. })));
        let text = "{\"context\":0,\"y1\":0,\"y2\":1,\"v1\":1,\"v2\":2}\n\n[1,2]\n";
        assert!(matches!(parse(text), Err(VpoError::Parse { line: 3, .. })));
    }

    #[test]
    fn missing_field_is_named() {
        match parse(r#"{"context":0,"y1":1,"v1":3,"v2":1}"#) {
            Err(VpoError::Schema { field, line: 1, .. }) => assert_eq!(field, "y2"),
            other => panic!("unexpected {other:?}"),
        }
        match parse(r#"{"context":0,"y1":1,"y2":0,"v1":3}"#) {
            Err(VpoError::Schema { field, .. }) => assert_eq!(field, "v2"),
            other => panic!("unexpected {other:?}"),
        }
        match parse(r#"{"context":-1,"y1":1,"y2":0,"v1":3,"v2":2}"#) {
            Err(VpoError::Schema { field, .. }) => assert_eq!(field, "context"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identical_responses_rejected() {
        assert!(matches!(
            parse(r#"{"context":0,"y1":2,"y2":2,"v1":3,"v2":1}"#),
            Err(VpoError::Validation { line: 1, .. })
        ));
    }

    #[test]
    fn negatives_clamped_and_extras_counted() {
        let (ds, stats) =
            parse(r#"{"context":0,"y1":0,"y2":1,"v1":-4,"v2":7,"post_id":"abc"}"#).unwrap();
        assert_eq!(ds.pairs[0].votes.v1(), 0.0);
        assert_eq!(stats.clamped_votes, 1);
        assert_eq!(stats.unknown_fields, 1);
    }

    #[test]
    fn target_field_validated() {
        let (ds, _) = parse(r#"{"context":0,"y1":0,"y2":1,"v1":1,"v2":1,"target":0.5}"#).unwrap();
        assert_eq!(ds.pairs[0].target.unwrap().value(), 0.5);
        assert!(parse(r#"{"context":0,"y1":0,"y2":1,"v1":1,"v2":1,"target":1.0}"#).is_err());
    }
}
