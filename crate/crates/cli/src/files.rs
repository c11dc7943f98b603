//! Readers and writers for the command artifacts.

use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use odsearch_core::optimizer::TraceLine;
use odsearch_core::store::parse_timestamp;
use odsearch_core::PipelinePolicy;

use crate::CliError;

/// One row of a scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub timestamp: i64,
    /// Min-max normalised to `[0, 1]`.
    pub score: f64,
    pub flag: bool,
    pub raw_score: f64,
}

/// `(x - min) / (max - min)`; all zeros when the range is empty.
pub fn min_max(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

pub fn render_scores_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from("timestamp,score,flag,raw_score\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.timestamp,
            r.score,
            u8::from(r.flag),
            r.raw_score
        ));
    }
    out
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>, CliError> {
    let data = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data(e.to_string()))?;
    let headers = reader.headers().map_err(|e| data(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ti), Some(fi)) = (col("timestamp"), col("flag")) else {
        return Err(data("expected columns `timestamp` and `flag`".into()));
    };
    let (si, ri) = (col("score"), col("raw_score"));
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| data(e.to_string()))?;
        let field = |idx: usize| rec.get(idx).unwrap_or("");
        let num = |idx: Option<usize>| -> Result<f64, CliError> {
            match idx {
                Some(idx) => field(idx)
                    .parse()
                    .map_err(|_| data(format!("line {line}: bad number {:?}", field(idx)))),
                None => Ok(0.0),
            }
        };
        let timestamp = parse_timestamp(field(ti))
            .ok_or_else(|| data(format!("line {line}: bad timestamp {:?}", field(ti))))?;
        let flag = match field(fi) {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(data(format!("line {line}: bad flag {other:?}"))),
        };
        rows.push(ScoreRow {
            timestamp,
            score: num(si)?,
            flag,
            raw_score: num(ri)?,
        });
    }
    Ok(rows)
}

pub fn read_policy(path: &Path) -> Result<PipelinePolicy, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read policy {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed policy {}: {e}", path.display())))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceLine>, CliError> {
    let data = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let file = fs::File::open(path).map_err(|e| data(e.to_string()))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| {
            let l = l.map_err(|e: io::Error| data(e.to_string()))?;
            serde_json::from_str(&l).map_err(|e| data(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Mean of the five best objectives among the first `i` trials, from the fifth
/// trial on, as `(iteration, mean)`.
pub fn top5_progress(trace: &[TraceLine]) -> Vec<(f64, f64)> {
    let mut best: Vec<f64> = Vec::with_capacity(6);
    let mut out = Vec::new();
    for (i, t) in trace.iter().enumerate() {
        let pos = best.partition_point(|&b| b >= t.f1);
        best.insert(pos, t.f1);
        best.truncate(5);
        if i + 1 >= 5 {
            out.push((t.iter as f64, best.iter().sum::<f64>() / 5.0));
        }
    }
    out
}
