//! Harness for semantic-textual-similarity benchmark files: tab-separated
//! rows scored 0..5, train on one file, report Pearson correlation on
//! another.

use std::path::Path;

use thiserror::Error;

use super::embed::EmbeddingTable;
use super::model::{train, LabeledPair, ModelError, TrainConfig};
use crate::text::tokenize;

#[derive(Debug, Error)]
pub enum StsError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no usable rows in {0}")]
    EmptyFile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parsed rows plus the count of malformed rows that were skipped.
pub struct StsFile {
    pub pairs: Vec<LabeledPair>,
    pub skipped: usize,
}

/// Parse a tab-separated benchmark file. Rows may carry leading metadata
/// columns; the last three fields are taken as (score, sentence1,
/// sentence2). Rows that do not parse are skipped and counted.
pub fn parse_sts_file(path: &Path, max_score: u32) -> Result<StsFile, StsError> {
    let content = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for line in content.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            skipped += 1;
            continue;
        }
        let tail = &fields[fields.len() - 3..];
        let score: f64 = match tail[0].trim().parse() {
            Ok(s) => s,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if !(0.0..=max_score as f64).contains(&score) {
            skipped += 1;
            continue;
        }
        match (tokenize(tail[1]), tokenize(tail[2])) {
            (Ok(a), Ok(b)) => pairs.push(LabeledPair { a, b, score }),
            _ => skipped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(StsError::EmptyFile(path.display().to_string()));
    }
    Ok(StsFile { pairs, skipped })
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

pub struct StsReport {
    pub pearson: f64,
    /// Predictions had zero variance; `pearson` is reported as 0.
    pub degenerate: bool,
    pub train_rows: usize,
    pub test_rows: usize,
    pub skipped_train: usize,
    pub skipped_test: usize,
}

/// Train on the train file and report Pearson correlation between predicted
/// and gold scores on the test file.
pub fn evaluate_files(
    train_path: &Path,
    test_path: &Path,
    table: &EmbeddingTable,
    config: &TrainConfig,
    seed: u64,
) -> Result<StsReport, StsError> {
    let train_file = parse_sts_file(train_path, config.max_score)?;
    let test_file = parse_sts_file(test_path, config.max_score)?;
    let model = train(&train_file.pairs, &[], table, config, seed)?;
    let m = config.max_score as f64;
    let mut predicted = Vec::with_capacity(test_file.pairs.len());
    let mut gold = Vec::with_capacity(test_file.pairs.len());
    for p in &test_file.pairs {
        predicted.push(model.score(&p.a, &p.b, table)? * m);
        gold.push(p.score);
    }
    let (r, degenerate) = match pearson(&predicted, &gold) {
        Some(r) => (r, false),
        None => (0.0, true),
    };
    Ok(StsReport {
        pearson: r,
        degenerate,
        train_rows: train_file.pairs.len(),
        test_rows: test_file.pairs.len(),
        skipped_train: train_file.skipped,
        skipped_test: test_file.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_correlate_at_one() {
        let gold = [0.0, 1.5, 2.0, 3.7, 5.0];
        assert!((pearson(&gold, &gold).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_predictions_are_degenerate() {
        let gold = [0.0, 1.0, 2.0];
        let flat = [2.5, 2.5, 2.5];
        assert_eq!(pearson(&flat, &gold), None);
    }

    #[test]
    fn parses_metadata_columns_and_skips_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sts.tsv");
        std::fs::write(
            &path,
            "genre\tfile\t2012\t0001\t4.2\ta plane is taking off\tan air plane is taking off\n\
             3.0\tshort row\n\
             not-a-number\tsentence one\tsentence two\n\
             0.0\tthe man is cooking\tthe cat sleeps\n",
        )
        .unwrap();
        let parsed = parse_sts_file(&path, 5).unwrap();
        assert_eq!(parsed.pairs.len(), 2);
        assert_eq!(parsed.skipped, 2);
        assert_eq!(parsed.pairs[0].score, 4.2);
        assert_eq!(parsed.pairs[0].a.tokens[0], "a");
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sts.tsv");
        std::fs::write(&path, "\n\n").unwrap();
        assert!(matches!(
            parse_sts_file(&path, 5),
            Err(StsError::EmptyFile(_))
        ));
    }
}
