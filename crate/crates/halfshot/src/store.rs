//! Versioned persistence for engine state and trained models.
//!
//! A snapshot is a directory:
//!
//! ```text
//! <snapshot>/
//!   MANIFEST     version line plus a sha-256 checksum per file
//!   state.doc    JSON document: config, intents, rendered patterns,
//!                sentences with bindings, training counters
//!   model.bin    serialized similarity model (absent before first training)
//! ```
//!
//! Writes go to a sibling temp directory that is renamed into place, so a
//! partially written snapshot is never visible under the target path.
//! Checksums are verified on load and the reassembled engine is re-validated
//! for referential integrity.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{Engine, EngineConfig, IntentRecord, PatternRecord, StoredSentence};
use crate::pattern::{ArgumentBinding, Pattern};
use crate::sim::{EmbeddingTable, SimilarityModel};
use crate::text::Utterance;

pub const SNAPSHOT_VERSION: u32 = 1;

const STATE_FILE: &str = "state.doc";
const MODEL_FILE: &str = "model.bin";
const MANIFEST_FILE: &str = "MANIFEST";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot corrupt: {0}")]
    Corrupt(String),
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("unsupported snapshot version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SentenceDoc {
    raw: String,
    tokens: Vec<String>,
    intent: u32,
    pattern: u32,
    binding: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateDoc {
    version: u32,
    config: EngineConfig,
    intents: Vec<IntentRecord>,
    /// rendered with `__<index>` slot markers
    patterns: Vec<(String, u32)>,
    sentences: Vec<SentenceDoc>,
    interactions_since_training: usize,
    retrain_count: usize,
    has_model: bool,
}

/// Metadata describing a written snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotInfo {
    pub path: PathBuf,
    pub version: u32,
    pub state_checksum: String,
    pub model_checksum: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Write the engine (and its trained model, if any) to a snapshot
/// directory, atomically replacing whatever was there.
pub fn save(engine: &Engine, path: &Path) -> Result<SnapshotInfo, StoreError> {
    let (config, intents, patterns, sentences, since, retrains) = engine.parts();
    let doc = StateDoc {
        version: SNAPSHOT_VERSION,
        config: config.clone(),
        intents: intents.to_vec(),
        patterns: patterns
            .iter()
            .map(|p| (p.pattern.to_string(), p.intent))
            .collect(),
        sentences: sentences
            .iter()
            .map(|s| SentenceDoc {
                raw: s.utterance.raw.clone(),
                tokens: s.utterance.tokens.clone(),
                intent: s.intent,
                pattern: s.pattern,
                binding: s.binding.values.clone(),
            })
            .collect(),
        interactions_since_training: since,
        retrain_count: retrains,
        has_model: engine.model().is_some(),
    };
    let state_bytes =
        serde_json::to_vec_pretty(&doc).map_err(|e| StoreError::Corrupt(e.to_string()))?;
    let model_bytes = match engine.model() {
        Some(m) => Some(serde_json::to_vec(m).map_err(|e| StoreError::Corrupt(e.to_string()))?),
        None => None,
    };

    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        ".{}.tmp-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "snapshot".into()),
        std::process::id()
    ));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;

    let state_checksum = sha256_hex(&state_bytes);
    fs::write(tmp.join(STATE_FILE), &state_bytes)?;
    let model_checksum = match &model_bytes {
        Some(bytes) => {
            fs::write(tmp.join(MODEL_FILE), bytes)?;
            Some(sha256_hex(bytes))
        }
        None => None,
    };
    let mut manifest = fs::File::create(tmp.join(MANIFEST_FILE))?;
    writeln!(manifest, "halfshot-snapshot {SNAPSHOT_VERSION}")?;
    writeln!(manifest, "{STATE_FILE} {state_checksum}")?;
    if let Some(c) = &model_checksum {
        writeln!(manifest, "{MODEL_FILE} {c}")?;
    }
    manifest.sync_all()?;
    drop(manifest);

    // swap into place; a reader sees the old snapshot or the new one
    let old = parent.join(format!(
        ".{}.old-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "snapshot".into()),
        std::process::id()
    ));
    if old.exists() {
        fs::remove_dir_all(&old)?;
    }
    if path.exists() {
        fs::rename(path, &old)?;
    }
    fs::rename(&tmp, path)?;
    if old.exists() {
        fs::remove_dir_all(&old)?;
    }

    Ok(SnapshotInfo {
        path: path.to_path_buf(),
        version: SNAPSHOT_VERSION,
        state_checksum,
        model_checksum,
    })
}

fn read_checked(dir: &Path, name: &str, checksum: &str) -> Result<Vec<u8>, StoreError> {
    let bytes = fs::read(dir.join(name))
        .map_err(|_| StoreError::Corrupt(format!("missing {name}")))?;
    if sha256_hex(&bytes) != checksum {
        return Err(StoreError::ChecksumMismatch(name.to_string()));
    }
    Ok(bytes)
}

/// Load a snapshot back into an engine, scoring with the supplied
/// embedding table (the table is an external asset, not part of the
/// snapshot).
pub fn load(path: &Path, table: EmbeddingTable) -> Result<Engine, StoreError> {
    let manifest = fs::read_to_string(path.join(MANIFEST_FILE))
        .map_err(|_| StoreError::Corrupt("missing MANIFEST".into()))?;
    let mut lines = manifest.lines();
    let header = lines
        .next()
        .ok_or_else(|| StoreError::Corrupt("empty MANIFEST".into()))?;
    let version: u32 = header
        .strip_prefix("halfshot-snapshot ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| StoreError::Corrupt(format!("bad MANIFEST header {header:?}")))?;
    if version != SNAPSHOT_VERSION {
        return Err(StoreError::UnsupportedVersion {
            found: version,
            supported: SNAPSHOT_VERSION,
        });
    }
    let mut state_sum = None;
    let mut model_sum = None;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            [STATE_FILE, sum] => state_sum = Some(sum.to_string()),
            [MODEL_FILE, sum] => model_sum = Some(sum.to_string()),
            other => {
                return Err(StoreError::Corrupt(format!(
                    "unrecognized MANIFEST entry {other:?}"
                )))
            }
        }
    }
    let state_sum =
        state_sum.ok_or_else(|| StoreError::Corrupt("MANIFEST lists no state.doc".into()))?;

    let state_bytes = read_checked(path, STATE_FILE, &state_sum)?;
    let doc: StateDoc = serde_json::from_slice(&state_bytes)
        .map_err(|e| StoreError::Corrupt(format!("state.doc: {e}")))?;
    if doc.version != version {
        return Err(StoreError::Corrupt(
            "state.doc version disagrees with MANIFEST".into(),
        ));
    }

    let model: Option<SimilarityModel> = match (doc.has_model, model_sum) {
        (true, Some(sum)) => {
            let bytes = read_checked(path, MODEL_FILE, &sum)?;
            Some(
                serde_json::from_slice(&bytes)
                    .map_err(|e| StoreError::Corrupt(format!("model.bin: {e}")))?,
            )
        }
        (false, None) => None,
        (true, None) => return Err(StoreError::Corrupt("state expects a model.bin".into())),
        (false, Some(_)) => {
            return Err(StoreError::Corrupt(
                "MANIFEST lists a model the state does not expect".into(),
            ))
        }
    };

    let patterns: Vec<PatternRecord> = doc
        .patterns
        .iter()
        .map(|(text, intent)| {
            Pattern::parse(text)
                .map(|pattern| PatternRecord {
                    pattern,
                    intent: *intent,
                })
                .map_err(|e| StoreError::Corrupt(format!("pattern {text:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let sentences: Vec<StoredSentence> = doc
        .sentences
        .into_iter()
        .map(|s| StoredSentence {
            utterance: Utterance {
                raw: s.raw,
                tokens: s.tokens,
            },
            intent: s.intent,
            pattern: s.pattern,
            binding: ArgumentBinding { values: s.binding },
        })
        .collect();

    Engine::from_parts(
        doc.config,
        table,
        doc.intents,
        patterns,
        sentences,
        model,
        doc.interactions_since_training,
        doc.retrain_count,
    )
    .map_err(StoreError::Corrupt)
}
