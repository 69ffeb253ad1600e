//! Simulated user interactions and the metric suites built on them.
//!
//! A simulation feeds grammar-sampled requests to the engine one at a time,
//! scores its verdicts against the ground truth, and always applies the
//! true (intent, pattern, binding) as feedback afterwards. Baselines share
//! the loop: the one-shot system answers only from exact pattern matches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Engine, EngineConfig, Interpretation};
use crate::grammar::Grammar;
use crate::sim::{
    ensemble_mean, train, EmbeddingTable, LabeledPair, ModelError, TrainConfig, SUBMODEL_NAMES,
};
use crate::text::Utterance;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("grammar too small: need {need} {what}, have {have}")]
    GrammarTooSmall {
        what: &'static str,
        need: usize,
        have: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Aidme,
    AidmeM,
    Oneshot,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Aidme => write!(f, "aidme"),
            Variant::AidmeM => write!(f, "aidme-m"),
            Variant::Oneshot => write!(f, "oneshot"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    IntentLearning,
    PatternLearning,
    SteadyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    ExactMatch,
    Inferred,
    IntentOnly,
    NewIntent,
    /// The one-shot baseline found no pattern; it makes no new-intent
    /// claim, so this never scores as a correct detection.
    NoMatch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub index: usize,
    pub request: String,
    pub truth_intent: String,
    pub truth_pattern: String,
    pub truth_arity: usize,
    pub intent_new: bool,
    pub pattern_new: bool,
    pub verdict: VerdictKind,
    pub verdict_intent: Option<String>,
    pub verdict_pattern: Option<String>,
    pub intent_correct: bool,
    pub pattern_correct: bool,
    pub phase: Phase,
}

/// Detection accuracy split by whether the ground truth was new or already
/// known at the time of the request. `all` is the event-count-weighted mean.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Accuracy {
    pub new: f64,
    pub known: f64,
    pub all: f64,
    pub n_new: usize,
    pub n_known: usize,
}

/// Pattern accuracy bucketed by the true pattern's argument count.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArgBucket {
    pub arity: usize,
    pub overall: f64,
    pub n_overall: usize,
    pub new_only: f64,
    pub n_new: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub variant: Variant,
    pub seed: u64,
    pub interactions: usize,
    pub intent_accuracy: Accuracy,
    pub pattern_accuracy: Accuracy,
    pub arg_buckets: Vec<ArgBucket>,
    pub phase_boundaries: Vec<(usize, Phase)>,
    pub max_candidates: usize,
    pub candidate_cap: usize,
    pub retrains: usize,
    pub distinct_sentences: usize,
    pub distinct_intents: usize,
    pub distinct_patterns: usize,
    pub records: Vec<InteractionRecord>,
}

fn ratio(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Table-style aggregates over an interaction log.
pub fn compute_metrics(records: &[InteractionRecord]) -> (Accuracy, Accuracy, Vec<ArgBucket>) {
    let split = |is_new: fn(&InteractionRecord) -> bool,
                 correct: fn(&InteractionRecord) -> bool|
     -> Accuracy {
        let (mut new_hit, mut new_n, mut known_hit, mut known_n) = (0, 0, 0, 0);
        for r in records {
            if is_new(r) {
                new_n += 1;
                new_hit += usize::from(correct(r));
            } else {
                known_n += 1;
                known_hit += usize::from(correct(r));
            }
        }
        Accuracy {
            new: ratio(new_hit, new_n),
            known: ratio(known_hit, known_n),
            all: ratio(new_hit + known_hit, new_n + known_n),
            n_new: new_n,
            n_known: known_n,
        }
    };
    let intent = split(|r| r.intent_new, |r| r.intent_correct);
    let pattern = split(|r| r.pattern_new, |r| r.pattern_correct);
    let buckets = (1..=3)
        .map(|arity| {
            let of_arity: Vec<&InteractionRecord> =
                records.iter().filter(|r| r.truth_arity == arity).collect();
            let n_overall = of_arity.len();
            let overall = ratio(
                of_arity.iter().filter(|r| r.pattern_correct).count(),
                n_overall,
            );
            let new: Vec<&&InteractionRecord> =
                of_arity.iter().filter(|r| r.pattern_new).collect();
            let n_new = new.len();
            let new_only = ratio(new.iter().filter(|r| r.pattern_correct).count(), n_new);
            ArgBucket {
                arity,
                overall,
                n_overall,
                new_only,
                n_new,
            }
        })
        .collect();
    (intent, pattern, buckets)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum EventKind {
    IntentNew,
    PatternNew,
    Steady,
}

/// Classify each interaction into a learning phase by the majority event
/// kind in a trailing window of 50, then collect the phase run boundaries.
fn classify_phases(records: &mut [InteractionRecord]) -> Vec<(usize, Phase)> {
    const WINDOW: usize = 50;
    let kinds: Vec<EventKind> = records
        .iter()
        .map(|r| {
            if r.intent_new {
                EventKind::IntentNew
            } else if r.pattern_new {
                EventKind::PatternNew
            } else {
                EventKind::Steady
            }
        })
        .collect();
    for i in 0..records.len() {
        let lo = i.saturating_sub(WINDOW - 1);
        let (mut a, mut b, mut c) = (0, 0, 0);
        for k in &kinds[lo..=i] {
            match k {
                EventKind::IntentNew => a += 1,
                EventKind::PatternNew => b += 1,
                EventKind::Steady => c += 1,
            }
        }
        // ties resolve toward the earlier learning phase
        records[i].phase = if a >= b && a >= c {
            Phase::IntentLearning
        } else if b >= c {
            Phase::PatternLearning
        } else {
            Phase::SteadyState
        };
    }
    let mut bounds = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if bounds.last().map(|&(_, p)| p) != Some(r.phase) {
            bounds.push((i, r.phase));
        }
    }
    bounds
}

/// Drive `n` grammar-sampled interactions through the chosen variant.
/// Bit-reproducible from (grammar, seed, config).
pub fn run_simulation(
    g: &Grammar,
    n: usize,
    variant: Variant,
    seed: u64,
    mut config: EngineConfig,
    table: EmbeddingTable,
) -> SimulationReport {
    assert!(n >= 1);
    config.seed = seed;
    config.skip_exact_match = variant == Variant::AidmeM;
    let candidate_cap = config.candidate_cap;
    let mut engine = Engine::new(config, table);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x51a5);
    let mut seen_intents: Vec<String> = Vec::new();
    let mut seen_patterns: Vec<String> = Vec::new();
    let mut records: Vec<InteractionRecord> = Vec::with_capacity(n);

    for index in 0..n {
        let req = g.sample_request(&mut rng);
        let truth_pattern = req.pattern.to_string();
        let intent_new = !seen_intents.contains(&req.intent);
        let pattern_new = !seen_patterns.contains(&truth_pattern);

        let (verdict, verdict_intent, verdict_pattern) = match variant {
            Variant::Oneshot => match engine.exact_match(&req.utterance) {
                Some((intent, pattern, _)) => (
                    VerdictKind::ExactMatch,
                    Some(engine.intent_name(intent).to_string()),
                    Some(pattern.to_string()),
                ),
                None => (VerdictKind::NoMatch, None, None),
            },
            Variant::Aidme | Variant::AidmeM => match engine.interpret(&req.utterance) {
                Interpretation::ExactMatch {
                    intent, pattern, ..
                } => (
                    VerdictKind::ExactMatch,
                    Some(engine.intent_name(intent).to_string()),
                    Some(pattern.to_string()),
                ),
                Interpretation::Inferred {
                    intent, pattern, ..
                } => (
                    VerdictKind::Inferred,
                    Some(engine.intent_name(intent).to_string()),
                    Some(pattern.to_string()),
                ),
                Interpretation::IntentOnly { intent, .. } => (
                    VerdictKind::IntentOnly,
                    Some(engine.intent_name(intent).to_string()),
                    None,
                ),
                Interpretation::NewIntent => (VerdictKind::NewIntent, None, None),
            },
        };

        let intent_correct = if intent_new {
            verdict == VerdictKind::NewIntent
        } else {
            verdict_intent.as_deref() == Some(req.intent.as_str())
        };
        let pattern_correct = verdict_pattern.as_deref() == Some(truth_pattern.as_str());

        engine
            .apply_feedback(&req.utterance, &req.intent, &req.pattern, &req.binding)
            .expect("grammar feedback is consistent");
        if intent_new {
            seen_intents.push(req.intent.clone());
        }
        if pattern_new {
            seen_patterns.push(truth_pattern.clone());
        }
        if variant != Variant::Oneshot {
            engine.maybe_retrain();
        }

        records.push(InteractionRecord {
            index,
            request: req.utterance.joined(),
            truth_intent: req.intent,
            truth_pattern,
            truth_arity: req.pattern.arity(),
            intent_new,
            pattern_new,
            verdict,
            verdict_intent,
            verdict_pattern,
            intent_correct,
            pattern_correct,
            phase: Phase::IntentLearning,
        });
    }

    let phase_boundaries = classify_phases(&mut records);
    let (intent_accuracy, pattern_accuracy, arg_buckets) = compute_metrics(&records);
    SimulationReport {
        variant,
        seed,
        interactions: n,
        intent_accuracy,
        pattern_accuracy,
        arg_buckets,
        phase_boundaries,
        max_candidates: engine.max_candidates_seen(),
        candidate_cap,
        retrains: engine.retrain_count(),
        distinct_sentences: engine.sentences().len(),
        distinct_intents: engine.intents().len(),
        distinct_patterns: engine.patterns().len(),
        records,
    }
}

impl SimulationReport {
    /// Flat name/value rows for machine checks.
    pub fn metrics_table(&self) -> Vec<(String, f64)> {
        let mut rows = vec![
            ("intent_accuracy_new".into(), self.intent_accuracy.new),
            ("intent_accuracy_known".into(), self.intent_accuracy.known),
            ("intent_accuracy_all".into(), self.intent_accuracy.all),
            ("pattern_accuracy_new".into(), self.pattern_accuracy.new),
            ("pattern_accuracy_known".into(), self.pattern_accuracy.known),
            ("pattern_accuracy_all".into(), self.pattern_accuracy.all),
            ("max_candidates".into(), self.max_candidates as f64),
            ("retrains".into(), self.retrains as f64),
        ];
        for b in &self.arg_buckets {
            rows.push((format!("pattern_accuracy_args{}_overall", b.arity), b.overall));
            rows.push((format!("pattern_accuracy_args{}_new", b.arity), b.new_only));
        }
        rows
    }

    /// Human-readable summary in the accuracy-table layout.
    pub fn summary_text(&self) -> String {
        let pc = |x: f64| format!("{:5.1}", 100.0 * x);
        let mut out = String::new();
        out.push_str(&format!(
            "variant {} seed {} over {} interactions ({} retrains)\n",
            self.variant, self.seed, self.interactions, self.retrains
        ));
        out.push_str("            |  Intents  New / Known / All  |  Patterns  New / Known / All\n");
        out.push_str(&format!(
            "accuracy %  |  {} / {} / {}        |  {} / {} / {}\n",
            pc(self.intent_accuracy.new),
            pc(self.intent_accuracy.known),
            pc(self.intent_accuracy.all),
            pc(self.pattern_accuracy.new),
            pc(self.pattern_accuracy.known),
            pc(self.pattern_accuracy.all),
        ));
        out.push_str("pattern accuracy by argument count:\n");
        for b in &self.arg_buckets {
            out.push_str(&format!(
                "  {} arg: overall {} ({} events), new {} ({} events)\n",
                b.arity,
                pc(b.overall),
                b.n_overall,
                pc(b.new_only),
                b.n_new
            ));
        }
        out.push_str(&format!(
            "phases: {}\n",
            self.phase_boundaries
                .iter()
                .map(|(i, p)| format!("{p:?}@{i}"))
                .collect::<Vec<_>>()
                .join(" → ")
        ));
        out
    }
}

/// Precision/recall/F1 of one scorer at the 0.5 decision threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEvalRow {
    pub name: String,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEvalReport {
    /// Four submodels in fixed order, then the ensemble.
    pub rows: Vec<ModelEvalRow>,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub train_positive_rate: f64,
    pub test_positive_rate: f64,
}

fn prf(predictions: &[bool], truths: &[bool]) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (f1, precision, recall)
}

/// Generate `want` distinct sentences from the given (intent, pattern)
/// pool, sampling patterns uniformly.
fn distinct_sentences(
    g: &Grammar,
    pool: &[(String, crate::grammar::GrammarPattern)],
    want: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Utterance, String)>, SimulateError> {
    let mut out: Vec<(Utterance, String)> = Vec::with_capacity(want);
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut attempts = 0;
    while out.len() < want {
        attempts += 1;
        if attempts > want * 200 {
            return Err(SimulateError::GrammarTooSmall {
                what: "distinct sentences",
                need: want,
                have: out.len(),
            });
        }
        let (intent, pattern) = &pool[rng.gen_range(0..pool.len())];
        let req = g.instantiate_pattern(intent, pattern, rng);
        if seen.insert(req.utterance.joined()) {
            out.push((req.utterance, req.intent));
        }
    }
    Ok(out)
}

fn sample_pairs(
    sentences: &[(Utterance, String)],
    want: usize,
    max_score: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<LabeledPair>, f64) {
    let mut all: Vec<(usize, usize)> = Vec::new();
    for i in 0..sentences.len() {
        for j in (i + 1)..sentences.len() {
            all.push((i, j));
        }
    }
    for i in 0..all.len().min(want) {
        let j = rng.gen_range(i..all.len());
        all.swap(i, j);
    }
    all.truncate(want.min(all.len()));
    let mut positives = 0usize;
    let pairs: Vec<LabeledPair> = all
        .into_iter()
        .map(|(i, j)| {
            let same = sentences[i].1 == sentences[j].1;
            positives += usize::from(same);
            LabeledPair {
                a: sentences[i].0.clone(),
                b: sentences[j].0.clone(),
                score: if same { max_score } else { 0.0 },
            }
        })
        .collect();
    let rate = ratio(positives, pairs.len());
    (pairs, rate)
}

/// The corpus evaluation protocol: train on 5000 pairs drawn from 150
/// sentences generated by 100 patterns; test on 1000 pairs from 100
/// sentences generated by 40 disjoint patterns; report binary
/// precision/recall/F1 at threshold 0.5 for each submodel and the ensemble.
pub fn eval_model_protocol(
    g: &Grammar,
    seed: u64,
    table: &EmbeddingTable,
    train_cfg: &TrainConfig,
) -> Result<ModelEvalReport, SimulateError> {
    const TRAIN_PATTERNS: usize = 100;
    const TEST_PATTERNS: usize = 40;
    const TRAIN_SENTENCES: usize = 150;
    const TEST_SENTENCES: usize = 100;
    const TRAIN_PAIRS: usize = 5000;
    const TEST_PAIRS: usize = 1000;

    let mut pool: Vec<(String, crate::grammar::GrammarPattern)> = g
        .all_patterns()
        .into_iter()
        .map(|(i, p)| (i.to_string(), p.clone()))
        .collect();
    if pool.len() < TRAIN_PATTERNS + TEST_PATTERNS {
        return Err(SimulateError::GrammarTooSmall {
            what: "patterns",
            need: TRAIN_PATTERNS + TEST_PATTERNS,
            have: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545f4914f6cdd1d) ^ 0xe7a1);
    for i in (1..pool.len()).rev() {
        let j = rng.gen_range(0..=i);
        pool.swap(i, j);
    }
    let train_pool = &pool[..TRAIN_PATTERNS];
    let test_pool = &pool[TRAIN_PATTERNS..TRAIN_PATTERNS + TEST_PATTERNS];

    let train_sentences = distinct_sentences(g, train_pool, TRAIN_SENTENCES, &mut rng)?;
    let test_sentences = distinct_sentences(g, test_pool, TEST_SENTENCES, &mut rng)?;

    let m = train_cfg.max_score as f64;
    let (train_pairs, train_rate) = sample_pairs(&train_sentences, TRAIN_PAIRS, m, &mut rng);
    let (test_pairs, test_rate) = sample_pairs(&test_sentences, TEST_PAIRS, m, &mut rng);

    let documents: Vec<Utterance> = train_sentences.iter().map(|(u, _)| u.clone()).collect();
    let model = train(&train_pairs, &documents, table, train_cfg, seed)?;

    let mut truths = Vec::with_capacity(test_pairs.len());
    let mut submodel_preds: [Vec<bool>; 4] = Default::default();
    let mut ensemble_preds = Vec::with_capacity(test_pairs.len());
    for pair in &test_pairs {
        let scores = model.submodel_scores(&pair.a, &pair.b, table)?;
        truths.push(pair.score > 0.0);
        for (out, s) in submodel_preds.iter_mut().zip(scores) {
            out.push(s >= 0.5);
        }
        ensemble_preds.push(ensemble_mean(&scores) >= 0.5);
    }

    let mut rows = Vec::with_capacity(5);
    for (name, preds) in SUBMODEL_NAMES.iter().zip(&submodel_preds) {
        let (f1, precision, recall) = prf(preds, &truths);
        rows.push(ModelEvalRow {
            name: name.to_string(),
            f1,
            precision,
            recall,
        });
    }
    let (f1, precision, recall) = prf(&ensemble_preds, &truths);
    rows.push(ModelEvalRow {
        name: "ensemble".to_string(),
        f1,
        precision,
        recall,
    });

    Ok(ModelEvalReport {
        rows,
        train_pairs: train_pairs.len(),
        test_pairs: test_pairs.len(),
        train_positive_rate: train_rate,
        test_positive_rate: test_rate,
    })
}
