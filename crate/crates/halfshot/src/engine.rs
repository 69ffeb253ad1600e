//! The online learner: sentence/intent/pattern memories, similarity-driven
//! interpretation, feedback integration, and the retraining schedule.
//!
//! Interpretation runs in up to three steps: exact pattern match, closest-
//! sentence intent detection, then contextual pattern inference against the
//! closest sentence's pattern. Every interaction is expected to be followed
//! by ground-truth feedback, which grows the three memories; the similarity
//! model is retrained periodically from them.
//!
//! Single-writer discipline: interpretation and feedback take exclusive
//! access. A trained model is immutable and swapped in atomically behind an
//! `Arc`, so concurrent readers holding a scorer see either the old or the
//! new model, never a partial one.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{
    enumerate_candidates_capped, match_known, ArgumentBinding, Pattern, PatternError,
};
use crate::sim::{train, EmbeddingTable, LabeledPair, PairScorer, SimilarityModel, TrainConfig};
use crate::text::Utterance;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("pattern inference failed: {0}")]
    PatternInference(String),
    #[error("feedback binding does not instantiate the sentence")]
    InconsistentBinding,
    #[error("need at least 2 stored sentences, have {0}")]
    NotEnoughSentences(usize),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Similarity threshold for attributing a request to a known intent.
    pub epsilon: f64,
    /// Longest token span a single argument may capture during enumeration.
    pub max_span: usize,
    /// Hard cap on the candidate set per request.
    pub candidate_cap: usize,
    /// Retrain after this many interactions since the last training.
    pub retrain_every: usize,
    /// Training also waits for this many distinct intents…
    pub min_intents_for_training: usize,
    /// …and this many stored sentences.
    pub min_sentences_for_training: usize,
    /// Argument contexts averaged per candidate during pattern inference.
    pub context_samples: usize,
    /// Weight of the argument-evidence prior during pattern inference.
    ///
    /// Candidate arguments built from tokens the engine has only ever seen
    /// as pattern literals are almost certainly wrong, and ones built from
    /// tokens it has seen as argument values are likely right; a pure
    /// surface-similarity score cannot tell, because stuffing a request's
    /// distinctive words into a slot makes the reference instantiation
    /// overlap the request even harder. 0 disables the prior.
    pub value_prior_weight: f64,
    /// Skip the exact-match shortcut and always run similarity-based
    /// interpretation.
    pub skip_exact_match: bool,
    /// Pair-corpus cap handed to training.
    pub pair_cap: usize,
    /// Negatives kept per positive when building the pair corpus; `None`
    /// keeps them all (natural imbalance).
    pub negative_ratio: Option<f64>,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        // Interaction-collected corpora keep their natural class imbalance:
        // the epsilon threshold sits at 0.3, and oversampling positives
        // would push cross-intent scores above it.
        let mut train = TrainConfig::default();
        train.rebalance = None;
        train.mlp.weight_decay = 2e-3;
        EngineConfig {
            epsilon: 0.3,
            max_span: 4,
            candidate_cap: 5000,
            retrain_every: 50,
            min_intents_for_training: 5,
            min_sentences_for_training: 20,
            context_samples: 1,
            value_prior_weight: 0.2,
            skip_exact_match: false,
            pair_cap: 1600,
            negative_ratio: None,
            seed: 0,
            train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub pattern: Pattern,
    pub intent: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredSentence {
    pub utterance: Utterance,
    pub intent: u32,
    pub pattern: u32,
    pub binding: ArgumentBinding,
}

/// Why the engine believes what it believes about a request.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub closest: Utterance,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Interpretation {
    /// The request matched a learned pattern outright.
    ExactMatch {
        intent: u32,
        pattern: Pattern,
        binding: ArgumentBinding,
    },
    /// A known intent expressed through a new surface form; the pattern was
    /// inferred by contextual similarity. `reformulation` is the request
    /// re-expressed in the known pattern.
    Inferred {
        intent: u32,
        pattern: Pattern,
        binding: ArgumentBinding,
        evidence: Evidence,
        reformulation: Utterance,
    },
    /// The intent was recognized but no pattern could be inferred; the
    /// caller should ask for help.
    IntentOnly { intent: u32, evidence: Evidence },
    /// Nothing in memory is similar enough: a brand-new intent.
    NewIntent,
}

impl Interpretation {
    pub fn intent(&self) -> Option<u32> {
        match self {
            Interpretation::ExactMatch { intent, .. }
            | Interpretation::Inferred { intent, .. }
            | Interpretation::IntentOnly { intent, .. } => Some(*intent),
            Interpretation::NewIntent => None,
        }
    }

    pub fn pattern(&self) -> Option<&Pattern> {
        match self {
            Interpretation::ExactMatch { pattern, .. }
            | Interpretation::Inferred { pattern, .. } => Some(pattern),
            _ => None,
        }
    }
}

/// What a feedback application changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackOutcome {
    pub intent_added: bool,
    pub pattern_added: bool,
    pub sentence_added: bool,
    pub intent: u32,
    pub pattern: u32,
}

pub struct Engine {
    config: EngineConfig,
    table: EmbeddingTable,
    sentences: Vec<StoredSentence>,
    intents: Vec<IntentRecord>,
    patterns: Vec<PatternRecord>,
    model: Option<Arc<SimilarityModel>>,
    interactions_since_training: usize,
    retrain_count: usize,
    max_candidates_seen: usize,
}

fn token_jaccard(a: &Utterance, b: &Utterance) -> f64 {
    let sa: HashSet<&String> = a.tokens.iter().collect();
    let sb: HashSet<&String> = b.tokens.iter().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Similarity of one anchor sentence against many, using the trained model
/// when available and word-set Jaccard before the first training. Identical
/// token sequences always score 1.
enum AnchorScorer<'a> {
    Model(PairScorer<'a>, &'a Utterance),
    Fallback(&'a Utterance),
}

impl<'a> AnchorScorer<'a> {
    fn score(&self, other: &Utterance) -> f64 {
        match self {
            AnchorScorer::Model(scorer, anchor) => {
                if anchor.tokens == other.tokens {
                    1.0
                } else {
                    scorer.score(other)
                }
            }
            AnchorScorer::Fallback(anchor) => token_jaccard(anchor, other),
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    match k {
        0 => vec![vec![]],
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        3 => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
        // slot alignment search is capped at 3 arguments; beyond that only
        // the left-to-right order is tried
        _ => vec![(0..k).collect()],
    }
}

pub struct InferredPattern {
    pub pattern: Pattern,
    pub binding: ArgumentBinding,
    pub similarity: f64,
    pub reformulation: Utterance,
    pub candidates_scored: usize,
}

impl Engine {
    pub fn new(config: EngineConfig, table: EmbeddingTable) -> Self {
        Engine {
            config,
            table,
            sentences: Vec::new(),
            intents: Vec::new(),
            patterns: Vec::new(),
            model: None,
            interactions_since_training: 0,
            retrain_count: 0,
            max_candidates_seen: 0,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn sentences(&self) -> &[StoredSentence] {
        &self.sentences
    }

    pub fn intents(&self) -> &[IntentRecord] {
        &self.intents
    }

    pub fn patterns(&self) -> &[PatternRecord] {
        &self.patterns
    }

    pub fn model(&self) -> Option<&SimilarityModel> {
        self.model.as_deref()
    }

    pub fn is_trained(&self) -> bool {
        self.model.is_some()
    }

    pub fn retrain_count(&self) -> usize {
        self.retrain_count
    }

    /// Largest candidate set any single request has produced.
    pub fn max_candidates_seen(&self) -> usize {
        self.max_candidates_seen
    }

    pub fn intent_name(&self, id: u32) -> &str {
        &self.intents[id as usize].name
    }

    pub fn intent_id(&self, name: &str) -> Option<u32> {
        self.intents.iter().find(|i| i.name == name).map(|i| i.id)
    }

    fn anchor_scorer<'a>(&'a self, anchor: &'a Utterance) -> AnchorScorer<'a> {
        match &self.model {
            Some(model) => match PairScorer::new(model, &self.table, anchor.clone()) {
                Ok(scorer) => AnchorScorer::Model(scorer, anchor),
                Err(_) => AnchorScorer::Fallback(anchor),
            },
            None => AnchorScorer::Fallback(anchor),
        }
    }

    /// Pairwise similarity as the engine sees it.
    pub fn similarity(&self, a: &Utterance, b: &Utterance) -> f64 {
        if a.tokens == b.tokens {
            return 1.0;
        }
        self.anchor_scorer(a).score(b)
    }

    /// The exact-match path: try every learned pattern.
    pub fn exact_match(&self, s: &Utterance) -> Option<(u32, &Pattern, ArgumentBinding)> {
        match_known(s, self.patterns.iter().map(|r| (&r.pattern, r.intent)))
            .map(|(p, intent, b)| (intent, p, b))
    }

    /// Closest stored sentence by similarity. Returns its intent when the
    /// similarity clears the epsilon threshold; ties keep the earliest
    /// stored sentence.
    pub fn detect_intent(&self, s: &Utterance) -> Option<(u32, &StoredSentence, f64)> {
        if self.sentences.is_empty() {
            return None;
        }
        let scorer = self.anchor_scorer(s);
        let mut best: Option<(usize, f64)> = None;
        for (i, stored) in self.sentences.iter().enumerate() {
            let sim = scorer.score(&stored.utterance);
            if best.map_or(true, |(_, bs)| sim > bs) {
                best = Some((i, sim));
            }
        }
        let (idx, sim) = best.expect("non-empty memory");
        if sim >= self.config.epsilon {
            let stored = &self.sentences[idx];
            Some((stored.intent, stored, sim))
        } else {
            None
        }
    }

    /// Bindings of the requested arity sampled from memory for multi-context
    /// pattern inference. Deterministic for a given engine state and input.
    fn context_bindings(&self, arity: usize, want: usize, s: &Utterance) -> Vec<ArgumentBinding> {
        if want == 0 {
            return Vec::new();
        }
        let pool: Vec<&ArgumentBinding> = self
            .sentences
            .iter()
            .map(|st| &st.binding)
            .filter(|b| b.arity() == arity)
            .collect();
        if pool.is_empty() {
            return Vec::new();
        }
        let mut h: u64 = self.config.seed ^ (self.sentences.len() as u64).rotate_left(17);
        for t in &s.tokens {
            for b in t.as_bytes() {
                h = h.wrapping_mul(0x100000001b3) ^ (*b as u64);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        (0..want)
            .map(|_| pool[rng.gen_range(0..pool.len())].clone())
            .collect()
    }

    /// How much a candidate binding looks like arguments rather than
    /// pattern text, judged from memory: +1 for tokens seen only as
    /// argument values, -1 for tokens seen only as pattern literals, -0.5
    /// for tokens never seen at all, 0 for ambiguous ones. Mean over the
    /// binding's tokens.
    fn argument_evidence(&self, args: &ArgumentBinding) -> f64 {
        let mut value_tokens: HashSet<&str> = HashSet::new();
        for s in &self.sentences {
            for v in &s.binding.values {
                value_tokens.extend(v.iter().map(|t| t.as_str()));
            }
        }
        let mut literal_tokens: HashSet<&str> = HashSet::new();
        for p in &self.patterns {
            for el in p.pattern.elements() {
                if let crate::pattern::PatternElement::Literal(t) = el {
                    literal_tokens.insert(t.as_str());
                }
            }
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for value in &args.values {
            for t in value {
                let v = value_tokens.contains(t.as_str());
                let l = literal_tokens.contains(t.as_str());
                total += match (v, l) {
                    (true, false) => 1.0,
                    (false, true) => -1.0,
                    (true, true) => 0.0,
                    (false, false) => -0.5,
                };
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    /// Infer the pattern of `s` given the closest sentence's pattern `p0`:
    /// enumerate candidate patterns of the same arity, instantiate `p0`
    /// under each candidate's arguments (every slot order for arities up to
    /// 3), and keep the candidate whose instantiation is most similar to
    /// the request. An argument-evidence prior weighs in when the surface
    /// similarity cannot separate candidates; a candidate that reproduces
    /// `s` exactly under `p0` always wins. With `context_samples > 1` the
    /// similarity is averaged over additional argument bindings drawn from
    /// memory.
    pub fn infer_pattern(
        &self,
        s: &Utterance,
        p0: &Pattern,
    ) -> Result<InferredPattern, EngineError> {
        let k = p0.arity();
        assert!(k >= 1, "pattern inference requires at least one slot");
        let candidates =
            enumerate_candidates_capped(s, k, self.config.max_span, self.config.candidate_cap);
        if candidates.is_empty() {
            return Err(EngineError::PatternInference(format!(
                "no candidate with {k} argument(s) fits a {}-token sentence",
                s.len()
            )));
        }
        let n_candidates = candidates.len();
        let perms = permutations(k);
        let extra_contexts =
            self.context_bindings(k, self.config.context_samples.saturating_sub(1), s);
        let scorer = self.anchor_scorer(s);
        let sim_to_s = |u: &Utterance| -> f64 {
            if u.tokens == s.tokens {
                1.0
            } else {
                scorer.score(u)
            }
        };

        struct Best {
            exact: bool,
            adjusted: f64,
            similarity: f64,
            is_p0_shape: bool,
            arg_tokens: usize,
            index: usize,
            perm: usize,
        }
        let mut best: Option<Best> = None;
        for (idx, (cand, args)) in candidates.iter().enumerate() {
            let is_p0_shape = cand == p0;
            let evidence = self.config.value_prior_weight * self.argument_evidence(args);
            for (pidx, perm) in perms.iter().enumerate() {
                let aligned = args.permuted(perm);
                let base = p0.instantiate(&aligned).expect("arity matches");
                let exact = base.tokens == s.tokens;
                let mut similarity = sim_to_s(&base);
                if !extra_contexts.is_empty() {
                    // mean contextual similarity over the sampled bindings
                    let mut total = similarity;
                    for ctx in &extra_contexts {
                        let own = cand.instantiate(ctx).expect("arity matches");
                        let other = p0.instantiate(&ctx.permuted(perm)).expect("arity matches");
                        total += self.similarity(&own, &other);
                    }
                    similarity = total / (1.0 + extra_contexts.len() as f64);
                }
                let challenger = Best {
                    exact,
                    adjusted: similarity + evidence,
                    similarity,
                    is_p0_shape,
                    arg_tokens: aligned.token_count(),
                    index: idx,
                    perm: pidx,
                };
                let wins = match &best {
                    None => true,
                    Some(b) => {
                        // an exact reproduction of s under p0 always wins,
                        // and among exact ones the p0 shape itself does:
                        // that keeps the self-consistency guarantee
                        // independent of the model and the prior
                        (
                            exact,
                            is_p0_shape && exact,
                            challenger.adjusted,
                            std::cmp::Reverse(challenger.arg_tokens),
                        ) > (
                            b.exact,
                            b.is_p0_shape && b.exact,
                            b.adjusted,
                            std::cmp::Reverse(b.arg_tokens),
                        )
                    }
                };
                if wins {
                    best = Some(challenger);
                }
            }
        }
        let best = best.expect("candidate set non-empty");
        let (pattern, binding) = candidates.into_iter().nth(best.index).expect("valid index");
        let reformulation = p0
            .instantiate(&binding.permuted(&perms[best.perm]))
            .expect("arity matches");
        Ok(InferredPattern {
            pattern,
            binding,
            similarity: best.similarity,
            reformulation,
            candidates_scored: n_candidates,
        })
    }

    /// Full interpretation: exact pattern match, then intent detection,
    /// then pattern inference. The `skip_exact_match` variant goes straight
    /// to similarity-based interpretation.
    pub fn interpret(&mut self, s: &Utterance) -> Interpretation {
        if !self.config.skip_exact_match {
            if let Some((intent, pattern, binding)) = self.exact_match(s) {
                let pattern = pattern.clone();
                return Interpretation::ExactMatch {
                    intent,
                    pattern,
                    binding,
                };
            }
        }
        let Some((intent, s0, sim)) = self.detect_intent(s) else {
            return Interpretation::NewIntent;
        };
        let evidence = Evidence {
            closest: s0.utterance.clone(),
            similarity: sim,
        };
        let p0 = self.patterns[s0.pattern as usize].pattern.clone();
        if p0.arity() == 0 {
            // nothing to align: the new form is itself the pattern
            let reformulation = p0.instantiate(&ArgumentBinding::empty()).expect("no slots");
            return Interpretation::Inferred {
                intent,
                pattern: Pattern::literal(s),
                binding: ArgumentBinding::empty(),
                evidence,
                reformulation,
            };
        }
        match self.infer_pattern(s, &p0) {
            Ok(inferred) => {
                self.max_candidates_seen =
                    self.max_candidates_seen.max(inferred.candidates_scored);
                Interpretation::Inferred {
                    intent,
                    pattern: inferred.pattern,
                    binding: inferred.binding,
                    evidence,
                    reformulation: inferred.reformulation,
                }
            }
            Err(_) => Interpretation::IntentOnly { intent, evidence },
        }
    }

    /// Integrate ground-truth feedback: the true intent (by name), pattern,
    /// and binding for a request. Idempotent on repeated identical triples.
    pub fn apply_feedback(
        &mut self,
        s: &Utterance,
        intent_name: &str,
        pattern: &Pattern,
        binding: &ArgumentBinding,
    ) -> Result<FeedbackOutcome, EngineError> {
        let rebuilt = pattern.instantiate(binding)?;
        if rebuilt.tokens != s.tokens {
            return Err(EngineError::InconsistentBinding);
        }
        self.interactions_since_training += 1;

        let (intent, intent_added) = match self.intents.iter().find(|i| i.name == intent_name) {
            Some(r) => (r.id, false),
            None => {
                let id = self.intents.len() as u32;
                self.intents.push(IntentRecord {
                    id,
                    name: intent_name.to_string(),
                });
                (id, true)
            }
        };
        let (pattern_id, pattern_added) = match self
            .patterns
            .iter()
            .position(|r| r.intent == intent && &r.pattern == pattern)
        {
            Some(i) => (i as u32, false),
            None => {
                let id = self.patterns.len() as u32;
                self.patterns.push(PatternRecord {
                    pattern: pattern.clone(),
                    intent,
                });
                (id, true)
            }
        };
        let duplicate = self.sentences.iter().any(|st| {
            st.intent == intent && st.pattern == pattern_id && st.utterance.tokens == s.tokens
        });
        if !duplicate {
            self.sentences.push(StoredSentence {
                utterance: s.clone(),
                intent,
                pattern: pattern_id,
                binding: binding.clone(),
            });
        }
        Ok(FeedbackOutcome {
            intent_added,
            pattern_added,
            sentence_added: !duplicate,
            intent,
            pattern: pattern_id,
        })
    }

    /// All unordered pairs of stored sentences labeled by same-intent, with
    /// negatives subsampled to `negative_ratio` per positive and the whole
    /// corpus uniformly downsampled to `cap`. Interaction labels {0,1} are
    /// emitted on the model's 0..M scale. Deterministic for a given state.
    pub fn build_pair_corpus(
        &self,
        cap: usize,
        negative_ratio: f64,
    ) -> Result<Vec<LabeledPair>, EngineError> {
        if self.sentences.len() < 2 {
            return Err(EngineError::NotEnoughSentences(self.sentences.len()));
        }
        let m = self.config.train.max_score as f64;
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for i in 0..self.sentences.len() {
            for j in (i + 1)..self.sentences.len() {
                if self.sentences[i].intent == self.sentences[j].intent {
                    positives.push((i, j));
                } else {
                    negatives.push((i, j));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.config.seed ^ ((self.sentences.len() as u64) << 20) ^ 0x9a1c,
        );
        let keep_negatives = if negative_ratio.is_finite() {
            ((positives.len() as f64 * negative_ratio).floor() as usize).min(negatives.len())
        } else {
            negatives.len()
        };
        if keep_negatives < negatives.len() {
            negatives = sample_without_replacement(&negatives, keep_negatives, &mut rng);
        }
        let mut all: Vec<((usize, usize), f64)> = positives
            .into_iter()
            .map(|p| (p, m))
            .chain(negatives.into_iter().map(|p| (p, 0.0)))
            .collect();
        if all.len() > cap {
            all = sample_without_replacement(&all, cap, &mut rng);
        }
        Ok(all
            .into_iter()
            .map(|((i, j), score)| LabeledPair {
                a: self.sentences[i].utterance.clone(),
                b: self.sentences[j].utterance.clone(),
                score,
            })
            .collect())
    }

    /// Retrain when enough interactions have accumulated and the memories
    /// are big enough to be worth it. A failed training leaves the previous
    /// model in place; a successful one replaces it atomically.
    pub fn maybe_retrain(&mut self) -> bool {
        if self.interactions_since_training < self.config.retrain_every
            || self.intents.len() < self.config.min_intents_for_training
            || self.sentences.len() < self.config.min_sentences_for_training
        {
            return false;
        }
        let ratio = self.config.negative_ratio.unwrap_or(f64::INFINITY);
        let corpus = match self.build_pair_corpus(self.config.pair_cap, ratio) {
                Ok(c) => c,
                Err(_) => return false,
            };
        let documents: Vec<Utterance> =
            self.sentences.iter().map(|s| s.utterance.clone()).collect();
        let seed = self.config.seed ^ ((self.retrain_count as u64) << 32) ^ 0x7ea1;
        match train(&corpus, &documents, &self.table, &self.config.train, seed) {
            Ok(model) => {
                self.model = Some(Arc::new(model));
                self.interactions_since_training = 0;
                self.retrain_count += 1;
                true
            }
            Err(_) => false,
        }
    }

    /// Check referential integrity of the three memories; used by tests and
    /// snapshot loading.
    pub fn validate(&self) -> Result<(), String> {
        for (i, r) in self.intents.iter().enumerate() {
            if r.id as usize != i {
                return Err(format!("intent {i} has id {}", r.id));
            }
        }
        let mut names: Vec<&str> = self.intents.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.intents.len() {
            return Err("duplicate intent names".into());
        }
        for (i, p) in self.patterns.iter().enumerate() {
            if p.intent as usize >= self.intents.len() {
                return Err(format!("pattern {i} references missing intent {}", p.intent));
            }
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.intent as usize >= self.intents.len() {
                return Err(format!("sentence {i} references missing intent {}", s.intent));
            }
            let Some(p) = self.patterns.get(s.pattern as usize) else {
                return Err(format!(
                    "sentence {i} references missing pattern {}",
                    s.pattern
                ));
            };
            if p.intent != s.intent {
                return Err(format!("sentence {i} disagrees with its pattern's intent"));
            }
            match p.pattern.instantiate(&s.binding) {
                Ok(u) if u.tokens == s.utterance.tokens => {}
                _ => return Err(format!("sentence {i} binding does not instantiate")),
            }
        }
        Ok(())
    }

    pub(crate) fn parts(
        &self,
    ) -> (
        &EngineConfig,
        &[IntentRecord],
        &[PatternRecord],
        &[StoredSentence],
        usize,
        usize,
    ) {
        (
            &self.config,
            &self.intents,
            &self.patterns,
            &self.sentences,
            self.interactions_since_training,
            self.retrain_count,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        config: EngineConfig,
        table: EmbeddingTable,
        intents: Vec<IntentRecord>,
        patterns: Vec<PatternRecord>,
        sentences: Vec<StoredSentence>,
        model: Option<SimilarityModel>,
        interactions_since_training: usize,
        retrain_count: usize,
    ) -> Result<Self, String> {
        let engine = Engine {
            config,
            table,
            sentences,
            intents,
            patterns,
            model: model.map(Arc::new),
            interactions_since_training,
            retrain_count,
            max_candidates_seen: 0,
        };
        engine.validate()?;
        Ok(engine)
    }
}

fn sample_without_replacement<T: Clone>(items: &[T], want: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    debug_assert!(want <= items.len());
    // partial Fisher-Yates over indices, then restore original order
    let mut idx: Vec<usize> = (0..items.len()).collect();
    for i in 0..want {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut chosen = idx[..want].to_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| items[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn utt(s: &str) -> Utterance {
        tokenize(s).unwrap()
    }

    fn pat(s: &str) -> Pattern {
        Pattern::parse(s).unwrap()
    }

    fn bind(values: &[&[&str]]) -> ArgumentBinding {
        ArgumentBinding {
            values: values
                .iter()
                .map(|v| v.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    fn engine() -> Engine {
        Engine::new(
            EngineConfig::default(),
            EmbeddingTable::fallback_with_dimension(16),
        )
    }

    fn teach(e: &mut Engine, sentence: &str, intent: &str, pattern: &str) {
        let s = utt(sentence);
        let p = pat(pattern);
        let b = p
            .match_utterance(&s)
            .expect("teaching sentence matches its pattern");
        e.apply_feedback(&s, intent, &p, &b).unwrap();
    }

    #[test]
    fn empty_memory_detects_nothing() {
        let e = engine();
        assert!(e.detect_intent(&utt("turn on the lights")).is_none());
    }

    #[test]
    fn interpret_on_empty_state_is_new_intent() {
        let mut e = engine();
        assert_eq!(e.interpret(&utt("hello there")), Interpretation::NewIntent);
    }

    #[test]
    fn stored_sentence_detects_its_own_intent_with_fallback() {
        let mut e = engine();
        teach(&mut e, "send an email to bob", "send-email", "send an email to __0");
        let s = utt("send an email to bob");
        let (intent, s0, sim) = e.detect_intent(&s).unwrap();
        assert_eq!(e.intent_name(intent), "send-email");
        assert_eq!(s0.utterance.tokens, s.tokens);
        assert_eq!(sim, 1.0);
    }

    #[test]
    fn exact_match_round_trips_through_interpret() {
        let mut e = engine();
        teach(&mut e, "send an email to bob", "send-email", "send an email to __0");
        match e.interpret(&utt("send an email to alice")) {
            Interpretation::ExactMatch {
                intent,
                pattern,
                binding,
            } => {
                assert_eq!(e.intent_name(intent), "send-email");
                assert_eq!(pattern.to_string(), "send an email to __0");
                assert_eq!(binding, bind(&[&["alice"]]));
            }
            other => panic!("expected exact match, got {other:?}"),
        }
    }

    #[test]
    fn skip_exact_match_variant_goes_through_inference() {
        let mut cfg = EngineConfig::default();
        cfg.skip_exact_match = true;
        let mut e = Engine::new(cfg, EmbeddingTable::fallback_with_dimension(16));
        teach(&mut e, "send an email to bob", "send-email", "send an email to __0");
        match e.interpret(&utt("send an email to alice")) {
            Interpretation::Inferred { intent, .. } => {
                assert_eq!(e.intent_name(intent), "send-email");
            }
            other => panic!("expected inferred, got {other:?}"),
        }
    }

    #[test]
    fn feedback_counts_and_idempotence() {
        let mut e = engine();
        let s = utt("play jazz in lyon");
        let p = pat("play __0 in __1");
        let b = bind(&[&["jazz"], &["lyon"]]);
        let out = e.apply_feedback(&s, "play-music", &p, &b).unwrap();
        assert!(out.intent_added && out.pattern_added && out.sentence_added);
        assert_eq!(
            (e.intents.len(), e.patterns.len(), e.sentences.len()),
            (1, 1, 1)
        );

        // known intent, new pattern
        let s2 = utt("put jazz on in lyon");
        let p2 = pat("put __0 on in __1");
        let out = e
            .apply_feedback(&s2, "play-music", &p2, &bind(&[&["jazz"], &["lyon"]]))
            .unwrap();
        assert!(!out.intent_added && out.pattern_added && out.sentence_added);
        assert_eq!(
            (e.intents.len(), e.patterns.len(), e.sentences.len()),
            (1, 2, 2)
        );

        // repeated identical feedback: state unchanged
        let out = e.apply_feedback(&s, "play-music", &p, &b).unwrap();
        assert!(!out.intent_added && !out.pattern_added && !out.sentence_added);
        assert_eq!(
            (e.intents.len(), e.patterns.len(), e.sentences.len()),
            (1, 2, 2)
        );
        e.validate().unwrap();
    }

    #[test]
    fn inconsistent_binding_is_rejected() {
        let mut e = engine();
        let err = e.apply_feedback(
            &utt("send a letter"),
            "send",
            &pat("send __0 now"),
            &bind(&[&["letter"]]),
        );
        assert!(matches!(err, Err(EngineError::InconsistentBinding)));
    }

    #[test]
    fn pair_corpus_labels_by_same_intent() {
        let mut e = engine();
        teach(&mut e, "send an email to bob", "mail", "send an email to __0");
        teach(&mut e, "write an email to alice", "mail", "write an email to __0");
        teach(&mut e, "play jazz in lyon", "music", "play __0 in __1");
        let corpus = e.build_pair_corpus(100, f64::INFINITY).unwrap();
        assert_eq!(corpus.len(), 3);
        let positives = corpus.iter().filter(|p| p.score > 0.0).count();
        assert_eq!(positives, 1);
        // labels live on the 0..M scale
        assert!(corpus.iter().all(|p| p.score == 0.0 || p.score == 5.0));
    }

    #[test]
    fn pair_corpus_needs_two_sentences() {
        let mut e = engine();
        teach(&mut e, "send an email to bob", "mail", "send an email to __0");
        assert!(matches!(
            e.build_pair_corpus(10, 1.0),
            Err(EngineError::NotEnoughSentences(1))
        ));
    }

    #[test]
    fn infer_pattern_self_consistency() {
        let mut e = engine();
        teach(
            &mut e,
            "switch on the lamp in paris",
            "turn-on",
            "switch on the __0 in __1",
        );
        let p0 = pat("switch on the __0 in __1");
        let s = utt("switch on the heater in lyon");
        let inferred = e.infer_pattern(&s, &p0).unwrap();
        assert_eq!(inferred.pattern, p0);
        assert_eq!(inferred.binding, bind(&[&["heater"], &["lyon"]]));
        assert_eq!(inferred.similarity, 1.0);
        assert_eq!(inferred.reformulation.tokens, s.tokens);
    }

    #[test]
    fn infer_pattern_too_short_sentence_fails() {
        let e = engine();
        let p0 = pat("a __0 b __1 c __2");
        let err = e.infer_pattern(&utt("x y"), &p0);
        assert!(matches!(err, Err(EngineError::PatternInference(_))));
    }

    #[test]
    fn interpret_degrades_to_intent_only_when_inference_impossible() {
        let mut cfg = EngineConfig::default();
        cfg.epsilon = 0.1;
        let mut e = Engine::new(cfg, EmbeddingTable::fallback_with_dimension(16));
        teach(
            &mut e,
            "book a ticket from paris to lyon on monday",
            "book-travel",
            "book a ticket from __0 to __1 on __2",
        );
        // shares words (above epsilon on jaccard) but too short for 3 arguments
        match e.interpret(&utt("book paris lyon")) {
            Interpretation::IntentOnly { intent, .. } => {
                assert_eq!(e.intent_name(intent), "book-travel");
            }
            other => panic!("expected intent-only, got {other:?}"),
        }
    }

    #[test]
    fn retrain_gate_and_model_swap() {
        let mut cfg = EngineConfig::default();
        cfg.retrain_every = 5;
        cfg.min_intents_for_training = 2;
        cfg.min_sentences_for_training = 4;
        cfg.train.mlp.hidden = vec![8, 8];
        cfg.train.mlp.epochs = 2;
        cfg.train.forest.n_trees = 5;
        cfg.train.gbt.rounds = 5;
        let mut e = Engine::new(cfg, EmbeddingTable::fallback_with_dimension(8));
        teach(&mut e, "send an email to bob", "mail", "send an email to __0");
        teach(&mut e, "write to alice please", "mail", "write to __0 please");
        assert!(!e.maybe_retrain(), "below thresholds");
        assert!(!e.is_trained());
        teach(&mut e, "play jazz in lyon", "music", "play __0 in __1");
        teach(&mut e, "play rock in oslo", "music", "play __0 in __1");
        teach(&mut e, "book a flight to rome", "travel", "book a flight to __0");
        assert!(e.maybe_retrain());
        assert!(e.is_trained());
        // retraining never changes the memories
        assert_eq!(
            (e.intents.len(), e.patterns.len(), e.sentences.len()),
            (3, 4, 5)
        );
        e.validate().unwrap();
    }

    #[test]
    fn raw_positive_rate_on_grammar_memory_is_a_few_percent() {
        // same-intent pairs are naturally rare; the uncapped corpus on a
        // grammar-generated memory sits in the low single digits
        let g = crate::grammar::Grammar::bundled();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut e = engine();
        for _ in 0..200 {
            let req = g.sample_request(&mut rng);
            e.apply_feedback(&req.utterance, &req.intent, &req.pattern, &req.binding)
                .unwrap();
        }
        let corpus = e.build_pair_corpus(usize::MAX, f64::INFINITY).unwrap();
        let positives = corpus.iter().filter(|p| p.score > 0.0).count();
        let rate = positives as f64 / corpus.len() as f64;
        assert!((0.01..=0.06).contains(&rate), "positive rate {rate:.4}");
    }

    #[test]
    fn raising_epsilon_never_creates_a_known_intent() {
        let mut e = engine();
        teach(&mut e, "send an email to bob", "mail", "send an email to __0");
        let s = utt("completely unrelated words here");
        let verdict_low = e.detect_intent(&s).is_some();
        e.config.epsilon = 0.9;
        let verdict_high = e.detect_intent(&s).is_some();
        assert!(!verdict_high || verdict_low);
    }
}
