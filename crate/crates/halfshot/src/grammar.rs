//! Sentence-generating user grammar: intents with typed-slot patterns and
//! per-type argument dictionaries. Drives the simulated user and the model
//! evaluation protocol.
//!
//! File format, line oriented:
//!
//! ```text
//! # comment
//! [intent send-email]
//! send an email to __addr
//! write to __addr for me
//! [args addr]
//! bob@domain.com
//! alice@domain.com
//! ```
//!
//! Slot markers are `__<type>`; the engine itself never sees the types —
//! sampled patterns are handed out with positional slots only.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pattern::{ArgumentBinding, Pattern, PatternElement};
use crate::text::{tokenize, Utterance};

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("grammar has no intents")]
    Empty,
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error("duplicate intent name {0:?}")]
    DuplicateIntent(String),
    #[error("pattern {pattern:?} uses undeclared argument type {slot_type:?}")]
    UnknownSlotType { pattern: String, slot_type: String },
    #[error("argument type {0:?} has an empty dictionary")]
    EmptyDictionary(String),
    #[error("intent {0:?} has no patterns")]
    NoPatterns(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrammarElement {
    Literal(String),
    TypedSlot(String),
}

/// A pattern as written in the grammar: literals plus typed slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarPattern {
    pub elements: Vec<GrammarElement>,
}

impl GrammarPattern {
    pub fn arity(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, GrammarElement::TypedSlot(_)))
            .count()
    }

    pub fn slot_types(&self) -> Vec<&str> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                GrammarElement::TypedSlot(t) => Some(t.as_str()),
                GrammarElement::Literal(_) => None,
            })
            .collect()
    }

    /// The engine-facing shape: slot types erased, slots numbered left to
    /// right.
    pub fn to_positional(&self) -> Pattern {
        let mut slot = 0;
        let elements = self
            .elements
            .iter()
            .map(|e| match e {
                GrammarElement::Literal(t) => PatternElement::Literal(t.clone()),
                GrammarElement::TypedSlot(_) => {
                    let s = PatternElement::Slot(slot);
                    slot += 1;
                    s
                }
            })
            .collect();
        Pattern::new(elements).expect("grammar patterns are valid")
    }

    pub fn rendered(&self) -> String {
        self.elements
            .iter()
            .map(|e| match e {
                GrammarElement::Literal(t) => t.clone(),
                GrammarElement::TypedSlot(t) => format!("__{t}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct GrammarIntent {
    pub name: String,
    pub patterns: Vec<GrammarPattern>,
}

#[derive(Debug, Clone)]
pub struct Grammar {
    pub intents: Vec<GrammarIntent>,
    /// type name → list of token-sequence values
    pub dictionaries: HashMap<String, Vec<Vec<String>>>,
}

/// One simulated user request with its ground truth, slot types erased.
#[derive(Debug, Clone)]
pub struct SampledRequest {
    pub utterance: Utterance,
    pub intent: String,
    pub pattern: Pattern,
    pub binding: ArgumentBinding,
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        enum Section {
            None,
            Intent(usize),
            Args(String),
        }
        let mut intents: Vec<GrammarIntent> = Vec::new();
        let mut dictionaries: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        let mut section = Section::None;
        for (ln, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header.strip_suffix(']').ok_or_else(|| {
                    GrammarError::Malformed(ln + 1, format!("unclosed header {line:?}"))
                })?;
                let mut parts = header.split_whitespace();
                match (parts.next(), parts.next(), parts.next()) {
                    (Some("intent"), Some(name), None) => {
                        if intents.iter().any(|i| i.name == name) {
                            return Err(GrammarError::DuplicateIntent(name.to_string()));
                        }
                        intents.push(GrammarIntent {
                            name: name.to_string(),
                            patterns: Vec::new(),
                        });
                        section = Section::Intent(intents.len() - 1);
                    }
                    (Some("args"), Some(ty), None) => {
                        dictionaries.entry(ty.to_string()).or_default();
                        section = Section::Args(ty.to_string());
                    }
                    _ => {
                        return Err(GrammarError::Malformed(
                            ln + 1,
                            format!("bad section header {line:?}"),
                        ))
                    }
                }
                continue;
            }
            match &section {
                Section::None => {
                    return Err(GrammarError::Malformed(
                        ln + 1,
                        "content before any section header".into(),
                    ))
                }
                Section::Intent(idx) => {
                    let mut elements = Vec::new();
                    for chunk in line.split_whitespace() {
                        if let Some(ty) = chunk.strip_prefix("__") {
                            if ty.is_empty() {
                                return Err(GrammarError::Malformed(
                                    ln + 1,
                                    "empty slot type".into(),
                                ));
                            }
                            elements.push(GrammarElement::TypedSlot(ty.to_string()));
                        } else {
                            let toks = tokenize(chunk).map_err(|_| {
                                GrammarError::Malformed(ln + 1, format!("bad literal {chunk:?}"))
                            })?;
                            elements.extend(toks.tokens.into_iter().map(GrammarElement::Literal));
                        }
                    }
                    if elements.is_empty() {
                        return Err(GrammarError::Malformed(ln + 1, "empty pattern".into()));
                    }
                    intents[*idx].patterns.push(GrammarPattern { elements });
                }
                Section::Args(ty) => {
                    let toks = tokenize(line).map_err(|_| {
                        GrammarError::Malformed(ln + 1, format!("bad value {line:?}"))
                    })?;
                    dictionaries
                        .get_mut(ty)
                        .expect("section exists")
                        .push(toks.tokens);
                }
            }
        }
        let grammar = Grammar {
            intents,
            dictionaries,
        };
        grammar.validate()?;
        Ok(grammar)
    }

    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        Grammar::parse(&std::fs::read_to_string(path)?)
    }

    /// The grammar shipped with the crate: 50 intents over mail, web
    /// search, concert booking, travel, calendar, and connected objects.
    pub fn bundled() -> Self {
        Grammar::parse(include_str!("../assets/grammar.txt")).expect("bundled grammar is valid")
    }

    fn validate(&self) -> Result<(), GrammarError> {
        if self.intents.is_empty() {
            return Err(GrammarError::Empty);
        }
        for intent in &self.intents {
            if intent.patterns.is_empty() {
                return Err(GrammarError::NoPatterns(intent.name.clone()));
            }
            for p in &intent.patterns {
                for ty in p.slot_types() {
                    match self.dictionaries.get(ty) {
                        None => {
                            return Err(GrammarError::UnknownSlotType {
                                pattern: p.rendered(),
                                slot_type: ty.to_string(),
                            })
                        }
                        Some(d) if d.is_empty() => {
                            return Err(GrammarError::EmptyDictionary(ty.to_string()))
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    pub fn pattern_count(&self) -> usize {
        self.intents.iter().map(|i| i.patterns.len()).sum()
    }

    /// Every (intent name, pattern) pair in declaration order.
    pub fn all_patterns(&self) -> Vec<(&str, &GrammarPattern)> {
        self.intents
            .iter()
            .flat_map(|i| i.patterns.iter().map(move |p| (i.name.as_str(), p)))
            .collect()
    }

    /// Tokens that appear as literals in any pattern.
    pub fn literal_tokens(&self) -> HashSet<&str> {
        self.intents
            .iter()
            .flat_map(|i| &i.patterns)
            .flat_map(|p| &p.elements)
            .filter_map(|e| match e {
                GrammarElement::Literal(t) => Some(t.as_str()),
                GrammarElement::TypedSlot(_) => None,
            })
            .collect()
    }

    /// Tokens that appear in any dictionary value.
    pub fn dictionary_tokens(&self) -> HashSet<&str> {
        self.dictionaries
            .values()
            .flatten()
            .flatten()
            .map(|t| t.as_str())
            .collect()
    }

    /// Instantiate a specific pattern with uniformly drawn dictionary
    /// values.
    pub fn instantiate_pattern(
        &self,
        intent: &str,
        pattern: &GrammarPattern,
        rng: &mut ChaCha8Rng,
    ) -> SampledRequest {
        let values: Vec<Vec<String>> = pattern
            .slot_types()
            .iter()
            .map(|ty| {
                let dict = &self.dictionaries[*ty];
                dict[rng.gen_range(0..dict.len())].clone()
            })
            .collect();
        let binding = ArgumentBinding { values };
        let positional = pattern.to_positional();
        let utterance = positional
            .instantiate(&binding)
            .expect("dictionary values are non-empty");
        SampledRequest {
            utterance,
            intent: intent.to_string(),
            pattern: positional,
            binding,
        }
    }

    /// Uniform intent, uniform pattern within the intent, uniform value per
    /// slot.
    pub fn sample_request(&self, rng: &mut ChaCha8Rng) -> SampledRequest {
        let intent = &self.intents[rng.gen_range(0..self.intents.len())];
        let pattern = &intent.patterns[rng.gen_range(0..intent.patterns.len())];
        self.instantiate_pattern(&intent.name, pattern, rng)
    }
}
