//! Sentence templates mixing literal tokens and argument slots.
//!
//! A pattern like `send an email to __0` instantiates to a sentence by
//! substituting token spans into its slots, and conversely a sentence can be
//! matched against a pattern to recover the spans. `enumerate_candidates`
//! produces every slotted template a sentence could have come from, which is
//! the search space for inferring the pattern of a never-seen sentence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::Utterance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("binding has {got} values but pattern has {want} slots")]
    ArityMismatch { want: usize, got: usize },
    #[error("argument value for slot {0} is empty")]
    EmptyArgument(usize),
    #[error("pattern has no elements")]
    Empty,
    #[error("literal token {0:?} is reserved for slot markers")]
    ReservedLiteral(String),
    #[error("slot indices must appear in left-to-right order starting at 0")]
    SlotOrder,
    #[error("unrecognized slot marker {0:?}")]
    BadSlotMarker(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternElement {
    Literal(String),
    Slot(usize),
}

/// An ordered mix of literal tokens and argument slots. Slot indices run
/// 0..arity in left-to-right order of appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    elements: Vec<PatternElement>,
    arity: usize,
}

/// One token span per slot of the pattern it binds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArgumentBinding {
    pub values: Vec<Vec<String>>,
}

impl ArgumentBinding {
    pub fn empty() -> Self {
        ArgumentBinding { values: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.values.len()
    }

    /// Total token count across all argument values.
    pub fn token_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// The same values fed to slots in a permuted order: value `i` of the
    /// result is `values[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> ArgumentBinding {
        ArgumentBinding {
            values: perm.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

fn is_slot_marker(token: &str) -> bool {
    token.len() > 2 && token.starts_with("__") && token[2..].chars().all(|c| c.is_ascii_digit())
}

impl Pattern {
    /// Build from elements, validating the slot-order invariant and the
    /// reservation of `__<digits>` tokens for slot markers.
    pub fn new(elements: Vec<PatternElement>) -> Result<Self, PatternError> {
        if elements.is_empty() {
            return Err(PatternError::Empty);
        }
        let mut next = 0;
        for el in &elements {
            match el {
                PatternElement::Slot(i) => {
                    if *i != next {
                        return Err(PatternError::SlotOrder);
                    }
                    next += 1;
                }
                PatternElement::Literal(t) => {
                    if is_slot_marker(t) || t.is_empty() {
                        return Err(PatternError::ReservedLiteral(t.clone()));
                    }
                }
            }
        }
        Ok(Pattern {
            elements,
            arity: next,
        })
    }

    /// A pattern consisting of the sentence's tokens as literals.
    pub fn literal(s: &Utterance) -> Self {
        Pattern {
            elements: s
                .tokens
                .iter()
                .map(|t| PatternElement::Literal(t.clone()))
                .collect(),
            arity: 0,
        }
    }

    pub fn elements(&self) -> &[PatternElement] {
        &self.elements
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn literal_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, PatternElement::Literal(_)))
            .count()
    }

    /// Parse the textual rendering: whitespace-separated tokens where
    /// `__<digits>` marks a slot. Inverse of `to_string`.
    pub fn parse(text: &str) -> Result<Self, PatternError> {
        let mut elements = Vec::new();
        for tok in text.split_whitespace() {
            if is_slot_marker(tok) {
                elements.push(PatternElement::Slot(tok[2..].parse().unwrap()));
            } else if tok.starts_with("__") && tok.len() > 2 {
                return Err(PatternError::BadSlotMarker(tok.to_string()));
            } else {
                elements.push(PatternElement::Literal(tok.to_lowercase()));
            }
        }
        Pattern::new(elements)
    }

    /// Substitute the binding's values into the slots.
    pub fn instantiate(&self, args: &ArgumentBinding) -> Result<Utterance, PatternError> {
        if args.arity() != self.arity {
            return Err(PatternError::ArityMismatch {
                want: self.arity,
                got: args.arity(),
            });
        }
        let mut tokens = Vec::new();
        for el in &self.elements {
            match el {
                PatternElement::Literal(t) => tokens.push(t.clone()),
                PatternElement::Slot(i) => {
                    if args.values[*i].is_empty() {
                        return Err(PatternError::EmptyArgument(*i));
                    }
                    tokens.extend(args.values[*i].iter().cloned());
                }
            }
        }
        Ok(Utterance::from_tokens(tokens))
    }

    /// Match a sentence against this pattern. Returns the binding that
    /// reproduces the sentence under `instantiate`, or `None`. When several
    /// bindings exist (adjacent slots), earlier slots capture the fewest
    /// tokens (leftmost-shortest).
    pub fn match_utterance(&self, s: &Utterance) -> Option<ArgumentBinding> {
        fn go(
            elements: &[PatternElement],
            tokens: &[String],
            out: &mut Vec<Vec<String>>,
        ) -> bool {
            match elements.first() {
                None => tokens.is_empty(),
                Some(PatternElement::Literal(lit)) => {
                    tokens.first() == Some(lit) && go(&elements[1..], &tokens[1..], out)
                }
                Some(PatternElement::Slot(_)) => {
                    for take in 1..=tokens.len() {
                        out.push(tokens[..take].to_vec());
                        if go(&elements[1..], &tokens[take..], out) {
                            return true;
                        }
                        out.pop();
                    }
                    false
                }
            }
        }
        let mut values = Vec::new();
        if go(&self.elements, &s.tokens, &mut values) {
            Some(ArgumentBinding { values })
        } else {
            None
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for el in &self.elements {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            match el {
                PatternElement::Literal(t) => write!(f, "{t}")?,
                PatternElement::Slot(i) => write!(f, "__{i}")?,
            }
        }
        Ok(())
    }
}

/// Try every known pattern against the sentence. If several match, prefer
/// the one with the most literal tokens, then the fewest captured argument
/// tokens, then the lexicographically smallest rendering.
pub fn match_known<'a, I>(s: &Utterance, patterns: I) -> Option<(&'a Pattern, u32, ArgumentBinding)>
where
    I: IntoIterator<Item = (&'a Pattern, u32)>,
{
    let mut best: Option<(&Pattern, u32, ArgumentBinding, String)> = None;
    for (p, intent) in patterns {
        if let Some(binding) = p.match_utterance(s) {
            let rendering = p.to_string();
            let better = match &best {
                None => true,
                Some((bp, _, bb, br)) => {
                    let key = (
                        std::cmp::Reverse(p.literal_count()),
                        binding.token_count(),
                        &rendering,
                    );
                    let best_key = (
                        std::cmp::Reverse(bp.literal_count()),
                        bb.token_count(),
                        br,
                    );
                    key < best_key
                }
            };
            if better {
                best = Some((p, intent, binding, rendering));
            }
        }
    }
    best.map(|(p, i, b, _)| (p, i, b))
}

/// All ways to carve `k` pairwise-disjoint, non-adjacent, contiguous token
/// spans of length 1..=`max_span` out of the sentence, leaving at least one
/// literal token. Slots are numbered left to right, so every candidate
/// satisfies `p.instantiate(&args) == s` by construction. Candidates are
/// emitted in span-position order.
pub fn enumerate_candidates(
    s: &Utterance,
    k: usize,
    max_span: usize,
) -> Vec<(Pattern, ArgumentBinding)> {
    assert!(k >= 1, "candidate arity must be at least 1");
    assert!(max_span >= 1, "max_span must be at least 1");
    let n = s.tokens.len();
    let mut out = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new(); // (start, len)

    fn emit(s: &Utterance, spans: &[(usize, usize)], out: &mut Vec<(Pattern, ArgumentBinding)>) {
        let covered: usize = spans.iter().map(|&(_, l)| l).sum();
        if covered == s.tokens.len() {
            return; // literal-remains rule
        }
        let mut elements = Vec::new();
        let mut values = Vec::new();
        let mut pos = 0;
        for (slot, &(start, len)) in spans.iter().enumerate() {
            for t in &s.tokens[pos..start] {
                elements.push(PatternElement::Literal(t.clone()));
            }
            elements.push(PatternElement::Slot(slot));
            values.push(s.tokens[start..start + len].to_vec());
            pos = start + len;
        }
        for t in &s.tokens[pos..] {
            elements.push(PatternElement::Literal(t.clone()));
        }
        // Reserved-looking literals can occur in arbitrary input; such a
        // candidate would not round-trip through rendering, so skip it.
        match Pattern::new(elements) {
            Ok(p) => out.push((p, ArgumentBinding { values })),
            Err(_) => {}
        }
    }

    fn go(
        s: &Utterance,
        n: usize,
        k: usize,
        max_span: usize,
        from: usize,
        spans: &mut Vec<(usize, usize)>,
        out: &mut Vec<(Pattern, ArgumentBinding)>,
    ) {
        if spans.len() == k {
            emit(s, spans, out);
            return;
        }
        for start in from..n {
            for len in 1..=max_span.min(n - start) {
                spans.push((start, len));
                // +1 enforces the gap between consecutive spans
                go(s, n, k, max_span, start + len + 1, spans, out);
                spans.pop();
            }
        }
    }

    go(s, n, k, max_span, 0, &mut spans, &mut out);
    out
}

/// `enumerate_candidates` trimmed to at most `cap` entries, preferring
/// candidates with the shortest total argument length; ties keep the
/// enumeration order. Output is deterministic.
pub fn enumerate_candidates_capped(
    s: &Utterance,
    k: usize,
    max_span: usize,
    cap: usize,
) -> Vec<(Pattern, ArgumentBinding)> {
    let mut all = enumerate_candidates(s, k, max_span);
    if all.len() > cap {
        let mut idx: Vec<usize> = (0..all.len()).collect();
        idx.sort_by_key(|&i| (all[i].1.token_count(), i));
        idx.truncate(cap);
        idx.sort_unstable();
        let mut keep = idx.into_iter();
        let mut next = keep.next();
        let mut i = 0;
        all.retain(|_| {
            let hit = next == Some(i);
            if hit {
                next = keep.next();
            }
            i += 1;
            hit
        });
    }
    all
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

    #[test]
    fn instantiate_substitutes_slots() {
        let p = pat("switch on the __0 in __1");
        let got = p
            .instantiate(&bind(&[&["television"], &["paris"]]))
            .unwrap();
        assert_eq!(got.joined(), "switch on the television in paris");
    }

    #[test]
    fn instantiate_no_slots_is_identity() {
        let p = pat("what time is it");
        assert_eq!(
            p.instantiate(&ArgumentBinding::empty()).unwrap().joined(),
            "what time is it"
        );
    }

    #[test]
    fn instantiate_multi_token_span() {
        let p = pat("__0 please");
        let got = p.instantiate(&bind(&[&["turn", "it", "off"]])).unwrap();
        assert_eq!(got.joined(), "turn it off please");
    }

    #[test]
    fn instantiate_arity_mismatch_errors() {
        let p = pat("send __0");
        assert_eq!(
            p.instantiate(&ArgumentBinding::empty()),
            Err(PatternError::ArityMismatch { want: 1, got: 0 })
        );
    }

    #[test]
    fn match_recovers_binding() {
        let p = pat("switch on the __0 in __1");
        let b = p.match_utterance(&utt("switch on the television in paris")).unwrap();
        assert_eq!(b, bind(&[&["television"], &["paris"]]));
    }

    #[test]
    fn match_literal_pattern_gives_empty_binding() {
        let s = utt("send mail now");
        let p = Pattern::literal(&s);
        assert_eq!(p.match_utterance(&s), Some(ArgumentBinding::empty()));
    }

    #[test]
    fn match_rejects_literal_mismatch() {
        let p = pat("send __0 later");
        assert_eq!(p.match_utterance(&utt("send mail now")), None);
    }

    #[test]
    fn match_adjacent_slots_leftmost_shortest() {
        let p = Pattern::new(vec![
            PatternElement::Slot(0),
            PatternElement::Slot(1),
            PatternElement::Literal("end".into()),
        ])
        .unwrap();
        let b = p.match_utterance(&utt("a b c end")).unwrap();
        assert_eq!(b, bind(&[&["a"], &["b", "c"]]));
    }

    #[test]
    fn match_known_prefers_more_literals() {
        let p1 = pat("send an email to __0");
        let p2 = pat("__0 an email to __1");
        let s = utt("send an email to bob");
        let (p, intent, b) = match_known(&s, [(&p2, 2u32), (&p1, 1u32)]).unwrap();
        assert_eq!(p, &p1);
        assert_eq!(intent, 1);
        assert_eq!(b, bind(&[&["bob"]]));
    }

    #[test]
    fn match_known_empty_memory_is_none() {
        assert!(match_known(&utt("hello there"), []).is_none());
    }

    #[test]
    fn enumerate_seven_candidates_for_len_four() {
        let s = utt("turn on kitchen lights");
        let got = enumerate_candidates(&s, 1, 2);
        assert_eq!(got.len(), 7);
        for (p, args) in &got {
            assert_eq!(p.instantiate(args).unwrap(), s);
        }
    }

    #[test]
    fn enumerate_never_emits_all_slot_pattern() {
        let s = utt("alpha beta gamma");
        for (p, _) in enumerate_candidates(&s, 1, s.len()) {
            assert!(p.literal_count() >= 1);
        }
    }

    #[test]
    fn enumerate_adjacent_spans_excluded() {
        let s = utt("a b");
        assert!(enumerate_candidates(&s, 2, 1).is_empty());
    }

    #[test]
    fn enumerate_arity_too_large_is_empty() {
        let s = utt("a b c");
        assert!(enumerate_candidates(&s, 3, 1).is_empty());
    }

    #[test]
    fn cap_prefers_short_arguments() {
        let s = utt("one two three four five six");
        let full = enumerate_candidates(&s, 1, 4);
        let capped = enumerate_candidates_capped(&s, 1, 4, 6);
        assert_eq!(capped.len(), 6);
        assert!(full.len() > 6);
        let max_kept = capped.iter().map(|(_, a)| a.token_count()).max().unwrap();
        let single_token = full.iter().filter(|(_, a)| a.token_count() == 1).count();
        assert_eq!(single_token, 6);
        assert_eq!(max_kept, 1);
    }

    #[test]
    fn rendering_round_trips() {
        let p = pat("get me the cost for a ticket to __0 on __1");
        assert_eq!(Pattern::parse(&p.to_string()).unwrap(), p);
        assert_eq!(p.to_string(), "get me the cost for a ticket to __0 on __1");
    }

    #[test]
    fn parse_rejects_bad_markers_and_order() {
        assert!(matches!(
            Pattern::parse("send __loc now"),
            Err(PatternError::BadSlotMarker(_))
        ));
        assert!(matches!(
            Pattern::parse("send __1 now"),
            Err(PatternError::SlotOrder)
        ));
        assert!(matches!(Pattern::parse("  "), Err(PatternError::Empty)));
    }

    // Exhaustive reference enumeration: test every assignment of token
    // positions to k ordered spans directly from the constraints.
    fn oracle_enumerate(s: &Utterance, k: usize, max_span: usize) -> Vec<Vec<(usize, usize)>> {
        let n = s.tokens.len();
        let mut out = Vec::new();
        let mut all_spans = Vec::new();
        for start in 0..n {
            for len in 1..=max_span.min(n - start) {
                all_spans.push((start, len));
            }
        }
        fn choose(
            all: &[(usize, usize)],
            k: usize,
            n: usize,
            acc: &mut Vec<(usize, usize)>,
            from: usize,
            out: &mut Vec<Vec<(usize, usize)>>,
        ) {
            if acc.len() == k {
                let covered: usize = acc.iter().map(|&(_, l)| l).sum();
                if covered < n {
                    out.push(acc.clone());
                }
                return;
            }
            for i in from..all.len() {
                let (st, len) = all[i];
                if let Some(&(pst, plen)) = acc.last() {
                    if st < pst + plen + 1 {
                        continue;
                    }
                }
                acc.push((st, len));
                choose(all, k, n, acc, i + 1, out);
                acc.pop();
            }
        }
        choose(&all_spans, k, n, &mut Vec::new(), 0, &mut out);
        out.sort();
        out
    }

    #[test]
    fn enumeration_matches_bruteforce_oracle() {
        let sentences = [
            "a", "a b", "a b c", "a b c d", "a b c d e", "a b c d e f g h",
        ];
        for raw in sentences {
            let s = utt(raw);
            for k in 1..=3 {
                for max_span in 1..=4 {
                    let got: Vec<Vec<(usize, usize)>> = enumerate_candidates(&s, k, max_span)
                        .iter()
                        .map(|(p, args)| {
                            let mut spans = Vec::new();
                            let mut pos = 0;
                            let mut slot = 0;
                            for el in p.elements() {
                                match el {
                                    PatternElement::Literal(_) => pos += 1,
                                    PatternElement::Slot(_) => {
                                        let len = args.values[slot].len();
                                        spans.push((pos, len));
                                        pos += len;
                                        slot += 1;
                                    }
                                }
                            }
                            spans
                        })
                        .collect();
                    let mut got_sorted = got.clone();
                    got_sorted.sort();
                    got_sorted.dedup();
                    assert_eq!(got_sorted.len(), got.len(), "duplicates for {raw} k={k}");
                    assert_eq!(
                        got_sorted,
                        oracle_enumerate(&s, k, max_span),
                        "mismatch for {raw:?} k={k} max_span={max_span}"
                    );
                }
            }
        }
    }
}
