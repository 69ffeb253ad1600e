//! Property tests for the tokenizer, string metrics, and pattern algebra.

use proptest::prelude::*;

use halfshot::pattern::{enumerate_candidates, Pattern};
use halfshot::text::{bleu_sym, levenshtein, ngram_overlap, tokenize, NgramUnit, Utterance};

// Exponential edit-sequence search, only usable on short strings.
fn levenshtein_bruteforce(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if a[0] == b[0] {
        return levenshtein_bruteforce(&a[1..], &b[1..]);
    }
    let substitute = levenshtein_bruteforce(&a[1..], &b[1..]);
    let delete = levenshtein_bruteforce(&a[1..], b);
    let insert = levenshtein_bruteforce(a, &b[1..]);
    1 + substitute.min(delete).min(insert)
}

fn short_string() -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::char::range('a', 'e'), 0..=8)
        .prop_map(|cs| cs.into_iter().collect())
}

fn word() -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::char::range('a', 'f'), 1..=4)
        .prop_map(|cs| cs.into_iter().collect())
}

fn sentence(max_len: usize) -> impl Strategy<Value = Utterance> {
    proptest::collection::vec(word(), 1..=max_len)
        .prop_map(|tokens| tokenize(&tokens.join(" ")).unwrap())
}

proptest! {
    #[test]
    fn levenshtein_matches_bruteforce(a in short_string(), b in short_string()) {
        let ca: Vec<char> = a.chars().collect();
        let cb: Vec<char> = b.chars().collect();
        prop_assert_eq!(levenshtein(&a, &b), levenshtein_bruteforce(&ca, &cb));
    }

    #[test]
    fn levenshtein_is_a_metric(a in short_string(), b in short_string(), c in short_string()) {
        let dab = levenshtein(&a, &b);
        let dba = levenshtein(&b, &a);
        prop_assert_eq!(dab, dba);
        prop_assert_eq!(dab == 0, a == b);
        prop_assert!(dab <= levenshtein(&a, &c) + levenshtein(&c, &b));
        prop_assert!(dab <= a.chars().count().max(b.chars().count()));
    }

    #[test]
    fn overlap_and_bleu_are_symmetric_and_bounded(a in sentence(6), b in sentence(6), n in 1usize..4) {
        for unit in [NgramUnit::Word, NgramUnit::Char] {
            let ab = ngram_overlap(&a, &b, n, unit);
            prop_assert_eq!(ab, ngram_overlap(&b, &a, n, unit));
            prop_assert!((0.0..=1.0).contains(&ab));
        }
        let bleu = bleu_sym(&a, &b);
        prop_assert_eq!(bleu, bleu_sym(&b, &a));
        prop_assert!((0.0..=1.0).contains(&bleu));
    }

    #[test]
    fn tokenize_is_stable_on_its_own_raw(a in sentence(8)) {
        prop_assert_eq!(&tokenize(&a.raw).unwrap(), &a);
    }

    #[test]
    fn every_candidate_round_trips(s in sentence(8), k in 1usize..=3, max_span in 1usize..=4) {
        for (pattern, args) in enumerate_candidates(&s, k, max_span) {
            let rebuilt = pattern.instantiate(&args).unwrap();
            prop_assert_eq!(&rebuilt.tokens, &s.tokens);
            // matching recovers a binding that reproduces s; when several
            // bindings exist (a slot value repeating a literal), the match
            // is the leftmost-shortest one
            let matched = pattern.match_utterance(&s).unwrap();
            prop_assert_eq!(&pattern.instantiate(&matched).unwrap().tokens, &s.tokens);
            let lengths = |b: &halfshot::pattern::ArgumentBinding| -> Vec<usize> {
                b.values.iter().map(|v| v.len()).collect()
            };
            prop_assert!(lengths(&matched) <= lengths(&args));
            // rendering parses back to the same pattern
            prop_assert_eq!(&Pattern::parse(&pattern.to_string()).unwrap(), &pattern);
        }
    }

    #[test]
    fn candidate_arity_and_literals_hold(s in sentence(7), k in 1usize..=2) {
        for (pattern, args) in enumerate_candidates(&s, k, 4) {
            prop_assert_eq!(pattern.arity(), k);
            prop_assert_eq!(args.arity(), k);
            prop_assert!(pattern.literal_count() >= 1);
        }
    }
}
