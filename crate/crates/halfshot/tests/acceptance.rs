//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured numbers.
//!
//! The ten-seed simulation pool is shared between the accuracy-band and
//! argument-count-trend criteria; everything is seeded and reproducible.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::HashSet;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use halfshot::engine::{Engine, EngineConfig};
use halfshot::grammar::Grammar;
use halfshot::pattern::{enumerate_candidates, Pattern};
use halfshot::sim::{
    decode_output, encode_target, ensemble_mean, sts, train, EmbeddingTable, LabeledPair, Mlp,
    MlpConfig, Scheme, TrainConfig,
};
use halfshot::simulate::{eval_model_protocol, run_simulation, SimulationReport, Variant};
use halfshot::store;
use halfshot::text::{levenshtein, tokenize, Utterance};

const SIM_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const EVAL_SEEDS: std::ops::RangeInclusive<u64> = 1..=5;

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

static AIDME_POOL: OnceLock<Vec<SimulationReport>> = OnceLock::new();

fn aidme_pool() -> &'static [SimulationReport] {
    AIDME_POOL.get_or_init(|| {
        let grammar = Grammar::bundled();
        SIM_SEEDS
            .map(|seed| {
                run_simulation(
                    &grammar,
                    700,
                    Variant::Aidme,
                    seed,
                    EngineConfig::default(),
                    EmbeddingTable::fallback_only(),
                )
            })
            .collect()
    })
}

fn mean<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// A small but real training config so structural checks run quickly.
fn compact_train_config() -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.mlp.hidden = vec![16, 16];
    cfg.mlp.epochs = 8;
    cfg.forest.n_trees = 24;
    cfg.gbt.rounds = 24;
    cfg
}

fn trained_small_model() -> (halfshot::sim::SimilarityModel, EmbeddingTable) {
    let grammar = Grammar::bundled();
    let table = EmbeddingTable::fallback_only();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut sentences = Vec::new();
    let mut seen = HashSet::new();
    while sentences.len() < 60 {
        let req = grammar.sample_request(&mut rng);
        if seen.insert(req.utterance.joined()) {
            sentences.push((req.utterance, req.intent));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..sentences.len() {
        for j in (i + 1)..sentences.len() {
            pairs.push(LabeledPair {
                a: sentences[i].0.clone(),
                b: sentences[j].0.clone(),
                score: if sentences[i].1 == sentences[j].1 { 5.0 } else { 0.0 },
            });
        }
    }
    pairs.truncate(900);
    let docs: Vec<Utterance> = sentences.iter().map(|(u, _)| u.clone()).collect();
    let model = train(&pairs, &docs, &table, &compact_train_config(), 11).unwrap();
    (model, table)
}

#[test]
fn criterion_1_model_f1_band() {
    let grammar = Grammar::bundled();
    let table = EmbeddingTable::fallback_only();
    let config = TrainConfig::default();
    let mut runs = Vec::new();
    let mut slowest = 0.0f64;
    for seed in EVAL_SEEDS {
        let t0 = Instant::now();
        runs.push(eval_model_protocol(&grammar, seed, &table, &config).unwrap());
        slowest = slowest.max(t0.elapsed().as_secs_f64());
    }
    let n_rows = runs[0].rows.len();
    let mean_f1: Vec<(String, f64)> = (0..n_rows)
        .map(|r| {
            (
                runs[0].rows[r].name.clone(),
                mean(runs.iter().map(|run| run.rows[r].f1)),
            )
        })
        .collect();
    let ensemble = mean_f1.last().unwrap().1;
    let best_submodel = mean_f1[..n_rows - 1]
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let ok_band = ensemble >= 0.75;
    let ok_order = mean_f1[..n_rows - 1].iter().all(|(_, f1)| ensemble >= *f1);
    let ok_time = slowest <= 15.0 * 60.0;
    println!(
        "acceptance criterion 1 (model F1 band over {} seeds): {} — ensemble {:.3} (need >= 0.75), best submodel {} {:.3}, slowest seed {:.1}s (limit 900s)",
        runs.len(),
        verdict(ok_band && ok_order && ok_time),
        ensemble,
        best_submodel.0,
        best_submodel.1,
        slowest
    );
    for (name, f1) in &mean_f1 {
        println!("    {name:<22} mean F1 {f1:.3}");
    }
    assert!(ok_band, "ensemble mean F1 {ensemble:.3} below 0.75");
    assert!(ok_order, "a submodel beat the ensemble: {mean_f1:?}");
    assert!(ok_time, "a seed took {slowest:.1}s");
}

#[test]
fn criterion_2_simulation_accuracy_bands() {
    let pool = aidme_pool();
    let intent_all = mean(pool.iter().map(|r| r.intent_accuracy.all));
    let intent_new = mean(pool.iter().map(|r| r.intent_accuracy.new));
    let pattern_new = mean(pool.iter().map(|r| r.pattern_accuracy.new));
    let known_exact = pool.iter().all(|r| r.pattern_accuracy.known == 1.0);

    let grammar = Grammar::bundled();
    let mut oneshot_ok = true;
    for seed in SIM_SEEDS {
        let r = run_simulation(
            &grammar,
            700,
            Variant::Oneshot,
            seed,
            EngineConfig::default(),
            EmbeddingTable::fallback_only(),
        );
        oneshot_ok &= r.intent_accuracy.new == 0.0
            && r.pattern_accuracy.new == 0.0
            && r.pattern_accuracy.known == 1.0;
    }

    let ok = intent_all >= 0.80
        && intent_new >= 0.75
        && known_exact
        && pattern_new >= 0.30
        && oneshot_ok;
    println!(
        "acceptance criterion 2 (simulation accuracy bands, {} seeds x 700): {} — intent all {:.3} (>=0.80), intent new {:.3} (>=0.75), pattern known exact-1.0 {}, pattern new {:.3} (>=0.30), oneshot structural rows {}",
        pool.len(),
        verdict(ok),
        intent_all,
        intent_new,
        known_exact,
        pattern_new,
        oneshot_ok
    );
    assert!(intent_all >= 0.80, "intent accuracy {intent_all:.3}");
    assert!(intent_new >= 0.75, "new-intent accuracy {intent_new:.3}");
    assert!(known_exact, "a seed missed exact known-pattern matching");
    assert!(pattern_new >= 0.30, "new-pattern discovery {pattern_new:.3}");
    assert!(oneshot_ok, "oneshot rows are not structural");
}

#[test]
fn criterion_3_argument_count_trend() {
    // pool the per-arity event counts over all seeds, then compare rates
    let pool = aidme_pool();
    let mut hits = [0usize; 3];
    let mut totals = [0usize; 3];
    for report in pool {
        for b in &report.arg_buckets {
            hits[b.arity - 1] += (b.overall * b.n_overall as f64).round() as usize;
            totals[b.arity - 1] += b.n_overall;
        }
    }
    let rates: Vec<f64> = (0..3).map(|i| hits[i] as f64 / totals[i] as f64).collect();
    let ok = rates[0] > rates[1] && rates[1] > rates[2];
    println!(
        "acceptance criterion 3 (pattern accuracy decreases with argument count): {} — {:.3} ({} events) > {:.3} ({}) > {:.3} ({})",
        verdict(ok),
        rates[0],
        totals[0],
        rates[1],
        totals[1],
        rates[2],
        totals[2]
    );
    assert!(ok, "bucket accuracies not strictly decreasing: {rates:?}");
}

#[test]
fn criterion_4_property_suites() {
    let mut all_ok = true;
    let mut suite = |name: &str, ok: bool| {
        println!("    suite {name}: {}", verdict(ok));
        all_ok &= ok;
        ok
    };

    // similarity symmetry over 1,000 random pairs
    {
        let (model, table) = trained_small_model();
        let grammar = Grammar::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(0x51);
        let mut ok = true;
        for _ in 0..1000 {
            let a = grammar.sample_request(&mut rng).utterance;
            let b = grammar.sample_request(&mut rng).utterance;
            let ab = model.score(&a, &b, &table).unwrap();
            let ba = model.score(&b, &a, &table).unwrap();
            ok &= ab == ba && (0.0..=1.0).contains(&ab);
        }
        assert!(suite("similarity symmetry (1000 pairs)", ok));
    }

    // encode/decode round trip exact
    {
        let mut ok = true;
        for k in 0..=500 {
            let score = k as f64 * 0.01;
            for scheme in [Scheme::Binary, Scheme::NClass] {
                let enc = encode_target(score, scheme, 5).unwrap();
                let dec = decode_output(&enc, scheme, 5).unwrap();
                ok &= (dec - score).abs() < 1e-9;
            }
        }
        assert!(suite("encode/decode round trip", ok));
    }

    // ensemble-mean identity with stub submodels
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0x52);
        let mut ok = ensemble_mean(&[0.2, 0.4, 0.6, 0.8]) == 0.5;
        for _ in 0..200 {
            let stubs: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let expected = stubs.iter().sum::<f64>() / 4.0;
            ok &= ensemble_mean(&stubs) == expected.clamp(0.0, 1.0);
        }
        assert!(suite("ensemble-mean identity (stub submodels)", ok));
    }

    // perceptron gradient vs central finite differences, 10-sample batch
    {
        let net = Mlp::new(5, &[6, 4], 3, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(0x53);
        let inputs: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let mut t = vec![0.0; 3];
                t[rng.gen_range(0..3)] = 0.3;
                t[rng.gen_range(0..3)] += 0.7;
                t
            })
            .collect();
        let batch: Vec<(&[f64], &[f64])> = inputs
            .iter()
            .zip(&targets)
            .map(|(x, t)| (x.as_slice(), t.as_slice()))
            .collect();
        let (_, grads) = net.loss_and_grad(&batch);
        let h = 1e-5;
        let mut ok = true;
        for idx in 0..net.parameter_count() {
            let orig = net.get_parameter(idx);
            let mut plus = net.clone();
            plus.set_parameter(idx, orig + h);
            let mut minus = net.clone();
            minus.set_parameter(idx, orig - h);
            let numeric = (plus.loss_and_grad(&batch).0 - minus.loss_and_grad(&batch).0) / (2.0 * h);
            let analytic = Mlp::gradient_entry(&grads, idx);
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            ok &= (numeric - analytic).abs() / denom <= 1e-4;
        }
        assert!(suite("perceptron gradient vs finite differences", ok));
    }

    // levenshtein vs brute-force edit search on strings <= 8 chars
    {
        fn brute(a: &[u8], b: &[u8]) -> usize {
            if a.is_empty() {
                return b.len();
            }
            if b.is_empty() {
                return a.len();
            }
            if a[0] == b[0] {
                return brute(&a[1..], &b[1..]);
            }
            1 + brute(&a[1..], &b[1..])
                .min(brute(&a[1..], b))
                .min(brute(a, &b[1..]))
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x54);
        let mut ok = true;
        for _ in 0..500 {
            let len_a = rng.gen_range(0..=8);
            let len_b = rng.gen_range(0..=8);
            let a: String = (0..len_a).map(|_| (b'a' + rng.gen_range(0..4)) as char).collect();
            let b: String = (0..len_b).map(|_| (b'a' + rng.gen_range(0..4)) as char).collect();
            ok &= levenshtein(&a, &b) == brute(a.as_bytes(), b.as_bytes());
        }
        assert!(suite("levenshtein vs brute-force oracle", ok));
    }

    // enumerate_candidates vs brute-force span oracle on sentences <= 8
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0x55);
        let mut ok = true;
        for _ in 0..150 {
            let len = rng.gen_range(1..=8);
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("{}", (b'a' + rng.gen_range(0..5)) as char))
                .collect();
            let s = tokenize(&tokens.join(" ")).unwrap();
            for k in 1..=3 {
                for max_span in 1..=4 {
                    let candidates = enumerate_candidates(&s, k, max_span);
                    let got: HashSet<Vec<(usize, usize)>> = candidates
                        .iter()
                        .map(|(pattern, args)| spans_of(pattern, args))
                        .collect();
                    ok &= got.len() == candidates.len();
                    ok &= got == oracle_spans(len, k, max_span);
                }
            }
        }
        assert!(suite("candidate enumeration vs brute-force oracle", ok));
    }

    // Alg-2 self-consistency over 500 random (pattern, binding) draws
    {
        let mut engine = Engine::new(EngineConfig::default(), EmbeddingTable::fallback_only());
        let seed_sentence = tokenize("alpha beta gamma delta").unwrap();
        let p = Pattern::parse("alpha __0 gamma delta").unwrap();
        let b = p.match_utterance(&seed_sentence).unwrap();
        engine
            .apply_feedback(&seed_sentence, "seed-intent", &p, &b)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x56);
        let words = ["red", "blue", "lamp", "oven", "timer", "zone", "note", "disk"];
        let mut ok = true;
        for _ in 0..500 {
            // draw a pattern via enumeration (guarantees the shape is
            // reachable), then rebind its slots with fresh values
            let len = rng.gen_range(2..=8);
            let base: Vec<String> = (0..len)
                .map(|_| words[rng.gen_range(0..words.len())].to_string())
                .collect();
            let base = tokenize(&base.join(" ")).unwrap();
            let k = rng.gen_range(1..=3.min(len));
            let candidates = enumerate_candidates(&base, k, 4);
            if candidates.is_empty() {
                continue;
            }
            let (p0, _) = &candidates[rng.gen_range(0..candidates.len())];
            let fresh = halfshot::pattern::ArgumentBinding {
                values: (0..k)
                    .map(|_| {
                        (0..rng.gen_range(1..=3))
                            .map(|_| words[rng.gen_range(0..words.len())].to_string())
                            .collect()
                    })
                    .collect(),
            };
            let s = p0.instantiate(&fresh).unwrap();
            let inferred = engine.infer_pattern(&s, p0).unwrap();
            // the returned shape must be p0's shape over s
            ok &= &inferred.pattern == p0;
        }
        assert!(suite("pattern-inference self-consistency (500 draws)", ok));
    }

    // referential integrity and memory monotonicity over 1,000 random
    // interaction sequences
    {
        let grammar = Grammar::bundled();
        let mut ok = true;
        for seq in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(0x57 ^ seq);
            let mut cfg = EngineConfig::default();
            cfg.seed = seq;
            let mut engine = Engine::new(cfg, EmbeddingTable::fallback_with_dimension(8));
            let mut sizes = (0usize, 0usize, 0usize);
            for _ in 0..8 {
                match rng.gen_range(0..4) {
                    0 | 1 => {
                        let req = grammar.sample_request(&mut rng);
                        engine
                            .apply_feedback(&req.utterance, &req.intent, &req.pattern, &req.binding)
                            .unwrap();
                    }
                    2 => {
                        let req = grammar.sample_request(&mut rng);
                        let _ = engine.interpret(&req.utterance);
                    }
                    _ => {
                        // inconsistent feedback must be rejected and leave
                        // the state untouched
                        let req = grammar.sample_request(&mut rng);
                        if req.pattern.arity() >= 1 {
                            let bad = halfshot::pattern::ArgumentBinding {
                                values: (0..req.pattern.arity())
                                    .map(|_| vec!["zzz".to_string()])
                                    .collect(),
                            };
                            let _ = engine.apply_feedback(
                                &req.utterance,
                                &req.intent,
                                &req.pattern,
                                &bad,
                            );
                        }
                    }
                }
                let now = (
                    engine.sentences().len(),
                    engine.intents().len(),
                    engine.patterns().len(),
                );
                ok &= now.0 >= sizes.0 && now.1 >= sizes.1 && now.2 >= sizes.2;
                ok &= engine.validate().is_ok();
                sizes = now;
            }
        }
        assert!(suite("referential integrity + monotonicity (1000 sequences)", ok));
    }

    // snapshot round trip: identical verdicts on a 50-probe set
    {
        let grammar = Grammar::bundled();
        let mut cfg = EngineConfig::default();
        cfg.retrain_every = 30;
        cfg.train = compact_train_config();
        cfg.train.rebalance = None;
        let mut engine = Engine::new(cfg, EmbeddingTable::fallback_only());
        let mut rng = ChaCha8Rng::seed_from_u64(0x58);
        for _ in 0..60 {
            let req = grammar.sample_request(&mut rng);
            engine
                .apply_feedback(&req.utterance, &req.intent, &req.pattern, &req.binding)
                .unwrap();
            engine.maybe_retrain();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap");
        store::save(&engine, &path).unwrap();
        let mut restored = store::load(&path, EmbeddingTable::fallback_only()).unwrap();
        let mut ok = restored.is_trained() == engine.is_trained();
        for _ in 0..50 {
            let probe = grammar.sample_request(&mut rng).utterance;
            ok &= engine.interpret(&probe) == restored.interpret(&probe);
        }
        assert!(suite("snapshot round-trip behavioral equality (50 probes)", ok));
    }

    println!(
        "acceptance criterion 4 (property suites): {}",
        verdict(all_ok)
    );
    assert!(all_ok);
}

fn spans_of(pattern: &Pattern, args: &halfshot::pattern::ArgumentBinding) -> Vec<(usize, usize)> {
    // walk the elements, tracking the token position of each slot
    let mut spans = Vec::new();
    let mut pos = 0;
    for el in pattern.elements() {
        match el {
            halfshot::pattern::PatternElement::Literal(_) => pos += 1,
            halfshot::pattern::PatternElement::Slot(i) => {
                let len = args.values[*i].len();
                spans.push((pos, len));
                pos += len;
            }
        }
    }
    spans
}

fn oracle_spans(len: usize, k: usize, max_span: usize) -> HashSet<Vec<(usize, usize)>> {
    fn go(
        len: usize,
        k: usize,
        max_span: usize,
        from: usize,
        acc: &mut Vec<(usize, usize)>,
        out: &mut HashSet<Vec<(usize, usize)>>,
    ) {
        if acc.len() == k {
            let covered: usize = acc.iter().map(|&(_, l)| l).sum();
            if covered < len {
                out.insert(acc.clone());
            }
            return;
        }
        for start in from..len {
            for l in 1..=max_span.min(len - start) {
                acc.push((start, l));
                go(len, k, max_span, start + l + 1, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = HashSet::new();
    go(len, k, max_span, 0, &mut Vec::new(), &mut out);
    out
}

#[test]
fn criterion_5_sts_harness_end_to_end() {
    // build two 100-row sample files from the bundled grammar
    let grammar = Grammar::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(0x59);
    let mut pool = Vec::new();
    let mut seen = HashSet::new();
    while pool.len() < 80 {
        let req = grammar.sample_request(&mut rng);
        if seen.insert(req.utterance.joined()) {
            pool.push(req);
        }
    }
    let mut make_rows = |n: usize| -> String {
        let mut rows = String::new();
        for _ in 0..n {
            let i = rng.gen_range(0..pool.len());
            let mut j = rng.gen_range(0..pool.len());
            while j == i {
                j = rng.gen_range(0..pool.len());
            }
            let score = if pool[i].intent == pool[j].intent { 5.0 } else { 0.0 };
            rows.push_str(&format!(
                "{score:.1}\t{}\t{}\n",
                pool[i].utterance.joined(),
                pool[j].utterance.joined()
            ));
        }
        rows
    };
    let dir = tempfile::tempdir().unwrap();
    let train_path = dir.path().join("train.tsv");
    let test_path = dir.path().join("test.tsv");
    std::fs::write(&train_path, make_rows(100)).unwrap();
    std::fs::write(&test_path, make_rows(100)).unwrap();

    let mut config = compact_train_config();
    config.mlp.epochs = 12;
    let report = sts::evaluate_files(
        &train_path,
        &test_path,
        &EmbeddingTable::fallback_only(),
        &config,
        3,
    )
    .unwrap();
    let ok = report.pearson.is_finite() && report.train_rows == 100 && report.test_rows == 100;
    println!(
        "acceptance criterion 5 (benchmark harness end-to-end on 100-row files): {} — pearson {:.3} (informational, not gated)",
        verdict(ok),
        report.pearson
    );
    assert!(ok, "pearson {} on {} rows", report.pearson, report.test_rows);
}

#[test]
fn criterion_6_interpret_latency_and_candidate_cap() {
    let grammar = Grammar::bundled();
    let mut cfg = EngineConfig::default();
    cfg.retrain_every = 10_000; // train once manually below
    let mut engine = Engine::new(cfg, EmbeddingTable::fallback_only());
    let mut rng = ChaCha8Rng::seed_from_u64(0x60);
    while engine.sentences().len() < 700 {
        let req = grammar.sample_request(&mut rng);
        engine
            .apply_feedback(&req.utterance, &req.intent, &req.pattern, &req.binding)
            .unwrap();
    }
    {
        // force one full training so the hot path includes the ensemble
        let mut train_now = engine.config().clone();
        train_now.retrain_every = 0;
        let table = EmbeddingTable::fallback_only();
        let mut trained = Engine::new(train_now, table);
        for s in engine.sentences() {
            let p = &engine.patterns()[s.pattern as usize].pattern;
            let name = engine.intent_name(s.intent).to_string();
            trained
                .apply_feedback(&s.utterance, &name, p, &s.binding)
                .unwrap();
        }
        assert!(trained.maybe_retrain(), "training should trigger");
        engine = trained;
    }
    assert_eq!(engine.sentences().len(), 700);

    // 12 tokens, phrased so the nearest pattern carries two arguments
    let request = tokenize("could you please switch the television on in paris for me now").unwrap();
    assert_eq!(request.len(), 12);
    let mut elapsed = f64::INFINITY;
    for _ in 0..3 {
        let t0 = Instant::now();
        let _ = engine.interpret(&request);
        elapsed = elapsed.min(t0.elapsed().as_secs_f64());
    }
    let cap = engine.config().candidate_cap;
    let pool_max = aidme_pool()
        .iter()
        .map(|r| r.max_candidates)
        .max()
        .unwrap();
    let ok = elapsed <= 2.0 && pool_max <= cap && engine.max_candidates_seen() <= cap;
    println!(
        "acceptance criterion 6 (interpret latency and candidate cap): {} — interpret {:.3}s (limit 2s) on 700 sentences, max candidates {} here / {} across simulations (cap {})",
        verdict(ok),
        elapsed,
        engine.max_candidates_seen(),
        pool_max,
        cap
    );
    assert!(elapsed <= 2.0, "interpret took {elapsed:.3}s");
    assert!(pool_max <= cap && engine.max_candidates_seen() <= cap);
}
