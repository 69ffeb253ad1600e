//! Teach two phrasings of one intent, then interpret a third, never-seen
//! phrasing and watch the engine infer its pattern.

use halfshot::engine::{Engine, EngineConfig, Interpretation};
use halfshot::pattern::Pattern;
use halfshot::sim::EmbeddingTable;
use halfshot::text::tokenize;

fn main() {
    let mut engine = Engine::new(EngineConfig::default(), EmbeddingTable::fallback_only());

    for (sentence, pattern) in [
        ("send an email to alice@domain.com", "send an email to __0"),
        ("write an email to carol@mail.org", "write an email to __0"),
    ] {
        let s = tokenize(sentence).unwrap();
        let p = Pattern::parse(pattern).unwrap();
        let binding = p.match_utterance(&s).unwrap();
        engine
            .apply_feedback(&s, "send-email", &p, &binding)
            .unwrap();
    }

    let request = tokenize("write an urgent email to carol@mail.org").unwrap();
    match engine.interpret(&request) {
        Interpretation::Inferred {
            intent,
            pattern,
            binding,
            reformulation,
            ..
        } => {
            println!("intent:        {}", engine.intent_name(intent));
            println!("new pattern:   {pattern}");
            println!("arguments:     {:?}", binding.values);
            println!("did you mean:  {reformulation}?");
        }
        other => println!("{other:?}"),
    }
}
