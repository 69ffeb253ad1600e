//! Interactive teach loop: the user types requests, the engine answers with
//! an exact match, a "Did you mean" reformulation, or asks to be taught,
//! and every turn ends with feedback into the memories.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};

use halfshot::engine::{Engine, Interpretation};
use halfshot::pattern::Pattern;
use halfshot::store;
use halfshot::text::{tokenize, Utterance};

use crate::EngineArgs;

pub fn run(common: &EngineArgs, snapshot: Option<&PathBuf>) -> Result<()> {
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut out = std::io::stdout();

    let mut engine = match snapshot {
        Some(path) if path.exists() => {
            let engine = store::load(path, common.table()?)
                .with_context(|| format!("loading snapshot {}", path.display()))?;
            println!(
                "resumed from {}: {} sentences, {} intents, {} patterns",
                path.display(),
                engine.sentences().len(),
                engine.intents().len(),
                engine.patterns().len()
            );
            engine
        }
        _ => Engine::new(common.engine_config(), common.table()?),
    };

    println!("type a request; :save [dir], :stats, :quit");
    loop {
        print!("> ");
        out.flush()?;
        let Some(line) = next_line(&mut lines)? else {
            break;
        };
        let line = line.trim().to_string();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(':') {
            let mut parts = rest.split_whitespace();
            match parts.next() {
                Some("quit") | Some("q") => break,
                Some("stats") => {
                    println!(
                        "{} sentences, {} intents, {} patterns, model {} ({} trainings)",
                        engine.sentences().len(),
                        engine.intents().len(),
                        engine.patterns().len(),
                        if engine.is_trained() { "trained" } else { "untrained (word-overlap fallback)" },
                        engine.retrain_count()
                    );
                }
                Some("save") => {
                    let path = parts
                        .next()
                        .map(PathBuf::from)
                        .or_else(|| snapshot.cloned());
                    match path {
                        Some(path) => {
                            let info = store::save(&engine, &path)?;
                            println!("saved snapshot to {}", info.path.display());
                        }
                        None => println!("usage: :save <dir> (or pass --snapshot)"),
                    }
                }
                other => println!("unknown command {other:?}"),
            }
            continue;
        }

        let request = match tokenize(&line) {
            Ok(u) => u,
            Err(e) => {
                println!("{e}");
                continue;
            }
        };
        match engine.interpret(&request) {
            Interpretation::ExactMatch {
                intent,
                pattern,
                binding,
            } => {
                println!(
                    "intent '{}' via pattern \"{}\" {}",
                    engine.intent_name(intent),
                    pattern,
                    render_args(&binding.values)
                );
                engine
                    .apply_feedback(&request, &engine.intent_name(intent).to_string(), &pattern, &binding)
                    .expect("matched binding instantiates");
            }
            Interpretation::Inferred {
                intent,
                pattern,
                binding,
                reformulation,
                ..
            } => {
                println!("Did you mean: {reformulation}?  [y/n]");
                let confirmed = matches!(
                    next_line(&mut lines)?.as_deref().map(str::trim),
                    Some("y") | Some("yes") | Some("")
                );
                if confirmed {
                    let name = engine.intent_name(intent).to_string();
                    engine
                        .apply_feedback(&request, &name, &pattern, &binding)
                        .expect("inferred binding instantiates");
                    println!(
                        "learned pattern \"{pattern}\" for intent '{name}' {}",
                        render_args(&binding.values)
                    );
                } else {
                    teach_correction(&mut engine, &mut lines, &request, None)?;
                }
            }
            Interpretation::IntentOnly { intent, .. } => {
                let name = engine.intent_name(intent).to_string();
                println!(
                    "this looks like intent '{name}' but the pattern is unclear — please provide it"
                );
                teach_correction(&mut engine, &mut lines, &request, Some(name))?;
            }
            Interpretation::NewIntent => {
                println!("This looks new — please provide intent name and pattern");
                teach_correction(&mut engine, &mut lines, &request, None)?;
            }
        }
        engine.maybe_retrain();
    }
    println!("bye");
    Ok(())
}

fn next_line(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<Option<String>> {
    match lines.next() {
        Some(line) => Ok(Some(line?)),
        None => Ok(None),
    }
}

fn render_args(values: &[Vec<String>]) -> String {
    if values.is_empty() {
        return "(no arguments)".into();
    }
    let rendered: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, v)| format!("__{i}={}", v.join(" ")))
        .collect();
    format!("({})", rendered.join(", "))
}

/// Ask for intent name (unless known) and a pattern whose slots match the
/// request; malformed pattern input is re-prompted.
fn teach_correction(
    engine: &mut Engine,
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    request: &Utterance,
    known_intent: Option<String>,
) -> Result<()> {
    let intent = match known_intent {
        Some(name) => name,
        None => {
            println!("intent name:");
            match next_line(lines)? {
                Some(name) if !name.trim().is_empty() => name.trim().to_string(),
                _ => {
                    println!("skipped");
                    return Ok(());
                }
            }
        }
    };
    loop {
        println!("pattern (literals and __0 __1 ... slots; empty line = the sentence itself):");
        let Some(text) = next_line(lines)? else {
            println!("skipped");
            return Ok(());
        };
        let pattern = if text.trim().is_empty() {
            Pattern::literal(request)
        } else {
            match Pattern::parse(&text) {
                Ok(p) => p,
                Err(e) => {
                    println!("{e}; try again");
                    continue;
                }
            }
        };
        match pattern.match_utterance(request) {
            Some(binding) => {
                engine
                    .apply_feedback(request, &intent, &pattern, &binding)
                    .expect("matched binding instantiates");
                println!("learned pattern \"{pattern}\" for intent '{intent}'");
                return Ok(());
            }
            None => println!("that pattern does not match the request; try again"),
        }
    }
}
