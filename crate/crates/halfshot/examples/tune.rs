// Scratch harness: protocol metrics under candidate training configs.
use halfshot::grammar::Grammar;
use halfshot::sim::{EmbeddingTable, TrainConfig};
use halfshot::simulate::eval_model_protocol;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(20);
    let wd: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1e-4);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let seeds: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(5);
    let g = Grammar::bundled();
    let table = EmbeddingTable::fallback_only();
    let mut cfg = TrainConfig::default();
    cfg.mlp.epochs = epochs;
    cfg.mlp.weight_decay = wd;
    cfg.mlp.learning_rate = lr;
    let mut sums = vec![(0.0, 0.0, 0.0); 5];
    let mut names = Vec::new();
    for seed in 1..=seeds {
        let r = eval_model_protocol(&g, seed, &table, &cfg).unwrap();
        names = r.rows.iter().map(|x| x.name.clone()).collect();
        for (i, row) in r.rows.iter().enumerate() {
            sums[i].0 += row.f1;
            sums[i].1 += row.precision;
            sums[i].2 += row.recall;
        }
    }
    println!("epochs {epochs} wd {wd} lr {lr} over {seeds} seeds:");
    for (n, s) in names.iter().zip(&sums) {
        println!("  {:20} f1 {:.3} p {:.3} r {:.3}", n, s.0 / seeds as f64, s.1 / seeds as f64, s.2 / seeds as f64);
    }
}
