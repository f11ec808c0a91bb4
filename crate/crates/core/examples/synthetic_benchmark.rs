//! Trains and evaluates on a generated clone benchmark.
//!
//! ```text
//! cargo run --release --example synthetic_benchmark -- [problems] [variants] [key=value ...]
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use alphacc::eval::{generate_synthetic, run_benchmark, type_histogram, SynthConfig};
use alphacc::Config;

fn main() -> alphacc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let problems = args.first().and_then(|a| a.parse().ok()).unwrap_or(40);
    let variants = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    let mut cfg = Config::default();
    cfg.apply_pairs(&args.iter().skip(2).collect::<Vec<_>>())?;

    let bench = generate_synthetic(&SynthConfig::new(7, problems, variants))?;
    println!("functions: {}", bench.functions.len());
    println!("train: {:?}", type_histogram(&bench.train));
    println!("test:  {:?}", type_histogram(&bench.test));

    let start = Instant::now();
    let run = run_benchmark(&bench, &cfg)?;
    println!("epoch loss: {:?}", run.train.epoch_loss);
    println!(
        "tau {:.4}, test F1 {:.4} (P {:.4}, R {:.4})",
        run.test.tau, run.test.f1, run.test.precision, run.test.recall
    );
    println!("per type: {:?}", run.test.per_type);
    println!("test score quantiles (min, 5%, 50%, 95%, max):");
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (p, s) in bench.test.iter().zip(&run.test_scores) {
        let key = p.clone_type.map_or("negative".to_string(), |t| format!("{t:?}"));
        groups.entry(key).or_default().push(s.value);
    }
    for (k, mut v) in groups {
        v.sort_by(f64::total_cmp);
        let q = |f: f64| v[((v.len() - 1) as f64 * f).round() as usize];
        println!(
            "  {k:<9} {:.4} {:.4} {:.4} {:.4} {:.4}",
            q(0.0),
            q(0.05),
            q(0.5),
            q(0.95),
            q(1.0)
        );
    }
    println!("elapsed: {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
