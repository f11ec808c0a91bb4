//! Trains a small model on a generated benchmark, saves and reloads the
//! checkpoint, then scores held-out pairs.

use alphacc::corpus::NGramIndex;
use alphacc::embeddings::build_vocab;
use alphacc::eval::{evaluate, score_dataset, Split};
use alphacc::eval::{generate_synthetic, SynthConfig};
use alphacc::scorer::classify;
use alphacc::trainer::{train, Checkpoint, TrainInputs};
use alphacc::Config;

fn main() -> alphacc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let bench = generate_synthetic(&SynthConfig::new(3, 30, 4))?;
    let mut cfg = Config::default();
    cfg.apply_pairs(&["d=32", "d_ff=64", "L=96", "R=3", "lr=0.001", "batch_size=8", "epochs=2"])?;

    let index = NGramIndex::build(&bench.functions, cfg.ngram, cfg.buckets);
    let vocab = build_vocab(&bench.functions, 1);
    let inputs = TrainInputs {
        functions: &bench.functions,
        train: &bench.train,
        validation: &bench.validation,
        corpus: &bench.functions,
        index: &index,
    };
    let (ckpt, report) = train(&inputs, &vocab, None, &cfg)?;
    println!(
        "{} steps, epoch loss {:?}, tau {:.4}",
        report.steps, report.epoch_loss, ckpt.tau
    );

    let path = std::env::temp_dir().join("alphacc-example.ckpt");
    ckpt.save(&path)?;
    let loaded = Checkpoint::load(&path)?;

    let test = bench.dataset(Split::Test);
    let scores = score_dataset(&loaded, &test.functions, &test.pairs, &bench.functions, &index)?;
    for (p, s) in test.pairs.iter().zip(&scores).take(8) {
        println!(
            "{:<22} {:<22} {:>8.4} clone={} label={}",
            p.id1,
            p.id2,
            s.value,
            classify(*s, loaded.tau),
            p.label
        );
    }
    let r = evaluate(&loaded, &test, &bench.functions, &index, None)?;
    println!(
        "test F1 {:.4} (P {:.4}, R {:.4}) on {} pairs",
        r.f1, r.precision, r.recall, r.n_pairs
    );
    Ok(())
}
