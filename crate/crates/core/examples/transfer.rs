//! Trains on one generated benchmark and adapts to another with a small
//! share of its training pairs.

use alphacc::eval::{generate_synthetic, transfer_protocol, SynthConfig};
use alphacc::Config;

fn main() -> alphacc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let source = generate_synthetic(&SynthConfig::new(11, 24, 4))?;
    let target = generate_synthetic(&SynthConfig::new(12, 24, 4))?;
    let mut cfg = Config::default();
    cfg.apply_pairs(&["d=32", "d_ff=64", "L=96", "R=3", "lr=0.001", "batch_size=8"])?;
    for fraction in [0.0, 0.2] {
        let r = transfer_protocol(&source, &target, fraction, &cfg)?;
        println!(
            "fraction {fraction}: fine-tuned on {} pairs, target F1 {:.4}, per type {:?}",
            r.fine_tune_pairs, r.target.f1, r.target.per_type
        );
    }
    Ok(())
}
