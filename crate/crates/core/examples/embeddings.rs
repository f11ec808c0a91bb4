//! Trains skip-gram token embeddings on generated code and lists the
//! nearest neighbours of a few tokens.

use alphacc::embeddings::{build_vocab, train_embeddings, SgnsConfig};
use alphacc::eval::{generate_synthetic, SynthConfig};

fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
    let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
    dot / (na * nb).max(1e-12)
}

fn main() -> alphacc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let bench = generate_synthetic(&SynthConfig::new(5, 40, 4))?;
    let vocab = build_vocab(&bench.functions, 1);
    let cfg = SgnsConfig {
        dim: 32,
        epochs: 3,
        ..SgnsConfig::default()
    };
    let table = train_embeddings(&[&bench.functions], &vocab, &cfg)?;
    println!("{} tokens, dim {}", vocab.len(), table.dim);

    for probe in ["for", "while", "+=", "length", "return"] {
        let Some(id) = vocab.get(probe) else { continue };
        let mut near: Vec<(f32, &str)> = (2..vocab.len())
            .filter(|&j| j != id)
            .map(|j| (cosine(table.row(id), table.row(j)), vocab.token(j)))
            .collect();
        near.sort_by(|a, b| b.0.total_cmp(&a.0));
        let list: Vec<String> = near.iter().take(5).map(|(s, t)| format!("{t} ({s:.2})")).collect();
        println!("{probe:>8}: {}", list.join(", "));
    }
    Ok(())
}
