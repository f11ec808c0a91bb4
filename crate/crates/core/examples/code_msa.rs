//! Builds the n-gram index over a small generated corpus, checks top-k
//! retrieval against a linear scan and prints one function's Code MSA.

use alphacc::corpus::{brute_force_topk, build_msa, NGramIndex};
use alphacc::eval::{generate_synthetic, SynthConfig};

fn main() -> alphacc::Result<()> {
    let bench = generate_synthetic(&SynthConfig::new(1, 12, 4))?;
    let store = &bench.functions;
    let index = NGramIndex::build(store, 5, 1 << 20);
    println!("indexed {} functions", index.len());

    for f in store.iter().take(20) {
        let fast = index.retrieve_topk(&f.id, &f.tokens, 4);
        assert_eq!(fast, brute_force_topk(store, &f.id, &f.tokens, 4, 5, 1 << 20));
    }

    let query = store.iter().next().expect("non-empty corpus");
    for (score, id) in index.scored(&query.id, &query.tokens).into_iter().take(4) {
        println!("{score:.4}  {id}");
    }
    let msa = build_msa(query, store, &index, 5, 24);
    for (row, id) in msa.rows.iter().zip(&msa.row_ids) {
        let text: Vec<&str> = row.iter().map(|c| c.token.text.as_str()).collect();
        println!("{id:<24} {}", text.join(" "));
    }
    println!("valid cells per row: {:?}", msa.valid_lengths());
    Ok(())
}
