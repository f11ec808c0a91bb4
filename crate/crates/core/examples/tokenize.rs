//! Tokenizes a snippet, prints each token with its type, then shows that
//! a random re-layout of the same tokens lexes back unchanged.

use alphacc::lexer::{extract_functions, reformat, tokenize, FormatStyle, Language};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SOURCE: &str = r#"
class Sums {
    // running total
    static int total(int[] xs) {
        int s = 0;
        for (int a = 0; a < xs.length; a++) { s += xs[a]; }
        return s;
    }
}
"#;

fn main() -> alphacc::Result<()> {
    let seq = tokenize("for(int a = 0; a < N; a++)", Language::JavaLike)?;
    for t in &seq.tokens {
        println!("{:>4}  {}", t.text, t.ty.name());
    }

    let functions = extract_functions(SOURCE, Language::JavaLike, "Sums.java")?;
    for f in &functions {
        println!(
            "\n{} ({} tokens, {} context before)",
            f.id,
            f.tokens.len(),
            f.context_before.len()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let text = reformat(&f.tokens, FormatStyle::default(), &mut rng);
        println!("{text}");
        let again = tokenize(&text, Language::JavaLike)?;
        assert_eq!(again.tokens, f.tokens);
    }
    Ok(())
}
