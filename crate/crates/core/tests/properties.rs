mod common;

use std::sync::OnceLock;

use alphacc::corpus::{standardize, PAD_TEXT};
use alphacc::eval::{
    calibrate_exhaustive, calibrate_threshold, candidate_thresholds, classify_all, compute_metrics, generate_synthetic,
    Benchmark, ClonePair, SynthConfig,
};
use alphacc::lexer::{reformat, tokenize, FormatStyle, Language, Token, TokenType};
use alphacc::pipeline::fragment;
use alphacc::scorer::{late_interaction, late_interaction_brute_force, Polarity, PooledFragment, Score};
use alphacc::trainer::margin_loss;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn bench() -> &'static Benchmark {
    static B: OnceLock<Benchmark> = OnceLock::new();
    B.get_or_init(|| generate_synthetic(&SynthConfig::new(21, 40, 5)).unwrap())
}

fn toks(prefix: &str, n: usize) -> Vec<Token> {
    (0..n)
        .map(|i| Token::new(format!("{prefix}{i}"), TokenType::Identifier))
        .collect()
}

fn unit_vectors(raw: &[f64], d: usize) -> PooledFragment<f64> {
    let mut v = raw.to_vec();
    for row in v.chunks_mut(d) {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        row.iter_mut().for_each(|x| *x /= n);
    }
    PooledFragment::from_unit_vectors(v, d)
}

fn distance(v: f64) -> Score {
    Score {
        value: v,
        polarity: Polarity::DistanceLike,
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn reformatting_never_changes_tokens(
        pick in 0usize..200,
        seed in any::<u64>(),
        comment_rate in 0.0f64..0.5,
        newline_rate in 0.0f64..0.8,
    ) {
        let f = bench().functions.iter().nth(pick % bench().functions.len()).unwrap();
        let style = FormatStyle { comment_rate, newline_rate, max_indent: 12 };
        let text = reformat(&f.tokens, style, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(tokenize(&text, Language::JavaLike).unwrap().tokens, f.tokens.clone());
    }

    #[test]
    fn standardized_rows_are_exactly_l(
        n in 0usize..40, before in 0usize..20, after in 0usize..20, l in 1usize..48,
    ) {
        let seq = toks("s", n);
        let row = standardize(&seq, &toks("b", before), &toks("a", after), l);
        prop_assert_eq!(row.len(), l);
        let valid = row.iter().take_while(|c| c.valid).count();
        prop_assert!(row[valid..].iter().all(|c| !c.valid && c.token.text == PAD_TEXT));
        prop_assert_eq!(valid, l.min(n + before + after));
        // The function itself appears unbroken (or as a prefix when truncated).
        let texts: Vec<&str> = row.iter().map(|c| c.token.text.as_str()).collect();
        let start = if n >= l { 0 } else { texts.iter().position(|t| t.starts_with('s')).unwrap_or(0) };
        for (i, t) in seq.iter().take(l).enumerate() {
            prop_assert_eq!(texts[start + i], t.text.as_str());
        }
        // Context on each side differs by at most one token unless one side ran out.
        if n < l {
            let b = texts.iter().filter(|t| t.starts_with('b')).count();
            let a = texts.iter().filter(|t| t.starts_with('a')).count();
            prop_assert!(a.abs_diff(b) <= 1 || a == after || b == before);
            prop_assert!(a >= b || a == after);
        }
    }

    #[test]
    fn margin_loss_shape(s in 0.0f64..2.0, gamma in 0.05f64..1.5) {
        let pos = margin_loss(distance(s), 1, gamma).unwrap();
        let neg = margin_loss(distance(s), -1, gamma).unwrap();
        prop_assert!(pos >= 0.0 && neg >= 0.0);
        prop_assert!((pos - (gamma - 1.0 + s).max(0.0)).abs() < 1e-12);
        prop_assert!((neg - (gamma + 1.0 - s).max(0.0)).abs() < 1e-12);
        // Pulling a clone closer or pushing a non-clone away never hurts.
        prop_assert!(margin_loss(distance(s * 0.5), 1, gamma).unwrap() <= pos);
        prop_assert!(margin_loss(distance(s + 0.5), -1, gamma).unwrap() <= neg);
    }

    #[test]
    fn metric_identities(labels in prop::collection::vec(any::<bool>(), 1..80), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<ClonePair> = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| ClonePair { id1: format!("a{i}"), id2: format!("b{i}"), label: if y { 1 } else { -1 }, clone_type: None })
            .collect();
        let predicted: Vec<bool> = labels.iter().map(|_| rand::Rng::random_bool(&mut rng, 0.5)).collect();
        let m = compute_metrics(&pairs, &predicted);
        let c = m.confusion;
        prop_assert_eq!((c.tp + c.fp + c.fn_ + c.tn) as usize, labels.len());
        prop_assert_eq!((c.tp + c.fn_) as usize, labels.iter().filter(|&&y| y).count());
        let p = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
        let r = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
        let f1 = if c.tp == 0 { 0.0 } else { 2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64 };
        prop_assert!((m.precision - p).abs() < 1e-15);
        prop_assert!((m.recall - r).abs() < 1e-15);
        prop_assert!((m.f1 - f1).abs() < 1e-12);
        if p + r > 0.0 {
            prop_assert!((m.f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_matches_exhaustive_sweep(
        raw in prop::collection::vec((0u8..20, any::<bool>()), 1..60),
        similarity in any::<bool>(),
    ) {
        let polarity = if similarity { Polarity::SimilarityLike } else { Polarity::DistanceLike };
        let scores: Vec<Score> = raw.iter().map(|&(v, _)| Score { value: v as f64 / 10.0, polarity }).collect();
        let labels: Vec<i8> = raw.iter().map(|&(_, y)| if y { 1 } else { -1 }).collect();
        let (tau, f1) = calibrate_threshold(&scores, &labels);
        let (tau_ref, f1_ref) = calibrate_exhaustive(&scores, &labels);
        prop_assert_eq!(tau, tau_ref);
        prop_assert_eq!(f1, f1_ref);
        // No candidate does better.
        let pairs: Vec<ClonePair> = labels
            .iter()
            .map(|&label| ClonePair { id1: "a".into(), id2: "b".into(), label, clone_type: None })
            .collect();
        let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
        for t in candidate_thresholds(&values) {
            prop_assert!(compute_metrics(&pairs, &classify_all(&scores, t)).f1 <= f1);
        }
    }

    #[test]
    fn late_interaction_matches_double_loop(
        na in 1usize..20, nb in 1usize..20, seed in any::<u64>(),
    ) {
        let d = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n * d).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect() };
        let a = unit_vectors(&draw(na), d);
        let b = unit_vectors(&draw(nb), d);
        for sym in [false, true] {
            let fast = late_interaction(&a, &b, sym).value;
            prop_assert!((fast - late_interaction_brute_force(&a, &b, sym)).abs() < 1e-9);
        }
        prop_assert_eq!(late_interaction(&a, &b, true).value, late_interaction(&b, &a, true).value);
        prop_assert!(late_interaction(&a, &a, true).value.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn retrieved_row_order_does_not_matter(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let vocab = common::vocab(30);
        let m = common::model(vocab.len(), 16, 10, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let msa = common::random_msa(&mut rng, &vocab, 5, 10);
        let packed = common::pack(&msa, &vocab);
        let mut perm = vec![1, 2, 3, 4];
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let a = fragment(&m, &packed).unwrap();
        let b = fragment(&m, &packed.permute_retrieved(&perm)).unwrap();
        prop_assert_eq!(a.vectors.len(), b.vectors.len());
        for (x, y) in a.vectors.iter().zip(&b.vectors) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
