//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use alphacc::corpus::{ingest_with, NGramIndex};
use alphacc::eval::{
    calibrate_exhaustive, calibrate_threshold, generate_synthetic, run_benchmark, Benchmark, CloneType, Experiment,
    SynthConfig,
};
use alphacc::lexer::{reformat, tokenize, FormatStyle, Language};
use alphacc::model::Model;
use alphacc::pipeline::fragment;
use alphacc::scorer::{late_interaction, score, Polarity, PooledFragment, Score, SimilarityConfig};
use alphacc::trainer::{grad_check, margin_loss, toy_config, Checkpoint, Loss};
use alphacc::Config;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn lexer_fidelity() -> Outcome {
    let start = Instant::now();
    let got: Vec<String> = tokenize("for(int a = 0; a < N; a++)", Language::JavaLike)
        .unwrap()
        .tokens
        .into_iter()
        .map(|t| t.text)
        .collect();
    let want = [
        "for", "(", "int", "a", "=", "0", ";", "a", "<", "N", ";", "a", "++", ")",
    ];
    let exact = got == want;

    let bench = generate_synthetic(&SynthConfig::new(1, 40, 5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ok = 0;
    let total = bench.functions.len();
    for f in bench.functions.iter() {
        let style = FormatStyle {
            comment_rate: rng.random_range(0.0..0.4),
            newline_rate: rng.random_range(0.0..0.6),
            max_indent: 12,
        };
        let text = reformat(&f.tokens, style, &mut rng);
        if tokenize(&text, Language::JavaLike)
            .map(|s| s.tokens == f.tokens)
            .unwrap_or(false)
        {
            ok += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        exact && total == 200 && ok == total && within(t, 5.0),
        format!(
            "{}-token loop {}, {ok}/{total} reformatted functions invariant, {:.2}s",
            got.len(),
            if exact { "exact" } else { "WRONG" },
            t.as_secs_f64()
        ),
    )
}

fn retrieval_oracle() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let bench = generate_synthetic(&SynthConfig::new(2, 200, 5)).unwrap();
    bench.write(dir.path()).unwrap();
    let store = ingest_with(&dir.path().join("functions.jsonl"), Language::JavaLike, 64)
        .unwrap()
        .store;
    let index = NGramIndex::build(&store, 5, 1 << 20);
    let all: Vec<_> = store.iter().collect();
    let vectors: Vec<_> = all
        .iter()
        .map(|f| common::hashed_ngrams(&f.tokens, 5, 1 << 20))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..100 {
        let qi = rng.random_range(0..all.len());
        let q = all[qi];
        let mut ranked: Vec<(f64, &str)> = all
            .iter()
            .zip(&vectors)
            .filter(|(f, _)| f.id != q.id)
            .map(|(f, v)| (common::cosine_counts(&vectors[qi], v), f.id.as_str()))
            .filter(|s| s.0 > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        let mut want: Vec<String> = ranked.iter().take(4).map(|s| s.1.to_string()).collect();
        want.resize(4, q.id.clone());
        if index.retrieve_topk(&q.id, &q.tokens, 4) != want {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        store.len() == 1000 && mismatches == 0 && within(t, 30.0),
        format!(
            "{} functions, {mismatches}/100 queries differ from brute force, {:.2}s",
            store.len(),
            t.as_secs_f64()
        ),
    )
}

fn unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PooledFragment<f64> {
    let mut v: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    for row in v.chunks_mut(d) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }
    PooledFragment::from_unit_vectors(v, d)
}

/// Mean over `a` of the smallest Euclidean distance to any vector of `b`.
fn double_loop(a: &PooledFragment<f64>, b: &PooledFragment<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..a.len() {
        let mut best = f64::INFINITY;
        for j in 0..b.len() {
            let s: f64 = a
                .vector(i)
                .iter()
                .zip(b.vector(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            best = best.min(s.sqrt());
        }
        total += best;
    }
    total / a.len() as f64
}

fn late_interaction_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut asym) = (0.0f64, 0usize);
    for _ in 0..100 {
        let (na, nb) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let a = unit_rows(&mut rng, na, 32);
        let b = unit_rows(&mut rng, nb, 32);
        worst = worst.max((late_interaction(&a, &b, false).value - double_loop(&a, &b)).abs());
        let sym = (double_loop(&a, &b) + double_loop(&b, &a)) / 2.0;
        worst = worst.max((late_interaction(&a, &b, true).value - sym).abs());
        if late_interaction(&a, &b, true).value != late_interaction(&b, &a, true).value {
            asym += 1;
        }
    }
    outcome(
        worst <= 1e-9 && asym == 0,
        format!("max deviation {worst:.2e}, {asym} asymmetric pairs"),
    )
}

fn margin_values() -> Outcome {
    let d = |v: f64| Score {
        value: v,
        polarity: Polarity::DistanceLike,
    };
    let got = [
        margin_loss(d(0.4), 1, 0.5).unwrap(),
        margin_loss(d(0.8), 1, 0.5).unwrap(),
        margin_loss(d(1.2), -1, 0.5).unwrap(),
    ];
    // 0.5 - (1 - 0.8) and 0.5 + (1 - 1.2) both round to this double.
    let want = [0.0, 0.30000000000000004, 0.30000000000000004];
    outcome(got == want, format!("{got:?}"))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for loss in [Loss::Margin, Loss::Bce] {
        let cfg = toy_config(loss);
        let r = grad_check(&cfg).unwrap();
        let groups: BTreeSet<&str> = r.probes.iter().map(|p| p.tensor.as_str()).collect();
        let total = Model::<f64>::new(cfg.model, 0).unwrap().params.len();
        pass &= r.max_rel_error < 1e-4 && r.probes.len() >= 64 && groups.len() == total;
        parts.push(format!(
            "{loss} {:.2e} ({} probes, {}/{total} groups)",
            r.max_rel_error,
            r.probes.len(),
            groups.len()
        ));
    }
    let t = start.elapsed();
    outcome(
        pass && within(t, 120.0),
        format!("{}, {:.2}s", parts.join("; "), t.as_secs_f64()),
    )
}

fn row_permutation() -> Outcome {
    let vocab = common::vocab(40);
    let model = common::model(vocab.len(), 32, 24, 5);
    let sim = SimilarityConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut dv, mut ds) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let a = common::pack(&common::random_msa(&mut rng, &vocab, 5, 24), &vocab);
        let b = common::pack(&common::random_msa(&mut rng, &vocab, 5, 24), &vocab);
        let mut perm = vec![1, 2, 3, 4];
        perm.shuffle(&mut rng);
        let fa = fragment(&model, &a).unwrap();
        let fp = fragment(&model, &a.permute_retrieved(&perm)).unwrap();
        let fb = fragment(&model, &b).unwrap();
        for (x, y) in fa.vectors.iter().zip(&fp.vectors) {
            dv = dv.max((x - y).abs());
        }
        ds = ds.max((score(&fa, &fb, &sim).value - score(&fp, &fb, &sim).value).abs());
    }
    outcome(
        dv <= 1e-9 && ds <= 1e-9,
        format!("max vector change {dv:.2e}, max score change {ds:.2e}"),
    )
}

fn benchmark() -> Benchmark {
    generate_synthetic(&SynthConfig::new(7, 200, 6)).unwrap()
}

fn timed_run(bench: &Benchmark, cfg: &Config) -> (Experiment, Duration) {
    let start = Instant::now();
    let run = run_benchmark(bench, cfg).unwrap();
    (run, start.elapsed())
}

fn end_to_end(run: &Experiment, bench: &Benchmark, t: Duration) -> Outcome {
    let t1 = run.test.per_type.get("T1").copied().unwrap_or(0.0);
    let (mut t1_hits, mut t1_total, mut neg_below) = (0, 0, 0);
    for (p, s) in bench.test.iter().zip(&run.test_scores) {
        let clone = alphacc::scorer::classify(*s, run.test.tau);
        match p.clone_type {
            Some(CloneType::T1) => {
                t1_total += 1;
                t1_hits += usize::from(clone);
            }
            None => neg_below += usize::from(clone),
            _ => {}
        }
    }
    outcome(
        run.test.f1 >= 0.85 && t1 == 1.0 && within(t, 1800.0),
        format!(
            "test F1 {:.4} (P {:.4}, R {:.4}), T1 F1 {t1:.4} ({t1_hits}/{t1_total} T1 found, {neg_below} negatives below tau), tau {:.4}, {:.0}s on {} thread(s)",
            run.test.f1,
            run.test.precision,
            run.test.recall,
            run.test.tau,
            t.as_secs_f64(),
            rayon::current_num_threads()
        ),
    )
}

fn msa_ablation(deep: &Experiment, single: &Experiment) -> Outcome {
    let f = |e: &Experiment| e.test.per_type.get("T4").copied().unwrap_or(0.0);
    outcome(
        f(deep) >= f(single),
        format!("T4 F1 R=5 {:.4}, R=1 {:.4}", f(deep), f(single)),
    )
}

fn determinism(first: &Experiment, second: &Experiment, bench: &Benchmark) -> Outcome {
    let identical = first.checkpoint.to_bytes() == second.checkpoint.to_bytes();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    first.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let rescored =
        alphacc::eval::score_dataset(&loaded, &bench.functions, &bench.test, &bench.functions, &first.index).unwrap();
    let same = rescored.len() == first.test_scores.len()
        && rescored
            .iter()
            .zip(&first.test_scores)
            .all(|(a, b)| a.value.to_bits() == b.value.to_bits());
    outcome(
        identical && same,
        format!(
            "checkpoints {}, {} reloaded scores {}",
            if identical { "bit-identical" } else { "DIFFER" },
            rescored.len(),
            if same { "bit-exact" } else { "DIFFER" }
        ),
    )
}

fn calibration() -> Outcome {
    // Clones at distances 0.10..0.19, non-clones at 0.50..0.59.
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for i in 0..10 {
        scores.push(Score {
            value: 0.10 + i as f64 / 100.0,
            polarity: Polarity::DistanceLike,
        });
        labels.push(1i8);
        scores.push(Score {
            value: 0.50 + i as f64 / 100.0,
            polarity: Polarity::DistanceLike,
        });
        labels.push(-1);
    }
    let (tau, f1) = calibrate_threshold(&scores, &labels);
    let oracle = calibrate_exhaustive(&scores, &labels);
    let midpoint = 0.19 + (0.50 - 0.19) / 2.0;
    outcome(
        tau == midpoint && f1 == 1.0 && (tau, f1) == oracle,
        format!("tau {tau} (midpoint {midpoint}), F1 {f1}, exhaustive {oracle:?}"),
    )
}

fn main() {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build_global()
        .expect("single-threaded pool");
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {n:>2} {name:<28} {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };
    report(1, "lexer fidelity", lexer_fidelity());
    report(2, "retrieval oracle", retrieval_oracle());
    report(3, "late interaction oracle", late_interaction_oracle());
    report(4, "margin loss values", margin_values());
    report(5, "gradient check", gradient_check());
    report(6, "row-permutation invariance", row_permutation());
    report(10, "threshold calibration", calibration());

    let bench = benchmark();
    let cfg = Config::default();
    let (deep, t) = timed_run(&bench, &cfg);
    report(7, "desk-scale end-to-end", end_to_end(&deep, &bench, t));
    let single_cfg = Config { r: 1, ..cfg.clone() };
    let (single, _) = timed_run(&bench, &single_cfg);
    report(8, "MSA ablation direction", msa_ablation(&deep, &single));
    let (again, _) = timed_run(&bench, &cfg);
    report(9, "determinism and persistence", determinism(&deep, &again, &bench));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
