use std::fs;

use alphacc::corpus::{build_msa, ingest, NGramIndex};
use alphacc::embeddings::build_vocab;
use alphacc::eval::{evaluate, generate_synthetic, load_benchmark, Split, SynthConfig};
use alphacc::lexer::Language;
use alphacc::trainer::{train, Checkpoint, TrainInputs};
use alphacc::{Config, Error};

const FILE_A: &str = r#"
class A {
    int add(int x, int y) { return x + y; }
    int twice(int x) { return add(x, x); }
}
"#;

const FILE_B: &str = r#"
int sum(int *v, int n) {
    int s = 0;
    for (int i = 0; i < n; i++) s += v[i];
    return s;
}
"#;

#[test]
fn directory_ingest_filters_by_language_and_gives_context() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("src")).unwrap();
    fs::write(dir.path().join("src/A.java"), FILE_A).unwrap();
    fs::write(dir.path().join("sum.c"), FILE_B).unwrap();
    fs::write(dir.path().join("Broken.java"), "class B { void f() { \"open }").unwrap();

    let java = ingest(dir.path(), Language::JavaLike).unwrap();
    assert_eq!(java.store.len(), 2);
    assert_eq!(java.skipped.len(), 1);
    let twice = java.store.iter().find(|f| f.tokens[1].text == "twice").unwrap();
    assert!(!twice.context_before.is_empty());

    let c = ingest(dir.path(), Language::CLike).unwrap();
    assert_eq!(c.store.len(), 1);

    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(ingest(empty.path(), Language::JavaLike), Err(Error::Data(_))));
}

#[test]
fn msa_rows_come_from_the_index() {
    let bench = generate_synthetic(&SynthConfig::new(4, 10, 3)).unwrap();
    let index = NGramIndex::build(&bench.functions, 5, 1 << 20);
    for f in bench.functions.iter() {
        let msa = build_msa(f, &bench.functions, &index, 4, 32);
        assert_eq!(msa.depth(), 4);
        assert_eq!(msa.width(), 32);
        assert_eq!(msa.row_ids[0], f.id);
        assert_eq!(&msa.row_ids[1..], index.retrieve_topk(&f.id, &f.tokens, 3).as_slice());
    }
}

#[test]
fn index_round_trips_and_remembers_its_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let bench = generate_synthetic(&SynthConfig::new(4, 6, 2)).unwrap();
    let other = generate_synthetic(&SynthConfig::new(5, 6, 2)).unwrap();
    let index = NGramIndex::build(&bench.functions, 5, 1 << 16);
    let path = dir.path().join("i.idx");
    index.save(&path).unwrap();
    let back = NGramIndex::load(&path).unwrap();
    assert_eq!(back.digest(), index.digest());
    assert!(back.built_from(&bench.functions));
    assert!(!back.built_from(&other.functions));
    fs::write(&path, b"garbage").unwrap();
    assert!(matches!(NGramIndex::load(&path), Err(Error::Format(_))));
}

#[test]
fn small_training_run_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let bench = generate_synthetic(&SynthConfig::new(6, 10, 3)).unwrap();
    bench.write(dir.path()).unwrap();
    let bench = load_benchmark(dir.path()).unwrap();
    let mut cfg = Config::default();
    cfg.apply_pairs(&[
        "d=16",
        "d_ff=32",
        "L=40",
        "R=3",
        "H=2",
        "B=1",
        "lr=0.002",
        "batch_size=8",
    ])
    .unwrap();
    let index = NGramIndex::build(&bench.functions, cfg.ngram, cfg.buckets);
    let vocab = build_vocab(&bench.functions, 1);
    let inputs = TrainInputs {
        functions: &bench.functions,
        train: &bench.train,
        validation: &bench.validation,
        corpus: &bench.functions,
        index: &index,
    };
    let (ckpt, report) = train(&inputs, &vocab, None, &cfg).unwrap();
    assert!(report.steps > 0);
    assert!(report.epoch_loss.iter().all(|l| l.is_finite()));

    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.to_bytes(), ckpt.to_bytes());
    assert_eq!(back.config, ckpt.config);

    let test = bench.dataset(Split::Test);
    let a = evaluate(&ckpt, &test, &bench.functions, &index, None).unwrap();
    let b = evaluate(&back, &test, &bench.functions, &index, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_pairs, test.pairs.len());

    // Same seed, same bytes.
    let (again, _) = train(&inputs, &vocab, None, &cfg).unwrap();
    assert_eq!(again.to_bytes(), ckpt.to_bytes());
}
