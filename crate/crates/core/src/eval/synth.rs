//! Seeded synthetic clone benchmark built from algorithm templates.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Benchmark, ClonePair, CloneType};
use super::templates::{Template, TEMPLATES};
use crate::corpus::FunctionRecord;
use crate::error::{Error, Result};
use crate::lexer::{reformat, tokenize, FormatStyle, Language};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub problems: usize,
    pub variants: usize,
    /// Negatives per positive within each split.
    pub negative_ratio: f64,
    /// Fractions of problems assigned to train, validation and test.
    pub split: [f64; 3],
}

impl SynthConfig {
    pub fn new(seed: u64, problems: usize, variants: usize) -> Self {
        SynthConfig {
            seed,
            problems,
            variants,
            negative_ratio: 1.0,
            split: [0.7, 0.1, 0.2],
        }
    }
}

/// Transformations applied to one variant.
#[derive(Debug, Clone, Copy, Default)]
struct Style {
    alt: bool,
    while_loops: bool,
    rename: bool,
    swaps: bool,
    dead: usize,
}

/// Clone type a variant emulates relative to the problem's original, and how to render it.
fn plan(k: usize) -> (Option<CloneType>, Style) {
    let kind = match k {
        0 => None,
        1 => Some(CloneType::T1),
        2 => Some(CloneType::T2),
        3 => Some(CloneType::ST3),
        4 => Some(CloneType::MT3),
        5 => Some(CloneType::T4),
        _ => Some([CloneType::T2, CloneType::ST3, CloneType::MT3, CloneType::T4][(k - 6) % 4]),
    };
    let style = match kind {
        None | Some(CloneType::T1) => Style::default(),
        Some(CloneType::T2) => Style {
            rename: true,
            ..Style::default()
        },
        Some(CloneType::ST3) => Style {
            rename: true,
            swaps: true,
            dead: 1,
            ..Style::default()
        },
        Some(CloneType::MT3) => Style {
            rename: true,
            swaps: true,
            dead: 3,
            while_loops: true,
            ..Style::default()
        },
        Some(CloneType::T4) => Style {
            rename: true,
            alt: true,
            while_loops: true,
            ..Style::default()
        },
    };
    (kind, style)
}

const NAME_POOL: &[&str] = &[
    "a", "b", "c", "x", "y", "z", "n", "m", "k", "p", "q", "r", "s", "t", "u", "w", "idx", "pos", "cnt", "acc", "res",
    "out", "cur", "val", "tmp", "data", "items", "values", "total", "left", "right", "lo", "hi", "mid", "num", "len",
    "size", "limit", "bound", "step", "elem", "item", "arg", "input", "value", "first", "second", "third", "prev",
    "next", "head", "tail", "key", "target", "needle", "result", "answer", "buffer", "list", "seq", "array", "source",
    "text", "word", "letter", "digit", "base", "power", "factor", "sum", "count", "flag", "found", "score", "compute",
    "solve", "process", "calc", "run", "apply", "check", "evaluate", "handle", "work",
];

const DEAD_NAMES: &[&str] = &["unused", "spare", "debugFlag", "note", "scratch", "marker", "pad"];
const DEAD_WORDS: &[&str] = &["todo", "debug", "trace", "skip", "legacy"];

fn identifiers(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'$' {
            let j = ident_end(b, i + 1);
            out.insert(text[i + 1..j].to_string());
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn ident_end(b: &[u8], mut j: usize) -> usize {
    while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
        j += 1;
    }
    j
}

/// Replaces `$name` and `#k` markers.
fn substitute(line: &str, names: &HashMap<String, String>, literals: &[i64]) -> String {
    let b = line.as_bytes();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'$' => {
                let j = ident_end(b, i + 1);
                let name = &line[i + 1..j];
                out.push_str(names.get(name).map(String::as_str).unwrap_or(name));
                i = j;
            }
            b'#' if i + 1 < b.len() && b[i + 1].is_ascii_digit() => {
                let mut j = i + 1;
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                let k: usize = line[i + 1..j].parse().expect("digits");
                out.push_str(&literals[k].to_string());
                i = j;
            }
            _ => {
                let ch = line[i..].chars().next().expect("in bounds");
                out.push(ch);
                i += ch.len_utf8();
            }
        }
    }
    out
}

/// Expands `@swap` groups and `@for` loops into plain statement lines.
fn expand(text: &str, style: Style, rng: &mut ChaCha8Rng) -> Vec<String> {
    let raw: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let mut lines: Vec<String> = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        if raw[i].starts_with("@swap ") {
            let mut group: Vec<String> = Vec::new();
            while i < raw.len() && raw[i].starts_with("@swap ") {
                group.push(raw[i]["@swap ".len()..].to_string());
                i += 1;
            }
            if style.swaps && group.len() > 1 {
                let by = rng.random_range(1..group.len());
                group.rotate_left(by);
            }
            lines.extend(group);
        } else {
            lines.push(raw[i].to_string());
            i += 1;
        }
    }
    let mut out = Vec::new();
    let mut steps: Vec<String> = Vec::new();
    for line in lines {
        if let Some(head) = line.strip_prefix("@for") {
            let parts: Vec<&str> = head.splitn(3, ';').map(str::trim).collect();
            let (init, cond, step) = (
                parts[0],
                parts.get(1).copied().unwrap_or(""),
                parts.get(2).copied().unwrap_or(""),
            );
            if style.while_loops {
                if !init.is_empty() {
                    out.push(format!("{init};"));
                }
                out.push(format!("while ({cond}) {{"));
            } else {
                out.push(format!("for ({init}; {cond}; {step}) {{"));
            }
            steps.push(step.to_string());
        } else if line == "@end" {
            let step = steps.pop().expect("balanced @for/@end");
            if style.while_loops && !step.is_empty() {
                out.push(format!("{step};"));
            }
            out.push("}".to_string());
        } else {
            out.push(line);
        }
    }
    out
}

fn insert_dead_code(lines: &mut Vec<String>, n: usize, rng: &mut ChaCha8Rng) {
    for k in 0..n {
        let spots: Vec<usize> = (1..lines.len())
            .filter(|&j| {
                !lines[j - 1].starts_with("return") && !lines[j].starts_with("else") && !lines[j].starts_with("} else")
            })
            .collect();
        let Some(&at) = spots.get(rng.random_range(0..spots.len().max(1))) else {
            return;
        };
        let name = format!("{}{k}", DEAD_NAMES[rng.random_range(0..DEAD_NAMES.len())]);
        let v = rng.random_range(0..100);
        let stmt = match rng.random_range(0..4) {
            0 => format!("int {name} = {v};"),
            1 => format!("boolean {name} = {v} > {};", rng.random_range(0..100)),
            2 => format!(
                "String {name} = \"{}\";",
                DEAD_WORDS[rng.random_range(0..DEAD_WORDS.len())]
            ),
            _ => format!("double {name} = {v}.5;"),
        };
        lines.insert(at, stmt);
    }
}

fn draw_literals(t: &Template, rng: &mut ChaCha8Rng, avoid: Option<&[i64]>) -> Vec<i64> {
    t.literals
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| loop {
            let v = rng.random_range(lo..=hi);
            if lo == hi || avoid.is_none_or(|a| a[k] != v) {
                break v;
            }
        })
        .collect()
}

fn renaming(t: &Template, rng: &mut ChaCha8Rng) -> HashMap<String, String> {
    let mut ids = identifiers(t.main);
    ids.extend(identifiers(t.alt));
    let mut pool: Vec<&str> = NAME_POOL.to_vec();
    pool.shuffle(rng);
    pool.retain(|p| !ids.contains(*p));
    let mut pool = pool.into_iter();
    ids.into_iter()
        .map(|id| {
            let new = pool.next().map(str::to_string).unwrap_or_else(|| format!("{id}2"));
            (id, new)
        })
        .collect()
}

fn render(
    t: &Template,
    style: Style,
    literals: &[i64],
    names: &HashMap<String, String>,
    rng: &mut ChaCha8Rng,
) -> String {
    let mut lines = expand(if style.alt { t.alt } else { t.main }, style, rng);
    insert_dead_code(&mut lines, style.dead, rng);
    lines
        .iter()
        .map(|l| substitute(l, names, literals))
        .collect::<Vec<_>>()
        .join("\n")
}

fn stronger(a: Option<CloneType>, b: Option<CloneType>) -> CloneType {
    a.max(b).unwrap_or(CloneType::T1)
}

struct Problem {
    template: usize,
    first: usize,
}

fn sample_negatives(
    funcs: &[(usize, usize)],
    problems: &[Problem],
    want: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let tmpl = |f: usize| problems[funcs[f].0].template;
    let n = funcs.len();
    let mut per_template: HashMap<usize, usize> = HashMap::new();
    for f in 0..n {
        *per_template.entry(tmpl(f)).or_default() += 1;
    }
    let pool = n * n.saturating_sub(1) / 2 - per_template.values().map(|&c| c * (c - 1) / 2).sum::<usize>();
    let want = want.min(pool);
    if want * 4 < pool {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(want);
        while out.len() < want {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            let key = (a.min(b), a.max(b));
            if tmpl(a) != tmpl(b) && seen.insert(key) {
                out.push(key);
            }
        }
        out
    } else {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| tmpl(a) != tmpl(b))
            .collect();
        all.shuffle(rng);
        all.truncate(want);
        all
    }
}

/// Generates functions and labeled pairs, split by problem.
///
/// Every problem instantiates one template; problems beyond the template
/// count reuse templates with fresh literals. Positives pair variants of the
/// same problem and carry the stronger of the two variants' clone types.
/// Negatives pair functions of different templates within a split.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Benchmark> {
    if cfg.problems < 2 {
        return Err(Error::Config("synthetic benchmark needs at least 2 problems".into()));
    }
    if cfg.variants == 0 {
        return Err(Error::Config("synthetic benchmark needs at least 1 variant".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..TEMPLATES.len()).collect();
    order.shuffle(&mut rng);
    let mut problems = Vec::with_capacity(cfg.problems);
    let mut records = Vec::new();
    let mut kinds = Vec::new();
    let mut funcs: Vec<(usize, usize)> = Vec::new();
    let identity = HashMap::new();
    for p in 0..cfg.problems {
        let template = order[p % order.len()];
        let t = &TEMPLATES[template];
        let base_lits = draw_literals(t, &mut rng, None);
        let base = render(t, Style::default(), &base_lits, &identity, &mut rng);
        problems.push(Problem {
            template,
            first: records.len(),
        });
        for k in 0..cfg.variants {
            let (kind, style) = plan(k);
            let code = match kind {
                None => base.clone(),
                Some(CloneType::T1) => {
                    let toks = tokenize(&base, Language::JavaLike)?;
                    reformat(&toks.tokens, FormatStyle::default(), &mut rng)
                }
                Some(_) => {
                    let names = if style.rename {
                        renaming(t, &mut rng)
                    } else {
                        HashMap::new()
                    };
                    let lits = draw_literals(t, &mut rng, Some(&base_lits));
                    render(t, style, &lits, &names, &mut rng)
                }
            };
            let id = format!("p{p:04}_{}_v{k}", t.name);
            let lines = code.lines().count();
            records.push(FunctionRecord {
                id: id.clone(),
                language: Language::JavaLike.name().to_string(),
                code,
                file_path: format!("p{p:04}/v{k}.java"),
                start_line: 1,
                end_line: lines,
            });
            kinds.push(kind);
            funcs.push((p, k));
        }
    }

    let mut shuffled: Vec<usize> = (0..cfg.problems).collect();
    shuffled.shuffle(&mut rng);
    let total: f64 = cfg.split.iter().sum();
    let n_train = ((cfg.split[0] / total) * cfg.problems as f64).round() as usize;
    let n_val = (((cfg.split[1] / total) * cfg.problems as f64).round() as usize).min(cfg.problems - n_train);
    let bounds = [0, n_train, n_train + n_val, cfg.problems];

    let mut splits: Vec<Vec<ClonePair>> = Vec::new();
    for s in 0..3 {
        let mut chosen: Vec<usize> = shuffled[bounds[s]..bounds[s + 1]].to_vec();
        chosen.sort_unstable();
        let mut pairs = Vec::new();
        let mut members = Vec::new();
        for &p in &chosen {
            let first = problems[p].first;
            members.extend(first..first + cfg.variants);
            for i in 0..cfg.variants {
                for j in i + 1..cfg.variants {
                    pairs.push(ClonePair {
                        id1: records[first + i].id.clone(),
                        id2: records[first + j].id.clone(),
                        label: 1,
                        clone_type: Some(stronger(kinds[first + i], kinds[first + j])),
                    });
                }
            }
        }
        let want = (pairs.len() as f64 * cfg.negative_ratio).round() as usize;
        let member_funcs: Vec<(usize, usize)> = members.iter().map(|&f| funcs[f]).collect();
        for (a, b) in sample_negatives(&member_funcs, &problems, want, &mut rng) {
            let (fa, fb) = (members[a], members[b]);
            pairs.push(ClonePair {
                id1: records[fa].id.clone(),
                id2: records[fb].id.clone(),
                label: -1,
                clone_type: None,
            });
        }
        splits.push(pairs);
    }
    let test = splits.pop().unwrap_or_default();
    let validation = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    Benchmark::from_parts(records, Language::JavaLike, train, validation, test)
}

/// Clone-type counts of a pair list, for reporting.
pub fn type_histogram(pairs: &[ClonePair]) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for p in pairs {
        let key = match (p.label, p.clone_type) {
            (-1, _) => "negative".to_string(),
            (_, Some(t)) => t.name().to_string(),
            _ => "untyped".to_string(),
        };
        *h.entry(key).or_default() += 1;
    }
    h
}
