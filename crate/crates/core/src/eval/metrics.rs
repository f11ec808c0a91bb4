use std::collections::BTreeMap;

use serde::Serialize;

use super::dataset::{ClonePair, CloneType};
use crate::scorer::{classify, Polarity, Score};

/// Gap between an extreme score and the sentinel threshold placed beyond it.
pub const SENTINEL_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    /// F1 of each clone type's positives against all negatives.
    pub per_type: BTreeMap<String, f64>,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Metrics {
        Metrics {
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            confusion: c,
            per_type: BTreeMap::new(),
        }
    }
}

/// Overall and per-clone-type metrics for predictions aligned with `pairs`.
pub fn compute_metrics(pairs: &[ClonePair], predicted: &[bool]) -> Metrics {
    assert_eq!(pairs.len(), predicted.len());
    let mut all = Confusion::default();
    let mut negatives = Confusion::default();
    let mut typed: BTreeMap<CloneType, Confusion> = BTreeMap::new();
    for (p, &pred) in pairs.iter().zip(predicted) {
        all.add(pred, p.is_clone());
        if !p.is_clone() {
            negatives.add(pred, false);
        } else if let Some(t) = p.clone_type {
            typed.entry(t).or_default().add(pred, true);
        }
    }
    let mut m = Metrics::from_confusion(all);
    for (t, c) in typed {
        let merged = Confusion {
            fp: negatives.fp,
            tn: negatives.tn,
            ..c
        };
        m.per_type.insert(t.name().to_string(), merged.f1());
    }
    m
}

pub fn classify_all(scores: &[Score], tau: f64) -> Vec<bool> {
    scores.iter().map(|&s| classify(s, tau)).collect()
}

/// Candidate thresholds: midpoints of adjacent distinct scores plus one beyond each end.
pub fn candidate_thresholds(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let Some((&lo, &hi)) = v.first().zip(v.last()) else {
        return Vec::new();
    };
    let mut out = vec![lo - SENTINEL_GAP * lo.abs().max(1.0)];
    out.extend(v.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    out.push(hi + SENTINEL_GAP * hi.abs().max(1.0));
    out
}

/// Threshold maximizing F1 over the candidate sweep; ties go to the smaller τ.
///
/// Returns `(τ, F1)`. Runs in `O(n log n)` with cumulative counts.
pub fn calibrate_threshold(scores: &[Score], labels: &[i8]) -> (f64, f64) {
    assert_eq!(scores.len(), labels.len());
    let Some(first) = scores.first() else {
        return (f64::NAN, 0.0);
    };
    let polarity = first.polarity;
    let mut items: Vec<(f64, bool)> = scores.iter().zip(labels).map(|(s, &y)| (s.value, y > 0)).collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_pos = items.iter().filter(|x| x.1).count() as u64;
    let n = items.len() as u64;
    let cands = candidate_thresholds(&items.iter().map(|x| x.0).collect::<Vec<_>>());
    // below[k] = (#items, #positives) with value < cands[k].
    let mut best = (f64::NAN, -1.0);
    let (mut i, mut cnt, mut pos) = (0usize, 0u64, 0u64);
    for &tau in &cands {
        while i < items.len() && items[i].0 < tau {
            cnt += 1;
            pos += u64::from(items[i].1);
            i += 1;
        }
        let c = match polarity {
            Polarity::DistanceLike => Confusion {
                tp: pos,
                fp: cnt - pos,
                fn_: total_pos - pos,
                tn: (n - cnt) - (total_pos - pos),
            },
            Polarity::SimilarityLike => Confusion {
                tp: total_pos - pos,
                fp: (n - cnt) - (total_pos - pos),
                fn_: pos,
                tn: cnt - pos,
            },
        };
        let f = c.f1();
        if f > best.1 {
            best = (tau, f);
        }
    }
    best
}

/// Direct sweep that reclassifies every pair for every candidate.
pub fn calibrate_exhaustive(scores: &[Score], labels: &[i8]) -> (f64, f64) {
    let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
    let mut best = (f64::NAN, -1.0);
    for tau in candidate_thresholds(&values) {
        let mut c = Confusion::default();
        for (s, &y) in scores.iter().zip(labels) {
            c.add(classify(*s, tau), y > 0);
        }
        if c.f1() > best.1 {
            best = (tau, c.f1());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: f64) -> Score {
        Score {
            value: v,
            polarity: Polarity::DistanceLike,
        }
    }

    #[test]
    fn hand_metrics() {
        let c = Confusion {
            tp: 8,
            fp: 2,
            fn_: 4,
            tn: 0,
        };
        assert!((c.precision() - 0.8).abs() < 1e-15);
        assert!((c.recall() - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.f1() - 8.0 / 11.0).abs() < 1e-15);
        let none = Confusion {
            tp: 0,
            fp: 0,
            fn_: 5,
            tn: 5,
        };
        assert_eq!((none.precision(), none.recall(), none.f1()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn per_type_uses_all_negatives() {
        let mk = |l: i8, t: Option<CloneType>| ClonePair {
            id1: "a".into(),
            id2: "b".into(),
            label: l,
            clone_type: t,
        };
        let pairs = vec![
            mk(1, Some(CloneType::T1)),
            mk(1, Some(CloneType::T4)),
            mk(-1, None),
            mk(-1, None),
        ];
        let m = compute_metrics(&pairs, &[true, false, true, false]);
        assert_eq!(m.per_type["T1"], f1(0.5, 1.0));
        assert_eq!(m.per_type["T4"], 0.0);
        assert_eq!(
            m.confusion,
            Confusion {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
    }

    #[test]
    fn two_clusters_give_the_midpoint() {
        let scores: Vec<Score> = [0.2, 0.2, 0.2, 1.8, 1.8].iter().map(|&v| dist(v)).collect();
        let (tau, f) = calibrate_threshold(&scores, &[1, 1, 1, -1, -1]);
        assert_eq!(tau, 1.0);
        assert_eq!(f, 1.0);
    }

    #[test]
    fn single_positive_and_inseparable() {
        let (tau, f) = calibrate_threshold(&[dist(0.7)], &[1]);
        assert!(tau > 0.7 && tau < 0.7 + 1e-5 && f == 1.0);
        let s = vec![dist(0.5); 4];
        let (tau, f) = calibrate_threshold(&s, &[1, 1, -1, -1]);
        assert!(tau > 0.5 && tau < 0.5 + 1e-5);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_polarity() {
        let s: Vec<Score> = [0.9, 0.8, -0.1]
            .iter()
            .map(|&v| Score {
                value: v,
                polarity: Polarity::SimilarityLike,
            })
            .collect();
        let (tau, f) = calibrate_threshold(&s, &[1, 1, -1]);
        assert!((tau - 0.35).abs() < 1e-12 && f == 1.0);
        assert_eq!(calibrate_exhaustive(&s, &[1, 1, -1]), (tau, f));
    }
}
