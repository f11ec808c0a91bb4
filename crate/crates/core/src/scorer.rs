//! Pooled fragment vectors and pairwise similarity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ops::{axpy, dot};
use crate::model::real::{gemm, View, ViewMut};
use crate::model::{CellLayout, MsaTensor, Real};

/// Norm below which a pooled vector is treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    LateInteraction,
    Cosine,
    Euclidean,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::LateInteraction => "late_interaction",
            Measure::Cosine => "cosine",
            Measure::Euclidean => "euclidean",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            Measure::Cosine => Polarity::SimilarityLike,
            _ => Polarity::DistanceLike,
        }
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(c: u32) -> Option<Measure> {
        [Measure::LateInteraction, Measure::Cosine, Measure::Euclidean]
            .get(c as usize)
            .copied()
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "late_interaction" => Ok(Measure::LateInteraction),
            "cosine" => Ok(Measure::Cosine),
            "euclidean" => Ok(Measure::Euclidean),
            _ => Err(Error::Config(format!(
                "unknown measure `{s}` (expected late_interaction, cosine or euclidean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    DistanceLike,
    SimilarityLike,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityConfig {
    pub measure: Measure,
    /// Average both directions of late interaction.
    pub symmetrize: bool,
    pub tau: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            measure: Measure::LateInteraction,
            symmetrize: true,
            tau: 1.0,
        }
    }
}

/// Unit-norm vectors, one per valid query-row column.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFragment<T> {
    pub d: usize,
    /// `n × d`, row-major.
    pub vectors: Vec<T>,
    pub columns: Vec<usize>,
    /// Columns whose mean was zero and got replaced by e₁.
    pub flagged: Vec<bool>,
    norms: Vec<T>,
}

impl<T: Real> PooledFragment<T> {
    /// Wraps vectors that are already unit length.
    pub fn from_unit_vectors(vectors: Vec<T>, d: usize) -> PooledFragment<T> {
        let n = vectors.len() / d;
        PooledFragment {
            d,
            vectors,
            columns: (0..n).collect(),
            flagged: vec![false; n],
            norms: vec![T::one(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[T] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }
}

/// Normalizes `v` in place; returns its former norm, or `None` (and writes e₁) if it was zero.
fn normalize<T: Real>(v: &mut [T]) -> Option<T> {
    let norm = dot(v, v).sqrt();
    if norm.f64() < ZERO_NORM {
        v.fill(T::zero());
        v[0] = T::one();
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(norm)
}

/// Column means over the rows valid at each valid query column, scaled to unit length.
pub fn pool_packed<T: Real>(layout: &CellLayout, y: &[T], d: usize) -> Result<PooledFragment<T>> {
    let n = layout.row_len(0);
    if n == 0 {
        return Err(Error::Data("query row has no valid cells".into()));
    }
    let mut vectors = vec![T::zero(); n * d];
    let mut columns = Vec::with_capacity(n);
    let mut flagged = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for i in 0..n {
        let c = layout.cols[i];
        let cells = &layout.col_cells[c];
        let v = &mut vectors[i * d..(i + 1) * d];
        for &cell in cells {
            axpy(T::one(), &y[cell * d..(cell + 1) * d], v);
        }
        let inv = T::one() / T::of(cells.len() as f64);
        v.iter_mut().for_each(|x| *x *= inv);
        let norm = normalize(v);
        columns.push(c);
        flagged.push(norm.is_none());
        norms.push(norm.unwrap_or(T::one()));
    }
    Ok(PooledFragment {
        d,
        vectors,
        columns,
        flagged,
        norms,
    })
}

/// Gradient of the pooled vectors with respect to the encoder output `N × d`.
pub fn pool_backward<T: Real>(layout: &CellLayout, frag: &PooledFragment<T>, dv: &[T]) -> Vec<T> {
    let d = frag.d;
    let mut dy = vec![T::zero(); layout.cells() * d];
    for i in 0..frag.len() {
        if frag.flagged[i] {
            continue;
        }
        let v = frag.vector(i);
        let g = &dv[i * d..(i + 1) * d];
        let vg = dot(v, g);
        let cells = &layout.col_cells[frag.columns[i]];
        let s = T::one() / (frag.norms[i] * T::of(cells.len() as f64));
        let dp: Vec<T> = g.iter().zip(v).map(|(&gj, &vj)| (gj - vj * vg) * s).collect();
        for &cell in cells {
            axpy(T::one(), &dp, &mut dy[cell * d..(cell + 1) * d]);
        }
    }
    dy
}

pub fn pool_and_normalize<T: Real>(h: &MsaTensor<T>) -> Result<PooledFragment<T>> {
    let (layout, data) = h.pack();
    pool_packed(&layout, &data, h.d)
}

/// Euclidean distance between two token vectors.
pub fn token_distance<T: Real>(u: &[T], v: &[T]) -> T {
    let mut s = T::zero();
    for (&a, &b) in u.iter().zip(v) {
        s += (a - b) * (a - b);
    }
    s.sqrt()
}

/// Mean over `a` of the distance to the nearest vector of `b`, plus the chosen neighbours.
fn directed<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>) -> (T, Vec<usize>) {
    let (n1, n2, d) = (a.len(), b.len(), a.d);
    let mut gram = vec![T::zero(); n1 * n2];
    gemm(
        T::one(),
        View::rm(&a.vectors, n1, d),
        View::rm(&b.vectors, n2, d).t(),
        T::zero(),
        ViewMut::rm(&mut gram, n1, n2),
    );
    let sq: Vec<T> = (0..n2).map(|j| dot(b.vector(j), b.vector(j))).collect();
    let mut total = T::zero();
    let mut arg = Vec::with_capacity(n1);
    for i in 0..n1 {
        let row = &gram[i * n2..(i + 1) * n2];
        let mut best = 0;
        let mut best_v = sq[0] - row[0] - row[0];
        for j in 1..n2 {
            let v = sq[j] - row[j] - row[j];
            if v < best_v {
                best = j;
                best_v = v;
            }
        }
        total += token_distance(a.vector(i), b.vector(best));
        arg.push(best);
    }
    (total / T::of(n1 as f64), arg)
}

fn late_interaction_value<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>, symmetrize: bool) -> T {
    let s12 = directed(a, b).0;
    if symmetrize {
        (s12 + directed(b, a).0) / T::of(2.0)
    } else {
        s12
    }
}

/// Mean of per-token minimum distances; optionally averaged over both directions.
pub fn late_interaction<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>, symmetrize: bool) -> Score {
    Score {
        value: late_interaction_value(a, b, symmetrize).f64(),
        polarity: Polarity::DistanceLike,
    }
}

/// Double loop over every token pair.
pub fn late_interaction_brute_force<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>, symmetrize: bool) -> f64 {
    let dir = |a: &PooledFragment<T>, b: &PooledFragment<T>| {
        let mut total = 0.0;
        for i in 0..a.len() {
            let mut best = f64::INFINITY;
            for j in 0..b.len() {
                let mut s = 0.0;
                for k in 0..a.d {
                    let diff = a.vector(i)[k].f64() - b.vector(j)[k].f64();
                    s += diff * diff;
                }
                best = best.min(s.sqrt());
            }
            total += best;
        }
        total / a.len() as f64
    };
    if symmetrize {
        (dir(a, b) + dir(b, a)) / 2.0
    } else {
        dir(a, b)
    }
}

fn mean_direction<T: Real>(f: &PooledFragment<T>) -> (Vec<T>, Option<T>) {
    let d = f.d;
    let mut m = vec![T::zero(); d];
    for i in 0..f.len() {
        axpy(T::one(), f.vector(i), &mut m);
    }
    let inv = T::one() / T::of(f.len() as f64);
    m.iter_mut().for_each(|x| *x *= inv);
    let norm = normalize(&mut m);
    (m, norm)
}

/// Cosine of the renormalized mean vectors.
pub fn fragment_cosine<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>) -> Score {
    let (ma, _) = mean_direction(a);
    let (mb, _) = mean_direction(b);
    Score {
        value: dot(&ma, &mb).f64(),
        polarity: Polarity::SimilarityLike,
    }
}

/// Distance between the renormalized mean vectors.
pub fn fragment_euclidean<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>) -> Score {
    let (ma, _) = mean_direction(a);
    let (mb, _) = mean_direction(b);
    Score {
        value: token_distance(&ma, &mb).f64(),
        polarity: Polarity::DistanceLike,
    }
}

/// Clone decision: distances below `tau`, similarities above it.
pub fn classify(score: Score, tau: f64) -> bool {
    match score.polarity {
        Polarity::DistanceLike => score.value < tau,
        Polarity::SimilarityLike => score.value > tau,
    }
}

/// Raw value of the configured measure in the model's precision.
pub fn measure_value<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>, measure: Measure, symmetrize: bool) -> T {
    match measure {
        Measure::LateInteraction => late_interaction_value(a, b, symmetrize),
        Measure::Cosine | Measure::Euclidean => {
            let (ma, _) = mean_direction(a);
            let (mb, _) = mean_direction(b);
            if measure == Measure::Cosine {
                dot(&ma, &mb)
            } else {
                token_distance(&ma, &mb)
            }
        }
    }
}

pub fn score<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>, cfg: &SimilarityConfig) -> Score {
    Score {
        value: measure_value(a, b, cfg.measure, cfg.symmetrize).f64(),
        polarity: cfg.measure.polarity(),
    }
}

fn directed_backward<T: Real>(a: &PooledFragment<T>, b: &PooledFragment<T>, scale: T, da: &mut [T], db: &mut [T]) {
    let d = a.d;
    let (_, arg) = directed(a, b);
    let w = scale / T::of(a.len() as f64);
    for (i, &j) in arg.iter().enumerate() {
        let dist = token_distance(a.vector(i), b.vector(j));
        if dist == T::zero() {
            continue;
        }
        let k = w / dist;
        for t in 0..d {
            let g = k * (a.vector(i)[t] - b.vector(j)[t]);
            da[i * d + t] += g;
            db[j * d + t] -= g;
        }
    }
}

/// Gradient of the unit mean direction: `dm` at the normalized mean, pushed to each member vector.
fn mean_direction_backward<T: Real>(f: &PooledFragment<T>, m: &[T], norm: Option<T>, dm: &[T], out: &mut [T]) {
    let Some(norm) = norm else { return };
    let d = f.d;
    let md = dot(m, dm);
    let s = T::one() / (norm * T::of(f.len() as f64));
    let dp: Vec<T> = dm.iter().zip(m).map(|(&g, &v)| (g - v * md) * s).collect();
    for i in 0..f.len() {
        axpy(T::one(), &dp, &mut out[i * d..(i + 1) * d]);
    }
}

/// Gradients of the measure value with respect to both fragments' vectors, times `ds`.
pub fn measure_backward<T: Real>(
    a: &PooledFragment<T>,
    b: &PooledFragment<T>,
    measure: Measure,
    symmetrize: bool,
    ds: T,
) -> (Vec<T>, Vec<T>) {
    let mut da = vec![T::zero(); a.vectors.len()];
    let mut db = vec![T::zero(); b.vectors.len()];
    match measure {
        Measure::LateInteraction => {
            if symmetrize {
                let half = ds / T::of(2.0);
                directed_backward(a, b, half, &mut da, &mut db);
                directed_backward(b, a, half, &mut db, &mut da);
            } else {
                directed_backward(a, b, ds, &mut da, &mut db);
            }
        }
        Measure::Cosine | Measure::Euclidean => {
            let (ma, na) = mean_direction(a);
            let (mb, nb) = mean_direction(b);
            let (dma, dmb): (Vec<T>, Vec<T>) = if measure == Measure::Cosine {
                (
                    mb.iter().map(|&x| x * ds).collect(),
                    ma.iter().map(|&x| x * ds).collect(),
                )
            } else {
                let dist = token_distance(&ma, &mb);
                if dist == T::zero() {
                    return (da, db);
                }
                let g: Vec<T> = ma.iter().zip(&mb).map(|(&x, &y)| (x - y) * ds / dist).collect();
                let ng = g.iter().map(|&x| -x).collect();
                (g, ng)
            };
            mean_direction_backward(a, &ma, na, &dma, &mut da);
            mean_direction_backward(b, &mb, nb, &dmb, &mut db);
        }
    }
    (da, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frag(vs: &[&[f64]]) -> PooledFragment<f64> {
        let d = vs[0].len();
        PooledFragment::from_unit_vectors(vs.iter().flat_map(|v| v.iter().copied()).collect(), d)
    }

    fn random_frag(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PooledFragment<f64> {
        let mut v: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for row in v.chunks_exact_mut(d) {
            normalize(row);
        }
        PooledFragment::from_unit_vectors(v, d)
    }

    #[test]
    fn token_distance_values() {
        let (e1, e2) = ([1.0f64, 0.0], [0.0f64, 1.0]);
        assert_eq!(token_distance(&e1, &e1), 0.0);
        assert!((token_distance(&e1, &e2) - std::f64::consts::SQRT_2).abs() < 1e-8);
        assert_eq!(token_distance(&e1, &[-1.0, 0.0]), 2.0);
    }

    #[test]
    fn late_interaction_hand_case() {
        let p1 = frag(&[&[1.0, 0.0]]);
        let p2 = frag(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(late_interaction(&p1, &p2, false).value, 0.0);
        assert!((late_interaction(&p2, &p1, false).value - 2f64.sqrt() / 2.0).abs() < 1e-15);
        let s = late_interaction(&p1, &p2, true).value;
        assert!((s - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert_eq!(late_interaction(&p1, &p1, true).value, 0.0);
    }

    #[test]
    fn late_interaction_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (n1, n2) = (rng.random_range(1..20), rng.random_range(1..20));
            let a = random_frag(&mut rng, n1, 6);
            let b = random_frag(&mut rng, n2, 6);
            for sym in [false, true] {
                let v = late_interaction(&a, &b, sym).value;
                assert!((v - late_interaction_brute_force(&a, &b, sym)).abs() < 1e-12);
            }
            assert_eq!(late_interaction(&a, &b, true), late_interaction(&b, &a, true));
        }
    }

    #[test]
    fn fragment_means() {
        let a = frag(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = frag(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        assert!((fragment_cosine(&a, &a).value - 1.0).abs() < 1e-15);
        assert_eq!(fragment_euclidean(&a, &a).value, 0.0);
        assert!((fragment_cosine(&a, &b).value + 1.0).abs() < 1e-15);
        assert!((fragment_euclidean(&a, &b).value - 2.0).abs() < 1e-15);
        // mean of (1,0),(0,1) is along (1,1); against (1,0) the cosine is 1/√2
        let c = frag(&[&[1.0, 0.0]]);
        assert!((fragment_cosine(&a, &c).value - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn classify_rule() {
        let dist = |v: f64| Score {
            value: v,
            polarity: Polarity::DistanceLike,
        };
        assert!(classify(dist(0.0), 1.0));
        assert!(!classify(dist(2.0), 1.0));
        assert!(classify(
            Score {
                value: 0.9,
                polarity: Polarity::SimilarityLike
            },
            0.5
        ));
    }

    #[test]
    fn pooling_hand_case() {
        // R=3, L=2, d=2; column 1 valid in rows 0 and 2 only.
        let mask = vec![true, true, true, false, true, true];
        let vals = vec![
            1.0, 0.0, 3.0, 4.0, //
            1.0, 2.0, 0.0, 0.0, //
            1.0, 4.0, 1.0, 2.0,
        ];
        let t = MsaTensor::new(3, 2, 2, vals, mask).unwrap();
        let p = pool_and_normalize(&t).unwrap();
        // column 0: mean (1, 2) → (1, 2)/√5; column 1: mean (2, 3) → (2, 3)/√13
        let want = [
            1.0 / 5f64.sqrt(),
            2.0 / 5f64.sqrt(),
            2.0 / 13f64.sqrt(),
            3.0 / 13f64.sqrt(),
        ];
        for (a, b) in p.vectors.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let zero = MsaTensor::new(1, 1, 2, vec![0.0, 0.0], vec![true]).unwrap();
        let z = pool_and_normalize(&zero).unwrap();
        assert_eq!(z.vectors, [1.0, 0.0]);
        assert!(z.flagged[0]);
        let empty = MsaTensor::<f64>::new(1, 1, 2, vec![0.0, 0.0], vec![false]).unwrap();
        assert!(pool_and_normalize(&empty).is_err());
    }

    #[test]
    fn measure_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 5;
        for measure in [Measure::LateInteraction, Measure::Cosine, Measure::Euclidean] {
            for sym in [false, true] {
                let a = random_frag(&mut rng, 4, d);
                let b = random_frag(&mut rng, 3, d);
                let (da, _) = measure_backward(&a, &b, measure, sym, 1.0);
                for i in 0..a.vectors.len() {
                    let h = 1e-6;
                    let mut ap = a.clone();
                    ap.vectors[i] += h;
                    let mut am = a.clone();
                    am.vectors[i] -= h;
                    let fd = (measure_value(&ap, &b, measure, sym) - measure_value(&am, &b, measure, sym)) / (2.0 * h);
                    assert!(
                        (fd - da[i]).abs() < 1e-6,
                        "{measure} sym={sym} i={i}: {fd} vs {}",
                        da[i]
                    );
                }
            }
        }
    }
}
