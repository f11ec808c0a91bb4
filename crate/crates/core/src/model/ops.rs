//! Row-wise kernels with hand-written backward passes.

use super::real::Real;

pub const LN_EPS: f64 = 1e-5;

/// Cached statistics of a layer norm over `n` rows of width `d`.
#[derive(Debug, Clone, Default)]
pub struct LnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

/// `y = g ⊙ (x − μ)/σ + b` per row.
pub fn layer_norm<T: Real>(x: &[T], g: &[T], b: &[T], d: usize) -> (Vec<T>, LnCache<T>) {
    let n = x.len() / d;
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); n];
    let eps = T::of(LN_EPS);
    let dd = T::of(d as f64);
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().copied().sum::<T>() / dd;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dd;
        let is = T::one() / (var + eps).sqrt();
        inv_std[i] = is;
        for j in 0..d {
            let h = (row[j] - mean) * is;
            xhat[i * d + j] = h;
            y[i * d + j] = g[j] * h + b[j];
        }
    }
    (y, LnCache { xhat, inv_std })
}

/// Accumulates `dg`, `db` and returns `dx`.
pub fn layer_norm_backward<T: Real>(
    dy: &[T],
    cache: &LnCache<T>,
    g: &[T],
    dg: &mut [T],
    db: &mut [T],
    d: usize,
) -> Vec<T> {
    let n = dy.len() / d;
    let mut dx = vec![T::zero(); dy.len()];
    let dd = T::of(d as f64);
    let mut dxh = vec![T::zero(); d];
    for i in 0..n {
        let xh = &cache.xhat[i * d..(i + 1) * d];
        let dyr = &dy[i * d..(i + 1) * d];
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        for j in 0..d {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
            dxh[j] = dyr[j] * g[j];
            m1 += dxh[j];
            m2 += dxh[j] * xh[j];
        }
        m1 /= dd;
        m2 /= dd;
        let is = cache.inv_std[i];
        for j in 0..d {
            dx[i * d + j] = is * (dxh[j] - m1 - xh[j] * m2);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// GELU, tanh approximation.
pub fn gelu<T: Real>(x: T) -> T {
    let (c, a, half) = (T::of(GELU_C), T::of(GELU_A), T::of(0.5));
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let (c, a, half) = (T::of(GELU_C), T::of(GELU_A), T::of(0.5));
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0) * a * x * x)
}

/// In-place softmax with max subtraction.
pub fn softmax_in_place<T: Real>(v: &mut [T]) {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

/// Given probabilities `p` and upstream `dp`, overwrites `dp` with the logit gradient.
pub fn softmax_backward_in_place<T: Real>(p: &[T], dp: &mut [T]) {
    let dot: T = p.iter().zip(dp.iter()).map(|(&a, &b)| a * b).sum();
    for (g, &pi) in dp.iter_mut().zip(p) {
        *g = pi * (*g - dot);
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
