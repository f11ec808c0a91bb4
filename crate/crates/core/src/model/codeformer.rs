//! Dual-attention encoder blocks over packed MSA cells.

use super::ops::{
    axpy, dot, gelu, gelu_grad, layer_norm, layer_norm_backward, softmax_backward_in_place, softmax_in_place, LnCache,
};
use super::packed::CellLayout;
use super::params::{AttnSlots, BlockSlots, ParamSet};
use super::real::{gemm, matmul, matmul_backward, Real, View, ViewMut};

#[derive(Debug, Clone)]
pub struct AttnCache<T> {
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// Attention probabilities, per head then per group (row or column).
    probs: Vec<T>,
    /// Concatenated head outputs before the output projection.
    o: Vec<T>,
    ln: LnCache<T>,
}

fn residual_ln<T: Real>(p: &ParamSet<T>, a: &AttnSlots, x: &[T], o: &[T], d: usize) -> (Vec<T>, LnCache<T>) {
    let n = x.len() / d;
    let proj = matmul(o, p.get(a.o), n, d, d);
    let z: Vec<T> = x.iter().zip(&proj).map(|(&u, &w)| u + w).collect();
    layer_norm(&z, p.get(a.ln_g), p.get(a.ln_b), d)
}

/// Back through `LN(x + o·W_o)`. Returns the gradient at `x` (residual path) and at `o`.
fn residual_ln_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    a: &AttnSlots,
    c: &AttnCache<T>,
    dy: &[T],
    d: usize,
) -> (Vec<T>, Vec<T>) {
    let n = dy.len() / d;
    let (mut dg, mut db) = (vec![T::zero(); d], vec![T::zero(); d]);
    let dz = layer_norm_backward(dy, &c.ln, p.get(a.ln_g), &mut dg, &mut db, d);
    axpy(T::one(), &dg, g.get_mut(a.ln_g));
    axpy(T::one(), &db, g.get_mut(a.ln_b));
    let mut dout = vec![T::zero(); n * d];
    matmul_backward(&c.o, p.get(a.o), &dz, n, d, d, Some(&mut dout), g.get_mut(a.o));
    (dz, dout)
}

fn qkv<T: Real>(p: &ParamSet<T>, a: &AttnSlots, x: &[T], d: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = x.len() / d;
    (
        matmul(x, p.get(a.q), n, d, d),
        matmul(x, p.get(a.k), n, d, d),
        matmul(x, p.get(a.v), n, d, d),
    )
}

#[allow(clippy::too_many_arguments)]
fn qkv_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    a: &AttnSlots,
    x: &[T],
    dq: &[T],
    dk: &[T],
    dv: &[T],
    dx: &mut [T],
    d: usize,
) {
    let n = x.len() / d;
    matmul_backward(x, p.get(a.q), dq, n, d, d, Some(&mut *dx), g.get_mut(a.q));
    matmul_backward(x, p.get(a.k), dk, n, d, d, Some(&mut *dx), g.get_mut(a.k));
    matmul_backward(x, p.get(a.v), dv, n, d, d, Some(dx), g.get_mut(a.v));
}

/// Row-wise attention with one attention map shared by all rows.
///
/// Per head, the logits of column pair (i, j) are averaged over the rows
/// valid at both columns; each row then takes a softmax over its own valid
/// columns and mixes its own values.
pub fn inner_attention<T: Real>(
    p: &ParamSet<T>,
    a: &AttnSlots,
    heads: usize,
    layout: &CellLayout,
    x: &[T],
    d: usize,
) -> (Vec<T>, AttnCache<T>) {
    let (n, l, dh) = (layout.cells(), layout.l, d / heads);
    let (q, k, v) = qkv(p, a, x, d);
    let scale = T::one() / T::of(dh as f64).sqrt();
    let cnt = layout.pair_counts();
    let max_row = (0..layout.r).map(|r| layout.row_len(r)).max().unwrap_or(0);
    let mut tmp = vec![T::zero(); max_row * max_row];
    let mut shared = vec![T::zero(); l * l];
    let mut probs = Vec::new();
    let mut o = vec![T::zero(); n * d];
    for h in 0..heads {
        shared.fill(T::zero());
        for r in 0..layout.r {
            let (a0, nr) = (layout.row_off[r], layout.row_len(r));
            if nr == 0 {
                continue;
            }
            gemm(
                scale,
                View::block(&q[a0 * d..], nr, d, h * dh, dh),
                View::block(&k[a0 * d..], nr, d, h * dh, dh).t(),
                T::zero(),
                ViewMut::rm(&mut tmp[..nr * nr], nr, nr),
            );
            let cols = &layout.cols[a0..a0 + nr];
            for (i, &ci) in cols.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    shared[ci * l + cj] += tmp[i * nr + j];
                }
            }
        }
        for (s, &c) in shared.iter_mut().zip(&cnt) {
            if c > 1 {
                *s /= T::of(c as f64);
            }
        }
        for r in 0..layout.r {
            let (a0, nr) = (layout.row_off[r], layout.row_len(r));
            if nr == 0 {
                continue;
            }
            let cols = &layout.cols[a0..a0 + nr];
            let start = probs.len();
            for &ci in cols {
                let mut row: Vec<T> = cols.iter().map(|&cj| shared[ci * l + cj]).collect();
                softmax_in_place(&mut row);
                probs.extend(row);
            }
            gemm(
                T::one(),
                View::rm(&probs[start..], nr, nr),
                View::block(&v[a0 * d..], nr, d, h * dh, dh),
                T::zero(),
                ViewMut::block(&mut o[a0 * d..], nr, d, h * dh, dh),
            );
        }
    }
    let (y, ln) = residual_ln(p, a, x, &o, d);
    (y, AttnCache { q, k, v, probs, o, ln })
}

#[allow(clippy::too_many_arguments)]
pub fn inner_attention_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    a: &AttnSlots,
    heads: usize,
    layout: &CellLayout,
    x: &[T],
    c: &AttnCache<T>,
    dy: &[T],
    d: usize,
) -> Vec<T> {
    let (n, l, dh) = (layout.cells(), layout.l, d / heads);
    let (mut dx, dout) = residual_ln_backward(p, g, a, c, dy, d);
    let scale = T::one() / T::of(dh as f64).sqrt();
    let cnt = layout.pair_counts();
    let max_row = (0..layout.r).map(|r| layout.row_len(r)).max().unwrap_or(0);
    let mut tmp = vec![T::zero(); max_row * max_row];
    let mut dshared = vec![T::zero(); l * l];
    let (mut dq, mut dk, mut dv) = (vec![T::zero(); n * d], vec![T::zero(); n * d], vec![T::zero(); n * d]);
    let mut off = 0;
    for h in 0..heads {
        dshared.fill(T::zero());
        for r in 0..layout.r {
            let (a0, nr) = (layout.row_off[r], layout.row_len(r));
            if nr == 0 {
                continue;
            }
            let pr = &c.probs[off..off + nr * nr];
            off += nr * nr;
            // dP = dO · Vᵀ, dV = Pᵀ · dO
            gemm(
                T::one(),
                View::block(&dout[a0 * d..], nr, d, h * dh, dh),
                View::block(&c.v[a0 * d..], nr, d, h * dh, dh).t(),
                T::zero(),
                ViewMut::rm(&mut tmp[..nr * nr], nr, nr),
            );
            gemm(
                T::one(),
                View::rm(pr, nr, nr).t(),
                View::block(&dout[a0 * d..], nr, d, h * dh, dh),
                T::one(),
                ViewMut::block(&mut dv[a0 * d..], nr, d, h * dh, dh),
            );
            let cols = &layout.cols[a0..a0 + nr];
            for (i, &ci) in cols.iter().enumerate() {
                let dl = &mut tmp[i * nr..(i + 1) * nr];
                softmax_backward_in_place(&pr[i * nr..(i + 1) * nr], dl);
                for (j, &cj) in cols.iter().enumerate() {
                    dshared[ci * l + cj] += dl[j];
                }
            }
        }
        for (s, &cn) in dshared.iter_mut().zip(&cnt) {
            if cn > 1 {
                *s /= T::of(cn as f64);
            }
        }
        for r in 0..layout.r {
            let (a0, nr) = (layout.row_off[r], layout.row_len(r));
            if nr == 0 {
                continue;
            }
            let cols = &layout.cols[a0..a0 + nr];
            for (i, &ci) in cols.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    tmp[i * nr + j] = dshared[ci * l + cj];
                }
            }
            let da = View::rm(&tmp[..nr * nr], nr, nr);
            gemm(
                scale,
                da,
                View::block(&c.k[a0 * d..], nr, d, h * dh, dh),
                T::one(),
                ViewMut::block(&mut dq[a0 * d..], nr, d, h * dh, dh),
            );
            gemm(
                scale,
                da.t(),
                View::block(&c.q[a0 * d..], nr, d, h * dh, dh),
                T::one(),
                ViewMut::block(&mut dk[a0 * d..], nr, d, h * dh, dh),
            );
        }
    }
    qkv_backward(p, g, a, x, &dq, &dk, &dv, &mut dx, d);
    dx
}

/// Column-wise attention: the cells of each column attend among themselves.
pub fn inter_attention<T: Real>(
    p: &ParamSet<T>,
    a: &AttnSlots,
    heads: usize,
    layout: &CellLayout,
    x: &[T],
    d: usize,
) -> (Vec<T>, AttnCache<T>) {
    let (n, dh) = (layout.cells(), d / heads);
    let (q, k, v) = qkv(p, a, x, d);
    let scale = T::one() / T::of(dh as f64).sqrt();
    let mut probs = Vec::new();
    let mut o = vec![T::zero(); n * d];
    for h in 0..heads {
        let hs = h * dh..(h + 1) * dh;
        for cells in &layout.col_cells {
            for &i in cells {
                let qi = &q[i * d..][hs.clone()];
                let mut pr: Vec<T> = cells
                    .iter()
                    .map(|&j| dot(qi, &k[j * d..][hs.clone()]) * scale)
                    .collect();
                softmax_in_place(&mut pr);
                for (&j, &pj) in cells.iter().zip(&pr) {
                    let vj = &v[j * d..][hs.clone()];
                    axpy(pj, vj, &mut o[i * d..][hs.clone()]);
                }
                probs.extend(pr);
            }
        }
    }
    let (y, ln) = residual_ln(p, a, x, &o, d);
    (y, AttnCache { q, k, v, probs, o, ln })
}

#[allow(clippy::too_many_arguments)]
pub fn inter_attention_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    a: &AttnSlots,
    heads: usize,
    layout: &CellLayout,
    x: &[T],
    c: &AttnCache<T>,
    dy: &[T],
    d: usize,
) -> Vec<T> {
    let (n, dh) = (layout.cells(), d / heads);
    let (mut dx, dout) = residual_ln_backward(p, g, a, c, dy, d);
    let scale = T::one() / T::of(dh as f64).sqrt();
    let (mut dq, mut dk, mut dv) = (vec![T::zero(); n * d], vec![T::zero(); n * d], vec![T::zero(); n * d]);
    let mut off = 0;
    let mut dl = Vec::new();
    for h in 0..heads {
        let hs = h * dh..(h + 1) * dh;
        for cells in &layout.col_cells {
            let m = cells.len();
            for &i in cells {
                let pr = &c.probs[off..off + m];
                off += m;
                let doi = &dout[i * d..][hs.clone()];
                dl.clear();
                for (&j, &pj) in cells.iter().zip(pr) {
                    axpy(pj, doi, &mut dv[j * d..][hs.clone()]);
                    dl.push(dot(doi, &c.v[j * d..][hs.clone()]));
                }
                softmax_backward_in_place(pr, &mut dl);
                for (&j, &dlj) in cells.iter().zip(&dl) {
                    let kj = &c.k[j * d..][hs.clone()];
                    axpy(dlj * scale, kj, &mut dq[i * d..][hs.clone()]);
                    let qi = &c.q[i * d..][hs.clone()];
                    axpy(dlj * scale, qi, &mut dk[j * d..][hs.clone()]);
                }
            }
        }
    }
    qkv_backward(p, g, a, x, &dq, &dk, &dv, &mut dx, d);
    dx
}

#[derive(Debug, Clone)]
pub struct FfnCache<T> {
    pre: Vec<T>,
    act: Vec<T>,
    ln: LnCache<T>,
}

/// `LN(x + GELU(x·W1 + b1)·W2 + b2)`.
pub fn feed_forward<T: Real>(p: &ParamSet<T>, b: &BlockSlots, x: &[T], d: usize, d_ff: usize) -> (Vec<T>, FfnCache<T>) {
    let n = x.len() / d;
    let mut pre = matmul(x, p.get(b.w1), n, d, d_ff);
    for row in pre.chunks_exact_mut(d_ff) {
        axpy(T::one(), p.get(b.b1), row);
    }
    let act: Vec<T> = pre.iter().map(|&u| gelu(u)).collect();
    let mut z = matmul(&act, p.get(b.w2), n, d_ff, d);
    for (zr, xr) in z.chunks_exact_mut(d).zip(x.chunks_exact(d)) {
        axpy(T::one(), p.get(b.b2), zr);
        axpy(T::one(), xr, zr);
    }
    let (y, ln) = layer_norm(&z, p.get(b.ln_g), p.get(b.ln_b), d);
    (y, FfnCache { pre, act, ln })
}

pub fn feed_forward_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    b: &BlockSlots,
    x: &[T],
    c: &FfnCache<T>,
    dy: &[T],
    d: usize,
    d_ff: usize,
) -> Vec<T> {
    let n = x.len() / d;
    let (mut dg, mut db) = (vec![T::zero(); d], vec![T::zero(); d]);
    let dz = layer_norm_backward(dy, &c.ln, p.get(b.ln_g), &mut dg, &mut db, d);
    axpy(T::one(), &dg, g.get_mut(b.ln_g));
    axpy(T::one(), &db, g.get_mut(b.ln_b));
    for row in dz.chunks_exact(d) {
        axpy(T::one(), row, g.get_mut(b.b2));
    }
    let mut dact = vec![T::zero(); n * d_ff];
    matmul_backward(&c.act, p.get(b.w2), &dz, n, d_ff, d, Some(&mut dact), g.get_mut(b.w2));
    for (da, &u) in dact.iter_mut().zip(&c.pre) {
        *da *= gelu_grad(u);
    }
    for row in dact.chunks_exact(d_ff) {
        axpy(T::one(), row, g.get_mut(b.b1));
    }
    let mut dx = dz;
    matmul_backward(x, p.get(b.w1), &dact, n, d, d_ff, Some(&mut dx), g.get_mut(b.w1));
    dx
}

/// Activations saved by one block.
#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    x0: Vec<T>,
    inner: AttnCache<T>,
    x1: Vec<T>,
    inter: AttnCache<T>,
    x2: Vec<T>,
    ffn: FfnCache<T>,
}

pub fn block_forward<T: Real>(
    p: &ParamSet<T>,
    b: &BlockSlots,
    heads: usize,
    d_ff: usize,
    layout: &CellLayout,
    x: Vec<T>,
    d: usize,
) -> (Vec<T>, BlockCache<T>) {
    let (x1, inner) = inner_attention(p, &b.inner, heads, layout, &x, d);
    let (x2, inter) = inter_attention(p, &b.inter, heads, layout, &x1, d);
    let (y, ffn) = feed_forward(p, b, &x2, d, d_ff);
    (
        y,
        BlockCache {
            x0: x,
            inner,
            x1,
            inter,
            x2,
            ffn,
        },
    )
}

#[allow(clippy::too_many_arguments)]
pub fn block_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    b: &BlockSlots,
    heads: usize,
    d_ff: usize,
    layout: &CellLayout,
    c: &BlockCache<T>,
    dy: &[T],
    d: usize,
) -> Vec<T> {
    let dx2 = feed_forward_backward(p, g, b, &c.x2, &c.ffn, dy, d, d_ff);
    let dx1 = inter_attention_backward(p, g, &b.inter, heads, layout, &c.x1, &c.inter, &dx2, d);
    inner_attention_backward(p, g, &b.inner, heads, layout, &c.x0, &c.inner, &dx1, d)
}
