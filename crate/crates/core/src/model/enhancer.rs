//! Token, type and position fusion with type-specific projection and
//! attention over per-row type summaries.

use super::ops::{axpy, dot, layer_norm, layer_norm_backward, softmax_backward_in_place, softmax_in_place, LnCache};
use super::packed::{CellLayout, PackedMsa};
use super::params::{EnhancerMode, ModelConfig, ParamSet, Slots};
use super::real::{matmul, matmul_backward, Real};
use crate::lexer::TokenType;

/// `x = token + type + position` for every valid cell.
pub fn fuse<T: Real>(p: &ParamSet<T>, s: &Slots, d: usize, msa: &PackedMsa) -> Vec<T> {
    let (tok, typ, pos) = (p.get(s.token), p.get(s.type_emb), p.get(s.pos_emb));
    let n = msa.layout.cells();
    let mut x = vec![T::zero(); n * d];
    for i in 0..n {
        let row = &mut x[i * d..(i + 1) * d];
        let (t, ty, c) = (msa.tokens[i], msa.types[i], msa.layout.cols[i]);
        for j in 0..d {
            row[j] = tok[t * d + j] + typ[ty * d + j] + pos[c * d + j];
        }
    }
    x
}

fn fuse_backward<T: Real>(g: &mut ParamSet<T>, s: &Slots, d: usize, msa: &PackedMsa, dx: &[T]) {
    for (i, dxi) in dx.chunks_exact(d).enumerate() {
        let t = msa.tokens[i];
        axpy(T::one(), dxi, &mut g.get_mut(s.token)[t * d..(t + 1) * d]);
        let ty = msa.types[i];
        axpy(T::one(), dxi, &mut g.get_mut(s.type_emb)[ty * d..(ty + 1) * d]);
        let c = msa.layout.cols[i];
        axpy(T::one(), dxi, &mut g.get_mut(s.pos_emb)[c * d..(c + 1) * d]);
    }
}

fn cells_by_type(types: &[usize]) -> Vec<Vec<usize>> {
    let mut by = vec![Vec::new(); TokenType::COUNT];
    for (i, &t) in types.iter().enumerate() {
        by[t].push(i);
    }
    by
}

/// `h = x · W_t + b_t` with `t` the type of each cell.
pub fn project<T: Real>(p: &ParamSet<T>, s: &Slots, d: usize, types: &[usize], x: &[T]) -> Vec<T> {
    let (w, b) = (p.get(s.proj_w), p.get(s.proj_b));
    let mut h = vec![T::zero(); x.len()];
    for (t, cells) in cells_by_type(types).iter().enumerate() {
        if cells.is_empty() {
            continue;
        }
        let xt: Vec<T> = cells
            .iter()
            .flat_map(|&i| x[i * d..(i + 1) * d].iter().copied())
            .collect();
        let ht = matmul(&xt, &w[t * d * d..(t + 1) * d * d], cells.len(), d, d);
        for (k, &i) in cells.iter().enumerate() {
            for j in 0..d {
                h[i * d + j] = ht[k * d + j] + b[t * d + j];
            }
        }
    }
    h
}

fn project_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    s: &Slots,
    d: usize,
    types: &[usize],
    x: &[T],
    dh: &[T],
) -> Vec<T> {
    let w = p.get(s.proj_w);
    let mut dx = vec![T::zero(); x.len()];
    for (t, cells) in cells_by_type(types).iter().enumerate() {
        if cells.is_empty() {
            continue;
        }
        let gather = |m: &[T]| -> Vec<T> {
            cells
                .iter()
                .flat_map(|&i| m[i * d..(i + 1) * d].iter().copied())
                .collect()
        };
        let (xt, dht) = (gather(x), gather(dh));
        let mut dxt = vec![T::zero(); xt.len()];
        let wt = &w[t * d * d..(t + 1) * d * d];
        matmul_backward(
            &xt,
            wt,
            &dht,
            cells.len(),
            d,
            d,
            Some(&mut dxt),
            &mut g.get_mut(s.proj_w)[t * d * d..(t + 1) * d * d],
        );
        let db = &mut g.get_mut(s.proj_b)[t * d..(t + 1) * d];
        for row in dht.chunks_exact(d) {
            axpy(T::one(), row, db);
        }
        for (k, &i) in cells.iter().enumerate() {
            dx[i * d..(i + 1) * d].copy_from_slice(&dxt[k * d..(k + 1) * d]);
        }
    }
    dx
}

/// Saved activations of the type-aware attention.
#[derive(Debug, Clone)]
pub struct TypeAttnCache<T> {
    summ: Vec<T>,
    summ_row_off: Vec<usize>,
    summ_count: Vec<usize>,
    cell_summ: Vec<usize>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    probs: Vec<T>,
    prob_off: Vec<usize>,
    att: Vec<T>,
    ln: LnCache<T>,
}

/// Each cell attends over the mean vectors of the token types present in its row.
pub fn type_attention<T: Real>(
    p: &ParamSet<T>,
    s: &Slots,
    d: usize,
    layout: &CellLayout,
    types: &[usize],
    h: &[T],
) -> (Vec<T>, TypeAttnCache<T>) {
    let a = &s.attn;
    let n = layout.cells();
    let mut summ = Vec::new();
    let mut summ_row_off = vec![0];
    let mut summ_count = Vec::new();
    let mut cell_summ = vec![0; n];
    for r in 0..layout.r {
        let cells = layout.row_off[r]..layout.row_off[r + 1];
        let mut present: Vec<usize> = types[cells.clone()].to_vec();
        present.sort_unstable();
        present.dedup();
        let base = summ_count.len();
        summ_count.resize(base + present.len(), 0);
        summ.resize(summ_count.len() * d, T::zero());
        for i in cells {
            let k = base + present.binary_search(&types[i]).unwrap();
            cell_summ[i] = k;
            summ_count[k] += 1;
            axpy(T::one(), &h[i * d..(i + 1) * d], &mut summ[k * d..(k + 1) * d]);
        }
        for (k, &c) in summ_count.iter().enumerate().skip(base) {
            let inv = T::one() / T::of(c as f64);
            summ[k * d..(k + 1) * d].iter_mut().for_each(|x| *x *= inv);
        }
        summ_row_off.push(summ_count.len());
    }
    let m = summ_count.len();
    let q = matmul(h, p.get(a.q), n, d, d);
    let k = matmul(&summ, p.get(a.k), m, d, d);
    let v = matmul(&summ, p.get(a.v), m, d, d);
    let scale = T::one() / T::of(d as f64).sqrt();
    let mut probs = Vec::new();
    let mut prob_off = Vec::with_capacity(n + 1);
    let mut att = vec![T::zero(); n * d];
    for r in 0..layout.r {
        let (s0, s1) = (summ_row_off[r], summ_row_off[r + 1]);
        for i in layout.row_off[r]..layout.row_off[r + 1] {
            prob_off.push(probs.len());
            let qi = &q[i * d..(i + 1) * d];
            let mut pr: Vec<T> = (s0..s1).map(|j| dot(qi, &k[j * d..(j + 1) * d]) * scale).collect();
            softmax_in_place(&mut pr);
            for (jj, &pj) in pr.iter().enumerate() {
                let j = s0 + jj;
                axpy(pj, &v[j * d..(j + 1) * d], &mut att[i * d..(i + 1) * d]);
            }
            probs.extend(pr);
        }
    }
    prob_off.push(probs.len());
    let o = matmul(&att, p.get(a.o), n, d, d);
    let z: Vec<T> = h.iter().zip(&o).map(|(&x, &y)| x + y).collect();
    let (y, ln) = layer_norm(&z, p.get(a.ln_g), p.get(a.ln_b), d);
    let cache = TypeAttnCache {
        summ,
        summ_row_off,
        summ_count,
        cell_summ,
        q,
        k,
        v,
        probs,
        prob_off,
        att,
        ln,
    };
    (y, cache)
}

#[allow(clippy::too_many_arguments)]
fn type_attention_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    s: &Slots,
    d: usize,
    layout: &CellLayout,
    h: &[T],
    c: &TypeAttnCache<T>,
    dy: &[T],
) -> Vec<T> {
    let a = &s.attn;
    let n = layout.cells();
    let m = c.summ_count.len();
    let (lg, lb) = (a.ln_g, a.ln_b);
    let (mut dgam, mut dbet) = (vec![T::zero(); d], vec![T::zero(); d]);
    let dz = layer_norm_backward(dy, &c.ln, p.get(lg), &mut dgam, &mut dbet, d);
    axpy(T::one(), &dgam, g.get_mut(lg));
    axpy(T::one(), &dbet, g.get_mut(lb));
    let mut dh = dz.clone();
    let mut datt = vec![T::zero(); n * d];
    matmul_backward(&c.att, p.get(a.o), &dz, n, d, d, Some(&mut datt), g.get_mut(a.o));
    let scale = T::one() / T::of(d as f64).sqrt();
    let mut dq = vec![T::zero(); n * d];
    let mut dk = vec![T::zero(); m * d];
    let mut dv = vec![T::zero(); m * d];
    for r in 0..layout.r {
        let s0 = c.summ_row_off[r];
        for i in layout.row_off[r]..layout.row_off[r + 1] {
            let pr = &c.probs[c.prob_off[i]..c.prob_off[i + 1]];
            let dai = &datt[i * d..(i + 1) * d];
            let mut dl: Vec<T> = Vec::with_capacity(pr.len());
            for (jj, &pj) in pr.iter().enumerate() {
                let j = s0 + jj;
                axpy(pj, dai, &mut dv[j * d..(j + 1) * d]);
                dl.push(dot(dai, &c.v[j * d..(j + 1) * d]));
            }
            softmax_backward_in_place(pr, &mut dl);
            let qi = &c.q[i * d..(i + 1) * d];
            for (jj, &dlj) in dl.iter().enumerate() {
                let j = s0 + jj;
                axpy(dlj * scale, &c.k[j * d..(j + 1) * d], &mut dq[i * d..(i + 1) * d]);
                axpy(dlj * scale, qi, &mut dk[j * d..(j + 1) * d]);
            }
        }
    }
    matmul_backward(h, p.get(a.q), &dq, n, d, d, Some(&mut dh), g.get_mut(a.q));
    let mut dsumm = vec![T::zero(); m * d];
    matmul_backward(&c.summ, p.get(a.k), &dk, m, d, d, Some(&mut dsumm), g.get_mut(a.k));
    matmul_backward(&c.summ, p.get(a.v), &dv, m, d, d, Some(&mut dsumm), g.get_mut(a.v));
    for i in 0..n {
        let k = c.cell_summ[i];
        let inv = T::one() / T::of(c.summ_count[k] as f64);
        axpy(inv, &dsumm[k * d..(k + 1) * d], &mut dh[i * d..(i + 1) * d]);
    }
    dh
}

#[derive(Debug, Clone)]
pub struct EnhancerCache<T> {
    x: Vec<T>,
    h: Option<Vec<T>>,
    attn: Option<TypeAttnCache<T>>,
}

pub fn enhancer_forward<T: Real>(
    p: &ParamSet<T>,
    s: &Slots,
    cfg: &ModelConfig,
    msa: &PackedMsa,
) -> (Vec<T>, EnhancerCache<T>) {
    let d = cfg.d;
    let x = fuse(p, s, d, msa);
    match cfg.mode {
        EnhancerMode::Off => (x.clone(), EnhancerCache { x, h: None, attn: None }),
        EnhancerMode::AttentionOnly => {
            let (y, c) = type_attention(p, s, d, &msa.layout, &msa.types, &x);
            (
                y,
                EnhancerCache {
                    x,
                    h: None,
                    attn: Some(c),
                },
            )
        }
        EnhancerMode::Full => {
            let h = project(p, s, d, &msa.types, &x);
            let (y, c) = type_attention(p, s, d, &msa.layout, &msa.types, &h);
            (
                y,
                EnhancerCache {
                    x,
                    h: Some(h),
                    attn: Some(c),
                },
            )
        }
    }
}

pub fn enhancer_backward<T: Real>(
    p: &ParamSet<T>,
    g: &mut ParamSet<T>,
    s: &Slots,
    cfg: &ModelConfig,
    msa: &PackedMsa,
    cache: &EnhancerCache<T>,
    dy: &[T],
) {
    let d = cfg.d;
    let dx = match (&cache.h, &cache.attn) {
        (None, None) => dy.to_vec(),
        (None, Some(c)) => type_attention_backward(p, g, s, d, &msa.layout, &cache.x, c, dy),
        (Some(h), Some(c)) => {
            let dh = type_attention_backward(p, g, s, d, &msa.layout, h, c, dy);
            project_backward(p, g, s, d, &msa.types, &cache.x, &dh)
        }
        (Some(_), None) => unreachable!("projection always feeds attention"),
    };
    fuse_backward(g, s, d, msa, &dx);
}
