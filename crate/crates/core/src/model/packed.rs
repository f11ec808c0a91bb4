//! Packed storage of the valid cells of an R×L grid.
//!
//! Padding cells never enter the computation, so they are not stored: an
//! encoded MSA is an `N × d` matrix whose rows are the valid cells in
//! row-major (r, c) order.

use super::real::Real;
use crate::corpus::CodeMsa;
use crate::embeddings::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellLayout {
    pub r: usize,
    pub l: usize,
    /// Cells of row `r` are `row_off[r]..row_off[r + 1]`.
    pub row_off: Vec<usize>,
    /// Column of each cell.
    pub cols: Vec<usize>,
    /// Cells of each column, in row order.
    pub col_cells: Vec<Vec<usize>>,
}

impl CellLayout {
    /// Layout of a row-major `r × l` validity mask.
    pub fn from_mask(r: usize, l: usize, mask: &[bool]) -> CellLayout {
        assert_eq!(mask.len(), r * l, "mask size must be R×L");
        let mut row_off = vec![0];
        let mut cols = Vec::new();
        let mut col_cells = vec![Vec::new(); l];
        for row in 0..r {
            for c in 0..l {
                if mask[row * l + c] {
                    col_cells[c].push(cols.len());
                    cols.push(c);
                }
            }
            row_off.push(cols.len());
        }
        CellLayout {
            r,
            l,
            row_off,
            cols,
            col_cells,
        }
    }

    pub fn cells(&self) -> usize {
        self.cols.len()
    }

    pub fn row_len(&self, r: usize) -> usize {
        self.row_off[r + 1] - self.row_off[r]
    }

    /// Row index of each cell.
    pub fn rows(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cells());
        for r in 0..self.r {
            out.extend(std::iter::repeat_n(r, self.row_len(r)));
        }
        out
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.r * self.l];
        for r in 0..self.r {
            for i in self.row_off[r]..self.row_off[r + 1] {
                m[r * self.l + self.cols[i]] = true;
            }
        }
        m
    }

    /// Number of rows valid at both columns, as an `l × l` table.
    pub fn pair_counts(&self) -> Vec<u32> {
        let l = self.l;
        let mut cnt = vec![0u32; l * l];
        for r in 0..self.r {
            let cs = &self.cols[self.row_off[r]..self.row_off[r + 1]];
            for &ci in cs {
                for &cj in cs {
                    cnt[ci * l + cj] += 1;
                }
            }
        }
        cnt
    }
}

/// A Code MSA mapped to vocabulary and type ids, valid cells only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedMsa {
    pub layout: CellLayout,
    pub tokens: Vec<usize>,
    pub types: Vec<usize>,
}

impl PackedMsa {
    pub fn from_msa(msa: &CodeMsa, vocab: &Vocabulary) -> PackedMsa {
        let (r, l) = (msa.depth(), msa.width());
        let mask: Vec<bool> = msa.rows.iter().flatten().map(|c| c.valid).collect();
        let layout = CellLayout::from_mask(r, l, &mask);
        let valid = msa.rows.iter().flatten().filter(|c| c.valid);
        let (tokens, types) = valid.map(|c| (vocab.id(&c.token.text), c.token.ty.id())).unzip();
        PackedMsa { layout, tokens, types }
    }

    /// Same MSA with retrieved rows reordered: new row k is old row `perm[k - 1]`.
    pub fn permute_retrieved(&self, perm: &[usize]) -> PackedMsa {
        let lay = &self.layout;
        assert_eq!(perm.len() + 1, lay.r);
        let order: Vec<usize> = std::iter::once(0).chain(perm.iter().copied()).collect();
        let mut mask = vec![false; lay.r * lay.l];
        let (mut tokens, mut types) = (Vec::new(), Vec::new());
        for (new_r, &old_r) in order.iter().enumerate() {
            for i in lay.row_off[old_r]..lay.row_off[old_r + 1] {
                mask[new_r * lay.l + lay.cols[i]] = true;
                tokens.push(self.tokens[i]);
                types.push(self.types[i]);
            }
        }
        PackedMsa {
            layout: CellLayout::from_mask(lay.r, lay.l, &mask),
            tokens,
            types,
        }
    }
}

/// Dense R×L×d values with an R×L validity mask; masked cells are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MsaTensor<T> {
    pub r: usize,
    pub l: usize,
    pub d: usize,
    pub values: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T: Real> MsaTensor<T> {
    pub fn new(r: usize, l: usize, d: usize, values: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != r * l * d || mask.len() != r * l {
            return Err(Error::Config(format!(
                "tensor of {} values and {} mask bits does not fit {r}×{l}×{d}",
                values.len(),
                mask.len()
            )));
        }
        let mut t = MsaTensor { r, l, d, values, mask };
        for cell in 0..r * l {
            if !t.mask[cell] {
                t.values[cell * d..(cell + 1) * d].fill(T::zero());
            }
        }
        Ok(t)
    }

    pub fn layout(&self) -> CellLayout {
        CellLayout::from_mask(self.r, self.l, &self.mask)
    }

    pub fn cell(&self, r: usize, c: usize) -> &[T] {
        let at = (r * self.l + c) * self.d;
        &self.values[at..at + self.d]
    }

    /// Valid cells as an `N × d` matrix.
    pub fn pack(&self) -> (CellLayout, Vec<T>) {
        let mut data = Vec::new();
        for cell in 0..self.r * self.l {
            if self.mask[cell] {
                data.extend_from_slice(&self.values[cell * self.d..(cell + 1) * self.d]);
            }
        }
        (self.layout(), data)
    }

    pub fn unpack(layout: &CellLayout, data: &[T], d: usize) -> MsaTensor<T> {
        let mut values = vec![T::zero(); layout.r * layout.l * d];
        for r in 0..layout.r {
            for i in layout.row_off[r]..layout.row_off[r + 1] {
                let at = (r * layout.l + layout.cols[i]) * d;
                values[at..at + d].copy_from_slice(&data[i * d..(i + 1) * d]);
            }
        }
        MsaTensor {
            r: layout.r,
            l: layout.l,
            d,
            values,
            mask: layout.mask(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_round_trip() {
        let mask = vec![true, true, false, true, false, false];
        let values: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let t = MsaTensor::new(2, 3, 2, values, mask).unwrap();
        let (lay, data) = t.pack();
        assert_eq!(lay.row_off, [0, 2, 3]);
        assert_eq!(lay.col_cells[0], [0, 2]);
        assert_eq!(data, [0.0, 1.0, 2.0, 3.0, 6.0, 7.0]);
        assert_eq!(MsaTensor::unpack(&lay, &data, 2), t);
        assert_eq!(lay.pair_counts()[0], 2);
        assert_eq!(lay.pair_counts()[1], 1);
    }
}
