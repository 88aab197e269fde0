use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::bitmask::BitMask;
use crate::error::{Error, Result};
use crate::model::QuantParams;

/// Nonzero values stored contiguously in index order, plus the mask that
/// says where they go.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactVector<T = i16> {
    mask: BitMask,
    values: Vec<T>,
}

impl<T: Copy + PartialEq + Zero> CompactVector<T> {
    pub fn encode(dense: &[T]) -> Self {
        let mask = BitMask::from_bools(dense.iter().map(|v| !v.is_zero()));
        let values = dense.iter().copied().filter(|v| !v.is_zero()).collect();
        CompactVector { mask, values }
    }

    pub fn zeros(dim: usize) -> Self {
        CompactVector {
            mask: BitMask::zeros(dim),
            values: Vec::new(),
        }
    }

    /// Assembles a vector from an untrusted mask/payload pair.
    pub fn from_parts(mask: BitMask, values: Vec<T>) -> Result<Self> {
        let pop = mask.count_ones();
        if values.len() != pop {
            return Err(Error::structural(format!(
                "payload holds {} values but mask has {pop} set bits",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.is_zero()) {
            return Err(Error::structural(format!(
                "zero stored at payload slot {i}"
            )));
        }
        Ok(CompactVector { mask, values })
    }

    pub fn decode(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.mask.len()];
        for (i, v) in self.mask.iter_ones().zip(&self.values) {
            out[i] = *v;
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn mask(&self) -> &BitMask {
        &self.mask
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize) -> T {
        if self.mask.get(i) {
            self.values[self.mask.prefix_popcount(i)]
        } else {
            T::zero()
        }
    }

    /// `(index, value)` pairs of the stored nonzeros.
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.mask.iter_ones().zip(self.values.iter().copied())
    }

    /// Positions where both vectors are nonzero, with both payload values.
    /// Walks the ANDed masks a word at a time and locates payload slots by
    /// prefix popcount, so only joint nonzeros are visited.
    pub fn joint<'a, U: Copy>(&'a self, other: &'a CompactVector<U>) -> Joint<'a, T, U> {
        debug_assert_eq!(self.dim(), other.mask.len());
        let (a, b) = (self.mask.words(), other.mask.words());
        let n = a.len().min(b.len());
        Joint {
            a,
            b,
            av: &self.values,
            bv: &other.values,
            n,
            idx: 0,
            cur: if n > 0 { a[0] & b[0] } else { 0 },
            a_base: 0,
            b_base: 0,
        }
    }
}

pub struct Joint<'a, T, U> {
    a: &'a [u64],
    b: &'a [u64],
    av: &'a [T],
    bv: &'a [U],
    n: usize,
    idx: usize,
    cur: u64,
    a_base: usize,
    b_base: usize,
}

impl<T: Copy, U: Copy> Iterator for Joint<'_, T, U> {
    type Item = (usize, T, U);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        while self.cur == 0 {
            if self.idx + 1 >= self.n {
                return None;
            }
            self.a_base += self.a[self.idx].count_ones() as usize;
            self.b_base += self.b[self.idx].count_ones() as usize;
            self.idx += 1;
            self.cur = self.a[self.idx] & self.b[self.idx];
        }
        let bit = self.cur.trailing_zeros();
        self.cur &= self.cur - 1;
        let below = (1u64 << bit) - 1;
        let ia = self.a_base + (self.a[self.idx] & below).count_ones() as usize;
        let ib = self.b_base + (self.b[self.idx] & below).count_ones() as usize;
        Some((self.idx * 64 + bit as usize, self.av[ia], self.bv[ib]))
    }
}

/// Per-output-column compact storage of a quantized weight matrix.
///
/// Rows index input neurons and columns index output neurons, so column `j`
/// holds every weight feeding output `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactMatrix {
    rows: usize,
    cols: usize,
    columns: Vec<CompactVector<i16>>,
    quant: QuantParams,
}

impl CompactMatrix {
    /// Builds from row-major dense codes.
    pub fn from_dense_codes(
        rows: usize,
        cols: usize,
        codes: &[i16],
        quant: QuantParams,
    ) -> Result<Self> {
        if codes.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} codes for a {rows}x{cols} matrix",
                codes.len()
            )));
        }
        let columns = (0..cols)
            .map(|c| {
                let col: Vec<i16> = (0..rows).map(|r| codes[r * cols + c]).collect();
                CompactVector::encode(&col)
            })
            .collect();
        Ok(CompactMatrix {
            rows,
            cols,
            columns,
            quant,
        })
    }

    pub fn from_columns(
        rows: usize,
        columns: Vec<CompactVector<i16>>,
        quant: QuantParams,
    ) -> Result<Self> {
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.dim() != rows) {
            return Err(Error::dim(format!(
                "column {j} has dim {} but matrix has {rows} rows",
                c.dim()
            )));
        }
        let qmax = quant.qmax();
        for c in &columns {
            if let Some(v) = c.values().iter().find(|v| v.unsigned_abs() as i32 > qmax) {
                return Err(Error::structural(format!(
                    "code {v} exceeds {}-bit range",
                    quant.bits
                )));
            }
        }
        Ok(CompactMatrix {
            rows,
            cols: columns.len(),
            columns,
            quant,
        })
    }

    pub fn zeros(rows: usize, cols: usize, quant: QuantParams) -> Self {
        CompactMatrix {
            rows,
            cols,
            columns: vec![CompactVector::zeros(rows); cols],
            quant,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn column(&self, j: usize) -> &CompactVector<i16> {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[CompactVector<i16>] {
        &self.columns
    }

    #[inline]
    pub fn quant(&self) -> &QuantParams {
        &self.quant
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(CompactVector::nnz).sum()
    }

    pub fn density(&self) -> f64 {
        if self.rows * self.cols == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.rows * self.cols) as f64
        }
    }

    pub fn get(&self, r: usize, c: usize) -> i16 {
        self.columns[c].get(r)
    }

    /// Row-major dense codes.
    pub fn to_dense(&self) -> Vec<i16> {
        let mut out = vec![0; self.rows * self.cols];
        for (c, col) in self.columns.iter().enumerate() {
            for (r, v) in col.iter() {
                out[r * self.cols + c] = v;
            }
        }
        out
    }

    /// Nonzero count of every `(row, col)` cell in the given window.
    pub fn nnz_in(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> usize {
        cols.map(|c| self.columns[c].mask().count_range(rows.start, rows.end))
            .sum()
    }
}
