//! EIE-style compressed sparse rows, used as the comparison baseline.
//!
//! Output columns are split into `num_partitions` contiguous slices (one per
//! processing element). Every partition keeps its own row-offset array over
//! all input rows, so offset storage grows with the partition count while
//! values and column steps grow only with the nonzero count.

use serde::{Deserialize, Serialize};

use super::bitmask::BitMask;
use super::compact::{CompactMatrix, CompactVector};
use super::runlength::{check_decode_shape, check_step_bits, StepStream};
use crate::error::{Error, Result};
use crate::model::QuantParams;

/// How wide each stored row offset is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetWidth {
    /// Wide enough to address every entry of the dense matrix; fixed by the
    /// matrix shape and independent of partitioning.
    Dense,
    /// `ceil(log2(entries + 1))` of each partition's own entry count.
    PerPartition,
    Fixed(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrWidths {
    pub step_bits: u32,
    pub offset: OffsetWidth,
}

impl Default for CsrWidths {
    fn default() -> Self {
        CsrWidths {
            step_bits: 4,
            offset: OffsetWidth::Dense,
        }
    }
}

/// Bits needed to represent `n`, i.e. `ceil(log2(n + 1))`.
pub fn bits_for(n: u64) -> u32 {
    64 - n.leading_zeros()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrPartition {
    pub col_start: usize,
    pub col_end: usize,
    /// Values and column steps of all rows, concatenated in row order.
    pub values: Vec<i16>,
    pub steps: Vec<u16>,
    /// `rows + 1` offsets into `values`.
    pub row_offsets: Vec<u32>,
    pub offset_bits: u32,
}

impl CsrPartition {
    pub fn entries(&self) -> usize {
        self.values.len()
    }

    pub fn padding(&self) -> usize {
        self.values.iter().filter(|v| **v == 0).count()
    }

    fn row(&self, r: usize) -> StepStream {
        let (a, b) = (self.row_offsets[r] as usize, self.row_offsets[r + 1] as usize);
        StepStream {
            values: self.values[a..b].to_vec(),
            steps: self.steps[a..b].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub widths: CsrWidths,
    pub partitions: Vec<CsrPartition>,
    pub quant: QuantParams,
}

pub fn encode_csr(m: &CompactMatrix, num_partitions: usize, widths: CsrWidths) -> Result<CsrMatrix> {
    if num_partitions == 0 {
        return Err(Error::param("CSR needs at least one partition"));
    }
    check_step_bits(widths.step_bits)?;
    let (rows, cols) = (m.rows(), m.cols());
    let slice = cols.div_ceil(num_partitions).max(1);

    // Row-major view of the nonzeros, grouped by row.
    let mut by_row: Vec<Vec<(usize, i16)>> = vec![Vec::new(); rows];
    for c in 0..cols {
        for (r, v) in m.column(c).iter() {
            by_row[r].push((c, v));
        }
    }

    let dense_bits = bits_for((rows * cols) as u64);
    let partitions = (0..num_partitions)
        .map(|p| {
            let start = (p * slice).min(cols);
            let end = ((p + 1) * slice).min(cols);
            let mut part = CsrPartition {
                col_start: start,
                col_end: end,
                values: Vec::new(),
                steps: Vec::new(),
                row_offsets: Vec::with_capacity(rows + 1),
                offset_bits: 0,
            };
            part.row_offsets.push(0);
            for row in &by_row {
                // Rows are filled in column order.
                let lo = row.partition_point(|(c, _)| *c < start);
                let hi = row.partition_point(|(c, _)| *c < end);
                let in_slice = row[lo..hi].iter().map(|&(c, v)| (c - start, v));
                let s = StepStream::encode(in_slice, widths.step_bits);
                part.values.extend(s.values);
                part.steps.extend(s.steps);
                part.row_offsets.push(part.values.len() as u32);
            }
            part.offset_bits = match widths.offset {
                OffsetWidth::Dense => dense_bits,
                OffsetWidth::PerPartition => bits_for(part.values.len() as u64),
                OffsetWidth::Fixed(b) => b,
            };
            part
        })
        .collect();

    Ok(CsrMatrix {
        rows,
        cols,
        widths,
        partitions,
        quant: *m.quant(),
    })
}

impl CsrMatrix {
    /// Validates the partition layout and rebuilds the column-compact form.
    pub fn decode(&self) -> Result<CompactMatrix> {
        check_step_bits(self.widths.step_bits)?;
        check_decode_shape(self.rows, self.cols)?;
        let mut dense = vec![0i16; self.rows * self.cols];
        let mut covered = 0usize;
        for (p, part) in self.partitions.iter().enumerate() {
            if part.col_start != covered.min(self.cols) || part.col_end < part.col_start || part.col_end > self.cols {
                return Err(Error::structural(format!(
                    "partition {p} covers columns {}..{} out of order",
                    part.col_start, part.col_end
                )));
            }
            covered = part.col_end;
            if part.row_offsets.len() != self.rows + 1 {
                return Err(Error::structural(format!(
                    "partition {p} has {} row offsets for {} rows",
                    part.row_offsets.len(),
                    self.rows
                )));
            }
            if part.values.len() != part.steps.len()
                || part.row_offsets[0] != 0
                || *part.row_offsets.last().unwrap() as usize != part.values.len()
                || part.row_offsets.windows(2).any(|w| w[0] > w[1])
            {
                return Err(Error::structural(format!(
                    "partition {p} offsets do not index its payload"
                )));
            }
            if let Some(offset_limit) = 1u64.checked_shl(part.offset_bits) {
                if part.values.len() as u64 >= offset_limit {
                    return Err(Error::structural(format!(
                        "partition {p} has {} entries, too many for {}-bit offsets",
                        part.values.len(),
                        part.offset_bits
                    )));
                }
            }
            let width = part.col_end - part.col_start;
            for r in 0..self.rows {
                for (c, v) in part.row(r).decode(width, self.widths.step_bits)? {
                    dense[r * self.cols + part.col_start + c] = v;
                }
            }
        }
        if covered != self.cols {
            return Err(Error::structural(format!(
                "partitions cover {covered} of {} columns",
                self.cols
            )));
        }
        let columns = (0..self.cols)
            .map(|c| {
                let col: Vec<i16> = (0..self.rows).map(|r| dense[r * self.cols + c]).collect();
                CompactVector::from_parts(
                    BitMask::from_bools(col.iter().map(|v| *v != 0)),
                    col.iter().copied().filter(|v| *v != 0).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        CompactMatrix::from_columns(self.rows, columns, self.quant)
    }

    pub fn entries(&self) -> usize {
        self.partitions.iter().map(CsrPartition::entries).sum()
    }

    pub fn padding(&self) -> usize {
        self.partitions.iter().map(CsrPartition::padding).sum()
    }

    pub fn row_offset_bits(&self) -> u64 {
        self.partitions
            .iter()
            .map(|p| p.row_offsets.len() as u64 * p.offset_bits as u64)
            .sum()
    }
}
