use serde::{Deserialize, Serialize};

use super::compact::{CompactMatrix, CompactVector};
use super::bitmask::BitMask;
use crate::error::{Error, Result};
use crate::model::QuantParams;

/// One run-length stream: each entry advances the position by `step + 1`
/// from the previous entry (the first entry starts from position -1).
/// Zero-valued entries are padding that bridge gaps wider than the step
/// field can express.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStream {
    pub values: Vec<i16>,
    pub steps: Vec<u16>,
}

impl StepStream {
    /// Encodes `(position, value)` pairs given in ascending position order.
    pub fn encode(nonzeros: impl IntoIterator<Item = (usize, i16)>, step_bits: u32) -> Self {
        let max_step = max_step(step_bits);
        let mut out = StepStream::default();
        let mut next = 0usize;
        for (pos, v) in nonzeros {
            while pos - next > max_step {
                out.values.push(0);
                out.steps.push(max_step as u16);
                next += max_step + 1;
            }
            out.steps.push((pos - next) as u16);
            out.values.push(v);
            next = pos + 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn padding(&self) -> usize {
        self.values.iter().filter(|v| **v == 0).count()
    }

    /// Replays the stream into `(position, value)` pairs, dropping padding.
    /// Fails if a step is wider than `step_bits` or a position reaches `len`.
    pub fn decode(&self, len: usize, step_bits: u32) -> Result<Vec<(usize, i16)>> {
        if self.values.len() != self.steps.len() {
            return Err(Error::structural(format!(
                "{} values but {} steps",
                self.values.len(),
                self.steps.len()
            )));
        }
        let max_step = max_step(step_bits);
        let mut next = 0usize;
        let mut out = Vec::new();
        for (&v, &s) in self.values.iter().zip(&self.steps) {
            if s as usize > max_step {
                return Err(Error::structural(format!(
                    "step {s} exceeds {step_bits}-bit field"
                )));
            }
            let pos = next + s as usize;
            if pos >= len {
                return Err(Error::structural(format!(
                    "entry lands at {pos}, past length {len}"
                )));
            }
            if v != 0 {
                out.push((pos, v));
            }
            next = pos + 1;
        }
        Ok(out)
    }
}

pub(crate) fn max_step(step_bits: u32) -> usize {
    (1usize << step_bits) - 1
}

/// Decoders materialize the matrix, so shapes past the datapath limit are
/// refused before allocating.
pub(crate) fn check_decode_shape(rows: usize, cols: usize) -> Result<()> {
    use crate::model::arith::MAX_DOT_LEN;
    if rows > MAX_DOT_LEN || cols > MAX_DOT_LEN {
        return Err(Error::structural(format!(
            "{rows}x{cols} matrix exceeds the {MAX_DOT_LEN} decode limit"
        )));
    }
    Ok(())
}

pub(crate) fn check_step_bits(step_bits: u32) -> Result<()> {
    if !(1..=16).contains(&step_bits) {
        return Err(Error::param(format!(
            "step width must be 1..=16 bits, got {step_bits}"
        )));
    }
    Ok(())
}

/// Run-length encoding of every output column, stepping over input rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLengthMatrix {
    pub rows: usize,
    pub cols: usize,
    pub step_bits: u32,
    pub columns: Vec<StepStream>,
    pub quant: QuantParams,
}

pub fn encode_runlength(m: &CompactMatrix, step_bits: u32) -> Result<RunLengthMatrix> {
    check_step_bits(step_bits)?;
    Ok(RunLengthMatrix {
        rows: m.rows(),
        cols: m.cols(),
        step_bits,
        columns: m
            .columns()
            .iter()
            .map(|c| StepStream::encode(c.iter(), step_bits))
            .collect(),
        quant: *m.quant(),
    })
}

impl RunLengthMatrix {
    pub fn decode(&self) -> Result<CompactMatrix> {
        check_step_bits(self.step_bits)?;
        check_decode_shape(self.rows, self.cols)?;
        if self.columns.len() != self.cols {
            return Err(Error::structural(format!(
                "{} streams for {} columns",
                self.columns.len(),
                self.cols
            )));
        }
        let columns = self
            .columns
            .iter()
            .map(|s| {
                let entries = s.decode(self.rows, self.step_bits)?;
                let mask = BitMask::from_fn(self.rows, |_| false);
                let mut mask = mask;
                let mut values = Vec::with_capacity(entries.len());
                for (p, v) in entries {
                    mask.set(p, true);
                    values.push(v);
                }
                CompactVector::from_parts(mask, values)
            })
            .collect::<Result<Vec<_>>>()?;
        CompactMatrix::from_columns(self.rows, columns, self.quant)
    }

    /// Stored entries, padding included.
    pub fn entries(&self) -> usize {
        self.columns.iter().map(StepStream::len).sum()
    }

    pub fn padding(&self) -> usize {
        self.columns.iter().map(StepStream::padding).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_nonzeros_have_zero_steps() {
        let s = StepStream::encode([(0, 5), (1, 6)], 4);
        assert_eq!(s.steps, vec![0, 0]);
        assert_eq!(s.values, vec![5, 6]);
    }

    #[test]
    fn long_gap_gets_one_pad() {
        // position 20 is 21 slots from the start; one pad covers 16 of them.
        let s = StepStream::encode([(20, 3)], 4);
        assert_eq!(s.values, vec![0, 3]);
        assert_eq!(s.steps, vec![15, 4]);
        assert_eq!(s.decode(21, 4).unwrap(), vec![(20, 3)]);
    }

    #[test]
    fn gap_of_exactly_max_step_needs_no_pad() {
        let s = StepStream::encode([(15, 1)], 4);
        assert_eq!(s.padding(), 0);
        let s = StepStream::encode([(16, 1)], 4);
        assert_eq!(s.padding(), 1);
    }

    #[test]
    fn decode_rejects_overrun() {
        let s = StepStream {
            values: vec![1],
            steps: vec![9],
        };
        assert!(s.decode(5, 4).is_err());
        assert!(s.decode(10, 3).is_err());
    }

    #[test]
    fn step_bits_validated() {
        let m = CompactMatrix::zeros(2, 2, QuantParams::unit(10));
        assert!(matches!(encode_runlength(&m, 0), Err(Error::Parameter(_))));
    }
}
