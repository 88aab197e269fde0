use serde::{Deserialize, Serialize};

use super::compact::CompactMatrix;
use super::csr::{encode_csr, CsrWidths};
use super::runlength::encode_runlength;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Bitmask,
    Csr,
    Runlength,
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [Encoding::Bitmask, Encoding::Csr, Encoding::Runlength];

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Bitmask => "bitmask",
            Encoding::Csr => "csr",
            Encoding::Runlength => "runlength",
        }
    }
}

/// Exact storage bill for one encoded matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingFootprint {
    pub value_bits: u64,
    pub mask_bits: u64,
    pub row_offset_bits: u64,
    pub column_index_bits: u64,
    pub total_bits: u64,
}

impl EncodingFootprint {
    fn new(value_bits: u64, mask_bits: u64, row_offset_bits: u64, column_index_bits: u64) -> Self {
        EncodingFootprint {
            value_bits,
            mask_bits,
            row_offset_bits,
            column_index_bits,
            total_bits: value_bits + mask_bits + row_offset_bits + column_index_bits,
        }
    }

    /// Everything except the payload values.
    pub fn metadata_bits(&self) -> u64 {
        self.total_bits - self.value_bits
    }
}

impl std::ops::Add for EncodingFootprint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        EncodingFootprint::new(
            self.value_bits + o.value_bits,
            self.mask_bits + o.mask_bits,
            self.row_offset_bits + o.row_offset_bits,
            self.column_index_bits + o.column_index_bits,
        )
    }
}

/// Bit-exact footprint of `m` under `format`. Value width comes from the
/// matrix's quantization; `num_partitions` only matters for CSR.
pub fn metadata_footprint(
    format: Encoding,
    m: &CompactMatrix,
    num_partitions: usize,
    widths: CsrWidths,
) -> Result<EncodingFootprint> {
    let vb = m.quant().bits as u64;
    Ok(match format {
        Encoding::Bitmask => EncodingFootprint::new(
            m.nnz() as u64 * vb,
            (m.rows() * m.cols()) as u64,
            0,
            0,
        ),
        Encoding::Csr => {
            let csr = encode_csr(m, num_partitions, widths)?;
            let entries = csr.entries() as u64;
            EncodingFootprint::new(
                entries * vb,
                0,
                csr.row_offset_bits(),
                entries * widths.step_bits as u64,
            )
        }
        Encoding::Runlength => {
            let rl = encode_runlength(m, widths.step_bits)?;
            let entries = rl.entries() as u64;
            EncodingFootprint::new(entries * vb, 0, 0, entries * widths.step_bits as u64)
        }
    })
}
