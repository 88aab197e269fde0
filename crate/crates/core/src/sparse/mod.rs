//! Bit-exact sparse encodings and the alignment kernels shared by the golden
//! model and the simulator.

mod bitmask;
mod compact;
mod csr;
mod footprint;
mod runlength;

pub use bitmask::{work_mask, BitMask, Ones};
pub use compact::{CompactMatrix, CompactVector, Joint};
pub use csr::{bits_for, encode_csr, CsrMatrix, CsrPartition, CsrWidths, OffsetWidth};
pub use footprint::{metadata_footprint, Encoding, EncodingFootprint};
pub use runlength::{encode_runlength, RunLengthMatrix, StepStream};

/// Free-function form of [`BitMask::lnzd`].
pub fn lnzd(mask: &BitMask, start: usize) -> Option<usize> {
    mask.lnzd(start)
}

/// Free-function form of [`BitMask::prefix_popcount`].
pub fn prefix_popcount(mask: &BitMask, idx: usize) -> usize {
    mask.prefix_popcount(idx)
}

pub fn encode_vector<T: Copy + PartialEq + num_traits::Zero>(dense: &[T]) -> CompactVector<T> {
    CompactVector::encode(dense)
}

pub fn decode_vector<T: Copy + PartialEq + num_traits::Zero>(v: &CompactVector<T>) -> Vec<T> {
    v.decode()
}
