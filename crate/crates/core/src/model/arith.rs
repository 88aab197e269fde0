//! Fixed-point kernels shared verbatim by the golden model and the
//! simulator. Both sides must call these so results agree bit for bit.

use serde::{Deserialize, Serialize};

use super::quant::QuantParams;

/// Largest dot-product length whose worst-case sum of 9x9-bit magnitude
/// products still fits an `i32` accumulator.
pub const MAX_DOT_LEN: usize = 8192;

/// Four integer accumulators, one per (weight sign, activation sign) pair.
/// Integer addition is order independent, so any schedule that visits the
/// same products yields the same accumulator state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignSplitAcc {
    pub pp: i32,
    pub pn: i32,
    pub np: i32,
    pub nn: i32,
}

impl SignSplitAcc {
    #[inline]
    pub fn mac(&mut self, w: i16, a: i16) {
        let p = (w.unsigned_abs() as i32) * (a.unsigned_abs() as i32);
        match (w > 0, a > 0) {
            (true, true) => self.pp += p,
            (true, false) => self.pn += p,
            (false, true) => self.np += p,
            (false, false) => self.nn += p,
        }
    }

    #[inline]
    pub fn merge(&mut self, o: &SignSplitAcc) {
        self.pp += o.pp;
        self.pn += o.pn;
        self.np += o.np;
        self.nn += o.nn;
    }

    /// Scales the four sums back into real units.
    pub fn combine(&self, wq: &QuantParams, aq: &QuantParams) -> f64 {
        let denom = wq.qmax() as f64 * aq.qmax() as f64;
        (wq.s_pos * aq.s_pos * self.pp as f64
            - wq.s_pos * aq.s_neg * self.pn as f64
            - wq.s_neg * aq.s_pos * self.np as f64
            + wq.s_neg * aq.s_neg * self.nn as f64)
            / denom
    }
}

/// VVAdd for one neuron: bias plus both intermediates, ReLU, requantize.
#[inline]
pub fn vvadd_neuron(hidden: f64, input: f64, bias: f64, hq: &QuantParams) -> i16 {
    let pre = (hidden + input) + bias;
    if pre > 0.0 {
        hq.encode(pre)
    } else {
        0
    }
}

/// Layer output for one neuron from the forward and (optional) backward
/// hidden codes.
#[inline]
pub fn output_neuron(h: i16, g: Option<i16>, hq: &QuantParams, oq: &QuantParams) -> i16 {
    let v = hq.decode(h) + g.map_or(0.0, |g| hq.decode(g));
    oq.encode(v)
}
