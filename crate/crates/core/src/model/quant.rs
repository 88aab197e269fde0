use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::CompactMatrix;

/// Sign-split linear quantization: positive and negative magnitudes are
/// scaled independently into `[0, qmax]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub bits: u32,
    pub s_pos: f64,
    pub s_neg: f64,
}

impl QuantParams {
    pub fn new(bits: u32, s_pos: f64, s_neg: f64) -> Result<Self> {
        let q = QuantParams { bits, s_pos, s_neg };
        q.validate()?;
        Ok(q)
    }

    /// Both scales 1.0; codes map to `code / qmax`.
    pub fn unit(bits: u32) -> Self {
        QuantParams {
            bits,
            s_pos: 1.0,
            s_neg: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.bits) {
            return Err(Error::param(format!(
                "code width must be 2..=16 bits, got {}",
                self.bits
            )));
        }
        for (name, s) in [("s_pos", self.s_pos), ("s_neg", self.s_neg)] {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }

    /// Largest magnitude code, `2^(bits-1) - 1`.
    #[inline]
    pub fn qmax(&self) -> i32 {
        (1i32 << (self.bits - 1)) - 1
    }

    /// Nearest code for `v`, saturating at full scale. A scale of zero maps
    /// that whole sign to code 0.
    pub fn encode(&self, v: f64) -> i16 {
        let s = if v >= 0.0 { self.s_pos } else { self.s_neg };
        if s == 0.0 || v == 0.0 {
            return 0;
        }
        let q = ((v.abs() / s) * self.qmax() as f64).round().min(self.qmax() as f64) as i16;
        if v < 0.0 {
            -q
        } else {
            q
        }
    }

    pub fn decode(&self, code: i16) -> f64 {
        let q = self.qmax() as f64;
        if code >= 0 {
            code as f64 * self.s_pos / q
        } else {
            code as f64 * self.s_neg / q
        }
    }

    /// Worst-case rounding error for a value of the given sign.
    pub fn error_bound(&self, negative: bool) -> f64 {
        let s = if negative { self.s_neg } else { self.s_pos };
        s / (2.0 * self.qmax() as f64)
    }
}

/// Quantizes a weight matrix with scales fitted to its extreme values.
/// Entries whose code rounds to zero are dropped from the compact form.
pub fn quantize(dense: &DenseMatrix, bits: u32) -> Result<(CompactMatrix, QuantParams)> {
    if !(2..=16).contains(&bits) {
        return Err(Error::param(format!("code width must be 2..=16 bits, got {bits}")));
    }
    let s_pos = dense.data().iter().copied().filter(|v| *v > 0.0).fold(0.0, f64::max);
    let s_neg = dense.data().iter().copied().filter(|v| *v < 0.0).map(f64::abs).fold(0.0, f64::max);
    let q = QuantParams::new(bits, s_pos, s_neg)?;
    let codes: Vec<i16> = dense.data().iter().map(|v| q.encode(*v)).collect();
    let m = CompactMatrix::from_dense_codes(dense.rows(), dense.cols(), &codes, q)?;
    Ok((m, q))
}

/// Real-valued view of a quantized matrix.
pub fn dequantize(m: &CompactMatrix) -> DenseMatrix {
    let q = m.quant();
    let data = m.to_dense().into_iter().map(|c| q.decode(c)).collect();
    DenseMatrix::from_vec(m.rows(), m.cols(), data).expect("shape matches")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_is_exact() {
        let d = DenseMatrix::from_vec(1, 2, vec![0.5, -0.2]).unwrap();
        let (m, q) = quantize(&d, 10).unwrap();
        assert_eq!(m.get(0, 0), 511);
        assert_eq!(m.get(0, 1), -511);
        assert_eq!(q.decode(511), 0.5);
    }

    #[test]
    fn quarter_of_half_scale() {
        let q = QuantParams::new(10, 0.5, 0.0).unwrap();
        assert_eq!(q.encode(0.25), 256);
        assert!((q.decode(256) - 0.250_489_236_790_606_6).abs() < 1e-12);
    }

    #[test]
    fn all_negative_leaves_positive_scale_zero() {
        let d = DenseMatrix::from_vec(2, 1, vec![-1.0, -0.3]).unwrap();
        let (m, q) = quantize(&d, 10).unwrap();
        assert_eq!(q.s_pos, 0.0);
        assert!(m.column(0).values().iter().all(|v| *v < 0));
    }

    #[test]
    fn bad_widths_rejected() {
        let d = DenseMatrix::zeros(1, 1);
        assert!(matches!(quantize(&d, 1), Err(Error::Parameter(_))));
        assert!(QuantParams::new(17, 1.0, 1.0).is_err());
    }

    #[test]
    fn encode_saturates() {
        let q = QuantParams::new(4, 1.0, 1.0).unwrap();
        assert_eq!(q.encode(10.0), 7);
        assert_eq!(q.encode(-10.0), -7);
    }
}
