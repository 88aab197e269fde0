use serde::{Deserialize, Serialize};

use super::arith::MAX_DOT_LEN;
use super::dense::DenseMatrix;
use super::quant::{quantize, QuantParams};
use crate::error::{Error, Result};
use crate::sparse::{CompactMatrix, CompactVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Unidirectional,
    Bidirectional,
}

/// Weights of one direction: `wx` is `input_dim x hidden`, `wh` is
/// `hidden x hidden`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirWeights {
    pub wx: CompactMatrix,
    pub wh: CompactMatrix,
    pub bias: Vec<f64>,
}

impl DirWeights {
    pub fn nnz(&self) -> usize {
        self.wx.nnz() + self.wh.nnz()
    }
}

/// One quantized recurrent layer. `input_quant` describes the codes arriving
/// from below, `hidden_quant` the recurrent state and `output_quant` the
/// emitted `y = h + g` codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub forward: DirWeights,
    pub backward: Option<DirWeights>,
    pub input_quant: QuantParams,
    pub hidden_quant: QuantParams,
    pub output_quant: QuantParams,
}

impl RnnLayer {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 {
            return Err(Error::dim("layer dimensions must be nonzero"));
        }
        if self.input_dim > MAX_DOT_LEN || self.hidden > MAX_DOT_LEN {
            return Err(Error::dim(format!(
                "layer {}x{} exceeds the {MAX_DOT_LEN}-wide accumulator limit",
                self.input_dim, self.hidden
            )));
        }
        for (name, d) in self.directions_named() {
            let shapes = [
                ("wx", &d.wx, self.input_dim, self.hidden),
                ("wh", &d.wh, self.hidden, self.hidden),
            ];
            for (m, mat, r, c) in shapes {
                if mat.rows() != r || mat.cols() != c {
                    return Err(Error::dim(format!(
                        "{name} {m} is {}x{}, expected {r}x{c}",
                        mat.rows(),
                        mat.cols()
                    )));
                }
                mat.quant().validate()?;
            }
            if d.bias.len() != self.hidden {
                return Err(Error::dim(format!(
                    "{name} bias has {} entries for {} units",
                    d.bias.len(),
                    self.hidden
                )));
            }
            if d.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::param(format!("{name} bias is not finite")));
            }
        }
        self.input_quant.validate()?;
        self.hidden_quant.validate()?;
        self.output_quant.validate()
    }

    pub fn directions(&self) -> impl Iterator<Item = &DirWeights> {
        std::iter::once(&self.forward).chain(self.backward.as_ref())
    }

    fn directions_named(&self) -> impl Iterator<Item = (&'static str, &DirWeights)> {
        std::iter::once(("forward", &self.forward)).chain(self.backward.as_ref().map(|b| ("backward", b)))
    }

    pub fn is_bidirectional(&self) -> bool {
        self.backward.is_some()
    }

    pub fn nnz(&self) -> usize {
        self.directions().map(DirWeights::nnz).sum()
    }

    pub fn params(&self) -> usize {
        let per_dir = (self.input_dim + self.hidden) * self.hidden;
        per_dir * if self.is_bidirectional() { 2 } else { 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnNetwork {
    pub name: String,
    pub direction: Direction,
    pub layers: Vec<RnnLayer>,
}

impl RnnNetwork {
    pub fn new(name: impl Into<String>, layers: Vec<RnnLayer>) -> Result<Self> {
        let direction = match layers.first() {
            Some(l) if l.is_bidirectional() => Direction::Bidirectional,
            Some(_) => Direction::Unidirectional,
            None => return Err(Error::dim("network has no layers")),
        };
        let net = RnnNetwork {
            name: name.into(),
            direction,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::dim("network has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()
                .map_err(|e| Error::dim(format!("layer {i}: {e}")))?;
            if l.is_bidirectional() != (self.direction == Direction::Bidirectional) {
                return Err(Error::dim(format!("layer {i} direction disagrees with network")));
            }
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].hidden != w[1].input_dim {
                return Err(Error::dim(format!(
                    "layer {i} emits {} features but layer {} expects {}",
                    w[0].hidden,
                    i + 1,
                    w[1].input_dim
                )));
            }
            if w[0].output_quant != w[1].input_quant {
                return Err(Error::param(format!(
                    "layer {i} output scales differ from layer {} input scales",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn nnz(&self) -> usize {
        self.layers.iter().map(RnnLayer::nnz).sum()
    }

    pub fn params(&self) -> usize {
        self.layers.iter().map(RnnLayer::params).sum()
    }

    pub fn weight_density(&self) -> f64 {
        self.nnz() as f64 / self.params() as f64
    }
}

/// Quantized input sequence `x^1 .. x^T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub inputs: Vec<CompactVector<i16>>,
}

impl Utterance {
    pub fn new(inputs: Vec<CompactVector<i16>>, dim: usize) -> Result<Self> {
        if let Some(t) = inputs.iter().position(|x| x.dim() != dim) {
            return Err(Error::dim(format!(
                "timestep {t} has dim {}, expected {dim}",
                inputs[t].dim()
            )));
        }
        Ok(Utterance { inputs })
    }

    pub fn timesteps(&self) -> usize {
        self.inputs.len()
    }

    pub fn density(&self) -> f64 {
        let total: usize = self.inputs.iter().map(CompactVector::dim).sum();
        let nnz: usize = self.inputs.iter().map(CompactVector::nnz).sum();
        if total == 0 {
            0.0
        } else {
            nnz as f64 / total as f64
        }
    }
}

/// Real-valued weights of one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatDirWeights {
    pub wx: DenseMatrix,
    pub wh: DenseMatrix,
    pub bias: Vec<f64>,
}

/// Unquantized layer, used before batch-norm folding and quantization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub forward: FloatDirWeights,
    pub backward: Option<FloatDirWeights>,
}

impl FloatLayer {
    pub fn validate(&self) -> Result<()> {
        for d in std::iter::once(&self.forward).chain(self.backward.as_ref()) {
            if d.wx.rows() != self.input_dim
                || d.wx.cols() != self.hidden
                || d.wh.rows() != self.hidden
                || d.wh.cols() != self.hidden
                || d.bias.len() != self.hidden
            {
                return Err(Error::dim(format!(
                    "float layer weights do not match {}x{}",
                    self.input_dim, self.hidden
                )));
            }
        }
        Ok(())
    }

    /// Real-arithmetic bidirectional forward pass, returning `y^t`.
    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let run = |d: &FloatDirWeights, reverse: bool| -> Result<Vec<Vec<f64>>> {
            let mut out = vec![Vec::new(); xs.len()];
            let mut h = vec![0.0; self.hidden];
            let order: Box<dyn Iterator<Item = usize>> = if reverse {
                Box::new((0..xs.len()).rev())
            } else {
                Box::new(0..xs.len())
            };
            for t in order {
                let hid = d.wh.vecmul(&h)?;
                let inp = d.wx.vecmul(&xs[t])?;
                h = (0..self.hidden)
                    .map(|j| ((hid[j] + inp[j]) + d.bias[j]).max(0.0))
                    .collect();
                out[t] = h.clone();
            }
            Ok(out)
        };
        let mut y = run(&self.forward, false)?;
        if let Some(b) = &self.backward {
            for (yt, gt) in y.iter_mut().zip(run(b, true)?) {
                for (a, g) in yt.iter_mut().zip(gt) {
                    *a += g;
                }
            }
        }
        Ok(y)
    }

    /// Quantizes every matrix with its own fitted scales.
    pub fn quantize(
        &self,
        bits: u32,
        input_quant: QuantParams,
        hidden_quant: QuantParams,
        output_quant: QuantParams,
    ) -> Result<RnnLayer> {
        self.validate()?;
        let q = |d: &FloatDirWeights| -> Result<DirWeights> {
            Ok(DirWeights {
                wx: quantize(&d.wx, bits)?.0,
                wh: quantize(&d.wh, bits)?.0,
                bias: d.bias.clone(),
            })
        };
        let layer = RnnLayer {
            input_dim: self.input_dim,
            hidden: self.hidden,
            forward: q(&self.forward)?,
            backward: self.backward.as_ref().map(q).transpose()?,
            input_quant,
            hidden_quant,
            output_quant,
        };
        layer.validate()?;
        Ok(layer)
    }
}
