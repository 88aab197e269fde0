//! Binary model container read by both the golden model and the simulator.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! file    := magic "MASRMODL" | version u16 (=1) | reserved u16 (=0)
//!            | name_len u32 | name utf8 | layer_count u32 | layer*
//!            | sha256 of every preceding byte (32 bytes)
//! layer   := input_dim u32 | hidden u32 | bidirectional u8
//!            | input_quant quant | hidden_quant quant | output_quant quant
//!            | has_bn u8 | [bn] | dir (forward) | [dir (backward)]
//! quant   := bits u8 | s_pos f64 | s_neg f64
//! bn      := epsilon f64 | mu f64*input_dim | sigma2 f64*input_dim
//!            | gamma f64*input_dim | beta f64*input_dim
//! dir     := wx matrix | wh matrix | bias f64*hidden
//! matrix  := kind u8 | rows u32 | cols u32 | body
//!   kind 0 (dense codes): quant | i16*rows*cols, row-major
//!   kind 1 (compact):     quant | per column: nnz u32 | u64*ceil(rows/64) mask words | i16*nnz
//!   kind 2 (float):       bits u8 | f64*rows*cols, row-major; quantized on load
//! ```
//!
//! A batch-norm block is folded into the layer's input weights and biases on
//! load; input weights stored as codes are dequantized, folded and
//! requantized at the same width.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::arith::MAX_DOT_LEN;
use super::batchnorm::{fold_input_weights, BatchNormParams};
use super::dense::DenseMatrix;
use super::layer::{DirWeights, RnnLayer, RnnNetwork};
use super::quant::{dequantize, quantize, QuantParams};
use crate::error::{Error, Result};
use crate::sparse::{BitMask, CompactMatrix, CompactVector};

pub const MAGIC: &[u8; 8] = b"MASRMODL";
pub const VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;
const MAX_LAYERS: usize = 1024;
const MAX_NAME: usize = 4096;

/// How weight matrices are laid out when writing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixEncoding {
    DenseCodes,
    Compact,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FileMatrix {
    DenseCodes(CompactMatrix),
    Compact(CompactMatrix),
    Float { weights: DenseMatrix, bits: u32 },
}

impl FileMatrix {
    fn shape(&self) -> (usize, usize) {
        match self {
            FileMatrix::DenseCodes(m) | FileMatrix::Compact(m) => (m.rows(), m.cols()),
            FileMatrix::Float { weights, .. } => (weights.rows(), weights.cols()),
        }
    }

    fn quantized(&self) -> Result<CompactMatrix> {
        match self {
            FileMatrix::DenseCodes(m) | FileMatrix::Compact(m) => Ok(m.clone()),
            FileMatrix::Float { weights, bits } => Ok(quantize(weights, *bits)?.0),
        }
    }

    fn real(&self) -> DenseMatrix {
        match self {
            FileMatrix::DenseCodes(m) | FileMatrix::Compact(m) => dequantize(m),
            FileMatrix::Float { weights, .. } => weights.clone(),
        }
    }

    fn bits(&self) -> u32 {
        match self {
            FileMatrix::DenseCodes(m) | FileMatrix::Compact(m) => m.quant().bits,
            FileMatrix::Float { bits, .. } => *bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FileDir {
    pub wx: FileMatrix,
    pub wh: FileMatrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FileLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub input_quant: QuantParams,
    pub hidden_quant: QuantParams,
    pub output_quant: QuantParams,
    pub batchnorm: Option<BatchNormParams>,
    pub forward: FileDir,
    pub backward: Option<FileDir>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub name: String,
    pub layers: Vec<FileLayer>,
}

impl ModelFile {
    pub fn from_network(net: &RnnNetwork, encoding: MatrixEncoding) -> Self {
        let wrap = |m: &CompactMatrix| match encoding {
            MatrixEncoding::DenseCodes => FileMatrix::DenseCodes(m.clone()),
            MatrixEncoding::Compact => FileMatrix::Compact(m.clone()),
        };
        let dir = |d: &DirWeights| FileDir {
            wx: wrap(&d.wx),
            wh: wrap(&d.wh),
            bias: d.bias.clone(),
        };
        ModelFile {
            name: net.name.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| FileLayer {
                    input_dim: l.input_dim,
                    hidden: l.hidden,
                    input_quant: l.input_quant,
                    hidden_quant: l.hidden_quant,
                    output_quant: l.output_quant,
                    batchnorm: None,
                    forward: dir(&l.forward),
                    backward: l.backward.as_ref().map(dir),
                })
                .collect(),
        }
    }

    /// Quantizes float matrices, folds batch-norm blocks and validates.
    pub fn into_network(self) -> Result<RnnNetwork> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in self.layers {
            let (k0, k1) = match &l.batchnorm {
                Some(bn) => {
                    bn.validate()?;
                    if bn.dim() != l.input_dim {
                        return Err(Error::dim(format!(
                            "batch-norm over {} features, layer input is {}",
                            bn.dim(),
                            l.input_dim
                        )));
                    }
                    (Some(bn.k0()), Some(bn.k1()))
                }
                None => (None, None),
            };
            let dir = |d: FileDir| -> Result<DirWeights> {
                let (wx, bias) = match (&k0, &k1) {
                    (Some(k0), Some(k1)) => {
                        let (w, b) = fold_input_weights(&d.wx.real(), &d.bias, k0, k1);
                        (quantize(&w, d.wx.bits())?.0, b)
                    }
                    _ => (d.wx.quantized()?, d.bias),
                };
                Ok(DirWeights {
                    wx,
                    wh: d.wh.quantized()?,
                    bias,
                })
            };
            let layer = RnnLayer {
                input_dim: l.input_dim,
                hidden: l.hidden,
                forward: dir(l.forward)?,
                backward: l.backward.map(dir).transpose()?,
                input_quant: l.input_quant,
                hidden_quant: l.hidden_quant,
                output_quant: l.output_quant,
            };
            layers.push(layer);
        }
        RnnNetwork::new(self.name, layers)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u16(VERSION);
        w.u16(0);
        w.u32(self.name.len() as u32);
        w.0.extend_from_slice(self.name.as_bytes());
        w.u32(self.layers.len() as u32);
        for l in &self.layers {
            w.u32(l.input_dim as u32);
            w.u32(l.hidden as u32);
            w.u8(l.backward.is_some() as u8);
            for q in [&l.input_quant, &l.hidden_quant, &l.output_quant] {
                w.quant(q);
            }
            match &l.batchnorm {
                Some(bn) => {
                    w.u8(1);
                    w.f64(bn.epsilon);
                    for v in [&bn.mu, &bn.sigma2, &bn.gamma, &bn.beta] {
                        v.iter().for_each(|x| w.f64(*x));
                    }
                }
                None => w.u8(0),
            }
            for d in std::iter::once(&l.forward).chain(l.backward.as_ref()) {
                w.matrix(&d.wx);
                w.matrix(&d.wh);
                d.bias.iter().for_each(|x| w.f64(*x));
            }
        }
        let digest = Sha256::digest(&w.0);
        w.0.extend_from_slice(&digest);
        w.0
    }

    /// Parses and checks a container. Shapes are checked against the bytes
    /// that remain before anything is allocated, so truncated or hostile
    /// input fails cleanly.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
            return Err(perr(0, "file too short for header and checksum"));
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(perr(0, "bad magic; not a model file"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        let mut r = Reader { buf: body, pos: MAGIC.len() };
        let version = r.u16()?;
        if version != VERSION {
            return Err(perr(MAGIC.len(), format!("unsupported version {version}")));
        }
        if r.u16()? != 0 {
            return Err(perr(MAGIC.len() + 2, "reserved field must be zero"));
        }
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::structural("model checksum mismatch"));
        }
        let name_len = r.count(MAX_NAME, "name length")?;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| perr(r.pos, "name is not utf-8"))?;
        let n_layers = r.count(MAX_LAYERS, "layer count")?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let input_dim = r.count(MAX_DOT_LEN, "input dim")?;
            let hidden = r.count(MAX_DOT_LEN, "hidden size")?;
            let bidirectional = r.flag()?;
            let input_quant = r.quant()?;
            let hidden_quant = r.quant()?;
            let output_quant = r.quant()?;
            let batchnorm = if r.flag()? {
                let epsilon = r.f64()?;
                Some(BatchNormParams {
                    epsilon,
                    mu: r.f64s(input_dim)?,
                    sigma2: r.f64s(input_dim)?,
                    gamma: r.f64s(input_dim)?,
                    beta: r.f64s(input_dim)?,
                })
            } else {
                None
            };
            let dir = |r: &mut Reader| -> Result<FileDir> {
                let wx = r.matrix()?;
                let wh = r.matrix()?;
                if wx.shape() != (input_dim, hidden) || wh.shape() != (hidden, hidden) {
                    return Err(perr(r.pos, format!("weight shapes do not match a {input_dim}x{hidden} layer")));
                }
                Ok(FileDir {
                    wx,
                    wh,
                    bias: r.f64s(hidden)?,
                })
            };
            let forward = dir(&mut r)?;
            let backward = if bidirectional { Some(dir(&mut r)?) } else { None };
            layers.push(FileLayer {
                input_dim,
                hidden,
                input_quant,
                hidden_quant,
                output_quant,
                batchnorm,
                forward,
                backward,
            });
        }
        if r.pos != body.len() {
            return Err(perr(r.pos, format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(ModelFile { name, layers })
    }
}

pub fn encode_model(net: &RnnNetwork, encoding: MatrixEncoding) -> Vec<u8> {
    ModelFile::from_network(net, encoding).encode()
}

pub fn decode_model(bytes: &[u8]) -> Result<RnnNetwork> {
    ModelFile::decode(bytes)?.into_network()
}

pub fn save_model(path: impl AsRef<Path>, net: &RnnNetwork, encoding: MatrixEncoding) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(net, encoding)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RnnNetwork> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

fn perr(offset: usize, msg: impl Into<String>) -> Error {
    Error::parse(None, format!("byte {offset}: {}", msg.into()))
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn quant(&mut self, q: &QuantParams) {
        self.u8(q.bits as u8);
        self.f64(q.s_pos);
        self.f64(q.s_neg);
    }
    fn matrix(&mut self, m: &FileMatrix) {
        let (rows, cols) = m.shape();
        let kind = match m {
            FileMatrix::DenseCodes(_) => 0,
            FileMatrix::Compact(_) => 1,
            FileMatrix::Float { .. } => 2,
        };
        self.u8(kind);
        self.u32(rows as u32);
        self.u32(cols as u32);
        match m {
            FileMatrix::DenseCodes(c) => {
                self.quant(c.quant());
                for v in c.to_dense() {
                    self.0.extend_from_slice(&v.to_le_bytes());
                }
            }
            FileMatrix::Compact(c) => {
                self.quant(c.quant());
                for col in c.columns() {
                    self.u32(col.nnz() as u32);
                    for w in col.mask().words() {
                        self.0.extend_from_slice(&w.to_le_bytes());
                    }
                    for v in col.values() {
                        self.0.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
            FileMatrix::Float { weights, bits } => {
                self.u8(*bits as u8);
                weights.data().iter().for_each(|x| self.f64(*x));
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(perr(self.pos, format!("truncated: need {n} bytes")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Fails unless `n` items of `size` bytes fit in what is left.
    fn ensure(&self, n: usize, size: usize) -> Result<()> {
        match n.checked_mul(size) {
            Some(b) if b <= self.buf.len() - self.pos => Ok(()),
            _ => Err(perr(self.pos, format!("truncated: {n} items of {size} bytes do not fit"))),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn i16(&mut self) -> Result<i16> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn flag(&mut self) -> Result<bool> {
        let at = self.pos;
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(perr(at, format!("flag byte must be 0 or 1, got {v}"))),
        }
    }

    fn count(&mut self, max: usize, what: &str) -> Result<usize> {
        let at = self.pos;
        let n = self.u32()? as usize;
        if n > max {
            return Err(perr(at, format!("{what} {n} exceeds limit {max}")));
        }
        Ok(n)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.ensure(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn quant(&mut self) -> Result<QuantParams> {
        let at = self.pos;
        let bits = self.u8()? as u32;
        let q = QuantParams {
            bits,
            s_pos: self.f64()?,
            s_neg: self.f64()?,
        };
        q.validate().map_err(|e| perr(at, e.to_string()))?;
        Ok(q)
    }

    fn matrix(&mut self) -> Result<FileMatrix> {
        let at = self.pos;
        let kind = self.u8()?;
        let rows = self.count(MAX_DOT_LEN, "matrix rows")?;
        let cols = self.count(MAX_DOT_LEN, "matrix cols")?;
        let fix = |e: Error| perr(at, e.to_string());
        match kind {
            0 => {
                let q = self.quant()?;
                self.ensure(rows * cols, 2)?;
                let codes = (0..rows * cols).map(|_| self.i16()).collect::<Result<Vec<_>>>()?;
                let m = CompactMatrix::from_dense_codes(rows, cols, &codes, q).map_err(fix)?;
                // Range check goes through the validating constructor.
                let m = CompactMatrix::from_columns(rows, m.columns().to_vec(), q).map_err(fix)?;
                Ok(FileMatrix::DenseCodes(m))
            }
            1 => {
                let q = self.quant()?;
                let words = rows.div_ceil(64);
                self.ensure(cols, 4 + 8 * words)?;
                let mut columns = Vec::with_capacity(cols);
                for _ in 0..cols {
                    let nnz = self.count(rows, "column nnz")?;
                    let mask_words = (0..words).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
                    let mask = BitMask::from_words(rows, mask_words).map_err(fix)?;
                    self.ensure(nnz, 2)?;
                    let values = (0..nnz).map(|_| self.i16()).collect::<Result<Vec<_>>>()?;
                    columns.push(CompactVector::from_parts(mask, values).map_err(fix)?);
                }
                Ok(FileMatrix::Compact(CompactMatrix::from_columns(rows, columns, q).map_err(fix)?))
            }
            2 => {
                let bits = self.u8()? as u32;
                if !(2..=16).contains(&bits) {
                    return Err(perr(at, format!("bits {bits} not in 2..=16")));
                }
                self.ensure(rows * cols, 8)?;
                let data = self.f64s(rows * cols)?;
                if data.iter().any(|x| !x.is_finite()) {
                    return Err(perr(at, "non-finite float weight"));
                }
                Ok(FileMatrix::Float {
                    weights: DenseMatrix::from_vec(rows, cols, data).map_err(fix)?,
                    bits,
                })
            }
            k => Err(perr(at, format!("unknown matrix kind {k}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_network, random_network, FloatDirWeights, FloatLayer};

    fn small() -> (RnnNetwork, crate::model::Utterance) {
        random_network(3, 12, &[10, 8], 0.4, 0.5, 4, true).unwrap()
    }

    #[test]
    fn roundtrip_both_encodings() {
        let (net, _) = small();
        for enc in [MatrixEncoding::DenseCodes, MatrixEncoding::Compact] {
            let back = decode_model(&encode_model(&net, enc)).unwrap();
            assert_eq!(back, net);
        }
    }

    #[test]
    fn compact_is_smaller_for_sparse_weights() {
        let (net, _) = small();
        let d = encode_model(&net, MatrixEncoding::DenseCodes).len();
        let c = encode_model(&net, MatrixEncoding::Compact).len();
        assert!(c < d, "{c} >= {d}");
    }

    #[test]
    fn corruption_is_detected() {
        let (net, _) = small();
        let mut bytes = encode_model(&net, MatrixEncoding::Compact);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode_model(&bytes), Err(Error::Structural(_))));
        bytes.truncate(20);
        assert!(decode_model(&bytes).is_err());
        assert!(matches!(decode_model(b"not a model at all, definitely not"), Err(Error::Parse { .. })));
    }

    #[test]
    fn float_layer_with_identity_bn_matches_plain_quantization() {
        let (net, u) = small();
        let mut file = ModelFile::from_network(&net, MatrixEncoding::Compact);
        let l0 = &mut file.layers[0];
        l0.batchnorm = Some(BatchNormParams::identity(l0.input_dim));
        let fl = FloatLayer {
            input_dim: 12,
            hidden: 10,
            forward: FloatDirWeights {
                wx: dequantize(&net.layers[0].forward.wx),
                wh: dequantize(&net.layers[0].forward.wh),
                bias: net.layers[0].forward.bias.clone(),
            },
            backward: None,
        };
        l0.forward.wx = FileMatrix::Float { weights: fl.forward.wx.clone(), bits: 10 };
        let back = ModelFile::decode(&file.encode()).unwrap().into_network().unwrap();
        assert_eq!(back.layers[0].forward.wx, quantize(&fl.forward.wx, 10).unwrap().0);
        assert_eq!(back.layers[0].forward.bias, net.layers[0].forward.bias);
        forward_network(&back, &u).unwrap();
    }
}
