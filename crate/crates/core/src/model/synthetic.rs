//! Seeded synthetic networks and utterances with controlled weight and
//! activation densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::forward::{column_dot, forward_layer};
use super::layer::{DirWeights, RnnLayer, RnnNetwork, Utterance};
use super::quant::QuantParams;
use crate::error::{Error, Result};
use crate::sparse::{CompactMatrix, CompactVector};

/// Layer-0 input scale; inputs are unit normals clipped at this magnitude.
const INPUT_SCALE: f64 = 3.0;
const CALIBRATION_TOL: f64 = 0.02;
const CALIBRATION_STOP: f64 = 0.004;
const CALIBRATION_ITERS: usize = 40;
/// Bisection only looks at this many leading timesteps.
const CALIBRATION_STEPS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub hidden: usize,
    pub layers: usize,
    /// Layer-0 feature width; defaults to `hidden`.
    pub input_dim: Option<usize>,
    pub weight_nz: f64,
    /// Target post-ReLU hidden-state density.
    pub act_nz: f64,
    /// Layer-0 input density; defaults to the density of `h + g` when both
    /// directions hit `act_nz` independently.
    pub input_nz: Option<f64>,
    pub timesteps: usize,
    pub seed: u64,
    pub bidirectional: bool,
    pub bits: u32,
    /// Negative mean of recurrent weights, in units of their std-dev.
    pub recurrent_shift: f64,
}

impl SyntheticSpec {
    /// Five 800-unit bidirectional layers, 33% weights, 20% hidden states.
    pub fn standard(timesteps: usize, seed: u64) -> Self {
        SyntheticSpec {
            hidden: 800,
            layers: 5,
            input_dim: None,
            weight_nz: 0.33,
            act_nz: 0.2,
            input_nz: None,
            timesteps,
            seed,
            bidirectional: true,
            bits: 10,
            recurrent_shift: 0.5,
        }
    }

    fn layer0_density(&self) -> f64 {
        self.input_nz.unwrap_or(if self.bidirectional {
            1.0 - (1.0 - self.act_nz).powi(2)
        } else {
            self.act_nz
        })
    }

    fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} = {v} not in (0, 1]")))
            }
        };
        frac("weight_nz", self.weight_nz)?;
        frac("act_nz", self.act_nz)?;
        frac("input_nz", self.layer0_density())?;
        if !(256..=4096).contains(&self.hidden) {
            return Err(Error::param(format!("hidden = {} not in 256..=4096", self.hidden)));
        }
        if self.layers == 0 || self.timesteps == 0 {
            return Err(Error::param("need at least one layer and one timestep"));
        }
        if !(2..=16).contains(&self.bits) {
            return Err(Error::param(format!("bits = {} not in 2..=16", self.bits)));
        }
        Ok(())
    }
}

/// Draws `rows x cols` weights: each entry present with probability `nz`,
/// value normal with the given mean and std-dev, quantized so that every
/// present entry keeps a nonzero code.
fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, nz: f64, mean: f64, std: f64, bits: u32) -> CompactMatrix {
    let normal = Normal::new(mean, std).expect("positive std-dev");
    let vals: Vec<f64> = (0..rows * cols)
        .map(|_| if rng.gen_bool(nz) { normal.sample(rng) } else { 0.0 })
        .collect();
    let s_pos = vals.iter().copied().filter(|v| *v > 0.0).fold(0.0, f64::max);
    let s_neg = vals.iter().copied().filter(|v| *v < 0.0).map(f64::abs).fold(0.0, f64::max);
    let q = QuantParams { bits, s_pos, s_neg };
    let codes: Vec<i16> = vals
        .iter()
        .map(|&v| match q.encode(v) {
            0 if v > 0.0 => 1,
            0 if v < 0.0 => -1,
            c => c,
        })
        .collect();
    CompactMatrix::from_dense_codes(rows, cols, &codes, q).expect("shape matches")
}

fn random_dir(rng: &mut ChaCha8Rng, input_dim: usize, hidden: usize, nz: f64, shift: f64, bits: u32) -> DirWeights {
    let sx = 1.0 / (input_dim as f64 * nz).sqrt();
    let sh = 1.0 / (hidden as f64 * nz).sqrt();
    DirWeights {
        wx: random_matrix(rng, input_dim, hidden, nz, 0.0, sx, bits),
        wh: random_matrix(rng, hidden, hidden, nz, -shift * sh, sh, bits),
        bias: vec![0.0; hidden],
    }
}

/// Random signed layer-0 inputs.
fn random_inputs(rng: &mut ChaCha8Rng, dim: usize, timesteps: usize, nz: f64, q: &QuantParams) -> Vec<CompactVector<i16>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..timesteps)
        .map(|_| {
            let x: Vec<i16> = (0..dim)
                .map(|_| {
                    if !rng.gen_bool(nz) {
                        return 0;
                    }
                    let v: f64 = normal.sample(rng);
                    match q.encode(v) {
                        0 => if v < 0.0 { -1 } else { 1 },
                        c => c,
                    }
                })
                .collect();
            CompactVector::encode(&x)
        })
        .collect()
}

/// RMS of the input intermediates over a few timesteps; sets the scale of
/// the hidden state.
fn input_rms(d: &DirWeights, q: &QuantParams, inputs: &[CompactVector<i16>]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in inputs.iter().take(8) {
        for j in 0..d.wx.cols() {
            let v = column_dot(d.wx.column(j), x).combine(d.wx.quant(), q);
            sum += v * v;
            n += 1;
        }
    }
    if n == 0 || sum == 0.0 {
        1.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn build_layer(
    rng: &mut ChaCha8Rng,
    input_dim: usize,
    hidden: usize,
    weight_nz: f64,
    shift: f64,
    bidirectional: bool,
    bits: u32,
    input_quant: QuantParams,
    inputs: &[CompactVector<i16>],
) -> (RnnLayer, f64) {
    let forward = random_dir(rng, input_dim, hidden, weight_nz, shift, bits);
    let backward = bidirectional.then(|| random_dir(rng, input_dim, hidden, weight_nz, shift, bits));
    let rms = input_rms(&forward, &input_quant, inputs);
    let hidden_quant = QuantParams { bits, s_pos: 4.0 * rms, s_neg: 0.0 };
    let out_scale = if bidirectional { 2.0 } else { 1.0 };
    let output_quant = QuantParams { bits, s_pos: out_scale * 4.0 * rms, s_neg: 0.0 };
    let layer = RnnLayer {
        input_dim,
        hidden,
        forward,
        backward,
        input_quant,
        hidden_quant,
        output_quant,
    };
    (layer, rms)
}

fn set_bias(layer: &mut RnnLayer, b: f64) {
    layer.forward.bias.iter_mut().for_each(|x| *x = b);
    if let Some(d) = layer.backward.as_mut() {
        d.bias.iter_mut().for_each(|x| *x = b);
    }
}

/// Finds a shared bias giving the target hidden density, by bisection on
/// the exact quantized forward pass.
fn calibrate(layer: &mut RnnLayer, inputs: &[CompactVector<i16>], target: f64, rms: f64, index: usize) -> Result<f64> {
    let eval = |layer: &mut RnnLayer, b: f64| -> Result<f64> {
        set_bias(layer, b);
        Ok(forward_layer(layer, inputs)?.hidden_density())
    };
    let (mut lo, mut hi) = (-8.0 * rms, 8.0 * rms);
    let (f_lo, f_hi) = (eval(layer, lo)?, eval(layer, hi)?);
    if target < f_lo || target > f_hi {
        return Err(Error::Calibration(format!(
            "layer {index}: density {target} outside reachable [{f_lo:.3}, {f_hi:.3}]"
        )));
    }
    let (mut best_b, mut best_err) = (lo, (f_lo - target).abs());
    for _ in 0..CALIBRATION_ITERS {
        let mid = 0.5 * (lo + hi);
        let f = eval(layer, mid)?;
        if (f - target).abs() < best_err {
            best_err = (f - target).abs();
            best_b = mid;
        }
        if best_err <= CALIBRATION_STOP {
            break;
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best_err > CALIBRATION_TOL {
        return Err(Error::Calibration(format!(
            "layer {index}: closest density is {best_err:.3} away from {target}"
        )));
    }
    set_bias(layer, best_b);
    Ok(best_b)
}

/// Builds a calibrated synthetic network plus the utterance it was
/// calibrated on. Deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(RnnNetwork, Utterance)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let input_dim = spec.input_dim.unwrap_or(spec.hidden);
    let in_q = QuantParams { bits: spec.bits, s_pos: INPUT_SCALE, s_neg: INPUT_SCALE };
    let utt = Utterance::new(
        random_inputs(&mut rng, input_dim, spec.timesteps, spec.layer0_density(), &in_q),
        input_dim,
    )?;
    let mut layers: Vec<RnnLayer> = Vec::with_capacity(spec.layers);
    let mut inputs = utt.inputs.clone();
    let mut q = in_q;
    for i in 0..spec.layers {
        let dim = if i == 0 { input_dim } else { spec.hidden };
        let (mut layer, rms) = build_layer(
            &mut rng,
            dim,
            spec.hidden,
            spec.weight_nz,
            spec.recurrent_shift,
            spec.bidirectional,
            spec.bits,
            q,
            &inputs,
        );
        let prefix = &inputs[..inputs.len().min(CALIBRATION_STEPS)];
        calibrate(&mut layer, prefix, spec.act_nz, rms, i)?;
        inputs = forward_layer(&layer, &inputs)?.outputs;
        q = layer.output_quant;
        layers.push(layer);
    }
    let net = RnnNetwork::new(
        format!("synthetic-h{}-l{}-w{}-a{}-s{}", spec.hidden, spec.layers, spec.weight_nz, spec.act_nz, spec.seed),
        layers,
    )?;
    Ok((net, utt))
}

/// Seeded random utterance: each element nonzero with probability `nz`,
/// drawn from a unit normal and encoded with `q`.
pub fn random_utterance(seed: u64, dim: usize, timesteps: usize, nz: f64, q: &QuantParams) -> Result<Utterance> {
    if !(0.0..=1.0).contains(&nz) {
        return Err(Error::param(format!("input_nz = {nz} not in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Utterance::new(random_inputs(&mut rng, dim, timesteps, nz, q), dim)
}

/// Seeded `rows x cols` matrix: each entry nonzero with probability `nz`,
/// normally distributed, quantized to `bits`.
pub fn random_sparse_matrix(seed: u64, rows: usize, cols: usize, nz: f64, bits: u32) -> Result<CompactMatrix> {
    if !(0.0..=1.0).contains(&nz) {
        return Err(Error::param(format!("nz = {nz} not in [0, 1]")));
    }
    if !(2..=16).contains(&bits) {
        return Err(Error::param(format!("bits = {bits} not in 2..=16")));
    }
    if nz == 0.0 {
        return Ok(CompactMatrix::zeros(rows, cols, QuantParams::unit(bits)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_matrix(&mut rng, rows, cols, nz, 0.0, 1.0, bits))
}

/// Small uncalibrated network for tests and fuzzing: biases are drawn at
/// random so hidden densities land wherever they land.
pub fn random_network(
    seed: u64,
    input_dim: usize,
    hidden: &[usize],
    weight_nz: f64,
    input_nz: f64,
    timesteps: usize,
    bidirectional: bool,
) -> Result<(RnnNetwork, Utterance)> {
    if hidden.is_empty() {
        return Err(Error::dim("need at least one layer"));
    }
    for (name, v) in [("weight_nz", weight_nz), ("input_nz", input_nz)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(format!("{name} = {v} not in [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_q = QuantParams { bits: 10, s_pos: INPUT_SCALE, s_neg: INPUT_SCALE };
    let utt = Utterance::new(random_inputs(&mut rng, input_dim, timesteps, input_nz, &in_q), input_dim)?;
    let mut layers = Vec::with_capacity(hidden.len());
    let mut inputs = utt.inputs.clone();
    let mut q = in_q;
    let mut dim = input_dim;
    let nz = weight_nz.max(1e-3);
    for &h in hidden {
        let (mut layer, rms) = build_layer(&mut rng, dim, h, nz, 0.5, bidirectional, 10, q, &inputs);
        if weight_nz == 0.0 {
            for d in std::iter::once(&mut layer.forward).chain(layer.backward.as_mut()) {
                d.wx = CompactMatrix::zeros(dim, h, *d.wx.quant());
                d.wh = CompactMatrix::zeros(h, h, *d.wh.quant());
            }
        }
        let bias = Normal::new(0.0, 0.5 * rms).expect("positive std-dev");
        for d in std::iter::once(&mut layer.forward).chain(layer.backward.as_mut()) {
            d.bias = (0..h).map(|_| bias.sample(&mut rng)).collect();
        }
        inputs = forward_layer(&layer, &inputs)?.outputs;
        q = layer.output_quant;
        dim = h;
        layers.push(layer);
    }
    let net = RnnNetwork::new(format!("random-{seed}"), layers)?;
    Ok((net, utt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_range_enforced() {
        let mut s = SyntheticSpec::standard(4, 1);
        s.hidden = 128;
        assert!(matches!(generate_synthetic(&s), Err(Error::Parameter(_))));
    }

    #[test]
    fn random_network_is_deterministic() {
        let a = random_network(9, 12, &[8, 8], 0.5, 0.5, 3, true).unwrap();
        let b = random_network(9, 12, &[8, 8], 0.5, 0.5, 3, true).unwrap();
        assert_eq!(a, b);
    }
}
