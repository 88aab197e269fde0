use serde::{Deserialize, Serialize};

use super::arith::{output_neuron, vvadd_neuron, SignSplitAcc};
use super::layer::{DirWeights, RnnLayer, RnnNetwork, Utterance};
use crate::error::{Error, Result};
use crate::sparse::CompactVector;

/// Sign-split dot product of one weight column with a dense activation
/// vector, touching only positions where both are nonzero.
#[inline]
pub fn column_dot(col: &CompactVector<i16>, act: &CompactVector<i16>) -> SignSplitAcc {
    let mut acc = SignSplitAcc::default();
    for (_, w, a) in col.joint(act) {
        acc.mac(w, a);
    }
    acc
}

/// Everything one layer produced, in time order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub outputs: Vec<CompactVector<i16>>,
    pub forward_hidden: Vec<CompactVector<i16>>,
    pub backward_hidden: Option<Vec<CompactVector<i16>>>,
    /// Input-matvec columns skipped by predication.
    pub skipped: u64,
}

impl LayerTrace {
    pub fn hidden_density(&self) -> f64 {
        let all = self.forward_hidden.iter().chain(self.backward_hidden.iter().flatten());
        density(all)
    }

    pub fn output_density(&self) -> f64 {
        density(self.outputs.iter())
    }
}

pub(crate) fn density<'a>(vs: impl Iterator<Item = &'a CompactVector<i16>>) -> f64 {
    let (mut nnz, mut dim) = (0usize, 0usize);
    for v in vs {
        nnz += v.nnz();
        dim += v.dim();
    }
    if dim == 0 {
        0.0
    } else {
        nnz as f64 / dim as f64
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_nan() || theta > 0.0 {
        return Err(Error::param(format!("predication threshold must be <= 0, got {theta}")));
    }
    Ok(())
}

fn check_inputs(layer: &RnnLayer, inputs: &[CompactVector<i16>]) -> Result<()> {
    if let Some(t) = inputs.iter().position(|x| x.dim() != layer.input_dim) {
        return Err(Error::dim(format!(
            "input at timestep {t} has dim {}, layer expects {}",
            inputs[t].dim(),
            layer.input_dim
        )));
    }
    Ok(())
}

/// Hidden codes of one direction, indexed by timestep.
fn run_direction(
    layer: &RnnLayer,
    d: &DirWeights,
    xs: &[CompactVector<i16>],
    reverse: bool,
    theta: f64,
    skipped: &mut u64,
) -> Vec<Vec<i16>> {
    let t_len = xs.len();
    let mut out = vec![Vec::new(); t_len];
    let mut h = vec![0i16; layer.hidden];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let hc = CompactVector::encode(&h);
        let mut next = vec![0i16; layer.hidden];
        for (j, n) in next.iter_mut().enumerate() {
            let hid = column_dot(d.wh.column(j), &hc).combine(d.wh.quant(), &layer.hidden_quant);
            if hid < theta {
                *skipped += 1;
                continue;
            }
            let inp = column_dot(d.wx.column(j), &xs[t]).combine(d.wx.quant(), &layer.input_quant);
            *n = vvadd_neuron(hid, inp, d.bias[j], &layer.hidden_quant);
        }
        h = next;
        out[t] = h.clone();
    }
    out
}

fn run_layer(layer: &RnnLayer, inputs: &[CompactVector<i16>], theta: f64) -> Result<LayerTrace> {
    layer.validate()?;
    check_inputs(layer, inputs)?;
    let xs = inputs;
    let mut skipped = 0;
    let fwd = run_direction(layer, &layer.forward, xs, false, theta, &mut skipped);
    let bwd = layer
        .backward
        .as_ref()
        .map(|b| run_direction(layer, b, xs, true, theta, &mut skipped));
    let outputs = (0..xs.len())
        .map(|t| {
            let y: Vec<i16> = (0..layer.hidden)
                .map(|j| {
                    output_neuron(
                        fwd[t][j],
                        bwd.as_ref().map(|g| g[t][j]),
                        &layer.hidden_quant,
                        &layer.output_quant,
                    )
                })
                .collect();
            CompactVector::encode(&y)
        })
        .collect();
    let compact = |v: Vec<Vec<i16>>| v.iter().map(|h| CompactVector::encode(h)).collect::<Vec<_>>();
    Ok(LayerTrace {
        outputs,
        forward_hidden: compact(fwd),
        backward_hidden: bwd.map(compact),
        skipped,
    })
}

/// Exact fixed-point forward and backward passes of one layer.
pub fn forward_layer(layer: &RnnLayer, inputs: &[CompactVector<i16>]) -> Result<LayerTrace> {
    run_layer(layer, inputs, f64::NEG_INFINITY)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredicationStats {
    /// Input-matvec columns that could have been skipped.
    pub candidates: u64,
    pub skipped: u64,
    /// Output elements that differ from the unpredicated run.
    pub mismatches: u64,
    pub compared: u64,
}

impl PredicationStats {
    pub fn skip_fraction(&self) -> f64 {
        ratio(self.skipped, self.candidates)
    }

    pub fn mismatch_rate(&self) -> f64 {
        ratio(self.mismatches, self.compared)
    }

    fn add(&mut self, o: &PredicationStats) {
        self.candidates += o.candidates;
        self.skipped += o.skipped;
        self.mismatches += o.mismatches;
        self.compared += o.compared;
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn mismatches(a: &[CompactVector<i16>], b: &[CompactVector<i16>]) -> (u64, u64) {
    let mut diff = 0;
    let mut total = 0;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.decode(), y.decode());
        total += x.len() as u64;
        diff += x.iter().zip(&y).filter(|(p, q)| p != q).count() as u64;
    }
    (diff, total)
}

/// Forward pass that skips the input dot product of every neuron whose
/// hidden intermediate is below `theta`, treating it as ReLU-zero.
pub fn forward_predicated(
    layer: &RnnLayer,
    inputs: &[CompactVector<i16>],
    theta: f64,
) -> Result<(LayerTrace, PredicationStats)> {
    check_theta(theta)?;
    let pred = run_layer(layer, inputs, theta)?;
    let exact = forward_layer(layer, inputs)?;
    let (mismatches, compared) = mismatches(&pred.outputs, &exact.outputs);
    let dirs = if layer.is_bidirectional() { 2 } else { 1 };
    let stats = PredicationStats {
        candidates: (layer.hidden * inputs.len() * dirs) as u64,
        skipped: pred.skipped,
        mismatches,
        compared,
    };
    Ok((pred, stats))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub input_density: f64,
    pub hidden_density: f64,
    pub output_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTrace {
    pub layers: Vec<LayerTrace>,
    pub stats: Vec<LayerStats>,
}

impl NetworkTrace {
    pub fn outputs(&self) -> &[CompactVector<i16>] {
        &self.layers.last().expect("network has layers").outputs
    }
}

fn run_network(net: &RnnNetwork, u: &Utterance, theta: f64) -> Result<NetworkTrace> {
    net.validate()?;
    let mut layers = Vec::with_capacity(net.layers.len());
    let mut stats = Vec::with_capacity(net.layers.len());
    let mut input: &[CompactVector<i16>] = &u.inputs;
    for layer in &net.layers {
        let tr = run_layer(layer, input, theta)?;
        stats.push(LayerStats {
            input_density: density(input.iter()),
            hidden_density: tr.hidden_density(),
            output_density: tr.output_density(),
        });
        layers.push(tr);
        input = &layers.last().unwrap().outputs;
    }
    Ok(NetworkTrace { layers, stats })
}

/// Runs every layer in order, each over the whole utterance.
pub fn forward_network(net: &RnnNetwork, u: &Utterance) -> Result<NetworkTrace> {
    run_network(net, u, f64::NEG_INFINITY)
}

/// Predicated network pass. Mismatches are counted layer by layer against
/// an unpredicated run of the whole network.
pub fn forward_network_predicated(
    net: &RnnNetwork,
    u: &Utterance,
    theta: f64,
) -> Result<(NetworkTrace, PredicationStats)> {
    check_theta(theta)?;
    let pred = run_network(net, u, theta)?;
    let exact = forward_network(net, u)?;
    let mut stats = PredicationStats::default();
    for (l, (p, e)) in net.layers.iter().zip(pred.layers.iter().zip(&exact.layers)) {
        let (mismatches, compared) = mismatches(&p.outputs, &e.outputs);
        let dirs = if l.is_bidirectional() { 2 } else { 1 };
        stats.add(&PredicationStats {
            candidates: (l.hidden * u.timesteps() * dirs) as u64,
            skipped: p.skipped,
            mismatches,
            compared,
        });
    }
    Ok((pred, stats))
}

/// Largest threshold from `candidates` whose network mismatch rate stays at
/// or below `max_mismatch`. Returns `-inf` when none qualifies.
pub fn select_theta(net: &RnnNetwork, u: &Utterance, candidates: &[f64], max_mismatch: f64) -> Result<f64> {
    let mut sorted: Vec<f64> = candidates.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for theta in sorted {
        let (_, s) = forward_network_predicated(net, u, theta)?;
        if s.mismatch_rate() <= max_mismatch {
            return Ok(theta);
        }
    }
    Ok(f64::NEG_INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_theta_rejected() {
        assert!(matches!(check_theta(0.5), Err(Error::Parameter(_))));
        assert!(check_theta(f64::NAN).is_err());
        assert!(check_theta(0.0).is_ok());
        assert!(check_theta(f64::NEG_INFINITY).is_ok());
    }
}
