use std::path::PathBuf;

use masr_core::model::{
    forward_network, generate_synthetic, load_model, random_utterance, NetworkTrace, RnnNetwork, SyntheticSpec,
    Utterance,
};
use masr_core::Result;
use serde::{Deserialize, Serialize};

/// What to simulate: a model file driven by a random utterance, or a
/// generated synthetic network. Defaults to the standard five-layer
/// 800-unit benchmark at 128 timesteps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub model: Option<PathBuf>,
    pub hidden: usize,
    pub layers: usize,
    pub weight_nz: f64,
    pub act_nz: f64,
    /// Layer-0 input density; synthetic default follows `act_nz`.
    pub input_nz: Option<f64>,
    pub timesteps: usize,
    pub seed: u64,
    pub bidirectional: bool,
    pub bits: u32,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        let s = SyntheticSpec::standard(128, 1);
        WorkloadSpec {
            model: None,
            hidden: s.hidden,
            layers: s.layers,
            weight_nz: s.weight_nz,
            act_nz: s.act_nz,
            input_nz: s.input_nz,
            timesteps: s.timesteps,
            seed: s.seed,
            bidirectional: s.bidirectional,
            bits: s.bits,
        }
    }
}

/// Input density used with model files when none is given.
const MODEL_INPUT_NZ: f64 = 0.36;

impl WorkloadSpec {
    pub fn synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            hidden: self.hidden,
            layers: self.layers,
            weight_nz: self.weight_nz,
            act_nz: self.act_nz,
            input_nz: self.input_nz,
            timesteps: self.timesteps,
            seed: self.seed,
            bidirectional: self.bidirectional,
            bits: self.bits,
            ..SyntheticSpec::standard(self.timesteps, self.seed)
        }
    }

    pub fn load(&self) -> Result<Workload> {
        let (net, utterance) = match &self.model {
            Some(path) => {
                let net = load_model(path)?;
                let l0 = &net.layers[0];
                let u = random_utterance(
                    self.seed,
                    l0.input_dim,
                    self.timesteps,
                    self.input_nz.unwrap_or(MODEL_INPUT_NZ),
                    &l0.input_quant,
                )?;
                (net, u)
            }
            None => generate_synthetic(&self.synthetic())?,
        };
        Workload::new(net, utterance)
    }
}

/// A loaded network, its utterance and the golden trace of the pair.
pub struct Workload {
    pub net: RnnNetwork,
    pub utterance: Utterance,
    pub trace: NetworkTrace,
}

impl Workload {
    pub fn new(net: RnnNetwork, utterance: Utterance) -> Result<Self> {
        let trace = forward_network(&net, &utterance)?;
        Ok(Workload { net, utterance, trace })
    }

    pub fn name(&self) -> &str {
        &self.net.name
    }

    /// Densest layer input or hidden state; the activation SRAM is sized
    /// for it.
    pub fn act_density(&self) -> f64 {
        self.trace
            .stats
            .iter()
            .map(|s| s.input_density.max(s.hidden_density))
            .fold(0.0, f64::max)
    }
}
