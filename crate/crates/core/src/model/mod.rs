//! Functional golden model of the quantized bidirectional RNN.

pub mod arith;
mod batchnorm;
mod dense;
mod file;
mod forward;
mod layer;
mod prune;
mod quant;
mod synthetic;

pub use arith::{output_neuron, vvadd_neuron, SignSplitAcc, MAX_DOT_LEN};
pub use batchnorm::{refactor_batchnorm, BatchNormParams};
pub use dense::DenseMatrix;
pub use file::{
    decode_model, encode_model, load_model, save_model, FileDir, FileLayer, FileMatrix, MatrixEncoding, ModelFile,
};
pub use forward::{
    column_dot, forward_layer, forward_network, forward_network_predicated, forward_predicated, select_theta,
    LayerStats, LayerTrace, NetworkTrace, PredicationStats,
};
pub use layer::{DirWeights, Direction, FloatDirWeights, FloatLayer, RnnLayer, RnnNetwork, Utterance};
pub use prune::prune_magnitude;
pub use quant::{dequantize, quantize, QuantParams};
pub use synthetic::{generate_synthetic, random_network, random_sparse_matrix, random_utterance, SyntheticSpec};
