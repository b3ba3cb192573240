//! Differentiable arrays and the two networks built on them.

pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod model;

pub use adam::Adam;
pub use graph::{Graph, Var};
pub use model::{
    fnn_inputs, lstm_forward, noise_fnn_forward, Bound, Dense, LstmLayer, LstmPredictor,
    ModelConfig, NkfModel, NoiseFnn,
};

use crate::error::Result;
use crate::grid::Grid;

/// Applies one optimizer step to every parameter of `model`.
pub fn optimizer_step(model: &mut NkfModel, grads: &[Grid]) -> Result<()> {
    let mut opt = std::mem::take(&mut model.optimizer);
    let res = opt.step(&mut model.params_mut(), grads);
    model.optimizer = opt;
    res
}
