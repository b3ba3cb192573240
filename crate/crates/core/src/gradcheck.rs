//! Finite-difference check of the end-to-end loss gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::Grid;
use crate::neural::{ModelConfig, NkfModel};
use crate::nkf::build_forward;

/// Central-difference step.
pub const STEP: f64 = 1e-5;

/// Denominator floor of the relative error, so gradients that are zero on
/// both sides (dead ReLUs, clamped gains) do not divide by zero.
pub const REL_FLOOR: f64 = 1e-8;

/// `F = 4` bins, one 2-unit LSTM layer, context 3.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        window: 6,
        hop: 2,
        variance_span: 3,
        context: 3,
        lstm_layers: 1,
        lstm_units: 2,
        fnn_hidden: 3,
        log_features: false,
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// (parameter tensor, element) of the worst entry.
    pub worst: (usize, usize),
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn loss(model: &NkfModel, noisy: &Grid, clean: &Grid) -> Result<f64> {
    let fg = build_forward(model, &[noisy], Some(&[clean]), false)?;
    Ok(fg.loss_value().expect("loss"))
}

/// Compares the backpropagated gradient of the loss on a random `frames`
/// utterance against central differences for every parameter element.
pub fn check_model(model: &NkfModel, frames: usize, seed: u64) -> Result<GradCheckReport> {
    let bins = model.config.bins();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // amplitudes well above the initial noise estimate keep the Wiener gain
    // off its clamp boundaries
    let noisy = Grid::from_fn(frames, bins, |_, _| rng.random_range(1.5..3.0));
    let clean = Grid::from_fn(frames, bins, |_, _| rng.random_range(0.5..2.0));

    let mut fg = build_forward(model, &[&noisy], Some(&[&clean]), true)?;
    let l = fg.loss.expect("loss");
    fg.graph.backward(l)?;
    let analytic = fg.bound.grads(&fg.graph);

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: (0, 0),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        for ei in 0..grad.len() {
            let orig = probe.params()[pi].as_slice()[ei];
            probe.params_mut()[pi].as_mut_slice()[ei] = orig + STEP;
            let up = loss(&probe, &noisy, &clean)?;
            probe.params_mut()[pi].as_mut_slice()[ei] = orig - STEP;
            let down = loss(&probe, &noisy, &clean)?;
            probe.params_mut()[pi].as_mut_slice()[ei] = orig;

            let numeric = (up - down) / (2.0 * STEP);
            let a = grad.as_slice()[ei];
            let rel = relative_error(a, numeric);
            report.checked += 1;
            if rel > report.max_rel_error || !rel.is_finite() {
                report.max_rel_error = rel;
                report.worst = (pi, ei);
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// The standard check: tiny model from `seed`, five frames.
pub fn global_gradient_check(seed: u64) -> Result<GradCheckReport> {
    let model = NkfModel::new(tiny_config(), seed)?;
    check_model(&model, 5, seed.wrapping_add(1))
}
