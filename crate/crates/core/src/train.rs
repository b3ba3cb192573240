//! Minibatch training of the full NKF graph.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::neural::{checkpoint, optimizer_step, NkfModel};
use crate::nkf::build_forward;

/// Noisy and clean amplitude grids of one utterance.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub noisy: Grid,
    pub clean: Grid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    /// Frames per training segment; longer utterances are cropped at a
    /// random offset.
    pub seq_len: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub seed: u64,
    /// Per-epoch checkpoints `epoch-NNN.ckpt` are written here.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 4,
            seq_len: 256,
            epochs: 10,
            max_steps: None,
            seed: 1,
            checkpoint_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    /// Batch loss before each optimizer step.
    pub losses: Vec<f64>,
    pub epochs_completed: usize,
}

impl TrainReport {
    /// Mean of the first `window` losses.
    pub fn smoothed_initial(&self, window: usize) -> f64 {
        let n = window.min(self.losses.len());
        self.losses[..n].iter().sum::<f64>() / n.max(1) as f64
    }

    /// Mean of the last `window` losses.
    pub fn smoothed_final(&self, window: usize) -> f64 {
        let n = window.min(self.losses.len()).max(1);
        self.losses[self.losses.len().saturating_sub(n)..]
            .iter()
            .sum::<f64>()
            / n as f64
    }
}

fn crop(pair: &TrainingPair, len: usize, rng: &mut ChaCha8Rng) -> (Grid, Grid) {
    let frames = pair.noisy.rows();
    let start = if frames > len {
        rng.random_range(0..=frames - len)
    } else {
        0
    };
    (
        pair.noisy.slice_rows(start, len),
        pair.clean.slice_rows(start, len),
    )
}

/// Trains `model` in place. On divergence the model keeps the parameters
/// of the last successful step and an error is returned.
pub fn train(
    model: &mut NkfModel,
    corpus: &[TrainingPair],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty training corpus".into()));
    }
    if cfg.batch == 0 || cfg.seq_len == 0 {
        return Err(Error::Config("batch and seq_len must be positive".into()));
    }
    for p in corpus {
        p.noisy.ensure_same_shape(&p.clean, "training pair")?;
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    model.optimizer.lr = cfg.lr;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            if cfg.max_steps.is_some_and(|m| report.losses.len() >= m) {
                break 'epochs;
            }
            let len = chunk
                .iter()
                .map(|&i| corpus[i].noisy.rows())
                .min()
                .unwrap_or(0)
                .min(cfg.seq_len);
            let crops: Vec<(Grid, Grid)> = chunk
                .iter()
                .map(|&i| crop(&corpus[i], len, &mut rng))
                .collect();
            let noisy: Vec<&Grid> = crops.iter().map(|c| &c.0).collect();
            let clean: Vec<&Grid> = crops.iter().map(|c| &c.1).collect();

            let mut fg = build_forward(model, &noisy, Some(&clean), true)?;
            let loss_var = fg.loss.expect("loss requested");
            let loss = fg.graph.value(loss_var).get(0, 0);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at step {}",
                    report.losses.len()
                )));
            }
            fg.graph.backward(loss_var)?;
            let grads = fg.bound.grads(&fg.graph);
            optimizer_step(model, &grads)?;
            report.losses.push(loss);
        }
        report.epochs_completed = epoch + 1;
        if let Some(dir) = &cfg.checkpoint_dir {
            checkpoint::save(model, &dir.join(format!("epoch-{:03}.ckpt", epoch + 1)))?;
        }
    }
    Ok(report)
}
