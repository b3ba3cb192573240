//! Speech enhancement with a neural Kalman filter.
//!
//! Each STFT bin's amplitude track is filtered over time. An LSTM predicts
//! the next clean amplitude together with the variance of its own error, a
//! small feed-forward network estimates the noise variance, and the two
//! variances set a gain that blends the LSTM prediction with a Wiener
//! estimate of the same bin. Both networks are trained end to end on the
//! blended output.
//!
//! ```
//! use nkf::{enhance, ModelConfig, NkfModel, Waveform};
//!
//! let model = NkfModel::new(ModelConfig { lstm_units: 8, fnn_hidden: 8, ..Default::default() }, 1)?;
//! let noisy = Waveform::new((0..4000).map(|n| (n as f64 * 0.05).sin() * 0.1).collect(), 16_000)?;
//! let out = enhance(&model, &noisy)?;
//! assert_eq!(out.waveform.len(), noisy.len());
//! assert!(out.grids.is_consistent());
//! # Ok::<(), nkf::Error>(())
//! ```
//!
//! A conventional Kalman-filter baseline ([`enhance_kf_baseline`]), the
//! evaluation metrics ([`metrics`]) and a synthetic corpus generator
//! ([`data::synth_corpus`]) are included.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod grid;
pub mod kalman;
pub mod lp;
pub mod metrics;
pub mod neural;
pub mod nkf;
pub mod pipeline;
pub mod result;
pub mod signal;
pub mod train;
pub mod wiener;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use grid::Grid;
pub use kalman::{enhance_kf_baseline, run_kf, KfConfig};
pub use lp::{levinson_durbin, transition_matrix, LpModel};
pub use metrics::{fwsegsnr, segsnr, MetricReport};
pub use neural::{checkpoint, ModelConfig, NkfModel};
pub use nkf::{enhance, nkf_combine, nkf_forward, nkf_gain, nkf_loss};
pub use pipeline::{enhance_with, Method, NoiseSource};
pub use result::{EnhancementResult, EstimateGrids};
pub use signal::{istft, stft, Spectrogram, Waveform};
pub use train::{train, TrainConfig, TrainReport, TrainingPair};
pub use wiener::{apply_wiener, wiener_gain};
