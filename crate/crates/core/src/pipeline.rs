//! Method selection shared by the command line and the evaluation code.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{read_wav, CorpusManifest, Split};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kalman::{enhance_kf_baseline, KfConfig};
use crate::neural::NkfModel;
use crate::nkf::{enhance, estimate_grids};
use crate::result::{EnhancementResult, EstimateGrids};
use crate::signal::{resynthesize, stft, Waveform};
use crate::train::TrainingPair;
use crate::wiener::{apply_wiener, track_sigma_y, VarianceTracks};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// The neural Kalman filter.
    Nkf,
    /// Wiener-initialised LP analysis plus a conventional Kalman filter.
    Kf,
    /// The Wiener gain alone.
    Wiener,
    /// The LSTM amplitude prediction alone.
    Lstm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Nkf, Method::Kf, Method::Wiener, Method::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nkf => "nkf",
            Method::Kf => "kf",
            Method::Wiener => "wiener",
            Method::Lstm => "lstm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Where the Kalman and Wiener methods take the noise variance from.
/// The NKF always uses its own noise network.
#[derive(Clone, Debug)]
pub enum NoiseSource {
    /// The trained noise network.
    Neural,
    /// A precomputed grid, usually from [`crate::data::oracle_noise_variance`].
    Oracle(Grid),
}

/// The noise network's variance grid for a noisy amplitude grid.
pub fn neural_noise_variance(model: &NkfModel, noisy_amp: &Grid) -> Result<Grid> {
    Ok(estimate_grids(model, noisy_amp)?.sigma_v2)
}

fn need_model(model: Option<&NkfModel>, method: Method) -> Result<&NkfModel> {
    model.ok_or_else(|| Error::InvalidArgument(format!("method {method} needs a trained model")))
}

/// Enhances one utterance with `method`.
pub fn enhance_with(
    method: Method,
    model: Option<&NkfModel>,
    noisy: &Waveform,
    noise: &NoiseSource,
    kf: &KfConfig,
) -> Result<EnhancementResult> {
    if method == Method::Nkf {
        return enhance(need_model(model, method)?, noisy);
    }
    let (window, hop, span) = match model {
        Some(m) => (m.config.window, m.config.hop, m.config.variance_span),
        None => (kf.window, kf.hop, kf.variance_span),
    };
    let spec = stft(noisy, window, hop)?;
    let amp = spec.amplitude();
    let sigma_v2 = |model: Option<&NkfModel>| -> Result<Grid> {
        match noise {
            NoiseSource::Neural => neural_noise_variance(need_model(model, method)?, amp),
            NoiseSource::Oracle(g) => {
                g.ensure_same_shape(amp, "noise variance")?;
                Ok(g.clone())
            }
        }
    };
    let grids = match method {
        Method::Nkf => unreachable!(),
        Method::Kf => {
            let cfg = KfConfig {
                window,
                hop,
                variance_span: span,
                ..kf.clone()
            };
            return enhance_kf_baseline(noisy, &sigma_v2(model)?, &cfg);
        }
        Method::Lstm => {
            let mut g = estimate_grids(need_model(model, method)?, amp)?;
            g.amp_out = g.amp_lstm.clone();
            g
        }
        Method::Wiener => {
            let sv = sigma_v2(model)?;
            let tracks = VarianceTracks::new(track_sigma_y(amp, span), sv.clone())?;
            let w = apply_wiener(amp, &tracks)?;
            let (t, f) = amp.shape();
            EstimateGrids {
                amp_lstm: Grid::zeros(t, f),
                amp_wiener: w.clone(),
                sigma_r2: Grid::zeros(t, f),
                sigma_v2: sv,
                gain: Grid::zeros(t, f),
                amp_out: w,
            }
        }
    };
    let waveform = resynthesize(&grids.amp_out, &spec, noisy.len())?;
    Ok(EnhancementResult { waveform, grids })
}

/// Reads the noisy and clean files of `split` and analyses them.
pub fn load_training_pairs(
    manifest: &CorpusManifest,
    split: Split,
    window: usize,
    hop: usize,
) -> Result<Vec<TrainingPair>> {
    let entries: Vec<_> = manifest.split(split).collect();
    entries
        .par_iter()
        .map(|e| {
            let noisy = read_wav(&manifest.resolve(&e.noisy))?;
            let clean = read_wav(&manifest.resolve(&e.clean))?;
            Ok(TrainingPair {
                noisy: stft(&noisy, window, hop)?.amplitude().clone(),
                clean: stft(&clean, window, hop)?.amplitude().clone(),
            })
        })
        .collect()
}
