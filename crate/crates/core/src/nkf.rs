//! The neural Kalman filter: the residual-variance head and the noise
//! network set a gain `G = s_r / (s_r + s_v)` that blends the Wiener
//! estimate with the LSTM prediction,
//! `out = G * wiener + (1 - G) * lstm`.
//!
//! Everything from the noisy amplitudes to the loss is one differentiable
//! graph, so the loss on the blended amplitude trains both networks
//! through the Wiener and blending arithmetic.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::neural::{fnn_inputs, Bound, Graph, NkfModel, Var};
use crate::result::{EnhancementResult, EstimateGrids};
use crate::signal::{resynthesize, stft, Spectrogram, Waveform};
use crate::wiener::{track_sigma_y, VARIANCE_FLOOR};

/// `s_r / (s_r + s_v)` for strictly positive variances.
#[inline]
pub fn nkf_gain(sigma_r2: f64, sigma_v2: f64) -> f64 {
    sigma_r2 / (sigma_r2 + sigma_v2)
}

/// `gain * wiener + (1 - gain) * lstm`, never leaving the interval spanned
/// by the two estimates.
#[inline]
pub fn nkf_combine(gain: f64, amp_wiener: f64, amp_lstm: f64) -> f64 {
    let v = amp_lstm + gain * (amp_wiener - amp_lstm);
    v.clamp(amp_wiener.min(amp_lstm), amp_wiener.max(amp_lstm))
}

/// Mean squared error between two amplitude grids.
pub fn nkf_loss(amp_out: &Grid, clean_amp: &Grid) -> Result<f64> {
    amp_out.ensure_same_shape(clean_amp, "nkf_loss")?;
    let n = amp_out.len().max(1) as f64;
    Ok(amp_out
        .as_slice()
        .iter()
        .zip(clean_amp.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Handles into a built forward graph. Grids are `(T*B) x F`, row `t*B + b`.
pub struct ForwardGraph {
    pub graph: Graph,
    pub bound: Bound,
    pub batch: usize,
    pub frames: usize,
    pub amp_lstm: Var,
    pub sigma_r2: Var,
    pub sigma_v2: Var,
    pub amp_wiener: Var,
    pub gain: Var,
    pub amp_out: Var,
    pub loss: Option<Var>,
}

impl ForwardGraph {
    /// Rows of utterance `b` of an interleaved grid.
    pub fn utterance(&self, v: Var, b: usize) -> Grid {
        deinterleave(self.graph.value(v), self.batch, b)
    }

    pub fn loss_value(&self) -> Option<f64> {
        self.loss.map(|l| self.graph.value(l).get(0, 0))
    }
}

fn interleave(grids: &[Grid]) -> Grid {
    let (frames, bins) = grids[0].shape();
    let batch = grids.len();
    let mut out = Grid::zeros(frames * batch, bins);
    for t in 0..frames {
        for (b, g) in grids.iter().enumerate() {
            out.row_mut(t * batch + b).copy_from_slice(g.row(t));
        }
    }
    out
}

fn deinterleave(g: &Grid, batch: usize, b: usize) -> Grid {
    let frames = g.rows() / batch;
    Grid::from_fn(frames, g.cols(), |t, f| g.get(t * batch + b, f))
}

/// Builds the full forward graph for a batch of equal-length utterances.
///
/// With `clean` present the graph ends in the mean-squared loss. With
/// `trainable` the parameters are differentiable leaves.
pub fn build_forward(
    model: &NkfModel,
    noisy: &[&Grid],
    clean: Option<&[&Grid]>,
    trainable: bool,
) -> Result<ForwardGraph> {
    let cfg = &model.config;
    let first = noisy
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let (frames, bins) = first.shape();
    if frames == 0 {
        return Err(Error::InvalidArgument("utterance has no frames".into()));
    }
    if bins != cfg.bins() {
        return Err(Error::shape(
            "nkf_forward",
            (frames, cfg.bins()),
            first.shape(),
        ));
    }
    for g in noisy {
        first.ensure_same_shape(g, "nkf_forward batch")?;
    }
    if let Some(clean) = clean {
        if clean.len() != noisy.len() {
            return Err(Error::InvalidArgument(
                "clean/noisy batch sizes differ".into(),
            ));
        }
        for g in clean {
            first.ensure_same_shape(g, "nkf_forward clean")?;
        }
    }
    let batch = noisy.len();

    let mut graph = Graph::new();
    let bound = model.bind(&mut graph, trainable);

    let inputs: Vec<Var> = (0..frames)
        .map(|t| {
            let rows = Grid::from_fn(batch, bins, |b, f| cfg.feature(noisy[b].get(t, f)));
            graph.constant(rows)
        })
        .collect();
    let (amp_lstm, logvar) = bound.lstm_forward(&mut graph, &inputs)?;
    let sigma_r2 = graph.exp(logvar);

    let sigma_y2: Vec<Grid> = noisy
        .iter()
        .map(|a| track_sigma_y(a, cfg.variance_span))
        .collect();
    let fnn_rows = noisy
        .iter()
        .zip(&sigma_y2)
        .map(|(a, s)| fnn_inputs(cfg, a, s))
        .collect::<Result<Vec<_>>>()?;
    let fnn_in = graph.constant(interleave(&fnn_rows));
    let sigma_v2 = bound.noise_forward(&mut graph, fnn_in)?;

    let inv_sy = interleave(&sigma_y2).map(|v| 1.0 / v.max(VARIANCE_FLOOR));
    let inv_sy = graph.constant(inv_sy);
    let noisy_owned: Vec<Grid> = noisy.iter().map(|g| (*g).clone()).collect();
    let noisy_amp = graph.constant(interleave(&noisy_owned));
    let ratio = graph.mul(sigma_v2, inv_sy)?;
    let neg = graph.scale(ratio, -1.0);
    let h = graph.add_scalar(neg, 1.0);
    let h = graph.clamp(h, 0.0, 1.0);
    let amp_wiener = graph.mul(h, noisy_amp)?;

    let total = graph.add(sigma_r2, sigma_v2)?;
    let gain = graph.div(sigma_r2, total)?;
    let diff = graph.sub(amp_wiener, amp_lstm)?;
    let step = graph.mul(gain, diff)?;
    let amp_out = graph.add(amp_lstm, step)?;

    let loss = match clean {
        Some(clean) => {
            let owned: Vec<Grid> = clean.iter().map(|g| (*g).clone()).collect();
            let target = graph.constant(interleave(&owned));
            Some(graph.mean_square(amp_out, target)?)
        }
        None => None,
    };

    Ok(ForwardGraph {
        graph,
        bound,
        batch,
        frames,
        amp_lstm,
        sigma_r2,
        sigma_v2,
        amp_wiener,
        gain,
        amp_out,
        loss,
    })
}

/// Runs the model on one noisy amplitude grid and collects every
/// intermediate grid.
pub fn estimate_grids(model: &NkfModel, noisy_amp: &Grid) -> Result<EstimateGrids> {
    let fg = build_forward(model, &[noisy_amp], None, false)?;
    let amp_lstm = fg.utterance(fg.amp_lstm, 0);
    let amp_wiener = fg.utterance(fg.amp_wiener, 0);
    let gain = fg.utterance(fg.gain, 0);
    // re-evaluate the blend with the interval-preserving scalar form
    let mut amp_out = Grid::zeros(amp_lstm.rows(), amp_lstm.cols());
    for i in 0..amp_out.len() {
        amp_out.as_mut_slice()[i] = nkf_combine(
            gain.as_slice()[i],
            amp_wiener.as_slice()[i],
            amp_lstm.as_slice()[i],
        );
    }
    Ok(EstimateGrids {
        sigma_r2: fg.utterance(fg.sigma_r2, 0),
        sigma_v2: fg.utterance(fg.sigma_v2, 0),
        amp_lstm,
        amp_wiener,
        gain,
        amp_out,
    })
}

/// Enhancement of an analysed utterance: estimates, then resynthesis with
/// the noisy phase into `out_len` samples.
pub fn nkf_forward(
    model: &NkfModel,
    noisy: &Spectrogram,
    out_len: usize,
) -> Result<EnhancementResult> {
    let grids = estimate_grids(model, noisy.amplitude())?;
    let waveform = resynthesize(&grids.amp_out, noisy, out_len)?;
    Ok(EnhancementResult { waveform, grids })
}

pub fn enhance(model: &NkfModel, noisy: &Waveform) -> Result<EnhancementResult> {
    let spec = stft(noisy, model.config.window, model.config.hop)?;
    nkf_forward(model, &spec, noisy.len())
}
