//! Modulation-domain Kalman filter.
//!
//! Each frequency bin's amplitude track is filtered independently with a
//! companion-form LP state model: predict `x = A x`, `R = A R A' + u s_w u'`;
//! gain `g = R u / (s_v + u' R u)`; update `x += g (y - u'x)`,
//! `R = (I - g u') R`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lp::{segment_models, transition_matrix, LpModel, TransitionMatrix};
use crate::result::{EnhancementResult, EstimateGrids};
use crate::signal::{resynthesize, stft, Waveform};
use crate::wiener::{apply_wiener, track_sigma_y, VarianceTracks};

/// Floor on the LP residual variance used by the baseline pipeline, so the
/// gain stays defined when the noise variance is zero on a silent segment.
pub const RESIDUAL_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct KfState {
    pub x: DVector<f64>,
    pub ree: DMatrix<f64>,
    pub trans: TransitionMatrix,
    pub sigma_w2: f64,
}

impl KfState {
    /// Estimated clean amplitude of the current frame, clamped at zero.
    pub fn amplitude(&self) -> f64 {
        self.x[0].max(0.0)
    }

    fn symmetrize(&mut self) {
        let t = self.ree.transpose();
        self.ree = (&self.ree + t) * 0.5;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KfGain {
    pub g: DVector<f64>,
}

pub fn kf_predict(s: &KfState) -> KfState {
    let a = &s.trans.a;
    let u = &s.trans.u;
    let mut next = KfState {
        x: a * &s.x,
        ree: a * &s.ree * a.transpose() + u * u.transpose() * s.sigma_w2,
        trans: s.trans.clone(),
        sigma_w2: s.sigma_w2,
    };
    next.symmetrize();
    next
}

pub fn kf_gain(s_pred: &KfState, sigma_v2: f64) -> Result<KfGain> {
    if !(sigma_v2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be >= 0, got {sigma_v2}"
        )));
    }
    let ru = &s_pred.ree * &s_pred.trans.u;
    let denom = sigma_v2 + s_pred.trans.u.dot(&ru);
    if !(denom > 0.0) {
        return Err(Error::DegenerateGain);
    }
    Ok(KfGain { g: ru / denom })
}

pub fn kf_update(s_pred: &KfState, g: &KfGain, y_amp: f64) -> KfState {
    let u = &s_pred.trans.u;
    // (I - g u') x + g y, kept in this form so a unit gain reproduces y exactly
    let prior = u.dot(&s_pred.x);
    let mut next = KfState {
        x: &s_pred.x - &g.g * prior + &g.g * y_amp,
        ree: &s_pred.ree - &g.g * (u.transpose() * &s_pred.ree),
        trans: s_pred.trans.clone(),
        sigma_w2: s_pred.sigma_w2,
    };
    next.symmetrize();
    next
}

/// Per-frame trace of one bin's recursion.
#[derive(Clone, Debug, Default)]
pub struct KfTrace {
    pub estimate: Vec<f64>,
    pub prior: Vec<f64>,
    pub prior_var: Vec<f64>,
    pub gain: Vec<f64>,
}

/// Runs the filter over a whole track with a single LP model.
pub fn run_kf(noisy_amp: &[f64], lp: &LpModel, sigma_v2: &[f64]) -> Result<Vec<f64>> {
    let seg = noisy_amp.len().max(1);
    Ok(run_kf_segmented(noisy_amp, std::slice::from_ref(lp), seg, sigma_v2)?.estimate)
}

/// Runs the filter with LP model `models[t / segment_len]` at frame `t`
/// (the last model covers any remainder). State carries across segments.
///
/// The state is seeded with the first `P` noisy amplitudes and covariance
/// `sigma_v2[0] * I`; those frames pass through unchanged.
pub fn run_kf_segmented(
    noisy_amp: &[f64],
    models: &[LpModel],
    segment_len: usize,
    sigma_v2: &[f64],
) -> Result<KfTrace> {
    let frames = noisy_amp.len();
    if sigma_v2.len() != frames {
        return Err(Error::shape("run_kf", (frames, 1), (sigma_v2.len(), 1)));
    }
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one LP model required".into()))?;
    let p = first.order();
    if models.iter().any(|m| m.order() != p) {
        return Err(Error::InvalidArgument(
            "LP models must share one order".into(),
        ));
    }
    if segment_len == 0 {
        return Err(Error::InvalidArgument("segment length must be >= 1".into()));
    }
    if noisy_amp.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument("observations must be finite".into()));
    }

    let mut trace = KfTrace {
        estimate: noisy_amp.to_vec(),
        prior: noisy_amp.to_vec(),
        prior_var: vec![0.0; frames],
        gain: vec![1.0; frames],
    };
    if frames <= p {
        return Ok(trace);
    }

    let trans: Vec<TransitionMatrix> = models.iter().map(transition_matrix).collect();
    let model_at = |t: usize| (t / segment_len).min(models.len() - 1);

    let seed: Vec<f64> = (0..p).map(|i| noisy_amp[p - 1 - i]).collect();
    let mut state = KfState {
        x: DVector::from_vec(seed),
        ree: DMatrix::identity(p, p) * sigma_v2[0],
        trans: trans[model_at(p)].clone(),
        sigma_w2: models[model_at(p)].residual_var(),
    };
    for t in p..frames {
        let m = model_at(t);
        state.trans = trans[m].clone();
        state.sigma_w2 = models[m].residual_var();
        let pred = kf_predict(&state);
        let g = kf_gain(&pred, sigma_v2[t])?;
        trace.prior[t] = pred.x[0];
        trace.prior_var[t] = pred.ree[(0, 0)];
        trace.gain[t] = g.g[0];
        state = kf_update(&pred, &g, noisy_amp[t]);
        trace.estimate[t] = state.amplitude();
    }
    Ok(trace)
}

#[derive(Clone, Debug)]
pub struct KfConfig {
    pub window: usize,
    pub hop: usize,
    pub lp_order: usize,
    pub lp_segment: usize,
    pub variance_span: usize,
}

impl Default for KfConfig {
    fn default() -> Self {
        Self {
            window: crate::signal::DEFAULT_WINDOW,
            hop: crate::signal::DEFAULT_HOP,
            lp_order: 2,
            lp_segment: 32,
            variance_span: crate::wiener::DEFAULT_VARIANCE_SPAN,
        }
    }
}

/// Wiener filter, per-segment LP analysis of the Wiener output, Kalman
/// filtering of the noisy amplitudes, resynthesis with the noisy phase.
///
/// `sigma_v2` is the noise variance grid (oracle or estimated), shaped like
/// the noisy spectrogram.
pub fn enhance_kf_baseline(
    noisy: &Waveform,
    sigma_v2: &Grid,
    cfg: &KfConfig,
) -> Result<EnhancementResult> {
    if !(1..=8).contains(&cfg.lp_order) {
        return Err(Error::InvalidArgument(format!(
            "LP order must be in 1..=8, got {}",
            cfg.lp_order
        )));
    }
    let spec = stft(noisy, cfg.window, cfg.hop)?;
    let amp = spec.amplitude();
    let tracks = VarianceTracks::new(track_sigma_y(amp, cfg.variance_span), sigma_v2.clone())?;
    let wiener = apply_wiener(amp, &tracks)?;

    let bins = amp.cols();
    let traces: Vec<KfTrace> = (0..bins)
        .into_par_iter()
        .map(|f| {
            let models: Vec<LpModel> =
                segment_models(&wiener.column(f), cfg.lp_order, cfg.lp_segment)?
                    .into_iter()
                    .map(|m| {
                        let floored = m.residual_var().max(RESIDUAL_VARIANCE_FLOOR);
                        LpModel::new(m.coeffs().to_vec(), floored)
                    })
                    .collect::<Result<_>>()?;
            run_kf_segmented(&amp.column(f), &models, cfg.lp_segment, &sigma_v2.column(f))
        })
        .collect::<Result<_>>()?;

    let (frames, _) = amp.shape();
    let mut grids = EstimateGrids {
        amp_lstm: Grid::zeros(frames, bins),
        amp_wiener: wiener,
        sigma_r2: Grid::zeros(frames, bins),
        sigma_v2: sigma_v2.clone(),
        gain: Grid::zeros(frames, bins),
        amp_out: Grid::zeros(frames, bins),
    };
    for (f, tr) in traces.iter().enumerate() {
        grids.amp_lstm.set_column(f, &tr.prior);
        grids.sigma_r2.set_column(f, &tr.prior_var);
        grids.gain.set_column(f, &tr.gain);
        grids.amp_out.set_column(f, &tr.estimate);
    }
    let waveform = resynthesize(&grids.amp_out, &spec, noisy.len())?;
    Ok(EnhancementResult { waveform, grids })
}
