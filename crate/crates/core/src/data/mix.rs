//! SNR-controlled mixing and oracle noise statistics.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::signal::{stft, Waveform};
use crate::wiener::track_sigma_y;

/// `10 log10(P_speech / P_noise)` over the full signals.
pub fn measure_snr(speech: &Waveform, noise: &Waveform) -> f64 {
    10.0 * (speech.power() / noise.power()).log10()
}

/// Mixes `speech` with a random `speech.len()`-sample cut of `noise`, scaled
/// so the full-utterance SNR equals `snr_db`. Returns `(noisy, scaled_noise)`.
pub fn mix_at_snr(
    speech: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    rng: &mut impl Rng,
) -> Result<(Waveform, Waveform)> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument("SNR must be finite".into()));
    }
    if noise.len() < speech.len() {
        return Err(Error::InvalidArgument(format!(
            "noise ({} samples) shorter than speech ({})",
            noise.len(),
            speech.len()
        )));
    }
    if speech.sample_rate() != noise.sample_rate() {
        return Err(Error::InvalidArgument("sample rates differ".into()));
    }
    let start = rng.random_range(0..=noise.len() - speech.len());
    let cut = Waveform::new(
        noise.samples()[start..start + speech.len()].to_vec(),
        noise.sample_rate(),
    )?;
    let (ps, pn) = (speech.power(), cut.power());
    if !(ps > 0.0) {
        return Err(Error::SilentSignal("speech"));
    }
    if !(pn > 0.0) {
        return Err(Error::SilentSignal("noise"));
    }
    let scale = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = cut.samples().iter().map(|v| v * scale).collect();
    let noisy = speech
        .samples()
        .iter()
        .zip(&scaled)
        .map(|(s, v)| s + v)
        .collect();
    Ok((
        Waveform::new(noisy, speech.sample_rate())?,
        Waveform::new(scaled, speech.sample_rate())?,
    ))
}

/// Causal mean of `|V|^2` over `span` frames, framed like the pipeline.
pub fn oracle_noise_variance(
    scaled_noise: &Waveform,
    window: usize,
    hop: usize,
    span: usize,
) -> Result<Grid> {
    let spec = stft(scaled_noise, window, hop)?;
    Ok(track_sigma_y(spec.amplitude(), span))
}
