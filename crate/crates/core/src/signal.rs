//! Waveforms, STFT analysis and weighted overlap-add synthesis.
//!
//! Frames are taken without centering or padding: frame `t` covers samples
//! `t * hop .. t * hop + window_len`. The analysis window is a periodic Hann
//! window; synthesis applies the same window again and divides by the summed
//! squared-window envelope, which is constant (1.5) in the fully overlapped
//! interior when `hop = window_len / 4`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_WINDOW: usize = 256;
pub const DEFAULT_HOP: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power over the whole waveform.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of frames produced by [`stft`] for a signal of `len` samples.
pub fn frame_count(len: usize, window_len: usize, hop: usize) -> usize {
    if len < window_len {
        0
    } else {
        1 + (len - window_len) / hop
    }
}

#[derive(Clone, Debug)]
pub struct Spectrogram {
    frames: Vec<Complex64>,
    amplitude: Grid,
    phase: Grid,
    window_len: usize,
    hop: usize,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.amplitude.rows()
    }

    pub fn num_bins(&self) -> usize {
        self.amplitude.cols()
    }

    /// Complex bin value of frame `t`, bin `f`.
    pub fn frame_value(&self, t: usize, f: usize) -> Complex64 {
        self.frames[t * self.num_bins() + f]
    }

    /// Complex values of frame `t`.
    pub fn frame(&self, t: usize) -> &[Complex64] {
        let f = self.num_bins();
        &self.frames[t * f..(t + 1) * f]
    }

    pub fn amplitude(&self) -> &Grid {
        &self.amplitude
    }

    pub fn phase(&self) -> &Grid {
        &self.phase
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn from_frames(
        frames: Vec<Complex64>,
        num_frames: usize,
        window_len: usize,
        hop: usize,
        sample_rate: u32,
    ) -> Self {
        let bins = window_len / 2 + 1;
        let mut amplitude = Grid::zeros(num_frames, bins);
        let mut phase = Grid::zeros(num_frames, bins);
        for (i, z) in frames.iter().enumerate() {
            amplitude.as_mut_slice()[i] = z.norm();
            phase.as_mut_slice()[i] = wrap_phase(z.arg());
        }
        Self {
            frames,
            amplitude,
            phase,
            window_len,
            hop,
            sample_rate,
        }
    }
}

// atan2 can return exactly -pi; fold it onto +pi so phase lies in (-pi, pi].
fn wrap_phase(p: f64) -> f64 {
    if p <= -PI {
        PI
    } else {
        p
    }
}

fn check_framing(window_len: usize, hop: usize) -> Result<()> {
    if window_len < 2 || !window_len.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "window length must be even and >= 2, got {window_len}"
        )));
    }
    if hop == 0 || hop > window_len {
        return Err(Error::InvalidArgument(format!(
            "hop must be in 1..={window_len}, got {hop}"
        )));
    }
    Ok(())
}

pub fn stft(w: &Waveform, window_len: usize, hop: usize) -> Result<Spectrogram> {
    check_framing(window_len, hop)?;
    if w.len() < window_len {
        return Err(Error::UtteranceTooShort {
            len: w.len(),
            window: window_len,
        });
    }
    let num_frames = frame_count(w.len(), window_len, hop);
    let bins = window_len / 2 + 1;
    let window = hann(window_len);
    let fft = FftPlanner::new().plan_fft_forward(window_len);

    let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
    let mut frames = Vec::with_capacity(num_frames * bins);
    for t in 0..num_frames {
        let seg = &w.samples()[t * hop..t * hop + window_len];
        for ((b, &s), &win) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new(s * win, 0.0);
        }
        fft.process(&mut buf);
        frames.extend_from_slice(&buf[..bins]);
    }
    Ok(Spectrogram::from_frames(
        frames,
        num_frames,
        window_len,
        hop,
        w.sample_rate(),
    ))
}

/// Weighted overlap-add resynthesis into `out_len` samples.
///
/// `out_len` must be a length whose framing yields exactly the spectrogram's
/// frame count; trailing samples past the last frame are zero.
pub fn istft(s: &Spectrogram, out_len: usize) -> Result<Waveform> {
    let (n, hop) = (s.window_len, s.hop);
    let frames = s.num_frames();
    if frame_count(out_len, n, hop) != frames {
        return Err(Error::InvalidArgument(format!(
            "output length {out_len} does not frame to {frames} frames (window {n}, hop {hop})"
        )));
    }
    let window = hann(n);
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let bins = s.num_bins();

    let mut out = vec![0.0; out_len];
    let mut envelope = vec![0.0; out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..frames {
        let frame = s.frame(t);
        buf[..bins].copy_from_slice(frame);
        for k in 1..n - bins + 1 {
            buf[n - k] = frame[k].conj();
        }
        // DC and Nyquist of a real signal are real.
        buf[0].im = 0.0;
        buf[bins - 1].im = 0.0;
        ifft.process(&mut buf);
        let start = t * hop;
        for i in 0..n {
            out[start + i] += buf[i].re / n as f64 * window[i];
            envelope[start + i] += window[i] * window[i];
        }
    }
    let floor = 1e-8 * envelope.iter().cloned().fold(0.0, f64::max);
    for (o, e) in out.iter_mut().zip(&envelope) {
        if *e > floor {
            *o /= e;
        } else {
            *o = 0.0;
        }
    }
    Waveform::new(out, s.sample_rate)
}

/// Builds complex frames `amplitude * exp(i * phase)`.
pub fn recombine(
    amplitude: &Grid,
    phase: &Grid,
    window_len: usize,
    hop: usize,
    sample_rate: u32,
) -> Result<Spectrogram> {
    check_framing(window_len, hop)?;
    amplitude.ensure_same_shape(phase, "recombine")?;
    if amplitude.cols() != window_len / 2 + 1 {
        return Err(Error::shape(
            "recombine",
            (amplitude.rows(), window_len / 2 + 1),
            amplitude.shape(),
        ));
    }
    if let Some(a) = amplitude.as_slice().iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be nonnegative, found {a}"
        )));
    }
    let frames = amplitude
        .as_slice()
        .iter()
        .zip(phase.as_slice())
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    Ok(Spectrogram::from_frames(
        frames,
        amplitude.rows(),
        window_len,
        hop,
        sample_rate,
    ))
}

/// Resynthesizes `amplitude` with the phase of `noisy`, producing a waveform
/// of `out_len` samples.
pub fn resynthesize(amplitude: &Grid, noisy: &Spectrogram, out_len: usize) -> Result<Waveform> {
    let spec = recombine(
        amplitude,
        noisy.phase(),
        noisy.window_len(),
        noisy.hop(),
        noisy.sample_rate(),
    )?;
    istft(&spec, out_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, len: usize) -> Waveform {
        let s = (0..len)
            .map(|n| (2.0 * PI * freq * n as f64 / 16_000.0).sin())
            .collect();
        Waveform::new(s, 16_000).unwrap()
    }

    #[test]
    fn zero_input_frames() {
        let w = Waveform::new(vec![0.0; 1024], 16_000).unwrap();
        let s = stft(&w, 256, 64).unwrap();
        assert_eq!(s.num_frames(), 13);
        assert_eq!(s.num_bins(), 129);
        assert!(s.amplitude().as_slice().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn too_short() {
        let w = Waveform::new(vec![0.0; 255], 16_000).unwrap();
        let err = stft(&w, 256, 64).unwrap_err();
        assert!(err.to_string().contains("utterance too short"));
    }

    #[test]
    fn rejects_bad_framing() {
        let w = Waveform::new(vec![0.0; 1024], 16_000).unwrap();
        assert!(stft(&w, 255, 64).is_err());
        assert!(stft(&w, 256, 0).is_err());
        assert!(stft(&w, 256, 257).is_err());
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let s = stft(&sine(1000.0, 4096), 256, 64).unwrap();
        for t in 0..s.num_frames() {
            let row = s.amplitude().row(t);
            let peak = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .unwrap();
            assert_eq!(peak, 16);
        }
    }

    #[test]
    fn matches_direct_dft_on_one_frame() {
        let w = sine(1000.0, 1024);
        let s = stft(&w, 256, 64).unwrap();
        let win = hann(256);
        let t = 3;
        let seg = &w.samples()[t * 64..t * 64 + 256];
        for k in 0..129 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, (&x, &h)) in seg.iter().zip(&win).enumerate() {
                let ang = -2.0 * PI * (k * n) as f64 / 256.0;
                acc += Complex64::from_polar(x * h, ang);
            }
            assert!((acc - s.frame_value(t, k)).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_spectrogram_gives_silence() {
        let amp = Grid::zeros(13, 129);
        let spec = recombine(&amp, &amp, 256, 64, 16_000).unwrap();
        let w = istft(&spec, 1024).unwrap();
        assert!(w.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn istft_rejects_inconsistent_length() {
        let w = sine(440.0, 1024);
        let s = stft(&w, 256, 64).unwrap();
        assert!(istft(&s, 1024 + 64).is_err());
        assert!(istft(&s, 1023).is_err());
        assert!(istft(&s, 1024 + 63).is_ok());
    }

    #[test]
    fn recombine_points() {
        let amp = Grid::from_vec(1, 3, vec![1.0, 2.0, 0.0]).unwrap();
        let ph = Grid::from_vec(1, 3, vec![0.0, PI / 2.0, 0.0]).unwrap();
        let s = recombine(&amp, &ph, 4, 1, 16_000).unwrap();
        assert_eq!(s.frame_value(0, 0), Complex64::new(1.0, 0.0));
        let z = s.frame_value(0, 1);
        assert!(z.re.abs() < 1e-12 && (z.im - 2.0).abs() < 1e-12);
    }

    #[test]
    fn recombine_rejects_mismatch() {
        let a = Grid::zeros(2, 3);
        let p = Grid::zeros(3, 3);
        assert!(recombine(&a, &p, 4, 1, 16_000).is_err());
        let neg = Grid::filled(2, 3, -1.0);
        assert!(recombine(&neg, &a, 4, 1, 16_000).is_err());
    }

    #[test]
    fn phase_in_half_open_interval() {
        let w = Waveform::new(
            (0..2048).map(|n| ((n * 7919) % 13) as f64 - 6.0).collect(),
            16_000,
        )
        .unwrap();
        let s = stft(&w, 256, 64).unwrap();
        assert!(s.phase().as_slice().iter().all(|&p| p > -PI && p <= PI));
    }
}
