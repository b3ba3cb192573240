//! Speech-like and noise test signals.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Target RMS of generated speech before the per-utterance level jitter.
pub const SPEECH_RMS: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
    /// Band-pass filtered white noise under a slow sinusoidal envelope.
    ModulatedBand,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::ModulatedBand];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::ModulatedBand => "amband",
        }
    }
}

fn rescale(x: &mut [f64], rms: f64) {
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if cur > 0.0 {
        let k = rms / cur;
        x.iter_mut().for_each(|v| *v *= k);
    }
}

/// Harmonic complexes under formant envelopes, grouped into syllables with
/// gliding pitch, separated by pauses and occasional fricative bursts.
pub fn speech_like(rng: &mut impl Rng, len: usize, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let nyq_guard = (sr * 0.4).min(6000.0);
    let mut out = vec![0.0; len];
    let base_f0: f64 = rng.random_range(90.0..220.0);
    let mut pos = (rng.random_range(0.02..0.15) * sr) as usize;
    while pos < len {
        let dur = (rng.random_range(0.12..0.35) * sr) as usize;
        let end = (pos + dur).min(len);
        let f0a = base_f0 * rng.random_range(0.85..1.2);
        let f0b = base_f0 * rng.random_range(0.8..1.15);
        let formants = [
            (rng.random_range(300.0..850.0), 80.0, 1.0),
            (rng.random_range(900.0..2300.0), 120.0, 0.6),
            (rng.random_range(2400.0..3200.0), 180.0, 0.3),
        ];
        let vib_rate = rng.random_range(4.0..6.5);
        let vib_depth = rng.random_range(0.0..0.02);
        let gain = rng.random_range(0.5..1.0);
        let harmonics = ((nyq_guard / f0a.max(f0b)) as usize).clamp(1, 40);
        let weights: Vec<f64> = (1..=harmonics)
            .map(|k| {
                let f = k as f64 * 0.5 * (f0a + f0b);
                let env: f64 = formants
                    .iter()
                    .map(|&(c, bw, g)| g * (-0.5 * ((f - c) / bw).powi(2)).exp())
                    .sum();
                (env + 0.02) / (k as f64).sqrt()
            })
            .collect();
        let offsets: Vec<f64> = (0..harmonics)
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let n = end - pos;
        let mut phase = 0.0;
        for i in 0..n {
            let tau = i as f64 / n as f64;
            let t = i as f64 / sr;
            let f0 =
                (f0a + (f0b - f0a) * tau) * (1.0 + vib_depth * (2.0 * PI * vib_rate * t).sin());
            phase += 2.0 * PI * f0 / sr;
            let env = (PI * tau).sin().powf(0.6);
            let mut s = 0.0;
            for (k, (w, o)) in weights.iter().zip(&offsets).enumerate() {
                s += w * ((k + 1) as f64 * phase + o).sin();
            }
            out[pos + i] += gain * env * s;
        }
        pos = end;
        if pos < len && rng.random_bool(0.3) {
            let fric = ((rng.random_range(0.04..0.1) * sr) as usize).min(len - pos);
            let level = rng.random_range(0.05..0.2);
            let mut prev: f64 = 0.0;
            for i in 0..fric {
                let w: f64 = StandardNormal.sample(rng);
                let env = (PI * i as f64 / fric as f64).sin();
                out[pos + i] += level * env * (w - prev);
                prev = w;
            }
            pos += fric;
        }
        let pause = if rng.random_bool(0.1) {
            rng.random_range(0.3..0.6)
        } else {
            rng.random_range(0.04..0.25)
        };
        pos += (pause * sr) as usize;
    }
    let level_db: f64 = rng.random_range(-6.0..6.0);
    rescale(&mut out, SPEECH_RMS * 10f64.powf(level_db / 20.0));
    out
}

fn white(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Paul Kellet's refined pinking filter over white noise.
fn pink(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..len)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b[..6].iter().sum::<f64>() + b[6] + w * 0.5362;
            b[6] = w * 0.115926;
            out
        })
        .collect()
}

/// RBJ band-pass (0 dB peak) with a sinusoidal amplitude envelope.
fn modulated_band(rng: &mut impl Rng, len: usize, sr: f64) -> Vec<f64> {
    let fc = rng.random_range(300.0..3000.0);
    let q = rng.random_range(0.7..3.0);
    let fm = rng.random_range(0.5..4.0);
    let depth = rng.random_range(0.3..0.9);
    let phi = rng.random_range(0.0..2.0 * PI);
    let w0 = 2.0 * PI * fc / sr;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    (0..len)
        .map(|n| {
            let x: f64 = StandardNormal.sample(rng);
            let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            let t = n as f64 / sr;
            y * (1.0 + depth * (2.0 * PI * fm * t + phi).sin())
        })
        .collect()
}

/// Unit-RMS noise of the given kind.
pub fn noise(kind: NoiseKind, rng: &mut impl Rng, len: usize, sample_rate: u32) -> Vec<f64> {
    let mut x = match kind {
        NoiseKind::White => white(rng, len),
        NoiseKind::Pink => pink(rng, len),
        NoiseKind::ModulatedBand => modulated_band(rng, len, sample_rate as f64),
    };
    rescale(&mut x, 1.0);
    x
}
