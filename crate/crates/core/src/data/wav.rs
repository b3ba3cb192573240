//! Mono WAV files, 16-bit PCM or 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};
use crate::signal::{Waveform, DEFAULT_SAMPLE_RATE};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn map_err(path: &Path, e: hound::Error) -> Error {
    let path = path.to_path_buf();
    match e {
        hound::Error::IoError(io)
            if matches!(
                io.kind(),
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied
            ) =>
        {
            Error::Io(io)
        }
        // hound reports short reads as plain I/O errors
        hound::Error::IoError(io) => Error::MalformedHeader {
            path,
            reason: io.to_string(),
        },
        hound::Error::FormatError(reason) => Error::MalformedHeader {
            path,
            reason: reason.into(),
        },
        hound::Error::TooWide | hound::Error::Unsupported | hound::Error::InvalidSampleFormat => {
            Error::UnsupportedEncoding {
                path,
                reason: e.to_string(),
            }
        }
        other => Error::MalformedHeader {
            path,
            reason: other.to_string(),
        },
    }
}

/// Reads a 16 kHz mono file; samples are scaled to [-1, 1].
pub fn read_wav(path: &Path) -> Result<Waveform> {
    read_wav_at(path, DEFAULT_SAMPLE_RATE)
}

pub fn read_wav_at(path: &Path, expected_rate: u32) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(|e| map_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            reason: format!("{} channels, expected mono", spec.channels),
        });
    }
    if spec.sample_rate != expected_rate {
        return Err(Error::UnsupportedSampleRate {
            path: path.to_path_buf(),
            rate: spec.sample_rate,
            expected: expected_rate,
        });
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.to_path_buf(),
                reason: format!("{fmt:?} {bits}-bit"),
            })
        }
    }
    .map_err(|e| map_err(path, e))?;
    Waveform::new(samples, spec.sample_rate)
}

/// Writes `w` as mono WAV. PCM samples are clipped to the 16-bit range.
pub fn write_wav(w: &Waveform, path: &Path, encoding: WavEncoding) -> Result<()> {
    let (bits, fmt) = match encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: bits,
        sample_format: fmt,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_err(path, e))?;
    for &s in w.samples() {
        let r = match encoding {
            WavEncoding::Pcm16 => {
                writer.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
            }
            WavEncoding::Float32 => writer.write_sample(s as f32),
        };
        r.map_err(|e| map_err(path, e))?;
    }
    writer.finalize().map_err(|e| map_err(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_wave(n: usize) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        Waveform::new(
            (0..n).map(|_| rng.random_range(-0.9..0.9)).collect(),
            16_000,
        )
        .unwrap()
    }

    #[test]
    fn pcm16_quantization_bound() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let w = random_wave(5000);
        write_wav(&w, &p, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.len(), w.len());
        let err = w
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2f64.powi(-15));
    }

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let w = random_wave(300);
        write_wav(&w, &p, WavEncoding::Float32).unwrap();
        let back = read_wav(&p).unwrap();
        for (a, b) in w.samples().iter().zip(back.samples()) {
            assert_eq!(*b, *a as f32 as f64);
        }
    }

    #[test]
    fn truncated_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        write_wav(&random_wave(1000), &p, WavEncoding::Pcm16).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        for cut in [20, 40, 500] {
            std::fs::write(&p, &bytes[..cut]).unwrap();
            let err = read_wav(&p).unwrap_err();
            assert!(err.to_string().contains("malformed header"), "{cut}: {err}");
        }
    }

    #[test]
    fn wrong_rate_and_channels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        let w = Waveform::new(vec![0.0; 100], 8000).unwrap();
        write_wav(&w, &p, WavEncoding::Pcm16).unwrap();
        let err = read_wav(&p).unwrap_err();
        assert!(err.to_string().contains("unsupported sample rate"));

        let spec = WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut wr = hound::WavWriter::create(&p, spec).unwrap();
        for _ in 0..10 {
            wr.write_sample(0i16).unwrap();
        }
        wr.finalize().unwrap();
        assert!(matches!(
            read_wav(&p),
            Err(Error::UnsupportedEncoding { .. })
        ));

        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut wr = hound::WavWriter::create(&p, spec).unwrap();
        wr.write_sample(0i32).unwrap();
        wr.finalize().unwrap();
        assert!(matches!(
            read_wav(&p),
            Err(Error::UnsupportedEncoding { .. })
        ));
    }
}
