//! Segmental SNR, frequency-weighted segmental SNR and amplitude MSE.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::signal::{stft, Waveform};

pub const SNR_FLOOR_DB: f64 = -10.0;
pub const SNR_CEIL_DB: f64 = 35.0;
/// Frames whose clean energy falls below this are skipped.
pub const SILENCE_ENERGY: f64 = 1e-10;
/// Exponent of the clean-magnitude band weights.
pub const FW_GAMMA: f64 = 0.2;

fn clamped_db(signal: f64, error: f64) -> f64 {
    if error <= 0.0 {
        return SNR_CEIL_DB;
    }
    if signal <= 0.0 {
        return SNR_FLOOR_DB;
    }
    (10.0 * (signal / error).log10()).clamp(SNR_FLOOR_DB, SNR_CEIL_DB)
}

fn check_lengths(clean: &Waveform, test: &Waveform) -> Result<()> {
    if clean.len() != test.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: clean {} vs test {}",
            clean.len(),
            test.len()
        )));
    }
    Ok(())
}

/// Time-domain segmental SNR over `frame`-sample segments every `hop`.
pub fn segsnr(clean: &Waveform, test: &Waveform, frame: usize, hop: usize) -> Result<f64> {
    check_lengths(clean, test)?;
    if frame == 0 || hop == 0 {
        return Err(Error::InvalidArgument(
            "frame and hop must be positive".into(),
        ));
    }
    let (c, t) = (clean.samples(), test.samples());
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start + frame <= c.len() {
        let seg = start..start + frame;
        let energy: f64 = c[seg.clone()].iter().map(|x| x * x).sum();
        if energy >= SILENCE_ENERGY {
            let err: f64 = c[seg.clone()]
                .iter()
                .zip(&t[seg])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sum += clamped_db(energy, err);
            count += 1;
        }
        start += hop;
    }
    if count == 0 {
        return Err(Error::AllFramesSilent);
    }
    Ok(sum / count as f64)
}

/// Frequency-weighted segmental SNR on STFT magnitudes.
///
/// Per frame: `sum_k W_k snr_k / sum_k W_k` with `W_k = |X_k|^0.2` and
/// `snr_k = clamp(10 log10(|X_k|^2 / (|X_k| - |Y_k|)^2), -10, 35)`, averaged
/// over frames with non-silent clean energy. Weights come from `clean` only.
pub fn fwsegsnr(clean: &Waveform, test: &Waveform, window: usize, hop: usize) -> Result<f64> {
    check_lengths(clean, test)?;
    let cs = stft(clean, window, hop)?;
    let ts = stft(test, window, hop)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..cs.num_frames() {
        let start = j * hop;
        let energy: f64 = clean.samples()[start..start + window]
            .iter()
            .map(|x| x * x)
            .sum();
        if energy < SILENCE_ENERGY {
            continue;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (&x, &y) in cs.amplitude().row(j).iter().zip(ts.amplitude().row(j)) {
            let w = x.powf(FW_GAMMA);
            if w == 0.0 {
                continue;
            }
            num += w * clamped_db(x * x, (x - y) * (x - y));
            den += w;
        }
        if den > 0.0 {
            sum += num / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::AllFramesSilent);
    }
    Ok(sum / count as f64)
}

/// Mean squared difference of STFT magnitudes.
pub fn amp_mse(clean: &Waveform, test: &Waveform, window: usize, hop: usize) -> Result<f64> {
    check_lengths(clean, test)?;
    let c = stft(clean, window, hop)?;
    let t = stft(test, window, hop)?;
    crate::nkf::nkf_loss(t.amplitude(), c.amplitude())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub fwsegsnr: f64,
    pub segsnr: f64,
    pub amp_mse: f64,
}

impl MetricReport {
    pub fn evaluate(clean: &Waveform, test: &Waveform, window: usize, hop: usize) -> Result<Self> {
        Ok(Self {
            fwsegsnr: fwsegsnr(clean, test, window, hop)?,
            segsnr: segsnr(clean, test, 256, 128)?,
            amp_mse: amp_mse(clean, test, window, hop)?,
        })
    }

    fn mean(items: &[MetricReport]) -> Self {
        let n = items.len().max(1) as f64;
        Self {
            fwsegsnr: items.iter().map(|m| m.fwsegsnr).sum::<f64>() / n,
            segsnr: items.iter().map(|m| m.segsnr).sum::<f64>() / n,
            amp_mse: items.iter().map(|m| m.amp_mse).sum::<f64>() / n,
        }
    }
}

/// One evaluated utterance: enhanced and unprocessed scores.
#[derive(Clone, Debug)]
pub struct EvalRow {
    pub id: String,
    pub snr_db: f64,
    pub enhanced: MetricReport,
    pub noisy: MetricReport,
}

/// Per-condition means keyed by SNR in hundredths of a dB.
pub fn per_condition(rows: &[EvalRow]) -> BTreeMap<i64, (MetricReport, MetricReport, usize)> {
    let mut groups: BTreeMap<i64, Vec<&EvalRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.snr_db * 100.0).round() as i64)
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|(k, g)| {
            let e: Vec<MetricReport> = g.iter().map(|r| r.enhanced).collect();
            let n: Vec<MetricReport> = g.iter().map(|r| r.noisy).collect();
            (k, (MetricReport::mean(&e), MetricReport::mean(&n), g.len()))
        })
        .collect()
}

/// Tab-separated report: a header, one row per utterance, then one
/// `mean` row per SNR condition.
pub fn write_report(out: &mut impl Write, rows: &[EvalRow]) -> Result<()> {
    writeln!(
        out,
        "id\tsnr_db\tfwsegsnr\tsegsnr\tamp_mse\tfwsegsnr_noisy\tsegsnr_noisy\tamp_mse_noisy"
    )?;
    let line = |out: &mut dyn Write, id: &str, snr: f64, e: &MetricReport, n: &MetricReport| {
        writeln!(
            out,
            "{id}\t{snr}\t{:.4}\t{:.4}\t{:.6e}\t{:.4}\t{:.4}\t{:.6e}",
            e.fwsegsnr, e.segsnr, e.amp_mse, n.fwsegsnr, n.segsnr, n.amp_mse
        )
    };
    for r in rows {
        line(out, &r.id, r.snr_db, &r.enhanced, &r.noisy)?;
    }
    for (k, (e, n, count)) in per_condition(rows) {
        line(out, &format!("mean(n={count})"), k as f64 / 100.0, &e, &n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn speechy(seed: u64, len: usize) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..len)
            .map(|n| {
                let t = n as f64 / 16_000.0;
                0.3 * (2.0 * std::f64::consts::PI * 220.0 * t).sin()
                    + 0.1 * (2.0 * std::f64::consts::PI * 1330.0 * t).sin()
                    + 0.01 * rng.random_range(-1.0..1.0)
            })
            .collect();
        Waveform::new(s, 16_000).unwrap()
    }

    #[test]
    fn identical_hits_ceiling() {
        let c = speechy(1, 8000);
        assert_eq!(segsnr(&c, &c, 256, 128).unwrap(), 35.0);
        assert_eq!(fwsegsnr(&c, &c, 256, 64).unwrap(), 35.0);
    }

    #[test]
    fn negated_is_minus_six_db() {
        // error = 2x signal, so every frame sits at 10 log10(1/4)
        let c = speechy(2, 8000);
        let neg = Waveform::new(c.samples().iter().map(|x| -x).collect(), 16_000).unwrap();
        let v = segsnr(&c, &neg, 256, 128).unwrap();
        assert!((v - 10.0 * 0.25f64.log10()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn zero_db_per_frame() {
        // add +-clean per sample so every frame's error energy equals its signal energy
        let c = speechy(3, 8000);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = c
            .samples()
            .iter()
            .map(|x| x + if rng.random::<bool>() { *x } else { -*x })
            .collect();
        let t = Waveform::new(t, 16_000).unwrap();
        assert!(segsnr(&c, &t, 256, 128).unwrap().abs() < 1e-9);
    }

    #[test]
    fn silence_and_lengths() {
        let z = Waveform::new(vec![0.0; 4000], 16_000).unwrap();
        assert!(matches!(
            segsnr(&z, &z, 256, 128),
            Err(Error::AllFramesSilent)
        ));
        assert!(matches!(
            fwsegsnr(&z, &z, 256, 64),
            Err(Error::AllFramesSilent)
        ));
        let c = speechy(5, 4000);
        let short = speechy(5, 3999);
        assert!(segsnr(&c, &short, 256, 128).is_err());
    }

    #[test]
    fn weights_follow_clean() {
        let c = speechy(6, 8000);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = Waveform::new(
            c.samples()
                .iter()
                .map(|x| 0.5 * x + 0.05 * rng.random_range(-1.0..1.0))
                .collect(),
            16_000,
        )
        .unwrap();
        let a = fwsegsnr(&c, &t, 256, 64).unwrap();
        let b = fwsegsnr(&t, &c, 256, 64).unwrap();
        assert!((a - b).abs() > 1e-3);
        for v in [a, b] {
            assert!((SNR_FLOOR_DB..=SNR_CEIL_DB).contains(&v));
        }
    }

    #[test]
    fn report_layout() {
        let m = MetricReport {
            fwsegsnr: 10.0,
            segsnr: 5.0,
            amp_mse: 0.1,
        };
        let rows = vec![
            EvalRow {
                id: "a".into(),
                snr_db: 5.0,
                enhanced: m,
                noisy: m,
            },
            EvalRow {
                id: "b".into(),
                snr_db: 5.0,
                enhanced: m,
                noisy: m,
            },
            EvalRow {
                id: "c".into(),
                snr_db: -5.0,
                enhanced: m,
                noisy: m,
            },
        ];
        let mut buf = Vec::new();
        write_report(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[4].starts_with("mean(n=1)\t-5"));
        assert!(lines[5].starts_with("mean(n=2)\t5"));
    }
}
