//! Instantaneous Wiener filtering of amplitude grids.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Variance floor applied to the noisy variance before division.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Default length of the causal window used for the noisy variance.
pub const DEFAULT_VARIANCE_SPAN: usize = 20;

/// Noisy and noise variance grids feeding the Wiener gain.
#[derive(Clone, Debug)]
pub struct VarianceTracks {
    sigma_y2: Grid,
    sigma_v2: Grid,
}

impl VarianceTracks {
    pub fn new(sigma_y2: Grid, sigma_v2: Grid) -> Result<Self> {
        sigma_y2.ensure_same_shape(&sigma_v2, "variance tracks")?;
        for (name, g) in [("sigma_y2", &sigma_y2), ("sigma_v2", &sigma_v2)] {
            if g.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and nonnegative"
                )));
            }
        }
        Ok(Self { sigma_y2, sigma_v2 })
    }

    pub fn sigma_y2(&self) -> &Grid {
        &self.sigma_y2
    }

    pub fn sigma_v2(&self) -> &Grid {
        &self.sigma_v2
    }
}

/// Causal moving average of a power grid along time.
///
/// Row `t` averages rows `max(0, t - span + 1) ..= t`.
pub fn causal_mean(power: &Grid, span: usize) -> Grid {
    let span = span.max(1);
    let (frames, bins) = power.shape();
    let mut out = Grid::zeros(frames, bins);
    let mut acc = vec![0.0; bins];
    for t in 0..frames {
        for (a, p) in acc.iter_mut().zip(power.row(t)) {
            *a += p;
        }
        if t >= span {
            for (a, p) in acc.iter_mut().zip(power.row(t - span)) {
                *a -= p;
            }
        }
        let n = (t + 1).min(span) as f64;
        for (o, a) in out.row_mut(t).iter_mut().zip(&acc) {
            // running sums can drift slightly negative after subtraction
            *o = (a / n).max(0.0);
        }
    }
    out
}

/// Running noisy variance: mean of `|Y|^2` over the last `span` frames,
/// including the current one.
pub fn track_sigma_y(amplitude: &Grid, span: usize) -> Grid {
    causal_mean(&amplitude.map(|a| a * a), span)
}

/// `clamp(1 - sigma_v2 / max(sigma_y2, floor), 0, 1)`.
#[inline]
pub fn wiener_gain(sigma_v2: f64, sigma_y2: f64) -> f64 {
    (1.0 - sigma_v2 / sigma_y2.max(VARIANCE_FLOOR)).clamp(0.0, 1.0)
}

pub fn apply_wiener(amplitude: &Grid, v: &VarianceTracks) -> Result<Grid> {
    amplitude.ensure_same_shape(v.sigma_y2(), "apply_wiener")?;
    let gains = v.sigma_v2().zip_map(v.sigma_y2(), wiener_gain)?;
    amplitude.zip_map(&gains, |a, h| a * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_track() {
        let s = track_sigma_y(&Grid::filled(30, 3, 2.0), 20);
        assert!(s.as_slice().iter().all(|&v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn first_frame_uses_itself() {
        let a = Grid::from_fn(5, 2, |t, f| (t + f + 1) as f64);
        let s = track_sigma_y(&a, 20);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 4.0);
    }

    #[test]
    fn matches_brute_force_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Grid::from_fn(25, 4, |_, _| rng.random::<f64>() * 3.0);
        let s = track_sigma_y(&a, 20);
        for f in 0..4 {
            let direct: f64 = (5..25).map(|t| a.get(t, f).powi(2)).sum::<f64>() / 20.0;
            assert!((s.get(24, f) - direct).abs() < 1e-12);
            let early: f64 = (0..4).map(|t| a.get(t, f).powi(2)).sum::<f64>() / 4.0;
            assert!((s.get(3, f) - early).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_points() {
        assert_eq!(wiener_gain(0.0, 2.0), 1.0);
        assert_eq!(wiener_gain(2.0, 2.0), 0.0);
        assert_eq!(wiener_gain(1.0, 4.0), 0.75);
        assert_eq!(wiener_gain(5.0, 0.0), 0.0);
        assert_eq!(wiener_gain(0.0, 0.0), 1.0);
    }

    #[test]
    fn apply_limits_and_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let amp = Grid::from_fn(10, 5, |_, _| rng.random::<f64>() * 2.0);
        let sy = track_sigma_y(&amp, 20);

        let zero = VarianceTracks::new(sy.clone(), Grid::zeros(10, 5)).unwrap();
        assert_eq!(apply_wiener(&amp, &zero).unwrap(), amp);

        let loud = VarianceTracks::new(sy.clone(), sy.map(|v| v * 1.5)).unwrap();
        assert!(apply_wiener(&amp, &loud)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));

        let sv = Grid::from_fn(10, 5, |_, _| rng.random::<f64>());
        let v = VarianceTracks::new(sy.clone(), sv.clone()).unwrap();
        let out = apply_wiener(&amp, &v).unwrap();
        for t in 0..10 {
            for f in 0..5 {
                let want = wiener_gain(sv.get(t, f), sy.get(t, f)) * amp.get(t, f);
                assert_eq!(out.get(t, f), want);
                assert!(out.get(t, f) <= amp.get(t, f));
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let v = VarianceTracks::new(Grid::zeros(3, 2), Grid::zeros(3, 2)).unwrap();
        assert!(apply_wiener(&Grid::zeros(2, 2), &v).is_err());
        assert!(VarianceTracks::new(Grid::zeros(3, 2), Grid::zeros(2, 2)).is_err());
        assert!(VarianceTracks::new(Grid::zeros(1, 1), Grid::filled(1, 1, -1.0)).is_err());
    }
}
