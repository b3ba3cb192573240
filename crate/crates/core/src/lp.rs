//! Autocorrelation-method linear prediction.
//!
//! Coefficients follow the "positive" convention used by the state model:
//! the prediction of `x(t)` is `sum_j a_j * x(t - j)`, so the coefficients
//! drop straight into the first row of the companion transition matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LpModel {
    coeffs: Vec<f64>,
    residual_var: f64,
}

impl LpModel {
    pub fn new(coeffs: Vec<f64>, residual_var: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("LP order must be >= 1".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "LP coefficients must be finite".into(),
            ));
        }
        if !(residual_var >= 0.0) || !residual_var.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "residual variance must be finite and >= 0, got {residual_var}"
            )));
        }
        Ok(Self {
            coeffs,
            residual_var,
        })
    }

    /// All-zero predictor of the given order.
    pub fn silent(order: usize, residual_var: f64) -> Result<Self> {
        Self::new(vec![0.0; order], residual_var)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn residual_var(&self) -> f64 {
        self.residual_var
    }

    /// One-step prediction from the most recent `order` values, newest first.
    pub fn predict(&self, history: &[f64]) -> f64 {
        self.coeffs.iter().zip(history).map(|(a, x)| a * x).sum()
    }
}

/// Companion-form state transition `x(t) = a * x(t-1) + u * w(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub a: DMatrix<f64>,
    pub u: DVector<f64>,
}

impl TransitionMatrix {
    pub fn order(&self) -> usize {
        self.u.len()
    }
}

/// Biased autocorrelation `r(k) = (1/N) sum_n x(n) x(n-k)` for `k = 0..=max_lag`.
pub fn autocorrelate(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() <= max_lag {
        return Err(Error::InvalidArgument(format!(
            "sequence of length {} too short for lag {max_lag}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    Ok((0..=max_lag)
        .map(|k| x[k..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect())
}

/// Levinson-Durbin recursion on the Toeplitz normal equations.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<LpModel> {
    if order == 0 {
        return Err(Error::InvalidArgument("LP order must be >= 1".into()));
    }
    if r.len() < order + 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} autocorrelation lags, got {}",
            order + 1,
            r.len()
        )));
    }
    if !(r[0] > 0.0) {
        return Err(Error::DegenerateAutocorrelation(r[0]));
    }

    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut err = r[0];
    for i in 0..order {
        // Perfectly predictable at lower order; higher coefficients stay zero.
        if err <= 0.0 {
            err = 0.0;
            break;
        }
        let acc = r[i + 1] - (0..i).map(|j| a[j] * r[i - j]).sum::<f64>();
        let k = acc / err;
        if !k.is_finite() {
            return Err(Error::NonFiniteReflection(i + 1));
        }
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
    }
    LpModel::new(a, err.max(0.0))
}

pub fn transition_matrix(m: &LpModel) -> TransitionMatrix {
    let p = m.order();
    let mut a = DMatrix::zeros(p, p);
    for (j, &c) in m.coeffs().iter().enumerate() {
        a[(0, j)] = c;
    }
    for i in 1..p {
        a[(i, i - 1)] = 1.0;
    }
    let mut u = DVector::zeros(p);
    u[0] = 1.0;
    TransitionMatrix { a, u }
}

/// Fits one LP model per non-overlapping segment of `segment_len` frames.
///
/// A trailing segment shorter than `order + 1` frames is merged into the
/// previous one. Segments whose autocorrelation is degenerate (digital
/// silence) get an all-zero predictor with zero residual variance.
pub fn segment_models(track: &[f64], order: usize, segment_len: usize) -> Result<Vec<LpModel>> {
    if segment_len == 0 {
        return Err(Error::InvalidArgument(
            "LP segment length must be >= 1".into(),
        ));
    }
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < track.len() {
        let end = (start + segment_len).min(track.len());
        bounds.push((start, end));
        start = end;
    }
    if bounds.len() > 1 {
        let (s, e) = bounds[bounds.len() - 1];
        if e - s < order + 1 {
            bounds.pop();
            bounds.last_mut().unwrap().1 = e;
        }
    }
    bounds
        .into_iter()
        .map(|(s, e)| {
            let seg = &track[s..e];
            if seg.len() <= order {
                return LpModel::silent(order, 0.0);
            }
            let r = autocorrelate(seg, order)?;
            match levinson_durbin(&r, order) {
                Ok(m) => Ok(m),
                Err(Error::DegenerateAutocorrelation(_)) => LpModel::silent(order, 0.0),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_hand_values() {
        assert_eq!(autocorrelate(&[1.0; 4], 1).unwrap(), vec![1.0, 0.75]);
        assert_eq!(autocorrelate(&[0.0; 8], 3).unwrap(), vec![0.0; 4]);
        assert!(autocorrelate(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn white_process() {
        let m = levinson_durbin(&[1.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(m.coeffs(), &[0.0, 0.0]);
        assert_eq!(m.residual_var(), 1.0);
    }

    #[test]
    fn ar1_analytic() {
        let r: Vec<f64> = (0..2).map(|k| 0.9f64.powi(k) / (1.0 - 0.81)).collect();
        let m = levinson_durbin(&r, 1).unwrap();
        assert!((m.coeffs()[0] - 0.9).abs() < 1e-12);
        assert!((m.residual_var() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let err = levinson_durbin(&[0.0, 0.0], 1).unwrap_err();
        assert!(err.to_string().contains("degenerate autocorrelation"));
        assert!(levinson_durbin(&[1.0], 1).is_err());
        assert!(levinson_durbin(&[1.0, f64::NAN], 1).is_err());
    }

    #[test]
    fn companion_form() {
        let m = LpModel::new(vec![0.5, -0.25, 0.125], 1.0).unwrap();
        let t = transition_matrix(&m);
        let expect =
            DMatrix::from_row_slice(3, 3, &[0.5, -0.25, 0.125, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(t.a, expect);
        assert_eq!(t.u.as_slice(), &[1.0, 0.0, 0.0]);

        let x = DVector::from_vec(vec![3.0, 2.0, 1.0]);
        let next = &t.a * &x;
        assert_eq!(next[0], m.predict(x.as_slice()));
        assert_eq!(&next.as_slice()[1..], &[3.0, 2.0]);
    }

    #[test]
    fn zero_coeffs_companion() {
        let t = transition_matrix(&LpModel::silent(3, 0.0).unwrap());
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(t.a, expect);
    }

    #[test]
    fn segments_cover_track() {
        let track: Vec<f64> = (0..70).map(|i| (i as f64 * 0.3).sin() + 1.5).collect();
        let models = segment_models(&track, 2, 32).unwrap();
        // 32 + 32 + 6 frames
        assert_eq!(models.len(), 3);
        let short = segment_models(&track[..66], 2, 32).unwrap();
        // trailing 2-frame segment merged
        assert_eq!(short.len(), 2);
        let silent = segment_models(&[0.0; 40], 2, 32).unwrap();
        assert!(silent.iter().all(|m| m.residual_var() == 0.0));
    }
}
