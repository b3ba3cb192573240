use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use nkf::lp::{autocorrelate, levinson_durbin, transition_matrix};
use nkf::signal::{istft, recombine, stft};
use nkf::{LpModel, Waveform};

fn waveform(samples: Vec<f64>) -> Waveform {
    Waveform::new(samples, 16_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stft_round_trip(x in prop::collection::vec(-1.0f64..1.0, 256..3000)) {
        let w = waveform(x);
        let s = stft(&w, 256, 64).unwrap();
        let back = istft(&s, w.len()).unwrap();
        let covered = (s.num_frames() - 1) * 64 + 256;
        for n in 192..covered.saturating_sub(192) {
            prop_assert!((back.samples()[n] - w.samples()[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn recombining_own_polar_form_is_identity(x in prop::collection::vec(-1.0f64..1.0, 512..1500)) {
        let w = waveform(x);
        let s = stft(&w, 256, 64).unwrap();
        let r = recombine(s.amplitude(), s.phase(), 256, 64, 16_000).unwrap();
        for t in 0..s.num_frames() {
            for (a, b) in s.frame(t).iter().zip(r.frame(t)) {
                prop_assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
            }
        }
        let a = istft(&s, w.len()).unwrap();
        let b = istft(&r, w.len()).unwrap();
        // near the ends the window envelope is tiny and amplifies rounding
        let covered = (s.num_frames() - 1) * 64 + 256;
        for n in 192..covered - 192 {
            prop_assert!((a.samples()[n] - b.samples()[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_lag_dominates(x in prop::collection::vec(-5.0f64..5.0, 1..200), lag in 0usize..10) {
        if x.len() <= lag {
            prop_assert!(autocorrelate(&x, lag).is_err());
            return Ok(());
        }
        let r = autocorrelate(&x, lag).unwrap();
        for v in &r {
            prop_assert!(r[0] + 1e-12 >= v.abs());
        }
    }

    #[test]
    fn levinson_matches_normal_equations(
        x in prop::collection::vec(-1.0f64..1.0, 40..300),
        order in 1usize..=8,
    ) {
        let r = autocorrelate(&x, order).unwrap();
        prop_assume!(r[0] > 1e-6);
        let lp = levinson_durbin(&r, order).unwrap();
        let toeplitz = DMatrix::from_fn(order, order, |i, j| r[i.abs_diff(j)]);
        let rhs = DVector::from_fn(order, |i, _| r[i + 1]);
        if let Some(direct) = toeplitz.clone().lu().solve(&rhs) {
            let scale = direct.amax().max(1.0);
            prop_assume!(toeplitz.determinant().abs() > 1e-10);
            for (a, b) in lp.coeffs().iter().zip(direct.iter()) {
                prop_assert!((a - b).abs() < 1e-8 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn residual_never_grows_with_order(x in prop::collection::vec(-1.0f64..1.0, 40..300)) {
        let r = autocorrelate(&x, 8).unwrap();
        prop_assume!(r[0] > 1e-6);
        let mut prev = r[0];
        for p in 1..=8 {
            let e = levinson_durbin(&r, p).unwrap().residual_var();
            prop_assert!(e <= prev * (1.0 + 1e-12) + 1e-15);
            prop_assert!(e >= 0.0);
            prev = e;
        }
    }

    #[test]
    fn companion_step_applies_predictor(
        a in prop::collection::vec(-1.0f64..1.0, 3),
        x in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let lp = LpModel::new(a.clone(), 1.0).unwrap();
        let t = transition_matrix(&lp);
        let next = &t.a * DVector::from_vec(x.clone());
        let expect: f64 = a.iter().zip(&x).map(|(c, v)| c * v).sum();
        prop_assert!((next[0] - expect).abs() < 1e-12);
        prop_assert_eq!(next[1], x[0]);
        prop_assert_eq!(next[2], x[1]);
    }
}

#[test]
fn p2_matches_two_by_two_solve() {
    // any valid r with P = 2: Cramer's rule on the 2x2 normal equations
    for (r0, r1, r2) in [(1.0, 0.5, 0.1), (2.0, -0.3, 0.4), (1.0, 0.9, 0.81)] {
        let lp = levinson_durbin(&[r0, r1, r2], 2).unwrap();
        let det = r0 * r0 - r1 * r1;
        let a1 = (r1 * r0 - r1 * r2) / det;
        let a2 = (r0 * r2 - r1 * r1) / det;
        assert!((lp.coeffs()[0] - a1).abs() < 1e-9);
        assert!((lp.coeffs()[1] - a2).abs() < 1e-9);
    }
}
