use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nkf::gradcheck::{relative_error, tiny_config};
use nkf::neural::{optimizer_step, Graph};
use nkf::nkf::estimate_grids;
use nkf::wiener::wiener_gain;
use nkf::{
    checkpoint, enhance, nkf_combine, nkf_gain, nkf_loss, Grid, ModelConfig, NkfModel, Waveform,
};

fn small() -> ModelConfig {
    ModelConfig {
        window: 32,
        hop: 8,
        context: 4,
        variance_span: 5,
        lstm_units: 6,
        fnn_hidden: 5,
        ..ModelConfig::default()
    }
}

fn tone(len: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..len)
        .map(|n| 0.3 * (n as f64 * 0.07).sin() + 0.05 * rng.random_range(-1.0..1.0))
        .collect();
    Waveform::new(x, 16_000).unwrap()
}

proptest! {
    #[test]
    fn wiener_gain_is_monotone(sy in 1e-6f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(wiener_gain(lo * sy, sy) >= wiener_gain(hi * sy, sy));
        prop_assert!(wiener_gain(hi * sy, sy) >= 0.0 && wiener_gain(lo * sy, sy) <= 1.0);
    }

    #[test]
    fn blend_stays_between_estimates(sr in 1e-9f64..1e3, sv in 1e-9f64..1e3, w in 0.0f64..50.0, l in 0.0f64..50.0) {
        let g = nkf_gain(sr, sv);
        prop_assert!((0.0..=1.0).contains(&g));
        let v = nkf_combine(g, w, l);
        prop_assert!(v >= w.min(l) && v <= w.max(l));
    }
}

#[test]
fn loss_matches_naive_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = Grid::from_fn(13, 9, |_, _| rng.random_range(0.0..3.0));
    let b = Grid::from_fn(13, 9, |_, _| rng.random_range(0.0..3.0));
    let mut sum = 0.0;
    for t in 0..13 {
        for f in 0..9 {
            sum += (a.get(t, f) - b.get(t, f)).powi(2);
        }
    }
    assert!((nkf_loss(&a, &b).unwrap() - sum / 117.0).abs() < 1e-12);
}

#[test]
fn noise_network_gradient_matches_finite_differences() {
    let model = NkfModel::new(tiny_config(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = model.config.fnn_input_dim();
    let input = Grid::from_fn(3, dim, |_, _| rng.random_range(0.0..2.0));
    let target = Grid::from_fn(3, model.config.bins(), |_, _| rng.random_range(0.0..2.0));
    let loss = |m: &NkfModel, train: bool| {
        let mut g = Graph::new();
        let b = m.bind(&mut g, train);
        let x = g.constant(input.clone());
        let y = b.noise_forward(&mut g, x).unwrap();
        let t = g.constant(target.clone());
        let l = g.mean_square(y, t).unwrap();
        (g, b, l)
    };
    let (mut g, b, l) = loss(&model, true);
    g.backward(l).unwrap();
    let grads = b.grads(&g);
    let n = grads.len();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    // the noise network's three layers are the last six tensors
    for (pi, grad) in grads.iter().enumerate().skip(n - 6) {
        for ei in 0..grad.len() {
            let orig = probe.params()[pi].as_slice()[ei];
            let eval = |m: &NkfModel| {
                let (g, _, l) = loss(m, false);
                g.value(l).get(0, 0)
            };
            probe.params_mut()[pi].as_mut_slice()[ei] = orig + 1e-5;
            let up = eval(&probe);
            probe.params_mut()[pi].as_mut_slice()[ei] = orig - 1e-5;
            let down = eval(&probe);
            probe.params_mut()[pi].as_mut_slice()[ei] = orig;
            let numeric = (up - down) / 2e-5;
            worst = worst.max(relative_error(grad.as_slice()[ei], numeric));
        }
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn identical_models_and_gradients_stay_identical() {
    let mut a = NkfModel::new(small(), 9).unwrap();
    let mut b = NkfModel::new(small(), 9).unwrap();
    for k in 0..3 {
        let grads: Vec<Grid> = a
            .params()
            .iter()
            .map(|p| p.map(|v| (v * 3.0 + k as f64).cos()))
            .collect();
        optimizer_step(&mut a, &grads).unwrap();
        optimizer_step(&mut b, &grads).unwrap();
    }
    for (x, y) in a.params().iter().zip(b.params()) {
        assert_eq!(x, &y);
    }
}

#[test]
fn gain_limits_pass_clean_input_through() {
    // residual variance at its upper clamp, noise variance at its floor:
    // G -> 1, Wiener gain -> 1, so the output is the noisy input
    let mut m = NkfModel::zeroed(small()).unwrap();
    m.predictor.head_res.b.as_mut_slice().fill(100.0);
    m.noise_net.layers[2].b.as_mut_slice().fill(-60.0);
    let x = tone(4000, 1);
    let out = enhance(&m, &x).unwrap();
    let g = &out.grids;
    assert!(g.gain.as_slice().iter().all(|v| *v > 1.0 - 1e-9));
    // the first and last window are not fully overlapped
    let interior = 32..x.len() - 32;
    let err = x.samples()[interior.clone()]
        .iter()
        .zip(&out.waveform.samples()[interior])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn enhancement_shapes_and_ranges() {
    let m = NkfModel::new(small(), 2).unwrap();
    for len in [32, 100, 1000, 1001] {
        let x = tone(len, len as u64);
        let out = enhance(&m, &x).unwrap();
        assert_eq!(out.waveform.len(), len);
        assert!(out.grids.is_consistent());
        assert!(out
            .grids
            .gain
            .as_slice()
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
        let t = out.grids.frame(0);
        assert_eq!(t.amp_out.len(), 17);
        for i in 0..t.amp_out.len() {
            let (lo, hi) = (
                t.amp_wiener[i].min(t.amp_lstm[i]),
                t.amp_wiener[i].max(t.amp_lstm[i]),
            );
            assert!(t.amp_out[i] >= lo && t.amp_out[i] <= hi);
        }
    }
    assert!(enhance(&m, &tone(31, 0)).is_err());
}

#[test]
fn checkpoint_reload_reproduces_enhancement() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let m = NkfModel::new(small(), 3).unwrap();
    checkpoint::save(&m, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    let x = tone(2000, 4);
    let a = enhance(&m, &x).unwrap().waveform;
    let b = enhance(&back, &x).unwrap().waveform;
    assert_eq!(a, b);
}

#[test]
fn grid_dump_is_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let m = NkfModel::new(small(), 3).unwrap();
    let amp = Grid::from_fn(4, 17, |t, f| (t + f) as f64 * 0.1);
    let g = estimate_grids(&m, &amp).unwrap();
    let p = dir.path().join("g.tsv");
    g.dump_tsv(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# nkf-grids v1 frames=4 bins=17");
    assert_eq!(lines.clone().count(), 6 * 4);
    let first: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(first.len(), 2 + 17);
    assert_eq!(first[0], "amp_lstm");
}
