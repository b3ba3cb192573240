//! Parameters and forward graphs of the two networks.
//!
//! The predictor is a stack of LSTM layers read by two dense heads: one
//! for the clean amplitude (ReLU output) and one for the log variance of
//! the prediction residual (clamped to +-12). The noise estimator is a
//! three-layer ReLU network over a left context of noisy amplitudes plus
//! the current frame's noisy variance; its softplus output is the noise
//! variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::graph::{Graph, Var};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const LOGVAR_LIMIT: f64 = 12.0;
/// Added to the softplus output so the noise variance is strictly positive.
pub const NOISE_VARIANCE_EPS: f64 = 1e-6;
const LOG_FEATURE_OFFSET: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub window: usize,
    pub hop: usize,
    pub variance_span: usize,
    pub context: usize,
    pub lstm_layers: usize,
    pub lstm_units: usize,
    pub fnn_hidden: usize,
    /// Feed `ln(a + 1e-3)` instead of raw amplitudes to both networks.
    pub log_features: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 256,
            hop: 64,
            variance_span: 20,
            context: 30,
            lstm_layers: 2,
            lstm_units: 64,
            fnn_hidden: 128,
            log_features: false,
        }
    }
}

impl ModelConfig {
    pub fn bins(&self) -> usize {
        self.window / 2 + 1
    }

    pub fn fnn_input_dim(&self) -> usize {
        self.context * self.bins() + self.bins()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window", self.window),
            ("hop", self.hop),
            ("variance_span", self.variance_span),
            ("context", self.context),
            ("lstm_layers", self.lstm_layers),
            ("lstm_units", self.lstm_units),
            ("fnn_hidden", self.fnn_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.window.is_multiple_of(2) {
            return Err(Error::Config("window must be even".into()));
        }
        if self.hop > self.window {
            return Err(Error::Config("hop must not exceed window".into()));
        }
        Ok(())
    }

    pub(crate) fn feature(&self, a: f64) -> f64 {
        if self.log_features {
            (a + LOG_FEATURE_OFFSET).ln()
        } else {
            a
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Grid,
    pub b: Grid,
}

impl Dense {
    fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let k = 1.0 / (fan_in as f64).sqrt();
        Self {
            w: uniform(rng, fan_in, fan_out, k),
            b: uniform(rng, 1, fan_out, k),
        }
    }
}

/// Gate columns are laid out `[input | forget | cell | output]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub w_ih: Grid,
    pub w_hh: Grid,
    pub bias: Grid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmPredictor {
    pub layers: Vec<LstmLayer>,
    pub head_amp: Dense,
    pub head_res: Dense,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseFnn {
    pub layers: Vec<Dense>,
}

#[derive(Clone, Debug)]
pub struct NkfModel {
    pub config: ModelConfig,
    pub predictor: LstmPredictor,
    pub noise_net: NoiseFnn,
    pub optimizer: Adam,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, k: f64) -> Grid {
    Grid::from_fn(rows, cols, |_, _| rng.random_range(-k..=k))
}

impl NkfModel {
    /// Randomly initialized model: weights uniform in `+-1/sqrt(fan_in)`,
    /// forget-gate biases 1.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (bins, h) = (config.bins(), config.lstm_units);
        let mut layers = Vec::with_capacity(config.lstm_layers);
        for l in 0..config.lstm_layers {
            let input = if l == 0 { bins } else { h };
            let mut bias = uniform(&mut rng, 1, 4 * h, 1.0 / (h as f64).sqrt());
            for c in h..2 * h {
                bias.set(0, c, 1.0);
            }
            layers.push(LstmLayer {
                w_ih: uniform(&mut rng, input, 4 * h, 1.0 / (input as f64).sqrt()),
                w_hh: uniform(&mut rng, h, 4 * h, 1.0 / (h as f64).sqrt()),
                bias,
            });
        }
        let predictor = LstmPredictor {
            layers,
            head_amp: Dense::init(&mut rng, h, bins),
            head_res: Dense::init(&mut rng, h, bins),
        };
        let hidden = config.fnn_hidden;
        let noise_net = NoiseFnn {
            layers: vec![
                Dense::init(&mut rng, config.fnn_input_dim(), hidden),
                Dense::init(&mut rng, hidden, hidden),
                Dense::init(&mut rng, hidden, bins),
            ],
        };
        let mut model = Self {
            config,
            predictor,
            noise_net,
            optimizer: Adam::default(),
        };
        let mut opt = Adam::default();
        opt.reset(&model.params());
        model.optimizer = opt;
        Ok(model)
    }

    /// Same architecture with every parameter set to zero.
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        let mut m = Self::new(config, 0)?;
        for p in m.params_mut() {
            p.as_mut_slice().fill(0.0);
        }
        Ok(m)
    }

    /// Parameters in declaration order: LSTM layers (`w_ih`, `w_hh`, `bias`),
    /// amplitude head, residual head, then the three noise layers
    /// (`w`, `b` each).
    pub fn params(&self) -> Vec<&Grid> {
        let mut out = Vec::new();
        for l in &self.predictor.layers {
            out.extend([&l.w_ih, &l.w_hh, &l.bias]);
        }
        for d in [&self.predictor.head_amp, &self.predictor.head_res]
            .into_iter()
            .chain(&self.noise_net.layers)
        {
            out.extend([&d.w, &d.b]);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Grid> {
        let mut out = Vec::new();
        let LstmPredictor {
            layers,
            head_amp,
            head_res,
        } = &mut self.predictor;
        for l in layers.iter_mut() {
            out.extend([&mut l.w_ih, &mut l.w_hh, &mut l.bias]);
        }
        for d in [head_amp, head_res]
            .into_iter()
            .chain(self.noise_net.layers.iter_mut())
        {
            out.extend([&mut d.w, &mut d.b]);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Places every parameter on `g`, as differentiable leaves when
    /// `trainable`, as constants otherwise.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        let vars = self
            .params()
            .into_iter()
            .map(|p| {
                if trainable {
                    g.param(p.clone())
                } else {
                    g.constant(p.clone())
                }
            })
            .collect();
        Bound {
            vars,
            layers: self.config.lstm_layers,
            units: self.config.lstm_units,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }
}

/// Graph handles of a bound model, in [`NkfModel::params`] order.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
    layers: usize,
    units: usize,
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn lstm(&self, l: usize) -> (Var, Var, Var) {
        (self.vars[3 * l], self.vars[3 * l + 1], self.vars[3 * l + 2])
    }

    fn head_amp(&self) -> (Var, Var) {
        let o = 3 * self.layers;
        (self.vars[o], self.vars[o + 1])
    }

    fn head_res(&self) -> (Var, Var) {
        let o = 3 * self.layers + 2;
        (self.vars[o], self.vars[o + 1])
    }

    fn fnn(&self, i: usize) -> (Var, Var) {
        let o = 3 * self.layers + 4 + 2 * i;
        (self.vars[o], self.vars[o + 1])
    }

    /// Gradients after a backward pass, zero where nothing flowed.
    pub fn grads(&self, g: &Graph) -> Vec<Grid> {
        self.vars
            .iter()
            .map(|&v| {
                g.grad(v).cloned().unwrap_or_else(|| {
                    let (r, c) = g.shape(v);
                    Grid::zeros(r, c)
                })
            })
            .collect()
    }

    /// LSTM recurrence over `inputs` (one `B x F` array per frame) from zero
    /// state. Returns the amplitude prediction and the clamped residual log
    /// variance, both `(T*B) x F` with row `t*B + b`.
    pub fn lstm_forward(&self, g: &mut Graph, inputs: &[Var]) -> Result<(Var, Var)> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty input sequence".into()))?;
        let batch = g.shape(first).0;
        let h = self.units;
        let mut seq: Vec<Var> = inputs.to_vec();
        for l in 0..self.layers {
            let (w_ih, w_hh, bias) = self.lstm(l);
            let mut hidden = g.constant(Grid::zeros(batch, h));
            let mut cell = g.constant(Grid::zeros(batch, h));
            let mut out = Vec::with_capacity(seq.len());
            for &x in &seq {
                let xi = g.matmul(x, w_ih)?;
                let hh = g.matmul(hidden, w_hh)?;
                let pre = g.add(xi, hh)?;
                let pre = g.add_row(pre, bias)?;
                let i = g.slice_cols(pre, 0, h)?;
                let f = g.slice_cols(pre, h, h)?;
                let c = g.slice_cols(pre, 2 * h, h)?;
                let o = g.slice_cols(pre, 3 * h, h)?;
                let i = g.sigmoid(i);
                let f = g.sigmoid(f);
                let c = g.tanh(c);
                let o = g.sigmoid(o);
                let keep = g.mul(f, cell)?;
                let write = g.mul(i, c)?;
                cell = g.add(keep, write)?;
                let squashed = g.tanh(cell);
                hidden = g.mul(o, squashed)?;
                out.push(hidden);
            }
            seq = out;
        }
        let top = g.concat_rows(&seq)?;
        let (wa, ba) = self.head_amp();
        let amp = g.matmul(top, wa)?;
        let amp = g.add_row(amp, ba)?;
        let amp = g.relu(amp);
        let (wr, br) = self.head_res();
        let res = g.matmul(top, wr)?;
        let res = g.add_row(res, br)?;
        let res = g.clamp(res, -LOGVAR_LIMIT, LOGVAR_LIMIT);
        Ok((amp, res))
    }

    /// Noise variance for each row of `input` (see [`fnn_inputs`]).
    pub fn noise_forward(&self, g: &mut Graph, input: Var) -> Result<Var> {
        let mut x = input;
        for i in 0..3 {
            let (w, b) = self.fnn(i);
            let z = g.matmul(x, w)?;
            let z = g.add_row(z, b)?;
            x = if i < 2 { g.relu(z) } else { g.softplus(z) };
        }
        Ok(g.add_scalar(x, NOISE_VARIANCE_EPS))
    }
}

/// Noise-network input rows for one utterance: the feature-transformed
/// noisy amplitudes of frames `t - context + 1 ..= t` (frame 0 repeated
/// before the start), oldest first, followed by the frame's noisy variance.
pub fn fnn_inputs(cfg: &ModelConfig, noisy_amp: &Grid, sigma_y2: &Grid) -> Result<Grid> {
    noisy_amp.ensure_same_shape(sigma_y2, "fnn_inputs")?;
    let (frames, bins) = noisy_amp.shape();
    if bins != cfg.bins() {
        return Err(Error::shape(
            "fnn_inputs",
            (frames, cfg.bins()),
            noisy_amp.shape(),
        ));
    }
    let feats = noisy_amp.map(|a| cfg.feature(a));
    let ctx = cfg.context;
    let mut out = Grid::zeros(frames, cfg.fnn_input_dim());
    for t in 0..frames {
        let row = out.row_mut(t);
        for k in 0..ctx {
            let src = (t + k + 1).saturating_sub(ctx);
            row[k * bins..(k + 1) * bins].copy_from_slice(feats.row(src));
        }
        for (d, s) in row[ctx * bins..].iter_mut().zip(sigma_y2.row(t)) {
            *d = cfg.feature_var(*s);
        }
    }
    Ok(out)
}

impl ModelConfig {
    pub(crate) fn feature_var(&self, v: f64) -> f64 {
        if self.log_features {
            (v + LOG_FEATURE_OFFSET * LOG_FEATURE_OFFSET).ln()
        } else {
            v
        }
    }
}

/// Runs the predictor alone on one utterance (`T x F` noisy amplitudes).
pub fn lstm_forward(model: &NkfModel, noisy_amp: &Grid) -> Result<(Grid, Grid)> {
    if noisy_amp.cols() != model.config.bins() {
        return Err(Error::shape(
            "lstm_forward",
            (noisy_amp.rows(), model.config.bins()),
            noisy_amp.shape(),
        ));
    }
    let mut g = Graph::new();
    let bound = model.bind(&mut g, false);
    let inputs: Vec<Var> = (0..noisy_amp.rows())
        .map(|t| {
            let row: Vec<f64> = noisy_amp
                .row(t)
                .iter()
                .map(|&a| model.config.feature(a))
                .collect();
            g.constant(Grid::from_vec(1, row.len(), row).expect("row"))
        })
        .collect();
    let (amp, res) = bound.lstm_forward(&mut g, &inputs)?;
    Ok((g.value(amp).clone(), g.value(res).clone()))
}

/// Runs the noise network on one frame. `amp_context` holds `context * F`
/// noisy amplitudes, oldest frame first.
pub fn noise_fnn_forward(
    model: &NkfModel,
    amp_context: &[f64],
    sigma_y2_frame: &[f64],
) -> Result<Vec<f64>> {
    let cfg = &model.config;
    let bins = cfg.bins();
    if amp_context.len() != cfg.context * bins || sigma_y2_frame.len() != bins {
        return Err(Error::shape(
            "noise_fnn_forward",
            (cfg.context * bins, bins),
            (amp_context.len(), sigma_y2_frame.len()),
        ));
    }
    let mut row: Vec<f64> = amp_context.iter().map(|&a| cfg.feature(a)).collect();
    row.extend(sigma_y2_frame.iter().map(|&v| cfg.feature_var(v)));
    let mut g = Graph::new();
    let bound = model.bind(&mut g, false);
    let x = g.constant(Grid::from_vec(1, row.len(), row)?);
    let out = bound.noise_forward(&mut g, x)?;
    Ok(g.value(out).as_slice().to_vec())
}
