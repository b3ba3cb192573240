//! Run configuration as flat `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error. Keys not given keep the desk defaults.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{parse_snr_grid, SynthConfig};
use crate::error::{Error, Result};
use crate::kalman::KfConfig;
use crate::neural::ModelConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub lp_order: usize,
    pub lp_segment: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

fn fmt_grid(g: &[f64]) -> String {
    g.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Small enough to train on a laptop CPU in minutes.
    pub fn desk() -> Self {
        Self {
            seed: 1,
            synth: SynthConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            lp_order: 2,
            lp_segment: 32,
        }
    }

    /// Full-size networks: two 1024-unit LSTM layers, a 1024-unit noise
    /// network, batch 16 and 2048-frame segments.
    pub fn full() -> Self {
        let mut c = Self::desk();
        c.model.lstm_units = 1024;
        c.model.fnn_hidden = 1024;
        c.train.batch = 16;
        c.train.seq_len = 2048;
        c.train.epochs = 20;
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            _ => Err(Error::Config(format!("unknown preset {name:?}"))),
        }
    }

    pub fn kf(&self) -> KfConfig {
        KfConfig {
            window: self.model.window,
            hop: self.model.hop,
            lp_order: self.lp_order,
            lp_segment: self.lp_segment,
            variance_span: self.model.variance_span,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "preset" => {
                let seed = self.seed;
                *self = Self::preset(value)?;
                self.seed = seed;
            }
            "seed" => self.seed = num(key, value)?,
            "window" => self.model.window = num(key, value)?,
            "hop" => self.model.hop = num(key, value)?,
            "variance_span" => self.model.variance_span = num(key, value)?,
            "context" => self.model.context = num(key, value)?,
            "lstm_layers" => self.model.lstm_layers = num(key, value)?,
            "lstm_units" => self.model.lstm_units = num(key, value)?,
            "fnn_hidden" => self.model.fnn_hidden = num(key, value)?,
            "log_features" => self.model.log_features = num(key, value)?,
            "lp_order" => self.lp_order = num(key, value)?,
            "lp_segment" => self.lp_segment = num(key, value)?,
            "lr" => self.train.lr = num(key, value)?,
            "batch" => self.train.batch = num(key, value)?,
            "seq_len" => self.train.seq_len = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "max_steps" => {
                self.train.max_steps = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "train_seed" => self.train.seed = num(key, value)?,
            "train_utterances" => self.synth.train = num(key, value)?,
            "dev_utterances" => self.synth.dev = num(key, value)?,
            "test_utterances" => self.synth.test = num(key, value)?,
            "duration_s" => self.synth.duration_s = num(key, value)?,
            "noise_margin_s" => self.synth.noise_margin_s = num(key, value)?,
            "train_snrs" => self.synth.train_snrs = parse_snr_grid(value)?,
            "test_snrs" => self.synth.test_snrs = parse_snr_grid(value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(1..=8).contains(&self.lp_order) {
            return Err(Error::Config("lp_order must be in 1..=8".into()));
        }
        if self.lp_segment <= self.lp_order {
            return Err(Error::Config("lp_segment must exceed lp_order".into()));
        }
        if !(self.train.lr >= 0.0 && self.train.lr.is_finite()) {
            return Err(Error::Config("lr must be finite and non-negative".into()));
        }
        if self.train.batch == 0 || self.train.seq_len == 0 {
            return Err(Error::Config("batch and seq_len must be positive".into()));
        }
        if !(self.synth.duration_s > 0.0) || !(self.synth.noise_margin_s >= 0.0) {
            return Err(Error::Config("durations must be positive".into()));
        }
        let min_len = self.synth.samples();
        if min_len < self.model.window {
            return Err(Error::Config("duration shorter than one window".into()));
        }
        Ok(())
    }

    /// Applies `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        self.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::desk();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key with its resolved value; parsing this gives `self` back.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let s = &self.synth;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("string write");
        kv("seed", self.seed.to_string());
        kv("window", m.window.to_string());
        kv("hop", m.hop.to_string());
        kv("variance_span", m.variance_span.to_string());
        kv("context", m.context.to_string());
        kv("lstm_layers", m.lstm_layers.to_string());
        kv("lstm_units", m.lstm_units.to_string());
        kv("fnn_hidden", m.fnn_hidden.to_string());
        kv("log_features", m.log_features.to_string());
        kv("lp_order", self.lp_order.to_string());
        kv("lp_segment", self.lp_segment.to_string());
        kv("lr", t.lr.to_string());
        kv("batch", t.batch.to_string());
        kv("seq_len", t.seq_len.to_string());
        kv("epochs", t.epochs.to_string());
        kv(
            "max_steps",
            t.max_steps.map_or("none".into(), |v| v.to_string()),
        );
        kv("train_seed", t.seed.to_string());
        kv("train_utterances", s.train.to_string());
        kv("dev_utterances", s.dev.to_string());
        kv("test_utterances", s.test.to_string());
        kv("duration_s", s.duration_s.to_string());
        kv("noise_margin_s", s.noise_margin_s.to_string());
        kv("train_snrs", fmt_grid(&s.train_snrs));
        kv("test_snrs", fmt_grid(&s.test_snrs));
        out
    }
}
