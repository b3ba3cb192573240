//! Binary model checkpoints.
//!
//! All integers are little-endian `u32` unless noted, all reals
//! little-endian IEEE-754 `f64`.
//!
//! ```text
//! magic          8 bytes  "NKFMODEL"
//! version        u32      1
//! config         9 x u32  window, hop, bins, variance_span, context,
//!                         lstm_layers, lstm_units, fnn_hidden, log_features
//! optimizer      4 x f64  lr, beta1, beta2, eps
//!                u64      step
//! tensor count   u32      N
//! N tensors      u32 rows, u32 cols, rows*cols f64 (row-major)
//! moments flag   u32      0 = none, 1 = N first moments then N second
//!                         moments, each encoded as a tensor above
//! ```
//!
//! Tensors appear in [`NkfModel::params`] order.

use std::io::{Read, Write};
use std::path::Path;

use super::adam::Adam;
use super::model::{ModelConfig, NkfModel};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MAGIC: &[u8; 8] = b"NKFMODEL";
pub const VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_tensor(w: &mut impl Write, g: &Grid) -> Result<()> {
    put_u32(w, g.rows() as u32)?;
    put_u32(w, g.cols() as u32)?;
    for v in g.as_slice() {
        put_f64(w, *v)?;
    }
    Ok(())
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint("truncated file".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(get(r)?))
}

fn get_tensor(r: &mut impl Read, expect: (usize, usize)) -> Result<Grid> {
    let rows = get_u32(r)? as usize;
    let cols = get_u32(r)? as usize;
    if (rows, cols) != expect {
        return Err(Error::Checkpoint(format!(
            "tensor shape {rows}x{cols}, expected {}x{}",
            expect.0, expect.1
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(get_f64(r)?);
    }
    Grid::from_vec(rows, cols, data)
}

pub fn write_model(w: &mut impl Write, model: &NkfModel) -> Result<()> {
    let c = &model.config;
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    for v in [
        c.window,
        c.hop,
        c.bins(),
        c.variance_span,
        c.context,
        c.lstm_layers,
        c.lstm_units,
        c.fnn_hidden,
        c.log_features as usize,
    ] {
        put_u32(w, v as u32)?;
    }
    let opt = &model.optimizer;
    for v in [opt.lr, opt.beta1, opt.beta2, opt.eps] {
        put_f64(w, v)?;
    }
    w.write_all(&opt.step.to_le_bytes())?;
    let params = model.params();
    put_u32(w, params.len() as u32)?;
    for p in &params {
        put_tensor(w, p)?;
    }
    let has_moments = opt.m.len() == params.len();
    put_u32(w, has_moments as u32)?;
    if has_moments {
        for g in opt.m.iter().chain(&opt.v) {
            put_tensor(w, g)?;
        }
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<NkfModel> {
    let magic: [u8; 8] = get(r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut f = [0usize; 9];
    for v in &mut f {
        *v = get_u32(r)? as usize;
    }
    let config = ModelConfig {
        window: f[0],
        hop: f[1],
        variance_span: f[3],
        context: f[4],
        lstm_layers: f[5],
        lstm_units: f[6],
        fnn_hidden: f[7],
        log_features: f[8] != 0,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if config.bins() != f[2] {
        return Err(Error::Checkpoint("bin count disagrees with window".into()));
    }

    let mut model = NkfModel::zeroed(config)?;
    let mut opt = Adam {
        lr: get_f64(r)?,
        beta1: get_f64(r)?,
        beta2: get_f64(r)?,
        eps: get_f64(r)?,
        step: u64::from_le_bytes(get(r)?),
        ..Adam::default()
    };
    let count = get_u32(r)? as usize;
    let shapes: Vec<(usize, usize)> = model.params().iter().map(|p| p.shape()).collect();
    if count != shapes.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors, architecture has {}",
            shapes.len()
        )));
    }
    for (p, &shape) in model.params_mut().into_iter().zip(&shapes) {
        *p = get_tensor(r, shape)?;
    }
    match get_u32(r)? {
        0 => {
            let step = opt.step;
            opt.reset(&model.params());
            opt.step = step;
        }
        1 => {
            opt.m = shapes
                .iter()
                .map(|&s| get_tensor(r, s))
                .collect::<Result<_>>()?;
            opt.v = shapes
                .iter()
                .map(|&s| get_tensor(r, s))
                .collect::<Result<_>>()?;
        }
        x => return Err(Error::Checkpoint(format!("bad moments flag {x}"))),
    }
    model.optimizer = opt;
    Ok(model)
}

pub fn save(model: &NkfModel, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<NkfModel> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_model(&mut r)
}
