//! Enhancement outputs and the intermediate grids kept for inspection.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::grid::Grid;
use crate::signal::Waveform;

/// Per-bin quantities of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct NkfFrameEstimates {
    pub amp_lstm: Vec<f64>,
    pub amp_wiener: Vec<f64>,
    pub sigma_r2: Vec<f64>,
    pub sigma_v2: Vec<f64>,
    pub gain: Vec<f64>,
    pub amp_out: Vec<f64>,
}

/// The same quantities stacked over all frames (`T x F` each).
///
/// For the Kalman baseline `amp_lstm` holds the one-step prior estimate,
/// `sigma_r2` its prior variance and `gain` the first Kalman gain component.
#[derive(Clone, Debug)]
pub struct EstimateGrids {
    pub amp_lstm: Grid,
    pub amp_wiener: Grid,
    pub sigma_r2: Grid,
    pub sigma_v2: Grid,
    pub gain: Grid,
    pub amp_out: Grid,
}

impl EstimateGrids {
    pub fn shape(&self) -> (usize, usize) {
        self.amp_out.shape()
    }

    fn named(&self) -> [(&'static str, &Grid); 6] {
        [
            ("amp_lstm", &self.amp_lstm),
            ("amp_wiener", &self.amp_wiener),
            ("sigma_r2", &self.sigma_r2),
            ("sigma_v2", &self.sigma_v2),
            ("gain", &self.gain),
            ("amp_out", &self.amp_out),
        ]
    }

    pub fn frame(&self, t: usize) -> NkfFrameEstimates {
        NkfFrameEstimates {
            amp_lstm: self.amp_lstm.row(t).to_vec(),
            amp_wiener: self.amp_wiener.row(t).to_vec(),
            sigma_r2: self.sigma_r2.row(t).to_vec(),
            sigma_v2: self.sigma_v2.row(t).to_vec(),
            gain: self.gain.row(t).to_vec(),
            amp_out: self.amp_out.row(t).to_vec(),
        }
    }

    pub fn is_consistent(&self) -> bool {
        let shape = self.shape();
        self.named()
            .iter()
            .all(|(_, g)| g.shape() == shape && g.is_finite())
    }

    /// Writes every grid as tab-separated text: one line per (grid, frame),
    /// `name<TAB>t<TAB>v_0<TAB>...<TAB>v_{F-1}`, after a `#` header line.
    pub fn dump_tsv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let (frames, bins) = self.shape();
        writeln!(out, "# nkf-grids v1 frames={frames} bins={bins}")?;
        for (name, g) in self.named() {
            for t in 0..frames {
                write!(out, "{name}\t{t}")?;
                for v in g.row(t) {
                    write!(out, "\t{v:e}")?;
                }
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EnhancementResult {
    pub waveform: Waveform,
    pub grids: EstimateGrids,
}
