//! Deterministic synthetic corpus and its manifest.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.tsv
//! {train,dev,test}/{clean,noisy,noise}/<id>.wav
//! ```
//!
//! The manifest is tab-separated. The first line is `# nkf-manifest v1`,
//! the second names the columns:
//!
//! ```text
//! id  split  snr_db  seed  speech_id  noise_id  clean  noisy  noise
//! ```
//!
//! Paths are relative to the manifest's directory. `noise` holds the scaled
//! noise actually added, so oracle statistics can be recomputed.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mix::mix_at_snr;
use super::synth::{noise, speech_like, NoiseKind};
use super::wav::{write_wav, WavEncoding};
use crate::error::{Error, Result};
use crate::signal::{Waveform, DEFAULT_SAMPLE_RATE};

pub const MANIFEST_MAGIC: &str = "# nkf-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.tsv";
const COLUMNS: &str = "id\tsplit\tsnr_db\tseed\tspeech_id\tnoise_id\tclean\tnoisy\tnoise";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown split {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixSpec {
    pub snr_db: f64,
    pub seed: u64,
    pub speech_id: String,
    pub noise_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub mix: MixSpec,
    pub clean: PathBuf,
    pub noisy: PathBuf,
    pub noise: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusManifest {
    /// Directory the entry paths are relative to.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MANIFEST_MAGIC}\n{COLUMNS}\n");
        for e in &self.entries {
            s += &format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.id,
                e.split,
                e.mix.snr_db,
                e.mix.seed,
                e.mix.speech_id,
                e.mix.noise_id,
                e.clean.display(),
                e.noisy.display(),
                e.noise.display()
            );
        }
        s
    }

    /// Writes `manifest.tsv` into [`CorpusManifest::root`].
    pub fn write(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }

    /// Parses manifest text; paths are not checked.
    pub fn parse(text: &str, root: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, reason: String| Error::Manifest {
            line: line + 1,
            reason,
        };
        match lines.next() {
            Some((_, l)) if l.trim_end() == MANIFEST_MAGIC => {}
            _ => return Err(bad(0, format!("expected {MANIFEST_MAGIC:?}"))),
        }
        match lines.next() {
            Some((_, l)) if l.trim_end() == COLUMNS => {}
            _ => return Err(bad(1, "missing column header".into())),
        }
        let mut entries = Vec::new();
        let mut ids = HashSet::new();
        for (n, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 9 {
                return Err(bad(n, format!("{} fields, expected 9", f.len())));
            }
            let snr_db: f64 = f[2]
                .parse()
                .map_err(|_| bad(n, format!("bad snr {:?}", f[2])))?;
            if !snr_db.is_finite() {
                return Err(bad(n, "snr must be finite".into()));
            }
            let seed = f[3]
                .parse()
                .map_err(|_| bad(n, format!("bad seed {:?}", f[3])))?;
            let split = f[1].parse().map_err(|e: Error| bad(n, e.to_string()))?;
            if !ids.insert(f[0].to_string()) {
                return Err(bad(n, format!("duplicate id {:?}", f[0])));
            }
            entries.push(ManifestEntry {
                id: f[0].into(),
                split,
                mix: MixSpec {
                    snr_db,
                    seed,
                    speech_id: f[4].into(),
                    noise_id: f[5].into(),
                },
                clean: f[6].into(),
                noisy: f[7].into(),
                noise: f[8].into(),
            });
        }
        Ok(Self {
            root: root.to_path_buf(),
            entries,
        })
    }

    /// Reads a manifest file and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let m = Self::parse(&text, &root)?;
        for (i, e) in m.entries.iter().enumerate() {
            for p in [&e.clean, &e.noisy, &e.noise] {
                if !m.resolve(p).is_file() {
                    return Err(Error::Manifest {
                        line: i + 3,
                        reason: format!("missing file {}", p.display()),
                    });
                }
            }
        }
        Ok(m)
    }
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>> {
    let err = || Error::Config(format!("bad SNR grid {s:?}"));
    let nums = |sep: char| -> Result<Vec<f64>> {
        s.split(sep)
            .map(|p| p.trim().parse::<f64>().map_err(|_| err()))
            .collect()
    };
    let grid = if s.contains(':') {
        let p = nums(':')?;
        let [a, step, b] = p[..] else {
            return Err(err());
        };
        if !(step > 0.0) || b < a {
            return Err(err());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + i as f64 * step).collect()
    } else {
        nums(',')?
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(err());
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Train and dev mixtures draw uniformly from this grid.
    pub train_snrs: Vec<f64>,
    /// Test mixtures cycle through this grid in order.
    pub test_snrs: Vec<f64>,
    /// Extra noise length, so the mixing cut has room to move.
    pub noise_margin_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            train: 120,
            dev: 20,
            test: 20,
            duration_s: 4.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            train_snrs: (0..10).map(|i| -6.0 + 3.0 * i as f64).collect(),
            test_snrs: vec![-5.0, 0.0, 5.0, 10.0, 15.0],
            noise_margin_s: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }
}

/// Seed of utterance `index` in `split`, derived from the corpus seed.
pub fn utterance_seed(seed: u64, split: Split, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add((split as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One generated mixture, before anything is written.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub clean: Waveform,
    pub noisy: Waveform,
    pub noise: Waveform,
    pub mix: MixSpec,
}

pub fn synth_utterance(
    cfg: &SynthConfig,
    split: Split,
    index: usize,
    seed: u64,
) -> Result<Mixture> {
    let useed = utterance_seed(seed, split, index);
    let mut rng = ChaCha8Rng::seed_from_u64(useed);
    let n = cfg.samples();
    let sr = cfg.sample_rate;
    let speech = Waveform::new(speech_like(&mut rng, n, sr), sr)?;
    let kind = NoiseKind::ALL[index % NoiseKind::ALL.len()];
    let extra = (cfg.noise_margin_s * sr as f64).round() as usize;
    let raw = Waveform::new(noise(kind, &mut rng, n + extra, sr), sr)?;
    let snr_db = match split {
        Split::Test => cfg.test_snrs[index % cfg.test_snrs.len()],
        _ => cfg.train_snrs[rng.random_range(0..cfg.train_snrs.len())],
    };
    let (noisy, scaled) = mix_at_snr(&speech, &raw, snr_db, &mut rng)?;
    Ok(Mixture {
        clean: speech,
        noisy,
        noise: scaled,
        mix: MixSpec {
            snr_db,
            seed: useed,
            speech_id: format!("speech-{split}-{index:04}"),
            noise_id: format!("{}-{split}-{index:04}", kind.name()),
        },
    })
}

/// Generates the corpus under `out_dir` and writes its manifest.
pub fn synth_corpus(cfg: &SynthConfig, seed: u64, out_dir: &Path) -> Result<CorpusManifest> {
    if cfg.train_snrs.is_empty() || cfg.test_snrs.is_empty() {
        return Err(Error::Config("empty SNR grid".into()));
    }
    if !(cfg.duration_s > 0.0) {
        return Err(Error::Config("duration must be positive".into()));
    }
    for split in Split::ALL {
        for kind in ["clean", "noisy", "noise"] {
            std::fs::create_dir_all(out_dir.join(split.name()).join(kind))?;
        }
    }
    let jobs: Vec<(Split, usize)> = Split::ALL
        .into_iter()
        .flat_map(|s| (0..cfg.count(s)).map(move |i| (s, i)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(split, index)| {
            let m = synth_utterance(cfg, split, index, seed)?;
            let id = format!("{split}-{index:04}");
            let rel = |kind: &str| {
                PathBuf::from(split.name())
                    .join(kind)
                    .join(format!("{id}.wav"))
            };
            let entry = ManifestEntry {
                id: id.clone(),
                split,
                mix: m.mix,
                clean: rel("clean"),
                noisy: rel("noisy"),
                noise: rel("noise"),
            };
            write_wav(&m.clean, &out_dir.join(&entry.clean), WavEncoding::Float32)?;
            write_wav(&m.noisy, &out_dir.join(&entry.noisy), WavEncoding::Float32)?;
            write_wav(&m.noise, &out_dir.join(&entry.noise), WavEncoding::Float32)?;
            Ok(entry)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = CorpusManifest {
        root: out_dir.to_path_buf(),
        entries,
    };
    manifest.write()?;
    Ok(manifest)
}
