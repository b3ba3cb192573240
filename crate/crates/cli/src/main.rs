//! `nkf` command line: corpus synthesis, training, enhancement, evaluation
//! and the gradient check.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical divergence (including a failed gradient check).

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nkf::data::{
    oracle_noise_variance, read_wav, synth_corpus, write_wav, CorpusManifest, Split, WavEncoding,
};
use nkf::gradcheck::global_gradient_check;
use nkf::metrics::{per_condition, write_report, EvalRow};
use nkf::nkf::estimate_grids;
use nkf::pipeline::load_training_pairs;
use nkf::{
    checkpoint, enhance_with, nkf_loss, stft, Grid, Method, MetricReport, NkfModel, NoiseSource,
    RunConfig, Waveform,
};

/// Name of the resolved-config echo written next to every output.
const RESOLVED: &str = "config.resolved";
const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "nkf",
    version,
    about = "Neural Kalman filter speech enhancement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Starting preset, applied before the config file.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single override, `key=value`; may be repeated. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and its manifest.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
    /// Train a model on the train split of a manifest.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Final checkpoint; loss history and per-epoch checkpoints go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Enhance one file or one split of a manifest.
    Enhance {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MethodArg::Nkf)]
        method: MethodArg,
        /// Noise variance for the kf and wiener methods.
        #[arg(long, value_enum, default_value_t = NoiseArg::Neural)]
        noise_source: NoiseArg,
        #[arg(
            long,
            conflicts_with = "manifest",
            required_unless_present = "manifest"
        )]
        input: Option<PathBuf>,
        /// Scaled noise of `--input`, for `--noise-source oracle`.
        #[arg(long, requires = "input")]
        noise: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write every intermediate grid as `<id>.grids.tsv`.
        #[arg(long)]
        dump_grids: bool,
    },
    /// Score enhanced files against the clean references of a manifest.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding `<id>.wav` for every evaluated entry.
        #[arg(long)]
        enhanced: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Defaults to `<enhanced>/report.tsv`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Finite-difference check of the end-to-end gradient on the tiny model.
    Gradcheck {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nkf,
    Kf,
    Wiener,
    Lstm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Nkf => Method::Nkf,
            MethodArg::Kf => Method::Kf,
            MethodArg::Wiener => Method::Wiener,
            MethodArg::Lstm => Method::Lstm,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    Neural,
    Oracle,
    Zero,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(nkf::Error),
    Check(String),
}

impl From<nkf::Error> for Failure {
    fn from(e: nkf::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Check(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Core(nkf::Error::Config(_)) => 1,
            Failure::Core(nkf::Error::Diverged(_)) | Failure::Check(_) => 3,
            Failure::Core(_) => 2,
        }
    }
}

type Outcome = Result<(), Failure>;

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::preset(&args.preset)?;
    if let Some(path) = &args.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> Outcome {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(RESOLVED), cfg.to_text())?;
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn parse_split(s: &str) -> Result<Split, Failure> {
    s.parse()
        .map_err(|_| Failure::Usage(format!("unknown split {s:?}")))
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Outcome {
    let manifest = synth_corpus(&cfg.synth, cfg.seed, out)?;
    echo_config(cfg, out)?;
    println!(
        "wrote {} utterances to {}",
        manifest.entries.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, manifest: &Path, out: &Path) -> Outcome {
    let manifest = CorpusManifest::load(manifest)?;
    let (window, hop) = (cfg.model.window, cfg.model.hop);
    let pairs = load_training_pairs(&manifest, Split::Train, window, hop)?;
    let dir = parent_dir(out);
    echo_config(cfg, &dir)?;

    let mut model = NkfModel::new(cfg.model.clone(), cfg.seed)?;
    let tc = nkf::TrainConfig {
        checkpoint_dir: Some(dir.join("epochs")),
        ..cfg.train.clone()
    };
    println!(
        "training {} parameters on {} utterances",
        model.param_count(),
        pairs.len()
    );
    let result = nkf::train(&mut model, &pairs, &tc);
    // the model holds the last good parameters even after a divergence
    checkpoint::save(&model, out)?;
    let report = result?;

    let mut hist = std::io::BufWriter::new(fs::File::create(dir.join("losses.tsv"))?);
    writeln!(hist, "step\tloss")?;
    for (i, l) in report.losses.iter().enumerate() {
        writeln!(hist, "{i}\t{l:e}")?;
    }
    hist.flush()?;

    let dev = load_training_pairs(&manifest, Split::Dev, window, hop)?;
    let mut dev_loss = 0.0;
    for p in &dev {
        dev_loss += nkf_loss(&estimate_grids(&model, &p.noisy)?.amp_out, &p.clean)?;
    }
    println!(
        "steps {} epochs {} loss {:.5} -> {:.5}",
        report.losses.len(),
        report.epochs_completed,
        report.smoothed_initial(20),
        report.smoothed_final(20)
    );
    if !dev.is_empty() {
        println!("dev loss {:.5}", dev_loss / dev.len() as f64);
    }
    Ok(())
}

struct EnhanceJob {
    id: String,
    noisy: PathBuf,
    noise: Option<PathBuf>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_enhance(
    cfg: &RunConfig,
    checkpoint_path: Option<&Path>,
    method: Method,
    noise_arg: NoiseArg,
    jobs: Vec<EnhanceJob>,
    out: &Path,
    dump_grids: bool,
) -> Outcome {
    let model = checkpoint_path.map(checkpoint::load).transpose()?;
    let needs_model =
        method == Method::Nkf || method == Method::Lstm || noise_arg == NoiseArg::Neural;
    if needs_model && model.is_none() {
        return Err(Failure::Usage(format!(
            "--method {method} with --noise-source {} needs --checkpoint",
            noise_arg.to_possible_value().expect("named").get_name()
        )));
    }
    let kf = cfg.kf();
    let (window, hop, span) = match &model {
        Some(m) => (m.config.window, m.config.hop, m.config.variance_span),
        None => (kf.window, kf.hop, kf.variance_span),
    };
    fs::create_dir_all(out)?;
    echo_config(cfg, out)?;
    for job in jobs {
        let noisy = read_wav(&job.noisy)?;
        let source = match noise_arg {
            NoiseArg::Neural => NoiseSource::Neural,
            NoiseArg::Zero => {
                let (t, f) = stft(&noisy, window, hop)?.amplitude().shape();
                NoiseSource::Oracle(Grid::zeros(t, f))
            }
            NoiseArg::Oracle => {
                let path = job.noise.as_ref().ok_or_else(|| {
                    Failure::Usage("--noise-source oracle needs --noise or a manifest".into())
                })?;
                NoiseSource::Oracle(oracle_noise_variance(&read_wav(path)?, window, hop, span)?)
            }
        };
        let result = enhance_with(method, model.as_ref(), &noisy, &source, &kf)?;
        write_wav(
            &result.waveform,
            &out.join(format!("{}.wav", job.id)),
            WavEncoding::Float32,
        )?;
        if dump_grids {
            result
                .grids
                .dump_tsv(&out.join(format!("{}.grids.tsv", job.id)))?;
        }
        println!("{}", job.id);
    }
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    manifest: &Path,
    enhanced: &Path,
    split: Split,
    report: &Path,
) -> Outcome {
    let manifest = CorpusManifest::load(manifest)?;
    let (window, hop) = (cfg.model.window, cfg.model.hop);
    let mut rows = Vec::new();
    for e in manifest.split(split) {
        let clean = read_wav(&manifest.resolve(&e.clean))?;
        let noisy = read_wav(&manifest.resolve(&e.noisy))?;
        let enh: Waveform = read_wav(&enhanced.join(format!("{}.wav", e.id)))?;
        rows.push(EvalRow {
            id: e.id.clone(),
            snr_db: e.mix.snr_db,
            enhanced: MetricReport::evaluate(&clean, &enh, window, hop)?,
            noisy: MetricReport::evaluate(&clean, &noisy, window, hop)?,
        });
    }
    if rows.is_empty() {
        return Err(Failure::Usage(format!("manifest has no {split} entries")));
    }
    let dir = parent_dir(report);
    echo_config(cfg, &dir)?;
    let mut out = std::io::BufWriter::new(fs::File::create(report)?);
    write_report(&mut out, &rows)?;
    out.flush()?;
    println!("snr_db\tn\tfwsegsnr\tnoisy");
    for (k, (e, n, count)) in per_condition(&rows) {
        println!(
            "{}\t{count}\t{:.2}\t{:.2}",
            k as f64 / 100.0,
            e.fwsegsnr,
            n.fwsegsnr
        );
    }
    Ok(())
}

fn cmd_gradcheck(cfg: &RunConfig) -> Outcome {
    let r = global_gradient_check(cfg.seed)?;
    println!(
        "max relative error {:.3e} over {} parameters (tensor {}, element {})",
        r.max_rel_error, r.checked, r.worst.0, r.worst.1
    );
    if r.max_rel_error < GRADCHECK_TOL {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "gradient check failed: {:.3e} >= {GRADCHECK_TOL:e}",
            r.max_rel_error
        )))
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Synth { config, out } => cmd_synth(&resolve_config(&config)?, &out),
        Command::Train {
            config,
            manifest,
            out,
        } => cmd_train(&resolve_config(&config)?, &manifest, &out),
        Command::Enhance {
            config,
            checkpoint,
            method,
            noise_source,
            input,
            noise,
            manifest,
            split,
            out,
            dump_grids,
        } => {
            let cfg = resolve_config(&config)?;
            let jobs = match (input, manifest) {
                (Some(path), _) => vec![EnhanceJob {
                    id: path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "enhanced".into()),
                    noisy: path,
                    noise,
                }],
                (None, Some(m)) => {
                    let split = parse_split(&split)?;
                    let m = CorpusManifest::load(&m)?;
                    m.split(split)
                        .map(|e| EnhanceJob {
                            id: e.id.clone(),
                            noisy: m.resolve(&e.noisy),
                            noise: Some(m.resolve(&e.noise)),
                        })
                        .collect()
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            cmd_enhance(
                &cfg,
                checkpoint.as_deref(),
                method.into(),
                noise_source,
                jobs,
                &out,
                dump_grids,
            )
        }
        Command::Eval {
            config,
            manifest,
            enhanced,
            split,
            report,
        } => {
            let cfg = resolve_config(&config)?;
            let report = report.unwrap_or_else(|| enhanced.join("report.tsv"));
            cmd_eval(&cfg, &manifest, &enhanced, parse_split(&split)?, &report)
        }
        Command::Gradcheck { config } => cmd_gradcheck(&resolve_config(&config)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
