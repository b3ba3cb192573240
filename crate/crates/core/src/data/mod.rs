//! Audio files, mixing and the synthetic corpus.

pub mod corpus;
pub mod mix;
pub mod synth;
pub mod wav;

pub use corpus::{
    parse_snr_grid, synth_corpus, synth_utterance, utterance_seed, CorpusManifest, ManifestEntry,
    MixSpec, Mixture, Split, SynthConfig,
};
pub use mix::{measure_snr, mix_at_snr, oracle_noise_variance};
pub use synth::NoiseKind;
pub use wav::{read_wav, read_wav_at, write_wav, WavEncoding};
