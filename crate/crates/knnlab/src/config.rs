//! Pipeline configuration: one TOML file drives every command.
//!
//! Unknown keys are rejected so typos fail loudly instead of silently
//! running with defaults. Every section has complete defaults, so a
//! partial file (or none at all) is valid. Commands write the fully
//! resolved configuration beside their outputs for provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// File name of the resolved-config copy written beside outputs.
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub resplit: ResplitConfig,
    pub encoder: EncoderConfig,
    pub lm: LmConfig,
    pub index: IndexConfig,
    pub knn: KnnSection,
    pub bins: BinsConfig,
    pub diagnose: DiagnoseConfig,
    pub sweep: SweepConfig,
}

/// Artifact file names, all relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Unsplit input corpus (consumed by `resplit`, produced by `synth`).
    pub corpus: String,
    pub train: String,
    pub valid: String,
    pub test: String,
    pub datastore: String,
    pub index: String,
    pub records: String,
    /// Corpus the base model trains on; defaults to the train split —
    /// point it elsewhere to decouple pre-training frequencies from
    /// datastore frequencies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lm_corpus: Option<String>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: "corpus.bin".into(),
            train: "train.bin".into(),
            valid: "valid.bin".into(),
            test: "test.bin".into(),
            datastore: "datastore.bin".into(),
            index: "index.bin".into(),
            records: "records.csv".into(),
            lm_corpus: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub vocab_size: u32,
    pub alpha: f64,
    pub n_docs: usize,
    pub doc_len: usize,
    pub alpha_jitter: f64,
    pub head_positions: usize,
    pub head_uniform_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 2000,
            alpha: 1.1,
            n_docs: 2600,
            doc_len: 200,
            alpha_jitter: 0.15,
            head_positions: 8,
            head_uniform_prob: 0.75,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResplitConfig {
    pub target_eval_tokens: u64,
    /// Tokens with train-split frequency below this are "rare" in the
    /// split summary and histogram.
    pub rare_threshold: u64,
    pub seed: u64,
}

impl Default for ResplitConfig {
    fn default() -> Self {
        ResplitConfig { target_eval_tokens: 40_000, rare_threshold: 10, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub dim: usize,
    pub window: usize,
    pub decay: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { dim: 64, window: 8, decay: 0.7, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub order: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { order: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexConfig {
    pub coarse_clusters: usize,
    pub subspaces: usize,
    pub code_bits: u32,
    pub kmeans_iters: usize,
    /// Training sample size for the coarse and product quantizers
    /// (0 = train on every key).
    pub train_sample: usize,
    pub seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            coarse_clusters: 256,
            subspaces: 8,
            code_bits: 8,
            kmeans_iters: 25,
            train_sample: 65_536,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnSection {
    pub k: usize,
    pub tau: f64,
    pub lambda: f64,
    pub nprobe: usize,
    /// Score with exhaustive exact search instead of the inverted index.
    pub exact_search: bool,
    /// Re-rank quantized candidates by exact distance to the stored keys.
    pub exact_rescore: bool,
}

impl Default for KnnSection {
    fn default() -> Self {
        KnnSection {
            k: 1024,
            tau: 10.0,
            lambda: 0.25,
            nprobe: 32,
            exact_search: false,
            exact_rescore: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinsConfig {
    /// Log-bin resolution: 1 gives decade bins, 8 the finer default.
    pub per_decade: u32,
}

impl Default for BinsConfig {
    fn default() -> Self {
        BinsConfig { per_decade: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseConfig {
    /// Cap on entries evaluated per type for contamination
    /// (0 = evaluate every entry).
    pub contamination_sample: usize,
    /// Bins with fewer observations than this are left out of the
    /// frequency-trend correlations.
    pub min_bin_obs: u64,
    pub seed: u64,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig { contamination_sample: 0, min_bin_obs: 30, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    pub taus: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { ks: vec![1, 4, 16, 64], taus: vec![1.0, 10.0] }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Replace every section seed with one value (the `--seed` override).
    pub fn override_seeds(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.resplit.seed = seed;
        self.encoder.seed = seed;
        self.index.seed = seed;
        self.diagnose.seed = seed;
    }

    /// Serialize the fully resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Write the resolved configuration beside a run's outputs.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, self.to_toml())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_the_default_config() {
        let parsed: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(parsed, PipelineConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let parsed: PipelineConfig =
            toml::from_str("[knn]\nk = 7\n\n[encoder]\ndim = 16\n").unwrap();
        assert_eq!(parsed.knn.k, 7);
        assert_eq!(parsed.knn.tau, 10.0);
        assert_eq!(parsed.encoder.dim, 16);
        assert_eq!(parsed.encoder.window, 8);
        assert_eq!(parsed.index, IndexConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_both_levels() {
        assert!(toml::from_str::<PipelineConfig>("[nonsense]\nx = 1\n").is_err());
        assert!(toml::from_str::<PipelineConfig>("[knn]\nkk = 7\n").is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut config = PipelineConfig::default();
        config.knn.k = 33;
        config.sweep.taus = vec![0.5, 2.5];
        config.paths.lm_corpus = Some("pretrain.bin".into());
        let text = config.to_toml();
        let parsed: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn default_config_serializes_without_optional_paths() {
        let text = PipelineConfig::default().to_toml();
        assert!(!text.contains("lm_corpus"));
        let parsed: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, PipelineConfig::default());
    }

    #[test]
    fn seed_override_reaches_every_section() {
        let mut config = PipelineConfig::default();
        config.override_seeds(7);
        for s in [
            config.synth.seed,
            config.resplit.seed,
            config.encoder.seed,
            config.index.seed,
            config.diagnose.seed,
        ] {
            assert_eq!(s, 7);
        }
    }

    #[test]
    fn load_reports_missing_and_malformed_files_as_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.toml");
        assert!(matches!(PipelineConfig::load(&missing), Err(Error::Config(_))));
        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "[paths\n").unwrap();
        assert!(matches!(PipelineConfig::load(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn resolved_config_lands_beside_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig::default();
        let path = config.write_resolved(dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap(), RESOLVED_CONFIG_FILE);
        let loaded = PipelineConfig::load(&path).unwrap();
        assert_eq!(loaded, config);
    }
}
