use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{GenConfig, ModalityShape, ModalitySource, ModalitySpec};
use crate::error::{Error, Result};
use crate::multiscale::{Arrangement, EmbeddingConfig, ModalityConfig, NetworkConfig, DEFAULT_T_BPTT};
use crate::nn::AdamConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Corpus directory; relative paths resolve against the config file.
    pub dir: PathBuf,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("corpus"),
            train: 40,
            test: 10,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityEntry {
    pub name: String,
    #[serde(flatten)]
    pub source: ModalitySource,
    #[serde(default)]
    pub subnet_hidden: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub arrangement: String,
    pub master_hidden: usize,
    pub dropout: f64,
    pub l2: f64,
    pub embedding_dim: usize,
    pub hidden_budget_check: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            arrangement: "two_subnets".into(),
            master_hidden: 32,
            dropout: 0.0,
            l2: 0.0,
            embedding_dim: 8,
            hidden_budget_check: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub t_bptt: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seeds: Vec<u64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            epochs: 10,
            t_bptt: DEFAULT_T_BPTT,
            batch_size: 4,
            learning_rate: AdamConfig::default().learning_rate,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Each entry: master size followed by one sub-network size per modality.
    pub hidden: Vec<Vec<usize>>,
    pub dropout: Vec<f64>,
    pub l2: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            hidden: vec![],
            dropout: vec![0.0],
            l2: vec![0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub pause_short_ms: u32,
    pub pause_long_ms: u32,
    /// Share of training conversations held out for model selection and
    /// onset threshold tuning.
    pub dev_fraction: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            pause_short_ms: 50,
            pause_long_ms: 500,
            dev_fraction: 0.25,
        }
    }
}

impl EvalSection {
    pub fn pause_frames(&self) -> [usize; 2] {
        [self.pause_short_ms, self.pause_long_ms].map(|ms| (ms as usize).div_ceil(50).max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSection,
    pub generator: GenConfig,
    #[serde(rename = "modality")]
    pub modalities: Vec<ModalityEntry>,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub grid: GridSection,
    pub eval: EvalSection,
    /// Directory the config was read from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusSection::default(),
            generator: GenConfig::default(),
            modalities: Vec::new(),
            network: NetworkSection::default(),
            training: TrainingSection::default(),
            grid: GridSection::default(),
            eval: EvalSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.training.seeds.is_empty() {
            return Err(Error::Config("training.seeds must not be empty".into()));
        }
        if self.modalities.is_empty() {
            return Err(Error::Config("at least one [[modality]] is required".into()));
        }
        if !(0.0..1.0).contains(&self.eval.dev_fraction) {
            return Err(Error::Config("eval.dev_fraction must lie in [0, 1)".into()));
        }
        self.arrangement()?;
        self.generator.validate()
    }

    pub fn arrangement(&self) -> Result<Arrangement> {
        self.network.arrangement.parse()
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.base_dir.join(&self.corpus.dir)
    }

    pub fn modality_specs(&self) -> Vec<ModalitySpec> {
        self.modalities
            .iter()
            .map(|m| ModalitySpec {
                name: m.name.clone(),
                source: m.source.clone(),
            })
            .collect()
    }

    pub fn uses_words(&self) -> bool {
        self.modalities.iter().any(|m| matches!(m.source, ModalitySource::Words { .. }))
    }

    /// Network for the built dataset `shapes` using the configured sizes.
    pub fn network_config(&self, shapes: &[ModalityShape], vocab_size: usize) -> Result<NetworkConfig> {
        let hidden: Vec<usize> = self.modalities.iter().map(|m| m.subnet_hidden).collect();
        self.network_config_with(
            shapes,
            vocab_size,
            self.network.master_hidden,
            &hidden,
            self.network.dropout,
            self.network.l2,
        )
    }

    pub fn network_config_with(
        &self,
        shapes: &[ModalityShape],
        vocab_size: usize,
        master_hidden: usize,
        subnet_hidden: &[usize],
        dropout: f64,
        l2: f64,
    ) -> Result<NetworkConfig> {
        if shapes.len() != self.modalities.len() || subnet_hidden.len() != self.modalities.len() {
            return Err(Error::Config(format!(
                "{} modalities configured but {} shapes and {} sub-network sizes given",
                self.modalities.len(),
                shapes.len(),
                subnet_hidden.len()
            )));
        }
        let config = NetworkConfig {
            arrangement: self.arrangement()?,
            modalities: shapes
                .iter()
                .zip(subnet_hidden)
                .map(|(s, &h)| ModalityConfig {
                    name: s.name.clone(),
                    input: s.input,
                    timescale: s.timescale,
                    subnet_hidden: h,
                })
                .collect(),
            master_hidden,
            dropout_p: dropout,
            l2_lambda: l2,
            hidden_budget_check: self.network.hidden_budget_check,
            embedding: self.uses_words().then_some(EmbeddingConfig {
                vocab_size,
                dim: self.network.embedding_dim,
            }),
        };
        config.validate()?;
        Ok(config)
    }
}
