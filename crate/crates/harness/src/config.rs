//! Experiment configuration: TOML schemas and builders for core objects.
//!
//! ```toml
//! experiment = "robustness"
//! seed = 42
//!
//! [model]
//! kind = "uniform_pair"        # uniform_pair|point_mass|markov|low_entropy_mix|emoji
//! vocab_size = 3
//! max_len = 131072
//!
//! [key]
//! n = 16
//! block_len = 4096
//! alpha = 1e-8                 # per-decode soundness target
//! variant = "oracle"           # oracle|ldpc
//! num_codewords = 32
//! # align_del_rate = 0.5       # oracle only; enables shortened-input decoding
//! # align_err_rate = 0.3
//! # calibration_trials = 100000
//! # row_weight = 3             # ldpc
//! # num_rows = 2048
//!
//! [[channel.stages]]
//! stage = "sub"                # sub|del|edit
//! map = "hash_flip"            # cyclic_shift|synonym_clusters|hash_flip|custom
//! p = 0.25
//!
//! [trials]
//! runs = 200
//! null_runs = 10000
//! ```

use serde::{Deserialize, Serialize};

use tokmark_core::channel::{ChannelStage, EditStrategy, SubstitutionMap};
use tokmark_core::dist::TokenDist;
use tokmark_core::model::{ModelKind, ModelSpec};
use tokmark_core::prc::{AlignModel, PrcVariant};
use tokmark_core::token::{Token, Vocab};
use tokmark_core::watermark::{wm_gen, WatermarkKey, WmParams};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Undetectability,
    EmbeddingError,
    Robustness,
    Consistency,
    EditRobustness,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Undetectability => "undetectability",
            ExperimentKind::EmbeddingError => "embedding_error",
            ExperimentKind::Robustness => "robustness",
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::EditRobustness => "edit_robustness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub model: ModelCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<KeyCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelCfg>,
    #[serde(default)]
    pub trials: TrialCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCfg {
    pub kind: String,
    pub vocab_size: u32,
    pub max_len: u64,
    #[serde(default)]
    pub model_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emoji: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<Vec<f64>>>,
}

impl ModelCfg {
    pub fn uniform_pair(max_len: u64) -> Self {
        ModelCfg {
            kind: "uniform_pair".into(),
            vocab_size: 3,
            max_len,
            model_seed: 0,
            token: None,
            emoji: None,
            entropy_fraction: None,
            init: None,
            transitions: None,
        }
    }

    pub fn build(&self) -> Result<ModelSpec> {
        let vocab = Vocab::new(self.vocab_size)?;
        let kind = match self.kind.as_str() {
            "uniform_pair" => ModelKind::UniformPair,
            "point_mass" => ModelKind::PointMass {
                token: self
                    .token
                    .ok_or_else(|| HarnessError::Config("point_mass needs `token`".into()))?,
            },
            "emoji" => ModelKind::Emoji {
                emoji: self
                    .emoji
                    .ok_or_else(|| HarnessError::Config("emoji needs `emoji`".into()))?,
            },
            "low_entropy_mix" => ModelKind::LowEntropyMix {
                entropy_fraction: self.entropy_fraction.ok_or_else(|| {
                    HarnessError::Config("low_entropy_mix needs `entropy_fraction`".into())
                })?,
            },
            "markov" => ModelKind::Markov {
                init: self
                    .init
                    .clone()
                    .ok_or_else(|| HarnessError::Config("markov needs `init`".into()))?,
                transitions: self
                    .transitions
                    .clone()
                    .ok_or_else(|| HarnessError::Config("markov needs `transitions`".into()))?,
            },
            other => {
                return Err(HarnessError::Config(format!("unknown model kind `{other}`")));
            }
        };
        let mut spec = ModelSpec::new(kind, vocab, self.max_len)?;
        spec.model_seed = self.model_seed;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyCfg {
    pub n: u32,
    pub block_len: u32,
    pub alpha: f64,
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_codewords: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_weight: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_rows: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_del_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_err_rate: Option<f64>,
    /// Empirical calibration trials; 0 keeps the analytic thresholds (the
    /// alignment path then stays disabled).
    #[serde(default)]
    pub calibration_trials: u64,
    /// Theorem-regime robustness margin this run claims to exercise; the
    /// decode threshold itself always comes from `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl KeyCfg {
    pub fn variant(&self) -> Result<PrcVariant> {
        match self.variant.as_str() {
            "oracle" => {
                let align = match (self.align_del_rate, self.align_err_rate) {
                    (Some(d), Some(e)) => Some(AlignModel {
                        del_rate: d,
                        err_rate: e,
                    }),
                    (None, None) => None,
                    _ => {
                        return Err(HarnessError::Config(
                            "align_del_rate and align_err_rate must be set together".into(),
                        ))
                    }
                };
                Ok(PrcVariant::Oracle {
                    num_codewords: self.num_codewords.unwrap_or(1),
                    align,
                })
            }
            "ldpc" => Ok(PrcVariant::Ldpc {
                row_weight: self
                    .row_weight
                    .ok_or_else(|| HarnessError::Config("ldpc needs `row_weight`".into()))?,
                num_rows: self
                    .num_rows
                    .ok_or_else(|| HarnessError::Config("ldpc needs `num_rows`".into()))?,
            }),
            other => Err(HarnessError::Config(format!(
                "unknown key variant `{other}`"
            ))),
        }
    }

    /// Build (and, when configured, calibrate) a key bound to the model's
    /// vocabulary and output length.
    pub fn build(&self, model: &ModelCfg, master_seed: u64) -> Result<WatermarkKey> {
        let params = WmParams::new(self.n, self.block_len, model.max_len, model.vocab_size);
        let mut key = wm_gen(params, self.alpha, self.variant()?, master_seed)?;
        if self.calibration_trials > 0 {
            tokmark_core::prc::calibrate_threshold(
                &mut key.prc,
                self.alpha,
                self.calibration_trials,
                master_seed ^ 0xca11_b8,
            )?;
        }
        Ok(key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCfg {
    pub stages: Vec<StageCfg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCfg {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_table: Option<Vec<CustomRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomRow {
    pub token: u32,
    pub replacements: Vec<(u32, f64)>,
}

/// A channel stage resolved against a vocabulary. `HashFlipPerBlock` needs
/// the key's block hashes at application time, so it stays symbolic here.
#[derive(Debug, Clone)]
pub enum ResolvedStage {
    Core(ChannelStage),
    HashFlipPerBlock { p: f64 },
}

impl ChannelCfg {
    pub fn resolve(&self, vocab_size: u32) -> Result<Vec<ResolvedStage>> {
        self.stages
            .iter()
            .map(|s| s.resolve(vocab_size))
            .collect()
    }
}

impl StageCfg {
    fn resolve(&self, vocab_size: u32) -> Result<ResolvedStage> {
        match self.stage.as_str() {
            "sub" => {
                let p = self
                    .p
                    .ok_or_else(|| HarnessError::Config("sub stage needs `p`".into()))?;
                let map = self.map.as_deref().unwrap_or("cyclic_shift");
                let map = match map {
                    "cyclic_shift" => SubstitutionMap::CyclicShift { vocab_size },
                    "synonym_clusters" => SubstitutionMap::SynonymClusters {
                        vocab_size,
                        cluster_size: self.cluster_size.unwrap_or(2),
                    },
                    "custom" => {
                        let rows = self.custom_table.as_ref().ok_or_else(|| {
                            HarnessError::Config("custom map needs `custom_table`".into())
                        })?;
                        let mut table = vec![None; vocab_size as usize];
                        for row in rows {
                            let dist = TokenDist::new(
                                row.replacements
                                    .iter()
                                    .map(|&(t, p)| (Token(t), p))
                                    .collect(),
                            )?;
                            if row.token >= vocab_size {
                                return Err(HarnessError::Config(format!(
                                    "custom row token {} outside vocab",
                                    row.token
                                )));
                            }
                            table[row.token as usize] = Some(dist);
                        }
                        let table: Vec<TokenDist> = table
                            .into_iter()
                            .enumerate()
                            .map(|(i, d)| d.unwrap_or_else(|| TokenDist::point_mass(Token(i as u32))))
                            .collect();
                        SubstitutionMap::Custom { vocab_size, table }
                    }
                    "hash_flip" => return Ok(ResolvedStage::HashFlipPerBlock { p }),
                    other => {
                        return Err(HarnessError::Config(format!(
                            "unknown substitution map `{other}`"
                        )))
                    }
                };
                Ok(ResolvedStage::Core(ChannelStage::Sub { map, p }))
            }
            "del" => Ok(ResolvedStage::Core(ChannelStage::Del {
                p: self
                    .p
                    .ok_or_else(|| HarnessError::Config("del stage needs `p`".into()))?,
            })),
            "edit" => {
                let budget = self
                    .budget
                    .ok_or_else(|| HarnessError::Config("edit stage needs `budget`".into()))?;
                let strategy = match self.strategy.as_deref().unwrap_or("uniform_random") {
                    "uniform_random" => EditStrategy::UniformRandomEdits,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "unknown edit strategy `{other}` (block targeting is built \
                             white-box by the edit experiment)"
                        )))
                    }
                };
                Ok(ResolvedStage::Core(ChannelStage::Edit { budget, strategy }))
            }
            other => Err(HarnessError::Config(format!("unknown stage `{other}`"))),
        }
    }
}

/// Trial counts and experiment-specific knobs; minimums are enforced by the
/// experiment runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialCfg {
    pub runs: u64,
    pub null_runs: u64,
    pub samples: u64,
    pub repetitions: u64,
    pub min_blocks: u64,
    /// `exact` or `sampled` for the undetectability experiment.
    pub mode: String,
    /// Entropy fraction gate and bound parameter for block-level analyses.
    pub delta: f64,
    pub delta_prime: f64,
    /// Substitution-rate sweep for the robustness table.
    pub sweep: Vec<f64>,
    /// Detection-rate bound asserted at the primary channel setting.
    pub detect_bound: f64,
    /// Detector-level soundness certificate: alpha * decode calls.
    pub alpha_detector: f64,
    /// Per-block edit fraction the edit adversary aims at.
    pub eps_edit: f64,
    /// Fraction of the output covered by the entropy-bearing substring.
    pub alpha_coverage: f64,
    /// Consistency experiments: whether the model is expected to pass.
    pub expect_accept: bool,
}

impl Default for TrialCfg {
    fn default() -> Self {
        TrialCfg {
            runs: 200,
            null_runs: 0,
            samples: 100_000,
            repetitions: 100,
            min_blocks: 2000,
            mode: "exact".into(),
            delta: 1.0,
            delta_prime: 1.0,
            sweep: Vec::new(),
            detect_bound: 0.99,
            alpha_detector: 1e-3,
            eps_edit: 0.75,
            alpha_coverage: 1.0,
            expect_accept: true,
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| HarnessError::Toml(e.to_string()))
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| HarnessError::Toml(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_toml() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Robustness,
            seed: 7,
            model: ModelCfg::uniform_pair(4096),
            key: Some(KeyCfg {
                n: 8,
                block_len: 256,
                alpha: 1e-6,
                variant: "oracle".into(),
                num_codewords: Some(8),
                row_weight: None,
                num_rows: None,
                align_del_rate: None,
                align_err_rate: None,
                calibration_trials: 0,
                epsilon: Some(0.01),
            }),
            channel: Some(ChannelCfg {
                stages: vec![StageCfg {
                    stage: "sub".into(),
                    p: Some(0.25),
                    map: Some("cyclic_shift".into()),
                    cluster_size: None,
                    custom_table: None,
                    budget: None,
                    strategy: None,
                }],
            }),
            trials: TrialCfg::default(),
        };
        let text = config_to_toml(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn model_builders_validate() {
        let mut cfg = ModelCfg::uniform_pair(64);
        assert!(cfg.build().is_ok());
        cfg.kind = "no_such_model".into();
        assert!(cfg.build().is_err());
        let mut pm = ModelCfg::uniform_pair(64);
        pm.kind = "point_mass".into();
        assert!(pm.build().is_err()); // missing token
        pm.token = Some(0);
        assert!(pm.build().is_ok());
    }

    #[test]
    fn bad_toml_is_a_config_error() {
        assert!(parse_config("experiment = ").is_err());
        assert!(parse_config("experiment = \"nope\"\nseed = 1").is_err());
    }
}
