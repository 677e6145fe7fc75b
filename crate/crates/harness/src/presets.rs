//! Named experiment presets. `small` variants run in seconds and back the
//! CI suite; `default` variants are the full-size runs the acceptance suite
//! asserts against.

use crate::config::{
    ChannelCfg, ExperimentConfig, ExperimentKind, KeyCfg, ModelCfg, StageCfg, TrialCfg,
};

pub const PRESET_NAMES: &[&str] = &[
    "undetectability-exact",
    "undetectability-sampled",
    "embedding-error",
    "embedding-error-1024",
    "embedding-error-point-mass",
    "embedding-error-low-entropy",
    "robustness-sub",
    "robustness-sub-small",
    "robustness-sub-del",
    "robustness-sub-del-feasible",
    "consistency-iid",
    "consistency-emoji",
    "edit-robustness",
];

/// Presets exercised by the bundled full suite, in run order.
pub const SUITE: &[&str] = &[
    "undetectability-exact",
    "undetectability-sampled",
    "embedding-error",
    "embedding-error-1024",
    "embedding-error-point-mass",
    "embedding-error-low-entropy",
    "robustness-sub",
    "robustness-sub-del-feasible",
    "consistency-iid",
    "consistency-emoji",
    "edit-robustness",
];

/// Reduced-size suite for time-budgeted CI runs.
pub const SUITE_CI: &[&str] = &[
    "undetectability-exact",
    "embedding-error",
    "robustness-sub-small",
    "consistency-iid",
    "consistency-emoji",
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "undetectability-exact" => ExperimentConfig {
            experiment: ExperimentKind::Undetectability,
            seed: 1001,
            model: markov_model(64),
            key: None,
            channel: None,
            trials: TrialCfg {
                mode: "exact".into(),
                ..TrialCfg::default()
            },
        },
        "undetectability-sampled" => ExperimentConfig {
            experiment: ExperimentKind::Undetectability,
            seed: 1002,
            model: ModelCfg::uniform_pair(128),
            key: Some(KeyCfg {
                n: 1,
                block_len: 64,
                alpha: 1e-3,
                variant: "oracle".into(),
                num_codewords: Some(2),
                row_weight: None,
                num_rows: None,
                align_del_rate: None,
                align_err_rate: None,
                calibration_trials: 0,
                epsilon: None,
            }),
            channel: None,
            trials: TrialCfg {
                mode: "sampled".into(),
                samples: 100_000,
                ..TrialCfg::default()
            },
        },
        "embedding-error" => embedding_preset(1003, 256, 500),
        "embedding-error-1024" => embedding_preset(1004, 1024, 500),
        "embedding-error-point-mass" => {
            let mut cfg = embedding_preset(1005, 256, 150);
            cfg.model = ModelCfg {
                kind: "point_mass".into(),
                vocab_size: 2,
                max_len: 4096,
                model_seed: 0,
                token: Some(0),
                emoji: None,
                entropy_fraction: None,
                init: None,
                transitions: None,
            };
            cfg.trials.delta = 0.0;
            cfg.trials.delta_prime = 0.0;
            cfg
        }
        "embedding-error-low-entropy" => {
            let mut cfg = embedding_preset(1006, 256, 500);
            cfg.model = ModelCfg {
                kind: "low_entropy_mix".into(),
                vocab_size: 3,
                max_len: 4096,
                model_seed: 7,
                token: None,
                emoji: None,
                entropy_fraction: Some(0.5),
                init: None,
                transitions: None,
            };
            cfg.trials.delta = 0.5;
            cfg.trials.delta_prime = 0.125;
            cfg
        }
        "robustness-sub" => ExperimentConfig {
            experiment: ExperimentKind::Robustness,
            seed: 1007,
            model: ModelCfg::uniform_pair(131_072),
            key: Some(KeyCfg {
                n: 16,
                block_len: 4096,
                alpha: 1e-8,
                variant: "oracle".into(),
                num_codewords: Some(32),
                row_weight: None,
                num_rows: None,
                align_del_rate: None,
                align_err_rate: None,
                calibration_trials: 0,
                epsilon: Some(0.01),
            }),
            channel: Some(sub_channel("hash_flip", 0.25)),
            trials: TrialCfg {
                runs: 200,
                null_runs: 10_000,
                delta: 1.0,
                detect_bound: 0.99,
                alpha_detector: 1e-3,
                ..TrialCfg::default()
            },
        },
        "robustness-sub-small" => ExperimentConfig {
            experiment: ExperimentKind::Robustness,
            seed: 1008,
            model: ModelCfg::uniform_pair(8192),
            key: Some(KeyCfg {
                n: 4,
                block_len: 1024,
                alpha: 1e-8,
                variant: "oracle".into(),
                num_codewords: Some(8),
                row_weight: None,
                num_rows: None,
                align_del_rate: None,
                align_err_rate: None,
                calibration_trials: 0,
                epsilon: Some(0.02),
            }),
            channel: Some(sub_channel("hash_flip", 0.25)),
            trials: TrialCfg {
                runs: 50,
                null_runs: 1_000,
                delta: 1.0,
                detect_bound: 0.98,
                alpha_detector: 1e-3,
                sweep: vec![0.1, 0.4],
                ..TrialCfg::default()
            },
        },
        "robustness-sub-del" => subdel_preset(1009, 0.5, 0.95),
        "robustness-sub-del-feasible" => subdel_preset(1010, 0.3, 0.95),
        "consistency-iid" => ExperimentConfig {
            experiment: ExperimentKind::Consistency,
            seed: 1011,
            model: ModelCfg::uniform_pair(100_001),
            key: None,
            channel: None,
            trials: TrialCfg {
                samples: 100_000,
                repetitions: 100,
                expect_accept: true,
                ..TrialCfg::default()
            },
        },
        "consistency-emoji" => ExperimentConfig {
            experiment: ExperimentKind::Consistency,
            seed: 1012,
            model: ModelCfg {
                kind: "emoji".into(),
                vocab_size: 4,
                max_len: 100_001,
                model_seed: 0,
                token: None,
                emoji: Some(2),
                entropy_fraction: None,
                init: None,
                transitions: None,
            },
            key: None,
            channel: None,
            trials: TrialCfg {
                samples: 100_000,
                repetitions: 100,
                expect_accept: false,
                ..TrialCfg::default()
            },
        },
        "edit-robustness" => ExperimentConfig {
            experiment: ExperimentKind::EditRobustness,
            seed: 1013,
            model: ModelCfg::uniform_pair(32_768),
            key: Some(KeyCfg {
                n: 32,
                block_len: 512,
                alpha: 1e-2,
                variant: "oracle".into(),
                num_codewords: Some(1),
                row_weight: None,
                num_rows: None,
                align_del_rate: Some(0.1),
                align_err_rate: Some(0.3),
                calibration_trials: 2_000,
                epsilon: None,
            }),
            channel: None,
            trials: TrialCfg {
                runs: 200,
                delta: 1.0,
                alpha_coverage: 1.0,
                eps_edit: 0.75,
                detect_bound: 0.95,
                ..TrialCfg::default()
            },
        },
        _ => return None,
    };
    Some(cfg)
}

fn embedding_preset(seed: u64, block_len: u32, runs: u64) -> ExperimentConfig {
    let max_len = u64::from(block_len) * 16;
    ExperimentConfig {
        experiment: ExperimentKind::EmbeddingError,
        seed,
        model: ModelCfg::uniform_pair(max_len),
        key: Some(KeyCfg {
            n: 8,
            block_len,
            alpha: 1e-3,
            variant: "oracle".into(),
            num_codewords: Some(16),
            row_weight: None,
            num_rows: None,
            align_del_rate: None,
            align_err_rate: None,
            calibration_trials: 0,
            epsilon: None,
        }),
        channel: None,
        trials: TrialCfg {
            runs,
            min_blocks: 2000,
            delta: 1.0,
            delta_prime: 1.0,
            ..TrialCfg::default()
        },
    }
}

fn subdel_preset(seed: u64, del_rate: f64, detect_bound: f64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::Robustness,
        seed,
        model: ModelCfg::uniform_pair(32_768),
        key: Some(KeyCfg {
            n: 16,
            block_len: 1024,
            alpha: 1e-3,
            variant: "oracle".into(),
            num_codewords: Some(1),
            row_weight: None,
            num_rows: None,
            align_del_rate: Some(del_rate),
            align_err_rate: Some(0.3),
            calibration_trials: 10_000,
            epsilon: None,
        }),
        channel: Some(ChannelCfg {
            stages: vec![
                StageCfg {
                    stage: "sub".into(),
                    p: Some(0.1),
                    map: Some("hash_flip".into()),
                    cluster_size: None,
                    custom_table: None,
                    budget: None,
                    strategy: None,
                },
                StageCfg {
                    stage: "del".into(),
                    p: Some(del_rate),
                    map: None,
                    cluster_size: None,
                    custom_table: None,
                    budget: None,
                    strategy: None,
                },
            ],
        }),
        trials: TrialCfg {
            runs: 200,
            null_runs: 0,
            delta: 1.0,
            detect_bound,
            alpha_detector: 1e-1,
            ..TrialCfg::default()
        },
    }
}

fn sub_channel(map: &str, p: f64) -> ChannelCfg {
    ChannelCfg {
        stages: vec![StageCfg {
            stage: "sub".into(),
            p: Some(p),
            map: Some(map.into()),
            cluster_size: None,
            custom_table: None,
            budget: None,
            strategy: None,
        }],
    }
}

fn markov_model(max_len: u64) -> ModelCfg {
    ModelCfg {
        kind: "markov".into(),
        vocab_size: 4,
        max_len,
        model_seed: 0,
        token: None,
        emoji: None,
        entropy_fraction: None,
        init: None,
        transitions: None,
    }
    .with_markov()
}

trait MarkovExt {
    fn with_markov(self) -> Self;
}

impl MarkovExt for ModelCfg {
    fn with_markov(mut self) -> Self {
        self.init = Some(vec![0.5, 0.25, 0.25]);
        self.transitions = Some(vec![
            vec![0.7, 0.2, 0.1],
            vec![0.25, 0.5, 0.25],
            vec![0.4, 0.1, 0.5],
        ]);
        self
    }
}
