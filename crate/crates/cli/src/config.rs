//! Run configuration: a JSON file describing one training or evaluation
//! run, plus command-line overrides for the frequently varied knobs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use gridnewton_core::data::ScalingMode;
use gridnewton_core::net::NetConfig;
use gridnewton_core::partition::SplitStructure;
use gridnewton_core::sgd::SgdHyper;
use gridnewton_dist::context::MetricKind;
use gridnewton_dist::hyper::NewtonHyper;

/// How initial parameters are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// √n non-zeros per output unit, scaled by fan-in.
    #[default]
    Sparse,
    /// Dense N(0, 0.01).
    Dense,
}

fn default_seed() -> u64 {
    1
}

fn default_max_iter() -> usize {
    100
}

/// One run, as written in a config file. Regularization: when a hyper
/// section omits `c_reg`, the constant is set to the training-set size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Sparse-text training set.
    pub train_path: PathBuf,
    /// Sparse-text test set for metric tracking (optional).
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    /// Layer widths n_0 … n_L.
    pub layer_sizes: Vec<usize>,
    /// Neuron groups per layer, g_0 … g_L.
    pub groups_per_layer: Vec<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub metric: MetricName,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub transport: TransportName,
    #[serde(default)]
    pub scaling: ScalingMode,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub newton: NewtonHyper,
    #[serde(default)]
    pub sgd: SgdHyper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    #[default]
    Accuracy,
    Auc,
}

impl MetricName {
    pub fn kind(self) -> MetricKind {
        match self {
            MetricName::Accuracy => MetricKind::Accuracy,
            MetricName::Auc => MetricKind::Auc,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::Auc => "auc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TransportName {
    #[default]
    Inproc,
    Tcp,
}

/// Command-line overrides shared by the run subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct Overrides {
    /// Run configuration file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the configured transport.
    #[arg(long, value_enum)]
    pub transport: Option<TransportName>,
    /// Override the configured metric.
    #[arg(long, value_enum)]
    pub metric: Option<MetricName>,
    /// Override the configured iteration (or epoch) budget.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Directory for metrics.csv and model.ckpt; without it the CSV goes
    /// to standard output and no checkpoint is written.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply(&mut self, over: &Overrides) {
        if let Some(seed) = over.seed {
            self.seed = seed;
        }
        if let Some(t) = over.transport {
            self.transport = t;
        }
        if let Some(m) = over.metric {
            self.metric = m;
        }
        if let Some(n) = over.max_iter {
            self.max_iter = n;
        }
    }

    pub fn net(&self) -> Result<NetConfig> {
        let net = NetConfig::new(self.layer_sizes.clone())?;
        Ok(net)
    }

    pub fn split(&self) -> SplitStructure {
        SplitStructure::new(self.groups_per_layer.clone())
    }

    /// Checks the cross-field rules that serde cannot.
    pub fn validate(&self) -> Result<()> {
        let net = self.net()?;
        self.split().validate(&net)?;
        if self.metric == MetricName::Auc && *self.layer_sizes.last().unwrap() != 1 {
            bail!("metric auc requires a single output unit, net has {}", self.layer_sizes.last().unwrap());
        }
        Ok(())
    }

    /// Newton hyper-parameters with `c_reg` resolved against the
    /// training-set size (JSON cannot express the infinity default).
    pub fn newton_for(&self, l: usize) -> NewtonHyper {
        let mut h = self.newton.clone();
        if !h.c_reg.is_finite() {
            h.c_reg = l as f64;
        }
        h
    }

    /// Same resolution for the SG baseline.
    pub fn sgd_for(&self, l: usize) -> SgdHyper {
        let mut h = self.sgd.clone();
        if !h.c_reg.is_finite() {
            h.c_reg = l as f64;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "train_path": "train.txt",
                "layer_sizes": [4, 3, 2],
                "groups_per_layer": [1, 1, 1]
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.max_iter, 100);
        assert_eq!(cfg.metric, MetricName::Accuracy);
        assert_eq!(cfg.transport, TransportName::Inproc);
        assert_eq!(cfg.init, InitKind::Sparse);
        assert!(cfg.newton.c_reg.is_infinite());
        assert_eq!(cfg.newton_for(500).c_reg, 500.0);
        assert_eq!(cfg.sgd_for(500).c_reg, 500.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_hyper_sections_keep_other_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "train_path": "train.txt",
                "layer_sizes": [4, 3, 2],
                "groups_per_layer": [1, 2, 1],
                "newton": { "sample_rate": 0.2, "c_reg": 9.5 },
                "sgd": { "eta": 0.002 }
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.newton.sample_rate, 0.2);
        assert_eq!(cfg.newton.cg_max, 250);
        assert_eq!(cfg.newton_for(10).c_reg, 9.5);
        assert_eq!(cfg.sgd.eta, 0.002);
        assert_eq!(cfg.sgd.batch_size, 100);
    }

    #[test]
    fn auc_demands_a_single_output() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "train_path": "train.txt",
                "layer_sizes": [4, 3, 2],
                "groups_per_layer": [1, 1, 1],
                "metric": "auc"
            }"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: std::result::Result<RunConfig, _> = serde_json::from_str(
            r#"{
                "train_path": "t",
                "layer_sizes": [2, 1],
                "groups_per_layer": [1, 1],
                "lerning_rate": 3
            }"#,
        );
        assert!(r.is_err());
    }
}
