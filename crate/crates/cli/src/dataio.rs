//! Dataset plumbing for the run subcommands: sparse-text loading, feature
//! scaling fitted on the training set, label mapping, and target encoding.

use std::path::Path;

use anyhow::{bail, Context, Result};

use gridnewton_core::data::{
    apply_scaling, fit_scaling, load_sparse_text, LabelMap, SparseDataset,
};
use gridnewton_core::init::{init_dense, init_sparse};
use gridnewton_core::net::{Batch, NetConfig, Theta};
use gridnewton_dist::runner::TestSet;

use crate::config::{InitKind, RunConfig};

/// Everything a training or evaluation run needs in memory.
pub struct LoadedData {
    pub train: Batch,
    pub map: LabelMap,
    pub test: Option<TestSet>,
}

/// Loads one sparse-text dataset and checks it fits the input layer.
pub fn load_one(path: &Path, n0: usize) -> Result<SparseDataset> {
    let ds = load_sparse_text(path, n0)
        .with_context(|| format!("cannot load dataset {}", path.display()))?;
    if ds.n_features > n0 {
        bail!(
            "{} has features up to index {}, but the net's input width is {}",
            path.display(),
            ds.n_features,
            n0
        );
    }
    Ok(ds)
}

/// Loads, scales, and encodes the configured datasets. Scaling parameters
/// are fitted on the training set alone and applied to both sets.
pub fn load_run_data(cfg: &RunConfig, net: &NetConfig) -> Result<LoadedData> {
    let n0 = net.width(0);
    let n_l = net.width(net.depth());

    let mut train_ds = load_one(&cfg.train_path, n0)?;
    let mut test_ds = match &cfg.test_path {
        Some(p) => Some(load_one(p, n0)?),
        None => None,
    };

    let spec = fit_scaling(cfg.scaling, &[&train_ds])?;
    apply_scaling(&mut train_ds, &spec);
    if let Some(ds) = test_ds.as_mut() {
        apply_scaling(ds, &spec);
    }

    let map = LabelMap::fit(&train_ds.labels, n_l)?;
    let y = map.targets(&train_ds.labels)?;
    let train = Batch {
        x: train_ds.to_dense(),
        y,
    };
    let test = test_ds.map(|ds| TestSet {
        x: ds.to_dense(),
        labels: ds.labels.clone(),
        map: map.clone(),
    });

    Ok(LoadedData { train, map, test })
}

/// Draws the configured initial parameters.
pub fn initial_theta(cfg: &RunConfig, net: &NetConfig) -> Theta {
    match cfg.init {
        InitKind::Sparse => init_sparse(net, cfg.seed),
        InitKind::Dense => init_dense(net, cfg.seed),
    }
}
