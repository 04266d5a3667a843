//! Variable partitioning across layers.
//!
//! Neurons of each layer are cut into contiguous, near-equal groups; a
//! partition is a pair of adjacent-layer groups `(T_{m-1}, T_m)` and owns the
//! weight block between them. Biases of layer m belong to the partitions
//! whose `T_{m-1}` is the first group of layer m−1, so every parameter has
//! exactly one owner. The cost model mirrors the analytical per-partition
//! accounting of memory, compute, and tree-based communication.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::net::NetConfig;

/// Number of neuron groups per layer, `g_0..g_L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStructure {
    pub groups_per_layer: Vec<usize>,
}

impl SplitStructure {
    pub fn new(groups_per_layer: Vec<usize>) -> Self {
        SplitStructure { groups_per_layer }
    }

    pub fn validate(&self, cfg: &NetConfig) -> Result<()> {
        if self.groups_per_layer.len() != cfg.layer_sizes.len() {
            return Err(CoreError::InvalidConfig(format!(
                "split has {} entries for {} layers",
                self.groups_per_layer.len(),
                cfg.layer_sizes.len()
            )));
        }
        for (m, (&g, &n)) in self
            .groups_per_layer
            .iter()
            .zip(&cfg.layer_sizes)
            .enumerate()
        {
            if g == 0 || g > n {
                return Err(CoreError::InvalidConfig(format!(
                    "layer {m}: {g} groups for {n} neurons"
                )));
            }
        }
        Ok(())
    }

    /// Total partition count `P = Σ_{m=1..L} g_{m-1}·g_m`.
    pub fn partition_count(&self) -> usize {
        self.groups_per_layer
            .windows(2)
            .map(|w| w[0] * w[1])
            .sum()
    }
}

/// Half-open neuron index range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronRange {
    pub start: usize,
    pub end: usize,
}

impl NeuronRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Contiguous near-equal ranges covering `0..n`; the first `n % g` groups
/// take the extra neuron, so sizes differ by at most one.
pub fn neuron_groups(n: usize, g: usize) -> Vec<NeuronRange> {
    assert!(g >= 1 && g <= n, "{g} groups for {n} neurons");
    let base = n / g;
    let extra = n % g;
    let mut out = Vec::with_capacity(g);
    let mut start = 0;
    for k in 0..g {
        let len = base + usize::from(k < extra);
        out.push(NeuronRange { start, end: start + len });
        start += len;
    }
    out
}

/// One partition of the variable grid: the weight block between group
/// `in_group` of layer m−1 and group `out_group` of layer m.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Position in the canonical (layer, in_group, out_group) ordering;
    /// doubles as the worker id.
    pub index: usize,
    /// Weight layer m, 1-based.
    pub layer: usize,
    /// Index of `T_{m-1}` among layer m−1's groups.
    pub in_group: usize,
    /// Index of `T_m` among layer m's groups.
    pub out_group: usize,
    pub in_range: NeuronRange,
    pub out_range: NeuronRange,
    /// True iff `T_{m-1}` is the first group of layer m−1; such partitions
    /// also own `b^m_j` for their `j ∈ T_m`.
    pub owns_bias: bool,
}

impl PartitionSpec {
    /// Owned weight-matrix entries, `|T_{m-1}|·|T_m|`.
    pub fn weight_vars(&self) -> usize {
        self.in_range.len() * self.out_range.len()
    }

    /// Owned parameters including bias entries.
    pub fn total_vars(&self) -> usize {
        self.weight_vars() + if self.owns_bias { self.out_range.len() } else { 0 }
    }
}

/// Builds the full partition grid in canonical order
/// (layer asc, in_group asc, out_group asc).
pub fn build_partitions(cfg: &NetConfig, split: &SplitStructure) -> Result<Vec<PartitionSpec>> {
    cfg.validate()?;
    split.validate(cfg)?;
    let mut specs = Vec::with_capacity(split.partition_count());
    for m in 1..=cfg.depth() {
        let in_groups = neuron_groups(cfg.width(m - 1), split.groups_per_layer[m - 1]);
        let out_groups = neuron_groups(cfg.width(m), split.groups_per_layer[m]);
        for (a, &in_range) in in_groups.iter().enumerate() {
            for (b, &out_range) in out_groups.iter().enumerate() {
                specs.push(PartitionSpec {
                    index: specs.len(),
                    layer: m,
                    in_group: a,
                    out_group: b,
                    in_range,
                    out_range,
                    owns_bias: a == 0,
                });
            }
        }
    }
    Ok(specs)
}

/// Extremes of per-partition weight-block sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub max_vars: usize,
    pub min_vars: usize,
    /// `max_vars / min_vars` over the `|T_{m-1}|·|T_m|` block sizes.
    pub ratio: f64,
}

pub fn balance_report(partitions: &[PartitionSpec]) -> BalanceReport {
    assert!(!partitions.is_empty(), "no partitions");
    let sizes = partitions.iter().map(PartitionSpec::weight_vars);
    let max_vars = sizes.clone().max().unwrap();
    let min_vars = sizes.min().unwrap();
    BalanceReport {
        max_vars,
        min_vars,
        ratio: max_vars as f64 / min_vars as f64,
    }
}

/// Abstract communication cost constants: `alpha` is the start-up cost per
/// transfer, `beta` the per-element transfer rate, `gamma` the per-element
/// addition cost. The defaults are placeholders for relative comparisons,
/// not calibrated measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        CostModelParams { alpha: 1e-4, beta: 1e-9, gamma: 1e-10 }
    }
}

/// Analytical per-partition cost account; units are abstract (element counts
/// for memory/compute, alpha/beta/gamma-weighted time for communication).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCost {
    pub index: usize,
    /// `(|T_{m-1}|·|T_m| + |T_m|) + l·(|T_{m-1}|+|T_m|) + |S|·n_L·(|T_{m-1}|+|T_m|)`.
    pub memory: f64,
    /// Function + gradient (both `l·|T_{m-1}|·|T_m|`), Jacobian
    /// (`|S|·n_L·|T_{m-1}|·|T_m|`), plus one matrix-vector product
    /// (`|S|·(|T_{m-1}|·|T_m| + n_L·|T_m|)`, i.e. per CG iteration).
    pub compute: f64,
    /// Jacobian-stage reduce: `⌈log₂(n_m/|T_m|)⌉·(α + (β+γ)·|S|·n_L·|T_{m-1}|)`;
    /// zero for layer-1 partitions, which do not continue the backward sweep.
    pub reduce_comm: f64,
    /// Jacobian-stage broadcast: `⌈log₂(n_{m-2}/|T_{m-2}|)⌉·(α + β·|S|·n_L·|T_{m-1}|)`;
    /// zero for layer-1 partitions, which end the backward sweep.
    pub bcast_comm: f64,
}

/// Whole-grid cost report. Groups that do not share members communicate in
/// parallel, so the summary keeps per-partition rows plus their maxima; it
/// does not model contention between overlapping collectives.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub per_partition: Vec<PartitionCost>,
    pub max_memory: f64,
    pub max_compute: f64,
    pub max_comm: f64,
}

/// Evaluates the analytical cost model for every partition.
///
/// `l` is the training-set size, `sample` the Gauss-Newton subsample size
/// `|S|` (use `l` when no subsampling is applied), `n_l` the output width.
pub fn cost_estimate(
    cfg: &NetConfig,
    split: &SplitStructure,
    partitions: &[PartitionSpec],
    l: usize,
    n_l: usize,
    sample: usize,
    params: &CostModelParams,
) -> CostReport {
    let lf = l as f64;
    let sf = sample as f64;
    let nlf = n_l as f64;

    let per_partition: Vec<PartitionCost> = partitions
        .iter()
        .map(|p| {
            let tin = p.in_range.len() as f64;
            let tout = p.out_range.len() as f64;
            let memory = (tin * tout + tout) + lf * (tin + tout) + sf * nlf * (tin + tout);
            let compute = lf * tin * tout            // function evaluation
                + lf * tin * tout                    // gradient evaluation
                + sf * nlf * tin * tout              // Jacobian factors
                + sf * (tin * tout + nlf * tout);    // one Gauss-Newton product
            // The reduce tree sums n_m / |T_m| vectors; the result is then
            // broadcast to every in-group of the layer below, i.e. to
            // g_{m-2} partitions.
            let reduce_comm = if p.layer >= 2 {
                let depth = (cfg.width(p.layer) as f64 / tout).log2().ceil();
                depth * (params.alpha + (params.beta + params.gamma) * sf * nlf * tin)
            } else {
                0.0
            };
            let bcast_comm = if p.layer >= 2 {
                let depth = (split.groups_per_layer[p.layer - 2] as f64).log2().ceil();
                depth * (params.alpha + params.beta * sf * nlf * tin)
            } else {
                0.0
            };
            PartitionCost { index: p.index, memory, compute, reduce_comm, bcast_comm }
        })
        .collect();

    let fold_max = |f: &dyn Fn(&PartitionCost) -> f64| {
        per_partition.iter().map(|c| f(c)).fold(0.0, f64::max)
    };
    CostReport {
        max_memory: fold_max(&|c| c.memory),
        max_compute: fold_max(&|c| c.compute),
        max_comm: fold_max(&|c| c.reduce_comm + c.bcast_comm),
        per_partition,
    }
}
