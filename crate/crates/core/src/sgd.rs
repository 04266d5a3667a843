//! Mini-batch stochastic gradient baseline with momentum, exponential
//! learning-rate decay, and validation-based early stopping.
//!
//! The schedule: each epoch shuffles the training instances into `ceil(l/b)`
//! disjoint mini-batches; every update applies
//! `v <- m v - max(eta / gamma^r, eta_min) g` and `theta <- theta + v`, where
//! `r` counts updates from 0 and the momentum `m` ramps linearly from `m0` to
//! `mf` over the first `min_epochs` epochs. After each epoch the regularized
//! objective is evaluated on a held-out validation split; training stops once
//! at least `min_epochs` epochs have run and the objective has failed to
//! improve by a relative factor `x_tol` for `patience` consecutive epochs.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::net::{gradient_ref, objective_ref, Batch, NetConfig, Theta};
use crate::rng::Rng;

/// Hyper-parameters of the mini-batch SG baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdHyper {
    /// Initial learning rate.
    pub eta: f64,
    /// Learning-rate floor.
    pub eta_min: f64,
    /// Epochs before early stopping may trigger; also the momentum ramp span.
    pub min_epochs: usize,
    /// Relative improvement threshold for the early-stopping counter.
    pub x_tol: f64,
    /// Consecutive non-improving epochs tolerated after `min_epochs`.
    pub patience: usize,
    /// Mini-batch size.
    pub batch_size: usize,
    /// Initial momentum coefficient.
    pub m0: f64,
    /// Final momentum coefficient.
    pub mf: f64,
    /// Per-update learning-rate decay base.
    pub gamma_decay: f64,
    /// Regularization constant C (may be `f64::INFINITY` for no penalty).
    #[serde(deserialize_with = "c_reg_from_json")]
    pub c_reg: f64,
}

/// Reads a regularization constant, accepting `null` as "no penalty".
/// JSON cannot carry IEEE infinities, so serializing the infinite default
/// produces `null`; this keeps such configurations round-trippable.
pub fn c_reg_from_json<'de, D>(d: D) -> std::result::Result<f64, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl Default for SgdHyper {
    fn default() -> Self {
        SgdHyper {
            eta: 0.01,
            eta_min: 1e-6,
            min_epochs: 200,
            x_tol: 1e-5,
            patience: 10,
            batch_size: 100,
            m0: 0.9,
            mf: 0.99,
            gamma_decay: 1.000_000_2,
            c_reg: f64::INFINITY,
        }
    }
}

impl SgdHyper {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("eta", self.eta),
            ("eta_min", self.eta_min),
            ("x_tol", self.x_tol),
            ("m0", self.m0),
            ("mf", self.mf),
            ("gamma_decay", self.gamma_decay),
            ("c_reg", self.c_reg),
        ];
        for (name, v) in positives {
            if !(v > 0.0) {
                return Err(CoreError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.min_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(CoreError::InvalidConfig(
                "min_epochs, patience, and batch_size must be positive".into(),
            ));
        }
        if !(self.m0 <= self.mf && self.mf < 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "momentum must satisfy m0 <= mf < 1, got m0={} mf={}",
                self.m0, self.mf
            )));
        }
        Ok(())
    }
}

/// `max(eta / gamma^r, eta_min)`, the step size of update number `r`
/// (counted from 0).
pub fn decayed_learning_rate(eta: f64, gamma: f64, r: u64, eta_min: f64) -> f64 {
    let pow = gamma.powi(r.min(i32::MAX as u64) as i32);
    (eta / pow).max(eta_min)
}

/// Gradient of the objective restricted to the instances in `idx`:
/// `theta / C + mean over idx of per-instance loss gradients`.
pub fn minibatch_gradient(
    cfg: &NetConfig,
    theta: &Theta,
    data: &Batch,
    idx: &[usize],
    c: f64,
) -> Result<Theta> {
    if idx.is_empty() {
        return Err(CoreError::InvalidConfig("empty mini-batch".into()));
    }
    let sub = Batch {
        x: data.x.select(Axis(0), idx),
        y: data.y.select(Axis(0), idx),
    };
    Ok(gradient_ref(cfg, theta, &sub, c))
}

/// Shuffles `0..l` and cuts it into `ceil(l / batch_size)` consecutive
/// pieces. Batch membership is random; within a batch, indices are sorted
/// ascending so that summation order does not depend on the permutation.
pub fn shuffled_batches(l: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..l).collect();
    rng.shuffle(&mut perm);
    perm.chunks(batch_size)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect()
}

/// Result of an SG run.
#[derive(Debug, Clone)]
pub struct SgdOutcome {
    pub theta: Theta,
    /// Epochs completed.
    pub epochs: usize,
    /// Validation objective after the final epoch.
    pub final_validation_obj: f64,
    /// Total mini-batch updates applied.
    pub updates: u64,
}

/// Trains by mini-batch SG from the given starting point.
///
/// `data` is the full training set (targets already encoded); a seeded 90/10
/// split carves out the validation instances used by the stopping rule.
/// `max_epochs` is a hard cap on top of the early-stopping logic (use
/// `usize::MAX` for none). `on_epoch(epoch, validation_obj, theta)` runs after
/// every epoch, with epochs numbered from 1.
pub fn sgd_train(
    cfg: &NetConfig,
    data: &Batch,
    hyper: &SgdHyper,
    seed: u64,
    max_epochs: usize,
    mut theta: Theta,
    mut on_epoch: impl FnMut(usize, f64, &Theta),
) -> Result<SgdOutcome> {
    cfg.validate()?;
    hyper.validate()?;
    data.validate(cfg)?;
    if theta.len() != cfg.num_params() {
        return Err(CoreError::Shape(format!(
            "theta has {} entries, net needs {}",
            theta.len(),
            cfg.num_params()
        )));
    }
    let l = data.x.nrows();
    let n_train = ((0.9 * l as f64).round() as usize).min(l);
    let mut split_rng = Rng::for_purpose(seed, "sgd/valsplit", 0);
    let train_idx = split_rng.sample_indices(l, n_train);
    let mut in_train = vec![false; l];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let val_idx: Vec<usize> = (0..l).filter(|&i| !in_train[i]).collect();
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(CoreError::InvalidConfig(format!(
            "dataset of {l} instances is too small for a 90/10 train/validation split"
        )));
    }
    let train = Batch {
        x: data.x.select(Axis(0), &train_idx),
        y: data.y.select(Axis(0), &train_idx),
    };
    let val = Batch {
        x: data.x.select(Axis(0), &val_idx),
        y: data.y.select(Axis(0), &val_idx),
    };

    let mut shuffle_rng = Rng::for_purpose(seed, "sgd/shuffle", 0);
    let mut v = vec![0.0; theta.len()];
    let mut epoch = 0usize;
    let mut r: u64 = 0;
    let mut counter: i64 = hyper.patience as i64;
    let mut lowest = f64::INFINITY;
    let mut h = f64::INFINITY;
    while (epoch < hyper.min_epochs || counter > 0) && epoch < max_epochs {
        let alpha = (epoch as f64 / hyper.min_epochs as f64).min(1.0);
        let m = (1.0 - alpha) * hyper.m0 + alpha * hyper.mf;
        for batch in shuffled_batches(train.x.nrows(), hyper.batch_size, &mut shuffle_rng) {
            let g = minibatch_gradient(cfg, &theta, &train, &batch, hyper.c_reg)?;
            let lr = decayed_learning_rate(hyper.eta, hyper.gamma_decay, r, hyper.eta_min);
            for ((vj, tj), gj) in v.iter_mut().zip(theta.iter_mut()).zip(&g) {
                *vj = m * *vj - lr * gj;
                *tj += *vj;
            }
            r += 1;
        }
        epoch += 1;
        h = objective_ref(cfg, &theta, &val, hyper.c_reg);
        if h < (1.0 - hyper.x_tol) * lowest {
            counter = hyper.patience as i64;
        } else {
            counter -= 1;
        }
        lowest = lowest.min(h);
        on_epoch(epoch, h, &theta);
    }
    Ok(SgdOutcome {
        theta,
        epochs: epoch,
        final_validation_obj: h,
        updates: r,
    })
}
