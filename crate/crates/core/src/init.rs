//! Weight initialization schemes.
//!
//! Both schemes are deterministic functions of `(config, seed)`: the draw
//! order is layer-major, then output neuron, so the same seed produces the
//! same parameter vector no matter how the variables are later partitioned.

use crate::net::{NetConfig, Theta};
use crate::rng::Rng;

/// Sparse initialization: per output neuron of layer m, exactly
/// `⌈√n_{m-1}⌉` incoming weights are drawn from N(0, 1); all other weights
/// and every bias stay zero.
pub fn init_sparse(cfg: &NetConfig, seed: u64) -> Theta {
    let mut rng = Rng::for_purpose(seed, "init/sparse", 0);
    let mut theta = vec![0.0; cfg.num_params()];
    for m in 1..=cfg.depth() {
        let fan_in = cfg.width(m - 1);
        let nonzeros = (fan_in as f64).sqrt().ceil() as usize;
        for j in 0..cfg.width(m) {
            for t in rng.sample_indices(fan_in, nonzeros) {
                theta[cfg.weight_index(m, t, j)] = rng.normal();
            }
        }
    }
    theta
}

/// Dense initialization: every weight of layer m drawn from N(0, σ_m²) with
/// σ = 0.1 for the first layer, 0.001 for the output layer, and 0.05 for the
/// remaining hidden layers; biases zero. For a single-layer network the
/// output-layer σ wins.
pub fn init_dense(cfg: &NetConfig, seed: u64) -> Theta {
    let mut rng = Rng::for_purpose(seed, "init/dense", 0);
    let mut theta = vec![0.0; cfg.num_params()];
    let depth = cfg.depth();
    for m in 1..=depth {
        let sigma = if m == depth {
            0.001
        } else if m == 1 {
            0.1
        } else {
            0.05
        };
        for j in 0..cfg.width(m) {
            for t in 0..cfg.width(m - 1) {
                theta[cfg.weight_index(m, t, j)] = sigma * rng.normal();
            }
        }
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_nonzeros(cfg: &NetConfig, theta: &[f64], m: usize, j: usize) -> usize {
        (0..cfg.width(m - 1))
            .filter(|&t| theta[cfg.weight_index(m, t, j)] != 0.0)
            .count()
    }

    #[test]
    fn sparse_nonzero_count_is_ceil_sqrt_fan_in() {
        // n_{m-1} = 16 → exactly 4 nonzero incoming weights per neuron.
        let cfg = NetConfig::new(vec![16, 8, 5]).unwrap();
        let theta = init_sparse(&cfg, 7);
        for j in 0..8 {
            assert_eq!(column_nonzeros(&cfg, &theta, 1, j), 4);
        }
        // Layer 2 fan-in 8 → ⌈√8⌉ = 3.
        for j in 0..5 {
            assert_eq!(column_nonzeros(&cfg, &theta, 2, j), 3);
        }
    }

    #[test]
    fn sparse_biases_are_zero() {
        let cfg = NetConfig::new(vec![9, 4, 3]).unwrap();
        let theta = init_sparse(&cfg, 21);
        for m in 1..=2 {
            for j in 0..cfg.width(m) {
                assert_eq!(theta[cfg.bias_index(m, j)], 0.0);
            }
        }
    }

    #[test]
    fn same_seed_same_theta() {
        let cfg = NetConfig::new(vec![10, 7, 4]).unwrap();
        assert_eq!(init_sparse(&cfg, 5), init_sparse(&cfg, 5));
        assert_eq!(init_dense(&cfg, 5), init_dense(&cfg, 5));
        assert_ne!(init_sparse(&cfg, 5), init_sparse(&cfg, 6));
    }

    #[test]
    fn dense_layer_scales_are_ordered() {
        let cfg = NetConfig::new(vec![50, 60, 60, 30]).unwrap();
        let theta = init_dense(&cfg, 3);
        let spread = |m: usize| {
            let mut acc = 0.0;
            let mut count = 0;
            for j in 0..cfg.width(m) {
                for t in 0..cfg.width(m - 1) {
                    acc += theta[cfg.weight_index(m, t, j)].powi(2);
                    count += 1;
                }
            }
            (acc / count as f64).sqrt()
        };
        let (s1, s2, s3) = (spread(1), spread(2), spread(3));
        assert!((s1 - 0.1).abs() < 0.02, "first layer σ: {s1}");
        assert!((s2 - 0.05).abs() < 0.01, "hidden layer σ: {s2}");
        assert!((s3 - 0.001).abs() < 0.0002, "output layer σ: {s3}");
        for m in 1..=3 {
            for j in 0..cfg.width(m) {
                assert_eq!(theta[cfg.bias_index(m, j)], 0.0);
            }
        }
    }
}
