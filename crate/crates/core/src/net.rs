//! Single-node reference implementation of the feedforward network.
//!
//! Everything here is straightforward dense math over the whole parameter
//! vector; it is the oracle the distributed engine is verified against.
//!
//! Network: `s^m = (W^m)ᵀ z^{m-1} + b^m`, hidden activation sigmoid, output
//! activation identity. Objective: `f(θ) = θᵀθ/(2C) + (1/l)·Σ_i ‖z^{L,i} − y^i‖²`.
//!
//! Parameter layout: for each layer m = 1..L in order, `W^m` stored
//! column-wise (all incoming weights of output neuron j are contiguous),
//! followed by `b^m`.

use ndarray::{Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Number of parameters above which the dense Gauss-Newton oracle refuses
/// to materialize an n × n matrix.
pub const ORACLE_CAP: usize = 5000;

/// Layer sizes `n_0..n_L`; fixed activation scheme (sigmoid hidden, linear
/// output).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub layer_sizes: Vec<usize>,
}

impl NetConfig {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        let cfg = NetConfig { layer_sizes };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(CoreError::InvalidConfig(
                "a network needs at least an input and an output layer".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&n| n == 0) {
            return Err(CoreError::InvalidConfig("layer sizes must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Number of weight layers, `L`.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Neurons at layer `m` (0 = input).
    pub fn width(&self, m: usize) -> usize {
        self.layer_sizes[m]
    }

    /// Total flattened parameter count `n = Σ_m (n_{m-1}·n_m + n_m)`.
    pub fn num_params(&self) -> usize {
        (1..=self.depth())
            .map(|m| self.width(m - 1) * self.width(m) + self.width(m))
            .sum()
    }

    /// Offset of layer `m`'s block (weights then bias) in the flat vector.
    pub fn layer_offset(&self, m: usize) -> usize {
        (1..m)
            .map(|k| self.width(k - 1) * self.width(k) + self.width(k))
            .sum()
    }

    /// Flat index of `w^m_{tj}` (column-wise within the layer block).
    pub fn weight_index(&self, m: usize, t: usize, j: usize) -> usize {
        debug_assert!(t < self.width(m - 1) && j < self.width(m));
        self.layer_offset(m) + j * self.width(m - 1) + t
    }

    /// Flat index of `b^m_j`.
    pub fn bias_index(&self, m: usize, j: usize) -> usize {
        debug_assert!(j < self.width(m));
        self.layer_offset(m) + self.width(m - 1) * self.width(m) + j
    }
}

/// Flattened parameter vector; layout documented at module level.
pub type Theta = Vec<f64>;

/// Per-layer dense view of a parameter vector.
#[derive(Debug, Clone)]
pub struct LayerParams {
    /// `n_{m-1} × n_m`, entry `(t, j) = w^m_{tj}`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Borrowing view of layer `m`'s weight matrix inside the flat vector.
pub fn weight_view<'a>(cfg: &NetConfig, theta: &'a [f64], m: usize) -> ArrayView2<'a, f64> {
    let (rows, cols) = (cfg.width(m - 1), cfg.width(m));
    let start = cfg.layer_offset(m);
    ArrayView2::from_shape((rows, cols).f(), &theta[start..start + rows * cols])
        .expect("weight slice shape")
}

/// Borrowing view of layer `m`'s bias vector.
pub fn bias_view<'a>(cfg: &NetConfig, theta: &'a [f64], m: usize) -> &'a [f64] {
    let start = cfg.bias_index(m, 0);
    &theta[start..start + cfg.width(m)]
}

/// Expands the flat vector into per-layer matrices.
pub fn unflatten(cfg: &NetConfig, theta: &[f64]) -> Vec<LayerParams> {
    assert_eq!(theta.len(), cfg.num_params(), "theta length");
    (1..=cfg.depth())
        .map(|m| LayerParams {
            w: weight_view(cfg, theta, m).to_owned(),
            b: Array1::from_iter(bias_view(cfg, theta, m).iter().copied()),
        })
        .collect()
}

/// Re-flattens per-layer matrices; inverse of [`unflatten`].
pub fn flatten(cfg: &NetConfig, layers: &[LayerParams]) -> Theta {
    let mut theta = Vec::with_capacity(cfg.num_params());
    for (m, lp) in layers.iter().enumerate() {
        let m = m + 1;
        assert_eq!(lp.w.dim(), (cfg.width(m - 1), cfg.width(m)));
        for j in 0..cfg.width(m) {
            for t in 0..cfg.width(m - 1) {
                theta.push(lp.w[(t, j)]);
            }
        }
        theta.extend(lp.b.iter().copied());
    }
    theta
}

/// A labeled dense batch: `x` is `l × n_0`, `y` is `l × n_L` (one-hot rows,
/// or a ±1 column when `n_L = 1`).
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, cfg: &NetConfig) -> Result<()> {
        if self.x.ncols() != cfg.width(0) {
            return Err(CoreError::Shape(format!(
                "features have {} columns, network expects {}",
                self.x.ncols(),
                cfg.width(0)
            )));
        }
        if self.y.ncols() != cfg.width(cfg.depth()) {
            return Err(CoreError::Shape(format!(
                "labels have {} columns, network expects {}",
                self.y.ncols(),
                cfg.width(cfg.depth())
            )));
        }
        if self.x.nrows() != self.y.nrows() || self.x.nrows() == 0 {
            return Err(CoreError::Shape("empty batch or x/y row mismatch".into()));
        }
        Ok(())
    }
}

/// Numerically stable sigmoid (separate branches for s ≥ 0 and s < 0).
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Activation: sigmoid on hidden layers, identity on the output layer.
pub fn activation(s: f64, is_output: bool) -> f64 {
    if is_output {
        s
    } else {
        sigmoid(s)
    }
}

/// Derivative of [`activation`] with respect to `s`.
pub fn activation_deriv(s: f64, is_output: bool) -> f64 {
    if is_output {
        1.0
    } else {
        let z = sigmoid(s);
        z * (1.0 - z)
    }
}

/// Derivative expressed through the activation value (`z(1−z)` hidden, 1 output).
pub fn deriv_from_activation(z: f64, is_output: bool) -> f64 {
    if is_output {
        1.0
    } else {
        z * (1.0 - z)
    }
}

/// Pre-activations and activations for every layer; `z[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `s[m]` is `l × n_m` for m = 1..L; `s[0]` is an empty placeholder.
    pub s: Vec<Array2<f64>>,
    /// `z[m]` is `l × n_m`; `z[0] = x`, `z[L] = s[L]`.
    pub z: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.z.last().expect("nonempty cache")
    }
}

/// Full forward pass over a batch of inputs.
pub fn forward_ref(cfg: &NetConfig, theta: &[f64], x: ArrayView2<f64>) -> ForwardCache {
    assert_eq!(theta.len(), cfg.num_params(), "theta length");
    assert_eq!(x.ncols(), cfg.width(0), "input width");
    let l = x.nrows();
    let depth = cfg.depth();
    let mut s: Vec<Array2<f64>> = Vec::with_capacity(depth + 1);
    let mut z: Vec<Array2<f64>> = Vec::with_capacity(depth + 1);
    s.push(Array2::zeros((l, 0)));
    z.push(x.to_owned());
    for m in 1..=depth {
        let w = weight_view(cfg, theta, m);
        let b = bias_view(cfg, theta, m);
        let mut sm = z[m - 1].dot(&w);
        for mut row in sm.axis_iter_mut(Axis(0)) {
            for (v, &bj) in row.iter_mut().zip(b) {
                *v += bj;
            }
        }
        let zm = if m == depth {
            sm.clone()
        } else {
            sm.mapv(sigmoid)
        };
        s.push(sm);
        z.push(zm);
    }
    ForwardCache { s, z }
}

/// Regularized mean squared error, `θᵀθ/(2C) + (1/l)·Σ_i ‖z^{L,i} − y^i‖²`.
///
/// `c_reg` may be `f64::INFINITY` to switch regularization off.
pub fn objective_ref(cfg: &NetConfig, theta: &[f64], batch: &Batch, c_reg: f64) -> f64 {
    assert!(c_reg > 0.0, "C must be positive");
    let cache = forward_ref(cfg, theta, batch.x.view());
    let out = cache.output();
    let mut loss = 0.0;
    for (zrow, yrow) in out.axis_iter(Axis(0)).zip(batch.y.axis_iter(Axis(0))) {
        for (&zv, &yv) in zrow.iter().zip(yrow.iter()) {
            let d = zv - yv;
            loss += d * d;
        }
    }
    let reg: f64 = theta.iter().map(|v| v * v).sum();
    reg / (2.0 * c_reg) + loss / batch.len() as f64
}

/// Gradient of [`objective_ref`] by reverse accumulation:
/// `∇f = θ/C + (1/l)·Σ_i (J^i)ᵀ ∇_{z^L} ξ_i`, seed `2(z^L − y)`.
pub fn gradient_ref(cfg: &NetConfig, theta: &[f64], batch: &Batch, c_reg: f64) -> Theta {
    assert!(c_reg > 0.0, "C must be positive");
    let cache = forward_ref(cfg, theta, batch.x.view());
    let l = batch.len() as f64;
    let depth = cfg.depth();
    let mut grad = vec![0.0; cfg.num_params()];

    // delta = ∂(Σ_i ξ_i)/∂s^m, starting from the linear output layer.
    let mut delta = (cache.output() - &batch.y) * 2.0;
    for m in (1..=depth).rev() {
        let zprev = &cache.z[m - 1];
        let gw = zprev.t().dot(&delta);
        let off = cfg.layer_offset(m);
        let (rows, cols) = (cfg.width(m - 1), cfg.width(m));
        for j in 0..cols {
            for t in 0..rows {
                grad[off + j * rows + t] = gw[(t, j)] / l;
            }
        }
        let boff = cfg.bias_index(m, 0);
        for (j, col) in delta.axis_iter(Axis(1)).enumerate() {
            grad[boff + j] = col.sum() / l;
        }
        if m > 1 {
            let w = weight_view(cfg, theta, m);
            let mut dz = delta.dot(&w.t());
            // Chain through the hidden sigmoid of layer m-1.
            for (mut drow, zrow) in dz.axis_iter_mut(Axis(0)).zip(zprev.axis_iter(Axis(0))) {
                for (dv, &zv) in drow.iter_mut().zip(zrow.iter()) {
                    *dv *= zv * (1.0 - zv);
                }
            }
            delta = dz;
        }
    }
    for (g, &t) in grad.iter_mut().zip(theta.iter()) {
        *g += t / c_reg;
    }
    grad
}

/// Dense per-instance Jacobians `J^i = ∂z^{L,i}/∂θ`, each `n_L × n`.
pub fn jacobian_ref(cfg: &NetConfig, theta: &[f64], batch: &Batch) -> Vec<Array2<f64>> {
    let cache = forward_ref(cfg, theta, batch.x.view());
    let depth = cfg.depth();
    let n_l = cfg.width(depth);
    let n = cfg.num_params();
    let mut out = Vec::with_capacity(batch.len());

    for i in 0..batch.len() {
        let mut j_mat = Array2::<f64>::zeros((n_l, n));
        // d[(u, j)] = ∂z^L_u/∂s^m_j; at the linear output layer this is I.
        let mut d = Array2::<f64>::eye(n_l);
        for m in (1..=depth).rev() {
            let zprev = cache.z[m - 1].row(i);
            let off = cfg.layer_offset(m);
            let rows = cfg.width(m - 1);
            let boff = cfg.bias_index(m, 0);
            for u in 0..n_l {
                for j in 0..cfg.width(m) {
                    let duj = d[(u, j)];
                    if duj != 0.0 {
                        for t in 0..rows {
                            j_mat[(u, off + j * rows + t)] = duj * zprev[t];
                        }
                    }
                    j_mat[(u, boff + j)] = duj;
                }
            }
            if m > 1 {
                let w = weight_view(cfg, theta, m);
                let mut dz = d.dot(&w.t());
                for mut row in dz.axis_iter_mut(Axis(0)) {
                    for (v, &zv) in row.iter_mut().zip(zprev.iter()) {
                        *v *= zv * (1.0 - zv);
                    }
                }
                d = dz;
            }
        }
        out.push(j_mat);
    }
    out
}

/// Dense Gauss-Newton matrix `G = I/C + (1/l)·Σ_i (J^i)ᵀ B J^i` with `B = 2I`
/// (squared loss). Oracle-only: refuses `n >` [`ORACLE_CAP`].
pub fn gauss_newton_ref(
    cfg: &NetConfig,
    theta: &[f64],
    batch: &Batch,
    c_reg: f64,
) -> Result<Array2<f64>> {
    let n = cfg.num_params();
    if n > ORACLE_CAP {
        return Err(CoreError::OracleTooLarge { n, cap: ORACLE_CAP });
    }
    let jacs = jacobian_ref(cfg, theta, batch);
    let l = batch.len() as f64;
    let mut g = Array2::<f64>::eye(n) / c_reg;
    for j in &jacs {
        g += &(j.t().dot(j) * (2.0 / l));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_layer(w: f64, b: f64) -> (NetConfig, Theta) {
        (NetConfig::new(vec![1, 1]).unwrap(), vec![w, b])
    }

    #[test]
    fn activation_examples() {
        assert_eq!(activation(0.0, false), 0.5);
        assert_eq!(activation_deriv(0.0, false), 0.25);
        assert_eq!(activation(3.7, true), 3.7);
        assert_eq!(activation_deriv(3.7, true), 1.0);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(1e4), 1.0);
        assert_eq!(sigmoid(-1e4), 0.0);
        assert!(sigmoid(-745.0) > 0.0);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let cfg = NetConfig::new(vec![3, 4, 2]).unwrap();
        let theta = vec![0.0; cfg.num_params()];
        let x = array![[1.0, -2.0, 0.5], [3.0, 0.0, 1.0]];
        let cache = forward_ref(&cfg, &theta, x.view());
        assert!(cache.output().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affine_single_layer() {
        let (cfg, theta) = one_layer(2.0, 1.0);
        let cache = forward_ref(&cfg, &theta, array![[3.0]].view());
        assert_eq!(cache.output()[(0, 0)], 7.0);
    }

    #[test]
    fn zero_theta_objective_is_one_for_one_hot() {
        let cfg = NetConfig::new(vec![2, 3]).unwrap();
        let theta = vec![0.0; cfg.num_params()];
        let batch = Batch {
            x: array![[0.3, -1.0], [2.0, 0.1]],
            y: array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        };
        assert_eq!(objective_ref(&cfg, &theta, &batch, 1.0), 1.0);
    }

    #[test]
    fn perfect_model_with_large_c_has_vanishing_objective() {
        // z = 1·x and y = x, so the loss is zero and only the reg term remains.
        let (cfg, theta) = one_layer(1.0, 0.0);
        let batch = Batch { x: array![[2.0]], y: array![[2.0]] };
        let f_large = objective_ref(&cfg, &theta, &batch, 1e12);
        assert!(f_large < 1e-12);
        assert_eq!(objective_ref(&cfg, &theta, &batch, f64::INFINITY), 0.0);
    }

    #[test]
    fn single_weight_gradient() {
        let (cfg, theta) = one_layer(1.0, 0.0);
        let batch = Batch { x: array![[1.0]], y: array![[0.0]] };
        let g = gradient_ref(&cfg, &theta, &batch, f64::INFINITY);
        assert_eq!(g[0], 2.0); // 2(z−y)x with z = 1
        assert_eq!(g[1], 2.0); // bias sees the same residual
    }

    #[test]
    fn residual_free_gradient_is_pure_regularization() {
        let cfg = NetConfig::new(vec![2, 2, 1]).unwrap();
        let theta: Theta = (0..cfg.num_params()).map(|i| 0.1 * i as f64 - 0.3).collect();
        let x = array![[0.4, -0.2]];
        let cache = forward_ref(&cfg, &theta, x.view());
        let batch = Batch { x, y: cache.output().clone() };
        let g = gradient_ref(&cfg, &theta, &batch, 5.0);
        for (gi, ti) in g.iter().zip(&theta) {
            assert!((gi - ti / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn output_layer_jacobian_rows() {
        let cfg = NetConfig::new(vec![2, 3, 2]).unwrap();
        let theta: Theta = (0..cfg.num_params())
            .map(|i| (i as f64 * 0.37).sin() * 0.8)
            .collect();
        let batch = Batch { x: array![[0.9, -0.4]], y: array![[1.0, 0.0]] };
        let cache = forward_ref(&cfg, &theta, batch.x.view());
        let jac = &jacobian_ref(&cfg, &theta, &batch)[0];
        let depth = cfg.depth();
        for u in 0..2 {
            for j in 0..2 {
                for t in 0..3 {
                    let expect = if j == u { cache.z[depth - 1][(0, t)] } else { 0.0 };
                    assert_eq!(jac[(u, cfg.weight_index(depth, t, j))], expect);
                }
                let expect = if j == u { 1.0 } else { 0.0 };
                assert_eq!(jac[(u, cfg.bias_index(depth, j))], expect);
            }
        }
    }

    #[test]
    fn jacobian_shape_single_output() {
        let cfg = NetConfig::new(vec![3, 2, 1]).unwrap();
        let theta = vec![0.1; cfg.num_params()];
        let batch = Batch { x: array![[1.0, 2.0, 3.0]], y: array![[1.0]] };
        let jacs = jacobian_ref(&cfg, &theta, &batch);
        assert_eq!(jacs.len(), 1);
        assert_eq!(jacs[0].dim(), (1, cfg.num_params()));
    }

    #[test]
    fn gauss_newton_structure_on_a_known_jacobian() {
        // 1-1 net on x = 0: J = [∂z/∂w, ∂z/∂b] = [0, 1], so
        // G = I/C + 2·JᵀJ has only the bias-bias data entry.
        let cfg = NetConfig::new(vec![1, 1]).unwrap();
        let theta = vec![0.5, -0.2];
        let batch = Batch { x: array![[0.0]], y: array![[0.0]] };
        let g = gauss_newton_ref(&cfg, &theta, &batch, 4.0).unwrap();
        assert_eq!(g[(0, 0)], 0.25);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 1)], 0.25 + 2.0);
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let cfg = NetConfig::new(vec![100, 100, 10]).unwrap();
        let theta = vec![0.0; cfg.num_params()];
        let batch = Batch {
            x: Array2::zeros((1, 100)),
            y: Array2::zeros((1, 10)),
        };
        match gauss_newton_ref(&cfg, &theta, &batch, 1.0) {
            Err(CoreError::OracleTooLarge { n, cap }) => {
                assert_eq!(n, cfg.num_params());
                assert_eq!(cap, ORACLE_CAP);
            }
            other => panic!("expected cap refusal, got {other:?}"),
        }
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let cfg = NetConfig::new(vec![4, 3, 2]).unwrap();
        let theta: Theta = (0..cfg.num_params()).map(|i| i as f64 * 0.5 - 3.0).collect();
        let back = flatten(&cfg, &unflatten(&cfg, &theta));
        assert_eq!(theta, back);
    }

    #[test]
    fn indexing_matches_layout() {
        let cfg = NetConfig::new(vec![2, 3, 1]).unwrap();
        // Layer 1 block: 2·3 weights + 3 bias; layer 2 block: 3 weights + 1 bias.
        assert_eq!(cfg.num_params(), 13);
        assert_eq!(cfg.weight_index(1, 0, 0), 0);
        assert_eq!(cfg.weight_index(1, 1, 0), 1);
        assert_eq!(cfg.weight_index(1, 0, 1), 2);
        assert_eq!(cfg.bias_index(1, 0), 6);
        assert_eq!(cfg.layer_offset(2), 9);
        assert_eq!(cfg.bias_index(2, 0), 12);
    }
}
