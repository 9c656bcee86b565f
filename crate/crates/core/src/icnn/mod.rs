//! Input-convex networks with input skip connections, and their unconstrained twins.
//!
//! Hidden layers compute
//!
//! ```text
//! x¹ = relu(H¹ x⁰ + d¹)
//! xᵏ = relu(Wᵏ xᵏ⁻¹ + Hᵏ x⁰ + dᵏ)      k ≥ 2
//! f  = w_outᵀ xᴸ + h_outᵀ x⁰ + d_out
//! ```
//!
//! where `x⁰` is the standardized input. With every `Wᵏ` and `w_out`
//! nonnegative, `f` is convex in `x⁰`, and an affine input map followed by a
//! positive output scale keeps it convex in the raw input. Gradients use
//! `relu'(0) = 0`, which is a valid subgradient choice.

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::CHECKPOINT_VERSION;

#[derive(Debug, Error, PartialEq)]
pub enum IcnnError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("input has length {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { got: usize, expected: usize },
    #[error("unsupported checkpoint version {0}, expected {CHECKPOINT_VERSION}")]
    UnsupportedVersion(u32),
    #[error("checkpoint {path}: {message}")]
    Schema { path: String, message: String },
    #[error("checkpoint claims a convex model but {what} has a negative entry {value}")]
    NotConvex { what: String, value: f64 },
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    /// ICNN when true, unconstrained DNN otherwise.
    pub convex: bool,
    pub seed: u64,
    /// Feed the input straight into the output layer through `h_out`.
    #[serde(default = "default_true")]
    pub output_skip: bool,
}

fn default_true() -> bool {
    true
}

impl NetConfig {
    pub fn new(input_dim: usize, widths: &[usize], convex: bool, seed: u64) -> Self {
        Self { input_dim, widths: widths.to_vec(), convex, seed, output_skip: true }
    }

    pub fn validate(&self) -> Result<(), IcnnError> {
        if self.input_dim == 0 {
            return Err(IcnnError::Config("input dimension must be positive".into()));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(IcnnError::Config(format!("hidden widths must be nonempty and positive, got {:?}", self.widths)));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        let mut prev = 0;
        let mut n = 0;
        for &w in &self.widths {
            n += w * prev + w * self.input_dim + w;
            prev = w;
        }
        n + prev + if self.output_skip { self.input_dim } else { 0 } + 1
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o += dot(row, x);
        }
    }

    fn mul_t_add(&self, v: &[f64], out: &mut [f64]) {
        if self.cols == 0 {
            return;
        }
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            if vi != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += vi * a;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Hidden-to-hidden weights; zero columns on the first layer.
    pub w: Matrix,
    /// Input skip weights.
    pub h: Matrix,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub w: Vec<f64>,
    /// Empty when the output skip is disabled.
    pub h: Vec<f64>,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputScaler {
    pub shift: f64,
    pub scale: f64,
}

/// Training loss on the standardized output, as a function of `r = prediction − target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Loss {
    Squared,
    /// `κ_over·r²` for over-estimates (`r > 0`), `κ_under·r²` otherwise.
    Asymmetric { kappa_under: f64, kappa_over: f64 },
}

impl Loss {
    fn weight(self, r: f64) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Asymmetric { kappa_over, .. } if r > 0.0 => kappa_over,
            Loss::Asymmetric { kappa_under, .. } => kappa_under,
        }
    }

    pub fn value(self, r: f64) -> f64 {
        self.weight(r) * r * r
    }

    pub fn derivative(self, r: f64) -> f64 {
        2.0 * self.weight(r) * r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcnnModel {
    pub cfg: NetConfig,
    pub layers: Vec<Layer>,
    pub output: OutputLayer,
    pub input_scaler: InputScaler,
    pub output_scaler: OutputScaler,
}

/// Activations kept for the backward pass.
struct Tape {
    x0: Vec<f64>,
    /// Pre-activations per hidden layer.
    z: Vec<Vec<f64>>,
    /// Post-activations per hidden layer.
    a: Vec<Vec<f64>>,
    out: f64,
}

pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

impl IcnnModel {
    /// Fan-in uniform initialization; convex hidden-to-hidden and output weights take absolute values.
    pub fn init(cfg: &NetConfig) -> Result<Self, IcnnError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = cfg.input_dim;
        let mut draw = |rows: usize, cols: usize, fan_in: usize, nonneg: bool| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| {
                    let v: f64 = rng.random_range(-bound..bound);
                    if nonneg { v.abs() } else { v }
                })
                .collect();
            Matrix { rows, cols, data }
        };
        let mut layers = Vec::with_capacity(cfg.widths.len());
        let mut prev = 0;
        for &width in &cfg.widths {
            let fan_in = prev + n;
            let w = draw(width, prev, fan_in, cfg.convex);
            let h = draw(width, n, fan_in, false);
            let d = draw(width, 1, fan_in, false).data;
            layers.push(Layer { w, h, d });
            prev = width;
        }
        let skip = if cfg.output_skip { n } else { 0 };
        let fan_in = prev + skip;
        let output = OutputLayer {
            w: draw(1, prev, fan_in, cfg.convex).data,
            h: draw(1, skip, fan_in, false).data,
            d: draw(1, 1, fan_in, false).data[0],
        };
        Ok(Self {
            cfg: cfg.clone(),
            layers,
            output,
            input_scaler: InputScaler { shift: vec![0.0; n], scale: vec![1.0; n] },
            output_scaler: OutputScaler { shift: 0.0, scale: 1.0 },
        })
    }

    pub fn input_dim(&self) -> usize {
        self.cfg.input_dim
    }

    pub fn is_convex(&self) -> bool {
        self.cfg.convex
    }

    pub fn num_params(&self) -> usize {
        self.cfg.num_params()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), IcnnError> {
        if x.len() != self.cfg.input_dim {
            return Err(IcnnError::Dimension { got: x.len(), expected: self.cfg.input_dim });
        }
        Ok(())
    }

    pub fn normalize_input(&self, x: &[f64]) -> Vec<f64> {
        let s = &self.input_scaler;
        x.iter().zip(&s.shift).zip(&s.scale).map(|((v, m), c)| (v - m) / c).collect()
    }

    pub fn normalize_output(&self, z: f64) -> f64 {
        (z - self.output_scaler.shift) / self.output_scaler.scale
    }

    pub fn denormalize_output(&self, v: f64) -> f64 {
        self.output_scaler.shift + self.output_scaler.scale * v
    }

    fn tape(&self, x: &[f64]) -> Tape {
        let x0 = self.normalize_input(x);
        let mut z = Vec::with_capacity(self.layers.len());
        let mut a: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut zk = layer.d.clone();
            if let Some(prev) = a.last() {
                layer.w.mul_add(prev, &mut zk);
            }
            layer.h.mul_add(&x0, &mut zk);
            a.push(zk.iter().map(|&v| relu(v)).collect());
            z.push(zk);
        }
        let last = a.last().expect("at least one hidden layer");
        let out = dot(&self.output.w, last) + dot(&self.output.h, &x0) + self.output.d;
        Tape { x0, z, a, out }
    }

    /// Network output before the output scaler is undone.
    pub fn forward_normalized(&self, x: &[f64]) -> Result<f64, IcnnError> {
        self.check_input(x)?;
        Ok(self.tape(x).out)
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, IcnnError> {
        self.forward_normalized(x).map(|v| self.denormalize_output(v))
    }

    /// Backpropagates `seed = ∂L/∂out` through the tape. Parameter gradients are
    /// accumulated into `grad` (laid out as [`IcnnModel::params`]) when given;
    /// the gradient with respect to the standardized input is returned.
    fn backward(&self, tape: &Tape, seed: f64, mut grad: Option<&mut [f64]>) -> Vec<f64> {
        let n = self.cfg.input_dim;
        let mut gx0: Vec<f64> = self.output.h.iter().map(|h| seed * h).collect();
        gx0.resize(n, 0.0);
        let mut delta: Vec<f64> = self.output.w.iter().map(|w| seed * w).collect();
        let offsets = self.offsets();
        if let Some(g) = grad.as_deref_mut() {
            let o = offsets.output;
            let last = tape.a.last().expect("hidden layer");
            for (gi, a) in g[o..o + last.len()].iter_mut().zip(last) {
                *gi += seed * a;
            }
            let oh = o + last.len();
            for (gi, x) in g[oh..oh + self.output.h.len()].iter_mut().zip(&tape.x0) {
                *gi += seed * x;
            }
            g[oh + self.output.h.len()] += seed;
        }
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let dz: Vec<f64> = delta.iter().zip(&tape.z[k]).map(|(&dl, &z)| if z > 0.0 { dl } else { 0.0 }).collect();
            if let Some(g) = grad.as_deref_mut() {
                let (ow, oh, od) = offsets.layers[k];
                if k > 0 {
                    let prev = &tape.a[k - 1];
                    for (i, &di) in dz.iter().enumerate() {
                        if di != 0.0 {
                            let row = &mut g[ow + i * prev.len()..ow + (i + 1) * prev.len()];
                            for (gi, p) in row.iter_mut().zip(prev) {
                                *gi += di * p;
                            }
                        }
                    }
                }
                for (i, &di) in dz.iter().enumerate() {
                    if di != 0.0 {
                        let row = &mut g[oh + i * n..oh + (i + 1) * n];
                        for (gi, x) in row.iter_mut().zip(&tape.x0) {
                            *gi += di * x;
                        }
                    }
                }
                for (gi, di) in g[od..od + dz.len()].iter_mut().zip(&dz) {
                    *gi += di;
                }
            }
            layer.h.mul_t_add(&dz, &mut gx0);
            if k > 0 {
                let mut next = vec![0.0; layer.w.cols];
                layer.w.mul_t_add(&dz, &mut next);
                delta = next;
            }
        }
        gx0
    }

    /// Gradient of [`IcnnModel::forward`] with respect to the raw input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>, IcnnError> {
        self.check_input(x)?;
        let tape = self.tape(x);
        let g = self.backward(&tape, self.output_scaler.scale, None);
        Ok(g.iter().zip(&self.input_scaler.scale).map(|(g, s)| g / s).collect())
    }

    /// Value and input gradient in one pass.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), IcnnError> {
        self.check_input(x)?;
        let tape = self.tape(x);
        let g = self.backward(&tape, self.output_scaler.scale, None);
        let grad = g.iter().zip(&self.input_scaler.scale).map(|(g, s)| g / s).collect();
        Ok((self.denormalize_output(tape.out), grad))
    }

    /// Mean batch loss on the standardized output scale and its gradient with
    /// respect to [`IcnnModel::params`]. Targets are raw values.
    pub fn param_gradients(&self, batch: &[(&[f64], f64)], loss: Loss) -> Result<(f64, Vec<f64>), IcnnError> {
        if batch.is_empty() {
            return Err(IcnnError::EmptyBatch);
        }
        let mut grad = vec![0.0; self.num_params()];
        let mut total = 0.0;
        let inv = 1.0 / batch.len() as f64;
        for &(x, target) in batch {
            self.check_input(x)?;
            let tape = self.tape(x);
            let r = tape.out - self.normalize_output(target);
            total += loss.value(r);
            self.backward(&tape, loss.derivative(r) * inv, Some(&mut grad));
        }
        Ok((total * inv, grad))
    }

    /// Mean loss over a batch without gradients.
    pub fn loss(&self, batch: &[(&[f64], f64)], loss: Loss) -> Result<f64, IcnnError> {
        if batch.is_empty() {
            return Err(IcnnError::EmptyBatch);
        }
        let mut total = 0.0;
        for &(x, target) in batch {
            let r = self.forward_normalized(x)? - self.normalize_output(target);
            total += loss.value(r);
        }
        Ok(total / batch.len() as f64)
    }

    fn offsets(&self) -> Offsets {
        let mut at = 0;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let ow = at;
            let oh = ow + l.w.data.len();
            let od = oh + l.h.data.len();
            at = od + l.d.len();
            layers.push((ow, oh, od));
        }
        Offsets { layers, output: at }
    }

    /// All parameters in a fixed order: per hidden layer `W` (row-major), `H`
    /// (row-major), `d`; then `w_out`, `h_out`, `d_out`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            p.extend(&l.w.data);
            p.extend(&l.h.data);
            p.extend(&l.d);
        }
        p.extend(&self.output.w);
        p.extend(&self.output.h);
        p.push(self.output.d);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), IcnnError> {
        if p.len() != self.num_params() {
            return Err(IcnnError::ParamLength { got: p.len(), expected: self.num_params() });
        }
        let mut it = p.iter().copied();
        let mut fill = |dst: &mut [f64]| {
            for v in dst {
                *v = it.next().expect("length checked");
            }
        };
        for l in &mut self.layers {
            fill(&mut l.w.data);
            fill(&mut l.h.data);
            fill(&mut l.d);
        }
        fill(&mut self.output.w);
        fill(&mut self.output.h);
        fill(std::slice::from_mut(&mut self.output.d));
        Ok(())
    }

    /// True for the parameters that must stay nonnegative in a convex model.
    pub fn convex_mask(&self) -> Vec<bool> {
        let mut m = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            m.extend(std::iter::repeat_n(self.cfg.convex, l.w.data.len()));
            m.extend(std::iter::repeat_n(false, l.h.data.len() + l.d.len()));
        }
        m.extend(std::iter::repeat_n(self.cfg.convex, self.output.w.len()));
        m.extend(std::iter::repeat_n(false, self.output.h.len() + 1));
        m
    }

    /// Clamps the constrained weights at zero. A no-op for unconstrained models.
    pub fn project(&mut self) {
        if !self.cfg.convex {
            return;
        }
        for l in &mut self.layers {
            for w in &mut l.w.data {
                *w = w.max(0.0);
            }
        }
        for w in &mut self.output.w {
            *w = w.max(0.0);
        }
    }

    /// Smallest constrained weight, or `+∞` for a single-layer model.
    pub fn min_convex_weight(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.w.data.iter())
            .chain(&self.output.w)
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Sets the scalers from training inputs and targets: inputs to zero mean and
    /// unit standard deviation, the output by its mean and (positive) standard deviation.
    pub fn standardize(&mut self, inputs: &[&[f64]], targets: &[f64]) -> Result<(), IcnnError> {
        if inputs.is_empty() || targets.is_empty() {
            return Err(IcnnError::EmptyBatch);
        }
        let n = self.cfg.input_dim;
        let count = inputs.len() as f64;
        let mut shift = vec![0.0; n];
        for x in inputs {
            self.check_input(x)?;
            for (m, v) in shift.iter_mut().zip(x.iter()) {
                *m += v / count;
            }
        }
        let mut var = vec![0.0; n];
        for x in inputs {
            for ((s, v), m) in var.iter_mut().zip(x.iter()).zip(&shift) {
                *s += (v - m) * (v - m) / count;
            }
        }
        let scale = var.iter().map(|v| positive_std(v.sqrt())).collect();
        self.input_scaler = InputScaler { shift, scale };
        let tc = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / tc;
        let std = (targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / tc).sqrt();
        self.output_scaler = OutputScaler { shift: mean, scale: positive_std(std) };
        Ok(())
    }

    fn validate(&self) -> Result<(), IcnnError> {
        let s = &self.input_scaler;
        if s.shift.len() != self.cfg.input_dim || s.scale.len() != self.cfg.input_dim {
            return Err(IcnnError::Schema { path: "scalers.input".into(), message: "length differs from input dimension".into() });
        }
        if s.scale.iter().any(|c| !(c.is_finite() && *c > 0.0)) || s.shift.iter().any(|v| !v.is_finite()) {
            return Err(IcnnError::Schema { path: "scalers.input".into(), message: "scales must be positive and finite".into() });
        }
        let o = self.output_scaler;
        if !(o.scale.is_finite() && o.scale > 0.0 && o.shift.is_finite()) {
            return Err(IcnnError::Schema { path: "scalers.output".into(), message: "scale must be positive and finite".into() });
        }
        if self.cfg.convex {
            for (k, l) in self.layers.iter().enumerate() {
                if let Some(&v) = l.w.data.iter().find(|&&v| v < 0.0) {
                    return Err(IcnnError::NotConvex { what: format!("layers[{k}].w"), value: v });
                }
            }
            if let Some(&v) = self.output.w.iter().find(|&&v| v < 0.0) {
                return Err(IcnnError::NotConvex { what: "output.w".into(), value: v });
            }
        }
        Ok(())
    }
}

fn positive_std(s: f64) -> f64 {
    if s.is_finite() && s > 1e-12 {
        s
    } else {
        1.0
    }
}

struct Offsets {
    layers: Vec<(usize, usize, usize)>,
    output: usize,
}
