//! Dense linear algebra, feed-forward layers with hand-written backward
//! passes, the Adam optimizer and a central-difference gradient checker.
//!
//! Everything is row-major `f64`. Sparse structure lives in [`crate::cograph`].

use rand::Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    /// Glorot/Xavier uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            context: "matmul inner dimension",
            expected: a.cols,
            actual: b.rows,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `a · bᵀ`, i.e. every row of `a` dotted with every row of `b`.
pub fn matmul_transpose_b(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::DimensionMismatch {
            context: "matmul_transpose_b inner dimension",
            expected: a.cols,
            actual: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ai = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(ai, b.row(j));
        }
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Divides `v` by its Euclidean norm in place. All-zero vectors are left alone.
pub fn l2_normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn l2_normalize_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows {
        l2_normalize(out.row_mut(i));
    }
    out
}

/// Gradient of `y = x / |x|` pulled back to `x`. Zero rows pass gradients
/// through as zero, matching the forward rule that leaves them unchanged.
pub fn l2_normalize_backward(pre: &[f64], grad_out: &[f64], grad_in: &mut [f64]) {
    let n = norm(pre);
    if n == 0.0 {
        grad_in.iter_mut().for_each(|g| *g = 0.0);
        return;
    }
    // dx = (g - y (y·g)) / |x|
    let y_dot_g: f64 = pre.iter().zip(grad_out).map(|(x, g)| x / n * g).sum();
    for ((gi, &x), &g) in grad_in.iter_mut().zip(pre).zip(grad_out) {
        *gi = (g - x / n * y_dot_g) / n;
    }
}

pub fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
}

/// Fully connected layer `y = W x + b` with `W` stored as `(out × in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn glorot<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Dense {
            weight: Matrix::glorot(output, input, rng),
            bias: vec![0.0; output],
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Matrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Batched forward over the rows of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = matmul_transpose_b(x, &self.weight)?;
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input rows.
    pub fn backward(&self, x: &Matrix, grad_out: &Matrix, grad: &mut Dense) -> Matrix {
        let (out_dim, in_dim) = self.weight.shape();
        let mut grad_in = Matrix::zeros(x.rows(), in_dim);
        for n in 0..x.rows() {
            let go = grad_out.row(n);
            let xi = x.row(n);
            let gi = grad_in.row_mut(n);
            for o in 0..out_dim {
                let g = go[o];
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let w_row = self.weight.row(o);
                let gw_row = grad.weight.row_mut(o);
                for k in 0..in_dim {
                    gw_row[k] += g * xi[k];
                    gi[k] += g * w_row[k];
                }
            }
        }
        grad_in
    }

    pub fn param_len(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weight.as_slice());
        out.extend_from_slice(&self.bias);
    }

    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let nw = self.weight.as_slice().len();
        self.weight.as_mut_slice().copy_from_slice(&src[..nw]);
        let nb = self.bias.len();
        self.bias.copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }
}

/// Feed-forward stack: ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Matrix>,
    /// Raw output of the final layer, before any normalisation.
    pub output: Matrix,
}

impl Mlp {
    pub fn glorot<R: Rng + ?Sized>(input: usize, hidden: &[usize], output: usize, rng: &mut R) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let layers = dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Mlp { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, x: Matrix) -> Result<MlpCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "feed-forward input",
                expected: self.input_dim(),
                actual: x.cols(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&h)?;
            if i < last {
                relu_in_place(z.as_mut_slice());
            }
            inputs.push(h);
            h = z;
        }
        Ok(MlpCache { inputs, output: h })
    }

    /// Backpropagates `grad_output` (w.r.t. the raw final output) and returns
    /// the gradient w.r.t. the network input.
    pub fn backward(&self, cache: &MlpCache, grad_output: Matrix, grad: &mut Mlp) -> Matrix {
        let mut g = grad_output;
        for i in (0..self.layers.len()).rev() {
            let x = &cache.inputs[i];
            let mut gi = self.layers[i].backward(x, &g, &mut grad.layers[i]);
            if i > 0 {
                // x is the ReLU output of layer i-1; zero entries had a
                // non-positive pre-activation.
                for (gv, &xv) in gi.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    if xv <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            g = gi;
        }
        g
    }

    pub fn param_len(&self) -> usize {
        self.layers.iter().map(Dense::param_len).sum()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        self.layers.iter().for_each(|l| l.write_flat(out));
    }

    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut off = 0;
        for l in &mut self.layers {
            off += l.read_flat(&src[off..]);
        }
        off
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `param` in place.
    pub fn step(&mut self, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                context: "adam step",
                expected: self.m.len(),
                actual: if param.len() != self.m.len() { param.len() } else { grad.len() },
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("adam gradient"));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..param.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Max over coordinates of `|analytic - fd| / max(1, |fd|)`, where `fd` is
/// the central difference of `f` at `x` with step `h`.
pub fn grad_check<F>(mut f: F, x: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len(), "gradient length must match parameters");
    let mut probe = x.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * h);
        let err = (analytic[i] - fd).abs() / fd.abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
