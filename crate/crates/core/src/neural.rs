//! Fully connected ReLU network with manual backpropagation and Adam.
//!
//! Inputs are batched by row. Each layer computes `z = x W + b` with `W`
//! stored as `(fan_in, fan_out)`. Hidden layers use ReLU (subgradient 0 at
//! 0); the output layer is identity or sigmoid.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

/// Hidden widths shared by the actor and critic networks.
pub const HIDDEN_WIDTHS: [usize; 3] = [128, 512, 1024];

const MLP_MAGIC: &[u8; 8] = b"ULCAMLP1";
const ADAM_MAGIC: &[u8; 8] = b"ULCAADM1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
}

impl Activation {
    fn code(self) -> u64 {
        match self {
            Activation::Identity => 0,
            Activation::Sigmoid => 1,
        }
    }

    fn from_code(code: u64) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Sigmoid),
            other => Err(Error::Checkpoint(format!("unknown activation code {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    output: Activation,
}

/// Activations saved by [`MlpParams::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// Gradient with respect to the network input, one row per sample.
    pub input: Array2<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpParams {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes, output)?;
        for (w, b) in params.weights.iter_mut().zip(params.biases.iter_mut()) {
            let bound = 1.0 / (w.nrows() as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            w.iter_mut().for_each(|x| *x = dist.sample(rng));
            b.iter_mut().for_each(|x| *x = dist.sample(rng));
        }
        Ok(params)
    }

    /// `input -> 128 -> 512 -> 1024 -> output`.
    pub fn with_standard_hidden<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend(HIDDEN_WIDTHS);
        sizes.push(output);
        Self::new(&sizes, activation, rng)
    }

    pub fn zeros(layer_sizes: &[usize], output: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {layer_sizes:?}")));
        }
        let weights = layer_sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = layer_sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            output,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.ncols()
            )));
        }
        Ok(())
    }

    fn activate(&self, layer: usize, z: &mut Array2<f64>) {
        if layer + 1 < self.weights.len() {
            z.mapv_inplace(|v| v.max(0.0));
        } else if self.output == Activation::Sigmoid {
            z.mapv_inplace(sigmoid);
        }
    }

    /// Forward pass without caching.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&input)?;
        let mut x = input.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = x.dot(w) + b;
            self.activate(l, &mut z);
            x = z;
        }
        Ok(x)
    }

    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&input)?;
        let n = self.weights.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut x = input.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = x.dot(w) + b;
            let mut a = z.clone();
            self.activate(l, &mut a);
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        let cache = ForwardCache {
            inputs,
            pre,
            output: x.clone(),
        };
        Ok((x, cache))
    }

    /// Gradients of `Σ output_gradient ⊙ output` over the batch.
    pub fn backward(&self, cache: &ForwardCache, output_gradient: ArrayView2<f64>) -> Result<Gradients> {
        if output_gradient.dim() != cache.output.dim() || cache.inputs.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match cached output {:?}",
                output_gradient.dim(),
                cache.output.dim()
            )));
        }
        let n = self.weights.len();
        let mut delta = output_gradient.to_owned();
        if self.output == Activation::Sigmoid {
            Zip::from(&mut delta).and(&cache.output).for_each(|d, &y| *d *= y * (1.0 - y));
        }
        let mut grad_w = vec![Array2::zeros((0, 0)); n];
        let mut grad_b = vec![Array1::zeros(0); n];
        for l in (0..n).rev() {
            grad_w[l] = cache.inputs[l].t().dot(&delta);
            grad_b[l] = delta.sum_axis(Axis(0));
            let mut upstream = delta.dot(&self.weights[l].t());
            if l > 0 {
                Zip::from(&mut upstream)
                    .and(&cache.pre[l - 1])
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            delta = upstream;
        }
        Ok(Gradients {
            weights: grad_w,
            biases: grad_b,
            input: delta,
        })
    }

    fn check_same_shape(&self, other: &MlpParams) -> Result<()> {
        if self.layer_sizes != other.layer_sizes {
            return Err(Error::Shape(format!(
                "layer sizes {:?} and {:?} differ",
                self.layer_sizes, other.layer_sizes
            )));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MLP_MAGIC)?;
        write_u64(&mut w, self.layer_sizes.len() as u64)?;
        for &s in &self.layer_sizes {
            write_u64(&mut w, s as u64)?;
        }
        write_u64(&mut w, self.output.code())?;
        for (wt, b) in self.weights.iter().zip(&self.biases) {
            write_f64s(&mut w, wt.iter())?;
            write_f64s(&mut w, b.iter())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        expect_magic(&mut r, MLP_MAGIC)?;
        let count = read_u64(&mut r)? as usize;
        if count > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {count}")));
        }
        let sizes = (0..count)
            .map(|_| read_u64(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let output = Activation::from_code(read_u64(&mut r)?)?;
        let mut params = Self::zeros(&sizes, output).map_err(|e| Error::Checkpoint(e.to_string()))?;
        for (wt, b) in params.weights.iter_mut().zip(params.biases.iter_mut()) {
            read_f64s(&mut r, wt.iter_mut())?;
            read_f64s(&mut r, b.iter_mut())?;
        }
        Ok(params)
    }
}

/// `target ← τ·online + (1 − τ)·target`.
pub fn soft_update(target: &mut MlpParams, online: &MlpParams, tau: f64) -> Result<()> {
    target.check_same_shape(online)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
    }
    let blend = |t: &mut f64, &o: &f64| *t = tau * o + (1.0 - tau) * *t;
    for (t, o) in target.weights.iter_mut().zip(&online.weights) {
        Zip::from(t).and(o).for_each(blend);
    }
    for (t, o) in target.biases.iter_mut().zip(&online.biases) {
        Zip::from(t).and(o).for_each(blend);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(params: &MlpParams, learning_rate: f64) -> Self {
        let zw: Vec<_> = params.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        let zb: Vec<_> = params.biases.iter().map(|b| Array1::zeros(b.len())).collect();
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_w: zw.clone(),
            v_w: zw,
            m_b: zb.clone(),
            v_b: zb,
        }
    }

    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients, direction: Direction) -> Result<()> {
        adam_step(params, grads, self, direction)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(ADAM_MAGIC)?;
        write_u64(&mut w, self.step)?;
        write_f64s(&mut w, [self.learning_rate, self.beta1, self.beta2, self.epsilon].iter())?;
        write_u64(&mut w, self.m_w.len() as u64)?;
        for l in 0..self.m_w.len() {
            write_u64(&mut w, self.m_w[l].nrows() as u64)?;
            write_u64(&mut w, self.m_w[l].ncols() as u64)?;
            write_f64s(&mut w, self.m_w[l].iter())?;
            write_f64s(&mut w, self.v_w[l].iter())?;
            write_f64s(&mut w, self.m_b[l].iter())?;
            write_f64s(&mut w, self.v_b[l].iter())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        expect_magic(&mut r, ADAM_MAGIC)?;
        let step = read_u64(&mut r)?;
        let mut hyper = [0.0; 4];
        read_f64s(&mut r, hyper.iter_mut())?;
        let layers = read_u64(&mut r)? as usize;
        if layers > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
        }
        let mut state = AdamState {
            learning_rate: hyper[0],
            beta1: hyper[1],
            beta2: hyper[2],
            epsilon: hyper[3],
            step,
            m_w: Vec::with_capacity(layers),
            v_w: Vec::with_capacity(layers),
            m_b: Vec::with_capacity(layers),
            v_b: Vec::with_capacity(layers),
        };
        for _ in 0..layers {
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            if rows.saturating_mul(cols) > 1 << 28 {
                return Err(Error::Checkpoint(format!("implausible layer shape {rows}x{cols}")));
            }
            let mut m_w = Array2::zeros((rows, cols));
            let mut v_w = Array2::zeros((rows, cols));
            let mut m_b = Array1::zeros(cols);
            let mut v_b = Array1::zeros(cols);
            read_f64s(&mut r, m_w.iter_mut())?;
            read_f64s(&mut r, v_w.iter_mut())?;
            read_f64s(&mut r, m_b.iter_mut())?;
            read_f64s(&mut r, v_b.iter_mut())?;
            state.m_w.push(m_w);
            state.v_w.push(v_w);
            state.m_b.push(m_b);
            state.v_b.push(v_b);
        }
        Ok(state)
    }
}

/// One bias-corrected Adam update. `Maximize` ascends the gradient.
pub fn adam_step(params: &mut MlpParams, grads: &Gradients, opt: &mut AdamState, direction: Direction) -> Result<()> {
    let shapes_match = grads.weights.len() == params.weights.len()
        && opt.m_w.len() == params.weights.len()
        && grads.weights.iter().zip(&params.weights).all(|(g, w)| g.dim() == w.dim())
        && grads.biases.iter().zip(&params.biases).all(|(g, b)| g.len() == b.len())
        && opt.m_w.iter().zip(&params.weights).all(|(m, w)| m.dim() == w.dim());
    if !shapes_match {
        return Err(Error::Shape("gradients or optimizer state do not match the network".into()));
    }
    opt.step += 1;
    let t = opt.step as i32;
    let (b1, b2, eps) = (opt.beta1, opt.beta2, opt.epsilon);
    let lr_t = opt.learning_rate * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
    let sign = match direction {
        Direction::Minimize => -1.0,
        Direction::Maximize => 1.0,
    };
    // Bias correction folded into the step size; epsilon scaled to match the
    // textbook form exactly.
    let eps_t = eps * (1.0 - b2.powi(t)).sqrt();
    let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p += sign * lr_t * *m / (v.sqrt() + eps_t);
    };
    for l in 0..params.weights.len() {
        Zip::from(&mut params.weights[l])
            .and(&mut opt.m_w[l])
            .and(&mut opt.v_w[l])
            .and(&grads.weights[l])
            .for_each(update);
        Zip::from(&mut params.biases[l])
            .and(&mut opt.m_b[l])
            .and(&mut opt.v_b[l])
            .and(&grads.biases[l])
            .for_each(update);
    }
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64s<'a, W: Write>(w: &mut W, values: impl Iterator<Item = &'a f64>) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64s<'a, R: Read>(r: &mut R, slots: impl Iterator<Item = &'a mut f64>) -> Result<()> {
    let mut buf = [0u8; 8];
    for slot in slots {
        r.read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated parameters: {e}")))?;
        *slot = f64::from_le_bytes(buf);
    }
    Ok(())
}

pub(crate) fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("missing header: {e}")))?;
    if &buf != magic {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}
