//! Single-layer LSTM with a linear multi-output head, trained by full
//! backpropagation through time.
//!
//! Gate parameters are stored stacked: rows `[0, h)` of `w`/`b` belong to the
//! input gate, then forget, output and candidate blocks. Every gate sees the
//! concatenation `[h_{t-1}, x_t]`.

mod forecast;

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use forecast::{fit_and_forecast, ForecastResult, ForecastSetup, Variant};

use crate::error::{Error, Result};
use crate::preprocess::{ScalerParams, WindowedDataset};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub hidden: usize,
    pub input: usize,
    /// `4·hidden × (hidden + input)`, gate blocks in the order i, f, o, c.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmCellParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self { hidden, input, w: Array2::zeros((4 * hidden, hidden + input)), b: Array1::zeros(4 * hidden) }
    }

    fn block(&self, k: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let h = self.hidden;
        (self.w.slice(s![k * h..(k + 1) * h, ..]), self.b.slice(s![k * h..(k + 1) * h]))
    }

    pub fn w_i(&self) -> ArrayView2<'_, f64> {
        self.block(0).0
    }
    pub fn w_f(&self) -> ArrayView2<'_, f64> {
        self.block(1).0
    }
    pub fn w_o(&self) -> ArrayView2<'_, f64> {
        self.block(2).0
    }
    pub fn w_c(&self) -> ArrayView2<'_, f64> {
        self.block(3).0
    }
    pub fn b_i(&self) -> ArrayView1<'_, f64> {
        self.block(0).1
    }
    pub fn b_f(&self) -> ArrayView1<'_, f64> {
        self.block(1).1
    }
    pub fn b_o(&self) -> ArrayView1<'_, f64> {
        self.block(2).1
    }
    pub fn b_c(&self) -> ArrayView1<'_, f64> {
        self.block(3).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: Array1::zeros(hidden), c: Array1::zeros(hidden) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub o: Array1<f64>,
    pub c_tilde: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub state: LstmState,
    pub gates: Gates,
}

/// One step of the cell for a single input vector.
pub fn cell_forward(params: &LstmCellParams, x_t: ArrayView1<f64>, prev: &LstmState) -> Result<CellOutput> {
    if x_t.len() != params.input {
        return Err(Error::DimensionMismatch { expected: params.input, got: x_t.len() });
    }
    if prev.h.len() != params.hidden || prev.c.len() != params.hidden {
        return Err(Error::DimensionMismatch { expected: params.hidden, got: prev.h.len().max(prev.c.len()) });
    }
    let mut z = Array1::zeros(params.hidden + params.input);
    z.slice_mut(s![..params.hidden]).assign(&prev.h);
    z.slice_mut(s![params.hidden..]).assign(&x_t);
    let pre = params.w.dot(&z) + &params.b;
    let h = params.hidden;
    let i = pre.slice(s![..h]).mapv(sigmoid);
    let f = pre.slice(s![h..2 * h]).mapv(sigmoid);
    let o = pre.slice(s![2 * h..3 * h]).mapv(sigmoid);
    let c_tilde = pre.slice(s![3 * h..]).mapv(f64::tanh);
    let c = &f * &prev.c + &i * &c_tilde;
    let h_new = &o * &c.mapv(f64::tanh);
    Ok(CellOutput { state: LstmState { h: h_new, c }, gates: Gates { i, f, o, c_tilde } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Windows per update; the whole dataset when absent.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Maximum L2 norm of each parameter tensor's gradient.
    pub gradient_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 150, learning_rate: 1e-3, batch_size: None, seed: 0, gradient_clip: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub cell: LstmCellParams,
    /// `horizon × hidden`.
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
    pub lookback: usize,
    pub horizon: usize,
    pub feature_names: Vec<String>,
    /// One per feature, in `feature_names` order.
    pub scalers: Vec<ScalerParams>,
    pub target_scaler: ScalerParams,
    pub train_config: TrainConfig,
}

/// Parameter gradients, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

struct StepCache {
    z: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    o: Array2<f64>,
    g: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
}

/// Everything the backward pass needs from a batched forward pass.
pub struct SequenceCache {
    steps: Vec<StepCache>,
    h_last: Array2<f64>,
}

impl SequenceCache {
    /// Hidden state after every step, `(step, window, unit)`.
    pub fn hidden_states(&self) -> Vec<Array2<f64>> {
        self.steps.iter().map(|s| &s.o * &s.tanh_c).collect()
    }

    /// Gate activations `(i, f, o, c̃)` at every step.
    pub fn gate_activations(&self) -> Vec<[&Array2<f64>; 4]> {
        self.steps.iter().map(|s| [&s.i, &s.f, &s.o, &s.g]).collect()
    }
}

impl LstmModel {
    /// Uniform `±1/√fan_in` weights, forget-gate bias 1, other biases 0.
    pub fn new(input: usize, hidden: usize, lookback: usize, horizon: usize, seed: u64) -> Result<Self> {
        if input == 0 || hidden == 0 || lookback == 0 || horizon == 0 {
            return Err(Error::InvalidConfig("LSTM sizes must all be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cell = LstmCellParams::zeros(hidden, input);
        let bound = 1.0 / ((hidden + input) as f64).sqrt();
        cell.w.mapv_inplace(|_| rng.random_range(-bound..bound));
        cell.b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        let head_bound = 1.0 / (hidden as f64).sqrt();
        let head_w = Array2::from_shape_simple_fn((horizon, hidden), || rng.random_range(-head_bound..head_bound));
        Ok(Self {
            cell,
            head_w,
            head_b: Array1::zeros(horizon),
            lookback,
            horizon,
            feature_names: (0..input).map(|j| format!("x{j}")).collect(),
            scalers: vec![ScalerParams::unit(); input],
            target_scaler: ScalerParams::unit(),
            train_config: TrainConfig::default(),
        })
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden
    }

    pub fn n_features(&self) -> usize {
        self.cell.input
    }

    pub fn n_params(&self) -> usize {
        self.cell.w.len() + self.cell.b.len() + self.head_w.len() + self.head_b.len()
    }

    fn check_inputs(&self, inputs: &ArrayView3<f64>) -> Result<()> {
        let (_, l, f) = inputs.dim();
        if l != self.lookback {
            return Err(Error::DimensionMismatch { expected: self.lookback, got: l });
        }
        if f != self.cell.input {
            return Err(Error::DimensionMismatch { expected: self.cell.input, got: f });
        }
        Ok(())
    }

    /// Runs all windows `(N, L, F)` in lockstep from a zero state and returns
    /// the `(N, H)` head outputs.
    pub fn forward_batch(&self, inputs: ArrayView3<f64>) -> Result<(Array2<f64>, SequenceCache)> {
        self.check_inputs(&inputs)?;
        let (n, l, f) = inputs.dim();
        let h = self.cell.hidden;
        let w_t = self.cell.w.t();
        let mut h_prev = Array2::<f64>::zeros((n, h));
        let mut c_prev = Array2::<f64>::zeros((n, h));
        let mut steps = Vec::with_capacity(l);
        for t in 0..l {
            let mut z = Array2::<f64>::zeros((n, h + f));
            z.slice_mut(s![.., ..h]).assign(&h_prev);
            z.slice_mut(s![.., h..]).assign(&inputs.slice(s![.., t, ..]));
            let pre = z.dot(&w_t) + &self.cell.b;
            let i = pre.slice(s![.., ..h]).mapv(sigmoid);
            let fg = pre.slice(s![.., h..2 * h]).mapv(sigmoid);
            let o = pre.slice(s![.., 2 * h..3 * h]).mapv(sigmoid);
            let g = pre.slice(s![.., 3 * h..]).mapv(f64::tanh);
            let c = &fg * &c_prev + &i * &g;
            let tanh_c = c.mapv(f64::tanh);
            h_prev = &o * &tanh_c;
            c_prev = c.clone();
            steps.push(StepCache { z, i, f: fg, o, g, c, tanh_c });
        }
        let y = h_prev.dot(&self.head_w.t()) + &self.head_b;
        Ok((y, SequenceCache { steps, h_last: h_prev }))
    }

    /// One `L × F` window.
    pub fn forward_sequence(&self, window: ArrayView2<f64>) -> Result<(Array1<f64>, SequenceCache)> {
        let (l, f) = window.dim();
        let batch = window.to_owned().into_shape_with_order((1, l, f)).expect("contiguous window");
        let (y, cache) = self.forward_batch(batch.view())?;
        Ok((y.row(0).to_owned(), cache))
    }

    pub fn predict(&self, inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_batch(inputs)?.0)
    }

    /// Mean squared error over every window and horizon step.
    pub fn loss(&self, inputs: ArrayView3<f64>, targets: ArrayView2<f64>) -> Result<f64> {
        let y = self.predict(inputs)?;
        Ok((&y - &targets).mapv(|d| d * d).mean().unwrap_or(0.0))
    }

    /// Loss and its exact gradient by backpropagation through all steps.
    pub fn loss_and_gradients(&self, inputs: ArrayView3<f64>, targets: ArrayView2<f64>) -> Result<(f64, Gradients)> {
        let (y, cache) = self.forward_batch(inputs)?;
        if targets.dim() != y.dim() {
            return Err(Error::DimensionMismatch { expected: y.ncols(), got: targets.ncols() });
        }
        let diff = &y - &targets;
        let count = diff.len() as f64;
        let loss = diff.mapv(|d| d * d).sum() / count;
        let dy = diff.mapv(|d| 2.0 * d / count);

        let h = self.cell.hidden;
        let n = inputs.dim().0;
        let head_w = dy.t().dot(&cache.h_last);
        let head_b = dy.sum_axis(Axis(0));
        let mut dh = dy.dot(&self.head_w);
        let mut dc = Array2::<f64>::zeros((n, h));
        let mut w = Array2::<f64>::zeros(self.cell.w.dim());
        let mut b = Array1::<f64>::zeros(self.cell.b.len());
        let mut da = Array2::<f64>::zeros((n, 4 * h));
        for t in (0..cache.steps.len()).rev() {
            let st = &cache.steps[t];
            // dc accumulates the path through h_t = o ∘ tanh(c_t)
            dc = dc + &dh * &st.o * &st.tanh_c.mapv(|v| 1.0 - v * v);
            let d_o = &dh * &st.tanh_c;
            let d_i = &dc * &st.g;
            let d_g = &dc * &st.i;
            let d_f = if t > 0 { &dc * &cache.steps[t - 1].c } else { Array2::zeros((n, h)) };
            da.slice_mut(s![.., ..h]).assign(&(&d_i * &st.i * &st.i.mapv(|v| 1.0 - v)));
            da.slice_mut(s![.., h..2 * h]).assign(&(&d_f * &st.f * &st.f.mapv(|v| 1.0 - v)));
            da.slice_mut(s![.., 2 * h..3 * h]).assign(&(&d_o * &st.o * &st.o.mapv(|v| 1.0 - v)));
            da.slice_mut(s![.., 3 * h..]).assign(&(&d_g * &st.g.mapv(|v| 1.0 - v * v)));
            w = w + da.t().dot(&st.z);
            b = b + da.sum_axis(Axis(0));
            let dz = da.dot(&self.cell.w);
            dh = dz.slice(s![.., ..h]).to_owned();
            dc = &dc * &st.f;
        }
        Ok((loss, Gradients { w, b, head_w, head_b }))
    }
}

fn clip(g: &mut [f64], max_norm: f64) {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        g.iter_mut().for_each(|v| *v *= k);
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(sizes: &[usize]) -> Self {
        Self { m: sizes.iter().map(|&n| vec![0.0; n]).collect(), v: sizes.iter().map(|&n| vec![0.0; n]).collect(), step: 0 }
    }

    fn update(&mut self, params: [&mut [f64]; 4], grads: [&mut [f64]; 4], lr: f64, clip_norm: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step);
        let bc2 = 1.0 - BETA2.powi(self.step);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            clip(g, clip_norm);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for j in 0..p.len() {
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                p[j] -= lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + EPS);
            }
        }
    }
}

/// Minimises the MSE on `data` with Adam and returns the per-epoch loss
/// (the mean of the batch losses seen during that epoch).
pub fn train(model: &LstmModel, data: &WindowedDataset, config: &TrainConfig) -> Result<(LstmModel, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) || config.gradient_clip <= 0.0 {
        return Err(Error::InvalidConfig("learning rate must be ≥ 0 and gradient clip > 0".into()));
    }
    if data.horizon != model.horizon {
        return Err(Error::DimensionMismatch { expected: model.horizon, got: data.horizon });
    }
    let mut model = model.clone();
    model.train_config = *config;
    let n = data.len();
    let batch = config.batch_size.unwrap_or(n).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = Adam::new(&[model.cell.w.len(), model.cell.b.len(), model.head_w.len(), model.head_b.len()]);
    let mut trace = Vec::with_capacity(config.epochs);
    let shuffled = batch < n;
    let (full_x, full_y) = (data.inputs.view(), data.targets.view());
    for epoch in 0..config.epochs {
        if shuffled {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let (loss, mut g) = if shuffled {
                let xb: Array3<f64> = data.inputs.select(Axis(0), chunk);
                let yb: Array2<f64> = data.targets.select(Axis(0), chunk);
                model.loss_and_gradients(xb.view(), yb.view())?
            } else {
                model.loss_and_gradients(full_x, full_y)?
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            total += loss * chunk.len() as f64;
            adam.update(
                [
                    model.cell.w.as_slice_mut().expect("standard layout"),
                    model.cell.b.as_slice_mut().expect("standard layout"),
                    model.head_w.as_slice_mut().expect("standard layout"),
                    model.head_b.as_slice_mut().expect("standard layout"),
                ],
                [
                    g.w.as_slice_mut().expect("standard layout"),
                    g.b.as_slice_mut().expect("standard layout"),
                    g.head_w.as_slice_mut().expect("standard layout"),
                    g.head_b.as_slice_mut().expect("standard layout"),
                ],
                config.learning_rate,
                config.gradient_clip,
            );
        }
        let epoch_loss = total / n as f64;
        log::debug!("epoch {epoch}: loss {epoch_loss:.6}");
        trace.push(epoch_loss);
    }
    if model.cell.w.iter().chain(model.head_w.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss(config.epochs));
    }
    Ok((model, trace))
}

pub const MODEL_FORMAT: &str = "lstm_model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LstmFile {
    format: String,
    version: u32,
    hidden: usize,
    input: usize,
    lookback: usize,
    horizon: usize,
    feature_names: Vec<String>,
    scalers: Vec<ScalerParams>,
    target_scaler: ScalerParams,
    train_config: TrainConfig,
    /// Row-major `4·hidden × (hidden + input)`.
    w: Vec<f64>,
    b: Vec<f64>,
    /// Row-major `horizon × hidden`.
    head_w: Vec<f64>,
    head_b: Vec<f64>,
}

impl LstmModel {
    pub fn to_json(&self) -> Result<String> {
        let file = LstmFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            hidden: self.cell.hidden,
            input: self.cell.input,
            lookback: self.lookback,
            horizon: self.horizon,
            feature_names: self.feature_names.clone(),
            scalers: self.scalers.clone(),
            target_scaler: self.target_scaler,
            train_config: self.train_config,
            w: self.cell.w.iter().copied().collect(),
            b: self.cell.b.to_vec(),
            head_w: self.head_w.iter().copied().collect(),
            head_b: self.head_b.to_vec(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: LstmFile = serde_json::from_str(s)?;
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported model file {} v{}", f.format, f.version)));
        }
        let shape_err = |_| Error::InvalidConfig("weight arrays do not match the stored shapes".into());
        let w = Array2::from_shape_vec((4 * f.hidden, f.hidden + f.input), f.w).map_err(shape_err)?;
        let head_w = Array2::from_shape_vec((f.horizon, f.hidden), f.head_w).map_err(shape_err)?;
        if f.b.len() != 4 * f.hidden || f.head_b.len() != f.horizon || f.scalers.len() != f.input {
            return Err(Error::InvalidConfig("bias or scaler count does not match the stored shapes".into()));
        }
        Ok(Self {
            cell: LstmCellParams { hidden: f.hidden, input: f.input, w, b: Array1::from(f.b) },
            head_w,
            head_b: Array1::from(f.head_b),
            lookback: f.lookback,
            horizon: f.horizon,
            feature_names: f.feature_names,
            scalers: f.scalers,
            target_scaler: f.target_scaler,
            train_config: f.train_config,
        })
    }
}
