//! Layer kinds with per-sample forward and backward passes.
//!
//! Activations are row-major matrices whose rows are positions and whose
//! columns are channels; a plain vector is a single row. The network input
//! may also be a sparse vector or a sequence of vocabulary ids, which only
//! the first layer ever sees.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::TermVector;
use crate::models::{ModelError, Result};
use crate::tensor::Matrix;

/// Activation flowing between layers.
#[derive(Debug, Clone)]
pub enum Act {
    Sparse(TermVector),
    Dense(Matrix),
    OneHot { ids: Vec<Option<usize>>, dim: usize },
}

impl Act {
    pub fn shape(&self) -> Shape {
        match self {
            Act::Sparse(v) => Shape::Sparse(v.dim()),
            Act::Dense(m) => Shape::Dense(m.rows(), m.cols()),
            Act::OneHot { ids, dim } => Shape::OneHot(ids.len(), *dim),
        }
    }

    fn into_dense(self) -> Result<Matrix> {
        match self {
            Act::Dense(m) => Ok(m),
            other => Err(ModelError::Shape(format!("expected a dense activation, got {:?}", other.shape()))),
        }
    }
}

/// Static activation shape, used to size layers and validate inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Sparse(usize),
    Dense(usize, usize),
    /// Sequence length (0 means variable) and vocabulary size.
    OneHot(usize, usize),
}

impl Shape {
    /// Whether a concrete input is acceptable where `self` is expected.
    pub fn accepts(&self, actual: Shape) -> bool {
        match (*self, actual) {
            (Shape::OneHot(_, d), Shape::OneHot(_, e)) => d == e,
            (a, b) => a == b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub l2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub channels: usize,
    pub kernel: usize,
    pub filters: usize,
    /// `filters x (kernel * channels)`; each row is a window in input row-major order.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub inputs: usize,
    pub units: usize,
    /// `4*units x inputs`, gate blocks ordered input, forget, cell, output.
    pub w_input: Vec<f64>,
    /// `4*units x units`.
    pub w_hidden: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Relu,
    Dropout { rate: f64 },
    Conv1d(Conv1d),
    /// Non-overlapping max pooling along the position axis.
    MaxPool { size: usize },
    GlobalMaxPool,
    Flatten,
    Lstm(Lstm),
    /// Appends the auxiliary (user) feature vector to a single-row activation.
    ConcatAux { width: usize },
}

/// Glorot-uniform initialisation.
fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl Dense {
    pub fn new<R: Rng>(rng: &mut R, inputs: usize, outputs: usize, l2: bool) -> Self {
        Dense { inputs, outputs, weight: glorot(rng, inputs, outputs, inputs * outputs), bias: vec![0.0; outputs], l2 }
    }
}

impl Conv1d {
    pub fn new<R: Rng>(rng: &mut R, channels: usize, kernel: usize, filters: usize) -> Self {
        let fan = kernel * channels;
        Conv1d { channels, kernel, filters, weight: glorot(rng, fan, filters, fan * filters), bias: vec![0.0; filters] }
    }
}

impl Lstm {
    pub fn new<R: Rng>(rng: &mut R, inputs: usize, units: usize) -> Self {
        let mut bias = vec![0.0; 4 * units];
        bias[units..2 * units].iter_mut().for_each(|b| *b = 1.0);
        Lstm {
            inputs,
            units,
            w_input: glorot(rng, inputs, 4 * units, 4 * units * inputs),
            w_hidden: glorot(rng, units, 4 * units, 4 * units * units),
            bias,
        }
    }
}

/// What a layer remembers from its forward pass for the backward pass.
#[derive(Debug)]
pub enum Cache {
    None,
    Dense(Act),
    Relu(Vec<bool>),
    Dropout(Vec<f64>),
    Conv(Matrix),
    MaxPool { argmax: Vec<usize>, rows: usize, cols: usize },
    Flatten { rows: usize, cols: usize },
    Lstm(LstmTrace),
    ConcatAux { main: usize },
}

#[derive(Debug)]
pub struct LstmTrace {
    input: Act,
    /// Per step: gate activations `[i | f | g | o]` (length 4H).
    gates: Vec<Vec<f64>>,
    /// Cell states c_0..c_T (c_0 = 0).
    cells: Vec<Vec<f64>>,
    /// Hidden states h_0..h_T (h_0 = 0).
    hidden: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Forward-pass mode. Dropout is only active when training.
pub enum Mode<'a, R: Rng> {
    Train(&'a mut R),
    Eval,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::Conv1d(_) => "conv1d",
            Layer::MaxPool { .. } => "max_pool",
            Layer::GlobalMaxPool => "global_max_pool",
            Layer::Flatten => "flatten",
            Layer::Lstm(_) => "lstm",
            Layer::ConcatAux { .. } => "concat_aux",
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |why: &str| Err(ModelError::Shape(format!("{}: {why} (input {input:?})", self.name())));
        match (self, input) {
            (Layer::Dense(d), Shape::Sparse(n) | Shape::Dense(1, n)) if n == d.inputs => Ok(Shape::Dense(1, d.outputs)),
            (Layer::Dense(_), _) => bad("input width does not match"),
            (Layer::Relu | Layer::Dropout { .. }, Shape::Dense(..)) => Ok(input),
            (Layer::Conv1d(c), Shape::Dense(len, ch) | Shape::OneHot(len, ch)) if ch == c.channels => {
                if len < c.kernel {
                    bad("input shorter than the kernel")
                } else {
                    Ok(Shape::Dense(len - c.kernel + 1, c.filters))
                }
            }
            (Layer::Conv1d(c), Shape::Sparse(len)) if c.channels == 1 => {
                if len < c.kernel {
                    bad("input shorter than the kernel")
                } else {
                    Ok(Shape::Dense(len - c.kernel + 1, c.filters))
                }
            }
            (Layer::MaxPool { size }, Shape::Dense(r, c)) => {
                if r < *size {
                    bad("fewer positions than the pool size")
                } else {
                    Ok(Shape::Dense(r / size, c))
                }
            }
            (Layer::GlobalMaxPool, Shape::Dense(r, c)) if r > 0 => Ok(Shape::Dense(1, c)),
            (Layer::Flatten, Shape::Dense(r, c)) => Ok(Shape::Dense(1, r * c)),
            (Layer::Lstm(l), Shape::Dense(_, c) | Shape::OneHot(_, c)) if c == l.inputs => Ok(Shape::Dense(1, l.units)),
            (Layer::ConcatAux { width }, Shape::Sparse(n)) => Ok(Shape::Sparse(n + width)),
            (Layer::ConcatAux { width }, Shape::Dense(1, n)) => Ok(Shape::Dense(1, n + width)),
            _ => bad("unsupported input"),
        }
    }

    /// Number of parameter tensors this layer owns.
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense(_) | Layer::Conv1d(_) => 2,
            Layer::Lstm(_) => 3,
            _ => 0,
        }
    }

    pub fn params(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        match self {
            Layer::Dense(d) => vec![
                ("weight", vec![d.outputs, d.inputs], &d.weight[..]),
                ("bias", vec![d.outputs], &d.bias[..]),
            ],
            Layer::Conv1d(c) => vec![
                ("weight", vec![c.filters, c.kernel, c.channels], &c.weight[..]),
                ("bias", vec![c.filters], &c.bias[..]),
            ],
            Layer::Lstm(l) => vec![
                ("w_input", vec![4 * l.units, l.inputs], &l.w_input[..]),
                ("w_hidden", vec![4 * l.units, l.units], &l.w_hidden[..]),
                ("bias", vec![4 * l.units], &l.bias[..]),
            ],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Conv1d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Lstm(l) => vec![&mut l.w_input, &mut l.w_hidden, &mut l.bias],
            _ => Vec::new(),
        }
    }

    /// Index of the L2-penalised parameter tensor within this layer, if any.
    pub fn l2_param(&self) -> Option<usize> {
        match self {
            Layer::Dense(d) if d.l2 => Some(0),
            _ => None,
        }
    }

    pub fn forward<R: Rng>(&self, input: Act, aux: &[f64], mode: &mut Mode<'_, R>) -> Result<(Act, Cache)> {
        match self {
            Layer::Dense(d) => {
                let mut out = d.bias.clone();
                match &input {
                    Act::Sparse(v) => {
                        for (o, row) in out.iter_mut().zip(d.weight.chunks_exact(d.inputs)) {
                            *o += v.dot(row);
                        }
                    }
                    Act::Dense(m) if m.rows() == 1 && m.cols() == d.inputs => {
                        for (o, row) in out.iter_mut().zip(d.weight.chunks_exact(d.inputs)) {
                            *o += dot(row, m.data());
                        }
                    }
                    other => return Err(ModelError::Shape(format!("dense: bad input {:?}", other.shape()))),
                }
                Ok((Act::Dense(Matrix::row_vector(out)), Cache::Dense(input)))
            }
            Layer::Relu => {
                let mut m = input.into_dense()?;
                let mask: Vec<bool> = m.data().iter().map(|&v| v > 0.0).collect();
                m.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                Ok((Act::Dense(m), Cache::Relu(mask)))
            }
            Layer::Dropout { rate } => {
                let mut m = input.into_dense()?;
                match mode {
                    Mode::Train(rng) if *rate > 0.0 => {
                        let keep = 1.0 - rate;
                        let mask: Vec<f64> =
                            (0..m.len()).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                        m.data_mut().iter_mut().zip(&mask).for_each(|(v, k)| *v *= k);
                        Ok((Act::Dense(m), Cache::Dropout(mask)))
                    }
                    _ => Ok((Act::Dense(m), Cache::None)),
                }
            }
            Layer::Conv1d(c) => {
                let x = match input {
                    Act::Sparse(v) => Matrix::from_vec(v.dim(), 1, v.to_dense()),
                    Act::OneHot { ids, dim } => one_hot_matrix(&ids, dim),
                    Act::Dense(m) => m,
                };
                if x.cols() != c.channels || x.rows() < c.kernel {
                    return Err(ModelError::Shape(format!(
                        "conv1d: input {}x{} vs kernel {} over {} channels",
                        x.rows(),
                        x.cols(),
                        c.kernel,
                        c.channels
                    )));
                }
                let span = c.kernel * c.channels;
                let positions = x.rows() - c.kernel + 1;
                let mut out = Matrix::zeros(positions, c.filters);
                for p in 0..positions {
                    let window = &x.data()[p * c.channels..p * c.channels + span];
                    let row = out.row_mut(p);
                    for (f, w) in c.weight.chunks_exact(span).enumerate() {
                        row[f] = c.bias[f] + dot(w, window);
                    }
                }
                Ok((Act::Dense(out), Cache::Conv(x)))
            }
            Layer::MaxPool { size } => {
                let m = input.into_dense()?;
                let (rows, cols) = (m.rows(), m.cols());
                let out_rows = rows / size;
                if out_rows == 0 {
                    return Err(ModelError::Shape(format!("max_pool: {rows} positions < pool {size}")));
                }
                let mut out = Matrix::zeros(out_rows, cols);
                let mut argmax = vec![0usize; out_rows * cols];
                for r in 0..out_rows {
                    for col in 0..cols {
                        let mut best = r * size;
                        for k in r * size..(r + 1) * size {
                            if m.get(k, col) > m.get(best, col) {
                                best = k;
                            }
                        }
                        out.set(r, col, m.get(best, col));
                        argmax[r * cols + col] = best;
                    }
                }
                Ok((Act::Dense(out), Cache::MaxPool { argmax, rows, cols }))
            }
            Layer::GlobalMaxPool => {
                let m = input.into_dense()?;
                let (rows, cols) = (m.rows(), m.cols());
                let mut out = Matrix::zeros(1, cols);
                let mut argmax = Vec::with_capacity(cols);
                for col in 0..cols {
                    let mut best = 0;
                    for k in 1..rows {
                        if m.get(k, col) > m.get(best, col) {
                            best = k;
                        }
                    }
                    out.set(0, col, m.get(best, col));
                    argmax.push(best);
                }
                Ok((Act::Dense(out), Cache::MaxPool { argmax, rows, cols }))
            }
            Layer::Flatten => {
                let m = input.into_dense()?;
                let (rows, cols) = (m.rows(), m.cols());
                Ok((Act::Dense(m.flattened()), Cache::Flatten { rows, cols }))
            }
            Layer::Lstm(l) => {
                let trace = l.run(input)?;
                let h = trace.hidden.last().cloned().unwrap_or_default();
                Ok((Act::Dense(Matrix::row_vector(h)), Cache::Lstm(trace)))
            }
            Layer::ConcatAux { width } => {
                if aux.len() != *width {
                    return Err(ModelError::Shape(format!("expected {width} user features, got {}", aux.len())));
                }
                match input {
                    Act::Sparse(v) => {
                        let main = v.dim();
                        Ok((Act::Sparse(v.extended(aux)), Cache::ConcatAux { main }))
                    }
                    Act::Dense(m) if m.rows() == 1 => {
                        let main = m.cols();
                        let mut data = m.into_vec();
                        data.extend_from_slice(aux);
                        Ok((Act::Dense(Matrix::row_vector(data)), Cache::ConcatAux { main }))
                    }
                    other => Err(ModelError::Shape(format!("concat_aux: bad input {:?}", other.shape()))),
                }
            }
        }
    }

    /// Accumulate parameter gradients into `grads` (this layer's tensors, in
    /// `params()` order) and return the gradient with respect to the input,
    /// or `None` when `need_input_grad` is false.
    pub fn backward(
        &self,
        cache: Cache,
        grad_out: Matrix,
        grads: &mut [Vec<f64>],
        need_input_grad: bool,
    ) -> Result<Option<Matrix>> {
        match (self, cache) {
            (Layer::Dense(d), Cache::Dense(input)) => {
                let g = grad_out.data();
                let (gw, rest) = grads.split_at_mut(1);
                let gw = &mut gw[0];
                let gb = &mut rest[0];
                for (o, &go) in g.iter().enumerate() {
                    gb[o] += go;
                }
                match &input {
                    Act::Sparse(v) => {
                        for (o, &go) in g.iter().enumerate() {
                            if go != 0.0 {
                                let row = &mut gw[o * d.inputs..(o + 1) * d.inputs];
                                for &(i, x) in v.entries() {
                                    row[i] += go * x;
                                }
                            }
                        }
                    }
                    Act::Dense(m) => {
                        for (o, &go) in g.iter().enumerate() {
                            if go != 0.0 {
                                axpy(go, m.data(), &mut gw[o * d.inputs..(o + 1) * d.inputs]);
                            }
                        }
                    }
                    Act::OneHot { .. } => return Err(ModelError::Shape("dense: one-hot input".into())),
                }
                if !need_input_grad {
                    return Ok(None);
                }
                let mut gi = vec![0.0; d.inputs];
                for (o, &go) in g.iter().enumerate() {
                    axpy(go, &d.weight[o * d.inputs..(o + 1) * d.inputs], &mut gi);
                }
                Ok(Some(Matrix::row_vector(gi)))
            }
            (Layer::Relu, Cache::Relu(mask)) => {
                let mut g = grad_out;
                g.data_mut().iter_mut().zip(mask).for_each(|(v, keep)| {
                    if !keep {
                        *v = 0.0
                    }
                });
                Ok(Some(g))
            }
            (Layer::Dropout { .. }, Cache::Dropout(mask)) => {
                let mut g = grad_out;
                g.data_mut().iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                Ok(Some(g))
            }
            (Layer::Dropout { .. }, Cache::None) => Ok(Some(grad_out)),
            (Layer::Conv1d(c), Cache::Conv(x)) => {
                let span = c.kernel * c.channels;
                let positions = grad_out.rows();
                let (gw, rest) = grads.split_at_mut(1);
                let gw = &mut gw[0];
                let gb = &mut rest[0];
                let mut gx = need_input_grad.then(|| Matrix::zeros(x.rows(), x.cols()));
                for p in 0..positions {
                    let window = &x.data()[p * c.channels..p * c.channels + span];
                    for f in 0..c.filters {
                        let go = grad_out.get(p, f);
                        if go == 0.0 {
                            continue;
                        }
                        gb[f] += go;
                        axpy(go, window, &mut gw[f * span..(f + 1) * span]);
                        if let Some(gx) = gx.as_mut() {
                            let w = &c.weight[f * span..(f + 1) * span];
                            axpy(go, w, &mut gx.data_mut()[p * c.channels..p * c.channels + span]);
                        }
                    }
                }
                Ok(gx)
            }
            (Layer::MaxPool { .. } | Layer::GlobalMaxPool, Cache::MaxPool { argmax, rows, cols }) => {
                let mut gi = Matrix::zeros(rows, cols);
                for r in 0..grad_out.rows() {
                    for col in 0..cols {
                        let src = argmax[r * cols + col];
                        let v = gi.get(src, col) + grad_out.get(r, col);
                        gi.set(src, col, v);
                    }
                }
                Ok(Some(gi))
            }
            (Layer::Flatten, Cache::Flatten { rows, cols }) => Ok(Some(Matrix::from_vec(rows, cols, grad_out.into_vec()))),
            (Layer::Lstm(l), Cache::Lstm(trace)) => l.backprop(trace, grad_out.data(), grads, need_input_grad),
            (Layer::ConcatAux { .. }, Cache::ConcatAux { main }) => {
                if !need_input_grad {
                    return Ok(None);
                }
                let mut data = grad_out.into_vec();
                data.truncate(main);
                Ok(Some(Matrix::row_vector(data)))
            }
            (layer, _) => Err(ModelError::Shape(format!("{}: cache does not match layer", layer.name()))),
        }
    }
}

fn one_hot_matrix(ids: &[Option<usize>], dim: usize) -> Matrix {
    let mut m = Matrix::zeros(ids.len(), dim);
    for (r, id) in ids.iter().enumerate() {
        if let Some(i) = id {
            m.set(r, *i, 1.0);
        }
    }
    m
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

impl Lstm {
    fn steps(input: &Act) -> Result<usize> {
        match input {
            Act::Dense(m) => Ok(m.rows()),
            Act::OneHot { ids, .. } => Ok(ids.len()),
            Act::Sparse(_) => Err(ModelError::Shape("lstm: sparse input".into())),
        }
    }

    /// `z += W_x x_t`
    fn add_input_term(&self, input: &Act, t: usize, z: &mut [f64]) {
        match input {
            Act::Dense(m) => {
                let x = m.row(t);
                for (zi, row) in z.iter_mut().zip(self.w_input.chunks_exact(self.inputs)) {
                    *zi += dot(row, x);
                }
            }
            Act::OneHot { ids, .. } => {
                if let Some(id) = ids[t] {
                    for (k, zi) in z.iter_mut().enumerate() {
                        *zi += self.w_input[k * self.inputs + id];
                    }
                }
            }
            Act::Sparse(_) => unreachable!("rejected in steps()"),
        }
    }

    fn run(&self, input: Act) -> Result<LstmTrace> {
        let steps = Self::steps(&input)?;
        let h_units = self.units;
        let mut trace = LstmTrace {
            gates: Vec::with_capacity(steps),
            cells: vec![vec![0.0; h_units]],
            hidden: vec![vec![0.0; h_units]],
            input,
        };
        for t in 0..steps {
            let mut z = self.bias.clone();
            self.add_input_term(&trace.input, t, &mut z);
            let h_prev = &trace.hidden[t];
            for (zi, row) in z.iter_mut().zip(self.w_hidden.chunks_exact(h_units)) {
                *zi += dot(row, h_prev);
            }
            let mut gates = z;
            for (k, g) in gates.iter_mut().enumerate() {
                *g = if (2 * h_units..3 * h_units).contains(&k) { g.tanh() } else { sigmoid(*g) };
            }
            let c_prev = &trace.cells[t];
            let c: Vec<f64> = (0..h_units)
                .map(|j| gates[h_units + j] * c_prev[j] + gates[j] * gates[2 * h_units + j])
                .collect();
            let h: Vec<f64> = (0..h_units).map(|j| gates[3 * h_units + j] * c[j].tanh()).collect();
            trace.gates.push(gates);
            trace.cells.push(c);
            trace.hidden.push(h);
        }
        Ok(trace)
    }

    fn backprop(
        &self,
        trace: LstmTrace,
        grad_h_last: &[f64],
        grads: &mut [Vec<f64>],
        need_input_grad: bool,
    ) -> Result<Option<Matrix>> {
        let hu = self.units;
        let steps = trace.gates.len();
        let mut dh = grad_h_last.to_vec();
        let mut dc = vec![0.0; hu];
        let mut gx = match (&trace.input, need_input_grad) {
            (Act::Dense(m), true) => Some(Matrix::zeros(m.rows(), m.cols())),
            _ => None,
        };
        let (g_in, rest) = grads.split_at_mut(1);
        let (g_hid, g_bias) = rest.split_at_mut(1);
        let (g_in, g_hid, g_bias) = (&mut g_in[0], &mut g_hid[0], &mut g_bias[0]);
        for t in (0..steps).rev() {
            let gates = &trace.gates[t];
            let c = &trace.cells[t + 1];
            let c_prev = &trace.cells[t];
            let h_prev = &trace.hidden[t];
            let mut dz = vec![0.0; 4 * hu];
            for j in 0..hu {
                let (i, f, g, o) = (gates[j], gates[hu + j], gates[2 * hu + j], gates[3 * hu + j]);
                let tc = c[j].tanh();
                let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                dz[j] = dcj * g * i * (1.0 - i);
                dz[hu + j] = dcj * c_prev[j] * f * (1.0 - f);
                dz[2 * hu + j] = dcj * i * (1.0 - g * g);
                dz[3 * hu + j] = dh[j] * tc * o * (1.0 - o);
                dc[j] = dcj * f;
            }
            for (k, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g_bias[k] += d;
                axpy(d, h_prev, &mut g_hid[k * hu..(k + 1) * hu]);
                match &trace.input {
                    Act::Dense(m) => axpy(d, m.row(t), &mut g_in[k * self.inputs..(k + 1) * self.inputs]),
                    Act::OneHot { ids, .. } => {
                        if let Some(id) = ids[t] {
                            g_in[k * self.inputs + id] += d;
                        }
                    }
                    Act::Sparse(_) => unreachable!(),
                }
            }
            if let Some(gx) = gx.as_mut() {
                let row = gx.row_mut(t);
                for (k, &d) in dz.iter().enumerate() {
                    axpy(d, &self.w_input[k * self.inputs..(k + 1) * self.inputs], row);
                }
            }
            let mut dh_prev = vec![0.0; hu];
            for (k, &d) in dz.iter().enumerate() {
                axpy(d, &self.w_hidden[k * hu..(k + 1) * hu], &mut dh_prev);
            }
            dh = dh_prev;
        }
        Ok(gx)
    }
}
