use rand::Rng;

use super::params::ParameterVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

/// Nonlinearity applied to the final layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation<T> {
    Identity,
    Tanh,
    /// `bound * tanh(z)`, mapping onto the open box `(-bound, bound)`.
    ScaledTanh(T),
}

/// A dense feed-forward network description. Parameters live separately in a
/// [`ParameterVector`], so one `Mlp` can evaluate online and target copies.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layer_sizes: Vec<usize>,
    hidden: Activation,
    output: OutputActivation<T>,
}

/// Activations recorded by [`Mlp::forward_trace`] for a later backward pass.
///
/// `activations[0]` is the input and `activations[L]` the network output.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<Vec<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace holds the input at least")
    }
}

/// Activations of a whole batch, one row-major `n x width` matrix per layer.
#[derive(Debug, Clone)]
pub struct BatchTrace<T> {
    pub n: usize,
    pub activations: Vec<Vec<T>>,
}

impl<T: Scalar> BatchTrace<T> {
    /// All outputs, `n x output_dim`.
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace holds the input at least")
    }

    pub fn output_row(&self, i: usize) -> &[T] {
        let out = self.output();
        let w = out.len() / self.n.max(1);
        &out[i * w..(i + 1) * w]
    }
}

/// What the loss wants from one network output.
#[derive(Debug, Clone, Copy)]
pub enum LossTarget<'a, T> {
    /// Per-sample loss `sum_o (y_o - t_o)^2`.
    Squared(&'a [T]),
    /// Externally supplied `dL/dy` for this sample.
    Upstream(&'a [T]),
}

#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub input: &'a [T],
    pub target: LossTarget<'a, T>,
}

impl<T: Scalar> Mlp<T> {
    /// `layer_sizes` lists the input width, every hidden width and the output
    /// width. Two entries describe a single affine layer.
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden: Activation,
        output: OutputActivation<T>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "an mlp needs at least an input and an output size".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if let OutputActivation::ScaledTanh(bound) = output {
            if !(bound > T::zero()) || !bound.is_finite() {
                return Err(Error::Config(format!("output bound {bound} must be positive")));
            }
        }
        Ok(Self {
            layer_sizes,
            hidden,
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

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation<T> {
        self.output
    }

    /// `(rows, cols)` = `(fan_out, fan_in)` per layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layer_sizes.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn num_params(&self) -> usize {
        super::params::layout_len(&self.shapes())
    }

    pub fn zeros(&self) -> ParameterVector<T> {
        ParameterVector::zeros(self.shapes())
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector<T> {
        let mut params = self.zeros();
        let shapes = self.shapes();
        for (layer, &(rows, cols)) in shapes.iter().enumerate() {
            let limit = 1.0 / (cols as f64).sqrt();
            let (start, _, end) = params.layer_range(layer);
            debug_assert_eq!(end - start, rows * cols + rows);
            for v in &mut params.values_mut()[start..end] {
                *v = T::lit(rng.random_range(-limit..limit));
            }
        }
        params
    }

    fn check_params(&self, params: &ParameterVector<T>) -> Result<()> {
        let shapes = params.shapes();
        if shapes.len() != self.num_layers()
            || shapes
                .iter()
                .zip(self.layer_sizes.windows(2))
                .any(|(&(r, c), w)| r != w[1] || c != w[0])
        {
            return Err(Error::Config(
                "parameter layout does not match network architecture".into(),
            ));
        }
        Ok(())
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(params: &ParameterVector<T>, layer: usize, x: &[T], out: &mut Vec<T>) {
        let (rows, cols) = params.shapes()[layer];
        let (w, b, _) = params.layer_range(layer);
        let v = params.values();
        out.clear();
        for r in 0..rows {
            let row = &v[w + r * cols..w + (r + 1) * cols];
            out.push(v[b + r] + dot(row, x));
        }
    }

    fn apply_hidden(&self, z: &mut [T]) {
        match self.hidden {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(T::zero())),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
        }
    }

    fn apply_output(&self, z: &mut [T]) {
        match self.output {
            OutputActivation::Identity => {}
            OutputActivation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            OutputActivation::ScaledTanh(b) => z.iter_mut().for_each(|v| *v = b * v.tanh()),
        }
    }

    pub fn forward(&self, params: &ParameterVector<T>, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_trace(params, input)?.activations.pop().unwrap())
    }

    pub fn forward_trace(&self, params: &ParameterVector<T>, input: &[T]) -> Result<Trace<T>> {
        self.check_params(params)?;
        self.check_input(input)?;
        let depth = self.num_layers();
        let mut activations = Vec::with_capacity(depth + 1);
        activations.push(input.to_vec());
        for layer in 0..depth {
            let mut z = Vec::new();
            Self::affine(params, layer, &activations[layer], &mut z);
            if layer + 1 == depth {
                self.apply_output(&mut z);
            } else {
                self.apply_hidden(&mut z);
            }
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    /// Backpropagates `upstream = dL/dy` through a recorded trace.
    ///
    /// Parameter gradients are accumulated (added) into `grad`; the gradient
    /// with respect to the network input is returned.
    pub fn backward(
        &self,
        params: &ParameterVector<T>,
        trace: &Trace<T>,
        upstream: &[T],
        mut grad: Option<&mut ParameterVector<T>>,
    ) -> Vec<T> {
        let depth = self.num_layers();
        debug_assert_eq!(upstream.len(), self.output_dim());
        let out = trace.output();
        let mut delta: Vec<T> = match self.output {
            OutputActivation::Identity => upstream.to_vec(),
            OutputActivation::Tanh => upstream
                .iter()
                .zip(out)
                .map(|(&g, &y)| g * (T::one() - y * y))
                .collect(),
            OutputActivation::ScaledTanh(b) => upstream
                .iter()
                .zip(out)
                .map(|(&g, &y)| {
                    let t = y / b;
                    g * b * (T::one() - t * t)
                })
                .collect(),
        };
        let v = params.values();
        let mut d_in = Vec::new();
        for layer in (0..depth).rev() {
            let (rows, cols) = params.shapes()[layer];
            let (w, b, _) = params.layer_range(layer);
            let x = &trace.activations[layer];
            if let Some(grad) = grad.as_deref_mut() {
                let g = grad.values_mut();
                for r in 0..rows {
                    let d = delta[r];
                    g[b + r] += d;
                    if d != T::zero() {
                        let grow = &mut g[w + r * cols..w + (r + 1) * cols];
                        for (gi, &xi) in grow.iter_mut().zip(x) {
                            *gi += d * xi;
                        }
                    }
                }
            }
            d_in.clear();
            d_in.resize(cols, T::zero());
            for r in 0..rows {
                let d = delta[r];
                if d == T::zero() {
                    continue;
                }
                let row = &v[w + r * cols..w + (r + 1) * cols];
                for (di, &wi) in d_in.iter_mut().zip(row) {
                    *di += wi * d;
                }
            }
            if layer > 0 {
                let h = x;
                match self.hidden {
                    Activation::Relu => {
                        for (di, &hi) in d_in.iter_mut().zip(h) {
                            if hi <= T::zero() {
                                *di = T::zero();
                            }
                        }
                    }
                    Activation::Tanh => {
                        for (di, &hi) in d_in.iter_mut().zip(h) {
                            *di *= T::one() - hi * hi;
                        }
                    }
                }
                std::mem::swap(&mut delta, &mut d_in);
            }
        }
        d_in
    }

    /// Mean loss over the batch; `Upstream` samples contribute nothing.
    pub fn loss(&self, params: &ParameterVector<T>, batch: &[Sample<'_, T>]) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::Usage("loss over an empty batch".into()));
        }
        let mut total = T::zero();
        for s in batch {
            if let LossTarget::Squared(t) = s.target {
                let y = self.forward(params, s.input)?;
                total += squared_error(&y, t)?;
            }
        }
        Ok(total / T::lit(batch.len() as f64))
    }

    /// Mean gradient over the batch.
    pub fn gradient(
        &self,
        params: &ParameterVector<T>,
        batch: &[Sample<'_, T>],
    ) -> Result<ParameterVector<T>> {
        Ok(self.loss_and_gradient(params, batch)?.1)
    }

    /// Mean loss and mean gradient from a single pass over the batch.
    pub fn loss_and_gradient(
        &self,
        params: &ParameterVector<T>,
        batch: &[Sample<'_, T>],
    ) -> Result<(T, ParameterVector<T>)> {
        if batch.is_empty() {
            return Err(Error::Usage("gradient over an empty batch".into()));
        }
        let n = batch.len();
        let out_dim = self.output_dim();
        let scale = T::one() / T::lit(n as f64);
        let inputs: Vec<&[T]> = batch.iter().map(|s| s.input).collect();
        let trace = self.forward_batch(params, &inputs)?;
        let mut loss = T::zero();
        let mut upstream = Vec::with_capacity(n * out_dim);
        for (i, s) in batch.iter().enumerate() {
            let y = trace.output_row(i);
            match s.target {
                LossTarget::Squared(t) => {
                    loss += squared_error(y, t)?;
                    upstream.extend(y.iter().zip(t).map(|(&yi, &ti)| T::lit(2.0) * (yi - ti) * scale));
                }
                LossTarget::Upstream(g) => {
                    check_target_len(g, out_dim)?;
                    upstream.extend(g.iter().map(|&gi| gi * scale));
                }
            }
        }
        let mut grad = params.zeros_like();
        self.backward_batch(params, &trace, &upstream, Some(&mut grad), false);
        Ok((loss * scale, grad))
    }

    /// Batched forward pass. Row `i` of every layer is bit-identical to
    /// [`Mlp::forward_trace`] on `inputs[i]`.
    pub fn forward_batch(&self, params: &ParameterVector<T>, inputs: &[&[T]]) -> Result<BatchTrace<T>> {
        self.check_params(params)?;
        let n = inputs.len();
        let mut x = Vec::with_capacity(n * self.input_dim());
        for input in inputs {
            self.check_input(input)?;
            x.extend_from_slice(input);
        }
        let depth = self.num_layers();
        let mut activations = Vec::with_capacity(depth + 1);
        activations.push(x);
        let v = params.values();
        for layer in 0..depth {
            let (rows, cols) = params.shapes()[layer];
            let (w, b, _) = params.layer_range(layer);
            let mut z = vec![T::zero(); n * rows];
            affine_batch(&v[w..b], &v[b..b + rows], rows, cols, &activations[layer], n, &mut z);
            if layer + 1 == depth {
                self.apply_output(&mut z);
            } else {
                self.apply_hidden(&mut z);
            }
            activations.push(z);
        }
        Ok(BatchTrace { n, activations })
    }

    /// Outputs only, one vector per input.
    pub fn forward_many(&self, params: &ParameterVector<T>, inputs: &[&[T]]) -> Result<Vec<Vec<T>>> {
        let trace = self.forward_batch(params, inputs)?;
        Ok((0..trace.n).map(|i| trace.output_row(i).to_vec()).collect())
    }

    /// Batched [`Mlp::backward`]: `upstream` is `n x output_dim`. Parameter
    /// gradients are accumulated in sample order, so they match a loop of
    /// per-sample calls bit for bit. The input gradient (`n x input_dim`) is
    /// computed only when `input_grad` is set; otherwise an empty vector is
    /// returned.
    pub fn backward_batch(
        &self,
        params: &ParameterVector<T>,
        trace: &BatchTrace<T>,
        upstream: &[T],
        mut grad: Option<&mut ParameterVector<T>>,
        input_grad: bool,
    ) -> Vec<T> {
        let n = trace.n;
        let depth = self.num_layers();
        debug_assert_eq!(upstream.len(), n * self.output_dim());
        let out = trace.output();
        let mut delta: Vec<T> = match self.output {
            OutputActivation::Identity => upstream.to_vec(),
            OutputActivation::Tanh => upstream
                .iter()
                .zip(out)
                .map(|(&g, &y)| g * (T::one() - y * y))
                .collect(),
            OutputActivation::ScaledTanh(b) => upstream
                .iter()
                .zip(out)
                .map(|(&g, &y)| {
                    let t = y / b;
                    g * b * (T::one() - t * t)
                })
                .collect(),
        };
        let v = params.values();
        let mut d_in = Vec::new();
        for layer in (0..depth).rev() {
            let (rows, cols) = params.shapes()[layer];
            let (w, b, _) = params.layer_range(layer);
            let x = &trace.activations[layer];
            if let Some(grad) = grad.as_deref_mut() {
                let g = grad.values_mut();
                for r in 0..rows {
                    let grow = &mut g[w + r * cols..w + (r + 1) * cols];
                    for i in 0..n {
                        let d = delta[i * rows + r];
                        if d != T::zero() {
                            let xi = &x[i * cols..(i + 1) * cols];
                            for (gi, &xv) in grow.iter_mut().zip(xi) {
                                *gi += d * xv;
                            }
                        }
                    }
                }
                for r in 0..rows {
                    for i in 0..n {
                        g[b + r] += delta[i * rows + r];
                    }
                }
            }
            if layer == 0 && !input_grad {
                return Vec::new();
            }
            d_in.clear();
            d_in.resize(n * cols, T::zero());
            for i in 0..n {
                let di = &mut d_in[i * cols..(i + 1) * cols];
                for r in 0..rows {
                    let d = delta[i * rows + r];
                    if d == T::zero() {
                        continue;
                    }
                    let row = &v[w + r * cols..w + (r + 1) * cols];
                    for (dv, &wv) in di.iter_mut().zip(row) {
                        *dv += wv * d;
                    }
                }
            }
            if layer > 0 {
                match self.hidden {
                    Activation::Relu => {
                        for (dv, &hv) in d_in.iter_mut().zip(x) {
                            if hv <= T::zero() {
                                *dv = T::zero();
                            }
                        }
                    }
                    Activation::Tanh => {
                        for (dv, &hv) in d_in.iter_mut().zip(x) {
                            *dv *= T::one() - hv * hv;
                        }
                    }
                }
                std::mem::swap(&mut delta, &mut d_in);
            }
        }
        d_in
    }
}

/// `out[i][r] = bias[r] + dot(W[r], x[i])`, four samples at a time.
fn affine_batch<T: Scalar>(w: &[T], bias: &[T], rows: usize, cols: usize, x: &[T], n: usize, out: &mut [T]) {
    let mut i = 0;
    while i + 4 <= n {
        let xs = [
            &x[i * cols..(i + 1) * cols],
            &x[(i + 1) * cols..(i + 2) * cols],
            &x[(i + 2) * cols..(i + 3) * cols],
            &x[(i + 3) * cols..(i + 4) * cols],
        ];
        for r in 0..rows {
            let d = dot4(&w[r * cols..(r + 1) * cols], xs);
            for j in 0..4 {
                out[(i + j) * rows + r] = bias[r] + d[j];
            }
        }
        i += 4;
    }
    while i < n {
        let xi = &x[i * cols..(i + 1) * cols];
        for r in 0..rows {
            out[i * rows + r] = bias[r] + dot(&w[r * cols..(r + 1) * cols], xi);
        }
        i += 1;
    }
}

/// Four [`dot`] products sharing the left operand, same summation order.
#[inline]
fn dot4<T: Scalar>(a: &[T], xs: [&[T]; 4]) -> [T; 4] {
    let n = a.len();
    let mut acc = [[T::zero(); 4]; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        let (a0, a1, a2, a3) = (a[k], a[k + 1], a[k + 2], a[k + 3]);
        for j in 0..4 {
            let x = &xs[j][k..k + 4];
            acc[j][0] += a0 * x[0];
            acc[j][1] += a1 * x[1];
            acc[j][2] += a2 * x[2];
            acc[j][3] += a3 * x[3];
        }
    }
    let mut res = [T::zero(); 4];
    for j in 0..4 {
        let mut tail = T::zero();
        for k in 4 * chunks..n {
            tail += a[k] * xs[j][k];
        }
        res[j] = (acc[j][0] + acc[j][1]) + (acc[j][2] + acc[j][3]) + tail;
    }
    res
}

/// Dot product with four independent accumulators.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = T::zero();
    for k in 4 * chunks..n {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_target_len<T>(t: &[T], n: usize) -> Result<()> {
    if t.len() != n {
        return Err(Error::Config(format!(
            "target has length {}, network output has {n}",
            t.len()
        )));
    }
    Ok(())
}

fn squared_error<T: Scalar>(y: &[T], t: &[T]) -> Result<T> {
    check_target_len(t, y.len())?;
    Ok(y.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum())
}
