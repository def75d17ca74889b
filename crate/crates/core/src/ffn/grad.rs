use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};

use super::model::{FfnModel, Layer};
use crate::error::{Error, Result};

/// Loss gradient with the same layout as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &FfnModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    /// Tensors in the same order as [`FfnModel::params`].
    pub fn params(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn norm(&self) -> f64 {
        self.params().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Preallocated activation and delta buffers for batches of up to `capacity` rows.
#[derive(Debug, Clone)]
pub struct Workspace {
    capacity: usize,
    acts: Vec<Array2<f64>>,
    deltas: Vec<Array2<f64>>,
}

impl Workspace {
    pub fn new(model: &FfnModel, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        let bufs = || {
            model.layer_dims[1..]
                .iter()
                .map(|&w| Array2::zeros((capacity, w)))
                .collect::<Vec<_>>()
        };
        Self {
            capacity,
            acts: bufs(),
            deltas: bufs(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn fits(&self, model: &FfnModel) -> bool {
        self.acts.len() == model.layers.len()
            && self
                .acts
                .iter()
                .zip(&model.layer_dims[1..])
                .all(|(a, &w)| a.ncols() == w)
    }
}

fn check_batch(model: &FfnModel, x: &ArrayView2<'_, f64>, y: &ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != model.input_dim() {
        return Err(Error::shape(format!("{} input columns", model.input_dim()), x.ncols()));
    }
    if y.ncols() != model.output_dim() {
        return Err(Error::shape(format!("{} label columns", model.output_dim()), y.ncols()));
    }
    if x.nrows() != y.nrows() || x.nrows() == 0 {
        return Err(Error::shape(
            "equal, non-zero row counts",
            format!("{} inputs, {} labels", x.nrows(), y.nrows()),
        ));
    }
    Ok(())
}

/// Forward pass of `x` (at most `ws.capacity()` rows) into the workspace.
fn forward_into(model: &FfnModel, x: ArrayView2<'_, f64>, ws: &mut Workspace) {
    let b = x.nrows();
    let last = model.layers.len() - 1;
    for (l, layer) in model.layers.iter().enumerate() {
        let (before, rest) = ws.acts.split_at_mut(l);
        let input = if l == 0 { x } else { before[l - 1].slice(s![..b, ..]) };
        let mut z = rest[0].slice_mut(s![..b, ..]);
        general_mat_mul(1.0, &input, &layer.weights, 0.0, &mut z);
        let bias = layer.bias.as_slice().expect("standard layout");
        let z = z.into_slice().expect("row prefix of a standard array is contiguous");
        if l < last {
            let act = model.activation;
            for row in z.chunks_exact_mut(bias.len()) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v = act.apply(*v + b);
                }
            }
        } else {
            for row in z.chunks_exact_mut(bias.len()) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
        }
    }
}

fn squared_error(out: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    out.iter().zip(y.iter()).map(|(o, t)| (o - t) * (o - t)).sum()
}

/// Mean squared error over all rows and outputs, with the gradient written
/// into `grads`. Uses no allocation beyond `ws`.
pub fn backprop(
    model: &FfnModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> Result<f64> {
    check_batch(model, &x, &y)?;
    if x.nrows() > ws.capacity || !ws.fits(model) {
        return Err(Error::shape(
            format!("batch of at most {} rows for this architecture", ws.capacity),
            x.nrows(),
        ));
    }
    let b = x.nrows();
    let n_layers = model.layers.len();
    forward_into(model, x, ws);

    let scale = 2.0 / (b * model.output_dim()) as f64;
    let mut sse = 0.0;
    {
        let out = ws.acts[n_layers - 1].slice(s![..b, ..]);
        let mut delta = ws.deltas[n_layers - 1].slice_mut(s![..b, ..]);
        ndarray::Zip::from(&mut delta).and(&out).and(&y).for_each(|d, &o, &t| {
            let r = o - t;
            sse += r * r;
            *d = scale * r;
        });
    }

    for l in (0..n_layers).rev() {
        let input = if l == 0 { x } else { ws.acts[l - 1].slice(s![..b, ..]) };
        let (lower, upper) = ws.deltas.split_at_mut(l);
        let delta = upper[0].slice(s![..b, ..]);
        let g = &mut grads.layers[l];
        general_mat_mul(1.0, &input.t(), &delta, 0.0, &mut g.weights);
        let gb = g.bias.as_slice_mut().expect("standard layout");
        gb.fill(0.0);
        for row in delta.as_slice().expect("contiguous").chunks_exact(gb.len()) {
            for (acc, d) in gb.iter_mut().zip(row) {
                *acc += d;
            }
        }
        if l > 0 {
            let mut prev: ArrayViewMut2<'_, f64> = lower[l - 1].slice_mut(s![..b, ..]);
            general_mat_mul(1.0, &delta, &model.layers[l].weights.t(), 0.0, &mut prev);
            let act = model.activation;
            let a = ws.acts[l - 1].slice(s![..b, ..]);
            ndarray::Zip::from(&mut prev)
                .and(&a)
                .for_each(|d, &a| *d *= act.derivative_from_output(a));
        }
    }
    Ok(sse / (b * model.output_dim()) as f64)
}

/// Mean squared error of the model over all rows, evaluated in chunks that fit `ws`.
pub fn mse_chunked(
    model: &FfnModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    ws: &mut Workspace,
) -> Result<f64> {
    check_batch(model, &x, &y)?;
    if !ws.fits(model) {
        return Err(Error::shape("workspace for this architecture", "another architecture"));
    }
    let n = x.nrows();
    let last = model.layers.len() - 1;
    let mut sse = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + ws.capacity).min(n);
        let xb = x.slice(s![start..end, ..]);
        forward_into(model, xb, ws);
        sse += squared_error(ws.acts[last].slice(s![..end - start, ..]), y.slice(s![start..end, ..]));
        start = end;
    }
    Ok(sse / (n * model.output_dim()) as f64)
}

/// Loss and gradient for one batch, allocating fresh buffers.
pub fn loss_and_gradients(
    model: &FfnModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<(f64, Gradients)> {
    let mut ws = Workspace::new(model, x.nrows());
    let mut grads = Gradients::zeros_like(model);
    let loss = backprop(model, x, y, &mut ws, &mut grads)?;
    Ok((loss, grads))
}

pub fn mse_loss(model: &FfnModel, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    check_batch(model, &x, &y)?;
    let out = model.forward(x)?;
    Ok(squared_error(out.view(), y) / (x.nrows() * model.output_dim()) as f64)
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences with step `h`, over every parameter. Relative error is
/// `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(
    model: &FfnModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let (_, grads) = loss_and_gradients(model, x, y)?;
    let analytic: Vec<f64> = grads.params().flatten().copied().collect();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut k = 0;
    let n_tensors = probe.params().count();
    for t in 0..n_tensors {
        let len = probe.params().nth(t).map_or(0, <[f64]>::len);
        for i in 0..len {
            let orig = probe.params().nth(t).expect("tensor exists")[i];
            probe.params_mut().nth(t).expect("tensor exists")[i] = orig + h;
            let up = mse_loss(&probe, x, y)?;
            probe.params_mut().nth(t).expect("tensor exists")[i] = orig - h;
            let down = mse_loss(&probe, x, y)?;
            probe.params_mut().nth(t).expect("tensor exists")[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
            k += 1;
        }
    }
    Ok(worst)
}
