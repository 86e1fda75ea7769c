//! Stacked GRU next-step predictor trained by truncated backpropagation
//! through time.
//!
//! Each layer uses the gating
//!
//! ```text
//! z = σ(W_z x + U_z h + b_z)
//! r = σ(W_r x + U_r h + b_r)
//! n = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 - z) ⊙ h + z ⊙ n
//! ```
//!
//! and the top layer feeds a linear head with `d · l` outputs: the next `l`
//! values of the first `d` input dimensions, laid out dimension-major
//! (`i * l + (j - 1)` for dimension `i`, step `j`).
//!
//! All weights live in one flat `Vec<f64>`; [`Layout`] records the offsets.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::series::{SeriesMode, TimeSeries};
use crate::error::{Error, Result};
use crate::optim::{clip_norm, Adam};
use crate::rng;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    /// Hidden units per stacked layer, bottom first.
    pub hidden: Vec<usize>,
    /// Prediction horizon `l`.
    pub horizon: usize,
    /// Number of leading input dimensions to predict (`d`).
    pub predicted_dims: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Truncation length for backpropagation through time.
    pub bptt: usize,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig {
            hidden: vec![32, 32],
            horizon: 3,
            predicted_dims: 1,
            learning_rate: 0.005,
            epochs: 12,
            bptt: 32,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LayerSlots {
    n_in: usize,
    hidden: usize,
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layout {
    layers: Vec<LayerSlots>,
    out_w: usize,
    out_b: usize,
    n_out: usize,
    total: usize,
}

impl Layout {
    fn new(input_dim: usize, hidden: &[usize], n_out: usize) -> Self {
        let mut offset = 0;
        let mut n_in = input_dim;
        let mut layers = Vec::with_capacity(hidden.len());
        for &h in hidden {
            let w = offset;
            let u = w + 3 * h * n_in;
            let b = u + 3 * h * h;
            offset = b + 3 * h;
            layers.push(LayerSlots {
                n_in,
                hidden: h,
                w,
                u,
                b,
            });
            n_in = h;
        }
        let out_w = offset;
        let out_b = out_w + n_out * n_in;
        Layout {
            layers,
            out_w,
            out_b,
            n_out,
            total: out_b + n_out,
        }
    }

    fn top_hidden(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden)
    }
}

/// Trained (or freshly initialized) predictor with its input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruPredictor {
    pub format_version: u32,
    pub input_dim: usize,
    pub predicted_dims: usize,
    pub horizon: usize,
    pub hidden: Vec<usize>,
    pub mode: SeriesMode,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub seed: u64,
    /// Mean squared error (standardized units) per training epoch.
    pub epoch_loss: Vec<f64>,
    /// Ids of training series skipped as too short.
    pub excluded: Vec<String>,
    layout: Layout,
    params: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn matvec_add(out: &mut [f64], w: &[f64], cols: usize, x: &[f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        *o += acc;
    }
}

#[inline]
fn mat_t_vec_add(out: &mut [f64], w: &[f64], cols: usize, dy: &[f64]) {
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for c in 0..cols {
            out[c] += row[c] * d;
        }
    }
}

#[inline]
fn outer_add(g: &mut [f64], cols: usize, dy: &[f64], x: &[f64]) {
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for c in 0..cols {
            row[c] += d * x[c];
        }
    }
}

struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

impl GruPredictor {
    /// Randomly initialized predictor (uniform ±1/√h, biases zero).
    pub fn init(input_dim: usize, config: &GruConfig) -> Result<Self> {
        if input_dim == 0 || config.hidden.is_empty() || config.hidden.contains(&0) {
            return Err(Error::invalid("GRU needs input_dim > 0 and non-empty hidden sizes"));
        }
        if config.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if config.predicted_dims == 0 || config.predicted_dims > input_dim {
            return Err(Error::invalid("predicted_dims must be in 1..=input_dim"));
        }
        let n_out = config.predicted_dims * config.horizon;
        let layout = Layout::new(input_dim, &config.hidden, n_out);
        let mut rng = rng::stage_rng(config.seed, "gru-init");
        let mut params = vec![0.0; layout.total];
        for l in &layout.layers {
            let bound = 1.0 / (l.hidden as f64).sqrt();
            for p in &mut params[l.w..l.b] {
                *p = rng.random_range(-bound..bound);
            }
        }
        let bound = 1.0 / (layout.top_hidden() as f64).sqrt();
        for p in &mut params[layout.out_w..layout.out_b] {
            *p = rng.random_range(-bound..bound);
        }
        Ok(GruPredictor {
            format_version: FORMAT_VERSION,
            input_dim,
            predicted_dims: config.predicted_dims,
            horizon: config.horizon,
            hidden: config.hidden.clone(),
            mode: SeriesMode::Increment,
            mean: vec![0.0; input_dim],
            std: vec![1.0; input_dim],
            seed: config.seed,
            epoch_loss: Vec::new(),
            excluded: Vec::new(),
            layout,
            params,
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn output_dim(&self) -> usize {
        self.predicted_dims * self.horizon
    }

    fn standardize(&self, series: &TimeSeries) -> Vec<Vec<f64>> {
        (0..series.len())
            .map(|t| {
                series
                    .point(t)
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v - self.mean[i]) / self.std[i])
                    .collect()
            })
            .collect()
    }

    fn targets(&self, xs: &[Vec<f64>], t: usize) -> Option<Vec<f64>> {
        if t + self.horizon >= xs.len() {
            return None;
        }
        let mut out = Vec::with_capacity(self.output_dim());
        for i in 0..self.predicted_dims {
            for j in 1..=self.horizon {
                out.push(xs[t + j][i]);
            }
        }
        Some(out)
    }

    fn layer_step(&self, k: usize, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, StepCache) {
        let l = self.layout.layers[k];
        let h = l.hidden;
        let w = &self.params[l.w..l.u];
        let u = &self.params[l.u..l.b];
        let b = &self.params[l.b..l.b + 3 * h];

        let mut a = b.to_vec();
        matvec_add(&mut a, w, l.n_in, x);
        // z and r gates see U h_prev; the candidate sees U_n (r ⊙ h_prev).
        matvec_add(&mut a[..2 * h], &u[..2 * h * h], h, h_prev);
        let z: Vec<f64> = a[..h].iter().map(|&v| sigmoid(v)).collect();
        let r: Vec<f64> = a[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        matvec_add(&mut a[2 * h..], &u[2 * h * h..], h, &rh);
        let n: Vec<f64> = a[2 * h..].iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..h)
            .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * n[i])
            .collect();
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            n,
        };
        (h_new, cache)
    }

    fn head(&self, h_top: &[f64]) -> Vec<f64> {
        let mut y = self.params[self.layout.out_b..self.layout.total].to_vec();
        matvec_add(
            &mut y,
            &self.params[self.layout.out_w..self.layout.out_b],
            self.layout.top_hidden(),
            h_top,
        );
        y
    }

    fn zero_state(&self) -> Vec<Vec<f64>> {
        self.layout.layers.iter().map(|l| vec![0.0; l.hidden]).collect()
    }

    /// Forward + backward over `xs[start..end]` starting from `state`.
    /// Returns (sum of squared errors, number of target elements) and adds
    /// `scale * dSSE/dθ` into `grad`. `state` is advanced to the end of the chunk.
    fn chunk_backprop(
        &self,
        xs: &[Vec<f64>],
        start: usize,
        end: usize,
        state: &mut Vec<Vec<f64>>,
        grad: &mut [f64],
        scale_by_count: bool,
    ) -> (f64, usize) {
        let n_layers = self.layout.layers.len();
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(end - start);
        let mut tops: Vec<Vec<f64>> = Vec::with_capacity(end - start);
        let mut outs: Vec<(Vec<f64>, Option<Vec<f64>>)> = Vec::with_capacity(end - start);
        let mut sse = 0.0;
        let mut count = 0usize;

        for t in start..end {
            let mut input = xs[t].clone();
            let mut step = Vec::with_capacity(n_layers);
            for k in 0..n_layers {
                let (h_new, cache) = self.layer_step(k, &input, &state[k]);
                step.push(cache);
                state[k] = h_new.clone();
                input = h_new;
            }
            let y = self.head(&input);
            let target = self.targets(xs, t);
            if let Some(tg) = &target {
                for (a, b) in y.iter().zip(tg) {
                    sse += (a - b) * (a - b);
                }
                count += tg.len();
            }
            caches.push(step);
            tops.push(input);
            outs.push((y, target));
        }
        if count == 0 {
            return (0.0, 0);
        }
        let scale = if scale_by_count { 1.0 / count as f64 } else { 1.0 };

        let top_h = self.layout.top_hidden();
        let (out_w, out_b) = (self.layout.out_w, self.layout.out_b);
        let mut dh_next: Vec<Vec<f64>> = self.zero_state();

        for idx in (0..end - start).rev() {
            let mut dh = std::mem::take(&mut dh_next[n_layers - 1]);
            if let (y, Some(tg)) = &outs[idx] {
                let dy: Vec<f64> = y.iter().zip(tg).map(|(a, b)| 2.0 * (a - b) * scale).collect();
                outer_add(&mut grad[out_w..out_b], top_h, &dy, &tops[idx]);
                for (g, d) in grad[out_b..self.layout.total].iter_mut().zip(&dy) {
                    *g += d;
                }
                mat_t_vec_add(&mut dh, &self.params[out_w..out_b], top_h, &dy);
            }
            for k in (0..n_layers).rev() {
                if k < n_layers - 1 {
                    for (a, b) in dh.iter_mut().zip(&dh_next[k]) {
                        *a += b;
                    }
                }
                let (dx, dh_prev) = self.layer_backward(k, &caches[idx][k], &dh, grad);
                dh_next[k] = dh_prev;
                dh = dx;
            }
        }
        (sse, count)
    }

    /// Backward through one layer step. Returns (dL/dx, dL/dh_prev).
    fn layer_backward(
        &self,
        k: usize,
        c: &StepCache,
        dh: &[f64],
        grad: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let l = self.layout.layers[k];
        let h = l.hidden;
        let w = &self.params[l.w..l.u];
        let u = &self.params[l.u..l.b];

        let mut da = vec![0.0; 3 * h];
        let mut dh_prev = vec![0.0; h];
        for i in 0..h {
            let dz = dh[i] * (c.n[i] - c.h_prev[i]);
            let dn = dh[i] * c.z[i];
            dh_prev[i] = dh[i] * (1.0 - c.z[i]);
            da[i] = dz * c.z[i] * (1.0 - c.z[i]);
            da[2 * h + i] = dn * (1.0 - c.n[i] * c.n[i]);
        }
        let rh: Vec<f64> = c.r.iter().zip(&c.h_prev).map(|(a, b)| a * b).collect();
        let mut drh = vec![0.0; h];
        mat_t_vec_add(&mut drh, &u[2 * h * h..], h, &da[2 * h..]);
        for i in 0..h {
            let dr = drh[i] * c.h_prev[i];
            dh_prev[i] += drh[i] * c.r[i];
            da[h + i] = dr * c.r[i] * (1.0 - c.r[i]);
        }

        outer_add(&mut grad[l.w..l.u], l.n_in, &da, &c.x);
        {
            let gu = &mut grad[l.u..l.b];
            outer_add(&mut gu[..2 * h * h], h, &da[..2 * h], &c.h_prev);
            outer_add(&mut gu[2 * h * h..], h, &da[2 * h..], &rh);
        }
        for (g, d) in grad[l.b..l.b + 3 * h].iter_mut().zip(&da) {
            *g += d;
        }

        let mut dx = vec![0.0; l.n_in];
        mat_t_vec_add(&mut dx, w, l.n_in, &da);
        mat_t_vec_add(&mut dh_prev, &u[..2 * h * h], h, &da[..2 * h]);
        (dx, dh_prev)
    }

    /// Mean squared error over a whole series (standardized units) and its
    /// exact gradient via untruncated BPTT.
    pub fn loss_and_gradient(&self, series: &TimeSeries) -> Result<(f64, Vec<f64>)> {
        self.check_series(series)?;
        let xs = self.standardize(series);
        let mut grad = vec![0.0; self.params.len()];
        let mut state = self.zero_state();
        let (sse, count) = self.chunk_backprop(&xs, 0, xs.len(), &mut state, &mut grad, true);
        if count == 0 {
            return Err(Error::InsufficientData(format!(
                "series length {} has no full horizon of {}",
                series.len(),
                self.horizon
            )));
        }
        Ok((sse / count as f64, grad))
    }

    /// Loss only, same definition as [`GruPredictor::loss_and_gradient`].
    pub fn loss(&self, series: &TimeSeries) -> Result<f64> {
        self.check_series(series)?;
        let xs = self.standardize(series);
        let mut state = self.zero_state();
        let mut sse = 0.0;
        let mut count = 0;
        for t in 0..xs.len() {
            let y = self.forward_step(&xs[t], &mut state);
            if let Some(tg) = self.targets(&xs, t) {
                sse += y.iter().zip(&tg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                count += tg.len();
            }
        }
        if count == 0 {
            return Err(Error::InsufficientData("no full horizon".into()));
        }
        Ok(sse / count as f64)
    }

    fn forward_step(&self, x: &[f64], state: &mut [Vec<f64>]) -> Vec<f64> {
        let mut input = x.to_vec();
        for k in 0..self.layout.layers.len() {
            let (h_new, _) = self.layer_step(k, &input, &state[k]);
            state[k] = h_new.clone();
            input = h_new;
        }
        self.head(&input)
    }

    fn check_series(&self, series: &TimeSeries) -> Result<()> {
        if series.dim != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: series.dim,
            });
        }
        Ok(())
    }

    /// Predictions made at every time step, de-standardized to raw units.
    /// Entry `s` holds the forecasts for steps `s+1 ..= s+l`.
    pub fn predict(&self, series: &TimeSeries) -> Result<Vec<Vec<f64>>> {
        self.check_series(series)?;
        if series.mode != self.mode {
            return Err(Error::invalid(format!(
                "series mode {:?} differs from predictor mode {:?}",
                series.mode, self.mode
            )));
        }
        let xs = self.standardize(series);
        let mut state = self.zero_state();
        Ok(xs
            .iter()
            .map(|x| {
                let mut y = self.forward_step(x, &mut state);
                for i in 0..self.predicted_dims {
                    for j in 0..self.horizon {
                        let v = &mut y[i * self.horizon + j];
                        *v = *v * self.std[i] + self.mean[i];
                    }
                }
                y
            })
            .collect())
    }
}

/// Training summary returned with the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub predictor: GruPredictor,
    pub final_loss: f64,
}

/// Train on series from non-collusive videos.
pub fn train_predictor(normal_series: &[TimeSeries], config: &GruConfig) -> Result<TrainOutcome> {
    if normal_series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 training series, got {}",
            normal_series.len()
        )));
    }
    let dim = normal_series[0].dim;
    let mode = normal_series[0].mode;
    if let Some(bad) = normal_series.iter().find(|s| s.dim != dim || s.mode != mode) {
        return Err(Error::invalid(format!(
            "series {} differs in dimension or mode from the first series",
            bad.video_id
        )));
    }
    let (usable, excluded): (Vec<&TimeSeries>, Vec<&TimeSeries>) =
        normal_series.iter().partition(|s| s.len() > config.horizon);
    for s in &excluded {
        log_warn(&format!(
            "excluding series {} (length {} <= horizon {})",
            s.video_id,
            s.len(),
            config.horizon
        ));
    }
    if usable.is_empty() {
        return Err(Error::InsufficientData(
            "every training series is shorter than the horizon".into(),
        ));
    }

    let mut p = GruPredictor::init(dim, config)?;
    p.mode = mode;
    p.excluded = excluded.iter().map(|s| s.video_id.clone()).collect();

    let total: usize = usable.iter().map(|s| s.len()).sum();
    for i in 0..dim {
        let mean = usable
            .iter()
            .flat_map(|s| (0..s.len()).map(move |t| s.point(t)[i]))
            .sum::<f64>()
            / total as f64;
        let var = usable
            .iter()
            .flat_map(|s| (0..s.len()).map(move |t| s.point(t)[i]))
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / total as f64;
        p.mean[i] = mean;
        p.std[i] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }

    let standardized: Vec<Vec<Vec<f64>>> = usable.iter().map(|s| p.standardize(s)).collect();
    let mut opt = Adam::new(p.params.len(), config.learning_rate);
    let mut rng = rng::stage_rng(config.seed, "gru-train");
    let mut order: Vec<usize> = (0..standardized.len()).collect();
    let bptt = config.bptt.max(config.horizon + 1);
    let mut grad = vec![0.0; p.params.len()];

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sse = 0.0;
        let mut epoch_count = 0usize;
        for &si in &order {
            let xs = &standardized[si];
            let mut state = p.zero_state();
            let mut start = 0;
            while start < xs.len() {
                let end = (start + bptt).min(xs.len());
                grad.iter_mut().for_each(|g| *g = 0.0);
                let (sse, count) = p.chunk_backprop(xs, start, end, &mut state, &mut grad, true);
                if count > 0 {
                    epoch_sse += sse;
                    epoch_count += count;
                    clip_norm(&mut grad, config.grad_clip);
                    opt.step(&mut p.params, &grad, None);
                }
                start = end;
            }
        }
        p.epoch_loss
            .push(if epoch_count > 0 { epoch_sse / epoch_count as f64 } else { 0.0 });
    }
    let final_loss = p.epoch_loss.last().copied().unwrap_or(f64::NAN);
    Ok(TrainOutcome {
        predictor: p,
        final_loss,
    })
}

fn log_warn(msg: &str) {
    if std::env::var_os("COLLUSION_QUIET").is_none() {
        eprintln!("warning: {msg}");
    }
}

/// Prediction-error vectors for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSequence {
    /// Series position of the first error vector.
    pub first_position: usize,
    pub errors: Vec<Vec<f64>>,
}

/// `e[i*l + j-1]` at position `t` is the actual value of dimension `i` minus
/// the forecast of it made at `t - j`. Positions before `l` are skipped.
pub fn errors_from_predictions(
    predictions: &[Vec<f64>],
    series: &TimeSeries,
    predicted_dims: usize,
    horizon: usize,
) -> Result<ErrorSequence> {
    if series.len() <= horizon {
        return Err(Error::InsufficientData(format!(
            "series length {} must exceed horizon {horizon}",
            series.len()
        )));
    }
    if predictions.len() < series.len() - 1 {
        return Err(Error::DimensionMismatch {
            expected: series.len() - 1,
            got: predictions.len(),
        });
    }
    let errors = (horizon..series.len())
        .map(|t| {
            let actual = series.point(t);
            let mut e = Vec::with_capacity(predicted_dims * horizon);
            for i in 0..predicted_dims {
                for j in 1..=horizon {
                    e.push(actual[i] - predictions[t - j][i * horizon + (j - 1)]);
                }
            }
            e
        })
        .collect();
    Ok(ErrorSequence {
        first_position: horizon,
        errors,
    })
}

pub fn prediction_errors(predictor: &GruPredictor, series: &TimeSeries) -> Result<ErrorSequence> {
    if series.len() <= predictor.horizon {
        return Err(Error::InsufficientData(format!(
            "series length {} must exceed horizon {}",
            series.len(),
            predictor.horizon
        )));
    }
    let preds = predictor.predict(series)?;
    errors_from_predictions(&preds, series, predictor.predicted_dims, predictor.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new("s", 86_400, 0, SeriesMode::Increment, 1, values).unwrap()
    }

    fn small_config() -> GruConfig {
        GruConfig {
            hidden: vec![4, 3],
            horizon: 2,
            epochs: 3,
            ..GruConfig::default()
        }
    }

    #[test]
    fn parameter_layout_count() {
        let p = GruPredictor::init(1, &GruConfig::default()).unwrap();
        // layer 1: 3*32*1 + 3*32*32 + 3*32; layer 2: 3*32*32*2 + 3*32; head: 3*32 + 3
        let l1 = 96 + 3072 + 96;
        let l2 = 3072 + 3072 + 96;
        assert_eq!(p.n_params(), l1 + l2 + 96 + 3);
    }

    #[test]
    fn subtraction_example() {
        let s = series(vec![0.0, 3.0, 3.0]);
        let preds = vec![vec![2.0], vec![3.0], vec![9.0]];
        let e = errors_from_predictions(&preds, &s, 1, 1).unwrap();
        assert_eq!(e.errors, vec![vec![1.0], vec![0.0]]);
        assert_eq!(e.first_position, 1);
    }

    #[test]
    fn perfect_predictor_has_zero_error() {
        let s = series(vec![5.0; 8]);
        let preds = vec![vec![5.0, 5.0, 5.0]; 8];
        let e = errors_from_predictions(&preds, &s, 1, 3).unwrap();
        assert_eq!(e.errors.len(), 5);
        assert!(e.errors.iter().all(|v| v.len() == 3 && v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn short_series_errors() {
        let p = GruPredictor::init(1, &small_config()).unwrap();
        assert!(prediction_errors(&p, &series(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn error_vector_shape() {
        let cfg = small_config();
        let s: Vec<_> = (0..4)
            .map(|k| series((0..15).map(|t| ((t + k) % 4) as f64).collect()))
            .collect();
        let out = train_predictor(&s, &cfg).unwrap();
        let e = prediction_errors(&out.predictor, &s[0]).unwrap();
        assert_eq!(e.errors.len(), 15 - 2);
        assert!(e.errors.iter().all(|v| v.len() == 2));
    }

    #[test]
    fn deterministic_training() {
        let cfg = small_config();
        let s: Vec<_> = (0..3)
            .map(|k| series((0..12).map(|t| ((t * 7 + k) % 5) as f64).collect()))
            .collect();
        let a = train_predictor(&s, &cfg).unwrap();
        let b = train_predictor(&s, &cfg).unwrap();
        assert_eq!(a.predictor.params(), b.predictor.params());
    }

    #[test]
    fn too_short_series_excluded_then_error() {
        let cfg = small_config();
        let s = vec![series(vec![1.0, 2.0]), series(vec![1.0])];
        assert!(train_predictor(&s, &cfg).is_err());
        let s = vec![series(vec![1.0, 2.0]), series((0..10).map(f64::from).collect())];
        let out = train_predictor(&s, &cfg).unwrap();
        assert_eq!(out.predictor.excluded, vec!["s".to_string()]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = GruConfig {
            hidden: vec![3, 2],
            horizon: 1,
            ..GruConfig::default()
        };
        let mut p = GruPredictor::init(1, &cfg).unwrap();
        let s = series(vec![0.3, -1.2, 0.8]);
        let (_, g) = p.loss_and_gradient(&s).unwrap();
        let h = 1e-5;
        for i in 0..p.n_params() {
            let orig = p.params()[i];
            p.params_mut()[i] = orig + h;
            let up = p.loss(&s).unwrap();
            p.params_mut()[i] = orig - h;
            let down = p.loss(&s).unwrap();
            p.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = g[i].abs().max(fd.abs()).max(1e-6);
            assert!((g[i] - fd).abs() / denom < 1e-4, "param {i}: {} vs {fd}", g[i]);
        }
    }
}
