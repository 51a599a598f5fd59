//! A small dense network: forward and backward passes with any activation,
//! MSE and binary cross-entropy, SGD and Adam, metric logging and binary
//! checkpoints.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::special::logistic;
use crate::stochastic::EvalContext;

/// One dense layer: `a_out = act(W a_in + b)`. `act == None` is linear. The
/// activation (and its learnable parameters) is shared by every unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub input: usize,
    pub output: usize,
    /// Row-major `output x input`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Option<Activation>,
}

impl Layer {
    fn n_act_params(&self) -> usize {
        self.act.as_ref().map_or(0, |a| a.n_params())
    }
}

/// How the final layer's output is read.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    Linear,
    /// Logistic output, thresholded at 0.5 for class labels.
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub decoder: Decoder,
    /// Subgradient weight at kinks (0 = left derivative).
    pub subgradient: f64,
    /// Bumped on every parameter update; caches remember the value they saw.
    #[serde(skip)]
    version: u64,
}

/// Intermediate values from [`Network::forward`] needed by backward.
#[derive(Clone, Debug)]
pub struct Cache {
    version: u64,
    /// Per layer, per sample: the layer input.
    inputs: Vec<Vec<Vec<f64>>>,
    /// Per layer, per sample: pre-activations.
    pre: Vec<Vec<Vec<f64>>>,
    /// Per layer: stochastic coefficient per (sample, unit), empty otherwise.
    coefs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Cache {
    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn pre_activations(&self, layer: usize) -> &[Vec<f64>] {
        &self.pre[layer]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    /// One slot per activation parameter; non-learnable slots stay zero.
    pub dact: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub layers: Vec<LayerGrad>,
}

impl Grads {
    /// Learnable gradients in optimizer order: per layer W, b, then
    /// learnable activation parameters.
    pub fn flat(&self, net: &Network) -> Vec<f64> {
        let mut out = Vec::new();
        for (g, l) in self.layers.iter().zip(&net.layers) {
            out.extend_from_slice(&g.dw);
            out.extend_from_slice(&g.db);
            if let Some(a) = &l.act {
                out.extend(a.learnable_mask().iter().zip(&g.dact).filter(|(m, _)| **m).map(|(_, d)| *d));
            }
        }
        out
    }
}

impl Network {
    /// Glorot-uniform weights, zero biases. `acts[i]` is the activation of
    /// layer `i` (there are `widths.len() - 1` layers).
    pub fn init_glorot(widths: &[usize], acts: Vec<Option<Activation>>, decoder: Decoder, seed: u64) -> Result<Network> {
        if widths.len() < 2 {
            return Err(Error::Empty("network needs at least input and output widths"));
        }
        if widths.contains(&0) {
            return Err(Error::Shape("layer widths must be positive".into()));
        }
        if acts.len() != widths.len() - 1 {
            return Err(Error::Shape(format!(
                "{} activations for {} layers",
                acts.len(),
                widths.len() - 1
            )));
        }
        for a in acts.iter().flatten() {
            a.validate()?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .zip(acts)
            .map(|(io, act)| {
                let (fi, fo) = (io[0], io[1]);
                let lim = (6.0 / (fi + fo) as f64).sqrt();
                Layer {
                    input: fi,
                    output: fo,
                    w: (0..fi * fo).map(|_| rng.random_range(-lim..lim)).collect(),
                    b: vec![0.0; fo],
                    act,
                }
            })
            .collect();
        Ok(Network { layers, decoder, subgradient: 0.0, version: 0 })
    }

    /// Build from explicit layers (widths are checked).
    pub fn from_layers(layers: Vec<Layer>, decoder: Decoder) -> Result<Network> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.w.len() != l.input * l.output || l.b.len() != l.output {
                return Err(Error::Shape(format!("layer {i} parameter shapes")));
            }
            if i > 0 && layers[i - 1].output != l.input {
                return Err(Error::Shape(format!("layer {i} input width mismatch")));
            }
        }
        Ok(Network { layers, decoder, subgradient: 0.0, version: 0 })
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].input)
            .chain(self.layers.iter().map(|l| l.output))
            .collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input
    }

    /// Number of learnable scalars (weights, biases and activation params).
    pub fn n_learnable(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.len() + l.b.len() + l.act.as_ref().map_or(0, |a| a.n_learnable()))
            .sum()
    }

    /// Learnable values in the order used by [`Grads::flat`].
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_learnable());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
            if let Some(a) = &l.act {
                let v = a.param_values();
                out.extend(a.learnable_mask().iter().zip(v).filter(|(m, _)| **m).map(|(_, v)| v));
            }
        }
        out
    }

    /// Inverse of [`Network::params_flat`]. Composite coefficients are first
    /// pulled back onto their constraint set; activation parameters that
    /// would still be invalid keep their previous values.
    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_learnable() {
            return Err(Error::Shape(format!("{} values for {} parameters", p.len(), self.n_learnable())));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.w.len();
            l.w.copy_from_slice(&p[at..at + n]);
            at += n;
            let n = l.b.len();
            l.b.copy_from_slice(&p[at..at + n]);
            at += n;
            if let Some(a) = &mut l.act {
                let mask = a.learnable_mask();
                let mut v = a.param_values();
                for (slot, m) in v.iter_mut().zip(&mask) {
                    if *m {
                        *slot = p[at];
                        at += 1;
                    }
                }
                let mut next = a.clone();
                next.set_param_values(&v);
                next.renormalize();
                if next.validate().is_ok() {
                    *a = next;
                }
            }
        }
        self.version += 1;
        Ok(())
    }

    /// Forward a batch. Stochastic activations draw coefficients from `ctx`
    /// in train mode and use expectations in eval mode.
    pub fn forward(&self, batch: &[Vec<f64>], ctx: &mut EvalContext) -> Result<(Vec<Vec<f64>>, Cache)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut cache = Cache {
            version: self.version,
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            coefs: Vec::with_capacity(self.layers.len()),
            outputs: Vec::new(),
        };
        let mut a: Vec<Vec<f64>> = batch.to_vec();
        if let Some(row) = a.iter().find(|r| r.len() != self.input_width()) {
            return Err(Error::Shape(format!(
                "sample has {} features, network expects {}",
                row.len(),
                self.input_width()
            )));
        }
        for l in &self.layers {
            let stochastic = ctx.is_train() && l.act.as_ref().is_some_and(|a| a.is_stochastic());
            let mut coefs = Vec::new();
            let mut zs = Vec::with_capacity(a.len());
            let mut outs = Vec::with_capacity(a.len());
            for x in &a {
                let z = affine(l, x);
                let out = match &l.act {
                    None => z.clone(),
                    Some(act) => z
                        .iter()
                        .map(|&zi| {
                            let c = if stochastic { act.draw_coefficient(ctx) } else { None };
                            if let Some(c) = c {
                                coefs.push(c);
                            }
                            act.value_with(zi, c)
                        })
                        .collect(),
                };
                zs.push(z);
                outs.push(out);
            }
            cache.inputs.push(std::mem::replace(&mut a, outs));
            cache.pre.push(zs);
            cache.coefs.push(coefs);
        }
        if self.decoder == Decoder::Sigmoid {
            for row in &mut a {
                row.iter_mut().for_each(|v| *v = logistic(*v));
            }
        }
        cache.outputs = a.clone();
        Ok((a, cache))
    }

    /// Eval-mode outputs.
    pub fn predict(&self, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward(batch, &mut EvalContext::eval_mode())?.0)
    }

    /// Backpropagate `loss_grad` (d loss / d output, shaped like the outputs).
    pub fn backward(&self, cache: &Cache, loss_grad: &[Vec<f64>]) -> Result<Grads> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        if loss_grad.len() != cache.outputs.len() || loss_grad.iter().zip(&cache.outputs).any(|(g, o)| g.len() != o.len())
        {
            return Err(Error::Shape("loss gradient must match network outputs".into()));
        }
        let mut delta: Vec<Vec<f64>> = loss_grad.to_vec();
        if self.decoder == Decoder::Sigmoid {
            for (d, p) in delta.iter_mut().zip(&cache.outputs) {
                for (di, pi) in d.iter_mut().zip(p) {
                    *di *= pi * (1.0 - pi);
                }
            }
        }
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        for (li, l) in self.layers.iter().enumerate().rev() {
            let mut g = LayerGrad {
                dw: vec![0.0; l.w.len()],
                db: vec![0.0; l.output],
                dact: vec![0.0; l.n_act_params()],
            };
            let mut dp = vec![0.0; l.n_act_params()];
            let coefs = &cache.coefs[li];
            let mut next_delta = Vec::with_capacity(delta.len());
            for (s, d_out) in delta.iter().enumerate() {
                let x = &cache.inputs[li][s];
                let z = &cache.pre[li][s];
                let mut d_in = vec![0.0; l.input];
                for j in 0..l.output {
                    let dz = match &l.act {
                        None => d_out[j],
                        Some(act) => {
                            let c = coefs.get(s * l.output + j).copied();
                            let (_, slope) = act.grad(z[j], c, self.subgradient, &mut dp);
                            for (acc, p) in g.dact.iter_mut().zip(&dp) {
                                *acc += d_out[j] * p;
                            }
                            d_out[j] * slope
                        }
                    };
                    if dz == 0.0 {
                        continue;
                    }
                    g.db[j] += dz;
                    let row = &l.w[j * l.input..(j + 1) * l.input];
                    let grow = &mut g.dw[j * l.input..(j + 1) * l.input];
                    for k in 0..l.input {
                        grow[k] += dz * x[k];
                        d_in[k] += dz * row[k];
                    }
                }
                next_delta.push(d_in);
            }
            if let Some(act) = &l.act {
                for (d, m) in g.dact.iter_mut().zip(act.learnable_mask()) {
                    if !m {
                        *d = 0.0;
                    }
                }
            }
            grads.push(g);
            delta = next_delta;
        }
        grads.reverse();
        Ok(Grads { layers: grads })
    }

    /// Plain gradient descent: `theta -= lr * grad` for every learnable value.
    pub fn sgd_step(&mut self, grads: &Grads, lr: f64) -> Result<()> {
        let p = self.params_flat();
        let g = grads.flat(self);
        if g.len() != p.len() {
            return Err(Error::Shape("gradient set does not match the network".into()));
        }
        let next: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p - lr * g).collect();
        self.set_params_flat(&next)
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &Grads, state: &mut AdamState) -> Result<()> {
        let p = self.params_flat();
        let g = grads.flat(self);
        if g.len() != state.m.len() || p.len() != g.len() {
            return Err(Error::Shape("Adam state does not match the network".into()));
        }
        state.t += 1;
        let t = state.t as i32;
        let (b1, b2) = (state.beta1, state.beta2);
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        let mut next = p;
        for i in 0..g.len() {
            state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
            state.v[i] = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = state.m[i] / c1;
            let vh = state.v[i] / c2;
            next[i] -= state.lr * mh / (vh.sqrt() + state.eps);
        }
        self.set_params_flat(&next)
    }

    /// Write a checkpoint: magic, little-endian u32 header length, JSON
    /// header, then every layer's W, b and activation parameters as
    /// little-endian f64.
    pub fn save(&self, path: &Path, seeds: &[(String, u64)]) -> Result<()> {
        let header = CheckpointHeader {
            widths: self.widths(),
            decoder: self.decoder,
            subgradient: self.subgradient,
            activations: self.layers.iter().map(|l| l.act.clone()).collect(),
            seeds: seeds.to_vec(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(CHECKPOINT_MAGIC)?;
        f.write_all(&(json.len() as u32).to_le_bytes())?;
        f.write_all(&json)?;
        for l in &self.layers {
            let act = l.act.as_ref().map(|a| a.param_values()).unwrap_or_default();
            for v in l.w.iter().chain(&l.b).chain(&act) {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Network, Vec<(String, u64)>)> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |what: &str| Error::Format(format!("checkpoint: {what}"));
        if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: CheckpointHeader = serde_json::from_slice(bytes.get(12..12 + n).ok_or_else(|| bad("truncated header"))?)?;
        let blob = &bytes[12 + n..];
        if blob.len() % 8 != 0 {
            return Err(bad("blob length not a multiple of 8"));
        }
        let vals: Vec<f64> = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if header.activations.len() + 1 != header.widths.len() {
            return Err(bad("activation count does not match widths"));
        }
        let mut at = 0;
        let mut layers = Vec::new();
        for (io, act) in header.widths.windows(2).zip(header.activations) {
            let (fi, fo) = (io[0], io[1]);
            let na = act.as_ref().map_or(0, |a| a.n_params());
            let need = fi * fo + fo + na;
            let chunk = vals.get(at..at + need).ok_or_else(|| bad("blob too short"))?;
            at += need;
            let mut act = act;
            if let Some(a) = &mut act {
                a.set_param_values(&chunk[fi * fo + fo..]);
                a.validate()?;
            }
            layers.push(Layer {
                input: fi,
                output: fo,
                w: chunk[..fi * fo].to_vec(),
                b: chunk[fi * fo..fi * fo + fo].to_vec(),
                act,
            });
        }
        if at != vals.len() {
            return Err(bad("trailing data"));
        }
        let mut net = Network::from_layers(layers, header.decoder)?;
        net.subgradient = header.subgradient;
        Ok((net, header.seeds))
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"ACTFNCK1";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    widths: Vec<usize>,
    decoder: Decoder,
    subgradient: f64,
    activations: Vec<Option<Activation>>,
    seeds: Vec<(String, u64)>,
}

fn affine(l: &Layer, x: &[f64]) -> Vec<f64> {
    (0..l.output)
        .map(|j| {
            let row = &l.w[j * l.input..(j + 1) * l.input];
            row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + l.b[j]
        })
        .collect()
}

/// Adam moments and hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    /// Fresh state with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(net: &Network, lr: f64) -> Self {
        let n = net.n_learnable();
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }
}

// ---------------------------------------------------------------------------
// Losses

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Empty("loss input"));
    }
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", a.len(), b.len())));
    }
    Ok(())
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(pred, target)?;
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

pub const PROB_CLAMP: f64 = 1e-12;

/// Mean binary cross-entropy with probabilities clamped to
/// `[1e-12, 1 - 1e-12]`, and its gradient with respect to `prob`.
pub fn bce_loss(prob: &[f64], label: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(prob, label)?;
    let n = prob.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(prob.len());
    for (&p, &y) in prob.iter().zip(label) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad.push((p - y) / (p * (1.0 - p)) / n);
    }
    Ok((loss / n, grad))
}

/// Root mean square.
pub fn rms(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("rms input"));
    }
    Ok((values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Training

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    Bce,
}

impl Loss {
    pub fn eval(self, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            Loss::Mse => mse_loss(pred, target),
            Loss::Bce => bce_loss(pred, target),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64 },
}

/// Features and targets, one row per sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i].clone()).collect(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rounds: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub loss: Loss,
}

/// Everything recorded while training. Layer-indexed vectors have one entry
/// per network layer.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricLog {
    /// `[batch][layer]` RMS of the layer's weight and bias gradients.
    pub batch_grad_rms: Vec<Vec<f64>>,
    /// `[round][layer]` mean of that round's per-batch values.
    pub round_grad_rms: Vec<Vec<f64>>,
    /// `[round][layer]` RMS of weights and biases after the round.
    pub round_weight_rms: Vec<Vec<f64>>,
    /// `[round][layer]` RMS of learnable activation parameters, if any.
    pub round_act_param_rms: Vec<Vec<Option<f64>>>,
    /// Mean training batch loss per round.
    pub round_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Classification only.
    pub val_accuracy: Vec<f64>,
    /// Classification only: `[tn, fp, fn, tp]` per round.
    pub confusion: Vec<[usize; 4]>,
}

impl MetricLog {
    /// One row per round.
    pub fn to_csv(&self) -> String {
        let layers = self.round_grad_rms.first().map_or(0, |r| r.len());
        let mut s = String::from("round,round_loss,val_loss");
        let classify = !self.val_accuracy.is_empty();
        if classify {
            s.push_str(",val_accuracy,tn,fp,fn,tp");
        }
        for l in 0..layers {
            s.push_str(&format!(",grad_rms_{l}"));
        }
        for l in 0..layers {
            s.push_str(&format!(",weight_rms_{l}"));
        }
        s.push('\n');
        for r in 0..self.round_loss.len() {
            s.push_str(&format!("{},{},{}", r + 1, self.round_loss[r], self.val_loss[r]));
            if classify {
                let c = self.confusion[r];
                s.push_str(&format!(",{},{},{},{},{}", self.val_accuracy[r], c[0], c[1], c[2], c[3]));
            }
            for v in self.round_grad_rms[r].iter().chain(&self.round_weight_rms[r]) {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

fn flat_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

fn unflatten(flat: &[f64], like: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut at = 0;
    like.iter()
        .map(|r| {
            let out = flat[at..at + r.len()].to_vec();
            at += r.len();
            out
        })
        .collect()
}

/// Loss and (for the sigmoid decoder) accuracy and confusion counts on `data`
/// in eval mode.
pub fn evaluate(net: &Network, data: &Dataset, loss: Loss) -> Result<(f64, Option<(f64, [usize; 4])>)> {
    let out = net.predict(&data.x)?;
    let (l, _) = loss.eval(&flat_rows(&out), &flat_rows(&data.y))?;
    if net.decoder != Decoder::Sigmoid {
        return Ok((l, None));
    }
    let mut c = [0usize; 4];
    for (p, y) in out.iter().zip(&data.y) {
        let pred = crate::vector_ops::threshold_decode(p[0]) as usize;
        let truth = usize::from(y[0] > 0.5);
        c[truth * 2 + pred] += 1;
    }
    let acc = (c[0] + c[3]) as f64 / data.len() as f64;
    Ok((l, Some((acc, c))))
}

/// Train for `cfg.rounds` rounds of shuffled mini-batches (the last partial
/// batch is kept). `shuffle_seed` drives the order; `ctx` drives stochastic
/// activations and has `next_batch` called before every batch.
pub fn train(
    net: &mut Network,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    shuffle_seed: u64,
    ctx: &mut EvalContext,
) -> Result<MetricLog> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("training or validation set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::param("train", "batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut adam = match cfg.optimizer {
        Optimizer::Adam { lr } => Some(AdamState::new(net, lr)),
        Optimizer::Sgd { .. } => None,
    };
    let mut log = MetricLog::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for round in 0..cfg.rounds {
        order.shuffle(&mut rng);
        let first_batch = log.batch_grad_rms.len();
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            ctx.next_batch();
            let b = train.subset(chunk);
            let (out, cache) = net.forward(&b.x, ctx)?;
            let (loss, g) = cfg.loss.eval(&flat_rows(&out), &flat_rows(&b.y))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { round: round + 1, batch: bi + 1, what: format!("loss = {loss}") });
            }
            let grads = net.backward(&cache, &unflatten(&g, &out))?;
            log.batch_grad_rms.push(
                grads
                    .layers
                    .iter()
                    .map(|lg| rms(&[lg.dw.as_slice(), &lg.db].concat()))
                    .collect::<Result<_>>()?,
            );
            match (&cfg.optimizer, &mut adam) {
                (Optimizer::Sgd { lr }, _) => net.sgd_step(&grads, *lr)?,
                (_, Some(state)) => net.adam_step(&grads, state)?,
                _ => unreachable!(),
            }
            if net.params_flat().iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    round: round + 1,
                    batch: bi + 1,
                    what: "non-finite parameter after update".into(),
                });
            }
            loss_sum += loss;
            n_batches += 1;
        }
        let batches = &log.batch_grad_rms[first_batch..];
        let layers = net.layers.len();
        log.round_grad_rms
            .push((0..layers).map(|l| batches.iter().map(|b| b[l]).sum::<f64>() / batches.len() as f64).collect());
        log.round_weight_rms.push(
            net.layers
                .iter()
                .map(|l| rms(&[l.w.as_slice(), &l.b].concat()))
                .collect::<Result<_>>()?,
        );
        log.round_act_param_rms.push(
            net.layers
                .iter()
                .map(|l| {
                    l.act.as_ref().and_then(|a| {
                        let v: Vec<f64> = a
                            .param_values()
                            .into_iter()
                            .zip(a.learnable_mask())
                            .filter(|(_, m)| *m)
                            .map(|(v, _)| v)
                            .collect();
                        rms(&v).ok()
                    })
                })
                .collect(),
        );
        log.round_loss.push(loss_sum / n_batches as f64);
        let (vl, cls) = evaluate(net, val, cfg.loss)?;
        if !vl.is_finite() {
            return Err(Error::Divergence { round: round + 1, batch: n_batches, what: format!("validation loss = {vl}") });
        }
        log.val_loss.push(vl);
        if let Some((acc, c)) = cls {
            log.val_accuracy.push(acc);
            log.confusion.push(c);
        }
    }
    Ok(log)
}

/// Largest relative error between analytic parameter gradients and central
/// differences of the total loss on a fixed batch (eval mode).
pub fn network_grad_check(net: &Network, data: &Dataset, loss: Loss, h: f64) -> Result<f64> {
    let mut ctx = EvalContext::eval_mode();
    let (out, cache) = net.forward(&data.x, &mut ctx)?;
    let (_, g) = loss.eval(&flat_rows(&out), &flat_rows(&data.y))?;
    let analytic = net.backward(&cache, &unflatten(&g, &out))?.flat(net);
    let base = net.params_flat();
    let total = |p: &[f64]| -> Result<f64> {
        let mut n = net.clone();
        n.set_params_flat(p)?;
        let out = n.predict(&data.x)?;
        Ok(loss.eval(&flat_rows(&out), &flat_rows(&data.y))?.0)
    };
    let mut worst: f64 = 0.0;
    let mut p = base.clone();
    for i in 0..base.len() {
        let step = h * base[i].abs().max(1.0);
        p[i] = base[i] + step;
        let up = total(&p)?;
        p[i] = base[i] - step;
        let dn = total(&p)?;
        p[i] = base[i];
        let num = (up - dn) / (2.0 * step);
        let scale = analytic[i].abs().max(num.abs()).max(1e-8);
        worst = worst.max((analytic[i] - num).abs() / scale.max(1e-3));
    }
    Ok(worst)
}
