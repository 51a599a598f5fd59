//! The regression and classification runs, the output-landscape study and
//! the files each run writes.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::netlab::{self, Dataset, Decoder, Loss, MetricLog, Network, Optimizer, TrainConfig};
use crate::stochastic::EvalContext;

/// Independent seeds for each source of randomness in a run, all derived
/// from one user seed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStreams {
    pub base: u64,
    pub data: u64,
    pub split: u64,
    pub init: u64,
    pub shuffle: u64,
    pub stochastic: u64,
}

impl SeedStreams {
    pub fn new(base: u64) -> Self {
        let derive = |stream: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(base);
            r.set_stream(stream);
            r.next_u64()
        };
        SeedStreams {
            base,
            data: derive(1),
            split: derive(2),
            init: derive(3),
            shuffle: derive(4),
            stochastic: derive(5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub x_step: f64,
    pub noise_std: f64,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub rounds: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl RegressionConfig {
    pub fn new(seed: u64) -> Self {
        RegressionConfig {
            x_min: -3.0,
            x_max: 3.0,
            x_step: 0.01,
            noise_std: 0.15,
            hidden: vec![10, 10, 10],
            lr: 0.01,
            batch_size: 64,
            rounds: 50,
            val_fraction: 0.2,
            seed,
        }
    }

    pub fn n_points(&self) -> usize {
        ((self.x_max - self.x_min) / self.x_step).round() as usize + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationConfig {
    pub n_points: usize,
    pub radius: f64,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub rounds: usize,
    pub val_fraction: f64,
    /// Side of the decision-boundary lattice on [-1, 1]^2.
    pub grid: usize,
    pub seed: u64,
}

impl ClassificationConfig {
    pub fn new(seed: u64) -> Self {
        ClassificationConfig {
            n_points: 1000,
            radius: 0.5,
            hidden: vec![5, 5],
            lr: 0.01,
            batch_size: 64,
            rounds: 50,
            val_fraction: 0.2,
            grid: 200,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub resolution: usize,
    pub width: usize,
    pub depth: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig { resolution: 200, width: 16, depth: 3, lo: -2.0, hi: 2.0 }
    }
}

/// The regression target without noise.
pub fn regression_target(x: f64) -> f64 {
    (-x * x).exp()
}

/// `y = exp(-x^2) + N(0, noise)` on the configured lattice.
pub fn gen_regression_data(cfg: &RegressionConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(SeedStreams::new(cfg.seed).data);
    let noise = Normal::new(0.0, cfg.noise_std).expect("noise std is finite and non-negative");
    let n = cfg.n_points();
    let mut d = Dataset::default();
    for i in 0..n {
        let x = cfg.x_min + cfg.x_step * i as f64;
        d.x.push(vec![x]);
        d.y.push(vec![regression_target(x) + noise.sample(&mut rng)]);
    }
    d
}

/// Area-uniform points in the unit disk, labelled 1 inside `radius`.
pub fn gen_disk_data(cfg: &ClassificationConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(SeedStreams::new(cfg.seed).data);
    let mut d = Dataset::default();
    for _ in 0..cfg.n_points {
        let r = rng.random::<f64>().sqrt();
        let t = rng.random::<f64>() * std::f64::consts::TAU;
        let p = vec![r * t.cos(), r * t.sin()];
        d.y.push(vec![f64::from(u8::from(r < cfg.radius))]);
        d.x.push(p);
    }
    d
}

/// Seeded shuffle split; the validation part gets `round(n * fraction)` rows.
pub fn split(data: &Dataset, val_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (data.len() as f64 * val_fraction).round() as usize;
    let (val, train) = idx.split_at(n_val);
    (data.subset(train), data.subset(val))
}

fn hidden_acts(act: &Activation, hidden: usize) -> Vec<Option<Activation>> {
    let mut v: Vec<Option<Activation>> = vec![Some(act.clone()); hidden];
    v.push(None);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub activation: Activation,
    pub config: RegressionConfig,
    pub seeds: SeedStreams,
    pub log: MetricLog,
    pub final_val_mse: f64,
}

pub fn run_regression(act: &Activation, cfg: &RegressionConfig) -> Result<RegressionResult> {
    act.validate()?;
    let seeds = SeedStreams::new(cfg.seed);
    let data = gen_regression_data(cfg);
    let (train, val) = split(&data, cfg.val_fraction, seeds.split);
    let widths: Vec<usize> = std::iter::once(1).chain(cfg.hidden.iter().copied()).chain([1]).collect();
    let mut net = Network::init_glorot(&widths, hidden_acts(act, cfg.hidden.len()), Decoder::Linear, seeds.init)?;
    let tc = TrainConfig {
        rounds: cfg.rounds,
        batch_size: cfg.batch_size,
        optimizer: Optimizer::Adam { lr: cfg.lr },
        loss: Loss::Mse,
    };
    let mut ctx = EvalContext::train(seeds.stochastic);
    let log = netlab::train(&mut net, &train, &val, &tc, seeds.shuffle, &mut ctx)?;
    let final_val_mse = log.val_loss.last().copied().unwrap_or(f64::NAN);
    Ok(RegressionResult { activation: act.clone(), config: cfg.clone(), seeds, log, final_val_mse })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub activation: Activation,
    pub config: ClassificationConfig,
    pub seeds: SeedStreams,
    pub log: MetricLog,
    /// Final `[tn, fp, fn, tp]` on the validation set.
    pub confusion: [usize; 4],
    pub final_accuracy: f64,
    /// `(x1, x2, predicted label)` over the lattice, row by row.
    pub boundary: Vec<(f64, f64, u8)>,
    /// Share of lattice points inside the unit disk predicted as class 1.
    pub class1_area_fraction: f64,
}

pub fn run_classification(act: &Activation, cfg: &ClassificationConfig) -> Result<ClassificationResult> {
    act.validate()?;
    if cfg.grid < 2 {
        return Err(Error::param("classification", "decision grid needs at least 2 points per side"));
    }
    let seeds = SeedStreams::new(cfg.seed);
    let data = gen_disk_data(cfg);
    let (train, val) = split(&data, cfg.val_fraction, seeds.split);
    let widths: Vec<usize> = std::iter::once(2).chain(cfg.hidden.iter().copied()).chain([1]).collect();
    let mut net = Network::init_glorot(&widths, hidden_acts(act, cfg.hidden.len()), Decoder::Sigmoid, seeds.init)?;
    let tc = TrainConfig {
        rounds: cfg.rounds,
        batch_size: cfg.batch_size,
        optimizer: Optimizer::Adam { lr: cfg.lr },
        loss: Loss::Bce,
    };
    let mut ctx = EvalContext::train(seeds.stochastic);
    let log = netlab::train(&mut net, &train, &val, &tc, seeds.shuffle, &mut ctx)?;
    let confusion = log.confusion.last().copied().unwrap_or_default();
    let final_accuracy = log.val_accuracy.last().copied().unwrap_or(f64::NAN);

    let g = cfg.grid;
    let coord = |i: usize| -1.0 + 2.0 * i as f64 / (g - 1) as f64;
    let pts: Vec<Vec<f64>> = (0..g).flat_map(|i| (0..g).map(move |j| vec![coord(j), coord(i)])).collect();
    let probs = net.predict(&pts)?;
    let boundary: Vec<(f64, f64, u8)> = pts
        .iter()
        .zip(&probs)
        .map(|(p, q)| (p[0], p[1], crate::vector_ops::threshold_decode(q[0])))
        .collect();
    let inside: Vec<&(f64, f64, u8)> = boundary.iter().filter(|(a, b, _)| a * a + b * b <= 1.0).collect();
    let class1_area_fraction = inside.iter().filter(|t| t.2 == 1).count() as f64 / inside.len() as f64;
    Ok(ClassificationResult {
        activation: act.clone(),
        config: cfg.clone(),
        seeds,
        log,
        confusion,
        final_accuracy,
        boundary,
        class1_area_fraction,
    })
}

// ---------------------------------------------------------------------------
// Output landscape

/// Scalar output of an untrained Glorot-initialised network over a
/// `resolution x resolution` grid; `grid[i][j]` sits at
/// `(x_j, y_i)` with both axes spanning `[lo, hi]`.
pub fn output_landscape(act: &Activation, cfg: &LandscapeConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    act.validate()?;
    if cfg.resolution < 16 {
        return Err(Error::param("landscape", "resolution must be at least 16"));
    }
    let widths: Vec<usize> = std::iter::once(2)
        .chain(std::iter::repeat_n(cfg.width, cfg.depth))
        .chain([1])
        .collect();
    let net = Network::init_glorot(&widths, hidden_acts(act, cfg.depth), Decoder::Linear, seed)?;
    let r = cfg.resolution;
    let coord = |i: usize| cfg.lo + (cfg.hi - cfg.lo) * i as f64 / (r - 1) as f64;
    // A hand-rolled forward pass: the grid is large and this avoids one
    // allocation per layer per point.
    let maxw = widths.iter().copied().max().unwrap_or(2);
    let mut a = vec![0.0; maxw];
    let mut z = vec![0.0; maxw];
    let mut grid = vec![vec![0.0; r]; r];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            a[0] = coord(j);
            a[1] = coord(i);
            for l in &net.layers {
                for k in 0..l.output {
                    let w = &l.w[k * l.input..(k + 1) * l.input];
                    let s: f64 = w.iter().zip(&a[..l.input]).map(|(w, x)| w * x).sum::<f64>() + l.b[k];
                    z[k] = match &l.act {
                        Some(f) => f.value(s),
                        None => s,
                    };
                }
                a[..l.output].copy_from_slice(&z[..l.output]);
            }
            *cell = a[0];
        }
    }
    Ok(grid)
}

/// Mean absolute five-point Laplacian over interior points, divided by the
/// squared spacing `h`.
pub fn roughness(grid: &[Vec<f64>], h: f64) -> Result<f64> {
    let n = grid.len();
    if n < 3 || grid.iter().any(|r| r.len() < 3) {
        return Err(Error::Shape("roughness needs a grid of at least 3x3".into()));
    }
    let m = grid[0].len();
    let mut sum = 0.0;
    for i in 1..n - 1 {
        for j in 1..m - 1 {
            let lap = grid[i + 1][j] + grid[i - 1][j] + grid[i][j + 1] + grid[i][j - 1] - 4.0 * grid[i][j];
            sum += lap.abs();
        }
    }
    Ok(sum / ((n - 2) * (m - 2)) as f64 / (h * h))
}

pub fn landscape_spacing(cfg: &LandscapeConfig) -> f64 {
    (cfg.hi - cfg.lo) / (cfg.resolution - 1) as f64
}

/// Roughness of `act`'s landscape for each seed, computed in parallel.
pub fn roughness_over_seeds(act: &Activation, cfg: &LandscapeConfig, seeds: &[u64]) -> Result<Vec<f64>> {
    let h = landscape_spacing(cfg);
    seeds
        .par_iter()
        .map(|&s| roughness(&output_landscape(act, cfg, s)?, h))
        .collect()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Files

/// Run status recorded in `config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord<C> {
    pub experiment: String,
    pub activation: Activation,
    pub config: C,
    pub seeds: SeedStreams,
    pub status: String,
    pub error: Option<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_regression(dir: &Path, r: &RegressionResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rec = RunRecord {
        experiment: "regression".into(),
        activation: r.activation.clone(),
        config: r.config.clone(),
        seeds: r.seeds,
        status: "complete".into(),
        error: None,
    };
    write_json(&dir.join("config.json"), &rec)?;
    write_json(&dir.join("metrics.json"), &r.log)?;
    std::fs::write(dir.join("metrics.csv"), r.log.to_csv())?;
    Ok(())
}

pub fn write_classification(dir: &Path, r: &ClassificationResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rec = RunRecord {
        experiment: "classification".into(),
        activation: r.activation.clone(),
        config: r.config.clone(),
        seeds: r.seeds,
        status: "complete".into(),
        error: None,
    };
    write_json(&dir.join("config.json"), &rec)?;
    write_json(&dir.join("metrics.json"), &r.log)?;
    std::fs::write(dir.join("metrics.csv"), r.log.to_csv())?;
    let c = r.confusion;
    std::fs::write(
        dir.join("confusion.csv"),
        format!("actual,predicted_0,predicted_1\n0,{},{}\n1,{},{}\n", c[0], c[1], c[2], c[3]),
    )?;
    let mut b = String::from("x1,x2,label\n");
    for (x1, x2, l) in &r.boundary {
        b.push_str(&format!("{x1},{x2},{l}\n"));
    }
    std::fs::write(dir.join("boundary.csv"), b)?;
    Ok(())
}

/// `config.json` for a run that stopped early.
pub fn write_failed<C: Serialize + Clone>(dir: &Path, experiment: &str, act: &Activation, cfg: &C, seed: u64, err: &Error) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rec = RunRecord {
        experiment: experiment.into(),
        activation: act.clone(),
        config: cfg.clone(),
        seeds: SeedStreams::new(seed),
        status: "partial".into(),
        error: Some(err.to_string()),
    };
    write_json(&dir.join("config.json"), &rec)
}

pub fn landscape_csv(grid: &[Vec<f64>], cfg: &LandscapeConfig) -> String {
    let r = grid.len();
    let coord = |i: usize| cfg.lo + (cfg.hi - cfg.lo) * i as f64 / (r - 1) as f64;
    let mut s = String::from("x,y,value\n");
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", coord(j), coord(i), v));
        }
    }
    s
}
