//! Train/eval semantics for the random activations and the probability that
//! a clamped Gaussian slope falls below zero.
//!
//! Each stochastic kind keeps its sampled coefficient in a dedicated
//! hyper-parameter slot (`r` for RReLU, `a` for the RT offsets, `R` for
//! EReLU/EPReLU, `k` for EELU). In train mode the slot is overwritten by a
//! fresh draw; in eval mode it is replaced by the expectation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::{validate, Kind, ParamSet};
use crate::error::{Error, Result};
use crate::special::normal_cdf;

#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// How often a stochastic coefficient is redrawn during training.
#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleScope {
    PerCall,
    PerBatch,
}

/// Mode plus a seeded random stream. Not meant to be shared across threads:
/// give each worker its own context via [`EvalContext::with_stream`].
#[derive(Clone, Debug)]
pub struct EvalContext {
    pub mode: Mode,
    pub scope: SampleScope,
    rng: ChaCha8Rng,
    batch_draws: Vec<(Kind, f64)>,
}

impl EvalContext {
    /// Deterministic evaluation; the rng is never touched.
    pub fn eval_mode() -> Self {
        Self::with_stream(0, 0).mode(Mode::Eval)
    }

    /// Training context with per-batch sampling.
    pub fn train(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Training context on an independent stream derived from `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        EvalContext {
            mode: Mode::Train,
            scope: SampleScope::PerBatch,
            rng,
            batch_draws: Vec::new(),
        }
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn scope(mut self, scope: SampleScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn is_train(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Forget per-batch draws so the next evaluation samples afresh.
    pub fn next_batch(&mut self) {
        self.batch_draws.clear();
    }
}

/// Slot holding the sampled coefficient, if `kind` is stochastic.
pub fn coefficient_index(kind: Kind) -> Option<usize> {
    match kind {
        Kind::Rrelu => Some(2),
        Kind::RtRelu => Some(1),
        Kind::RtPrelu => Some(2),
        Kind::Erelu => Some(1),
        Kind::Eprelu => Some(2),
        Kind::Eelu => Some(3),
        _ => None,
    }
}

/// Expected value of the sampled coefficient.
pub fn expected_coefficient(kind: Kind, v: &[f64]) -> f64 {
    match kind {
        Kind::Rrelu => (v[0] + v[1]) / 2.0,
        Kind::RtRelu | Kind::RtPrelu => 0.0,
        // k = clamp(s, 0, 2) with s ~ N(1, sigma): the clamp is symmetric
        // about the mean, so E[k] = 1 exactly.
        Kind::Erelu | Kind::Eprelu | Kind::Eelu => 1.0,
        _ => f64::NAN,
    }
}

/// Draw a fresh coefficient for `kind` from `rng`.
pub fn draw_coefficient(kind: Kind, v: &[f64], rng: &mut impl Rng) -> f64 {
    match kind {
        Kind::Rrelu => rng.random_range(v[0]..v[1]),
        Kind::RtRelu | Kind::RtPrelu => sample_offset(v[0], rng),
        Kind::Erelu | Kind::Eprelu => sample_erelu_r(v[0], rng),
        Kind::Eelu => sample_eelu_k_unchecked(v[0], rng),
        _ => f64::NAN,
    }
}

pub(crate) fn coefficient_for(kind: Kind, v: &[f64], ctx: &mut EvalContext) -> f64 {
    if ctx.mode == Mode::Eval {
        return expected_coefficient(kind, v);
    }
    match ctx.scope {
        SampleScope::PerCall => draw_coefficient(kind, v, &mut ctx.rng),
        SampleScope::PerBatch => {
            if let Some(&(_, c)) = ctx.batch_draws.iter().find(|(k, _)| *k == kind) {
                return c;
            }
            let c = draw_coefficient(kind, v, &mut ctx.rng);
            ctx.batch_draws.push((kind, c));
            c
        }
    }
}

/// Replace the sampled coefficient with its expectation.
pub fn eval_mode_params(kind: Kind, p: &ParamSet) -> Result<ParamSet> {
    let i = coefficient_index(kind).ok_or_else(|| Error::NotStochastic(kind.to_string()))?;
    validate(kind, p)?;
    let mut out = p.clone();
    out.values_mut()[i] = expected_coefficient(kind, p.values());
    Ok(out)
}

/// RReLU negative slope `r ~ U(l, u)`.
pub fn sample_rrelu_slope(l: f64, u: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(0.0 <= l && l < u && u < 1.0) {
        return Err(Error::param(Kind::Rrelu, "0 <= l < u < 1"));
    }
    Ok(rng.random_range(l..u))
}

/// Clamp a raw EELU draw into `[0, 2]`.
pub fn clamp_k(s: f64) -> f64 {
    s.clamp(0.0, 2.0)
}

/// EELU slope: `sigma ~ U(0, eps)`, `s ~ N(1, sigma)`, `k = clamp(s, 0, 2)`.
pub fn sample_eelu_k(eps: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(Kind::Eelu, "epsilon in (0, 1]"));
    }
    Ok(sample_eelu_k_unchecked(eps, rng))
}

fn sample_eelu_k_unchecked(eps: f64, rng: &mut impl Rng) -> f64 {
    let sigma = rng.random_range(0.0..eps);
    let s = Normal::new(1.0, sigma).expect("finite sigma").sample(rng);
    clamp_k(s)
}

/// EReLU slope `R ~ U(1 - alpha, 1 + alpha)`.
pub fn sample_erelu_r(alpha: f64, rng: &mut impl Rng) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    rng.random_range(1.0 - alpha..1.0 + alpha)
}

/// Random translation `a ~ N(0, sigma)`.
pub fn sample_offset(sigma: f64, rng: &mut impl Rng) -> f64 {
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

/// `P(N(1, sigma) < 0) = Phi(-1/sigma)`.
pub fn neg_prob(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param("neg_prob", "sigma > 0"));
    }
    Ok(normal_cdf(-1.0 / sigma))
}

/// Monte Carlo estimate of [`neg_prob`] from `n` draws.
pub fn neg_prob_monte_carlo(sigma: f64, n: usize, rng: &mut impl Rng) -> f64 {
    let d = Normal::new(1.0, sigma).expect("finite sigma");
    let hits = (0..n).filter(|_| d.sample(rng) < 0.0).count();
    hits as f64 / n as f64
}

/// Published percentages for `P(s < 0)` at sigma = 0.1, 0.2, ..., 1.0.
pub const TABLE1_PERCENT: [(f64, f64); 10] = [
    (0.1, 0.00),
    (0.2, 0.00),
    (0.3, 0.04),
    (0.4, 0.62),
    (0.5, 2.28),
    (0.6, 4.78),
    (0.7, 7.66),
    (0.8, 10.56),
    (0.9, 13.33),
    (1.0, 15.87),
];
