//! Analytic derivatives for every catalog kind, the subgradient convention at
//! kinks, a finite-difference oracle and the gradient checker.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::catalog::{
    self, default_params, kinks_raw, mtlu_bin, psf, tanh_d1, validate, value, Kind, ParamSet, GELU_SIGMOID_K,
    GELU_TANH_C,
};
use crate::composite::COMPOSITE_NAMES;
use crate::error::{Error, Result};
use crate::special::{erf, logistic, normal_cdf, normal_pdf, quasi_random, sech, softplus};
use crate::stochastic::{self, EvalContext};

/// Which one-sided derivative to report at a kink: left (0), the average
/// (0.5) or right (1). ReLU'(0) is 0, 0.5 or 1 respectively.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgradient {
    #[default]
    Zero,
    Half,
    One,
}

impl Subgradient {
    pub fn weight(self) -> f64 {
        match self {
            Subgradient::Zero => 0.0,
            Subgradient::Half => 0.5,
            Subgradient::One => 1.0,
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct GradOptions {
    pub subgradient: Subgradient,
    /// Refuse to differentiate within [`KINK_BAND`] of a kink.
    pub strict: bool,
}

pub const KINK_BAND: f64 = 1e-9;

/// Output of [`grad`]: the forward value, d/dx and d/dθ for every learnable
/// parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradBundle {
    pub value: f64,
    pub d_dx: f64,
    pub d_dparam: BTreeMap<String, f64>,
}

/// Value and d/dx of `kind` at `x`; `dp` (one slot per parameter) receives
/// the parameter partials. Branch choice at a kink follows the forward code.
pub fn raw_grad(kind: Kind, v: &[f64], x: f64, dp: &mut [f64]) -> (f64, f64) {
    use Kind::*;
    dp.iter_mut().for_each(|d| *d = 0.0);
    let y = value(kind, v, x);
    let step = |on: bool, s: f64| if on { s } else { 0.0 };
    let dx = match kind {
        Logistic => {
            let s = logistic(x);
            s * (1.0 - s)
        }
        Tanh => tanh_d1(x),
        STanh => v[1] * v[0] * tanh_d1(v[0] * x),
        Psf => v[0] * psf(x, v[0]) * logistic(-x),
        ReSech => sech(x) * (1.0 - x * x.tanh()),
        SSigmoid => {
            let s = logistic(x);
            4.0 * s * (1.0 - s)
        }
        PTanh => {
            if x > 0.0 {
                tanh_d1(x)
            } else {
                v[0] * tanh_d1(x)
            }
        }
        Hexpo => {
            if x >= 0.0 {
                v[0] / v[1] * (-x / v[1]).exp()
            } else {
                v[2] / v[3] * (x / v[3]).exp()
            }
        }
        Silu => {
            let s = logistic(x);
            s * (1.0 + x * (1.0 - s))
        }
        Dsilu => {
            let s = logistic(x);
            s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
        }
        Lisht => x.tanh() + x * tanh_d1(x),
        Elliott | Softsign => 1.0 / (1.0 + x.abs()).powi(2),
        ElliottUnit => 0.5 / (1.0 + x.abs()).powi(2),
        MElliott => (1.0 + x * x).powf(-1.5),
        Srs => {
            let (a, b) = (v[0], v[1]);
            let e = (-x / b).exp();
            let d = x / a + e;
            let d2 = d * d;
            dp[0] = x * x / (a * a * d2);
            dp[1] = -x * x * e / (b * b * d2);
            (1.0 + x / b) * e / d2
        }
        HardSigmoid => step(x > -2.5 && x < 2.5, 0.2),
        HardTanh => step(x.abs() < 1.0, 1.0),
        Relu => step(x > 0.0, 1.0),
        LeakyRelu | Prelu => {
            if x >= 0.0 {
                1.0
            } else {
                dp[0] = x;
                v[0]
            }
        }
        Rrelu => {
            if x >= 0.0 {
                1.0
            } else {
                dp[2] = x;
                v[2]
            }
        }
        Ptelu => {
            if x > 0.0 {
                1.0
            } else {
                let (a, b) = (v[0], v[1]);
                dp[0] = (b * x).tanh();
                dp[1] = a * x * tanh_d1(b * x);
                a * b * tanh_d1(b * x)
            }
        }
        Frelu => {
            dp[0] = 1.0;
            step(x > 0.0, 1.0)
        }
        RtRelu => {
            let on = x + v[1] > 0.0;
            dp[1] = step(on, 1.0);
            step(on, 1.0)
        }
        RtPrelu => {
            let z = x + v[2];
            if z > 0.0 {
                dp[2] = 1.0;
                1.0
            } else {
                dp[1] = z;
                dp[2] = v[1];
                v[1]
            }
        }
        ShiftedRelu => step(x > -1.0, 1.0),
        Drelu => {
            dp[0] = step(x < -v[0], -1.0);
            step(x > -v[0], 1.0)
        }
        Vrelu => {
            if x >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        SignRelu => {
            if x >= 0.0 {
                1.0
            } else {
                dp[0] = x / (1.0 - x);
                v[0] / (1.0 - x).powi(2)
            }
        }
        Blu => {
            let r = (x * x + 1.0).sqrt();
            dp[0] = r - 1.0;
            v[0] * x / r + 1.0
        }
        SShapedRelu => {
            let (r, a, l, b) = (v[0], v[1], v[2], v[3]);
            if x >= r {
                dp[0] = 1.0 - a;
                dp[1] = x - r;
                a
            } else if x > l {
                1.0
            } else {
                dp[2] = 1.0 - b;
                dp[3] = x - l;
                b
            }
        }
        Erelu => {
            if x > 0.0 {
                dp[1] = x;
                v[1]
            } else {
                0.0
            }
        }
        Eprelu => {
            if x > 0.0 {
                dp[2] = x;
                v[2]
            } else {
                dp[1] = x;
                v[1]
            }
        }
        Lisa | Alisa => {
            if x > 1.0 {
                dp[0] = x - 1.0;
                v[0]
            } else if x >= 0.0 {
                1.0
            } else {
                dp[1] = x;
                v[1]
            }
        }
        Brelu => {
            if x >= v[0] {
                dp[0] = step(x > 0.0, 1.0);
            }
            step(x > 0.0 && x < v[0], 1.0)
        }
        BlRelu => {
            let (a_, s) = (v[0], v[1]);
            if x <= 0.0 {
                s
            } else if x <= a_ {
                1.0
            } else {
                s
            }
        }
        Bif => {
            let a = v[0];
            if x < -a {
                -1.0
            } else if x > a {
                1.0
            } else {
                x / a
            }
        }
        Bbif => {
            let (a, b) = (v[0], v[1]);
            let ax = x.abs();
            if ax > b + a / 2.0 {
                0.0
            } else if ax > a {
                x.signum()
            } else {
                x / a
            }
        }
        RelTanh => {
            let (lp, ln) = (v[0], v[1]);
            let tanh_d2 = |l: f64| -2.0 * l.tanh() * tanh_d1(l);
            if x >= lp {
                dp[0] = tanh_d2(lp) * (x - lp);
                tanh_d1(lp)
            } else if x > ln {
                tanh_d1(x)
            } else {
                dp[1] = tanh_d2(ln) * (x - ln);
                tanh_d1(ln)
            }
        }
        Plu => {
            let c = v[1];
            if x < -c || x > c {
                v[0]
            } else {
                1.0
            }
        }
        NlRelu => step(x > 0.0, v[0] / (v[0] * x + 1.0)),
        Mtlu => {
            let k = (v.len() - 2) / 3;
            let i = mtlu_bin(&v[..k], x);
            dp[k + i] = x;
            dp[2 * k + 1 + i] = 1.0;
            v[k + i]
        }
        Elu | Celu | Felu if x > 0.0 => 1.0,
        Elu | Felu => v[0] * x.exp(),
        Celu => {
            let a = v[0];
            let e = (x / a).exp();
            dp[0] = e * (1.0 - x / a) - 1.0;
            e
        }
        Selu => {
            if x > 0.0 {
                v[0]
            } else {
                v[0] * v[1] * x.exp()
            }
        }
        Pelu => {
            let (a, b) = (v[0], v[1]);
            if x >= 0.0 {
                dp[0] = x / b;
                dp[1] = -a * x / (b * b);
                a / b
            } else {
                let e = (x / b).exp();
                dp[0] = e - 1.0;
                dp[1] = -a * x / (b * b) * e;
                a / b * e
            }
        }
        Mpelu | Eelu => {
            let (ia, ib) = if kind == Mpelu { (0, 1) } else { (1, 2) };
            if x > 0.0 {
                if kind == Eelu {
                    dp[3] = x;
                    v[3]
                } else {
                    1.0
                }
            } else {
                let (a, b) = (v[ia], v[ib]);
                let e = (b * x).exp();
                dp[ia] = e - 1.0;
                dp[ib] = a * x * e;
                a * b * e
            }
        }
        Reu => {
            if x > 0.0 {
                1.0
            } else {
                (1.0 + x) * x.exp()
            }
        }
        Preu => {
            let (a, b) = (v[0], v[1]);
            if x > 0.0 {
                dp[0] = x;
                a
            } else {
                let e = (b * x).exp();
                dp[0] = x * e;
                dp[1] = a * x * x * e;
                a * (1.0 + b * x) * e
            }
        }
        Pdelu => {
            let (a, t) = (v[0], v[1]);
            if x > 0.0 {
                1.0
            } else {
                let base = (1.0 + (1.0 - t) * x).max(0.0);
                dp[0] = base.powf(1.0 / (1.0 - t)) - 1.0;
                a * base.powf(t / (1.0 - t))
            }
        }
        Elish => {
            let s = logistic(x);
            let ds = s * (1.0 - s);
            if x >= 0.0 {
                s + x * ds
            } else {
                x.exp() * s + x.exp_m1() * ds
            }
        }
        HardElish => {
            let h = catalog::hard_sigmoid_unit(x);
            let dh = step(x > -1.0 && x < 1.0, 0.5);
            if x >= 0.0 {
                h + x * dh
            } else {
                x.exp() * h + x.exp_m1() * dh
            }
        }
        Swish => {
            let b = v[0];
            let s = logistic(b * x);
            let ds = s * (1.0 - s);
            dp[0] = x * x * ds;
            s + b * x * ds
        }
        ESwish => {
            let s = logistic(x);
            dp[0] = x * s;
            v[0] * (s + x * s * (1.0 - s))
        }
        HardSwishPiecewise => {
            if x <= -3.0 {
                0.0
            } else if x >= 3.0 {
                1.0
            } else {
                (2.0 * x + 3.0) / 6.0
            }
        }
        HardSwishBeta => {
            let b = v[0];
            let g = 0.2 * b * x + 0.5;
            if g <= 0.0 {
                0.0
            } else if g >= 1.0 {
                2.0
            } else {
                dp[0] = 0.4 * x * x;
                0.8 * b * x + 1.0
            }
        }
        Softplus => logistic(x),
        Slu => {
            if x >= 0.0 {
                dp[0] = x;
                v[0]
            } else {
                dp[1] = softplus(x);
                dp[2] = -1.0;
                v[1] * logistic(x)
            }
        }
        Mish => {
            let t = softplus(x).tanh();
            t + x * (1.0 - t * t) * logistic(x)
        }
        GeluErf => normal_cdf(x) + x * normal_pdf(x),
        GeluTanh => {
            let k = (2.0 / std::f64::consts::PI).sqrt();
            let u = k * (x + GELU_TANH_C * x * x * x);
            let t = u.tanh();
            0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_TANH_C * x * x)
        }
        GeluSigmoid => {
            let s = logistic(GELU_SIGMOID_K * x);
            s + GELU_SIGMOID_K * x * s * (1.0 - s)
        }
        Sgelu => {
            let e = erf(x / std::f64::consts::SQRT_2);
            dp[0] = x * e;
            v[0] * (e + x * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * x * x).exp())
        }
        Identity => 1.0,
    };
    (y, dx)
}

/// `omega(x)` from the closed-form Mish derivative `e^x omega / delta^2`.
pub fn mish_omega(x: f64) -> f64 {
    4.0 * (x + 1.0) + 4.0 * (2.0 * x).exp() + (3.0 * x).exp() + (4.0 * x + 6.0) * x.exp()
}

/// `delta(x) = 2 e^x + e^{2x} + 2`.
pub fn mish_delta(x: f64) -> f64 {
    2.0 * x.exp() + (2.0 * x).exp() + 2.0
}

/// Mish derivative through `omega` and `delta`. Overflows for x above ~170;
/// [`raw_grad`] uses the chain rule instead.
pub fn mish_grad_closed(x: f64) -> f64 {
    let d = mish_delta(x);
    x.exp() * mish_omega(x) / (d * d)
}

/// Apply the subgradient convention when `x` sits exactly on a kink: blend
/// the one-sided derivatives `(1 - c) left + c right`.
pub(crate) fn blend_at_kink(
    x: f64,
    kinks: &[f64],
    c: f64,
    dp: &mut [f64],
    g: impl Fn(f64, &mut [f64]) -> (f64, f64),
) -> (f64, f64) {
    let (y, d) = g(x, dp);
    if !kinks.contains(&x) {
        return (y, d);
    }
    let delta = 1e-12 * x.abs().max(1.0);
    let mut left = vec![0.0; dp.len()];
    let mut right = vec![0.0; dp.len()];
    let (_, dl) = g(x - delta, &mut left);
    let (_, dr) = g(x + delta, &mut right);
    for (i, slot) in dp.iter_mut().enumerate() {
        *slot = (1.0 - c) * left[i] + c * right[i];
    }
    (y, (1.0 - c) * dl + c * dr)
}

/// Nearest kink within `band` of `x`, if any.
pub(crate) fn near_kink(x: f64, kinks: &[f64], band: f64) -> Option<f64> {
    kinks.iter().copied().find(|k| (x - k).abs() <= band)
}

/// Parameter vector with the stochastic coefficient resolved through `ctx`.
fn resolved(kind: Kind, p: &ParamSet, ctx: &mut EvalContext) -> Vec<f64> {
    let mut v = p.values().to_vec();
    if let Some(i) = stochastic::coefficient_index(kind) {
        v[i] = stochastic::coefficient_for(kind, p.values(), ctx);
    }
    v
}

/// Gradient with the default convention (left derivative at kinks).
pub fn grad(kind: Kind, p: &ParamSet, x: f64, ctx: &mut EvalContext) -> Result<GradBundle> {
    grad_with(kind, p, x, ctx, GradOptions::default())
}

pub fn grad_with(kind: Kind, p: &ParamSet, x: f64, ctx: &mut EvalContext, opts: GradOptions) -> Result<GradBundle> {
    validate(kind, p)?;
    if !x.is_finite() {
        return Err(Error::NonFiniteInput(x));
    }
    let v = resolved(kind, p, ctx);
    let kinks = kinks_raw(kind, &v);
    if opts.strict {
        if let Some(k) = near_kink(x, &kinks, KINK_BAND) {
            return Err(Error::KinkProximity { x, kink: k, band: KINK_BAND });
        }
    }
    let mut dp = vec![0.0; v.len()];
    let (y, dx) = blend_at_kink(x, &kinks, opts.subgradient.weight(), &mut dp, |t, d| raw_grad(kind, &v, t, d));
    let coef = stochastic::coefficient_index(kind);
    let d_dparam = p
        .learnable_indices()
        .into_iter()
        .filter(|&i| Some(i) != coef)
        .map(|i| (p.names()[i].clone(), dp[i]))
        .collect();
    Ok(GradBundle { value: y, d_dx: dx, d_dparam })
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`. Stochastic kinds draw one
/// coefficient and hold it for both evaluations.
pub fn fd_oracle(kind: Kind, p: &ParamSet, x: f64, ctx: &mut EvalContext, h: f64) -> Result<f64> {
    validate(kind, p)?;
    if !x.is_finite() {
        return Err(Error::NonFiniteInput(x));
    }
    if !(1e-8..=1e-3).contains(&h) {
        return Err(Error::param(kind, format!("finite-difference step {h} outside [1e-8, 1e-3]")));
    }
    let v = resolved(kind, p, ctx);
    if let Some(k) = near_kink(x, &kinks_raw(kind, &v), 10.0 * h) {
        return Err(Error::KinkProximity { x, kink: k, band: 10.0 * h });
    }
    Ok((value(kind, &v, x + h) - value(kind, &v, x - h)) / (2.0 * h))
}

// ---------------------------------------------------------------------------
// Gradient checking

/// Summary of one gradient check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub label: String,
    pub samples: usize,
    pub checked: usize,
    /// Sample points skipped because they fell within the guard band of a kink.
    pub excluded: usize,
    pub kinks: Vec<f64>,
    pub max_rel_err: f64,
    pub worst_x: f64,
    /// `d_dx` or the name of the parameter with the largest error.
    pub worst_component: String,
    pub tol: f64,
    pub pass: bool,
}

pub const GUARD_BAND: f64 = 1e-3;
const FD_STEP: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1f64.max(a.abs()).max(n.abs())
}

/// Compare analytic and central-difference derivatives (input and every
/// learnable parameter) at `n` quasi-random points of `[lo, hi]`.
pub fn check_activation(act: &Activation, label: &str, lo: f64, hi: f64, n: usize, tol: f64) -> GradCheckReport {
    let kinks = act.kinks();
    let names = act.param_names();
    let mask = act.learnable_mask();
    let slot = act.coefficient_slot();
    let base = act.param_values();
    let mut dp = vec![0.0; base.len()];
    let mut rep = GradCheckReport {
        label: label.to_string(),
        samples: n,
        checked: 0,
        excluded: 0,
        kinks: kinks.clone(),
        max_rel_err: 0.0,
        worst_x: f64::NAN,
        worst_component: String::new(),
        tol,
        pass: true,
    };
    let record = |err: f64, x: f64, what: &str, rep: &mut GradCheckReport| {
        if err > rep.max_rel_err || err.is_nan() {
            rep.max_rel_err = if err.is_nan() { f64::INFINITY } else { err };
            rep.worst_x = x;
            rep.worst_component = what.to_string();
        }
    };
    let mut shifted = act.clone();
    for x in quasi_random(lo, hi, n) {
        if near_kink(x, &kinks, GUARD_BAND).is_some() {
            rep.excluded += 1;
            continue;
        }
        rep.checked += 1;
        let (_, dx) = act.grad(x, None, 0.0, &mut dp);
        let num = (act.value(x + FD_STEP) - act.value(x - FD_STEP)) / (2.0 * FD_STEP);
        record(rel_err(dx, num), x, "d_dx", &mut rep);
        for i in 0..base.len() {
            if !mask[i] || Some(i) == slot {
                continue;
            }
            let h = FD_STEP * base[i].abs().max(1.0);
            let mut v = base.clone();
            v[i] = base[i] + h;
            shifted.set_param_values(&v);
            let up = shifted.value(x);
            v[i] = base[i] - h;
            shifted.set_param_values(&v);
            let down = shifted.value(x);
            let num = (up - down) / (2.0 * h);
            record(rel_err(dp[i], num), x, &names[i], &mut rep);
        }
    }
    rep.pass = rep.max_rel_err <= tol;
    rep
}

/// Check one catalog kind with explicit parameters.
pub fn grad_check(kind: Kind, p: &ParamSet, lo: f64, hi: f64, n: usize, tol: f64) -> Result<GradCheckReport> {
    validate(kind, p)?;
    if n == 0 {
        return Err(Error::Empty("grad-check sample count"));
    }
    let act = Activation::Catalog { kind, params: p.clone() };
    Ok(check_activation(&act, kind.name(), lo, hi, n, tol))
}

/// Parameter slots that define structure rather than shape and are left
/// alone when perturbing.
fn structural(kind: Kind, name: &str, i: usize) -> bool {
    stochastic::coefficient_index(kind) == Some(i)
        || name.starts_with("c[")
        || (kind == Kind::RelTanh && name.contains("_lower"))
        || (kind == Kind::RelTanh && name.contains("_upper"))
}

/// Deterministic perturbation number `which` of the default parameters:
/// each free slot is scaled by `1 + 0.25 s` (or offset by `0.25 s` when
/// zero) with `s` uniform in [-1, 1]. The scale halves until the result
/// validates.
pub fn perturbed_params(kind: Kind, which: u64) -> ParamSet {
    let base = default_params(kind);
    let idx = Kind::ALL.iter().position(|&k| k == kind).unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ (idx << 8) ^ which);
    let mut scale = 0.25;
    for _ in 0..6 {
        let mut p = base.clone();
        for i in 0..p.len() {
            if structural(kind, &p.names()[i], i) {
                continue;
            }
            let s: f64 = rng.random_range(-1.0..=1.0);
            let v0 = p.values()[i];
            p.values_mut()[i] = if v0 != 0.0 { v0 * (1.0 + scale * s) } else { scale * s };
        }
        if validate(kind, &p).is_ok() {
            return p;
        }
        scale *= 0.5;
    }
    base
}

/// Same idea for any [`Activation`]: perturb the learnable slots.
pub fn perturbed_activation(act: &Activation, which: u64) -> Activation {
    if let Activation::Catalog { kind, .. } = act {
        return Activation::Catalog { kind: *kind, params: perturbed_params(*kind, which) };
    }
    let name = act.name();
    let seed = name.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ which);
    let mask = act.learnable_mask();
    let mut scale = 0.25;
    for _ in 0..6 {
        let mut v = act.param_values();
        for i in 0..v.len() {
            if mask[i] {
                let s: f64 = rng.random_range(-1.0..=1.0);
                v[i] = if v[i] != 0.0 { v[i] * (1.0 + scale * s) } else { scale * s };
            }
        }
        let mut out = act.clone();
        out.set_param_values(&v);
        out.renormalize();
        if out.validate().is_ok() {
            return out;
        }
        scale *= 0.5;
    }
    act.clone()
}

/// Every activation the checker covers: each catalog kind and composite at
/// its defaults plus `perturbations` perturbed copies.
pub fn check_targets(perturbations: u64) -> Vec<(String, Activation)> {
    let mut out = Vec::new();
    let mut add = |name: String, base: Activation| {
        for w in 1..=perturbations {
            out.push((format!("{name}#p{w}"), perturbed_activation(&base, w)));
        }
        out.insert(out.len() - perturbations as usize, (name, base));
    };
    for &k in Kind::ALL {
        add(k.name().to_string(), Activation::Catalog { kind: k, params: default_params(k) });
    }
    for &n in COMPOSITE_NAMES {
        add(n.to_string(), Activation::from_name(n).expect("composite name"));
    }
    out
}

/// Run the checker over [`check_targets`]. Results come back in target
/// order whether or not `parallel` is set.
pub fn check_all(lo: f64, hi: f64, n: usize, tol: f64, parallel: bool) -> Vec<GradCheckReport> {
    let targets = check_targets(3);
    let run = |(label, act): &(String, Activation)| check_activation(act, label, lo, hi, n, tol);
    if parallel {
        targets.par_iter().map(run).collect()
    } else {
        targets.iter().map(run).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(kind: Kind, x: f64) -> GradBundle {
        grad(kind, &default_params(kind), x, &mut EvalContext::eval_mode()).unwrap()
    }

    #[test]
    fn relu_subgradient_convention() {
        let p = default_params(Kind::Relu);
        let mut ctx = EvalContext::eval_mode();
        for (c, want) in [(Subgradient::Zero, 0.0), (Subgradient::Half, 0.5), (Subgradient::One, 1.0)] {
            let b = grad_with(Kind::Relu, &p, 0.0, &mut ctx, GradOptions { subgradient: c, strict: false }).unwrap();
            assert_eq!(b.d_dx, want);
            assert_eq!(b.value, 0.0);
        }
        assert_eq!(g(Kind::Relu, 0.0).d_dx, 0.0);
        let strict = GradOptions { strict: true, ..Default::default() };
        assert!(matches!(
            grad_with(Kind::Relu, &p, 1e-12, &mut ctx, strict),
            Err(Error::KinkProximity { .. })
        ));
    }

    #[test]
    fn leaky_relu_at_zero() {
        let p = default_params(Kind::LeakyRelu);
        let b = grad_with(
            Kind::LeakyRelu,
            &p,
            0.0,
            &mut EvalContext::eval_mode(),
            GradOptions { subgradient: Subgradient::Half, strict: false },
        )
        .unwrap();
        assert!((b.d_dx - 0.505).abs() < 1e-12);
    }

    #[test]
    fn value_in_bundle_matches_eval() {
        let mut ctx = EvalContext::eval_mode();
        for &k in Kind::ALL {
            let p = default_params(k);
            for &x in &[-2.3, -0.4, 0.0, 0.7, 3.1] {
                let b = grad(k, &p, x, &mut ctx).unwrap();
                assert_eq!(b.value, catalog::eval(k, &p, x, &mut ctx).unwrap(), "{k}");
            }
        }
    }

    #[test]
    fn worked_derivatives() {
        let s = logistic(1.0);
        assert!((g(Kind::Logistic, 1.0).d_dx - s * (1.0 - s)).abs() < 1e-15);
        assert!((g(Kind::Tanh, 0.5).d_dx - (1.0 - 0.5f64.tanh().powi(2))).abs() < 1e-15);
        assert_eq!(g(Kind::Bif, -2.0).d_dx, -1.0);
        assert_eq!(g(Kind::Bif, 0.5).d_dx, 0.5);
        assert!((g(Kind::GeluErf, 0.0).d_dx - 0.5).abs() < 1e-15);
        assert!((g(Kind::Mish, 0.0).d_dx - 0.6).abs() < 1e-12);
        let b = g(Kind::Prelu, -2.0);
        assert_eq!(b.d_dparam["alpha"], -2.0);
    }

    #[test]
    fn mish_closed_form_agrees_with_chain_rule() {
        for i in -60..=60 {
            let x = i as f64 / 10.0;
            let chain = g(Kind::Mish, x).d_dx;
            assert!((mish_grad_closed(x) - chain).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn fd_oracle_preconditions() {
        let p = default_params(Kind::Relu);
        let mut ctx = EvalContext::eval_mode();
        assert!(fd_oracle(Kind::Relu, &p, 1.0, &mut ctx, 1e-2).is_err());
        assert!(fd_oracle(Kind::Relu, &p, 1e-5, &mut ctx, 1e-5).is_err());
        assert!((fd_oracle(Kind::Relu, &p, 0.5, &mut ctx, 1e-5).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stochastic_learnable_partials_exclude_coefficient() {
        let b = g(Kind::RtPrelu, -1.0);
        assert!(b.d_dparam.contains_key("k"));
        assert!(!b.d_dparam.contains_key("a"));
    }

    #[test]
    fn perturbed_params_are_valid_and_deterministic() {
        for &k in Kind::ALL {
            for w in 1..=3 {
                let p = perturbed_params(k, w);
                validate(k, &p).unwrap();
                assert_eq!(p, perturbed_params(k, w));
            }
        }
    }

    #[test]
    fn grad_check_passes_for_every_target() {
        let failed: Vec<_> = check_all(-5.0, 5.0, 300, 1e-5, true).into_iter().filter(|r| !r.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
