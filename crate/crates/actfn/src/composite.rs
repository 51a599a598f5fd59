//! Combined and learnable-shape activations: mixed, gated and hierarchical
//! combiners, affine/convex hulls, APL, MeLU, LuTU, MoGU and the BDAA family.
//!
//! Every composite exposes a flat parameter vector (hyper and learnable
//! slots together) so the network and the gradient checker can treat it the
//! same way as a catalog kind.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::catalog::{default_params, validate, value, Kind, ParamSet};
use crate::error::{Error, Result};
use crate::gradients::raw_grad;
use crate::special::logistic;

/// A fixed leaf activation inside a hierarchical node or hull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub kind: Kind,
    pub params: ParamSet,
}

impl Leaf {
    pub fn new(kind: Kind) -> Self {
        Leaf {
            kind,
            params: default_params(kind),
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        value(self.kind, self.params.values(), x)
    }

    #[inline]
    fn slope(&self, x: f64) -> f64 {
        let mut scratch = [0.0; 8];
        let n = self.params.len();
        if n <= scratch.len() {
            raw_grad(self.kind, self.params.values(), x, &mut scratch[..n]).1
        } else {
            raw_grad(self.kind, self.params.values(), x, &mut vec![0.0; n]).1
        }
    }

    fn kinks(&self) -> Vec<f64> {
        crate::catalog::kinks_raw(self.kind, self.params.values())
    }
}

/// One middle node: `tau * left + (1 - tau) * right` with `tau = sigma(omega x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierNode {
    pub left: Leaf,
    pub right: Leaf,
    pub omega: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullKind {
    Affine,
    Convex,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LutuMode {
    Interp,
    Cosine,
}

/// Learnable hinge sum `max(0, x) + sum_s a_s max(0, b_s - x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AplParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// PReLU plus a bank of Mexican-hat bumps `max(width - |x - center|, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeluParams {
    pub alpha: f64,
    pub c: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

/// Look-up table over anchors `x_i = x0 + s i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LutuParams {
    pub x0: f64,
    pub s: f64,
    pub y: Vec<f64>,
    /// Cosine mask half-width in units of `s`.
    pub t: u32,
    pub mode: LutuMode,
}

/// Weighted sum of Gaussian densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoguParams {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Two shifted logistics whose derivative has twin peaks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BdaaParams {
    pub variant: u8,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Composite {
    Mixed { rho: f64 },
    Gated { omega: f64 },
    Hierarchical { nodes: Vec<HierNode> },
    Hull { hull: HullKind, bases: Vec<Leaf>, coeffs: Vec<f64> },
    Apl(AplParams),
    Melu(MeluParams),
    Lutu(LutuParams),
    Mogu(MoguParams),
    Bdaa(BdaaParams),
}

/// Names accepted by [`Composite::from_name`].
pub const COMPOSITE_NAMES: &[&str] = &[
    "mixed",
    "gated",
    "hierarchical",
    "affine_hull",
    "convex_hull",
    "apl",
    "melu",
    "lutu_interp",
    "lutu_cos",
    "mogu",
    "bdaa1",
    "bdaa2",
    "bdaa3",
    "bdaa4",
];

fn lrelu() -> Leaf {
    Leaf::new(Kind::LeakyRelu)
}

fn elu() -> Leaf {
    Leaf::new(Kind::Elu)
}

impl Composite {
    /// Default instance for a name in [`COMPOSITE_NAMES`].
    pub fn from_name(name: &str) -> Result<Composite> {
        Ok(match name {
            "mixed" => Composite::Mixed { rho: 0.5 },
            "gated" => Composite::Gated { omega: 1.0 },
            "hierarchical" => Composite::Hierarchical {
                nodes: vec![
                    HierNode { left: lrelu(), right: elu(), omega: 1.0 },
                    HierNode { left: lrelu(), right: elu(), omega: -1.0 },
                ],
            },
            "affine_hull" => Composite::Hull {
                hull: HullKind::Affine,
                bases: vec![Leaf::new(Kind::Identity), Leaf::new(Kind::Tanh), Leaf::new(Kind::Relu)],
                coeffs: vec![0.5, 0.8, -0.3],
            },
            "convex_hull" => Composite::Hull {
                hull: HullKind::Convex,
                bases: vec![Leaf::new(Kind::Identity), Leaf::new(Kind::Relu)],
                coeffs: vec![0.25, 0.75],
            },
            "apl" => Composite::Apl(AplParams {
                a: vec![0.0; 2],
                b: vec![-1.0, 1.0],
            }),
            "melu" => Composite::Melu(melu_default(4.0, 9, 0.5)),
            "lutu_interp" | "lutu_cos" => {
                let (x0, s, n) = (-4.0, 0.5, 17);
                let y = (0..n).map(|i| (x0 + s * i as f64).max(0.0)).collect();
                let mode = if name == "lutu_cos" { LutuMode::Cosine } else { LutuMode::Interp };
                Composite::Lutu(LutuParams { x0, s, y, t: 2, mode })
            }
            "mogu" => Composite::Mogu(MoguParams {
                lambda: vec![1.0, 1.0, 1.0],
                mu: vec![-1.0, 0.0, 1.0],
                sigma: vec![1.0, 0.5, 1.0],
            }),
            "bdaa1" | "bdaa2" | "bdaa3" | "bdaa4" => Composite::Bdaa(BdaaParams {
                variant: name.as_bytes()[4] - b'0',
                a: 1.0,
            }),
            _ => return Err(Error::UnknownName(name.to_string())),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Composite::Mixed { .. } => "mixed".into(),
            Composite::Gated { .. } => "gated".into(),
            Composite::Hierarchical { .. } => "hierarchical".into(),
            Composite::Hull { hull: HullKind::Affine, .. } => "affine_hull".into(),
            Composite::Hull { hull: HullKind::Convex, .. } => "convex_hull".into(),
            Composite::Apl(_) => "apl".into(),
            Composite::Melu(_) => "melu".into(),
            Composite::Lutu(p) => match p.mode {
                LutuMode::Interp => "lutu_interp".into(),
                LutuMode::Cosine => "lutu_cos".into(),
            },
            Composite::Mogu(_) => "mogu".into(),
            Composite::Bdaa(p) => format!("bdaa{}", p.variant),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::param(self.name(), why));
        let finite = self.param_values().iter().all(|v| v.is_finite());
        if !finite {
            return bad("parameters must be finite");
        }
        match self {
            Composite::Mixed { rho } if !(0.0..=1.0).contains(rho) => bad("rho in [0, 1]"),
            Composite::Hierarchical { nodes } if nodes.is_empty() => bad("at least one middle node"),
            Composite::Hierarchical { nodes } => {
                for n in nodes {
                    validate(n.left.kind, &n.left.params)?;
                    validate(n.right.kind, &n.right.params)?;
                }
                Ok(())
            }
            Composite::Hull { hull, bases, coeffs } => {
                if bases.is_empty() || bases.len() != coeffs.len() {
                    return bad("one coefficient per base, at least one base");
                }
                for b in bases {
                    validate(b.kind, &b.params)?;
                }
                if (coeffs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("coefficients must sum to 1");
                }
                if *hull == HullKind::Convex && coeffs.iter().any(|&c| c < 0.0) {
                    return bad("convex coefficients must be non-negative");
                }
                Ok(())
            }
            Composite::Apl(p) if p.a.is_empty() || p.a.len() != p.b.len() => {
                bad("S >= 1 hinges with matching a/b")
            }
            Composite::Melu(p) => {
                if p.c.len() != p.centers.len() || p.c.len() != p.widths.len() {
                    return bad("c, centers and widths must have equal length");
                }
                if p.widths.iter().any(|&w| w <= 0.0) {
                    return bad("hat widths must be positive");
                }
                Ok(())
            }
            Composite::Lutu(p) => {
                if p.y.len() < 2 {
                    return bad("at least two anchors");
                }
                if p.s <= 0.0 || p.t == 0 {
                    return bad("step s > 0 and t >= 1");
                }
                Ok(())
            }
            Composite::Mogu(p) => {
                if p.lambda.is_empty() || p.lambda.len() != p.mu.len() || p.mu.len() != p.sigma.len() {
                    return bad("matching non-empty lambda/mu/sigma");
                }
                if p.sigma.iter().any(|&s| s <= 0.0) {
                    return bad("sigma_i > 0");
                }
                Ok(())
            }
            Composite::Bdaa(p) => {
                if !(1..=4).contains(&p.variant) {
                    return bad("variant must be 1, 2, 3 or 4");
                }
                if p.variant >= 3 && p.a < 0.0 {
                    return bad("a >= 0 for variants 3 and 4");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    // -- flat parameter view ------------------------------------------------

    pub fn param_names(&self) -> Vec<String> {
        fn idx(p: &'static str, n: usize) -> impl Iterator<Item = String> {
            (0..n).map(move |i| format!("{p}[{i}]"))
        }
        match self {
            Composite::Mixed { .. } => vec!["rho".into()],
            Composite::Gated { .. } => vec!["omega".into()],
            Composite::Hierarchical { nodes } => idx("omega", nodes.len()).collect(),
            Composite::Hull { coeffs, .. } => idx("c", coeffs.len()).collect(),
            Composite::Apl(p) => idx("a", p.a.len()).chain(idx("b", p.b.len())).collect(),
            Composite::Melu(p) => std::iter::once("alpha".to_string())
                .chain(idx("c", p.c.len()))
                .chain(idx("center", p.centers.len()))
                .chain(idx("width", p.widths.len()))
                .collect(),
            Composite::Lutu(p) => ["x0".to_string(), "s".to_string()]
                .into_iter()
                .chain(idx("y", p.y.len()))
                .collect(),
            Composite::Mogu(p) => idx("lambda", p.lambda.len())
                .chain(idx("mu", p.mu.len()))
                .chain(idx("sigma", p.sigma.len()))
                .collect(),
            Composite::Bdaa(_) => vec!["a".into()],
        }
    }

    pub fn param_values(&self) -> Vec<f64> {
        match self {
            Composite::Mixed { rho } => vec![*rho],
            Composite::Gated { omega } => vec![*omega],
            Composite::Hierarchical { nodes } => nodes.iter().map(|n| n.omega).collect(),
            Composite::Hull { coeffs, .. } => coeffs.clone(),
            Composite::Apl(p) => [p.a.as_slice(), &p.b].concat(),
            Composite::Melu(p) => [&[p.alpha][..], &p.c, &p.centers, &p.widths].concat(),
            Composite::Lutu(p) => [&[p.x0, p.s][..], &p.y].concat(),
            Composite::Mogu(p) => [p.lambda.as_slice(), &p.mu, &p.sigma].concat(),
            Composite::Bdaa(p) => vec![p.a],
        }
    }

    pub fn learnable_mask(&self) -> Vec<bool> {
        match self {
            Composite::Melu(p) => {
                let k = p.c.len();
                (0..1 + 3 * k).map(|i| i <= k).collect()
            }
            Composite::Lutu(p) => (0..2 + p.y.len()).map(|i| i >= 2).collect(),
            _ => vec![true; self.param_values().len()],
        }
    }

    pub fn set_param_values(&mut self, v: &[f64]) {
        match self {
            Composite::Mixed { rho } => *rho = v[0],
            Composite::Gated { omega } => *omega = v[0],
            Composite::Hierarchical { nodes } => {
                for (n, &w) in nodes.iter_mut().zip(v) {
                    n.omega = w;
                }
            }
            Composite::Hull { coeffs, .. } => coeffs.copy_from_slice(v),
            Composite::Apl(p) => {
                let s = p.a.len();
                p.a.copy_from_slice(&v[..s]);
                p.b.copy_from_slice(&v[s..]);
            }
            Composite::Melu(p) => {
                let k = p.c.len();
                p.alpha = v[0];
                p.c.copy_from_slice(&v[1..1 + k]);
                p.centers.copy_from_slice(&v[1 + k..1 + 2 * k]);
                p.widths.copy_from_slice(&v[1 + 2 * k..]);
            }
            Composite::Lutu(p) => {
                p.x0 = v[0];
                p.s = v[1];
                p.y.copy_from_slice(&v[2..]);
            }
            Composite::Mogu(p) => {
                let n = p.lambda.len();
                p.lambda.copy_from_slice(&v[..n]);
                p.mu.copy_from_slice(&v[n..2 * n]);
                p.sigma.copy_from_slice(&v[2 * n..]);
            }
            Composite::Bdaa(p) => p.a = v[0],
        }
    }

    // -- evaluation -----------------------------------------------------------

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Composite::Mixed { rho } => mixed_eval(*rho, x),
            Composite::Gated { omega } => gated_eval(*omega, x),
            Composite::Hierarchical { nodes } => {
                let (_, v) = hier_winner(nodes, x);
                v
            }
            Composite::Hull { bases, coeffs, .. } => {
                bases.iter().zip(coeffs).map(|(b, c)| c * b.eval(x)).sum()
            }
            Composite::Apl(p) => apl_eval(p, x),
            Composite::Melu(p) => melu_eval(p, x),
            Composite::Lutu(p) => lutu_eval(p, x),
            Composite::Mogu(p) => mogu_eval(p, x),
            Composite::Bdaa(p) => bdaa_eval(p, x),
        }
    }

    /// Value and input-derivative; `dp` receives partials for every slot of
    /// [`Composite::param_values`] (hyper slots are left at zero).
    pub fn grad(&self, x: f64, dp: &mut [f64]) -> (f64, f64) {
        dp.iter_mut().for_each(|d| *d = 0.0);
        match self {
            Composite::Mixed { rho } => {
                let (l, e) = (lrelu_pair(x), elu_pair(x));
                dp[0] = l.0 - e.0;
                (rho * l.0 + (1.0 - rho) * e.0, rho * l.1 + (1.0 - rho) * e.1)
            }
            Composite::Gated { omega } => {
                let (l, e) = (lrelu_pair(x), elu_pair(x));
                let (v, dx, dw) = gate(*omega, x, l, e);
                dp[0] = dw;
                (v, dx)
            }
            Composite::Hierarchical { nodes } => {
                let (k, _) = hier_winner(nodes, x);
                let n = &nodes[k];
                let (v, dx, dw) = gate(n.omega, x, (n.left.eval(x), n.left.slope(x)), (n.right.eval(x), n.right.slope(x)));
                dp[k] = dw;
                (v, dx)
            }
            Composite::Hull { bases, coeffs, .. } => {
                let mut v = 0.0;
                let mut dx = 0.0;
                for (i, (b, c)) in bases.iter().zip(coeffs).enumerate() {
                    let y = b.eval(x);
                    dp[i] = y;
                    v += c * y;
                    dx += c * b.slope(x);
                }
                (v, dx)
            }
            Composite::Apl(p) => {
                let s = p.a.len();
                let mut dx = if x > 0.0 { 1.0 } else { 0.0 };
                for i in 0..s {
                    let h = p.b[i] - x;
                    dp[i] = h.max(0.0);
                    if h > 0.0 {
                        dp[s + i] = p.a[i];
                        dx -= p.a[i];
                    }
                }
                (apl_eval(p, x), dx)
            }
            Composite::Melu(p) => {
                let k = p.c.len();
                let mut dx = if x >= 0.0 { 1.0 } else { p.alpha };
                if x < 0.0 {
                    dp[0] = x;
                }
                for j in 0..k {
                    let u = x - p.centers[j];
                    dp[1 + j] = hat(p.centers[j], p.widths[j], x);
                    if u.abs() < p.widths[j] {
                        dx -= p.c[j] * u.signum();
                    }
                }
                (melu_eval(p, x), dx)
            }
            Composite::Lutu(p) => lutu_grad(p, x, &mut dp[2..]),
            Composite::Mogu(p) => {
                let n = p.lambda.len();
                let mut v = 0.0;
                let mut dx = 0.0;
                for i in 0..n {
                    let (l, m, s) = (p.lambda[i], p.mu[i], p.sigma[i]);
                    let g = gauss(x, m, s);
                    let u = x - m;
                    v += l * g;
                    dx -= l * g * u / (s * s);
                    dp[i] = g;
                    dp[n + i] = l * g * u / (s * s);
                    dp[2 * n + i] = l * g * (u * u / (s * s * s) - 1.0 / s);
                }
                (v, dx)
            }
            Composite::Bdaa(p) => {
                let (v, dx, da) = bdaa_grads(p, x);
                dp[0] = da;
                (v, dx)
            }
        }
    }

    /// Points where the composite is not differentiable in x.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k = match self {
            Composite::Mixed { rho } => {
                if *rho != 0.0 {
                    vec![0.0]
                } else {
                    Vec::new()
                }
            }
            Composite::Gated { .. } => vec![0.0],
            Composite::Hierarchical { nodes } => hier_kinks(nodes),
            Composite::Hull { bases, .. } => bases.iter().flat_map(|b| b.kinks()).collect(),
            Composite::Apl(p) => std::iter::once(0.0).chain(p.b.iter().copied()).collect(),
            Composite::Melu(p) => {
                let mut out = vec![0.0];
                for (&a, &w) in p.centers.iter().zip(&p.widths) {
                    out.extend([a - w, a, a + w]);
                }
                out
            }
            Composite::Lutu(p) => match p.mode {
                LutuMode::Interp => (1..p.y.len() - 1).map(|i| p.x0 + p.s * i as f64).collect(),
                LutuMode::Cosine => Vec::new(),
            },
            Composite::Mogu(_) | Composite::Bdaa(_) => Vec::new(),
        };
        k.sort_by(|a, b| a.total_cmp(b));
        k.dedup();
        k
    }
}

// ---------------------------------------------------------------------------
// Mixed / gated / hierarchical

fn lrelu_pair(x: f64) -> (f64, f64) {
    if x >= 0.0 {
        (x, 1.0)
    } else {
        (0.01 * x, 0.01)
    }
}

fn elu_pair(x: f64) -> (f64, f64) {
    if x > 0.0 {
        (x, 1.0)
    } else {
        (x.exp_m1(), x.exp())
    }
}

/// `rho * LReLU(x) + (1 - rho) * ELU(x)`.
pub fn mixed_eval(rho: f64, x: f64) -> f64 {
    let (l, e) = (lrelu_pair(x).0, elu_pair(x).0);
    rho * l + (1.0 - rho) * e
}

/// `tau * LReLU(x) + (1 - tau) * ELU(x)` with `tau = sigma(omega x)`.
pub fn gated_eval(omega: f64, x: f64) -> f64 {
    gate(omega, x, lrelu_pair(x), elu_pair(x)).0
}

/// Gate two (value, slope) pairs. Written as `b + tau (a - b)` so identical
/// children give bit-identical outputs regardless of omega.
fn gate(omega: f64, x: f64, a: (f64, f64), b: (f64, f64)) -> (f64, f64, f64) {
    let tau = logistic(omega * x);
    let dtau = tau * (1.0 - tau);
    let diff = a.0 - b.0;
    let v = b.0 + tau * diff;
    let dx = b.1 + tau * (a.1 - b.1) + omega * dtau * diff;
    let dw = x * dtau * diff;
    (v, dx, dw)
}

fn node_value(n: &HierNode, x: f64) -> f64 {
    let tau = logistic(n.omega * x);
    let (a, b) = (n.left.eval(x), n.right.eval(x));
    b + tau * (a - b)
}

/// Index and value of the winning middle node; ties go to the lowest index.
fn hier_winner(nodes: &[HierNode], x: f64) -> (usize, f64) {
    let mut best = (0, node_value(&nodes[0], x));
    for (i, n) in nodes.iter().enumerate().skip(1) {
        let v = node_value(n, x);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Leaf kinks plus every point where the winning node changes. Switches are
/// located by scanning [-50, 50] and bisecting.
fn hier_kinks(nodes: &[HierNode]) -> Vec<f64> {
    let mut out: Vec<f64> = nodes
        .iter()
        .flat_map(|n| n.left.kinks().into_iter().chain(n.right.kinks()))
        .collect();
    if nodes.len() < 2 {
        return out;
    }
    let step = 1e-3;
    let mut prev_x = -50.0;
    let mut prev = hier_winner(nodes, prev_x).0;
    let steps = (100.0 / step) as usize;
    for i in 1..=steps {
        let x = -50.0 + i as f64 * step;
        let w = hier_winner(nodes, x).0;
        if w != prev {
            let (mut lo, mut hi) = (prev_x, x);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if hier_winner(nodes, mid).0 == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = w;
        prev_x = x;
    }
    out
}

// ---------------------------------------------------------------------------
// Hulls

/// Evaluate `sum_i c_i phi_i(x)` after checking the hull constraints.
pub fn hull_combine(hull: HullKind, bases: &[Kind], coeffs: &[f64], x: f64) -> Result<f64> {
    let c = Composite::Hull {
        hull,
        bases: bases.iter().map(|&k| Leaf::new(k)).collect(),
        coeffs: coeffs.to_vec(),
    };
    c.validate()?;
    Ok(c.eval(x))
}

// ---------------------------------------------------------------------------
// APL / MeLU

pub fn apl_eval(p: &AplParams, x: f64) -> f64 {
    x.max(0.0) + p.a.iter().zip(&p.b).map(|(a, b)| a * (b - x).max(0.0)).sum::<f64>()
}

/// Per-hinge partials `(d/da_s, d/db_s)`.
pub fn apl_grad(p: &AplParams, x: f64) -> Vec<(f64, f64)> {
    p.a.iter()
        .zip(&p.b)
        .map(|(&a, &b)| {
            let h = b - x;
            (h.max(0.0), if h > 0.0 { a } else { 0.0 })
        })
        .collect()
}

/// Hat `max(width - |x - center|, 0)`.
pub fn hat(center: f64, width: f64, x: f64) -> f64 {
    (width - (x - center).abs()).max(0.0)
}

/// `k - 1` hats with equally spaced centers over `[-c, c]`, all coefficients 0.
pub fn melu_default(c: f64, hats: usize, width: f64) -> MeluParams {
    let centers: Vec<f64> = if hats == 1 {
        vec![0.0]
    } else {
        (0..hats).map(|j| -c + 2.0 * c * j as f64 / (hats - 1) as f64).collect()
    };
    MeluParams {
        alpha: 0.25,
        c: vec![0.0; hats],
        widths: vec![width; hats],
        centers,
    }
}

pub fn melu_eval(p: &MeluParams, x: f64) -> f64 {
    let prelu = if x >= 0.0 { x } else { p.alpha * x };
    prelu
        + p.c
            .iter()
            .zip(p.centers.iter().zip(&p.widths))
            .map(|(c, (&a, &w))| c * hat(a, w, x))
            .sum::<f64>()
}

// ---------------------------------------------------------------------------
// LuTU

/// Cosine mask `(1 + cos(pi x / tau)) / (2 tau)` on `[-tau, tau]`.
pub fn cosine_mask(x: f64, tau: f64) -> f64 {
    if x.abs() <= tau {
        (1.0 + (PI * x / tau).cos()) / (2.0 * tau)
    } else {
        0.0
    }
}

fn cosine_mask_d(x: f64, tau: f64) -> f64 {
    if x.abs() <= tau {
        -PI / (2.0 * tau * tau) * (PI * x / tau).sin()
    } else {
        0.0
    }
}

fn lutu_segment(p: &LutuParams, x: f64) -> usize {
    let n = p.y.len();
    let i = ((x - p.x0) / p.s).floor();
    (i.max(0.0) as usize).min(n - 2)
}

/// Anchor range whose cosine masks can cover `x`.
fn lutu_support(p: &LutuParams, x: f64) -> std::ops::Range<usize> {
    let tau = p.t as f64 * p.s;
    let n = p.y.len() as f64;
    let lo = ((x - tau - p.x0) / p.s).ceil().clamp(0.0, n);
    let hi = ((x + tau - p.x0) / p.s).floor().clamp(-1.0, n - 1.0);
    if hi < lo {
        0..0
    } else {
        lo as usize..hi as usize + 1
    }
}

pub fn lutu_eval(p: &LutuParams, x: f64) -> f64 {
    match p.mode {
        LutuMode::Interp => {
            let i = lutu_segment(p, x);
            let xi = p.x0 + p.s * i as f64;
            let xj = xi + p.s;
            (p.y[i] * (xj - x) + p.y[i + 1] * (x - xi)) / p.s
        }
        LutuMode::Cosine => {
            let tau = p.t as f64 * p.s;
            lutu_support(p, x)
                .map(|i| p.y[i] * cosine_mask(x - (p.x0 + p.s * i as f64), tau))
                .sum()
        }
    }
}

/// Value and slope; `dy` receives the partial for every anchor value.
pub fn lutu_grad(p: &LutuParams, x: f64, dy: &mut [f64]) -> (f64, f64) {
    dy.iter_mut().for_each(|d| *d = 0.0);
    match p.mode {
        LutuMode::Interp => {
            let i = lutu_segment(p, x);
            let xi = p.x0 + p.s * i as f64;
            let xj = xi + p.s;
            dy[i] = (xj - x) / p.s;
            dy[i + 1] = (x - xi) / p.s;
            (lutu_eval(p, x), (p.y[i + 1] - p.y[i]) / p.s)
        }
        LutuMode::Cosine => {
            let tau = p.t as f64 * p.s;
            let mut v = 0.0;
            let mut dx = 0.0;
            for i in lutu_support(p, x) {
                let u = x - (p.x0 + p.s * i as f64);
                let r = cosine_mask(u, tau);
                dy[i] = r;
                v += p.y[i] * r;
                dx += p.y[i] * cosine_mask_d(u, tau);
            }
            (v, dx)
        }
    }
}

// ---------------------------------------------------------------------------
// MoGU

fn gauss(x: f64, mu: f64, sigma: f64) -> f64 {
    let u = (x - mu) / sigma;
    (-0.5 * u * u).exp() / ((2.0 * PI).sqrt() * sigma)
}

pub fn mogu_eval(p: &MoguParams, x: f64) -> f64 {
    (0..p.lambda.len())
        .map(|i| p.lambda[i] * gauss(x, p.mu[i], p.sigma[i]))
        .sum()
}

// ---------------------------------------------------------------------------
// BDAA

pub fn bdaa_eval(p: &BdaaParams, x: f64) -> f64 {
    bdaa_grads(p, x).0
}

/// `(value, d/dx, d/da)`.
pub fn bdaa_grads(p: &BdaaParams, x: f64) -> (f64, f64, f64) {
    let a = p.a;
    let d = |s: f64| s * (1.0 - s);
    match p.variant {
        1 | 2 => {
            let (s0, s1) = (logistic(x), logistic(x + a));
            let shift = if p.variant == 2 { 0.5 } else { 0.0 };
            (0.5 * (s0 + s1) - shift, 0.5 * (d(s0) + d(s1)), 0.5 * d(s1))
        }
        _ => {
            let (sp, sm) = (logistic(x + a), logistic(x - a));
            let shift = if p.variant == 4 { 0.5 } else { 0.0 };
            (0.5 * (sp + sm) - shift, 0.5 * (d(sp) + d(sm)), 0.5 * (d(sp) - d(sm)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_endpoints_and_positive_axis() {
        for i in -100..=100 {
            let x = i as f64 / 10.0;
            let l = value(Kind::LeakyRelu, default_params(Kind::LeakyRelu).values(), x);
            let e = value(Kind::Elu, default_params(Kind::Elu).values(), x);
            assert_eq!(mixed_eval(1.0, x), l);
            assert_eq!(mixed_eval(0.0, x), e);
            if x > 0.0 {
                assert_eq!(mixed_eval(0.5, x), x);
                assert_eq!(gated_eval(3.0, x), x);
            }
        }
        assert!(Composite::Mixed { rho: 1.5 }.validate().is_err());
    }

    #[test]
    fn gated_at_zero_omega_is_average() {
        let x: f64 = -2.0;
        let avg = 0.5 * (0.01 * x + x.exp_m1());
        assert!((gated_eval(0.0, x) - avg).abs() < 1e-15);
        let tau = logistic(-2.0);
        let hand = tau * 0.01 * x + (1.0 - tau) * x.exp_m1();
        assert!((gated_eval(1.0, x) - hand).abs() < 1e-12);
    }

    #[test]
    fn single_node_hierarchy_is_gated() {
        let h = Composite::Hierarchical {
            nodes: vec![HierNode { left: lrelu(), right: elu(), omega: 0.7 }],
        };
        for i in -50..=50 {
            let x = i as f64 / 10.0;
            assert!((h.eval(x) - gated_eval(0.7, x)).abs() < 1e-15);
        }
    }

    #[test]
    fn hierarchy_tie_goes_to_first_node() {
        let nodes = vec![
            HierNode { left: lrelu(), right: elu(), omega: 2.0 },
            HierNode { left: lrelu(), right: elu(), omega: 2.0 },
        ];
        assert_eq!(hier_winner(&nodes, -1.0).0, 0);
    }

    #[test]
    fn convex_identity_relu_is_leaky() {
        let alpha = 0.2;
        for i in -30..=30 {
            let x = i as f64 / 10.0;
            let y = hull_combine(HullKind::Convex, &[Kind::Identity, Kind::Relu], &[alpha, 1.0 - alpha], x)
                .unwrap();
            let want = if x >= 0.0 { x } else { alpha * x };
            assert!((y - want).abs() < 1e-15);
        }
        assert!(hull_combine(HullKind::Convex, &[Kind::Identity, Kind::Relu], &[1.5, -0.5], 0.0).is_err());
        assert_eq!(hull_combine(HullKind::Affine, &[Kind::Tanh], &[1.0], 0.3).unwrap(), 0.3f64.tanh());
    }

    #[test]
    fn apl_examples() {
        let p = AplParams { a: vec![0.2], b: vec![0.0] };
        assert!((apl_eval(&p, -1.0) - 0.2).abs() < 1e-15);
        let z = AplParams { a: vec![0.0, 0.0], b: vec![1.0, -2.0] };
        assert_eq!(apl_eval(&z, -3.0), 0.0);
        assert_eq!(apl_eval(&z, 2.5), 2.5);
        assert_eq!(apl_grad(&p, -1.0), vec![(1.0, 0.2)]);
    }

    #[test]
    fn melu_reduces_to_prelu_and_hats_behave() {
        let p = melu_default(4.0, 9, 0.5);
        for i in -60..=60 {
            let x = i as f64 / 10.0;
            let want = if x >= 0.0 { x } else { 0.25 * x };
            assert_eq!(melu_eval(&p, x), want);
        }
        assert_eq!(hat(1.0, 0.5, 1.0), 0.5);
        assert_eq!(hat(1.0, 0.5, 1.6), 0.0);
    }

    #[test]
    fn lutu_interp_hits_anchors_and_reproduces_relu() {
        let c = Composite::from_name("lutu_interp").unwrap();
        let Composite::Lutu(p) = &c else { unreachable!() };
        for i in 0..p.y.len() {
            let x = p.x0 + p.s * i as f64;
            assert!((lutu_eval(p, x) - p.y[i]).abs() < 1e-15);
        }
        for i in 0..p.y.len() - 1 {
            let mid = p.x0 + p.s * (i as f64 + 0.5);
            if mid > 0.0 {
                assert!((lutu_eval(p, mid) - mid).abs() < 1e-14);
            }
        }
        assert!(Composite::Lutu(LutuParams { y: vec![1.0], ..p.clone() }).validate().is_err());
    }

    #[test]
    fn cosine_mask_integrates_to_one() {
        let tau = 0.7;
        let n = 200_000;
        let h = 2.0 * tau / n as f64;
        let s: f64 = (0..n).map(|i| cosine_mask(-tau + (i as f64 + 0.5) * h, tau) * h).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mogu_normalisation_and_symmetry() {
        let one = MoguParams {
            lambda: vec![(2.0 * PI).sqrt()],
            mu: vec![0.0],
            sigma: vec![1.0],
        };
        assert!((mogu_eval(&one, 0.0) - 1.0).abs() < 1e-15);
        let pair = MoguParams {
            lambda: vec![0.7, 0.7],
            mu: vec![1.3, -1.3],
            sigma: vec![0.4, 0.4],
        };
        for i in 0..40 {
            let x = i as f64 * 0.1;
            assert!((mogu_eval(&pair, x) - mogu_eval(&pair, -x)).abs() < 1e-15);
        }
    }

    #[test]
    fn bdaa_properties() {
        let b1 = BdaaParams { variant: 1, a: 0.0 };
        for i in -50..=50 {
            let x = i as f64 / 10.0;
            assert_eq!(bdaa_eval(&b1, x), logistic(x));
        }
        for &a in &[0.3, 1.0, 2.5] {
            let b4 = BdaaParams { variant: 4, a };
            for i in 0..50 {
                let x = i as f64 * 0.13;
                assert!((bdaa_eval(&b4, -x) + bdaa_eval(&b4, x)).abs() < 1e-15);
            }
        }
        assert!(Composite::Bdaa(BdaaParams { variant: 5, a: 1.0 }).validate().is_err());
        assert!(Composite::Bdaa(BdaaParams { variant: 3, a: -1.0 }).validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for &n in COMPOSITE_NAMES {
            let c = Composite::from_name(n).unwrap();
            c.validate().unwrap();
            assert_eq!(c.name(), n);
            assert_eq!(c.param_names().len(), c.param_values().len());
            assert_eq!(c.learnable_mask().len(), c.param_values().len());
        }
    }
}
