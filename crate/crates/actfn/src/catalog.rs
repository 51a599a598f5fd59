//! The activation catalog: every scalar kind, its parameters, metadata and
//! forward value.
//!
//! Each kind has a fixed, ordered parameter schema. The evaluation code reads
//! parameters positionally, so the order in [`default_params`] is part of the
//! contract; [`validate`] rejects any [`ParamSet`] whose names drift from it.

use std::f64::consts::{E, LN_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::special::{erf, logistic, normal_cdf, sech, softplus};
use crate::stochastic::{self, EvalContext};

macro_rules! kinds {
    ($( $group:ident { $( $var:ident => $name:literal ),* $(,)? } )*) => {
        /// Identifies one scalar activation function.
        #[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Kind { $( $( $var, )* )* }

        impl Kind {
            /// Every kind, in catalog order.
            pub const ALL: &'static [Kind] = &[ $( $( Kind::$var, )* )* ];

            /// Stable snake_case name used by the CLI and JSON configs.
            pub fn name(self) -> &'static str {
                match self { $( $( Kind::$var => $name, )* )* }
            }

            pub fn group(self) -> Group {
                match self { $( $( Kind::$var => Group::$group, )* )* }
            }
        }
    };
}

kinds! {
    Sigmoid {
        Logistic => "logistic",
        Tanh => "tanh",
        STanh => "stanh",
        Psf => "psf",
        ReSech => "resech",
        SSigmoid => "ssigmoid",
        PTanh => "ptanh",
        Hexpo => "hexpo",
        Silu => "silu",
        Dsilu => "dsilu",
        Lisht => "lisht",
        Elliott => "elliott",
        ElliottUnit => "elliott_unit",
        MElliott => "melliott",
        Srs => "srs",
        HardSigmoid => "hard_sigmoid",
        HardTanh => "hard_tanh",
    }
    Relu {
        Relu => "relu",
        LeakyRelu => "leaky_relu",
        Prelu => "prelu",
        Rrelu => "rrelu",
        Ptelu => "ptelu",
        Frelu => "frelu",
        RtRelu => "rt_relu",
        RtPrelu => "rt_prelu",
        ShiftedRelu => "shifted_relu",
        Drelu => "drelu",
        Vrelu => "vrelu",
        Softsign => "softsign",
        SignRelu => "sign_relu",
        Blu => "blu",
        SShapedRelu => "s_shaped_relu",
        Erelu => "e_relu",
        Eprelu => "ep_relu",
        Lisa => "lisa",
        Alisa => "alisa",
        Brelu => "brelu",
        BlRelu => "bl_relu",
        Bif => "bif",
        Bbif => "bbif",
        RelTanh => "rel_tanh",
        Plu => "plu",
        NlRelu => "nl_relu",
        Mtlu => "mtlu",
    }
    Elu {
        Elu => "elu",
        Selu => "selu",
        Pelu => "pelu",
        Celu => "celu",
        Mpelu => "mpelu",
        Reu => "reu",
        Preu => "preu",
        Felu => "felu",
        Eelu => "eelu",
        Pdelu => "pdelu",
        Elish => "elish",
        HardElish => "hard_elish",
    }
    Misc {
        Swish => "swish",
        ESwish => "e_swish",
        HardSwishPiecewise => "hard_swish_piecewise",
        HardSwishBeta => "hard_swish_beta",
        Softplus => "softplus",
        Slu => "slu",
        Mish => "mish",
        GeluErf => "gelu_erf",
        GeluTanh => "gelu_tanh",
        GeluSigmoid => "gelu_sigmoid",
        Sgelu => "sgelu",
        Identity => "identity",
    }
}

/// Which family of the catalog a kind belongs to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Sigmoid,
    Relu,
    Elu,
    Misc,
}

/// Taxonomy tag: fixed shape, hyper-parameterised, trainable, or random.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Fixed,
    Parametric,
    Adaptive,
    Stochastic,
}

impl Kind {
    pub fn from_name(name: &str) -> Result<Kind> {
        let alias = match name {
            "sigmoid" => "logistic",
            "gelu" => "gelu_erf",
            "hard_swish" => "hard_swish_piecewise",
            "lrelu" => "leaky_relu",
            "srelu" => "s_shaped_relu",
            "linear" => "identity",
            other => other,
        };
        Kind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == alias)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn is_stochastic(self) -> bool {
        stochastic::coefficient_index(self).is_some()
    }

    pub fn family(self) -> Family {
        if self.is_stochastic() {
            return Family::Stochastic;
        }
        let p = default_params(self);
        if p.is_empty() {
            Family::Fixed
        } else if p.iter().any(|q| q.learnable) {
            Family::Adaptive
        } else {
            Family::Parametric
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Kind> {
        Kind::from_name(s)
    }
}

impl Serialize for Kind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Kind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Kind, D::Error> {
        let s = String::deserialize(d)?;
        Kind::from_name(&s).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Parameters

/// One named scalar parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: f64,
    pub learnable: bool,
}

/// Ordered parameters of one activation. Hyper-parameters stay fixed during
/// training; learnable ones receive gradients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Param>", into = "Vec<Param>")]
pub struct ParamSet {
    names: Vec<String>,
    learnable: Vec<bool>,
    values: Vec<f64>,
}

impl From<Vec<Param>> for ParamSet {
    fn from(v: Vec<Param>) -> Self {
        let mut p = ParamSet::default();
        for q in v {
            p.push(q.name, q.value, q.learnable);
        }
        p
    }
}

impl From<ParamSet> for Vec<Param> {
    fn from(p: ParamSet) -> Self {
        p.iter().collect()
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, learnable: bool) {
        self.names.push(name.into());
        self.values.push(value);
        self.learnable.push(learnable);
    }

    fn hyper(mut self, name: &str, value: f64) -> Self {
        self.push(name, value, false);
        self
    }

    fn learn(mut self, name: &str, value: f64) -> Self {
        self.push(name, value, true);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_learnable(&self, i: usize) -> bool {
        self.learnable[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.values[i])
    }

    /// Overwrite a parameter by name. Does not re-validate.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))?;
        self.values[i] = value;
        Ok(())
    }

    /// Builder form of [`ParamSet::set`].
    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = Param> + '_ {
        (0..self.len()).map(move |i| Param {
            name: self.names[i].clone(),
            value: self.values[i],
            learnable: self.learnable[i],
        })
    }

    pub fn learnable_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.learnable[i]).collect()
    }

    pub fn learnable_names(&self) -> Vec<String> {
        self.learnable_indices()
            .into_iter()
            .map(|i| self.names[i].clone())
            .collect()
    }
}

/// Default parameters for a kind. The MTLU default is five anchors at
/// -1, -0.5, 0, 0.5, 1 with bins initialised to reproduce ReLU.
pub fn default_params(kind: Kind) -> ParamSet {
    use Kind::*;
    let p = ParamSet::new();
    match kind {
        STanh => p.hyper("A", 2.0 / 3.0).hyper("B", 1.7159),
        Psf => p.hyper("m", 1.0),
        PTanh => p.hyper("a", 0.25),
        Hexpo => p.hyper("a", 1.0).hyper("b", 1.0).hyper("c", 1.0).hyper("d", 1.0),
        Srs => p.learn("alpha", 2.0).learn("beta", 3.0),
        LeakyRelu => p.hyper("alpha", 0.01),
        Prelu => p.learn("alpha", 0.25),
        Rrelu => p
            .hyper("l", 1.0 / 8.0)
            .hyper("u", 1.0 / 3.0)
            .hyper("r", (1.0 / 8.0 + 1.0 / 3.0) / 2.0),
        Ptelu => p.learn("alpha", 1.0).learn("beta", 1.0),
        Frelu => p.learn("b", -0.5),
        RtRelu => p.hyper("sigma", 0.5).hyper("a", 0.0),
        RtPrelu => p.hyper("sigma", 0.5).learn("k", 0.25).hyper("a", 0.0),
        Drelu => p.hyper("delta", 0.05),
        SignRelu => p.hyper("a", 1.0),
        Blu => p.learn("beta", 0.5),
        SShapedRelu => p.learn("r", 1.0).learn("a", 0.5).learn("l", -1.0).learn("b", 0.1),
        Erelu => p.hyper("alpha", 0.2).hyper("R", 1.0),
        Eprelu => p.hyper("alpha", 0.2).learn("a", 0.25).hyper("R", 1.0),
        Lisa => p.hyper("alpha1", 0.5).hyper("alpha2", 0.1),
        Alisa => p.learn("alpha1", 0.5).learn("alpha2", 0.1),
        Brelu => p.hyper("A", 1.0),
        BlRelu => p.hyper("A", 1.0).hyper("alpha", 0.01),
        Bif => p.hyper("a", 1.0),
        Bbif => p.hyper("a", 1.0).hyper("b", 2.0),
        RelTanh => p
            .learn("lambda_pos", 1.0)
            .learn("lambda_neg", -1.0)
            .hyper("lambda_pos_lower", 0.0)
            .hyper("lambda_pos_upper", 5.0)
            .hyper("lambda_neg_lower", -5.0)
            .hyper("lambda_neg_upper", 0.0),
        Plu => p.hyper("alpha", 0.1).hyper("c", 1.0),
        NlRelu => p.hyper("beta", 1.0),
        Mtlu => mtlu_params(&[-1.0, -0.5, 0.0, 0.5, 1.0], &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[0.0; 6])
            .expect("default mtlu layout"),
        Elu => p.hyper("alpha", 1.0),
        Selu => p.hyper("lambda", 1.0507).hyper("alpha", 1.67326),
        Pelu => p.learn("a", 1.0).learn("b", 1.0),
        Celu => p.learn("alpha", 1.0),
        Mpelu => p.learn("alpha", 1.0).learn("beta", 1.0),
        Preu => p.learn("alpha", 1.0).learn("beta", 1.0),
        Felu => p.hyper("alpha", 1.0),
        Eelu => p.hyper("epsilon", 1.0).learn("alpha", 1.0).learn("beta", 1.0).hyper("k", 1.0),
        Pdelu => p.learn("alpha", 1.0).hyper("t", 0.9),
        Swish => p.learn("beta", 1.0),
        ESwish => p.learn("beta", 1.375),
        HardSwishBeta => p.hyper("beta", 1.0),
        Slu => p.hyper("beta", 1.0).hyper("alpha", 2.0).hyper("gamma", 2.0 * LN_2),
        Sgelu => p.hyper("alpha", 1.0),
        Logistic | Tanh | ReSech | SSigmoid | Silu | Dsilu | Lisht | Elliott | ElliottUnit
        | MElliott | HardSigmoid | HardTanh | Relu | ShiftedRelu | Vrelu | Softsign | Reu
        | Elish | HardElish | HardSwishPiecewise | Softplus | Mish | GeluErf | GeluTanh
        | GeluSigmoid | Identity => p,
    }
}

/// Build MTLU parameters: `anchors` are the K bin edges, `slopes` and
/// `intercepts` hold the K+1 per-bin linear pieces.
pub fn mtlu_params(anchors: &[f64], slopes: &[f64], intercepts: &[f64]) -> Result<ParamSet> {
    let k = anchors.len();
    if k == 0 || slopes.len() != k + 1 || intercepts.len() != k + 1 {
        return Err(Error::param(
            Kind::Mtlu,
            format!(
                "need K >= 1 anchors and K+1 slopes/intercepts, got {}/{}/{}",
                k,
                slopes.len(),
                intercepts.len()
            ),
        ));
    }
    let mut p = ParamSet::new();
    for (i, &c) in anchors.iter().enumerate() {
        p.push(format!("c[{i}]"), c, false);
    }
    for (i, &a) in slopes.iter().enumerate() {
        p.push(format!("a[{i}]"), a, true);
    }
    for (i, &b) in intercepts.iter().enumerate() {
        p.push(format!("b[{i}]"), b, true);
    }
    Ok(p)
}

/// MTLU with `bins` uniformly spaced anchors on `[lo, hi]`, initialised as ReLU.
pub fn mtlu_uniform(lo: f64, hi: f64, bins: usize) -> Result<ParamSet> {
    if bins < 1 || !(hi > lo) {
        return Err(Error::param(Kind::Mtlu, "need bins >= 1 and lo < hi"));
    }
    let anchors: Vec<f64> = if bins == 1 {
        vec![lo]
    } else {
        (0..bins)
            .map(|i| lo + (hi - lo) * i as f64 / (bins - 1) as f64)
            .collect()
    };
    // Piece k covers (c[k-1], c[k]]; it behaves like ReLU's right branch once
    // its left edge is at or beyond zero.
    let slopes: Vec<f64> = (0..=bins)
        .map(|k| if k > 0 && anchors[k - 1] >= 0.0 { 1.0 } else { 0.0 })
        .collect();
    mtlu_params(&anchors, &slopes, &vec![0.0; bins + 1])
}

fn mtlu_k(n: usize) -> usize {
    // n = K + 2(K + 1)
    (n - 2) / 3
}

/// Index of the MTLU piece whose bin contains x.
#[inline]
pub(crate) fn mtlu_bin(anchors: &[f64], x: f64) -> usize {
    anchors.iter().take_while(|&&c| x > c).count()
}

// ---------------------------------------------------------------------------
// Validation

fn check_schema(kind: Kind, p: &ParamSet) -> Result<()> {
    let reference = if kind == Kind::Mtlu {
        if p.len() < 3 || (p.len() - 2) % 3 != 0 {
            return Err(Error::param(kind, format!("unexpected parameter count {}", p.len())));
        }
        let k = mtlu_k(p.len());
        let v = p.values();
        mtlu_params(&v[..k], &v[k..2 * k + 1], &v[2 * k + 1..])?
    } else {
        default_params(kind)
    };
    if reference.names() != p.names() {
        return Err(Error::param(
            kind,
            format!(
                "expected parameters [{}], got [{}]",
                reference.names().join(", "),
                p.names().join(", ")
            ),
        ));
    }
    if let Some(i) = (0..p.len()).find(|&i| p.learnable[i] != reference.learnable[i]) {
        return Err(Error::param(
            kind,
            format!("`{}` has the wrong hyper/learnable tag", p.names[i]),
        ));
    }
    if let Some(i) = p.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::param(kind, format!("`{}` is not finite", p.names[i])));
    }
    Ok(())
}

/// Check that `p` has the right schema for `kind` and satisfies its
/// invariants. The error names the violated condition.
pub fn validate(kind: Kind, p: &ParamSet) -> Result<()> {
    use Kind::*;
    check_schema(kind, p)?;
    let v = p.values();
    let need = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::param(kind, what))
        }
    };
    match kind {
        STanh => need(v[0] > 0.0 && v[1] > 0.0, "A > 0 and B > 0"),
        Psf => need(v[0] > 0.0, "m > 0"),
        PTanh => need(v[0] >= 0.0, "a >= 0"),
        Hexpo => {
            need(v[1].abs() >= 1e-9 && v[3].abs() >= 1e-9, "|b| >= 1e-9 and |d| >= 1e-9")?;
            need(v.iter().all(|&q| q > 0.0), "a, b, c, d > 0")
        }
        Srs => {
            let (a, b) = (v[0], v[1]);
            need(a > 0.0 && b > 0.0, "alpha > 0 and beta > 0")?;
            // The denominator x/alpha + exp(-x/beta) has a real root as soon
            // as beta >= alpha*e, not only at equality.
            need(b < a * E - 1e-6, "beta < alpha*e - 1e-6 (pole guard)")
        }
        LeakyRelu => need(v[0] >= 0.0, "alpha >= 0"),
        Rrelu => {
            let (l, u, r) = (v[0], v[1], v[2]);
            need(0.0 <= l && l < u && u < 1.0, "0 <= l < u < 1")?;
            need(l <= r && r <= u, "l <= r <= u")
        }
        Ptelu => need(v[0] >= 0.0 && v[1] >= 0.0, "alpha >= 0 and beta >= 0"),
        RtRelu => need(v[0] >= 0.0, "sigma >= 0"),
        RtPrelu => need(v[0] >= 0.0, "sigma >= 0"),
        Drelu => need(v[0] >= 0.0, "delta >= 0"),
        SignRelu => need(v[0] >= 0.0, "a >= 0"),
        Blu => need((-1.0..=1.0).contains(&v[0]), "-1 <= beta <= 1"),
        SShapedRelu => need(v[2] <= v[0], "l <= r"),
        Erelu | Eprelu => {
            let (alpha, r) = (v[0], v[v.len() - 1]);
            need((0.0..1.0).contains(&alpha), "0 <= alpha < 1")?;
            need(1.0 - alpha <= r && r <= 1.0 + alpha, "1 - alpha <= R <= 1 + alpha")
        }
        Brelu => need(v[0] > 0.0, "A > 0"),
        BlRelu => need(v[0] > 0.0 && v[1] >= 0.0, "A > 0 and alpha >= 0"),
        Bif => need(v[0] > 0.0, "a > 0"),
        Bbif => {
            need(v[0] > 0.0 && v[1] > 0.0, "a > 0 and b > 0")?;
            need(v[1] > v[0] / 2.0, "b > a/2")
        }
        RelTanh => {
            need(v[2] <= v[0] && v[0] <= v[3], "lambda_pos within its bounds")?;
            need(v[4] <= v[1] && v[1] <= v[5], "lambda_neg within its bounds")?;
            need(v[1] < v[0], "lambda_neg < lambda_pos")
        }
        Plu => need(v[1] > 0.0 && (0.0..=1.0).contains(&v[0]), "c > 0 and 0 <= alpha <= 1"),
        NlRelu => need(v[0] > 0.0, "beta > 0"),
        Mtlu => {
            let k = mtlu_k(v.len());
            let c = &v[..k];
            need(c.windows(2).all(|w| w[0] < w[1]), "anchors strictly increasing")?;
            if k > 2 {
                let s = c[1] - c[0];
                let ok = c.windows(2).all(|w| ((w[1] - w[0]) - s).abs() <= 1e-9 * s.abs().max(1.0));
                need(ok, "anchors uniformly spaced")?;
            }
            Ok(())
        }
        Elu | Celu | Felu => need(v[0] > 0.0, "alpha > 0"),
        Selu => need(v[0] > 0.0 && v[1] > 0.0, "lambda > 0 and alpha > 0"),
        Pelu => need(v[0] > 0.0 && v[1] > 0.0, "a > 0 and b > 0"),
        Mpelu => need(v[0] >= 0.0 && v[1] > 0.0, "alpha >= 0 and beta > 0"),
        Preu => need(v[0] > 0.0 && v[1] > 0.0, "alpha > 0 and beta > 0"),
        Eelu => {
            need(v[0] > 0.0 && v[0] <= 1.0, "0 < epsilon <= 1")?;
            need(v[1] >= 0.0 && v[2] > 0.0, "alpha >= 0 and beta > 0")?;
            need((0.0..=2.0).contains(&v[3]), "0 <= k <= 2")
        }
        Pdelu => need(v[0] > 0.0 && v[1] > 0.0 && v[1] != 1.0, "alpha > 0, t > 0 and t != 1"),
        ESwish => need((1.0..=2.0).contains(&v[0]), "1 <= beta <= 2"),
        HardSwishBeta => need(v[0] > 0.0, "beta > 0"),
        Slu => need(v[0] >= 0.0 && v[1] >= 0.0, "beta >= 0 and alpha >= 0"),
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Metadata

/// One end of a declared output range.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    /// `true` if the bound is approached but never attained.
    pub open: bool,
}

impl Bound {
    pub fn closed(value: f64) -> Self {
        Bound { value, open: false }
    }
    pub fn open(value: f64) -> Self {
        Bound { value, open: true }
    }
    pub fn neg_inf() -> Self {
        Bound::open(f64::NEG_INFINITY)
    }
    pub fn pos_inf() -> Self {
        Bound::open(f64::INFINITY)
    }
}

/// Static properties of a kind under a given parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: Kind,
    pub group: Group,
    pub family: Family,
    pub lower: Bound,
    pub upper: Bound,
    pub monotonic: bool,
    pub smooth: bool,
    pub bounded: bool,
    pub stochastic: bool,
    pub has_learnable: bool,
    /// Points where the function is not differentiable (or jumps).
    pub kinks: Vec<f64>,
}

impl Descriptor {
    /// Whether `y` lies in the closure of the declared range.
    pub fn contains_closed(&self, y: f64) -> bool {
        y >= self.lower.value && y <= self.upper.value
    }

    /// Whether `y` respects open ends strictly.
    pub fn contains_strict(&self, y: f64) -> bool {
        let lo = if self.lower.open { y > self.lower.value } else { y >= self.lower.value };
        let hi = if self.upper.open { y < self.upper.value } else { y <= self.upper.value };
        lo && hi
    }
}

pub const SILU_MIN: f64 = -0.278_464_542_761_073_8;
pub const SILU_ARGMIN: f64 = -1.278_464_542_761_073_8;
pub const DSILU_MAX: f64 = 1.099_839_320_128_866_9;
pub const DSILU_ARGMAX: f64 = 2.399_357_280_515_467_7;
pub const RESECH_ARGMAX: f64 = 1.199_678_640_257_733_8;
pub const RESECH_MAX: f64 = 0.662_743_419_349_181_6;
pub const MISH_MIN: f64 = -0.308_843_413_017_250_4;
pub const GELU_ERF_MIN: f64 = -0.169_971_207_479_903_66;
pub const GELU_TANH_MIN: f64 = -0.170_040_750_571_254_05;
pub const ELISH_MIN: f64 = -0.171_572_875_253_809_9;
pub const HARD_ELISH_MIN: f64 = -0.099_673_151_528_742_62;

// Tabulated minima are rounded to 17 digits; give them a hair of slack so
// closed-range checks never trip on the last ulp.
fn approx_min(v: f64) -> Bound {
    Bound::closed(v - 1e-15)
}

fn approx_max(v: f64) -> Bound {
    Bound::closed(v + 1e-15)
}

/// A linear piece `slope * x + intercept` on `[lo, hi]` (ends may be infinite).
struct Piece {
    lo: f64,
    hi: f64,
    slope: f64,
    intercept: f64,
}

fn pwl_range(pieces: &[Piece]) -> (Bound, Bound) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pieces {
        for (end, dir) in [(p.lo, -1.0), (p.hi, 1.0)] {
            let y = if end.is_finite() {
                p.slope * end + p.intercept
            } else if p.slope == 0.0 {
                p.intercept
            } else if p.slope * dir > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    let b = |v: f64| if v.is_finite() { Bound::closed(v) } else { Bound::open(v) };
    (b(lo), b(hi))
}

fn pieces(kind: Kind, v: &[f64]) -> Option<Vec<Piece>> {
    use Kind::*;
    let ninf = f64::NEG_INFINITY;
    let pinf = f64::INFINITY;
    let pc = |lo, hi, slope, intercept| Piece { lo, hi, slope, intercept };
    Some(match kind {
        LeakyRelu | Prelu => vec![pc(ninf, 0.0, v[0], 0.0), pc(0.0, pinf, 1.0, 0.0)],
        SShapedRelu => {
            let (r, a, l, b) = (v[0], v[1], v[2], v[3]);
            vec![
                pc(ninf, l, b, l - b * l),
                pc(l, r, 1.0, 0.0),
                pc(r, pinf, a, r - a * r),
            ]
        }
        Lisa | Alisa => vec![
            pc(ninf, 0.0, v[1], 0.0),
            pc(0.0, 1.0, 1.0, 0.0),
            pc(1.0, pinf, v[0], 1.0 - v[0]),
        ],
        BlRelu => {
            let (a_, s) = (v[0], v[1]);
            vec![
                pc(ninf, 0.0, s, 0.0),
                pc(0.0, a_, 1.0, 0.0),
                pc(a_, pinf, s, (1.0 - s) * a_),
            ]
        }
        Plu => {
            let (a, c) = (v[0], v[1]);
            vec![
                pc(ninf, -c, a, a * c - c),
                pc(-c, c, 1.0, 0.0),
                pc(c, pinf, a, c - a * c),
            ]
        }
        Mtlu => {
            let k = mtlu_k(v.len());
            let (c, a, b) = (&v[..k], &v[k..2 * k + 1], &v[2 * k + 1..]);
            (0..=k)
                .map(|i| {
                    let lo = if i == 0 { ninf } else { c[i - 1] };
                    let hi = if i == k { pinf } else { c[i] };
                    pc(lo, hi, a[i], b[i])
                })
                .collect()
        }
        _ => return None,
    })
}

fn range(kind: Kind, v: &[f64]) -> (Bound, Bound) {
    use Kind::*;
    if let Some(p) = pieces(kind, v) {
        return pwl_range(&p);
    }
    let (o, c) = (Bound::open, Bound::closed);
    let (ninf, pinf) = (Bound::neg_inf(), Bound::pos_inf());
    let nonneg = (c(0.0), pinf);
    match kind {
        Logistic | Psf | ElliottUnit => (o(0.0), o(1.0)),
        Tanh | HardTanh => (c(-1.0), c(1.0)),
        STanh => (o(-v[1]), o(v[1])),
        ReSech => (approx_min(-RESECH_MAX), approx_max(RESECH_MAX)),
        SSigmoid => (o(-2.0), o(2.0)),
        PTanh => (o(-v[0]), o(1.0)),
        Hexpo => (o(-v[2]), o(v[0])),
        Silu => (approx_min(SILU_MIN), pinf),
        Dsilu => (approx_min(1.0 - DSILU_MAX), approx_max(DSILU_MAX)),
        Lisht | Relu | RtRelu | Vrelu | Erelu | Bif | NlRelu => nonneg,
        Elliott | MElliott | Softsign => (o(-1.0), o(1.0)),
        Srs => {
            let (a, b) = (v[0], v[1]);
            (approx_min(a * b / (b - a * E)), o(a))
        }
        HardSigmoid => (c(0.0), c(1.0)),
        Rrelu => (ninf, pinf),
        Ptelu => {
            if v[0] > 0.0 && v[1] > 0.0 {
                (o(-v[0]), pinf)
            } else {
                nonneg
            }
        }
        Frelu => (c(v[0]), pinf),
        RtPrelu | Eprelu => {
            let k = v[1];
            if k > 0.0 {
                (ninf, pinf)
            } else {
                nonneg
            }
        }
        ShiftedRelu => (c(-1.0), pinf),
        Drelu => (c(-v[0]), pinf),
        SignRelu => {
            if v[0] > 0.0 {
                (o(-v[0]), pinf)
            } else {
                nonneg
            }
        }
        Blu => {
            let b = v[0];
            if b == 1.0 {
                (o(-1.0), pinf)
            } else if b == -1.0 {
                (ninf, o(1.0))
            } else {
                (ninf, pinf)
            }
        }
        Brelu => (c(0.0), c(v[0])),
        Bbif => (c(0.0), c(v[1])),
        RelTanh | Identity => (ninf, pinf),
        Elu | Celu | Felu => (o(-v[0]), pinf),
        Selu => (o(-v[0] * v[1]), pinf),
        Pelu => (o(-v[0]), pinf),
        Mpelu | Eelu => {
            let alpha = if kind == Mpelu { v[0] } else { v[1] };
            if alpha > 0.0 {
                (o(-alpha), pinf)
            } else {
                nonneg
            }
        }
        Reu => (approx_min(-1.0 / E), pinf),
        Preu => (approx_min(-v[0] / (v[1] * E)), pinf),
        // t < 1 reaches -alpha at a finite cut-off; t > 1 only approaches it.
        Pdelu if v[1] < 1.0 => (c(-v[0]), pinf),
        Pdelu => (o(-v[0]), pinf),
        Elish => (approx_min(ELISH_MIN), pinf),
        HardElish => (approx_min(HARD_ELISH_MIN), pinf),
        Swish => {
            let b = v[0];
            if b > 0.0 {
                (approx_min(SILU_MIN / b), pinf)
            } else if b < 0.0 {
                (ninf, approx_max(SILU_MIN / b))
            } else {
                (ninf, pinf)
            }
        }
        ESwish => (approx_min(v[0] * SILU_MIN), pinf),
        HardSwishPiecewise => (c(-0.375), pinf),
        HardSwishBeta => (approx_min(-0.625 / v[0]), pinf),
        Softplus => (o(0.0), pinf),
        Slu => {
            let (beta, alpha, gamma) = (v[0], v[1], v[2]);
            // Negative branch sweeps (-gamma, alpha ln2 - gamma); the
            // positive branch starts at 0.
            let left_hi = alpha * LN_2 - gamma;
            let lo = if alpha > 0.0 {
                if -gamma < 0.0 { o(-gamma) } else { c(0.0) }
            } else if -gamma < 0.0 {
                c(-gamma)
            } else {
                c(0.0)
            };
            let hi = if beta > 0.0 { pinf } else { c(left_hi.max(0.0)) };
            (lo, hi)
        }
        Mish => (approx_min(MISH_MIN), pinf),
        GeluErf => (approx_min(GELU_ERF_MIN), pinf),
        GeluTanh => (approx_min(GELU_TANH_MIN), pinf),
        GeluSigmoid => (approx_min(SILU_MIN / 1.702), pinf),
        Sgelu => {
            if v[0] >= 0.0 {
                nonneg
            } else {
                (ninf, c(0.0))
            }
        }
        LeakyRelu | Prelu | SShapedRelu | Lisa | Alisa | BlRelu | Plu | Mtlu => unreachable!(),
    }
}

fn monotonic(kind: Kind, v: &[f64]) -> bool {
    use Kind::*;
    match kind {
        ReSech | Silu | Dsilu | Lisht | Srs | Vrelu | Bif | Bbif | Reu | Preu | Elish
        | HardElish | ESwish | HardSwishPiecewise | HardSwishBeta | Mish | GeluErf | GeluTanh
        | GeluSigmoid | Sgelu => false,
        Swish => v[0] == 0.0,
        LeakyRelu | Prelu | SignRelu | Plu | Pdelu => v[0] >= 0.0,
        RtPrelu | Eprelu => v[1] >= 0.0,
        BlRelu => v[1] >= 0.0,
        Blu => v[0].abs() <= 1.0,
        SShapedRelu => v[1] >= 0.0 && v[3] >= 0.0,
        Lisa | Alisa => v[0] >= 0.0 && v[1] >= 0.0,
        Slu => v[0] >= 0.0 && v[1] >= 0.0 && v[1] * LN_2 - v[2] <= 0.0,
        Mtlu => {
            let k = mtlu_k(v.len());
            let (c, a, b) = (&v[..k], &v[k..2 * k + 1], &v[2 * k + 1..]);
            a.iter().all(|&s| s >= 0.0)
                && (0..k).all(|i| a[i] * c[i] + b[i] <= a[i + 1] * c[i] + b[i + 1])
        }
        _ => true,
    }
}

/// Points of non-differentiability for `kind` under raw parameter values.
pub(crate) fn kinks_raw(kind: Kind, v: &[f64]) -> Vec<f64> {
    use Kind::*;
    let when = |cond: bool, at: &[f64]| if cond { at.to_vec() } else { Vec::new() };
    let mut k = match kind {
        PTanh => when(v[0] != 1.0, &[0.0]),
        Hexpo => when(v[0] / v[1] != v[2] / v[3], &[0.0]),
        HardSigmoid => vec![-2.5, 2.5],
        HardTanh => vec![-1.0, 1.0],
        Relu | Frelu | Vrelu | NlRelu | Erelu => vec![0.0],
        LeakyRelu | Prelu | SignRelu | Elu | Felu => when(v[0] != 1.0, &[0.0]),
        Rrelu => when(v[2] != 1.0, &[0.0]),
        Ptelu => when(v[0] * v[1] != 1.0, &[0.0]),
        RtRelu => vec![-v[1]],
        RtPrelu => when(v[1] != 1.0, &[-v[2]]),
        ShiftedRelu => vec![-1.0],
        Drelu => vec![-v[0]],
        SShapedRelu => {
            let mut out = Vec::new();
            if v[1] != 1.0 {
                out.push(v[0]);
            }
            if v[3] != 1.0 {
                out.push(v[2]);
            }
            out
        }
        Eprelu => when(v[1] != v[2], &[0.0]),
        Lisa | Alisa => {
            let mut out = when(v[1] != 1.0, &[0.0]);
            out.extend(when(v[0] != 1.0, &[1.0]));
            out
        }
        Brelu => vec![0.0, v[0]],
        BlRelu => when(v[1] != 1.0, &[0.0, v[0]]),
        Bbif => {
            let e = v[1] + v[0] / 2.0;
            vec![-e, e]
        }
        Plu => when(v[0] != 1.0, &[-v[1], v[1]]),
        Mtlu => v[..mtlu_k(v.len())].to_vec(),
        Selu => when(v[1] != 1.0, &[0.0]),
        Mpelu => when(v[0] * v[1] != 1.0, &[0.0]),
        Eelu => when(v[1] * v[2] != v[3], &[0.0]),
        Pdelu => {
            let t = v[1];
            let mut out = when(v[0] != 1.0, &[0.0]);
            // Past the cut-off the curve is flat; the join is only C1 when
            // the exponent t/(1-t) is at least one.
            if t < 1.0 && t / (1.0 - t) < 1.0 {
                out.push(-1.0 / (1.0 - t));
            }
            out
        }
        HardElish => vec![-1.0, 1.0],
        HardSwishPiecewise => vec![-3.0, 3.0],
        HardSwishBeta => vec![-2.5 / v[0], 2.5 / v[0]],
        Slu => {
            let (beta, alpha, gamma) = (v[0], v[1], v[2]);
            when(alpha / 2.0 != beta || alpha * LN_2 != gamma, &[0.0])
        }
        _ => Vec::new(),
    };
    k.sort_by(|a, b| a.total_cmp(b));
    k.dedup();
    k
}

/// Metadata for `kind` under its default parameters.
pub fn descriptor(kind: Kind) -> Descriptor {
    describe(kind, &default_params(kind)).expect("defaults are valid")
}

/// Metadata for `kind` under specific parameters.
pub fn describe(kind: Kind, p: &ParamSet) -> Result<Descriptor> {
    validate(kind, p)?;
    let v = p.values();
    let (lower, upper) = range(kind, v);
    let kinks = kinks_raw(kind, v);
    Ok(Descriptor {
        kind,
        group: kind.group(),
        family: kind.family(),
        bounded: lower.value.is_finite() && upper.value.is_finite(),
        monotonic: monotonic(kind, v),
        smooth: kinks.is_empty(),
        stochastic: kind.is_stochastic(),
        has_learnable: p.learnable.iter().any(|&l| l),
        lower,
        upper,
        kinks,
    })
}

// ---------------------------------------------------------------------------
// Evaluation

/// Evaluate `kind` at `x`. Stochastic kinds draw their coefficient from
/// `ctx` in train mode and use its expectation in eval mode.
pub fn eval(kind: Kind, p: &ParamSet, x: f64, ctx: &mut EvalContext) -> Result<f64> {
    validate(kind, p)?;
    if !x.is_finite() {
        return Err(Error::NonFiniteInput(x));
    }
    match stochastic::coefficient_index(kind) {
        None => Ok(value(kind, p.values(), x)),
        Some(i) => {
            let mut v = p.values().to_vec();
            v[i] = stochastic::coefficient_for(kind, p.values(), ctx);
            Ok(value(kind, &v, x))
        }
    }
}

/// PSF `sigma(x)^m`, moved to log space once `m` is large enough for the
/// direct power to lose precision.
#[inline]
pub(crate) fn psf(x: f64, m: f64) -> f64 {
    if m > 100.0 {
        (-m * softplus(-x)).exp()
    } else {
        logistic(x).powf(m)
    }
}

#[inline]
pub(crate) fn tanh_d1(x: f64) -> f64 {
    let s = sech(x);
    s * s
}

#[inline]
pub(crate) fn hard_sigmoid_unit(x: f64) -> f64 {
    ((x + 1.0) / 2.0).clamp(0.0, 1.0)
}

pub(crate) const GELU_TANH_C: f64 = 0.044_715;
pub(crate) const GELU_SIGMOID_K: f64 = 1.702;

/// Unchecked forward value. `v` must follow the kind's schema; stochastic
/// coefficients are read from their slot as-is.
pub fn value(kind: Kind, v: &[f64], x: f64) -> f64 {
    use Kind::*;
    match kind {
        Logistic => logistic(x),
        Tanh => x.tanh(),
        STanh => v[1] * (v[0] * x).tanh(),
        Psf => psf(x, v[0]),
        ReSech => x * sech(x),
        SSigmoid => 4.0 * logistic(x) - 2.0,
        PTanh => {
            if x > 0.0 {
                x.tanh()
            } else {
                v[0] * x.tanh()
            }
        }
        Hexpo => {
            let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
            if x >= 0.0 {
                -a * (-x / b).exp_m1()
            } else {
                c * (x / d).exp_m1()
            }
        }
        Silu => x * logistic(x),
        Dsilu => {
            let s = logistic(x);
            s * (1.0 + x * (1.0 - s))
        }
        Lisht => x * x.tanh(),
        Elliott | Softsign => x / (1.0 + x.abs()),
        ElliottUnit => 0.5 * x / (1.0 + x.abs()) + 0.5,
        MElliott => x / (1.0 + x * x).sqrt(),
        Srs => {
            let (a, b) = (v[0], v[1]);
            x / (x / a + (-x / b).exp())
        }
        HardSigmoid => (0.2 * x + 0.5).clamp(0.0, 1.0),
        HardTanh => x.clamp(-1.0, 1.0),
        Relu => x.max(0.0),
        LeakyRelu | Prelu => {
            if x >= 0.0 {
                x
            } else {
                v[0] * x
            }
        }
        Rrelu => {
            if x >= 0.0 {
                x
            } else {
                v[2] * x
            }
        }
        Ptelu => {
            if x > 0.0 {
                x
            } else {
                v[0] * (v[1] * x).tanh()
            }
        }
        Frelu => x.max(0.0) + v[0],
        RtRelu => (x + v[1]).max(0.0),
        RtPrelu => {
            let z = x + v[2];
            if z > 0.0 {
                z
            } else {
                v[1] * z
            }
        }
        ShiftedRelu => x.max(-1.0),
        Drelu => x.max(-v[0]),
        Vrelu => x.abs(),
        SignRelu => {
            if x >= 0.0 {
                x
            } else {
                v[0] * x / (1.0 - x)
            }
        }
        Blu => v[0] * ((x * x + 1.0).sqrt() - 1.0) + x,
        SShapedRelu => {
            let (r, a, l, b) = (v[0], v[1], v[2], v[3]);
            if x >= r {
                r + a * (x - r)
            } else if x > l {
                x
            } else {
                l + b * (x - l)
            }
        }
        Erelu => {
            if x > 0.0 {
                v[1] * x
            } else {
                0.0
            }
        }
        Eprelu => {
            if x > 0.0 {
                v[2] * x
            } else {
                v[1] * x
            }
        }
        Lisa | Alisa => {
            if x > 1.0 {
                v[0] * (x - 1.0) + 1.0
            } else if x >= 0.0 {
                x
            } else {
                v[1] * x
            }
        }
        Brelu => x.max(0.0).min(v[0]),
        BlRelu => {
            let (a_, s) = (v[0], v[1]);
            if x <= 0.0 {
                s * x
            } else if x <= a_ {
                x
            } else {
                s * x + (1.0 - s) * a_
            }
        }
        Bif => {
            let a = v[0];
            if x < -a {
                -x - a / 2.0
            } else if x > a {
                x - a / 2.0
            } else {
                x * x / (2.0 * a)
            }
        }
        Bbif => {
            let (a, b) = (v[0], v[1]);
            let edge = b + a / 2.0;
            if x.abs() > edge {
                b
            } else if x.abs() > a {
                x.abs() - a / 2.0
            } else {
                x * x / (2.0 * a)
            }
        }
        RelTanh => {
            let (lp, ln) = (v[0], v[1]);
            if x >= lp {
                tanh_d1(lp) * (x - lp) + lp.tanh()
            } else if x > ln {
                x.tanh()
            } else {
                tanh_d1(ln) * (x - ln) + ln.tanh()
            }
        }
        Plu => {
            let (a, c) = (v[0], v[1]);
            (a * (x + c) - c).max((a * (x - c) + c).min(x))
        }
        NlRelu => (v[0] * x.max(0.0)).ln_1p(),
        Mtlu => {
            let k = mtlu_k(v.len());
            let i = mtlu_bin(&v[..k], x);
            v[k + i] * x + v[2 * k + 1 + i]
        }
        Elu | Celu | Felu if x > 0.0 => x,
        Elu => v[0] * x.exp_m1(),
        Celu => v[0] * (x / v[0]).exp_m1(),
        Felu => v[0] * ((x / LN_2).exp2() - 1.0),
        Selu => {
            if x > 0.0 {
                v[0] * x
            } else {
                v[0] * v[1] * x.exp_m1()
            }
        }
        Pelu => {
            let (a, b) = (v[0], v[1]);
            if x >= 0.0 {
                a / b * x
            } else {
                a * (x / b).exp_m1()
            }
        }
        Mpelu => {
            if x > 0.0 {
                x
            } else {
                v[0] * (v[1] * x).exp_m1()
            }
        }
        Reu => {
            if x > 0.0 {
                x
            } else {
                x * x.exp()
            }
        }
        Preu => {
            let (a, b) = (v[0], v[1]);
            if x > 0.0 {
                a * x
            } else {
                a * x * (b * x).exp()
            }
        }
        Eelu => {
            if x > 0.0 {
                v[3] * x
            } else {
                v[1] * (v[2] * x).exp_m1()
            }
        }
        Pdelu => {
            let (alpha, t) = (v[0], v[1]);
            if x > 0.0 {
                x
            } else {
                let base = (1.0 + (1.0 - t) * x).max(0.0);
                alpha * (base.powf(1.0 / (1.0 - t)) - 1.0)
            }
        }
        Elish => {
            if x >= 0.0 {
                x * logistic(x)
            } else {
                x.exp_m1() * logistic(x)
            }
        }
        HardElish => {
            if x >= 0.0 {
                x * hard_sigmoid_unit(x)
            } else {
                x.exp_m1() * hard_sigmoid_unit(x)
            }
        }
        Swish => x * logistic(v[0] * x),
        ESwish => v[0] * x * logistic(x),
        HardSwishPiecewise => {
            if x <= -3.0 {
                0.0
            } else if x >= 3.0 {
                x
            } else {
                x * (x + 3.0) / 6.0
            }
        }
        HardSwishBeta => 2.0 * x * (0.2 * v[0] * x + 0.5).clamp(0.0, 1.0),
        Softplus => softplus(x),
        Slu => {
            let (beta, alpha, gamma) = (v[0], v[1], v[2]);
            if x >= 0.0 {
                beta * x
            } else {
                alpha * softplus(x) - gamma
            }
        }
        Mish => x * softplus(x).tanh(),
        GeluErf => x * normal_cdf(x),
        GeluTanh => {
            let u = (2.0 / std::f64::consts::PI).sqrt() * (x + GELU_TANH_C * x * x * x);
            0.5 * x * (1.0 + u.tanh())
        }
        GeluSigmoid => x * logistic(GELU_SIGMOID_K * x),
        Sgelu => v[0] * x * erf(x / SQRT_2),
        Identity => x,
    }
}

/// The tanh/logistic identity `tanh(x) = 2 sigma(2x) - 1`.
pub fn tanh_via_logistic(x: f64) -> f64 {
    2.0 * logistic(2.0 * x) - 1.0
}

/// Logistic with steepness `k`, used to illustrate the step-function limit.
pub fn steep_logistic(x: f64, k: f64) -> f64 {
    logistic(k * x)
}

/// Binary decode of a probability: 1 iff `p > 0.5`.
pub fn threshold(p: f64) -> u8 {
    u8::from(p > 0.5)
}
