//! One type for "any activation": a catalog kind with parameters or a
//! composite. The network, the CLI and the gradient checker work on this.

use serde::{Deserialize, Serialize};

use crate::catalog::{default_params, kinks_raw, validate, value, Kind, ParamSet};
use crate::composite::{Composite, COMPOSITE_NAMES};
use crate::error::{Error, Result};
use crate::gradients::{blend_at_kink, raw_grad};
use crate::stochastic::{self, EvalContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Catalog { kind: Kind, params: ParamSet },
    Composite(Composite),
}

impl From<Kind> for Activation {
    fn from(kind: Kind) -> Self {
        Activation::Catalog { kind, params: default_params(kind) }
    }
}

impl Activation {
    /// Catalog kind (aliases included) or composite name, with defaults.
    pub fn from_name(name: &str) -> Result<Activation> {
        match Kind::from_name(name) {
            Ok(k) => Ok(k.into()),
            Err(_) => Composite::from_name(name).map(Activation::Composite),
        }
    }

    pub fn with_params(kind: Kind, params: ParamSet) -> Result<Activation> {
        validate(kind, &params)?;
        Ok(Activation::Catalog { kind, params })
    }

    /// Every name [`Activation::from_name`] accepts, aliases excluded.
    pub fn all_names() -> Vec<String> {
        Kind::ALL
            .iter()
            .map(|k| k.name().to_string())
            .chain(COMPOSITE_NAMES.iter().map(|s| s.to_string()))
            .collect()
    }

    pub fn name(&self) -> String {
        match self {
            Activation::Catalog { kind, .. } => kind.name().to_string(),
            Activation::Composite(c) => c.name(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Activation::Catalog { kind, params } => validate(*kind, params),
            Activation::Composite(c) => c.validate(),
        }
    }

    pub fn kind(&self) -> Option<Kind> {
        match self {
            Activation::Catalog { kind, .. } => Some(*kind),
            Activation::Composite(_) => None,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.coefficient_slot().is_some()
    }

    /// Slot of the random coefficient in [`Activation::param_values`].
    pub fn coefficient_slot(&self) -> Option<usize> {
        self.kind().and_then(stochastic::coefficient_index)
    }

    /// Train-mode draw of the random coefficient, honouring the context's
    /// sampling scope. `None` for deterministic activations.
    pub fn draw_coefficient(&self, ctx: &mut EvalContext) -> Option<f64> {
        match self {
            Activation::Catalog { kind, params } if kind.is_stochastic() => {
                Some(stochastic::coefficient_for(*kind, params.values(), ctx))
            }
            _ => None,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            Activation::Catalog { params, .. } => params.names().to_vec(),
            Activation::Composite(c) => c.param_names(),
        }
    }

    pub fn param_values(&self) -> Vec<f64> {
        match self {
            Activation::Catalog { params, .. } => params.values().to_vec(),
            Activation::Composite(c) => c.param_values(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Activation::Catalog { params, .. } => params.len(),
            Activation::Composite(c) => c.param_values().len(),
        }
    }

    /// Learnable slots. The stochastic coefficient is never learnable.
    pub fn learnable_mask(&self) -> Vec<bool> {
        match self {
            Activation::Catalog { kind, params } => {
                let slot = stochastic::coefficient_index(*kind);
                (0..params.len())
                    .map(|i| params.is_learnable(i) && Some(i) != slot)
                    .collect()
            }
            Activation::Composite(c) => c.learnable_mask(),
        }
    }

    pub fn n_learnable(&self) -> usize {
        self.learnable_mask().iter().filter(|&&m| m).count()
    }

    /// Overwrite every parameter slot without validation.
    pub fn set_param_values(&mut self, v: &[f64]) {
        match self {
            Activation::Catalog { params, .. } => params.values_mut().copy_from_slice(v),
            Activation::Composite(c) => c.set_param_values(v),
        }
    }

    /// Set one parameter by name and revalidate; on failure nothing changes.
    pub fn set_param(&mut self, name: &str, v: f64) -> Result<()> {
        let i = self
            .param_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::param(self.name(), format!("no parameter named `{name}`")))?;
        let mut next = self.clone();
        let mut vals = next.param_values();
        vals[i] = v;
        next.set_param_values(&vals);
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Pull composite coefficients back onto their constraint set (hull
    /// coefficients sum to one, convex ones are non-negative, the mixing
    /// weight stays in [0, 1]).
    pub fn renormalize(&mut self) {
        if let Activation::Composite(c) = self {
            match c {
                Composite::Hull { hull, coeffs, .. } => {
                    if *hull == crate::composite::HullKind::Convex {
                        coeffs.iter_mut().for_each(|c| *c = c.abs());
                    }
                    let s: f64 = coeffs.iter().sum();
                    if s != 0.0 {
                        coeffs.iter_mut().for_each(|c| *c /= s);
                    }
                }
                Composite::Mixed { rho } => *rho = rho.clamp(0.0, 1.0),
                _ => {}
            }
        }
    }

    /// Forward value; stochastic kinds use their expected coefficient.
    pub fn value(&self, x: f64) -> f64 {
        self.value_with(x, None)
    }

    /// Forward value with an explicit stochastic coefficient (`None` means
    /// the expectation).
    pub fn value_with(&self, x: f64, coef: Option<f64>) -> f64 {
        match self {
            Activation::Catalog { kind, params } => {
                with_coefficient(*kind, params.values(), coef, |v| value(*kind, v, x))
            }
            Activation::Composite(c) => c.eval(x),
        }
    }

    /// Value and d/dx; `dp` (length [`Activation::n_params`]) receives the
    /// parameter partials. `conv` is the subgradient weight used at kinks.
    pub fn grad(&self, x: f64, coef: Option<f64>, conv: f64, dp: &mut [f64]) -> (f64, f64) {
        match self {
            Activation::Catalog { kind, params } => with_coefficient(*kind, params.values(), coef, |v| {
                let kinks = kinks_raw(*kind, v);
                blend_at_kink(x, &kinks, conv, dp, |t, d| raw_grad(*kind, v, t, d))
            }),
            Activation::Composite(c) => {
                let kinks = c.kinks();
                blend_at_kink(x, &kinks, conv, dp, |t, d| c.grad(t, d))
            }
        }
    }

    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Activation::Catalog { kind, params } => {
                with_coefficient(*kind, params.values(), None, |v| kinks_raw(*kind, v))
            }
            Activation::Composite(c) => c.kinks(),
        }
    }
}

/// Run `f` on the parameter vector with the stochastic slot replaced by
/// `coef` or, when `None`, by its expectation.
fn with_coefficient<R>(kind: Kind, v: &[f64], coef: Option<f64>, f: impl FnOnce(&[f64]) -> R) -> R {
    match stochastic::coefficient_index(kind) {
        None => f(v),
        Some(i) => {
            let mut buf = [0.0; 8];
            let buf = &mut buf[..v.len()];
            buf.copy_from_slice(v);
            buf[i] = coef.unwrap_or_else(|| stochastic::expected_coefficient(kind, v));
            f(buf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        for n in Activation::all_names() {
            let a = Activation::from_name(&n).unwrap();
            assert_eq!(a.name(), n);
            a.validate().unwrap();
        }
        assert!(Activation::from_name("nope").is_err());
        assert_eq!(Activation::from_name("gelu").unwrap().name(), "gelu_erf");
    }

    #[test]
    fn stochastic_eval_uses_expectation() {
        let a = Activation::from(Kind::Rrelu);
        let p = default_params(Kind::Rrelu);
        let mean = (p.values()[0] + p.values()[1]) / 2.0;
        assert!((a.value(-2.0) - mean * -2.0).abs() < 1e-15);
        assert_eq!(a.value_with(-2.0, Some(0.2)), -0.4);
        assert!(!a.learnable_mask().iter().any(|&m| m));
    }

    #[test]
    fn set_param_validates() {
        let mut a = Activation::from(Kind::Elu);
        assert!(a.set_param("alpha", -1.0).is_err());
        assert_eq!(a.param_values(), vec![1.0]);
        a.set_param("alpha", 0.5).unwrap();
        assert_eq!(a.param_values(), vec![0.5]);
        assert!(a.set_param("zeta", 1.0).is_err());
    }
}
