//! The value-and-gradient oracle contract shared by every attribution
//! algorithm, and the set function it induces on 0/1 masks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::{check_mask, FeatureMask};
use crate::selection::indicator;

/// A continuous extension `g: [0, 1]^n -> R`, larger is better.
///
/// Implementations are pure: the same mask always yields the same value and
/// gradient, so oracles can be evaluated from several threads at once.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// `(g(s), grad g(s))`. Implementations validate `s` with
    /// [`check_mask`].
    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(self.value_and_gradient(s)?.0)
    }

    /// Oracle call number `eval` of an algorithm run. Minibatched objectives
    /// use the index to choose which data the gradient is averaged over; the
    /// default ignores it.
    fn evaluate_at(&self, s: &[f64], eval: usize) -> Result<(f64, Vec<f64>)> {
        let _ = eval;
        self.value_and_gradient(s)
    }

    fn description(&self) -> String;

    fn evaluate(&self, mask: &FeatureMask) -> Result<(f64, Vec<f64>)> {
        self.value_and_gradient(mask.as_slice())
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).value_and_gradient(s)
    }
    fn value(&self, s: &[f64]) -> Result<f64> {
        (**self).value(s)
    }
    fn evaluate_at(&self, s: &[f64], eval: usize) -> Result<(f64, Vec<f64>)> {
        (**self).evaluate_at(s, eval)
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

impl<O: Objective + ?Sized> Objective for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).value_and_gradient(s)
    }
    fn value(&self, s: &[f64]) -> Result<f64> {
        (**self).value(s)
    }
    fn evaluate_at(&self, s: &[f64], eval: usize) -> Result<(f64, Vec<f64>)> {
        (**self).evaluate_at(s, eval)
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

impl<O: Objective + ?Sized> Objective for Arc<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).value_and_gradient(s)
    }
    fn value(&self, s: &[f64]) -> Result<f64> {
        (**self).value(s)
    }
    fn evaluate_at(&self, s: &[f64], eval: usize) -> Result<(f64, Vec<f64>)> {
        (**self).evaluate_at(s, eval)
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

/// Boxed trait object used where objectives of different kinds are mixed.
pub type DynObjective = Box<dyn Objective>;

type ValueGrad = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync;

/// An objective given by a closure returning value and gradient.
pub struct FnObjective {
    n: usize,
    f: Box<ValueGrad>,
    description: String,
}

impl FnObjective {
    pub fn new(
        n: usize,
        description: impl Into<String>,
        f: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Box::new(f),
            description: description.into(),
        }
    }

    /// `g(s) = <w, s>`.
    pub fn linear(weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self::new(n, format!("linear {weights:?}"), move |s| {
            let v = s.iter().zip(&weights).map(|(a, b)| a * b).sum();
            (v, weights.clone())
        })
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.n
    }

    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_mask(s, self.n)?;
        let (v, g) = (self.f)(s);
        if g.len() != self.n {
            return Err(Error::dims("closure gradient", self.n, g.len()));
        }
        Ok((v, g))
    }

    fn description(&self) -> String {
        self.description.clone()
    }
}

/// A set function `G: 2^[n] -> R`.
pub trait SetFunction: Send + Sync {
    fn ground_size(&self) -> usize;

    /// `G(S)`; `set` holds distinct indices below `ground_size()`.
    fn eval_set(&self, set: &[usize]) -> Result<f64>;
}

impl<F: SetFunction + ?Sized> SetFunction for &F {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn eval_set(&self, set: &[usize]) -> Result<f64> {
        (**self).eval_set(set)
    }
}

/// `G(S) := g(1_S)` for an objective `g`.
pub struct SetFunctionView<O> {
    objective: O,
}

impl<O: Objective> SetFunctionView<O> {
    pub fn new(objective: O) -> Self {
        Self { objective }
    }

    pub fn objective(&self) -> &O {
        &self.objective
    }
}

impl<O: Objective> SetFunction for SetFunctionView<O> {
    fn ground_size(&self) -> usize {
        self.objective.dim()
    }

    fn eval_set(&self, set: &[usize]) -> Result<f64> {
        let mask = indicator(set, self.objective.dim())?;
        self.objective.value(&mask)
    }
}

/// `G(S)` evaluated through a view.
pub fn eval_set<F: SetFunction + ?Sized>(view: &F, set: &[usize]) -> Result<f64> {
    view.eval_set(set)
}
