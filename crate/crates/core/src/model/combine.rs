use rand::Rng;

use super::config::CombinationKind;
use crate::autodiff::{Linear, Matrix, ParamId, ParamStore, Tape, Var, PROB_EPS};
use crate::error::Result;

/// Maps examination and attractiveness to a click probability.
#[derive(Debug, Clone, Copy)]
pub enum Combination {
    /// `E * A`
    Mul,
    /// `E^alpha * A^beta`
    ExpMul { alpha: ParamId, beta: ParamId },
    /// `alpha * E + beta * A`
    Linear { alpha: ParamId, beta: ParamId },
    /// Two-layer perceptron over `[E, A]`.
    Nonlinear { hidden: Linear, output: Linear },
}

impl Combination {
    pub fn new(
        store: &mut ParamStore,
        kind: CombinationKind,
        nonlinear_hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let scalar = |store: &mut ParamStore, name: &str, v: f64| {
            store.insert(name, Matrix::from_elem((1, 1), v))
        };
        Ok(match kind {
            CombinationKind::Mul => Combination::Mul,
            CombinationKind::ExpMul => Combination::ExpMul {
                alpha: scalar(store, "combine.alpha", 1.0)?,
                beta: scalar(store, "combine.beta", 1.0)?,
            },
            CombinationKind::Linear => Combination::Linear {
                alpha: scalar(store, "combine.alpha", 0.5)?,
                beta: scalar(store, "combine.beta", 0.5)?,
            },
            CombinationKind::Nonlinear => Combination::Nonlinear {
                hidden: Linear::new(store, "combine.hidden", 2, nonlinear_hidden, rng)?,
                output: Linear::new(store, "combine.output", nonlinear_hidden, 1, rng)?,
            },
        })
    }

    pub fn kind(&self) -> CombinationKind {
        match self {
            Combination::Mul => CombinationKind::Mul,
            Combination::ExpMul { .. } => CombinationKind::ExpMul,
            Combination::Linear { .. } => CombinationKind::Linear,
            Combination::Nonlinear { .. } => CombinationKind::Nonlinear,
        }
    }

    /// Learned `(alpha, beta)` for the kinds that have them.
    pub fn coefficients(&self, store: &ParamStore) -> Option<(f64, f64)> {
        match *self {
            Combination::ExpMul { alpha, beta } | Combination::Linear { alpha, beta } => {
                Some((store.get(alpha)[[0, 0]], store.get(beta)[[0, 0]]))
            }
            _ => None,
        }
    }

    /// `e` and `a` are `N x 1` columns in `[eps, 1 - eps]`.
    pub fn forward(&self, tape: &mut Tape, e: Var, a: Var, slope: f64) -> Result<Var> {
        let p = match *self {
            Combination::Mul => tape.mul(e, a)?,
            Combination::ExpMul { alpha, beta } => {
                let al = tape.param(alpha);
                let be = tape.param(beta);
                let ea = tape.pow(e, al)?;
                let ab = tape.pow(a, be)?;
                tape.mul(ea, ab)?
            }
            Combination::Linear { alpha, beta } => {
                let al = tape.param(alpha);
                let be = tape.param(beta);
                let x = tape.mul(e, al)?;
                let y = tape.mul(a, be)?;
                tape.add(x, y)?
            }
            Combination::Nonlinear { hidden, output } => {
                let x = tape.concat_cols(&[e, a])?;
                let h = hidden.forward(tape, x)?;
                let h = tape.leaky_relu(h, slope);
                let o = output.forward(tape, h)?;
                tape.sigmoid(o)
            }
        };
        Ok(tape.clamp(p, PROB_EPS, 1.0 - PROB_EPS))
    }
}
