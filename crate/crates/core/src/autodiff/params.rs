use std::collections::HashMap;

use ndarray::{Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = rows.
    FanIn,
    Uniform(f64),
    Normal(f64),
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    m: Matrix,
    v: Matrix,
}

/// Named trainable matrices plus their Adam moments.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Matrix) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::invalid(format!("duplicate parameter name {name:?}")));
        }
        let id = ParamId(self.params.len());
        let dim = value.raw_dim();
        self.params.push(Param {
            name: name.to_owned(),
            m: Matrix::zeros(dim),
            v: Matrix::zeros(dim),
            value,
        });
        self.by_name.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn init(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        let value = match init {
            Init::Zeros => Matrix::zeros((rows, cols)),
            Init::Constant(c) => Matrix::from_elem((rows, cols), c),
            Init::FanIn => {
                let bound = 1.0 / (rows.max(1) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound)
                    .map_err(|e| Error::invalid(e.to_string()))?;
                Matrix::from_shape_simple_fn((rows, cols), || dist.sample(rng))
            }
            Init::Uniform(bound) => {
                let dist = Uniform::new_inclusive(-bound, bound)
                    .map_err(|e| Error::invalid(e.to_string()))?;
                Matrix::from_shape_simple_fn((rows, cols), || dist.sample(rng))
            }
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
                Matrix::from_shape_simple_fn((rows, cols), || dist.sample(rng))
            }
        };
        self.insert(name, value)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix)> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| (ParamId(i), p.name.as_str(), &p.value))
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Sum of squared values of every parameter.
    pub fn squared_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.value.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// Copies values (not optimizer state) from a store with the same layout.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<()> {
        for (p, q) in self.params.iter_mut().zip(&other.params) {
            if p.name != q.name || p.value.dim() != q.value.dim() {
                return Err(Error::invalid(format!(
                    "parameter layout mismatch at {:?}",
                    p.name
                )));
            }
            p.value.assign(&q.value);
        }
        if self.params.len() != other.params.len() {
            return Err(Error::invalid("parameter count mismatch"));
        }
        Ok(())
    }
}

/// Per-parameter gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn max_abs(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient; adds `2 * weight_decay * theta` to each gradient.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// One Adam update over every parameter. Parameters without a gradient are
/// treated as having zero data gradient (the L2 term still applies).
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    if !(cfg.lr > 0.0) {
        return Err(Error::invalid(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    store.step += 1;
    let t = store.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let decay = 2.0 * cfg.weight_decay;
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.lr, cfg.eps);
    for (i, p) in store.params.iter_mut().enumerate() {
        let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            let g = g + decay * *w;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        match grads.grads.get(i).and_then(Option::as_ref) {
            Some(g) => Zip::from(&mut p.value)
                .and(&mut p.m)
                .and(&mut p.v)
                .and(g)
                .for_each(|w, m, v, &g| update(w, m, v, g)),
            None => Zip::from(&mut p.value)
                .and(&mut p.m)
                .and(&mut p.v)
                .for_each(|w, m, v| update(w, m, v, 0.0)),
        }
    }
    Ok(())
}
