use rand::Rng;

use super::config::{Aggregation, GatConfig};
use crate::autodiff::{Init, Linear, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// One attention head: `score(i, j) = LeakyReLU(v_i . a_center + v_j . a_neighbor + b)`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionHead {
    pub center: ParamId,
    pub neighbor: ParamId,
    pub bias: ParamId,
}

/// Graph attention over raw neighbor embeddings, shared by all nodes of one graph.
#[derive(Debug, Clone)]
pub struct GatLayer {
    pub heads: Vec<AttentionHead>,
    pub config: GatConfig,
    pub width: usize,
}

impl GatLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        config: GatConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate(width)?;
        let head_width = match config.aggregation {
            Aggregation::Concat => width / config.heads,
            Aggregation::Average => width,
        };
        // the score is a linear map of the 2*head_width concatenation
        let bound = 1.0 / ((2 * head_width) as f64).sqrt();
        let mut heads = Vec::with_capacity(config.heads);
        for h in 0..config.heads {
            heads.push(AttentionHead {
                center: store.init(&format!("{name}.head{h}.center"), head_width, 1, Init::Uniform(bound), rng)?,
                neighbor: store.init(&format!("{name}.head{h}.neighbor"), head_width, 1, Init::Uniform(bound), rng)?,
                bias: store.init(&format!("{name}.head{h}.bias"), 1, 1, Init::Uniform(bound), rng)?,
            });
        }
        Ok(GatLayer { heads, config, width })
    }

    fn head_width(&self) -> usize {
        match self.config.aggregation {
            Aggregation::Concat => self.width / self.config.heads,
            Aggregation::Average => self.width,
        }
    }

    fn check(&self, tape: &Tape, centers: Var, neighbors: Var) -> Result<usize> {
        let (n, w) = tape.shape(centers);
        let (nk, wn) = tape.shape(neighbors);
        if w != self.width || wn != self.width {
            return Err(Error::Shape {
                op: "gat width",
                left: (n, w),
                right: (self.width, wn),
            });
        }
        if nk != n * self.config.k {
            return Err(Error::Shape {
                op: "gat neighbors",
                left: (n, self.config.k),
                right: (nk, wn),
            });
        }
        Ok(n)
    }

    /// Attention weights (`N x K`) of head `h`.
    pub fn head_weights(&self, tape: &mut Tape, h: usize, centers: Var, neighbors: Var) -> Result<Var> {
        let n = self.check(tape, centers, neighbors)?;
        let (c, v) = self.head_inputs(tape, h, centers, neighbors)?;
        self.weights(tape, h, n, c, v)
    }

    fn head_inputs(&self, tape: &mut Tape, h: usize, centers: Var, neighbors: Var) -> Result<(Var, Var)> {
        match self.config.aggregation {
            Aggregation::Average => Ok((centers, neighbors)),
            Aggregation::Concat => {
                let hw = self.head_width();
                Ok((
                    tape.slice_cols(centers, h * hw, hw)?,
                    tape.slice_cols(neighbors, h * hw, hw)?,
                ))
            }
        }
    }

    fn weights(&self, tape: &mut Tape, h: usize, n: usize, c: Var, v: Var) -> Result<Var> {
        let head = self.heads[h];
        let a_c = tape.param(head.center);
        let a_n = tape.param(head.neighbor);
        let b = tape.param(head.bias);
        let sc = tape.matmul(c, a_c)?;
        let sn = tape.matmul(v, a_n)?;
        let sn = tape.reshape(sn, n, self.config.k)?;
        let s = tape.add(sn, sc)?;
        let s = tape.add(s, b)?;
        let s = tape.leaky_relu(s, self.config.leaky_slope);
        tape.softmax(s, 1)
    }

    /// Adjusted embeddings for `N` centers (`N x width`) given their `K`
    /// sampled neighbors stacked as `(N*K) x width`.
    pub fn forward(&self, tape: &mut Tape, centers: Var, neighbors: Var) -> Result<Var> {
        let n = self.check(tape, centers, neighbors)?;
        let slope = self.config.leaky_slope;
        let mut outs = Vec::with_capacity(self.heads.len());
        for h in 0..self.heads.len() {
            let (c, v) = self.head_inputs(tape, h, centers, neighbors)?;
            let w = self.weights(tape, h, n, c, v)?;
            outs.push(tape.attend(w, v)?);
        }
        match self.config.aggregation {
            Aggregation::Average => {
                let mut sum = outs[0];
                for &o in &outs[1..] {
                    sum = tape.add(sum, o)?;
                }
                let mean = tape.affine(sum, 1.0 / outs.len() as f64, 0.0);
                Ok(tape.leaky_relu(mean, slope))
            }
            Aggregation::Concat => {
                let cat = tape.concat_cols(&outs)?;
                Ok(tape.leaky_relu(cat, slope))
            }
        }
    }
}

/// Single-head attention over element-wise query/neighbor products.
#[derive(Debug, Clone, Copy)]
pub struct NeighborInteraction {
    pub score: Linear,
    pub width: usize,
    pub slope: f64,
}

impl NeighborInteraction {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, slope: f64, rng: &mut impl Rng) -> Result<Self> {
        Ok(NeighborInteraction {
            score: Linear::new(store, name, width, 1, rng)?,
            width,
            slope,
        })
    }

    /// `query` is `N x width`; `neighbors` stacks `K` adjusted document
    /// embeddings per row as `(N*K) x width`. Returns `(h, gamma)`.
    pub fn forward(&self, tape: &mut Tape, query: Var, neighbors: Var, k: usize) -> Result<(Var, Var)> {
        let (n, wq) = tape.shape(query);
        let (nk, wd) = tape.shape(neighbors);
        if wq != self.width || wd != self.width || nk != n * k {
            return Err(Error::Shape {
                op: "neighbor interaction",
                left: (n, wq),
                right: (nk, wd),
            });
        }
        let repeat: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, k)).collect();
        let q = tape.gather(query, &repeat)?;
        let x = tape.mul(q, neighbors)?;
        let s = self.score.forward(tape, x)?;
        let s = tape.reshape(s, n, k)?;
        let s = tape.leaky_relu(s, self.slope);
        let gamma = tape.softmax(s, 1)?;
        Ok((tape.attend(gamma, x)?, gamma))
    }
}
