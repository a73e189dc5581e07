use rand::Rng;

use super::params::{Init, Matrix, ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Dense layer `x W + b` with fan-in uniform initialization.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Ok(Linear {
            weight: store.init(&format!("{name}.weight"), input, output, Init::FanIn, rng)?,
            bias: store.init(&format!("{name}.bias"), 1, output, Init::Uniform(bound), rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add(xw, b)
    }

    pub fn output_width(&self, store: &ParamStore) -> usize {
        store.get(self.weight).ncols()
    }
}

/// Standard GRU (reset, update, candidate with tanh). Gate columns are laid
/// out as `[reset | update | candidate]`.
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub hidden: usize,
}

/// GRU parameters recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b_ih: Var,
    pub b_hh: Var,
    pub hidden: usize,
}

impl Gru {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        let u = Init::Uniform(bound);
        Ok(Gru {
            w_ih: store.init(&format!("{name}.w_ih"), input, 3 * hidden, u, rng)?,
            w_hh: store.init(&format!("{name}.w_hh"), hidden, 3 * hidden, u, rng)?,
            b_ih: store.init(&format!("{name}.b_ih"), 1, 3 * hidden, u, rng)?,
            b_hh: store.init(&format!("{name}.b_hh"), 1, 3 * hidden, u, rng)?,
            hidden,
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> GruVars {
        GruVars {
            w_ih: tape.param(self.w_ih),
            w_hh: tape.param(self.w_hh),
            b_ih: tape.param(self.b_ih),
            b_hh: tape.param(self.b_hh),
            hidden: self.hidden,
        }
    }
}

/// One GRU step from already-projected inputs `gi = x W_ih + b_ih`.
fn gru_step(tape: &mut Tape, gi: Var, h: Var, p: &GruVars) -> Result<Var> {
    let hs = p.hidden;
    let hw = tape.matmul(h, p.w_hh)?;
    let gh = tape.add(hw, p.b_hh)?;

    let gi_rz = tape.slice_cols(gi, 0, 2 * hs)?;
    let gh_rz = tape.slice_cols(gh, 0, 2 * hs)?;
    let rz_pre = tape.add(gi_rz, gh_rz)?;
    let rz = tape.sigmoid(rz_pre);
    let r = tape.slice_cols(rz, 0, hs)?;
    let z = tape.slice_cols(rz, hs, hs)?;

    let gi_n = tape.slice_cols(gi, 2 * hs, hs)?;
    let gh_n = tape.slice_cols(gh, 2 * hs, hs)?;
    let gated = tape.mul(r, gh_n)?;
    let n_pre = tape.add(gi_n, gated)?;
    let n = tape.tanh(n_pre);

    // h' = (1 - z) * n + z * h = n + z * (h - n)
    let neg_n = tape.affine(n, -1.0, 0.0);
    let diff = tape.add(h, neg_n)?;
    let zd = tape.mul(z, diff)?;
    tape.add(n, zd)
}

/// Single GRU cell: `h' = GRU(x, h_prev)`.
pub fn gru_cell(tape: &mut Tape, x: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    let xw = tape.matmul(x, p.w_ih)?;
    let gi = tape.add(xw, p.b_ih)?;
    gru_step(tape, gi, h_prev, p)
}

/// Runs a GRU over a time-major batch: row `t * batch + b` of `inputs` is
/// step `t` of sequence `b`. Returns hidden states in the same layout.
///
/// `keep[t][b] == 0.0` resets sequence `b`'s state before step `t`.
pub fn gru_sequence(
    tape: &mut Tape,
    p: &GruVars,
    inputs: Var,
    batch: usize,
    keep: Option<&[Vec<f64>]>,
) -> Result<Var> {
    let rows = tape.shape(inputs).0;
    let steps = rows / batch.max(1);
    let xw = tape.matmul(inputs, p.w_ih)?;
    let gi_all = tape.add(xw, p.b_ih)?;
    let mut h = tape.constant(Matrix::zeros((batch, p.hidden)));
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        if let Some(mask) = keep {
            if mask[t].iter().any(|&k| k != 1.0) {
                let m = tape.constant(
                    Matrix::from_shape_vec((batch, 1), mask[t].clone())
                        .map_err(|e| crate::error::Error::invalid(e.to_string()))?,
                );
                h = tape.mul(h, m)?;
            }
        }
        let gi = tape.slice_rows(gi_all, t * batch, batch)?;
        h = gru_step(tape, gi, h, p)?;
        states.push(h);
    }
    tape.concat_rows(&states)
}
