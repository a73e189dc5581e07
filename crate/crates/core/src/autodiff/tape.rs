use ndarray::{concatenate, s, Axis, Zip};
use rand::Rng;

use super::params::{Gradients, Matrix, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Probability clamp used by [`Tape::bce`] and the click model outputs.
pub const PROB_EPS: f64 = 1e-7;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Embedding { table: ParamId, ids: Vec<usize> },
    Gather { src: Var, rows: Vec<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: f64 },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows { x: Var, start: usize },
    SliceCols { x: Var, start: usize },
    Reshape(Var),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu { x: Var, slope: f64 },
    Exp(Var),
    Ln(Var),
    Pow { x: Var, exponent: Var },
    Softmax { x: Var, axis: usize },
    Attend { weights: Var, values: Var },
    Dropout { x: Var, mask: Matrix },
    Mean(Var),
    SumSquares(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Bce { p: Var, targets: Vec<f64>, weights: Vec<f64>, denom: f64 },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Records a computation over 2-D matrices for reverse-mode
/// differentiation. One tape per forward pass.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

fn dims(m: &Matrix) -> (usize, usize) {
    m.dim()
}

/// How the right operand of a binary op broadcasts onto the left.
#[derive(Clone, Copy)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

fn broadcast(op: &'static str, l: (usize, usize), r: (usize, usize)) -> Result<Broadcast> {
    match r {
        _ if r == l => Ok(Broadcast::Same),
        (1, c) if c == l.1 => Ok(Broadcast::Row),
        (rr, 1) if rr == l.0 => Ok(Broadcast::Col),
        (1, 1) => Ok(Broadcast::Scalar),
        _ => Err(Error::Shape {
            op,
            left: l,
            right: r,
        }),
    }
}

/// Sums `g` down to the shape of a broadcast operand.
fn reduce_to(g: &Matrix, b: Broadcast) -> Matrix {
    match b {
        Broadcast::Same => g.clone(),
        Broadcast::Row => g.sum_axis(Axis(0)).insert_axis(Axis(0)),
        Broadcast::Col => g.sum_axis(Axis(1)).insert_axis(Axis(1)),
        Broadcast::Scalar => Matrix::from_elem((1, 1), g.sum()),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        dims(&self.nodes[v.0].value)
    }

    /// The single entry of a 1x1 value.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(self.store.get(id).clone(), Op::Param(id), true)
    }

    /// Rows `ids` of an embedding table. The backward pass scatters into
    /// the table without recording the whole table on the tape.
    pub fn embedding(&mut self, table: ParamId, ids: &[usize]) -> Result<Var> {
        let t = self.store.get(table);
        let cols = t.ncols();
        let mut out = Matrix::zeros((ids.len(), cols));
        for (r, &id) in ids.iter().enumerate() {
            if id >= t.nrows() {
                return Err(Error::invalid(format!(
                    "embedding id {id} out of range for table {:?} with {} rows",
                    self.store.name(table),
                    t.nrows()
                )));
            }
            out.row_mut(r).assign(&t.row(id));
        }
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            true,
        ))
    }

    /// Selects (and possibly repeats) rows of `src`.
    pub fn gather(&mut self, src: Var, rows: &[usize]) -> Result<Var> {
        let v = &self.nodes[src.0].value;
        if let Some(&bad) = rows.iter().find(|&&r| r >= v.nrows()) {
            return Err(Error::invalid(format!(
                "gather row {bad} out of range for {:?}",
                dims(v)
            )));
        }
        let out = v.select(Axis(0), rows);
        let ng = self.ng(src);
        Ok(self.push(
            out,
            Op::Gather {
                src,
                rows: rows.to_vec(),
            },
            ng,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.ncols() != bv.nrows() {
            return Err(Error::Shape {
                op: "matmul",
                left: dims(av),
                right: dims(bv),
            });
        }
        let out = av.dot(bv);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    /// `a + b`, with `b` broadcast over rows, columns, or both.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        broadcast("add", dims(av), dims(bv))?;
        let out = av + bv;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    /// Elementwise `a * b`, with the same broadcasting as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        broadcast("mul", dims(av), dims(bv))?;
        let out = av * bv;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out = self.nodes[x.0].value.mapv(|v| scale * v + shift);
        let ng = self.ng(x);
        self.push(out, Op::Affine { x, scale }, ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(1))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(0))
    }

    fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero parts"));
        }
        let views: Vec<_> = parts.iter().map(|p| self.nodes[p.0].value.view()).collect();
        let out = concatenate(axis, &views).map_err(|_| Error::Shape {
            op: "concat",
            left: dims(&self.nodes[parts[0].0].value),
            right: parts
                .iter()
                .map(|p| dims(&self.nodes[p.0].value))
                .find(|d| {
                    let first = dims(&self.nodes[parts[0].0].value);
                    if axis == Axis(1) {
                        d.0 != first.0
                    } else {
                        d.1 != first.1
                    }
                })
                .unwrap_or((0, 0)),
        })?;
        let ng = parts.iter().any(|&p| self.ng(p));
        let op = if axis == Axis(1) {
            Op::ConcatCols(parts.to_vec())
        } else {
            Op::ConcatRows(parts.to_vec())
        };
        Ok(self.push(out, op, ng))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        if start + len > v.nrows() {
            return Err(Error::Shape {
                op: "slice_rows",
                left: dims(v),
                right: (start, len),
            });
        }
        let out = v.slice(s![start..start + len, ..]).to_owned();
        let ng = self.ng(x);
        Ok(self.push(out, Op::SliceRows { x, start }, ng))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        if start + len > v.ncols() {
            return Err(Error::Shape {
                op: "slice_cols",
                left: dims(v),
                right: (start, len),
            });
        }
        let out = v.slice(s![.., start..start + len]).to_owned();
        let ng = self.ng(x);
        Ok(self.push(out, Op::SliceCols { x, start }, ng))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        if v.len() != rows * cols {
            return Err(Error::Shape {
                op: "reshape",
                left: dims(v),
                right: (rows, cols),
            });
        }
        let data: Vec<f64> = v.iter().copied().collect();
        let out = Matrix::from_shape_vec((rows, cols), data).expect("length checked");
        let ng = self.ng(x);
        Ok(self.push(out, Op::Reshape(x), ng))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.nodes[x.0].value.mapv(f);
        let ng = self.ng(x);
        self.push(out, op, ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(
            x,
            move |v| if v > 0.0 { v } else { slope * v },
            Op::LeakyRelu { x, slope },
        )
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, f64::ln, Op::Ln(x))
    }

    /// Elementwise `x ^ e` for positive `x` and a 1x1 exponent `e`.
    pub fn pow(&mut self, x: Var, exponent: Var) -> Result<Var> {
        let e = &self.nodes[exponent.0].value;
        if e.dim() != (1, 1) {
            return Err(Error::Shape {
                op: "pow",
                left: self.shape(x),
                right: dims(e),
            });
        }
        let e = e[[0, 0]];
        let out = self.nodes[x.0].value.mapv(|v| v.powf(e));
        let ng = self.ng(x) || self.ng(exponent);
        Ok(self.push(out, Op::Pow { x, exponent }, ng))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, move |v| v.clamp(lo, hi), Op::Clamp { x, lo, hi })
    }

    /// Softmax along `axis` (0: down each column, 1: across each row).
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        if axis > 1 {
            return Err(Error::invalid(format!("softmax axis {axis} on a matrix")));
        }
        let mut out = self.nodes[x.0].value.clone();
        for mut lane in out.lanes_mut(Axis(axis)) {
            let max = lane.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            lane.mapv_inplace(|v| (v - max).exp());
            let sum = lane.sum();
            lane.mapv_inplace(|v| v / sum);
        }
        let ng = self.ng(x);
        Ok(self.push(out, Op::Softmax { x, axis }, ng))
    }

    /// Weighted sum over groups of rows: `out[i] = sum_k w[i,k] * values[i*K + k]`
    /// for `weights` of shape N x K and `values` of shape (N*K) x D.
    pub fn attend(&mut self, weights: Var, values: Var) -> Result<Var> {
        let (w, v) = (&self.nodes[weights.0].value, &self.nodes[values.0].value);
        let (n, k) = dims(w);
        if v.nrows() != n * k {
            return Err(Error::Shape {
                op: "attend",
                left: dims(w),
                right: dims(v),
            });
        }
        let d = v.ncols();
        let mut out = Matrix::zeros((n, d));
        for i in 0..n {
            let mut row = out.row_mut(i);
            for j in 0..k {
                row.scaled_add(w[[i, j]], &v.row(i * k + j));
            }
        }
        let ng = self.ng(weights) || self.ng(values);
        Ok(self.push(out, Op::Attend { weights, values }, ng))
    }

    /// Inverted dropout: at train time zeroes entries with probability
    /// `rate` and scales survivors by `1 / (1 - rate)`; identity otherwise.
    pub fn dropout(&mut self, x: Var, rate: f64, train: bool, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = self.nodes[x.0]
            .value
            .mapv(|_| if rng.random::<f64>() < rate { 0.0 } else { keep });
        let out = &self.nodes[x.0].value * &mask;
        let ng = self.ng(x);
        Ok(self.push(out, Op::Dropout { x, mask }, ng))
    }

    /// Mean of all entries, as a 1x1 value.
    pub fn mean(&mut self, x: Var) -> Var {
        let v = &self.nodes[x.0].value;
        let out = Matrix::from_elem((1, 1), v.sum() / v.len().max(1) as f64);
        let ng = self.ng(x);
        self.push(out, Op::Mean(x), ng)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let v = &self.nodes[x.0].value;
        let out = Matrix::from_elem((1, 1), v.iter().map(|a| a * a).sum());
        let ng = self.ng(x);
        self.push(out, Op::SumSquares(x), ng)
    }

    /// Weighted mean binary cross-entropy of an N x 1 probability column.
    /// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]`; entries with
    /// zero weight (padding) do not contribute.
    pub fn bce(&mut self, p: Var, targets: &[f64], weights: &[f64]) -> Result<Var> {
        let pv = &self.nodes[p.0].value;
        if pv.ncols() != 1 || pv.nrows() != targets.len() || targets.len() != weights.len() {
            return Err(Error::Shape {
                op: "bce",
                left: dims(pv),
                right: (targets.len(), weights.len()),
            });
        }
        let denom: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let mut total = 0.0;
        for ((&pi, &y), &w) in pv.column(0).iter().zip(targets).zip(weights) {
            if w == 0.0 {
                continue;
            }
            let pc = pi.clamp(PROB_EPS, 1.0 - PROB_EPS);
            total -= w * (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
        }
        let out = Matrix::from_elem((1, 1), total / denom);
        let ng = self.ng(p);
        Ok(self.push(
            out,
            Op::Bce {
                p,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                denom,
            },
            ng,
        ))
    }

    /// Reverse pass from a 1x1 output; returns gradients for every
    /// parameter reachable from `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_shape = self.shape(output);
        if out_shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                left: out_shape,
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Matrix>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(Matrix::from_elem((1, 1), 1.0));
        let mut params: Vec<Option<Matrix>> = (0..self.store.len()).map(|_| None).collect();

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let mut acc = |v: Var, gv: Matrix| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &gv,
                    slot => *slot = Some(gv),
                }
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => add_param_grad(&mut params, self.store, *id, g),
                Op::Embedding { table, ids } => {
                    let slot = params[table.0]
                        .get_or_insert_with(|| Matrix::zeros(self.store.get(*table).raw_dim()));
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = slot.row_mut(id);
                        row += &g.row(r);
                    }
                }
                Op::Gather { src, rows } => {
                    let mut gs = Matrix::zeros(self.nodes[src.0].value.raw_dim());
                    for (r, &src_row) in rows.iter().enumerate() {
                        let mut row = gs.row_mut(src_row);
                        row += &g.row(r);
                    }
                    acc(*src, gs);
                }
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        acc(*a, g.dot(&self.nodes[b.0].value.t()));
                    }
                    if self.ng(*b) {
                        acc(*b, self.nodes[a.0].value.t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    let bc = broadcast("add", self.shape(*a), self.shape(*b))?;
                    if self.ng(*b) {
                        acc(*b, reduce_to(&g, bc));
                    }
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    let bc = broadcast("mul", self.shape(*a), self.shape(*b))?;
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    if self.ng(*b) {
                        acc(*b, reduce_to(&(&g * av), bc));
                    }
                    if self.ng(*a) {
                        acc(*a, &g * bv);
                    }
                }
                Op::Affine { x, scale } => acc(*x, g * *scale),
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.nodes[p.0].value.ncols();
                        if self.ng(p) {
                            acc(p, g.slice(s![.., start..start + w]).to_owned());
                        }
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.nodes[p.0].value.nrows();
                        if self.ng(p) {
                            acc(p, g.slice(s![start..start + h, ..]).to_owned());
                        }
                        start += h;
                    }
                }
                Op::SliceRows { x, start } => {
                    let mut gx = Matrix::zeros(self.nodes[x.0].value.raw_dim());
                    gx.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(*x, gx);
                }
                Op::SliceCols { x, start } => {
                    let mut gx = Matrix::zeros(self.nodes[x.0].value.raw_dim());
                    gx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(*x, gx);
                }
                Op::Reshape(x) => {
                    let data: Vec<f64> = g.iter().copied().collect();
                    let shape = self.nodes[x.0].value.raw_dim();
                    acc(*x, Matrix::from_shape_vec(shape, data).expect("same length"));
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    acc(*x, Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (1.0 - y)));
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    acc(*x, Zip::from(&g).and(y).map_collect(|&g, &y| g * (1.0 - y * y)));
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = &self.nodes[x.0].value;
                    let slope = *slope;
                    acc(
                        *x,
                        Zip::from(&g)
                            .and(xv)
                            .map_collect(|&g, &x| if x > 0.0 { g } else { slope * g }),
                    );
                }
                Op::Exp(x) => acc(*x, &g * &node.value),
                Op::Ln(x) => acc(*x, &g / &self.nodes[x.0].value),
                Op::Pow { x, exponent } => {
                    let xv = &self.nodes[x.0].value;
                    let e = self.nodes[exponent.0].value[[0, 0]];
                    if self.ng(*exponent) {
                        let ge = Zip::from(&g)
                            .and(&node.value)
                            .and(xv)
                            .fold(0.0, |acc, &g, &y, &x| acc + g * y * x.ln());
                        acc(*exponent, Matrix::from_elem((1, 1), ge));
                    }
                    if self.ng(*x) {
                        acc(*x, Zip::from(&g).and(xv).map_collect(|&g, &x| g * e * x.powf(e - 1.0)));
                    }
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = &self.nodes[x.0].value;
                    let (lo, hi) = (*lo, *hi);
                    acc(
                        *x,
                        Zip::from(&g)
                            .and(xv)
                            .map_collect(|&g, &x| if x < lo || x > hi { 0.0 } else { g }),
                    );
                }
                Op::Softmax { x, axis } => {
                    let y = &node.value;
                    let mut gx = &g * y;
                    let dot = gx.sum_axis(Axis(*axis)).insert_axis(Axis(*axis));
                    gx -= &(y * &dot);
                    acc(*x, gx);
                }
                Op::Attend { weights, values } => {
                    let w = &self.nodes[weights.0].value;
                    let v = &self.nodes[values.0].value;
                    let (n, k) = dims(w);
                    if self.ng(*weights) {
                        let mut gw = Matrix::zeros((n, k));
                        for i in 0..n {
                            let gi = g.row(i);
                            for j in 0..k {
                                gw[[i, j]] = gi.dot(&v.row(i * k + j));
                            }
                        }
                        acc(*weights, gw);
                    }
                    if self.ng(*values) {
                        let mut gv = Matrix::zeros(v.raw_dim());
                        for i in 0..n {
                            for j in 0..k {
                                gv.row_mut(i * k + j).scaled_add(w[[i, j]], &g.row(i));
                            }
                        }
                        acc(*values, gv);
                    }
                }
                Op::Dropout { x, mask } => acc(*x, &g * mask),
                Op::Mean(x) => {
                    let shape = self.nodes[x.0].value.raw_dim();
                    let n = self.nodes[x.0].value.len().max(1) as f64;
                    acc(*x, Matrix::from_elem(shape, g[[0, 0]] / n));
                }
                Op::SumSquares(x) => acc(*x, &self.nodes[x.0].value * (2.0 * g[[0, 0]])),
                Op::Bce {
                    p,
                    targets,
                    weights,
                    denom,
                } => {
                    let pv = &self.nodes[p.0].value;
                    let scale = g[[0, 0]] / denom;
                    let mut gp = Matrix::zeros(pv.raw_dim());
                    for (r, ((&pi, &y), &w)) in
                        pv.column(0).iter().zip(targets).zip(weights).enumerate()
                    {
                        if w == 0.0 || !(PROB_EPS..=1.0 - PROB_EPS).contains(&pi) {
                            continue;
                        }
                        gp[[r, 0]] = -scale * w * (y / pi - (1.0 - y) / (1.0 - pi));
                    }
                    acc(*p, gp);
                }
            }
        }
        Ok(Gradients { grads: params })
    }
}

fn add_param_grad(params: &mut [Option<Matrix>], store: &ParamStore, id: ParamId, g: Matrix) {
    debug_assert_eq!(g.raw_dim(), store.get(id).raw_dim());
    match &mut params[id.0] {
        Some(existing) => *existing += &g,
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let x = t.constant(array![[0.0, 0.0]]);
        let y = t.softmax(x, 1).unwrap();
        assert_eq!(t.value(y), &array![[0.5, 0.5]]);
    }

    #[test]
    fn scalar_activations() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let x = t.constant(array![[0.0, -1.0]]);
        let s = t.sigmoid(x);
        let l = t.leaky_relu(x, 0.01);
        assert_eq!(t.value(s)[[0, 0]], 0.5);
        assert_eq!(t.value(l)[[0, 1]], -0.01);
    }

    #[test]
    fn shape_error_names_both_shapes() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let a = t.constant(Matrix::zeros((2, 3)));
        let b = t.constant(Matrix::zeros((2, 3)));
        let err = t.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("(2, 3)") && err.contains("matmul"), "{err}");
        let c = t.constant(Matrix::zeros((3, 2)));
        assert!(t.add(a, c).is_err());
    }

    #[test]
    fn dropout_identity_cases() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let mut rng = rand::rng();
        let x = t.constant(array![[1.0, 2.0, 3.0]]);
        assert_eq!(t.dropout(x, 0.5, false, &mut rng).unwrap(), x);
        assert_eq!(t.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert!(t.dropout(x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let p = t.constant(Matrix::from_elem((4, 1), 0.5));
        let l = t.bce(p, &[1.0, 0.0, 1.0, 0.0], &[1.0; 4]).unwrap();
        assert!((t.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_padding_ignored() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let p = t.constant(array![[0.5], [1e-3]]);
        let l = t.bce(p, &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((t.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn embedding_grad_scatters_rows() {
        let mut store = ParamStore::new();
        let id = store.insert("emb", Matrix::zeros((4, 2))).unwrap();
        let mut t = Tape::new(&store);
        let e = t.embedding(id, &[1, 3, 1]).unwrap();
        let s = t.sum_squares(e);
        // d/dx x^2 at 0 is 0; use mean instead to get non-trivial grads
        let m = t.mean(e);
        let total = t.add(s, m).unwrap();
        let g = t.backward(total).unwrap();
        let ge = g.get(id).unwrap();
        assert_eq!(ge[[1, 0]], 2.0 / 6.0);
        assert_eq!(ge[[3, 1]], 1.0 / 6.0);
        assert_eq!(ge[[0, 0]], 0.0);
    }
}
