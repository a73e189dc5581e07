//! Finite-difference suite over every tape op and every model path.

use graphcm::autodiff::{gru_cell, gru_sequence, GruVars, Matrix, ParamId, ParamStore, Tape, Var};
use graphcm::model::*;
use graphcm::session_log::{Corpus, Session};
use graphcm::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_gradients, ingest_all, raw_session};

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub instances: usize,
    pub entries: usize,
    pub worst: f64,
    pub at: String,
}

fn random_matrix(rng: &mut impl Rng, shape: (usize, usize), lo: f64, hi: f64) -> Matrix {
    Matrix::from_shape_simple_fn(shape, || rng.random_range(lo..hi))
}

/// Input spec: shape and value range of one parameter.
type Input = ((usize, usize), (f64, f64));

type OpFn = fn(&mut Tape, &[Var], &[ParamId]) -> Result<Var>;

struct OpCase {
    name: &'static str,
    inputs: fn(&mut ChaCha8Rng) -> Vec<Input>,
    f: OpFn,
}

const ANY: (f64, f64) = (-1.5, 1.5);
const POS: (f64, f64) = (0.2, 2.0);
const PROB: (f64, f64) = (0.05, 0.95);

fn dim(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(1..=4)
}

fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "matmul",
            inputs: |r| {
                let (a, b, c) = (dim(r), dim(r), dim(r));
                vec![((a, b), ANY), ((b, c), ANY)]
            },
            f: |t, v, _| t.matmul(v[0], v[1]),
        },
        OpCase {
            name: "add",
            inputs: |r| {
                let s = (dim(r), dim(r));
                vec![(s, ANY), (s, ANY)]
            },
            f: |t, v, _| t.add(v[0], v[1]),
        },
        OpCase {
            name: "add_row_broadcast",
            inputs: |r| {
                let (a, b) = (dim(r), dim(r));
                vec![((a, b), ANY), ((1, b), ANY)]
            },
            f: |t, v, _| t.add(v[0], v[1]),
        },
        OpCase {
            name: "mul",
            inputs: |r| {
                let s = (dim(r), dim(r));
                vec![(s, ANY), (s, ANY)]
            },
            f: |t, v, _| t.mul(v[0], v[1]),
        },
        OpCase {
            name: "mul_col_broadcast",
            inputs: |r| {
                let (a, b) = (dim(r), dim(r));
                vec![((a, b), ANY), ((a, 1), ANY)]
            },
            f: |t, v, _| t.mul(v[0], v[1]),
        },
        OpCase {
            name: "mul_scalar_broadcast",
            inputs: |r| vec![((dim(r), dim(r)), ANY), ((1, 1), ANY)],
            f: |t, v, _| t.mul(v[0], v[1]),
        },
        OpCase {
            name: "affine",
            inputs: |r| vec![((dim(r), dim(r)), ANY)],
            f: |t, v, _| Ok(t.affine(v[0], -1.7, 0.3)),
        },
        OpCase {
            name: "concat_cols",
            inputs: |r| {
                let a = dim(r);
                vec![((a, dim(r)), ANY), ((a, dim(r)), ANY)]
            },
            f: |t, v, _| t.concat_cols(&[v[0], v[1]]),
        },
        OpCase {
            name: "concat_rows",
            inputs: |r| {
                let b = dim(r);
                vec![((dim(r), b), ANY), ((dim(r), b), ANY)]
            },
            f: |t, v, _| t.concat_rows(&[v[0], v[1]]),
        },
        OpCase {
            name: "slice_rows",
            inputs: |r| vec![((4, dim(r)), ANY)],
            f: |t, v, _| t.slice_rows(v[0], 1, 2),
        },
        OpCase {
            name: "slice_cols",
            inputs: |r| vec![((dim(r), 4), ANY)],
            f: |t, v, _| t.slice_cols(v[0], 1, 3),
        },
        OpCase {
            name: "reshape",
            inputs: |r| vec![((2, 2 * dim(r)), ANY)],
            f: |t, v, _| {
                let (r, c) = t.shape(v[0]);
                t.reshape(v[0], r * c / 2, 2)
            },
        },
        OpCase {
            name: "embedding",
            inputs: |r| vec![((3, dim(r)), ANY)],
            f: |t, _, p| t.embedding(p[0], &[2, 0, 2, 1]),
        },
        OpCase {
            name: "gather",
            inputs: |r| vec![((3, dim(r)), ANY)],
            f: |t, v, _| t.gather(v[0], &[2, 0, 2, 1]),
        },
        OpCase {
            name: "sigmoid",
            inputs: |r| vec![((dim(r), dim(r)), (-4.0, 4.0))],
            f: |t, v, _| Ok(t.sigmoid(v[0])),
        },
        OpCase {
            name: "tanh",
            inputs: |r| vec![((dim(r), dim(r)), (-2.0, 2.0))],
            f: |t, v, _| Ok(t.tanh(v[0])),
        },
        OpCase {
            name: "leaky_relu",
            inputs: |r| vec![((dim(r), dim(r)), ANY)],
            f: |t, v, _| Ok(t.leaky_relu(v[0], 0.2)),
        },
        OpCase {
            name: "exp",
            inputs: |r| vec![((dim(r), dim(r)), ANY)],
            f: |t, v, _| Ok(t.exp(v[0])),
        },
        OpCase {
            name: "ln",
            inputs: |r| vec![((dim(r), dim(r)), POS)],
            f: |t, v, _| Ok(t.ln(v[0])),
        },
        OpCase {
            name: "pow",
            inputs: |r| vec![((dim(r), dim(r)), POS), ((1, 1), (0.3, 2.0))],
            f: |t, v, _| t.pow(v[0], v[1]),
        },
        OpCase {
            name: "clamp",
            inputs: |r| vec![((dim(r), dim(r)), ANY)],
            f: |t, v, _| Ok(t.clamp(v[0], -0.8, 0.8)),
        },
        OpCase {
            name: "softmax_rows",
            inputs: |r| vec![((dim(r), dim(r) + 1), ANY)],
            f: |t, v, _| t.softmax(v[0], 1),
        },
        OpCase {
            name: "softmax_cols",
            inputs: |r| vec![((dim(r) + 1, dim(r)), ANY)],
            f: |t, v, _| t.softmax(v[0], 0),
        },
        OpCase {
            name: "attend",
            inputs: |r| {
                let (n, k, d) = (dim(r), dim(r), dim(r));
                vec![((n, k), ANY), ((n * k, d), ANY)]
            },
            f: |t, v, _| t.attend(v[0], v[1]),
        },
        OpCase {
            name: "dropout",
            inputs: |r| vec![((dim(r) + 1, dim(r) + 1), ANY)],
            f: |t, v, _| {
                let mut rng = ChaCha8Rng::seed_from_u64(5);
                t.dropout(v[0], 0.4, true, &mut rng)
            },
        },
        OpCase {
            name: "gru_cell",
            inputs: |r| {
                let (n, d, h) = (dim(r), dim(r), dim(r));
                vec![((n, d), ANY), ((n, h), ANY), ((d, 3 * h), ANY), ((h, 3 * h), ANY), ((1, 3 * h), ANY), ((1, 3 * h), ANY)]
            },
            f: |t, v, _| gru_cell(t, v[0], v[1], &gru_vars(t, v)),
        },
        OpCase {
            name: "gru_sequence",
            inputs: |r| {
                let (d, h) = (dim(r), dim(r));
                vec![((6, d), ANY), ((1, 1), ANY), ((d, 3 * h), ANY), ((h, 3 * h), ANY), ((1, 3 * h), ANY), ((1, 3 * h), ANY)]
            },
            f: |t, v, _| {
                let p = gru_vars(t, v);
                let keep = vec![vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]];
                gru_sequence(t, &p, v[0], 2, Some(&keep))
            },
        },
        OpCase {
            name: "mean",
            inputs: |r| vec![((dim(r), dim(r)), ANY)],
            f: |t, v, _| Ok(t.mean(v[0])),
        },
        OpCase {
            name: "sum_squares",
            inputs: |r| vec![((dim(r), dim(r)), ANY)],
            f: |t, v, _| Ok(t.sum_squares(v[0])),
        },
        OpCase {
            name: "bce",
            inputs: |r| vec![((dim(r) + 1, 1), PROB)],
            f: |t, v, _| {
                let n = t.shape(v[0]).0;
                let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
                let w: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { 1.0 + i as f64 }).collect();
                t.bce(v[0], &y, &w)
            },
        },
    ]
}

fn gru_vars(t: &Tape, v: &[Var]) -> GruVars {
    GruVars {
        w_ih: v[2],
        w_hh: v[3],
        b_ih: v[4],
        b_hh: v[5],
        hidden: t.shape(v[3]).0,
    }
}

/// `mean(out ⊙ R)` for a fixed random `R`, so every output entry matters.
fn project(tape: &mut Tape, out: Var, r: &Matrix) -> Result<Var> {
    let rv = tape.constant(r.clone());
    let m = tape.mul(out, rv)?;
    Ok(tape.mean(m))
}

fn run_op_case(case: &OpCase, seed: u64, per_param: usize) -> (f64, usize, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = (case.inputs)(&mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, (shape, (lo, hi)))| store.insert(&format!("x{i}"), random_matrix(&mut rng, shape, lo, hi)).unwrap())
        .collect();
    let r = {
        let mut tape = Tape::new(&store);
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(id)).collect();
        let out = (case.f)(&mut tape, &vars, &ids).unwrap();
        random_matrix(&mut rng, tape.shape(out), -1.0, 1.0)
    };
    let eval = |s: &ParamStore| -> (f64, graphcm::autodiff::Gradients) {
        let mut tape = Tape::new(s);
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(id)).collect();
        let out = (case.f)(&mut tape, &vars, &ids).unwrap();
        let loss = project(&mut tape, out, &r).unwrap();
        (tape.scalar(loss), tape.backward(loss).unwrap())
    };
    let grads = eval(&store).1;
    check_gradients(&mut store, &grads, per_param, &mut rng, |s| eval(s).0)
}

/// Random micro-batch of three sessions over a tiny vocabulary.
pub fn random_sessions(rng: &mut ChaCha8Rng) -> (Vec<Session>, Corpus) {
    let mut raw = Vec::new();
    for s in 0..3 {
        let pages: Vec<(String, Vec<(String, u8)>)> = (0..rng.random_range(1..=2))
            .map(|_| {
                let q = format!("q{}", rng.random_range(1..=4));
                let docs = (0..3)
                    .map(|_| (format!("d{}", rng.random_range(1..=8)), rng.random_range(0..=1u8)))
                    .collect();
                (q, docs)
            })
            .collect();
        let borrowed: Vec<(&str, Vec<(&str, u8)>)> = pages
            .iter()
            .map(|(q, d)| (q.as_str(), d.iter().map(|(x, c)| (x.as_str(), *c)).collect()))
            .collect();
        let refs: Vec<(&str, &[(&str, u8)])> = borrowed.iter().map(|(q, d)| (*q, d.as_slice())).collect();
        raw.push(raw_session(&format!("s{s}"), &refs));
    }
    let mut corpus = Corpus::new();
    let sessions = ingest_all(&raw, &mut corpus);
    (sessions, corpus)
}

pub fn small_config() -> ModelConfig {
    ModelConfig {
        query_dim: 4,
        doc_dim: 4,
        vertical_dim: 2,
        click_dim: 2,
        position_dim: 2,
        hidden: 3,
        nonlinear_hidden: 3,
        dropout: 0.0,
        gat: GatConfig {
            heads: 2,
            aggregation: Aggregation::Average,
            k: 3,
            leaky_slope: 0.2,
        },
        ..ModelConfig::default()
    }
}

/// Model and batch for one random instance; embeddings are scaled up from
/// their tiny initialization so every path carries signal.
pub fn model_instance(cfg: &ModelConfig, seed: u64, augment: bool) -> (GraphCm, Batch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sessions, corpus) = random_sessions(&mut rng);
    let inputs = GraphInputs::from_training(&sessions);
    let dims = ModelDims {
        queries: corpus.queries.len(),
        docs: corpus.docs.len(),
        verticals: corpus.verticals.len(),
        max_position: 3,
    };
    let mut model = GraphCm::new(cfg.clone(), dims, &mut rng).unwrap();
    let scale = rng.random_range(20.0..60.0);
    let emb: Vec<ParamId> = model
        .store
        .iter()
        .filter(|(_, n, _)| n.starts_with("emb."))
        .map(|(i, _, _)| i)
        .collect();
    for id in emb {
        model.store.get_mut(id).mapv_inplace(|v| v * scale);
    }
    let batch = batch_for(cfg, &sessions, &inputs, seed, augment);
    (model, batch)
}

/// Evaluation-style batch (no substitution) over `sessions`.
pub fn batch_for(cfg: &ModelConfig, sessions: &[Session], inputs: &GraphInputs, seed: u64, augment: bool) -> Batch {
    let qs = graphcm::graph::sample_neighbors(&inputs.query_graph, cfg.gat.k, seed, cfg.sampling).unwrap();
    let ds = graphcm::graph::sample_neighbors(&inputs.doc_graph, cfg.gat.k, seed + 1, cfg.sampling).unwrap();
    let ctx = GraphContext {
        query_graph: &inputs.query_graph,
        doc_graph: &inputs.doc_graph,
        query_sample: &qs,
        doc_sample: &ds,
        known: &inputs.known,
        policy: cfg.sampling,
        seed,
        augment,
    };
    let refs: Vec<&Session> = sessions.iter().collect();
    build_batch::<ChaCha8Rng>(
        &refs,
        &ctx,
        BatchOptions {
            max_position: 3,
            with_interaction: cfg.ablation.use_neighbor_interaction,
            substitution: None,
        },
    )
}

#[derive(Clone, Copy)]
pub enum Output {
    Query,
    Doc,
    Interaction,
    Examination,
    Attractiveness,
    Click,
    Loss,
}

fn pick(fwd: &mut Forward, batch: &Batch, out: Output) -> Var {
    match out {
        Output::Query => fwd.h_query,
        Output::Doc => fwd.h_doc,
        Output::Interaction => fwd.h_interaction,
        Output::Examination => fwd.examination,
        Output::Attractiveness => fwd.attractiveness,
        Output::Click => fwd.click,
        Output::Loss => fwd.bce(batch).unwrap(),
    }
}

fn run_model_case(cfg: &ModelConfig, out: Output, seed: u64, per_param: usize) -> (f64, usize, String) {
    let (mut model, batch) = model_instance(cfg, seed, seed % 2 == 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let r = {
        let mut fwd = model.forward(&batch, false, &mut rng).unwrap();
        let v = pick(&mut fwd, &batch, out);
        random_matrix(&mut rng, fwd.tape.shape(v), -1.0, 1.0)
    };
    let loss = |m: &GraphCm| -> (f64, graphcm::autodiff::Gradients) {
        let mut dummy = ChaCha8Rng::seed_from_u64(0);
        let mut fwd = m.forward(&batch, false, &mut dummy).unwrap();
        let v = pick(&mut fwd, &batch, out);
        let l = if matches!(out, Output::Loss) { v } else { project(&mut fwd.tape, v, &r).unwrap() };
        (fwd.tape.scalar(l), fwd.tape.backward(l).unwrap())
    };
    let grads = loss(&model).1;
    let shadow = model.clone();
    check_gradients(&mut model.store, &grads, per_param, &mut rng, |store| {
        let mut m = shadow.clone();
        m.store.load_values(store).unwrap();
        let mut dummy = ChaCha8Rng::seed_from_u64(0);
        let mut fwd = m.forward(&batch, false, &mut dummy).unwrap();
        let v = pick(&mut fwd, &batch, out);
        let l = if matches!(out, Output::Loss) { v } else { project(&mut fwd.tape, v, &r).unwrap() };
        fwd.tape.scalar(l)
    })
}

fn model_cases() -> Vec<(String, ModelConfig, Output)> {
    let base = small_config();
    let mut v = vec![
        ("query encoder".to_owned(), base.clone(), Output::Query),
        ("document encoder".to_owned(), base.clone(), Output::Doc),
        ("neighbor interaction".to_owned(), base.clone(), Output::Interaction),
        ("examination predictor".to_owned(), base.clone(), Output::Examination),
        ("attractiveness estimator".to_owned(), base.clone(), Output::Attractiveness),
    ];
    for kind in [
        CombinationKind::Mul,
        CombinationKind::ExpMul,
        CombinationKind::Linear,
        CombinationKind::Nonlinear,
    ] {
        let c = ModelConfig {
            combination: kind,
            ..base.clone()
        };
        v.push((format!("combination {}", kind.as_str()), c, Output::Click));
    }
    let concat = ModelConfig {
        gat: GatConfig {
            aggregation: Aggregation::Concat,
            ..base.gat
        },
        ..base.clone()
    };
    v.push(("full loss (concat heads)".to_owned(), concat, Output::Loss));
    v.push(("full loss".to_owned(), base.clone(), Output::Loss));
    let reset = ModelConfig {
        reset_doc_state_per_query: true,
        ..base.clone()
    };
    v.push(("full loss (doc state reset)".to_owned(), reset, Output::Loss));
    for ab in [Ablation::NCM_LIKE, Ablation::NO_GAT] {
        let c = ModelConfig {
            ablation: ab,
            ..base.clone()
        };
        v.push((format!("full loss ({})", ab.label()), c, Output::Loss));
    }
    v
}

/// Runs `instances` random instances of every op and model path.
pub fn gradient_suite(instances: usize, per_param: usize) -> Vec<CaseResult> {
    let mut out = Vec::new();
    let mut push = |name: String, results: Vec<(f64, usize, String)>| {
        let mut r = CaseResult {
            name,
            instances: results.len(),
            entries: 0,
            worst: 0.0,
            at: String::new(),
        };
        for (w, n, at) in results {
            r.entries += n;
            if w > r.worst {
                r.worst = w;
                r.at = at;
            }
        }
        out.push(r);
    };
    for case in op_cases() {
        let results = (0..instances as u64)
            .map(|s| run_op_case(&case, 1000 + s, per_param.max(4)))
            .collect();
        push(format!("op {}", case.name), results);
    }
    for (name, cfg, o) in model_cases() {
        let results = (0..instances as u64).map(|s| run_model_case(&cfg, o, 2000 + s, per_param)).collect();
        push(name, results);
    }
    out
}
