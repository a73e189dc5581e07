use rand::Rng;

use super::batch::{Batch, GatRows};
use super::combine::Combination;
use super::config::{ModelConfig, ModelDims};
use super::gat::{GatLayer, NeighborInteraction};
use crate::autodiff::{
    gru_sequence, Gru, Init, Linear, Manifest, Matrix, ParamId, ParamStore, Tape, Var, PROB_EPS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Embeddings {
    pub query: ParamId,
    pub doc: ParamId,
    pub vertical: ParamId,
    pub click: ParamId,
    pub position: ParamId,
}

#[derive(Debug, Clone)]
pub struct Layers {
    pub emb: Embeddings,
    pub query_gat: GatLayer,
    pub doc_gat: GatLayer,
    pub interaction: NeighborInteraction,
    pub query_gru: Gru,
    pub doc_gru: Gru,
    pub mlp_hidden: Linear,
    pub mlp_output: Linear,
    pub exam_gru: Gru,
    pub exam_output: Linear,
    pub combination: Combination,
}

/// The click model: parameters plus the layer layout that reads them.
#[derive(Debug, Clone)]
pub struct GraphCm {
    pub config: ModelConfig,
    pub dims: ModelDims,
    pub store: ParamStore,
    pub layers: Layers,
}

/// Tape variables of one forward pass. Per-impression outputs are
/// `rows x 1` columns in the batch's time-major row order.
pub struct Forward<'a> {
    pub tape: Tape<'a>,
    pub attractiveness: Var,
    pub examination: Var,
    pub click: Var,
    pub h_query: Var,
    pub h_doc: Var,
    pub h_interaction: Var,
    pub h_exam: Var,
}

impl Forward<'_> {
    /// Mean BCE over the real impressions of `batch`.
    pub fn bce(&mut self, batch: &Batch) -> Result<Var> {
        self.tape.bce(self.click, &batch.click, &batch.weight)
    }

    /// Column values per session, in impression order.
    pub fn per_session(&self, batch: &Batch, v: Var) -> Vec<Vec<f64>> {
        let m = self.tape.value(v);
        (0..batch.sessions)
            .map(|b| {
                (0..batch.lengths[b])
                    .map(|t| m[[batch.row(b, t), 0]])
                    .collect()
            })
            .collect()
    }
}

impl GraphCm {
    pub fn new(config: ModelConfig, dims: ModelDims, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let s = &mut store;
        let emb_init = Init::Normal(0.01);
        let emb = Embeddings {
            query: s.init("emb.query", dims.queries.max(1), config.query_dim, emb_init, rng)?,
            doc: s.init("emb.doc", dims.docs.max(1), config.doc_dim, emb_init, rng)?,
            vertical: s.init("emb.vertical", dims.verticals.max(1), config.vertical_dim, emb_init, rng)?,
            click: s.init("emb.click", 2, config.click_dim, emb_init, rng)?,
            position: s.init("emb.position", dims.max_position + 1, config.position_dim, emb_init, rng)?,
        };
        let w = config.query_dim;
        let h = config.hidden;
        let slope = config.gat.leaky_slope;
        let query_gat = GatLayer::new(s, "query_gat", w, config.gat, rng)?;
        let doc_gat = GatLayer::new(s, "doc_gat", config.doc_dim, config.gat, rng)?;
        let interaction = NeighborInteraction::new(s, "interaction", w, slope, rng)?;
        let query_gru = Gru::new(s, "query_gru", w, h, rng)?;
        let doc_in = config.doc_dim + config.vertical_dim + config.click_dim + config.position_dim;
        let doc_gru = Gru::new(s, "doc_gru", doc_in, h, rng)?;
        let mlp_hidden = Linear::new(s, "attract.hidden", 2 * h + w, h, rng)?;
        let mlp_output = Linear::new(s, "attract.output", h, 1, rng)?;
        let exam_in = config.position_dim + config.vertical_dim + config.click_dim;
        let exam_gru = Gru::new(s, "exam_gru", exam_in, h, rng)?;
        let exam_output = Linear::new(s, "exam.output", h, 1, rng)?;
        let combination = Combination::new(s, config.combination, config.nonlinear_hidden, rng)?;
        Ok(GraphCm {
            config,
            dims,
            store,
            layers: Layers {
                emb,
                query_gat,
                doc_gat,
                interaction,
                query_gru,
                doc_gru,
                mlp_hidden,
                mlp_output,
                exam_gru,
                exam_output,
                combination,
            },
        })
    }

    pub fn k(&self) -> usize {
        self.config.gat.k
    }

    fn adjusted(
        &self,
        tape: &mut Tape,
        table: ParamId,
        rows: &GatRows,
        gat: &GatLayer,
        enabled: bool,
    ) -> Result<Var> {
        let centers = tape.embedding(table, &rows.centers)?;
        if !enabled {
            return Ok(centers);
        }
        let neighbors = tape.embedding(table, &rows.neighbors)?;
        gat.forward(tape, centers, neighbors)
    }

    /// Runs the network on `batch`. Dropout is active only when `train`.
    pub fn forward<'a>(&'a self, batch: &Batch, train: bool, rng: &mut impl Rng) -> Result<Forward<'a>> {
        if batch.sessions == 0 || batch.steps == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let cfg = &self.config;
        let l = &self.layers;
        let slope = cfg.gat.leaky_slope;
        let k = self.k();
        let rows = batch.rows();
        if let Some(&p) = batch.position.iter().find(|&&p| p > self.dims.max_position) {
            return Err(Error::invalid(format!(
                "position {p} beyond model maximum {}",
                self.dims.max_position
            )));
        }
        let mut tape = Tape::new(&self.store);

        // query encoder
        let q_adj = self.adjusted(&mut tape, l.emb.query, &batch.query_table, &l.query_gat, cfg.ablation.use_q_gat)?;
        let q_in = tape.gather(q_adj, &batch.query_row)?;
        let qp = l.query_gru.bind(&mut tape);
        let hq_slots = gru_sequence(&mut tape, &qp, q_in, batch.sessions, None)?;
        let h_query = tape.gather(hq_slots, &batch.query_slot)?;

        // document encoder
        let d_adj = self.adjusted(&mut tape, l.emb.doc, &batch.doc_table, &l.doc_gat, cfg.ablation.use_d_gat)?;
        let v_d = tape.gather(d_adj, &batch.doc_row)?;
        let v_v = tape.embedding(l.emb.vertical, &batch.vertical)?;
        let v_c = tape.embedding(l.emb.click, &batch.prev_click)?;
        let v_p = tape.embedding(l.emb.position, &batch.position)?;
        let x_d = tape.concat_cols(&[v_d, v_v, v_c, v_p])?;
        let dp = l.doc_gru.bind(&mut tape);
        let keep = cfg.reset_doc_state_per_query.then_some(batch.new_query_keep.as_slice());
        let h_doc = gru_sequence(&mut tape, &dp, x_d, batch.sessions, keep)?;

        // neighbor interaction
        let h_interaction = if cfg.ablation.use_neighbor_interaction {
            if batch.interaction_rows.len() != rows * k {
                return Err(Error::invalid("batch was built without interaction neighbors"));
            }
            let q_imp = tape.gather(q_in, &batch.query_slot)?;
            let nbrs = tape.gather(d_adj, &batch.interaction_rows)?;
            l.interaction.forward(&mut tape, q_imp, nbrs, k)?.0
        } else {
            tape.constant(Matrix::zeros((rows, cfg.query_dim)))
        };

        // attractiveness
        let z = tape.concat_cols(&[h_query, h_doc, h_interaction])?;
        let z = tape.dropout(z, cfg.dropout, train, rng)?;
        let a = l.mlp_hidden.forward(&mut tape, z)?;
        let a = tape.leaky_relu(a, slope);
        let a = l.mlp_output.forward(&mut tape, a)?;
        let a = tape.leaky_relu(a, slope);
        let a = tape.sigmoid(a);
        let attractiveness = tape.clamp(a, PROB_EPS, 1.0 - PROB_EPS);

        // examination
        let x_e = tape.concat_cols(&[v_p, v_v, v_c])?;
        let ep = l.exam_gru.bind(&mut tape);
        let h_exam = gru_sequence(&mut tape, &ep, x_e, batch.sessions, None)?;
        let e = l.exam_output.forward(&mut tape, h_exam)?;
        let e = tape.sigmoid(e);
        let examination = tape.clamp(e, PROB_EPS, 1.0 - PROB_EPS);

        let click = l.combination.forward(&mut tape, examination, attractiveness, slope)?;
        Ok(Forward {
            tape,
            attractiveness,
            examination,
            click,
            h_query,
            h_doc,
            h_interaction,
            h_exam,
        })
    }

    /// `(alpha, beta)` of the combination layer.
    pub fn combination_coefficients(&self) -> Result<(f64, f64)> {
        self.layers.combination.coefficients(&self.store).ok_or_else(|| {
            Error::invalid(format!(
                "combination {} has no scalar alpha/beta",
                self.config.combination.as_str()
            ))
        })
    }

    /// Configuration entries stored in checkpoints.
    pub fn manifest(&self) -> Manifest {
        let mut m = self.config.entries();
        m.push(("dims.queries".into(), self.dims.queries.to_string()));
        m.push(("dims.docs".into(), self.dims.docs.to_string()));
        m.push(("dims.verticals".into(), self.dims.verticals.to_string()));
        m.push(("dims.max_position".into(), self.dims.max_position.to_string()));
        m
    }

    pub fn save(&self, path: &std::path::Path, extra: &Manifest) -> Result<()> {
        let mut manifest = self.manifest();
        manifest.extend(extra.iter().cloned());
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        crate::autodiff::write_checkpoint(f, &self.store, &manifest)
    }

    /// Rebuilds a model from a checkpoint written by [`GraphCm::save`].
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck = crate::autodiff::read_checkpoint(f)?;
        let mut config = ModelConfig::default();
        let get = |key: &str| -> Result<usize> {
            ck.manifest_value(key)
                .ok_or_else(|| Error::format(format!("checkpoint manifest lacks {key}")))?
                .parse()
                .map_err(|_| Error::format(format!("checkpoint manifest {key} is not an integer")))
        };
        let dims = ModelDims {
            queries: get("dims.queries")?,
            docs: get("dims.docs")?,
            verticals: get("dims.verticals")?,
            max_position: get("dims.max_position")?,
        };
        for (key, value) in &ck.manifest {
            if let Some(key) = key.strip_prefix("model.") {
                config.set(key, value)?;
            }
        }
        // weights are overwritten; the RNG only fixes the layout
        let mut rng = crate::rng::stream_rng(0, 0);
        let mut model = GraphCm::new(config, dims, &mut rng)?;
        ck.restore_into(&mut model.store)?;
        Ok(model)
    }
}
