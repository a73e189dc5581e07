//! Synthetic click logs sampled from known click models.
//!
//! Tokens are `q<i>`, `d<j>`, `v<k>` and session ids `s<n>`. The generating
//! parameters are returned (and serialized) beside the log so that fitted
//! models can be compared with the truth.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::session_log::{write_raw_log, write_raw_relevance, RawDoc, RawQuery, RawSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Pbm,
    Ubm,
    Sdbn,
    GraphPlanted,
}

impl GeneratorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbm" => Some(GeneratorKind::Pbm),
            "ubm" => Some(GeneratorKind::Ubm),
            "sdbn" => Some(GeneratorKind::Sdbn),
            "graph_planted" | "planted" => Some(GeneratorKind::GraphPlanted),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Pbm => "pbm",
            GeneratorKind::Ubm => "ubm",
            GeneratorKind::Sdbn => "sdbn",
            GeneratorKind::GraphPlanted => "graph_planted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: GeneratorKind,
    pub queries: usize,
    /// Documents per query for the click-model generators; total documents
    /// for the planted generator.
    pub docs: usize,
    pub serp_len: usize,
    pub sessions: usize,
    pub seed: u64,
    pub verticals: usize,
    /// Planted generator: number of latent topics.
    pub topics: usize,
    /// Planted generator: attractiveness added when query and document share a topic.
    pub topic_boost: f64,
    /// Planted generator: queries per session are drawn from `1..=max`.
    pub max_queries_per_session: usize,
    /// Planted generator: probability that a result slot shows an on-topic document.
    pub on_topic_share: f64,
    /// Examination per rank; defaults to a decaying profile when empty.
    pub gamma: Vec<f64>,
}

impl SyntheticSpec {
    pub fn new(kind: GeneratorKind, sessions: usize, seed: u64) -> Self {
        let planted = kind == GeneratorKind::GraphPlanted;
        SyntheticSpec {
            kind,
            queries: if planted { 300 } else { 10 },
            docs: if planted { 3000 } else { 4 },
            serp_len: if planted { 5 } else { 4 },
            sessions,
            seed,
            verticals: 3,
            topics: 30,
            topic_boost: 0.8,
            max_queries_per_session: 3,
            on_topic_share: 0.8,
            gamma: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sessions < 1 || self.queries < 1 || self.serp_len < 1 || self.verticals < 1 {
            return Err(Error::Config("synthetic sizes must be positive".into()));
        }
        if self.kind == GeneratorKind::GraphPlanted {
            if self.topics < 1 || self.docs < self.topics * self.serp_len {
                return Err(Error::Config(format!(
                    "planted generator needs at least topics * serp_len = {} documents",
                    self.topics * self.serp_len
                )));
            }
            if self.queries < self.topics || self.max_queries_per_session < 1 {
                return Err(Error::Config("planted generator needs a query per topic".into()));
            }
            if !(0.0..=0.9).contains(&self.topic_boost) {
                return Err(Error::Config("topic boost must lie in [0, 0.9]".into()));
            }
            if !(0.0..=1.0).contains(&self.on_topic_share) {
                return Err(Error::Config("on-topic share must lie in [0, 1]".into()));
            }
        } else if self.docs < self.serp_len {
            return Err(Error::Config("each query needs at least serp_len documents".into()));
        }
        if !self.gamma.is_empty() && self.gamma.len() != self.serp_len {
            return Err(Error::Config("gamma must have one entry per rank".into()));
        }
        if self.gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::Config("gamma entries must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn examination(&self) -> Vec<f64> {
        if !self.gamma.is_empty() {
            return self.gamma.clone();
        }
        if self.serp_len == 4 {
            return vec![0.95, 0.7, 0.45, 0.2];
        }
        (0..self.serp_len).map(|r| 0.95 * 0.8f64.powi(r as i32)).collect()
    }
}

/// Generating parameters keyed by raw tokens.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: Option<GeneratorKind>,
    /// `gamma[r - 1]` (position-based generators).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<f64>,
    /// `gamma_prev[r - 1][r']` (browsing generator).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma_prev: Vec<Vec<f64>>,
    pub alpha: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub satisfaction: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub query_topic: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub doc_topic: BTreeMap<String, usize>,
}

impl GroundTruth {
    fn pair(map: &BTreeMap<String, BTreeMap<String, f64>>, q: &str, d: &str) -> Result<f64> {
        map.get(q)
            .and_then(|m| m.get(d))
            .copied()
            .ok_or_else(|| Error::invalid(format!("no generating parameter for ({q}, {d})")))
    }

    pub fn alpha(&self, q: &str, d: &str) -> Result<f64> {
        Self::pair(&self.alpha, q, d)
    }

    /// True click probabilities of every impression, each conditioned on the
    /// observed clicks above it on the same page.
    pub fn click_probabilities(&self, session: &RawSession) -> Result<Vec<f64>> {
        let kind = self.kind.ok_or_else(|| Error::invalid("ground truth without a generator kind"))?;
        let mut out = Vec::new();
        for q in &session.queries {
            let mut prev = 0usize;
            let mut eps = 1.0;
            for d in &q.docs {
                let r = d.pos as usize;
                let a = self.alpha(&q.qid, &d.did)?;
                let clicked = d.click == 1;
                match kind {
                    GeneratorKind::Pbm | GeneratorKind::GraphPlanted => out.push(self.gamma[r - 1] * a),
                    GeneratorKind::Ubm => {
                        out.push(self.gamma_prev[r - 1][prev] * a);
                        if clicked {
                            prev = r;
                        }
                    }
                    GeneratorKind::Sdbn => {
                        out.push(eps * a);
                        eps = if clicked {
                            1.0 - Self::pair(&self.satisfaction, &q.qid, &d.did)?
                        } else {
                            eps * (1.0 - a) / (1.0 - eps * a)
                        };
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub sessions: Vec<RawSession>,
    pub truth: GroundTruth,
    /// `(query, doc, grade)` for every generated pair.
    pub relevance: Vec<(String, String, u8)>,
}

fn qtok(i: usize) -> String {
    format!("q{i}")
}

fn dtok(j: usize) -> String {
    format!("d{j}")
}

fn grade(alpha: f64) -> u8 {
    (alpha * 4.0).round().clamp(0.0, 4.0) as u8
}

fn browsing_gamma(m: usize) -> Vec<Vec<f64>> {
    let first = [0.95, 0.6, 0.35, 0.2];
    (1..=m)
        .map(|r| {
            (0..m)
                .map(|rp| {
                    if rp == 0 {
                        first.get(r - 1).copied().unwrap_or(0.2 * 0.8f64.powi(r as i32 - 4))
                    } else if rp < r {
                        0.9 * 0.55f64.powi((r - rp - 1) as i32)
                    } else {
                        // unreachable combination, kept for a square table
                        0.5
                    }
                })
                .collect()
        })
        .collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    match spec.kind {
        GeneratorKind::GraphPlanted => generate_planted(spec),
        _ => generate_click_model(spec),
    }
}

fn generate_click_model(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let mut prm = stream_rng(spec.seed, 0);
    let m = spec.serp_len;
    let mut truth = GroundTruth {
        kind: Some(spec.kind),
        ..GroundTruth::default()
    };
    match spec.kind {
        GeneratorKind::Ubm => truth.gamma_prev = browsing_gamma(m),
        _ => truth.gamma = spec.examination(),
    }
    // each query owns `docs` documents
    let doc_of = |q: usize, j: usize| q * spec.docs + j + 1;
    let mut vertical = BTreeMap::new();
    let mut relevance = Vec::new();
    for q in 0..spec.queries {
        let qt = qtok(q + 1);
        for j in 0..spec.docs {
            let dt = dtok(doc_of(q, j));
            let a = prm.random_range(0.05..0.95);
            truth.alpha.entry(qt.clone()).or_default().insert(dt.clone(), a);
            if spec.kind == GeneratorKind::Sdbn {
                let s = prm.random_range(0.2..0.9);
                truth.satisfaction.entry(qt.clone()).or_default().insert(dt.clone(), s);
            }
            vertical.insert(dt.clone(), format!("v{}", prm.random_range(1..=spec.verticals)));
            relevance.push((qt.clone(), dt, grade(a)));
        }
    }
    let mut rng = stream_rng(spec.seed, 1);
    let mut sessions = Vec::with_capacity(spec.sessions);
    for n in 0..spec.sessions {
        let q = rng.random_range(0..spec.queries);
        let qt = qtok(q + 1);
        let shown = index::sample(&mut rng, spec.docs, m);
        let mut docs = Vec::with_capacity(m);
        let mut prev = 0usize;
        let mut examining = true;
        for (i, j) in shown.iter().enumerate() {
            let r = i + 1;
            let dt = dtok(doc_of(q, j));
            let a = truth.alpha(&qt, &dt)?;
            let click = match spec.kind {
                GeneratorKind::Pbm => rng.random::<f64>() < truth.gamma[r - 1] * a,
                GeneratorKind::Ubm => {
                    let c = rng.random::<f64>() < truth.gamma_prev[r - 1][prev] * a;
                    if c {
                        prev = r;
                    }
                    c
                }
                GeneratorKind::Sdbn => {
                    let c = examining && rng.random::<f64>() < a;
                    if c && rng.random::<f64>() < GroundTruth::pair(&truth.satisfaction, &qt, &dt)? {
                        examining = false;
                    }
                    c
                }
                GeneratorKind::GraphPlanted => unreachable!("planted logs use their own generator"),
            };
            docs.push(RawDoc {
                did: dt.clone(),
                pos: r as u32,
                vert: vertical.get(&dt).cloned(),
                click: click as u8,
            });
        }
        sessions.push(RawSession {
            sid: format!("s{}", n + 1),
            queries: vec![RawQuery { qid: qt, docs }],
        });
    }
    Ok(SyntheticData {
        spec: spec.clone(),
        sessions,
        truth,
        relevance,
    })
}

fn generate_planted(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let mut prm = stream_rng(spec.seed, 0);
    let t = spec.topics;
    let m = spec.serp_len;
    let gamma = spec.examination();
    let query_topic: Vec<usize> = (0..spec.queries).map(|i| i % t).collect();
    let doc_topic: Vec<usize> = (0..spec.docs).map(|j| j % t).collect();
    // on-topic attractiveness scales with a per-topic popularity
    let popularity: Vec<f64> = (0..t).map(|_| prm.random_range(0.2..1.0)).collect();
    let noise: Vec<f64> = (0..spec.docs).map(|_| prm.random_range(-0.03..0.03)).collect();
    let vertical: Vec<usize> = (0..spec.docs).map(|_| prm.random_range(1..=spec.verticals)).collect();
    let alpha = |q: usize, d: usize| -> f64 {
        let td = doc_topic[d];
        let boost = if query_topic[q] == td { spec.topic_boost * popularity[td] } else { 0.0 };
        (0.05 + boost + noise[d]).clamp(0.01, 0.99)
    };
    let mut by_topic_q: Vec<Vec<usize>> = vec![Vec::new(); t];
    for (q, &tq) in query_topic.iter().enumerate() {
        by_topic_q[tq].push(q);
    }
    let mut by_topic_d: Vec<Vec<usize>> = vec![Vec::new(); t];
    for (d, &td) in doc_topic.iter().enumerate() {
        by_topic_d[td].push(d);
    }

    let mut truth = GroundTruth {
        kind: Some(GeneratorKind::GraphPlanted),
        gamma: gamma.clone(),
        query_topic: (0..spec.queries).map(|q| (qtok(q + 1), query_topic[q])).collect(),
        doc_topic: (0..spec.docs).map(|d| (dtok(d + 1), doc_topic[d])).collect(),
        ..GroundTruth::default()
    };
    let mut rng = stream_rng(spec.seed, 1);
    let mut sessions = Vec::with_capacity(spec.sessions);
    for n in 0..spec.sessions {
        let topic = rng.random_range(0..t);
        let nq = rng.random_range(1..=spec.max_queries_per_session);
        let mut queries = Vec::with_capacity(nq);
        for _ in 0..nq {
            let q = *by_topic_q[topic].choose(&mut rng).expect("every topic has a query");
            let on_count = (0..m).filter(|_| rng.random::<f64>() < spec.on_topic_share).count().min(by_topic_d[topic].len());
            let mut shown: Vec<usize> = index::sample(&mut rng, by_topic_d[topic].len(), on_count)
                .iter()
                .map(|i| by_topic_d[topic][i])
                .collect();
            while shown.len() < m {
                let d = rng.random_range(0..spec.docs);
                if doc_topic[d] != topic && !shown.contains(&d) {
                    shown.push(d);
                }
            }
            shown.shuffle(&mut rng);
            let qt = qtok(q + 1);
            let docs = shown
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let a = alpha(q, d);
                    truth.alpha.entry(qt.clone()).or_default().insert(dtok(d + 1), a);
                    RawDoc {
                        did: dtok(d + 1),
                        pos: i as u32 + 1,
                        vert: Some(format!("v{}", vertical[d])),
                        click: (rng.random::<f64>() < gamma[i] * a) as u8,
                    }
                })
                .collect();
            queries.push(RawQuery { qid: qt, docs });
        }
        sessions.push(RawSession {
            sid: format!("s{}", n + 1),
            queries,
        });
    }
    let relevance = truth
        .alpha
        .iter()
        .flat_map(|(q, ds)| ds.iter().map(move |(d, &a)| (q.clone(), d.clone(), grade(a))))
        .collect();
    Ok(SyntheticData {
        spec: spec.clone(),
        sessions,
        truth,
        relevance,
    })
}

pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const TRUTH_FILE: &str = "truth.json";
pub const RELEVANCE_FILE: &str = "relevance.tsv";
pub const SPEC_FILE: &str = "spec.json";

/// Writes the log, the generating parameters, the derived judgements and
/// the spec into `dir`.
pub fn write_synthetic(dir: &Path, data: &SyntheticData) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
    let mut w = file(SESSIONS_FILE)?;
    write_raw_log(&mut w, &data.sessions)?;
    w.flush()?;
    let mut w = file(TRUTH_FILE)?;
    serde_json::to_writer_pretty(&mut w, &data.truth)?;
    w.flush()?;
    let mut w = file(RELEVANCE_FILE)?;
    write_raw_relevance(&mut w, &data.relevance)?;
    w.flush()?;
    let mut w = file(SPEC_FILE)?;
    serde_json::to_writer_pretty(&mut w, &data.spec)?;
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
