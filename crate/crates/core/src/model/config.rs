use crate::error::{Error, Result};
use crate::graph::SamplingPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Heads attend over disjoint column blocks and are concatenated.
    Concat,
    /// Heads are averaged before the output nonlinearity.
    Average,
}

impl Aggregation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concat" => Some(Aggregation::Concat),
            "average" => Some(Aggregation::Average),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Concat => "concat",
            Aggregation::Average => "average",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinationKind {
    Mul,
    ExpMul,
    Linear,
    Nonlinear,
}

impl CombinationKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mul" => Some(CombinationKind::Mul),
            "expmul" => Some(CombinationKind::ExpMul),
            "linear" => Some(CombinationKind::Linear),
            "nonlinear" => Some(CombinationKind::Nonlinear),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CombinationKind::Mul => "mul",
            CombinationKind::ExpMul => "expmul",
            CombinationKind::Linear => "linear",
            CombinationKind::Nonlinear => "nonlinear",
        }
    }
}

/// Which score ranks documents for relevance estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankScore {
    Attractiveness,
    ClickProbability,
}

impl RankScore {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "attractiveness" => Some(RankScore::Attractiveness),
            "click" => Some(RankScore::ClickProbability),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RankScore::Attractiveness => "attractiveness",
            RankScore::ClickProbability => "click",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatConfig {
    pub heads: usize,
    pub aggregation: Aggregation,
    pub k: usize,
    pub leaky_slope: f64,
}

impl GatConfig {
    pub fn output_width(&self, input_width: usize) -> usize {
        input_width
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::Config("attention heads must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("neighbor sample size K must be at least 1".into()));
        }
        if self.aggregation == Aggregation::Concat && width % self.heads != 0 {
            return Err(Error::Config(format!(
                "concat aggregation needs embedding width {width} divisible by {} heads",
                self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ablation {
    pub use_q_gat: bool,
    pub use_d_gat: bool,
    pub use_neighbor_interaction: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation::FULL
    }
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        use_q_gat: true,
        use_d_gat: true,
        use_neighbor_interaction: true,
    };

    /// Both graph encoders and the neighbor interaction removed.
    pub const NCM_LIKE: Ablation = Ablation {
        use_q_gat: false,
        use_d_gat: false,
        use_neighbor_interaction: false,
    };

    pub const NO_GAT: Ablation = Ablation {
        use_q_gat: false,
        use_d_gat: false,
        use_neighbor_interaction: true,
    };

    pub fn label(&self) -> String {
        match *self {
            Ablation::FULL => "full".into(),
            Ablation::NCM_LIKE => "ncm_like".into(),
            Ablation::NO_GAT => "no_gat".into(),
            a => {
                let mut parts = Vec::new();
                if !a.use_q_gat {
                    parts.push("no_qgat");
                }
                if !a.use_d_gat {
                    parts.push("no_dgat");
                }
                if !a.use_neighbor_interaction {
                    parts.push("no_inter");
                }
                parts.join("+")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub query_dim: usize,
    pub doc_dim: usize,
    pub vertical_dim: usize,
    pub click_dim: usize,
    pub position_dim: usize,
    pub hidden: usize,
    pub gat: GatConfig,
    pub sampling: SamplingPolicy,
    pub combination: CombinationKind,
    pub nonlinear_hidden: usize,
    pub dropout: f64,
    pub ablation: Ablation,
    /// Reset the document GRU state at every new query of a session.
    pub reset_doc_state_per_query: bool,
    /// Probability of replacing a training id by UNKNOWN so that row 0 of
    /// the id embeddings is trained.
    pub unknown_substitution: f64,
    pub rank_by: RankScore,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            query_dim: 64,
            doc_dim: 64,
            vertical_dim: 8,
            click_dim: 4,
            position_dim: 4,
            hidden: 64,
            gat: GatConfig {
                heads: 2,
                aggregation: Aggregation::Average,
                k: 8,
                leaky_slope: 0.2,
            },
            sampling: SamplingPolicy::Uniform,
            combination: CombinationKind::ExpMul,
            nonlinear_hidden: 8,
            dropout: 0.5,
            ablation: Ablation::FULL,
            reset_doc_state_per_query: false,
            unknown_substitution: 0.01,
            rank_by: RankScore::Attractiveness,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.query_dim != self.doc_dim {
            return Err(Error::Config(format!(
                "query and document embedding widths must match for neighbor interaction ({} vs {})",
                self.query_dim, self.doc_dim
            )));
        }
        for (name, v) in [
            ("query_dim", self.query_dim),
            ("vertical_dim", self.vertical_dim),
            ("click_dim", self.click_dim),
            ("position_dim", self.position_dim),
            ("hidden", self.hidden),
            ("nonlinear_hidden", self.nonlinear_hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.unknown_substitution) {
            return Err(Error::Config("unknown_substitution outside [0, 1]".into()));
        }
        self.gat.validate(self.query_dim)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_enum<T>(key: &str, value: &str, f: impl Fn(&str) -> Option<T>) -> Result<T> {
    f(value.trim()).ok_or_else(|| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl ModelConfig {
    pub const KEYS: &'static [&'static str] = &[
        "query_dim",
        "doc_dim",
        "vertical_dim",
        "click_dim",
        "position_dim",
        "hidden",
        "heads",
        "aggregation",
        "k",
        "leaky_slope",
        "sampling",
        "combination",
        "nonlinear_hidden",
        "dropout",
        "use_q_gat",
        "use_d_gat",
        "use_neighbor_interaction",
        "reset_doc_state_per_query",
        "unknown_substitution",
        "rank_by",
    ];

    /// Sets one flat `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "query_dim" => self.query_dim = parse_value(key, value)?,
            "doc_dim" => self.doc_dim = parse_value(key, value)?,
            "vertical_dim" => self.vertical_dim = parse_value(key, value)?,
            "click_dim" => self.click_dim = parse_value(key, value)?,
            "position_dim" => self.position_dim = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "heads" => self.gat.heads = parse_value(key, value)?,
            "aggregation" => self.gat.aggregation = parse_enum(key, value, Aggregation::parse)?,
            "k" => self.gat.k = parse_value(key, value)?,
            "leaky_slope" => self.gat.leaky_slope = parse_value(key, value)?,
            "sampling" => self.sampling = parse_enum(key, value, SamplingPolicy::parse)?,
            "combination" => self.combination = parse_enum(key, value, CombinationKind::parse)?,
            "nonlinear_hidden" => self.nonlinear_hidden = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "use_q_gat" => self.ablation.use_q_gat = parse_value(key, value)?,
            "use_d_gat" => self.ablation.use_d_gat = parse_value(key, value)?,
            "use_neighbor_interaction" => {
                self.ablation.use_neighbor_interaction = parse_value(key, value)?
            }
            "reset_doc_state_per_query" => self.reset_doc_state_per_query = parse_value(key, value)?,
            "unknown_substitution" => self.unknown_substitution = parse_value(key, value)?,
            "rank_by" => self.rank_by = parse_enum(key, value, RankScore::parse)?,
            _ => return Err(Error::Config(format!("unknown model key {key:?}"))),
        }
        Ok(())
    }

    /// All settings as `model.<key>` entries; [`ModelConfig::set`] reads them back.
    pub fn entries(&self) -> Vec<(String, String)> {
        let values = [
            self.query_dim.to_string(),
            self.doc_dim.to_string(),
            self.vertical_dim.to_string(),
            self.click_dim.to_string(),
            self.position_dim.to_string(),
            self.hidden.to_string(),
            self.gat.heads.to_string(),
            self.gat.aggregation.as_str().to_string(),
            self.gat.k.to_string(),
            self.gat.leaky_slope.to_string(),
            self.sampling.as_str().to_string(),
            self.combination.as_str().to_string(),
            self.nonlinear_hidden.to_string(),
            self.dropout.to_string(),
            self.ablation.use_q_gat.to_string(),
            self.ablation.use_d_gat.to_string(),
            self.ablation.use_neighbor_interaction.to_string(),
            self.reset_doc_state_per_query.to_string(),
            self.unknown_substitution.to_string(),
            self.rank_by.as_str().to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| (format!("model.{k}"), v))
            .collect()
    }
}

/// Vocabulary-dependent table sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Rows of the query table, including UNKNOWN.
    pub queries: usize,
    pub docs: usize,
    pub verticals: usize,
    /// Largest rank; the position table has `max_position + 1` rows.
    pub max_position: usize,
}
