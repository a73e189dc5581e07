//! Probabilistic click models used as baselines and as data generators:
//! PBM and UBM fitted by EM, DCM and simplified DBN by smoothed counts.

mod cascade;
mod dump;
mod em;
mod params;

pub use cascade::{fit_cascade, Cascade, CascadeVariant};
pub use dump::{read_baseline, write_baseline};
pub use em::{fit_pbm, fit_ubm, EmConfig, EmTrace, Pbm, Ubm};
pub use params::Attractiveness;

use crate::error::Result;
use crate::eval::SessionScores;
use crate::session_log::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Pbm,
    Ubm,
    Dcm,
    Sdbn,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Pbm,
        BaselineKind::Ubm,
        BaselineKind::Dcm,
        BaselineKind::Sdbn,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbm" => Some(BaselineKind::Pbm),
            "ubm" => Some(BaselineKind::Ubm),
            "dcm" => Some(BaselineKind::Dcm),
            "sdbn" => Some(BaselineKind::Sdbn),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Pbm => "pbm",
            BaselineKind::Ubm => "ubm",
            BaselineKind::Dcm => "dcm",
            BaselineKind::Sdbn => "sdbn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Pbm(Pbm),
    Ubm(Ubm),
    Cascade(Cascade),
}

impl Baseline {
    /// Fits `kind` on `train`. The EM trace is empty for count estimators.
    pub fn fit(kind: BaselineKind, train: &[Session], em: &EmConfig) -> Result<(Baseline, EmTrace)> {
        Ok(match kind {
            BaselineKind::Pbm => {
                let (m, t) = fit_pbm(train, em)?;
                (Baseline::Pbm(m), t)
            }
            BaselineKind::Ubm => {
                let (m, t) = fit_ubm(train, em)?;
                (Baseline::Ubm(m), t)
            }
            BaselineKind::Dcm => (
                Baseline::Cascade(fit_cascade(train, CascadeVariant::Dcm)?),
                EmTrace::default(),
            ),
            BaselineKind::Sdbn => (
                Baseline::Cascade(fit_cascade(train, CascadeVariant::Sdbn)?),
                EmTrace::default(),
            ),
        })
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            Baseline::Pbm(_) => BaselineKind::Pbm,
            Baseline::Ubm(_) => BaselineKind::Ubm,
            Baseline::Cascade(c) => match c.variant {
                CascadeVariant::Dcm => BaselineKind::Dcm,
                CascadeVariant::Sdbn => BaselineKind::Sdbn,
            },
        }
    }

    pub fn attractiveness(&self) -> &Attractiveness {
        match self {
            Baseline::Pbm(m) => &m.alpha,
            Baseline::Ubm(m) => &m.alpha,
            Baseline::Cascade(m) => &m.alpha,
        }
    }

    /// Click probabilities for every impression of `session`, each
    /// conditioned on the observed clicks above it on the same page.
    pub fn predict_clicks(&self, session: &Session) -> Vec<f64> {
        let mut out = Vec::with_capacity(session.impression_count());
        for q in &session.queries {
            match self {
                Baseline::Pbm(m) => out.extend(
                    q.impressions
                        .iter()
                        .map(|imp| m.click_probability(q.query, imp.doc, imp.position as usize)),
                ),
                Baseline::Ubm(m) => {
                    let mut prev = 0;
                    for imp in &q.impressions {
                        let r = imp.position as usize;
                        out.push(m.click_probability(q.query, imp.doc, r, prev));
                        if imp.click {
                            prev = r;
                        }
                    }
                }
                Baseline::Cascade(m) => out.extend(m.predict_page(q)),
            }
        }
        out
    }

    /// Click probabilities plus attractiveness as the ranking score.
    pub fn score_session(&self, session: &Session) -> SessionScores {
        let alpha = self.attractiveness();
        SessionScores {
            click: self.predict_clicks(session),
            rank_score: session
                .impressions()
                .map(|(_, q, imp)| alpha.get(q.query, imp.doc))
                .collect(),
        }
    }
}
