use std::collections::HashSet;

use super::split::DatasetSplit;
use super::types::{DocId, QueryId, Session};

/// Query and document ids observed in a training set.
#[derive(Debug, Clone, Default)]
pub struct KnownIds {
    queries: HashSet<QueryId>,
    docs: HashSet<DocId>,
}

impl KnownIds {
    pub fn from_sessions<'a>(sessions: impl IntoIterator<Item = &'a Session>) -> Self {
        let mut known = KnownIds::default();
        for s in sessions {
            for q in &s.queries {
                known.queries.insert(q.query);
                for imp in &q.impressions {
                    known.docs.insert(imp.doc);
                }
            }
        }
        known
    }

    pub fn has_query(&self, q: QueryId) -> bool {
        self.queries.contains(&q)
    }

    pub fn has_doc(&self, d: DocId) -> bool {
        self.docs.contains(&d)
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColdStartKind {
    ColdQ,
    ColdD,
    ColdQD,
    WarmQD,
}

impl ColdStartKind {
    pub const ALL: [ColdStartKind; 4] = [
        ColdStartKind::ColdQ,
        ColdStartKind::ColdD,
        ColdStartKind::ColdQD,
        ColdStartKind::WarmQD,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ColdStartKind::ColdQ => "cold_q",
            ColdStartKind::ColdD => "cold_d",
            ColdStartKind::ColdQD => "cold_qd",
            ColdStartKind::WarmQD => "warm_qd",
        }
    }

    pub fn classify(session: &Session, known: &KnownIds) -> Self {
        let cold_q = session.queries.iter().any(|q| !known.has_query(q.query));
        let cold_d = session
            .impressions()
            .any(|(_, _, imp)| !known.has_doc(imp.doc));
        match (cold_q, cold_d) {
            (true, true) => ColdStartKind::ColdQD,
            (true, false) => ColdStartKind::ColdQ,
            (false, true) => ColdStartKind::ColdD,
            (false, false) => ColdStartKind::WarmQD,
        }
    }
}

/// The test set split into four mutually exclusive session sets.
#[derive(Debug, Clone, Default)]
pub struct ColdStartPartition {
    pub cold_q: Vec<Session>,
    pub cold_d: Vec<Session>,
    pub cold_qd: Vec<Session>,
    pub warm_qd: Vec<Session>,
}

impl ColdStartPartition {
    pub fn get(&self, kind: ColdStartKind) -> &[Session] {
        match kind {
            ColdStartKind::ColdQ => &self.cold_q,
            ColdStartKind::ColdD => &self.cold_d,
            ColdStartKind::ColdQD => &self.cold_qd,
            ColdStartKind::WarmQD => &self.warm_qd,
        }
    }

    pub fn len(&self) -> usize {
        ColdStartKind::ALL.iter().map(|&k| self.get(k).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn partition_cold_start(split: &DatasetSplit) -> ColdStartPartition {
    let known = KnownIds::from_sessions(&split.train);
    partition_with(&split.test, &known)
}

pub fn partition_with(test: &[Session], known: &KnownIds) -> ColdStartPartition {
    let mut out = ColdStartPartition::default();
    for s in test {
        let bucket = match ColdStartKind::classify(s, known) {
            ColdStartKind::ColdQ => &mut out.cold_q,
            ColdStartKind::ColdD => &mut out.cold_d,
            ColdStartKind::ColdQD => &mut out.cold_qd,
            ColdStartKind::WarmQD => &mut out.warm_qd,
        };
        bucket.push(s.clone());
    }
    out
}
