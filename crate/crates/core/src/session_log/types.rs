use std::collections::HashMap;
use std::fmt;

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            pub const UNKNOWN: $name = $name(0);

            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

dense_id!(
    /// Dense query index; 0 is reserved for unknown queries.
    QueryId
);
dense_id!(
    /// Dense document index; 0 is reserved for unknown documents.
    DocId
);
dense_id!(
    /// Dense vertical-type index; 0 is reserved for unknown verticals.
    VerticalId
);

/// Maps raw string tokens to dense indices in first-appearance order.
///
/// Index 0 is reserved for UNKNOWN and never maps back to a token.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary {
            index: HashMap::new(),
            // slot 0 is the UNKNOWN placeholder
            tokens: vec![String::new()],
        }
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&idx) = self.index.get(token) {
            return idx;
        }
        let idx = self.tokens.len() as u32;
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), idx);
        idx
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: u32) -> Option<&str> {
        if idx == 0 {
            return None;
        }
        self.tokens.get(idx as usize).map(String::as_str)
    }

    /// Number of rows an embedding table needs, including the UNKNOWN row.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// True when no token has been interned.
    pub fn is_empty(&self) -> bool {
        self.tokens.len() == 1
    }

    /// Tokens with their indices, in index order (UNKNOWN excluded).
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (i as u32, t.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpressionRecord {
    pub doc: DocId,
    /// 1-based rank on the result page.
    pub position: u32,
    pub vertical: VerticalId,
    pub click: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub query: QueryId,
    /// Ordered by ascending position; never empty.
    pub impressions: Vec<ImpressionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    /// Queries in issue order; never empty.
    pub queries: Vec<QueryRecord>,
}

impl Session {
    pub fn impression_count(&self) -> usize {
        self.queries.iter().map(|q| q.impressions.len()).sum()
    }

    /// All impressions in session order, tagged with their query slot.
    pub fn impressions(&self) -> impl Iterator<Item = (usize, &QueryRecord, &ImpressionRecord)> {
        self.queries
            .iter()
            .enumerate()
            .flat_map(|(i, q)| q.impressions.iter().map(move |imp| (i, q, imp)))
    }

    pub fn max_position(&self) -> u32 {
        self.impressions()
            .map(|(_, _, imp)| imp.position)
            .max()
            .unwrap_or(0)
    }
}

/// The three vocabularies shared by every split of one corpus.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub queries: Vocabulary,
    pub docs: Vocabulary,
    pub verticals: Vocabulary,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }
}
