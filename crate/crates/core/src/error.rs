use std::fmt;

use thiserror::Error;

/// Which of the two junction trees an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeKind {
    /// The tree carrying Möbius potentials.
    Mobius,
    /// The tree carrying commonality potentials.
    Commonality,
}

impl fmt::Display for TreeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeKind::Mobius => f.write_str("m-tree"),
            TreeKind::Commonality => f.write_str("q-tree"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("scope error: {0}")]
    Scope(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("invalid commonality function: Q(empty set) = {0}, expected 1")]
    InvalidCommonality(f64),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("size guard exceeded: {what} is {size}, limit {limit}")]
    SizeGuard {
        what: &'static str,
        size: u64,
        limit: u64,
    },

    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),

    #[error("evidence over {scope} is not contained in any clique of the {tree}")]
    NonLocalEvidence { tree: TreeKind, scope: String },

    #[error("query target over {scope} is not contained in any clique of the {tree}")]
    NonLocalQuery { tree: TreeKind, scope: String },

    #[error("evidence event is empty")]
    EmptyEvidence,

    #[error("logical contradiction: the evidence has upper probability 0 ({0})")]
    Contradiction(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("m-side and q-side joints are not dual: max deviation {max_deviation:e} at {at}")]
    InconsistentPair { max_deviation: f64, at: String },

    #[error("lower probability is not 2-monotone ({0} violating pairs)")]
    NotTwoMonotone(usize),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
