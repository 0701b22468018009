//! Exact subgraph matching on vertex-labeled undirected graphs with learned
//! monotonic vertex embeddings.
//!
//! The pipeline has an offline and an online half:
//!
//! * offline: [`train::train`] learns a per-label embedding table that keeps
//!   dominance between vertex embeddings rare, and [`index::build_index`]
//!   orders the data vertices by a one-dimensional key inside a bulk-loaded
//!   B+-tree, together with hop- and degree-based bounding boxes;
//! * online: [`matcher::match_query`] retrieves candidates by a key range
//!   scan followed by a cascade of necessary conditions, orders the query
//!   vertices greedily and enumerates every injective, label- and
//!   edge-preserving mapping by backtracking.
//!
//! Filtering never discards a vertex that takes part in a true match, whatever
//! the embedding table, so [`matcher::oracle_match`] returns the same set.

pub mod embedding;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod index;
pub mod matcher;
pub mod persist;
pub mod train;

#[cfg(test)]
pub(crate) mod test_support;

pub use embedding::{EmbeddingError, EmbeddingSet, LabelEmbeddingTable};
pub use graph::{Graph, GraphError, LabelId, VertexId};
pub use index::{build_index, ILabelIndex, IndexConfig, IndexError};
pub use matcher::{match_query, match_query_with, oracle_match, MatchError, MatchSet, PruneConfig};
pub use persist::PersistError;
pub use train::{train, TrainConfig, TrainError};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}
