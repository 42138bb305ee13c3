//! Synthetic topic discovery from interaction structure alone: bipartite
//! graph, truncated random walks, skip-gram node embeddings, and
//! Gaussian-mixture clustering whose components become the topics.

pub mod embedding;
pub mod gmm;
pub mod graph;

pub use embedding::{train_embeddings, EmbeddingTable, SkipGramConfig, SkipGramFit};
pub use gmm::{assign_topics, fit_gmm, GmmConfig, GmmParams};
pub use graph::{generate_walks, BipartiteGraph};
