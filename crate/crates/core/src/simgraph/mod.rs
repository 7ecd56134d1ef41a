//! Admission-similarity graph: exact cosine range search, CSR storage,
//! statistics and the on-disk format.

mod graph;
mod io;
mod search;

pub use graph::{graph_stats, GraphStats, SimilarityGraph};
pub use io::{decode_graph, encode_graph, load_graph, save_graph, GRAPH_MAGIC, GRAPH_VERSION};
pub use search::{range_search, range_search_with, SearchOptions, DEFAULT_TILE, SIMILARITY_SLACK};
