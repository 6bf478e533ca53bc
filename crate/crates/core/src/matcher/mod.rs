//! Exact cosine ranking over embedded paragraphs and requirements, in
//! either direction.

mod index;
mod rank;
mod store;

pub use index::{build_index, EmbeddingIndex, IndexEntry, IndexItem, ItemKind};
pub use rank::{recommend_paragraphs, recommend_requirements, top_k, top_k_embedding, Hit, RankedList, DEFAULT_K};
pub use store::{load_index, save_index, IndexManifest};
