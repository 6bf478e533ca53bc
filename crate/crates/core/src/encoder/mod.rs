//! Shared-weight transformer bi-encoder: token embeddings, a pre-norm
//! transformer stack, mean pooling, and the cosine scoring head.

pub(crate) mod blocks;
mod checkpoint;
mod config;
mod embedding;
mod forward;
mod weights;

pub use checkpoint::{encode_text, Checkpoint, StageRecord, CHECKPOINT_FORMAT_VERSION};
pub use config::EncoderConfig;
pub use embedding::{cosine_similarity, SentenceEmbedding};
pub use forward::{bind_encoder, embed_sequence, encode_states, forward_tokens, mean_pool, DropoutPlan};
pub use weights::{init_params, EncoderWeights, ParamLayout};
