//! Subword vocabulary, text encoding, and the corruption operators used by
//! the masked-token and denoising training stages.

mod corrupt;
mod vocab;

pub use corrupt::{apply_mlm_mask, apply_tsdae_noise, MlmTarget};
pub use vocab::{decode, encode, train_vocab, TokenSequence, Vocabulary, CLS, HARD_MAX_LEN, MASK, PAD, SEP, UNK};
