//! Vocabularies, synthetic tasks, batching and evaluation-time corruption.

mod batch;
mod corrupt;
mod task;
mod tsv;
mod vocab;

pub use batch::{make_batches, Batch};
pub use corrupt::{corrupt_source, CorruptionMode};
pub use task::{generate_task, Dataset, Origin, TaskKind};
pub use tsv::load_tsv;
pub use vocab::{is_special, Vocabulary};

pub type TokenId = u32;
pub type TokenSequence = Vec<TokenId>;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const FIRST_REAL: TokenId = 3;
