//! Back-off n-gram models: counting, modified Kneser-Ney estimation,
//! scoring, pruning and ARPA I/O.

pub mod arpa;
pub mod counts;
pub mod kn;
pub mod model;
pub mod prune;

pub use arpa::{parse_arpa, read_arpa, to_arpa_string, write_arpa};
pub use counts::{count_ngrams, NgramCountTable};
pub use kn::{estimate_discounts, estimate_kn_model, train_kn, Discount, DiscountSet};
pub use model::{
    BackoffModel, NgramEntry, PerplexityMode, SentenceScore, TokenId, Vocab, BOS_ID, EOS_ID, LOG_ZERO, UNK_ID,
};
pub use prune::{footprint, prune_to_budget, prune_with_threshold, skeleton_footprint};
