pub mod bpe;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod mix;
pub mod morfseg;
pub mod genaug;
pub mod ngram;
pub mod subword;
pub mod synth;

pub use error::{Error, Result};
