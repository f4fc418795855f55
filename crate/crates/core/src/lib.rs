//! Unsupervised, erasure-based evidence sentence extraction.
//!
//! A classifier is trained on statement/document pairs and checkpointed
//! after every epoch. Each sentence is scored by how much erasing it moves
//! the gold-class raw score, a checkpoint is chosen by balancing test
//! accuracy against how concentrated those changes are, and the top-k
//! sentences become the extracted evidence. An evidence-only corpus can then
//! be used for retraining.
//!
//! ```no_run
//! use u3e::corpus::{load_corpus, Format};
//! use u3e::pipeline::{run_u3e, RunConfig};
//!
//! let corpus = load_corpus("data.jsonl", Format::Jsonl)?;
//! let result = run_u3e(&corpus, &RunConfig::default())?;
//! println!("{}", result.selection.render_table());
//! # Ok::<(), u3e::Error>(())
//! ```

pub mod baselines;
pub mod corpus;
pub mod erasure;
mod error;
pub mod eval;
pub mod pipeline;
pub mod scorer;
pub mod selection;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
