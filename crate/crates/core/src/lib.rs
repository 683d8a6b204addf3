//! Ground-truth generation and simulation of knowledge-graph embedding
//! performance.
//!
//! The pipeline trains ComplEx over a hyperparameter grid ([`kge`]), records
//! the filtered rank of every test query ([`eval`]), computes per-query
//! structural features from the training graph ([`features`]) and trains
//! the TWIG simulator ([`twig`]) to predict those ranks, and therefore MRR,
//! for unseen hyperparameters and unseen graphs ([`harness`]).

pub mod error;
pub mod eval;
pub mod features;
pub mod harness;
pub mod kg;
pub mod kge;
pub mod optim;
pub mod synth;
pub mod twig;

pub use error::{Error, Result};
pub use kg::{parse_kg, Direction, KnowledgeGraph, Split, Triple};
