//! Conditional logistic BART for case-crossover designs.
//!
//! The exposure log odds ratio of each matched stratum is modelled as a sum
//! of regression trees over individual-level moderators, inside the
//! conditional logistic likelihood. [`sampler::run_chain`] draws from the
//! posterior; [`posterior`] summarizes the draws; [`simbench`] reproduces
//! the simulation benchmark.

pub mod cli;
pub mod clr;
pub mod config;
pub mod draws;
pub mod forest;
pub mod moves;
pub mod numeric;
pub mod posterior;
pub mod report;
pub mod sampler;
pub mod simbench;
pub mod strata;
pub mod updates;

pub use clr::{clr_fit, ClrFit};
pub use forest::{Node, SplitRule, Tree};
pub use sampler::{compute_waic, run_chain, Draw, PosteriorDraws, SamplerConfig};
pub use strata::{ingest_dataset, Dataset, Schema, Stratum};
