//! Simulation engine for a sponsored question-answering auction.
//!
//! An organic answer is fused with each advertiser's ad through a linear
//! mixture of unigram language models. Sponsored answers are scored with a
//! shifted symmetric cross-entropy similarity: against the ad for the
//! advertiser's value, against the organic answer for the user's utility.
//! The platform shows the answer with the highest user utility plus bid and
//! charges a second-price style payment.
//!
//! [`game_analysis`] checks the mechanism's incentive properties by search
//! and reproduces two counterexamples exactly.

pub mod auction;
pub mod cli;
pub mod error;
pub mod game_analysis;
pub mod scenario_io;
pub mod similarity;
pub mod text_lm;

pub use error::{Error, Result};
