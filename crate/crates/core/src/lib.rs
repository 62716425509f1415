//! Joint credibility analysis for news communities.

pub mod ccrf;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod fmt;
pub mod pipeline;
pub mod regressors;
pub mod stylistic;
pub mod topics;

pub use error::{Error, Result};
