//! Context-aware chat translation.
//!
//! Conversations are translated turn by turn. Each turn is sent with the two
//! previous turns verbatim and a short summary of everything older.

pub mod backend;
pub mod context;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod prompting;
