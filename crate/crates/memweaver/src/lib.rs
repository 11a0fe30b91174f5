//! Dual-memory personalization over a user's textual history.
//!
//! The library turns a chronologically ordered history into two memories:
//!
//! - a **behavioral memory**: the history becomes a graph (temporal edges
//!   between consecutive behaviors, semantic edges inside K-means clusters)
//!   and a context-aware random walk extracts the nodes most relevant to a
//!   query;
//! - a **cognitive memory**: the history is segmented at semantic
//!   breakpoints, each segment is summarized, and the local summaries are
//!   synthesized into one global preference profile.
//!
//! Both memories are assembled into task prompts and scored with the usual
//! personalization metrics (accuracy/F1, MAE/RMSE, ROUGE-1/ROUGE-L).
//! Embedding and generation back-ends are pluggable; the shipped mocks make
//! every pipeline stage deterministic and testable offline.

pub mod cognition;
pub mod error;
pub mod eval;
pub mod graph;
pub mod history;
pub mod par;
pub mod pipeline;
pub mod promptgen;
pub mod providers;
pub mod store;
pub mod walk;

pub(crate) mod vecmath;

pub use error::{Error, Result};
pub use history::{BehaviorRecord, HistoryFormat, Query, TaskId, UserHistory};
pub use store::MemoryStore;
