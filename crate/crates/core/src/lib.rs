//! Online shortest-path selection on weighted DAGs under partial feedback.
//!
//! The learner picks a source-to-sink path each round, the environment assigns
//! a loss in `[0, 1]` to every edge, and the learner only sees part of that
//! assignment:
//!
//! - [`edge_bandit`]: the losses of the edges on the chosen path.
//! - [`label_efficient`]: the same, but only on rounds where it pays to ask.
//! - [`tracking`]: edge feedback, competing with a path sequence that may
//!   switch a bounded number of times.
//! - [`restricted`]: only the total loss of the chosen path.
//!
//! All algorithms run exponential weights over exponentially many paths in
//! time linear in the number of edges, using the weight-pushing recursions in
//! [`weight_dp`]. [`harness`] runs seeded regret experiments and writes CSV,
//! metadata and plots.

pub mod dag;
pub mod edge_bandit;
pub mod error;
pub mod harness;
pub mod label_efficient;
pub mod restricted;
pub mod tracking;
pub mod weight_dp;

pub use dag::{CoverSet, Dag, EdgeId, Path, VertexId};
pub use error::{FeedbackError, ParamError};
