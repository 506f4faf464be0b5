//! Pose- and text-guided human motion video synthesis harness.
//!
//! The crate is split along the data flow of a run:
//!
//! - [`media`]: pixel buffers, masks, skeletons and their on-disk formats.
//! - [`nss`]: BRISQUE and NIQE no-reference quality scores.
//! - [`consistency`]: input-alignment and temporal-consistency metrics.
//! - [`compose`]: mask morphology, feathering, compositing and harmonic fill.
//! - [`backends`]: the interfaces to every neural capability, with procedural
//!   mocks and an HTTP adapter.
//! - [`pipeline`]: prompt refinement, dataset builders, the background stage,
//!   the autoregressive synthesis loop and video evaluation.
//! - [`report`]: the thirteen-metric report and its JSON/CSV/Markdown forms.
//!
//! Frame-level work is data parallel. With the default `parallel` feature the
//! [`Execution::Parallel`] strategy runs on rayon; without it every strategy
//! falls back to a sequential loop. Reductions always happen in frame order, so
//! both strategies produce bitwise-identical results.

pub mod backends;
pub mod compose;
pub mod consistency;
mod exec;
pub mod media;
pub mod nss;
pub mod pipeline;
pub mod report;

pub use exec::Execution;
