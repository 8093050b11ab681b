//! Pipeline for relating visual-cortex alignment of vision-language models to
//! their susceptibility to multi-turn adversarial pressure.
//!
//! The crate is organized as three stages plus shared plumbing:
//!
//! * [`encoder`] — stage 1: cross-validated ridge regression from frozen
//!   vision-encoder features to voxelwise fMRI responses, aggregated into
//!   per-ROI alignment scores.
//! * [`protocol`] — stage 2: the two-turn evaluation protocol that presents a
//!   false claim about an image, escalates on disagreement, and records
//!   per-trial outcomes; includes scripted and remote-HTTP responders.
//! * [`analysis`] — stage 3: the statistical linkage between stage-1 scores
//!   and stage-2 rates (correlations, bootstrap CIs, permutation tests,
//!   group contrasts, cross-correlation matrix, report emission).
//! * [`parser`] — the cascading classifier that maps free-form model text to
//!   agree / disagree / unclear verdicts.
//! * [`stats`] — the numerical kernels backing stage 3.
//! * [`dataio`] — on-disk formats (feature/response matrices, prompt and
//!   trial-log JSONL) and the embedded reference tables.
//! * [`rng`] — the deterministic pseudo-random sequence every stochastic
//!   component draws from.
//!
//! Determinism is a design requirement, not an afterthought: every public
//! entry point that consumes randomness takes an explicit `u64` seed, and
//! identical inputs plus an identical seed produce byte-identical outputs
//! regardless of worker count.

pub mod analysis;
pub mod dataio;
pub mod encoder;
pub mod parser;
pub mod protocol;
pub mod rng;
pub mod stats;
