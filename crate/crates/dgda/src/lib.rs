//! Generative graph domain adaptation with disentangled latent variables.
//!
//! The crate trains a variational graph auto-encoder whose latent space is
//! split into domain, semantic, and noise groups, disentangled by a domain
//! classifier, a label classifier, and a perturbation reconstructor. A
//! two-phase optimizer alternates between the clean-data modules and the
//! noise modules. Synthetic domain-shift benchmarks, baselines, and an
//! experiment CLI round out the toolkit.

pub mod cli;
pub mod eval;
pub mod graph;
pub mod model;
pub mod seed;
pub mod tensor;
pub mod trainer;
