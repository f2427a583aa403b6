//! k-free lattice points `V(Lambda, k)` as executable mathematics.
//!
//! A point of a unimodular lattice is k-free when the gcd of its
//! coordinates is divisible by no nontrivial k-th power; `k = 1` gives the
//! visible points. This crate generates these sets, measures their density,
//! constructs holes, evaluates exact patch frequencies and the pure-point
//! diffraction, and checks dynamical properties of the hull on finite
//! windows.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod diffraction;
pub mod dynamics;
pub mod error;
pub mod kfree;
pub mod lattice;
pub mod par;
pub mod patches;

pub use diffraction::{SpectrumPoint, SpectrumWindow};
pub use dynamics::{ConfigDistance, ProximalityWitness};
pub use error::{Error, Result};
pub use kfree::{Configuration, HoleCertificate, KFreeParams};
pub use lattice::{BallKind, DualPoint, Lattice, LatticePoint};
pub use par::Execution;
pub use patches::{FrequencyEngine, FrequencyResult, Patch, PatchCensus};
