//! Exact computer algebra for contact-term structures of chiral
//! deformations on the torus.
//!
//! The crate is organized in layers:
//!
//! * [`scalar`], [`qmf`] — exact coefficient rings: Gaussian rationals
//!   with formal pi-powers, and quasi-modular forms in E2, E4, E6.
//! * [`fock`], [`winf`], [`contact`] — the free-boson vertex algebra,
//!   the W-subalgebra with its integrability condition, and the contact
//!   operators B, C on tensor slots.
//! * [`qseries`] — the independent oracle: exact truncated q,x-series
//!   in the region |q| < |x_1| < ... < |x_n| < 1.
//! * [`efunc`], [`correlator`] — symbolic almost-meromorphic elliptic
//!   functions on configuration space and the normal-ordered graph
//!   correlators.
//! * [`integrals`] — regularized and modified A-cycle integrals, mixed
//!   correlators, the contact equation and the master equation, run on
//!   two independent evaluation engines.
//!
//! All arithmetic is exact; there is no floating point anywhere. Values
//! are immutable and operations are pure, so everything can be shared
//! across threads freely.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod contact;
pub mod correlator;
pub mod efunc;
pub mod fock;
pub mod integrals;
pub mod qmf;
pub mod qseries;
pub mod scalar;
pub mod winf;

pub use scalar::Scalar;
