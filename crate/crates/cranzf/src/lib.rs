//! Downlink joint zero-forcing over a cluster of multi-antenna transmitters
//! with rate-limited CSI sharing: Monte Carlo simulation of the standard and
//! precode-and-quantize (PaQ) feedback schemes, plus closed-form bounds on
//! the rate loss that quantized feedback costs.
//!
//! The crate is organized around the feedback loop:
//!
//! * [`channel`] — cluster configuration, pathloss, placement geometry and
//!   block-fading channel draws;
//! * [`rvq`] — random vector quantization of channel/beamformer directions,
//!   with an explicit codebook search and a distribution-exact surrogate for
//!   large bit budgets;
//! * [`precoding`] — the joint zero-forcing precoder, the PaQ allocation,
//!   front-end matrices, masked ZF and power backoff;
//! * [`rates`] — SINR, ergodic-rate Monte Carlo and the closed-form
//!   perfect-CSI rate `φ(T, ρ)`;
//! * [`bounds`] — closed-form rate-gap bounds and lower-bound reports;
//! * [`harness`] — experiment sweeps, result tables, plots and the CLI
//!   entry points;
//! * [`linalg`], [`special`] — the small dense complex linear algebra and
//!   special functions everything above rests on.
//!
//! A narrative guide with runnable examples lives in `book/`; its code
//! blocks are compiled as doctests.

// `!(x > 0.0)` rejects NaN along with the out-of-domain values; the
// suggested `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod harness;
pub mod linalg;
pub mod precoding;
pub mod rates;
pub mod rvq;
pub mod special;

#[cfg(doctest)]
mod book;
