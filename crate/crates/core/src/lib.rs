//! Desk-scale MIMO symbol detection workbench.
//!
//! Simulates spatially correlated, time-varying Rayleigh fading channels,
//! runs classical detectors (zero forcing, MMSE, exhaustive maximum
//! likelihood) against learned ones (a per-channel unrolled detector and a
//! hypernetwork that generates its weights from channel state), and measures
//! symbol error rates with paired Monte Carlo trials.
//!
//! The learning stack is self-contained: a small reverse-mode tape over dense
//! real tensors, ADAM, and a reduce-on-plateau learning-rate scheduler. All
//! arithmetic is `f64`; every stochastic operation takes an explicit
//! [`rng::RngStream`] so runs are reproducible bit for bit.

pub mod autodiff;
pub mod bank;
pub mod channel;
pub mod detectors;
pub mod eval;
pub mod hypernet;
pub mod linalg;
pub mod mmnet;
pub mod modem;
pub mod rng;
