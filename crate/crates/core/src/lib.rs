//! Simulation library for daytime satellite-to-ground entanglement-based (BBM92)
//! quantum key distribution over single-mode-fiber-coupled receivers.
//!
//! The library is organised as a pipeline:
//!
//! 1. [`orbit`] — pass geometry (range and elevation versus time) for two
//!    ground stations, from a circular-orbit propagator or a trajectory file;
//! 2. [`turbulence`] — layered Cn² profiles and the integrated line-of-sight
//!    parameters (Fried parameter, isoplanatic angle, Greenwood frequency);
//! 3. [`adaptive_optics`] — Zernike modal residual budgets after partial AO
//!    correction and the Monte-Carlo distribution of single-mode-fiber
//!    coupling efficiency;
//! 4. [`channel`] — pointing-jitter beam wandering, atmospheric absorption,
//!    and the per-point probability distribution of transmission efficiency;
//! 5. [`qkd`] — BBM92 coincidence rate, QBER, and asymptotic/finite-size
//!    secret key rates;
//! 6. [`scenario`] / [`pipeline`] — end-to-end orchestration from a scenario
//!    file, radial-order sweeps, and tabular output emission.
//!
//! Monte-Carlo draws and per-point channel evaluations are data-parallel.
//! With the default `parallel` feature they run on a rayon pool with
//! deterministic, scheduling-independent aggregation; without it the same
//! code runs sequentially and produces bit-identical results.

pub mod adaptive_optics;
pub mod channel;
pub mod dist;
pub mod orbit;
pub mod pipeline;
pub mod qkd;
pub mod scenario;
pub mod turbulence;
pub mod zernike;

mod exec;
mod math;

pub use exec::set_thread_count;
