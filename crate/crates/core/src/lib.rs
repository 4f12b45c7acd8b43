//! Discrete-event simulator for TCP over a satellite ATM-UBR network.
//!
//! Cells, AAL5 frames, SACK TCP endpoints and switch buffers under
//! Selective Drop or tail drop, plus a harness that sweeps scenarios and
//! reports efficiency, fairness and cell loss.

pub mod aal5;
pub mod contract;
pub mod harness;
pub mod mac;
pub mod metrics;
pub mod network;
pub mod sim;
pub mod switch;
pub mod tcp;
pub mod topology;
