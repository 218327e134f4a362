//! Simulator and learning pipeline for UAV-assisted proactive link handoff:
//! synthetic scenes and sensors, a geometric mmWave link model with
//! decode-and-forward relays, the UAP-Net fusion network on a small
//! reverse-mode autodiff engine, two-stage training and evaluation studies.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod nnet;
pub mod percept;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod train;
pub mod workflow;
