//! Temporal detection toolkit: position-aware clustering for box
//! post-processing, temporally calibrated convolution, ConvLSTM queue
//! aggregation, COCO-style evaluation, synthetic sequences and file formats.

pub mod config;
pub mod eval;
pub mod geom;
pub mod gtconv;
pub mod hqim;
pub mod io;
pub mod model;
pub mod pac;
pub mod synth;
pub mod tensor;
