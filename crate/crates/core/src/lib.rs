//! Long-context symbolic music modeling toolkit.
//!
//! The crate covers the full pipeline: MIDI parsing and event tokenization
//! ([`midi`]), training-segment sampling ([`segment`]), attention mask
//! construction ([`mask`]), a cascade cross-attention sequence model with
//! hand-derived gradients ([`model`]), corpus diagnostics ([`analysis`]),
//! and a distribution-overlap evaluation framework ([`eval`]).

pub mod analysis;
pub mod eval;
pub mod mask;
pub mod midi;
pub mod model;
pub mod segment;
