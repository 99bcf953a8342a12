//! Stack-augmented parser-interpreter sentence encoders.
//!
//! A shift-reduce interpreter whose stack holds `⟨h, c⟩` pairs composed by a
//! TreeLSTM layer, optionally steered by a tracking LSTM that can also predict the
//! transitions itself. The stack is stored as a write-once "thin stack" (one row per
//! timestep plus a queue of live row indices), which lets a whole minibatch of
//! differently shaped trees advance in lockstep.

pub mod bench;
pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod oracles;
pub mod tensor;
pub mod thin_stack;
pub mod trainer;
pub mod transitions;

pub use error::{Result, SpinnError};
