//! Reverse-mode automatic differentiation over dense 2-D matrices, with the
//! layers, optimizer and checkpoint format the click model needs.

mod checkpoint;
mod layers;
mod params;
mod tape;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, Manifest, CHECKPOINT_MAGIC};
pub use layers::{gru_cell, gru_sequence, Gru, GruVars, Linear};
pub use params::{adam_step, AdamConfig, Gradients, Init, Matrix, Param, ParamId, ParamStore};
pub use tape::{Tape, Var, PROB_EPS};
