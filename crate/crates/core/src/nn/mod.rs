//! Dense networks, their reverse passes, and delay lines.

mod delay_line;
pub mod gradcheck;
mod mlp;

pub use delay_line::TappedDelayLine;
pub use mlp::{Activation, ForwardCache, Gradients, Layer, LayerGradients, Mlp, DEFAULT_INIT_SCALE};
