//! Learning components: a small neural substrate, the advantage actor-critic,
//! experience buffers and the digital twin that synthesizes extra experience.

pub mod a2c;
pub mod dt;
pub mod error;
pub mod experience;
pub mod neural;

pub use a2c::{A2cConfig, ActionMode, ActorCritic, Losses};
pub use dt::{DigitalTwin, DtConfig, TwinLstm, TwinVae};
pub use error::{LearnError, Result};
pub use experience::{Buffers, Experience, Origin, RingBuffer};
