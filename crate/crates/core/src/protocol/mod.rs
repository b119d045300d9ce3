//! The interactive training and evaluation protocols.

pub mod blinding;
pub mod compare;
pub mod evaluation;
pub mod message;
pub mod params;
pub mod stats;
pub mod training;

pub use blinding::{q_cdf, BlindingSampler};
pub use compare::secure_compare;
pub use evaluation::{classify_private, BobEvaluator, CarolEvaluator};
pub use message::{EncPayload, MessageType, ProtocolMessage, Stage};
pub use params::{ScalePlan, SessionParams, PROTOCOL_VERSION};
pub use stats::{OpCounters, StepGroup, StepTimings};
pub use training::{run_round, AlicePhase, AliceTrainer, BobPhase, BobTrainer};
