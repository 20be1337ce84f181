//! Score backends: recorded traces, a synthetic simulator and a remote service.

#[cfg(feature = "remote")]
pub mod remote;
pub mod rng;
pub mod sampling;
pub mod synthetic;
pub mod trace;

pub use sampling::{collect_samples, Sampler};
pub use synthetic::{synthesize_instance, synthesize_suite, SyntheticSpec};
pub use trace::{load_trace, parse_trace, save_trace, InstanceTrace, LabelScores, TraceSample};
