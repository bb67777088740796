//! Contrastive learning on text-attributed graphs with decoupled relevant and
//! irrelevant text views plus a graph smoothness penalty.
//!
//! Node texts are split into task-relevant and task-irrelevant parts, the
//! three views are embedded, and a GCN encoder is trained to pull the
//! original view toward its relevant part while pushing it from irrelevant
//! parts, with a neighborhood-smoothing term on the relevant view.

pub mod analysis;
pub mod decoupler;
pub mod embedding;
pub mod encoder;
pub mod graph;
pub mod lexicon;
pub mod objectives;
pub mod report;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use embedding::ViewTriple;
pub use encoder::{Encoder, EncoderParams};
pub use graph::{NormalizedAdjacency, TextAttributedGraph};
pub use objectives::LossReport;
pub use report::Metrics;
pub use trainer::{train, TrainConfig};
