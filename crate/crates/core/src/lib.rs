//! Multimodal referring-expression resolution.
//!
//! An instruction such as "pick up the black clipper beside this tool" is
//! compiled into a typed reasoning program, a pointing gesture is turned
//! into per-object scores, and a trainable neural state machine runs the
//! program over a probabilistic scene graph to pick the referent.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod embeddings;
pub mod engine;
pub mod error;
pub mod gesture;
pub mod graph;
pub mod instruction;
pub mod lexicon;
pub mod reasoner;
pub mod scene;
pub mod symbolic;

pub use embeddings::{EmbedMode, EmbeddingTable};
pub use engine::{Engine, EvalReport, Pointing};
pub use error::{Error, Result};
pub use gesture::{PointingResult, Trajectory};
pub use graph::{build_scene_graph, GraphConfig, SceneGraph};
pub use instruction::{ReasoningProgram, ReasoningStep, StepType, StopWords};
pub use lexicon::{Attribute, Lexicon, Relation};
pub use reasoner::{ModelParams, ReasoningTrace, TrainConfig};
pub use scene::{ObjectInstance, Scene, UserPose, Vec3};
