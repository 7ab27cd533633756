//! The full pipeline bundled with its configuration: instruction
//! compilation, gesture scoring, graph construction and the state machine.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{Episode, Template};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::gesture::{estimate_pointing, Bandwidth, DetectionParams, GroundPoint, PointingResult, Trajectory};
use crate::graph::{build_scene_graph, GraphConfig, SceneGraph};
use crate::instruction::{compile_instruction, extract_program, parse_conllu, ReasoningProgram, StopWords};
use crate::lexicon::Lexicon;
use crate::reasoner::{self, Example, ModelParams, ReasoningTrace, TrainConfig, TrainReport};
use crate::scene::Scene;

/// Kernel width used when the gesture is a single clicked ground point.
pub const CLICK_BANDWIDTH: f64 = 0.25;

#[derive(Clone, Debug)]
pub struct Engine {
    pub lexicon: Lexicon,
    pub embeddings: EmbeddingTable,
    pub stopwords: StopWords,
    pub graph: GraphConfig,
    pub detection: DetectionParams,
    pub bandwidth: Bandwidth,
}

/// How the gesture reaches the engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pointing {
    Trajectory(Trajectory),
    Target { target: GroundPoint },
}

impl Engine {
    pub fn new(lexicon: Lexicon, embeddings: EmbeddingTable) -> Self {
        Engine {
            lexicon,
            embeddings,
            stopwords: StopWords::default(),
            graph: GraphConfig::default(),
            detection: DetectionParams::default(),
            bandwidth: Bandwidth::Scott,
        }
    }

    /// Program from a pre-parsed CoNLL-U tree when given, else from the
    /// built-in template grammar.
    pub fn compile(&self, instruction: &str, conllu: Option<&str>) -> Result<ReasoningProgram> {
        match conllu {
            Some(text) => {
                let tree = parse_conllu(text)?;
                let mut program = extract_program(&tree, &self.lexicon, &self.stopwords, &self.embeddings)?;
                if !instruction.is_empty() {
                    program.instruction = instruction.to_string();
                }
                Ok(program)
            }
            None => compile_instruction(instruction, &self.lexicon, &self.stopwords, &self.embeddings),
        }
    }

    pub fn point(&self, scene: &Scene, pointing: &Pointing) -> Result<PointingResult> {
        match pointing {
            Pointing::Trajectory(traj) => estimate_pointing(traj, scene, &self.detection, self.bandwidth),
            Pointing::Target { target } => {
                PointingResult::from_points(vec![*target], scene, Bandwidth::Fixed(CLICK_BANDWIDTH))
            }
        }
    }

    pub fn graph(&self, scene: &Scene, pointing: Option<&PointingResult>) -> Result<SceneGraph> {
        build_scene_graph(scene, &self.lexicon, &self.embeddings, &self.graph, pointing)
    }

    pub fn reason(
        &self,
        scene: &Scene,
        program: &ReasoningProgram,
        pointing: Option<&PointingResult>,
        params: &ModelParams,
    ) -> Result<ReasoningTrace> {
        if params.dim != self.embeddings.dim() {
            return Err(Error::Dimension {
                expected: self.embeddings.dim(),
                actual: params.dim,
            });
        }
        let graph = self.graph(scene, pointing)?;
        reasoner::run(program, &graph, params)
    }

    /// Compiled episode; `no_gesture` ignores the trajectory.
    pub fn prepare(&self, episode: &Episode, no_gesture: bool) -> Result<Example> {
        let program = self.compile(&episode.instruction, episode.conllu.as_deref())?;
        let pointing = match (&episode.trajectory, no_gesture) {
            (Some(traj), false) => Some(estimate_pointing(
                traj,
                &episode.scene,
                &self.detection,
                self.bandwidth,
            )?),
            _ => None,
        };
        let graph = self.graph(&episode.scene, pointing.as_ref())?;
        let gold = graph
            .node_index(&episode.gold_id)
            .ok_or_else(|| Error::Invalid(format!("gold object `{}` not in scene", episode.gold_id)))?;
        Ok(Example { program, graph, gold })
    }

    pub fn prepare_all(&self, episodes: &[&Episode], no_gesture: bool) -> Result<Vec<Example>> {
        episodes.par_iter().map(|e| self.prepare(e, no_gesture)).collect()
    }

    pub fn train(&self, episodes: &[&Episode], config: &TrainConfig) -> Result<TrainReport> {
        let examples = self.prepare_all(episodes, false)?;
        reasoner::train(&examples, config)
    }

    pub fn evaluate(&self, episodes: &[&Episode], params: &ModelParams, no_gesture: bool) -> Result<EvalReport> {
        if params.dim != self.embeddings.dim() {
            return Err(Error::Dimension {
                expected: self.embeddings.dim(),
                actual: params.dim,
            });
        }
        let examples = self.prepare_all(episodes, no_gesture)?;
        let predicted = reasoner::evaluate_examples(&examples, params)?;
        let predictions: Vec<Prediction> = episodes
            .iter()
            .zip(&examples)
            .zip(predicted)
            .map(|((ep, ex), p)| Prediction {
                id: ep.id.clone(),
                template: ep.template,
                gold: ep.gold_id.clone(),
                predicted: ex.graph.nodes[p].object_id.clone(),
                correct: p == ex.gold,
            })
            .collect();
        Ok(EvalReport::from_predictions(predictions))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub template: Template,
    pub gold: String,
    pub predicted: String,
    pub correct: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    pub n: usize,
}

impl Accuracy {
    fn of<'a>(it: impl Iterator<Item = &'a Prediction>) -> Self {
        let (mut n, mut correct) = (0, 0);
        for p in it {
            n += 1;
            correct += p.correct as usize;
        }
        Accuracy {
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n: usize,
    /// Episodes whose instruction uses a demonstrative.
    pub demonstrative: Accuracy,
    pub by_template: BTreeMap<Template, Accuracy>,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let all = Accuracy::of(predictions.iter());
        let demonstrative = Accuracy::of(predictions.iter().filter(|p| p.template.has_demonstrative()));
        let mut by_template = BTreeMap::new();
        for t in Template::ALL {
            let acc = Accuracy::of(predictions.iter().filter(|p| p.template == t));
            if acc.n > 0 {
                by_template.insert(t, acc);
            }
        }
        EvalReport {
            accuracy: all.accuracy,
            n: all.n,
            demonstrative,
            by_template,
            predictions,
        }
    }
}
