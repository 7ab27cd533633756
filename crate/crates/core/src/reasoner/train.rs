use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SceneGraph;
use crate::instruction::ReasoningProgram;

use super::{grad, init_params, run, Gradient, ModelParams};

/// A compiled episode ready for the state machine.
#[derive(Clone, Debug)]
pub struct Example {
    pub program: ReasoningProgram,
    pub graph: SceneGraph,
    /// Node index of the gold object.
    pub gold: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 1,
            seed: 0,
            init_noise: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub params: ModelParams,
    /// Mean loss of the initial parameters over the training set.
    pub initial_loss: f64,
    /// Mean loss over each epoch, accumulated while updating.
    pub epoch_losses: Vec<f64>,
}

/// Seeded SGD from identity-plus-noise initial parameters.
///
/// Each batch moves the parameters by the mean episode gradient. Episode
/// gradients in a batch are computed in parallel and summed in order.
pub fn train(examples: &[Example], config: &TrainConfig) -> Result<TrainReport> {
    let first = examples
        .first()
        .ok_or_else(|| Error::Invalid("training set is empty".into()))?;
    let dim = first
        .graph
        .dim()
        .ok_or_else(|| Error::Invalid("training graph has no nodes".into()))?;
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::Invalid("batch size and learning rate must be positive".into()));
    }
    let mut params = init_params(dim, config.seed, config.init_noise)?;
    let initial_loss = mean_loss(examples, &params)?;

    // a separate stream keeps the shuffle independent of the init draw
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<(f64, Gradient)> = batch
                .par_iter()
                .map(|&i| {
                    let ex = &examples[i];
                    grad(&ex.program, &ex.graph, ex.gold, &params)
                })
                .collect::<Result<_>>()?;
            let mut sum = Gradient::zeros(dim);
            for (l, g) in &results {
                total += l;
                sum.add_assign(g);
            }
            let step = config.learning_rate / batch.len() as f64;
            for (w, g) in params.w.iter_mut().zip(&sum.w) {
                for (x, d) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *x -= step * d;
                }
            }
        }
        epoch_losses.push(total / examples.len() as f64);
    }
    Ok(TrainReport {
        params,
        initial_loss,
        epoch_losses,
    })
}

pub fn mean_loss(examples: &[Example], params: &ModelParams) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let trace = run(&ex.program, &ex.graph, params)?;
            Ok(-trace.final_p()[ex.gold].max(super::MIN_PROB).ln())
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / examples.len() as f64)
}

/// Predicted node index for every example, in order.
pub fn evaluate_examples(examples: &[Example], params: &ModelParams) -> Result<Vec<usize>> {
    examples
        .par_iter()
        .map(|ex| run(&ex.program, &ex.graph, params).map(|t| t.prediction_index()))
        .collect()
}
