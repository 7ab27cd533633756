//! Neural state machine over a probabilistic scene graph.
//!
//! Each reasoning step scores nodes against the step (attribute relevance)
//! and edges against it (relation relevance), then mixes an attribute
//! filter with a hop along matching edges, weighted by the step's
//! probability of being a relation.

mod backward;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{argmax, SceneGraph};
use crate::instruction::{ReasoningProgram, ReasoningStep};
use crate::lexicon::Attribute;

pub use backward::{grad, Gradient};
pub use train::{evaluate_examples, mean_loss, train, Example, TrainConfig, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// Index of the relation matrix in [`ModelParams::w`]; attribute matrices
/// use [`Attribute::index`].
pub const REL: usize = 5;

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("matrix entries must be finite".into()));
        }
        Ok(Matrix { n, data })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .map(<[f64]>::to_vec)
            .take(self.n)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `Mᵀ v`
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &vi) in self.data.chunks(self.n.max(1)).zip(v) {
            if vi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(row) {
                *o += vi * m;
            }
        }
        out
    }

    /// `self += scale · a bᵀ`
    pub fn add_outer(&mut self, scale: f64, a: &[f64], b: &[f64]) {
        for (row, &ai) in self.data.chunks_mut(self.n.max(1)).zip(a) {
            let s = scale * ai;
            if s == 0.0 {
                continue;
            }
            for (m, bj) in row.iter_mut().zip(b) {
                *m += s * bj;
            }
        }
    }
}

/// The six trainable matrices and the softmax temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsFile", into = "ParamsFile")]
pub struct ModelParams {
    pub dim: usize,
    pub temperature: f64,
    /// Name, color, shape, size, demonstrative, relation.
    pub w: [Matrix; 6],
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    dim: usize,
    temperature: f64,
    #[serde(rename = "W")]
    w: MatricesFile,
}

#[derive(Serialize, Deserialize)]
struct MatricesFile {
    name: Vec<Vec<f64>>,
    color: Vec<Vec<f64>>,
    shape: Vec<Vec<f64>>,
    size: Vec<Vec<f64>>,
    demonstrative: Vec<Vec<f64>>,
    rel: Vec<Vec<f64>>,
}

impl TryFrom<ParamsFile> for ModelParams {
    type Error = Error;
    fn try_from(f: ParamsFile) -> Result<Self> {
        let m = f.w;
        let w = [m.name, m.color, m.shape, m.size, m.demonstrative, m.rel].map(Matrix::from_rows);
        let [a, b, c, d, e, r] = w;
        let params = ModelParams {
            dim: f.dim,
            temperature: f.temperature,
            w: [a?, b?, c?, d?, e?, r?],
        };
        params.validate()?;
        Ok(params)
    }
}

impl From<ModelParams> for ParamsFile {
    fn from(p: ModelParams) -> Self {
        let [name, color, shape, size, demonstrative, rel] = p.w.map(|m| m.rows());
        ParamsFile {
            dim: p.dim,
            temperature: p.temperature,
            w: MatricesFile {
                name,
                color,
                shape,
                size,
                demonstrative,
                rel,
            },
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Invalid("parameter dimension must be positive".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Invalid(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        for m in &self.w {
            if m.dim() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    actual: m.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("params serialize");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn attribute_matrix(&self, attribute: Attribute) -> &Matrix {
        &self.w[attribute.index()]
    }

    pub fn relation_matrix(&self) -> &Matrix {
        &self.w[REL]
    }
}

/// Identity plus seeded uniform noise in `(−ε, ε)`.
pub fn init_params(dim: usize, seed: u64, epsilon: f64) -> Result<ModelParams> {
    if dim == 0 {
        return Err(Error::Invalid("parameter dimension must be positive".into()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Invalid(format!("init noise {epsilon} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = std::array::from_fn(|_| {
        let mut m = Matrix::identity(dim);
        if epsilon > 0.0 {
            for v in m.as_mut_slice() {
                *v += rng.random_range(-epsilon..epsilon);
            }
        }
        m
    });
    Ok(ModelParams {
        dim,
        temperature: DEFAULT_TEMPERATURE,
        w,
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Wᵀ r` for each of the six matrices, so that `⟨r, W s⟩ = ⟨Wᵀ r, s⟩`.
pub(crate) struct StepProjection {
    pub q: [Vec<f64>; 6],
}

impl StepProjection {
    pub fn new(step: &ReasoningStep, params: &ModelParams) -> Self {
        StepProjection {
            q: std::array::from_fn(|j| params.w[j].transpose_mul(&step.embedding)),
        }
    }

    fn node_logit(&self, step: &ReasoningStep, node: &crate::graph::SceneGraphNode) -> f64 {
        Attribute::ALL
            .iter()
            .map(|&a| {
                let weight = step.type_probs[a.index()];
                if weight == 0.0 {
                    0.0
                } else {
                    weight * dot(&self.q[a.index()], node.embedding(a))
                }
            })
            .sum()
    }

    fn edge_logit(&self, edge: &crate::graph::SceneGraphEdge) -> f64 {
        dot(&self.q[REL], &edge.embedding)
    }
}

fn check_step(step: &ReasoningStep, params: &ModelParams) -> Result<()> {
    if step.embedding.len() != params.dim {
        return Err(Error::Dimension {
            expected: params.dim,
            actual: step.embedding.len(),
        });
    }
    Ok(())
}

fn check_graph(graph: &SceneGraph, params: &ModelParams) -> Result<()> {
    if graph.is_empty() {
        return Err(Error::Invalid("scene graph has no nodes".into()));
    }
    match graph.dim() {
        Some(d) if d != params.dim => Err(Error::Dimension {
            expected: params.dim,
            actual: d,
        }),
        _ => Ok(()),
    }
}

/// `σ(Σ_j R(j) ⟨r, W_j s^j⟩)` over the five attribute types.
pub fn node_relevance(step: &ReasoningStep, node: &crate::graph::SceneGraphNode, params: &ModelParams) -> Result<f64> {
    check_step(step, params)?;
    if let Some(v) = node.embeddings.iter().find(|v| v.len() != params.dim) {
        return Err(Error::Dimension {
            expected: params.dim,
            actual: v.len(),
        });
    }
    Ok(sigmoid(StepProjection::new(step, params).node_logit(step, node)))
}

/// `σ(⟨r, W_rel e'⟩)`
pub fn edge_relevance(step: &ReasoningStep, edge: &crate::graph::SceneGraphEdge, params: &ModelParams) -> Result<f64> {
    check_step(step, params)?;
    if edge.embedding.len() != params.dim {
        return Err(Error::Dimension {
            expected: params.dim,
            actual: edge.embedding.len(),
        });
    }
    Ok(sigmoid(dot(
        &params.w[REL].transpose_mul(&step.embedding),
        &edge.embedding,
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub text: String,
    pub type_probs: [f64; 6],
    pub gamma_nodes: Vec<f64>,
    /// Parallel to the graph's edge list.
    pub gamma_edges: Vec<f64>,
    pub p_s: Vec<f64>,
    pub p_r: Vec<f64>,
    pub p: Vec<f64>,
    pub r_prime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub node_ids: Vec<String>,
    pub p0: Vec<f64>,
    pub steps: Vec<TraceStep>,
    pub prediction: String,
}

impl ReasoningTrace {
    pub fn final_p(&self) -> &[f64] {
        self.steps.last().map_or(&self.p0, |s| &s.p)
    }

    pub fn prediction_index(&self) -> usize {
        argmax(self.final_p())
    }
}

/// One state transition from `p`.
pub fn step_update(p: &[f64], step: &ReasoningStep, graph: &SceneGraph, params: &ModelParams) -> Result<TraceStep> {
    check_graph(graph, params)?;
    check_step(step, params)?;
    if p.len() != graph.len() {
        return Err(Error::Dimension {
            expected: graph.len(),
            actual: p.len(),
        });
    }
    Ok(forward_step(p, step, graph, params, 0))
}

pub(crate) fn forward_step(
    p: &[f64],
    step: &ReasoningStep,
    graph: &SceneGraph,
    params: &ModelParams,
    index: usize,
) -> TraceStep {
    let tau = params.temperature;
    let proj = StepProjection::new(step, params);
    let gamma_nodes: Vec<f64> = graph.nodes.iter().map(|n| sigmoid(proj.node_logit(step, n))).collect();
    let gamma_edges: Vec<f64> = graph.edges.iter().map(|e| sigmoid(proj.edge_logit(e))).collect();

    let zs: Vec<f64> = p.iter().zip(&gamma_nodes).map(|(pi, g)| pi * g / tau).collect();
    let mut zr = vec![0.0; graph.len()];
    for (e, g) in graph.edges.iter().zip(&gamma_edges) {
        zr[e.target] += p[e.source] * g / tau;
    }
    let p_s = softmax(&zs);
    let p_r = softmax(&zr);
    let r_prime = step.relation_weight();
    let p_next = p_s
        .iter()
        .zip(&p_r)
        .map(|(s, r)| r_prime * r + (1.0 - r_prime) * s)
        .collect();
    TraceStep {
        step: index,
        text: step.text.clone(),
        type_probs: step.type_probs,
        gamma_nodes,
        gamma_edges,
        p_s,
        p_r,
        p: p_next,
        r_prime,
    }
}

/// Runs the program from a uniform start; the prediction is the argmax of
/// the final distribution with ties to the lowest node index.
pub fn run(program: &ReasoningProgram, graph: &SceneGraph, params: &ModelParams) -> Result<ReasoningTrace> {
    if program.is_empty() {
        return Err(Error::Invalid("reasoning program is empty".into()));
    }
    params.validate()?;
    check_graph(graph, params)?;
    for step in &program.steps {
        check_step(step, params)?;
    }
    let n = graph.len();
    let p0 = vec![1.0 / n as f64; n];
    let mut steps: Vec<TraceStep> = Vec::with_capacity(program.len());
    for (i, step) in program.steps.iter().enumerate() {
        let p = steps.last().map_or(&p0, |s| &s.p);
        let next = forward_step(p, step, graph, params, i);
        steps.push(next);
    }
    let mut trace = ReasoningTrace {
        node_ids: graph.node_ids(),
        p0,
        steps,
        prediction: String::new(),
    };
    trace.prediction = trace.node_ids[trace.prediction_index()].clone();
    Ok(trace)
}

pub const MIN_PROB: f64 = 1e-12;

/// `−ln p_final(gold)`, with the probability clamped at `1e-12`.
pub fn loss(trace: &ReasoningTrace, gold_id: &str) -> Result<f64> {
    let gold = trace
        .node_ids
        .iter()
        .position(|id| id == gold_id)
        .ok_or_else(|| Error::Invalid(format!("gold object `{gold_id}` is not in the graph")))?;
    Ok(-trace.final_p()[gold].max(MIN_PROB).ln())
}
