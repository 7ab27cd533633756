//! Reverse-mode gradient of the cross-entropy loss with respect to the six
//! weight matrices.

use crate::error::{Error, Result};
use crate::graph::SceneGraph;
use crate::instruction::ReasoningProgram;
use crate::lexicon::Attribute;

use super::{run, Matrix, ModelParams, MIN_PROB, REL};

/// Gradient with the same layout as [`ModelParams::w`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub w: [Matrix; 6],
}

impl Gradient {
    pub fn zeros(dim: usize) -> Self {
        Gradient {
            w: std::array::from_fn(|_| Matrix::zeros(dim)),
        }
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in &mut self.w {
            m.as_mut_slice().iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.w
            .iter()
            .flat_map(|m| m.as_slice())
            .fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

/// Loss and its exact gradient for one episode.
pub fn grad(
    program: &ReasoningProgram,
    graph: &SceneGraph,
    gold: usize,
    params: &ModelParams,
) -> Result<(f64, Gradient)> {
    let trace = run(program, graph, params)?;
    let n = graph.len();
    if gold >= n {
        return Err(Error::Invalid(format!("gold index {gold} out of range for {n} nodes")));
    }
    let tau = params.temperature;
    let p_gold = trace.final_p()[gold];
    let loss = -p_gold.max(MIN_PROB).ln();
    let mut g = Gradient::zeros(params.dim);
    if p_gold < MIN_PROB {
        // clamped: the loss is flat in every parameter
        return Ok((loss, g));
    }

    let mut dp = vec![0.0; n];
    dp[gold] = -1.0 / p_gold;
    for (i, t) in trace.steps.iter().enumerate().rev() {
        let step = &program.steps[i];
        let p_in = if i == 0 { &trace.p0 } else { &trace.steps[i - 1].p };
        let r = t.r_prime;

        let dzs = softmax_backward(&t.p_s, &dp, 1.0 - r);
        let dzr = softmax_backward(&t.p_r, &dp, r);

        let mut dp_in = vec![0.0; n];
        let mut node_coef = vec![0.0; n];
        for k in 0..n {
            let gamma = t.gamma_nodes[k];
            dp_in[k] += dzs[k] * gamma / tau;
            let d_gamma = dzs[k] * p_in[k] / tau;
            node_coef[k] = d_gamma * gamma * (1.0 - gamma);
        }
        let mut edge_sum = vec![0.0; params.dim];
        for (e, &gamma) in graph.edges.iter().zip(&t.gamma_edges) {
            let dz = dzr[e.target];
            dp_in[e.source] += dz * gamma / tau;
            let db = dz * p_in[e.source] / tau * gamma * (1.0 - gamma);
            if db != 0.0 {
                for (s, v) in edge_sum.iter_mut().zip(&e.embedding) {
                    *s += db * v;
                }
            }
        }
        g.w[REL].add_outer(1.0, &step.embedding, &edge_sum);

        for a in Attribute::ALL {
            let weight = step.type_probs[a.index()];
            if weight == 0.0 {
                continue;
            }
            let mut node_sum = vec![0.0; params.dim];
            for (node, &c) in graph.nodes.iter().zip(&node_coef) {
                if c == 0.0 {
                    continue;
                }
                for (s, v) in node_sum.iter_mut().zip(node.embedding(a)) {
                    *s += c * v;
                }
            }
            g.w[a.index()].add_outer(weight, &step.embedding, &node_sum);
        }
        dp = dp_in;
    }
    Ok((loss, g))
}

/// Gradient at the logits of `y = softmax(z)` given `scale · dL/dy`.
fn softmax_backward(y: &[f64], dy: &[f64], scale: f64) -> Vec<f64> {
    if scale == 0.0 {
        return vec![0.0; y.len()];
    }
    let inner: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum::<f64>() * scale;
    y.iter().zip(dy).map(|(a, b)| a * (scale * b - inner)).collect()
}
