//! Probabilistic scene graph: one node per object with a distribution per
//! attribute, and directed relation edges between nearby objects.

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::gesture::PointingResult;
use crate::lexicon::{Attribute, Lexicon, Relation};
use crate::scene::{relation_between, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Probability mass moved off the gold token, spread uniformly.
    pub smoothing: f64,
    pub near_threshold: f64,
    pub max_edge_distance: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            smoothing: 0.05,
            near_threshold: 0.5,
            max_edge_distance: 3.0,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::Invalid(format!("smoothing {} not in [0, 1)", self.smoothing)));
        }
        if !(self.near_threshold > 0.0) || !(self.max_edge_distance > 0.0) {
            return Err(Error::Invalid("distance thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Categorical distribution over one category's vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeDistribution {
    pub category: String,
    pub probs: Vec<f64>,
}

impl AttributeDistribution {
    /// Gold token gets `1 − α`, the rest share `α` uniformly.
    pub fn smoothed_one_hot(category: impl Into<String>, len: usize, gold: usize, alpha: f64) -> Self {
        let probs = if len == 1 {
            vec![1.0]
        } else {
            let rest = alpha / (len - 1) as f64;
            (0..len).map(|i| if i == gold { 1.0 - alpha } else { rest }).collect()
        };
        AttributeDistribution {
            category: category.into(),
            probs,
        }
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphNode {
    pub object_id: String,
    /// Indexed by [`Attribute::index`].
    pub attributes: Vec<AttributeDistribution>,
    /// Expected attribute embeddings `s^j`, indexed like `attributes`.
    pub embeddings: Vec<Vec<f64>>,
}

impl SceneGraphNode {
    pub fn attribute(&self, attribute: Attribute) -> &AttributeDistribution {
        &self.attributes[attribute.index()]
    }

    pub fn embedding(&self, attribute: Attribute) -> &[f64] {
        &self.embeddings[attribute.index()]
    }

    /// Probability that this object is the pointed one.
    pub fn pointed(&self) -> f64 {
        self.attribute(Attribute::Demonstrative).probs[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphEdge {
    pub from: String,
    pub to: String,
    /// Node indices of `from` and `to`.
    pub source: usize,
    pub target: usize,
    pub relation: AttributeDistribution,
    pub embedding: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<SceneGraphNode>,
    pub edges: Vec<SceneGraphEdge>,
}

impl SceneGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.object_id == id)
    }

    pub fn node_ids(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.object_id.clone()).collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.nodes.first().map(|n| n.embeddings[0].len())
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&SceneGraphEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }
}

/// Oracle scene graph from ground-truth attributes.
///
/// Without pointing (or with an undetected gesture) every object's pointing
/// flag is `[1/N, 1 − 1/N]`.
pub fn build_scene_graph(
    scene: &Scene,
    lexicon: &Lexicon,
    embeddings: &EmbeddingTable,
    config: &GraphConfig,
    pointing: Option<&PointingResult>,
) -> Result<SceneGraph> {
    config.validate()?;
    scene.validate_tokens(lexicon)?;
    let n = scene.len();
    let alpha = config.smoothing;

    let mut nodes = Vec::with_capacity(n);
    for object in &scene.objects {
        let mut attributes = Vec::with_capacity(Attribute::ALL.len());
        let mut vectors = Vec::with_capacity(Attribute::ALL.len());
        for attribute in Attribute::ALL {
            let vocab = lexicon.vocab(attribute);
            let dist = match object.attribute(attribute) {
                Some(token) => {
                    let gold = lexicon.index_of(attribute, token).ok_or_else(|| Error::UnknownToken {
                        category: attribute.to_string(),
                        token: token.to_string(),
                    })?;
                    AttributeDistribution::smoothed_one_hot(attribute.as_str(), vocab.len(), gold, alpha)
                }
                None => {
                    let score = pointing_score(pointing, &object.id, n)?;
                    AttributeDistribution {
                        category: attribute.as_str().into(),
                        probs: vec![score, 1.0 - score],
                    }
                }
            };
            vectors.push(embeddings.expected(vocab, &dist.probs));
            attributes.push(dist);
        }
        nodes.push(SceneGraphNode {
            object_id: object.id.clone(),
            attributes,
            embeddings: vectors,
        });
    }

    let relations = lexicon.relations();
    let mut edges = Vec::new();
    for (i, a) in scene.objects.iter().enumerate() {
        for (j, b) in scene.objects.iter().enumerate() {
            if i == j || a.position.ground_distance(b.position) > config.max_edge_distance {
                continue;
            }
            let label = relation_between(a.position, b.position, &scene.user, config.near_threshold)
                .ok_or_else(|| Error::CoincidentObjects(a.id.clone(), b.id.clone()))?;
            let relation = AttributeDistribution::smoothed_one_hot("relation", relations.len(), label.index(), alpha);
            let embedding = embeddings.expected(relations, &relation.probs);
            edges.push(SceneGraphEdge {
                from: a.id.clone(),
                to: b.id.clone(),
                source: i,
                target: j,
                relation,
                embedding,
            });
        }
    }
    Ok(SceneGraph { nodes, edges })
}

fn pointing_score(pointing: Option<&PointingResult>, id: &str, n: usize) -> Result<f64> {
    match pointing {
        Some(p) if p.detected => p
            .scores
            .get(id)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("pointing result has no score for `{id}`"))),
        _ => Ok(1.0 / n as f64),
    }
}

/// Label with the most mass on an edge.
pub fn edge_label(edge: &SceneGraphEdge) -> Relation {
    Relation::ALL[edge.relation.argmax()]
}

/// First index of the maximum; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ObjectInstance, UserPose, Vec3};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn obj(id: &str, color: &str, x: f64, y: f64) -> ObjectInstance {
        ObjectInstance {
            id: id.into(),
            name: "cube".into(),
            color: color.into(),
            shape: "square".into(),
            size: "small".into(),
            position: Vec3::ground(x, y),
        }
    }

    fn setup() -> (Lexicon, EmbeddingTable) {
        let lex = Lexicon::default();
        let emb = EmbeddingTable::one_hot(&lex, 50, 0).unwrap();
        (lex, emb)
    }

    #[test]
    fn single_object_graph() {
        let (lex, emb) = setup();
        let scene = Scene::new(UserPose::default(), vec![obj("a", "red", 1.0, 0.0)]).unwrap();
        let config = GraphConfig {
            smoothing: 0.0,
            ..Default::default()
        };
        let g = build_scene_graph(&scene, &lex, &emb, &config, None).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        let name = g.nodes[0].attribute(Attribute::Name);
        assert_eq!(name.probs.iter().filter(|&&p| p == 1.0).count(), 1);
        assert_eq!(name.probs.iter().sum::<f64>(), 1.0);
        assert_eq!(g.nodes[0].attribute(Attribute::Demonstrative).probs, vec![1.0, 0.0]);
    }

    #[test]
    fn close_pair_gets_two_near_edges() {
        let (lex, emb) = setup();
        let scene = Scene::new(
            UserPose::default(),
            vec![obj("a", "red", 1.0, 0.0), obj("b", "blue", 1.0, 0.3)],
        )
        .unwrap();
        let config = GraphConfig {
            smoothing: 0.0,
            ..Default::default()
        };
        let g = build_scene_graph(&scene, &lex, &emb, &config, None).unwrap();
        assert_eq!(g.edges.len(), 2);
        for e in &g.edges {
            assert_eq!(edge_label(e), Relation::Near);
            assert_eq!(e.relation.probs[Relation::Near.index()], 1.0);
        }
        assert!(g.edge("a", "b").is_some() && g.edge("b", "a").is_some());
    }

    #[test]
    fn smoothed_color_and_expected_embedding() {
        let (lex, emb) = setup();
        let scene = Scene::new(UserPose::default(), vec![obj("a", "red", 1.0, 0.0)]).unwrap();
        let config = GraphConfig {
            smoothing: 0.1,
            ..Default::default()
        };
        let g = build_scene_graph(&scene, &lex, &emb, &config, None).unwrap();
        let color = g.nodes[0].attribute(Attribute::Color);
        let colors = lex.vocab(Attribute::Color);
        assert_eq!(colors.len(), 6);
        for (token, &p) in colors.iter().zip(&color.probs) {
            let want = if token == "red" { 0.9 } else { 0.02 };
            assert_abs_diff_eq!(p, want, epsilon = 1e-12);
        }
        // loop oracle: s = 0.9 emb(red) + 0.02 Σ others
        let mut oracle = vec![0.0; emb.dim()];
        for token in colors {
            let w = if token == "red" { 0.9 } else { 0.02 };
            for (o, v) in oracle.iter_mut().zip(emb.lookup(token).iter()) {
                *o += w * v;
            }
        }
        for (a, b) in g.nodes[0].embedding(Attribute::Color).iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn unknown_token_is_named() {
        let (lex, emb) = setup();
        let scene = Scene::new(UserPose::default(), vec![obj("a", "crimson", 1.0, 0.0)]).unwrap();
        let err = build_scene_graph(&scene, &lex, &emb, &GraphConfig::default(), None).unwrap_err();
        assert!(err.to_string().contains("crimson"), "{err}");
    }

    #[test]
    fn far_pairs_have_no_edge() {
        let (lex, emb) = setup();
        let scene = Scene::new(
            UserPose::default(),
            vec![obj("a", "red", 0.0, -2.0), obj("b", "red", 4.0, 2.0)],
        )
        .unwrap();
        let g = build_scene_graph(&scene, &lex, &emb, &GraphConfig::default(), None).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn pointing_scores_become_flag_distribution() {
        let (lex, emb) = setup();
        let scene = Scene::new(
            UserPose::default(),
            vec![obj("a", "red", 1.0, 0.0), obj("b", "red", 2.0, 0.0)],
        )
        .unwrap();
        let scores: BTreeMap<String, f64> = [("a".to_string(), 0.8), ("b".to_string(), 0.2)].into();
        let pointing = PointingResult {
            detected: true,
            target: None,
            scores,
        };
        let g = build_scene_graph(&scene, &lex, &emb, &GraphConfig::default(), Some(&pointing)).unwrap();
        let flag = &g.nodes[0].attribute(Attribute::Demonstrative).probs;
        assert_eq!(flag[0], 0.8);
        assert_abs_diff_eq!(flag[1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(g.nodes[1].pointed(), 0.2, epsilon = 1e-12);
    }
}
