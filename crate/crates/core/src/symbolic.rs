//! Brute-force constraint filter used as a reference resolver: select the
//! objects matching every attribute constraint, then follow relation
//! adjacency from the matching anchors.

use serde::{Deserialize, Serialize};

use crate::graph::GraphConfig;
use crate::instruction::{ReasoningProgram, StepType};
use crate::lexicon::{Attribute, Relation};
use crate::scene::{relation_between, Scene};

/// Constraints on one noun phrase.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounConstraint {
    pub attributes: Vec<(Attribute, String)>,
    /// The phrase carries a demonstrative and must be the pointed object.
    pub demonstrative: bool,
}

impl NounConstraint {
    pub fn with(mut self, attribute: Attribute, token: impl Into<String>) -> Self {
        self.attributes.push((attribute, token.into()));
        self
    }

    pub fn demonstrative(mut self) -> Self {
        self.demonstrative = true;
        self
    }

    /// Attribute match plus, when `pointed` is known, the demonstrative.
    pub fn matches(&self, scene: &Scene, index: usize, pointed: Option<usize>) -> bool {
        let object = &scene.objects[index];
        let attrs_ok = self
            .attributes
            .iter()
            .all(|(a, token)| object.attribute(*a) == Some(token.as_str()));
        let demo_ok = !self.demonstrative || pointed.is_none_or(|p| p == index);
        attrs_ok && demo_ok
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub target: NounConstraint,
    /// "target is ⟨relation⟩ of anchor".
    pub relation: Option<(Relation, NounConstraint)>,
}

impl Query {
    pub fn simple(target: NounConstraint) -> Self {
        Query { target, relation: None }
    }

    /// Reads constraints off a program whose steps have hard types. Steps
    /// before a relation step describe the anchor.
    pub fn from_program(program: &ReasoningProgram) -> Option<Self> {
        let mut current = NounConstraint::default();
        let mut relation = None;
        for step in &program.steps {
            match step.step_type() {
                StepType::Relation => {
                    let label = Relation::parse(&step.text)?;
                    relation = Some((label, std::mem::take(&mut current)));
                }
                StepType::Demonstrative => current.demonstrative = true,
                other => current
                    .attributes
                    .push((other.attribute().expect("attribute step"), step.text.clone())),
            }
        }
        Some(Query {
            target: current,
            relation,
        })
    }

    pub fn has_demonstrative(&self) -> bool {
        self.target.demonstrative || self.relation.as_ref().is_some_and(|(_, a)| a.demonstrative)
    }
}

/// Indices of every object satisfying `query`. `pointed` is the index of the
/// gestured object; `None` drops the demonstrative constraints, which is
/// what the text alone determines.
pub fn satisfiers(scene: &Scene, query: &Query, pointed: Option<usize>, config: &GraphConfig) -> Vec<usize> {
    let n = scene.len();
    (0..n)
        .filter(|&t| query.target.matches(scene, t, pointed))
        .filter(|&t| match &query.relation {
            None => true,
            Some((label, anchor)) => (0..n)
                .any(|a| a != t && anchor.matches(scene, a, pointed) && related(scene, a, t, config) == Some(*label)),
        })
        .collect()
}

/// Relation of `b` seen from `a`, if the graph would hold that edge.
pub fn related(scene: &Scene, a: usize, b: usize, config: &GraphConfig) -> Option<Relation> {
    let (pa, pb) = (scene.objects[a].position, scene.objects[b].position);
    if pa.ground_distance(pb) > config.max_edge_distance {
        return None;
    }
    relation_between(pa, pb, &scene.user, config.near_threshold)
}
