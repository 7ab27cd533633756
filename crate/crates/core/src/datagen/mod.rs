//! Seeded synthetic episodes: scenes on a 4 m × 4 m floor in front of the
//! user, a templated instruction whose referent is unique, and a pointing
//! trajectory whenever the instruction uses a demonstrative.

mod io;
mod pointing;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::splitmix;
use crate::error::{Error, Result};
use crate::gesture::Trajectory;
use crate::graph::GraphConfig;
use crate::lexicon::{Attribute, Lexicon, Relation};
use crate::scene::{relation_between, ObjectInstance, Scene, UserPose, Vec3};
use crate::symbolic::{satisfiers, NounConstraint, Query};

pub use io::{read_dataset, split_indices, write_dataset, Dataset, Manifest};
pub use pointing::synthesize_pointing;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Template {
    /// "pick up the {color} {name}"
    T1,
    /// "pick up the {size} {color} {name}"
    T2,
    /// "pick up this {name}"
    T3,
    /// "pick up the {name} {relword} this {name2}"
    T4,
}

impl Template {
    pub const ALL: [Template; 4] = [Template::T1, Template::T2, Template::T3, Template::T4];

    pub fn has_demonstrative(self) -> bool {
        matches!(self, Template::T3 | Template::T4)
    }

    fn min_objects(self) -> usize {
        match self {
            Template::T1 | Template::T2 => 2,
            Template::T3 => 3,
            Template::T4 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Arena bounds on the ground, `[x_min, x_max, y_min, y_max]`.
    pub arena: [f64; 4],
    pub min_separation: f64,
    pub templates: Vec<Template>,
    pub pointing_noise_deg: f64,
    pub dwell_fraction: f64,
    pub gesture_duration: f64,
    pub rate_hz: f64,
    pub max_attempts: usize,
    pub user: UserPose,
    pub graph: GraphConfig,
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    /// Size of the split drawn from the holdout names; 0 for none.
    pub generalization: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            min_objects: 3,
            max_objects: 6,
            arena: [0.0, 4.0, -2.0, 2.0],
            min_separation: 0.3,
            templates: Template::ALL.to_vec(),
            pointing_noise_deg: 2.0,
            dwell_fraction: 0.8,
            gesture_duration: 3.0,
            rate_hz: 60.0,
            max_attempts: 1000,
            user: UserPose::default(),
            graph: GraphConfig::default(),
            seed: 0,
            train: 500,
            val: 100,
            generalization: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::Invalid(m.to_string()));
        if self.min_objects < 1 || self.min_objects > self.max_objects {
            return invalid("object count range must satisfy 1 ≤ min ≤ max");
        }
        let [x0, x1, y0, y1] = self.arena;
        if !(x1 > x0 && y1 > y0) {
            return invalid("arena bounds are empty");
        }
        if self.templates.is_empty() {
            return invalid("no templates selected");
        }
        if !(self.min_separation >= 0.0) || !(self.pointing_noise_deg >= 0.0) {
            return invalid("separation and noise must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.dwell_fraction) {
            return invalid("dwell fraction must lie in [0, 1]");
        }
        if !(self.gesture_duration > 0.0 && self.rate_hz > 0.0) {
            return invalid("gesture duration and rate must be positive");
        }
        if self.max_attempts == 0 {
            return invalid("max attempts must be positive");
        }
        self.graph.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub template: Template,
    pub scene: Scene,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conllu: Option<String>,
    #[serde(default)]
    pub trajectory: Option<Trajectory>,
    pub gold_id: String,
    /// Object the demonstrative refers to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointed_id: Option<String>,
}

impl Episode {
    pub fn has_demonstrative(&self) -> bool {
        self.template.has_demonstrative()
    }
}

/// Which name pool a split draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamePool {
    Training,
    Holdout,
}

impl NamePool {
    pub fn names(self, lexicon: &Lexicon) -> Vec<String> {
        match self {
            NamePool::Training => lexicon.training_names(),
            NamePool::Holdout => lexicon.holdout_names().to_vec(),
        }
    }
}

/// Independent generator stream for episode `index` of split `split`.
pub fn episode_rng(seed: u64, split: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(
        seed ^ splitmix(split.wrapping_mul(0x1_0000_0001) ^ splitmix(index)),
    ))
}

/// Random scene with `config`'s count range and separation.
pub fn generate_scene<R: Rng>(rng: &mut R, config: &GeneratorConfig, lexicon: &Lexicon) -> Result<Scene> {
    let names = lexicon.training_names();
    let n = rng.random_range(config.min_objects..=config.max_objects);
    let positions = place(rng, config, &[], n)?;
    let objects = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut o = random_object(rng, lexicon, &names);
            o.id = format!("obj{i}");
            o.position = p;
            o
        })
        .collect();
    Scene::new(config.user, objects)
}

/// One episode whose gold object is the unique satisfier of its
/// instruction and gesture.
pub fn generate_episode<R: Rng>(
    rng: &mut R,
    config: &GeneratorConfig,
    lexicon: &Lexicon,
    pool: NamePool,
) -> Result<Episode> {
    let names = pool.names(lexicon);
    if names.len() < 3 {
        return Err(Error::Generation("name pool needs at least three names".into()));
    }
    let template = *config.templates.choose(rng).expect("validated non-empty");
    for _ in 0..config.max_attempts {
        let n = rng
            .random_range(config.min_objects..=config.max_objects)
            .max(template.min_objects());
        let Some(draft) = (match template {
            Template::T1 => draft_t1(rng, config, lexicon, &names, n, false)?,
            Template::T2 => draft_t1(rng, config, lexicon, &names, n, true)?,
            Template::T3 => draft_t3(rng, config, lexicon, &names, n)?,
            Template::T4 => draft_t4(rng, config, lexicon, &names, n)?,
        }) else {
            continue;
        };
        let Draft {
            mut objects,
            query,
            instruction,
            gold,
            pointed,
        } = draft;

        // shuffle so the gold object's slot carries no information
        let mut order: Vec<usize> = (0..objects.len()).collect();
        order.shuffle(rng);
        let mut shuffled = Vec::with_capacity(objects.len());
        for (slot, &k) in order.iter().enumerate() {
            let mut o = std::mem::replace(&mut objects[k], placeholder());
            o.id = format!("obj{slot}");
            shuffled.push(o);
        }
        let slot_of = |k: usize| order.iter().position(|&x| x == k).expect("permutation");
        let gold = slot_of(gold);
        let pointed = pointed.map(slot_of);
        let scene = match Scene::new(config.user, shuffled) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if satisfiers(&scene, &query, pointed, &config.graph) != [gold] {
            continue;
        }
        let trajectory = match pointed {
            Some(p) => {
                let at = scene.objects[p].position;
                Some(synthesize_pointing(at.into(), config, rng, &scene.user)?)
            }
            None => None,
        };
        return Ok(Episode {
            id: String::new(),
            template,
            gold_id: scene.objects[gold].id.clone(),
            pointed_id: pointed.map(|p| scene.objects[p].id.clone()),
            scene,
            instruction,
            conllu: None,
            trajectory,
        });
    }
    Err(Error::Generation(format!(
        "no unique {template:?} episode after {} attempts",
        config.max_attempts
    )))
}

/// Episodes of one split, generated in parallel from per-index streams.
pub fn generate_split(
    config: &GeneratorConfig,
    lexicon: &Lexicon,
    split: &str,
    count: usize,
    pool: NamePool,
) -> Result<Vec<Episode>> {
    (0..count)
        .into_par_iter()
        .map(|i| generate_one(config, lexicon, split, i, pool))
        .collect()
}

/// Sequential counterpart of [`generate_split`].
pub fn generate_split_sequential(
    config: &GeneratorConfig,
    lexicon: &Lexicon,
    split: &str,
    count: usize,
    pool: NamePool,
) -> Result<Vec<Episode>> {
    (0..count)
        .map(|i| generate_one(config, lexicon, split, i, pool))
        .collect()
}

fn generate_one(config: &GeneratorConfig, lexicon: &Lexicon, split: &str, i: usize, pool: NamePool) -> Result<Episode> {
    let tag = split
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    let mut rng = episode_rng(config.seed, tag, i as u64);
    let mut episode = generate_episode(&mut rng, config, lexicon, pool)?;
    episode.id = format!("{split}-{i:04}");
    Ok(episode)
}

/// Train and val from the training names, plus the generalization split
/// from the holdout names when requested.
pub fn generate_dataset(config: &GeneratorConfig, lexicon: &Lexicon) -> Result<Dataset> {
    config.validate()?;
    if config.train == 0 {
        return Err(Error::Invalid("training split must be non-empty".into()));
    }
    if config.generalization > 0 && lexicon.holdout_names().len() < 3 {
        return Err(Error::Invalid(
            "generalization split needs at least three holdout names".into(),
        ));
    }
    let mut splits = vec![
        ("train", config.train, NamePool::Training),
        ("val", config.val, NamePool::Training),
    ];
    if config.generalization > 0 {
        splits.push(("generalization", config.generalization, NamePool::Holdout));
    }
    let mut episodes = Vec::new();
    let mut manifest_splits = Vec::new();
    for (name, count, pool) in splits {
        let start = episodes.len();
        episodes.extend(generate_split(config, lexicon, name, count, pool)?);
        manifest_splits.push((name.to_string(), (start..episodes.len()).collect()));
    }
    Ok(Dataset {
        manifest: Manifest {
            config: config.clone(),
            splits: manifest_splits.into_iter().collect(),
        },
        episodes,
    })
}

struct Draft {
    objects: Vec<ObjectInstance>,
    query: Query,
    instruction: String,
    gold: usize,
    pointed: Option<usize>,
}

fn placeholder() -> ObjectInstance {
    ObjectInstance {
        id: String::new(),
        name: String::new(),
        color: String::new(),
        shape: String::new(),
        size: String::new(),
        position: Vec3::default(),
    }
}

fn random_object<R: Rng>(rng: &mut R, lexicon: &Lexicon, names: &[String]) -> ObjectInstance {
    let pick = |rng: &mut R, a: Attribute| lexicon.vocab(a).choose(rng).expect("non-empty").clone();
    ObjectInstance {
        id: String::new(),
        name: names.choose(rng).expect("non-empty").clone(),
        color: pick(rng, Attribute::Color),
        shape: pick(rng, Attribute::Shape),
        size: pick(rng, Attribute::Size),
        position: Vec3::default(),
    }
}

fn other_token<R: Rng>(rng: &mut R, vocab: &[String], not: &str) -> Option<String> {
    let rest: Vec<&String> = vocab.iter().filter(|t| *t != not).collect();
    rest.choose(rng).map(|t| (*t).clone())
}

fn in_arena(config: &GeneratorConfig, x: f64, y: f64) -> bool {
    let [x0, x1, y0, y1] = config.arena;
    (x0..=x1).contains(&x) && (y0..=y1).contains(&y)
}

fn separated(config: &GeneratorConfig, p: Vec3, others: &[Vec3]) -> bool {
    others.iter().all(|q| p.ground_distance(*q) >= config.min_separation)
}

/// `count` new positions, each separated from `fixed` and from each other.
fn place<R: Rng>(rng: &mut R, config: &GeneratorConfig, fixed: &[Vec3], count: usize) -> Result<Vec<Vec3>> {
    let [x0, x1, y0, y1] = config.arena;
    let mut all = fixed.to_vec();
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..config.max_attempts {
            let p = Vec3::ground(rng.random_range(x0..=x1), rng.random_range(y0..=y1));
            if separated(config, p, &all) {
                all.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place object after {} attempts",
                config.max_attempts
            )));
        }
    }
    Ok(all.split_off(fixed.len()))
}

/// T1 (`with_size = false`) and T2. Hard distractors share the gold's name
/// or color; for T2 one also shares both and differs only in size.
fn draft_t1<R: Rng>(
    rng: &mut R,
    config: &GeneratorConfig,
    lexicon: &Lexicon,
    names: &[String],
    n: usize,
    with_size: bool,
) -> Result<Option<Draft>> {
    let positions = place(rng, config, &[], n)?;
    let colors = lexicon.vocab(Attribute::Color);
    let sizes = lexicon.vocab(Attribute::Size);
    let mut objects: Vec<ObjectInstance> = (0..n).map(|_| random_object(rng, lexicon, names)).collect();
    let gold = objects[0].clone();
    let mut hard = 1;
    if with_size && hard < n {
        let o = &mut objects[hard];
        o.name = gold.name.clone();
        o.color = gold.color.clone();
        if let Some(s) = other_token(rng, sizes, &gold.size) {
            o.size = s;
        }
        hard += 1;
    }
    if hard < n {
        let o = &mut objects[hard];
        o.name = gold.name.clone();
        if let Some(c) = other_token(rng, colors, &gold.color) {
            o.color = c;
        }
        hard += 1;
    }
    if hard < n {
        let o = &mut objects[hard];
        o.color = gold.color.clone();
        if let Some(m) = other_token(rng, names, &gold.name) {
            o.name = m;
        }
    }
    // break any remaining full matches
    for o in objects.iter_mut().skip(1) {
        let same = o.name == gold.name && o.color == gold.color && (!with_size || o.size == gold.size);
        if same {
            if with_size {
                o.size = other_token(rng, sizes, &gold.size).unwrap_or_else(|| o.size.clone());
            } else {
                o.color = other_token(rng, colors, &gold.color).unwrap_or_else(|| o.color.clone());
            }
        }
    }
    for (o, p) in objects.iter_mut().zip(positions) {
        o.position = p;
    }

    let mut target = NounConstraint::default();
    let instruction = if with_size {
        target = target.with(Attribute::Size, &gold.size);
        format!("pick up the {} {} {}", gold.size, gold.color, gold.name)
    } else {
        format!("pick up the {} {}", gold.color, gold.name)
    };
    target = target
        .with(Attribute::Color, &gold.color)
        .with(Attribute::Name, &gold.name);
    Ok(Some(Draft {
        objects,
        query: Query::simple(target),
        instruction,
        gold: 0,
        pointed: None,
    }))
}

/// T3: three or four objects share the gold's name; only the gesture
/// singles it out.
fn draft_t3<R: Rng>(
    rng: &mut R,
    config: &GeneratorConfig,
    lexicon: &Lexicon,
    names: &[String],
    n: usize,
) -> Result<Option<Draft>> {
    let positions = place(rng, config, &[], n)?;
    let name = names.choose(rng).expect("non-empty").clone();
    let others: Vec<String> = names.iter().filter(|m| **m != name).cloned().collect();
    let k = rng.random_range(3..=n.min(4));
    let objects = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut o = random_object(rng, lexicon, if i < k { std::slice::from_ref(&name) } else { &others });
            o.position = p;
            o
        })
        .collect();
    Ok(Some(Draft {
        objects,
        query: Query::simple(NounConstraint::default().with(Attribute::Name, &name).demonstrative()),
        instruction: format!("pick up this {name}"),
        gold: 0,
        pointed: Some(0),
    }))
}

/// Offset from `anchor` to a partner position within edge range.
fn partner<R: Rng>(
    rng: &mut R,
    config: &GeneratorConfig,
    anchor: Vec3,
    want: Option<Relation>,
) -> Option<(Vec3, Relation)> {
    let reach = config.graph.max_edge_distance.min(2.0);
    let lo = config.min_separation.max(0.05);
    for _ in 0..200 {
        let r = rng.random_range(lo..=reach.max(lo));
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let (x, y) = (anchor.x + r * theta.cos(), anchor.y + r * theta.sin());
        if !in_arena(config, x, y) {
            continue;
        }
        let p = Vec3::ground(x, y);
        let label = relation_between(anchor, p, &config.user, config.graph.near_threshold)?;
        if want.is_none_or(|w| w == label) {
            return Some((p, label));
        }
    }
    None
}

/// T4: the gold is related to the pointed anchor; distractor pairs with the
/// same names and relation make the text alone ambiguous.
fn draft_t4<R: Rng>(
    rng: &mut R,
    config: &GeneratorConfig,
    lexicon: &Lexicon,
    names: &[String],
    n: usize,
) -> Result<Option<Draft>> {
    let [x0, x1, y0, y1] = config.arena;
    let pair = |rng: &mut R, want: Option<Relation>| {
        let a = Vec3::ground(rng.random_range(x0..=x1), rng.random_range(y0..=y1));
        partner(rng, config, a, want).map(|(g, label)| (a, g, label))
    };
    let Some((a, g, label)) = pair(rng, None) else {
        return Ok(None);
    };
    let pairs = if n >= 6 { 2 } else { 1 };
    let mut positions = vec![a, g];
    for _ in 0..pairs {
        let Some((a2, g2, _)) = pair(rng, Some(label)) else {
            return Ok(None);
        };
        positions.extend([a2, g2]);
    }
    for (i, p) in positions.iter().enumerate() {
        if !separated(config, *p, &positions[..i]) {
            return Ok(None);
        }
    }
    let fillers = n.saturating_sub(positions.len());
    let extra = place(rng, config, &positions, fillers)?;
    positions.extend(extra);

    let mut pool: Vec<String> = names.to_vec();
    pool.shuffle(rng);
    let (name, name2) = (pool[0].clone(), pool[1].clone());
    let rest = &pool[2..];
    let objects = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let names: &[String] = match i {
                _ if i < 2 + 2 * pairs && i % 2 == 0 => std::slice::from_ref(&name2),
                _ if i < 2 + 2 * pairs => std::slice::from_ref(&name),
                _ => rest,
            };
            let mut o = random_object(rng, lexicon, names);
            o.position = p;
            o
        })
        .collect();

    let phrases = lexicon.phrases_for(label);
    let relword = phrases.choose(rng).copied().unwrap_or(label.as_str()).to_string();
    Ok(Some(Draft {
        objects,
        query: Query {
            target: NounConstraint::default().with(Attribute::Name, &name),
            relation: Some((
                label,
                NounConstraint::default().with(Attribute::Name, &name2).demonstrative(),
            )),
        },
        instruction: format!("pick up the {name} {relword} this {name2}"),
        gold: 1,
        pointed: Some(0),
    }))
}
