//! Scenes on the ground plane and the viewer-relative relation heuristic.
//!
//! Coordinates are meters, the ground is `z = 0` and `+z` points up.

use std::collections::HashSet;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Attribute, Lexicon, Relation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Vec3 { x, y, z: 0.0 }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Distance between the ground projections of two points.
    pub fn ground_distance(self, other: Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Vec3 { x, y, z }
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Viewer frame used to interpret left/right/front/back.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UserPoseFile", into = "UserPoseFile")]
pub struct UserPose {
    head: Vec3,
    forward: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct UserPoseFile {
    #[serde(default = "default_head")]
    head: Vec3,
    #[serde(default = "default_forward")]
    forward: [f64; 2],
}

fn default_head() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.6)
}

fn default_forward() -> [f64; 2] {
    [1.0, 0.0]
}

impl TryFrom<UserPoseFile> for UserPose {
    type Error = Error;
    fn try_from(f: UserPoseFile) -> Result<Self> {
        UserPose::new(f.head, f.forward)
    }
}

impl From<UserPose> for UserPoseFile {
    fn from(p: UserPose) -> Self {
        UserPoseFile {
            head: p.head,
            forward: p.forward,
        }
    }
}

impl Default for UserPose {
    fn default() -> Self {
        UserPose {
            head: default_head(),
            forward: default_forward(),
        }
    }
}

impl UserPose {
    /// `forward` is normalized; it must be a non-zero ground direction.
    pub fn new(head: Vec3, forward: [f64; 2]) -> Result<Self> {
        let n = forward[0].hypot(forward[1]);
        if !head.is_finite() || !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidPose(format!("head {head:?} / forward {forward:?}")));
        }
        Ok(UserPose {
            head,
            forward: [forward[0] / n, forward[1] / n],
        })
    }

    pub fn head(&self) -> Vec3 {
        self.head
    }

    pub fn forward(&self) -> [f64; 2] {
        self.forward
    }

    /// Forward rotated by −90°.
    pub fn right(&self) -> [f64; 2] {
        [self.forward[1], -self.forward[0]]
    }

    /// Ground displacement expressed as (right, forward) components.
    pub fn to_user_frame(&self, dx: f64, dy: f64) -> (f64, f64) {
        let r = self.right();
        let f = self.forward;
        (dx * r[0] + dy * r[1], dx * f[0] + dy * f[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    pub name: String,
    pub color: String,
    pub shape: String,
    pub size: String,
    pub position: Vec3,
}

impl ObjectInstance {
    /// Gold token for a describable attribute; `None` for the pointing flag.
    pub fn attribute(&self, attribute: Attribute) -> Option<&str> {
        match attribute {
            Attribute::Name => Some(&self.name),
            Attribute::Color => Some(&self.color),
            Attribute::Shape => Some(&self.shape),
            Attribute::Size => Some(&self.size),
            Attribute::Demonstrative => None,
        }
    }

    pub fn set_attribute(&mut self, attribute: Attribute, token: impl Into<String>) {
        let token = token.into();
        match attribute {
            Attribute::Name => self.name = token,
            Attribute::Color => self.color = token,
            Attribute::Shape => self.shape = token,
            Attribute::Size => self.size = token,
            Attribute::Demonstrative => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile")]
pub struct Scene {
    #[serde(default)]
    pub user: UserPose,
    pub objects: Vec<ObjectInstance>,
}

#[derive(Deserialize)]
struct SceneFile {
    #[serde(default)]
    user: UserPose,
    objects: Vec<ObjectInstance>,
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;
    fn try_from(f: SceneFile) -> Result<Self> {
        Scene::new(f.user, f.objects)
    }
}

impl Scene {
    pub fn new(user: UserPose, objects: Vec<ObjectInstance>) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::Invalid("scene has no objects".into()));
        }
        let mut ids = HashSet::new();
        for (i, o) in objects.iter().enumerate() {
            if !ids.insert(o.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate object id `{}`", o.id)));
            }
            if !o.position.is_finite() || o.position.z.abs() > 1e-9 {
                return Err(Error::Invalid(format!(
                    "object `{}` must lie on the ground plane",
                    o.id
                )));
            }
            if let Some(other) = objects[..i].iter().find(|p| p.position == o.position) {
                return Err(Error::CoincidentObjects(other.id.clone(), o.id.clone()));
            }
        }
        Ok(Scene { user, objects })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Checks every attribute token against the lexicon.
    pub fn validate_tokens(&self, lexicon: &Lexicon) -> Result<()> {
        for o in &self.objects {
            for attribute in [Attribute::Name, Attribute::Color, Attribute::Shape, Attribute::Size] {
                let token = o.attribute(attribute).unwrap_or_default();
                if lexicon.index_of(attribute, token).is_none() {
                    return Err(Error::UnknownToken {
                        category: attribute.to_string(),
                        token: token.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Relation of `b` relative to `a`, read as "b is ⟨rel⟩ of a" from the
/// user's point of view. Front means closer to the user.
pub fn classify_relation(
    a: &ObjectInstance,
    b: &ObjectInstance,
    user: &UserPose,
    near_threshold: f64,
) -> Result<Relation> {
    if !(near_threshold > 0.0) {
        return Err(Error::Invalid(format!(
            "near threshold {near_threshold} must be positive"
        )));
    }
    relation_between(a.position, b.position, user, near_threshold)
        .ok_or_else(|| Error::CoincidentObjects(a.id.clone(), b.id.clone()))
}

/// Position-only form of [`classify_relation`]; `None` for zero displacement.
pub fn relation_between(a: Vec3, b: Vec3, user: &UserPose, near_threshold: f64) -> Option<Relation> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    let (u_r, u_f) = user.to_user_frame(dx, dy);
    Some(if dx.hypot(dy) < near_threshold {
        Relation::Near
    } else if u_r.abs() >= u_f.abs() {
        if u_r > 0.0 {
            Relation::Right
        } else {
            Relation::Left
        }
    } else if u_f > 0.0 {
        Relation::Back
    } else {
        Relation::Front
    })
}
