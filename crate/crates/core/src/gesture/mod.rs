//! Pointing gestures: detection in head/wrist trajectories, head→wrist rays
//! cast onto the ground, and per-object pointing scores from a kernel
//! density over the ray hits.

pub mod kde;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Scene, Vec3};

pub use kde::{Bandwidth, GroundKde};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct GroundPoint {
    pub x: f64,
    pub y: f64,
}

impl GroundPoint {
    pub fn new(x: f64, y: f64) -> Self {
        GroundPoint { x, y }
    }

    pub fn distance(self, other: GroundPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for GroundPoint {
    fn from([x, y]: [f64; 2]) -> Self {
        GroundPoint { x, y }
    }
}

impl From<GroundPoint> for [f64; 2] {
    fn from(p: GroundPoint) -> Self {
        [p.x, p.y]
    }
}

impl From<Vec3> for GroundPoint {
    fn from(v: Vec3) -> Self {
        GroundPoint { x: v.x, y: v.y }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub head: Vec3,
    #[serde(default)]
    pub left: Option<Vec3>,
    #[serde(default)]
    pub right: Option<Vec3>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl TrajectorySample {
    pub fn wrist(&self, hand: Hand) -> Option<Vec3> {
        match hand {
            Hand::Left => self.left,
            Hand::Right => self.right,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryFile")]
pub struct Trajectory {
    pub rate_hz: f64,
    pub samples: Vec<TrajectorySample>,
}

#[derive(Deserialize)]
struct TrajectoryFile {
    rate_hz: f64,
    samples: Vec<TrajectorySample>,
}

impl TryFrom<TrajectoryFile> for Trajectory {
    type Error = Error;
    fn try_from(f: TrajectoryFile) -> Result<Self> {
        Trajectory::new(f.rate_hz, f.samples)
    }
}

impl Trajectory {
    pub fn new(rate_hz: f64, samples: Vec<TrajectorySample>) -> Result<Self> {
        if !(rate_hz > 0.0) {
            return Err(Error::Invalid(format!("rate {rate_hz} Hz must be positive")));
        }
        if let Some(w) = samples.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Invalid(format!(
                "sample times must increase strictly ({} then {})",
                w[0].t, w[1].t
            )));
        }
        Ok(Trajectory { rate_hz, samples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointingSegment {
    pub hand: Hand,
    /// Inclusive sample range.
    pub start_index: usize,
    pub end_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub wrist_height_min: f64,
    pub max_ray_angular_velocity: f64,
    pub min_duration: f64,
    /// Span (s) of the trailing and leading direction means compared when
    /// estimating ray angular velocity. Zero compares consecutive samples.
    pub velocity_window: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            wrist_height_min: 1.0,
            max_ray_angular_velocity: 0.5,
            min_duration: 0.5,
            velocity_window: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointingResult {
    pub detected: bool,
    pub target: Option<GroundPoint>,
    /// Object id → probability of being the pointed object.
    pub scores: BTreeMap<String, f64>,
}

impl PointingResult {
    pub fn uniform(scene: &Scene) -> Self {
        let p = 1.0 / scene.len() as f64;
        PointingResult {
            detected: false,
            target: None,
            scores: scene.objects.iter().map(|o| (o.id.clone(), p)).collect(),
        }
    }

    /// Scores from a density built on explicit ground points.
    pub fn from_points(points: Vec<GroundPoint>, scene: &Scene, bandwidth: Bandwidth) -> Result<Self> {
        if scene.is_empty() {
            return Err(Error::Invalid("scene has no objects".into()));
        }
        let kde = GroundKde::new(points, bandwidth)?;
        let target = kde.mode_among_samples();
        let densities: Vec<f64> = scene.objects.iter().map(|o| kde.density(o.position.into())).collect();
        let total: f64 = densities.iter().sum();
        if !(total > 0.0) {
            return Ok(PointingResult {
                target: Some(target),
                ..Self::uniform(scene)
            });
        }
        Ok(PointingResult {
            detected: true,
            target: Some(target),
            scores: scene
                .objects
                .iter()
                .zip(densities)
                .map(|(o, f)| (o.id.clone(), f / total))
                .collect(),
        })
    }

    /// Id with the highest score; ties go to the earliest object in the scene.
    pub fn top<'a>(&self, scene: &'a Scene) -> Option<&'a str> {
        let mut best: Option<(&str, f64)> = None;
        for o in &scene.objects {
            let s = *self.scores.get(&o.id)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((&o.id, s));
            }
        }
        best.map(|(id, _)| id)
    }
}

/// Intersection of the head→wrist ray with the ground, if the ray descends.
/// The hit lies beyond the wrist.
pub fn ray_ground_intersection(head: Vec3, wrist: Vec3) -> Result<Option<GroundPoint>> {
    if !(head.z > 0.0) {
        return Err(Error::InvalidPose(format!(
            "head height {} must be above ground",
            head.z
        )));
    }
    if !(wrist.z < head.z) {
        return Ok(None);
    }
    let t = head.z / (head.z - wrist.z);
    let p = head + (wrist - head) * t;
    Ok(Some(GroundPoint::new(p.x, p.y)))
}

/// Maximal runs where a raised wrist holds a steady head→wrist ray for at
/// least `min_duration`. Segments of both hands, ordered by start.
pub fn detect_pointing_segments(traj: &Trajectory, params: &DetectionParams) -> Vec<PointingSegment> {
    if traj.samples.len() < 2 {
        return Vec::new();
    }
    let mut segments = Vec::new();
    for hand in [Hand::Left, Hand::Right] {
        let velocity = ray_angular_velocity(traj, hand, params.velocity_window);
        let qualifies = |i: usize| {
            let s = &traj.samples[i];
            match (s.wrist(hand), velocity[i]) {
                (Some(w), Some(v)) => w.z >= params.wrist_height_min && v <= params.max_ray_angular_velocity,
                _ => false,
            }
        };
        let mut i = 0;
        while i < traj.samples.len() {
            if !qualifies(i) {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < traj.samples.len() && qualifies(i + 1) {
                i += 1;
            }
            let duration = traj.samples[i].t - traj.samples[start].t;
            if duration >= params.min_duration - 1e-9 {
                segments.push(PointingSegment {
                    hand,
                    start_index: start,
                    end_index: i,
                });
            }
            i += 1;
        }
    }
    segments.sort_by_key(|s| (s.start_index, s.hand == Hand::Right));
    segments
}

/// Angular velocity (rad/s) of the head→wrist direction at each sample,
/// `None` where the wrist is missing or the ray is degenerate.
///
/// At sample `i` the mean direction over the trailing window `[t_i − w, t_i)`
/// is compared with the one over the leading window `[t_i, t_i + w)`; each
/// window holds at least one sample, so `w = 0` is the plain
/// consecutive-sample rate. The first sample of a run copies its successor.
pub fn ray_angular_velocity(traj: &Trajectory, hand: Hand, window: f64) -> Vec<Option<f64>> {
    let n = traj.samples.len();
    let dirs: Vec<Option<Vec3>> = traj
        .samples
        .iter()
        .map(|s| s.wrist(hand).and_then(|w| (w - s.head).normalized()))
        .collect();
    let mut out = vec![None; n];
    for i in 1..n {
        if dirs[i].is_none() || dirs[i - 1].is_none() {
            continue;
        }
        let ti = traj.samples[i].t;
        let mut lo = i - 1;
        while lo > 0 && dirs[lo - 1].is_some() && traj.samples[lo - 1].t >= ti - window {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && dirs[hi + 1].is_some() && traj.samples[hi + 1].t < ti + window {
            hi += 1;
        }
        let mean = |range: std::ops::RangeInclusive<usize>| {
            let k = (range.end() - range.start() + 1) as f64;
            let (mut d, mut t) = (Vec3::default(), 0.0);
            for j in range {
                d = d + dirs[j].unwrap();
                t += traj.samples[j].t;
            }
            (d.normalized(), t / k)
        };
        let (before, t_before) = mean(lo..=i - 1);
        let (after, t_after) = mean(i..=hi);
        if let (Some(a), Some(b)) = (before, after) {
            let angle = a.dot(b).clamp(-1.0, 1.0).acos();
            out[i] = Some(angle / (t_after - t_before));
        }
    }
    for i in 0..n.saturating_sub(1) {
        if out[i].is_none() && dirs[i].is_some() && (i == 0 || dirs[i - 1].is_none()) {
            out[i] = out[i + 1];
        }
    }
    out
}

/// Ground hits of the first detected hand's segments; empty when nothing
/// was detected.
pub fn pointing_hits(traj: &Trajectory, params: &DetectionParams) -> Result<Vec<GroundPoint>> {
    let segments = detect_pointing_segments(traj, params);
    let Some(first) = segments.first() else {
        return Ok(Vec::new());
    };
    let hand = first.hand;
    let mut hits = Vec::new();
    for seg in segments.iter().filter(|s| s.hand == hand) {
        for s in &traj.samples[seg.start_index..=seg.end_index] {
            let wrist = s.wrist(hand).expect("segment samples carry the wrist");
            if let Some(p) = ray_ground_intersection(s.head, wrist)? {
                hits.push(p);
            }
        }
    }
    Ok(hits)
}

/// Target point and per-object pointing scores for a trajectory.
pub fn estimate_pointing(
    traj: &Trajectory,
    scene: &Scene,
    params: &DetectionParams,
    bandwidth: Bandwidth,
) -> Result<PointingResult> {
    if scene.is_empty() {
        return Err(Error::Invalid("scene has no objects".into()));
    }
    let hits = pointing_hits(traj, params)?;
    if hits.is_empty() {
        return Ok(PointingResult::uniform(scene));
    }
    PointingResult::from_points(hits, scene, bandwidth)
}
