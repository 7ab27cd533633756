use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gesture::{GroundPoint, Trajectory, TrajectorySample};
use crate::scene::{UserPose, Vec3};

use super::GeneratorConfig;

const REST_HEIGHT: f64 = 0.8;
const SHOULDER_OFFSET: f64 = 0.25;
const RAISE_TIME: f64 = 0.25;
/// Tangent-plane radius and angular rate of the searching motion that
/// precedes the dwell.
const SEARCH_RADIUS: f64 = 0.3;
const SEARCH_RATE: f64 = 4.0;
const ARM_REACH: f64 = 0.6;
/// Vertical drop of the wrist below the head while aiming.
const AIM_DROP: f64 = 0.3;

/// Right-hand pointing at `anchor`: a raise from rest, a searching sweep
/// around the aim direction, then a dwell on the anchor with per-sample
/// angular noise. The left hand stays at rest.
pub fn synthesize_pointing<R: Rng>(
    anchor: GroundPoint,
    config: &GeneratorConfig,
    rng: &mut R,
    user: &UserPose,
) -> Result<Trajectory> {
    let head = user.head();
    let (_, ahead) = user.to_user_frame(anchor.x - head.x, anchor.y - head.y);
    if !(ahead > 0.0) {
        return Err(Error::Invalid(format!(
            "anchor ({:.3}, {:.3}) is not in front of the user",
            anchor.x, anchor.y
        )));
    }
    if !(head.z > 0.0) {
        return Err(Error::InvalidPose(format!(
            "head height {} must be above ground",
            head.z
        )));
    }
    let aim = (Vec3::ground(anchor.x, anchor.y) - head)
        .normalized()
        .expect("head is above the ground");
    let (e1, e2) = tangent_basis(aim);
    let sigma = config.pointing_noise_deg.to_radians();
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Invalid(e.to_string()))?;

    let right = user.right();
    let side = Vec3::new(right[0], right[1], 0.0) * SHOULDER_OFFSET;
    let rest_right = Vec3::new(head.x, head.y, REST_HEIGHT) + side;
    let rest_left = Vec3::new(head.x, head.y, REST_HEIGHT) - side;

    let n = (config.gesture_duration * config.rate_hz).round().max(2.0) as usize;
    let dwell = (config.dwell_fraction * n as f64).round() as usize;
    let dwell_start = n - dwell.min(n);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / config.rate_hz;
        let mut dir = if i >= dwell_start {
            aim
        } else {
            let phase = SEARCH_RATE * t;
            aim + e1 * (SEARCH_RADIUS * phase.cos()) + e2 * (SEARCH_RADIUS * phase.sin())
        };
        if sigma > 0.0 {
            dir = dir + e1 * noise.sample(rng) + e2 * noise.sample(rng);
        }
        let dir = dir.normalized().unwrap_or(aim);
        let depression = (-dir.z).max(1e-3);
        let reach = ARM_REACH.min(AIM_DROP / depression);
        let mut wrist = head + dir * reach;
        if i < dwell_start && t < RAISE_TIME {
            let s = smoothstep(t / RAISE_TIME);
            wrist = rest_right + (wrist - rest_right) * s;
        }
        samples.push(TrajectorySample {
            t,
            head,
            left: Some(rest_left),
            right: Some(wrist),
        });
    }
    Trajectory::new(config.rate_hz, samples)
}

/// Two unit vectors orthogonal to `d` and to each other.
fn tangent_basis(d: Vec3) -> (Vec3, Vec3) {
    let up = Vec3::new(0.0, 0.0, 1.0);
    let e1 = cross(up, d).normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let e2 = cross(d, e1);
    (e1, e2)
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    Vec3::new(a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x)
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{detect_pointing_segments, ray_ground_intersection, DetectionParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_dwell_hits_the_anchor_exactly() {
        let cfg = GeneratorConfig {
            pointing_noise_deg: 0.0,
            ..Default::default()
        };
        let anchor = GroundPoint::new(2.3, -0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = synthesize_pointing(anchor, &cfg, &mut rng, &UserPose::default()).unwrap();
        assert_eq!(traj.len(), 180);
        for s in &traj.samples[36..] {
            let w = s.right.unwrap();
            assert!(w.z >= 1.2);
            let p = ray_ground_intersection(s.head, w).unwrap().unwrap();
            assert!(p.distance(anchor) < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn behind_the_user_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = GeneratorConfig::default();
        assert!(synthesize_pointing(GroundPoint::new(-1.0, 0.0), &cfg, &mut rng, &UserPose::default()).is_err());
    }

    #[test]
    fn no_dwell_no_segment() {
        let cfg = GeneratorConfig {
            dwell_fraction: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let traj = synthesize_pointing(GroundPoint::new(2.0, 0.5), &cfg, &mut rng, &UserPose::default()).unwrap();
        assert!(detect_pointing_segments(&traj, &DetectionParams::default()).is_empty());
    }
}
