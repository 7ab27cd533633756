use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::GroundPoint;

/// Kernel bandwidth choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    #[default]
    /// `h = n^(-1/6) * σ̂`, σ̂ the mean per-axis sample standard deviation
    /// floored at [`MIN_SPREAD`].
    Scott,
    Fixed(f64),
}

pub const MIN_SPREAD: f64 = 0.05;

/// Isotropic 2D Gaussian kernel density over ground points.
#[derive(Clone, Debug)]
pub struct GroundKde {
    points: Vec<GroundPoint>,
    h: f64,
}

impl GroundKde {
    pub fn new(points: Vec<GroundPoint>, bandwidth: Bandwidth) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("density estimate needs at least one point".into()));
        }
        let h = match bandwidth {
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Fixed(h) => return Err(Error::Invalid(format!("bandwidth {h} must be positive"))),
            Bandwidth::Scott => scott_bandwidth(&points),
        };
        Ok(GroundKde { points, h })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn points(&self) -> &[GroundPoint] {
        &self.points
    }

    /// `f(q) = 1/(n h² 2π) Σ exp(−‖q − p‖² / 2h²)`
    pub fn density(&self, q: GroundPoint) -> f64 {
        let two_h2 = 2.0 * self.h * self.h;
        let sum: f64 = self
            .points
            .iter()
            .map(|p| (-((q.x - p.x).powi(2) + (q.y - p.y).powi(2)) / two_h2).exp())
            .sum();
        sum / (self.points.len() as f64 * self.h * self.h * 2.0 * PI)
    }

    /// The sample point of highest density; ties go to the earliest sample.
    pub fn mode_among_samples(&self) -> GroundPoint {
        let mut best = self.points[0];
        let mut best_f = f64::NEG_INFINITY;
        for &p in &self.points {
            let f = self.density(p);
            if f > best_f {
                best = p;
                best_f = f;
            }
        }
        best
    }
}

pub fn scott_bandwidth(points: &[GroundPoint]) -> f64 {
    let n = points.len() as f64;
    let spread = if points.len() < 2 {
        0.0
    } else {
        let std = |values: Vec<f64>| {
            let mean = values.iter().sum::<f64>() / n;
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let sx = std(points.iter().map(|p| p.x).collect());
        let sy = std(points.iter().map(|p| p.y).collect());
        0.5 * (sx + sy)
    };
    n.powf(-1.0 / 6.0) * spread.max(MIN_SPREAD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gp(x: f64, y: f64) -> GroundPoint {
        GroundPoint { x, y }
    }

    #[test]
    fn single_point_unit_bandwidth() {
        let kde = GroundKde::new(vec![gp(1.0, 2.0)], Bandwidth::Fixed(1.0)).unwrap();
        assert_abs_diff_eq!(kde.density(gp(1.0, 2.0)), 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(kde.density(gp(1.0, 2.0)), 0.1592, epsilon = 1e-4);
    }

    #[test]
    fn identical_points_peak_at_their_location() {
        let h = 0.3;
        let kde = GroundKde::new(vec![gp(0.5, 0.5); 7], Bandwidth::Fixed(h)).unwrap();
        let peak = kde.density(gp(0.5, 0.5));
        assert_abs_diff_eq!(peak, 1.0 / (h * h * 2.0 * PI), epsilon = 1e-12);
        for q in [gp(0.6, 0.5), gp(0.5, 0.4), gp(-1.0, 3.0)] {
            assert!(kde.density(q) < peak);
        }
    }

    #[test]
    fn heavier_cluster_has_higher_density() {
        let mut pts = vec![gp(1.0, 0.0); 80];
        pts.extend(vec![gp(-1.0, 0.0); 20]);
        let kde = GroundKde::new(pts, Bandwidth::Fixed(0.2)).unwrap();
        // closed form: each cluster contributes count/(n h² 2π) at its center
        let norm = 1.0 / (100.0 * 0.04 * 2.0 * PI);
        let cross = (-4.0f64 / 0.08).exp();
        assert_abs_diff_eq!(kde.density(gp(1.0, 0.0)), norm * (80.0 + 20.0 * cross), epsilon = 1e-12);
        assert!(kde.density(gp(1.0, 0.0)) > kde.density(gp(-1.0, 0.0)));
        assert_eq!(kde.mode_among_samples(), gp(1.0, 0.0));
    }

    #[test]
    fn scott_rule() {
        let pts = vec![gp(0.0, 0.0), gp(2.0, 0.0), gp(0.0, 2.0), gp(2.0, 2.0)];
        // per-axis sample std = sqrt(4/3)
        let want = 4f64.powf(-1.0 / 6.0) * (4.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(scott_bandwidth(&pts), want, epsilon = 1e-12);
        let tight = vec![gp(1.0, 1.0); 64];
        assert_abs_diff_eq!(scott_bandwidth(&tight), 0.5 * MIN_SPREAD, epsilon = 1e-12);
    }

    #[test]
    fn rejects_empty_and_bad_bandwidth() {
        assert!(GroundKde::new(vec![], Bandwidth::Scott).is_err());
        assert!(GroundKde::new(vec![gp(0.0, 0.0)], Bandwidth::Fixed(0.0)).is_err());
    }
}
