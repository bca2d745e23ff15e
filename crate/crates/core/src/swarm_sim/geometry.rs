use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    #[serde(flatten)]
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        Circle {
            center: Vec2::new(x, y),
            radius,
        }
    }

    /// Distance from `p` to the circle's edge; negative inside.
    pub fn surface_distance(&self, p: Vec2) -> f64 {
        p.distance(self.center) - self.radius
    }
}

/// Wraps an angle into `(-PI, PI]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Absolute angular difference in `[0, PI]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Distance from `p` to a circular sector with apex `apex`, facing `heading`,
/// half-opening `half_angle` and radius `length`. Zero inside the sector.
pub fn sector_distance(p: Vec2, apex: Vec2, heading: f64, half_angle: f64, length: f64) -> f64 {
    let v = p - apex;
    let r = v.length();
    let off_axis = if r == 0.0 { 0.0 } else { angle_between(v.angle(), heading) };
    if off_axis <= half_angle {
        return (r - length).max(0.0);
    }
    let left = apex + Vec2::from_angle(heading + half_angle) * length;
    let right = apex + Vec2::from_angle(heading - half_angle) * length;
    point_segment_distance(p, apex, left).min(point_segment_distance(p, apex, right))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_half_open_range() {
        for k in -20..=20 {
            let t = wrap_angle(k as f64 * 0.7);
            assert!(t > -PI && t <= PI, "{t}");
        }
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((angle_between(3.1, -3.1) - (2.0 * PI - 6.2)).abs() < 1e-12);
    }

    #[test]
    fn sector_distance_cases() {
        let apex = Vec2::new(0.0, 0.0);
        let half = 30f64.to_radians();
        // Straight ahead inside the cone.
        assert_eq!(sector_distance(Vec2::new(10.0, 0.0), apex, 0.0, half, 50.0), 0.0);
        // Beyond the arc.
        assert!((sector_distance(Vec2::new(60.0, 0.0), apex, 0.0, half, 50.0) - 10.0).abs() < 1e-12);
        // Behind the apex.
        assert!((sector_distance(Vec2::new(-5.0, 0.0), apex, 0.0, half, 50.0) - 5.0).abs() < 1e-12);
        // Off to the side at 90 degrees: distance to the edge segment.
        let d = sector_distance(Vec2::new(0.0, 10.0), apex, 0.0, half, 50.0);
        assert!((d - 10.0 * (60f64.to_radians()).sin()).abs() < 1e-9, "{d}");
    }

    #[test]
    fn surface_distance_is_signed() {
        let c = Circle::new(5.0, 0.0, 1.0);
        assert_eq!(c.surface_distance(Vec2::new(0.0, 0.0)), 4.0);
        assert_eq!(c.surface_distance(Vec2::new(5.0, 0.0)), -1.0);
    }
}
