//! Planar points and bounding regions for growth geometry.

use serde::{Deserialize, Serialize};

/// Continuous 2D pixel coordinate. Coordinates must stay finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Euclidean distance to `other`.
    pub fn dist(&self, other: &Point2) -> f64 {
        self.dist_sq(other).sqrt()
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned or circular region used as a growth bound or obstacle.
///
/// Containment is inclusive on the boundary, so points lying exactly on a
/// circle's rim or a square's edge count as inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Circle { center: Point2, radius: f64 },
    Square { origin: Point2, side: f64 },
}

impl Region {
    pub fn contains(&self, p: &Point2) -> bool {
        match self {
            Region::Circle { center, radius } => p.dist_sq(center) <= radius * radius,
            Region::Square { origin, side } => {
                p.x >= origin.x
                    && p.x <= origin.x + side
                    && p.y >= origin.y
                    && p.y <= origin.y + side
            }
        }
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bbox(&self) -> (Point2, Point2) {
        match self {
            Region::Circle { center, radius } => (
                Point2::new(center.x - radius, center.y - radius),
                Point2::new(center.x + radius, center.y + radius),
            ),
            Region::Square { origin, side } => {
                (*origin, Point2::new(origin.x + side, origin.y + side))
            }
        }
    }

    /// Positive extent check: radius > 0 or side > 0, with finite geometry.
    pub fn is_valid(&self) -> bool {
        match self {
            Region::Circle { center, radius } => center.is_finite() && radius.is_finite() && *radius > 0.0,
            Region::Square { origin, side } => origin.is_finite() && side.is_finite() && *side > 0.0,
        }
    }
}
