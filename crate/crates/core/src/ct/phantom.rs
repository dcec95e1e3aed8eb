use serde::{Deserialize, Serialize};

use super::PolarGrid;

/// A shape painted with a constant value. Coordinates are cartesian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disc {
        cx: f64,
        cy: f64,
        r: f64,
        value: f64,
    },
    Annulus {
        cx: f64,
        cy: f64,
        r_in: f64,
        r_out: f64,
        value: f64,
    },
    /// Semi-axes `a`, `b`, rotated by `angle` radians.
    Ellipse {
        cx: f64,
        cy: f64,
        a: f64,
        b: f64,
        angle: f64,
        value: f64,
    },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disc { cx, cy, r, .. } => (x - cx).hypot(y - cy) <= r,
            Shape::Annulus { cx, cy, r_in, r_out, .. } => {
                let d = (x - cx).hypot(y - cy);
                d >= r_in && d <= r_out
            }
            Shape::Ellipse { cx, cy, a, b, angle, .. } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let (p, q) = (c * dx + s * dy, -s * dx + c * dy);
                (p / a).powi(2) + (q / b).powi(2) <= 1.0
            }
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Shape::Disc { value, .. } | Shape::Annulus { value, .. } | Shape::Ellipse { value, .. } => value,
        }
    }
}

/// Sample the shapes at pixel centers; later shapes overwrite earlier ones.
/// Values are clamped to `[0, 1]`.
pub fn make_phantom(grid: &PolarGrid, shapes: &[Shape]) -> Vec<f64> {
    let mut img = vec![0.0; grid.n_pixels()];
    for j in 0..grid.n_theta() {
        for i in 0..grid.n_r() {
            let (r, th) = grid.center(i, j);
            let (x, y) = (r * th.cos(), r * th.sin());
            for sh in shapes {
                if sh.contains(x, y) {
                    img[grid.index(i, j)] = sh.value().clamp(0.0, 1.0);
                }
            }
        }
    }
    img
}

/// The default test object: a soft body with two inserts and a ring.
pub fn default_phantom() -> Vec<Shape> {
    vec![
        Shape::Ellipse {
            cx: 0.0,
            cy: 0.0,
            a: 0.85,
            b: 0.7,
            angle: 0.3,
            value: 0.4,
        },
        Shape::Annulus {
            cx: 0.0,
            cy: 0.0,
            r_in: 0.6,
            r_out: 0.68,
            value: 0.8,
        },
        Shape::Disc {
            cx: 0.3,
            cy: 0.2,
            r: 0.18,
            value: 1.0,
        },
        Shape::Ellipse {
            cx: -0.3,
            cy: -0.15,
            a: 0.2,
            b: 0.1,
            angle: -0.5,
            value: 0.7,
        },
    ]
}
