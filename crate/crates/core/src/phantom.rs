//! Piecewise-constant ground-truth conductivities.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FunctionSpace, ScalarField};

pub use crate::forward::BcSet;

const HEART_LUNG_JSON: &str = include_str!("../data/heart_lung.json");

/// A region carrying a constant value. Membership uses strict inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Disk {
        center: [f64; 2],
        radius: f64,
        value: f64,
    },
    /// Semi-axes along the local axes after a counter-clockwise rotation.
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        angle_deg: f64,
        value: f64,
    },
    /// |u − u₀| < half_u and |v − v₀| < half_v with
    /// u = x cos θ + y sin θ, v = x sin θ − y cos θ.
    RotatedRect {
        angle_deg: f64,
        offset: [f64; 2],
        half_widths: [f64; 2],
        value: f64,
    },
    /// The outer disk minus the hole disk.
    Annulus {
        outer_center: [f64; 2],
        outer_radius: f64,
        inner_center: [f64; 2],
        inner_radius: f64,
        value: f64,
    },
}

impl Primitive {
    pub fn value(&self) -> f64 {
        match self {
            Primitive::Disk { value, .. }
            | Primitive::Ellipse { value, .. }
            | Primitive::RotatedRect { value, .. }
            | Primitive::Annulus { value, .. } => *value,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let in_disk = |c: &[f64; 2], r: f64| (x - c[0]).powi(2) + (y - c[1]).powi(2) < r * r;
        match self {
            Primitive::Disk { center, radius, .. } => in_disk(center, *radius),
            Primitive::Ellipse {
                center,
                semi_axes,
                angle_deg,
                ..
            } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let (dx, dy) = (x - center[0], y - center[1]);
                let lx = dx * c + dy * s;
                let ly = -dx * s + dy * c;
                (lx / semi_axes[0]).powi(2) + (ly / semi_axes[1]).powi(2) < 1.0
            }
            Primitive::RotatedRect {
                angle_deg,
                offset,
                half_widths,
                ..
            } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let u = x * c + y * s;
                let v = x * s - y * c;
                (u - offset[0]).abs() < half_widths[0] && (v - offset[1]).abs() < half_widths[1]
            }
            Primitive::Annulus {
                outer_center,
                outer_radius,
                inner_center,
                inner_radius,
                ..
            } => in_disk(outer_center, *outer_radius) && !in_disk(inner_center, *inner_radius),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Primitive::Disk { radius, .. } => *radius > 0.0,
            Primitive::Ellipse { semi_axes, .. } => semi_axes[0] > 0.0 && semi_axes[1] > 0.0,
            Primitive::RotatedRect { half_widths, .. } => half_widths[0] > 0.0 && half_widths[1] > 0.0,
            Primitive::Annulus {
                outer_radius,
                inner_radius,
                ..
            } => *outer_radius > 0.0 && *inner_radius >= 0.0,
        };
        if !ok || !(self.value() > 0.0 && self.value().is_finite()) {
            return Err(Error::Config(format!("invalid phantom primitive {self:?}")));
        }
        Ok(())
    }
}

/// Background value plus primitives; later primitives win where they overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    pub name: String,
    #[serde(default = "unit")]
    pub background: f64,
    pub primitives: Vec<Primitive>,
}

fn unit() -> f64 {
    1.0
}

impl Phantom {
    /// Index of the primitive that sets the value at (x, y).
    pub fn region(&self, x: f64, y: f64) -> Option<usize> {
        self.primitives.iter().rposition(|p| p.contains(x, y))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.region(x, y)
            .map_or(self.background, |i| self.primitives[i].value())
    }

    /// Dof-point interpolant on `space`.
    pub fn interpolate(&self, space: &Arc<FunctionSpace>) -> ScalarField {
        ScalarField::interpolate(space.clone(), |x, y| self.eval(x, y))
    }

    pub fn from_json(text: &str) -> Result<Phantom> {
        let p: Phantom = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Phantom> {
        let text = std::fs::read_to_string(path)?;
        Phantom::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn validate(&self) -> Result<()> {
        if !(self.background > 0.0) {
            return Err(Error::Config("phantom background must be positive".into()));
        }
        self.primitives.iter().try_for_each(Primitive::validate)
    }

    /// σ = 2 for |x − (0.2, 0.2)| < 0.3.
    pub fn disk() -> Phantom {
        Phantom {
            name: "disk".into(),
            background: 1.0,
            primitives: vec![Primitive::Disk {
                center: [0.2, 0.2],
                radius: 0.3,
                value: 2.0,
            }],
        }
    }

    /// Two lungs (0.5) and a heart (2.0).
    pub fn heart_lung() -> Phantom {
        Phantom::from_json(HEART_LUNG_JSON).expect("bundled heart-lung geometry is valid")
    }

    /// A rectangle rotated by 45°.
    pub fn rotated_rect() -> Phantom {
        Phantom {
            name: "rotated_rect".into(),
            background: 1.0,
            primitives: vec![Primitive::RotatedRect {
                angle_deg: 45.0,
                offset: [0.2, 0.2],
                half_widths: [0.2, 0.4],
                value: 2.0,
            }],
        }
    }

    /// A square, two overlapping disks, and an annulus with
    /// a low-conductivity hole.
    pub fn composite() -> Phantom {
        Phantom {
            name: "composite".into(),
            background: 1.0,
            primitives: vec![
                Primitive::RotatedRect {
                    angle_deg: 0.0,
                    offset: [0.0, 0.0],
                    half_widths: [0.1, 0.1],
                    value: 3.0,
                },
                Primitive::Disk {
                    center: [-0.1, 0.5],
                    radius: 0.2,
                    value: 2.0,
                },
                Primitive::Disk {
                    center: [0.1, 0.5],
                    radius: 0.2,
                    value: 1.0,
                },
                Primitive::Annulus {
                    outer_center: [0.0, -0.5],
                    outer_radius: 0.28,
                    inner_center: [0.06, -0.5],
                    inner_radius: 0.13,
                    value: 2.0,
                },
                Primitive::Disk {
                    center: [0.06, -0.5],
                    radius: 0.13,
                    value: 0.5,
                },
            ],
        }
    }

    /// Built-in phantom by name.
    pub fn builtin(name: &str) -> Result<Phantom> {
        match name {
            "disk" | "test1" => Ok(Phantom::disk()),
            "heart_lung" | "heart" | "test2" => Ok(Phantom::heart_lung()),
            "rotated_rect" | "rect" | "test3" => Ok(Phantom::rotated_rect()),
            "composite" | "test4" => Ok(Phantom::composite()),
            _ => Err(Error::Config(format!(
                "unknown phantom `{name}` (expected disk, heart_lung, rotated_rect, composite or a JSON file)"
            ))),
        }
    }
}

/// Trace `which` of `set` at (cos θ, sin θ).
pub fn eval_boundary(set: BcSet, which: usize, theta: f64) -> Result<f64> {
    set.eval_boundary(which, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Degree;
    use crate::mesh::generate_disk_mesh;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn disk_values() {
        let p = Phantom::disk();
        assert_eq!(p.eval(0.2, 0.2), 2.0);
        assert_eq!(p.eval(0.5, 0.2), 1.0);
        assert_eq!(p.eval(0.2 + 0.3 * FRAC_1_SQRT_2, 0.2 + 0.3 * FRAC_1_SQRT_2 + 1e-9), 1.0);
        assert_eq!(p.eval(-0.5, -0.5), 1.0);
    }

    #[test]
    fn rotated_rect_center_and_corners() {
        let p = Phantom::rotated_rect();
        // u = v = 0.2 gives x = 0.2√2, y = 0
        let (x, y) = (0.4 * FRAC_1_SQRT_2, 0.0);
        assert_eq!(p.eval(x, y), 2.0);
        let inside = |x: f64, y: f64| {
            let u = x * FRAC_1_SQRT_2 + y * FRAC_1_SQRT_2;
            let v = x * FRAC_1_SQRT_2 - y * FRAC_1_SQRT_2;
            (u - 0.2).abs() < 0.2 && (v - 0.2).abs() < 0.4
        };
        for i in 0..50 {
            for j in 0..50 {
                let (x, y) = (-0.987 + 0.04 * i as f64, -0.993 + 0.04 * j as f64);
                assert_eq!(p.eval(x, y) == 2.0, inside(x, y), "({x}, {y})");
            }
        }
    }

    #[test]
    fn heart_lung_layout() {
        let p = Phantom::heart_lung();
        assert_eq!(p.eval(0.1, 0.5), 2.0);
        assert_eq!(p.eval(0.45, -0.1), 0.5);
        assert_eq!(p.eval(-0.45, -0.1), 0.5);
        assert_eq!(p.eval(0.0, -0.8), 1.0);
        // symmetric lungs
        for (x, y) in [(0.3, 0.1), (0.55, -0.4), (0.6, 0.2)] {
            assert_eq!(p.eval(x, y), p.eval(-x, y), "({x}, {y})");
        }
    }

    #[test]
    fn composite_precedence() {
        let p = Phantom::composite();
        assert_eq!(p.eval(0.0, 0.0), 3.0);
        assert_eq!(p.eval(-0.25, 0.5), 2.0);
        // overlap of the two disks: the later one wins
        assert_eq!(p.eval(0.0, 0.5), 1.0);
        assert_eq!(p.eval(-0.2, -0.5), 2.0);
        assert_eq!(p.eval(0.06, -0.5), 0.5);
        assert_eq!(p.eval(0.15, 0.0), 1.0);
    }

    #[test]
    fn bundled_phantom_values_are_admissible() {
        let mesh = Arc::new(generate_disk_mesh(0.05).unwrap());
        let space = FunctionSpace::new(mesh, Degree::P2);
        for name in ["disk", "heart_lung", "rotated_rect", "composite"] {
            let f = Phantom::builtin(name).unwrap().interpolate(&space);
            for v in f.coeffs() {
                assert!([0.5, 1.0, 2.0, 3.0].contains(v), "{name}: {v}");
            }
        }
    }

    #[test]
    fn boundary_traces() {
        assert!((eval_boundary(BcSet::Bc1, 1, 0.0).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((eval_boundary(BcSet::Bc2, 1, PI / 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((eval_boundary(BcSet::Bc3, 2, PI).unwrap() + FRAC_1_SQRT_2).abs() < 1e-15);
        for k in 0..16 {
            let t = k as f64 * 0.4;
            let f3 = eval_boundary(BcSet::Bc3, 2, t).unwrap();
            let sum = eval_boundary(BcSet::Bc2, 0, t).unwrap() + eval_boundary(BcSet::Bc2, 1, t).unwrap();
            assert!((f3 - sum * FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert!(eval_boundary(BcSet::Bc1, 2, 0.0).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = Phantom::composite();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(Phantom::from_json(&text).unwrap(), p);
        let bad = r#"{"name": "x", "primitives": [{"shape": "disk", "center": [0, 0], "radius": -1, "value": 2}]}"#;
        assert!(matches!(Phantom::from_json(bad), Err(Error::Config(_))));
        assert!(Phantom::from_json(r#"{"name": "x", "primitives": [{"shape": "blob"}]}"#).is_err());
        assert!(Phantom::builtin("nope").is_err());
    }
}
