//! Planar domains and the two affine maps used by the rotation reduction:
//! the rotation `Ω ↦ R_θᵀ(Ω)` and the vertical shear `Ω ↦ {(x, √a y)}`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadform::Mat2;

pub type Point = [f64; 2];

/// Default number of boundary vertices when a curved boundary is polygonized.
pub const DEFAULT_BOUNDARY_VERTICES: usize = 1024;

const ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    Invalid(String),
    #[error("rotation angle {0} outside [0, π/2]")]
    AngleOutOfRange(f64),
    #[error("shear parameter {0} outside (0, 1]")]
    ShearOutOfRange(f64),
    #[error("need at least 16 boundary vertices, got {0}")]
    TooFewVertices(usize),
}

/// A bounded planar domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Disk {
        #[serde(default)]
        center: Point,
        radius: f64,
    },
    /// `[-hw, hw] × [-hh, hh]`.
    Rectangle { hw: f64, hh: f64 },
    /// Counterclockwise simple polygon.
    Polygon { vertices: Vec<Point> },
    /// Image of the unit disk under `x ↦ center + map·x`.
    Ellipse { center: Point, map: Mat2 },
}

fn rot_t(theta: f64, v: Point) -> Point {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn shoelace(vs: &[Point]) -> f64 {
    let n = vs.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (vs[i], vs[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, c: Point, d: f64| {
        d == 0.0
            && c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Checks that `vs` is a simple counterclockwise polygon with positive area.
pub fn validate_polygon(vs: &[Point]) -> Result<(), GeometryError> {
    let n = vs.len();
    if n < 3 {
        return Err(GeometryError::Invalid(format!("polygon needs at least 3 vertices, got {n}")));
    }
    if vs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(GeometryError::Invalid("non-finite vertex".into()));
    }
    if shoelace(vs) <= 0.0 {
        return Err(GeometryError::Invalid("polygon must be counterclockwise with positive area".into()));
    }
    for i in 0..n {
        let (a, b) = (vs[i], vs[(i + 1) % n]);
        if a == b {
            return Err(GeometryError::Invalid(format!("repeated vertex at index {i}")));
        }
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(a, b, vs[j], vs[(j + 1) % n]) {
                return Err(GeometryError::Invalid(format!("edges {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<f64, GeometryError> {
    if theta.is_finite() && (-ANGLE_TOL..=FRAC_PI_2 + ANGLE_TOL).contains(&theta) {
        Ok(theta.clamp(0.0, FRAC_PI_2))
    } else {
        Err(GeometryError::AngleOutOfRange(theta))
    }
}

impl DomainSpec {
    pub fn disk(radius: f64) -> Result<Self, GeometryError> {
        let d = DomainSpec::Disk {
            center: [0.0, 0.0],
            radius,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn rectangle(hw: f64, hh: f64) -> Result<Self, GeometryError> {
        let d = DomainSpec::Rectangle { hw, hh };
        d.validate()?;
        Ok(d)
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        validate_polygon(&vertices)?;
        Ok(DomainSpec::Polygon { vertices })
    }

    /// `[-1, 1]²`.
    pub fn square() -> Self {
        DomainSpec::Rectangle { hw: 1.0, hh: 1.0 }
    }

    /// `[-1, 1]² \ (0, 1]²`, area 3.
    pub fn l_shape() -> Self {
        DomainSpec::Polygon {
            vertices: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [-1.0, 1.0]],
        }
    }

    /// `R_a = [-1, 1] × [-1/√a, 1/√a]`.
    pub fn rectangle_ra(a: f64) -> Result<Self, GeometryError> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(GeometryError::ShearOutOfRange(a));
        }
        DomainSpec::rectangle(1.0, 1.0 / a.sqrt())
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        match self {
            DomainSpec::Disk { center, radius } => {
                if !pos(*radius) || !center.iter().all(|c| c.is_finite()) {
                    return Err(GeometryError::Invalid(format!("disk radius must be positive, got {radius}")));
                }
            }
            DomainSpec::Rectangle { hw, hh } => {
                if !pos(*hw) || !pos(*hh) {
                    return Err(GeometryError::Invalid(format!(
                        "rectangle half-sides must be positive, got ({hw}, {hh})"
                    )));
                }
            }
            DomainSpec::Polygon { vertices } => validate_polygon(vertices)?,
            DomainSpec::Ellipse { center, map } => {
                let det = map[0][0] * map[1][1] - map[0][1] * map[1][0];
                if !pos(det) || !center.iter().chain(map.iter().flatten()).all(|c| c.is_finite()) {
                    return Err(GeometryError::Invalid("ellipse map must have positive determinant".into()));
                }
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        match self {
            DomainSpec::Disk { radius, .. } => PI * radius * radius,
            DomainSpec::Rectangle { hw, hh } => 4.0 * hw * hh,
            DomainSpec::Polygon { vertices } => shoelace(vertices),
            DomainSpec::Ellipse { map, .. } => PI * (map[0][0] * map[1][1] - map[0][1] * map[1][0]),
        }
    }

    pub fn is_curved(&self) -> bool {
        matches!(self, DomainSpec::Disk { .. } | DomainSpec::Ellipse { .. })
    }

    /// Center and linear map of a curved domain, viewed as the image of the unit disk.
    pub fn as_ellipse(&self) -> Option<(Point, Mat2)> {
        match self {
            DomainSpec::Disk { center, radius } => Some((*center, [[*radius, 0.0], [0.0, *radius]])),
            DomainSpec::Ellipse { center, map } => Some((*center, *map)),
            _ => None,
        }
    }

    /// Image under `R_θᵀ`, the counterclockwise rotation by `θ ∈ [0, π/2]`.
    pub fn rotate(&self, theta: f64) -> Result<Self, GeometryError> {
        let theta = check_theta(theta)?;
        Ok(match self {
            DomainSpec::Disk { center, radius } => DomainSpec::Disk {
                center: rot_t(theta, *center),
                radius: *radius,
            },
            DomainSpec::Rectangle { .. } if theta == 0.0 => self.clone(),
            DomainSpec::Rectangle { .. } | DomainSpec::Polygon { .. } => DomainSpec::Polygon {
                vertices: self.vertices().iter().map(|&v| rot_t(theta, v)).collect(),
            },
            DomainSpec::Ellipse { center, map } => {
                let (s, c) = theta.sin_cos();
                let r = [[c, -s], [s, c]];
                DomainSpec::Ellipse {
                    center: rot_t(theta, *center),
                    map: matmul(&r, map),
                }
            }
        })
    }

    /// Image under `(x, y) ↦ (x, √a y)`.
    pub fn shear_y(&self, a: f64) -> Result<Self, GeometryError> {
        if !(a.is_finite() && a > 0.0 && a <= 1.0) {
            return Err(GeometryError::ShearOutOfRange(a));
        }
        if a == 1.0 {
            return Ok(self.clone());
        }
        let s = a.sqrt();
        Ok(match self {
            DomainSpec::Rectangle { hw, hh } => DomainSpec::Rectangle { hw: *hw, hh: hh * s },
            DomainSpec::Polygon { vertices } => DomainSpec::Polygon {
                vertices: vertices.iter().map(|v| [v[0], s * v[1]]).collect(),
            },
            DomainSpec::Disk { .. } | DomainSpec::Ellipse { .. } => {
                let (c, m) = self.as_ellipse().expect("curved domain");
                DomainSpec::Ellipse {
                    center: [c[0], s * c[1]],
                    map: [m[0], [s * m[1][0], s * m[1][1]]],
                }
            }
        })
    }

    /// Vertex list of a polygonal domain (empty for curved ones).
    pub fn vertices(&self) -> Vec<Point> {
        match self {
            DomainSpec::Rectangle { hw, hh } => vec![[-hw, -hh], [*hw, -hh], [*hw, *hh], [-hw, *hh]],
            DomainSpec::Polygon { vertices } => vertices.clone(),
            _ => Vec::new(),
        }
    }

    /// Inscribed polygon with `n_boundary` vertices for curved boundaries;
    /// polygonal domains pass through unchanged.
    pub fn polygonize(&self, n_boundary: usize) -> Result<Vec<Point>, GeometryError> {
        if n_boundary < 16 {
            return Err(GeometryError::TooFewVertices(n_boundary));
        }
        Ok(match self.as_ellipse() {
            Some((c, m)) => (0..n_boundary)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n_boundary as f64;
                    let (s, co) = t.sin_cos();
                    [c[0] + m[0][0] * co + m[0][1] * s, c[1] + m[1][0] * co + m[1][1] * s]
                })
                .collect(),
            None => self.vertices(),
        })
    }

    /// Maps a point radially (from the center) onto the boundary of a curved
    /// domain; identity for polygonal ones.
    pub fn project_to_boundary(&self, p: Point) -> Point {
        match self.as_ellipse() {
            Some((c, m)) => {
                let d = [p[0] - c[0], p[1] - c[1]];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let u = [
                    (m[1][1] * d[0] - m[0][1] * d[1]) / det,
                    (-m[1][0] * d[0] + m[0][0] * d[1]) / det,
                ];
                let rho = u[0].hypot(u[1]);
                if rho == 0.0 {
                    return p;
                }
                [c[0] + d[0] / rho, c[1] + d[1] / rho]
            }
            None => p,
        }
    }

    /// Same domain scaled by `t > 0` about the origin.
    pub fn scaled(&self, t: f64) -> Self {
        match self {
            DomainSpec::Disk { center, radius } => DomainSpec::Disk {
                center: [t * center[0], t * center[1]],
                radius: t * radius,
            },
            DomainSpec::Rectangle { hw, hh } => DomainSpec::Rectangle { hw: t * hw, hh: t * hh },
            DomainSpec::Polygon { vertices } => DomainSpec::Polygon {
                vertices: vertices.iter().map(|v| [t * v[0], t * v[1]]).collect(),
            },
            DomainSpec::Ellipse { center, map } => DomainSpec::Ellipse {
                center: [t * center[0], t * center[1]],
                map: [[t * map[0][0], t * map[0][1]], [t * map[1][0], t * map[1][1]]],
            },
        }
    }
}

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// A base domain together with the rotation and shear applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedDomain {
    pub base: DomainSpec,
    pub rotation_theta: f64,
    /// `1` means no shear.
    pub shear_a: f64,
}

impl TransformedDomain {
    pub fn new(base: DomainSpec, rotation_theta: f64, shear_a: f64) -> Result<Self, GeometryError> {
        check_theta(rotation_theta)?;
        if !(shear_a > 0.0 && shear_a <= 1.0) {
            return Err(GeometryError::ShearOutOfRange(shear_a));
        }
        Ok(TransformedDomain {
            base,
            rotation_theta,
            shear_a,
        })
    }

    /// Rotation first, then the shear.
    pub fn realize(&self) -> Result<DomainSpec, GeometryError> {
        self.base.rotate(self.rotation_theta)?.shear_y(self.shear_a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn same_vertex_set(a: &[Point], b: &[Point], tol: f64) -> bool {
        a.len() == b.len()
            && a.iter()
                .all(|p| b.iter().any(|q| (p[0] - q[0]).abs() < tol && (p[1] - q[1]).abs() < tol))
    }

    #[test]
    fn rotate_examples() {
        let d = DomainSpec::disk(1.0).unwrap();
        assert_eq!(d.rotate(0.7).unwrap(), d);

        let sq = DomainSpec::square();
        let r = sq.rotate(FRAC_PI_2).unwrap();
        assert!(same_vertex_set(&r.vertices(), &sq.vertices(), 1e-12));

        let ra = DomainSpec::rectangle_ra(0.25).unwrap();
        let r = ra.rotate(FRAC_PI_2).unwrap();
        let expect = DomainSpec::rectangle(2.0, 1.0).unwrap();
        assert!(same_vertex_set(&r.vertices(), &expect.vertices(), 1e-12));
        assert!(sq.rotate(-0.1).is_err());
        assert!(sq.rotate(2.0).is_err());
    }

    #[test]
    fn shear_examples() {
        let sq = DomainSpec::l_shape();
        assert_eq!(sq.shear_y(1.0).unwrap(), sq);

        let e = DomainSpec::disk(1.0).unwrap().shear_y(0.25).unwrap();
        assert_relative_eq!(e.area(), PI / 2.0, epsilon = 1e-14);
        assert_relative_eq!(e.project_to_boundary([0.0, 0.1])[1], 0.5, epsilon = 1e-14);

        let ra = DomainSpec::rectangle_ra(0.25).unwrap();
        assert_eq!(ra.shear_y(0.25).unwrap(), DomainSpec::square());
        assert!(ra.shear_y(0.0).is_err());
        assert!(ra.shear_y(1.5).is_err());
    }

    #[test]
    fn area_examples() {
        assert_relative_eq!(DomainSpec::disk(1.0).unwrap().area(), PI);
        assert_eq!(DomainSpec::square().area(), 4.0);
        assert_eq!(DomainSpec::rectangle_ra(0.25).unwrap().area(), 8.0);
        assert_eq!(DomainSpec::l_shape().area(), 3.0);
    }

    #[test]
    fn polygonize_examples() {
        let d = DomainSpec::disk(1.0).unwrap();
        let vs = d.polygonize(4096).unwrap();
        let n = 4096.0;
        assert_relative_eq!(shoelace(&vs), 0.5 * n * (2.0 * PI / n).sin(), epsilon = 1e-12);
        assert!((shoelace(&vs) - PI).abs() < 1e-5);

        let e = d.shear_y(0.25).unwrap();
        assert!((shoelace(&e.polygonize(4096).unwrap()) - PI / 2.0).abs() < 1e-5);

        let sq = DomainSpec::square();
        assert_eq!(sq.polygonize(64).unwrap(), sq.vertices());
        assert!(matches!(d.polygonize(8), Err(GeometryError::TooFewVertices(8))));
        validate_polygon(&vs).unwrap();
    }

    #[test]
    fn polygon_validation() {
        assert!(DomainSpec::polygon(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // clockwise
        assert!(DomainSpec::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        // bow tie
        assert!(DomainSpec::polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(DomainSpec::polygon(DomainSpec::l_shape().vertices()).is_ok());
        assert!(DomainSpec::disk(-1.0).is_err());
        assert!(DomainSpec::rectangle(1.0, 0.0).is_err());
    }

    #[test]
    fn json_shapes() {
        let d: DomainSpec = serde_json::from_str(r#"{"type":"disk","radius":1.0}"#).unwrap();
        assert_eq!(d, DomainSpec::disk(1.0).unwrap());
        let r: DomainSpec = serde_json::from_str(r#"{"type":"rectangle","hw":1,"hh":2}"#).unwrap();
        assert_eq!(r, DomainSpec::rectangle(1.0, 2.0).unwrap());
        let p: DomainSpec =
            serde_json::from_str(r#"{"type":"polygon","vertices":[[0,0],[1,0],[0,1]]}"#).unwrap();
        assert_eq!(p.area(), 0.5);
    }

    #[test]
    fn transformed_domain_realizes_rotation_then_shear() {
        let t = TransformedDomain::new(DomainSpec::rectangle_ra(0.25).unwrap(), FRAC_PI_4, 0.25).unwrap();
        let got = t.realize().unwrap().vertices();
        let s = 0.5f64;
        let want: Vec<Point> = DomainSpec::rectangle_ra(0.25)
            .unwrap()
            .vertices()
            .iter()
            .map(|&v| {
                let r = rot_t(FRAC_PI_4, v);
                [r[0], s * r[1]]
            })
            .collect();
        assert!(same_vertex_set(&got, &want, 1e-12));
        assert!(TransformedDomain::new(DomainSpec::square(), 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn rotation_preserves_area(theta in 0.0f64..FRAC_PI_2) {
            for d in [DomainSpec::l_shape(), DomainSpec::rectangle(1.0, 3.0).unwrap(), DomainSpec::disk(2.0).unwrap().shear_y(0.3).unwrap()] {
                let r = d.rotate(theta).unwrap();
                prop_assert!((r.area() - d.area()).abs() <= 1e-12 * d.area());
                r.validate().unwrap();
            }
        }

        #[test]
        fn shear_scales_area(a in 0.01f64..1.0, theta in 0.0f64..FRAC_PI_2) {
            let d = DomainSpec::l_shape().rotate(theta).unwrap();
            let s = d.shear_y(a).unwrap();
            prop_assert!((s.area() - a.sqrt() * d.area()).abs() <= 1e-12 * d.area());
        }

        #[test]
        fn rotations_compose(t1 in 0.0f64..0.7, t2 in 0.0f64..0.8) {
            let d = DomainSpec::l_shape();
            let two = d.rotate(t1).unwrap().rotate(t2).unwrap().vertices();
            let one = d.rotate(t1 + t2).unwrap().vertices();
            for (p, q) in two.iter().zip(&one) {
                prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
            }
        }

        #[test]
        fn disk_is_fixed_by_rotation(theta in 0.0f64..FRAC_PI_2) {
            let d = DomainSpec::disk(1.5).unwrap();
            let r = d.rotate(theta).unwrap();
            let (p, q) = (d.polygonize(64).unwrap(), r.polygonize(64).unwrap());
            prop_assert!(same_vertex_set(&p, &q, 1e-12));
        }
    }
}
