//! Conforming triangulations with piecewise-linear nodal functions.
//!
//! Coarse meshes come from ear clipping (nonconvex polygons) or a center fan
//! (convex polygons, disks and ellipses); finer meshes from uniform 4-way midpoint subdivision. On curved
//! domains new boundary midpoints are pushed onto the exact boundary.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{validate_polygon, DomainSpec, GeometryError, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("triangle {0} has nonpositive area")]
    DegenerateTriangle(usize),
    #[error("ear clipping failed with {0} vertices left")]
    EarClipping(usize),
    #[error("mesh has no interior nodes; refine it")]
    NoInteriorNodes,
    #[error("nodal vector has length {got}, mesh has {expected} nodes")]
    Dimension { expected: usize, got: usize },
}

/// Triangulation plus the per-triangle data of the P1 space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_node: Vec<bool>,
    tri_area: Vec<f64>,
    /// Row `k` maps the three nodal values of a triangle to the k-th gradient component.
    grad_map: Vec<[[f64; 3]; 2]>,
}

/// Dense numbering of the interior (free) nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<usize>,
}

impl DofMap {
    pub fn len(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_node.is_empty()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.dof_to_node
    }

    /// Extends interior values by zero to all nodes.
    pub fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.node_to_dof.len()];
        for (d, &n) in self.dof_to_node.iter().enumerate() {
            u[n] = x[d];
        }
        u
    }

    pub fn gather(&self, u: &[f64]) -> Vec<f64> {
        self.dof_to_node.iter().map(|&n| u[n]).collect()
    }
}

fn tri_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn min_angle(a: Point, b: Point, c: Point) -> f64 {
    let ang = |p: Point, q: Point, r: Point| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let cr = u[0] * v[1] - u[1] * v[0];
        let dt = u[0] * v[0] + u[1] * v[1];
        cr.abs().atan2(dt)
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

fn point_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let d1 = tri_area(a, b, p);
    let d2 = tri_area(b, c, p);
    let d3 = tri_area(c, a, p);
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

/// Ear clipping of a simple counterclockwise polygon. Among the valid ears
/// the one with the largest minimum angle is clipped first; ties go to the
/// earliest vertex in the current ring.
pub fn triangulate(vertices: &[Point]) -> Result<Mesh, MeshError> {
    validate_polygon(vertices)?;
    let n = vertices.len();
    let mut ring: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    while ring.len() > 3 {
        let m = ring.len();
        let reflex: Vec<usize> = (0..m)
            .filter(|&i| {
                let (p, c, q) = (ring[(i + m - 1) % m], ring[i], ring[(i + 1) % m]);
                tri_area(vertices[p], vertices[c], vertices[q]) <= 0.0
            })
            .map(|i| ring[i])
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            let (p, c, q) = (ring[(i + m - 1) % m], ring[i], ring[(i + 1) % m]);
            let (a, b, d) = (vertices[p], vertices[c], vertices[q]);
            if tri_area(a, b, d) <= 0.0 {
                continue;
            }
            let blocked = reflex
                .iter()
                .any(|&r| r != p && r != c && r != q && point_in_triangle(vertices[r], a, b, d));
            if blocked {
                continue;
            }
            let quality = min_angle(a, b, d);
            if best.is_none_or(|(_, bq)| quality > bq * (1.0 + 1e-9)) {
                best = Some((i, quality));
            }
        }
        let (i, _) = best.ok_or(MeshError::EarClipping(m))?;
        tris.push([ring[(i + m - 1) % m], ring[i], ring[(i + 1) % m]]);
        ring.remove(i);
    }
    tris.push([ring[0], ring[1], ring[2]]);
    Mesh::from_parts(vertices.to_vec(), tris, vec![true; n])
}

fn is_convex(vs: &[Point]) -> bool {
    let n = vs.len();
    (0..n).all(|i| {
        let (a, b, c) = (vs[i], vs[(i + 1) % n], vs[(i + 2) % n]);
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) > 0.0
    })
}

/// Fan of a strictly convex CCW polygon around its area centroid: `n` triangles.
pub fn centroid_fan(vertices: &[Point]) -> Result<Mesh, MeshError> {
    validate_polygon(vertices)?;
    if !is_convex(vertices) {
        return Err(MeshError::EarClipping(vertices.len()));
    }
    let n = vertices.len();
    let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = (vertices[i], vertices[(i + 1) % n]);
        let cr = p[0] * q[1] - q[0] * p[1];
        a2 += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    let c = [cx / (3.0 * a2), cy / (3.0 * a2)];
    let mut nodes = vec![c];
    nodes.extend_from_slice(vertices);
    let tris = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % n]).collect();
    let mut boundary = vec![true; n + 1];
    boundary[0] = false;
    Mesh::from_parts(nodes, tris, boundary)
}

impl Mesh {
    pub fn from_parts(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_node: Vec<bool>) -> Result<Self, MeshError> {
        if boundary_node.len() != nodes.len() {
            return Err(MeshError::Dimension {
                expected: nodes.len(),
                got: boundary_node.len(),
            });
        }
        let mut tri_area_v = Vec::with_capacity(triangles.len());
        let mut grad_map = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let [p0, p1, p2] = t.map(|i| nodes[i]);
            let area = tri_area(p0, p1, p2);
            if !(area > 0.0) {
                return Err(MeshError::DegenerateTriangle(k));
            }
            let s = 0.5 / area;
            grad_map.push([
                [s * (p1[1] - p2[1]), s * (p2[1] - p0[1]), s * (p0[1] - p1[1])],
                [s * (p2[0] - p1[0]), s * (p0[0] - p2[0]), s * (p1[0] - p0[0])],
            ]);
            tri_area_v.push(area);
        }
        Ok(Mesh {
            nodes,
            triangles,
            boundary_node,
            tri_area: tri_area_v,
            grad_map,
        })
    }

    /// Coarse mesh of a domain refined `level` times. Convex polygons are fanned
    /// from their centroid, so the mesh inherits every symmetry of the polygon
    /// and moves continuously with it under affine maps; nonconvex polygons are
    /// ear-clipped. Disks and ellipses start from an eight-triangle center fan
    /// and have boundary midpoints projected onto the curve, so the boundary
    /// carries `8·2^level` vertices.
    pub fn for_domain(domain: &DomainSpec, level: usize) -> Result<Self, MeshError> {
        domain.validate()?;
        match domain.as_ellipse() {
            Some((c, m)) => {
                let mut nodes = vec![c];
                for k in 0..8 {
                    let (s, co) = (2.0 * PI * k as f64 / 8.0).sin_cos();
                    nodes.push([c[0] + m[0][0] * co + m[0][1] * s, c[1] + m[1][0] * co + m[1][1] * s]);
                }
                let tris = (0..8).map(|k| [0, 1 + k, 1 + (k + 1) % 8]).collect();
                let mut boundary = vec![true; 9];
                boundary[0] = false;
                let coarse = Mesh::from_parts(nodes, tris, boundary)?;
                coarse.refine_with(level, |p| domain.project_to_boundary(p))
            }
            None => {
                let vs = domain.vertices();
                if is_convex(&vs) {
                    centroid_fan(&vs)?.refine(level)
                } else {
                    triangulate(&vs)?.refine(level)
                }
            }
        }
    }

    pub fn refine(&self, levels: usize) -> Result<Self, MeshError> {
        self.refine_with(levels, |p| p)
    }

    /// Midpoint subdivision; `snap` places new boundary midpoints.
    pub fn refine_with(&self, levels: usize, snap: impl Fn(Point) -> Point) -> Result<Self, MeshError> {
        let mut cur = self.clone();
        for _ in 0..levels {
            let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
            for t in &cur.triangles {
                for e in 0..3 {
                    let (i, j) = (t[e], t[(e + 1) % 3]);
                    *edge_count.entry((i.min(j), i.max(j))).or_default() += 1;
                }
            }
            let mut nodes = cur.nodes.clone();
            let mut boundary = cur.boundary_node.clone();
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut tris = Vec::with_capacity(4 * cur.triangles.len());
            for t in &cur.triangles {
                let mut m = [0usize; 3];
                for (e, slot) in m.iter_mut().enumerate() {
                    let (i, j) = (t[e], t[(e + 1) % 3]);
                    let key = (i.min(j), i.max(j));
                    *slot = *mid.entry(key).or_insert_with(|| {
                        let on_boundary = edge_count[&key] == 1;
                        let (p, q) = (nodes[key.0], nodes[key.1]);
                        let mp = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                        nodes.push(if on_boundary { snap(mp) } else { mp });
                        boundary.push(on_boundary);
                        nodes.len() - 1
                    });
                }
                // m[0] on edge (t0,t1), m[1] on (t1,t2), m[2] on (t2,t0)
                tris.push([t[0], m[0], m[2]]);
                tris.push([m[0], t[1], m[1]]);
                tris.push([m[2], m[1], t[2]]);
                tris.push([m[0], m[1], m[2]]);
            }
            cur = Mesh::from_parts(nodes, tris, boundary)?;
        }
        Ok(cur)
    }

    pub fn interior_dof_map(&self) -> Result<DofMap, MeshError> {
        let mut node_to_dof = vec![None; self.nodes.len()];
        let mut dof_to_node = Vec::new();
        for (i, &b) in self.boundary_node.iter().enumerate() {
            if !b {
                node_to_dof[i] = Some(dof_to_node.len());
                dof_to_node.push(i);
            }
        }
        if dof_to_node.is_empty() {
            return Err(MeshError::NoInteriorNodes);
        }
        Ok(DofMap {
            node_to_dof,
            dof_to_node,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_nodes(&self) -> &[bool] {
        &self.boundary_node
    }

    pub fn tri_areas(&self) -> &[f64] {
        &self.tri_area
    }

    pub fn grad_maps(&self) -> &[[[f64; 3]; 2]] {
        &self.grad_map
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_node.iter().filter(|&&b| b).count()
    }

    pub fn total_area(&self) -> f64 {
        self.tri_area.iter().sum()
    }

    /// Constant gradient of the P1 interpolant of `u` on triangle `t`.
    pub fn gradient(&self, t: usize, u: &[f64]) -> [f64; 2] {
        let g = &self.grad_map[t];
        let [i, j, k] = self.triangles[t];
        [
            g[0][0] * u[i] + g[0][1] * u[j] + g[0][2] * u[k],
            g[1][0] * u[i] + g[1][1] * u[j] + g[1][2] * u[k],
        ]
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| min_angle(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Similarity copy with every node scaled by `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self, MeshError> {
        let nodes = self.nodes.iter().map(|p| [t * p[0], t * p[1]]).collect();
        Mesh::from_parts(nodes, self.triangles.clone(), self.boundary_node.clone())
    }

    /// `index,x,y,boundary` per node.
    pub fn nodes_csv(&self) -> String {
        let mut s = String::from("index,x,y,boundary\n");
        for (i, (p, b)) in self.nodes.iter().zip(&self.boundary_node).enumerate() {
            let _ = writeln!(s, "{i},{:.16e},{:.16e},{}", p[0], p[1], u8::from(*b));
        }
        s
    }

    /// `n0,n1,n2` per triangle, counterclockwise.
    pub fn triangles_csv(&self) -> String {
        let mut s = String::from("n0,n1,n2\n");
        for t in &self.triangles {
            let _ = writeln!(s, "{},{},{}", t[0], t[1], t[2]);
        }
        s
    }

    /// `x,y,u` per node.
    pub fn nodal_csv(&self, u: &[f64]) -> Result<String, MeshError> {
        if u.len() != self.nodes.len() {
            return Err(MeshError::Dimension {
                expected: self.nodes.len(),
                got: u.len(),
            });
        }
        let mut s = String::from("x,y,u\n");
        for (p, v) in self.nodes.iter().zip(u) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn edges_conforming(m: &Mesh) -> bool {
        // every interior edge shared by exactly two triangles with opposite orientation
        let mut directed: HashSet<(usize, usize)> = HashSet::new();
        for t in m.triangles() {
            for e in 0..3 {
                if !directed.insert((t[e], t[(e + 1) % 3])) {
                    return false;
                }
            }
        }
        let nodes_on_edges: HashSet<usize> = m.triangles().iter().flatten().copied().collect();
        nodes_on_edges.len() == m.n_nodes()
            && directed.iter().all(|&(i, j)| {
                let boundary_edge = !directed.contains(&(j, i));
                !boundary_edge || (m.boundary_nodes()[i] && m.boundary_nodes()[j])
            })
    }

    #[test]
    fn square_gives_two_triangles() {
        let m = triangulate(&DomainSpec::square().vertices()).unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.total_area(), 4.0);
        assert!(m.interior_dof_map().is_err());
    }

    #[test]
    fn convex_polygon_fan_count() {
        let d = DomainSpec::disk(1.0).unwrap();
        for n in [16, 17, 40] {
            let m = triangulate(&d.polygonize(n).unwrap()).unwrap();
            assert_eq!(m.n_triangles(), n - 2);
            assert!(edges_conforming(&m));
        }
    }

    #[test]
    fn l_shape_triangulation() {
        // ear clipping by hand: the reflex corner (0, 0) cannot be an ear tip and
        // the hexagon splits into 4 triangles of total area 3
        let m = triangulate(&DomainSpec::l_shape().vertices()).unwrap();
        assert_eq!(m.n_triangles(), 4);
        assert_relative_eq!(m.total_area(), 3.0, epsilon = 1e-14);
        assert!(edges_conforming(&m));
        let r = m.refine(3).unwrap();
        assert_relative_eq!(r.total_area(), 3.0, epsilon = 1e-12);
        assert!(edges_conforming(&r));
    }

    #[test]
    fn refinement_counts() {
        let m = triangulate(&DomainSpec::square().vertices()).unwrap();
        assert_eq!(m.refine(0).unwrap().n_triangles(), 2);
        let r = m.refine(3).unwrap();
        assert_eq!(r.n_triangles(), 128);
        // (2^3 + 1)^2 grid nodes
        assert_eq!(r.n_nodes(), 81);
        assert!(edges_conforming(&r));
        assert!(r.min_angle() >= m.min_angle() - 1e-12);
    }

    #[test]
    fn interior_dofs_level_two() {
        let m = triangulate(&DomainSpec::square().vertices()).unwrap().refine(2).unwrap();
        let dofs = m.interior_dof_map().unwrap();
        assert_eq!(m.n_nodes(), 25);
        assert_eq!(m.n_boundary(), 16);
        assert_eq!(dofs.len(), 9);
        for (d, &n) in dofs.nodes().iter().enumerate() {
            assert_eq!(dofs.dof(n), Some(d));
            assert!(!m.boundary_nodes()[n]);
        }
        assert_eq!(dofs.len() + m.n_boundary(), m.n_nodes());
    }

    #[test]
    fn boundary_flags_follow_the_boundary() {
        let m = Mesh::for_domain(&DomainSpec::l_shape(), 4).unwrap();
        for (p, &b) in m.nodes().iter().zip(m.boundary_nodes()) {
            let on = (p[0].abs() - 1.0).abs() < 1e-12
                || (p[1].abs() - 1.0).abs() < 1e-12
                || (p[0].abs() < 1e-12 && p[1] >= 0.0)
                || (p[1].abs() < 1e-12 && p[0] >= 0.0);
            assert_eq!(on, b, "node {p:?}");
        }
    }

    #[test]
    fn disk_mesh_projects_onto_circle() {
        let m = Mesh::for_domain(&DomainSpec::disk(1.0).unwrap(), 5).unwrap();
        assert_eq!(m.n_boundary(), 8 * 32);
        for (p, &b) in m.nodes().iter().zip(m.boundary_nodes()) {
            if b {
                assert_relative_eq!(p[0].hypot(p[1]), 1.0, epsilon = 1e-14);
            } else {
                assert!(p[0].hypot(p[1]) < 1.0);
            }
        }
        let n = 256.0;
        assert_relative_eq!(m.total_area(), 0.5 * n * (2.0 * PI / n).sin(), epsilon = 1e-12);
        assert!(edges_conforming(&m));
    }

    #[test]
    fn convex_domains_are_fanned_symmetrically() {
        let m = Mesh::for_domain(&DomainSpec::square(), 0).unwrap();
        assert_eq!(m.n_triangles(), 4);
        assert_eq!(m.nodes()[0], [0.0, 0.0]);
        let r = Mesh::for_domain(&DomainSpec::square(), 3).unwrap();
        assert_eq!(r.n_triangles(), 4 * 64);
        assert!(edges_conforming(&r));
        // the node set is invariant under y ↦ −y
        let key = |p: &Point| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let mut a: Vec<_> = r.nodes().iter().map(key).collect();
        let mut b: Vec<_> = r.nodes().iter().map(|p| key(&[p[0], -p[1]])).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        assert!(centroid_fan(&DomainSpec::l_shape().vertices()).is_err());
        let sheared = DomainSpec::square().rotate(0.3).unwrap().shear_y(0.2).unwrap();
        let s = Mesh::for_domain(&sheared, 2).unwrap();
        assert_relative_eq!(s.total_area(), sheared.area(), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_input() {
        let bad = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(triangulate(&bad).is_err());
        let err = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]], vec![true; 3]);
        assert!(matches!(err, Err(MeshError::DegenerateTriangle(0))));
    }

    #[test]
    fn csv_headers() {
        let m = Mesh::for_domain(&DomainSpec::square(), 1).unwrap();
        assert!(m.nodes_csv().starts_with("index,x,y,boundary\n"));
        assert_eq!(m.triangles_csv().lines().count(), 1 + m.n_triangles());
        assert!(m.nodal_csv(&[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn gradients_reproduce_affine_functions(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, theta in 0.0f64..1.5, a in 0.05f64..1.0) {
            let d = DomainSpec::l_shape().rotate(theta).unwrap().shear_y(a).unwrap();
            let m = Mesh::for_domain(&d, 2).unwrap();
            let u: Vec<f64> = m.nodes().iter().map(|p| c0 + c1 * p[0] + c2 * p[1]).collect();
            for t in 0..m.n_triangles() {
                let g = m.gradient(t, &u);
                prop_assert!((g[0] - c1).abs() < 1e-12 * (1.0 + c1.abs()) / a.sqrt());
                prop_assert!((g[1] - c2).abs() < 1e-12 * (1.0 + c2.abs()) / a);
            }
            prop_assert!((m.total_area() - d.area()).abs() <= 1e-10 * d.area());
        }
    }
}
