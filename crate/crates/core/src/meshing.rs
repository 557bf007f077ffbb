//! Interval meshes, tensor grids, and conforming triangulations of the unit
//! square refined by newest-vertex bisection (NVB).

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tolerance for treating two node coordinates as the same point.
const NODE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMesh {
    nodes: Vec<f64>,
    jump_aligned: bool,
}

impl IntervalMesh {
    pub fn from_nodes(nodes: Vec<f64>, jump_aligned: bool) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput("interval mesh must start at 0 and end at 1".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("interval mesh nodes must be strictly increasing".into()));
        }
        Ok(IntervalMesh { nodes, jump_aligned })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Whether a forced node (the coefficient jump) was built into this mesh family.
    pub fn jump_aligned(&self) -> bool {
        self.jump_aligned
    }

    pub fn contains_node(&self, x: f64) -> bool {
        self.nodes.iter().any(|&y| (y - x).abs() <= NODE_TOL)
    }

    pub fn max_h(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Distance from `x` to the closest node.
    pub fn distance_to_nodes(&self, x: f64) -> f64 {
        self.nodes.iter().map(|&y| (y - x).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// `n` equal elements, plus `force_node` when it is not already a node.
pub fn uniform_interval_mesh(n: usize, force_node: Option<f64>) -> Result<IntervalMesh> {
    if n == 0 {
        return Err(Error::InvalidInput("interval mesh needs at least one element".into()));
    }
    let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    if let Some(x) = force_node {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidInput(format!("forced node {x} not in (0,1)")));
        }
        if !nodes.iter().any(|&y| (y - x).abs() <= NODE_TOL) {
            let pos = nodes.partition_point(|&y| y < x);
            nodes.insert(pos, x);
        } else {
            // Snap the existing node so that later comparisons against x are exact.
            let k = nodes.iter().position(|&y| (y - x).abs() <= NODE_TOL).unwrap();
            nodes[k] = x;
        }
    }
    Ok(IntervalMesh { nodes, jump_aligned: force_node.is_some() })
}

/// Bisects every element at its midpoint.
pub fn refine_interval(mesh: &IntervalMesh) -> IntervalMesh {
    let mut nodes = Vec::with_capacity(2 * mesh.nodes.len() - 1);
    for w in mesh.nodes.windows(2) {
        nodes.push(w[0]);
        nodes.push(0.5 * (w[0] + w[1]));
    }
    nodes.push(1.0);
    IntervalMesh { nodes, jump_aligned: mesh.jump_aligned }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Dirichlet,
    Robin,
}

impl BoundaryTag {
    fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "D",
            BoundaryTag::Robin => "R",
        }
    }
}

/// Conforming triangulation of the unit square.
///
/// Each triangle `[v0, v1, v2]` is counter-clockwise with its refinement edge
/// `(v1, v2)` opposite the newest vertex `v0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<(usize, usize, BoundaryTag)>,
}

/// Boundary tag of a boundary segment by the geometric rule; `None` if not on the boundary.
pub fn classify_boundary(p: [f64; 2], q: [f64; 2]) -> Option<BoundaryTag> {
    let on = |a: f64, b: f64, v: f64| (a - v).abs() <= NODE_TOL && (b - v).abs() <= NODE_TOL;
    if on(p[0], q[0], 0.0) || on(p[1], q[1], 0.0) {
        Some(BoundaryTag::Dirichlet)
    } else if on(p[0], q[0], 1.0) || on(p[1], q[1], 1.0) {
        Some(BoundaryTag::Robin)
    } else {
        None
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    /// Longest edge length.
    pub fn diameter(&self, t: usize) -> f64 {
        let v = self.triangles[t].map(|i| self.vertices[i]);
        (0..3)
            .map(|k| {
                let (p, q) = (v[(k + 1) % 3], v[(k + 2) % 3]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn min_angle(&self, t: usize) -> f64 {
        let v = self.triangles[t].map(|i| self.vertices[i]);
        (0..3)
            .map(|k| {
                let (o, p, q) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
                let (u, w) = ([p[0] - o[0], p[1] - o[1]], [q[0] - o[0], q[1] - o[1]]);
                let cos = (u[0] * w[0] + u[1] * w[1]) / ((u[0].hypot(u[1])) * (w[0].hypot(w[1])));
                cos.clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Map from undirected edge to the triangles containing it.
    pub fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3])).or_default().push(t);
            }
        }
        map
    }

    /// Checks conformity, orientation, and boundary tagging.
    pub fn check(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            if !(self.area(t) > 0.0) {
                return Err(Error::InvalidInput(format!("triangle {t} has non-positive area")));
            }
        }
        let tagged: HashMap<(usize, usize), BoundaryTag> =
            self.boundary_edges.iter().map(|&(a, b, tag)| (edge_key(a, b), tag)).collect();
        if tagged.len() != self.boundary_edges.len() {
            return Err(Error::InvalidInput("duplicate boundary edge".into()));
        }
        for (edge, tris) in self.edge_triangles() {
            let geometric = classify_boundary(self.vertices[edge.0], self.vertices[edge.1]);
            match (tris.len(), geometric, tagged.get(&edge)) {
                (2, None, None) => {}
                (1, Some(g), Some(&t)) if g == t => {}
                (n, g, t) => {
                    return Err(Error::InvalidInput(format!(
                        "edge {edge:?}: {n} triangles, geometric tag {g:?}, stored tag {t:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Line-oriented dump: `v x y`, `t i j k r`, `e i j TAG`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.16e} {:.16e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {} 0", t[0], t[1], t[2]);
        }
        for &(a, b, tag) in &self.boundary_edges {
            let _ = writeln!(s, "e {a} {b} {}", tag.as_str());
        }
        s
    }
}

/// `n0 × n0` squares, each split along its bottom-left → top-right diagonal.
pub fn initial_square_triangulation(n0: usize) -> Result<TriMesh> {
    if n0 == 0 {
        return Err(Error::InvalidInput("n0 must be at least 1".into()));
    }
    let idx = |i: usize, j: usize| j * (n0 + 1) + i;
    let h = 1.0 / n0 as f64;
    let mut vertices = Vec::with_capacity((n0 + 1) * (n0 + 1));
    for j in 0..=n0 {
        for i in 0..=n0 {
            vertices.push([if i == n0 { 1.0 } else { i as f64 * h }, if j == n0 { 1.0 } else { j as f64 * h }]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n0 * n0);
    for j in 0..n0 {
        for i in 0..n0 {
            let (p00, p10, p11, p01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // Newest vertex opposite the diagonal in both halves.
            triangles.push([p10, p11, p00]);
            triangles.push([p01, p00, p11]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(4 * n0);
    for k in 0..n0 {
        boundary_edges.push((idx(k, 0), idx(k + 1, 0), BoundaryTag::Dirichlet));
        boundary_edges.push((idx(0, k), idx(0, k + 1), BoundaryTag::Dirichlet));
        boundary_edges.push((idx(n0, k), idx(n0, k + 1), BoundaryTag::Robin));
        boundary_edges.push((idx(k, n0), idx(k + 1, n0), BoundaryTag::Robin));
    }
    Ok(TriMesh { vertices, triangles, boundary_edges })
}

/// Bisects every marked triangle plus the minimal set needed for conformity.
pub fn nvb_refine(mesh: &TriMesh, marked: &BTreeSet<usize>) -> Result<TriMesh> {
    if let Some(&t) = marked.iter().find(|&&t| t >= mesh.triangles.len()) {
        return Err(Error::InvalidInput(format!("marked triangle {t} out of range")));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let ref_edge = |tri: &[usize; 3]| edge_key(tri[1], tri[2]);

    // Closure: any triangle with a bisected edge must bisect its refinement edge.
    let mut bisect: BTreeSet<(usize, usize)> = marked.iter().map(|&t| ref_edge(&mesh.triangles[t])).collect();
    let edge_tris = mesh.edge_triangles();
    let mut queue: Vec<(usize, usize)> = bisect.iter().copied().collect();
    while let Some(e) = queue.pop() {
        for &t in &edge_tris[&e] {
            let r = ref_edge(&mesh.triangles[t]);
            if bisect.insert(r) {
                queue.push(r);
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(bisect.len());
    for &(a, b) in &bisect {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        midpoint.insert((a, b), vertices.len());
        vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
    }

    let mut triangles = Vec::with_capacity(mesh.triangles.len() + 2 * bisect.len());
    let mut stack: Vec<[usize; 3]> = Vec::new();
    for tri in &mesh.triangles {
        stack.push(*tri);
        while let Some(t) = stack.pop() {
            match midpoint.get(&ref_edge(&t)) {
                Some(&m) => {
                    let [v0, v1, v2] = t;
                    stack.push([m, v2, v0]);
                    stack.push([m, v0, v1]);
                }
                None => triangles.push(t),
            }
        }
    }

    let mut boundary_edges = Vec::with_capacity(mesh.boundary_edges.len());
    let mut split: Vec<(usize, usize, BoundaryTag)> = mesh.boundary_edges.clone();
    while let Some((a, b, tag)) = split.pop() {
        match midpoint.get(&edge_key(a, b)) {
            Some(&m) => {
                split.push((a, m, tag));
                split.push((m, b, tag));
            }
            None => boundary_edges.push((a, b, tag)),
        }
    }
    boundary_edges.sort_unstable();
    Ok(TriMesh { vertices, triangles, boundary_edges })
}

/// Marks every triangle once.
pub fn nvb_refine_uniform(mesh: &TriMesh) -> TriMesh {
    let all: BTreeSet<usize> = (0..mesh.triangles.len()).collect();
    nvb_refine(mesh, &all).expect("all indices are in range")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    dim: usize,
    axis: IntervalMesh,
}

pub fn tensor_grid(dim: usize, axis: IntervalMesh) -> Result<TensorGrid> {
    if !(dim == 2 || dim == 3) {
        return Err(Error::InvalidInput(format!("tensor grid dimension {dim} not in {{2,3}}")));
    }
    Ok(TensorGrid { dim, axis })
}

impl TensorGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axis(&self) -> &IntervalMesh {
        &self.axis
    }

    pub fn num_points(&self) -> usize {
        self.axis.nodes.len().pow(self.dim as u32)
    }

    /// Grid lines hit `x_i = b` iff the axis mesh has `b` as a node.
    pub fn aligned_with(&self, b: f64) -> bool {
        self.axis.contains_node(b)
    }
}
