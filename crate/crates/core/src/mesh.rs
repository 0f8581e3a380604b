//! Built-in triangulations, uniform red refinement and per-element geometry.
//!
//! Meshes are immutable after construction; refinement is a pure function and
//! numbering is deterministic: midpoint vertices are appended in edge order
//! and the children of triangle `t` get labels `4t..4t+3`.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::quad::{integrate_triangle, TriangleRule};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    Neumann,
    CrackUpper,
    CrackLower,
}

impl BoundaryTag {
    pub fn is_boundary(self) -> bool {
        self != BoundaryTag::Interior
    }

    pub fn is_crack(self) -> bool {
        matches!(self, BoundaryTag::CrackUpper | BoundaryTag::CrackLower)
    }
}

/// Oriented edge record. `v` keeps the traversal order of the first triangle
/// that produced the side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub v: [usize; 2],
    /// Adjacent triangle with the larger global label (the paper's K_e^1).
    /// For boundary edges this is the only adjacent triangle.
    pub tri_hi: usize,
    /// Adjacent triangle with the smaller label (K_e^2); `None` on boundary.
    pub tri_lo: Option<usize>,
    pub tag: BoundaryTag,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.tri_lo.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainId {
    Square2,
    Square5,
    TriangleJump,
    Crack8,
}

impl std::str::FromStr for DomainId {
    type Err = Error;
    fn from_str(s: &str) -> Result<DomainId> {
        match s {
            "square2" | "square" => Ok(DomainId::Square2),
            "square5" | "square_nonuniform" => Ok(DomainId::Square5),
            "triangle_jump" | "jump" | "jump_triangle" => Ok(DomainId::TriangleJump),
            "crack8" | "crack" => Ok(DomainId::Crack8),
            other => Err(Error::UnknownDomain(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// `tri_edges[t][i]` is the global edge opposite local vertex `i` of `t`.
    pub tri_edges: Vec<[usize; 3]>,
    /// Refinement depth, 1 for the initial triangulations.
    pub level: u32,
    /// Duplicated vertex pairs along the crack, as (upper id, lower id).
    pub crack_pairs: Vec<(usize, usize)>,
    /// Crack segment endpoints, when the domain has a crack.
    pub crack: Option<[Vec2; 2]>,
}

fn on_segment(p: Vec2, seg: [Vec2; 2]) -> bool {
    let d = seg[1] - seg[0];
    let len = d.norm();
    let r = p - seg[0];
    let off = d.cross(r).abs() / len;
    let t = d.dot(r) / (len * len);
    off <= 1e-12 * len && (-1e-12..=1.0 + 1e-12).contains(&t)
}

/// Builds the edge table. Sides whose both endpoints lie on the crack segment
/// are never paired across it: each incident triangle gets its own record,
/// tagged by which side of the segment the triangle lies on. Remaining
/// unmatched sides get their tag from `boundary_tag`.
fn build_edges(
    vertices: &[Vec2],
    triangles: &[[usize; 3]],
    crack: Option<[Vec2; 2]>,
    boundary_tag: impl Fn(usize, [usize; 2]) -> BoundaryTag,
) -> (Vec<Edge>, Vec<[usize; 3]>) {
    let mut edges: Vec<Edge> = Vec::new();
    let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
    let mut open: HashMap<(usize, usize), usize> = HashMap::new();

    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let a = tri[(i + 1) % 3];
            let b = tri[(i + 2) % 3];
            let crack_side = crack
                .map(|seg| on_segment(vertices[a], seg) && on_segment(vertices[b], seg))
                .unwrap_or(false);
            if crack_side {
                let seg = crack.unwrap();
                let centroid = (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
                let above = (seg[1] - seg[0]).cross(centroid - seg[0]) > 0.0;
                let tag = if above { BoundaryTag::CrackUpper } else { BoundaryTag::CrackLower };
                tri_edges[t][i] = edges.len();
                edges.push(Edge { v: [a, b], tri_hi: t, tri_lo: None, tag });
                continue;
            }
            let key = (a.min(b), a.max(b));
            match open.remove(&key) {
                Some(e) => {
                    let first = edges[e].tri_hi;
                    assert!(first < t, "triangle scan order violated");
                    edges[e].tri_hi = t;
                    edges[e].tri_lo = Some(first);
                    edges[e].tag = BoundaryTag::Interior;
                    tri_edges[t][i] = e;
                }
                None => {
                    tri_edges[t][i] = edges.len();
                    open.insert(key, edges.len());
                    edges.push(Edge {
                        v: [a, b],
                        tri_hi: t,
                        tri_lo: None,
                        tag: BoundaryTag::Interior, // fixed up below if unmatched
                    });
                }
            }
        }
    }
    drop(open);
    // unmatched non-crack sides are boundary
    for e in edges.iter_mut() {
        if e.tri_lo.is_none() && e.tag == BoundaryTag::Interior {
            e.tag = boundary_tag(e.tri_hi, e.v);
        }
    }
    (edges, tri_edges)
}

fn assemble_mesh(
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    crack: Option<[Vec2; 2]>,
    crack_pairs: Vec<(usize, usize)>,
    level: u32,
    boundary_tag: impl Fn(usize, [usize; 2]) -> BoundaryTag,
) -> Mesh {
    let (edges, tri_edges) = build_edges(&vertices, &triangles, crack, boundary_tag);
    Mesh { vertices, triangles, edges, tri_edges, level, crack_pairs, crack }
}

/// Builds one of the four built-in level-one triangulations.
pub fn build_initial(domain: DomainId) -> Mesh {
    match domain {
        DomainId::Square2 => {
            let vertices = vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ];
            let triangles = vec![[0, 1, 2], [0, 2, 3]];
            assemble_mesh(vertices, triangles, None, Vec::new(), 1, |_, _| BoundaryTag::Dirichlet)
        }
        DomainId::Square5 => {
            let vertices = vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(0.0, 0.9),
                Vec2::new(0.05, 0.0),
                Vec2::new(0.9, 1.0),
            ];
            let triangles = vec![[0, 5, 4], [5, 6, 4], [4, 6, 3], [5, 1, 6], [1, 2, 6]];
            assemble_mesh(vertices, triangles, None, Vec::new(), 1, |_, _| BoundaryTag::Dirichlet)
        }
        DomainId::TriangleJump => {
            let s3 = 3.0f64.sqrt();
            let a = Vec2::new(0.5, 0.5 * s3);
            let b = Vec2::new(1.0, 0.0);
            let c = Vec2::new(1.0, s3);
            let mab = (a + b) * 0.5;
            let mbc = (b + c) * 0.5;
            let mca = (c + a) * 0.5;
            let vertices = vec![a, b, c, mab, mbc, mca];
            let triangles = vec![[0, 3, 5], [3, 1, 4], [5, 4, 2], [4, 5, 3]];
            assemble_mesh(vertices, triangles, None, Vec::new(), 1, move |_, v| {
                // Gamma_3 is the vertical side x = 1 (homogeneous Neumann)
                let verts = [a, b, c, mab, mbc, mca];
                if (verts[v[0]].x - 1.0).abs() < 1e-12 && (verts[v[1]].x - 1.0).abs() < 1e-12 {
                    BoundaryTag::Neumann
                } else {
                    BoundaryTag::Dirichlet
                }
            })
        }
        DomainId::Crack8 => {
            let vertices = vec![
                Vec2::new(-1.0, -1.0),
                Vec2::new(0.0, -1.0),
                Vec2::new(1.0, -1.0),
                Vec2::new(-1.0, 0.0),
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(-1.0, 1.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(1.0, 1.0),
            ];
            let triangles = vec![
                [0, 1, 4],
                [0, 4, 3],
                [1, 2, 5],
                [1, 5, 4],
                [3, 4, 7],
                [3, 7, 6],
                [4, 5, 8],
                [4, 8, 7],
            ];
            let crack = Some([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]);
            assemble_mesh(vertices, triangles, crack, Vec::new(), 1, |_, _| BoundaryTag::Dirichlet)
        }
    }
}

/// Red refinement: each triangle is split into four by its edge midpoints.
///
/// Crack edges carry one midpoint per side; the coincident midpoints are
/// recorded in `crack_pairs` as (upper, lower).
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let nv = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    for e in &mesh.edges {
        vertices.push((mesh.vertices[e.v[0]] + mesh.vertices[e.v[1]]) * 0.5);
    }

    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        let mbc = nv + mesh.tri_edges[t][0];
        let mca = nv + mesh.tri_edges[t][1];
        let mab = nv + mesh.tri_edges[t][2];
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mbc, mca, mab]);
    }

    let mut crack_pairs = mesh.crack_pairs.clone();
    if mesh.crack.is_some() {
        // pair upper/lower crack-edge midpoints by exact endpoint coordinates:
        // both sides derive from bitwise-identical parent coordinates
        let coord_key = |e: &Edge| {
            let mut k = [
                (mesh.vertices[e.v[0]].x.to_bits(), mesh.vertices[e.v[0]].y.to_bits()),
                (mesh.vertices[e.v[1]].x.to_bits(), mesh.vertices[e.v[1]].y.to_bits()),
            ];
            k.sort_unstable();
            k
        };
        let mut lower: HashMap<_, usize> = HashMap::new();
        for (i, e) in mesh.edges.iter().enumerate() {
            if e.tag == BoundaryTag::CrackLower {
                lower.insert(coord_key(e), i);
            }
        }
        for (i, e) in mesh.edges.iter().enumerate() {
            if e.tag == BoundaryTag::CrackUpper {
                let j = lower[&coord_key(e)];
                crack_pairs.push((nv + i, nv + j));
            }
        }
    }

    let parent_edges = &mesh.edges;
    let (edges, tri_edges) = build_edges(&vertices, &triangles, mesh.crack, |_, v| {
        // a boundary child side is half of a parent edge; the midpoint
        // endpoint identifies the parent
        let mid = v.iter().copied().find(|&id| id >= nv).expect("boundary side without midpoint");
        parent_edges[mid - nv].tag
    });

    Mesh {
        vertices,
        triangles,
        edges,
        tri_edges,
        level: mesh.level + 1,
        crack_pairs,
        crack: mesh.crack,
    }
}

/// Per-element geometric quantities, edge `i` opposite vertex `i`.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub vertices: [Vec2; 3],
    pub area: f64,
    pub edge_lengths: [f64; 3],
    /// Perpendicular heights d_i, with d_i |e_i| = 2|K|.
    pub heights: [f64; 3],
    pub midpoints: [Vec2; 3],
    /// Unit outward normals.
    pub normals: [Vec2; 3],
    /// Unit tangents with counterclockwise orientation.
    pub tangents: [Vec2; 3],
    pub centroid: Vec2,
    /// H_K^2, the sum of squared edge lengths.
    pub h_sq: f64,
    /// Gradients of the barycentric coordinates psi_i.
    pub bary_grads: [Vec2; 3],
    pub diameter: f64,
}

impl ElementGeometry {
    pub fn new(vertices: [Vec2; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let area = 0.5 * (p1 - p0).cross(p2 - p0);
        assert!(area > 0.0, "triangle is not counterclockwise");
        let next = [p1, p2, p0];
        let prev = [p2, p0, p1];
        let mut edge_lengths = [0.0; 3];
        let mut heights = [0.0; 3];
        let mut midpoints = [Vec2::ZERO; 3];
        let mut normals = [Vec2::ZERO; 3];
        let mut tangents = [Vec2::ZERO; 3];
        let mut bary_grads = [Vec2::ZERO; 3];
        for i in 0..3 {
            // edge i runs from p_{i+1} to p_{i+2} along the CCW boundary
            let d = prev[i] - next[i];
            edge_lengths[i] = d.norm();
            heights[i] = 2.0 * area / edge_lengths[i];
            midpoints[i] = (next[i] + prev[i]) * 0.5;
            tangents[i] = d / edge_lengths[i];
            normals[i] = -tangents[i].perp();
            bary_grads[i] = d.perp() / (2.0 * area);
        }
        let h_sq = edge_lengths.iter().map(|l| l * l).sum();
        let diameter = edge_lengths.iter().cloned().fold(0.0, f64::max);
        ElementGeometry {
            vertices,
            area,
            edge_lengths,
            heights,
            midpoints,
            normals,
            tangents,
            centroid: (p0 + p1 + p2) / 3.0,
            h_sq,
            bary_grads,
            diameter,
        }
    }

    /// Barycentric coordinates of a point (affine, exact for interior and
    /// exterior points alike).
    pub fn barycentric(&self, x: Vec2) -> [f64; 3] {
        let [p0, p1, p2] = self.vertices;
        let a2 = 2.0 * self.area;
        [
            (p1 - x).cross(p2 - x) / a2,
            (p2 - x).cross(p0 - x) / a2,
            (p0 - x).cross(p1 - x) / a2,
        ]
    }

    pub fn point(&self, bary: [f64; 3]) -> Vec2 {
        self.vertices[0] * bary[0] + self.vertices[1] * bary[1] + self.vertices[2] * bary[2]
    }

    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        self.barycentric(x).iter().all(|&b| b >= -tol)
    }

    pub fn integrate(&self, rule: &TriangleRule, f: impl Fn(Vec2) -> f64) -> f64 {
        integrate_triangle(rule, self.vertices, f)
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_interior()).count()
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        let [a, b, c] = self.triangles[t];
        ElementGeometry::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    pub fn edge_endpoints(&self, e: usize) -> (Vec2, Vec2) {
        let edge = &self.edges[e];
        (self.vertices[edge.v[0]], self.vertices[edge.v[1]])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge_endpoints(e);
        (b - a).norm()
    }

    pub fn edge_midpoint(&self, e: usize) -> Vec2 {
        let (a, b) = self.edge_endpoints(e);
        (a + b) * 0.5
    }

    /// Unit normal of edge `e`: points from K_e^1 (larger label) to K_e^2 for
    /// interior edges, and out of the domain for boundary edges.
    pub fn edge_normal(&self, e: usize) -> Vec2 {
        let (a, b) = self.edge_endpoints(e);
        let n = (b - a).perp().normalized();
        let m = (a + b) * 0.5;
        let away_from_hi = m - self.centroid(self.edges[e].tri_hi);
        if n.dot(away_from_hi) >= 0.0 {
            n
        } else {
            -n
        }
    }

    /// Local index of edge `e` within triangle `t`.
    pub fn local_edge_index(&self, t: usize, e: usize) -> Option<usize> {
        self.tri_edges[t].iter().position(|&x| x == e)
    }

    /// Vertex of triangle `t` opposite edge `e`.
    pub fn opposite_vertex(&self, t: usize, e: usize) -> usize {
        let i = self.local_edge_index(t, e).expect("edge not in triangle");
        self.triangles[t][i]
    }

    /// Largest element diameter, the paper's h.
    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.geometry(t).diameter)
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.geometry(t).area).sum()
    }

    /// Structural soundness: positive areas, two triangles per interior edge,
    /// and the edge count identity 3 T = 2 I + B (crack edges count as
    /// boundary).
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            let [a, b, c] = self.triangles[t];
            let area =
                0.5 * (self.vertices[b] - self.vertices[a]).cross(self.vertices[c] - self.vertices[a]);
            if area <= 0.0 {
                return Err(Error::BadParams(format!("triangle {t} has nonpositive area")));
            }
        }
        let interior = self.n_interior_edges();
        let boundary = self.n_edges() - interior;
        if 3 * self.n_triangles() != 2 * interior + boundary {
            return Err(Error::BadParams(format!(
                "edge count mismatch: 3*{} != 2*{} + {}",
                self.n_triangles(),
                interior,
                boundary
            )));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if let Some(lo) = e.tri_lo {
                if lo >= e.tri_hi {
                    return Err(Error::BadParams(format!("edge {i} labels out of order")));
                }
            }
            if e.is_interior() != (e.tag == BoundaryTag::Interior) {
                return Err(Error::BadParams(format!("edge {i} tag inconsistent")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    /// Fraction of interior edges whose two triangles form a parallelogram.
    pub parallel_pair_fraction: f64,
    /// Elements left over by a greedy pairing into parallelograms.
    pub kappa: usize,
    pub is_uniform: bool,
}

/// Checks the uniformity assumption: across each interior edge, the opposite
/// vertex of one triangle must be the reflection of the other's through the
/// shared edge midpoint (tolerance 1e-12 h).
pub fn check_uniformity(mesh: &Mesh) -> UniformityReport {
    let h = mesh.max_diameter();
    let tol = 1e-12 * h;
    let mut good = 0usize;
    let mut interior = 0usize;
    let mut good_edges: Vec<usize> = Vec::new();
    for (i, e) in mesh.edges.iter().enumerate() {
        let Some(lo) = e.tri_lo else { continue };
        interior += 1;
        let c_hi = mesh.vertices[mesh.opposite_vertex(e.tri_hi, i)];
        let c_lo = mesh.vertices[mesh.opposite_vertex(lo, i)];
        let reflected = mesh.vertices[e.v[0]] + mesh.vertices[e.v[1]] - c_hi;
        if (reflected - c_lo).norm() <= tol {
            good += 1;
            good_edges.push(i);
        }
    }
    let fraction = if interior == 0 { 1.0 } else { good as f64 / interior as f64 };
    let all_good = good == interior;
    let kappa = if all_good {
        0
    } else {
        // greedy pairing across parallelogram edges, in edge order
        let mut matched = vec![false; mesh.n_triangles()];
        let mut pairs = 0usize;
        for &i in &good_edges {
            let e = &mesh.edges[i];
            let (hi, lo) = (e.tri_hi, e.tri_lo.unwrap());
            if !matched[hi] && !matched[lo] {
                matched[hi] = true;
                matched[lo] = true;
                pairs += 1;
            }
        }
        mesh.n_triangles() - 2 * pairs
    };
    UniformityReport {
        parallel_pair_fraction: fraction,
        kappa,
        is_uniform: all_good && kappa == 0,
    }
}

/// Serializable mesh snapshot, the `mesh dump` wire format.
#[derive(Serialize, Deserialize)]
pub struct MeshJson {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    /// Tags of non-interior edges keyed by "min-max" vertex ids.
    pub boundary_tags: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub level: Option<u32>,
    #[serde(default)]
    pub crack: Option<[Vec2; 2]>,
    #[serde(default)]
    pub crack_pairs: Option<Vec<(usize, usize)>>,
}

fn tag_name(tag: BoundaryTag) -> &'static str {
    match tag {
        BoundaryTag::Interior => "interior",
        BoundaryTag::Dirichlet => "dirichlet",
        BoundaryTag::Neumann => "neumann",
        BoundaryTag::CrackUpper => "crack_upper",
        BoundaryTag::CrackLower => "crack_lower",
    }
}

fn tag_from_name(s: &str) -> Result<BoundaryTag> {
    match s {
        "interior" => Ok(BoundaryTag::Interior),
        "dirichlet" => Ok(BoundaryTag::Dirichlet),
        "neumann" => Ok(BoundaryTag::Neumann),
        "crack_upper" => Ok(BoundaryTag::CrackUpper),
        "crack_lower" => Ok(BoundaryTag::CrackLower),
        other => Err(Error::BadParams(format!("unknown boundary tag `{other}`"))),
    }
}

impl Mesh {
    pub fn to_json(&self) -> MeshJson {
        let mut boundary_tags = serde_json::Map::new();
        for e in &self.edges {
            if e.tag.is_boundary() {
                let key = format!("{}-{}", e.v[0].min(e.v[1]), e.v[0].max(e.v[1]));
                boundary_tags.insert(key, serde_json::Value::String(tag_name(e.tag).to_string()));
            }
        }
        MeshJson {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            boundary_tags,
            level: Some(self.level),
            crack: self.crack,
            crack_pairs: Some(self.crack_pairs.clone()),
        }
    }

    pub fn from_json(json: &MeshJson) -> Result<Mesh> {
        let mut tags: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for (k, v) in &json.boundary_tags {
            let (a, b) = k
                .split_once('-')
                .ok_or_else(|| Error::BadParams(format!("bad edge key `{k}`")))?;
            let a: usize = a.parse().map_err(|_| Error::BadParams(format!("bad edge key `{k}`")))?;
            let b: usize = b.parse().map_err(|_| Error::BadParams(format!("bad edge key `{k}`")))?;
            let name = v
                .as_str()
                .ok_or_else(|| Error::BadParams(format!("tag for `{k}` is not a string")))?;
            tags.insert((a.min(b), a.max(b)), tag_from_name(name)?);
        }
        let mesh = assemble_mesh(
            json.vertices.clone(),
            json.triangles.clone(),
            json.crack,
            json.crack_pairs.clone().unwrap_or_default(),
            json.level.unwrap_or(1),
            |_, v| {
                tags.get(&(v[0].min(v[1]), v[0].max(v[1])))
                    .copied()
                    .unwrap_or(BoundaryTag::Dirichlet)
            },
        );
        mesh.validate()?;
        Ok(mesh)
    }
}
