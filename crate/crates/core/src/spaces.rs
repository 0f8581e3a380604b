//! Finite element spaces on a triangulation: CR, enriched CR, lowest-order
//! Raviart-Thomas, piecewise constants, P1 and conforming P3, together with
//! their degree-of-freedom maps and canonical interpolations.
//!
//! DOF layout by kind:
//! - CR, RT0: one per edge (edge index)
//! - ECR: one per edge, then one per triangle (`n_edges + t`)
//! - P0: one per triangle
//! - P1: one per vertex
//! - P3: vertices, then two nodes per edge (`n_v + 2e`, `n_v + 2e + 1` at
//!   1/3 and 2/3 along the stored edge direction), then one per triangle
//!
//! RT0 coefficients are mean normal fluxes with respect to the global edge
//! normal (pointing K_e^1 -> K_e^2); the local basis on an element is
//! `sign * |e_i|/(2|K|) (x - p_i)`.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geom::Vec2;
use crate::mesh::{BoundaryTag, ElementGeometry, Mesh};
use crate::quad::{integrate_edge, EdgeRule, TriangleRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeKind {
    Cr,
    Ecr,
    Rt0,
    P0,
    P1,
    P3,
}

impl FeKind {
    pub fn name(self) -> &'static str {
        match self {
            FeKind::Cr => "CR",
            FeKind::Ecr => "ECR",
            FeKind::Rt0 => "RT0",
            FeKind::P0 => "P0",
            FeKind::P1 => "P1",
            FeKind::P3 => "P3",
        }
    }

    pub fn is_scalar(self) -> bool {
        self != FeKind::Rt0
    }
}

/// Which boundary tags are treated as essential for the primal spaces.
/// Crack faces default to natural (Neumann) conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BcConfig {
    pub crack_dirichlet: bool,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig { crack_dirichlet: false }
    }
}

impl BcConfig {
    pub fn essential(self, tag: BoundaryTag) -> bool {
        match tag {
            BoundaryTag::Dirichlet => true,
            BoundaryTag::CrackUpper | BoundaryTag::CrackLower => self.crack_dirichlet,
            _ => false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    pub kind: FeKind,
    pub n_dofs: usize,
    /// True on DOFs attached to essential-boundary entities.
    pub dirichlet_mask: Vec<bool>,
    pub bc: BcConfig,
    n_vertices: usize,
    n_edges: usize,
}

impl FeSpace {
    pub fn new(mesh: &Mesh, kind: FeKind) -> FeSpace {
        FeSpace::with_bc(mesh, kind, BcConfig::default())
    }

    pub fn with_bc(mesh: &Mesh, kind: FeKind, bc: BcConfig) -> FeSpace {
        let (nv, ne, nt) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_triangles());
        let n_dofs = match kind {
            FeKind::Cr | FeKind::Rt0 => ne,
            FeKind::Ecr => ne + nt,
            FeKind::P0 => nt,
            FeKind::P1 => nv,
            FeKind::P3 => nv + 2 * ne + nt,
        };
        let mut mask = vec![false; n_dofs];
        let essential_edge: Vec<bool> = mesh.edges.iter().map(|e| bc.essential(e.tag)).collect();
        match kind {
            FeKind::Cr | FeKind::Ecr | FeKind::Rt0 => {
                for (e, &ess) in essential_edge.iter().enumerate() {
                    mask[e] = ess;
                }
            }
            FeKind::P0 => {}
            FeKind::P1 | FeKind::P3 => {
                let mut vertex_ess = vec![false; nv];
                for (e, edge) in mesh.edges.iter().enumerate() {
                    if essential_edge[e] {
                        vertex_ess[edge.v[0]] = true;
                        vertex_ess[edge.v[1]] = true;
                    }
                }
                for (v, &ess) in vertex_ess.iter().enumerate() {
                    mask[v] = ess;
                }
                if kind == FeKind::P3 {
                    for (e, &ess) in essential_edge.iter().enumerate() {
                        mask[nv + 2 * e] = ess;
                        mask[nv + 2 * e + 1] = ess;
                    }
                }
            }
        }
        FeSpace {
            kind,
            n_dofs,
            dirichlet_mask: mask,
            bc,
            n_vertices: nv,
            n_edges: ne,
        }
    }

    pub fn n_free(&self) -> usize {
        self.dirichlet_mask.iter().filter(|&&m| !m).count()
    }

    pub fn edge_dof(&self, e: usize) -> usize {
        match self.kind {
            FeKind::Cr | FeKind::Ecr | FeKind::Rt0 => e,
            _ => panic!("{} has no edge DOFs", self.kind.name()),
        }
    }

    pub fn element_dof(&self, t: usize) -> usize {
        match self.kind {
            FeKind::Ecr => self.n_edges + t,
            FeKind::P0 => t,
            FeKind::P3 => self.n_vertices + 2 * self.n_edges + t,
            _ => panic!("{} has no element DOFs", self.kind.name()),
        }
    }

    /// Global DOF ids of element `t` in local basis order.
    pub fn local_dofs(&self, mesh: &Mesh, t: usize) -> Vec<usize> {
        let edges = mesh.tri_edges[t];
        match self.kind {
            FeKind::Cr | FeKind::Rt0 => edges.to_vec(),
            FeKind::Ecr => {
                let mut d = edges.to_vec();
                d.push(self.n_edges + t);
                d
            }
            FeKind::P0 => vec![t],
            FeKind::P1 => mesh.triangles[t].to_vec(),
            FeKind::P3 => {
                let mut d = mesh.triangles[t].to_vec();
                for &e in &edges {
                    d.push(self.n_vertices + 2 * e);
                    d.push(self.n_vertices + 2 * e + 1);
                }
                d.push(self.n_vertices + 2 * self.n_edges + t);
                d
            }
        }
    }
}

/// Finite element function: coefficients over a space's global DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct FeFunction {
    pub kind: FeKind,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: &FeSpace) -> FeFunction {
        FeFunction { kind: space.kind, coeffs: vec![0.0; space.n_dofs] }
    }

    /// Zero out essential-boundary coefficients.
    pub fn zero_dirichlet(&mut self, space: &FeSpace) {
        for (c, &m) in self.coeffs.iter_mut().zip(space.dirichlet_mask.iter()) {
            if m {
                *c = 0.0;
            }
        }
    }

    /// Debug export as `dof_index,value` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dof_index,value\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            s.push_str(&format!("{i},{c:.17e}\n"));
        }
        s
    }
}

/// Local basis of one element, able to evaluate values, gradients and (for
/// RT0) divergences at physical points.
pub struct ElementBasis {
    pub kind: FeKind,
    pub dofs: Vec<usize>,
    pub geom: ElementGeometry,
    /// RT0 only: +1 where the global edge normal is outward for this element.
    pub rt_signs: [f64; 3],
    /// P3 only: for each local edge, whether the stored edge direction starts
    /// at local vertex (i+1)%3.
    p3_edge_aligned: [bool; 3],
}

pub fn element_basis(mesh: &Mesh, space: &FeSpace, t: usize) -> ElementBasis {
    let geom = mesh.geometry(t);
    let mut rt_signs = [1.0; 3];
    if space.kind == FeKind::Rt0 {
        for i in 0..3 {
            let e = mesh.tri_edges[t][i];
            rt_signs[i] = if mesh.edge_normal(e).dot(geom.normals[i]) > 0.0 { 1.0 } else { -1.0 };
        }
    }
    let mut p3_edge_aligned = [true; 3];
    if space.kind == FeKind::P3 {
        for i in 0..3 {
            let e = mesh.tri_edges[t][i];
            p3_edge_aligned[i] = mesh.edges[e].v[0] == mesh.triangles[t][(i + 1) % 3];
        }
    }
    ElementBasis { kind: space.kind, dofs: space.local_dofs(mesh, t), geom, rt_signs, p3_edge_aligned }
}

impl ElementBasis {
    pub fn n_local(&self) -> usize {
        self.dofs.len()
    }

    fn ecr_bubble(&self, x: Vec2) -> f64 {
        let d = x - self.geom.centroid;
        2.0 - 36.0 / self.geom.h_sq * d.norm_sq()
    }

    fn ecr_bubble_grad(&self, x: Vec2) -> Vec2 {
        (x - self.geom.centroid) * (-72.0 / self.geom.h_sq)
    }

    /// Value of local scalar basis function `i` at `x`.
    pub fn value(&self, i: usize, x: Vec2) -> f64 {
        let psi = self.geom.barycentric(x);
        match self.kind {
            FeKind::Cr => 1.0 - 2.0 * psi[i],
            FeKind::Ecr => {
                if i < 3 {
                    (1.0 - 2.0 * psi[i]) - self.ecr_bubble(x) / 3.0
                } else {
                    self.ecr_bubble(x)
                }
            }
            FeKind::P0 => 1.0,
            FeKind::P1 => psi[i],
            FeKind::P3 => self.p3_value(i, psi),
            FeKind::Rt0 => panic!("RT0 basis is vector-valued"),
        }
    }

    /// Gradient of local scalar basis function `i` at `x`.
    pub fn grad(&self, i: usize, x: Vec2) -> Vec2 {
        let g = &self.geom;
        match self.kind {
            FeKind::Cr => g.bary_grads[i] * -2.0,
            FeKind::Ecr => {
                if i < 3 {
                    g.bary_grads[i] * -2.0 - self.ecr_bubble_grad(x) / 3.0
                } else {
                    self.ecr_bubble_grad(x)
                }
            }
            FeKind::P0 => Vec2::ZERO,
            FeKind::P1 => g.bary_grads[i],
            FeKind::P3 => self.p3_grad(i, g.barycentric(x)),
            FeKind::Rt0 => panic!("RT0 basis is vector-valued"),
        }
    }

    /// RT0 basis vector field of local edge `i` at `x`.
    pub fn rt_value(&self, i: usize, x: Vec2) -> Vec2 {
        let g = &self.geom;
        (x - g.vertices[i]) * (self.rt_signs[i] * g.edge_lengths[i] / (2.0 * g.area))
    }

    /// Divergence of the RT0 basis of local edge `i` (constant).
    pub fn rt_div(&self, i: usize) -> f64 {
        self.rt_signs[i] * self.geom.edge_lengths[i] / self.geom.area
    }

    fn p3_value(&self, i: usize, psi: [f64; 3]) -> f64 {
        match i {
            0..=2 => 0.5 * psi[i] * (3.0 * psi[i] - 1.0) * (3.0 * psi[i] - 2.0),
            3..=8 => {
                let edge = (i - 3) / 2;
                let slot = (i - 3) % 2;
                let (a, b) = self.p3_edge_locals(edge, slot);
                4.5 * psi[a] * psi[b] * (3.0 * psi[a] - 1.0)
            }
            9 => 27.0 * psi[0] * psi[1] * psi[2],
            _ => panic!("P3 local index out of range"),
        }
    }

    fn p3_grad(&self, i: usize, psi: [f64; 3]) -> Vec2 {
        let gp = &self.geom.bary_grads;
        match i {
            0..=2 => {
                // d/dpsi of psi(3psi-1)(3psi-2)/2 = (27 psi^2 - 18 psi + 2)/2
                gp[i] * (0.5 * (27.0 * psi[i] * psi[i] - 18.0 * psi[i] + 2.0))
            }
            3..=8 => {
                let edge = (i - 3) / 2;
                let slot = (i - 3) % 2;
                let (a, b) = self.p3_edge_locals(edge, slot);
                // 9/2 [ b (6a - 1) grad_a + a (3a - 1) grad_b ]
                gp[a] * (4.5 * psi[b] * (6.0 * psi[a] - 1.0)) + gp[b] * (4.5 * psi[a] * (3.0 * psi[a] - 1.0))
            }
            9 => {
                gp[0] * (27.0 * psi[1] * psi[2])
                    + gp[1] * (27.0 * psi[0] * psi[2])
                    + gp[2] * (27.0 * psi[0] * psi[1])
            }
            _ => panic!("P3 local index out of range"),
        }
    }

    /// Local vertex indices (a, b) such that the edge node sits at
    /// 2/3 a + 1/3 b for slot 0 and 1/3 a + 2/3 b for slot 1 -- but expressed
    /// with `a` always carrying barycentric weight 2/3.
    fn p3_edge_locals(&self, edge: usize, slot: usize) -> (usize, usize) {
        let first = (edge + 1) % 3;
        let second = (edge + 2) % 3;
        let (v0, v1) = if self.p3_edge_aligned[edge] { (first, second) } else { (second, first) };
        // slot 0 is the node at 1/3 along the stored direction (weight 2/3 on v0)
        if slot == 0 {
            (v0, v1)
        } else {
            (v1, v0)
        }
    }
}

fn check_inside(geom: &ElementGeometry, x: Vec2, t: usize) -> Result<()> {
    if geom.contains(x, 1e-10) {
        Ok(())
    } else {
        Err(Error::PointOutsideTriangle { tri: t })
    }
}

impl FeSpace {
    /// Value of a scalar FE function inside triangle `t`.
    pub fn eval(&self, mesh: &Mesh, f: &FeFunction, t: usize, x: Vec2) -> Result<f64> {
        let basis = element_basis(mesh, self, t);
        check_inside(&basis.geom, x, t)?;
        Ok(self.eval_local(&basis, f, x))
    }

    /// Same as [`FeSpace::eval`] but reusing a precomputed element basis and
    /// skipping the inside check (assembly-internal hot path).
    pub fn eval_local(&self, basis: &ElementBasis, f: &FeFunction, x: Vec2) -> f64 {
        (0..basis.n_local()).map(|i| f.coeffs[basis.dofs[i]] * basis.value(i, x)).sum()
    }

    /// Gradient of a scalar FE function inside triangle `t`.
    pub fn eval_grad(&self, mesh: &Mesh, f: &FeFunction, t: usize, x: Vec2) -> Result<Vec2> {
        let basis = element_basis(mesh, self, t);
        check_inside(&basis.geom, x, t)?;
        Ok(self.eval_grad_local(&basis, f, x))
    }

    pub fn eval_grad_local(&self, basis: &ElementBasis, f: &FeFunction, x: Vec2) -> Vec2 {
        let mut g = Vec2::ZERO;
        for i in 0..basis.n_local() {
            g += basis.grad(i, x) * f.coeffs[basis.dofs[i]];
        }
        g
    }

    /// RT0 vector field value inside triangle `t`.
    pub fn eval_rt(&self, mesh: &Mesh, f: &FeFunction, t: usize, x: Vec2) -> Result<Vec2> {
        if self.kind != FeKind::Rt0 {
            return Err(Error::WrongSpaceKind { expected: "RT0", got: self.kind.name() });
        }
        let basis = element_basis(mesh, self, t);
        check_inside(&basis.geom, x, t)?;
        Ok(self.eval_rt_local(&basis, f, x))
    }

    pub fn eval_rt_local(&self, basis: &ElementBasis, f: &FeFunction, x: Vec2) -> Vec2 {
        let mut v = Vec2::ZERO;
        for i in 0..3 {
            v += basis.rt_value(i, x) * f.coeffs[basis.dofs[i]];
        }
        v
    }

    /// Elementwise divergence of an RT0 function (piecewise constant).
    pub fn eval_rt_div(&self, mesh: &Mesh, f: &FeFunction, t: usize) -> Result<f64> {
        if self.kind != FeKind::Rt0 {
            return Err(Error::WrongSpaceKind { expected: "RT0", got: self.kind.name() });
        }
        let basis = element_basis(mesh, self, t);
        Ok((0..3).map(|i| f.coeffs[basis.dofs[i]] * basis.rt_div(i)).sum())
    }
}

/// Quadrature orders used by the canonical interpolations.
fn edge_rule() -> &'static EdgeRule {
    EdgeRule::gauss(5)
}

fn tri_rule() -> &'static TriangleRule {
    TriangleRule::degree(6)
}

/// Edge means (1/|e|) int_e v ds of an analytic field over all mesh edges.
fn edge_means(mesh: &Mesh, v: &ScalarField) -> Vec<f64> {
    (0..mesh.n_edges())
        .map(|e| {
            let (a, b) = mesh.edge_endpoints(e);
            integrate_edge(edge_rule(), a, b, |x| v.value(x)) / (b - a).norm()
        })
        .collect()
}

/// Canonical CR interpolation: edge-mean DOFs.
pub fn interp_cr(mesh: &Mesh, v: &ScalarField) -> FeFunction {
    FeFunction { kind: FeKind::Cr, coeffs: edge_means(mesh, v) }
}

/// Canonical ECR interpolation: edge means plus element means.
pub fn interp_ecr(mesh: &Mesh, v: &ScalarField) -> FeFunction {
    let mut coeffs = edge_means(mesh, v);
    coeffs.reserve(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let g = mesh.geometry(t);
        coeffs.push(g.integrate(tri_rule(), |x| v.value(x)) / g.area);
    }
    FeFunction { kind: FeKind::Ecr, coeffs }
}

/// Fortin interpolation onto RT0: mean normal flux DOFs with the global
/// orientation convention.
pub fn interp_rt(mesh: &Mesh, q: &VectorField) -> FeFunction {
    let coeffs = (0..mesh.n_edges())
        .map(|e| {
            let (a, b) = mesh.edge_endpoints(e);
            let n = mesh.edge_normal(e);
            integrate_edge(edge_rule(), a, b, |x| q.value(x).dot(n)) / (b - a).norm()
        })
        .collect();
    FeFunction { kind: FeKind::Rt0, coeffs }
}

/// L2 projection onto piecewise constants: element means.
pub fn project_p0(mesh: &Mesh, v: &ScalarField) -> FeFunction {
    let coeffs = (0..mesh.n_triangles())
        .map(|t| {
            let g = mesh.geometry(t);
            g.integrate(tri_rule(), |x| v.value(x)) / g.area
        })
        .collect();
    FeFunction { kind: FeKind::P0, coeffs }
}

/// Mean jump (1/|e|) int_e [f] ds across an interior edge, by edge quadrature
/// of the two traces.
pub fn edge_mean_jump(mesh: &Mesh, space: &FeSpace, f: &FeFunction, e: usize) -> Result<f64> {
    let edge = &mesh.edges[e];
    let lo = edge.tri_lo.ok_or(Error::NoSuchEdge(e))?;
    let (a, b) = mesh.edge_endpoints(e);
    let hi_basis = element_basis(mesh, space, edge.tri_hi);
    let lo_basis = element_basis(mesh, space, lo);
    let val = integrate_edge(edge_rule(), a, b, |x| {
        space.eval_local(&hi_basis, f, x) - space.eval_local(&lo_basis, f, x)
    });
    Ok(val / (b - a).norm())
}

/// Per-element bubble functions used in the interpolation-error expansions:
/// the three CR bubbles, the mean-one ECR bubble, and the two quadratic
/// complements of the ECR shape space.
pub struct BubbleSet<'a> {
    pub geom: &'a ElementGeometry,
}

impl<'a> BubbleSet<'a> {
    pub fn new(geom: &'a ElementGeometry) -> Self {
        BubbleSet { geom }
    }

    /// phi_CR^i = (2 psi_{i-1} - 1)(2 psi_{i+1} - 1) - (2/3) psi_i + 1/3.
    pub fn phi_cr(&self, i: usize, x: Vec2) -> f64 {
        let psi = self.geom.barycentric(x);
        let prev = psi[(i + 2) % 3];
        let next = psi[(i + 1) % 3];
        (2.0 * prev - 1.0) * (2.0 * next - 1.0) - 2.0 / 3.0 * psi[i] + 1.0 / 3.0
    }

    /// Second tangential derivative of phi_CR^i along edge j (constant):
    /// -8/|e_i|^2 when i == j, else 0.
    pub fn phi_cr_tt(&self, i: usize, j: usize) -> f64 {
        let t = self.geom.tangents[j];
        let gp = self.geom.bary_grads[(i + 2) % 3].dot(t);
        let gn = self.geom.bary_grads[(i + 1) % 3].dot(t);
        8.0 * gp * gn
    }

    /// phi_ECR = 2 - (36/H_K^2) |x - M_K|^2: zero edge means, unit element mean.
    pub fn phi_ecr(&self, x: Vec2) -> f64 {
        2.0 - 36.0 / self.geom.h_sq * (x - self.geom.centroid).norm_sq()
    }

    pub fn phi_ecr_grad(&self, x: Vec2) -> Vec2 {
        (x - self.geom.centroid) * (-72.0 / self.geom.h_sq)
    }

    /// Second derivative of phi_ECR along any direction: -72/H_K^2.
    pub fn phi_ecr_tt(&self) -> f64 {
        -72.0 / self.geom.h_sq
    }

    /// phi_ECR^1 = (x1 - M1)^2 - (x2 - M2)^2, first complement of ECR in P2.
    pub fn phi_comp1(&self, x: Vec2) -> f64 {
        let d = x - self.geom.centroid;
        d.x * d.x - d.y * d.y
    }

    /// phi_ECR^2 = (x1 - M1)(x2 - M2), second complement of ECR in P2.
    pub fn phi_comp2(&self, x: Vec2) -> f64 {
        let d = x - self.geom.centroid;
        d.x * d.y
    }
}

/// Local CR interpolation of an analytic function on one element: the three
/// edge means, ordered like the local basis.
pub fn local_cr_means(geom: &ElementGeometry, f: impl Fn(Vec2) -> f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    let [p0, p1, p2] = geom.vertices;
    let ends = [(p1, p2), (p2, p0), (p0, p1)];
    for i in 0..3 {
        out[i] = integrate_edge(edge_rule(), ends[i].0, ends[i].1, &f) / geom.edge_lengths[i];
    }
    out
}

/// Value at `x` of the local CR interpolant with the given edge means.
pub fn local_cr_value(geom: &ElementGeometry, means: [f64; 3], x: Vec2) -> f64 {
    let psi = geom.barycentric(x);
    (0..3).map(|i| means[i] * (1.0 - 2.0 * psi[i])).sum()
}

/// Local ECR interpolant (edge means + element mean) evaluated at `x`.
pub fn local_ecr_value(
    geom: &ElementGeometry,
    means: [f64; 3],
    element_mean: f64,
    x: Vec2,
) -> f64 {
    let bubbles = BubbleSet::new(geom);
    let cr = local_cr_value(geom, means, x);
    let mean_of_cr: f64 = means.iter().sum::<f64>() / 3.0;
    cr + (element_mean - mean_of_cr) * bubbles.phi_ecr(x)
}
