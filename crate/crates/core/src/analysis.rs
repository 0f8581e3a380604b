//! The mathematics on top of plain discretization: Taylor constants of the
//! Raviart-Thomas interpolation error, the per-term decomposition of the
//! eigenvalue error, the exact element relations between the mixed solution
//! and the CR/ECR source solutions, parallelogram superconvergence checks,
//! Richardson extrapolation and convergence-rate estimation.

use crate::assembly::{
    assemble_mass, assemble_mixed_rt, assemble_stiffness, CoefficientField, SparseSymMatrix,
};
use crate::error::{Error, Result};
use crate::field::{Hessian, ScalarField};
use crate::geom::Vec2;
use crate::mesh::{check_uniformity, ElementGeometry, Mesh};
use crate::quad::{integrate_edge, integrate_triangle, EdgeRule, TriangleRule};
use crate::solve::{solve_eigs_smallest, solve_sym_linear, EigenResult};
use crate::spaces::{
    element_basis, interp_cr, interp_ecr, local_cr_means, local_cr_value, local_ecr_value,
    project_p0, BcConfig, FeFunction, FeKind, FeSpace,
};

/// The two divergence-free linear fields spanning grad P2 modulo RT0:
/// phi_RT^1 = (x1 - M1, -(x2 - M2)), phi_RT^2 = (x2 - M2, x1 - M1).
fn phi_rt(geom: &ElementGeometry, which: usize, x: Vec2) -> Vec2 {
    let d = x - geom.centroid;
    match which {
        0 => Vec2::new(d.x, -d.y),
        1 => Vec2::new(d.y, d.x),
        _ => unreachable!(),
    }
}

/// Local RT interpolation of a linear vector field by the edge-midpoint flux
/// formula: Pi_RT q = sum_j (|e_j|/(2|K|)) (q(m_j).n_j) (x - p_j).
fn rt_interp_linear_coeffs(geom: &ElementGeometry, q: impl Fn(Vec2) -> Vec2) -> [f64; 3] {
    let mut a = [0.0; 3];
    for (j, slot) in a.iter_mut().enumerate() {
        *slot =
            geom.edge_lengths[j] / (2.0 * geom.area) * q(geom.midpoints[j]).dot(geom.normals[j]);
    }
    a
}

fn rt_interp_eval(geom: &ElementGeometry, coeffs: [f64; 3], x: Vec2) -> Vec2 {
    let mut v = Vec2::ZERO;
    for j in 0..3 {
        v += (x - geom.vertices[j]) * coeffs[j];
    }
    v
}

/// Local RT interpolation of a general vector field: exact edge fluxes by
/// Gauss quadrature.
fn rt_interp_field_coeffs(geom: &ElementGeometry, q: &impl Fn(Vec2) -> Vec2) -> [f64; 3] {
    let rule = EdgeRule::gauss(5);
    let [p0, p1, p2] = geom.vertices;
    let ends = [(p1, p2), (p2, p0), (p0, p1)];
    let mut a = [0.0; 3];
    for (j, slot) in a.iter_mut().enumerate() {
        let flux = integrate_edge(rule, ends[j].0, ends[j].1, |x| q(x).dot(geom.normals[j]));
        *slot = flux / (2.0 * geom.area);
    }
    a
}

/// Taylor constants gamma_RT^{ij} of the RT interpolation error, per element:
/// gamma^{ij} = (1/(h^2 |K|)) int_K (I - Pi_RT) phi^i . (I - Pi_RT) phi^j.
#[derive(Clone, Debug)]
pub struct GammaConstants {
    /// Per element: [gamma11, gamma12, gamma22].
    pub per_element: Vec<[f64; 3]>,
    /// Normalization length: the largest element diameter of the mesh.
    pub h: f64,
}

impl GammaConstants {
    /// The common value when all elements agree to `rel_tol`, as on uniform
    /// meshes.
    pub fn uniform_value(&self, rel_tol: f64) -> Option<[f64; 3]> {
        let first = *self.per_element.first()?;
        let scale = first.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for g in &self.per_element {
            for c in 0..3 {
                if (g[c] - first[c]).abs() > rel_tol * scale {
                    return None;
                }
            }
        }
        Some(first)
    }
}

pub fn gamma_constants(mesh: &Mesh) -> GammaConstants {
    let h = mesh.max_diameter();
    let rule = TriangleRule::degree(4);
    let mut per_element = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        let c1 = rt_interp_linear_coeffs(&geom, |x| phi_rt(&geom, 0, x));
        let c2 = rt_interp_linear_coeffs(&geom, |x| phi_rt(&geom, 1, x));
        let err = |which: usize, coeffs: [f64; 3], x: Vec2| {
            phi_rt(&geom, which, x) - rt_interp_eval(&geom, coeffs, x)
        };
        let scale = 1.0 / (h * h * geom.area);
        let g11 = geom.integrate(rule, |x| err(0, c1, x).dot(err(0, c1, x))) * scale;
        let g12 = geom.integrate(rule, |x| err(0, c1, x).dot(err(1, c2, x))) * scale;
        let g22 = geom.integrate(rule, |x| err(1, c2, x).dot(err(1, c2, x))) * scale;
        per_element.push([g11, g12, g22]);
    }
    GammaConstants { per_element, h }
}

/// ||(I - Pi_RT) grad w||^2 on one element for a constant-Hessian w, from the
/// gamma expansion.
pub fn rt_error_quadratic(gamma: [f64; 3], h: f64, geom: &ElementGeometry, hess: Hessian) -> f64 {
    let dev = hess.deviator();
    let mixed = hess.xy;
    h * h
        * geom.area
        * (gamma[0] / 4.0 * dev * dev + gamma[2] * mixed * mixed + gamma[1] * dev * mixed)
}

/// Direct quadrature of ||(I - Pi_RT) grad w||^2 on one element; the
/// interpolation uses the exact midpoint-flux formula (valid for linear
/// gradients, i.e. quadratic w).
pub fn rt_error_quadratic_direct(geom: &ElementGeometry, grad: impl Fn(Vec2) -> Vec2) -> f64 {
    let coeffs = rt_interp_linear_coeffs(geom, &grad);
    geom.integrate(TriangleRule::degree(4), |x| {
        let e = grad(x) - rt_interp_eval(geom, coeffs, x);
        e.dot(e)
    })
}

/// Global RT interpolation error of an analytic gradient field, both directly
/// integrated and through the h^2 gamma expansion of the Hessian.
#[derive(Clone, Copy, Debug)]
pub struct RtErrorField {
    pub direct: f64,
    pub expansion: f64,
}

pub fn rt_error_field(
    mesh: &Mesh,
    u: &ScalarField,
    gamma: &GammaConstants,
) -> Result<RtErrorField> {
    if !u.has_gradient() {
        return Err(Error::MissingDerivative("an analytic gradient"));
    }
    if !u.has_hessian() {
        return Err(Error::MissingDerivative("an analytic Hessian"));
    }
    let rule = TriangleRule::degree(6);
    let h2 = gamma.h * gamma.h;
    let mut direct = 0.0;
    let mut expansion = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        let grad = |x: Vec2| u.gradient(x).expect("checked above");
        let coeffs = rt_interp_field_coeffs(&geom, &grad);
        direct += geom.integrate(rule, |x| {
            let e = grad(x) - rt_interp_eval(&geom, coeffs, x);
            e.dot(e)
        });
        let g = gamma.per_element[t];
        expansion += h2
            * geom.integrate(rule, |x| {
                let hess = u.hessian(x).expect("checked above");
                let dev = hess.deviator();
                g[0] / 4.0 * dev * dev + g[2] * hess.xy * hess.xy + g[1] * dev * hess.xy
            });
    }
    Ok(RtErrorField { direct, expansion })
}

/// Solution of the discrete source problem (grad u_h, grad v_h) = (load, v_h)
/// for a P0 load, with the space's essential conditions applied.
pub fn solve_source_p0(mesh: &Mesh, space: &FeSpace, load: &FeFunction) -> Result<FeFunction> {
    if load.kind != FeKind::P0 {
        return Err(Error::WrongSpaceKind { expected: "P0", got: load.kind.name() });
    }
    let coeff = CoefficientField::constant(mesh, 1.0)?;
    let sys = assemble_stiffness(mesh, space, &coeff)?;
    let rule = TriangleRule::degree(4);
    let mut rhs = vec![0.0; space.n_dofs];
    for t in 0..mesh.n_triangles() {
        let basis = element_basis(mesh, space, t);
        for i in 0..basis.n_local() {
            let v = integrate_triangle(rule, basis.geom.vertices, |x| basis.value(i, x));
            rhs[basis.dofs[i]] += load.coeffs[t] * v;
        }
    }
    for (i, &m) in space.dirichlet_mask.iter().enumerate() {
        if m {
            rhs[i] = 0.0;
        }
    }
    let coeffs = solve_sym_linear(&sys.matrix, &rhs)?;
    Ok(FeFunction { kind: space.kind, coeffs })
}

/// Solution (sigma, u) of the mixed source problem with a P0 load.
pub fn solve_mixed(
    mesh: &Mesh,
    load: &FeFunction,
    bc: BcConfig,
) -> Result<(FeFunction, FeFunction)> {
    let sys = assemble_mixed_rt(mesh, load, bc)?;
    let sol = solve_sym_linear(&sys.matrix, &sys.rhs)?;
    let sigma = FeFunction { kind: FeKind::Rt0, coeffs: sol[..sys.n_flux].to_vec() };
    let displacement = FeFunction { kind: FeKind::P0, coeffs: sol[sys.n_flux..].to_vec() };
    Ok((sigma, displacement))
}

/// Scaled load lambda Pi0 u as a P0 function.
pub fn p0_load(mesh: &Mesh, lambda: f64, u: &ScalarField) -> FeFunction {
    let mut load = project_p0(mesh, u);
    for c in load.coeffs.iter_mut() {
        *c *= lambda;
    }
    load
}

/// Elementwise verification of the exact relations between the mixed RT
/// solution and the CR/ECR source solutions driven by the same load
/// lambda Pi0 u:
/// sigma|_K = grad u_CR|_K - (lambda Pi0_K u / 2)(x - M_K) and
/// sigma = grad_h u_ECR.
#[derive(Clone, Copy, Debug)]
pub struct MariniReport {
    /// max_x |sigma - (grad u_CR - (lambda Pi0 u/2)(x - M))| / max |sigma|
    pub cr_discrepancy: f64,
    /// max_x |sigma - grad u_ECR| / max |sigma|
    pub ecr_discrepancy: f64,
    pub sigma_scale: f64,
}

pub fn verify_marini(
    mesh: &Mesh,
    lambda: f64,
    u: &ScalarField,
    bc: BcConfig,
) -> Result<MariniReport> {
    let load = p0_load(mesh, lambda, u);
    let (sigma, _) = solve_mixed(mesh, &load, bc)?;
    let cr_space = FeSpace::with_bc(mesh, FeKind::Cr, bc);
    let ecr_space = FeSpace::with_bc(mesh, FeKind::Ecr, bc);
    let u_cr = solve_source_p0(mesh, &cr_space, &load)?;
    let u_ecr = solve_source_p0(mesh, &ecr_space, &load)?;
    let rt_space = FeSpace::with_bc(mesh, FeKind::Rt0, bc);

    let rule = TriangleRule::degree(4);
    let mut sigma_scale = 0.0f64;
    let mut d_cr = 0.0f64;
    let mut d_ecr = 0.0f64;
    for t in 0..mesh.n_triangles() {
        let rt_basis = element_basis(mesh, &rt_space, t);
        let cr_basis = element_basis(mesh, &cr_space, t);
        let ecr_basis = element_basis(mesh, &ecr_space, t);
        let geom = &rt_basis.geom;
        let half_p0u = load.coeffs[t] / 2.0;
        for (x, _) in rule.physical_points(geom.vertices) {
            let s = rt_space.eval_rt_local(&rt_basis, &sigma, x);
            sigma_scale = sigma_scale.max(s.norm());
            let g_cr = cr_space.eval_grad_local(&cr_basis, &u_cr, x);
            let g_ecr = ecr_space.eval_grad_local(&ecr_basis, &u_ecr, x);
            let marini_cr = g_cr - (x - geom.centroid) * half_p0u;
            d_cr = d_cr.max((s - marini_cr).norm());
            d_ecr = d_ecr.max((s - g_ecr).norm());
        }
    }
    if sigma_scale == 0.0 {
        return Ok(MariniReport { cr_discrepancy: d_cr, ecr_discrepancy: d_ecr, sigma_scale });
    }
    Ok(MariniReport {
        cr_discrepancy: d_cr / sigma_scale,
        ecr_discrepancy: d_ecr / sigma_scale,
        sigma_scale,
    })
}

/// Shared-edge detection and the parallelogram test for an element pair.
fn require_parallelogram(k1: &ElementGeometry, k2: &ElementGeometry) -> Result<()> {
    let h = k1.diameter.max(k2.diameter);
    let tol = 1e-12 * h;
    let mut shared = Vec::new();
    let mut opp1 = None;
    for (i, &v) in k1.vertices.iter().enumerate() {
        if k2.vertices.iter().any(|&w| (v - w).norm() <= tol) {
            shared.push(v);
        } else {
            opp1 = Some(i);
        }
    }
    let (Some(opp1), true) = (opp1, shared.len() == 2) else {
        return Err(Error::NotAParallelogram(f64::NAN));
    };
    let opp2 = k2
        .vertices
        .iter()
        .copied()
        .find(|&w| shared.iter().all(|&s| (w - s).norm() > tol))
        .ok_or(Error::NotAParallelogram(f64::NAN))?;
    let reflected = shared[0] + shared[1] - k1.vertices[opp1];
    let mismatch = (reflected - opp2).norm();
    if mismatch <= tol {
        Ok(())
    } else {
        Err(Error::NotAParallelogram(mismatch))
    }
}

/// (w - Pi w, v - Pi0 v) over a parallelogram pair; zero for quadratic w and
/// linear v when Pi is the CR or ECR canonical interpolation.
pub fn parallelogram_orthogonality(
    k1: &ElementGeometry,
    k2: &ElementGeometry,
    w: &ScalarField,
    v: &ScalarField,
    which: FeKind,
) -> Result<f64> {
    if which != FeKind::Cr && which != FeKind::Ecr {
        return Err(Error::WrongSpaceKind { expected: "CR or ECR", got: which.name() });
    }
    require_parallelogram(k1, k2)?;
    let rule = TriangleRule::degree(6);
    let mut total = 0.0;
    for geom in [k1, k2] {
        let means = local_cr_means(geom, |x| w.value(x));
        let w_mean = geom.integrate(rule, |x| w.value(x)) / geom.area;
        let v_mean = geom.integrate(rule, |x| v.value(x)) / geom.area;
        total += geom.integrate(rule, |x| {
            let interp = match which {
                FeKind::Cr => local_cr_value(geom, means, x),
                _ => local_ecr_value(geom, means, w_mean, x),
            };
            (w.value(x) - interp) * (v.value(x) - v_mean)
        });
    }
    Ok(total)
}

/// One discrete eigenpair with the eigenvector sign aligned to the exact
/// eigenfunction (positive L2 inner product).
pub struct AlignedEigenpair {
    pub lambda: f64,
    pub function: FeFunction,
    pub result: EigenResult,
}

pub fn aligned_eigenpair(
    mesh: &Mesh,
    space: &FeSpace,
    u: &ScalarField,
    index: usize,
    seed: u64,
) -> Result<AlignedEigenpair> {
    let coeff = CoefficientField::constant(mesh, 1.0)?;
    let sys = assemble_stiffness(mesh, space, &coeff)?;
    let mass = assemble_mass(mesh, space)?;
    let a = sys.reduction.reduce_matrix(&sys.matrix);
    let b = sys.reduction.reduce_matrix(&mass);
    let result = solve_eigs_smallest(&a, &b, index + 1, None, seed)?;
    let coeffs = sys.reduction.scatter(&result.eigenvectors[index]);
    let mut f = FeFunction { kind: space.kind, coeffs };
    let rule = TriangleRule::degree(4);
    let mut inner = 0.0;
    for t in 0..mesh.n_triangles() {
        let basis = element_basis(mesh, space, t);
        inner += integrate_triangle(rule, basis.geom.vertices, |x| {
            u.value(x) * space.eval_local(&basis, &f, x)
        });
    }
    if inner < 0.0 {
        for c in f.coeffs.iter_mut() {
            *c = -*c;
        }
    }
    Ok(AlignedEigenpair { lambda: result.eigenvalues[index], function: f, result })
}

/// Outcome of checking the exact eigenvalue-error identities against a known
/// analytic eigenpair.
#[derive(Clone, Copy, Debug)]
pub struct ErrorIdentityReport {
    pub lambda_h: f64,
    /// lambda - lambda_h.
    pub error: f64,
    /// Right-hand side of the post-commuting identity
    /// ||grad_h(u - u_h)||^2 - 2 lambda_h (u - Pi u, u_h) - lambda_h ||u - u_h||^2.
    pub rhs_commuted: f64,
    pub residual_rel: f64,
    /// Right-hand side of the raw identity with the consistency term
    /// a_h(u, u_h) - lambda_h (u, u_h) kept explicit.
    pub rhs_raw: f64,
    pub residual_raw_rel: f64,
    /// a_h(u, u_h) - lambda_h (u, u_h) + lambda_h (u - Pi u, u_h): the
    /// commuting rewrite, which vanishes to quadrature accuracy.
    pub commuting_residual: f64,
    /// Estimated quadrature floor: 10 x |degree-6 minus degree-4 evaluation|.
    pub quad_floor: f64,
}

pub fn error_identity_check(
    mesh: &Mesh,
    family: FeKind,
    lambda: f64,
    u: &ScalarField,
    seed: u64,
) -> Result<ErrorIdentityReport> {
    let space = FeSpace::new(mesh, family);
    let interp = match family {
        FeKind::Cr => interp_cr(mesh, u),
        FeKind::Ecr => {
            // the identity target is tighter than the plain-rule floor, so
            // compute the element means on subdivided children as well
            let mut f = interp_ecr(mesh, u);
            let rule = TriangleRule::degree(6);
            for t in 0..mesh.n_triangles() {
                let geom = mesh.geometry(t);
                f.coeffs[mesh.n_edges() + t] = crate::quad::integrate_triangle_composite(
                    rule,
                    geom.vertices,
                    2,
                    |x| u.value(x),
                ) / geom.area;
            }
            f
        }
        other => return Err(Error::WrongSpaceKind { expected: "CR or ECR", got: other.name() }),
    };
    let pair = aligned_eigenpair(mesh, &space, u, 0, seed)?;
    let lambda_h = pair.lambda;
    let uh = &pair.function;

    // the identity residual target sits below the plain degree-6 truncation
    // error on coarse meshes, so integrate on red-subdivided children
    let eval_terms = |sub: u32| {
        let rule = TriangleRule::degree(6);
        let mut grad_sq = 0.0;
        let mut interp_term = 0.0;
        let mut l2_sq = 0.0;
        let mut a_u_uh = 0.0;
        let mut m_u_uh = 0.0;
        for t in 0..mesh.n_triangles() {
            let basis = element_basis(mesh, &space, t);
            let tri = basis.geom.vertices;
            grad_sq += crate::quad::integrate_triangle_composite(rule, tri, sub, |x| {
                let d = u.gradient(x).expect("analytic gradient required")
                    - space.eval_grad_local(&basis, uh, x);
                d.dot(d)
            });
            interp_term += crate::quad::integrate_triangle_composite(rule, tri, sub, |x| {
                (u.value(x) - space.eval_local(&basis, &interp, x))
                    * space.eval_local(&basis, uh, x)
            });
            l2_sq += crate::quad::integrate_triangle_composite(rule, tri, sub, |x| {
                let d = u.value(x) - space.eval_local(&basis, uh, x);
                d * d
            });
            a_u_uh += crate::quad::integrate_triangle_composite(rule, tri, sub, |x| {
                u.gradient(x).expect("checked").dot(space.eval_grad_local(&basis, uh, x))
            });
            m_u_uh += crate::quad::integrate_triangle_composite(rule, tri, sub, |x| {
                u.value(x) * space.eval_local(&basis, uh, x)
            });
        }
        let rhs_commuted = grad_sq - 2.0 * lambda_h * interp_term - lambda_h * l2_sq;
        let rhs_raw = grad_sq + 2.0 * a_u_uh - 2.0 * lambda_h * m_u_uh - lambda_h * l2_sq;
        let commuting_residual = a_u_uh - lambda_h * m_u_uh + lambda_h * interp_term;
        (rhs_commuted, rhs_raw, commuting_residual)
    };

    let (rhs6, raw6, comm6) = eval_terms(2);
    let (rhs4, _, _) = eval_terms(1);
    let error = lambda - lambda_h;
    let quad_floor = 10.0 * (rhs6 - rhs4).abs();
    Ok(ErrorIdentityReport {
        lambda_h,
        error,
        rhs_commuted: rhs6,
        residual_rel: (rhs6 - error).abs() / error.abs(),
        rhs_raw: raw6,
        residual_raw_rel: (raw6 - error).abs() / error.abs(),
        commuting_residual: comm6,
        quad_floor,
    })
}

/// Every term of the eigenvalue-error decomposition on one mesh level.
///
/// For CR the identity is
/// `lambda - lambda_h = ||(I-Pi_RT) grad u||^2 + lambda^2 H^2/144 + I_CR +
/// I_RT + I_CR1 + I_CR2 + O(h^4 |ln h|)`
/// and the leading-term prediction is the gamma expansion minus
/// lambda^2 H^2/144. For ECR the projection cross term replaces the H^2
/// terms and the prediction is the gamma expansion alone.
#[derive(Clone, Copy, Debug)]
pub struct DecomposeReport {
    pub family_is_cr: bool,
    pub level: u32,
    pub h: f64,
    /// H^2 of the first element (identical per element on uniform meshes).
    pub big_h_sq: f64,
    pub lambda_h: f64,
    /// lambda - lambda_h.
    pub error: f64,
    /// ||(I - Pi_RT) grad u||^2.
    pub rt_interp_sq: f64,
    /// lambda^2 H^2 / 144 (CR only, zero otherwise).
    pub lambda_h2_over_144: f64,
    pub i_cr: f64,
    pub i_rt: f64,
    pub i_cr1: f64,
    pub i_cr2: f64,
    /// -2 lambda (u - Pi_ECR u, u - Pi0 u) (ECR only).
    pub ecr_cross: f64,
    pub i_ecr: f64,
    pub sum_terms: f64,
    pub residual: f64,
    /// h^2 gamma expansion of the RT interpolation error.
    pub gamma_leading: f64,
    /// Leading-term prediction of lambda - lambda_h.
    pub predicted_leading: f64,
    pub leading_residual: f64,
    pub mesh_is_uniform: bool,
}

pub fn decompose_error(
    mesh: &Mesh,
    family: FeKind,
    lambda: f64,
    u: &ScalarField,
    seed: u64,
) -> Result<DecomposeReport> {
    if family != FeKind::Cr && family != FeKind::Ecr {
        return Err(Error::WrongSpaceKind { expected: "CR or ECR", got: family.name() });
    }
    if !u.has_hessian() {
        return Err(Error::MissingDerivative("an analytic Hessian"));
    }
    let bc = BcConfig::default();
    let space = FeSpace::with_bc(mesh, family, bc);
    let pair = aligned_eigenpair(mesh, &space, u, 0, seed)?;
    let lambda_h = pair.lambda;
    let uh = &pair.function;

    let load = p0_load(mesh, lambda, u);
    let (sigma, _) = solve_mixed(mesh, &load, bc)?;
    let u_src = solve_source_p0(mesh, &space, &load)?;
    let rt_space = FeSpace::with_bc(mesh, FeKind::Rt0, bc);
    let interp = match family {
        FeKind::Cr => interp_cr(mesh, u),
        _ => interp_ecr(mesh, u),
    };
    let p0u = project_p0(mesh, u);
    let gamma = gamma_constants(mesh);

    let big_h_sq = mesh.geometry(0).h_sq;
    let rule = TriangleRule::degree(6);
    let h2 = gamma.h * gamma.h;

    let mut rt_interp_sq = 0.0;
    let mut i_cr = 0.0;
    let mut i_rt = 0.0;
    let mut i_cr1 = 0.0;
    let mut i_cr2 = 0.0;
    let mut ecr_cross = 0.0;
    let mut i_ecr = 0.0;
    let mut gamma_leading = 0.0;

    for t in 0..mesh.n_triangles() {
        let basis = element_basis(mesh, &space, t);
        let rt_basis = element_basis(mesh, &rt_space, t);
        let geom = &basis.geom;
        let grad = |x: Vec2| u.gradient(x).expect("analytic gradient required");
        let pi_rt = rt_interp_field_coeffs(geom, &grad);
        let g = gamma.per_element[t];
        for (x, wq) in rule.physical_points(geom.vertices) {
            let w = wq * geom.area;
            let gu = grad(x);
            let pi_gu = rt_interp_eval(geom, pi_rt, x);
            let s = rt_space.eval_rt_local(&rt_basis, &sigma, x);
            let g_src = space.eval_grad_local(&basis, &u_src, x);
            let g_eig = space.eval_grad_local(&basis, uh, x);
            let rt_err = gu - pi_gu;
            rt_interp_sq += w * rt_err.dot(rt_err);
            let hess = u.hessian(x).expect("checked");
            let dev = hess.deviator();
            gamma_leading +=
                w * h2 * (g[0] / 4.0 * dev * dev + g[2] * hess.xy * hess.xy + g[1] * dev * hess.xy);
            let vu = u.value(x);
            let vi = space.eval_local(&basis, &interp, x);
            match family {
                FeKind::Cr => {
                    i_cr += w * (2.0 * rt_err.dot(s - g_src) - 2.0 * lambda * (vu - vi) * vu);
                    i_rt += w * 2.0 * rt_err.dot(pi_gu - s);
                    i_cr1 += w * 2.0 * rt_err.dot(g_src - g_eig);
                    i_cr2 += w * 2.0 * (pi_gu - s).dot(s - g_eig);
                }
                _ => {
                    ecr_cross += w * (-2.0) * lambda * (vu - vi) * (vu - p0u.coeffs[t]);
                    i_ecr += w * 2.0 * rt_err.dot(s - g_eig);
                }
            }
        }
    }

    let error = lambda - lambda_h;
    let lambda_h2_over_144 = lambda * lambda * big_h_sq / 144.0;
    let (sum_terms, predicted_leading, h2_term) = match family {
        FeKind::Cr => (
            rt_interp_sq + lambda_h2_over_144 + i_cr + i_rt + i_cr1 + i_cr2,
            gamma_leading - lambda_h2_over_144,
            lambda_h2_over_144,
        ),
        _ => (rt_interp_sq + ecr_cross + i_ecr, gamma_leading, 0.0),
    };
    Ok(DecomposeReport {
        family_is_cr: family == FeKind::Cr,
        level: mesh.level,
        h: gamma.h,
        big_h_sq,
        lambda_h,
        error,
        rt_interp_sq,
        lambda_h2_over_144: h2_term,
        i_cr,
        i_rt,
        i_cr1,
        i_cr2,
        ecr_cross,
        i_ecr,
        sum_terms,
        residual: error - sum_terms,
        gamma_leading,
        predicted_leading,
        leading_residual: error - predicted_leading,
        mesh_is_uniform: check_uniformity(mesh).is_uniform,
    })
}

/// Supercloseness of the discrete eigenfunction to the companion source
/// solution: ||grad_h(u_h - u_h^src)||_0, and the mixed-solution distance
/// ||sigma_RT - grad_h u_h||_0 (the ECR-side bound).
#[derive(Clone, Copy, Debug)]
pub struct SuperclosenessReport {
    pub eig_vs_source: f64,
    pub sigma_vs_eig: f64,
}

pub fn superclose_check(
    mesh: &Mesh,
    family: FeKind,
    lambda: f64,
    u: &ScalarField,
    seed: u64,
) -> Result<SuperclosenessReport> {
    let bc = BcConfig::default();
    let space = FeSpace::with_bc(mesh, family, bc);
    let pair = aligned_eigenpair(mesh, &space, u, 0, seed)?;
    let load = p0_load(mesh, lambda, u);
    let u_src = solve_source_p0(mesh, &space, &load)?;
    let (sigma, _) = solve_mixed(mesh, &load, bc)?;
    let rt_space = FeSpace::with_bc(mesh, FeKind::Rt0, bc);

    // sign determined by the source solution, which has a fixed orientation
    let mass = assemble_mass(mesh, &space)?;
    let inner = mass_inner(&mass, &pair.function.coeffs, &u_src.coeffs);
    let mut eig = pair.function.clone();
    if inner < 0.0 {
        for c in eig.coeffs.iter_mut() {
            *c = -*c;
        }
    }

    let rule = TriangleRule::degree(4);
    let mut diff_sq = 0.0;
    let mut sig_sq = 0.0;
    for t in 0..mesh.n_triangles() {
        let basis = element_basis(mesh, &space, t);
        let rt_basis = element_basis(mesh, &rt_space, t);
        diff_sq += integrate_triangle(rule, basis.geom.vertices, |x| {
            let d =
                space.eval_grad_local(&basis, &eig, x) - space.eval_grad_local(&basis, &u_src, x);
            d.dot(d)
        });
        sig_sq += integrate_triangle(rule, basis.geom.vertices, |x| {
            let d = rt_space.eval_rt_local(&rt_basis, &sigma, x)
                - space.eval_grad_local(&basis, &eig, x);
            d.dot(d)
        });
    }
    Ok(SuperclosenessReport { eig_vs_source: diff_sq.sqrt(), sigma_vs_eig: sig_sq.sqrt() })
}

/// Two-mesh Richardson extrapolation with a known rate: the fine value is
/// weighted 2^alpha/(2^alpha - 1), cancelling a C h^alpha term.
pub fn richardson_known(lambda_fine: f64, lambda_coarse: f64, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::BadExtrapolation(format!("rate must be positive, got {alpha}")));
    }
    let p = 2f64.powf(alpha);
    Ok((p * lambda_fine - lambda_coarse) / (p - 1.0))
}

/// Three-mesh extrapolation with unknown rate; also returns the implied rate
/// log2((l_4h - l_2h)/(l_2h - l_h)) when the differences share a sign.
pub fn richardson_unknown(
    lambda_4h: f64,
    lambda_2h: f64,
    lambda_h: f64,
) -> Result<(f64, Option<f64>)> {
    let denom = lambda_4h + lambda_h - 2.0 * lambda_2h;
    let scale = lambda_4h.abs().max(lambda_2h.abs()).max(lambda_h.abs()).max(1e-300);
    if denom.abs() <= 1e-13 * scale {
        return Err(Error::BadExtrapolation(
            "second difference vanishes; sequence is not a power law".to_string(),
        ));
    }
    let value = ((lambda_4h - lambda_2h) * lambda_h - (lambda_2h - lambda_h) * lambda_2h) / denom;
    let ratio = (lambda_4h - lambda_2h) / (lambda_2h - lambda_h);
    let alpha_hat = if ratio > 0.0 { Some(ratio.log2()) } else { None };
    Ok((value, alpha_hat))
}

/// Observed rates log2(e_i / e_{i+1}) between consecutive levels; `None`
/// marks gaps where an error is not positive.
pub fn observed_rates(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = Vec::new();
    for w in errors.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            out.push(Some((w[0] / w[1]).log2()));
        } else {
            out.push(None);
        }
    }
    out
}

/// Extrapolated eigenvalue columns over a level hierarchy (coarsest first).
#[derive(Clone, Debug, Default)]
pub struct ExtrapolationTable {
    pub raw: Vec<f64>,
    /// Two-mesh extrapolant at each level (needs the previous level).
    pub exp1: Vec<Option<f64>>,
    /// Three-mesh extrapolant at each level (needs two previous levels).
    pub exp2: Vec<Option<f64>>,
    /// Implied rate from the three-mesh formula.
    pub alpha_hat: Vec<Option<f64>>,
}

pub fn extrapolation_table(raw: &[f64], alpha: Option<f64>) -> ExtrapolationTable {
    let n = raw.len();
    let mut table = ExtrapolationTable {
        raw: raw.to_vec(),
        exp1: vec![None; n],
        exp2: vec![None; n],
        alpha_hat: vec![None; n],
    };
    for i in 1..n {
        if let Some(a) = alpha {
            table.exp1[i] = richardson_known(raw[i], raw[i - 1], a).ok();
        }
    }
    for i in 2..n {
        if let Ok((v, ah)) = richardson_unknown(raw[i - 2], raw[i - 1], raw[i]) {
            table.exp2[i] = Some(v);
            table.alpha_hat[i] = ah;
        }
    }
    table
}

/// Mass-weighted inner product x^T M y of two coefficient vectors.
pub fn mass_inner(mass: &SparseSymMatrix, x: &[f64], y: &[f64]) -> f64 {
    let mut my = vec![0.0; mass.n];
    mass.matvec(y, &mut my);
    x.iter().zip(my.iter()).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{square_eigenfunction, square_eigenvalue, Poly2};
    use crate::mesh::{build_initial, refine_uniform, DomainId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn refined(domain: DomainId, level: u32) -> Mesh {
        let mut m = build_initial(domain);
        while m.level < level {
            m = refine_uniform(&m);
        }
        m
    }

    /// Exact integration oracle for quadratic integrands: the edge-midpoint
    /// rule int_K q = |K|/3 sum q(m_i), written out by hand so it is
    /// independent of the shipped quadrature tables.
    fn midpoint_integral(geom: &ElementGeometry, q: impl Fn(Vec2) -> f64) -> f64 {
        geom.area / 3.0 * (q(geom.midpoints[0]) + q(geom.midpoints[1]) + q(geom.midpoints[2]))
    }

    #[test]
    fn gamma_matches_exact_oracle_and_frozen_values() {
        // frozen regression values for the diagonal mesh of the unit square,
        // derived by hand: gamma11 = 1/6, gamma12 = 0, gamma22 = 1/12
        let m = refined(DomainId::Square2, 3);
        let gamma = gamma_constants(&m);
        let g = gamma.uniform_value(1e-12).expect("uniform mesh");
        assert!((g[0] - 1.0 / 6.0).abs() < 1e-14, "gamma11 {}", g[0]);
        assert!(g[1].abs() < 1e-14, "gamma12 {}", g[1]);
        assert!((g[2] - 1.0 / 12.0).abs() < 1e-14, "gamma22 {}", g[2]);

        // independent exact-integration oracle on each element
        let h = gamma.h;
        for t in 0..m.n_triangles() {
            let geom = m.geometry(t);
            let c1 = rt_interp_linear_coeffs(&geom, |x| phi_rt(&geom, 0, x));
            let c2 = rt_interp_linear_coeffs(&geom, |x| phi_rt(&geom, 1, x));
            let e1 = |x: Vec2| phi_rt(&geom, 0, x) - rt_interp_eval(&geom, c1, x);
            let e2 = |x: Vec2| phi_rt(&geom, 1, x) - rt_interp_eval(&geom, c2, x);
            let scale = 1.0 / (h * h * geom.area);
            let o11 = midpoint_integral(&geom, |x| e1(x).dot(e1(x))) * scale;
            let o12 = midpoint_integral(&geom, |x| e1(x).dot(e2(x))) * scale;
            let o22 = midpoint_integral(&geom, |x| e2(x).dot(e2(x))) * scale;
            let g = gamma.per_element[t];
            assert!((g[0] - o11).abs() < 1e-14);
            assert!((g[1] - o12).abs() < 1e-14);
            assert!((g[2] - o22).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_is_scale_invariant_across_levels() {
        let g2 = gamma_constants(&refined(DomainId::Square2, 2)).uniform_value(1e-12).unwrap();
        let g3 = gamma_constants(&refined(DomainId::Square2, 3)).uniform_value(1e-12).unwrap();
        for c in 0..3 {
            assert!((g2[c] - g3[c]).abs() <= 1e-12 * g2[c].abs().max(1.0));
        }
    }

    #[test]
    fn gamma_cross_term_is_symmetric() {
        // gamma12 from the (2,1) ordering equals the (1,2) ordering
        let m = refined(DomainId::Square5, 2);
        let gamma = gamma_constants(&m);
        let rule = TriangleRule::degree(4);
        for t in 0..m.n_triangles() {
            let geom = m.geometry(t);
            let c1 = rt_interp_linear_coeffs(&geom, |x| phi_rt(&geom, 0, x));
            let c2 = rt_interp_linear_coeffs(&geom, |x| phi_rt(&geom, 1, x));
            let g21 = geom.integrate(rule, |x| {
                (phi_rt(&geom, 1, x) - rt_interp_eval(&geom, c2, x))
                    .dot(phi_rt(&geom, 0, x) - rt_interp_eval(&geom, c1, x))
            }) / (gamma.h * gamma.h * geom.area);
            assert!((g21 - gamma.per_element[t][1]).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_not_constant_on_square5() {
        let m = refined(DomainId::Square5, 3);
        assert!(gamma_constants(&m).uniform_value(1e-12).is_none());
    }

    #[test]
    fn quadratic_expansion_matches_direct_quadrature() {
        // the Taylor expansion is an exact identity for quadratics
        let m = refined(DomainId::Square2, 3);
        let gamma = gamma_constants(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let w = Poly2::random(2, &mut rng);
            for t in [0usize, 3, 7] {
                let geom = m.geometry(t);
                let hess = w.hessian(geom.centroid);
                let expansion = rt_error_quadratic(gamma.per_element[t], gamma.h, &geom, hess);
                let direct = rt_error_quadratic_direct(&geom, |x| w.grad(x));
                assert!(
                    (expansion - direct).abs() <= 1e-11 * direct.abs().max(1e-12),
                    "t={t}: {expansion} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn expansion_examples_pure_second_derivatives() {
        let m = refined(DomainId::Square2, 2);
        let gamma = gamma_constants(&m);
        let g = gamma.uniform_value(1e-12).unwrap();
        let h2 = gamma.h * gamma.h;
        let geom = m.geometry(0);
        // w = x1 x2: error = h^2 gamma22 |K|
        let w = Poly2::new(&[(1, 1, 1.0)]);
        let direct = rt_error_quadratic_direct(&geom, |x| w.grad(x));
        assert!((direct - h2 * g[2] * geom.area).abs() < 1e-13 * direct);
        // w = x1^2: error = h^2 gamma11 |K| (deviator 2, factor 1/4)
        let w = Poly2::new(&[(2, 0, 1.0)]);
        let direct = rt_error_quadratic_direct(&geom, |x| w.grad(x));
        assert!((direct - h2 * g[0] * geom.area).abs() < 1e-13 * direct);
        // radial quadratic: gradient lies in RT0, zero error
        let w = Poly2::new(&[(2, 0, 1.0), (0, 2, 1.0)]);
        let direct = rt_error_quadratic_direct(&geom, |x| w.grad(x));
        assert!(direct.abs() < 1e-15);
    }

    #[test]
    fn rt_error_field_of_linear_is_zero() {
        let m = refined(DomainId::Square2, 2);
        let gamma = gamma_constants(&m);
        let p = Poly2::new(&[(1, 0, 0.3), (0, 1, -0.2), (0, 0, 1.0)]);
        let r = rt_error_field(&m, &p.as_field(), &gamma).unwrap();
        assert!(r.direct.abs() < 1e-28);
        assert!(r.expansion.abs() < 1e-28);
    }

    #[test]
    fn rt_error_field_requires_hessian() {
        let m = refined(DomainId::Square2, 2);
        let gamma = gamma_constants(&m);
        let f = ScalarField::new(|p: Vec2| p.x * p.y);
        assert!(matches!(rt_error_field(&m, &f, &gamma), Err(Error::MissingDerivative(_))));
    }

    #[test]
    fn marini_relations_hold_on_uniform_and_nonuniform_meshes() {
        let u = square_eigenfunction(1, 1);
        let lam = square_eigenvalue(1, 1);
        for (domain, level) in [(DomainId::Square2, 4), (DomainId::Square5, 3)] {
            let m = refined(domain, level);
            let r = verify_marini(&m, lam, &u, BcConfig::default()).unwrap();
            assert!(r.cr_discrepancy <= 1e-9, "{domain:?}: CR {:e}", r.cr_discrepancy);
            assert!(r.ecr_discrepancy <= 1e-9, "{domain:?}: ECR {:e}", r.ecr_discrepancy);
        }
    }

    #[test]
    fn marini_zero_load_is_exact() {
        let m = refined(DomainId::Square2, 2);
        let zero = ScalarField::new(|_| 0.0);
        let r = verify_marini(&m, 1.0, &zero, BcConfig::default()).unwrap();
        assert_eq!(r.sigma_scale, 0.0);
        assert_eq!(r.cr_discrepancy, 0.0);
        assert_eq!(r.ecr_discrepancy, 0.0);
    }

    fn first_interior_pair(m: &Mesh) -> (ElementGeometry, ElementGeometry) {
        let e = m.edges.iter().find(|e| e.is_interior()).unwrap();
        (m.geometry(e.tri_hi), m.geometry(e.tri_lo.unwrap()))
    }

    #[test]
    fn parallelogram_orthogonality_vanishes() {
        let m = refined(DomainId::Square2, 2);
        let (k1, k2) = first_interior_pair(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let w = Poly2::random(2, &mut rng);
            let v = Poly2::random(1, &mut rng);
            for which in [FeKind::Cr, FeKind::Ecr] {
                let val =
                    parallelogram_orthogonality(&k1, &k2, &w.as_field(), &v.as_field(), which)
                        .unwrap();
                assert!(val.abs() <= 1e-13, "{} residual {val}", which.name());
            }
        }
        let c = Poly2::constant(2.5);
        let val = parallelogram_orthogonality(&k1, &k2, &c.as_field(), &c.as_field(), FeKind::Cr)
            .unwrap();
        assert_eq!(val, 0.0);
    }

    #[test]
    fn sheared_parallelogram_still_orthogonal() {
        let m = refined(DomainId::Square2, 2);
        let (k1, k2) = first_interior_pair(&m);
        // affine images of parallelograms are parallelograms
        let map = |p: Vec2| Vec2::new(1.3 * p.x - 0.4 * p.y + 0.2, 0.7 * p.x + 1.1 * p.y - 0.5);
        let k1 =
            ElementGeometry::new([map(k1.vertices[0]), map(k1.vertices[1]), map(k1.vertices[2])]);
        let k2 =
            ElementGeometry::new([map(k2.vertices[0]), map(k2.vertices[1]), map(k2.vertices[2])]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w = Poly2::random(2, &mut rng);
            let v = Poly2::random(1, &mut rng);
            for which in [FeKind::Cr, FeKind::Ecr] {
                let val =
                    parallelogram_orthogonality(&k1, &k2, &w.as_field(), &v.as_field(), which)
                        .unwrap();
                assert!(val.abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn perturbed_pair_is_rejected() {
        let m = refined(DomainId::Square2, 2);
        let (k1, k2) = first_interior_pair(&m);
        let shared: Vec<Vec2> = k2
            .vertices
            .iter()
            .copied()
            .filter(|&v| k1.vertices.iter().any(|&w| (v - w).norm() < 1e-14))
            .collect();
        let idx = k2
            .vertices
            .iter()
            .position(|&v| !shared.iter().any(|&s| (s - v).norm() < 1e-14))
            .unwrap();
        let mut verts = k2.vertices;
        verts[idx] += Vec2::new(1e-3, -1e-3);
        let k2 = ElementGeometry::new(verts);
        let w = Poly2::constant(1.0);
        let r = parallelogram_orthogonality(&k1, &k2, &w.as_field(), &w.as_field(), FeKind::Cr);
        assert!(matches!(r, Err(Error::NotAParallelogram(_))));
    }

    #[test]
    fn richardson_known_examples() {
        let v = richardson_known(5.0, 5.0, 2.0).unwrap();
        assert_eq!(v, 5.0);
        // exact model lambda^h = lambda + C h^2 cancels exactly
        let (lambda, c) = (19.7392, 3.4);
        let h = 0.125f64;
        let fine = lambda + c * h * h;
        let coarse = lambda + c * (2.0 * h) * (2.0 * h);
        let v = richardson_known(fine, coarse, 2.0).unwrap();
        assert!((v - lambda).abs() < 1e-14 * lambda.abs());
        assert!(matches!(richardson_known(1.0, 2.0, 0.0), Err(Error::BadExtrapolation(_))));
    }

    #[test]
    fn richardson_unknown_cancels_any_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let lambda: f64 = rng.random_range(1.0..50.0);
            let c: f64 = rng.random_range(0.1..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let alpha: f64 = rng.random_range(0.3..4.0);
            let h: f64 = 0.1;
            let l = |s: f64| lambda + c * s.powf(alpha);
            let (v, ah) = richardson_unknown(l(4.0 * h), l(2.0 * h), l(h)).unwrap();
            assert!((v - lambda).abs() < 1e-12 * lambda.abs().max(1.0), "{v} vs {lambda}");
            assert!((ah.unwrap() - alpha).abs() < 1e-9);
        }
        assert!(matches!(richardson_unknown(2.0, 2.0, 2.0), Err(Error::BadExtrapolation(_))));
    }

    #[test]
    fn observed_rates_examples() {
        assert_eq!(observed_rates(&[4.0, 1.0]), vec![Some(2.0)]);
        assert_eq!(observed_rates(&[1e-3, 1e-3]), vec![Some(0.0)]);
        // the nonuniform-mesh eigenvalue error column reproduces rate 2.00
        for rate in observed_rates(&[2.22e-1, 5.55e-2, 1.39e-2, 3.48e-3]) {
            assert!((rate.unwrap() - 2.0).abs() < 0.05);
        }
        assert_eq!(observed_rates(&[1.0, 0.0, 2.0]), vec![None, None]);
    }

    #[test]
    fn degenerate_identity_surrogate_vanishes() {
        // with u_h replaced by u itself and lambda_h by lambda, the raw
        // error identity collapses to 0 = 0
        let m = refined(DomainId::Square2, 3);
        let u = square_eigenfunction(1, 1);
        let lambda = square_eigenvalue(1, 1);
        let rule = TriangleRule::degree(6);
        let mut rhs = 0.0;
        for t in 0..m.n_triangles() {
            rhs += integrate_triangle(rule, m.triangle_vertices(t), |x| {
                let gu = u.gradient(x).unwrap();
                2.0 * gu.dot(gu) - 2.0 * lambda * u.value(x) * u.value(x)
            });
        }
        // a(u,u) - lambda(u,u) = 0 up to the quadrature floor
        assert!(rhs.abs() < 1e-6, "degenerate identity rhs {rhs}");
    }

    #[test]
    fn error_identity_on_square2() {
        let u = square_eigenfunction(1, 1);
        let lambda = square_eigenvalue(1, 1);
        for level in 3..=4 {
            let m = refined(DomainId::Square2, level);
            for family in [FeKind::Cr, FeKind::Ecr] {
                let r = error_identity_check(&m, family, lambda, &u, 7).unwrap();
                assert!(
                    r.residual_rel <= 1e-8,
                    "{} level {level}: rel residual {:e}",
                    family.name(),
                    r.residual_rel
                );
                assert!(r.residual_raw_rel <= 1e-8);
                assert!(r.commuting_residual.abs() <= 1e-9 * r.lambda_h);
            }
        }
    }
}
