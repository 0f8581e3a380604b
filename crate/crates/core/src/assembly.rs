//! Galerkin assembly: stiffness and mass matrices for the scalar spaces with
//! piecewise-constant diffusion, and the RT0 x P0 saddle-point system of the
//! mixed source problem.
//!
//! Assembly is deterministic: element loops run in label order and triplets
//! are combined by a stable sort, so identical inputs produce bitwise
//! identical matrices.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::mesh::Mesh;
use crate::quad::TriangleRule;
use crate::spaces::{element_basis, BcConfig, FeFunction, FeKind, FeSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    /// Symmetric positive definite (after elimination): Cholesky path.
    Spd,
    /// Symmetric indefinite (saddle system): pivoting path.
    SymIndefinite,
}

/// Symmetric sparse matrix storing the lower triangle in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub kind: MatrixKind,
}

impl SparseSymMatrix {
    /// Combines (i, j, v) triplets; entries may repeat and are summed in a
    /// deterministic order. Only the lower triangle is kept; exact zeros are
    /// dropped.
    pub fn from_triplets(n: usize, kind: MatrixKind, triplets: &[(usize, usize, f64)]) -> Self {
        let mut low: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| if i >= j { (i, j, v) } else { (j, i, v) })
            .collect();
        low.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut k = 0;
        while k < low.len() {
            let (i, j, mut v) = low[k];
            k += 1;
            while k < low.len() && low[k].0 == i && low[k].1 == j {
                v += low[k].2;
                k += 1;
            }
            if v != 0.0 {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                values.push(v);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymMatrix { n, row_ptr, col_idx, values, kind }
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.values[k];
            }
        }
        0.0
    }

    /// y = A x using the symmetric structure.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.values[k];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    /// Infinity norm of the full symmetric matrix.
    pub fn norm_inf(&self) -> f64 {
        let mut row_sums = vec![0.0f64; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.values[k].abs();
                row_sums[i] += v;
                if i != j {
                    row_sums[j] += v;
                }
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }

    /// Matrix Market coordinate format (symmetric, lower triangle, 1-based).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
        out.push_str(&format!("{} {} {}\n", self.n, self.n, self.nnz_lower()));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push_str(&format!("{} {} {:.17e}\n", i + 1, self.col_idx[k] + 1, self.values[k]));
            }
        }
        out
    }
}

/// Free/eliminated DOF bookkeeping for symmetric Dirichlet elimination.
#[derive(Clone, Debug, PartialEq)]
pub struct DofReduction {
    pub full_dim: usize,
    pub free: Vec<usize>,
    pub full_to_free: Vec<Option<usize>>,
}

impl DofReduction {
    pub fn from_mask(mask: &[bool]) -> DofReduction {
        let mut free = Vec::new();
        let mut full_to_free = vec![None; mask.len()];
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                full_to_free[i] = Some(free.len());
                free.push(i);
            }
        }
        DofReduction { full_dim: mask.len(), free, full_to_free }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Restriction of a symmetric matrix to the free DOFs.
    pub fn reduce_matrix(&self, m: &SparseSymMatrix) -> SparseSymMatrix {
        let mut triplets = Vec::with_capacity(m.nnz_lower());
        for i in 0..m.n {
            let Some(ri) = self.full_to_free[i] else { continue };
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                let j = m.col_idx[k];
                if let Some(rj) = self.full_to_free[j] {
                    triplets.push((ri, rj, m.values[k]));
                }
            }
        }
        SparseSymMatrix::from_triplets(self.n_free(), m.kind, &triplets)
    }

    pub fn reduce_vec(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| v[i]).collect()
    }

    /// Scatter a free-DOF vector back to full size, zeros elsewhere.
    pub fn scatter(&self, red: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full_dim];
        for (r, &i) in self.free.iter().enumerate() {
            out[i] = red[r];
        }
        out
    }
}

/// Result of symmetric Dirichlet elimination: the full-size matrix carries a
/// unit diagonal and zero coupling on eliminated DOFs.
#[derive(Clone, Debug)]
pub struct MaskedSystem {
    pub matrix: SparseSymMatrix,
    pub reduction: DofReduction,
}

impl MaskedSystem {
    pub fn eliminated(&self) -> Vec<usize> {
        (0..self.reduction.full_dim)
            .filter(|&i| self.reduction.full_to_free[i].is_none())
            .collect()
    }
}

/// Symmetric elimination of the masked DOFs (homogeneous data): unit diagonal,
/// zero off-diagonal coupling.
pub fn apply_dirichlet(matrix: &SparseSymMatrix, mask: &[bool]) -> Result<MaskedSystem> {
    if mask.len() != matrix.n {
        return Err(Error::Config(format!(
            "mask length {} does not match matrix dimension {}",
            mask.len(),
            matrix.n
        )));
    }
    let mut triplets = Vec::with_capacity(matrix.nnz_lower() + matrix.n);
    for i in 0..matrix.n {
        for k in matrix.row_ptr[i]..matrix.row_ptr[i + 1] {
            let j = matrix.col_idx[k];
            if !mask[i] && !mask[j] {
                triplets.push((i, j, matrix.values[k]));
            }
        }
    }
    for (i, &m) in mask.iter().enumerate() {
        if m {
            triplets.push((i, i, 1.0));
        }
    }
    Ok(MaskedSystem {
        matrix: SparseSymMatrix::from_triplets(matrix.n, matrix.kind, &triplets),
        reduction: DofReduction::from_mask(mask),
    })
}

/// Elimination of the DOFs attached to an explicit edge list (CR/ECR/RT0).
pub fn apply_dirichlet_edges(
    mesh: &Mesh,
    space: &FeSpace,
    matrix: &SparseSymMatrix,
    edges: &[usize],
) -> Result<MaskedSystem> {
    let mut mask = vec![false; space.n_dofs];
    for &e in edges {
        if e >= mesh.n_edges() {
            return Err(Error::NoSuchEdge(e));
        }
        mask[space.edge_dof(e)] = true;
    }
    apply_dirichlet(matrix, &mask)
}

/// Piecewise-constant diffusion coefficient, sampled at element centroids.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn constant(mesh: &Mesh, a: f64) -> Result<CoefficientField> {
        CoefficientField::from_fn(mesh, |_| a)
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> f64) -> Result<CoefficientField> {
        let values: Vec<f64> = (0..mesh.n_triangles()).map(|t| f(mesh.centroid(t))).collect();
        if let Some(t) = values.iter().position(|&v| v <= 0.0) {
            return Err(Error::BadParams(format!("coefficient nonpositive on triangle {t}")));
        }
        Ok(CoefficientField { values })
    }

    pub fn value(&self, t: usize) -> f64 {
        self.values[t]
    }
}

fn require_scalar(space: &FeSpace, allowed: &[FeKind]) -> Result<()> {
    if allowed.contains(&space.kind) {
        Ok(())
    } else {
        Err(Error::WrongSpaceKind { expected: "CR/ECR/P3 (or P0 for mass)", got: space.kind.name() })
    }
}

/// Raw Galerkin stiffness sum_K int_K A grad phi_i . grad phi_j, no boundary
/// conditions applied (constants lie in the kernel).
pub fn assemble_stiffness_raw(
    mesh: &Mesh,
    space: &FeSpace,
    coeff: &CoefficientField,
) -> Result<SparseSymMatrix> {
    require_scalar(space, &[FeKind::Cr, FeKind::Ecr, FeKind::P3, FeKind::P1])?;
    let rule = TriangleRule::degree(4);
    let mut triplets = Vec::new();
    for t in 0..mesh.n_triangles() {
        let basis = element_basis(mesh, space, t);
        let nl = basis.n_local();
        let a = coeff.value(t);
        let mut local = vec![0.0; nl * nl];
        for (x, w) in rule.physical_points(basis.geom.vertices) {
            let grads: Vec<Vec2> = (0..nl).map(|i| basis.grad(i, x)).collect();
            for i in 0..nl {
                for j in 0..=i {
                    local[i * nl + j] += w * grads[i].dot(grads[j]);
                }
            }
        }
        let scale = a * basis.geom.area;
        for i in 0..nl {
            for j in 0..=i {
                triplets.push((basis.dofs[i], basis.dofs[j], scale * local[i * nl + j]));
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(space.n_dofs, MatrixKind::Spd, &triplets))
}

/// Stiffness matrix with the space's essential DOFs eliminated symmetrically
/// (unit diagonal, zero coupling).
pub fn assemble_stiffness(
    mesh: &Mesh,
    space: &FeSpace,
    coeff: &CoefficientField,
) -> Result<MaskedSystem> {
    let raw = assemble_stiffness_raw(mesh, space, coeff)?;
    apply_dirichlet(&raw, &space.dirichlet_mask)
}

/// Mass matrix int_K phi_i phi_j with a degree-6 rule (exact for every
/// shipped scalar space).
pub fn assemble_mass(mesh: &Mesh, space: &FeSpace) -> Result<SparseSymMatrix> {
    require_scalar(space, &[FeKind::Cr, FeKind::Ecr, FeKind::P3, FeKind::P1, FeKind::P0])?;
    let rule = TriangleRule::degree(6);
    let mut triplets = Vec::new();
    for t in 0..mesh.n_triangles() {
        let basis = element_basis(mesh, space, t);
        let nl = basis.n_local();
        let mut local = vec![0.0; nl * nl];
        for (x, w) in rule.physical_points(basis.geom.vertices) {
            let vals: Vec<f64> = (0..nl).map(|i| basis.value(i, x)).collect();
            for i in 0..nl {
                for j in 0..=i {
                    local[i * nl + j] += w * vals[i] * vals[j];
                }
            }
        }
        for i in 0..nl {
            for j in 0..=i {
                triplets.push((basis.dofs[i], basis.dofs[j], basis.geom.area * local[i * nl + j]));
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(space.n_dofs, MatrixKind::Spd, &triplets))
}

/// The assembled mixed source problem
/// `[(M, B^T), (B, 0)] [sigma; u] = [0; -(load, v)]`.
///
/// Dirichlet data of the primal problem is natural here. Neumann-tagged edges
/// (and crack faces unless the crack is Dirichlet) constrain the normal flux
/// to zero and are eliminated symmetrically.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub matrix: SparseSymMatrix,
    pub rhs: Vec<f64>,
    pub n_flux: usize,
    pub reduction: DofReduction,
}

pub fn assemble_mixed_rt(mesh: &Mesh, load: &FeFunction, bc: BcConfig) -> Result<SaddleSystem> {
    if load.kind != FeKind::P0 {
        return Err(Error::WrongSpaceKind { expected: "P0", got: load.kind.name() });
    }
    let rt = FeSpace::with_bc(mesh, FeKind::Rt0, bc);
    let ne = mesh.n_edges();
    let nt = mesh.n_triangles();
    let n = ne + nt;
    let rule = TriangleRule::degree(4);
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n];
    for t in 0..nt {
        let basis = element_basis(mesh, &rt, t);
        let mut local = [[0.0; 3]; 3];
        for (x, w) in rule.physical_points(basis.geom.vertices) {
            let vals: [Vec2; 3] = [basis.rt_value(0, x), basis.rt_value(1, x), basis.rt_value(2, x)];
            for i in 0..3 {
                for j in 0..=i {
                    local[i][j] += w * vals[i].dot(vals[j]);
                }
            }
        }
        for i in 0..3 {
            for j in 0..=i {
                triplets.push((basis.dofs[i], basis.dofs[j], basis.geom.area * local[i][j]));
            }
        }
        // (u, div tau) block and load moments
        for i in 0..3 {
            triplets.push((ne + t, basis.dofs[i], basis.rt_div(i) * basis.geom.area));
        }
        rhs[ne + t] = -basis.geom.area * load.coeffs[t];
    }
    let matrix = SparseSymMatrix::from_triplets(n, MatrixKind::SymIndefinite, &triplets);
    // essential flux conditions: sigma.n = 0 where the primal problem is Neumann
    let mut mask = vec![false; n];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let flux_essential = match edge.tag {
            crate::mesh::BoundaryTag::Neumann => true,
            crate::mesh::BoundaryTag::CrackUpper | crate::mesh::BoundaryTag::CrackLower => {
                !bc.crack_dirichlet
            }
            _ => false,
        };
        if flux_essential {
            mask[e] = true;
        }
    }
    let masked = apply_dirichlet(&matrix, &mask)?;
    for (i, &m) in mask.iter().enumerate() {
        if m {
            rhs[i] = 0.0;
        }
    }
    Ok(SaddleSystem { matrix: masked.matrix, rhs, n_flux: ne, reduction: masked.reduction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Poly2;
    use crate::mesh::{build_initial, refine_uniform, BoundaryTag, DomainId};
    use crate::quad::integrate_triangle;
    use crate::spaces::interp_cr;

    fn refined(domain: DomainId, level: u32) -> Mesh {
        let mut m = build_initial(domain);
        while m.level < level {
            m = refine_uniform(&m);
        }
        m
    }

    #[test]
    fn cr_diagonal_energy_on_square2() {
        // hand assembly on the 2-triangle unit square: the interior (diagonal)
        // CR basis has energy 4 per triangle (|K| * 4 |grad psi_opp|^2 = 1/2 * 4 * 2)
        let m = build_initial(DomainId::Square2);
        let space = FeSpace::new(&m, FeKind::Cr);
        let coeff = CoefficientField::constant(&m, 1.0).unwrap();
        let k = assemble_stiffness_raw(&m, &space, &coeff).unwrap();
        let e_int = m
            .edges
            .iter()
            .position(|e| e.is_interior())
            .unwrap();
        assert!((k.get(e_int, e_int) - 8.0).abs() < 1e-13);
    }

    #[test]
    fn stiffness_kernel_contains_constants_without_bc() {
        let m = refined(DomainId::Square5, 3);
        for kind in [FeKind::Cr, FeKind::Ecr, FeKind::P3] {
            let space = FeSpace::new(&m, kind);
            let coeff = CoefficientField::constant(&m, 1.0).unwrap();
            let k = assemble_stiffness_raw(&m, &space, &coeff).unwrap();
            // the constant function: edge/vertex/node values 1, ECR element means 1,
            // P3 nodal values 1
            let ones = vec![1.0; space.n_dofs];
            let mut y = vec![0.0; space.n_dofs];
            k.matvec(&ones, &mut y);
            let norm = y.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert!(norm <= 1e-11 * k.norm_inf(), "{}: {norm}", kind.name());
        }
    }

    #[test]
    fn p1_energy_reproduction_in_cr() {
        // v, w linear interpolated into CR: v^T K w = int A grad v . grad w
        let m = refined(DomainId::Square5, 2);
        let space = FeSpace::new(&m, FeKind::Cr);
        let coeff = CoefficientField::from_fn(&m, |c| 1.0 + c.x).unwrap();
        let k = assemble_stiffness_raw(&m, &space, &coeff).unwrap();
        let pv = Poly2::new(&[(1, 0, 2.0), (0, 1, -1.0), (0, 0, 0.4)]);
        let pw = Poly2::new(&[(1, 0, -0.3), (0, 1, 0.9), (0, 0, 1.1)]);
        let v = interp_cr(&m, &pv.as_field());
        let w = interp_cr(&m, &pw.as_field());
        let mut kw = vec![0.0; space.n_dofs];
        k.matvec(&w.coeffs, &mut kw);
        let got: f64 = v.coeffs.iter().zip(kw.iter()).map(|(a, b)| a * b).sum();
        let want: f64 = (0..m.n_triangles())
            .map(|t| coeff.value(t) * m.geometry(t).area * pv.grad(Vec2::ZERO).dot(pw.grad(Vec2::ZERO)))
            .sum();
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn p0_mass_row_sums_are_areas() {
        let m = refined(DomainId::Square5, 2);
        let space = FeSpace::new(&m, FeKind::P0);
        let mass = assemble_mass(&m, &space).unwrap();
        for t in 0..m.n_triangles() {
            assert!((mass.get(t, t) - m.geometry(t).area).abs() < 1e-14);
        }
    }

    #[test]
    fn cr_mass_of_ones_is_domain_area() {
        let m = refined(DomainId::Square2, 3);
        let space = FeSpace::new(&m, FeKind::Cr);
        let mass = assemble_mass(&m, &space).unwrap();
        let ones = vec![1.0; space.n_dofs];
        let mut y = vec![0.0; space.n_dofs];
        mass.matvec(&ones, &mut y);
        let total: f64 = y.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ecr_mass_matches_subdivided_quadrature_oracle() {
        // independent oracle: integrate basis products on the four red children
        let m = build_initial(DomainId::Square5);
        let space = FeSpace::new(&m, FeKind::Ecr);
        let mass = assemble_mass(&m, &space).unwrap();
        let rule = TriangleRule::degree(4);
        for t in 0..m.n_triangles() {
            let basis = element_basis(&m, &space, t);
            let [p0, p1, p2] = basis.geom.vertices;
            let (m01, m12, m20) = ((p0 + p1) * 0.5, (p1 + p2) * 0.5, (p2 + p0) * 0.5);
            let children = [
                [p0, m01, m20],
                [m01, p1, m12],
                [m20, m12, p2],
                [m12, m20, m01],
            ];
            for i in 0..basis.n_local() {
                for j in 0..=i {
                    // the only pairs assembled from more than one element are
                    // diagonal entries of interior-edge dofs
                    let multi_element = i == j
                        && basis.dofs[i] < m.n_edges()
                        && m.edges[basis.dofs[i]].is_interior();
                    if multi_element {
                        continue;
                    }
                    let want: f64 = children
                        .iter()
                        .map(|&c| integrate_triangle(rule, c, |x| basis.value(i, x) * basis.value(j, x)))
                        .sum();
                    let got = mass.get(basis.dofs[i], basis.dofs[j]);
                    assert!(
                        (got - want).abs() < 1e-13 * want.abs().max(basis.geom.area),
                        "t={t} i={i} j={j}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn masked_system_counts() {
        let m = build_initial(DomainId::Square2);
        let space = FeSpace::new(&m, FeKind::Cr);
        let coeff = CoefficientField::constant(&m, 1.0).unwrap();
        let sys = assemble_stiffness(&m, &space, &coeff).unwrap();
        assert_eq!(sys.reduction.n_free(), 1);
        assert_eq!(sys.eliminated().len(), 4);
        // unit diagonal on eliminated dofs
        for &i in &sys.eliminated() {
            assert_eq!(sys.matrix.get(i, i), 1.0);
        }
    }

    #[test]
    fn dirichlet_edge_list_rejects_bad_edge() {
        let m = build_initial(DomainId::Square2);
        let space = FeSpace::new(&m, FeKind::Cr);
        let coeff = CoefficientField::constant(&m, 1.0).unwrap();
        let k = assemble_stiffness_raw(&m, &space, &coeff).unwrap();
        let err = apply_dirichlet_edges(&m, &space, &k, &[99]);
        assert!(matches!(err, Err(Error::NoSuchEdge(99))));
    }

    #[test]
    fn crack_neumann_keeps_both_sides_free() {
        let m = refined(DomainId::Crack8, 2);
        let space = FeSpace::new(&m, FeKind::Cr);
        let coeff = CoefficientField::constant(&m, 1.0).unwrap();
        let sys = assemble_stiffness(&m, &space, &coeff).unwrap();
        let crack_dofs: Vec<usize> = m
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tag.is_crack())
            .map(|(i, _)| i)
            .collect();
        for d in crack_dofs {
            assert!(sys.reduction.full_to_free[d].is_some());
        }
        // with dirichlet crack the count drops by the number of crack edges
        let space_d = FeSpace::with_bc(&m, FeKind::Cr, BcConfig { crack_dirichlet: true });
        let sys_d = assemble_stiffness(&m, &space_d, &coeff).unwrap();
        let n_crack = m.edges.iter().filter(|e| e.tag.is_crack()).count();
        assert_eq!(sys_d.reduction.n_free() + n_crack, sys.reduction.n_free());
    }

    #[test]
    fn mixed_system_shape_and_moments() {
        let m = refined(DomainId::Square2, 2);
        let p0 = FeSpace::new(&m, FeKind::P0);
        let mut load = FeFunction::zeros(&p0);
        for (t, c) in load.coeffs.iter_mut().enumerate() {
            *c = t as f64 + 1.0;
        }
        let sys = assemble_mixed_rt(&m, &load, BcConfig::default()).unwrap();
        assert_eq!(sys.matrix.n, m.n_edges() + m.n_triangles());
        assert_eq!(sys.matrix.kind, MatrixKind::SymIndefinite);
        for t in 0..m.n_triangles() {
            let want = -m.geometry(t).area * load.coeffs[t];
            assert!((sys.rhs[m.n_edges() + t] - want).abs() < 1e-15);
        }
        // flux block of the rhs is zero
        for e in 0..m.n_edges() {
            assert_eq!(sys.rhs[e], 0.0);
        }
        // all-Dirichlet domain: no flux constraints in the mixed form
        assert_eq!(sys.reduction.n_free(), sys.matrix.n);
    }

    #[test]
    fn mixed_system_constrains_neumann_flux() {
        let m = refined(DomainId::TriangleJump, 2);
        let p0 = FeSpace::new(&m, FeKind::P0);
        let load = FeFunction::zeros(&p0);
        let sys = assemble_mixed_rt(&m, &load, BcConfig::default()).unwrap();
        let n_neumann = m.edges.iter().filter(|e| e.tag == BoundaryTag::Neumann).count();
        assert!(n_neumann > 0);
        assert_eq!(sys.reduction.n_free(), sys.matrix.n - n_neumann);
    }

    #[test]
    fn assembly_is_deterministic() {
        let m = refined(DomainId::Square5, 3);
        let space = FeSpace::new(&m, FeKind::Ecr);
        let coeff = CoefficientField::from_fn(&m, |c| if c.y < 0.5 { 2.0 } else { 1.0 }).unwrap();
        let a = assemble_stiffness(&m, &space, &coeff).unwrap();
        let b = assemble_stiffness(&m, &space, &coeff).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let ma = assemble_mass(&m, &space).unwrap();
        let mb = assemble_mass(&m, &space).unwrap();
        assert_eq!(ma, mb);
    }

    #[test]
    fn matrix_market_header() {
        let m = build_initial(DomainId::Square2);
        let space = FeSpace::new(&m, FeKind::Cr);
        let coeff = CoefficientField::constant(&m, 1.0).unwrap();
        let k = assemble_stiffness_raw(&m, &space, &coeff).unwrap();
        let mm = k.to_matrix_market();
        let mut lines = mm.lines();
        assert_eq!(lines.next().unwrap(), "%%MatrixMarket matrix coordinate real symmetric");
        let head: Vec<usize> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(head[0], 5);
        assert_eq!(head[2], k.nnz_lower());
    }
}
