//! P1 assembly on triangle meshes: mass, stiffness, elasticity, the
//! cross-product form, the magnetostrictive loads, and initial data.
//!
//! Vector-valued unknowns are interleaved per node: dof `n_comp·z + c`.

use thiserror::Error;

use crate::linalg::{CooMatrix, CsrMatrix};
use crate::material::{self, element_strain, magnetostrictive_field, Rank4Tensor, SymMatrix};
use crate::mesh::Mesh;

/// Tolerance on `|m(z)| = 1` for magnetization fields.
pub const MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("only triangle meshes are supported, got dimension {0}")]
    UnsupportedDimension(usize),
    #[error("field has {got} values, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("field has {got} components, expected {expected}")]
    Components { got: usize, expected: usize },
    #[error("magnetization at node {node} has modulus {modulus}, expected 1")]
    NotUnit { node: usize, modulus: f64 },
    #[error("field is nonzero at boundary node {node}")]
    NonzeroOnBoundary { node: usize },
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tensor dimension {tensor} does not match mesh dimension {mesh}")]
    TensorDimension { tensor: usize, mesh: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Magnetization,
    Tangent,
    Displacement,
    Velocity,
    General,
}

/// Per-node vector values of a P1 field.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVectorField {
    n_comp: usize,
    kind: FieldKind,
    values: Vec<f64>,
}

impl NodalVectorField {
    pub fn new(n_comp: usize, kind: FieldKind, values: Vec<f64>) -> Result<Self, FemError> {
        if n_comp == 0 || values.len() % n_comp != 0 {
            return Err(FemError::Length { got: values.len(), expected: values.len() / n_comp.max(1) * n_comp });
        }
        let field = NodalVectorField { n_comp, kind, values };
        if let Some(node) = (0..field.n_nodes()).find(|&i| field.node(i).iter().any(|v| !v.is_finite())) {
            return Err(FemError::NonFinite { node });
        }
        if kind == FieldKind::Magnetization {
            if n_comp != 3 {
                return Err(FemError::Components { got: n_comp, expected: 3 });
            }
            field.check_unit()?;
        }
        Ok(field)
    }

    pub fn zeros(n_nodes: usize, n_comp: usize, kind: FieldKind) -> Self {
        NodalVectorField { n_comp, kind, values: vec![0.0; n_nodes * n_comp] }
    }

    pub fn magnetization(values: Vec<[f64; 3]>) -> Result<Self, FemError> {
        Self::new(3, FieldKind::Magnetization, values.into_iter().flatten().collect())
    }

    /// Constant field `value` at every node.
    pub fn constant(n_nodes: usize, kind: FieldKind, value: &[f64]) -> Result<Self, FemError> {
        Self::new(value.len(), kind, value.iter().copied().cycle().take(n_nodes * value.len()).collect())
    }

    /// Same values under another kind, without re-running the kind checks.
    pub fn relabel_unchecked(self, kind: FieldKind) -> Self {
        NodalVectorField { kind, ..self }
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.n_comp
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_comp..(i + 1) * self.n_comp]
    }

    pub fn vec3(&self, i: usize) -> [f64; 3] {
        debug_assert_eq!(self.n_comp, 3);
        [self.values[3 * i], self.values[3 * i + 1], self.values[3 * i + 2]]
    }

    pub fn to_vec3s(&self) -> Vec<[f64; 3]> {
        (0..self.n_nodes()).map(|i| self.vec3(i)).collect()
    }

    /// `max_z | |m(z)| - 1 |`.
    pub fn modulus_deviation(&self) -> f64 {
        (0..self.n_nodes())
            .map(|i| (self.node(i).iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn check_unit(&self) -> Result<(), FemError> {
        for i in 0..self.n_nodes() {
            let modulus = self.node(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            if (modulus - 1.0).abs() > MODULUS_TOL {
                return Err(FemError::NotUnit { node: i, modulus });
            }
        }
        Ok(())
    }

    /// Checks the field against `mesh`: node count, unit modulus for
    /// magnetizations, and homogeneous Dirichlet data for displacements
    /// and velocities.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), FemError> {
        if self.n_nodes() != mesh.n_nodes() {
            return Err(FemError::Length { got: self.values.len(), expected: mesh.n_nodes() * self.n_comp });
        }
        match self.kind {
            FieldKind::Magnetization => self.check_unit(),
            FieldKind::Displacement | FieldKind::Velocity => {
                if self.n_comp != mesh.dim() {
                    return Err(FemError::Components { got: self.n_comp, expected: mesh.dim() });
                }
                match (0..mesh.n_nodes()).find(|&i| mesh.is_boundary(i) && self.node(i).iter().any(|&v| v != 0.0)) {
                    Some(node) => Err(FemError::NonzeroOnBoundary { node }),
                    None => Ok(()),
                }
            }
            FieldKind::Tangent | FieldKind::General => Ok(()),
        }
    }
}

/// How the L² pairings of the LLG step are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassMode {
    /// Row-sum lumped mass; node-local constraint and cross-product forms.
    #[default]
    Lumped,
    Consistent,
}

/// Quadrature for integrands that are nonlinear in the magnetization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Vertex rule: exact for the nodal interpolant of the integrand.
    Vertex,
    /// Six-point rule, exact for polynomials of degree 4. The `h_m` and
    /// magnetic-strain integrands of P1 fields are at most quartic, so this
    /// integrates them exactly.
    #[default]
    Consistent,
}

/// Degree-4 symmetric rule on the reference triangle (barycentric, weight).
const GAUSS6: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_965;
    const B: f64 = 0.091_576_213_509_771;
    const WA: f64 = 0.223_381_589_678_011;
    const WB: f64 = 0.109_951_743_655_322;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

fn require_triangles(mesh: &Mesh) -> Result<(), FemError> {
    if mesh.dim() != 2 {
        return Err(FemError::UnsupportedDimension(mesh.dim()));
    }
    Ok(())
}

fn check_field(mesh: &Mesh, f: &NodalVectorField, n_comp: usize) -> Result<(), FemError> {
    if f.n_comp() != n_comp {
        return Err(FemError::Components { got: f.n_comp(), expected: n_comp });
    }
    if f.n_nodes() != mesh.n_nodes() {
        return Err(FemError::Length { got: f.values().len(), expected: n_comp * mesh.n_nodes() });
    }
    Ok(())
}

fn check_tensor(mesh: &Mesh, t: &Rank4Tensor) -> Result<(), FemError> {
    if t.dim() != mesh.dim() {
        return Err(FemError::TensorDimension { tensor: t.dim(), mesh: mesh.dim() });
    }
    Ok(())
}

/// Replicates a scalar operator over `n_comp` interleaved components.
pub fn block_replicate(scalar: &CsrMatrix, n_comp: usize) -> CsrMatrix {
    let mut coo = CooMatrix::with_capacity(scalar.n_rows() * n_comp, scalar.n_cols() * n_comp, scalar.nnz() * n_comp);
    for i in 0..scalar.n_rows() {
        for (j, v) in scalar.row(i) {
            for c in 0..n_comp {
                coo.push(n_comp * i + c, n_comp * j + c, v);
            }
        }
    }
    coo.to_csr()
}

/// Lumped mass weights: one third of the area of the node patch.
pub fn lumped_weights(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let third = mesh.signed_volume(e) / 3.0;
        for &n in mesh.element(e) {
            w[n] += third;
        }
    }
    w
}

/// P1 mass matrix, consistent or row-sum lumped, over `n_comp` components.
pub fn assemble_mass(mesh: &Mesh, n_comp: usize, lumped: bool) -> Result<CsrMatrix, FemError> {
    require_triangles(mesh)?;
    if lumped {
        let w = lumped_weights(mesh);
        let diag: Vec<f64> = w.iter().flat_map(|&wi| std::iter::repeat(wi).take(n_comp)).collect();
        return Ok(CsrMatrix::from_diagonal(&diag));
    }
    let mut coo = CooMatrix::with_capacity(mesh.n_nodes(), mesh.n_nodes(), 9 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let area = mesh.signed_volume(e);
        let tri = mesh.triangle(e);
        for a in 0..3 {
            for b in 0..3 {
                coo.push(tri[a], tri[b], area / 12.0 * if a == b { 2.0 } else { 1.0 });
            }
        }
    }
    Ok(block_replicate(&coo.to_csr(), n_comp))
}

/// P1 stiffness `(∇ζ_i, ∇ζ_j)` over `n_comp` components.
pub fn assemble_stiffness(mesh: &Mesh, n_comp: usize) -> Result<CsrMatrix, FemError> {
    let scalar = crate::mesh::scalar_stiffness(mesh).map_err(|_| FemError::UnsupportedDimension(mesh.dim()))?;
    Ok(block_replicate(&scalar, n_comp))
}

/// Elasticity form `(λ ε(u), ε(φ))` over all `2N` displacement dofs,
/// boundary rows included.
pub fn assemble_elasticity(mesh: &Mesh, lambda_e: &Rank4Tensor) -> Result<CsrMatrix, FemError> {
    require_triangles(mesh)?;
    check_tensor(mesh, lambda_e)?;
    let n = 2 * mesh.n_nodes();
    let mut coo = CooMatrix::with_capacity(n, n, 36 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let (g, area) = mesh.triangle_gradients(e);
        let tri = mesh.triangle(e);
        for a in 0..3 {
            for b in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        // minor symmetry reduces ε(φ_a e_i) : λ : ε(φ_b e_j) to Σ λ_ikjl ∂_k φ_a ∂_l φ_b
                        let mut acc = 0.0;
                        for k in 0..2 {
                            for l in 0..2 {
                                acc += lambda_e.get(i, k, j, l) * g[a][k] * g[b][l];
                            }
                        }
                        coo.push(2 * tri[a] + i, 2 * tri[b] + j, area * acc);
                    }
                }
            }
        }
    }
    Ok(coo.to_csr())
}

/// Displacement dofs at interior nodes, in increasing order.
pub fn free_displacement_dofs(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.n_nodes())
        .filter(|&i| !mesh.is_boundary(i))
        .flat_map(|i| (0..mesh.dim()).map(move |c| mesh.dim() * i + c))
        .collect()
}

fn cross_matrix(m: [f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -m[2], m[1]], [m[2], 0.0, -m[0]], [-m[1], m[0], 0.0]]
}

/// Matrix of the form `((m × v), φ)`: row `φ`, column `v`.
///
/// Lumped: block-diagonal with blocks `w_z [m(z)]_×`. Consistent: exact
/// integration of the trilinear form with P1 `m`.
pub fn assemble_skew(mesh: &Mesh, m: &NodalVectorField, mode: MassMode) -> Result<CsrMatrix, FemError> {
    require_triangles(mesh)?;
    check_field(mesh, m, 3)?;
    let n3 = 3 * mesh.n_nodes();
    match mode {
        MassMode::Lumped => {
            let w = lumped_weights(mesh);
            let mut row_ptr = Vec::with_capacity(n3 + 1);
            let mut col_idx = Vec::with_capacity(2 * n3);
            let mut values = Vec::with_capacity(2 * n3);
            row_ptr.push(0);
            for (z, &wz) in w.iter().enumerate() {
                let c = cross_matrix(m.vec3(z));
                for row in c {
                    for (col, v) in row.into_iter().enumerate() {
                        if v != 0.0 {
                            col_idx.push(3 * z + col);
                            values.push(wz * v);
                        }
                    }
                    row_ptr.push(col_idx.len());
                }
            }
            Ok(CsrMatrix::try_from_parts(n3, n3, row_ptr, col_idx, values).expect("block pattern"))
        }
        MassMode::Consistent => {
            let mut coo = CooMatrix::with_capacity(n3, n3, 54 * mesh.n_elements());
            for e in 0..mesh.n_elements() {
                let area = mesh.signed_volume(e);
                let tri = mesh.triangle(e);
                for a in 0..3 {
                    for b in 0..3 {
                        // ∫ λ_a λ_b λ_c = |K|/10, /30, /60 for 3, 2, 1 distinct-index multiplicities
                        let mut mab = [0.0; 3];
                        for (c, &node_c) in tri.iter().enumerate() {
                            let coef = match (a == b, a == c, b == c) {
                                (true, true, _) => area / 10.0,
                                (true, false, _) | (false, true, _) | (false, _, true) => area / 30.0,
                                _ => area / 60.0,
                            };
                            let mc = m.vec3(node_c);
                            for k in 0..3 {
                                mab[k] += coef * mc[k];
                            }
                        }
                        let cm = cross_matrix(mab);
                        for (i, row) in cm.iter().enumerate() {
                            for (j, &v) in row.iter().enumerate() {
                                if v != 0.0 {
                                    coo.push(3 * tri[a] + i, 3 * tri[b] + j, v);
                                }
                            }
                        }
                    }
                }
            }
            Ok(coo.to_csr())
        }
    }
}

fn interp3(m: &NodalVectorField, tri: [usize; 3], bary: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (a, &node) in tri.iter().enumerate() {
        let v = m.vec3(node);
        for k in 0..3 {
            out[k] += bary[a] * v[k];
        }
    }
    out
}

fn element_displacement_strain(mesh: &Mesh, u: Option<&NodalVectorField>, e: usize) -> SymMatrix {
    match u {
        Some(u) => element_strain(mesh, u.values(), e),
        None => SymMatrix::zero(2),
    }
}

/// Load vector `(h_m(u, m), φ)` over the 3N magnetization dofs, with
/// `σ = λ^e(ε(u) - ε^m(m))` and element-constant `ε(u)`.
pub fn assemble_h_load(
    mesh: &Mesh,
    u: &NodalVectorField,
    m: &NodalVectorField,
    lambda_e: &Rank4Tensor,
    lambda_m: &Rank4Tensor,
    quadrature: Quadrature,
) -> Result<Vec<f64>, FemError> {
    require_triangles(mesh)?;
    check_field(mesh, u, 2)?;
    assemble_h_load_inner(mesh, Some(u), m, lambda_e, lambda_m, quadrature)
}

pub(crate) fn assemble_h_load_inner(
    mesh: &Mesh,
    u: Option<&NodalVectorField>,
    m: &NodalVectorField,
    lambda_e: &Rank4Tensor,
    lambda_m: &Rank4Tensor,
    quadrature: Quadrature,
) -> Result<Vec<f64>, FemError> {
    check_field(mesh, m, 3)?;
    check_tensor(mesh, lambda_e)?;
    check_tensor(mesh, lambda_m)?;
    let mut load = vec![0.0; 3 * mesh.n_nodes()];
    if lambda_m.is_zero() {
        return Ok(load);
    }
    let field_at = |eps_u: &SymMatrix, mv: &[f64; 3]| {
        let sigma = lambda_e.apply(&eps_u.sub(&material::magnetic_strain(lambda_m, mv)));
        magnetostrictive_field(lambda_m, &sigma, mv)
    };
    for e in 0..mesh.n_elements() {
        let area = mesh.signed_volume(e);
        let tri = mesh.triangle(e);
        let eps_u = element_displacement_strain(mesh, u, e);
        match quadrature {
            Quadrature::Vertex => {
                for &node in &tri {
                    let h = field_at(&eps_u, &m.vec3(node));
                    for c in 0..3 {
                        load[3 * node + c] += area / 3.0 * h[c];
                    }
                }
            }
            Quadrature::Consistent => {
                for (bary, w) in GAUSS6 {
                    let h = field_at(&eps_u, &interp3(m, tri, &bary));
                    for (a, &node) in tri.iter().enumerate() {
                        for c in 0..3 {
                            load[3 * node + c] += w * area * bary[a] * h[c];
                        }
                    }
                }
            }
        }
    }
    Ok(load)
}

/// Load vector `(λ^e ε^m(m), ε(ψ))` over all `2N` displacement dofs.
pub fn assemble_elastic_rhs(
    mesh: &Mesh,
    m: &NodalVectorField,
    lambda_e: &Rank4Tensor,
    lambda_m: &Rank4Tensor,
    quadrature: Quadrature,
) -> Result<Vec<f64>, FemError> {
    require_triangles(mesh)?;
    check_field(mesh, m, 3)?;
    check_tensor(mesh, lambda_e)?;
    check_tensor(mesh, lambda_m)?;
    let mut rhs = vec![0.0; 2 * mesh.n_nodes()];
    if lambda_m.is_zero() || lambda_e.is_zero() {
        return Ok(rhs);
    }
    for e in 0..mesh.n_elements() {
        let (g, area) = mesh.triangle_gradients(e);
        let tri = mesh.triangle(e);
        // element mean of λ^e ε^m(m) under the chosen rule
        let mut mean = [[0.0; 2]; 2];
        let mut accumulate = |mv: [f64; 3], w: f64| {
            let s = lambda_e.apply(&material::magnetic_strain(lambda_m, &mv));
            for i in 0..2 {
                for j in 0..2 {
                    mean[i][j] += w * s.get(i, j);
                }
            }
        };
        match quadrature {
            Quadrature::Vertex => tri.iter().for_each(|&n| accumulate(m.vec3(n), 1.0 / 3.0)),
            Quadrature::Consistent => GAUSS6.iter().for_each(|(bary, w)| accumulate(interp3(m, tri, bary), *w)),
        }
        for (b, &node) in tri.iter().enumerate() {
            for i in 0..2 {
                rhs[2 * node + i] += area * (mean[i][0] * g[b][0] + mean[i][1] * g[b][1]);
            }
        }
    }
    Ok(rhs)
}

/// `M f` for a nodal field `f` with `n_comp` components.
pub fn nodal_load(mesh: &Mesh, f: &NodalVectorField, mode: MassMode) -> Result<Vec<f64>, FemError> {
    require_triangles(mesh)?;
    check_field(mesh, f, f.n_comp())?;
    let mass = assemble_mass(mesh, f.n_comp(), mode == MassMode::Lumped)?;
    Ok(mass.spmv(f.values()).expect("conforming sizes"))
}

/// The blow-up benchmark initial magnetization: with `A = (1 - 2|x|)⁴ / s`,
/// `m₀ = (2xA, A² - |x|²) / (A² + |x|²)` for `|x| < 1/2` and `(0, 0, -1)`
/// outside. Nodal values are renormalized against rounding.
pub fn initial_magnetization(x: [f64; 2], s: f64) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let r = r2.sqrt();
    if r >= 0.5 {
        return [0.0, 0.0, -1.0];
    }
    let a = (1.0 - 2.0 * r).powi(4) / s;
    let denom = a * a + r2;
    let v = [2.0 * x[0] * a / denom, 2.0 * x[1] * a / denom, (a * a - r2) / denom];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

pub fn interpolate_initial_m(mesh: &Mesh, s: f64) -> Result<NodalVectorField, FemError> {
    require_triangles(mesh)?;
    if !(s > 0.0) || !s.is_finite() {
        return Err(FemError::InvalidParameter(format!("s must be positive, got {s}")));
    }
    NodalVectorField::magnetization((0..mesh.n_nodes()).map(|i| initial_magnetization(mesh.point(i), s)).collect())
}
