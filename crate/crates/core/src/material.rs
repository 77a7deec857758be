//! Fourth-order material tensors and the pointwise constitutive relations:
//! magnetic strain, stress, and the magnetostrictive field.
//!
//! Strain-space indices `i, j, p, q` run over the spatial dimension `d`;
//! magnetizations always carry three components.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::fem::NodalVectorField;
use crate::mesh::Mesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("unsupported tensor dimension {0}")]
    Dimension(usize),
    #[error("expected {expected} entries, got {got}")]
    EntryCount { expected: usize, got: usize },
    #[error("non-finite entry")]
    NonFinite,
    #[error("tensor constant must be non-negative, got {0}")]
    NegativeConstant(f64),
    #[error("entry ({0},{1},{2},{3}) breaks the minor/major symmetries")]
    Asymmetric(usize, usize, usize, usize),
    #[error("tensor is indefinite on symmetric matrices (smallest eigenvalue {0:.3e})")]
    Indefinite(f64),
    #[error("tensor is only semidefinite; strict positivity required")]
    NotStrictlyPositive,
    #[error("dimension mismatch: tensor is {tensor}D, operand is {operand}D")]
    DimensionMismatch { tensor: usize, operand: usize },
    #[error("element {0} is degenerate")]
    DegenerateElement(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorLabel {
    Elastic,
    Magnetic,
}

/// Positivity of the tensor as a quadratic form on symmetric matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Definiteness {
    /// `λ:ξ:ξ ≥ lambda_star ‖ξ‖²` with `lambda_star > 0`.
    Strict { lambda_star: f64 },
    /// Positive semidefinite only, as for the diagonal benchmark tensors
    /// whose shear block vanishes.
    Semidefinite,
}

/// Symmetric fourth-order tensor `λ_{ijpq}` in `d ∈ {2, 3}` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank4Tensor {
    dim: usize,
    label: TensorLabel,
    entries: Vec<f64>,
    definiteness: Definiteness,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl Rank4Tensor {
    /// Validates symmetry and positive semidefiniteness of the given
    /// `d⁴` entries, stored with `q` fastest.
    pub fn from_entries(dim: usize, label: TensorLabel, entries: Vec<f64>) -> Result<Self, TensorError> {
        if dim != 2 && dim != 3 {
            return Err(TensorError::Dimension(dim));
        }
        let expected = dim.pow(4);
        if entries.len() != expected {
            return Err(TensorError::EntryCount { expected, got: entries.len() });
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        let mut t = Rank4Tensor { dim, label, entries, definiteness: Definiteness::Semidefinite };
        t.check_symmetry()?;
        t.definiteness = t.classify()?;
        Ok(t)
    }

    pub fn from_fn(
        dim: usize,
        label: TensorLabel,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self, TensorError> {
        let mut entries = Vec::with_capacity(dim.pow(4));
        for i in 0..dim {
            for j in 0..dim {
                for p in 0..dim {
                    for q in 0..dim {
                        entries.push(f(i, j, p, q));
                    }
                }
            }
        }
        Self::from_entries(dim, label, entries)
    }

    /// Tensor whose only nonzero entries are `λ_{iiii} = c`.
    pub fn diagonal(dim: usize, c: f64, label: TensorLabel) -> Result<Self, TensorError> {
        if !(c >= 0.0) {
            return Err(TensorError::NegativeConstant(c));
        }
        Self::from_fn(dim, label, |i, j, p, q| if i == j && j == p && p == q { c } else { 0.0 })
    }

    /// Isotropic tensor `λ δ_ij δ_pq + μ (δ_ip δ_jq + δ_iq δ_jp)`.
    pub fn isotropic(dim: usize, lame: f64, mu: f64, label: TensorLabel) -> Result<Self, TensorError> {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Self::from_fn(dim, label, |i, j, p, q| lame * d(i, j) * d(p, q) + mu * (d(i, p) * d(j, q) + d(i, q) * d(j, p)))
    }

    pub fn zero(dim: usize, label: TensorLabel) -> Result<Self, TensorError> {
        Self::diagonal(dim, 0.0, label)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> TensorLabel {
        self.label
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    /// True for the shear-free tensors used in the blow-up benchmark.
    pub fn is_experimental(&self) -> bool {
        matches!(self.definiteness, Definiteness::Semidefinite)
    }

    pub fn require_strict(&self) -> Result<f64, TensorError> {
        match self.definiteness {
            Definiteness::Strict { lambda_star } => Ok(lambda_star),
            Definiteness::Semidefinite => Err(TensorError::NotStrictlyPositive),
        }
    }

    /// `max |λ_{ijpq}|`.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc: f64, e| acc.max(e.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0.0)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, p: usize, q: usize) -> f64 {
        let d = self.dim;
        self.entries[((i * d + j) * d + p) * d + q]
    }

    fn check_symmetry(&self) -> Result<(), TensorError> {
        let tol = SYMMETRY_TOL * self.max_entry().max(1.0);
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                for p in 0..d {
                    for q in 0..d {
                        let v = self.get(i, j, p, q);
                        let partners = [self.get(j, i, p, q), self.get(i, j, q, p), self.get(p, q, i, j)];
                        if partners.iter().any(|w| (v - w).abs() > tol) {
                            return Err(TensorError::Asymmetric(i, j, p, q));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Represents the tensor on a Frobenius-orthonormal basis of symmetric
    /// matrices and inspects the spectrum of the resulting Gram matrix.
    fn classify(&self) -> Result<Definiteness, TensorError> {
        let basis = sym_basis(self.dim);
        let n = basis.len();
        let gram = DMatrix::from_fn(n, n, |k, l| self.contract(&basis[k], &basis[l]));
        let min_eig = SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = self.max_entry().max(f64::MIN_POSITIVE);
        if min_eig > 1e-12 * scale {
            Ok(Definiteness::Strict { lambda_star: min_eig })
        } else if min_eig >= -1e-12 * scale {
            Ok(Definiteness::Semidefinite)
        } else {
            Err(TensorError::Indefinite(min_eig))
        }
    }

    /// `Σ λ_{ijpq} ξ_{ij} η_{pq}`.
    pub fn contract(&self, xi: &SymMatrix, eta: &SymMatrix) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                for p in 0..d {
                    for q in 0..d {
                        acc += self.get(i, j, p, q) * xi.get(i, j) * eta.get(p, q);
                    }
                }
            }
        }
        acc
    }

    /// `(λ ξ)_{ij} = Σ λ_{ijpq} ξ_{pq}`.
    pub fn apply(&self, xi: &SymMatrix) -> SymMatrix {
        let d = self.dim;
        SymMatrix::from_fn(d, |i, j| {
            let mut acc = 0.0;
            for p in 0..d {
                for q in 0..d {
                    acc += self.get(i, j, p, q) * xi.get(p, q);
                }
            }
            acc
        })
    }
}

fn sym_basis(dim: usize) -> Vec<SymMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            let v = if i == j { 1.0 } else { s };
            basis.push(SymMatrix::from_fn(dim, |a, b| if (a, b) == (i, j) || (a, b) == (j, i) { v } else { 0.0 }));
        }
    }
    basis
}

/// Symmetric `d × d` matrix, stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: [f64; 6],
}

#[inline]
fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    // (0,0)=0 (0,1)=1 (0,2)=2 (1,1)=3 (1,2)=4 (2,2)=5
    match a {
        0 => b,
        1 => 2 + b,
        _ => 5,
    }
}

impl SymMatrix {
    pub fn zero(dim: usize) -> Self {
        SymMatrix { dim, data: [0.0; 6] }
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            for j in i..dim {
                m.data[sym_index(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[sym_index(i, j)]
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        Self::from_fn(self.dim, |i, j| self.get(i, j) - other.get(i, j))
    }

    /// `Σ ξ_{ij} η_{ij}`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.get(i, j) * other.get(i, j);
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }
}

/// `ε^m_{ij}(m) = Σ_{p,q<d} λ^m_{ijpq} m_p m_q`.
pub fn magnetic_strain(lambda_m: &Rank4Tensor, m: &[f64; 3]) -> SymMatrix {
    let d = lambda_m.dim();
    SymMatrix::from_fn(d, |i, j| {
        let mut acc = 0.0;
        for p in 0..d {
            for q in 0..d {
                acc += lambda_m.get(i, j, p, q) * m[p] * m[q];
            }
        }
        acc
    })
}

/// `σ = λ^e (ε(u) - ε^m)`.
pub fn stress(lambda_e: &Rank4Tensor, eps_u: &SymMatrix, eps_m: &SymMatrix) -> Result<SymMatrix, TensorError> {
    for operand in [eps_u.dim(), eps_m.dim()] {
        if operand != lambda_e.dim() {
            return Err(TensorError::DimensionMismatch { tensor: lambda_e.dim(), operand });
        }
    }
    Ok(lambda_e.apply(&eps_u.sub(eps_m)))
}

/// `(h_m)_q = Σ_{i,j,p} λ^m_{ijpq} σ_{ij} m_p`; components with `q ≥ d` vanish.
pub fn magnetostrictive_field(lambda_m: &Rank4Tensor, sigma: &SymMatrix, m: &[f64; 3]) -> [f64; 3] {
    let d = lambda_m.dim();
    let mut h = [0.0; 3];
    for (q, hq) in h.iter_mut().enumerate().take(d) {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let s = sigma.get(i, j);
                if s == 0.0 {
                    continue;
                }
                for p in 0..d {
                    acc += lambda_m.get(i, j, p, q) * s * m[p];
                }
            }
        }
        *hq = acc;
    }
    h
}

/// Constant strain `½(∇u + ∇uᵀ)` of the P1 displacement on triangle `e`.
pub fn p1_strain(mesh: &Mesh, u: &NodalVectorField, e: usize) -> Result<SymMatrix, TensorError> {
    if mesh.dim() != 2 || u.n_comp() != 2 {
        return Err(TensorError::DimensionMismatch { tensor: mesh.dim(), operand: u.n_comp() });
    }
    if mesh.signed_volume(e) <= 0.0 {
        return Err(TensorError::DegenerateElement(e));
    }
    Ok(element_strain(mesh, u.values(), e))
}

/// Strain of a displacement stored with two interleaved components per node.
pub(crate) fn element_strain(mesh: &Mesh, u: &[f64], e: usize) -> SymMatrix {
    let (g, _) = mesh.triangle_gradients(e);
    let tri = mesh.triangle(e);
    let mut grad = [[0.0; 2]; 2];
    for (a, &node) in tri.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                grad[i][j] += u[2 * node + i] * g[a][j];
            }
        }
    }
    SymMatrix::from_fn(2, |i, j| 0.5 * (grad[i][j] + grad[j][i]))
}
