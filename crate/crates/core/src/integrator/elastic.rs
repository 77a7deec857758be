//! Implicit momentum step shared by both schemes.

use crate::error::SimError;
use crate::fem::{
    assemble_elastic_rhs, assemble_elasticity, assemble_mass, free_displacement_dofs, FieldKind, NodalVectorField,
};
use crate::linalg::{solve_spd, CsrMatrix, SolveStats};
use crate::mesh::Mesh;

use super::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumStep {
    pub u_next: NodalVectorField,
    pub dtu_next: NodalVectorField,
    pub stats: SolveStats,
}

/// Precomputed operators for
/// `(ρ/k² M + K) u_next = b(m_next) + ρ/k² M (u + k d_t u)` on interior dofs.
#[derive(Debug, Clone)]
pub struct Elastodynamics {
    k: f64,
    rho: f64,
    free: Vec<usize>,
    /// Consistent mass and elasticity over all `2N` dofs.
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    system: CsrMatrix,
}

impl Elastodynamics {
    pub fn new(mesh: &Mesh, params: &Params, k: f64) -> Result<Elastodynamics, SimError> {
        let mass = assemble_mass(mesh, 2, false)?;
        let stiffness = assemble_elasticity(mesh, &params.lambda_e)?;
        let free = free_displacement_dofs(mesh);
        let rho = params.rho;
        let system = mass.linear_combination(rho / (k * k), &stiffness, 1.0)?.restrict(&free, &free);
        Ok(Elastodynamics { k, rho, free, mass, stiffness, system })
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// System matrix restricted to interior dofs.
    pub fn system(&self) -> &CsrMatrix {
        &self.system
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// `ρ‖d_t u‖² + (λ^e ε(u), ε(u))`.
    pub fn energy(&self, u: &NodalVectorField, dtu: &NodalVectorField) -> f64 {
        elastic_energy(&self.mass, &self.stiffness, self.rho, u, dtu)
    }

    pub fn step(
        &self,
        mesh: &Mesh,
        params: &Params,
        u: &NodalVectorField,
        dtu: &NodalVectorField,
        m_next: &NodalVectorField,
    ) -> Result<MomentumStep, SimError> {
        let k = self.k;
        let n2 = u.values().len();
        let load = assemble_elastic_rhs(mesh, m_next, &params.lambda_e, &params.lambda_m, params.quadrature)?;
        let predicted: Vec<f64> = u.values().iter().zip(dtu.values()).map(|(a, b)| a + k * b).collect();
        let inertia = self.mass.spmv(&predicted)?;
        let scale = self.rho / (k * k);
        let rhs: Vec<f64> = self.free.iter().map(|&i| load[i] + scale * inertia[i]).collect();
        let guess: Vec<f64> = self.free.iter().map(|&i| u.values()[i]).collect();
        let (x, stats) = solve_spd(&self.system, &rhs, Some(&guess), &params.solver)?;
        let mut u_next = vec![0.0; n2];
        for (&i, xi) in self.free.iter().zip(x) {
            u_next[i] = xi;
        }
        let dtu_next: Vec<f64> = u_next.iter().zip(u.values()).map(|(a, b)| (a - b) / k).collect();
        Ok(MomentumStep {
            u_next: NodalVectorField::new(2, FieldKind::Displacement, u_next)?,
            dtu_next: NodalVectorField::new(2, FieldKind::Velocity, dtu_next)?,
            stats,
        })
    }
}

/// `ρ dtuᵀ M dtu + uᵀ K u` with the consistent mass `M` and elasticity `K`.
pub fn elastic_energy(
    mass: &CsrMatrix,
    stiffness: &CsrMatrix,
    rho: f64,
    u: &NodalVectorField,
    dtu: &NodalVectorField,
) -> f64 {
    rho * mass.quadratic_form(dtu.values()) + stiffness.quadratic_form(u.values())
}
