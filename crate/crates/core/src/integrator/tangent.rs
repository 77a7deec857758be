//! Linear-implicit tangent-plane scheme: a constrained linear LLG solve for
//! the discrete velocity `v`, nodal projection of `m + k v` onto the sphere,
//! then an implicit momentum step driven by the new magnetization.

use crate::error::SimError;
use crate::fem::{
    assemble_h_load, assemble_mass, assemble_skew, assemble_stiffness, nodal_load, FieldKind, MassMode,
    NodalVectorField,
};
use crate::linalg::{solve_constrained, CsrMatrix, SolveStats};
use crate::mesh::Mesh;

use super::elastic::Elastodynamics;
use super::{Params, SimulationState, StepReport, TimeStepper, ENERGY_REL_TOL, PROJECTION_DRIFT_TOL};

/// Outcome of the stability check for a given `θ`, mesh size and step.
#[derive(Debug, Clone, PartialEq)]
pub enum Advisory {
    Ok,
    Warn(String),
}

/// `θ > ½` is unconditionally stable. For `θ = ½` warns when `k/h > 1`,
/// for `θ < ½` when `k/h² > 1`.
pub fn stability_advisory(theta: f64, h: f64, k: f64) -> Advisory {
    if theta > 0.5 {
        Advisory::Ok
    } else if theta == 0.5 {
        if k / h > 1.0 {
            Advisory::Warn(format!("theta = 1/2 with k/h = {:.3e} > 1", k / h))
        } else {
            Advisory::Ok
        }
    } else if k / (h * h) > 1.0 {
        Advisory::Warn(format!("theta = {theta} < 1/2 with k/h^2 = {:.3e} > 1", k / (h * h)))
    } else {
        Advisory::Ok
    }
}

/// `(m + k v) / |m + k v|` at one node.
pub fn project_node(m: [f64; 3], v: [f64; 3], k: f64) -> [f64; 3] {
    let w = [m[0] + k * v[0], m[1] + k * v[1], m[2] + k * v[2]];
    let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    [w[0] / norm, w[1] / norm, w[2] / norm]
}

/// Result of the magnetization half of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct LlgStep {
    pub v: NodalVectorField,
    pub m_next: NodalVectorField,
    pub stats: SolveStats,
    /// `max_z |m(z)·v(z)|`.
    pub tangency_residual: f64,
    /// `max_z |v(z)|`.
    pub v_max: f64,
    /// `vᵀ M v` with the LLG mass.
    pub v_mass_sq: f64,
    /// `‖∇(m + k v)‖²`.
    pub grad_sq_predicted: f64,
    /// `‖∇m_next‖²`.
    pub grad_sq_projected: f64,
}

#[derive(Debug, Clone)]
pub struct TangentIntegrator<'a> {
    mesh: &'a Mesh,
    params: Params,
    k: f64,
    /// Scalar-replicated stiffness over `3N` dofs.
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    /// `α M + θ k γ C_e K`, the part of the LLG matrix independent of `m`.
    base: CsrMatrix,
    /// Absolute rounding allowance for Dirichlet-energy comparisons.
    energy_slack: f64,
    elastic: Elastodynamics,
}

impl<'a> TangentIntegrator<'a> {
    pub fn new(mesh: &'a Mesh, params: Params, k: f64) -> Result<TangentIntegrator<'a>, SimError> {
        params.validate()?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(SimError::Config(format!("time step must be positive, got {k}")));
        }
        let stiffness = assemble_stiffness(mesh, 3)?;
        let mass = assemble_mass(mesh, 3, params.mass == MassMode::Lumped)?;
        let base = mass.linear_combination(params.alpha, &stiffness, params.theta * k * params.c_exch * params.field_scale())?;
        let elastic = Elastodynamics::new(mesh, &params, k)?;
        let energy_slack = 16.0 * f64::EPSILON * stiffness.values().iter().map(|v| v.abs()).sum::<f64>();
        Ok(TangentIntegrator { mesh, params, k, stiffness, mass, base, energy_slack, elastic })
    }

    pub fn advisory(&self) -> Advisory {
        stability_advisory(self.params.theta, self.mesh.h_max(), self.k)
    }

    pub fn elastodynamics(&self) -> &Elastodynamics {
        &self.elastic
    }

    /// Matrix and right-hand side of the unconstrained LLG system at `state`;
    /// the velocity solves it subject to `m(z)·v(z) = 0`.
    pub fn llg_system(&self, state: &SimulationState) -> Result<(CsrMatrix, Vec<f64>), SimError> {
        let p = &self.params;
        let skew = assemble_skew(self.mesh, &state.m, p.mass)?;
        let a = self.base.linear_combination(1.0, &skew, 1.0)?;
        let mut rhs = self.stiffness.spmv(state.m.values())?;
        rhs.iter_mut().for_each(|x| *x *= -p.c_exch);
        if !p.lambda_m.is_zero() {
            let h = assemble_h_load(self.mesh, &state.u, &state.m, &p.lambda_e, &p.lambda_m, p.quadrature)?;
            rhs.iter_mut().zip(h).for_each(|(r, hi)| *r += hi);
        }
        if !p.contribution.is_zero() {
            let pi = p.contribution.evaluate(&state.m)?;
            let load = nodal_load(self.mesh, &pi, p.mass)?;
            rhs.iter_mut().zip(load).for_each(|(r, li)| *r -= li);
        }
        let gamma = p.field_scale();
        if gamma != 1.0 {
            rhs.iter_mut().for_each(|x| *x *= gamma);
        }
        Ok((a, rhs))
    }

    pub fn step_llg(&self, state: &SimulationState) -> Result<LlgStep, SimError> {
        let (a, rhs) = self.llg_system(state)?;
        let m = state.m.to_vec3s();
        let sol = solve_constrained(&a, &rhs, &m, &self.params.solver)?;
        let v = sol.v;
        let k = self.k;

        let mut tangency_residual = 0.0_f64;
        let mut v_max = 0.0_f64;
        let mut predicted = vec![0.0; v.len()];
        let mut next = vec![0.0; v.len()];
        for (z, mz) in m.iter().enumerate() {
            let vz = &v[3 * z..3 * z + 3];
            let dotp = mz[0] * vz[0] + mz[1] * vz[1] + mz[2] * vz[2];
            tangency_residual = tangency_residual.max(dotp.abs());
            v_max = v_max.max((vz[0] * vz[0] + vz[1] * vz[1] + vz[2] * vz[2]).sqrt());
            let w = [mz[0] + k * vz[0], mz[1] + k * vz[1], mz[2] + k * vz[2]];
            let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            // |m + kv|² = 1 + k²|v|² for tangent v
            if norm < 1.0 - PROJECTION_DRIFT_TOL {
                return Err(SimError::Invariant(format!("|m + k v| = {norm} < 1 at node {z} before projection")));
            }
            for c in 0..3 {
                predicted[3 * z + c] = w[c];
                next[3 * z + c] = w[c] / norm;
            }
        }
        let grad_sq_predicted = self.stiffness.quadratic_form(&predicted);
        let grad_sq_projected = self.stiffness.quadratic_form(&next);
        let v_mass_sq = self.mass.quadratic_form(&v);

        if self.params.check_invariants {
            let allowed = 10.0 * self.params.solver.tol_rel * v_max;
            if tangency_residual > allowed && tangency_residual > f64::EPSILON * v_max * 16.0 {
                return Err(SimError::Invariant(format!(
                    "tangency residual {tangency_residual:.3e} exceeds {allowed:.3e}"
                )));
            }
            if grad_sq_projected > grad_sq_predicted + ENERGY_REL_TOL * grad_sq_predicted.abs() + self.energy_slack {
                return Err(SimError::Invariant(format!(
                    "projection increased the Dirichlet energy: {grad_sq_projected:.16e} > {grad_sq_predicted:.16e}"
                )));
            }
        }

        let m_next = NodalVectorField::new(3, FieldKind::Magnetization, next)?;
        Ok(LlgStep {
            v: NodalVectorField::new(3, FieldKind::Tangent, v)?,
            m_next,
            stats: sol.stats,
            tangency_residual,
            v_max,
            v_mass_sq,
            grad_sq_predicted,
            grad_sq_projected,
        })
    }

    pub fn step_momentum(
        &self,
        state: &SimulationState,
        m_next: &NodalVectorField,
    ) -> Result<super::MomentumStep, SimError> {
        self.elastic.step(self.mesh, &self.params, &state.u, &state.dtu, m_next)
    }
}

impl TimeStepper for TangentIntegrator<'_> {
    fn mesh(&self) -> &Mesh {
        self.mesh
    }

    fn time_step(&self) -> f64 {
        self.k
    }

    fn params(&self) -> &Params {
        &self.params
    }

    fn advance(&self, state: &mut SimulationState) -> Result<StepReport, SimError> {
        let llg = self.step_llg(state)?;
        let mom = self.step_momentum(state, &llg.m_next)?;
        let next = SimulationState {
            step: state.step + 1,
            time: (state.step + 1) as f64 * self.k,
            m: llg.m_next,
            u: mom.u_next,
            dtu: mom.dtu_next,
        };
        if self.params.check_invariants {
            next.check(self.mesh).map_err(|e| SimError::Invariant(e.to_string()))?;
        }
        *state = next;
        Ok(StepReport {
            iters_llg: llg.stats.iterations,
            iters_mom: mom.stats.iterations,
            tangency_residual: llg.tangency_residual,
            v_mass_sq: llg.v_mass_sq,
            grad_sq_predicted: llg.grad_sq_predicted,
            grad_sq_projected: llg.grad_sq_projected,
            fixed_point_increment: 0.0,
        })
    }
}
