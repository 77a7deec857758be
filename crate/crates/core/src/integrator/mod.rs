//! Time steppers for the coupled magnetization / displacement system.

mod elastic;
mod midpoint;
mod tangent;

pub use elastic::{elastic_energy, Elastodynamics, MomentumStep};
pub use midpoint::{FixedPointConfig, MidpointIntegrator};
pub use tangent::{project_node, stability_advisory, Advisory, LlgStep, TangentIntegrator};

use crate::contributions::Contribution;
use crate::error::SimError;
use crate::fem::{FemError, FieldKind, MassMode, NodalVectorField, Quadrature};
use crate::linalg::SolverConfig;
use crate::material::{Rank4Tensor, TensorLabel};
use crate::mesh::Mesh;

/// Exchange constant of the blow-up benchmark. Exchange-only dynamics
/// depend on `C_e` only through the time scale `C_e t`; this value matches
/// the reference blow-up times of the benchmark.
pub const BENCHMARK_EXCHANGE: f64 = 2.0;

/// Allowed drift of `|m(z)| + k|v(z)|`-type rounding before the projection
/// is treated as broken.
pub const PROJECTION_DRIFT_TOL: f64 = 1e-9;
/// Relative slack for the discrete energy inequalities.
pub const ENERGY_REL_TOL: f64 = 1e-10;

/// Time scaling of the magnetization dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LlgForm {
    /// `m_t - α m × m_t = -m × H`.
    #[default]
    Gilbert,
    /// `m_t = -m × H - α m × (m × H)`: the Gilbert form with `H` scaled by
    /// `1 + α²`.
    LandauLifshitz,
}

/// Physical and numerical parameters shared by both schemes.
#[derive(Debug, Clone)]
pub struct Params {
    pub alpha: f64,
    pub theta: f64,
    /// Exchange constant `C_e`.
    pub c_exch: f64,
    pub rho: f64,
    pub lambda_e: Rank4Tensor,
    pub lambda_m: Rank4Tensor,
    pub contribution: Contribution,
    pub form: LlgForm,
    pub mass: MassMode,
    pub quadrature: Quadrature,
    pub solver: SolverConfig,
    /// Re-check state invariants after every step.
    pub check_invariants: bool,
}

impl Params {
    /// Benchmark parameters in 2D: diagonal tensors `λ_1111 = λ_2222 = C`,
    /// `α = θ = ρ = 1`, `C_e = BENCHMARK_EXCHANGE`, no lower-order
    /// contribution, lumped LLG mass and exact six-point quadrature.
    pub fn benchmark(c_elastic: f64, c_magnetic: f64) -> Result<Params, SimError> {
        Ok(Params {
            alpha: 1.0,
            theta: 1.0,
            c_exch: BENCHMARK_EXCHANGE,
            rho: 1.0,
            lambda_e: Rank4Tensor::diagonal(2, c_elastic, TensorLabel::Elastic)?,
            lambda_m: Rank4Tensor::diagonal(2, c_magnetic, TensorLabel::Magnetic)?,
            contribution: Contribution::zero(),
            form: LlgForm::Gilbert,
            mass: MassMode::Lumped,
            quadrature: Quadrature::Consistent,
            solver: SolverConfig::default(),
            check_invariants: true,
        })
    }

    /// Factor multiplying the effective field in the Gilbert form.
    pub fn field_scale(&self) -> f64 {
        match self.form {
            LlgForm::Gilbert => 1.0,
            LlgForm::LandauLifshitz => 1.0 + self.alpha * self.alpha,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config(format!("{name} must be positive, got {x}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("C_e", self.c_exch)?;
        positive("rho", self.rho)?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(SimError::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        self.solver.validate().map_err(|e| SimError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Discrete state at step `ℓ`: magnetization, displacement, and the
/// backward difference quotient of the displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub step: usize,
    pub time: f64,
    pub m: NodalVectorField,
    pub u: NodalVectorField,
    pub dtu: NodalVectorField,
}

impl SimulationState {
    /// Step-zero state with `d_t u⁰ := u̇⁰`.
    pub fn new(
        mesh: &Mesh,
        m0: NodalVectorField,
        u0: NodalVectorField,
        dtu0: NodalVectorField,
    ) -> Result<SimulationState, SimError> {
        expect_kind(&m0, FieldKind::Magnetization, 3)?;
        expect_kind(&u0, FieldKind::Displacement, 2)?;
        expect_kind(&dtu0, FieldKind::Velocity, 2)?;
        m0.validate(mesh)?;
        u0.validate(mesh)?;
        dtu0.validate(mesh)?;
        Ok(SimulationState { step: 0, time: 0.0, m: m0, u: u0, dtu: dtu0 })
    }

    /// Step-zero state with the elastic subsystem at rest.
    pub fn at_rest(mesh: &Mesh, m0: NodalVectorField) -> Result<SimulationState, SimError> {
        let n = mesh.n_nodes();
        SimulationState::new(
            mesh,
            m0,
            NodalVectorField::zeros(n, 2, FieldKind::Displacement),
            NodalVectorField::zeros(n, 2, FieldKind::Velocity),
        )
    }

    /// Re-checks the unit-modulus and boundary invariants.
    pub fn check(&self, mesh: &Mesh) -> Result<(), SimError> {
        self.m.validate(mesh)?;
        self.u.validate(mesh)?;
        self.dtu.validate(mesh)?;
        Ok(())
    }
}

fn expect_kind(f: &NodalVectorField, kind: FieldKind, n_comp: usize) -> Result<(), SimError> {
    if f.n_comp() != n_comp {
        return Err(FemError::Components { got: f.n_comp(), expected: n_comp }.into());
    }
    if f.kind() != kind {
        return Err(SimError::Config(format!("expected a {kind:?} field, got {:?}", f.kind())));
    }
    Ok(())
}

/// Per-step solver statistics and invariant residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Krylov iterations (tangent scheme) or fixed-point sweeps (midpoint).
    pub iters_llg: usize,
    pub iters_mom: usize,
    /// `max_z |m(z)·v(z)|`; zero for the midpoint scheme.
    pub tangency_residual: f64,
    /// `‖v‖²` in the mass of the LLG step; zero for the midpoint scheme.
    pub v_mass_sq: f64,
    /// `‖∇(m + k v)‖²` and `‖∇m_next‖²` for the tangent scheme.
    pub grad_sq_predicted: f64,
    pub grad_sq_projected: f64,
    /// Last fixed-point increment (midpoint scheme).
    pub fixed_point_increment: f64,
}

/// A one-step map on [`SimulationState`].
pub trait TimeStepper {
    fn mesh(&self) -> &Mesh;
    fn time_step(&self) -> f64;
    fn params(&self) -> &Params;
    /// Advances `state` by one step; on error the state is left untouched.
    fn advance(&self, state: &mut SimulationState) -> Result<StepReport, SimError>;
}
