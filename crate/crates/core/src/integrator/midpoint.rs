//! Implicit midpoint comparator. With `μ = (m^ℓ + m^{ℓ+1})/2` the nodal
//! relation
//!
//! `d_t m^{ℓ+1} = -μ × H(μ) + α μ × d_t m^{ℓ+1}`,
//! `H(μ) = C_e Δ_h μ + h_m(μ, u^ℓ) - π(μ)`,
//!
//! is solved by fixed-point iteration in `μ`, each sweep inverting the
//! node-local `3×3` system exactly. `Δ_h = -M_L⁻¹ K` is the lumped discrete
//! Laplacian. The momentum step then runs as in the tangent scheme.

use crate::error::SimError;
use crate::fem::{assemble_h_load, assemble_stiffness, lumped_weights, FieldKind, NodalVectorField};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;

use super::elastic::Elastodynamics;
use super::tangent::Advisory;
use super::{Params, SimulationState, StepReport, TimeStepper};

/// Increment size below which sweeps must contract monotonically.
pub const CONTRACTION_ONSET: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Stop once successive iterates of `m^{ℓ+1}` differ by less than `eps`
    /// in the nodal max-norm.
    pub eps: f64,
    pub max_sweeps: usize,
    /// Relaxation factor; 1 is plain iteration.
    pub damping: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { eps: 1e-10, max_sweeps: 500, damping: 1.0 }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.eps > 0.0) {
            return Err(SimError::Config(format!("midpoint.eps must be positive, got {}", self.eps)));
        }
        if self.max_sweeps == 0 {
            return Err(SimError::Config("midpoint.max_sweeps must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SimError::Config(format!("midpoint.damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

/// Solves `(I - [b]_×) x = y`.
fn solve_cross(b: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    let bxy = cross(b, y);
    let by = b[0] * y[0] + b[1] * y[1] + b[2] * y[2];
    let bb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    let d = 1.0 + bb;
    [(y[0] + bxy[0] + by * b[0]) / d, (y[1] + bxy[1] + by * b[1]) / d, (y[2] + bxy[2] + by * b[2]) / d]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn shortest_edge(mesh: &Mesh) -> f64 {
    let mut h = f64::INFINITY;
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        for a in 0..el.len() {
            for b in a + 1..el.len() {
                let (p, q) = (mesh.node(el[a]), mesh.node(el[b]));
                let d = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                h = h.min(d);
            }
        }
    }
    h
}

#[derive(Debug, Clone)]
pub struct MidpointIntegrator<'a> {
    mesh: &'a Mesh,
    params: Params,
    k: f64,
    cfg: FixedPointConfig,
    stiffness: CsrMatrix,
    weights: Vec<f64>,
    elastic: Elastodynamics,
}

impl<'a> MidpointIntegrator<'a> {
    pub fn new(
        mesh: &'a Mesh,
        params: Params,
        k: f64,
        cfg: FixedPointConfig,
    ) -> Result<MidpointIntegrator<'a>, SimError> {
        params.validate()?;
        cfg.validate()?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(SimError::Config(format!("time step must be positive, got {k}")));
        }
        let stiffness = assemble_stiffness(mesh, 3)?;
        let weights = lumped_weights(mesh);
        let elastic = Elastodynamics::new(mesh, &params, k)?;
        Ok(MidpointIntegrator { mesh, params, k, cfg, stiffness, weights, elastic })
    }

    pub fn config(&self) -> &FixedPointConfig {
        &self.cfg
    }

    pub fn elastodynamics(&self) -> &Elastodynamics {
        &self.elastic
    }

    /// Warns when `k > h²/10` with `h` the shortest mesh edge.
    pub fn advisory(&self) -> Advisory {
        let h = shortest_edge(self.mesh);
        if self.k > h * h / 10.0 {
            Advisory::Warn(format!("midpoint step {:.3e} exceeds h^2/10 = {:.3e}", self.k, h * h / 10.0))
        } else {
            Advisory::Ok
        }
    }

    /// Nodal effective field `γ H(μ)`, three values per node.
    pub fn effective_field(&self, mu: &[f64], u: &NodalVectorField) -> Result<Vec<f64>, SimError> {
        let p = &self.params;
        let mut h = self.stiffness.spmv(mu)?;
        for (z, &w) in self.weights.iter().enumerate() {
            for c in 0..3 {
                h[3 * z + c] *= -p.c_exch / w;
            }
        }
        if !p.lambda_m.is_zero() {
            let mu_field = NodalVectorField::new(3, FieldKind::General, mu.to_vec())?;
            let load = assemble_h_load(self.mesh, u, &mu_field, &p.lambda_e, &p.lambda_m, p.quadrature)?;
            for (z, &w) in self.weights.iter().enumerate() {
                for c in 0..3 {
                    h[3 * z + c] += load[3 * z + c] / w;
                }
            }
        }
        if !p.contribution.is_zero() {
            for z in 0..self.weights.len() {
                let pi = p.contribution.evaluate_at(&[mu[3 * z], mu[3 * z + 1], mu[3 * z + 2]]);
                for c in 0..3 {
                    h[3 * z + c] -= pi[c];
                }
            }
        }
        let gamma = p.field_scale();
        if gamma != 1.0 {
            h.iter_mut().for_each(|x| *x *= gamma);
        }
        Ok(h)
    }

    /// Fixed-point solve for `m^{ℓ+1}`; returns it with the sweep count and
    /// the last increment.
    pub fn step_magnetization(&self, state: &SimulationState) -> Result<(NodalVectorField, usize, f64), SimError> {
        let m0 = state.m.values();
        let n = self.weights.len();
        let half_k = 0.5 * self.k;
        let alpha = self.params.alpha;
        let mut mu = m0.to_vec();
        let mut previous = f64::INFINITY;
        for sweep in 1..=self.cfg.max_sweeps {
            let h = self.effective_field(&mu, &state.u)?;
            let mut increment = 0.0_f64;
            let mut next = vec![0.0; 3 * n];
            for z in 0..n {
                let a = [mu[3 * z], mu[3 * z + 1], mu[3 * z + 2]];
                let hz = [h[3 * z], h[3 * z + 1], h[3 * z + 2]];
                let axh = cross(a, hz);
                let y = [-half_k * axh[0], -half_k * axh[1], -half_k * axh[2]];
                let d = solve_cross([alpha * a[0], alpha * a[1], alpha * a[2]], y);
                for c in 0..3 {
                    let target = m0[3 * z + c] + d[c];
                    let new = mu[3 * z + c] + self.cfg.damping * (target - mu[3 * z + c]);
                    // m^{ℓ+1} = 2μ - m^ℓ, so its increment is twice that of μ
                    increment = increment.max(2.0 * (new - mu[3 * z + c]).abs());
                    next[3 * z + c] = new;
                }
            }
            if !increment.is_finite() {
                return Err(SimError::FixedPointNotConverged { sweeps: sweep, increment });
            }
            mu = next;
            if increment < self.cfg.eps {
                let m_next: Vec<f64> = mu.iter().zip(m0).map(|(a, b)| 2.0 * a - b).collect();
                let field = NodalVectorField::new(3, FieldKind::General, m_next)?;
                return Ok((field, sweep, increment));
            }
            if previous < CONTRACTION_ONSET && increment >= previous {
                return Err(SimError::FixedPointNotContracting { sweep, increment, previous });
            }
            previous = increment;
        }
        Err(SimError::FixedPointNotConverged { sweeps: self.cfg.max_sweeps, increment: previous })
    }
}

impl TimeStepper for MidpointIntegrator<'_> {
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
        let (m_next, sweeps, increment) = self.step_magnetization(state)?;
        if self.params.check_invariants {
            let drift = (0..m_next.n_nodes())
                .map(|z| {
                    let a = m_next.node(z).iter().map(|x| x * x).sum::<f64>();
                    let b = state.m.node(z).iter().map(|x| x * x).sum::<f64>();
                    (a - b).abs()
                })
                .fold(0.0, f64::max);
            if drift > 10.0 * self.cfg.eps {
                return Err(SimError::Invariant(format!("midpoint step changed a nodal modulus by {drift:.3e}")));
            }
        }
        let mom = self.elastic.step(self.mesh, &self.params, &state.u, &state.dtu, &m_next)?;
        if self.params.check_invariants {
            mom.u_next.validate(self.mesh).map_err(|e| SimError::Invariant(e.to_string()))?;
            mom.dtu_next.validate(self.mesh).map_err(|e| SimError::Invariant(e.to_string()))?;
        }
        // the midpoint rule conserves |m(z)| only up to the fixed-point tolerance
        *state = SimulationState {
            step: state.step + 1,
            time: (state.step + 1) as f64 * self.k,
            m: m_next.relabel_unchecked(FieldKind::Magnetization),
            u: mom.u_next,
            dtu: mom.dtu_next,
        };
        Ok(StepReport {
            iters_llg: sweeps,
            iters_mom: mom.stats.iterations,
            fixed_point_increment: increment,
            ..StepReport::default()
        })
    }
}
