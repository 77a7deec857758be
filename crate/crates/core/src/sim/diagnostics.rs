//! Scalar diagnostics of a magnetization / displacement state.

use crate::fem::{assemble_mass, assemble_stiffness, NodalVectorField};
use crate::integrator::{Elastodynamics, SimulationState, StepReport};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;
use crate::SimError;

use super::config::GradientNorm;

/// One recorded sample of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    /// `½‖∇m‖²`.
    pub e_exchange: f64,
    /// Element maximum of the pointwise norm of `∇m`.
    pub w1inf: f64,
    /// `ρ‖d_t u‖² + (λ^e ε(u), ε(u))`.
    pub e_elastic: f64,
    pub m1_l2: f64,
    pub m3_l2: f64,
    /// `max_z | |m(z)| - 1 |`.
    pub mod_dev: f64,
    pub tangency_res: f64,
    pub iters_llg: usize,
    pub iters_mom: usize,
}

/// `½ mᵀ K m` with the P1 stiffness.
pub fn compute_energy(mesh: &Mesh, m: &NodalVectorField) -> Result<f64, SimError> {
    let k = assemble_stiffness(mesh, m.n_comp())?;
    Ok(0.5 * k.quadratic_form(m.values()))
}

/// Norm of the constant gradient of `m` on element `e`; `grad[c][d] = ∂_d m_c`.
fn element_gradient_norm(mesh: &Mesh, m: &NodalVectorField, e: usize, norm: GradientNorm) -> f64 {
    let (g, _) = mesh.triangle_gradients(e);
    let tri = mesh.triangle(e);
    let n_comp = m.n_comp();
    let mut acc = 0.0_f64;
    for c in 0..n_comp {
        let mut row = [0.0; 2];
        for (a, &node) in tri.iter().enumerate() {
            let v = m.node(node)[c];
            row[0] += v * g[a][0];
            row[1] += v * g[a][1];
        }
        match norm {
            GradientNorm::Frobenius => acc += row[0] * row[0] + row[1] * row[1],
            GradientNorm::RowSum => acc = acc.max(row[0].abs() + row[1].abs()),
        }
    }
    match norm {
        GradientNorm::Frobenius => acc.sqrt(),
        GradientNorm::RowSum => acc,
    }
}

/// `max_K |∇m|_K|` over elements.
pub fn compute_w1inf(mesh: &Mesh, m: &NodalVectorField, norm: GradientNorm) -> f64 {
    (0..mesh.n_elements()).map(|e| element_gradient_norm(mesh, m, e, norm)).fold(0.0, f64::max)
}

fn component_average(mass: &CsrMatrix, area: f64, m: &NodalVectorField, j: usize) -> f64 {
    let comp: Vec<f64> = (0..m.n_nodes()).map(|z| m.node(z)[j - 1]).collect();
    mass.quadratic_form(&comp).max(0.0).sqrt() / area
}

/// `(1/|Ω|) ‖m_j‖_{L²}` for `j ∈ {1, 2, 3}`, consistent mass.
pub fn compute_component_average(mesh: &Mesh, m: &NodalVectorField, j: usize) -> Result<f64, SimError> {
    if !(1..=m.n_comp()).contains(&j) {
        return Err(SimError::Config(format!("component index {j} out of range 1..={}", m.n_comp())));
    }
    let mass = assemble_mass(mesh, 1, false)?;
    Ok(component_average(&mass, mesh.domain_measure(), m, j))
}

/// Cached operators for computing [`DiagnosticsRow`]s along a run.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    stiffness: CsrMatrix,
    scalar_mass: CsrMatrix,
    area: f64,
    rho: f64,
    norm: GradientNorm,
}

impl Diagnostics {
    pub fn new(mesh: &Mesh, rho: f64, norm: GradientNorm) -> Result<Diagnostics, SimError> {
        Ok(Diagnostics {
            stiffness: assemble_stiffness(mesh, 3)?,
            scalar_mass: assemble_mass(mesh, 1, false)?,
            area: mesh.domain_measure(),
            rho,
            norm,
        })
    }

    pub fn row(
        &self,
        mesh: &Mesh,
        elastic: &Elastodynamics,
        state: &SimulationState,
        report: &StepReport,
    ) -> DiagnosticsRow {
        let m = &state.m;
        DiagnosticsRow {
            t: state.time,
            e_exchange: 0.5 * self.stiffness.quadratic_form(m.values()),
            w1inf: compute_w1inf(mesh, m, self.norm),
            e_elastic: crate::integrator::elastic_energy(
                elastic.mass(),
                elastic.stiffness(),
                self.rho,
                &state.u,
                &state.dtu,
            ),
            m1_l2: component_average(&self.scalar_mass, self.area, m, 1),
            m3_l2: component_average(&self.scalar_mass, self.area, m, 3),
            mod_dev: m.modulus_deviation(),
            tangency_res: report.tangency_residual,
            iters_llg: report.iters_llg,
            iters_mom: report.iters_mom,
        }
    }
}

/// Location of the maximum of the `W^{1,∞}` seminorm over a recorded run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowUp {
    /// The seminorm vanishes identically or is largest at the initial time.
    None,
    /// Interior maximum at this time.
    At(f64),
    /// Still largest at the last recorded time; blow-up is not before it.
    NotBefore(f64),
}

impl BlowUp {
    /// The argmax time, when there is one.
    pub fn time(&self) -> Option<f64> {
        match *self {
            BlowUp::At(t) | BlowUp::NotBefore(t) => Some(t),
            BlowUp::None => None,
        }
    }
}

/// Argmax of `w1inf` over `rows` (first occurrence).
pub fn blow_up_time(rows: &[DiagnosticsRow]) -> BlowUp {
    let Some((idx, best)) = rows.iter().enumerate().fold(None, |acc: Option<(usize, f64)>, (i, r)| match acc {
        Some((_, b)) if r.w1inf <= b => acc,
        _ => Some((i, r.w1inf)),
    }) else {
        return BlowUp::None;
    };
    if best == 0.0 || idx == 0 {
        BlowUp::None
    } else if idx + 1 == rows.len() {
        BlowUp::NotBefore(rows[idx].t)
    } else {
        BlowUp::At(rows[idx].t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FieldKind;
    use crate::mesh::build_structured_mesh;

    fn row(t: f64, w: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            t,
            e_exchange: 0.0,
            w1inf: w,
            e_elastic: 0.0,
            m1_l2: 0.0,
            m3_l2: 0.0,
            mod_dev: 0.0,
            tangency_res: 0.0,
            iters_llg: 0,
            iters_mom: 0,
        }
    }

    #[test]
    fn blow_up_classification() {
        assert_eq!(blow_up_time(&[]), BlowUp::None);
        assert_eq!(blow_up_time(&[row(0.0, 0.0), row(0.1, 0.0)]), BlowUp::None);
        assert_eq!(blow_up_time(&[row(0.0, 3.0), row(0.1, 2.0)]), BlowUp::None);
        assert_eq!(blow_up_time(&[row(0.0, 1.0), row(0.1, 5.0), row(0.2, 5.0), row(0.3, 2.0)]), BlowUp::At(0.1));
        assert_eq!(blow_up_time(&[row(0.0, 1.0), row(0.1, 2.0)]), BlowUp::NotBefore(0.1));
    }

    #[test]
    fn constant_field_diagnostics() {
        let mesh = build_structured_mesh(2).unwrap();
        let m = NodalVectorField::constant(mesh.n_nodes(), FieldKind::Magnetization, &[0.6, 0.8, 0.0]).unwrap();
        assert!(compute_energy(&mesh, &m).unwrap().abs() < 1e-14);
        assert!(compute_w1inf(&mesh, &m, GradientNorm::Frobenius) < 1e-12);
        assert!((compute_component_average(&mesh, &m, 1).unwrap() - 0.6).abs() < 1e-14);
        assert!(compute_component_average(&mesh, &m, 3).unwrap().abs() < 1e-14);
        assert!(compute_component_average(&mesh, &m, 4).is_err());
        let e3 = NodalVectorField::constant(mesh.n_nodes(), FieldKind::Magnetization, &[0.0, 0.0, 1.0]).unwrap();
        assert!((compute_component_average(&mesh, &e3, 3).unwrap() - 1.0).abs() < 1e-14);
    }
}
