//! Library assembly and solves against brute-force references.

mod common;

use common::*;
use magstrict::contributions::{Contribution, ContributionKind, SignConvention};
use magstrict::fem::{
    assemble_elastic_rhs, assemble_h_load, assemble_mass, assemble_skew, assemble_stiffness, FieldKind, MassMode,
    NodalVectorField, Quadrature,
};
use magstrict::integrator::{Params, SimulationState, TangentIntegrator};
use magstrict::material::{Rank4Tensor, TensorLabel};
use magstrict::mesh::{build_structured_mesh, Mesh};
use magstrict::sim::{compute_energy, compute_w1inf, GradientNorm};
use rand::Rng;

fn random_params(rng: &mut impl Rng, mass: MassMode, quadrature: Quadrature) -> (Params, f64) {
    let mut p = Params::benchmark(0.0, 0.0).unwrap();
    p.alpha = rng.gen_range(0.2..2.0);
    p.theta = rng.gen_range(0.0..1.0);
    p.c_exch = rng.gen_range(0.5..3.0);
    p.lambda_e = random_tensor(TensorLabel::Elastic, 5.0, rng);
    p.lambda_m = random_tensor(TensorLabel::Magnetic, 2.0, rng);
    p.mass = mass;
    p.quadrature = quadrature;
    let axis = random_unit(rng);
    p.contribution = Contribution::new(
        ContributionKind::UniaxialAnisotropy { axis, c_ani: rng.gen_range(0.0..3.0) },
        SignConvention::Literal,
    )
    .unwrap();
    p.solver.tol_rel = 1e-13;
    (p, rng.gen_range(1e-3..1e-1))
}

fn check_llg_against_dense(mesh: &Mesh, mass: MassMode, quadrature: Quadrature, seed: u64, states: usize) {
    let mut rng = rng(seed);
    for _ in 0..states {
        let (params, k) = random_params(&mut rng, mass, quadrature);
        let m = random_magnetization(mesh, &mut rng);
        let u = random_interior_field(mesh, FieldKind::Displacement, 0.05, &mut rng);
        let dtu = NodalVectorField::zeros(mesh.n_nodes(), 2, FieldKind::Velocity);
        let state = SimulationState::new(mesh, m.clone(), u.clone(), dtu).unwrap();
        let dense = DenseStep {
            alpha: params.alpha,
            theta: params.theta,
            c_exch: params.c_exch,
            k,
            lumped: mass == MassMode::Lumped,
            vertex_h: quadrature == Quadrature::Vertex,
        };
        let contribution = params.contribution;
        let v_ref = dense.velocity(mesh, &m, &u, &params.lambda_e, &params.lambda_m, &|mz| {
            contribution.evaluate_at(&mz)
        });
        let stepper = TangentIntegrator::new(mesh, params, k).unwrap();
        let step = stepper.step_llg(&state).unwrap();
        let err = max_abs_diff(step.v.values(), &v_ref) / max_abs(&v_ref);
        assert!(err <= 1e-9, "relative deviation {err:.3e} from the dense saddle solve");
        assert!(step.grad_sq_projected <= step.grad_sq_predicted * (1.0 + 1e-10) + 1e-14 || mass == MassMode::Consistent);
    }
}

#[test]
fn llg_velocity_matches_dense_saddle_solve_three_nodes() {
    check_llg_against_dense(&three_node_mesh(), MassMode::Lumped, Quadrature::Consistent, 1, 20);
    check_llg_against_dense(&three_node_mesh(), MassMode::Lumped, Quadrature::Vertex, 12, 10);
}

#[test]
fn llg_velocity_matches_dense_saddle_solve_twelve_nodes() {
    let mut r = rng(2);
    let mesh = grid_mesh(4, 3, 0.2, &mut r);
    check_llg_against_dense(&mesh, MassMode::Lumped, Quadrature::Consistent, 3, 20);
    check_llg_against_dense(&mesh, MassMode::Lumped, Quadrature::Vertex, 13, 10);
}

#[test]
fn consistent_mass_llg_matches_dense_saddle_solve() {
    let mut r = rng(4);
    let mesh = grid_mesh(3, 4, 0.2, &mut r);
    check_llg_against_dense(&mesh, MassMode::Consistent, Quadrature::Consistent, 5, 10);
}

#[test]
fn mass_stiffness_and_skew_match_quadrature() {
    let mut r = rng(6);
    let mesh = grid_mesh(5, 5, 0.25, &mut r);
    let m = random_magnetization(&mesh, &mut r);
    for lumped in [true, false] {
        let (ks, ms) = dense_scalar_operators(&mesh, lumped);
        let mass = assemble_mass(&mesh, 1, lumped).unwrap().to_dense();
        let stiff = assemble_stiffness(&mesh, 1).unwrap().to_dense();
        for i in 0..mesh.n_nodes() {
            for j in 0..mesh.n_nodes() {
                assert!((mass[i][j] - ms[(i, j)]).abs() < 1e-14);
                assert!((stiff[i][j] - ks[(i, j)]).abs() < 1e-12);
            }
        }
        let mode = if lumped { MassMode::Lumped } else { MassMode::Consistent };
        let skew = assemble_skew(&mesh, &m, mode).unwrap().to_dense();
        let reference = dense_skew(&mesh, &m, lumped);
        for i in 0..3 * mesh.n_nodes() {
            for j in 0..3 * mesh.n_nodes() {
                assert!((skew[i][j] - reference[(i, j)]).abs() < 1e-14);
            }
        }
    }
}

/// Smooth random fields: nodal values of low-order trigonometric profiles.
fn smooth_fields(mesh: &Mesh, rng: &mut impl Rng) -> (NodalVectorField, NodalVectorField) {
    let c: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let m = (0..mesh.n_nodes())
        .map(|i| {
            let [x, y] = mesh.point(i);
            let v = [
                (3.0 * x + c[0]).sin() + c[1],
                (2.0 * y + c[2]).cos() + c[3] * x,
                1.0 + c[4] * x * y + 0.5 * c[5],
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        })
        .collect();
    let u = (0..mesh.n_nodes())
        .flat_map(|i| {
            let [x, y] = mesh.point(i);
            if mesh.is_boundary(i) {
                [0.0, 0.0]
            } else {
                [0.1 * (c[6] * x + y).sin(), 0.1 * (c[7] * y - x).cos() * c[8]]
            }
        })
        .collect();
    (
        NodalVectorField::magnetization(m).unwrap(),
        NodalVectorField::new(2, FieldKind::Displacement, u).unwrap(),
    )
}

fn random_tensors(rng: &mut impl Rng) -> (Rank4Tensor, Rank4Tensor) {
    (random_tensor(TensorLabel::Elastic, 10.0, rng), random_tensor(TensorLabel::Magnetic, 3.0, rng))
}

#[test]
fn consistent_h_load_matches_duffy_quadrature() {
    let mut r = rng(7);
    let mesh = build_structured_mesh(2).unwrap();
    assert!(mesh.n_elements() <= 32);
    let rule = duffy_rule(8);
    for _ in 0..5 {
        let (m, u) = smooth_fields(&mesh, &mut r);
        let (le, lm) = random_tensors(&mut r);
        let load = assemble_h_load(&mesh, &u, &m, &le, &lm, Quadrature::Consistent).unwrap();
        let mut reference = vec![0.0; 3 * mesh.n_nodes()];
        for e in 0..mesh.n_elements() {
            let tri = mesh.triangle(e);
            let area = mesh.signed_volume(e);
            let eps = strain(&mesh, &u, e);
            for (bary, w) in &rule {
                let mq = interp(&m, tri, bary);
                let h = h_m(&le, &lm, &eps, &[mq[0], mq[1], mq[2]]);
                for a in 0..3 {
                    for c in 0..3 {
                        reference[3 * tri[a] + c] += w * area * bary[a] * h[c];
                    }
                }
            }
        }
        let err = max_abs_diff(&load, &reference) / max_abs(&reference);
        assert!(err < 1e-10, "relative deviation {err:.3e}");
    }
}

#[test]
fn vertex_h_load_matches_nodal_chain() {
    let mut r = rng(8);
    let mesh = grid_mesh(4, 4, 0.2, &mut r);
    for _ in 0..5 {
        let m = random_magnetization(&mesh, &mut r);
        let u = random_interior_field(&mesh, FieldKind::Displacement, 0.1, &mut r);
        let (le, lm) = random_tensors(&mut r);
        let load = assemble_h_load(&mesh, &u, &m, &le, &lm, Quadrature::Vertex).unwrap();
        let mut reference = vec![0.0; 3 * mesh.n_nodes()];
        for e in 0..mesh.n_elements() {
            let area = mesh.signed_volume(e);
            let eps = strain(&mesh, &u, e);
            for &z in &mesh.triangle(e) {
                let h = h_m(&le, &lm, &eps, &m.vec3(z));
                for c in 0..3 {
                    reference[3 * z + c] += area / 3.0 * h[c];
                }
            }
        }
        assert!(max_abs_diff(&load, &reference) / max_abs(&reference) < 1e-12);
    }
}

#[test]
fn constant_state_h_load_hand_values() {
    let mesh = build_structured_mesh(1).unwrap();
    let le = Rank4Tensor::diagonal(2, 40.0, TensorLabel::Elastic).unwrap();
    let lm = Rank4Tensor::diagonal(2, 10.0, TensorLabel::Magnetic).unwrap();
    let m = NodalVectorField::constant(mesh.n_nodes(), FieldKind::Magnetization, &[0.6, 0.8, 0.0]).unwrap();
    let u = NodalVectorField::zeros(mesh.n_nodes(), 2, FieldKind::Displacement);
    for quadrature in [Quadrature::Vertex, Quadrature::Consistent] {
        let load = assemble_h_load(&mesh, &u, &m, &le, &lm, quadrature).unwrap();
        let w = magstrict::fem::lumped_weights(&mesh);
        for z in 0..mesh.n_nodes() {
            let expected = [-864.0 * w[z], -2048.0 * w[z], 0.0];
            for c in 0..3 {
                assert!((load[3 * z + c] - expected[c]).abs() < 1e-11, "{quadrature:?} node {z}");
            }
        }
    }
}

#[test]
fn elastic_rhs_matches_duffy_quadrature() {
    let mut r = rng(9);
    let mesh = build_structured_mesh(2).unwrap();
    let rule = duffy_rule(8);
    for _ in 0..5 {
        let (m, _) = smooth_fields(&mesh, &mut r);
        let (le, lm) = random_tensors(&mut r);
        for quadrature in [Quadrature::Vertex, Quadrature::Consistent] {
            let rhs = assemble_elastic_rhs(&mesh, &m, &le, &lm, quadrature).unwrap();
            let mut reference = vec![0.0; 2 * mesh.n_nodes()];
            for e in 0..mesh.n_elements() {
                let tri = mesh.triangle(e);
                let (g, area) = bary_gradients(&mesh, e);
                let vertex_stress: Vec<[[f64; 2]; 2]> =
                    tri.iter().map(|&z| magnetic_stress(&le, &lm, &m.vec3(z))).collect();
                for (bary, w) in &rule {
                    // vertex rule = exact integral of the nodal interpolant of λ^e ε^m(m)
                    let s = match quadrature {
                        Quadrature::Vertex => {
                            let mut s = [[0.0; 2]; 2];
                            for a in 0..3 {
                                for i in 0..2 {
                                    for j in 0..2 {
                                        s[i][j] += bary[a] * vertex_stress[a][i][j];
                                    }
                                }
                            }
                            s
                        }
                        Quadrature::Consistent => {
                            let mq = interp(&m, tri, bary);
                            magnetic_stress(&le, &lm, &[mq[0], mq[1], mq[2]])
                        }
                    };
                    for (b, &z) in tri.iter().enumerate() {
                        for i in 0..2 {
                            reference[2 * z + i] += w * area * (s[i][0] * g[b][0] + s[i][1] * g[b][1]);
                        }
                    }
                }
            }
            let err = max_abs_diff(&rhs, &reference) / max_abs(&reference);
            assert!(err < 1e-10, "{quadrature:?}: relative deviation {err:.3e}");
        }
    }
}

#[test]
fn elastic_rhs_constant_magnetization_is_exact() {
    let mesh = build_structured_mesh(2).unwrap();
    let le = Rank4Tensor::diagonal(2, 40.0, TensorLabel::Elastic).unwrap();
    let lm = Rank4Tensor::diagonal(2, 10.0, TensorLabel::Magnetic).unwrap();
    let m = NodalVectorField::constant(mesh.n_nodes(), FieldKind::Magnetization, &[0.6, 0.8, 0.0]).unwrap();
    let rhs = assemble_elastic_rhs(&mesh, &m, &le, &lm, Quadrature::Vertex).unwrap();
    // constant stress diag(144, 256) against ∇ψ: only boundary rows survive
    let s = [144.0, 256.0];
    let mut reference = vec![0.0; 2 * mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let (g, area) = bary_gradients(&mesh, e);
        for (b, &z) in mesh.triangle(e).iter().enumerate() {
            for i in 0..2 {
                reference[2 * z + i] += area * s[i] * g[b][i];
            }
        }
    }
    assert!(max_abs_diff(&rhs, &reference) < 1e-11);
    for z in (0..mesh.n_nodes()).filter(|&z| !mesh.is_boundary(z)) {
        assert!(rhs[2 * z].abs() < 1e-11 && rhs[2 * z + 1].abs() < 1e-11);
    }
}

#[test]
fn exchange_energy_matches_exact_gradient_integration() {
    let mesh = build_structured_mesh(4).unwrap();
    let m = NodalVectorField::magnetization(
        (0..mesh.n_nodes())
            .map(|i| {
                let x = std::f64::consts::PI * mesh.point(i)[0];
                [x.sin(), 0.0, x.cos()]
            })
            .collect(),
    )
    .unwrap();
    let mut reference = 0.0;
    for e in 0..mesh.n_elements() {
        let (g, area) = bary_gradients(&mesh, e);
        let tri = mesh.triangle(e);
        for c in 0..3 {
            let mut grad = [0.0; 2];
            for a in 0..3 {
                grad[0] += m.node(tri[a])[c] * g[a][0];
                grad[1] += m.node(tri[a])[c] * g[a][1];
            }
            reference += 0.5 * area * (grad[0] * grad[0] + grad[1] * grad[1]);
        }
    }
    let energy = compute_energy(&mesh, &m).unwrap();
    assert!((energy - reference).abs() <= 1e-12 * reference);
    // the interpolant underestimates ½‖∇m‖² = π²/2 only slightly on T_4
    assert!((energy - 0.5 * std::f64::consts::PI.powi(2)).abs() < 0.05);
}

#[test]
fn w1inf_single_element_tilt() {
    let mesh = Mesh::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0, 1, 2], vec![true; 3]).unwrap();
    // nodal interpolant of (x₁, 0, 1) / |(x₁, 0, 1)|
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let m = NodalVectorField::magnetization(vec![[0.0, 0.0, 1.0], [s, 0.0, s], [0.0, 0.0, 1.0]]).unwrap();
    // ∂₁m = (s, 0, s - 1), ∂₂m = 0
    let expected = (s * s + (s - 1.0) * (s - 1.0)).sqrt();
    assert!((compute_w1inf(&mesh, &m, GradientNorm::Frobenius) - expected).abs() < 1e-15);
    let row_sum = s.max(1.0 - s);
    assert!((compute_w1inf(&mesh, &m, GradientNorm::RowSum) - row_sum).abs() < 1e-15);
}
