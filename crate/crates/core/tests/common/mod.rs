//! Shared helpers for the integration tests: random meshes, states and
//! tensors, plus brute-force reference computations that do not go through
//! the library's assembly routines.

#![allow(dead_code)]

use magstrict::fem::{FieldKind, NodalVectorField};
use magstrict::material::{Rank4Tensor, TensorLabel};
use magstrict::mesh::Mesh;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `nx × ny` lattice on `[0, 1]²` with interior nodes jittered by up to
/// `jitter` grid spacings; diagonals alternate between squares.
pub fn grid_mesh(nx: usize, ny: usize, jitter: f64, rng: &mut impl Rng) -> Mesh {
    let (hx, hy) = (1.0 / (nx - 1) as f64, 1.0 / (ny - 1) as f64);
    let mut coords = Vec::new();
    let mut boundary = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let on_boundary = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
            let (mut x, mut y) = (i as f64 * hx, j as f64 * hy);
            if !on_boundary {
                x += jitter * hx * rng.gen_range(-1.0..1.0);
                y += jitter * hy * rng.gen_range(-1.0..1.0);
            }
            coords.extend([x, y]);
            boundary.push(on_boundary);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut elements = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                elements.extend([a, b, c, a, c, d]);
            } else {
                elements.extend([a, b, d, b, c, d]);
            }
        }
    }
    Mesh::new(2, coords, elements, boundary).expect("valid grid mesh")
}

/// Single triangle with all three nodes on the boundary.
pub fn three_node_mesh() -> Mesh {
    Mesh::new(2, vec![0.0, 0.0, 1.0, 0.1, 0.3, 0.8], vec![0, 1, 2], vec![true; 3]).unwrap()
}

pub fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub fn random_magnetization(mesh: &Mesh, rng: &mut impl Rng) -> NodalVectorField {
    NodalVectorField::magnetization((0..mesh.n_nodes()).map(|_| random_unit(rng)).collect()).unwrap()
}

/// Random `d = 2` field vanishing on boundary nodes.
pub fn random_interior_field(mesh: &Mesh, kind: FieldKind, scale: f64, rng: &mut impl Rng) -> NodalVectorField {
    let values = (0..mesh.n_nodes())
        .flat_map(|i| {
            let b = mesh.is_boundary(i);
            let (x, y) = (rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            if b { [0.0, 0.0] } else { [x, y] }
        })
        .collect();
    NodalVectorField::new(2, kind, values).unwrap()
}

/// Orthonormal basis of symmetric 2×2 matrices in Voigt-like order.
fn sym_basis() -> [[[f64; 2]; 2]; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]], [[0.0, s], [s, 0.0]]]
}

/// Random strictly positive tensor `Σ c_ab E_a ⊗ E_b` with SPD `c`.
pub fn random_tensor(label: TensorLabel, scale: f64, rng: &mut impl Rng) -> Rank4Tensor {
    let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
    let c = (b.transpose() * &b + DMatrix::identity(3, 3) * 0.5) * scale;
    let e = sym_basis();
    Rank4Tensor::from_fn(2, label, |i, j, p, q| {
        let mut acc = 0.0;
        for a in 0..3 {
            for bb in 0..3 {
                acc += c[(a, bb)] * e[a][i][j] * e[bb][p][q];
            }
        }
        acc
    })
    .unwrap()
}

/// Barycentric gradients and area from the edge-normal formula
/// `∇λ_a = n_a / (2|K|)` with `n_a` the inward-rotated opposite edge.
pub fn bary_gradients(mesh: &Mesh, e: usize) -> ([[f64; 2]; 3], f64) {
    let tri = mesh.triangle(e);
    let p: Vec<[f64; 2]> = tri.iter().map(|&n| mesh.point(n)).collect();
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        // rotate edge b→c by -90° and scale
        g[a] = [(b[1] - c[1]) / area2, (c[0] - b[0]) / area2];
    }
    (g, 0.5 * area2)
}

/// Gauss-Legendre nodes and weights on `[0, 1]` via Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Collapsed-coordinate (Duffy) rule on the reference triangle: barycentric
/// points and weights summing to 1.
pub fn duffy_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let gl = gauss_legendre(n);
    let mut rule = Vec::with_capacity(n * n);
    for &(s, ws) in &gl {
        for &(t, wt) in &gl {
            let (x, y) = (s, t * (1.0 - s));
            rule.push(([1.0 - x - y, x, y], 2.0 * ws * wt * (1.0 - s)));
        }
    }
    rule
}

/// Element strain from the independent barycentric gradients.
pub fn strain(mesh: &Mesh, u: &NodalVectorField, e: usize) -> [[f64; 2]; 2] {
    let (g, _) = bary_gradients(mesh, e);
    let mut grad = [[0.0; 2]; 2];
    for (a, &n) in mesh.triangle(e).iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                grad[i][j] += u.node(n)[i] * g[a][j];
            }
        }
    }
    [[grad[0][0], 0.5 * (grad[0][1] + grad[1][0])], [0.5 * (grad[0][1] + grad[1][0]), grad[1][1]]]
}

/// `λ^e ε^m(m)` by explicit index loops.
pub fn magnetic_stress(le: &Rank4Tensor, lm: &Rank4Tensor, m: &[f64; 3]) -> [[f64; 2]; 2] {
    let mut em = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    em[i][j] += lm.get(i, j, p, q) * m[p] * m[q];
                }
            }
        }
    }
    let mut s = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    s[i][j] += le.get(i, j, p, q) * em[p][q];
                }
            }
        }
    }
    s
}

/// `h_m(ε, m)` by explicit index loops.
pub fn h_m(le: &Rank4Tensor, lm: &Rank4Tensor, eps: &[[f64; 2]; 2], m: &[f64; 3]) -> [f64; 3] {
    let ms = magnetic_stress(le, lm, m);
    let mut sigma = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    sigma[i][j] += le.get(i, j, p, q) * eps[p][q];
                }
            }
            sigma[i][j] -= ms[i][j];
        }
    }
    let mut h = [0.0; 3];
    for (q, hq) in h.iter_mut().enumerate().take(2) {
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    *hq += lm.get(i, j, p, q) * sigma[i][j] * m[p];
                }
            }
        }
    }
    h
}

pub fn interp(field: &NodalVectorField, tri: [usize; 3], bary: &[f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; field.n_comp()];
    for (a, &n) in tri.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += bary[a] * field.node(n)[c];
        }
    }
    out
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Dense scalar P1 stiffness and (lumped or consistent) mass, assembled
/// with Duffy quadrature and the independent gradients.
pub fn dense_scalar_operators(mesh: &Mesh, lumped: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = mesh.n_nodes();
    let rule = duffy_rule(4);
    let mut k = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for e in 0..mesh.n_elements() {
        let (g, area) = bary_gradients(mesh, e);
        let tri = mesh.triangle(e);
        for a in 0..3 {
            for b in 0..3 {
                k[(tri[a], tri[b])] += area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                let mab: f64 = rule.iter().map(|(l, w)| w * l[a] * l[b]).sum::<f64>() * area;
                if lumped {
                    m[(tri[a], tri[a])] += mab;
                } else {
                    m[(tri[a], tri[b])] += mab;
                }
            }
        }
    }
    (k, m)
}

/// Replicates a scalar dense operator over three interleaved components.
pub fn replicate3(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    DMatrix::from_fn(3 * n, 3 * n, |i, j| if i % 3 == j % 3 { s[(i / 3, j / 3)] } else { 0.0 })
}

/// Dense `((m × v), φ)` matrix; lumped uses node-local blocks, consistent
/// integrates the trilinear form by Duffy quadrature.
pub fn dense_skew(mesh: &Mesh, m: &NodalVectorField, lumped: bool) -> DMatrix<f64> {
    let n = mesh.n_nodes();
    let mut s = DMatrix::zeros(3 * n, 3 * n);
    let rule = duffy_rule(4);
    for e in 0..mesh.n_elements() {
        let area = mesh.signed_volume(e);
        let tri = mesh.triangle(e);
        for (bary, w) in &rule {
            let mq = interp(m, tri, bary);
            let mq = [mq[0], mq[1], mq[2]];
            for a in 0..3 {
                for b in 0..3 {
                    if lumped && a != b {
                        continue;
                    }
                    let weight = if lumped { w * area * bary[a] } else { w * area * bary[a] * bary[b] };
                    let mv = if lumped { m.vec3(tri[a]) } else { mq };
                    for c in 0..3 {
                        let mut unit = [0.0; 3];
                        unit[c] = 1.0;
                        let col = cross(mv, unit);
                        for r in 0..3 {
                            s[(3 * tri[a] + r, 3 * tri[b] + c)] += weight * col[r];
                        }
                    }
                }
            }
        }
    }
    s
}

/// Dense velocity of the tangent-plane step from an LU solve of the full
/// saddle system `[A Bᵀ; B 0]`, with `A` and the right-hand side assembled
/// here without the library's assembly routines. Lumped or consistent
/// mass, and vertex or Duffy quadrature for `h_m`, as requested.
pub struct DenseStep {
    pub alpha: f64,
    pub theta: f64,
    pub c_exch: f64,
    pub k: f64,
    pub lumped: bool,
    pub vertex_h: bool,
}

impl DenseStep {
    pub fn velocity(
        &self,
        mesh: &Mesh,
        m: &NodalVectorField,
        u: &NodalVectorField,
        le: &Rank4Tensor,
        lm: &Rank4Tensor,
        pi: &dyn Fn([f64; 3]) -> [f64; 3],
    ) -> Vec<f64> {
        let n = mesh.n_nodes();
        let (ks, ms) = dense_scalar_operators(mesh, self.lumped);
        let (k3, m3) = (replicate3(&ks), replicate3(&ms));
        let a = &m3 * self.alpha + dense_skew(mesh, m, self.lumped) + &k3 * (self.theta * self.k * self.c_exch);
        let mvec = DVector::from_column_slice(m.values());
        let mut rhs = -(&k3 * &mvec) * self.c_exch;
        let rule = duffy_rule(6);
        for e in 0..mesh.n_elements() {
            let area = mesh.signed_volume(e);
            let eps = strain(mesh, u, e);
            let tri = mesh.triangle(e);
            if self.vertex_h {
                for &z in &tri {
                    let h = h_m(le, lm, &eps, &m.vec3(z));
                    for c in 0..3 {
                        rhs[3 * z + c] += area / 3.0 * h[c];
                    }
                }
            } else {
                for (bary, w) in &rule {
                    let mq = interp(m, tri, bary);
                    let h = h_m(le, lm, &eps, &[mq[0], mq[1], mq[2]]);
                    for a in 0..3 {
                        for c in 0..3 {
                            rhs[3 * tri[a] + c] += w * area * bary[a] * h[c];
                        }
                    }
                }
            }
        }
        let pis: Vec<f64> = (0..n).flat_map(|z| pi(m.vec3(z))).collect();
        rhs -= &m3 * DVector::from_vec(pis);

        let mut kkt = DMatrix::zeros(4 * n, 4 * n);
        kkt.view_mut((0, 0), (3 * n, 3 * n)).copy_from(&a);
        for z in 0..n {
            let mz = m.vec3(z);
            for c in 0..3 {
                kkt[(3 * z + c, 3 * n + z)] = mz[c];
                kkt[(3 * n + z, 3 * z + c)] = mz[c];
            }
        }
        let mut full = DVector::zeros(4 * n);
        full.rows_mut(0, 3 * n).copy_from(&rhs);
        let x = kkt.lu().solve(&full).expect("saddle system is nonsingular");
        x.rows(0, 3 * n).iter().copied().collect()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
