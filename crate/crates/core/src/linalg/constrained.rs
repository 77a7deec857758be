//! Linear solves in the discrete tangent space `{v : v(z)·m(z) = 0 at every node}`.
//!
//! Unknowns are interleaved per node (`3z + c`). The primary path eliminates
//! the constraint with a per-node orthonormal tangent basis and solves the
//! reduced `2N × 2N` system with BiCGStab. The Lagrange-multiplier saddle form
//! is kept as an independent validation path.

use super::{krylov, norm2, CooMatrix, CsrMatrix, SolveStats, SolverConfig, SolverError};

/// Allowed deviation of a constraint vector from unit length.
pub const CONSTRAINT_UNIT_TOL: f64 = 1e-10;

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Orthonormal basis `{t1, t2}` of the plane orthogonal to each `m(z)`.
///
/// `t1` is the normalized cross product of `m` with the coordinate axis least
/// aligned with it, `t2 = m × t1`.
pub fn tangent_basis(m: &[[f64; 3]]) -> Result<Vec<[[f64; 3]; 2]>, SolverError> {
    m.iter()
        .enumerate()
        .map(|(node, &mz)| {
            let norm = norm2(&mz);
            if (norm - 1.0).abs() > CONSTRAINT_UNIT_TOL {
                return Err(SolverError::ConstraintNotUnit { node, norm });
            }
            let k = (0..3)
                .min_by(|&a, &b| mz[a].abs().total_cmp(&mz[b].abs()))
                .expect("three components");
            let mut axis = [0.0; 3];
            axis[k] = 1.0;
            let c = cross(mz, axis);
            let cn = norm2(&c);
            let t1 = [c[0] / cn, c[1] / cn, c[2] / cn];
            Ok([t1, cross(mz, t1)])
        })
        .collect()
}

/// `Qᵀ A Q` for the block-diagonal tangent basis `Q` (3N × 2N).
pub(crate) fn project_to_tangent(a: &CsrMatrix, basis: &[[[f64; 3]; 2]]) -> CsrMatrix {
    let n = basis.len();
    let mut slot = vec![usize::MAX; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut blocks: Vec<[[f64; 3]; 3]> = Vec::new();
    let mut row_ptr = Vec::with_capacity(2 * n + 1);
    let mut col_idx = Vec::with_capacity(4 * a.nnz() / 9 + 4);
    let mut values = Vec::with_capacity(4 * a.nnz() / 9 + 4);
    row_ptr.push(0);
    let mut second_cols: Vec<usize> = Vec::new();
    let mut second_vals: Vec<f64> = Vec::new();

    for z in 0..n {
        for c in 0..3 {
            for (col, val) in a.row(3 * z + c) {
                let y = col / 3;
                if slot[y] == usize::MAX {
                    slot[y] = blocks.len();
                    blocks.push([[0.0; 3]; 3]);
                    touched.push(y);
                }
                blocks[slot[y]][c][col % 3] += val;
            }
        }
        touched.sort_unstable();
        let tz = &basis[z];
        second_cols.clear();
        second_vals.clear();
        for &y in &touched {
            let blk = &blocks[slot[y]];
            let ty = &basis[y];
            for (a_row, ta) in tz.iter().enumerate() {
                for (b_col, tb) in ty.iter().enumerate() {
                    let mut acc = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            acc += ta[i] * blk[i][j] * tb[j];
                        }
                    }
                    if a_row == 0 {
                        col_idx.push(2 * y + b_col);
                        values.push(acc);
                    } else {
                        second_cols.push(2 * y + b_col);
                        second_vals.push(acc);
                    }
                }
            }
        }
        row_ptr.push(col_idx.len());
        col_idx.extend_from_slice(&second_cols);
        values.extend_from_slice(&second_vals);
        row_ptr.push(col_idx.len());
        for &y in &touched {
            slot[y] = usize::MAX;
        }
        touched.clear();
        blocks.clear();
    }
    CsrMatrix::try_from_parts(2 * n, 2 * n, row_ptr, col_idx, values).expect("projected pattern is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution {
    /// Solution, 3 interleaved components per node, tangent at every node.
    pub v: Vec<f64>,
    pub stats: SolveStats,
}

fn check_dims(a: &CsrMatrix, b: &[f64], m: &[[f64; 3]]) -> Result<(), SolverError> {
    let n3 = 3 * m.len();
    if a.n_rows() != n3 || a.n_cols() != n3 || b.len() != n3 {
        return Err(SolverError::DimensionMismatch(format!(
            "constrained system over {} nodes needs a {n3}x{n3} matrix and length-{n3} right-hand side",
            m.len()
        )));
    }
    Ok(())
}

/// Finds `v` with `A v + Bᵀλ = b`, `B v = 0`, where row `z` of `B` is `m(z)ᵀ`
/// acting on the three components at node `z`.
pub fn solve_constrained(
    a: &CsrMatrix,
    b: &[f64],
    m: &[[f64; 3]],
    cfg: &SolverConfig,
) -> Result<ConstrainedSolution, SolverError> {
    cfg.validate()?;
    check_dims(a, b, m)?;
    let basis = tangent_basis(m)?;
    let reduced = project_to_tangent(a, &basis);
    let mut rhs = vec![0.0; 2 * m.len()];
    for (z, t) in basis.iter().enumerate() {
        let bz = &b[3 * z..3 * z + 3];
        rhs[2 * z] = t[0][0] * bz[0] + t[0][1] * bz[1] + t[0][2] * bz[2];
        rhs[2 * z + 1] = t[1][0] * bz[0] + t[1][1] * bz[1] + t[1][2] * bz[2];
    }
    let (w, stats) = krylov::solve_bicgstab(&reduced, &rhs, None, cfg)?;
    let mut v = vec![0.0; 3 * m.len()];
    for (z, t) in basis.iter().enumerate() {
        for c in 0..3 {
            v[3 * z + c] = w[2 * z] * t[0][c] + w[2 * z + 1] * t[1][c];
        }
    }
    Ok(ConstrainedSolution { v, stats })
}

/// The `4N × 4N` saddle-point matrix `[A Bᵀ; B 0]`.
pub fn saddle_system(a: &CsrMatrix, m: &[[f64; 3]]) -> Result<CsrMatrix, SolverError> {
    check_dims(a, &vec![0.0; a.n_rows()], m)?;
    let n = m.len();
    let mut coo = CooMatrix::with_capacity(4 * n, 4 * n, a.nnz() + 6 * n);
    for i in 0..3 * n {
        for (j, v) in a.row(i) {
            coo.push(i, j, v);
        }
    }
    for (z, mz) in m.iter().enumerate() {
        for c in 0..3 {
            coo.push(3 * z + c, 3 * n + z, mz[c]);
            coo.push(3 * n + z, 3 * z + c, mz[c]);
        }
    }
    Ok(coo.to_csr())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSolution {
    pub v: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub stats: SolveStats,
}

/// Validation path: solves the full saddle system with GMRES.
pub fn solve_constrained_multiplier(
    a: &CsrMatrix,
    b: &[f64],
    m: &[[f64; 3]],
    cfg: &SolverConfig,
) -> Result<MultiplierSolution, SolverError> {
    cfg.validate()?;
    check_dims(a, b, m)?;
    tangent_basis(m)?;
    let n = m.len();
    let k = saddle_system(a, m)?;
    let mut rhs = b.to_vec();
    rhs.resize(4 * n, 0.0);
    let (x, stats) = krylov::solve_gmres(&k, &rhs, (4 * n).min(400), cfg)?;
    Ok(MultiplierSolution { v: x[..3 * n].to_vec(), multipliers: x[3 * n..].to_vec(), stats })
}
