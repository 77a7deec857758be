//! Krylov iterations with diagonal (Jacobi) scaling.
//!
//! Every solver reports convergence against the true residual
//! `‖b - A x‖ ≤ tol_rel · ‖b‖`; when the recurrence residual drifts from it
//! the iteration restarts from the true residual.

use super::{dot, norm2, CsrMatrix, SolverConfig, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual `‖b - A x‖ / ‖b‖`.
    pub residual: f64,
}

fn check_square(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<(), SolverError> {
    if a.n_rows() != a.n_cols() || a.n_rows() != b.len() || x0.is_some_and(|x| x.len() != b.len()) {
        return Err(SolverError::DimensionMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    Ok(())
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal().into_iter().map(|d| if d > 0.0 && d.is_finite() { 1.0 / d } else { 1.0 }).collect()
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.spmv_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Preconditioned conjugate gradients for symmetric positive-definite `a`.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    cfg.validate()?;
    check_square(a, b, x0)?;
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats::default()));
    }
    let target = cfg.tol_rel * b_norm;
    let cap = cfg.iteration_cap(n);
    let dinv = jacobi(a);

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let mut res = true_residual(a, b, &x, &mut r);
    if res <= target {
        return Ok((x, SolveStats { iterations: 0, residual: res / b_norm }));
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=cap {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() {
            return Err(SolverError::NotANumber { iterations: it });
        }
        if pap <= 0.0 {
            return Err(SolverError::Breakdown { iterations: it });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res = norm2(&r);
        if res.is_nan() {
            return Err(SolverError::NotANumber { iterations: it });
        }
        if res <= target {
            res = true_residual(a, b, &x, &mut r);
            if res <= target {
                return Ok((x, SolveStats { iterations: it, residual: res / b_norm }));
            }
            // recurrence drifted; restart the search directions
            z.iter_mut().zip(&r).zip(&dinv).for_each(|((zi, ri), di)| *zi = ri * di);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        z.iter_mut().zip(&r).zip(&dinv).for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    let res = true_residual(a, b, &x, &mut r);
    Err(SolverError::NotConverged { iterations: cap, residual: res / b_norm })
}

/// Right-preconditioned BiCGStab for nonsymmetric systems.
pub fn solve_bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    cfg.validate()?;
    check_square(a, b, x0)?;
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats::default()));
    }
    let target = cfg.tol_rel * b_norm;
    let cap = cfg.iteration_cap(n);
    let dinv = jacobi(a);

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let mut res = true_residual(a, b, &x, &mut r);
    if res <= target {
        return Ok((x, SolveStats { iterations: 0, residual: res / b_norm }));
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut t = vec![0.0; n];

    let mut it = 0;
    while it < cap {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.is_nan() {
            return Err(SolverError::NotANumber { iterations: it });
        }
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // shadow residual became orthogonal; restart with the current residual
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            if dot(&r_hat, &r) == 0.0 {
                return Err(SolverError::Breakdown { iterations: it });
            }
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = dinv[i] * p[i];
        }
        a.spmv_into(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            return Err(SolverError::Breakdown { iterations: it });
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= target {
            axpy(alpha, &y, &mut x);
            res = true_residual(a, b, &x, &mut r);
            if res <= target {
                return Ok((x, SolveStats { iterations: it, residual: res / b_norm }));
            }
            omega = 0.0;
            continue;
        }
        for i in 0..n {
            zz[i] = dinv[i] * s[i];
        }
        a.spmv_into(&zz, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zz[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r);
        if res.is_nan() {
            return Err(SolverError::NotANumber { iterations: it });
        }
        if res <= target {
            res = true_residual(a, b, &x, &mut r);
            if res <= target {
                return Ok((x, SolveStats { iterations: it, residual: res / b_norm }));
            }
            omega = 0.0;
        }
    }
    let res = true_residual(a, b, &x, &mut r);
    Err(SolverError::NotConverged { iterations: cap, residual: res / b_norm })
}

/// Restarted GMRES without preconditioning; applicable to indefinite
/// systems such as the saddle-point form of the tangent-space constraint.
pub fn solve_gmres(
    a: &CsrMatrix,
    b: &[f64],
    restart: usize,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    cfg.validate()?;
    check_square(a, b, None)?;
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats::default()));
    }
    let m = restart.clamp(1, n);
    let target = cfg.tol_rel * b_norm;
    let cap = cfg.iteration_cap(n);
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut total = 0;

    loop {
        let beta = true_residual(a, b, &x, &mut r);
        if beta.is_nan() {
            return Err(SolverError::NotANumber { iterations: total });
        }
        if beta <= target {
            return Ok((x, SolveStats { iterations: total, residual: beta / b_norm }));
        }
        if total >= cap {
            return Err(SolverError::NotConverged { iterations: total, residual: beta / b_norm });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            total += 1;
            let mut w = vec![0.0; n];
            a.spmv_into(&basis[j], &mut w);
            // modified Gram-Schmidt
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(&w, q);
                hess[i][j] = hij;
                axpy(-hij, q, &mut w);
            }
            let wn = norm2(&w);
            hess[j + 1][j] = wn;
            for i in 0..j {
                let tmp = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = tmp;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            if denom == 0.0 {
                return Err(SolverError::Breakdown { iterations: total });
            }
            cs[j] = hess[j][j] / denom;
            sn[j] = hess[j + 1][j] / denom;
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            if g[j + 1].abs() <= target || wn == 0.0 || total >= cap {
                break;
            }
            basis.push(w.iter().map(|wi| wi / wn).collect());
        }
        // back substitution on the triangularized Hessenberg system
        let mut yv = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for l in i + 1..k_used {
                acc -= hess[i][l] * yv[l];
            }
            yv[i] = acc / hess[i][i];
        }
        for (l, yl) in yv.iter().enumerate() {
            axpy(*yl, &basis[l], &mut x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CooMatrix;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, 2.0);
            if i > 0 {
                coo.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                coo.push(i, i + 1, -1.0);
            }
        }
        coo.to_csr()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn cg_identity_one_iteration() {
        let b = [3.0, -1.0, 0.5, 7.0];
        let (x, stats) = solve_spd(&CsrMatrix::identity(4), &b, None, &SolverConfig::default()).unwrap();
        assert_eq!(x, b.to_vec());
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn cg_diagonal() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 4.0]);
        let (x, _) = solve_spd(&a, &[1.0, 2.0, 4.0], None, &SolverConfig::default()).unwrap();
        assert!(close(&x, &[1.0, 1.0, 1.0], 1e-14));
    }

    #[test]
    fn cg_laplacian() {
        let (x, stats) = solve_spd(&tridiag(3), &[1.0, 0.0, 0.0], None, &SolverConfig::default()).unwrap();
        assert!(close(&x, &[0.75, 0.5, 0.25], 1e-12), "{x:?}");
        assert!(stats.residual <= 1e-10);
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let cfg = SolverConfig { tol_rel: 1e-14, max_iter: Some(2) };
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        match solve_spd(&tridiag(50), &b, None, &cfg) {
            Err(SolverError::NotConverged { iterations: 2, residual }) => assert!(residual > 1e-14),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cg_detects_nan() {
        let b = [1.0, f64::NAN];
        assert!(matches!(
            solve_spd(&CsrMatrix::identity(2), &b, None, &SolverConfig::default()),
            Err(SolverError::NotANumber { .. })
        ));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SolverConfig { tol_rel: 0.0, max_iter: None };
        assert!(matches!(
            solve_spd(&CsrMatrix::identity(1), &[1.0], None, &cfg),
            Err(SolverError::InvalidConfig(_))
        ));
    }

    #[test]
    fn bicgstab_nonsymmetric() {
        let n = 40;
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, 3.0);
            if i + 1 < n {
                coo.push(i, i + 1, 1.0);
                coo.push(i + 1, i, -1.0);
            }
        }
        let a = coo.to_csr();
        let x_true: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let b = a.spmv(&x_true).unwrap();
        let (x, stats) = solve_bicgstab(&a, &b, None, &SolverConfig::default()).unwrap();
        assert!(close(&x, &x_true, 1e-9));
        assert!(stats.residual <= 1e-10);
    }

    #[test]
    fn gmres_indefinite() {
        // [[1, 1], [1, 0]] is symmetric indefinite
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(0, 1, 1.0);
        coo.push(1, 0, 1.0);
        let a = coo.to_csr();
        let (x, _) = solve_gmres(&a, &[3.0, 1.0], 10, &SolverConfig::default()).unwrap();
        assert!(close(&x, &[1.0, 2.0], 1e-12));
    }

    #[test]
    fn gmres_with_restarts() {
        let a = tridiag(30);
        let b: Vec<f64> = (0..30).map(|i| 1.0 + i as f64).collect();
        let (x, _) = solve_gmres(&a, &b, 5, &SolverConfig { tol_rel: 1e-10, max_iter: Some(5000) }).unwrap();
        let r = a.spmv(&x).unwrap();
        assert!(close(&r, &b, 1e-7));
    }
}
