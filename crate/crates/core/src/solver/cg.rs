use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::sparse::CsrMatrix;

/// `z = B r` for a symmetric positive definite approximation `B ≈ A^{-1}`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// No preconditioning.
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Stop once `‖b − Ax‖₂ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Exec,
    /// Also stop once `‖b − Ax‖₂ ≤ backward · ‖A‖_∞ ‖x‖₂`, the level below
    /// which rounding dominates. Zero disables the test.
    pub backward: f64,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            exec: Exec::default(),
            backward: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients from a zero initial guess.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgResult> {
    cg_solve_with(
        a,
        b,
        CgOptions {
            tol,
            max_iter,
            ..CgOptions::default()
        },
    )
}

pub fn cg_solve_with(a: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<CgResult> {
    pcg_solve(a, b, None, &Identity, opts)
}

/// Preconditioned conjugate gradients.
///
/// The recursively updated residual drives the iteration; when it passes the
/// tolerance the true residual is recomputed, and the iteration restarts from
/// it if rounding has let the two drift apart.
pub fn pcg_solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &dyn Preconditioner,
    opts: CgOptions,
) -> Result<CgResult> {
    let (result, converged) = pcg_run(a, b, x0, precond, opts)?;
    if converged {
        Ok(result)
    } else {
        Err(Error::NotConverged {
            iterations: result.iterations,
            residual: result.residual,
        })
    }
}

/// Like [`pcg_solve`] but returns the last iterate when the iteration limit is
/// hit, with a flag telling whether the tolerance was met.
pub fn pcg_run(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &dyn Preconditioner,
    opts: CgOptions,
) -> Result<(CgResult, bool)> {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    let exec = opts.exec;
    let dot = |u: &[f64], v: &[f64]| exec.sum(n, |i| u[i] * v[i]);

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut ax = vec![0.0; n];
    let mut r = b.to_vec();
    if x0.is_some() {
        a.mul_vec_into(&x, &mut ax, exec);
        r.iter_mut().zip(&ax).for_each(|(ri, ai)| *ri -= ai);
    }
    let anorm = if opts.backward > 0.0 { a.norm_inf() } else { 0.0 };
    let done =
        |rnorm: f64, x: &[f64]| rnorm < opts.tol || (anorm > 0.0 && rnorm <= opts.backward * anorm * dot(x, x).sqrt());
    let mut rnorm = dot(&r, &r).sqrt();
    if done(rnorm, &x) {
        return Ok((
            CgResult {
                x,
                iterations: 0,
                residual: rnorm,
            },
            true,
        ));
    }
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut restart = true;
    let mut rz = 0.0;
    while iterations < opts.max_iter {
        if restart {
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            restart = false;
        }
        a.mul_vec_into(&p, &mut ap, exec);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) {
            return Err(Error::Indefinite {
                iteration: iterations,
                curvature: curv,
            });
        }
        let step = rz / curv;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= step * api);
        iterations += 1;
        rnorm = dot(&r, &r).sqrt();
        if done(rnorm, &x) {
            a.mul_vec_into(&x, &mut ax, exec);
            r.iter_mut()
                .zip(b.iter().zip(&ax))
                .for_each(|(ri, (bi, ai))| *ri = bi - ai);
            rnorm = dot(&r, &r).sqrt();
            if done(rnorm, &x) {
                return Ok((
                    CgResult {
                        x,
                        iterations,
                        residual: rnorm,
                    },
                    true,
                ));
            }
            restart = true;
            continue;
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    a.mul_vec_into(&x, &mut ax, exec);
    let true_res = exec.sum(n, |i| (b[i] - ax[i]).powi(2)).sqrt();
    Ok((
        CgResult {
            x,
            iterations,
            residual: true_res,
        },
        false,
    ))
}
