//! Linear solvers: (preconditioned) conjugate gradients and geometric
//! multigrid with vertical-line smoothers.

mod cg;
mod multigrid;
mod smoother;

pub use cg::{cg_solve, cg_solve_with, pcg_run, pcg_solve, CgOptions, CgResult, Preconditioner};
pub use multigrid::{
    build_hierarchy, contraction_factor, interval_prolongation, line_norms, line_stability_constants, mg_solve,
    tensor_prolongation, vcycle, y_prolongation, HierarchyConfig, Level, LineNorms, MeshHierarchy, MgResult,
    MG_MAX_CYCLES,
};
pub use smoother::{LineSmoother, SweepOrder, SymmetricLineGs};

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `b − A x`.
pub fn residual(a: &crate::sparse::CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    r
}

/// Solve a cylinder system (line-major numbering, lines of `line_len`
/// unknowns) by conjugate gradients preconditioned with one symmetric
/// line Gauss–Seidel sweep. Stops at `‖r‖ < rel_tol·‖b‖` or at the rounding
/// level of the matrix.
pub fn solve_cylinder(
    a: &crate::sparse::CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    line_len: usize,
    rel_tol: f64,
) -> crate::Result<CgResult> {
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(CgResult {
            x: vec![0.0; b.len()],
            iterations: 0,
            residual: 0.0,
        });
    }
    let smoother = LineSmoother::new(a, line_len)?;
    let pre = SymmetricLineGs {
        matrix: a,
        smoother: &smoother,
    };
    pcg_solve(
        a,
        b,
        x0,
        &pre,
        CgOptions {
            tol: rel_tol * bn,
            max_iter: 50_000,
            backward: 1e-15,
            ..CgOptions::default()
        },
    )
}
