use crate::assembly::assemble_stiffness;
use crate::error::{invalid, Error, Result};
use crate::mesh::{build_tensor, graded_points, uniform_base, BaseMesh, IntervalMesh, TensorMesh};
use crate::solver::cg::{pcg_run, CgOptions, Preconditioner};
use crate::solver::smoother::{LineSmoother, SweepOrder};
use crate::solver::{norm2, residual};
use crate::sparse::{symmetric_eigen, Cholesky, CsrMatrix};

/// Nested hierarchy: level `k` has `2^k` times the coarse resolution in `x'`
/// and in the reference coordinate `ŷ`, mapped by `y = Y ŷ^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyConfig {
    pub dim: usize,
    pub coarse_cells: usize,
    pub coarse_m: usize,
    /// Number of refinements `J` (levels `0..=J`).
    pub levels: usize,
    pub grading: f64,
    pub height: f64,
    pub alpha: f64,
    /// Pre- and post-smoothing steps `m`.
    pub smoothing_steps: usize,
    /// Block the smoother over vertical lines (`false`: point Gauss–Seidel).
    pub line_smoother: bool,
}

#[derive(Debug, Clone)]
pub struct Level {
    pub mesh: TensorMesh,
    pub matrix: CsrMatrix,
    pub smoother: LineSmoother,
    /// Interpolation from the next coarser level (absent on level 0).
    pub prolongation: Option<CsrMatrix>,
}

#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<Level>,
    coarse: Cholesky,
    smoothing_steps: usize,
}

impl MeshHierarchy {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn finest(&self) -> &Level {
        self.levels.last().expect("hierarchy has a level")
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn smoothing_steps(&self) -> usize {
        self.smoothing_steps
    }
}

/// Linear interpolation between nested interval meshes, over interior vertices
/// (rows: fine, columns: coarse).
pub fn interval_prolongation(coarse: &IntervalMesh, fine: &IntervalMesh) -> Result<CsrMatrix> {
    let cv = coarse.vertices();
    let fv = fine.vertices();
    let nc = cv.len() - 2;
    let nf = fv.len() - 2;
    let mut t = Vec::new();
    for (r, &x) in fv[1..fv.len() - 1].iter().enumerate() {
        let cell = cv.partition_point(|&v| v <= x).saturating_sub(1).min(cv.len() - 2);
        let (a, b) = (cv[cell], cv[cell + 1]);
        let w = (x - a) / (b - a);
        if !(-1e-12..=1.0 + 1e-12).contains(&w) {
            return invalid("interval meshes are not nested");
        }
        for (v, wt) in [(cell, 1.0 - w), (cell + 1, w)] {
            if wt != 0.0 && v != 0 && v != cv.len() - 1 {
                t.push((r, v - 1, wt));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(nf, nc, t))
}

/// Linear interpolation in `y` between nested partitions of `[0, Y]`, over the
/// free nodes (the top node is Dirichlet).
pub fn y_prolongation(coarse: &[f64], fine: &[f64]) -> Result<CsrMatrix> {
    let mc = coarse.len() - 1;
    let mf = fine.len() - 1;
    let mut t = Vec::new();
    for (r, &y) in fine[..mf].iter().enumerate() {
        let cell = coarse.partition_point(|&v| v <= y).saturating_sub(1).min(mc - 1);
        let (a, b) = (coarse[cell], coarse[cell + 1]);
        let w = (y - a) / (b - a);
        if !(-1e-12..=1.0 + 1e-12).contains(&w) {
            return invalid("interval partitions are not nested");
        }
        for (v, wt) in [(cell, 1.0 - w), (cell + 1, w)] {
            if wt != 0.0 && v < mc {
                t.push((r, v, wt));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mf, mc, t))
}

fn base_prolongation(coarse: &BaseMesh, fine: &BaseMesh) -> Result<CsrMatrix> {
    match (coarse, fine) {
        (BaseMesh::Interval(c), BaseMesh::Interval(f)) => interval_prolongation(c, f),
        (BaseMesh::Square { x: cx, y: cy }, BaseMesh::Square { x: fx, y: fy }) => Ok(CsrMatrix::kron(
            &interval_prolongation(cy, fy)?,
            &interval_prolongation(cx, fx)?,
        )),
        _ => invalid("base meshes of different dimension"),
    }
}

/// Prolongation between two nested cylinder meshes.
pub fn tensor_prolongation(coarse: &TensorMesh, fine: &TensorMesh) -> Result<CsrMatrix> {
    Ok(CsrMatrix::kron(
        &base_prolongation(coarse.base(), fine.base())?,
        &y_prolongation(coarse.interval().points(), fine.interval().points())?,
    ))
}

pub fn build_hierarchy(cfg: &HierarchyConfig) -> Result<MeshHierarchy> {
    if cfg.coarse_cells < 2 {
        return invalid("coarse base mesh needs at least two cells per side");
    }
    if cfg.coarse_m == 0 || cfg.smoothing_steps == 0 {
        return invalid("coarse M and smoothing steps must be positive");
    }
    let mut levels: Vec<Level> = Vec::with_capacity(cfg.levels + 1);
    for k in 0..=cfg.levels {
        let f = 1usize << k;
        let mesh = build_tensor(
            uniform_base(cfg.dim, cfg.coarse_cells * f)?,
            graded_points(cfg.coarse_m * f, cfg.grading, cfg.height)?,
        );
        let matrix = assemble_stiffness(&mesh, cfg.alpha)?;
        let line = if cfg.line_smoother { mesh.m() } else { 1 };
        let smoother = LineSmoother::new(&matrix, line)?;
        let prolongation = match levels.last() {
            Some(prev) => Some(tensor_prolongation(&prev.mesh, &mesh)?),
            None => None,
        };
        levels.push(Level {
            mesh,
            matrix,
            smoother,
            prolongation,
        });
    }
    let coarse = Cholesky::factor(&levels[0].matrix.to_dense())?;
    Ok(MeshHierarchy {
        levels,
        coarse,
        smoothing_steps: cfg.smoothing_steps,
    })
}

/// One symmetric V-cycle on the finest level, updating `x` in place.
pub fn vcycle(h: &MeshHierarchy, x: &mut [f64], b: &[f64]) {
    vcycle_level(h, h.levels.len() - 1, x, b);
}

fn vcycle_level(h: &MeshHierarchy, k: usize, x: &mut [f64], b: &[f64]) {
    if k == 0 {
        // x ← x + A₀⁻¹(b − A₀x) is the exact solve
        x.copy_from_slice(&h.coarse.solve(b));
        return;
    }
    let lvl = &h.levels[k];
    for _ in 0..h.smoothing_steps {
        lvl.smoother.sweep(&lvl.matrix, x, b, SweepOrder::Forward);
    }
    let p = lvl.prolongation.as_ref().expect("fine levels carry a prolongation");
    let r = residual(&lvl.matrix, x, b);
    let rc = p.transpose().mul_vec(&r);
    let mut ec = vec![0.0; rc.len()];
    vcycle_level(h, k - 1, &mut ec, &rc);
    let e = p.mul_vec(&ec);
    x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
    for _ in 0..h.smoothing_steps {
        lvl.smoother.sweep(&lvl.matrix, x, b, SweepOrder::Backward);
    }
}

impl Preconditioner for MeshHierarchy {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        vcycle(self, z, r);
    }
}

#[derive(Debug, Clone)]
pub struct MgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Geometric mean of the per-cycle A-norm error ratios.
    pub contraction: f64,
    pub ratios: Vec<f64>,
}

pub const MG_MAX_CYCLES: usize = 200;

/// Stationary V-cycle iteration from zero until `‖b − Ax‖₂ < tol`.
///
/// The contraction is measured against a CG reference solution, using only
/// cycles whose error is well above the reference accuracy.
pub fn mg_solve(h: &MeshHierarchy, b: &[f64], tol: f64) -> Result<MgResult> {
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let fine = h.finest();
    let a = &fine.matrix;
    let bnorm = norm2(b);
    // reference solution at round-off level; the last iterate is kept even if
    // the requested accuracy is below the attainable floor
    let reference = if bnorm > 0.0 {
        let opts = CgOptions {
            tol: 1e-14 * bnorm,
            max_iter: 100,
            ..CgOptions::default()
        };
        pcg_run(a, b, None, h, opts)?.0.x
    } else {
        vec![0.0; b.len()]
    };
    let err_a = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&reference).map(|(u, v)| u - v).collect();
        a.quad_form(&e).max(0.0).sqrt()
    };
    let mut x = vec![0.0; b.len()];
    let mut res = bnorm;
    let e0 = err_a(&x);
    let mut prev = e0;
    let mut ratios = Vec::new();
    let mut iterations = 0;
    while res >= tol {
        if iterations == MG_MAX_CYCLES {
            return Err(Error::NotConverged {
                iterations,
                residual: res,
            });
        }
        vcycle(h, &mut x, b);
        iterations += 1;
        res = norm2(&residual(a, &x, b));
        let e = err_a(&x);
        if prev > 1e-9 * e0 && e > 1e-9 * e0 {
            ratios.push(e / prev);
        }
        prev = e;
    }
    let contraction = if ratios.is_empty() {
        0.0
    } else {
        (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()
    };
    Ok(MgResult {
        x,
        iterations,
        residual: res,
        contraction,
        ratios,
    })
}

/// Asymptotic A-norm contraction of the V-cycle error propagator, by power
/// iteration on the homogeneous problem (`b = 0`) from a deterministic start.
pub fn contraction_factor(h: &MeshHierarchy, iterations: usize) -> f64 {
    let a = &h.finest().matrix;
    let n = a.nrows();
    let zero = vec![0.0; n];
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
            2.0 * (t - t.floor()) - 1.0
        })
        .collect();
    let mut norm = a.quad_form(&x).sqrt();
    let mut ratio = 0.0;
    for _ in 0..iterations {
        x.iter_mut().for_each(|v| *v /= norm);
        vcycle(h, &mut x, &zero);
        norm = a.quad_form(&x).max(0.0).sqrt();
        ratio = norm;
        if norm == 0.0 {
            break;
        }
    }
    ratio
}

/// Squared weighted norms of `v` and the sums over its vertical-line
/// components `v_j = v(x'_j, ·) φ_j`, for `L²(y^α)` and for `∂_y` in
/// `L²(y^α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineNorms {
    pub mass: f64,
    pub mass_lines: f64,
    pub dy: f64,
    pub dy_lines: f64,
}

/// The line components are `L²(Ω)`-orthogonal up to the base mass matrix,
/// so their norms only involve its diagonal.
pub fn line_norms(mesh: &TensorMesh, alpha: f64, v: &[f64]) -> Result<LineNorms> {
    let ops = crate::assembly::CylinderOperators::new(mesh, alpha)?;
    if v.len() != ops.stiffness.nrows() {
        return invalid(format!(
            "vector has length {}, mesh has {} unknowns",
            v.len(),
            ops.stiffness.nrows()
        ));
    }
    let my = &ops.y.mass;
    let ky = &ops.y.stiffness;
    let lumped = CsrMatrix::from_triplets(
        ops.base_mass.nrows(),
        ops.base_mass.nrows(),
        ops.base_mass.diag().into_iter().enumerate().map(|(i, d)| (i, i, d)),
    );
    Ok(LineNorms {
        mass: CsrMatrix::kron(&ops.base_mass, my).quad_form(v),
        mass_lines: CsrMatrix::kron(&lumped, my).quad_form(v),
        dy: CsrMatrix::kron(&ops.base_mass, ky).quad_form(v),
        dy_lines: CsrMatrix::kron(&lumped, ky).quad_form(v),
    })
}

/// Sharp constants `(c₁, c₂)` of the two-sided bounds between `‖v‖²` and
/// `Σ‖v_j‖²` over all `v`, for the `L²(y^α)` pair and the `∂_y` pair of
/// [`line_norms`]. Both pairs share their `y` factor, so the constants are
/// the extreme eigenvalues of `D^{-1/2} M D^{-1/2}` with `M` the base mass
/// matrix and `D` its diagonal, and do not depend on `α` or the `y` mesh.
/// Dense in the base, so meant for small meshes.
pub fn line_stability_constants(base: &BaseMesh) -> (f64, f64) {
    let (_, mb) = crate::assembly::base_operators(base);
    let d: Vec<f64> = mb.diag().iter().map(|x| x.sqrt()).collect();
    let mut dense = mb.to_dense();
    let n = dense.nrows;
    for i in 0..n {
        for j in 0..n {
            dense.data[i * n + j] /= d[i] * d[j];
        }
    }
    let (eig, _) = symmetric_eigen(&dense);
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{alpha_of, assemble_trace_load};
    use crate::mesh::default_grading;

    fn config(dim: usize, levels: usize, s: f64) -> HierarchyConfig {
        HierarchyConfig {
            dim,
            coarse_cells: 2,
            coarse_m: 2,
            levels,
            grading: default_grading(s).unwrap(),
            height: 1.0,
            alpha: alpha_of(s),
            smoothing_steps: 1,
            line_smoother: true,
        }
    }

    #[test]
    fn fine_points_follow_graded_map() {
        let mut cfg = config(1, 2, 0.5);
        cfg.grading = 2.0;
        let h = build_hierarchy(&cfg).unwrap();
        let pts = h.finest().mesh.interval().points();
        assert_eq!(pts.len(), 9);
        for (l, p) in pts.iter().enumerate() {
            assert!((p - (l as f64 / 8.0).powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_level_is_exact() {
        let h = build_hierarchy(&config(1, 0, 0.3)).unwrap();
        let mesh = &h.finest().mesh;
        let b = assemble_trace_load(mesh, |x| x[0] * (1.0 - x[0]), 0.3).unwrap();
        let r = mg_solve(&h, &b, 1e-12).unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn prolongation_reproduces_constants_away_from_boundary() {
        let h = build_hierarchy(&config(1, 2, 0.5)).unwrap();
        let fine = &h.levels()[2];
        let coarse = &h.levels()[1];
        let p = fine.prolongation.as_ref().unwrap();
        let ones = vec![1.0; coarse.mesh.num_free()];
        let v = p.mul_vec(&ones);
        let xs = fine.mesh.base().as_interval().unwrap().vertices().to_vec();
        let top = coarse.mesh.interval().points()[coarse.mesh.m() - 1];
        for (line, &vert) in fine.mesh.lines().iter().enumerate() {
            let x = xs[vert];
            for level in 0..fine.mesh.m() {
                let y = fine.mesh.interval().points()[level];
                if x >= 0.25 && x <= 0.75 && y <= top {
                    assert!((v[fine.mesh.dof(line, level)] - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn coarse_operators_are_galerkin_products() {
        for dim in [1, 2] {
            let h = build_hierarchy(&config(dim, 2, 0.3)).unwrap();
            for k in 1..h.num_levels() {
                let p = h.levels()[k].prolongation.as_ref().unwrap();
                let galerkin = p.transpose().matmul(&h.levels()[k].matrix).matmul(p);
                let direct = &h.levels()[k - 1].matrix;
                let diff = galerkin.lin_comb(1.0, direct, -1.0).max_abs();
                assert!(diff <= 1e-10 * direct.max_abs(), "dim {dim} level {k}: {diff}");
            }
        }
    }

    #[test]
    fn vcycle_contracts() {
        let h = build_hierarchy(&config(1, 3, 0.3)).unwrap();
        let mesh = &h.finest().mesh;
        let b = assemble_trace_load(mesh, |x| (3.0 * std::f64::consts::PI * x[0]).sin(), 0.3).unwrap();
        let r = mg_solve(&h, &b, 1e-10).unwrap();
        assert!(r.ratios.iter().all(|&q| q < 1.0));
        assert!(r.contraction < 0.6);
        let zero = vec![0.0; b.len()];
        let mut x = zero.clone();
        vcycle(&h, &mut x, &zero);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
