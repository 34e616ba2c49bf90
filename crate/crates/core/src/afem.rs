//! A posteriori error estimation on cylindrical stars and the adaptive loop
//! for one-dimensional base domains.
//!
//! For an interior base vertex `z'` the star `S_{z'}` is the pair of cells
//! sharing `z'`, and the cylindrical star is `S_{z'} × (0, Y)`. The local
//! space is continuous `Q2 ⊗ P2` on the cells of the cylindrical star,
//! vanishing on its lateral sides and on the top; its free unknowns are the
//! three `x'` nodes (left midpoint, `z'`, right midpoint) times the `2M`
//! vertex and midpoint nodes of the `y` partition below the top.
//!
//! The local stiffness is the Kronecker sum `Kx ⊗ My + Mx ⊗ Ky`. It is
//! solved exactly by diagonalizing the 3×3 pencil `(Kx, Mx)`, which leaves
//! three banded systems `λ My + Ky` of half-bandwidth two.

use crate::assembly::{alpha_of, assemble_stiffness, base_load, normalization_ds, shifted_moments};
use crate::data::Datum;
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::mesh::{build_tensor, graded_points, matching_cells, truncation_height, BaseMesh, IntervalMesh, TensorMesh};
use crate::quadrature::gauss_legendre;
use crate::solver::{solve_cylinder, tensor_prolongation};
use crate::sparse::{symmetric_eigen, BandedCholesky, Cholesky, CsrMatrix, DenseMatrix};
use crate::spectral::{trace_error_hs_with, SineExpansion};
use crate::FieldVector;

/// Quadratic Lagrange basis on `[0, 1]` (nodes 0, ½, 1) as monomial
/// coefficients in `t`.
const P2: [[f64; 3]; 3] = [[1.0, -3.0, 2.0], [0.0, 4.0, -4.0], [0.0, -1.0, 2.0]];
const P2_DT: [[f64; 2]; 3] = [[-3.0, 4.0], [4.0, -8.0], [-1.0, 4.0]];
const P1: [[f64; 2]; 2] = [[1.0, -1.0], [0.0, 1.0]];
const P1_DT: [[f64; 1]; 2] = [[-1.0], [1.0]];

/// Gauss points for the oscillation integrals.
const OSC_QUADRATURE_POINTS: usize = 6;

fn poly_product_integral(p: &[f64], q: &[f64], moments: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            acc += a * b * moments[i + j];
        }
    }
    acc
}

/// Local stiffness and mass `(K[p][q], M[p][q])` on one cell for trial basis
/// `u`, test basis `w`, with weight `y^α`.
fn cell_matrices<
    const NW: usize,
    const NU: usize,
    const DW: usize,
    const DU: usize,
    const DWD: usize,
    const DUD: usize,
>(
    a: f64,
    b: f64,
    alpha: f64,
    w: &[[f64; DW]; NW],
    w_dt: &[[f64; DWD]; NW],
    u: &[[f64; DU]; NU],
    u_dt: &[[f64; DUD]; NU],
) -> Result<([[f64; NU]; NW], [[f64; NU]; NW])> {
    let h = b - a;
    let mom = shifted_moments(a, b, alpha, 4)?;
    let mut k = [[0.0; NU]; NW];
    let mut m = [[0.0; NU]; NW];
    for p in 0..NW {
        for q in 0..NU {
            k[p][q] = poly_product_integral(&w_dt[p], &u_dt[q], &mom) / (h * h);
            m[p][q] = poly_product_integral(&w[p], &u[q], &mom);
        }
    }
    Ok((k, m))
}

/// Weighted operators of the local `y` space on a partition of `[0, Y]`.
///
/// Quadratic nodes are numbered `2c` (vertex), `2c+1` (midpoint of cell `c`);
/// the top vertex is dropped. `*_cross` pair quadratic test functions with
/// the piecewise linear trial functions of the bulk space.
#[derive(Debug, Clone)]
pub struct LocalYSpace {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub stiffness_cross: CsrMatrix,
    pub mass_cross: CsrMatrix,
}

impl LocalYSpace {
    pub fn new(points: &[f64], alpha: f64) -> Result<Self> {
        let m = points.len() - 1;
        let nq = 2 * m;
        let (mut k, mut ms, mut kc, mut mc) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for c in 0..m {
            let (a, b) = (points[c], points[c + 1]);
            let (kq, mq) = cell_matrices(a, b, alpha, &P2, &P2_DT, &P2, &P2_DT)?;
            let (kx, mx) = cell_matrices(a, b, alpha, &P2, &P2_DT, &P1, &P1_DT)?;
            for p in 0..3 {
                let gp = 2 * c + p;
                if gp >= nq {
                    continue;
                }
                for q in 0..3 {
                    let gq = 2 * c + q;
                    if gq < nq {
                        k.push((gp, gq, kq[p][q]));
                        ms.push((gp, gq, mq[p][q]));
                    }
                }
                for q in 0..2 {
                    let gq = c + q;
                    if gq < m {
                        kc.push((gp, gq, kx[p][q]));
                        mc.push((gp, gq, mx[p][q]));
                    }
                }
            }
        }
        Ok(Self {
            stiffness: CsrMatrix::from_triplets(nq, nq, k),
            mass: CsrMatrix::from_triplets(nq, nq, ms),
            stiffness_cross: CsrMatrix::from_triplets(nq, m, kc),
            mass_cross: CsrMatrix::from_triplets(nq, m, mc),
        })
    }

    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }
}

/// Star around an interior vertex of a one-dimensional base mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalStar {
    /// Center vertex `z'`.
    pub center: usize,
    /// Vertices `z' − 1`, `z'`, `z' + 1` (coordinates).
    pub x: [f64; 3],
}

impl CylindricalStar {
    /// Cells of the base mesh in the star.
    pub fn cells(&self) -> [usize; 2] {
        [self.center - 1, self.center]
    }

    /// Diameter of `S_{z'}`.
    pub fn diameter(&self) -> f64 {
        self.x[2] - self.x[0]
    }

    /// Number of local unknowns for `M` cells in `y`.
    pub fn local_dim(&self, m: usize) -> usize {
        3 * 2 * m
    }

    /// Unweighted local `x'` matrices: quadratic test against quadratic
    /// (`Kx`, `Mx`, 3×3) and against the linear hats at the three star
    /// vertices (`Kc`, `Mc`, 3×3).
    pub fn x_matrices(&self) -> Result<[[[f64; 3]; 3]; 4]> {
        let mut out = [[[0.0; 3]; 3]; 4];
        // local quadratic nodes (left, mid, right) → star unknowns
        let q_map = [[None, Some(0), Some(1)], [Some(1), Some(2), None]];
        let l_map = [[0, 1], [1, 2]];
        for cell in 0..2 {
            let (a, b) = (self.x[cell], self.x[cell + 1]);
            let (kq, mq) = cell_matrices(a, b, 0.0, &P2, &P2_DT, &P2, &P2_DT)?;
            let (kl, ml) = cell_matrices(a, b, 0.0, &P2, &P2_DT, &P1, &P1_DT)?;
            for p in 0..3 {
                let Some(gp) = q_map[cell][p] else { continue };
                for q in 0..3 {
                    if let Some(gq) = q_map[cell][q] {
                        out[0][gp][gq] += kq[p][q];
                        out[1][gp][gq] += mq[p][q];
                    }
                }
                for q in 0..2 {
                    out[2][gp][l_map[cell][q]] += kl[p][q];
                    out[3][gp][l_map[cell][q]] += ml[p][q];
                }
            }
        }
        Ok(out)
    }

    /// `∫_{S_{z'}} f w_i` for the three quadratic `x'` functions.
    pub fn x_load(&self, f: &dyn Fn(f64) -> f64) -> [f64; 3] {
        let rule = gauss_legendre(OSC_QUADRATURE_POINTS);
        let q_map = [[None, Some(0), Some(1)], [Some(1), Some(2), None]];
        let mut out = [0.0; 3];
        for cell in 0..2 {
            let (a, b) = (self.x[cell], self.x[cell + 1]);
            let h = b - a;
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let fv = f(a + h * t) * w * h;
                for p in 0..3 {
                    if let Some(gp) = q_map[cell][p] {
                        out[gp] += fv * (P2[p][0] + t * (P2[p][1] + t * P2[p][2]));
                    }
                }
            }
        }
        out
    }
}

/// Stars of all interior vertices of a one-dimensional base mesh, ordered
/// by vertex.
pub fn stars(base: &IntervalMesh) -> Vec<CylindricalStar> {
    let xs = base.vertices();
    base.interior_vertices()
        .map(|z| CylindricalStar {
            center: z,
            x: [xs[z - 1], xs[z], xs[z + 1]],
        })
        .collect()
}

fn interval_base(mesh: &TensorMesh) -> Result<&IntervalMesh> {
    mesh.base().as_interval().ok_or(Error::UnsupportedDimension(mesh.dim()))
}

/// Data shared by all star problems on one mesh.
pub struct StarContext<'a> {
    mesh: &'a TensorMesh,
    y: LocalYSpace,
    ds: f64,
    /// Per bulk line: `My_cross · V_line` and `Ky_cross · V_line`.
    v_mass: Vec<Vec<f64>>,
    v_stiff: Vec<Vec<f64>>,
}

impl<'a> StarContext<'a> {
    pub fn new(mesh: &'a TensorMesh, v: &[f64], s: f64, exec: Exec) -> Result<Self> {
        interval_base(mesh)?;
        if v.len() != mesh.num_free() {
            return invalid("field vector does not match mesh");
        }
        let y = LocalYSpace::new(mesh.interval().points(), alpha_of(s))?;
        let m = mesh.m();
        let lines = exec.map(mesh.num_lines(), |l| {
            let vl = &v[l * m..(l + 1) * m];
            (y.mass_cross.mul_vec(vl), y.stiffness_cross.mul_vec(vl))
        });
        let (v_mass, v_stiff) = lines.into_iter().unzip();
        Ok(Self {
            mesh,
            y,
            ds: normalization_ds(s)?,
            v_mass,
            v_stiff,
        })
    }

    pub fn y_space(&self) -> &LocalYSpace {
        &self.y
    }

    /// Right-hand side `d_s⟨f, tr W⟩ − a(V, W)` of a star problem, as three
    /// blocks of length `2M` (one per quadratic `x'` node).
    pub fn star_rhs(&self, star: &CylindricalStar, f: &dyn Fn(f64) -> f64) -> Result<[Vec<f64>; 3]> {
        let [_, _, kc, mc] = star.x_matrices()?;
        let load = star.x_load(f);
        let nq = self.y.dim();
        let vertices = [star.center - 1, star.center, star.center + 1];
        let mut rhs: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; nq]);
        for (i, r) in rhs.iter_mut().enumerate() {
            r[0] += self.ds * load[i];
            for (j, &vert) in vertices.iter().enumerate() {
                let Some(line) = self.mesh.line_of_vertex(vert) else {
                    continue;
                };
                let (um, uk) = (&self.v_mass[line], &self.v_stiff[line]);
                for k in 0..nq {
                    r[k] -= kc[i][j] * um[k] + mc[i][j] * uk[k];
                }
            }
        }
        Ok(rhs)
    }
}

/// Local solution `η_{z'}` (three blocks of `2M`, `x'`-node major) and its
/// energy `⫴η⫴² = ∫ y^α |∇η|²` over the cylindrical star.
#[derive(Debug, Clone)]
pub struct StarSolution {
    pub eta: Vec<f64>,
    pub energy: f64,
}

pub fn solve_star(ctx: &StarContext<'_>, star: &CylindricalStar, f: &dyn Fn(f64) -> f64) -> Result<StarSolution> {
    let [kx, mx, _, _] = star.x_matrices()?;
    let rhs = ctx.star_rhs(star, f)?;
    let nq = ctx.y.dim();
    // (Kx, Mx) = (L⁻ᵀ U) Λ (L⁻ᵀ U)ᵀ-congruence
    let chol = Cholesky::factor(&DenseMatrix::from_rows(&mx.map(|r| r.to_vec())))?;
    let mut linv = DenseMatrix::zeros(3, 3);
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let mut col = e.to_vec();
        chol.forward_in_place(&mut col);
        for i in 0..3 {
            linv[(i, j)] = col[i];
        }
    }
    let mut c = DenseMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    acc += linv[(i, p)] * kx[p][q] * linv[(j, q)];
                }
            }
            c[(i, j)] = acc;
        }
    }
    let (lambda, u) = symmetric_eigen(&c);
    // Q = L⁻ᵀ U, so Qᵀ Mx Q = I and Qᵀ Kx Q = Λ
    let mut q = [[0.0; 3]; 3];
    for i in 0..3 {
        for a in 0..3 {
            q[i][a] = (0..3).map(|p| linv[(p, i)] * u[(p, a)]).sum();
        }
    }
    let mut eta = vec![0.0; 3 * nq];
    let mut energy = 0.0;
    for a in 0..3 {
        let mut g: Vec<f64> = (0..nq).map(|k| (0..3).map(|i| q[i][a] * rhs[i][k]).sum()).collect();
        let rhs_a = g.clone();
        let block = ctx.y.mass.lin_comb(lambda[a], &ctx.y.stiffness, 1.0);
        BandedCholesky::factor(&block, 2)?.solve_in_place(&mut g);
        energy += g.iter().zip(&rhs_a).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..3 {
            for k in 0..nq {
                eta[i * nq + k] += q[i][a] * g[k];
            }
        }
    }
    Ok(StarSolution {
        eta,
        energy: energy.max(0.0),
    })
}

/// `⫴η⫴` evaluated from the assembled local quadratic form
/// `ηᵀ (Kx ⊗ My + Mx ⊗ Ky) η`.
pub fn indicator(ctx: &StarContext<'_>, star: &CylindricalStar, eta: &[f64]) -> Result<f64> {
    let [kx, mx, _, _] = star.x_matrices()?;
    let nq = ctx.y.dim();
    if eta.len() != 3 * nq {
        return invalid("local vector has the wrong length");
    }
    let mut acc = 0.0;
    for j in 0..3 {
        let ej = &eta[j * nq..(j + 1) * nq];
        let my = ctx.y.mass.mul_vec(ej);
        let ky = ctx.y.stiffness.mul_vec(ej);
        for i in 0..3 {
            let ei = &eta[i * nq..(i + 1) * nq];
            acc += ei.iter().zip(&my).map(|(a, b)| a * b).sum::<f64>() * kx[i][j];
            acc += ei.iter().zip(&ky).map(|(a, b)| a * b).sum::<f64>() * mx[i][j];
        }
    }
    Ok(acc.max(0.0).sqrt())
}

/// `osc_{z'}(f) = (d_s h^{2s} ‖f − f_{z'}‖²_{L²(S_{z'})})^{1/2}` with `f_{z'}`
/// the cellwise mean and `h` the diameter of the star.
pub fn oscillation(star: &CylindricalStar, f: &dyn Fn(f64) -> f64, s: f64) -> Result<f64> {
    let ds = normalization_ds(s)?;
    let rule = gauss_legendre(OSC_QUADRATURE_POINTS);
    let mut acc = 0.0;
    for cell in 0..2 {
        let (a, b) = (star.x[cell], star.x[cell + 1]);
        let h = b - a;
        let values: Vec<f64> = rule.nodes.iter().map(|t| f(a + h * t)).collect();
        let mean: f64 = values.iter().zip(&rule.weights).map(|(v, w)| v * w).sum();
        acc += values
            .iter()
            .zip(&rule.weights)
            .map(|(v, w)| w * (v - mean).powi(2))
            .sum::<f64>()
            * h;
    }
    Ok((ds * star.diameter().powf(2.0 * s) * acc).sqrt())
}

/// Per-star indicators of one mesh, ordered by star center.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub centers: Vec<usize>,
    pub estimators: Vec<f64>,
    pub oscillations: Vec<f64>,
}

impl IndicatorSet {
    /// `τ_{z'} = (𝓔_{z'}² + osc_{z'}²)^{1/2}`.
    pub fn totals(&self) -> Vec<f64> {
        self.estimators
            .iter()
            .zip(&self.oscillations)
            .map(|(e, o)| e.hypot(*o))
            .collect()
    }

    pub fn global_estimator(&self) -> f64 {
        self.estimators.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn global_oscillation(&self) -> f64 {
        self.oscillations.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn total(&self) -> f64 {
        self.global_estimator().hypot(self.global_oscillation())
    }
}

/// Estimator and oscillation on every star of `mesh` for the discrete
/// solution `v`.
pub fn estimate(mesh: &TensorMesh, v: &[f64], f: &Datum, s: f64, exec: Exec) -> Result<IndicatorSet> {
    let base = interval_base(mesh)?;
    let ctx = StarContext::new(mesh, v, s, exec)?;
    let fx = |x: f64| f.eval([x, 0.0]);
    let list = stars(base);
    let per_star = exec.map(list.len(), |i| -> Result<(f64, f64)> {
        let sol = solve_star(&ctx, &list[i], &fx)?;
        Ok((sol.energy.sqrt(), oscillation(&list[i], &fx, s)?))
    });
    let mut set = IndicatorSet {
        centers: list.iter().map(|st| st.center).collect(),
        estimators: Vec::with_capacity(list.len()),
        oscillations: Vec::with_capacity(list.len()),
    };
    for r in per_star {
        let (e, o) = r?;
        set.estimators.push(e);
        set.oscillations.push(o);
    }
    Ok(set)
}

/// Dörfler marking: indices of the shortest prefix of the indicators sorted
/// in decreasing order (ties by lower index) whose squares reach
/// `θ² Σ τ²`. Returned in increasing index order.
pub fn dorfler_mark(totals: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return invalid(format!("marking parameter must lie in (0,1], got {theta}"));
    }
    if totals.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return invalid("indicators must be finite and non-negative");
    }
    if theta == 1.0 {
        return Ok((0..totals.len()).collect());
    }
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    let goal = theta * theta * totals.iter().map(|t| t * t).sum::<f64>();
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if acc >= goal && !marked.is_empty() {
            break;
        }
        acc += totals[i] * totals[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Tensor mesh over `base` with `M` and `Y` matched to the number of cells.
pub fn matched_tensor(base: IntervalMesh, grading: f64) -> Result<TensorMesh> {
    let n = base.num_cells();
    let interval = graded_points(matching_cells(n, 1), grading, truncation_height(n)?)?;
    Ok(build_tensor(BaseMesh::Interval(base), interval))
}

/// Solve the discrete extension problem on `mesh` for the datum `f`.
pub fn solve_extension(mesh: &TensorMesh, f: &Datum, s: f64, exec: Exec) -> Result<FieldVector> {
    let a = assemble_stiffness(mesh, alpha_of(s))?;
    let ds = normalization_ds(s)?;
    let load = base_load(mesh.base(), |x| f.eval(x), exec);
    let b = crate::assembly::embed_trace(mesh, &load, ds);
    Ok(solve_cylinder(&a, &b, None, mesh.m(), 1e-12)?.x)
}

/// Discrete reference on the mesh refined `levels` times in `x'` with
/// `2^levels M` cells in `y` (same `Y` and grading, so the coarse space is
/// nested in it).
pub struct OverkillReference {
    pub mesh: TensorMesh,
    pub solution: FieldVector,
    stiffness: CsrMatrix,
    prolongation: CsrMatrix,
}

impl OverkillReference {
    pub fn new(coarse: &TensorMesh, f: &Datum, s: f64, levels: u32, exec: Exec) -> Result<Self> {
        if levels == 0 {
            return invalid("overkill reference needs at least one refinement");
        }
        let mut base = interval_base(coarse)?.clone();
        for _ in 0..levels {
            base = base.refine_uniform();
        }
        let g = coarse.interval();
        let fine = build_tensor(
            BaseMesh::Interval(base),
            graded_points(g.cells() << levels, g.grading(), g.height())?,
        );
        let solution = solve_extension(&fine, f, s, exec)?;
        Ok(Self {
            stiffness: assemble_stiffness(&fine, alpha_of(s))?,
            prolongation: tensor_prolongation(coarse, &fine)?,
            mesh: fine,
            solution,
        })
    }

    /// Reference minus the coarse solution, on the fine mesh.
    pub fn error_field(&self, v: &[f64]) -> Vec<f64> {
        let pv = self.prolongation.mul_vec(v);
        self.solution.iter().zip(&pv).map(|(r, c)| r - c).collect()
    }

    /// `‖∇(v_ref − V)‖_{L²(y^α, C_Y)}`.
    pub fn energy_error(&self, v: &[f64]) -> f64 {
        self.stiffness.quad_form(&self.error_field(v)).max(0.0).sqrt()
    }

    /// `‖∇(v_ref − V)‖_{L²(y^α, C_{z'})}` for each star.
    pub fn star_errors(&self, list: &[CylindricalStar], v: &[f64], s: f64) -> Result<Vec<f64>> {
        let e = self.error_field(v);
        let fine_base = interval_base(&self.mesh)?;
        let fx = fine_base.vertices();
        let ops = crate::assembly::interval_operators(self.mesh.interval().points(), alpha_of(s))?;
        let m = self.mesh.m();
        let column = |vert: usize| -> Option<&[f64]> { self.mesh.line_of_vertex(vert).map(|l| &e[l * m..(l + 1) * m]) };
        let form = |a: &CsrMatrix, u: Option<&[f64]>, w: Option<&[f64]>| match (u, w) {
            (Some(u), Some(w)) => a.mul_vec(w).iter().zip(u).map(|(x, y)| x * y).sum::<f64>(),
            _ => 0.0,
        };
        list.iter()
            .map(|st| {
                let mut acc = 0.0;
                for c in 0..fx.len() - 1 {
                    let (a, b) = (fx[c], fx[c + 1]);
                    if a < st.x[0] - 1e-14 || b > st.x[2] + 1e-14 {
                        continue;
                    }
                    let h = b - a;
                    let (kx, mx) = (
                        [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]],
                        [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]],
                    );
                    let cols = [column(c), column(c + 1)];
                    for p in 0..2 {
                        for q in 0..2 {
                            acc += kx[p][q] * form(&ops.mass, cols[p], cols[q]);
                            acc += mx[p][q] * form(&ops.stiffness, cols[p], cols[q]);
                        }
                    }
                }
                Ok(acc.max(0.0).sqrt())
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AfemConfig {
    pub s: f64,
    pub f: Datum,
    pub theta: f64,
    pub initial_cells: usize,
    pub grading: f64,
    pub max_iterations: usize,
    pub max_dofs: usize,
    /// Exact solution for the `H^s` trace error.
    pub exact: Option<SineExpansion>,
    /// Compare against an overkill reference, refined this many times, on
    /// every iteration.
    pub overkill: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct AfemRecord {
    pub iteration: usize,
    pub dofs: usize,
    pub cells: usize,
    pub m: usize,
    pub height: f64,
    pub indicators: IndicatorSet,
    pub estimator: f64,
    pub oscillation: f64,
    pub hs_error: Option<f64>,
    pub energy_error: Option<f64>,
    pub star_errors: Option<Vec<f64>>,
    pub marked: Vec<usize>,
}

/// Records of the completed iterations, and the error that stopped the loop
/// early, if any.
#[derive(Debug)]
pub struct AfemRun {
    pub records: Vec<AfemRecord>,
    pub failure: Option<Error>,
}

/// SOLVE → ESTIMATE → MARK → REFINE until `max_iterations` records exist or
/// the next mesh would exceed `max_dofs` free unknowns.
pub fn afem_loop(cfg: &AfemConfig, exec: Exec) -> Result<AfemRun> {
    if cfg.f.dim() != 1 {
        return Err(Error::UnsupportedDimension(cfg.f.dim()));
    }
    if cfg.initial_cells < 2 {
        return invalid("initial mesh needs at least two cells");
    }
    dorfler_mark(&[], cfg.theta)?;
    let mut base = IntervalMesh::uniform(cfg.initial_cells);
    let mut records = Vec::new();
    for iteration in 0..cfg.max_iterations {
        let mesh = matched_tensor(base.clone(), cfg.grading)?;
        if mesh.num_free() > cfg.max_dofs && iteration > 0 {
            break;
        }
        match afem_step(cfg, &mesh, iteration, exec) {
            Ok(rec) => {
                let cells: Vec<usize> = rec
                    .marked
                    .iter()
                    .flat_map(|&i| {
                        let z = rec.indicators.centers[i];
                        [z - 1, z]
                    })
                    .collect();
                let mut cells = cells;
                cells.sort_unstable();
                cells.dedup();
                records.push(rec);
                base = base.bisect(&cells)?;
            }
            Err(e) => {
                return Ok(AfemRun {
                    records,
                    failure: Some(e),
                })
            }
        }
    }
    Ok(AfemRun { records, failure: None })
}

fn afem_step(cfg: &AfemConfig, mesh: &TensorMesh, iteration: usize, exec: Exec) -> Result<AfemRecord> {
    let v = solve_extension(mesh, &cfg.f, cfg.s, exec)?;
    let indicators = estimate(mesh, &v, &cfg.f, cfg.s, exec)?;
    let marked = dorfler_mark(&indicators.totals(), cfg.theta)?;
    let hs_error = match &cfg.exact {
        Some(u) => Some(trace_error_hs_with(mesh, &v, u, cfg.s, exec)?.value),
        None => None,
    };
    let (energy_error, star_errors) = if let Some(levels) = cfg.overkill {
        let r = OverkillReference::new(mesh, &cfg.f, cfg.s, levels, exec)?;
        let list = stars(interval_base(mesh)?);
        (Some(r.energy_error(&v)), Some(r.star_errors(&list, &v, cfg.s)?))
    } else {
        (None, None)
    };
    Ok(AfemRecord {
        iteration,
        dofs: mesh.num_free(),
        cells: mesh.base().num_cells(),
        m: mesh.m(),
        height: mesh.height(),
        estimator: indicators.global_estimator(),
        oscillation: indicators.global_oscillation(),
        indicators,
        hs_error,
        energy_error,
        star_errors,
        marked,
    })
}
