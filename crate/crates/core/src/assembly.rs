//! Weighted finite element operators on cylinder meshes.
//!
//! Every operator on a tensor mesh factors into a base part (unweighted P1/Q1
//! matrices on `Ω`) and an extended-direction part (P1 matrices on the graded
//! interval weighted by `y^α`). With the line-major DoF numbering,
//!
//! * stiffness      `A = K_Ω ⊗ M_y + M_Ω ⊗ K_y`,
//! * weighted mass  `M = M_Ω ⊗ M_y`,
//! * trace mass     `M_tr = M_Ω ⊗ e₀e₀ᵀ`,
//!
//! which is exactly the element-by-element tensorized assembly. The y
//! integrals are closed-form weighted moments, never a Gauss rule: `y^α` is
//! singular (or has a singular derivative) at `y = 0`.

use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::mesh::{BaseMesh, IntervalMesh, TensorMesh};
use crate::quadrature::gauss_legendre;
use crate::sparse::CsrMatrix;
use crate::special::gamma_fn;
use crate::FieldVector;

/// Weight exponent `α = 1 − 2s`.
pub fn alpha_of(s: f64) -> f64 {
    1.0 - 2.0 * s
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0 && alpha < 1.0) {
        return invalid(format!("weight exponent must lie in (-1,1), got {alpha}"));
    }
    Ok(())
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("fractional order must lie in (0,1), got {s}"));
    }
    Ok(())
}

/// `∫_a^b y^{α+m} dy`.
pub fn weight_moment(a: f64, b: f64, alpha: f64, m: u32) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0 <= a && a < b) {
        return invalid(format!("moment needs 0 <= a < b, got [{a}, {b}]"));
    }
    let p = alpha + m as f64 + 1.0;
    Ok((b.powf(p) - a.powf(p)) / p)
}

/// Below this ratio `a/h` the shifted moments are generated upwards.
const FORWARD_RATIO: f64 = 2.0;
/// Extra degrees used to start the downward recursion.
const BACKWARD_EXTRA: usize = 60;

/// Shifted moments `I_m = ∫_a^b y^α t^m dy`, `t = (y − a)/(b − a)`, for
/// `m = 0..=max_degree`.
///
/// Integrating `d/dy (y^{α+1} t^m)` over the cell gives the exact recursion
/// `(α+1+m) I_m = b^{α+1} − δ_{m0} a^{α+1} − (m a/h) I_{m−1}`. It is stable
/// upwards when `a/h` is small and downwards (started from the asymptotic
/// value `h b^α/(m+1)` well above `max_degree`) when `a/h` is large.
pub fn shifted_moments(a: f64, b: f64, alpha: f64, max_degree: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(0.0 <= a && a < b) {
        return invalid(format!("moment needs 0 <= a < b, got [{a}, {b}]"));
    }
    let h = b - a;
    let r = a / h;
    let bp = b.powf(alpha + 1.0);
    let mut out = vec![0.0; max_degree + 1];
    if r < FORWARD_RATIO {
        out[0] = (bp - a.powf(alpha + 1.0)) / (alpha + 1.0);
        for m in 1..=max_degree {
            out[m] = (bp - m as f64 * r * out[m - 1]) / (alpha + 1.0 + m as f64);
        }
    } else {
        let top = max_degree + BACKWARD_EXTRA;
        let mut cur = h * b.powf(alpha) / (top as f64 + 1.0);
        for m in (1..=top).rev() {
            // I_{m-1} from I_m
            let prev = (bp - (alpha + 1.0 + m as f64) * cur) / (m as f64 * r);
            if m - 1 <= max_degree {
                out[m - 1] = prev;
            }
            cur = prev;
        }
    }
    Ok(out)
}

/// `∫_a^b y^α p(t) dy` for `p(t) = Σ c_m t^m`.
pub fn weighted_poly_integral(moments: &[f64], coeffs: &[f64]) -> f64 {
    coeffs.iter().zip(moments).map(|(c, m)| c * m).sum()
}

/// `2^{1−2s} Γ(1−s)/Γ(s)`.
pub fn normalization_ds(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(2f64.powf(1.0 - 2.0 * s) * gamma_fn(1.0 - s)? / gamma_fn(s)?)
}

/// Weighted P1 stiffness and mass on a partition of `[0, Y]`, restricted to
/// the free nodes `0..M` (the top node carries the Dirichlet condition).
#[derive(Debug, Clone)]
pub struct IntervalOperators {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

pub fn interval_operators(points: &[f64], alpha: f64) -> Result<IntervalOperators> {
    check_alpha(alpha)?;
    let m = points.len() - 1;
    let mut k = Vec::with_capacity(4 * m);
    let mut ms = Vec::with_capacity(4 * m);
    for c in 0..m {
        let (a, b) = (points[c], points[c + 1]);
        let h = b - a;
        let i = shifted_moments(a, b, alpha, 2)?;
        // local basis 1 − t, t
        let m00 = i[0] - 2.0 * i[1] + i[2];
        let m01 = i[1] - i[2];
        let m11 = i[2];
        let k0 = i[0] / (h * h);
        let local_m = [[m00, m01], [m01, m11]];
        let local_k = [[k0, -k0], [-k0, k0]];
        for p in 0..2 {
            for q in 0..2 {
                let (gp, gq) = (c + p, c + q);
                if gp < m && gq < m {
                    k.push((gp, gq, local_k[p][q]));
                    ms.push((gp, gq, local_m[p][q]));
                }
            }
        }
    }
    Ok(IntervalOperators {
        stiffness: CsrMatrix::from_triplets(m, m, k),
        mass: CsrMatrix::from_triplets(m, m, ms),
    })
}

/// Unweighted P1 stiffness and mass over the interior vertices of an
/// interval mesh (interior vertex `v` has index `v − 1`).
pub fn interval_base_operators(mesh: &IntervalMesh) -> (CsrMatrix, CsrMatrix) {
    let xs = mesh.vertices();
    let n = xs.len() - 2;
    let mut k = Vec::new();
    let mut m = Vec::new();
    for c in 0..mesh.num_cells() {
        let h = xs[c + 1] - xs[c];
        let lk = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
        let lm = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        for p in 0..2 {
            for q in 0..2 {
                let (vp, vq) = (c + p, c + q);
                if mesh.is_boundary_vertex(vp) || mesh.is_boundary_vertex(vq) {
                    continue;
                }
                k.push((vp - 1, vq - 1, lk[p][q]));
                m.push((vp - 1, vq - 1, lm[p][q]));
            }
        }
    }
    (CsrMatrix::from_triplets(n, n, k), CsrMatrix::from_triplets(n, n, m))
}

/// Base stiffness and mass over the interior vertices, in line order.
pub fn base_operators(base: &BaseMesh) -> (CsrMatrix, CsrMatrix) {
    match base {
        BaseMesh::Interval(m) => interval_base_operators(m),
        BaseMesh::Square { x, y } => {
            let (kx, mx) = interval_base_operators(x);
            let (ky, my) = interval_base_operators(y);
            // line index = (j−1)·nx + (i−1): y outer, x inner
            let k = CsrMatrix::kron(&my, &kx).lin_comb(1.0, &CsrMatrix::kron(&ky, &mx), 1.0);
            (k, CsrMatrix::kron(&my, &mx))
        }
    }
}

/// All operators of one cylinder mesh.
#[derive(Debug, Clone)]
pub struct CylinderOperators {
    pub alpha: f64,
    pub base_stiffness: CsrMatrix,
    pub base_mass: CsrMatrix,
    pub y: IntervalOperators,
    pub stiffness: CsrMatrix,
}

impl CylinderOperators {
    pub fn new(mesh: &TensorMesh, alpha: f64) -> Result<Self> {
        let y = interval_operators(mesh.interval().points(), alpha)?;
        let (kb, mb) = base_operators(mesh.base());
        let stiffness = CsrMatrix::kron(&kb, &y.mass).lin_comb(1.0, &CsrMatrix::kron(&mb, &y.stiffness), 1.0);
        Ok(Self {
            alpha,
            base_stiffness: kb,
            base_mass: mb,
            y,
            stiffness,
        })
    }

    pub fn weighted_mass(&self) -> CsrMatrix {
        CsrMatrix::kron(&self.base_mass, &self.y.mass)
    }

    pub fn trace_mass(&self) -> CsrMatrix {
        let m = self.y.mass.nrows();
        let e0 = CsrMatrix::from_triplets(m, m, [(0, 0, 1.0)]);
        CsrMatrix::kron(&self.base_mass, &e0)
    }
}

/// `∫_{C_Y} y^α ∇V·∇W` over the free DoFs.
pub fn assemble_stiffness(mesh: &TensorMesh, alpha: f64) -> Result<CsrMatrix> {
    Ok(CylinderOperators::new(mesh, alpha)?.stiffness)
}

/// `∫_{C_Y} y^α V W` over the free DoFs.
pub fn assemble_weighted_mass(mesh: &TensorMesh, alpha: f64) -> Result<CsrMatrix> {
    Ok(CylinderOperators::new(mesh, alpha)?.weighted_mass())
}

/// `∫_Ω tr V tr W`, embedded in the full DoF numbering.
pub fn assemble_trace_mass(mesh: &TensorMesh) -> CsrMatrix {
    let (_, mb) = base_operators(mesh.base());
    let m = mesh.m();
    let e0 = CsrMatrix::from_triplets(m, m, [(0, 0, 1.0)]);
    CsrMatrix::kron(&mb, &e0)
}

/// Gauss points per cell and direction for `⟨f, tr W⟩`.
pub const LOAD_QUADRATURE_POINTS: usize = 4;

/// `∫_Ω f φ_v` for every interior base vertex, in line order.
pub fn base_load<F>(base: &BaseMesh, f: F, exec: Exec) -> Vec<f64>
where
    F: Fn([f64; 2]) -> f64 + Sync + Send,
{
    let rule = gauss_legendre(LOAD_QUADRATURE_POINTS);
    match base {
        BaseMesh::Interval(m) => {
            let xs = m.vertices();
            // per cell: (left, right) contributions
            let cells = exec.map(m.num_cells(), |c| {
                let (a, b) = m.cell(c);
                let h = b - a;
                let mut l = 0.0;
                let mut r = 0.0;
                for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                    let fv = f([a + h * t, 0.0]) * w * h;
                    l += fv * (1.0 - t);
                    r += fv * t;
                }
                (l, r)
            });
            (1..xs.len() - 1).map(|v| cells[v - 1].1 + cells[v].0).collect()
        }
        BaseMesh::Square { x, y } => {
            let xs = x.vertices();
            let ys = y.vertices();
            let nx = xs.len() - 2;
            let ny = ys.len() - 2;
            let mut out = vec![0.0; nx * ny];
            exec.fill(&mut out, |l, o| {
                let (i, j) = (l % nx + 1, l / nx + 1);
                let mut acc = 0.0;
                for ci in [i - 1, i] {
                    for cj in [j - 1, j] {
                        let (x0, x1) = (xs[ci], xs[ci + 1]);
                        let (y0, y1) = (ys[cj], ys[cj + 1]);
                        let (hx, hy) = (x1 - x0, y1 - y0);
                        for (tx, wx) in rule.nodes.iter().zip(&rule.weights) {
                            let px = x0 + hx * tx;
                            let bx = if ci == i { 1.0 - tx } else { *tx };
                            for (ty, wy) in rule.nodes.iter().zip(&rule.weights) {
                                let py = y0 + hy * ty;
                                let by = if cj == j { 1.0 - ty } else { *ty };
                                acc += f([px, py]) * bx * by * wx * wy * hx * hy;
                            }
                        }
                    }
                }
                *o = acc;
            });
            out
        }
    }
}

/// `d_s ⟨f, tr W⟩` for every free DoF (nonzero only at level 0).
pub fn assemble_trace_load<F>(mesh: &TensorMesh, f: F, s: f64) -> Result<FieldVector>
where
    F: Fn([f64; 2]) -> f64 + Sync + Send,
{
    assemble_trace_load_with(mesh, f, s, Exec::default())
}

pub fn assemble_trace_load_with<F>(mesh: &TensorMesh, f: F, s: f64, exec: Exec) -> Result<FieldVector>
where
    F: Fn([f64; 2]) -> f64 + Sync + Send,
{
    let ds = normalization_ds(s)?;
    let load = base_load(mesh.base(), f, exec);
    Ok(embed_trace(mesh, &load, ds))
}

/// Place `scale · values[line]` at level 0 of every line.
pub fn embed_trace(mesh: &TensorMesh, values: &[f64], scale: f64) -> FieldVector {
    let mut b = vec![0.0; mesh.num_free()];
    for (l, v) in values.iter().enumerate() {
        b[mesh.dof(l, 0)] = scale * v;
    }
    b
}

/// `(∫ y^α |∇V|²)^{1/2}`.
pub fn weighted_energy_norm(mesh: &TensorMesh, v: &[f64], alpha: f64) -> Result<f64> {
    if v.len() != mesh.num_free() {
        return invalid("field vector does not match mesh");
    }
    Ok(assemble_stiffness(mesh, alpha)?.quad_form(v).max(0.0).sqrt())
}

/// `(∫ y^α V²)^{1/2}`.
pub fn weighted_l2_norm(mesh: &TensorMesh, v: &[f64], alpha: f64) -> Result<f64> {
    if v.len() != mesh.num_free() {
        return invalid("field vector does not match mesh");
    }
    Ok(assemble_weighted_mass(mesh, alpha)?.quad_form(v).max(0.0).sqrt())
}
