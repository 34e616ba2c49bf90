//! Sine eigen-expansions on `(0,1)` and `(0,1)^2` and closed-form extensions.
//!
//! The Dirichlet Laplacian on the unit interval has orthonormal eigenpairs
//! `φ_k = √2 sin(kπx)`, `λ_k = (kπ)^2`; on the unit square
//! `φ_{mn} = 2 sin(mπx₁) sin(nπx₂)`, `λ_{mn} = π²(m² + n²)`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::mesh::{BaseMesh, TensorMesh};
use crate::special::{bessel_k_full, gamma_fn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Interval,
    Square,
}

impl Domain {
    pub fn dim(self) -> usize {
        match self {
            Domain::Interval => 1,
            Domain::Square => 2,
        }
    }
}

/// Coefficients `w_k` in the orthonormal sine basis, modes `1..=cutoff`
/// (per direction on the square, stored `(m-1)·cutoff + (n-1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SineExpansion {
    domain: Domain,
    cutoff: usize,
    coeffs: Vec<f64>,
}

impl SineExpansion {
    pub fn new(domain: Domain, cutoff: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = match domain {
            Domain::Interval => cutoff,
            Domain::Square => cutoff * cutoff,
        };
        if coeffs.len() != expected {
            return invalid(format!(
                "expected {expected} sine coefficients for cutoff {cutoff}, got {}",
                coeffs.len()
            ));
        }
        Ok(Self { domain, cutoff, coeffs })
    }

    pub fn zeros(domain: Domain, cutoff: usize) -> Self {
        let n = match domain {
            Domain::Interval => cutoff,
            Domain::Square => cutoff * cutoff,
        };
        Self {
            domain,
            cutoff,
            coeffs: vec![0.0; n],
        }
    }

    /// Interval expansion from a coefficient function of the mode `k ≥ 1`.
    pub fn interval_from_fn(cutoff: usize, w: impl Fn(usize) -> f64) -> Self {
        Self {
            domain: Domain::Interval,
            cutoff,
            coeffs: (1..=cutoff).map(w).collect(),
        }
    }

    /// Square expansion from a coefficient function of the modes `(m, n)`.
    pub fn square_from_fn(cutoff: usize, w: impl Fn(usize, usize) -> f64) -> Self {
        let mut coeffs = Vec::with_capacity(cutoff * cutoff);
        for m in 1..=cutoff {
            for n in 1..=cutoff {
                coeffs.push(w(m, n));
            }
        }
        Self {
            domain: Domain::Square,
            cutoff,
            coeffs,
        }
    }

    /// The single mode `φ_1` (or `φ_{11}`) scaled by `amplitude`.
    pub fn first_mode(domain: Domain, cutoff: usize, amplitude: f64) -> Self {
        let mut e = Self::zeros(domain, cutoff.max(1));
        e.coeffs[0] = amplitude;
        e
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Eigenvalue of the coefficient stored at `idx`.
    #[inline]
    pub fn eigenvalue(&self, idx: usize) -> f64 {
        match self.domain {
            Domain::Interval => {
                let k = (idx + 1) as f64;
                PI * PI * k * k
            }
            Domain::Square => {
                let m = (idx / self.cutoff + 1) as f64;
                let n = (idx % self.cutoff + 1) as f64;
                PI * PI * (m * m + n * n)
            }
        }
    }

    /// Point evaluation of the truncated series.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        match self.domain {
            Domain::Interval => self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| w * 2f64.sqrt() * ((i + 1) as f64 * PI * x[0]).sin())
                .sum(),
            Domain::Square => self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| {
                    let m = (i / self.cutoff + 1) as f64;
                    let n = (i % self.cutoff + 1) as f64;
                    w * 2.0 * (m * PI * x[0]).sin() * (n * PI * x[1]).sin()
                })
                .sum(),
        }
    }

    /// Multiply every coefficient by `λ^p`.
    pub fn apply_power(&self, p: f64) -> Self {
        let mut out = self.clone();
        for (i, w) in out.coeffs.iter_mut().enumerate() {
            *w *= self.eigenvalue(i).powf(p);
        }
        out
    }

    /// Pointwise difference of two expansions on the same basis.
    pub fn sub(&self, other: &SineExpansion) -> Result<Self> {
        if self.domain != other.domain || self.cutoff != other.cutoff {
            return invalid("sine expansions live on different bases");
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Self {
            domain: self.domain,
            cutoff: self.cutoff,
            coeffs,
        })
    }
}

/// `u_k = f_k / λ_k^s`.
pub fn spectral_solve(f: &SineExpansion, s: f64) -> SineExpansion {
    f.apply_power(-s)
}

/// `(−Δ)^s w`, i.e. `λ_k^s w_k`.
pub fn spectral_apply(w: &SineExpansion, s: f64) -> SineExpansion {
    w.apply_power(s)
}

/// `(Σ λ_k^s w_k²)^{1/2}` for `s ∈ [−1, 1]`; negative `s` gives the dual norm
/// on the sine basis.
pub fn hs_norm(w: &SineExpansion, s: f64) -> f64 {
    w.coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| w.eigenvalue(i).powf(s) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Sine coefficients of the constant function 1 on the interval.
pub fn constant_one_interval(cutoff: usize) -> SineExpansion {
    SineExpansion::interval_from_fn(cutoff, |k| {
        if k % 2 == 1 {
            2f64.sqrt() * 2.0 / (k as f64 * PI)
        } else {
            0.0
        }
    })
}

/// Sine coefficients of the constant function 1 on the square.
pub fn constant_one_square(cutoff: usize) -> SineExpansion {
    SineExpansion::square_from_fn(cutoff, |m, n| {
        if m % 2 == 1 && n % 2 == 1 {
            2.0 * 4.0 / (m as f64 * n as f64 * PI * PI)
        } else {
            0.0
        }
    })
}

/// Profile `ψ(y) = 2^{1−s}/Γ(s) (√λ y)^s K_s(√λ y)` with `ψ(0) = 1`; the
/// α-harmonic extension of `φ` is `φ(x) ψ(y)`.
pub fn extension_profile(s: f64, lambda: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(1.0);
    }
    let z = lambda.sqrt() * y;
    let k = bessel_k_full(s, z)?;
    let c = 2f64.powf(1.0 - s) / gamma_fn(s)?;
    // z^s K_s(z) = z^s e^{-z} · scaled, combined in log space to survive large z
    Ok(c * (s * z.ln() - z).exp() * k.scaled)
}

/// `ψ'(y) = −2^{1−s}/Γ(s) √λ (√λ y)^s K_{1−s}(√λ y)`.
pub fn extension_profile_derivative(s: f64, lambda: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return invalid("profile derivative needs y > 0");
    }
    let z = lambda.sqrt() * y;
    let k = bessel_k_full(1.0 - s, z)?;
    let c = 2f64.powf(1.0 - s) / gamma_fn(s)?;
    Ok(-c * lambda.sqrt() * (s * z.ln() - z).exp() * k.scaled)
}

/// α-harmonic extension of `sin(πx)` (the solution for `f = π^{2s} sin(πx)`):
/// `U(x, y) = 2^{1−s}/Γ(s) (πy)^s K_s(πy) sin(πx)`.
pub fn exact_extension_1d(s: f64, x: f64, y: f64) -> Result<f64> {
    Ok((PI * x).sin() * extension_profile(s, PI * PI, y)?)
}

/// α-harmonic extension of `sin(πx₁) sin(πx₂)` on the square:
/// `U = 2^{1−s}/Γ(s) (√2πy)^s K_s(√2πy) sin(πx₁) sin(πx₂)`.
pub fn exact_extension_square(s: f64, x1: f64, x2: f64, y: f64) -> Result<f64> {
    Ok((PI * x1).sin() * (PI * x2).sin() * extension_profile(s, 2.0 * PI * PI, y)?)
}

/// `H^s` trace error together with the size of the truncated part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceError {
    pub value: f64,
    /// Contribution of the upper half of the retained modes, a proxy for the
    /// discarded tail.
    pub tail: f64,
    pub cutoff: usize,
}

impl TraceError {
    /// True when the tail proxy exceeds 1% of the error.
    pub fn cutoff_insufficient(&self) -> bool {
        self.tail > 0.01 * self.value
    }
}

/// `‖u − tr V‖_{H^s(Ω)}` with the sine coefficients of the piecewise
/// (bi)linear trace computed in closed form, up to the cutoff of `u_exact`.
pub fn trace_error_hs(mesh: &TensorMesh, v: &[f64], u_exact: &SineExpansion, s: f64) -> Result<TraceError> {
    trace_error_hs_with(mesh, v, u_exact, s, Exec::default())
}

pub fn trace_error_hs_with(
    mesh: &TensorMesh,
    v: &[f64],
    u_exact: &SineExpansion,
    s: f64,
    exec: Exec,
) -> Result<TraceError> {
    if v.len() != mesh.num_free() {
        return invalid("field vector does not match mesh");
    }
    trace_values_error_hs(mesh.base(), mesh.lines(), &mesh.trace(v), u_exact, s, exec)
}

/// As [`trace_error_hs_with`], for a trace given by its values at the
/// interior base vertices `lines`.
pub fn trace_values_error_hs(
    base: &BaseMesh,
    lines: &[usize],
    trace: &[f64],
    u_exact: &SineExpansion,
    s: f64,
    exec: Exec,
) -> Result<TraceError> {
    if trace.len() != lines.len() {
        return invalid("trace values do not match the vertex list");
    }
    let g = trace_sine_coefficients(base, lines, trace, u_exact.cutoff(), exec)?;
    if g.domain() != u_exact.domain() {
        return invalid("exact solution lives on a different domain than the mesh");
    }
    let e = u_exact.sub(&g)?;
    let n = e.cutoff();
    let weighted = |i: usize| e.eigenvalue(i).powf(s) * e.coeffs[i] * e.coeffs[i];
    let (total, upper) = match e.domain {
        Domain::Interval => {
            let total = exec.sum(n, weighted);
            let upper = exec.sum(n - n / 2, |j| weighted(n / 2 + j));
            (total, upper)
        }
        Domain::Square => {
            let total = exec.sum(n * n, weighted);
            let h = n / 2;
            let upper = exec.sum(n * n, |i| {
                let (m, k) = (i / n, i % n);
                if m >= h || k >= h {
                    weighted(i)
                } else {
                    0.0
                }
            });
            (total, upper)
        }
    };
    Ok(TraceError {
        value: total.sqrt(),
        tail: upper.sqrt(),
        cutoff: n,
    })
}

/// Sine coefficients (orthonormal basis) of the piecewise linear or bilinear
/// function with `values` at the interior vertices `lines` and zero on `∂Ω`.
pub fn trace_sine_coefficients(
    base: &BaseMesh,
    lines: &[usize],
    values: &[f64],
    cutoff: usize,
    exec: Exec,
) -> Result<SineExpansion> {
    match base {
        BaseMesh::Interval(m) => {
            let xs = m.vertices();
            let mut g = vec![0.0; xs.len()];
            for (&v, &val) in lines.iter().zip(values) {
                g[v] = val;
            }
            // slope jumps at interior vertices
            let mut nodes = Vec::new();
            let mut jumps = Vec::new();
            for i in 1..xs.len() - 1 {
                let left = (g[i] - g[i - 1]) / (xs[i] - xs[i - 1]);
                let right = (g[i + 1] - g[i]) / (xs[i + 1] - xs[i]);
                let j = right - left;
                if j != 0.0 {
                    nodes.push(xs[i]);
                    jumps.push(j);
                }
            }
            let sums = sine_sums(&nodes, &jumps, cutoff, exec);
            let coeffs = sums
                .iter()
                .enumerate()
                .map(|(i, sum)| {
                    let kp = (i + 1) as f64 * PI;
                    -2f64.sqrt() * sum / (kp * kp)
                })
                .collect();
            SineExpansion::new(Domain::Interval, cutoff, coeffs)
        }
        BaseMesh::Square { x, y } => {
            let hx = hat_sine_table(x.vertices(), cutoff, exec);
            let hy = hat_sine_table(y.vertices(), cutoff, exec);
            let nx = x.vertices().len() - 2;
            let ny = y.vertices().len() - 2;
            let stride = x.vertices().len();
            // G[j][i] for interior vertex (i+1, j+1)
            let mut grid = vec![0.0; nx * ny];
            for (&v, &val) in lines.iter().zip(values) {
                let (i, j) = (v % stride, v / stride);
                grid[(j - 1) * nx + (i - 1)] = val;
            }
            // T[j][m] = Σ_i G[j][i] hx[i][m]
            let mut t = vec![0.0; ny * cutoff];
            exec.chunks(&mut t, cutoff, |j, row| {
                for i in 0..nx {
                    let gji = grid[j * nx + i];
                    if gji == 0.0 {
                        continue;
                    }
                    let h = &hx[i * cutoff..(i + 1) * cutoff];
                    for (r, hv) in row.iter_mut().zip(h) {
                        *r += gji * hv;
                    }
                }
            });
            // C[m][n] = Σ_j T[j][m] hy[j][n]
            let mut coeffs = vec![0.0; cutoff * cutoff];
            exec.chunks(&mut coeffs, cutoff, |m, row| {
                for j in 0..ny {
                    let tjm = t[j * cutoff + m];
                    if tjm == 0.0 {
                        continue;
                    }
                    let h = &hy[j * cutoff..(j + 1) * cutoff];
                    for (r, hv) in row.iter_mut().zip(h) {
                        *r += tjm * hv;
                    }
                }
            });
            SineExpansion::new(Domain::Square, cutoff, coeffs)
        }
    }
}

/// `√2 ∫ φ_i sin(kπx) dx` for every interior hat `φ_i` and mode `k ≤ cutoff`,
/// stored `[i][k-1]`.
fn hat_sine_table(xs: &[f64], cutoff: usize, exec: Exec) -> Vec<f64> {
    let n = xs.len() - 2;
    let mut table = vec![0.0; n * cutoff];
    exec.chunks(&mut table, cutoff, |i, row| {
        let v = i + 1;
        let hl = xs[v] - xs[v - 1];
        let hr = xs[v + 1] - xs[v];
        let nodes = [xs[v - 1], xs[v], xs[v + 1]];
        let jumps = [1.0 / hl, -(1.0 / hl + 1.0 / hr), 1.0 / hr];
        let sums = sine_sums(&nodes, &jumps, cutoff, Exec::Serial);
        for (k, (r, sum)) in row.iter_mut().zip(sums).enumerate() {
            let kp = (k + 1) as f64 * PI;
            *r = -2f64.sqrt() * sum / (kp * kp);
        }
    });
    table
}

/// `S_k = Σ_i w_i sin(kπ x_i)` for `k = 1..=cutoff`, using the three-term
/// recurrence `sin((k+1)θ) = 2cos θ sin(kθ) − sin((k−1)θ)`, restarted from
/// direct evaluations at the start of every block of modes.
fn sine_sums(nodes: &[f64], weights: &[f64], cutoff: usize, exec: Exec) -> Vec<f64> {
    const BLOCK: usize = 1024;
    let mut out = vec![0.0; cutoff];
    exec.chunks(&mut out, BLOCK, |b, chunk| {
        let k0 = b * BLOCK + 1;
        for (&x, &w) in nodes.iter().zip(weights) {
            let theta = PI * x;
            let c2 = 2.0 * theta.cos();
            let mut prev = ((k0 - 1) as f64 * theta).sin();
            let mut cur = (k0 as f64 * theta).sin();
            for o in chunk.iter_mut() {
                *o += w * cur;
                let next = c2 * cur - prev;
                prev = cur;
                cur = next;
            }
        }
    });
    out
}
