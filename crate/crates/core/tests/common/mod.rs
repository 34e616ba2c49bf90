//! Brute-force oracles shared by the integration tests. Everything here works
//! from nodal values and pointwise evaluation, never from assembled matrices.
#![allow(dead_code)]

use fracext::mesh::TensorMesh;
use rand::{rngs::StdRng, RngExt, SeedableRng};

/// Double-exponential quadrature.
pub fn de(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, 1e-14).integral
}

/// `∫_c^d y^α g(y) dy`. Cells touching `y = 0` are integrated after the
/// substitution `y = t⁸`, which turns `y^α` and the `y^{−2α}` behavior of
/// extension gradients into vanishing powers of `t`; DE quadrature alone
/// loses digits on strong endpoint singularities.
pub fn de_weighted(g: impl Fn(f64) -> f64, c: f64, d: f64, alpha: f64) -> f64 {
    if c == 0.0 {
        const K: f64 = 8.0;
        de(|t| K * t.powf(K - 1.0 + K * alpha) * g(t.powf(K)), 0.0, d.powf(1.0 / K))
    } else {
        de(|y| y.powf(alpha) * g(y), c, d)
    }
}

/// `∫_c^d ∫_a^b y^α f(x, y) dx dy`, both directions by DE quadrature.
pub fn de2(f: impl Fn(f64, f64) -> f64, (a, b): (f64, f64), (c, d): (f64, f64), alpha: f64) -> f64 {
    de_weighted(|y| de(|x| f(x, y), a, b), c, d, alpha)
}

/// Bilinear finite element function on one cell of a 1D-base cylinder mesh.
pub struct CellField {
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Values at `(x0,y0), (x1,y0), (x0,y1), (x1,y1)`.
    pub v: [f64; 4],
}

impl CellField {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let s = (x - self.x.0) / (self.x.1 - self.x.0);
        let t = (y - self.y.0) / (self.y.1 - self.y.0);
        let [a, b, c, d] = self.v;
        a * (1.0 - s) * (1.0 - t) + b * s * (1.0 - t) + c * (1.0 - s) * t + d * s * t
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let (hx, hy) = (self.x.1 - self.x.0, self.y.1 - self.y.0);
        let s = (x - self.x.0) / hx;
        let t = (y - self.y.0) / hy;
        let [a, b, c, d] = self.v;
        let gx = ((b - a) * (1.0 - t) + (d - c) * t) / hx;
        let gy = ((c - a) * (1.0 - s) + (d - b) * s) / hy;
        (gx, gy)
    }
}

/// Cells of a 1D-base cylinder mesh carrying the field `v` (free DoFs).
pub fn cell_fields(mesh: &TensorMesh, v: &[f64]) -> Vec<CellField> {
    let base = mesh.base().as_interval().expect("interval base");
    let ys = mesh.interval().points();
    let nodal = mesh.to_nodal(v);
    let mut out = Vec::new();
    for c in 0..base.num_cells() {
        for k in 0..mesh.m() {
            let at = |vert: usize, lvl: usize| nodal[mesh.node(vert, lvl)];
            out.push(CellField {
                x: base.cell(c),
                y: (ys[k], ys[k + 1]),
                v: [at(c, k), at(c + 1, k), at(c, k + 1), at(c + 1, k + 1)],
            });
        }
    }
    out
}

/// `∫ y^α |∇V|²` by pointwise quadrature.
pub fn brute_energy(mesh: &TensorMesh, v: &[f64], alpha: f64) -> f64 {
    cell_fields(mesh, v)
        .iter()
        .map(|c| {
            de2(
                |x, y| {
                    let (gx, gy) = c.grad(x, y);
                    gx * gx + gy * gy
                },
                c.x,
                c.y,
                alpha,
            )
        })
        .sum()
}

/// `∫ y^α V²` by pointwise quadrature.
pub fn brute_mass(mesh: &TensorMesh, v: &[f64], alpha: f64) -> f64 {
    cell_fields(mesh, v)
        .iter()
        .map(|c| de2(|x, y| c.value(x, y).powi(2), c.x, c.y, alpha))
        .sum()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
