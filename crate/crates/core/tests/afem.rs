mod common;

use std::f64::consts::PI;

use common::{de, de_weighted, rel_diff};
use fracext::afem::{
    afem_loop, dorfler_mark, estimate, indicator, matched_tensor, solve_extension, solve_star, stars, AfemConfig,
    StarContext,
};
use fracext::assembly::alpha_of;
use fracext::data::Datum;
use fracext::mesh::{build_tensor, graded_points, BaseMesh, IntervalMesh};
use fracext::sparse::{Cholesky, DenseMatrix};
use fracext::spectral::{constant_one_interval, spectral_solve};
use fracext::Exec;
use proptest::prelude::*;

/// Quadratic Lagrange function `j` on nodes `(a, (a+b)/2, b)`, with derivative.
fn lagrange2(a: f64, b: f64, j: usize, x: f64) -> (f64, f64) {
    let nodes = [a, 0.5 * (a + b), b];
    let (o1, o2) = match j {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (p, q, r) = (nodes[j], nodes[o1], nodes[o2]);
    let den = (p - q) * (p - r);
    ((x - q) * (x - r) / den, (2.0 * x - q - r) / den)
}

/// The three quadratic star functions in `x'` (midpoint of the left cell,
/// center vertex, midpoint of the right cell), with derivatives.
fn star_x(xs: [f64; 3], i: usize, x: f64) -> (f64, f64) {
    let left = x <= xs[1];
    match (i, left) {
        (0, true) => lagrange2(xs[0], xs[1], 1, x),
        (1, true) => lagrange2(xs[0], xs[1], 2, x),
        (1, false) => lagrange2(xs[1], xs[2], 0, x),
        (2, false) => lagrange2(xs[1], xs[2], 1, x),
        _ => (0.0, 0.0),
    }
}

/// Quadratic `y` functions: `2c` at vertex `c`, `2c+1` at the midpoint of cell
/// `c`; the top vertex is dropped.
fn star_y(ys: &[f64], k: usize, y: f64) -> (f64, f64) {
    let cell = ys.windows(2).position(|w| y <= w[1]).unwrap_or(ys.len() - 2);
    let (a, b) = (ys[cell], ys[cell + 1]);
    if k % 2 == 1 {
        return if k / 2 == cell {
            lagrange2(a, b, 1, y)
        } else {
            (0.0, 0.0)
        };
    }
    let vertex = k / 2;
    if vertex == cell {
        lagrange2(a, b, 0, y)
    } else if vertex == cell + 1 {
        lagrange2(a, b, 2, y)
    } else {
        (0.0, 0.0)
    }
}

/// `∫ φ(x) dx` over the star, split at the kinks.
fn star_integral(xs: [f64; 3], f: impl Fn(f64) -> f64) -> f64 {
    de(&f, xs[0], xs[1]) + de(&f, xs[1], xs[2])
}

/// `∫_0^Y y^α φ(y) dy`, split at the `y` mesh points.
fn y_integral(ys: &[f64], alpha: f64, f: impl Fn(f64) -> f64) -> f64 {
    ys.windows(2).map(|w| de_weighted(&f, w[0], w[1], alpha)).sum()
}

#[test]
fn star_problem_matches_independent_dense_solve() {
    let s = 0.35;
    let alpha = alpha_of(s);
    let base = IntervalMesh::from_vertices(vec![0.0, 0.45, 1.0]).unwrap();
    let mesh = build_tensor(BaseMesh::Interval(base.clone()), graded_points(3, 2.2, 1.4).unwrap());
    let fx = |x: f64| 1.0 + x * x;
    let datum = Datum::callable(1, move |p| fx(p[0])).unwrap();
    let v = solve_extension(&mesh, &datum, s, Exec::Serial).unwrap();

    let star = stars(&base)[0];
    let xs = star.x;
    let ys = mesh.interval().points().to_vec();
    let m = mesh.m();
    let nq = 2 * m;

    // bulk solution on the single line: V = v(y) · hat(x)
    let vy = |y: f64| -> (f64, f64) {
        let c = ys.windows(2).position(|w| y <= w[1]).unwrap_or(m - 1);
        let (a, b) = (ys[c], ys[c + 1]);
        let lo = v[mesh.dof(0, c)];
        let hi = if c + 1 < m { v[mesh.dof(0, c + 1)] } else { 0.0 };
        let t = (y - a) / (b - a);
        (lo * (1.0 - t) + hi * t, (hi - lo) / (b - a))
    };
    let hat = |x: f64| -> (f64, f64) {
        if x <= xs[1] {
            ((x - xs[0]) / (xs[1] - xs[0]), 1.0 / (xs[1] - xs[0]))
        } else {
            ((xs[2] - x) / (xs[2] - xs[1]), -1.0 / (xs[2] - xs[1]))
        }
    };

    let kx = |i: usize, j: usize| star_integral(xs, |x| star_x(xs, i, x).1 * star_x(xs, j, x).1);
    let mx = |i: usize, j: usize| star_integral(xs, |x| star_x(xs, i, x).0 * star_x(xs, j, x).0);
    let ky = |k: usize, l: usize| y_integral(&ys, alpha, |y| star_y(&ys, k, y).1 * star_y(&ys, l, y).1);
    let my = |k: usize, l: usize| y_integral(&ys, alpha, |y| star_y(&ys, k, y).0 * star_y(&ys, l, y).0);

    let n = 3 * nq;
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..3 {
        for j in 0..3 {
            let (kij, mij) = (kx(i, j), mx(i, j));
            for k in 0..nq {
                for l in 0..nq {
                    a[(i * nq + k, j * nq + l)] = kij * my(k, l) + mij * ky(k, l);
                }
            }
        }
    }
    let ds = 2f64.powf(1.0 - 2.0 * s) * libm::tgamma(1.0 - s) / libm::tgamma(s);
    let mut rhs = vec![0.0; n];
    for i in 0..3 {
        let hx_d = star_integral(xs, |x| hat(x).1 * star_x(xs, i, x).1);
        let hx_v = star_integral(xs, |x| hat(x).0 * star_x(xs, i, x).0);
        for k in 0..nq {
            let vy_v = y_integral(&ys, alpha, |y| vy(y).0 * star_y(&ys, k, y).0);
            let vy_d = y_integral(&ys, alpha, |y| vy(y).1 * star_y(&ys, k, y).1);
            rhs[i * nq + k] = -(hx_d * vy_v + hx_v * vy_d);
        }
        // only the y-vertex at 0 has a trace
        rhs[i * nq] += ds * star_integral(xs, |x| fx(x) * star_x(xs, i, x).0);
    }
    let eta = Cholesky::factor(&a).unwrap().solve(&rhs);
    let oracle: f64 = eta.iter().zip(&rhs).map(|(e, r)| e * r).sum();

    let ctx = StarContext::new(&mesh, &v, s, Exec::Serial).unwrap();
    let sol = solve_star(&ctx, &star, &fx).unwrap();
    assert!(rel_diff(sol.energy, oracle) < 1e-12, "{} vs {oracle}", sol.energy);
    let ind = indicator(&ctx, &star, &sol.eta).unwrap();
    assert!(rel_diff(ind * ind, oracle) < 1e-12);
    for (e, o) in sol.eta.iter().zip(&eta) {
        assert!((e - o).abs() < 1e-9 * eta.iter().map(|x| x.abs()).fold(0.0, f64::max));
    }
}

#[test]
fn indicators_are_homogeneous_of_degree_one() {
    let s = 0.6;
    let c = 3.5;
    let mesh = matched_tensor(IntervalMesh::uniform(8), 2.5).unwrap();
    let f = Datum::callable(1, |p| (PI * p[0]).sin() + p[0]).unwrap();
    let fc = Datum::callable(1, move |p| c * ((PI * p[0]).sin() + p[0])).unwrap();
    let v = solve_extension(&mesh, &f, s, Exec::Serial).unwrap();
    let vc: Vec<f64> = v.iter().map(|x| c * x).collect();
    let one = estimate(&mesh, &v, &f, s, Exec::Serial).unwrap();
    let scaled = estimate(&mesh, &vc, &fc, s, Exec::Serial).unwrap();
    for (a, b) in one.estimators.iter().zip(&scaled.estimators) {
        assert!(rel_diff(c * a, *b) < 1e-9);
    }
    for (a, b) in one.oscillations.iter().zip(&scaled.oscillations) {
        assert!(rel_diff(c * a, *b) < 1e-12 || (c * a - b).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn dorfler_marking_is_sufficient_and_monotone(
        totals in proptest::collection::vec(0.0f64..10.0, 1..40),
        t1 in 0.05f64..1.0,
        t2 in 0.05f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let sum: f64 = totals.iter().map(|t| t * t).sum();
        let a = dorfler_mark(&totals, lo).unwrap();
        let b = dorfler_mark(&totals, hi).unwrap();
        let marked = |set: &[usize]| set.iter().map(|&i| totals[i] * totals[i]).sum::<f64>();
        prop_assert!(marked(&a) >= lo * lo * sum * (1.0 - 1e-12));
        prop_assert!(marked(&b) >= hi * hi * sum * (1.0 - 1e-12));
        prop_assert!(a.len() <= b.len());
        prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
    }
}

fn afem_config(theta: f64, iterations: usize) -> AfemConfig {
    let s = 0.4;
    let f = Datum::constant_one(1).unwrap();
    let exact = spectral_solve(&constant_one_interval(4000), s);
    AfemConfig {
        s,
        f,
        theta,
        initial_cells: 4,
        grading: 3.0 / (2.0 * s),
        max_iterations: iterations,
        max_dofs: 1_000_000,
        exact: Some(exact),
        overkill: None,
    }
}

#[test]
fn full_marking_is_uniform_refinement() {
    let run = afem_loop(&afem_config(1.0, 4), Exec::Serial).unwrap();
    assert!(run.failure.is_none());
    let cells: Vec<usize> = run.records.iter().map(|r| r.cells).collect();
    assert_eq!(cells, vec![4, 8, 16, 32]);
    for r in &run.records {
        assert_eq!(r.marked.len(), r.cells - 1);
    }
}

#[test]
fn adaptive_errors_decrease() {
    let run = afem_loop(&afem_config(0.5, 8), Exec::Serial).unwrap();
    assert!(run.failure.is_none());
    let est: Vec<f64> = run.records.iter().map(|r| r.estimator).collect();
    let err: Vec<f64> = run.records.iter().map(|r| r.hs_error.unwrap()).collect();
    assert!(est.last().unwrap() < &(0.5 * est[0]), "{est:?}");
    assert!(err.last().unwrap() < &(0.5 * err[0]), "{err:?}");
    // allow small plateaus between steps, never growth beyond a few percent
    for w in est.windows(2) {
        assert!(w[1] < 1.05 * w[0], "{est:?}");
    }
}
