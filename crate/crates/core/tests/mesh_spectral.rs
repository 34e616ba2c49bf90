mod common;

use std::f64::consts::PI;

use common::loglog_slope;
use fracext::mesh::{
    bisect_marked, default_grading, graded_points, matching_cells, truncation_height, uniform_base, IntervalMesh,
};
use fracext::spectral::{hs_norm, trace_values_error_hs, SineExpansion};
use fracext::Exec;
use proptest::prelude::*;

fn contains_all(fine: &[f64], coarse: &[f64]) -> bool {
    coarse.iter().all(|c| fine.iter().any(|f| f == c))
}

#[test]
fn uniform_refinement_is_nested() {
    let mut mesh = IntervalMesh::from_vertices(vec![0.0, 0.3, 0.35, 1.0]).unwrap();
    for _ in 0..4 {
        let fine = mesh.refine_uniform();
        assert_eq!(fine.num_cells(), 2 * mesh.num_cells());
        assert!(contains_all(fine.vertices(), mesh.vertices()));
        assert!((fine.max_width() - 0.5 * mesh.max_width()).abs() < 1e-15);
        mesh = fine;
    }
    let square = uniform_base(2, 3).unwrap();
    let fine = square.refine_uniform();
    assert_eq!(fine.num_cells(), 4 * square.num_cells());
    for v in 0..square.num_vertices() {
        let p = square.vertex(v);
        assert!((0..fine.num_vertices()).any(|w| fine.vertex(w) == p));
    }
}

#[test]
fn bisection_touches_only_marked_cells() {
    let mesh = IntervalMesh::uniform(5);
    let fine = bisect_marked(&fracext::mesh::BaseMesh::Interval(mesh.clone()), &[1, 4]).unwrap();
    let fine = fine.as_interval().unwrap();
    let want = [0.0, 0.2, 0.3, 0.4, 0.6, 0.8, 0.9, 1.0];
    assert_eq!(fine.vertices().len(), want.len());
    assert!(fine.vertices().iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
    assert_eq!(fine.generations(), &[0, 1, 1, 0, 0, 1, 1]);
    assert!(mesh.bisect(&[5]).is_err());
}

#[test]
fn truncation_height_and_matching_cells() {
    for n in [1usize, 4, 20, 1000] {
        assert!((truncation_height(n).unwrap() - (1.0 + (n as f64).ln() / 3.0)).abs() < 1e-15);
    }
    assert_eq!(matching_cells(64, 1), 64);
    assert_eq!(matching_cells(64, 2), 8);
    assert_eq!(matching_cells(50, 2), 7);
    assert!((default_grading(0.5).unwrap() - 3.15).abs() < 1e-15);
}

proptest! {
    #[test]
    fn graded_points_follow_the_power_map(m in 1usize..60, g in 0.5f64..8.0, y in 0.1f64..5.0) {
        let pts = graded_points(m, g, y).unwrap();
        let p = pts.points();
        prop_assert_eq!(p.len(), m + 1);
        prop_assert_eq!(p[0], 0.0);
        prop_assert_eq!(p[m], y);
        prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
        for (k, yk) in p.iter().enumerate() {
            let want = y * (k as f64 / m as f64).powf(g);
            prop_assert!((yk - want).abs() <= 1e-14 * y);
        }
        // graded cells grow away from y = 0 when the exponent exceeds one
        if g > 1.0 && m > 1 {
            let w = pts.widths();
            prop_assert!(w.windows(2).all(|c| c[0] <= c[1] * (1.0 + 1e-12)));
        }
    }
}

#[test]
fn hs_norm_of_a_few_modes() {
    // ‖Σ c_k φ_k‖²_{H^s} = Σ (kπ)^{2s} c_k²
    let u = SineExpansion::interval_from_fn(8, |k| if k <= 3 { 1.0 / k as f64 } else { 0.0 });
    let s = 0.35;
    let want: f64 = (1..=3)
        .map(|k| (k as f64 * PI).powf(2.0 * s) / (k * k) as f64)
        .sum::<f64>()
        .sqrt();
    assert!((hs_norm(&u, s) - want).abs() < 1e-13 * want);
}

#[test]
fn interpolation_error_in_hs_has_order_two_minus_s() {
    // u = sin(πx) + sin(2πx)/4 in the orthonormal basis √2 sin(kπx)
    let cutoff = 1 << 16;
    let u = SineExpansion::interval_from_fn(cutoff, |k| match k {
        1 => 1.0 / 2f64.sqrt(),
        2 => 0.25 / 2f64.sqrt(),
        _ => 0.0,
    });
    for s in [0.3, 0.7] {
        let points: Vec<(f64, f64)> = [64usize, 128, 256, 512]
            .iter()
            .map(|&n| {
                let base = uniform_base(1, n).unwrap();
                let lines = base.interior_vertices();
                let values: Vec<f64> = lines.iter().map(|&v| u.evaluate(base.vertex(v))).collect();
                let e = trace_values_error_hs(&base, &lines, &values, &u, s, Exec::Serial).unwrap();
                // the tail proxy is loose for s near one; bound the truncation directly
                assert!(e.tail < 0.05 * e.value);
                (1.0 / n as f64, e.value)
            })
            .collect();
        let slope = loglog_slope(&points);
        assert!((slope - (2.0 - s)).abs() < 0.05, "s={s}: {slope}");
    }
}
