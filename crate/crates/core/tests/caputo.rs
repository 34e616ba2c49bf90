mod common;

use common::{loglog_slope, random_vec, rel_diff};
use fracext::assembly::{alpha_of, CylinderOperators};
use fracext::caputo::{
    discrete_frac_derivative, harmonic_extension, run_parabolic_with, CaputoWeights, Forcing, ParabolicConfig,
};
use fracext::data::Datum;
use fracext::mesh::{build_tensor, graded_points, uniform_base};
use fracext::special::{mittag_leffler, mittag_leffler_integral, mittag_leffler_series};
use fracext::Exec;

/// `δ^γ φ` at `t_{k+1}` for scalar samples of `φ` on the uniform grid.
fn l1_at(phi: impl Fn(f64) -> f64, gamma: f64, tau: f64, k: usize) -> f64 {
    let w = CaputoWeights::new(gamma, tau, k + 1).unwrap();
    let history: Vec<Vec<f64>> = (0..=k + 1).map(|j| vec![phi(j as f64 * tau)]).collect();
    discrete_frac_derivative(&history, &w, k).unwrap()[0]
}

#[test]
fn l1_is_exact_for_linear_functions() {
    for gamma in [0.2, 0.5, 0.8, 1.0] {
        for k in [0, 1, 7, 40] {
            let tau = 0.03;
            let t = (k + 1) as f64 * tau;
            let want = t.powf(1.0 - gamma) / libm::tgamma(2.0 - gamma);
            let got = l1_at(|t| 2.0 * t - 5.0, gamma, tau, k);
            assert!(rel_diff(got, 2.0 * want) < 1e-12, "γ={gamma} k={k}");
        }
    }
}

#[test]
fn l1_error_on_quadratic_decays_like_two_minus_gamma() {
    for gamma in [0.3, 0.6] {
        let exact = 2.0 / libm::tgamma(3.0 - gamma);
        let points: Vec<(f64, f64)> = [16, 32, 64, 128, 256]
            .iter()
            .map(|&k| {
                let tau = 1.0 / k as f64;
                (tau, (l1_at(|t| t * t, gamma, tau, k - 1) - exact).abs())
            })
            .collect();
        let slope = loglog_slope(&points);
        assert!((slope - (2.0 - gamma)).abs() < 0.05, "γ={gamma}: {slope}");
    }
}

#[test]
fn mittag_leffler_closed_forms() {
    for x in [0.0, 0.1, 0.7, 2.0, 5.0, 12.0] {
        assert!(
            rel_diff(mittag_leffler(1.0, -x).unwrap(), (-x).exp()) < 1e-12,
            "E_1({x})"
        );
        // E_{1/2}(−x) = exp(x²) erfc(x)
        let half = (x * x).exp() * libm::erfc(x);
        assert!(rel_diff(mittag_leffler(0.5, -x).unwrap(), half) < 1e-10, "E_1/2({x})");
    }
    for gamma in [0.25, 0.5, 0.9] {
        for x in [0.2, 0.6, 1.0] {
            let a = mittag_leffler_series(gamma, -x);
            let b = mittag_leffler_integral(gamma, x);
            assert!(rel_diff(a, b) < 1e-9, "γ={gamma} x={x}: {a} vs {b}");
        }
    }
}

#[test]
fn harmonic_extension_minimizes_energy_for_its_trace() {
    let s = 0.3;
    let mesh = build_tensor(uniform_base(1, 10).unwrap(), graded_points(6, 2.5, 1.5).unwrap());
    let ops = CylinderOperators::new(&mesh, alpha_of(s)).unwrap();
    let trace = random_vec(mesh.num_lines(), 77);
    let v = harmonic_extension(&mesh, &ops.stiffness, &trace).unwrap();
    assert_eq!(mesh.trace(&v), trace);
    let best = ops.stiffness.quad_form(&v);
    for seed in 0..5 {
        // same trace, arbitrary interior values
        let mut w = random_vec(mesh.num_free(), 100 + seed);
        for (l, t) in trace.iter().enumerate() {
            w[mesh.dof(l, 0)] = *t;
        }
        let mix: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + 0.1 * (b - a)).collect();
        assert!(ops.stiffness.quad_form(&w) > best);
        assert!(ops.stiffness.quad_form(&mix) > best);
    }
}

#[test]
fn stability_ledger_holds_for_forced_problems() {
    let mesh = build_tensor(uniform_base(1, 16).unwrap(), graded_points(4, 2.0, 1.9).unwrap());
    for gamma in [0.4, 1.0] {
        let cfg = ParabolicConfig {
            s: 0.5,
            gamma,
            final_time: 0.5,
            steps: 20,
            u0: Datum::first_mode(1, 1.0).unwrap(),
            forcing: Some(Forcing::steady(Datum::constant_one(1).unwrap())),
            cutoff: 2000,
            tol: 1e-12,
        };
        let run = run_parabolic_with(&mesh, &cfg, Exec::Serial).unwrap();
        assert_eq!(run.records.len(), 21);
        assert!(run.stability.holds, "γ={gamma}: {:?}", run.stability);
    }
}

#[test]
fn unforced_trace_decays() {
    // with f = 0 the exact trace norm decreases; the scheme should follow
    let mesh = build_tensor(uniform_base(1, 16).unwrap(), graded_points(4, 2.0, 1.9).unwrap());
    let cfg = ParabolicConfig {
        s: 0.6,
        gamma: 0.5,
        final_time: 1.0,
        steps: 16,
        u0: Datum::first_mode(1, 1.0).unwrap(),
        forcing: None,
        cutoff: 2000,
        tol: 1e-12,
    };
    let run = run_parabolic_with(&mesh, &cfg, Exec::Serial).unwrap();
    for w in run.records.windows(2) {
        assert!(w[1].trace_l2 < w[0].trace_l2, "step {}", w[1].step);
    }
}
