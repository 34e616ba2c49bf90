//! Quadrature rules for smooth integrands in the base variables `x'`.
//!
//! Integrals in the extended variable `y` never go through here; they are
//! evaluated exactly by [`crate::assembly::shifted_moments`].

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const MAX_CACHED: usize = 32;

/// Gauss–Legendre nodes and weights on the unit interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    fn new(points: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(points).expect("at least one point"));
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_a^b f` with this rule mapped to `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + h * t))
            .sum::<f64>()
            * h
    }
}

/// Cached `points`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(points: usize) -> &'static UnitRule {
    static CACHE: [OnceLock<UnitRule>; MAX_CACHED] = [const { OnceLock::new() }; MAX_CACHED];
    assert!(
        (1..=MAX_CACHED).contains(&points),
        "Gauss rule with {points} points not cached"
    );
    CACHE[points - 1].get_or_init(|| UnitRule::new(points))
}

/// Adaptive double-exponential quadrature of `f` over `[a, b]` for integrands
/// that are smooth up to the endpoints.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, tol).integral
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_rule_is_exact_to_degree_seven() {
        let rule = gauss_legendre(4);
        for p in 0..=7 {
            let got = rule.integrate(0.0, 2.0, |x| x.powi(p));
            let exact = 2f64.powi(p + 1) / f64::from(p + 1);
            assert!((got - exact).abs() < 1e-13 * exact, "degree {p}");
        }
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_rule_on_smooth_integrand() {
        let got = integrate_adaptive(|y: f64| (-y * y).exp(), 0.0, 3.0, 1e-14);
        let want = 0.5 * std::f64::consts::PI.sqrt() * libm::erf(3.0);
        assert!((got - want).abs() < 1e-13);
    }
}
