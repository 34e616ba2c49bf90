//! Problem data: a callable on `Ω` with an optional sine representation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::spectral::{constant_one_interval, constant_one_square, Domain, SineExpansion};

type Callable = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    /// `amplitude · sin(πx)` (or `sin(πx₁) sin(πx₂)`).
    FirstMode {
        amplitude: f64,
    },
    ConstantOne,
    Sine(SineExpansion),
    Callable(Callable),
}

/// Right-hand side or initial datum on the unit interval or square.
#[derive(Clone)]
pub struct Datum {
    domain: Domain,
    repr: Repr,
}

impl fmt::Debug for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::FirstMode { amplitude } => format!("FirstMode({amplitude})"),
            Repr::ConstantOne => "ConstantOne".into(),
            Repr::Sine(e) => format!("Sine(cutoff={})", e.cutoff()),
            Repr::Callable(_) => "Callable".into(),
        };
        write!(f, "Datum({:?}, {kind})", self.domain)
    }
}

fn domain_of(dim: usize) -> Result<Domain> {
    match dim {
        1 => Ok(Domain::Interval),
        2 => Ok(Domain::Square),
        d => Err(crate::Error::UnsupportedDimension(d)),
    }
}

impl Datum {
    /// `f = λ₁^s sin(πx)` in 1D, `(2π²)^s sin(πx₁) sin(πx₂)` in 2D: the data whose
    /// solution is the unnormalized first eigenfunction.
    pub fn first_eigen_source(dim: usize, s: f64) -> Result<Self> {
        let domain = domain_of(dim)?;
        let lambda = match domain {
            Domain::Interval => PI * PI,
            Domain::Square => 2.0 * PI * PI,
        };
        Ok(Self {
            domain,
            repr: Repr::FirstMode {
                amplitude: lambda.powf(s),
            },
        })
    }

    /// `amplitude · sin(πx)` (or the product of sines).
    pub fn first_mode(dim: usize, amplitude: f64) -> Result<Self> {
        Ok(Self {
            domain: domain_of(dim)?,
            repr: Repr::FirstMode { amplitude },
        })
    }

    pub fn constant_one(dim: usize) -> Result<Self> {
        Ok(Self {
            domain: domain_of(dim)?,
            repr: Repr::ConstantOne,
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::first_mode(dim, 0.0)
    }

    pub fn sine(expansion: SineExpansion) -> Self {
        Self {
            domain: expansion.domain(),
            repr: Repr::Sine(expansion),
        }
    }

    /// Arbitrary callable without a sine representation.
    pub fn callable(dim: usize, f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Ok(Self {
            domain: domain_of(dim)?,
            repr: Repr::Callable(Arc::new(f)),
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::FirstMode { amplitude } if amplitude == 0.0)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match &self.repr {
            Repr::FirstMode { amplitude } => match self.domain {
                Domain::Interval => amplitude * (PI * x[0]).sin(),
                Domain::Square => amplitude * (PI * x[0]).sin() * (PI * x[1]).sin(),
            },
            Repr::ConstantOne => 1.0,
            Repr::Sine(e) => e.evaluate(x),
            Repr::Callable(f) => f(x),
        }
    }

    /// True when the datum is a single eigenfunction (so norms and exact
    /// solutions need only one mode).
    pub fn single_mode(&self) -> bool {
        matches!(self.repr, Repr::FirstMode { .. })
    }

    /// Sine coefficients up to `cutoff` modes (per direction); `None` for
    /// callables. A stored expansion keeps its own cutoff.
    pub fn expansion(&self, cutoff: usize) -> Result<Option<SineExpansion>> {
        if cutoff == 0 {
            return invalid("cutoff must be positive");
        }
        Ok(match &self.repr {
            Repr::FirstMode { amplitude } => {
                // sin(πx) = φ₁/√2, sin sin = φ₁₁/2
                let c = match self.domain {
                    Domain::Interval => amplitude / 2f64.sqrt(),
                    Domain::Square => amplitude / 2.0,
                };
                Some(SineExpansion::first_mode(self.domain, cutoff, c))
            }
            Repr::ConstantOne => Some(match self.domain {
                Domain::Interval => constant_one_interval(cutoff),
                Domain::Square => constant_one_square(cutoff),
            }),
            Repr::Sine(e) => Some(e.clone()),
            Repr::Callable(_) => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_mode_expansion_evaluates_back() {
        let d = Datum::first_mode(1, 3.0).unwrap();
        let e = d.expansion(4).unwrap().unwrap();
        assert!((e.evaluate([0.3, 0.0]) - d.eval([0.3, 0.0])).abs() < 1e-14);
        let d2 = Datum::first_mode(2, 2.0).unwrap();
        let e2 = d2.expansion(3).unwrap().unwrap();
        assert!((e2.evaluate([0.3, 0.8]) - d2.eval([0.3, 0.8])).abs() < 1e-14);
    }

    #[test]
    fn constant_one_series_converges_pointwise() {
        let d = Datum::constant_one(1).unwrap();
        let e = d.expansion(20_001).unwrap().unwrap();
        assert!((e.evaluate([0.5, 0.0]) - 1.0).abs() < 1e-4);
        assert!(Datum::callable(1, |_| 2.0).unwrap().expansion(5).unwrap().is_none());
        assert!(Datum::constant_one(3).is_err());
    }
}
