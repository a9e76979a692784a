use serde::{Deserialize, Serialize};

/// A smooth real function with an analytic derivative, used both for
/// potential variations `δv` and for extra terms of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    /// `Σ c_k x^k`, ascending.
    Polynomial { coeffs: Vec<f64> },
    /// `amplitude · exp(-(x - center)² / (2 width²))`.
    Bump {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    Constant { value: f64 },
    /// `amplitude · T_degree((x - c)/h)` for the interval `(lo, hi)` with center `c`, half width `h`.
    Chebyshev {
        lo: f64,
        hi: f64,
        degree: usize,
        amplitude: f64,
    },
}

impl Perturbation {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Perturbation::Polynomial { coeffs } => horner(coeffs, x),
            Perturbation::Bump {
                center,
                width,
                amplitude,
            } => {
                let d = (x - center) / width;
                amplitude * (-0.5 * d * d).exp()
            }
            Perturbation::Constant { value } => *value,
            Perturbation::Chebyshev {
                lo,
                hi,
                degree,
                amplitude,
            } => {
                let (c, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
                amplitude * cheb_t(*degree, (x - c) / h)
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Perturbation::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * x + c * k as f64;
                }
                acc
            }
            Perturbation::Bump {
                center,
                width,
                amplitude,
            } => {
                let d = (x - center) / width;
                -amplitude * d / width * (-0.5 * d * d).exp()
            }
            Perturbation::Constant { .. } => 0.0,
            Perturbation::Chebyshev {
                lo,
                hi,
                degree,
                amplitude,
            } => {
                if *degree == 0 {
                    return 0.0;
                }
                let (c, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
                amplitude * *degree as f64 * cheb_u(degree - 1, (x - c) / h) / h
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Perturbation {
        match self {
            Perturbation::Polynomial { coeffs } => Perturbation::Polynomial {
                coeffs: coeffs.iter().map(|c| c * s).collect(),
            },
            Perturbation::Bump {
                center,
                width,
                amplitude,
            } => Perturbation::Bump {
                center: *center,
                width: *width,
                amplitude: amplitude * s,
            },
            Perturbation::Constant { value } => Perturbation::Constant { value: value * s },
            Perturbation::Chebyshev {
                lo,
                hi,
                degree,
                amplitude,
            } => Perturbation::Chebyshev {
                lo: *lo,
                hi: *hi,
                degree: *degree,
                amplitude: amplitude * s,
            },
        }
    }

    /// Polynomial degree, or `None` for non-polynomial forms.
    pub fn degree(&self) -> Option<usize> {
        match self {
            Perturbation::Polynomial { coeffs } => {
                Some(coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0))
            }
            Perturbation::Constant { .. } => Some(0),
            Perturbation::Chebyshev { degree, .. } => Some(*degree),
            Perturbation::Bump { .. } => None,
        }
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn cheb_t(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = 2.0 * x * b - a;
        a = b;
        b = c;
    }
    b
}

fn cheb_u(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = 2.0 * x * b - a;
        a = b;
        b = c;
    }
    b
}
