//! Complex polynomials in the monomial basis and simultaneous (Aberth)
//! root finding.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial `Σ c_k ζ^k`, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `ζ - a`.
    pub fn linear(a: Complex64) -> Self {
        Self {
            coeffs: vec![-a, Complex64::new(1.0, 0.0)],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `Σ |c_k| |z|^k`, the scale against which rounding in `eval` is measured.
    pub fn abs_eval(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Poly::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(zero)
                        + other.coeffs.get(k).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `Π (ζ - r)` over the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Poly {
        roots
            .iter()
            .fold(Poly::constant(Complex64::new(1.0, 0.0)), |acc, &r| {
                acc.mul(&Poly::linear(r))
            })
    }

    /// Largest coefficient modulus.
    pub fn scale_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.norm()))
    }
}

const ABERTH_MAX_ITERATIONS: usize = 500;

/// All roots of a polynomial by the Aberth-Ehrlich iteration, started from
/// `seeds` (one per root). Each root is frozen once its backward error
/// `|P(ζ)| ≤ 64 ε Σ|c_k||ζ|^k` is reached.
pub fn aberth_roots(poly: &Poly, seeds: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = poly.degree();
    if seeds.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: seeds.len(),
        });
    }
    let mut roots = seeds.to_vec();
    // nudge coincident seeds apart; the correction term divides by their differences
    for i in 0..n {
        for j in 0..i {
            if roots[i] == roots[j] {
                let bump = 1e-8 * (1.0 + roots[i].norm()) * (i as f64 + 1.0);
                roots[i] += Complex64::new(bump, bump * 0.5);
            }
        }
    }
    let mut done = vec![false; n];
    let tol = |z: Complex64| 64.0 * f64::EPSILON * poly.abs_eval(z);

    for iter in 0..ABERTH_MAX_ITERATIONS {
        let mut all = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let z = roots[i];
            let (p, dp) = poly.eval_with_derivative(z);
            if p.norm() <= tol(z) {
                done[i] = true;
                continue;
            }
            all = false;
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (z - roots[j]))
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() > 0.0 {
                ratio / denom
            } else {
                ratio
            };
            if !step.re.is_finite() || !step.im.is_finite() {
                return Err(Error::RootFindingDivergence {
                    iterations: iter,
                    residual: p.norm(),
                });
            }
            roots[i] = z - step;
        }
        if all {
            return Ok(roots);
        }
    }
    let residual = roots
        .iter()
        .map(|&z| poly.eval(z).norm() / poly.abs_eval(z).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Err(Error::RootFindingDivergence {
        iterations: ABERTH_MAX_ITERATIONS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn from_roots_and_eval() {
        let p = Poly::from_roots(&[c(1.0, 0.0), c(-2.0, 0.0)]);
        assert_eq!(p.coeffs, vec![c(-2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(p.eval(c(3.0, 0.0)), c(10.0, 0.0));
        let (v, d) = p.eval_with_derivative(c(3.0, 0.0));
        assert_eq!((v, d), (c(10.0, 0.0), c(7.0, 0.0)));
    }

    #[test]
    fn aberth_recovers_known_roots() {
        let truth = [c(0.1, 0.2), c(1.05, -0.01), c(1.9, 0.0), c(3.0, 0.3)];
        let p = Poly::from_roots(&truth);
        let seeds = [c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let roots = aberth_roots(&p, &seeds).unwrap();
        for (r, t) in roots.iter().zip(&truth) {
            assert!((r - t).norm() < 1e-12, "{r} vs {t}");
        }
    }

    #[test]
    fn coincident_seeds_still_converge() {
        let p = Poly::from_roots(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let mut roots = aberth_roots(&p, &[c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((roots[0] + 1.0).norm() < 1e-12);
        assert!((roots[1] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn seed_count_must_match_degree() {
        let p = Poly::from_roots(&[c(1.0, 0.0)]);
        assert!(matches!(
            aberth_roots(&p, &[]),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
