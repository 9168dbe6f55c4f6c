//! Jacobi-matrix determinants via matchings of the path graph, the
//! characteristic polynomial of the scaled Floquet matrix and its split into
//! an unperturbed product plus an `O(λ²)` correction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::PeriodicPotential;
use crate::poly::Poly;

/// Largest size accepted by the matching-sum determinant.
pub const FORMULA_LIMIT: usize = 20;
/// Largest size handled by the cofactor-expansion oracle.
pub const COFACTOR_LIMIT: usize = 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Hermitian-pattern Jacobi matrix: diagonal `a`, `b_j` above the diagonal
/// and `conj(b_j)` below it.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSpec {
    pub diag: Vec<Complex64>,
    pub off: Vec<Complex64>,
}

impl JacobiSpec {
    pub fn new(diag: Vec<Complex64>, off: Vec<Complex64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty diagonal".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::LengthMismatch {
                expected: diag.len() - 1,
                got: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Dense matrix form.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let p = self.size();
        let mut m = vec![vec![ZERO; p]; p];
        for i in 0..p {
            m[i][i] = self.diag[i];
            if i + 1 < p {
                m[i][i + 1] = self.off[i];
                m[i + 1][i] = self.off[i].conj();
            }
        }
        m
    }
}

/// A set of pairs `{j, j+1}` (1-based `j`) that are mutually disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    pub pairs: Vec<usize>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    /// Whether site `m` (1-based) lies in one of the pairs.
    pub fn covers(&self, m: usize) -> bool {
        self.pairs.iter().any(|&j| m == j || m == j + 1)
    }

    /// Sites not covered by any pair.
    pub fn uncovered(&self, p: usize) -> Vec<usize> {
        (1..=p).filter(|&m| !self.covers(m)).collect()
    }

    pub fn is_valid(&self, p: usize) -> bool {
        self.pairs.iter().all(|&j| j >= 1 && j < p)
            && self.pairs.windows(2).all(|w| w[1] >= w[0] + 2)
    }

    /// Label like `Ω1,Ω3` (empty matching gives `∅`).
    pub fn label(&self) -> String {
        if self.pairs.is_empty() {
            return "∅".into();
        }
        self.pairs
            .iter()
            .map(|j| format!("Ω{j}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Symbolic term of the determinant expansion, e.g. `-|b1|^2 a3`.
    pub fn term_label(&self, p: usize) -> String {
        let mut parts: Vec<String> = self.pairs.iter().map(|j| format!("|b{j}|^2")).collect();
        parts.extend(self.uncovered(p).iter().map(|m| format!("a{m}")));
        let body = if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join(" ")
        };
        if self.size() % 2 == 1 {
            format!("-{body}")
        } else {
            body
        }
    }
}

/// All matchings of the path `1..p`, grouped by size `k = 0..=p/2`.
pub fn enumerate_matchings(p: usize) -> Vec<Vec<Matching>> {
    let mut groups = vec![Vec::new(); p / 2 + 1];
    let mut current = Vec::new();
    fn rec(start: usize, p: usize, current: &mut Vec<usize>, groups: &mut [Vec<Matching>]) {
        groups[current.len()].push(Matching {
            pairs: current.clone(),
        });
        for j in start..p {
            current.push(j);
            rec(j + 2, p, current, groups);
            current.pop();
        }
    }
    rec(1, p, &mut current, &mut groups);
    for g in &mut groups {
        g.sort();
    }
    groups
}

/// Number of matchings of each size.
pub fn matching_counts(p: usize) -> Vec<usize> {
    enumerate_matchings(p).iter().map(Vec::len).collect()
}

/// Contribution `Π(-b_j conj b_j) Π_{uncovered} a_m` of one matching.
pub fn matching_term(spec: &JacobiSpec, m: &Matching) -> Complex64 {
    let p = spec.size();
    let pair_part = m.pairs.iter().fold(ONE, |acc, &j| {
        acc * -(spec.off[j - 1] * spec.off[j - 1].conj())
    });
    m.uncovered(p)
        .iter()
        .fold(pair_part, |acc, &i| acc * spec.diag[i - 1])
}

/// Every matching with its contribution to the determinant.
pub fn det_formula_terms(spec: &JacobiSpec) -> Result<Vec<(Matching, Complex64)>> {
    let p = spec.size();
    if p > FORMULA_LIMIT {
        return Err(Error::FormulaTooLarge {
            p,
            limit: FORMULA_LIMIT,
        });
    }
    Ok(enumerate_matchings(p)
        .into_iter()
        .flatten()
        .map(|m| {
            let t = matching_term(spec, &m);
            (m, t)
        })
        .collect())
}

/// Determinant as the sum over matchings of the path graph.
pub fn det_formula(spec: &JacobiSpec) -> Result<Complex64> {
    Ok(det_formula_terms(spec)?.into_iter().map(|(_, t)| t).sum())
}

/// Three-term recurrence `D_k = a_k D_{k-1} - |b_{k-1}|² D_{k-2}`.
pub fn det_recurrence(spec: &JacobiSpec) -> Complex64 {
    let mut prev = ONE;
    let mut cur = spec.diag[0];
    for k in 1..spec.size() {
        let b2 = spec.off[k - 1] * spec.off[k - 1].conj();
        let next = spec.diag[k] * cur - b2 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Laplace expansion along rows, memoised over the set of used columns.
/// Works for any dense square matrix up to [`COFACTOR_LIMIT`] rows.
pub fn det_cofactor(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    assert!(
        n <= COFACTOR_LIMIT,
        "cofactor expansion limited to {COFACTOR_LIMIT}"
    );
    if n == 0 {
        return ONE;
    }
    // minor[mask] = determinant of rows (n - popcount(mask))..n restricted to columns in mask
    let full = (1usize << n) - 1;
    let mut minor = vec![ZERO; 1 << n];
    minor[0] = ONE;
    for mask in 1..=full {
        let row = n - (mask as u32).count_ones() as usize;
        let mut acc = ZERO;
        let mut sign_pos = 0usize;
        for col in 0..n {
            if mask & (1 << col) == 0 {
                continue;
            }
            let entry = m[row][col];
            if entry != ZERO {
                let sub = minor[mask & !(1 << col)];
                let term = entry * sub;
                acc += if sign_pos % 2 == 0 { term } else { -term };
            }
            sign_pos += 1;
        }
        minor[mask] = acc;
    }
    minor[full]
}

/// Reference determinant: cofactor expansion for small sizes, the
/// recurrence otherwise.
pub fn det_bruteforce(spec: &JacobiSpec) -> Complex64 {
    if spec.size() <= COFACTOR_LIMIT {
        det_cofactor(&spec.to_dense())
    } else {
        det_recurrence(spec)
    }
}

/// Characteristic polynomial of the tridiagonal block with diagonal
/// `ζ - values[i]` and off-diagonal `-λ`.
pub fn tridiagonal_charpoly(values: &[f64], lambda: f64) -> Poly {
    let l2 = Complex64::new(lambda * lambda, 0.0);
    let mut prev = Poly::constant(ONE);
    let mut cur = Poly::constant(ONE);
    for (k, &v) in values.iter().enumerate() {
        let next = if k == 0 {
            Poly::linear(Complex64::new(v, 0.0))
        } else {
            Poly::linear(Complex64::new(v, 0.0))
                .mul(&cur)
                .sub(&prev.scale(l2))
        };
        prev = cur;
        cur = next;
    }
    cur
}

/// Value of [`tridiagonal_charpoly`] at `ζ` by the scalar recurrence.
pub fn tridiagonal_det_at(values: &[f64], lambda: f64, zeta: Complex64) -> Complex64 {
    let l2 = lambda * lambda;
    let mut prev = ONE;
    let mut cur = ONE;
    for (k, &v) in values.iter().enumerate() {
        let next = if k == 0 {
            zeta - v
        } else {
            (zeta - v) * cur - prev * l2
        };
        prev = cur;
        cur = next;
    }
    cur
}

/// The inner sites `2..p-1`, empty for `p = 2`.
fn inner(values: &[f64]) -> &[f64] {
    &values[1..values.len() - 1]
}

/// Coefficients of `F(ζ) = det(ζI - Ã(λ, z))`, ascending in `ζ`.
pub fn charpoly_coeffs(pot: &PeriodicPotential, lambda: f64, z: Complex64) -> Result<Poly> {
    if z == ZERO {
        return Err(Error::ZeroCornerParameter);
    }
    let v = pot.values();
    let p = v.len();
    let outer = tridiagonal_charpoly(v, lambda);
    let inner_poly = tridiagonal_charpoly(inner(v), lambda);
    let corner = Complex64::new(lambda.powi(p as i32), 0.0) * (z + z.inv());
    Ok(outer
        .sub(&inner_poly.scale(Complex64::new(lambda * lambda, 0.0)))
        .sub(&Poly::constant(corner)))
}

/// `F(ζ)` evaluated directly by recurrences (no coefficient expansion).
pub fn charpoly_eval(
    pot: &PeriodicPotential,
    lambda: f64,
    z: Complex64,
    zeta: Complex64,
) -> Result<Complex64> {
    if z == ZERO {
        return Err(Error::ZeroCornerParameter);
    }
    let v = pot.values();
    let p = v.len();
    Ok(tridiagonal_det_at(v, lambda, zeta)
        - tridiagonal_det_at(inner(v), lambda, zeta) * (lambda * lambda)
        - (z + z.inv()) * lambda.powi(p as i32))
}

/// `H(ζ, λ)`: the `O(λ²)` part of the open-chain determinant divided by
/// `λ²`, summed over nonempty matchings.
pub fn matching_sum_h(pot: &PeriodicPotential, lambda: f64, zeta: Complex64) -> Result<Complex64> {
    let v = pot.values();
    let p = v.len();
    if p > FORMULA_LIMIT {
        return Err(Error::FormulaTooLarge {
            p,
            limit: FORMULA_LIMIT,
        });
    }
    let mut total = ZERO;
    for (k, group) in enumerate_matchings(p).iter().enumerate().skip(1) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let weight = sign * lambda.powi(2 * k as i32 - 2);
        let sum: Complex64 = group
            .iter()
            .map(|m| {
                m.uncovered(p)
                    .iter()
                    .fold(ONE, |acc, &i| acc * (zeta - v[i - 1]))
            })
            .sum();
        total += sum * weight;
    }
    Ok(total)
}

/// Whether `ζ` lies in some disk `|ζ - V_j| ≤ γ/2`.
pub fn in_domain(pot: &PeriodicPotential, zeta: Complex64) -> bool {
    let r = pot.gap() / 2.0;
    pot.values()
        .iter()
        .any(|&v| (zeta - v).norm() <= r * (1.0 + 1e-12))
}

/// `h_p(λ, ζ) = H(ζ, λ) - det(inner block)` on the domain
/// `λ ∈ [0, 1]`, `ζ` within `γ/2` of some `V_j`.
pub fn h_p_eval(pot: &PeriodicPotential, lambda: f64, zeta: Complex64) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    if !in_domain(pot, zeta) {
        return Err(Error::DomainViolation {
            re: zeta.re,
            im: zeta.im,
        });
    }
    let h = matching_sum_h(pot, lambda, zeta)?;
    Ok(h - tridiagonal_det_at(inner(pot.values()), lambda, zeta))
}

/// Pieces of `F = f + g` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPolySplit {
    /// `Π (ζ - V_n)`.
    pub f: Complex64,
    pub h_p: Complex64,
    /// `λ² h_p - λ^p (z + 1/z)`.
    pub g: Complex64,
    /// `det(ζI - Ã)` by recurrence.
    pub big_f: Complex64,
    /// `(F + λ^p(z + 1/z) - f) / λ²`, the correction recovered from `F`.
    /// `None` at `λ = 0`.
    pub h_p_from_f: Option<Complex64>,
}

impl CharPolySplit {
    /// `|F - f - g|`.
    pub fn residual(&self) -> f64 {
        (self.big_f - self.f - self.g).norm()
    }
}

pub fn charpoly_split(
    pot: &PeriodicPotential,
    lambda: f64,
    z: Complex64,
    zeta: Complex64,
) -> Result<CharPolySplit> {
    let p = pot.period();
    let f = pot.values().iter().fold(ONE, |acc, &v| acc * (zeta - v));
    let h_p = h_p_eval(pot, lambda, zeta)?;
    let corner = (z + z.inv()) * lambda.powi(p as i32);
    let g = h_p * (lambda * lambda) - corner;
    let big_f = charpoly_eval(pot, lambda, z, zeta)?;
    let h_p_from_f = (lambda != 0.0).then(|| (big_f + corner - f) / (lambda * lambda));
    Ok(CharPolySplit {
        f,
        h_p,
        g,
        big_f,
        h_p_from_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_spec(rng: &mut ChaCha8Rng, p: usize) -> JacobiSpec {
        let mut z = || c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let diag = (0..p).map(|_| z()).collect();
        let off = (0..p - 1).map(|_| z()).collect();
        JacobiSpec::new(diag, off).unwrap()
    }

    #[test]
    fn small_cases_match_hand_expansion() {
        let (a1, a2, a3) = (c(1.0, 0.5), c(-2.0, 0.1), c(0.3, -1.0));
        let (b1, b2) = (c(0.7, 0.2), c(-0.4, 1.1));
        let s2 = JacobiSpec::new(vec![a1, a2], vec![b1]).unwrap();
        let want2 = a1 * a2 - b1 * b1.conj();
        assert!((det_formula(&s2).unwrap() - want2).norm() < 1e-15);
        assert!((det_bruteforce(&s2) - want2).norm() < 1e-15);
        let s3 = JacobiSpec::new(vec![a1, a2, a3], vec![b1, b2]).unwrap();
        let want3 = a1 * a2 * a3 - b1.norm_sqr() * a3 - b2.norm_sqr() * a1;
        assert!((det_formula(&s3).unwrap() - want3).norm() < 1e-14);
    }

    #[test]
    fn zero_offdiagonal_gives_product() {
        let d = vec![c(2.0, 0.0), c(0.0, 3.0), c(-1.0, 1.0), c(0.5, 0.0)];
        let s = JacobiSpec::new(d.clone(), vec![ZERO; 3]).unwrap();
        let prod = d.iter().fold(ONE, |a, b| a * b);
        assert!((det_formula(&s).unwrap() - prod).norm() < 1e-15);
        let id = JacobiSpec::new(vec![ONE; 5], vec![ZERO; 4]).unwrap();
        assert_eq!(det_bruteforce(&id), ONE);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            JacobiSpec::new(vec![ONE; 3], vec![ONE; 3]),
            Err(Error::LengthMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn matching_table_for_six() {
        let groups = enumerate_matchings(6);
        let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![1, 5, 6, 1]);
        let labels: Vec<String> = groups[2].iter().map(Matching::label).collect();
        assert_eq!(
            labels,
            ["Ω1,Ω3", "Ω1,Ω4", "Ω1,Ω5", "Ω2,Ω4", "Ω2,Ω5", "Ω3,Ω5"]
        );
        assert_eq!(groups[2][4].term_label(6), "|b2|^2 |b5|^2 a1 a4");
        assert_eq!(groups[3][0].term_label(6), "-|b1|^2 |b3|^2 |b5|^2");
        assert_eq!(matching_counts(3), vec![1, 2]);
    }

    #[test]
    fn matching_counts_are_fibonacci() {
        // independent count: m(p) = m(p-1) + m(p-2) by whether site p is paired
        let mut dp = vec![1usize, 1];
        for p in 2..=16 {
            dp.push(dp[p - 1] + dp[p - 2]);
            let groups = enumerate_matchings(p);
            let total: usize = groups.iter().map(Vec::len).sum();
            assert_eq!(total, dp[p]);
            assert!(groups.iter().flatten().all(|m| m.is_valid(p)));
            let mut all: Vec<&Matching> = groups.iter().flatten().collect();
            all.dedup();
            assert_eq!(all.len(), total);
        }
    }

    #[test]
    fn formula_matches_oracles_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 2..=12 {
            for _ in 0..50 {
                let s = random_spec(&mut rng, p);
                let want = det_bruteforce(&s);
                let got = det_formula(&s).unwrap();
                assert!((got - want).norm() <= 1e-10 * want.norm(), "p={p}");
            }
        }
    }

    #[test]
    fn cofactor_and_recurrence_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = rng.random_range(1..=10);
            let s = random_spec(&mut rng, p.max(1));
            let a = det_cofactor(&s.to_dense());
            let b = det_recurrence(&s);
            assert!((a - b).norm() <= 1e-11 * b.norm().max(1.0));
        }
    }

    #[test]
    fn formula_guard() {
        let s = JacobiSpec::new(vec![ONE; 21], vec![ONE; 20]).unwrap();
        assert!(matches!(
            det_formula(&s),
            Err(Error::FormulaTooLarge { .. })
        ));
    }

    #[test]
    fn alternating_charpoly() {
        // ζ² - 1 - λ²(2 + z + 1/z)
        let pot = PeriodicPotential::alternating();
        let (lam, z) = (0.1, c(0.3, 1.2));
        let poly = charpoly_coeffs(&pot, lam, z).unwrap();
        let want0 = -ONE - (c(2.0, 0.0) + z + z.inv()) * (lam * lam);
        assert!((poly.coeffs[0] - want0).norm() < 1e-15);
        assert!(poly.coeffs[1].norm() < 1e-15);
        assert_eq!(poly.coeffs[2], ONE);
        let x = 0.8f64;
        let root = (1.0 + 2.0 * lam * lam * (1.0 + x.cos())).sqrt();
        let zx = c(x.cos(), x.sin());
        let p = charpoly_coeffs(&pot, lam, zx).unwrap();
        assert!(p.eval(c(root, 0.0)).norm() < 1e-14);
        assert!(p.eval(c(-root, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_lambda_gives_product_and_zero_corner_rejected() {
        let pot = PeriodicPotential::new(vec![0.0, 1.0, 2.5, -1.0]).unwrap();
        let poly = charpoly_coeffs(&pot, 0.0, c(1.5, 0.0)).unwrap();
        let want = Poly::from_roots(&[c(0.0, 0.0), c(1.0, 0.0), c(2.5, 0.0), c(-1.0, 0.0)]);
        for (a, b) in poly.coeffs.iter().zip(&want.coeffs) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(
            charpoly_coeffs(&pot, 0.1, ZERO),
            Err(Error::ZeroCornerParameter)
        );
        let s = charpoly_split(&pot, 0.0, c(1.0, 0.0), c(0.1, 0.0)).unwrap();
        assert_eq!(s.big_f - s.f, ZERO);
    }

    #[test]
    fn h_p_two_paths_agree_for_three() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let lam = rng.random_range(0.01..1.0);
            let j = rng.random_range(0..3) as f64;
            let r = rng.random_range(0.0..0.5);
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let zeta = c(j + r * th.cos(), r * th.sin());
            let z = c(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0));
            let s = charpoly_split(&pot, lam, z, zeta).unwrap();
            let alt = s.h_p_from_f.unwrap();
            assert!((alt - s.h_p).norm() <= 1e-10 * s.h_p.norm().max(1.0));
            assert!(s.residual() < 1e-12 * s.big_f.norm().max(1.0));
        }
    }

    #[test]
    fn h_p_domain_violation() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        assert!(matches!(
            h_p_eval(&pot, 0.1, c(0.5, 0.3)),
            Err(Error::DomainViolation { .. })
        ));
        assert!(h_p_eval(&pot, 0.1, c(0.5, 0.0)).is_ok());
    }

    #[test]
    fn alternating_h_is_minus_two() {
        let pot = PeriodicPotential::alternating();
        let h = h_p_eval(&pot, 0.3, c(1.2, 0.1)).unwrap();
        assert!((h + 2.0).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn charpoly_matches_dense_determinant(
            vals in prop::collection::vec(-3.0f64..3.0, 2..9),
            lam in 0.0f64..1.0,
            zr in 0.3f64..2.0,
            zth in 0.0f64..6.3,
            zre in -4.0f64..4.0,
            zim in -2.0f64..2.0,
        ) {
            let pot = match PeriodicPotential::new(vals) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            let p = pot.period();
            let z = Complex64::from_polar(zr, zth);
            let zeta = c(zre, zim);
            let mut m = nalgebra::DMatrix::<Complex64>::zeros(p, p);
            for i in 0..p {
                m[(i, i)] = zeta - pot.v(i + 1);
                if i + 1 < p {
                    m[(i, i + 1)] = c(-lam, 0.0);
                    m[(i + 1, i)] = c(-lam, 0.0);
                }
            }
            if p == 2 {
                m[(0, 1)] = -(ONE + z) * lam;
                m[(1, 0)] = -(ONE + z.inv()) * lam;
            } else {
                m[(0, p - 1)] = -z * lam;
                m[(p - 1, 0)] = -z.inv() * lam;
            }
            let dense = m.determinant();
            let poly = charpoly_coeffs(&pot, lam, z).unwrap();
            let scale = poly.abs_eval(zeta).max(1.0);
            prop_assert!((poly.eval(zeta) - dense).norm() <= 1e-10 * scale);
            let direct = charpoly_eval(&pot, lam, z, zeta).unwrap();
            prop_assert!((direct - dense).norm() <= 1e-10 * scale);
            // only z + 1/z enters
            let flipped = charpoly_coeffs(&pot, lam, z.inv()).unwrap();
            for (a, b) in poly.coeffs.iter().zip(&flipped.coeffs) {
                prop_assert!((a - b).norm() <= 1e-13 * scale);
            }
        }
    }
}
