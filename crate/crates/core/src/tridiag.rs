//! Symmetric tridiagonal eigensolver (implicit-shift QL with Wilkinson-type
//! shifts), with eigenvector accumulation.

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 60;

/// Eigenpairs of a real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    /// Eigenvalues in the order produced by the iteration (not sorted).
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl TridiagEigen {
    /// Diagonalises the matrix with main diagonal `diag` and sub/super
    /// diagonal `off` (`off.len() == diag.len() - 1`).
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Ok(Self {
                values: Vec::new(),
                vectors: Vec::new(),
            });
        }
        if off.len() + 1 != n {
            return Err(Error::LengthMismatch {
                expected: n - 1,
                got: off.len(),
            });
        }
        let mut d = diag.to_vec();
        let mut e = off.to_vec();
        e.push(0.0);
        // rows of z are eigenvectors so every rotation touches two contiguous rows
        let mut z: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row
            })
            .collect();

        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > MAX_ITERATIONS {
                    return Err(Error::RootFindingDivergence {
                        iterations: iter,
                        residual: e[l].abs(),
                    });
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    let (lo, hi) = z.split_at_mut(i + 1);
                    rotate_rows(&mut lo[i], &mut hi[0], c, s);
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        Ok(Self {
            values: d,
            vectors: z,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalues sorted ascending.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

#[inline]
fn rotate_rows(zi: &mut [f64], zi1: &mut [f64], c: f64, s: f64) {
    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
        let f = *b;
        *b = s * *a + c * f;
        *a = c * *a - s * f;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut y = diag[i] * x[i];
                if i > 0 {
                    y += off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    #[test]
    fn free_laplacian_spectrum() {
        // Dirichlet chain: eigenvalues 2 cos(kπ/(n+1))
        let n = 50;
        let eig = TridiagEigen::new(&vec![0.0; n], &vec![1.0; n - 1]).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in eig.sorted_values().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenpairs_satisfy_equation_and_are_orthonormal() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| 3.0 * ((i % 3) as f64)).collect();
        let off = vec![1.0; n - 1];
        let eig = TridiagEigen::new(&diag, &off).unwrap();
        for (val, vec) in eig.values.iter().zip(&eig.vectors) {
            let hv = apply(&diag, &off, vec);
            let res = hv
                .iter()
                .zip(vec)
                .map(|(a, b)| (a - val * b).abs())
                .fold(0.0, f64::max);
            assert!(res < 1e-12, "residual {res}");
        }
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = eig.vectors[i]
                    .iter()
                    .zip(&eig.vectors[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_by_one_and_mismatch() {
        let eig = TridiagEigen::new(&[4.0], &[]).unwrap();
        assert_eq!(eig.values, vec![4.0]);
        assert!(TridiagEigen::new(&[1.0, 2.0], &[]).is_err());
    }
}
