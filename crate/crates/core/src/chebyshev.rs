//! Chebyshev expansion of `e^{-iHt}` for a Hermitian operator with known
//! spectral bounds.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficient tail allowed beyond the truncation order.
pub const TAIL_TOLERANCE: f64 = 1e-12;
/// Largest `half_width · dt` handled in one expansion; longer times are
/// split into equal steps.
pub const MAX_STEP_ARGUMENT: f64 = 500.0;

/// `J_0(a), ..., J_kmax(a)` by Miller's backward recurrence normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(a: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if a == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = a.abs();
    let base = kmax.max(ax.ceil() as usize);
    let start = base + 30 + (40.0 * base as f64).sqrt() as usize;
    let start = start + start % 2;
    let mut next = 0.0f64;
    let mut cur = 1e-30f64;
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        // cur = J_k, next = J_{k+1} (unnormalized)
        if k <= kmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e200 {
            next *= 1e-200;
            cur *= 1e-200;
            norm *= 1e-200;
            for v in out.iter_mut() {
                *v *= 1e-200;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        // J_k(-a) = (-1)^k J_k(a)
        if a < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// Expansion coefficients and truncation data for one time step.
#[derive(Debug, Clone)]
pub struct ChebyshevSeries {
    /// `(2 - δ_{k0}) (-i)^k J_k(w dt)`.
    pub coeffs: Vec<Complex64>,
    /// Sum of coefficient moduli beyond the truncation order.
    pub tail: f64,
}

/// Coefficients for `e^{-i w dt X}` with `X` the rescaled operator, order
/// starting at `1.2·w dt + 40` and grown until the tail is below
/// [`TAIL_TOLERANCE`].
pub fn chebyshev_series(argument: f64) -> Result<ChebyshevSeries> {
    let mut order = (1.2 * argument.abs() + 40.0).ceil() as usize;
    for _ in 0..20 {
        let extra = 40 + order / 5;
        let j = bessel_j_sequence(argument, order + extra);
        let tail: f64 = j[order + 1..].iter().map(|v| 2.0 * v.abs()).sum();
        if tail < TAIL_TOLERANCE {
            let mut phase = Complex64::new(1.0, 0.0);
            let coeffs = j[..=order]
                .iter()
                .enumerate()
                .map(|(k, &jk)| {
                    let c = phase * jk * if k == 0 { 1.0 } else { 2.0 };
                    phase *= Complex64::new(0.0, -1.0);
                    c
                })
                .collect();
            return Ok(ChebyshevSeries { coeffs, tail });
        }
        order += order / 5 + 10;
    }
    Err(Error::NotConverged {
        value: argument,
        drift: f64::NAN,
    })
}

/// Statistics of a propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationStats {
    pub steps: usize,
    pub order: usize,
    pub tail: f64,
}

/// Propagates `psi` by `e^{-iHt}` where `apply(x, y)` writes `H x` into `y`
/// and the spectrum of `H` lies in `[center - half_width, center + half_width]`.
pub fn propagate<F>(
    apply: F,
    center: f64,
    half_width: f64,
    psi: &[Complex64],
    t: f64,
) -> Result<(Vec<Complex64>, PropagationStats)>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = psi.len();
    if t == 0.0 || n == 0 {
        return Ok((
            psi.to_vec(),
            PropagationStats {
                steps: 0,
                order: 0,
                tail: 0.0,
            },
        ));
    }
    if !(half_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spectral half-width must be positive, got {half_width}"
        )));
    }
    let steps = ((half_width * t.abs()) / MAX_STEP_ARGUMENT).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let series = chebyshev_series(half_width * dt)?;
    let center_phase = Complex64::from_polar(1.0, -center * dt);
    let scaled = |x: &[Complex64], y: &mut [Complex64]| {
        apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = (*yi - xi * center) / half_width;
        }
    };

    let mut state = psi.to_vec();
    let mut t_prev = vec![Complex64::new(0.0, 0.0); n];
    let mut t_cur = vec![Complex64::new(0.0, 0.0); n];
    let mut t_next = vec![Complex64::new(0.0, 0.0); n];
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..steps {
        t_prev.copy_from_slice(&state);
        for (a, x) in acc.iter_mut().zip(&t_prev) {
            *a = x * series.coeffs[0];
        }
        if series.coeffs.len() > 1 {
            scaled(&t_prev, &mut t_cur);
            for (a, x) in acc.iter_mut().zip(&t_cur) {
                *a += x * series.coeffs[1];
            }
        }
        for c in &series.coeffs[2.min(series.coeffs.len())..] {
            scaled(&t_cur, &mut t_next);
            for ((nx, pv), a) in t_next.iter_mut().zip(&t_prev).zip(acc.iter_mut()) {
                *nx = *nx * 2.0 - pv;
                *a += *nx * c;
            }
            std::mem::swap(&mut t_prev, &mut t_cur);
            std::mem::swap(&mut t_cur, &mut t_next);
        }
        for (s, a) in state.iter_mut().zip(&acc) {
            *s = a * center_phase;
        }
    }
    Ok((
        state,
        PropagationStats {
            steps,
            order: series.coeffs.len() - 1,
            tail: series.tail,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Power series `Σ (-1)^m (a/2)^{2m+k} / (m! (m+k)!)`, accurate for small `a`.
    fn bessel_series(k: usize, a: f64) -> f64 {
        let mut term = (0..k).fold(1.0, |acc, i| acc * (a / 2.0) / (i + 1) as f64);
        let mut sum = term;
        for m in 1..60 {
            term *= -(a / 2.0).powi(2) / (m as f64 * (m + k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_reference_values() {
        let j1 = bessel_j_sequence(1.0, 5);
        assert!((j1[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j1[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j10 = bessel_j_sequence(10.0, 6);
        assert!((j10[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j10[5] + 0.234_061_528_186_793_6).abs() < 1e-14);
        let j100 = bessel_j_sequence(100.0, 100);
        assert!((j100[100] - 0.096_366_673_295_861_55).abs() < 1e-13);
        assert_eq!(bessel_j_sequence(0.0, 3), vec![1.0, 0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn bessel_matches_series(a in 0.01f64..6.0) {
            let j = bessel_j_sequence(a, 12);
            for (k, v) in j.iter().enumerate() {
                prop_assert!((v - bessel_series(k, a)).abs() < 1e-13);
            }
        }

        #[test]
        fn bessel_parseval(a in 0.1f64..800.0) {
            // J_0² + 2 Σ J_k² = 1
            let kmax = (a * 1.5) as usize + 60;
            let j = bessel_j_sequence(a, kmax);
            let s = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn series_tail_is_small() {
        for arg in [0.5, 10.0, 137.0, 500.0] {
            let s = chebyshev_series(arg).unwrap();
            assert!(s.tail < TAIL_TOLERANCE);
            assert!(s.coeffs.len() as f64 >= arg);
        }
    }

    #[test]
    fn two_level_rabi_oscillation() {
        // H = [[0, 1], [1, 0]]: e^{-iHt} e1 = (cos t, -i sin t)
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            y[0] = x[1];
            y[1] = x[0];
        };
        let psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        for t in [0.3, 7.0, 1234.5] {
            let (out, stats) = propagate(apply, 0.0, 1.0, &psi, t).unwrap();
            assert!((out[0] - Complex64::new(t.cos(), 0.0)).norm() < 1e-11);
            assert!((out[1] - Complex64::new(0.0, -t.sin())).norm() < 1e-11);
            assert!(stats.tail < TAIL_TOLERANCE);
        }
    }

    #[test]
    fn shifted_spectrum_phase() {
        // H = diag(5, 7): pure phases
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            y[0] = x[0] * 5.0;
            y[1] = x[1] * 7.0;
        };
        let psi = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let t = 3.3;
        let (out, _) = propagate(apply, 6.0, 1.0, &psi, t).unwrap();
        assert!((out[0] - psi[0] * Complex64::from_polar(1.0, -5.0 * t)).norm() < 1e-12);
        assert!((out[1] - psi[1] * Complex64::from_polar(1.0, -7.0 * t)).norm() < 1e-12);
        let (same, _) = propagate(apply, 6.0, 1.0, &psi, 0.0).unwrap();
        assert_eq!(same, psi.to_vec());
    }
}
