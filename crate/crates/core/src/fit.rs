//! Ordinary least-squares line fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for an exact two-point fit).
    pub slope_stderr: f64,
    /// Root-mean-square residual.
    pub residual_rms: f64,
    pub samples: usize,
}

impl LinearFit {
    /// Approximate 95% interval for the slope.
    pub fn slope_interval(&self) -> (f64, f64) {
        let h = 1.96 * self.slope_stderr;
        (self.slope - h, self.slope + h)
    }
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        residual_rms: (ssr / nf).sqrt(),
        samples: n,
    })
}

/// Fit of `ln y` against `ln x`; every value must be positive.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(
            "log-log fit needs positive data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-14);
    }

    #[test]
    fn power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 5.0 * x.powf(-2.0)).collect();
        assert!((fit_log_log(&xs, &ys).unwrap().slope + 2.0).abs() < 1e-13);
        assert!(fit_log_log(&xs, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit_line(&[1.0], &[2.0]),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    proptest! {
        #[test]
        fn residuals_orthogonal(ys in prop::collection::vec(-10.0f64..10.0, 3..20)) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            let f = fit_line(&xs, &ys).unwrap();
            let r: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - f.intercept - f.slope * x).collect();
            prop_assert!(r.iter().sum::<f64>().abs() < 1e-9);
            prop_assert!(r.iter().zip(&xs).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-8);
        }
    }
}
