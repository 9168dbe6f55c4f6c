//! Periodic potentials, coupling parameters, lattice indexing and the
//! closed-form constants that govern the light-cone and velocity bounds.
//!
//! The operator is `H = hopping * Δ + μ V` on `ℓ²(ℤ)`, where `Δψ(n) =
//! ψ(n+1) + ψ(n-1)` and `V` is `p`-periodic. Sites are grouped into blocks of
//! length `p`: site `n = p j + (m - 1)` is sublattice `m ∈ 1..=p` of block `j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default contour radius `ρ₀`.
pub const DEFAULT_RHO0: f64 = 1.2;

/// A non-degenerate `p`-periodic potential `V₁..V_p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicPotential {
    values: Vec<f64>,
    gap: f64,
    range: f64,
}

impl PeriodicPotential {
    /// Validates the values and computes the gap `γ` and range `Γ` over all
    /// pairs of distinct residues.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let p = values.len();
        if p < 2 {
            return Err(Error::PeriodTooSmall(p));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "potential value {bad} is not finite"
            )));
        }
        let mut gap = f64::INFINITY;
        let mut range = 0.0f64;
        for j in 0..p {
            for k in (j + 1)..p {
                let diff = (values[j] - values[k]).abs();
                if diff == 0.0 {
                    return Err(Error::DegeneratePotential {
                        first: j + 1,
                        second: k + 1,
                        value: values[j],
                    });
                }
                gap = gap.min(diff);
                range = range.max(diff);
            }
        }
        Ok(Self { values, gap, range })
    }

    /// The alternating potential `V_n = (-1)^n`, stored as `(V₁, V₂) = (+1, -1)`.
    pub fn alternating() -> Self {
        Self::new(vec![1.0, -1.0]).expect("alternating potential is valid")
    }

    /// `(0, 1, ..., p-1)`.
    pub fn staircase(p: usize) -> Result<Self> {
        Self::new((0..p).map(|v| v as f64).collect())
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    /// `V₁..V_p` (index 0 holds `V₁`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V_ℓ` for `ℓ ∈ 1..=p`.
    pub fn v(&self, l: usize) -> f64 {
        self.values[l - 1]
    }

    /// Potential at lattice site `n`, periodically extended.
    pub fn at_site(&self, n: i64) -> f64 {
        let p = self.period() as i64;
        self.values[n.rem_euclid(p) as usize]
    }

    /// `γ = min |V_j - V_k|`.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// `Γ = max |V_j - V_k|`.
    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_alternating(&self) -> bool {
        self.values == [1.0, -1.0]
    }

    /// The constants ledger at contour radius `rho0`.
    pub fn constants(&self, rho0: f64) -> Result<ConstantsLedger> {
        constants(self, rho0)
    }
}

/// Coupling of `H = hopping Δ + μ V`.
///
/// The physical model uses `hopping = 1`; `hopping = 0` is the flat-band
/// limit `λ = 0` where no propagation occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    mu: f64,
    hopping: f64,
}

impl Coupling {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {mu}"
            )));
        }
        Ok(Self { mu, hopping: 1.0 })
    }

    /// Coupling with `μ = 1/λ`.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Self::new(1.0 / lambda)
    }

    /// `H_{α,β} = αΔ + βV` with both parameters nonzero; a negative `β` is
    /// absorbed into the potential sign by the caller.
    pub fn generalized(alpha: f64, beta: f64) -> Result<Self> {
        if alpha == 0.0 {
            return Err(Error::ZeroHopping);
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "potential strength must be positive, got {beta}"
            )));
        }
        Ok(Self {
            mu: beta,
            hopping: alpha,
        })
    }

    /// Hopping switched off (`λ = 0`).
    pub fn without_hopping(mu: f64) -> Result<Self> {
        let mut c = Self::new(mu)?;
        c.hopping = 0.0;
        Ok(c)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    /// Scaled hopping `λ = hopping / μ`.
    pub fn lambda(&self) -> f64 {
        self.hopping / self.mu
    }
}

/// Result of [`rescale_coupling`]: `H_{α,μ}` at time `t` evolves like
/// `H_{1,μ'}` at time `time_factor * t` (up to the sign of `α`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaled {
    pub mu: f64,
    pub time_factor: f64,
}

/// `H_{α,μ} = α H_{1,μ/α}`; the sign of `α` is absorbed by the potential.
pub fn rescale_coupling(alpha: f64, mu: f64) -> Result<Rescaled> {
    if alpha == 0.0 {
        return Err(Error::ZeroHopping);
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {mu}"
        )));
    }
    Ok(Rescaled {
        mu: mu / alpha.abs(),
        time_factor: alpha.abs(),
    })
}

/// Site index `n = p j + (m - 1)` of sublattice `m` in block `j`.
pub fn site_index(j: i64, m: usize, p: usize) -> Result<i64> {
    if m < 1 || m > p {
        return Err(Error::SublatticeOutOfRange { m, p });
    }
    Ok(p as i64 * j + (m as i64 - 1))
}

/// Inverse of [`site_index`]: `(j, m)` with `m ∈ 1..=p`.
pub fn block_coords(n: i64, p: usize) -> (i64, usize) {
    let p = p as i64;
    (n.div_euclid(p), n.rem_euclid(p) as usize + 1)
}

/// Every constant entering the localization, light-cone and velocity bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsLedger {
    pub p: usize,
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub range: f64,
    pub rho0: f64,
    pub eta0: f64,
    /// Bound on `|h_p|`.
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub lambda0: f64,
    pub mu0: f64,
    /// `γ₀(λ₀)`.
    pub gamma0_at_lambda0: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
}

/// Evaluates the constants ledger for `pot` at contour radius `rho0 > 1`.
pub fn constants(pot: &PeriodicPotential, rho0: f64) -> Result<ConstantsLedger> {
    if !(rho0 > 1.0 && rho0.is_finite()) {
        return Err(Error::InvalidRadius(rho0));
    }
    let p = pot.period();
    let pi = p as i32;
    let gamma = pot.gap();
    let range = pot.range();
    let half_gap = gamma / 2.0;

    let c = 2f64.powi(pi) * (range + half_gap).powi(pi) + (range + half_gap + 2.0).powi(pi - 2);
    let c_hat = c + 2.0 * rho0 + 1.0 / (2.0 * rho0);
    let lambda0 = (half_gap.powi(pi) / (2.0 * c_hat)).min(1.0).sqrt();
    let mu0 = (2.0 * c_hat * (2.0 / gamma).powi(pi)).max(1.0).sqrt();
    let eta0 = rho0.ln();
    let c2 = c_hat / (eta0 * half_gap.powi(pi - 1));
    let c3 = 4.0 * std::f64::consts::PI * (p * p) as f64 * (2.0 / gamma).powi(pi - 1);

    let mut ledger = ConstantsLedger {
        p,
        gamma,
        range,
        rho0,
        eta0,
        c,
        c_hat,
        lambda0,
        mu0,
        gamma0_at_lambda0: 0.0,
        c2,
        c3,
    };
    ledger.gamma0_at_lambda0 = ledger.gamma0(lambda0);
    Ok(ledger)
}

impl ConstantsLedger {
    /// Rouché disk radius `γ₀(λ) = λ² Ĉ / (γ/2)^{p-1}`.
    pub fn gamma0(&self, lambda: f64) -> f64 {
        lambda * lambda * self.c_hat / (self.gamma / 2.0).powi(self.p as i32 - 1)
    }

    /// Lieb-Robinson velocity `C₂/μ` (blocks per unit time).
    pub fn v_lr(&self, mu: f64) -> f64 {
        self.c2 / mu
    }

    /// Asymptotic velocity bound `C₃/μ^{p-1}`.
    pub fn v_asy_bound(&self, mu: f64) -> f64 {
        self.c3 / mu.powi(self.p as i32 - 1)
    }

    /// Whether `λ ≤ λ₀` (within a few ulps).
    pub fn lambda_admissible(&self, lambda: f64) -> bool {
        lambda <= self.lambda0 * (1.0 + 4.0 * f64::EPSILON)
    }

    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        if self.lambda_admissible(lambda) {
            Ok(())
        } else {
            Err(Error::CouplingAboveThreshold {
                lambda,
                lambda0: self.lambda0,
            })
        }
    }

    pub fn check_mu(&self, coupling: &Coupling) -> Result<()> {
        if self.lambda_admissible(coupling.lambda().abs()) {
            Ok(())
        } else {
            Err(Error::CouplingBelowThreshold {
                mu: coupling.mu(),
                mu0: self.mu0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn alternating_gap_and_range() {
        let pot = PeriodicPotential::alternating();
        assert_eq!(pot.gap(), 2.0);
        assert_eq!(pot.range(), 2.0);
    }

    #[test]
    fn staircase_three() {
        let pot = PeriodicPotential::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(pot.gap(), 1.0);
        assert_eq!(pot.range(), 2.0);
    }

    #[test]
    fn degenerate_and_short_potentials_rejected() {
        assert!(matches!(
            PeriodicPotential::new(vec![1.0, 1.0, 2.0]),
            Err(Error::DegeneratePotential {
                first: 1,
                second: 2,
                ..
            })
        ));
        assert_eq!(
            PeriodicPotential::new(vec![3.0]),
            Err(Error::PeriodTooSmall(1))
        );
    }

    #[test]
    fn gap_scan_covers_non_adjacent_pairs() {
        // adjacent differences are all 2, but V₁ and V₃ are 0.5 apart
        let pot = PeriodicPotential::new(vec![0.0, 2.0, 0.5, 2.5]).unwrap();
        assert_eq!(pot.gap(), 0.5);
        assert_eq!(pot.range(), 2.5);
    }

    #[test]
    fn p2_constants() {
        let ledger = constants(&PeriodicPotential::alternating(), 1.2).unwrap();
        assert_eq!(ledger.c, 37.0);
        assert_relative_eq!(ledger.c_hat, 37.0 + 2.4 + 1.0 / 2.4, max_relative = 1e-15);
        assert_relative_eq!(ledger.c_hat, 39.8167, epsilon = 1e-4);
        assert_relative_eq!(ledger.c3, 16.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(ledger.lambda0 * ledger.mu0, 1.0, max_relative = 1e-14);
        assert_relative_eq!(ledger.eta0, 1.2f64.ln());
    }

    #[test]
    fn invalid_radius() {
        let pot = PeriodicPotential::alternating();
        assert_eq!(constants(&pot, 1.0), Err(Error::InvalidRadius(1.0)));
        assert!(constants(&pot, 0.5).is_err());
    }

    #[test]
    fn gamma0_at_lambda0_saturates_quarter_gap() {
        for values in [
            vec![1.0, -1.0],
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.3, 1.7, 0.9],
        ] {
            let ledger = constants(&PeriodicPotential::new(values).unwrap(), 1.2).unwrap();
            assert!(ledger.lambda0 < 1.0);
            assert_relative_eq!(
                ledger.gamma0_at_lambda0,
                ledger.gamma / 4.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn site_index_examples() {
        assert_eq!(site_index(0, 1, 4).unwrap(), 0);
        assert_eq!(site_index(0, 4, 4).unwrap(), 3);
        assert_eq!(site_index(1, 1, 4).unwrap(), 4);
        assert_eq!(site_index(-1, 2, 3).unwrap(), -2);
        assert_eq!(
            site_index(0, 0, 3),
            Err(Error::SublatticeOutOfRange { m: 0, p: 3 })
        );
        assert!(site_index(0, 4, 3).is_err());
    }

    #[test]
    fn site_index_round_trip() {
        for p in 2..6 {
            for j in -100..=100 {
                for m in 1..=p {
                    let n = site_index(j, m, p).unwrap();
                    assert_eq!(block_coords(n, p), (j, m));
                }
            }
        }
    }

    #[test]
    fn rescaling() {
        assert_eq!(
            rescale_coupling(1.0, 5.0).unwrap(),
            Rescaled {
                mu: 5.0,
                time_factor: 1.0
            }
        );
        assert_eq!(
            rescale_coupling(2.0, 10.0).unwrap(),
            Rescaled {
                mu: 5.0,
                time_factor: 2.0
            }
        );
        let mu = 8.0;
        let r = rescale_coupling(1.0 / mu, 1.0).unwrap();
        assert_relative_eq!(r.mu, mu);
        assert_relative_eq!(r.time_factor, 1.0 / mu);
        assert_eq!(rescale_coupling(0.0, 1.0), Err(Error::ZeroHopping));
        assert_eq!(rescale_coupling(-2.0, 10.0).unwrap().mu, 5.0);
    }

    #[test]
    fn coupling_lambda() {
        let c = Coupling::new(4.0).unwrap();
        assert_eq!(c.lambda(), 0.25);
        assert!(Coupling::new(0.0).is_err());
        assert_eq!(Coupling::generalized(0.0, 1.0), Err(Error::ZeroHopping));
        assert_eq!(Coupling::without_hopping(3.0).unwrap().lambda(), 0.0);
    }

    #[test]
    fn mu0_dominates_power_law_when_gap_small() {
        let pot = PeriodicPotential::new(vec![0.0, 0.01, 0.02]).unwrap();
        let ledger = constants(&pot, 1.2).unwrap();
        assert!(ledger.mu0 > (2.0 / pot.gap()).powf(1.5));
    }
}
