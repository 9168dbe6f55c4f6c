//! Light-cone fronts, asymptotic velocities (band formula, bound and direct
//! evolution) and μ-scaling sweeps.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    auto_sites, position_moments, KernelSampler, LatticeState, Method, TruncatedHamiltonian,
    EIG_SITE_LIMIT, SPILL_EDGE, SPILL_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::fit::{fit_line, fit_log_log, LinearFit};
use crate::floquet::{hermitian_bands, max_group_velocity, DEFAULT_NODES};
use crate::model::{ConstantsLedger, Coupling, PeriodicPotential};

/// Default front threshold on `‖K(t, d)‖`.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Relative drift of `‖Xψ(t)‖/t` tolerated over the last quarter of a run.
pub const DRIFT_TOLERANCE: f64 = 0.02;
/// Samples of `‖Xψ(t)‖/t` taken in the last quarter of a run.
pub const DIRECT_SAMPLES: usize = 32;
/// Lowest kernel norm used in decay fits.
pub const NOISE_FLOOR: f64 = 1e-11;

/// Operator norms `‖K(t, d)‖` on a `(t, d)` grid with the front radius per time.
#[derive(Debug, Clone, Serialize)]
pub struct ConeProfile {
    pub times: Vec<f64>,
    pub d_max: i64,
    pub epsilon: f64,
    /// `norms[i][d + d_max]` at `times[i]`.
    pub norms: Vec<Vec<f64>>,
    /// `max{|d| : ‖K(t, d)‖ ≥ ε}` per time.
    pub fronts: Vec<i64>,
    /// Spatial decay rate beyond the front, averaged over times with enough
    /// points above the noise floor.
    pub eta_fit: Option<f64>,
    /// Per-time decay rates (`None` where there was nothing to fit).
    pub eta_per_time: Vec<Option<f64>>,
}

impl ConeProfile {
    pub fn norm(&self, i: usize, d: i64) -> f64 {
        self.norms[i][(d + self.d_max) as usize]
    }

    /// Largest norm over the whole grid.
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    /// `Σ_{|d| > v t} ‖K(t, d)‖²` at every time.
    pub fn tail_masses(&self, v: f64) -> Vec<f64> {
        self.times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                (-self.d_max..=self.d_max)
                    .filter(|d| (*d as f64).abs() > v * t.abs())
                    .map(|d| self.norm(i, d).powi(2))
                    .sum()
            })
            .collect()
    }
}

/// Squared tail mass below which values are treated as quadrature noise.
pub const TAIL_MASS_FLOOR: f64 = 1e-22;

/// Exponential decay in `t` of the kernel mass beyond `|d| > v t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailDecay {
    pub velocity: f64,
    /// `-d ln(mass)/dt`; positive when the tail shrinks.
    pub rate: f64,
    pub fit: LinearFit,
}

/// Fits `ln Σ_{|d| > v t} ‖K(t, d)‖²` against `t` over the samples above
/// [`TAIL_MASS_FLOOR`]; needs three of them.
pub fn tail_decay(profile: &ConeProfile, v: f64) -> Result<TailDecay> {
    let masses = profile.tail_masses(v);
    let (xs, ys): (Vec<f64>, Vec<f64>) = profile
        .times
        .iter()
        .zip(&masses)
        .filter(|(_, &m)| m > TAIL_MASS_FLOOR)
        .map(|(&t, &m)| (t, m.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: xs.len(),
        });
    }
    let fit = fit_line(&xs, &ys)?;
    Ok(TailDecay {
        velocity: v,
        rate: -fit.slope,
        fit,
    })
}

/// Builds the profile from a shared sampler.
pub fn cone_profile(
    sampler: &KernelSampler,
    times: &[f64],
    d_max: i64,
    epsilon: f64,
) -> Result<ConeProfile> {
    if !(epsilon > 1e-12 && epsilon < 1e-2) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (1e-12, 1e-2), got {epsilon}"
        )));
    }
    if d_max < 0 {
        return Err(Error::InvalidParameter("d_max must be non-negative".into()));
    }
    let ds: Vec<i64> = (-d_max..=d_max).collect();
    let norms: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| sampler.kernels(t, &ds).iter().map(|k| k.norm()).collect())
        .collect();
    let mut fronts = Vec::with_capacity(times.len());
    let mut eta_per_time = Vec::with_capacity(times.len());
    for (row, &t) in norms.iter().zip(times) {
        let front = ds
            .iter()
            .zip(row)
            .filter(|(_, &n)| n >= epsilon)
            .map(|(d, _)| d.abs())
            .max()
            .ok_or(Error::ThresholdNeverCrossed { t })?;
        fronts.push(front);
        let (xs, ys): (Vec<f64>, Vec<f64>) = ds
            .iter()
            .zip(row)
            .filter(|(d, &n)| d.abs() > front && n > NOISE_FLOOR)
            .map(|(d, &n)| (d.abs() as f64, n.ln()))
            .unzip();
        let eta = if xs.len() >= 3 {
            fit_line(&xs, &ys).ok().map(|f| -f.slope)
        } else {
            None
        };
        eta_per_time.push(eta);
    }
    let fitted: Vec<f64> = eta_per_time.iter().flatten().copied().collect();
    let eta_fit = (!fitted.is_empty()).then(|| fitted.iter().sum::<f64>() / fitted.len() as f64);
    Ok(ConeProfile {
        times: times.to_vec(),
        d_max,
        epsilon,
        norms,
        fronts,
        eta_fit,
        eta_per_time,
    })
}

/// Time samples, offset range and node count for a cone measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeGrid {
    pub times: Vec<f64>,
    pub d_max: i64,
    pub nodes: usize,
}

impl ConeGrid {
    /// `samples` times up to `t_max` where the fastest band has moved about
    /// `blocks` cells; offsets to twice that plus 40; at least 512 nodes and
    /// at least four per offset.
    pub fn auto(pot: &PeriodicPotential, coupling: &Coupling, blocks: f64, samples: usize) -> Self {
        let vg = max_group_velocity(pot, coupling, 256).max(1e-300);
        let t_max = blocks / vg;
        let times = (1..=samples)
            .map(|i| t_max * i as f64 / samples as f64)
            .collect();
        let d_max = (2.0 * vg * t_max).ceil() as i64 + 40;
        let nodes = DEFAULT_NODES.max((4 * d_max as usize).next_multiple_of(2));
        Self {
            times,
            d_max,
            nodes,
        }
    }
}

/// Number of leading time samples dropped from front fits.
pub fn transient_samples(v_lr: f64) -> usize {
    5usize.max((0.1 / v_lr).ceil() as usize)
}

/// Front velocity fit with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontFit {
    pub v_front: f64,
    pub interval: (f64, f64),
    pub fit: LinearFit,
    pub skipped: usize,
}

/// Least-squares slope of `d_front(t)` after dropping `skip` leading samples;
/// needs at least five remaining samples.
pub fn fit_front_velocity(profile: &ConeProfile, skip: usize) -> Result<FrontFit> {
    let n = profile.times.len().saturating_sub(skip);
    if n < 5 {
        return Err(Error::InsufficientSamples {
            needed: skip + 5,
            got: profile.times.len(),
        });
    }
    let xs = &profile.times[skip..];
    let ys: Vec<f64> = profile.fronts[skip..].iter().map(|&d| d as f64).collect();
    let fit = fit_line(xs, &ys)?;
    Ok(FrontFit {
        v_front: fit.slope,
        interval: fit.slope_interval(),
        fit,
        skipped: skip,
    })
}

/// The band-formula velocity in both readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactVelocity {
    /// `((1/2π)∫ ‖pμ Σ_ℓ ∂ζ_ℓ P_ℓ e₁‖² dx)^{1/2}`.
    pub variant_a: f64,
    /// `‖(1/2π)∫ pμ Σ_ℓ ∂ζ_ℓ P_ℓ e₁ dx‖`.
    pub variant_b: f64,
    /// Variant A divided by `p`: the spreading rate of the block index.
    pub variant_a_block: f64,
    pub variant_b_block: f64,
    pub nodes: usize,
}

pub fn v_asy_exact(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    nodes: usize,
    ledger: &ConstantsLedger,
) -> Result<ExactVelocity> {
    ledger.check_mu(coupling)?;
    let bands = hermitian_bands(pot, coupling.lambda(), nodes, ledger)?;
    let p = pot.period();
    let scale = p as f64 * coupling.mu();
    let mut sq = 0.0;
    let mut mean = vec![Complex64::new(0.0, 0.0); p];
    for node in 0..bands.nodes() {
        let mut w = vec![Complex64::new(0.0, 0.0); p];
        for l in 0..p {
            let v = bands.vectors[node].column(l);
            // ∂ζ_ℓ P_ℓ e₁ = ∂ζ_ℓ v_ℓ conj(v_ℓ[0])
            let coeff = v[0].conj() * bands.derivatives[node][l] * scale;
            for r in 0..p {
                w[r] += v[r] * coeff;
            }
        }
        sq += w.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for r in 0..p {
            mean[r] += w[r];
        }
    }
    let m = bands.nodes() as f64;
    let variant_a = (sq / m).sqrt();
    let variant_b = mean.iter().map(|z| (z / m).norm_sqr()).sum::<f64>().sqrt();
    Ok(ExactVelocity {
        variant_a,
        variant_b,
        variant_a_block: variant_a / p as f64,
        variant_b_block: variant_b / p as f64,
        nodes,
    })
}

/// `2πp²μ max|∂ζ|` and the closed-form bound `C₃/μ^{p-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperVelocity {
    pub v_asy_upper: f64,
    pub v_asy_bound: f64,
    pub max_derivative: f64,
    pub within_bound: bool,
}

pub fn v_asy_upper(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    nodes: usize,
    ledger: &ConstantsLedger,
) -> Result<UpperVelocity> {
    ledger.check_mu(coupling)?;
    let bands = hermitian_bands(pot, coupling.lambda(), nodes, ledger)?;
    let p = pot.period() as f64;
    let max_derivative = bands.max_abs_derivative();
    let upper = 2.0 * std::f64::consts::PI * p * p * coupling.mu() * max_derivative;
    let bound = ledger.v_asy_bound(coupling.mu());
    Ok(UpperVelocity {
        v_asy_upper: upper,
        v_asy_bound: bound,
        max_derivative,
        within_bound: upper <= bound,
    })
}

/// One sample of the direct velocity history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectSample {
    pub t: f64,
    pub x_block: f64,
    pub x_site: f64,
}

/// `‖Xψ(T)‖/T` from real-space evolution of `δ₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectVelocity {
    /// Mean of `‖Xψ(t)‖/t` over the last quarter, block units.
    pub v_block: f64,
    /// Same with the site-index operator.
    pub v_site: f64,
    /// `(max - min)/mean` of the block estimate over the last quarter.
    pub drift: f64,
    pub time: f64,
    pub sites: usize,
    pub method: Method,
    pub history: Vec<DirectSample>,
}

/// Picks the cheaper propagation method for `sites` sites up to time `t`.
pub fn choose_method(h: &TruncatedHamiltonian, t: f64) -> Method {
    let n = h.sites() as f64;
    if h.sites() > EIG_SITE_LIMIT {
        return Method::Chebyshev;
    }
    let (_, width) = h.spectral_interval();
    let eig_cost = 4.0 * n * n * n + DIRECT_SAMPLES as f64 * n * n;
    let cheb_cost = 1.2 * width * t * n * 8.0;
    if eig_cost < cheb_cost {
        Method::Eig
    } else {
        Method::Chebyshev
    }
}

/// Direct asymptotic velocity: evolves `δ₀` to `time`, samples `‖Xψ(t)‖/t`
/// over the last quarter and averages. Fails with `NotConverged` when the
/// samples drift by 2% or more.
pub fn v_asy_direct(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    time: f64,
    sites: Option<usize>,
    ledger: &ConstantsLedger,
) -> Result<DirectVelocity> {
    if !(time > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time must be positive, got {time}"
        )));
    }
    let sites = sites.unwrap_or_else(|| auto_sites(pot, coupling, time, ledger));
    let h = TruncatedHamiltonian::new(pot, coupling, sites)?;
    let psi0 = LatticeState::delta(sites, 0)?;
    let method = choose_method(&h, time);
    let p = pot.period();
    let sample_times: Vec<f64> = (0..DIRECT_SAMPLES)
        .map(|i| time * (0.75 + 0.25 * i as f64 / (DIRECT_SAMPLES - 1) as f64))
        .collect();
    let states: Vec<Vec<Complex64>> = match method {
        Method::Eig => {
            let prop = h.eigen_propagator()?;
            let coeffs = prop.coefficients(&psi0.amps);
            sample_times
                .iter()
                .map(|&t| prop.evolve_coefficients(&coeffs, t))
                .collect()
        }
        Method::Chebyshev => {
            let mut out = Vec::with_capacity(sample_times.len());
            let mut cur = psi0.amps.clone();
            let mut t_cur = 0.0;
            for &t in &sample_times {
                cur = h.chebyshev(&cur, t - t_cur)?.0;
                t_cur = t;
                out.push(cur.clone());
            }
            out
        }
    };
    let mut history = Vec::with_capacity(states.len());
    for (amps, &t) in states.into_iter().zip(&sample_times) {
        let state = LatticeState {
            half: psi0.half,
            amps,
        };
        let edge = state.edge_amplitude(SPILL_EDGE);
        if edge > SPILL_TOLERANCE {
            return Err(Error::BoundarySpill {
                amplitude: edge,
                edge: SPILL_EDGE,
            });
        }
        let m = position_moments(&state, p);
        history.push(DirectSample {
            t,
            x_block: m.x_norm_block() / t,
            x_site: m.x_norm_site() / t,
        });
    }
    let n = history.len() as f64;
    let v_block = history.iter().map(|s| s.x_block).sum::<f64>() / n;
    let v_site = history.iter().map(|s| s.x_site).sum::<f64>() / n;
    let hi = history
        .iter()
        .map(|s| s.x_block)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = history
        .iter()
        .map(|s| s.x_block)
        .fold(f64::INFINITY, f64::min);
    let drift = if v_block > 0.0 {
        (hi - lo) / v_block
    } else {
        0.0
    };
    if drift >= DRIFT_TOLERANCE {
        return Err(Error::NotConverged {
            value: v_block,
            drift,
        });
    }
    Ok(DirectVelocity {
        v_block,
        v_site,
        drift,
        time,
        sites,
        method,
        history,
    })
}

/// Margins of the direct and band-formula velocities below `C₂/μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrBoundCheck {
    pub v_lr_bound: f64,
    pub direct_margin: Option<f64>,
    pub exact_margin: Option<f64>,
    pub passed: bool,
}

/// Compares the measured velocities in a report against `C₂/μ`.
pub fn check_lr_bound(report: &VelocityReport) -> LrBoundCheck {
    let bound = report.v_lr_bound;
    let direct_margin = report.v_asy_direct.map(|v| bound - v);
    let exact_margin = report.v_asy_exact_a_block.map(|v| bound - v);
    let passed = direct_margin.is_none_or(|m| m >= 0.0) && exact_margin.is_none_or(|m| m >= 0.0);
    LrBoundCheck {
        v_lr_bound: bound,
        direct_margin,
        exact_margin,
        passed,
    }
}

/// Everything measured at one `μ`. Velocities in blocks per unit time unless
/// suffixed otherwise; the band-formula variants are reported as printed
/// (site units) and divided by `p` (block units).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityReport {
    pub mu: f64,
    pub p: usize,
    pub v_front: Option<f64>,
    pub v_front_interval: Option<(f64, f64)>,
    pub eta_fit: Option<f64>,
    pub v_lr_bound: f64,
    pub v_asy_exact_a: Option<f64>,
    pub v_asy_exact_b: Option<f64>,
    pub v_asy_exact_a_block: Option<f64>,
    pub v_asy_exact_b_block: Option<f64>,
    pub v_asy_upper: Option<f64>,
    pub v_asy_bound: f64,
    pub v_asy_direct: Option<f64>,
    pub v_asy_direct_site: Option<f64>,
    /// `"A"` or `"B"`: the variant closest to the direct measurement.
    pub flagged_variant: Option<String>,
    pub chain_holds: Option<bool>,
    pub variant_order_holds: Option<bool>,
    pub lr_bound_check: Option<LrBoundCheck>,
}

/// What a sweep computes at each `μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOptions {
    pub nodes: usize,
    pub epsilon: f64,
    /// Measure the cone front (kernel quadrature).
    pub front: bool,
    /// Front displacement in blocks at the last cone sample.
    pub front_blocks: f64,
    pub front_samples: usize,
    /// Direct evolution time as `coefficient · μ^power`; `None` skips it.
    pub direct_time: Option<(f64, f64)>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            epsilon: DEFAULT_EPSILON,
            front: false,
            front_blocks: 20.0,
            front_samples: 16,
            direct_time: None,
        }
    }
}

/// Builds the report at one `μ ≥ μ₀`.
pub fn velocity_report(
    pot: &PeriodicPotential,
    mu: f64,
    ledger: &ConstantsLedger,
    opts: &SweepOptions,
) -> Result<VelocityReport> {
    let coupling = Coupling::new(mu)?;
    ledger.check_mu(&coupling)?;
    let p = pot.period();
    let exact = v_asy_exact(pot, &coupling, opts.nodes, ledger)?;
    let upper = v_asy_upper(pot, &coupling, opts.nodes, ledger)?;
    let (v_front, v_front_interval, eta_fit) = if opts.front {
        let grid = ConeGrid::auto(pot, &coupling, opts.front_blocks, opts.front_samples);
        let sampler = KernelSampler::new(pot, &coupling, grid.nodes)?;
        let profile = cone_profile(&sampler, &grid.times, grid.d_max, opts.epsilon)?;
        let fit = fit_front_velocity(&profile, transient_samples(ledger.v_lr(mu)))?;
        (Some(fit.v_front), Some(fit.interval), profile.eta_fit)
    } else {
        (None, None, None)
    };
    let direct = match opts.direct_time {
        Some((coef, power)) => Some(v_asy_direct(
            pot,
            &coupling,
            coef * mu.powf(power),
            None,
            ledger,
        )?),
        None => None,
    };
    let flagged_variant = direct.as_ref().map(|d| {
        let ea = (exact.variant_a - d.v_site).abs();
        let eb = (exact.variant_b - d.v_site).abs();
        if ea <= eb { "A" } else { "B" }.to_string()
    });
    let chain = exact.variant_a <= upper.v_asy_upper && upper.within_bound;
    let mut report = VelocityReport {
        mu,
        p,
        v_front,
        v_front_interval,
        eta_fit,
        v_lr_bound: ledger.v_lr(mu),
        v_asy_exact_a: Some(exact.variant_a),
        v_asy_exact_b: Some(exact.variant_b),
        v_asy_exact_a_block: Some(exact.variant_a_block),
        v_asy_exact_b_block: Some(exact.variant_b_block),
        v_asy_upper: Some(upper.v_asy_upper),
        v_asy_bound: upper.v_asy_bound,
        v_asy_direct: direct.as_ref().map(|d| d.v_block),
        v_asy_direct_site: direct.as_ref().map(|d| d.v_site),
        flagged_variant,
        chain_holds: Some(chain),
        variant_order_holds: Some(exact.variant_a >= exact.variant_b * (1.0 - 1e-12)),
        lr_bound_check: None,
    };
    report.lr_bound_check = Some(check_lr_bound(&report));
    Ok(report)
}

/// Per-`μ` reports and fitted exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub p: usize,
    pub reports: Vec<VelocityReport>,
    pub exact_slope: LinearFit,
    pub front_slope: Option<LinearFit>,
    pub direct_slope: Option<LinearFit>,
    /// Expected exponent `-(p-1)`.
    pub expected_slope: f64,
    pub exact_monotone: bool,
}

/// Runs [`velocity_report`] for every `μ` (in parallel) and fits log-log
/// slopes. Needs at least four values, all `≥ μ₀`, spanning a decade.
pub fn scaling_sweep(
    pot: &PeriodicPotential,
    mus: &[f64],
    ledger: &ConstantsLedger,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if mus.len() < 4 {
        return Err(Error::InsufficientSamples {
            needed: 4,
            got: mus.len(),
        });
    }
    let lo = mus.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "mu values must span a decade, got [{lo}, {hi}]"
        )));
    }
    for &mu in mus {
        ledger.check_mu(&Coupling::new(mu)?)?;
    }
    let reports: Vec<VelocityReport> = mus
        .par_iter()
        .map(|&mu| velocity_report(pot, mu, ledger, opts))
        .collect::<Result<_>>()?;
    let exact: Vec<f64> = reports
        .iter()
        .map(|r| r.v_asy_exact_a.unwrap_or(0.0))
        .collect();
    let exact_slope = fit_log_log(mus, &exact)?;
    let front_slope = collect_slope(mus, reports.iter().map(|r| r.v_front));
    let direct_slope = collect_slope(mus, reports.iter().map(|r| r.v_asy_direct));
    let mut order: Vec<usize> = (0..mus.len()).collect();
    order.sort_by(|&a, &b| mus[a].total_cmp(&mus[b]));
    let exact_monotone = order.windows(2).all(|w| exact[w[1]] < exact[w[0]]);
    Ok(SweepResult {
        p: pot.period(),
        reports,
        exact_slope,
        front_slope,
        direct_slope,
        expected_slope: -(pot.period() as f64 - 1.0),
        exact_monotone,
    })
}

fn collect_slope(mus: &[f64], vals: impl Iterator<Item = Option<f64>>) -> Option<LinearFit> {
    let vals: Option<Vec<f64>> = vals.collect();
    vals.and_then(|v| fit_log_log(mus, &v).ok())
}

/// Log-log slope of the direct velocity over a list of `μ`, each evolved to
/// `coef · μ^power` (no `μ ≥ μ₀` requirement).
pub fn direct_scaling(
    pot: &PeriodicPotential,
    mus: &[f64],
    coef: f64,
    power: f64,
    ledger: &ConstantsLedger,
) -> Result<(Vec<DirectVelocity>, LinearFit)> {
    let runs: Vec<DirectVelocity> = mus
        .par_iter()
        .map(|&mu| {
            let coupling = Coupling::new(mu)?;
            v_asy_direct(pot, &coupling, coef * mu.powf(power), None, ledger)
        })
        .collect::<Result<_>>()?;
    let v: Vec<f64> = runs.iter().map(|r| r.v_block).collect();
    let slope = fit_log_log(mus, &v)?;
    Ok((runs, slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_front() {
        let times: Vec<f64> = (1..=12).map(|i| i as f64).collect();
        let profile = ConeProfile {
            fronts: times.iter().map(|t| (3.0 * t) as i64).collect(),
            times,
            d_max: 40,
            epsilon: 1e-6,
            norms: Vec::new(),
            eta_fit: None,
            eta_per_time: Vec::new(),
        };
        let fit = fit_front_velocity(&profile, 5).unwrap();
        assert!((fit.v_front - 3.0).abs() < 1e-12);
        assert!(matches!(
            fit_front_velocity(&profile, 9),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn transient_rule() {
        assert_eq!(transient_samples(100.0), 5);
        assert_eq!(transient_samples(0.01), 10);
    }

    #[test]
    fn cone_at_time_zero_and_flat_band() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let s = KernelSampler::new(&pot, &Coupling::new(5.0).unwrap(), 64).unwrap();
        let prof = cone_profile(&s, &[0.0], 5, 1e-6).unwrap();
        assert_eq!(prof.fronts, vec![0]);
        let flat = KernelSampler::new(&pot, &Coupling::without_hopping(5.0).unwrap(), 64).unwrap();
        let prof = cone_profile(&flat, &[1.0, 10.0, 100.0], 5, 1e-6).unwrap();
        assert_eq!(prof.fronts, vec![0, 0, 0]);
        assert!(cone_profile(&s, &[1.0], 5, 0.5).is_err());
    }

    #[test]
    fn flat_band_velocities_vanish() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let led = pot.constants(1.2).unwrap();
        let flat = Coupling::without_hopping(50.0).unwrap();
        let ex = v_asy_exact(&pot, &flat, 64, &led).unwrap();
        assert_eq!((ex.variant_a, ex.variant_b), (0.0, 0.0));
        assert_eq!(v_asy_upper(&pot, &flat, 64, &led).unwrap().v_asy_upper, 0.0);
        let d = v_asy_direct(&pot, &flat, 10.0, Some(101), &led).unwrap();
        assert_eq!(d.v_block, 0.0);
    }

    #[test]
    fn below_threshold_rejected() {
        let pot = PeriodicPotential::alternating();
        let led = pot.constants(1.2).unwrap();
        assert!(matches!(
            v_asy_exact(&pot, &Coupling::new(2.0).unwrap(), 64, &led),
            Err(Error::CouplingBelowThreshold { .. })
        ));
    }

    #[test]
    fn alternating_upper_bound_arithmetic() {
        let pot = PeriodicPotential::alternating();
        let led = pot.constants(1.2).unwrap();
        for mu in [led.mu0, 20.0, 80.0] {
            let u = v_asy_upper(&pot, &Coupling::new(mu).unwrap(), 512, &led).unwrap();
            assert!(u.v_asy_upper <= 8.0 * std::f64::consts::PI / mu * (1.0 + 1e-12));
            assert!(u.within_bound);
        }
    }

    #[test]
    fn sweep_preconditions() {
        let pot = PeriodicPotential::alternating();
        let led = pot.constants(1.2).unwrap();
        let o = SweepOptions::default();
        assert!(scaling_sweep(&pot, &[10.0, 20.0, 40.0], &led, &o).is_err());
        assert!(scaling_sweep(&pot, &[10.0, 20.0, 40.0, 50.0], &led, &o).is_err());
        assert!(scaling_sweep(&pot, &[5.0, 20.0, 40.0, 80.0], &led, &o).is_err());
    }
}
