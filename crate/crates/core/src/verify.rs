//! Self-checks: determinant formula vs oracles, matching counts, band
//! derivative vs finite differences, eigenvalue localization, the `h_p`
//! bound and unitarity.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::charpoly::{
    det_bruteforce, det_formula_terms, enumerate_matchings, h_p_eval, matching_counts,
    tridiagonal_charpoly, JacobiSpec,
};
use crate::dynamics::{auto_sites, evolve, unitarity_defect, KernelSampler, LatticeState, Method};
use crate::error::{Error, Result};
use crate::floquet::{
    band_derivative, band_values_at, circle_samples, max_group_velocity, uniform_grid,
    verify_localization,
};
use crate::model::{Coupling, PeriodicPotential, DEFAULT_RHO0};

/// Relative tolerance of the determinant comparison.
pub const DET_TOLERANCE: f64 = 1e-10;
/// Relative tolerance of the band derivative where `|sin x|` is not small.
pub const DERIVATIVE_RELATIVE: f64 = 1e-6;
/// Absolute tolerance of the band derivative near `sin x = 0`.
pub const DERIVATIVE_ABSOLUTE: f64 = 1e-8;
pub const SIN_CUTOFF: f64 = 1e-3;
/// Step of the central difference.
pub const FD_STEP: f64 = 1e-4;
pub const ROW_SUM_TOLERANCE: f64 = 1e-8;
pub const NORM_DRIFT_TOLERANCE: f64 = 1e-10;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    /// Worst observed value of the suite's metric.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteResult {
    fn new(
        name: &str,
        checks: usize,
        failures: usize,
        worst: f64,
        tolerance: f64,
        detail: String,
    ) -> Self {
        Self {
            name: name.to_string(),
            passed: failures == 0,
            checks,
            failures,
            worst,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    pub det_sizes: Vec<usize>,
    /// Doubles one matching term in every formula evaluation so the
    /// determinant suite must fail.
    pub perturb_formula: bool,
    /// Size whose matching table is emitted.
    pub table_p: Option<usize>,
    pub rho0: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            trials: 1000,
            det_sizes: (2..=12).collect(),
            perturb_formula: false,
            table_p: Some(6),
            rho0: DEFAULT_RHO0,
        }
    }
}

/// One row of a matching table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingRow {
    pub k: usize,
    pub matching: String,
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
    pub table: Option<Vec<MatchingRow>>,
}

/// Random complex Jacobi matrix with entries uniform in the square
/// `[-2, 2] × [-2, 2]`.
pub fn random_jacobi(rng: &mut impl Rng, p: usize) -> JacobiSpec {
    let mut z = || Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let diag = (0..p).map(|_| z()).collect();
    let off = (0..p - 1).map(|_| z()).collect();
    JacobiSpec::new(diag, off).expect("lengths match by construction")
}

pub fn determinant_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut checks = 0;
    for &p in &opts.det_sizes {
        for _ in 0..opts.trials {
            let spec = random_jacobi(&mut rng, p);
            let terms = det_formula_terms(&spec)?;
            let mut formula: Complex64 = terms.iter().map(|(_, t)| t).sum();
            if opts.perturb_formula {
                // count one nonempty matching twice
                formula += terms.get(1).map_or(terms[0].1, |t| t.1);
            }
            let oracle = det_bruteforce(&spec);
            let rel = (formula - oracle).norm() / oracle.norm();
            worst = worst.max(rel);
            checks += 1;
            if !(rel <= DET_TOLERANCE) {
                failures += 1;
            }
        }
    }
    Ok(SuiteResult::new(
        "determinant",
        checks,
        failures,
        worst,
        DET_TOLERANCE,
        format!(
            "sizes {:?}, {} trials each, seed {}",
            opts.det_sizes, opts.trials, opts.seed
        ),
    ))
}

/// Fibonacci numbers `F(1) = F(2) = 1`.
pub fn fibonacci(n: usize) -> usize {
    let (mut a, mut b) = (0usize, 1usize);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

pub fn matching_count_suite(max_p: usize) -> SuiteResult {
    let mut failures = 0;
    let mut detail = Vec::new();
    for p in 1..=max_p {
        let counts = matching_counts(p);
        let total: usize = counts.iter().sum();
        if total != fibonacci(p + 1) {
            failures += 1;
        }
        if p == 6 {
            detail.push(format!("p=6 counts {counts:?}"));
            if counts != [1, 5, 6, 1] {
                failures += 1;
            }
        }
    }
    SuiteResult::new(
        "matching_counts",
        max_p,
        failures,
        failures as f64,
        0.0,
        detail.join("; "),
    )
}

/// Every matching of a `p×p` path with its determinant term.
pub fn matching_table(p: usize) -> Vec<MatchingRow> {
    enumerate_matchings(p)
        .into_iter()
        .enumerate()
        .flat_map(|(k, group)| {
            group.into_iter().map(move |m| MatchingRow {
                k,
                matching: m.label(),
                term: m.term_label(p),
            })
        })
        .collect()
}

/// `k,matching,term` CSV of [`matching_table`].
pub fn matching_table_csv(p: usize) -> String {
    let mut out = String::from("k,matching,term\n");
    for row in matching_table(p) {
        out.push_str(&format!(
            "{},\"{}\",\"{}\"\n",
            row.k, row.matching, row.term
        ));
    }
    out
}

/// The `x`-independent part of the characteristic polynomial as a
/// polynomial in `s = ζ - V_l`: `det(ζ - Ã) = P(s) - 2λ^p cos x`.
fn offset_poly(pot: &PeriodicPotential, lambda: f64, l: usize) -> Vec<f64> {
    let vl = pot.values()[l];
    let shifted: Vec<f64> = pot.values().iter().map(|v| v - vl).collect();
    let p = shifted.len();
    let inner = if p > 2 {
        &shifted[1..p - 1]
    } else {
        &shifted[..0]
    };
    tridiagonal_charpoly(&shifted, lambda)
        .sub(&tridiagonal_charpoly(inner, lambda).scale(Complex64::new(lambda * lambda, 0.0)))
        .coeffs
        .iter()
        .map(|c| c.re)
        .collect()
}

fn eval_real(c: &[f64], s: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &a in c.iter().rev() {
        d = d * s + v;
        v = v * s + a;
    }
    (v, d)
}

/// `(P(b) - P(a))/(b - a)` summed term by term, free of cancellation.
fn divided_difference(c: &[f64], a: f64, b: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| {
            let mut sum = 0.0;
            let mut ap = 1.0;
            for j in 0..k {
                sum += ap * b.powi((k - 1 - j) as i32);
                ap *= a;
            }
            ck * sum
        })
        .sum()
}

/// Central difference `(ζ_l(x+h) - ζ_l(x-h))/2h` computed without
/// subtracting nearly equal band values: the difference `δ` solves
/// `P[s₋, s₋+δ] δ = -4λ^p sin x sin h`.
pub fn fd_band_derivative(
    pot: &PeriodicPotential,
    lambda: f64,
    l: usize,
    x: f64,
    h: f64,
) -> Result<f64> {
    let p = pot.period();
    let c = offset_poly(pot, lambda, l);
    let lp = lambda.powi(p as i32);
    let target = 2.0 * lp * (x - h).cos();
    let mut s = band_values_at(pot, lambda, x - h)?[l] - pot.values()[l];
    for _ in 0..50 {
        let (v, d) = eval_real(&c, s);
        let step = (v - target) / d;
        s -= step;
        if step.abs() <= 2.0 * f64::EPSILON * s.abs() {
            break;
        }
    }
    let rhs = -4.0 * lp * x.sin() * h.sin();
    let mut delta = rhs / eval_real(&c, s).1;
    for _ in 0..100 {
        let next = rhs / divided_difference(&c, s, s + delta);
        let done = (next - delta).abs() <= 4.0 * f64::EPSILON * next.abs();
        delta = next;
        if done {
            break;
        }
    }
    if !delta.is_finite() {
        return Err(Error::NotConverged {
            value: delta,
            drift: f64::NAN,
        });
    }
    Ok(delta / (2.0 * h))
}

/// Default potential for period `p`: `(1, -1)` for two sites, `0..p-1`
/// otherwise.
pub fn default_potential(p: usize) -> Result<PeriodicPotential> {
    if p == 2 {
        Ok(PeriodicPotential::alternating())
    } else {
        PeriodicPotential::staircase(p)
    }
}

pub fn derivative_suite(periods: &[usize], nodes: usize, rho0: f64) -> Result<SuiteResult> {
    let mut failures = 0;
    let mut checks = 0;
    let mut worst = 0.0f64;
    for &p in periods {
        let pot = default_potential(p)?;
        let lambda = pot.constants(rho0)?.lambda0 / 2.0;
        for x in uniform_grid(nodes) {
            let bands = band_values_at(&pot, lambda, x)?;
            for l in 0..p {
                let formula = band_derivative(&pot, l, lambda, x, &bands)?;
                let fd = fd_band_derivative(&pot, lambda, l, x, FD_STEP)?;
                checks += 1;
                let ok = if x.sin().abs() > SIN_CUTOFF {
                    let rel = (formula - fd).abs() / fd.abs();
                    worst = worst.max(rel);
                    rel <= DERIVATIVE_RELATIVE
                } else {
                    (formula - fd).abs() <= DERIVATIVE_ABSOLUTE
                };
                if !ok {
                    failures += 1;
                }
            }
        }
    }
    Ok(SuiteResult::new(
        "band_derivative",
        checks,
        failures,
        worst,
        DERIVATIVE_RELATIVE,
        format!("p in {periods:?}, lambda = lambda0/2, {nodes} nodes, h = {FD_STEP}"),
    ))
}

pub fn localization_suite(periods: &[usize], samples: usize, rho0: f64) -> Result<SuiteResult> {
    let mut failures = 0;
    let mut checks = 0;
    let mut worst = 0.0f64;
    let zs = circle_samples(rho0, samples);
    for &p in periods {
        let pot = default_potential(p)?;
        let ledger = pot.constants(rho0)?;
        for lambda in [ledger.lambda0, ledger.lambda0 / 2.0, ledger.lambda0 / 10.0] {
            let report = verify_localization(&pot, lambda, &zs, &ledger)?;
            checks += report.entries.len();
            failures += report.failures;
            worst = worst.max(report.worst_ratio).max(report.worst_im_ratio);
        }
    }
    Ok(SuiteResult::new(
        "localization",
        checks,
        failures,
        worst,
        1.0,
        format!("p in {periods:?}, {samples} samples per circle, worst is deviation / budget"),
    ))
}

/// `(λ, ζ)` samples of the domain `λ ∈ [0, 1]`, `|ζ - V_j| ≤ γ/2`: `n`
/// values of `λ` times `n` points spread over the disks, including their
/// rims.
pub fn h_domain_samples(pot: &PeriodicPotential, n: usize) -> Vec<(f64, Complex64)> {
    let p = pot.period();
    let half = pot.gap() / 2.0;
    let rings = n.div_ceil(p);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let zetas: Vec<Complex64> = (0..n)
        .map(|k| {
            let r = half * ((k / p) + 1) as f64 / rings as f64;
            pot.values()[k % p] + Complex64::from_polar(r, golden * k as f64)
        })
        .collect();
    let lambdas = (0..n).map(|i| i as f64 / (n - 1).max(1) as f64);
    lambdas
        .flat_map(|lam| zetas.iter().map(move |&z| (lam, z)))
        .collect()
}

pub fn h_bound_suite(periods: &[usize], n: usize, rho0: f64) -> Result<SuiteResult> {
    let mut failures = 0;
    let mut checks = 0;
    let mut worst = 0.0f64;
    for &p in periods {
        let pot = default_potential(p)?;
        let bound = pot.constants(rho0)?.c;
        for (lam, zeta) in h_domain_samples(&pot, n) {
            let h = h_p_eval(&pot, lam, zeta)?.norm();
            checks += 1;
            worst = worst.max(h / bound);
            if !(h <= bound) {
                failures += 1;
            }
        }
    }
    Ok(SuiteResult::new(
        "h_bound",
        checks,
        failures,
        worst,
        1.0,
        format!("p in {periods:?}, {n}x{n} grid, worst is |h_p| / C"),
    ))
}

/// One parameter point of the unitarity suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitarityCase {
    pub p: usize,
    pub mu: f64,
    pub t: f64,
}

pub fn default_unitarity_cases() -> Vec<UnitarityCase> {
    vec![
        UnitarityCase {
            p: 2,
            mu: 3.0,
            t: 5.0,
        },
        UnitarityCase {
            p: 2,
            mu: 10.0,
            t: 20.0,
        },
        UnitarityCase {
            p: 3,
            mu: 5.0,
            t: 10.0,
        },
        UnitarityCase {
            p: 3,
            mu: 50.0,
            t: 100.0,
        },
        UnitarityCase {
            p: 4,
            mu: 5.0,
            t: 8.0,
        },
    ]
}

/// Row-sum defect `‖Σ_d K K† - I‖` of the block kernels and norm drift of
/// real-space evolution with both methods.
pub fn unitarity_suite(cases: &[UnitarityCase], rho0: f64) -> Result<SuiteResult> {
    let mut failures = 0;
    let mut checks = 0;
    let mut worst_row = 0.0f64;
    let mut worst_norm = 0.0f64;
    for case in cases {
        let pot = default_potential(case.p)?;
        let ledger = pot.constants(rho0)?;
        let coupling = Coupling::new(case.mu)?;
        let vg = max_group_velocity(&pot, &coupling, 256);
        let d_max = (2.0 * vg * case.t).ceil() as i64 + 40;
        let nodes = (4 * d_max as usize).max(256).next_multiple_of(2);
        let sampler = KernelSampler::new(&pot, &coupling, nodes)?;
        let defect = unitarity_defect(&sampler, case.t, d_max).defect;
        worst_row = worst_row.max(defect);
        checks += 1;
        if !(defect <= ROW_SUM_TOLERANCE) {
            failures += 1;
        }
        let sites = auto_sites(&pot, &coupling, case.t, &ledger);
        let psi0 = LatticeState::delta(sites, 0)?;
        for method in [Method::Chebyshev, Method::Eig] {
            let (_, stats) = evolve(&pot, &coupling, &psi0, case.t, method)?;
            worst_norm = worst_norm.max(stats.norm_drift);
            checks += 1;
            if !(stats.norm_drift <= NORM_DRIFT_TOLERANCE) {
                failures += 1;
            }
        }
    }
    Ok(SuiteResult::new(
        "unitarity",
        checks,
        failures,
        worst_row,
        ROW_SUM_TOLERANCE,
        format!("worst row-sum defect {worst_row:.3e}, worst norm drift {worst_norm:.3e}"),
    ))
}

/// Runs every suite.
pub fn run_all(opts: &VerifyOptions) -> Result<VerifyReport> {
    let suites = vec![
        determinant_suite(opts)?,
        matching_count_suite(20),
        derivative_suite(&[3, 4, 5], 256, opts.rho0)?,
        localization_suite(&[2, 3, 4, 5], 64, opts.rho0)?,
        h_bound_suite(&[3, 4, 5, 6], 32, opts.rho0)?,
        unitarity_suite(&default_unitarity_cases(), opts.rho0)?,
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport {
        suites,
        passed,
        table: opts.table_p.map(matching_table),
    })
}
