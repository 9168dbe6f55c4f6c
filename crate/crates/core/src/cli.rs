//! Command-line front end: one subcommand per experiment, each writing CSV,
//! JSON and gnuplot files atomically into the output directory plus a
//! report whose checks decide the exit status.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::dynamics::{
    auto_sites, evolve, position_moments, unitarity_defect, AlternatingCoefficients, KernelSampler,
    LatticeState, Method, TruncatedHamiltonian, CLOSED_FORM_NODES, KERNEL_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::floquet::{circle_samples, hermitian_bands, max_group_velocity, verify_localization};
use crate::linalg::max_abs_diff;
use crate::model::{ConstantsLedger, Coupling, PeriodicPotential};
use crate::velocity::{
    check_lr_bound, choose_method, cone_profile, fit_front_velocity, scaling_sweep, tail_decay,
    transient_samples, velocity_report, ConeGrid,
};
use crate::verify::{matching_table, run_all, VerifyOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest block norm accepted as `≤ 1`.
pub const NORM_SLACK: f64 = 1e-10;
/// Row-sum defect accepted for computed kernels.
pub const DEFECT_TOLERANCE: f64 = 1e-8;
/// Largest closed-form vs quadrature difference for the alternating chain.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-8;
/// Norm drift accepted for real-space evolution.
pub const NORM_DRIFT_TOLERANCE: f64 = 1e-10;
/// Slope tolerance for the band-formula exponent.
pub const EXACT_SLOPE_TOLERANCE: f64 = 0.1;
/// Relative agreement expected between the flagged variant and direct evolution.
pub const VARIANT_AGREEMENT: f64 = 0.1;

/// One numeric claim with its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `"<="`, `">="`, `">"` or `"|value-reference|<="`.
    pub relation: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `value ≤ reference + tolerance`.
    pub fn le(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            relation: "<=".into(),
            value,
            reference,
            tolerance,
            passed: value <= reference + tolerance,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, reference: f64) -> Self {
        Self {
            name: name.into(),
            relation: ">=".into(),
            value,
            reference,
            tolerance: 0.0,
            passed: value >= reference,
        }
    }

    pub fn gt(name: impl Into<String>, value: f64, reference: f64) -> Self {
        Self {
            name: name.into(),
            relation: ">".into(),
            value,
            reference,
            tolerance: 0.0,
            passed: value > reference,
        }
    }

    pub fn near(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            relation: "|value-reference|<=".into(),
            value,
            reference,
            tolerance,
            passed: (value - reference).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub error: String,
}

/// Everything a command produced. Contains no timings, so reruns with the
/// same configuration give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub results: Map<String, Value>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub failures: Vec<StageFailure>,
    pub passed: bool,
}

impl RunReport {
    fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: VERSION.into(),
            config: config.clone(),
            results: Map::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
            failures: Vec::new(),
            passed: true,
        }
    }

    fn absorb(&mut self, name: &str, stage: Stage) {
        self.results.insert(name.into(), stage.results);
        self.checks.extend(stage.checks);
        self.warnings.extend(stage.warnings);
        self.refresh();
    }

    fn refresh(&mut self) {
        self.passed = self.failures.is_empty() && self.checks.iter().all(|c| c.passed);
    }
}

/// Output directory, wall-clock timings and the list of files written.
#[derive(Debug)]
pub struct Session {
    pub out: PathBuf,
    pub quiet: bool,
    pub timings: BTreeMap<String, f64>,
    pub written: Vec<PathBuf>,
}

impl Session {
    pub fn new(out: impl Into<PathBuf>, quiet: bool) -> Self {
        Self {
            out: out.into(),
            quiet,
            timings: BTreeMap::new(),
            written: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.write(name, &bytes)
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.timings
            .insert(stage.into(), start.elapsed().as_secs_f64());
        out
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Default)]
struct Stage {
    results: Value,
    checks: Vec<Check>,
    warnings: Vec<String>,
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn setup(cfg: &RunConfig) -> Result<(PeriodicPotential, ConstantsLedger)> {
    cfg.validate()?;
    let pot = cfg.potential()?;
    let ledger = pot.constants(cfg.rho0)?;
    Ok((pot, ledger))
}

fn stage_constants(cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    let (pot, ledger) = setup(cfg)?;
    let mut st = Stage::default();
    let mut mus = vec![cfg.mu];
    mus.extend(cfg.mus.iter().copied().filter(|m| *m != cfg.mu));
    let mut requested = Vec::new();
    for &mu in &mus {
        let admissible = mu >= ledger.mu0;
        if !admissible {
            st.warnings.push(format!(
                "mu = {mu} is below mu0 = {}; the light-cone and velocity bounds are not guaranteed there",
                ledger.mu0
            ));
        }
        st.checks.push(Check::ge(
            format!("mu_at_least_mu0[mu={mu}]"),
            mu,
            ledger.mu0,
        ));
        requested.push(json!({
            "mu": mu,
            "lambda": 1.0 / mu,
            "admissible": admissible,
            "v_lr_bound": ledger.v_lr(mu),
            "v_asy_bound": ledger.v_asy_bound(mu),
        }));
    }
    let p = pot.period() as f64;
    let gap_scale = (2.0 / ledger.gamma).powf(p / 2.0);
    let results = json!({
        "ledger": ledger,
        "requested": requested,
        "gap_scale": gap_scale,
        "mu0_exceeds_gap_scale": ledger.mu0 > gap_scale,
    });
    s.write_json("constants.json", &results)?;
    st.results = results;
    Ok(st)
}

fn stage_bands(cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    let (pot, ledger) = setup(cfg)?;
    let lambda = cfg.coupling()?.lambda();
    let bands = hermitian_bands(&pot, lambda, cfg.nodes, &ledger)?;
    let p = pot.period();
    let mut header = vec!["x".to_string()];
    header.extend((1..=p).map(|l| format!("zeta_{l}")));
    header.extend((1..=p).map(|l| format!("dzeta_{l}")));
    let rows: Vec<Vec<String>> = (0..bands.nodes())
        .map(|k| {
            let mut row = vec![num(bands.grid[k])];
            row.extend(bands.values[k].iter().copied().map(num));
            row.extend(bands.derivatives[k].iter().copied().map(num));
            row
        })
        .collect();
    s.write_csv("bands.csv", &header, &rows)?;
    let loc = verify_localization(&pot, lambda, &circle_samples(cfg.rho0, 64), &ledger)?;
    s.write("localization.json", loc.to_json().as_bytes())?;
    Ok(Stage {
        results: json!({
            "lambda": lambda,
            "nodes": bands.nodes(),
            "max_abs_derivative": bands.max_abs_derivative(),
            "localization": {
                "samples": loc.entries.len(),
                "failures": loc.failures,
                "worst_ratio": loc.worst_ratio,
                "worst_im_ratio": loc.worst_im_ratio,
            },
        }),
        checks: vec![Check::le(
            "localization_failures",
            loc.failures as f64,
            0.0,
            0.0,
        )],
        warnings: Vec::new(),
    })
}

/// Offsets reached by the fastest band by time `t`, plus 40 blocks.
fn auto_d_max(pot: &PeriodicPotential, coupling: &Coupling, t: f64) -> i64 {
    (2.0 * max_group_velocity(pot, coupling, 256) * t).ceil() as i64 + 40
}

fn stage_kernel(cfg: &RunConfig, s: &mut Session, with_entries: bool) -> Result<Stage> {
    let (pot, _) = setup(cfg)?;
    let coupling = cfg.coupling()?;
    let t = cfg.t;
    let d_max = cfg.d_max.unwrap_or_else(|| auto_d_max(&pot, &coupling, t));
    let nodes = cfg.nodes.max((4 * d_max as usize).next_multiple_of(2));
    let ds: Vec<i64> = (-d_max..=d_max).collect();
    let sampler = KernelSampler::new(&pot, &coupling, nodes)?;
    let kernels = sampler.kernels(t, &ds);
    let doubled = KernelSampler::new(&pot, &coupling, 2 * nodes)?.kernels(t, &ds);
    let change = kernels
        .iter()
        .zip(&doubled)
        .map(|(a, b)| max_abs_diff(&a.matrix, &b.matrix))
        .fold(0.0, f64::max);
    let defect = unitarity_defect(&sampler, t, d_max).defect;
    let norms: Vec<f64> = kernels.iter().map(|k| k.norm()).collect();
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let p = pot.period();
    let mut header = vec!["d".to_string(), "norm".to_string()];
    for l in 1..=p {
        for m in 1..=p {
            header.push(format!("abs_{l}{m}"));
        }
    }
    let rows: Vec<Vec<String>> = kernels
        .iter()
        .zip(&norms)
        .map(|(k, &n)| {
            let mut row = vec![k.d.to_string(), num(n)];
            for l in 0..p {
                for m in 0..p {
                    row.push(num(k.matrix[(l, m)].norm()));
                }
            }
            row
        })
        .collect();
    s.write_csv("kernel.csv", &header, &rows)?;
    if with_entries {
        let entries: Vec<Value> = kernels
            .iter()
            .map(|k| {
                let part = |f: fn(&num_complex::Complex64) -> f64| -> Vec<Vec<f64>> {
                    (0..p)
                        .map(|l| (0..p).map(|m| f(&k.matrix[(l, m)])).collect())
                        .collect()
                };
                json!({"d": k.d, "re": part(|z| z.re), "im": part(|z| z.im)})
            })
            .collect();
        s.write_json(
            "kernel_entries.json",
            &json!({"t": t, "nodes": nodes, "blocks": entries}),
        )?;
    }
    let mut checks = vec![
        Check::le("kernel_node_doubling_change", change, KERNEL_TOLERANCE, 0.0),
        Check::le("kernel_row_sum_defect", defect, DEFECT_TOLERANCE, 0.0),
        Check::le("kernel_norm_at_most_one", max_norm, 1.0, NORM_SLACK),
    ];
    let mut closed_diff = None;
    if pot.is_alternating() && coupling.mu() >= 1.0 && coupling.hopping() == 1.0 {
        let closed = AlternatingCoefficients::new(coupling.mu(), t, CLOSED_FORM_NODES.max(nodes))?;
        let diff = kernels
            .iter()
            .map(|k| max_abs_diff(&k.matrix, &closed.kernel(k.d).matrix))
            .fold(0.0, f64::max);
        checks.push(Check::le(
            "closed_form_difference",
            diff,
            CLOSED_FORM_TOLERANCE,
            0.0,
        ));
        closed_diff = Some(diff);
    }
    Ok(Stage {
        results: json!({
            "mu": coupling.mu(),
            "t": t,
            "d_max": d_max,
            "nodes": nodes,
            "max_norm": max_norm,
            "row_sum_defect": defect,
            "node_doubling_change": change,
            "closed_form_difference": closed_diff,
        }),
        checks,
        warnings: Vec::new(),
    })
}

const EVOLVE_GP: &str = "\
set datafile separator ','
set key autotitle columnhead
set logscale y
set xlabel 'site n'
set ylabel '|psi(n)|^2'
set terminal pngcairo size 900,600
set output 'profile.png'
plot 'profile.csv' using 1:($2 > 0 ? $2 : 1/0) with lines title '|psi(t)|^2'
";

fn stage_evolve(cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    let (pot, ledger) = setup(cfg)?;
    let coupling = cfg.coupling()?;
    let t = cfg.t;
    let sites = cfg
        .sites
        .unwrap_or_else(|| auto_sites(&pot, &coupling, t, &ledger));
    let h = TruncatedHamiltonian::new(&pot, &coupling, sites)?;
    let method = cfg.method.unwrap_or_else(|| choose_method(&h, t));
    let psi0 = LatticeState::delta(sites, 0)?;
    let (psi, stats) = evolve(&pot, &coupling, &psi0, t, method)?;
    let rows: Vec<Vec<String>> = psi
        .site_labels()
        .zip(&psi.amps)
        .map(|(n, a)| vec![n.to_string(), num(a.norm_sqr())])
        .collect();
    s.write_csv("profile.csv", &["n".into(), "probability".into()], &rows)?;
    s.write("evolve.gp", EVOLVE_GP.as_bytes())?;
    let m = position_moments(&psi, pot.period());
    Ok(Stage {
        results: json!({
            "mu": coupling.mu(),
            "t": t,
            "sites": sites,
            "stats": stats,
            "x_norm_block": m.x_norm_block(),
            "x_norm_site": m.x_norm_site(),
        }),
        checks: vec![Check::le(
            "norm_drift",
            stats.norm_drift,
            NORM_DRIFT_TOLERANCE,
            0.0,
        )],
        warnings: Vec::new(),
    })
}

const LIGHTCONE_GP: &str = "\
set datafile separator ','
set xlabel 'block offset d'
set ylabel 't'
set cblabel 'log10 |K(t,d)|'
set cbrange [-16:0]
set terminal pngcairo size 900,700
set output 'lightcone.png'
plot 'cone.csv' every ::1 using 2:1:(log10($3 > 1e-16 ? $3 : 1e-16)) with points pt 5 ps 0.6 palette notitle, \\
     'fronts.csv' every ::1 using 2:1 with lines lw 2 lc 'white' title 'front', \\
     'fronts.csv' every ::1 using (-$2):1 with lines lw 2 lc 'white' notitle
";

fn stage_lightcone(cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    let (pot, ledger) = setup(cfg)?;
    let coupling = cfg.coupling()?;
    let mu = coupling.mu();
    let mut warnings = Vec::new();
    if mu < ledger.mu0 {
        warnings.push(format!(
            "mu = {mu} is below mu0 = {}; the envelope is not guaranteed",
            ledger.mu0
        ));
    }
    let grid = if cfg.times.is_empty() {
        ConeGrid::auto(&pot, &coupling, cfg.front_blocks, cfg.front_samples)
    } else {
        let t_max = cfg.times.iter().copied().fold(0.0, f64::max);
        let d_max = cfg
            .d_max
            .unwrap_or_else(|| auto_d_max(&pot, &coupling, t_max));
        ConeGrid {
            times: cfg.times.clone(),
            d_max,
            nodes: cfg.nodes.max((4 * d_max as usize).next_multiple_of(2)),
        }
    };
    let sampler = KernelSampler::new(&pot, &coupling, grid.nodes)?;
    let profile = cone_profile(&sampler, &grid.times, grid.d_max, cfg.epsilon)?;
    let fit = fit_front_velocity(&profile, transient_samples(ledger.v_lr(mu)))?;
    let tail = tail_decay(&profile, 2.0 * fit.v_front)?;
    let mut rows = Vec::new();
    for (i, &t) in profile.times.iter().enumerate() {
        for d in -profile.d_max..=profile.d_max {
            rows.push(vec![num(t), d.to_string(), num(profile.norm(i, d))]);
        }
    }
    s.write_csv("cone.csv", &["t".into(), "d".into(), "norm".into()], &rows)?;
    let fronts: Vec<Vec<String>> = profile
        .times
        .iter()
        .zip(&profile.fronts)
        .map(|(t, d)| vec![num(*t), d.to_string()])
        .collect();
    s.write_csv("fronts.csv", &["t".into(), "d_front".into()], &fronts)?;
    s.write("lightcone.gp", LIGHTCONE_GP.as_bytes())?;
    let eta = profile.eta_fit.unwrap_or(f64::NAN);
    Ok(Stage {
        results: json!({
            "mu": mu,
            "grid": grid,
            "epsilon": cfg.epsilon,
            "fronts": profile.fronts,
            "front_fit": fit,
            "eta_fit": profile.eta_fit,
            "tail_decay": tail,
            "v_lr_bound": ledger.v_lr(mu),
        }),
        checks: vec![
            Check::le("v_front_below_v_lr", fit.v_front, ledger.v_lr(mu), 0.0),
            Check::gt("eta_fit_positive", eta, 0.0),
            Check::gt("tail_decay_rate_positive", tail.rate, 0.0),
            Check::le("cone_norm_at_most_one", profile.max_norm(), 1.0, NORM_SLACK),
        ],
        warnings,
    })
}

fn stage_vasy(cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    let (pot, ledger) = setup(cfg)?;
    let mut opts = cfg.sweep_options();
    opts.front = true;
    let report = velocity_report(&pot, cfg.mu, &ledger, &opts)?;
    s.write_json("vasy.json", &report)?;
    let mut checks = velocity_checks(&report, "");
    if let (Some(direct), Some(flag)) =
        (report.v_asy_direct_site, report.flagged_variant.as_deref())
    {
        let variant = if flag == "A" {
            report.v_asy_exact_a
        } else {
            report.v_asy_exact_b
        };
        let rel = (variant.unwrap_or(f64::NAN) - direct).abs() / direct;
        checks.push(Check::le(
            "flagged_variant_matches_direct",
            rel,
            VARIANT_AGREEMENT,
            0.0,
        ));
    }
    Ok(Stage {
        results: to_value(&report),
        checks,
        warnings: Vec::new(),
    })
}

fn velocity_checks(r: &crate::velocity::VelocityReport, tag: &str) -> Vec<Check> {
    let mut out = Vec::new();
    let a = r.v_asy_exact_a.unwrap_or(f64::NAN);
    let b = r.v_asy_exact_b.unwrap_or(f64::NAN);
    let upper = r.v_asy_upper.unwrap_or(f64::NAN);
    out.push(Check::le(format!("exact_below_upper{tag}"), a, upper, 0.0));
    out.push(Check::le(
        format!("upper_below_bound{tag}"),
        upper,
        r.v_asy_bound,
        0.0,
    ));
    out.push(Check::ge(
        format!("variant_a_at_least_b{tag}"),
        a * (1.0 + 1e-12),
        b,
    ));
    let app = check_lr_bound(r);
    if let Some(v) = r.v_asy_exact_a_block {
        out.push(Check::le(
            format!("exact_below_v_lr{tag}"),
            v,
            app.v_lr_bound,
            0.0,
        ));
    }
    if let Some(v) = r.v_asy_direct {
        out.push(Check::le(
            format!("direct_below_v_lr{tag}"),
            v,
            app.v_lr_bound,
            0.0,
        ));
    }
    if let Some(v) = r.v_front {
        out.push(Check::le(
            format!("v_front_below_v_lr{tag}"),
            v,
            r.v_lr_bound,
            0.0,
        ));
    }
    out
}

const SCALING_GP: &str = "\
set datafile separator ','
set key autotitle columnhead
set logscale xy
set xlabel 'mu'
set ylabel 'velocity'
set terminal pngcairo size 900,600
set output 'scaling.png'
plot 'sweep.csv' using 1:4 with linespoints title 'band formula (A)', \\
     'sweep.csv' using 1:5 with linespoints title 'band formula (B)', \\
     'sweep.csv' using 1:6 with linespoints title 'upper', \\
     'sweep.csv' using 1:7 with lines title 'C3/mu^(p-1)', \\
     'sweep.csv' using 1:2 with linespoints title 'front', \\
     'sweep.csv' using 1:3 with lines title 'C2/mu', \\
     'sweep.csv' using 1:8 with linespoints title 'direct'
";

fn stage_sweep(cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    let (pot, ledger) = setup(cfg)?;
    let sweep = scaling_sweep(&pot, &cfg.mus, &ledger, &cfg.sweep_options())?;
    let header: Vec<String> = [
        "mu",
        "v_front",
        "v_lr_bound",
        "v_asy_exact_A",
        "v_asy_exact_B",
        "v_asy_upper",
        "v_asy_bound",
        "v_asy_direct",
        "v_asy_exact_A_block",
        "v_asy_direct_site",
    ]
    .iter()
    .map(|h| h.to_string())
    .collect();
    let rows: Vec<Vec<String>> = sweep
        .reports
        .iter()
        .map(|r| {
            vec![
                num(r.mu),
                opt(r.v_front),
                num(r.v_lr_bound),
                opt(r.v_asy_exact_a),
                opt(r.v_asy_exact_b),
                opt(r.v_asy_upper),
                num(r.v_asy_bound),
                opt(r.v_asy_direct),
                opt(r.v_asy_exact_a_block),
                opt(r.v_asy_direct_site),
            ]
        })
        .collect();
    s.write_csv("sweep.csv", &header, &rows)?;
    s.write_json("sweep.json", &sweep)?;
    s.write("scaling.gp", SCALING_GP.as_bytes())?;
    let mut checks = vec![
        Check::near(
            "exact_slope",
            sweep.exact_slope.slope,
            sweep.expected_slope,
            EXACT_SLOPE_TOLERANCE,
        ),
        Check::ge("exact_monotone", sweep.exact_monotone as u8 as f64, 1.0),
    ];
    if let Some(fit) = &sweep.direct_slope {
        let tol = if pot.period() == 2 { 0.15 } else { 0.2 };
        checks.push(Check::near(
            "direct_slope",
            fit.slope,
            sweep.expected_slope,
            tol,
        ));
    }
    for r in &sweep.reports {
        checks.extend(velocity_checks(r, &format!("[mu={}]", r.mu)));
    }
    Ok(Stage {
        results: to_value(&sweep),
        checks,
        warnings: Vec::new(),
    })
}

fn stage_verify(cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    cfg.validate()?;
    let opts = VerifyOptions {
        seed: cfg.seed,
        trials: cfg.verify.trials,
        det_sizes: cfg.verify.sizes.clone(),
        perturb_formula: cfg.verify.perturb_formula,
        table_p: cfg.verify.table_p,
        rho0: cfg.rho0,
    };
    let report = run_all(&opts)?;
    if let Some(p) = opts.table_p {
        let rows: Vec<Vec<String>> = matching_table(p)
            .into_iter()
            .map(|r| vec![r.k.to_string(), r.matching, r.term])
            .collect();
        s.write_csv(
            &format!("matchings_p{p}.csv"),
            &["k".into(), "matching".into(), "term".into()],
            &rows,
        )?;
    }
    s.write_json("verify.json", &report)?;
    let checks = report
        .suites
        .iter()
        .map(|suite| Check {
            name: format!("suite_{}", suite.name),
            relation: "failures<=".into(),
            value: suite.failures as f64,
            reference: 0.0,
            tolerance: suite.tolerance,
            passed: suite.passed,
        })
        .collect();
    Ok(Stage {
        results: to_value(&report),
        checks,
        warnings: Vec::new(),
    })
}

/// Subcommands, shared between the parser and the library entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Constants,
    Bands,
    Kernel { entries: bool },
    Evolve,
    Lightcone,
    Vasy,
    Sweep,
    Verify,
    Pipeline,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Constants => "constants",
            CommandKind::Bands => "bands",
            CommandKind::Kernel { .. } => "kernel",
            CommandKind::Evolve => "evolve",
            CommandKind::Lightcone => "lightcone",
            CommandKind::Vasy => "vasy",
            CommandKind::Sweep => "sweep",
            CommandKind::Verify => "verify",
            CommandKind::Pipeline => "pipeline",
        }
    }
}

fn run_stage(kind: CommandKind, cfg: &RunConfig, s: &mut Session) -> Result<Stage> {
    match kind {
        CommandKind::Constants => stage_constants(cfg, s),
        CommandKind::Bands => stage_bands(cfg, s),
        CommandKind::Kernel { entries } => stage_kernel(cfg, s, entries),
        CommandKind::Evolve => stage_evolve(cfg, s),
        CommandKind::Lightcone => stage_lightcone(cfg, s),
        CommandKind::Vasy => stage_vasy(cfg, s),
        CommandKind::Sweep => stage_sweep(cfg, s),
        CommandKind::Verify => stage_verify(cfg, s),
        CommandKind::Pipeline => Err(Error::InvalidParameter(
            "pipeline is not a single stage".into(),
        )),
    }
}

fn write_report(report: &RunReport, s: &mut Session) -> Result<()> {
    s.write_json(&format!("{}_report.json", report.command), report)?;
    let timings = json!({"command": report.command, "seconds": s.timings});
    let mut text = serde_json::to_string_pretty(&timings).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(&s.out.join("timings.json"), text.as_bytes())
}

/// Runs one command and writes its report (`<command>_report.json`) and
/// `timings.json`.
pub fn execute(kind: CommandKind, cfg: &RunConfig, s: &mut Session) -> Result<RunReport> {
    cfg.validate()?;
    let mut report = RunReport::new(kind.name(), cfg);
    if kind == CommandKind::Pipeline {
        let pot = cfg.potential()?;
        let ledger = pot.constants(cfg.rho0)?;
        if let Some(m) = cfg.mus.iter().chain([&cfg.mu]).find(|m| **m < ledger.mu0) {
            return Err(Error::CouplingBelowThreshold {
                mu: *m,
                mu0: ledger.mu0,
            });
        }
        let stages = [
            CommandKind::Constants,
            CommandKind::Bands,
            CommandKind::Kernel { entries: false },
            CommandKind::Lightcone,
            CommandKind::Vasy,
            CommandKind::Sweep,
        ];
        for stage in stages {
            let name = stage.name();
            match s.timed(name, |s| run_stage(stage, cfg, s)) {
                Ok(out) => report.absorb(name, out),
                Err(e) => {
                    s.write(&format!("{name}.failed"), format!("{e}\n").as_bytes())?;
                    report.failures.push(StageFailure {
                        stage: name.into(),
                        error: e.to_string(),
                    });
                    report.refresh();
                }
            }
            write_report(&report, s)?;
        }
    } else {
        let out = s.timed(kind.name(), |s| run_stage(kind, cfg, s))?;
        report.absorb(kind.name(), out);
        write_report(&report, s)?;
    }
    Ok(report)
}

#[derive(Debug, Parser)]
#[command(
    name = "lightcone",
    version,
    about = "Floquet bands, light cones and transport velocities of periodic chains"
)]
pub struct Cli {
    /// TOML (or .json) run configuration.
    #[arg(long, global = true, env = "LIGHTCONE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "LIGHTCONE_OUT")]
    pub out: Option<PathBuf>,
    /// Seed for randomized verification instances.
    #[arg(long, global = true, env = "LIGHTCONE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "LIGHTCONE_THREADS")]
    pub threads: Option<usize>,
    /// Only print failures.
    #[arg(long, global = true, env = "LIGHTCONE_QUIET")]
    pub quiet: bool,
    /// One period of the potential, e.g. `--potential=0,1,2`.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub potential: Option<Vec<f64>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the constants ledger; fails when a requested mu is below mu0.
    Constants {
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Band functions, derivatives and the localization check.
    Bands {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Block propagators at one time.
    Kernel {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        dmax: Option<i64>,
        #[arg(long)]
        nodes: Option<usize>,
        /// Also write every complex entry as JSON.
        #[arg(long)]
        entries: bool,
    },
    /// Real-space evolution of a site-localized state.
    Evolve {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        method: Option<Method>,
    },
    /// Light-cone profile, front velocity and decay rates.
    Lightcone {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Asymptotic velocity at one coupling.
    Vasy {
        #[arg(long)]
        mu: Option<f64>,
        /// Direct-evolution time (skipped when absent).
        #[arg(long)]
        direct_time: Option<f64>,
    },
    /// Velocities over a list of couplings with fitted exponents.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        mus: Option<Vec<f64>>,
        #[arg(long)]
        direct_time: Option<f64>,
        #[arg(long)]
        direct_power: Option<f64>,
        /// Skip the light-cone fronts.
        #[arg(long)]
        no_front: bool,
    },
    /// Run every verification suite.
    Verify {
        /// Emit the matching table for this size.
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, hide = true)]
        perturb_formula: bool,
    },
    /// Constants, bands, kernel, light cone, velocity and sweep in one run.
    Pipeline,
}

impl Cli {
    /// Resolves the configuration: file (or defaults), then flags.
    pub fn resolve(&self) -> Result<(CommandKind, RunConfig)> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(v) = &self.potential {
            cfg.potential = v.clone();
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        let kind = match &self.command {
            Command::Constants { mu } => {
                set(&mut cfg.mu, *mu);
                CommandKind::Constants
            }
            Command::Bands { mu, nodes } => {
                set(&mut cfg.mu, *mu);
                cfg.nodes = nodes.unwrap_or(cfg.nodes);
                CommandKind::Bands
            }
            Command::Kernel {
                mu,
                t,
                dmax,
                nodes,
                entries,
            } => {
                set(&mut cfg.mu, *mu);
                set(&mut cfg.t, *t);
                cfg.d_max = dmax.or(cfg.d_max);
                cfg.nodes = nodes.unwrap_or(cfg.nodes);
                CommandKind::Kernel { entries: *entries }
            }
            Command::Evolve {
                mu,
                t,
                sites,
                method,
            } => {
                set(&mut cfg.mu, *mu);
                set(&mut cfg.t, *t);
                cfg.sites = sites.or(cfg.sites);
                cfg.method = method.or(cfg.method);
                CommandKind::Evolve
            }
            Command::Lightcone { mu, epsilon } => {
                set(&mut cfg.mu, *mu);
                set(&mut cfg.epsilon, *epsilon);
                CommandKind::Lightcone
            }
            Command::Vasy { mu, direct_time } => {
                set(&mut cfg.mu, *mu);
                cfg.direct_time = direct_time.or(cfg.direct_time);
                CommandKind::Vasy
            }
            Command::Sweep {
                mus,
                direct_time,
                direct_power,
                no_front,
            } => {
                if let Some(m) = mus {
                    cfg.mus = m.clone();
                }
                cfg.direct_time = direct_time.or(cfg.direct_time);
                set(&mut cfg.direct_power, *direct_power);
                if *no_front {
                    cfg.sweep_front = false;
                }
                CommandKind::Sweep
            }
            Command::Verify {
                p,
                trials,
                perturb_formula,
            } => {
                cfg.verify.table_p = p.or(cfg.verify.table_p);
                cfg.verify.trials = trials.unwrap_or(cfg.verify.trials);
                cfg.verify.perturb_formula |= *perturb_formula;
                CommandKind::Verify
            }
            Command::Pipeline => CommandKind::Pipeline,
        };
        cfg.validate()?;
        Ok((kind, cfg))
    }
}

fn print_report(report: &RunReport, quiet: bool) {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.failures {
        eprintln!("stage {} failed: {}", f.stage, f.error);
    }
    for c in &report.checks {
        if !quiet || !c.passed {
            println!(
                "{} {} value={:.6e} {} {:.6e} (tol {:.1e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.relation,
                c.reference,
                c.tolerance
            );
        }
    }
    if !quiet {
        println!(
            "{}: {}",
            report.command,
            if report.passed {
                "all checks passed"
            } else {
                "checks failed"
            }
        );
    }
}

/// Parses `args`, runs the command and returns the exit status: 0 when every
/// check passed, 1 when a check failed, 2 on an error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // fails harmlessly when a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let (kind, cfg) = match cli.resolve() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut session = Session::new(cfg.out.clone(), cli.quiet);
    match execute(kind, &cfg, &mut session) {
        Ok(report) => {
            print_report(&report, cli.quiet);
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::le("a", 1.0, 1.0, 0.0).passed);
        assert!(!Check::le("a", 1.1, 1.0, 0.05).passed);
        assert!(Check::near("b", -0.95, -1.0, 0.1).passed);
        assert!(!Check::gt("c", 0.0, 0.0).passed);
        assert!(!Check::gt("c", f64::NAN, 0.0).passed);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(
            std::fs::read_dir(dir.path().join("sub")).unwrap().count(),
            1
        );
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "lightcone",
            "--potential=0,1,2",
            "--seed",
            "9",
            "kernel",
            "--mu",
            "5",
            "--t",
            "3",
            "--dmax",
            "12",
        ])
        .unwrap();
        let (kind, cfg) = cli.resolve().unwrap();
        assert_eq!(kind, CommandKind::Kernel { entries: false });
        assert_eq!(
            (cfg.mu, cfg.t, cfg.d_max, cfg.seed),
            (5.0, 3.0, Some(12), 9)
        );
        assert_eq!(cfg.potential, vec![0.0, 1.0, 2.0]);
    }
}
