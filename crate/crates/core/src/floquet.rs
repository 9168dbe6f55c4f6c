//! Floquet matrices of the periodic operator, band functions, projections,
//! band derivatives and the annulus localization check.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::charpoly::charpoly_coeffs;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, HermitianEigen};
use crate::model::{ConstantsLedger, Coupling, PeriodicPotential};
use crate::poly::aberth_roots;

/// Default number of quasimomentum nodes.
pub const DEFAULT_NODES: usize = 512;

/// Where the corner entries are evaluated: a real phase `z = e^{ix}` or a
/// general complex `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Corner {
    Phase(f64),
    Complex(Complex64),
}

impl Corner {
    /// `(z, 1/z)`; for a phase the second entry is the exact conjugate.
    fn pair(self) -> Result<(Complex64, Complex64)> {
        match self {
            Corner::Phase(x) => {
                let (s, c) = x.sin_cos();
                let z = Complex64::new(c, s);
                Ok((z, z.conj()))
            }
            Corner::Complex(z) => {
                if z == Complex64::new(0.0, 0.0) {
                    return Err(Error::ZeroCornerParameter);
                }
                Ok((z, z.inv()))
            }
        }
    }
}

/// A `p×p` Floquet matrix together with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct FloquetMatrix {
    pub matrix: CMatrix,
    pub corner: Corner,
    /// `true` for `Ã(λ, z)` (diagonal `V`, hopping `λ`), `false` for
    /// `A(μ, z)` (diagonal `μV`, unit hopping).
    pub scaled: bool,
}

fn assemble(values: &[f64], diag_scale: f64, hop: f64, corner: Corner) -> Result<CMatrix> {
    let p = values.len();
    let (z, zinv) = corner.pair()?;
    let mut m = CMatrix::zeros(p, p);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = Complex64::new(diag_scale * v, 0.0);
    }
    let one = Complex64::new(1.0, 0.0);
    if p == 2 {
        m[(0, 1)] = (one + z) * hop;
        m[(1, 0)] = (one + zinv) * hop;
    } else {
        for i in 0..p - 1 {
            m[(i, i + 1)] = Complex64::new(hop, 0.0);
            m[(i + 1, i)] = Complex64::new(hop, 0.0);
        }
        m[(0, p - 1)] = z * hop;
        m[(p - 1, 0)] = zinv * hop;
    }
    Ok(m)
}

/// Floquet matrix of `H = hopping·Δ + μV`. With `scaled` the result is
/// `Ã(λ, z)` with `λ = hopping/μ`, otherwise `A(μ, z) = μ Ã(λ, z)`.
pub fn build_floquet(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    corner: Corner,
    scaled: bool,
) -> Result<FloquetMatrix> {
    let matrix = if scaled {
        assemble(pot.values(), 1.0, coupling.lambda(), corner)?
    } else {
        assemble(pot.values(), coupling.mu(), coupling.hopping(), corner)?
    };
    Ok(FloquetMatrix {
        matrix,
        corner,
        scaled,
    })
}

/// Scaled matrix `Ã(λ, z)` for an arbitrary `λ ≥ 0` (including `λ = 0`).
pub fn scaled_floquet(pot: &PeriodicPotential, lambda: f64, corner: Corner) -> Result<CMatrix> {
    assemble(pot.values(), 1.0, lambda, corner)
}

/// `dA/dx` of the unscaled matrix at phase `x` (only the corner terms
/// depend on `x`).
pub fn floquet_phase_derivative(p: usize, hopping: f64, x: f64) -> CMatrix {
    let (s, c) = x.sin_cos();
    let d = Complex64::new(-s, c) * hopping;
    let mut m = CMatrix::zeros(p, p);
    m[(0, p - 1)] = d;
    m[(p - 1, 0)] = d.conj();
    m
}

/// Eigen-decomposition of the unscaled Hermitian matrix `A(μ, e^{ix})`,
/// eigenvalues ascending, with no labeling and no threshold on `μ`.
pub fn floquet_eigen(pot: &PeriodicPotential, coupling: &Coupling, x: f64) -> HermitianEigen {
    let m = assemble(
        pot.values(),
        coupling.mu(),
        coupling.hopping(),
        Corner::Phase(x),
    )
    .expect("a phase corner is never zero");
    hermitian_eigen(&m)
}

/// `det((V_l + s) I - Ã(λ, e^{ix}))` and its `s`-derivative, evaluated with
/// the diagonal written as `s + (V_l - V_m)` so that the result keeps its
/// relative accuracy when `s` is small.
fn offset_det(values: &[f64], lambda: f64, cos_x: f64, l: usize, s: f64) -> (f64, f64) {
    let l2 = lambda * lambda;
    let chain = |range: &[f64]| {
        let (mut d0, mut d1) = (1.0, 0.0);
        let (mut e0, mut e1) = (0.0, 0.0);
        for (k, &v) in range.iter().enumerate() {
            let dk = s + (values[l] - v);
            let (n0, n1) = if k == 0 {
                (dk, 1.0)
            } else {
                (dk * d0 - l2 * e0, d0 + dk * d1 - l2 * e1)
            };
            e0 = d0;
            e1 = d1;
            d0 = n0;
            d1 = n1;
        }
        (d0, d1)
    };
    let p = values.len();
    let (outer, douter) = chain(values);
    let (inner, dinner) = chain(&values[1..p - 1]);
    (
        outer - l2 * inner - 2.0 * lambda.powi(p as i32) * cos_x,
        douter - l2 * dinner,
    )
}

/// Newton refinement of a band offset `s = ζ - V_l` starting from `s0`.
/// Returns `s0` unchanged when the iteration does not settle close to it.
pub fn refine_band_offset(values: &[f64], lambda: f64, cos_x: f64, l: usize, s0: f64) -> f64 {
    let mut s = s0;
    for _ in 0..6 {
        let (g, dg) = offset_det(values, lambda, cos_x, l, s);
        if g == 0.0 || dg == 0.0 || !dg.is_finite() {
            break;
        }
        let step = g / dg;
        s -= step;
        if step.abs() <= 4.0 * f64::EPSILON * s.abs() {
            break;
        }
    }
    if s.is_finite() && (s - s0).abs() <= 1e-9 * (1.0 + s0.abs()) {
        s
    } else {
        s0
    }
}

/// Largest group velocity `max_{x,k} |∂_x ω_k(x)|` of the unscaled bands
/// (blocks per unit time), from `⟨v_k, A'(x) v_k⟩` on a uniform grid.
pub fn max_group_velocity(pot: &PeriodicPotential, coupling: &Coupling, nodes: usize) -> f64 {
    let p = pot.period();
    uniform_grid(nodes)
        .par_iter()
        .map(|&x| {
            let eig = floquet_eigen(pot, coupling, x);
            let da = floquet_phase_derivative(p, coupling.hopping(), x);
            (0..p)
                .map(|k| {
                    let v = eig.vectors.column(k);
                    (v.adjoint() * &da * v)[(0, 0)].re.abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Permutation taking sorted eigenvalue index to band label: `perm[ℓ]` is
/// the index of the eigenvalue nearest `V_{ℓ+1}`.
fn label_by_nearest(pot: &PeriodicPotential, values: &[f64]) -> Result<Vec<usize>> {
    let p = pot.period();
    let mut perm = vec![usize::MAX; p];
    for (i, &z) in values.iter().enumerate() {
        let l = nearest_label(pot, z);
        if perm[l] != usize::MAX {
            return Err(Error::AmbiguousLabeling { re: z, im: 0.0 });
        }
        perm[l] = i;
    }
    Ok(perm)
}

fn nearest_label(pot: &PeriodicPotential, z: f64) -> usize {
    pot.values()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - z).abs().total_cmp(&(b.1 - z).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Band values of `Ã(λ, e^{ix})` labeled by nearest `V_ℓ`, without the
/// `λ ≤ λ₀` gate. Fails only if two eigenvalues share a nearest `V_ℓ`.
pub fn band_values_at(pot: &PeriodicPotential, lambda: f64, x: f64) -> Result<Vec<f64>> {
    let eig = hermitian_eigen(&scaled_floquet(pot, lambda, Corner::Phase(x))?);
    let perm = label_by_nearest(pot, &eig.values)?;
    Ok(perm.iter().map(|&i| eig.values[i]).collect())
}

/// Sampled band structure of `Ã(λ, e^{ix})` on a uniform grid of `[0, 2π)`.
#[derive(Debug, Clone)]
pub struct BandData {
    pub lambda: f64,
    pub grid: Vec<f64>,
    /// `values[node][ℓ]`.
    pub values: Vec<Vec<f64>>,
    /// Column `ℓ` of `vectors[node]` is the unit eigenvector of band `ℓ`.
    pub vectors: Vec<CMatrix>,
    /// `derivatives[node][ℓ] = ∂_x ζ_ℓ`.
    pub derivatives: Vec<Vec<f64>>,
}

impl BandData {
    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn period(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Rank-one spectral projection of band `l` (0-based) at a node.
    pub fn projection(&self, node: usize, l: usize) -> CMatrix {
        let v = self.vectors[node].column(l);
        &v * v.adjoint()
    }

    /// `max_{x,ℓ} |∂_x ζ_ℓ|`.
    pub fn max_abs_derivative(&self) -> f64 {
        self.derivatives
            .iter()
            .flatten()
            .fold(0.0, |acc, d| acc.max(d.abs()))
    }
}

/// Uniform grid `x_k = 2πk/M`.
pub fn uniform_grid(nodes: usize) -> Vec<f64> {
    (0..nodes)
        .map(|k| std::f64::consts::TAU * k as f64 / nodes as f64)
        .collect()
}

/// Band values, eigenvectors, projections and derivatives on `nodes` grid
/// points. Requires `λ ≤ λ₀` so that labeling by nearest `V_ℓ` is valid.
pub fn hermitian_bands(
    pot: &PeriodicPotential,
    lambda: f64,
    nodes: usize,
    ledger: &ConstantsLedger,
) -> Result<BandData> {
    let p = pot.period();
    if nodes < 4 * p || nodes % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "grid size must be even and at least 4p = {}, got {nodes}",
            4 * p
        )));
    }
    ledger.check_lambda(lambda)?;
    let grid = uniform_grid(nodes);
    let per_node: Vec<(Vec<f64>, CMatrix, Vec<f64>)> = grid
        .par_iter()
        .map(|&x| -> Result<_> {
            let eig = hermitian_eigen(&scaled_floquet(pot, lambda, Corner::Phase(x))?);
            let perm = label_by_nearest(pot, &eig.values)?;
            let values: Vec<f64> = perm.iter().map(|&i| eig.values[i]).collect();
            let vectors = CMatrix::from_fn(p, p, |r, c| eig.vectors[(r, perm[c])]);
            let derivs = (0..p)
                .map(|l| band_derivative(pot, l, lambda, x, &values))
                .collect::<Result<Vec<_>>>()?;
            Ok((values, vectors, derivs))
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(nodes);
    let mut vectors = Vec::with_capacity(nodes);
    let mut derivatives = Vec::with_capacity(nodes);
    for (v, w, d) in per_node {
        values.push(v);
        vectors.push(w);
        derivatives.push(d);
    }
    Ok(BandData {
        lambda,
        grid,
        values,
        vectors,
        derivatives,
    })
}

/// Derivative `∂_x ζ_ℓ` of band `l` (0-based) at phase `x`, from the band
/// values at `x`.
///
/// For `p ≥ 3`: `-2 λ^p sin x / Π_{j≠ℓ}(ζ_ℓ - ζ_j)`. For `p = 2`:
/// `|∂ζ|² = 4λ⁴ sin²x / (γ² + 8λ²(1 + cos x))`, signed by `-sin x` times the
/// side of the band relative to the band centre.
pub fn band_derivative(
    pot: &PeriodicPotential,
    l: usize,
    lambda: f64,
    x: f64,
    bands: &[f64],
) -> Result<f64> {
    let p = pot.period();
    if bands.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            got: bands.len(),
        });
    }
    if l >= p {
        return Err(Error::SublatticeOutOfRange { m: l + 1, p });
    }
    let tolerance = 1e-8 * pot.range().max(1.0);
    let gap = (0..p)
        .filter(|&j| j != l)
        .map(|j| (bands[l] - bands[j]).abs())
        .fold(f64::INFINITY, f64::min);
    if gap < tolerance {
        return Err(Error::DegenerateBands { gap, tolerance });
    }
    let s = x.sin();
    if p == 2 {
        let g = pot.gap();
        let l2 = lambda * lambda;
        let mag = 2.0 * l2 * s.abs() / (g * g + 8.0 * l2 * (1.0 + x.cos())).sqrt();
        let centre = 0.5 * (bands[0] + bands[1]);
        let side = if bands[l] >= centre { 1.0 } else { -1.0 };
        return Ok(-side * s.signum() * mag);
    }
    let denom: f64 = (0..p)
        .filter(|&j| j != l)
        .map(|j| bands[l] - bands[j])
        .product();
    Ok(-2.0 * lambda.powi(p as i32) * s / denom)
}

/// Roots of `det(ζI - Ã(λ, z))` for complex `z` in the annulus
/// `1/(2ρ₀) < |z| < 2ρ₀`, returned in label order `ℓ = 1..p`.
pub fn annulus_eigenvalues(
    pot: &PeriodicPotential,
    lambda: f64,
    z: Complex64,
    ledger: &ConstantsLedger,
) -> Result<Vec<Complex64>> {
    ledger.check_lambda(lambda)?;
    let r = z.norm();
    let rho0 = ledger.rho0;
    if !(r > 1.0 / (2.0 * rho0) && r < 2.0 * rho0) {
        return Err(Error::InvalidParameter(format!(
            "|z| = {r} outside the annulus ({}, {})",
            1.0 / (2.0 * rho0),
            2.0 * rho0
        )));
    }
    let seeds: Vec<Complex64> = pot
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    if lambda == 0.0 {
        return Ok(seeds);
    }
    let poly = charpoly_coeffs(pot, lambda, z)?;
    let roots = aberth_roots(&poly, &seeds)?;
    let p = pot.period();
    let quarter = pot.gap() / 4.0;
    let mut labeled = vec![None; p];
    for root in roots {
        let near: Vec<usize> = (0..p)
            .filter(|&l| (root - pot.v(l + 1)).norm() < quarter)
            .collect();
        match near.as_slice() {
            [l] if labeled[*l].is_none() => labeled[*l] = Some(root),
            _ => {
                return Err(Error::AmbiguousLabeling {
                    re: root.re,
                    im: root.im,
                })
            }
        }
    }
    Ok(labeled
        .into_iter()
        .map(|r| r.expect("every label filled"))
        .collect())
}

/// One eigenvalue sample of a localization check.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizationEntry {
    pub lambda: f64,
    pub z_re: f64,
    pub z_im: f64,
    pub ell: usize,
    pub zeta_re: f64,
    pub zeta_im: f64,
    pub deviation: f64,
    pub budget: f64,
    pub im_part: f64,
    pub pass: bool,
}

/// Result of [`verify_localization`].
#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub p: usize,
    pub rho0: f64,
    pub quarter_gap: f64,
    pub entries: Vec<LocalizationEntry>,
    /// `max deviation / budget` (0 when every deviation is 0).
    pub worst_ratio: f64,
    /// `max |Im ζ| / budget`.
    pub worst_im_ratio: f64,
    pub failures: usize,
    pub passed: bool,
}

impl LocalizationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `samples` equispaced points on each circle `|z| = ρ₀` and `|z| = 1/ρ₀`.
pub fn circle_samples(rho0: f64, samples: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(2 * samples);
    for radius in [rho0, 1.0 / rho0] {
        for k in 0..samples {
            // half-step offset keeps samples off the real axis
            let th = std::f64::consts::TAU * (k as f64 + 0.5) / samples as f64;
            out.push(Complex64::from_polar(radius, th));
        }
    }
    out
}

/// Checks `|ζ_ℓ(λ, z) - V_ℓ| ≤ λ²Ĉ/(γ/2)^{p-1}`, `< γ/4`, and
/// `|Im ζ_ℓ| ≤ λ²Ĉ/(γ/2)^{p-1}` for every sample `z` and label `ℓ`.
pub fn verify_localization(
    pot: &PeriodicPotential,
    lambda: f64,
    zs: &[Complex64],
    ledger: &ConstantsLedger,
) -> Result<LocalizationReport> {
    let budget = ledger.gamma0(lambda);
    let quarter = pot.gap() / 4.0;
    let mut entries = Vec::with_capacity(zs.len() * pot.period());
    for &z in zs {
        let roots = annulus_eigenvalues(pot, lambda, z, ledger)?;
        for (l, root) in roots.iter().enumerate() {
            let deviation = (root - pot.v(l + 1)).norm();
            let im_part = root.im.abs();
            let pass = deviation <= budget && deviation < quarter && im_part <= budget;
            entries.push(LocalizationEntry {
                lambda,
                z_re: z.re,
                z_im: z.im,
                ell: l + 1,
                zeta_re: root.re,
                zeta_im: root.im,
                deviation,
                budget,
                im_part,
                pass,
            });
        }
    }
    let ratio = |x: f64| if x == 0.0 { 0.0 } else { x / budget };
    let worst_ratio = entries
        .iter()
        .map(|e| ratio(e.deviation))
        .fold(0.0, f64::max);
    let worst_im_ratio = entries.iter().map(|e| ratio(e.im_part)).fold(0.0, f64::max);
    let failures = entries.iter().filter(|e| !e.pass).count();
    Ok(LocalizationReport {
        p: pot.period(),
        rho0: ledger.rho0,
        quarter_gap: quarter,
        entries,
        worst_ratio,
        worst_im_ratio,
        failures,
        passed: failures == 0,
    })
}

/// Spectrum of the alternating-potential operator: two bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlternatingSpectrum {
    pub lower: (f64, f64),
    pub upper: (f64, f64),
    pub measure: f64,
}

/// `[-√(μ²+4), -μ] ∪ [μ, √(μ²+4)]` for `V = (+1, -1)`, `μ ≥ 1`.
pub fn spectrum_p2(mu: f64) -> Result<AlternatingSpectrum> {
    if !(mu >= 1.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mu must be at least 1, got {mu}"
        )));
    }
    let top = (mu * mu + 4.0).sqrt();
    Ok(AlternatingSpectrum {
        lower: (-top, -mu),
        upper: (mu, top),
        measure: 2.0 * (top - mu),
    })
}
