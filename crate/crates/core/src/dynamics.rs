//! Block propagators `e^{-itH}(j, k)` from Floquet quadrature, the closed
//! form for the alternating potential, and real-space evolution on a
//! truncated chain.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::chebyshev;
use crate::error::{Error, Result};
use crate::floquet::{floquet_eigen, max_group_velocity, refine_band_offset, uniform_grid};
use crate::linalg::{operator_norm, CMatrix, HermitianEigen};
use crate::model::{block_coords, ConstantsLedger, Coupling, PeriodicPotential};
use crate::tridiag::TridiagEigen;

/// Largest absolute entry change tolerated when the node count is doubled.
pub const KERNEL_TOLERANCE: f64 = 1e-10;
/// Node count for the scalar Fourier coefficients of the closed form.
pub const CLOSED_FORM_NODES: usize = 1024;
/// Largest chain handled by the dense eigen-decomposition path.
pub const EIG_SITE_LIMIT: usize = 4001;
/// Amplitude allowed within [`SPILL_EDGE`] sites of the chain ends.
pub const SPILL_TOLERANCE: f64 = 1e-8;
pub const SPILL_EDGE: usize = 5;
/// Extra sites added on each side of the predicted cone.
pub const CONE_MARGIN: usize = 50;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The `p×p` block of `e^{-itH}` between cells `j` and `k = j - d`.
#[derive(Debug, Clone)]
pub struct BlockKernel {
    pub t: f64,
    pub d: i64,
    pub nodes: usize,
    pub matrix: CMatrix,
}

impl BlockKernel {
    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }

    /// Entry `(l, m)`, 1-based.
    pub fn entry(&self, l: usize, m: usize) -> Complex64 {
        self.matrix[(l - 1, m - 1)]
    }
}

/// Per-node Floquet eigen-decompositions shared by every `(t, d)` query.
///
/// Each eigenvalue is stored as `μV_l + ω` with the offset `ω` refined
/// separately, so the phase `e^{-itμV_l}` is common to all nodes and the
/// rounding left in `e^{-itω}` does not grow with `μ`.
#[derive(Debug, Clone)]
pub struct KernelSampler {
    p: usize,
    grid: Vec<f64>,
    bases: Vec<f64>,
    offsets: Vec<Vec<f64>>,
    vectors: Vec<CMatrix>,
}

impl KernelSampler {
    /// `nodes` must be even and at least `4p`.
    pub fn new(pot: &PeriodicPotential, coupling: &Coupling, nodes: usize) -> Result<Self> {
        let p = pot.period();
        if nodes < 4 * p || nodes % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "node count must be even and at least 4p = {}, got {nodes}",
                4 * p
            )));
        }
        let grid = uniform_grid(nodes);
        let values = pot.values();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mu = coupling.mu();
        let lambda = coupling.lambda();
        let bases: Vec<f64> = order.iter().map(|&l| mu * values[l]).collect();
        let eigs: Vec<(Vec<f64>, CMatrix)> = grid
            .par_iter()
            .map(|&x| {
                let eig: HermitianEigen = floquet_eigen(pot, coupling, x);
                let offsets = (0..p)
                    .map(|k| {
                        let s0 = eig.values[k] / mu - values[order[k]];
                        mu * refine_band_offset(values, lambda, x.cos(), order[k], s0)
                    })
                    .collect();
                (offsets, eig.vectors)
            })
            .collect();
        let (offsets, vectors) = eigs.into_iter().unzip();
        Ok(Self {
            p,
            grid,
            bases,
            offsets,
            vectors,
        })
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn period(&self) -> usize {
        self.p
    }

    /// `e^{-itA(x_k)}` at every node.
    pub fn propagators(&self, t: f64) -> Vec<CMatrix> {
        let base: Vec<Complex64> = self
            .bases
            .iter()
            .map(|&b| Complex64::from_polar(1.0, -t * b))
            .collect();
        self.offsets
            .par_iter()
            .zip(&self.vectors)
            .map(|(offsets, vectors)| {
                let phases: Vec<Complex64> = offsets
                    .iter()
                    .zip(&base)
                    .map(|(&w, b)| b * Complex64::from_polar(1.0, -t * w))
                    .collect();
                let scaled = CMatrix::from_fn(self.p, self.p, |r, c| vectors[(r, c)] * phases[c]);
                scaled * vectors.adjoint()
            })
            .collect()
    }

    fn assemble(&self, props: &[CMatrix], t: f64, d: i64) -> BlockKernel {
        let m = self.grid.len();
        let mut acc = CMatrix::zeros(self.p, self.p);
        for (k, u) in props.iter().enumerate() {
            // e^{-idx_k} with the index reduced exactly
            let idx = (d.rem_euclid(m as i64) as usize * k) % m;
            let phase = Complex64::from_polar(1.0, -std::f64::consts::TAU * idx as f64 / m as f64);
            acc += u * phase;
        }
        BlockKernel {
            t,
            d,
            nodes: m,
            matrix: acc / Complex64::new(m as f64, 0.0),
        }
    }

    /// Trapezoid approximation of the block at offset `d`.
    pub fn kernel(&self, t: f64, d: i64) -> BlockKernel {
        let props = self.propagators(t);
        self.assemble(&props, t, d)
    }

    /// Blocks at several offsets sharing one set of node propagators.
    pub fn kernels(&self, t: f64, ds: &[i64]) -> Vec<BlockKernel> {
        let props = self.propagators(t);
        ds.par_iter()
            .map(|&d| self.assemble(&props, t, d))
            .collect()
    }
}

/// `(1/2π) ∫ e^{-itA(μ, e^{ix})} e^{-idx} dx` by the trapezoid rule on
/// `nodes` points, rejected if doubling the node count moves any entry by
/// more than [`KERNEL_TOLERANCE`].
pub fn block_kernel(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    t: f64,
    d: i64,
    nodes: usize,
) -> Result<BlockKernel> {
    block_kernel_checked(pot, coupling, t, d, nodes, KERNEL_TOLERANCE)
}

pub fn block_kernel_checked(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    t: f64,
    d: i64,
    nodes: usize,
    tolerance: f64,
) -> Result<BlockKernel> {
    let coarse = KernelSampler::new(pot, coupling, nodes)?.kernel(t, d);
    let fine = KernelSampler::new(pot, coupling, 2 * nodes)?.kernel(t, d);
    let change = crate::linalg::max_abs_diff(&coarse.matrix, &fine.matrix);
    if change > tolerance {
        return Err(Error::QuadratureUnresolved { change, tolerance });
    }
    Ok(coarse)
}

/// `e^{-itA(μ, e^{ix})}` for `V = (+1, -1)` in closed form:
/// `cos(tω) I - i sin(tω) A/ω` with `ω = √(μ² + 2(1 + cos x))`.
pub fn p2_symbol(mu: f64, t: f64, x: f64) -> CMatrix {
    let omega = (mu * mu + 2.0 * (1.0 + x.cos())).sqrt();
    let (s, c) = (t * omega).sin_cos();
    let e = Complex64::new(x.cos(), x.sin());
    let one = Complex64::new(1.0, 0.0);
    let diag = Complex64::new(0.0, -s * mu / omega);
    let off = Complex64::new(0.0, -s / omega);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0) + diag,
            off * (one + e),
            off * (one + e.conj()),
            Complex64::new(c, 0.0) - diag,
        ],
    )
}

/// Fourier coefficients `φ̂(k) = (1/2π)∫ φ(x) e^{-ikx} dx` of the scalar
/// functions `½(f⁻ + f⁺) = cos(tω)` and `u = g⁻ - g⁺ = -2iμ sin(tω)/ω`.
#[derive(Debug, Clone)]
pub struct AlternatingCoefficients {
    mu: f64,
    t: f64,
    nodes: usize,
    cos_part: Vec<f64>,
    u_part: Vec<Complex64>,
    grid: Vec<f64>,
}

impl AlternatingCoefficients {
    pub fn new(mu: f64, t: f64, nodes: usize) -> Result<Self> {
        if !(mu >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be at least 1, got {mu}"
            )));
        }
        if nodes < 8 || nodes % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "node count must be even and at least 8, got {nodes}"
            )));
        }
        let grid = uniform_grid(nodes);
        let mut cos_part = Vec::with_capacity(nodes);
        let mut u_part = Vec::with_capacity(nodes);
        for &x in &grid {
            let omega = (mu * mu + 2.0 * (1.0 + x.cos())).sqrt();
            let (s, c) = (t * omega).sin_cos();
            cos_part.push(c);
            u_part.push(Complex64::new(0.0, -2.0 * mu * s / omega));
        }
        Ok(Self {
            mu,
            t,
            nodes,
            cos_part,
            u_part,
            grid,
        })
    }

    fn coefficient<T>(&self, values: &[T], k: i64) -> Complex64
    where
        T: Copy + Into<Complex64>,
    {
        let m = self.nodes as i64;
        let kr = k.rem_euclid(m) as usize;
        let sum: Complex64 = values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let idx = (kr * j) % self.nodes;
                v.into()
                    * Complex64::from_polar(
                        1.0,
                        -std::f64::consts::TAU * idx as f64 / self.nodes as f64,
                    )
            })
            .sum();
        sum / self.nodes as f64
    }

    /// Fourier coefficient of `cos(tω)`.
    pub fn cos_hat(&self, k: i64) -> Complex64 {
        self.coefficient(&self.cos_part, k)
    }

    /// Fourier coefficient of `g⁻ - g⁺`.
    pub fn u_hat(&self, k: i64) -> Complex64 {
        self.coefficient(&self.u_part, k)
    }

    /// Block at offset `d` assembled from the scalar coefficients.
    pub fn kernel(&self, d: i64) -> BlockKernel {
        let c = self.cos_hat(d);
        let u = self.u_hat(d);
        let k11 = c + u * 0.5;
        let k12 = (u + self.u_hat(d - 1)) / (2.0 * self.mu);
        let k21 = (u + self.u_hat(d + 1)) / (2.0 * self.mu);
        let k22 = c - u * 0.5;
        BlockKernel {
            t: self.t,
            d,
            nodes: self.grid.len(),
            matrix: CMatrix::from_row_slice(2, 2, &[k11, k12, k21, k22]),
        }
    }
}

/// Closed-form block for `V = (+1, -1)`, `μ ≥ 1`.
pub fn block_kernel_p2_closed(mu: f64, t: f64, d: i64) -> Result<BlockKernel> {
    Ok(AlternatingCoefficients::new(mu, t, CLOSED_FORM_NODES)?.kernel(d))
}

/// `H_N = hopping·Δ + μV` on sites `-N..=N` with open ends.
#[derive(Debug, Clone)]
pub struct TruncatedHamiltonian {
    pub half: usize,
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub p: usize,
}

impl TruncatedHamiltonian {
    /// `sites` is the total (odd) number of sites.
    pub fn new(pot: &PeriodicPotential, coupling: &Coupling, sites: usize) -> Result<Self> {
        if sites % 2 == 0 || sites < 3 {
            return Err(Error::InvalidParameter(format!(
                "site count must be odd and at least 3, got {sites}"
            )));
        }
        let half = (sites - 1) / 2;
        let diag = (0..sites)
            .map(|i| coupling.mu() * pot.at_site(i as i64 - half as i64))
            .collect();
        Ok(Self {
            half,
            diag,
            off: vec![coupling.hopping(); sites - 1],
            p: pot.period(),
        })
    }

    pub fn sites(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin interval `(centre, half-width)` of the spectrum.
    pub fn spectral_interval(&self) -> (f64, f64) {
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hop = self.off.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let width = 0.5 * (hi - lo) + 2.0 * hop;
        (0.5 * (lo + hi), width.max(f64::MIN_POSITIVE))
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut v = x[i] * self.diag[i];
            if i > 0 {
                v += x[i - 1] * self.off[i - 1];
            }
            if i + 1 < n {
                v += x[i + 1] * self.off[i];
            }
            y[i] = v;
        }
    }
}

/// Amplitudes on sites `-N..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub half: usize,
    pub amps: Vec<Complex64>,
}

impl LatticeState {
    /// `δ_n` on a chain of `sites` sites.
    pub fn delta(sites: usize, n: i64) -> Result<Self> {
        if sites % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "site count must be odd, got {sites}"
            )));
        }
        let half = (sites - 1) / 2;
        if n.unsigned_abs() as usize > half {
            return Err(Error::InvalidParameter(format!(
                "site {n} outside the chain"
            )));
        }
        let mut amps = vec![ZERO; sites];
        amps[(n + half as i64) as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { half, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() % 2 == 0 {
            return Err(Error::InvalidParameter("site count must be odd".into()));
        }
        Ok(Self {
            half: (amps.len() - 1) / 2,
            amps,
        })
    }

    pub fn sites(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    /// Amplitude at site `n` (zero outside the chain).
    pub fn at(&self, n: i64) -> Complex64 {
        let i = n + self.half as i64;
        if i < 0 || i as usize >= self.amps.len() {
            ZERO
        } else {
            self.amps[i as usize]
        }
    }

    /// Site labels `-N..=N`.
    pub fn site_labels(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.amps.len()).map(move |i| i as i64 - self.half as i64)
    }

    /// Largest modulus within `edge` sites of either end.
    pub fn edge_amplitude(&self, edge: usize) -> f64 {
        let n = self.amps.len();
        let e = edge.min(n);
        self.amps[..e]
            .iter()
            .chain(&self.amps[n - e..])
            .fold(0.0, |acc, a| acc.max(a.norm()))
    }
}

/// How [`evolve`] computes the exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Chebyshev,
    Eig,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" => Ok(Method::Chebyshev),
            "eig" => Ok(Method::Eig),
            other => Err(Error::InvalidParameter(format!("unknown method {other}"))),
        }
    }
}

/// Diagnostics of one evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveStats {
    pub method: Method,
    pub chebyshev_order: usize,
    pub chebyshev_steps: usize,
    pub coefficient_tail: f64,
    pub norm_drift: f64,
    pub edge_amplitude: f64,
}

/// Reusable spectral decomposition of a truncated Hamiltonian.
#[derive(Debug, Clone)]
pub struct EigenPropagator {
    eig: TridiagEigen,
}

impl EigenPropagator {
    pub fn new(h: &TruncatedHamiltonian) -> Result<Self> {
        if h.sites() > EIG_SITE_LIMIT {
            return Err(Error::MethodUnavailable {
                sites: h.sites(),
                limit: EIG_SITE_LIMIT,
            });
        }
        Ok(Self {
            eig: TridiagEigen::new(&h.diag, &h.off)?,
        })
    }

    /// Expansion coefficients `⟨v_k, ψ⟩`.
    pub fn coefficients(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.eig
            .vectors
            .par_iter()
            .map(|v| v.iter().zip(psi).map(|(a, b)| b * a).sum())
            .collect()
    }

    /// `e^{-iHt}ψ` from precomputed coefficients.
    pub fn evolve_coefficients(&self, coeffs: &[Complex64], t: f64) -> Vec<Complex64> {
        let n = coeffs.len();
        let weighted: Vec<Complex64> = coeffs
            .iter()
            .zip(&self.eig.values)
            .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t))
            .collect();
        (0..n)
            .into_par_iter()
            .map(|i| {
                weighted
                    .iter()
                    .zip(&self.eig.vectors)
                    .map(|(w, v)| w * v[i])
                    .sum()
            })
            .collect()
    }
}

impl TruncatedHamiltonian {
    /// Dense eigen-decomposition propagator (size guarded).
    pub fn eigen_propagator(&self) -> Result<EigenPropagator> {
        EigenPropagator::new(self)
    }

    /// Chebyshev propagation of `psi` by time `t`.
    pub fn chebyshev(
        &self,
        psi: &[Complex64],
        t: f64,
    ) -> Result<(Vec<Complex64>, chebyshev::PropagationStats)> {
        let (c, w) = self.spectral_interval();
        chebyshev::propagate(|x, y| self.apply(x, y), c, w, psi, t)
    }
}

/// `ψ(t) = e^{-itH_N} ψ₀` with a boundary-spill check.
pub fn evolve(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    psi0: &LatticeState,
    t: f64,
    method: Method,
) -> Result<(LatticeState, EvolveStats)> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be non-negative, got {t}"
        )));
    }
    let h = TruncatedHamiltonian::new(pot, coupling, psi0.sites())?;
    let (amps, order, steps, tail) = match method {
        Method::Chebyshev => {
            let (out, stats) = h.chebyshev(&psi0.amps, t)?;
            (out, stats.order, stats.steps, stats.tail)
        }
        Method::Eig => {
            let prop = h.eigen_propagator()?;
            let coeffs = prop.coefficients(&psi0.amps);
            (prop.evolve_coefficients(&coeffs, t), 0, 0, 0.0)
        }
    };
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
    let norm_drift = (state.norm() - psi0.norm()).abs();
    Ok((
        state,
        EvolveStats {
            method,
            chebyshev_order: order,
            chebyshev_steps: steps,
            coefficient_tail: tail,
            norm_drift,
            edge_amplitude: edge,
        },
    ))
}

/// Chain size (odd, total sites) holding the light cone at time `t`:
/// cone radius `min(C₂/μ, 2 v_max) t` blocks, where `v_max` is the largest
/// band group velocity, plus [`CONE_MARGIN`] sites on each side.
pub fn auto_sites(
    pot: &PeriodicPotential,
    coupling: &Coupling,
    t: f64,
    ledger: &ConstantsLedger,
) -> usize {
    let p = pot.period() as f64;
    let vmax = max_group_velocity(pot, coupling, 256);
    let v = (ledger.c2 / coupling.mu()).min(2.0 * vmax);
    // front broadening grows like t^{1/3}
    let spread = 4.0 * t.abs().cbrt() * p;
    let radius = (p * v * t.abs() + spread).ceil() as usize + CONE_MARGIN;
    2 * radius + 1
}

/// Moments of the block-index operator `X|m, j⟩ = |j| |m, j⟩` and of the
/// site-index analogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean_abs_block: f64,
    pub second_block: f64,
    pub mean_abs_site: f64,
    pub second_site: f64,
}

impl Moments {
    /// `‖Xψ‖` in blocks.
    pub fn x_norm_block(&self) -> f64 {
        self.second_block.sqrt()
    }

    /// `‖Xψ‖` in sites.
    pub fn x_norm_site(&self) -> f64 {
        self.second_site.sqrt()
    }
}

pub fn position_moments(psi: &LatticeState, p: usize) -> Moments {
    let mut m = Moments {
        mean_abs_block: 0.0,
        second_block: 0.0,
        mean_abs_site: 0.0,
        second_site: 0.0,
    };
    for (n, a) in psi.site_labels().zip(&psi.amps) {
        let w = a.norm_sqr();
        let j = block_coords(n, p).0.unsigned_abs() as f64;
        let s = n.unsigned_abs() as f64;
        m.mean_abs_block += w * j;
        m.second_block += w * j * j;
        m.mean_abs_site += w * s;
        m.second_site += w * s * s;
    }
    m
}

/// Row-sum defect `‖Σ_{|d| ≤ d_max} K K† - I‖` and tail masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitarityReport {
    pub t: f64,
    pub d_max: i64,
    pub defect: f64,
}

pub fn unitarity_defect(sampler: &KernelSampler, t: f64, d_max: i64) -> UnitarityReport {
    let p = sampler.period();
    let ds: Vec<i64> = (-d_max..=d_max).collect();
    let sum = sampler
        .kernels(t, &ds)
        .iter()
        .fold(CMatrix::zeros(p, p), |acc, k| {
            acc + &k.matrix * k.matrix.adjoint()
        });
    UnitarityReport {
        t,
        d_max,
        defect: operator_norm(&(sum - CMatrix::identity(p, p))),
    }
}

/// `Σ_{v|t| < |d| ≤ d_max} ‖K(t, d)‖²`.
pub fn tail_mass(sampler: &KernelSampler, t: f64, v: f64, d_max: i64) -> f64 {
    let r = v * t.abs();
    let ds: Vec<i64> = (-d_max..=d_max).filter(|d| (*d as f64).abs() > r).collect();
    sampler
        .kernels(t, &ds)
        .iter()
        .map(|k| k.norm().powi(2))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kernel_at_time_zero() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let s = KernelSampler::new(&pot, &Coupling::new(5.0).unwrap(), 64).unwrap();
        assert!(max_abs_diff(&s.kernel(0.0, 0).matrix, &CMatrix::identity(3, 3)) < 1e-14);
        assert!(s.kernel(0.0, 3).matrix.norm() < 1e-14);
    }

    #[test]
    fn kernel_without_hopping() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let coupling = Coupling::without_hopping(2.0).unwrap();
        let t = 1.3;
        let k0 = block_kernel(&pot, &coupling, t, 0, 64).unwrap();
        for l in 0..3 {
            let want = Complex64::from_polar(1.0, -t * 2.0 * l as f64);
            assert!((k0.matrix[(l, l)] - want).norm() < 1e-14);
        }
        assert!(
            block_kernel(&pot, &coupling, t, 1, 64)
                .unwrap()
                .matrix
                .norm()
                < 1e-14
        );
    }

    #[test]
    fn closed_form_matches_quadrature_example() {
        let pot = PeriodicPotential::alternating();
        let k = block_kernel(&pot, &Coupling::new(3.0).unwrap(), 5.0, 4, 512).unwrap();
        let closed = block_kernel_p2_closed(3.0, 5.0, 4).unwrap();
        assert!(max_abs_diff(&k.matrix, &closed.matrix) < 1e-8);
    }

    #[test]
    fn symbol_matches_matrix_exponential() {
        let pot = PeriodicPotential::alternating();
        let coupling = Coupling::new(2.5).unwrap();
        for x in [0.0, 0.9, 2.0, std::f64::consts::PI, 5.5] {
            let eig = floquet_eigen(&pot, &coupling, x);
            let t = 1.7;
            let u = CMatrix::from_fn(2, 2, |r, cc| {
                (0..2)
                    .map(|k| {
                        eig.vectors[(r, k)]
                            * eig.vectors[(cc, k)].conj()
                            * Complex64::from_polar(1.0, -t * eig.values[k])
                    })
                    .sum()
            });
            let s = p2_symbol(2.5, t, x);
            assert!(max_abs_diff(&u, &s) < 1e-13);
            assert!((s[(1, 1)] - s[(0, 0)].conj()).norm() < 1e-15);
            assert!((s[(1, 0)] + s[(0, 1)].conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn closed_form_block_relations() {
        let a = AlternatingCoefficients::new(3.0, 4.0, 512).unwrap();
        for d in -6..=6 {
            let k = a.kernel(d);
            let mirror = a.kernel(-d);
            assert!((k.matrix[(1, 1)] - k.matrix[(0, 0)].conj()).norm() < 1e-12);
            assert!((k.matrix[(1, 0)] + mirror.matrix[(0, 1)].conj()).norm() < 1e-12);
        }
        let id = block_kernel_p2_closed(2.0, 0.0, 0).unwrap();
        assert!(max_abs_diff(&id.matrix, &CMatrix::identity(2, 2)) < 1e-14);
        assert!(block_kernel_p2_closed(0.5, 1.0, 0).is_err());
    }

    #[test]
    fn quadrature_refuses_unresolved() {
        let pot = PeriodicPotential::alternating();
        let r = block_kernel(&pot, &Coupling::new(1.0).unwrap(), 200.0, 0, 8);
        assert!(matches!(r, Err(Error::QuadratureUnresolved { .. })));
    }

    #[test]
    fn time_symmetry() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let s = KernelSampler::new(&pot, &Coupling::new(4.0).unwrap(), 256).unwrap();
        for d in -3..=3 {
            let a = s.kernel(-2.5, d).matrix;
            let b = s.kernel(2.5, -d).matrix.adjoint();
            assert!(max_abs_diff(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn truncated_hamiltonian_layout() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let h = TruncatedHamiltonian::new(&pot, &Coupling::new(2.0).unwrap(), 7).unwrap();
        // sites -3..=3 carry V at n mod 3
        assert_eq!(h.diag, vec![0.0, 2.0, 4.0, 0.0, 2.0, 4.0, 0.0]);
        assert_eq!(h.off, vec![1.0; 6]);
        let (centre, width) = h.spectral_interval();
        assert_eq!((centre, width), (2.0, 4.0));
        assert!(TruncatedHamiltonian::new(&pot, &Coupling::new(2.0).unwrap(), 8).is_err());
    }

    #[test]
    fn evolve_zero_time_and_norm() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let coupling = Coupling::new(5.0).unwrap();
        let psi = LatticeState::delta(201, 0).unwrap();
        for method in [Method::Chebyshev, Method::Eig] {
            let (same, _) = evolve(&pot, &coupling, &psi, 0.0, method).unwrap();
            assert!(same
                .amps
                .iter()
                .zip(&psi.amps)
                .all(|(a, b)| (a - b).norm() < 1e-14));
            let (out, stats) = evolve(&pot, &coupling, &psi, 20.0, method).unwrap();
            assert!((out.norm() - 1.0).abs() < 1e-10);
            assert!(stats.norm_drift < 1e-10);
        }
    }

    #[test]
    fn boundary_spill_detected() {
        let pot = PeriodicPotential::alternating();
        let coupling = Coupling::new(1.0).unwrap();
        let psi = LatticeState::delta(41, 0).unwrap();
        assert!(matches!(
            evolve(&pot, &coupling, &psi, 30.0, Method::Chebyshev),
            Err(Error::BoundarySpill { .. })
        ));
    }

    #[test]
    fn eig_guard() {
        let pot = PeriodicPotential::alternating();
        let psi = LatticeState::delta(4003, 0).unwrap();
        assert!(matches!(
            evolve(&pot, &Coupling::new(1.0).unwrap(), &psi, 1.0, Method::Eig),
            Err(Error::MethodUnavailable { .. })
        ));
    }

    #[test]
    fn moments_examples() {
        let p = 3;
        let d = LatticeState::delta(31, 0).unwrap();
        let m = position_moments(&d, p);
        assert_eq!(
            (m.mean_abs_block, m.second_block, m.mean_abs_site),
            (0.0, 0.0, 0.0)
        );
        // uniform over blocks -1, 0, 1 (sites -3..=5)
        let mut amps = vec![c(0.0, 0.0); 31];
        for n in -3..=5i64 {
            amps[(n + 15) as usize] = c(1.0 / 3.0, 0.0);
        }
        let u = LatticeState::from_amplitudes(amps).unwrap();
        let m = position_moments(&u, p);
        assert!((m.mean_abs_block - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unitarity_at_time_zero() {
        let pot = PeriodicPotential::staircase(3).unwrap();
        let s = KernelSampler::new(&pot, &Coupling::new(5.0).unwrap(), 64).unwrap();
        assert!(unitarity_defect(&s, 0.0, 0).defect < 1e-14);
    }
}
