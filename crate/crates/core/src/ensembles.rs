//! Trajectory ensembles, histograms and entropies, diffusion fits, a
//! Fokker–Planck integrator and box-counting dimensions.

use std::collections::HashSet;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::maps::{
    dissipative_baker_step, noisy_standard_step, standard_map_step, zaslavsky_step, NoiseKind,
    PhasePoint, RotorState,
};
use crate::seeding::{stream, KahanSum};

const CHUNK: usize = 4096;

/// Rotor maps that can drive an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotorMap {
    Standard { k: f64 },
    Zaslavsky { k: f64, lambda: f64 },
    Noisy { k: f64, noise: NoiseKind, lambda: f64 },
}

impl RotorMap {
    pub fn validate(&self) -> Result<()> {
        let (k, lambda) = match *self {
            RotorMap::Standard { k } => (k, 0.0),
            RotorMap::Zaslavsky { k, lambda } => (k, lambda),
            RotorMap::Noisy { k, noise, lambda } => {
                noise.validate()?;
                (k, lambda)
            }
        };
        if !k.is_finite() {
            return Err(invalid("K", "must be finite"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be >= 0")));
        }
        Ok(())
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, s: RotorState, rng: &mut R) -> RotorState {
        match *self {
            RotorMap::Standard { k } => standard_map_step(s, k),
            RotorMap::Zaslavsky { k, lambda } => zaslavsky_step(s, k, lambda),
            RotorMap::Noisy { k, noise, lambda } => noisy_standard_step(s, k, &noise, lambda, rng),
        }
    }
}

/// Initial distributions for rotor ensembles. The angle is uniform unless
/// a point is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotorInit {
    Line { p0: f64 },
    Gaussian { p0: f64, sigma: f64 },
    Uniform { p_min: f64, p_max: f64 },
    Point { theta: f64, p: f64 },
}

impl RotorInit {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RotorState {
        match *self {
            RotorInit::Line { p0 } => RotorState::new(rng.random::<f64>() * TAU, p0),
            RotorInit::Gaussian { p0, sigma } => {
                let theta = rng.random::<f64>() * TAU;
                let n = Normal::new(p0, sigma).expect("finite sigma");
                RotorState::new(theta, n.sample(rng))
            }
            RotorInit::Uniform { p_min, p_max } => {
                let theta = rng.random::<f64>() * TAU;
                RotorState::new(theta, p_min + (p_max - p_min) * rng.random::<f64>())
            }
            RotorInit::Point { theta, p } => RotorState::new(theta, p),
        }
    }
}

/// Per-step momentum moments of an ensemble and its final cloud.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    /// `⟨p⟩(n)` for `n = 0..=n_steps`.
    pub mean: Vec<f64>,
    /// `⟨(p − ⟨p⟩)²⟩(n)`.
    pub variance: Vec<f64>,
    /// `⟨p²⟩/2` per step.
    pub energy: Vec<f64>,
    pub cloud: Vec<RotorState>,
    pub checkpoints: Vec<(usize, Vec<RotorState>)>,
}

/// Evolves `n_traj` trajectories for `n_steps`. Trajectories are split into
/// fixed chunks, each with its own seeded stream, so the result depends only
/// on `seed`.
pub fn evolve_ensemble(
    map: &RotorMap,
    init: &RotorInit,
    n_steps: usize,
    n_traj: usize,
    seed: u64,
    checkpoints: &[usize],
) -> Result<EnsembleRun> {
    map.validate()?;
    if n_traj == 0 {
        return Err(invalid("n_traj", "must be >= 1"));
    }
    let n_chunks = n_traj.div_ceil(CHUNK);
    struct ChunkOut {
        s1: Vec<KahanSum>,
        s2: Vec<KahanSum>,
        cloud: Vec<RotorState>,
        checks: Vec<Vec<RotorState>>,
    }
    let outs: Vec<ChunkOut> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let size = CHUNK.min(n_traj - c * CHUNK);
            let mut pts: Vec<RotorState> = (0..size).map(|_| init.sample(&mut rng)).collect();
            let mut s1 = vec![KahanSum::default(); n_steps + 1];
            let mut s2 = vec![KahanSum::default(); n_steps + 1];
            let mut checks = vec![Vec::new(); checkpoints.len()];
            for n in 0..=n_steps {
                if n > 0 {
                    for s in pts.iter_mut() {
                        *s = map.step(*s, &mut rng);
                    }
                }
                for s in &pts {
                    s1[n].add(s.p);
                    s2[n].add(s.p * s.p);
                }
                for (i, &cp) in checkpoints.iter().enumerate() {
                    if cp == n {
                        checks[i] = pts.clone();
                    }
                }
            }
            ChunkOut {
                s1,
                s2,
                cloud: pts,
                checks,
            }
        })
        .collect();

    let mut mean = Vec::with_capacity(n_steps + 1);
    let mut variance = Vec::with_capacity(n_steps + 1);
    let mut energy = Vec::with_capacity(n_steps + 1);
    let nt = n_traj as f64;
    for n in 0..=n_steps {
        let mut a = KahanSum::default();
        let mut b = KahanSum::default();
        for o in &outs {
            a.merge(&o.s1[n]);
            b.merge(&o.s2[n]);
        }
        let m = a.value() / nt;
        let m2 = b.value() / nt;
        mean.push(m);
        variance.push((m2 - m * m).max(0.0));
        energy.push(0.5 * m2);
    }
    let mut cloud = Vec::with_capacity(n_traj);
    let mut checks: Vec<(usize, Vec<RotorState>)> =
        checkpoints.iter().map(|&c| (c, Vec::new())).collect();
    for o in outs {
        cloud.extend(o.cloud);
        for (i, v) in o.checks.into_iter().enumerate() {
            checks[i].1.extend(v);
        }
    }
    Ok(EnsembleRun {
        mean,
        variance,
        energy,
        cloud,
        checkpoints: checks,
    })
}

/// Least-squares line through a series over a window of step indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionFit {
    pub slope: f64,
    pub intercept: f64,
    pub n0: usize,
    pub n1: usize,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Standard error of the slope.
    pub slope_err: f64,
}

/// Fits `series[n] ≈ slope·n + intercept` for `n ∈ [n0, n1]`.
pub fn fit_diffusion(series: &[f64], n0: usize, n1: usize) -> Result<DiffusionFit> {
    if series.len() < 10 {
        return Err(invalid("series", format!("length {} < 10", series.len())));
    }
    if n1 <= n0 || n1 >= series.len() {
        return Err(invalid("window", format!("[{n0},{n1}] invalid for length {}", series.len())));
    }
    let xs: Vec<f64> = (n0..=n1).map(|n| n as f64).collect();
    let ys = &series[n0..=n1];
    let (slope, intercept, residual, slope_err) = linear_fit(&xs, ys);
    Ok(DiffusionFit {
        slope,
        intercept,
        n0,
        n1,
        residual,
        slope_err,
    })
}

/// Fits over the whole series.
pub fn fit_diffusion_full(series: &[f64]) -> Result<DiffusionFit> {
    fit_diffusion(series, 0, series.len().saturating_sub(1))
}

/// Ordinary least squares: returns (slope, intercept, rms residual, slope stderr).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let rms = (ss / n).sqrt();
    let err = if xs.len() > 2 {
        (ss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, rms, err)
}

/// Coefficient of determination of a linear fit.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let (slope, intercept, _, _) = linear_fit(xs, ys);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    1.0 - ss_res / ss_tot
}

/// Uniform-bin histogram; samples outside the range are counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub total: u64,
    pub outside: u64,
}

impl Histogram1D {
    pub fn new(lo: f64, width: f64, n_bins: usize) -> Result<Self> {
        if !(width > 0.0) || n_bins == 0 {
            return Err(invalid("width", "bin width must be > 0 and n_bins >= 1"));
        }
        Ok(Self {
            lo,
            width,
            counts: vec![0; n_bins],
            total: 0,
            outside: 0,
        })
    }

    pub fn from_samples(samples: impl IntoIterator<Item = f64>, lo: f64, width: f64, n_bins: usize) -> Result<Self> {
        let mut h = Self::new(lo, width, n_bins)?;
        for x in samples {
            h.add(x);
        }
        Ok(h)
    }

    pub fn add(&mut self, x: f64) {
        let i = ((x - self.lo) / self.width).floor();
        if i >= 0.0 && (i as usize) < self.counts.len() {
            self.counts[i as usize] += 1;
            self.total += 1;
        } else {
            self.outside += 1;
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width
    }

    /// Bin probabilities normalized over in-range samples.
    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

/// `I = −c Σ q_j ln(d_p q_j) Δ` with `q_j` the bin density and `Δ` the bin width.
pub fn shannon_entropy(h: &Histogram1D, c: f64, d_p: f64) -> Result<f64> {
    if !(d_p > 0.0) {
        return Err(invalid("d_p", format!("{d_p} must be > 0")));
    }
    if h.total == 0 {
        return Err(Error::Domain("empty histogram".into()));
    }
    let t = h.total as f64;
    let mut s = 0.0;
    for &n in &h.counts {
        if n > 0 {
            let prob = n as f64 / t;
            let q = prob / h.width;
            s -= prob * (d_p * q).ln();
        }
    }
    Ok(c * s)
}

/// Coarse-grained entropy `−c Σ P ln P` of a cloud on an `n×n` grid over the unit square.
pub fn grid_entropy(points: &[PhasePoint], n: usize, c: f64) -> f64 {
    let mut counts = vec![0u64; n * n];
    for pt in points {
        let i = ((pt.x * n as f64) as usize).min(n - 1);
        let j = ((pt.p * n as f64) as usize).min(n - 1);
        counts[i * n + j] += 1;
    }
    let t = points.len() as f64;
    -c * counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let prob = k as f64 / t;
            prob * prob.ln()
        })
        .sum::<f64>()
}

/// Number of occupied cells of an `n×n` grid over the unit square.
pub fn occupied_cells(points: &[PhasePoint], n: usize) -> usize {
    let mut seen = vec![false; n * n];
    for pt in points {
        let i = ((pt.x * n as f64) as usize).min(n - 1);
        let j = ((pt.p * n as f64) as usize).min(n - 1);
        seen[i * n + j] = true;
    }
    seen.iter().filter(|&&b| b).count()
}

/// Truncated Gaussian cloud inside the unit square, by rejection.
pub fn gaussian_cloud(n: usize, center: (f64, f64), sigma: f64, seed: u64) -> Vec<PhasePoint> {
    let mut rng = stream(seed, 0);
    let gx = Normal::new(center.0, sigma).expect("finite sigma");
    let gp = Normal::new(center.1, sigma).expect("finite sigma");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = gx.sample(&mut rng);
        let p = gp.sample(&mut rng);
        if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&p) {
            out.push(PhasePoint { x, p });
        }
    }
    out
}

pub fn uniform_cloud(n: usize, seed: u64) -> Vec<PhasePoint> {
    let mut rng = stream(seed, 0);
    (0..n)
        .map(|_| PhasePoint {
            x: rng.random(),
            p: rng.random(),
        })
        .collect()
}

/// Iterates the dissipative baker map (`a = 1` is the plain baker map) on a
/// cloud, discarding `transient` steps and recording the next `recorded`.
pub fn baker_attractor(cloud: &[PhasePoint], a: f64, transient: usize, recorded: usize) -> Result<Vec<PhasePoint>> {
    let mut pts = cloud.to_vec();
    let mut out = Vec::with_capacity(cloud.len() * recorded);
    for n in 0..transient + recorded {
        for pt in pts.iter_mut() {
            *pt = dissipative_baker_step(*pt, a)?;
        }
        if n >= transient {
            out.extend_from_slice(&pts);
        }
    }
    Ok(out)
}

/// Drift/diffusion form of the momentum Fokker–Planck equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FpForm {
    /// `∂t ρ = λ ∂p(pρ) + D_pde ∂²p ρ`.
    #[default]
    Dissipative,
    /// Printed form: `∂t ρ = (1−λ) ∂p ρ + ∂p[(D + ((1−λ)p)²) ∂p ρ]` with `D = 2 D_pde`.
    Literal,
}

/// Density on a uniform momentum grid `p_i = p_min + i·dp`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpGrid {
    pub p_min: f64,
    pub dp: f64,
    pub rho: Vec<f64>,
}

impl FpGrid {
    pub fn p(&self, i: usize) -> f64 {
        self.p_min + i as f64 * self.dp
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.dp
    }

    pub fn mean(&self) -> f64 {
        self.rho.iter().enumerate().map(|(i, r)| r * self.p(i)).sum::<f64>() * self.dp / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * (self.p(i) - m).powi(2))
            .sum::<f64>()
            * self.dp
            / self.mass()
    }

    /// Unit mass concentrated in the cell nearest to `p0`.
    pub fn delta(p_min: f64, dp: f64, n: usize, p0: f64) -> Self {
        let mut rho = vec![0.0; n];
        let i = (((p0 - p_min) / dp).round() as usize).min(n - 1);
        rho[i] = 1.0 / dp;
        Self { p_min, dp, rho }
    }
}

/// Maps a map diffusion constant (variance per step) to the PDE coefficient.
pub fn d_pde_from_map(d: f64) -> f64 {
    0.5 * d
}

/// Explicit conservative finite-volume integration up to time `t_end`.
/// `d_pde` is the coefficient of `∂²p`; zero-flux boundaries conserve mass.
pub fn fokker_planck_evolve(
    grid: &FpGrid,
    d_pde: f64,
    lambda: f64,
    dt: f64,
    t_end: f64,
    form: FpForm,
) -> Result<FpGrid> {
    if d_pde < 0.0 || !(dt > 0.0) || t_end < 0.0 {
        return Err(invalid("dt", "need d_pde >= 0, dt > 0, t >= 0"));
    }
    let n = grid.rho.len();
    let dp = grid.dp;
    let face_p = |i: usize| grid.p_min + (i as f64 + 0.5) * dp;
    let mut diff = vec![0.0; n.saturating_sub(1)];
    let mut drift = vec![0.0; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        let p = face_p(i);
        match form {
            FpForm::Dissipative => {
                diff[i] = d_pde;
                drift[i] = lambda * p;
            }
            FpForm::Literal => {
                diff[i] = 2.0 * d_pde + ((1.0 - lambda) * p).powi(2);
                drift[i] = 1.0 - lambda;
            }
        }
    }
    let d_max = diff.iter().cloned().fold(0.0, f64::max);
    if d_max > 0.0 && dt > 0.4 * dp * dp / d_max {
        return Err(Error::Numerical(format!(
            "dt = {dt} exceeds the explicit stability bound {}",
            0.4 * dp * dp / d_max
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let mut rho = grid.rho.clone();
    let mut flux = vec![0.0; n.saturating_sub(1)];
    for _ in 0..steps {
        // Flux into cell i from face i+½ equals (drift·ρ̄ + diff·∂pρ).
        for i in 0..n - 1 {
            let avg = 0.5 * (rho[i] + rho[i + 1]);
            let grad = (rho[i + 1] - rho[i]) / dp;
            flux[i] = drift[i] * avg + diff[i] * grad;
        }
        for i in 0..n {
            let right = if i + 1 < n { flux[i] } else { 0.0 };
            let left = if i > 0 { flux[i - 1] } else { 0.0 };
            rho[i] += dt * (right - left) / dp;
        }
    }
    Ok(FpGrid {
        p_min: grid.p_min,
        dp,
        rho,
    })
}

/// Box-counting result: dimension, fit residual and `(ε, N(ε))` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCount {
    pub dimension: f64,
    pub residual: f64,
    pub counts: Vec<(f64, usize)>,
}

/// Slope of `ln N(ε)` against `ln(1/ε)` for points of the unit square.
pub fn box_counting_dimension(points: &[PhasePoint], scales: &[f64]) -> Result<BoxCount> {
    if points.len() < 10_000 {
        return Err(invalid("points", format!("{} < 10^4", points.len())));
    }
    if scales.len() < 4 {
        return Err(invalid("scales", "need at least 4 scales"));
    }
    let lo = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 100.0 {
        return Err(invalid("scales", "scales must be positive and span >= 2 decades"));
    }
    let mut counts = Vec::with_capacity(scales.len());
    for &eps in scales {
        let m = (1.0 / eps).ceil() as u64;
        let idx = |pt: &PhasePoint| {
            let i = ((pt.x / eps) as u64).min(m - 1);
            let j = ((pt.p / eps) as u64).min(m - 1);
            i * m + j
        };
        let count = if m * m <= 1 << 26 {
            let mut bits = vec![0u64; ((m * m) as usize).div_ceil(64)];
            for pt in points {
                let k = idx(pt) as usize;
                bits[k / 64] |= 1 << (k % 64);
            }
            bits.iter().map(|w| w.count_ones() as usize).sum()
        } else {
            points.iter().map(idx).collect::<HashSet<u64>>().len()
        };
        counts.push((eps, count));
    }
    let xs: Vec<f64> = counts.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let (slope, _, residual, _) = linear_fit(&xs, &ys);
    Ok(BoxCount {
        dimension: slope,
        residual,
        counts,
    })
}
