//! Closed quantum kicked rotor: split-step Floquet evolution in the angular
//! momentum basis, localization fits and crossover-time estimates.

use std::f64::consts::{E, PI, TAU};
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::ensembles::{evolve_ensemble, linear_fit, r_squared, RotorInit, RotorMap};
use crate::error::{invalid, Error, Result};
use crate::quantum::{CMatrix, CVector, C64};

/// Inverse golden ratio `(√5 − 1)/2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// How a Planck-constant fraction `r` maps to the effective ħ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HbarConvention {
    /// `ħ/2π = r`.
    #[default]
    Angular,
    /// `2πħ = r`, as printed.
    Literal,
}

pub fn hbar_from_fraction(r: f64, conv: HbarConvention) -> f64 {
    match conv {
        HbarConvention::Angular => TAU * r,
        HbarConvention::Literal => r / TAU,
    }
}

/// Free-rotation phase per period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationPhase {
    /// `e^{−iħl²/2}`, the quantization of `H = p²/2`.
    #[default]
    Half,
    /// `e^{−iħl²}`, as printed.
    Literal,
}

impl RotationPhase {
    pub fn angle(self, hbar: f64, l: i64) -> f64 {
        let l2 = (l * l) as f64;
        match self {
            RotationPhase::Half => -0.5 * hbar * l2,
            RotationPhase::Literal => -hbar * l2,
        }
    }
}

/// Amplitudes `ψ_l`, `l ∈ [−L, L]`, stored at index `l + L`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorWavefunction {
    pub psi: Vec<C64>,
    pub hbar: f64,
    /// Kick strength `K/ħ`.
    pub k: f64,
}

impl RotorWavefunction {
    pub fn momentum_eigenstate(l_max: usize, l0: i64, hbar: f64, k: f64) -> Result<Self> {
        if l0.unsigned_abs() as usize > l_max {
            return Err(invalid("l0", "outside the basis"));
        }
        let mut psi = vec![C64::new(0.0, 0.0); 2 * l_max + 1];
        psi[(l0 + l_max as i64) as usize] = C64::new(1.0, 0.0);
        Ok(Self { psi, hbar, k })
    }

    pub fn l_max(&self) -> usize {
        self.psi.len() / 2
    }

    pub fn l_values(&self) -> impl Iterator<Item = i64> + '_ {
        let lm = self.l_max() as i64;
        (-lm..=lm).into_iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `⟨p²⟩/2` with `p = ħl`.
    pub fn energy(&self) -> f64 {
        let lm = self.l_max() as i64;
        0.5 * self.hbar
            * self.hbar
            * self
                .psi
                .iter()
                .enumerate()
                .map(|(i, z)| z.norm_sqr() * ((i as i64 - lm) as f64).powi(2))
                .sum::<f64>()
    }

    /// Occupation of the `width` outermost rows on each side.
    pub fn edge_probability(&self, width: usize) -> f64 {
        let n = self.psi.len();
        let w = width.min(n / 2);
        self.psi[..w].iter().chain(&self.psi[n - w..]).map(|z| z.norm_sqr()).sum()
    }
}

/// Forward/inverse FFT pair of a fixed length with scratch space.
pub struct FftPair {
    pub len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let s = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            len,
            fwd,
            inv,
            scratch: vec![C64::new(0.0, 0.0); s],
        }
    }

    /// `x_j ← Σ_a x_a e^{−2πi aj/M}` (unnormalized).
    pub fn forward(&mut self, buf: &mut [C64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    /// `x_j ← Σ_a x_a e^{+2πi aj/M}` (unnormalized).
    pub fn inverse(&mut self, buf: &mut [C64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
    }
}

/// Precomputed one-period propagator `U_kick U_rot`.
pub struct FloquetOperator {
    pub hbar: f64,
    pub k: f64,
    rot: Vec<C64>,
    kick: Vec<C64>,
    fft: FftPair,
}

impl FloquetOperator {
    pub fn new(l_max: usize, hbar: f64, k: f64, phase: RotationPhase) -> Result<Self> {
        if !(hbar > 0.0) || !k.is_finite() {
            return Err(invalid("hbar", "need hbar > 0 and finite k"));
        }
        let n = 2 * l_max + 1;
        let lm = l_max as i64;
        let rot = (0..n)
            .map(|i| C64::from_polar(1.0, phase.angle(hbar, i as i64 - lm)))
            .collect();
        let kick = (0..n)
            .map(|j| C64::from_polar(1.0 / n as f64, -k * (TAU * j as f64 / n as f64).cos()))
            .collect();
        Ok(Self {
            hbar,
            k,
            rot,
            kick,
            fft: FftPair::new(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.rot.len()
    }

    /// Rotation phases, then `e^{−ik cos θ}` on the angle grid.
    pub fn apply(&mut self, psi: &mut [C64]) {
        for (z, r) in psi.iter_mut().zip(&self.rot) {
            *z *= r;
        }
        self.apply_kick(psi);
    }

    pub fn apply_kick(&mut self, psi: &mut [C64]) {
        self.fft.inverse(psi);
        for (z, kk) in psi.iter_mut().zip(&self.kick) {
            *z *= kk;
        }
        self.fft.forward(psi);
    }

    /// Dense matrix of the propagator, column by column.
    pub fn dense(&mut self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        let mut col = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            col[c] = C64::new(1.0, 0.0);
            self.apply(&mut col);
            for r in 0..n {
                m[(r, c)] = col[r];
            }
        }
        m
    }
}

/// One Floquet period applied to `ψ`. Fails if the edge rows are occupied.
pub fn floquet_step(psi: &mut RotorWavefunction, op: &mut FloquetOperator) -> Result<()> {
    if op.dim() != psi.psi.len() {
        return Err(Error::Dimension("operator and state sizes differ".into()));
    }
    op.apply(&mut psi.psi);
    let edge = psi.edge_probability(EDGE_ROWS);
    if edge > EDGE_TOL {
        return Err(Error::Truncation(format!("edge occupation {edge:.3e} at L_max = {}", psi.l_max())));
    }
    Ok(())
}

pub const EDGE_ROWS: usize = 8;
pub const EDGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct QkrRun {
    /// `E(n)` for `n = 0..=n_steps`.
    pub energy: Vec<f64>,
    /// `P(l)` after the last step.
    pub final_p: Vec<f64>,
    pub l_max: usize,
    pub hbar: f64,
    /// Largest L_max tried before a run completed without leakage.
    pub retries: Vec<usize>,
}

impl QkrRun {
    pub fn l_values(&self) -> Vec<i64> {
        let lm = self.l_max as i64;
        (-lm..=lm).collect()
    }
}

/// Evolves `ψ0 = |l0⟩` for `n_steps`, doubling `L_max` when the edge guard trips.
pub fn evolve(
    l_max: usize,
    l0: i64,
    hbar: f64,
    kick_k: f64,
    phase: RotationPhase,
    n_steps: usize,
) -> Result<QkrRun> {
    let mut lm = l_max;
    let mut retries = Vec::new();
    for _ in 0..6 {
        match evolve_fixed(lm, l0, hbar, kick_k, phase, n_steps) {
            Ok(mut run) => {
                run.retries = retries;
                return Ok(run);
            }
            Err(Error::Truncation(_)) => {
                retries.push(lm);
                lm *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Truncation(format!("leakage persists at L_max = {lm}")))
}

/// Evolution at a fixed basis size.
pub fn evolve_fixed(
    l_max: usize,
    l0: i64,
    hbar: f64,
    kick_k: f64,
    phase: RotationPhase,
    n_steps: usize,
) -> Result<QkrRun> {
    if n_steps < 1 {
        return Err(invalid("n_steps", "must be >= 1"));
    }
    let mut psi = RotorWavefunction::momentum_eigenstate(l_max, l0, hbar, kick_k)?;
    let mut op = FloquetOperator::new(l_max, hbar, kick_k, phase)?;
    let mut energy = Vec::with_capacity(n_steps + 1);
    energy.push(psi.energy());
    for _ in 0..n_steps {
        floquet_step(&mut psi, &mut op)?;
        energy.push(psi.energy());
    }
    Ok(QkrRun {
        energy,
        final_p: psi.probabilities(),
        l_max,
        hbar,
        retries: Vec::new(),
    })
}

/// Default basis size: `max(8·k²/4, 512)`.
pub fn default_l_max(kick_k: f64) -> usize {
    let est = (kick_k * kick_k / 4.0).ceil() as usize;
    (8 * est).max(512)
}

/// Exponential-tail fit of `P(l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationFit {
    pub length: f64,
    pub r_squared: f64,
    pub center: f64,
    pub window: (f64, f64),
    /// `r_squared < 0.8`.
    pub poor: bool,
}

/// Fits `ln P` against `|l − l_c|`. The window excludes the central 20% and
/// the outer 10% of the significant support, defined as the region where
/// `P` exceeds `1e−25` of its maximum.
pub fn localization_length(p: &[f64], l_values: &[i64]) -> Result<LocalizationFit> {
    if p.len() != l_values.len() || p.len() < 5 {
        return Err(Error::Dimension("P and l grids must match (>= 5 points)".into()));
    }
    let total: f64 = p.iter().sum();
    let center = p.iter().zip(l_values).map(|(w, &l)| w * l as f64).sum::<f64>() / total;
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    let extent = p
        .iter()
        .zip(l_values)
        .filter(|(&w, _)| w > 1e-25 * pmax)
        .map(|(_, &l)| (l as f64 - center).abs())
        .fold(0.0, f64::max);
    let (lo, hi) = (0.2 * extent, 0.9 * extent);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&w, &l) in p.iter().zip(l_values) {
        let d = (l as f64 - center).abs();
        if d >= lo && d <= hi && w > 0.0 {
            xs.push(d);
            ys.push(w.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Numerical("too few tail points".into()));
    }
    let (slope, _, _, _) = linear_fit(&xs, &ys);
    let r2 = r_squared(&xs, &ys);
    Ok(LocalizationFit {
        length: -1.0 / slope,
        r_squared: r2,
        center,
        window: (lo, hi),
        poor: r2 < 0.8,
    })
}

/// `(4K²/(πe), K²/(2π²ħ²))`: the information-supply and uncertainty-based
/// break times.
pub fn crossover_estimates(k_classical: f64, hbar: f64) -> Result<(f64, f64)> {
    if !(k_classical > 0.0 && hbar > 0.0) {
        return Err(invalid("K", "need K > 0 and hbar > 0"));
    }
    let k2 = k_classical * k_classical;
    Ok((4.0 * k2 / (PI * E), k2 / (2.0 * PI * PI * hbar * hbar)))
}

/// Classical standard-map energy `⟨p²⟩/2` from `p = 0`, uniform angle.
pub fn classical_reference_energy(k_classical: f64, n_steps: usize, n_traj: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(evolve_ensemble(
        &RotorMap::Standard { k: k_classical },
        &RotorInit::Line { p0: 0.0 },
        n_steps,
        n_traj,
        seed,
        &[],
    )?
    .energy)
}

/// Window average of a series over `[n0, n1]`.
pub fn window_mean(series: &[f64], n0: usize, n1: usize) -> f64 {
    let w = &series[n0..=n1];
    w.iter().sum::<f64>() / w.len() as f64
}

pub fn state_vector(psi: &RotorWavefunction) -> CVector {
    CVector::from_vec(psi.psi.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::open_rotor::bessel_j;
    use crate::quantum::{random_density_matrix, unitarity_defect, von_neumann_entropy, DensityMatrix};
    use crate::seeding::stream;

    #[test]
    fn free_rotor_keeps_distribution() {
        let mut psi = RotorWavefunction::momentum_eigenstate(32, 3, 0.7, 0.0).unwrap();
        psi.psi[32 + 5] = C64::new(0.6, 0.0);
        psi.psi[32 + 3] = C64::new(0.8, 0.0);
        let p0 = psi.probabilities();
        let mut op = FloquetOperator::new(32, 0.7, 0.0, RotationPhase::Half).unwrap();
        for _ in 0..50 {
            floquet_step(&mut psi, &mut op).unwrap();
        }
        for (a, b) in psi.probabilities().iter().zip(&p0) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_kick_gives_bessel_squares() {
        let k = 7.3;
        let mut psi = RotorWavefunction::momentum_eigenstate(64, 0, 1.0, k).unwrap();
        let mut op = FloquetOperator::new(64, 1.0, k, RotationPhase::Half).unwrap();
        floquet_step(&mut psi, &mut op).unwrap();
        for l in -20i64..=20 {
            let expected = bessel_j(l.unsigned_abs() as usize, k).powi(2);
            assert!((psi.psi[(l + 64) as usize].norm_sqr() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn norm_conserved_over_many_steps() {
        let hbar = hbar_from_fraction(0.1 / GOLDEN, HbarConvention::Angular);
        let mut psi = RotorWavefunction::momentum_eigenstate(256, 0, hbar, 5.0 / hbar).unwrap();
        let mut op = FloquetOperator::new(256, hbar, 5.0 / hbar, RotationPhase::Half).unwrap();
        for _ in 0..10_000 {
            floquet_step(&mut psi, &mut op).unwrap();
        }
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn edge_guard_trips_and_auto_enlarges() {
        assert!(matches!(evolve_fixed(16, 0, 1.0, 12.0, RotationPhase::Half, 5), Err(Error::Truncation(_))));
        let run = evolve(16, 0, 1.0, 12.0, RotationPhase::Half, 5).unwrap();
        assert!(run.l_max > 16 && !run.retries.is_empty());
    }

    #[test]
    fn zero_kick_energy_constant() {
        let run = evolve_fixed(16, 2, 0.5, 0.0, RotationPhase::Literal, 20).unwrap();
        assert!(run.energy.iter().all(|&e| (e - 0.5).abs() < 1e-14));
    }

    #[test]
    fn entropy_conserved_under_floquet_conjugation() {
        let mut op = FloquetOperator::new(20, 1.3, 4.0, RotationPhase::Half).unwrap();
        let u = op.dense();
        assert!(unitarity_defect(&u) < 1e-12);
        let rho = random_density_matrix(41, &mut stream(4, 0));
        let s0 = von_neumann_entropy(&rho, 1.0).unwrap();
        let mut cur = rho.clone();
        for _ in 0..5 {
            cur = DensityMatrix::new_unchecked(u.clone() * cur.matrix() * u.adjoint());
        }
        assert!((von_neumann_entropy(&cur, 1.0).unwrap() - s0).abs() < 1e-9);
    }

    #[test]
    fn synthetic_exponential_fit() {
        let l: Vec<i64> = (-300..=300).collect();
        let p: Vec<f64> = l.iter().map(|&x| (-(x.abs() as f64) / 20.0).exp()).collect();
        let fit = localization_length(&p, &l).unwrap();
        assert!((fit.length - 20.0).abs() < 1.0);
        assert!(fit.r_squared > 0.999 && !fit.poor);
    }

    #[test]
    fn crossover_examples() {
        let (info, _) = crossover_estimates(10.0, 1.0).unwrap();
        assert!((info - 400.0 / (PI * E)).abs() < 1e-12);
        assert!((info - 46.84).abs() < 0.01);
        let (a1, b1) = crossover_estimates(3.0, 0.2).unwrap();
        let (a2, b2) = crossover_estimates(6.0, 0.2).unwrap();
        assert!((a2 / a1 - 4.0).abs() < 1e-12 && (b2 / b1 - 4.0).abs() < 1e-12);
        let hbar = hbar_from_fraction(0.1 / GOLDEN, HbarConvention::Literal);
        let (_, unc) = crossover_estimates(5.0, hbar).unwrap();
        assert!((unc - 25.0 / (2.0 * PI * PI * hbar * hbar)).abs() < 1e-9);
        assert!(crossover_estimates(0.0, 1.0).is_err());
    }

    #[test]
    fn hbar_conventions() {
        assert!((hbar_from_fraction(0.02, HbarConvention::Angular) - TAU * 0.02).abs() < 1e-15);
        assert!((hbar_from_fraction(0.02, HbarConvention::Literal) - 0.02 / TAU).abs() < 1e-15);
    }
}
