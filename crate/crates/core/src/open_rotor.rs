//! Density-matrix kicked rotor under continuous measurement and friction:
//! per-period decoherence maps, the Bessel kick convolution, a momentum-jump
//! dissipator and comparison with the noisy classical map.

use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::ensembles::Histogram1D;
use crate::error::{invalid, Error, Result};
use crate::quantum::{symmetrize, von_neumann_entropy, wigner_cylinder, CMatrix, DensityMatrix, WignerGrid, C64};
use crate::rotor::RotationPhase;

/// Which observable the meter records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementMode {
    /// Mean angular momentum: coherences decay as `e^{−γ(l−m)²}`.
    MeanL,
    /// Full distribution `P(l)`: every coherence decays by `e^{−γ}`.
    #[default]
    FullPl,
}

/// Friction term evaluated between rotation and kick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DissipatorForm {
    /// Double commutator with `x = l` and `H = ħ²l²/2`, as printed.
    Literal,
    /// Momentum-lowering jumps `√|l|` towards `l = 0` at rate `λ`.
    #[default]
    Jump,
}

/// Density matrix `ρ_{lm}`, `l, m ∈ [−L, L]`, at index `l + L`.
#[derive(Debug, Clone)]
pub struct RotorDensity {
    pub rho: CMatrix,
    pub hbar: f64,
    /// Kick strength `K/ħ`.
    pub k: f64,
    pub gamma: f64,
    pub mode: MeasurementMode,
    pub lambda: f64,
    pub phase: RotationPhase,
}

impl RotorDensity {
    /// `|l0⟩⟨l0|`.
    pub fn momentum_eigenstate(l_max: usize, l0: i64, hbar: f64, k: f64) -> Result<Self> {
        if l0.unsigned_abs() as usize > l_max {
            return Err(invalid("l0", "outside the basis"));
        }
        if !(hbar > 0.0) {
            return Err(invalid("hbar", "must be > 0"));
        }
        let n = 2 * l_max + 1;
        let mut rho = CMatrix::zeros(n, n);
        let i = (l0 + l_max as i64) as usize;
        rho[(i, i)] = C64::new(1.0, 0.0);
        Ok(Self {
            rho,
            hbar,
            k,
            gamma: 0.0,
            mode: MeasurementMode::FullPl,
            lambda: 0.0,
            phase: RotationPhase::Half,
        })
    }

    pub fn with_measurement(mut self, gamma: f64, mode: MeasurementMode) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(invalid("gamma", format!("{gamma} must be >= 0")));
        }
        self.gamma = gamma;
        self.mode = mode;
        Ok(self)
    }

    pub fn with_friction(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be >= 0")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_phase(mut self, phase: RotationPhase) -> Self {
        self.phase = phase;
        self
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn l_max(&self) -> usize {
        self.dim() / 2
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re).collect()
    }

    /// `ħ²⟨l²⟩/2`.
    pub fn energy(&self) -> f64 {
        let lm = self.l_max() as i64;
        0.5 * self.hbar
            * self.hbar
            * self
                .probabilities()
                .iter()
                .enumerate()
                .map(|(i, p)| p * ((i as i64 - lm) as f64).powi(2))
                .sum::<f64>()
    }

    pub fn mean_l(&self) -> f64 {
        let lm = self.l_max() as i64;
        self.probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| p * (i as i64 - lm) as f64)
            .sum()
    }

    /// Diagonal weight of the `width` outermost rows on each side.
    pub fn edge_probability(&self, width: usize) -> f64 {
        let p = self.probabilities();
        let n = p.len();
        let w = width.min(n / 2);
        p[..w].iter().chain(&p[n - w..]).map(|x| x.abs()).sum()
    }

    pub fn entropy(&self) -> Result<f64> {
        von_neumann_entropy(&DensityMatrix::new_unchecked(self.rho.clone()), 1.0)
    }

    pub fn wigner(&self, n_theta: usize) -> Result<WignerGrid> {
        wigner_cylinder(&self.rho, &crate::quantum::theta_grid(n_theta))
    }
}

/// `J_n(x)` for `n = 0..=n_max` by Miller's backward recurrence, normalized
/// with `J_0 + 2Σ J_{2m} = 1`.
pub fn bessel_j_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = n_max.max(ax as usize);
    let mut start = top + 20 + (40.0 * top.max(1) as f64).sqrt() as usize;
    start += start % 2;
    let (mut jp, mut j) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        let jm = 2.0 * n as f64 / ax * j - jp;
        jp = j;
        j = jm;
        let m = n - 1;
        if m <= n_max {
            out[m] = j;
        }
        if m % 2 == 0 && m > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    for (n, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && n % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// `J_n(x)` for integer `n ≥ 0`.
pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_all(n, x)[n]
}

/// Coefficients `b_n(x) = iⁿ J_n(x)`, `|n| ≤ n_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselKickKernel {
    pub x: f64,
    pub n_cut: usize,
    /// `b_n` at index `n + n_cut`.
    pub coeffs: Vec<C64>,
}

impl BesselKickKernel {
    pub fn get(&self, n: i64) -> C64 {
        if n.unsigned_abs() as usize > self.n_cut {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[(n + self.n_cut as i64) as usize]
    }

    pub fn completeness(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn i_pow(n: i64) -> C64 {
    match n.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Builds `b_n(x)` for `|n| ≤ n_cut`; requires `n_cut ≥ |x| + 40`.
pub fn bessel_coeffs(x: f64, n_cut: usize) -> Result<BesselKickKernel> {
    if !x.is_finite() {
        return Err(invalid("k", "must be finite"));
    }
    if (n_cut as f64) < x.abs() + 40.0 {
        return Err(Error::Truncation(format!("n_cut = {n_cut} < |k| + 40")));
    }
    let j = bessel_j_all(n_cut, x);
    let mut coeffs = Vec::with_capacity(2 * n_cut + 1);
    for n in -(n_cut as i64)..=n_cut as i64 {
        let jn = if n < 0 && n % 2 != 0 { -j[(-n) as usize] } else { j[n.unsigned_abs() as usize] };
        coeffs.push(i_pow(n) * jn);
    }
    let kernel = BesselKickKernel { x, n_cut, coeffs };
    let tail = kernel.get(n_cut as i64).norm();
    let defect = (kernel.completeness() - 1.0).abs();
    if tail > 1e-12 || defect > 1e-10 {
        return Err(Error::Truncation(format!("tail {tail:.2e}, completeness defect {defect:.2e}")));
    }
    Ok(kernel)
}

/// Smallest `2^a 3^b 5^c ≥ n`.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// `ρ → BρB†` with `B_{l l'} = b_{l−l'}(−k)`, i.e. the kick `e^{−ik cos θ}`,
/// as zero-padded FFT convolutions along both indices.
pub struct KickPropagator {
    pub kernel: BesselKickKernel,
    n: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    spectrum: Vec<C64>,
}

impl KickPropagator {
    pub fn new(l_max: usize, k: f64) -> Result<Self> {
        let n_cut = (k.abs() + 40.0).ceil() as usize;
        let kernel = bessel_coeffs(-k, n_cut)?;
        let n = 2 * l_max + 1;
        let m = smooth_size(n + 2 * n_cut);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut h = vec![C64::new(0.0, 0.0); m];
        for d in -(n_cut as i64)..=n_cut as i64 {
            h[d.rem_euclid(m as i64) as usize] = kernel.get(d);
        }
        fwd.process(&mut h);
        let scale = 1.0 / m as f64;
        h.iter_mut().for_each(|z| *z *= scale);
        Ok(Self {
            kernel,
            n,
            m,
            fwd,
            inv,
            spectrum: h,
        })
    }

    fn convolve_columns(&self, mat: &mut CMatrix) {
        let (n, m) = (self.n, self.m);
        let scratch_len = self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len());
        mat.as_mut_slice().par_chunks_mut(n).for_each_init(
            || (vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); scratch_len]),
            |(buf, scratch), col| {
                buf[..n].copy_from_slice(col);
                buf[n..].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                self.fwd.process_with_scratch(buf, scratch);
                for (z, h) in buf.iter_mut().zip(&self.spectrum) {
                    *z *= h;
                }
                self.inv.process_with_scratch(buf, scratch);
                col.copy_from_slice(&buf[..n]);
            },
        );
    }

    pub fn apply(&self, rho: &mut CMatrix) -> Result<()> {
        if rho.nrows() != self.n || rho.ncols() != self.n {
            return Err(Error::Dimension("kick size differs from state".into()));
        }
        self.convolve_columns(rho);
        rho.adjoint_mut();
        self.convolve_columns(rho);
        rho.adjoint_mut();
        Ok(())
    }
}

/// Rotation phases combined with measurement-induced decay of coherences.
pub fn decoherence_rotation_step(state: &mut RotorDensity) {
    let n = state.dim();
    let lm = state.l_max() as i64;
    let phases: Vec<f64> = (0..n).map(|i| state.phase.angle(state.hbar, i as i64 - lm)).collect();
    let (gamma, mode) = (state.gamma, state.mode);
    let off = (-gamma).exp();
    state
        .rho
        .as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(c, col)| {
            for (r, z) in col.iter_mut().enumerate() {
                if r == c {
                    continue;
                }
                let decay = match mode {
                    MeasurementMode::MeanL => (-gamma * ((r as f64 - c as f64).powi(2))).exp(),
                    MeasurementMode::FullPl => off,
                };
                *z *= C64::from_polar(decay, phases[r] - phases[c]);
            }
        });
}

/// Applies `n_sub` explicit Euler substeps of the friction term over one
/// period. The jump form fails if a diagonal entry drops below `−1e−6`.
pub fn dissipative_substep(state: &mut RotorDensity, n_sub: usize, form: DissipatorForm) -> Result<()> {
    let lambda = state.lambda;
    if lambda == 0.0 {
        return Ok(());
    }
    if n_sub == 0 {
        return Err(invalid("n_sub", "must be >= 1"));
    }
    let n = state.dim();
    let lm = state.l_max() as i64;
    let dt = 1.0 / n_sub as f64;
    match form {
        DissipatorForm::Literal => {
            let hbar = state.hbar;
            let x: Vec<f64> = (0..n).map(|i| (i as i64 - lm) as f64).collect();
            let h: Vec<f64> = x.iter().map(|l| 0.5 * hbar * hbar * l * l).collect();
            // [H, x] is diagonal with entries (H_l − H_l)·x_l.
            let cx: Vec<f64> = (0..n).map(|i| (h[i] - h[i]) * x[i]).collect();
            for _ in 0..n_sub {
                for c in 0..n {
                    for r in 0..n {
                        let z = state.rho[(r, c)];
                        let a = x[r] * z * cx[c] - cx[r] * x[r] * z;
                        let b = cx[r] * z * x[c] - z * x[c] * cx[c];
                        state.rho[(r, c)] += 0.5 * lambda * dt * (a - b);
                    }
                }
            }
            Ok(())
        }
        DissipatorForm::Jump => {
            let abs_l: Vec<f64> = (0..n).map(|i| (i as i64 - lm).abs() as f64).collect();
            let sq: Vec<f64> = abs_l.iter().map(|a| a.sqrt()).collect();
            let mut next = state.rho.clone();
            for _ in 0..n_sub {
                let old = &state.rho;
                let old_s = old.as_slice();
                next.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(c, col)| {
                    let lc = c as i64 - lm;
                    for (r, z) in col.iter_mut().enumerate() {
                        let lr = r as i64 - lm;
                        let cur = old_s[r + c * n];
                        let mut d = -0.5 * lambda * (abs_l[r] + abs_l[c]) * cur;
                        if lr >= 0 && lc >= 0 && r + 1 < n && c + 1 < n {
                            d += lambda * sq[r + 1] * sq[c + 1] * old_s[(r + 1) + (c + 1) * n];
                        }
                        if lr <= 0 && lc <= 0 && r >= 1 && c >= 1 {
                            d += lambda * sq[r - 1] * sq[c - 1] * old_s[(r - 1) + (c - 1) * n];
                        }
                        *z = cur + dt * d;
                    }
                });
                std::mem::swap(&mut state.rho, &mut next);
            }
            let min_diag = state.rho.diagonal().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            if min_diag < -1e-6 {
                return Err(Error::Numerical(format!("negative population {min_diag:.3e}; reduce dt")));
            }
            Ok(())
        }
    }
}

/// Substeps per period keeping `λ·dt·L_max ≤ 0.05`.
pub fn default_substeps(lambda: f64, l_max: usize) -> usize {
    ((lambda * l_max as f64 / 0.05).ceil() as usize).max(1)
}

/// One period: rotation and decoherence, friction, kick.
pub fn measured_qkr_step(
    state: &mut RotorDensity,
    kick: &KickPropagator,
    n_sub: usize,
    form: DissipatorForm,
) -> Result<()> {
    decoherence_rotation_step(state);
    dissipative_substep(state, n_sub, form)?;
    kick.apply(&mut state.rho)?;
    symmetrize(&mut state.rho);
    Ok(())
}

pub const EDGE_ROWS: usize = 8;
pub const EDGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct OpenRotorRun {
    /// `E(n)`, `n = 0..=n_steps`.
    pub energy: Vec<f64>,
    /// `(n, S(ρ(n)))` at the requested stride.
    pub entropy: Vec<(usize, f64)>,
    pub trace: Vec<f64>,
    pub state: RotorDensity,
}

/// Evolves for `n_steps` periods. Entropy is recorded every `entropy_every`
/// steps (0 disables it). Fails if the boundary rows become occupied.
pub fn evolve_open(
    mut state: RotorDensity,
    n_steps: usize,
    form: DissipatorForm,
    entropy_every: usize,
) -> Result<OpenRotorRun> {
    if n_steps < 1 {
        return Err(invalid("n_steps", "must be >= 1"));
    }
    let kick = KickPropagator::new(state.l_max(), state.k)?;
    let n_sub = default_substeps(state.lambda, state.l_max());
    let mut energy = vec![state.energy()];
    let mut trace = vec![state.trace()];
    let mut entropy = Vec::new();
    if entropy_every > 0 {
        entropy.push((0, state.entropy()?));
    }
    for n in 1..=n_steps {
        measured_qkr_step(&mut state, &kick, n_sub, form)?;
        let edge = state.edge_probability(EDGE_ROWS);
        if edge > EDGE_TOL {
            return Err(Error::Truncation(format!(
                "edge occupation {edge:.3e} at step {n}, L_max = {}",
                state.l_max()
            )));
        }
        energy.push(state.energy());
        trace.push(state.trace());
        if entropy_every > 0 && n % entropy_every == 0 {
            entropy.push((n, state.entropy()?));
        }
    }
    Ok(OpenRotorRun {
        energy,
        entropy,
        trace,
        state,
    })
}

/// Evolves until `E` changes by less than `tol` (relative) over 10 periods,
/// with at least `min_steps` and at most `max_steps` periods. Returns the
/// state, the number of periods and whether the rule was met.
pub fn evolve_to_stationarity(
    mut state: RotorDensity,
    form: DissipatorForm,
    tol: f64,
    min_steps: usize,
    max_steps: usize,
) -> Result<(RotorDensity, usize, bool)> {
    let kick = KickPropagator::new(state.l_max(), state.k)?;
    let n_sub = default_substeps(state.lambda, state.l_max());
    let mut energy = vec![state.energy()];
    for n in 1..=max_steps {
        measured_qkr_step(&mut state, &kick, n_sub, form)?;
        if state.edge_probability(EDGE_ROWS) > EDGE_TOL {
            return Err(Error::Truncation(format!("edge occupied at step {n}")));
        }
        energy.push(state.energy());
        if n >= min_steps.max(10) {
            let (a, b) = (energy[n - 10], energy[n]);
            if (b - a).abs() <= tol * b.abs().max(1e-300) {
                return Ok((state, n, true));
            }
        }
    }
    Ok((state, max_steps, false))
}

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension("distributions differ in length".into()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyMapComparison {
    /// Total variation between `P(l)` and the classical histogram; classical
    /// mass outside the basis counts fully.
    pub tv: f64,
    pub energy_quantum: f64,
    pub energy_classical: f64,
    /// `|E_q − E_c| / E_c`.
    pub energy_rel_diff: f64,
}

/// Bins classical momenta at `Δp = ħ` centred on `lħ` and compares with the
/// quantum diagonal.
pub fn compare_with_noisy_map(p_quantum: &[f64], hbar: f64, momenta: &[f64]) -> Result<NoisyMapComparison> {
    if p_quantum.len() % 2 == 0 || momenta.is_empty() {
        return Err(Error::Dimension("need an odd quantum grid and a non-empty cloud".into()));
    }
    if !(hbar > 0.0) {
        return Err(invalid("hbar", "must be > 0"));
    }
    let n = p_quantum.len();
    let lm = (n / 2) as f64;
    let hist = Histogram1D::from_samples(momenta.iter().copied(), (-lm - 0.5) * hbar, hbar, n)?;
    let pc: Vec<f64> = hist.counts.iter().map(|&c| c as f64 / momenta.len() as f64).collect();
    let outside = hist.outside as f64 / momenta.len() as f64;
    let tv = tv_distance(p_quantum, &pc)? + 0.5 * outside;
    let eq = 0.5
        * hbar
        * hbar
        * p_quantum
            .iter()
            .enumerate()
            .map(|(i, p)| p * (i as f64 - lm).powi(2))
            .sum::<f64>();
    let ec = 0.5 * momenta.iter().map(|p| p * p).sum::<f64>() / momenta.len() as f64;
    Ok(NoisyMapComparison {
        tv,
        energy_quantum: eq,
        energy_classical: ec,
        energy_rel_diff: (eq - ec).abs() / ec.abs().max(1e-300),
    })
}

/// Curve of antisymmetric period-2 orbits of the damped standard map,
/// `p_b(θ) = K sin θ / (1 + e^{−λ})`.
pub fn zaslavsky_backbone(theta: f64, k_classical: f64, lambda: f64) -> f64 {
    k_classical * theta.sin() / (1.0 + (-lambda).exp())
}

/// Fraction of Wigner mass with `|p − p_b(θ)| ≤ half_width`, `p = ħ·s/2`.
pub fn band_fraction(w: &WignerGrid, hbar: f64, backbone: impl Fn(f64) -> f64, half_width: f64) -> f64 {
    let nt = w.thetas.len();
    let (mut inside, mut total) = (0.0, 0.0);
    for (r, &ph) in w.p_half.iter().enumerate() {
        let p = hbar * ph;
        for (c, &th) in w.thetas.iter().enumerate() {
            let v = w.values[r * nt + c];
            total += v;
            if (p - backbone(th)).abs() <= half_width {
                inside += v;
            }
        }
    }
    inside / total
}

/// Fraction of classical points with `|p − p_b(θ)| ≤ half_width`.
pub fn classical_band_fraction(points: &[(f64, f64)], backbone: impl Fn(f64) -> f64, half_width: f64) -> f64 {
    let hit = points
        .iter()
        .filter(|(th, p)| (p - backbone(th.rem_euclid(TAU))).abs() <= half_width)
        .count();
    hit as f64 / points.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{hermiticity_defect, max_abs, random_pure_state};
    use crate::rotor::FloquetOperator;
    use crate::seeding::stream;
    use proptest::prelude::*;

    #[test]
    fn bessel_reference_values() {
        let cases = [
            (0usize, 1.0, 0.765_197_686_557_966_6),
            (1, 1.0, 0.440_050_585_744_933_5),
            (0, 10.0, -0.245_935_764_451_348_3),
            (5, 10.0, -0.234_061_528_186_793_6),
            (2, 10.0, 0.254_630_313_685_120_6),
            (3, 2.5, 0.216_600_391_039_113_6),
        ];
        for (n, x, v) in cases {
            assert!((bessel_j(n, x) - v).abs() < 1e-13, "J_{n}({x})");
        }
        assert!((bessel_j(3, -2.5) + 0.216_600_391_039_113_6).abs() < 1e-13);
    }

    #[test]
    fn kernel_properties() {
        let k0 = bessel_coeffs(0.0, 40).unwrap();
        assert_eq!(k0.get(0), C64::new(1.0, 0.0));
        assert!((1..=40).all(|n| k0.get(n).norm() == 0.0 && k0.get(-n).norm() == 0.0));
        let k10 = bessel_coeffs(10.0, 50).unwrap();
        assert!((k10.completeness() - 1.0).abs() < 1e-10);
        for n in 0..50 {
            assert!((k10.get(n).norm() - k10.get(-n).norm()).abs() < 1e-15);
        }
        assert!(bessel_coeffs(10.0, 30).is_err());
    }

    #[test]
    fn full_mode_halves_coherences() {
        let mut s = RotorDensity::momentum_eigenstate(4, 0, 0.9, 0.0).unwrap();
        let psi = random_pure_state(9, &mut stream(2, 0));
        s.rho = &psi * psi.adjoint();
        let before = s.rho.clone();
        s = s.with_measurement(2f64.ln(), MeasurementMode::FullPl).unwrap();
        decoherence_rotation_step(&mut s);
        for r in 0..9 {
            for c in 0..9 {
                let ratio = s.rho[(r, c)].norm() / before[(r, c)].norm();
                let want = if r == c { 1.0 } else { 0.5 };
                assert!((ratio - want).abs() < 1e-12);
            }
        }
        assert!((s.trace() - 1.0).abs() < 1e-14);
        assert!(hermiticity_defect(&s.rho) < 1e-14);
    }

    #[test]
    fn strong_mean_l_measurement_diagonalizes() {
        let mut s = RotorDensity::momentum_eigenstate(4, 0, 0.9, 0.0).unwrap();
        let psi = random_pure_state(9, &mut stream(3, 0));
        s.rho = &psi * psi.adjoint();
        s = s.with_measurement(200.0, MeasurementMode::MeanL).unwrap();
        decoherence_rotation_step(&mut s);
        for r in 0..9 {
            for c in 0..9 {
                if r != c {
                    assert!(s.rho[(r, c)].norm() < 1e-80);
                }
            }
        }
    }

    #[test]
    fn single_kick_diagonal_is_bessel() {
        let k = 6.0;
        let mut s = RotorDensity::momentum_eigenstate(64, 0, 1.0, k).unwrap();
        let kick = KickPropagator::new(64, k).unwrap();
        kick.apply(&mut s.rho).unwrap();
        let j = bessel_j_all(30, k);
        for l in -30i64..=30 {
            let p = s.rho[((l + 64) as usize, (l + 64) as usize)].re;
            assert!((p - j[l.unsigned_abs() as usize].powi(2)).abs() < 1e-13);
        }
        assert!((s.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_kick_is_identity() {
        let mut s = RotorDensity::momentum_eigenstate(8, 0, 1.0, 0.0).unwrap();
        let psi = random_pure_state(17, &mut stream(5, 0));
        s.rho = &psi * psi.adjoint();
        let before = s.rho.clone();
        KickPropagator::new(8, 0.0).unwrap().apply(&mut s.rho).unwrap();
        assert!(max_abs(&(s.rho - before)) < 1e-14);
    }

    #[test]
    fn unmeasured_step_matches_floquet_conjugation() {
        let (l_max, hbar, k) = (48usize, 1.1, 3.0);
        let mut s = RotorDensity::momentum_eigenstate(l_max, 0, hbar, k).unwrap();
        let n = 2 * l_max + 1;
        let mut psi = crate::quantum::CVector::zeros(n);
        for l in -3i64..=3 {
            psi[(l + l_max as i64) as usize] = C64::new(1.0 + l as f64 * 0.1, 0.3 * l as f64);
        }
        psi /= C64::new(psi.norm(), 0.0);
        s.rho = &psi * psi.adjoint();
        let mut u = FloquetOperator::new(l_max, hbar, k, RotationPhase::Half).unwrap().dense();
        let kick = KickPropagator::new(l_max, k).unwrap();
        let mut dense = s.rho.clone();
        for _ in 0..4 {
            measured_qkr_step(&mut s, &kick, 1, DissipatorForm::Jump).unwrap();
            dense = &u * dense * u.adjoint();
        }
        u.fill(C64::new(0.0, 0.0));
        assert!(max_abs(&(s.rho - dense)) < 1e-8);
    }

    #[test]
    fn trace_preserved_over_many_measured_steps() {
        let hbar = 1.0166;
        let k = 5.0 / hbar;
        let s = RotorDensity::momentum_eigenstate(128, 0, hbar, k)
            .unwrap()
            .with_measurement(crate::maps::gamma_from_nu(0.5), MeasurementMode::FullPl)
            .unwrap();
        let run = evolve_open(s, 40, DissipatorForm::Jump, 0).unwrap();
        assert!(run.trace.iter().all(|t| (t - 1.0).abs() < 1e-8));
        assert!(run.energy[40] > run.energy[10]);
    }

    #[test]
    fn entropy_grows_under_pure_decoherence() {
        let mut s = RotorDensity::momentum_eigenstate(6, 0, 0.7, 0.0)
            .unwrap()
            .with_measurement(0.2, MeasurementMode::FullPl)
            .unwrap();
        let psi = random_pure_state(13, &mut stream(6, 0));
        s.rho = &psi * psi.adjoint();
        let kick = KickPropagator::new(6, 0.0).unwrap();
        let mut prev = s.entropy().unwrap();
        for _ in 0..30 {
            measured_qkr_step(&mut s, &kick, 1, DissipatorForm::Jump).unwrap();
            let cur = s.entropy().unwrap();
            assert!(cur >= prev - 1e-10);
            prev = cur;
        }
        assert!(prev > 0.5);
    }

    #[test]
    fn literal_friction_term_vanishes() {
        let mut s = RotorDensity::momentum_eigenstate(5, 2, 0.8, 0.0).unwrap().with_friction(0.4).unwrap();
        let psi = random_pure_state(11, &mut stream(7, 0));
        s.rho = &psi * psi.adjoint();
        let before = s.rho.clone();
        dissipative_substep(&mut s, 10, DissipatorForm::Literal).unwrap();
        assert!(max_abs(&(s.rho - before)) == 0.0);
    }

    #[test]
    fn jump_friction_damps_momentum() {
        let lambda = 0.3;
        let mut s = RotorDensity::momentum_eigenstate(40, 0, 1.0, 0.0).unwrap().with_friction(lambda).unwrap();
        s.rho.fill(C64::new(0.0, 0.0));
        for (l, w) in [(10i64, 0.5), (-4, 0.2), (7, 0.3)] {
            s.rho[((l + 40) as usize, (l + 40) as usize)] = C64::new(w, 0.0);
        }
        let l0 = s.mean_l();
        let mut e_prev = s.energy();
        let n_sub = default_substeps(lambda, 40) * 4;
        for _ in 0..5 {
            dissipative_substep(&mut s, n_sub, DissipatorForm::Jump).unwrap();
            assert!(s.energy() < e_prev);
            e_prev = s.energy();
            assert!((s.trace() - 1.0).abs() < 1e-12);
        }
        let expected = l0 * (-5.0 * lambda).exp();
        assert!((s.mean_l() - expected).abs() / expected.abs() < 0.01, "{} vs {expected}", s.mean_l());
        let mut id = s.clone();
        id.lambda = 0.0;
        let before = id.rho.clone();
        dissipative_substep(&mut id, 10, DissipatorForm::Jump).unwrap();
        assert!(max_abs(&(id.rho - before)) == 0.0);
    }

    #[test]
    fn tv_distance_extremes() {
        let p = vec![0.2, 0.3, 0.5];
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let q = [0.0, 1.0, 0.0];
        let cmp = compare_with_noisy_map(&q, 0.5, &[0.01, -0.1, 0.2]).unwrap();
        assert!(cmp.tv < 1e-15);
        let far = compare_with_noisy_map(&q, 0.5, &[100.0]).unwrap();
        assert!((far.tv - 1.0).abs() < 1e-15);
    }

    #[test]
    fn band_fraction_of_point_state() {
        let s = RotorDensity::momentum_eigenstate(10, 0, 0.5, 0.0).unwrap();
        let w = s.wigner(64).unwrap();
        assert!((w.total_mass() - 1.0).abs() < 1e-12);
        assert!((band_fraction(&w, 0.5, |_| 0.0, 0.1) - 1.0).abs() < 1e-12);
        assert!(band_fraction(&w, 0.5, |_| 3.0, 0.1).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bessel_completeness(x in -30.0f64..30.0) {
            let k = bessel_coeffs(x, (x.abs() + 40.0).ceil() as usize).unwrap();
            prop_assert!((k.completeness() - 1.0).abs() < 1e-10);
        }
    }
}
