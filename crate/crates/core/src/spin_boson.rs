//! Spin-½ coupled through `σ_z` to truncated boson modes (ħ = 1): Hamiltonian,
//! parity, evolution, reduced-spin diagnostics and short-time oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::quantum::{bloch_from_matrix, hermitian_eigenvalues, CMatrix, CVector, C64};

/// Largest Hilbert-space dimension handled.
pub const DIM_BUDGET: usize = 1 << 22;
/// Largest dimension propagated through a dense eigendecomposition.
pub const DENSE_LIMIT: usize = 4096;
/// Top-Fock occupation that trips the truncation guard.
pub const TOP_FOCK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BosonMode {
    pub omega: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinBosonSystem {
    pub omega0: f64,
    pub modes: Vec<BosonMode>,
    /// Per-mode Fock cutoff.
    pub n_max: usize,
}

impl SpinBosonSystem {
    pub fn new(omega0: f64, modes: Vec<BosonMode>, n_max: usize) -> Result<Self> {
        if !(omega0 >= 0.0 && omega0.is_finite()) {
            return Err(invalid("omega0", format!("{omega0} must be >= 0")));
        }
        if modes.is_empty() {
            return Err(invalid("N", "need at least one mode"));
        }
        if modes.iter().any(|m| !(m.omega > 0.0) || !m.g.is_finite()) {
            return Err(invalid("omega_n", "mode frequencies must be > 0"));
        }
        if n_max < 1 {
            return Err(invalid("n_max", "must be >= 1"));
        }
        let sys = Self { omega0, modes, n_max };
        match sys.checked_dim() {
            Some(d) if d <= DIM_BUDGET => Ok(sys),
            _ => Err(Error::Truncation(format!("dimension exceeds budget {DIM_BUDGET}"))),
        }
    }

    pub fn single_mode(omega0: f64, omega1: f64, g: f64, n_max: usize) -> Result<Self> {
        Self::new(omega0, vec![BosonMode { omega: omega1, g }], n_max)
    }

    /// `ω_n = ω_c·n/N`, `g_n = g/√N`.
    pub fn ladder(omega0: f64, omega_c: f64, g: f64, n_modes: usize, n_max: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("N", "need at least one mode"));
        }
        let gn = g / (n_modes as f64).sqrt();
        let modes = (1..=n_modes)
            .map(|n| BosonMode {
                omega: omega_c * n as f64 / n_modes as f64,
                g: gn,
            })
            .collect();
        Self::new(omega0, modes, n_max)
    }

    fn checked_dim(&self) -> Option<usize> {
        let mut d: usize = 2;
        for _ in &self.modes {
            d = d.checked_mul(self.n_max + 1)?;
        }
        Some(d)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn boson_dim(&self) -> usize {
        (self.n_max + 1).pow(self.modes.len() as u32)
    }

    pub fn dim(&self) -> usize {
        2 * self.boson_dim()
    }

    fn stride(&self, k: usize) -> usize {
        (self.n_max + 1).pow((self.modes.len() - 1 - k) as u32)
    }

    /// Occupation number of mode `k` in boson index `b`.
    pub fn occupation(&self, b: usize, k: usize) -> usize {
        (b / self.stride(k)) % (self.n_max + 1)
    }

    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        Self::new(self.omega0, self.modes.clone(), n_max)
    }
}

/// Amplitudes at index `s·D_B + b`, spin `s = 0` (↑) or `1` (↓), boson index
/// `b` with mode 1 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct FockProductState {
    pub amps: CVector,
}

impl FockProductState {
    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Copies the state into a larger per-mode cutoff.
    pub fn embed(&self, from: &SpinBosonSystem, to: &SpinBosonSystem) -> Result<Self> {
        if to.n_max < from.n_max || to.n_modes() != from.n_modes() {
            return Err(Error::Dimension("target basis must contain the source".into()));
        }
        let mut amps = CVector::zeros(to.dim());
        let (db_from, db_to) = (from.boson_dim(), to.boson_dim());
        for s in 0..2 {
            for b in 0..db_from {
                let mut bt = 0;
                for k in 0..from.n_modes() {
                    bt += from.occupation(b, k) * to.stride(k);
                }
                amps[s * db_to + bt] = self.amps[s * db_from + b];
            }
        }
        Ok(Self { amps })
    }
}

/// `(|↓⟩ ± |↑⟩)/√2 ⊗ |c⟩` with `c` over the full boson space.
pub fn initial_state(sys: &SpinBosonSystem, sign: i8, c: &[C64]) -> Result<FockProductState> {
    if sign != 1 && sign != -1 {
        return Err(invalid("sign", "must be +1 or -1"));
    }
    let db = sys.boson_dim();
    if c.len() != db {
        return Err(Error::Dimension(format!("boson vector has {} entries, need {db}", c.len())));
    }
    let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(invalid("c", format!("norm² = {norm}, expected 1")));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = CVector::zeros(2 * db);
    for (b, &z) in c.iter().enumerate() {
        amps[b] = z * (sign as f64 * r);
        amps[db + b] = z * r;
    }
    Ok(FockProductState { amps })
}

/// Tensor product of per-mode vectors, each of length `n_max + 1`.
pub fn product_boson_state(sys: &SpinBosonSystem, per_mode: &[Vec<C64>]) -> Result<Vec<C64>> {
    if per_mode.len() != sys.n_modes() || per_mode.iter().any(|v| v.len() != sys.n_max + 1) {
        return Err(Error::Dimension("one vector of length n_max+1 per mode".into()));
    }
    Ok((0..sys.boson_dim())
        .map(|b| {
            (0..sys.n_modes())
                .map(|k| per_mode[k][sys.occupation(b, k)])
                .product()
        })
        .collect())
}

/// Normalized complex Gaussian amplitudes on levels `0..=levels` with an
/// `e^{−α/scale}` envelope, zero above.
pub fn random_boson_coeffs<R: Rng + ?Sized>(n_max: usize, levels: usize, scale: f64, rng: &mut R) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); n_max + 1];
    for (a, z) in c.iter_mut().enumerate().take(levels.min(n_max) + 1) {
        let env = (-(a as f64) / scale).exp();
        *z = C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * env;
    }
    let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|z| *z /= n);
    c
}

/// `y = Hψ` without forming `H`.
pub fn apply_hamiltonian(sys: &SpinBosonSystem, psi: &CVector, out: &mut CVector) {
    let db = sys.boson_dim();
    let nm = sys.n_modes();
    let strides: Vec<usize> = (0..nm).map(|k| sys.stride(k)).collect();
    let sqrt: Vec<f64> = (0..=sys.n_max + 1).map(|n| (n as f64).sqrt()).collect();
    for s in 0..2 {
        let sz = if s == 0 { 1.0 } else { -1.0 };
        for b in 0..db {
            let i = s * db + b;
            let mut acc = psi[(1 - s) * db + b] * (0.5 * sys.omega0);
            let mut diag = 0.0;
            for (k, m) in sys.modes.iter().enumerate() {
                let n = (b / strides[k]) % (sys.n_max + 1);
                diag += m.omega * (n as f64 + 0.5);
                let mut x = C64::new(0.0, 0.0);
                if n > 0 {
                    x += psi[i - strides[k]] * sqrt[n];
                }
                if n < sys.n_max {
                    x += psi[i + strides[k]] * sqrt[n + 1];
                }
                acc += x * (sz * m.g);
            }
            out[i] = acc + psi[i] * diag;
        }
    }
}

/// Dense real-symmetric Hamiltonian.
pub fn build_hamiltonian_real(sys: &SpinBosonSystem) -> Result<DMatrix<f64>> {
    let d = sys.dim();
    if d > DENSE_LIMIT {
        return Err(Error::Truncation(format!("dense dimension {d} > {DENSE_LIMIT}")));
    }
    let mut h = DMatrix::zeros(d, d);
    let mut e = CVector::zeros(d);
    let mut col = CVector::zeros(d);
    for j in 0..d {
        e[j] = C64::new(1.0, 0.0);
        apply_hamiltonian(sys, &e, &mut col);
        for i in 0..d {
            h[(i, j)] = col[i].re;
        }
        e[j] = C64::new(0.0, 0.0);
    }
    Ok(h)
}

pub fn build_hamiltonian(sys: &SpinBosonSystem) -> Result<CMatrix> {
    Ok(build_hamiltonian_real(sys)?.map(|x| C64::new(x, 0.0)))
}

/// `Π = σ_x ⊗ (−1)^{Σn}` as a signed permutation.
pub fn apply_parity(sys: &SpinBosonSystem, psi: &CVector) -> CVector {
    let db = sys.boson_dim();
    let mut out = CVector::zeros(psi.len());
    for b in 0..db {
        let n: usize = (0..sys.n_modes()).map(|k| sys.occupation(b, k)).sum();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        out[b] = psi[db + b] * sign;
        out[db + b] = psi[b] * sign;
    }
    out
}

pub fn parity_matrix(sys: &SpinBosonSystem) -> CMatrix {
    let d = sys.dim();
    let mut m = CMatrix::zeros(d, d);
    let mut e = CVector::zeros(d);
    for j in 0..d {
        e[j] = C64::new(1.0, 0.0);
        m.set_column(j, &apply_parity(sys, &e));
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

pub fn parity_expectation(sys: &SpinBosonSystem, psi: &FockProductState) -> f64 {
    psi.amps.dotc(&apply_parity(sys, &psi.amps)).re
}

/// Projections onto the spin-parity ⊗ boson-parity sectors, keyed by
/// `(σ_x eigenvalue, (−1)^{Σn})`.
pub fn parity_sectors(sys: &SpinBosonSystem, psi: &FockProductState) -> Vec<((i8, i8), FockProductState)> {
    let db = sys.boson_dim();
    let mut out = Vec::with_capacity(4);
    for s in [1i8, -1] {
        for m in [1i8, -1] {
            let mut amps = CVector::zeros(psi.amps.len());
            for b in 0..db {
                let n: usize = (0..sys.n_modes()).map(|k| sys.occupation(b, k)).sum();
                let bp = if n % 2 == 0 { 1 } else { -1 };
                if bp != m {
                    continue;
                }
                // σ_x eigenvectors in the (↑, ↓) basis: (1, s)/√2.
                let (up, dn) = (psi.amps[b], psi.amps[db + b]);
                let proj = (up + dn * s as f64) * 0.5;
                amps[b] = proj;
                amps[db + b] = proj * s as f64;
            }
            out.push(((s, m), FockProductState { amps }));
        }
    }
    out
}

pub fn energy(sys: &SpinBosonSystem, psi: &FockProductState) -> f64 {
    let mut h = CVector::zeros(psi.amps.len());
    apply_hamiltonian(sys, &psi.amps, &mut h);
    psi.amps.dotc(&h).re
}

/// Reduced spin density matrix.
pub fn reduced_spin(sys: &SpinBosonSystem, psi: &FockProductState) -> CMatrix {
    let db = sys.boson_dim();
    let mut r = CMatrix::zeros(2, 2);
    for s in 0..2 {
        for t in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..db {
                acc += psi.amps[s * db + b] * psi.amps[t * db + b].conj();
            }
            r[(s, t)] = acc;
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDiagnostics {
    /// Bloch vector `(a_x, a_y, a_z)`, `ρ_S = ½ + a·σ`.
    pub bloch: [f64; 3],
    pub purity: f64,
    /// von Neumann entropy with `c = 1`.
    pub entropy: f64,
}

pub fn spin_diagnostics(sys: &SpinBosonSystem, psi: &FockProductState) -> SpinDiagnostics {
    let r = reduced_spin(sys, psi);
    let bloch = bloch_from_matrix(&r);
    let a2: f64 = bloch.iter().map(|a| a * a).sum();
    let entropy = hermitian_eigenvalues(&r)
        .into_iter()
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum();
    SpinDiagnostics {
        bloch,
        purity: 0.5 + 2.0 * a2,
        entropy,
    }
}

/// Largest top-level occupation over modes.
pub fn top_fock_occupation(sys: &SpinBosonSystem, psi: &FockProductState) -> f64 {
    let db = sys.boson_dim();
    (0..sys.n_modes())
        .map(|k| {
            (0..db)
                .filter(|&b| sys.occupation(b, k) == sys.n_max)
                .map(|b| psi.amps[b].norm_sqr() + psi.amps[db + b].norm_sqr())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Eigendecomposition up to `DENSE_LIMIT`, Taylor stepping beyond.
    #[default]
    Auto,
    Eigen,
    /// Truncated Taylor series of `e^{−iHdt}` of the given order.
    Taylor { order: usize },
}

/// Exact propagator from the eigensystem of the real Hamiltonian.
pub struct EigenPropagator {
    pub energies: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPropagator {
    pub fn new(sys: &SpinBosonSystem) -> Result<Self> {
        let eig = SymmetricEigen::new(build_hamiltonian_real(sys)?);
        Ok(Self {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// `e^{−iHt}ψ`, any real `t`.
    pub fn propagate(&self, psi: &CVector, t: f64) -> CVector {
        let v = &self.vectors;
        let re = v.transpose() * psi.map(|z| z.re);
        let im = v.transpose() * psi.map(|z| z.im);
        let coeff = CVector::from_fn(psi.len(), |i, _| {
            C64::new(re[i], im[i]) * C64::from_polar(1.0, -self.energies[i] * t)
        });
        let cr = v * coeff.map(|z| z.re);
        let ci = v * coeff.map(|z| z.im);
        CVector::from_fn(psi.len(), |i, _| C64::new(cr[i], ci[i]))
    }
}

/// One Taylor step `Σ_{k≤order} (−iH dt)^k/k! ψ`.
pub fn taylor_step(sys: &SpinBosonSystem, psi: &CVector, dt: f64, order: usize) -> CVector {
    let mut out = psi.clone();
    let mut term = psi.clone();
    let mut h = CVector::zeros(psi.len());
    for k in 1..=order {
        apply_hamiltonian(sys, &term, &mut h);
        let f = C64::new(0.0, -dt / k as f64);
        term = &h * f;
        out += &term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSample {
    pub t: f64,
    pub bloch: [f64; 3],
    pub purity: f64,
    pub entropy: f64,
    pub parity: f64,
    pub energy: f64,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct SpinBosonRun {
    pub samples: Vec<SpinSample>,
    pub final_state: FockProductState,
    pub n_max: usize,
    /// Cutoffs abandoned because the truncation guard tripped.
    pub retries: Vec<usize>,
}

fn sample(sys: &SpinBosonSystem, t: f64, psi: &FockProductState) -> SpinSample {
    let d = spin_diagnostics(sys, psi);
    SpinSample {
        t,
        bloch: d.bloch,
        purity: d.purity,
        entropy: d.entropy,
        parity: parity_expectation(sys, psi),
        energy: energy(sys, psi),
        norm: psi.norm(),
    }
}

/// Evolves to `t_end` with step `dt`, sampling every `every` steps. Fails
/// with `Truncation` if any mode's top level exceeds `TOP_FOCK_TOL`.
pub fn evolve(
    sys: &SpinBosonSystem,
    psi0: &FockProductState,
    dt: f64,
    t_end: f64,
    every: usize,
    integrator: Integrator,
) -> Result<SpinBosonRun> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(invalid("dt", "need dt > 0 and T >= 0"));
    }
    if psi0.amps.len() != sys.dim() {
        return Err(Error::Dimension("state does not match system".into()));
    }
    let every = every.max(1);
    let n_steps = (t_end / dt).round() as usize;
    let integ = match integrator {
        Integrator::Auto if sys.dim() <= DENSE_LIMIT => Integrator::Eigen,
        Integrator::Auto => Integrator::Taylor { order: 12 },
        other => other,
    };
    let eig = match integ {
        Integrator::Eigen => Some(EigenPropagator::new(sys)?),
        _ => None,
    };
    let mut psi = psi0.clone();
    let mut samples = vec![sample(sys, 0.0, &psi)];
    for n in 1..=n_steps {
        let t = n as f64 * dt;
        psi.amps = match (&eig, integ) {
            (Some(e), _) => e.propagate(&psi0.amps, t),
            (None, Integrator::Taylor { order }) => taylor_step(sys, &psi.amps, dt, order),
            _ => unreachable!(),
        };
        if n % every == 0 || n == n_steps {
            let top = top_fock_occupation(sys, &psi);
            if top > TOP_FOCK_TOL {
                return Err(Error::Truncation(format!("top Fock occupation {top:.3e} at t = {t}")));
            }
            samples.push(sample(sys, t, &psi));
        }
    }
    Ok(SpinBosonRun {
        samples,
        final_state: psi,
        n_max: sys.n_max,
        retries: Vec::new(),
    })
}

/// `evolve` with the cutoff raised by half whenever the guard trips.
pub fn evolve_escalating(
    sys: &SpinBosonSystem,
    psi0: &FockProductState,
    dt: f64,
    t_end: f64,
    every: usize,
    integrator: Integrator,
) -> Result<SpinBosonRun> {
    let mut cur = sys.clone();
    let mut state = psi0.clone();
    let mut retries = Vec::new();
    for _ in 0..8 {
        match evolve(&cur, &state, dt, t_end, every, integrator) {
            Ok(mut run) => {
                run.retries = retries;
                return Ok(run);
            }
            Err(Error::Truncation(_)) => {
                retries.push(cur.n_max);
                let next = cur.with_n_max(cur.n_max + cur.n_max.div_ceil(2))?;
                state = state.embed(&cur, &next)?;
                cur = next;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Truncation(format!("guard still tripped at n_max = {}", cur.n_max)))
}

/// Closed-form short-time values for one mode and the cat initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTimeOracles {
    /// `Σ√(α+1) Re(c_{α+1}c_α*)`.
    pub s: f64,
    /// `Σ√(α+1) Im(c_{α+1}c_α*)`.
    pub t: f64,
    /// `⟨X²⟩` for `X = a + a†`.
    pub x2: f64,
    /// `dρ_S/dt(0)` as Bloch components.
    pub bloch_dot: [f64; 3],
    /// `d²ρ_S/dt²(0)` as Bloch components.
    pub bloch_ddot: [f64; 3],
    pub a_z_dot: f64,
    pub a_z_ddot: f64,
    pub purity_dot: f64,
    pub purity_ddot: f64,
}

pub fn short_time_oracles(sys: &SpinBosonSystem, c: &[C64], sign: i8) -> Result<ShortTimeOracles> {
    if sys.n_modes() != 1 {
        return Err(invalid("N", "oracles need a single mode"));
    }
    if sign != 1 && sign != -1 {
        return Err(invalid("sign", "must be +1 or -1"));
    }
    let m = sys.modes[0];
    let (g, w0, w1) = (m.g, sys.omega0, m.omega);
    let mut s = 0.0;
    let mut t = 0.0;
    let mut x2 = 0.0;
    for a in 0..c.len() {
        let af = a as f64;
        x2 += (2.0 * af + 1.0) * c[a].norm_sqr();
        if a + 1 < c.len() {
            let z = c[a + 1] * c[a].conj();
            s += (af + 1.0).sqrt() * z.re;
            t += (af + 1.0).sqrt() * z.im;
        }
        if a + 2 < c.len() {
            x2 += 2.0 * ((af + 1.0) * (af + 2.0)).sqrt() * (c[a + 2] * c[a].conj()).re;
        }
    }
    let sg = sign as f64;
    let bloch_dot = [0.0, sg * 2.0 * g * s, 0.0];
    let bloch_ddot = [-sg * 2.0 * g * g * x2, sg * 2.0 * g * w1 * t, sg * 2.0 * g * w0 * s];
    Ok(ShortTimeOracles {
        s,
        t,
        x2,
        bloch_dot,
        bloch_ddot,
        a_z_dot: 0.0,
        a_z_ddot: bloch_ddot[2],
        purity_dot: 0.0,
        purity_ddot: 4.0 * g * g * (4.0 * s * s - x2),
    })
}

/// Richardson-extrapolated central differences of `a_z` and purity at `t = 0`:
/// `(ȧ_z, ä_z, Ṗ, P̈)`. The analytic evolution is continued to `t < 0`.
pub fn short_time_differences(sys: &SpinBosonSystem, psi0: &FockProductState, h: f64) -> Result<[f64; 4]> {
    let eig = EigenPropagator::new(sys)?;
    let at = |t: f64| {
        let st = FockProductState { amps: eig.propagate(&psi0.amps, t) };
        let d = spin_diagnostics(sys, &st);
        (d.bloch[2], d.purity)
    };
    let diffs = |h: f64| {
        let (zm, pm) = at(-h);
        let (z0, p0) = at(0.0);
        let (zp, pp) = at(h);
        [
            (zp - zm) / (2.0 * h),
            (zp - 2.0 * z0 + zm) / (h * h),
            (pp - pm) / (2.0 * h),
            (pp - 2.0 * p0 + pm) / (h * h),
        ]
    };
    let (d1, d2) = (diffs(h), diffs(h / 2.0));
    Ok([0, 1, 2, 3].map(|i| (4.0 * d2[i] - d1[i]) / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dwell {
    pub polarity: i8,
    pub start: f64,
    pub end: f64,
}

impl Dwell {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingStats {
    pub dwells: Vec<Dwell>,
    pub flips: usize,
    pub mean_dwell: f64,
}

/// Dwell intervals of `sign(a_z)` with a hysteresis band `|a_z| > threshold`.
/// A dwell starts at the first sample beyond the band and ends where the
/// opposite band is entered, or at the last sample.
pub fn switching_statistics(times: &[f64], a_z: &[f64], threshold: f64) -> Result<SwitchingStats> {
    if !(threshold > 0.0 && threshold < 0.5) {
        return Err(invalid("threshold", format!("{threshold} not in (0, 1/2)")));
    }
    if times.len() != a_z.len() {
        return Err(Error::Dimension("times and a_z differ in length".into()));
    }
    let mut dwells: Vec<Dwell> = Vec::new();
    let mut cur: Option<(i8, f64)> = None;
    for (&t, &a) in times.iter().zip(a_z) {
        let pol = if a > threshold {
            1
        } else if a < -threshold {
            -1
        } else {
            0
        };
        match cur {
            None if pol != 0 => cur = Some((pol, t)),
            Some((p, start)) if pol != 0 && pol != p => {
                dwells.push(Dwell { polarity: p, start, end: t });
                cur = Some((pol, t));
            }
            _ => {}
        }
    }
    if let (Some((p, start)), Some(&last)) = (cur, times.last()) {
        dwells.push(Dwell { polarity: p, start, end: last });
    }
    let flips = dwells.len().saturating_sub(1);
    let mean_dwell = if dwells.is_empty() {
        0.0
    } else {
        dwells.iter().map(Dwell::length).sum::<f64>() / dwells.len() as f64
    };
    Ok(SwitchingStats { dwells, flips, mean_dwell })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{hermiticity_defect, max_abs, partial_trace, Keep};
    use crate::seeding::stream;
    use proptest::prelude::*;

    fn vacuum(n: usize) -> Vec<C64> {
        let mut c = vec![C64::new(0.0, 0.0); n];
        c[0] = C64::new(1.0, 0.0);
        c
    }

    #[test]
    fn four_by_four_by_hand() {
        let sys = SpinBosonSystem::single_mode(1.0, 1.0, 1.0, 1).unwrap();
        let h = build_hamiltonian_real(&sys).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.5, 1.0, 0.5, 0.0,
            1.0, 1.5, 0.0, 0.5,
            0.5, 0.0, 0.5, -1.0,
            0.0, 0.5, -1.0, 1.5,
        ]);
        assert_eq!(h, expected);
    }

    #[test]
    fn uncoupled_spectrum_is_direct_sum() {
        let sys = SpinBosonSystem::single_mode(0.8, 1.3, 0.0, 5).unwrap();
        let mut e: Vec<f64> = SymmetricEigen::new(build_hamiltonian_real(&sys).unwrap()).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (0..=5)
            .flat_map(|n| [-0.4, 0.4].map(|s| s + 1.3 * (n as f64 + 0.5)))
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parity_is_involution_and_symmetry() {
        let sys = SpinBosonSystem::ladder(0.7, 1.5, 0.4, 2, 4).unwrap();
        let p = parity_matrix(&sys);
        let d = sys.dim();
        assert!(max_abs(&(&p * &p - CMatrix::identity(d, d))) < 1e-15);
        assert!(hermiticity_defect(&p) < 1e-15);
        let h = build_hamiltonian(&sys).unwrap();
        assert!(hermiticity_defect(&h) < 1e-12);
        assert!(max_abs(&(&h * &p - &p * &h)) < 1e-12);
    }

    #[test]
    fn matrix_free_action_matches_dense() {
        let sys = SpinBosonSystem::ladder(0.9, 1.2, 0.3, 2, 3).unwrap();
        let h = build_hamiltonian(&sys).unwrap();
        let psi = crate::quantum::random_pure_state(sys.dim(), &mut stream(1, 0));
        let mut y = CVector::zeros(sys.dim());
        apply_hamiltonian(&sys, &psi, &mut y);
        assert!((y - &h * &psi).norm() < 1e-12);
    }

    #[test]
    fn vacuum_cat_initial_state() {
        let sys = SpinBosonSystem::single_mode(1.0, 1.0, 0.2, 6).unwrap();
        for sign in [1i8, -1] {
            let psi = initial_state(&sys, sign, &vacuum(7)).unwrap();
            let r = reduced_spin(&sys, &psi);
            let expected = CMatrix::from_row_slice(2, 2, &[
                C64::new(0.5, 0.0), C64::new(0.5 * sign as f64, 0.0),
                C64::new(0.5 * sign as f64, 0.0), C64::new(0.5, 0.0),
            ]);
            assert!(max_abs(&(r.clone() - expected)) < 1e-15);
            let full = &psi.amps * psi.amps.adjoint();
            assert!(max_abs(&(partial_trace(&full, (2, 7), Keep::A).unwrap() - r)) < 1e-15);
            let d = spin_diagnostics(&sys, &psi);
            assert_eq!(d.bloch[2], 0.0);
            assert!((d.bloch[0] - 0.5 * sign as f64).abs() < 1e-15);
            assert!((d.purity - 1.0).abs() < 1e-14 && d.entropy.abs() < 1e-12);
            assert!((parity_expectation(&sys, &psi) - sign as f64).abs() < 1e-15);
        }
        assert!(initial_state(&sys, 1, &[C64::new(2.0, 0.0); 7]).is_err());
    }

    #[test]
    fn maximally_entangled_diagnostics() {
        let sys = SpinBosonSystem::single_mode(1.0, 1.0, 0.2, 2).unwrap();
        let mut amps = CVector::zeros(6);
        amps[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[3 + 1] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let d = spin_diagnostics(&sys, &FockProductState { amps });
        assert!((d.purity - 0.5).abs() < 1e-15);
        assert!((d.entropy - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sectors_recombine() {
        let sys = SpinBosonSystem::single_mode(1.0, 1.0, 0.2, 8).unwrap();
        let c = random_boson_coeffs(8, 8, 3.0, &mut stream(2, 0));
        let psi = initial_state(&sys, 1, &c).unwrap();
        let parts = parity_sectors(&sys, &psi);
        let sum = parts.iter().fold(CVector::zeros(sys.dim()), |acc, (_, p)| acc + &p.amps);
        assert!((sum - &psi.amps).norm() < 1e-12);
        for ((s, m), p) in &parts {
            let pe = parity_expectation(&sys, p);
            let w = p.amps.norm_squared();
            if w > 1e-20 {
                assert!((pe / w - (*s * *m) as f64).abs() < 1e-12);
            }
        }
        let vac = initial_state(&sys, -1, &vacuum(9)).unwrap();
        let parts = parity_sectors(&sys, &vac);
        let heavy: Vec<_> = parts.iter().filter(|(_, p)| p.amps.norm() > 1e-12).map(|(k, _)| *k).collect();
        assert_eq!(heavy, vec![(-1, 1)]);
    }

    #[test]
    fn uncoupled_spin_precesses() {
        let sys = SpinBosonSystem::single_mode(1.3, 1.0, 0.0, 4).unwrap();
        let mut amps = CVector::zeros(sys.dim());
        amps[0] = C64::new(1.0, 0.0);
        let run = evolve(&sys, &FockProductState { amps }, 0.01, 5.0, 10, Integrator::Eigen).unwrap();
        for s in &run.samples {
            assert!((s.bloch[2] - 0.5 * (1.3 * s.t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_dephasing_matches_coherent_overlaps() {
        let sys = SpinBosonSystem::ladder(0.0, 1.0, 0.3, 2, 12).unwrap();
        let c = product_boson_state(&sys, &[vacuum(13), vacuum(13)]).unwrap();
        let psi = initial_state(&sys, 1, &c).unwrap();
        let run = evolve(&sys, &psi, 0.05, 12.0, 4, Integrator::Eigen).unwrap();
        for s in &run.samples {
            let decay: f64 = sys
                .modes
                .iter()
                .map(|m| (-4.0 * (m.g / m.omega).powi(2) * (1.0 - (m.omega * s.t).cos())).exp())
                .product();
            let coherence = (s.bloch[0].powi(2) + s.bloch[1].powi(2)).sqrt();
            assert!((coherence - 0.5 * decay).abs() < 1e-8, "t={}", s.t);
            assert!(s.bloch[2].abs() < 1e-12);
        }
    }

    #[test]
    fn conservation_laws() {
        let sys = SpinBosonSystem::single_mode(1.0, 1.0, 0.2, 30).unwrap();
        let c = random_boson_coeffs(30, 10, 3.0, &mut stream(3, 0));
        let psi = initial_state(&sys, 1, &c).unwrap();
        for integ in [Integrator::Eigen, Integrator::Taylor { order: 12 }] {
            let run = evolve(&sys, &psi, 0.01, 20.0, 50, integ).unwrap();
            let s0 = run.samples[0];
            for s in &run.samples {
                assert!((s.norm - 1.0).abs() < 1e-9);
                assert!((s.energy - s0.energy).abs() < 1e-8 * s0.energy.abs());
                assert!((s.parity - s0.parity).abs() < 1e-9);
                assert!(s.bloch[2].abs() <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn taylor_converges_at_its_order() {
        let sys = SpinBosonSystem::ladder(1.0, 1.4, 0.3, 2, 10).unwrap();
        let c = product_boson_state(
            &sys,
            &[random_boson_coeffs(10, 2, 2.0, &mut stream(4, 0)), random_boson_coeffs(10, 2, 2.0, &mut stream(4, 1))],
        )
        .unwrap();
        let psi = initial_state(&sys, 1, &c).unwrap();
        let exact = EigenPropagator::new(&sys).unwrap().propagate(&psi.amps, 2.0);
        let err = |dt: f64| {
            let run = evolve(&sys, &psi, dt, 2.0, 1_000_000, Integrator::Taylor { order: 4 }).unwrap();
            (run.final_state.amps - &exact).norm()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((10.0..24.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn truncation_guard_escalates() {
        let sys = SpinBosonSystem::single_mode(1.0, 1.0, 1.5, 4).unwrap();
        let psi = initial_state(&sys, 1, &vacuum(5)).unwrap();
        assert!(matches!(evolve(&sys, &psi, 0.05, 3.0, 5, Integrator::Eigen), Err(Error::Truncation(_))));
        let run = evolve_escalating(&sys, &psi, 0.05, 3.0, 5, Integrator::Eigen).unwrap();
        assert!(run.n_max > 4 && !run.retries.is_empty());
    }

    #[test]
    fn oracle_special_cases() {
        let sys = SpinBosonSystem::single_mode(0.9, 1.1, 0.25, 10).unwrap();
        let o = short_time_oracles(&sys, &vacuum(11), 1).unwrap();
        assert_eq!(o.a_z_ddot, 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut c = vec![C64::new(0.0, 0.0); 11];
        c[0] = C64::new(r, 0.0);
        c[1] = C64::new(r, 0.0);
        let o = short_time_oracles(&sys, &c, -1).unwrap();
        assert!((o.s - 0.5).abs() < 1e-15);
        assert!((o.a_z_ddot + 0.25 * 0.9).abs() < 1e-15);
        c[1] = C64::new(0.0, r);
        let o = short_time_oracles(&sys, &c, 1).unwrap();
        assert!(o.a_z_ddot.abs() < 1e-15 && o.bloch_ddot[1].abs() > 0.1);
        let two = SpinBosonSystem::ladder(1.0, 1.0, 0.2, 2, 2).unwrap();
        assert!(short_time_oracles(&two, &c, 1).is_err());
    }

    #[test]
    fn oracles_match_finite_differences() {
        for (seed, sign) in [(10u64, 1i8), (11, -1), (12, 1)] {
            let sys = SpinBosonSystem::single_mode(0.8, 1.2, 0.3, 40).unwrap();
            let c = random_boson_coeffs(40, 12, 4.0, &mut stream(seed, 0));
            let psi = initial_state(&sys, sign, &c).unwrap();
            let o = short_time_oracles(&sys, &c, sign).unwrap();
            let [zd, zdd, pd, pdd] = short_time_differences(&sys, &psi, 1e-3).unwrap();
            assert!(zd.abs() < 1e-6 && pd.abs() < 1e-6);
            assert!((zdd - o.a_z_ddot).abs() < 1e-3 * o.a_z_ddot.abs());
            assert!((pdd - o.purity_ddot).abs() < 1e-3 * o.purity_ddot.abs());
            let eig = EigenPropagator::new(&sys).unwrap();
            let h = 1e-3;
            let b = |t: f64| spin_diagnostics(&sys, &FockProductState { amps: eig.propagate(&psi.amps, t) }).bloch;
            let (bm, b0, bp) = (b(-h), b(0.0), b(h));
            for k in 0..3 {
                let d1 = (bp[k] - bm[k]) / (2.0 * h);
                let d2 = (bp[k] - 2.0 * b0[k] + bm[k]) / (h * h);
                assert!((d1 - o.bloch_dot[k]).abs() < 1e-5, "k={k}");
                assert!((d2 - o.bloch_ddot[k]).abs() < 1e-4, "k={k}: {d2} vs {}", o.bloch_ddot[k]);
            }
        }
    }

    #[test]
    fn switching_examples() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let s = switching_statistics(&t, &vec![0.3; 100], 0.2).unwrap();
        assert_eq!(s.flips, 0);
        assert_eq!(s.dwells, vec![Dwell { polarity: 1, start: 0.0, end: 99.0 }]);
        let sq: Vec<f64> = (0..100).map(|i| if (i / 10) % 2 == 0 { 0.4 } else { -0.4 }).collect();
        let s = switching_statistics(&t, &sq, 0.2).unwrap();
        assert_eq!(s.flips, 9);
        assert!(s.dwells[..9].iter().all(|d| d.length() == 10.0));
        assert!(switching_statistics(&t, &sq, 0.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_parameters_commute_with_parity(w0 in 0.0f64..2.0, wc in 0.2f64..2.0, g in -1.0f64..1.0, n in 1usize..3) {
            let sys = SpinBosonSystem::ladder(w0, wc, g, n, 3).unwrap();
            let h = build_hamiltonian(&sys).unwrap();
            let p = parity_matrix(&sys);
            prop_assert!(max_abs(&(&h * &p - &p * &h)) < 1e-12);
        }
    }
}
