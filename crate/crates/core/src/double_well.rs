//! Quartic double well, optionally coupled to a finite oscillator bath:
//! leapfrog integration, the damped limit, basin maps and bath-driven
//! symmetry breaking.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::seeding::stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub mass: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWellSystem {
    pub a: f64,
    pub b: f64,
    pub m_s: f64,
    pub bath: Vec<BathMode>,
    /// Position-position coupling `g x_S Σ x_n`.
    pub g: f64,
    /// Friction of the damped limit.
    pub lambda: f64,
}

impl DoubleWellSystem {
    pub fn new(a: f64, b: f64, m_s: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && m_s > 0.0) {
            return Err(invalid("a", "need a, b, m_S > 0"));
        }
        Ok(Self {
            a,
            b,
            m_s,
            bath: Vec::new(),
            g: 0.0,
            lambda: 0.0,
        })
    }

    pub fn with_friction(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        self.lambda = lambda;
        Ok(self)
    }

    /// Bath of `n` unit-mass modes evenly spaced on `[ω_min, ω_max]`, with `g`
    /// chosen so the discrete spectral density gives friction `λ_target` at
    /// the well frequency: `g² = (2/π) λ m ω_well² Δω`.
    pub fn with_ohmic_bath(mut self, n: usize, omega_min: f64, omega_max: f64, lambda_target: f64) -> Result<Self> {
        if n < 2 || !(omega_min > 0.0 && omega_max > omega_min) || !(lambda_target >= 0.0) {
            return Err(invalid("bath", "need n >= 2, 0 < ω_min < ω_max, λ >= 0"));
        }
        let dw = (omega_max - omega_min) / (n - 1) as f64;
        self.bath = (0..n)
            .map(|i| BathMode {
                mass: 1.0,
                omega: omega_min + i as f64 * dw,
            })
            .collect();
        let w = self.well_frequency();
        self.g = (2.0 / std::f64::consts::PI * lambda_target * w * w * dw).sqrt();
        Ok(self)
    }

    pub fn x0(&self) -> f64 {
        (self.a / self.b).sqrt()
    }

    pub fn barrier(&self) -> f64 {
        self.a * self.a / (4.0 * self.b)
    }

    /// `√(V''(x0)/m_S) = √(2a/m_S)`.
    pub fn well_frequency(&self) -> f64 {
        (2.0 * self.a / self.m_s).sqrt()
    }

    pub fn potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        -0.5 * self.a * x2 + 0.25 * self.b * x2 * x2
    }

    /// `a x − b x³`.
    #[inline]
    pub fn well_force(&self, x: f64) -> f64 {
        self.a * x - self.b * x * x * x
    }

    pub fn object_energy(&self, x: f64, p: f64) -> f64 {
        0.5 * p * p / self.m_s + self.potential(x)
    }

    pub fn total_energy(&self, s: &FullState) -> f64 {
        let mut e = self.object_energy(s.x, s.p);
        let mut sum_x = 0.0;
        for (m, (x, p)) in self.bath.iter().zip(s.bath_x.iter().zip(&s.bath_p)) {
            e += 0.5 * p * p / m.mass + 0.5 * m.mass * m.omega * m.omega * x * x;
            sum_x += x;
        }
        e + self.g * s.x * sum_x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub x: f64,
    pub p: f64,
    pub bath_x: Vec<f64>,
    pub bath_p: Vec<f64>,
}

impl FullState {
    pub fn object(sys: &DoubleWellSystem, x: f64, p: f64) -> Self {
        Self {
            x,
            p,
            bath_x: vec![0.0; sys.bath.len()],
            bath_p: vec![0.0; sys.bath.len()],
        }
    }

    pub fn flipped(&self) -> Self {
        Self {
            x: -self.x,
            p: -self.p,
            bath_x: self.bath_x.iter().map(|v| -v).collect(),
            bath_p: self.bath_p.iter().map(|v| -v).collect(),
        }
    }
}

fn kick(sys: &DoubleWellSystem, s: &mut FullState, h: f64) {
    let sum_x: f64 = s.bath_x.iter().sum();
    s.p += h * (sys.well_force(s.x) - sys.g * sum_x);
    for ((m, x), p) in sys.bath.iter().zip(&s.bath_x).zip(s.bath_p.iter_mut()) {
        *p += h * (-m.mass * m.omega * m.omega * x - sys.g * s.x);
    }
}

fn drift(sys: &DoubleWellSystem, s: &mut FullState, h: f64) {
    s.x += h * s.p / sys.m_s;
    for ((m, x), p) in sys.bath.iter().zip(s.bath_x.iter_mut()).zip(&s.bath_p) {
        *x += h * p / m.mass;
    }
}

/// One kick-drift-kick step.
pub fn leapfrog_step(sys: &DoubleWellSystem, s: &mut FullState, dt: f64) {
    kick(sys, s, 0.5 * dt);
    drift(sys, s, dt);
    kick(sys, s, 0.5 * dt);
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(t, state)` every `every` steps, including both ends.
    pub checkpoints: Vec<(f64, FullState)>,
    pub dt: f64,
    pub halvings: usize,
    /// `max |E(t) − E(0)| / max(|E(0)|, barrier)`.
    pub energy_drift: f64,
}

pub const DRIFT_TOL: f64 = 1e-6;

/// Conservative leapfrog integration of the object and bath. The step is
/// halved (up to 8 times) until the relative energy drift is below `1e−6`.
pub fn symplectic_integrate(
    sys: &DoubleWellSystem,
    state0: &FullState,
    dt: f64,
    t_end: f64,
    every: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(invalid("dt", "need dt > 0 and T >= 0"));
    }
    if state0.bath_x.len() != sys.bath.len() || state0.bath_p.len() != sys.bath.len() {
        return Err(Error::Dimension("bath state does not match system".into()));
    }
    let e0 = sys.total_energy(state0);
    let scale = e0.abs().max(sys.barrier());
    let mut h = dt;
    for halvings in 0..=8 {
        let n_steps = (t_end / h).round() as usize;
        let stride = every.max(1) << halvings;
        let mut s = state0.clone();
        let mut cps = vec![(0.0, s.clone())];
        let mut drift_max: f64 = 0.0;
        for n in 1..=n_steps {
            leapfrog_step(sys, &mut s, h);
            drift_max = drift_max.max((sys.total_energy(&s) - e0).abs() / scale);
            if n % stride == 0 || n == n_steps {
                cps.push((n as f64 * h, s.clone()));
            }
        }
        if drift_max < DRIFT_TOL {
            return Ok(Trajectory {
                checkpoints: cps,
                dt: h,
                halvings,
                energy_drift: drift_max,
            });
        }
        h *= 0.5;
    }
    Err(Error::Numerical("energy drift persists after 8 halvings".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WellLabel {
    Left,
    Right,
    Undecided,
}

impl WellLabel {
    pub fn sign(self) -> i8 {
        match self {
            WellLabel::Left => -1,
            WellLabel::Right => 1,
            WellLabel::Undecided => 0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            WellLabel::Left => WellLabel::Right,
            WellLabel::Right => WellLabel::Left,
            WellLabel::Undecided => WellLabel::Undecided,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampedRun {
    pub label: WellLabel,
    pub settle_time: Option<f64>,
    pub final_state: (f64, f64),
}

fn damped_rhs(sys: &DoubleWellSystem, x: f64, v: f64) -> (f64, f64) {
    (v, (sys.well_force(x) - sys.lambda * v) / sys.m_s)
}

/// `m ẍ = −λẋ + ax − bx³` by classical RK4. Settled once
/// `|x ∓ x0| < 0.1 x0` and `|ẋ| < 0.1 x0 ω_well`; those bounds keep the
/// energy below the barrier, so the label is final.
pub fn damped_trajectory(sys: &DoubleWellSystem, x: f64, p: f64, dt: f64, t_end: f64) -> Result<DampedRun> {
    if !(sys.lambda > 0.0) {
        return Err(invalid("lambda", "damped runs need lambda > 0"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be > 0"));
    }
    let x0 = sys.x0();
    let v_tol = 0.1 * x0 * sys.well_frequency();
    let (mut x, mut v) = (x, p / sys.m_s);
    let n_steps = (t_end / dt).ceil() as usize;
    for n in 0..=n_steps {
        if v.abs() < v_tol {
            if (x - x0).abs() < 0.1 * x0 {
                return Ok(DampedRun {
                    label: WellLabel::Right,
                    settle_time: Some(n as f64 * dt),
                    final_state: (x, sys.m_s * v),
                });
            }
            if (x + x0).abs() < 0.1 * x0 {
                return Ok(DampedRun {
                    label: WellLabel::Left,
                    settle_time: Some(n as f64 * dt),
                    final_state: (x, sys.m_s * v),
                });
            }
        }
        if n == n_steps {
            break;
        }
        let (k1x, k1v) = damped_rhs(sys, x, v);
        let (k2x, k2v) = damped_rhs(sys, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v);
        let (k3x, k3v) = damped_rhs(sys, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v);
        let (k4x, k4v) = damped_rhs(sys, x + dt * k3x, v + dt * k3v);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    Ok(DampedRun {
        label: WellLabel::Undecided,
        settle_time: None,
        final_state: (x, sys.m_s * v),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinMap {
    /// Cell centres, symmetric about zero.
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// `labels[i * ps.len() + j]` for `(xs[i], ps[j])`.
    pub labels: Vec<WellLabel>,
}

impl BasinMap {
    pub fn get(&self, i: usize, j: usize) -> WellLabel {
        self.labels[i * self.ps.len() + j]
    }

    /// Cells whose label does not flip under `(x, p) → (−x, −p)`.
    pub fn antisymmetry_violations(&self) -> usize {
        let (nx, np) = (self.xs.len(), self.ps.len());
        (0..nx)
            .flat_map(|i| (0..np).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) != self.get(nx - 1 - i, np - 1 - j).flipped())
            .count()
    }

    pub fn undecided(&self) -> usize {
        self.labels.iter().filter(|l| **l == WellLabel::Undecided).count()
    }
}

fn centres(n: usize, half: f64) -> Vec<f64> {
    let w = 2.0 * half / n as f64;
    (0..n).map(|i| -half + (i as f64 + 0.5) * w).collect()
}

/// Labels an `n × n` grid over `[−x_half, x_half] × [−p_half, p_half]`.
pub fn basin_map(sys: &DoubleWellSystem, n: usize, x_half: f64, p_half: f64, dt: f64, t_end: f64) -> Result<BasinMap> {
    if n < 2 {
        return Err(invalid("n", "grid needs at least 2 cells per axis"));
    }
    let xs = centres(n, x_half);
    let ps = centres(n, p_half);
    let labels = (0..n * n)
        .into_par_iter()
        .map(|c| damped_trajectory(sys, xs[c / n], ps[c % n], dt, t_end).map(|r| r.label))
        .collect::<Result<Vec<_>>>()?;
    Ok(BasinMap { xs, ps, labels })
}

/// Object start at rest on the barrier top; bath drawn from independent
/// zero-mean Gaussians with `⟨x_n²⟩ = T/(mω²)`, `⟨p_n²⟩ = mT`.
pub fn sample_bath(sys: &DoubleWellSystem, temperature: f64, seed: u64, index: u64) -> Result<FullState> {
    if !(temperature >= 0.0) {
        return Err(invalid("temperature", "must be >= 0"));
    }
    let mut s = FullState::object(sys, 0.0, 0.0);
    if temperature == 0.0 {
        return Ok(s);
    }
    let mut rng = stream(seed, index);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for (i, m) in sys.bath.iter().enumerate() {
        s.bath_x[i] = unit.sample(&mut rng) * (temperature / (m.mass * m.omega * m.omega)).sqrt();
        s.bath_p[i] = unit.sample(&mut rng) * (m.mass * temperature).sqrt();
    }
    Ok(s)
}

/// Decision rule: the object's own energy stays below `−½·barrier` for
/// `dwell` time units; the label is the sign of `x_S` at that point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    pub dt: f64,
    pub t_max: f64,
    pub dwell: f64,
}

impl Default for DecisionRule {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_max: 2000.0,
            dwell: 50.0,
        }
    }
}

/// Conservative run from `state0` until decided or `t_max`.
pub fn bath_outcome(sys: &DoubleWellSystem, state0: &FullState, rule: DecisionRule) -> (WellLabel, f64) {
    let threshold = -0.5 * sys.barrier();
    let mut s = state0.clone();
    let n_steps = (rule.t_max / rule.dt).ceil() as usize;
    let mut since: Option<f64> = None;
    for n in 1..=n_steps {
        leapfrog_step(sys, &mut s, rule.dt);
        let t = n as f64 * rule.dt;
        if sys.object_energy(s.x, s.p) < threshold {
            let start = *since.get_or_insert(t);
            if t - start >= rule.dwell {
                let label = if s.x > 0.0 { WellLabel::Right } else { WellLabel::Left };
                return (label, t);
            }
        } else {
            since = None;
        }
    }
    (WellLabel::Undecided, rule.t_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathExperiment {
    pub labels: Vec<WellLabel>,
    pub decision_times: Vec<f64>,
    pub right: usize,
    pub left: usize,
    pub undecided: usize,
}

impl BathExperiment {
    /// `right / (right + left)`.
    pub fn right_fraction(&self) -> f64 {
        self.right as f64 / (self.right + self.left).max(1) as f64
    }
}

/// `n_draws` independent bath draws, each seeded by `(seed, draw index)`.
pub fn bath_outcome_experiment(
    sys: &DoubleWellSystem,
    n_draws: usize,
    temperature: f64,
    seed: u64,
    rule: DecisionRule,
) -> Result<BathExperiment> {
    if sys.bath.is_empty() {
        return Err(invalid("bath", "experiment needs bath modes"));
    }
    let results: Vec<(WellLabel, f64)> = (0..n_draws as u64)
        .into_par_iter()
        .map(|i| sample_bath(sys, temperature, seed, i).map(|s| bath_outcome(sys, &s, rule)))
        .collect::<Result<Vec<_>>>()?;
    let count = |l: WellLabel| results.iter().filter(|r| r.0 == l).count();
    Ok(BathExperiment {
        right: count(WellLabel::Right),
        left: count(WellLabel::Left),
        undecided: count(WellLabel::Undecided),
        labels: results.iter().map(|r| r.0).collect(),
        decision_times: results.iter().map(|r| r.1).collect(),
    })
}
