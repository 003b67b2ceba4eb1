//! Classical maps: Bernoulli shift, baker map (plain and dissipative),
//! standard map, Zaslavsky map and the noisy standard map.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};

/// Point of the unit square, `x` position and `p` momentum, both in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) || !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("({x}, {p}) outside the unit square")));
        }
        Ok(Self { x, p })
    }
}

/// Rotor state on the cylinder: angle in `[0, 2π)`, unbounded momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorState {
    pub theta: f64,
    pub p: f64,
}

impl RotorState {
    pub fn new(theta: f64, p: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            p,
        }
    }
}

/// Angle noise added to the rotation step of the noisy standard map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// Gaussian angle kick with the given variance.
    Gaussian { variance: f64 },
    /// With probability `nu` the angle is replaced by a uniform draw.
    Reset { nu: f64 },
}

/// Noise kind plus the seed of the stream that drives it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rng_seed: u64,
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseKind::None => Ok(()),
            NoiseKind::Gaussian { variance } if variance >= 0.0 && variance.is_finite() => Ok(()),
            NoiseKind::Gaussian { variance } => {
                Err(invalid("variance", format!("{variance} must be >= 0")))
            }
            NoiseKind::Reset { nu } if (0.0..=1.0).contains(&nu) => Ok(()),
            NoiseKind::Reset { nu } => Err(invalid("nu", format!("{nu} not in [0,1]"))),
        }
    }

    /// Gaussian noise matching the mean-momentum measurement: variance ħ²γ.
    pub fn mean_l_measurement(hbar: f64, gamma: f64) -> Self {
        NoiseKind::Gaussian {
            variance: hbar * hbar * gamma,
        }
    }

    /// Reset noise matching the full-distribution measurement: ν = 1 − e^{−γ}.
    pub fn full_distribution_measurement(gamma: f64) -> Self {
        NoiseKind::Reset {
            nu: nu_from_gamma(gamma),
        }
    }
}

pub fn nu_from_gamma(gamma: f64) -> f64 {
    -(-gamma).exp_m1()
}

pub fn gamma_from_nu(nu: f64) -> f64 {
    -(-nu).ln_1p()
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{x} outside [0,1)")))
    }
}

/// `x -> 2x mod 1`.
pub fn bernoulli_step(x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok((2.0 * x).fract())
}

/// Stretch in `x`, fold into `p`: `x' = 2x mod 1`, `p' = (p + int(2x))/2`.
pub fn baker_step(pt: PhasePoint) -> Result<PhasePoint> {
    check_unit(pt.x)?;
    check_unit(pt.p)?;
    Ok(baker_unchecked(pt))
}

#[inline]
pub(crate) fn baker_unchecked(pt: PhasePoint) -> PhasePoint {
    let two_x = 2.0 * pt.x;
    let bit = two_x.floor();
    PhasePoint {
        x: two_x - bit,
        p: 0.5 * (pt.p + bit),
    }
}

/// Inverse baker map: `x = (x' + int(2p'))/2`, `p = 2p' mod 1`.
pub fn baker_inverse(pt: PhasePoint) -> Result<PhasePoint> {
    check_unit(pt.x)?;
    check_unit(pt.p)?;
    let two_p = 2.0 * pt.p;
    let bit = two_p.floor();
    Ok(PhasePoint {
        x: 0.5 * (pt.x + bit),
        p: two_p - bit,
    })
}

/// Contracts the momentum by `a`, then applies the baker map.
pub fn dissipative_baker_step(pt: PhasePoint, a: f64) -> Result<PhasePoint> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(invalid("a", format!("{a} not in (0,1]")));
    }
    check_unit(pt.x)?;
    check_unit(pt.p)?;
    Ok(baker_unchecked(PhasePoint {
        x: pt.x,
        p: a * pt.p,
    }))
}

/// Chirikov standard map; the new angle enters the kick.
#[inline]
pub fn standard_map_step(s: RotorState, k: f64) -> RotorState {
    let theta = wrap_angle(s.theta + s.p);
    RotorState {
        theta,
        p: s.p + k * theta.sin(),
    }
}

/// Standard map with momentum damping `e^{−λ}` per step.
#[inline]
pub fn zaslavsky_step(s: RotorState, k: f64, lambda: f64) -> RotorState {
    let damped = (-lambda).exp() * s.p;
    let theta = wrap_angle(s.theta + damped);
    RotorState {
        theta,
        p: damped + k * theta.sin(),
    }
}

/// Draws the angle noise for one step. Returns the new angle given the
/// noiseless rotated angle.
#[inline]
pub fn apply_angle_noise<R: Rng + ?Sized>(theta: f64, noise: &NoiseKind, rng: &mut R) -> f64 {
    match *noise {
        NoiseKind::None => theta,
        NoiseKind::Gaussian { variance } => {
            if variance == 0.0 {
                theta
            } else {
                let n = Normal::new(0.0, variance.sqrt()).expect("finite variance");
                theta + n.sample(rng)
            }
        }
        NoiseKind::Reset { nu } => {
            if nu > 0.0 && rng.random::<f64>() < nu {
                rng.random::<f64>() * TAU
            } else {
                theta
            }
        }
    }
}

/// Noisy, optionally damped standard map:
/// `θ' = θ + e^{−λ}p + ξ`, `p' = e^{−λ}p + K sin θ'`.
pub fn noisy_standard_step<R: Rng + ?Sized>(
    s: RotorState,
    k: f64,
    noise: &NoiseKind,
    lambda: f64,
    rng: &mut R,
) -> RotorState {
    let damped = if lambda == 0.0 {
        s.p
    } else {
        (-lambda).exp() * s.p
    };
    let theta = wrap_angle(apply_angle_noise(s.theta + damped, noise, rng));
    RotorState {
        theta,
        p: damped + k * theta.sin(),
    }
}

/// Central-difference Jacobian determinant of a map of the plane,
/// unwrapping the angle coordinate of the first component.
pub fn jacobian_det<F>(f: F, theta: f64, p: f64, h: f64) -> f64
where
    F: Fn(f64, f64) -> (f64, f64),
{
    let unwrap = |a: f64, b: f64| {
        let mut d = a - b;
        d -= TAU * (d / TAU).round();
        d
    };
    let (t_pt, p_pt) = f(theta + h, p);
    let (t_mt, p_mt) = f(theta - h, p);
    let (t_pp, p_pp) = f(theta, p + h);
    let (t_mp, p_mp) = f(theta, p - h);
    let a = unwrap(t_pt, t_mt) / (2.0 * h);
    let b = unwrap(t_pp, t_mp) / (2.0 * h);
    let c = (p_pt - p_mt) / (2.0 * h);
    let d = (p_pp - p_mp) / (2.0 * h);
    a * d - b * c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn pp(x: f64, p: f64) -> PhasePoint {
        PhasePoint::new(x, p).unwrap()
    }

    #[test]
    fn bernoulli_examples() {
        assert_eq!(bernoulli_step(0.25).unwrap(), 0.5);
        assert_eq!(bernoulli_step(0.75).unwrap(), 0.5);
        assert_eq!(bernoulli_step(0.5).unwrap(), 0.0);
        assert!(bernoulli_step(1.0).is_err());
        assert!(bernoulli_step(-0.1).is_err());
    }

    #[test]
    fn baker_examples() {
        assert_eq!(baker_step(pp(0.25, 0.5)).unwrap(), pp(0.5, 0.25));
        assert_eq!(baker_step(pp(0.75, 0.5)).unwrap(), pp(0.5, 0.75));
        assert_eq!(baker_step(pp(0.0, 0.0)).unwrap(), pp(0.0, 0.0));
        assert_eq!(baker_inverse(pp(0.5, 0.25)).unwrap(), pp(0.25, 0.5));
        assert_eq!(baker_inverse(pp(0.5, 0.75)).unwrap(), pp(0.75, 0.5));
        assert!(PhasePoint::new(1.0, 0.0).is_err());
    }

    #[test]
    fn dissipative_baker_examples() {
        let pt = pp(0.3, 0.7);
        assert_eq!(dissipative_baker_step(pt, 1.0).unwrap(), baker_step(pt).unwrap());
        assert_eq!(
            dissipative_baker_step(pp(0.25, 0.5), 0.5).unwrap(),
            pp(0.5, 0.125)
        );
        assert!(dissipative_baker_step(pt, 0.0).is_err());
        assert!(dissipative_baker_step(pt, 1.5).is_err());
    }

    #[test]
    fn standard_map_examples() {
        let s = standard_map_step(RotorState::new(FRAC_PI_2, 1.0), 0.0);
        assert!((s.theta - (FRAC_PI_2 + 1.0)).abs() < 1e-15 && s.p == 1.0);
        let s = standard_map_step(RotorState::new(FRAC_PI_2, 0.0), 1.0);
        assert!((s.theta - FRAC_PI_2).abs() < 1e-15 && (s.p - 1.0).abs() < 1e-15);
        for k in [0.0, 1.0, 7.5] {
            assert_eq!(standard_map_step(RotorState::new(0.0, 0.0), k), RotorState::new(0.0, 0.0));
        }
    }

    #[test]
    fn zaslavsky_examples() {
        let s = RotorState::new(1.3, 0.4);
        assert_eq!(zaslavsky_step(s, 3.0, 0.0), standard_map_step(s, 3.0));
        let d = zaslavsky_step(RotorState::new(0.0, 4.0), 0.0, 2f64.ln());
        assert!((d.p - 2.0).abs() < 1e-14);
        let (k, lam) = (5.0f64, 0.3f64);
        let bound = k / (1.0 - (-lam).exp());
        let mut s = RotorState::new(0.1, 40.0);
        for _ in 0..200 {
            s = zaslavsky_step(s, k, lam);
        }
        assert!(s.p.abs() < bound);
    }

    #[test]
    fn noisy_map_reduces_to_standard_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = RotorState::new(2.0, -3.0);
        assert_eq!(
            noisy_standard_step(s, 4.0, &NoiseKind::None, 0.0, &mut rng),
            standard_map_step(s, 4.0)
        );
        assert_eq!(
            noisy_standard_step(s, 4.0, &NoiseKind::Gaussian { variance: 0.0 }, 0.0, &mut rng),
            standard_map_step(s, 4.0)
        );
        assert_eq!(
            noisy_standard_step(s, 4.0, &NoiseKind::Reset { nu: 0.0 }, 0.0, &mut rng),
            standard_map_step(s, 4.0)
        );
    }

    #[test]
    fn reset_noise_with_nu_one_diffuses_at_uncorrelated_rate() {
        let k: f64 = 4.0;
        let n_traj = 100_000;
        let steps = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = NoiseKind::Reset { nu: 1.0 };
        let mut sum2 = 0.0;
        let mut sum = 0.0;
        for _ in 0..n_traj {
            let mut s = RotorState::new(rng.random::<f64>() * TAU, 0.0);
            for _ in 0..steps {
                s = noisy_standard_step(s, k, &noise, 0.0, &mut rng);
            }
            sum += s.p;
            sum2 += s.p * s.p;
        }
        let mean = sum / n_traj as f64;
        let var = sum2 / n_traj as f64 - mean * mean;
        let slope = var / steps as f64;
        assert!((slope - k * k / 2.0).abs() < 0.25 * k * k / 2.0, "slope {slope}");
    }

    #[test]
    fn noise_validation_and_nu_gamma_roundtrip() {
        assert!(NoiseKind::Gaussian { variance: -1.0 }.validate().is_err());
        assert!(NoiseKind::Reset { nu: 1.5 }.validate().is_err());
        assert!(NoiseKind::Reset { nu: 0.5 }.validate().is_ok());
        assert!((gamma_from_nu(0.5) - 2f64.ln()).abs() < 1e-15);
        assert!((nu_from_gamma(gamma_from_nu(1e-3)) - 1e-3).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn baker_roundtrip(x in 0.0f64..1.0, p in 0.0f64..1.0) {
            let pt = pp(x, p);
            let back = baker_inverse(baker_step(pt).unwrap()).unwrap();
            prop_assert!((back.x - x).abs() < 1e-12 && (back.p - p).abs() < 1e-12);
        }

        #[test]
        fn standard_map_is_area_preserving(theta in 0.0f64..TAU, p in -20.0f64..20.0, k in 0.0f64..12.0) {
            let det = jacobian_det(|t, q| { let s = standard_map_step(RotorState { theta: t, p: q }, k); (s.theta, s.p) }, theta, p, 1e-5);
            prop_assert!((det - 1.0).abs() < 1e-6);
        }

        #[test]
        fn zaslavsky_contracts_by_damping_factor(theta in 0.0f64..TAU, p in -20.0f64..20.0, lam in 0.0f64..2.0) {
            let det = jacobian_det(|t, q| { let s = zaslavsky_step(RotorState { theta: t, p: q }, 5.0, lam); (s.theta, s.p) }, theta, p, 1e-5);
            prop_assert!((det - f64::exp(-lam)).abs() < 1e-6);
        }

        #[test]
        fn angles_stay_reduced(theta in -100.0f64..100.0, p in -50.0f64..50.0) {
            let s = standard_map_step(RotorState::new(theta, p), 3.3);
            prop_assert!((0.0..TAU).contains(&s.theta));
        }
    }
}
