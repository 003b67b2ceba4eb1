//! Kicked rotor under repeated momentum measurement: diffusion returns as
//! the measurement strength grows, and the measured diagonal tracks the
//! noisy classical map.

use qchaos::ensembles::{evolve_ensemble, RotorInit, RotorMap};
use qchaos::maps::{gamma_from_nu, NoiseKind};
use qchaos::open_rotor::{compare_with_noisy_map, evolve_open, DissipatorForm, MeasurementMode, RotorDensity};
use qchaos::rotor::{hbar_from_fraction, HbarConvention, GOLDEN};

fn main() -> qchaos::Result<()> {
    let big_k = 5.0;
    let hbar = hbar_from_fraction(0.1 / GOLDEN, HbarConvention::Angular);
    let steps = 256;
    println!("    nu   E({steps})  E_noisy_map   TV");
    for nu in [0.0, 1e-3, 0.05, 0.5] {
        let gamma = gamma_from_nu(nu);
        let st = RotorDensity::momentum_eigenstate(384, 0, hbar, big_k / hbar)?
            .with_measurement(gamma, MeasurementMode::FullPl)?;
        let run = evolve_open(st, steps, DissipatorForm::Jump, 0)?;
        let map = RotorMap::Noisy { k: big_k, noise: NoiseKind::full_distribution_measurement(gamma), lambda: 0.0 };
        let cl = evolve_ensemble(&map, &RotorInit::Line { p0: 0.0 }, steps, 100_000, 5, &[])?;
        let momenta: Vec<f64> = cl.cloud.iter().map(|r| r.p).collect();
        let cmp = compare_with_noisy_map(&run.state.probabilities(), hbar, &momenta)?;
        println!("{nu:>6} {:>8.2} {:>12.2} {:>6.3}", run.energy[steps], cl.energy[steps], cmp.tv);
    }
    Ok(())
}
