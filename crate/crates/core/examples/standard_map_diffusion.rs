//! Momentum diffusion of the standard map, with and without angle noise,
//! compared with the quasilinear rate K²/2.

use qchaos::ensembles::{evolve_ensemble, fit_diffusion, RotorInit, RotorMap};
use qchaos::maps::NoiseKind;

fn main() -> qchaos::Result<()> {
    println!("   K  noise         D      D/(K^2/2)");
    for k in [2.0, 5.0, 10.0, 20.0] {
        for (label, noise) in [("none", NoiseKind::None), ("reset 0.5", NoiseKind::Reset { nu: 0.5 })] {
            let map = RotorMap::Noisy { k, noise, lambda: 0.0 };
            let run = evolve_ensemble(&map, &RotorInit::Line { p0: 0.0 }, 100, 50_000, 7, &[])?;
            let d = fit_diffusion(&run.variance, 20, 100)?.slope;
            println!("{k:>4} {label:<10} {d:>8.2} {:>10.3}", d / (k * k / 2.0));
        }
    }
    Ok(())
}
