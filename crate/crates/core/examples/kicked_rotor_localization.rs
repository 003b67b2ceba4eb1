//! Closed quantum kicked rotor against the classical standard map: energy
//! growth stalls and the momentum distribution localizes exponentially.

use qchaos::rotor::{
    classical_reference_energy, crossover_estimates, default_l_max, evolve, hbar_from_fraction, localization_length,
    HbarConvention, RotationPhase, GOLDEN,
};

fn main() -> qchaos::Result<()> {
    let big_k = 10.0;
    let hbar = hbar_from_fraction(0.15 / GOLDEN, HbarConvention::Angular);
    let k = big_k / hbar;
    let steps = 1000;
    let run = evolve(default_l_max(k), 0, hbar, k, RotationPhase::Half, steps)?;
    let classical = classical_reference_energy(big_k, steps, 20_000, 3)?;
    println!("hbar = {hbar:.4}, L_max = {}", run.l_max);
    println!("    n   E_quantum  E_classical");
    for n in [0, 10, 50, 100, 200, 500, 1000] {
        println!("{n:>5} {:>11.2} {:>12.2}", run.energy[n], classical[n]);
    }
    let fit = localization_length(&run.final_p, &run.l_values())?;
    let (n_info, n_unc) = crossover_estimates(big_k, hbar)?;
    println!("localization length {:.1} (R^2 {:.3})", fit.length, fit.r_squared);
    println!("crossover estimates: {n_info:.1} and {n_unc:.1} kicks");
    Ok(())
}
