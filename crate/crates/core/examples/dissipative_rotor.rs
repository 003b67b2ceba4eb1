//! Kicked rotor with friction: relax to the stationary state, then compare
//! its Wigner function with the classical attractor of the damped map.

use qchaos::ensembles::{evolve_ensemble, RotorInit, RotorMap};
use qchaos::open_rotor::{
    band_fraction, classical_band_fraction, evolve_to_stationarity, zaslavsky_backbone, DissipatorForm, RotorDensity,
};
use qchaos::rotor::{hbar_from_fraction, HbarConvention};

fn main() -> qchaos::Result<()> {
    let (big_k, lambda) = (5.0, 0.3);
    let hbar = hbar_from_fraction(0.02, HbarConvention::Angular);
    let st = RotorDensity::momentum_eigenstate(160, 0, hbar, big_k / hbar)?.with_friction(lambda)?;
    let (st, periods, converged) = evolve_to_stationarity(st, DissipatorForm::Jump, 1e-3, 60, 400)?;
    println!("stationary after {periods} periods (converged {converged}), E = {:.3}", st.energy());
    let w = st.wigner(128)?;
    let backbone = |t: f64| zaslavsky_backbone(t, big_k, lambda);
    let cl = evolve_ensemble(
        &RotorMap::Zaslavsky { k: big_k, lambda },
        &RotorInit::Uniform { p_min: -5.0, p_max: 5.0 },
        300,
        20_000,
        9,
        &[],
    )?;
    let pts: Vec<(f64, f64)> = cl.cloud.iter().map(|r| (r.theta, r.p)).collect();
    println!("band  Wigner mass  classical");
    for n in [1.0, 2.0, 3.0, 5.0, 10.0] {
        let h = n * hbar;
        println!(
            "{n:>3}hbar {:>10.3} {:>10.3}",
            band_fraction(&w, hbar, backbone, h),
            classical_band_fraction(&pts, backbone, h)
        );
    }
    Ok(())
}
