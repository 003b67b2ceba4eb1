//! Spin coupled to bosonic modes: short-time oracles against finite
//! differences, then the reduced spin dynamics and its switching statistics.

use qchaos::seeding::stream;
use qchaos::spin_boson::{
    short_time_oracles, evolve_escalating, initial_state, product_boson_state, random_boson_coeffs,
    short_time_differences, switching_statistics, Integrator, SpinBosonSystem,
};

fn main() -> qchaos::Result<()> {
    let sys = SpinBosonSystem::single_mode(1.0, 1.0, 0.2, 40)?;
    let c = random_boson_coeffs(40, 8, 3.0, &mut stream(1, 0));
    let psi = initial_state(&sys, 1, &c)?;
    let or = short_time_oracles(&sys, &c, 1)?;
    let fd = short_time_differences(&sys, &psi, 1e-3)?;
    println!("a_z''(0): closed form {:.6}, finite difference {:.6}", or.a_z_ddot, fd[1]);
    println!("P''(0):   closed form {:.6}, finite difference {:.6}", or.purity_ddot, fd[3]);

    let sys = SpinBosonSystem::ladder(1.0, 1.0, 0.3, 3, 6)?;
    let per_mode: Vec<_> = (0..3).map(|k| random_boson_coeffs(6, 2, 1.0, &mut stream(2, k))).collect();
    let psi = initial_state(&sys, 1, &product_boson_state(&sys, &per_mode)?)?;
    let run = evolve_escalating(&sys, &psi, 0.05, 100.0, 10, Integrator::Auto)?;
    println!("\n    t     a_z   purity   parity");
    for s in run.samples.iter().step_by(20) {
        println!("{:>5.1} {:>7.3} {:>8.4} {:>8.5}", s.t, s.bloch[2], s.purity, s.parity);
    }
    let t: Vec<f64> = run.samples.iter().map(|s| s.t).collect();
    let az: Vec<f64> = run.samples.iter().map(|s| s.bloch[2]).collect();
    let st = switching_statistics(&t, &az, 0.05)?;
    println!("n_max used {}, {} flips, mean dwell {:.2}", run.n_max, st.flips, st.mean_dwell);
    Ok(())
}
