//! Damped double well: basin map around the barrier, then the left/right
//! split of outcomes decided by random bath initial conditions.

use qchaos::double_well::{basin_map, bath_outcome_experiment, DecisionRule, DoubleWellSystem};

fn main() -> qchaos::Result<()> {
    let sys = DoubleWellSystem::new(0.25, 0.01, 1.0)?;
    println!("minima at +-{}, barrier {}", sys.x0(), sys.barrier());
    let damped = sys.clone().with_friction(0.04)?;
    let map = basin_map(&damped, 32, 10.0, 2.0, 0.05, 2000.0)?;
    for j in (0..32).rev().step_by(2) {
        let row: String = (0..32)
            .map(|i| match map.get(i, j).sign() {
                1 => '+',
                -1 => '-',
                _ => '.',
            })
            .collect();
        println!("p={:>6.2} {row}", map.ps[j]);
    }
    println!("antisymmetry violations: {}", map.antisymmetry_violations());

    let bath = sys.with_ohmic_bath(32, 0.3, 2.0, 0.04)?;
    let e = bath_outcome_experiment(&bath, 2000, 0.05, 11, DecisionRule::default())?;
    println!(
        "bath draws: {} right, {} left, {} undecided (right fraction {:.3})",
        e.right,
        e.left,
        e.undecided,
        e.right_fraction()
    );
    Ok(())
}
