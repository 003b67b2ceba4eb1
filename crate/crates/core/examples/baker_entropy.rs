//! Coarse-grained entropy of a cloud under the baker map, and the box-counting
//! dimension of the dissipative baker attractor.

use qchaos::ensembles::{baker_attractor, box_counting_dimension, gaussian_cloud, grid_entropy, uniform_cloud};
use qchaos::maps::baker_step;

fn main() -> qchaos::Result<()> {
    let mut cloud = gaussian_cloud(200_000, (0.5, 0.5), 0.05, 1);
    println!("step  S(64x64)  S(8x8)");
    for n in 0..=8 {
        println!("{n:>4} {:>9.4} {:>7.4}", grid_entropy(&cloud, 64, 1.0), grid_entropy(&cloud, 8, 1.0));
        for p in cloud.iter_mut() {
            *p = baker_step(*p)?;
        }
    }

    let scales: Vec<f64> = (2..=10).map(|k| 0.5f64.powi(k)).collect();
    println!("\n   a  box dimension");
    for a in [1.0, 0.75, 0.5, 0.25] {
        let pts = baker_attractor(&uniform_cloud(400_000, 2), a, 30, 1)?;
        let bc = box_counting_dimension(&pts, &scales)?;
        println!("{a:>4} {:>14.3}", bc.dimension);
    }
    Ok(())
}
