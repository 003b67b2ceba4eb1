//! Bernoulli shift on real numbers and on finite binary codes, side by side,
//! then the discrete Bernoulli and baker permutations and their periods.

use qchaos::maps::bernoulli_step;
use qchaos::symbolic::{
    baker_recurrence_period, bernoulli_perm, decode_binary, encode_binary, recurrence_period, shift_step,
    DiscreteDensity, ShiftDirection,
};

fn main() -> qchaos::Result<()> {
    let x0 = 0.3;
    let mut x = x0;
    let mut code = encode_binary(x0, 52)?;
    println!("{:>3} {:>20} {:>20}  leading bits", "n", "x (float)", "x (code)");
    for n in 0..=12 {
        let bits = code.to_string();
        println!("{n:>3} {x:>20.15} {:>20.15}  {}", decode_binary(&code), &bits[..16]);
        x = bernoulli_step(x)?;
        code = shift_step(code, ShiftDirection::Up, 0).0;
    }

    println!("\n  J  Bernoulli period  baker period");
    for j in [2usize, 4, 8, 16, 32, 64] {
        let b = bernoulli_perm(j)?;
        let mut data: Vec<f64> = (0..j * j).map(|i| ((i * 7919) % 101) as f64).collect();
        let total: f64 = data.iter().sum();
        data.iter_mut().for_each(|v| *v /= total);
        let baker = baker_recurrence_period(&DiscreteDensity::matrix(j, data)?, &b, 4 * j)?;
        println!("{j:>3} {:>17} {:>13}", recurrence_period(j)?, baker.map_or("none".into(), |m| m.to_string()));
    }
    Ok(())
}
