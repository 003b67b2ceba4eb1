//! Quantum baker map: unitarity, eigenphases and the return probability
//! |Tr U^n|² with its strongest revivals.

use qchaos::qbaker::{build_quantum_baker, eigenphases, find_revivals, BakerConvention};
use qchaos::quantum::unitarity_defect;

fn main() -> qchaos::Result<()> {
    for j in [4usize, 8, 16, 32] {
        let qb = build_quantum_baker(j, BakerConvention::Symmetric)?;
        let revivals: Vec<_> = find_revivals(&qb, 500, 0.3)?.into_iter().filter(|r| r.0 >= 1).collect();
        println!(
            "J = {j:>2}: unitarity defect {:.1e}, {} revivals above 0.3 J^2 for n >= 1, strongest (n, P/J^2) {:?}",
            unitarity_defect(&qb.reconstruct()),
            revivals.len(),
            revivals.first()
        );
    }
    let qb = build_quantum_baker(8, BakerConvention::Symmetric)?;
    println!("J = 8 eigenphases: {:.4?}", eigenphases(&qb));
    Ok(())
}
