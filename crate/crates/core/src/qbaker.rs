//! Quantized baker map: construction, eigenphases, return probability and
//! revival search.

use nalgebra::Schur;

use crate::error::{invalid, Error, Result};
use crate::quantum::{dft_matrix, sym_dft_matrix, unitarity_defect, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BakerConvention {
    /// Plain discrete Fourier kernels `F_J`.
    Plain,
    /// Half-shifted kernels `G_J`, which keep the `x → 1−x` symmetry.
    #[default]
    Symmetric,
}

#[derive(Debug, Clone)]
pub struct QuantumBaker {
    pub j: usize,
    pub convention: BakerConvention,
    /// One-step propagator in position representation.
    pub u: CMatrix,
    schur_q: CMatrix,
    phases: Vec<f64>,
}

fn kernel(j: usize, conv: BakerConvention) -> Result<CMatrix> {
    match conv {
        BakerConvention::Plain if j == 1 => Ok(CMatrix::from_element(1, 1, C64::new(1.0, 0.0))),
        BakerConvention::Plain => dft_matrix(j),
        BakerConvention::Symmetric => sym_dft_matrix(j),
    }
}

fn block_diag(half: &CMatrix) -> CMatrix {
    let h = half.nrows();
    let mut b = CMatrix::zeros(2 * h, 2 * h);
    b.view_mut((0, 0), (h, h)).copy_from(half);
    b.view_mut((h, h), (h, h)).copy_from(half);
    b
}

/// `U = K_J^{−1} · diag(K_{J/2}, K_{J/2})` with `K` the chosen Fourier kernel.
pub fn build_quantum_baker(j: usize, convention: BakerConvention) -> Result<QuantumBaker> {
    if j < 2 || j % 2 != 0 {
        return Err(invalid("J", format!("{j} must be even and >= 2")));
    }
    let full = kernel(j, convention)?;
    let half = kernel(j / 2, convention)?;
    let u = full.adjoint() * block_diag(&half);
    let defect = unitarity_defect(&u);
    if defect > 1e-10 {
        return Err(Error::Numerical(format!("unitarity defect {defect:.3e}")));
    }
    let schur = Schur::new(u.clone());
    let (q, t) = schur.unpack();
    let phases = (0..j).map(|i| t[(i, i)].arg()).collect();
    Ok(QuantumBaker {
        j,
        convention,
        u,
        schur_q: q,
        phases,
    })
}

impl QuantumBaker {
    /// Momentum representation `K_J U K_J^{−1}`.
    pub fn momentum_representation(&self) -> Result<CMatrix> {
        let k = kernel(self.j, self.convention)?;
        Ok(&k * &self.u * k.adjoint())
    }

    /// Rebuilds `U = Q diag(e^{iε}) Q†` from the eigensystem.
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.j,
            self.phases.iter().map(|&e| C64::from_polar(1.0, e)),
        ));
        &self.schur_q * d * self.schur_q.adjoint()
    }

    /// Unitary `U^n` from the eigensystem.
    pub fn power(&self, n: i64) -> CMatrix {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.j,
            self.phases.iter().map(|&e| C64::from_polar(1.0, n as f64 * e)),
        ));
        &self.schur_q * d * self.schur_q.adjoint()
    }
}

/// Eigenphases in `(−π, π]`, sorted.
pub fn eigenphases(qb: &QuantumBaker) -> Vec<f64> {
    let mut p = qb.phases.clone();
    p.sort_by(f64::total_cmp);
    p
}

/// `|Tr U^n|² = |Σ_k e^{inε_k}|²`.
pub fn return_probability(qb: &QuantumBaker, n: u64) -> f64 {
    if n == 0 {
        return (qb.j * qb.j) as f64;
    }
    let s: C64 = qb
        .phases
        .iter()
        .map(|&e| C64::from_polar(1.0, (n as f64 * e).rem_euclid(std::f64::consts::TAU)))
        .sum();
    s.norm_sqr()
}

/// All `n ≤ n_max` with `P(n)/J² ≥ threshold`, strongest first.
pub fn find_revivals(qb: &QuantumBaker, n_max: u64, threshold: f64) -> Result<Vec<(u64, f64)>> {
    if n_max < 1 {
        return Err(invalid("n_max", "must be >= 1"));
    }
    if !(threshold >= 0.0 && threshold <= 1.0) {
        return Err(invalid("threshold", format!("{threshold} not in [0,1]")));
    }
    let norm = (qb.j * qb.j) as f64;
    let mut out: Vec<(u64, f64)> = (0..=n_max)
        .map(|n| (n, return_probability(qb, n) / norm))
        .filter(|&(_, p)| p >= threshold - 1e-12)
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Parity `j → J−1−j` as a matrix.
pub fn parity_matrix(j: usize) -> CMatrix {
    CMatrix::from_fn(j, j, |r, c| {
        if r + c == j - 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}
