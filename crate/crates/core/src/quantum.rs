//! Dense complex linear algebra for the quantum modules: Fourier kernels,
//! density-operator functionals, partial traces and the cylinder Wigner
//! function.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `(F_J)_{jl} = e^{2πi jl/J}/√J`.
pub fn dft_matrix(j: usize) -> Result<CMatrix> {
    if j < 2 {
        return Err(invalid("J", format!("{j} < 2")));
    }
    let norm = 1.0 / (j as f64).sqrt();
    Ok(CMatrix::from_fn(j, j, |r, l| {
        let phase = TAU * ((r * l) % j) as f64 / j as f64;
        C64::from_polar(norm, phase)
    }))
}

/// `(G_J)_{jl} = e^{2πi (j+½)(l+½)/J}/√J`, the Fourier kernel between
/// antiperiodic position and momentum grids. `J = 1` is allowed here since
/// it is the block size of the smallest baker map.
pub fn sym_dft_matrix(j: usize) -> Result<CMatrix> {
    if j < 1 {
        return Err(invalid("J", "must be >= 1"));
    }
    let norm = 1.0 / (j as f64).sqrt();
    Ok(CMatrix::from_fn(j, j, |r, l| {
        let phase = TAU * (r as f64 + 0.5) * (l as f64 + 0.5) / j as f64;
        C64::from_polar(norm, phase)
    }))
}

/// Largest entry of `|U†U − 1|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    max_abs_diff_identity(&prod)
}

fn max_abs_diff_identity(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for col in 0..m.ncols() {
            let target = if r == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((m[(r, col)] - target).norm());
        }
    }
    worst
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for col in r..m.ncols() {
            worst = worst.max((m[(r, col)] - m[(col, r)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub const TOL: f64 = 1e-10;

    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("non-finite entry".into()));
        }
        if hermiticity_defect(&m) > Self::TOL {
            return Err(Error::Domain("not hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > Self::TOL || tr.im.abs() > Self::TOL {
            return Err(Error::Domain(format!("trace {tr}")));
        }
        let min = hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        if min < -Self::TOL {
            return Err(Error::Domain(format!("negative eigenvalue {min}")));
        }
        Ok(Self(m))
    }

    /// Skips validation; the caller guarantees the invariants.
    pub fn new_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn from_pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("state norm {n}")));
        }
        Ok(Self(psi * psi.adjoint()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(CMatrix::identity(d, d) / C64::new(d as f64, 0.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &CMatrix) -> Self {
        Self(u * &self.0 * u.adjoint())
    }
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().collect()
}

/// `S = −c Σ λ ln λ`. Eigenvalues in `[−1e−10, 0)` are clipped to zero.
pub fn von_neumann_entropy(rho: &DensityMatrix, c: f64) -> Result<f64> {
    let mut s = 0.0;
    for lam in hermitian_eigenvalues(rho.matrix()) {
        if lam < -DensityMatrix::TOL {
            return Err(Error::Domain(format!("negative eigenvalue {lam}")));
        }
        if lam > 0.0 {
            s -= lam * lam.ln();
        }
    }
    Ok(c * s)
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

pub fn pauli() -> [CMatrix; 3] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, -I, I, z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// `a_k = ½ Tr(ρ σ_k)`; then `Tr ρ² = ½ + 2|a|²`.
pub fn bloch_vector(rho: &DensityMatrix) -> Result<[f64; 3]> {
    if rho.dim() != 2 {
        return Err(Error::Dimension(format!("bloch vector needs 2x2, got {}", rho.dim())));
    }
    Ok(bloch_from_matrix(rho.matrix()))
}

pub(crate) fn bloch_from_matrix(m: &CMatrix) -> [f64; 3] {
    let r01 = m[(0, 1)];
    [r01.re, -r01.im, 0.5 * (m[(0, 0)].re - m[(1, 1)].re)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace of an operator on `A ⊗ B`, basis index `a·d_B + b`.
pub fn partial_trace(rho: &CMatrix, dims: (usize, usize), keep: Keep) -> Result<CMatrix> {
    let (da, db) = dims;
    if !rho.is_square() || rho.nrows() != da * db || da == 0 || db == 0 {
        return Err(Error::Dimension(format!(
            "{}x{} does not factor as {da}x{db}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(match keep {
        Keep::A => CMatrix::from_fn(da, da, |a1, a2| {
            (0..db).map(|b| rho[(a1 * db + b, a2 * db + b)]).sum()
        }),
        Keep::B => CMatrix::from_fn(db, db, |b1, b2| {
            (0..da).map(|a| rho[(a * db + b1, a * db + b2)]).sum()
        }),
    })
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for col in 0..d {
        let diag = r[(col, col)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { C64::new(1.0, 0.0) };
        for row in 0..d {
            q[(row, col)] *= phase;
        }
    }
    q
}

/// Random full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density_matrix<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let mut m = &g * g.adjoint();
    let tr = m.trace();
    m /= tr;
    symmetrize(&mut m);
    DensityMatrix(m)
}

pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Replaces `m` by `(m + m†)/2`.
pub fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for r in 0..n {
        m[(r, r)].im = 0.0;
        for col in r + 1..n {
            let avg = 0.5 * (m[(r, col)] + m[(col, r)].conj());
            m[(r, col)] = avg;
            m[(col, r)] = avg.conj();
        }
    }
}

/// Wigner function on the cylinder, rows at half-integer momenta `s/2`
/// (`s = l + m`), columns at the given angles.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    /// Momentum of each row in units of ħ: `s/2` for `s = −2L..=2L`.
    pub p_half: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Row-major `p_half.len() × thetas.len()`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.thetas.len() + col]
    }

    /// `Σ_θ W Δθ` for one row, assuming a uniform angle grid over `[0, 2π)`.
    pub fn row_integral(&self, row: usize) -> f64 {
        let nt = self.thetas.len();
        let dth = TAU / nt as f64;
        self.values[row * nt..(row + 1) * nt].iter().sum::<f64>() * dth
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.p_half.len()).map(|r| self.row_integral(r)).sum()
    }
}

/// Uniform angle grid of `n` points on `[0, 2π)`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// `W(s/2, θ) = (1/2π) Σ_{l+m=s} Re(ρ_lm e^{i(l−m)θ})` for `ρ` indexed by
/// `l ∈ [−L, L]`. Fails when the boundary rows carry more than `1e−6`.
pub fn wigner_cylinder(rho: &CMatrix, thetas: &[f64]) -> Result<WignerGrid> {
    let n = rho.nrows();
    if n % 2 == 0 || !rho.is_square() {
        return Err(Error::Dimension("ρ must be (2L+1)x(2L+1)".into()));
    }
    let l_max = (n / 2) as i64;
    let edge = rho[(0, 0)].re.abs() + rho[(n - 1, n - 1)].re.abs();
    if edge > 1e-6 {
        return Err(Error::Truncation(format!("boundary occupation {edge:.3e}")));
    }
    let nt = thetas.len();
    let n_d = 4 * l_max as usize + 1;
    // table[(d + 2L)·nt + j] = e^{i d θ_j}
    let mut table = vec![C64::new(0.0, 0.0); n_d * nt];
    for d in -2 * l_max..=2 * l_max {
        let row = (d + 2 * l_max) as usize;
        for (j, &th) in thetas.iter().enumerate() {
            table[row * nt + j] = C64::from_polar(1.0, d as f64 * th);
        }
    }
    let n_rows = 2 * n - 1;
    let mut values = vec![0.0; n_rows * nt];
    for a in 0..n {
        for b in 0..n {
            let z = rho[(a, b)];
            if z.norm_sqr() < 1e-30 {
                continue;
            }
            let s = a + b;
            let d = a as i64 - b as i64;
            let trow = &table[((d + 2 * l_max) as usize) * nt..((d + 2 * l_max) as usize + 1) * nt];
            let out = &mut values[s * nt..(s + 1) * nt];
            for (o, e) in out.iter_mut().zip(trow) {
                *o += (z * e).re;
            }
        }
    }
    for v in values.iter_mut() {
        *v /= 2.0 * PI;
    }
    let p_half = (0..n_rows).map(|s| (s as f64 - 2.0 * l_max as f64) / 2.0).collect();
    Ok(WignerGrid {
        p_half,
        thetas: thetas.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream;
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> DensityMatrix {
        DensityMatrix::new(CMatrix::from_diagonal(&CVector::from_iterator(
            v.len(),
            v.iter().map(|&x| C64::new(x, 0.0)),
        )))
        .unwrap()
    }

    #[test]
    fn f2_is_hadamard() {
        let f = dft_matrix(2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let expect = [h, h, h, -h];
        for (z, e) in f.iter().zip(expect.iter()) {
            assert!((z - C64::new(*e, 0.0)).norm() < 1e-15);
        }
        assert!(dft_matrix(1).is_err());
    }

    #[test]
    fn fourier_kernels_are_unitary() {
        for j in [2usize, 3, 4, 8, 16, 32, 64] {
            assert!(unitarity_defect(&dft_matrix(j).unwrap()) < 1e-12);
            assert!(unitarity_defect(&sym_dft_matrix(j).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn dft_of_constant_is_basis_vector() {
        let j = 8;
        let f = dft_matrix(j).unwrap();
        let v = CVector::from_element(j, C64::new(1.0 / (j as f64).sqrt(), 0.0));
        let out = f * v;
        assert!((out[0].norm() - 1.0).abs() < 1e-14);
        assert!(out.iter().skip(1).all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn entropy_examples() {
        let psi = random_pure_state(5, &mut stream(1, 0));
        let pure = DensityMatrix::from_pure(&psi).unwrap();
        assert!(von_neumann_entropy(&pure, 1.0).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(6);
        assert!((von_neumann_entropy(&mixed, 2.0).unwrap() - 2.0 * 6f64.ln()).abs() < 1e-12);
        let d = diag(&[0.75, 0.25]);
        let expected = 4f64.ln() - 0.75 * 3f64.ln();
        assert!((von_neumann_entropy(&d, 1.0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn density_matrix_validation() {
        let bad = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(0.6, 0.0)]));
        assert!(DensityMatrix::new(bad).is_err());
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.5, 0.0), c(-0.5, 0.0)]));
        assert!(DensityMatrix::new(neg).is_err());
        let nonh = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(nonh).is_err());
    }

    #[test]
    fn bloch_and_purity() {
        let up = diag(&[1.0, 0.0]);
        assert_eq!(purity(&up), 1.0);
        assert_eq!(bloch_vector(&up).unwrap(), [0.0, 0.0, 0.5]);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((purity(&mixed) - 0.5).abs() < 1e-15);
        assert_eq!(bloch_vector(&mixed).unwrap(), [0.0, 0.0, 0.0]);
        let cat = DensityMatrix::new(CMatrix::from_element(2, 2, c(0.5, 0.0))).unwrap();
        let a = bloch_vector(&cat).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-15 && a[2] == 0.0);
        assert!(bloch_vector(&DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = stream(3, 0);
        let ra = random_density_matrix(2, &mut rng);
        let rb = random_density_matrix(3, &mut rng);
        let prod = ra.matrix().kronecker(rb.matrix());
        let a = partial_trace(&prod, (2, 3), Keep::A).unwrap();
        let b = partial_trace(&prod, (2, 3), Keep::B).unwrap();
        assert!(max_abs(&(a - ra.matrix())) < 1e-14);
        assert!(max_abs(&(b - rb.matrix())) < 1e-14);
        let h = 1.0 / 2f64.sqrt();
        let bell = CVector::from_vec(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]);
        let rho = DensityMatrix::from_pure(&bell).unwrap();
        let m = partial_trace(rho.matrix(), (2, 2), Keep::A).unwrap();
        assert!(max_abs(&(m - DensityMatrix::maximally_mixed(2).into_matrix())) < 1e-15);
        assert!(partial_trace(&prod, (4, 2), Keep::A).is_err());
    }

    #[test]
    fn schmidt_symmetry_of_marginal_entropies() {
        let mut rng = stream(9, 0);
        for _ in 0..20 {
            let psi = random_pure_state(8, &mut rng);
            let rho = psi.clone() * psi.adjoint();
            let a = DensityMatrix::new(partial_trace(&rho, (2, 4), Keep::A).unwrap()).unwrap();
            let b = DensityMatrix::new(partial_trace(&rho, (2, 4), Keep::B).unwrap()).unwrap();
            let sa = von_neumann_entropy(&a, 1.0).unwrap();
            let sb = von_neumann_entropy(&b, 1.0).unwrap();
            assert!((sa - sb).abs() < 1e-10);
        }
    }

    #[test]
    fn wigner_of_momentum_eigenstate_is_flat() {
        let l = 4;
        let n = 2 * l + 1;
        let mut rho = CMatrix::zeros(n, n);
        rho[(l, l)] = c(1.0, 0.0);
        let th = theta_grid(32);
        let w = wigner_cylinder(&rho, &th).unwrap();
        let zero_row = 2 * l;
        for col in 0..32 {
            assert!((w.get(zero_row, col) - 1.0 / TAU).abs() < 1e-15);
        }
        assert!((w.total_mass() - 1.0).abs() < 1e-12);
        let nonzero: f64 = w.values.iter().enumerate().filter(|(i, _)| i / 32 != zero_row).map(|(_, v)| v.abs()).sum();
        assert_eq!(nonzero, 0.0);
    }

    #[test]
    fn wigner_marginals_of_random_diagonal() {
        let l = 6;
        let n = 2 * l + 1;
        let mut rng = stream(12, 0);
        let mut p: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.0 } else { rng.random::<f64>() }).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let rho = CMatrix::from_diagonal(&CVector::from_iterator(n, p.iter().map(|&x| c(x, 0.0))));
        let w = wigner_cylinder(&rho, &theta_grid(64)).unwrap();
        for (i, &pi) in p.iter().enumerate() {
            assert!((w.row_integral(2 * i) - pi).abs() < 1e-14);
        }
    }

    #[test]
    fn cat_state_shows_fringes_on_midline() {
        let l = 3;
        let n = 2 * l + 1;
        let h = 1.0 / 2f64.sqrt();
        let mut psi = CVector::zeros(n);
        psi[l + 1] = c(h, 0.0);
        psi[l - 1] = c(h, 0.0);
        let rho = psi.clone() * psi.adjoint();
        let th = theta_grid(16);
        let w = wigner_cylinder(&rho, &th).unwrap();
        let mid = 2 * l;
        for (j, &t) in th.iter().enumerate() {
            assert!((w.get(mid, j) - (2.0 * t).cos() / TAU).abs() < 1e-14);
        }
        assert!(w.get(mid, 0) > 0.0 && w.get(mid, 4) < 0.0);
        assert!(w.row_integral(mid).abs() < 1e-14);
        assert!((w.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wigner_rejects_boundary_leakage() {
        let mut rho = CMatrix::zeros(5, 5);
        rho[(0, 0)] = c(1.0, 0.0);
        assert!(wigner_cylinder(&rho, &theta_grid(8)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn entropy_is_unitarily_invariant(seed in 0u64..10_000, d in 2usize..24) {
            let mut rng = stream(seed, 0);
            let rho = random_density_matrix(d, &mut rng);
            let u = random_unitary(d, &mut rng);
            prop_assert!(unitarity_defect(&u) < 1e-12);
            let s0 = von_neumann_entropy(&rho, 1.0).unwrap();
            let s1 = von_neumann_entropy(&rho.conjugate(&u), 1.0).unwrap();
            prop_assert!((s0 - s1).abs() < 1e-9);
        }

        #[test]
        fn purity_matches_bloch_identity(seed in 0u64..10_000) {
            let rho = random_density_matrix(2, &mut stream(seed, 1));
            let a = bloch_vector(&rho).unwrap();
            let norm2 = a.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((purity(&rho) - (0.5 + 2.0 * norm2)).abs() < 1e-12);
        }

        #[test]
        fn partial_trace_preserves_trace_and_hermiticity(seed in 0u64..10_000) {
            let rho = random_density_matrix(6, &mut stream(seed, 2));
            for keep in [Keep::A, Keep::B] {
                let r = partial_trace(rho.matrix(), (2, 3), keep).unwrap();
                prop_assert!((r.trace() - c(1.0, 0.0)).norm() < 1e-12);
                prop_assert!(hermiticity_defect(&r) < 1e-14);
            }
        }
    }
}
