//! Symbolic dynamics: exact binary codes, the Bernoulli shift on digits and
//! the finite permutation versions of the Bernoulli and baker maps.

use crate::error::{invalid, Error, Result};

pub const MAX_BITS: u32 = 62;

/// Binary expansion `0.a_1 a_2 … a_N` stored as the integer `a_1…a_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitCode {
    value: u64,
    n: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    Up,
    Down,
}

impl BitCode {
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let n = bits.len() as u32;
        check_bits(n)?;
        let mut value = 0u64;
        for &b in bits {
            if b > 1 {
                return Err(Error::Domain(format!("bit value {b}")));
            }
            value = (value << 1) | b as u64;
        }
        Ok(Self { value, n })
    }

    pub fn from_integer(value: u64, n: u32) -> Result<Self> {
        check_bits(n)?;
        if value >> n != 0 {
            return Err(Error::Domain(format!("{value} does not fit in {n} bits")));
        }
        Ok(Self { value, n })
    }

    pub fn len(&self) -> u32 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn as_integer(&self) -> u64 {
        self.value
    }

    /// Digit `a_i`, 1-based.
    pub fn bit(&self, i: u32) -> u8 {
        assert!((1..=self.n).contains(&i));
        ((self.value >> (self.n - i)) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (1..=self.n).map(|i| self.bit(i)).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.value.count_ones()
    }

    fn mask(&self) -> u64 {
        (1u64 << self.n) - 1
    }
}

impl std::fmt::Display for BitCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

fn check_bits(n: u32) -> Result<()> {
    if (1..=MAX_BITS).contains(&n) {
        Ok(())
    } else {
        Err(invalid("N", format!("{n} not in 1..={MAX_BITS}")))
    }
}

/// Truncated binary expansion of `x` to `n` digits.
pub fn encode_binary(x: f64, n: u32) -> Result<BitCode> {
    check_bits(n)?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("{x} outside [0,1)")));
    }
    let scaled = (x * (1u64 << n) as f64).floor() as u64;
    BitCode::from_integer(scaled, n)
}

pub fn decode_binary(b: &BitCode) -> f64 {
    b.value as f64 / (1u64 << b.n) as f64
}

/// One digit shift. `Up` drops `a_1`, appends `incoming` as `a_N` and returns
/// the dropped digit; `Down` prepends `incoming` and returns the dropped `a_N`.
pub fn shift_step(b: BitCode, direction: ShiftDirection, incoming: u8) -> (BitCode, u8) {
    assert!(incoming <= 1, "incoming must be a bit");
    match direction {
        ShiftDirection::Up => {
            let out = b.bit(1);
            let value = ((b.value << 1) & b.mask()) | incoming as u64;
            (BitCode { value, n: b.n }, out)
        }
        ShiftDirection::Down => {
            let out = (b.value & 1) as u8;
            let value = (b.value >> 1) | ((incoming as u64) << (b.n - 1));
            (BitCode { value, n: b.n }, out)
        }
    }
}

/// Baker map on a pair of codes: the leading position digit moves to the
/// front of the momentum code.
pub fn baker_on_codes(x: BitCode, p: BitCode) -> (BitCode, BitCode) {
    let (x2, carried) = shift_step(x, ShiftDirection::Up, 0);
    let (p2, _) = shift_step(p, ShiftDirection::Down, carried);
    (x2, p2)
}

/// Permutation matrix stored as an index map: row `r` has its single 1 in
/// column `perm[r]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermMatrix {
    perm: Vec<usize>,
}

impl PermMatrix {
    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &c in &perm {
            if c >= perm.len() || seen[c] {
                return Err(Error::Domain("not a bijection".into()));
            }
            seen[c] = true;
        }
        Ok(Self { perm })
    }

    pub fn identity(j: usize) -> Self {
        Self {
            perm: (0..j).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (r, &c) in self.perm.iter().enumerate() {
            inv[c] = r;
        }
        Self { perm: inv }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            perm: self.perm.iter().map(|&c| other.perm[c]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(r, &c)| r == c)
    }

    /// Dense 0/1 form, for display and tests.
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let j = self.dim();
        self.perm
            .iter()
            .map(|&c| {
                let mut row = vec![0u8; j];
                row[c] = 1;
                row
            })
            .collect()
    }
}

pub fn log2_exact(j: usize) -> Result<u32> {
    if j >= 2 && j.is_power_of_two() && j.trailing_zeros() <= MAX_BITS {
        Ok(j.trailing_zeros())
    } else {
        Err(invalid("J", format!("{j} is not a power of two >= 2")))
    }
}

/// Discrete Bernoulli map on `J = 2^N` cells: the cell index digits are
/// rotated, which interleaves the two halves like a zipper.
pub fn bernoulli_perm(j: usize) -> Result<PermMatrix> {
    let n = log2_exact(j)?;
    let perm = (0..j)
        .map(|r| (r >> 1) | ((r & 1) << (n - 1)))
        .collect();
    Ok(PermMatrix { perm })
}

/// Probability vector or matrix over discrete cells.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteDensity {
    Vector(Vec<f64>),
    Matrix { j: usize, data: Vec<f64> },
}

impl DiscreteDensity {
    pub fn vector(v: Vec<f64>) -> Result<Self> {
        check_density(&v)?;
        Ok(DiscreteDensity::Vector(v))
    }

    /// Row-major `J×J` matrix.
    pub fn matrix(j: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != j * j {
            return Err(Error::Dimension(format!("{} entries for {j}x{j}", data.len())));
        }
        check_density(&data)?;
        Ok(DiscreteDensity::Matrix { j, data })
    }

    pub fn values(&self) -> &[f64] {
        match self {
            DiscreteDensity::Vector(v) => v,
            DiscreteDensity::Matrix { data, .. } => data,
        }
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }
}

fn check_density(v: &[f64]) -> Result<()> {
    if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Domain("negative or non-finite density".into()));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("total mass {s}")));
    }
    Ok(())
}

/// `ρ' = B ρ` on a density vector.
pub fn discrete_bernoulli_step(rho: &DiscreteDensity, b: &PermMatrix) -> Result<DiscreteDensity> {
    match rho {
        DiscreteDensity::Vector(v) if v.len() == b.dim() => Ok(DiscreteDensity::Vector(
            b.perm.iter().map(|&c| v[c]).collect(),
        )),
        _ => Err(Error::Dimension("expected a density vector of matching length".into())),
    }
}

/// `ρ' = Bᵗ ρ Bᵗ` on a density matrix, as a pure index permutation.
pub fn discrete_baker_step(rho: &DiscreteDensity, b: &PermMatrix) -> Result<DiscreteDensity> {
    match rho {
        DiscreteDensity::Matrix { j, data } if *j == b.dim() => {
            let inv = b.inverse();
            let j = *j;
            let mut out = vec![0.0; j * j];
            for n in 0..j {
                let src_row = inv.perm[n] * j;
                for m in 0..j {
                    out[n * j + m] = data[src_row + b.perm[m]];
                }
            }
            Ok(DiscreteDensity::Matrix { j, data: out })
        }
        _ => Err(Error::Dimension("expected a density matrix of matching size".into())),
    }
}

/// Period of the discrete Bernoulli permutation, found by explicit iteration
/// and checked against `lb(J)`.
pub fn recurrence_period(j: usize) -> Result<u32> {
    let n = log2_exact(j)?;
    let b = bernoulli_perm(j)?;
    let mut power = b.clone();
    let mut m = 1;
    while !power.is_identity() {
        power = power.compose(&b);
        m += 1;
    }
    if m != n {
        return Err(Error::Numerical(format!("period {m} differs from lb(J) = {n}")));
    }
    Ok(m)
}

/// Number of baker steps after which an arbitrary density matrix returns.
pub fn baker_recurrence_period(rho: &DiscreteDensity, b: &PermMatrix, max_steps: usize) -> Result<Option<usize>> {
    let mut cur = discrete_baker_step(rho, b)?;
    for m in 1..=max_steps {
        if cur == *rho {
            return Ok(Some(m));
        }
        cur = discrete_baker_step(&cur, b)?;
    }
    Ok(None)
}
