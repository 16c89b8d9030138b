//! Phase-tracked elements of the n-qubit Pauli group.
//!
//! A [`PauliString`] stores one X bit and one Z bit per qubit plus a global
//! phase `i^phase`. The letters are the Hermitian Pauli matrices, so the bit
//! pair `(1, 1)` means `Y`, not `XZ`. Qubit 0 is the leftmost letter of the
//! text form and the most significant tensor factor of the dense form; masks
//! are laid out so that qubit `q` lives at bit `n - 1 - q`, which lets a mask
//! be XOR-ed directly onto a computational basis index.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, VqedError};

/// Largest register that [`PauliString::to_dense`] will render.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Largest register a mask can hold.
pub const MAX_QUBITS: usize = 64;

/// `i^k` for `k` in `0..4`.
pub(crate) fn i_pow(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Element `i^phase * P_0 ⊗ ... ⊗ P_{n-1}` of the Pauli group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits supported");
        Self { n, x: 0, z: 0, phase: 0 }
    }

    /// Builds a string from raw masks in basis-index layout (qubit `q` at bit `n-1-q`).
    pub fn from_masks(n: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(VqedError::SizeLimit { qubits: n, max: MAX_QUBITS });
        }
        let full = full_mask(n);
        if x & !full != 0 || z & !full != 0 {
            return Err(VqedError::InvalidArgument(format!(
                "mask has bits outside a {n}-qubit register"
            )));
        }
        Ok(Self { n, x, z, phase: phase & 3 })
    }

    /// A single letter (`'I'`, `'X'`, `'Y'` or `'Z'`) on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, letter: char) -> Result<Self> {
        if q >= n {
            return Err(VqedError::InvalidArgument(format!("qubit {q} out of range for {n} qubits")));
        }
        let mut p = Self::identity(n);
        p.set_letter(q, letter)?;
        Ok(p)
    }

    fn set_letter(&mut self, q: usize, letter: char) -> Result<()> {
        let (xb, zb) = match letter {
            'I' => (false, false),
            'X' => (true, false),
            'Y' => (true, true),
            'Z' => (false, true),
            other => return Err(VqedError::Parse(format!("invalid Pauli letter `{other}`"))),
        };
        let bit = 1u64 << (self.n - 1 - q);
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Power of `i` carried by the string.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase & 3;
        self
    }

    /// Same letters, phase reset to `+1`.
    pub fn unsigned(self) -> Self {
        self.with_phase(0)
    }

    pub fn letter(&self, q: usize) -> char {
        let bit = 1u64 << (self.n - 1 - q);
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0 && self.phase == 0
    }

    /// True when the letters are all `I`, whatever the phase.
    pub fn is_scalar(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Hermitian iff the phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    /// Number of qubits with a non-identity letter.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(VqedError::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    /// Group product `self · other`, phase included.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        // Each letter is i^{xz} X^x Z^z; moving Z^{z1} past X^{x2} costs (-1)^{z1 x2}.
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let exponent = self.phase as u32
            + other.phase as u32
            + (self.x & self.z).count_ones()
            + (other.x & other.z).count_ones()
            + 2 * (self.z & other.x).count_ones()
            + 3 * (x & z).count_ones();
        Self { n: self.n, x, z, phase: (exponent & 3) as u8 }
    }

    /// True iff `self · other == other · self`.
    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.check_same(other)?;
        Ok(self.commutes_unchecked(other))
    }

    pub(crate) fn commutes_unchecked(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Image of basis state `|col⟩`: returns `(row, amplitude)` with `P|col⟩ = amplitude |row⟩`.
    #[inline]
    pub fn apply_to_basis(&self, col: usize) -> (usize, Complex64) {
        let k = self.phase as u32 + (self.x & self.z).count_ones() + 2 * (self.z & col as u64).count_ones();
        (col ^ self.x as usize, i_pow((k & 3) as u8))
    }

    /// Dense `2^n × 2^n` matrix.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(VqedError::SizeLimit { qubits: self.n, max: MAX_DENSE_QUBITS });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, amp) = self.apply_to_basis(col);
            m[(row, col)] = amp;
        }
        Ok(m)
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(VqedError::SizeLimit { qubits: n, max: MAX_QUBITS });
        }
        Ok(Self {
            n,
            x: (self.x << other.n) | other.x,
            z: (self.z << other.n) | other.z,
            phase: (self.phase + other.phase) & 3,
        })
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for q in 0..self.n {
            write!(f, "{}", self.letter(q))?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = VqedError;

    /// Accepts `[+|-|i|+i|-i]` followed by one or more of `I X Y Z`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, letters) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        let n = letters.chars().count();
        if n == 0 {
            return Err(VqedError::Parse(format!("`{s}` has no Pauli letters")));
        }
        if n > MAX_QUBITS {
            return Err(VqedError::SizeLimit { qubits: n, max: MAX_QUBITS });
        }
        let mut p = Self::identity(n);
        for (q, c) in letters.chars().enumerate() {
            p.set_letter(q, c)?;
        }
        Ok(p.with_phase(phase))
    }
}

impl serde::Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
