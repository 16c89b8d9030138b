//! Dense density-matrix engine.
//!
//! Every operation works on the `2^m × 2^m` matrix directly. Pauli products,
//! single-qubit unitaries and single-qubit depolarizing are all `O(4^m)`
//! kernels; nothing here multiplies two dense matrices except
//! [`measure_projective`], which takes arbitrary projectors.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VqedError};
use crate::pauli::{PauliString, MAX_DENSE_QUBITS};

pub type CMatrix = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

/// 2×2 complex matrix, row-major.
pub type Gate1 = [[Complex64; 2]; 2];

/// Algebraic identities.
pub const TOL_ALGEBRA: f64 = 1e-12;
/// Accumulated evolution checks.
pub const TOL_EVOLUTION: f64 = 1e-10;
/// Residue above which an observable is rejected as non-Hermitian.
pub const TOL_HERMITIAN: f64 = 1e-8;
/// Branch probabilities below this are never sampled.
pub const TOL_BRANCH: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Density matrix over `qubits` qubits, possibly sub-normalized after post-selection.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    data: CMatrix,
    normalized: bool,
}

impl DensityMatrix {
    /// Wraps a matrix after checking its shape and Hermiticity.
    pub fn from_matrix(data: CMatrix) -> Result<Self> {
        let dim = data.nrows();
        if data.ncols() != dim || !dim.is_power_of_two() {
            return Err(VqedError::DimensionMismatch { expected: dim.next_power_of_two(), found: data.ncols() });
        }
        let qubits = dim.trailing_zeros() as usize;
        if qubits > MAX_DENSE_QUBITS {
            return Err(VqedError::SizeLimit { qubits, max: MAX_DENSE_QUBITS });
        }
        let residual = hermitian_residual(&data);
        if residual > TOL_EVOLUTION {
            return Err(VqedError::NonHermitian(residual));
        }
        let trace = data.trace().re;
        let normalized = (trace - 1.0).abs() <= TOL_EVOLUTION;
        Ok(Self { qubits, data, normalized })
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > TOL_EVOLUTION {
            return Err(VqedError::NotNormalized(norm));
        }
        Self::from_matrix(psi * psi.adjoint())
    }

    /// `|b⟩⟨b|` for computational basis index `b`.
    pub fn basis(qubits: usize, b: usize) -> Result<Self> {
        let dim = checked_dim(qubits)?;
        if b >= dim {
            return Err(VqedError::InvalidArgument(format!("basis index {b} out of range")));
        }
        let mut data = CMatrix::zeros(dim, dim);
        data[(b, b)] = ONE;
        Ok(Self { qubits, data, normalized: true })
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        let dim = checked_dim(qubits)?;
        let data = CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        Ok(Self { qubits, data, normalized: true })
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    /// Divides by the trace; fails when the trace is below the branch tolerance.
    pub fn normalize(&self) -> Result<Self> {
        let t = self.trace();
        if t < TOL_BRANCH {
            return Err(VqedError::Annihilated(t));
        }
        let mut out = self.clone();
        out.scale(1.0 / t);
        out.normalized = true;
        Ok(out)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.scale_mut(factor);
        self.normalized = self.normalized && factor == 1.0;
    }

    pub(crate) fn from_parts_unchecked(qubits: usize, data: CMatrix, normalized: bool) -> Self {
        Self { qubits, data, normalized }
    }

    /// Largest eigenvalue deviation below zero is not checked here; this only
    /// tests the Hermitian part of the invariant.
    pub fn hermitian_residual(&self) -> f64 {
        hermitian_residual(&self.data)
    }

    fn check_qubit(&self, q: usize) -> Result<usize> {
        if q >= self.qubits {
            return Err(VqedError::InvalidArgument(format!(
                "qubit {q} out of range for {} qubits",
                self.qubits
            )));
        }
        Ok(self.qubits - 1 - q)
    }

    fn check_pauli(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.qubits {
            return Err(VqedError::DimensionMismatch { expected: self.qubits, found: p.num_qubits() });
        }
        Ok(())
    }

    // ---- in-place kernels -------------------------------------------------

    /// `ρ → u ρ u†` with `u` acting on qubit `q`.
    pub fn apply_gate1(&mut self, u: &Gate1, q: usize) -> Result<()> {
        let bit = self.check_qubit(q)?;
        gate1_conjugate(&mut self.data, u, bit);
        Ok(())
    }

    /// Applies `u` to every qubit.
    pub fn apply_transversal(&mut self, u: &Gate1) {
        for bit in 0..self.qubits {
            gate1_conjugate(&mut self.data, u, bit);
        }
    }

    /// Single-qubit depolarizing `ρ → (1-p)ρ + p (I/2 ⊗ tr_q ρ)` on qubit `q`.
    pub fn depolarize(&mut self, p: f64, q: usize) -> Result<()> {
        check_probability(p)?;
        let bit = self.check_qubit(q)?;
        depolarize_bit(&mut self.data, p, bit);
        Ok(())
    }

    /// Local depolarizing `ℰ_p^{⊗m}` on every qubit.
    pub fn depolarize_all(&mut self, p: f64) -> Result<()> {
        check_probability(p)?;
        if p > 0.0 {
            for bit in 0..self.qubits {
                depolarize_bit(&mut self.data, p, bit);
            }
        }
        Ok(())
    }

    /// `ρ → P ρ`.
    pub fn left_mul_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_pauli(p)?;
        left_mul_pauli(&mut self.data, p);
        self.normalized = false;
        Ok(())
    }

    /// `ρ → ρ P`.
    pub fn right_mul_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_pauli(p)?;
        right_mul_pauli(&mut self.data, p);
        self.normalized = false;
        Ok(())
    }

    /// `ρ → P ρ P†`.
    pub fn conjugate_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_pauli(p)?;
        let normalized = self.normalized;
        left_mul_pauli(&mut self.data, p);
        right_mul_pauli(&mut self.data, &p.with_phase((4 - p.phase()) & 3));
        self.normalized = normalized;
        Ok(())
    }

    /// `ρ → Π ρ` with `Π = ∏ (I + s_i G_i)/2`; `signs[i]` false means `s_i = +1`.
    pub fn left_project(&mut self, generators: &[PauliString], signs: u64) -> Result<()> {
        for (i, g) in generators.iter().enumerate() {
            self.check_pauli(g)?;
            left_half_sum(&mut self.data, g, signs >> i & 1 == 1);
        }
        self.normalized = false;
        Ok(())
    }

    /// `ρ → ρ Π`.
    pub fn right_project(&mut self, generators: &[PauliString], signs: u64) -> Result<()> {
        for (i, g) in generators.iter().enumerate() {
            self.check_pauli(g)?;
            right_half_sum(&mut self.data, g, signs >> i & 1 == 1);
        }
        self.normalized = false;
        Ok(())
    }

    /// `ρ → Π ρ Π`.
    pub fn project(&mut self, generators: &[PauliString], signs: u64) -> Result<()> {
        self.left_project(generators, signs)?;
        self.right_project(generators, signs)
    }

    /// `tr[ρ P]`, complex in general.
    pub fn pauli_trace(&self, p: &PauliString) -> Result<Complex64> {
        self.check_pauli(p)?;
        Ok(pauli_trace(&self.data, p))
    }

    /// `tr[ρ P]` for Hermitian `P`.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        if !p.is_hermitian() {
            return Err(VqedError::NonHermitian(1.0));
        }
        let t = self.pauli_trace(p)?;
        if t.im.abs() > TOL_HERMITIAN {
            return Err(VqedError::NonHermitian(t.im.abs()));
        }
        Ok(t.re)
    }

    // ---- binary format ----------------------------------------------------

    /// Header of two little-endian `u64` (rows, cols), then row-major `(re, im)` `f64` pairs.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_matrix(&self.data, w)
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        Self::from_matrix(read_matrix(r)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.data.len());
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_binary(bytes)
    }
}

fn checked_dim(qubits: usize) -> Result<usize> {
    if qubits > MAX_DENSE_QUBITS {
        return Err(VqedError::SizeLimit { qubits, max: MAX_DENSE_QUBITS });
    }
    Ok(1 << qubits)
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(VqedError::InvalidProbability(p));
    }
    Ok(())
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for c in 0..d {
        for r in c..d {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

// ---- raw kernels (column-major nalgebra storage: index = r + c * dim) ------

fn gate1_conjugate(m: &mut CMatrix, u: &Gate1, bit: usize) {
    let dim = m.nrows();
    let mask = 1usize << bit;
    let data = m.as_mut_slice();
    // rows: ρ → u ρ
    for c in 0..dim {
        let col = c * dim;
        for r0 in (0..dim).filter(|r| r & mask == 0) {
            let r1 = r0 | mask;
            let a = data[col + r0];
            let b = data[col + r1];
            data[col + r0] = u[0][0] * a + u[0][1] * b;
            data[col + r1] = u[1][0] * a + u[1][1] * b;
        }
    }
    // columns: ρ → ρ u†
    let (u00, u01, u10, u11) = (u[0][0].conj(), u[0][1].conj(), u[1][0].conj(), u[1][1].conj());
    for c0 in (0..dim).filter(|c| c & mask == 0) {
        let c1 = c0 | mask;
        for r in 0..dim {
            let a = data[c0 * dim + r];
            let b = data[c1 * dim + r];
            data[c0 * dim + r] = a * u00 + b * u01;
            data[c1 * dim + r] = a * u10 + b * u11;
        }
    }
}

fn depolarize_bit(m: &mut CMatrix, p: f64, bit: usize) {
    let dim = m.nrows();
    let mask = 1usize << bit;
    let keep = 1.0 - p / 2.0;
    let mix = p / 2.0;
    let off = 1.0 - p;
    let data = m.as_mut_slice();
    for c in 0..dim {
        for r in 0..dim {
            let rb = r & mask;
            let cb = c & mask;
            if rb != cb {
                data[c * dim + r] *= off;
            } else if rb == 0 {
                let i0 = c * dim + r;
                let i1 = (c | mask) * dim + (r | mask);
                let a = data[i0];
                let b = data[i1];
                data[i0] = a * keep + b * mix;
                data[i1] = b * keep + a * mix;
            }
        }
    }
}

fn left_mul_pauli(m: &mut CMatrix, p: &PauliString) {
    let dim = m.nrows();
    let src = m.clone();
    let src = src.as_slice();
    let data = m.as_mut_slice();
    for a in 0..dim {
        let (row, amp) = p.apply_to_basis(a);
        for c in 0..dim {
            data[c * dim + row] = amp * src[c * dim + a];
        }
    }
}

fn right_mul_pauli(m: &mut CMatrix, p: &PauliString) {
    // (ρP)[:, c] = amp(c) ρ[:, row(c)] where P|c⟩ = amp |row(c)⟩
    let dim = m.nrows();
    let src = m.clone();
    let src = src.as_slice();
    let data = m.as_mut_slice();
    for c in 0..dim {
        let (row, amp) = p.apply_to_basis(c);
        for r in 0..dim {
            data[c * dim + r] = src[row * dim + r] * amp;
        }
    }
}

/// `ρ → (ρ ± Gρ)/2` in place.
fn left_half_sum(m: &mut CMatrix, g: &PauliString, negative: bool) {
    let dim = m.nrows();
    let src = m.clone();
    let src = src.as_slice();
    let data = m.as_mut_slice();
    let sign = if negative { -0.5 } else { 0.5 };
    for a in 0..dim {
        let (row, amp) = g.apply_to_basis(a);
        let amp = amp * sign;
        for c in 0..dim {
            data[c * dim + row] = src[c * dim + row] * 0.5 + amp * src[c * dim + a];
        }
    }
}

fn right_half_sum(m: &mut CMatrix, g: &PauliString, negative: bool) {
    let dim = m.nrows();
    let src = m.clone();
    let src = src.as_slice();
    let data = m.as_mut_slice();
    let sign = if negative { -0.5 } else { 0.5 };
    for c in 0..dim {
        let (row, amp) = g.apply_to_basis(c);
        let amp = amp * sign;
        for r in 0..dim {
            data[c * dim + r] = src[c * dim + r] * 0.5 + src[row * dim + r] * amp;
        }
    }
}

fn pauli_trace(m: &CMatrix, p: &PauliString) -> Complex64 {
    // tr[ρP] = Σ_c ⟨c|ρP|c⟩ = Σ_c amp(c) ρ[c, row(c)]
    let dim = m.nrows();
    let data = m.as_slice();
    (0..dim)
        .map(|c| {
            let (row, amp) = p.apply_to_basis(c);
            data[row * dim + c] * amp
        })
        .sum()
}

// ---- state vectors ------------------------------------------------------

/// Applies `u` to qubit `q` of an `m`-qubit state vector.
pub fn apply_gate1_vector(psi: &mut StateVector, u: &Gate1, qubits: usize, q: usize) {
    let mask = 1usize << (qubits - 1 - q);
    for i0 in (0..psi.len()).filter(|i| i & mask == 0) {
        let i1 = i0 | mask;
        let (a, b) = (psi[i0], psi[i1]);
        psi[i0] = u[0][0] * a + u[0][1] * b;
        psi[i1] = u[1][0] * a + u[1][1] * b;
    }
}

pub fn apply_transversal_vector(psi: &mut StateVector, u: &Gate1, qubits: usize) {
    for q in 0..qubits {
        apply_gate1_vector(psi, u, qubits, q);
    }
}

/// Dense matrix of `u^{⊗n}`.
pub fn transversal_dense(u: &Gate1, n: usize) -> Result<CMatrix> {
    let dim = checked_dim(n)?;
    let mut out = CMatrix::identity(dim, dim);
    for c in 0..dim {
        let mut col = out.column(c).into_owned();
        apply_transversal_vector(&mut col, u, n);
        out.set_column(c, &col);
    }
    Ok(out)
}

// ---- pure operations -----------------------------------------------------

/// `ρ → U ρ U†` with `U` acting on `targets` (first target is the most significant factor of `U`).
pub fn apply_unitary(rho: &DensityMatrix, u: &CMatrix, targets: &[usize]) -> Result<DensityMatrix> {
    let k = targets.len();
    let sub = 1usize << k;
    if u.nrows() != sub || u.ncols() != sub {
        return Err(VqedError::DimensionMismatch { expected: sub, found: u.nrows() });
    }
    let mut bits = Vec::with_capacity(k);
    for (i, &t) in targets.iter().enumerate() {
        if targets[..i].contains(&t) {
            return Err(VqedError::InvalidArgument(format!("target {t} repeated")));
        }
        bits.push(rho.check_qubit(t)?);
    }
    let dim = rho.dim();
    // offset of local index j within a block
    let offsets: Vec<usize> = (0..sub)
        .map(|j| {
            bits.iter()
                .enumerate()
                .filter(|(i, _)| j >> (k - 1 - i) & 1 == 1)
                .fold(0usize, |acc, (_, &b)| acc | 1 << b)
        })
        .collect();
    let target_mask: usize = bits.iter().fold(0, |acc, &b| acc | 1 << b);
    let bases: Vec<usize> = (0..dim).filter(|i| i & target_mask == 0).collect();

    let mut m = rho.data.clone();
    let mut buf = vec![ZERO; sub];
    for c in 0..dim {
        for &base in &bases {
            for (j, slot) in buf.iter_mut().enumerate() {
                *slot = (0..sub).map(|l| u[(j, l)] * m[(base | offsets[l], c)]).sum();
            }
            for j in 0..sub {
                m[(base | offsets[j], c)] = buf[j];
            }
        }
    }
    for r in 0..dim {
        for &base in &bases {
            for (j, slot) in buf.iter_mut().enumerate() {
                *slot = (0..sub).map(|l| m[(r, base | offsets[l])] * u[(j, l)].conj()).sum();
            }
            for j in 0..sub {
                m[(r, base | offsets[j])] = buf[j];
            }
        }
    }
    Ok(DensityMatrix { qubits: rho.qubits, data: m, normalized: rho.normalized })
}

pub fn apply_depolarizing(rho: &DensityMatrix, p: f64, target: usize) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    out.depolarize(p, target)?;
    Ok(out)
}

/// `Re tr[ρ A]`.
pub fn expectation(rho: &DensityMatrix, a: &CMatrix) -> Result<f64> {
    if a.nrows() != rho.dim() || a.ncols() != rho.dim() {
        return Err(VqedError::DimensionMismatch { expected: rho.dim(), found: a.nrows() });
    }
    let residual = hermitian_residual(a);
    if residual > TOL_EVOLUTION {
        return Err(VqedError::NonHermitian(residual));
    }
    let dim = rho.dim();
    let mut t = ZERO;
    for r in 0..dim {
        for c in 0..dim {
            t += rho.data[(r, c)] * a[(c, r)];
        }
    }
    if t.im.abs() > TOL_HERMITIAN {
        return Err(VqedError::NonHermitian(t.im.abs()));
    }
    Ok(t.re)
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(VqedError::DimensionMismatch { expected: rho.dim(), found: psi.len() });
    }
    let t = rho.trace();
    if (t - 1.0).abs() > TOL_EVOLUTION {
        return Err(VqedError::NotNormalized(t));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > TOL_EVOLUTION {
        return Err(VqedError::NotNormalized(norm));
    }
    let f = (psi.adjoint() * &rho.data * psi)[(0, 0)].re;
    if !(-TOL_EVOLUTION..=1.0 + TOL_EVOLUTION).contains(&f) {
        return Err(VqedError::NotNormalized(f));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Two-outcome projective measurement; returns `(±1, post-state)`.
pub fn measure_projective<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    projectors: (&CMatrix, &CMatrix),
    rng: &mut R,
) -> Result<(i8, DensityMatrix)> {
    let (plus, minus) = projectors;
    let dim = rho.dim();
    for pr in [plus, minus] {
        if pr.nrows() != dim || pr.ncols() != dim {
            return Err(VqedError::DimensionMismatch { expected: dim, found: pr.nrows() });
        }
        if hermitian_residual(pr) > TOL_EVOLUTION || (pr * pr - pr).camax() > TOL_EVOLUTION {
            return Err(VqedError::InvalidMeasurement("projector is not Hermitian idempotent".into()));
        }
    }
    if (plus + minus - CMatrix::identity(dim, dim)).camax() > TOL_EVOLUTION {
        return Err(VqedError::InvalidMeasurement("projectors do not sum to identity".into()));
    }
    let p_plus = (plus * &rho.data).trace().re.max(0.0);
    let p_minus = (minus * &rho.data).trace().re.max(0.0);
    let total = p_plus + p_minus;
    if p_plus < TOL_BRANCH && p_minus < TOL_BRANCH {
        return Err(VqedError::InvalidMeasurement("both branches have zero probability".into()));
    }
    let take_plus = if p_plus < TOL_BRANCH {
        false
    } else if p_minus < TOL_BRANCH {
        true
    } else {
        rng.random::<f64>() * total < p_plus
    };
    let (outcome, proj, prob) = if take_plus { (1, plus, p_plus) } else { (-1, minus, p_minus) };
    let post = proj * &rho.data * proj / Complex64::new(prob, 0.0);
    Ok((outcome, DensityMatrix { qubits: rho.qubits, data: post, normalized: true }))
}

/// Measures a Hermitian Pauli `P` on a normalized state: `(±1, post-state)`.
pub fn measure_pauli<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    p: &PauliString,
    rng: &mut R,
) -> Result<(i8, DensityMatrix)> {
    let expval = rho.pauli_expectation(p)?;
    let trace = rho.trace();
    let p_plus = ((trace + expval) / 2.0).max(0.0);
    let p_minus = ((trace - expval) / 2.0).max(0.0);
    if p_plus < TOL_BRANCH && p_minus < TOL_BRANCH {
        return Err(VqedError::InvalidMeasurement("both branches have zero probability".into()));
    }
    let take_plus = if p_plus < TOL_BRANCH {
        false
    } else if p_minus < TOL_BRANCH {
        true
    } else {
        rng.random::<f64>() * (p_plus + p_minus) < p_plus
    };
    let (outcome, negative, prob) = if take_plus { (1, false, p_plus) } else { (-1, true, p_minus) };
    let mut post = rho.clone();
    left_half_sum(&mut post.data, p, negative);
    right_half_sum(&mut post.data, p, negative);
    post.scale(1.0 / prob);
    post.normalized = true;
    Ok((outcome, post))
}

// ---- binary matrix codec -------------------------------------------------

/// Largest dimension accepted by the decoder.
pub const MAX_DECODE_DIM: u64 = 1 << MAX_DENSE_QUBITS;

pub fn write_matrix<W: Write>(m: &CMatrix, mut w: W) -> Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<CMatrix> {
    let mut word = [0u8; 8];
    let mut read_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word).map_err(|_| VqedError::Decode("truncated header".into()))?;
        Ok(u64::from_le_bytes(word))
    };
    let rows = read_u64(&mut r)?;
    let cols = read_u64(&mut r)?;
    if rows > MAX_DECODE_DIM || cols > MAX_DECODE_DIM {
        return Err(VqedError::Decode(format!("dimensions {rows}x{cols} exceed {MAX_DECODE_DIM}")));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    // grow with the payload so a forged header cannot force a huge allocation
    let mut entries = Vec::with_capacity((rows * cols).min(1 << 12));
    let mut buf = [0u8; 16];
    for _ in 0..rows * cols {
        r.read_exact(&mut buf).map_err(|_| VqedError::Decode("truncated payload".into()))?;
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        if !re.is_finite() || !im.is_finite() {
            return Err(VqedError::Decode("non-finite entry".into()));
        }
        entries.push(Complex64::new(re, im));
    }
    let m = CMatrix::from_row_slice(rows, cols, &entries);
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(m),
        Ok(_) => Err(VqedError::Decode("trailing bytes".into())),
        Err(e) => Err(e.into()),
    }
}

// ---- noise model --------------------------------------------------------

/// Noise attached to the mitigation gadgets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GadgetNoise {
    Off,
    /// `ℰ_p^{⊗n}` after the sampled stabilizer and `ℰ_p^{⊗(n+1)}` after the controlled stabilizer.
    SystemGadget { p: f64 },
    /// Depolarizing on the ancilla after every controlled single-qubit Pauli.
    AncillaOnly { p: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Local depolarizing strength applied to every qubit after each logical gate.
    pub gate_p: f64,
    pub gadget: GadgetNoise,
}

impl NoiseModel {
    pub fn new(gate_p: f64, gadget: GadgetNoise) -> Result<Self> {
        let m = Self { gate_p, gadget };
        m.validate()?;
        Ok(m)
    }

    pub fn gate_only(gate_p: f64) -> Result<Self> {
        Self::new(gate_p, GadgetNoise::Off)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability(self.gate_p)?;
        match self.gadget {
            GadgetNoise::Off => Ok(()),
            GadgetNoise::SystemGadget { p } | GadgetNoise::AncillaOnly { p } => check_probability(p),
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { gate_p: 0.01, gadget: GadgetNoise::Off }
    }
}
