//! Reference implementations built from plain matrix products and Kraus
//! sums. Nothing here calls the crate's structured kernels, so agreement
//! with them is an independent check.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use vqed::codes::StabilizerCode;
use vqed::dense::{CMatrix, Gate1};
use vqed::exact::{CircuitSpec, GadgetSchedule};
use vqed::PauliString;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn eye(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn pauli_2x2(letter: char) -> CMatrix {
    let (o, l, i) = (c(0.0), c(1.0), Complex64::new(0.0, 1.0));
    match letter {
        'I' => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
        'X' => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        'Y' => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        'Z' => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        _ => panic!("bad letter {letter}"),
    }
}

pub fn gate_matrix(u: &Gate1) -> CMatrix {
    DMatrix::from_row_slice(2, 2, &[u[0][0], u[0][1], u[1][0], u[1][1]])
}

/// Kronecker product with the first factor most significant.
pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors.iter().skip(1).fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// Dense Pauli from its letters and phase (qubit 0 leftmost).
pub fn pauli_matrix(p: &PauliString) -> CMatrix {
    let n = p.num_qubits();
    let factors: Vec<CMatrix> = (0..n).map(|q| pauli_2x2(p.letter(q))).collect();
    let phase = Complex64::new(0.0, 1.0).powu(p.phase() as u32);
    kron_all(&factors) * phase
}

/// `u` acting on qubit `q` of `n`.
pub fn embed(u: &CMatrix, q: usize, n: usize) -> CMatrix {
    let factors: Vec<CMatrix> = (0..n).map(|k| if k == q { u.clone() } else { eye(2) }).collect();
    kron_all(&factors)
}

pub fn transversal(u: &Gate1, n: usize) -> CMatrix {
    let g = gate_matrix(u);
    kron_all(&vec![g; n])
}

/// Single-qubit depolarizing on qubit `q` as a four-term Kraus sum.
pub fn depolarize_kraus(rho: &CMatrix, p: f64, q: usize, n: usize) -> CMatrix {
    let mut out = rho * c(1.0 - 3.0 * p / 4.0);
    for l in ['X', 'Y', 'Z'] {
        let k = Monomial::from_dense(&embed(&pauli_2x2(l), q, n));
        out += k.conj(rho) * c(p / 4.0);
    }
    out
}

pub fn depolarize_all_kraus(rho: &CMatrix, p: f64, n: usize) -> CMatrix {
    (0..n).fold(rho.clone(), |acc, q| depolarize_kraus(&acc, p, q, n))
}

/// Syndrome projector `∏ (I + s_i G_i) / 2` by matrix products.
pub fn syndrome_projector(code: &StabilizerCode, signs: &[i8]) -> CMatrix {
    let d = 1 << code.n();
    code.generators().iter().zip(signs).fold(eye(d), |acc, (g, &s)| {
        acc * (eye(d) + pauli_matrix(g) * c(s as f64)) * c(0.5)
    })
}

pub fn code_projector(code: &StabilizerCode) -> CMatrix {
    syndrome_projector(code, &vec![1; code.redundancy()])
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.trace().re
}

/// Random full-rank mixed state `GG† / tr`.
pub fn random_density(n: usize, r: &mut impl Rng) -> CMatrix {
    let d = 1 << n;
    let g = CMatrix::from_fn(d, d, |_, _| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

/// Code state from the projector: the normalized projection of the first
/// basis state with nonzero overlap onto the `+1` eigenspace of `Z_L`.
pub fn logical_zero_oracle(code: &StabilizerCode) -> CMatrix {
    let d = 1 << code.n();
    let zl = pauli_matrix(&code.logical_z()[0]);
    let proj = code_projector(code) * (eye(d) + zl) * c(0.5);
    for b in 0..d {
        let col = proj.column(b).into_owned();
        let norm = col.norm();
        if norm > 1e-6 {
            let v = col / c(norm);
            return &v * v.adjoint();
        }
    }
    panic!("empty code space");
}

/// Noisy circuit with exact post-selection, all by matrix products: each
/// gadget firing is replaced by a syndrome measurement that keeps the
/// trivial outcome. Returns the unnormalized state.
pub fn detected_state_oracle(spec: &CircuitSpec, schedule: &GadgetSchedule) -> CMatrix {
    let code = spec.code();
    let n = code.n();
    let p = spec.noise().gate_p;
    let proj = code_projector(code);
    let mut rho = logical_zero_oracle(code);
    let depth = spec.depth();
    for (l, &g) in spec.gates().iter().enumerate() {
        let u = transversal(&code.transversal_gates()[g].matrix, n);
        rho = &u * rho * u.adjoint();
        rho = depolarize_all_kraus(&rho, p, n);
        if schedule.fires_after(l + 1, depth) {
            rho = &proj * rho * &proj;
        }
    }
    rho
}

/// Noiseless output state `|Ψ̄⟩⟨Ψ̄|` by matrix products.
pub fn ideal_state_oracle(spec: &CircuitSpec) -> CMatrix {
    let code = spec.code();
    let mut rho = logical_zero_oracle(code);
    for &g in spec.gates() {
        let u = transversal(&code.transversal_gates()[g].matrix, code.n());
        rho = &u * rho * u.adjoint();
    }
    rho
}

pub fn expectation(rho: &CMatrix, o: &CMatrix) -> f64 {
    (rho * o).trace().re
}

/// Uhlmann fidelity between a state and `I/d`: `(tr √ρ)² / d`.
pub fn fidelity_to_mixed(rho: &CMatrix) -> f64 {
    let d = rho.nrows() as f64;
    let herm = (rho + rho.adjoint()) * c(0.5);
    let eig = herm.symmetric_eigen();
    let s: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    s * s / d
}

pub fn random_gates(code: &Arc<StabilizerCode>, depth: usize, r: &mut impl Rng) -> Vec<usize> {
    let count = code.transversal_gates().len();
    (0..depth).map(|_| r.random_range(0..count)).collect()
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// A matrix with exactly one nonzero per column: `K e_c = phase[c] e_{perm[c]}`.
/// Built from a dense Pauli matrix, it multiplies in `O(d²)`.
#[derive(Clone)]
pub struct Monomial {
    perm: Vec<usize>,
    phase: Vec<Complex64>,
}

impl Monomial {
    pub fn from_dense(m: &CMatrix) -> Self {
        let d = m.ncols();
        let mut perm = vec![0; d];
        let mut phase = vec![c(0.0); d];
        for col in 0..d {
            let nz: Vec<usize> = (0..d).filter(|&r| m[(r, col)].norm() > 1e-12).collect();
            assert_eq!(nz.len(), 1, "not monomial");
            perm[col] = nz[0];
            phase[col] = m[(nz[0], col)];
        }
        Self { perm, phase }
    }

    pub fn pauli(p: &PauliString) -> Self {
        Self::from_dense(&pauli_matrix(p))
    }

    /// `acc += w K M`
    pub fn left_add(&self, m: &CMatrix, w: Complex64, acc: &mut CMatrix) {
        let d = m.nrows();
        let (src, dst) = (m.as_slice(), acc.as_mut_slice());
        for (c, (&r, &ph)) in self.perm.iter().zip(&self.phase).enumerate() {
            let f = w * ph;
            for j in 0..d {
                dst[r + j * d] += f * src[c + j * d];
            }
        }
    }

    /// `acc += w M K`
    pub fn right_add(&self, m: &CMatrix, w: Complex64, acc: &mut CMatrix) {
        let d = m.nrows();
        let (src, dst) = (m.as_slice(), acc.as_mut_slice());
        for (c, (&from, &ph)) in self.perm.iter().zip(&self.phase).enumerate() {
            let f = w * ph;
            let in_col = &src[from * d..(from + 1) * d];
            for (o, i) in dst[c * d..(c + 1) * d].iter_mut().zip(in_col) {
                *o += f * i;
            }
        }
    }

    pub fn left(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        self.left_add(m, c(1.0), &mut out);
        out
    }

    pub fn right(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        self.right_add(m, c(1.0), &mut out);
        out
    }

    /// `K M K†`
    pub fn conj(&self, m: &CMatrix) -> CMatrix {
        let d = m.nrows();
        let mut out = CMatrix::zeros(d, d);
        let (src, dst) = (m.as_slice(), out.as_mut_slice());
        for b in 0..d {
            let (pb, phb) = (self.perm[b], self.phase[b].conj());
            for a in 0..d {
                dst[self.perm[a] + pb * d] = self.phase[a] * src[a + b * d] * phb;
            }
        }
        out
    }
}
