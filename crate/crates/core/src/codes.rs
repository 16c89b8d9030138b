//! Stabilizer codes: the built-in `[[4,1,2]]`, `[[5,1,3]]` and `[[7,1,3]]`
//! codes, user codes from JSON, group enumeration, the code-space projector,
//! logical basis states, syndromes and minimum-weight recovery tables.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{CMatrix, DensityMatrix, Gate1, StateVector, TOL_ALGEBRA};
use crate::error::{Result, VqedError};
use crate::pauli::{PauliString, MAX_DENSE_QUBITS};

/// Names of the built-in codes.
pub const BUILTIN_CODES: [&str; 3] = ["code_412", "code_513", "code_713"];

/// A single-qubit gate applied identically to every physical qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct TransversalGate {
    pub name: String,
    pub matrix: Gate1,
}

impl TransversalGate {
    /// Dense `u^{⊗n}`.
    pub fn dense(&self, n: usize) -> Result<CMatrix> {
        crate::dense::transversal_dense(&self.matrix, n)
    }
}

/// JSON description of a code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeDescription {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub generators: Vec<PauliString>,
    pub logical_x: Vec<PauliString>,
    pub logical_z: Vec<PauliString>,
    /// Gate names (`I X Y Z H S SH HS`) or `clifford` for all 24 single-qubit Cliffords.
    pub transversal: Vec<String>,
}

/// A validated `[[n, k, d]]` stabilizer code.
#[derive(Clone, Debug)]
pub struct StabilizerCode {
    name: String,
    n: usize,
    k: usize,
    d: usize,
    generators: Vec<PauliString>,
    logical_x: Vec<PauliString>,
    logical_z: Vec<PauliString>,
    transversal: Vec<TransversalGate>,
    /// Gate names as given, so `clifford` survives a round trip.
    transversal_spec: Vec<String>,
    group: StabilizerGroup,
}

/// All `2^{n-k}` elements of the stabilizer group, `elements[i]` being the
/// product of the generators selected by the bits of `i` (bit 0 = first generator).
#[derive(Clone, Debug)]
pub struct StabilizerGroup {
    elements: Vec<PauliString>,
    lookup: HashMap<(u64, u64), usize>,
}

impl StabilizerGroup {
    pub fn elements(&self) -> &[PauliString] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&PauliString> {
        self.elements.get(i)
    }

    /// Index of the element with the same letters and phase, if any.
    pub fn index_of(&self, p: &PauliString) -> Option<usize> {
        let &i = self.lookup.get(&(p.x_mask(), p.z_mask()))?;
        (self.elements[i] == *p).then_some(i)
    }
}

pub fn enumerate_group(generators: &[PauliString]) -> Result<StabilizerGroup> {
    let r = generators.len();
    if r >= 32 {
        return Err(VqedError::InvalidCode(format!("{r} generators is too many to enumerate")));
    }
    let n = generators.first().map_or(0, |g| g.num_qubits());
    let mut elements = Vec::with_capacity(1 << r);
    let mut lookup = HashMap::with_capacity(1 << r);
    for i in 0..1usize << r {
        let mut e = PauliString::identity(n);
        for (j, g) in generators.iter().enumerate() {
            if i >> j & 1 == 1 {
                e = e.multiply(g)?;
            }
        }
        if lookup.insert((e.x_mask(), e.z_mask()), i).is_some() {
            return Err(VqedError::DependentGenerators);
        }
        elements.push(e);
    }
    Ok(StabilizerGroup { elements, lookup })
}

impl StabilizerCode {
    pub fn from_description(desc: &CodeDescription) -> Result<Self> {
        let invalid = |msg: String| Err(VqedError::InvalidCode(msg));
        let CodeDescription { name, n, k, d, .. } = desc.clone();
        if n == 0 || n > MAX_DENSE_QUBITS {
            return Err(VqedError::SizeLimit { qubits: n, max: MAX_DENSE_QUBITS });
        }
        if k == 0 || k >= n {
            return invalid(format!("need 0 < k < n, got n={n} k={k}"));
        }
        if desc.generators.len() != n - k {
            return invalid(format!("expected {} generators, found {}", n - k, desc.generators.len()));
        }
        if desc.logical_x.len() != k || desc.logical_z.len() != k {
            return invalid(format!("expected {k} logical X and Z operators"));
        }
        let all = desc.generators.iter().chain(&desc.logical_x).chain(&desc.logical_z);
        for p in all {
            if p.num_qubits() != n {
                return Err(VqedError::DimensionMismatch { expected: n, found: p.num_qubits() });
            }
            if !p.is_hermitian() {
                return invalid(format!("{p} is not Hermitian"));
            }
        }
        for (i, a) in desc.generators.iter().enumerate() {
            if a.is_scalar() {
                return invalid(format!("generator {a} is a scalar"));
            }
            for b in &desc.generators[i + 1..] {
                if !a.commutes_unchecked(b) {
                    return invalid(format!("generators {a} and {b} anticommute"));
                }
            }
        }
        let group = enumerate_group(&desc.generators)?;
        for (i, (lx, lz)) in desc.logical_x.iter().zip(&desc.logical_z).enumerate() {
            for g in &desc.generators {
                if !lx.commutes_unchecked(g) || !lz.commutes_unchecked(g) {
                    return invalid(format!("logical operator pair {i} does not commute with {g}"));
                }
            }
            for (j, (mx, mz)) in desc.logical_x.iter().zip(&desc.logical_z).enumerate() {
                if lx.commutes_unchecked(mz) != (i != j) || (i != j && !lx.commutes_unchecked(mx)) {
                    return invalid(format!("logical operators {i} and {j} have wrong commutation"));
                }
            }
        }
        let mut transversal = Vec::new();
        for t in &desc.transversal {
            transversal.extend(gate_set_by_name(t)?);
        }
        let code = Self {
            name,
            n,
            k,
            d,
            generators: desc.generators.clone(),
            logical_x: desc.logical_x.clone(),
            logical_z: desc.logical_z.clone(),
            transversal,
            transversal_spec: desc.transversal.clone(),
            group,
        };
        let proj = code.projector_product()?;
        for gate in &code.transversal {
            let mut conj = DensityMatrix::from_parts_unchecked(n, proj.clone(), false);
            conj.apply_transversal(&gate.matrix);
            let dev = (conj.matrix() - &proj).camax();
            if dev > TOL_ALGEBRA {
                return invalid(format!("transversal gate {} leaves the code space ({dev:e})", gate.name));
            }
        }
        Ok(code)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let desc: CodeDescription = serde_json::from_str(text)?;
        Self::from_description(&desc)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn description(&self) -> CodeDescription {
        CodeDescription {
            name: self.name.clone(),
            n: self.n,
            k: self.k,
            d: self.d,
            generators: self.generators.clone(),
            logical_x: self.logical_x.clone(),
            logical_z: self.logical_z.clone(),
            transversal: self.transversal_spec.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `n - k`.
    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn logical_x(&self) -> &[PauliString] {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &[PauliString] {
        &self.logical_z
    }

    pub fn group(&self) -> &StabilizerGroup {
        &self.group
    }

    pub fn transversal_gates(&self) -> &[TransversalGate] {
        &self.transversal
    }

    /// `2^{-(n-k)} Σ_i S_i`, built from the enumerated group.
    pub fn projector(&self) -> Result<CMatrix> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(VqedError::SizeLimit { qubits: self.n, max: MAX_DENSE_QUBITS });
        }
        let dim = 1usize << self.n;
        let weight = 1.0 / self.group.len() as f64;
        let mut p = CMatrix::zeros(dim, dim);
        for s in self.group.elements() {
            for col in 0..dim {
                let (row, amp) = s.apply_to_basis(col);
                p[(row, col)] += amp * weight;
            }
        }
        Ok(p)
    }

    /// `∏_i (I + G_i)/2`, built by successive half-sums.
    pub fn projector_product(&self) -> Result<CMatrix> {
        let dim = 1usize << self.n;
        let mut m = DensityMatrix::from_parts_unchecked(self.n, CMatrix::identity(dim, dim), false);
        m.left_project(&self.generators, 0)?;
        Ok(m.into_matrix())
    }

    /// `|0⟩_L` for a single logical qubit: the first computational basis
    /// state with a non-negligible projection under `P (I + Z_L)/2`, normalized.
    pub fn logical_zero(&self) -> Result<StateVector> {
        if self.k != 1 {
            return Err(VqedError::InvalidArgument(format!("logical_zero needs k = 1, code has k = {}", self.k)));
        }
        let dim = 1usize << self.n;
        let mut projectors = self.generators.clone();
        projectors.push(self.logical_z[0]);
        for b in 0..dim {
            let mut v = StateVector::zeros(dim);
            v[b] = Complex64::new(1.0, 0.0);
            for g in &projectors {
                v = half_sum_vector(&v, g);
            }
            let norm = v.norm();
            if norm > 1e-8 {
                return Ok(v / Complex64::new(norm, 0.0));
            }
        }
        Err(VqedError::InvalidCode("no basis state projects onto |0>_L".into()))
    }

    pub fn logical_zero_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_pure(&self.logical_zero()?)
    }

    pub fn syndrome(&self, e: &PauliString) -> Result<Syndrome> {
        if e.num_qubits() != self.n {
            return Err(VqedError::DimensionMismatch { expected: self.n, found: e.num_qubits() });
        }
        let bits = self
            .generators
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.commutes_unchecked(e))
            .fold(0u64, |acc, (i, _)| acc | 1 << i);
        Ok(Syndrome::new(bits, self.redundancy()))
    }

    /// Minimum-weight recovery for every syndrome; ties go to the earlier
    /// string in (qubit positions, then letters X < Y < Z) order.
    pub fn build_recovery_table(&self) -> Result<RecoveryTable> {
        let r = self.redundancy();
        let mut table: Vec<Option<PauliString>> = vec![None; 1 << r];
        let mut remaining = table.len();
        'weights: for w in 0..=self.n {
            for positions in combinations(self.n, w) {
                for letters in 0..3usize.pow(w as u32) {
                    let mut e = PauliString::identity(self.n);
                    for (j, &q) in positions.iter().enumerate() {
                        let digit = letters / 3usize.pow((w - 1 - j) as u32) % 3;
                        let single = PauliString::single(self.n, q, ['X', 'Y', 'Z'][digit])?;
                        e = e.mul_unchecked(&single);
                    }
                    let e = e.unsigned();
                    let s = self.syndrome(&e)?;
                    let slot = &mut table[s.bits() as usize];
                    if slot.is_none() {
                        *slot = Some(e);
                        remaining -= 1;
                        if remaining == 0 {
                            break 'weights;
                        }
                    }
                }
            }
        }
        let recoveries = table
            .into_iter()
            .enumerate()
            .map(|(bits, e)| {
                e.ok_or_else(|| VqedError::UnreachableSyndrome(Syndrome::new(bits as u64, r).to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RecoveryTable { redundancy: r, recoveries })
    }
}

fn half_sum_vector(v: &StateVector, g: &PauliString) -> StateVector {
    let mut out = v * Complex64::new(0.5, 0.0);
    for col in 0..v.len() {
        let (row, amp) = g.apply_to_basis(col);
        out[row] += amp * v[col] * 0.5;
    }
    out
}

fn combinations(n: usize, w: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, w: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == w {
            out.push(cur.clone());
            return;
        }
        for q in start..n {
            cur.push(q);
            rec(q + 1, n, w, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, w, &mut Vec::with_capacity(w), &mut out);
    out
}

/// Syndrome `s ∈ {±1}^{n-k}` stored as a bitmask: bit `i` set means `s_i = -1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syndrome {
    bits: u64,
    len: usize,
}

impl Syndrome {
    pub fn new(bits: u64, len: usize) -> Self {
        Self { bits, len }
    }

    pub fn trivial(len: usize) -> Self {
        Self { bits: 0, len }
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let mut bits = 0;
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => {}
                -1 => bits |= 1 << i,
                other => return Err(VqedError::InvalidArgument(format!("syndrome entry {other} is not ±1"))),
            }
        }
        Ok(Self { bits, len: signs.len() })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn signs(&self) -> Vec<i8> {
        (0..self.len).map(|i| if self.bits >> i & 1 == 1 { -1 } else { 1 }).collect()
    }

    /// Every syndrome of length `len`.
    pub fn all(len: usize) -> impl Iterator<Item = Syndrome> {
        (0..1u64 << len).map(move |bits| Syndrome { bits, len })
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.signs().iter().map(|&s| if s > 0 { "+1" } else { "-1" }).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Recovery Pauli `R_s` for each syndrome.
#[derive(Clone, Debug)]
pub struct RecoveryTable {
    redundancy: usize,
    recoveries: Vec<PauliString>,
}

impl RecoveryTable {
    pub fn get(&self, s: Syndrome) -> &PauliString {
        &self.recoveries[s.bits() as usize]
    }

    pub fn len(&self) -> usize {
        self.recoveries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recoveries.is_empty()
    }

    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    pub fn iter(&self) -> impl Iterator<Item = (Syndrome, &PauliString)> {
        let r = self.redundancy;
        self.recoveries.iter().enumerate().map(move |(b, p)| (Syndrome::new(b as u64, r), p))
    }
}

// ---- built-in codes ------------------------------------------------------

fn strings(list: &[&str]) -> Vec<PauliString> {
    list.iter().map(|s| s.parse().expect("built-in Pauli string")).collect()
}

pub fn builtin_description(name: &str) -> Result<CodeDescription> {
    let desc = match name {
        "code_412" => CodeDescription {
            name: name.into(),
            n: 4,
            k: 1,
            d: 2,
            generators: strings(&["XXXX", "ZZZZ", "IZZI"]),
            logical_x: strings(&["IXXI"]),
            logical_z: strings(&["ZZII"]),
            transversal: vec!["X".into(), "Y".into(), "Z".into()],
        },
        "code_513" => CodeDescription {
            name: name.into(),
            n: 5,
            k: 1,
            d: 3,
            generators: strings(&["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"]),
            logical_x: strings(&["XXXXX"]),
            logical_z: strings(&["ZZZZZ"]),
            transversal: vec!["X".into(), "Y".into(), "Z".into(), "SH".into()],
        },
        "code_713" => CodeDescription {
            name: name.into(),
            n: 7,
            k: 1,
            d: 3,
            generators: strings(&["IIIZZZZ", "IZZIIZZ", "ZIZIZIZ", "IIIXXXX", "IXXIIXX", "XIXIXIX"]),
            logical_x: strings(&["XXXXXXX"]),
            logical_z: strings(&["ZZZZZZZ"]),
            transversal: vec!["clifford".into()],
        },
        other => return Err(VqedError::UnknownCode(other.to_string())),
    };
    Ok(desc)
}

/// Builds one of [`BUILTIN_CODES`].
pub fn build_code(name: &str) -> Result<StabilizerCode> {
    StabilizerCode::from_description(&builtin_description(name)?)
}

// ---- single-qubit gates --------------------------------------------------

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn matmul(a: &Gate1, b: &Gate1) -> Gate1 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Named single-qubit gate. `SH` is the matrix product `S·H` (H applied first).
pub fn named_gate(name: &str) -> Result<Gate1> {
    let h = 1.0 / 2f64.sqrt();
    let hadamard = [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]];
    let phase_s = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]];
    let g = match name {
        "I" => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        "X" => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        "Y" => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        "Z" => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        "H" => hadamard,
        "S" => phase_s,
        "SH" => matmul(&phase_s, &hadamard),
        "HS" => matmul(&hadamard, &phase_s),
        other => return Err(VqedError::InvalidCode(format!("unknown transversal gate `{other}`"))),
    };
    Ok(g)
}

fn gate_set_by_name(name: &str) -> Result<Vec<TransversalGate>> {
    if name == "clifford" {
        return Ok(single_qubit_cliffords());
    }
    Ok(vec![TransversalGate { name: name.to_string(), matrix: named_gate(name)? }])
}

/// Removes the global phase so that the first non-negligible entry is real positive.
fn canonical(g: &Gate1) -> Gate1 {
    let pivot = g.iter().flatten().find(|z| z.norm() > 1e-9).copied().unwrap_or(c(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    g.map(|row| row.map(|z| z * phase))
}

fn same_gate(a: &Gate1, b: &Gate1) -> bool {
    a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() < 1e-9)
}

/// The 24 single-qubit Clifford gates modulo phase, in breadth-first order
/// over words in `H` and `S`. Names read as matrix products.
pub fn single_qubit_cliffords() -> Vec<TransversalGate> {
    let gens = [("H", named_gate("H").unwrap()), ("S", named_gate("S").unwrap())];
    let mut found = vec![TransversalGate { name: "I".into(), matrix: named_gate("I").unwrap() }];
    let mut frontier = 0;
    while frontier < found.len() {
        let base = found[frontier].clone();
        for (gname, g) in &gens {
            let m = canonical(&matmul(g, &base.matrix));
            if !found.iter().any(|f| same_gate(&f.matrix, &m)) {
                let name = if base.name == "I" { gname.to_string() } else { format!("{gname}{}", base.name) };
                found.push(TransversalGate { name, matrix: m });
            }
        }
        frontier += 1;
    }
    found
}

impl fmt::Display for StabilizerCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [[{},{},{}]]", self.name, self.n, self.k, self.d)
    }
}
