//! Exact protocols on dense density matrices.
//!
//! A detection gadget averaged over its sampled stabilizer indices acts on
//! the system as `ρ → PρP`, so exact VQED never builds the ancilla register:
//! each scheduled gadget is replaced by that map (or its noisy counterpart),
//! and the mitigated value is `tr[ρ' O] / tr[ρ']` for the sub-normalized
//! post-selected state `ρ'`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codes::{RecoveryTable, StabilizerCode, Syndrome};
use crate::dense::{self, DensityMatrix, GadgetNoise, NoiseModel, StateVector, TOL_ALGEBRA, TOL_BRANCH};
use crate::error::{Result, VqedError};
use crate::pauli::PauliString;

/// Which gadget circuit realizes the virtual projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetVariant {
    /// Anti-controlled `S_i` and controlled `S_j` on one ancilla.
    TwoControls,
    /// Plain `S_i` followed by a controlled `S_j`.
    #[default]
    SingleControl,
}

/// Where gadgets fire along the circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScheduleMode {
    None,
    LastGate,
    /// After every `m`-th gate and after the final gate.
    EveryM(usize),
    EveryGate,
}

impl ScheduleMode {
    pub fn every(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(VqedError::InvalidArgument("gadget period must be at least 1".into()));
        }
        Ok(if m == 1 { Self::EveryGate } else { Self::EveryM(m) })
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::LastGate => f.write_str("last_gate"),
            Self::EveryM(m) => write!(f, "every_{m}"),
            Self::EveryGate => f.write_str("every_gate"),
        }
    }
}

impl FromStr for ScheduleMode {
    type Err = VqedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "last_gate" => Ok(Self::LastGate),
            "every_gate" => Ok(Self::EveryGate),
            other => {
                let m = other
                    .strip_prefix("every_")
                    .and_then(|m| m.parse::<usize>().ok())
                    .ok_or_else(|| VqedError::Config(format!("unknown schedule `{other}`")))?;
                Self::every(m).map_err(|e| VqedError::Config(e.to_string()))
            }
        }
    }
}

impl Serialize for ScheduleMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScheduleMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GadgetSchedule {
    pub mode: ScheduleMode,
    pub variant: GadgetVariant,
}

impl GadgetSchedule {
    pub fn new(mode: ScheduleMode) -> Self {
        Self { mode, variant: GadgetVariant::default() }
    }

    pub fn with_variant(mut self, variant: GadgetVariant) -> Self {
        self.variant = variant;
        self
    }

    /// Fires after gate `layer` (1-based) regardless of circuit length.
    pub fn fires_mid(&self, layer: usize) -> bool {
        match self.mode {
            ScheduleMode::EveryGate => true,
            ScheduleMode::EveryM(m) => layer.is_multiple_of(m),
            ScheduleMode::None | ScheduleMode::LastGate => false,
        }
    }

    /// Fires after gate `layer` of a circuit with `depth` gates.
    pub fn fires_after(&self, layer: usize, depth: usize) -> bool {
        self.fires_mid(layer) || (layer == depth && self.mode != ScheduleMode::None)
    }

    /// Number of gadgets in a circuit of `depth` gates.
    pub fn gadget_count(&self, depth: usize) -> usize {
        (1..=depth).filter(|&l| self.fires_after(l, depth)).count()
    }
}

/// A noisy logical circuit: `|0⟩_L`, then `depth` transversal gates each followed by gate noise.
#[derive(Clone, Debug)]
pub struct CircuitSpec {
    code: Arc<StabilizerCode>,
    /// Indices into the code's transversal gate set.
    gates: Vec<usize>,
    noise: NoiseModel,
    observable: PauliString,
}

impl CircuitSpec {
    pub fn new(code: Arc<StabilizerCode>, gates: Vec<usize>, noise: NoiseModel, observable: PauliString) -> Result<Self> {
        noise.validate()?;
        let available = code.transversal_gates().len();
        if let Some(&bad) = gates.iter().find(|&&g| g >= available) {
            return Err(VqedError::InvalidArgument(format!("gate index {bad} out of range ({available} gates)")));
        }
        if observable.num_qubits() != code.n() {
            return Err(VqedError::DimensionMismatch { expected: code.n(), found: observable.num_qubits() });
        }
        if !observable.is_hermitian() {
            return Err(VqedError::NonHermitian(1.0));
        }
        if let Some(g) = code.generators().iter().find(|g| !g.commutes_unchecked(&observable)) {
            return Err(VqedError::InvalidArgument(format!(
                "observable {observable} does not commute with the code-space projector (generator {g})"
            )));
        }
        Ok(Self { code, gates, noise, observable })
    }

    /// Observable `Z_L` on the first logical qubit.
    pub fn with_logical_z(code: Arc<StabilizerCode>, gates: Vec<usize>, noise: NoiseModel) -> Result<Self> {
        let z = code.logical_z()[0];
        Self::new(code, gates, noise, z)
    }

    pub fn code(&self) -> &StabilizerCode {
        &self.code
    }

    pub fn code_arc(&self) -> &Arc<StabilizerCode> {
        &self.code
    }

    pub fn gates(&self) -> &[usize] {
        &self.gates
    }

    pub fn depth(&self) -> usize {
        self.gates.len()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn observable(&self) -> &PauliString {
        &self.observable
    }

    /// Same circuit truncated to its first `depth` gates.
    pub fn prefix(&self, depth: usize) -> Self {
        Self { gates: self.gates[..depth.min(self.gates.len())].to_vec(), ..self.clone() }
    }

    pub fn with_noise(&self, noise: NoiseModel) -> Self {
        Self { noise, ..self.clone() }
    }

    pub(crate) fn apply_layer(&self, rho: &mut DensityMatrix, layer: usize) -> Result<()> {
        let gate = &self.code.transversal_gates()[self.gates[layer]];
        rho.apply_transversal(&gate.matrix);
        rho.depolarize_all(self.noise.gate_p)
    }

    /// Noiseless output `|Ψ̄⟩`.
    pub fn noiseless_state(&self) -> Result<StateVector> {
        let mut psi = self.code.logical_zero()?;
        for &g in &self.gates {
            dense::apply_transversal_vector(&mut psi, &self.code.transversal_gates()[g].matrix, self.code.n());
        }
        Ok(psi)
    }
}

/// Numerator `tr[ρ' O]`, denominator `tr[ρ']` and their ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigatedValue {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

impl MitigatedValue {
    fn from_state(rho: &DensityMatrix, observable: &PauliString) -> Result<Self> {
        let denominator = rho.trace();
        if denominator < TOL_BRANCH {
            return Err(VqedError::Annihilated(denominator));
        }
        let numerator = rho.pauli_expectation(observable)?;
        Ok(Self { numerator, denominator, ratio: numerator / denominator })
    }
}

// ---- gadget maps ----------------------------------------------------------

/// Averaged action of one gadget on the system, including any gadget noise.
pub fn apply_gadget(
    rho: &mut DensityMatrix,
    code: &StabilizerCode,
    variant: GadgetVariant,
    noise: GadgetNoise,
) -> Result<()> {
    let gens = code.generators();
    match noise {
        GadgetNoise::Off => rho.project(gens, 0),
        GadgetNoise::AncillaOnly { p } => {
            dense::check_probability(p)?;
            rho.project(gens, 0)?;
            rho.scale((1.0 - p).powi(ancilla_steps(code, variant) as i32));
            Ok(())
        }
        GadgetNoise::SystemGadget { p } => match variant {
            // (1-p) ℰ(P ℰ(ρ) P): ℰ is Pauli-covariant, so the S_i twirl folds into the projector.
            GadgetVariant::SingleControl => {
                rho.depolarize_all(p)?;
                rho.project(gens, 0)?;
                rho.depolarize_all(p)?;
                rho.scale(1.0 - p);
                Ok(())
            }
            // (1-p)^2/2 [ℰ(P ℰ(ρP)) + ℰ(ℰ(Pρ) P)]
            GadgetVariant::TwoControls => {
                let mut upper = rho.clone();
                upper.right_project(gens, 0)?;
                upper.depolarize_all(p)?;
                upper.left_project(gens, 0)?;
                upper.depolarize_all(p)?;
                rho.left_project(gens, 0)?;
                rho.depolarize_all(p)?;
                rho.right_project(gens, 0)?;
                rho.depolarize_all(p)?;
                let sum = (rho.matrix() + upper.matrix()) * num_complex::Complex64::new(0.5 * (1.0 - p).powi(2), 0.0);
                *rho = DensityMatrix::from_parts_unchecked(rho.num_qubits(), sum, false);
                Ok(())
            }
        },
    }
}

/// Depolarizing steps seen by the ancilla in one gadget under ancilla-only
/// noise: every controlled stabilizer is padded to `n` controlled Paulis.
pub fn ancilla_steps(code: &StabilizerCode, variant: GadgetVariant) -> usize {
    match variant {
        GadgetVariant::SingleControl => code.n(),
        GadgetVariant::TwoControls => 2 * code.n(),
    }
}

/// Uniform average over all `(i, j)` of the noiseless gadget map.
///
/// Variant (a) averages `½(S_i ρ S_j + S_j ρ S_i)`; variant (b) averages
/// `½(S_j S_i ρ S_i + S_i ρ S_i S_j)`. Both equal `PρP`.
pub fn gadget_channel_average(variant: GadgetVariant, rho: &DensityMatrix, code: &StabilizerCode) -> Result<DensityMatrix> {
    let gens = code.generators();
    let half = num_complex::Complex64::new(0.5, 0.0);
    let (left, right) = match variant {
        GadgetVariant::TwoControls => {
            let mut left = rho.clone();
            left.right_project(gens, 0)?;
            left.left_project(gens, 0)?;
            let mut right = rho.clone();
            right.left_project(gens, 0)?;
            right.right_project(gens, 0)?;
            (left, right)
        }
        GadgetVariant::SingleControl => {
            let twirled = twirl(rho, code)?;
            let mut left = twirled.clone();
            left.left_project(gens, 0)?;
            let mut right = twirled;
            right.right_project(gens, 0)?;
            (left, right)
        }
    };
    let sum = (left.matrix() + right.matrix()) * half;
    Ok(DensityMatrix::from_parts_unchecked(rho.num_qubits(), sum, false))
}

/// `2^{-(n-k)} Σ_i S_i ρ S_i`.
pub fn twirl(rho: &DensityMatrix, code: &StabilizerCode) -> Result<DensityMatrix> {
    let group = code.group().elements();
    let mut acc = crate::dense::CMatrix::zeros(rho.dim(), rho.dim());
    for s in group {
        let mut term = rho.clone();
        term.conjugate_pauli(s)?;
        acc += term.matrix();
    }
    acc.scale_mut(1.0 / group.len() as f64);
    Ok(DensityMatrix::from_parts_unchecked(rho.num_qubits(), acc, rho.is_normalized()))
}

// ---- evolution ------------------------------------------------------------

/// Runs the circuit, firing gadgets per `schedule` with the given gadget noise.
pub fn evolve_with_gadgets(spec: &CircuitSpec, schedule: &GadgetSchedule, gadget_noise: GadgetNoise) -> Result<DensityMatrix> {
    let mut rho = spec.code.logical_zero_density()?;
    let depth = spec.depth();
    for layer in 0..depth {
        spec.apply_layer(&mut rho, layer)?;
        if schedule.fires_after(layer + 1, depth) {
            apply_gadget(&mut rho, &spec.code, schedule.variant, gadget_noise)?;
        }
    }
    Ok(rho)
}

/// `ℰ_L∘𝒰_L∘…∘ℰ_1∘𝒰_1(|0⟩⟨0|_L)`.
pub fn evolve_unprotected(spec: &CircuitSpec) -> Result<DensityMatrix> {
    evolve_with_gadgets(spec, &GadgetSchedule::new(ScheduleMode::None), GadgetNoise::Off)
}

/// Post-selected, sub-normalized `ρ'_det` and its trace.
pub fn evolve_qed(spec: &CircuitSpec, schedule: &GadgetSchedule) -> Result<(DensityMatrix, f64)> {
    let rho = evolve_with_gadgets(spec, schedule, GadgetNoise::Off)?;
    let t = rho.trace();
    if t < TOL_BRANCH {
        return Err(VqedError::Annihilated(t));
    }
    Ok((rho, t))
}

/// Exact VQED with noiseless gadgets: `tr[ρ'_det O] / tr[ρ'_det]`.
pub fn vqed_exact(spec: &CircuitSpec, schedule: &GadgetSchedule) -> Result<MitigatedValue> {
    let (rho, _) = evolve_qed(spec, schedule)?;
    MitigatedValue::from_state(&rho, &spec.observable)
}

/// Exact VQED with the gate noise and gadget noise of `noise`.
pub fn vqed_exact_noisy_gadget(spec: &CircuitSpec, schedule: &GadgetSchedule, noise: &NoiseModel) -> Result<MitigatedValue> {
    noise.validate()?;
    let spec = spec.with_noise(*noise);
    let rho = evolve_with_gadgets(&spec, schedule, noise.gadget)?;
    MitigatedValue::from_state(&rho, &spec.observable)
}

/// Symmetry-expansion value `Σ_i tr[ρ O S_i] / Σ_i tr[ρ S_i]` on a given state.
pub fn symmetry_expansion_exact(rho: &DensityMatrix, code: &StabilizerCode, observable: &PauliString) -> Result<MitigatedValue> {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let weight = 1.0 / code.group().len() as f64;
    for s in code.group().elements() {
        numerator += rho.pauli_expectation(&observable.multiply(s)?)? * weight;
        denominator += rho.pauli_expectation(s)? * weight;
    }
    if denominator < TOL_BRANCH {
        return Err(VqedError::Annihilated(denominator));
    }
    Ok(MitigatedValue { numerator, denominator, ratio: numerator / denominator })
}

/// States at each requested depth of one circuit, evolved once.
///
/// Equivalent to running [`evolve_with_gadgets`] on each prefix; `depths`
/// must be ascending and no deeper than the circuit.
pub fn evolve_snapshots(
    spec: &CircuitSpec,
    schedule: &GadgetSchedule,
    gadget_noise: GadgetNoise,
    depths: &[usize],
) -> Result<Vec<DensityMatrix>> {
    if depths.windows(2).any(|w| w[0] > w[1]) {
        return Err(VqedError::InvalidArgument("depths must be ascending".into()));
    }
    if depths.last().is_some_and(|&d| d > spec.depth()) {
        return Err(VqedError::InvalidArgument("depth exceeds circuit length".into()));
    }
    let mut rho = spec.code.logical_zero_density()?;
    let mut out = Vec::with_capacity(depths.len());
    let mut layer = 0;
    for &target in depths {
        while layer < target {
            spec.apply_layer(&mut rho, layer)?;
            layer += 1;
            if schedule.fires_mid(layer) {
                apply_gadget(&mut rho, &spec.code, schedule.variant, gadget_noise)?;
            }
        }
        let mut snap = rho.clone();
        if target > 0 && schedule.fires_after(target, target) && !schedule.fires_mid(target) {
            apply_gadget(&mut snap, &spec.code, schedule.variant, gadget_noise)?;
        }
        out.push(snap);
    }
    Ok(out)
}

/// `1 - ⟨Ψ̄|ρ_det|Ψ̄⟩` for a possibly sub-normalized `ρ'`.
pub fn infidelity(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    let normalized = rho.normalize()?;
    Ok(1.0 - dense::fidelity_pure(&normalized, psi)?)
}

// ---- virtual QEC ----------------------------------------------------------

/// Which syndromes enter the virtual recovery sum.
#[derive(Clone, Debug, PartialEq)]
pub enum SyndromeSubset {
    Full,
    Subset(Vec<Syndrome>),
}

#[derive(Clone, Debug)]
pub struct VirtualQecConfig {
    pub subset: SyndromeSubset,
    pub recovery: RecoveryTable,
}

impl VirtualQecConfig {
    pub fn full(code: &StabilizerCode) -> Result<Self> {
        Ok(Self { subset: SyndromeSubset::Full, recovery: code.build_recovery_table()? })
    }

    pub fn subset(code: &StabilizerCode, syndromes: Vec<Syndrome>) -> Result<Self> {
        let r = code.redundancy();
        if syndromes.is_empty() {
            return Err(VqedError::InvalidArgument("syndrome subset B is empty".into()));
        }
        if let Some(s) = syndromes.iter().find(|s| s.len() != r) {
            return Err(VqedError::DimensionMismatch { expected: r, found: s.len() });
        }
        let mut syndromes = syndromes;
        syndromes.sort();
        syndromes.dedup();
        Ok(Self { subset: SyndromeSubset::Subset(syndromes), recovery: code.build_recovery_table()? })
    }

    /// Syndromes produced by Pauli errors of weight at most `w`.
    pub fn low_weight(code: &StabilizerCode, w: usize) -> Result<Self> {
        let mut found = vec![Syndrome::trivial(code.redundancy())];
        let n = code.n();
        let mut frontier = vec![PauliString::identity(n)];
        for _ in 0..w {
            let mut next = Vec::new();
            for e in &frontier {
                for q in 0..n {
                    if e.letter(q) != 'I' {
                        continue;
                    }
                    for l in ['X', 'Y', 'Z'] {
                        let grown = e.mul_unchecked(&PauliString::single(n, q, l)?).unsigned();
                        found.push(code.syndrome(&grown)?);
                        next.push(grown);
                    }
                }
            }
            frontier = next;
        }
        Self::subset(code, found)
    }

    pub fn syndromes(&self) -> Vec<Syndrome> {
        match &self.subset {
            SyndromeSubset::Full => Syndrome::all(self.recovery.redundancy()).collect(),
            SyndromeSubset::Subset(b) => b.clone(),
        }
    }
}

/// Where the virtual recovery is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QecPoint {
    #[default]
    EndOfCircuit,
    EveryLayer,
}

/// Result of the virtual recovery map on one state.
#[derive(Clone, Debug)]
pub struct CorrectedState {
    /// `ρ_cor` (full) or `ρ_cor'` (subset, renormalized).
    pub state: DensityMatrix,
    /// `Σ_{s∈B} p_s` with `p_s = tr[P R_s ρ R_s]`.
    pub success_weight: f64,
    /// `|B|`.
    pub subset_size: usize,
}

/// `Σ_s P R_s ρ R_s P`, renormalized over `B` in subset mode.
pub fn virtual_qec_state(rho: &DensityMatrix, code: &StabilizerCode, cfg: &VirtualQecConfig) -> Result<CorrectedState> {
    let syndromes = cfg.syndromes();
    let mut acc = crate::dense::CMatrix::zeros(rho.dim(), rho.dim());
    let mut weight = 0.0;
    for s in &syndromes {
        let mut term = rho.clone();
        term.conjugate_pauli(cfg.recovery.get(*s))?;
        term.project(code.generators(), 0)?;
        weight += term.trace();
        acc += term.matrix();
    }
    let mut state = DensityMatrix::from_parts_unchecked(rho.num_qubits(), acc, false);
    if matches!(cfg.subset, SyndromeSubset::Subset(_)) {
        if weight < TOL_BRANCH {
            return Err(VqedError::Annihilated(weight));
        }
        state.scale(1.0 / weight);
    }
    Ok(CorrectedState { state, success_weight: weight, subset_size: syndromes.len() })
}

/// Runs the circuit and applies virtual QEC at `point`.
pub fn virtual_qec_exact(spec: &CircuitSpec, cfg: &VirtualQecConfig, point: QecPoint) -> Result<CorrectedState> {
    let mut rho = spec.code.logical_zero_density()?;
    let depth = spec.depth();
    let mut last = None;
    for layer in 0..depth {
        spec.apply_layer(&mut rho, layer)?;
        if point == QecPoint::EveryLayer {
            let corrected = virtual_qec_state(&rho, &spec.code, cfg)?;
            rho = corrected.state.clone();
            last = Some(corrected);
        }
    }
    match (point, last) {
        (QecPoint::EveryLayer, Some(c)) => Ok(c),
        _ => virtual_qec_state(&rho, &spec.code, cfg),
    }
}

// ---- sampling cost --------------------------------------------------------

fn positive(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(VqedError::InvalidArgument(format!("{what} must be positive, got {x}")))
    }
}

/// `tr[ρ'_det]^{-2}`.
pub fn vqed_sampling_cost(denominator: f64) -> Result<f64> {
    Ok(positive(denominator, "denominator")?.powi(-2))
}

/// `2^{2(n-k)} · trace^{-2}` for the full virtual-QEC sum.
pub fn virtual_qec_full_cost(code: &StabilizerCode, trace: f64) -> Result<f64> {
    Ok(4f64.powi(code.redundancy() as i32) * positive(trace, "trace")?.powi(-2))
}

/// `|B|^2 (Σ_{s∈B} p_s)^{-2}`.
pub fn virtual_qec_subset_cost(subset_size: usize, success_weight: f64) -> Result<f64> {
    Ok((subset_size as f64).powi(2) * positive(success_weight, "success weight")?.powi(-2))
}

/// Checks `[O, P] = 0` on dense matrices.
pub fn observable_commutes_with_projector(code: &StabilizerCode, observable: &PauliString) -> Result<bool> {
    let p = code.projector()?;
    let o = observable.to_dense()?;
    Ok((&o * &p - &p * &o).camax() < TOL_ALGEBRA)
}
