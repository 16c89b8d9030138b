//! Shot-level Monte Carlo estimators.
//!
//! Every estimator here draws `N` independent shots, each producing a pair
//! `(a_s, b_s)`, and reports `b̄ / ā`. Shot `k` uses its own ChaCha stream
//! derived from `(seed, k)`, and results are reduced in shot order, so the
//! output does not depend on the number of worker threads.
//!
//! Gadget ancillas are never given their own qubits. Each ancilla interacts
//! with the system once and is measured right away, so the joint state is
//! kept as four system-sized blocks `A_ab = ⟨a|ρ_joint|b⟩`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::StabilizerCode;
use crate::dense::{DensityMatrix, GadgetNoise, NoiseModel, TOL_BRANCH};
use crate::error::{Result, VqedError};
use crate::exact::{observable_commutes_with_projector, CircuitSpec, GadgetSchedule, GadgetVariant, VirtualQecConfig};
use crate::pauli::PauliString;
use crate::rng;

/// Outcome of one shot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    /// Product of ancilla outcomes (times the shot weight, if any).
    pub a: f64,
    /// `a` times the observable outcome.
    pub b: f64,
    /// The `(i, j)` stabilizer indices drawn for each gadget, in order.
    pub sampled_indices: Vec<(usize, usize)>,
}

/// Aggregated shot statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub a_mean: f64,
    pub b_mean: f64,
    /// `b_mean / a_mean`, withheld when the denominator is not resolved.
    pub ratio: Option<f64>,
    pub shots: usize,
    pub seed: u64,
    /// Sample variances and covariance of the per-shot `(a, b)` values.
    pub a_var: f64,
    pub b_var: f64,
    pub ab_cov: f64,
    /// Delta-method variance of the ratio estimator.
    pub ratio_variance: Option<f64>,
    /// Threshold below which `|a_mean|` is flagged as indistinguishable from 0.
    pub denominator_threshold: f64,
}

impl EstimatorResult {
    /// Reduces per-shot `(a, b)` pairs in order. `scale` is the largest
    /// possible `|a_s|` and sets the denominator threshold `3·scale/√N`.
    pub fn from_pairs(pairs: &[(f64, f64)], scale: f64, seed: u64) -> Result<Self> {
        let n = pairs.len();
        if n == 0 {
            return Err(VqedError::InvalidArgument("at least one shot is required".into()));
        }
        let nf = n as f64;
        let (sa, sb) = pairs.iter().fold((0.0, 0.0), |(x, y), &(a, b)| (x + a, y + b));
        let a_mean = sa / nf;
        let b_mean = sb / nf;
        let (mut va, mut vb, mut cab) = (0.0, 0.0, 0.0);
        for &(a, b) in pairs {
            let (da, db) = (a - a_mean, b - b_mean);
            va += da * da;
            vb += db * db;
            cab += da * db;
        }
        let denom = if n > 1 { nf - 1.0 } else { 1.0 };
        let (a_var, b_var, ab_cov) = (va / denom, vb / denom, cab / denom);
        let threshold = 3.0 * scale / nf.sqrt();
        let (ratio, ratio_variance) = if a_mean.abs() < threshold || a_mean.abs() < TOL_BRANCH {
            (None, None)
        } else {
            let a2 = a_mean * a_mean;
            let var = (b_var / a2 - 2.0 * b_mean * ab_cov / (a2 * a_mean) + b_mean * b_mean * a_var / (a2 * a2)) / nf;
            (Some(b_mean / a_mean), Some(var.max(0.0)))
        };
        Ok(Self {
            a_mean,
            b_mean,
            ratio,
            shots: n,
            seed,
            a_var,
            b_var,
            ab_cov,
            ratio_variance,
            denominator_threshold: threshold,
        })
    }

    pub fn a_std_error(&self) -> f64 {
        (self.a_var / self.shots as f64).sqrt()
    }

    pub fn b_std_error(&self) -> f64 {
        (self.b_var / self.shots as f64).sqrt()
    }

    pub fn ratio_std_error(&self) -> Option<f64> {
        self.ratio_variance.map(f64::sqrt)
    }

    /// True when the ratio was withheld because `ā` is too small.
    pub fn denominator_flagged(&self) -> bool {
        self.ratio.is_none()
    }

    /// Shots needed for accuracy `epsilon`: `ε⁻²·ā⁻²`.
    pub fn predicted_shots(&self, epsilon: f64) -> Result<f64> {
        predicted_shots(self.a_mean, epsilon)
    }
}

/// `ε⁻²·a⁻²`, the shot count needed to resolve a ratio with denominator `a`.
pub fn predicted_shots(a_mean: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(VqedError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if a_mean.abs() < TOL_BRANCH {
        return Err(VqedError::Annihilated(a_mean));
    }
    Ok(1.0 / (epsilon * epsilon * a_mean * a_mean))
}

/// Runs `shots` shots in parallel and returns them in shot order.
pub fn run_shots<T, F>(shots: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..shots)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            f(k, &mut r)
        })
        .collect()
}

fn uniform_index<R: Rng + ?Sized>(rng: &mut R, len: usize) -> usize {
    rng.random_range(0..len)
}

/// Samples `±1` with `P(+1) = (1 + e) / 2` for `e` clamped to `[-1, 1]`.
fn sample_sign<R: Rng + ?Sized>(rng: &mut R, e: f64) -> f64 {
    let p_plus = (0.5 * (1.0 + e)).clamp(0.0, 1.0);
    if rng.random::<f64>() < p_plus {
        1.0
    } else {
        -1.0
    }
}

// ---- symmetry expansion ----------------------------------------------------

/// Symmetry-expansion estimate of the post-selected `⟨O⟩`.
///
/// Each shot draws `S_i` uniformly from the stabilizer group and samples the
/// joint eigenvalues `(s, o)` of the commuting pair `(S_i, O)` from
/// `p(s, o) = tr[ρ (I + sS_i)(I + oO)] / 4`; it records `a = s`, `b = s·o`.
pub fn se_estimate(
    rho: &DensityMatrix,
    code: &StabilizerCode,
    observable: &PauliString,
    shots: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    if (rho.trace() - 1.0).abs() > 1e-8 {
        return Err(VqedError::NotNormalized(rho.trace()));
    }
    if !observable.is_hermitian() {
        return Err(VqedError::InvalidArgument("observable must be Hermitian".into()));
    }
    if !observable_commutes_with_projector(code, observable)? {
        return Err(VqedError::InvalidArgument("observable does not commute with the code projector".into()));
    }
    let o_exp = rho.pauli_expectation(observable)?;
    let moments = code
        .group()
        .elements()
        .iter()
        .map(|s| Ok((rho.pauli_expectation(s)?, rho.pauli_expectation(&s.multiply(observable)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let pairs = run_shots(shots, seed, |_, r| {
        let (s_exp, so_exp) = moments[uniform_index(r, moments.len())];
        let s = sample_sign(r, s_exp);
        // E[o | s] = (⟨O⟩ + s⟨SO⟩) / (1 + s⟨S⟩)
        let p_s = 1.0 + s * s_exp;
        let cond = if p_s.abs() < TOL_BRANCH { 0.0 } else { (o_exp + s * so_exp) / p_s };
        let o = sample_sign(r, cond);
        Ok((s, s * o))
    })?;
    EstimatorResult::from_pairs(&pairs, 1.0, seed)
}

// ---- ancilla block simulation -----------------------------------------------

/// System + one ancilla, stored as blocks `[A00, A01, A10, A11]`.
#[derive(Clone, Debug)]
struct AncillaBlocks {
    blocks: [DensityMatrix; 4],
}

impl AncillaBlocks {
    /// `|+⟩⟨+| ⊗ σ`.
    fn plus(sigma: &DensityMatrix) -> Self {
        let mut half = sigma.clone();
        half.scale(0.5);
        Self { blocks: [half.clone(), half.clone(), half.clone(), half] }
    }

    /// Applies `|c⟩⟨c| ⊗ P + |1-c⟩⟨1-c| ⊗ I`.
    fn controlled(&mut self, p: &PauliString, control: usize) -> Result<()> {
        let dagger = p.with_phase((4 - p.phase()) % 4);
        for (idx, block) in self.blocks.iter_mut().enumerate() {
            let (a, b) = (idx >> 1, idx & 1);
            if a == control {
                block.left_mul_pauli(p)?;
            }
            if b == control {
                block.right_mul_pauli(&dagger)?;
            }
        }
        Ok(())
    }

    fn depolarize_system(&mut self, p: f64) -> Result<()> {
        for block in &mut self.blocks {
            block.depolarize_all(p)?;
        }
        Ok(())
    }

    fn depolarize_ancilla(&mut self, p: f64) {
        let [a00, a01, a10, a11] = &mut self.blocks;
        let d0 = a00.matrix().clone();
        let d1 = a11.matrix().clone();
        let keep = 1.0 - p / 2.0;
        let q = a00.num_qubits();
        *a00 = DensityMatrix::from_parts_unchecked(q, &d0 * c(keep) + &d1 * c(p / 2.0), false);
        *a11 = DensityMatrix::from_parts_unchecked(q, &d1 * c(keep) + &d0 * c(p / 2.0), false);
        a01.scale(1.0 - p);
        a10.scale(1.0 - p);
    }

    /// X-basis measurement of the ancilla: `(±1, normalized system state)`.
    fn measure_x<R: Rng + ?Sized>(self, rng: &mut R) -> Result<(f64, DensityMatrix)> {
        let [a00, a01, a10, a11] = self.blocks;
        let q = a00.num_qubits();
        let diag = a00.matrix() + a11.matrix();
        let off = a01.matrix() + a10.matrix();
        let p_plus = (0.5 * (diag.trace() + off.trace()).re).max(0.0);
        let p_minus = (0.5 * (diag.trace() - off.trace()).re).max(0.0);
        let total = p_plus + p_minus;
        if total < TOL_BRANCH {
            return Err(VqedError::InvalidMeasurement("both ancilla branches have zero probability".into()));
        }
        let plus = rng.random::<f64>() * total < p_plus;
        let (sign, prob) = if plus { (1.0, p_plus) } else { (-1.0, p_minus) };
        let post = (diag + off * c(sign)) * c(0.5 / prob);
        Ok((sign, DensityMatrix::from_parts_unchecked(q, post, true)))
    }
}

fn c(x: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(x, 0.0)
}

/// Controlled-`S` as a sequence of controlled single-qubit Paulis, each
/// followed by an ancilla depolarizing step; returns the number of steps.
fn controlled_decomposed(blocks: &mut AncillaBlocks, s: &PauliString, control: usize, p: f64) -> Result<usize> {
    let n = s.num_qubits();
    let mut steps = 0;
    let mut first = true;
    for q in 0..n {
        let letter = s.letter(q);
        if letter == 'I' {
            continue;
        }
        let mut factor = PauliString::single(n, q, letter)?;
        if first {
            // the sign of S rides on the first controlled factor
            factor = factor.with_phase(s.phase());
            first = false;
        }
        blocks.controlled(&factor, control)?;
        blocks.depolarize_ancilla(p);
        steps += 1;
    }
    if first && s.phase() != 0 {
        blocks.controlled(&PauliString::identity(n).with_phase(s.phase()), control)?;
    }
    Ok(steps)
}

/// One physical gadget shot on a normalized system state. Returns the
/// ancilla outcome and the normalized post-measurement system state.
fn gadget_shot<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    code: &StabilizerCode,
    variant: GadgetVariant,
    noise: GadgetNoise,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<(f64, DensityMatrix)> {
    let group = code.group();
    let si = &group.elements()[i];
    let sj = &group.elements()[j];
    let n = code.n();
    let blocks = match (variant, noise) {
        (GadgetVariant::SingleControl, GadgetNoise::Off) => {
            let mut sigma = rho.clone();
            sigma.conjugate_pauli(si)?;
            let mut b = AncillaBlocks::plus(&sigma);
            b.controlled(sj, 1)?;
            b
        }
        (GadgetVariant::TwoControls, GadgetNoise::Off) => {
            let mut b = AncillaBlocks::plus(rho);
            b.controlled(si, 0)?;
            b.controlled(sj, 1)?;
            b
        }
        (GadgetVariant::SingleControl, GadgetNoise::SystemGadget { p }) => {
            let mut sigma = rho.clone();
            sigma.conjugate_pauli(si)?;
            sigma.depolarize_all(p)?;
            let mut b = AncillaBlocks::plus(&sigma);
            b.controlled(sj, 1)?;
            b.depolarize_system(p)?;
            b.depolarize_ancilla(p);
            b
        }
        (GadgetVariant::TwoControls, GadgetNoise::SystemGadget { p }) => {
            let mut b = AncillaBlocks::plus(rho);
            b.controlled(si, 0)?;
            b.depolarize_system(p)?;
            b.depolarize_ancilla(p);
            b.controlled(sj, 1)?;
            b.depolarize_system(p)?;
            b.depolarize_ancilla(p);
            b
        }
        (GadgetVariant::SingleControl, GadgetNoise::AncillaOnly { p }) => {
            let mut sigma = rho.clone();
            sigma.conjugate_pauli(si)?;
            let mut b = AncillaBlocks::plus(&sigma);
            let steps = controlled_decomposed(&mut b, sj, 1, p)?;
            for _ in steps..n {
                b.depolarize_ancilla(p);
            }
            b
        }
        (GadgetVariant::TwoControls, GadgetNoise::AncillaOnly { p }) => {
            let mut b = AncillaBlocks::plus(rho);
            let mut steps = controlled_decomposed(&mut b, si, 0, p)?;
            steps += controlled_decomposed(&mut b, sj, 1, p)?;
            for _ in steps..2 * n {
                b.depolarize_ancilla(p);
            }
            b
        }
    };
    blocks.measure_x(rng)
}

// ---- VQED -------------------------------------------------------------------

/// Simulates one VQED shot with physical ancillas.
///
/// `noise` replaces the circuit's own noise model.
pub fn vqed_shot<R: Rng + ?Sized>(
    spec: &CircuitSpec,
    schedule: &GadgetSchedule,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ShotRecord> {
    noise.validate()?;
    let spec = spec.with_noise(*noise);
    let code = spec.code();
    let group_len = code.group().len();
    let depth = spec.depth();
    let mut rho = code.logical_zero_density()?;
    let mut a = 1.0;
    let mut sampled = Vec::with_capacity(schedule.gadget_count(depth));
    for layer in 0..depth {
        spec.apply_layer(&mut rho, layer)?;
        if schedule.fires_after(layer + 1, depth) {
            let i = uniform_index(rng, group_len);
            let j = uniform_index(rng, group_len);
            let (m, post) = gadget_shot(&rho, code, schedule.variant, noise.gadget, i, j, rng)?;
            a *= m;
            rho = post;
            sampled.push((i, j));
        }
    }
    let o = sample_sign(rng, rho.pauli_expectation(spec.observable())? / rho.trace());
    Ok(ShotRecord { a, b: a * o, sampled_indices: sampled })
}

/// One VQED shot driven by the stream for `(seed, shot_index)`.
pub fn vqed_shot_run(
    spec: &CircuitSpec,
    schedule: &GadgetSchedule,
    noise: &NoiseModel,
    seed: u64,
    shot_index: u64,
) -> Result<ShotRecord> {
    let mut r = rng::stream(seed, shot_index);
    vqed_shot(spec, schedule, noise, &mut r)
}

/// All shot records for `(seed, 0..shots)`, in shot order.
pub fn vqed_records(
    spec: &CircuitSpec,
    schedule: &GadgetSchedule,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    run_shots(shots, seed, |_, r| vqed_shot(spec, schedule, noise, r))
}

/// VQED estimate of the post-selected `⟨O⟩` from `shots` physical shots.
pub fn vqed_estimate(
    spec: &CircuitSpec,
    schedule: &GadgetSchedule,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    let pairs = run_shots(shots, seed, |_, r| {
        let rec = vqed_shot(spec, schedule, noise, r)?;
        Ok((rec.a, rec.b))
    })?;
    EstimatorResult::from_pairs(&pairs, 1.0, seed)
}

// ---- virtual QEC --------------------------------------------------------------

/// Sampled virtual error correction of `ρ`.
///
/// Each shot draws a syndrome `s` uniformly from the configured set `B`,
/// applies `R_s`, runs one noiseless gadget shot and measures `O`. Both `a`
/// and `b` are weighted by `|B|`.
pub fn virtual_qec_sample(
    rho: &DensityMatrix,
    code: &StabilizerCode,
    cfg: &VirtualQecConfig,
    observable: &PauliString,
    shots: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    if (rho.trace() - 1.0).abs() > 1e-8 {
        return Err(VqedError::NotNormalized(rho.trace()));
    }
    if !observable_commutes_with_projector(code, observable)? {
        return Err(VqedError::InvalidArgument("observable does not commute with the code projector".into()));
    }
    let syndromes = cfg.syndromes();
    let weight = syndromes.len() as f64;
    let group_len = code.group().len();
    let pairs = run_shots(shots, seed, |_, r| {
        let s = syndromes[uniform_index(r, syndromes.len())];
        let mut sigma = rho.clone();
        sigma.conjugate_pauli(cfg.recovery.get(s))?;
        let i = uniform_index(r, group_len);
        let j = uniform_index(r, group_len);
        let (m, post) = gadget_shot(&sigma, code, GadgetVariant::SingleControl, GadgetNoise::Off, i, j, r)?;
        let o = sample_sign(r, post.pauli_expectation(observable)?);
        Ok((weight * m, weight * m * o))
    })?;
    EstimatorResult::from_pairs(&pairs, weight, seed)
}
