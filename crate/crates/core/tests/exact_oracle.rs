mod common;

use std::sync::Arc;

use common::*;
use vqed::codes::{build_code, StabilizerCode, Syndrome};
use vqed::dense::{CMatrix, DensityMatrix, GadgetNoise, NoiseModel};
use vqed::exact::{self, CircuitSpec, GadgetSchedule, GadgetVariant, QecPoint, ScheduleMode, VirtualQecConfig};
use vqed::PauliString;

fn arc(name: &str) -> Arc<StabilizerCode> {
    Arc::new(build_code(name).unwrap())
}

fn spec(code: &Arc<StabilizerCode>, depth: usize, p: f64, seed: u64) -> CircuitSpec {
    let gates = random_gates(code, depth, &mut rng(seed));
    CircuitSpec::with_logical_z(Arc::clone(code), gates, NoiseModel::gate_only(p).unwrap()).unwrap()
}

fn proj(k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(k, k)] = c(1.0);
    m
}

/// `tr_anc[(I ⊗ X) ρ]` with the ancilla as the last qubit.
fn ancilla_x_block(rho: &CMatrix) -> CMatrix {
    let d = rho.nrows() / 2;
    CMatrix::from_fn(d, d, |r, col| rho[(2 * r, 2 * col + 1)] + rho[(2 * r + 1, 2 * col)])
}

/// Controlled-`s` (on ancilla value `value`) as a full-register matrix.
fn controlled(s: &CMatrix, value: usize) -> CMatrix {
    let d = s.nrows();
    eye(d).kronecker(&proj(1 - value)) + s.kronecker(&proj(value))
}

fn depolarize_ancilla(rho: &CMatrix, p: f64, n: usize) -> CMatrix {
    depolarize_kraus(rho, p, n, n + 1)
}

fn depolarize_system(rho: &CMatrix, p: f64, n: usize) -> CMatrix {
    (0..n).fold(rho.clone(), |acc, q| depolarize_kraus(&acc, p, q, n + 1))
}

/// Average over `(i, j)` of the physical gadget with an explicit ancilla.
fn joint_gadget_oracle(code: &StabilizerCode, rho: &CMatrix, variant: GadgetVariant, noise: GadgetNoise) -> CMatrix {
    let n = code.n();
    let plus = CMatrix::from_element(2, 2, c(0.5));
    let els = code.group().elements();
    let mats: Vec<CMatrix> = els.iter().map(pauli_matrix).collect();
    let d = rho.nrows();
    let mut acc = CMatrix::zeros(d, d);
    for (si_p, si) in els.iter().zip(&mats) {
        for (sj_p, sj) in els.iter().zip(&mats) {
            let mut j = rho.kronecker(&plus);
            match (variant, noise) {
                (GadgetVariant::SingleControl, GadgetNoise::Off) => {
                    let a = si.kronecker(&eye(2));
                    j = &a * j * a.adjoint();
                    let cj = controlled(sj, 1);
                    j = &cj * j * cj.adjoint();
                }
                (GadgetVariant::TwoControls, GadgetNoise::Off) => {
                    for cm in [controlled(si, 0), controlled(sj, 1)] {
                        j = &cm * j * cm.adjoint();
                    }
                }
                (GadgetVariant::SingleControl, GadgetNoise::SystemGadget { p }) => {
                    let a = si.kronecker(&eye(2));
                    j = depolarize_system(&(&a * j * a.adjoint()), p, n);
                    let cj = controlled(sj, 1);
                    j = depolarize_all_kraus(&(&cj * j * cj.adjoint()), p, n + 1);
                }
                (GadgetVariant::TwoControls, GadgetNoise::SystemGadget { p }) => {
                    for cm in [controlled(si, 0), controlled(sj, 1)] {
                        j = depolarize_all_kraus(&(&cm * j * cm.adjoint()), p, n + 1);
                    }
                }
                (variant, GadgetNoise::AncillaOnly { p }) => {
                    let mut steps = 0;
                    let mut parts: Vec<(&PauliString, usize)> = vec![(sj_p, 1)];
                    if variant == GadgetVariant::TwoControls {
                        parts.insert(0, (si_p, 0));
                    } else {
                        let a = si.kronecker(&eye(2));
                        j = &a * j * a.adjoint();
                    }
                    for (s, value) in parts {
                        let mut first = true;
                        for q in 0..n {
                            if s.letter(q) == 'I' {
                                continue;
                            }
                            let mut f = embed(&pauli_2x2(s.letter(q)), q, n);
                            if first {
                                f *= num_complex::Complex64::new(0.0, 1.0).powu(s.phase() as u32);
                                first = false;
                            }
                            let cm = controlled(&f, value);
                            j = depolarize_ancilla(&(&cm * j * cm.adjoint()), p, n);
                            steps += 1;
                        }
                    }
                    let total = if variant == GadgetVariant::TwoControls { 2 * n } else { n };
                    for _ in steps..total {
                        j = depolarize_ancilla(&j, p, n);
                    }
                }
            }
            acc += ancilla_x_block(&j);
        }
    }
    let m = els.len() as f64;
    acc / c(m * m)
}

#[test]
fn gadget_maps_match_explicit_ancilla() {
    let mut r = rng(20);
    for name in ["code_412", "code_513"] {
        let code = build_code(name).unwrap();
        let rho = random_density(code.n(), &mut r);
        for variant in [GadgetVariant::SingleControl, GadgetVariant::TwoControls] {
            for noise in [GadgetNoise::Off, GadgetNoise::SystemGadget { p: 0.07 }, GadgetNoise::AncillaOnly { p: 0.07 }] {
                if name == "code_513" && matches!(noise, GadgetNoise::AncillaOnly { .. }) {
                    continue;
                }
                let mut state = DensityMatrix::from_matrix(rho.clone()).unwrap();
                exact::apply_gadget(&mut state, &code, variant, noise).unwrap();
                let want = joint_gadget_oracle(&code, &rho, variant, noise);
                assert!(max_diff(state.matrix(), &want) < 1e-12, "{name} {variant:?} {noise:?}");
            }
        }
    }
}

#[test]
fn noiseless_gadget_is_the_projection() {
    let mut r = rng(21);
    let code = build_code("code_713").unwrap();
    let rho = random_density(7, &mut r);
    let p = code_projector(&code);
    let mut state = DensityMatrix::from_matrix(rho.clone()).unwrap();
    exact::apply_gadget(&mut state, &code, GadgetVariant::SingleControl, GadgetNoise::Off).unwrap();
    assert!(max_diff(state.matrix(), &(&p * &rho * &p)) < 1e-12);
}

#[test]
fn vqed_matches_post_selection_oracle() {
    for name in ["code_412", "code_513", "code_713"] {
        let code = arc(name);
        for seed in 0..3 {
            let s = spec(&code, 6, 0.03, seed);
            for mode in [ScheduleMode::EveryGate, ScheduleMode::EveryM(2), ScheduleMode::LastGate, ScheduleMode::None] {
                let sched = GadgetSchedule::new(mode);
                let got = exact::vqed_exact(&s, &sched).unwrap();
                let rho = detected_state_oracle(&s, &sched);
                let o = pauli_matrix(s.observable());
                assert!((got.denominator - trace_re(&rho)).abs() < 1e-12);
                assert!((got.numerator - expectation(&rho, &o)).abs() < 1e-12);
                // both variants give the same averaged state
                let two = exact::vqed_exact(&s, &sched.with_variant(GadgetVariant::TwoControls)).unwrap();
                assert!((two.ratio - got.ratio).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn last_gate_vqed_equals_symmetry_expansion() {
    let code = arc("code_513");
    for seed in 0..5 {
        let s = spec(&code, 8, 0.04, seed);
        let noisy = exact::evolve_unprotected(&s).unwrap();
        let se = exact::symmetry_expansion_exact(&noisy, &code, s.observable()).unwrap();
        let vq = exact::vqed_exact(&s, &GadgetSchedule::new(ScheduleMode::LastGate)).unwrap();
        assert!((se.ratio - vq.ratio).abs() < 1e-12);
        assert!((se.denominator - vq.denominator).abs() < 1e-12);
    }
}

#[test]
fn no_gadgets_is_plain_noisy_circuit() {
    let code = arc("code_412");
    let s = spec(&code, 10, 0.05, 3);
    let got = exact::vqed_exact(&s, &GadgetSchedule::new(ScheduleMode::None)).unwrap();
    assert!((got.denominator - 1.0).abs() < 1e-12);
    let rho = exact::evolve_unprotected(&s).unwrap();
    assert!((got.ratio - rho.pauli_expectation(s.observable()).unwrap()).abs() < 1e-12);
}

#[test]
fn noiseless_circuits_are_exact() {
    for name in ["code_412", "code_513", "code_713"] {
        let code = arc(name);
        let s = spec(&code, 12, 0.0, 9);
        let got = exact::vqed_exact(&s, &GadgetSchedule::new(ScheduleMode::EveryGate)).unwrap();
        let ideal = ideal_state_oracle(&s);
        assert!((got.denominator - 1.0).abs() < 1e-12);
        assert!((got.ratio - expectation(&ideal, &pauli_matrix(s.observable()))).abs() < 1e-12);
        let rho = exact::evolve_with_gadgets(&s, &GadgetSchedule::new(ScheduleMode::EveryGate), GadgetNoise::Off).unwrap();
        assert!(exact::infidelity(&rho, &s.noiseless_state().unwrap()).unwrap().abs() < 1e-12);
    }
}

#[test]
fn ancilla_only_noise_only_rescales() {
    let code = arc("code_412");
    let p = 0.02;
    for variant in [GadgetVariant::SingleControl, GadgetVariant::TwoControls] {
        let s = spec(&code, 7, p, 4);
        let sched = GadgetSchedule::new(ScheduleMode::EveryM(2)).with_variant(variant);
        let clean = exact::vqed_exact(&s, &sched).unwrap();
        let noisy = exact::vqed_exact_noisy_gadget(&s, &sched, &NoiseModel::new(p, GadgetNoise::AncillaOnly { p }).unwrap()).unwrap();
        let per = exact::ancilla_steps(&code, variant) as i32;
        let factor = (1.0 - p).powi(per * sched.gadget_count(7) as i32);
        assert!((noisy.ratio - clean.ratio).abs() < 1e-12);
        assert!((noisy.denominator - factor * clean.denominator).abs() < 1e-12);
    }
}

#[test]
fn system_gadget_noise_lowers_the_trace() {
    let code = arc("code_412");
    let s = spec(&code, 20, 0.01, 5);
    let sched = GadgetSchedule::new(ScheduleMode::EveryGate);
    let clean = exact::vqed_exact(&s, &sched).unwrap();
    let noisy = exact::vqed_exact_noisy_gadget(&s, &sched, &NoiseModel::new(0.01, GadgetNoise::SystemGadget { p: 0.01 }).unwrap()).unwrap();
    assert!(noisy.denominator < clean.denominator);
}

#[test]
fn more_gadgets_mean_lower_infidelity_on_average() {
    let code = arc("code_513");
    let depth = 40;
    let modes = [ScheduleMode::EveryGate, ScheduleMode::EveryM(5), ScheduleMode::LastGate, ScheduleMode::None];
    let mut sums = [0.0; 4];
    for seed in 0..20 {
        let s = spec(&code, depth, 0.01, 100 + seed);
        let psi = s.noiseless_state().unwrap();
        for (k, &m) in modes.iter().enumerate() {
            let rho = exact::evolve_with_gadgets(&s, &GadgetSchedule::new(m), GadgetNoise::Off).unwrap();
            sums[k] += exact::infidelity(&rho, &psi).unwrap();
        }
    }
    assert!(sums.windows(2).all(|w| w[0] < w[1]), "{sums:?}");
}

#[test]
fn snapshots_equal_prefix_runs() {
    let code = arc("code_513");
    let s = spec(&code, 25, 0.02, 6);
    let depths = [0, 1, 4, 10, 17, 25];
    for mode in [ScheduleMode::EveryM(4), ScheduleMode::LastGate, ScheduleMode::EveryGate, ScheduleMode::None] {
        let sched = GadgetSchedule::new(mode);
        let snaps = exact::evolve_snapshots(&s, &sched, GadgetNoise::Off, &depths).unwrap();
        for (&d, snap) in depths.iter().zip(&snaps) {
            let direct = exact::evolve_with_gadgets(&s.prefix(d), &sched, GadgetNoise::Off).unwrap();
            assert!(max_diff(snap.matrix(), direct.matrix()) < 1e-13, "{mode} L={d}");
        }
    }
    assert!(exact::evolve_snapshots(&s, &GadgetSchedule::new(ScheduleMode::None), GadgetNoise::Off, &[5, 3]).is_err());
    assert!(exact::evolve_snapshots(&s, &GadgetSchedule::new(ScheduleMode::None), GadgetNoise::Off, &[26]).is_err());
}

#[test]
fn detection_trace_is_product_of_step_acceptances() {
    // normalizing after every step, the kept weight is the product of the
    // per-gadget acceptance probabilities
    let (p, depth) = (0.01, 10);
    let code = arc("code_412");
    let s = spec(&code, depth, p, 7);
    let (state, trace) = exact::evolve_qed(&s, &GadgetSchedule::new(ScheduleMode::EveryGate)).unwrap();
    let proj = code_projector(&code);
    let mut rho = logical_zero_oracle(&code);
    let mut product = 1.0;
    for &g in s.gates() {
        let u = transversal(&code.transversal_gates()[g].matrix, 4);
        rho = depolarize_all_kraus(&(&u * rho * u.adjoint()), p, 4);
        let kept = &proj * &rho * &proj;
        let acc = trace_re(&kept);
        product *= acc;
        rho = kept / c(acc);
    }
    assert!((trace - product).abs() < 1e-12);
    assert!(max_diff(state.matrix(), &(rho * c(product))) < 1e-12);
    let approx = (1.0 - 3.0 * p / 4.0).powi(4 * depth as i32);
    assert!(((trace - approx) / approx).abs() < 0.10, "{trace} vs {approx}");
}

#[test]
fn ratio_equals_normalized_detected_expectation() {
    let code = arc("code_412");
    let s = spec(&code, 5, 0.05, 12);
    let sched = GadgetSchedule::new(ScheduleMode::EveryGate);
    let (rho, _) = exact::evolve_qed(&s, &sched).unwrap();
    let want = rho.normalize().unwrap().pauli_expectation(s.observable()).unwrap();
    assert!((exact::vqed_exact(&s, &sched).unwrap().ratio - want).abs() < 1e-12);
}

/// Syndrome measurement and recovery on a matrix.
fn textbook_qec(code: &StabilizerCode, rho: &CMatrix, syndromes: &[Syndrome]) -> CMatrix {
    let table = code.build_recovery_table().unwrap();
    let d = rho.nrows();
    let mut out = CMatrix::zeros(d, d);
    for &s in syndromes {
        let pi = syndrome_projector(code, &s.signs());
        let rm = pauli_matrix(table.get(s));
        out += &rm * &pi * rho * &pi * &rm;
    }
    out
}

#[test]
fn virtual_qec_full_and_subset() {
    let mut r = rng(22);
    let code = build_code("code_713").unwrap();
    let rho = random_density(7, &mut r);
    let state = DensityMatrix::from_matrix(rho.clone()).unwrap();
    let all: Vec<Syndrome> = Syndrome::all(6).collect();
    let full = exact::virtual_qec_state(&state, &code, &VirtualQecConfig::full(&code).unwrap()).unwrap();
    assert!(max_diff(full.state.matrix(), &textbook_qec(&code, &rho, &all)) < 1e-12);
    assert!((full.success_weight - 1.0).abs() < 1e-12);

    let cfg = VirtualQecConfig::low_weight(&code, 1).unwrap();
    let subset = cfg.syndromes();
    assert!(subset.len() < all.len());
    let part = exact::virtual_qec_state(&state, &code, &cfg).unwrap();
    let want = textbook_qec(&code, &rho, &subset);
    let w = trace_re(&want);
    assert!((part.success_weight - w).abs() < 1e-12);
    assert!(max_diff(part.state.matrix(), &(want / c(w))) < 1e-12);
    assert!((exact::virtual_qec_subset_cost(part.subset_size, w).unwrap() - (subset.len() as f64 / w).powi(2)).abs() < 1e-9);
}

#[test]
fn virtual_qec_layerwise_matches_oracle() {
    let code = arc("code_513");
    let s = spec(&code, 4, 0.03, 8);
    let cfg = VirtualQecConfig::full(&code).unwrap();
    let all: Vec<Syndrome> = Syndrome::all(4).collect();
    let got = exact::virtual_qec_exact(&s, &cfg, QecPoint::EveryLayer).unwrap();
    let mut rho = logical_zero_oracle(&code);
    for &g in s.gates() {
        let u = transversal(&code.transversal_gates()[g].matrix, 5);
        rho = depolarize_all_kraus(&(&u * rho * u.adjoint()), 0.03, 5);
        rho = textbook_qec(&code, &rho, &all);
    }
    assert!(max_diff(got.state.matrix(), &rho) < 1e-12);
    let end = exact::virtual_qec_exact(&s, &cfg, QecPoint::EndOfCircuit).unwrap();
    assert!((end.state.trace() - 1.0).abs() < 1e-12);
}

#[test]
fn cost_formulas() {
    assert!((exact::vqed_sampling_cost(0.5).unwrap() - 4.0).abs() < 1e-12);
    assert!(exact::vqed_sampling_cost(0.0).is_err());
    let code = build_code("code_412").unwrap();
    assert!((exact::virtual_qec_full_cost(&code, 1.0).unwrap() - 64.0).abs() < 1e-12);
}

#[test]
fn observable_must_commute_with_projector() {
    let code = arc("code_412");
    let bad: PauliString = "XIII".parse().unwrap();
    assert!(CircuitSpec::new(Arc::clone(&code), vec![], NoiseModel::gate_only(0.0).unwrap(), bad).is_err());
    assert!(!exact::observable_commutes_with_projector(&code, &bad).unwrap());
    assert!(exact::observable_commutes_with_projector(&code, &code.logical_z()[0]).unwrap());
}

#[test]
fn schedule_parsing() {
    for (text, mode) in [
        ("none", ScheduleMode::None),
        ("last_gate", ScheduleMode::LastGate),
        ("every_gate", ScheduleMode::EveryGate),
        ("every_1", ScheduleMode::EveryGate),
        ("every_20", ScheduleMode::EveryM(20)),
    ] {
        assert_eq!(text.parse::<ScheduleMode>().unwrap(), mode);
    }
    for bad in ["every_0", "sometimes", "every_x", ""] {
        assert!(bad.parse::<ScheduleMode>().is_err());
    }
    let s = GadgetSchedule::new(ScheduleMode::EveryM(3));
    assert_eq!(s.gadget_count(10), 4);
    assert_eq!(s.gadget_count(9), 3);
    assert_eq!(GadgetSchedule::new(ScheduleMode::LastGate).gadget_count(0), 0);
}
