mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use weak_teleport::linalg::{herm_eig, kron, partial_trace, psd_sqrt, ComplexMatrix};
use weak_teleport::povm::validate;
use weak_teleport::protocol::{effective_closed_form, fidelity_closed_form, run_round};
use weak_teleport::recycle::{cumulative_mixing, solve_sharpness, Sharpness};
use weak_teleport::states::{concurrence, is_ppt, materialize, xstate_concurrence};
use weak_teleport::{mrn, CorrectionSet, DensityMatrix, PovmFamily, PovmKind, ResourceSpec, Strictness};

use common::{decay, random_density, random_hermitian, random_local_unitary, random_matrix, rng};

fn kind_strategy() -> impl Strategy<Value = PovmKind> {
    prop::sample::select(PovmKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_is_associative_and_multiplies_traces(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, d) = (random_matrix(&mut r, 2), random_matrix(&mut r, 2), random_matrix(&mut r, 2));
        let left = kron(&kron(&a, &b).unwrap(), &d).unwrap();
        let right = kron(&a, &kron(&b, &d).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
        let ab = kron(&a, &b).unwrap();
        prop_assert!((ab.trace() - a.trace() * b.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_matches_index_sum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, 2);
        let b = random_matrix(&mut r, 4);
        let m = kron(&a, &b).unwrap();
        let got = partial_trace(&m, &[false, true, true], &[2, 2, 2]).unwrap();
        prop_assert!(got.max_abs_diff(&b.scale_complex(a.trace())) < 1e-11);
        // Tracing out the last two qubits by explicit summation.
        let want = ComplexMatrix::from_fn(2, |i, j| (0..4).map(|k| m[(4 * i + k, 4 * j + k)]).sum()).unwrap();
        let got = partial_trace(&m, &[true, false, false], &[2, 2, 2]).unwrap();
        prop_assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 4, 8])) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, dim);
        let e = herm_eig(&h).unwrap();
        prop_assert!(e.reconstruct().max_abs_diff(&h) < 1e-12 * h.frobenius_norm().max(1.0));
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let v = &e.vectors;
        let gram = &v.adjoint() * v;
        prop_assert!(gram.max_abs_diff(&ComplexMatrix::identity(dim).unwrap()) < 1e-12);
        let tr: f64 = e.values.iter().sum();
        prop_assert!((tr - h.trace().re).abs() < 1e-11);
    }

    #[test]
    fn psd_sqrt_squares_back(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 4, 8]), rank in 1usize..=8) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, dim, rank.min(dim));
        let s = psd_sqrt(rho.matrix()).unwrap();
        prop_assert!((&s * &s).max_abs_diff(rho.matrix()) < 1e-12);
        prop_assert!(s.hermiticity_residual() < 1e-12);
        prop_assert!(herm_eig(&s.hermitian_part()).unwrap().min_value() > -1e-12);
    }

    #[test]
    fn concurrence_is_local_unitary_invariant(seed in any::<u64>(), rank in 1usize..=4) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 4, rank);
        let u = random_local_unitary(&mut r);
        let rotated = DensityMatrix::new(rho.matrix().conjugate_by(&u).hermitian_part()).unwrap();
        let (a, b) = (concurrence(&rho).unwrap(), concurrence(&rotated).unwrap());
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn concurrence_agrees_with_ppt(seed in any::<u64>(), rank in 1usize..=4) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 4, rank);
        let c = concurrence(&rho).unwrap();
        // Two qubits are entangled exactly when the partial transpose is not positive.
        prop_assume!(c > 1e-6 || c == 0.0);
        prop_assert_eq!(c > 0.0, !is_ppt(&rho).unwrap());
    }

    #[test]
    fn povm_families_are_valid(kind in kind_strategy(), lambda in 1e-6f64..=1.0) {
        let rep = validate(&PovmFamily::build(kind, lambda).unwrap());
        prop_assert!(rep.is_valid(1e-13, 1e-12), "{}", rep);
    }

    #[test]
    fn round_invariants(seed in any::<u64>(), kind in kind_strategy(), lambda in 0.01f64..=1.0, rank in 1usize..=4) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 4, rank);
        let out = run_round(&rho, &PovmFamily::build(kind, lambda).unwrap(), &CorrectionSet::standard()).unwrap();
        prop_assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&out.fidelity));
        prop_assert!((out.effective_state.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_resource_is_a_fixed_point(seed in any::<u64>(), lambda in 0.01f64..=1.0, rank in 1usize..=2) {
        let mut r = rng(seed);
        let qubit = random_density(&mut r, 2, rank);
        let half = ComplexMatrix::diag(&[0.5, 0.5]).unwrap();
        let rho = DensityMatrix::new(kron(&half, qubit.matrix()).unwrap()).unwrap();
        let fam = PovmFamily::build(PovmKind::Depolarized, lambda).unwrap();
        let out = run_round(&rho, &fam, &CorrectionSet::standard()).unwrap();
        prop_assert!(out.effective_state.matrix().max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn engine_matches_xstate_closed_forms(alpha in 1e-3f64..=0.5, q in 0.0f64..=1.0, lambda in 0.01f64..=1.0) {
        let spec = ResourceSpec::XState { alpha, q };
        let rho = materialize(&spec).unwrap();
        let fam = PovmFamily::build(PovmKind::Depolarized, lambda).unwrap();
        let out = run_round(&rho, &fam, &CorrectionSet::standard()).unwrap();
        let s = (alpha * (1.0 - alpha)).sqrt();
        prop_assert!((out.fidelity - (0.5 + q * lambda * (1.0 + 4.0 * s) / 6.0)).abs() < 1e-12);
        prop_assert!((fidelity_closed_form(&spec, lambda).unwrap() - out.fidelity).abs() < 1e-12);
        let next = materialize(&effective_closed_form(&spec, lambda).unwrap()).unwrap();
        prop_assert!(next.matrix().max_abs_diff(out.effective_state.matrix()) < 1e-12);
    }

    #[test]
    fn mrn_is_nonincreasing_in_target(p in 0.34f64..=1.0, f1 in 0.51f64..0.99, df in 0.0f64..0.2) {
        let spec = ResourceSpec::Werner { p };
        let f2 = (f1 + df).min(1.0);
        let a = mrn(&spec, f1, Strictness::Strict).unwrap().mrn;
        let b = mrn(&spec, f2, Strictness::Strict).unwrap().mrn;
        prop_assert!(b <= a);
    }

    #[test]
    fn mrn_is_nonincreasing_as_alpha_shrinks(a1 in 1e-4f64..=0.5, frac in 0.0f64..=1.0, f in 0.55f64..0.9) {
        let a2 = a1 * frac.max(1e-3);
        let hi = mrn(&ResourceSpec::PureChi { alpha: a1 }, f, Strictness::Strict).unwrap().mrn;
        let lo = mrn(&ResourceSpec::PureChi { alpha: a2 }, f, Strictness::Strict).unwrap().mrn;
        prop_assert!(lo <= hi);
    }

    #[test]
    fn werner_reachability_threshold(q in 0.0f64..=1.0, f in 0.501f64..=1.0) {
        // Keep clear of the boundary where the strict margin decides.
        prop_assume!((q - (2.0 * f - 1.0)).abs() > 1e-6);
        let reachable = mrn(&ResourceSpec::Werner { p: q }, f, Strictness::Strict).unwrap().mrn > 0;
        prop_assert_eq!(reachable, q > 2.0 * f - 1.0);
        let lambda = solve_sharpness(&ResourceSpec::Werner { p: q }, f).unwrap();
        prop_assert_eq!(matches!(lambda, Sharpness::Reachable(_)), q > 2.0 * f - 1.0);
    }

    #[test]
    fn traces_respect_their_invariants(p in 0.0f64..=1.0, f in 0.51f64..=1.0) {
        let t = mrn(&ResourceSpec::Werner { p }, f, Strictness::Strict).unwrap();
        prop_assert_eq!(t.mrn, t.rounds.len());
        for r in &t.rounds {
            prop_assert!(r.fidelity >= f - 1e-9);
            prop_assert!(r.sharpness > 0.0 && r.sharpness <= 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_x_states_have_closed_form_concurrence(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut d: Vec<f64> = (0..4).map(|_| r.random_range(0.0..1.0)).collect();
        let t: f64 = d.iter().sum();
        d.iter_mut().for_each(|x| *x /= t);
        let outer = (d[0] * d[3]).sqrt() * r.random_range(0.0..=1.0);
        let inner = (d[1] * d[2]).sqrt() * r.random_range(0.0..=1.0);
        let (po, pi) = (r.random_range(0.0..std::f64::consts::TAU), r.random_range(0.0..std::f64::consts::TAU));
        let mut m = ComplexMatrix::diag(&d).unwrap();
        m[(0, 3)] = Complex64::from_polar(outer, po);
        m[(3, 0)] = Complex64::from_polar(outer, -po);
        m[(1, 2)] = Complex64::from_polar(inner, pi);
        m[(2, 1)] = Complex64::from_polar(inner, -pi);
        let rho = DensityMatrix::new(m).unwrap();
        let want = 2.0 * (outer - (d[1] * d[2]).sqrt()).max(inner - (d[0] * d[3]).sqrt()).max(0.0);
        prop_assert!((xstate_concurrence(&rho).unwrap() - want).abs() < 1e-12);
        prop_assert!((concurrence(&rho).unwrap() - want).abs() < 1e-8);
    }
}

#[test]
fn bell_sharpness_recursion_and_cumulative_mixing() {
    let t = mrn(&ResourceSpec::Werner { p: 1.0 }, 2.0 / 3.0, Strictness::Strict).unwrap();
    let l = t.sharpness_schedule();
    assert_eq!(l.len(), 6);
    assert!((l[0] - 1.0 / 3.0).abs() < 1e-15);
    let mut mixing = 1.0;
    for (i, r) in t.rounds.iter().enumerate() {
        if i + 1 < l.len() {
            assert!((l[i + 1] - l[i] / decay(l[i])).abs() < 1e-12);
        }
        mixing *= decay(l[i]);
        let ResourceSpec::Werner { p } = r.state else {
            panic!("Werner resource stays Werner");
        };
        assert!((p - mixing).abs() < 1e-12);
        assert!((p - cumulative_mixing(&l[..=i])).abs() < 1e-12);
    }
}

#[test]
fn reachability_matches_entanglement_at_classical_bound() {
    for k in 0..=100 {
        let q = k as f64 / 100.0;
        let t = mrn(&ResourceSpec::Werner { p: q }, 2.0 / 3.0, Strictness::Strict).unwrap();
        let entangled = q > 1.0 / 3.0 + 1e-9;
        assert_eq!(t.mrn > 0, entangled, "q = {q}");
    }
}

#[test]
fn pauli_design_matches_haar_average_for_every_family() {
    let mut r = rng(0x2de5);
    let rho = random_density(&mut r, 4, 3);
    for (k, kind) in PovmKind::ALL.into_iter().enumerate() {
        let fam = PovmFamily::build(kind, 0.35 + 0.15 * k as f64).unwrap();
        let corr = CorrectionSet::standard();
        let exact = run_round(&rho, &fam, &corr).unwrap().fidelity;
        let mc = weak_teleport::run_round_mc(&rho, &fam, &corr, 1_000_000, 11 + k as u64).unwrap();
        assert!(mc.std_error > 0.0);
        assert!(mc.agrees_with(exact, 3.0), "{kind}: {exact} vs {} ± {}", mc.mean, mc.std_error);
    }
}
