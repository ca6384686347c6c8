//! One teleportation round with an unsharp Bell measurement.
//!
//! The sender measures (A′, A) of `|η⟩⟨η| ⊗ ρ^{AB}` with operators `√M_i`;
//! the receiver either applies the correction `U_i` (completing the round)
//! or leaves the averaged post-measurement resource for the next pair.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, kron, partial_trace, ComplexMatrix, ONE, ZERO};
use crate::povm::PovmFamily;
use crate::states::{concurrence, DensityMatrix, ResourceSpec};

/// Outcomes below this probability are dropped instead of normalised.
pub const ZERO_PROBABILITY: f64 = 1e-14;

const UNITARY_TOL: f64 = 1e-12;
const QUBITS: [usize; 3] = [2, 2, 2];
const MIN_MC_SAMPLES: usize = 1000;

/// Receiver corrections indexed by Bell outcome.
#[derive(Debug, Clone)]
pub struct CorrectionSet {
    unitaries: [ComplexMatrix; 4],
}

impl CorrectionSet {
    pub fn new(unitaries: [ComplexMatrix; 4]) -> Result<Self> {
        for (i, u) in unitaries.iter().enumerate() {
            if u.dim() != 2 {
                return Err(Error::Shape(format!("correction {} is not 2x2", i + 1)));
            }
            let residual = (&u.adjoint() * u).max_abs_diff(&linalg::identity2());
            if residual > UNITARY_TOL {
                return Err(Error::Domain(format!(
                    "correction {} is not unitary (residual {residual:e})",
                    i + 1
                )));
            }
        }
        Ok(Self { unitaries })
    }

    /// `B1 → I`, `B2 → σz`, `B3 → σx`, `B4 → σz σx`.
    pub fn standard() -> Self {
        let z = linalg::sigma_z();
        let x = linalg::sigma_x();
        let zx = &z * &x;
        Self {
            unitaries: [linalg::identity2(), z, x, zx],
        }
    }

    /// Exchanges the corrections for Bell outcomes `i` and `j` (1-based).
    pub fn swapped(&self, i: usize, j: usize) -> Result<Self> {
        if !(1..=4).contains(&i) || !(1..=4).contains(&j) {
            return Err(Error::Domain(format!("outcome indices {i}, {j} outside 1..=4")));
        }
        let mut unitaries = self.unitaries.clone();
        unitaries.swap(i - 1, j - 1);
        Ok(Self { unitaries })
    }

    pub fn unitary(&self, outcome: usize) -> &ComplexMatrix {
        &self.unitaries[outcome - 1]
    }

    pub fn unitaries(&self) -> &[ComplexMatrix; 4] {
        &self.unitaries
    }
}

/// One outcome of the sender's measurement for a fixed input.
#[derive(Debug, Clone)]
pub struct OutcomeBranch {
    pub probability: f64,
    /// Normalised receiver state after the correction, `None` when the
    /// outcome probability is below [`ZERO_PROBABILITY`].
    pub corrected_state: Option<ComplexMatrix>,
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    /// Outcome probabilities averaged over inputs.
    pub probs: [f64; 4],
    /// Haar-averaged fidelity of the completed round.
    pub fidelity: f64,
    /// Averaged resource left for the next round.
    pub effective_state: DensityMatrix,
    pub effective_concurrence: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// `|exact - mean| ≤ k·σ`, with an absolute floor of `1e-10` so that
    /// zero-variance estimators compare equal up to rounding.
    pub fn agrees_with(&self, exact: f64, sigmas: f64) -> bool {
        (exact - self.mean).abs() <= sigmas * self.std_error + 1e-10
    }
}

/// The six Pauli eigenstates `|0⟩, |1⟩, |±⟩, |±i⟩`, a projective 2-design.
pub fn pauli_design_states() -> [[Complex64; 2]; 6] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = Complex64::new(s, 0.0);
    let i = Complex64::new(0.0, s);
    [
        [ONE, ZERO],
        [ZERO, ONE],
        [r, r],
        [r, -r],
        [r, i],
        [r, -i],
    ]
}

fn require_resource(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::Shape(format!(
            "resource must be a two-qubit state, got dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

fn lifted_operators(fam: &PovmFamily) -> Result<Vec<ComplexMatrix>> {
    fam.measurement_operators()?
        .iter()
        .map(|k| kron(k, &linalg::identity2()))
        .collect()
}

fn branches_with(
    rho: &DensityMatrix,
    lifted: &[ComplexMatrix],
    corr: &CorrectionSet,
    eta: &[Complex64; 2],
) -> Result<[OutcomeBranch; 4]> {
    let total = kron(&ComplexMatrix::projector(eta)?, rho.matrix())?;
    let mut out = Vec::with_capacity(4);
    for (i, k) in lifted.iter().enumerate() {
        let post = &(k * &total) * &k.adjoint();
        let probability = post.trace().re;
        let corrected_state = if probability < ZERO_PROBABILITY {
            None
        } else {
            let bob = partial_trace(&post, &[false, false, true], &QUBITS)?.scale(1.0 / probability);
            Some(bob.conjugate_by(&corr.unitaries[i]))
        };
        out.push(OutcomeBranch {
            probability,
            corrected_state,
        });
    }
    Ok(out.try_into().expect("four outcomes"))
}

/// Full sandwich `(√M_i ⊗ I) (|η⟩⟨η| ⊗ ρ) (√M_i ⊗ I)†` for one input.
pub fn outcome_branches(
    rho: &DensityMatrix,
    fam: &PovmFamily,
    corr: &CorrectionSet,
    eta: &[Complex64; 2],
) -> Result<[OutcomeBranch; 4]> {
    require_resource(rho)?;
    branches_with(rho, &lifted_operators(fam)?, corr, eta)
}

/// `Σ_i p_i U_i ρ_i^B U_i†` from the branches of a single input.
pub fn averaged_receiver(branches: &[OutcomeBranch; 4]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(2).expect("2x2");
    for b in branches {
        if let Some(state) = &b.corrected_state {
            acc = &acc + &state.scale(b.probability);
        }
    }
    acc
}

pub fn run_round(rho: &DensityMatrix, fam: &PovmFamily, corr: &CorrectionSet) -> Result<RoundResult> {
    require_resource(rho)?;
    let lifted = lifted_operators(fam)?;

    let design = pauli_design_states();
    let weight = 1.0 / design.len() as f64;
    let mut probs = [0.0; 4];
    let mut fidelity = 0.0;
    for eta in &design {
        let branches = branches_with(rho, &lifted, corr, eta)?;
        for (slot, b) in probs.iter_mut().zip(&branches) {
            *slot += weight * b.probability;
        }
        fidelity += weight * averaged_receiver(&branches).expectation(eta, eta).re;
    }

    // The Haar average of |η⟩⟨η| is I/2, and the map is linear in the input.
    let averaged_input = kron(&linalg::identity2().scale(0.5), rho.matrix())?;
    let mut effective = ComplexMatrix::zeros(4)?;
    for k in &lifted {
        let post = &(k * &averaged_input) * &k.adjoint();
        effective = &effective + &partial_trace(&post, &[false, true, true], &QUBITS)?;
    }
    let effective_state = DensityMatrix::new(effective)?;
    let effective_concurrence = concurrence(&effective_state)?;
    Ok(RoundResult {
        probs,
        fidelity,
        effective_state,
        effective_concurrence,
    })
}

/// Receiver fidelity for a single input, from
/// `ρ_i^B ∝ Tr_{A′A}[(M_i ⊗ I)(|η⟩⟨η| ⊗ ρ)]`.
fn single_input_fidelity(
    rho: &ComplexMatrix,
    elements: &[ComplexMatrix; 4],
    corr: &CorrectionSet,
    eta: &[Complex64; 2],
) -> f64 {
    let mut bob = [[ZERO; 2]; 2];
    for (m, u) in elements.iter().zip(&corr.unitaries) {
        // g[c][a] = Σ conj(η[a2]) M[(a2, c), (a1, a)] η[a1]
        let mut g = [[ZERO; 2]; 2];
        for (c, row) in g.iter_mut().enumerate() {
            for (a, slot) in row.iter_mut().enumerate() {
                let mut acc = ZERO;
                for a2 in 0..2 {
                    for a1 in 0..2 {
                        acc += eta[a2].conj() * m[(2 * a2 + c, 2 * a1 + a)] * eta[a1];
                    }
                }
                *slot = acc;
            }
        }
        let mut branch = [[ZERO; 2]; 2];
        for (b, row) in branch.iter_mut().enumerate() {
            for (b2, slot) in row.iter_mut().enumerate() {
                let mut acc = ZERO;
                for a in 0..2 {
                    for c in 0..2 {
                        acc += g[c][a] * rho[(2 * a + b, 2 * c + b2)];
                    }
                }
                *slot = acc;
            }
        }
        for r in 0..2 {
            for s in 0..2 {
                let mut acc = ZERO;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += u[(r, k)] * branch[k][l] * u[(s, l)].conj();
                    }
                }
                bob[r][s] += acc;
            }
        }
    }
    let mut f = ZERO;
    for r in 0..2 {
        for s in 0..2 {
            f += eta[r].conj() * bob[r][s] * eta[s];
        }
    }
    f.re
}

fn haar_input(seed: u64, index: u64) -> [Complex64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut draw = || rng.sample::<f64, _>(StandardNormal);
    let a = Complex64::new(draw(), draw());
    let b = Complex64::new(draw(), draw());
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    [a / norm, b / norm]
}

/// Monte-Carlo estimate of the Haar-averaged fidelity.
///
/// Sample `k` is drawn from a ChaCha stream keyed on `(seed, k)`, so the
/// estimate is reproducible for any thread count.
pub fn run_round_mc(
    rho: &DensityMatrix,
    fam: &PovmFamily,
    corr: &CorrectionSet,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    require_resource(rho)?;
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::Domain(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    let elements = fam.elements();
    let m = rho.matrix();
    let values: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| single_input_fidelity(m, elements, corr, &haar_input(seed, k)))
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_samples,
    })
}

fn check_sharpness(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("sharpness {lambda} is outside (0, 1]")))
    }
}

/// Mixing probability left on a maximally entangled resource after one
/// depolarized measurement of sharpness `λ`: `½(1 - λ + √((1-λ)(1+3λ)))`.
pub fn werner_decay(lambda: f64) -> f64 {
    0.5 * (1.0 - lambda + ((1.0 - lambda) * (1.0 + 3.0 * lambda)).max(0.0).sqrt())
}

/// Fidelity of a depolarized round at sharpness `λ` on a Werner or X-state
/// resource.
pub fn fidelity_closed_form(spec: &ResourceSpec, lambda: f64) -> Result<f64> {
    check_sharpness(lambda)?;
    spec.check()?;
    match *spec {
        ResourceSpec::Werner { p } => Ok((1.0 + p * lambda) / 2.0),
        ResourceSpec::PureChi { .. } | ResourceSpec::XState { .. } => {
            let (alpha, q) = spec.x_params().expect("closed-form family");
            let pure = 0.5 * (1.0 - lambda)
                + (2.0 / 3.0) * lambda * (1.0 + (alpha * (1.0 - alpha)).sqrt());
            Ok(q * pure + (1.0 - q) / 2.0)
        }
        ResourceSpec::Explicit(_) => Err(Error::UnsupportedFamily("explicit matrix".into())),
    }
}

/// Resource left after a depolarized round at sharpness `λ`; the family is
/// preserved and only the mixing weight shrinks by `werner_decay(λ)`.
pub fn effective_closed_form(spec: &ResourceSpec, lambda: f64) -> Result<ResourceSpec> {
    check_sharpness(lambda)?;
    spec.check()?;
    let decay = werner_decay(lambda);
    match *spec {
        ResourceSpec::Werner { p } => Ok(ResourceSpec::Werner { p: p * decay }),
        ResourceSpec::PureChi { alpha } => Ok(ResourceSpec::XState { alpha, q: decay }),
        ResourceSpec::XState { alpha, q } => Ok(ResourceSpec::XState {
            alpha,
            q: q * decay,
        }),
        ResourceSpec::Explicit(_) => Err(Error::UnsupportedFamily("explicit matrix".into())),
    }
}
