//! Repeated rounds on one evolving resource at a fixed fidelity target.
//!
//! Each round uses the depolarized family with the smallest sharpness that
//! reaches the target, so as little entanglement as possible is spent. The
//! number of rounds completed before the target becomes unreachable is the
//! maximal reusability number (MRN).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{PovmFamily, PovmKind};
use crate::protocol::{
    effective_closed_form, fidelity_closed_form, run_round, werner_decay, CorrectionSet, RoundResult,
};
use crate::states::{
    concurrence, is_entangled, materialize, xstate_concurrence, DensityMatrix, ResourceSpec,
};

/// Margin by which a strict round must beat the target.
pub const STRICT_EPS: f64 = 1e-9;

pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-6;

const AT_LEAST_SLACK: f64 = 1e-12;
const SHARPNESS_SLACK: f64 = 1e-12;
const MAX_ROUNDS: usize = 100_000;
const BISECTION_WIDTH: f64 = 1e-15;
const MONOTONE_PROBES: [f64; 2] = [1e-3, 0.5];
const MONOTONE_SLACK: f64 = 1e-12;
const SCAN_GRID: usize = 4096;
const ALPHA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strictness {
    /// Fidelity must exceed the target by more than [`STRICT_EPS`].
    #[default]
    Strict,
    /// Fidelity equal to the target is enough.
    AtLeast,
}

impl Strictness {
    pub fn admits(self, achievable: f64, target: f64) -> bool {
        match self {
            Strictness::Strict => achievable > target + STRICT_EPS,
            Strictness::AtLeast => achievable + AT_LEAST_SLACK >= target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sharpness {
    Reachable(f64),
    Unreachable,
}

impl Sharpness {
    pub fn value(self) -> Option<f64> {
        match self {
            Sharpness::Reachable(l) => Some(l),
            Sharpness::Unreachable => None,
        }
    }
}

fn check_target(target_f: f64) -> Result<()> {
    if target_f > 0.5 && target_f <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("target fidelity {target_f} is outside (1/2, 1]")))
    }
}

/// Smallest sharpness at which a depolarized round on `spec` reaches
/// `target_f`.
pub fn solve_sharpness(spec: &ResourceSpec, target_f: f64) -> Result<Sharpness> {
    check_target(target_f)?;
    spec.check()?;
    let lambda = match *spec {
        ResourceSpec::Werner { p } => {
            if p <= 0.0 {
                return Ok(Sharpness::Unreachable);
            }
            (2.0 * target_f - 1.0) / p
        }
        ResourceSpec::PureChi { .. } | ResourceSpec::XState { .. } => {
            let (alpha, q) = spec.x_params().expect("closed-form family");
            // f(λ) = 1/2 + q·λ·(1 + 4√(α(1-α)))/6
            let slope = q * (1.0 + 4.0 * (alpha * (1.0 - alpha)).sqrt()) / 6.0;
            if slope <= 0.0 {
                return Ok(Sharpness::Unreachable);
            }
            (target_f - 0.5) / slope
        }
        ResourceSpec::Explicit(_) => {
            return Err(Error::UnsupportedFamily("explicit matrix".into()));
        }
    };
    if lambda > 1.0 + SHARPNESS_SLACK {
        Ok(Sharpness::Unreachable)
    } else {
        Ok(Sharpness::Reachable(lambda.min(1.0)))
    }
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub sharpness: f64,
    pub fidelity: f64,
    /// Resource left after this round.
    pub state: ResourceSpec,
    pub concurrence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    /// The remaining resource is entangled but cannot reach the target.
    TargetUnreachable,
    /// The remaining resource is separable.
    StateSeparable,
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminalReason::TargetUnreachable => "target-unreachable",
            TerminalReason::StateSeparable => "state-separable-for-target",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RecycleTrace {
    pub initial: ResourceSpec,
    pub target_f: f64,
    pub strictness: Strictness,
    pub rounds: Vec<RoundRecord>,
    pub mrn: usize,
    pub terminal_reason: TerminalReason,
    /// Whether the resource handed to round `mrn + 1` is entangled.
    pub next_state_entangled: bool,
    pub next_state_concurrence: f64,
}

impl RecycleTrace {
    pub fn sharpness_schedule(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.sharpness).collect()
    }

    pub fn final_state(&self) -> &ResourceSpec {
        self.rounds.last().map_or(&self.initial, |r| &r.state)
    }
}

fn spec_concurrence(spec: &ResourceSpec) -> Result<f64> {
    match spec {
        ResourceSpec::Explicit(rho) => concurrence(rho),
        closed => xstate_concurrence(&materialize(closed)?),
    }
}

fn finish(
    initial: &ResourceSpec,
    target_f: f64,
    strictness: Strictness,
    rounds: Vec<RoundRecord>,
) -> Result<RecycleTrace> {
    let last = rounds.last().map_or(initial, |r| &r.state);
    let next_state_concurrence = match rounds.last() {
        Some(r) => r.concurrence,
        None => spec_concurrence(last)?,
    };
    let next_state_entangled = is_entangled(next_state_concurrence);
    Ok(RecycleTrace {
        initial: initial.clone(),
        target_f,
        strictness,
        mrn: rounds.len(),
        rounds,
        terminal_reason: if next_state_entangled {
            TerminalReason::TargetUnreachable
        } else {
            TerminalReason::StateSeparable
        },
        next_state_entangled,
        next_state_concurrence,
    })
}

/// Runs rounds until the target can no longer be met. Closed-form families
/// use the Werner/X-state recursions; explicit matrices go through the full
/// round engine.
pub fn mrn(spec: &ResourceSpec, target_f: f64, strictness: Strictness) -> Result<RecycleTrace> {
    check_target(target_f)?;
    spec.check()?;
    match spec {
        ResourceSpec::Explicit(rho) => mrn_engine(spec, rho.clone(), target_f, strictness),
        _ => mrn_closed_form(spec, target_f, strictness),
    }
}

/// Same as [`mrn`] but always uses the round engine, materialising
/// closed-form resources first.
pub fn mrn_generic(spec: &ResourceSpec, target_f: f64, strictness: Strictness) -> Result<RecycleTrace> {
    check_target(target_f)?;
    let rho = materialize(spec)?;
    mrn_engine(spec, rho, target_f, strictness)
}

fn mrn_closed_form(spec: &ResourceSpec, target_f: f64, strictness: Strictness) -> Result<RecycleTrace> {
    let mut state = spec.clone();
    let mut rounds = Vec::new();
    loop {
        if rounds.len() >= MAX_ROUNDS {
            return Err(Error::RoundLimit(MAX_ROUNDS));
        }
        if !strictness.admits(fidelity_closed_form(&state, 1.0)?, target_f) {
            break;
        }
        let Sharpness::Reachable(lambda) = solve_sharpness(&state, target_f)? else {
            break;
        };
        let fidelity = fidelity_closed_form(&state, lambda)?;
        let next = effective_closed_form(&state, lambda)?;
        let concurrence = spec_concurrence(&next)?;
        rounds.push(RoundRecord {
            sharpness: lambda,
            fidelity,
            state: next.clone(),
            concurrence,
        });
        state = next;
    }
    finish(spec, target_f, strictness, rounds)
}

fn engine_round(rho: &DensityMatrix, lambda: f64, corr: &CorrectionSet) -> Result<RoundResult> {
    run_round(rho, &PovmFamily::build(PovmKind::Depolarized, lambda)?, corr)
}

fn mrn_engine(
    initial: &ResourceSpec,
    rho: DensityMatrix,
    target_f: f64,
    strictness: Strictness,
) -> Result<RecycleTrace> {
    let corr = CorrectionSet::standard();
    let mut state = rho;
    let mut rounds = Vec::new();
    loop {
        if rounds.len() >= MAX_ROUNDS {
            return Err(Error::RoundLimit(MAX_ROUNDS));
        }
        let sharp = engine_round(&state, 1.0, &corr)?;
        if !strictness.admits(sharp.fidelity, target_f) {
            break;
        }
        let low = engine_round(&state, MONOTONE_PROBES[0], &corr)?.fidelity;
        let mid = engine_round(&state, MONOTONE_PROBES[1], &corr)?.fidelity;
        if low > mid + MONOTONE_SLACK || mid > sharp.fidelity + MONOTONE_SLACK {
            return Err(Error::NonMonotone(format!(
                "f(1e-3) = {low}, f(0.5) = {mid}, f(1) = {}",
                sharp.fidelity
            )));
        }

        // f(0+) = 1/2 < target, f(1) ≥ target.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut best = sharp;
        while hi - lo > BISECTION_WIDTH {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            let r = engine_round(&state, m, &corr)?;
            if r.fidelity >= target_f {
                hi = m;
                best = r;
            } else {
                lo = m;
            }
        }
        rounds.push(RoundRecord {
            sharpness: hi,
            fidelity: best.fidelity,
            state: ResourceSpec::Explicit(best.effective_state.clone()),
            concurrence: best.effective_concurrence,
        });
        state = best.effective_state;
    }
    finish(initial, target_f, strictness, rounds)
}

/// Entanglement of the resource handed to round `mrn + 1`.
pub fn next_round_entanglement(trace: &RecycleTrace) -> (bool, f64) {
    (trace.next_state_entangled, trace.next_state_concurrence)
}

/// First-round fidelity target above which a maximally entangled resource
/// is left separable after one round.
pub fn no_reuse_threshold(tol: f64) -> Result<f64> {
    let bell = ResourceSpec::Werner { p: 1.0 };
    let entangled_after_one = |f: f64| -> Result<bool> {
        let lambda = solve_sharpness(&bell, f)?
            .value()
            .ok_or_else(|| Error::Domain(format!("target {f} unreachable")))?;
        Ok(spec_concurrence(&effective_closed_form(&bell, lambda)?)? > 0.0)
    };
    let (mut lo, mut hi) = (2.0 / 3.0, 1.0);
    while hi - lo > tol {
        let m = 0.5 * (lo + hi);
        if entangled_after_one(m)? {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Quantity swept when locating MRN boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanVariable {
    /// Per-round fidelity target over `[2/3, 1]` for a `Werner(p)` resource.
    Fidelity { werner_p: f64 },
    /// Schmidt weight `α` over `(0, 1/2]` of a pure resource at a fixed target.
    Alpha { target_f: f64 },
}

impl ScanVariable {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            ScanVariable::Fidelity { .. } => (2.0 / 3.0, 1.0),
            ScanVariable::Alpha { .. } => (ALPHA_FLOOR, 0.5),
        }
    }

    pub fn trace_at(&self, x: f64) -> Result<RecycleTrace> {
        match *self {
            ScanVariable::Fidelity { werner_p } => {
                mrn(&ResourceSpec::Werner { p: werner_p }, x, Strictness::Strict)
            }
            ScanVariable::Alpha { target_f } => {
                mrn(&ResourceSpec::PureChi { alpha: x }, target_f, Strictness::Strict)
            }
        }
    }

    fn key_at(&self, x: f64) -> Result<(usize, bool)> {
        let t = self.trace_at(x)?;
        Ok((t.mrn, t.next_state_entangled))
    }
}

/// Grid-then-bisect search for the intervals of a scan variable on which the
/// MRN (and optionally next-round entanglement) takes a given value.
#[derive(Debug, Clone)]
pub struct BoundaryScanner {
    scan: ScanVariable,
    tol: f64,
    grid: Vec<f64>,
    keys: Vec<(usize, bool)>,
}

impl BoundaryScanner {
    pub fn new(scan: ScanVariable, tol: f64) -> Result<Self> {
        if tol.is_nan() || tol < 1e-10 {
            return Err(Error::Domain(format!("boundary tolerance {tol} is below 1e-10")));
        }
        let (lo, hi) = scan.domain();
        let grid: Vec<f64> = (0..=SCAN_GRID)
            .map(|k| {
                if k == SCAN_GRID {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / SCAN_GRID as f64
                }
            })
            .collect();
        let keys = grid
            .par_iter()
            .map(|&x| scan.key_at(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scan,
            tol,
            grid,
            keys,
        })
    }

    pub fn scan(&self) -> ScanVariable {
        self.scan
    }

    /// Interval of the scan variable on which the MRN equals `mrn_value`.
    pub fn mrn_range(&self, mrn_value: usize) -> Result<(f64, f64)> {
        self.range_where(|(n, _)| n == mrn_value)?
            .ok_or(Error::MrnNotAttained(mrn_value))
    }

    /// Sub-interval of [`Self::mrn_range`] on which the state left for round
    /// `mrn_value + 1` is still entangled, if any.
    pub fn entangled_range(&self, mrn_value: usize) -> Result<Option<(f64, f64)>> {
        self.mrn_range(mrn_value)?;
        self.range_where(|(n, e)| n == mrn_value && e)
    }

    fn range_where(&self, pred: impl Fn((usize, bool)) -> bool + Copy) -> Result<Option<(f64, f64)>> {
        let Some(first) = self.keys.iter().position(|&k| pred(k)) else {
            return Ok(None);
        };
        let last = self.keys.iter().rposition(|&k| pred(k)).expect("found above");
        let low = if first == 0 {
            self.grid[0]
        } else {
            self.bisect(self.grid[first], self.grid[first - 1], pred)?
        };
        let high = if last + 1 == self.grid.len() {
            self.grid[last]
        } else {
            self.bisect(self.grid[last], self.grid[last + 1], pred)?
        };
        Ok(Some((low, high)))
    }

    /// Narrows `[inside, outside]` to `tol` and returns the inside end, or
    /// the domain end when the boundary cannot be told apart from it.
    fn bisect(&self, mut inside: f64, mut outside: f64, pred: impl Fn((usize, bool)) -> bool) -> Result<f64> {
        while (outside - inside).abs() > self.tol {
            let m = 0.5 * (inside + outside);
            if pred(self.scan.key_at(m)?) {
                inside = m;
            } else {
                outside = m;
            }
        }
        let (lo, hi) = self.scan.domain();
        Ok(if (inside - lo).abs() <= self.tol {
            lo
        } else if (hi - inside).abs() <= self.tol {
            hi
        } else {
            inside
        })
    }
}

pub fn mrn_boundary(scan: ScanVariable, mrn_value: usize, tol: f64) -> Result<(f64, f64)> {
    BoundaryScanner::new(scan, tol)?.mrn_range(mrn_value)
}

/// Product of per-round decay factors, `Π werner_decay(λ_i)`.
pub fn cumulative_mixing(schedule: &[f64]) -> f64 {
    schedule.iter().map(|&l| werner_decay(l)).product()
}
