//! Resource states and two-qubit entanglement diagnostics.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, herm_eig, kron, psd_sqrt, ComplexMatrix, HERMITIAN_TOL, ZERO};

pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-10;

/// A state counts as entangled only when its concurrence exceeds this.
pub const ENTANGLED_EPS: f64 = 1e-9;

/// Eigenvalues of the Wootters product in `[-CONCURRENCE_CLAMP, 0)` are
/// treated as zero.
const CONCURRENCE_CLAMP: f64 = 1e-12;

/// Relative floor below which eigenvalues of the Wootters product are
/// rounding noise. Taking square roots would otherwise turn a `1e-17`
/// residue into an `3e-9` error in the concurrence of rank-deficient states.
const CONCURRENCE_NOISE_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Hermitian, unit-trace, positive semidefinite matrix of dimension 2, 4 or 8.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let residual = mat.hermiticity_residual();
        if residual > HERMITIAN_TOL {
            return Err(Error::NotHermitian { residual });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = herm_eig(&mat)?.min_value();
        if min < -EIGEN_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self(mat))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    fn require_two_qubit(&self) -> Result<()> {
        if self.dim() != 4 {
            return Err(Error::Shape(format!(
                "expected a two-qubit state, got dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Symbolic description of a shared resource.
#[derive(Debug, Clone, PartialEq)]
pub enum ResourceSpec {
    /// `p|B1⟩⟨B1| + (1-p)/4 I`.
    Werner { p: f64 },
    /// `√α|00⟩ + √(1-α)|11⟩`.
    PureChi { alpha: f64 },
    /// `q|χ⟩⟨χ| + (1-q)·[I/2 ⊗ diag(α, 1-α)]`.
    XState { alpha: f64, q: f64 },
    Explicit(DensityMatrix),
}

impl ResourceSpec {
    pub fn werner(p: f64) -> Result<Self> {
        let spec = Self::Werner { p };
        spec.check()?;
        Ok(spec)
    }

    pub fn pure_chi(alpha: f64) -> Result<Self> {
        let spec = Self::PureChi { alpha };
        spec.check()?;
        Ok(spec)
    }

    pub fn x_state(alpha: f64, q: f64) -> Result<Self> {
        let spec = Self::XState { alpha, q };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        let open = |v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("alpha = {v} is outside (0, 1)")))
            }
        };
        match *self {
            Self::Werner { p } => unit("p", p),
            Self::PureChi { alpha } => open(alpha),
            Self::XState { alpha, q } => open(alpha).and_then(|_| unit("q", q)),
            Self::Explicit(ref rho) => rho.require_two_qubit(),
        }
    }

    /// `(α, q)` for the closed-form families, with Werner mapped to `α = 1/2`.
    pub fn x_params(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Werner { p } => Some((0.5, p)),
            Self::PureChi { alpha } => Some((alpha, 1.0)),
            Self::XState { alpha, q } => Some((alpha, q)),
            Self::Explicit(_) => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        self.x_params().is_some()
    }
}

/// `|B_i⟩` for `i = 1..4` in the order Φ+, Φ-, Ψ+, Ψ-.
pub fn bell_ket(i: usize) -> Result<[Complex64; 4]> {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    match i {
        1 => Ok([s, ZERO, ZERO, s]),
        2 => Ok([s, ZERO, ZERO, -s]),
        3 => Ok([ZERO, s, s, ZERO]),
        4 => Ok([ZERO, s, -s, ZERO]),
        _ => Err(Error::Domain(format!("Bell index {i} is outside 1..=4"))),
    }
}

pub fn bell_projector(i: usize) -> Result<ComplexMatrix> {
    ComplexMatrix::projector(&bell_ket(i)?)
}

pub fn bell_state(i: usize) -> Result<DensityMatrix> {
    DensityMatrix::new(bell_projector(i)?)
}

pub fn chi_ket(alpha: f64) -> [Complex64; 4] {
    [
        Complex64::new(alpha.sqrt(), 0.0),
        ZERO,
        ZERO,
        Complex64::new((1.0 - alpha).sqrt(), 0.0),
    ]
}

pub fn materialize(spec: &ResourceSpec) -> Result<DensityMatrix> {
    spec.check()?;
    let mat = match *spec {
        ResourceSpec::Werner { p } => {
            &bell_projector(1)?.scale(p) + &linalg::identity4().scale((1.0 - p) / 4.0)
        }
        ResourceSpec::PureChi { alpha } => x_state_matrix(alpha, 1.0)?,
        ResourceSpec::XState { alpha, q } => x_state_matrix(alpha, q)?,
        ResourceSpec::Explicit(ref rho) => return Ok(rho.clone()),
    };
    DensityMatrix::new(mat)
}

fn x_state_matrix(alpha: f64, q: f64) -> Result<ComplexMatrix> {
    let pure = ComplexMatrix::projector(&chi_ket(alpha))?;
    let marginal = ComplexMatrix::diag(&[alpha, 1.0 - alpha])?;
    let product = kron(&linalg::identity2().scale(0.5), &marginal)?;
    Ok(&pure.scale(q) + &product.scale(1.0 - q))
}

/// `(σy ⊗ σy) ρ* (σy ⊗ σy)`.
pub fn spin_flip(rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let yy = kron(&linalg::sigma_y(), &linalg::sigma_y())?;
    Ok(&(&yy * &rho.conj()) * &yy)
}

/// Wootters concurrence through the Hermitian product `√ρ ρ̃ √ρ`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    rho.require_two_qubit()?;
    let root = psd_sqrt(rho.matrix())?;
    let flipped = spin_flip(rho.matrix())?;
    let product = (&(&root * &flipped) * &root).hermitian_part();
    let eig = herm_eig(&product)?;
    let top = eig.values[0].max(0.0);
    let mut mu = Vec::with_capacity(4);
    for &w in &eig.values {
        if w < -CONCURRENCE_CLAMP {
            return Err(Error::NotPsd { min_eigenvalue: w });
        }
        let w = if w <= CONCURRENCE_NOISE_FLOOR * top { 0.0 } else { w };
        mu.push(w.sqrt());
    }
    Ok((mu[0] - mu[1] - mu[2] - mu[3]).max(0.0))
}

/// Closed-form concurrence for X-shaped states.
pub fn xstate_concurrence(rho: &DensityMatrix) -> Result<f64> {
    rho.require_two_qubit()?;
    let m = rho.matrix();
    if !m.is_x_shaped(1e-12) {
        return Err(Error::Shape("state is not X-shaped".into()));
    }
    let d = |i: usize| m[(i, i)].re.max(0.0);
    let outer = m[(0, 3)].norm() - (d(1) * d(2)).sqrt();
    let inner = m[(1, 2)].norm() - (d(0) * d(3)).sqrt();
    Ok(2.0 * outer.max(inner).max(0.0))
}

pub fn is_entangled(concurrence: f64) -> bool {
    concurrence > ENTANGLED_EPS
}

/// Partial transpose on the second qubit.
pub fn partial_transpose_b(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.dim() != 4 {
        return Err(Error::Shape("partial transpose needs a two-qubit matrix".into()));
    }
    ComplexMatrix::from_fn(4, |r, c| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (c / 2, c % 2);
        m[(2 * a + b2, 2 * a2 + b)]
    })
}

pub fn is_ppt(rho: &DensityMatrix) -> Result<bool> {
    let pt = partial_transpose_b(rho.matrix())?;
    Ok(herm_eig(&pt)?.min_value() >= -EIGEN_TOL)
}
