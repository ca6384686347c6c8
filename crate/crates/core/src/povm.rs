//! Weakened Bell measurements on the (A′, A) pair.
//!
//! Every family interpolates between a trivial measurement and the
//! projective Bell measurement, which is recovered at sharpness `λ = 1`.
//! Elements are stored in Bell-index order `B1..B4`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, herm_eig, kron, psd_sqrt, ComplexMatrix, ONE};
use crate::states::bell_projector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PovmKind {
    /// `λ|B_i⟩⟨B_i| + (1-λ)/4 I`.
    Depolarized,
    /// `λ|B_i⟩⟨B_i| + (1-λ)(σz⊗I)|B_i⟩⟨B_i|(σz⊗I)`.
    PhaseFlip,
    /// `λ|B_i⟩⟨B_i| + (1-λ)(σx⊗I)|B_i⟩⟨B_i|(σx⊗I)`.
    BitFlip,
    /// `λ|B_i⟩⟨B_i| + (1-λ)/2 Π_i`, where `Π_i` projects onto `{|01⟩, |10⟩}`
    /// for `i ∈ {1, 2}` and onto `{|00⟩, |11⟩}` for `i ∈ {3, 4}`.
    OrthoSupport,
}

impl PovmKind {
    pub const ALL: [PovmKind; 4] = [
        PovmKind::Depolarized,
        PovmKind::PhaseFlip,
        PovmKind::BitFlip,
        PovmKind::OrthoSupport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PovmKind::Depolarized => "depolarized",
            PovmKind::PhaseFlip => "phase-flip",
            PovmKind::BitFlip => "bit-flip",
            PovmKind::OrthoSupport => "ortho-support",
        }
    }
}

impl fmt::Display for PovmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PovmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PovmKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown POVM family '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct PovmFamily {
    kind: PovmKind,
    sharpness: f64,
    elements: [ComplexMatrix; 4],
}

fn basis_projector(bits: &[usize]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4).expect("4x4");
    for &b in bits {
        m[(b, b)] = ONE;
    }
    m
}

fn local_conjugation(p: &ComplexMatrix, local: &ComplexMatrix) -> Result<ComplexMatrix> {
    let u = kron(local, &linalg::identity2())?;
    Ok(p.conjugate_by(&u))
}

impl PovmFamily {
    pub fn build(kind: PovmKind, sharpness: f64) -> Result<Self> {
        if !(sharpness > 0.0 && sharpness <= 1.0) {
            return Err(Error::Domain(format!(
                "sharpness {sharpness} is outside (0, 1]"
            )));
        }
        let l = sharpness;
        let mut elements = Vec::with_capacity(4);
        for i in 1..=4 {
            let bell = bell_projector(i)?;
            let noise = match kind {
                PovmKind::Depolarized => linalg::identity4().scale(0.25),
                PovmKind::PhaseFlip => local_conjugation(&bell, &linalg::sigma_z())?,
                PovmKind::BitFlip => local_conjugation(&bell, &linalg::sigma_x())?,
                PovmKind::OrthoSupport if i <= 2 => basis_projector(&[1, 2]).scale(0.5),
                PovmKind::OrthoSupport => basis_projector(&[0, 3]).scale(0.5),
            };
            elements.push(&bell.scale(l) + &noise.scale(1.0 - l));
        }
        let elements: [ComplexMatrix; 4] = elements.try_into().expect("four elements");
        Ok(Self {
            kind,
            sharpness,
            elements,
        })
    }

    /// Wraps raw elements without any checks; run [`validate`] on the result.
    pub fn from_elements(kind: PovmKind, sharpness: f64, elements: [ComplexMatrix; 4]) -> Self {
        Self {
            kind,
            sharpness,
            elements,
        }
    }

    pub fn kind(&self) -> PovmKind {
        self.kind
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    pub fn elements(&self) -> &[ComplexMatrix; 4] {
        &self.elements
    }

    /// Square roots `√M_i`, the measurement operators of the sandwich.
    pub fn measurement_operators(&self) -> Result<[ComplexMatrix; 4]> {
        let roots = self
            .elements
            .iter()
            .map(psd_sqrt)
            .collect::<Result<Vec<_>>>()?;
        Ok(roots.try_into().expect("four elements"))
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub kind: PovmKind,
    pub sharpness: f64,
    /// `max|Σ M_i - I|`.
    pub completeness_residual: f64,
    /// Largest `max|M_i - M_i†|`.
    pub hermiticity_residual: f64,
    /// Smallest eigenvalue of the Hermitian part of each element.
    pub min_eigenvalues: [f64; 4],
    /// `max_i max|M_i(λ=1) - |B_i⟩⟨B_i||` for this family kind.
    pub projective_limit_residual: f64,
}

impl ValidationReport {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self, completeness_tol: f64, psd_tol: f64) -> bool {
        self.completeness_residual <= completeness_tol
            && self.hermiticity_residual <= linalg::HERMITIAN_TOL
            && self.min_eigenvalue() >= -psd_tol
            && self.projective_limit_residual <= 1e-12
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family               {}", self.kind)?;
        writeln!(f, "sharpness            {}", self.sharpness)?;
        writeln!(f, "completeness         {:.3e}", self.completeness_residual)?;
        writeln!(f, "hermiticity          {:.3e}", self.hermiticity_residual)?;
        for (i, w) in self.min_eigenvalues.iter().enumerate() {
            writeln!(f, "min eigenvalue M{}    {:+.3e}", i + 1, w)?;
        }
        write!(f, "projective limit     {:.3e}", self.projective_limit_residual)
    }
}

pub fn validate(fam: &PovmFamily) -> ValidationReport {
    let mut sum = ComplexMatrix::zeros(4).expect("4x4");
    for m in &fam.elements {
        sum = &sum + m;
    }
    let completeness_residual = sum.max_abs_diff(&linalg::identity4());
    let hermiticity_residual = fam
        .elements
        .iter()
        .map(ComplexMatrix::hermiticity_residual)
        .fold(0.0, f64::max);
    let mut min_eigenvalues = [0.0; 4];
    for (slot, m) in min_eigenvalues.iter_mut().zip(&fam.elements) {
        *slot = herm_eig(&m.hermitian_part())
            .map(|e| e.min_value())
            .unwrap_or(f64::NAN);
    }
    let projective_limit_residual = PovmFamily::build(fam.kind, 1.0)
        .map(|sharp| {
            sharp
                .elements
                .iter()
                .enumerate()
                .map(|(i, m)| m.max_abs_diff(&bell_projector(i + 1).expect("valid index")))
                .fold(0.0, f64::max)
        })
        .unwrap_or(f64::NAN);
    ValidationReport {
        kind: fam.kind,
        sharpness: fam.sharpness,
        completeness_residual,
        hermiticity_residual,
        min_eigenvalues,
        projective_limit_residual,
    }
}

/// Rank of a PSD matrix, counting eigenvalues above `tol`.
pub fn numerical_rank(m: &ComplexMatrix, tol: f64) -> Result<usize> {
    Ok(herm_eig(m)?.values.iter().filter(|&&w| w > tol).count())
}
