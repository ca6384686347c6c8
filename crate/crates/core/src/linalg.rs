//! Dense complex linear algebra for one, two and three qubits.
//!
//! Matrices are stored row-major. Only dimensions 2, 4 and 8 are accepted on
//! public paths; the partial trace treats every subsystem as a qubit with the
//! first listed subsystem as the most significant bit of the basis index.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for Hermiticity checks in constructors and the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as zero by [`psd_sqrt`].
pub const PSD_CLAMP: f64 = 1e-10;

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;
const MAX_DIM: usize = 8;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 | 8 => Ok(()),
        d if d > MAX_DIM => Err(Error::DimensionOverflow(d)),
        d => Err(Error::Shape(format!("dimension {d} is not 2, 4 or 8"))),
    }
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: vec![ZERO; dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        Ok(m)
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a
    /// valid `dim * dim`.
    pub fn from_row_major(entries: Vec<Complex64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(Error::Shape(format!("{} entries is not square", entries.len())));
        }
        check_dim(dim)?;
        Ok(Self { dim, data: entries })
    }

    pub fn from_real_rows<const N: usize>(rows: [[f64; N]; N]) -> Result<Self> {
        Self::from_fn(N, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        Self::from_fn(values.len(), |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Hermitian constructor: rejects inputs with `max|M - M†| > 1e-12`.
    pub fn hermitian(entries: Vec<Complex64>) -> Result<Self> {
        let m = Self::from_row_major(entries)?;
        let residual = m.hermiticity_residual();
        if residual > HERMITIAN_TOL {
            return Err(Error::NotHermitian { residual });
        }
        Ok(m)
    }

    /// `|v⟩⟨v|` for an (unnormalised) ket.
    pub fn projector(ket: &[Complex64]) -> Result<Self> {
        Self::from_fn(ket.len(), |i, j| ket[i] * ket[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        self.adjoint().conj()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_complex(Complex64::new(s, 0.0))
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `(M + M†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale(0.5)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise modulus of `self - other`; dimensions must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨u|M|v⟩`.
    pub fn expectation(&self, bra: &[Complex64], ket: &[Complex64]) -> Complex64 {
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += self[(i, j)] * ket[j];
            }
            acc += bra[i].conj() * row;
        }
        acc
    }

    /// `U M U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    /// True when every entry off the diagonal and anti-diagonal is below `tol`.
    pub fn is_x_shaped(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || i + j == n - 1 || self[(i, j)].norm() <= tol))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix product");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        ComplexMatrix { dim: n, data: out }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix sum");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix difference");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows([[0.0, 1.0], [1.0, 0.0]]).expect("2x2")
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_major(vec![ZERO, -I, I, ZERO]).expect("2x2")
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows([[1.0, 0.0], [0.0, -1.0]]).expect("2x2")
}

pub fn identity2() -> ComplexMatrix {
    ComplexMatrix::identity(2).expect("2x2")
}

pub fn identity4() -> ComplexMatrix {
    ComplexMatrix::identity(4).expect("4x4")
}

/// Kronecker product; entry `(i·db + k, j·db + l) = a(i,j)·b(k,l)`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (da, db) = (a.dim, b.dim);
    let dim = da * db;
    if dim > MAX_DIM {
        return Err(Error::DimensionOverflow(dim));
    }
    ComplexMatrix::from_fn(dim, |r, c| a[(r / db, c / db)] * b[(r % db, c % db)])
}

/// Traces out every qubit whose `keep` flag is false.
///
/// `dims` lists the subsystem dimensions (all 2) in significance order and
/// `keep` must select a nonempty proper subset.
pub fn partial_trace(m: &ComplexMatrix, keep: &[bool], dims: &[usize]) -> Result<ComplexMatrix> {
    if keep.len() != dims.len() {
        return Err(Error::Shape(format!(
            "mask has {} entries but {} subsystems given",
            keep.len(),
            dims.len()
        )));
    }
    if dims.iter().any(|&d| d != 2) {
        return Err(Error::Shape("only qubit subsystems are supported".into()));
    }
    let n = dims.len();
    if m.dim != 1 << n {
        return Err(Error::Shape(format!(
            "matrix dimension {} does not match {} qubits",
            m.dim, n
        )));
    }
    let kept = keep.iter().filter(|&&k| k).count();
    if kept == 0 || kept == n {
        return Err(Error::Shape("keep must select a nonempty proper subset".into()));
    }

    let bit = |idx: usize, k: usize| (idx >> (n - 1 - k)) & 1;
    let split = |idx: usize| {
        let (mut kept_idx, mut traced_idx) = (0usize, 0usize);
        for (k, &kept_bit) in keep.iter().enumerate() {
            if kept_bit {
                kept_idx = (kept_idx << 1) | bit(idx, k);
            } else {
                traced_idx = (traced_idx << 1) | bit(idx, k);
            }
        }
        (kept_idx, traced_idx)
    };

    let mut out = ComplexMatrix::zeros(1 << kept)?;
    for r in 0..m.dim {
        let (kr, tr) = split(r);
        for c in 0..m.dim {
            let (kc, tc) = split(c);
            if tr == tc {
                out[(kr, kc)] += m[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_values(|w| w)
    }

    /// `V · diag(g(w)) · V†`.
    pub fn map_values(&self, g: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.dim;
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n).expect("valid dim");
        for (k, &w) in self.values.iter().enumerate() {
            let gw = g(w);
            if gw == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * gw;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("nonempty spectrum")
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Cyclic complex Jacobi eigensolver.
///
/// Each rotation first removes the phase of `a[p][q]` and then applies the
/// real two-by-two rotation that annihilates it. Sweeps stop once the
/// off-diagonal Frobenius norm drops below `1e-13` (scaled by the norm of the
/// input when that exceeds one).
pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEig> {
    let residual = m.hermiticity_residual();
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    let n = m.dim;
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n)?;
    let tol = JACOBI_TOL * m.frobenius_norm().max(1.0);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase_conj = (apq / mag).conj();
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] on the (p, q) plane.
                let g_pp = Complex64::new(c, 0.0);
                let g_pq = Complex64::new(s, 0.0);
                let g_qp = phase_conj * (-s);
                let g_qq = phase_conj * c;

                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| v[(i, order[j])])?;
    Ok(HermEig { values, vectors })
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(m)?;
    let min = eig.min_value();
    if min < -PSD_CLAMP {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(eig.map_values(|w| w.max(0.0).sqrt()))
}
