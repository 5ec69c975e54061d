//! Dense Hermitian matrices and their unitary exponentials.
//!
//! Everything is stored as `faer::Mat<c64>`. Two structural shortcuts keep
//! the exponential cheap without changing its value: matrices whose imaginary
//! parts are all exactly zero go through the real symmetric eigensolver, and
//! matrices that decouple into independent index blocks (e.g. parity sectors
//! of an oscillator) are diagonalised block by block.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors, SelfAdjointEvdParams};
use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Col, Mat, MatRef, Par, Side, Spec};

use crate::error::{Error, Result};

/// Relative bound on `‖H − H†‖_max / ‖H‖_max` accepted by [`HermitianMatrix::new`].
pub const HERMITICITY_TOL: f64 = 1e-12;

pub type CMat = Mat<c64>;

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// `max |a_ij − b_ij|`; panics on shape mismatch.
pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

/// `‖U†U − I‖_max` for an `N×k` matrix with orthonormal columns.
pub fn unitarity_defect(u: MatRef<'_, c64>) -> f64 {
    let gram = u.adjoint() * u;
    let k = u.ncols();
    let mut best = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            best = best.max((gram[(i, j)] - c64::new(target, 0.0)).norm());
        }
    }
    best
}

/// Square complex matrix known to be Hermitian to [`HERMITICITY_TOL`].
#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    mat: CMat,
}

impl HermitianMatrix {
    /// Checks Hermiticity and symmetrises away round-off.
    pub fn new(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mat.ncols(),
            });
        }
        let scale = max_abs(mat.as_ref());
        let mut skew = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                skew = skew.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if !(skew <= HERMITICITY_TOL * scale) {
            return Err(Error::Schedule(format!(
                "matrix is not Hermitian: ‖H − H†‖_max = {skew:e}, ‖H‖_max = {scale:e}"
            )));
        }
        let sym = Mat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(mat[(i, i)].re, 0.0)
            } else {
                (mat[(i, j)] + mat[(j, i)].conj()) * 0.5
            }
        });
        Ok(Self { mat: sym })
    }

    /// Wraps a matrix the caller guarantees to be exactly Hermitian.
    pub(crate) fn from_trusted(mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn from_real_symmetric(mat: MatRef<'_, f64>) -> Result<Self> {
        Self::new(Mat::from_fn(mat.nrows(), mat.ncols(), |i, j| c64::new(mat[(i, j)], 0.0)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: Mat::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn into_inner(self) -> CMat {
        self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        self.mat[(i, j)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let n = self.dim();
        Self {
            mat: Mat::from_fn(n, n, |i, j| self.mat[(i, j)] * factor),
        }
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(self.as_ref())
    }

    pub fn is_real(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.mat[(i, j)].im == 0.0))
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigh(&self) -> Result<(Vec<f64>, CMat)> {
        let n = self.dim();
        if n == 0 {
            return Ok((Vec::new(), Mat::zeros(0, 0)));
        }
        let evd = self.mat.self_adjoint_eigen(Side::Lower).map_err(evd_error)?;
        let s = evd.S().column_vector();
        let values = (0..n).map(|i| s[i].re).collect();
        Ok((values, evd.U().to_owned()))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        let vals = self.mat.self_adjoint_eigenvalues(Side::Lower).map_err(evd_error)?;
        Ok(vals)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs())))
    }

    /// Connected components of the off-diagonal sparsity graph, each sorted.
    pub fn decoupled_blocks(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for j in 0..n {
            for i in 0..j {
                let v = self.mat[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = blocks.len();
                blocks.push(Vec::new());
            }
            blocks[slot[r]].push(i);
        }
        blocks
    }

    /// `exp(−i·s·H)` as a (possibly block-structured) unitary, kept in
    /// spectral form `V diag(e^{−isλ}) V†` per block.
    pub fn exp_i(&self, s: f64) -> Result<UnitaryFactor> {
        let blocks = self.decoupled_blocks();
        let real = self.is_real();
        let mut out = Vec::with_capacity(blocks.len());
        for idx in blocks {
            let k = idx.len();
            let spectral = if k == 1 {
                let e = self.mat[(idx[0], idx[0])].re;
                Spectral::Real {
                    vectors: Mat::from_fn(1, 1, |_, _| 1.0),
                    phases: vec![c64::cis(-s * e)],
                }
            } else if real {
                let sub = Mat::from_fn(k, k, |i, j| self.mat[(idx[i], idx[j])].re);
                let (lam, vectors) = real_eigh(sub.as_ref())?;
                Spectral::Real {
                    phases: lam.iter().map(|l| c64::cis(-s * l)).collect(),
                    vectors,
                }
            } else {
                let sub = Mat::from_fn(k, k, |i, j| self.mat[(idx[i], idx[j])]);
                let (lam, vectors) = complex_eigh(sub.as_ref())?;
                Spectral::Complex {
                    phases: lam.iter().map(|l| c64::cis(-s * l)).collect(),
                    vectors,
                }
            };
            out.push((idx, spectral));
        }
        Ok(UnitaryFactor {
            dim: self.dim(),
            blocks: out,
        })
    }
}

fn evd_error(e: faer::linalg::evd::EvdError) -> Error {
    Error::Numerical {
        message: format!("Hermitian eigensolver failed: {e:?}"),
        residual: f64::NAN,
    }
}

fn evd_params<T: faer::traits::ComplexField>() -> Spec<SelfAdjointEvdParams, T> {
    let mut params: Spec<SelfAdjointEvdParams, T> = Default::default();
    params.recursion_threshold = 32;
    params
}

fn is_tridiagonal(a: MatRef<'_, f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|j| (0..n).all(|i| i.abs_diff(j) <= 1 || a[(i, j)] == 0.0))
}

/// Sequential real symmetric eigensolver; tridiagonal input skips the
/// Householder reduction.
fn real_eigh(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let params = evd_params::<f64>();
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        Par::Seq,
        params,
    ));
    let stack = MemStack::new(&mut buf);
    let mut values = Diag::<f64>::zeros(n);
    let mut vectors = Mat::<f64>::zeros(n, n);
    if is_tridiagonal(a) {
        let d = Col::from_fn(n, |i| a[(i, i)]);
        let e = Col::from_fn(n, |i| if i + 1 < n { a[(i + 1, i)] } else { 0.0 });
        evd::tridiagonal_self_adjoint_evd(
            d.as_diagonal(),
            e.as_diagonal(),
            values.as_mut(),
            Some(vectors.as_mut()),
            Par::Seq,
            stack,
            params,
        )
        .map_err(evd_error)?;
    } else {
        evd::self_adjoint_evd(a, values.as_mut(), Some(vectors.as_mut()), Par::Seq, stack, params)
            .map_err(evd_error)?;
    }
    let values = values.column_vector();
    Ok(((0..n).map(|i| values[i]).collect(), vectors))
}

fn complex_eigh(a: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    let params = evd_params::<c64>();
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<c64>(
        n,
        ComputeEigenvectors::Yes,
        Par::Seq,
        params,
    ));
    let mut values = Diag::<c64>::zeros(n);
    let mut vectors = CMat::zeros(n, n);
    evd::self_adjoint_evd(
        a,
        values.as_mut(),
        Some(vectors.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(evd_error)?;
    let values = values.column_vector();
    Ok(((0..n).map(|i| values[i].re).collect(), vectors))
}

fn product<T, L>(lhs: MatRef<'_, L>, rhs: MatRef<'_, T>) -> Mat<T>
where
    T: faer::traits::ComplexField,
    L: faer::traits::Conjugate<Canonical = T>,
{
    let mut out = Mat::<T>::zeros(lhs.nrows(), rhs.ncols());
    matmul(out.as_mut(), Accum::Replace, lhs, rhs, T::one_impl(), Par::Seq);
    out
}

#[derive(Clone, Debug)]
enum Spectral {
    Real { vectors: Mat<f64>, phases: Vec<c64> },
    Complex { vectors: CMat, phases: Vec<c64> },
}

impl Spectral {
    /// `V diag(phases) V† · m`
    fn apply(&self, m: MatRef<'_, c64>) -> CMat {
        let (rows, cols) = (m.nrows(), m.ncols());
        match self {
            Spectral::Real { vectors, phases } => {
                let re = Mat::from_fn(rows, cols, |i, j| m[(i, j)].re);
                let im = Mat::from_fn(rows, cols, |i, j| m[(i, j)].im);
                let wr = product(vectors.transpose(), re.as_ref());
                let wi = product(vectors.transpose(), im.as_ref());
                let mut ar = Mat::<f64>::zeros(rows, cols);
                let mut ai = Mat::<f64>::zeros(rows, cols);
                for j in 0..cols {
                    for (i, p) in phases.iter().enumerate() {
                        let z = c64::new(wr[(i, j)], wi[(i, j)]) * p;
                        ar[(i, j)] = z.re;
                        ai[(i, j)] = z.im;
                    }
                }
                let or = product(vectors.as_ref(), ar.as_ref());
                let oi = product(vectors.as_ref(), ai.as_ref());
                Mat::from_fn(rows, cols, |i, j| c64::new(or[(i, j)], oi[(i, j)]))
            }
            Spectral::Complex { vectors, phases } => {
                let mut w: CMat = product(vectors.adjoint(), m);
                for j in 0..cols {
                    for (i, p) in phases.iter().enumerate() {
                        w[(i, j)] *= p;
                    }
                }
                product(vectors.as_ref(), w.as_ref())
            }
        }
    }
}

/// Unitary stored as independent blocks over disjoint index sets.
#[derive(Clone, Debug)]
pub struct UnitaryFactor {
    dim: usize,
    blocks: Vec<(Vec<usize>, Spectral)>,
}

impl UnitaryFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Replaces `m` by `self · m`.
    pub fn apply_left(&self, m: &mut CMat) {
        assert_eq!(m.nrows(), self.dim);
        let cols = m.ncols();
        if self.blocks.len() == 1 {
            let (idx, u) = &self.blocks[0];
            if idx.iter().enumerate().all(|(k, &i)| k == i) {
                *m = u.apply(m.as_ref());
                return;
            }
        }
        for (idx, u) in &self.blocks {
            let sub = Mat::from_fn(idx.len(), cols, |i, j| m[(idx[i], j)]);
            let prod = u.apply(sub.as_ref());
            for (r, &i) in idx.iter().enumerate() {
                for j in 0..cols {
                    m[(i, j)] = prod[(r, j)];
                }
            }
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = Mat::identity(self.dim, self.dim);
        self.apply_left(&mut m);
        m
    }
}
