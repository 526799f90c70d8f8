//! Sample eigendecomposition with a deterministic orientation.
//!
//! Subspace estimators consume the full spectrum of the sample covariance,
//! ordered from largest to smallest, together with the aspect ratio and the
//! (known) noise power. Eigenvector phases are fixed so the decomposition is a
//! pure function of its input: the largest-magnitude component of each vector
//! is rotated to the positive real axis.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::array::{adjoint, hermitian_defect};
use crate::error::{DoaLabError, Result};

/// Eigendecomposition of one sample covariance matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SampleEigensystem {
    eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, aligned with `eigenvalues`.
    eigenvectors: Array2<Complex64>,
    c_n: f64,
    sigma2: f64,
    snapshots: usize,
}

impl SampleEigensystem {
    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector matrix; column `j` belongs to `eigenvalues()[j]`.
    pub fn eigenvectors(&self) -> &Array2<Complex64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    /// Aspect ratio `c_N = M / N`.
    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    /// Noise power the decomposition was built with.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Average of the `M - k` smallest eigenvalues: the textbook noise-power
    /// estimate. Provided for diagnostics; the estimators use the configured
    /// `sigma2` instead.
    pub fn noise_power_estimate(&self, k: usize) -> Result<f64> {
        let m = self.dim();
        if k >= m {
            return Err(DoaLabError::InvalidArgument(format!(
                "k = {k} leaves no noise eigenvalues out of {m}"
            )));
        }
        Ok(self.eigenvalues[k..].iter().sum::<f64>() / (m - k) as f64)
    }
}

/// Decomposes a Hermitian sample covariance.
///
/// Fails when the input deviates from Hermitian symmetry by more than 1e-10
/// relative to its largest entry. Eigenvalues come out descending; each
/// eigenvector is phase-rotated so its largest-magnitude component (first such
/// index on ties) is real positive.
pub fn eig_hermitian(
    scm: &Array2<Complex64>,
    snapshots: usize,
    sigma2: f64,
) -> Result<SampleEigensystem> {
    let m = scm.nrows();
    if m == 0 || scm.ncols() != m {
        return Err(DoaLabError::InvalidArgument(format!(
            "expected a square matrix, got {}x{}",
            m,
            scm.ncols()
        )));
    }
    if snapshots == 0 {
        return Err(DoaLabError::InvalidArgument("snapshots must be positive".into()));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(DoaLabError::InvalidArgument(format!(
            "noise power must be finite and nonnegative, got {sigma2}"
        )));
    }
    let scale = scm.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if hermitian_defect(scm) > 1e-10 * scale.max(1.0) {
        return Err(DoaLabError::InvalidArgument(
            "matrix is not Hermitian within 1e-10 relative tolerance".into(),
        ));
    }

    let (vals, mut vecs) = scm
        .eigh(UPLO::Lower)
        .map_err(|e| DoaLabError::NumericFailure(format!("eigh failed: {e}")))?;
    // The backend hands back the eigenvectors of the transposed (conjugate)
    // problem for complex input; undo that. The reconstruction tests pin this.
    vecs.mapv_inplace(|z| z.conj());

    // LAPACK returns ascending order; flip to descending.
    let mut eigenvalues: Vec<f64> = vals.to_vec();
    eigenvalues.reverse();
    let reversed: Vec<usize> = (0..m).rev().collect();
    let mut ordered = Array2::zeros((m, m));
    for (dst, &src) in reversed.iter().enumerate() {
        ordered.column_mut(dst).assign(&vecs.column(src));
    }
    vecs = ordered;

    for mut col in vecs.columns_mut() {
        fix_phase(&mut col);
    }

    Ok(SampleEigensystem {
        eigenvalues,
        eigenvectors: vecs,
        c_n: m as f64 / snapshots as f64,
        sigma2,
        snapshots,
    })
}

fn fix_phase(col: &mut ndarray::ArrayViewMut1<Complex64>) {
    let mut best = 0usize;
    let mut best_norm = -1.0f64;
    for (i, z) in col.iter().enumerate() {
        let n = z.norm_sqr();
        if n > best_norm + 1e-30 {
            best_norm = n;
            best = i;
        }
    }
    let pivot = col[best];
    let r = pivot.norm();
    if r == 0.0 {
        return;
    }
    let rot = pivot.conj() / r;
    col.mapv_inplace(|z| z * rot);
}

/// Reconstruction `U diag(lambda) U^*`; diagnostic for tests.
pub fn reconstruct(eig: &SampleEigensystem) -> Array2<Complex64> {
    let mut scaled = eig.eigenvectors().clone();
    for (j, &v) in eig.eigenvalues().iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|z| z * v);
    }
    scaled.dot(&adjoint(eig.eigenvectors()))
}

/// Resolvent-style weighted sum `sum_j f(lambda_j) (d1^* u_j)(u_j^* d2)`.
///
/// Shared by the estimators; `f` receives the eigenvalue and the column index.
pub fn weighted_bilinear<F>(
    eig: &SampleEigensystem,
    d1: &Array1<Complex64>,
    d2: &Array1<Complex64>,
    mut f: F,
) -> Complex64
where
    F: FnMut(usize, f64) -> Complex64,
{
    let u = eig.eigenvectors();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..eig.dim() {
        let col = u.column(j);
        let mut d1u = Complex64::new(0.0, 0.0);
        let mut ud2 = Complex64::new(0.0, 0.0);
        for i in 0..d1.len() {
            d1u += d1[i].conj() * col[i];
            ud2 += col[i].conj() * d2[i];
        }
        acc += f(j, eig.eigenvalues()[j]) * d1u * ud2;
    }
    acc
}
