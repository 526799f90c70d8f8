//! Uniform linear array signal model.
//!
//! Snapshots follow `Y = A(θ) S + V` with `M` sensors and `N` snapshots:
//! steering vectors are normalized complex exponentials in the electrical
//! angle, sources are either Gaussian with a prescribed covariance or a
//! deterministic matrix scaled to prescribed signal-space eigenvalues, and the
//! noise is circular complex Gaussian with per-entry variance `sigma2`.
//!
//! Electrical and physical angles are related by
//! `theta = 2*pi*(d/lambda)*sin(phi)` for inter-sensor spacing `d` and
//! wavelength `lambda`; everything in this crate works in `theta`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DoaLabError, Result};
use crate::util::mix_seed;

/// Stream labels separating signal and noise randomness; a scenario re-run
/// with a different noise power reuses the same source waveforms.
const SIGNAL_STREAM: u64 = 0x5349_474e;
const NOISE_STREAM: u64 = 0x4e4f_4953;

/// RNG backing all snapshot synthesis. Pinned by name in output metadata.
pub const GENERATOR_NAME: &str = "ChaCha12";

/// Source angle specification.
#[derive(Debug, Clone, PartialEq)]
pub enum DoaSpec {
    /// Electrical angles, one per source.
    Explicit(Vec<f64>),
    /// Two sources at `theta1` and `theta1 + alpha / N`; the gap closes as the
    /// snapshot count grows, holding `alpha` fixed.
    CloselySpaced { theta1: f64, alpha: f64 },
}

/// How the source matrix `S` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceModel {
    /// `S = R^{1/2} X` with iid standard circular complex Gaussian `X`;
    /// `S S^*/N` converges to the configured covariance.
    Gaussian,
    /// Deterministic `S` built from orthonormal DFT rows and scaled so that
    /// the nonzero eigenvalues of `A (S S^*/N) A^*` equal the eigenvalues of
    /// the configured covariance exactly, at every `(M, N)`.
    SpikeExact,
}

/// Full description of one synthetic data set.
#[derive(Debug, Clone)]
pub struct ArrayScenario {
    pub sensors: usize,
    pub snapshots: usize,
    pub doas: DoaSpec,
    /// Source covariance (Gaussian model) or target signal-space eigenvalues
    /// via its spectrum (spike-exact model). K x K Hermitian positive definite.
    pub source_cov: Array2<Complex64>,
    /// Noise power `sigma2`; each complex entry has variance `sigma2`,
    /// split evenly between real and imaginary parts.
    pub noise_power: f64,
    pub source_model: SourceModel,
    pub seed: u64,
}

/// Snapshot matrix produced by [`synthesize`].
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub y: Array2<Complex64>,
    pub sensors: usize,
    pub snapshots: usize,
}

impl ArrayScenario {
    /// Number of sources.
    pub fn num_sources(&self) -> usize {
        match &self.doas {
            DoaSpec::Explicit(v) => v.len(),
            DoaSpec::CloselySpaced { .. } => 2,
        }
    }

    /// Aspect ratio `c_N = M / N`.
    pub fn c_n(&self) -> f64 {
        self.sensors as f64 / self.snapshots as f64
    }

    /// Resolves the source angles for the configured snapshot count.
    pub fn doa_angles(&self) -> Vec<f64> {
        match &self.doas {
            DoaSpec::Explicit(v) => v.clone(),
            DoaSpec::CloselySpaced { theta1, alpha } => {
                vec![*theta1, theta1 + alpha / self.snapshots as f64]
            }
        }
    }

    /// Returns a copy with the noise power replaced (used by SNR sweeps).
    pub fn with_noise_power(&self, sigma2: f64) -> Self {
        let mut s = self.clone();
        s.noise_power = sigma2;
        s
    }

    /// Returns a copy with the seed replaced (used by the trial loop).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.seed = seed;
        s
    }

    /// Validates dimensions and the source covariance.
    pub fn validate(&self) -> Result<()> {
        let k = self.num_sources();
        if self.sensors < 2 {
            return Err(DoaLabError::InvalidArgument(
                "need at least 2 sensors".into(),
            ));
        }
        if self.snapshots == 0 {
            return Err(DoaLabError::InvalidArgument(
                "need at least 1 snapshot".into(),
            ));
        }
        if k == 0 {
            return Err(DoaLabError::InvalidArgument("need at least 1 source".into()));
        }
        if k >= self.sensors {
            return Err(DoaLabError::InvalidArgument(format!(
                "{} sources do not fit an array of {} sensors",
                k, self.sensors
            )));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(DoaLabError::InvalidArgument(format!(
                "noise power must be finite and nonnegative, got {}",
                self.noise_power
            )));
        }
        if self.source_cov.nrows() != k || self.source_cov.ncols() != k {
            return Err(DoaLabError::InvalidArgument(format!(
                "source covariance is {}x{}, expected {}x{}",
                self.source_cov.nrows(),
                self.source_cov.ncols(),
                k,
                k
            )));
        }
        let asym = hermitian_defect(&self.source_cov);
        if asym > 1e-10 {
            return Err(DoaLabError::InvalidArgument(format!(
                "source covariance is not Hermitian (defect {:.3e})",
                asym
            )));
        }
        let (vals, _) = eigh_ascending(&self.source_cov)?;
        if vals.iter().any(|&v| v <= 0.0) {
            return Err(DoaLabError::InvalidArgument(
                "source covariance must be positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// Unit-norm steering vector: component `m` is `exp(i m theta) / sqrt(M)`.
pub fn steering(theta: f64, sensors: usize) -> Result<Array1<Complex64>> {
    if sensors == 0 {
        return Err(DoaLabError::InvalidArgument(
            "steering vector needs at least one sensor".into(),
        ));
    }
    let scale = 1.0 / (sensors as f64).sqrt();
    Ok(Array1::from_iter((0..sensors).map(|m| {
        Complex64::from_polar(scale, m as f64 * theta)
    })))
}

/// Elementwise derivative of [`steering`] with respect to `theta`:
/// component `m` is `(i m)^order exp(i m theta) / sqrt(M)`.
pub fn steering_derivative(theta: f64, sensors: usize, order: u32) -> Result<Array1<Complex64>> {
    if sensors == 0 {
        return Err(DoaLabError::InvalidArgument(
            "steering vector needs at least one sensor".into(),
        ));
    }
    if !(1..=3).contains(&order) {
        return Err(DoaLabError::InvalidArgument(format!(
            "derivative order {} outside 1..=3",
            order
        )));
    }
    let scale = 1.0 / (sensors as f64).sqrt();
    Ok(Array1::from_iter((0..sensors).map(|m| {
        let im = Complex64::new(0.0, m as f64);
        im.powu(order) * Complex64::from_polar(scale, m as f64 * theta)
    })))
}

/// Steering matrix with one column per angle.
pub fn steering_matrix(thetas: &[f64], sensors: usize) -> Result<Array2<Complex64>> {
    let mut a = Array2::zeros((sensors, thetas.len()));
    for (j, &theta) in thetas.iter().enumerate() {
        a.column_mut(j).assign(&steering(theta, sensors)?);
    }
    Ok(a)
}

/// Electrical angle for a physical arrival angle `phi` (radians, broadside 0)
/// and sensor spacing in wavelengths.
pub fn electrical_from_physical(phi: f64, spacing_wavelengths: f64) -> f64 {
    2.0 * std::f64::consts::PI * spacing_wavelengths * phi.sin()
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Max absolute deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &Array2<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Hermitian eigendecomposition, eigenvalues ascending (thin wrapper used for
/// small K x K blocks; the sample path goes through [`crate::eigsys`]).
pub fn eigh_ascending(a: &Array2<Complex64>) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let (vals, mut vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| DoaLabError::NumericFailure(format!("eigh failed: {e}")))?;
    // The backend returns the eigenvectors of the conjugate problem for
    // complex input; undo that so columns satisfy A v = lambda v.
    vecs.mapv_inplace(|z| z.conj());
    Ok((vals.to_vec(), vecs))
}

/// Hermitian square root of a positive semidefinite matrix.
pub fn hermitian_sqrt(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let (vals, vecs) = eigh_ascending(a)?;
    if vals.iter().any(|&v| v < -1e-12) {
        return Err(DoaLabError::InvalidArgument(
            "matrix square root of an indefinite matrix".into(),
        ));
    }
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = Complex64::from(v.max(0.0).sqrt());
        scaled.column_mut(j).mapv_inplace(|z| z * s);
    }
    Ok(scaled.dot(&adjoint(&vecs)))
}

fn complex_gaussian(rng: &mut ChaCha12Rng, rows: usize, cols: usize, variance: f64) -> Array2<Complex64> {
    // Each entry gets independent real and imaginary parts of variance
    // `variance / 2`, i.e. a circular complex Gaussian of total variance
    // `variance`. Fill order is row-major and part of the determinism contract.
    let sd = (variance / 2.0).sqrt();
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[[i, j]] = Complex64::new(re * sd, im * sd);
        }
    }
    out
}

/// Deterministic source matrix whose scaled outer product reproduces the
/// covariance spectrum exactly through the array: with Gram `G = A^* A` and
/// target eigenvalues `d` of the configured covariance, `S = sqrt(N) C^{1/2} Q`
/// where `C = G^{-1/2} diag(d) G^{-1/2}` and `Q` holds `K` orthonormal DFT
/// rows. Then `A (S S^*/N) A^*` has nonzero eigenvalues exactly `d`.
/// Source covariance that actually shapes the signal block `A Cov A^*`.
///
/// Gaussian sources carry their configured covariance. Spike-exact sources
/// are warped so the signal-block eigenvalues land exactly on the spectrum
/// of the configured covariance: `Cov = G^{-1/2} diag(d) G^{-1/2}` with
/// `G = A^* A` and `d` the target values in descending order.
pub fn effective_source_covariance(scenario: &ArrayScenario) -> Result<Array2<Complex64>> {
    scenario.validate()?;
    match scenario.source_model {
        SourceModel::Gaussian => Ok(scenario.source_cov.clone()),
        SourceModel::SpikeExact => {
            let a = steering_matrix(&scenario.doa_angles(), scenario.sensors)?;
            spike_exact_covariance(&a, &scenario.source_cov)
        }
    }
}

fn spike_exact_covariance(
    a: &Array2<Complex64>,
    source_cov: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    let gram = adjoint(a).dot(a);
    let (gvals, gvecs) = eigh_ascending(&gram)?;
    if gvals.iter().any(|&v| v <= 1e-12) {
        return Err(DoaLabError::InvalidArgument(
            "steering matrix is numerically rank deficient".into(),
        ));
    }
    // G^{-1/2}
    let mut scaled = gvecs.clone();
    for (j, &v) in gvals.iter().enumerate() {
        let s = Complex64::from(1.0 / v.sqrt());
        scaled.column_mut(j).mapv_inplace(|z| z * s);
    }
    let g_inv_half = scaled.dot(&adjoint(&gvecs));

    // Target spectrum, descending so source 1 carries the largest value.
    let (mut d, _) = eigh_ascending(source_cov)?;
    d.reverse();
    let diag = Array2::from_diag(&Array1::from_iter(
        d.iter().map(|&v| Complex64::from(v)),
    ));
    Ok(g_inv_half.dot(&diag).dot(&g_inv_half))
}

fn spike_exact_sources(
    a: &Array2<Complex64>,
    source_cov: &Array2<Complex64>,
    snapshots: usize,
) -> Result<Array2<Complex64>> {
    let k = a.ncols();
    let n = snapshots;
    if k > n {
        return Err(DoaLabError::InvalidArgument(format!(
            "spike-exact sources need N >= K, got K = {k}, N = {n}"
        )));
    }
    let c = spike_exact_covariance(a, source_cov)?;
    let c_half = hermitian_sqrt(&c)?;

    // K orthonormal rows of the N-point DFT.
    let mut q = Array2::zeros((k, n));
    let scale = 1.0 / (n as f64).sqrt();
    for r in 0..k {
        for t in 0..n {
            let phase = -2.0 * std::f64::consts::PI * (r as f64) * (t as f64) / n as f64;
            q[[r, t]] = Complex64::from_polar(scale, phase);
        }
    }
    Ok(c_half.dot(&q).mapv(|z| z * (n as f64).sqrt()))
}

/// Draws one snapshot matrix `Y = A S + V` for the scenario.
///
/// The output is a pure function of `(seed, M, N)` and the scenario
/// parameters; signal and noise use separate ChaCha12 streams, so changing
/// only the noise power keeps the source waveforms fixed.
pub fn synthesize(scenario: &ArrayScenario) -> Result<SnapshotMatrix> {
    scenario.validate()?;
    let m = scenario.sensors;
    let n = scenario.snapshots;
    let thetas = scenario.doa_angles();
    let a = steering_matrix(&thetas, m)?;

    let s = match scenario.source_model {
        SourceModel::Gaussian => {
            let mut rng =
                ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, &[SIGNAL_STREAM]));
            let x = complex_gaussian(&mut rng, thetas.len(), n, 1.0);
            hermitian_sqrt(&scenario.source_cov)?.dot(&x)
        }
        SourceModel::SpikeExact => spike_exact_sources(&a, &scenario.source_cov, n)?,
    };

    let mut y = a.dot(&s);
    if scenario.noise_power > 0.0 {
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, &[NOISE_STREAM]));
        let v = complex_gaussian(&mut rng, m, n, scenario.noise_power);
        y += &v;
    }
    Ok(SnapshotMatrix {
        y,
        sensors: m,
        snapshots: n,
    })
}

/// Sample covariance `Y Y^* / N`, symmetrized to remove rounding skew.
pub fn sample_covariance(snap: &SnapshotMatrix) -> Array2<Complex64> {
    let n = snap.snapshots as f64;
    let mut scm = snap.y.dot(&adjoint(&snap.y));
    scm.mapv_inplace(|z| z / n);
    let scm_h = adjoint(&scm);
    scm.zip_mut_with(&scm_h, |a, &b| *a = (*a + b) * 0.5);
    scm
}

/// Convenience: synthesize a scenario and reduce it to its sample covariance.
pub fn scm_from_scenario(scenario: &ArrayScenario) -> Result<Array2<Complex64>> {
    Ok(sample_covariance(&synthesize(scenario)?))
}

/// Mean squared magnitude over all entries (used by tests and diagnostics).
pub fn mean_square(a: &Array2<Complex64>) -> f64 {
    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    total / a.len() as f64
}

/// Identity-covariance helper for `k` unit-power uncorrelated sources.
pub fn unit_cov(k: usize) -> Array2<Complex64> {
    Array2::eye(k)
}

/// Diagonal covariance from per-source powers.
pub fn diag_cov(powers: &[f64]) -> Array2<Complex64> {
    Array2::from_diag(&Array1::from_iter(
        powers.iter().map(|&p| Complex64::from(p)),
    ))
}
