//! Pseudo-spectra and DoA extraction.
//!
//! Five localization functions share one evaluation interface:
//!
//! * `TrueSpectrum`: `eta(theta) = a^* Pi a` with the population noise
//!   projector; the oracle every estimator chases.
//! * `Music`: `1 - sum_{k<=K} |a^* u_hat_k|^2`, consistent only when
//!   `M / N -> 0`.
//! * `GMusic`: the same sum reweighted by `1 / h(w_k)` where `w_k` inverts
//!   the spike map on each signal eigenvalue; consistent when `M, N` grow
//!   together.
//! * `Periodogram`: `a^* SCM a`, scanned for maxima.
//! * `Unconditional`: the contour-integral estimator of `a^* Pi a`; no spike
//!   inversion, same limit as `GMusic`.
//!
//! Minima (maxima for the periodogram) are extracted per search interval by a
//! grid scan followed by golden-section refinement.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::array::{adjoint, steering, steering_derivative};
use crate::contour::unconditional_bilinear;
use crate::eigsys::{weighted_bilinear, SampleEigensystem};
use crate::error::{DoaLabError, Result};
use crate::rmt::{h_of_spike, invert_phi};
use crate::util::take_real;

/// Estimation method tag used across records, CSV files and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    TrueSpectrum,
    Music,
    GMusic,
    Periodogram,
    Unconditional,
}

impl Method {
    /// Stable lowercase name used in CSV columns and configs.
    pub fn name(&self) -> &'static str {
        match self {
            Method::TrueSpectrum => "true",
            Method::Music => "music",
            Method::GMusic => "gmusic",
            Method::Periodogram => "periodogram",
            Method::Unconditional => "unconditional",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(Method::TrueSpectrum),
            "music" => Ok(Method::Music),
            "gmusic" => Ok(Method::GMusic),
            "periodogram" => Ok(Method::Periodogram),
            "unconditional" => Ok(Method::Unconditional),
            other => Err(DoaLabError::UnsupportedMethod(other.to_string())),
        }
    }

    /// True when the method locates sources at spectrum maxima.
    pub fn is_maximizing(&self) -> bool {
        matches!(self, Method::Periodogram)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Noise projector `I - A (A^* A)^{-1} A^*` from a steering matrix.
pub fn true_projector(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let low = LowRankProjector::new(a)?;
    let m = a.nrows();
    let mut proj = Array2::eye(m);
    let correction = low.basis.dot(&low.gram_inv).dot(&adjoint(&low.basis));
    proj -= &correction;
    Ok(proj)
}

/// Signal-space data for evaluating `a^* Pi a` without forming `Pi`.
#[derive(Debug, Clone)]
struct LowRankProjector {
    basis: Array2<Complex64>,
    gram_inv: Array2<Complex64>,
}

impl LowRankProjector {
    fn new(a: &Array2<Complex64>) -> Result<Self> {
        let gram = adjoint(a).dot(a);
        let (vals, vecs) = crate::array::eigh_ascending(&gram)?;
        let scale = vals.last().copied().unwrap_or(0.0);
        if vals.iter().any(|&v| v <= 1e-12 * scale.max(1.0)) {
            return Err(DoaLabError::InvalidArgument(
                "steering matrix is numerically rank deficient".into(),
            ));
        }
        let mut inv = vecs.clone();
        for (j, &v) in vals.iter().enumerate() {
            let s = Complex64::from(1.0 / v);
            inv.column_mut(j).mapv_inplace(|z| z * s);
        }
        Ok(Self {
            basis: a.clone(),
            gram_inv: inv.dot(&adjoint(&vecs)),
        })
    }

    /// `d1^* (I - P_A) d2`.
    fn bilinear(&self, d1: &Array1<Complex64>, d2: &Array1<Complex64>) -> Complex64 {
        let direct: Complex64 = d1.iter().zip(d2.iter()).map(|(x, y)| x.conj() * y).sum();
        let ad1 = adjoint(&self.basis).dot(d1);
        let ad2 = adjoint(&self.basis).dot(d2);
        let mid = self.gram_inv.dot(&ad2);
        let through: Complex64 = ad1.iter().zip(mid.iter()).map(|(x, y)| x.conj() * y).sum();
        direct - through
    }
}

/// An evaluatable localization function tagged with its method.
#[derive(Debug, Clone)]
pub enum PseudoSpectrum {
    TrueSpectrum {
        projector: LowRankData,
        sensors: usize,
        snapshots: usize,
    },
    Music {
        eig: Arc<SampleEigensystem>,
        k: usize,
    },
    GMusic {
        eig: Arc<SampleEigensystem>,
        k: usize,
        weights: Vec<f64>,
        /// Signal eigenvalues that failed separation and kept weight 1.
        fallback_count: usize,
    },
    Periodogram {
        scm: Array2<Complex64>,
        snapshots: usize,
    },
    Unconditional {
        eig: Arc<SampleEigensystem>,
        /// Contour weights, computed once at construction.
        weights: Vec<f64>,
    },
}

/// Opaque wrapper keeping [`LowRankProjector`] out of the public enum fields.
#[derive(Debug, Clone)]
pub struct LowRankData(LowRankProjector);

impl PseudoSpectrum {
    /// Population spectrum from the steering matrix of the true angles.
    pub fn true_spectrum(a: &Array2<Complex64>, snapshots: usize) -> Result<Self> {
        Ok(PseudoSpectrum::TrueSpectrum {
            projector: LowRankData(LowRankProjector::new(a)?),
            sensors: a.nrows(),
            snapshots,
        })
    }

    pub fn music(eig: Arc<SampleEigensystem>, k: usize) -> Result<Self> {
        check_signal_dim(&eig, k)?;
        Ok(PseudoSpectrum::Music { eig, k })
    }

    /// Strict constructor: fails on the first signal eigenvalue that does not
    /// clear the bulk edge.
    pub fn gmusic(eig: Arc<SampleEigensystem>, k: usize) -> Result<Self> {
        let (weights, violations) = gmusic_weights(&eig, k)?;
        if let Some(&index) = violations.first() {
            let edge = crate::rmt::mp_support(eig.sigma2(), eig.c_n())?.1;
            return Err(DoaLabError::SeparationViolation {
                index,
                value: eig.eigenvalues()[index],
                edge,
            });
        }
        Ok(PseudoSpectrum::GMusic {
            eig,
            k,
            weights,
            fallback_count: 0,
        })
    }

    /// Tolerant constructor: eigenvalues failing separation keep weight 1
    /// (the uncorrected value); the count is carried for diagnostics.
    pub fn gmusic_with_fallback(eig: Arc<SampleEigensystem>, k: usize) -> Result<Self> {
        let (weights, violations) = gmusic_weights(&eig, k)?;
        Ok(PseudoSpectrum::GMusic {
            eig,
            k,
            weights,
            fallback_count: violations.len(),
        })
    }

    pub fn periodogram(scm: Array2<Complex64>, snapshots: usize) -> Result<Self> {
        if scm.nrows() != scm.ncols() || scm.nrows() == 0 {
            return Err(DoaLabError::InvalidArgument("SCM must be square".into()));
        }
        Ok(PseudoSpectrum::Periodogram { scm, snapshots })
    }

    pub fn unconditional(eig: Arc<SampleEigensystem>, k: usize) -> Result<Self> {
        check_signal_dim(&eig, k)?;
        // Walking the contour here surfaces separation problems immediately
        // and makes every later evaluation a cheap weighted spectral sum.
        let weights = crate::contour::unconditional_weights(&eig, k)?;
        Ok(PseudoSpectrum::Unconditional { eig, weights })
    }

    pub fn method(&self) -> Method {
        match self {
            PseudoSpectrum::TrueSpectrum { .. } => Method::TrueSpectrum,
            PseudoSpectrum::Music { .. } => Method::Music,
            PseudoSpectrum::GMusic { .. } => Method::GMusic,
            PseudoSpectrum::Periodogram { .. } => Method::Periodogram,
            PseudoSpectrum::Unconditional { .. } => Method::Unconditional,
        }
    }

    pub fn sensors(&self) -> usize {
        match self {
            PseudoSpectrum::TrueSpectrum { sensors, .. } => *sensors,
            PseudoSpectrum::Music { eig, .. }
            | PseudoSpectrum::GMusic { eig, .. }
            | PseudoSpectrum::Unconditional { eig, .. } => eig.dim(),
            PseudoSpectrum::Periodogram { scm, .. } => scm.nrows(),
        }
    }

    pub fn snapshots(&self) -> usize {
        match self {
            PseudoSpectrum::TrueSpectrum { snapshots, .. } => *snapshots,
            PseudoSpectrum::Music { eig, .. }
            | PseudoSpectrum::GMusic { eig, .. }
            | PseudoSpectrum::Unconditional { eig, .. } => eig.snapshots(),
            PseudoSpectrum::Periodogram { snapshots, .. } => *snapshots,
        }
    }

    /// Number of signal eigenvalues that kept the uncorrected weight.
    pub fn fallback_count(&self) -> usize {
        match self {
            PseudoSpectrum::GMusic { fallback_count, .. } => *fallback_count,
            _ => 0,
        }
    }

    /// Evaluates the localization function.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        self.eval_derivative(theta, 0)
    }

    /// Evaluates the function (`order` 0) or one of its first two derivatives.
    pub fn eval_derivative(&self, theta: f64, order: u32) -> Result<f64> {
        if order > 2 {
            return Err(DoaLabError::InvalidArgument(format!(
                "derivative order {order} outside 0..=2"
            )));
        }
        let m = self.sensors();
        let a = steering(theta, m)?;
        match order {
            0 => Ok(take_real(self.bilinear(&a, &a)?, "pseudo-spectrum value")),
            1 => {
                let da = steering_derivative(theta, m, 1)?;
                Ok(2.0 * self.bilinear(&da, &a)?.re)
            }
            _ => {
                let da = steering_derivative(theta, m, 1)?;
                let dda = steering_derivative(theta, m, 2)?;
                let second = 2.0 * self.bilinear(&dda, &a)?.re;
                let first = take_real(self.bilinear(&da, &da)?, "derivative quadratic form");
                Ok(second + 2.0 * first)
            }
        }
    }

    /// The underlying sesquilinear form `d1^* Q d2` for the method's kernel.
    pub fn bilinear(&self, d1: &Array1<Complex64>, d2: &Array1<Complex64>) -> Result<Complex64> {
        match self {
            PseudoSpectrum::TrueSpectrum { projector, .. } => Ok(projector.0.bilinear(d1, d2)),
            PseudoSpectrum::Music { eig, k } => Ok(subspace_bilinear(eig, *k, None, d1, d2)),
            PseudoSpectrum::GMusic { eig, k, weights, .. } => {
                Ok(subspace_bilinear(eig, *k, Some(weights), d1, d2))
            }
            PseudoSpectrum::Periodogram { scm, .. } => {
                let sd2 = scm.dot(d2);
                Ok(d1.iter().zip(sd2.iter()).map(|(x, y)| x.conj() * y).sum())
            }
            PseudoSpectrum::Unconditional { eig, weights } => {
                if d1.len() != eig.dim() || d2.len() != eig.dim() {
                    return Err(DoaLabError::InvalidArgument(format!(
                        "vector lengths {} / {} do not match dimension {}",
                        d1.len(),
                        d2.len(),
                        eig.dim()
                    )));
                }
                Ok(weighted_bilinear(eig, d1, d2, |j, _| {
                    Complex64::from(weights[j])
                }))
            }
        }
    }
}

fn check_signal_dim(eig: &SampleEigensystem, k: usize) -> Result<()> {
    if k == 0 || k >= eig.dim() {
        return Err(DoaLabError::InvalidArgument(format!(
            "signal dimension k = {k} outside 1..{}",
            eig.dim()
        )));
    }
    Ok(())
}

/// `d1^* d2 - sum_{j<k} w_j (d1^* u_j)(u_j^* d2)`; `w = 1` when absent.
fn subspace_bilinear(
    eig: &SampleEigensystem,
    k: usize,
    weights: Option<&[f64]>,
    d1: &Array1<Complex64>,
    d2: &Array1<Complex64>,
) -> Complex64 {
    let direct: Complex64 = d1.iter().zip(d2.iter()).map(|(x, y)| x.conj() * y).sum();
    let u = eig.eigenvectors();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..k {
        let col = u.column(j);
        let mut d1u = Complex64::new(0.0, 0.0);
        let mut ud2 = Complex64::new(0.0, 0.0);
        for i in 0..d1.len() {
            d1u += d1[i].conj() * col[i];
            ud2 += col[i].conj() * d2[i];
        }
        let w = weights.map_or(1.0, |w| w[j]);
        acc += w * d1u * ud2;
    }
    direct - acc
}

/// Spike-map weights for the top `k` sample eigenvalues; the second element
/// lists the indices that failed separation (their weight stays 1).
fn gmusic_weights(eig: &SampleEigensystem, k: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    check_signal_dim(eig, k)?;
    let sigma2 = eig.sigma2();
    if sigma2 <= 0.0 {
        return Err(DoaLabError::InvalidArgument(
            "spike-map weights need a positive noise power".into(),
        ));
    }
    let c = eig.c_n();
    let mut weights = Vec::with_capacity(k);
    let mut violations = Vec::new();
    for (j, &l) in eig.eigenvalues()[..k].iter().enumerate() {
        match invert_phi(l, sigma2, c) {
            Ok(w) => weights.push(1.0 / h_of_spike(w, sigma2, c)?),
            Err(DoaLabError::SeparationViolation { .. }) => {
                weights.push(1.0);
                violations.push(j);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((weights, violations))
}

/// Convenience free functions mirroring the estimator definitions.
pub fn eta_traditional(theta: f64, eig: &Arc<SampleEigensystem>, k: usize) -> Result<f64> {
    PseudoSpectrum::music(eig.clone(), k)?.eval(theta)
}

pub fn eta_gmusic(theta: f64, eig: &Arc<SampleEigensystem>, k: usize) -> Result<f64> {
    PseudoSpectrum::gmusic(eig.clone(), k)?.eval(theta)
}

pub fn eta_periodogram(theta: f64, scm: &Array2<Complex64>, snapshots: usize) -> Result<f64> {
    PseudoSpectrum::periodogram(scm.clone(), snapshots)?.eval(theta)
}

/// Contour estimate of `d1^* Pi d2`, real part.
pub fn eta_unconditional(
    d1: &Array1<Complex64>,
    d2: &Array1<Complex64>,
    eig: &Arc<SampleEigensystem>,
    k: usize,
) -> Result<f64> {
    check_signal_dim(eig, k)?;
    Ok(unconditional_bilinear(eig, k, d1, d2)?.re)
}

/// Closed search interval for one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SearchInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(DoaLabError::InvalidArgument(format!(
                "bad search interval [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// One refined extremum.
#[derive(Debug, Clone)]
pub struct SourceEstimate {
    pub interval: SearchInterval,
    pub theta_hat: f64,
    /// Value of the localization function at `theta_hat`.
    pub cost: f64,
    /// Golden-section iterations performed.
    pub iterations: usize,
    /// Width of the final bracket.
    pub bracket_width: f64,
}

/// Extraction result across all requested intervals.
#[derive(Debug, Clone)]
pub struct DoaEstimate {
    pub method: Method,
    pub sources: Vec<SourceEstimate>,
}

impl DoaEstimate {
    pub fn angles(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.theta_hat).collect()
    }
}

/// Scans each interval on a grid of at least 16 points per beamwidth
/// (minimum 64 subintervals), then refines the best bracket by golden-section
/// search down to a width of `1e-10 * 2 pi`.
pub fn extract_doas(ps: &PseudoSpectrum, intervals: &[SearchInterval]) -> Result<DoaEstimate> {
    if intervals.is_empty() {
        return Err(DoaLabError::InvalidArgument("no search intervals".into()));
    }
    let m = ps.sensors();
    let beamwidth = 2.0 * std::f64::consts::PI / m as f64;
    let maximize = ps.method().is_maximizing();
    let mut sources = Vec::with_capacity(intervals.len());
    for &iv in intervals {
        let cells = ((iv.width() / beamwidth * 16.0).ceil() as usize).max(64);
        let step = iv.width() / cells as f64;
        let mut best_i = 0usize;
        let mut best_v = f64::INFINITY;
        for i in 0..=cells {
            let theta = iv.lo + step * i as f64;
            let v = ps.eval(theta)?;
            let v = if maximize { -v } else { v };
            if v < best_v {
                best_v = v;
                best_i = i;
            }
        }
        let lo = iv.lo + step * best_i.saturating_sub(1) as f64;
        let hi = iv.lo + step * (best_i + 1).min(cells) as f64;
        let (theta_hat, cost, iterations, width) = golden_section(ps, lo, hi, maximize)?;
        sources.push(SourceEstimate {
            interval: iv,
            theta_hat,
            cost,
            iterations,
            bracket_width: width,
        });
    }
    Ok(DoaEstimate {
        method: ps.method(),
        sources,
    })
}

fn golden_section(
    ps: &PseudoSpectrum,
    mut a: f64,
    mut b: f64,
    maximize: bool,
) -> Result<(f64, f64, usize, f64)> {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let target = 1e-10 * 2.0 * std::f64::consts::PI;
    let sign = if maximize { -1.0 } else { 1.0 };
    let f = |x: f64| -> Result<f64> { Ok(sign * ps.eval(x)?) };
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0usize;
    while b - a > target && iterations < 256 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d)?;
        }
        iterations += 1;
    }
    let theta = 0.5 * (a + b);
    Ok((theta, sign * f(theta)?, iterations, b - a))
}
