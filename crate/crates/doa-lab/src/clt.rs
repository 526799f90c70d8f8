//! Second-order (CLT) predictions for the subspace DoA estimators.
//!
//! The fluctuation of either subspace localization function around its
//! deterministic equivalent is Gaussian with a variance `gamma` built from
//! pair coefficients on the population eigenbasis. For a source at `theta_k`
//! with `d1 = a'(theta_k)/N` and `d2 = a(theta_k)`:
//!
//! * corrected estimator: `N^{3/2}(theta_hat - theta_k)` is asymptotically
//!   `N(0, gamma / (d1^* Pi d1)^2)`;
//! * uncorrected estimator: `N(0, 4 gamma_t / (eta_t'' / N^2)^2)`.
//!
//! The `gamma` sums run over all `M^2` eigenvector pairs, but only three
//! coefficient shapes occur (signal x signal, signal x noise, zero), so the
//! noise block collapses through the projector and everything is `O(M K)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::array::{
    adjoint, effective_source_covariance, eigh_ascending, hermitian_sqrt, steering,
    steering_derivative, steering_matrix, ArrayScenario,
};
use crate::eigsys::SampleEigensystem;
use crate::error::{DoaLabError, Result};
use crate::rmt::{invert_phi, SpikeModel};
use crate::spectrum::{Method, PseudoSpectrum};
use crate::util::take_real;

/// Population reference frame: the exact finite-`N` spikes and signal
/// eigenvectors that the limit formulas are written on.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    sensors: usize,
    snapshots: usize,
    sigma2: f64,
    /// Signal eigenvalues of the noise-free covariance, descending.
    spikes: Vec<f64>,
    /// Matching orthonormal eigenvectors, one column per spike.
    frame: Array2<Complex64>,
    /// Source angles in scenario order.
    thetas: Vec<f64>,
}

impl PopulationModel {
    /// Builds the frame from a synthetic scenario with known truth.
    ///
    /// The signal block is `A Cov A^*`; its nonzero eigenpairs come from the
    /// `K x K` problem `Cov^{1/2} (A^* A) Cov^{1/2}` with eigenvectors mapped
    /// back through `A Cov^{1/2}`.
    pub fn from_scenario(scenario: &ArrayScenario) -> Result<Self> {
        scenario.validate()?;
        let thetas = scenario.doa_angles();
        let a = steering_matrix(&thetas, scenario.sensors)?;
        let cov = effective_source_covariance(scenario)?;
        let cov_half = hermitian_sqrt(&cov)?;
        let small = adjoint(&cov_half).dot(&adjoint(&a)).dot(&a).dot(&cov_half);
        let (vals, vecs) = eigh_ascending(&small)?;
        let k = vals.len();
        let lift = a.dot(&cov_half);
        let mut spikes = Vec::with_capacity(k);
        let mut frame = Array2::zeros((scenario.sensors, k));
        for j in 0..k {
            let lam = vals[k - 1 - j];
            if lam <= 1e-12 {
                return Err(DoaLabError::InvalidArgument(format!(
                    "population spike {j} collapsed to {lam}; source covariance is rank deficient"
                )));
            }
            let v = vecs.column(k - 1 - j);
            let u = lift.dot(&v.to_owned()) / Complex64::from(lam.sqrt());
            frame.column_mut(j).assign(&u);
            spikes.push(lam);
        }
        Ok(Self {
            sensors: scenario.sensors,
            snapshots: scenario.snapshots,
            sigma2: scenario.noise_power,
            spikes,
            frame,
            thetas,
        })
    }

    /// Plug-in frame from sample quantities, for prediction without ground
    /// truth: spikes are de-biased through the spike map, eigenvectors are
    /// taken as-is, and `thetas` should be the estimated angles.
    pub fn plug_in(eig: &SampleEigensystem, k: usize, thetas: &[f64]) -> Result<Self> {
        if k == 0 || k >= eig.dim() {
            return Err(DoaLabError::InvalidArgument(format!(
                "signal dimension k = {k} outside 1..{}",
                eig.dim()
            )));
        }
        let mut spikes = Vec::with_capacity(k);
        for &l in &eig.eigenvalues()[..k] {
            spikes.push(invert_phi(l, eig.sigma2(), eig.c_n())?);
        }
        let frame = eig
            .eigenvectors()
            .slice(ndarray::s![.., ..k])
            .to_owned();
        Ok(Self {
            sensors: eig.dim(),
            snapshots: eig.snapshots(),
            sigma2: eig.sigma2(),
            spikes,
            frame,
            thetas: thetas.to_vec(),
        })
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn num_sources(&self) -> usize {
        self.spikes.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Aspect ratio `c_N = M / N` used in every limit formula.
    pub fn c_n(&self) -> f64 {
        self.sensors as f64 / self.snapshots as f64
    }

    pub fn spikes(&self) -> &[f64] {
        &self.spikes
    }

    pub fn frame(&self) -> &Array2<Complex64> {
        &self.frame
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Spike-limit view for separation checks.
    pub fn spike_model(&self) -> Result<SpikeModel> {
        SpikeModel::new(self.sigma2, self.c_n(), self.spikes.clone())
    }

    /// `d1^* Pi d2` with the exact population noise projector.
    pub fn projector_bilinear(
        &self,
        d1: &Array1<Complex64>,
        d2: &Array1<Complex64>,
    ) -> Complex64 {
        let direct: Complex64 = d1.iter().zip(d2.iter()).map(|(x, y)| x.conj() * y).sum();
        let mut through = Complex64::new(0.0, 0.0);
        for j in 0..self.num_sources() {
            let col = self.frame.column(j);
            let mut d1u = Complex64::new(0.0, 0.0);
            let mut ud2 = Complex64::new(0.0, 0.0);
            for i in 0..self.sensors {
                d1u += d1[i].conj() * col[i];
                ud2 += col[i].conj() * d2[i];
            }
            through += d1u * ud2;
        }
        direct - through
    }
}

fn check_spike(lambda: f64, sigma2: f64, c: f64) -> Result<()> {
    if lambda * lambda <= sigma2 * sigma2 * c {
        return Err(DoaLabError::SeparationViolation {
            index: 0,
            value: lambda,
            edge: sigma2 * c.sqrt(),
        });
    }
    Ok(())
}

/// Pair coefficient of the corrected estimator for two signal eigenvalues.
pub fn vartheta_signal(lk: f64, ll: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lk, sigma2, c)?;
    check_spike(ll, sigma2, c)?;
    let s2 = sigma2;
    let s4c = s2 * s2 * c;
    let num = s4c * (lk * ll + (lk + ll) * s2 + s2 * s2) * (lk * ll + s4c);
    let den = 4.0 * (lk * lk - s4c) * (ll * ll - s4c) * (lk * ll - s4c);
    Ok(num / den)
}

/// Signal x noise coefficient of the corrected estimator.
pub fn vartheta_cross(lk: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lk, sigma2, c)?;
    let s4c = sigma2 * sigma2 * c;
    Ok(sigma2 * (lk + sigma2) / (4.0 * (lk * lk - s4c)))
}

/// Positive polynomial entering the uncorrected signal x signal coefficient.
pub fn chi_t(lk: f64, ll: f64, sigma2: f64, c: f64) -> f64 {
    let s2 = sigma2;
    let s4 = s2 * s2;
    let s4c = s4 * c;
    let p = lk * ll;
    let q = lk + ll;
    p * (p + s2 * q + s4) * ((1.0 + c) * (p + s4c) + 2.0 * s2 * c * q)
        - c * (p - s4c) * (p + s2 * q + s4c) * (p + s2 * q + s4c)
}

/// Pair coefficient of the uncorrected estimator for two signal eigenvalues.
pub fn vartheta_t_signal(lk: f64, ll: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lk, sigma2, c)?;
    check_spike(ll, sigma2, c)?;
    let s2c = sigma2 * sigma2 * c;
    let num = s2c / 4.0 * chi_t(lk, ll, sigma2, c);
    let den = lk
        * ll
        * (lk + sigma2 * c).powi(2)
        * (ll + sigma2 * c).powi(2)
        * (lk * ll - s2c);
    Ok(num / den)
}

/// Signal x noise coefficient of the uncorrected estimator.
pub fn vartheta_t_cross(lk: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lk, sigma2, c)?;
    let s4c = sigma2 * sigma2 * c;
    Ok(sigma2 * (lk + sigma2) * (lk * lk - s4c) / (4.0 * lk * lk * (lk + sigma2 * c).powi(2)))
}

/// Shared `gamma` evaluator over the population frame.
///
/// The full sum runs over every ordered eigenvector pair, with coefficient
/// `signal(k, l)` inside the top-left `K x K` block, `cross(k)` when exactly
/// one index is a signal one, and zero otherwise. Writing `P = d1 d2^* +
/// d2 d1^*`, the noise block of `sum |u_l^* P u_k|^2` telescopes into
/// `||Pi P u_k||^2`, so nothing larger than `M x K` is ever formed.
fn gamma_with(
    pop: &PopulationModel,
    d1: &Array1<Complex64>,
    d2: &Array1<Complex64>,
    signal: impl Fn(f64, f64) -> Result<f64>,
    cross: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let m = pop.sensors();
    if d1.len() != m || d2.len() != m {
        return Err(DoaLabError::InvalidArgument(format!(
            "vector lengths {} / {} do not match dimension {m}",
            d1.len(),
            d2.len()
        )));
    }
    let k = pop.num_sources();
    let u = pop.frame();

    // Inner products of d1, d2 against the frame.
    let mut ud1 = vec![Complex64::new(0.0, 0.0); k];
    let mut ud2 = vec![Complex64::new(0.0, 0.0); k];
    for j in 0..k {
        let col = u.column(j);
        for i in 0..m {
            ud1[j] += col[i].conj() * d1[i];
            ud2[j] += col[i].conj() * d2[i];
        }
    }
    let d11: Complex64 = d1.iter().map(|z| z.conj() * z).sum();
    let d22: Complex64 = d2.iter().map(|z| z.conj() * z).sum();
    let d12: Complex64 = d1.iter().zip(d2.iter()).map(|(x, y)| x.conj() * y).sum();

    let mut gamma = 0.0;
    // Signal block: u_k^* P u_l = (u_k^* d1)(d2^* u_l) + (u_k^* d2)(d1^* u_l).
    for a in 0..k {
        for b in 0..k {
            let pab = ud1[a] * ud2[b].conj() + ud2[a] * ud1[b].conj();
            if pab.norm_sqr() == 0.0 {
                continue;
            }
            gamma += signal(pop.spikes[a], pop.spikes[b])? * pab.norm_sqr();
        }
    }
    // Cross block, both orderings: 2 sum_k cross(k) ||Pi P u_k||^2 with
    // ||Pi P u_k||^2 = ||P u_k||^2 - sum_l |u_l^* P u_k|^2.
    for a in 0..k {
        // P u_a = d1 (d2^* u_a) + d2 (d1^* u_a); norms via precomputed dots.
        let x = ud2[a].conj();
        let y = ud1[a].conj();
        let norm2 = take_real(
            d11 * x.norm_sqr() + d22 * y.norm_sqr() + d12 * x.conj() * y + (d12 * x.conj() * y).conj(),
            "||P u_k||^2",
        );
        let mut in_signal = 0.0;
        for b in 0..k {
            let pba = ud1[b] * ud2[a].conj() + ud2[b] * ud1[a].conj();
            in_signal += pba.norm_sqr();
        }
        let tail = (norm2 - in_signal).max(0.0);
        gamma += 2.0 * cross(pop.spikes[a])? * tail;
    }
    Ok(gamma)
}

/// Fluctuation variance of the corrected localization value at `(d1, d2)`.
pub fn gamma_gmusic(
    pop: &PopulationModel,
    d1: &Array1<Complex64>,
    d2: &Array1<Complex64>,
) -> Result<f64> {
    let (s2, c) = (pop.sigma2(), pop.c_n());
    gamma_with(
        pop,
        d1,
        d2,
        |lk, ll| vartheta_signal(lk, ll, s2, c),
        |lk| vartheta_cross(lk, s2, c),
    )
}

/// Fluctuation variance of the uncorrected localization value at `(d1, d2)`.
pub fn gamma_music(
    pop: &PopulationModel,
    d1: &Array1<Complex64>,
    d2: &Array1<Complex64>,
) -> Result<f64> {
    let (s2, c) = (pop.sigma2(), pop.c_n());
    gamma_with(
        pop,
        d1,
        d2,
        |lk, ll| vartheta_t_signal(lk, ll, s2, c),
        |lk| vartheta_t_cross(lk, s2, c),
    )
}

/// One source's predicted asymptotic distribution.
#[derive(Debug, Clone, Copy)]
pub struct CltPrediction {
    pub method: Method,
    /// Fluctuation variance of the localization value.
    pub gamma: f64,
    /// Normalizing curvature: `d1^* Pi d1` for the corrected estimator,
    /// `eta_t''(theta_k) / N^2` for the uncorrected one.
    pub curvature: f64,
    /// Variance of `N^{3/2} (theta_hat - theta_k)`.
    pub variance: f64,
}

impl CltPrediction {
    /// Predicted mean-square error of the angle itself.
    pub fn mse(&self, snapshots: usize) -> f64 {
        self.variance / (snapshots as f64).powi(3)
    }
}

/// Weight of the uncorrected deterministic equivalent on spike `lambda`.
fn music_weight(lambda: f64, sigma2: f64, c: f64) -> f64 {
    let s4c = sigma2 * sigma2 * c;
    (lambda * lambda - s4c) / (lambda * (lambda + sigma2 * c))
}

/// Asymptotic variance of `N^{3/2}(theta_hat_k - theta_k)` for one source.
pub fn predict_variance(
    method: Method,
    pop: &PopulationModel,
    source_idx: usize,
) -> Result<CltPrediction> {
    if source_idx >= pop.thetas().len() {
        return Err(DoaLabError::InvalidArgument(format!(
            "source index {source_idx} out of range"
        )));
    }
    let m = pop.sensors();
    let n = pop.snapshots() as f64;
    let theta = pop.thetas()[source_idx];
    let a0 = steering(theta, m)?;
    let d1 = steering_derivative(theta, m, 1)? / Complex64::from(n);
    let d2 = a0.clone();

    match method {
        Method::GMusic => {
            let gamma = gamma_gmusic(pop, &d1, &d2)?;
            let curvature = take_real(pop.projector_bilinear(&d1, &d1), "d1* Pi d1");
            if curvature.abs() < 1e-6 {
                return Err(DoaLabError::DegenerateCurvature { value: curvature });
            }
            Ok(CltPrediction {
                method,
                gamma,
                curvature,
                variance: gamma / (curvature * curvature),
            })
        }
        Method::Music => {
            let gamma = gamma_music(pop, &d1, &d2)?;
            // eta_t''(theta)/N^2 on the deterministic equivalent
            // I - sum_k weight(lambda_k) u_k u_k^*.
            let (s2, c) = (pop.sigma2(), pop.c_n());
            let da = steering_derivative(theta, m, 1)?;
            let dda = steering_derivative(theta, m, 2)?;
            let q_bilinear = |x: &Array1<Complex64>, y: &Array1<Complex64>| -> Complex64 {
                let direct: Complex64 =
                    x.iter().zip(y.iter()).map(|(p, q)| p.conj() * q).sum();
                let mut through = Complex64::new(0.0, 0.0);
                for j in 0..pop.num_sources() {
                    let col = pop.frame().column(j);
                    let mut xu = Complex64::new(0.0, 0.0);
                    let mut uy = Complex64::new(0.0, 0.0);
                    for i in 0..m {
                        xu += x[i].conj() * col[i];
                        uy += col[i].conj() * y[i];
                    }
                    through += music_weight(pop.spikes[j], s2, c) * xu * uy;
                }
                direct - through
            };
            let second = 2.0 * q_bilinear(&dda, &a0).re
                + 2.0 * take_real(q_bilinear(&da, &da), "a'* Q a'");
            let curvature = second / (n * n);
            if curvature.abs() < 1e-6 {
                return Err(DoaLabError::DegenerateCurvature { value: curvature });
            }
            Ok(CltPrediction {
                method,
                gamma,
                curvature,
                variance: 4.0 * gamma / (curvature * curvature),
            })
        }
        other => Err(DoaLabError::UnsupportedMethod(format!(
            "no fluctuation theory implemented for {other}"
        ))),
    }
}

/// Wide-spacing uncorrelated-source limit of the angle variance, identical
/// for both subspace estimators: `(6/c^2) sigma^2 (lambda + sigma^2) /
/// (lambda^2 - sigma^4 c)`.
pub fn variance_wide_uncorrelated(lambda: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lambda, sigma2, c)?;
    let s4c = sigma2 * sigma2 * c;
    Ok(6.0 / (c * c) * sigma2 * (lambda + sigma2) / (lambda * lambda - s4c))
}

/// Wide-spacing uncorrelated limit of the corrected `gamma`.
pub fn gamma_limit_wide_uncorrelated(lambda: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lambda, sigma2, c)?;
    let s4c = sigma2 * sigma2 * c;
    Ok(c * c / 24.0 * sigma2 * (lambda + sigma2) / (lambda * lambda - s4c))
}

/// Wide-spacing uncorrelated limit of the uncorrected `gamma`.
pub fn gamma_t_limit_wide_uncorrelated(lambda: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lambda, sigma2, c)?;
    let s4c = sigma2 * sigma2 * c;
    Ok(
        sigma2 * c * c * (lambda + sigma2) * (lambda * lambda - s4c)
            / (24.0 * lambda * lambda * (lambda + sigma2 * c).powi(2)),
    )
}

/// Wide-spacing uncorrelated limit of `eta_t''(theta_k) / N^2`.
pub fn curvature_t_limit_wide_uncorrelated(lambda: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_spike(lambda, sigma2, c)?;
    let s4c = sigma2 * sigma2 * c;
    Ok(c * c * (lambda * lambda - s4c) / (6.0 * lambda * (lambda + sigma2 * c)))
}

/// Central second difference with step `0.1 / N^2`, Richardson-extrapolated
/// once; cross-checks the analytic curvature.
pub fn finite_difference_curvature(ps: &PseudoSpectrum, theta: f64) -> Result<f64> {
    let n = ps.snapshots() as f64;
    let h = 0.1 / (n * n);
    let second = |h: f64| -> Result<f64> {
        Ok((ps.eval(theta + h)? - 2.0 * ps.eval(theta)? + ps.eval(theta - h)?) / (h * h))
    };
    let coarse = second(h)?;
    let fine = second(h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{diag_cov, unit_cov, ArrayScenario, DoaSpec, SourceModel};
    use crate::eigsys::eig_hermitian;
    use ndarray::Array2;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn wide_scenario(m: usize, n: usize, powers: &[f64], sigma2: f64) -> ArrayScenario {
        // An integer number of cycles keeps the steering vectors exactly
        // orthogonal; scaling it with M keeps the angular gap fixed (near
        // pi/4) so the wide-separation limits apply as M grows.
        let cycles = (m / 8).max(1) as f64;
        let spacing = cycles * 2.0 * PI / m as f64;
        let doas: Vec<f64> = (0..powers.len()).map(|k| k as f64 * spacing).collect();
        ArrayScenario {
            sensors: m,
            snapshots: n,
            doas: DoaSpec::Explicit(doas),
            source_cov: diag_cov(powers),
            noise_power: sigma2,
            source_model: SourceModel::Gaussian,
            seed: 1,
        }
    }

    #[test]
    fn population_frame_is_orthonormal_with_descending_spikes() {
        let sc = wide_scenario(40, 80, &[10.0, 5.0], 1.0);
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        assert_eq!(pop.num_sources(), 2);
        assert!(pop.spikes()[0] >= pop.spikes()[1]);
        let u = pop.frame();
        for a in 0..2 {
            for b in 0..2 {
                let dot: Complex64 = u
                    .column(a)
                    .iter()
                    .zip(u.column(b).iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (dot - Complex64::from(want)).norm() < 1e-10,
                    "frame gram ({a},{b}) = {dot}"
                );
            }
        }
    }

    #[test]
    fn spike_exact_scenario_reproduces_its_target_spikes() {
        let sc = ArrayScenario {
            source_model: SourceModel::SpikeExact,
            ..wide_scenario(40, 80, &[10.0, 5.0], 1.0)
        };
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        assert!((pop.spikes()[0] - 10.0).abs() < 1e-8);
        assert!((pop.spikes()[1] - 5.0).abs() < 1e-8);
    }

    #[test]
    fn population_frame_diagonalizes_the_signal_block() {
        let sc = wide_scenario(24, 48, &[7.0, 3.0], 1.0);
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        let a = steering_matrix(&pop.thetas().to_vec(), 24).unwrap();
        let cov = effective_source_covariance(&sc).unwrap();
        let block = a.dot(&cov).dot(&adjoint(&a));
        for j in 0..2 {
            let u = pop.frame().column(j).to_owned();
            let bu = block.dot(&u);
            let err: f64 = bu
                .iter()
                .zip(u.iter())
                .map(|(x, y)| (x - y * Complex64::from(pop.spikes()[j])).norm_sqr())
                .sum();
            assert!(err.sqrt() < 1e-9, "eigen residual {err:.2e} at {j}");
        }
    }

    /// Brute-force gamma over a full orthonormal basis: completes the signal
    /// frame with the projector's unit eigenvectors and sums all pairs.
    fn gamma_brute(
        pop: &PopulationModel,
        d1: &Array1<Complex64>,
        d2: &Array1<Complex64>,
        signal: impl Fn(f64, f64) -> f64,
        cross: impl Fn(f64) -> f64,
    ) -> f64 {
        let m = pop.sensors();
        let k = pop.num_sources();
        let u = pop.frame();
        let mut proj: Array2<Complex64> = Array2::eye(m);
        for j in 0..k {
            let col = u.column(j).to_owned();
            for r in 0..m {
                for s in 0..m {
                    proj[[r, s]] -= col[r] * col[s].conj();
                }
            }
        }
        let (vals, vecs) = eigh_ascending(&proj).unwrap();
        let mut basis: Vec<Array1<Complex64>> =
            (0..k).map(|j| u.column(j).to_owned()).collect();
        for (j, &v) in vals.iter().enumerate() {
            if v > 0.5 {
                basis.push(vecs.column(j).to_owned());
            }
        }
        assert_eq!(basis.len(), m, "completion lost vectors");
        let p_of = |x: &Array1<Complex64>| -> Array1<Complex64> {
            let d2x: Complex64 = d2.iter().zip(x.iter()).map(|(p, q)| p.conj() * q).sum();
            let d1x: Complex64 = d1.iter().zip(x.iter()).map(|(p, q)| p.conj() * q).sum();
            d1 * d2x + d2 * d1x
        };
        let mut total = 0.0;
        for a in 0..m {
            let pa = p_of(&basis[a]);
            for b in 0..m {
                let coeff = if a < k && b < k {
                    signal(pop.spikes()[a], pop.spikes()[b])
                } else if a < k {
                    cross(pop.spikes()[a])
                } else if b < k {
                    cross(pop.spikes()[b])
                } else {
                    0.0
                };
                if coeff == 0.0 {
                    continue;
                }
                let dot: Complex64 = basis[b]
                    .iter()
                    .zip(pa.iter())
                    .map(|(p, q)| p.conj() * q)
                    .sum();
                total += coeff * dot.norm_sqr();
            }
        }
        total
    }

    #[test]
    fn collapsed_gamma_matches_the_full_double_sum() {
        let sc = wide_scenario(40, 80, &[10.0, 5.0], 1.0);
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        let (s2, c) = (pop.sigma2(), pop.c_n());
        for &theta in pop.thetas() {
            let d1 = steering_derivative(theta, 40, 1).unwrap() / Complex64::from(80.0);
            let d2 = steering(theta, 40).unwrap();
            let fast = gamma_gmusic(&pop, &d1, &d2).unwrap();
            let brute = gamma_brute(
                &pop,
                &d1,
                &d2,
                |a, b| vartheta_signal(a, b, s2, c).unwrap(),
                |a| vartheta_cross(a, s2, c).unwrap(),
            );
            assert!(
                (fast - brute).abs() < 1e-12,
                "corrected gamma: collapsed {fast} vs brute {brute}"
            );
            let fast_t = gamma_music(&pop, &d1, &d2).unwrap();
            let brute_t = gamma_brute(
                &pop,
                &d1,
                &d2,
                |a, b| vartheta_t_signal(a, b, s2, c).unwrap(),
                |a| vartheta_t_cross(a, s2, c).unwrap(),
            );
            assert!(
                (fast_t - brute_t).abs() < 1e-12,
                "uncorrected gamma: collapsed {fast_t} vs brute {brute_t}"
            );
        }
    }

    #[test]
    fn gamma_approaches_its_wide_uncorrelated_limit() {
        // With a fixed angular gap the residual finite-M terms decay like
        // 1/M^2, so the limit is nearly exact already at M=400.
        let sc = wide_scenario(400, 800, &[5.0, 5.0], 1.0);
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        let d1 = steering_derivative(pop.thetas()[0], 400, 1).unwrap() / Complex64::from(800.0);
        let d2 = steering(pop.thetas()[0], 400).unwrap();
        let want = gamma_limit_wide_uncorrelated(5.0, 1.0, 0.5).unwrap();
        let got = gamma_gmusic(&pop, &d1, &d2).unwrap();
        assert!(
            (got - want).abs() < 0.01 * want,
            "gamma {got} vs limit {want}"
        );
        let want_t = gamma_t_limit_wide_uncorrelated(5.0, 1.0, 0.5).unwrap();
        let got_t = gamma_music(&pop, &d1, &d2).unwrap();
        assert!(
            (got_t - want_t).abs() < 0.01 * want_t,
            "gamma_t {got_t} vs limit {want_t}"
        );
        // Hand values pin the limit functions themselves.
        assert!((want - 0.002551020408163265).abs() < 1e-15);
        assert!((want_t - 0.0020247933884297522).abs() < 1e-15);
    }

    #[test]
    fn both_methods_predict_the_same_wide_uncorrelated_variance() {
        // The two estimators have identical asymptotic angle variance in the
        // wide uncorrelated regime; check the limit algebra at 10 triples.
        let triples = [
            (5.0, 1.0, 0.5),
            (10.0, 1.0, 0.5),
            (3.0, 0.5, 0.25),
            (8.0, 2.0, 0.8),
            (2.0, 0.3, 0.6),
            (20.0, 1.5, 0.4),
            (6.0, 1.0, 1.5),
            (4.0, 0.8, 1.0),
            (12.0, 2.5, 0.7),
            (7.0, 0.1, 2.0),
        ];
        for (lambda, s2, c) in triples {
            let gamma = gamma_limit_wide_uncorrelated(lambda, s2, c).unwrap();
            let curv = c * c / 12.0;
            let var_g = gamma / (curv * curv);
            let gamma_t = gamma_t_limit_wide_uncorrelated(lambda, s2, c).unwrap();
            let curv_t = curvature_t_limit_wide_uncorrelated(lambda, s2, c).unwrap();
            let var_t = 4.0 * gamma_t / (curv_t * curv_t);
            let want = variance_wide_uncorrelated(lambda, s2, c).unwrap();
            assert!(
                (var_g - want).abs() < 1e-12 * want,
                "corrected variance {var_g} vs {want} at ({lambda},{s2},{c})"
            );
            assert!(
                (var_t - want).abs() < 1e-12 * want,
                "uncorrected variance {var_t} vs {want} at ({lambda},{s2},{c})"
            );
        }
    }

    #[test]
    fn predictions_approach_the_limit_at_moderate_size() {
        let sc = wide_scenario(160, 320, &[5.0, 5.0], 1.0);
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        let want = variance_wide_uncorrelated(5.0, 1.0, 0.5).unwrap();
        assert!((want - 5.877551020408164).abs() < 1e-12);
        for method in [Method::GMusic, Method::Music] {
            let pred = predict_variance(method, &pop, 0).unwrap();
            assert!(
                (pred.variance - want).abs() < 0.05 * want,
                "{method} variance {} vs limit {want}",
                pred.variance
            );
            assert!(pred.gamma > 0.0);
        }
        // Curvature limits: d1* Pi d1 -> c^2/12, eta_t''/N^2 -> hand value.
        let g = predict_variance(Method::GMusic, &pop, 0).unwrap();
        assert!((g.curvature - 0.25 / 12.0).abs() < 0.01 * (0.25 / 12.0));
        let t = predict_variance(Method::Music, &pop, 0).unwrap();
        let curv_want = curvature_t_limit_wide_uncorrelated(5.0, 1.0, 0.5).unwrap();
        assert!((curv_want - 0.037121212121212116).abs() < 1e-15);
        assert!((t.curvature - curv_want).abs() < 0.02 * curv_want);
    }

    #[test]
    fn unsupported_methods_are_rejected() {
        let sc = wide_scenario(24, 48, &[5.0], 1.0);
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        for m in [Method::Periodogram, Method::TrueSpectrum, Method::Unconditional] {
            assert!(matches!(
                predict_variance(m, &pop, 0),
                Err(DoaLabError::UnsupportedMethod(_))
            ));
        }
        assert!(predict_variance(Method::GMusic, &pop, 5).is_err());
    }

    #[test]
    fn buried_spikes_are_reported_as_separation_violations() {
        assert!(matches!(
            vartheta_signal(0.5, 5.0, 1.0, 0.5),
            Err(DoaLabError::SeparationViolation { .. })
        ));
        assert!(matches!(
            variance_wide_uncorrelated(0.1, 1.0, 0.5),
            Err(DoaLabError::SeparationViolation { .. })
        ));
    }

    #[test]
    fn finite_difference_curvature_tracks_the_analytic_one() {
        let sc = wide_scenario(40, 80, &[10.0, 5.0], 1.0);
        let scm = crate::array::scm_from_scenario(&sc).unwrap();
        let eig = Arc::new(eig_hermitian(&scm, 80, 1.0).unwrap());
        let ps = PseudoSpectrum::gmusic(eig, 2).unwrap();
        let theta = sc.doa_angles()[0] + 0.3 * 2.0 * PI / 40.0;
        let analytic = ps.eval_derivative(theta, 2).unwrap();
        let fd = finite_difference_curvature(&ps, theta).unwrap();
        assert!(
            (analytic - fd).abs() < 1e-4 * analytic.abs().max(1.0),
            "curvature {analytic} vs finite difference {fd}"
        );
    }

    #[test]
    fn constant_spectrum_has_zero_curvature() {
        // A single-source true spectrum evaluated far from the source is
        // nearly flat; the absolute check uses an actually constant function:
        // the true spectrum of a full projector complement is 1 everywhere
        // only in trivial cases, so instead verify the FD stencil sums to 0
        // on a constant via the periodogram of the identity SCM.
        let scm: Array2<Complex64> = Array2::eye(8);
        let ps = PseudoSpectrum::periodogram(scm, 16).unwrap();
        // a(theta)^* I a(theta) = 1 for every theta.
        let fd = finite_difference_curvature(&ps, 0.7).unwrap();
        assert!(fd.abs() < 1e-4, "curvature of constant spectrum: {fd}");
    }

    #[test]
    fn plug_in_model_tracks_the_population_one() {
        let sc = ArrayScenario {
            source_model: SourceModel::SpikeExact,
            ..wide_scenario(60, 120, &[10.0, 5.0], 1.0)
        };
        let scm = crate::array::scm_from_scenario(&sc).unwrap();
        let eig = Arc::new(eig_hermitian(&scm, 120, 1.0).unwrap());
        let plug = PopulationModel::plug_in(&eig, 2, &sc.doa_angles()).unwrap();
        // De-biased spikes approach their targets.
        assert!((plug.spikes()[0] - 10.0).abs() < 1.5);
        assert!((plug.spikes()[1] - 5.0).abs() < 1.0);
        let pred = predict_variance(Method::GMusic, &plug, 0).unwrap();
        let truth = predict_variance(
            Method::GMusic,
            &PopulationModel::from_scenario(&sc).unwrap(),
            0,
        )
        .unwrap();
        assert!(
            (pred.variance - truth.variance).abs() < 0.5 * truth.variance,
            "plug-in {} vs population {}",
            pred.variance,
            truth.variance
        );
    }

    #[test]
    fn unit_cov_sources_share_a_degenerate_spike() {
        // Equal powers give a repeated population eigenvalue; the formulas
        // stay finite (the paper's coefficients allow coinciding spikes).
        let sc = wide_scenario(40, 80, &[5.0, 5.0], 1.0);
        let pop = PopulationModel::from_scenario(&sc).unwrap();
        let d1 = steering_derivative(0.0, 40, 1).unwrap() / Complex64::from(80.0);
        let d2 = steering(0.0, 40).unwrap();
        let g = gamma_gmusic(&pop, &d1, &d2).unwrap();
        assert!(g.is_finite() && g > 0.0);
        let _ = unit_cov(2);
    }
}
