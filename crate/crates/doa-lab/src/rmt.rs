//! Marchenko-Pastur law, its Stieltjes transform, and the spiked-model
//! spectral maps.
//!
//! Everything here is deterministic theory for the noise-only sample
//! covariance with per-entry variance `sigma2` and aspect ratio `c = M/N`:
//!
//! * bulk support `[x_minus, x_plus] = sigma2 (1 -+ sqrt(c))^2`, plus an atom
//!   of mass `1 - 1/c` at zero when `c > 1`;
//! * the Stieltjes transform `m(z)`, the unique solution of
//!   `sigma2 c z m^2 + (z - sigma2 (1 - c)) m + 1 = 0` with `Im m . Im z > 0`;
//! * the companion map `w(z) = z (1 + sigma2 c m)^2 - sigma2 (1-c)(1 + sigma2 c m)`,
//!   which inverts the spike map `phi` on the real axis beyond the bulk;
//! * the spike map `phi(lambda) = (lambda + sigma2)(lambda + sigma2 c)/lambda`
//!   and the eigenvector weight `h(lambda)`, defined for
//!   `lambda > sigma2 sqrt(c)`.

use num_complex::Complex64;

use crate::error::{DoaLabError, Result};

fn check_law(sigma2: f64, c: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(DoaLabError::InvalidArgument(format!(
            "noise power must be positive, got {sigma2}"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(DoaLabError::InvalidArgument(format!(
            "aspect ratio must be positive, got {c}"
        )));
    }
    Ok(())
}

/// Bulk support endpoints `sigma2 (1 - sqrt(c))^2` and `sigma2 (1 + sqrt(c))^2`.
pub fn mp_support(sigma2: f64, c: f64) -> Result<(f64, f64)> {
    check_law(sigma2, c)?;
    let r = c.sqrt();
    Ok((sigma2 * (1.0 - r) * (1.0 - r), sigma2 * (1.0 + r) * (1.0 + r)))
}

/// Mass of the atom at zero: `max(0, 1 - 1/c)`.
pub fn mp_atom(c: f64) -> f64 {
    (1.0 - 1.0 / c).max(0.0)
}

/// Density of the continuous part on the bulk, zero elsewhere.
pub fn mp_density(x: f64, sigma2: f64, c: f64) -> Result<f64> {
    let (lo, hi) = mp_support(sigma2, c)?;
    if !x.is_finite() {
        return Err(DoaLabError::InvalidArgument("x must be finite".into()));
    }
    if x <= lo || x >= hi {
        return Ok(0.0);
    }
    Ok(((x - lo) * (hi - x)).sqrt() / (2.0 * sigma2 * c * std::f64::consts::PI * x))
}

/// Distribution function of the Marchenko-Pastur law (atom included).
///
/// The bulk integral is computed on the angular substitution
/// `x = center + radius sin(t)`, which removes the square-root edge
/// singularities; composite Simpson on the smooth integrand then converges to
/// ~1e-12.
pub fn mp_cdf(x: f64, sigma2: f64, c: f64) -> Result<f64> {
    let (lo, hi) = mp_support(sigma2, c)?;
    let atom = mp_atom(c);
    if x < 0.0 {
        return Ok(0.0);
    }
    if x <= lo {
        return Ok(atom);
    }
    if x >= hi {
        return Ok(1.0);
    }
    let center = 0.5 * (hi + lo);
    let radius = 0.5 * (hi - lo);
    let t_hi = ((x - center) / radius).clamp(-1.0, 1.0).asin();
    let f = |t: f64| {
        let cos = t.cos();
        radius * radius * cos * cos
            / (2.0 * std::f64::consts::PI * sigma2 * c * (center + radius * t.sin()))
    };
    Ok(atom + simpson(f, -std::f64::consts::FRAC_PI_2, t_hi, 2048))
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2) & !1usize; // even
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Stieltjes transform `m(z)` of the Marchenko-Pastur law.
///
/// `z` must lie off the closed support (and off the atom at zero when
/// `c >= 1`). Off the real axis the branch satisfies `Im m . Im z > 0`; on the
/// real axis outside the bulk it is the boundary value of that branch, which
/// is the root of the defining quadratic with `m'(z) > 0`.
pub fn mp_stieltjes(z: Complex64, sigma2: f64, c: f64) -> Result<Complex64> {
    check_law(sigma2, c)?;
    let (lo, hi) = mp_support(sigma2, c)?;
    if z.im == 0.0 {
        let x = z.re;
        if x >= lo && x <= hi {
            return Err(DoaLabError::InvalidArgument(format!(
                "z = {x} lies on the bulk [{lo}, {hi}]"
            )));
        }
        if c >= 1.0 && x == 0.0 {
            return Err(DoaLabError::InvalidArgument(
                "z = 0 carries an atom when c >= 1".into(),
            ));
        }
        if x == 0.0 {
            // Quadratic degenerates to a linear equation at the origin.
            return Ok(Complex64::from(1.0 / (sigma2 * (1.0 - c))));
        }
    }

    let a = Complex64::from(sigma2 * c) * z;
    let b = z - Complex64::from(sigma2 * (1.0 - c));
    let disc = b * b - 4.0 * a;
    let sq = disc.sqrt();
    let r1 = (-b + sq) / (2.0 * a);
    let r2 = (-b - sq) / (2.0 * a);

    if z.im != 0.0 {
        // Herglotz branch: m maps the upper half plane into itself.
        let pick = if r1.im * z.im > 0.0 { r1 } else { r2 };
        return Ok(pick);
    }
    // Real z off the bulk: the correct boundary value has positive derivative
    // (it is the Cauchy transform of a positive measure).
    let deriv_positive = |m: Complex64| -> bool {
        let num = Complex64::from(sigma2 * c) * m * m + m;
        let den = 2.0 * a * m + b;
        (-num / den).re > 0.0
    };
    if deriv_positive(r1) {
        Ok(r1)
    } else {
        Ok(r2)
    }
}

/// Derivative `m'(z)`, by implicit differentiation of the defining quadratic.
pub fn mp_stieltjes_derivative(z: Complex64, sigma2: f64, c: f64) -> Result<Complex64> {
    let m = mp_stieltjes(z, sigma2, c)?;
    let num = Complex64::from(sigma2 * c) * m * m + m;
    let den = 2.0 * Complex64::from(sigma2 * c) * z * m + z - Complex64::from(sigma2 * (1.0 - c));
    if den.norm() < 1e-300 {
        return Err(DoaLabError::NumericFailure(
            "Stieltjes derivative at a branch point".into(),
        ));
    }
    Ok(-num / den)
}

/// Companion map `w(z) = z (1 + sigma2 c m)^2 - sigma2 (1-c)(1 + sigma2 c m)`.
///
/// On the real axis beyond the bulk it inverts the spike map:
/// `w(phi(lambda)) = lambda` whenever `phi(lambda) > x_plus`.
pub fn w_of_z(z: Complex64, sigma2: f64, c: f64) -> Result<Complex64> {
    let m = mp_stieltjes(z, sigma2, c)?;
    let u = Complex64::from(1.0) + sigma2 * c * m;
    Ok(z * u * u - sigma2 * (1.0 - c) * u)
}

/// Derivative `w'(z)`.
pub fn w_prime(z: Complex64, sigma2: f64, c: f64) -> Result<Complex64> {
    let m = mp_stieltjes(z, sigma2, c)?;
    let mp = mp_stieltjes_derivative(z, sigma2, c)?;
    let u = Complex64::from(1.0) + sigma2 * c * m;
    let up = sigma2 * c * mp;
    Ok(u * u + up * (2.0 * z * u - sigma2 * (1.0 - c)))
}

/// Weight function `g(z) = ((1-c) + c z^2 m'(z)) / ((1-c) - c z m(z))`
/// entering the contour-integral form of the corrected subspace estimator.
/// Identically equal to `w'(z) / (1 + sigma2 c m(z))`.
pub fn g_of_z(z: Complex64, sigma2: f64, c: f64) -> Result<Complex64> {
    let m = mp_stieltjes(z, sigma2, c)?;
    let mp = mp_stieltjes_derivative(z, sigma2, c)?;
    let num = Complex64::from(1.0 - c) + c * z * z * mp;
    let den = Complex64::from(1.0 - c) - c * z * m;
    if den.norm() < 1e-14 {
        return Err(DoaLabError::NumericFailure(
            "vanishing denominator in g(z)".into(),
        ));
    }
    Ok(num / den)
}

/// Spike threshold `sigma2 sqrt(c)`: population signal-space eigenvalues at or
/// below it are swallowed by the bulk.
pub fn spike_threshold(sigma2: f64, c: f64) -> f64 {
    sigma2 * c.sqrt()
}

/// Spike map `phi(lambda) = (lambda + sigma2)(lambda + sigma2 c) / lambda`:
/// the almost-sure limit of the sample eigenvalue escaping the bulk for a
/// population spike `lambda > sigma2 sqrt(c)`.
pub fn phi(lambda: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_law(sigma2, c)?;
    if lambda <= spike_threshold(sigma2, c) {
        return Err(DoaLabError::SeparationViolation {
            index: 0,
            value: lambda,
            edge: spike_threshold(sigma2, c),
        });
    }
    Ok((lambda + sigma2) * (lambda + sigma2 * c) / lambda)
}

/// Squared-cosine weight `h(lambda) = (lambda^2 - sigma2^2 c) /
/// (lambda (lambda + sigma2 c))`: the limit of `|u_hat^* u|^2` for the sample
/// and population eigenvectors attached to a separated spike. Lies in (0, 1).
pub fn h_of_spike(lambda: f64, sigma2: f64, c: f64) -> Result<f64> {
    check_law(sigma2, c)?;
    if lambda <= spike_threshold(sigma2, c) {
        return Err(DoaLabError::SeparationViolation {
            index: 0,
            value: lambda,
            edge: spike_threshold(sigma2, c),
        });
    }
    Ok((lambda * lambda - sigma2 * sigma2 * c) / (lambda * (lambda + sigma2 * c)))
}

/// Inverts the spike map on a sample eigenvalue above the bulk edge: the
/// larger root of `w^2 + (sigma2 (1 + c) - lambda_hat) w + sigma2^2 c = 0`,
/// which always exceeds `sigma2 sqrt(c)`.
pub fn invert_phi(lambda_hat: f64, sigma2: f64, c: f64) -> Result<f64> {
    let (_, hi) = mp_support(sigma2, c)?;
    if lambda_hat <= hi {
        return Err(DoaLabError::SeparationViolation {
            index: 0,
            value: lambda_hat,
            edge: hi,
        });
    }
    let b = sigma2 * (1.0 + c) - lambda_hat;
    let disc = b * b - 4.0 * sigma2 * sigma2 * c;
    debug_assert!(disc > 0.0, "discriminant must be positive beyond the edge");
    Ok(0.5 * (-b + disc.sqrt()))
}

/// A noise law plus a set of population signal-space eigenvalues.
#[derive(Debug, Clone)]
pub struct SpikeModel {
    pub sigma2: f64,
    pub c: f64,
    /// Population signal-space eigenvalues, any order.
    pub spikes: Vec<f64>,
}

/// Outcome of [`SpikeModel::separation_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    /// True when every spike clears the threshold strictly.
    pub ok: bool,
    /// Smallest spike minus `sigma2 sqrt(c)`; negative when violated.
    pub margin: f64,
}

impl SpikeModel {
    pub fn new(sigma2: f64, c: f64, spikes: Vec<f64>) -> Result<Self> {
        check_law(sigma2, c)?;
        if spikes.is_empty() {
            return Err(DoaLabError::InvalidArgument("no spikes given".into()));
        }
        if spikes.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(DoaLabError::InvalidArgument(
                "spikes must be positive and finite".into(),
            ));
        }
        Ok(Self { sigma2, c, spikes })
    }

    /// Checks every spike against the subspace separation threshold.
    pub fn separation_check(&self) -> SeparationReport {
        let edge = spike_threshold(self.sigma2, self.c);
        let min = self.spikes.iter().cloned().fold(f64::INFINITY, f64::min);
        SeparationReport {
            ok: min > edge,
            margin: min - edge,
        }
    }

    /// Limits of the sample eigenvalues attached to each spike (descending
    /// spikes map to descending limits).
    pub fn sample_limits(&self) -> Result<Vec<f64>> {
        self.spikes
            .iter()
            .map(|&s| phi(s, self.sigma2, self.c))
            .collect()
    }
}

/// Kolmogorov-Smirnov sup-distance between the empirical CDF of `values`
/// and the Marchenko-Pastur CDF. The caller excludes spike eigenvalues; the
/// remaining sample is sorted internally.
pub fn mp_cdf_gap(values: &[f64], sigma2: f64, c: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(DoaLabError::InvalidArgument("empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues must not be NaN"));
    let n = sorted.len() as f64;
    let mut gap: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = mp_cdf(x, sigma2, c)?;
        gap = gap.max(cdf - i as f64 / n).max((i + 1) as f64 / n - cdf);
    }
    Ok(gap)
}
