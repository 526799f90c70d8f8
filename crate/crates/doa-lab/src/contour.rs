//! Contour-integral form of the corrected subspace estimator.
//!
//! Instead of weighting sample eigenvectors, the bilinear form
//! `d1^* Pi d2` is estimated as
//!
//! ```text
//! (1 / 2 pi i) . oint  d1^* (S S^* - z I)^{-1} d2 . g_hat(z) dz
//! ```
//!
//! over a rectangle enclosing the noise bulk (and nothing else), where
//! `g_hat` is built from the sample Stieltjes transform. No spike inversion
//! is involved, which makes this the natural cross-check for the weighted
//! estimator: both converge to the same limit, and their gap shrinks faster
//! than the estimation error itself.

use ndarray::Array1;
use num_complex::Complex64;

use crate::eigsys::SampleEigensystem;
use crate::error::{DoaLabError, Result};
use crate::rmt::mp_support;

/// Sample Stieltjes transform `(1/M) sum_j 1 / (lambda_j - z)`.
pub fn sample_stieltjes(eig: &SampleEigensystem, z: Complex64) -> Complex64 {
    let m = eig.dim() as f64;
    eig.eigenvalues()
        .iter()
        .map(|&l| (Complex64::from(l) - z).inv())
        .sum::<Complex64>()
        / m
}

/// Derivative `(1/M) sum_j 1 / (lambda_j - z)^2`.
pub fn sample_stieltjes_derivative(eig: &SampleEigensystem, z: Complex64) -> Complex64 {
    let m = eig.dim() as f64;
    eig.eigenvalues()
        .iter()
        .map(|&l| {
            let d = Complex64::from(l) - z;
            (d * d).inv()
        })
        .sum::<Complex64>()
        / m
}

/// Sample analogue of the weight function `g`:
/// `((1 - c_N) + c_N z^2 m_hat'(z)) / ((1 - c_N) - c_N z m_hat(z))`.
pub fn g_hat(eig: &SampleEigensystem, z: Complex64) -> Complex64 {
    let c = eig.c_n();
    let m = sample_stieltjes(eig, z);
    let mp = sample_stieltjes_derivative(eig, z);
    (Complex64::from(1.0 - c) + c * z * z * mp) / (Complex64::from(1.0 - c) - c * z * m)
}

/// Rectangle `[left, right] x [-half_height, half_height]` around the bulk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub left: f64,
    pub right: f64,
    pub half_height: f64,
}

/// Builds the bulk-enclosing rectangle for a spectrum whose top `k`
/// eigenvalues are treated as spikes.
///
/// The margin is `delta = min(0.25 (lambda_k - x_plus), 0.5 x_minus)`; the
/// rectangle spans `[x_minus - delta, x_plus + delta]` with imaginary
/// half-height `delta`. Fails when `c_N >= 1` (the null eigenvalues at the
/// origin cannot be separated from the bulk by this construction), when the
/// k-th eigenvalue does not clear the bulk edge, or when any noise eigenvalue
/// escapes the rectangle.
pub fn build_contour(eig: &SampleEigensystem, k: usize) -> Result<ContourSpec> {
    let m = eig.dim();
    if k == 0 || k >= m {
        return Err(DoaLabError::InvalidArgument(format!(
            "signal dimension k = {k} outside 1..{m}"
        )));
    }
    let c = eig.c_n();
    if c >= 1.0 {
        return Err(DoaLabError::InvalidArgument(format!(
            "contour construction requires c_N < 1, got {c}"
        )));
    }
    let sigma2 = eig.sigma2();
    let (lo, hi) = mp_support(sigma2, c)?;
    let lambda_k = eig.eigenvalues()[k - 1];
    if lambda_k <= hi {
        return Err(DoaLabError::SeparationViolation {
            index: k - 1,
            value: lambda_k,
            edge: hi,
        });
    }
    let delta = (0.25 * (lambda_k - hi)).min(0.5 * lo);
    let spec = ContourSpec {
        left: lo - delta,
        right: hi + delta,
        half_height: delta,
    };
    // Every noise eigenvalue must lie strictly inside the rectangle.
    for (j, &l) in eig.eigenvalues()[k..].iter().enumerate() {
        if l <= spec.left || l >= spec.right {
            return Err(DoaLabError::SeparationViolation {
                index: k + j,
                value: l,
                edge: if l <= spec.left { spec.left } else { spec.right },
            });
        }
    }
    Ok(spec)
}

/// One counterclockwise trapezoidal pass with `4 n` nodes (n per side).
pub fn contour_quadrature<F: FnMut(Complex64) -> Complex64>(
    spec: &ContourSpec,
    n_per_side: usize,
    mut f: F,
) -> Complex64 {
    let corners = [
        Complex64::new(spec.left, -spec.half_height),
        Complex64::new(spec.right, -spec.half_height),
        Complex64::new(spec.right, spec.half_height),
        Complex64::new(spec.left, spec.half_height),
    ];
    let mut acc = Complex64::new(0.0, 0.0);
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        let dz = (b - a) / n_per_side as f64;
        // Trapezoid on the segment; endpoints shared with neighbors.
        let mut prev = f(a);
        for i in 1..=n_per_side {
            let z = a + dz * i as f64;
            let cur = f(z);
            acc += (prev + cur) * 0.5 * dz;
            prev = cur;
        }
    }
    acc
}

/// Per-eigenvalue weights of the contour estimator:
/// `W_j = -(1/2 pi i) oint g_hat(z) / (lambda_j - z) dz`.
///
/// Swapping the eigenvalue sum and the quadrature turns every later bilinear
/// form into a plain weighted spectral sum, so the contour only has to be
/// walked once per eigensystem instead of once per evaluation point. Starts
/// from 512 total nodes and doubles until the weight vector moves by less
/// than 1e-8 in sup norm; since `sum_j |alpha_j| <= |d1| |d2|`, this bounds
/// the change of any unit-probe bilinear form by the same margin.
pub fn unconditional_weights(eig: &SampleEigensystem, k: usize) -> Result<Vec<f64>> {
    let spec = build_contour(eig, k)?;
    let m = eig.dim();
    let eigenvalues = eig.eigenvalues();
    let c = eig.c_n();
    let m_f = m as f64;

    // Adds w * g_hat(z) / (lambda_j - z) to every slot of `target`.
    let mut kernel = vec![Complex64::new(0.0, 0.0); m];
    let mut accumulate = |z: Complex64, w: Complex64, target: &mut [Complex64]| {
        let mut stieltjes = Complex64::new(0.0, 0.0);
        let mut stieltjes_d = Complex64::new(0.0, 0.0);
        for (slot, &l) in kernel.iter_mut().zip(eigenvalues) {
            let inv = (Complex64::from(l) - z).inv();
            *slot = inv;
            stieltjes += inv;
            stieltjes_d += inv * inv;
        }
        stieltjes /= m_f;
        stieltjes_d /= m_f;
        let g = (Complex64::from(1.0 - c) + c * z * z * stieltjes_d)
            / (Complex64::from(1.0 - c) - c * z * stieltjes);
        let wg = w * g;
        for (t, &kv) in target.iter_mut().zip(kernel.iter()) {
            *t += wg * kv;
        }
    };

    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let corners = [
        Complex64::new(spec.left, -spec.half_height),
        Complex64::new(spec.right, -spec.half_height),
        Complex64::new(spec.right, spec.half_height),
        Complex64::new(spec.left, spec.half_height),
    ];
    let mut n_per_side = 128usize; // 512 nodes across four sides
    let mut side_sums = vec![vec![Complex64::new(0.0, 0.0); m]; 4];
    for (s, sums) in side_sums.iter_mut().enumerate() {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        let h = (b - a) / n_per_side as f64;
        accumulate(a, h * 0.5, sums);
        accumulate(b, h * 0.5, sums);
        for i in 1..n_per_side {
            accumulate(a + h * i as f64, h, sums);
        }
    }
    let total = |sums: &[Vec<Complex64>]| -> Vec<Complex64> {
        (0..m)
            .map(|j| -(sums[0][j] + sums[1][j] + sums[2][j] + sums[3][j]) / two_pi_i)
            .collect()
    };
    // The weights on the noise eigenvalues come out positive only when the
    // boundary is taken clockwise (the residue of 1/(lambda - z) at lambda
    // is -1); integrating counterclockwise and negating includes that sign.
    let mut prev = total(&side_sums);
    // The corners cap the trapezoid at second order, so thin rectangles can
    // need many doublings; refining each side by its midpoints keeps the
    // total cost at about twice the finest level.
    for _ in 0..11 {
        n_per_side *= 2;
        for (s, sums) in side_sums.iter_mut().enumerate() {
            let a = corners[s];
            let b = corners[(s + 1) % 4];
            let h = (b - a) / n_per_side as f64;
            for slot in sums.iter_mut() {
                *slot *= 0.5;
            }
            let mut i = 1;
            while i < n_per_side {
                accumulate(a + h * i as f64, h, sums);
                i += 2;
            }
        }
        let cur = total(&side_sums);
        let gap = cur
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        if gap < 1e-8 {
            // Conjugate-symmetric nodes make the weights real up to rounding.
            let residue = cur.iter().map(|w| w.im.abs()).fold(0.0f64, f64::max);
            if residue > 1e-9 {
                return Err(DoaLabError::NumericFailure(format!(
                    "contour weights carry imaginary residue {residue:.3e}"
                )));
            }
            return Ok(cur.iter().map(|w| w.re).collect());
        }
        prev = cur;
    }
    Err(DoaLabError::NumericFailure(format!(
        "contour quadrature did not stabilize below 1e-8 at {} nodes",
        4 * n_per_side
    )))
}

/// Contour estimate of the bilinear form `d1^* Pi d2` (complex value).
///
/// One-shot convenience over [`unconditional_weights`]; callers evaluating
/// many probe vectors against one eigensystem should compute the weights
/// once and reuse them.
pub fn unconditional_bilinear(
    eig: &SampleEigensystem,
    k: usize,
    d1: &Array1<Complex64>,
    d2: &Array1<Complex64>,
) -> Result<Complex64> {
    let m = eig.dim();
    if d1.len() != m || d2.len() != m {
        return Err(DoaLabError::InvalidArgument(format!(
            "vector lengths {} / {} do not match dimension {m}",
            d1.len(),
            d2.len()
        )));
    }
    let weights = unconditional_weights(eig, k)?;
    Ok(crate::eigsys::weighted_bilinear(eig, d1, d2, |j, _| {
        Complex64::from(weights[j])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigsys::eig_hermitian;
    use ndarray::Array2;

    fn diag_eigsystem(values: &[f64], snapshots: usize, sigma2: f64) -> SampleEigensystem {
        let m = values.len();
        let mut a = Array2::<Complex64>::zeros((m, m));
        for (i, &v) in values.iter().enumerate() {
            a[[i, i]] = Complex64::from(v);
        }
        eig_hermitian(&a, snapshots, sigma2).unwrap()
    }

    #[test]
    fn sample_stieltjes_of_a_known_spectrum() {
        let eig = diag_eigsystem(&[1.0, 2.0, 3.0], 6, 1.0);
        let z = Complex64::from(5.0);
        let got = sample_stieltjes(&eig, z);
        let want = (1.0 / (1.0 - 5.0) + 1.0 / (2.0 - 5.0) + 1.0 / (3.0 - 5.0)) / 3.0;
        assert!((got - Complex64::from(want)).norm() < 1e-14);
        let gotd = sample_stieltjes_derivative(&eig, z);
        let wantd = (1.0 / 16.0 + 1.0 / 9.0 + 1.0 / 4.0) / 3.0;
        assert!((gotd - Complex64::from(wantd)).norm() < 1e-14);
    }

    #[test]
    fn contour_geometry_follows_the_margins() {
        // sigma2 = 1, c = 0.5: bulk [0.0858, 2.9142]; top eigenvalue at 6.6.
        let mut vals = vec![6.6];
        vals.extend((0..9).map(|i| 0.3 + 0.25 * i as f64)); // inside the bulk
        let eig = diag_eigsystem(&vals, 20, 1.0);
        let spec = build_contour(&eig, 1).unwrap();
        let (lo, hi) = mp_support(1.0, 0.5).unwrap();
        let delta = (0.25f64 * (6.6 - hi)).min(0.5 * lo);
        assert!((spec.left - (lo - delta)).abs() < 1e-12);
        assert!((spec.right - (hi + delta)).abs() < 1e-12);
        assert!((spec.half_height - delta).abs() < 1e-12);
    }

    #[test]
    fn contour_rejects_undersampled_and_buried_spectra() {
        let eig = diag_eigsystem(&[5.0, 1.0, 0.5], 2, 1.0); // c_N = 1.5
        assert!(matches!(
            build_contour(&eig, 1),
            Err(DoaLabError::InvalidArgument(_))
        ));
        // Spike below the bulk edge 2.914.
        let mut vals = vec![2.5];
        vals.extend((0..9).map(|i| 0.3 + 0.25 * i as f64));
        let eig = diag_eigsystem(&vals, 20, 1.0);
        assert!(matches!(
            build_contour(&eig, 1),
            Err(DoaLabError::SeparationViolation { .. })
        ));
        // Noise eigenvalue fallen out of the rectangle (near zero).
        let mut vals = vec![6.6];
        vals.extend((0..8).map(|i| 0.3 + 0.25 * i as f64));
        vals.push(0.01);
        let eig = diag_eigsystem(&vals, 20, 1.0);
        assert!(matches!(
            build_contour(&eig, 1),
            Err(DoaLabError::SeparationViolation { .. })
        ));
    }

    #[test]
    fn weight_reordering_matches_direct_quadrature() {
        // Summing the quadrature into per-eigenvalue weights first must give
        // the same bilinear value as integrating B(z) g_hat(z) directly.
        let mut vals = vec![6.6];
        vals.extend((0..9).map(|i| 0.3 + 0.25 * i as f64));
        let eig = diag_eigsystem(&vals, 20, 1.0);
        let m = eig.dim();
        let d1 = Array1::from_iter((0..m).map(|i| {
            Complex64::new((i as f64 * 0.37).cos(), (i as f64 * 0.61).sin()) / (m as f64).sqrt()
        }));
        let d2 = Array1::from_iter((0..m).map(|i| {
            Complex64::new((i as f64 * 0.19).sin(), (i as f64 * 0.83).cos()) / (m as f64).sqrt()
        }));
        let via_weights = unconditional_bilinear(&eig, 1, &d1, &d2).unwrap();

        let spec = build_contour(&eig, 1).unwrap();
        let u = eig.eigenvectors();
        let alpha: Vec<Complex64> = (0..m)
            .map(|j| {
                let col = u.column(j);
                let d1u: Complex64 =
                    d1.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
                let ud2: Complex64 =
                    col.iter().zip(d2.iter()).map(|(a, b)| a.conj() * b).sum();
                d1u * ud2
            })
            .collect();
        let direct = contour_quadrature(&spec, 1 << 17, |z| {
            let b: Complex64 = alpha
                .iter()
                .zip(eig.eigenvalues())
                .map(|(&a, &l)| a / (Complex64::from(l) - z))
                .sum();
            b * g_hat(&eig, z)
        }) / Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        assert!(
            (via_weights - (-direct)).norm() < 1e-6,
            "weights {via_weights} vs direct {}",
            -direct
        );
    }

    #[test]
    fn quadrature_picks_up_residues_of_a_rational_function() {
        // Integrate 1/(z - p) for p inside the rectangle: counterclockwise
        // orientation must return 2 pi i. The corners limit the per-side
        // trapezoid to second order, so check the error level and that
        // doubling the nodes cuts it by about four.
        let spec = ContourSpec {
            left: -1.0,
            right: 1.0,
            half_height: 0.5,
        };
        let pole = Complex64::new(0.3, 0.1);
        let want = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let err_256 = (contour_quadrature(&spec, 256, |z| (z - pole).inv()) - want).norm();
        let err_512 = (contour_quadrature(&spec, 512, |z| (z - pole).inv()) - want).norm();
        assert!(err_256 < 1e-4, "coarse error {err_256:.2e}");
        assert!(
            err_512 < 0.3 * err_256,
            "no second-order decay: {err_256:.2e} -> {err_512:.2e}"
        );
        // Pole outside: zero at the same accuracy.
        let outside = Complex64::new(2.0, 0.0);
        let got = contour_quadrature(&spec, 256, |z| (z - outside).inv());
        assert!(got.norm() < 1e-4);
    }
}
