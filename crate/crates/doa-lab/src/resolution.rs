//! Resolution limits for two closely spaced sources.
//!
//! Two equal-power uncorrelated sources at electrical spacing `alpha / N`
//! produce signal eigenvalues converging to `1 +- |sinc(alpha c / 2)|`. The
//! localization functions then concentrate around limit profiles:
//!
//! * `kappa(beta)`: the subspace-corrected profile, `<= 1` with equality
//!   exactly at `beta = 0` and `beta = alpha`, so the corrected estimator
//!   resolves any spacing that keeps the spikes separated.
//! * `kappa_t(beta)`: the uncorrected profile, whose maxima can drift away
//!   from `{0, alpha}`; when they do, the plain subspace scan is not
//!   `1/N`-consistent at that spacing.
//!
//! Whether `0` and `alpha` are maxima of `kappa_t` has no known closed-form
//! classification, so a numerical local-max test is provided.

use crate::error::{DoaLabError, Result};
use crate::rmt::SeparationReport;
use crate::util::sinc;

/// Limit description of the two-source closely spaced scenario.
#[derive(Debug, Clone, Copy)]
pub struct TwoSourceModel {
    /// Spacing parameter: the sources sit at `theta1` and `theta1 + alpha/N`.
    pub alpha: f64,
    /// Aspect ratio `M / N`.
    pub c: f64,
    /// Noise power.
    pub sigma2: f64,
}

impl TwoSourceModel {
    pub fn new(alpha: f64, c: f64, sigma2: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(DoaLabError::InvalidArgument(format!(
                "spacing alpha = {alpha} must be positive and finite"
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(DoaLabError::InvalidArgument(format!(
                "aspect ratio c = {c} must be positive and finite"
            )));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(DoaLabError::InvalidArgument(format!(
                "noise power sigma2 = {sigma2} must be nonnegative and finite"
            )));
        }
        Ok(Self { alpha, c, sigma2 })
    }

    /// `sinc(alpha c / 2)` with its sign; negative past the first sinc zero.
    pub fn s_signed(&self) -> f64 {
        sinc(self.alpha * self.c / 2.0)
    }

    /// `|sinc(alpha c / 2)|`, the source-overlap magnitude.
    pub fn s_abs(&self) -> f64 {
        self.s_signed().abs()
    }

    /// Larger limiting signal eigenvalue `1 + |sinc(alpha c / 2)|`.
    pub fn lambda1(&self) -> f64 {
        1.0 + self.s_abs()
    }

    /// Smaller limiting signal eigenvalue `1 - |sinc(alpha c / 2)|`.
    pub fn lambda2(&self) -> f64 {
        1.0 - self.s_abs()
    }

    /// Weight attached to the difference profile: `(lambda2^2 - sigma^4 c) /
    /// (lambda2 (lambda2 + sigma^2 c))`. Negative once the small eigenvalue
    /// falls under the subspace threshold.
    pub fn d1(&self) -> Result<f64> {
        self.eigen_weight(self.lambda2())
    }

    /// Weight attached to the sum profile, same form built on `lambda1`.
    pub fn d2(&self) -> Result<f64> {
        self.eigen_weight(self.lambda1())
    }

    fn eigen_weight(&self, lambda: f64) -> Result<f64> {
        if lambda < 1e-12 {
            return Err(DoaLabError::InvalidArgument(format!(
                "degenerate limiting eigenvalue {lambda}: sources coincide"
            )));
        }
        let s4c = self.sigma2 * self.sigma2 * self.c;
        Ok((lambda * lambda - s4c) / (lambda * (lambda + self.sigma2 * self.c)))
    }

    /// Subspace separation for the small spike: `|sinc(alpha c / 2)| <
    /// 1 - sigma^2 sqrt(c)`; the margin is the slack in that inequality.
    pub fn separation_check(&self) -> SeparationReport {
        let margin = 1.0 - self.sigma2 * self.c.sqrt() - self.s_abs();
        SeparationReport {
            ok: margin > 0.0,
            margin,
        }
    }

    /// Limit profile of the corrected pseudo-spectrum around the pair:
    /// `eta(theta1 + beta/N) -> 1 - kappa(beta)`.
    pub fn kappa(&self, beta: f64) -> Result<f64> {
        let s = self.s_signed();
        let denom = 1.0 - s * s;
        if denom < 1e-12 {
            return Err(DoaLabError::InvalidArgument(
                "kappa undefined at full overlap (sinc(alpha c / 2)^2 = 1)".into(),
            ));
        }
        let sb = sinc(beta * self.c / 2.0);
        let sba = sinc((beta - self.alpha) * self.c / 2.0);
        // Projection-residual form of (sb^2 + sba^2 - 2 s sb sba) / (1 - s^2):
        // algebraically identical, but immune to the cancellation that costs
        // a few ulps when the pair is nearly coherent (s close to 1). It also
        // makes kappa exactly 1 at beta = 0 and beta = alpha, where one sinc
        // factor is 1 and the other reduces to s bit-for-bit.
        let resid = sb - s * sba;
        Ok(resid * resid / denom + sba * sba)
    }

    /// Limit profile of the uncorrected pseudo-spectrum, written on the
    /// limiting eigenvalues.
    pub fn kappa_t(&self, beta: f64) -> Result<f64> {
        let (l1, l2) = (self.lambda1(), self.lambda2());
        if l2 < 1e-12 {
            return Err(DoaLabError::InvalidArgument(
                "kappa_t undefined at full overlap (lambda2 = 0)".into(),
            ));
        }
        let s4c = self.sigma2 * self.sigma2 * self.c;
        let s2c = self.sigma2 * self.c;
        let sb = sinc(beta * self.c / 2.0);
        let sba = sinc((beta - self.alpha) * self.c / 2.0);
        let plus = sb + sba;
        let minus = sb - sba;
        Ok((l1 * l1 - s4c) * plus * plus / (2.0 * l1 * l1 * (l1 + s2c))
            + (l2 * l2 - s4c) * minus * minus / (2.0 * l2 * l2 * (l2 + s2c)))
    }

    /// Same function written on the eigen-weights `d1, d2`; must agree with
    /// [`TwoSourceModel::kappa_t`] to rounding.
    pub fn kappa_t_d_form(&self, beta: f64) -> Result<f64> {
        let s = self.s_abs();
        let d1 = self.d1()?;
        let d2 = self.d2()?;
        let sb = sinc(beta * self.c / 2.0);
        let sba = sinc((beta - self.alpha) * self.c / 2.0);
        let plus = sb + sba;
        let minus = sb - sba;
        Ok(minus * minus * d1 / (2.0 * (1.0 - s)) + plus * plus * d2 / (2.0 * (1.0 + s)))
    }

    /// Numerical test for a local maximum of `kappa_t` at `beta0`.
    ///
    /// Which spacings make `0` and `alpha` maxima has no known closed form,
    /// so this compares against neighbors at several shrinking offsets.
    pub fn kappa_t_is_local_max(&self, beta0: f64) -> Result<bool> {
        let f0 = self.kappa_t(beta0)?;
        let scale = self.alpha.max(1.0);
        for exp in 2..=6 {
            let h = scale * 10f64.powi(-exp);
            if self.kappa_t(beta0 + h)? > f0 + 1e-14 || self.kappa_t(beta0 - h)? > f0 + 1e-14 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn model(alpha: f64) -> TwoSourceModel {
        TwoSourceModel::new(alpha, 0.5, 1.0).unwrap()
    }

    /// Squared norm of the projection of e^{i beta c t} onto
    /// span{1, e^{i alpha c t}} in L^2[0,1], via the 2x2 Gram system.
    fn gram_projection_norm(alpha: f64, beta: f64, c: f64) -> f64 {
        let inner = |p: f64, q: f64| -> Complex64 {
            // <e^{ipct}, e^{iqct}> = integral of e^{i(p-q)ct}.
            let x = (p - q) * c / 2.0;
            Complex64::from_polar(sinc(x), x)
        };
        // Entry (i, j) is integral of x_i^* x_j, matching b_i below.
        let g = array![
            [inner(0.0, 0.0), inner(alpha, 0.0)],
            [inner(0.0, alpha), inner(alpha, alpha)],
        ];
        let b: Array1<Complex64> = array![inner(beta, 0.0), inner(beta, alpha)];
        let det = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
        let sol = array![
            (g[[1, 1]] * b[0] - g[[0, 1]] * b[1]) / det,
            (g[[0, 0]] * b[1] - g[[1, 0]] * b[0]) / det,
        ];
        // b^* G^{-1} b is real by construction.
        (b[0].conj() * sol[0] + b[1].conj() * sol[1]).re
    }

    #[test]
    fn eigenvalue_limits_sum_to_two_and_order() {
        for alpha in [0.25 * PI / 0.5, 2.0 * PI / 0.5, 7.3] {
            let m = model(alpha);
            assert!((m.lambda1() + m.lambda2() - 2.0).abs() < 1e-15);
            assert!(m.lambda1() >= m.lambda2());
            assert!(m.s_abs() <= 1.0);
        }
    }

    #[test]
    fn kappa_is_one_exactly_at_zero_and_alpha() {
        for alpha in [0.25 * PI / 0.5, 2.0 * PI / 0.5, 3.0] {
            let m = model(alpha);
            assert!((m.kappa(0.0).unwrap() - 1.0).abs() < 1e-14);
            assert!((m.kappa(alpha).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn kappa_stays_below_one_away_from_the_sources() {
        // Grid over [-10 alpha, 10 alpha] with exclusion windows of 1e-6
        // around the two contact points.
        for alpha in [0.25 * PI / 0.5, 2.0 * PI / 0.5] {
            let m = model(alpha);
            let n = 4001;
            for i in 0..n {
                let beta = -10.0 * alpha + 20.0 * alpha * i as f64 / (n - 1) as f64;
                if (beta).abs() < 1e-6 || (beta - alpha).abs() < 1e-6 {
                    continue;
                }
                let k = m.kappa(beta).unwrap();
                assert!(k < 1.0, "kappa({beta}) = {k} >= 1 at alpha = {alpha}");
            }
        }
    }

    #[test]
    fn kappa_matches_the_gram_projection() {
        // The profile is the squared norm of an orthogonal projection of a
        // unit vector, computed here independently from the Gram system.
        for alpha in [0.25 * PI / 0.5, 2.0 * PI / 0.5, 3.0 * PI / 0.5] {
            let m = model(alpha);
            for i in 0..80 {
                let beta = -0.5 * alpha + 2.0 * alpha * i as f64 / 79.0;
                let got = m.kappa(beta).unwrap();
                let want = gram_projection_norm(alpha, beta, 0.5);
                assert!(
                    (got - want).abs() < 1e-12,
                    "alpha {alpha} beta {beta}: formula {got} vs projection {want}"
                );
            }
        }
    }

    #[test]
    fn kappa_t_forms_agree_to_rounding() {
        for alpha in [0.25 * PI / 0.5, 2.0 * PI / 0.5] {
            let m = model(alpha);
            for i in 0..200 {
                let beta = -0.5 * alpha + 2.0 * alpha * i as f64 / 199.0;
                let lam = m.kappa_t(beta).unwrap();
                let d = m.kappa_t_d_form(beta).unwrap();
                assert!(
                    (lam - d).abs() < 1e-12,
                    "forms split at alpha {alpha} beta {beta}: {lam} vs {d}"
                );
            }
        }
    }

    #[test]
    fn kappa_t_at_zero_overlap_reduces_to_a_third() {
        // alpha = 2 pi / c makes sinc(alpha c / 2) = sinc(pi) = 0, so both
        // eigenvalues are 1 and kappa_t(0) = (1 - sigma^4 c)/(1 + sigma^2 c).
        let m = model(2.0 * PI / 0.5);
        assert!(m.s_abs() < 1e-15);
        let got = m.kappa_t(0.0).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-14, "kappa_t(0) = {got}");
    }

    #[test]
    fn kappa_t_derivative_is_nonzero_at_the_sources_for_pi_over_c() {
        // At alpha = pi / c the uncorrected profile has no stationary point
        // at 0 or alpha, which is what breaks its 1/N-consistency there.
        let alpha = PI / 0.5;
        let m = model(alpha);
        let h = 1e-6;
        for beta0 in [0.0, alpha] {
            let d = (m.kappa_t(beta0 + h).unwrap() - m.kappa_t(beta0 - h).unwrap()) / (2.0 * h);
            assert!(
                d.abs() > 1e-3,
                "kappa_t'({beta0}) = {d} unexpectedly close to 0"
            );
            assert!(!m.kappa_t_is_local_max(beta0).unwrap());
        }
    }

    #[test]
    fn kappa_t_keeps_its_maximum_at_zero_for_orthogonal_spacing() {
        // At alpha = 2 pi / c the overlap vanishes and both contact points
        // are genuine local maxima of the uncorrected profile.
        let m = model(2.0 * PI / 0.5);
        assert!(m.kappa_t_is_local_max(0.0).unwrap());
        assert!(m.kappa_t_is_local_max(m.alpha).unwrap());
    }

    #[test]
    fn separation_margin_matches_hand_value() {
        // alpha = 0.25 pi / c: |sinc(pi/8)| ~ 0.9745 exceeds 1 - sqrt(0.5),
        // so the small spike is buried and the check must fail.
        let m = model(0.25 * PI / 0.5);
        let rep = m.separation_check();
        assert!(!rep.ok);
        let want = 1.0 - 0.5f64.sqrt() - sinc(PI / 8.0);
        assert!((rep.margin - want).abs() < 1e-15);
        // Orthogonal spacing separates comfortably.
        let rep = model(2.0 * PI / 0.5).separation_check();
        assert!(rep.ok);
        assert!((rep.margin - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn degenerate_spacing_is_rejected() {
        assert!(TwoSourceModel::new(0.0, 0.5, 1.0).is_err());
        assert!(TwoSourceModel::new(-1.0, 0.5, 1.0).is_err());
        assert!(TwoSourceModel::new(1.0, 0.0, 1.0).is_err());
        assert!(TwoSourceModel::new(1.0, 0.5, -1.0).is_err());
        // Tiny alpha keeps s^2 = 1 within rounding: kappa must refuse.
        let m = TwoSourceModel::new(1e-12, 0.5, 1.0).unwrap();
        assert!(m.kappa(0.5).is_err());
        assert!(m.kappa_t(0.5).is_err());
    }
}
