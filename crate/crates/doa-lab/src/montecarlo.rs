//! Seeded, reproducible Monte Carlo experiments over the estimators.
//!
//! Every trial derives its RNG seed from `(master_seed, snr_index, trial)`,
//! so results are independent of thread count and schedule; rayon only
//! decides who computes what, never what gets computed. All methods of a
//! plan share the per-trial eigensystem, which mirrors how the estimators
//! would be compared on real data and removes between-method sampling noise.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::Arc;

use crate::array::{scm_from_scenario, steering_matrix, ArrayScenario};
use crate::clt::{predict_variance, CltPrediction, PopulationModel};
use crate::eigsys::eig_hermitian;
use crate::error::{DoaLabError, Result};
use crate::spectrum::{extract_doas, Method, PseudoSpectrum, SearchInterval};
use crate::util::mix_seed;

/// Converts an SNR in dB (defined as `-10 log10 sigma^2` for unit-power
/// steering vectors) to the noise power.
pub fn snr_db_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Inverse of [`snr_db_to_sigma2`].
pub fn sigma2_to_snr_db(sigma2: f64) -> f64 {
    -10.0 * sigma2.log10()
}

/// A sweep of repeated trials over an SNR grid.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Scenario template; its noise power is overridden per grid point.
    pub scenario: ArrayScenario,
    /// SNR grid in dB, strictly increasing.
    pub snr_grid_db: Vec<f64>,
    /// Estimators to run on each trial's shared eigensystem.
    pub methods: Vec<Method>,
    /// Trials per grid point.
    pub trials: usize,
    /// Master seed; per-trial seeds are mixed from it.
    pub master_seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(DoaLabError::InvalidArgument("trials must be positive".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(DoaLabError::InvalidArgument("empty SNR grid".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DoaLabError::InvalidArgument(
                "SNR grid must be strictly increasing".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(DoaLabError::InvalidArgument("no methods requested".into()));
        }
        Ok(())
    }
}

/// Search windows centered on the true angles, half-width a quarter of the
/// smallest angular gap (half the full circle for a single source). Estimates
/// are matched to sources by construction.
pub fn default_intervals(scenario: &ArrayScenario) -> Result<Vec<SearchInterval>> {
    let thetas = scenario.doa_angles();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut intervals = Vec::with_capacity(thetas.len());
    for (k, &t) in thetas.iter().enumerate() {
        let mut gap = two_pi;
        for (j, &s) in thetas.iter().enumerate() {
            if j != k {
                let d = (t - s).rem_euclid(two_pi);
                gap = gap.min(d.min(two_pi - d));
            }
        }
        intervals.push(SearchInterval::new(t - 0.25 * gap, t + 0.25 * gap)?);
    }
    Ok(intervals)
}

/// Outcome of one method on one synthesized snapshot matrix.
#[derive(Debug)]
pub struct TrialOutcome {
    pub method: Method,
    /// Estimated angles (source order), or the failure that prevented them.
    pub angles: Result<Vec<f64>>,
    /// Signal eigenvalues that kept the uncorrected weight (G-MUSIC only).
    pub fallbacks: usize,
}

/// Builds the requested localization function on a shared eigensystem.
fn build_spectrum(
    method: Method,
    scenario: &ArrayScenario,
    scm: &ndarray::Array2<Complex64>,
    eig: &Arc<crate::eigsys::SampleEigensystem>,
) -> Result<PseudoSpectrum> {
    let k = scenario.num_sources();
    match method {
        Method::TrueSpectrum => {
            let a = steering_matrix(&scenario.doa_angles(), scenario.sensors)?;
            PseudoSpectrum::true_spectrum(&a, scenario.snapshots)
        }
        Method::Music => PseudoSpectrum::music(Arc::clone(eig), k),
        Method::GMusic => PseudoSpectrum::gmusic_with_fallback(Arc::clone(eig), k),
        Method::Periodogram => PseudoSpectrum::periodogram(scm.clone(), scenario.snapshots),
        Method::Unconditional => PseudoSpectrum::unconditional(Arc::clone(eig), k),
    }
}

/// Runs every method once on a freshly synthesized snapshot matrix.
pub fn run_trial(
    scenario: &ArrayScenario,
    methods: &[Method],
    intervals: &[SearchInterval],
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    let sc = scenario.with_seed(seed);
    let scm = scm_from_scenario(&sc)?;
    let eig = Arc::new(eig_hermitian(&scm, sc.snapshots, sc.noise_power)?);
    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let spectrum = build_spectrum(method, &sc, &scm, &eig);
        let (angles, fallbacks) = match spectrum {
            Ok(ps) => (
                extract_doas(&ps, intervals).map(|est| est.angles()),
                ps.fallback_count(),
            ),
            Err(e) => (Err(e), 0),
        };
        outcomes.push(TrialOutcome {
            method,
            angles,
            fallbacks,
        });
    }
    Ok(outcomes)
}

/// One (method, SNR) cell of a sweep.
#[derive(Debug, Clone)]
pub struct MseRecord {
    pub method: Method,
    pub snr_db: f64,
    pub sigma2: f64,
    /// Mean over sources and successful trials of the squared angle error.
    pub mse_empirical: f64,
    /// CLT prediction `variance / N^3` averaged over sources; absent for
    /// methods without a fluctuation theory or below their separation point.
    pub mse_theory: Option<f64>,
    /// Trials that produced estimates.
    pub trials_used: usize,
    /// Trials where the method failed outright.
    pub failures: usize,
    /// Total fallback weights across trials (G-MUSIC only).
    pub fallbacks: usize,
    /// Standard error of `mse_empirical` over trials.
    pub std_error: f64,
}

/// Theoretical per-angle MSE for one method at one noise level, averaged
/// over sources; `None` where no prediction applies.
fn theory_mse(method: Method, scenario: &ArrayScenario) -> Option<f64> {
    if !matches!(method, Method::Music | Method::GMusic) {
        return None;
    }
    let pop = PopulationModel::from_scenario(scenario).ok()?;
    let n3 = (scenario.snapshots as f64).powi(3);
    let mut acc = 0.0;
    for k in 0..pop.thetas().len() {
        let pred = predict_variance(method, &pop, k).ok()?;
        acc += pred.variance / n3;
    }
    Some(acc / pop.thetas().len() as f64)
}

/// Runs the full plan and aggregates per (SNR, method).
pub fn mse_sweep(plan: &ExperimentPlan) -> Result<Vec<MseRecord>> {
    plan.validate()?;
    let intervals = default_intervals(&plan.scenario)?;
    let thetas = plan.scenario.doa_angles();
    let mut records = Vec::new();
    for (snr_idx, &snr_db) in plan.snr_grid_db.iter().enumerate() {
        let sigma2 = snr_db_to_sigma2(snr_db);
        let scenario = plan.scenario.with_noise_power(sigma2);
        let trials: Vec<Result<Vec<TrialOutcome>>> = (0..plan.trials)
            .into_par_iter()
            .map(|t| {
                let seed = mix_seed(plan.master_seed, &[snr_idx as u64, t as u64]);
                run_trial(&scenario, &plan.methods, &intervals, seed)
            })
            .collect();
        for (m_idx, &method) in plan.methods.iter().enumerate() {
            let mut per_trial_sq = Vec::with_capacity(plan.trials);
            let mut failures = 0usize;
            let mut fallbacks = 0usize;
            for trial in &trials {
                match trial {
                    Ok(outcomes) => {
                        let outcome = &outcomes[m_idx];
                        fallbacks += outcome.fallbacks;
                        match &outcome.angles {
                            Ok(angles) => {
                                let sq = angles
                                    .iter()
                                    .zip(thetas.iter())
                                    .map(|(a, t)| (a - t) * (a - t))
                                    .sum::<f64>()
                                    / thetas.len() as f64;
                                per_trial_sq.push(sq);
                            }
                            Err(_) => failures += 1,
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
            let used = per_trial_sq.len();
            let mse = if used > 0 {
                per_trial_sq.iter().sum::<f64>() / used as f64
            } else {
                f64::NAN
            };
            let std_error = if used > 1 {
                let var = per_trial_sq
                    .iter()
                    .map(|x| (x - mse) * (x - mse))
                    .sum::<f64>()
                    / (used - 1) as f64;
                (var / used as f64).sqrt()
            } else {
                f64::NAN
            };
            records.push(MseRecord {
                method,
                snr_db,
                sigma2,
                mse_empirical: mse,
                mse_theory: theory_mse(method, &scenario),
                trials_used: used,
                failures,
                fallbacks,
                std_error,
            });
        }
    }
    Ok(records)
}

/// Where a method's empirical MSE settles onto its prediction.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdPoint {
    /// Interpolated SNR (dB) where the empirical/theory ratio crosses the cap.
    pub snr_db: f64,
    /// First grid index from which the ratio stays at or below the cap.
    pub grid_index: usize,
}

/// Smallest grid SNR from which `mse_empirical <= cap * mse_theory` holds
/// through the end of the grid, linearly interpolated in dB on the log-ratio
/// against the previous point when one exists.
pub fn threshold_point(records: &[MseRecord], cap: f64) -> Result<ThresholdPoint> {
    if records.is_empty() {
        return Err(DoaLabError::InvalidArgument("no records".into()));
    }
    if records.windows(2).any(|w| w[0].snr_db >= w[1].snr_db) {
        return Err(DoaLabError::InvalidArgument(
            "records must be sorted by strictly increasing SNR".into(),
        ));
    }
    let ratio: Vec<Option<f64>> = records
        .iter()
        .map(|r| match r.mse_theory {
            Some(t) if t > 0.0 && r.mse_empirical.is_finite() => Some(r.mse_empirical / t),
            _ => None,
        })
        .collect();
    let mut start = None;
    for i in (0..records.len()).rev() {
        match ratio[i] {
            Some(x) if x <= cap => start = Some(i),
            _ => break,
        }
    }
    let Some(i) = start else {
        return Err(DoaLabError::NotFound(format!(
            "empirical MSE never settles within {cap} of the prediction"
        )));
    };
    let snr = if i == 0 {
        records[0].snr_db
    } else {
        match ratio[i - 1] {
            // Interpolate the crossing on the log-ratio.
            Some(prev) if prev > cap => {
                let (x0, x1) = (records[i - 1].snr_db, records[i].snr_db);
                let (y0, y1) = (prev.ln(), ratio[i].unwrap().ln());
                x0 + (x1 - x0) * (y0 - cap.ln()) / (y0 - y1)
            }
            _ => records[i].snr_db,
        }
    };
    Ok(ThresholdPoint {
        snr_db: snr,
        grid_index: i,
    })
}

/// Distributional check of the CLT at one noise level.
#[derive(Debug, Clone)]
pub struct GaussianityReport {
    pub method: Method,
    /// Per-source sample variance of `N^{3/2} (theta_hat - theta)`.
    pub sample_variances: Vec<f64>,
    /// Matching predicted variances.
    pub theory_variances: Vec<f64>,
    /// Standardized residuals, pooled across the selected sources.
    pub residuals: Vec<f64>,
    /// Kolmogorov-Smirnov distance of the residuals to the standard normal.
    pub ks_statistic: f64,
    /// Trials dropped because estimation failed.
    pub excluded: usize,
    pub trials: usize,
}

/// Kolmogorov-Smirnov sup-distance of a sample to the standard normal.
pub fn ks_statistic_standard_normal(sample: &[f64]) -> f64 {
    if sample.is_empty() {
        return 1.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("residuals must not be NaN"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal.cdf(x);
        d = d.max(cdf - i as f64 / n).max((i + 1) as f64 / n - cdf);
    }
    d
}

/// Runs repeated trials of several methods on shared draws at a fixed noise
/// level and compares each method's scaled angle errors against its predicted
/// Gaussian limit. `sources` selects which sources contribute pooled
/// residuals (all when `None`). Sharing the synthesized snapshots (and the
/// eigendecomposition) across methods halves the cost of two-method checks
/// and pairs the residual samples trial by trial.
pub fn gaussianity_check_multi(
    scenario: &ArrayScenario,
    methods: &[Method],
    trials: usize,
    master_seed: u64,
    sources: Option<&[usize]>,
) -> Result<Vec<GaussianityReport>> {
    if trials == 0 {
        return Err(DoaLabError::InvalidArgument("trials must be positive".into()));
    }
    if methods.is_empty() {
        return Err(DoaLabError::InvalidArgument("no methods given".into()));
    }
    let pop = PopulationModel::from_scenario(scenario)?;
    let thetas = scenario.doa_angles();
    let all: Vec<usize> = (0..thetas.len()).collect();
    let selected: Vec<usize> = match sources {
        Some(s) => {
            for &k in s {
                if k >= thetas.len() {
                    return Err(DoaLabError::InvalidArgument(format!(
                        "source index {k} out of range"
                    )));
                }
            }
            s.to_vec()
        }
        None => all,
    };
    // Fail before simulating when any requested prediction is unavailable.
    let predictions: Vec<Vec<CltPrediction>> = methods
        .iter()
        .map(|&method| {
            selected
                .iter()
                .map(|&k| predict_variance(method, &pop, k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let intervals = default_intervals(scenario)?;
    let outcomes: Vec<Result<Vec<TrialOutcome>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = mix_seed(master_seed, &[0, t as u64]);
            run_trial(scenario, methods, &intervals, seed)
        })
        .collect();

    let n32 = (scenario.snapshots as f64).powf(1.5);
    let mut reports = Vec::with_capacity(methods.len());
    for (m_idx, &method) in methods.iter().enumerate() {
        let mut scaled: Vec<Vec<f64>> = vec![Vec::with_capacity(trials); selected.len()];
        let mut excluded = 0usize;
        for outcome in &outcomes {
            match outcome {
                Ok(v) => match &v[m_idx].angles {
                    Ok(angles) => {
                        for (slot, &k) in selected.iter().enumerate() {
                            scaled[slot].push(n32 * (angles[k] - thetas[k]));
                        }
                    }
                    Err(_) => excluded += 1,
                },
                Err(_) => excluded += 1,
            }
        }
        let mut residuals = Vec::new();
        let mut sample_variances = Vec::with_capacity(selected.len());
        for (slot, errors) in scaled.iter().enumerate() {
            let used = errors.len();
            if used < 2 {
                return Err(DoaLabError::NumericFailure(format!(
                    "only {used} successful trials; cannot estimate a variance"
                )));
            }
            let mean = errors.iter().sum::<f64>() / used as f64;
            let var = errors.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / (used - 1) as f64;
            sample_variances.push(var);
            let sd = predictions[m_idx][slot].variance.sqrt();
            residuals.extend(errors.iter().map(|x| x / sd));
        }
        let ks = ks_statistic_standard_normal(&residuals);
        reports.push(GaussianityReport {
            method,
            sample_variances,
            theory_variances: predictions[m_idx].iter().map(|p| p.variance).collect(),
            residuals,
            ks_statistic: ks,
            excluded,
            trials,
        });
    }
    Ok(reports)
}

/// Single-method convenience wrapper over [`gaussianity_check_multi`].
pub fn gaussianity_check(
    scenario: &ArrayScenario,
    method: Method,
    trials: usize,
    master_seed: u64,
    sources: Option<&[usize]>,
) -> Result<GaussianityReport> {
    let mut reports = gaussianity_check_multi(scenario, &[method], trials, master_seed, sources)?;
    Ok(reports.remove(0))
}

/// Per-trial agreement between the weighted-sum and contour estimators.
#[derive(Debug, Clone)]
pub struct AgreementRecord {
    pub trial: usize,
    /// Largest |eta_hat_contour - eta_hat_weighted| over the probe angles.
    pub eta_gap: f64,
    /// Squared angle errors, averaged over sources, for each estimator;
    /// present only when DoA extraction was requested and succeeded.
    pub sq_err_weighted: Option<f64>,
    pub sq_err_contour: Option<f64>,
}

/// Runs both corrected estimators on shared draws and reports how far apart
/// their localization functions are, optionally also racing their DoA
/// estimates. Trials where either contour or weights fail are skipped and
/// counted in the second return value.
pub fn unconditional_agreement(
    scenario: &ArrayScenario,
    trials: usize,
    probes: &[f64],
    master_seed: u64,
    with_doa: bool,
) -> Result<(Vec<AgreementRecord>, usize)> {
    if trials == 0 {
        return Err(DoaLabError::InvalidArgument("trials must be positive".into()));
    }
    if probes.is_empty() {
        return Err(DoaLabError::InvalidArgument("no probe angles".into()));
    }
    scenario.validate()?;
    let intervals = default_intervals(scenario)?;
    let thetas = scenario.doa_angles();
    let k = scenario.num_sources();
    let per_trial: Vec<Result<AgreementRecord>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<AgreementRecord> {
            let seed = mix_seed(master_seed, &[1, t as u64]);
            let sc = scenario.with_seed(seed);
            let scm = scm_from_scenario(&sc)?;
            let eig = Arc::new(eig_hermitian(&scm, sc.snapshots, sc.noise_power)?);
            let weighted = PseudoSpectrum::gmusic(Arc::clone(&eig), k)?;
            let contour = PseudoSpectrum::unconditional(Arc::clone(&eig), k)?;
            let mut gap = 0.0f64;
            for &p in probes {
                gap = gap.max((weighted.eval(p)? - contour.eval(p)?).abs());
            }
            let (sq_w, sq_c) = if with_doa {
                let mean_sq = |ps: &PseudoSpectrum| -> Result<f64> {
                    let est = extract_doas(ps, &intervals)?;
                    Ok(est
                        .angles()
                        .iter()
                        .zip(thetas.iter())
                        .map(|(a, t)| (a - t) * (a - t))
                        .sum::<f64>()
                        / thetas.len() as f64)
                };
                (Some(mean_sq(&weighted)?), Some(mean_sq(&contour)?))
            } else {
                (None, None)
            };
            Ok(AgreementRecord {
                trial: t,
                eta_gap: gap,
                sq_err_weighted: sq_w,
                sq_err_contour: sq_c,
            })
        })
        .collect();
    let mut records = Vec::with_capacity(trials);
    let mut skipped = 0usize;
    for r in per_trial {
        match r {
            Ok(rec) => records.push(rec),
            Err(_) => skipped += 1,
        }
    }
    if records.is_empty() {
        return Err(DoaLabError::NumericFailure(
            "every trial failed separation; no agreement data".into(),
        ));
    }
    Ok((records, skipped))
}

/// Median of a sample (mean of the central pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Steering-vector probe set for agreement runs: the true angles plus the
/// midpoints between consecutive ones.
pub fn default_probes(scenario: &ArrayScenario) -> Vec<f64> {
    let thetas = scenario.doa_angles();
    let mut probes = thetas.clone();
    for w in thetas.windows(2) {
        probes.push(0.5 * (w[0] + w[1]));
    }
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{diag_cov, DoaSpec, SourceModel};
    use ndarray::array;
    use std::f64::consts::PI;

    fn two_source_scenario(m: usize, n: usize, sigma2: f64) -> ArrayScenario {
        ArrayScenario {
            sensors: m,
            snapshots: n,
            doas: DoaSpec::Explicit(vec![0.0, PI / 4.0]),
            source_cov: diag_cov(&[10.0, 5.0]),
            noise_power: sigma2,
            source_model: SourceModel::Gaussian,
            seed: 5,
        }
    }

    #[test]
    fn snr_conversion_round_trips() {
        for &db in &[-5.0, 0.0, 3.0, 10.0] {
            assert!((sigma2_to_snr_db(snr_db_to_sigma2(db)) - db).abs() < 1e-12);
        }
        assert!((snr_db_to_sigma2(0.0) - 1.0).abs() < 1e-15);
        assert!((snr_db_to_sigma2(10.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn intervals_quarter_the_smallest_gap() {
        let sc = two_source_scenario(16, 32, 1.0);
        let ivals = default_intervals(&sc).unwrap();
        assert_eq!(ivals.len(), 2);
        // Gap is pi/4 (the wrap-around distance is larger), quarter = pi/16.
        assert!((ivals[0].width() - PI / 8.0).abs() < 1e-12);
        assert!(ivals[0].contains(0.0) && ivals[1].contains(PI / 4.0));
    }

    #[test]
    fn sweep_is_deterministic_and_thread_independent() {
        let plan = ExperimentPlan {
            scenario: two_source_scenario(16, 32, 1.0),
            snr_grid_db: vec![4.0, 8.0],
            methods: vec![Method::GMusic, Method::Music],
            trials: 8,
            master_seed: 99,
        };
        let a = mse_sweep(&plan).unwrap();
        let b = mse_sweep(&plan).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.mse_empirical.to_bits(), y.mse_empirical.to_bits());
            assert_eq!(x.trials_used, y.trials_used);
        }
        // A single-thread pool must reproduce the global-pool numbers.
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| mse_sweep(&plan).unwrap());
        for (x, y) in a.iter().zip(c.iter()) {
            assert_eq!(x.mse_empirical.to_bits(), y.mse_empirical.to_bits());
        }
    }

    #[test]
    fn sweep_tracks_theory_at_high_snr() {
        let plan = ExperimentPlan {
            scenario: two_source_scenario(24, 48, 1.0),
            snr_grid_db: vec![8.0],
            methods: vec![Method::GMusic],
            trials: 64,
            master_seed: 7,
        };
        let records = mse_sweep(&plan).unwrap();
        let r = &records[0];
        let theory = r.mse_theory.expect("prediction applies at 8 dB");
        assert!(r.failures == 0, "failures at high SNR: {}", r.failures);
        assert!(
            r.mse_empirical < 3.0 * theory && r.mse_empirical > theory / 3.0,
            "empirical {:.3e} vs theory {:.3e}",
            r.mse_empirical,
            theory
        );
    }

    #[test]
    fn periodogram_records_carry_no_theory() {
        let plan = ExperimentPlan {
            scenario: two_source_scenario(16, 32, 1.0),
            snr_grid_db: vec![6.0],
            methods: vec![Method::Periodogram],
            trials: 4,
            master_seed: 3,
        };
        let records = mse_sweep(&plan).unwrap();
        assert!(records[0].mse_theory.is_none());
    }

    #[test]
    fn threshold_point_interpolates_the_crossing() {
        let rec = |snr: f64, emp: f64, th: f64| MseRecord {
            method: Method::GMusic,
            snr_db: snr,
            sigma2: snr_db_to_sigma2(snr),
            mse_empirical: emp,
            mse_theory: Some(th),
            trials_used: 100,
            failures: 0,
            fallbacks: 0,
            std_error: 0.0,
        };
        // Ratios: 30, 9, 1, 1 with cap 3 -> crossing between the 2nd and 3rd
        // points; log-linear interpolation puts it at 1 + ln(3)/ln(9) = 1.5.
        let records = vec![
            rec(0.0, 30.0, 1.0),
            rec(1.0, 9.0, 1.0),
            rec(2.0, 1.0, 1.0),
            rec(3.0, 1.0, 1.0),
        ];
        let t = threshold_point(&records, 3.0).unwrap();
        assert_eq!(t.grid_index, 2);
        assert!((t.snr_db - 1.5).abs() < 1e-12, "snr {}", t.snr_db);
        // Already settled at the first point.
        let records = vec![rec(0.0, 1.0, 1.0), rec(1.0, 1.0, 1.0)];
        let t = threshold_point(&records, 3.0).unwrap();
        assert_eq!((t.grid_index, t.snr_db), (0, 0.0));
        // Never settles.
        let records = vec![rec(0.0, 9.0, 1.0), rec(1.0, 9.0, 1.0)];
        assert!(matches!(
            threshold_point(&records, 3.0),
            Err(DoaLabError::NotFound(_))
        ));
        // A late excursion above the cap moves the threshold past it.
        let records = vec![rec(0.0, 1.0, 1.0), rec(1.0, 9.0, 1.0), rec(2.0, 1.0, 1.0)];
        let t = threshold_point(&records, 3.0).unwrap();
        assert_eq!(t.grid_index, 2);
    }

    #[test]
    fn ks_statistic_flags_the_wrong_scale() {
        // Deterministic quantile sample of the standard normal.
        let normal = Normal::new(0.0, 1.0).unwrap();
        let sample: Vec<f64> = (0..400)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / 400.0))
            .collect();
        let good = ks_statistic_standard_normal(&sample);
        assert!(good < 0.005, "quantile sample KS = {good}");
        let scaled: Vec<f64> = sample.iter().map(|x| 2.0 * x).collect();
        let bad = ks_statistic_standard_normal(&scaled);
        assert!(bad > 0.1, "doubled scale KS = {bad}");
    }

    #[test]
    fn gaussianity_report_is_sane_at_small_size() {
        let sc = two_source_scenario(16, 32, 0.5);
        let report =
            gaussianity_check(&sc, Method::GMusic, 48, 11, Some(&[0])).unwrap();
        assert_eq!(report.sample_variances.len(), 1);
        assert_eq!(report.residuals.len() + report.excluded, 48);
        assert!(report.ks_statistic < 0.35, "ks {}", report.ks_statistic);
        let ratio = report.sample_variances[0] / report.theory_variances[0];
        assert!(ratio > 0.2 && ratio < 5.0, "variance ratio {ratio}");
    }

    #[test]
    fn agreement_gap_is_small_and_doas_match() {
        let sc = ArrayScenario {
            source_model: SourceModel::SpikeExact,
            ..two_source_scenario(40, 80, 1.0)
        };
        let probes = default_probes(&sc);
        assert_eq!(probes.len(), 3);
        let (records, skipped) =
            unconditional_agreement(&sc, 6, &probes, 21, true).unwrap();
        assert_eq!(records.len() + skipped, 6);
        for r in &records {
            assert!(r.eta_gap < 0.1, "eta gap {}", r.eta_gap);
            let (w, c) = (r.sq_err_weighted.unwrap(), r.sq_err_contour.unwrap());
            // Same projector estimate, same peaks at this SNR.
            assert!((w.sqrt() - c.sqrt()).abs() < 5e-3, "doa gap {w} vs {c}");
        }
    }

    #[test]
    fn correlated_sources_are_accepted() {
        let sc = ArrayScenario {
            source_cov: array![
                [Complex64::from(1.0), Complex64::from(0.4)],
                [Complex64::from(0.4), Complex64::from(1.0)]
            ],
            ..two_source_scenario(40, 80, 1.0)
        };
        // At sigma2 = 1 the smaller spike 1 - 0.4 sits under the separation
        // point sqrt(c) = 0.707, so no prediction applies; at 6 dB it does.
        assert!(theory_mse(Method::GMusic, &sc).is_none());
        let rec = theory_mse(Method::GMusic, &sc.with_noise_power(snr_db_to_sigma2(6.0)));
        assert!(rec.is_some(), "correlated prediction must exist at 6 dB");
        let plan = ExperimentPlan {
            scenario: sc,
            snr_grid_db: vec![6.0],
            methods: vec![Method::GMusic],
            trials: 16,
            master_seed: 13,
        };
        let records = mse_sweep(&plan).unwrap();
        let r = &records[0];
        let th = r.mse_theory.unwrap();
        assert!(
            r.mse_empirical < 4.0 * th && r.mse_empirical > th / 4.0,
            "correlated empirical {:.3e} vs theory {:.3e}",
            r.mse_empirical,
            th
        );
    }

    #[test]
    fn median_handles_both_parities() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
