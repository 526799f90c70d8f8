//! Batch commands behind the thin `doa-lab` binary.
//!
//! Each command reads an optional TOML config, applies command-line
//! overrides, runs, and writes CSV files (plus optional SVG renderings) into
//! the output directory. Configs are the reproducibility contract: the
//! resolved configuration is hashed into every output file's metadata block,
//! and rerunning with the same config yields byte-identical CSVs.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{diag_cov, scm_from_scenario, ArrayScenario, DoaSpec, SourceModel};
use crate::csvout::{config_hash, write_csv, Cell, CsvMeta};
use crate::eigsys::eig_hermitian;
use crate::error::{DoaLabError, Result};
use crate::montecarlo::{
    default_probes, gaussianity_check_multi, median, mse_sweep, unconditional_agreement,
    ExperimentPlan, MseRecord,
};
use crate::resolution::TwoSourceModel;
use crate::rmt::{mp_cdf_gap, mp_density, SpikeModel};
use crate::spectrum::Method;
use crate::svg::{write_chart, ChartSpec, Series};

/// Values settable from the command line; they override the config file.
#[derive(Debug, Clone)]
pub struct CliOverrides {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub svg: bool,
}

impl Default for CliOverrides {
    fn default() -> Self {
        CliOverrides {
            out: PathBuf::from("out"),
            seed: None,
            trials: None,
            svg: false,
        }
    }
}

/// Top-level config file; each command reads the sections it needs and
/// ignores the rest, so one file can drive several commands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<ScenarioConfig>,
    pub sweep: Option<SweepConfig>,
    pub clt: Option<CltConfig>,
    pub kappa: Option<KappaConfig>,
    pub mp: Option<MpConfig>,
    pub compare: Option<CompareConfig>,
    pub spikes: Option<SpikesConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            DoaLabError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| {
            DoaLabError::Config(format!("cannot parse {}: {e}", path.display()))
        })
    }
}

/// Array scenario section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sensors: usize,
    pub snapshots: usize,
    /// Explicit electrical angles, mutually exclusive with `closely_spaced`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closely_spaced: Option<CloselySpacedConfig>,
    /// Diagonal source covariance, mutually exclusive with `source_cov`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_powers: Option<Vec<f64>>,
    /// Full real symmetric source covariance, row by row.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_cov: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<f64>,
    /// "gaussian" or "spike-exact".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Two sources `theta1` and `theta1 + alpha / N`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloselySpacedConfig {
    pub theta1: f64,
    pub alpha: f64,
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<ArrayScenario> {
        let doas = match (&self.doas, &self.closely_spaced) {
            (Some(v), None) => DoaSpec::Explicit(v.clone()),
            (None, Some(cs)) => DoaSpec::CloselySpaced {
                theta1: cs.theta1,
                alpha: cs.alpha,
            },
            (None, None) => {
                return Err(DoaLabError::Config(
                    "scenario needs either `doas` or `closely_spaced`".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(DoaLabError::Config(
                    "`doas` and `closely_spaced` are mutually exclusive".into(),
                ))
            }
        };
        let k = match &doas {
            DoaSpec::Explicit(v) => v.len(),
            DoaSpec::CloselySpaced { .. } => 2,
        };
        let source_cov: Array2<Complex64> = match (&self.source_powers, &self.source_cov) {
            (Some(p), None) => {
                if p.len() != k {
                    return Err(DoaLabError::Config(format!(
                        "{} source powers for {k} sources",
                        p.len()
                    )));
                }
                diag_cov(p)
            }
            (None, Some(rows)) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(DoaLabError::Config(format!(
                        "source_cov must be {k}x{k}"
                    )));
                }
                let mut cov = Array2::zeros((k, k));
                for (i, row) in rows.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        cov[[i, j]] = Complex64::from(v);
                    }
                }
                cov
            }
            (None, None) => diag_cov(&vec![1.0; k]),
            (Some(_), Some(_)) => {
                return Err(DoaLabError::Config(
                    "`source_powers` and `source_cov` are mutually exclusive".into(),
                ))
            }
        };
        let source_model = match self.source_model.as_deref() {
            None | Some("spike-exact") => SourceModel::SpikeExact,
            Some("gaussian") => SourceModel::Gaussian,
            Some(other) => {
                return Err(DoaLabError::Config(format!(
                    "unknown source model {other:?} (expected \"gaussian\" or \"spike-exact\")"
                )))
            }
        };
        let scenario = ArrayScenario {
            sensors: self.sensors,
            snapshots: self.snapshots,
            doas,
            source_cov,
            noise_power: self.noise_power.unwrap_or(1.0),
            source_model,
            seed: self.seed.unwrap_or(1),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// SNR grid: either an explicit list or an inclusive range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl SnrGrid {
    pub fn to_grid(&self) -> Result<Vec<f64>> {
        let grid = match self {
            SnrGrid::List(v) => v.clone(),
            SnrGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(DoaLabError::Config(format!(
                        "bad SNR range {start}..{stop} step {step}"
                    )));
                }
                let n = ((stop - start) / step + 1.5) as usize;
                (0..n)
                    .map(|i| start + i as f64 * step)
                    .filter(|x| *x <= stop + 1e-9 * step)
                    .collect()
            }
        };
        if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DoaLabError::Config(
                "SNR grid must be nonempty and strictly increasing".into(),
            ));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: SnrGrid,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            snr_db: SnrGrid::Range {
                start: -10.0,
                stop: 20.0,
                step: 1.0,
            },
            methods: None,
            trials: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Sources whose residuals are pooled; all when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaConfig {
    /// Spacing parameter of the 1/N-separated pair.
    pub alpha: f64,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Eigenvalues excluded from the bulk comparison; source count if omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_top: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Angles where both localization functions are compared; true angles
    /// plus midpoints when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<f64>>,
    /// Also extract DoAs per trial with both estimators.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with_doa: Option<bool>,
    /// Size multipliers applied to (sensors, snapshots), e.g. [1, 2].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikesConfig {
    pub sigma2: f64,
    pub c: f64,
    pub spikes: Vec<f64>,
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct CommandReport {
    pub files: Vec<PathBuf>,
    /// Human-readable one-liners for the terminal.
    pub notes: Vec<String>,
}

fn parse_methods(names: Option<&Vec<String>>, default: &[Method]) -> Result<Vec<Method>> {
    match names {
        None => Ok(default.to_vec()),
        Some(v) => v.iter().map(|s| Method::from_name(s)).collect(),
    }
}

/// Serializes the effective configuration; its hash goes into every output.
fn resolved_hash(config: &RunConfig) -> Result<String> {
    let text = toml::to_string(config)
        .map_err(|e| DoaLabError::Config(format!("cannot serialize config: {e}")))?;
    Ok(config_hash(&text))
}

fn apply_scenario_overrides(sc: &mut ScenarioConfig, overrides: &CliOverrides) {
    if let Some(seed) = overrides.seed {
        sc.seed = Some(seed);
    }
}

fn default_wide_scenario() -> ScenarioConfig {
    ScenarioConfig {
        sensors: 40,
        snapshots: 80,
        doas: Some(vec![0.0, PI / 4.0]),
        source_powers: Some(vec![1.0, 1.0]),
        closely_spaced: None,
        source_cov: None,
        noise_power: Some(1.0),
        source_model: Some("spike-exact".into()),
        seed: Some(1),
    }
}

/// Histogram of sample eigenvalues against the limiting bulk density.
pub fn cmd_mp_hist(config: &RunConfig, overrides: &CliOverrides) -> Result<CommandReport> {
    let mut config = config.clone();
    let mut sc_cfg = config.scenario.take().unwrap_or_else(|| ScenarioConfig {
        sensors: 1000,
        snapshots: 2000,
        doas: Some(vec![0.0, 2.0 * PI * 100.0 / 1000.0]),
        source_powers: Some(vec![10.0, 5.0]),
        ..default_wide_scenario()
    });
    apply_scenario_overrides(&mut sc_cfg, overrides);
    let mp_cfg = config.mp.take().unwrap_or_default();
    config.scenario = Some(sc_cfg.clone());
    config.mp = Some(mp_cfg.clone());
    let hash = resolved_hash(&config)?;

    let scenario = sc_cfg.to_scenario()?;
    let sigma2 = scenario.noise_power;
    let c_n = scenario.c_n();
    let exclude = mp_cfg.exclude_top.unwrap_or(scenario.num_sources());
    let bins = mp_cfg.bins.unwrap_or(80).max(4);

    let scm = scm_from_scenario(&scenario)?;
    let eig = eig_hermitian(&scm, scenario.snapshots, sigma2)?;
    let all = eig.eigenvalues();
    if exclude >= all.len() {
        return Err(DoaLabError::InvalidArgument(format!(
            "cannot exclude {exclude} of {} eigenvalues",
            all.len()
        )));
    }
    let bulk = &all[exclude..];
    let gap = mp_cdf_gap(bulk, sigma2, c_n)?;

    // Histogram over the observed bulk range.
    let lo = bulk.last().copied().unwrap().min(0.0);
    let hi = bulk[0] * 1.05;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in bulk {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n_bulk = bulk.len() as f64;
    let meta = CsvMeta::new(hash, scenario.seed, Some(c_n));
    let mut rows = Vec::with_capacity(bins);
    for (b, &count) in counts.iter().enumerate() {
        let left = lo + b as f64 * width;
        let right = left + width;
        let mid = 0.5 * (left + right);
        let empirical = count as f64 / (n_bulk * width);
        let limit = mp_density(mid, sigma2, c_n)?;
        rows.push(vec![
            Cell::from(left),
            Cell::from(right),
            Cell::from(count),
            Cell::from(empirical),
            Cell::from(limit),
        ]);
    }
    let hist_path = overrides.out.join("mp_hist.csv");
    write_csv(
        &hist_path,
        &meta,
        &["bin_lo", "bin_hi", "count", "empirical_density", "mp_density"],
        &rows,
    )?;

    // Summary: the bulk gap plus the spike landing sites.
    let mut summary = vec![
        vec![Cell::from("sup_cdf_gap"), Cell::from(gap)],
        vec![Cell::from("bulk_count"), Cell::from(bulk.len())],
        vec![Cell::from("excluded_top"), Cell::from(exclude)],
    ];
    for j in 0..exclude {
        summary.push(vec![
            Cell::from(format!("top_eigenvalue_{}", j + 1).as_str()),
            Cell::from(all[j]),
        ]);
    }
    let summary_path = overrides.out.join("mp_summary.csv");
    write_csv(&summary_path, &meta, &["quantity", "value"], &summary)?;

    let mut report = CommandReport {
        files: vec![hist_path.clone(), summary_path],
        notes: vec![format!(
            "bulk of {} eigenvalues vs limit law: sup CDF gap {gap:.4}",
            bulk.len()
        )],
    };
    if overrides.svg {
        let centers: Vec<f64> = (0..bins)
            .map(|b| lo + (b as f64 + 0.5) * width)
            .collect();
        let empirical = Series {
            label: "empirical".into(),
            points: centers
                .iter()
                .zip(counts.iter())
                .map(|(&x, &c)| (x, c as f64 / (n_bulk * width)))
                .collect(),
        };
        let limit = Series {
            label: "limit law".into(),
            points: centers
                .iter()
                .map(|&x| (x, mp_density(x, sigma2, c_n).unwrap_or(0.0)))
                .collect(),
        };
        let svg_path = overrides.out.join("mp_hist.svg");
        write_chart(
            &svg_path,
            &ChartSpec {
                title: "Bulk eigenvalue density".into(),
                x_label: "eigenvalue".into(),
                y_label: "density".into(),
                log_y: false,
            },
            &[empirical, limit],
        )?;
        report.files.push(svg_path);
    }
    Ok(report)
}

fn mse_rows(records: &[MseRecord]) -> Vec<Vec<Cell>> {
    records
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.method.name()),
                Cell::from(r.snr_db),
                Cell::from(r.mse_empirical),
                Cell::from(r.mse_theory),
                Cell::from(r.trials_used),
                Cell::from(r.failures),
                Cell::from(r.std_error),
            ]
        })
        .collect()
}

/// Empirical and predicted MSE of the angle estimates over an SNR grid.
pub fn cmd_mse_sweep(config: &RunConfig, overrides: &CliOverrides) -> Result<CommandReport> {
    let mut config = config.clone();
    let mut sc_cfg = config.scenario.take().unwrap_or_else(default_wide_scenario);
    apply_scenario_overrides(&mut sc_cfg, overrides);
    let mut sweep_cfg = config.sweep.take().unwrap_or_default();
    if let Some(t) = overrides.trials {
        sweep_cfg.trials = Some(t);
    }
    config.scenario = Some(sc_cfg.clone());
    config.sweep = Some(sweep_cfg.clone());
    let hash = resolved_hash(&config)?;

    let scenario = sc_cfg.to_scenario()?;
    let methods = parse_methods(sweep_cfg.methods.as_ref(), &[Method::Music, Method::GMusic])?;
    let plan = ExperimentPlan {
        snr_grid_db: sweep_cfg.snr_db.to_grid()?,
        methods: methods.clone(),
        trials: sweep_cfg.trials.unwrap_or(2000),
        master_seed: scenario.seed,
        scenario,
    };
    let records = mse_sweep(&plan)?;

    let meta = CsvMeta::new(hash, plan.master_seed, Some(plan.scenario.c_n()));
    let path = overrides.out.join("mse.csv");
    write_csv(
        &path,
        &meta,
        &[
            "method",
            "snr_db",
            "mse_emp",
            "mse_theory",
            "trials",
            "failures",
            "stderr",
        ],
        &mse_rows(&records),
    )?;
    let mut report = CommandReport {
        files: vec![path],
        notes: vec![format!(
            "{} methods x {} SNR points x {} trials",
            methods.len(),
            plan.snr_grid_db.len(),
            plan.trials
        )],
    };
    if overrides.svg {
        let mut series = Vec::new();
        for &m in &methods {
            let pts: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.method == m)
                .map(|r| (r.snr_db, r.mse_empirical))
                .collect();
            series.push(Series {
                label: m.name().to_string(),
                points: pts,
            });
            let theory: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.method == m && r.mse_theory.is_some())
                .map(|r| (r.snr_db, r.mse_theory.unwrap()))
                .collect();
            if !theory.is_empty() {
                series.push(Series {
                    label: format!("{} theory", m.name()),
                    points: theory,
                });
            }
        }
        let svg_path = overrides.out.join("mse.svg");
        write_chart(
            &svg_path,
            &ChartSpec {
                title: "Angle MSE vs SNR".into(),
                x_label: "SNR (dB)".into(),
                y_label: "MSE (rad^2)".into(),
                log_y: true,
            },
            &series,
        )?;
        report.files.push(svg_path);
    }
    Ok(report)
}

/// Limit profiles of the two localization functions around a close pair.
pub fn cmd_kappa(config: &RunConfig, overrides: &CliOverrides) -> Result<CommandReport> {
    let mut config = config.clone();
    let kappa_cfg = config.kappa.take().unwrap_or(KappaConfig {
        alpha: 2.0 * PI / 0.5,
        c: 0.5,
        sigma2: None,
        beta_lo: None,
        beta_hi: None,
        points: None,
    });
    config.kappa = Some(kappa_cfg.clone());
    let hash = resolved_hash(&config)?;

    let alpha = kappa_cfg.alpha;
    let sigma2 = kappa_cfg.sigma2.unwrap_or(1.0);
    let model = TwoSourceModel::new(alpha, kappa_cfg.c, sigma2)?;
    let lo = kappa_cfg.beta_lo.unwrap_or(-0.5 * alpha);
    let hi = kappa_cfg.beta_hi.unwrap_or(1.5 * alpha);
    if hi <= lo {
        return Err(DoaLabError::Config(format!("empty beta range {lo}..{hi}")));
    }
    // Round the grid up so that beta = 0 and beta = alpha are exact nodes
    // whenever they sit at rational positions of the default range.
    let points = kappa_cfg.points.unwrap_or(801).max(9);
    let points = points + (4 - (points - 1) % 4) % 4;
    let step = (hi - lo) / (points - 1) as f64;

    let meta = CsvMeta::new(hash, overrides.seed.unwrap_or(0), Some(kappa_cfg.c));
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let beta = lo + i as f64 * step;
        // Snap exact marks so the identity columns are exact there.
        let beta = if (beta - 0.0).abs() < 0.5 * step && (lo..=hi).contains(&0.0) && i == ((0.0 - lo) / step).round() as usize {
            0.0
        } else if (beta - alpha).abs() < 0.5 * step && i == ((alpha - lo) / step).round() as usize {
            alpha
        } else {
            beta
        };
        rows.push(vec![
            Cell::from(beta),
            Cell::from(model.kappa(beta)?),
            Cell::from(model.kappa_t(beta)?),
        ]);
    }
    let path = overrides.out.join("kappa.csv");
    write_csv(&path, &meta, &["beta", "kappa", "kappa_t"], &rows)?;

    let sep = model.separation_check();
    let summary = vec![
        vec![Cell::from("alpha"), Cell::from(alpha)],
        vec![Cell::from("c"), Cell::from(kappa_cfg.c)],
        vec![Cell::from("sigma2"), Cell::from(sigma2)],
        vec![Cell::from("separation_ok"), Cell::from(usize::from(sep.ok))],
        vec![Cell::from("separation_margin"), Cell::from(sep.margin)],
        vec![Cell::from("kappa_at_0"), Cell::from(model.kappa(0.0)?)],
        vec![Cell::from("kappa_at_alpha"), Cell::from(model.kappa(alpha)?)],
        vec![Cell::from("kappa_t_at_0"), Cell::from(model.kappa_t(0.0)?)],
        vec![
            Cell::from("kappa_t_at_alpha"),
            Cell::from(model.kappa_t(alpha)?),
        ],
        vec![
            Cell::from("kappa_t_max_at_0"),
            Cell::from(usize::from(model.kappa_t_is_local_max(0.0)?)),
        ],
        vec![
            Cell::from("kappa_t_max_at_alpha"),
            Cell::from(usize::from(model.kappa_t_is_local_max(alpha)?)),
        ],
    ];
    let summary_path = overrides.out.join("kappa_summary.csv");
    write_csv(&summary_path, &meta, &["quantity", "value"], &summary)?;

    let mut notes = vec![format!(
        "kappa profiles at alpha = {alpha:.6}, c = {}, sigma2 = {sigma2}",
        kappa_cfg.c
    )];
    if !sep.ok {
        notes.push(format!(
            "separation condition violated (margin {:.4}); profiles remain well defined",
            sep.margin
        ));
    }
    let mut report = CommandReport {
        files: vec![path, summary_path],
        notes,
    };
    if overrides.svg {
        let series = vec![
            Series {
                label: "corrected".into(),
                points: rows
                    .iter()
                    .map(|r| match (&r[0], &r[1]) {
                        (Cell::Float(b), Cell::Float(k)) => (*b, *k),
                        _ => unreachable!(),
                    })
                    .collect(),
            },
            Series {
                label: "uncorrected".into(),
                points: rows
                    .iter()
                    .map(|r| match (&r[0], &r[2]) {
                        (Cell::Float(b), Cell::Float(k)) => (*b, *k),
                        _ => unreachable!(),
                    })
                    .collect(),
            },
        ];
        let svg_path = overrides.out.join("kappa.svg");
        write_chart(
            &svg_path,
            &ChartSpec {
                title: "Resolution profiles".into(),
                x_label: "beta".into(),
                y_label: "kappa".into(),
                log_y: false,
            },
            &series,
        )?;
        report.files.push(svg_path);
    }
    Ok(report)
}

/// Scaled angle-error residuals against their Gaussian limit.
pub fn cmd_clt_check(config: &RunConfig, overrides: &CliOverrides) -> Result<CommandReport> {
    let mut config = config.clone();
    let mut sc_cfg = config.scenario.take().unwrap_or_else(|| ScenarioConfig {
        sensors: 160,
        snapshots: 320,
        doas: Some(vec![0.0, PI / 4.0]),
        source_powers: Some(vec![5.0, 5.0]),
        ..default_wide_scenario()
    });
    apply_scenario_overrides(&mut sc_cfg, overrides);
    let mut clt_cfg = config.clt.take().unwrap_or_default();
    if let Some(t) = overrides.trials {
        clt_cfg.trials = Some(t);
    }
    config.scenario = Some(sc_cfg.clone());
    config.clt = Some(clt_cfg.clone());
    let hash = resolved_hash(&config)?;

    let scenario = sc_cfg.to_scenario()?;
    let methods = parse_methods(clt_cfg.methods.as_ref(), &[Method::GMusic, Method::Music])?;
    let trials = clt_cfg.trials.unwrap_or(5000);
    let sources = clt_cfg.sources.clone();

    let meta = CsvMeta::new(hash, scenario.seed, Some(scenario.c_n()));
    let mut residual_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut notes = Vec::new();
    let reports = gaussianity_check_multi(
        &scenario,
        &methods,
        trials,
        scenario.seed,
        sources.as_deref(),
    )?;
    for report in &reports {
        let method = report.method;
        let selected: Vec<usize> = sources
            .clone()
            .unwrap_or_else(|| (0..scenario.num_sources()).collect());
        let per_source = report.residuals.len() / selected.len();
        for (slot, &source) in selected.iter().enumerate() {
            for i in 0..per_source {
                residual_rows.push(vec![
                    Cell::from(method.name()),
                    Cell::from(source),
                    Cell::from(report.residuals[slot * per_source + i]),
                ]);
            }
            summary_rows.push(vec![
                Cell::from(method.name()),
                Cell::from(source),
                Cell::from(report.sample_variances[slot]),
                Cell::from(report.theory_variances[slot]),
                Cell::from(report.sample_variances[slot] / report.theory_variances[slot]),
                Cell::from(report.ks_statistic),
                Cell::from(report.excluded),
                Cell::from(report.trials),
            ]);
        }
        notes.push(format!(
            "{}: variance ratio {:.3}, KS {:.4}, excluded {}",
            method.name(),
            report.sample_variances[0] / report.theory_variances[0],
            report.ks_statistic,
            report.excluded
        ));
    }
    let residuals_path = overrides.out.join("residuals.csv");
    write_csv(
        &residuals_path,
        &meta,
        &["method", "source", "residual"],
        &residual_rows,
    )?;
    let summary_path = overrides.out.join("clt_summary.csv");
    write_csv(
        &summary_path,
        &meta,
        &[
            "method",
            "source",
            "sample_variance",
            "theory_variance",
            "ratio",
            "ks_statistic",
            "excluded",
            "trials",
        ],
        &summary_rows,
    )?;
    let mut report = CommandReport {
        files: vec![residuals_path, summary_path],
        notes,
    };
    if overrides.svg {
        // Empirical CDF of residuals per method against the normal CDF.
        let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
        use statrs::distribution::ContinuousCDF;
        let mut series = Vec::new();
        for (m_idx, &method) in methods.iter().enumerate() {
            let mut sorted = reports[m_idx].residuals.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len() as f64;
            series.push(Series {
                label: method.name().to_string(),
                points: sorted
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| (x, (i as f64 + 0.5) / n))
                    .collect(),
            });
        }
        if let Some(first) = series.first() {
            let xs: Vec<f64> = first.points.iter().map(|p| p.0).collect();
            series.push(Series {
                label: "normal".into(),
                points: xs.iter().map(|&x| (x, normal.cdf(x))).collect(),
            });
        }
        let svg_path = overrides.out.join("residuals.svg");
        write_chart(
            &svg_path,
            &ChartSpec {
                title: "Residual CDF vs standard normal".into(),
                x_label: "standardized residual".into(),
                y_label: "CDF".into(),
                log_y: false,
            },
            &series,
        )?;
        report.files.push(svg_path);
    }
    Ok(report)
}

/// Weighted-sum vs contour estimator agreement across size doublings.
pub fn cmd_unconditional_compare(
    config: &RunConfig,
    overrides: &CliOverrides,
) -> Result<CommandReport> {
    let mut config = config.clone();
    let mut sc_cfg = config.scenario.take().unwrap_or_else(|| ScenarioConfig {
        source_powers: Some(vec![10.0, 5.0]),
        ..default_wide_scenario()
    });
    apply_scenario_overrides(&mut sc_cfg, overrides);
    let mut cmp_cfg = config.compare.take().unwrap_or_default();
    if let Some(t) = overrides.trials {
        cmp_cfg.trials = Some(t);
    }
    config.scenario = Some(sc_cfg.clone());
    config.compare = Some(cmp_cfg.clone());
    let hash = resolved_hash(&config)?;

    let base = sc_cfg.to_scenario()?;
    let trials = cmp_cfg.trials.unwrap_or(200);
    let with_doa = cmp_cfg.with_doa.unwrap_or(true);
    let scales = cmp_cfg.scales.clone().unwrap_or_else(|| vec![1, 2]);
    if scales.is_empty() || scales.contains(&0) {
        return Err(DoaLabError::Config("scales must be positive".into()));
    }

    let meta = CsvMeta::new(hash, base.seed, Some(base.c_n()));
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut notes = Vec::new();
    for &scale in &scales {
        let mut scenario = base.clone();
        scenario.sensors = base.sensors * scale as usize;
        scenario.snapshots = base.snapshots * scale as usize;
        let probes = cmp_cfg
            .probes
            .clone()
            .unwrap_or_else(|| default_probes(&scenario));
        let (records, skipped) =
            unconditional_agreement(&scenario, trials, &probes, scenario.seed, with_doa)?;
        for r in &records {
            rows.push(vec![
                Cell::from(scale as usize),
                Cell::from(r.trial),
                Cell::from(r.eta_gap),
                Cell::from(r.sq_err_weighted),
                Cell::from(r.sq_err_contour),
            ]);
        }
        let gaps: Vec<f64> = records.iter().map(|r| r.eta_gap).collect();
        let med = median(&gaps);
        let mse = |f: &dyn Fn(&crate::montecarlo::AgreementRecord) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = records.iter().filter_map(f).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let mse_w = mse(&|r| r.sq_err_weighted);
        let mse_c = mse(&|r| r.sq_err_contour);
        summary_rows.push(vec![
            Cell::from(scale as usize),
            Cell::from(base.sensors * scale as usize),
            Cell::from(base.snapshots * scale as usize),
            Cell::from(med),
            Cell::from(records.len()),
            Cell::from(skipped),
            Cell::from(mse_w),
            Cell::from(mse_c),
        ]);
        notes.push(format!(
            "scale {scale}: median localization gap {med:.3e} over {} trials ({} skipped)",
            records.len(),
            skipped
        ));
    }
    let path = overrides.out.join("compare.csv");
    write_csv(
        &path,
        &meta,
        &["scale", "trial", "eta_gap", "sq_err_weighted", "sq_err_contour"],
        &rows,
    )?;
    let summary_path = overrides.out.join("compare_summary.csv");
    write_csv(
        &summary_path,
        &meta,
        &[
            "scale",
            "sensors",
            "snapshots",
            "median_eta_gap",
            "trials_used",
            "skipped",
            "mse_weighted",
            "mse_contour",
        ],
        &summary_rows,
    )?;
    let mut report = CommandReport {
        files: vec![path, summary_path],
        notes,
    };
    if overrides.svg {
        let mut series = Vec::new();
        for &scale in &scales {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| matches!(r[0], Cell::Int(s) if s == scale as i64))
                .map(|r| match (&r[1], &r[2]) {
                    (Cell::Int(t), Cell::Float(g)) => (*t as f64, *g),
                    _ => unreachable!(),
                })
                .collect();
            series.push(Series {
                label: format!("scale {scale}"),
                points: pts,
            });
        }
        let svg_path = overrides.out.join("compare.svg");
        write_chart(
            &svg_path,
            &ChartSpec {
                title: "Weighted vs contour estimator gap".into(),
                x_label: "trial".into(),
                y_label: "|gap|".into(),
                log_y: true,
            },
            &series,
        )?;
        report.files.push(svg_path);
    }
    Ok(report)
}

/// Spike landing sites, weights, and separation margins for a spike model.
pub fn cmd_spikes(config: &RunConfig, overrides: &CliOverrides) -> Result<CommandReport> {
    let mut config = config.clone();
    let spikes_cfg = config.spikes.take().unwrap_or(SpikesConfig {
        sigma2: 1.0,
        c: 0.5,
        spikes: vec![10.0, 5.0],
    });
    config.spikes = Some(spikes_cfg.clone());
    let hash = resolved_hash(&config)?;

    // Validates sigma2, c, and spike positivity without requiring separation.
    SpikeModel::new(spikes_cfg.sigma2, spikes_cfg.c, spikes_cfg.spikes.clone())?;
    let threshold = crate::rmt::spike_threshold(spikes_cfg.sigma2, spikes_cfg.c);
    let meta = CsvMeta::new(hash, overrides.seed.unwrap_or(0), Some(spikes_cfg.c));
    let mut rows = Vec::new();
    let mut notes = vec![format!(
        "detectability threshold: spikes must exceed {threshold:.6}"
    )];
    for &s in &spikes_cfg.spikes {
        let separated = s > threshold;
        let (limit, weight) = if separated {
            (
                Some(crate::rmt::phi(s, spikes_cfg.sigma2, spikes_cfg.c)?),
                Some(crate::rmt::h_of_spike(s, spikes_cfg.sigma2, spikes_cfg.c)?),
            )
        } else {
            (None, None)
        };
        rows.push(vec![
            Cell::from(s),
            Cell::from(limit),
            Cell::from(weight),
            Cell::from(usize::from(separated)),
            Cell::from(s - threshold),
        ]);
        notes.push(match limit {
            Some(l) => format!("spike {s}: sample eigenvalue -> {l:.6}"),
            None => format!("spike {s}: below threshold, absorbed by the bulk"),
        });
    }
    let path = overrides.out.join("spikes.csv");
    write_csv(
        &path,
        &meta,
        &["spike", "sample_limit", "subspace_weight", "separated", "margin"],
        &rows,
    )?;
    Ok(CommandReport {
        files: vec![path],
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn overrides_in(dir: &Path) -> CliOverrides {
        CliOverrides {
            out: dir.to_path_buf(),
            seed: None,
            trials: None,
            svg: false,
        }
    }

    #[test]
    fn scenario_config_round_trips_through_toml() {
        let text = r#"
            [scenario]
            sensors = 40
            snapshots = 80
            doas = [0.0, 0.7853981633974483]
            source_powers = [1.0, 1.0]
            noise_power = 1.0
            source_model = "spike-exact"
            seed = 7

            [sweep]
            snr_db = { start = -4.0, stop = 4.0, step = 2.0 }
            methods = ["music", "gmusic"]
            trials = 16
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        let sc = config.scenario.as_ref().unwrap().to_scenario().unwrap();
        assert_eq!((sc.sensors, sc.snapshots, sc.seed), (40, 80, 7));
        let grid = config.sweep.as_ref().unwrap().snr_db.to_grid().unwrap();
        assert_eq!(grid, vec![-4.0, -2.0, 0.0, 2.0, 4.0]);
    }

    #[test]
    fn conflicting_scenario_fields_are_rejected() {
        let bad = ScenarioConfig {
            closely_spaced: Some(CloselySpacedConfig {
                theta1: 0.0,
                alpha: PI,
            }),
            ..default_wide_scenario()
        };
        assert!(matches!(bad.to_scenario(), Err(DoaLabError::Config(_))));
        let none = ScenarioConfig {
            doas: None,
            ..default_wide_scenario()
        };
        assert!(none.to_scenario().is_err());
        let unknown: std::result::Result<RunConfig, _> =
            toml::from_str("[scenario]\nsensors = 4\nsnapshots = 8\nbogus = 1");
        assert!(unknown.is_err(), "unknown fields must be rejected");
    }

    #[test]
    fn kappa_command_writes_exact_marks() {
        let dir = tempdir().unwrap();
        let config = RunConfig {
            kappa: Some(KappaConfig {
                alpha: 2.0 * PI / 0.5,
                c: 0.5,
                sigma2: Some(1.0),
                beta_lo: None,
                beta_hi: None,
                points: Some(101),
            }),
            ..Default::default()
        };
        let report = cmd_kappa(&config, &overrides_in(dir.path())).unwrap();
        assert_eq!(report.files.len(), 2);
        let doc = fs::read_to_string(&report.files[0]).unwrap();
        let (cols, rows) = crate::csvout::parse_csv(&doc).unwrap();
        assert_eq!(cols, vec!["beta", "kappa", "kappa_t"]);
        let alpha = 2.0 * PI / 0.5;
        let at_zero = rows
            .iter()
            .find(|r| r[0] == 0.0)
            .expect("beta = 0 must be a grid node");
        assert!((at_zero[1] - 1.0).abs() < 1e-12);
        let at_alpha = rows
            .iter()
            .find(|r| r[0] == alpha)
            .expect("beta = alpha must be a grid node");
        assert!((at_alpha[1] - 1.0).abs() < 1e-12);
        // kappa_t identity value at the wide preset.
        assert!((at_zero[2] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_reruns_are_byte_identical() {
        let dir = tempdir().unwrap();
        let config = RunConfig {
            kappa: Some(KappaConfig {
                alpha: 0.25 * PI / 0.5,
                c: 0.5,
                sigma2: Some(1.0),
                beta_lo: None,
                beta_hi: None,
                points: Some(64),
            }),
            ..Default::default()
        };
        let report = cmd_kappa(&config, &overrides_in(dir.path())).unwrap();
        let first = fs::read(&report.files[0]).unwrap();
        let report2 = cmd_kappa(&config, &overrides_in(dir.path())).unwrap();
        let second = fs::read(&report2.files[0]).unwrap();
        assert_eq!(first, second, "kappa.csv must regenerate bit-identically");
    }

    #[test]
    fn spikes_command_reports_landing_sites() {
        let dir = tempdir().unwrap();
        let report = cmd_spikes(&RunConfig::default(), &overrides_in(dir.path())).unwrap();
        let doc = fs::read_to_string(&report.files[0]).unwrap();
        let (_, rows) = crate::csvout::parse_csv(&doc).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0][1] - 11.55).abs() < 1e-10);
        assert!((rows[1][1] - 6.6).abs() < 1e-10);
        // Header block carries the metadata keys.
        for key in ["# config_hash", "# seed", "# generator", "# version", "# c_n"] {
            assert!(doc.contains(key), "missing {key}");
        }
    }

    #[test]
    fn mse_sweep_writes_the_pinned_columns() {
        let dir = tempdir().unwrap();
        let config = RunConfig {
            scenario: Some(ScenarioConfig {
                sensors: 16,
                snapshots: 32,
                ..default_wide_scenario()
            }),
            sweep: Some(SweepConfig {
                snr_db: SnrGrid::List(vec![6.0, 8.0]),
                methods: Some(vec!["gmusic".into(), "periodogram".into()]),
                trials: Some(6),
            }),
            ..Default::default()
        };
        let report = cmd_mse_sweep(&config, &overrides_in(dir.path())).unwrap();
        let doc = fs::read_to_string(&report.files[0]).unwrap();
        let (cols, rows) = crate::csvout::parse_csv(&doc).unwrap();
        assert_eq!(
            cols,
            vec!["method", "snr_db", "mse_emp", "mse_theory", "trials", "failures", "stderr"]
        );
        assert_eq!(rows.len(), 4);
        // Periodogram rows have an empty theory cell.
        let line = doc
            .lines()
            .find(|l| l.starts_with("periodogram"))
            .expect("periodogram row");
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], "", "theory must be absent: {line}");
    }

    #[test]
    fn mp_hist_on_a_small_draw() {
        let dir = tempdir().unwrap();
        let config = RunConfig {
            scenario: Some(ScenarioConfig {
                sensors: 64,
                snapshots: 128,
                source_powers: Some(vec![10.0, 5.0]),
                ..default_wide_scenario()
            }),
            mp: Some(MpConfig {
                bins: Some(16),
                exclude_top: None,
            }),
            ..Default::default()
        };
        let report = cmd_mp_hist(&config, &overrides_in(dir.path())).unwrap();
        let summary = fs::read_to_string(&report.files[1]).unwrap();
        let gap_line = summary
            .lines()
            .find(|l| l.starts_with("sup_cdf_gap"))
            .expect("gap row");
        let gap: f64 = gap_line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(gap > 0.0 && gap < 0.25, "gap {gap} out of range at M=64");
    }

    #[test]
    fn compare_command_emits_both_scales() {
        let dir = tempdir().unwrap();
        let config = RunConfig {
            scenario: Some(ScenarioConfig {
                sensors: 24,
                snapshots: 48,
                source_powers: Some(vec![10.0, 5.0]),
                ..default_wide_scenario()
            }),
            compare: Some(CompareConfig {
                trials: Some(3),
                probes: None,
                with_doa: Some(false),
                scales: Some(vec![1, 2]),
            }),
            ..Default::default()
        };
        let report = cmd_unconditional_compare(&config, &overrides_in(dir.path())).unwrap();
        let doc = fs::read_to_string(&report.files[1]).unwrap();
        let (_, rows) = crate::csvout::parse_csv(&doc).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][1] as usize, 24);
        assert_eq!(rows[1][1] as usize, 48);
    }
}
