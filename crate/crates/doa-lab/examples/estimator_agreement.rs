//! Races the weighted-sum form of the corrected localization function
//! against its contour-integral variant on shared draws. The two differ by
//! a term that vanishes as the array grows, so the per-trial sup gap over
//! probe angles shrinks when (M, N) doubles, while their DoA estimates stay
//! statistically indistinguishable.
//!
//!     cargo run --release --example estimator_agreement

use std::f64::consts::PI;

use doa_lab::array::{diag_cov, ArrayScenario, DoaSpec, SourceModel};
use doa_lab::montecarlo::{default_probes, median, unconditional_agreement};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ArrayScenario {
        sensors: 32,
        snapshots: 64,
        doas: DoaSpec::Explicit(vec![0.0, PI / 4.0]),
        source_cov: diag_cov(&[10.0, 5.0]),
        noise_power: 1.0,
        source_model: SourceModel::SpikeExact,
        seed: 9,
    };
    let trials = 80;

    let mut medians = Vec::new();
    for scale in [1usize, 2] {
        let mut scenario = base.clone();
        scenario.sensors = base.sensors * scale;
        scenario.snapshots = base.snapshots * scale;
        let probes = default_probes(&scenario);
        let (records, skipped) =
            unconditional_agreement(&scenario, trials, &probes, base.seed, true)?;

        let gaps: Vec<f64> = records.iter().map(|r| r.eta_gap).collect();
        let med = median(&gaps);
        let mse = |pick: &dyn Fn(&doa_lab::montecarlo::AgreementRecord) -> Option<f64>| {
            let v: Vec<f64> = records.iter().filter_map(pick).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        println!(
            "M = {:>3}, N = {:>3}: median sup gap {med:.3e} over {} trials ({} skipped)",
            scenario.sensors,
            scenario.snapshots,
            records.len(),
            skipped
        );
        println!(
            "    angle MSE: weighted {:.3e}, contour {:.3e}",
            mse(&|r| r.sq_err_weighted),
            mse(&|r| r.sq_err_contour)
        );
        medians.push(med);
    }
    println!();
    println!(
        "gap shrank by {:.0}% on doubling (consistent with a vanishing remainder)",
        100.0 * (1.0 - medians[1] / medians[0])
    );
    Ok(())
}
