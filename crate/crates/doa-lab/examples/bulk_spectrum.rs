//! Draws one sample covariance matrix with two planted sources and compares
//! its eigenvalue bulk to the limiting spectral law, then checks where the
//! two detached eigenvalues landed.
//!
//!     cargo run --release --example bulk_spectrum

use std::f64::consts::PI;

use doa_lab::array::{diag_cov, scm_from_scenario, ArrayScenario, DoaSpec, SourceModel};
use doa_lab::eigsys::eig_hermitian;
use doa_lab::rmt::{mp_cdf_gap, mp_density, mp_support, phi};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, n) = (256, 512);
    let (sigma2, c) = (1.0, m as f64 / n as f64);
    let spikes = [10.0, 5.0];
    let scenario = ArrayScenario {
        sensors: m,
        snapshots: n,
        doas: DoaSpec::Explicit(vec![0.0, 2.0 * PI * (m as f64 / 8.0).floor() / m as f64]),
        source_cov: diag_cov(&spikes),
        noise_power: sigma2,
        source_model: SourceModel::SpikeExact,
        seed: 20,
    };

    let scm = scm_from_scenario(&scenario)?;
    let eig = eig_hermitian(&scm, n, sigma2)?;
    let all = eig.eigenvalues();

    println!("sample covariance at M = {m}, N = {n} (c = {c})");
    for (j, &lambda) in all.iter().take(2).enumerate() {
        let limit = phi(spikes[j], sigma2, c)?;
        println!(
            "  detached eigenvalue {}: {lambda:.4}  (limit {limit:.4}, rel err {:+.2e})",
            j + 1,
            lambda / limit - 1.0
        );
    }

    let bulk = &all[2..];
    let (lo, hi) = mp_support(sigma2, c)?;
    let gap = mp_cdf_gap(bulk, sigma2, c)?;
    println!("  bulk support: [{lo:.4}, {hi:.4}]");
    println!("  sup gap between bulk CDF and the limit law: {gap:.4}");

    // Coarse density comparison across the support.
    println!("  density across the bulk (empirical vs limit):");
    let bins = 8;
    let width = (hi - lo) / bins as f64;
    for b in 0..bins {
        let left = lo + b as f64 * width;
        let right = left + width;
        let count = bulk.iter().filter(|&&x| x >= left && x < right).count();
        let empirical = count as f64 / (bulk.len() as f64 * width);
        let mid = 0.5 * (left + right);
        println!(
            "    [{left:.3}, {right:.3})  {empirical:.3} vs {:.3}",
            mp_density(mid, sigma2, c)?
        );
    }
    Ok(())
}
