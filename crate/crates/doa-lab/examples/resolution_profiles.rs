//! Evaluates the limiting localization profiles kappa (corrected) and
//! kappa_t (uncorrected) around a pair of sources spaced alpha/N apart.
//! Whether a profile attains a local maximum at the source positions decides
//! whether that estimator can resolve the pair at all, no matter how many
//! snapshots are collected.
//!
//!     cargo run --release --example resolution_profiles

use doa_lab::resolution::TwoSourceModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = 0.5;
    for (label, alpha) in [("tight pair", 0.25 * std::f64::consts::PI / c),
                           ("separated pair", 2.0 * std::f64::consts::PI / c)] {
        let model = TwoSourceModel::new(alpha, c, 1.0)?;
        let sep = model.separation_check();
        println!("{label}: alpha = {alpha:.4}, c = {c}");
        println!(
            "  subspace separation: {} (margin {:+.4})",
            if sep.ok { "holds" } else { "violated" },
            sep.margin
        );
        println!("  {:>8} {:>10} {:>10}", "beta", "kappa", "kappa_t");
        let points = 9;
        for i in 0..points {
            let beta = -0.5 * alpha + 2.0 * alpha * i as f64 / (points - 1) as f64;
            println!(
                "  {beta:>8.4} {:>10.6} {:>10.6}",
                model.kappa(beta)?,
                model.kappa_t(beta)?
            );
        }
        println!(
            "  kappa   = 1 exactly at both sources: {}",
            model.kappa(0.0)? == 1.0 && model.kappa(alpha)? == 1.0
        );
        println!(
            "  kappa_t has a local max at the sources: {}",
            model.kappa_t_is_local_max(0.0)?
        );
        println!();
    }
    println!("at the tight spacing the uncorrected profile loses its maxima at the");
    println!("sources, so the uncorrected estimator cannot separate the pair even");
    println!("asymptotically; the corrected profile always peaks there.");
    Ok(())
}
