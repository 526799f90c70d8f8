//! Builds every localization function on one shared draw and extracts DoA
//! estimates from each: the population-projector reference, the uncorrected
//! sample version, the eigenvector-corrected version, its contour-integral
//! variant, and the beamforming periodogram.
//!
//!     cargo run --release --example pseudospectra

use std::f64::consts::PI;
use std::sync::Arc;

use doa_lab::array::{diag_cov, scm_from_scenario, steering_matrix, ArrayScenario, DoaSpec, SourceModel};
use doa_lab::eigsys::eig_hermitian;
use doa_lab::montecarlo::default_intervals;
use doa_lab::spectrum::{extract_doas, PseudoSpectrum};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ArrayScenario {
        sensors: 40,
        snapshots: 80,
        doas: DoaSpec::Explicit(vec![0.0, PI / 4.0]),
        source_cov: diag_cov(&[10.0, 5.0]),
        noise_power: 1.0,
        source_model: SourceModel::SpikeExact,
        seed: 7,
    };
    let thetas = scenario.doa_angles();
    let k = scenario.num_sources();

    let scm = scm_from_scenario(&scenario)?;
    let eig = Arc::new(eig_hermitian(&scm, scenario.snapshots, scenario.noise_power)?);
    let a = steering_matrix(&thetas, scenario.sensors)?;

    let spectra = vec![
        ("reference", PseudoSpectrum::true_spectrum(&a, scenario.snapshots)?),
        ("uncorrected", PseudoSpectrum::music(Arc::clone(&eig), k)?),
        ("corrected", PseudoSpectrum::gmusic(Arc::clone(&eig), k)?),
        ("contour", PseudoSpectrum::unconditional(Arc::clone(&eig), k)?),
        ("periodogram", PseudoSpectrum::periodogram(scm.clone(), scenario.snapshots)?),
    ];

    println!("localization function values at the true angles:");
    print!("{:>14}", "");
    for &t in &thetas {
        print!("  theta = {t:>7.4}");
    }
    println!();
    for (name, ps) in &spectra {
        print!("{name:>14}");
        for &t in &thetas {
            print!("  {:>15.6e}", ps.eval(t)?);
        }
        println!();
    }

    println!();
    println!("extracted angle estimates (errors in array-resolution cells 2pi/M):");
    let intervals = default_intervals(&scenario)?;
    let cell = 2.0 * PI / scenario.sensors as f64;
    for (name, ps) in &spectra {
        let est = extract_doas(ps, &intervals)?;
        let angles = est.angles();
        print!("{name:>14}");
        for (j, &t) in thetas.iter().enumerate() {
            print!("  {:>9.5} ({:+.3} cells)", angles[j], (angles[j] - t) / cell);
        }
        println!();
    }
    Ok(())
}
