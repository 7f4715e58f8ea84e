//! Classify every catalog field of every bundled system.
//!
//! Each field's Lie derivative of the metric is measured at random guarded
//! sample points and sorted into one of four buckets: Killing (isometry),
//! homothetic (uniform rescaling), proper conformal (pointwise rescaling),
//! or none of those. The measured bucket is printed next to the catalog's
//! expected one.
//!
//! Run with:
//!   cargo run --example classify_fields

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use virial_geo::geometry::ConformalKind;
use virial_geo::systems::{preset, preset_names};

fn main() -> virial_geo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0usize;

    for name in preset_names() {
        let bundled = preset(name, &BTreeMap::new())?;
        let sys = &bundled.spec;
        let samples = sys.random_guarded_points(&mut rng, 48)?;
        println!("{name}  ({})", bundled.summary);

        for entry in &sys.catalog {
            let result = sys.classify_entry(entry, &samples, None)?;
            let detail = match &result.kind {
                ConformalKind::Homothetic { factor } => format!("factor {factor:.6}"),
                ConformalKind::ProperConformal { factor_samples } => {
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for (_, c) in factor_samples {
                        lo = lo.min(*c);
                        hi = hi.max(*c);
                    }
                    format!("factor in [{lo:+.4}, {hi:+.4}]")
                }
                _ => String::new(),
            };
            let agrees = result.kind.label() == entry.expected.label();
            if !agrees {
                mismatches += 1;
            }
            println!(
                "  {:<22} {:<18} residual {:9.2e}  {}{}",
                entry.name,
                result.kind.label(),
                result.max_residual,
                detail,
                if agrees { "" } else { "  <- expected " },
            );
        }
        println!();
    }

    if mismatches > 0 {
        println!("{mismatches} field(s) did not classify as cataloged");
        std::process::exit(2);
    }
    println!("every catalog field classified as expected");
    Ok(())
}
