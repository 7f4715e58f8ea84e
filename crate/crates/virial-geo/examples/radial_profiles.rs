//! A family of radial kinetic profiles and the field that rescales them.
//!
//! The metric diag(c r^p, r^2, r^2 sin^2 theta) admits the radial field
//! X = r^(1 - p/2) / sqrt(c) d/dr with L_X g = f g, f = (2/sqrt(c)) r^(-p/2).
//! At p = 0 the factor is the constant 2/sqrt(c) and the field is a
//! homothety; for any other exponent the factor varies with r and the field
//! is only conformal. The classifier picks the transition up from samples
//! alone, and the factor-weighted balance holds along trajectories either
//! way.
//!
//! Run with:
//!   cargo run --example radial_profiles

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use virial_geo::dynamics::integrate;
use virial_geo::geometry::ConformalKind;
use virial_geo::systems::{preset, resolve_relation};
use virial_geo::virial::virial_residual;

fn main() -> virial_geo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    for exponent in [0.0, 0.5, 1.0, 2.0] {
        let params = BTreeMap::from([
            ("exponent".to_string(), exponent),
            ("coeff".to_string(), 4.0),
        ]);
        let bundled = preset("radial", &params)?;
        let sys = &bundled.spec;

        let samples = sys.random_guarded_points(&mut rng, 48)?;
        let entry = sys.field("conformal-radial")?;
        let measured = sys.classify_entry(entry, &samples, None)?;
        let label = match &measured.kind {
            ConformalKind::Homothetic { factor } => format!("homothetic, factor {factor:.6}"),
            ConformalKind::ProperConformal { factor_samples } => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (_, c) in factor_samples {
                    lo = lo.min(*c);
                    hi = hi.max(*c);
                }
                format!("proper conformal, factor in [{lo:.4}, {hi:.4}]")
            }
            other => other.label().to_string(),
        };

        let fixture = bundled.fixture("equatorial")?;
        let traj = integrate(sys, &fixture.state, &fixture.config)?;
        let relation = resolve_relation(sys, "conformal-radial")?;
        let report = virial_residual(sys, &traj, &relation)?;

        println!("p = {exponent}");
        println!("  classified as {label}");
        println!(
            "  balance <f T - X(V)> over t = {}: residual {:+.3e}",
            traj.span(),
            report.residual
        );
    }
    Ok(())
}
