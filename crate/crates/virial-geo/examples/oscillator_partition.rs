//! Equipartition in an isotropic harmonic well, swept over the spring rate.
//!
//! Kinetic energy is homogeneous of degree 2 in the velocities and the
//! harmonic potential of degree 2 in the coordinates, so the time averages
//! must split the conserved energy evenly: <T> = <V> = E/2, independent of
//! the spring rate, the amplitude, or the dimension. Each run covers exactly
//! ten oscillation periods, so the averages land on the prediction at
//! quadrature accuracy.
//!
//! Run with:
//!   cargo run --example oscillator_partition

use std::collections::BTreeMap;

use virial_geo::dynamics::integrate;
use virial_geo::systems::{preset, resolve_relation};
use virial_geo::virial::{homogeneous_partition, virial_residual};

fn main() -> virial_geo::Result<()> {
    println!("{:>6} {:>14} {:>14} {:>14} {:>12}", "k", "<T>", "<V>", "E/2", "error");
    for k in [0.25, 1.0, 4.0, 9.0] {
        let params = BTreeMap::from([("k".to_string(), k)]);
        let bundled = preset("flat-oscillator", &params)?;
        let fixture = bundled.fixture("ellipse")?;
        let traj = integrate(&bundled.spec, &fixture.state, &fixture.config)?;

        let p = homogeneous_partition(&bundled.spec, &traj, 2.0, 2.0)?;
        let err = (p.avg_kinetic - p.predicted_kinetic)
            .abs()
            .max((p.avg_potential - p.predicted_potential).abs());
        println!(
            "{k:>6} {:>14.9} {:>14.9} {:>14.9} {err:>12.2e}",
            p.avg_kinetic,
            p.avg_potential,
            0.5 * p.energy
        );
    }

    // The same statement through the dilation field: L_X g = 2 g and
    // X(V) = 2V, so the balance <2T - 2V> vanishes.
    let bundled = preset("flat-oscillator", &BTreeMap::new())?;
    let fixture = bundled.fixture("ellipse")?;
    let traj = integrate(&bundled.spec, &fixture.state, &fixture.config)?;
    let relation = resolve_relation(&bundled.spec, "dilation")?;
    let report = virial_residual(&bundled.spec, &traj, &relation)?;
    println!("\ndilation balance <2T - 2V>: residual {:+.3e}", report.residual);
    Ok(())
}
