//! Time-averaged force balances on a closed gravitational orbit.
//!
//! Integrates the planar inverse-distance problem over ten orbital periods
//! and evaluates one balance per catalog field: the rotation and both
//! translations are isometries of the flat metric, and the dilation is a
//! homothety with factor 2. The homogeneity degrees (kinetic 2, potential -1)
//! also pin the energy split: <T> = -E and <V> = 2E for bound motion.
//!
//! Run with:
//!   cargo run --example kepler_virial

use std::collections::BTreeMap;

use virial_geo::dynamics::{energy, integrate};
use virial_geo::systems::{kepler_period, preset, resolve_relation};
use virial_geo::virial::{homogeneous_partition, virial_residual};

fn main() -> virial_geo::Result<()> {
    let bundled = preset("kepler", &BTreeMap::new())?;
    let sys = &bundled.spec;
    let fixture = bundled.fixture("ellipse")?;

    let e = energy(sys, &fixture.state);
    let period = kepler_period(1.0, 1.0, e).expect("the reference orbit is bound");
    println!("energy {e:+.6}, orbital period {period:.6}");
    println!(
        "averaging over {} periods, dt = {:.3e}",
        fixture.config.t_end / period,
        fixture.config.dt
    );

    let traj = integrate(sys, &fixture.state, &fixture.config)?;
    println!(
        "{} samples, relative energy drift {:.2e}\n",
        traj.len(),
        traj.meta.max_drift
    );

    for entry in &sys.catalog {
        let relation = resolve_relation(sys, &entry.name)?;
        let report = virial_residual(sys, &traj, &relation)?;
        println!(
            "  {:<16} {:<10} residual {:+.3e}   bounded by 2 max|G|/T = {:.3e}",
            report.relation,
            report.kind,
            report.residual,
            2.0 * report.g_max.unwrap() / traj.span(),
        );
    }

    let partition = homogeneous_partition(sys, &traj, 2.0, -1.0)?;
    println!("\nenergy split from homogeneity degrees (2, -1):");
    println!(
        "  <T> = {:+.9}   predicted -E  = {:+.9}",
        partition.avg_kinetic, partition.predicted_kinetic
    );
    println!(
        "  <V> = {:+.9}   predicted 2E  = {:+.9}",
        partition.avg_potential, partition.predicted_potential
    );
    Ok(())
}
