//! Averaged force balances on the periodic exponential chain.
//!
//! Two Killing fields of the chain's flat kinetic metric tell different
//! stories. The uniform translation is an exact symmetry of the potential
//! too, so its balance integrand (the total force) vanishes identically.
//! Translating a single site is still an isometry of the metric but not of
//! the potential: its integrand is the fluctuating force on that site, and
//! only the time average decays, at the rate 2 max|G| / T set by the bounded
//! momentum G = p1.
//!
//! Run with:
//!   cargo run --example toda_momentum_balance

use std::collections::BTreeMap;

use virial_geo::dynamics::integrate;
use virial_geo::systems::{preset, resolve_relation};
use virial_geo::virial::virial_residual;

fn main() -> virial_geo::Result<()> {
    let bundled = preset("toda", &BTreeMap::new())?;
    let sys = &bundled.spec;
    let fixture = bundled.fixture("thermal")?;
    let total = resolve_relation(sys, "uniform-translation")?;
    let single = resolve_relation(sys, "translation-1")?;

    println!(
        "{:>8} {:>16} {:>16} {:>14}",
        "T", "total force", "site-1 force", "2 max|G| / T"
    );
    for t_end in [100.0, 1000.0, 10000.0] {
        let mut config = fixture.config.clone();
        config.t_end = t_end;
        config.record_every = 10;
        let traj = integrate(sys, &fixture.state, &config)?;

        let all = virial_residual(sys, &traj, &total)?;
        let one = virial_residual(sys, &traj, &single)?;
        println!(
            "{t_end:>8} {:>16.3e} {:>16.3e} {:>14.3e}",
            all.residual,
            one.residual,
            2.0 * one.g_max.unwrap() / t_end,
        );
    }

    println!("\nthe site force only balances in the average; the total force is zero pointwise");
    Ok(())
}
