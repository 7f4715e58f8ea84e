//! How fast a finite-window average converges, and what limits it.
//!
//! On the spherical pendulum the precessing orbit never closes, so no window
//! length is exactly right. The averaged balance then decays like
//! 2 max|G| / T, where G is the bounded pairing of the field with the
//! velocity: doubling the window roughly halves the residual.
//!
//! Independently of the window, every integrand equals dG/dt along the flow,
//! so the average must match (G(T) - G(0)) / T up to trapezoid quadrature
//! error. That mismatch is reported as balance_check and shrinks with the
//! square of the sample spacing: halving dt cuts it by about four.
//!
//! Run with:
//!   cargo run --example window_convergence

use std::collections::BTreeMap;

use virial_geo::dynamics::integrate;
use virial_geo::systems::{preset, resolve_relation};
use virial_geo::virial::virial_residual;

fn main() -> virial_geo::Result<()> {
    let bundled = preset("sphere", &BTreeMap::new())?;
    let sys = &bundled.spec;
    let fixture = bundled.fixture("precession")?;
    let relation = resolve_relation(sys, "conformal")?;

    println!("window growth at fixed dt = 1e-3:");
    println!("{:>8} {:>16} {:>16} {:>10}", "T", "residual", "2 max|G| / T", "ratio");
    for t_end in [25.0, 50.0, 100.0, 200.0, 400.0] {
        let mut config = fixture.config.clone();
        config.t_end = t_end;
        let traj = integrate(sys, &fixture.state, &config)?;
        let report = virial_residual(sys, &traj, &relation)?;
        let bound = 2.0 * report.g_max.unwrap() / t_end;
        println!(
            "{t_end:>8} {:>16.6e} {:>16.6e} {:>10.3}",
            report.residual,
            bound,
            report.residual.abs() / bound
        );
    }

    println!("\nquadrature error at fixed T = 50:");
    println!("{:>10} {:>16}", "dt", "balance_check");
    let mut previous: Option<f64> = None;
    for dt in [4e-3, 2e-3, 1e-3, 5e-4] {
        let mut config = fixture.config.clone();
        config.dt = dt;
        let traj = integrate(sys, &fixture.state, &config)?;
        let report = virial_residual(sys, &traj, &relation)?;
        let check = report.balance_check.unwrap();
        match previous {
            Some(last) => println!("{dt:>10.1e} {check:>16.6e}   shrank {:.2}x", last / check),
            None => println!("{dt:>10.1e} {check:>16.6e}"),
        }
        previous = Some(check);
    }
    Ok(())
}
