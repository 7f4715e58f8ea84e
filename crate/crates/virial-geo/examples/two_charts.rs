//! One motion, two charts: the spherical pendulum in angle coordinates and
//! in the gnomonic projection of the southern cap.
//!
//! The field r (1 + lambda r^2) d/dr on the projection chart is the image of
//! tan(theta) d/dtheta on the sphere. Neither rescales its chart's metric,
//! so the plain conformal machinery labels both non-conformal. The projected
//! field still satisfies a clean identity through a second metric:
//! L_X g = f g' with f = 2 / (1 + lambda r^2) and g' the flat polar metric.
//! Both charts therefore carry an exact balance for the same motion, and the
//! averaged residuals agree.
//!
//! Run with:
//!   cargo run --example two_charts

use std::collections::BTreeMap;

use virial_geo::dynamics::integrate;
use virial_geo::systems::{gnomonic_to_sphere, preset, resolve_relation, sphere_to_gnomonic};
use virial_geo::virial::virial_residual;

fn main() -> virial_geo::Result<()> {
    let sphere = preset("sphere", &BTreeMap::new())?;
    let gnomonic = preset("gnomonic", &BTreeMap::new())?;
    let radius = 1.0;

    // Same initial condition expressed in both charts.
    let on_sphere = sphere.fixture("south-cap")?;
    let on_chart = sphere_to_gnomonic(radius, &on_sphere.state)?;
    println!(
        "sphere start  theta = {:.4}, phi = {:.4}",
        on_sphere.state.q.coord(0),
        on_sphere.state.q.coord(1)
    );
    println!(
        "chart start   r     = {:.4}, phi = {:.4}",
        on_chart.q.coord(0),
        on_chart.q.coord(1)
    );

    let config = &on_sphere.config;
    let traj_sphere = integrate(&sphere.spec, &on_sphere.state, config)?;
    let traj_chart = integrate(&gnomonic.spec, &on_chart, config)?;

    // The charts must agree pointwise, not just on averages: map the final
    // chart state back to angles and compare.
    let back = gnomonic_to_sphere(radius, &traj_chart.last_state());
    let end = traj_sphere.last_state();
    let position_gap = (back.q.coord(0) - end.q.coord(0))
        .abs()
        .max((back.q.coord(1) - end.q.coord(1)).abs());
    println!("\nfinal-state gap after mapping back: {position_gap:.3e}");

    let general = resolve_relation(&sphere.spec, "tangent-dilation")?;
    let two_metric = resolve_relation(&gnomonic.spec, "projected-dilation")?;
    let a = virial_residual(&sphere.spec, &traj_sphere, &general)?;
    let b = virial_residual(&gnomonic.spec, &traj_chart, &two_metric)?;

    println!("\nsphere chart   {:<12} residual {:+.9e}", a.kind, a.residual);
    println!("gnomonic chart {:<12} residual {:+.9e}", b.kind, b.residual);
    println!("difference     {:.3e}", (a.residual - b.residual).abs());
    Ok(())
}
