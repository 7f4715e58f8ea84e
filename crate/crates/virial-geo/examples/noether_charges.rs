//! Conserved pairings along geodesics, and what a potential does to them.
//!
//! For any Killing field X of the metric, the pairing G = g(X, v) obeys
//! dG/dt = -X(V) along the flow. With the potential switched off every G is
//! an exact constant of free motion: the three rotation generators of the
//! sphere give three conserved charges. Switching the pendulum potential on
//! breaks two of them (the potential singles out an axis) while the charge of
//! the surviving symmetry stays pinned.
//!
//! Run with:
//!   cargo run --example noether_charges

use std::collections::BTreeMap;

use virial_geo::dynamics::integrate;
use virial_geo::systems::preset;
use virial_geo::virial::affine_virial;

fn main() -> virial_geo::Result<()> {
    for amplitude in [0.0, 1.0] {
        let params = BTreeMap::from([("amplitude".to_string(), amplitude)]);
        let bundled = preset("sphere", &params)?;
        let sys = &bundled.spec;
        let fixture = bundled.fixture("precession")?;
        let traj = integrate(sys, &fixture.state, &fixture.config)?;

        if amplitude == 0.0 {
            println!("free motion (amplitude 0): every rotation charge is conserved");
        } else {
            println!("\npendulum (amplitude {amplitude}): only the axial charge survives");
        }
        for name in ["x1", "x2", "x3"] {
            let field = &sys.field(name)?.field;
            let start = affine_virial(sys, field, &traj.first_state());
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..traj.len() {
                let g = affine_virial(sys, field, &traj.state(i));
                lo = lo.min(g);
                hi = hi.max(g);
            }
            println!(
                "  G_{name} = {start:+.6}   wanders by {:.3e} over t = {}",
                (hi - lo),
                traj.span()
            );
        }
    }
    Ok(())
}
