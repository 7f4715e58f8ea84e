//! Build a system from scratch: a particle on the hyperbolic half-plane.
//!
//! Nothing here comes from the bundled catalog. The metric diag(1/y^2, 1/y^2)
//! on the upper half-plane y > 0, a confining potential V = x^2 + (ln y)^2,
//! and three hand-written vector fields are assembled into a SystemSpec.
//! The point of the exercise: x d/dx + y d/dy looks like a dilation but is an
//! exact isometry of this metric (hyperbolic translation along a geodesic
//! through the origin), and the classifier sees that from samples alone. Its
//! averaged balance then forces <x^2> = -<ln y> along every bounded orbit.
//!
//! Run with:
//!   cargo run --example hyperbolic_half_plane

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use virial_geo::dynamics::{integrate, CatalogEntry, ExpectedClass, IntegratorConfig, State};
use virial_geo::geometry::{MetricField, Point, ScalarField, Tensor3, VectorFieldDef};
use virial_geo::systems::resolve_relation;
use virial_geo::virial::{time_average, virial_residual, Observable};
use virial_geo::SystemSpec;

fn half_plane() -> SystemSpec {
    let metric = MetricField::with_deriv(
        2,
        |q| {
            let y2 = q.coord(1) * q.coord(1);
            DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0 / y2, 1.0 / y2]))
        },
        |q| {
            let y = q.coord(1);
            let mut d = Tensor3::zeros(2);
            d.set(0, 0, 1, -2.0 / (y * y * y));
            d.set(1, 1, 1, -2.0 / (y * y * y));
            d
        },
    );
    let potential = ScalarField::with_gradient(
        2,
        |q| q.coord(0) * q.coord(0) + q.coord(1).ln().powi(2),
        |q| {
            let (x, y) = (q.coord(0), q.coord(1));
            DVector::from_row_slice(&[2.0 * x, 2.0 * y.ln() / y])
        },
    );
    let catalog = vec![
        CatalogEntry {
            name: "horizontal".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::constant(&[1.0, 0.0]),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "radial-stretch".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                |q| q.coords.clone(),
                |_| DMatrix::identity(2, 2),
            ),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "vertical".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                |q| DVector::from_row_slice(&[0.0, q.coord(1)]),
                |_| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            ),
            expected: ExpectedClass::NonConformal,
            conformal_factor: None,
            secondary_metric: None,
        },
    ];
    SystemSpec {
        name: "half-plane".into(),
        metric,
        potential,
        guard: Arc::new(|q: &Point| q.coord(1) > 1e-9),
        catalog,
        sample_domain: vec![(-2.0, 2.0), (0.2, 3.0)],
    }
}

fn main() -> virial_geo::Result<()> {
    let sys = half_plane();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples = sys.random_guarded_points(&mut rng, 48)?;
    for entry in &sys.catalog {
        let measured = sys.classify_entry(entry, &samples, None)?;
        println!(
            "  {:<16} classified {:<14} (residual {:.2e})",
            entry.name,
            measured.kind.label(),
            measured.max_residual
        );
    }

    let start = State::from_slices(&[0.5, 1.0], &[0.8, 0.3]);
    let relation = resolve_relation(&sys, "radial-stretch")?;
    println!("\nbalance for the isometry that looks like a dilation:");
    for t_end in [400.0, 4000.0] {
        let mut config = IntegratorConfig::new(1e-3, t_end);
        config.record_every = 10;
        let traj = integrate(&sys, &start, &config)?;
        let report = virial_residual(&sys, &traj, &relation)?;
        println!("  T = {t_end:>6}: residual {:+.3e}", report.residual);

        if t_end == 4000.0 {
            let x_sq = Observable::new("x^2", |s: &State| s.q.coord(0) * s.q.coord(0));
            let ln_y = Observable::new("ln y", |s: &State| s.q.coord(1).ln());
            let a = time_average(&traj, &x_sq)?.value_full;
            let b = time_average(&traj, &ln_y)?.value_full;
            println!("\n  <x^2> = {a:+.6}   <ln y> = {b:+.6}   sum {:+.2e}", a + b);
        }
    }
    Ok(())
}
