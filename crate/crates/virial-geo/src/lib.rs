//! Mechanical systems `L = T_g - V` on Riemannian charts: metric and
//! connection algebra, classification of symmetry vector fields (Killing,
//! homothetic, conformal), fixed-step trajectory integration with energy
//! tracking, and verification of time-averaged virial balances along the
//! resulting orbits.
//!
//! The core objects are a [`geometry::MetricField`] (a coordinate metric with
//! analytic or finite-difference derivatives), a [`dynamics::SystemSpec`]
//! (metric, potential, domain guard, and a catalog of named fields), and a
//! [`virial::VirialRelation`] (the balance a given field implies). Bundled
//! systems live in [`systems`]; the `virial-geo` binary exposes them on the
//! command line.
//!
//! ```
//! use std::collections::BTreeMap;
//! use virial_geo::dynamics::integrate;
//! use virial_geo::systems::{preset, resolve_relation};
//! use virial_geo::virial::virial_residual;
//!
//! let bundled = preset("kepler", &BTreeMap::new())?;
//! let fixture = bundled.fixture("ellipse")?;
//! let trajectory = integrate(&bundled.spec, &fixture.state, &fixture.config)?;
//! let relation = resolve_relation(&bundled.spec, "rotation")?;
//! let report = virial_residual(&bundled.spec, &trajectory, &relation)?;
//! assert!(report.residual.abs() < 1e-9);
//! # Ok::<(), virial_geo::error::Error>(())
//! ```

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod systems;
pub mod virial;

pub use dynamics::{integrate, IntegratorConfig, State, SystemSpec, Trajectory};
pub use error::{Error, Result};
pub use geometry::{ConformalKind, MetricField, Point, ScalarField, VectorFieldDef};
pub use systems::{build_system, preset, SystemId};
pub use virial::{time_average, virial_residual, RelationKind, VirialRelation};
