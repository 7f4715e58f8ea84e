//! Bundled example systems.
//!
//! Each preset builds a [`SystemSpec`] with analytic metric derivatives and
//! potential gradients, a catalog of named symmetry fields with their
//! expected classification, and reference initial states that stay inside the
//! chart's guard. Presets are addressed by name through [`preset`]; the
//! catalog names double as relation names for [`resolve_relation`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{energy, CatalogEntry, ExpectedClass, IntegratorConfig, State, SystemSpec};
use crate::error::{Error, Result};
use crate::geometry::{MetricField, Point, ScalarField, Tensor3, VectorFieldDef};
use crate::virial::{RelationKind, VirialRelation};

/// Potential shapes the bundled charts understand. Radial charts read the
/// first coordinate as the distance from the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    Zero,
    /// `V = (k/2) |q|^2` on flat charts, `V = (k/2) r^2` on radial ones.
    Harmonic { k: f64 },
    /// `V = -k / r`.
    InverseR { k: f64 },
    /// `V = amplitude * cos(theta)` on the sphere and its projections.
    CosTheta { amplitude: f64 },
}

/// Fully specified bundled system.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemId {
    /// Euclidean space in Cartesian coordinates.
    Flat { dim: usize, potential: PotentialSpec },
    /// Euclidean plane in polar coordinates `(r, phi)`.
    Polar { potential: PotentialSpec },
    /// Round sphere of the given radius in angles `(theta, phi)`, with a
    /// `cos(theta)` potential of the given amplitude.
    Sphere { radius: f64, amplitude: f64 },
    /// Southern hemisphere of a sphere with curvature `lambda = 1/R^2` in
    /// gnomonic coordinates `(r, phi)`, same potential as [`SystemId::Sphere`].
    Gnomonic { lambda: f64, amplitude: f64 },
    /// Planar motion under an attractive `-attraction/r` potential with the
    /// given inertial mass, in polar coordinates.
    Kepler { attraction: f64, mass: f64 },
    /// Periodic exponential chain of `n` unit-coupled sites.
    Toda { n: usize, mass: f64 },
    /// Radial kinetic profile `g = diag(c r^p, r^2, r^2 sin^2 theta)` in
    /// spherical coordinates.
    Radial {
        coeff: f64,
        exponent: f64,
        potential: PotentialSpec,
    },
}

/// Named initial state with a reasonable integrator configuration.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub state: State,
    pub config: IntegratorConfig,
}

impl Fixture {
    fn new(name: &str, q: &[f64], v: &[f64], dt: f64, t_end: f64) -> Self {
        Fixture {
            name: name.to_string(),
            state: State::from_slices(q, v),
            config: IntegratorConfig::new(dt, t_end),
        }
    }
}

/// Step grid that lands exactly on `t_end` with a step near `dt_nominal`.
/// Periodic fixtures use this so their averaging window is a whole number of
/// orbits and the canonical relations converge at tight tolerances.
fn resonant_config(dt_nominal: f64, t_end: f64) -> IntegratorConfig {
    let steps = (t_end / dt_nominal).round().max(1.0);
    IntegratorConfig::new(t_end / steps, t_end)
}

/// A preset system together with its reference initial states.
#[derive(Clone)]
pub struct BundledSystem {
    /// Canonical preset name.
    pub preset: String,
    pub summary: String,
    pub spec: SystemSpec,
    pub fixtures: Vec<Fixture>,
}

impl BundledSystem {
    pub fn fixture(&self, name: &str) -> Result<&Fixture> {
        self.fixtures
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "system '{}' has no fixture '{}' (available: {})",
                    self.preset,
                    name,
                    self.fixtures
                        .iter()
                        .map(|f| f.name.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "flat",
    "flat-oscillator",
    "polar",
    "sphere",
    "gnomonic",
    "kepler",
    "toda",
    "radial",
    "radial-flat",
];

pub fn preset_names() -> &'static [&'static str] {
    PRESET_NAMES
}

/// Reads numeric parameter overrides and reports unknown keys.
struct ParamReader<'a> {
    preset: &'a str,
    params: &'a BTreeMap<String, f64>,
    allowed: Vec<&'static str>,
}

impl<'a> ParamReader<'a> {
    fn new(preset: &'a str, params: &'a BTreeMap<String, f64>) -> Self {
        ParamReader {
            preset,
            params,
            allowed: Vec::new(),
        }
    }

    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.allowed.push(key);
        self.params.get(key).copied().unwrap_or(default)
    }

    fn get_count(&mut self, key: &'static str, default: usize) -> Result<usize> {
        self.allowed.push(key);
        match self.params.get(key) {
            None => Ok(default),
            Some(&x) => {
                if x.fract() != 0.0 || x < 1.0 || x > 1e6 {
                    return Err(Error::invalid(format!(
                        "parameter '{key}' must be a positive integer, got {x}"
                    )));
                }
                Ok(x as usize)
            }
        }
    }

    fn positive(&mut self, key: &'static str, default: f64) -> Result<f64> {
        let x = self.get(key, default);
        if x <= 0.0 || !x.is_finite() {
            return Err(Error::invalid(format!(
                "parameter '{key}' must be positive and finite, got {x}"
            )));
        }
        Ok(x)
    }

    fn finish(self) -> Result<()> {
        for key in self.params.keys() {
            if !self.allowed.contains(&key.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown parameter '{}' for system '{}' (allowed: {})",
                    key,
                    self.preset,
                    self.allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Build a named preset, applying numeric parameter overrides.
pub fn preset(name: &str, params: &BTreeMap<String, f64>) -> Result<BundledSystem> {
    let mut p = ParamReader::new(name, params);
    let built = match name {
        "flat" => {
            let dim = p.get_count("dim", 2)?;
            p.finish()?;
            let mut b = build_bundled(&SystemId::Flat {
                dim,
                potential: PotentialSpec::Zero,
            })?;
            b.preset = "flat".into();
            b.summary = "free particle in Cartesian coordinates".into();
            b.fixtures = vec![Fixture::new(
                "drift",
                &zero_padded(&[0.1, -0.2], dim),
                &zero_padded(&[0.3, 0.1], dim),
                1e-3,
                10.0,
            )];
            b
        }
        "flat-oscillator" => {
            let dim = p.get_count("dim", 2)?;
            let k = p.positive("k", 1.0)?;
            p.finish()?;
            let mut b = build_bundled(&SystemId::Flat {
                dim,
                potential: PotentialSpec::Harmonic { k },
            })?;
            b.preset = "flat-oscillator".into();
            b.summary = "isotropic harmonic well in Cartesian coordinates".into();
            b.fixtures = vec![Fixture {
                name: "ellipse".into(),
                state: State::from_slices(
                    &zero_padded(&[1.0, 0.0], dim),
                    &zero_padded(&[0.0, 0.5], dim),
                ),
                // Ten orbits of the k-dependent period.
                config: resonant_config(1e-3, 10.0 * 2.0 * PI / k.sqrt()),
            }];
            b
        }
        "polar" => {
            let k = p.positive("k", 1.0)?;
            p.finish()?;
            let mut b = build_bundled(&SystemId::Polar {
                potential: PotentialSpec::Harmonic { k },
            })?;
            b.preset = "polar".into();
            b.summary = "harmonic well in plane polar coordinates".into();
            b.fixtures = vec![Fixture {
                name: "ellipse".into(),
                state: State::from_slices(&[1.0, 0.0], &[0.2, 1.0]),
                config: resonant_config(1e-3, 10.0 * 2.0 * PI / k.sqrt()),
            }];
            b
        }
        "sphere" => {
            let radius = p.positive("radius", 1.0)?;
            let amplitude = p.get("amplitude", 1.0);
            p.finish()?;
            let mut b = build_bundled(&SystemId::Sphere { radius, amplitude })?;
            b.preset = "sphere".into();
            b.summary = "spherical pendulum on the round sphere".into();
            b.fixtures = vec![
                Fixture::new("precession", &[PI / 3.0, 0.0], &[0.1, 1.2], 1e-3, 50.0),
                Fixture::new("south-cap", &[2.4, 0.0], &[0.2, 1.1646], 1e-3, 50.0),
            ];
            b
        }
        "gnomonic" => {
            let lambda = p.positive("lambda", 1.0)?;
            let amplitude = p.get("amplitude", 1.0);
            p.finish()?;
            let mut b = build_bundled(&SystemId::Gnomonic { lambda, amplitude })?;
            b.preset = "gnomonic".into();
            b.summary = "southern spherical cap in gnomonic projection coordinates".into();
            let radius = 1.0 / lambda.sqrt();
            let cap = sphere_to_gnomonic(radius, &State::from_slices(&[2.4, 0.0], &[0.2, 1.1646]))?;
            b.fixtures = vec![Fixture {
                name: "south-cap".into(),
                state: cap,
                config: IntegratorConfig::new(1e-3, 50.0),
            }];
            b
        }
        "kepler" => {
            let attraction = p.positive("attraction", 1.0)?;
            let mass = p.positive("mass", 1.0)?;
            p.finish()?;
            let mut b = build_bundled(&SystemId::Kepler { attraction, mass })?;
            b.preset = "kepler".into();
            b.summary = "planar attractive inverse-distance problem".into();
            let state = State::from_slices(&[1.0, 0.0], &[0.0, 1.1]);
            let config = match kepler_period(mass, attraction, energy(&b.spec, &state)) {
                // Ten orbits when the reference state is bound.
                Some(period) => resonant_config(1e-3, 10.0 * period),
                None => IntegratorConfig::new(1e-3, 100.0),
            };
            b.fixtures = vec![Fixture {
                name: "ellipse".into(),
                state,
                config,
            }];
            b
        }
        "toda" => {
            let n = p.get_count("n", 3)?.max(2);
            let mass = p.positive("mass", 1.0)?;
            let seed = p.get("seed", 8.0) as u64;
            p.finish()?;
            let mut b = build_bundled(&SystemId::Toda { n, mass })?;
            b.preset = "toda".into();
            b.summary = "periodic exponential chain".into();
            b.fixtures = vec![toda_thermal_fixture(n, seed)];
            b
        }
        "radial" => {
            let coeff = p.positive("coeff", 1.0)?;
            let exponent = p.get("exponent", 2.0);
            let k = p.positive("k", 1.0)?;
            p.finish()?;
            let mut b = build_bundled(&SystemId::Radial {
                coeff,
                exponent,
                potential: PotentialSpec::Harmonic { k },
            })?;
            b.preset = "radial".into();
            b.summary = "power-law radial kinetic profile in spherical coordinates".into();
            b.fixtures = vec![Fixture::new(
                "equatorial",
                &[1.0, PI / 2.0, 0.0],
                &[0.2, 0.0, 1.0],
                1e-3,
                50.0,
            )];
            b
        }
        "radial-flat" => {
            let k = p.positive("k", 1.0)?;
            p.finish()?;
            let mut b = build_bundled(&SystemId::Radial {
                coeff: 1.0,
                exponent: 0.0,
                potential: PotentialSpec::Harmonic { k },
            })?;
            b.preset = "radial-flat".into();
            b.summary = "flat space in spherical coordinates".into();
            b.fixtures = vec![Fixture::new(
                "equatorial",
                &[1.0, PI / 2.0, 0.0],
                &[0.2, 0.0, 1.0],
                1e-3,
                50.0,
            )];
            b
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown system '{}' (available: {})",
                other,
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let mut built = built;
    built.spec.name = built.preset.clone();
    Ok(built)
}

fn zero_padded(head: &[f64], dim: usize) -> Vec<f64> {
    (0..dim).map(|i| head.get(i).copied().unwrap_or(0.0)).collect()
}

fn toda_thermal_fixture(n: usize, seed: u64) -> Fixture {
    // Small random displacements and velocities with the means removed, so
    // the total momentum is zero and the chain stays near equilibrium.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let q_mean = q.iter().sum::<f64>() / n as f64;
    let v_mean = v.iter().sum::<f64>() / n as f64;
    q.iter_mut().for_each(|x| *x -= q_mean);
    v.iter_mut().for_each(|x| *x -= v_mean);
    Fixture::new("thermal", &q, &v, 1e-2, 1000.0)
}

/// Build the [`SystemSpec`] for a fully specified system.
pub fn build_system(id: &SystemId) -> Result<SystemSpec> {
    Ok(build_bundled(id)?.spec)
}

fn build_bundled(id: &SystemId) -> Result<BundledSystem> {
    let spec = match id {
        SystemId::Flat { dim, potential } => flat_spec(*dim, *potential)?,
        SystemId::Polar { potential } => polar_spec(*potential)?,
        SystemId::Sphere { radius, amplitude } => sphere_spec(*radius, *amplitude),
        SystemId::Gnomonic { lambda, amplitude } => gnomonic_spec(*lambda, *amplitude),
        SystemId::Kepler { attraction, mass } => kepler_spec(*attraction, *mass),
        SystemId::Toda { n, mass } => toda_spec(*n, *mass)?,
        SystemId::Radial {
            coeff,
            exponent,
            potential,
        } => radial_spec(*coeff, *exponent, *potential)?,
    };
    Ok(BundledSystem {
        preset: spec.name.clone(),
        summary: String::new(),
        spec,
        fixtures: Vec::new(),
    })
}

fn flat_potential(dim: usize, spec: PotentialSpec) -> Result<ScalarField> {
    match spec {
        PotentialSpec::Zero => Ok(ScalarField::constant(dim, 0.0)),
        PotentialSpec::Harmonic { k } => Ok(ScalarField::with_gradient(
            dim,
            move |q| 0.5 * k * q.coords.norm_squared(),
            move |q| k * &q.coords,
        )),
        other => Err(Error::invalid(format!(
            "potential {other:?} is not defined on a Cartesian chart"
        ))),
    }
}

/// Potential readable as a function of the leading radial coordinate.
fn radial_potential(dim: usize, spec: PotentialSpec) -> Result<ScalarField> {
    match spec {
        PotentialSpec::Zero => Ok(ScalarField::constant(dim, 0.0)),
        PotentialSpec::Harmonic { k } => Ok(ScalarField::with_gradient(
            dim,
            move |q| 0.5 * k * q.coord(0) * q.coord(0),
            move |q| {
                let mut g = DVector::zeros(dim);
                g[0] = k * q.coord(0);
                g
            },
        )),
        PotentialSpec::InverseR { k } => Ok(ScalarField::with_gradient(
            dim,
            move |q| -k / q.coord(0),
            move |q| {
                let mut g = DVector::zeros(dim);
                g[0] = k / (q.coord(0) * q.coord(0));
                g
            },
        )),
        other => Err(Error::invalid(format!(
            "potential {other:?} is not defined on a radial chart"
        ))),
    }
}

fn flat_spec(dim: usize, potential: PotentialSpec) -> Result<SystemSpec> {
    if dim == 0 {
        return Err(Error::invalid("flat systems need at least one dimension"));
    }
    let mut catalog = Vec::new();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        let name = match i {
            0 => "translation-x".to_string(),
            1 => "translation-y".to_string(),
            2 => "translation-z".to_string(),
            _ => format!("translation-{}", i + 1),
        };
        catalog.push(CatalogEntry {
            name,
            aliases: Vec::new(),
            field: VectorFieldDef::constant(&e),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        });
    }
    if dim == 2 {
        catalog.push(CatalogEntry {
            name: "rotation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                |q| DVector::from_row_slice(&[-q.coord(1), q.coord(0)]),
                |_| DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            ),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        });
    }
    catalog.push(CatalogEntry {
        name: "dilation".into(),
        aliases: Vec::new(),
        field: VectorFieldDef::with_jacobian(
            dim,
            |q| q.coords.clone(),
            move |_| DMatrix::identity(dim, dim),
        ),
        expected: ExpectedClass::Homothetic { factor: 2.0 },
        conformal_factor: Some(ScalarField::constant(dim, 2.0)),
        secondary_metric: None,
    });
    Ok(SystemSpec {
        name: "flat".into(),
        metric: MetricField::euclidean(dim),
        potential: flat_potential(dim, potential)?,
        guard: Arc::new(|_: &Point| true),
        catalog,
        sample_domain: vec![(-1.5, 1.5); dim],
    })
}

fn polar_translation(xy_angle: f64) -> VectorFieldDef {
    // Unit translation along the direction at angle `xy_angle` to the x-axis,
    // written in the polar chart.
    VectorFieldDef::with_jacobian(
        2,
        move |q| {
            let (r, ph) = (q.coord(0), q.coord(1));
            DVector::from_row_slice(&[(ph - xy_angle).cos(), -(ph - xy_angle).sin() / r])
        },
        move |q| {
            let (r, ph) = (q.coord(0), q.coord(1));
            let a = ph - xy_angle;
            DMatrix::from_row_slice(
                2,
                2,
                &[0.0, -a.sin(), a.sin() / (r * r), -a.cos() / r],
            )
        },
    )
}

fn polar_catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "rotation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::constant(&[0.0, 1.0]),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "translation-x".into(),
            aliases: vec!["translation".into()],
            field: polar_translation(0.0),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "translation-y".into(),
            aliases: Vec::new(),
            field: polar_translation(PI / 2.0),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "dilation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                |q| DVector::from_row_slice(&[q.coord(0), 0.0]),
                |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            ),
            expected: ExpectedClass::Homothetic { factor: 2.0 },
            conformal_factor: Some(ScalarField::constant(2, 2.0)),
            secondary_metric: None,
        },
    ]
}

fn polar_metric(mass: f64) -> MetricField {
    MetricField::with_deriv(
        2,
        move |q| {
            let r = q.coord(0);
            DMatrix::from_diagonal(&DVector::from_row_slice(&[mass, mass * r * r]))
        },
        move |q| {
            let mut d = Tensor3::zeros(2);
            d.set(1, 1, 0, 2.0 * mass * q.coord(0));
            d
        },
    )
}

fn polar_spec(potential: PotentialSpec) -> Result<SystemSpec> {
    Ok(SystemSpec {
        name: "polar".into(),
        metric: polar_metric(1.0),
        potential: radial_potential(2, potential)?,
        guard: Arc::new(|q: &Point| q.coord(0) > 1e-6),
        catalog: polar_catalog(),
        sample_domain: vec![(0.4, 2.5), (0.0, 2.0 * PI)],
    })
}

fn kepler_spec(attraction: f64, mass: f64) -> SystemSpec {
    SystemSpec {
        name: "kepler".into(),
        metric: polar_metric(mass),
        potential: radial_potential(2, PotentialSpec::InverseR { k: attraction })
            .expect("inverse-distance potential on a radial chart"),
        guard: Arc::new(|q: &Point| q.coord(0) > 1e-6),
        catalog: polar_catalog(),
        sample_domain: vec![(0.4, 3.0), (0.0, 2.0 * PI)],
    }
}

/// Orbital period of a bound state of the inverse-distance problem, from its
/// conserved energy. `None` for unbound (nonnegative) energies.
pub fn kepler_period(mass: f64, attraction: f64, energy: f64) -> Option<f64> {
    if energy >= 0.0 {
        return None;
    }
    let semi_major = -attraction / (2.0 * energy);
    Some(2.0 * PI * (mass * semi_major.powi(3) / attraction).sqrt())
}

fn sphere_spec(radius: f64, amplitude: f64) -> SystemSpec {
    let r2 = radius * radius;
    let metric = MetricField::with_deriv(
        2,
        move |q| {
            let s = q.coord(0).sin();
            DMatrix::from_diagonal(&DVector::from_row_slice(&[r2, r2 * s * s]))
        },
        move |q| {
            let th = q.coord(0);
            let mut d = Tensor3::zeros(2);
            d.set(1, 1, 0, 2.0 * r2 * th.sin() * th.cos());
            d
        },
    );
    let potential = ScalarField::with_gradient(
        2,
        move |q| amplitude * q.coord(0).cos(),
        move |q| DVector::from_row_slice(&[-amplitude * q.coord(0).sin(), 0.0]),
    );
    let catalog = vec![
        CatalogEntry {
            name: "x3".into(),
            aliases: vec!["rotation".into()],
            field: VectorFieldDef::constant(&[0.0, 1.0]),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "x1".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                |q| {
                    let (th, ph) = (q.coord(0), q.coord(1));
                    DVector::from_row_slice(&[ph.sin(), ph.cos() / th.tan()])
                },
                |q| {
                    let (th, ph) = (q.coord(0), q.coord(1));
                    let s = th.sin();
                    DMatrix::from_row_slice(
                        2,
                        2,
                        &[
                            0.0,
                            ph.cos(),
                            -ph.cos() / (s * s),
                            -ph.sin() / th.tan(),
                        ],
                    )
                },
            ),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "x2".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                |q| {
                    let (th, ph) = (q.coord(0), q.coord(1));
                    DVector::from_row_slice(&[-ph.cos(), ph.sin() / th.tan()])
                },
                |q| {
                    let (th, ph) = (q.coord(0), q.coord(1));
                    let s = th.sin();
                    DMatrix::from_row_slice(
                        2,
                        2,
                        &[0.0, ph.sin(), -ph.sin() / (s * s), ph.cos() / th.tan()],
                    )
                },
            ),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "conformal".into(),
            aliases: vec!["sin-theta".into()],
            field: VectorFieldDef::with_jacobian(
                2,
                |q| DVector::from_row_slice(&[q.coord(0).sin(), 0.0]),
                |q| DMatrix::from_row_slice(2, 2, &[q.coord(0).cos(), 0.0, 0.0, 0.0]),
            ),
            expected: ExpectedClass::ProperConformal,
            conformal_factor: Some(ScalarField::with_gradient(
                2,
                |q| 2.0 * q.coord(0).cos(),
                |q| DVector::from_row_slice(&[-2.0 * q.coord(0).sin(), 0.0]),
            )),
            secondary_metric: None,
        },
        CatalogEntry {
            name: "tangent-dilation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                |q| DVector::from_row_slice(&[q.coord(0).tan(), 0.0]),
                |q| {
                    let c = q.coord(0).cos();
                    DMatrix::from_row_slice(2, 2, &[1.0 / (c * c), 0.0, 0.0, 0.0])
                },
            ),
            expected: ExpectedClass::NonConformal,
            conformal_factor: None,
            secondary_metric: None,
        },
    ];
    SystemSpec {
        name: "sphere".into(),
        metric,
        potential,
        guard: Arc::new(|q: &Point| q.coord(0).sin() > 1e-6),
        catalog,
        sample_domain: vec![(0.35, 2.8), (0.0, 2.0 * PI)],
    }
}

fn gnomonic_spec(lambda: f64, amplitude: f64) -> SystemSpec {
    let metric = MetricField::with_deriv(
        2,
        move |q| {
            let r = q.coord(0);
            let w = 1.0 + lambda * r * r;
            DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0 / (w * w), r * r / w]))
        },
        move |q| {
            let r = q.coord(0);
            let w = 1.0 + lambda * r * r;
            let mut d = Tensor3::zeros(2);
            d.set(0, 0, 0, -4.0 * lambda * r / (w * w * w));
            d.set(1, 1, 0, 2.0 * r / (w * w));
            d
        },
    );
    // cos(theta) = -1/sqrt(1 + lambda r^2) on the southern cap.
    let potential = ScalarField::with_gradient(
        2,
        move |q| {
            let r = q.coord(0);
            -amplitude / (1.0 + lambda * r * r).sqrt()
        },
        move |q| {
            let r = q.coord(0);
            let w = 1.0 + lambda * r * r;
            DVector::from_row_slice(&[amplitude * lambda * r / w.powf(1.5), 0.0])
        },
    );
    let catalog = vec![
        CatalogEntry {
            name: "rotation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::constant(&[0.0, 1.0]),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            // Rescales the flat polar metric rather than the chart's own:
            // L_X g = f * diag(1, r^2) with f = 2/(1 + lambda r^2).
            name: "projected-dilation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                2,
                move |q| {
                    let r = q.coord(0);
                    DVector::from_row_slice(&[r * (1.0 + lambda * r * r), 0.0])
                },
                move |q| {
                    let r = q.coord(0);
                    DMatrix::from_row_slice(
                        2,
                        2,
                        &[1.0 + 3.0 * lambda * r * r, 0.0, 0.0, 0.0],
                    )
                },
            ),
            expected: ExpectedClass::NonConformal,
            conformal_factor: Some(ScalarField::with_gradient(
                2,
                move |q| {
                    let r = q.coord(0);
                    2.0 / (1.0 + lambda * r * r)
                },
                move |q| {
                    let r = q.coord(0);
                    let w = 1.0 + lambda * r * r;
                    DVector::from_row_slice(&[-4.0 * lambda * r / (w * w), 0.0])
                },
            )),
            secondary_metric: Some(polar_metric(1.0)),
        },
    ];
    SystemSpec {
        name: "gnomonic".into(),
        metric,
        potential,
        guard: Arc::new(|q: &Point| q.coord(0) > 1e-6),
        catalog,
        sample_domain: vec![(0.3, 2.0), (0.0, 2.0 * PI)],
    }
}

fn toda_spec(n: usize, mass: f64) -> Result<SystemSpec> {
    if n < 2 {
        return Err(Error::invalid("the exponential chain needs at least two sites"));
    }
    let potential = ScalarField::with_gradient(
        n,
        move |q| {
            (0..n)
                .map(|i| (q.coord(i) - q.coord((i + 1) % n)).exp())
                .sum()
        },
        move |q| {
            DVector::from_fn(n, |j, _| {
                let fwd = (q.coord(j) - q.coord((j + 1) % n)).exp();
                let back = (q.coord((j + n - 1) % n) - q.coord(j)).exp();
                fwd - back
            })
        },
    );
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let catalog = vec![
        CatalogEntry {
            name: "uniform-translation".into(),
            aliases: vec!["momentum".into()],
            field: VectorFieldDef::constant(&vec![1.0; n]),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "translation-1".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::constant(&e1),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
        CatalogEntry {
            name: "dilation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::with_jacobian(
                n,
                |q| q.coords.clone(),
                move |_| DMatrix::identity(n, n),
            ),
            expected: ExpectedClass::Homothetic { factor: 2.0 },
            conformal_factor: Some(ScalarField::constant(n, 2.0)),
            secondary_metric: None,
        },
    ];
    Ok(SystemSpec {
        name: "toda".into(),
        metric: MetricField::constant(DMatrix::identity(n, n) * mass),
        potential,
        guard: Arc::new(|_: &Point| true),
        catalog,
        sample_domain: vec![(-1.0, 1.0); n],
    })
}

fn radial_spec(coeff: f64, exponent: f64, potential: PotentialSpec) -> Result<SystemSpec> {
    if coeff <= 0.0 {
        return Err(Error::invalid("radial profile coefficient must be positive"));
    }
    let (c, p) = (coeff, exponent);
    let metric = MetricField::with_deriv(
        3,
        move |q| {
            let (r, th) = (q.coord(0), q.coord(1));
            let s = th.sin();
            DMatrix::from_diagonal(&DVector::from_row_slice(&[
                c * r.powf(p),
                r * r,
                r * r * s * s,
            ]))
        },
        move |q| {
            let (r, th) = (q.coord(0), q.coord(1));
            let s = th.sin();
            let mut d = Tensor3::zeros(3);
            d.set(0, 0, 0, c * p * r.powf(p - 1.0));
            d.set(1, 1, 0, 2.0 * r);
            d.set(2, 2, 0, 2.0 * r * s * s);
            d.set(2, 2, 1, 2.0 * r * r * s * th.cos());
            d
        },
    );
    // X = r^(1 - p/2)/sqrt(c) d/dr satisfies L_X g = f g with
    // f = (2/sqrt(c)) r^(-p/2); constant exactly when p = 0.
    let half_p = 0.5 * p;
    let root_c = c.sqrt();
    let conformal_radial = CatalogEntry {
        name: "conformal-radial".into(),
        aliases: Vec::new(),
        field: VectorFieldDef::with_jacobian(
            3,
            move |q| {
                let mut x = DVector::zeros(3);
                x[0] = q.coord(0).powf(1.0 - half_p) / root_c;
                x
            },
            move |q| {
                let mut j = DMatrix::zeros(3, 3);
                j[(0, 0)] = (1.0 - half_p) * q.coord(0).powf(-half_p) / root_c;
                j
            },
        ),
        expected: if p == 0.0 {
            ExpectedClass::Homothetic {
                factor: 2.0 / root_c,
            }
        } else {
            ExpectedClass::ProperConformal
        },
        conformal_factor: Some(ScalarField::with_gradient(
            3,
            move |q| 2.0 * q.coord(0).powf(-half_p) / root_c,
            move |q| {
                let mut g = DVector::zeros(3);
                g[0] = -2.0 * half_p * q.coord(0).powf(-half_p - 1.0) / root_c;
                g
            },
        )),
        secondary_metric: None,
    };
    let catalog = vec![
        conformal_radial,
        CatalogEntry {
            name: "rotation".into(),
            aliases: Vec::new(),
            field: VectorFieldDef::constant(&[0.0, 0.0, 1.0]),
            expected: ExpectedClass::Killing,
            conformal_factor: None,
            secondary_metric: None,
        },
    ];
    Ok(SystemSpec {
        name: "radial".into(),
        metric,
        potential: radial_potential(3, potential)?,
        guard: Arc::new(|q: &Point| q.coord(0) > 1e-6 && q.coord(1).sin() > 1e-6),
        catalog,
        sample_domain: vec![(0.4, 2.0), (0.5, 2.6), (0.0, 2.0 * PI)],
    })
}

/// Map a state on the sphere of the given radius (southern hemisphere,
/// `theta > pi/2`) to the gnomonic chart with `lambda = 1/radius^2`.
pub fn sphere_to_gnomonic(radius: f64, state: &State) -> Result<State> {
    let (th, ph) = (state.q.coord(0), state.q.coord(1));
    if !(th > PI / 2.0 && th < PI) {
        return Err(Error::invalid(format!(
            "gnomonic chart covers theta in (pi/2, pi), got {th}"
        )));
    }
    let r = -radius * th.tan();
    // dr/dtheta = -radius (1 + tan^2 theta) = -(radius^2 + r^2)/radius
    let dr_dth = -(radius * radius + r * r) / radius;
    Ok(State::from_slices(
        &[r, ph],
        &[dr_dth * state.v[0], state.v[1]],
    ))
}

/// Inverse of [`sphere_to_gnomonic`].
pub fn gnomonic_to_sphere(radius: f64, state: &State) -> State {
    let (r, ph) = (state.q.coord(0), state.q.coord(1));
    let th = PI - (r / radius).atan();
    let dth_dr = -radius / (radius * radius + r * r);
    State::from_slices(&[th, ph], &[dth_dr * state.v[0], state.v[1]])
}

/// The canonical relation for a catalog entry, chosen from its expected
/// classification: Killing fields get the potential-only balance, conformal
/// families get the factor-weighted one, two-metric entries get the
/// secondary-metric balance, and everything else falls back to the general
/// relation (which is exact for any field).
pub fn catalog_relation(sys: &SystemSpec, entry: &CatalogEntry) -> VirialRelation {
    let field = entry.field.clone();
    let kind = match entry.expected {
        ExpectedClass::Killing => RelationKind::Killing { field },
        ExpectedClass::Homothetic { factor } => RelationKind::Conformal {
            field,
            factor: entry
                .conformal_factor
                .clone()
                .unwrap_or_else(|| ScalarField::constant(sys.dim(), factor)),
        },
        ExpectedClass::ProperConformal => match entry.conformal_factor.clone() {
            Some(factor) => RelationKind::Conformal { field, factor },
            None => RelationKind::General { field },
        },
        ExpectedClass::NonConformal => {
            match (entry.conformal_factor.clone(), entry.secondary_metric.clone()) {
                (Some(factor), Some(reference_metric)) => RelationKind::TwoMetric {
                    field,
                    factor,
                    reference_metric,
                },
                _ => RelationKind::General { field },
            }
        }
    };
    VirialRelation::new(entry.name.clone(), kind)
}

/// Resolve a relation name against a system's catalog.
///
/// A bare catalog name (or alias) picks the canonical relation for the entry.
/// A `-killing`, `-general`, `-conformal`, or `-two-metric` suffix on a
/// catalog name forces that balance for the named field.
pub fn resolve_relation(sys: &SystemSpec, name: &str) -> Result<VirialRelation> {
    if let Ok(entry) = sys.field(name) {
        return Ok(catalog_relation(sys, entry));
    }
    for (suffix, wants) in [
        ("-killing", "killing"),
        ("-general", "general"),
        ("-conformal", "conformal"),
        ("-two-metric", "two-metric"),
    ] {
        let Some(base) = name.strip_suffix(suffix) else {
            continue;
        };
        let Ok(entry) = sys.field(base) else { continue };
        let field = entry.field.clone();
        let kind = match wants {
            "killing" => RelationKind::Killing { field },
            "general" => RelationKind::General { field },
            "conformal" => {
                let factor = entry.conformal_factor.clone().or(match entry.expected {
                    ExpectedClass::Homothetic { factor } => {
                        Some(ScalarField::constant(sys.dim(), factor))
                    }
                    _ => None,
                });
                match factor {
                    Some(factor) => RelationKind::Conformal { field, factor },
                    None => {
                        return Err(Error::invalid(format!(
                            "field '{base}' carries no conformal factor; use '{base}-general'"
                        )))
                    }
                }
            }
            _ => {
                let (Some(factor), Some(reference_metric)) = (
                    entry.conformal_factor.clone(),
                    entry.secondary_metric.clone(),
                ) else {
                    return Err(Error::invalid(format!(
                        "field '{base}' carries no secondary metric; use '{base}-general'"
                    )));
                };
                RelationKind::TwoMetric {
                    field,
                    factor,
                    reference_metric,
                }
            }
        };
        return Ok(VirialRelation::new(name.to_string(), kind));
    }
    Err(Error::RelationFieldMissing {
        name: name.to_string(),
    })
}
