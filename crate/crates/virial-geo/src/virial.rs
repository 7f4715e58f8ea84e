//! Time-averaged virial balances along recorded trajectories.
//!
//! Every relation is an exact statement of the form `<A> -> 0` as the
//! averaging window grows, where `A` is a scalar observable along the flow
//! equal to the total derivative of the affine observable
//! `G = g_ij X^i v^j`:
//!
//! * general field:    `A = (1/2)(L_X g)(v, v) - X(V)`
//! * Killing field:    `A = -X(V)`            (the kinetic term vanishes)
//! * conformal field:  `A = f T_g - X(V)`     (with `L_X g = f g`)
//! * two metrics:      `A = f T_g' - X(V)`    (with `L_X g = f g'`)
//!
//! Because `A = dG/dt` holds pointwise, the finite-window average obeys
//! `<A>_[0,T] = (G(T) - G(0)) / T` up to quadrature error; the difference is
//! reported as `balance_check` and must shrink like the square of the sample
//! spacing. Boundedness of `G` is what drives the residual to zero at the
//! rate `2 max|G| / T`, so `g_max` is reported alongside.
//!
//! The homogeneous partition is the classical special case: for
//! `L_X g = mu g` and `L_X V = nu V`, averages satisfy
//! `<T_g> = nu E / (nu + mu)` and `<V> = mu E / (nu + mu)`.

use std::sync::Arc;

use crate::dynamics::{State, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{
    kinetic_energy_matrix, lie_derivative_metric, MetricField, ScalarField, VectorFieldDef,
};

/// Floor of the convergence threshold for the two-window comparison.
pub const CONVERGENCE_TOL_FLOOR: f64 = 1e-6;

/// Relative part of the convergence threshold, scaled by `max|A|`.
pub const CONVERGENCE_TOL_SCALE: f64 = 1e-3;

/// Named scalar function of the state, evaluated along trajectories.
#[derive(Clone)]
pub struct Observable {
    name: String,
    eval_fn: Arc<dyn Fn(&State) -> f64 + Send + Sync>,
}

impl Observable {
    pub fn new(name: impl Into<String>, eval: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            name: name.into(),
            eval_fn: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, state: &State) -> f64 {
        (self.eval_fn)(state)
    }

    /// Kinetic energy `T_g` of the system's metric.
    pub fn kinetic(sys: &SystemSpec) -> Observable {
        let metric = sys.metric.clone();
        Observable::new("kinetic-energy", move |s: &State| {
            kinetic_energy_matrix(&metric.eval(&s.q), &s.v)
        })
    }

    /// Potential energy `V`.
    pub fn potential(sys: &SystemSpec) -> Observable {
        let potential = sys.potential.clone();
        Observable::new("potential-energy", move |s: &State| potential.eval(&s.q))
    }

    /// Affine observable `G = g_ij X^i v^j` of a field.
    pub fn affine(sys: &SystemSpec, field: &VectorFieldDef, name: impl Into<String>) -> Observable {
        let metric = sys.metric.clone();
        let field = field.clone();
        Observable::new(name, move |s: &State| {
            (metric.eval(&s.q) * field.eval(&s.q)).dot(&s.v)
        })
    }
}

/// Affine observable `G = g_ij X^i v^j` at a single state.
pub fn affine_virial(sys: &SystemSpec, field: &VectorFieldDef, state: &State) -> f64 {
    (sys.metric.eval(&state.q) * field.eval(&state.q)).dot(&state.v)
}

/// Compensated accumulator; keeps long trapezoid sums at roundoff accuracy.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Trapezoid time average over the full window and the first half window.
#[derive(Debug, Clone, Copy)]
pub struct RunningAverage {
    /// Average over `[t_0, t_end]`.
    pub value_full: f64,
    /// Average over `[t_0, t_0 + span/2]` (nearest sample at or below).
    pub value_half: f64,
    /// Full window length.
    pub span: f64,
    /// Largest `|A|` seen over the window.
    pub max_abs: f64,
    /// Quadrature rule behind the averages.
    pub quadrature: &'static str,
}

impl RunningAverage {
    /// Two-window convergence check:
    /// `|value_full - value_half| <= max(1e-6, 1e-3 max|A|)`.
    pub fn converged(&self) -> bool {
        (self.value_full - self.value_half).abs() <= self.convergence_tol()
    }

    pub fn convergence_tol(&self) -> f64 {
        CONVERGENCE_TOL_FLOOR.max(CONVERGENCE_TOL_SCALE * self.max_abs)
    }
}

/// Trapezoid average of an observable over a recorded trajectory. Rejected
/// trajectories are refused.
pub fn time_average(traj: &Trajectory, observable: &Observable) -> Result<RunningAverage> {
    if traj.is_rejected() {
        return Err(Error::RejectedTrajectory {
            drift: traj.meta.max_drift,
            limit: traj.meta.energy_drift_limit,
        });
    }
    let m = traj.len();
    if m < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: m });
    }
    let span = traj.span();
    let half_target = traj.time(0) + 0.5 * span;
    let mut integral = KahanSum::default();
    let mut max_abs = 0.0f64;
    let mut prev = observable.eval(&traj.state(0));
    max_abs = max_abs.max(prev.abs());
    let mut half_integral = 0.0;
    let mut half_span = 0.0;
    for i in 1..m {
        let value = observable.eval(&traj.state(i));
        max_abs = max_abs.max(value.abs());
        let dt = traj.time(i) - traj.time(i - 1);
        integral.add(0.5 * (prev + value) * dt);
        if traj.time(i) <= half_target {
            half_integral = integral.value();
            half_span = traj.time(i) - traj.time(0);
        }
        prev = value;
    }
    Ok(RunningAverage {
        value_full: integral.value() / span,
        value_half: half_integral / half_span,
        span,
        max_abs,
        quadrature: "trapezoid",
    })
}

/// The virial balance attached to a field (or to a homogeneity degree pair).
#[derive(Clone)]
pub enum RelationKind {
    /// `<(1/2)(L_X g)(v, v) - X(V)>` for an arbitrary field.
    General { field: VectorFieldDef },
    /// `<-X(V)>` for a Killing field.
    Killing { field: VectorFieldDef },
    /// `<f T_g - X(V)>` for `L_X g = f g`.
    Conformal {
        field: VectorFieldDef,
        factor: ScalarField,
    },
    /// `<f T_g' - X(V)>` for `L_X g = f g'` with a second metric.
    TwoMetric {
        field: VectorFieldDef,
        factor: ScalarField,
        reference_metric: MetricField,
    },
    /// `<mu T_g - nu V>` plus the energy partition it implies.
    HomogeneousPartition { mu: f64, nu: f64 },
}

impl RelationKind {
    pub fn label(&self) -> &'static str {
        match self {
            RelationKind::General { .. } => "general",
            RelationKind::Killing { .. } => "killing",
            RelationKind::Conformal { .. } => "conformal",
            RelationKind::TwoMetric { .. } => "two-metric",
            RelationKind::HomogeneousPartition { .. } => "homogeneous-partition",
        }
    }

    pub fn field(&self) -> Option<&VectorFieldDef> {
        match self {
            RelationKind::General { field }
            | RelationKind::Killing { field }
            | RelationKind::Conformal { field, .. }
            | RelationKind::TwoMetric { field, .. } => Some(field),
            RelationKind::HomogeneousPartition { .. } => None,
        }
    }
}

#[derive(Clone)]
pub struct VirialRelation {
    pub label: String,
    pub kind: RelationKind,
}

impl VirialRelation {
    pub fn new(label: impl Into<String>, kind: RelationKind) -> Self {
        VirialRelation {
            label: label.into(),
            kind,
        }
    }

    /// The integrand `A` whose time average the relation drives to zero.
    /// In every case `A = dG/dt` along the flow for `G = g(X, v)`.
    pub fn integrand(&self, sys: &SystemSpec) -> Observable {
        let name = format!("A_{}", self.label);
        let potential = sys.potential.clone();
        match &self.kind {
            RelationKind::General { field } => {
                let metric = sys.metric.clone();
                let field = field.clone();
                Observable::new(name, move |s: &State| {
                    let lie = lie_derivative_metric(&field, &metric, &s.q);
                    let kinetic_rate = 0.5 * (lie * &s.v).dot(&s.v);
                    kinetic_rate - field.eval(&s.q).dot(&potential.gradient(&s.q))
                })
            }
            RelationKind::Killing { field } => {
                let field = field.clone();
                Observable::new(name, move |s: &State| {
                    -field.eval(&s.q).dot(&potential.gradient(&s.q))
                })
            }
            RelationKind::Conformal { field, factor } => {
                let metric = sys.metric.clone();
                let field = field.clone();
                let factor = factor.clone();
                Observable::new(name, move |s: &State| {
                    let t = kinetic_energy_matrix(&metric.eval(&s.q), &s.v);
                    factor.eval(&s.q) * t - field.eval(&s.q).dot(&potential.gradient(&s.q))
                })
            }
            RelationKind::TwoMetric {
                field,
                factor,
                reference_metric,
            } => {
                let field = field.clone();
                let factor = factor.clone();
                let reference = reference_metric.clone();
                Observable::new(name, move |s: &State| {
                    let t_ref = kinetic_energy_matrix(&reference.eval(&s.q), &s.v);
                    factor.eval(&s.q) * t_ref - field.eval(&s.q).dot(&potential.gradient(&s.q))
                })
            }
            RelationKind::HomogeneousPartition { mu, nu } => {
                let metric = sys.metric.clone();
                let (mu, nu) = (*mu, *nu);
                Observable::new(name, move |s: &State| {
                    mu * kinetic_energy_matrix(&metric.eval(&s.q), &s.v) - nu * potential.eval(&s.q)
                })
            }
        }
    }
}

/// Energy split predicted by the homogeneous virial balance.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PartitionReport {
    pub avg_kinetic: f64,
    pub avg_potential: f64,
    pub predicted_kinetic: f64,
    pub predicted_potential: f64,
    pub energy: f64,
}

/// Averaged kinetic/potential energies against the partition predicted from
/// the homogeneity degrees: `<T_g> = nu E / (nu + mu)`,
/// `<V> = mu E / (nu + mu)`.
pub fn homogeneous_partition(
    sys: &SystemSpec,
    traj: &Trajectory,
    mu: f64,
    nu: f64,
) -> Result<PartitionReport> {
    let sum = nu + mu;
    if sum.abs() < 1e-12 {
        return Err(Error::DegenerateDegrees { sum });
    }
    let avg_kinetic = time_average(traj, &Observable::kinetic(sys))?.value_full;
    let avg_potential = time_average(traj, &Observable::potential(sys))?.value_full;
    let energy = traj.energy(0);
    Ok(PartitionReport {
        avg_kinetic,
        avg_potential,
        predicted_kinetic: nu * energy / sum,
        predicted_potential: mu * energy / sum,
        energy,
    })
}

/// Full evaluation of one relation over one trajectory.
#[derive(Debug, Clone)]
pub struct VirialReport {
    pub relation: String,
    pub kind: &'static str,
    /// Time average of the integrand over the full window.
    pub residual: f64,
    /// Average over the first half window.
    pub value_half: f64,
    /// `residual - (G(T) - G(0)) / T`; `None` when the relation carries no
    /// field (homogeneous partition).
    pub balance_check: Option<f64>,
    /// Largest `|G|` over the window, `None` without a field.
    pub g_max: Option<f64>,
    pub converged: bool,
    /// Convergence threshold that `converged` was decided against.
    pub tolerance: f64,
    /// Present for homogeneous-partition relations.
    pub partition: Option<PartitionReport>,
}

/// Evaluate a virial relation over a trajectory: average the integrand,
/// compare against the boundary term `(G(T) - G(0))/T`, and flag convergence
/// by the two-window test.
pub fn virial_residual(
    sys: &SystemSpec,
    traj: &Trajectory,
    relation: &VirialRelation,
) -> Result<VirialReport> {
    let averages = time_average(traj, &relation.integrand(sys))?;
    let (balance_check, g_max) = match relation.kind.field() {
        Some(field) => {
            let g_obs = Observable::affine(sys, field, format!("G_{}", relation.label));
            let mut g_extreme = 0.0f64;
            for i in 0..traj.len() {
                g_extreme = g_extreme.max(g_obs.eval(&traj.state(i)).abs());
            }
            let g_first = g_obs.eval(&traj.first_state());
            let g_last = g_obs.eval(&traj.last_state());
            let boundary = (g_last - g_first) / averages.span;
            (Some(averages.value_full - boundary), Some(g_extreme))
        }
        None => (None, None),
    };
    let partition = match relation.kind {
        RelationKind::HomogeneousPartition { mu, nu } => {
            Some(homogeneous_partition(sys, traj, mu, nu)?)
        }
        _ => None,
    };
    Ok(VirialReport {
        relation: relation.label.clone(),
        kind: relation.kind.label(),
        residual: averages.value_full,
        value_half: averages.value_half,
        balance_check,
        g_max,
        converged: averages.converged(),
        tolerance: averages.convergence_tol(),
        partition,
    })
}
