//! Dynamics of mechanical systems `L = T_g - V` on a chart.
//!
//! The equations of motion are the geodesic equations driven by the potential
//! gradient,
//!
//! ```text
//! dq^i/dt = v^i
//! dv^i/dt = -Gamma^i_jk(q) v^j v^k - g^ij(q) dV/dq^j
//! ```
//!
//! integrated with fixed-step classical Runge-Kutta (RK4). Total energy
//! `E = T_g + V` is recorded at every kept sample; a relative drift above the
//! configured limit marks the whole trajectory as rejected, and any RK4 stage
//! that leaves the system's domain guard aborts the run at the stage time.
//!
//! Tangent-bundle lifts live here too: the complete lift
//! `X^c = (X^i, dX^i/dq^j v^j)`, the Liouville field `(0, v)`, and the
//! Hamiltonian-type vector field of the affine observable
//! `G = g_ij X^i v^j`. For a Killing field the last two coincide:
//! `X_G = X^c`; for a conformal field `X_G = X^c - f (0, v)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{
    christoffel, classify_vector_field, default_classify_tol, kinetic_energy, metric_inverse,
    ConformalClassification, ConformalKind, GuardFn, MetricField, Point, ScalarField,
    VectorFieldDef,
};

/// Expected classification of a catalog field, used to pick the canonical
/// virial relation and checked against the actual classifier output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpectedClass {
    Killing,
    Homothetic { factor: f64 },
    ProperConformal,
    NonConformal,
}

impl ExpectedClass {
    pub fn matches(&self, kind: &ConformalKind, tol: f64) -> bool {
        match (self, kind) {
            (ExpectedClass::Killing, ConformalKind::Killing) => true,
            (ExpectedClass::Homothetic { factor }, ConformalKind::Homothetic { factor: f }) => {
                (factor - f).abs() <= tol.max(1e-10 * factor.abs())
            }
            (ExpectedClass::ProperConformal, ConformalKind::ProperConformal { .. }) => true,
            (ExpectedClass::NonConformal, ConformalKind::NonConformal) => true,
            _ => false,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ExpectedClass::Killing => "killing",
            ExpectedClass::Homothetic { .. } => "homothetic",
            ExpectedClass::ProperConformal => "proper-conformal",
            ExpectedClass::NonConformal => "non-conformal",
        }
    }
}

/// A named vector field bundled with a system, together with what its
/// classification is expected to be and, where relevant, the conformal
/// factor and the secondary metric it rescales.
#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub aliases: Vec<String>,
    pub field: VectorFieldDef,
    pub expected: ExpectedClass,
    /// Conformal factor `f` with `L_X g = f g` (or `f g'` for two-metric
    /// entries). Present for homothetic, proper-conformal, and two-metric
    /// entries.
    pub conformal_factor: Option<ScalarField>,
    /// Secondary metric `g'` for entries satisfying `L_X g = f g'` with a
    /// metric other than the system's own.
    pub secondary_metric: Option<MetricField>,
}

impl CatalogEntry {
    pub fn answers_to(&self, name: &str) -> bool {
        self.name == name || self.aliases.iter().any(|a| a == name)
    }
}

/// A mechanical system on one chart: metric, potential, domain guard, a
/// catalog of named symmetry fields, and a box in coordinates from which
/// guarded sample points can be drawn.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub metric: MetricField,
    pub potential: ScalarField,
    pub guard: Arc<GuardFn>,
    pub catalog: Vec<CatalogEntry>,
    /// Per-coordinate sampling ranges covering a guarded region of the chart.
    pub sample_domain: Vec<(f64, f64)>,
}

impl SystemSpec {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn guard_ok(&self, q: &Point) -> bool {
        q.is_finite() && (self.guard)(q)
    }

    /// Look up a catalog entry by name or alias.
    pub fn field(&self, name: &str) -> Result<&CatalogEntry> {
        self.catalog
            .iter()
            .find(|e| e.answers_to(name))
            .ok_or_else(|| Error::RelationFieldMissing {
                name: name.to_string(),
            })
    }

    /// Classify a catalog field at freshly drawn sample points.
    pub fn classify_entry(
        &self,
        entry: &CatalogEntry,
        samples: &[Point],
        tol: Option<f64>,
    ) -> Result<ConformalClassification> {
        let tol = tol.unwrap_or_else(|| default_classify_tol(&self.metric, &entry.field));
        classify_vector_field(&entry.field, &self.metric, samples, tol, Some(self.guard.as_ref()))
    }

    /// Draw `count` points from the sample domain, rejecting guard failures.
    pub fn random_guarded_points(&self, rng: &mut impl Rng, count: usize) -> Result<Vec<Point>> {
        let mut points = Vec::with_capacity(count);
        let mut attempts = 0usize;
        let budget = count.saturating_mul(100).max(1000);
        while points.len() < count {
            if attempts >= budget {
                return Err(Error::InsufficientSamples {
                    needed: count,
                    got: points.len(),
                });
            }
            attempts += 1;
            let coords: Vec<f64> = self
                .sample_domain
                .iter()
                .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                .collect();
            let p = Point::new(&coords);
            if self.guard_ok(&p) {
                points.push(p);
            }
        }
        Ok(points)
    }

    /// Draw full states: guarded positions with velocity components uniform
    /// in `[-vmax, vmax]`.
    pub fn random_states(&self, rng: &mut impl Rng, count: usize, vmax: f64) -> Result<Vec<State>> {
        let points = self.random_guarded_points(rng, count)?;
        Ok(points
            .into_iter()
            .map(|q| {
                let v: Vec<f64> = (0..self.dim()).map(|_| rng.gen_range(-vmax..vmax)).collect();
                State::new(q, DVector::from_row_slice(&v))
            })
            .collect())
    }
}

/// Instantaneous state `(q, v)` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Point,
    pub v: DVector<f64>,
}

impl State {
    pub fn new(q: Point, v: DVector<f64>) -> Self {
        assert_eq!(q.dim(), v.len(), "state position and velocity dimensions differ");
        State { q, v }
    }

    pub fn from_slices(q: &[f64], v: &[f64]) -> Self {
        State::new(Point::new(q), DVector::from_row_slice(v))
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.v.iter().all(|c| c.is_finite())
    }

    /// Same position, reversed velocity.
    pub fn reversed(&self) -> State {
        State {
            q: self.q.clone(),
            v: -&self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrationMethod {
    Rk4,
}

impl IntegrationMethod {
    pub fn label(&self) -> &'static str {
        match self {
            IntegrationMethod::Rk4 => "rk4",
        }
    }
}

pub const DEFAULT_ENERGY_DRIFT_LIMIT: f64 = 1e-6;
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: IntegrationMethod,
    pub dt: f64,
    pub t_end: f64,
    /// Relative energy drift beyond which the trajectory is marked rejected.
    pub energy_drift_limit: f64,
    /// Keep every k-th step (plus the initial state). Drift and guard checks
    /// still run at every step; only storage is thinned. The step count must
    /// be divisible by this.
    pub record_every: u64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: IntegrationMethod::Rk4,
            dt: 1e-3,
            t_end: 10.0,
            energy_drift_limit: DEFAULT_ENERGY_DRIFT_LIMIT,
            record_every: 1,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        IntegratorConfig {
            dt,
            t_end,
            ..IntegratorConfig::default()
        }
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.steps() == 0 {
            return Err(Error::invalid("t_end shorter than half a step"));
        }
        if self.energy_drift_limit <= 0.0 {
            return Err(Error::invalid("energy_drift_limit must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        if self.steps() % self.record_every != 0 {
            return Err(Error::invalid(format!(
                "step count {} is not divisible by record_every {}",
                self.steps(),
                self.record_every
            )));
        }
        if self.steps() > self.max_steps {
            return Err(Error::StepLimitExceeded {
                requested: self.steps(),
                limit: self.max_steps,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub method: IntegrationMethod,
    pub dt: f64,
    pub record_every: u64,
    pub energy_drift_limit: f64,
    /// Largest relative energy deviation seen at any integration step.
    pub max_drift: f64,
    /// True when `max_drift` exceeded the limit.
    pub rejected: bool,
}

/// Recorded trajectory on a uniform time grid. Positions and velocities are
/// stored flat (`sample * dim + coordinate`) so long runs stay compact.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    qs: Vec<f64>,
    vs: Vec<f64>,
    energies: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Assemble a trajectory from raw samples. Times must be strictly
    /// increasing and all series must have equal length of at least two.
    pub fn from_samples(
        dim: usize,
        times: Vec<f64>,
        qs: Vec<f64>,
        vs: Vec<f64>,
        energies: Vec<f64>,
        meta: TrajectoryMeta,
    ) -> Result<Self> {
        let m = times.len();
        if m < 2 {
            return Err(Error::invalid("trajectory needs at least two samples"));
        }
        if qs.len() != m * dim || vs.len() != m * dim || energies.len() != m {
            return Err(Error::invalid("trajectory series lengths disagree"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("trajectory times must strictly increase"));
        }
        Ok(Trajectory {
            dim,
            times,
            qs,
            vs,
            energies,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.energies[i]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn state(&self, i: usize) -> State {
        let (a, b) = (i * self.dim, (i + 1) * self.dim);
        State::from_slices(&self.qs[a..b], &self.vs[a..b])
    }

    pub fn first_state(&self) -> State {
        self.state(0)
    }

    pub fn last_state(&self) -> State {
        self.state(self.len() - 1)
    }

    /// Time covered, `t_last - t_first`.
    pub fn span(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }

    pub fn is_rejected(&self) -> bool {
        self.meta.rejected
    }
}

/// Where and why a partial integration stopped.
#[derive(Debug, Clone, Copy)]
pub struct AbortInfo {
    /// Stage time of the first domain-guard violation.
    pub time: f64,
}

/// A trajectory that may have been cut short by the domain guard.
pub struct IntegrationOutcome {
    pub trajectory: Trajectory,
    pub abort: Option<AbortInfo>,
}

/// Acceleration of the Lagrangian flow,
/// `a^i = -Gamma^i_jk v^j v^k - g^ij dV/dq^j`.
pub fn acceleration(sys: &SystemSpec, state: &State) -> Result<DVector<f64>> {
    let n = sys.dim();
    let gamma = christoffel(&sys.metric, &state.q)?;
    let ginv = metric_inverse(&sys.metric.eval(&state.q))?;
    let grad = sys.potential.gradient(&state.q);
    let v = &state.v;
    let mut a = DVector::zeros(n);
    for i in 0..n {
        let mut geo = 0.0;
        for j in 0..n {
            for k in 0..n {
                geo += gamma.get(i, j, k) * v[j] * v[k];
            }
        }
        let mut force = 0.0;
        for j in 0..n {
            force += ginv[(i, j)] * grad[j];
        }
        a[i] = -geo - force;
    }
    Ok(a)
}

/// Total energy `E = T_g + V`.
pub fn energy(sys: &SystemSpec, state: &State) -> f64 {
    kinetic_energy(&sys.metric, &state.q, &state.v) + sys.potential.eval(&state.q)
}

fn guard_stage(sys: &SystemSpec, q: &Point, t: f64) -> std::result::Result<(), AbortInfo> {
    if q.is_finite() && (sys.guard)(q) {
        Ok(())
    } else {
        Err(AbortInfo { time: t })
    }
}

/// Integrate and return the full trajectory; a domain-guard violation at any
/// stage is an error carrying the stage time.
pub fn integrate(sys: &SystemSpec, initial: &State, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let outcome = integrate_partial(sys, initial, cfg)?;
    match outcome.abort {
        None => Ok(outcome.trajectory),
        Some(info) => Err(Error::GuardViolation {
            time: Some(info.time),
        }),
    }
}

/// Integrate, returning whatever prefix was recorded if the domain guard cut
/// the run short. Errors are reserved for invalid configurations, bad initial
/// states, and singular metrics.
pub fn integrate_partial(
    sys: &SystemSpec,
    initial: &State,
    cfg: &IntegratorConfig,
) -> Result<IntegrationOutcome> {
    cfg.validate()?;
    let n = sys.dim();
    assert_eq!(initial.dim(), n, "initial state dimension mismatch");
    if !initial.is_finite() {
        return Err(Error::invalid("initial state has non-finite entries"));
    }
    if !sys.guard_ok(&initial.q) {
        return Err(Error::GuardViolation { time: Some(0.0) });
    }

    let steps = cfg.steps();
    let dt = cfg.dt;
    let recorded = (steps / cfg.record_every) as usize + 1;
    let mut times = Vec::with_capacity(recorded);
    let mut qs = Vec::with_capacity(recorded * n);
    let mut vs = Vec::with_capacity(recorded * n);
    let mut energies = Vec::with_capacity(recorded);

    let e0 = energy(sys, initial);
    let drift_scale = e0.abs().max(1.0);
    let mut max_drift = 0.0f64;

    let mut q = initial.q.coords.clone();
    let mut v = initial.v.clone();

    let mut record = |t: f64, q: &DVector<f64>, v: &DVector<f64>, e: f64| {
        times.push(t);
        qs.extend_from_slice(q.as_slice());
        vs.extend_from_slice(v.as_slice());
        energies.push(e);
    };
    record(0.0, &q, &v, e0);

    let mut abort = None;
    let eval = |q: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
        let state = State {
            q: Point::from_vector(q.clone()),
            v: v.clone(),
        };
        acceleration(sys, &state)
    };

    'run: for step in 0..steps {
        let t = step as f64 * dt;
        // Classical RK4 on the first-order system (dq, dv) = (v, a).
        let stages: [(f64, f64); 3] = [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)];
        let a1 = eval(&q, &v)?;
        let mut kq = vec![v.clone()];
        let mut kv = vec![a1];
        for (idx, (cq, _)) in stages.iter().enumerate() {
            let qi = &q + (dt * cq) * &kq[idx];
            let vi = &v + (dt * cq) * &kv[idx];
            let t_stage = t + dt * cq;
            if let Err(info) = guard_stage(sys, &Point::from_vector(qi.clone()), t_stage) {
                abort = Some(info);
                break 'run;
            }
            kq.push(vi.clone());
            kv.push(eval(&qi, &vi)?);
        }
        q += (dt / 6.0) * (&kq[0] + 2.0 * &kq[1] + 2.0 * &kq[2] + &kq[3]);
        v += (dt / 6.0) * (&kv[0] + 2.0 * &kv[1] + 2.0 * &kv[2] + &kv[3]);
        let t_next = (step + 1) as f64 * dt;
        if let Err(info) = guard_stage(sys, &Point::from_vector(q.clone()), t_next) {
            abort = Some(info);
            break 'run;
        }
        let e = energy(
            sys,
            &State {
                q: Point::from_vector(q.clone()),
                v: v.clone(),
            },
        );
        max_drift = max_drift.max((e - e0).abs() / drift_scale);
        if (step + 1) % cfg.record_every == 0 {
            record(t_next, &q, &v, e);
        }
    }

    let meta = TrajectoryMeta {
        method: cfg.method,
        dt,
        record_every: cfg.record_every,
        energy_drift_limit: cfg.energy_drift_limit,
        max_drift,
        rejected: max_drift > cfg.energy_drift_limit,
    };
    if times.len() < 2 {
        // Aborted before the first recorded step; surface the guard hit.
        let info = abort.expect("short trajectory without abort");
        return Err(Error::GuardViolation {
            time: Some(info.time),
        });
    }
    let trajectory = Trajectory::from_samples(n, times, qs, vs, energies, meta)?;
    Ok(IntegrationOutcome { trajectory, abort })
}

/// Complete lift of a vector field to the tangent bundle,
/// `X^c(q, v) = (X^i(q), dX^i/dq^j v^j)`, returned as a flat `2n` vector.
pub fn complete_lift_eval(field: &VectorFieldDef, state: &State) -> DVector<f64> {
    let n = field.dim();
    let base = field.eval(&state.q);
    let fiber = field.jacobian(&state.q) * &state.v;
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(&base);
    out.rows_mut(n, n).copy_from(&fiber);
    out
}

/// Liouville (velocity dilation) field `(0, v)` as a flat `2n` vector.
pub fn liouville_eval(state: &State) -> DVector<f64> {
    let n = state.dim();
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(n, n).copy_from(&state.v);
    out
}

/// Vector field of the affine observable `G = alpha_i(q) v^i` with
/// `alpha = g(X, .)` under the symplectic structure pulled back by the
/// kinetic metric:
///
/// ```text
/// base^i  = g^ij alpha_j
/// fiber^i = g^ik [ (dg_ln/dq^k - dg_kn/dq^l) v^n g^lj alpha_j - dalpha_m/dq^k v^m ]
/// ```
///
/// For a Killing field this equals the complete lift of `X`; for a conformal
/// field it equals the complete lift minus `f` times the Liouville field.
pub fn hamiltonian_vf_affine(
    metric: &MetricField,
    field: &VectorFieldDef,
    state: &State,
) -> Result<DVector<f64>> {
    let n = metric.dim();
    let q = &state.q;
    let v = &state.v;
    let g = metric.eval(q);
    let ginv = metric_inverse(&g)?;
    let dg = metric.deriv(q);
    let x = field.eval(q);
    let jac = field.jacobian(q);
    let alpha = &g * &x;

    // dalpha_m/dq^k = dg_ml/dq^k X^l + g_ml dX^l/dq^k.
    let mut dalpha = DMatrix::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for l in 0..n {
                s += dg.get(m, l, k) * x[l] + g[(m, l)] * jac[(l, k)];
            }
            dalpha[(m, k)] = s;
        }
    }

    let base = &ginv * &alpha;
    let mut fiber = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            let mut inner = 0.0;
            for l in 0..n {
                for m in 0..n {
                    inner += (dg.get(l, m, k) - dg.get(k, m, l)) * v[m] * base[l];
                }
            }
            for m in 0..n {
                inner -= dalpha[(m, k)] * v[m];
            }
            acc += ginv[(i, k)] * inner;
        }
        fiber[i] = acc;
    }

    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(&base);
    out.rows_mut(n, n).copy_from(&fiber);
    Ok(out)
}
