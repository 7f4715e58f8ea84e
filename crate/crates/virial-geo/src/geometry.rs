//! Metric tensor algebra on a single coordinate chart.
//!
//! A chart of dimension `n` is described by closures: a metric is a map
//! `q -> g_ij(q)` (an `n x n` symmetric matrix), a vector field is
//! `q -> X^i(q)`, a scalar field is `q -> f(q)`. First derivatives are either
//! supplied in closed form or approximated by central differences of the
//! evaluation closure; every field records which mode it is in so tolerance
//! choices can follow the derivative quality.
//!
//! The operations in this module are purely pointwise:
//!
//! * `lie_derivative_metric` computes
//!   `(L_X g)_ij = X^k dg_ij/dq^k + g_ik dX^k/dq^j + g_jk dX^k/dq^i`,
//! * `christoffel` computes
//!   `Gamma^i_jk = (1/2) g^il (dg_lj/dq^k + dg_lk/dq^j - dg_jk/dq^l)`,
//! * `classify_vector_field` decides whether `L_X g` vanishes (Killing), is a
//!   constant multiple of `g` (homothetic), a non-constant multiple (proper
//!   conformal), or not a multiple at all.
//!
//! All types are immutable after construction and safe to share across
//! threads; closures are stored behind `Arc`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative scale for central-difference steps. The actual step used
/// along coordinate `k` is `scale * max(1, |q^k|)`.
pub const DEFAULT_FD_SCALE: f64 = 1e-5;

/// Classification tolerance when both the metric and the field carry
/// closed-form derivatives.
pub const CLASSIFY_TOL_ANALYTIC: f64 = 1e-8;

/// Classification tolerance when any derivative falls back to central
/// differences.
pub const CLASSIFY_TOL_FD: f64 = 1e-5;

/// Minimum number of usable sample points for a classification.
pub const MIN_CLASSIFY_SAMPLES: usize = 8;

/// A point on the chart. Plain coordinates, no structure beyond dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: DVector<f64>,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        Point {
            coords: DVector::from_row_slice(coords),
        }
    }

    pub fn from_vector(coords: DVector<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.coords[k]
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// Copy of this point with coordinate `k` shifted by `delta`.
    pub fn shifted(&self, k: usize, delta: f64) -> Self {
        let mut coords = self.coords.clone();
        coords[k] += delta;
        Point { coords }
    }
}

/// Rank-3 array of chart functions, indexed `[i][j][k]`. Used for metric
/// derivatives (`dg_ij/dq^k`) and Christoffel symbols (`Gamma^i_jk`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[(i * self.n + j) * self.n + k] = value;
    }

    /// Largest absolute entry.
    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Replace the tensor by its symmetric part in the first two indices.
    fn symmetrize_first_two(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for k in 0..self.n {
                    let avg = 0.5 * (self.get(i, j, k) + self.get(j, i, k));
                    self.set(i, j, k, avg);
                    self.set(j, i, k, avg);
                }
            }
        }
    }
}

/// How a field obtains its first derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivMode {
    /// Closed-form derivative closure supplied at construction.
    Analytic,
    /// Central differences of the evaluation closure with the given relative
    /// step scale.
    CentralDifference { step: f64 },
}

impl DerivMode {
    pub fn is_analytic(&self) -> bool {
        matches!(self, DerivMode::Analytic)
    }
}

type MatrixFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;
type TensorFn = Arc<dyn Fn(&Point) -> Tensor3 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Point) -> DVector<f64> + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&Point) -> DVector<f64> + Send + Sync>;

/// Domain guard: `true` where the chart expressions are trustworthy.
pub type GuardFn = dyn Fn(&Point) -> bool + Send + Sync;

fn fd_step(scale: f64, qk: f64) -> f64 {
    scale * qk.abs().max(1.0)
}

/// Metric tensor field `q -> g_ij(q)`. Evaluation is symmetrized, so closure
/// authors only need to fill one triangle consistently.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    eval_fn: MatrixFn,
    deriv_fn: Option<TensorFn>,
    fd_scale: f64,
}

impl MetricField {
    /// Metric with central-difference derivatives.
    pub fn new(dim: usize, eval: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MetricField {
            dim,
            eval_fn: Arc::new(eval),
            deriv_fn: None,
            fd_scale: DEFAULT_FD_SCALE,
        }
    }

    /// Metric with a closed-form derivative closure returning
    /// `dg_ij/dq^k` at index `[i][j][k]`.
    pub fn with_deriv(
        dim: usize,
        eval: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
        deriv: impl Fn(&Point) -> Tensor3 + Send + Sync + 'static,
    ) -> Self {
        MetricField {
            dim,
            eval_fn: Arc::new(eval),
            deriv_fn: Some(Arc::new(deriv)),
            fd_scale: DEFAULT_FD_SCALE,
        }
    }

    /// Constant metric (zero derivative, analytic mode).
    pub fn constant(matrix: DMatrix<f64>) -> Self {
        let dim = matrix.nrows();
        assert_eq!(dim, matrix.ncols(), "metric matrix must be square");
        let stored = matrix.clone();
        MetricField::with_deriv(dim, move |_| stored.clone(), move |_| Tensor3::zeros(dim))
    }

    /// Euclidean metric in Cartesian coordinates.
    pub fn euclidean(dim: usize) -> Self {
        MetricField::constant(DMatrix::identity(dim, dim))
    }

    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        self.fd_scale = scale;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivMode {
        match self.deriv_fn {
            Some(_) => DerivMode::Analytic,
            None => DerivMode::CentralDifference {
                step: self.fd_scale,
            },
        }
    }

    /// `g_ij(q)`, symmetrized.
    pub fn eval(&self, q: &Point) -> DMatrix<f64> {
        let raw = (self.eval_fn)(q);
        assert_eq!(raw.nrows(), self.dim, "metric eval has wrong row count");
        assert_eq!(raw.ncols(), self.dim, "metric eval has wrong column count");
        0.5 * (&raw + raw.transpose())
    }

    /// `dg_ij/dq^k` at `[i][j][k]`, symmetric in `(i, j)`.
    pub fn deriv(&self, q: &Point) -> Tensor3 {
        let mut d = match &self.deriv_fn {
            Some(f) => {
                let raw = f(q);
                assert_eq!(raw.dim(), self.dim, "metric deriv has wrong dimension");
                raw
            }
            None => self.fd_deriv(q),
        };
        d.symmetrize_first_two();
        d
    }

    fn fd_deriv(&self, q: &Point) -> Tensor3 {
        let n = self.dim;
        let mut d = Tensor3::zeros(n);
        for k in 0..n {
            let h = fd_step(self.fd_scale, q.coord(k));
            let plus = self.eval(&q.shifted(k, h));
            let minus = self.eval(&q.shifted(k, -h));
            for i in 0..n {
                for j in 0..n {
                    d.set(i, j, k, (plus[(i, j)] - minus[(i, j)]) / (2.0 * h));
                }
            }
        }
        d
    }
}

/// Vector field `q -> X^i(q)` with an optional closed-form Jacobian
/// `dX^i/dq^j` at entry `(i, j)`.
#[derive(Clone)]
pub struct VectorFieldDef {
    dim: usize,
    eval_fn: VectorFn,
    jacobian_fn: Option<JacobianFn>,
    fd_scale: f64,
}

impl VectorFieldDef {
    pub fn new(
        dim: usize,
        eval: impl Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        VectorFieldDef {
            dim,
            eval_fn: Arc::new(eval),
            jacobian_fn: None,
            fd_scale: DEFAULT_FD_SCALE,
        }
    }

    pub fn with_jacobian(
        dim: usize,
        eval: impl Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        VectorFieldDef {
            dim,
            eval_fn: Arc::new(eval),
            jacobian_fn: Some(Arc::new(jacobian)),
            fd_scale: DEFAULT_FD_SCALE,
        }
    }

    /// Constant field (zero Jacobian, analytic mode).
    pub fn constant(components: &[f64]) -> Self {
        let dim = components.len();
        let stored = DVector::from_row_slice(components);
        VectorFieldDef::with_jacobian(
            dim,
            move |_| stored.clone(),
            move |_| DMatrix::zeros(dim, dim),
        )
    }

    /// Pointwise combination `a X + b Y`. Stays analytic only if both inputs
    /// are analytic.
    pub fn linear_combination(a: f64, x: &VectorFieldDef, b: f64, y: &VectorFieldDef) -> Self {
        assert_eq!(x.dim, y.dim, "combined fields must share a chart");
        let dim = x.dim;
        let (xe, ye) = (x.eval_fn.clone(), y.eval_fn.clone());
        let eval = move |q: &Point| a * xe(q) + b * ye(q);
        match (&x.jacobian_fn, &y.jacobian_fn) {
            (Some(xj), Some(yj)) => {
                let (xj, yj) = (xj.clone(), yj.clone());
                VectorFieldDef::with_jacobian(dim, eval, move |q| a * xj(q) + b * yj(q))
            }
            _ => VectorFieldDef::new(dim, eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivMode {
        match self.jacobian_fn {
            Some(_) => DerivMode::Analytic,
            None => DerivMode::CentralDifference {
                step: self.fd_scale,
            },
        }
    }

    pub fn eval(&self, q: &Point) -> DVector<f64> {
        let v = (self.eval_fn)(q);
        assert_eq!(v.len(), self.dim, "vector field eval has wrong length");
        v
    }

    pub fn jacobian(&self, q: &Point) -> DMatrix<f64> {
        match &self.jacobian_fn {
            Some(f) => {
                let j = f(q);
                assert_eq!(j.nrows(), self.dim, "jacobian has wrong row count");
                assert_eq!(j.ncols(), self.dim, "jacobian has wrong column count");
                j
            }
            None => self.fd_jacobian(q),
        }
    }

    fn fd_jacobian(&self, q: &Point) -> DMatrix<f64> {
        let n = self.dim;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = fd_step(self.fd_scale, q.coord(k));
            let plus = self.eval(&q.shifted(k, h));
            let minus = self.eval(&q.shifted(k, -h));
            for i in 0..n {
                jac[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        jac
    }
}

/// Scalar field `q -> f(q)` with an optional closed-form gradient.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval_fn: ScalarFn,
    gradient_fn: Option<GradientFn>,
    fd_scale: f64,
}

impl ScalarField {
    pub fn new(dim: usize, eval: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            dim,
            eval_fn: Arc::new(eval),
            gradient_fn: None,
            fd_scale: DEFAULT_FD_SCALE,
        }
    }

    pub fn with_gradient(
        dim: usize,
        eval: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            dim,
            eval_fn: Arc::new(eval),
            gradient_fn: Some(Arc::new(gradient)),
            fd_scale: DEFAULT_FD_SCALE,
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        ScalarField::with_gradient(dim, move |_| value, move |_| DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivMode {
        match self.gradient_fn {
            Some(_) => DerivMode::Analytic,
            None => DerivMode::CentralDifference {
                step: self.fd_scale,
            },
        }
    }

    pub fn eval(&self, q: &Point) -> f64 {
        (self.eval_fn)(q)
    }

    pub fn gradient(&self, q: &Point) -> DVector<f64> {
        match &self.gradient_fn {
            Some(f) => {
                let g = f(q);
                assert_eq!(g.len(), self.dim, "gradient has wrong length");
                g
            }
            None => self.fd_gradient(q),
        }
    }

    fn fd_gradient(&self, q: &Point) -> DVector<f64> {
        let n = self.dim;
        let mut grad = DVector::zeros(n);
        for k in 0..n {
            let h = fd_step(self.fd_scale, q.coord(k));
            let plus = self.eval(&q.shifted(k, h));
            let minus = self.eval(&q.shifted(k, -h));
            grad[k] = (plus - minus) / (2.0 * h);
        }
        grad
    }
}

/// Fields that can compare their closed-form derivative against a central
/// difference of their own evaluation closure. Returns the largest absolute
/// deviation over all derivative entries; fields already in
/// central-difference mode report zero.
pub trait DerivativeCrosscheck {
    fn derivative_crosscheck(&self, q: &Point) -> f64;
}

impl DerivativeCrosscheck for MetricField {
    fn derivative_crosscheck(&self, q: &Point) -> f64 {
        if self.deriv_fn.is_none() {
            return 0.0;
        }
        let analytic = self.deriv(q);
        let numeric = self.fd_deriv(q);
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((analytic.get(i, j, k) - numeric.get(i, j, k)).abs());
                }
            }
        }
        worst
    }
}

impl DerivativeCrosscheck for VectorFieldDef {
    fn derivative_crosscheck(&self, q: &Point) -> f64 {
        if self.jacobian_fn.is_none() {
            return 0.0;
        }
        (self.jacobian(q) - self.fd_jacobian(q)).abs().max()
    }
}

impl DerivativeCrosscheck for ScalarField {
    fn derivative_crosscheck(&self, q: &Point) -> f64 {
        if self.gradient_fn.is_none() {
            return 0.0;
        }
        (self.gradient(q) - self.fd_gradient(q)).abs().max()
    }
}

/// Inverse of a metric matrix with a singularity floor: the determinant must
/// exceed `1e-12 * max(1, max|g_ij|)^n` in absolute value.
pub fn metric_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    assert_eq!(n, g.ncols(), "metric matrix must be square");
    let scale = g.abs().max().max(1.0);
    let floor = 1e-12 * scale.powi(n as i32);
    let det = g.determinant();
    if !det.is_finite() || det.abs() < floor {
        return Err(Error::SingularMetric { det, floor });
    }
    g.clone()
        .try_inverse()
        .ok_or(Error::SingularMetric { det, floor })
}

/// Lie derivative of the metric along a vector field:
/// `(L_X g)_ij = X^k dg_ij/dq^k + g_ik dX^k/dq^j + g_jk dX^k/dq^i`.
/// The result is symmetric by construction.
pub fn lie_derivative_metric(
    field: &VectorFieldDef,
    metric: &MetricField,
    q: &Point,
) -> DMatrix<f64> {
    let n = metric.dim();
    assert_eq!(field.dim(), n, "field and metric must share a chart");
    let g = metric.eval(q);
    let dg = metric.deriv(q);
    let x = field.eval(q);
    let jac = field.jacobian(q);
    let mut lie = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut entry = 0.0;
            for k in 0..n {
                entry += x[k] * dg.get(i, j, k);
                entry += g[(i, k)] * jac[(k, j)] + g[(j, k)] * jac[(k, i)];
            }
            lie[(i, j)] = entry;
            lie[(j, i)] = entry;
        }
    }
    lie
}

/// Christoffel symbols of the Levi-Civita connection,
/// `Gamma^i_jk = (1/2) g^il (dg_lj/dq^k + dg_lk/dq^j - dg_jk/dq^l)`,
/// symmetric in the lower pair.
pub fn christoffel(metric: &MetricField, q: &Point) -> Result<Tensor3> {
    let n = metric.dim();
    let g = metric.eval(q);
    let ginv = metric_inverse(&g)?;
    let dg = metric.deriv(q);
    let mut gamma = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut sum = 0.0;
                for l in 0..n {
                    sum += ginv[(i, l)] * (dg.get(l, j, k) + dg.get(l, k, j) - dg.get(j, k, l));
                }
                let value = 0.5 * sum;
                gamma.set(i, j, k, value);
                gamma.set(i, k, j, value);
            }
        }
    }
    Ok(gamma)
}

/// Kinetic energy `T_g(q, v) = (1/2) g_ij(q) v^i v^j`.
pub fn kinetic_energy(metric: &MetricField, q: &Point, v: &DVector<f64>) -> f64 {
    kinetic_energy_matrix(&metric.eval(q), v)
}

/// Kinetic energy against an explicit metric matrix.
pub fn kinetic_energy_matrix(g: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    0.5 * (g * v).dot(v)
}

/// Musical flat: covector components `alpha_i = g_ij(q) X^j(q)`.
pub fn flat_map(metric: &MetricField, field: &VectorFieldDef, q: &Point) -> DVector<f64> {
    metric.eval(q) * field.eval(q)
}

/// Outcome of a conformal classification.
#[derive(Debug, Clone)]
pub enum ConformalKind {
    /// `L_X g = 0`.
    Killing,
    /// `L_X g = factor * g` with a constant, nonzero factor.
    Homothetic { factor: f64 },
    /// `L_X g = f(q) g` with a genuinely position-dependent factor; the
    /// fitted factor is reported at every usable sample.
    ProperConformal { factor_samples: Vec<(Point, f64)> },
    /// `L_X g` is not a pointwise multiple of `g`.
    NonConformal,
}

impl ConformalKind {
    pub fn label(&self) -> &'static str {
        match self {
            ConformalKind::Killing => "killing",
            ConformalKind::Homothetic { .. } => "homothetic",
            ConformalKind::ProperConformal { .. } => "proper-conformal",
            ConformalKind::NonConformal => "non-conformal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConformalClassification {
    pub kind: ConformalKind,
    /// Largest normalized fit residual
    /// `max_ij |(L_X g - c g)_ij| / (1 + max_ij |g_ij|)` over the samples.
    pub max_residual: f64,
    /// Samples that passed the guard and entered the decision.
    pub samples_used: usize,
}

/// Default classification tolerance for a metric/field pair, following the
/// weaker of the two derivative modes.
pub fn default_classify_tol(metric: &MetricField, field: &VectorFieldDef) -> f64 {
    if metric.mode().is_analytic() && field.mode().is_analytic() {
        CLASSIFY_TOL_ANALYTIC
    } else {
        CLASSIFY_TOL_FD
    }
}

/// Classify a vector field against a metric by fitting `L_X g = c(q) g` at
/// each sample point. Per point, `c(q) = tr(g^{-1} L_X g) / n`; the fit
/// residual is the largest entry of `L_X g - c g` normalized by
/// `1 + max|g_ij|`. Any residual above `tol` means the field is not conformal;
/// otherwise the spread of `c` over the samples separates constant factors
/// (Killing at zero, homothetic elsewhere) from proper conformal factors.
///
/// Sample points failing the optional guard are skipped; at least
/// [`MIN_CLASSIFY_SAMPLES`] usable points are required.
pub fn classify_vector_field(
    field: &VectorFieldDef,
    metric: &MetricField,
    samples: &[Point],
    tol: f64,
    guard: Option<&GuardFn>,
) -> Result<ConformalClassification> {
    let n = metric.dim();
    let mut factors: Vec<(Point, f64)> = Vec::with_capacity(samples.len());
    let mut max_residual = 0.0f64;
    for q in samples {
        if let Some(g) = guard {
            if !g(q) {
                continue;
            }
        }
        let gm = metric.eval(q);
        let ginv = metric_inverse(&gm)?;
        let lie = lie_derivative_metric(field, metric, q);
        let c = (&ginv * &lie).trace() / n as f64;
        let gmax = gm.abs().max();
        let mut res = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                res = res.max((lie[(i, j)] - c * gm[(i, j)]).abs());
            }
        }
        res /= 1.0 + gmax;
        max_residual = max_residual.max(res);
        factors.push((q.clone(), c));
    }
    if factors.len() < MIN_CLASSIFY_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_CLASSIFY_SAMPLES,
            got: factors.len(),
        });
    }
    let samples_used = factors.len();
    if max_residual > tol {
        return Ok(ConformalClassification {
            kind: ConformalKind::NonConformal,
            max_residual,
            samples_used,
        });
    }
    let (mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut csum = 0.0;
    for (_, c) in &factors {
        cmin = cmin.min(*c);
        cmax = cmax.max(*c);
        csum += c;
    }
    let spread = cmax - cmin;
    let mean = csum / samples_used as f64;
    let kind = if spread <= tol {
        if mean.abs() <= tol {
            ConformalKind::Killing
        } else {
            ConformalKind::Homothetic { factor: mean }
        }
    } else {
        ConformalKind::ProperConformal {
            factor_samples: factors,
        }
    };
    Ok(ConformalClassification {
        kind,
        max_residual,
        samples_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Chart fixtures used throughout the tests. The sphere has radius 1, the
    // projected (gnomonic-style) plane curvature parameter lambda = 1 unless
    // stated otherwise.

    fn sphere_metric() -> MetricField {
        MetricField::with_deriv(
            2,
            |q| {
                let th = q.coord(0);
                DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, th.sin().powi(2)]))
            },
            |q| {
                let th = q.coord(0);
                let mut d = Tensor3::zeros(2);
                d.set(1, 1, 0, 2.0 * th.sin() * th.cos());
                d
            },
        )
    }

    fn polar_metric() -> MetricField {
        MetricField::with_deriv(
            2,
            |q| {
                let r = q.coord(0);
                DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, r * r]))
            },
            |q| {
                let mut d = Tensor3::zeros(2);
                d.set(1, 1, 0, 2.0 * q.coord(0));
                d
            },
        )
    }

    fn projected_metric(lambda: f64) -> MetricField {
        MetricField::with_deriv(
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
                d.set(0, 0, 0, -4.0 * lambda * r / w.powi(3));
                d.set(1, 1, 0, 2.0 * r / (w * w));
                d
            },
        )
    }

    fn rotation_field() -> VectorFieldDef {
        VectorFieldDef::constant(&[0.0, 1.0])
    }

    fn dilation_field() -> VectorFieldDef {
        VectorFieldDef::with_jacobian(
            2,
            |q| DVector::from_row_slice(&[q.coord(0), 0.0]),
            |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        )
    }

    fn sphere_conformal_field() -> VectorFieldDef {
        VectorFieldDef::with_jacobian(
            2,
            |q| DVector::from_row_slice(&[q.coord(0).sin(), 0.0]),
            |q| DMatrix::from_row_slice(2, 2, &[q.coord(0).cos(), 0.0, 0.0, 0.0]),
        )
    }

    fn projected_dilation_field(lambda: f64) -> VectorFieldDef {
        VectorFieldDef::with_jacobian(
            2,
            move |q| {
                let r = q.coord(0);
                DVector::from_row_slice(&[r * (1.0 + lambda * r * r), 0.0])
            },
            move |q| {
                let r = q.coord(0);
                DMatrix::from_row_slice(2, 2, &[1.0 + 3.0 * lambda * r * r, 0.0, 0.0, 0.0])
            },
        )
    }

    /// Independent reference for Christoffel symbols: the Koszul formula
    /// evaluated with central differences of the metric closure only. This
    /// path never touches `MetricField::deriv`.
    fn koszul_fd_christoffel(metric: &MetricField, q: &Point, h_scale: f64) -> Tensor3 {
        let n = metric.dim();
        let mut dg = Tensor3::zeros(n);
        for k in 0..n {
            let h = h_scale * q.coord(k).abs().max(1.0);
            let plus = metric.eval(&q.shifted(k, h));
            let minus = metric.eval(&q.shifted(k, -h));
            for i in 0..n {
                for j in 0..n {
                    dg.set(i, j, k, (plus[(i, j)] - minus[(i, j)]) / (2.0 * h));
                }
            }
        }
        let ginv = metric_inverse(&metric.eval(q)).expect("reference metric invertible");
        Tensor3::from_fn(n, |i, j, k| {
            let mut sum = 0.0;
            for l in 0..n {
                sum += ginv[(i, l)] * (dg.get(l, j, k) + dg.get(l, k, j) - dg.get(j, k, l));
            }
            0.5 * sum
        })
    }

    fn max_tensor_diff(a: &Tensor3, b: &Tensor3) -> f64 {
        let n = a.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((a.get(i, j, k) - b.get(i, j, k)).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn metric_inverse_identity() {
        let inv = metric_inverse(&DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(inv, DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn metric_inverse_polar_r2() {
        let g = polar_metric().eval(&Point::new(&[2.0, 0.3]));
        let inv = metric_inverse(&g).unwrap();
        assert_abs_diff_eq!(inv[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[(1, 1)], 0.25, epsilon = 1e-14);
        let product = &g * &inv;
        assert_abs_diff_eq!(product, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn metric_inverse_rejects_singular() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match metric_inverse(&g) {
            Err(Error::SingularMetric { .. }) => {}
            other => panic!("expected SingularMetric, got {other:?}"),
        }
    }

    #[test]
    fn lie_derivative_vanishes_for_sphere_rotation() {
        let lie = lie_derivative_metric(
            &rotation_field(),
            &sphere_metric(),
            &Point::new(&[1.1, 0.4]),
        );
        assert!(lie.abs().max() < 1e-15, "rotation must be isometric");
    }

    #[test]
    fn lie_derivative_sphere_conformal_factor_at_pi_3() {
        // L_X g = 2 cos(theta) g; at theta = pi/3 the factor is exactly 1.
        let q = Point::new(&[std::f64::consts::FRAC_PI_3, 0.2]);
        let metric = sphere_metric();
        let lie = lie_derivative_metric(&sphere_conformal_field(), &metric, &q);
        let g = metric.eval(&q);
        assert_abs_diff_eq!(lie, g, epsilon = 1e-14);
    }

    #[test]
    fn lie_derivative_polar_dilation_is_twice_metric() {
        let q = Point::new(&[1.7, 2.1]);
        let metric = polar_metric();
        let lie = lie_derivative_metric(&dilation_field(), &metric, &q);
        let expected = 2.0 * metric.eval(&q);
        assert_abs_diff_eq!(lie, expected, epsilon = 1e-13);
    }

    #[test]
    fn christoffel_flat_is_zero() {
        let gamma = christoffel(&MetricField::euclidean(3), &Point::new(&[0.3, -1.2, 4.0])).unwrap();
        assert_eq!(gamma.amax(), 0.0);
    }

    #[test]
    fn christoffel_polar_frozen_values() {
        // Independent central-difference Koszul reference at r = 2 gives
        // Gamma^r_phiphi = -2 and Gamma^phi_rphi = 1/2; the closed-form path
        // must reproduce both.
        let metric = polar_metric();
        let q = Point::new(&[2.0, 0.7]);
        let gamma = christoffel(&metric, &q).unwrap();
        assert_abs_diff_eq!(gamma.get(0, 1, 1), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma.get(1, 0, 1), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma.get(1, 1, 0), 0.5, epsilon = 1e-12);
        let reference = koszul_fd_christoffel(&metric, &q, 1e-5);
        assert!(max_tensor_diff(&gamma, &reference) < 1e-8);
    }

    #[test]
    fn christoffel_sphere_frozen_values() {
        // At theta = pi/4: Gamma^theta_phiphi = -sin cos = -1/2 and
        // Gamma^phi_thetaphi = cot = 1. Cross-checked against the
        // central-difference Koszul reference.
        let metric = sphere_metric();
        let q = Point::new(&[std::f64::consts::FRAC_PI_4, 1.9]);
        let gamma = christoffel(&metric, &q).unwrap();
        assert_abs_diff_eq!(gamma.get(0, 1, 1), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma.get(1, 0, 1), 1.0, epsilon = 1e-12);
        let reference = koszul_fd_christoffel(&metric, &q, 1e-5);
        assert!(max_tensor_diff(&gamma, &reference) < 1e-8);
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let metric = projected_metric(1.0);
        let gamma = christoffel(&metric, &Point::new(&[0.9, 2.4])).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(gamma.get(i, j, k), gamma.get(i, k, j));
                }
            }
        }
    }

    #[test]
    fn metric_compatibility_of_connection() {
        // dg_jk/dq^i = g_lk Gamma^l_ij + g_jl Gamma^l_ik at scattered points.
        for metric in [sphere_metric(), polar_metric(), projected_metric(0.7)] {
            for q in [Point::new(&[0.8, 0.3]), Point::new(&[1.4, 5.0]), Point::new(&[2.2, 1.0])] {
                let g = metric.eval(&q);
                let dg = metric.deriv(&q);
                let gamma = christoffel(&metric, &q).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            let mut rhs = 0.0;
                            for l in 0..2 {
                                rhs += g[(l, k)] * gamma.get(l, i, j) + g[(j, l)] * gamma.get(l, i, k);
                            }
                            assert_abs_diff_eq!(dg.get(j, k, i), rhs, epsilon = 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kinetic_energy_examples() {
        let v = DVector::from_row_slice(&[3.0, 4.0]);
        assert_abs_diff_eq!(
            kinetic_energy(&MetricField::euclidean(2), &Point::new(&[0.0, 0.0]), &v),
            12.5,
            epsilon = 1e-14
        );
        let v = DVector::from_row_slice(&[0.0, 2.0]);
        assert_abs_diff_eq!(
            kinetic_energy(
                &sphere_metric(),
                &Point::new(&[std::f64::consts::FRAC_PI_2, 0.0]),
                &v
            ),
            2.0,
            epsilon = 1e-14
        );
        let v = DVector::from_row_slice(&[1.0, 1.0]);
        assert_abs_diff_eq!(
            kinetic_energy(&polar_metric(), &Point::new(&[2.0, 0.0]), &v),
            2.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn flat_map_examples() {
        let alpha = flat_map(
            &MetricField::euclidean(2),
            &VectorFieldDef::constant(&[1.0, 2.0]),
            &Point::new(&[0.0, 0.0]),
        );
        assert_abs_diff_eq!(alpha, DVector::from_row_slice(&[1.0, 2.0]), epsilon = 1e-14);

        let alpha = flat_map(
            &sphere_metric(),
            &rotation_field(),
            &Point::new(&[std::f64::consts::FRAC_PI_6, 0.0]),
        );
        assert_abs_diff_eq!(alpha, DVector::from_row_slice(&[0.0, 0.25]), epsilon = 1e-14);

        let alpha = flat_map(
            &polar_metric(),
            &VectorFieldDef::constant(&[2.0, 1.0]),
            &Point::new(&[3.0, 0.0]),
        );
        assert_abs_diff_eq!(alpha, DVector::from_row_slice(&[2.0, 9.0]), epsilon = 1e-14);
    }

    fn theta_phi_samples() -> Vec<Point> {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let th = 0.5 + 0.55 * i as f64;
                let ph = 0.3 + 1.5 * j as f64;
                pts.push(Point::new(&[th, ph]));
            }
        }
        pts
    }

    fn r_phi_samples() -> Vec<Point> {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                pts.push(Point::new(&[0.4 + 0.5 * i as f64, 0.2 + 1.4 * j as f64]));
            }
        }
        pts
    }

    #[test]
    fn classify_sphere_rotation_as_killing() {
        let cls = classify_vector_field(
            &rotation_field(),
            &sphere_metric(),
            &theta_phi_samples(),
            CLASSIFY_TOL_ANALYTIC,
            None,
        )
        .unwrap();
        assert!(matches!(cls.kind, ConformalKind::Killing), "{:?}", cls.kind);
        assert!(cls.max_residual <= CLASSIFY_TOL_ANALYTIC);
        assert_eq!(cls.samples_used, 16);
    }

    #[test]
    fn classify_polar_dilation_as_homothetic_two() {
        let cls = classify_vector_field(
            &dilation_field(),
            &polar_metric(),
            &r_phi_samples(),
            CLASSIFY_TOL_ANALYTIC,
            None,
        )
        .unwrap();
        match cls.kind {
            ConformalKind::Homothetic { factor } => assert_abs_diff_eq!(factor, 2.0, epsilon = 1e-12),
            other => panic!("expected homothetic, got {other:?}"),
        }
    }

    #[test]
    fn classify_sphere_stretch_as_proper_conformal() {
        let cls = classify_vector_field(
            &sphere_conformal_field(),
            &sphere_metric(),
            &theta_phi_samples(),
            CLASSIFY_TOL_ANALYTIC,
            None,
        )
        .unwrap();
        match cls.kind {
            ConformalKind::ProperConformal { factor_samples } => {
                for (q, c) in factor_samples {
                    assert_abs_diff_eq!(c, 2.0 * q.coord(0).cos(), epsilon = 1e-10);
                }
            }
            other => panic!("expected proper conformal, got {other:?}"),
        }
    }

    #[test]
    fn classify_projected_dilation_as_non_conformal() {
        let cls = classify_vector_field(
            &projected_dilation_field(1.0),
            &projected_metric(1.0),
            &r_phi_samples(),
            CLASSIFY_TOL_ANALYTIC,
            None,
        )
        .unwrap();
        assert!(matches!(cls.kind, ConformalKind::NonConformal), "{:?}", cls.kind);
        assert!(cls.max_residual > 1e-2);
    }

    #[test]
    fn classify_needs_enough_guarded_samples() {
        let guard: Box<GuardFn> = Box::new(|q: &Point| q.coord(0) > 1.9);
        match classify_vector_field(
            &dilation_field(),
            &polar_metric(),
            &r_phi_samples(),
            CLASSIFY_TOL_ANALYTIC,
            Some(guard.as_ref()),
        ) {
            Err(Error::InsufficientSamples { needed: 8, got }) => assert!(got < 8),
            other => panic!("expected InsufficientSamples, got {other:?}"),
        }
    }

    #[test]
    fn killing_fields_have_skew_symmetric_covariant_differential() {
        // For alpha = flat(X) of a Killing field, the matrix
        // M_jk = d(alpha_j)/dq^k - alpha_i Gamma^i_jk is antisymmetric.
        let metric = sphere_metric();
        // X1 = cos(phi) d/dtheta - sin(phi) cot(theta) d/dphi.
        let x1 = VectorFieldDef::with_jacobian(
            2,
            |q| {
                let (th, ph) = (q.coord(0), q.coord(1));
                DVector::from_row_slice(&[ph.cos(), -ph.sin() * th.cos() / th.sin()])
            },
            |q| {
                let (th, ph) = (q.coord(0), q.coord(1));
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        0.0,
                        -ph.sin(),
                        ph.sin() / th.sin().powi(2),
                        -ph.cos() * th.cos() / th.sin(),
                    ],
                )
            },
        );
        for field in [rotation_field(), x1] {
            for q in theta_phi_samples() {
                let g = metric.eval(&q);
                let dg = metric.deriv(&q);
                let x = field.eval(&q);
                let jac = field.jacobian(&q);
                let alpha = &g * &x;
                let gamma = christoffel(&metric, &q).unwrap();
                // d(alpha_j)/dq^k = dg_jl/dq^k X^l + g_jl dX^l/dq^k.
                let mut m = DMatrix::zeros(2, 2);
                for j in 0..2 {
                    for k in 0..2 {
                        let mut d_alpha = 0.0;
                        for l in 0..2 {
                            d_alpha += dg.get(j, l, k) * x[l] + g[(j, l)] * jac[(l, k)];
                        }
                        let mut correction = 0.0;
                        for i in 0..2 {
                            correction += alpha[i] * gamma.get(i, j, k);
                        }
                        m[(j, k)] = d_alpha - correction;
                    }
                }
                assert!(
                    (&m + m.transpose()).abs().max() < 1e-8,
                    "covariant differential not antisymmetric at {q:?}"
                );
            }
        }
    }

    #[test]
    fn crosscheck_constant_metric_is_exact() {
        let metric = MetricField::euclidean(3);
        assert_eq!(metric.derivative_crosscheck(&Point::new(&[1.0, 2.0, 3.0])), 0.0);
    }

    #[test]
    fn crosscheck_sphere_metric_within_fd_accuracy() {
        let metric = sphere_metric();
        assert!(metric.derivative_crosscheck(&Point::new(&[1.0, 0.0])) <= 1e-6);
    }

    #[test]
    fn crosscheck_gravity_potential_within_fd_accuracy() {
        let potential = ScalarField::with_gradient(
            2,
            |q| -1.0 / q.coord(0),
            |q| DVector::from_row_slice(&[1.0 / q.coord(0).powi(2), 0.0]),
        );
        assert!(potential.derivative_crosscheck(&Point::new(&[1.0, 0.0])) <= 1e-6);
    }

    proptest! {
        #[test]
        fn lie_derivative_is_bilinear_in_the_field(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            th in 0.4f64..2.7,
            ph in 0.0f64..6.2,
        ) {
            let metric = sphere_metric();
            let q = Point::new(&[th, ph]);
            let x = sphere_conformal_field();
            let y = rotation_field();
            let combined = VectorFieldDef::linear_combination(a, &x, b, &y);
            let lhs = lie_derivative_metric(&combined, &metric, &q);
            let rhs = a * lie_derivative_metric(&x, &metric, &q)
                + b * lie_derivative_metric(&y, &metric, &q);
            prop_assert!((lhs - rhs).abs().max() < 1e-10);
        }

        #[test]
        fn flat_then_sharp_is_identity(
            r in 0.3f64..3.0,
            ph in 0.0f64..6.2,
            lambda in 0.2f64..2.0,
        ) {
            let metric = projected_metric(lambda);
            let field = projected_dilation_field(lambda);
            let q = Point::new(&[r, ph]);
            let alpha = flat_map(&metric, &field, &q);
            let ginv = metric_inverse(&metric.eval(&q)).unwrap();
            let back = ginv * alpha;
            let x = field.eval(&q);
            prop_assert!((back - x).abs().max() < 1e-10);
        }

        #[test]
        fn classification_scales_with_the_field(
            c in 0.2f64..4.0,
        ) {
            let metric = polar_metric();
            let scaled = VectorFieldDef::linear_combination(
                c,
                &dilation_field(),
                0.0,
                &dilation_field(),
            );
            let cls = classify_vector_field(
                &scaled,
                &metric,
                &r_phi_samples(),
                CLASSIFY_TOL_ANALYTIC,
                None,
            ).unwrap();
            match cls.kind {
                ConformalKind::Homothetic { factor } => {
                    prop_assert!((factor - 2.0 * c).abs() < 1e-10);
                }
                other => prop_assert!(false, "expected homothetic, got {:?}", other),
            }
        }

        #[test]
        fn fd_fallback_tracks_analytic_derivatives(
            th in 0.5f64..2.6,
            ph in 0.0f64..6.2,
        ) {
            let q = Point::new(&[th, ph]);
            let analytic = sphere_metric();
            let fallback = MetricField::new(2, |p: &Point| {
                let th = p.coord(0);
                DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, th.sin().powi(2)]))
            });
            let da = analytic.deriv(&q);
            let dn = fallback.deriv(&q);
            prop_assert!(max_tensor_diff(&da, &dn) < 1e-8);
        }
    }
}
