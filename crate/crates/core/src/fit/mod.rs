//! Weighted nonlinear least squares with Levenberg-Marquardt.
//!
//! The optimizer runs in an internal coordinate system where every
//! parameter is unconstrained (see [`models`] for the maps); Jacobians
//! chain through the transform slopes. Steps solve
//! `(J^T J + lambda diag(J^T J)) step = J^T r` with Marquardt's diagonal
//! scaling, growing `lambda` tenfold on a rejected step and shrinking it
//! tenfold on an accepted one, so accepted costs never increase.
//!
//! Confidence intervals use the delta method at the solution: the
//! covariance is `s^2 (J^T J)^{-1}` in natural units, with `s^2` the
//! reduced chi-square when the data carry no explicit uncertainties and 1
//! when they do (the weights then do the scaling).

pub mod models;

pub use models::ModelId;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::{ensure_finite, Error, Result};

/// Where a data series came from; carried into reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesMetadata {
    pub source: Option<String>,
    pub x_name: Option<String>,
    pub y_name: Option<String>,
}

/// One measured curve: strictly increasing x, finite y, optional
/// per-point uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSeries {
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Option<Vec<f64>>,
    pub metadata: SeriesMetadata,
}

impl DataSeries {
    pub fn new(
        x: Vec<f64>,
        y: Vec<f64>,
        sigma: Option<Vec<f64>>,
        metadata: SeriesMetadata,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "x and y lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(s) = &sigma {
            if s.len() != x.len() {
                return Err(Error::InvalidParameter(format!(
                    "sigma length {} does not match data length {}",
                    s.len(),
                    x.len()
                )));
            }
            for (i, &v) in s.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "sigma[{i}] must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if x.is_empty() {
            return Err(Error::InsufficientData("data series is empty".into()));
        }
        for (i, (&xi, &yi)) in x.iter().zip(&y).enumerate() {
            if !xi.is_finite() || !yi.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite sample at row {i}: x = {xi}, y = {yi}"
                )));
            }
        }
        for (i, w) in x.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(format!(
                    "x must be strictly increasing; x[{}] = {} does not exceed x[{}] = {}",
                    i + 1,
                    w[1],
                    i,
                    w[0]
                )));
            }
        }
        Ok(Self {
            x,
            y,
            sigma,
            metadata,
        })
    }

    /// Build from unordered samples: sorts by x and averages duplicate
    /// x values (uncertainties combine as the error of the mean).
    /// Returns the number of rows merged away.
    pub fn from_unsorted(
        x: Vec<f64>,
        y: Vec<f64>,
        sigma: Option<Vec<f64>>,
        metadata: SeriesMetadata,
    ) -> Result<(Self, usize)> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "x and y lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        for &i in &order {
            if !x[i].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite x at row {i}: {}",
                    x[i]
                )));
            }
        }
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

        let mut xs = Vec::with_capacity(x.len());
        let mut ys = Vec::with_capacity(x.len());
        let mut ss: Option<Vec<f64>> = sigma.as_ref().map(|_| Vec::with_capacity(x.len()));
        let mut merged = 0;
        let mut k = 0;
        while k < order.len() {
            let mut group = vec![order[k]];
            while k + 1 < order.len() && x[order[k + 1]] == x[order[k]] {
                k += 1;
                group.push(order[k]);
            }
            let m = group.len() as f64;
            xs.push(x[group[0]]);
            ys.push(group.iter().map(|&i| y[i]).sum::<f64>() / m);
            if let (Some(list), Some(s)) = (&mut ss, &sigma) {
                // Error of the mean of independent measurements.
                let sum_sq: f64 = group.iter().map(|&i| s[i] * s[i]).sum();
                list.push(sum_sq.sqrt() / m);
            }
            merged += group.len() - 1;
            k += 1;
        }
        Ok((Self::new(xs, ys, ss, metadata)?, merged))
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Which model to fit and how to differentiate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub id: ModelId,
    /// Use the analytic gradient; central finite differences otherwise.
    pub analytic_jacobian: bool,
}

impl ModelSpec {
    pub fn new(id: ModelId) -> Self {
        Self {
            id,
            analytic_jacobian: true,
        }
    }

    pub fn numeric(id: ModelId) -> Self {
        Self {
            id,
            analytic_jacobian: false,
        }
    }
}

/// Confidence level reported by [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiLevel {
    /// 95% intervals: 1.96 standard errors.
    #[default]
    NinetyFive,
    /// One standard error.
    OneSigma,
}

impl CiLevel {
    pub fn z(&self) -> f64 {
        match self {
            CiLevel::NinetyFive => 1.96,
            CiLevel::OneSigma => 1.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CiLevel::NinetyFive => "ci95",
            CiLevel::OneSigma => "ci68",
        }
    }
}

/// Optimizer knobs; the defaults are used everywhere in practice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step reduces the cost by less than this
    /// relative amount.
    pub cost_tolerance: f64,
    /// Stop when the internal step norm falls below this.
    pub step_tolerance: f64,
    pub lambda_init: f64,
    pub ci_level: CiLevel,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tolerance: 1e-10,
            step_tolerance: 1e-12,
            lambda_init: 1e-3,
            ci_level: CiLevel::NinetyFive,
        }
    }
}

/// A completed fit: estimates, uncertainties, and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelId,
    /// Parameter estimates in natural units, model order.
    pub params: Vec<f64>,
    /// Confidence half-widths per parameter at `ci_level`.
    pub ci: Vec<f64>,
    pub ci_level: CiLevel,
    /// Parameter covariance in natural units (delta method).
    pub covariance: Vec<Vec<f64>>,
    /// Root-mean-square weighted residual.
    pub residual_rms: f64,
    /// Sum of squared weighted residuals divided by (n - p); reported as
    /// goodness of fit only when uncertainties were supplied.
    pub reduced_chi2: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Derived quantities (such as a line's quality factor).
    pub derived: Vec<(&'static str, f64)>,
}

impl FitResult {
    pub fn param_names(&self) -> &'static [&'static str] {
        self.model.param_names()
    }

    /// Estimate for a parameter by name.
    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.params[i])
    }

    /// Confidence half-width for a parameter by name.
    pub fn ci_for(&self, name: &str) -> Option<f64> {
        self.param_names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.ci[i])
    }
}

/// Jacobian of the model at the given natural parameters over `xs`
/// (rows = points, columns = parameters). Dispatches on
/// `spec.analytic_jacobian`; the numeric path uses central differences
/// with a per-parameter step `cbrt(eps) * max(|theta|, 1)`.
pub fn jacobian(spec: &ModelSpec, params: &[f64], xs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = spec.id.n_params();
    if params.len() != p {
        return Err(Error::InvalidParameter(format!(
            "model `{}` takes {p} parameters, got {}",
            spec.id.name(),
            params.len()
        )));
    }
    for (&v, &name) in params.iter().zip(spec.id.param_names()) {
        ensure_finite(name, v)?;
    }
    let mut rows = Vec::with_capacity(xs.len());
    if spec.analytic_jacobian {
        let mut grad = vec![0.0; p];
        for &x in xs {
            spec.id.gradient(params, x, &mut grad);
            rows.push(grad.clone());
        }
    } else {
        let rel = f64::EPSILON.cbrt();
        let mut theta = params.to_vec();
        for &x in xs {
            let mut grad = vec![0.0; p];
            for (j, g) in grad.iter_mut().enumerate() {
                let h = rel * params[j].abs().max(1.0);
                theta[j] = params[j] + h;
                let hi = spec.id.eval(&theta, x);
                theta[j] = params[j] - h;
                let lo = spec.id.eval(&theta, x);
                theta[j] = params[j];
                *g = (hi - lo) / (2.0 * h);
            }
            rows.push(grad);
        }
    }
    Ok(rows)
}

/// Starting parameters estimated from the data; see
/// [`ModelId::initial_guess`].
pub fn initial_guess(model: ModelId, data: &DataSeries) -> Result<Vec<f64>> {
    model.initial_guess(data)
}

struct Workspace<'a> {
    spec: &'a ModelSpec,
    data: &'a DataSeries,
    weights: Vec<f64>,
    transforms: Vec<models::Transform>,
}

impl Workspace<'_> {
    fn natural(&self, internal: &[f64]) -> Vec<f64> {
        internal
            .iter()
            .zip(&self.transforms)
            .map(|(&u, t)| t.to_natural(u))
            .collect()
    }

    /// Sum of squared weighted residuals; infinite when the model
    /// produced a non-finite value.
    fn cost(&self, natural: &[f64]) -> f64 {
        let mut total = 0.0;
        for (&x, (&y, &w)) in self.data.x().iter().zip(self.data.y().iter().zip(&self.weights)) {
            let r = (y - self.spec.id.eval(natural, x)) * w;
            if !r.is_finite() {
                return f64::INFINITY;
            }
            total += r * r;
        }
        total
    }

    fn residuals(&self, natural: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.data.len(),
            self.data
                .x()
                .iter()
                .zip(self.data.y().iter().zip(&self.weights))
                .map(|(&x, (&y, &w))| (y - self.spec.id.eval(natural, x)) * w),
        )
    }

    /// Weighted Jacobian in internal coordinates.
    fn jacobian_internal(&self, internal: &[f64], natural: &[f64]) -> Result<DMatrix<f64>> {
        let rows = jacobian(self.spec, natural, self.data.x())?;
        let slopes: Vec<f64> = internal
            .iter()
            .zip(&self.transforms)
            .map(|(&u, t)| t.slope(u))
            .collect();
        let p = slopes.len();
        let mut j = DMatrix::zeros(self.data.len(), p);
        for (i, row) in rows.iter().enumerate() {
            for (jj, (&g, &s)) in row.iter().zip(&slopes).enumerate() {
                j[(i, jj)] = g * s * self.weights[i];
            }
        }
        Ok(j)
    }
}

/// Name of the parameter with the smallest normal-matrix diagonal: the
/// least-constrained direction, reported on rank deficiency.
fn weakest_param(spec: &ModelSpec, diag: &DVector<f64>) -> String {
    let mut weakest = 0;
    for j in 1..diag.len() {
        if diag[j] < diag[weakest] {
            weakest = j;
        }
    }
    spec.id.param_names()[weakest].to_string()
}

/// Fit `spec` to `data`, starting from `initial` natural parameters when
/// given and the data-driven guess otherwise.
pub fn fit(
    spec: &ModelSpec,
    data: &DataSeries,
    initial: Option<&[f64]>,
    options: &FitOptions,
) -> Result<FitResult> {
    let p = spec.id.n_params();
    let n = data.len();
    if n < p + 1 {
        return Err(Error::InsufficientData(format!(
            "model `{}` has {p} parameters; need at least {} points, got {n}",
            spec.id.name(),
            p + 1
        )));
    }
    if spec.id.requires_nonnegative_x() && data.x()[0] < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "model `{}` is defined for x >= 0, but the data start at {}",
            spec.id.name(),
            data.x()[0]
        )));
    }

    let start = match initial {
        Some(given) => {
            if given.len() != p {
                return Err(Error::InvalidParameter(format!(
                    "model `{}` takes {p} parameters, got {} initial values",
                    spec.id.name(),
                    given.len()
                )));
            }
            for (&v, &name) in given.iter().zip(spec.id.param_names()) {
                ensure_finite(name, v)?;
            }
            given.to_vec()
        }
        None => spec.id.initial_guess(data)?,
    };

    let transforms = spec.id.transforms();
    let mut internal = Vec::with_capacity(p);
    for ((t, &theta), &name) in transforms.iter().zip(&start).zip(spec.id.param_names()) {
        internal.push(t.to_internal(name, theta)?);
    }

    let weights = match data.sigma() {
        Some(s) => s.iter().map(|&v| 1.0 / v).collect(),
        None => vec![1.0; n],
    };
    let ws = Workspace {
        spec,
        data,
        weights,
        transforms,
    };

    let mut natural = ws.natural(&internal);
    let mut cost = ws.cost(&natural);
    if !cost.is_finite() {
        return Err(Error::InvalidParameter(
            "model evaluates to a non-finite value at the initial parameters".into(),
        ));
    }

    let mut lambda = options.lambda_init;
    let mut converged = false;
    let mut iterations = 0;
    const LAMBDA_MAX: f64 = 1e14;

    while iterations < options.max_iterations {
        iterations += 1;
        let j = ws.jacobian_internal(&internal, &natural)?;
        let residuals = ws.residuals(&natural);
        let normal = j.transpose() * &j;
        let gradient = j.transpose() * residuals;
        let diag = normal.diagonal();
        for jj in 0..p {
            if !diag[jj].is_finite() || diag[jj] <= 0.0 {
                return Err(Error::RankDeficient(
                    spec.id.param_names()[jj].to_string(),
                ));
            }
        }

        // Inner loop: retry with larger lambda until a step is accepted
        // or lambda saturates.
        let mut stepped = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = normal.clone();
            for jj in 0..p {
                damped[(jj, jj)] += lambda * diag[jj];
            }
            let Some(chol) = Cholesky::new(damped) else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&gradient);
            let too_far = step
                .iter()
                .zip(&ws.transforms)
                .any(|(&d, t)| t.step_cap().is_some_and(|cap| d.abs() > cap));
            if too_far {
                lambda *= 10.0;
                continue;
            }
            let candidate: Vec<f64> = internal
                .iter()
                .zip(step.iter())
                .zip(&ws.transforms)
                .map(|((&u, &d), t)| t.clamp_internal(u + d))
                .collect();
            let candidate_natural = ws.natural(&candidate);
            let candidate_cost = ws.cost(&candidate_natural);
            if candidate_cost.is_finite() && candidate_cost < cost {
                let decrease = (cost - candidate_cost) / cost.max(f64::MIN_POSITIVE);
                let step_norm = step.norm();
                internal = candidate;
                natural = candidate_natural;
                cost = candidate_cost;
                lambda = (lambda / 10.0).max(1e-15);
                stepped = true;
                if decrease < options.cost_tolerance
                    || step_norm < options.step_tolerance
                {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !stepped {
            // No acceptable step at any damping: the optimizer cannot
            // improve the cost beyond floating-point resolution.
            converged = converged || !stepped;
            break;
        }
    }

    // Delta-method uncertainty at the solution, in natural units.
    let j_nat_rows = jacobian(spec, &natural, data.x())?;
    let mut j_nat = DMatrix::zeros(n, p);
    for (i, row) in j_nat_rows.iter().enumerate() {
        for (jj, &g) in row.iter().enumerate() {
            j_nat[(i, jj)] = g * ws.weights[i];
        }
    }
    let normal = j_nat.transpose() * &j_nat;
    let diag = normal.diagonal();
    let Some(chol) = Cholesky::new(normal.clone()) else {
        return Err(Error::RankDeficient(weakest_param(spec, &diag)));
    };
    let inverse = chol.inverse();
    let dof = (n - p).max(1) as f64;
    let scale = if data.sigma().is_some() {
        1.0
    } else {
        cost / dof
    };
    let covariance: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|jj| inverse[(i, jj)] * scale).collect())
        .collect();
    let z = options.ci_level.z();
    let ci: Vec<f64> = (0..p).map(|i| z * covariance[i][i].max(0.0).sqrt()).collect();

    Ok(FitResult {
        model: spec.id,
        params: natural.clone(),
        ci,
        ci_level: options.ci_level,
        covariance,
        residual_rms: (cost / n as f64).sqrt(),
        reduced_chi2: data.sigma().is_some().then_some(cost / dof),
        converged,
        iterations,
        derived: spec.id.derived(&natural),
    })
}
