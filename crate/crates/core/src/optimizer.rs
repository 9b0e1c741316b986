//! Bounded derivative-free maximization with quadratic interpolation models.
//!
//! The method follows Powell's BOBYQA: an interpolation set of `npt` points
//! defines a quadratic model whose Hessian changes by the smallest Frobenius
//! norm whenever a point is replaced; steps come from a box-constrained
//! trust-region subproblem; the trust-region radius `delta` is adapted from the
//! ratio of actual to predicted reduction and the resolution `rho` decreases
//! from `rho_begin` to `rho_end`. Geometry-improving steps keep the set
//! well-poised when far points degrade the model.
//!
//! Internally the objective is minimized as `-f`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::ExtrinsicParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid(
                "bounds must be non-empty and of equal length",
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid(
                "lower bounds must be strictly below upper bounds",
            ));
        }
        Ok(Self { lower, upper })
    }

    /// Box of half-width `radius` around `center`.
    pub fn around(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub rho_begin: f64,
    pub rho_end: f64,
    pub max_evaluations: usize,
    /// Interpolation set size; `None` selects `2n + 1`.
    pub interpolation_points: Option<usize>,
    /// Soft restarts from the incumbent at `rho_begin` after convergence.
    /// Restarting stops early once a restart fails to improve the incumbent.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rho_begin: 1.0,
            rho_end: 1e-3,
            max_evaluations: 2000,
            interpolation_points: None,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RadiusConverged,
    EvaluationBudget,
    Stalled,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::RadiusConverged => "radius-converged",
            Termination::EvaluationBudget => "eval-budget",
            Termination::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub evaluations_used: usize,
    pub termination: Termination,
}

/// Evaluation log for debugging objective surfaces.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub entries: Vec<(Vec<f64>, f64)>,
}

impl Trace {
    /// Wraps `f` so every call is recorded.
    pub fn record<'a, F>(&'a mut self, mut f: F) -> impl FnMut(&[f64]) -> f64 + 'a
    where
        F: FnMut(&[f64]) -> f64 + 'a,
    {
        move |x| {
            let v = f(x);
            self.entries.push((x.to_vec(), v));
            v
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.entries.first().map_or(0, |e| e.0.len());
        let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "eval,{},value", header.join(","))?;
        for (i, (x, v)) in self.entries.iter().enumerate() {
            let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{i},{},{v}", xs.join(","))?;
        }
        Ok(())
    }
}

/// Maximizes `f` over the box, starting from `x0` strictly inside it.
pub fn maximize<F>(
    mut f: F,
    x0: &[f64],
    bounds: &Bounds,
    config: &OptimizerConfig,
) -> Result<OptimizationResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = bounds.dim();
    if x0.len() != n {
        return Err(Error::invalid(format!(
            "start point has {} components, bounds have {n}",
            x0.len()
        )));
    }
    if x0
        .iter()
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .any(|(x, (l, u))| !(x > l && x < u))
    {
        return Err(Error::invalid(
            "start point must lie strictly inside the bounds",
        ));
    }
    if !(config.rho_end > 0.0 && config.rho_end < config.rho_begin) {
        return Err(Error::invalid(format!(
            "need 0 < rho_end < rho_begin (got {} and {})",
            config.rho_end, config.rho_begin
        )));
    }
    let min_width = bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(l, u)| u - l)
        .fold(f64::INFINITY, f64::min);
    if min_width < 2.0 * config.rho_begin {
        return Err(Error::invalid(format!(
            "every bound interval must be at least 2*rho_begin = {} wide",
            2.0 * config.rho_begin
        )));
    }
    let npt = config.interpolation_points.unwrap_or(2 * n + 1);
    if npt < n + 2 || npt > (n + 1) * (n + 2) / 2 {
        return Err(Error::invalid(format!(
            "interpolation_points must lie in [{}, {}] for dimension {n}",
            n + 2,
            (n + 1) * (n + 2) / 2
        )));
    }
    if config.max_evaluations == 0 {
        return Err(Error::invalid("max_evaluations must be positive"));
    }

    let mut solver = Solver {
        n,
        npt,
        bounds,
        config,
        f: &mut f,
        evals: 0,
        points: Vec::with_capacity(npt),
        values: Vec::with_capacity(npt),
        kopt: 0,
        best: None,
        hessian: DMatrix::zeros(n, n),
        gradient: DVector::zeros(n),
        scale: config.rho_begin,
        kkt: None,
    };
    let mut termination = solver.run(x0);
    for _ in 0..config.restarts {
        let before = solver.best.as_ref().map(|b| b.1);
        if termination != Termination::RadiusConverged || before.is_none() {
            break;
        }
        let start = solver
            .best
            .as_ref()
            .map(|b| b.0.clone())
            .unwrap_or_default();
        solver.reset();
        termination = solver.run(&start);
        if solver.best.as_ref().map(|b| b.1) <= before {
            break;
        }
    }
    let (best_params, best_value) = solver
        .best
        .clone()
        .unwrap_or_else(|| (x0.to_vec(), f64::NEG_INFINITY));
    Ok(OptimizationResult {
        best_params,
        best_value,
        evaluations_used: solver.evals,
        termination,
    })
}

struct Solver<'a, F> {
    n: usize,
    npt: usize,
    bounds: &'a Bounds,
    config: &'a OptimizerConfig,
    f: &'a mut F,
    evals: usize,
    /// Interpolation points and the minimized values `-f` used by the model.
    points: Vec<DVector<f64>>,
    values: Vec<f64>,
    kopt: usize,
    /// Best finite evaluation in maximization terms.
    best: Option<(Vec<f64>, f64)>,
    hessian: DMatrix<f64>,
    gradient: DVector<f64>,
    /// Length unit of the KKT system, tied to `rho` for conditioning.
    scale: f64,
    kkt: Option<nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

/// Outcome of one evaluation: `None` for a non-finite value.
type Eval = Option<f64>;

enum Geometry {
    Moved,
    NotNeeded,
    OutOfBudget,
}

impl<F: FnMut(&[f64]) -> f64> Solver<'_, F> {
    fn budget_left(&self) -> bool {
        self.evals < self.config.max_evaluations
    }

    fn evaluate(&mut self, x: &mut DVector<f64>) -> Eval {
        self.bounds.clamp(x.as_mut_slice());
        self.evals += 1;
        let v = (self.f)(x.as_slice());
        if !v.is_finite() {
            return None;
        }
        if self.best.as_ref().map_or(true, |(_, b)| v > *b) {
            self.best = Some((x.as_slice().to_vec(), v));
        }
        Some(-v)
    }

    fn reset(&mut self) {
        self.points.clear();
        self.values.clear();
        self.kopt = 0;
        self.hessian.fill(0.0);
        self.gradient.fill(0.0);
        self.scale = self.config.rho_begin;
        self.kkt = None;
    }

    fn xopt(&self) -> &DVector<f64> {
        &self.points[self.kopt]
    }

    fn run(&mut self, x0: &[f64]) -> Termination {
        let mut rho = self.config.rho_begin;
        let mut delta = rho;

        if !self.initialize(x0, rho) {
            return if self.budget_left() {
                Termination::Stalled
            } else {
                Termination::EvaluationBudget
            };
        }
        self.scale = rho;
        if !self.refit() {
            return Termination::Stalled;
        }

        // set after a geometry move evaluates to a non-finite value, so the
        // same move is not retried until rho shrinks or a step succeeds
        let mut geometry_blocked = false;
        loop {
            if !self.budget_left() {
                return Termination::EvaluationBudget;
            }
            let step = self.trust_region_step(delta);
            let step_norm = step.norm();

            if step_norm < 0.5 * rho {
                let shrink_only = delta > rho;
                delta = (0.1 * delta).max(rho);
                match self.improve_geometry(&mut geometry_blocked, delta, rho) {
                    Geometry::Moved => continue,
                    Geometry::OutOfBudget => return Termination::EvaluationBudget,
                    Geometry::NotNeeded => {}
                }
                if shrink_only {
                    continue;
                }
                geometry_blocked = false;
                match self.reduce_rho(&mut rho, &mut delta) {
                    Some(t) => return t,
                    None => continue,
                }
            }

            let predicted = -self.model_change(&step);
            let fopt = self.values[self.kopt];
            let mut xnew = self.xopt() + &step;
            let ratio = match self.evaluate(&mut xnew) {
                None => {
                    let penalty = self.penalty();
                    self.include(xnew, penalty, delta);
                    -1.0
                }
                Some(fnew) => {
                    let ratio = if predicted > 0.0 {
                        (fopt - fnew) / predicted
                    } else {
                        -1.0
                    };
                    self.include(xnew, fnew, delta);
                    ratio
                }
            };

            delta = if ratio <= 0.1 {
                (0.5 * delta).min(step_norm)
            } else if ratio <= 0.7 {
                (0.5 * delta).max(step_norm)
            } else {
                (0.5 * delta).max(2.0 * step_norm)
            };
            if delta <= 1.5 * rho {
                delta = rho;
            }

            if ratio > 0.1 {
                geometry_blocked = false;
                continue;
            }
            match self.improve_geometry(&mut geometry_blocked, delta, rho) {
                Geometry::Moved => continue,
                Geometry::OutOfBudget => return Termination::EvaluationBudget,
                Geometry::NotNeeded => {}
            }
            if ratio > 0.0 || delta.max(step_norm) > rho * (1.0 + 1e-9) {
                continue;
            }
            geometry_blocked = false;
            if let Some(t) = self.reduce_rho(&mut rho, &mut delta) {
                return t;
            }
        }
    }

    fn reduce_rho(&mut self, rho: &mut f64, delta: &mut f64) -> Option<Termination> {
        let rho_end = self.config.rho_end;
        if *rho <= rho_end {
            return Some(Termination::RadiusConverged);
        }
        let old = *rho;
        *rho = if old > 250.0 * rho_end {
            0.1 * old
        } else if old > 16.0 * rho_end {
            (old * rho_end).sqrt()
        } else {
            rho_end
        };
        *delta = (0.5 * old).max(*rho);
        self.scale = *rho;
        if !self.refit() {
            return Some(Termination::Stalled);
        }
        None
    }

    /// Evaluates the initial coordinate design. Returns false if the budget
    /// runs out first.
    fn initialize(&mut self, x0: &[f64], rho: f64) -> bool {
        let n = self.n;
        let (lower, upper) = (&self.bounds.lower, &self.bounds.upper);
        let x0 = DVector::from_column_slice(x0);
        let mut first = vec![0.0; n];
        let mut design = vec![x0.clone()];
        for i in 0..n {
            let s1 = if x0[i] + rho <= upper[i] { rho } else { -rho };
            first[i] = s1;
            let mut p = x0.clone();
            p[i] += s1;
            design.push(p);
        }
        for i in 0..n {
            let s1 = first[i];
            let s2 = if x0[i] - s1 >= lower[i] && x0[i] - s1 <= upper[i] {
                -s1
            } else if s1 > 0.0 {
                (2.0 * rho).min(upper[i] - x0[i])
            } else {
                (-2.0 * rho).max(lower[i] - x0[i])
            };
            let mut p = x0.clone();
            p[i] += s2;
            design.push(p);
        }
        let mut pairs = (0..n).flat_map(|p| ((p + 1)..n).map(move |q| (p, q)));
        while design.len() < self.npt {
            let (p, q) = pairs.next().expect("npt is bounded by (n+1)(n+2)/2");
            let mut y = x0.clone();
            y[p] += first[p];
            y[q] += first[q];
            design.push(y);
        }

        let mut raw = Vec::with_capacity(self.npt);
        for mut y in design {
            if !self.budget_left() {
                return false;
            }
            let v = self.evaluate(&mut y);
            self.points.push(y);
            raw.push(v);
        }
        let finite: Vec<f64> = raw.iter().flatten().copied().collect();
        if finite.is_empty() {
            return false;
        }
        // non-finite starting values get a penalty above the worst finite one
        let hi = finite.iter().copied().fold(f64::MIN, f64::max);
        let lo = finite.iter().copied().fold(f64::MAX, f64::min);
        let penalty = hi + (hi - lo) + 1.0;
        self.values = raw.iter().map(|v| v.unwrap_or(penalty)).collect();
        self.kopt = argmin(&self.values);
        true
    }

    fn scaled_offsets(&self) -> Vec<DVector<f64>> {
        let xopt = self.xopt();
        self.points
            .iter()
            .map(|y| (y - xopt) / self.scale)
            .collect()
    }

    /// Refits the model to the current interpolation set with a minimum
    /// Frobenius-norm change of the Hessian. Returns false if the KKT system is
    /// singular.
    fn refit(&mut self) -> bool {
        let (n, m) = (self.n, self.npt);
        let s = self.scaled_offsets();
        let dim = m + n + 1;
        let mut w = DMatrix::zeros(dim, dim);
        for i in 0..m {
            for j in 0..m {
                w[(i, j)] = 0.5 * s[i].dot(&s[j]).powi(2);
            }
            w[(i, m)] = 1.0;
            w[(m, i)] = 1.0;
            for k in 0..n {
                w[(i, m + 1 + k)] = s[i][k];
                w[(m + 1 + k, i)] = s[i][k];
            }
        }
        let lu = w.lu();
        let scaled_hessian = &self.hessian * (self.scale * self.scale);
        let mut rhs = DVector::zeros(dim);
        for i in 0..m {
            rhs[i] = self.values[i] - 0.5 * s[i].dot(&(&scaled_hessian * &s[i]));
        }
        let Some(sol) = lu.solve(&rhs) else {
            return false;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let mut new_hessian = scaled_hessian;
        for j in 0..m {
            new_hessian += (&s[j] * s[j].transpose()) * sol[j];
        }
        self.hessian = new_hessian / (self.scale * self.scale);
        self.gradient = sol.rows(m + 1, n).into_owned() / self.scale;
        self.kkt = Some(lu);
        true
    }

    /// Model change `q(xopt + s) - q(xopt)`.
    fn model_change(&self, s: &DVector<f64>) -> f64 {
        self.gradient.dot(s) + 0.5 * s.dot(&(&self.hessian * s))
    }

    /// Values of all Lagrange functions at `x`.
    fn lagrange_values(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let (n, m) = (self.n, self.npt);
        let lu = self.kkt.as_ref()?;
        let s = self.scaled_offsets();
        let d = (x - self.xopt()) / self.scale;
        let mut rhs = DVector::zeros(m + n + 1);
        for j in 0..m {
            rhs[j] = 0.5 * s[j].dot(&d).powi(2);
        }
        rhs[m] = 1.0;
        for k in 0..n {
            rhs[m + 1 + k] = d[k];
        }
        lu.solve(&rhs).map(|z| z.rows(0, m).into_owned())
    }

    /// Coefficients of the Lagrange function of point `k` in scaled offsets:
    /// `(lambda, constant, gradient)`.
    fn lagrange_function(&self, k: usize) -> Option<(DVector<f64>, f64, DVector<f64>)> {
        let (n, m) = (self.n, self.npt);
        let mut e = DVector::zeros(m + n + 1);
        e[k] = 1.0;
        let z = self.kkt.as_ref()?.solve(&e)?;
        Some((
            z.rows(0, m).into_owned(),
            z[m],
            z.rows(m + 1, n).into_owned(),
        ))
    }

    /// Adds `x` to the set, replacing the point whose removal keeps the set
    /// best poised.
    fn include(&mut self, x: DVector<f64>, value: f64, delta: f64) {
        let improved = value < self.values[self.kopt];
        let Some(ell) = self.lagrange_values(&x) else {
            return;
        };
        let xopt = self.xopt().clone();
        let mut order: Vec<(usize, f64)> = (0..self.npt)
            .filter(|&k| improved || k != self.kopt)
            .map(|k| {
                let dist2 = (&self.points[k] - &xopt).norm_squared();
                let weight = (dist2 / (delta * delta)).powi(2).max(1.0);
                (k, weight * ell[k] * ell[k])
            })
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (k, score) in order {
            if score <= 1e-14 {
                break;
            }
            if self.replace(k, x.clone(), value) {
                return;
            }
        }
    }

    /// Replaces point `k`; reverts and returns false if the model cannot be fit.
    fn replace(&mut self, k: usize, x: DVector<f64>, value: f64) -> bool {
        let saved = (
            std::mem::replace(&mut self.points[k], x),
            self.values[k],
            self.kopt,
            self.hessian.clone(),
            self.gradient.clone(),
        );
        self.values[k] = value;
        self.kopt = argmin(&self.values);
        if self.refit() {
            return true;
        }
        self.points[k] = saved.0;
        self.values[k] = saved.1;
        self.kopt = saved.2;
        self.hessian = saved.3;
        self.gradient = saved.4;
        self.refit();
        false
    }

    /// Farthest interpolation point if it lies beyond `max(2 delta, 10 rho)`.
    fn far_point(&self, delta: f64, rho: f64) -> Option<usize> {
        let limit = (2.0 * delta).max(10.0 * rho);
        let xopt = self.xopt();
        let (k, dist) = self
            .points
            .iter()
            .enumerate()
            .map(|(k, y)| (k, (y - xopt).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        (dist > limit).then_some(k)
    }

    fn improve_geometry(&mut self, blocked: &mut bool, delta: f64, rho: f64) -> Geometry {
        if *blocked {
            return Geometry::NotNeeded;
        }
        let Some(k) = self.far_point(delta, rho) else {
            return Geometry::NotNeeded;
        };
        if !self.budget_left() {
            return Geometry::OutOfBudget;
        }
        if self.geometry_step(k, delta, rho) {
            Geometry::Moved
        } else {
            *blocked = true;
            Geometry::NotNeeded
        }
    }

    /// Moves far point `k` to a nearby position where its Lagrange function is
    /// large. Returns false if no move was made.
    fn geometry_step(&mut self, k: usize, delta: f64, rho: f64) -> bool {
        let xopt = self.xopt().clone();
        let dist = (&self.points[k] - &xopt).norm();
        let radius = (0.1 * dist).min(delta).max(rho);
        let Some((lambda, constant, grad)) = self.lagrange_function(k) else {
            return false;
        };
        let offsets = self.scaled_offsets();
        let ell = |x: &DVector<f64>| {
            let d = (x - &xopt) / self.scale;
            let quad: f64 = offsets
                .iter()
                .zip(lambda.iter())
                .map(|(s, l)| 0.5 * l * s.dot(&d).powi(2))
                .sum();
            quad + constant + grad.dot(&d)
        };

        let mut directions: Vec<DVector<f64>> = self
            .points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.kopt)
            .map(|(_, y)| y - &xopt)
            .collect();
        directions.push(grad.clone());
        let mut best: Option<(DVector<f64>, f64)> = None;
        for dir in directions {
            let norm = dir.norm();
            if norm <= 0.0 {
                continue;
            }
            for t in [1.0, -1.0, 0.5, -0.5] {
                let mut cand = &xopt + &dir * (t * radius / norm);
                self.bounds.clamp(cand.as_mut_slice());
                if (&cand - &xopt).norm() < 1e-3 * radius {
                    continue;
                }
                let score = ell(&cand).abs();
                if best.as_ref().map_or(true, |(_, s)| score > *s) {
                    best = Some((cand, score));
                }
            }
        }
        let Some((mut x, _)) = best else {
            return false;
        };
        match self.evaluate(&mut x) {
            Some(v) => self.replace(k, x, v),
            None => {
                let penalty = self.penalty();
                self.replace(k, x, penalty);
                false
            }
        }
    }

    /// Model value for a non-finite evaluation: worse than every point in the set.
    fn penalty(&self) -> f64 {
        let hi = self.values.iter().copied().fold(f64::MIN, f64::max);
        let lo = self.values.iter().copied().fold(f64::MAX, f64::min);
        let spread = hi - lo;
        hi + if spread > 0.0 { spread } else { 1.0 }
    }

    /// Approximate minimizer of the model in `{|s| <= delta} ∩ box`:
    /// truncated conjugate gradients, fixing variables as they reach a bound.
    fn trust_region_step(&self, delta: f64) -> DVector<f64> {
        let n = self.n;
        let xopt = self.xopt();
        let (lower, upper) = (&self.bounds.lower, &self.bounds.upper);
        let g = &self.gradient;
        let h = &self.hessian;
        let mut s = DVector::zeros(n);
        let mut free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lower = xopt[i] <= lower[i] && g[i] >= 0.0;
                let at_upper = xopt[i] >= upper[i] && g[i] <= 0.0;
                !(at_lower || at_upper)
            })
            .collect();
        let mask = |v: &mut DVector<f64>, free: &[bool]| {
            for (x, f) in v.iter_mut().zip(free) {
                if !f {
                    *x = 0.0;
                }
            }
        };

        'restart: for _ in 0..=n {
            let mut r = -(g + h * &s);
            mask(&mut r, &free);
            let mut p = r.clone();
            let mut rr = r.norm_squared();
            for _ in 0..n {
                if rr <= 1e-24 * (1.0 + g.norm_squared()) {
                    return s;
                }
                let hp = {
                    let mut v = h * &p;
                    mask(&mut v, &free);
                    v
                };
                let curvature = p.dot(&hp);
                // step length to the trust-region boundary
                let (sp, pp, ss) = (s.dot(&p), p.norm_squared(), s.norm_squared());
                let disc = (sp * sp + pp * (delta * delta - ss)).max(0.0);
                let alpha_tr = (disc.sqrt() - sp) / pp;
                // step length to the nearest bound among free variables
                let mut alpha_bd = f64::INFINITY;
                let mut hit = None;
                for i in 0..n {
                    if !free[i] || p[i] == 0.0 {
                        continue;
                    }
                    let room = if p[i] > 0.0 {
                        upper[i] - xopt[i] - s[i]
                    } else {
                        lower[i] - xopt[i] - s[i]
                    };
                    let a = (room / p[i]).max(0.0);
                    if a < alpha_bd {
                        alpha_bd = a;
                        hit = Some(i);
                    }
                }
                let alpha_cg = if curvature > 0.0 {
                    rr / curvature
                } else {
                    f64::INFINITY
                };
                let alpha = alpha_cg.min(alpha_tr).min(alpha_bd);
                s += &p * alpha;
                if alpha == alpha_tr && alpha_tr <= alpha_bd {
                    return s;
                }
                if alpha == alpha_bd {
                    if let Some(i) = hit {
                        s[i] = if p[i] > 0.0 {
                            upper[i] - xopt[i]
                        } else {
                            lower[i] - xopt[i]
                        };
                        free[i] = false;
                    }
                    continue 'restart;
                }
                let r_new = &r - &hp * alpha;
                let rr_new = r_new.norm_squared();
                p = &r_new + &p * (rr_new / rr);
                r = r_new;
                rr = rr_new;
            }
            break;
        }
        s
    }
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Per-parameter conditioning factors: scaled = params * factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamScaling {
    pub factors: [f64; 6],
}

impl Default for ParamScaling {
    /// One scaled unit is 1 degree of rotation or 5 cm of translation.
    fn default() -> Self {
        Self {
            factors: [1.0, 1.0, 1.0, 20.0, 20.0, 20.0],
        }
    }
}

impl ParamScaling {
    pub fn new(factors: [f64; 6]) -> Result<Self> {
        if factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid(
                "scaling factors must be finite and positive",
            ));
        }
        Ok(Self { factors })
    }

    pub fn scale(&self, params: &ExtrinsicParams) -> [f64; 6] {
        let v = params.to_array();
        std::array::from_fn(|i| v[i] * self.factors[i])
    }

    pub fn unscale(&self, scaled: &[f64; 6]) -> ExtrinsicParams {
        ExtrinsicParams::from_array(std::array::from_fn(|i| scaled[i] / self.factors[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(c: &[f64]) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x| -x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn interior_sphere_optimum() {
        let c = [1.5, -2.0, 0.3, 4.0, -0.7, 2.2];
        let bounds = Bounds::around(&[0.0; 6], 10.0).unwrap();
        let cfg = OptimizerConfig::default();
        let res = maximize(sphere(&c), &[0.0; 6], &bounds, &cfg).unwrap();
        assert!(dist(&res.best_params, &c) < 10.0 * cfg.rho_end, "{res:?}");
        assert!(res.evaluations_used <= cfg.max_evaluations);
        assert_eq!(res.termination, Termination::RadiusConverged);
    }

    #[test]
    fn optimum_outside_box_lands_on_projection() {
        let c = [3.0, -4.0, 0.5];
        let bounds = Bounds::new(vec![-2.0; 3], vec![2.0; 3]).unwrap();
        let cfg = OptimizerConfig::default();
        let res = maximize(sphere(&c), &[0.1, 0.2, -0.3], &bounds, &cfg).unwrap();
        assert!(
            dist(&res.best_params, &[2.0, -2.0, 0.5]) < 10.0 * cfg.rho_end,
            "{res:?}"
        );
    }

    #[test]
    fn start_must_be_strictly_inside() {
        let bounds = Bounds::new(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let cfg = OptimizerConfig {
            rho_begin: 0.5,
            ..Default::default()
        };
        assert!(maximize(|_| 0.0, &[1.0, 0.0], &bounds, &cfg).is_err());
        assert!(maximize(|_| 0.0, &[0.0], &bounds, &cfg).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bounds = Bounds::new(vec![-5.0; 2], vec![5.0; 2]).unwrap();
        let bad = [
            OptimizerConfig {
                rho_end: 2.0,
                ..Default::default()
            },
            OptimizerConfig {
                interpolation_points: Some(3),
                ..Default::default()
            },
            OptimizerConfig {
                interpolation_points: Some(7),
                ..Default::default()
            },
            OptimizerConfig {
                rho_begin: 6.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                maximize(|_| 0.0, &[0.0, 0.0], &bounds, &cfg).is_err(),
                "{cfg:?}"
            );
        }
        assert!(Bounds::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn non_finite_values_are_rejected_not_fatal() {
        let bounds = Bounds::around(&[0.0; 2], 5.0).unwrap();
        let f = |x: &[f64]| {
            if x[0] > 2.5 {
                f64::NAN
            } else {
                -(x[0] - 2.0).powi(2) - (x[1] + 1.0).powi(2)
            }
        };
        let cfg = OptimizerConfig::default();
        let res = maximize(f, &[0.0, 0.0], &bounds, &cfg).unwrap();
        assert!(
            dist(&res.best_params, &[2.0, -1.0]) < 10.0 * cfg.rho_end,
            "{res:?}"
        );

        // optimum beyond a NaN cliff: the result stays finite and improves on x0
        let cliff = |x: &[f64]| if x[0] > 1.0 { f64::NAN } else { f(x) };
        let res = maximize(cliff, &[0.0, 0.0], &bounds, &cfg).unwrap();
        assert!(res.best_value.is_finite() && res.best_value >= cliff(&[0.0, 0.0]));
        assert!(res.best_params[0] <= 1.0);
    }

    #[test]
    fn budget_is_respected() {
        let bounds = Bounds::around(&[0.0; 6], 10.0).unwrap();
        let cfg = OptimizerConfig {
            max_evaluations: 20,
            ..Default::default()
        };
        let mut calls = 0;
        let res = maximize(
            |x| {
                calls += 1;
                sphere(&[3.0; 6])(x)
            },
            &[0.0; 6],
            &bounds,
            &cfg,
        )
        .unwrap();
        assert_eq!(res.evaluations_used, 20);
        assert_eq!(calls, 20);
        assert_eq!(res.termination, Termination::EvaluationBudget);
    }

    #[test]
    fn larger_interpolation_sets_work() {
        let c = [0.5, -0.25, 1.0];
        let bounds = Bounds::around(&[0.0; 3], 5.0).unwrap();
        for npt in [5, 7, 10] {
            let cfg = OptimizerConfig {
                interpolation_points: Some(npt),
                ..Default::default()
            };
            let res = maximize(sphere(&c), &[0.0; 3], &bounds, &cfg).unwrap();
            assert!(
                dist(&res.best_params, &c) < 10.0 * cfg.rho_end,
                "npt={npt} {res:?}"
            );
        }
    }

    #[test]
    fn restarts_escape_premature_convergence() {
        // a kinked ridge with small-scale ripple stalls a single pass
        let f = |x: &[f64]| {
            -(8.0 * (x[0] - 0.3 * x[1]).abs() + (x[1] - 4.0).abs())
                + 0.002 * (40.0 * x[0]).sin() * (37.0 * x[1]).cos()
        };
        let bounds = Bounds::around(&[0.0; 2], 10.0).unwrap();
        let single = OptimizerConfig {
            restarts: 0,
            ..Default::default()
        };
        let one = maximize(f, &[2.0, -3.0], &bounds, &single).unwrap();
        let many = maximize(f, &[2.0, -3.0], &bounds, &OptimizerConfig::default()).unwrap();
        assert!(many.best_value >= one.best_value);
        assert!(many.evaluations_used <= 2000);
    }

    #[test]
    fn rosenbrock_valley() {
        let f = |x: &[f64]| -(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let bounds = Bounds::around(&[0.0; 2], 3.0).unwrap();
        let cfg = OptimizerConfig {
            rho_begin: 0.5,
            rho_end: 1e-6,
            max_evaluations: 5000,
            ..Default::default()
        };
        let res = maximize(f, &[-1.2, 1.0], &bounds, &cfg).unwrap();
        assert!(dist(&res.best_params, &[1.0, 1.0]) < 1e-3, "{res:?}");
    }

    #[test]
    fn scaling_examples() {
        let s = ParamScaling::default();
        let p = ExtrinsicParams::new([1.0, 0.0, 0.0], [0.05, 0.0, 0.0]);
        let v = s.scale(&p);
        for (a, b) in v.iter().zip([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let q = ExtrinsicParams::new([12.3, -45.6, 7.8], [0.11, -2.5, 1.25]);
        let back = s.unscale(&s.scale(&q)).to_array();
        for (a, b) in back.iter().zip(q.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(ParamScaling::new([1.0, 1.0, 1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn trace_records_every_evaluation() {
        let bounds = Bounds::around(&[0.0; 2], 5.0).unwrap();
        let mut trace = Trace::default();
        let res = maximize(
            trace.record(|x: &[f64]| -(x[0] * x[0] + x[1] * x[1])),
            &[1.0, 1.0],
            &bounds,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.entries.len(), res.evaluations_used);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eval,x0,x1,value\n"));
        assert_eq!(text.lines().count(), res.evaluations_used + 1);
    }
}
