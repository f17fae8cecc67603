//! Unconstrained quasi-Newton minimisation: dense BFGS and limited-memory
//! L-BFGS, both driven by a strong Wolfe line search.

mod gradient;
mod line_search;

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradient::{central_difference, gradient, GradientMode};

/// A differentiable objective over `R^n`.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Value and analytic gradient.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// Adapts a pair of closures to [`Objective`].
pub struct FnObjective<F, G> {
    dim: usize,
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(dim: usize, f: F, g: G) -> Self {
        Self { dim, f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        ((self.f)(x), (self.g)(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bfgs,
    #[default]
    Lbfgs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bfgs => "bfgs",
            Method::Lbfgs => "lbfgs",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "bfgs" => Ok(Method::Bfgs),
            "lbfgs" => Ok(Method::Lbfgs),
            other => Err(Error::param(format!("unknown solver method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// L-BFGS history length.
    pub memory: usize,
    pub max_iters: usize,
    /// Infinity-norm gradient tolerance.
    pub grad_tol: f64,
    /// Relative decrease threshold; three consecutive iterations below it
    /// stop the solve. Zero disables the test.
    pub f_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// L-BFGS only: scale the initial inverse Hessian by `sᵀy / yᵀy` of the
    /// newest pair. When false the initial matrix is the identity, as in BFGS.
    pub lbfgs_scaling: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Lbfgs,
            memory: 10,
            max_iters: 200,
            grad_tol: 1e-6,
            f_tol: 1e-10,
            c1: 1e-4,
            c2: 0.9,
            lbfgs_scaling: true,
        }
    }
}

impl SolverConfig {
    pub fn bfgs() -> Self {
        Self {
            method: Method::Bfgs,
            ..Self::default()
        }
    }

    pub fn lbfgs() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::param(format!(
                "line search constants must satisfy 0 < c1 < c2 < 1, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        if self.memory == 0 {
            return Err(Error::param("L-BFGS memory must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::param("grad_tol must be positive"));
        }
        if !(self.f_tol >= 0.0) {
            return Err(Error::param("f_tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    ConvergedGrad,
    ConvergedF,
    MaxIters,
    LineSearchFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::ConvergedGrad => "converged_grad",
            SolveStatus::ConvergedF => "converged_f",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::LineSearchFailure => "line_search_failure",
        }
    }
}

/// One accepted line-search step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub alpha: f64,
    pub f_before: f64,
    pub f_after: f64,
    /// ∇f(x)ᵀp at the start of the step.
    pub slope_before: f64,
    /// ∇f(x + αp)ᵀp at the accepted point.
    pub slope_after: f64,
    /// Sufficient decrease was judged in derivative form because the
    /// predicted decrease was below rounding of f.
    pub approximate: bool,
}

impl StepRecord {
    /// Checks the strong Wolfe conditions the step was accepted under.
    ///
    /// For `approximate` steps the Armijo test is replaced by
    /// `f_after ≤ f_before + 1e-12·|f_before|` and
    /// `slope_after ≤ (2c1 − 1)·slope_before`.
    pub fn satisfies_wolfe(&self, c1: f64, c2: f64) -> bool {
        let decrease = if self.approximate {
            self.f_after <= self.f_before + line_search::ROUNDING * self.f_before.abs()
                && self.slope_after <= (2.0 * c1 - 1.0) * self.slope_before
        } else {
            self.f_after <= self.f_before + c1 * self.alpha * self.slope_before
        };
        decrease
            && self.slope_after >= c2 * self.slope_before
            && self.slope_after.abs() <= -c2 * self.slope_before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x_final: Vec<f64>,
    pub f_initial: f64,
    pub f_final: f64,
    /// Infinity norm of the gradient at `x_final`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: SolveStatus,
    pub steps: Vec<StepRecord>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse-Hessian approximation shared by both methods.
enum Curvature {
    Dense(DMatrix<f64>),
    Limited {
        memory: usize,
        scaling: bool,
        pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    },
}

impl Curvature {
    fn new(cfg: &SolverConfig, n: usize) -> Self {
        match cfg.method {
            Method::Bfgs => Curvature::Dense(DMatrix::identity(n, n)),
            Method::Lbfgs => Curvature::Limited {
                memory: cfg.memory,
                scaling: cfg.lbfgs_scaling,
                pairs: VecDeque::with_capacity(cfg.memory),
            },
        }
    }

    /// Search direction `-H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        match self {
            Curvature::Dense(h) => {
                let d = h * DVector::from_column_slice(g);
                d.iter().map(|v| -v).collect()
            }
            Curvature::Limited { scaling, pairs, .. } => {
                let mut q = g.to_vec();
                let mut alphas = Vec::with_capacity(pairs.len());
                for (s, y, rho) in pairs.iter().rev() {
                    let a = rho * dot(s, &q);
                    for (qi, yi) in q.iter_mut().zip(y) {
                        *qi -= a * yi;
                    }
                    alphas.push(a);
                }
                if *scaling {
                    if let Some((s, y, _)) = pairs.back() {
                        let gamma = dot(s, y) / dot(y, y);
                        q.iter_mut().for_each(|v| *v *= gamma);
                    }
                }
                for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
                    let b = rho * dot(y, &q);
                    for (qi, si) in q.iter_mut().zip(s) {
                        *qi += (a - b) * si;
                    }
                }
                q.iter().map(|v| -v).collect()
            }
        }
    }

    /// Incorporates a step; skipped unless `sᵀy > 0`.
    fn update(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let scale = dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if !(sy > f64::EPSILON * scale) {
            return false;
        }
        let rho = 1.0 / sy;
        match self {
            Curvature::Dense(h) => {
                let n = s.len();
                let s = DVector::from_vec(s);
                let y = DVector::from_vec(y);
                let hy = &*h * &y;
                let yhy = y.dot(&hy);
                // H⁺ = H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
                let coef = rho * rho * yhy + rho;
                for i in 0..n {
                    for j in 0..n {
                        h[(i, j)] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + coef * s[i] * s[j];
                    }
                }
            }
            Curvature::Limited { memory, pairs, .. } => {
                if pairs.len() == *memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, rho));
            }
        }
        true
    }
}

/// Minimises `obj` from `x0`.
///
/// Returns `Err` only for invalid configuration or a non-finite objective;
/// line-search breakdown is reported through [`SolveStatus::LineSearchFailure`]
/// with the last accepted iterate.
pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::param(format!(
            "start point has {} entries, objective expects {}",
            x0.len(),
            obj.dim()
        )));
    }
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.value_and_gradient(&x);
    let mut evaluations = 1;
    if !f.is_finite() {
        return Err(Error::Numeric(format!(
            "objective is {f} at the start point"
        )));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "gradient coordinate {i} is {} at the start point",
            g[i]
        )));
    }
    let f_initial = f;
    let mut curvature = Curvature::new(cfg, x.len());
    let mut steps = Vec::new();
    let mut small_decreases = 0;
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if inf_norm(&g) <= cfg.grad_tol {
            status = SolveStatus::ConvergedGrad;
            break;
        }
        let mut dir = curvature.direction(&g);
        if !(dot(&dir, &g) < 0.0) {
            // Lost descent; restart from steepest descent.
            curvature = Curvature::new(cfg, x.len());
            dir = g.iter().map(|v| -v).collect();
        }
        // The first step has no curvature information; normalise it.
        let alpha0 = if steps.is_empty() {
            1.0 / dot(&dir, &dir).sqrt()
        } else {
            1.0
        };
        let (search, evals) =
            line_search::strong_wolfe(obj, &x, f, &g, &dir, alpha0, cfg.c1, cfg.c2)?;
        evaluations += evals;
        let (trial, approximate) = match search {
            line_search::Search::Accepted(t, a) => (t, a),
            line_search::Search::Failed => {
                status = SolveStatus::LineSearchFailure;
                break;
            }
        };
        iterations += 1;
        steps.push(StepRecord {
            alpha: trial.alpha,
            f_before: f,
            f_after: trial.f,
            slope_before: dot(&g, &dir),
            slope_after: trial.slope,
            approximate,
        });
        let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let decrease = f - trial.f;
        let reference = f.abs().max(trial.f.abs());
        x = trial.x;
        f = trial.f;
        g = trial.grad;
        curvature.update(s, y);

        if cfg.f_tol > 0.0 && decrease <= cfg.f_tol * reference {
            small_decreases += 1;
            if small_decreases >= 3 {
                status = SolveStatus::ConvergedF;
                break;
            }
        } else {
            small_decreases = 0;
        }
    }
    if status == SolveStatus::MaxIters && inf_norm(&g) <= cfg.grad_tol {
        status = SolveStatus::ConvergedGrad;
    }

    Ok(SolveOutcome {
        grad_norm: inf_norm(&g),
        x_final: x,
        f_initial,
        f_final: f,
        iterations,
        evaluations,
        status,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl Objective {
        let c2 = c.clone();
        FnObjective::new(
            c.len(),
            move |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum(),
            move |x: &[f64]| x.iter().zip(&c2).map(|(a, b)| 2.0 * (a - b)).collect(),
        )
    }

    fn rosenbrock() -> impl Objective {
        FnObjective::new(
            2,
            |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            |x: &[f64]| {
                vec![
                    -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                    200.0 * (x[1] - x[0] * x[0]),
                ]
            },
        )
    }

    #[test]
    fn sphere_converges_quickly() {
        for cfg in [SolverConfig::bfgs(), SolverConfig::lbfgs()] {
            let c = vec![3.0, -1.0, 0.5];
            let out = minimize(&quadratic(c.clone()), &[10.0, 10.0, -7.0], &cfg).unwrap();
            assert!(out.iterations <= 3, "{:?}", out.status);
            for (a, b) in out.x_final.iter().zip(&c) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rosenbrock_converges() {
        for cfg in [SolverConfig::bfgs(), SolverConfig::lbfgs()] {
            let out = minimize(&rosenbrock(), &[-1.2, 1.0], &cfg).unwrap();
            assert!(out.f_final < 1e-8, "{cfg:?}: {out:?}");
            assert!(out.iterations <= 200);
            assert!(out.steps.iter().all(|s| s.satisfies_wolfe(cfg.c1, cfg.c2)));
            assert!(out.steps.windows(2).all(|w| w[1].f_after <= w[0].f_after));
        }
    }

    #[test]
    fn already_optimal_start() {
        let out = minimize(
            &quadratic(vec![1.0, 2.0]),
            &[1.0, 2.0],
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(out.status, SolveStatus::ConvergedGrad);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn memory_bounds_history() {
        let cfg = SolverConfig {
            memory: 2,
            ..SolverConfig::lbfgs()
        };
        let mut curv = Curvature::new(&cfg, 2);
        for k in 1..6 {
            curv.update(vec![k as f64, 0.0], vec![k as f64, 0.5]);
        }
        match curv {
            Curvature::Limited { pairs, .. } => assert_eq!(pairs.len(), 2),
            _ => unreachable!(),
        }
    }

    #[test]
    fn negative_curvature_pairs_are_skipped() {
        let mut curv = Curvature::new(&SolverConfig::bfgs(), 2);
        assert!(!curv.update(vec![1.0, 0.0], vec![-1.0, 0.0]));
        match curv {
            Curvature::Dense(h) => assert_eq!(h, DMatrix::identity(2, 2)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let obj = FnObjective::new(1, |_: &[f64]| f64::NAN, |_: &[f64]| vec![0.0]);
        assert!(matches!(
            minimize(&obj, &[0.0], &SolverConfig::default()),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SolverConfig {
            c1: 0.9,
            c2: 0.1,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            memory: 0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn deterministic_iterates() {
        let a = minimize(&rosenbrock(), &[-1.2, 1.0], &SolverConfig::default()).unwrap();
        let b = minimize(&rosenbrock(), &[-1.2, 1.0], &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
