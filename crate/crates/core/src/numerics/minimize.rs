//! Limited-memory quasi-Newton minimization with gradient projection onto a box.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Default number of correction pairs kept by the quasi-Newton update.
pub const DEFAULT_MEMORY: usize = 10;
/// Default projected-gradient tolerance, relative to `max(1, |f|)`.
pub const DEFAULT_GRADIENT_TOLERANCE: f64 = 1e-5;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Objective callbacks return `(value, gradient)`. A non-finite value marks
/// the point as infeasible for the objective; the line search backs off.
pub struct BoundedProblem<F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    pub objective: F,
    /// Use `f64::NEG_INFINITY` for an absent bound.
    pub lower: Vec<f64>,
    /// Use `f64::INFINITY` for an absent bound.
    pub upper: Vec<f64>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Stop when the relative decrease of one step falls below this; 0 disables.
    pub function_tolerance: f64,
    pub memory: usize,
}

impl<F> BoundedProblem<F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    pub fn new(objective: F, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        BoundedProblem {
            objective,
            lower,
            upper,
            max_iterations: 1000,
            gradient_tolerance: DEFAULT_GRADIENT_TOLERANCE,
            function_tolerance: 0.0,
            memory: DEFAULT_MEMORY,
        }
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn gradient_tolerance(mut self, tol: f64) -> Self {
        self.gradient_tolerance = tol;
        self
    }

    pub fn function_tolerance(mut self, tol: f64) -> Self {
        self.function_tolerance = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    /// No finite decrease could be found along the projected search path.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.max(*lo).min(*hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Coordinates held at a bound by a gradient pointing outward.
fn active_mask(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<bool> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (lo, hi))| (*xi <= *lo && *gi > 0.0) || (*xi >= *hi && *gi < 0.0))
        .collect()
}

pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (lo, hi))| {
            let step = (xi - gi).max(*lo).min(*hi);
            (step - xi).abs()
        })
        .fold(0.0, f64::max)
}

/// Runs the minimizer from `start` (clipped into the box). Every iterate is
/// feasible and the objective never increases between accepted iterates.
pub fn minimize_bounded<F>(problem: &mut BoundedProblem<F>, start: &[f64]) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = start.len();
    if problem.lower.len() != n || problem.upper.len() != n {
        return Err(Error::Usage(format!(
            "bounds have lengths {}/{}, start has {n}",
            problem.lower.len(),
            problem.upper.len()
        )));
    }
    if problem.lower.iter().zip(&problem.upper).any(|(lo, hi)| lo > hi) {
        return Err(Error::Usage("lower bound exceeds upper bound".into()));
    }
    let (lower, upper) = (problem.lower.clone(), problem.upper.clone());

    let mut x = start.to_vec();
    project(&mut x, &lower, &upper);
    let (mut f, mut g) = (problem.objective)(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("objective is not finite at the starting point ({f})")));
    }

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trace = vec![f];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < problem.max_iterations {
        if projected_gradient_norm(&x, &g, &lower, &upper) <= problem.gradient_tolerance * f.abs().max(1.0) {
            termination = Termination::GradientTolerance;
            break;
        }
        iterations += 1;

        let active = active_mask(&x, &g, &lower, &upper);
        let masked = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&active).map(|(vi, a)| if *a { 0.0 } else { *vi }).collect()
        };

        // Two-loop recursion on the free subspace.
        let mut q = masked(&g);
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = masked(&q).into_iter().map(|v| -v).collect();
        if dot(&g, &d) >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            memory.clear();
            d = masked(&g).into_iter().map(|v| -v).collect();
        }

        let mut alpha = if memory.is_empty() {
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dmax > 1.0 {
                1.0 / dmax
            } else {
                1.0
            }
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            project(&mut xn, &lower, &upper);
            if xn == x {
                break;
            }
            let (fn_, gn) = (problem.objective)(&xn);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if fn_.is_finite()
                && gn.iter().all(|v| v.is_finite())
                && fn_ <= f + ARMIJO_C1 * dot(&g, &step)
            {
                accepted = Some((xn, fn_, gn, step));
                break;
            }
            alpha *= 0.5;
        }

        let Some((xn, fn_, gn, s)) = accepted else {
            if memory.is_empty() {
                termination = Termination::LineSearchFailed;
                break;
            }
            memory.clear();
            continue;
        };

        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > problem.memory.max(1) {
                memory.pop_front();
            }
        }

        let decrease = f - fn_;
        x = xn;
        f = fn_;
        g = gn;
        trace.push(f);
        if problem.function_tolerance > 0.0
            && decrease <= problem.function_tolerance * f.abs().max(1.0)
        {
            termination = Termination::FunctionTolerance;
            break;
        }
    }

    if termination == Termination::MaxIterations
        && projected_gradient_norm(&x, &g, &lower, &upper) <= problem.gradient_tolerance * f.abs().max(1.0)
    {
        termination = Termination::GradientTolerance;
    }

    Ok(Minimum {
        argmin: x,
        value: f,
        gradient: g,
        iterations,
        converged: termination == Termination::GradientTolerance,
        termination,
        trace,
    })
}
