//! Bound-constrained minimization with equality constraints.
//!
//! Equalities are handled by an augmented-Lagrangian outer loop
//! `φ(x) = f(x) + μᵀc(x) + ρ/2 ‖c(x)‖²`; each subproblem is minimized over the box by a
//! projected Newton method when the problem supplies second derivatives, and by
//! projected L-BFGS otherwise.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Finite-difference step used by the derivative fallbacks.
pub fn fd_step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

/// A smooth problem `min f(x)` s.t. `c(x) = 0`, `lower ≤ x ≤ upper`.
pub trait NlpProblem: Sync {
    fn dim(&self) -> usize;

    fn num_constraints(&self) -> usize {
        0
    }

    fn objective(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = fd_step(x[i]);
                y[i] = x[i] + h;
                let fp = self.objective(&y);
                y[i] = x[i] - h;
                let fm = self.objective(&y);
                y[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    fn constraints(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    /// Dense `m × n` constraint Jacobian.
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (m, n) = (self.num_constraints(), x.len());
        let mut j = DMatrix::zeros(m, n);
        let mut y = x.to_vec();
        for i in 0..n {
            let h = fd_step(x[i]);
            y[i] = x[i] + h;
            let cp = self.constraints(&y);
            y[i] = x[i] - h;
            let cm = self.constraints(&y);
            y[i] = x[i];
            for r in 0..m {
                j[(r, i)] = (cp[r] - cm[r]) / (2.0 * h);
            }
        }
        j
    }

    /// `σ∇²f(x) + Σᵢ yᵢ∇²cᵢ(x)`, when available.
    fn lagrangian_hessian(&self, _x: &[f64], _sigma: f64, _y: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Per-variable `(lower, upper)`; infinite entries are unbounded.
    fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Newton when the problem provides a Hessian, L-BFGS otherwise.
    Auto,
    Newton,
    Lbfgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub constraint_tol: f64,
    pub optimality_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    pub inner: InnerSolver,
    pub lbfgs_memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            constraint_tol: 1e-7,
            optimality_tol: 1e-6,
            max_outer: 40,
            max_inner: 500,
            initial_penalty: 10.0,
            max_penalty: 1e12,
            inner: InnerSolver::Auto,
            lbfgs_memory: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub objective: f64,
    pub violation: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `‖c(x)‖∞`.
    pub constraint_violation: f64,
    /// `‖P(x − ∇L) − x‖∞` with the final multipliers.
    pub optimality: f64,
    /// Inner iterations summed over all subproblems.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub multipliers: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

impl NlpResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,inner,objective,violation,penalty\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.outer,
                r.inner,
                crate::numfmt::sig9(r.objective),
                crate::numfmt::sig9(r.violation),
                crate::numfmt::sig9(r.penalty)
            );
        }
        s
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Box_ {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Box_ {
    fn project(&self, x: &mut [f64]) {
        for ((v, &l), &h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(l, h);
        }
    }

    fn projected_gradient(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (&xi, &gi))| ((xi - gi).clamp(self.lo[i], self.hi[i]) - xi).abs())
            .fold(0.0, f64::max)
    }

    /// Variables held at a bound by a gradient pushing outward.
    fn active(&self, x: &[f64], g: &[f64]) -> Vec<bool> {
        (0..x.len())
            .map(|i| (x[i] <= self.lo[i] + 1e-12 && g[i] > 0.0) || (x[i] >= self.hi[i] - 1e-12 && g[i] < 0.0))
            .collect()
    }
}

/// Augmented Lagrangian for fixed `μ`, `ρ`.
struct Merit<'a, P: NlpProblem + ?Sized> {
    problem: &'a P,
    mu: &'a [f64],
    rho: f64,
}

impl<P: NlpProblem + ?Sized> Merit<'_, P> {
    fn value(&self, x: &[f64]) -> f64 {
        let c = self.problem.constraints(x);
        let lin: f64 = self.mu.iter().zip(&c).map(|(m, c)| m * c).sum();
        let sq: f64 = c.iter().map(|c| c * c).sum();
        self.problem.objective(x) + lin + 0.5 * self.rho * sq
    }

    /// Gradient plus the constraint weights `μ + ρc` and Jacobian it was built from.
    fn gradient(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
        let mut g = self.problem.gradient(x);
        let c = self.problem.constraints(x);
        let weights: Vec<f64> = self.mu.iter().zip(&c).map(|(m, c)| m + self.rho * c).collect();
        let j = if c.is_empty() {
            DMatrix::zeros(0, x.len())
        } else {
            self.problem.jacobian(x)
        };
        if !c.is_empty() {
            let jt_w = j.tr_mul(&DVector::from_column_slice(&weights));
            for (gi, v) in g.iter_mut().zip(jt_w.iter()) {
                *gi += v;
            }
        }
        (g, weights, j)
    }
}

/// Minimizes `problem` from `x0` (projected onto the box first).
pub fn minimize<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], opts: &MinimizeOptions) -> Result<NlpResult> {
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: x0.len() });
    }
    let (lo, hi) = problem
        .bounds()
        .unwrap_or_else(|| (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n]));
    let bx = Box_ { lo, hi };
    let mut x = x0.to_vec();
    bx.project(&mut x);
    let f0 = problem.objective(&x);
    let c0 = problem.constraints(&x);
    if !f0.is_finite() || c0.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("objective or constraints not finite at the initial point".into()));
    }
    let m = c0.len();
    let use_newton = match opts.inner {
        InnerSolver::Newton => true,
        InnerSolver::Lbfgs => false,
        InnerSolver::Auto => problem.lagrangian_hessian(&x, 1.0, &vec![0.0; m]).is_some(),
    };
    let inner_tol = 1e-3 * opts.optimality_tol;

    let mut mu = vec![0.0; m];
    let mut rho = opts.initial_penalty;
    let mut prev_violation = f64::INFINITY;
    let mut result = NlpResult {
        x: x.clone(),
        objective: f0,
        constraint_violation: inf_norm(&c0),
        optimality: f64::INFINITY,
        iterations: 0,
        outer_iterations: 0,
        converged: false,
        multipliers: mu.clone(),
        trace: Vec::new(),
    };
    let mut best: Option<NlpResult> = None;
    for outer in 0..opts.max_outer.max(1) {
        let merit = Merit { problem, mu: &mu, rho };
        let inner = if use_newton {
            newton_inner(&merit, &bx, &mut x, inner_tol, opts.max_inner)?
        } else {
            lbfgs_inner(&merit, &bx, &mut x, inner_tol, opts.max_inner, opts.lbfgs_memory)
        };
        result.iterations += inner;
        let c = problem.constraints(&x);
        let v = inf_norm(&c);
        let (g, _, _) = merit.gradient(&x);
        let opt = stationarity(problem, &bx, &x, &g);
        let obj = problem.objective(&x);
        if !obj.is_finite() || !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite iterate in outer iteration {outer}")));
        }
        result.trace.push(TraceRow {
            outer,
            inner,
            objective: obj,
            violation: v,
            penalty: rho,
        });
        for (mi, ci) in mu.iter_mut().zip(&c) {
            *mi += rho * ci;
        }
        result.x.clone_from(&x);
        result.objective = obj;
        result.constraint_violation = v;
        result.optimality = opt;
        result.outer_iterations = outer + 1;
        result.multipliers.clone_from(&mu);
        let score = |r: &NlpResult| (r.constraint_violation / opts.constraint_tol).max(r.optimality / opts.optimality_tol);
        if best.as_ref().is_none_or(|b| score(&result) <= score(b)) {
            best = Some(result.clone());
        }
        if v <= opts.constraint_tol && opt <= opts.optimality_tol {
            result.converged = true;
            return Ok(result);
        }
        if v > opts.constraint_tol && v > 0.25 * prev_violation {
            rho = (rho * 10.0).min(opts.max_penalty);
        }
        prev_violation = v;
    }
    let mut out = best.unwrap_or(result.clone());
    out.iterations = result.iterations;
    out.outer_iterations = result.outer_iterations;
    out.trace = result.trace;
    Ok(out)
}

/// Projected gradient of the Lagrangian at least-squares multipliers.
/// The active set comes from the merit gradient `g`; the AL gradient itself is not used because
/// its `ρJᵀJ` curvature amplifies round-off in `x` far above the tolerance.
fn stationarity<P: NlpProblem + ?Sized>(problem: &P, bx: &Box_, x: &[f64], g: &[f64]) -> f64 {
    let mut gl = problem.gradient(x);
    let j = problem.jacobian(x);
    if j.nrows() > 0 {
        let active = bx.active(x, g);
        let free: Vec<usize> = (0..x.len()).filter(|&i| !active[i]).collect();
        if !free.is_empty() {
            let jf = DMatrix::from_fn(free.len(), j.nrows(), |a, r| j[(r, free[a])]);
            let rhs = DVector::from_fn(free.len(), |a, _| -gl[free[a]]);
            if let Ok(mu) = jf.svd(true, true).solve(&rhs, 1e-12) {
                let jt_mu = j.tr_mul(&mu);
                for (gi, t) in gl.iter_mut().zip(jt_mu.iter()) {
                    *gi += t;
                }
            }
        }
    }
    bx.projected_gradient(x, &gl)
}

/// Armijo search along the projection arc `P(x + s·d)`.
fn arc_search<P: NlpProblem + ?Sized>(
    merit: &Merit<P>,
    bx: &Box_,
    x: &[f64],
    f0: f64,
    g: &[f64],
    d: &[f64],
) -> Option<(Vec<f64>, f64)> {
    let mut s = 1.0;
    while s > 1e-14 {
        let mut xn: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + s * di).collect();
        bx.project(&mut xn);
        let decrease: f64 = g.iter().zip(xn.iter().zip(x)).map(|(gi, (a, b))| gi * (a - b)).sum();
        let fnew = merit.value(&xn);
        if fnew.is_finite() && fnew <= f0 + 1e-4 * decrease {
            return Some((xn, fnew));
        }
        s *= 0.5;
    }
    None
}

/// `h += ρ JᵀJ`, accumulated row by row over the nonzeros of `J`.
fn add_gauss_newton(h: &mut DMatrix<f64>, j: &DMatrix<f64>, rho: f64) {
    let mut nz: Vec<(usize, f64)> = Vec::new();
    for r in 0..j.nrows() {
        nz.clear();
        nz.extend((0..j.ncols()).filter_map(|c| {
            let v = j[(r, c)];
            (v != 0.0).then_some((c, v))
        }));
        for &(a, va) in &nz {
            let s = rho * va;
            for &(b, vb) in &nz {
                h[(a, b)] += s * vb;
            }
        }
    }
}

fn newton_inner<P: NlpProblem + ?Sized>(
    merit: &Merit<P>,
    bx: &Box_,
    x: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = x.len();
    let mut f = merit.value(x);
    let mut full_steps = 0;
    for it in 0..max_iter {
        let (g, weights, j) = merit.gradient(x);
        if bx.projected_gradient(x, &g) <= tol {
            return Ok(it);
        }
        let mut h = merit
            .problem
            .lagrangian_hessian(x, 1.0, &weights)
            .ok_or_else(|| Error::Domain("Newton inner solver needs a Lagrangian Hessian".into()))?;
        add_gauss_newton(&mut h, &j, merit.rho);
        let active = bx.active(x, &g);
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let mut d = vec![0.0; n];
        if !free.is_empty() {
            let k = free.len();
            let hf = DMatrix::from_fn(k, k, |a, b| h[(free[a], free[b])]);
            let gf = DVector::from_fn(k, |a, _| g[free[a]]);
            let diag_max = (0..k).map(|a| hf[(a, a)].abs()).fold(0.0, f64::max).max(1e-300);
            let mut shift = 0.0;
            let chol = loop {
                let mut m = hf.clone();
                for a in 0..k {
                    m[(a, a)] += shift;
                }
                if let Some(c) = Cholesky::new(m) {
                    break c;
                }
                shift = if shift == 0.0 { 1e-10 * diag_max.max(1.0) } else { shift * 10.0 };
                if shift > 1e20 * diag_max.max(1.0) {
                    return Err(Error::Numeric("could not regularize the Newton system".into()));
                }
            };
            let step = chol.solve(&gf);
            for (a, &i) in free.iter().enumerate() {
                d[i] = -step[a];
            }
        }
        let predicted: f64 = -g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        if predicted >= 0.0 && predicted <= 1e-13 * f.abs().max(1.0) {
            // decrease below round-off in the merit; Armijo cannot resolve it, so take the full step
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            bx.project(&mut xn);
            let moved = xn.iter().zip(x.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = x.iter().map(|v| v.abs()).fold(1.0, f64::max);
            *x = xn;
            f = merit.value(x);
            full_steps += 1;
            if moved <= 1e-15 * scale || full_steps >= 3 {
                return Ok(it + 1);
            }
            continue;
        }
        full_steps = 0;
        match arc_search(merit, bx, x, f, &g, &d) {
            Some((xn, fnew)) => {
                let stalled = (f - fnew).abs() <= 1e-16 * f.abs().max(1.0);
                *x = xn;
                f = fnew;
                if stalled {
                    return Ok(it + 1);
                }
            }
            None => {
                // Newton direction failed; one projected gradient step before giving up
                let sd: Vec<f64> = g.iter().map(|v| -v).collect();
                match arc_search(merit, bx, x, f, &g, &sd) {
                    Some((xn, fnew)) => {
                        *x = xn;
                        f = fnew;
                    }
                    None => return Ok(it + 1),
                }
            }
        }
    }
    Ok(max_iter)
}

fn lbfgs_inner<P: NlpProblem + ?Sized>(
    merit: &Merit<P>,
    bx: &Box_,
    x: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
    memory: usize,
) -> usize {
    let n = x.len();
    let mut f = merit.value(x);
    let mut g = merit.gradient(x).0;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for it in 0..max_iter {
        if bx.projected_gradient(x, &g) <= tol {
            return it;
        }
        let active = bx.active(x, &g);
        // two-loop recursion restricted to the free variables
        let mut q: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { g[i] }).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot_free(s, &q, &active);
            for i in 0..n {
                if !active[i] {
                    q[i] -= a * y[i];
                }
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot_free(s, y, &active) / dot_free(y, y, &active).max(1e-300);
            if gamma.is_finite() && gamma > 0.0 {
                q.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot_free(y, &q, &active);
            for i in 0..n {
                if !active[i] {
                    q[i] += s[i] * (a - b);
                }
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot_free(&d, &g, &active) >= 0.0 {
            pairs.clear();
            d = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect();
        }
        let Some((xn, fnew)) = arc_search(merit, bx, x, f, &g, &d) else {
            if pairs.is_empty() {
                return it + 1;
            }
            pairs.clear();
            continue;
        };
        let gn = merit.gradient(&xn).0;
        let s: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt() {
            pairs.push_back((s, y, 1.0 / sy));
            if pairs.len() > memory {
                pairs.pop_front();
            }
        }
        let stalled = (f - fnew).abs() <= 1e-16 * f.abs().max(1.0);
        *x = xn;
        f = fnew;
        g = gn;
        if stalled {
            return it + 1;
        }
    }
    max_iter
}

fn dot_free(a: &[f64], b: &[f64], active: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(active)
        .filter(|(_, &act)| !act)
        .map(|((x, y), _)| x * y)
        .sum()
}

/// Largest componentwise relative mismatch between the analytic gradient and central
/// differences at `x`.
pub fn gradient_check<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> f64 {
    let g = problem.gradient(x);
    let mut y = x.to_vec();
    let scale = inf_norm(&g).max(1.0);
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            y[i] = x[i] + h;
            let fp = problem.objective(&y);
            y[i] = x[i] - h;
            let fm = problem.objective(&y);
            y[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            (fd - g[i]).abs() / g[i].abs().max(1e-3 * scale)
        })
        .fold(0.0, f64::max)
}

/// Largest relative mismatch between the analytic Jacobian and central differences.
pub fn jacobian_check<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> f64 {
    let j = problem.jacobian(x);
    let mut y = x.to_vec();
    let scale = j.amax().max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        y[i] = x[i] + h;
        let cp = problem.constraints(&y);
        y[i] = x[i] - h;
        let cm = problem.constraints(&y);
        y[i] = x[i];
        for r in 0..cp.len() {
            let fd = (cp[r] - cm[r]) / (2.0 * h);
            worst = worst.max((fd - j[(r, i)]).abs() / j[(r, i)].abs().max(1e-3 * scale));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl NlpProblem for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] * x[0] + x[1] * x[1]
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![2.0 * x[0], 2.0 * x[1]]
        }
        fn constraints(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] + x[1] - 1.0]
        }
        fn jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0])
        }
        fn lagrangian_hessian(&self, _x: &[f64], sigma: f64, _y: &[f64]) -> Option<DMatrix<f64>> {
            Some(DMatrix::identity(2, 2) * (2.0 * sigma))
        }
    }

    struct Rosenbrock;

    impl NlpProblem for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        }
    }

    /// Finite-difference everything; bounded so the optimum sits on a face.
    struct BoxedFd;

    impl NlpProblem for BoxedFd {
        fn dim(&self) -> usize {
            3
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2) + x[2].powi(4) + x[2] * x[2]
        }
        fn constraints(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] * x[1] + x[2] - 0.5]
        }
        fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
            Some((vec![-1.0, 0.25, -1.0], vec![1.0, 1.0, 1.0]))
        }
    }

    #[test]
    fn quadratic_with_linear_constraint() {
        for inner in [InnerSolver::Newton, InnerSolver::Lbfgs] {
            let opts = MinimizeOptions { inner, ..Default::default() };
            let r = minimize(&Quadratic, &[3.0, -1.0], &opts).unwrap();
            assert!(r.converged, "{inner:?}");
            assert!((r.x[0] - 0.5).abs() < 1e-7 && (r.x[1] - 0.5).abs() < 1e-7, "{:?}", r.x);
            // multiplier of x₁ + x₂ = 1 under f + μc is −1
            assert!((r.multipliers[0] + 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let r = minimize(&Rosenbrock, &[-1.2, 1.0], &MinimizeOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn finite_difference_fallback_with_bounds() {
        let r = minimize(&BoxedFd, &[0.0, 0.5, 0.0], &MinimizeOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-9, "x₀ should sit on its upper bound: {:?}", r.x);
        assert!(r.x[1] >= 0.25 - 1e-12);
        assert!(r.constraint_violation <= 1e-7);
    }

    #[test]
    fn violation_non_increasing_on_quadratic() {
        let r = minimize(&Quadratic, &[10.0, 4.0], &MinimizeOptions::default()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1].violation <= w[0].violation + 1e-15));
    }

    #[test]
    fn analytic_gradient_passes_check() {
        assert!(gradient_check(&Rosenbrock, &[0.3, -0.7]) < 1e-4);
        assert!(jacobian_check(&Quadratic, &[0.3, -0.7]) < 1e-4);
    }

    #[test]
    fn bad_start_is_input_error() {
        struct Nan;
        impl NlpProblem for Nan {
            fn dim(&self) -> usize {
                1
            }
            fn objective(&self, x: &[f64]) -> f64 {
                x[0].ln()
            }
        }
        assert!(matches!(minimize(&Nan, &[-1.0], &MinimizeOptions::default()), Err(Error::Domain(_))));
        assert!(minimize(&Nan, &[1.0, 2.0], &MinimizeOptions::default()).is_err());
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let r = minimize(&Quadratic, &[1.0, 1.0], &MinimizeOptions::default()).unwrap();
        let csv = r.trace_csv();
        assert!(csv.starts_with("iteration,inner,objective,violation,penalty\n"));
        assert_eq!(csv.lines().count(), r.trace.len() + 1);
    }
}
