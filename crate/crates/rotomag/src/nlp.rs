//! Gradient-based constrained maximization.
//!
//! Both optimization front ends of the toolkit (remanence topology and
//! boundary shape) reduce to the same problem class: maximize a smooth
//! objective subject to smooth inequality constraints and box bounds, with
//! expensive evaluators whose objective and constraints share state.  The
//! solver here is an augmented-Lagrangian outer loop around a projected
//! L-BFGS inner iteration with Armijo backtracking.  Two presets are
//! exposed; they share the mechanics and differ in penalty schedule and
//! step acceptance.

use crate::error::{Error, Result};

/// Objective/constraint evaluator.  The objective is maximized and the
/// constraints are feasible when `g <= 0`.  Objective and constraints are
/// evaluated together because they usually share expensive state.
pub trait Evaluator {
    /// Number of design variables.
    fn dim(&self) -> usize;
    /// Number of inequality constraints.
    fn n_constraints(&self) -> usize {
        0
    }
    /// Evaluates at `x`; gradients are filled only when `want_gradients`.
    fn eval(&mut self, x: &[f64], want_gradients: bool) -> Result<Evaluation>;
}

/// One evaluator result.  `df` has `dim` entries and `dg` one row of `dim`
/// entries per constraint; both are empty when gradients were not requested.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub f: f64,
    pub g: Vec<f64>,
    pub df: Vec<f64>,
    pub dg: Vec<Vec<f64>>,
}

/// Evaluator from closures, for tests and simple problems.
pub struct FnEvaluator<F> {
    pub dim: usize,
    pub n_constraints: usize,
    pub f: F,
}

impl<F: FnMut(&[f64], bool) -> Result<Evaluation>> Evaluator for FnEvaluator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_constraints(&self) -> usize {
        self.n_constraints
    }
    fn eval(&mut self, x: &[f64], want_gradients: bool) -> Result<Evaluation> {
        (self.f)(x, want_gradients)
    }
}

/// Preset selecting penalty schedule and step acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Gentle penalty growth with loose-to-tight inner tolerances; robust
    /// from infeasible starts.
    InteriorPointLike,
    /// Aggressive penalty and tight inner solves from the first outer
    /// iteration; fast on small, well-scaled problems.
    SqpLike,
}

/// Solver settings.  `max_iter` caps the total number of inner iterations
/// (one evaluator call with gradients each), matching the iteration budget
/// quoted by optimization traces.
#[derive(Debug, Clone)]
pub struct Settings {
    pub max_iter: usize,
    pub constraint_tol: f64,
    pub gradient_tol: f64,
    pub algorithm: Algorithm,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_iter: 100,
            constraint_tol: 1e-6,
            gradient_tol: 1e-6,
            algorithm: Algorithm::InteriorPointLike,
        }
    }
}

/// One trace record per inner iteration.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub max_violation: f64,
    pub grad_norm: f64,
}

/// Optimization outcome: the best feasible iterate and the full trace.
#[derive(Debug, Clone)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub max_violation: f64,
    /// Projected stationarity residual of the Lagrangian at the returned x.
    pub kkt_residual: f64,
    pub trace: Vec<IterRecord>,
    pub converged: bool,
}

fn clamp_to_box(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].max(lower[i]).min(upper[i]);
    }
}

/// Infinity norm of the projected gradient of a merit function `phi`:
/// the step blocked by the box is not counted as residual.
fn projected_grad_norm(x: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut n: f64 = 0.0;
    for i in 0..x.len() {
        let moved = (x[i] - grad[i]).max(lower[i]).min(upper[i]) - x[i];
        n = n.max(moved.abs());
    }
    n
}

/// Limited-memory BFGS pair store with the standard two-loop recursion.
struct Lbfgs {
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    rho: Vec<f64>,
    cap: usize,
}

impl Lbfgs {
    fn new(cap: usize) -> Self {
        Lbfgs {
            s: Vec::new(),
            y: Vec::new(),
            rho: Vec::new(),
            cap,
        }
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        // Guard the curvature condition; skip pairs that would break
        // positive definiteness.
        if sy <= 1e-12 * yy.sqrt() * s.iter().map(|v| v * v).sum::<f64>().sqrt() || sy <= 0.0 {
            return;
        }
        if self.s.len() == self.cap {
            self.s.remove(0);
            self.y.remove(0);
            self.rho.remove(0);
        }
        self.rho.push(1.0 / sy);
        self.s.push(s);
        self.y.push(y);
    }

    /// Applies the inverse-Hessian estimate: `d = -H g`.
    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = grad.to_vec();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            axpy(-alpha[i], &self.y[i], &mut q);
        }
        if k > 0 {
            let yy = dot(&self.y[k - 1], &self.y[k - 1]);
            let gamma = 1.0 / (self.rho[k - 1] * yy.max(1e-300));
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for i in 0..k {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            axpy(alpha[i] - beta, &self.s[i], &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..y.len() {
        y[i] += a * x[i];
    }
}

/// Augmented-Lagrangian merit value and gradient at a fresh evaluation.
/// For each constraint, `psi = max(0, mu + rho g)^2 - mu^2` over `2 rho`.
fn merit(ev: &Evaluation, mu: &[f64], rho: f64, want_grad: bool, n: usize) -> (f64, Vec<f64>) {
    let mut phi = -ev.f;
    let mut grad = if want_grad {
        ev.df.iter().map(|v| -v).collect()
    } else {
        Vec::new()
    };
    for (j, &gj) in ev.g.iter().enumerate() {
        let t = mu[j] + rho * gj;
        if t > 0.0 {
            phi += (t * t - mu[j] * mu[j]) / (2.0 * rho);
            if want_grad {
                axpy(t, &ev.dg[j], &mut grad);
            }
        } else {
            phi -= mu[j] * mu[j] / (2.0 * rho);
        }
    }
    if want_grad && grad.len() != n {
        grad = vec![0.0; n];
    }
    (phi, grad)
}

fn max_violation(g: &[f64]) -> f64 {
    g.iter().fold(0.0f64, |m, &v| m.max(v))
}

/// Maximizes the evaluator's objective subject to its `g <= 0` constraints
/// and the box `lower <= x <= upper`, starting at `x0` (clamped into the
/// box).  Returns the best feasible iterate; if no iterate ever satisfied
/// the constraints within tolerance, an infeasibility error is returned.
pub fn maximize(
    ev: &mut dyn Evaluator,
    lower: &[f64],
    upper: &[f64],
    x0: &[f64],
    settings: &Settings,
) -> Result<OptOutcome> {
    let n = ev.dim();
    let nc = ev.n_constraints();
    if lower.len() != n || upper.len() != n || x0.len() != n {
        return Err(Error::config("bound/start dimensions disagree"));
    }
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(Error::config("empty box bounds"));
    }

    let (mut rho, rho_growth, inner_tol0) = match settings.algorithm {
        Algorithm::InteriorPointLike => (10.0, 10.0, 1e-2),
        Algorithm::SqpLike => (100.0, 4.0, 1e-4),
    };
    let mut mu = vec![0.0; nc];

    let mut x = x0.to_vec();
    clamp_to_box(&mut x, lower, upper);
    let mut cur = ev.eval(&x, true)?;
    let mut trace = Vec::new();
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut iter = 0usize;
    let mut inner_tol = inner_tol0;
    let mut converged = false;

    'outer: loop {
        let mut lbfgs = Lbfgs::new(8);
        let (mut phi, mut phi_grad) = merit(&cur, &mu, rho, true, n);
        loop {
            if iter >= settings.max_iter {
                break 'outer;
            }
            let viol = max_violation(&cur.g);
            let grad_norm = projected_grad_norm(&x, &phi_grad, lower, upper);
            trace.push(IterRecord {
                iter,
                x: x.clone(),
                f: cur.f,
                max_violation: viol,
                grad_norm,
            });
            if viol <= settings.constraint_tol {
                let better = match &best {
                    Some((_, fb, _)) => cur.f > *fb,
                    None => true,
                };
                if better {
                    best = Some((x.clone(), cur.f, viol));
                }
            }
            iter += 1;

            if grad_norm <= inner_tol {
                break;
            }

            // L-BFGS direction on the merit function, safeguarded to a
            // projected-gradient step when it is not a descent direction.
            let mut d = lbfgs.direction(&phi_grad);
            if dot(&d, &phi_grad) >= 0.0 {
                lbfgs.clear();
                d = phi_grad.iter().map(|v| -v).collect();
            }

            // Backtracking Armijo search along the projected arc.
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                clamp_to_box(&mut xt, lower, upper);
                let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                let pred = dot(&phi_grad, &step);
                if step.iter().all(|&s| s == 0.0) {
                    break;
                }
                let trial = ev.eval(&xt, true)?;
                let (phi_t, grad_t) = merit(&trial, &mu, rho, true, n);
                let armijo = phi_t <= phi + 1e-4 * pred;
                let accept = match settings.algorithm {
                    Algorithm::InteriorPointLike => armijo,
                    // The aggressive preset additionally refuses steps that
                    // substantially worsen feasibility.
                    Algorithm::SqpLike => {
                        armijo
                            && max_violation(&trial.g)
                                <= max_violation(&cur.g).max(settings.constraint_tol) * 4.0 + 1e-12
                    }
                };
                if accept {
                    let sdiff = step;
                    let ydiff: Vec<f64> =
                        grad_t.iter().zip(&phi_grad).map(|(a, b)| a - b).collect();
                    lbfgs.push(sdiff, ydiff);
                    x = xt;
                    cur = trial;
                    phi = phi_t;
                    phi_grad = grad_t;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // No progress at this penalty level; hand control back to
                // the outer loop.
                break;
            }
        }

        // Multiplier and penalty updates.
        let viol = max_violation(&cur.g);
        for j in 0..nc {
            mu[j] = (mu[j] + rho * cur.g[j]).max(0.0);
        }
        let stationary = {
            // Lagrangian gradient with the fresh multipliers.
            let mut lg: Vec<f64> = cur.df.iter().map(|v| -v).collect();
            for j in 0..nc {
                if mu[j] > 0.0 {
                    axpy(mu[j], &cur.dg[j], &mut lg);
                }
            }
            projected_grad_norm(&x, &lg, lower, upper)
        };
        if viol <= settings.constraint_tol && stationary <= settings.gradient_tol {
            converged = true;
            break;
        }
        if viol > settings.constraint_tol {
            rho = (rho * rho_growth).min(1e10);
        }
        inner_tol = (inner_tol * 0.2).max(settings.gradient_tol);
        if iter >= settings.max_iter {
            break;
        }
    }

    // Fall back to the final iterate when nothing was feasible but the run
    // ends within tolerance anyway (e.g. zero constraints).
    let final_viol = max_violation(&cur.g);
    if best.is_none() && final_viol <= settings.constraint_tol {
        best = Some((x.clone(), cur.f, final_viol));
    }
    let (bx, bf, bviol) = best.ok_or_else(|| {
        Error::numerical(format!(
            "no feasible point found (final constraint violation {final_viol:.3e})"
        ))
    })?;

    let kkt = {
        let at_best = ev.eval(&bx, true)?;
        let mut lg: Vec<f64> = at_best.df.iter().map(|v| -v).collect();
        for j in 0..nc {
            if mu[j] > 0.0 {
                axpy(mu[j], &at_best.dg[j], &mut lg);
            }
        }
        projected_grad_norm(&bx, &lg, lower, upper)
    };
    Ok(OptOutcome {
        x: bx,
        f: bf,
        max_violation: bviol,
        kkt_residual: kkt,
        trace,
        converged,
    })
}

/// Central finite-difference check of the evaluator's gradients at `x`.
/// Returns the worst relative discrepancy over the objective and all
/// constraints, measured against the larger of the two magnitudes.
pub fn check_gradient(ev: &mut dyn Evaluator, x: &[f64], h: f64) -> Result<f64> {
    let n = ev.dim();
    let base = ev.eval(x, true)?;
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = ev.eval(&xp, false)?;
        xp[i] = x[i] - h;
        let fm = ev.eval(&xp, false)?;
        xp[i] = x[i];
        let refscale = |a: f64, b: f64| a.abs().max(b.abs()).max(1e-8);
        let fd = (fp.f - fm.f) / (2.0 * h);
        worst = worst.max((fd - base.df[i]).abs() / refscale(fd, base.df[i]));
        for j in 0..ev.n_constraints() {
            let gd = (fp.g[j] - fm.g[j]) / (2.0 * h);
            worst = worst.max((gd - base.dg[j][i]).abs() / refscale(gd, base.dg[j][i]));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_bowl() -> FnEvaluator<impl FnMut(&[f64], bool) -> Result<Evaluation>> {
        FnEvaluator {
            dim: 2,
            n_constraints: 0,
            f: |x: &[f64], grads: bool| {
                Ok(Evaluation {
                    f: -(x[0] * x[0] + x[1] * x[1]),
                    g: vec![],
                    df: if grads {
                        vec![-2.0 * x[0], -2.0 * x[1]]
                    } else {
                        vec![]
                    },
                    dg: vec![],
                })
            },
        }
    }

    fn disk_problem() -> FnEvaluator<impl FnMut(&[f64], bool) -> Result<Evaluation>> {
        // maximize x1 + x2 subject to x1^2 + x2^2 <= 1.
        FnEvaluator {
            dim: 2,
            n_constraints: 1,
            f: |x: &[f64], grads: bool| {
                Ok(Evaluation {
                    f: x[0] + x[1],
                    g: vec![x[0] * x[0] + x[1] * x[1] - 1.0],
                    df: if grads { vec![1.0, 1.0] } else { vec![] },
                    dg: if grads {
                        vec![vec![2.0 * x[0], 2.0 * x[1]]]
                    } else {
                        vec![]
                    },
                })
            },
        }
    }

    #[test]
    fn unconstrained_interior_optimum() {
        let mut ev = quadratic_bowl();
        let out = maximize(
            &mut ev,
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &[0.7, -0.3],
            &Settings::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!(out.x[0].abs() < 1e-6 && out.x[1].abs() < 1e-6, "{:?}", out.x);
        assert!(out.f > -1e-10);
    }

    #[test]
    fn constrained_optimum_on_the_disk() {
        let root_half = 0.5f64.sqrt();
        for algorithm in [Algorithm::InteriorPointLike, Algorithm::SqpLike] {
            let mut ev = disk_problem();
            let out = maximize(
                &mut ev,
                &[-2.0, -2.0],
                &[2.0, 2.0],
                &[0.0, 0.0],
                &Settings {
                    max_iter: 300,
                    algorithm,
                    ..Settings::default()
                },
            )
            .unwrap();
            assert!(
                (out.x[0] - root_half).abs() < 1e-6 && (out.x[1] - root_half).abs() < 1e-6,
                "{algorithm:?}: {:?}",
                out.x
            );
            assert!(out.max_violation <= 1e-6);
        }
    }

    #[test]
    fn infeasible_start_recovers() {
        let mut ev = disk_problem();
        let out = maximize(
            &mut ev,
            &[-2.0, -2.0],
            &[2.0, 2.0],
            &[1.5, 1.5],
            &Settings {
                max_iter: 300,
                ..Settings::default()
            },
        )
        .unwrap();
        let root_half = 0.5f64.sqrt();
        assert!(
            (out.x[0] - root_half).abs() < 1e-6 && (out.x[1] - root_half).abs() < 1e-6,
            "{:?}",
            out.x
        );
    }

    #[test]
    fn box_bounds_hold_exactly_on_every_iterate() {
        let mut ev = FnEvaluator {
            dim: 2,
            n_constraints: 0,
            f: |x: &[f64], grads: bool| {
                Ok(Evaluation {
                    f: x[0] + x[1],
                    g: vec![],
                    df: if grads { vec![1.0, 1.0] } else { vec![] },
                    dg: vec![],
                })
            },
        };
        let out = maximize(
            &mut ev,
            &[-1.0, -1.0],
            &[0.3, 0.3],
            &[-0.9, 0.1],
            &Settings::default(),
        )
        .unwrap();
        assert_eq!(out.x, vec![0.3, 0.3]);
        for rec in &out.trace {
            assert!(rec.x.iter().all(|&v| (-1.0..=0.3).contains(&v)));
        }
    }

    #[test]
    fn identical_runs_produce_identical_traces() {
        let run = || {
            let mut ev = disk_problem();
            maximize(
                &mut ev,
                &[-2.0, -2.0],
                &[2.0, 2.0],
                &[1.5, -0.2],
                &Settings::default(),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.x, rb.x);
            assert_eq!(ra.f, rb.f);
        }
    }

    #[test]
    fn best_feasible_objective_is_monotone() {
        let mut ev = disk_problem();
        let out = maximize(
            &mut ev,
            &[-2.0, -2.0],
            &[2.0, 2.0],
            &[0.0, -1.0],
            &Settings::default(),
        )
        .unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut seq = Vec::new();
        for rec in &out.trace {
            if rec.max_violation <= 1e-6 {
                best = best.max(rec.f);
                seq.push(best);
            }
        }
        assert!(seq.windows(2).all(|w| w[1] >= w[0]));
        assert!((out.f - best).abs() <= 1e-12);
    }

    #[test]
    fn finite_difference_check_on_a_quadratic() {
        let mut ev = quadratic_bowl();
        let worst = check_gradient(&mut ev, &[0.3, -0.4], 1e-5).unwrap();
        assert!(worst <= 1e-9, "{worst:.2e}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut ev = quadratic_bowl();
        assert!(maximize(&mut ev, &[0.0], &[1.0], &[0.5], &Settings::default()).is_err());
    }
}
