//! First-order primal-dual (Chambolle–Pock) solvers for the two convex
//! subproblems: the penalised half-step of the outer iteration and the
//! ball-constrained reconstruction.
//!
//! Both track the best primal and dual objective seen and stop once the
//! relative duality gap `(P − D) / max(1, |P|)` drops below `gap_tol`.

use serde::{Deserialize, Serialize};

use crate::conv::{operator_norm, Extent, FilterOperator, LinearOperator, StackedOperator};
use crate::error::{Error, Result};
use crate::functionals::QuotientProblem;
use crate::prox::{remove_block_means, BallConstraint};
use crate::signal::{dot, FilterBank, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PDConfig {
    pub max_iters: usize,
    pub gap_tol: f64,
}

impl Default for PDConfig {
    fn default() -> Self {
        PDConfig {
            max_iters: 5000,
            gap_tol: 1e-8,
        }
    }
}

impl PDConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be >= 1".into()));
        }
        if !(self.gap_tol > 0.0) {
            return Err(Error::Parameter("gap_tol must be positive".into()));
        }
        Ok(())
    }
}

// Step sizes τ = σ = STEP_SCALE / ‖K‖.
const STEP_SCALE: f64 = 0.99;
const GAP_CHECK_EVERY: usize = 10;

/// Result of one penalised half-step.
#[derive(Debug, Clone)]
pub struct HalfStep {
    /// The (unnormalised) minimiser `h^{k+½}`.
    pub bank: FilterBank,
    /// Absolute duality gap certified at exit; bounds both the objective
    /// suboptimality and `‖h − h*‖²`.
    pub gap: f64,
    /// `Kᵀy` for the best dual iterate, an approximate element of `∂F(h^{k+½})`.
    pub subgradient: FilterBank,
    pub iterations: usize,
    pub converged: bool,
    pub(crate) dual: Vec<f64>,
}

/// Objective of the half-step at a zero-mean `h`:
/// `F(h) − μ⟨h − h_k, s⟩ + ‖h − h_k‖²`.
pub fn half_step_objective(problem: &QuotientProblem, h: &FilterBank, h_k: &FilterBank, mu: f64, s: &FilterBank) -> f64 {
    let flat = h.flat();
    objective_flat(problem, &flat, &h_k.flat(), mu, &s.flat())
}

fn objective_flat(problem: &QuotientProblem, h: &[f64], center: &[f64], mu: f64, s: &[f64]) -> f64 {
    let f = if problem.numerator_operator().is_empty() {
        0.0
    } else {
        problem.numerator_flat(h)
    };
    let mut lin = 0.0;
    let mut quad = 0.0;
    for ((a, c), g) in h.iter().zip(center).zip(s) {
        let d = a - c;
        lin += d * g;
        quad += d * d;
    }
    f - mu * lin + quad
}

/// Minimise `F(h) − μ⟨h − h_k, s⟩ + ‖h − h_k‖²` over per-filter zero-mean `h`.
pub fn solve_half_step(h_k: &FilterBank, mu: f64, s: &FilterBank, problem: &QuotientProblem, cfg: &PDConfig) -> Result<HalfStep> {
    solve_half_step_warm(h_k, mu, s, problem, cfg, None)
}

/// As [`solve_half_step`], starting the dual iterate from `dual` when given
/// (e.g. the previous outer iteration's dual).
pub fn solve_half_step_warm(
    h_k: &FilterBank,
    mu: f64,
    s: &FilterBank,
    problem: &QuotientProblem,
    cfg: &PDConfig,
    dual: Option<&[f64]>,
) -> Result<HalfStep> {
    cfg.validate()?;
    problem.check_bank(h_k)?;
    problem.check_bank(s)?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Parameter(format!("mu must be finite and >= 0, got {mu}")));
    }
    let block = problem.kernel().len();
    let mut center = h_k.flat();
    remove_block_means(&mut center, block);
    // Only the zero-mean part of the linear term acts on the feasible set.
    let mut lin = s.flat();
    remove_block_means(&mut lin, block);
    lin.iter_mut().for_each(|v| *v *= mu);

    let op = problem.numerator_operator();
    let norm = problem.numerator_norm();
    let n = center.len();

    // P0(μs − Kᵀy)/2 is the primal point paired with a dual iterate.
    let primal_from_dual = |kty: &[f64]| -> Vec<f64> {
        let mut d: Vec<f64> = lin.iter().zip(kty).map(|(l, k)| l - k).collect();
        remove_block_means(&mut d, block);
        center.iter().zip(&d).map(|(c, v)| c + 0.5 * v).collect()
    };
    let dual_value = |kty: &[f64]| -> f64 {
        let mut d: Vec<f64> = lin.iter().zip(kty).map(|(l, k)| l - k).collect();
        remove_block_means(&mut d, block);
        dot(kty, &center) - 0.25 * dot(&d, &d)
    };
    let objective = |h: &[f64]| -> f64 {
        let f = if op.is_empty() { 0.0 } else { problem.numerator_flat(h) };
        let mut val = f;
        for ((a, c), l) in h.iter().zip(&center).zip(&lin) {
            let d = a - c;
            val += d * d - l * d;
        }
        val
    };

    if op.is_empty() || norm == 0.0 {
        // F vanishes on the feasible set; the quadratic alone has a closed form.
        let h = primal_from_dual(&vec![0.0; n]);
        return Ok(HalfStep {
            bank: problem.bank_from_flat(&h),
            gap: 0.0,
            subgradient: FilterBank::zeros(problem.filters(), problem.kernel()),
            iterations: 0,
            converged: true,
            dual: vec![0.0; op.output_len()],
        });
    }

    let weights = op.output_weights();
    let m = op.output_len();
    let mut y: Vec<f64> = match dual {
        Some(d) if d.len() == m => d.iter().zip(&weights).map(|(v, w)| v.clamp(-w, *w)).collect(),
        _ => vec![0.0; m],
    };

    let mut tau = STEP_SCALE / norm;
    let mut sigma = STEP_SCALE / norm;
    let mut x = center.clone();
    let mut x_bar = x.clone();
    let mut x_new = vec![0.0; n];
    let mut kx = vec![0.0; m];
    let mut kty = vec![0.0; n];

    let mut best_primal = objective(&x);
    let mut best_x = x.clone();
    op.adjoint_into(&y, &mut kty);
    let mut best_dual = dual_value(&kty);
    let mut best_y = y.clone();
    let mut best_kty = kty.clone();

    let mut iterations = 0;
    let mut converged = best_primal - best_dual <= cfg.gap_tol * best_primal.abs().max(1.0);
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        op.apply_into(&x_bar, &mut kx);
        for ((yi, k), w) in y.iter_mut().zip(&kx).zip(&weights) {
            *yi = (*yi + sigma * k).clamp(-w, *w);
        }
        op.adjoint_into(&y, &mut kty);
        let denom = 1.0 + 2.0 * tau;
        for i in 0..n {
            x_new[i] = (x[i] - tau * kty[i] + 2.0 * tau * center[i] + tau * lin[i]) / denom;
        }
        remove_block_means(&mut x_new, block);

        // Acceleration for the 2-strongly convex primal term.
        let theta = 1.0 / (1.0 + 4.0 * tau).sqrt();
        tau *= theta;
        sigma /= theta;
        for i in 0..n {
            x_bar[i] = x_new[i] + theta * (x_new[i] - x[i]);
        }
        std::mem::swap(&mut x, &mut x_new);

        if iterations % GAP_CHECK_EVERY == 0 || iterations == cfg.max_iters {
            let p = objective(&x);
            if p < best_primal {
                best_primal = p;
                best_x.copy_from_slice(&x);
            }
            let from_dual = primal_from_dual(&kty);
            let p = objective(&from_dual);
            if p < best_primal {
                best_primal = p;
                best_x = from_dual;
            }
            let d = dual_value(&kty);
            if d > best_dual {
                best_dual = d;
                best_y.copy_from_slice(&y);
                best_kty.copy_from_slice(&kty);
            }
            converged = best_primal - best_dual <= cfg.gap_tol * best_primal.abs().max(1.0);
        }
    }

    Ok(HalfStep {
        bank: problem.bank_from_flat(&best_x),
        gap: (best_primal - best_dual).max(0.0),
        subgradient: problem.bank_from_flat(&best_kty),
        iterations,
        converged,
        dual: best_y,
    })
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub signal: Signal,
    /// `Σ_k ‖û ∗ h_k‖₁` at the chosen extent.
    pub objective: f64,
    /// The same functional at the ball centre `f`.
    pub initial_objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The stacked map `u ↦ (u ∗ h_k)_k`.
pub fn bank_operator(bank: &FilterBank, shape: crate::signal::Shape, extent: Extent) -> Result<StackedOperator<FilterOperator>> {
    let mut op = StackedOperator::new(shape.len());
    for h in bank.filters() {
        op.push(FilterOperator::new(h.clone(), shape, extent)?, 0, 1.0);
    }
    Ok(op)
}

/// `Σ_k ‖u ∗ h_k‖₁` at the given extent.
pub fn regulariser_value(u: &Signal, bank: &FilterBank, extent: Extent) -> Result<f64> {
    let op = bank_operator(bank, u.shape(), extent)?;
    Ok(op.weighted_sum(u.data(), f64::abs))
}

/// Minimise `Σ_k ‖u ∗ h_k‖₁` subject to `‖u − f‖₂ ≤ r`.
///
/// Primal-dual iterations restarted from the running average whenever the
/// fixed-point residual has dropped enough since the last restart. Every
/// candidate is feasible (the primal step ends in a ball projection and
/// averages of feasible points stay feasible), and the returned point is
/// the best one seen, starting from `f` itself.
pub fn solve_reconstruction(ball: &BallConstraint, bank: &FilterBank, extent: Extent, cfg: &PDConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let f = ball.center();
    let op = bank_operator(bank, f.shape(), extent)?;
    let initial_objective = op.weighted_sum(f.data(), f64::abs);
    let norm = operator_norm(std::slice::from_ref(&op))?;
    let r = ball.radius();

    if norm == 0.0 || r == 0.0 || initial_objective == 0.0 {
        return Ok(Reconstruction {
            signal: f.clone(),
            objective: initial_objective,
            initial_objective,
            gap: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut pd = BallPd::new(&op, ball, STEP_SCALE / norm);
    let n = f.len();
    let m = op.output_len();
    let mut x = f.data().to_vec();
    let mut y = vec![0.0; m];
    let mut kty = vec![0.0; n];

    let mut best_primal = initial_objective;
    let mut best_x = x.clone();
    let mut best_dual = 0.0f64;
    let dual_value = |kty: &[f64]| dot(kty, f.data()) - r * dot(kty, kty).sqrt();

    let mut restart_residual = pd.residual(&x, &y, &kty);
    let mut last_candidate = f64::INFINITY;
    let mut sum_x = vec![0.0; n];
    let mut sum_y = vec![0.0; m];
    let mut count = 0usize;
    let mut avg_x = vec![0.0; n];
    let mut avg_y = vec![0.0; m];
    let mut avg_kty = vec![0.0; n];

    let mut iterations = 0;
    let mut converged = restart_residual == 0.0;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        pd.step(&mut x, &mut y, &mut kty);
        count += 1;
        sum_x.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
        sum_y.iter_mut().zip(&y).for_each(|(s, v)| *s += v);

        if iterations % GAP_CHECK_EVERY != 0 && iterations != cfg.max_iters {
            continue;
        }
        let inv = 1.0 / count as f64;
        avg_x.iter_mut().zip(&sum_x).for_each(|(a, s)| *a = s * inv);
        avg_y.iter_mut().zip(&sum_y).for_each(|(a, s)| *a = s * inv);
        op.adjoint_into(&avg_y, &mut avg_kty);

        for (cx, ckty) in [(&x, &kty), (&avg_x, &avg_kty)] {
            let p = op.weighted_sum(cx, f64::abs);
            if p < best_primal {
                best_primal = p;
                best_x.copy_from_slice(cx);
            }
            best_dual = best_dual.max(dual_value(ckty));
        }
        converged = best_primal - best_dual <= cfg.gap_tol * best_primal.abs().max(1.0);
        if converged {
            break;
        }

        let current = pd.residual(&x, &y, &kty);
        let averaged = pd.residual(&avg_x, &avg_y, &avg_kty);
        let (candidate, use_average) = if averaged < current {
            (averaged, true)
        } else {
            (current, false)
        };
        let restart = candidate <= RESTART_SUFFICIENT * restart_residual
            || (candidate <= RESTART_NECESSARY * restart_residual && candidate > last_candidate);
        last_candidate = candidate;
        if restart {
            if use_average {
                x.copy_from_slice(&avg_x);
                y.copy_from_slice(&avg_y);
                kty.copy_from_slice(&avg_kty);
            }
            restart_residual = candidate;
            last_candidate = f64::INFINITY;
            sum_x.iter_mut().for_each(|v| *v = 0.0);
            sum_y.iter_mut().for_each(|v| *v = 0.0);
            count = 0;
        }
    }

    Ok(Reconstruction {
        signal: Signal::from_parts(f.shape(), best_x),
        objective: best_primal,
        initial_objective,
        gap: (best_primal - best_dual).max(0.0),
        iterations,
        converged,
    })
}

// Restart when the residual falls below this fraction of its value at the
// last restart, or below the looser fraction once it stops improving.
const RESTART_SUFFICIENT: f64 = 0.2;
const RESTART_NECESSARY: f64 = 0.8;

/// One primal-dual map `(x, y) ↦ (x', y')` for the ball-constrained problem:
/// `x' = P_ball(x − τKᵀy)`, `y' = clip(y + σK(2x' − x), −1, 1)`.
struct BallPd<'a> {
    op: &'a StackedOperator<FilterOperator>,
    ball: &'a BallConstraint,
    step: f64,
    x_new: Vec<f64>,
    y_new: Vec<f64>,
    kty_new: Vec<f64>,
    scratch: Vec<f64>,
    kx: Vec<f64>,
}

impl<'a> BallPd<'a> {
    fn new(op: &'a StackedOperator<FilterOperator>, ball: &'a BallConstraint, step: f64) -> Self {
        let (n, m) = (op.input_len(), op.output_len());
        BallPd {
            op,
            ball,
            step,
            x_new: vec![0.0; n],
            y_new: vec![0.0; m],
            kty_new: vec![0.0; n],
            scratch: vec![0.0; n],
            kx: vec![0.0; m],
        }
    }

    /// Writes `T(x, y)` into the internal buffers.
    fn apply(&mut self, x: &[f64], y: &[f64], kty: &[f64]) {
        let t = self.step;
        for ((s, a), g) in self.scratch.iter_mut().zip(x).zip(kty) {
            *s = a - t * g;
        }
        self.ball.project_into(&self.scratch, &mut self.x_new);
        for ((s, n), a) in self.scratch.iter_mut().zip(&self.x_new).zip(x) {
            *s = 2.0 * n - a;
        }
        self.op.apply_into(&self.scratch, &mut self.kx);
        for ((n, a), k) in self.y_new.iter_mut().zip(y).zip(&self.kx) {
            *n = (a + t * k).clamp(-1.0, 1.0);
        }
        self.op.adjoint_into(&self.y_new, &mut self.kty_new);
    }

    fn step(&mut self, x: &mut [f64], y: &mut [f64], kty: &mut [f64]) {
        self.apply(x, y, kty);
        x.copy_from_slice(&self.x_new);
        y.copy_from_slice(&self.y_new);
        kty.copy_from_slice(&self.kty_new);
    }

    /// `‖(x, y) − T(x, y)‖ / √step`
    fn residual(&mut self, x: &[f64], y: &[f64], kty: &[f64]) -> f64 {
        self.apply(x, y, kty);
        let dx: f64 = x.iter().zip(&self.x_new).map(|(a, b)| (a - b) * (a - b)).sum();
        let dy: f64 = y.iter().zip(&self.y_new).map(|(a, b)| (a - b) * (a - b)).sum();
        ((dx + dy) / self.step).sqrt()
    }
}
