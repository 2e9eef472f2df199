//! Runtime checks of the two per-iteration guarantees of the outer
//! iteration.
//!
//! Sufficient decrease: `μ^{k+½} + ‖h^{k+½} − h^k‖² / G(h^{k+½}) ≤ μ^k`.
//!
//! Subgradient bound, with `r = μ^k s^k + 2(h^k − h^{k+½})` recovered from
//! the half-step optimality condition:
//! `‖P₀(r − μ^{k+½}∇G(h^{k+½}))‖ ≤ (2 + C·L)‖h^{k+½} − h^k‖`,
//! `C = max(μ^k, μ^{k+½})`, where `P₀` removes per-filter means (the
//! normal cone of the zero-mean constraint).
//!
//! Tolerances scale with the half-step duality gap `ε`: `10ε/G(h^{k+½})`
//! for the μ-valued checks and `10ε` for the subgradient bound, plus a
//! rounding floor of `1e-12` relative to the larger side.

use crate::functionals::Mode;
use crate::learning::Trajectory;
use crate::prox::remove_block_means;

const GAP_FACTOR: f64 = 10.0;
const ROUNDING: f64 = 1e-12;

/// One inequality `lhs ≤ rhs + tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub iteration: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(iteration: usize, lhs: f64, rhs: f64, slack: f64) -> Self {
        let tolerance = slack + ROUNDING * lhs.abs().max(rhs.abs());
        Check {
            iteration,
            lhs,
            rhs,
            tolerance,
        }
    }

    /// `rhs + tolerance − lhs`; negative means violated.
    pub fn margin(&self) -> f64 {
        self.rhs + self.tolerance - self.lhs
    }

    pub fn passed(&self) -> bool {
        self.margin() >= 0.0
    }
}

/// Aggregate of a family of checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub checked: usize,
    pub violations: usize,
    /// Smallest margin seen (`+∞` when nothing was checked).
    pub worst_margin: Option<f64>,
}

impl Summary {
    fn of(checks: &[Check]) -> Self {
        let mut s = Summary::default();
        for c in checks {
            s.add(c);
        }
        s
    }

    fn add(&mut self, c: &Check) {
        self.checked += 1;
        if !c.passed() {
            self.violations += 1;
        }
        let m = c.margin();
        self.worst_margin = Some(self.worst_margin.map_or(m, |w| w.min(m)));
    }

    fn merge(&mut self, other: &Summary) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.worst_margin = match (self.worst_margin, other.worst_margin) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificationReport {
    pub trajectories: usize,
    pub decrease: Summary,
    /// Empty when the denominator was not smoothed.
    pub gradient: Summary,
    pub monotone: Summary,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.decrease.violations == 0 && self.gradient.violations == 0 && self.monotone.violations == 0
    }

    pub fn merge(&mut self, other: &CertificationReport) {
        self.trajectories += other.trajectories;
        self.decrease.merge(&other.decrease);
        self.gradient.merge(&other.gradient);
        self.monotone.merge(&other.monotone);
    }
}

/// Sufficient-decrease check at every recorded iteration.
pub fn certify_decrease(traj: &Trajectory) -> Vec<Check> {
    traj.records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let step = r.half.distance(&r.bank);
            let lhs = r.mu_half + step * step / r.g_half;
            Check::new(k, lhs, r.mu, GAP_FACTOR * r.gap / r.g_half)
        })
        .collect()
}

/// Subgradient bound at every recorded iteration, given the Lipschitz
/// constant `lipschitz` of the smoothed denominator gradient.
pub fn certify_gradient(traj: &Trajectory, lipschitz: f64) -> Vec<Check> {
    traj.records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let block = r.bank.kernel_shape().len();
            let (hk, hh, s, g) = (r.bank.flat(), r.half.flat(), r.grad.flat(), r.grad_half.flat());
            let mut res: Vec<f64> = (0..hk.len())
                .map(|i| r.mu * s[i] + 2.0 * (hk[i] - hh[i]) - r.mu_half * g[i])
                .collect();
            remove_block_means(&mut res, block);
            let lhs = res.iter().map(|v| v * v).sum::<f64>().sqrt();
            let c = r.mu.max(r.mu_half);
            let rhs = (2.0 + c * lipschitz) * r.half.distance(&r.bank);
            Check::new(k, lhs, rhs, GAP_FACTOR * r.gap)
        })
        .collect()
}

/// `μ` must not increase between recorded iterations. In standard mode
/// this compares consecutive normalised iterates; in infimal mode the
/// per-filter rescaling is not quotient-preserving, so the half-step value
/// `μ^{k+½}` is compared against `μ^k` instead.
pub fn certify_monotone(traj: &Trajectory) -> Vec<Check> {
    let recs = &traj.records;
    recs.iter()
        .enumerate()
        .map(|(k, r)| {
            let slack = GAP_FACTOR * r.gap / r.g_half;
            match traj.mode {
                // The quotient is scale invariant, so the last step's successor is its half-step.
                Mode::Standard => Check::new(k, recs.get(k + 1).map_or(r.mu_half, |next| next.mu), r.mu, slack),
                Mode::Infimal => Check::new(k, r.mu_half, r.mu, slack),
            }
        })
        .collect()
}

/// Every applicable check on one trajectory.
pub fn certify(traj: &Trajectory) -> CertificationReport {
    CertificationReport {
        trajectories: 1,
        decrease: Summary::of(&certify_decrease(traj)),
        gradient: traj
            .lipschitz
            .map(|l| Summary::of(&certify_gradient(traj, l)))
            .unwrap_or_default(),
        monotone: Summary::of(&certify_monotone(traj)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::QuotientProblem;
    use crate::learning::{power_iterate, random_init, LearnConfig};
    use crate::signal::Shape;
    use crate::synth::{make_1d, noise, Kind1d, NoiseSpec};

    fn trajectory() -> (Trajectory, QuotientProblem) {
        let pos = make_1d(
            &Kind1d::Step {
                start: 8,
                end: 20,
                height: 1.0,
            },
            32,
        )
        .unwrap();
        let neg = noise(Shape::vector(32), NoiseSpec { sigma: 0.3, seed: 3 }).unwrap();
        let problem = QuotientProblem::standard(vec![pos], vec![neg], 1, Shape::vector(4)).unwrap();
        let cfg = LearnConfig::default();
        let traj = power_iterate(&random_init(Shape::vector(4), 1, 11).unwrap(), &problem, &cfg).unwrap();
        (traj, problem)
    }

    #[test]
    fn healthy_trajectory_passes() {
        let (traj, _) = trajectory();
        assert!(traj.records.len() >= 2);
        let report = certify(&traj);
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.decrease.checked, traj.records.len());
        assert_eq!(report.gradient.checked, traj.records.len());
    }

    #[test]
    fn stationary_record_is_tight() {
        let (mut traj, _) = trajectory();
        let mut r = traj.records.last().unwrap().clone();
        r.half = r.bank.clone();
        r.mu_half = r.mu;
        r.grad_half = r.grad.clone();
        r.gap = 0.0;
        traj.records = vec![r];
        let c = certify_decrease(&traj)[0];
        assert_eq!(c.lhs, c.rhs);
        assert!(c.passed());
        let c = certify_gradient(&traj, traj.lipschitz.unwrap())[0];
        assert!(c.lhs <= 1e-15 && c.rhs == 0.0);
    }

    #[test]
    fn shuffled_mu_is_flagged() {
        let (mut traj, _) = trajectory();
        let mut mus: Vec<f64> = traj.records.iter().map(|r| r.mu).collect();
        mus.reverse();
        for (r, m) in traj.records.iter_mut().zip(mus) {
            r.mu = m;
        }
        let report = certify(&traj);
        assert!(report.decrease.violations > 0);
        assert!(report.monotone.violations > 0);
        assert!(!report.passed());
    }

    #[test]
    fn lipschitz_scales_inversely_with_gamma() {
        let (traj, problem) = trajectory();
        let g = traj.gamma.unwrap();
        let l1 = problem.denominator_lipschitz(g).unwrap();
        let l2 = problem.denominator_lipschitz(2.0 * g).unwrap();
        assert!((l1 - 2.0 * l2).abs() <= 1e-12 * l1);
        assert_eq!(traj.lipschitz, Some(l1));
        let tight = certify_gradient(&traj, l1);
        let loose = certify_gradient(&traj, l2);
        for (a, b) in tight.iter().zip(&loose) {
            let step = a.rhs / (2.0 + traj.records[a.iteration].mu.max(traj.records[a.iteration].mu_half) * l1);
            let expected = (2.0 + traj.records[a.iteration].mu.max(traj.records[a.iteration].mu_half) * l2) * step;
            assert!((b.rhs - expected).abs() <= 1e-12 * expected.max(1e-300));
        }
    }

    #[test]
    fn merge_accumulates() {
        let mut a = CertificationReport::default();
        assert!(a.passed());
        let (traj, _) = trajectory();
        let r = certify(&traj);
        a.merge(&r);
        a.merge(&r);
        assert_eq!(a.trajectories, 2);
        assert_eq!(a.decrease.checked, 2 * r.decrease.checked);
        assert_eq!(a.decrease.worst_margin, r.decrease.worst_margin);
    }
}
