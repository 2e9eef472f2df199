//! The outer generalised inverse power iteration with random restarts.
//!
//! One outer step from a normalised `h^k` with `μ^k = F(h^k)/G(h^k)` and
//! `s^k = ∇G(h^k)`:
//!
//! 1. `h^{k+½} = argmin F(h) − μ^k⟨h − h^k, s^k⟩ + ‖h − h^k‖²` over zero-mean `h`;
//! 2. `μ^{k+½} = F(h^{k+½}) / G(h^{k+½})`;
//! 3. `h^{k+1}` is `h^{k+½}` rescaled to the constraint set;
//! 4. `μ^{k+1}`, `s^{k+1}` are evaluated at `h^{k+1}`.
//!
//! `G` is the Huber-smoothed denominator when a smoothing policy is active,
//! with `γ` fixed once per trajectory.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{certify, CertificationReport};
use crate::error::{Error, Result};
use crate::functionals::{quotient, HuberParams, Mode, QuotientProblem};
use crate::pd::{solve_half_step_warm, PDConfig};
use crate::prox::remove_mean;
use crate::rng::CounterRng;
use crate::signal::{FilterBank, Kernel, Shape, Signal};

/// How the denominator smoothing width is chosen for a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HuberPolicy {
    /// Plain one-norm denominator with the `sign(0) = 0` subgradient.
    Off,
    /// `γ = max(factor · peak, floor)` where `peak` is the largest absolute
    /// denominator convolution output at the initial iterate.
    Relative {
        factor: f64,
        floor: f64,
    },
    Fixed {
        gamma: f64,
    },
}

impl Default for HuberPolicy {
    fn default() -> Self {
        HuberPolicy::Relative {
            factor: 1e-3,
            floor: 1e-8,
        }
    }
}

impl HuberPolicy {
    pub fn gamma_at(&self, problem: &QuotientProblem, bank: &FilterBank) -> Result<Option<f64>> {
        match *self {
            HuberPolicy::Off => Ok(None),
            HuberPolicy::Relative { factor, floor } => {
                if !(factor > 0.0 && floor > 0.0) {
                    return Err(Error::Parameter("Huber factor and floor must be positive".into()));
                }
                let peak = problem.denominator_peak(&bank.flat());
                Ok(Some((factor * peak).max(floor)))
            }
            HuberPolicy::Fixed { gamma } => HuberParams::new(gamma).map(|p| Some(p.gamma())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub restarts: usize,
    pub outer_max: usize,
    pub outer_tol: f64,
    pub seed: u64,
    pub inner: PDConfig,
    pub huber: HuberPolicy,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            restarts: 100,
            outer_max: 100,
            outer_tol: 1e-8,
            seed: 0,
            inner: PDConfig::default(),
            huber: HuberPolicy::default(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Parameter("restarts must be >= 1".into()));
        }
        if self.outer_max == 0 {
            return Err(Error::Parameter("outer_max must be >= 1".into()));
        }
        if !(self.outer_tol >= 0.0) {
            return Err(Error::Parameter("outer_tol must be >= 0".into()));
        }
        self.inner.validate()
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// `μ^k`, at the normalised iterate.
    pub mu: f64,
    /// `μ^{k+½}`, at the unnormalised half-step.
    pub mu_half: f64,
    /// `G(h^{k+½})`
    pub g_half: f64,
    /// Absolute duality gap of the half-step solve.
    pub gap: f64,
    /// `h^k`
    pub bank: FilterBank,
    /// `h^{k+½}`
    pub half: FilterBank,
    /// `s^k = ∇G(h^k)`
    pub grad: FilterBank,
    /// `∇G(h^{k+½})`
    pub grad_half: FilterBank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    /// Huber width used for the denominator, if smoothed.
    pub gamma: Option<f64>,
    /// Lipschitz bound of the smoothed denominator gradient, if smoothed.
    pub lipschitz: Option<f64>,
    pub records: Vec<TrajectoryRecord>,
    /// The last normalised iterate.
    pub last: FilterBank,
    /// Whether the relative μ change fell below `outer_tol`.
    pub converged: bool,
}

impl Trajectory {
    /// Normalised iterates `h^0, h^1, …, h^last`.
    pub fn iterates(&self) -> impl Iterator<Item = &FilterBank> {
        self.records.iter().map(|r| &r.bank).chain(std::iter::once(&self.last))
    }
}

/// Rescales to the constraint set after removing per-filter means.
///
/// Standard mode uses the joint norm. In infimal mode every filter is scaled
/// to norm `1/√K` separately; under a joint norm the quotient there is
/// minimised by dropping all but one filter.
pub fn normalize(bank: &FilterBank, mode: Mode) -> Result<FilterBank> {
    let mut out = bank.clone();
    for f in out.filters_mut() {
        remove_mean(f.data_mut());
    }
    let degenerate = || Error::Parameter("cannot normalise a filter bank with zero norm".into());
    match mode {
        Mode::Standard => {
            let n = out.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(degenerate());
            }
            Ok(out.scaled(1.0 / n))
        }
        Mode::Infimal => {
            let target = 1.0 / (out.count() as f64).sqrt();
            for f in out.filters_mut() {
                let n = f.norm();
                if !(n > 0.0 && n.is_finite()) {
                    return Err(degenerate());
                }
                let factor = target / n;
                f.data_mut().iter_mut().for_each(|v| *v *= factor);
            }
            Ok(out)
        }
    }
}

/// I.i.d. standard normal entries, per-filter zero mean, unit joint norm.
pub fn random_init(shape: Shape, filters: usize, seed: u64) -> Result<FilterBank> {
    if filters == 0 || shape.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least one filter of two or more taps, got {filters} of {shape}"
        )));
    }
    let mut attempt = seed;
    loop {
        let draw = CounterRng::new(attempt).gaussians(filters * shape.len());
        let bank = FilterBank::from_flat(filters, shape, draw)?;
        match normalize(&bank, Mode::Standard) {
            Ok(b) => return Ok(b),
            Err(_) => attempt = attempt.wrapping_add(1),
        }
    }
}

fn smoothed_mu(problem: &QuotientProblem, h: &[f64], smoothing: Option<HuberParams>) -> Result<(f64, f64)> {
    let g = problem.denominator_flat(h, smoothing);
    if !(g > 0.0) {
        return Err(Error::DegenerateDenominator { value: g });
    }
    Ok((problem.numerator_flat(h) / g, g))
}

/// Runs the outer iteration from `init` until the relative change of `μ`
/// drops below `outer_tol` or `outer_max` steps are taken.
pub fn power_iterate(init: &FilterBank, problem: &QuotientProblem, cfg: &LearnConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if init.count() != problem.filters() || init.kernel_shape() != problem.kernel() {
        return Err(Error::Dimension("initial bank does not match the problem".into()));
    }
    let mode = problem.mode();
    let mut h = normalize(init, mode)?;
    let gamma = cfg.huber.gamma_at(problem, &h)?;
    let smoothing = gamma.map(HuberParams::new).transpose()?;
    let lipschitz = gamma.map(|g| problem.denominator_lipschitz(g)).transpose()?;

    let mut flat = h.flat();
    let (mut mu, _) = smoothed_mu(problem, &flat, smoothing)?;
    let mut s = problem.bank_from_flat(&problem.denominator_gradient_flat(&flat, smoothing));
    let mut dual: Option<Vec<f64>> = None;
    let mut records = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.outer_max {
        let step = solve_half_step_warm(&h, mu, &s, problem, &cfg.inner, dual.as_deref())?;
        let half_flat = step.bank.flat();
        let (mu_half, g_half) = smoothed_mu(problem, &half_flat, smoothing)?;
        let grad_half = problem.bank_from_flat(&problem.denominator_gradient_flat(&half_flat, smoothing));
        let next = normalize(&step.bank, mode).map_err(|_| Error::DegenerateDenominator { value: 0.0 })?;
        flat = next.flat();
        let (mu_next, _) = smoothed_mu(problem, &flat, smoothing)?;
        let s_next = problem.bank_from_flat(&problem.denominator_gradient_flat(&flat, smoothing));

        records.push(TrajectoryRecord {
            mu,
            mu_half,
            g_half,
            gap: step.gap,
            bank: h,
            half: step.bank,
            grad: s,
            grad_half,
        });
        let change = (mu - mu_next).abs();
        h = next;
        s = s_next;
        let previous = mu;
        mu = mu_next;
        dual = Some(step.dual);
        if change <= cfg.outer_tol * previous.max(1e-12) {
            converged = true;
            break;
        }
    }

    Ok(Trajectory {
        mode,
        gamma,
        lipschitz,
        records,
        last: h,
        converged,
    })
}

/// Largest-magnitude entry made positive (ties within 1e-9 relative go to
/// the lowest index); in standard mode filters are then sorted
/// lexicographically. The quotient is unchanged by either operation.
pub fn canonicalize(bank: &FilterBank, mode: Mode) -> FilterBank {
    let mut out = bank.clone();
    for f in out.filters_mut() {
        let peak = f.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        let lead = f
            .data()
            .iter()
            .copied()
            .find(|v| v.abs() >= peak * (1.0 - 1e-9))
            .unwrap_or(0.0);
        if lead < 0.0 {
            f.data_mut().iter_mut().for_each(|v| *v = -*v);
        }
    }
    if mode == Mode::Standard && out.count() > 1 {
        let mut filters: Vec<Kernel> = out.filters().to_vec();
        filters.sort_by(|a, b| {
            a.data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out = FilterBank::new(filters).expect("same shapes");
    }
    out
}

/// Outcome of one restart.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub seed: u64,
    /// Exact quotient of the best normalised iterate, or the error that
    /// aborted the restart.
    pub mu: std::result::Result<f64, String>,
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    /// Canonicalised best bank.
    pub bank: FilterBank,
    /// Exact (unsmoothed) quotient at `bank`.
    pub mu: f64,
    pub seed: u64,
    pub restarts: Vec<RestartOutcome>,
    /// Trajectory of the winning restart.
    pub trajectory: Trajectory,
    /// Certification merged over every completed restart.
    pub certification: CertificationReport,
}

struct Completed {
    seed: u64,
    mu: f64,
    bank: FilterBank,
    trajectory: Trajectory,
    report: CertificationReport,
}

fn run_restart(problem: &QuotientProblem, cfg: &LearnConfig, seed: u64) -> Result<Completed> {
    let init = random_init(problem.kernel(), problem.filters(), seed)?;
    let trajectory = power_iterate(&init, problem, cfg)?;
    // The reported bank is the best normalised iterate under the exact
    // quotient, so it never does worse than the initialisation.
    let mut best: Option<(f64, &FilterBank)> = None;
    for b in trajectory.iterates() {
        let mu = quotient(problem, b)?.mu;
        if best.is_none_or(|(m, _)| mu < m) {
            best = Some((mu, b));
        }
    }
    let (mu, bank) = best.expect("at least one iterate");
    let bank = canonicalize(bank, problem.mode());
    let report = certify(&trajectory);
    Ok(Completed {
        seed,
        mu,
        bank,
        trajectory,
        report,
    })
}

/// Runs `cfg.restarts` trajectories with seeds `seed, seed+1, …` and keeps
/// the one with the lowest exact quotient (lowest seed on ties). Restarts
/// hitting a degenerate denominator are dropped.
pub fn learn(problem: &QuotientProblem, cfg: &LearnConfig) -> Result<LearnResult> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.restarts as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let runs: Vec<Result<Completed>> = seeds.par_iter().map(|&s| run_restart(problem, cfg, s)).collect();

    let mut restarts = Vec::with_capacity(runs.len());
    let mut certification = CertificationReport::default();
    let mut winner: Option<Completed> = None;
    for (seed, run) in seeds.iter().zip(runs) {
        match run {
            Ok(done) => {
                restarts.push(RestartOutcome {
                    seed: *seed,
                    mu: Ok(done.mu),
                });
                certification.merge(&done.report);
                if winner.as_ref().is_none_or(|w| done.mu < w.mu) {
                    winner = Some(done);
                }
            }
            Err(e @ Error::DegenerateDenominator { .. }) => {
                log::warn!("restart with seed {seed} aborted: {e}");
                restarts.push(RestartOutcome {
                    seed: *seed,
                    mu: Err(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let w = winner.ok_or(Error::AllRestartsDegenerate { restarts: cfg.restarts })?;
    Ok(LearnResult {
        bank: w.bank,
        mu: w.mu,
        seed: w.seed,
        restarts,
        trajectory: w.trajectory,
        certification,
    })
}

/// Two-filter infimal-convolution learning: filter 1 sees `v`, filter 2
/// sees `w` in the numerator, both see every negative.
pub fn learn_infimal(v: Signal, w: Signal, negatives: Vec<Signal>, kernel: Shape, cfg: &LearnConfig) -> Result<LearnResult> {
    if v.shape() != w.shape() {
        return Err(Error::Dimension(format!(
            "decomposition parts differ: {} vs {}",
            v.shape(),
            w.shape()
        )));
    }
    let problem = QuotientProblem::infimal(vec![v, w], negatives, kernel)?;
    learn(&problem, cfg)
}
