//! The convolutional one-norm `J(u; h) = ‖u ∗ h‖₁`, its Huber smoothing,
//! and the generalised quotient `F(h) / G(h)` over positive and negative
//! training signals.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::conv::{convolve, ConvOperator, StackedOperator};
use crate::error::{Error, Result};
use crate::signal::{FilterBank, Kernel, Shape, Signal};

/// `J(u; h) = Σ_t |(u ∗ h)[t]|` over the full extent.
pub fn j_value(u: &Signal, h: &Kernel) -> f64 {
    convolve(u, h).l1_norm()
}

/// `Σ_k J(u; h_k)`
pub fn j_value_bank(u: &Signal, bank: &FilterBank) -> f64 {
    bank.filters().iter().map(|h| j_value(u, h)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberParams {
    gamma: f64,
}

impl HuberParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("Huber gamma must be positive, got {gamma}")));
        }
        Ok(HuberParams { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `φ_γ(x) = x²/2` for `|x| ≤ γ`, `γ(|x| − γ/2)` otherwise.
#[inline]
pub fn huber(x: f64, gamma: f64) -> f64 {
    let a = x.abs();
    if a <= gamma {
        0.5 * x * x
    } else {
        gamma * (a - 0.5 * gamma)
    }
}

/// `φ_γ'(x) = clamp(x, −γ, γ)`
#[inline]
pub fn huber_derivative(x: f64, gamma: f64) -> f64 {
    x.clamp(-gamma, gamma)
}

/// `Σ_t φ_γ(x[t])`
pub fn huber_value(x: &[f64], params: HuberParams) -> f64 {
    x.iter().map(|&v| huber(v, params.gamma)).sum()
}

/// Unit-slope Huber `φ_γ(x)/γ`: equals `|x| − γ/2` away from zero, so it
/// approximates the modulus with error at most `γ/2`. This is the form used
/// to smooth the denominator.
#[inline]
pub fn smooth_abs(x: f64, gamma: f64) -> f64 {
    huber(x, gamma) / gamma
}

#[inline]
pub fn smooth_abs_derivative(x: f64, gamma: f64) -> f64 {
    (x / gamma).clamp(-1.0, 1.0)
}

/// `Σ_t φ_γ(x[t]) / γ`; satisfies `‖x‖₁ − (γ/2)·len ≤ value ≤ ‖x‖₁`.
pub fn smooth_l1_value(x: &[f64], params: HuberParams) -> f64 {
    x.iter().map(|&v| smooth_abs(v, params.gamma)).sum()
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every filter sees every positive and every negative.
    #[default]
    Standard,
    /// Filter `k` sees only decomposition part `k` in the numerator.
    Infimal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientValue {
    pub numerator: f64,
    pub denominator: f64,
    pub mu: f64,
}

/// `F(h) = Σ_t w_t ‖A_t h_{k_t}‖₁` over positive terms and
/// `G(h) = Σ_t w_t ‖B_t h_{k_t}‖₁` over negative terms.
///
/// Standard mode: `w = 1/M` over all (positive, filter) pairs in `F` and
/// `w = 1/N` over all (negative, filter) pairs in `G`. Infimal mode pairs
/// filter `k` with part `k` at weight 1 and keeps the `1/N` denominator.
#[derive(Debug, Clone)]
pub struct QuotientProblem {
    mode: Mode,
    filters: usize,
    kernel: Shape,
    positives: Vec<Signal>,
    negatives: Vec<Signal>,
    numerator: StackedOperator<ConvOperator>,
    denominator: StackedOperator<ConvOperator>,
    numerator_norm: OnceLock<f64>,
}

impl QuotientProblem {
    pub fn standard(positives: Vec<Signal>, negatives: Vec<Signal>, filters: usize, kernel: Shape) -> Result<Self> {
        if positives.is_empty() {
            return Err(Error::Parameter("need at least one positive signal".into()));
        }
        Self::build(Mode::Standard, positives, negatives, filters, kernel)
    }

    /// The infimal-convolution model: one filter per decomposition part.
    pub fn infimal(parts: Vec<Signal>, negatives: Vec<Signal>, kernel: Shape) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Parameter("need at least one decomposition part".into()));
        }
        let first = parts[0].shape();
        if parts.iter().any(|p| p.shape() != first) {
            return Err(Error::Dimension("decomposition parts must share a shape".into()));
        }
        let k = parts.len();
        Self::build(Mode::Infimal, parts, negatives, k, kernel)
    }

    #[cfg(test)]
    pub(crate) fn without_numerator(negatives: Vec<Signal>, filters: usize, kernel: Shape) -> Result<Self> {
        Self::build(Mode::Standard, Vec::new(), negatives, filters, kernel)
    }

    fn build(mode: Mode, positives: Vec<Signal>, negatives: Vec<Signal>, filters: usize, kernel: Shape) -> Result<Self> {
        if negatives.is_empty() {
            return Err(Error::Parameter("need at least one negative signal".into()));
        }
        if filters == 0 {
            return Err(Error::Parameter("need at least one filter".into()));
        }
        if kernel.len() < 2 {
            return Err(Error::Parameter(format!(
                "kernel {kernel} too small: a zero-mean kernel of size 1 vanishes"
            )));
        }
        let n = kernel.len();
        let mut numerator = StackedOperator::new(filters * n);
        match mode {
            Mode::Standard => {
                let w = 1.0 / positives.len() as f64;
                for k in 0..filters {
                    for u in &positives {
                        numerator.push(ConvOperator::full(u.clone(), kernel), k * n, w);
                    }
                }
            }
            Mode::Infimal => {
                for (k, part) in positives.iter().enumerate() {
                    numerator.push(ConvOperator::full(part.clone(), kernel), k * n, 1.0);
                }
            }
        }
        let mut denominator = StackedOperator::new(filters * n);
        let w = 1.0 / negatives.len() as f64;
        for k in 0..filters {
            for u in &negatives {
                denominator.push(ConvOperator::full(u.clone(), kernel), k * n, w);
            }
        }
        Ok(QuotientProblem {
            mode,
            filters,
            kernel,
            positives,
            negatives,
            numerator,
            denominator,
            numerator_norm: OnceLock::new(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn kernel(&self) -> Shape {
        self.kernel
    }

    /// Positives (standard mode) or decomposition parts (infimal mode).
    pub fn positives(&self) -> &[Signal] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Signal] {
        &self.negatives
    }

    pub fn numerator_operator(&self) -> &StackedOperator<ConvOperator> {
        &self.numerator
    }

    pub fn denominator_operator(&self) -> &StackedOperator<ConvOperator> {
        &self.denominator
    }

    /// Spectral norm of the stacked numerator operator (cached).
    pub fn numerator_norm(&self) -> f64 {
        *self.numerator_norm.get_or_init(|| {
            if self.numerator.is_empty() {
                0.0
            } else {
                crate::conv::operator_norm(std::slice::from_ref(&self.numerator)).expect("consistent stack")
            }
        })
    }

    pub fn flat_len(&self) -> usize {
        self.filters * self.kernel.len()
    }

    pub(crate) fn check_bank(&self, bank: &FilterBank) -> Result<()> {
        if bank.count() != self.filters || bank.kernel_shape() != self.kernel {
            return Err(Error::Dimension(format!(
                "problem expects {} filters of {}, got {} of {}",
                self.filters,
                self.kernel,
                bank.count(),
                bank.kernel_shape()
            )));
        }
        Ok(())
    }

    pub(crate) fn bank_from_flat(&self, flat: &[f64]) -> FilterBank {
        FilterBank::from_flat_unchecked(self.filters, self.kernel, flat)
    }

    pub fn numerator_flat(&self, h: &[f64]) -> f64 {
        self.numerator.weighted_sum(h, f64::abs)
    }

    pub fn denominator_flat(&self, h: &[f64], smoothing: Option<HuberParams>) -> f64 {
        match smoothing {
            None => self.denominator.weighted_sum(h, f64::abs),
            Some(p) => self.denominator.weighted_sum(h, |v| smooth_abs(v, p.gamma)),
        }
    }

    pub fn denominator_gradient_flat(&self, h: &[f64], smoothing: Option<HuberParams>) -> Vec<f64> {
        match smoothing {
            None => self.denominator.weighted_gradient(h, sign0),
            Some(p) => self.denominator.weighted_gradient(h, |v| smooth_abs_derivative(v, p.gamma)),
        }
    }

    /// Largest absolute denominator convolution output at `h`.
    pub fn denominator_peak(&self, h: &[f64]) -> f64 {
        self.denominator.apply(h).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bound on the Lipschitz constant of the smoothed denominator gradient:
    /// `max_k Σ_{t→k} w_t ‖A_t‖² / γ`, which reduces to
    /// `(1/N) Σ_j ‖A_j‖² / γ` in both modes.
    pub fn denominator_lipschitz(&self, gamma: f64) -> Result<f64> {
        let mut per_filter = vec![0.0; self.filters];
        let n = self.kernel.len();
        for b in self.denominator.blocks() {
            let norm = crate::conv::operator_norm(std::slice::from_ref(&b.op))?;
            per_filter[b.input_offset / n] += b.weight * norm * norm;
        }
        Ok(per_filter.into_iter().fold(0.0, f64::max) / gamma)
    }
}

fn flat_of(problem: &QuotientProblem, bank: &FilterBank) -> Result<Vec<f64>> {
    problem.check_bank(bank)?;
    Ok(bank.flat())
}

/// Exact (unsmoothed) quotient.
pub fn quotient(problem: &QuotientProblem, bank: &FilterBank) -> Result<QuotientValue> {
    quotient_smoothed(problem, bank, None)
}

pub fn quotient_smoothed(problem: &QuotientProblem, bank: &FilterBank, smoothing: Option<HuberParams>) -> Result<QuotientValue> {
    let h = flat_of(problem, bank)?;
    let numerator = problem.numerator_flat(&h);
    let denominator = problem.denominator_flat(&h, smoothing);
    if denominator <= 0.0 {
        return Err(Error::DegenerateDenominator { value: denominator });
    }
    Ok(QuotientValue {
        numerator,
        denominator,
        mu: numerator / denominator,
    })
}

/// `Σ_t w_t A_tᵀ sign(A_t h)` with `sign(0) = 0`: an element of `∂F(h)`.
pub fn numerator_subgradient(problem: &QuotientProblem, bank: &FilterBank) -> Result<FilterBank> {
    let h = flat_of(problem, bank)?;
    if problem.numerator.is_empty() {
        return Ok(FilterBank::zeros(problem.filters, problem.kernel));
    }
    Ok(problem.bank_from_flat(&problem.numerator.weighted_gradient(&h, sign0)))
}

/// Without smoothing, the sign selection of `∂G(h)`; with Huber smoothing,
/// the exact gradient of the unit-slope Huber denominator.
pub fn denominator_gradient(problem: &QuotientProblem, bank: &FilterBank, smoothing: Option<HuberParams>) -> Result<FilterBank> {
    let h = flat_of(problem, bank)?;
    Ok(problem.bank_from_flat(&problem.denominator_gradient_flat(&h, smoothing)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn sig(v: &[f64]) -> Signal {
        Signal::from_vec(v.to_vec()).unwrap()
    }

    fn random_signal(seed: u64, len: usize) -> Signal {
        Signal::from_vec(CounterRng::new(seed).gaussians(len)).unwrap()
    }

    fn random_bank(seed: u64, k: usize, shape: Shape) -> FilterBank {
        FilterBank::from_flat(k, shape, CounterRng::new(seed).gaussians(k * shape.len())).unwrap()
    }

    #[test]
    fn j_of_step_is_two_scaled_jumps() {
        let c = 1.7;
        let mut u = vec![0.0; 128];
        u[32..=64].iter_mut().for_each(|v| *v = c);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = Kernel::from_vec(vec![s, -s]).unwrap();
        assert!((j_value(&sig(&u), &h) - 2.0 * c / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(j_value(&sig(&u), &Kernel::zeros(Shape::vector(2))), 0.0);
    }

    #[test]
    fn j_is_absolutely_homogeneous() {
        let u = random_signal(1, 20);
        let h = Kernel::from_vec(vec![0.3, -1.1, 0.8]).unwrap();
        let base = j_value(&u, &h);
        for alpha in [2.0, -3.0, 0.5] {
            assert!((j_value(&u, &h.scaled(alpha)) - alpha.abs() * base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn huber_reference_values() {
        let g = 0.3;
        let p = HuberParams::new(g).unwrap();
        assert_eq!(huber_value(&[0.0, 0.0], p), 0.0);
        assert!((huber_value(&[g], p) - g * g / 2.0).abs() < 1e-15);
        assert!((huber_value(&[2.0 * g, -3.0 * g], p) - 4.0 * g * g).abs() < 1e-15);
        assert!(HuberParams::new(0.0).is_err());
        assert!(HuberParams::new(-1.0).is_err());
    }

    #[test]
    fn smooth_abs_is_continuous_at_breakpoint() {
        let g = 0.25;
        let below = smooth_abs(g * (1.0 - 1e-12), g);
        let above = smooth_abs(g * (1.0 + 1e-12), g);
        assert!((below - above).abs() < 1e-10);
        assert_eq!(smooth_abs_derivative(g, g), 1.0);
        assert_eq!(smooth_abs_derivative(-10.0, g), -1.0);
    }

    #[test]
    fn identical_data_gives_unit_quotient() {
        let u = random_signal(4, 30);
        let problem = QuotientProblem::standard(vec![u.clone()], vec![u], 1, Shape::vector(3)).unwrap();
        let bank = random_bank(9, 1, Shape::vector(3));
        assert!((quotient(&problem, &bank).unwrap().mu - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quotient_averages_positives() {
        let pos = vec![random_signal(10, 16), random_signal(11, 12)];
        let neg = vec![random_signal(12, 20)];
        let h = Kernel::from_vec(vec![0.5, -0.2, -0.3]).unwrap();
        let problem = QuotientProblem::standard(pos.clone(), neg.clone(), 1, Shape::vector(3)).unwrap();
        let (a, b, c) = (j_value(&pos[0], &h), j_value(&pos[1], &h), j_value(&neg[0], &h));
        let q = quotient(&problem, &FilterBank::single(h)).unwrap();
        assert!((q.mu - ((a + b) / 2.0) / c).abs() < 1e-13);
    }

    #[test]
    fn quotient_is_scale_and_sign_invariant() {
        let problem = QuotientProblem::standard(
            vec![random_signal(20, 24), random_signal(21, 24)],
            vec![random_signal(22, 24)],
            2,
            Shape::new(2, 1),
        )
        .unwrap();
        let bank = random_bank(23, 2, Shape::new(2, 1));
        let mu = quotient(&problem, &bank).unwrap().mu;
        for alpha in [2.0, -1.0, 1e-3] {
            let scaled = quotient(&problem, &bank.scaled(alpha)).unwrap().mu;
            assert!((scaled - mu).abs() <= 1e-12 * mu);
        }
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let problem = QuotientProblem::standard(vec![random_signal(1, 8)], vec![sig(&[0.0; 8])], 1, Shape::vector(2)).unwrap();
        let bank = random_bank(2, 1, Shape::vector(2));
        assert!(matches!(quotient(&problem, &bank), Err(Error::DegenerateDenominator { .. })));
    }

    #[test]
    fn infimal_mode_pairs_filters_with_parts() {
        let v = random_signal(30, 16);
        let w = random_signal(31, 16);
        let neg = random_signal(32, 16);
        let problem = QuotientProblem::infimal(vec![v.clone(), w.clone()], vec![neg.clone()], Shape::vector(3)).unwrap();
        assert_eq!(problem.filters(), 2);
        let bank = random_bank(33, 2, Shape::vector(3));
        let (h1, h2) = (&bank.filters()[0], &bank.filters()[1]);
        let q = quotient(&problem, &bank).unwrap();
        assert!((q.numerator - (j_value(&v, h1) + j_value(&w, h2))).abs() < 1e-12);
        assert!((q.denominator - (j_value(&neg, h1) + j_value(&neg, h2))).abs() < 1e-12);
    }

    #[test]
    fn equal_parts_are_swap_symmetric() {
        let v = random_signal(40, 20);
        let problem = QuotientProblem::infimal(vec![v.clone(), v], vec![random_signal(41, 20)], Shape::vector(4)).unwrap();
        let bank = random_bank(42, 2, Shape::vector(4));
        let a = quotient(&problem, &bank).unwrap().mu;
        let b = quotient(&problem, &bank.reversed_order()).unwrap().mu;
        assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn subgradient_of_zero_bank_is_zero() {
        let problem =
            QuotientProblem::standard(vec![random_signal(1, 8)], vec![random_signal(2, 8)], 1, Shape::vector(2)).unwrap();
        let zero = FilterBank::zeros(1, Shape::vector(2));
        assert_eq!(numerator_subgradient(&problem, &zero).unwrap().flat(), vec![0.0, 0.0]);
        let p = HuberParams::new(0.1).unwrap();
        assert_eq!(denominator_gradient(&problem, &zero, Some(p)).unwrap().flat(), vec![0.0, 0.0]);
    }

    #[test]
    fn positive_outputs_give_adjoint_of_ones() {
        // All conv outputs strictly positive → subgradient = (1/M) Σ A_iᵀ 1,
        // i.e. each tap sums its positive's entries.
        let u1 = sig(&[1.0, 2.0, 0.5, 3.0]);
        let u2 = sig(&[0.2, 0.4, 1.0]);
        let h = Kernel::from_vec(vec![1.0, 0.5]).unwrap();
        let problem = QuotientProblem::standard(vec![u1.clone(), u2.clone()], vec![u1.clone()], 1, Shape::vector(2)).unwrap();
        let s = numerator_subgradient(&problem, &FilterBank::single(h)).unwrap();
        let total = (u1.data().iter().sum::<f64>() + u2.data().iter().sum::<f64>()) / 2.0;
        for v in s.flat() {
            assert!((v - total).abs() < 1e-14);
        }
    }

    #[test]
    fn lipschitz_bound_halves_when_gamma_doubles() {
        let problem = QuotientProblem::standard(
            vec![random_signal(1, 12)],
            vec![random_signal(2, 12), random_signal(3, 9)],
            1,
            Shape::vector(3),
        )
        .unwrap();
        let a = problem.denominator_lipschitz(0.1).unwrap();
        let b = problem.denominator_lipschitz(0.2).unwrap();
        assert!((a - 2.0 * b).abs() <= 1e-12 * a);
    }
}
