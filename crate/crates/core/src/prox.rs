//! Proximal maps: shrinkage, Euclidean-ball projection, zero-mean projection.

use crate::error::{Error, Result};
use crate::signal::{FilterBank, Kernel, Signal};

/// `sign(x)·max(|x| − t, 0)` elementwise: the prox of `t‖·‖₁`.
pub fn soft_threshold(x: &[f64], t: f64) -> Vec<f64> {
    assert!(t >= 0.0, "negative threshold");
    x.iter().map(|&v| shrink(v, t)).collect()
}

#[inline]
pub fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `{u : ‖u − center‖₂ ≤ radius}`
#[derive(Debug, Clone, PartialEq)]
pub struct BallConstraint {
    center: Signal,
    radius: f64,
}

impl BallConstraint {
    pub fn new(center: Signal, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("ball radius must be >= 0, got {radius}")));
        }
        Ok(BallConstraint { center, radius })
    }

    /// Radius `η·σ·√m` with `m` the number of samples of `f`.
    pub fn noise_level(f: Signal, eta: f64, sigma: f64) -> Result<Self> {
        if eta < 0.0 || sigma < 0.0 {
            return Err(Error::Parameter("eta and sigma must be nonnegative".into()));
        }
        let radius = eta * sigma * (f.len() as f64).sqrt();
        Self::new(f, radius)
    }

    pub fn center(&self) -> &Signal {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Projection on flat data, writing into `out`.
    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) {
        let f = self.center.data();
        let dist = x.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist <= self.radius {
            out.copy_from_slice(x);
        } else {
            let scale = self.radius / dist;
            for ((o, a), b) in out.iter_mut().zip(x).zip(f) {
                *o = b + scale * (a - b);
            }
        }
    }
}

pub fn project_l2_ball(x: &Signal, ball: &BallConstraint) -> Result<Signal> {
    if x.shape() != ball.center.shape() {
        return Err(Error::Dimension(format!(
            "cannot project {} onto a ball around {}",
            x.shape(),
            ball.center.shape()
        )));
    }
    let mut out = vec![0.0; x.len()];
    ball.project_into(x.data(), &mut out);
    Ok(Signal::from_parts(x.shape(), out))
}

/// `h − mean(h)·𝟙`
pub fn project_zero_mean(h: &Kernel) -> Kernel {
    let mut data = h.data().to_vec();
    remove_mean(&mut data);
    Kernel::from_parts(h.shape(), data)
}

/// Per-filter zero-mean projection.
pub fn project_bank_zero_mean(bank: &FilterBank) -> FilterBank {
    FilterBank::new(bank.filters().iter().map(project_zero_mean).collect()).expect("shapes preserved")
}

pub(crate) fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Per-block zero-mean projection of a flat bank vector.
pub(crate) fn remove_block_means(x: &mut [f64], block: usize) {
    x.chunks_mut(block).for_each(remove_mean);
}
