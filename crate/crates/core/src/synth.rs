//! Deterministic generators for the 1D and 2D training signals, plus seeded
//! Gaussian noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::signal::{Shape, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// 1D signal classes. Indices are sample positions in `0..m`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kind1d {
    /// `height` on the closed interval `[start, end]`, zero elsewhere.
    Step { start: usize, end: usize, height: f64 },
    /// Continuous: `u[0] = offset`, `u[t] = u[t−1] + slope(t)`, where the
    /// slope starts at `slope` and switches to `s` at every break `(t, s)`.
    PiecewiseLinear {
        offset: f64,
        slope: f64,
        breaks: Vec<(usize, f64)>,
    },
    /// `base` plus every jump `(t, δ)` with `t ≤` the current index.
    Staircase { base: f64, jumps: Vec<(usize, f64)> },
    /// Zero up to `start`, linear up to `height` at `end`, constant after.
    Ramp { start: usize, end: usize, height: f64 },
}

pub fn make_1d(kind: &Kind1d, m: usize) -> Result<Signal> {
    if m < 4 {
        return Err(Error::Parameter(format!("1D signals need at least 4 samples, got {m}")));
    }
    let in_range = |t: usize, what: &str| {
        if t < m {
            Ok(())
        } else {
            Err(Error::Parameter(format!("{what} {t} outside 0..{m}")))
        }
    };
    let mut u = vec![0.0; m];
    match kind {
        Kind1d::Step { start, end, height } => {
            in_range(*start, "step start")?;
            in_range(*end, "step end")?;
            if start > end {
                return Err(Error::Parameter("step start after end".into()));
            }
            u[*start..=*end].iter_mut().for_each(|v| *v = *height);
        }
        Kind1d::PiecewiseLinear { offset, slope, breaks } => {
            let mut sorted = breaks.clone();
            sorted.sort_by_key(|b| b.0);
            for (t, _) in &sorted {
                in_range(*t, "breakpoint")?;
            }
            let mut current = *slope;
            let mut next = sorted.iter().peekable();
            u[0] = *offset;
            for t in 1..m {
                while let Some((_, s)) = next.next_if(|b| b.0 <= t) {
                    current = *s;
                }
                u[t] = u[t - 1] + current;
            }
        }
        Kind1d::Staircase { base, jumps } => {
            for (t, _) in jumps {
                in_range(*t, "jump")?;
            }
            for (t, v) in u.iter_mut().enumerate() {
                *v = base + jumps.iter().filter(|j| j.0 <= t).map(|j| j.1).sum::<f64>();
            }
        }
        Kind1d::Ramp { start, end, height } => {
            in_range(*start, "ramp start")?;
            in_range(*end, "ramp end")?;
            if start >= end {
                return Err(Error::Parameter("ramp start must precede end".into()));
            }
            let span = (end - start) as f64;
            for (t, v) in u.iter_mut().enumerate() {
                *v = if t <= *start {
                    0.0
                } else if t >= *end {
                    *height
                } else {
                    height * (t - start) as f64 / span
                };
            }
        }
    }
    Signal::from_vec(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Constant along columns: the pattern varies with the column index.
    Vertical,
    Horizontal,
}

/// Binary 2D patterns taking values in `{0, amplitude}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kind2d {
    /// Bands of `thickness` pixels separated by `spacing` pixels, starting
    /// with a band at index 0.
    Stripes {
        orientation: Orientation,
        thickness: usize,
        spacing: usize,
    },
    /// Rows `top..top+height`, columns `left..left+width`.
    Rectangle {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    /// Pixels whose centre `(r, c)` lies within `radius` of `center`.
    Circle { center: (f64, f64), radius: f64 },
    /// Bands along the direction at `angle` degrees: pixel `(r, c)` is set when
    /// `c·cos(angle) + r·sin(angle)` modulo `thickness + spacing` is below
    /// `thickness`. Angle 0 reproduces vertical stripes.
    DiagonalStripes { angle: f64, thickness: f64, spacing: f64 },
}

pub fn make_2d(kind: &Kind2d, rows: usize, cols: usize, amplitude: f64) -> Result<Signal> {
    if rows < 4 || cols < 4 {
        return Err(Error::Parameter(format!("2D signals need at least 4x4, got {rows}x{cols}")));
    }
    let shape = Shape::new(rows, cols);
    let mut data = vec![0.0; shape.len()];
    let mut set = |r: usize, c: usize| data[r * cols + c] = amplitude;
    match kind {
        Kind2d::Stripes {
            orientation,
            thickness,
            spacing,
        } => {
            if *thickness == 0 {
                return Err(Error::Parameter("stripe thickness must be >= 1".into()));
            }
            let period = thickness + spacing;
            for r in 0..rows {
                for c in 0..cols {
                    let along = match orientation {
                        Orientation::Vertical => c,
                        Orientation::Horizontal => r,
                    };
                    if along % period < *thickness {
                        set(r, c);
                    }
                }
            }
        }
        Kind2d::Rectangle {
            top,
            left,
            height,
            width,
        } => {
            if *height == 0 || *width == 0 || top + height > rows || left + width > cols {
                return Err(Error::Parameter(format!(
                    "rectangle {height}x{width} at ({top},{left}) does not fit {rows}x{cols}"
                )));
            }
            for r in *top..top + height {
                for c in *left..left + width {
                    set(r, c);
                }
            }
        }
        Kind2d::Circle { center, radius } => {
            if !(*radius > 0.0) {
                return Err(Error::Parameter("circle radius must be positive".into()));
            }
            for r in 0..rows {
                for c in 0..cols {
                    let (dr, dc) = (r as f64 - center.0, c as f64 - center.1);
                    if dr * dr + dc * dc <= radius * radius {
                        set(r, c);
                    }
                }
            }
        }
        Kind2d::DiagonalStripes {
            angle,
            thickness,
            spacing,
        } => {
            if !(*thickness > 0.0 && *spacing >= 0.0) {
                return Err(Error::Parameter("diagonal stripes need thickness > 0, spacing >= 0".into()));
            }
            let period = thickness + spacing;
            let (sin, cos) = angle.to_radians().sin_cos();
            for r in 0..rows {
                for c in 0..cols {
                    // The small offset keeps exact lattice hits on the band side.
                    let d = c as f64 * cos + r as f64 * sin + 1e-9;
                    if d.rem_euclid(period) < *thickness {
                        set(r, c);
                    }
                }
            }
        }
    }
    Signal::new(shape, data)
}

/// `u + ε` with `ε ~ N(0, σ²)` i.i.d., element `t` taking Gaussian `t` of
/// stream `seed`.
pub fn add_noise(u: &Signal, spec: NoiseSpec) -> Result<Signal> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {}", spec.sigma)));
    }
    if spec.sigma == 0.0 {
        return Ok(u.clone());
    }
    let eps = CounterRng::new(spec.seed).gaussians(u.len());
    Signal::new(u.shape(), u.data().iter().zip(eps).map(|(a, e)| a + spec.sigma * e).collect())
}

/// Pure noise of the given shape.
pub fn noise(shape: Shape, spec: NoiseSpec) -> Result<Signal> {
    add_noise(&Signal::zeros(shape), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::j_value;
    use crate::signal::Kernel;

    #[test]
    fn step_definition() {
        let u = make_1d(
            &Kind1d::Step {
                start: 2,
                end: 5,
                height: 1.0,
            },
            8,
        )
        .unwrap();
        assert_eq!(u.data(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(make_1d(
            &Kind1d::Step {
                start: 2,
                end: 8,
                height: 1.0
            },
            8
        )
        .is_err());
        assert!(make_1d(
            &Kind1d::Step {
                start: 0,
                end: 1,
                height: 1.0
            },
            3
        )
        .is_err());
    }

    #[test]
    fn single_slope_is_affine() {
        let u = make_1d(
            &Kind1d::PiecewiseLinear {
                offset: 0.5,
                slope: 0.25,
                breaks: vec![],
            },
            12,
        )
        .unwrap();
        for t in 1..11 {
            let second = u.data()[t + 1] - 2.0 * u.data()[t] + u.data()[t - 1];
            assert!(second.abs() < 1e-15);
        }
    }

    #[test]
    fn breaks_change_slope() {
        let u = make_1d(
            &Kind1d::PiecewiseLinear {
                offset: 0.0,
                slope: 1.0,
                breaks: vec![(3, -1.0)],
            },
            6,
        )
        .unwrap();
        assert_eq!(u.data(), &[0.0, 1.0, 2.0, 1.0, 0.0, -1.0]);
        let bad = Kind1d::PiecewiseLinear {
            offset: 0.0,
            slope: 1.0,
            breaks: vec![(9, 0.0)],
        };
        assert!(make_1d(&bad, 6).is_err());
    }

    #[test]
    fn staircase_tv_is_two() {
        let u = make_1d(
            &Kind1d::Staircase {
                base: 0.0,
                jumps: vec![(3, 1.0), (7, -1.0)],
            },
            10,
        )
        .unwrap();
        let tv = j_value(&u, &Kernel::from_vec(vec![1.0, -1.0]).unwrap());
        assert!((tv - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ramp_shape() {
        let u = make_1d(
            &Kind1d::Ramp {
                start: 1,
                end: 3,
                height: 2.0,
            },
            5,
        )
        .unwrap();
        assert_eq!(u.data(), &[0.0, 0.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn vertical_stripes_pattern() {
        let kind = Kind2d::Stripes {
            orientation: Orientation::Vertical,
            thickness: 2,
            spacing: 2,
        };
        let u = make_2d(&kind, 8, 8, 1.0).unwrap();
        for r in 0..8 {
            let row: Vec<f64> = (0..8).map(|c| u.get(r, c)).collect();
            assert_eq!(row, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn stripe_orientations_are_transposes() {
        for (t, s) in [(1, 1), (2, 3), (4, 4)] {
            let v = make_2d(
                &Kind2d::Stripes {
                    orientation: Orientation::Vertical,
                    thickness: t,
                    spacing: s,
                },
                12,
                9,
                1.0,
            )
            .unwrap();
            let h = make_2d(
                &Kind2d::Stripes {
                    orientation: Orientation::Horizontal,
                    thickness: t,
                    spacing: s,
                },
                9,
                12,
                1.0,
            )
            .unwrap();
            assert_eq!(v.transposed(), h);
        }
    }

    #[test]
    fn zero_angle_diagonal_matches_vertical() {
        let d = make_2d(
            &Kind2d::DiagonalStripes {
                angle: 0.0,
                thickness: 3.0,
                spacing: 2.0,
            },
            10,
            10,
            1.0,
        )
        .unwrap();
        let v = make_2d(
            &Kind2d::Stripes {
                orientation: Orientation::Vertical,
                thickness: 3,
                spacing: 2,
            },
            10,
            10,
            1.0,
        )
        .unwrap();
        assert_eq!(d, v);
    }

    #[test]
    fn circle_area_close_to_disc() {
        let u = make_2d(
            &Kind2d::Circle {
                center: (8.0, 8.0),
                radius: 3.0,
            },
            16,
            16,
            1.0,
        )
        .unwrap();
        let count = u.data().iter().filter(|v| **v != 0.0).count() as f64;
        assert!((count - std::f64::consts::PI * 9.0).abs() <= 6.0, "{count}");
    }

    #[test]
    fn rectangle_bounds_checked() {
        let kind = Kind2d::Rectangle {
            top: 2,
            left: 3,
            height: 4,
            width: 5,
        };
        let u = make_2d(&kind, 8, 8, 2.0).unwrap();
        assert_eq!(u.data().iter().filter(|v| **v == 2.0).count(), 20);
        assert!(make_2d(
            &Kind2d::Rectangle {
                top: 5,
                left: 0,
                height: 4,
                width: 1
            },
            8,
            8,
            1.0
        )
        .is_err());
        assert!(make_2d(&kind, 3, 8, 1.0).is_err());
    }

    #[test]
    fn noise_zero_sigma_and_determinism() {
        let u = make_1d(
            &Kind1d::Step {
                start: 2,
                end: 5,
                height: 1.0,
            },
            8,
        )
        .unwrap();
        assert_eq!(add_noise(&u, NoiseSpec { sigma: 0.0, seed: 1 }).unwrap(), u);
        let a = add_noise(&u, NoiseSpec { sigma: 0.3, seed: 9 }).unwrap();
        let b = add_noise(&u, NoiseSpec { sigma: 0.3, seed: 9 }).unwrap();
        assert_eq!(a, b);
        assert!(add_noise(&u, NoiseSpec { sigma: -1.0, seed: 1 }).is_err());
    }

    #[test]
    fn noise_moments() {
        let sigma = 0.7;
        let e = noise(Shape::vector(10_000), NoiseSpec { sigma, seed: 2024 }).unwrap();
        let n = e.len() as f64;
        let mean = e.data().iter().sum::<f64>() / n;
        let var = e.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 4.0 * sigma / 100.0, "mean {mean}");
        assert!((var - sigma * sigma).abs() <= 0.05 * sigma * sigma, "var {var}");
    }
}
