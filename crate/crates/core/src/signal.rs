//! Dense row-major 1D/2D arrays: signals, kernels and filter banks.
//!
//! A 1D object of length `m` has shape `(m, 1)`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub const fn vector(len: usize) -> Self {
        Shape { rows: len, cols: 1 }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn is_1d(&self) -> bool {
        self.cols == 1
    }

    pub fn transposed(&self) -> Shape {
        Shape::new(self.cols, self.rows)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

fn check_len(shape: Shape, data: &[f64]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::Dimension(format!("empty shape {shape}")));
    }
    if shape.len() != data.len() {
        return Err(Error::Dimension(format!(
            "shape {shape} needs {} values, got {}",
            shape.len(),
            data.len()
        )));
    }
    Ok(())
}

macro_rules! grid_accessors {
    ($ty:ident) => {
        impl $ty {
            pub fn shape(&self) -> Shape {
                self.shape
            }

            pub fn rows(&self) -> usize {
                self.shape.rows
            }

            pub fn cols(&self) -> usize {
                self.shape.cols
            }

            pub fn len(&self) -> usize {
                self.data.len()
            }

            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            pub fn data(&self) -> &[f64] {
                &self.data
            }

            pub fn into_data(self) -> Vec<f64> {
                self.data
            }

            #[inline]
            pub fn get(&self, row: usize, col: usize) -> f64 {
                self.data[row * self.shape.cols + col]
            }

            pub fn norm(&self) -> f64 {
                dot(&self.data, &self.data).sqrt()
            }

            pub fn l1_norm(&self) -> f64 {
                self.data.iter().map(|v| v.abs()).sum()
            }

            pub fn mean(&self) -> f64 {
                self.data.iter().sum::<f64>() / self.data.len() as f64
            }

            pub fn transposed(&self) -> Self {
                let Shape { rows, cols } = self.shape;
                let mut data = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        data[c * rows + r] = self.data[r * cols + c];
                    }
                }
                $ty {
                    shape: self.shape.transposed(),
                    data,
                }
            }

            pub fn scaled(&self, factor: f64) -> Self {
                $ty {
                    shape: self.shape,
                    data: self.data.iter().map(|v| v * factor).collect(),
                }
            }
        }
    };
}

/// A finite real-valued 1D or 2D signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    shape: Shape,
    data: Vec<f64>,
}

grid_accessors!(Signal);

impl Signal {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        check_len(shape, &data)?;
        check_finite(&data)?;
        Ok(Signal { shape, data })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Signal::new(Shape::vector(data.len()), data)
    }

    pub fn zeros(shape: Shape) -> Self {
        assert!(!shape.is_empty(), "empty signal shape");
        Signal {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    /// Builds a signal from values computed by the crate itself; panics on
    /// non-finite input since that indicates a bug rather than bad data.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite signal");
        Signal { shape, data }
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Signal> {
        Signal::new(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!("cannot add {} and {}", self.shape, other.shape)));
        }
        Ok(Signal::from_parts(
            self.shape,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn distance(&self, other: &Signal) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Places signals side by side (same row count).
    pub fn hconcat(parts: &[Signal]) -> Result<Signal> {
        let first = parts.first().ok_or_else(|| Error::Parameter("hconcat of nothing".into()))?;
        let rows = first.rows();
        if parts.iter().any(|p| p.rows() != rows) {
            return Err(Error::Dimension("hconcat needs equal row counts".into()));
        }
        let cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(&p.data[r * p.cols()..(r + 1) * p.cols()]);
            }
        }
        Ok(Signal::from_parts(Shape::new(rows, cols), data))
    }
}

/// A small convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    shape: Shape,
    data: Vec<f64>,
}

grid_accessors!(Kernel);

impl Kernel {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        check_len(shape, &data)?;
        check_finite(&data)?;
        Ok(Kernel { shape, data })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Kernel::new(Shape::vector(data.len()), data)
    }

    pub fn zeros(shape: Shape) -> Self {
        assert!(!shape.is_empty(), "empty kernel shape");
        Kernel {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Kernel { shape, data }
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// An ordered list of equally shaped kernels `h_1..h_K`.
///
/// The unit-norm and zero-mean constraints are not enforced on construction,
/// since unnormalised intermediates (half-steps, subgradients) share this
/// layout. Use [`FilterBank::constraint_violation`] to check them.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    filters: Vec<Kernel>,
}

/// Tolerance on the bank constraints after a normalisation step.
pub const CONSTRAINT_TOL: f64 = 1e-12;

impl FilterBank {
    pub fn new(filters: Vec<Kernel>) -> Result<Self> {
        let first = filters
            .first()
            .ok_or_else(|| Error::Parameter("filter bank needs at least one filter".into()))?;
        let shape = first.shape();
        if let Some(bad) = filters.iter().find(|f| f.shape() != shape) {
            return Err(Error::Dimension(format!(
                "filter shapes differ: {} vs {}",
                shape,
                bad.shape()
            )));
        }
        Ok(FilterBank { filters })
    }

    pub fn single(kernel: Kernel) -> Self {
        FilterBank { filters: vec![kernel] }
    }

    pub fn zeros(count: usize, shape: Shape) -> Self {
        assert!(count > 0);
        FilterBank {
            filters: vec![Kernel::zeros(shape); count],
        }
    }

    /// Splits a flat vector into `count` kernels of `shape`.
    pub fn from_flat(count: usize, shape: Shape, flat: Vec<f64>) -> Result<Self> {
        if count == 0 || flat.len() != count * shape.len() {
            return Err(Error::Dimension(format!(
                "{count} filters of {shape} need {} values, got {}",
                count * shape.len(),
                flat.len()
            )));
        }
        let filters = flat
            .chunks(shape.len())
            .map(|c| Kernel::new(shape, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterBank { filters })
    }

    pub(crate) fn from_flat_unchecked(count: usize, shape: Shape, flat: &[f64]) -> Self {
        FilterBank {
            filters: flat
                .chunks(shape.len())
                .take(count)
                .map(|c| Kernel::from_parts(shape, c.to_vec()))
                .collect(),
        }
    }

    pub fn filters(&self) -> &[Kernel] {
        &self.filters
    }

    pub fn filters_mut(&mut self) -> &mut [Kernel] {
        &mut self.filters
    }

    pub fn count(&self) -> usize {
        self.filters.len()
    }

    pub fn kernel_shape(&self) -> Shape {
        self.filters[0].shape()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.filters.iter().flat_map(|f| f.data().iter().copied()).collect()
    }

    /// Joint Euclidean norm over all filters.
    pub fn norm(&self) -> f64 {
        self.filters.iter().map(|f| dot(f.data(), f.data())).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FilterBank) -> f64 {
        self.filters
            .iter()
            .zip(&other.filters)
            .map(|(a, b)| dot(a.data(), b.data()))
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> FilterBank {
        FilterBank {
            filters: self.filters.iter().map(|f| f.scaled(factor)).collect(),
        }
    }

    /// `self + factor * other`
    pub fn axpy(&self, factor: f64, other: &FilterBank) -> FilterBank {
        FilterBank {
            filters: self
                .filters
                .iter()
                .zip(&other.filters)
                .map(|(a, b)| {
                    Kernel::from_parts(
                        a.shape(),
                        a.data().iter().zip(b.data()).map(|(x, y)| x + factor * y).collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn distance(&self, other: &FilterBank) -> f64 {
        self.axpy(-1.0, other).norm()
    }

    pub fn max_abs_diff(&self, other: &FilterBank) -> f64 {
        self.flat()
            .iter()
            .zip(other.flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from the bank constraints: `|‖h‖ − 1|` and the
    /// per-filter `|mean(h_k)|`.
    pub fn constraint_violation(&self) -> f64 {
        let norm_err = (self.norm() - 1.0).abs();
        self.filters.iter().map(|f| f.mean().abs()).fold(norm_err, f64::max)
    }

    pub fn satisfies_constraints(&self) -> bool {
        self.constraint_violation() <= CONSTRAINT_TOL
    }

    /// Returns the same bank with every filter swapped in order.
    pub fn reversed_order(&self) -> FilterBank {
        let mut filters = self.filters.clone();
        filters.reverse();
        FilterBank { filters }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_lengths() {
        assert!(matches!(
            Signal::from_vec(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(Signal::new(Shape::new(2, 2), vec![0.0; 3]).is_err());
        assert!(Signal::from_vec(vec![]).is_err());
        assert!(Kernel::new(Shape::new(1, 2), vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let s = Signal::new(Shape::new(2, 3), (0..6).map(f64::from).collect()).unwrap();
        let t = s.transposed();
        assert_eq!(t.shape(), Shape::new(3, 2));
        assert_eq!(t.get(2, 1), s.get(1, 2));
        assert_eq!(t.transposed(), s);
    }

    #[test]
    fn bank_norm_and_flat_layout() {
        let bank = FilterBank::from_flat(2, Shape::vector(2), vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        assert_eq!(bank.count(), 2);
        assert!((bank.norm() - 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(bank.flat(), vec![1.0, -1.0, 2.0, -2.0]);
        assert!(FilterBank::from_flat(2, Shape::vector(2), vec![0.0; 3]).is_err());
        let mixed = FilterBank::new(vec![Kernel::zeros(Shape::vector(2)), Kernel::zeros(Shape::vector(3))]);
        assert!(mixed.is_err());
    }

    #[test]
    fn hconcat_places_blocks_side_by_side() {
        let a = Signal::new(Shape::new(2, 1), vec![1.0, 2.0]).unwrap();
        let b = Signal::new(Shape::new(2, 2), vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = Signal::hconcat(&[a, b]).unwrap();
        assert_eq!(c.shape(), Shape::new(2, 3));
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }
}
