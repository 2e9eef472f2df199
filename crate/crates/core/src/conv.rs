//! Zero-padded discrete convolution as a linear operator, with exact adjoints.
//!
//! `(u ∗ h)[t] = Σ_s u[s]·h[t−s]`, with every out-of-range term taken as
//! zero. [`Extent::Full`] keeps every output position that touches the
//! signal (`rows+p−1 × cols+q−1`); [`Extent::Valid`] keeps only positions
//! where the kernel lies entirely inside the signal.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::signal::{dot, Kernel, Shape, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extent {
    #[default]
    Full,
    Valid,
}

/// Index bookkeeping shared by the forward map and both adjoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    signal: Shape,
    kernel: Shape,
    output: Shape,
    row_offset: usize,
    col_offset: usize,
}

impl Geometry {
    pub fn new(signal: Shape, kernel: Shape, extent: Extent) -> Result<Self> {
        if signal.is_empty() || kernel.is_empty() {
            return Err(Error::Dimension("empty signal or kernel".into()));
        }
        match extent {
            Extent::Full => Ok(Geometry {
                signal,
                kernel,
                output: Shape::new(signal.rows + kernel.rows - 1, signal.cols + kernel.cols - 1),
                row_offset: 0,
                col_offset: 0,
            }),
            Extent::Valid => {
                if kernel.rows > signal.rows || kernel.cols > signal.cols {
                    return Err(Error::Dimension(format!(
                        "kernel {kernel} larger than signal {signal} for valid extent"
                    )));
                }
                Ok(Geometry {
                    signal,
                    kernel,
                    output: Shape::new(signal.rows - kernel.rows + 1, signal.cols - kernel.cols + 1),
                    row_offset: kernel.rows - 1,
                    col_offset: kernel.cols - 1,
                })
            }
        }
    }

    pub fn signal(&self) -> Shape {
        self.signal
    }

    pub fn kernel(&self) -> Shape {
        self.kernel
    }

    pub fn output(&self) -> Shape {
        self.output
    }

    // Signal rows `a` with `0 <= a + i - row_offset < output.rows`.
    #[inline]
    fn rows_for(&self, i: usize) -> Range<usize> {
        let lo = self.row_offset.saturating_sub(i);
        let hi = (self.output.rows + self.row_offset - i).min(self.signal.rows);
        lo..hi.max(lo)
    }

    #[inline]
    fn cols_for(&self, j: usize) -> Range<usize> {
        let lo = self.col_offset.saturating_sub(j);
        let hi = (self.output.cols + self.col_offset - j).min(self.signal.cols);
        lo..hi.max(lo)
    }

    /// `out += u ∗ h`
    pub fn forward(&self, u: &[f64], h: &[f64], out: &mut [f64]) {
        let (sc, oc, q) = (self.signal.cols, self.output.cols, self.kernel.cols);
        for i in 0..self.kernel.rows {
            let rows = self.rows_for(i);
            for j in 0..q {
                let w = h[i * q + j];
                if w == 0.0 {
                    continue;
                }
                let cols = self.cols_for(j);
                let shift = j as isize - self.col_offset as isize;
                for a in rows.clone() {
                    let t = a + i - self.row_offset;
                    let urow = &u[a * sc..(a + 1) * sc];
                    let orow = &mut out[t * oc..(t + 1) * oc];
                    for b in cols.clone() {
                        orow[(b as isize + shift) as usize] += w * urow[b];
                    }
                }
            }
        }
    }

    /// `g[i,j] = Σ_{a,b} u[a,b]·y[a+i, b+j]` (shifted by the extent offset):
    /// the adjoint of `h ↦ u ∗ h`.
    pub fn adjoint_kernel(&self, u: &[f64], y: &[f64], g: &mut [f64]) {
        let (sc, oc, q) = (self.signal.cols, self.output.cols, self.kernel.cols);
        for i in 0..self.kernel.rows {
            let rows = self.rows_for(i);
            for j in 0..q {
                let cols = self.cols_for(j);
                let shift = j as isize - self.col_offset as isize;
                let mut acc = 0.0;
                for a in rows.clone() {
                    let t = a + i - self.row_offset;
                    let urow = &u[a * sc..(a + 1) * sc];
                    let yrow = &y[t * oc..(t + 1) * oc];
                    for b in cols.clone() {
                        acc += urow[b] * yrow[(b as isize + shift) as usize];
                    }
                }
                g[i * q + j] = acc;
            }
        }
    }

    /// `z += Bᵀy` for `B: u ↦ u ∗ h`.
    pub fn adjoint_signal(&self, h: &[f64], y: &[f64], z: &mut [f64]) {
        let (sc, oc, q) = (self.signal.cols, self.output.cols, self.kernel.cols);
        for i in 0..self.kernel.rows {
            let rows = self.rows_for(i);
            for j in 0..q {
                let w = h[i * q + j];
                if w == 0.0 {
                    continue;
                }
                let cols = self.cols_for(j);
                let shift = j as isize - self.col_offset as isize;
                for a in rows.clone() {
                    let t = a + i - self.row_offset;
                    let yrow = &y[t * oc..(t + 1) * oc];
                    let zrow = &mut z[a * sc..(a + 1) * sc];
                    for b in cols.clone() {
                        zrow[b] += w * yrow[(b as isize + shift) as usize];
                    }
                }
            }
        }
    }
}

/// Full-extent convolution `u ∗ h`.
pub fn convolve(u: &Signal, h: &Kernel) -> Signal {
    convolve_with(u, h, Extent::Full).expect("full extent is always defined")
}

pub fn convolve_with(u: &Signal, h: &Kernel, extent: Extent) -> Result<Signal> {
    let geom = Geometry::new(u.shape(), h.shape(), extent)?;
    let mut out = vec![0.0; geom.output.len()];
    geom.forward(u.data(), h.data(), &mut out);
    Ok(Signal::from_parts(geom.output, out))
}

/// A real linear map between flat vectors.
pub trait LinearOperator {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    /// `out = A x`
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ y`
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);
}

/// `h ↦ u ∗ h` for a fixed signal `u`.
#[derive(Debug, Clone)]
pub struct ConvOperator {
    signal: Signal,
    geometry: Geometry,
}

impl ConvOperator {
    pub fn new(signal: Signal, kernel: Shape, extent: Extent) -> Result<Self> {
        let geometry = Geometry::new(signal.shape(), kernel, extent)?;
        Ok(ConvOperator { signal, geometry })
    }

    pub fn full(signal: Signal, kernel: Shape) -> Self {
        Self::new(signal, kernel, Extent::Full).expect("full extent is always defined")
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn apply(&self, h: &Kernel) -> Result<Signal> {
        if h.shape() != self.geometry.kernel {
            return Err(Error::Dimension(format!(
                "operator expects a {} kernel, got {}",
                self.geometry.kernel,
                h.shape()
            )));
        }
        let mut out = vec![0.0; self.geometry.output.len()];
        self.geometry.forward(self.signal.data(), h.data(), &mut out);
        Ok(Signal::from_parts(self.geometry.output, out))
    }

    /// `Aᵀy`: the cross-correlation of `u` with `y`, restricted to the
    /// kernel support.
    pub fn adjoint_apply(&self, y: &Signal) -> Result<Kernel> {
        if y.shape() != self.geometry.output {
            return Err(Error::Dimension(format!(
                "adjoint expects a {} input, got {}",
                self.geometry.output,
                y.shape()
            )));
        }
        let mut g = vec![0.0; self.geometry.kernel.len()];
        self.geometry.adjoint_kernel(self.signal.data(), y.data(), &mut g);
        Ok(Kernel::from_parts(self.geometry.kernel, g))
    }
}

impl LinearOperator for ConvOperator {
    fn input_len(&self) -> usize {
        self.geometry.kernel.len()
    }

    fn output_len(&self) -> usize {
        self.geometry.output.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.geometry.forward(self.signal.data(), x, out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.geometry.adjoint_kernel(self.signal.data(), y, out);
    }
}

/// `u ↦ u ∗ h` for a fixed kernel `h`.
#[derive(Debug, Clone)]
pub struct FilterOperator {
    kernel: Kernel,
    geometry: Geometry,
}

impl FilterOperator {
    pub fn new(kernel: Kernel, signal: Shape, extent: Extent) -> Result<Self> {
        let geometry = Geometry::new(signal, kernel.shape(), extent)?;
        Ok(FilterOperator { kernel, geometry })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }
}

impl LinearOperator for FilterOperator {
    fn input_len(&self) -> usize {
        self.geometry.signal.len()
    }

    fn output_len(&self) -> usize {
        self.geometry.output.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.geometry.forward(x, self.kernel.data(), out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.geometry.adjoint_signal(self.kernel.data(), y, out);
    }
}

const NORM_REL_TOL: f64 = 1e-10;
const NORM_MAX_ITERS: usize = 20_000;
// Below this input size the Gram matrix is formed and diagonalised exactly.
const DENSE_GRAM_LIMIT: usize = 256;

/// Spectral norm of the vertically stacked operator `[A_1; …; A_n]`,
/// i.e. `sqrt(λ_max(Σ A_iᵀA_i))`.
///
/// Small inputs go through the explicit Gram matrix; larger ones use power
/// iteration. Returns 0 for an identically zero stack.
pub fn operator_norm<O: LinearOperator>(stack: &[O]) -> Result<f64> {
    let first = stack
        .first()
        .ok_or_else(|| Error::Parameter("operator_norm of an empty stack".into()))?;
    let n = first.input_len();
    if stack.iter().any(|op| op.input_len() != n) {
        return Err(Error::Dimension("stacked operators have different input sizes".into()));
    }
    let max_out = stack.iter().map(|op| op.output_len()).max().unwrap_or(0);
    let mut buf = vec![0.0; max_out];
    let mut back = vec![0.0; n];
    let mut gram_apply = |x: &[f64], next: &mut [f64]| {
        next.fill(0.0);
        for op in stack {
            let out = &mut buf[..op.output_len()];
            op.apply_into(x, out);
            op.adjoint_into(out, &mut back);
            next.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
        }
    };

    if n <= DENSE_GRAM_LIMIT {
        let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut unit = vec![0.0; n];
        let mut col = vec![0.0; n];
        for i in 0..n {
            unit[i] = 1.0;
            gram_apply(&unit, &mut col);
            unit[i] = 0.0;
            for (r, v) in col.iter().enumerate() {
                gram[(r, i)] = *v;
            }
        }
        // Symmetrise away rounding before the eigen solve.
        let sym = (&gram + gram.transpose()) * 0.5;
        let lambda = sym.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
        return Ok(lambda.max(0.0).sqrt());
    }

    let mut x: Vec<f64> = CounterRng::new(0x5eed_0f0b).gaussians(n);
    let mut norm = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut next = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..NORM_MAX_ITERS {
        gram_apply(&x, &mut next);
        // ‖AᵀA x‖ for unit x; converges to λ_max from below.
        norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let converged = (norm - lambda).abs() <= NORM_REL_TOL * norm;
        lambda = norm;
        x.iter_mut().zip(&next).for_each(|(a, b)| *a = b / norm);
        if converged {
            break;
        }
    }
    Ok(lambda.sqrt())
}

/// Operator blocks stacked vertically, each reading one slice of the input.
///
/// Used for the bank → (A_t h_{k_t})_t maps of the quotient functionals and
/// for the signal → (u ∗ h_k)_k map of reconstruction. Every block carries a
/// nonnegative weight used by [`StackedOperator::weighted_sum`].
#[derive(Debug, Clone)]
pub struct StackedOperator<O> {
    blocks: Vec<Block<O>>,
    input_len: usize,
    output_len: usize,
}

#[derive(Debug, Clone)]
pub struct Block<O> {
    pub op: O,
    pub input_offset: usize,
    pub output_offset: usize,
    pub weight: f64,
}

impl<O: LinearOperator> StackedOperator<O> {
    pub fn new(input_len: usize) -> Self {
        StackedOperator {
            blocks: Vec::new(),
            input_len,
            output_len: 0,
        }
    }

    pub fn push(&mut self, op: O, input_offset: usize, weight: f64) {
        assert!(input_offset + op.input_len() <= self.input_len, "block exceeds input");
        let output_offset = self.output_len;
        self.output_len += op.output_len();
        self.blocks.push(Block {
            op,
            input_offset,
            output_offset,
            weight,
        });
    }

    pub fn blocks(&self) -> &[Block<O>] {
        &self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Per-element weights of the stacked output.
    pub fn output_weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.output_len);
        for b in &self.blocks {
            w.extend(std::iter::repeat_n(b.weight, b.op.output_len()));
        }
        w
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len];
        self.apply_into(x, &mut out);
        out
    }

    /// `Σ_blocks w_b Σ_t f((A_b x)_t)`
    pub fn weighted_sum(&self, x: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let y = self.apply(x);
        self.blocks
            .iter()
            .map(|b| {
                b.weight
                    * y[b.output_offset..b.output_offset + b.op.output_len()]
                        .iter()
                        .map(|&v| f(v))
                        .sum::<f64>()
            })
            .sum()
    }

    /// `Σ_blocks w_b A_bᵀ f'(A_b x)`
    pub fn weighted_gradient(&self, x: &[f64], fprime: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut y = self.apply(x);
        for b in &self.blocks {
            for v in &mut y[b.output_offset..b.output_offset + b.op.output_len()] {
                *v = b.weight * fprime(*v);
            }
        }
        let mut g = vec![0.0; self.input_len];
        self.adjoint_into(&y, &mut g);
        g
    }
}

impl<O: LinearOperator> LinearOperator for StackedOperator<O> {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let n = b.op.input_len();
            let m = b.op.output_len();
            b.op.apply_into(
                &x[b.input_offset..b.input_offset + n],
                &mut out[b.output_offset..b.output_offset + m],
            );
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = Vec::new();
        for b in &self.blocks {
            let n = b.op.input_len();
            let m = b.op.output_len();
            tmp.resize(n, 0.0);
            b.op.adjoint_into(&y[b.output_offset..b.output_offset + m], &mut tmp);
            out[b.input_offset..b.input_offset + n]
                .iter_mut()
                .zip(&tmp)
                .for_each(|(o, t)| *o += t);
        }
    }
}
