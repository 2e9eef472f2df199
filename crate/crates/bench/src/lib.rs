//! Shared fixtures for the solver benchmarks.

use qreg_core::synth::{make_1d, make_2d, noise, Kind1d, Kind2d, NoiseSpec, Orientation};
use qreg_core::{FilterBank, Kernel, QuotientProblem, Shape, Signal};

/// Step against noise on 128 samples.
pub fn step_problem(taps: usize) -> QuotientProblem {
    let step = make_1d(
        &Kind1d::Step {
            start: 32,
            end: 64,
            height: 1.0,
        },
        128,
    )
    .unwrap();
    let n = noise(Shape::vector(128), NoiseSpec { sigma: 0.3, seed: 7 }).unwrap();
    QuotientProblem::standard(vec![step], vec![n], 1, Shape::vector(taps)).unwrap()
}

pub fn stripes(size: usize) -> Signal {
    make_2d(
        &Kind2d::Stripes {
            orientation: Orientation::Vertical,
            thickness: 4,
            spacing: 4,
        },
        size,
        size,
        1.0,
    )
    .unwrap()
}

/// Stripes against noise on a `size`×`size` grid with a square kernel.
pub fn stripes_problem(size: usize, taps: usize) -> QuotientProblem {
    let n = noise(Shape::new(size, size), NoiseSpec { sigma: 0.3, seed: 21 }).unwrap();
    QuotientProblem::standard(vec![stripes(size)], vec![n], 1, Shape::new(taps, taps)).unwrap()
}

pub fn diagonal_bank() -> FilterBank {
    FilterBank::single(Kernel::new(Shape::new(2, 2), vec![0.5, -0.5, -0.5, 0.5]).unwrap())
}
