//! Independent oracles shared by the core solver tests and the acceptance suite.

// Each test target uses a different subset.
#![allow(dead_code)]

use qreg_core::functionals::numerator_subgradient;
use qreg_core::pd::half_step_objective;
use qreg_core::{FilterBank, QuotientProblem};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact minimiser of the half-step for one filter with at most three taps.
///
/// The feasible set is at most two-dimensional and every hyperplane where a
/// row of the numerator changes sign passes through the origin, so the cells
/// are the origin, rays along those lines, and open sectors between them. On
/// each cell the numerator is linear, and the minimiser lies in one of them.
pub fn half_step_oracle(problem: &QuotientProblem, h_k: &FilterBank, mu: f64, s: &FilterBank) -> Vec<f64> {
    let n = problem.kernel().len();
    let basis: Vec<Vec<f64>> = match n {
        2 => vec![vec![1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()]],
        3 => vec![
            vec![1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0],
            vec![1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()],
        ],
        _ => unreachable!(),
    };
    let shape = problem.kernel();
    let bank = |v: &[f64]| FilterBank::from_flat(1, shape, v.to_vec()).unwrap();
    let obj = |v: &[f64]| half_step_objective(problem, &bank(v), h_k, mu, s);
    let combine = |a: f64, b: f64| -> Vec<f64> {
        (0..n)
            .map(|i| a * basis[0][i] + if basis.len() > 1 { b * basis[1][i] } else { 0.0 })
            .collect()
    };

    // Directions of the rays in basis coordinates.
    let mut angles = vec![0.0, std::f64::consts::PI];
    if basis.len() == 2 {
        let op = problem.numerator_operator();
        let a = op.apply(&basis[0]);
        let b = op.apply(&basis[1]);
        angles.clear();
        for (ai, bi) in a.iter().zip(&b) {
            if ai.abs() + bi.abs() > 1e-14 {
                let t = (-ai).atan2(*bi);
                angles.push(t.rem_euclid(2.0 * std::f64::consts::PI));
                angles.push((t + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI));
            }
        }
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
    }

    let mut center = h_k.flat();
    let mean = center.iter().sum::<f64>() / n as f64;
    center.iter_mut().for_each(|v| *v -= mean);
    let mut lin: Vec<f64> = s.flat().iter().map(|v| mu * v).collect();
    let mean = lin.iter().sum::<f64>() / n as f64;
    lin.iter_mut().for_each(|v| *v -= mean);

    let mut candidates = vec![vec![0.0; n]];
    for &t in &angles {
        let d = combine(t.cos(), t.sin());
        let slope = problem.numerator_flat(&d);
        let step = ((2.0 * dot(&d, &center) + dot(&d, &lin) - slope) / 2.0).max(0.0);
        candidates.push(d.iter().map(|v| step * v).collect());
    }
    if basis.len() == 2 {
        for i in 0..angles.len() {
            let next = if i + 1 < angles.len() {
                angles[i + 1]
            } else {
                angles[0] + 2.0 * std::f64::consts::PI
            };
            let mid = 0.5 * (angles[i] + next);
            let inner = combine(mid.cos(), mid.sin());
            let mut g = numerator_subgradient(problem, &bank(&inner)).unwrap().flat();
            let mean = g.iter().sum::<f64>() / n as f64;
            g.iter_mut().for_each(|v| *v -= mean);
            candidates.push(
                center
                    .iter()
                    .zip(&lin)
                    .zip(&g)
                    .map(|((c, l), gi)| c + 0.5 * (l - gi))
                    .collect(),
            );
        }
    }
    candidates.into_iter().min_by(|a, b| obj(a).total_cmp(&obj(b))).unwrap()
}

pub fn tv(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `argmin λ·TV(u) + ½‖u − f‖²` through its box-constrained dual, solved by
/// accelerated projected gradient.
pub fn tv_denoise(f: &[f64], lambda: f64) -> Vec<f64> {
    let m = f.len();
    let primal = |p: &[f64]| -> Vec<f64> {
        // u = f − λ·Dᵀp with (Du)_t = u_{t+1} − u_t.
        (0..m)
            .map(|t| {
                let left = if t > 0 { p[t - 1] } else { 0.0 };
                let right = if t < m - 1 { p[t] } else { 0.0 };
                f[t] - lambda * (left - right)
            })
            .collect()
    };
    let step = 1.0 / (4.0 * lambda);
    let mut p = vec![0.0; m - 1];
    let mut z = p.clone();
    let mut t = 1.0f64;
    for _ in 0..100_000 {
        let u = primal(&z);
        let next: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(i, zi)| (zi + step * (u[i + 1] - u[i])).clamp(-1.0, 1.0))
            .collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&p).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        p = next;
        t = t_next;
    }
    primal(&p)
}
