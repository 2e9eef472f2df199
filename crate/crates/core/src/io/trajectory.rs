//! Trajectory binary files. All integers `u64` LE, all reals `f64` LE.
//!
//! ```text
//! b"QRTRAJ1\n"
//! K p q mode(0 standard, 1 infimal) converged(0/1) count
//! gamma lipschitz                  (both 0 when the denominator is not smoothed)
//! count × { mu mu_half g_half gap  h_k  h_half  grad  grad_half }
//! last
//! ```
//!
//! Each bank is `K·p·q` reals, filters in order, entries row-major.

use std::path::Path;

use crate::error::Result;
use crate::functionals::Mode;
use crate::io::{read_bytes, write_atomic, Reader};
use crate::learning::{Trajectory, TrajectoryRecord};
use crate::signal::{FilterBank, Shape};

const MAGIC: &[u8] = b"QRTRAJ1\n";

pub fn encode(traj: &Trajectory) -> Vec<u8> {
    let shape = traj.last.kernel_shape();
    let mut out = MAGIC.to_vec();
    let mut u = |v: u64| out.extend_from_slice(&v.to_le_bytes());
    u(traj.last.count() as u64);
    u(shape.rows as u64);
    u(shape.cols as u64);
    u(match traj.mode {
        Mode::Standard => 0,
        Mode::Infimal => 1,
    });
    u(traj.converged as u64);
    u(traj.records.len() as u64);
    let mut reals = vec![traj.gamma.unwrap_or(0.0), traj.lipschitz.unwrap_or(0.0)];
    for r in &traj.records {
        reals.extend([r.mu, r.mu_half, r.g_half, r.gap]);
        for b in [&r.bank, &r.half, &r.grad, &r.grad_half] {
            reals.extend(b.flat());
        }
    }
    reals.extend(traj.last.flat());
    for v in reals {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_atomic(path, &encode(traj))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(MAGIC)?;
    let k = r.count()?;
    let p = r.count()?;
    let q = r.count()?;
    if k == 0 || p == 0 || q == 0 {
        return Err(r.error("K, p and q must be positive"));
    }
    let mode = match r.u64()? {
        0 => Mode::Standard,
        1 => Mode::Infimal,
        m => return Err(r.error(format!("unknown mode {m}"))),
    };
    let converged = match r.u64()? {
        0 => false,
        1 => true,
        c => return Err(r.error(format!("bad converged flag {c}"))),
    };
    let count = r.count()?;
    let shape = Shape::new(p, q);
    let len = k.checked_mul(shape.len()).ok_or_else(|| r.error("bank size overflow"))?;
    let expected = count
        .checked_mul(4 + 4 * len)
        .and_then(|n| n.checked_add(2 + len))
        .and_then(|n| n.checked_mul(8));
    if expected != Some(bytes.len() - MAGIC.len() - 48) {
        return Err(r.error(format!("payload size does not match {count} records of {k}x{shape}")));
    }
    let gamma = r.finite_f64()?;
    let lipschitz = r.finite_f64()?;
    let bank = |r: &mut Reader| -> Result<FilterBank> {
        let flat = (0..len).map(|_| r.finite_f64()).collect::<Result<Vec<_>>>()?;
        FilterBank::from_flat(k, shape, flat)
    };
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let (mu, mu_half, g_half, gap) = (r.finite_f64()?, r.finite_f64()?, r.finite_f64()?, r.finite_f64()?);
        records.push(TrajectoryRecord {
            mu,
            mu_half,
            g_half,
            gap,
            bank: bank(&mut r)?,
            half: bank(&mut r)?,
            grad: bank(&mut r)?,
            grad_half: bank(&mut r)?,
        });
    }
    let last = bank(&mut r)?;
    r.finish()?;
    Ok(Trajectory {
        mode,
        gamma: (gamma > 0.0).then_some(gamma),
        lipschitz: (gamma > 0.0).then_some(lipschitz),
        records,
        last,
        converged,
    })
}
