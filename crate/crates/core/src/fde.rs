//! Explicit finite-volume solver for `d_t rho = Laplacian((2 rho - 1) / rho)`
//! on the unit torus.
//!
//! With `g(rho) = 2 - 1/rho` the scheme is
//! `rho_i += dt/dx^2 * (g(rho_{i+1}) - 2 g(rho_i) + g(rho_{i-1}))`, written in
//! flux form so that mass is conserved to rounding. Since `g' = 1/rho^2`, the
//! update is monotone (and therefore obeys the discrete maximum principle)
//! as long as `dt <= dx^2 (min rho)^2 / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{FepError, Result};
use crate::profile::ProfileSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub cells: Vec<f64>,
    pub t: f64,
}

#[inline]
fn g(rho: f64) -> f64 {
    2.0 - 1.0 / rho
}

impl DensityProfile {
    pub fn new(cells: Vec<f64>) -> Result<Self> {
        if cells.is_empty() {
            return Err(FepError::Invalid("profile needs at least one cell".into()));
        }
        check_range(&cells)?;
        Ok(Self { cells, t: 0.0 })
    }

    /// Cell-centered samples `rho0((i + 1/2) / m)`.
    pub fn from_spec(spec: &ProfileSpec, m: usize) -> Result<Self> {
        Self::new(spec.cell_centers(m))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells.len() as f64
    }

    pub fn mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() * self.dx()
    }

    pub fn min(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest admissible time step.
    pub fn stability_bound(&self) -> f64 {
        let dx = self.dx();
        dx * dx * self.min().powi(2) / 2.0
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.cells.len() as f64;
        (0..self.cells.len()).map(move |i| (i as f64 + 0.5) / m)
    }

    /// Piecewise-linear periodic interpolation through the cell centers.
    pub fn interpolate(&self, u: f64) -> f64 {
        let m = self.cells.len();
        let s = u.rem_euclid(1.0) * m as f64 - 0.5;
        let i = s.floor();
        let w = s - i;
        let i0 = (i as isize).rem_euclid(m as isize) as usize;
        let i1 = (i0 + 1) % m;
        (1.0 - w) * self.cells[i0] + w * self.cells[i1]
    }

    /// `sum |rho_i - c| dx`.
    pub fn l1_distance_to(&self, c: f64) -> f64 {
        self.cells.iter().map(|r| (r - c).abs()).sum::<f64>() * self.dx()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,rho\n");
        for (u, r) in self.centers().zip(&self.cells) {
            out.push_str(&format!("{u},{r}\n"));
        }
        out
    }
}

fn check_range(cells: &[f64]) -> Result<()> {
    for (i, &v) in cells.iter().enumerate() {
        if !(v > 0.5 && v <= 1.0 + 1e-12) {
            return Err(FepError::OutOfRange { cell: i, value: v });
        }
    }
    Ok(())
}

/// One explicit step of length `dt`.
pub fn fde_step(profile: &DensityProfile, dt: f64) -> Result<DensityProfile> {
    let mut next = profile.clone();
    let mut scratch = Vec::new();
    step_in_place(&mut next, dt, &mut scratch)?;
    Ok(next)
}

fn step_in_place(p: &mut DensityProfile, dt: f64, gvals: &mut Vec<f64>) -> Result<()> {
    let bound = p.stability_bound();
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(FepError::Unstable { dt, bound });
    }
    let m = p.cells.len();
    let dx = p.dx();
    let lambda = dt / (dx * dx);
    gvals.clear();
    gvals.extend(p.cells.iter().map(|&r| g(r)));
    // flux through the right face of cell i is g_{i+1} - g_i
    let wrap = gvals[0] - gvals[m - 1];
    let mut left = wrap;
    for i in 0..m {
        let right = if i + 1 < m { gvals[i + 1] - gvals[i] } else { wrap };
        p.cells[i] += lambda * (right - left);
        left = right;
    }
    p.t += dt;
    check_range(&p.cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DtPolicy {
    /// Fraction of the stability bound of the initial profile.
    Auto { safety: f64 },
    Fixed(f64),
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Auto { safety: 0.9 }
    }
}

impl DtPolicy {
    /// Step size for a run from `initial`. The minimum never decreases along
    /// the run, so the bound of the initial profile stays valid.
    pub fn dt_for(&self, initial: &DensityProfile) -> f64 {
        match *self {
            DtPolicy::Auto { safety } => safety * initial.stability_bound(),
            DtPolicy::Fixed(dt) => dt,
        }
    }
}

/// Solve up to `t_end`; the last step is shortened to land on `t_end`.
pub fn solve_fde(initial: &DensityProfile, t_end: f64, policy: DtPolicy) -> Result<DensityProfile> {
    let mut out = None;
    solve_fde_with(initial, t_end, policy, 0, |p| out = Some(p.clone()))?;
    Ok(out.expect("final profile is always reported"))
}

/// Like [`solve_fde`], reporting a snapshot every `cadence` steps (never if
/// `cadence == 0`) and always the final profile.
pub fn solve_fde_with<F: FnMut(&DensityProfile)>(
    initial: &DensityProfile,
    t_end: f64,
    policy: DtPolicy,
    cadence: usize,
    mut on_snapshot: F,
) -> Result<u64> {
    if !(t_end >= initial.t) {
        return Err(FepError::Invalid(format!("t_end {t_end} before start")));
    }
    let dt = policy.dt_for(initial);
    let mut p = initial.clone();
    let mut scratch = Vec::with_capacity(p.len());
    let start = p.t;
    let mut steps: u64 = 0;
    loop {
        let remaining = t_end - p.t;
        if remaining <= 1e-15 * t_end.abs().max(1.0) {
            break;
        }
        let h = if remaining < dt { remaining } else { dt };
        step_in_place(&mut p, h, &mut scratch)?;
        steps += 1;
        // recompute from the step count to avoid drift in the clock
        if h == dt {
            p.t = start + steps as f64 * dt;
            if p.t > t_end {
                p.t = t_end;
            }
        } else {
            p.t = t_end;
        }
        if cadence > 0 && steps % cadence as u64 == 0 {
            on_snapshot(&p);
        }
    }
    on_snapshot(&p);
    Ok(steps)
}
