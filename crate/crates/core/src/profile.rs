//! Macroscopic density profiles on the unit torus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FepError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { value: f64 },
    /// `base + amp * sin(2 pi u)`
    Sinusoid { base: f64, amp: f64 },
    /// Piecewise constant; piece `i` covers `[start_i, start_{i+1})` and the
    /// last piece wraps around to the first start.
    Piecewise { pieces: Vec<Piece> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub start: f64,
    pub value: f64,
}

impl ProfileSpec {
    pub fn constant(value: f64) -> Self {
        ProfileSpec::Constant { value }
    }

    pub fn sinusoid(base: f64, amp: f64) -> Self {
        ProfileSpec::Sinusoid { base, amp }
    }

    pub fn piecewise(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(FepError::Invalid("piecewise profile needs a piece".into()));
        }
        let ok = pieces.windows(2).all(|w| w[0].start < w[1].start)
            && pieces.iter().all(|p| (0.0..1.0).contains(&p.start));
        if !ok {
            return Err(FepError::Invalid(
                "piece starts must increase within [0, 1)".into(),
            ));
        }
        Ok(ProfileSpec::Piecewise { pieces })
    }

    /// Value at `u`, taken modulo 1.
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Sinusoid { base, amp } => base + amp * (2.0 * PI * u).sin(),
            ProfileSpec::Piecewise { pieces } => {
                let u = u.rem_euclid(1.0);
                pieces
                    .iter()
                    .rev()
                    .find(|p| p.start <= u)
                    .unwrap_or_else(|| pieces.last().expect("nonempty"))
                    .value
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Sinusoid { base, amp } => base - amp.abs(),
            ProfileSpec::Piecewise { pieces } => {
                pieces.iter().map(|p| p.value).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Sinusoid { base, amp } => base + amp.abs(),
            ProfileSpec::Piecewise { pieces } => {
                pieces.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Mean over the torus.
    pub fn mean(&self) -> f64 {
        match self {
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Sinusoid { base, .. } => *base,
            ProfileSpec::Piecewise { pieces } => {
                let n = pieces.len();
                (0..n)
                    .map(|i| {
                        let end = if i + 1 < n {
                            pieces[i + 1].start
                        } else {
                            pieces[0].start + 1.0
                        };
                        (end - pieces[i].start) * pieces[i].value
                    })
                    .sum()
            }
        }
    }

    /// Rejects profiles leaving `(1/2, 1]`.
    pub fn check_supercritical(&self) -> Result<()> {
        let (lo, hi) = (self.min(), self.max());
        if !(lo > 0.5 && hi <= 1.0) {
            return Err(FepError::Density {
                rho: if lo <= 0.5 { lo } else { hi },
                range: "(1/2, 1]",
            });
        }
        Ok(())
    }

    /// Values at the cell centers `(i + 1/2) / m`.
    pub fn cell_centers(&self, m: usize) -> Vec<f64> {
        (0..m).map(|i| self.eval((i as f64 + 0.5) / m as f64)).collect()
    }
}
