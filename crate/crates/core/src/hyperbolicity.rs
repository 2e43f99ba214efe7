//! Gromov four-point δ-hyperbolicity of a finite metric.
//!
//! For a quadruple `(i, j, k, l)` the three pairings
//! `d(i,j)+d(k,l)`, `d(i,k)+d(j,l)`, `d(i,l)+d(j,k)` are formed; δ is half
//! the largest gap between the top two over all quadruples. Tree metrics
//! have δ = 0.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    /// δ divided by the largest distance in the matrix.
    Max,
    /// Per quadruple, half-gap divided by the sum of its six distances.
    Perimeter,
    /// Per quadruple, half-gap divided by its largest pairing sum.
    MaxSum,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "max" => Ok(Normalization::Max),
            "perimeter" => Ok(Normalization::Perimeter),
            "max_sum" | "max-sum" => Ok(Normalization::MaxSum),
            _ => Err(Error::InvalidArgument(format!(
                "unknown normalization `{s}` (none, max, perimeter, max_sum)"
            ))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::Max => "max",
            Normalization::Perimeter => "perimeter",
            Normalization::MaxSum => "max_sum",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaReport {
    pub delta: f64,
    pub normalization: Normalization,
    /// δ under `normalization`; equal to `delta` for `None`.
    pub ratio: f64,
    /// Indices of the quadruple attaining `ratio` (lexicographically
    /// smallest on ties).
    pub argmax: [usize; 4],
    pub argmax_labels: [String; 4],
}

/// `C(b, 4)`, the number of quadruples examined.
pub fn quadruple_count(b: usize) -> u128 {
    if b < 4 {
        return 0;
    }
    let b = b as u128;
    b * (b - 1) * (b - 2) * (b - 3) / 24
}

#[inline(always)]
fn gap(a1: f64, a2: f64, a3: f64) -> (f64, f64) {
    let hi = a1.max(a2).max(a3);
    let mid = a1.min(a2).max(a1.max(a2).min(a3));
    (hi - mid, hi)
}

#[derive(Clone, Copy, Debug)]
struct Best {
    score: f64,
    gap: f64,
    quad: [usize; 4],
}

impl Best {
    const NONE: Best = Best {
        score: f64::NEG_INFINITY,
        gap: 0.0,
        quad: [usize::MAX; 4],
    };

    fn better(self, other: Best) -> Best {
        if other.score > self.score || (other.score == self.score && other.quad < self.quad) {
            other
        } else {
            self
        }
    }
}

/// Best quadruple with smallest index `i`.
fn scan_outer(d: &DistanceMatrix, i: usize, norm: Normalization) -> Best {
    let n = d.len();
    let ri = d.row(i);
    let mut best = Best::NONE;
    for j in (i + 1)..n {
        let rj = d.row(j);
        let dij = ri[j];
        for k in (j + 1)..n {
            let rk = d.row(k);
            let (dik, djk) = (ri[k], rj[k]);
            let (li, lj, lk) = (&ri[k + 1..], &rj[k + 1..], &rk[k + 1..]);
            match norm {
                Normalization::None | Normalization::Max => {
                    // Max first (vectorizes), then locate only on improvement.
                    let mut m = f64::NEG_INFINITY;
                    for t in 0..lk.len() {
                        m = m.max(gap(dij + lk[t], dik + lj[t], djk + li[t]).0);
                    }
                    if m > best.score {
                        let t = (0..lk.len())
                            .position(|t| gap(dij + lk[t], dik + lj[t], djk + li[t]).0 == m)
                            .expect("max is attained");
                        best = Best {
                            score: m,
                            gap: m,
                            quad: [i, j, k, k + 1 + t],
                        };
                    }
                }
                Normalization::Perimeter | Normalization::MaxSum => {
                    for t in 0..lk.len() {
                        let (a1, a2, a3) = (dij + lk[t], dik + lj[t], djk + li[t]);
                        let (g, hi) = gap(a1, a2, a3);
                        let denom = if norm == Normalization::Perimeter {
                            a1 + a2 + a3
                        } else {
                            hi
                        };
                        let s = if denom > 0.0 { g / denom } else { 0.0 };
                        if s > best.score {
                            best = Best {
                                score: s,
                                gap: g,
                                quad: [i, j, k, k + 1 + t],
                            };
                        }
                    }
                }
            }
        }
    }
    best
}

/// Exact δ over all quadruples; outer index distributed over the rayon
/// pool with a deterministic reduction.
pub fn gromov_delta(d: &DistanceMatrix, norm: Normalization) -> Result<DeltaReport> {
    let n = d.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "δ needs at least 4 points, got {n}"
        )));
    }
    let best = (0..n - 3)
        .into_par_iter()
        .map(|i| scan_outer(d, i, norm))
        .reduce(|| Best::NONE, Best::better);
    let delta = match norm {
        Normalization::None | Normalization::Max => best.gap / 2.0,
        // The normalized winner need not carry the largest raw gap.
        _ => gromov_delta(d, Normalization::None)?.delta,
    };
    let ratio = match norm {
        Normalization::None => delta,
        Normalization::Max => {
            let m = d.max();
            if m > 0.0 {
                delta / m
            } else {
                0.0
            }
        }
        Normalization::Perimeter | Normalization::MaxSum => best.score / 2.0,
    };
    let q = best.quad;
    Ok(DeltaReport {
        delta,
        normalization: norm,
        ratio,
        argmax: q,
        argmax_labels: q.map(|i| d.labels()[i].clone()),
    })
}

/// True iff the top two pairing sums of every quadruple differ by at most
/// `tol`. Vacuously true below four points.
pub fn four_point_check(d: &DistanceMatrix, tol: f64) -> bool {
    if d.len() < 4 {
        return true;
    }
    let best = (0..d.len() - 3)
        .into_par_iter()
        .map(|i| scan_outer(d, i, Normalization::None))
        .reduce(|| Best::NONE, Best::better);
    best.gap <= tol
}
