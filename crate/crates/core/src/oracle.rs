// Copyright 2026 The convex-lse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Independent reference solvers and witness generators.
//!
//! In one dimension the cone of convex evaluations is cut out by
//! halfspaces in `z` alone: sorted slopes must be nondecreasing. Dykstra's
//! algorithm projects onto that intersection without touching the slope
//! variables of the main solver. For `d >= 2` no such description exists,
//! and fits are certified with max-affine witnesses instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x -> max_i (<a_i, x> + b_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxAffine {
    d: usize,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl MaxAffine {
    /// `slopes` holds one row of length `d` per piece.
    pub fn new(d: usize, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        if d == 0 || intercepts.is_empty() || slopes.len() != d * intercepts.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} slope entries for {} pieces in dimension {d}",
                slopes.len(),
                intercepts.len()
            )));
        }
        Ok(MaxAffine {
            d,
            slopes,
            intercepts,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn pieces(&self) -> usize {
        self.intercepts.len()
    }

    pub fn slope(&self, i: usize) -> &[f64] {
        &self.slopes[i * self.d..(i + 1) * self.d]
    }

    pub fn intercept(&self, i: usize) -> f64 {
        self.intercepts[i]
    }

    fn piece_value(&self, i: usize, x: &[f64]) -> f64 {
        self.slope(i).iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.intercepts[i]
    }

    /// Index of the piece attaining the max (lowest index on ties).
    pub fn argmax(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut value = self.piece_value(0, x);
        for i in 1..self.pieces() {
            let v = self.piece_value(i, x);
            if v > value {
                best = i;
                value = v;
            }
        }
        best
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.piece_value(self.argmax(x), x)
    }

    /// Slope of the active piece, a subgradient at `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.slope(self.argmax(x)).to_vec()
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.slopes.iter().all(|&a| a <= 0.0)
    }
}

/// Sampling ranges for [`random_max_affine`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRange {
    pub slope: (f64, f64),
    pub intercept: (f64, f64),
    /// Inclusive range for the number of pieces.
    pub pieces: (usize, usize),
}

impl Default for CoefficientRange {
    fn default() -> Self {
        CoefficientRange {
            slope: (-2.0, 2.0),
            intercept: (-1.0, 1.0),
            pieces: (1, 6),
        }
    }
}

impl CoefficientRange {
    /// Same ranges with slopes restricted to be nonpositive.
    pub fn nonincreasing(mut self) -> Self {
        self.slope = (self.slope.0.min(0.0), self.slope.1.min(0.0));
        self
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Deterministic random convex witnesses.
pub fn random_max_affine(
    seed: u64,
    count: usize,
    d: usize,
    range: &CoefficientRange,
) -> Vec<MaxAffine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (lo, hi) = range.pieces;
            let pieces = if hi > lo {
                rng.random_range(lo.max(1)..=hi)
            } else {
                lo.max(1)
            };
            let slopes = (0..pieces * d)
                .map(|_| sample(&mut rng, range.slope))
                .collect();
            let intercepts = (0..pieces)
                .map(|_| sample(&mut rng, range.intercept))
                .collect();
            MaxAffine::new(d, slopes, intercepts).expect("dimensions are consistent")
        })
        .collect()
}

/// Sparse halfspace `sum_i coeff_i z_{index_i} <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Halfspace {
    pub fn value(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * z[i]).sum::<f64>() - self.rhs
    }

    /// Bound on the rounding error of `value`.
    fn rounding(&self, z: &[f64]) -> f64 {
        let mag = self.terms.iter().map(|&(i, a)| (a * z[i]).abs()).sum::<f64>() + self.rhs.abs();
        8.0 * f64::EPSILON * mag
    }

    fn norm_sq(&self) -> f64 {
        self.terms.iter().map(|t| t.1 * t.1).sum()
    }
}

/// Halfspaces in `z` describing convexity on the line.
///
/// `points` are the raw one-dimensional design points in any order. Ties are
/// tied together with a pair of opposing rows; consecutive distinct values
/// contribute one slope-ordering row per interior point.
pub fn d1_cone(points: &[f64], d: usize) -> Result<Vec<Halfspace>> {
    if d != 1 {
        return Err(Error::DimensionError(d));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));
    let mut rows = Vec::new();
    let mut reps: Vec<usize> = Vec::new();
    for (pos, &k) in order.iter().enumerate() {
        if pos > 0 && points[order[pos - 1]] == points[k] {
            let prev = order[pos - 1];
            rows.push(Halfspace {
                terms: vec![(prev, 1.0), (k, -1.0)],
                rhs: 0.0,
            });
            rows.push(Halfspace {
                terms: vec![(prev, -1.0), (k, 1.0)],
                rhs: 0.0,
            });
        } else {
            reps.push(k);
        }
    }
    for w in reps.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let left = points[b] - points[a];
        let right = points[c] - points[b];
        rows.push(Halfspace {
            terms: vec![
                (a, -1.0 / left),
                (b, 1.0 / left + 1.0 / right),
                (c, -1.0 / right),
            ],
            rhs: 0.0,
        });
    }
    Ok(rows)
}

pub const DYKSTRA_MAX_SWEEPS: usize = 1_000_000;

/// Over-relaxation of each corrected projection. With exact projections
/// (1.0) the divided-difference cone needs millions of sweeps at n = 50;
/// any value in (0, 2) converges to the same point.
pub const DYKSTRA_RELAXATION: f64 = 1.9;

/// Euclidean projection of `y` onto the intersection of `halfspaces` by
/// Dykstra's corrected cyclic projections.
pub fn dykstra_project(y: &[f64], halfspaces: &[Halfspace]) -> Result<Vec<f64>> {
    dykstra_project_with(y, halfspaces, 1e-12, DYKSTRA_MAX_SWEEPS)
}

pub fn dykstra_project_with(
    y: &[f64],
    halfspaces: &[Halfspace],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let mut z = y.to_vec();
    // Dykstra's increments are multiples of the row normals, so one scalar
    // per halfspace is enough.
    let mut corr = vec![0.0; halfspaces.len()];
    let norms: Vec<f64> = halfspaces.iter().map(Halfspace::norm_sq).collect();
    let scale = 1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        let mut change = 0.0_f64;
        for (h, (c, &nsq)) in halfspaces.iter().zip(corr.iter_mut().zip(&norms)) {
            if nsq == 0.0 {
                continue;
            }
            // u = z + c * a; project u onto {a.u <= rhs}, over-relaxed.
            let t = (*c + DYKSTRA_RELAXATION * h.value(&z) / nsq).max(0.0);
            let delta = *c - t;
            if delta != 0.0 {
                for &(i, a) in &h.terms {
                    z[i] += delta * a;
                }
                change = change.max(delta.abs() * nsq.sqrt());
            }
            *c = t;
        }
        let violation = halfspaces.iter().fold(0.0_f64, |m, h| m.max(h.value(&z)));
        // Complementarity of the implied multipliers bounds the distance to
        // the projection. A row whose distance to its boundary is within the
        // tolerance counts as active; with large multipliers its rounded
        // slack would otherwise leave a floor near 1e-7.
        let gap = halfspaces
            .iter()
            .zip(corr.iter().zip(&norms))
            .map(|(h, (&c, &nsq))| {
                let slack = -h.value(&z) - h.rounding(&z) - tol * scale * nsq.sqrt();
                c * slack.max(0.0)
            })
            .sum::<f64>();
        residual = violation.max(gap.sqrt()).max(change);
        if residual <= tol * scale {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_sweeps,
        residual,
    })
}
