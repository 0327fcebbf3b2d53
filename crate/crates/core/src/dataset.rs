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

//! Design points paired with responses, plus the affine conditioning map
//! applied before solving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sample `(X_1, Y_1), ..., (X_n, Y_n)` with `X_k` in `R^d`.
///
/// Points are stored row-major. Duplicate design points are kept as-is.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    responses: Vec<f64>,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major point buffer.
    pub fn from_flat(points: Vec<f64>, d: usize, responses: Vec<f64>) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::Empty);
        }
        if d == 0 {
            return Err(Error::ShapeMismatch("dimension must be at least 1".into()));
        }
        if points.len() != responses.len() * d {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates cannot form {} points of dimension {}",
                points.len(),
                responses.len(),
                d
            )));
        }
        if let Some(index) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "points",
                index,
            });
        }
        if let Some(index) = responses.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "responses",
                index,
            });
        }
        Ok(Dataset {
            points,
            responses,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.d..(k + 1) * self.d]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// `1 + max_k |Y_k|`, the scale against which solver tolerances are measured.
    pub fn response_scale(&self) -> f64 {
        1.0 + self.responses.iter().fold(0.0_f64, |m, y| m.max(y.abs()))
    }

    /// Same design, different responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Dataset::from_flat(self.points.clone(), self.d, responses)
    }
}

/// Checks rectangular raw input and produces a [`Dataset`].
pub fn validate(raw_points: &[Vec<f64>], raw_responses: &[f64]) -> Result<Dataset> {
    if raw_points.is_empty() && raw_responses.is_empty() {
        return Err(Error::Empty);
    }
    if raw_points.len() != raw_responses.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points but {} responses",
            raw_points.len(),
            raw_responses.len()
        )));
    }
    let d = raw_points[0].len();
    if let Some(row) = raw_points.iter().position(|p| p.len() != d) {
        return Err(Error::ShapeMismatch(format!(
            "row {row} has {} coordinates, expected {d}",
            raw_points[row].len()
        )));
    }
    let flat = raw_points.iter().flatten().copied().collect();
    Dataset::from_flat(flat, d, raw_responses.to_vec())
}

/// Per-coordinate affine map `x' = (x - center) / scale` and response shift
/// `y' = y - response_center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTransform {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Coordinates with zero spread; they map to 0.
    pub degenerate: Vec<bool>,
    pub response_center: f64,
}

impl ScaleTransform {
    pub fn identity(d: usize) -> Self {
        ScaleTransform {
            center: vec![0.0; d],
            scale: vec![1.0; d],
            degenerate: vec![false; d],
            response_center: 0.0,
        }
    }

    pub fn d(&self) -> usize {
        self.center.len()
    }

    pub fn forward_point(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = if self.degenerate[i] {
                0.0
            } else {
                (x[i] - self.center[i]) / self.scale[i]
            };
        }
    }

    pub fn inverse_point(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = if self.degenerate[i] {
                self.center[i]
            } else {
                self.center[i] + self.scale[i] * x[i]
            };
        }
    }

    /// Maps a slope computed in standardized coordinates back to raw units.
    pub fn inverse_slope(&self, xi: &[f64], out: &mut [f64]) {
        for i in 0..xi.len() {
            out[i] = if self.degenerate[i] {
                0.0
            } else {
                xi[i] / self.scale[i]
            };
        }
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        let d = data.d();
        let mut points = vec![0.0; data.points.len()];
        for (src, dst) in data.points.chunks(d).zip(points.chunks_mut(d)) {
            self.forward_point(src, dst);
        }
        let responses = data
            .responses
            .iter()
            .map(|y| y - self.response_center)
            .collect();
        Dataset {
            points,
            responses,
            d,
        }
    }

    pub fn unapply(&self, data: &Dataset) -> Dataset {
        let d = data.d();
        let mut points = vec![0.0; data.points.len()];
        for (src, dst) in data.points.chunks(d).zip(points.chunks_mut(d)) {
            self.inverse_point(src, dst);
        }
        let responses = data
            .responses
            .iter()
            .map(|y| y + self.response_center)
            .collect();
        Dataset {
            points,
            responses,
            d,
        }
    }
}

/// Centers each coordinate at its mean and divides by the largest absolute
/// deviation; centers the responses.
pub fn standardize(data: &Dataset) -> (Dataset, ScaleTransform) {
    let (n, d) = (data.n(), data.d());
    let mut center = vec![0.0; d];
    for p in data.points.chunks(d) {
        for i in 0..d {
            center[i] += p[i];
        }
    }
    for c in &mut center {
        *c /= n as f64;
    }
    let mut scale = vec![0.0_f64; d];
    for p in data.points.chunks(d) {
        for i in 0..d {
            scale[i] = scale[i].max((p[i] - center[i]).abs());
        }
    }
    let degenerate: Vec<bool> = scale
        .iter()
        .zip(&center)
        .map(|(s, c)| *s == 0.0 || *s <= 64.0 * f64::EPSILON * c.abs())
        .collect();
    for (s, deg) in scale.iter_mut().zip(&degenerate) {
        if *deg {
            *s = 1.0;
        }
    }
    let response_center = data.responses.iter().sum::<f64>() / n as f64;
    let transform = ScaleTransform {
        center,
        scale,
        degenerate,
        response_center,
    };
    (transform.apply(data), transform)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_well_formed() {
        let ds = validate(
            &[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]],
            &[1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.point(1), &[2.0, 3.0]);
    }

    #[test]
    fn validate_rejects_bad_input() {
        let pts = [vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]];
        assert!(matches!(
            validate(&pts, &[1.0, 2.0]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            validate(&pts, &[1.0, f64::NAN, 3.0]),
            Err(Error::NonFinite {
                what: "responses",
                index: 1
            })
        ));
        assert!(matches!(validate(&[], &[]), Err(Error::Empty)));
        assert!(matches!(
            validate(&[vec![0.0], vec![1.0, 2.0]], &[1.0, 2.0]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn duplicates_preserved() {
        let ds = validate(&[vec![1.0], vec![1.0]], &[0.0, 2.0]).unwrap();
        assert_eq!(ds.n(), 2);
    }

    #[test]
    fn standardize_two_points() {
        let ds = validate(&[vec![0.0], vec![10.0]], &[1.0, 3.0]).unwrap();
        let (s, t) = standardize(&ds);
        assert_eq!(s.points(), &[-1.0, 1.0]);
        assert_eq!(s.responses(), &[-1.0, 1.0]);
        assert_eq!(t.center, vec![5.0]);
        assert_eq!(t.scale, vec![5.0]);
    }

    #[test]
    fn standardize_flags_constant_coordinate() {
        let ds = validate(
            &[vec![0.0, 7.0], vec![1.0, 7.0], vec![2.0, 7.0]],
            &[0.0, 0.0, 0.0],
        )
        .unwrap();
        let (s, t) = standardize(&ds);
        assert_eq!(t.degenerate, vec![false, true]);
        assert!(s.points().chunks(2).all(|p| p[1] == 0.0));
        let back = t.unapply(&s);
        assert_eq!(back.points(), ds.points());
    }

    #[test]
    fn standardize_is_idempotent() {
        let ds = validate(&[vec![-1.0], vec![0.0], vec![1.0]], &[-1.0, 0.0, 1.0]).unwrap();
        let (s, t) = standardize(&ds);
        assert_eq!(t.center, vec![0.0]);
        assert_eq!(t.scale, vec![1.0]);
        assert_eq!(t.response_center, 0.0);
        assert_eq!(s, ds);
    }
}
