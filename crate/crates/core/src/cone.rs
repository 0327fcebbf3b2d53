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

//! The homogeneous inequality system whose feasible set, projected onto the
//! `z` coordinates, is the cone of convex-function evaluations at the design.
//!
//! Variables are ordered `z_1..z_n` followed by `xi_1..xi_n` (row-major, `d`
//! entries each). Pair row `(j, k)`, `j != k`, reads
//!
//! ```text
//! <xi_j, X_k - X_j> - z_k + z_j <= 0
//! ```
//!
//! and for the nonincreasing variant `n * d` sign rows `xi_j^i <= 0` follow.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::Variant;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    n: usize,
    d: usize,
    variant: Variant,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Default budget for the sparse rows, 2 GiB.
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// Bytes needed to store the rows of a system of this size.
pub fn required_bytes(n: usize, d: usize, variant: Variant) -> usize {
    let pair_rows = n.saturating_mul(n.saturating_sub(1));
    let sign_rows = if variant.is_monotone() { n * d } else { 0 };
    let nnz = pair_rows.saturating_mul(d + 2).saturating_add(sign_rows);
    let per_entry = std::mem::size_of::<u32>() + std::mem::size_of::<f64>();
    nnz.saturating_mul(per_entry)
        .saturating_add((pair_rows + sign_rows + 1).saturating_mul(std::mem::size_of::<usize>()))
}

pub fn build_constraints(data: &Dataset, variant: Variant) -> Result<ConstraintSystem> {
    build_constraints_with_budget(data, variant, DEFAULT_MEMORY_BUDGET)
}

pub fn build_constraints_with_budget(
    data: &Dataset,
    variant: Variant,
    budget: usize,
) -> Result<ConstraintSystem> {
    let (n, d) = (data.n(), data.d());
    let required = required_bytes(n, d, variant);
    if required > budget || n.saturating_mul(d + 1) > u32::MAX as usize {
        return Err(Error::CapacityExceeded { required, budget });
    }
    let pair_rows = n * (n - 1);
    let sign_rows = if variant.is_monotone() { n * d } else { 0 };
    let mut row_ptr = Vec::with_capacity(pair_rows + sign_rows + 1);
    let mut cols = Vec::with_capacity(pair_rows * (d + 2) + sign_rows);
    let mut vals = Vec::with_capacity(pair_rows * (d + 2) + sign_rows);
    row_ptr.push(0);
    for j in 0..n {
        let xj = data.point(j);
        for k in (0..n).filter(|&k| k != j) {
            let xk = data.point(k);
            let (first, second) = if j < k {
                ((j, 1.0), (k, -1.0))
            } else {
                ((k, -1.0), (j, 1.0))
            };
            for (c, v) in [first, second] {
                cols.push(c as u32);
                vals.push(v);
            }
            for i in 0..d {
                let delta = xk[i] - xj[i];
                if delta != 0.0 {
                    cols.push((n + j * d + i) as u32);
                    vals.push(delta);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    for j in 0..sign_rows {
        cols.push((n + j) as u32);
        vals.push(1.0);
        row_ptr.push(cols.len());
    }
    Ok(ConstraintSystem {
        n,
        d,
        variant,
        row_ptr,
        cols,
        vals,
    })
}

impl ConstraintSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_vars(&self) -> usize {
        self.n * (self.d + 1)
    }

    pub fn pair_rows(&self) -> usize {
        self.n * self.n.saturating_sub(1)
    }

    pub fn row_count(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column indices and coefficients of row `r`.
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    /// Index of pair row `(j, k)`.
    pub fn pair_index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j != k);
        j * (self.n - 1) + if k < j { k } else { k - 1 }
    }

    /// Inverse of [`pair_index`](Self::pair_index).
    pub fn pair_of(&self, r: usize) -> (usize, usize) {
        let j = r / (self.n - 1);
        let k = r % (self.n - 1);
        (j, if k < j { k } else { k + 1 })
    }

    /// The point whose slope block appears in row `r`.
    pub fn owner(&self, r: usize) -> usize {
        let pairs = self.pair_rows();
        if r < pairs {
            r / (self.n - 1)
        } else {
            (r - pairs) / self.d
        }
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(r);
        cols.iter().zip(vals).map(|(&c, v)| v * x[c as usize]).sum()
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(r, x);
        }
    }

    /// `out += A^T y` restricted to the listed rows.
    pub fn apply_transpose_rows(&self, rows: &[usize], y: &[f64], out: &mut [f64]) {
        for (&r, &yr) in rows.iter().zip(y) {
            if yr != 0.0 {
                let (cols, vals) = self.row(r);
                for (&c, v) in cols.iter().zip(vals) {
                    out[c as usize] += v * yr;
                }
            }
        }
    }

    /// Copy of the system with column `c` multiplied by `scale[c]`; entries
    /// whose scale is zero are dropped.
    pub(crate) fn with_column_scale(&self, scale: &[f64]) -> ConstraintSystem {
        let mut row_ptr = Vec::with_capacity(self.row_ptr.len());
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        row_ptr.push(0);
        for r in 0..self.row_count() {
            let (rc, rv) = self.row(r);
            for (&c, &v) in rc.iter().zip(rv) {
                let s = scale[c as usize];
                if s != 0.0 {
                    cols.push(c);
                    vals.push(v * s);
                }
            }
            row_ptr.push(cols.len());
        }
        ConstraintSystem {
            n: self.n,
            d: self.d,
            variant: self.variant,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Largest row value over all rows, for a stacked vector `x = (z, xi)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.row_count()).fold(0.0_f64, |m, r| m.max(self.row_dot(r, x)))
    }
}

/// Largest constraint violation of `(z, xi)`; zero means feasible.
pub fn residual(system: &ConstraintSystem, z: &[f64], xi: &[f64]) -> Result<f64> {
    let (n, d) = (system.n(), system.d());
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.len(),
        });
    }
    if xi.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: xi.len(),
        });
    }
    let mut x = Vec::with_capacity(n * (d + 1));
    x.extend_from_slice(z);
    x.extend_from_slice(xi);
    Ok(system.max_violation(&x))
}
