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

//! Factorization of `P + sigma I + A_W^T diag(w) A_W` for a subset `W` of the
//! constraint rows.
//!
//! Every row touches the slope block of a single point, so the slope blocks
//! are eliminated first (each is `d x d`) and the remaining Schur complement
//! in `z` is factored densely.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};

use crate::cone::ConstraintSystem;
use crate::error::{Error, Result};

struct SlopeBlock {
    /// Inverse of the `d x d` diagonal block, row-major.
    inv: Vec<f64>,
    /// z-columns coupled to this block.
    cols: Vec<usize>,
    /// Coupling vectors `u_c`, `d` entries per column.
    coupling: Vec<f64>,
    /// `inv * u_c`, `d` entries per column.
    reduced: Vec<f64>,
}

pub(crate) struct ReducedFactor {
    n: usize,
    d: usize,
    schur: Llt<f64>,
    blocks: Vec<SlopeBlock>,
}

/// Bytes used by the dense Schur complement for `n` points.
pub(crate) fn schur_bytes(n: usize) -> usize {
    n.saturating_mul(n)
        .saturating_mul(std::mem::size_of::<f64>())
}

/// Inverse of a small symmetric positive definite matrix through its
/// Cholesky factor; `None` if a pivot is not positive.
fn invert_small(mat: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut v = mat[i * d + j];
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if v <= 0.0 || !v.is_finite() {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = v / l[j * d + j];
            }
        }
    }
    // Columns of L^{-T} L^{-1} from unit vectors.
    let mut out = vec![0.0; d * d];
    let mut col = vec![0.0; d];
    for c in 0..d {
        for i in 0..d {
            let mut v = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                v -= l[i * d + k] * col[k];
            }
            col[i] = v / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut v = col[i];
            for k in i + 1..d {
                v -= l[k * d + i] * col[k];
            }
            col[i] = v / l[i * d + i];
        }
        for i in 0..d {
            out[i * d + c] = col[i];
        }
    }
    Some(out)
}

/// Factors `P + shift I + weight A_W^T A_W`, raising the shift until the
/// matrix is numerically positive definite.
pub(crate) fn factor_with_retry(
    sys: &ConstraintSystem,
    rows: &[usize],
    weight: f64,
    shift: f64,
) -> Result<ReducedFactor> {
    let weights = vec![weight; rows.len()];
    let mut shift = shift;
    for _ in 0..8 {
        if let Some(f) = ReducedFactor::new(sys, rows, &weights, 1.0, shift) {
            return Ok(f);
        }
        shift *= 10.0;
    }
    Err(Error::NumericalBreakdown(
        "reduced KKT matrix is not positive definite".into(),
    ))
}

impl ReducedFactor {
    /// Factors `diag(p_z, 0) + shift I + sum_r weight[r] a_r a_r^T` over `rows`.
    ///
    /// `p_z` is the objective curvature on the `z` block. Returns `None` if
    /// the matrix is not numerically positive definite.
    pub(crate) fn new(
        sys: &ConstraintSystem,
        rows: &[usize],
        weights: &[f64],
        p_z: f64,
        shift: f64,
    ) -> Option<Self> {
        let (n, d) = (sys.n(), sys.d());
        let mut schur = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            schur[(i, i)] = p_z + shift;
        }
        let mut diag_blocks = vec![0.0; n * d * d];
        for j in 0..n {
            for i in 0..d {
                diag_blocks[j * d * d + i * d + i] = shift;
            }
        }
        // (owner, z-column, coupling vector) triplets before merging.
        let mut raw: Vec<Vec<(usize, Vec<f64>)>> = (0..n).map(|_| Vec::new()).collect();
        let mut xi_part = vec![0.0; d];
        for (&r, &w) in rows.iter().zip(weights) {
            let (cols, vals) = sys.row(r);
            let owner = sys.owner(r);
            xi_part.iter_mut().for_each(|v| *v = 0.0);
            let mut z_part: [(usize, f64); 2] = [(usize::MAX, 0.0); 2];
            let mut nz = 0;
            for (&c, &v) in cols.iter().zip(vals) {
                let c = c as usize;
                if c < n {
                    z_part[nz] = (c, v);
                    nz += 1;
                } else {
                    xi_part[c - n - owner * d] = v;
                }
            }
            for a in &z_part[..nz] {
                for b in &z_part[..nz] {
                    schur[(a.0, b.0)] += w * a.1 * b.1;
                }
            }
            let block = &mut diag_blocks[owner * d * d..(owner + 1) * d * d];
            for p in 0..d {
                if xi_part[p] != 0.0 {
                    for q in 0..d {
                        block[p * d + q] += w * xi_part[p] * xi_part[q];
                    }
                }
            }
            if xi_part.iter().any(|&v| v != 0.0) {
                for &(c, v) in &z_part[..nz] {
                    raw[owner].push((c, xi_part.iter().map(|x| w * v * x).collect()));
                }
            }
        }

        let mut blocks = Vec::with_capacity(n);
        for (owner, mut entries) in raw.into_iter().enumerate() {
            let inv = invert_small(&diag_blocks[owner * d * d..(owner + 1) * d * d], d)?;
            entries.sort_by_key(|e| e.0);
            let mut cols: Vec<usize> = Vec::new();
            let mut coupling: Vec<f64> = Vec::new();
            for (c, u) in entries {
                if cols.last() == Some(&c) {
                    let start = coupling.len() - d;
                    for (acc, v) in coupling[start..].iter_mut().zip(&u) {
                        *acc += v;
                    }
                } else {
                    cols.push(c);
                    coupling.extend_from_slice(&u);
                }
            }
            let mut reduced = vec![0.0; coupling.len()];
            for (u, v) in coupling.chunks(d).zip(reduced.chunks_mut(d)) {
                for p in 0..d {
                    v[p] = (0..d).map(|q| inv[p * d + q] * u[q]).sum();
                }
            }
            for (a, &ca) in cols.iter().enumerate() {
                let va = &reduced[a * d..(a + 1) * d];
                for (b, &cb) in cols.iter().enumerate() {
                    let ub = &coupling[b * d..(b + 1) * d];
                    let dot: f64 = va.iter().zip(ub).map(|(x, y)| x * y).sum();
                    schur[(ca, cb)] -= dot;
                }
            }
            blocks.push(SlopeBlock {
                inv,
                cols,
                coupling,
                reduced,
            });
        }
        let schur = schur.llt(Side::Lower).ok()?;
        Some(ReducedFactor {
            n,
            d,
            schur,
            blocks,
        })
    }

    /// Solves the factored system for a stacked right-hand side `(r_z, r_xi)`.
    pub(crate) fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        let mut w = vec![0.0; n * d];
        let mut tz = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        for (j, block) in self.blocks.iter().enumerate() {
            let r = &rhs[n + j * d..n + (j + 1) * d];
            let wj = &mut w[j * d..(j + 1) * d];
            for p in 0..d {
                wj[p] = (0..d).map(|q| block.inv[p * d + q] * r[q]).sum();
            }
            for (a, &c) in block.cols.iter().enumerate() {
                let u = &block.coupling[a * d..(a + 1) * d];
                tz[(c, 0)] -= u.iter().zip(wj.iter()).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        self.schur.solve_in_place(&mut tz);
        for i in 0..n {
            out[i] = tz[(i, 0)];
        }
        for (j, block) in self.blocks.iter().enumerate() {
            let xi = &mut out[n + j * d..n + (j + 1) * d];
            xi.copy_from_slice(&w[j * d..(j + 1) * d]);
            for (a, &c) in block.cols.iter().enumerate() {
                let v = &block.reduced[a * d..(a + 1) * d];
                for p in 0..d {
                    xi[p] -= v[p] * tz[(c, 0)];
                }
            }
        }
    }
}
