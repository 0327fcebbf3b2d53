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

//! Two-phase revised simplex for the envelope LP
//!
//! ```text
//! minimize   sum_k theta_k z_k
//! subject to sum_k theta_k X_k (+ vartheta) = x,  sum_k theta_k = 1,
//!            theta >= 0 (, vartheta >= 0)
//! ```
//!
//! The LP has `d + 1` rows, so the basis inverse is rebuilt densely at every
//! pivot. Bland's rule picks both the entering and the leaving variable.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;
const DRIVE_OUT_TOL: f64 = 1e-9;

pub(crate) struct EnvelopeLp<'a> {
    pub points: &'a [f64],
    pub d: usize,
    pub costs: &'a [f64],
    /// Adds one free-disposal column `e_i` per coordinate.
    pub monotone: bool,
}

pub(crate) struct Solution {
    pub value: f64,
    /// `(structural index, value)` of basic structural variables.
    pub basic: Vec<(usize, f64)>,
    /// Dual multipliers of the `d` coordinate rows followed by the
    /// normalization row, in the original row signs.
    pub dual: Vec<f64>,
}

pub(crate) enum Outcome {
    Infeasible,
    Optimal(Solution),
}

struct Tableau<'a> {
    lp: &'a EnvelopeLp<'a>,
    m: usize,
    n_struct: usize,
    sign: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
}

/// Inverts a small dense matrix by Gauss-Jordan elimination with partial
/// pivoting.
fn invert(mat: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut a = mat.to_vec();
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for col in 0..m {
        let (piv, best) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if best < 1e-14 {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
                inv.swap(piv * m + c, col * m + c);
            }
        }
        let p = a[col * m + col];
        for c in 0..m {
            a[col * m + c] /= p;
            inv[col * m + c] /= p;
        }
        for r in (0..m).filter(|&r| r != col) {
            let f = a[r * m + col];
            if f != 0.0 {
                for c in 0..m {
                    a[r * m + c] -= f * a[col * m + c];
                    inv[r * m + c] -= f * inv[col * m + c];
                }
            }
        }
    }
    Some(inv)
}

impl<'a> Tableau<'a> {
    fn column(&self, j: usize, out: &mut [f64]) {
        let d = self.lp.d;
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = self.lp.costs.len();
        if j < n {
            for i in 0..d {
                out[i] = self.sign[i] * self.lp.points[j * d + i];
            }
            out[d] = self.sign[d];
        } else if j < self.n_struct {
            out[j - n] = self.sign[j - n];
        } else {
            out[j - self.n_struct] = 1.0;
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_struct
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            for i in 0..m {
                b[i * m + r] = col[i];
            }
        }
        self.binv =
            invert(&b, m).ok_or_else(|| Error::NumericalBreakdown("singular basis".into()))?;
        for r in 0..m {
            self.xb[r] = (0..m).map(|i| self.binv[r * m + i] * self.rhs[i]).sum();
        }
        Ok(())
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|r| cost(self.basis[r]) * self.binv[r * m + i])
                    .sum()
            })
            .collect()
    }

    fn ftran(&self, col: &[f64], out: &mut [f64]) {
        let m = self.m;
        for r in 0..m {
            out[r] = (0..m).map(|i| self.binv[r * m + i] * col[i]).sum();
        }
    }

    /// Runs Bland-rule pivots for `cost` until optimal.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64, cost_scale: f64) -> Result<()> {
        let m = self.m;
        let rc_tol = 1e-11 * cost_scale;
        let cap = 50 * (self.n_struct + m) + 1000;
        let mut col = vec![0.0; m];
        let mut dir = vec![0.0; m];
        for _ in 0..cap {
            let pi = self.duals(cost);
            let mut entering = None;
            for j in 0..self.n_struct {
                if self.basis.contains(&j) {
                    continue;
                }
                self.column(j, &mut col);
                let rc = cost(j) - pi.iter().zip(&col).map(|(p, c)| p * c).sum::<f64>();
                if rc < -rc_tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };
            self.column(q, &mut col);
            self.ftran(&col, &mut dir);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                if dir[r] > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / dir[r];
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio);
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::NumericalBreakdown(format!(
                    "no admissible pivot for entering column {q}"
                )));
            };
            self.basis[r] = q;
            self.refactor()?;
        }
        Err(Error::NumericalBreakdown("pivot limit reached".into()))
    }

    /// Replaces basic artificials by structural columns where possible.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m;
        let mut col = vec![0.0; m];
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..self.n_struct {
                if self.basis.contains(&j) {
                    continue;
                }
                self.column(j, &mut col);
                let alpha: f64 = (0..m).map(|i| self.binv[r * m + i] * col[i]).sum();
                if alpha > DRIVE_OUT_TOL {
                    pick = Some((j, alpha));
                    break;
                }
                if alpha.abs() > DRIVE_OUT_TOL && pick.is_none() {
                    pick = Some((j, alpha));
                }
            }
            if let Some((j, _)) = pick {
                self.basis[r] = j;
                self.refactor()?;
            }
        }
        Ok(())
    }
}

pub(crate) fn solve(lp: &EnvelopeLp<'_>, x: &[f64]) -> Result<Outcome> {
    let d = lp.d;
    let m = d + 1;
    let n = lp.costs.len();
    let n_struct = n + if lp.monotone { d } else { 0 };
    let mut rhs: Vec<f64> = x.to_vec();
    rhs.push(1.0);
    let sign: Vec<f64> = rhs
        .iter()
        .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
        .collect();
    for (b, s) in rhs.iter_mut().zip(&sign) {
        *b *= s;
    }
    let mut t = Tableau {
        lp,
        m,
        n_struct,
        sign,
        rhs,
        basis: (n_struct..n_struct + m).collect(),
        binv: vec![0.0; m * m],
        xb: vec![0.0; m],
    };
    t.refactor()?;

    let phase_one = |j: usize| if j >= n_struct { 1.0 } else { 0.0 };
    t.optimize(&phase_one, 1.0)?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(&j, _)| j >= n_struct)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if infeasibility > 1e-9 * (1.0 + x_norm) {
        return Ok(Outcome::Infeasible);
    }
    t.drive_out_artificials()?;

    let costs = lp.costs;
    let phase_two = |j: usize| if j < n { costs[j] } else { 0.0 };
    let cost_scale = 1.0 + costs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    t.optimize(&phase_two, cost_scale)?;

    let pi = t.duals(&phase_two);
    let dual: Vec<f64> = pi.iter().zip(&t.sign).map(|(p, s)| p * s).collect();
    let basic: Vec<(usize, f64)> = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(&j, _)| j < n)
        .map(|(&j, &v)| (j, v.max(0.0)))
        .collect();
    let value = basic.iter().map(|&(j, v)| v * costs[j]).sum();
    Ok(Outcome::Optimal(Solution { value, basic, dual }))
}
