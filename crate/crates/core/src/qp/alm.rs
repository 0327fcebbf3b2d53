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

//! Inner minimization of the proximal augmented Lagrangian
//!
//! ```text
//! L(x) = 1/2 |z - y|^2 + delta/2 |x - x_t|^2
//!      + 1/(2 rho) sum_r (max(0, mu_r + rho a_r x)^2 - mu_r^2)
//! ```
//!
//! over a working set of rows. Every row involves the slopes of a single
//! point, so for fixed `z` the slopes decouple into small problems solved
//! exactly. Newton steps are then taken on the reduced function of `z`
//! alone, whose generalized Hessian is the Schur complement that
//! [`ReducedFactor`] already forms.

use crate::cone::ConstraintSystem;
use crate::error::Result;

use super::factor::{factor_with_retry, ReducedFactor};

const SLOPE_STEPS: usize = 200;
const SECANT_ACCEPT: f64 = 0.5;
const BRACKET_STEPS: usize = 40;
const STALL_STEPS: usize = 5;
const FLOOR_FACTOR: f64 = 1e3;

/// Rows of the working set split into their `z` and slope parts.
pub(crate) struct Rows<'a> {
    sys: &'a ConstraintSystem,
    work: &'a [usize],
    d: usize,
    by_owner: Vec<Vec<usize>>,
    coef: Vec<f64>,
    zpart: Vec<[(usize, f64); 2]>,
}

impl<'a> Rows<'a> {
    pub(crate) fn new(sys: &'a ConstraintSystem, work: &'a [usize]) -> Self {
        let (n, d) = (sys.n(), sys.d());
        let mut by_owner = vec![Vec::new(); n];
        let mut coef = vec![0.0; work.len() * d];
        let mut zpart = vec![[(0, 0.0); 2]; work.len()];
        for (i, &r) in work.iter().enumerate() {
            let owner = sys.owner(r);
            by_owner[owner].push(i);
            let (cols, vals) = sys.row(r);
            let mut nz = 0;
            for (&c, &v) in cols.iter().zip(vals) {
                let c = c as usize;
                if c < n {
                    zpart[i][nz] = (c, v);
                    nz += 1;
                } else {
                    coef[i * d + c - n - owner * d] = v;
                }
            }
        }
        Rows {
            sys,
            work,
            d,
            by_owner,
            coef,
            zpart,
        }
    }

    fn z_term(&self, i: usize, z: &[f64]) -> f64 {
        self.zpart[i].iter().map(|&(c, v)| v * z[c]).sum()
    }

    fn slope_term(&self, i: usize, xi: &[f64]) -> f64 {
        self.coef[i * self.d..(i + 1) * self.d]
            .iter()
            .zip(xi)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Smallest minimizer of a convex piecewise quadratic along a ray whose
/// derivative is `c + b t + sum_i s_i max(0, u_i + rho t s_i)`.
fn exact_step(mut c: f64, mut b: f64, rho: f64, terms: &[(f64, f64)]) -> f64 {
    let mut breaks: Vec<(f64, usize)> = Vec::new();
    for (i, &(u, s)) in terms.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        if u > 0.0 || (u == 0.0 && s > 0.0) {
            c += s * u;
            b += rho * s * s;
        }
        let t = -u / (rho * s);
        if t > 0.0 {
            breaks.push((t, i));
        }
    }
    breaks.sort_by(|p, q| p.0.total_cmp(&q.0));
    for &(t, i) in &breaks {
        if b > 0.0 && -c / b <= t {
            return (-c / b).max(0.0);
        }
        let (u, s) = terms[i];
        if s > 0.0 {
            c += s * u;
            b += rho * s * s;
        } else {
            c -= s * u;
            b -= rho * s * s;
        }
    }
    if b > 0.0 {
        (-c / b).max(0.0)
    } else {
        1.0
    }
}

fn solve_small(h: &mut [f64], rhs: &mut [f64], d: usize) -> bool {
    // In-place Cholesky of the lower triangle, then two triangular solves.
    for i in 0..d {
        for j in 0..=i {
            let mut v = h[i * d + j];
            for k in 0..j {
                v -= h[i * d + k] * h[j * d + k];
            }
            if i == j {
                if v <= 0.0 || !v.is_finite() {
                    return false;
                }
                h[i * d + i] = v.sqrt();
            } else {
                h[i * d + j] = v / h[j * d + j];
            }
        }
    }
    for i in 0..d {
        let mut v = rhs[i];
        for k in 0..i {
            v -= h[i * d + k] * rhs[k];
        }
        rhs[i] = v / h[i * d + i];
    }
    for i in (0..d).rev() {
        let mut v = rhs[i];
        for k in i + 1..d {
            v -= h[k * d + i] * rhs[k];
        }
        rhs[i] = v / h[i * d + i];
    }
    true
}

pub(crate) struct Lagrangian<'a> {
    pub rows: &'a Rows<'a>,
    pub y: &'a [f64],
    pub mu: &'a [f64],
    pub center: &'a [f64],
    pub rho: f64,
    pub delta: f64,
}

impl Lagrangian<'_> {
    /// Minimizes over the slopes of point `j` with `z` fixed, in place.
    fn slope(&self, j: usize, z: &[f64], xi: &mut [f64], tol: f64) {
        let rows = self.rows;
        let d = rows.d;
        let n = z.len();
        let owned = &rows.by_owner[j];
        let center = &self.center[n + j * d..n + (j + 1) * d];
        let base: Vec<f64> = owned
            .iter()
            .map(|&i| self.mu[i] + self.rho * rows.z_term(i, z))
            .collect();
        let mut grad = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        let mut dir = vec![0.0; d];
        let mut terms: Vec<(f64, f64)> = Vec::with_capacity(owned.len());
        for _ in 0..SLOPE_STEPS {
            h.iter_mut().for_each(|v| *v = 0.0);
            for p in 0..d {
                grad[p] = self.delta * (xi[p] - center[p]);
                h[p * d + p] = self.delta;
            }
            for (k, &i) in owned.iter().enumerate() {
                let u = base[k] + self.rho * rows.slope_term(i, xi);
                if u > 0.0 {
                    let a = &rows.coef[i * d..(i + 1) * d];
                    for p in 0..d {
                        grad[p] += a[p] * u;
                        for q in 0..d {
                            h[p * d + q] += self.rho * a[p] * a[q];
                        }
                    }
                }
            }
            let g = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if g <= tol {
                break;
            }
            dir.iter_mut().zip(&grad).for_each(|(o, g)| *o = -g);
            if !solve_small(&mut h, &mut dir, d) {
                break;
            }
            let mut c = 0.0;
            let mut b = 0.0;
            for p in 0..d {
                c += self.delta * (xi[p] - center[p]) * dir[p];
                b += self.delta * dir[p] * dir[p];
            }
            terms.clear();
            for (k, &i) in owned.iter().enumerate() {
                let u = base[k] + self.rho * rows.slope_term(i, xi);
                terms.push((u, rows.slope_term(i, &dir)));
            }
            let t = exact_step(c, b, self.rho, &terms);
            let mut moved = 0.0_f64;
            for p in 0..d {
                xi[p] += t * dir[p];
                moved = moved.max((t * dir[p]).abs());
            }
            if moved <= 1e-16 * (1.0 + xi.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
                break;
            }
        }
    }

    /// Re-optimizes every slope for the `z` part of `x` and writes the
    /// gradient of the reduced function into `grad`.
    fn reduce(&self, x: &mut [f64], tol: f64, grad: &mut [f64]) {
        let rows = self.rows;
        let n = rows.sys.n();
        let d = rows.d;
        let (z, xi) = x.split_at_mut(n);
        for j in 0..n {
            self.slope(j, z, &mut xi[j * d..(j + 1) * d], tol);
        }
        for i in 0..n {
            grad[i] = z[i] - self.y[i] + self.delta * (z[i] - self.center[i]);
        }
        for (i, &r) in rows.work.iter().enumerate() {
            let u = self.mu[i] + self.rho * rows.sys.row_dot(r, x);
            if u > 0.0 {
                for &(c, v) in &rows.zpart[i] {
                    grad[c] += v * u;
                }
            }
        }
    }

    /// Semismooth Newton on the reduced function of `z`. `x` enters as the
    /// starting point and leaves as the approximate minimizer; returns the
    /// number of Newton steps.
    ///
    /// The line search works on the directional derivative, which stays
    /// accurate long after differences of the function value drown in
    /// rounding.
    pub(crate) fn minimize(&self, x: &mut [f64], tol: f64, max_steps: usize) -> Result<usize> {
        let rows = self.rows;
        let sys = rows.sys;
        let n = sys.n();
        let nv = x.len();
        let slope_tol = 1e-3 * tol;
        let mut grad = vec![0.0; n];
        let mut trial_grad = vec![0.0; n];
        self.reduce(x, slope_tol, &mut grad);
        let mut rhs = vec![0.0; nv];
        let mut dir = vec![0.0; nv];
        let mut trial = vec![0.0; nv];
        let mut cached: Option<(Vec<usize>, ReducedFactor)> = None;
        let mut steps = 0;
        let mut best_g = f64::INFINITY;
        let mut stalled = 0;
        while steps < max_steps {
            let g = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if g <= tol {
                break;
            }
            // Near the rounding floor the gradient only wanders.
            if g < best_g {
                best_g = g;
                stalled = 0;
            } else if g <= FLOOR_FACTOR * tol {
                stalled += 1;
                if stalled >= STALL_STEPS {
                    break;
                }
            }
            let active: Vec<usize> = rows
                .work
                .iter()
                .enumerate()
                .filter(|&(i, &r)| self.mu[i] + self.rho * sys.row_dot(r, x) > 0.0)
                .map(|(_, &r)| r)
                .collect();
            if cached.as_ref().is_none_or(|c| c.0 != active) {
                let f = factor_with_retry(sys, &active, self.rho, self.delta)?;
                cached = Some((active, f));
            }
            let factor = &cached.as_ref().expect("factored above").1;
            for i in 0..n {
                rhs[i] = -grad[i];
            }
            factor.solve(&rhs, &mut dir);
            let d0: f64 = (0..n).map(|i| grad[i] * dir[i]).sum();
            steps += 1;
            if d0 >= 0.0 {
                break;
            }
            let eval = |t: f64, trial: &mut [f64], tg: &mut [f64]| -> f64 {
                trial.copy_from_slice(x);
                for i in 0..n {
                    trial[i] += t * dir[i];
                }
                self.reduce(trial, slope_tol, tg);
                (0..n).map(|i| tg[i] * dir[i]).sum()
            };
            // Safeguarded secant on the nondecreasing derivative along the ray.
            let mut t = 1.0;
            let mut dt = eval(t, &mut trial, &mut trial_grad);
            if dt > 0.0 && dt > -SECANT_ACCEPT * d0 {
                let (mut lo, mut dlo, mut hi, mut dhi) = (0.0, d0, 1.0, dt);
                for _ in 0..BRACKET_STEPS {
                    let w = hi - lo;
                    let guess = lo - dlo * w / (dhi - dlo);
                    t = guess.clamp(lo + 0.01 * w, hi - 0.01 * w);
                    dt = eval(t, &mut trial, &mut trial_grad);
                    if dt.abs() <= -SECANT_ACCEPT * d0 {
                        break;
                    }
                    if dt < 0.0 {
                        (lo, dlo) = (t, dt);
                    } else {
                        (hi, dhi) = (t, dt);
                    }
                }
            }
            x.copy_from_slice(&trial);
            std::mem::swap(&mut grad, &mut trial_grad);
        }
        Ok(steps)
    }
}
