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

//! Operator-splitting solver for
//!
//! ```text
//! minimize  1/2 |z - y|^2   subject to  A (z, xi) <= 0
//! ```
//!
//! ADMM with over-relaxation and residual-balanced penalty runs on a working
//! subset of the rows. Rows violated by the current iterate are added until
//! the iterate is feasible for the whole system, then the active set is
//! polished with a proximal method of multipliers.

use crate::cone::ConstraintSystem;
use crate::error::Result;
use crate::model::{FitConfig, SolveStatus};

use super::alm::{Lagrangian, Rows};
use super::factor::{factor_with_retry, ReducedFactor};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const POLISH_RHO: f64 = 1e5;

/// Relative accuracy of the splitting phase before polishing.
const ADMM_EPS: f64 = 1e-2;
/// Splitting iterations spent growing the working set before the polish
/// takes over row generation.
const ADMM_BUDGET: usize = 300;
const POLISH_DELTA: f64 = 1e-10;
const POLISH_MARGIN: f64 = 0.1;
const POLISH_OUTER: usize = 40;
const POLISH_NEWTON: usize = 30;

/// A primal point and its residuals on the full system.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub x: Vec<f64>,
    pub primal: f64,
    pub stationarity: f64,
    pub objective: f64,
}

pub(crate) struct Outcome {
    pub best: Candidate,
    pub status: SolveStatus,
    pub iterations: usize,
    pub polished: bool,
    pub working_rows: usize,
    pub trace: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

struct Admm<'a> {
    sys: &'a ConstraintSystem,
    y: &'a [f64],
    cfg: &'a FitConfig,
    scale: f64,
    n: usize,
    nv: usize,
    work: Vec<usize>,
    in_work: Vec<bool>,
    x: Vec<f64>,
    s: Vec<f64>,
    lam: Vec<f64>,
    rho: f64,
    factor: Option<ReducedFactor>,
    iterations: usize,
    best_feasible: f64,
    trace: Vec<f64>,
    best: Option<Candidate>,
}

/// Solves the projection on `sys` (already in solver coordinates).
///
/// `points` are the design points in the same coordinates and seed the
/// initial working set; `scale` is the tolerance scale `1 + max|Y|`.
pub(crate) fn solve(
    sys: &ConstraintSystem,
    y: &[f64],
    points: &[f64],
    scale: f64,
    cfg: &FitConfig,
) -> Result<Outcome> {
    let n = sys.n();
    let nv = sys.n_vars();
    let mut x0 = vec![0.0; nv];
    if sys.row_count() == 0 {
        x0[..n].copy_from_slice(y);
        let best = Candidate {
            x: x0,
            primal: 0.0,
            stationarity: 0.0,
            objective: 0.0,
        };
        return Ok(Outcome {
            best,
            status: SolveStatus::Converged,
            iterations: 0,
            polished: false,
            working_rows: 0,
            trace: vec![0.0],
        });
    }
    let mut solver = Admm {
        sys,
        y,
        cfg,
        scale,
        n,
        nv,
        work: Vec::new(),
        in_work: vec![false; sys.row_count()],
        x: x0,
        s: Vec::new(),
        lam: Vec::new(),
        rho: cfg.rho,
        factor: None,
        iterations: 0,
        best_feasible: y.iter().map(|v| v * v).sum(),
        trace: Vec::new(),
        best: None,
    };
    solver.seed_working_set(points);
    solver.run()
}

impl<'a> Admm<'a> {
    fn seed_working_set(&mut self, points: &[f64]) {
        let (n, d) = (self.n, self.sys.d());
        let mut rows = Vec::new();
        if !self.cfg.working_set || n <= 3 * (d + 1) + 1 {
            rows.extend(0..self.sys.pair_rows());
        } else {
            let k = (3 * (d + 1)).min(n - 1);
            let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
            for j in 0..n {
                let pj = &points[j * d..(j + 1) * d];
                dist.clear();
                for other in (0..n).filter(|&o| o != j) {
                    let po = &points[other * d..(other + 1) * d];
                    let dd: f64 = pj.iter().zip(po).map(|(a, b)| (a - b) * (a - b)).sum();
                    dist.push((dd, other));
                }
                dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(_, other) in &dist[..k] {
                    rows.push(self.sys.pair_index(j, other));
                    rows.push(self.sys.pair_index(other, j));
                }
            }
        }
        rows.extend(self.sys.pair_rows()..self.sys.row_count());
        self.add_rows(rows);
    }

    fn add_rows(&mut self, rows: impl IntoIterator<Item = usize>) {
        for r in rows {
            if !self.in_work[r] {
                self.in_work[r] = true;
                self.work.push(r);
                let v = self.sys.row_dot(r, &self.x);
                self.s.push(v.min(0.0));
                self.lam.push(0.0);
            }
        }
        self.factor = None;
    }

    fn apply_work(&self, x: &[f64], out: &mut [f64]) {
        for (o, &r) in out.iter_mut().zip(&self.work) {
            *o = self.sys.row_dot(r, x);
        }
    }

    fn apply_work_t(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.sys.apply_transpose_rows(&self.work, v, out);
    }

    fn converged(&self, c: &Candidate) -> bool {
        c.primal <= self.cfg.feas_tol * self.scale
            && c.stationarity <= self.cfg.stat_tol * self.scale
    }

    fn merit(&self, c: &Candidate) -> f64 {
        (c.primal / (self.cfg.feas_tol * self.scale))
            .max(c.stationarity / (self.cfg.stat_tol * self.scale))
    }

    fn objective(&self, x: &[f64]) -> f64 {
        x[..self.n]
            .iter()
            .zip(self.y)
            .map(|(z, y)| (y - z) * (y - z))
            .sum()
    }

    /// Residuals of `(x, multipliers)` on every row of the system.
    fn candidate(&self, x: Vec<f64>, multipliers: Vec<(usize, f64)>) -> Candidate {
        let n = self.n;
        let mut grad = vec![0.0; self.nv];
        for i in 0..n {
            grad[i] = x[i] - self.y[i];
        }
        let mut complementarity = 0.0_f64;
        for &(r, m) in &multipliers {
            let m = m.max(0.0);
            if m > 0.0 {
                let (cols, vals) = self.sys.row(r);
                for (&c, v) in cols.iter().zip(vals) {
                    grad[c as usize] += v * m;
                }
                let slack = -self.sys.row_dot(r, &x);
                complementarity = complementarity.max(m.min(slack));
            }
        }
        let primal = self.sys.max_violation(&x).max(0.0);
        let objective = self.objective(&x);
        Candidate {
            stationarity: inf_norm(&grad).max(complementarity),
            primal,
            objective,
            x,
        }
    }

    fn consider(&mut self, c: &Candidate) {
        if c.primal <= self.cfg.feas_tol * self.scale && c.objective < self.best_feasible {
            self.best_feasible = c.objective;
        }
        let better = match &self.best {
            None => true,
            Some(b) => self.merit(c) < self.merit(b),
        };
        if better {
            self.best = Some(c.clone());
        }
    }

    fn current(&self) -> Candidate {
        let mult = self
            .work
            .iter()
            .copied()
            .zip(self.lam.iter().copied())
            .collect();
        self.candidate(self.x.clone(), mult)
    }

    fn run(mut self) -> Result<Outcome> {
        let mut eps = ADMM_EPS;
        let floor = 0.1 * self.cfg.feas_tol.min(self.cfg.stat_tol);
        let mut polished = false;
        loop {
            if self.iterations < self.cfg.max_iter {
                self.admm(eps)?;
            }
            let cand = self.current();
            self.consider(&cand);
            if self.iterations >= self.cfg.max_iter {
                break;
            }
            // Rows violated by less than the working rows themselves carry
            // no information at the current accuracy.
            let mut ax = vec![0.0; self.work.len()];
            self.apply_work(&self.x, &mut ax);
            let inner = ax.iter().fold(0.0_f64, |a, v| a.max(*v));
            let threshold = (self.cfg.feas_tol * self.scale).max(inner);
            let violated = self.violated(&self.x, threshold);
            if self.cfg.working_set
                && !violated.is_empty()
                && (self.iterations < ADMM_BUDGET || !self.cfg.polish)
            {
                self.add_rows(violated);
                continue;
            }
            if self.cfg.polish {
                if let Some(c) = self.polish()? {
                    polished = true;
                    self.consider(&c);
                    if self.converged(&c) {
                        return Ok(self.finish(c, true));
                    }
                }
            }
            if self.converged(&cand) {
                return Ok(self.finish(cand, false));
            }
            if self.iterations >= self.cfg.max_iter {
                break;
            }
            eps = (eps * 0.1).max(floor);
        }
        let best = self
            .best
            .clone()
            .expect("at least one candidate was evaluated");
        let ok = self.converged(&best);
        let mut out = self.finish(best, polished);
        if !ok {
            out.status = SolveStatus::IterLimit;
        }
        Ok(out)
    }

    fn finish(mut self, best: Candidate, polished: bool) -> Outcome {
        if best.primal <= self.cfg.feas_tol * self.scale && best.objective < self.best_feasible {
            self.best_feasible = best.objective;
        }
        self.trace.push(self.best_feasible);
        Outcome {
            status: SolveStatus::Converged,
            iterations: self.iterations,
            polished,
            working_rows: self.work.len(),
            trace: self.trace,
            best,
        }
    }

    /// Rows outside the working set whose value exceeds `threshold`, keeping
    /// the worst few per owner.
    fn violated(&self, x: &[f64], threshold: f64) -> Vec<usize> {
        let sys = self.sys;
        let per_owner = sys.d() + 2;
        let mut picked = Vec::new();
        let mut bucket: Vec<(f64, usize)> = Vec::new();
        let pairs = sys.pair_rows();
        let row_len = self.n - 1;
        for j in 0..self.n {
            bucket.clear();
            for r in j * row_len..(j + 1) * row_len {
                if !self.in_work[r] {
                    let v = sys.row_dot(r, x);
                    if v > threshold {
                        bucket.push((v, r));
                    }
                }
            }
            bucket.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            picked.extend(bucket.iter().take(per_owner).map(|e| e.1));
        }
        picked.extend(
            (pairs..sys.row_count()).filter(|&r| !self.in_work[r] && sys.row_dot(r, x) > threshold),
        );
        picked
    }

    fn admm(&mut self, eps: f64) -> Result<()> {
        let m = self.work.len();
        let (n, nv) = (self.n, self.nv);
        let alpha = self.cfg.alpha;
        let sigma = self.cfg.sigma;
        let mut rhs = vec![0.0; nv];
        let mut xt = vec![0.0; nv];
        let mut st = vec![0.0; m];
        let mut tmp = vec![0.0; m];
        let mut ax = vec![0.0; m];
        let mut aty = vec![0.0; nv];
        let q_norm = inf_norm(self.y);
        let mut since_check = 0;
        while self.iterations < self.cfg.max_iter {
            if self.factor.is_none() {
                self.factor = Some(factor_with_retry(self.sys, &self.work, self.rho, sigma)?);
            }
            for i in 0..m {
                tmp[i] = self.rho * self.s[i] - self.lam[i];
            }
            self.apply_work_t(&tmp, &mut rhs);
            for i in 0..nv {
                rhs[i] += sigma * self.x[i];
            }
            for i in 0..n {
                rhs[i] += self.y[i];
            }
            self.factor
                .as_ref()
                .expect("factored above")
                .solve(&rhs, &mut xt);
            self.apply_work(&xt, &mut st);
            for i in 0..nv {
                self.x[i] = alpha * xt[i] + (1.0 - alpha) * self.x[i];
            }
            for i in 0..m {
                let relaxed = alpha * st[i] + (1.0 - alpha) * self.s[i];
                let s_new = (relaxed + self.lam[i] / self.rho).min(0.0);
                self.lam[i] += self.rho * (relaxed - s_new);
                self.s[i] = s_new;
            }
            self.iterations += 1;
            since_check += 1;
            if since_check < self.cfg.check_every {
                continue;
            }
            since_check = 0;

            self.apply_work(&self.x, &mut ax);
            let r_prim = ax
                .iter()
                .zip(&self.s)
                .fold(0.0_f64, |acc, (a, s)| acc.max((a - s).abs()));
            self.apply_work_t(&self.lam, &mut aty);
            let mut r_dual = 0.0_f64;
            for i in 0..nv {
                let g = if i < n { self.x[i] - self.y[i] } else { 0.0 } + aty[i];
                r_dual = r_dual.max(g.abs());
            }
            let prim_norm = inf_norm(&ax).max(inf_norm(&self.s));
            let dual_norm = inf_norm(&self.x[..n]).max(inf_norm(&aty)).max(q_norm);

            if ax.iter().fold(0.0_f64, |a, v| a.max(*v)) <= self.cfg.feas_tol * self.scale {
                let primal = self.sys.max_violation(&self.x);
                if primal <= self.cfg.feas_tol * self.scale {
                    let obj = self.objective(&self.x);
                    self.best_feasible = self.best_feasible.min(obj);
                }
            }
            self.trace.push(self.best_feasible);

            let eps_abs = eps * self.scale;
            if r_prim <= eps_abs + eps * prim_norm && r_dual <= eps_abs + eps * dual_norm {
                return Ok(());
            }
            if self.cfg.adaptive_rho {
                let num = r_prim / prim_norm.max(1e-30);
                let den = r_dual / dual_norm.max(1e-30);
                if den > 0.0 && num > 0.0 {
                    let proposed = (self.rho * (num / den).sqrt()).clamp(RHO_MIN, RHO_MAX);
                    if proposed > 5.0 * self.rho || proposed < 0.2 * self.rho {
                        self.rho = proposed;
                        self.factor = None;
                    }
                }
            }
        }
        Ok(())
    }

    /// Proximal augmented Lagrangian on the working set, with the penalty
    /// raised tenfold per round. Multipliers stay nonnegative and rows found
    /// violated between rounds join the working set.
    fn polish(&mut self) -> Result<Option<Candidate>> {
        let mut x = self.x.clone();
        let mut mu = self.lam.clone();
        let mut best: Option<Candidate> = None;
        let inner_tol = 1e-2 * self.cfg.stat_tol.min(self.cfg.feas_tol) * self.scale;
        let mut rho = (10.0 * self.rho).min(POLISH_RHO);
        for _ in 0..POLISH_OUTER {
            let center = x.clone();
            let rows = Rows::new(self.sys, &self.work);
            let lagrangian = Lagrangian {
                rows: &rows,
                y: self.y,
                mu: &mu,
                center: &center,
                rho,
                delta: POLISH_DELTA,
            };
            self.iterations += lagrangian.minimize(&mut x, inner_tol, POLISH_NEWTON)?;
            let m = self.work.len();
            let mut ax = vec![0.0; m];
            self.apply_work(&x, &mut ax);
            for i in 0..m {
                mu[i] = (mu[i] + rho * ax[i]).max(0.0);
            }
            rho = (10.0 * rho).min(POLISH_RHO);
            let mult = self.work.iter().copied().zip(mu.iter().copied()).collect();
            let cand = self.candidate(x.clone(), mult);
            if best
                .as_ref()
                .is_none_or(|b| self.merit(&cand) < self.merit(b))
            {
                best = Some(cand.clone());
            }
            let added = if self.cfg.working_set {
                self.violated(&x, self.cfg.feas_tol * self.scale)
            } else {
                Vec::new()
            };
            // Polish past the tolerance while it is cheap, so ties on the
            // tolerance boundary are not reported as solutions. Small
            // residuals alone do not pin z down on degenerate faces, so z
            // must also have settled across a multiplier update.
            let moved = max_abs_diff(&x[..self.n], &center[..self.n]);
            let settled = moved <= POLISH_MARGIN * self.cfg.stat_tol * self.scale;
            if self.merit(&cand) <= POLISH_MARGIN && settled && added.is_empty() {
                best = Some(cand);
                break;
            }
            if !added.is_empty() {
                self.add_rows(added);
                mu.resize(self.work.len(), 0.0);
            }
            if self.iterations >= self.cfg.max_iter {
                break;
            }
        }
        // Warm start any further splitting iterations from the refined point.
        if let Some(b) = &best {
            if self.merit(b) < self.merit(&self.current()) {
                self.x.copy_from_slice(&b.x);
                self.lam.copy_from_slice(&mu);
                let mut ax = vec![0.0; self.work.len()];
                self.apply_work(&self.x, &mut ax);
                for (s, a) in self.s.iter_mut().zip(&ax) {
                    *s = a.min(0.0);
                }
            }
        }
        Ok(best)
    }
}
