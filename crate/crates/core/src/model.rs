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

//! Shared model types: the shape variant, solver configuration, the fitted
//! model and the result of evaluating it.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ScaleTransform};
use crate::error::{Error, Result};

/// Which shape restriction the regression function carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Convex,
    /// Convex and nonincreasing in every coordinate.
    ConvexNonincreasing,
}

impl Variant {
    pub fn is_monotone(self) -> bool {
        matches!(self, Variant::ConvexNonincreasing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Relative feasibility tolerance, measured against `1 + max|Y|`.
    pub feas_tol: f64,
    /// Relative stationarity tolerance, measured against `1 + max|Y|`.
    pub stat_tol: f64,
    pub max_iter: usize,
    pub scaling: bool,
    /// Initial ADMM penalty.
    pub rho: f64,
    /// Proximal regularization; only affects which subgradients are selected.
    pub sigma: f64,
    /// Over-relaxation parameter.
    pub alpha: f64,
    pub adaptive_rho: bool,
    pub check_every: usize,
    pub polish: bool,
    /// Solve on a growing subset of the pair rows instead of all `n(n-1)`.
    pub working_set: bool,
    /// Upper bound on the memory used by the constraint system and the
    /// factorization, in bytes.
    pub memory_budget: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            feas_tol: 1e-8,
            stat_tol: 1e-8,
            max_iter: 200_000,
            scaling: true,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            check_every: 25,
            polish: true,
            working_set: true,
            memory_budget: 2 << 30,
        }
    }
}

impl FitConfig {
    pub fn check(&self) -> Result<()> {
        let ok = self.feas_tol > 0.0
            && self.stat_tol > 0.0
            && self.max_iter >= 1
            && self.rho > 0.0
            && self.sigma > 0.0
            && self.alpha > 0.0
            && self.alpha < 2.0
            && self.check_every >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "invalid solver configuration {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// Largest violation over every constraint row.
    pub primal_residual: f64,
    /// Infinity norm of the Lagrangian gradient, combined with the
    /// complementarity violation.
    pub stationarity_residual: f64,
    /// `sum_k (Y_k - z_k)^2`.
    pub objective: f64,
    pub status: SolveStatus,
    pub polished: bool,
    /// Number of pair rows the solver worked with at the end.
    pub working_rows: usize,
    /// Best certified-feasible objective at each checkpoint.
    pub objective_trace: Vec<f64>,
}

/// The fitted estimator. Immutable once produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FitModel {
    pub(crate) variant: Variant,
    pub(crate) d: usize,
    pub(crate) points: Vec<f64>,
    pub(crate) fitted: Vec<f64>,
    pub(crate) subgradients: Vec<f64>,
    pub(crate) diagnostics: SolveDiagnostics,
    pub(crate) scale_transform: ScaleTransform,
}

impl FitModel {
    /// Assembles a model from stored parts, checking dimensions.
    pub fn from_parts(
        variant: Variant,
        d: usize,
        points: Vec<f64>,
        fitted: Vec<f64>,
        subgradients: Vec<f64>,
        diagnostics: SolveDiagnostics,
        scale_transform: ScaleTransform,
    ) -> Result<Self> {
        let n = fitted.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if d == 0 || points.len() != n * d || subgradients.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "n = {n}, d = {d}, {} point coordinates, {} subgradient entries",
                points.len(),
                subgradients.len()
            )));
        }
        if scale_transform.d() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: scale_transform.d(),
            });
        }
        Ok(FitModel {
            variant,
            d,
            points,
            fitted,
            subgradients,
            diagnostics,
            scale_transform,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.fitted.len()
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

    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    /// Row `j` is the slope `xi_j` of a supporting hyperplane at `X_j`.
    pub fn subgradient_at(&self, j: usize) -> &[f64] {
        &self.subgradients[j * self.d..(j + 1) * self.d]
    }

    pub fn subgradients(&self) -> &[f64] {
        &self.subgradients
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    pub fn scale_transform(&self) -> &ScaleTransform {
        &self.scale_transform
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.status == SolveStatus::Converged
    }

    /// The design the model was fitted on, paired with the fitted values.
    pub fn fitted_dataset(&self) -> Dataset {
        Dataset::from_flat(self.points.clone(), self.d, self.fitted.clone())
            .expect("model invariants guarantee a valid dataset")
    }
}

/// Result of evaluating the envelope at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// `f64::INFINITY` outside the domain.
    pub value: f64,
    pub in_domain: bool,
    pub subgradient: Option<Vec<f64>>,
    pub intercept: Option<f64>,
    /// Nonzero barycentric weights `(k, theta_k)` of the optimal combination.
    pub weights: Option<Vec<(usize, f64)>>,
}

impl EvalResult {
    pub(crate) fn outside() -> Self {
        EvalResult {
            value: f64::INFINITY,
            in_domain: false,
            subgradient: None,
            intercept: None,
            weights: None,
        }
    }
}
