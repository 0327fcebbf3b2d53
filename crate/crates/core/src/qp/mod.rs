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

//! Least squares projection of the responses onto the cone of convex (or
//! convex nonincreasing) function evaluations.

mod admm;
mod alm;
mod factor;

use serde::{Deserialize, Serialize};

use crate::cone::{build_constraints_with_budget, required_bytes, ConstraintSystem};
use crate::dataset::{standardize, Dataset, ScaleTransform};
use crate::error::{Error, Result};
use crate::model::{FitConfig, FitModel, SolveDiagnostics, Variant};
use crate::oracle::MaxAffine;

/// Projects the responses of `data` onto the `z`-shadow of `system`.
///
/// Returns the fitted values, one feasible slope per design point (row-major,
/// `n x d`) and solver diagnostics. The slopes are whichever feasible ones the
/// solver lands on; only the fitted values are unique.
pub fn project(
    data: &Dataset,
    system: &ConstraintSystem,
    config: &FitConfig,
) -> Result<(Vec<f64>, Vec<f64>, SolveDiagnostics)> {
    let (fitted, slopes, diagnostics, _) = project_scaled(data, system, config)?;
    Ok((fitted, slopes, diagnostics))
}

fn project_scaled(
    data: &Dataset,
    system: &ConstraintSystem,
    config: &FitConfig,
) -> Result<(Vec<f64>, Vec<f64>, SolveDiagnostics, ScaleTransform)> {
    config.check()?;
    let (n, d) = (data.n(), data.d());
    if system.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: system.n(),
        });
    }
    if system.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: system.d(),
        });
    }
    let required = required_bytes(n, d, system.variant())
        .saturating_mul(if config.scaling { 2 } else { 1 })
        .saturating_add(factor::schur_bytes(n));
    if required > config.memory_budget {
        return Err(Error::CapacityExceeded {
            required,
            budget: config.memory_budget,
        });
    }

    let (work_data, transform) = if config.scaling {
        standardize(data)
    } else {
        (data.clone(), ScaleTransform::identity(d))
    };
    let mut column_scale = vec![1.0; system.n_vars()];
    for j in 0..n {
        for i in 0..d {
            column_scale[n + j * d + i] = if transform.degenerate[i] {
                0.0
            } else {
                1.0 / transform.scale[i]
            };
        }
    }
    let scaled;
    let work_system = if config.scaling {
        scaled = system.with_column_scale(&column_scale);
        &scaled
    } else {
        system
    };

    let scale = data.response_scale();
    let outcome = admm::solve(
        work_system,
        work_data.responses(),
        work_data.points(),
        scale,
        config,
    )?;
    let x = &outcome.best.x;
    let fitted: Vec<f64> = x[..n]
        .iter()
        .map(|z| z + transform.response_center)
        .collect();
    let slopes: Vec<f64> = x[n..]
        .iter()
        .zip(&column_scale[n..])
        .map(|(v, s)| v * s)
        .collect();

    let mut stacked = fitted.clone();
    stacked.extend_from_slice(&slopes);
    let primal_residual = system.max_violation(&stacked).max(0.0);
    let objective = data
        .responses()
        .iter()
        .zip(&fitted)
        .map(|(y, z)| (y - z) * (y - z))
        .sum();
    let diagnostics = SolveDiagnostics {
        iterations: outcome.iterations,
        primal_residual,
        stationarity_residual: outcome.best.stationarity,
        objective,
        status: outcome.status,
        polished: outcome.polished,
        working_rows: outcome.working_rows,
        objective_trace: outcome.trace,
    };
    Ok((fitted, slopes, diagnostics, transform))
}

/// Fits the least squares estimator for the given shape variant.
pub fn fit(data: &Dataset, variant: Variant, config: &FitConfig) -> Result<FitModel> {
    let system = build_constraints_with_budget(data, variant, config.memory_budget)?;
    let (fitted, slopes, diagnostics, transform) = project_scaled(data, &system, config)?;
    FitModel::from_parts(
        variant,
        data.d(),
        data.points().to_vec(),
        fitted,
        slopes,
        diagnostics,
        transform,
    )
}

/// Residuals of the finite-sample optimality identities of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `|sum_k z_k (Y_k - z_k)|`.
    pub identity_residual_a: f64,
    /// `|sum_k Y_k - sum_k z_k|`.
    pub identity_residual_b: f64,
    /// `max_psi sum_k (psi(X_k) - z_k)(Y_k - z_k)`; nonpositive at the exact
    /// projection. `-inf` when no witnesses are given.
    pub max_witness_inner: f64,
}

/// Checks the obtuse-angle characterization of the projection against a set
/// of convex witnesses, plus the two identities it implies.
///
/// For the nonincreasing variant every witness must itself be nonincreasing.
pub fn kkt_check(model: &FitModel, data: &Dataset, witnesses: &[MaxAffine]) -> Result<KktReport> {
    if data.n() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: data.n(),
        });
    }
    if data.d() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            got: data.d(),
        });
    }
    let z = model.fitted();
    let y = data.responses();
    let identity_residual_a = z.iter().zip(y).map(|(z, y)| z * (y - z)).sum::<f64>().abs();
    let identity_residual_b = (y.iter().sum::<f64>() - z.iter().sum::<f64>()).abs();
    let mut max_witness_inner = f64::NEG_INFINITY;
    for w in witnesses {
        if w.d() != model.d() {
            return Err(Error::DimensionMismatch {
                expected: model.d(),
                got: w.d(),
            });
        }
        if model.variant().is_monotone() && !w.is_nonincreasing() {
            return Err(Error::InvalidWitness(
                "nonincreasing fits need nonincreasing witnesses".into(),
            ));
        }
        let inner: f64 = (0..data.n())
            .map(|k| (w.eval(data.point(k)) - z[k]) * (y[k] - z[k]))
            .sum();
        max_witness_inner = max_witness_inner.max(inner);
    }
    Ok(KktReport {
        identity_residual_a,
        identity_residual_b,
        max_witness_inner,
    })
}
