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

//! Pointwise evaluation of the fitted estimator: the largest convex
//! (nonincreasing) function lying below the fitted values.

mod simplex;

use crate::error::{Error, Result};
use crate::model::{EvalResult, FitModel};

use simplex::{EnvelopeLp, Outcome};

fn check_dim(model: &FitModel, x: &[f64]) -> Result<()> {
    if x.len() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            got: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "query point",
            index,
        });
    }
    Ok(())
}

/// Evaluates the envelope at `x`.
///
/// Outside the convex hull of the design (plus the nonnegative orthant for
/// the nonincreasing variant) the value is `+inf`. Inside, the optimal
/// barycentric weights and the LP dual `(xi, eta)`, a supporting hyperplane
/// `<xi, .> + eta` of the envelope at `x`, are returned as well.
pub fn evaluate(model: &FitModel, x: &[f64]) -> Result<EvalResult> {
    check_dim(model, x)?;
    let lp = EnvelopeLp {
        points: model.points(),
        d: model.d(),
        costs: model.fitted(),
        monotone: model.variant().is_monotone(),
    };
    match simplex::solve(&lp, x)? {
        Outcome::Infeasible => Ok(EvalResult::outside()),
        Outcome::Optimal(sol) => {
            let d = model.d();
            let weights = sol.basic.into_iter().filter(|w| w.1 > 0.0).collect();
            Ok(EvalResult {
                value: sol.value,
                in_domain: true,
                subgradient: Some(sol.dual[..d].to_vec()),
                intercept: Some(sol.dual[d]),
                weights: Some(weights),
            })
        }
    }
}

/// Supporting hyperplane `(xi, eta)` of the envelope at `x`; a subgradient
/// when `x` is interior to the domain.
pub fn subgradient(model: &FitModel, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let res = evaluate(model, x)?;
    match (res.subgradient, res.intercept) {
        (Some(xi), Some(eta)) if res.in_domain => Ok((xi, eta)),
        _ => Err(Error::OutsideDomain),
    }
}

/// Index of the affine piece `<xi_j, x - X_j> + z_j` attaining the max.
pub fn max_affine_piece(model: &FitModel, x: &[f64]) -> usize {
    let mut best = 0;
    let mut value = f64::NEG_INFINITY;
    for j in 0..model.n() {
        let v = piece(model, j, x);
        if v > value {
            best = j;
            value = v;
        }
    }
    best
}

fn piece(model: &FitModel, j: usize, x: &[f64]) -> f64 {
    let xj = model.point(j);
    let slope = model.subgradient_at(j);
    model.fitted()[j]
        + slope
            .iter()
            .zip(x.iter().zip(xj))
            .map(|(s, (a, b))| s * (a - b))
            .sum::<f64>()
}

/// Finite-everywhere predictor built from the per-point slopes of the fit:
/// `max_j (<xi_j, x - X_j> + z_j)`. It minorizes the envelope and agrees with
/// it at every design point.
pub fn max_affine_extension(model: &FitModel, x: &[f64]) -> Result<f64> {
    check_dim(model, x)?;
    Ok(piece(model, max_affine_piece(model, x), x))
}

/// Affine piece `(xi, eta)` of the max-affine extension active at `x`, with
/// `eta = z_j - <xi_j, X_j>`.
pub fn max_affine_hyperplane(model: &FitModel, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_dim(model, x)?;
    let j = max_affine_piece(model, x);
    let xi = model.subgradient_at(j).to_vec();
    let eta = model.fitted()[j] - xi.iter().zip(model.point(j)).map(|(a, b)| a * b).sum::<f64>();
    Ok((xi, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ScaleTransform;
    use crate::model::{SolveDiagnostics, SolveStatus, Variant};

    fn model_1d(xs: &[f64], fitted: &[f64], slopes: &[f64], variant: Variant) -> FitModel {
        FitModel::from_parts(
            variant,
            1,
            xs.to_vec(),
            fitted.to_vec(),
            slopes.to_vec(),
            SolveDiagnostics {
                iterations: 0,
                primal_residual: 0.0,
                stationarity_residual: 0.0,
                objective: 0.0,
                status: SolveStatus::Converged,
                polished: false,
                working_rows: 0,
                objective_trace: vec![],
            },
            ScaleTransform::identity(1),
        )
        .unwrap()
    }

    #[test]
    fn value_at_design_points() {
        let m = model_1d(
            &[0.0, 1.0, 2.0],
            &[0.0, 0.0, 2.0],
            &[0.0, 0.0, 2.0],
            Variant::Convex,
        );
        for j in 0..3 {
            let r = evaluate(&m, m.point(j)).unwrap();
            assert!((r.value - m.fitted()[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn value_between_flat_points() {
        let m = model_1d(
            &[0.0, 1.0, 2.0],
            &[0.0, 0.0, 2.0],
            &[0.0, 0.0, 2.0],
            Variant::Convex,
        );
        let r = evaluate(&m, &[0.5]).unwrap();
        assert!(r.value.abs() < 1e-12);
        let mut support: Vec<usize> = r.weights.unwrap().iter().map(|w| w.0).collect();
        support.sort();
        assert_eq!(support, vec![0, 1]);
    }

    #[test]
    fn outside_hull() {
        let m = model_1d(
            &[0.0, 1.0, 2.0],
            &[0.0, 0.0, 2.0],
            &[0.0, 0.0, 2.0],
            Variant::Convex,
        );
        let r = evaluate(&m, &[2.5]).unwrap();
        assert!(!r.in_domain && r.value == f64::INFINITY);
        assert!(matches!(
            subgradient(&m, &[-0.1]),
            Err(Error::OutsideDomain)
        ));
        assert!(max_affine_extension(&m, &[2.5]).unwrap().is_finite());
    }

    #[test]
    fn monotone_domain_extends_up() {
        let m = model_1d(
            &[0.0, 1.0],
            &[0.5, 0.5],
            &[0.0, 0.0],
            Variant::ConvexNonincreasing,
        );
        let r = evaluate(&m, &[5.0]).unwrap();
        assert!(r.in_domain);
        assert!((r.value - 0.5).abs() < 1e-12);
        assert!(!evaluate(&m, &[-0.5]).unwrap().in_domain);
    }

    #[test]
    fn subgradient_examples() {
        let flat = model_1d(
            &[0.0, 1.0, 2.0],
            &[1.0 / 3.0; 3],
            &[0.0; 3],
            Variant::Convex,
        );
        let (xi, eta) = subgradient(&flat, &[1.0]).unwrap();
        assert!(xi[0].abs() < 1e-12 && (eta - 1.0 / 3.0).abs() < 1e-12);

        let kink = model_1d(
            &[0.0, 1.0, 2.0],
            &[0.0, 0.0, 2.0],
            &[0.0, 0.0, 2.0],
            Variant::Convex,
        );
        let (xi, eta) = subgradient(&kink, &[1.5]).unwrap();
        assert!((xi[0] - 2.0).abs() < 1e-12 && (eta + 2.0).abs() < 1e-12);
    }

    #[test]
    fn extension_constant_fit() {
        let m = model_1d(&[0.0, 1.0, 2.0], &[4.0; 3], &[0.0; 3], Variant::Convex);
        for x in [-10.0, 0.3, 7.0] {
            assert_eq!(max_affine_extension(&m, &[x]).unwrap(), 4.0);
        }
    }

    #[test]
    fn rejects_bad_queries() {
        let m = model_1d(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0], Variant::Convex);
        assert!(matches!(
            evaluate(&m, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            evaluate(&m, &[f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
    }
}
