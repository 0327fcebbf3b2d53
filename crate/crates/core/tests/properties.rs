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


//! Randomized checks of the projection, the evaluator and the scaling.

use convex_lse::cone::{build_constraints, residual};
use convex_lse::oracle::{d1_cone, dykstra_project, random_max_affine, CoefficientRange};
use convex_lse::{
    evaluate, fit, max_affine_extension, standardize, subgradient, validate, Dataset, FitConfig,
    FitModel, Variant,
};
use proptest::prelude::*;

const STAT_TOL: f64 = 1e-8;

fn dataset(d: usize, max_n: usize) -> impl Strategy<Value = Dataset> {
    (2..=max_n).prop_flat_map(move |n| {
        (
            prop::collection::vec(-2.0..2.0f64, n * d),
            prop::collection::vec(-3.0..3.0f64, n),
        )
            .prop_map(move |(p, y)| Dataset::from_flat(p, d, y).unwrap())
    })
}

/// Jittered grid on [-1, 1]. Cyclic projections slow down without bound as
/// two design points approach each other, so the oracle needs spread points.
fn spaced_line(max_n: usize) -> impl Strategy<Value = Dataset> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(-0.3..0.3f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
        )
            .prop_map(move |(jitter, y)| {
                let h = 2.0 / (n - 1) as f64;
                let x = jitter.iter().enumerate().map(|(k, j)| -1.0 + h * (k as f64 + j)).collect();
                Dataset::from_flat(x, 1, y).unwrap()
            })
    })
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Convex), Just(Variant::ConvexNonincreasing)]
}

fn scale(data: &Dataset) -> f64 {
    1.0 + data.response_scale()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Convex combination of design points with the given raw weights.
fn combine(model: &FitModel, raw: &[f64]) -> Vec<f64> {
    let d = model.d();
    let total: f64 = raw.iter().take(model.n()).sum();
    let mut x = vec![0.0; d];
    for (k, w) in raw.iter().enumerate().take(model.n()) {
        for (xi, p) in x.iter_mut().zip(model.point(k)) {
            *xi += w / total * p;
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn one_dimensional_fit_matches_dykstra(data in spaced_line(20)) {
        let model = fit(&data, Variant::Convex, &FitConfig::default()).unwrap();
        prop_assert!(model.converged());
        let rows = d1_cone(data.points(), 1).unwrap();
        let z = dykstra_project(data.responses(), &rows).unwrap();
        prop_assert!(max_diff(model.fitted(), &z) <= 1e-5);
    }

    #[test]
    fn fitted_slopes_are_feasible(data in dataset(2, 25), v in variant()) {
        let model = fit(&data, v, &FitConfig::default()).unwrap();
        let sys = build_constraints(&data, v).unwrap();
        let r = residual(&sys, model.fitted(), model.subgradients()).unwrap();
        prop_assert!(r <= 1e-7 * scale(&data), "residual {r}");
    }

    #[test]
    fn solution_is_unique_in_z(data in dataset(2, 25), v in variant()) {
        let a = fit(&data, v, &FitConfig::default()).unwrap();
        let cfg = FitConfig { working_set: false, rho: 1.0, ..FitConfig::default() };
        let b = fit(&data, v, &cfg).unwrap();
        prop_assert!(max_diff(a.fitted(), b.fitted()) <= 10.0 * STAT_TOL);
    }

    #[test]
    fn projection_is_idempotent(data in dataset(2, 25), v in variant()) {
        let a = fit(&data, v, &FitConfig::default()).unwrap();
        let again = fit(&a.fitted_dataset(), v, &FitConfig::default()).unwrap();
        prop_assert!(max_diff(a.fitted(), again.fitted()) <= 10.0 * STAT_TOL, "{:e}\n{:?}\n{:?}\n{:?}", max_diff(a.fitted(), again.fitted()), a.diagnostics().status, again.diagnostics().status, (data.points(), data.responses()));
    }

    #[test]
    fn pythagoras(data in dataset(2, 25), seed in any::<u64>()) {
        let model = fit(&data, Variant::Convex, &FitConfig::default()).unwrap();
        let y = data.responses();
        let z = model.fitted();
        let tol = 1e-6 * scale(&data).powi(2);
        for w in random_max_affine(seed, 10, 2, &CoefficientRange::default()) {
            let wv: Vec<f64> = (0..data.n()).map(|k| w.eval(data.point(k))).collect();
            let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
            prop_assert!(sq(y, z) + sq(z, &wv) <= sq(y, &wv) + tol);
        }
    }

    #[test]
    fn monotone_fit_costs_more(data in dataset(2, 25)) {
        let convex = fit(&data, Variant::Convex, &FitConfig::default()).unwrap();
        let mono = fit(&data, Variant::ConvexNonincreasing, &FitConfig::default()).unwrap();
        let tol = 1e-6 * scale(&data).powi(2);
        prop_assert!(mono.diagnostics().objective >= convex.diagnostics().objective - tol);
        prop_assert!(mono.subgradients().iter().all(|&s| s <= 1e-7));
    }

    #[test]
    fn fit_scales_with_responses(data in dataset(2, 20)) {
        let base = fit(&data, Variant::Convex, &FitConfig::default()).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = data.with_responses(data.responses().iter().map(|y| c * y).collect()).unwrap();
            let m = fit(&scaled, Variant::Convex, &FitConfig::default()).unwrap();
            let want: Vec<f64> = base.fitted().iter().map(|z| c * z).collect();
            prop_assert!(max_diff(m.fitted(), &want) <= 1e-6 * c.max(1.0));
        }
    }

    #[test]
    fn scaling_does_not_change_the_fit(data in dataset(2, 20), v in variant()) {
        let on = fit(&data, v, &FitConfig::default()).unwrap();
        let off = fit(&data, v, &FitConfig { scaling: false, ..FitConfig::default() }).unwrap();
        prop_assert!(max_diff(on.fitted(), off.fitted()) <= 1e-6 * scale(&data));
    }

    #[test]
    fn standardize_inverts(data in dataset(3, 20)) {
        let (std, t) = standardize(&data);
        let back = t.unapply(&std);
        for (a, b) in back.points().iter().zip(data.points()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        for (a, b) in back.responses().iter().zip(data.responses()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn envelope_is_convex_and_minorizes(
        data in dataset(2, 20),
        v in variant(),
        pairs in prop::collection::vec(
            (prop::collection::vec(0.01..1.0f64, 20), prop::collection::vec(0.01..1.0f64, 20)),
            40,
        ),
        seed in any::<u64>(),
    ) {
        let model = fit(&data, v, &FitConfig::default()).unwrap();
        for k in 0..model.n() {
            let r = evaluate(&model, model.point(k)).unwrap();
            prop_assert!((r.value - model.fitted()[k]).abs() <= 1e-9, "{} vs {} {:?}", r.value, model.fitted()[k], model.diagnostics().primal_residual);
            let ext = max_affine_extension(&model, model.point(k)).unwrap();
            prop_assert!((ext - model.fitted()[k]).abs() <= 1e-9);
        }
        let range = if v.is_monotone() { CoefficientRange::default().nonincreasing() } else { CoefficientRange::default() };
        let witnesses: Vec<_> = random_max_affine(seed, 20, 2, &range)
            .into_iter()
            .map(|w| {
                // Shift each witness down until it lies below the fitted values.
                let gap = (0..model.n())
                    .map(|k| w.eval(model.point(k)) - model.fitted()[k])
                    .fold(f64::NEG_INFINITY, f64::max);
                (w, gap)
            })
            .collect();
        for (wu, wv) in &pairs {
            let u = combine(&model, wu);
            let w = combine(&model, wv);
            let mid: Vec<f64> = u.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
            let (fu, fw, fm) = (
                evaluate(&model, &u).unwrap(),
                evaluate(&model, &w).unwrap(),
                evaluate(&model, &mid).unwrap(),
            );
            prop_assert!(fu.in_domain && fw.in_domain && fm.in_domain);
            prop_assert!(fm.value <= 0.5 * (fu.value + fw.value) + 1e-8);
            let (xi, eta) = subgradient(&model, &u).unwrap();
            let at_u: f64 = xi.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() + eta;
            prop_assert!((at_u - fu.value).abs() <= 1e-9);
            let lin: f64 = fu.value + xi.iter().zip(w.iter().zip(&u)).map(|(g, (b, a))| g * (b - a)).sum::<f64>();
            prop_assert!(fw.value >= lin - 1e-8);
            for k in 0..model.n() {
                let h: f64 = xi.iter().zip(model.point(k)).map(|(a, b)| a * b).sum::<f64>() + eta;
                prop_assert!(h <= model.fitted()[k] + 1e-9);
            }
            prop_assert!(max_affine_extension(&model, &u).unwrap() <= fu.value + 1e-9);
            for (wit, gap) in &witnesses {
                prop_assert!(wit.eval(&u) - gap.max(0.0) <= fu.value + 1e-8);
            }
            if v.is_monotone() {
                prop_assert!(xi.iter().all(|&g| g <= 1e-9));
            }
        }
    }

    #[test]
    fn monotone_envelope_is_nonincreasing(
        data in dataset(2, 20),
        steps in prop::collection::vec((prop::collection::vec(0.01..1.0f64, 20), 0.0..3.0f64, 0..2usize), 40),
    ) {
        let model = fit(&data, Variant::ConvexNonincreasing, &FitConfig::default()).unwrap();
        for (raw, t, i) in &steps {
            let x = combine(&model, raw);
            let mut y = x.clone();
            y[*i] += t;
            let (fx, fy) = (evaluate(&model, &x).unwrap(), evaluate(&model, &y).unwrap());
            prop_assert!(fy.in_domain);
            prop_assert!(fx.value - fy.value >= -1e-8);
        }
    }
}

#[test]
fn affine_data_identities_vanish() {
    let pts: Vec<Vec<f64>> = (0..20).map(|k| vec![(k as f64).sin(), (k as f64 * 0.4).cos()]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| 1.5 * p[0] - 2.0 * p[1] + 0.25).collect();
    let data = validate(&pts, &ys).unwrap();
    let model = fit(&data, Variant::Convex, &FitConfig::default()).unwrap();
    let r = convex_lse::kkt_check(&model, &data, &random_max_affine(3, 20, 2, &CoefficientRange::default())).unwrap();
    assert!(r.identity_residual_a <= 1e-7 && r.identity_residual_b <= 1e-7);
    assert!(r.max_witness_inner <= 1e-7);
    // Interior point: the supporting slope is the affine slope.
    let (xi, eta) = subgradient(&model, &combine(&model, &[1.0; 20])).unwrap();
    assert!((xi[0] - 1.5).abs() <= 1e-7 && (xi[1] + 2.0).abs() <= 1e-7 && (eta - 0.25).abs() <= 1e-7);
}

#[test]
fn self_witness_is_orthogonal() {
    let pts: Vec<Vec<f64>> = (0..15).map(|k| vec![(k as f64 * 0.9).sin(), (k as f64 * 1.7).cos()]).collect();
    let ys: Vec<f64> = pts.iter().enumerate().map(|(k, p)| p[0] * p[1] + (k % 3) as f64).collect();
    let data = validate(&pts, &ys).unwrap();
    let model = fit(&data, Variant::Convex, &FitConfig::default()).unwrap();
    // The max-affine extension agrees with the fit at every design point.
    let d = model.d();
    let mut slopes = Vec::new();
    let mut intercepts = Vec::new();
    for j in 0..model.n() {
        let s = model.subgradient_at(j);
        slopes.extend_from_slice(s);
        intercepts.push(model.fitted()[j] - s.iter().zip(model.point(j)).map(|(a, b)| a * b).sum::<f64>());
    }
    let own = convex_lse::oracle::MaxAffine::new(d, slopes, intercepts).unwrap();
    let r = convex_lse::kkt_check(&model, &data, &[own]).unwrap();
    assert!(r.max_witness_inner.abs() <= 1e-6, "{r:?}");
}
