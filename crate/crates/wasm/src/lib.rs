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


//! Browser bindings. Every export takes and returns text (CSV or JSON) so the
//! page needs no glue beyond the generated module. The plain functions are
//! the same operations with `String` errors, usable natively.

use convex_lse::io::{self, Prediction};
use convex_lse::sim::{self, Design, Scenario, Truth};
use convex_lse::{evaluate, fit, FitConfig, Variant};
use wasm_bindgen::prelude::*;

/// Largest sample the demo will fit; the dense factorization grows as `n^2`.
pub const MAX_POINTS: usize = 2000;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn parse_variant(name: &str) -> Result<Variant, String> {
    match name {
        "convex" => Ok(Variant::Convex),
        "monotone" | "convex_nonincreasing" => Ok(Variant::ConvexNonincreasing),
        other => Err(format!("unknown variant {other:?}; expected convex or monotone")),
    }
}

/// Fits a CSV dataset and returns the model as JSON.
pub fn fit_csv(csv: &str, response: &str, variant: &str) -> Result<String, String> {
    let variant = parse_variant(variant)?;
    let (data, _) = io::parse_dataset(csv.as_bytes(), response).map_err(text)?;
    if data.n() > MAX_POINTS {
        return Err(format!("{} rows exceed the demo limit of {MAX_POINTS}", data.n()));
    }
    let model = fit(&data, variant, &FitConfig::default()).map_err(text)?;
    io::model_to_json(&model).map_err(text)
}

/// Evaluates a JSON model at CSV query points. `extension` is `envelope`
/// (infinite outside the hull) or `maxaffine`. The output has columns
/// `value,in_domain,xi_1..xi_d,eta`.
pub fn predict_csv(model_json: &str, points_csv: &str, extension: &str) -> Result<String, String> {
    let model = io::model_from_json(model_json).map_err(text)?;
    let (coords, d) = io::parse_points(points_csv.as_bytes()).map_err(text)?;
    if d != model.d() {
        return Err(text(convex_lse::Error::DimensionMismatch { expected: model.d(), got: d }));
    }
    let mut rows = Vec::with_capacity(coords.len() / d.max(1));
    for x in coords.chunks(d) {
        let r = evaluate(&model, x).map_err(text)?;
        let row = match extension {
            "envelope" => Prediction {
                value: r.value,
                in_domain: r.in_domain,
                hyperplane: r.subgradient.zip(r.intercept),
            },
            "maxaffine" => {
                let (xi, eta) = convex_lse::eval::max_affine_hyperplane(&model, x).map_err(text)?;
                let value = xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + eta;
                Prediction {
                    value,
                    in_domain: r.in_domain,
                    hyperplane: Some((xi, eta)),
                }
            }
            other => return Err(format!("unknown extension {other:?}; expected envelope or maxaffine")),
        };
        rows.push(row);
    }
    let mut buf = Vec::new();
    io::format_predictions(&mut buf, &rows, d, true).map_err(text)?;
    String::from_utf8(buf).map_err(text)
}

/// Draws a simulated dataset as CSV with columns `x1..xd,y`. `scenario` is
/// `quadratic` (`|x|^2`) or `hyperplane`; points are uniform on `[-1, 1]^d`.
pub fn sample_csv(scenario: &str, d: usize, n: usize, sigma: f64, seed: u64) -> Result<String, String> {
    let truth = match scenario {
        "quadratic" => Truth::Quadratic,
        "hyperplane" => Truth::tilted_plane(d),
        other => return Err(format!("unknown scenario {other:?}; expected quadratic or hyperplane")),
    };
    let scenario = Scenario {
        truth,
        design: Design::IidUniform,
        d,
        n,
        noise_sigma: sigma,
        seed,
    };
    let data = sim::generate(&scenario).map_err(text)?;
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let mut buf = Vec::new();
    io::format_dataset(&mut buf, &data, &names, "y").map_err(text)?;
    String::from_utf8(buf).map_err(text)
}

#[wasm_bindgen(js_name = fitModel)]
pub fn fit_model(csv: &str, response: &str, variant: &str) -> Result<String, JsValue> {
    fit_csv(csv, response, variant).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn predict(model_json: &str, points_csv: &str, extension: &str) -> Result<String, JsValue> {
    predict_csv(model_json, points_csv, extension).map_err(|e| JsValue::from_str(&e))
}

/// The seed is 32-bit so the page can pass a plain number.
#[wasm_bindgen(js_name = sampleScenario)]
pub fn sample_scenario(scenario: &str, d: usize, n: usize, sigma: f64, seed: u32) -> Result<String, JsValue> {
    sample_csv(scenario, d, n, sigma, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
