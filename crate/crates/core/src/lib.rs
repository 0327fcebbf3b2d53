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

//! Nonparametric least squares estimation of multivariate convex regression
//! functions, optionally constrained to be nonincreasing in every coordinate.
//!
//! Fitting projects the responses onto the cone of vectors realizable as
//! evaluations of a convex function at the design points ([`qp::fit`]). The
//! fitted function is the largest convex function below the fitted values,
//! evaluated pointwise by a small linear program ([`eval::evaluate`]), whose
//! dual supplies a subgradient.

// Index loops are the clearest form for the small dense kernels here.
#![allow(clippy::needless_range_loop)]

pub mod cone;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod oracle;
pub mod qp;
pub mod sim;

pub use dataset::{standardize, validate, Dataset, ScaleTransform};
pub use error::{Error, Result};
pub use eval::{evaluate, max_affine_extension, subgradient};
pub use model::{EvalResult, FitConfig, FitModel, SolveDiagnostics, SolveStatus, Variant};
pub use qp::{fit, kkt_check, project, KktReport};
