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

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimator, the evaluator, and their I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dataset is empty")]
    Empty,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires d = 1, got d = {0}")]
    DimensionError(usize),

    #[error("constraint system needs {required} bytes, budget is {budget} bytes")]
    CapacityExceeded { required: usize, budget: usize },

    #[error("numerical breakdown in simplex: {0}")]
    NumericalBreakdown(String),

    #[error("query point lies outside the domain of the estimator")]
    OutsideDomain,

    #[error("every grid point fell outside the domain ({dropped} dropped)")]
    EmptyGrid { dropped: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("witness is not admissible: {0}")]
    InvalidWitness(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("model document does not match the schema: {0}")]
    SchemaMismatch(String),

    #[error("unsupported format_version {0}")]
    VersionUnsupported(i64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
