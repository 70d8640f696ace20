//! Run configuration: a versioned TOML document.
//!
//! Matrices are flat row-major lists of `[re, im]` pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::operator::{CMatrix, ManyBodyOperator, C64};
use crate::scaling::SweepSpec;
use crate::solvers::{ContractionConfig, SeriesConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

pub type MatrixEntries = Vec<[f64; 2]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Equivalence,
    Invert,
    Meanfield,
    Chaos,
    CumulantTable,
    Selftest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    #[serde(default = "one")]
    pub hbar: f64,
    pub coupling: f64,
    pub one_body: MatrixEntries,
    pub pair_potential: MatrixEntries,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub f1: MatrixEntries,
}

/// Command parameters that are not part of the model or the series settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Cluster size for marginals and correlations.
    pub s: usize,
    /// Evaluation time of `equivalence` and `invert`.
    pub time: f64,
    /// Time grid of `evolve`.
    pub times: Vec<f64>,
    pub n_max_list: Vec<usize>,
    /// One-particle observable for `evolve`; `None` means `diag(1, -1, 0, ...)`.
    pub observable: Option<MatrixEntries>,
    /// Largest `s + n` in `cumulant-table`.
    pub cumulant_max_total: usize,
    pub cumulant_times: Vec<f64>,
    /// Evolution-operator orders `n` probed by `chaos`.
    pub vanishing_orders: Vec<usize>,
    pub quadrature_nodes: usize,
    /// Seed of the random test operators.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            s: 2,
            time: 0.3,
            times: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            n_max_list: vec![1, 2, 3, 4],
            observable: None,
            cumulant_max_total: 4,
            cumulant_times: vec![0.1, 0.5, 1.0],
            vanishing_orders: vec![1, 2],
            quadrature_nodes: 32,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default)]
    pub format: Format,
    /// Report destination; standard output when absent.
    #[serde(default, skip_serializing)]
    pub output_path: Option<String>,
    /// Worker threads; 0 selects one per core. Results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub contraction: ContractionConfig,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

/// Parsed and validated configuration together with the built model objects.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub model: ModelSpec,
    pub f1: ManyBodyOperator,
    pub observable: ManyBodyOperator,
}

pub fn parse(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn default_config() -> RunConfig {
    parse(DEFAULT_CONFIG).expect("bundled config parses")
}

fn matrix(field: &str, entries: &[[f64; 2]], side: usize) -> Result<CMatrix> {
    if entries.len() != side * side {
        return Err(Error::invalid(
            field,
            format!("expected {} entries for a {side}x{side} matrix, got {}", side * side, entries.len()),
        ));
    }
    if entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid(field, "entries must be finite"));
    }
    let values: Vec<C64> = entries.iter().map(|&[re, im]| C64::new(re, im)).collect();
    Ok(CMatrix::from_row_slice(side, side, &values))
}

/// Flattens a matrix into row-major `[re, im]` pairs.
pub fn entries(m: &CMatrix) -> MatrixEntries {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push([m[(r, c)].re, m[(r, c)].im]);
        }
    }
    out
}

impl RunConfig {
    pub fn resolve(self) -> Result<Resolved> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let d = self.model.dim;
        if d < 2 {
            return Err(Error::invalid("model.dim", "one-particle dimension must be at least 2"));
        }
        let one_body = matrix("model.one_body", &self.model.one_body, d)?;
        let pair = matrix("model.pair_potential", &self.model.pair_potential, d * d)?;
        let model = ModelSpec::new(d, self.model.hbar, one_body, pair, self.model.coupling)?;
        let f1 = ManyBodyOperator::one_particle(matrix("initial.f1", &self.initial.f1, d)?)?;
        f1.require_hermitian("initial.f1")?;
        let observable = match &self.experiment.observable {
            Some(e) => ManyBodyOperator::one_particle(matrix("experiment.observable", e, d)?)?,
            None => {
                let diag: Vec<C64> = (0..d)
                    .map(|i| C64::new([1.0, -1.0].get(i).copied().unwrap_or(0.0), 0.0))
                    .collect();
                ManyBodyOperator::from_diagonal(d, 1, &diag)?
            }
        };
        observable.require_hermitian("experiment.observable")?;
        self.series.validate()?;
        self.contraction.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        let ex = &self.experiment;
        if ex.s == 0 {
            return Err(Error::invalid("experiment.s", "must be at least 1"));
        }
        if ex.n_max_list.is_empty() {
            return Err(Error::invalid("experiment.n_max_list", "must be nonempty"));
        }
        if ex.quadrature_nodes < 2 {
            return Err(Error::invalid("experiment.quadrature_nodes", "must be at least 2"));
        }
        if ex.times.iter().chain(&ex.cumulant_times).chain([&ex.time]).any(|t| !t.is_finite()) {
            return Err(Error::invalid("experiment.times", "must be finite"));
        }
        Ok(Resolved {
            config: self,
            model,
            f1,
            observable,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_resolves() {
        let r = default_config().resolve().unwrap();
        assert_eq!(r.model.dim(), 2);
        assert!((r.f1.trace_norm() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_one_body_is_named() {
        let mut c = default_config();
        c.model.one_body[1] = [0.3, 0.2];
        let err = c.resolve().unwrap_err();
        assert!(err.to_string().contains("model.one_body"), "{err}");
    }

    #[test]
    fn unknown_fields_and_versions_rejected() {
        let text = DEFAULT_CONFIG.replace("schema_version = 1", "schema_version = 1\nbogus = 3");
        assert!(matches!(parse(&text), Err(Error::Config(_))));
        let text = DEFAULT_CONFIG.replace("schema_version = 1", "schema_version = 2");
        let err = parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn matrix_shape_checked() {
        let mut c = default_config();
        c.initial.f1.pop();
        assert!(c.resolve().unwrap_err().to_string().contains("initial.f1"));
    }
}
