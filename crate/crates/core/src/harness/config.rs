//! Experiment configuration: a TOML file plus `key=value` overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::assembly::{Pde, ScalingSpec};
use crate::error::{Error, Result};
use crate::geometry::{BcMode, Domain};
use crate::problems::Problem;
use crate::solver::{ProductOrder, RefinementPolicy};

/// Discretization variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Oversampled least squares.
    #[default]
    Ls,
    /// Least squares with a ghost-node layer.
    LsGhost,
    /// Collocation (Y = X).
    C,
    /// Collocation with a ghost-node layer.
    CGhost,
}

impl Method {
    pub fn ghost(self) -> bool {
        matches!(self, Method::LsGhost | Method::CGhost)
    }

    pub fn collocation(self) -> bool {
        matches!(self, Method::C | Method::CGhost)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Ls => "LS",
            Method::LsGhost => "LS-Ghost",
            Method::C => "C",
            Method::CGhost => "C-Ghost",
        }
    }
}

/// Rule for the Dirichlet row weight `β₀`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaRule {
    One,
    #[default]
    InvH,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeKind {
    #[default]
    Poisson,
    Advection,
}

/// Accepts either a single value or a list.
fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: String,
    pub domain_params: Vec<f64>,
    pub problem: String,
    pub bc_mode: BcMode,
    pub method: Method,
    /// Polynomial degree `p`.
    pub degree: u32,
    /// Kernel `r^(2k−1)` is selected by `k`.
    pub phs_index: u32,
    /// Stencil size; `2m` when absent.
    pub stencil_size: Option<usize>,
    /// Oversampling `q = M/N` (ignored by collocation).
    pub oversampling: f64,
    /// Oversampling of the set on which the error is measured.
    pub error_oversampling: f64,
    /// Node spacings for single solves and h-sweeps.
    #[serde(deserialize_with = "one_or_many")]
    pub spacings: Vec<f64>,
    /// Target node counts, used instead of `h` when nonempty.
    #[serde(deserialize_with = "one_or_many")]
    pub n_targets: Vec<usize>,
    /// Degrees of a p-sweep.
    #[serde(deserialize_with = "one_or_many")]
    pub degrees: Vec<u32>,
    /// Oversampling values of a q-sweep.
    #[serde(deserialize_with = "one_or_many")]
    pub oversampling_values: Vec<f64>,
    pub beta0: BetaRule,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub measure_stability: bool,
    pub measure_conditioning: bool,
    /// Laplacian rows at boundary nodes without ghost nodes.
    pub boundary_laplacian: bool,
    pub pde: PdeKind,
    pub velocity: [f64; 3],
    pub spectrum_order: ProductOrder,
    pub refinement: RefinementPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: "star".into(),
            domain_params: Vec::new(),
            problem: "rational-sine".into(),
            bc_mode: BcMode::Mixed,
            method: Method::Ls,
            degree: 5,
            phs_index: 2,
            stencil_size: None,
            oversampling: 3.0,
            error_oversampling: 3.0,
            spacings: vec![0.05],
            n_targets: Vec::new(),
            degrees: vec![3, 4, 5, 6, 7, 8],
            oversampling_values: vec![
                1.1, 1.3, 1.7, 2.0, 2.3, 2.7, 3.0, 3.3, 3.7, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0,
                11.0,
            ],
            beta0: BetaRule::InvH,
            beta1: 1.0,
            beta2: 1.0,
            seed: 1,
            output: None,
            measure_stability: true,
            measure_conditioning: false,
            boundary_laplacian: false,
            pde: PdeKind::Poisson,
            velocity: [0.0, 1.0, 0.0],
            spectrum_order: ProductOrder::EvaluationTimesOperatorPinv,
            refinement: RefinementPolicy::Auto,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Applies `key=value` overrides; values use TOML syntax, bare words are
    /// taken as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml()).map_err(|e| Error::Parse(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override '{item}' is not key=value")))?;
            let key = key.trim();
            let raw = raw.trim();
            let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
                Ok(mut t) => t.remove("v").unwrap(),
                Err(_) => toml::Value::String(raw.to_string()),
            };
            table.insert(key.to_string(), value);
        }
        let cfg: ExperimentConfig =
            toml::from_str(&toml::to_string(&table).map_err(|e| Error::Parse(e.to_string()))?)
                .map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 2 || self.degrees.iter().any(|&p| p < 2) {
            return Err(Error::Parse("polynomial degree must be at least 2".into()));
        }
        if !(self.oversampling >= 1.0) || !(self.error_oversampling >= 1.0) {
            return Err(Error::Parse("oversampling must be at least 1".into()));
        }
        if self.phs_index < 2 {
            return Err(Error::Parse("phs_index must be at least 2".into()));
        }
        if self.spacings.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Parse("node spacings must be positive".into()));
        }
        if self.spacings.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Parse(
                "node spacings must be strictly decreasing".into(),
            ));
        }
        if self.n_targets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse(
                "node count targets must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::from_name(&self.domain, &self.domain_params)
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::from_name(&self.problem)
    }

    pub fn scaling(&self, spacing: f64) -> ScalingSpec {
        ScalingSpec {
            dirichlet: match self.beta0 {
                BetaRule::One => 1.0,
                BetaRule::InvH => 1.0 / spacing,
            },
            neumann: self.beta1,
            interior: self.beta2,
        }
    }

    pub fn pde_operator(&self) -> Pde {
        match self.pde {
            PdeKind::Poisson => Pde::Poisson,
            PdeKind::Advection => Pde::Advection {
                velocity: self.velocity,
            },
        }
    }

    /// Oversampling actually used for the evaluation set.
    pub fn effective_oversampling(&self) -> f64 {
        if self.method.collocation() {
            1.0
        } else {
            self.oversampling
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_overrides() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let o = cfg
            .with_overrides(&[
                "degree=3",
                "method=c-ghost",
                "spacings=[0.1, 0.05]",
                "problem=distance",
            ])
            .unwrap();
        assert_eq!(o.degree, 3);
        assert_eq!(o.method, Method::CGhost);
        assert_eq!(o.spacings, vec![0.1, 0.05]);
        assert_eq!(
            cfg.with_overrides(&["spacings=0.1"]).unwrap().spacings,
            vec![0.1]
        );
        assert_eq!(o.problem, "distance");
        assert!(cfg.with_overrides(&["bogus=1"]).is_err());
        assert!(cfg.with_overrides(&["oversampling=0.5"]).is_err());
        assert!(cfg.with_overrides(&["spacings=[0.05, 0.1]"]).is_err());
        assert!(cfg.with_overrides(&["degree=1"]).is_err());
        let partial =
            ExperimentConfig::from_toml("degree = 4\nbc_mode = \"pure-dirichlet\"\n").unwrap();
        assert_eq!(partial.degree, 4);
        assert_eq!(partial.bc_mode, BcMode::PureDirichlet);
        assert_eq!(partial.oversampling, 3.0);
    }
}
