//! Run configuration: a JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use coupled_core::afs::{AfsConfig, DictParams};
use coupled_core::coupled_loop::LogisticConfig;
use coupled_core::datagen::{ControlledConfig, LinearGaussianConfig, LogitDiagConfig};
use coupled_core::dataset::{ColumnSpec, LabelKind, StandardizePolicy};
use coupled_core::eval_cv::{log_grid, Method, MetricKind};
use coupled_core::linear_coupled::RidgeConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum GeneratorSpec {
    LinearGaussian(LinearGaussianConfig),
    Controlled(ControlledConfig),
    LogitDiag(LogitDiagConfig),
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::Controlled(ControlledConfig::default())
    }
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::LinearGaussian(_) => "linear_gaussian",
            GeneratorSpec::Controlled(_) => "controlled",
            GeneratorSpec::LogitDiag(_) => "logit_diag",
        }
    }

    /// Default parameters of a named preset.
    pub fn preset(name: &str) -> Result<Self, CliError> {
        match name {
            "linear_gaussian" => Ok(GeneratorSpec::LinearGaussian(Default::default())),
            "controlled" => Ok(GeneratorSpec::Controlled(Default::default())),
            "logit_diag" => Ok(GeneratorSpec::LogitDiag(Default::default())),
            _ => Err(CliError::Config(format!(
                "unknown preset {name:?} (expected linear_gaussian, controlled or logit_diag)"
            ))),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, GeneratorSpec::LogitDiag(_))
    }

    fn default_sizes(&self) -> Sizes {
        match self {
            GeneratorSpec::LinearGaussian(_) => Sizes { n: 50, m: 2000, n_test: 5000 },
            GeneratorSpec::Controlled(_) => Sizes { n: 100, m: 5000, n_test: 5000 },
            GeneratorSpec::LogitDiag(_) => {
                let (n, m, n_test) = LogitDiagConfig::PRESET_SIZES;
                Sizes { n, m, n_test }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub n: usize,
    pub m: usize,
    pub n_test: usize,
}

/// Log-spaced grid `10^start … 10^end` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { start: -4.0, end: 4.0, count: 25 }
    }
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || CliError::Config(format!("--lambda-grid expects START,END,COUNT, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].parse().map_err(|_| bad())?;
        let end = parts[1].parse().map_err(|_| bad())?;
        let count = parts[2].parse().map_err(|_| bad())?;
        let g = GridSpec { start, end, count };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.count == 0 || !self.start.is_finite() || !self.end.is_finite() || self.end < self.start {
            return Err(CliError::Config("lambda grid needs count >= 1 and finite start <= end".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        log_grid(self.start, self.end, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// Strength of the privileged signal.
    Signal,
    /// Number of nuisance privileged coordinates.
    Wdim,
    /// Size of the unlabeled pool.
    Unlabeled,
}

impl Which {
    pub fn knob(self) -> &'static str {
        match self {
            Which::Signal => "alpha",
            Which::Wdim => "d_noise",
            Which::Unlabeled => "m",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            Which::Signal => vec![0.0, 0.25, 0.5, 1.0, 2.0],
            Which::Wdim => vec![0.0, 10.0, 20.0, 40.0],
            Which::Unlabeled => vec![100.0, 1000.0, 10000.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub which: Option<Which>,
    /// Settings of the swept knob; panel defaults when empty.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSource {
    pub train: PathBuf,
    /// Fully labeled held-out file.
    #[serde(default)]
    pub test: Option<PathBuf>,
    pub columns: ColumnSpec,
    /// Fit on the training file only. `None` leaves the data untouched.
    #[serde(default = "default_standardize")]
    pub standardize: Option<StandardizePolicy>,
}

fn default_standardize() -> Option<StandardizePolicy> {
    Some(StandardizePolicy::FeaturesOnly)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AfsSettings {
    pub k_max: usize,
    pub lambda: f64,
    pub dict_f: DictParams,
    pub dict_g: DictParams,
    pub engine: AfsConfig,
}

impl Default for AfsSettings {
    fn default() -> Self {
        AfsSettings {
            k_max: 50,
            lambda: 1.0,
            dict_f: DictParams::rbf(0),
            dict_g: DictParams::rbf(1),
            engine: AfsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generator: GeneratorSpec,
    pub sizes: Option<Sizes>,
    pub seeds: Vec<u64>,
    /// Fold assignment seed; each data seed is used when absent.
    pub cv_seed: Option<u64>,
    pub methods: Vec<Method>,
    pub metrics: Vec<MetricKind>,
    pub lambda_grid: GridSpec,
    pub folds: usize,
    pub ridge: RidgeConfig,
    pub logistic: LogisticConfig,
    pub sweep: SweepSpec,
    pub csv: Option<CsvSource>,
    pub afs: AfsSettings,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            generator: GeneratorSpec::default(),
            sizes: None,
            seeds: vec![0],
            cv_seed: None,
            methods: Vec::new(),
            metrics: Vec::new(),
            lambda_grid: GridSpec::default(),
            folds: 5,
            ridge: RidgeConfig::default(),
            logistic: LogisticConfig::default(),
            sweep: SweepSpec::default(),
            csv: None,
            afs: AfsSettings::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub lambda_grid: Option<String>,
    pub methods: Option<String>,
    pub metrics: Option<String>,
    pub folds: Option<usize>,
    pub groups: Option<String>,
    pub preset: Option<String>,
    pub which: Option<Which>,
    pub k_max: Option<usize>,
    pub sizes: [Option<usize>; 3],
    pub data: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub label: Option<String>,
    pub deploy: Option<String>,
    pub privileged: Option<String>,
    pub binary: bool,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

impl RunConfig {
    /// Reads a config file; a `manifest.json` written by an earlier run is
    /// accepted too and replays that run.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if value.get("manifest_version").is_some() {
            value = value
                .get_mut("config")
                .map(serde_json::Value::take)
                .ok_or_else(|| CliError::Config("manifest has no config".into()))?;
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(g) = &o.lambda_grid {
            self.lambda_grid = GridSpec::parse(g)?;
        }
        if let Some(list) = &o.methods {
            self.methods = split_list(list)
                .iter()
                .map(|s| Method::parse(s).map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<_, _>>()?;
        }
        if let Some(list) = &o.metrics {
            self.metrics = split_list(list)
                .iter()
                .map(|s| MetricKind::parse(s).map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<_, _>>()?;
        }
        if let Some(k) = o.folds {
            self.folds = k;
        }
        if let Some(p) = &o.preset {
            if self.generator.name() != p {
                self.generator = GeneratorSpec::preset(p)?;
            }
        }
        if let Some(w) = o.which {
            self.sweep.which = Some(w);
        }
        if let Some(k) = o.k_max {
            self.afs.k_max = k;
        }
        if o.sizes.iter().any(Option::is_some) {
            let base = self.sizes();
            self.sizes = Some(Sizes {
                n: o.sizes[0].unwrap_or(base.n),
                m: o.sizes[1].unwrap_or(base.m),
                n_test: o.sizes[2].unwrap_or(base.n_test),
            });
        }
        if let Some(train) = &o.data {
            let label = o.label.clone().ok_or_else(|| CliError::Config("--data needs --label".into()))?;
            let deploy = o.deploy.as_deref().map(split_list).unwrap_or_default();
            if deploy.is_empty() {
                return Err(CliError::Config("--data needs --deploy".into()));
            }
            self.csv = Some(CsvSource {
                train: train.clone(),
                test: None,
                columns: ColumnSpec {
                    deployment_cols: deploy,
                    privileged_cols: o.privileged.as_deref().map(split_list).unwrap_or_default(),
                    label_col: label,
                    kind: if o.binary { LabelKind::Binary } else { LabelKind::Regression },
                    group_col: None,
                },
                standardize: default_standardize(),
            });
        }
        if let Some(t) = &o.test {
            let src = self.csv.as_mut().ok_or_else(|| CliError::Config("--test needs a CSV training source".into()))?;
            src.test = Some(t.clone());
        }
        if let Some(g) = &o.groups {
            let src = self.csv.as_mut().ok_or_else(|| CliError::Config("--groups needs a CSV source".into()))?;
            src.columns.group_col = Some(g.clone());
        }
        self.check()
    }

    fn check(&self) -> Result<(), CliError> {
        self.lambda_grid.check()?;
        if self.seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }
        if self.folds < 2 {
            return Err(CliError::Config("folds must be at least 2".into()));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes.unwrap_or_else(|| self.generator.default_sizes())
    }

    pub fn is_binary(&self) -> bool {
        match &self.csv {
            Some(src) => src.columns.kind == LabelKind::Binary,
            None => self.generator.is_binary(),
        }
    }

    /// Methods to run, defaulting to the family of the data.
    pub fn methods_or(&self, default: &[Method]) -> Result<Vec<Method>, CliError> {
        let methods = if self.methods.is_empty() { default.to_vec() } else { self.methods.clone() };
        if let Some(m) = methods.iter().find(|m| m.is_logistic() != self.is_binary()) {
            let kind = if self.is_binary() { "binary" } else { "regression" };
            return Err(CliError::Config(format!("method {} does not apply to {kind} labels", m.name())));
        }
        Ok(methods)
    }

    pub fn default_methods(&self) -> Vec<Method> {
        if self.is_binary() {
            vec![Method::LogisticBaseline, Method::LogisticTwoStage, Method::CoupledLogistic]
        } else {
            vec![Method::Baseline, Method::TwoStage, Method::Coupled]
        }
    }

    /// Test metrics, defaulting by label kind and by whether `μ` is known.
    pub fn test_metrics(&self) -> Vec<MetricKind> {
        if !self.metrics.is_empty() {
            return self.metrics.clone();
        }
        match (self.is_binary(), self.csv.is_some()) {
            (true, _) => vec![MetricKind::Brier, MetricKind::ZeroOne, MetricKind::Auroc],
            (false, true) => vec![MetricKind::Mse],
            (false, false) => vec![MetricKind::Mse, MetricKind::EstErrVsMu],
        }
    }

    pub fn cv_seed(&self, data_seed: u64) -> u64 {
        self.cv_seed.unwrap_or(data_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parses() {
        let g = GridSpec::parse("-2, 3,6").unwrap();
        assert_eq!(g, GridSpec { start: -2.0, end: 3.0, count: 6 });
        assert_eq!(g.values().len(), 6);
        assert!(GridSpec::parse("1,2").is_err());
        assert!(GridSpec::parse("3,1,4").is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"generator": {"preset": "controlled", "d_noise": 7}, "folds": 3}"#).unwrap();
        match cfg.generator {
            GeneratorSpec::Controlled(c) => {
                assert_eq!(c.d_noise, 7);
                assert_eq!(c.dx, 10);
            }
            _ => panic!("wrong generator"),
        }
        assert_eq!(cfg.folds, 3);
        assert_eq!(cfg.seeds, vec![0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"fold": 3}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = RunConfig { folds: 3, ..Default::default() };
        let o = Overrides { folds: Some(4), seed: Some(9), methods: Some("coupled,baseline".into()), ..Default::default() };
        cfg.apply(&o).unwrap();
        assert_eq!(cfg.folds, 4);
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.methods, vec![Method::Coupled, Method::Baseline]);
    }

    #[test]
    fn logistic_method_on_regression_data_is_a_config_error() {
        let cfg = RunConfig { methods: vec![Method::CoupledLogistic], ..Default::default() };
        assert!(matches!(cfg.methods_or(&[]), Err(CliError::Config(_))));
    }
}
