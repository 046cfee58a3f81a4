//! Metrics, labeled-only cross-validation of λ, λ sweeps and theory
//! diagnostics.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::coupled_loop::{logistic_baseline, logistic_two_stage, run_coupled_logistic, LogisticConfig};
use crate::datagen::{Pool, TestSet, Truth};
use crate::dataset::Dataset;
use crate::linalg::{sigmoid, stream_rng, with_intercept};
use crate::linear_coupled::{
    solve_baseline, solve_gen_distill, solve_two_stage, CoupledGram, DistillConfig, FeatureView, RidgeConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Mse,
    EstErrVsMu,
    Brier,
    ZeroOne,
    Auroc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Mse => "mse",
            MetricKind::EstErrVsMu => "est_err_vs_mu",
            MetricKind::Brier => "brier",
            MetricKind::ZeroOne => "zero_one",
            MetricKind::Auroc => "auroc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "mse" => MetricKind::Mse,
            "est_err_vs_mu" => MetricKind::EstErrVsMu,
            "brier" => MetricKind::Brier,
            "zero_one" => MetricKind::ZeroOne,
            "auroc" => MetricKind::Auroc,
            other => return Err(Error::invalid(format!("unknown metric {other:?}"))),
        })
    }

    /// Larger is better only for AUROC.
    pub fn higher_is_better(self) -> bool {
        self == MetricKind::Auroc
    }

    fn needs_binary_truth(self) -> bool {
        matches!(self, MetricKind::Brier | MetricKind::ZeroOne | MetricKind::Auroc)
    }
}

fn check_binary(truth: &DVector<f64>) -> Result<()> {
    if truth.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryLabels);
    }
    Ok(())
}

/// Scores `predictions` against `truth`. For `est_err_vs_mu` the truth is
/// `μ` on the evaluation points; for the binary metrics predictions are
/// probabilities (scores for AUROC).
pub fn metric(kind: MetricKind, predictions: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predictions.len() });
    }
    if truth.is_empty() {
        return Err(Error::invalid("metric of an empty sample"));
    }
    if kind.needs_binary_truth() {
        check_binary(truth)?;
    }
    let n = truth.len() as f64;
    Ok(match kind {
        MetricKind::Mse | MetricKind::EstErrVsMu => (predictions - truth).norm_squared() / n,
        MetricKind::Brier => {
            predictions.iter().zip(truth.iter()).map(|(&p, &y)| (p.clamp(1e-6, 1.0 - 1e-6) - y).powi(2)).sum::<f64>() / n
        }
        MetricKind::ZeroOne => {
            predictions
                .iter()
                .zip(truth.iter())
                .filter(|(&p, &y)| (if p >= 0.5 { 1.0 } else { 0.0 }) != y)
                .count() as f64
                / n
        }
        MetricKind::Auroc => auroc(predictions, truth)?,
    })
}

/// Area under the ROC curve via the midrank (Mann–Whitney) formula.
pub fn auroc(scores: &DVector<f64>, labels: &DVector<f64>) -> Result<f64> {
    check_binary(labels)?;
    let pos = labels.iter().filter(|&&v| v == 1.0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("auroc needs both classes"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("auroc scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = (0..labels.len()).filter(|&k| labels[k] == 1.0).map(|k| ranks[k]).sum();
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    TwoStage,
    Coupled,
    GenDistill,
    LogisticBaseline,
    LogisticTwoStage,
    CoupledLogistic,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Baseline,
        Method::TwoStage,
        Method::Coupled,
        Method::GenDistill,
        Method::LogisticBaseline,
        Method::LogisticTwoStage,
        Method::CoupledLogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::TwoStage => "two_stage",
            Method::Coupled => "coupled",
            Method::GenDistill => "gen_distill",
            Method::LogisticBaseline => "logistic_baseline",
            Method::LogisticTwoStage => "logistic_two_stage",
            Method::CoupledLogistic => "coupled_logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }

    pub fn uses_lambda(self) -> bool {
        matches!(self, Method::Coupled | Method::CoupledLogistic)
    }

    pub fn is_logistic(self) -> bool {
        matches!(self, Method::LogisticBaseline | Method::LogisticTwoStage | Method::CoupledLogistic)
    }

    /// The labeled-only and pseudo-labeling references of the same family.
    pub fn references(self) -> (Method, Method) {
        if self.is_logistic() {
            (Method::LogisticBaseline, Method::LogisticTwoStage)
        } else {
            (Method::Baseline, Method::TwoStage)
        }
    }
}

/// A deployment predictor `x ↦ x̄ᵀβ`, passed through the logistic link for
/// the binary methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployModel {
    pub coef: DVector<f64>,
    pub logistic: bool,
}

impl DeployModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() + 1 != self.coef.len() {
            return Err(Error::DimensionMismatch { expected: self.coef.len() - 1, got: x.ncols() });
        }
        let lin = with_intercept(x) * &self.coef;
        Ok(if self.logistic { lin.map(sigmoid) } else { lin })
    }
}

/// A named training method with its fixed hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub method: Method,
    pub ridge: RidgeConfig,
    pub distill: DistillConfig,
    pub logistic: LogisticConfig,
}

impl Trainer {
    pub fn new(method: Method) -> Self {
        Trainer {
            method,
            ridge: RidgeConfig::default(),
            distill: DistillConfig {
                teacher_view: FeatureView::XW,
                alpha_teacher: 1e-8,
                alpha_student: 1e-8,
                a_labeled: 1.0,
                a_unlabeled: 1.0,
            },
            logistic: LogisticConfig::default(),
        }
    }

    pub fn with_ridge(mut self, ridge: RidgeConfig) -> Self {
        self.ridge = ridge;
        self
    }

    /// Metric used when none is requested.
    pub fn default_metric(&self) -> MetricKind {
        if self.method.is_logistic() {
            MetricKind::Brier
        } else {
            MetricKind::Mse
        }
    }

    /// Same hyperparameters, different method.
    pub fn for_method(&self, method: Method) -> Self {
        Trainer { method, ..self.clone() }
    }

    pub fn fit(&self, ds: &Dataset, lambda: f64) -> Result<DeployModel> {
        Ok(self.fit_grid(ds, &[lambda])?.pop().expect("one model per lambda"))
    }

    /// One model per λ. The square-loss coupled method factors its normal
    /// equations once per dataset.
    pub fn fit_grid(&self, ds: &Dataset, grid: &[f64]) -> Result<Vec<DeployModel>> {
        let linear = |coef: DVector<f64>| DeployModel { coef, logistic: false };
        let logit = |coef: DVector<f64>| DeployModel { coef, logistic: true };
        if !self.method.uses_lambda() {
            let model = match self.method {
                Method::Baseline => linear(solve_baseline(ds, self.ridge.alpha_f)?.coef),
                Method::TwoStage => linear(solve_two_stage(ds, self.ridge.alpha_g, self.ridge.alpha_f)?.student.coef),
                Method::GenDistill => linear(solve_gen_distill(ds, &self.distill)?.coef),
                Method::LogisticBaseline => logit(logistic_baseline(ds, &self.logistic)?),
                Method::LogisticTwoStage => logit(logistic_two_stage(ds, &self.logistic)?.1),
                _ => unreachable!(),
            };
            return Ok(vec![model; grid.len()]);
        }
        match self.method {
            Method::Coupled => {
                let gram = CoupledGram::new(ds);
                grid.iter().map(|&l| Ok(linear(gram.solve(l, self.ridge)?.beta))).collect()
            }
            Method::CoupledLogistic => {
                grid.iter().map(|&l| Ok(logit(run_coupled_logistic(ds, l, &self.logistic)?.beta))).collect()
            }
            _ => unreachable!(),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lambda grid entries must be finite and >= 0"));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// `count` log-spaced points from `10^start` to `10^end`.
pub fn log_grid(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![10f64.powf(start)],
        _ => (0..count).map(|i| 10f64.powf(start + (end - start) * i as f64 / (count - 1) as f64)).collect(),
    }
}

/// How labeled rows are split into folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    Plain,
    Stratified,
    Grouped,
}

/// Fold index of every labeled row. The result depends only on
/// `(n, folds, seed)` and the stratification or group keys.
pub fn assign_folds(
    n: usize,
    folds: usize,
    seed: u64,
    scheme: FoldScheme,
    labels: Option<&DVector<f64>>,
    groups: Option<&[usize]>,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("at least two folds are required"));
    }
    if folds > n {
        return Err(Error::invalid(format!("{folds} folds requested for {n} labeled rows")));
    }
    let mut rng = stream_rng(seed, 41);
    let mut out = vec![0; n];
    match scheme {
        FoldScheme::Plain => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            for (pos, &i) in idx.iter().enumerate() {
                out[i] = pos % folds;
            }
        }
        FoldScheme::Stratified => {
            let labels = labels.ok_or_else(|| Error::invalid("stratified folds need labels"))?;
            let mut classes: Vec<f64> = labels.iter().copied().collect();
            classes.sort_by(f64::total_cmp);
            classes.dedup();
            let mut next = 0;
            for c in classes {
                let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                members.shuffle(&mut rng);
                for i in members {
                    out[i] = next % folds;
                    next += 1;
                }
            }
        }
        FoldScheme::Grouped => {
            let groups = groups.ok_or_else(|| Error::invalid("grouped folds need group keys"))?;
            if groups.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: groups.len() });
            }
            let mut keys: Vec<usize> = groups.to_vec();
            keys.sort_unstable();
            keys.dedup();
            if keys.len() < folds {
                return Err(Error::invalid(format!("{} groups cannot fill {folds} folds", keys.len())));
            }
            keys.shuffle(&mut rng);
            let size = |k: usize| groups.iter().filter(|&&g| g == k).count();
            // largest groups first, shuffled order among equals
            keys.sort_by_key(|&k| std::cmp::Reverse(size(k)));
            let mut load = vec![0usize; folds];
            for k in keys {
                let f = (0..folds).min_by_key(|&f| (load[f], f)).expect("folds >= 2");
                load[f] += size(k);
                for i in 0..n {
                    if groups[i] == k {
                        out[i] = f;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub scheme: FoldScheme,
    /// Defaults to the trainer's metric.
    pub metric: Option<MetricKind>,
}

impl CvOptions {
    /// Grouped when the dataset carries groups, stratified for binary
    /// labels, plain otherwise.
    pub fn auto(ds: &Dataset, folds: usize, seed: u64) -> Self {
        let scheme = if ds.labeled_groups().is_some() {
            FoldScheme::Grouped
        } else if ds.kind() == crate::dataset::LabelKind::Binary {
            FoldScheme::Stratified
        } else {
            FoldScheme::Plain
        };
        CvOptions { folds, seed, scheme, metric: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: Method,
    pub metric: MetricKind,
    pub seed: u64,
    /// Sorted ascending.
    pub lambdas: Vec<f64>,
    pub fold_of_row: Vec<usize>,
    /// `scores[i][k]`: metric for `lambdas[i]` on held-out fold `k`.
    pub scores: Vec<Vec<f64>>,
    pub fold_mean: Vec<f64>,
    pub lambda_hat: f64,
    pub best_index: usize,
    /// More than one λ attained the best fold-mean.
    pub tie: bool,
}

/// Index of the best fold-mean; values within `1e-12` relative of the best
/// (absolute floor `1e-20`) count as tied and the smallest λ among them
/// wins.
pub fn select_best(means: &[f64], higher_is_better: bool) -> (usize, bool) {
    let key = |v: f64| if higher_is_better { -v } else { v };
    let best = means.iter().copied().map(key).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.abs().max(1e-8);
    let tied: Vec<usize> = (0..means.len()).filter(|&i| key(means[i]) - best <= tol).collect();
    (tied[0], tied.len() > 1)
}

/// K-fold cross-validation of λ on the labeled rows. Every training fold
/// keeps the whole unlabeled pool; validation uses held-out labeled rows
/// only.
pub fn cv_select_lambda(ds: &Dataset, grid: &[f64], trainer: &Trainer, opts: &CvOptions) -> Result<CvReport> {
    let lambdas = check_grid(grid)?;
    let kind = opts.metric.unwrap_or_else(|| trainer.default_metric());
    if kind == MetricKind::EstErrVsMu {
        return Err(Error::invalid("est_err_vs_mu cannot be used for cross-validation"));
    }
    let fold_of_row = assign_folds(ds.n(), opts.folds, opts.seed, opts.scheme, Some(ds.y_labeled()), ds.labeled_groups())?;
    let mut scores = vec![vec![0.0; opts.folds]; lambdas.len()];
    #[allow(clippy::needless_range_loop)]
    for k in 0..opts.folds {
        let train_rows: Vec<usize> = (0..ds.n()).filter(|&i| fold_of_row[i] != k).collect();
        let held: Vec<usize> = (0..ds.n()).filter(|&i| fold_of_row[i] == k).collect();
        let train = ds.select_labeled(&train_rows)?;
        let valid = ds.select_labeled(&held)?;
        let models = trainer.fit_grid(&train, &lambdas)?;
        for (i, model) in models.iter().enumerate() {
            scores[i][k] = metric(kind, &model.predict(valid.x_labeled())?, valid.y_labeled())?;
        }
    }
    let fold_mean: Vec<f64> = scores.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    if fold_mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cross-validation produced a non-finite score"));
    }
    let (best_index, tie) = select_best(&fold_mean, kind.higher_is_better());
    Ok(CvReport {
        method: trainer.method,
        metric: kind,
        seed: opts.seed,
        lambda_hat: lambdas[best_index],
        lambdas,
        fold_of_row,
        scores,
        fold_mean,
        best_index,
        tie,
    })
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub lambda: f64,
    pub seed: u64,
    pub fold: String,
    pub metric: String,
    pub value: f64,
}

pub const RESULTS_HEADER: [&str; 6] = ["method", "lambda", "seed", "fold", "metric", "value"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn extend(&mut self, other: SweepResult) {
        self.rows.extend(other.rows);
    }

    /// Canonical order: method, seed, λ, fold, metric.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.method
                .cmp(&b.method)
                .then(a.seed.cmp(&b.seed))
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.fold.cmp(&b.fold))
                .then(a.metric.cmp(&b.metric))
        });
    }

    /// No NaN values and λ ascending within each (method, seed, fold,
    /// metric) series.
    pub fn validate(&self) -> Result<()> {
        if self.rows.iter().any(|r| r.value.is_nan() || r.lambda.is_nan()) {
            return Err(Error::invalid("results contain NaN"));
        }
        let mut last: std::collections::HashMap<(&str, u64, &str, &str), f64> = Default::default();
        for r in &self.rows {
            let key = (r.method.as_str(), r.seed, r.fold.as_str(), r.metric.as_str());
            if let Some(&prev) = last.get(&key) {
                if r.lambda < prev {
                    return Err(Error::invalid(format!("lambda not ascending for method {}", r.method)));
                }
            }
            last.insert(key, r.lambda);
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                format_lambda(r.lambda),
                r.seed.to_string(),
                r.fold.clone(),
                r.metric.clone(),
                r.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses and validates a results file, requiring the exact header.
    pub fn read_csv<R: Read>(input: R) -> Result<SweepResult> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != RESULTS_HEADER {
            return Err(Error::invalid(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::BadRow { row: i + 2, reason: format!("cannot parse {what}") };
            rows.push(SweepRow {
                method: rec[0].to_string(),
                lambda: rec[1].parse().map_err(|_| bad("lambda"))?,
                seed: rec[2].parse().map_err(|_| bad("seed"))?,
                fold: rec[3].to_string(),
                metric: rec[4].to_string(),
                value: rec[5].parse().map_err(|_| bad("value"))?,
            });
        }
        let out = SweepResult { rows };
        out.validate()?;
        Ok(out)
    }
}

fn format_lambda(l: f64) -> String {
    if l.is_infinite() {
        "inf".into()
    } else {
        l.to_string()
    }
}

impl CvReport {
    /// Per-fold rows, fold-mean rows (`fold = cv_mean`) and the selection
    /// (`metric = lambda_hat`, `fold = cv`).
    pub fn to_rows(&self) -> SweepResult {
        let mut rows = Vec::new();
        let method = self.method.name().to_string();
        for (i, &l) in self.lambdas.iter().enumerate() {
            for (k, &v) in self.scores[i].iter().enumerate() {
                rows.push(SweepRow {
                    method: method.clone(),
                    lambda: l,
                    seed: self.seed,
                    fold: k.to_string(),
                    metric: self.metric.name().into(),
                    value: v,
                });
            }
            rows.push(SweepRow {
                method: method.clone(),
                lambda: l,
                seed: self.seed,
                fold: "cv_mean".into(),
                metric: self.metric.name().into(),
                value: self.fold_mean[i],
            });
        }
        rows.push(SweepRow {
            method,
            lambda: self.lambda_hat,
            seed: self.seed,
            fold: "cv".into(),
            metric: "lambda_hat".into(),
            value: self.lambda_hat,
        });
        let mut out = SweepResult { rows };
        out.sort();
        out
    }
}

/// Held-out evaluation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// `μ` on the rows, when the data are synthetic.
    pub mu: Option<DVector<f64>>,
}

impl From<&TestSet> for EvalSet {
    fn from(t: &TestSet) -> Self {
        EvalSet { x: t.x.clone(), y: t.y.clone(), mu: t.mu.clone() }
    }
}

impl EvalSet {
    pub fn score(&self, kind: MetricKind, predictions: &DVector<f64>) -> Result<f64> {
        match kind {
            MetricKind::EstErrVsMu => {
                let mu = self.mu.as_ref().ok_or_else(|| Error::invalid("est_err_vs_mu needs a synthetic truth"))?;
                metric(kind, predictions, mu)
            }
            _ => metric(kind, predictions, &self.y),
        }
    }
}

/// Trains `trainer` at every λ of the grid and scores it on `test`; adds
/// the labeled-only reference (`λ = 0`) and the pseudo-labeling reference
/// (`λ = ∞`) of the same family.
pub fn lambda_sweep(
    train: &Dataset,
    test: &EvalSet,
    grid: &[f64],
    trainer: &Trainer,
    metrics: &[MetricKind],
    seed: u64,
) -> Result<SweepResult> {
    let lambdas = check_grid(grid)?;
    if metrics.is_empty() {
        return Err(Error::invalid("no metrics requested"));
    }
    let mut rows = Vec::new();
    let mut push = |method: Method, lambda: f64, model: &DeployModel| -> Result<()> {
        let pred = model.predict(&test.x)?;
        for &k in metrics {
            rows.push(SweepRow {
                method: method.name().into(),
                lambda,
                seed,
                fold: "test".into(),
                metric: k.name().into(),
                value: test.score(k, &pred)?,
            });
        }
        Ok(())
    };
    let (base, two) = trainer.method.references();
    push(base, 0.0, &trainer.for_method(base).fit(train, 0.0)?)?;
    push(two, f64::INFINITY, &trainer.for_method(two).fit(train, 0.0)?)?;
    if trainer.method != base && trainer.method != two {
        for (l, model) in lambdas.iter().zip(trainer.fit_grid(train, &lambdas)?) {
            push(trainer.method, *l, &model)?;
        }
    }
    let out = SweepResult { rows };
    out.validate()?;
    Ok(out)
}

/// `1 − m²ρ² / (N(m + nλ))`, which is at least `n/N`.
pub fn gamma_factor(n: usize, m: usize, lambda: f64, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid("rho must lie in [0, 1]"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be >= 0"));
    }
    if m == 0 {
        return Ok(1.0);
    }
    // single quotient so the corners (ρ=0, and λ=0 with ρ=1) come out exact
    let (n, m) = (n as f64, m as f64);
    let denom = (n + m) * (m + n * lambda);
    Ok((denom - m * m * rho * rho) / denom)
}

/// Mixing weight `nλ / (m + nλ)` of `η` in the population rich-view target.
pub fn eta_weight(n: usize, m: usize, lambda: f64) -> Result<f64> {
    let (n, m) = (n as f64, m as f64);
    let denom = m + n * lambda;
    if !(denom > 0.0) {
        return Err(Error::invalid("m + n·lambda must be positive"));
    }
    Ok(n * lambda / denom)
}

/// Population rich-view target `(m/(m+nλ)) μ + (nλ/(m+nλ)) η` on `(x, w)`.
pub fn g_star(truth: &Truth, x: &DMatrix<f64>, w: &DMatrix<f64>, n: usize, m: usize, lambda: f64) -> Result<DVector<f64>> {
    let t = eta_weight(n, m, lambda)?;
    Ok(truth.mu(x)? * (1.0 - t) + truth.eta(x, w)? * t)
}

/// Monte-Carlo estimate of the residual alignment
/// `|E[e_f e_g]| / (E[e_f²] E[e_g²])^{1/2}` with `e_f = f̂ − μ` and
/// `e_g = ĝ − g⋆`, on fresh draws from the generator. A zero denominator
/// gives 0.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
pub fn rho_star_mc(
    hat_f: &dyn Fn(&DMatrix<f64>) -> Result<DVector<f64>>,
    hat_g: &dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DVector<f64>>,
    truth: &Truth,
    lambda: f64,
    n: usize,
    m: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if mc_samples < 100 {
        return Err(Error::invalid("at least 100 Monte-Carlo samples are required"));
    }
    let draw = truth.sample(mc_samples, seed, Pool::Test);
    let ef = hat_f(&draw.x)? - truth.mu(&draw.x)?;
    let eg = hat_g(&draw.x, &draw.w)? - g_star(truth, &draw.x, &draw.w, n, m, lambda)?;
    let k = mc_samples as f64;
    let cross = ef.dot(&eg) / k;
    let denom = (ef.norm_squared() / k * (eg.norm_squared() / k)).sqrt();
    if !(denom > 0.0) {
        return Ok(0.0);
    }
    Ok((cross.abs() / denom).clamp(0.0, 1.0))
}
