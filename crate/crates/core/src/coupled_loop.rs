//! Alternating block minimization of the coupled objective over pluggable
//! weighted-regression fitters, and its cross-entropy analogue for binary
//! labels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::linalg::{sigmoid, vconcat, vstack, with_intercept};
use crate::linear_coupled::fit_ridge;
use crate::{Error, Result};

/// A fitted regression function.
pub trait Predictor {
    fn predict(&self, features: &DMatrix<f64>) -> DVector<f64>;

    /// Regularization the fitter added to its weighted least-squares
    /// objective, so that the coupled objective can be tracked exactly.
    fn penalty(&self) -> f64 {
        0.0
    }
}

/// Weighted least-squares fitting capability. Features are passed without
/// an intercept column.
pub trait Fitter {
    type Model: Predictor;

    fn fit(&self, features: &DMatrix<f64>, targets: &DVector<f64>, weights: &DVector<f64>) -> Result<Self::Model>;
}

/// Exact ridge fitter with an unpenalized intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeFitter {
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgePredictor {
    pub coef: DVector<f64>,
    pub alpha: f64,
}

impl Predictor for RidgePredictor {
    fn predict(&self, features: &DMatrix<f64>) -> DVector<f64> {
        with_intercept(features) * &self.coef
    }

    fn penalty(&self) -> f64 {
        self.alpha * self.coef.iter().skip(1).map(|c| c * c).sum::<f64>()
    }
}

impl Fitter for RidgeFitter {
    type Model = RidgePredictor;

    fn fit(&self, features: &DMatrix<f64>, targets: &DVector<f64>, weights: &DVector<f64>) -> Result<RidgePredictor> {
        let fit = fit_ridge(&with_intercept(features), targets, weights, self.alpha)?;
        Ok(RidgePredictor { coef: fit.coef, alpha: self.alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoupledConfig {
    pub max_iters: usize,
    /// Consecutive stable iterations required before stopping.
    pub patience: usize,
    /// Relative change of the unlabeled disagreement regarded as stable.
    pub disagreement_tol: f64,
}

impl Default for CoupledConfig {
    fn default() -> Self {
        CoupledConfig { max_iters: 15, patience: 2, disagreement_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Stabilized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrace {
    /// Penalized objective (normalized by `N`) after each full iteration.
    pub objective: Vec<f64>,
    /// `(1/m) Σ_U (g − f)²` after each full iteration.
    pub disagreement: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub disagreement_tol: f64,
}

pub struct CoupledFit<F, G> {
    pub f: F,
    pub g: G,
    pub trace: CoupledTrace,
}

/// Mean squared gap between `g(Z)` and `f(X)` over the unlabeled pool.
pub fn disagreement(f: &impl Predictor, g: &impl Predictor, ds: &Dataset) -> Result<f64> {
    if ds.m() == 0 {
        return Err(Error::invalid("disagreement needs unlabeled rows"));
    }
    let fu = f.predict(ds.x_unlabeled());
    let gu = g.predict(&ds.z_unlabeled());
    Ok((gu - fu).norm_squared() / ds.m() as f64)
}

/// Runs the alternating square-loss coupled updates.
///
/// `g` starts from the zero function. Each iteration fits `f` on
/// `(Y_L, g(Z_U))` with unit weights, then `g` on `(Y_L, f(X_U))` with
/// weights `(λ, 1)`. With exact fitters every block step is a global block
/// minimizer, so the tracked objective never increases.
pub fn run_coupled_square<FF, FG>(
    ds: &Dataset,
    lambda: f64,
    fitter_f: &FF,
    fitter_g: &FG,
    cfg: &CoupledConfig,
) -> Result<CoupledFit<FF::Model, FG::Model>>
where
    FF: Fitter,
    FG: Fitter,
{
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if cfg.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if ds.m() == 0 && lambda == 0.0 {
        return Err(Error::invalid("with no unlabeled rows and lambda = 0 the rich-view model is unconstrained"));
    }
    let (n, m) = (ds.n(), ds.m());
    let big_n = ds.total() as f64;
    let x_all = ds.x_all();
    let z_all = ds.z_all();
    let z_u = ds.z_unlabeled();
    let y = ds.y_labeled();
    let unit = DVector::from_element(n + m, 1.0);
    let g_weights = vconcat(&DVector::from_element(n, lambda), &DVector::from_element(m, 1.0));

    let mut g_unlabeled = DVector::zeros(m);
    let mut objective = Vec::new();
    let mut disagreements: Vec<f64> = Vec::new();
    let mut stable = 0;
    let mut stop = StopReason::MaxIters;
    let mut last: Option<(FF::Model, FG::Model)> = None;

    for _ in 0..cfg.max_iters {
        let f_targets = vconcat(y, &g_unlabeled);
        let f = fitter_f.fit(&x_all, &f_targets, &unit)?;
        let f_vals = f.predict(&x_all);
        let g_targets = vconcat(y, &f_vals.rows(n, m).into_owned());
        let g = fitter_g.fit(&z_all, &g_targets, &g_weights)?;
        let g_vals = g.predict(&z_all);

        let fit_f = (y - f_vals.rows(0, n)).norm_squared();
        let fit_g = (y - g_vals.rows(0, n)).norm_squared();
        let agree = (g_vals.rows(n, m) - f_vals.rows(n, m)).norm_squared();
        objective.push((fit_f + agree + lambda * fit_g + f.penalty() + g.penalty()) / big_n);
        let dis = if m > 0 { agree / m as f64 } else { 0.0 };
        if let Some(&prev) = disagreements.last() {
            let rel = (dis - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if rel < cfg.disagreement_tol || (dis == 0.0 && prev == 0.0) {
                stable += 1;
            } else {
                stable = 0;
            }
        }
        disagreements.push(dis);
        g_unlabeled = g.predict(&z_u);
        last = Some((f, g));
        if stable >= cfg.patience.max(1) {
            stop = StopReason::Stabilized;
            break;
        }
    }
    let (f, g) = last.expect("max_iters >= 1");
    Ok(CoupledFit {
        f,
        g,
        trace: CoupledTrace {
            iterations: objective.len(),
            objective,
            disagreement: disagreements,
            stop,
            disagreement_tol: cfg.disagreement_tol,
        },
    })
}

/// Settings for the cross-entropy coupled variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub outer: usize,
    pub inner: usize,
    pub step: f64,
    pub alpha_f: f64,
    pub alpha_g: f64,
    pub baseline_steps: usize,
    pub baseline_step: f64,
    pub teacher_steps: usize,
    pub teacher_step: f64,
    #[serde(default)]
    pub normalization: BlockNormalization,
}

/// What each block objective is divided by before gradient steps are taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockNormalization {
    /// Number of rows the block sums over (`N` for both blocks).
    #[default]
    RowCount,
    /// Total row weight (`N` for the f-block, `m + λn` for the g-block).
    TotalWeight,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            outer: 5,
            inner: 150,
            step: 0.02,
            alpha_f: 1e-4,
            alpha_g: 1e-1,
            baseline_steps: 500,
            baseline_step: 0.05,
            teacher_steps: 700,
            teacher_step: 0.03,
            normalization: BlockNormalization::RowCount,
        }
    }
}

/// `CE(a, p) = −a log p − (1 − a) log(1 − p)` with `p` clamped away from
/// 0 and 1.
pub fn cross_entropy(a: f64, p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -a * p.ln() - (1.0 - a) * (1.0 - p).ln()
}

/// Weighted soft-label logistic objective over an intercept-augmented
/// design, scaled by `s`: `s [Σ wᵢ CE(aᵢ, σ(x̄ᵢᵀc)) + (α/2)‖c₋₀‖²]`.
#[derive(Debug, Clone)]
struct SoftLogistic<'a> {
    design: &'a DMatrix<f64>,
    soft: &'a DVector<f64>,
    weights: &'a DVector<f64>,
    alpha: f64,
    scale: f64,
}

impl<'a> SoftLogistic<'a> {
    fn new(design: &'a DMatrix<f64>, soft: &'a DVector<f64>, weights: &'a DVector<f64>, alpha: f64, scale: f64) -> Self {
        SoftLogistic { design, soft, weights, alpha, scale }
    }

    /// Mean over unit-weight rows.
    fn mean(design: &'a DMatrix<f64>, soft: &'a DVector<f64>, weights: &'a DVector<f64>, alpha: f64) -> Self {
        Self::new(design, soft, weights, alpha, 1.0 / design.nrows().max(1) as f64)
    }

    fn value(&self, c: &DVector<f64>) -> f64 {
        let logits = self.design * c;
        let data: f64 = (0..logits.len())
            .map(|i| self.weights[i] * cross_entropy(self.soft[i], sigmoid(logits[i])))
            .sum();
        let pen: f64 = c.iter().skip(1).map(|v| v * v).sum();
        self.scale * (data + 0.5 * self.alpha * pen)
    }

    fn gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        let logits = self.design * c;
        let resid = DVector::from_fn(logits.len(), |i, _| self.weights[i] * (sigmoid(logits[i]) - self.soft[i]));
        let mut grad = self.design.tr_mul(&resid);
        for j in 1..grad.len() {
            grad[j] += self.alpha * c[j];
        }
        grad * self.scale
    }

    fn descend(&self, mut c: DVector<f64>, steps: usize, step: f64) -> DVector<f64> {
        for _ in 0..steps {
            let g = self.gradient(&c);
            c -= g * step;
        }
        c
    }
}

fn require_binary(ds: &Dataset) -> Result<()> {
    if !ds.labels_are_binary() {
        return Err(Error::NonBinaryLabels);
    }
    Ok(())
}

/// The two block objectives of the cross-entropy coupled variant with their
/// gradients, for fixed data and λ.
pub struct LogisticBlocks {
    xl: DMatrix<f64>,
    xu: DMatrix<f64>,
    zl: DMatrix<f64>,
    zu: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
    cfg: LogisticConfig,
}

impl LogisticBlocks {
    pub fn new(ds: &Dataset, lambda: f64, cfg: &LogisticConfig) -> Result<Self> {
        require_binary(ds)?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(LogisticBlocks {
            xl: with_intercept(ds.x_labeled()),
            xu: with_intercept(ds.x_unlabeled()),
            zl: with_intercept(&ds.z_labeled()),
            zu: with_intercept(&ds.z_unlabeled()),
            y: ds.y_labeled().clone(),
            lambda,
            cfg: *cfg,
        })
    }

    fn f_parts(&self, gamma: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let pg = (&self.zu * gamma).map(sigmoid);
        let design = vstack(&self.xl, &self.xu);
        let soft = vconcat(&self.y, &pg);
        let weights = DVector::from_element(design.nrows(), 1.0);
        (design, soft, weights)
    }

    fn g_parts(&self, beta: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let pf = (&self.xu * beta).map(sigmoid);
        let design = vstack(&self.zu, &self.zl);
        let soft = vconcat(&pf, &self.y);
        let weights = vconcat(
            &DVector::from_element(self.xu.nrows(), 1.0),
            &DVector::from_element(self.y.len(), self.lambda),
        );
        (design, soft, weights)
    }

    fn f_scale(&self) -> f64 {
        1.0 / (self.xl.nrows() + self.xu.nrows()) as f64
    }

    fn g_scale(&self) -> f64 {
        let (n, m) = (self.zl.nrows() as f64, self.zu.nrows() as f64);
        let total = match self.cfg.normalization {
            BlockNormalization::RowCount => n + m,
            BlockNormalization::TotalWeight => m + self.lambda * n,
        };
        if total > 0.0 {
            1.0 / total
        } else {
            1.0
        }
    }

    /// `Σ_L CE(Y, p_f) + Σ_U CE(p_g, p_f) + (α_f/2)‖β₋₀‖²`, divided by `N`.
    pub fn f_objective(&self, beta: &DVector<f64>, gamma: &DVector<f64>) -> f64 {
        let (d, s, w) = self.f_parts(gamma);
        SoftLogistic::new(&d, &s, &w, self.cfg.alpha_f, self.f_scale()).value(beta)
    }

    pub fn f_gradient(&self, beta: &DVector<f64>, gamma: &DVector<f64>) -> DVector<f64> {
        let (d, s, w) = self.f_parts(gamma);
        SoftLogistic::new(&d, &s, &w, self.cfg.alpha_f, self.f_scale()).gradient(beta)
    }

    /// `Σ_U CE(p_f, p_g) + λ Σ_L CE(Y, p_g) + (α_g/2)‖γ₋₀‖²`, divided by
    /// `N` or by `m + λn` depending on [`BlockNormalization`].
    pub fn g_objective(&self, gamma: &DVector<f64>, beta: &DVector<f64>) -> f64 {
        let (d, s, w) = self.g_parts(beta);
        SoftLogistic::new(&d, &s, &w, self.cfg.alpha_g, self.g_scale()).value(gamma)
    }

    pub fn g_gradient(&self, gamma: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
        let (d, s, w) = self.g_parts(beta);
        SoftLogistic::new(&d, &s, &w, self.cfg.alpha_g, self.g_scale()).gradient(gamma)
    }

    fn f_step(&self, beta: DVector<f64>, gamma: &DVector<f64>) -> DVector<f64> {
        let (d, s, w) = self.f_parts(gamma);
        SoftLogistic::new(&d, &s, &w, self.cfg.alpha_f, self.f_scale()).descend(beta, self.cfg.inner, self.cfg.step)
    }

    fn g_step(&self, gamma: DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
        let (d, s, w) = self.g_parts(beta);
        SoftLogistic::new(&d, &s, &w, self.cfg.alpha_g, self.g_scale()).descend(gamma, self.cfg.inner, self.cfg.step)
    }
}

/// Block objectives recorded after each outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticTrace {
    pub f_objective: Vec<f64>,
    pub g_objective: Vec<f64>,
    pub disagreement: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticCoupledFit {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub trace: LogisticTrace,
}

/// Labeled-only logistic regression on `X̄` by gradient descent.
pub fn logistic_baseline(ds: &Dataset, cfg: &LogisticConfig) -> Result<DVector<f64>> {
    require_binary(ds)?;
    let xl = with_intercept(ds.x_labeled());
    let w = DVector::from_element(ds.n(), 1.0);
    let obj = SoftLogistic::mean(&xl, ds.y_labeled(), &w, cfg.alpha_f);
    Ok(obj.descend(DVector::zeros(xl.ncols()), cfg.baseline_steps, cfg.baseline_step))
}

/// Logistic teacher on `Z̄`, soft pseudo-labels on the unlabeled pool, and
/// an `X̄` student trained on labeled and pseudo-labeled rows. Returns
/// `(teacher, student)`.
pub fn logistic_two_stage(ds: &Dataset, cfg: &LogisticConfig) -> Result<(DVector<f64>, DVector<f64>)> {
    require_binary(ds)?;
    let zl = with_intercept(&ds.z_labeled());
    let wl = DVector::from_element(ds.n(), 1.0);
    let teacher = SoftLogistic::mean(&zl, ds.y_labeled(), &wl, cfg.alpha_g).descend(
        DVector::zeros(zl.ncols()),
        cfg.teacher_steps,
        cfg.teacher_step,
    );
    let pseudo = (with_intercept(&ds.z_unlabeled()) * &teacher).map(sigmoid);
    let design = with_intercept(&ds.x_all());
    let soft = vconcat(ds.y_labeled(), &pseudo);
    let w = DVector::from_element(ds.total(), 1.0);
    let student = SoftLogistic::mean(&design, &soft, &w, cfg.alpha_f).descend(
        DVector::zeros(design.ncols()),
        cfg.teacher_steps,
        cfg.teacher_step,
    );
    Ok((teacher, student))
}

/// Cross-entropy coupled training: `β` starts from the labeled logistic
/// baseline and `γ` from zero; each outer iteration runs `inner` gradient
/// steps on the f-block objective, then on the g-block objective.
pub fn run_coupled_logistic(ds: &Dataset, lambda: f64, cfg: &LogisticConfig) -> Result<LogisticCoupledFit> {
    let blocks = LogisticBlocks::new(ds, lambda, cfg)?;
    let mut beta = logistic_baseline(ds, cfg)?;
    let mut gamma = DVector::zeros(ds.dx() + ds.dw() + 1);
    let mut trace = LogisticTrace { f_objective: Vec::new(), g_objective: Vec::new(), disagreement: Vec::new(), iterations: 0 };
    for _ in 0..cfg.outer {
        beta = blocks.f_step(beta, &gamma);
        gamma = blocks.g_step(gamma, &beta);
        trace.f_objective.push(blocks.f_objective(&beta, &gamma));
        trace.g_objective.push(blocks.g_objective(&gamma, &beta));
        let dis = if ds.m() > 0 {
            let pf = (&blocks.xu * &beta).map(sigmoid);
            let pg = (&blocks.zu * &gamma).map(sigmoid);
            (pg - pf).norm_squared() / ds.m() as f64
        } else {
            0.0
        };
        trace.disagreement.push(dis);
        trace.iterations += 1;
    }
    Ok(LogisticCoupledFit { beta, gamma, trace })
}
