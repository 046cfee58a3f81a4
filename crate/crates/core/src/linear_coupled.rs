//! Exact solvers for the linear instantiation of the coupled objective and
//! the linear baselines.
//!
//! With `X̄ = [1, X]`, `Z̄ = [1, X, W]` the coupled model minimizes
//!
//! ```text
//! Σ_L (Y − X̄β)² + Σ_U (X̄β − Z̄γ)² + λ Σ_L (Y − Z̄γ)² + α_f‖β₋₀‖² + α_g‖γ₋₀‖²
//! ```
//!
//! whose stationarity conditions form the symmetric block system
//!
//! ```text
//! [ X̄_LᵀX̄_L + X̄_UᵀX̄_U + α_f P    −X̄_UᵀZ̄_U                      ] [β]   [ X̄_LᵀY  ]
//! [ −Z̄_UᵀX̄_U                     Z̄_UᵀZ̄_U + λZ̄_LᵀZ̄_L + α_g P     ] [γ] = [ λZ̄_LᵀY ]
//! ```
//!
//! with `P = diag(0, 1, …, 1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::linalg::{hstack, intercept_penalty, solve_psd, vconcat, vstack, weighted_ridge, with_intercept};
use crate::{Error, Result};

/// Ridge strengths for the two blocks; intercepts are never penalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeConfig {
    pub alpha_f: f64,
    pub alpha_g: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { alpha_f: 1e-8, alpha_g: 1e-8 }
    }
}

impl RidgeConfig {
    pub fn new(alpha_f: f64, alpha_g: f64) -> Result<Self> {
        if !(alpha_f >= 0.0 && alpha_g >= 0.0) {
            return Err(Error::invalid("ridge strengths must be nonnegative"));
        }
        Ok(RidgeConfig { alpha_f, alpha_g })
    }
}

/// Which columns a linear model reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureView {
    X,
    W,
    XW,
}

impl FeatureView {
    pub fn design(self, x: &DMatrix<f64>, w: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
        let raw = match (self, w) {
            (FeatureView::X, _) => x.clone(),
            (FeatureView::W, Some(w)) => w.clone(),
            (FeatureView::XW, Some(w)) => {
                if w.nrows() != x.nrows() {
                    return Err(Error::DimensionMismatch { expected: x.nrows(), got: w.nrows() });
                }
                hstack(x, w)
            }
            (_, None) => return Err(Error::invalid("privileged features required for this view")),
        };
        Ok(with_intercept(&raw))
    }

    fn width(self, dx: usize, dw: usize) -> usize {
        1 + match self {
            FeatureView::X => dx,
            FeatureView::W => dw,
            FeatureView::XW => dx + dw,
        }
    }
}

/// An affine predictor, intercept first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: DVector<f64>,
    pub view: FeatureView,
    #[serde(default)]
    pub degenerate: bool,
}

impl LinearModel {
    pub fn zeros(view: FeatureView, width: usize) -> Self {
        LinearModel { coef: DVector::zeros(width), view, degenerate: false }
    }

    pub fn predict(&self, x: &DMatrix<f64>, w: Option<&DMatrix<f64>>) -> Result<DVector<f64>> {
        let design = self.view.design(x, w)?;
        if design.ncols() != self.coef.len() {
            return Err(Error::DimensionMismatch { expected: self.coef.len() - 1, got: design.ncols() - 1 });
        }
        Ok(design * &self.coef)
    }
}

/// Coefficients and flag from [`fit_ridge`].
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub coef: DVector<f64>,
    pub degenerate: bool,
}

/// Weighted ridge with an unpenalized leading intercept column:
/// minimizes `Σ wᵢ(tᵢ − x̄ᵢᵀc)² + α‖c₋₀‖²`. Singular systems yield the
/// minimum-norm minimizer.
pub fn fit_ridge(
    features: &DMatrix<f64>,
    targets: &DVector<f64>,
    weights: &DVector<f64>,
    alpha: f64,
) -> Result<RidgeFit> {
    if features.nrows() == 0 {
        return Err(Error::invalid("fit_ridge needs at least one row"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha must be nonnegative"));
    }
    let sol = weighted_ridge(features, targets, weights, &intercept_penalty(features.ncols(), alpha))?;
    Ok(RidgeFit { coef: sol.x, degenerate: sol.degenerate })
}

/// Deployment coefficients `β` over `X̄` and rich-view coefficients `γ`
/// over `Z̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCoupledModel {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    #[serde(default)]
    pub degenerate: bool,
}

impl LinearCoupledModel {
    pub fn deployment(&self) -> LinearModel {
        LinearModel { coef: self.beta.clone(), view: FeatureView::X, degenerate: self.degenerate }
    }
    pub fn rich_view(&self) -> LinearModel {
        LinearModel { coef: self.gamma.clone(), view: FeatureView::XW, degenerate: self.degenerate }
    }
    pub fn predict_f(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.deployment().predict(x, None)
    }
    pub fn predict_g(&self, x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.rich_view().predict(x, Some(w))
    }
}

/// Sufficient statistics of the coupled least-squares problem. Building it
/// once lets a λ grid be solved without touching the data again.
#[derive(Debug, Clone)]
pub struct CoupledGram {
    px: usize,
    pz: usize,
    xl_xl: DMatrix<f64>,
    zl_zl: DMatrix<f64>,
    xl_y: DVector<f64>,
    zl_y: DVector<f64>,
    xu_xu: DMatrix<f64>,
    xu_zu: DMatrix<f64>,
    zu_zu: DMatrix<f64>,
}

impl CoupledGram {
    pub fn new(ds: &Dataset) -> Self {
        let xl = with_intercept(ds.x_labeled());
        let zl = with_intercept(&ds.z_labeled());
        let xu = with_intercept(ds.x_unlabeled());
        let zu = with_intercept(&ds.z_unlabeled());
        let y = ds.y_labeled();
        CoupledGram {
            px: xl.ncols(),
            pz: zl.ncols(),
            xl_xl: xl.tr_mul(&xl),
            zl_zl: zl.tr_mul(&zl),
            xl_y: xl.tr_mul(y),
            zl_y: zl.tr_mul(y),
            xu_xu: xu.tr_mul(&xu),
            xu_zu: xu.tr_mul(&zu),
            zu_zu: zu.tr_mul(&zu),
        }
    }

    pub fn solve(&self, lambda: f64, ridge: RidgeConfig) -> Result<LinearCoupledModel> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(ridge.alpha_f >= 0.0 && ridge.alpha_g >= 0.0) {
            return Err(Error::invalid("ridge strengths must be nonnegative"));
        }
        let (px, pz) = (self.px, self.pz);
        let mut a = DMatrix::zeros(px + pz, px + pz);
        let mut ff = &self.xl_xl + &self.xu_xu;
        let mut gg = &self.zu_zu + &self.zl_zl * lambda;
        for j in 1..px {
            ff[(j, j)] += ridge.alpha_f;
        }
        for j in 1..pz {
            gg[(j, j)] += ridge.alpha_g;
        }
        a.view_mut((0, 0), (px, px)).copy_from(&ff);
        a.view_mut((px, px), (pz, pz)).copy_from(&gg);
        a.view_mut((0, px), (px, pz)).copy_from(&(-&self.xu_zu));
        a.view_mut((px, 0), (pz, px)).copy_from(&(-self.xu_zu.transpose()));
        let rhs = vconcat(&self.xl_y, &(&self.zl_y * lambda));
        let sol = solve_psd(&a, &rhs);
        Ok(LinearCoupledModel {
            beta: sol.x.rows(0, px).into_owned(),
            gamma: sol.x.rows(px, pz).into_owned(),
            degenerate: sol.degenerate,
        })
    }
}

/// Global minimizer of the linear coupled objective.
pub fn solve_coupled_linear(ds: &Dataset, lambda: f64, ridge: RidgeConfig) -> Result<LinearCoupledModel> {
    CoupledGram::new(ds).solve(lambda, ridge)
}

/// Value of the (unnormalized) penalized linear coupled objective.
pub fn coupled_objective(ds: &Dataset, beta: &DVector<f64>, gamma: &DVector<f64>, lambda: f64, ridge: RidgeConfig) -> f64 {
    let fl = with_intercept(ds.x_labeled()) * beta;
    let gl = with_intercept(&ds.z_labeled()) * gamma;
    let fu = with_intercept(ds.x_unlabeled()) * beta;
    let gu = with_intercept(&ds.z_unlabeled()) * gamma;
    let y = ds.y_labeled();
    let pen = |c: &DVector<f64>| c.iter().skip(1).map(|v| v * v).sum::<f64>();
    (y - fl).norm_squared()
        + (gu - fu).norm_squared()
        + lambda * (y - gl).norm_squared()
        + ridge.alpha_f * pen(beta)
        + ridge.alpha_g * pen(gamma)
}

/// Labeled-only ridge on `X̄`.
pub fn solve_baseline(ds: &Dataset, alpha_f: f64) -> Result<LinearModel> {
    let xl = with_intercept(ds.x_labeled());
    let fit = fit_ridge(&xl, ds.y_labeled(), &DVector::from_element(ds.n(), 1.0), alpha_f)?;
    Ok(LinearModel { coef: fit.coef, view: FeatureView::X, degenerate: fit.degenerate })
}

fn fit_teacher(ds: &Dataset, view: FeatureView, alpha: f64) -> Result<LinearModel> {
    let design = view.design(ds.x_labeled(), Some(ds.w_labeled()))?;
    let fit = fit_ridge(&design, ds.y_labeled(), &DVector::from_element(ds.n(), 1.0), alpha)?;
    Ok(LinearModel { coef: fit.coef, view, degenerate: fit.degenerate })
}

/// Teacher, student and the pseudo-responses the student was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageModel {
    pub teacher: LinearModel,
    pub student: LinearModel,
    pub pseudo_labels: DVector<f64>,
}

/// Teacher ridge on `Z̄`, pseudo-labels on the unlabeled pool, student ridge
/// on `X̄` over labeled and pseudo-labeled rows with unit weights.
pub fn solve_two_stage(ds: &Dataset, alpha_teacher: f64, alpha_student: f64) -> Result<TwoStageModel> {
    let teacher = fit_teacher(ds, FeatureView::XW, alpha_teacher)?;
    let pseudo = teacher.predict(ds.x_unlabeled(), Some(ds.w_unlabeled()))?;
    let design = with_intercept(&ds.x_all());
    let targets = vconcat(ds.y_labeled(), &pseudo);
    let fit = fit_ridge(&design, &targets, &DVector::from_element(ds.total(), 1.0), alpha_student)?;
    Ok(TwoStageModel {
        teacher,
        student: LinearModel { coef: fit.coef, view: FeatureView::X, degenerate: fit.degenerate },
        pseudo_labels: pseudo,
    })
}

/// Squared-loss generalized distillation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub teacher_view: FeatureView,
    pub alpha_teacher: f64,
    pub alpha_student: f64,
    /// Weight of the soft-target term on labeled rows.
    pub a_labeled: f64,
    /// Weight of the soft-target term on unlabeled rows.
    pub a_unlabeled: f64,
}

/// Student minimizing
/// `Σ_L (Y − X̄β)² + a_L Σ_L (q − X̄β)² + a_U Σ_U (q − X̄β)² + α_S‖β₋₀‖²`
/// with soft targets `q` from a ridge teacher.
pub fn solve_gen_distill(ds: &Dataset, cfg: &DistillConfig) -> Result<LinearModel> {
    if cfg.teacher_view == FeatureView::X {
        return Err(Error::invalid("distillation teacher must see privileged features"));
    }
    if !(cfg.a_labeled >= 0.0 && cfg.a_unlabeled >= 0.0) {
        return Err(Error::invalid("distillation weights must be nonnegative"));
    }
    let teacher = fit_teacher(ds, cfg.teacher_view, cfg.alpha_teacher)?;
    let xl = with_intercept(ds.x_labeled());
    let xu = with_intercept(ds.x_unlabeled());
    let mut design = xl.clone();
    let mut targets = ds.y_labeled().clone();
    let mut weights = DVector::from_element(ds.n(), 1.0);
    // zero-weight blocks are left out so the special cases reduce exactly
    if cfg.a_labeled > 0.0 {
        let q = teacher.predict(ds.x_labeled(), Some(ds.w_labeled()))?;
        design = vstack(&design, &xl);
        targets = vconcat(&targets, &q);
        weights = vconcat(&weights, &DVector::from_element(ds.n(), cfg.a_labeled));
    }
    if cfg.a_unlabeled > 0.0 && ds.m() > 0 {
        let q = teacher.predict(ds.x_unlabeled(), Some(ds.w_unlabeled()))?;
        design = vstack(&design, &xu);
        targets = vconcat(&targets, &q);
        weights = vconcat(&weights, &DVector::from_element(ds.m(), cfg.a_unlabeled));
    }
    let fit = fit_ridge(&design, &targets, &weights, cfg.alpha_student)?;
    Ok(LinearModel { coef: fit.coef, view: FeatureView::X, degenerate: fit.degenerate })
}

/// Coefficient count of a model over the given view of `ds`.
pub fn view_width(ds: &Dataset, view: FeatureView) -> usize {
    view.width(ds.dx(), ds.dw())
}
