//! Synthetic generators with analytic truth.
//!
//! Every generator is a pure function of its configuration, the sample
//! sizes and a seed. Parameters, labeled rows, unlabeled rows and test rows
//! come from distinct random streams, so changing one block size never
//! perturbs the others.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelKind};
use crate::linalg::{hstack, sigmoid, stream_rng};
use crate::{Error, Result};

const PARAM_STREAM: u64 = 0;
const LABELED_STREAM: u64 = 1;
const UNLABELED_STREAM: u64 = 2;
const TEST_STREAM: u64 = 3;

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Uniform draw from the unit sphere (zero vector when `len == 0`).
fn unit_sphere(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    if len == 0 {
        return DVector::zeros(0);
    }
    loop {
        let v = normal_vector(rng, len);
        let nrm = v.norm();
        if nrm > 1e-12 {
            return v / nrm;
        }
    }
}

/// Affine function `a + cᵀv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFn {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearFn {
    pub fn eval(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        if features.ncols() != self.coef.len() {
            return Err(Error::DimensionMismatch { expected: self.coef.len(), got: features.ncols() });
        }
        Ok(features * DVector::from_column_slice(&self.coef) + DVector::from_element(features.nrows(), self.intercept))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearGaussianConfig {
    pub dx: usize,
    pub dw: usize,
    /// Drawn from the unit sphere when absent.
    pub beta: Option<Vec<f64>>,
    /// `theta_norm` times a unit-sphere draw when absent.
    pub theta: Option<Vec<f64>>,
    pub theta_norm: f64,
    /// Correlation of `W_j` with `X_j` for `j < min(dX, dW)` in the default
    /// covariance.
    pub cross_corr: f64,
    pub sigma: f64,
    /// Joint covariance of `(X, W)`; overrides `cross_corr`.
    pub covariance: Option<DMatrix<f64>>,
}

impl Default for LinearGaussianConfig {
    fn default() -> Self {
        LinearGaussianConfig {
            dx: 5,
            dw: 5,
            beta: None,
            theta: None,
            theta_norm: 1.0,
            cross_corr: 0.5,
            sigma: 1.0,
            covariance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlledConfig {
    pub dx: usize,
    pub q: usize,
    pub d_noise: usize,
    pub rho_xw: f64,
    /// Strength of the privileged signal.
    pub alpha: f64,
    pub sigma: f64,
    /// `dX × q` mixing matrix; Gaussian with normalized columns when absent.
    pub a: Option<DMatrix<f64>>,
    pub beta: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
}

impl Default for ControlledConfig {
    fn default() -> Self {
        ControlledConfig { dx: 10, q: 3, d_noise: 0, rho_xw: 0.7, alpha: 1.0, sigma: 1.0, a: None, beta: None, theta: None }
    }
}

/// Binary diagnostic with correlated views.
///
/// A latent factor `S ~ N(s₀, I_dX)` is shared by both views:
/// `X = x_scale (c S + √(1−c²) E_x)` and `W = w_scale (c M S + √(1−c²) E_w)`
/// with `c` the correlation strength and `M` a `dW × dX` loading with unit
/// rows. The clean logit is `βᵀX + θᵀW`; labels are Bernoulli of the logit
/// plus Gaussian noise. Labeled and test rows have `s₀ = 0`; the unlabeled
/// pool is shifted by `unlabeled_mean` along `(1,…,1)/√dX`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogitDiagConfig {
    pub dx: usize,
    pub dw: usize,
    pub corr: f64,
    pub x_scale: f64,
    pub w_scale: f64,
    pub logit_noise: f64,
    pub unlabeled_mean: f64,
    pub beta_norm: f64,
    pub theta_norm: f64,
}

impl Default for LogitDiagConfig {
    fn default() -> Self {
        LogitDiagConfig {
            dx: 5,
            dw: 40,
            corr: 0.95,
            x_scale: 1.0,
            w_scale: 1.05,
            logit_noise: 0.70,
            unlabeled_mean: 1.0,
            beta_norm: 1.5,
            theta_norm: 0.75,
        }
    }
}

impl LogitDiagConfig {
    /// Sizes `(n, m, n_test)` of the reference diagnostic.
    pub const PRESET_SIZES: (usize, usize, usize) = (50, 3000, 6000);
}

/// Generator with all parameters drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GenModel {
    LinearGaussian {
        beta: Vec<f64>,
        theta: Vec<f64>,
        sigma: f64,
        covariance: DMatrix<f64>,
        dx: usize,
    },
    Controlled {
        beta: Vec<f64>,
        theta: Vec<f64>,
        a: DMatrix<f64>,
        rho_xw: f64,
        alpha: f64,
        sigma: f64,
        d_noise: usize,
    },
    LogitDiag {
        config: LogitDiagConfig,
        beta: Vec<f64>,
        theta: Vec<f64>,
        loading: DMatrix<f64>,
        interpretation: String,
    },
}

/// Rows drawn from a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub x: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Labeled,
    Unlabeled,
    Test,
}

impl Pool {
    fn stream(self) -> u64 {
        match self {
            Pool::Labeled => LABELED_STREAM,
            Pool::Unlabeled => UNLABELED_STREAM,
            Pool::Test => TEST_STREAM,
        }
    }
}

/// Analytic truth: `mu(x) = E[Y | X = x]` for regression generators and
/// `eta(z)`, the regression of `Y` on both views (the clean logit for the
/// binary generator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub mu: Option<LinearFn>,
    pub eta: LinearFn,
    pub model: GenModel,
}

impl Truth {
    pub fn mu(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.mu
            .as_ref()
            .ok_or_else(|| Error::invalid("this generator has no closed-form deployment regression"))?
            .eval(x)
    }

    pub fn eta(&self, x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.eta.eval(&hstack(x, w))
    }

    /// `count` fresh rows from `pool` using the given seed.
    pub fn sample(&self, count: usize, seed: u64, pool: Pool) -> Draw {
        let mut rng = stream_rng(seed, pool.stream());
        self.model.draw(&mut rng, count, pool)
    }
}

impl GenModel {
    fn draw(&self, rng: &mut ChaCha8Rng, count: usize, pool: Pool) -> Draw {
        match self {
            GenModel::LinearGaussian { beta, theta, sigma, covariance, dx } => {
                let l = covariance.clone().cholesky().expect("covariance validated").l();
                let z = normal_matrix(rng, count, covariance.nrows()) * l.transpose();
                let x = z.columns(0, *dx).into_owned();
                let w = z.columns(*dx, covariance.nrows() - dx).into_owned();
                let eps = normal_vector(rng, count) * *sigma;
                let y = &x * DVector::from_column_slice(beta) + &w * DVector::from_column_slice(theta) + eps;
                Draw { x, w, y }
            }
            GenModel::Controlled { beta, theta, a, rho_xw, alpha, sigma, d_noise } => {
                let x = normal_matrix(rng, count, a.nrows());
                let h = normal_matrix(rng, count, a.ncols());
                let v = normal_matrix(rng, count, *d_noise);
                let s = (1.0 - rho_xw * rho_xw).max(0.0).sqrt();
                let w_sig = &x * a * *rho_xw + &h * s;
                let eps = normal_vector(rng, count) * *sigma;
                let y = &x * DVector::from_column_slice(beta) + &h * DVector::from_column_slice(theta) * *alpha + eps;
                Draw { x, w: hstack(&w_sig, &v), y }
            }
            GenModel::LogitDiag { config: c, beta, theta, loading, .. } => {
                let mut s = normal_matrix(rng, count, c.dx);
                if pool == Pool::Unlabeled && c.dx > 0 {
                    let shift = c.unlabeled_mean / (c.dx as f64).sqrt();
                    s.add_scalar_mut(shift);
                }
                let mix = (1.0 - c.corr * c.corr).max(0.0).sqrt();
                let x = (&s * c.corr + normal_matrix(rng, count, c.dx) * mix) * c.x_scale;
                let w = (&s * loading.transpose() * c.corr + normal_matrix(rng, count, c.dw) * mix) * c.w_scale;
                let clean = &x * DVector::from_column_slice(beta) + &w * DVector::from_column_slice(theta);
                let y = DVector::from_fn(count, |i, _| {
                    let noise: f64 = StandardNormal.sample(rng);
                    let p = sigmoid(clean[i] + c.logit_noise * noise);
                    let u: f64 = rng.random();
                    if u < p {
                        1.0
                    } else {
                        0.0
                    }
                });
                Draw { x, w, y }
            }
        }
    }
}

/// Held-out rows with the truth evaluated on them.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub x: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub y: DVector<f64>,
    pub mu: Option<DVector<f64>>,
    pub eta: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// Training data; the unlabeled rows carry their labels as hidden labels.
    pub train: Dataset,
    pub test: TestSet,
    pub truth: Truth,
}

fn assemble(truth: Truth, n: usize, m: usize, n_test: usize, seed: u64, kind: LabelKind) -> Result<Generated> {
    if n == 0 {
        return Err(Error::NoLabeledRows);
    }
    let lab = truth.sample(n, seed, Pool::Labeled);
    let unl = truth.sample(m, seed, Pool::Unlabeled);
    let test = truth.sample(n_test, seed, Pool::Test);
    let train = Dataset::new(lab.x, lab.w, lab.y, unl.x, unl.w)?.with_kind(kind)?.with_hidden_labels(unl.y)?;
    let mu = match truth.mu {
        Some(ref f) => Some(f.eval(&test.x)?),
        None => None,
    };
    let eta = truth.eta(&test.x, &test.w)?;
    Ok(Generated { train, test: TestSet { x: test.x, w: test.w, y: test.y, mu, eta }, truth })
}

fn given_or(v: &Option<Vec<f64>>, len: usize, what: &str, draw: impl FnOnce() -> DVector<f64>) -> Result<DVector<f64>> {
    match v {
        Some(v) if v.len() != len => Err(Error::invalid(format!("{what} must have length {len}"))),
        Some(v) => Ok(DVector::from_column_slice(v)),
        None => Ok(draw()),
    }
}

/// `Y = βᵀX + θᵀW + ε` with jointly Gaussian `(X, W)`.
pub fn gen_linear_gaussian(cfg: &LinearGaussianConfig, n: usize, m: usize, n_test: usize, seed: u64) -> Result<Generated> {
    if cfg.dx == 0 {
        return Err(Error::invalid("dX must be at least 1"));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(Error::invalid("sigma must be nonnegative"));
    }
    let d = cfg.dx + cfg.dw;
    let cov = match &cfg.covariance {
        Some(c) => {
            if c.shape() != (d, d) {
                return Err(Error::DimensionMismatch { expected: d, got: c.nrows() });
            }
            if (c - c.transpose()).amax() > 1e-12 * c.amax().max(1.0) {
                return Err(Error::invalid("covariance must be symmetric"));
            }
            c.clone()
        }
        None => {
            let mut c = DMatrix::identity(d, d);
            for j in 0..cfg.dx.min(cfg.dw) {
                c[(j, cfg.dx + j)] = cfg.cross_corr;
                c[(cfg.dx + j, j)] = cfg.cross_corr;
            }
            c
        }
    };
    if cov.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let mut rng = stream_rng(seed, PARAM_STREAM);
    let beta = given_or(&cfg.beta, cfg.dx, "beta", || unit_sphere(&mut rng, cfg.dx))?;
    let theta = given_or(&cfg.theta, cfg.dw, "theta", || unit_sphere(&mut rng, cfg.dw) * cfg.theta_norm)?;

    // E[W | X] = Σ_wx Σ_xx⁻¹ X
    let sxx = cov.view((0, 0), (cfg.dx, cfg.dx)).into_owned();
    let sxw = cov.view((0, cfg.dx), (cfg.dx, cfg.dw)).into_owned();
    let proj = sxx.cholesky().ok_or(Error::NotPositiveDefinite)?.solve(&sxw);
    let mu_coef = &beta + proj * &theta;
    let eta_coef: Vec<f64> = beta.iter().chain(theta.iter()).copied().collect();
    let truth = Truth {
        mu: Some(LinearFn { intercept: 0.0, coef: mu_coef.iter().copied().collect() }),
        eta: LinearFn { intercept: 0.0, coef: eta_coef },
        model: GenModel::LinearGaussian {
            beta: beta.iter().copied().collect(),
            theta: theta.iter().copied().collect(),
            sigma: cfg.sigma,
            covariance: cov,
            dx: cfg.dx,
        },
    };
    assemble(truth, n, m, n_test, seed, LabelKind::Regression)
}

/// `W_sig = ρ X A + √(1−ρ²) H`, `W = (W_sig, V)`, `Y = Xᵀβ + α Hᵀθ + ε`.
pub fn gen_controlled(cfg: &ControlledConfig, n: usize, m: usize, n_test: usize, seed: u64) -> Result<Generated> {
    if cfg.dx == 0 {
        return Err(Error::invalid("dX must be at least 1"));
    }
    if !(0.0..=1.0).contains(&cfg.rho_xw) {
        return Err(Error::invalid("rho_xw must lie in [0, 1]"));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(Error::invalid("sigma must be nonnegative"));
    }
    let mut rng = stream_rng(seed, PARAM_STREAM);
    let a = match &cfg.a {
        Some(a) => {
            if a.shape() != (cfg.dx, cfg.q) {
                return Err(Error::invalid(format!("A must be {}x{}", cfg.dx, cfg.q)));
            }
            let mut a = a.clone();
            for mut c in a.column_iter_mut() {
                let nrm = c.norm();
                if nrm == 0.0 {
                    return Err(Error::invalid("A has a zero column"));
                }
                c /= nrm;
            }
            a
        }
        None => {
            let mut a = normal_matrix(&mut rng, cfg.dx, cfg.q);
            for mut c in a.column_iter_mut() {
                let nrm = c.norm();
                c /= nrm;
            }
            a
        }
    };
    let beta = given_or(&cfg.beta, cfg.dx, "beta", || unit_sphere(&mut rng, cfg.dx))?;
    let theta = given_or(&cfg.theta, cfg.q, "theta", || unit_sphere(&mut rng, cfg.q))?;

    // H = (W_sig − ρ Aᵀx) / s whenever s > 0
    let s = (1.0 - cfg.rho_xw * cfg.rho_xw).sqrt();
    let (eta_x, eta_w) = if s > 0.0 {
        let scale = cfg.alpha / s;
        (&beta - &a * &theta * (scale * cfg.rho_xw), &theta * scale)
    } else {
        (beta.clone(), DVector::zeros(cfg.q))
    };
    let eta_coef: Vec<f64> =
        eta_x.iter().chain(eta_w.iter()).copied().chain(std::iter::repeat_n(0.0, cfg.d_noise)).collect();
    let truth = Truth {
        mu: Some(LinearFn { intercept: 0.0, coef: beta.iter().copied().collect() }),
        eta: LinearFn { intercept: 0.0, coef: eta_coef },
        model: GenModel::Controlled {
            beta: beta.iter().copied().collect(),
            theta: theta.iter().copied().collect(),
            a,
            rho_xw: cfg.rho_xw,
            alpha: cfg.alpha,
            sigma: cfg.sigma,
            d_noise: cfg.d_noise,
        },
    };
    assemble(truth, n, m, n_test, seed, LabelKind::Regression)
}

/// Binary labels from a noisy logit over correlated views.
pub fn gen_logit_diag(cfg: &LogitDiagConfig, n: usize, m: usize, n_test: usize, seed: u64) -> Result<Generated> {
    if cfg.dx == 0 {
        return Err(Error::invalid("dX must be at least 1"));
    }
    if !(cfg.x_scale > 0.0 && cfg.w_scale > 0.0) {
        return Err(Error::invalid("view scales must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.corr) || !(cfg.logit_noise >= 0.0) {
        return Err(Error::invalid("corr must lie in [0, 1] and logit_noise must be nonnegative"));
    }
    let mut rng = stream_rng(seed, PARAM_STREAM);
    let mut loading = normal_matrix(&mut rng, cfg.dw, cfg.dx);
    for mut r in loading.row_iter_mut() {
        let nrm = r.norm();
        r /= nrm;
    }
    let beta = unit_sphere(&mut rng, cfg.dx) * cfg.beta_norm;
    let theta = unit_sphere(&mut rng, cfg.dw) * cfg.theta_norm;
    let truth = Truth {
        mu: None,
        eta: LinearFn { intercept: 0.0, coef: beta.iter().chain(theta.iter()).copied().collect() },
        model: GenModel::LogitDiag {
            config: cfg.clone(),
            beta: beta.iter().copied().collect(),
            theta: theta.iter().copied().collect(),
            loading,
            interpretation: "shared latent factor mixed into both views with weight corr; \
                             unlabeled_mean shifts the unlabeled pool's latent factor along the all-ones direction"
                .into(),
        },
    };
    assemble(truth, n, m, n_test, seed, LabelKind::Binary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controlled_defaults() {
        let c = ControlledConfig::default();
        assert_eq!((c.dx, c.q, c.rho_xw, c.sigma), (10, 3, 0.7, 1.0));
    }

    #[test]
    fn same_seed_same_data() {
        let a = gen_controlled(&ControlledConfig::default(), 20, 30, 10, 5).unwrap();
        let b = gen_controlled(&ControlledConfig::default(), 20, 30, 10, 5).unwrap();
        assert_eq!(a.train.x_labeled(), b.train.x_labeled());
        assert_eq!(a.train.w_unlabeled(), b.train.w_unlabeled());
        assert_eq!(a.test.y, b.test.y);
    }

    #[test]
    fn test_size_does_not_perturb_training() {
        let cfg = LogitDiagConfig::default();
        let a = gen_logit_diag(&cfg, 20, 30, 10, 5).unwrap();
        let b = gen_logit_diag(&cfg, 20, 30, 500, 5).unwrap();
        assert_eq!(a.train.x_labeled(), b.train.x_labeled());
        assert_eq!(a.train.y_labeled(), b.train.y_labeled());
        assert_eq!(a.train.x_unlabeled(), b.train.x_unlabeled());
    }

    #[test]
    fn non_pd_covariance_rejected() {
        let cfg = LinearGaussianConfig { dx: 1, dw: 1, cross_corr: 1.5, ..Default::default() };
        assert!(matches!(gen_linear_gaussian(&cfg, 5, 5, 5, 0), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn controlled_eta_reproduces_noiseless_labels() {
        let cfg = ControlledConfig { sigma: 0.0, d_noise: 2, alpha: 2.0, ..Default::default() };
        let g = gen_controlled(&cfg, 30, 0, 0, 3).unwrap();
        let eta = g.truth.eta(g.train.x_labeled(), g.train.w_labeled()).unwrap();
        assert!((eta - g.train.y_labeled()).amax() < 1e-10);
    }

    #[test]
    fn a_columns_are_unit() {
        let g = gen_controlled(&ControlledConfig::default(), 5, 0, 0, 1).unwrap();
        let GenModel::Controlled { a, .. } = &g.truth.model else { panic!() };
        for c in a.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }
}
