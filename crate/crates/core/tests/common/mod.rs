#![allow(dead_code)]

use coupled_core::dataset::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    coupled_core::linalg::stream_rng(seed, 999)
}

pub fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Linear-plus-noise data with correlated views.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, dx: usize, dw: usize) -> Dataset {
    let total = n + m;
    let x = normal(rng, total, dx);
    let mix = normal(rng, dx, dw) * 0.5;
    let w = &x * mix + normal(rng, total, dw);
    let b = normal_vec(rng, dx);
    let t = normal_vec(rng, dw);
    let y = &x * b + &w * t + normal_vec(rng, total) * 0.5 + DVector::from_element(total, rng.random_range(-1.0..1.0));
    Dataset::new(
        x.rows(0, n).into_owned(),
        w.rows(0, n).into_owned(),
        y.rows(0, n).into_owned(),
        x.rows(n, m).into_owned(),
        w.rows(n, m).into_owned(),
    )
    .unwrap()
}

/// Unnormalized coupled objective with ridge penalties, computed from
/// residuals.
#[allow(clippy::too_many_arguments)]
pub fn direct_objective(ds: &Dataset, beta: &DVector<f64>, gamma: &DVector<f64>, lambda: f64, af: f64, ag: f64) -> f64 {
    use coupled_core::linalg::with_intercept;
    let xl = with_intercept(ds.x_labeled());
    let xu = with_intercept(ds.x_unlabeled());
    let zl = with_intercept(&ds.z_labeled());
    let zu = with_intercept(&ds.z_unlabeled());
    let y = ds.y_labeled();
    let pen = |c: &DVector<f64>| c.iter().skip(1).map(|v| v * v).sum::<f64>();
    (&xl * beta - y).norm_squared()
        + (&zu * gamma - &xu * beta).norm_squared()
        + lambda * (&zl * gamma - y).norm_squared()
        + af * pen(beta)
        + ag * pen(gamma)
}

/// Minimizes the coupled objective by restarted Nesterov gradient descent
/// using only residual-based gradients.
pub fn gd_oracle(ds: &Dataset, lambda: f64, af: f64, ag: f64, max_iter: usize) -> (DVector<f64>, DVector<f64>) {
    use coupled_core::linalg::with_intercept;
    let xl = with_intercept(ds.x_labeled());
    let xu = with_intercept(ds.x_unlabeled());
    let zl = with_intercept(&ds.z_labeled());
    let zu = with_intercept(&ds.z_unlabeled());
    let y = ds.y_labeled().clone();
    let (p, q) = (xl.ncols(), zl.ncols());
    let split = |v: &DVector<f64>| (v.rows(0, p).into_owned(), v.rows(p, q).into_owned());
    let grad = |v: &DVector<f64>, y: &DVector<f64>| {
        let (b, g) = split(v);
        let rl = &xl * &b - y;
        let ru = &zu * &g - &xu * &b;
        let rg = &zl * &g - y;
        let mut gb = (xl.tr_mul(&rl) - xu.tr_mul(&ru)) * 2.0;
        let mut gg = (zu.tr_mul(&ru) + zl.tr_mul(&rg) * lambda) * 2.0;
        for j in 1..p {
            gb[j] += 2.0 * af * b[j];
        }
        for j in 1..q {
            gg[j] += 2.0 * ag * g[j];
        }
        let mut out = DVector::zeros(p + q);
        out.rows_mut(0, p).copy_from(&gb);
        out.rows_mut(p, q).copy_from(&gg);
        out
    };
    // Lipschitz constant of the gradient by power iteration on the linear part
    let zero_y = DVector::zeros(y.len());
    let mut v = DVector::from_element(p + q, 1.0).normalize();
    let mut lip = 1.0;
    for _ in 0..300 {
        let hv = grad(&v, &zero_y);
        lip = hv.norm();
        v = hv / lip;
    }
    let step = 1.0 / (lip * 1.05);
    let obj = |v: &DVector<f64>| {
        let (b, g) = split(v);
        direct_objective(ds, &b, &g, lambda, af, ag)
    };
    let mut x = DVector::zeros(p + q);
    let mut x_prev = x.clone();
    let mut t: f64 = 1.0;
    let mut fx = obj(&x);
    for _ in 0..max_iter {
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let yk = &x + (&x - &x_prev) * ((t - 1.0) / t_next);
        let x_new = &yk - grad(&yk, &y) * step;
        let f_new = obj(&x_new);
        if f_new > fx {
            // adaptive restart
            t = 1.0;
            x_prev = x.clone();
            continue;
        }
        x_prev = std::mem::replace(&mut x, x_new);
        t = t_next;
        let done = (fx - f_new).abs() <= 1e-15 * fx.abs().max(1e-300);
        fx = f_new;
        if done {
            break;
        }
    }
    split(&x)
}

/// Average ranks (ties share the mean rank).
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            out[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
