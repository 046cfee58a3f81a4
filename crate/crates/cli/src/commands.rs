//! Subcommand bodies. Each returns a JSON summary recorded in the manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use coupled_core::afs::{build_dictionary, normalize_atoms, run_afs, AfsStep};
use coupled_core::datagen::{gen_controlled, gen_linear_gaussian, gen_logit_diag, Generated};
use coupled_core::dataset::{load_csv, standardize, Dataset, LabelKind, Standardizer};
use coupled_core::eval_cv::{
    cv_select_lambda, lambda_sweep, CvOptions, CvReport, EvalSet, Method, MetricKind, SweepResult, SweepRow, Trainer,
};
use coupled_core::star_space::Block;
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{GeneratorSpec, RunConfig, Sizes, Which};
use crate::CliError;

/// Training data with optional held-out rows.
pub struct Source {
    pub train: Dataset,
    pub test: Option<EvalSet>,
    pub standardizer: Option<Standardizer>,
}

pub fn generate(spec: &GeneratorSpec, sizes: Sizes, seed: u64) -> Result<Generated, CliError> {
    let Sizes { n, m, n_test } = sizes;
    Ok(match spec {
        GeneratorSpec::LinearGaussian(c) => gen_linear_gaussian(c, n, m, n_test, seed)?,
        GeneratorSpec::Controlled(c) => gen_controlled(c, n, m, n_test, seed)?,
        GeneratorSpec::LogitDiag(c) => gen_logit_diag(c, n, m, n_test, seed)?,
    })
}

fn from_generated(g: Generated) -> Source {
    let test = (g.test.x.nrows() > 0).then(|| EvalSet::from(&g.test));
    Source { train: g.train, test, standardizer: None }
}

/// Data for one seed: the CSV source when configured (the seed then only
/// drives fold assignment), the generator otherwise.
pub fn source(cfg: &RunConfig, seed: u64) -> Result<Source, CliError> {
    let Some(src) = &cfg.csv else {
        return Ok(from_generated(generate(&cfg.generator, cfg.sizes(), seed)?));
    };
    let raw = load_csv(&src.train, &src.columns)?;
    let (train, standardizer) = match src.standardize {
        Some(policy) => {
            let (ds, s) = standardize(&raw, policy);
            (ds, Some(s))
        }
        None => (raw, None),
    };
    let test = match &src.test {
        None => None,
        Some(path) => {
            let mut columns = src.columns.clone();
            columns.group_col = None;
            let ds = load_csv(path, &columns)?;
            if ds.m() > 0 {
                return Err(CliError::Data(format!("{}: test file has rows without labels", path.display())));
            }
            let ds = match &standardizer {
                Some(s) => s.transform(&ds),
                None => ds,
            };
            Some(EvalSet { x: ds.x_labeled().clone(), y: ds.y_labeled().clone(), mu: None })
        }
    };
    Ok(Source { train, test, standardizer })
}

fn trainer(cfg: &RunConfig, method: Method) -> Trainer {
    let mut t = Trainer::new(method).with_ridge(cfg.ridge);
    t.logistic = cfg.logistic;
    t
}

fn cv_options(cfg: &RunConfig, ds: &Dataset, seed: u64) -> Result<CvOptions, CliError> {
    let mut opts = CvOptions::auto(ds, cfg.folds, cfg.cv_seed(seed));
    if let Some(&k) = cfg.metrics.first() {
        if k == MetricKind::EstErrVsMu {
            return Err(CliError::Config("est_err_vs_mu cannot drive cross-validation".into()));
        }
        opts.metric = Some(k);
    }
    Ok(opts)
}

fn select(cfg: &RunConfig, ds: &Dataset, method: Method, seed: u64) -> Result<CvReport, CliError> {
    let opts = cv_options(cfg, ds, seed)?;
    Ok(cv_select_lambda(ds, &cfg.lambda_grid.values(), &trainer(cfg, method), &opts)?)
}

/// λ used for a method without cross-validation: 0 for labeled-only fits,
/// ∞ for pseudo-labeling.
fn fixed_lambda(method: Method) -> f64 {
    match method {
        Method::TwoStage | Method::LogisticTwoStage => f64::INFINITY,
        _ => 0.0,
    }
}

fn check_metrics(metrics: &[MetricKind], test: &EvalSet) -> Result<(), CliError> {
    if test.mu.is_none() && metrics.contains(&MetricKind::EstErrVsMu) {
        return Err(CliError::Config("est_err_vs_mu needs synthetic data with a known μ".into()));
    }
    Ok(())
}

pub fn write_results(dir: &Path, name: &str, mut res: SweepResult) -> Result<(), CliError> {
    res.sort();
    res.validate()?;
    let file = File::create(dir.join(name))?;
    res.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(f)?;
    Ok(())
}

pub fn gen_data(cfg: &RunConfig, dir: &Path) -> Result<(Value, Vec<String>), CliError> {
    if cfg.csv.is_some() {
        return Err(CliError::Config("gen-data takes a generator, not a CSV source".into()));
    }
    let sizes = cfg.sizes();
    let mut files = Vec::new();
    for &seed in &cfg.seeds {
        let g = generate(&cfg.generator, sizes, seed)?;
        let train = format!("train_seed{seed}.csv");
        g.train.save_csv(dir.join(&train))?;
        files.push(train);
        if sizes.n_test > 0 {
            let (dx, dw) = (g.test.x.ncols(), g.test.w.ncols());
            let kind = if cfg.generator.is_binary() { LabelKind::Binary } else { LabelKind::Regression };
            let test = Dataset::new(
                g.test.x.clone(),
                g.test.w.clone(),
                g.test.y.clone(),
                DMatrix::zeros(0, dx),
                DMatrix::zeros(0, dw),
            )?
            .with_kind(kind)?;
            let name = format!("test_seed{seed}.csv");
            test.save_csv(dir.join(&name))?;
            files.push(name);
        }
        let name = format!("truth_seed{seed}.json");
        write_json(
            &dir.join(&name),
            &json!({
                "generator": cfg.generator.name(),
                "seed": seed,
                "sizes": sizes,
                "truth": g.truth,
                "hidden_labels_of_unlabeled_rows": g.train.hidden_labels().map(|y| y.as_slice().to_vec()),
            }),
        )?;
        files.push(name);
    }
    Ok((json!({ "seeds": cfg.seeds }), files))
}

pub fn lambda_curve(cfg: &RunConfig, dir: &Path) -> Result<(Value, Vec<String>), CliError> {
    let methods = cfg.methods_or(&cfg.default_methods())?;
    let metrics = cfg.test_metrics();
    let grid = cfg.lambda_grid.values();
    let mut out = SweepResult::default();
    for &seed in &cfg.seeds {
        let src = source(cfg, seed)?;
        let test = src.test.as_ref().ok_or_else(|| CliError::Config("lambda-curve needs held-out rows".into()))?;
        check_metrics(&metrics, test)?;
        for &method in &methods {
            let mut sweep = lambda_sweep(&src.train, test, &grid, &trainer(cfg, method), &metrics, seed)?;
            // references of the family are reported only when requested
            sweep.rows.retain(|r| r.method == method.name());
            out.extend(sweep);
        }
    }
    write_results(dir, "results.csv", out)?;
    Ok((json!({ "methods": methods, "metrics": metrics }), vec!["results.csv".into()]))
}

pub fn synth_sweep(cfg: &RunConfig, dir: &Path) -> Result<(Value, Vec<String>), CliError> {
    let which = cfg.sweep.which.ok_or_else(|| CliError::Config("synth-sweep needs --which".into()))?;
    let GeneratorSpec::Controlled(base) = &cfg.generator else {
        return Err(CliError::Config("synth-sweep uses the controlled generator".into()));
    };
    if cfg.csv.is_some() {
        return Err(CliError::Config("synth-sweep takes a generator, not a CSV source".into()));
    }
    let values = if cfg.sweep.values.is_empty() { which.default_values() } else { cfg.sweep.values.clone() };
    let methods = cfg.methods_or(&[Method::Baseline, Method::TwoStage, Method::Coupled])?;
    let metrics = if cfg.metrics.is_empty() { vec![MetricKind::EstErrVsMu] } else { cfg.metrics.clone() };
    let mut out = SweepResult::default();
    let mut selected = Vec::new();
    for &v in &values {
        let mut gen = base.clone();
        let mut sizes = cfg.sizes();
        let count = || -> Result<usize, CliError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Config(format!("{} values must be nonnegative integers, got {v}", which.knob())))
            }
        };
        match which {
            Which::Signal => gen.alpha = v,
            Which::Wdim => gen.d_noise = count()?,
            Which::Unlabeled => sizes.m = count()?,
        }
        let fold = format!("{}={v}", which.knob());
        for &seed in &cfg.seeds {
            let g = generate(&GeneratorSpec::Controlled(gen.clone()), sizes, seed)?;
            let src = from_generated(g);
            let test = src.test.as_ref().ok_or_else(|| CliError::Config("synth-sweep needs n_test > 0".into()))?;
            check_metrics(&metrics, test)?;
            for &method in &methods {
                let lambda = if method.uses_lambda() {
                    let rep = select(cfg, &src.train, method, seed)?;
                    selected.push(json!({ "setting": fold, "seed": seed, "method": method, "lambda_hat": rep.lambda_hat }));
                    rep.lambda_hat
                } else {
                    fixed_lambda(method)
                };
                let model = trainer(cfg, method).fit(&src.train, lambda)?;
                let pred = model.predict(&test.x)?;
                for &k in &metrics {
                    out.rows.push(SweepRow {
                        method: method.name().into(),
                        lambda,
                        seed,
                        fold: fold.clone(),
                        metric: k.name().into(),
                        value: test.score(k, &pred)?,
                    });
                }
            }
        }
    }
    write_results(dir, "results.csv", out)?;
    Ok((json!({ "which": which, "knob": which.knob(), "values": values, "cv_selected": selected }), vec!["results.csv".into()]))
}

fn write_trace(path: &Path, steps: &[AfsStep]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(e.to_string()))?;
    let csv_err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record([
        "iteration",
        "residual_norm",
        "objective",
        "alpha",
        "beta",
        "f_selected",
        "g_selected",
        "scan_ops",
        "envelope",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<usize>| v.map_or(String::new(), |i| i.to_string());
    for (i, s) in steps.iter().enumerate() {
        let k = (i + 1) as f64;
        // k·a_k / ln(k+1) with the zero function as comparator; bounded when
        // the objective decays at the sublinear rate
        let envelope = k * s.objective / (k + 1.0).ln();
        w.write_record([
            (i + 1).to_string(),
            s.residual_norm.to_string(),
            s.objective.to_string(),
            s.alpha.to_string(),
            s.beta.to_string(),
            opt(s.f_selected),
            opt(s.g_selected),
            s.scan_ops.to_string(),
            envelope.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn afs_demo(cfg: &RunConfig, dir: &Path) -> Result<(Value, Vec<String>), CliError> {
    let seed = cfg.seeds[0];
    let src = source(cfg, seed)?;
    let a = &cfg.afs;
    let dict_f = normalize_atoms(&build_dictionary(&a.dict_f, Block::F, &src.train)?)?;
    let dict_g = normalize_atoms(&build_dictionary(&a.dict_g, Block::G, &src.train)?)?;
    let (model, trace) = run_afs(&src.train, &dict_f, &dict_g, a.lambda, a.k_max, &a.engine)?;
    write_trace(&dir.join("trace.csv"), &trace.steps)?;
    let mut files = vec!["trace.csv".to_string()];
    if let Some(test) = &src.test {
        let metrics: Vec<MetricKind> =
            cfg.test_metrics().into_iter().filter(|&k| k != MetricKind::EstErrVsMu || test.mu.is_some()).collect();
        let pred = model.predict_f(&test.x)?;
        let rows = metrics
            .iter()
            .map(|&k| {
                Ok(SweepRow {
                    method: "afs".into(),
                    lambda: a.lambda,
                    seed,
                    fold: "test".into(),
                    metric: k.name().into(),
                    value: test.score(k, &pred)?,
                })
            })
            .collect::<Result<Vec<_>, coupled_core::Error>>()?;
        write_results(dir, "results.csv", SweepResult { rows })?;
        files.push("results.csv".into());
    }
    write_json(&dir.join("afs_model.json"), &model)?;
    files.push("afs_model.json".into());
    let (l1_f, l1_g) = model.coefficient_l1();
    Ok((
        json!({
            "seed": seed,
            "iterations": model.iterations,
            "stop": trace.stop,
            "final_residual_norm": trace.final_residual_norm,
            "dictionary_sizes": { "f": dict_f.len(), "g": dict_g.len() },
            "dropped_zero_atoms": { "f": dict_f.dropped, "g": dict_g.dropped },
            "selected": { "f": model.f_atoms.len(), "g": model.g_atoms.len() },
            "coefficient_l1": { "f": l1_f, "g": l1_g },
        }),
        files,
    ))
}

pub fn cv_select(cfg: &RunConfig, dir: &Path, stdout: &mut impl Write) -> Result<(Value, Vec<String>), CliError> {
    let default = if cfg.is_binary() { Method::CoupledLogistic } else { Method::Coupled };
    let methods = cfg.methods_or(&[default])?;
    if let Some(m) = methods.iter().find(|m| !m.uses_lambda()) {
        return Err(CliError::Config(format!("method {} has no λ to select", m.name())));
    }
    let mut out = SweepResult::default();
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        let src = source(cfg, seed)?;
        for &method in &methods {
            let rep = select(cfg, &src.train, method, seed)?;
            writeln!(stdout, "{}\tseed={}\tlambda_hat={}", method.name(), seed, rep.lambda_hat)?;
            out.extend(rep.to_rows());
            reports.push(rep);
        }
    }
    write_results(dir, "results.csv", out)?;
    write_json(&dir.join("cv_reports.json"), &reports)?;
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "method": r.method, "seed": r.seed, "metric": r.metric, "lambda_hat": r.lambda_hat, "tie": r.tie }))
        .collect();
    Ok((json!({ "selections": summary }), vec!["results.csv".into(), "cv_reports.json".into()]))
}

pub fn run_csv(cfg: &RunConfig, dir: &Path) -> Result<(Value, Vec<String>), CliError> {
    if cfg.csv.is_none() {
        return Err(CliError::Config("run-csv needs a CSV source (--data or \"csv\" in the config)".into()));
    }
    let methods = cfg.methods_or(&cfg.default_methods())?;
    let metrics = cfg.test_metrics();
    let mut out = SweepResult::default();
    let mut models = Vec::new();
    let mut standardizer = None;
    for &seed in &cfg.seeds {
        let src = source(cfg, seed)?;
        if let Some(test) = &src.test {
            check_metrics(&metrics, test)?;
        }
        for &method in &methods {
            let lambda = if method.uses_lambda() {
                let rep = select(cfg, &src.train, method, seed)?;
                out.extend(rep.to_rows());
                rep.lambda_hat
            } else {
                fixed_lambda(method)
            };
            let model = trainer(cfg, method).fit(&src.train, lambda)?;
            if let Some(test) = &src.test {
                let pred = model.predict(&test.x)?;
                for &k in &metrics {
                    out.rows.push(SweepRow {
                        method: method.name().into(),
                        lambda,
                        seed,
                        fold: "test".into(),
                        metric: k.name().into(),
                        value: test.score(k, &pred)?,
                    });
                }
            }
            models.push(json!({ "method": method, "seed": seed, "lambda": lambda, "model": model }));
        }
        standardizer = src.standardizer;
    }
    write_results(dir, "results.csv", out)?;
    write_json(&dir.join("models.json"), &json!({ "standardizer": standardizer, "models": models }))?;
    Ok((json!({ "methods": methods, "metrics": metrics }), vec!["results.csv".into(), "models.json".into()]))
}
