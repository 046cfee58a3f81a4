//! Labeled/unlabeled data model, CSV ingestion, splitting and scaling.
//!
//! A [`Dataset`] holds `n` labeled rows `(X, W, Y)` and `m` unlabeled rows
//! `(X, W)`. `X` is the deployment view, `W` the privileged view that is
//! only available during training; `Z = (X, W)`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::linalg::{hstack, select_entries, select_rows, stream_rng, vstack};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    #[default]
    Regression,
    Binary,
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub deployment_cols: Vec<String>,
    #[serde(default)]
    pub privileged_cols: Vec<String>,
    pub label_col: String,
    #[serde(default)]
    pub kind: LabelKind,
    /// Optional grouping key (e.g. subject id) used for grouped folds.
    #[serde(default)]
    pub group_col: Option<String>,
}

impl ColumnSpec {
    fn validate(&self) -> Result<()> {
        if self.deployment_cols.is_empty() {
            return Err(Error::invalid("at least one deployment column is required"));
        }
        let mut seen = std::collections::HashSet::new();
        let all = self
            .deployment_cols
            .iter()
            .chain(&self.privileged_cols)
            .chain(std::iter::once(&self.label_col))
            .chain(self.group_col.iter());
        for c in all {
            if !seen.insert(c.as_str()) {
                return Err(Error::OverlappingColumns { column: c.clone() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    x_labeled: DMatrix<f64>,
    w_labeled: DMatrix<f64>,
    y_labeled: DVector<f64>,
    x_unlabeled: DMatrix<f64>,
    w_unlabeled: DMatrix<f64>,
    x_names: Vec<String>,
    w_names: Vec<String>,
    label_name: String,
    kind: LabelKind,
    // source row positions, used to write rows back in their original order
    labeled_rows: Vec<usize>,
    unlabeled_rows: Vec<usize>,
    labeled_groups: Option<Vec<usize>>,
    // labels of unlabeled rows kept by generators and splits; no estimator
    // reads them
    hidden_labels: Option<DVector<f64>>,
}

impl Dataset {
    /// Builds a dataset with generated column names `x0.., w0.., y`.
    pub fn new(
        x_labeled: DMatrix<f64>,
        w_labeled: DMatrix<f64>,
        y_labeled: DVector<f64>,
        x_unlabeled: DMatrix<f64>,
        w_unlabeled: DMatrix<f64>,
    ) -> Result<Self> {
        let x_names = (0..x_labeled.ncols()).map(|j| format!("x{j}")).collect();
        let w_names = (0..w_labeled.ncols()).map(|j| format!("w{j}")).collect();
        Self::with_names(
            x_labeled,
            w_labeled,
            y_labeled,
            x_unlabeled,
            w_unlabeled,
            x_names,
            w_names,
            "y".to_string(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_names(
        x_labeled: DMatrix<f64>,
        w_labeled: DMatrix<f64>,
        y_labeled: DVector<f64>,
        x_unlabeled: DMatrix<f64>,
        w_unlabeled: DMatrix<f64>,
        x_names: Vec<String>,
        w_names: Vec<String>,
        label_name: String,
    ) -> Result<Self> {
        let n = y_labeled.len();
        let m = x_unlabeled.nrows();
        let ds = Dataset {
            labeled_rows: (0..n).collect(),
            unlabeled_rows: (n..n + m).collect(),
            x_labeled,
            w_labeled,
            y_labeled,
            x_unlabeled,
            w_unlabeled,
            x_names,
            w_names,
            label_name,
            kind: LabelKind::Regression,
            labeled_groups: None,
            hidden_labels: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.y_labeled.len();
        let m = self.x_unlabeled.nrows();
        let dx = self.x_labeled.ncols();
        let dw = self.w_labeled.ncols();
        if n == 0 {
            return Err(Error::NoLabeledRows);
        }
        if dx == 0 {
            return Err(Error::InvalidDataset("at least one deployment feature is required".into()));
        }
        let shapes = [
            ("x_labeled", self.x_labeled.shape(), (n, dx)),
            ("w_labeled", self.w_labeled.shape(), (n, dw)),
            ("x_unlabeled", self.x_unlabeled.shape(), (m, dx)),
            ("w_unlabeled", self.w_unlabeled.shape(), (m, dw)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::InvalidDataset(format!(
                    "{name} has shape {got:?}, expected {want:?}"
                )));
            }
        }
        if self.x_names.len() != dx || self.w_names.len() != dw {
            return Err(Error::InvalidDataset("column name count mismatch".into()));
        }
        let finite = self.x_labeled.iter().all(|v| v.is_finite())
            && self.w_labeled.iter().all(|v| v.is_finite())
            && self.y_labeled.iter().all(|v| v.is_finite())
            && self.x_unlabeled.iter().all(|v| v.is_finite())
            && self.w_unlabeled.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        if let Some(g) = &self.labeled_groups {
            if g.len() != n {
                return Err(Error::InvalidDataset("group count mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn with_kind(mut self, kind: LabelKind) -> Result<Self> {
        if kind == LabelKind::Binary && !is_binary(&self.y_labeled) {
            return Err(Error::NonBinaryLabels);
        }
        self.kind = kind;
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: groups.len(),
            });
        }
        self.labeled_groups = Some(groups);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y_labeled.len()
    }
    pub fn m(&self) -> usize {
        self.x_unlabeled.nrows()
    }
    /// `N = n + m`.
    pub fn total(&self) -> usize {
        self.n() + self.m()
    }
    pub fn dx(&self) -> usize {
        self.x_labeled.ncols()
    }
    pub fn dw(&self) -> usize {
        self.w_labeled.ncols()
    }
    pub fn kind(&self) -> LabelKind {
        self.kind
    }
    pub fn x_labeled(&self) -> &DMatrix<f64> {
        &self.x_labeled
    }
    pub fn w_labeled(&self) -> &DMatrix<f64> {
        &self.w_labeled
    }
    pub fn y_labeled(&self) -> &DVector<f64> {
        &self.y_labeled
    }
    pub fn x_unlabeled(&self) -> &DMatrix<f64> {
        &self.x_unlabeled
    }
    pub fn w_unlabeled(&self) -> &DMatrix<f64> {
        &self.w_unlabeled
    }
    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }
    pub fn w_names(&self) -> &[String] {
        &self.w_names
    }
    pub fn label_name(&self) -> &str {
        &self.label_name
    }
    pub fn labeled_groups(&self) -> Option<&[usize]> {
        self.labeled_groups.as_deref()
    }

    pub fn z_labeled(&self) -> DMatrix<f64> {
        hstack(&self.x_labeled, &self.w_labeled)
    }
    pub fn z_unlabeled(&self) -> DMatrix<f64> {
        hstack(&self.x_unlabeled, &self.w_unlabeled)
    }
    /// Deployment features on all `N` points, labeled rows first.
    pub fn x_all(&self) -> DMatrix<f64> {
        vstack(&self.x_labeled, &self.x_unlabeled)
    }
    /// Rich-view features on all `N` points, labeled rows first.
    pub fn z_all(&self) -> DMatrix<f64> {
        vstack(&self.z_labeled(), &self.z_unlabeled())
    }

    /// Keeps only the given labeled rows (in the given order); the unlabeled
    /// block is unchanged.
    pub fn select_labeled(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.iter().any(|&r| r >= self.n()) {
            return Err(Error::invalid("labeled row index out of range"));
        }
        let ds = Dataset {
            x_labeled: select_rows(&self.x_labeled, rows),
            w_labeled: select_rows(&self.w_labeled, rows),
            y_labeled: select_entries(&self.y_labeled, rows),
            labeled_rows: rows.iter().map(|&r| self.labeled_rows[r]).collect(),
            labeled_groups: self
                .labeled_groups
                .as_ref()
                .map(|g| rows.iter().map(|&r| g[r]).collect()),
            ..self.clone()
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Same labeled block with the unlabeled pool removed.
    pub fn without_unlabeled(&self) -> Dataset {
        Dataset {
            x_unlabeled: DMatrix::zeros(0, self.dx()),
            w_unlabeled: DMatrix::zeros(0, self.dw()),
            unlabeled_rows: Vec::new(),
            hidden_labels: None,
            ..self.clone()
        }
    }

    /// Replaces the labels (same length), keeping everything else.
    pub fn with_labels(&self, y: DVector<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: y.len(),
            });
        }
        let ds = Dataset {
            y_labeled: y,
            ..self.clone()
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Attaches the true labels of the unlabeled rows. They are carried for
    /// evaluation and hygiene checks only.
    pub fn with_hidden_labels(mut self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), got: y.len() });
        }
        self.hidden_labels = Some(y);
        Ok(self)
    }

    pub fn hidden_labels(&self) -> Option<&DVector<f64>> {
        self.hidden_labels.as_ref()
    }

    pub fn labels_are_binary(&self) -> bool {
        is_binary(&self.y_labeled)
    }

    /// Writes the dataset as CSV: deployment columns, privileged columns,
    /// label; unlabeled rows carry an empty label cell. Rows are written in
    /// their source order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.x_names.iter().map(String::as_str).collect();
        header.extend(self.w_names.iter().map(String::as_str));
        header.push(&self.label_name);
        wtr.write_record(&header)?;

        let mut order: Vec<(usize, bool, usize)> = self
            .labeled_rows
            .iter()
            .enumerate()
            .map(|(i, &src)| (src, true, i))
            .chain(
                self.unlabeled_rows
                    .iter()
                    .enumerate()
                    .map(|(j, &src)| (src, false, j)),
            )
            .collect();
        order.sort_unstable();
        let mut record = Vec::with_capacity(header.len());
        for (_, labeled, i) in order {
            record.clear();
            let (x, w) = if labeled {
                (&self.x_labeled, &self.w_labeled)
            } else {
                (&self.x_unlabeled, &self.w_unlabeled)
            };
            record.extend(x.row(i).iter().map(|v| v.to_string()));
            record.extend(w.row(i).iter().map(|v| v.to_string()));
            record.push(if labeled {
                self.y_labeled[i].to_string()
            } else {
                String::new()
            });
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn is_binary(y: &DVector<f64>) -> bool {
    y.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Reads a dataset from CSV. Rows whose label cell is empty become
/// unlabeled rows; row order within each block follows the file.
pub fn load_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, spec)
}

pub fn read_csv<R: Read>(input: R, spec: &ColumnSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let x_idx: Vec<usize> = spec.deployment_cols.iter().map(|c| index_of(c)).collect::<Result<_>>()?;
    let w_idx: Vec<usize> = spec.privileged_cols.iter().map(|c| index_of(c)).collect::<Result<_>>()?;
    let y_idx = index_of(&spec.label_col)?;
    let g_idx = spec.group_col.as_deref().map(index_of).transpose()?;

    let dx = x_idx.len();
    let dw = w_idx.len();
    let mut xl = Vec::new();
    let mut wl = Vec::new();
    let mut yl = Vec::new();
    let mut xu = Vec::new();
    let mut wu = Vec::new();
    let mut labeled_rows = Vec::new();
    let mut unlabeled_rows = Vec::new();
    let mut group_keys: Vec<String> = Vec::new();

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // 1-based data row number, header excluded
        let line = row + 1;
        let cell = |i: usize, name: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::ParseCell {
                row: line,
                column: name.to_string(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseCell {
                    row: line,
                    column: name.to_string(),
                    value: raw.to_string(),
                });
            }
            Ok(v)
        };
        let label_raw = rec.get(y_idx).unwrap_or("").trim();
        let labeled = !label_raw.is_empty();
        let (xs, ws) = if labeled { (&mut xl, &mut wl) } else { (&mut xu, &mut wu) };
        for (&i, name) in x_idx.iter().zip(&spec.deployment_cols) {
            xs.push(cell(i, name)?);
        }
        for (&i, name) in w_idx.iter().zip(&spec.privileged_cols) {
            if rec.get(i).unwrap_or("").trim().is_empty() {
                return Err(Error::BadRow {
                    row: line,
                    reason: format!("privileged column `{name}` is empty"),
                });
            }
            ws.push(cell(i, name)?);
        }
        if labeled {
            yl.push(cell(y_idx, &spec.label_col)?);
            labeled_rows.push(row);
            if let Some(gi) = g_idx {
                group_keys.push(rec.get(gi).unwrap_or("").trim().to_string());
            }
        } else {
            unlabeled_rows.push(row);
        }
    }
    let n = yl.len();
    if n == 0 {
        return Err(Error::NoLabeledRows);
    }
    let m = unlabeled_rows.len();
    let labeled_groups = g_idx.map(|_| {
        let mut ids: HashMap<String, usize> = HashMap::new();
        group_keys
            .into_iter()
            .map(|k| {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            })
            .collect()
    });
    let ds = Dataset {
        x_labeled: DMatrix::from_row_slice(n, dx, &xl),
        w_labeled: DMatrix::from_row_slice(n, dw, &wl),
        y_labeled: DVector::from_vec(yl),
        x_unlabeled: DMatrix::from_row_slice(m, dx, &xu),
        w_unlabeled: DMatrix::from_row_slice(m, dw, &wu),
        x_names: spec.deployment_cols.clone(),
        w_names: spec.privileged_cols.clone(),
        label_name: spec.label_col.clone(),
        kind: LabelKind::Regression,
        labeled_rows,
        unlabeled_rows,
        labeled_groups,
        hidden_labels: None,
    };
    ds.validate()?;
    ds.with_kind(spec.kind)
}

/// Splits a fully labeled dataset into `n_labeled` labeled rows and an
/// unlabeled remainder whose labels are discarded.
///
/// With `stratify`, per-class labeled counts follow proportional allocation
/// with largest-remainder rounding.
pub fn make_semisupervised_split(
    full: &Dataset,
    n_labeled: usize,
    seed: u64,
    stratify: bool,
) -> Result<Dataset> {
    if full.m() != 0 {
        return Err(Error::invalid("split expects a fully labeled dataset"));
    }
    let total = full.n();
    if n_labeled == 0 || n_labeled > total {
        return Err(Error::invalid(format!(
            "n_labeled must be in 1..={total}, got {n_labeled}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let mut chosen: Vec<usize> = if stratify {
        if full.kind() != LabelKind::Binary || !full.labels_are_binary() {
            return Err(Error::invalid("stratification requires binary labels"));
        }
        let classes: [Vec<usize>; 2] = [
            (0..total).filter(|&i| full.y_labeled[i] == 0.0).collect(),
            (0..total).filter(|&i| full.y_labeled[i] == 1.0).collect(),
        ];
        let counts = [classes[0].len(), classes[1].len()];
        let quotas = largest_remainder(&counts, n_labeled);
        let mut out = Vec::with_capacity(n_labeled);
        for (mut members, q) in classes.into_iter().zip(quotas) {
            members.shuffle(&mut rng);
            out.extend_from_slice(&members[..q]);
        }
        out
    } else {
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut rng);
        idx.truncate(n_labeled);
        idx
    };
    chosen.sort_unstable();
    let mut is_labeled = vec![false; total];
    for &i in &chosen {
        is_labeled[i] = true;
    }
    let rest: Vec<usize> = (0..total).filter(|&i| !is_labeled[i]).collect();

    let src = &full.labeled_rows;
    let ds = Dataset {
        x_labeled: select_rows(&full.x_labeled, &chosen),
        w_labeled: select_rows(&full.w_labeled, &chosen),
        y_labeled: select_entries(&full.y_labeled, &chosen),
        x_unlabeled: select_rows(&full.x_labeled, &rest),
        w_unlabeled: select_rows(&full.w_labeled, &rest),
        labeled_rows: chosen.iter().map(|&i| src[i]).collect(),
        unlabeled_rows: rest.iter().map(|&i| src[i]).collect(),
        labeled_groups: full
            .labeled_groups
            .as_ref()
            .map(|g| chosen.iter().map(|&i| g[i]).collect()),
        hidden_labels: Some(select_entries(&full.y_labeled, &rest)),
        ..full.clone()
    };
    ds.validate()?;
    Ok(ds)
}

/// Proportional allocation of `total` slots over groups of the given sizes,
/// rounding by largest remainder (ties go to the earlier group).
pub fn largest_remainder(counts: &[usize], total: usize) -> Vec<usize> {
    let pool: usize = counts.iter().sum();
    if pool == 0 {
        return vec![0; counts.len()];
    }
    let mut quotas: Vec<usize> = counts.iter().map(|&c| c * total / pool).collect();
    let mut rems: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| ((c * total) % pool, i))
        .collect();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = total - quotas.iter().sum::<usize>();
    for &(_, i) in &rems {
        if left == 0 {
            break;
        }
        if quotas[i] < counts[i] {
            quotas[i] += 1;
            left -= 1;
        }
    }
    quotas
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizePolicy {
    FeaturesOnly,
    FeaturesAndLabel,
}

/// Mean and population standard deviation of one column. Constant columns
/// are passed through untouched (`mean = 0`, `sd = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
    pub constant: bool,
}

impl ColumnScale {
    pub fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let count = values.clone().count();
        if count == 0 {
            return ColumnScale { mean: 0.0, sd: 1.0, constant: true };
        }
        let mean = values.clone().sum::<f64>() / count as f64;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
        let sd = var.sqrt();
        if !(sd > 1e-12 * (1.0 + mean.abs())) {
            ColumnScale { mean: 0.0, sd: 1.0, constant: true }
        } else {
            ColumnScale { mean, sd, constant: false }
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.sd + self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x: Vec<ColumnScale>,
    pub w: Vec<ColumnScale>,
    pub y: Option<ColumnScale>,
}

impl Standardizer {
    /// Names of columns that were constant on the fitting rows.
    pub fn constant_columns<'a>(&self, ds: &'a Dataset) -> Vec<&'a str> {
        let xs = self.x.iter().zip(ds.x_names());
        let ws = self.w.iter().zip(ds.w_names());
        let mut out: Vec<&str> = xs
            .chain(ws)
            .filter(|(s, _)| s.constant)
            .map(|(_, n)| n.as_str())
            .collect();
        if self.y.is_some_and(|s| s.constant) {
            out.push(ds.label_name());
        }
        out
    }

    pub fn transform_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        map_columns(x, &self.x, ColumnScale::apply)
    }
    pub fn transform_w(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        map_columns(w, &self.w, ColumnScale::apply)
    }
    pub fn transform_y(&self, y: &DVector<f64>) -> DVector<f64> {
        match self.y {
            Some(s) => y.map(|v| s.apply(v)),
            None => y.clone(),
        }
    }
    pub fn inverse_y(&self, y: &DVector<f64>) -> DVector<f64> {
        match self.y {
            Some(s) => y.map(|v| s.invert(v)),
            None => y.clone(),
        }
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        Dataset {
            x_labeled: self.transform_x(&ds.x_labeled),
            w_labeled: self.transform_w(&ds.w_labeled),
            y_labeled: self.transform_y(&ds.y_labeled),
            x_unlabeled: self.transform_x(&ds.x_unlabeled),
            w_unlabeled: self.transform_w(&ds.w_unlabeled),
            hidden_labels: ds.hidden_labels.as_ref().map(|y| self.transform_y(y)),
            ..ds.clone()
        }
    }

    pub fn inverse(&self, ds: &Dataset) -> Dataset {
        Dataset {
            x_labeled: map_columns(&ds.x_labeled, &self.x, ColumnScale::invert),
            w_labeled: map_columns(&ds.w_labeled, &self.w, ColumnScale::invert),
            y_labeled: self.inverse_y(&ds.y_labeled),
            x_unlabeled: map_columns(&ds.x_unlabeled, &self.x, ColumnScale::invert),
            w_unlabeled: map_columns(&ds.w_unlabeled, &self.w, ColumnScale::invert),
            hidden_labels: ds.hidden_labels.as_ref().map(|y| self.inverse_y(y)),
            ..ds.clone()
        }
    }
}

fn map_columns(
    x: &DMatrix<f64>,
    scales: &[ColumnScale],
    f: fn(&ColumnScale, f64) -> f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| f(&scales[j], x[(i, j)]))
}

/// Fits column statistics on `ds` (labeled and unlabeled rows for features,
/// labeled rows for the label) and returns the transformed dataset.
/// Binary labels are never scaled.
pub fn standardize(ds: &Dataset, policy: StandardizePolicy) -> (Dataset, Standardizer) {
    let fit_cols = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> Vec<ColumnScale> {
        (0..a.ncols())
            .map(|j| ColumnScale::fit(a.column(j).iter().chain(b.column(j).iter()).copied()))
            .collect()
    };
    let y = match policy {
        StandardizePolicy::FeaturesAndLabel if ds.kind() == LabelKind::Regression => {
            Some(ColumnScale::fit(ds.y_labeled.iter().copied()))
        }
        _ => None,
    };
    let st = Standardizer {
        x: fit_cols(&ds.x_labeled, &ds.x_unlabeled),
        w: fit_cols(&ds.w_labeled, &ds.w_unlabeled),
        y,
    };
    (st.transform(ds), st)
}
