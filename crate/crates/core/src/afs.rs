//! Alternating forward selection over finite dictionaries.
//!
//! Both blocks live in the embedded star space (see [`crate::star_space`]):
//! f-atoms embed as `(ψ, 0)`, g-atoms as `(0, φ)`. Each iteration selects
//! the f-atom whose component orthogonal to the current f-span correlates
//! best with the residual, projects the residual onto the enlarged f-span,
//! then does the same for the g-block. Spans are kept as incremental QR
//! factorizations and every candidate keeps its residual against the span
//! of its block, so a selection scan costs one pass over the candidates.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::linalg::{stream_rng, vconcat, weighted_ridge};
use crate::star_space::{Block, StarSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    Raw,
    RandomProjection,
    Rbf,
    Tabulated,
}

/// How a single atom is evaluated on a feature row (`x` for the f-block,
/// `(x, w)` for the g-block).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AtomSpec {
    Constant,
    Coordinate { index: usize },
    Projection { weights: Vec<f64> },
    Rbf { center: Vec<f64>, gamma: f64, center_index: usize },
    /// Values known only on the training points.
    Tabulated { column: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub spec: AtomSpec,
    pub scale: f64,
}

impl Atom {
    fn raw(spec: AtomSpec) -> Self {
        Atom { spec, scale: 1.0 }
    }

    pub fn eval(&self, row: &[f64]) -> Result<f64> {
        let base = match &self.spec {
            AtomSpec::Constant => 1.0,
            AtomSpec::Coordinate { index } => *row.get(*index).ok_or(Error::DimensionMismatch { expected: index + 1, got: row.len() })?,
            AtomSpec::Projection { weights } => {
                if weights.len() != row.len() {
                    return Err(Error::DimensionMismatch { expected: weights.len(), got: row.len() });
                }
                weights.iter().zip(row).map(|(a, b)| a * b).sum()
            }
            AtomSpec::Rbf { center, gamma, .. } => {
                if center.len() != row.len() {
                    return Err(Error::DimensionMismatch { expected: center.len(), got: row.len() });
                }
                let d2: f64 = center.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            AtomSpec::Tabulated { .. } => {
                return Err(Error::invalid("tabulated atoms cannot be evaluated on new points"));
            }
        };
        Ok(self.scale * base)
    }
}

/// Atoms evaluated on all `N` sample points (labeled first).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub block: Block,
    pub kind: DictKind,
    pub values: DMatrix<f64>,
    pub atoms: Vec<Atom>,
    pub seed: Option<u64>,
    /// Positions (in the pre-normalization dictionary) of atoms dropped as
    /// zero.
    pub dropped: Vec<usize>,
}

impl Dictionary {
    /// Wraps explicit atom values (columns) measured on the training points.
    pub fn from_values(block: Block, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::EmptyDictionary);
        }
        let atoms = (0..values.ncols()).map(|column| Atom::raw(AtomSpec::Tabulated { column })).collect();
        Ok(Dictionary { block, kind: DictKind::Tabulated, values, atoms, seed: None, dropped: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    /// `‖ψ‖ = ((1/N) Σ ψ²)^{1/2}` for every atom.
    pub fn pooled_norms(&self) -> Vec<f64> {
        let big_n = self.values.nrows() as f64;
        self.values.column_iter().map(|c| (c.norm_squared() / big_n).sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictParams {
    /// Coordinate atoms plus a constant atom.
    Raw,
    /// Linear atoms `x ↦ ωᵀx` with `ω ~ N(0, I)`.
    RandomProjection { count: usize, seed: u64 },
    /// Gaussian atoms `exp(−γ‖x − c‖²)` centered at all labeled points and up
    /// to `max_unlabeled_centers` unlabeled points.
    Rbf {
        seed: u64,
        #[serde(default = "default_unlabeled_centers")]
        max_unlabeled_centers: usize,
        #[serde(default = "default_median_cap")]
        median_cap: usize,
        /// Fixed bandwidth; the median heuristic is used when absent.
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "one")]
        gamma_multiplier: f64,
    },
}

fn default_unlabeled_centers() -> usize {
    500
}
fn default_median_cap() -> usize {
    600
}
fn one() -> f64 {
    1.0
}

impl DictParams {
    pub fn rbf(seed: u64) -> Self {
        DictParams::Rbf {
            seed,
            max_unlabeled_centers: default_unlabeled_centers(),
            median_cap: default_median_cap(),
            gamma: None,
            gamma_multiplier: 1.0,
        }
    }
}

fn block_features(ds: &Dataset, block: Block) -> DMatrix<f64> {
    match block {
        Block::F => ds.x_all(),
        Block::G => ds.z_all(),
    }
}

/// `γ = 1 / median` of the pairwise squared distances among at most `cap`
/// rows (a seeded subsample when there are more).
pub fn median_heuristic_gamma(points: &DMatrix<f64>, cap: usize, seed: u64) -> Result<f64> {
    let rows: Vec<usize> = if points.nrows() > cap {
        let mut rng = stream_rng(seed, 11);
        let mut idx = sample(&mut rng, points.nrows(), cap).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..points.nrows()).collect()
    };
    if rows.len() < 2 {
        return Err(Error::invalid("median heuristic needs at least two points"));
    }
    let mut d2 = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            d2.push((points.row(i) - points.row(j)).norm_squared());
        }
    }
    d2.sort_by(f64::total_cmp);
    let k = d2.len();
    let median = if k % 2 == 1 { d2[k / 2] } else { 0.5 * (d2[k / 2 - 1] + d2[k / 2]) };
    if !(median > 0.0) {
        return Err(Error::invalid("median pairwise distance is zero"));
    }
    Ok(1.0 / median)
}

/// Builds an (unnormalized) dictionary evaluated on all `N` points of `ds`.
/// f-dictionaries read `X`; g-dictionaries read `Z = (X, W)`.
pub fn build_dictionary(params: &DictParams, block: Block, ds: &Dataset) -> Result<Dictionary> {
    let feats = block_features(ds, block);
    let d = feats.ncols();
    let (kind, seed, atoms): (DictKind, Option<u64>, Vec<Atom>) = match params {
        DictParams::Raw => {
            let mut atoms = vec![Atom::raw(AtomSpec::Constant)];
            atoms.extend((0..d).map(|index| Atom::raw(AtomSpec::Coordinate { index })));
            (DictKind::Raw, None, atoms)
        }
        DictParams::RandomProjection { count, seed } => {
            let stream = match block {
                Block::F => 21,
                Block::G => 22,
            };
            let mut rng = stream_rng(*seed, stream);
            let atoms = (0..*count)
                .map(|_| {
                    let weights = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    Atom::raw(AtomSpec::Projection { weights })
                })
                .collect();
            (DictKind::RandomProjection, Some(*seed), atoms)
        }
        DictParams::Rbf { seed, max_unlabeled_centers, median_cap, gamma, gamma_multiplier } => {
            let (n, m) = (ds.n(), ds.m());
            let mut rng = stream_rng(*seed, 31);
            let take = (*max_unlabeled_centers).min(m);
            let mut extra = sample(&mut rng, m, take).into_vec();
            extra.sort_unstable();
            let centers: Vec<usize> = (0..n).chain(extra.into_iter().map(|j| n + j)).collect();
            let g0 = match gamma {
                Some(g) => *g,
                None => median_heuristic_gamma(&feats, *median_cap, *seed)?,
            };
            let g = g0 * gamma_multiplier;
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::invalid("rbf bandwidth must be positive"));
            }
            let atoms = centers
                .into_iter()
                .map(|c| {
                    Atom::raw(AtomSpec::Rbf { center: feats.row(c).iter().copied().collect(), gamma: g, center_index: c })
                })
                .collect();
            (DictKind::Rbf, Some(*seed), atoms)
        }
    };
    if atoms.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let values = evaluate_atoms(&atoms, &feats)?;
    Ok(Dictionary { block, kind, values, atoms, seed, dropped: Vec::new() })
}

fn evaluate_atoms(atoms: &[Atom], feats: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = feats.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut out = DMatrix::zeros(feats.nrows(), atoms.len());
    for (j, atom) in atoms.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            out[(i, j)] = atom.eval(row)?;
        }
    }
    Ok(out)
}

/// Rescales every atom to unit pooled norm and drops zero atoms.
pub fn normalize_atoms(dict: &Dictionary) -> Result<Dictionary> {
    let norms = dict.pooled_norms();
    let keep: Vec<usize> = (0..dict.len()).filter(|&j| norms[j] > 0.0 && norms[j].is_finite()).collect();
    if keep.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let dropped = (0..dict.len()).filter(|j| !keep.contains(j)).collect();
    let mut values = DMatrix::zeros(dict.values.nrows(), keep.len());
    let mut atoms = Vec::with_capacity(keep.len());
    for (k, &j) in keep.iter().enumerate() {
        let s = 1.0 / norms[j];
        values.set_column(k, &(dict.values.column(j) * s));
        let mut atom = dict.atoms[j].clone();
        atom.scale *= s;
        atoms.push(atom);
    }
    Ok(Dictionary { block: dict.block, kind: dict.kind, values, atoms, seed: dict.seed, dropped })
}

/// Why an insertion was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degenerate;

impl std::fmt::Display for Degenerate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("atom lies in the current span")
    }
}

impl std::error::Error for Degenerate {}

/// Coefficients of the projection of a target onto the span.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Coordinates in the orthonormal basis `Q`.
    pub q_coeffs: DVector<f64>,
    /// Coefficients on the inserted atoms (`R⁻¹ Qᵀ t`).
    pub atom_coeffs: DVector<f64>,
    pub fitted: DVector<f64>,
}

/// Incrementally grown thin QR factorization `A = QR` of inserted atoms,
/// optionally with a pool of candidates kept orthogonalized against `Q`.
#[derive(Debug, Clone)]
pub struct QrState {
    dim: usize,
    eps: f64,
    q: Vec<DVector<f64>>,
    // column j of R, length j + 1
    r: Vec<Vec<f64>>,
    candidates: Option<Candidates>,
    ops: u64,
}

#[derive(Debug, Clone)]
struct Candidates {
    original: DMatrix<f64>,
    resid: DMatrix<f64>,
    resid_norm2: Vec<f64>,
    base_norm: Vec<f64>,
    active: Vec<bool>,
}

impl QrState {
    /// `eps` is the rejection threshold relative to the atom norm.
    pub fn new(dim: usize, eps: f64) -> Self {
        QrState { dim, eps, q: Vec::new(), r: Vec::new(), candidates: None, ops: 0 }
    }

    /// State whose candidate pool is the columns of `candidates`.
    pub fn with_candidates(candidates: DMatrix<f64>, eps: f64) -> Self {
        let dim = candidates.nrows();
        let base_norm: Vec<f64> = candidates.column_iter().map(|c| c.norm()).collect();
        let resid_norm2 = base_norm.iter().map(|v| v * v).collect();
        let active = vec![true; candidates.ncols()];
        QrState {
            dim,
            eps,
            q: Vec::new(),
            r: Vec::new(),
            candidates: Some(Candidates { resid: candidates.clone(), original: candidates, resid_norm2, base_norm, active }),
            ops: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Multiply-adds spent on candidate maintenance and scoring so far.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.rank(), |i, j| self.q[j][i])
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        let k = self.rank();
        DMatrix::from_fn(k, k, |i, j| if i <= j { self.r[j][i] } else { 0.0 })
    }

    /// `max |QᵀQ − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let q = self.q_matrix();
        let g = q.tr_mul(&q) - DMatrix::identity(self.rank(), self.rank());
        g.amax()
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.as_ref().map_or(0, |c| c.original.ncols())
    }

    /// Current `Π^⊥ a` for candidate `idx`; `None` once it has been
    /// inserted (its cache is no longer maintained).
    pub fn candidate_residual(&self, idx: usize) -> Option<DVector<f64>> {
        self.candidates.as_ref().filter(|c| c.active[idx]).map(|c| c.resid.column(idx).into_owned())
    }

    fn coordinates(&self, v: &DVector<f64>) -> Vec<f64> {
        self.q.iter().map(|q| q.dot(v)).collect()
    }

    fn subtract_span(&self, v: &mut DVector<f64>, coords: &[f64]) {
        for (q, &c) in self.q.iter().zip(coords) {
            v.axpy(-c, q, 1.0);
        }
    }

    /// Inserts an atom given through its residual `start` against the span.
    fn push(&mut self, atom: &DVector<f64>, start: DVector<f64>, skip: Option<usize>) -> std::result::Result<usize, Degenerate> {
        let atom_norm = atom.norm();
        let mut r = self.coordinates(atom);
        let mut v = start;
        // one reorthogonalization pass
        let s = self.coordinates(&v);
        self.subtract_span(&mut v, &s);
        for (a, b) in r.iter_mut().zip(&s) {
            *a += b;
        }
        let rho = v.norm();
        if !(rho > self.eps * atom_norm) || atom_norm == 0.0 {
            return Err(Degenerate);
        }
        let qk = v / rho;
        if let Some(c) = self.candidates.as_mut() {
            let dim = self.dim as u64;
            for j in 0..c.original.ncols() {
                if !c.active[j] || Some(j) == skip {
                    continue;
                }
                let mut col = c.resid.column_mut(j);
                let t = qk.dot(&col);
                col.axpy(-t, &qk, 1.0);
                c.resid_norm2[j] = col.norm_squared();
                self.ops += 3 * dim;
            }
            if let Some(j) = skip {
                c.active[j] = false;
            }
        }
        r.push(rho);
        self.q.push(qk);
        self.r.push(r);
        Ok(self.q.len() - 1)
    }

    /// Inserts an arbitrary atom. Atoms whose residual against the span is at
    /// most `eps·‖a‖` are rejected and the state is left unchanged.
    pub fn insert(&mut self, atom: &DVector<f64>) -> std::result::Result<usize, Degenerate> {
        assert_eq!(atom.len(), self.dim, "atom length must match the state dimension");
        let coords = self.coordinates(atom);
        let mut v = atom.clone();
        self.subtract_span(&mut v, &coords);
        self.push(atom, v, None)
    }

    /// Inserts candidate `idx` from the pool and removes it from the pool.
    pub fn insert_candidate(&mut self, idx: usize) -> std::result::Result<usize, Degenerate> {
        let c = self.candidates.as_ref().expect("state has no candidate pool");
        if !c.active[idx] {
            return Err(Degenerate);
        }
        let atom = c.original.column(idx).into_owned();
        let start = c.resid.column(idx).into_owned();
        self.push(&atom, start, Some(idx))
    }

    /// Best active candidate by `|⟨t, Π^⊥a⟩| / ‖Π^⊥a‖`, skipping candidates
    /// with `‖Π^⊥a‖ ≤ eps·‖a‖`. Ties go to the lowest index. Returns the
    /// index and the signed correlation.
    pub fn best_candidate(&mut self, target: &DVector<f64>) -> Option<(usize, f64)> {
        let c = self.candidates.as_ref()?;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut scanned = 0u64;
        for j in 0..c.original.ncols() {
            if !c.active[j] {
                continue;
            }
            let nrm = c.resid_norm2[j].sqrt();
            if !(nrm > self.eps * c.base_norm[j]) || c.base_norm[j] == 0.0 {
                continue;
            }
            scanned += 1;
            let corr = c.resid.column(j).dot(target) / nrm;
            let score = corr.abs();
            if best.is_none_or(|(_, s, _)| score > s) {
                best = Some((j, score, corr));
            }
        }
        self.ops += scanned * self.dim as u64;
        best.map(|(j, _, corr)| (j, corr))
    }

    /// Projection of `target` onto the span.
    pub fn project(&self, target: &DVector<f64>) -> Projection {
        let qc = DVector::from_vec(self.coordinates(target));
        let k = self.rank();
        // back substitution through R
        let mut coeffs = DVector::zeros(k);
        for i in (0..k).rev() {
            let mut acc = qc[i];
            for j in i + 1..k {
                acc -= self.r[j][i] * coeffs[j];
            }
            coeffs[i] = acc / self.r[i][i];
        }
        let mut fitted = DVector::zeros(self.dim);
        for (q, &c) in self.q.iter().zip(qc.iter()) {
            fitted.axpy(c, q, 1.0);
        }
        Projection { q_coeffs: qc, atom_coeffs: coeffs, fitted }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AfsConfig {
    /// Candidates with `‖Π^⊥a‖⋆ ≤ eps_proj·‖a‖⋆` are not eligible.
    pub eps_proj: f64,
    /// Stop once `‖r_k‖⋆` falls to this level.
    pub residual_tol: f64,
}

impl Default for AfsConfig {
    fn default() -> Self {
        AfsConfig { eps_proj: 1e-10, residual_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedAtom {
    /// Position in the dictionary passed to [`run_afs`].
    pub index: usize,
    pub atom: Atom,
    /// Sign of the residual correlation when selected.
    pub sign: f64,
    pub coef: f64,
}

/// Sparse pair `f = Σ c_ψ ψ`, `g = Σ c_φ φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfsModel {
    pub lambda: f64,
    pub iterations: usize,
    pub f_atoms: Vec<SelectedAtom>,
    pub g_atoms: Vec<SelectedAtom>,
}

impl AfsModel {
    fn eval(atoms: &[SelectedAtom], feats: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(feats.nrows());
        for (i, row) in feats.row_iter().enumerate() {
            let row: Vec<f64> = row.iter().copied().collect();
            let mut acc = 0.0;
            for a in atoms {
                acc += a.coef * a.atom.eval(&row)?;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Deployment predictions; reads only `x`.
    pub fn predict_f(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        Self::eval(&self.f_atoms, x)
    }

    pub fn predict_g(&self, x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DVector<f64>> {
        Self::eval(&self.g_atoms, &crate::linalg::hstack(x, w))
    }

    /// Values on the training points, from the dictionaries used to fit.
    pub fn fitted(&self, dict_f: &Dictionary, dict_g: &Dictionary) -> (DVector<f64>, DVector<f64>) {
        let combine = |atoms: &[SelectedAtom], d: &Dictionary| {
            let mut out = DVector::zeros(d.values.nrows());
            for a in atoms {
                out.axpy(a.coef, &d.values.column(a.index), 1.0);
            }
            out
        };
        (combine(&self.f_atoms, dict_f), combine(&self.g_atoms, dict_g))
    }

    /// `Σ|c_ψ|` and `Σ|c_φ|`, upper bounds on the atomic norms.
    pub fn coefficient_l1(&self) -> (f64, f64) {
        let l1 = |a: &[SelectedAtom]| a.iter().map(|s| s.coef.abs()).sum();
        (l1(&self.f_atoms), l1(&self.g_atoms))
    }
}

/// One iteration of [`run_afs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfsStep {
    /// `‖r_k‖⋆` at the start of the iteration.
    pub residual_norm: f64,
    /// `L(f_{k−1}, g_{k−1}; λ) = ‖r_k‖⋆²`.
    pub objective: f64,
    /// `‖Π_{S_k^f} r_k‖⋆`.
    pub alpha: f64,
    /// `‖Π_{S_k^g} r_k^{(g)}‖⋆`.
    pub beta: f64,
    pub f_selected: Option<usize>,
    pub g_selected: Option<usize>,
    /// Candidate scoring and cache maintenance work (multiply-adds).
    pub scan_ops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfsStop {
    Completed,
    ZeroResidual,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfsTrace {
    pub steps: Vec<AfsStep>,
    pub final_residual_norm: f64,
    pub stop: AfsStop,
}

fn check_dictionary(d: &Dictionary, block: Block, big_n: usize) -> Result<()> {
    if d.block != block {
        return Err(Error::invalid(format!("expected a {} dictionary", block.name())));
    }
    if d.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    if d.values.nrows() != big_n {
        return Err(Error::DimensionMismatch { expected: big_n, got: d.values.nrows() });
    }
    if d.pooled_norms().iter().any(|&v| v > 1.0 + 1e-9) {
        return Err(Error::invalid(format!("{} dictionary atoms must have pooled norm at most 1", block.name())));
    }
    Ok(())
}

struct BlockState {
    qr: QrState,
    selected: Vec<usize>,
    signs: Vec<f64>,
    coefs: Vec<f64>,
}

impl BlockState {
    fn new(embedded: DMatrix<f64>, eps: f64) -> Self {
        BlockState { qr: QrState::with_candidates(embedded, eps), selected: Vec::new(), signs: Vec::new(), coefs: Vec::new() }
    }

    /// Greedy selection followed by projection of `r` onto the block span.
    /// Returns the selected atom (if any) and the norm of the projection;
    /// `r` is replaced by its residual.
    fn step(&mut self, r: &mut DVector<f64>) -> (Option<usize>, f64) {
        let mut chosen = None;
        while let Some((j, corr)) = self.qr.best_candidate(r) {
            if self.qr.insert_candidate(j).is_ok() {
                self.selected.push(j);
                self.signs.push(if corr < 0.0 { -1.0 } else { 1.0 });
                self.coefs.push(0.0);
                chosen = Some(j);
                break;
            }
        }
        if self.qr.rank() == 0 {
            return (chosen, 0.0);
        }
        let proj = self.qr.project(r);
        for (c, d) in self.coefs.iter_mut().zip(proj.atom_coeffs.iter()) {
            *c += d;
        }
        *r -= &proj.fitted;
        (chosen, proj.q_coeffs.norm())
    }

    fn into_atoms(self, dict: &Dictionary) -> Vec<SelectedAtom> {
        self.selected
            .iter()
            .zip(self.signs)
            .zip(self.coefs)
            .map(|((&index, sign), coef)| SelectedAtom { index, atom: dict.atoms[index].clone(), sign, coef })
            .collect()
    }
}

/// Alternating forward selection for `K` iterations with `g₀ = 0`.
pub fn run_afs(
    ds: &Dataset,
    dict_f: &Dictionary,
    dict_g: &Dictionary,
    lambda: f64,
    k_max: usize,
    cfg: &AfsConfig,
) -> Result<(AfsModel, AfsTrace)> {
    if k_max == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let space = StarSpace::new(ds.n(), ds.m(), lambda)?;
    check_dictionary(dict_f, Block::F, space.total())?;
    check_dictionary(dict_g, Block::G, space.total())?;
    let embed_all = |d: &Dictionary, block: Block| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(space.embed_dim(), d.len());
        for j in 0..d.len() {
            let e = space.embed_atom(block, &d.values.column(j).into_owned())?;
            out.set_column(j, &e.0);
        }
        Ok(out)
    };
    let mut fb = BlockState::new(embed_all(dict_f, Block::F)?, cfg.eps_proj);
    let mut gb = BlockState::new(embed_all(dict_g, Block::G)?, cfg.eps_proj);
    let mut r = space.make_target(ds.y_labeled())?.0;
    let mut steps = Vec::new();
    let mut stop = AfsStop::Completed;

    for k in 1..=k_max {
        let rn = r.norm();
        if rn <= cfg.residual_tol {
            stop = AfsStop::ZeroResidual;
            break;
        }
        let ops0 = fb.qr.ops() + gb.qr.ops();
        let (f_sel, alpha) = fb.step(&mut r);
        if k == 1 && f_sel.is_none() {
            return Err(Error::NoEligibleAtom("f"));
        }
        let (g_sel, beta) = gb.step(&mut r);
        steps.push(AfsStep {
            residual_norm: rn,
            objective: rn * rn,
            alpha,
            beta,
            f_selected: f_sel,
            g_selected: g_sel,
            scan_ops: fb.qr.ops() + gb.qr.ops() - ops0,
        });
        if f_sel.is_none() && g_sel.is_none() {
            stop = AfsStop::Exhausted;
            break;
        }
    }
    let model = AfsModel {
        lambda,
        iterations: steps.len(),
        f_atoms: fb.into_atoms(dict_f),
        g_atoms: gb.into_atoms(dict_g),
    };
    Ok((model, AfsTrace { steps, final_residual_norm: r.norm(), stop }))
}

/// Refits the deployment coefficients on the selected f-atoms by ridge
/// regression of `(Y_L, g(Z_U))`, leaving `g` unchanged.
pub fn ridge_refit(
    ds: &Dataset,
    model: &AfsModel,
    dict_f: &Dictionary,
    dict_g: &Dictionary,
    alpha: f64,
) -> Result<AfsModel> {
    if model.f_atoms.is_empty() {
        return Err(Error::invalid("refit needs at least one selected f-atom"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha must be nonnegative"));
    }
    let (_, g_vals) = model.fitted(dict_f, dict_g);
    let (n, m) = (ds.n(), ds.m());
    let targets = vconcat(ds.y_labeled(), &g_vals.rows(n, m).into_owned());
    let cols: Vec<usize> = model.f_atoms.iter().map(|a| a.index).collect();
    let design = DMatrix::from_fn(n + m, cols.len(), |i, j| dict_f.values[(i, cols[j])]);
    let sol = weighted_ridge(
        &design,
        &targets,
        &DVector::from_element(n + m, 1.0),
        &DVector::from_element(cols.len(), alpha),
    )?;
    let mut out = model.clone();
    for (a, c) in out.f_atoms.iter_mut().zip(sol.x.iter()) {
        a.coef = *c;
    }
    Ok(out)
}
