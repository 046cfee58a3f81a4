//! Weighted geometry of the coupled objective.
//!
//! A pair `u = (u1, u2)` of functions evaluated on the `N` sample points
//! (labeled first) carries the semi-inner product
//!
//! ```text
//! ⟨u, v⟩⋆ = (1/N) Σ_L u1·v1 + (1/N) Σ_U (u1 − u2)(v1 − v2) + (λ/N) Σ_L u2·v2
//! ```
//!
//! Its null space is annihilated by the embedding into `R^{2n+m}` with rows
//! ordered as labeled-f (`n`), unlabeled agreement (`m`), labeled-g (`n`).
//! In that embedding the dot product equals `⟨·,·⟩⋆`, so projections in the
//! quotient space are ordinary Euclidean least squares.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarSpace {
    n: usize,
    m: usize,
    lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    F,
    G,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::F => "f",
            Block::G => "g",
        }
    }
}

/// Row weights of the three empirical measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowWeights {
    pub labeled_f: f64,
    pub unlabeled: f64,
    pub labeled_g: f64,
}

/// A pair of sample-evaluated functions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedVec {
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
}

impl PairedVec {
    pub fn new(u1: DVector<f64>, u2: DVector<f64>) -> Self {
        PairedVec { u1, u2 }
    }
}

/// Image of a [`PairedVec`] in `R^{2n+m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedVec(pub DVector<f64>);

impl EmbeddedVec {
    pub fn dot(&self, other: &EmbeddedVec) -> f64 {
        self.0.dot(&other.0)
    }
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

impl StarSpace {
    pub fn new(n: usize, m: usize, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("star space needs at least one labeled point"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(StarSpace { n, m, lambda })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn total(&self) -> usize {
        self.n + self.m
    }
    pub fn embed_dim(&self) -> usize {
        2 * self.n + self.m
    }

    pub fn weights(&self) -> RowWeights {
        let big_n = self.total() as f64;
        RowWeights {
            labeled_f: 1.0 / big_n,
            unlabeled: 1.0 / big_n,
            labeled_g: self.lambda / big_n,
        }
    }

    /// `max{1, √λ}`, the bound on embedded norms of unit dictionary atoms.
    pub fn atom_norm_bound(&self) -> f64 {
        self.lambda.sqrt().max(1.0)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.total() {
            return Err(Error::DimensionMismatch {
                expected: self.total(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn star_dot(&self, u: &PairedVec, v: &PairedVec) -> Result<f64> {
        for len in [u.u1.len(), u.u2.len(), v.u1.len(), v.u2.len()] {
            self.check(len)?;
        }
        let w = self.weights();
        let (n, big_n) = (self.n, self.total());
        let mut labeled_f = 0.0;
        let mut labeled_g = 0.0;
        for i in 0..n {
            labeled_f += u.u1[i] * v.u1[i];
            labeled_g += u.u2[i] * v.u2[i];
        }
        let mut agree = 0.0;
        for j in n..big_n {
            agree += (u.u1[j] - u.u2[j]) * (v.u1[j] - v.u2[j]);
        }
        Ok(w.labeled_f * labeled_f + w.unlabeled * agree + w.labeled_g * labeled_g)
    }

    pub fn star_norm(&self, u: &PairedVec) -> Result<f64> {
        Ok(self.star_dot(u, u)?.max(0.0).sqrt())
    }

    pub fn embed(&self, u: &PairedVec) -> Result<EmbeddedVec> {
        self.check(u.u1.len())?;
        self.check(u.u2.len())?;
        let (n, m) = (self.n, self.m);
        let s = 1.0 / (self.total() as f64).sqrt();
        let sl = self.lambda.sqrt() * s;
        let mut e = DVector::zeros(self.embed_dim());
        for i in 0..n {
            e[i] = u.u1[i] * s;
            e[n + m + i] = u.u2[i] * sl;
        }
        for j in 0..m {
            e[n + j] = (u.u1[n + j] - u.u2[n + j]) * s;
        }
        Ok(EmbeddedVec(e))
    }

    /// Embeds `(ψ, 0)` for the f block or `(0, φ)` for the g block.
    pub fn embed_atom(&self, block: Block, values: &DVector<f64>) -> Result<EmbeddedVec> {
        self.check(values.len())?;
        let (n, m) = (self.n, self.m);
        let s = 1.0 / (self.total() as f64).sqrt();
        let mut e = DVector::zeros(self.embed_dim());
        match block {
            Block::F => {
                for i in 0..n + m {
                    e[i] = values[i] * s;
                }
            }
            Block::G => {
                let sl = self.lambda.sqrt() * s;
                for j in 0..m {
                    e[n + j] = -values[n + j] * s;
                }
                for i in 0..n {
                    e[n + m + i] = values[i] * sl;
                }
            }
        }
        Ok(EmbeddedVec(e))
    }

    /// Embedded target `(Y, Y)`; unlabeled rows are exactly zero whatever
    /// the (unobserved) responses there.
    pub fn make_target(&self, y_labeled: &DVector<f64>) -> Result<EmbeddedVec> {
        if y_labeled.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: y_labeled.len(),
            });
        }
        let (n, m) = (self.n, self.m);
        let s = 1.0 / (self.total() as f64).sqrt();
        let sl = self.lambda.sqrt() * s;
        let mut e = DVector::zeros(self.embed_dim());
        for i in 0..n {
            e[i] = y_labeled[i] * s;
            e[n + m + i] = y_labeled[i] * sl;
        }
        Ok(EmbeddedVec(e))
    }

    /// The penalized coupled objective `L(f, g; λ)` from values of `f` and
    /// `g` on all `N` points.
    pub fn objective_value(
        &self,
        f_vals: &DVector<f64>,
        g_vals: &DVector<f64>,
        y_labeled: &DVector<f64>,
    ) -> Result<f64> {
        self.check(f_vals.len())?;
        self.check(g_vals.len())?;
        if y_labeled.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: y_labeled.len(),
            });
        }
        let n = self.n;
        let mut fit_f = 0.0;
        let mut fit_g = 0.0;
        for i in 0..n {
            fit_f += (y_labeled[i] - f_vals[i]).powi(2);
            fit_g += (y_labeled[i] - g_vals[i]).powi(2);
        }
        let mut agree = 0.0;
        for j in n..self.total() {
            agree += (g_vals[j] - f_vals[j]).powi(2);
        }
        Ok((fit_f + agree + self.lambda * fit_g) / self.total() as f64)
    }
}
