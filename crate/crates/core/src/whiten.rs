//! Whitening of an embedding set: zero mean, identity covariance.
//!
//! With `K = (1/N) (X - mu)^T (X - mu) = U A U^T`, the whitening matrix is
//! `W = U A^{-1/2}` and each row becomes `z = (x - mu) W`.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

pub const DEFAULT_EPS_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WhitenModel {
    mu: Array1<f64>,
    w: Array2<f64>,
    singular_values: Array1<f64>,
    eps_rel: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    mu: Vec<f64>,
    w: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
    eps_rel: f64,
}

impl WhitenModel {
    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    /// Covariance eigenvalues before flooring, non-increasing.
    pub fn singular_values(&self) -> &Array1<f64> {
        &self.singular_values
    }

    pub fn eps_rel(&self) -> f64 {
        self.eps_rel
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Number of eigenvalues raised to the regularisation floor.
    pub fn floored(&self) -> usize {
        let floor = self.eps_rel * self.singular_values[0];
        self.singular_values.iter().filter(|&&a| a < floor).count()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            mu: self.mu.to_vec(),
            w: self.w.rows().into_iter().map(|r| r.to_vec()).collect(),
            singular_values: self.singular_values.to_vec(),
            eps_rel: self.eps_rel,
        };
        serde_json::to_string(&file).expect("model values are finite")
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(raw).map_err(|e| Error::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })?;
        let d = file.mu.len();
        if d == 0
            || file.singular_values.len() != d
            || file.w.len() != d
            || file.w.iter().any(|r| r.len() != d)
        {
            return Err(Error::ShapeMismatch(format!(
                "whitening model must be consistent in dimension {d}"
            )));
        }
        let w = Array2::from_shape_vec((d, d), file.w.into_iter().flatten().collect())
            .expect("rows checked");
        Ok(WhitenModel {
            mu: Array1::from(file.mu),
            w,
            singular_values: Array1::from(file.singular_values),
            eps_rel: file.eps_rel,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WhitenModel::from_json(&raw)
    }
}

/// Population covariance (1/N) of the rows of `x` about `mu`.
pub fn covariance(x: &Array2<f64>, mu: &Array1<f64>) -> Array2<f64> {
    let centered = x - mu;
    centered.t().dot(&centered) / x.nrows() as f64
}

/// Fits mean and whitening matrix on `set`. Eigenvalues below
/// `eps_rel * largest` are raised to that floor before inversion.
pub fn fit(set: &EmbeddingSet, eps_rel: f64) -> Result<WhitenModel> {
    let n = set.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if !(eps_rel >= 0.0 && eps_rel.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "eps_rel must be non-negative, got {eps_rel}"
        )));
    }
    let x = set.matrix();
    let mu = x.mean_axis(Axis(0)).expect("n >= 2");
    let k = covariance(x, &mu);
    let eig = symmetric_eigen(&k);
    let values = eig.values.mapv(|a| a.max(0.0));
    let largest = values[0];
    if largest <= 0.0 {
        return Err(Error::DegenerateCovariance);
    }
    let floor = eps_rel * largest;
    let inv_sqrt = values.mapv(|a| 1.0 / a.max(floor).sqrt());
    let w = &eig.vectors * &inv_sqrt.view().insert_axis(Axis(0));
    Ok(WhitenModel {
        mu,
        w,
        singular_values: values,
        eps_rel,
    })
}

/// `z_i = (x_i - mu) W`; labels and texts pass through.
pub fn transform(model: &WhitenModel, set: &EmbeddingSet) -> Result<EmbeddingSet> {
    if set.dim() != model.dim() {
        let id = set.ids().first().cloned().unwrap_or_default();
        return Err(Error::DimensionMismatch(id));
    }
    let z = (set.matrix() - &model.mu).dot(&model.w);
    set.with_matrix(z)
}
