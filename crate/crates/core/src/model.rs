//! Target densities expressed as potential energy `U(q) = -log p(q)` up to an
//! additive constant, with hand-derived gradients.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngKey;

pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn potential(&self, q: &[f64]) -> f64;

    fn gradient(&self, q: &[f64], grad: &mut [f64]);

    /// Potential and gradient in one pass. Models with shared intermediate
    /// work should override this.
    fn potential_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(q, grad);
        self.potential(q)
    }
}

impl<M: TargetModel + ?Sized> TargetModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, q: &[f64]) -> f64 {
        (**self).potential(q)
    }
    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        (**self).gradient(q, grad)
    }
    fn potential_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        (**self).potential_and_gradient(q, grad)
    }
}

/// Standard normal in `dim` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct StdNormal {
    dim: usize,
}

impl StdNormal {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        Ok(StdNormal { dim })
    }
}

impl TargetModel for StdNormal {
    fn dim(&self) -> usize {
        self.dim
    }
    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * q.iter().map(|x| x * x).sum::<f64>()
    }
    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(q);
    }
}

/// Zero-mean Gaussian with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    variance: Vec<f64>,
    precision: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(cov_diag: Vec<f64>) -> Result<Self> {
        if cov_diag.is_empty() {
            return Err(Error::InvalidModel("covariance diagonal is empty".into()));
        }
        if let Some(v) = cov_diag.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "variances must be positive and finite, got {v}"
            )));
        }
        let precision = cov_diag.iter().map(|v| 1.0 / v).collect();
        Ok(DiagGaussian {
            variance: cov_diag,
            precision,
        })
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }
}

impl TargetModel for DiagGaussian {
    fn dim(&self) -> usize {
        self.variance.len()
    }
    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * q
            .iter()
            .zip(&self.variance)
            .map(|(x, v)| x * x / v)
            .sum::<f64>()
    }
    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        for ((g, x), v) in grad.iter_mut().zip(q).zip(&self.variance) {
            *g = x / v;
        }
    }
}

/// Covariates and binary labels for logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegressionData {
    num_features: usize,
    /// Row-major `N x p`.
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LogisticRegressionData {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>, num_features: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidModel(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut x = Vec::with_capacity(rows.len() * num_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_features {
                return Err(Error::DimensionMismatch {
                    expected: num_features,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("row {i} has a non-finite entry")));
            }
            x.extend_from_slice(row);
        }
        if let Some(l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
            return Err(Error::InvalidModel(format!("label {l} is not 0 or 1")));
        }
        Ok(LogisticRegressionData {
            num_features,
            x,
            y: labels,
        })
    }

    /// Reads a CSV file with a header row; the last column is the label.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::InvalidData {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::Reader::from_path(path)?;
        let width = reader.headers()?.len();
        if width < 1 {
            return Err(bad("no columns".into()));
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            let (label, features) = values.split_last().ok_or_else(|| bad("empty row".into()))?;
            labels.push(*label);
            rows.push(features.to_vec());
        }
        Self::new(rows, labels, width - 1).map_err(|e| bad(e.to_string()))
    }

    /// Simulated dataset: standard normal covariates, weights drawn from the
    /// prior, labels drawn from the resulting Bernoulli likelihood.
    pub fn synthetic(num_points: usize, num_features: usize, key: RngKey) -> Self {
        let mut rng = key.stream();
        let weights: Vec<f64> = (0..num_features).map(|_| rng.sample(StandardNormal)).collect();
        let bias: f64 = rng.sample(StandardNormal);
        let mut x = Vec::with_capacity(num_points * num_features);
        let mut y = Vec::with_capacity(num_points);
        for _ in 0..num_points {
            let row: Vec<f64> = (0..num_features).map(|_| rng.sample(StandardNormal)).collect();
            let eta: f64 = bias + row.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
            let u: f64 = rng.random();
            y.push(if u < sigmoid(eta) { 1.0 } else { 0.0 });
            x.extend(row);
        }
        LogisticRegressionData {
            num_features,
            x,
            y,
        }
    }

    pub fn num_points(&self) -> usize {
        self.y.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.num_features..(i + 1) * self.num_features]
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Bayesian logistic regression with unit-normal priors on weights and bias.
/// Parameters are laid out as `(m_1, .., m_p, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    data: LogisticRegressionData,
}

impl LogisticRegression {
    pub fn new(data: LogisticRegressionData) -> Self {
        LogisticRegression { data }
    }

    pub fn data(&self) -> &LogisticRegressionData {
        &self.data
    }

    fn linear(&self, q: &[f64], i: usize) -> f64 {
        let p = self.data.num_features;
        q[p] + self.data.row(i).iter().zip(&q[..p]).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl TargetModel for LogisticRegression {
    fn dim(&self) -> usize {
        self.data.num_features + 1
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let prior = 0.5 * q.iter().map(|v| v * v).sum::<f64>();
        let loglik: f64 = (0..self.data.num_points())
            .map(|i| {
                let eta = self.linear(q, i);
                self.data.y[i] * eta - softplus(eta)
            })
            .sum();
        prior - loglik
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        self.potential_and_gradient(q, grad);
    }

    fn potential_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.data.num_features;
        grad.copy_from_slice(q);
        let prior = 0.5 * q.iter().map(|v| v * v).sum::<f64>();
        let mut loglik = 0.0;
        for i in 0..self.data.num_points() {
            let eta = self.linear(q, i);
            let y = self.data.y[i];
            loglik += y * eta - softplus(eta);
            let resid = y - sigmoid(eta);
            for (g, x) in grad[..p].iter_mut().zip(self.data.row(i)) {
                *g -= resid * x;
            }
            grad[p] -= resid;
        }
        prior - loglik
    }
}

/// Neal's funnel over `(v, x_1, .., x_{dim-1})` with `v ~ N(0, 9)` and
/// `x_i | v ~ N(0, e^v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Funnel {
    dim: usize,
}

impl Funnel {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidModel("funnel needs at least 2 dimensions".into()));
        }
        Ok(Funnel { dim })
    }
}

impl TargetModel for Funnel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let v = q[0];
        let ss: f64 = q[1..].iter().map(|x| x * x).sum();
        v * v / 18.0 + 0.5 * (self.dim - 1) as f64 * v + 0.5 * (-v).exp() * ss
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        let v = q[0];
        let scale = (-v).exp();
        let ss: f64 = q[1..].iter().map(|x| x * x).sum();
        grad[0] = v / 9.0 + 0.5 * (self.dim - 1) as f64 - 0.5 * scale * ss;
        for (g, x) in grad[1..].iter_mut().zip(&q[1..]) {
            *g = x * scale;
        }
    }
}

/// The models shipped with the sampler, behind one concrete type.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinModel {
    StdNormal(StdNormal),
    Gaussian(DiagGaussian),
    Logistic(LogisticRegression),
    Funnel(Funnel),
}

impl BuiltinModel {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinModel::StdNormal(_) => "std_normal",
            BuiltinModel::Gaussian(_) => "gaussian",
            BuiltinModel::Logistic(_) => "logistic",
            BuiltinModel::Funnel(_) => "funnel",
        }
    }

    fn inner(&self) -> &dyn TargetModel {
        match self {
            BuiltinModel::StdNormal(m) => m,
            BuiltinModel::Gaussian(m) => m,
            BuiltinModel::Logistic(m) => m,
            BuiltinModel::Funnel(m) => m,
        }
    }
}

impl TargetModel for BuiltinModel {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn potential(&self, q: &[f64]) -> f64 {
        self.inner().potential(q)
    }
    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        self.inner().gradient(q, grad)
    }
    fn potential_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.inner().potential_and_gradient(q, grad)
    }
}

pub fn std_normal_model(dim: usize) -> Result<BuiltinModel> {
    StdNormal::new(dim).map(BuiltinModel::StdNormal)
}

pub fn gaussian_model(cov_diag: Vec<f64>) -> Result<BuiltinModel> {
    DiagGaussian::new(cov_diag).map(BuiltinModel::Gaussian)
}

pub fn logistic_regression_model(data: LogisticRegressionData) -> BuiltinModel {
    BuiltinModel::Logistic(LogisticRegression::new(data))
}

pub fn funnel_model(dim: usize) -> Result<BuiltinModel> {
    Funnel::new(dim).map(BuiltinModel::Funnel)
}

/// JSON description of a model:
/// `{"model": name, "params": {...}, "data_path": optional}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub model: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_path: Option<PathBuf>,
}

impl ModelDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let mut desc = Self::from_json(&std::fs::read_to_string(path)?)?;
        // Relative data paths are resolved against the descriptor's directory.
        if let (Some(data), Some(dir)) = (&desc.data_path, path.parent()) {
            if data.is_relative() {
                desc.data_path = Some(dir.join(data));
            }
        }
        Ok(desc)
    }

    fn usize_param(&self, name: &str, default: usize) -> Result<usize> {
        match self.params.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::InvalidModel(format!("param `{name}` must be a non-negative integer"))),
        }
    }

    pub fn build(&self) -> Result<BuiltinModel> {
        match self.model.as_str() {
            "std_normal" => std_normal_model(self.usize_param("dim", 2)?),
            "gaussian" => {
                let cov = match self.params.get("cov_diag") {
                    Some(v) => serde_json::from_value::<Vec<f64>>(v.clone())?,
                    None => {
                        return Err(Error::InvalidModel(
                            "gaussian model needs `cov_diag`".into(),
                        ))
                    }
                };
                gaussian_model(cov)
            }
            "logistic" => {
                let data = match &self.data_path {
                    Some(path) => LogisticRegressionData::from_csv(path)?,
                    None => LogisticRegressionData::synthetic(
                        self.usize_param("num_points", 100)?,
                        self.usize_param("num_features", 3)?,
                        RngKey::from_seed(self.usize_param("data_seed", 0)? as u64),
                    ),
                };
                Ok(logistic_regression_model(data))
            }
            "funnel" => funnel_model(self.usize_param("dim", 10)?),
            other => Err(Error::InvalidModel(format!("unknown model `{other}`"))),
        }
    }
}

/// Central finite-difference gradient of the potential.
pub fn fd_gradient<M: TargetModel + ?Sized>(model: &M, q: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = q.to_vec();
    (0..q.len())
        .map(|i| {
            probe[i] = q[i] + h;
            let up = model.potential(&probe);
            probe[i] = q[i] - h;
            let down = model.potential(&probe);
            probe[i] = q[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grad_of(m: &impl TargetModel, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; m.dim()];
        m.gradient(q, &mut g);
        g
    }

    #[test]
    fn std_normal_examples() {
        let m = std_normal_model(2).unwrap();
        assert_eq!(m.potential(&[0.0, 0.0]), 0.0);
        assert_eq!(grad_of(&m, &[0.0, 0.0]), vec![0.0, 0.0]);
        let m = std_normal_model(1).unwrap();
        assert_eq!(m.potential(&[2.0]), 2.0);
        assert_eq!(grad_of(&m, &[2.0]), vec![2.0]);
        let m = std_normal_model(3).unwrap();
        assert_eq!(m.potential(&[1.0, -1.0, 2.0]), 3.0);
        assert_eq!(grad_of(&m, &[1.0, -1.0, 2.0]), vec![1.0, -1.0, 2.0]);
        assert!(std_normal_model(0).is_err());
    }

    #[test]
    fn gaussian_examples() {
        let m = gaussian_model(vec![1.0, 1.0]).unwrap();
        assert_eq!(m.potential(&[1.0, 1.0]), 1.0);
        let m = gaussian_model(vec![4.0]).unwrap();
        assert_eq!(m.potential(&[2.0]), 0.5);
        assert_eq!(grad_of(&m, &[2.0]), vec![0.5]);
        let m = gaussian_model(vec![100.0, 0.01]).unwrap();
        assert_abs_diff_eq!(m.potential(&[10.0, 0.1]), 1.0, epsilon = 1e-12);
        assert!(gaussian_model(vec![1.0, 0.0]).is_err());
        assert!(gaussian_model(vec![-2.0]).is_err());
    }

    #[test]
    fn logistic_examples() {
        let empty = LogisticRegressionData::new(vec![], vec![], 1).unwrap();
        let m = logistic_regression_model(empty);
        assert_eq!(m.potential(&[0.0, 0.0]), 0.0);

        let one = LogisticRegressionData::new(vec![vec![0.0]], vec![1.0], 1).unwrap();
        let m = logistic_regression_model(one);
        assert_abs_diff_eq!(m.potential(&[0.0, 0.0]), std::f64::consts::LN_2, epsilon = 1e-12);
        // Closed form: dU/db = b - (y - sigmoid(eta)) = -(1 - 0.5).
        let g = grad_of(&m, &[0.0, 0.0]);
        assert_abs_diff_eq!(g[1], -0.5, epsilon = 1e-15);
        let fd = fd_gradient(&m, &[0.0, 0.0], 1e-5);
        assert_abs_diff_eq!(fd[1], g[1], epsilon = 1e-6);
        assert_abs_diff_eq!(fd[0], g[0], epsilon = 1e-6);
    }

    #[test]
    fn logistic_rejects_bad_data() {
        assert!(LogisticRegressionData::new(vec![vec![1.0]], vec![2.0], 1).is_err());
        assert!(LogisticRegressionData::new(vec![vec![f64::NAN]], vec![1.0], 1).is_err());
        assert!(LogisticRegressionData::new(vec![vec![1.0, 2.0]], vec![1.0], 1).is_err());
    }

    #[test]
    fn logistic_stable_for_large_logits() {
        let d = LogisticRegressionData::new(vec![vec![1000.0]], vec![0.0], 1).unwrap();
        let m = logistic_regression_model(d);
        let u = m.potential(&[1.0, 0.0]);
        assert!(u.is_finite());
        assert_abs_diff_eq!(u, 0.5 + 1000.0, epsilon = 1e-9);
    }

    #[test]
    fn fd_examples() {
        let m = std_normal_model(2).unwrap();
        let g = fd_gradient(&m, &[1.0, 2.0], 1e-5);
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-8);
        let m = gaussian_model(vec![4.0]).unwrap();
        assert_abs_diff_eq!(fd_gradient(&m, &[2.0], 1e-5)[0], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn logistic_invariant_under_row_permutation() {
        let data = LogisticRegressionData::synthetic(40, 3, RngKey::from_seed(9));
        let rows: Vec<Vec<f64>> = (0..40).map(|i| data.row(i).to_vec()).collect();
        let mut order: Vec<usize> = (0..40).collect();
        order.reverse();
        order.swap(3, 17);
        let perm = LogisticRegressionData::new(
            order.iter().map(|&i| rows[i].clone()).collect(),
            order.iter().map(|&i| data.y[i]).collect(),
            3,
        )
        .unwrap();
        let a = logistic_regression_model(data);
        let b = logistic_regression_model(perm);
        let q = [0.3, -1.2, 0.8, 0.1];
        let (ua, ub) = (a.potential(&q), b.potential(&q));
        assert!((ua - ub).abs() <= 1e-12 * ua.abs().max(1.0));
    }

    #[test]
    fn funnel_gradient_matches_fd_at_origin() {
        let m = funnel_model(10).unwrap();
        let q = vec![0.5; 10];
        let g = grad_of(&m, &q);
        let fd = fd_gradient(&m, &q, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn descriptor_builds_models() {
        let d = ModelDescriptor::from_json(r#"{"model":"std_normal","params":{"dim":4}}"#).unwrap();
        assert_eq!(d.build().unwrap().dim(), 4);
        let d = ModelDescriptor::from_json(r#"{"model":"gaussian","params":{"cov_diag":[100,0.01]}}"#)
            .unwrap();
        assert_eq!(d.build().unwrap().dim(), 2);
        let d = ModelDescriptor::from_json(r#"{"model":"logistic","params":{"num_features":2,"num_points":10}}"#)
            .unwrap();
        assert_eq!(d.build().unwrap().dim(), 3);
        let d = ModelDescriptor::from_json(r#"{"model":"funnel"}"#).unwrap();
        assert_eq!(d.build().unwrap().dim(), 10);
        let d = ModelDescriptor::from_json(r#"{"model":"banana"}"#).unwrap();
        assert!(d.build().is_err());
    }

    #[test]
    fn csv_ingestion_uses_last_column_as_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "a,b,label\n0.5,1.0,1\n-0.2,0.3,0\n").unwrap();
        let data = LogisticRegressionData::from_csv(&path).unwrap();
        assert_eq!(data.num_features(), 2);
        assert_eq!(data.num_points(), 2);
        assert_eq!(data.y, vec![1.0, 0.0]);

        std::fs::write(&path, "a,label\n0.5,3\n").unwrap();
        assert!(LogisticRegressionData::from_csv(&path).is_err());
    }
}
