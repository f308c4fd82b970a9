// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_trainable, class_weights, logistic, ClassWeighting};
use crate::error::{Error, Result};
use crate::phonofeatures::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub class_weighting: ClassWeighting,
    /// Penalty on the standardized coefficients; the intercept is free.
    pub l2: f64,
    pub max_iter: usize,
    /// Convergence threshold on the max absolute gradient entry.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            class_weighting: ClassWeighting::Balanced,
            l2: 1e-3,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// Logistic model on standardized inputs. Columns with zero spread get
/// scale 0 and are ignored at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut z = self.intercept;
        for j in 0..self.coefficients.len() {
            if self.scale[j] > 0.0 {
                z += self.coefficients[j] * (x[j] - self.center[j]) / self.scale[j];
            }
        }
        z
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        logistic(self.decision(x))
    }
}

/// Weighted mean log-loss plus `l2 / 2 * |beta|^2`, over parameters
/// `[intercept, beta...]` on the standardized design.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    z: Vec<Vec<f64>>,
    y: Vec<f64>,
    w: Vec<f64>,
    wsum: f64,
    l2: f64,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl LogisticObjective {
    pub fn new(m: &FeatureMatrix, params: &LogisticParams) -> Result<Self> {
        check_trainable(m)?;
        let w = class_weights(&m.labels, params.class_weighting);
        let wsum: f64 = w.iter().sum();
        let d = m.n_cols();
        let mut center = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for j in 0..d {
            let mu = (0..m.n_rows()).map(|i| w[i] * m.value(i, j)).sum::<f64>() / wsum;
            let var = (0..m.n_rows())
                .map(|i| w[i] * (m.value(i, j) - mu).powi(2))
                .sum::<f64>()
                / wsum;
            center[j] = mu;
            scale[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 0.0 };
        }
        let z = m
            .rows()
            .map(|r| {
                (0..d)
                    .map(|j| if scale[j] > 0.0 { (r[j] - center[j]) / scale[j] } else { 0.0 })
                    .collect()
            })
            .collect();
        let y = m.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        Ok(LogisticObjective { z, y, w, wsum, l2: params.l2, center, scale })
    }

    pub fn dim(&self) -> usize {
        self.center.len() + 1
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        theta[0] + self.z[i].iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut loss = 0.0;
        for i in 0..self.z.len() {
            let f = self.margin(theta, i);
            let softplus = f.max(0.0) + (-f.abs()).exp().ln_1p();
            loss += self.w[i] * (softplus - self.y[i] * f);
        }
        let penalty: f64 = theta[1..].iter().map(|b| b * b).sum();
        loss / self.wsum + 0.5 * self.l2 * penalty
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for i in 0..self.z.len() {
            let r = self.w[i] * (logistic(self.margin(theta, i)) - self.y[i]) / self.wsum;
            g[0] += r;
            for (gj, zj) in g[1..].iter_mut().zip(&self.z[i]) {
                *gj += r * zj;
            }
        }
        for (gj, b) in g[1..].iter_mut().zip(&theta[1..]) {
            *gj += self.l2 * b;
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let p = self.dim();
        let mut h = DMatrix::zeros(p, p);
        let mut row = vec![1.0; p];
        for i in 0..self.z.len() {
            let q = logistic(self.margin(theta, i));
            let s = self.w[i] * q * (1.0 - q) / self.wsum;
            row[1..].copy_from_slice(&self.z[i]);
            for a in 0..p {
                let sa = s * row[a];
                for b in a..p {
                    h[(a, b)] += sa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
            if a > 0 {
                h[(a, a)] += self.l2;
            }
        }
        h
    }
}

/// Newton's method with backtracking line search.
pub fn train_logistic(m: &FeatureMatrix, params: &LogisticParams) -> Result<LinearModel> {
    if params.l2 <= 0.0 || !params.l2.is_finite() {
        return Err(Error::Config("l2 must be a positive number".into()));
    }
    let obj = LogisticObjective::new(m, params)?;
    let p = obj.dim();
    let mut theta = vec![0.0; p];
    let mut f = obj.value(&theta);
    for _ in 0..params.max_iter {
        let g = obj.gradient(&theta);
        if g.iter().fold(0.0f64, |a, v| a.max(v.abs())) < params.tol {
            break;
        }
        let mut h = obj.hessian(&theta);
        let gv = DVector::from_vec(g.clone());
        let step = loop {
            if let Some(ch) = h.clone().cholesky() {
                break ch.solve(&gv);
            }
            let jitter = 1e-8 * (1.0 + h.diagonal().amax());
            for a in 0..p {
                h[(a, a)] += jitter;
            }
        };
        let slope: f64 = -gv.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let fc = obj.value(&cand);
            if fc <= f + 1e-4 * t * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("logistic fit diverged".into()));
    }
    Ok(LinearModel {
        feature_names: m.names.clone(),
        intercept: theta[0],
        coefficients: theta[1..].to_vec(),
        center: obj.center,
        scale: obj.scale,
    })
}
