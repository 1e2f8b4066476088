//! Subspace method: principal axes of the training data split the space into
//! a normal and a residual part; a sample is anomalous when its residual
//! energy exceeds the Q-statistic threshold.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{RoutingMatrix, TrafficMatrix};
use crate::detector::ScoreSeries;
use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.85;
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

/// How many axes span the normal subspace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Components {
    Fixed(usize),
    /// Smallest `k` whose axes capture at least this fraction of the variance.
    VarianceFraction(f64),
}

impl Default for Components {
    fn default() -> Self {
        Components::VarianceFraction(DEFAULT_VARIANCE_FRACTION)
    }
}

/// Which measurements feed the subspace method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaInput {
    Links,
    Flows,
}

impl PcaInput {
    pub fn method_name(self) -> &'static str {
        match self {
            PcaInput::Links => "pca-links",
            PcaInput::Flows => "pca-flows",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit-norm axes ordered by decreasing variance.
    pub axes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    pub confidence: f64,
    /// Residual eigenvalue power sums `phi_i = sum_{j >= k} lambda_j^i`.
    pub phi: [f64; 3],
    pub q_threshold: f64,
}

/// Jackson-Mudholkar bound on residual energy at `confidence`.
pub fn q_threshold(phi: [f64; 3], confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Contract(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let [p1, p2, p3] = phi;
    if p1 <= 0.0 || p2 <= 0.0 {
        return Ok(0.0);
    }
    let h0 = 1.0 - 2.0 * p1 * p3 / (3.0 * p2 * p2);
    let c = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(confidence);
    let inner = c * (2.0 * p2 * h0 * h0).sqrt() / p1 + 1.0 + p2 * h0 * (h0 - 1.0) / (p1 * p1);
    Ok(p1 * inner.max(0.0).powf(1.0 / h0))
}

/// Fits the subspace model on `rows` samples of `dims` values (row-major).
pub fn pca_fit(data: &[f64], dims: usize, components: Components, confidence: f64) -> Result<PcaModel> {
    if dims < 2 || !data.len().is_multiple_of(dims) {
        return Err(Error::Contract(format!("{} values do not form rows of {dims}", data.len())));
    }
    let rows = data.len() / dims;
    if rows < dims || rows < 2 {
        return Err(Error::Contract(format!("PCA needs at least {dims} samples, got {rows}")));
    }
    let mut mean = vec![0.0; dims];
    for r in data.chunks(dims) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let centered = DMatrix::from_fn(rows, dims, |i, j| data[i * dims + j] - mean[j]);
    let cov = centered.tr_mul(&centered) / (rows as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let axes: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let col = eig.eigenvectors.column(i);
            // Fix the sign so the largest-magnitude entry is positive.
            let pivot = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            let s = if pivot < 0.0 { -1.0 } else { 1.0 };
            col.iter().map(|v| v * s).collect()
        })
        .collect();

    let total: f64 = eigenvalues.iter().sum();
    let mut k = match components {
        Components::Fixed(k) => k,
        Components::VarianceFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Contract(format!("variance fraction must lie in (0, 1], got {f}")));
            }
            let mut acc = 0.0;
            let mut k = 0;
            while k < dims && (total == 0.0 || acc < f * total) {
                acc += eigenvalues[k];
                k += 1;
            }
            k.max(1)
        }
    };
    let tol = eigenvalues[0].max(f64::MIN_POSITIVE) * 1e-12 * dims as f64;
    let rank = eigenvalues.iter().filter(|&&l| l > tol).count();
    let cap = (dims - 1).min(rank.max(1));
    if k > cap {
        log::warn!("normal subspace of {k} axes reduced to {cap} (rank {rank} of {dims})");
        k = cap;
    }
    let mut phi = [0.0; 3];
    for &l in &eigenvalues[k..] {
        phi[0] += l;
        phi[1] += l * l;
        phi[2] += l * l * l;
    }
    let q = q_threshold(phi, confidence)?;
    Ok(PcaModel { mean, axes, eigenvalues, k, confidence, phi, q_threshold: q })
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// `(‖P^T(y - mean)‖², ‖(I - P P^T)(y - mean)‖²)` for one sample.
    pub fn energies(&self, y: &[f64]) -> (f64, f64) {
        let c: Vec<f64> = y.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut resid = c.clone();
        let mut proj = 0.0;
        for axis in &self.axes[..self.k] {
            let dot: f64 = axis.iter().zip(&c).map(|(a, v)| a * v).sum();
            proj += dot * dot;
            for (r, a) in resid.iter_mut().zip(axis) {
                *r -= dot * a;
            }
        }
        (proj, resid.iter().map(|r| r * r).sum())
    }

    /// Squared prediction error of every row.
    pub fn spe(&self, data: &[f64]) -> Result<Vec<f64>> {
        let d = self.dims();
        if !data.len().is_multiple_of(d) {
            return Err(Error::Contract(format!("rows of {} values expected", d)));
        }
        Ok(data.chunks(d).map(|r| self.energies(r).1).collect())
    }

    /// Rows whose residual energy exceeds the Q threshold.
    pub fn detect(&self, data: &[f64]) -> Result<Vec<usize>> {
        Ok(self.spe(data)?.iter().enumerate().filter(|(_, &e)| e > self.q_threshold).map(|(i, _)| i).collect())
    }

    /// Same model with the threshold recomputed at another confidence.
    pub fn with_confidence(&self, confidence: f64) -> Result<PcaModel> {
        Ok(PcaModel { confidence, q_threshold: q_threshold(self.phi, confidence)?, ..self.clone() })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Network-wide score series: residual energy over the threshold.
    pub fn score_series(&self, data: &[f64], method: &str) -> Result<ScoreSeries> {
        if !(self.q_threshold > 0.0) {
            return Err(Error::Calibration("Q threshold is zero: residual subspace is empty".into()));
        }
        let scores = self.spe(data)?.into_iter().map(|e| e / self.q_threshold).collect();
        Ok(ScoreSeries { flow: None, method: method.to_string(), offset: 0, scores, delta: 1.0 })
    }
}

/// Row-major `T x dims` input for the chosen variant.
pub fn pca_input(tm: &TrafficMatrix, routing: &RoutingMatrix, input: PcaInput) -> Result<(Vec<f64>, usize)> {
    match input {
        PcaInput::Links => Ok((routing.link_loads(tm)?, routing.n_links())),
        PcaInput::Flows => {
            let (m, t_len) = (tm.n_flows(), tm.n_samples());
            let mut out = vec![0.0; m * t_len];
            for f in 0..m {
                for (t, v) in tm.flow(f).iter().enumerate() {
                    out[t * m + f] = *v;
                }
            }
            Ok((out, m))
        }
    }
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::diff::seeded_rng;

    #[test]
    fn line_data_has_zero_residual() {
        let data: Vec<f64> = (0..50).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
        let m = pca_fit(&data, 2, Components::VarianceFraction(0.85), 0.999).unwrap();
        assert_eq!(m.k, 1);
        let a = &m.axes[0];
        let s = 5f64.sqrt();
        assert!((a[0] - 1.0 / s).abs() < 1e-12 && (a[1] - 2.0 / s).abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-9);
        assert!(m.detect(&m.mean).unwrap().is_empty());
    }

    #[test]
    fn isotropic_eigenvalues_near_one() {
        let mut rng = seeded_rng(4);
        let data: Vec<f64> = (0..10_000 * 3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = pca_fit(&data, 3, Components::Fixed(1), 0.999).unwrap();
        for l in &m.eigenvalues {
            assert!((l - 1.0).abs() < 0.06, "eigenvalue {l}");
        }
    }

    #[test]
    fn energy_split_and_orthonormal_axes() {
        let mut rng = seeded_rng(8);
        let data: Vec<f64> = (0..400 * 5).map(|i| Distribution::<f64>::sample(&StandardNormal, &mut rng) * (1 + i % 5) as f64).collect();
        let m = pca_fit(&data, 5, Components::Fixed(2), 0.99).unwrap();
        for (i, a) in m.axes.iter().enumerate() {
            for (j, b) in m.axes.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
        for row in data.chunks(5).take(20) {
            let (p, r) = m.energies(row);
            let total: f64 = row.iter().zip(&m.mean).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(((p + r) - total).abs() <= 1e-9 * total);
        }
    }

    #[test]
    fn threshold_grows_with_confidence() {
        let phi = [3.0, 2.0, 1.5];
        let lo = q_threshold(phi, 0.9).unwrap();
        let hi = q_threshold(phi, 0.999).unwrap();
        assert!(hi > lo && lo > 0.0);
        assert!(q_threshold(phi, 1.0).is_err());
        assert_eq!(q_threshold([0.0; 3], 0.99).unwrap(), 0.0);
    }

    #[test]
    fn k_is_capped_below_dims() {
        let data: Vec<f64> = (0..30).flat_map(|i| [i as f64, (i * i) as f64 % 7.0]).collect();
        let m = pca_fit(&data, 2, Components::Fixed(5), 0.99).unwrap();
        assert_eq!(m.k, 1);
    }
}
