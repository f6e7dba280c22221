//! Principal component analysis on the sample covariance matrix.

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching eigenvectors as columns of `v`
/// (`v[row][col]`), unsorted.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Unit loading vectors, strongest component first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub n_components: usize,
    pub mean: Vec<f64>,
}

impl PcaResult {
    pub fn total_ratio(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row.iter().zip(&self.mean)).map(|(l, (x, m))| l * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores) {
            for (o, l) in out.iter_mut().zip(c) {
                *o += s * l;
            }
        }
        out
    }
}

pub fn covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; dim]; dim];
    for r in rows {
        for i in 0..dim {
            let di = r[i] - mean[i];
            for j in i..dim {
                cov[i][j] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    (mean, cov)
}

/// Flip `v` so its largest-magnitude entry (first one on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pca(rows: &[Vec<f64>], n_components: usize) -> Result<PcaResult, StatsError> {
    if rows.len() < 2 {
        return Err(StatsError::Domain(format!("PCA needs at least 2 rows, got {}", rows.len())));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(StatsError::Domain("rows differ in length".into()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(StatsError::Domain("non-finite value in PCA input".into()));
    }
    if n_components == 0 || n_components > dim {
        return Err(StatsError::Domain(format!("n_components must be in 1..={dim}, got {n_components}")));
    }
    let (mean, cov) = covariance(rows);
    let trace: f64 = (0..dim).map(|i| cov[i][i]).sum();
    if trace == 0.0 {
        let components = (0..n_components)
            .map(|c| (0..dim).map(|i| if i == c { 1.0 } else { 0.0 }).collect())
            .collect();
        return Ok(PcaResult {
            components,
            explained_variance: vec![0.0; n_components],
            explained_variance_ratio: vec![0.0; n_components],
            n_components,
            mean,
        });
    }
    let (values, vectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(n_components);
    let mut explained = Vec::with_capacity(n_components);
    for &idx in order.iter().take(n_components) {
        let mut v: Vec<f64> = vectors.iter().map(|row| row[idx]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        orient(&mut v);
        components.push(v);
        explained.push(values[idx].max(0.0));
    }
    let ratios = explained.iter().map(|e| (e / trace).clamp(0.0, 1.0)).collect();
    Ok(PcaResult { components, explained_variance: explained, explained_variance_ratio: ratios, n_components, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ranking {
    /// By |loading|, sign kept in the value.
    #[default]
    Absolute,
    /// By signed loading, largest first.
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    /// Signed loading × 100.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub ranking: Ranking,
    pub components: Vec<Vec<RankedFeature>>,
}

pub fn feature_importance<S: AsRef<str>>(pca: &PcaResult, names: &[S], ranking: Ranking) -> Result<FeatureImportance, StatsError> {
    let dim = pca.mean.len();
    if names.len() != dim {
        return Err(StatsError::Domain(format!("{} feature names for {dim} features", names.len())));
    }
    let components = pca
        .components
        .iter()
        .map(|c| {
            let mut idx: Vec<usize> = (0..dim).collect();
            match ranking {
                Ranking::Absolute => idx.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b))),
                Ranking::Signed => idx.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b))),
            }
            idx.into_iter().map(|i| RankedFeature { feature: names[i].as_ref().to_string(), value: c[i] * 100.0 }).collect()
        })
        .collect();
    Ok(FeatureImportance { ranking, components })
}
