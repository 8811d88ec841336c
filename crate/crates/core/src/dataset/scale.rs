//! Fitted feature transforms: per-feature min-max normalization into [0,1]
//! and principal-component projection with a deterministic sign convention.

use super::MultiLabelDataset;
use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    MinMax,
    Pca,
}

impl std::str::FromStr for ScalerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(ScalerKind::MinMax),
            "pca" => Ok(ScalerKind::Pca),
            other => Err(Error::Argument(format!("unknown scaler kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ScalerModel {
    MinMax {
        fitted_dim: usize,
        min: Vec<f64>,
        max: Vec<f64>,
    },
    Pca {
        fitted_dim: usize,
        mean: Vec<f64>,
        /// k rows of d entries, orthonormal, descending explained variance,
        /// each row's largest-magnitude entry positive.
        components: Vec<Vec<f64>>,
        explained_variance: Vec<f64>,
    },
}

impl ScalerModel {
    pub fn fitted_dim(&self) -> usize {
        match self {
            ScalerModel::MinMax { fitted_dim, .. } => *fitted_dim,
            ScalerModel::Pca { fitted_dim, .. } => *fitted_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ScalerModel::MinMax { fitted_dim, .. } => *fitted_dim,
            ScalerModel::Pca { components, .. } => components.len(),
        }
    }
}

/// Fit a scaler on a feature matrix. `k` is the PCA target dimension
/// (defaults to the full basis) and is ignored for min-max.
pub fn fit_scaler(features: &Array2<f64>, kind: ScalerKind, k: Option<usize>) -> Result<ScalerModel> {
    let (n, d) = features.dim();
    if n == 0 || d == 0 {
        return Err(Error::Argument("cannot fit a scaler on an empty dataset".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "features contain non-finite values; encode categorical columns first".into(),
        ));
    }
    match kind {
        ScalerKind::MinMax => {
            let mut min = vec![f64::INFINITY; d];
            let mut max = vec![f64::NEG_INFINITY; d];
            for row in features.rows() {
                for (j, &v) in row.iter().enumerate() {
                    min[j] = min[j].min(v);
                    max[j] = max[j].max(v);
                }
            }
            Ok(ScalerModel::MinMax {
                fitted_dim: d,
                min,
                max,
            })
        }
        ScalerKind::Pca => {
            let k = k.unwrap_or(d);
            if k == 0 || k > d {
                return Err(Error::Argument(format!(
                    "pca target dimension {k} must be in 1..={d}"
                )));
            }
            fit_pca(features, k)
        }
    }
}

fn fit_pca(features: &Array2<f64>, k: usize) -> Result<ScalerModel> {
    let (n, d) = features.dim();
    let mean = features.mean_axis(Axis(0)).unwrap();
    let centered = features - &mean.view().insert_axis(Axis(0));
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };

    // Eigenvectors of the covariance, via the Gram matrix when d > n.
    let (eigvals, basis): (Vec<f64>, Vec<Array1<f64>>) = if d <= n {
        let cov = centered.t().dot(&centered) / denom;
        let (vals, vecs) = jacobi_eigen(&cov);
        let columns = (0..d).map(|j| vecs.column(j).to_owned()).collect();
        (vals.to_vec(), columns)
    } else {
        let gram = centered.dot(&centered.t()) / denom;
        let (vals, vecs) = jacobi_eigen(&gram);
        let mut columns = Vec::with_capacity(n);
        let mut kept_vals = Vec::with_capacity(n);
        for j in 0..n {
            let lambda = vals[j];
            let u = vecs.column(j);
            let mut v = centered.t().dot(&u);
            let norm = v.dot(&v).sqrt();
            if norm > 1e-12 {
                v /= norm;
                columns.push(v);
                kept_vals.push(lambda);
            }
        }
        (kept_vals, columns)
    };

    // Descending eigenvalue order, index ties resolved by position.
    let mut order: Vec<usize> = (0..eigvals.len()).collect();
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap().then(a.cmp(&b)));
    if order.len() < k {
        return Err(Error::Argument(format!(
            "pca target dimension {k} exceeds the {} non-degenerate directions of the data",
            order.len()
        )));
    }

    let mut components = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut row = basis[idx].to_vec();
        // Sign convention: the largest-magnitude entry is positive.
        let lead = row
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .unwrap()
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap();
        if row[lead] < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
        }
        components.push(row);
        explained.push(eigvals[idx].max(0.0));
    }
    Ok(ScalerModel::Pca {
        fitted_dim: d,
        mean: mean.to_vec(),
        components,
        explained_variance: explained,
    })
}

/// Apply a fitted scaler to a feature matrix.
pub fn apply_scaler(model: &ScalerModel, features: &Array2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != model.fitted_dim() {
        return Err(Error::Argument(format!(
            "scaler was fitted on {} features, got {}",
            model.fitted_dim(),
            features.ncols()
        )));
    }
    match model {
        ScalerModel::MinMax { min, max, .. } => {
            let mut out = features.clone();
            for mut row in out.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    let range = max[j] - min[j];
                    *v = if range > 0.0 {
                        ((*v - min[j]) / range).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                }
            }
            Ok(out)
        }
        ScalerModel::Pca { mean, components, .. } => {
            let d = model.fitted_dim();
            let k = components.len();
            let mean = Array1::from_vec(mean.clone());
            let mut comp = Array2::zeros((k, d));
            for (i, row) in components.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    comp[(i, j)] = v;
                }
            }
            let centered = features - &mean.view().insert_axis(Axis(0));
            Ok(centered.dot(&comp.t()))
        }
    }
}

/// Inverse map: exact for non-constant min-max features and for the
/// full-basis projection; a least-squares reconstruction otherwise.
pub fn invert_scaler(model: &ScalerModel, transformed: &Array2<f64>) -> Result<Array2<f64>> {
    match model {
        ScalerModel::MinMax { min, max, fitted_dim } => {
            if transformed.ncols() != *fitted_dim {
                return Err(Error::Argument("width mismatch in inverse transform".into()));
            }
            let mut out = transformed.clone();
            for mut row in out.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = *v * (max[j] - min[j]) + min[j];
                }
            }
            Ok(out)
        }
        ScalerModel::Pca { mean, components, fitted_dim, .. } => {
            if transformed.ncols() != components.len() {
                return Err(Error::Argument("width mismatch in inverse transform".into()));
            }
            let k = components.len();
            let mean = Array1::from_vec(mean.clone());
            let mut comp = Array2::zeros((k, *fitted_dim));
            for (i, row) in components.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    comp[(i, j)] = v;
                }
            }
            Ok(transformed.dot(&comp) + mean.view().insert_axis(Axis(0)))
        }
    }
}

/// Apply to a multi-label dataset; labels and multiplicities pass through.
pub fn apply_to_multilabel(
    model: &ScalerModel,
    data: &MultiLabelDataset,
) -> Result<MultiLabelDataset> {
    let transformed = apply_scaler(model, &data.features_matrix())?;
    let mut out = data.clone();
    for (sample, row) in out.samples.iter_mut().zip(transformed.rows()) {
        sample.features = row.to_vec();
    }
    Ok(out)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors-as-columns); accurate to near machine
/// precision for the moderate sizes used here.
fn jacobi_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() < 1e-13 * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj - s * mqj;
                    m[(q, j)] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    let vals = Array1::from_iter((0..n).map(|i| m[(i, i)]));
    (vals, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::sample_noise;
    use ndarray::array;

    #[test]
    fn minmax_fit_records_per_feature_extrema() {
        let x = array![[0.0, 10.0], [5.0, 20.0]];
        match fit_scaler(&x, ScalerKind::MinMax, None).unwrap() {
            ScalerModel::MinMax { min, max, .. } => {
                assert_eq!(min, vec![0.0, 10.0]);
                assert_eq!(max, vec![5.0, 20.0]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn minmax_maps_midpoint_and_clamps_out_of_range() {
        let x = array![[0.0], [10.0]];
        let model = fit_scaler(&x, ScalerKind::MinMax, None).unwrap();
        let out = apply_scaler(&model, &array![[5.0], [12.0], [-3.0]]).unwrap();
        assert_eq!(out[(0, 0)], 0.5);
        assert_eq!(out[(1, 0)], 1.0);
        assert_eq!(out[(2, 0)], 0.0);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let x = array![[4.0, 1.0], [4.0, 2.0]];
        let model = fit_scaler(&x, ScalerKind::MinMax, None).unwrap();
        let out = apply_scaler(&model, &x).unwrap();
        assert_eq!(out.column(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn minmax_round_trip_recovers_non_constant_features() {
        let x = sample_noise(30, 4, 5);
        let model = fit_scaler(&x, ScalerKind::MinMax, None).unwrap();
        let out = apply_scaler(&model, &x).unwrap();
        assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let back = invert_scaler(&model, &out).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_full_basis_is_orthonormal_and_distance_preserving() {
        let x = sample_noise(20, 5, 11);
        let model = fit_scaler(&x, ScalerKind::Pca, Some(5)).unwrap();
        let ScalerModel::Pca { components, .. } = &model else {
            unreachable!()
        };
        for (i, a) in components.iter().enumerate() {
            for (j, b) in components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-6, "gram[{i},{j}] = {dot}");
            }
        }
        let t = apply_scaler(&model, &x).unwrap();
        for i in 0..x.nrows() {
            for j in (i + 1)..x.nrows() {
                let d_orig: f64 = (0..5).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
                let d_proj: f64 = (0..5).map(|c| (t[(i, c)] - t[(j, c)]).powi(2)).sum();
                assert!((d_orig.sqrt() - d_proj.sqrt()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pca_round_trip_on_full_basis_reconstructs() {
        let x = sample_noise(20, 5, 23);
        let model = fit_scaler(&x, ScalerKind::Pca, Some(5)).unwrap();
        let t = apply_scaler(&model, &x).unwrap();
        let back = invert_scaler(&model, &t).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn pca_reduces_wide_data_via_the_gram_path() {
        // More columns than rows exercises the d > n branch.
        let x = sample_noise(12, 40, 3);
        let model = fit_scaler(&x, ScalerKind::Pca, Some(8)).unwrap();
        let t = apply_scaler(&model, &x).unwrap();
        assert_eq!(t.dim(), (12, 8));
        let ScalerModel::Pca { components, explained_variance, .. } = &model else {
            unreachable!()
        };
        assert_eq!(components.len(), 8);
        for w in explained_variance.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "variance not descending");
        }
        for (i, a) in components.iter().enumerate() {
            for (j, b) in components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pca_with_k_above_d_is_an_argument_error() {
        let x = sample_noise(10, 3, 1);
        assert!(matches!(
            fit_scaler(&x, ScalerKind::Pca, Some(4)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_an_argument_error() {
        let x = sample_noise(4, 3, 1);
        let model = fit_scaler(&x, ScalerKind::MinMax, None).unwrap();
        assert!(apply_scaler(&model, &sample_noise(2, 5, 2)).is_err());
    }

    #[test]
    fn pca_sign_convention_is_deterministic() {
        let x = sample_noise(15, 4, 9);
        let a = fit_scaler(&x, ScalerKind::Pca, Some(4)).unwrap();
        let b = fit_scaler(&x, ScalerKind::Pca, Some(4)).unwrap();
        let (ScalerModel::Pca { components: ca, .. }, ScalerModel::Pca { components: cb, .. }) =
            (&a, &b)
        else {
            unreachable!()
        };
        assert_eq!(ca, cb);
        for row in ca {
            let lead = row
                .iter()
                .cloned()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            assert!(lead > 0.0);
        }
    }
}
