use serde::{Deserialize, Serialize};

use super::linalg::symmetric_eigen;
use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Principal axes of a data set, fitted by eigen-decomposition of the sample
/// covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k×d, rows are orthonormal principal axes.
    pub components: DenseMatrix,
    /// Sample variance (n−1 denominator) along each axis, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::invalid(format!(
                "PCA input has dimension {}, model expects {}",
                row.len(),
                self.dim()
            )));
        }
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self.components.row_iter().map(|c| dot(c, &centered)).collect())
    }
}

/// Fits `k` principal components.
///
/// Zero-variance data is not an error: the eigen-solver returns the standard
/// basis and every explained variance is zero.
pub fn pca_fit(data: &DenseMatrix, k: usize) -> Result<PcaModel> {
    let (m, d) = data.shape();
    if m < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows, got {m}")));
    }
    if k == 0 || k > d.min(m - 1) {
        return Err(Error::invalid(format!(
            "PCA component count {k} out of range 1..={} for {m}x{d} data",
            d.min(m - 1)
        )));
    }

    let mut mean = vec![0.0; d];
    for row in data.row_iter() {
        for (acc, x) in mean.iter_mut().zip(row) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);

    let mut cov = DenseMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in data.row_iter() {
        for ((c, x), mu) in centered.iter_mut().zip(row).zip(&mean) {
            *c = x - mu;
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    let denom = (m - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let (values, vectors) = symmetric_eigen(&cov)?;
    let mut components = DenseMatrix::zeros(k, d);
    for r in 0..k {
        let axis = vectors.row(r);
        // First coordinate that is not numerically zero decides the sign.
        let flip = axis
            .iter()
            .find(|v| v.abs() > 1e-12)
            .is_some_and(|v| *v < 0.0);
        for (dst, v) in components.row_mut(r).iter_mut().zip(axis) {
            *dst = if flip { -v } else { *v };
        }
    }
    let explained_variance = values[..k].iter().map(|v| v.max(0.0)).collect();

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

pub fn pca_transform(model: &PcaModel, data: &DenseMatrix) -> Result<DenseMatrix> {
    if data.cols() != model.dim() {
        return Err(Error::invalid(format!(
            "PCA input has {} columns, model expects {}",
            data.cols(),
            model.dim()
        )));
    }
    let k = model.n_components();
    let mut out = DenseMatrix::zeros(data.rows(), k);
    for (i, row) in data.row_iter().enumerate() {
        let projected = model.transform_row(row)?;
        out.row_mut(i).copy_from_slice(&projected);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = crate::rng::stream(seed, 0);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn axis_aligned_data() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let data = DenseMatrix::from_rows(&xs.map(|x| [x, 0.0])).unwrap();
        let model = pca_fit(&data, 1).unwrap();
        assert_eq!(model.components.row(0), &[1.0, 0.0]);
        let mean = 3.5;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        assert!((model.explained_variance[0] - var).abs() < 1e-12);
    }

    #[test]
    fn duplicated_rows_have_zero_second_variance() {
        let data = DenseMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [3.0, 6.0], [3.0, 6.0]]).unwrap();
        let model = pca_fit(&data, 2).unwrap();
        assert!(model.explained_variance[1].abs() < 1e-12);
        let ratio = model.components[(0, 1)] / model.components[(0, 0)];
        assert!((ratio - 2.0).abs() < 1e-9);
    }

    #[test]
    fn full_rank_roundtrip() {
        let data = random_matrix(10, 4, 3);
        let model = pca_fit(&data, 4).unwrap();
        let scores = pca_transform(&model, &data).unwrap();
        for i in 0..10 {
            for j in 0..4 {
                let rec: f64 = (0..4).map(|c| scores[(i, c)] * model.components[(c, j)]).sum();
                assert!((rec - (data[(i, j)] - model.mean[j])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mean_maps_to_origin_and_variance_identity() {
        let data = random_matrix(25, 5, 11);
        let model = pca_fit(&data, 3).unwrap();
        let origin = model.transform_row(&model.mean).unwrap();
        assert!(origin.iter().all(|v| v.abs() < 1e-12));
        let scores = pca_transform(&model, &data).unwrap();
        for c in 0..3 {
            let col = scores.column(c);
            let mu = col.iter().sum::<f64>() / 25.0;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 24.0;
            assert!((var - model.explained_variance[c]).abs() < 1e-6);
        }
        assert!(model.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn components_orthonormal_and_sign_convention() {
        let data = random_matrix(30, 6, 5);
        let model = pca_fit(&data, 4).unwrap();
        for i in 0..4 {
            let first = model.components.row(i).iter().find(|v| v.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
            for j in 0..4 {
                let g = dot(model.components.row(i), model.components.row(j));
                assert!((g - f64::from(u8::from(i == j))).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_model_is_isometry() {
        let data = random_matrix(12, 3, 8);
        let model = pca_fit(&data, 3).unwrap();
        let scores = pca_transform(&model, &data).unwrap();
        for a in 0..12 {
            for b in 0..12 {
                let d0 = super::super::matrix::squared_distance(data.row(a), data.row(b));
                let d1 = super::super::matrix::squared_distance(scores.row(a), scores.row(b));
                assert!((d0 - d1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_variance_is_not_an_error() {
        let data = DenseMatrix::from_rows(&[[2.0, 2.0, 2.0]; 5]).unwrap();
        let model = pca_fit(&data, 2).unwrap();
        assert_eq!(model.explained_variance, vec![0.0, 0.0]);
        let g = dot(model.components.row(0), model.components.row(1));
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_k_and_dims() {
        let data = random_matrix(3, 4, 1);
        assert!(pca_fit(&data, 0).is_err());
        assert!(pca_fit(&data, 3).is_err());
        let model = pca_fit(&data, 2).unwrap();
        assert!(model.transform_row(&[1.0]).is_err());
        assert!(pca_transform(&model, &random_matrix(2, 3, 1)).is_err());
    }
}
