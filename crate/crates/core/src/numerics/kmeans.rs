use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{squared_distance, DenseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    /// k×d.
    pub centroids: DenseMatrix,
    /// Sum of squared distances from each training point to its nearest centroid.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after every assignment step, starting with the seeding.
    #[serde(default)]
    pub inertia_trace: Vec<f64>,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    /// Keeps centroid order but rewrites it as `order[new] = old`.
    pub(crate) fn reorder(&mut self, order: &[usize]) {
        let old = self.centroids.clone();
        for (new, &src) in order.iter().enumerate() {
            self.centroids.row_mut(new).copy_from_slice(old.row(src));
        }
    }
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn kmeans_assign(model: &KMeansModel, point: &[f64]) -> Result<usize> {
    if point.len() != model.dim() {
        return Err(Error::invalid(format!(
            "point has dimension {}, centroids have {}",
            point.len(),
            model.dim()
        )));
    }
    Ok(nearest(&model.centroids, point).0)
}

fn nearest(centroids: &DenseMatrix, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.row_iter().enumerate() {
        let d = squared_distance(centroid, point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops when assignments no longer change or after `max_iter` centroid
/// updates. A cluster that ends up empty is moved onto the training point
/// farthest from its current centroid.
pub fn kmeans_fit(data: &DenseMatrix, k: usize, seed: u64, max_iter: usize) -> Result<KMeansModel> {
    let (m, d) = data.shape();
    if k == 0 || k > m {
        return Err(Error::invalid(format!("k-means cluster count {k} out of range 1..={m}")));
    }
    if max_iter == 0 {
        return Err(Error::invalid("k-means max_iter must be at least 1"));
    }

    let mut centroids = seed_plus_plus(data, k, &mut crate::rng::stream(seed, 0));
    let mut assignment = vec![0usize; m];
    let mut dists = vec![0.0; m];
    let mut inertia = assign_all(data, &centroids, &mut assignment, &mut dists);
    let mut inertia_trace = vec![inertia];
    let mut iterations_run = 0;

    for _ in 0..max_iter {
        iterations_run += 1;
        let mut sums = DenseMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, row) in data.row_iter().enumerate() {
            let c = assignment[i];
            counts[c] += 1;
            for (s, x) in sums.row_mut(c).iter_mut().zip(row) {
                *s += x;
            }
        }
        let mut taken = vec![false; m];
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / n;
                }
            } else {
                let far = farthest_untaken(&dists, &taken);
                taken[far] = true;
                centroids.row_mut(c).copy_from_slice(data.row(far));
            }
        }

        let previous = assignment.clone();
        inertia = assign_all(data, &centroids, &mut assignment, &mut dists);
        inertia_trace.push(inertia);
        if assignment == previous {
            break;
        }
    }

    Ok(KMeansModel {
        centroids,
        inertia,
        iterations_run,
        inertia_trace,
    })
}

fn assign_all(data: &DenseMatrix, centroids: &DenseMatrix, assignment: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (i, row) in data.row_iter().enumerate() {
        let (c, dist) = nearest(centroids, row);
        assignment[i] = c;
        dists[i] = dist;
        total += dist;
    }
    total
}

fn farthest_untaken(dists: &[f64], taken: &[bool]) -> usize {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (i, &d) in dists.iter().enumerate() {
        if !taken[i] && d > best.1 {
            best = (i, d);
        }
    }
    if best.0 == usize::MAX {
        0
    } else {
        best.0
    }
}

fn seed_plus_plus<R: Rng>(data: &DenseMatrix, k: usize, rng: &mut R) -> DenseMatrix {
    let (m, d) = data.shape();
    let mut centroids = DenseMatrix::zeros(k, d);
    let first = rng.random_range(0..m);
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut chosen = vec![first];
    let mut min_d: Vec<f64> = data.row_iter().map(|r| squared_distance(r, data.row(first))).collect();

    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in min_d.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final partial sum.
            pick.unwrap_or_else(|| min_d.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            // Every point coincides with an existing centroid.
            (0..m).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, row) in data.row_iter().enumerate() {
            let dist = squared_distance(row, data.row(pick));
            if dist < min_d[i] {
                min_d[i] = dist;
            }
        }
    }
    centroids
}
