//! Empirical transport distances and task metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, Mat};

/// Largest cloud accepted by [`w2_assignment`].
pub const MAX_ASSIGNMENT: usize = 512;

/// Uniformly weighted point cloud, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud(Mat);

impl SampleCloud {
    pub fn new(points: Mat) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(invalid("cloud", "empty sample cloud"));
        }
        if points.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(invalid("cloud", "non-finite entry"));
        }
        Ok(Self(points))
    }

    /// One-dimensional cloud.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(Mat::from_vec(values.len(), 1, values.to_vec())?)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn points(&self) -> &Mat {
        &self.0
    }

    fn project(&self, direction: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| dot(self.point(i), direction)).collect()
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Empirical quantile of sorted samples at level `u ∈ [0, 1]` by linear
/// interpolation between order statistics.
fn quantile(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let x = u * (n - 1) as f64;
    let i = (x.floor() as usize).min(n - 2);
    let t = x - i as f64;
    sorted[i] * (1.0 - t) + sorted[i + 1] * t
}

fn w2_sorted(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        return (s / a.len() as f64).sqrt();
    }
    // unequal sizes: resample the smaller cloud at the larger one's levels
    let (long, short) = if a.len() > b.len() { (a, b) } else { (b, a) };
    let n = long.len();
    let s: f64 = long
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let u = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
            (x - quantile(short, u)).powi(2)
        })
        .sum();
    (s / n as f64).sqrt()
}

/// `W₂` between one-dimensional clouds via the sorted (quantile) coupling.
pub fn w2_exact_1d(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(invalid("cloud", "w2_exact_1d needs one-dimensional clouds"));
    }
    Ok(w2_sorted(
        &sorted(a.points().as_slice().to_vec()),
        &sorted(b.points().as_slice().to_vec()),
    ))
}

/// Minimum-cost perfect matching of a square cost matrix (Hungarian
/// algorithm with potentials, `O(n³)`); returns the column of each row.
pub fn hungarian(cost: &Mat) -> Vec<usize> {
    let n = cost.rows();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

fn squared_costs(a: &SampleCloud, b: &SampleCloud) -> Mat {
    let n = a.len();
    let mut c = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = a
                .point(i)
                .iter()
                .zip(b.point(j))
                .map(|(x, y)| (x - y).powi(2))
                .sum();
        }
    }
    c
}

/// Exact empirical `W₂` by optimal assignment on squared distances.
pub fn w2_assignment(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid("cloud", "assignment needs equal cloud sizes"));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.len() > MAX_ASSIGNMENT {
        return Err(invalid(
            "cloud",
            format!("{} points exceed the assignment limit {MAX_ASSIGNMENT}; use w2_sliced", a.len()),
        ));
    }
    let c = squared_costs(a, b);
    let perm = hungarian(&c);
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
    Ok((total / a.len() as f64).max(0.0).sqrt())
}

/// Squared one-dimensional `W₂` of the projections on `projections` random
/// unit directions (the identity projection for one-dimensional clouds).
pub fn sliced_projections(a: &SampleCloud, b: &SampleCloud, projections: usize, seed: u64) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if projections == 0 {
        return Err(invalid("projections", "need at least one projection"));
    }
    let d = a.dim();
    if d == 1 {
        return Ok(vec![w2_exact_1d(a, b)?.powi(2)]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..projections)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = dot(&v, &v).sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    Ok(dirs
        .par_iter()
        .map(|u| w2_sorted(&sorted(a.project(u)), &sorted(b.project(u))).powi(2))
        .collect())
}

/// Sliced `W₂`: root mean over random unit directions of the squared 1D
/// distance between projections.
pub fn w2_sliced(a: &SampleCloud, b: &SampleCloud, projections: usize, seed: u64) -> Result<f64> {
    let per = sliced_projections(a, b, projections, seed)?;
    Ok((per.iter().sum::<f64>() / per.len() as f64).sqrt())
}

/// Mean squared residual of the linear predictor `x ↦ xᵀq`.
pub fn mse(x: &Mat, y: &[f64], q: &[f64]) -> Result<f64> {
    if x.rows() != y.len() || x.cols() != q.len() {
        return Err(invalid("shape", "design, response and coefficients disagree"));
    }
    if y.is_empty() {
        return Err(invalid("shape", "empty data"));
    }
    let fit = x.matvec(q);
    Ok(fit.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum::<f64>() / y.len() as f64)
}

/// Fraction of matching binary labels.
pub fn accuracy(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(invalid("shape", "predictions and labels disagree"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Mean negative log-likelihood of binary labels.
pub fn log_loss(probs: &[f64], labels: &[bool]) -> Result<f64> {
    if probs.len() != labels.len() || labels.is_empty() {
        return Err(invalid("shape", "probabilities and labels disagree"));
    }
    if probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(invalid("probs", "probabilities must lie in (0, 1)"));
    }
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(p, &l)| if l { -p.ln() } else { -(1.0 - p).ln() })
        .sum::<f64>()
        / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(v: &[f64]) -> SampleCloud {
        SampleCloud::from_values(v).unwrap()
    }

    #[test]
    fn one_dimensional_examples() {
        assert_eq!(w2_exact_1d(&cloud(&[0.0]), &cloud(&[1.0])).unwrap(), 1.0);
        assert_eq!(w2_exact_1d(&cloud(&[3.0, 1.0]), &cloud(&[1.0, 3.0])).unwrap(), 0.0);
        assert_eq!(w2_exact_1d(&cloud(&[0.0, 2.0]), &cloud(&[3.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn unequal_sizes_interpolate() {
        let a = cloud(&[0.0, 1.0, 2.0]);
        let b = cloud(&[0.0, 2.0]);
        assert!(w2_exact_1d(&a, &b).unwrap() < 1e-15);
    }

    #[test]
    fn task_metrics() {
        let x = Mat::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(mse(&x, &[1.0, -1.0], &[0.0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[true, false], &[true, false]).unwrap(), 1.0);
        assert!((log_loss(&[0.5], &[true]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(log_loss(&[1.0], &[true]).is_err());
    }

    #[test]
    fn assignment_limit() {
        let big = SampleCloud::new(Mat::zeros(MAX_ASSIGNMENT + 1, 1)).unwrap();
        assert!(w2_assignment(&big, &big).is_err());
    }
}
