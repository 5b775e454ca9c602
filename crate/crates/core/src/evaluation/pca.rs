use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

const MAX_ITERATIONS: usize = 20_000;
const TOLERANCE: f64 = 1e-13;
const PROJECTION_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Array2<f64>,
    /// Variance (N - 1 denominator) captured by each output axis, descending.
    pub explained_variance: Vec<f64>,
    pub components: Array2<f64>,
    /// Set when the input has no variance and all coordinates are zero.
    pub degenerate: bool,
}

fn power_iteration(cov: &Array2<f64>, start: Array1<f64>) -> (f64, Array1<f64>) {
    let mut v = start;
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let w = cov.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return (0.0, v);
        }
        let next = w / norm;
        let delta = (&next - &v).mapv(f64::abs).sum().min((&next + &v).mapv(f64::abs).sum());
        v = next;
        lambda = v.dot(&cov.dot(&v));
        if delta < TOLERANCE {
            break;
        }
    }
    (lambda, v)
}

/// Projects mean-centered rows onto the leading principal directions, found
/// by seeded power iteration with deflation. Each direction is signed so its
/// largest-magnitude loading is positive.
pub fn pca_project(embeddings: &Array2<f64>, out_dim: usize) -> Result<Projection> {
    let (n, d) = embeddings.dim();
    if n < 2 || d < out_dim || out_dim == 0 {
        return Err(Error::InvalidArgument(format!("projection to {out_dim} dims needs >= 2 rows and >= {out_dim} columns, got {n}x{d}")));
    }
    let mean = embeddings.mean_axis(Axis(0)).expect("rows");
    let centered = embeddings - &mean;
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    let total: f64 = cov.diag().sum();
    if total <= f64::EPSILON * d as f64 * 1e-3 || total == 0.0 {
        return Ok(Projection {
            coords: Array2::zeros((n, out_dim)),
            explained_variance: vec![0.0; out_dim],
            components: Array2::zeros((d, out_dim)),
            degenerate: true,
        });
    }
    let mut rng = stream(PROJECTION_SEED, Purpose::Projection);
    let mut components = Array2::zeros((d, out_dim));
    let mut explained = Vec::with_capacity(out_dim);
    for k in 0..out_dim {
        let start = Array1::from_shape_simple_fn(d, || rng.gen_range(-1.0..1.0) + 1e-3);
        let (lambda, mut v) = power_iteration(&cov, start);
        let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        let outer = v.view().insert_axis(Axis(1)).dot(&v.view().insert_axis(Axis(0)));
        cov = cov - outer * lambda;
        components.column_mut(k).assign(&v);
        explained.push(lambda.max(0.0));
    }
    Ok(Projection { coords: centered.dot(&components), explained_variance: explained, components, degenerate: false })
}
