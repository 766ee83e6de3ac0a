//! Seeded generators for random metrics, spaces and metric perturbations.
//!
//! Metrics are sampled as symmetric matrices of i.i.d. uniforms on `(0, 1]`
//! pushed through the shortest-path closure, which restores the triangle
//! inequality without touching the diagonal or symmetry.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::metric::{MetricMatrix, MetricMeasureSpace, SquareMatrix};

/// Floyd–Warshall in place: `m[i][k] ← min(m[i][k], m[i][j] + m[j][k])`.
pub fn shortest_path_closure(m: &mut SquareMatrix) {
    let n = m.n();
    for j in 0..n {
        for i in 0..n {
            let dij = m.get(i, j);
            for k in 0..n {
                let via = dij + m.get(j, k);
                if via < m.get(i, k) {
                    m.set(i, k, via);
                }
            }
        }
    }
}

/// Symmetric zero-diagonal matrix with entries drawn by `draw`.
pub fn symmetric_noise<R: Rng>(n: usize, rng: &mut R, mut draw: impl FnMut(&mut R) -> f64) -> SquareMatrix {
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = draw(rng);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

pub fn random_metric<R: Rng>(n: usize, rng: &mut R) -> MetricMatrix {
    // 1 - U[0,1) lies in (0, 1], so no off-diagonal zero can appear.
    let mut m = symmetric_noise(n, rng, |r| 1.0 - r.random::<f64>());
    shortest_path_closure(&mut m);
    MetricMatrix::new(m).expect("closure of positive entries is nonnegative")
}

/// Random metric with weights i.i.d. uniform on `[0.5, 1.5]`.
pub fn random_space<R: Rng>(n: usize, rng: &mut R) -> MetricMeasureSpace {
    let d = random_metric(n, rng);
    let weights = (0..n).map(|_| rng.random_range(0.5..=1.5)).collect();
    MetricMeasureSpace::unlabeled(d, weights).expect("closed random matrix is a metric")
}

/// `count` random spaces with sizes uniform in `n_min..=n_max`, reproducible from `seed`.
pub fn corpus(count: usize, n_min: usize, n_max: usize, seed: u64) -> Vec<MetricMeasureSpace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(n_min..=n_max);
            random_space(n, &mut rng)
        })
        .collect()
}

/// `closure(σ ∘ (1 + α·noise))` for symmetric zero-diagonal noise in `[-1, 1]`
/// and `0 ≤ α < 1`, so every entry stays positive.
pub fn perturbed_metric(sigma: &MetricMatrix, noise: &SquareMatrix, alpha: f64) -> MetricMatrix {
    assert!((0.0..1.0).contains(&alpha), "perturbation scale must lie in [0, 1)");
    let n = sigma.n();
    let mut m = SquareMatrix::from_fn(n, |i, j| sigma.get(i, j) * (1.0 + alpha * noise.get(i, j)));
    shortest_path_closure(&mut m);
    MetricMatrix::new(m).expect("perturbation keeps entries positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{validate_metric, ValidationMode};

    #[test]
    fn corpus_is_reproducible_and_valid() {
        let a = corpus(10, 3, 12, 42);
        let b = corpus(10, 3, 12, 42);
        assert_eq!(a, b);
        for s in &a {
            assert!(validate_metric(s.distances(), ValidationMode::Exhaustive).passed);
            assert!(s.weights().iter().all(|w| (0.5..=1.5).contains(w)));
        }
    }

    #[test]
    fn closure_repairs_triangle() {
        let mut m = SquareMatrix::from_rows(&[
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ])
        .unwrap();
        shortest_path_closure(&mut m);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(2, 0), 2.0);
    }
}
