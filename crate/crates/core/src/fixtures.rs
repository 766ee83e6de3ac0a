//! Named spaces with hand-computable invariants.

use crate::counterexample::{build_counterexample, CounterexampleSpace};
use crate::metric::{build_interval_grid, MetricMatrix, MetricMeasureSpace, SquareMatrix};

fn uniform(labels: &[&str], d: SquareMatrix) -> MetricMeasureSpace {
    let n = labels.len();
    MetricMeasureSpace::new(
        labels.iter().map(|s| s.to_string()).collect(),
        MetricMatrix::new(d).expect("fixture distances are nonnegative"),
        vec![1.0 / n as f64; n],
    )
    .expect("fixture is a metric space")
}

/// Two points at distance 1, weight 1/2 each.
pub fn p2() -> MetricMeasureSpace {
    uniform(&["a", "b"], SquareMatrix::from_fn(2, |i, j| (i != j) as u8 as f64))
}

/// Equilateral triangle with unit sides, weight 1/3 each.
pub fn p3() -> MetricMeasureSpace {
    uniform(&["a", "b", "c"], SquareMatrix::from_fn(3, |i, j| (i != j) as u8 as f64))
}

/// A hub `z` at distance 1 from three leaves that are pairwise at distance 2,
/// weight 1/4 each. Not isometrically embeddable in any Euclidean space.
pub fn t4() -> MetricMeasureSpace {
    uniform(
        &["z", "x1", "x2", "x3"],
        SquareMatrix::from_fn(4, |i, j| match (i, j) {
            _ if i == j => 0.0,
            (0, _) | (_, 0) => 1.0,
            _ => 2.0,
        }),
    )
}

/// Uniform grid on `[0, 1]` with `n` points.
pub fn interval(n: usize) -> MetricMeasureSpace {
    build_interval_grid(n).expect("n >= 2")
}

/// Truncated mixed space of grid points, hat bumps and the zero function.
pub fn a2(n_max: u32, grid: usize, m: f64) -> CounterexampleSpace {
    build_counterexample(n_max, grid, m).expect("fixture parameters are in range")
}

/// The small fixtures every property suite runs on.
pub fn standard() -> Vec<(&'static str, MetricMeasureSpace)> {
    vec![
        ("P2", p2()),
        ("P3", p3()),
        ("T4", t4()),
        ("I16", interval(16)),
        ("A2(3,17,2)", a2(3, 17, 2.0).space),
    ]
}
