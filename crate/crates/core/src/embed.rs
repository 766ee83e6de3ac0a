//! Euclidean side: isometric embeddability by double centering, projection of
//! point configurations to low dimension, the canonical-map embedding pipeline
//! and the quadruple inequalities.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::canonical::{canonical_image, gram_delta, CHECK_TOL};
use crate::metric::{lipschitz_constants, LipschitzReport, MetricMatrix, MetricMeasureSpace, SquareMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Raw,
    CanonicalImage,
    DeltaImage,
    Projected,
}

/// `n` points in `R^dim`, with a weight per point used for centering.
#[derive(Clone, Debug, Serialize)]
pub struct PointConfiguration {
    pub coords: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

impl PointConfiguration {
    pub fn new(coords: Vec<Vec<f64>>, weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::Structural("a configuration needs at least one point".into()));
        }
        if weights.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: weights.len(),
            });
        }
        let dim = coords[0].len();
        if let Some(i) = coords.iter().position(|c| c.len() != dim) {
            return Err(Error::Structural(format!(
                "point {i} has {} coordinates, expected {dim}",
                coords[i].len()
            )));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Structural("coordinates must be finite".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Structural("weights must be positive and finite".into()));
        }
        Ok(Self {
            coords,
            weights,
            provenance,
        })
    }

    /// Points with uniform weights `1/n`.
    pub fn raw(coords: Vec<Vec<f64>>) -> Result<Self> {
        let n = coords.len().max(1);
        Self::new(coords, vec![1.0 / n as f64; n], Provenance::Raw)
    }

    /// `ι_d(X)` in weight-scaled coordinates.
    pub fn canonical(space: &MetricMeasureSpace) -> Self {
        Self {
            coords: canonical_image(space).coords.to_rows(),
            weights: space.weights().to_vec(),
            provenance: Provenance::CanonicalImage,
        }
    }

    /// `ι_{Δ(d)}(X) = T_d(ι_d(X))` in weight-scaled coordinates.
    pub fn delta(space: &MetricMeasureSpace) -> Self {
        let gram = gram_delta(space).gram;
        let roots: Vec<f64> = space.weights().iter().map(|w| w.sqrt()).collect();
        Self {
            coords: (0..space.n())
                .map(|x| gram.row(x).iter().zip(&roots).map(|(g, r)| g * r).collect())
                .collect(),
            weights: space.weights().to_vec(),
            provenance: Provenance::DeltaImage,
        }
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn dim(&self) -> usize {
        self.coords[0].len()
    }

    pub fn distances(&self) -> SquareMatrix {
        euclidean_distances(&self.coords)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn euclidean_distances(coords: &[Vec<f64>]) -> SquareMatrix {
    let n = coords.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { euclid(&coords[i], &coords[j]) }).collect())
        .collect();
    SquareMatrix::from_fn(n, |i, j| if i <= j { rows[i][j] } else { rows[j][i] })
}

/// Spectrum of the doubly centered Gram matrix `−½·J·D²·J`.
#[derive(Clone, Debug, Serialize)]
pub struct GramSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub embeddable: bool,
    pub min_dimension: usize,
    pub tolerance: f64,
    pub centered_gram: SquareMatrix,
}

pub fn schoenberg_test(d: &MetricMatrix) -> GramSpectrum {
    let n = d.n();
    let sq = d.matrix().map(|v| v * v);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let centered_gram =
        SquareMatrix::from_fn(n, |i, j| -0.5 * (sq.get(i, j) - row_mean[i] - row_mean[j] + grand));
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(centered_gram.to_nalgebra())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(f64::total_cmp);
    let spread = match (eigenvalues.first(), eigenvalues.last()) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => 0.0,
    };
    let tolerance = 1e-9 * spread.max(1.0);
    GramSpectrum {
        embeddable: eigenvalues.first().is_none_or(|v| *v >= -tolerance),
        min_dimension: eigenvalues.iter().filter(|v| **v > tolerance).count(),
        eigenvalues,
        tolerance,
        centered_gram,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gaussian,
    Pca,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub target_dim: usize,
    pub method: Method,
    pub trials: usize,
    pub seed: u64,
    pub lower: f64,
    pub upper: f64,
    pub distortion: f64,
    pub lower_witness: (usize, usize),
    pub upper_witness: (usize, usize),
    /// Trial that produced the reported map.
    pub best_trial: usize,
    /// Best distortion after each trial.
    pub history: Vec<f64>,
    /// PCA targets above the ambient dimension are lowered to it.
    pub clamped: bool,
}

impl EmbeddingReport {
    fn from_constants(c: &LipschitzReport, target_dim: usize, method: Method, trials: usize, seed: u64) -> Self {
        Self {
            target_dim,
            method,
            trials,
            seed,
            lower: c.lower,
            upper: c.upper,
            distortion: c.distortion(),
            lower_witness: c.lower_witness,
            upper_witness: c.upper_witness,
            best_trial: 0,
            history: vec![c.distortion()],
            clamped: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Projection {
    pub report: EmbeddingReport,
    pub image: PointConfiguration,
}

/// The `N×dim` Gaussian map of trial `t`, scaled by `1/√N`: the master seed
/// fixes the key and `t` selects the ChaCha stream.
fn gaussian_map(seed: u64, trial: usize, target: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let scale = 1.0 / (target as f64).sqrt();
    (0..target)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect())
        .collect()
}

fn apply_map(map: &[Vec<f64>], coords: &[Vec<f64>]) -> Vec<Vec<f64>> {
    coords
        .iter()
        .map(|x| map.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
        .collect()
}

fn pca_coords(points: &PointConfiguration, target: usize) -> Vec<Vec<f64>> {
    let dim = points.dim();
    let total: f64 = points.weights.iter().sum();
    let mean: Vec<f64> = (0..dim)
        .map(|k| points.coords.iter().zip(&points.weights).map(|(x, w)| x[k] * w).sum::<f64>() / total)
        .collect();
    let centered: Vec<Vec<f64>> = points
        .coords
        .iter()
        .map(|x| x.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let cov = DMatrix::from_fn(dim, dim, |a, b| {
        centered.iter().zip(&points.weights).map(|(x, w)| w * x[a] * x[b]).sum::<f64>()
    });
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = order[..target]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    apply_map(&axes, &centered)
}

/// Linear maps `R^dim → R^N`, scored by the extremal Lipschitz constants of
/// the image distances against the configuration's own distances.
pub fn project_search(
    points: &PointConfiguration,
    target: usize,
    trials: usize,
    seed: u64,
    method: Method,
) -> Result<Projection> {
    if target == 0 {
        return Err(Error::param("N", "target dimension must be at least 1"));
    }
    if points.n() < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: points.n() });
    }
    let own = points.distances();
    let wrap = |coords| PointConfiguration {
        coords,
        weights: points.weights.clone(),
        provenance: Provenance::Projected,
    };
    match method {
        Method::Pca => {
            let clamped = target > points.dim();
            if clamped {
                log::warn!("PCA target {target} exceeds ambient dimension {}; clamping", points.dim());
            }
            let target = target.min(points.dim());
            let image = wrap(pca_coords(points, target));
            let c = lipschitz_constants(&own, &image.distances())?;
            let mut report = EmbeddingReport::from_constants(&c, target, method, 1, seed);
            report.clamped = clamped;
            Ok(Projection { report, image })
        }
        Method::Gaussian => {
            if trials == 0 {
                return Err(Error::param("trials", "gaussian search needs at least one trial"));
            }
            let scored: Vec<LipschitzReport> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let map = gaussian_map(seed, t, target, points.dim());
                    let image = euclidean_distances(&apply_map(&map, &points.coords));
                    lipschitz_constants(&own, &image)
                })
                .collect::<Result<_>>()?;
            let mut best = 0;
            let mut history = Vec::with_capacity(trials);
            for (t, c) in scored.iter().enumerate() {
                // strict improvement only: ties keep the earliest trial
                if c.distortion() < scored[best].distortion() {
                    best = t;
                }
                history.push(scored[best].distortion());
            }
            let map = gaussian_map(seed, best, target, points.dim());
            let image = wrap(apply_map(&map, &points.coords));
            let mut report = EmbeddingReport::from_constants(&scored[best], target, method, trials, seed);
            report.best_trial = best;
            report.history = history;
            Ok(Projection { report, image })
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PipelineOptions {
    pub method: Method,
    pub trials: usize,
    pub seed: u64,
    /// Route through `ι_{Δ(d)} = T_d ∘ ι_d` instead of `ι_d`.
    pub through_delta: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    /// Composite `(X, d) → R^N`, measured against the original `d`.
    pub composite: EmbeddingReport,
    /// `(X, d) → L²(μ)` stage.
    pub canonical_stage: LipschitzReport,
    /// `L²(μ) ⊃ image → R^N` stage.
    pub projection_stage: EmbeddingReport,
}

pub fn embed_pipeline(space: &MetricMeasureSpace, target: usize, opts: PipelineOptions) -> Result<PipelineReport> {
    let points = if opts.through_delta {
        PointConfiguration::delta(space)
    } else {
        PointConfiguration::canonical(space)
    };
    let d = space.distances().matrix();
    let canonical_stage = lipschitz_constants(d, &points.distances())?;
    let projection = project_search(&points, target, opts.trials, opts.seed, opts.method)?;
    let c = lipschitz_constants(d, &projection.image.distances())?;
    let stage = &projection.report;
    let mut composite = EmbeddingReport::from_constants(&c, stage.target_dim, opts.method, stage.trials, opts.seed);
    composite.best_trial = stage.best_trial;
    composite.clamped = stage.clamped;
    Ok(PipelineReport {
        composite,
        canonical_stage,
        projection_stage: projection.report,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionSet {
    /// Ordered pairs, i.e. normalized differences `(x − y)/‖x − y‖`.
    pub count: usize,
    /// Classes after identifying `u` with `−u`.
    pub antipodal_classes: usize,
    pub clusters: usize,
    /// Smallest norm of a cluster mean of sign-normalized directions.
    pub min_cluster_mean_norm: f64,
}

/// Flip `u` so its first non-negligible coordinate is positive.
fn sign_normalize(mut u: Vec<f64>) -> Vec<f64> {
    if let Some(v) = u.iter().find(|v| v.abs() > 1e-12) {
        if *v < 0.0 {
            u.iter_mut().for_each(|c| *c = -*c);
        }
    }
    u
}

/// Normalized differences of a configuration, up to sign, grouped greedily
/// into clusters of chordal radius `cluster_radius` around their first member.
pub fn direction_set(points: &PointConfiguration, cluster_radius: f64) -> Result<DirectionSet> {
    let n = points.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let mut reps = Vec::with_capacity(n * (n - 1) / 2);
    for x in 0..n {
        for y in x + 1..n {
            let diff: Vec<f64> = points.coords[x].iter().zip(&points.coords[y]).map(|(a, b)| a - b).collect();
            let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(Error::Precondition {
                    reason: "duplicate points have no direction".into(),
                    witness: vec![x, y],
                });
            }
            reps.push(sign_normalize(diff.into_iter().map(|v| v / norm).collect()));
        }
    }
    let mut assigned = vec![false; reps.len()];
    let mut clusters = 0;
    let mut min_norm = f64::INFINITY;
    for lead in 0..reps.len() {
        if assigned[lead] {
            continue;
        }
        clusters += 1;
        let mut sum = vec![0.0; reps[lead].len()];
        let mut members = 0usize;
        for k in lead..reps.len() {
            if !assigned[k] && euclid(&reps[k], &reps[lead]) <= cluster_radius {
                assigned[k] = true;
                members += 1;
                sum.iter_mut().zip(&reps[k]).for_each(|(s, v)| *s += v);
            }
        }
        let mean_norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt() / members as f64;
        min_norm = min_norm.min(mean_norm);
    }
    Ok(DirectionSet {
        count: n * (n - 1),
        antipodal_classes: reps.len(),
        clusters,
        min_cluster_mean_norm: min_norm,
    })
}

/// Largest size scanned over all quadruples; beyond it quadruples are sampled.
pub const QUADRUPLE_EXHAUSTIVE_CAP: usize = 60;
pub const QUADRUPLE_SAMPLES: usize = 1_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct QuadrupleScan {
    /// Largest `LHS − RHS` (sob2) or largest `LHS/(‖x−y‖‖u−v‖)` (sob1).
    pub value: f64,
    /// `[x, y, u, v]`.
    pub witness: [usize; 4],
    pub checked: u64,
    pub sampled: bool,
}

#[inline]
fn second_difference(d: &SquareMatrix, x: usize, y: usize, u: usize, v: usize) -> f64 {
    (d.get(x, u) - d.get(y, u) - (d.get(x, v) - d.get(y, v))).abs()
}

/// Max of `score` over quadruples with `x < y`, `u < v`, exhaustively for
/// small `n` and over seeded samples otherwise.
fn scan_quadruples(n: usize, seed: Option<u64>, score: impl Fn(usize, usize, usize, usize) -> f64 + Sync) -> Result<QuadrupleScan> {
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let better = |a: (f64, [usize; 4]), b: (f64, [usize; 4])| if b.0 > a.0 { b } else { a };
    let start = (f64::NEG_INFINITY, [0, 1, 0, 1]);
    if n <= QUADRUPLE_EXHAUSTIVE_CAP {
        let best = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut best = start;
                for y in x + 1..n {
                    for u in 0..n {
                        for v in u + 1..n {
                            best = better(best, (score(x, y, u, v), [x, y, u, v]));
                        }
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(start, better);
        let pairs = (n * (n - 1) / 2) as u64;
        return Ok(QuadrupleScan {
            value: best.0,
            witness: best.1,
            checked: pairs * pairs,
            sampled: false,
        });
    }
    let Some(seed) = seed else {
        return Err(Error::param(
            "seed",
            format!("{n} points exceed the exhaustive cap {QUADRUPLE_EXHAUSTIVE_CAP}; sampling needs a seed"),
        ));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = |rng: &mut ChaCha8Rng| loop {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            break (a.min(b), a.max(b));
        }
    };
    let mut best = start;
    for _ in 0..QUADRUPLE_SAMPLES {
        let (x, y) = pair(&mut rng);
        let (u, v) = pair(&mut rng);
        best = better(best, (score(x, y, u, v), [x, y, u, v]));
    }
    Ok(QuadrupleScan {
        value: best.0,
        witness: best.1,
        checked: QUADRUPLE_SAMPLES as u64,
        sampled: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadrupleReport {
    pub p: f64,
    pub q: f64,
    pub sob2_max_violation: f64,
    pub sob2: QuadrupleScan,
}

/// `|d(x,u) − d(y,u) − [d(x,v) − d(y,v)]| ≤ 2·d(x,y)^{1/p}·d(u,v)^{1/q}`,
/// asserted over all quadruples.
pub fn quadruple_inequalities(d: &MetricMatrix, p: f64, seed: Option<u64>) -> Result<QuadrupleReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("must satisfy 1 < p < ∞, got {p}")));
    }
    let q = p / (p - 1.0);
    let m = d.matrix();
    let scan = scan_quadruples(d.n(), seed, |x, y, u, v| {
        second_difference(m, x, y, u, v) - 2.0 * m.get(x, y).powf(1.0 / p) * m.get(u, v).powf(1.0 / q)
    })?;
    let scale = d.diameter().max(1.0);
    if scan.value > CHECK_TOL * scale {
        return Err(Error::Assertion {
            what: "quadruple inequality with exponents p, q",
            value: scan.value,
            bound: 0.0,
            witness: scan.witness.to_vec(),
        });
    }
    Ok(QuadrupleReport {
        p,
        q,
        sob2_max_violation: scan.value,
        sob2: scan,
    })
}

/// Smallest `L` with `|‖x−u‖ − ‖y−u‖ − [‖x−v‖ − ‖y−v‖]| ≤ L·‖x−y‖·‖u−v‖` on the configuration.
pub fn sob1_best_l(points: &PointConfiguration, seed: Option<u64>) -> Result<QuadrupleScan> {
    let m = points.distances();
    scan_quadruples(points.n(), seed, |x, y, u, v| {
        let denom = m.get(x, y) * m.get(u, v);
        if denom > 0.0 {
            second_difference(&m, x, y, u, v) / denom
        } else {
            0.0
        }
    })
}
