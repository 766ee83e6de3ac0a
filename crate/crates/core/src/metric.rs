//! Finite metric-measure spaces and the metric plumbing shared by every
//! other module.
//!
//! Matrices are dense and row-major. A [`MetricMatrix`] is structurally sound
//! (square, finite, nonnegative) by construction; the metric axioms themselves
//! are checked by [`validate_metric`], which reports violations instead of
//! failing, so callers can decide how strict to be.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::{canonical, Error, Result};

/// Relative slack for the triangle inequality and symmetry, scaled by the
/// diameter of the matrix under test.
pub const TRIANGLE_RTOL: f64 = 1e-12;

/// Largest size validated exhaustively by default; above it triples are sampled.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 1500;

/// Number of sampled triples used when a space is too large for a full scan.
pub const DEFAULT_TRIPLE_SAMPLES: usize = 1_000_000;

/// Dense square matrix of `f64`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    /// Builds a matrix from rows, rejecting ragged or non-square input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Structural(format!(
                    "matrix is not square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { n, data })
    }

    /// Builds a matrix from a row-major buffer of length `n * n`.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(SquareMatrix { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest entry, or 0 for the empty matrix.
    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `|a_ij - b_ij|`.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl Serialize for SquareMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.data.chunks(self.n.max(1)).take(self.n))
    }
}

/// A structurally valid candidate metric: square, finite, nonnegative.
///
/// Whether it satisfies the metric axioms is a separate question answered by
/// [`validate_metric`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MetricMatrix(SquareMatrix);

impl MetricMatrix {
    pub fn new(matrix: SquareMatrix) -> Result<Self> {
        let n = matrix.n();
        for i in 0..n {
            for j in 0..n {
                let v = matrix.get(i, j);
                if !v.is_finite() {
                    return Err(Error::Structural(format!(
                        "non-finite distance {v} at ({i}, {j})"
                    )));
                }
                if v < 0.0 {
                    return Err(Error::Structural(format!(
                        "negative distance {v} at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(MetricMatrix(matrix))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SquareMatrix::from_rows(rows)?)
    }

    /// Wraps a matrix whose entries are known to be finite and nonnegative.
    pub(crate) fn from_trusted(matrix: SquareMatrix) -> Self {
        debug_assert!(matrix.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
        MetricMatrix(matrix)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.0.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.to_rows()
    }

    pub fn diameter(&self) -> f64 {
        self.0.max_entry()
    }

    /// Entrywise `c · d`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("scale", format!("must be positive, got {c}")));
        }
        Ok(MetricMatrix(self.0.map(|v| c * v)))
    }

    /// Entrywise difference `self - other` as a plain matrix.
    pub fn difference(&self, other: &MetricMatrix) -> Result<SquareMatrix> {
        check_same_size(self.n(), other.n())?;
        let n = self.n();
        Ok(SquareMatrix::from_fn(n, |i, j| self.get(i, j) - other.get(i, j)))
    }
}

pub(crate) fn check_same_size(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::SizeMismatch { expected, found });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    ZeroDiagonal,
    Positivity,
    Symmetry,
    Triangle,
}

/// Worst witness of one violated axiom.
///
/// Witness layout: `[i]` for the diagonal, `[i, j]` for positivity and
/// symmetry, `[i, k, j]` for `d(i,k) > d(i,j) + d(j,k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub axiom: Axiom,
    pub witness: Vec<usize>,
    pub magnitude: f64,
    pub count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ValidationMode {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

impl ValidationMode {
    /// Exhaustive up to `cap` points, sampled with [`DEFAULT_TRIPLE_SAMPLES`] beyond.
    pub fn for_size(n: usize, cap: usize, seed: u64) -> Self {
        if n <= cap {
            ValidationMode::Exhaustive
        } else {
            ValidationMode::Sampled {
                samples: DEFAULT_TRIPLE_SAMPLES,
                seed,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub mode: ValidationMode,
    pub triples_checked: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn violation(&self, axiom: Axiom) -> Option<&Violation> {
        self.violations.iter().find(|v| v.axiom == axiom)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed {
            return write!(f, "all axioms hold");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| {
                format!(
                    "{:?} x{} (worst {:?}, magnitude {:e})",
                    v.axiom, v.count, v.witness, v.magnitude
                )
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Default, Clone)]
struct Worst {
    witness: Vec<usize>,
    magnitude: f64,
    count: u64,
}

impl Worst {
    fn record(&mut self, witness: &[usize], magnitude: f64) {
        if self.count == 0 || magnitude > self.magnitude {
            self.witness = witness.to_vec();
            self.magnitude = magnitude;
        }
        self.count += 1;
    }

    fn merge(&mut self, other: Worst) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 || other.magnitude > self.magnitude {
            self.witness = other.witness;
            self.magnitude = other.magnitude;
        }
        self.count += other.count;
    }

    fn into_violation(self, axiom: Axiom) -> Option<Violation> {
        (self.count > 0).then_some(Violation {
            axiom,
            witness: self.witness,
            magnitude: self.magnitude,
            count: self.count,
        })
    }
}

/// Checks the metric axioms on `d`.
///
/// Exhaustive mode scans every triple; sampled mode draws random triples from
/// a seeded generator but still checks the diagonal, positivity and symmetry
/// on every pair.
pub fn validate_metric(d: &MetricMatrix, mode: ValidationMode) -> ValidationReport {
    scan_axioms(d.matrix(), mode, true)
}

/// Same as [`validate_metric`] without requiring positive off-diagonal entries.
pub fn validate_pseudometric(d: &SquareMatrix, mode: ValidationMode) -> ValidationReport {
    scan_axioms(d, mode, false)
}

fn scan_axioms(d: &SquareMatrix, mode: ValidationMode, strict: bool) -> ValidationReport {
    let n = d.n();
    let tol = TRIANGLE_RTOL * d.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut diag = Worst::default();
    let mut positivity = Worst::default();
    let mut symmetry = Worst::default();

    for i in 0..n {
        let v = d.get(i, i);
        if v != 0.0 {
            diag.record(&[i], v.abs());
        }
        for j in i + 1..n {
            let (a, b) = (d.get(i, j), d.get(j, i));
            if strict && !(a > 0.0 && b > 0.0) {
                positivity.record(&[i, j], -a.min(b));
            }
            let asym = (a - b).abs();
            if asym > tol {
                symmetry.record(&[i, j], asym);
            }
        }
    }

    let (triangle, triples_checked) = match mode {
        ValidationMode::Exhaustive => {
            let per_row: Vec<Worst> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut w = Worst::default();
                    let ri = d.row(i);
                    for k in i + 1..n {
                        let dik = ri[k];
                        for j in 0..n {
                            if j == i || j == k {
                                continue;
                            }
                            let excess = dik - ri[j] - d.get(j, k);
                            if excess > tol {
                                w.record(&[i, k, j], excess);
                            }
                        }
                    }
                    w
                })
                .collect();
            let mut all = Worst::default();
            for w in per_row {
                all.merge(w);
            }
            let pairs = (n * n.saturating_sub(1) / 2) as u64;
            (all, pairs * n.saturating_sub(2) as u64)
        }
        ValidationMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w = Worst::default();
            let mut checked = 0;
            if n >= 3 {
                for _ in 0..samples {
                    let i = rng.random_range(0..n);
                    let j = rng.random_range(0..n);
                    let k = rng.random_range(0..n);
                    if i == j || j == k || i == k {
                        continue;
                    }
                    checked += 1;
                    let excess = d.get(i, k) - d.get(i, j) - d.get(j, k);
                    if excess > tol {
                        w.record(&[i, k, j], excess);
                    }
                }
            }
            (w, checked)
        }
    };

    let violations: Vec<Violation> = [
        diag.into_violation(Axiom::ZeroDiagonal),
        positivity.into_violation(Axiom::Positivity),
        symmetry.into_violation(Axiom::Symmetry),
        triangle.into_violation(Axiom::Triangle),
    ]
    .into_iter()
    .flatten()
    .collect();

    ValidationReport {
        passed: violations.is_empty(),
        mode,
        triples_checked,
        violations,
    }
}

/// A finite metric space with a strictly positive weight on every point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricMeasureSpace {
    labels: Vec<String>,
    distances: MetricMatrix,
    weights: Vec<f64>,
}

impl MetricMeasureSpace {
    /// Builds and validates a space; exhaustive up to [`DEFAULT_EXHAUSTIVE_CAP`] points.
    pub fn new(labels: Vec<String>, distances: MetricMatrix, weights: Vec<f64>) -> Result<Self> {
        let mode = ValidationMode::for_size(distances.n(), DEFAULT_EXHAUSTIVE_CAP, 0);
        Self::with_validation(labels, distances, weights, mode)
    }

    pub fn with_validation(
        labels: Vec<String>,
        distances: MetricMatrix,
        weights: Vec<f64>,
        mode: ValidationMode,
    ) -> Result<Self> {
        let space = Self::from_trusted_parts(labels, distances, weights)?;
        let report = validate_metric(&space.distances, mode);
        if !report.passed {
            return Err(Error::Axiom(Box::new(report)));
        }
        Ok(space)
    }

    /// Checks labels and weights but skips the axiom scan.
    ///
    /// For matrices that are metrics by construction (grids, Euclidean
    /// distances, snowflakes of validated metrics).
    pub fn from_trusted_parts(
        labels: Vec<String>,
        distances: MetricMatrix,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = distances.n();
        if labels.len() != n {
            return Err(Error::Structural(format!(
                "{} labels for {n} points",
                labels.len()
            )));
        }
        if weights.len() != n {
            return Err(Error::Structural(format!(
                "{} weights for {n} points",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Structural(format!(
                "weight of point {i} (`{}`) must be positive and finite, got {w}",
                labels[i]
            )));
        }
        Ok(MetricMeasureSpace {
            labels,
            distances,
            weights,
        })
    }

    /// Labels `0, 1, …, n-1`.
    pub fn unlabeled(distances: MetricMatrix, weights: Vec<f64>) -> Result<Self> {
        let labels = (0..distances.n()).map(|i| i.to_string()).collect();
        Self::new(labels, distances, weights)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.distances.n()
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.distances.get(i, j)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn distances(&self) -> &MetricMatrix {
        &self.distances
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.distances.diameter()
    }

    /// Same points and weights with another metric, trusted to be valid.
    pub fn with_distances(&self, distances: MetricMatrix) -> Result<Self> {
        check_same_size(self.n(), distances.n())?;
        Ok(MetricMeasureSpace {
            labels: self.labels.clone(),
            distances,
            weights: self.weights.clone(),
        })
    }

    /// Same metric with weights rescaled to total mass 1.
    pub fn normalized(&self) -> Self {
        let m = self.total_mass();
        MetricMeasureSpace {
            labels: self.labels.clone(),
            distances: self.distances.clone(),
            weights: self.weights.iter().map(|w| w / m).collect(),
        }
    }

    /// Same weights with every distance multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.with_distances(self.distances.scaled(c)?)
    }

    /// Restriction to the points listed in `keep`, in that order.
    pub fn subspace(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&bad) = keep.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Domain(format!("index {bad} out of range")));
        }
        let m = keep.len();
        let d = SquareMatrix::from_fn(m, |a, b| self.d(keep[a], keep[b]));
        Ok(MetricMeasureSpace {
            labels: keep.iter().map(|&i| self.labels[i].clone()).collect(),
            distances: MetricMatrix::from_trusted(d),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
        })
    }
}

/// Entrywise power `d^s` for `0 < s ≤ 1`.
pub fn snowflake(d: &MetricMatrix, s: f64) -> Result<MetricMatrix> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::param("s", format!("snowflake exponent must lie in (0, 1], got {s}")));
    }
    if s == 1.0 {
        return Ok(d.clone());
    }
    let out = MetricMatrix::from_trusted(d.matrix().map(|v| v.powf(s)));
    debug_assert!(
        out.n() > 120 || validate_metric(&out, ValidationMode::Exhaustive).passed,
        "snowflake of a metric must be a metric"
    );
    Ok(out)
}

/// Extremal ratios `dst/src` over unordered pairs of distinct points.
///
/// Read as the lower and upper Lipschitz constants of the identity map
/// `(X, src) → (X, dst)`, or equivalently as the gauge constants
/// `ℓ·src ≤ dst ≤ L·src`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: (usize, usize),
    pub upper_witness: (usize, usize),
}

impl LipschitzReport {
    pub fn distortion(&self) -> f64 {
        self.upper / self.lower
    }
}

/// Lower and upper Lipschitz constants of the identity `(X, src) → (X, dst)`.
pub fn lipschitz_constants(src: &SquareMatrix, dst: &SquareMatrix) -> Result<LipschitzReport> {
    check_same_size(src.n(), dst.n())?;
    let n = src.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let mut report = LipschitzReport {
        lower: f64::INFINITY,
        upper: f64::NEG_INFINITY,
        lower_witness: (0, 1),
        upper_witness: (0, 1),
    };
    for i in 0..n {
        for j in i + 1..n {
            let s = src.get(i, j);
            if !(s > 0.0) {
                return Err(Error::Domain(format!(
                    "source distance between {i} and {j} is not positive"
                )));
            }
            let r = dst.get(i, j) / s;
            if r < report.lower {
                report.lower = r;
                report.lower_witness = (i, j);
            }
            if r > report.upper {
                report.upper = r;
                report.upper_witness = (i, j);
            }
        }
    }
    Ok(report)
}

/// Gauge constants `ℓ(σ,φ)·σ ≤ φ ≤ L(σ,φ)·σ` with witness pairs.
pub fn gauge_constants(sigma: &MetricMatrix, phi: &MetricMatrix) -> Result<LipschitzReport> {
    lipschitz_constants(sigma.matrix(), phi.matrix())
}

/// Uniform grid `i/(n-1)` on `[0, 1]` with the standard distance and weight `1/n` per point.
pub fn build_interval_grid(n: usize) -> Result<MetricMeasureSpace> {
    if n < 2 {
        return Err(Error::param("n", format!("interval grid needs n ≥ 2, got {n}")));
    }
    let step = (n - 1) as f64;
    let t: Vec<f64> = (0..n).map(|i| i as f64 / step).collect();
    let d = SquareMatrix::from_fn(n, |i, j| (t[i] - t[j]).abs());
    MetricMeasureSpace::from_trusted_parts(
        (0..n).map(|i| format!("t{i}")).collect(),
        MetricMatrix::from_trusted(d),
        vec![1.0 / n as f64; n],
    )
}

/// The image of the canonical map with the inherited `L²(μ)` distance and the
/// pushforward measure. Labels and weights carry over because the map is injective.
pub fn pushforward_along_canonical(space: &MetricMeasureSpace) -> Result<MetricMeasureSpace> {
    space.with_distances(canonical::canonical_metric(space))
}
