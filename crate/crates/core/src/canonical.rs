//! The canonical map `ι_d: x ↦ d(x, ·)` into `L²(μ)` and everything derived
//! from it.
//!
//! `L²(μ)` is realized through weight-scaled coordinates
//! `W[x][z] = d(x, z)·√μ_z`, so Euclidean dot products of rows of `W` are the
//! `L²(μ)` inner products of the functions `d(x, ·)`. Kernel entries and the
//! operator `T_d` share one summation routine, [`weighted_dot`], which makes
//! `T_d(ι_d(x)) = ι_{Δ(d)}(x)` hold bit for bit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::metric::{
    check_same_size, validate_pseudometric, MetricMatrix, MetricMeasureSpace, SquareMatrix,
    ValidationMode, ValidationReport,
};
use crate::{Error, Result};

/// Absolute slack for checked inequalities.
pub const CHECK_TOL: f64 = 1e-12;

fn tol_for(bound: f64) -> f64 {
    CHECK_TOL * bound.abs().max(1.0)
}

/// `Σ_z a[z]·b[z]·w[z]`, summed in index order.
#[inline]
pub fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for z in 0..w.len() {
        acc += a[z] * b[z] * w[z];
    }
    acc
}

#[inline]
fn weighted_dist(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for z in 0..w.len() {
        let t = a[z] - b[z];
        acc += t * t * w[z];
    }
    acc.sqrt()
}

/// Symmetric matrix filled from a per-pair function evaluated once per
/// unordered pair (diagonal included), rows in parallel.
fn symmetric_from_pairs(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> SquareMatrix {
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| f(i, j)).collect())
        .collect();
    let mut m = SquareMatrix::zeros(n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            m.set(i, i + off, v);
            m.set(i + off, i, v);
        }
    }
    m
}

/// `L²(μ)` distances between the rows of `rows`, read as functions on the points.
pub fn l2_row_distances(rows: &SquareMatrix, weights: &[f64]) -> SquareMatrix {
    symmetric_from_pairs(rows.n(), |i, j| {
        if i == j {
            0.0
        } else {
            weighted_dist(rows.row(i), rows.row(j), weights)
        }
    })
}

/// `Δ(k)(x, y) = Σ_z k(x, z)·k(z, y)·μ_z` for a general kernel `k`.
pub fn weighted_row_gram(kernel: &SquareMatrix, weights: &[f64]) -> SquareMatrix {
    symmetric_from_pairs(kernel.n(), |i, j| weighted_dot(kernel.row(i), kernel.row(j), weights))
}

/// The canonical metric `ρ_d(x, y) = ‖ι_d(x) − ι_d(y)‖₂`.
pub fn canonical_metric(space: &MetricMeasureSpace) -> MetricMatrix {
    MetricMatrix::from_trusted(l2_row_distances(space.distances().matrix(), space.weights()))
}

/// `L²(μ)` norm of a function given by its values.
pub fn l2_norm(space: &MetricMeasureSpace, f: &[f64]) -> Result<f64> {
    check_same_size(space.n(), f.len())?;
    Ok(weighted_dot(f, f, space.weights()).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalImage {
    /// `values[x][z] = d(x, z)`.
    pub values: SquareMatrix,
    /// `coords[x][z] = d(x, z)·√μ_z`.
    pub coords: SquareMatrix,
    /// `‖ι_d(x)‖₂`.
    pub norms: Vec<f64>,
}

pub fn canonical_image(space: &MetricMeasureSpace) -> CanonicalImage {
    let n = space.n();
    let w = space.weights();
    let roots: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let values = space.distances().matrix().clone();
    let coords = SquareMatrix::from_fn(n, |x, z| values.get(x, z) * roots[z]);
    let norms = (0..n)
        .map(|x| weighted_dot(values.row(x), values.row(x), w).sqrt())
        .collect();
    CanonicalImage {
        values,
        coords,
        norms,
    }
}

/// The kernel `Δ(d)(x, y) = ⟨ι_d(x), ι_d(y)⟩` and its minimum.
#[derive(Clone, Debug, Serialize)]
pub struct KernelMatrix {
    pub gram: SquareMatrix,
    pub s_min: f64,
    pub s_min_pair: (usize, usize),
}

pub fn gram_delta(space: &MetricMeasureSpace) -> KernelMatrix {
    let gram = weighted_row_gram(space.distances().matrix(), space.weights());
    let n = gram.n();
    let mut s_min = f64::INFINITY;
    let mut s_min_pair = (0, 0);
    for x in 0..n {
        for y in x..n {
            if gram.get(x, y) < s_min {
                s_min = gram.get(x, y);
                s_min_pair = (x, y);
            }
        }
    }
    KernelMatrix {
        gram,
        s_min,
        s_min_pair,
    }
}

/// Closed form of `∫₀¹ |x − z|·|y − z| dz`.
pub fn interval_delta_closed_form(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("({x}, {y}) is outside [0, 1]²")));
    }
    // branch for y ≤ x; the other branch is the same expression with x and y swapped
    let (hi, lo) = if y <= x { (x, y) } else { (y, x) };
    Ok(lo * lo * (hi - lo / 3.0) + hi * hi * (hi / 3.0 - lo) + hi * lo - (hi + lo) / 2.0 + 1.0 / 3.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalDeltaComparison {
    pub n: usize,
    pub max_abs_error: f64,
    /// Grid indices of the worst pair.
    pub witness: (usize, usize),
    /// `2/n`.
    pub bound: f64,
    pub holds: bool,
}

/// `Δ(d)` on the uniform `n`-point grid of `[0, 1]` against the continuum
/// kernel, over all pairs of grid points.
pub fn interval_delta_comparison(n: usize) -> Result<IntervalDeltaComparison> {
    let space = crate::metric::build_interval_grid(n)?;
    let gram = gram_delta(&space).gram;
    let step = (n - 1) as f64;
    let (max_abs_error, witness) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = (0.0_f64, (i, i));
            for j in i..n {
                let exact = interval_delta_closed_form(i as f64 / step, j as f64 / step)
                    .expect("grid points lie in [0, 1]");
                let e = (gram.get(i, j) - exact).abs();
                if e > best.0 {
                    best = (e, (i, j));
                }
            }
            best
        })
        .reduce(|| (0.0, (0, 0)), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let bound = 2.0 / n as f64;
    Ok(IntervalDeltaComparison {
        n,
        max_abs_error,
        witness,
        bound,
        holds: max_abs_error <= bound,
    })
}

/// Margins of the comparisons between `d`, `ρ_d`, `θ_d` and `κ_d`; a negative
/// margin beyond [`CHECK_TOL`] is a failure.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub s_min: f64,
    /// `min (ρ − (2√s/π)·θ)`.
    pub rho_lower_margin: f64,
    /// `min (√μ(X)·d − ρ)`.
    pub rho_upper_margin: f64,
    /// `min (d − ρ)`; only guaranteed nonnegative when `μ(X) ≤ 1`.
    pub rho_le_d_margin: f64,
    /// `min (κ − (2/π)·θ)`.
    pub kappa_lower_margin: f64,
    /// `min (θ − κ)`.
    pub kappa_upper_margin: f64,
    pub max_theta: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereMetrics {
    pub rho: MetricMatrix,
    /// Angles in radians between the radial projections.
    pub theta: SquareMatrix,
    pub kappa: MetricMatrix,
    pub cosine: SquareMatrix,
    pub sandwich: SandwichReport,
}

/// `cos θ_d` from the kernel, clamped to `[−1, 1]`, with an exact unit diagonal.
fn cosines(kernel: &KernelMatrix) -> Result<SquareMatrix> {
    let n = kernel.gram.n();
    let norms: Vec<f64> = (0..n).map(|x| kernel.gram.get(x, x).sqrt()).collect();
    if let Some(x) = norms.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("ι_d({x}) has zero norm")));
    }
    Ok(SquareMatrix::from_fn(n, |x, y| {
        if x == y {
            1.0
        } else {
            (kernel.gram.get(x, y) / (norms[x] * norms[y])).clamp(-1.0, 1.0)
        }
    }))
}

pub fn sphere_metrics(space: &MetricMeasureSpace) -> Result<SphereMetrics> {
    let kernel = gram_delta(space);
    sphere_metrics_with(space, &kernel)
}

pub fn sphere_metrics_with(space: &MetricMeasureSpace, kernel: &KernelMatrix) -> Result<SphereMetrics> {
    let n = space.n();
    let rho = canonical_metric(space);
    let cosine = cosines(kernel)?;
    let theta = cosine.map(f64::acos);
    let theta = SquareMatrix::from_fn(n, |x, y| if x == y { 0.0 } else { theta.get(x, y) });
    let kappa = MetricMatrix::from_trusted(theta.map(|t| 2.0 * (t / 2.0).sin()));

    let s = kernel.s_min.max(0.0);
    let root_mass = space.total_mass().sqrt();
    let mut sw = SandwichReport {
        s_min: kernel.s_min,
        rho_lower_margin: f64::INFINITY,
        rho_upper_margin: f64::INFINITY,
        rho_le_d_margin: f64::INFINITY,
        kappa_lower_margin: f64::INFINITY,
        kappa_upper_margin: f64::INFINITY,
        max_theta: 0.0,
        holds: true,
    };
    for x in 0..n {
        for y in x + 1..n {
            let (r, t, k, d) = (rho.get(x, y), theta.get(x, y), kappa.get(x, y), space.d(x, y));
            sw.rho_lower_margin = sw.rho_lower_margin.min(r - 2.0 * s.sqrt() / PI * t);
            sw.rho_upper_margin = sw.rho_upper_margin.min(root_mass * d - r);
            sw.rho_le_d_margin = sw.rho_le_d_margin.min(d - r);
            sw.kappa_lower_margin = sw.kappa_lower_margin.min(k - 2.0 / PI * t);
            sw.kappa_upper_margin = sw.kappa_upper_margin.min(t - k);
            sw.max_theta = sw.max_theta.max(t);
        }
    }
    sw.holds = [
        sw.rho_lower_margin,
        sw.rho_upper_margin,
        sw.kappa_lower_margin,
        sw.kappa_upper_margin,
    ]
    .iter()
    .all(|m| *m >= -CHECK_TOL);

    Ok(SphereMetrics {
        rho,
        theta,
        kappa,
        cosine,
        sandwich: sw,
    })
}

fn euclid_norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `u / ‖u‖`.
pub fn radial_projection(u: &[f64]) -> Result<Vec<f64>> {
    let norm = euclid_norm(u);
    if !(norm > 0.0) {
        return Err(Error::Domain("radial projection of the zero vector".into()));
    }
    Ok(u.iter().map(|v| v / norm).collect())
}

/// Derivative of the radial projection at `u` in direction `v`:
/// `(v − ⟨u, v⟩·u/‖u‖²) / ‖u‖`.
pub fn radial_derivative(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_same_size(u.len(), v.len())?;
    let norm = euclid_norm(u);
    if !(norm > 0.0) {
        return Err(Error::Domain("radial projection is undefined at zero".into()));
    }
    let coef = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (norm * norm);
    Ok(u.iter().zip(v).map(|(a, b)| (b - coef * a) / norm).collect())
}

/// `⟨ϖ(u) − ϖ(v), u − v⟩`, nonnegative because `ϖ` is the gradient of the norm.
pub fn radial_monotonicity(u: &[f64], v: &[f64]) -> Result<f64> {
    check_same_size(u.len(), v.len())?;
    let (pu, pv) = (radial_projection(u)?, radial_projection(v)?);
    Ok((0..u.len()).map(|i| (pu[i] - pv[i]) * (u[i] - v[i])).sum())
}

/// `(T_d f)(x) = ⟨ι_d(x), f⟩ = Σ_z d(x, z)·f(z)·μ_z`.
pub fn apply_td(space: &MetricMeasureSpace, f: &[f64]) -> Result<Vec<f64>> {
    check_same_size(space.n(), f.len())?;
    let d = space.distances();
    Ok((0..space.n())
        .map(|x| weighted_dot(d.row(x), f, space.weights()))
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct JdImage {
    pub values: Vec<f64>,
    pub lip_norm: f64,
    pub bound: f64,
}

/// `J_d f`: the values of `T_d f` viewed as a Lipschitz function, with its
/// Lipschitz norm and the operator bound `max{1, diam}·max{μ(X), √μ(X)}·‖f‖₂`.
pub fn apply_jd(space: &MetricMeasureSpace, f: &[f64]) -> Result<JdImage> {
    let values = apply_td(space, f)?;
    let lip = lip_norm(space, &values, 1.0)?;
    let mass = space.total_mass();
    let bound = space.diameter().max(1.0) * mass.max(mass.sqrt()) * l2_norm(space, f)?;
    if lip > bound + tol_for(bound) {
        return Err(Error::Assertion {
            what: "Lipschitz norm of J_d f",
            value: lip,
            bound,
            witness: vec![],
        });
    }
    Ok(JdImage {
        values,
        lip_norm: lip,
        bound,
    })
}

fn lip_norm_with(f: &[f64], denom: &SquareMatrix) -> f64 {
    let n = f.len();
    let sup = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut lip = 0.0_f64;
    for x in 0..n {
        for y in x + 1..n {
            lip = lip.max((f[x] - f[y]).abs() / denom.get(x, y));
        }
    }
    sup.max(lip)
}

/// `max{sup |f|, Lip(f)}` with the Lipschitz factor taken against `d^s`.
pub fn lip_norm(space: &MetricMeasureSpace, f: &[f64], s: f64) -> Result<f64> {
    check_same_size(space.n(), f.len())?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::param("s", format!("must lie in (0, 1], got {s}")));
    }
    let denom = if s == 1.0 {
        space.distances().matrix().clone()
    } else {
        space.distances().matrix().map(|v| v.powf(s))
    };
    Ok(lip_norm_with(f, &denom))
}

fn check_index(space: &MetricMeasureSpace, i: usize) -> Result<()> {
    if i >= space.n() {
        return Err(Error::Domain(format!("point index {i} out of range for {} points", space.n())));
    }
    Ok(())
}

/// Lipschitz norm of `d(x, ·) − d(y, ·)`, computed by brute force and checked
/// against `max{2, d(x, y)}`.
pub fn lambda_lip_distance(space: &MetricMeasureSpace, x: usize, y: usize) -> Result<f64> {
    check_index(space, x)?;
    check_index(space, y)?;
    if x == y {
        return Ok(0.0);
    }
    let g: Vec<f64> = (0..space.n()).map(|z| space.d(x, z) - space.d(y, z)).collect();
    let value = lip_norm(space, &g, 1.0)?;
    let expected = space.d(x, y).max(2.0);
    if (value - expected).abs() > tol_for(expected) {
        return Err(Error::Assertion {
            what: "Lip norm of λ_d(x) − λ_d(y) vs max{2, d(x,y)}",
            value,
            bound: expected,
            witness: vec![x, y],
        });
    }
    Ok(value)
}

#[derive(Clone, Debug, Serialize)]
pub struct SnowflakeLift {
    pub lip: f64,
    pub bound: f64,
    pub witness: (usize, usize),
}

/// Lipschitz constant of `x ↦ d(x, ·)` from `(X, d^s)` into `Lip_{1−s}(X)`,
/// against the bound `max{2, diam^{1−s}}`.
pub fn snowflake_lift_lip(space: &MetricMeasureSpace, s: f64) -> Result<SnowflakeLift> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("must lie in (0, 1), got {s}")));
    }
    let n = space.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let d = space.distances().matrix();
    let outer = d.map(|v| v.powf(s));
    let inner = d.map(|v| v.powf(1.0 - s));
    let per_x: Vec<(f64, (usize, usize))> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (0.0_f64, (x, x));
            let mut g = vec![0.0; n];
            for y in x + 1..n {
                for (z, gz) in g.iter_mut().enumerate() {
                    *gz = d.get(x, z) - d.get(y, z);
                }
                let ratio = lip_norm_with(&g, &inner) / outer.get(x, y);
                if ratio > best.0 {
                    best = (ratio, (x, y));
                }
            }
            best
        })
        .collect();
    let (lip, witness) = per_x
        .into_iter()
        .fold((0.0, (0, 1)), |acc, cur| if cur.0 > acc.0 { cur } else { acc });
    let bound = space.diameter().powf(1.0 - s).max(2.0);
    if lip > bound + tol_for(bound) {
        return Err(Error::Assertion {
            what: "Lipschitz constant of the snowflaked lift",
            value: lip,
            bound,
            witness: vec![witness.0, witness.1],
        });
    }
    Ok(SnowflakeLift {
        lip,
        bound,
        witness,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaLipBound {
    pub worst_ratio: f64,
    pub bound: f64,
    pub witness: (usize, usize),
    /// Smallest distance between two rows of `Δ(d)`; positive means injective.
    pub min_row_distance: f64,
    /// `min (1 + d(x,y))·max{‖ι_d(x)‖², ‖ι_{d^{1/2}}(x)‖²} − Δ(d)(x,y)` over ordered pairs.
    pub kernel_upper_margin: f64,
}

/// Distances between rows of `Δ(d)` in `L²(μ)`.
pub fn delta_image_metric(space: &MetricMeasureSpace, kernel: &KernelMatrix) -> SquareMatrix {
    l2_row_distances(&kernel.gram, space.weights())
}

/// Worst ratio `‖ι_{Δ(d)}(x) − ι_{Δ(d)}(y)‖₂ / d(x, y)` against
/// `diam·μ(X)^{3/2}`, plus an injectivity check on the rows of `Δ(d)`.
pub fn delta_lip_bound(space: &MetricMeasureSpace) -> Result<DeltaLipBound> {
    let n = space.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let kernel = gram_delta(space);
    let rd = delta_image_metric(space, &kernel);
    let mut out = DeltaLipBound {
        worst_ratio: 0.0,
        bound: space.diameter() * space.total_mass().powf(1.5),
        witness: (0, 1),
        min_row_distance: f64::INFINITY,
        kernel_upper_margin: f64::INFINITY,
    };
    let w = space.weights();
    for x in 0..n {
        let sq = kernel.gram.get(x, x);
        let half = weighted_dot(space.distances().row(x), &vec![1.0; n], w);
        for y in 0..n {
            let bound = (1.0 + space.d(x, y)) * sq.max(half);
            let margin = bound - kernel.gram.get(x, y);
            out.kernel_upper_margin = out.kernel_upper_margin.min(margin);
            if margin < -tol_for(bound) {
                return Err(Error::Assertion {
                    what: "pointwise upper bound on Δ(d)",
                    value: kernel.gram.get(x, y),
                    bound,
                    witness: vec![x, y],
                });
            }
        }
    }
    for x in 0..n {
        for y in x + 1..n {
            let r = rd.get(x, y) / space.d(x, y);
            if r > out.worst_ratio {
                out.worst_ratio = r;
                out.witness = (x, y);
            }
            if rd.get(x, y) < out.min_row_distance {
                out.min_row_distance = rd.get(x, y);
                if !(rd.get(x, y) > 0.0) {
                    return Err(Error::Assertion {
                        what: "rows of Δ(d) must be distinct",
                        value: 0.0,
                        bound: 0.0,
                        witness: vec![x, y],
                    });
                }
            }
        }
    }
    if out.worst_ratio > out.bound + tol_for(out.bound) {
        return Err(Error::Assertion {
            what: "Lipschitz ratio of ι_Δ(d)",
            value: out.worst_ratio,
            bound: out.bound,
            witness: vec![out.witness.0, out.witness.1],
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaGramComparison {
    /// `⟨ϖι_d(x), ϖι_d(y)⟩ = cos θ_d(x, y)`.
    pub cosine: SquareMatrix,
    /// `Σ_z κ_d(x, z)·κ_d(z, y)·μ_z`.
    pub kappa_gram: SquareMatrix,
    /// Largest off-diagonal `|cosine − kappa_gram|`.
    pub max_discrepancy: f64,
    pub discrepancy_pair: (usize, usize),
    /// Axiom scan of `1 − cos θ_d` as a pseudometric.
    pub one_minus_cosine: ValidationReport,
}

pub fn kappa_gram_comparison(space: &MetricMeasureSpace) -> Result<KappaGramComparison> {
    let n = space.n();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, found: n });
    }
    let sphere = sphere_metrics(space)?;
    let kappa_gram = weighted_row_gram(sphere.kappa.matrix(), space.weights());
    let mut max_discrepancy = 0.0;
    let mut discrepancy_pair = (0, 1);
    for x in 0..n {
        for y in x + 1..n {
            let gap = (sphere.cosine.get(x, y) - kappa_gram.get(x, y)).abs();
            if gap > max_discrepancy {
                max_discrepancy = gap;
                discrepancy_pair = (x, y);
            }
        }
    }
    let one_minus = sphere.cosine.map(|c| 1.0 - c);
    let one_minus_cosine = validate_pseudometric(&one_minus, ValidationMode::Exhaustive);
    Ok(KappaGramComparison {
        cosine: sphere.cosine,
        kappa_gram,
        max_discrepancy,
        discrepancy_pair,
        one_minus_cosine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    const THIRD: f64 = 1.0 / 3.0;

    #[test]
    fn p3_image_and_kernel() {
        let p3 = fixtures::p3();
        let img = canonical_image(&p3);
        for x in 0..3 {
            assert_abs_diff_eq!(img.norms[x] * img.norms[x], 2.0 * THIRD, epsilon = 1e-15);
        }
        let k = gram_delta(&p3);
        assert_abs_diff_eq!(k.s_min, THIRD, epsilon = 1e-15);
        assert_abs_diff_eq!(k.gram.get(0, 1), THIRD, epsilon = 1e-15);
        assert_abs_diff_eq!(k.gram.get(2, 2), 2.0 * THIRD, epsilon = 1e-15);
    }

    #[test]
    fn p2_kernel_has_zero_off_diagonal() {
        let p2 = fixtures::p2();
        let img = canonical_image(&p2);
        assert_eq!(img.values.row(0), &[0.0, 1.0]);
        assert_eq!(img.values.row(1), &[1.0, 0.0]);
        let k = gram_delta(&p2);
        assert_eq!(k.gram.get(0, 1), 0.0);
        assert_eq!(k.s_min, 0.0);
    }

    #[test]
    fn coords_realize_the_weighted_inner_product() {
        let space = fixtures::t4();
        let img = canonical_image(&space);
        let k = gram_delta(&space);
        for x in 0..4 {
            for y in 0..4 {
                let euclid: f64 = img.coords.row(x).iter().zip(img.coords.row(y)).map(|(a, b)| a * b).sum();
                assert_abs_diff_eq!(euclid, k.gram.get(x, y), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn closed_form_spot_values() {
        assert_abs_diff_eq!(interval_delta_closed_form(1.0, 0.0).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(interval_delta_closed_form(0.0, 0.0).unwrap(), THIRD, epsilon = 1e-15);
        assert_abs_diff_eq!(interval_delta_closed_form(0.5, 0.5).unwrap(), 1.0 / 12.0, epsilon = 1e-15);
        assert_eq!(
            interval_delta_closed_form(0.3, 0.8).unwrap(),
            interval_delta_closed_form(0.8, 0.3).unwrap()
        );
        assert!(interval_delta_closed_form(1.1, 0.0).is_err());
    }

    #[test]
    fn interval_grid_kernel_converges() {
        // oracle: dense numpy evaluation of the same grid sums
        for &(n, expected) in &[(10, 0.0185185185185186), (100, 0.0016835016835018424)] {
            let r = interval_delta_comparison(n).unwrap();
            assert_abs_diff_eq!(r.max_abs_error, expected, epsilon = 1e-12);
            assert!(r.holds);
        }
        assert!(interval_delta_comparison(1).is_err());
    }

    #[test]
    fn closed_form_matches_simpson_quadrature() {
        // |x−z||y−z| is piecewise quadratic with kinks at x and y; Simpson on
        // each smooth piece is exact.
        fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
        }
        for &(x, y) in &[(0.2, 0.7), (0.9, 0.1), (0.5, 0.5), (0.0, 1.0), (0.33, 0.34)] {
            let f = |z: f64| (x - z).abs() * (y - z).abs();
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            let exact = simpson(f, 0.0, lo) + simpson(f, lo, hi) + simpson(f, hi, 1.0);
            assert_abs_diff_eq!(interval_delta_closed_form(x, y).unwrap(), exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn p3_sphere_metrics() {
        let m = sphere_metrics(&fixtures::p3()).unwrap();
        assert_abs_diff_eq!(m.rho.get(0, 1), (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.theta.get(0, 1), PI / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.kappa.get(0, 1), 1.0, epsilon = 1e-15);
        assert_eq!(m.theta.get(1, 1), 0.0);
        assert_eq!(m.rho.get(2, 2), 0.0);
        assert!(m.sandwich.holds);
        assert!(m.sandwich.max_theta < PI / 2.0);
    }

    #[test]
    fn radial_projection_examples() {
        let u = [0.0, 1.0, 0.0];
        let v = [2.0, 0.0, -1.0];
        assert_eq!(radial_derivative(&u, &v).unwrap(), v.to_vec());
        let w = [3.0, -4.0, 12.0];
        let du = radial_derivative(&w, &w).unwrap();
        assert!(du.iter().all(|c| c.abs() < 1e-15));
        let p = radial_projection(&w).unwrap();
        assert_abs_diff_eq!(euclid_norm(&p), 1.0, epsilon = 1e-15);
        assert!(radial_projection(&[0.0, 0.0]).is_err());
        assert!(radial_monotonicity(&w, &v).unwrap() >= 0.0);
    }

    #[test]
    fn radial_derivative_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-4;
            let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let (pp, pm) = (radial_projection(&plus).unwrap(), radial_projection(&minus).unwrap());
            let fd: Vec<f64> = pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let exact = radial_derivative(&u, &v).unwrap();
            let err = euclid_norm(&fd.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-6 * euclid_norm(&exact), "{err}");
            let pu = radial_projection(&u).unwrap();
            let tangential: f64 = exact.iter().zip(&pu).map(|(a, b)| a * b).sum();
            assert!(tangential.abs() < 1e-12);
        }
    }

    #[test]
    fn td_examples() {
        let p3 = fixtures::p3();
        let ones = apply_td(&p3, &[1.0; 3]).unwrap();
        for v in ones {
            assert_abs_diff_eq!(v, 2.0 * THIRD, epsilon = 1e-15);
        }
        assert_eq!(apply_td(&p3, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let t4 = fixtures::t4();
        let ind = apply_td(&t4, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        for x in 0..4 {
            assert_eq!(ind[x], t4.d(x, 2) * t4.weights()[2]);
        }
        assert!(matches!(apply_td(&p3, &[1.0]), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn td_of_canonical_image_is_delta_row_bit_exact() {
        let space = fixtures::a2(2, 9, 2.0).space;
        let k = gram_delta(&space);
        for y in 0..space.n() {
            let image = apply_td(&space, space.distances().row(y)).unwrap();
            assert_eq!(image.as_slice(), k.gram.row(y));
        }
    }

    #[test]
    fn jd_bound_accounts_for_small_mass() {
        // f ≡ 1 on two points with unequal small weights: the Lipschitz norm
        // exceeds max{1, diam}·μ(X)·‖f‖₂ but stays below the √μ(X) form.
        let space = MetricMeasureSpace::unlabeled(
            fixtures::p2().distances().clone(),
            vec![0.01, 0.49],
        )
        .unwrap();
        let f = [1.0, 1.0];
        let jd = apply_jd(&space, &f).unwrap();
        let mass = space.total_mass();
        let naive = mass * l2_norm(&space, &f).unwrap();
        assert!(jd.lip_norm > naive);
        assert!(jd.lip_norm <= jd.bound);
        assert_abs_diff_eq!(jd.bound, mass.sqrt() * l2_norm(&space, &f).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn lip_norm_examples() {
        let p3 = fixtures::p3();
        assert_eq!(lip_norm(&p3, &[-2.5; 3], 1.0).unwrap(), 2.5);
        assert_eq!(lip_norm(&p3, p3.distances().row(0), 1.0).unwrap(), 1.0);
        assert_eq!(lip_norm(&p3, &[-1.0, 1.0, 0.0], 0.5).unwrap(), 2.0);
        assert!(lip_norm(&p3, &[-1.0, 1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn lambda_identity_examples() {
        let p3 = fixtures::p3();
        assert_eq!(lambda_lip_distance(&p3, 0, 1).unwrap(), 2.0);
        assert_eq!(lambda_lip_distance(&p3, 2, 2).unwrap(), 0.0);
        let far = fixtures::p2().scaled(5.0).unwrap();
        assert_eq!(lambda_lip_distance(&far, 0, 1).unwrap(), 5.0);
        assert!(lambda_lip_distance(&p3, 0, 7).is_err());
    }

    #[test]
    fn snowflake_lift_examples() {
        let lift = snowflake_lift_lip(&fixtures::p3(), 0.5).unwrap();
        assert_abs_diff_eq!(lift.lip, 2.0, epsilon = 1e-15);
        assert_eq!(lift.bound, 2.0);
        let p2 = snowflake_lift_lip(&fixtures::p2(), 0.5).unwrap();
        assert!(p2.lip <= 2.0 + 1e-12);
        let wide = snowflake_lift_lip(&fixtures::p2().scaled(9.0).unwrap(), 0.5).unwrap();
        assert_abs_diff_eq!(wide.bound, 3.0, epsilon = 1e-15);
        assert!(snowflake_lift_lip(&fixtures::p3(), 1.0).is_err());
    }

    #[test]
    fn delta_lip_examples() {
        let p3 = delta_lip_bound(&fixtures::p3()).unwrap();
        assert_abs_diff_eq!(p3.worst_ratio, (2.0f64 / 27.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p3.bound, 1.0, epsilon = 1e-15);
        let doubled = delta_lip_bound(&fixtures::p3().scaled(2.0).unwrap()).unwrap();
        assert!(doubled.worst_ratio <= doubled.bound);
        let i100 = delta_lip_bound(&fixtures::interval(100)).unwrap();
        assert!(i100.worst_ratio <= i100.bound);
        assert!(i100.min_row_distance > 0.0);
    }

    #[test]
    fn kappa_gram_on_p3() {
        let c = kappa_gram_comparison(&fixtures::p3()).unwrap();
        assert_abs_diff_eq!(c.cosine.get(0, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.kappa_gram.get(0, 1), THIRD, epsilon = 1e-15);
        assert_abs_diff_eq!(c.max_discrepancy, 1.0 / 6.0, epsilon = 1e-15);
        assert!(c.one_minus_cosine.passed);
        assert!(kappa_gram_comparison(&fixtures::p2()).is_err());
    }
}
