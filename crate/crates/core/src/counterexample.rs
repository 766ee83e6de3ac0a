//! A truncated non-doubling space whose canonical map stays bi-Lipschitz.
//!
//! Points are a uniform grid on `[0, 1]`, the Hadamard-signed hat bumps
//! `f_{n,α}(t) = 2^{−n} Σ_i α_i h(2^n t − i)` for levels `1..=n_max`, and the
//! zero function. Bumps are at sup distance from each other, grid points at
//! their usual distance, and `d(t, f) = 2M + f(t)` across. The measure puts
//! half its mass on the grid and half on the bumps, at `2^{−2n}/2` per bump of
//! level `n`; the zero function takes the mass of the discarded levels.

use rayon::prelude::*;
use serde::Serialize;

use crate::canonical::canonical_metric;
use crate::metric::{
    build_interval_grid, lipschitz_constants, LipschitzReport, MetricMatrix, MetricMeasureSpace,
    SquareMatrix, ValidationMode,
};
use crate::{Error, Result};

pub const MAX_HADAMARD_LEVEL: u32 = 12;
pub const MAX_BUMP_LEVEL: u32 = 9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HadamardCode {
    pub n: u32,
    /// `2ⁿ` rows of `±1`.
    pub codewords: Vec<Vec<i8>>,
}

/// Rows of the Sylvester matrix `H_{2m} = [[H_m, H_m], [H_m, −H_m]]`, `H_1 = [1]`.
pub fn hadamard_code(n: u32) -> Result<HadamardCode> {
    if !(1..=MAX_HADAMARD_LEVEL).contains(&n) {
        return Err(Error::param("n", format!("level must lie in 1..={MAX_HADAMARD_LEVEL}, got {n}")));
    }
    let mut h: Vec<Vec<i8>> = vec![vec![1]];
    for _ in 0..n {
        let top = h.iter().map(|r| r.iter().chain(r).copied().collect());
        let bottom = h.iter().map(|r| r.iter().copied().chain(r.iter().map(|v| -v)).collect());
        h = top.chain(bottom).collect();
    }
    Ok(HadamardCode { n, codewords: h })
}

pub fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// `h(t) = max{0, 1/2 − |t − 1/2|}`.
pub fn hat(t: f64) -> f64 {
    (0.5 - (t - 0.5).abs()).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BumpFunction {
    pub n: u32,
    pub alpha: Vec<i8>,
}

impl BumpFunction {
    pub fn new(n: u32, alpha: Vec<i8>) -> Result<Self> {
        if !(1..=MAX_HADAMARD_LEVEL).contains(&n) {
            return Err(Error::param("n", format!("level must lie in 1..={MAX_HADAMARD_LEVEL}, got {n}")));
        }
        if alpha.len() != 1 << n || alpha.iter().any(|a| a.abs() != 1) {
            return Err(Error::param("alpha", format!("need 2^{n} signs ±1")));
        }
        Ok(Self { n, alpha })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let scale = (1u64 << self.n) as f64;
        let s = scale * t;
        if !(0.0..=scale).contains(&s) {
            return 0.0;
        }
        let i = (s.floor() as usize).min(self.alpha.len() - 1);
        self.alpha[i] as f64 * hat(s - i as f64) / scale
    }

    /// Values at `k/2^{level+1}`, `k = 0..=2^{level+1}`; the function is
    /// linear between consecutive nodes whenever `level ≥ n`.
    pub fn nodes(&self, level: u32) -> Vec<f64> {
        node_values(Some(self), level)
    }
}

fn node_values(f: Option<&BumpFunction>, level: u32) -> Vec<f64> {
    let m = 1usize << (level + 1);
    (0..=m)
        .map(|k| f.map_or(0.0, |b| b.eval(k as f64 / m as f64)))
        .collect()
}

/// `∫₀¹ g²` for `g` linear between equally spaced nodes.
fn l2_of_nodes(v: &[f64]) -> f64 {
    let h = 1.0 / (v.len() - 1) as f64;
    v.windows(2)
        .map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
        .sum::<f64>()
        .sqrt()
}

fn sup_of_nodes(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[derive(Clone, Debug, Serialize)]
pub struct BumpNorms {
    pub sup: f64,
    pub l2: f64,
    pub sup_closed_form: f64,
    pub l2_closed_form: f64,
    /// Composite Simpson rule on `2^{n+4}` cells.
    pub l2_numeric: f64,
}

/// Tolerance for the numeric `L²` cross-check.
pub const BUMP_NUMERIC_TOL: f64 = 1e-6;

pub fn bump_norms(b: &BumpFunction) -> Result<BumpNorms> {
    let nodes = b.nodes(b.n);
    let cells = 1usize << (b.n + 4);
    let h = 1.0 / cells as f64;
    let sq = |t: f64| b.eval(t).powi(2);
    let simpson: f64 = (0..cells)
        .map(|k| {
            let a = k as f64 * h;
            h / 6.0 * (sq(a) + 4.0 * sq(a + h / 2.0) + sq(a + h))
        })
        .sum();
    let out = BumpNorms {
        sup: sup_of_nodes(&nodes),
        l2: l2_of_nodes(&nodes),
        sup_closed_form: 0.5f64.powi(b.n as i32 + 1),
        l2_closed_form: 1.0 / (3f64.sqrt() * 2f64.powi(b.n as i32 + 1)),
        l2_numeric: simpson.sqrt(),
    };
    if (out.l2_numeric - out.l2_closed_form).abs() > BUMP_NUMERIC_TOL {
        return Err(Error::Assertion {
            what: "numeric L² norm of a bump",
            value: out.l2_numeric,
            bound: out.l2_closed_form,
            witness: vec![b.n as usize],
        });
    }
    Ok(out)
}

/// Exact `‖f − g‖_∞` and `‖f − g‖₂` on `[0, 1]`; `None` stands for the zero function.
pub fn bump_distance(f: Option<&BumpFunction>, g: Option<&BumpFunction>) -> (f64, f64) {
    let level = [f, g].iter().flatten().map(|b| b.n).max().unwrap_or(1);
    let (a, b) = (node_values(f, level), node_values(g, level));
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    (sup_of_nodes(&diff), l2_of_nodes(&diff))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointKind {
    Grid { t: f64 },
    Bump { level: u32, index: usize },
    Zero,
}

/// Ratios `‖·‖_∞/‖·‖₂` over pairs of distinct functions.
#[derive(Clone, Debug, Serialize)]
pub struct InftwoReport {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `2√3`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleSpace {
    pub space: MetricMeasureSpace,
    pub n_max: u32,
    pub grid: usize,
    pub m: f64,
    pub kinds: Vec<PointKind>,
    pub bumps: Vec<BumpFunction>,
    pub inftwo: InftwoReport,
}

impl CounterexampleSpace {
    pub fn zero_index(&self) -> usize {
        self.kinds.len() - 1
    }

    pub fn level_indices(&self, level: u32) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, PointKind::Bump { level: l, .. } if *l == level))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Sup and `L²` distances of the functions (bumps then zero), pairwise.
fn function_distances(funcs: &[Option<&BumpFunction>]) -> (SquareMatrix, SquareMatrix) {
    let k = funcs.len();
    let rows: Vec<Vec<(f64, f64)>> = (0..k)
        .into_par_iter()
        .map(|i| (0..k).map(|j| if i < j { bump_distance(funcs[i], funcs[j]) } else { (0.0, 0.0) }).collect())
        .collect();
    let get = |i: usize, j: usize| if i < j { rows[i][j] } else { rows[j][i] };
    (
        SquareMatrix::from_fn(k, |i, j| if i == j { 0.0 } else { get(i, j).0 }),
        SquareMatrix::from_fn(k, |i, j| if i == j { 0.0 } else { get(i, j).1 }),
    )
}

fn inftwo_of(sup: &SquareMatrix, l2: &SquareMatrix) -> InftwoReport {
    let bound = 2.0 * 3f64.sqrt();
    let mut r = InftwoReport {
        pairs: 0,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        bound,
        holds: true,
    };
    for i in 0..sup.n() {
        for j in i + 1..sup.n() {
            let (s, l) = (sup.get(i, j), l2.get(i, j));
            r.pairs += 1;
            r.min_ratio = r.min_ratio.min(s / l);
            r.max_ratio = r.max_ratio.max(s / l);
            r.holds &= l <= s && s <= bound * l;
        }
    }
    r
}

/// Assembles and validates the space: grid `t_j = j/(grid − 1)`, bumps of
/// levels `1..=n_max` signed by Hadamard rows, and the zero function last.
pub fn build_counterexample(n_max: u32, grid: usize, m: f64) -> Result<CounterexampleSpace> {
    if !(1..=MAX_BUMP_LEVEL).contains(&n_max) {
        return Err(Error::param("n_max", format!("must lie in 1..={MAX_BUMP_LEVEL}, got {n_max}")));
    }
    if grid < 2 {
        return Err(Error::param("grid", format!("need at least 2 grid points, got {grid}")));
    }
    if !(m >= 2.0 && m.is_finite()) {
        return Err(Error::param("M", format!("must be finite and at least 2, got {m}")));
    }
    let mut kinds: Vec<PointKind> = (0..grid)
        .map(|j| PointKind::Grid {
            t: j as f64 / (grid - 1) as f64,
        })
        .collect();
    let mut labels: Vec<String> = (0..grid).map(|j| format!("t{j}")).collect();
    let mut weights = vec![1.0 / (2 * grid) as f64; grid];
    let mut bumps = Vec::new();
    for level in 1..=n_max {
        for (index, row) in hadamard_code(level)?.codewords.into_iter().enumerate() {
            bumps.push(BumpFunction::new(level, row)?);
            kinds.push(PointKind::Bump { level, index });
            labels.push(format!("f{level}_{index}"));
            weights.push(0.5f64.powi(2 * level as i32) / 2.0);
        }
    }
    kinds.push(PointKind::Zero);
    labels.push("zero".into());
    weights.push(0.5f64.powi(n_max as i32) / 2.0);

    let funcs: Vec<Option<&BumpFunction>> = bumps.iter().map(Some).chain([None]).collect();
    let (sup, l2) = function_distances(&funcs);
    let inftwo = inftwo_of(&sup, &l2);
    if !inftwo.holds {
        return Err(Error::Assertion {
            what: "sup/L² comparison between bumps",
            value: inftwo.max_ratio,
            bound: inftwo.bound,
            witness: vec![],
        });
    }

    let ts: Vec<f64> = (0..grid).map(|j| j as f64 / (grid - 1) as f64).collect();
    let total = kinds.len();
    let d = SquareMatrix::from_fn(total, |i, j| match (i < grid, j < grid) {
        (true, true) => (ts[i] - ts[j]).abs(),
        (false, false) => sup.get(i - grid, j - grid),
        (true, false) => 2.0 * m + funcs[j - grid].map_or(0.0, |b| b.eval(ts[i])),
        (false, true) => 2.0 * m + funcs[i - grid].map_or(0.0, |b| b.eval(ts[j])),
    });
    let space = MetricMeasureSpace::with_validation(
        labels,
        MetricMatrix::new(d)?,
        weights,
        ValidationMode::Exhaustive,
    )?;
    Ok(CounterexampleSpace {
        space,
        n_max,
        grid,
        m,
        kinds,
        bumps,
        inftwo,
    })
}

/// The grid size that contains every bump peak up to `n_max`.
pub fn dyadic_grid(n_max: u32) -> usize {
    (1usize << (n_max + 1)) + 1
}

fn ball(space: &MetricMeasureSpace, x: usize, r: f64) -> Vec<usize> {
    (0..space.n()).filter(|&z| space.d(x, z) <= r).collect()
}

/// Greedy cover of `B(x, r)` by closed `r/2`-balls centered in `B(x, r)`:
/// repeatedly takes the center covering most uncovered points (lowest index on ties).
pub fn greedy_cover(space: &MetricMeasureSpace, x: usize, r: f64) -> usize {
    let members = ball(space, x, r);
    let half = r / 2.0;
    let mut covered = vec![false; members.len()];
    let mut left = members.len();
    let mut count = 0;
    while left > 0 {
        let (best, _) = members
            .iter()
            .enumerate()
            .map(|(ci, &c)| {
                let gain = members
                    .iter()
                    .enumerate()
                    .filter(|(k, &z)| !covered[*k] && space.d(c, z) <= half)
                    .count();
                (ci, gain)
            })
            .fold((0, 0), |a, b| if b.1 > a.1 { b } else { a });
        let c = members[best];
        for (k, &z) in members.iter().enumerate() {
            if !covered[k] && space.d(c, z) <= half {
                covered[k] = true;
                left -= 1;
            }
        }
        count += 1;
    }
    count
}

/// Points of `B(x, r)` pairwise more than `r` apart, chosen greedily from the
/// farthest to the nearest to `x`. No closed `r/2`-ball holds two of them, so
/// the count bounds every such cover from below.
pub fn packing_lower(space: &MetricMeasureSpace, x: usize, r: f64) -> usize {
    let mut members = ball(space, x, r);
    members.sort_by(|&a, &b| space.d(x, b).total_cmp(&space.d(x, a)).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    for z in members {
        if chosen.iter().all(|&c| space.d(c, z) > r) {
            chosen.push(z);
        }
    }
    chosen.len()
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverRow {
    pub center: usize,
    pub radius: f64,
    pub ball_size: usize,
    pub greedy_cover: usize,
    pub packing_lower: usize,
}

pub fn doubling_profile(space: &MetricMeasureSpace, centers: &[usize], radii: &[f64]) -> Result<Vec<CoverRow>> {
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::param("radii", format!("radii must be positive, got {r}")));
    }
    if let Some(c) = centers.iter().find(|c| **c >= space.n()) {
        return Err(Error::Domain(format!("center {c} out of range")));
    }
    let jobs: Vec<(usize, f64)> = centers.iter().flat_map(|&c| radii.iter().map(move |&r| (c, r))).collect();
    Ok(jobs
        .par_iter()
        .map(|&(center, radius)| CoverRow {
            center,
            radius,
            ball_size: ball(space, center, radius).len(),
            greedy_cover: greedy_cover(space, center, radius),
            packing_lower: packing_lower(space, center, radius),
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct KalRow {
    pub radius: f64,
    /// Largest greedy cover count over all centers.
    pub cover: usize,
    pub worst_center: usize,
    /// `r^p·C(r)`.
    pub scaled: f64,
}

/// `R·2^{−k}` for `k = 0..levels`, with `R` the diameter.
pub fn dyadic_radii(space: &MetricMeasureSpace, levels: usize) -> Vec<f64> {
    let top = space.diameter();
    (0..levels).map(|k| top * 0.5f64.powi(k as i32)).collect()
}

pub fn kal_doubling_profile(space: &MetricMeasureSpace, p: f64, levels: usize) -> Result<Vec<KalRow>> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("must be at least 1, got {p}")));
    }
    let radii = if space.n() < 2 { vec![1.0; levels] } else { dyadic_radii(space, levels) };
    Ok(radii
        .into_iter()
        .map(|radius| {
            let (worst_center, cover) = (0..space.n())
                .into_par_iter()
                .map(|c| (c, greedy_cover(space, c, radius)))
                .collect::<Vec<_>>()
                .into_iter()
                .fold((0, 0), |a, b| if b.1 > a.1 { b } else { a });
            KalRow {
                radius,
                cover,
                worst_center,
                scaled: radius.powf(p) * cover as f64,
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct MassScaling {
    pub center: usize,
    /// Least-squares slope of `log μ(B(x, r))` against `log r`.
    pub slope: f64,
    /// Smallest and largest slope between consecutive radii.
    pub lower_est: f64,
    pub upper_est: f64,
    pub radii_used: Vec<f64>,
    pub masses: Vec<f64>,
}

pub const MIN_SCALING_RADII: usize = 4;

/// Radii `R·2^{−k}` from the largest distance `R` from `x` down to the
/// smallest positive one.
pub fn mass_scaling_dimension(space: &MetricMeasureSpace, x: usize) -> Result<MassScaling> {
    if x >= space.n() {
        return Err(Error::Domain(format!("center {x} out of range")));
    }
    let row = space.distances().row(x);
    let top = row.iter().copied().fold(0.0, f64::max);
    let floor = row.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let mut radii = Vec::new();
    let mut r = top;
    while r >= floor && r > 0.0 {
        radii.push(r);
        r /= 2.0;
    }
    if radii.len() < MIN_SCALING_RADII {
        return Err(Error::Domain(format!(
            "degenerate scale: {} dyadic radii between {floor} and {top}, need {MIN_SCALING_RADII}",
            radii.len()
        )));
    }
    let w = space.weights();
    let masses: Vec<f64> = radii
        .iter()
        .map(|&r| (0..space.n()).filter(|&z| row[z] <= r).map(|z| w[z]).sum())
        .collect();
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let steps: Vec<f64> = (1..lx.len()).map(|i| (ly[i - 1] - ly[i]) / (lx[i - 1] - lx[i])).collect();
    Ok(MassScaling {
        center: x,
        slope: cov / var,
        lower_est: steps.iter().copied().fold(f64::INFINITY, f64::min),
        upper_est: steps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        radii_used: radii,
        masses,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PackingEntry {
    pub level: u32,
    pub radius: f64,
    pub packing_lower: usize,
    pub greedy_cover: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteRow {
    pub n_max: u32,
    pub grid: usize,
    pub points: usize,
    pub iota_d: LipschitzReport,
    pub packing: Vec<PackingEntry>,
    pub inftwo: InftwoReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlRow {
    pub grid: usize,
    pub center: usize,
    pub iota_d: LipschitzReport,
    pub packing: Vec<PackingEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub m: f64,
    pub rows: Vec<SuiteRow>,
    /// The grid alone, at the largest grid size used.
    pub control: ControlRow,
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRule {
    /// `2^{n_max+1} + 1`.
    Dyadic,
    Fixed(usize),
}

impl GridRule {
    pub fn size(self, n_max: u32) -> usize {
        match self {
            GridRule::Dyadic => dyadic_grid(n_max),
            GridRule::Fixed(g) => g,
        }
    }
}

fn packing_column(space: &MetricMeasureSpace, center: usize, n_max: u32) -> Vec<PackingEntry> {
    (1..=n_max)
        .map(|level| {
            let radius = 0.5f64.powi(level as i32);
            PackingEntry {
                level,
                radius,
                packing_lower: packing_lower(space, center, radius),
                greedy_cover: greedy_cover(space, center, radius),
            }
        })
        .collect()
}

/// For each `n_max`: the constants of `ι_d` next to packing counts of the
/// balls `B(0, 2^{−n})`, plus the grid alone as a doubling control.
pub fn counterexample_suite(n_max_values: &[u32], grid: GridRule, m: f64) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    let mut widest = 2;
    for &n_max in n_max_values {
        let cx = build_counterexample(n_max, grid.size(n_max), m)?;
        widest = widest.max(cx.grid);
        let rho = canonical_metric(&cx.space);
        rows.push(SuiteRow {
            n_max,
            grid: cx.grid,
            points: cx.space.n(),
            iota_d: lipschitz_constants(cx.space.distances().matrix(), rho.matrix())?,
            packing: packing_column(&cx.space, cx.zero_index(), n_max),
            inftwo: cx.inftwo,
        });
    }
    let interval = build_interval_grid(widest)?;
    let center = widest / 2;
    let deepest = n_max_values.iter().copied().max().unwrap_or(1);
    let control = ControlRow {
        grid: widest,
        center,
        iota_d: lipschitz_constants(
            interval.distances().matrix(),
            canonical_metric(&interval).matrix(),
        )?,
        packing: packing_column(&interval, center, deepest),
    };
    Ok(SuiteReport { m, rows, control })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hadamard_examples() {
        let h1 = hadamard_code(1).unwrap();
        assert_eq!(h1.codewords, vec![vec![1, 1], vec![1, -1]]);
        for n in 1..=6 {
            let h = hadamard_code(n).unwrap();
            assert_eq!(h.codewords.len(), 1 << n);
            for i in 0..h.codewords.len() {
                for j in i + 1..h.codewords.len() {
                    assert_eq!(hamming(&h.codewords[i], &h.codewords[j]), 1 << (n - 1));
                }
            }
        }
        assert!(hadamard_code(0).is_err());
        assert!(hadamard_code(13).is_err());
    }

    #[test]
    fn hat_and_bump_examples() {
        assert_eq!(hat(0.5), 0.5);
        assert_eq!(hat(0.25), 0.25);
        assert_eq!(hat(1.2), 0.0);
        let f = BumpFunction::new(1, vec![1, 1]).unwrap();
        let norms = bump_norms(&f).unwrap();
        assert_eq!(norms.sup, 0.25);
        assert_abs_diff_eq!(norms.l2, 1.0 / (4.0 * 3f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(norms.l2 * norms.l2, 1.0 / 48.0, epsilon = 1e-15);
        for n in 1..=6 {
            for alpha in hadamard_code(n).unwrap().codewords {
                let b = BumpFunction::new(n, alpha).unwrap();
                let r = bump_norms(&b).unwrap();
                assert_eq!(r.sup, r.sup_closed_form);
                assert_abs_diff_eq!(r.l2, r.l2_closed_form, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn bumps_are_one_lipschitz() {
        let b = BumpFunction::new(3, hadamard_code(3).unwrap().codewords[5].clone()).unwrap();
        let v = b.nodes(3);
        let h = 1.0 / (v.len() - 1) as f64;
        let slope = v.windows(2).map(|w| ((w[1] - w[0]) / h).abs()).fold(0.0, f64::max);
        assert_eq!(slope, 1.0);
    }

    #[test]
    fn space_examples() {
        let cx = fixtures::a2(2, 9, 2.0);
        let zero = cx.zero_index();
        for j in 0..cx.grid {
            assert_eq!(cx.space.d(j, zero), 4.0);
        }
        let first = cx.level_indices(1)[0];
        assert_eq!(cx.bumps[0].alpha, vec![1, 1]);
        let quarter = 2; // t = 2/8
        assert_eq!(cx.space.d(quarter, first), 4.25);
        assert_abs_diff_eq!(cx.space.total_mass(), 1.0, epsilon = 1e-15);
        assert!(build_counterexample(2, 9, 1.5).is_err());
    }

    #[test]
    fn inftwo_up_to_level_five() {
        let cx = build_counterexample(5, dyadic_grid(5), 2.0).unwrap();
        assert!(cx.inftwo.holds);
        assert_abs_diff_eq!(cx.inftwo.min_ratio, 1.5491933384829666, epsilon = 1e-14);
        assert_abs_diff_eq!(cx.inftwo.max_ratio, 2.449489742783178, epsilon = 1e-14);
    }

    #[test]
    fn packing_certifies_non_doubling() {
        let cx = build_counterexample(5, dyadic_grid(5), 2.0).unwrap();
        assert!(packing_lower(&cx.space, cx.zero_index(), 0.0625) >= 8);
        for n in 2..=5 {
            let r = 0.5f64.powi(n);
            assert!(packing_lower(&cx.space, cx.zero_index(), r) >= 1 << (n - 1));
        }
    }

    #[test]
    fn covering_examples() {
        let p2 = fixtures::p2();
        let rows = doubling_profile(&p2, &[0, 1], &[1.0, 3.0]).unwrap();
        assert!(rows.iter().all(|r| r.greedy_cover <= 2));
        let i64 = fixtures::interval(64);
        let radii = dyadic_radii(&i64, 7);
        let all: Vec<usize> = (0..64).collect();
        let rows = doubling_profile(&i64, &all, &radii).unwrap();
        assert!(rows.iter().all(|r| r.greedy_cover <= 4 && r.packing_lower <= r.greedy_cover));
        let kal = kal_doubling_profile(&i64, 2.0, 7).unwrap();
        assert!(kal.windows(2).all(|w| w[1].scaled < w[0].scaled));
        let single = MetricMeasureSpace::unlabeled(MetricMatrix::from_rows(&[vec![0.0]]).unwrap(), vec![1.0]).unwrap();
        assert!(kal_doubling_profile(&single, 2.0, 4).unwrap().iter().all(|r| r.cover == 1));
    }

    #[test]
    fn mass_scaling_examples() {
        let i1024 = fixtures::interval(1024);
        let s = mass_scaling_dimension(&i1024, 511).unwrap();
        assert!((0.85..=1.15).contains(&s.slope), "{}", s.slope);
        assert!(s.radii_used.len() >= MIN_SCALING_RADII);
        assert!(matches!(mass_scaling_dimension(&fixtures::p2(), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn suite_rows() {
        let suite = counterexample_suite(&[2, 3], GridRule::Dyadic, 2.0).unwrap();
        assert_eq!(suite.rows[0].iota_d.lower, 0.4166666666666667);
        assert_eq!(suite.rows[1].iota_d.lower, 0.36506445845018853);
        for row in &suite.rows {
            let last = row.packing.last().unwrap();
            assert!(last.packing_lower >= 1 << (row.n_max - 1));
        }
        assert!(suite.control.packing.iter().all(|e| e.greedy_cover <= 4));
    }
}
