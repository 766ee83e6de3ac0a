//! `E`-sets, uniform point separation and the Lipschitz constants of the
//! canonical maps.
//!
//! For a pair `x ≠ y` and `ε > 0`,
//! `E(x, y, ε; d) = {z : |d(x,z) − d(y,z)| ≥ ε·d(x,y)}`. A certificate `(ε, c)`
//! says every such set has mass at least `c`; summing over `E` gives
//! `ρ_d(x,y)² ≥ ε²·c·d(x,y)²`, so `ε²c` is a lower bound on `ℓ(ι_d)²`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::Serialize;

use crate::canonical::{self, gram_delta, weighted_dot, CHECK_TOL};
pub use crate::metric::{lipschitz_constants, LipschitzReport};
use crate::metric::{
    build_interval_grid, check_same_size, pushforward_along_canonical, snowflake, MetricMatrix,
    MetricMeasureSpace, SquareMatrix,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationCertificate {
    pub epsilon: f64,
    pub c: f64,
    /// Pair attaining the smallest `E`-set mass.
    pub witness_pair: (usize, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct ESet {
    pub members: Vec<usize>,
    pub mass: f64,
}

/// Membership is decided on the ratio `|d(x,z) − d(y,z)|/d(x,y)` itself, the
/// same quantity the profile sweep sorts, so breakpoints and direct
/// evaluation agree exactly.
#[inline]
pub(crate) fn in_e_set(d: &SquareMatrix, x: usize, y: usize, z: usize, eps: f64) -> bool {
    (d.get(x, z) - d.get(y, z)).abs() / d.get(x, y) >= eps
}

fn e_set_in(d: &SquareMatrix, w: &[f64], x: usize, y: usize, eps: f64) -> ESet {
    let members: Vec<usize> = (0..d.n()).filter(|&z| in_e_set(d, x, y, z, eps)).collect();
    let mass = members.iter().map(|&z| w[z]).sum();
    ESet { members, mass }
}

fn check_pair(n: usize, x: usize, y: usize) -> Result<()> {
    if x >= n || y >= n {
        return Err(Error::Domain(format!("pair ({x}, {y}) out of range for {n} points")));
    }
    if x == y {
        return Err(Error::Domain("E-sets need two distinct points".into()));
    }
    Ok(())
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("epsilon", format!("must be positive and finite, got {eps}")));
    }
    Ok(())
}

pub fn e_set_mass(space: &MetricMeasureSpace, x: usize, y: usize, eps: f64) -> Result<ESet> {
    check_pair(space.n(), x, y)?;
    check_epsilon(eps)?;
    Ok(e_set_in(space.distances().matrix(), space.weights(), x, y, eps))
}

/// Smallest `E`-set mass at `eps` over all pairs, with the pair attaining it.
fn min_mass(d: &SquareMatrix, w: &[f64], eps: f64) -> (f64, (usize, usize)) {
    let n = d.n();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::INFINITY, (x, x));
            for y in x + 1..n {
                let m = e_set_in(d, w, x, y, eps).mass;
                if m < best.0 {
                    best = (m, (x, y));
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::INFINITY, (0, 1)), |a, b| if b.0 < a.0 { b } else { a })
}

/// Checks that `cert` holds for `d` with weights `w`; reports the worst pair otherwise.
pub fn verify_certificate(d: &MetricMatrix, w: &[f64], cert: &SeparationCertificate) -> Result<()> {
    check_same_size(d.n(), w.len())?;
    check_epsilon(cert.epsilon)?;
    let (mass, pair) = min_mass(d.matrix(), w, cert.epsilon);
    // profile masses are accumulated in sweep order, so allow for rounding
    let total: f64 = w.iter().sum();
    if mass < cert.c - CHECK_TOL * total {
        return Err(Error::Precondition {
            reason: format!(
                "E-set mass {mass} at ε = {} is below the certified {}",
                cert.epsilon, cert.c
            ),
            witness: vec![pair.0, pair.1],
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Breakpoint {
    pub epsilon: f64,
    pub c: f64,
    pub witness_pair: (usize, usize),
}

impl Breakpoint {
    pub fn merit(&self) -> f64 {
        self.epsilon * self.epsilon * self.c
    }

    pub fn certificate(&self) -> SeparationCertificate {
        SeparationCertificate {
            epsilon: self.epsilon,
            c: self.c,
            witness_pair: self.witness_pair,
        }
    }
}

/// The step function `ε ↦ min_{x≠y} μ(E(x, y, ε))`, recorded at the values of
/// `ε` where it changes, in increasing `ε`.
#[derive(Clone, Debug, Serialize)]
pub struct SeparationProfile {
    pub breakpoints: Vec<Breakpoint>,
    /// Breakpoint maximizing `ε²·c`.
    pub best: Breakpoint,
}

impl SeparationProfile {
    /// `c(ε)`: the certified mass for a given `ε`.
    pub fn c_at(&self, eps: f64) -> f64 {
        self.breakpoints
            .iter()
            .find(|b| b.epsilon >= eps)
            .map_or(0.0, |b| b.c)
    }
}

pub fn separation_profile(space: &MetricMeasureSpace) -> Result<SeparationProfile> {
    profile_of(space.distances().matrix(), space.weights())
}

/// Descending sweep over all ratios `|d(x,z) − d(y,z)|/d(x,y)`. Masses only
/// grow as `ε` decreases, so the pairwise minimum is tracked with a lazy
/// min-heap keyed by mass.
pub(crate) fn profile_of(d: &SquareMatrix, w: &[f64]) -> Result<SeparationProfile> {
    let n = d.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect();
    let mut events: Vec<(f64, u32, u32)> = pairs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(p, &(x, y))| {
            let dxy = d.get(x, y);
            (0..n).filter_map(move |z| {
                let r = (d.get(x, z) - d.get(y, z)).abs() / dxy;
                (r > 0.0).then_some((r, p as u32, z as u32))
            })
        })
        .collect();
    events.par_sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut mass = vec![0.0_f64; pairs.len()];
    let mut heap: BinaryHeap<Reverse<(OrderedFloat<f64>, usize)>> =
        (0..pairs.len()).map(|p| Reverse((OrderedFloat(0.0), p))).collect();
    let mut breakpoints: Vec<Breakpoint> = Vec::new();
    let mut current_c = 0.0;
    let mut i = 0;
    while i < events.len() {
        let r = events[i].0;
        let mut j = i;
        while j < events.len() && events[j].0 == r {
            let (_, p, z) = events[j];
            let p = p as usize;
            mass[p] += w[z as usize];
            heap.push(Reverse((OrderedFloat(mass[p]), p)));
            j += 1;
        }
        i = j;
        // discard stale entries whose recorded mass is no longer current
        while let Some(Reverse((m, p))) = heap.peek().copied() {
            if m.0 != mass[p] {
                heap.pop();
            } else {
                break;
            }
        }
        let Reverse((m, p)) = *heap.peek().expect("every pair keeps a live heap entry");
        if m.0 > current_c {
            current_c = m.0;
            breakpoints.push(Breakpoint {
                epsilon: r,
                c: m.0,
                witness_pair: pairs[p],
            });
        }
    }
    breakpoints.reverse();
    let best = breakpoints
        .iter()
        .copied()
        .fold(None::<Breakpoint>, |acc, b| match acc {
            Some(a) if a.merit() >= b.merit() => Some(a),
            _ => Some(b),
        })
        .expect("every pair has a positive ratio at z = x");
    Ok(SeparationProfile { breakpoints, best })
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalConstants {
    /// `(X, d) → (X, ρ_d)`.
    pub iota_d: LipschitzReport,
    /// `(X, d) → L²(μ)` through the canonical map of the pushforward `(X, ρ_d)`.
    pub iota_rho: LipschitzReport,
    /// `(X, d) → L²(μ)` through `x ↦ Δ(d)(x, ·)`.
    pub iota_delta: LipschitzReport,
    pub min_norm: f64,
    /// `ℓ(ι_{Δ(d)})·min_x ‖ι_d(x)‖₂ ≤ ℓ(ι_d)`.
    pub remark8_ok: bool,
    /// `min_x ‖ι_d(x)‖₂ · (Σ_z ‖ι_d(z)‖₂² μ_z)^{1/2} ≤ 1`, under which the
    /// previous inequality follows from Cauchy–Schwarz.
    pub remark8_guaranteed: bool,
}

pub fn canonical_constants(space: &MetricMeasureSpace) -> Result<CanonicalConstants> {
    let d = space.distances().matrix();
    let rho = canonical::canonical_metric(space);
    let iota_d = lipschitz_constants(d, rho.matrix())?;
    let rho_rho = canonical::canonical_metric(&pushforward_along_canonical(space)?);
    let iota_rho = lipschitz_constants(d, rho_rho.matrix())?;
    let kernel = gram_delta(space);
    let iota_delta = lipschitz_constants(d, &canonical::delta_image_metric(space, &kernel))?;
    let n = space.n();
    let w = space.weights();
    let sq: Vec<f64> = (0..n).map(|x| kernel.gram.get(x, x)).collect();
    let min_norm = sq.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
    let remark8_ok = iota_delta.lower * min_norm <= iota_d.lower + CHECK_TOL;
    let spread = weighted_dot(&sq, &vec![1.0; n], w).sqrt();
    Ok(CanonicalConstants {
        iota_d,
        iota_rho,
        iota_delta,
        min_norm,
        remark8_ok,
        remark8_guaranteed: min_norm * spread <= 1.0,
    })
}

/// `ℓ` of `x ↦ d^s(x, ·)` from `(I_n, d^s)` into `L²(μ)`, for each `n`.
pub fn snowflake_canonical_trend(n_values: &[usize], s: f64) -> Result<Vec<(usize, f64)>> {
    n_values
        .iter()
        .map(|&n| {
            let grid = build_interval_grid(n)?;
            let flake = grid.with_distances(snowflake(grid.distances(), s)?)?;
            let rho = canonical::canonical_metric(&flake);
            Ok((n, lipschitz_constants(flake.distances().matrix(), rho.matrix())?.lower))
        })
        .collect()
}

/// Carries a certificate `(ε, c)` for `d1` over to `(ε/k, c)` for `d2` under
/// `ℓ·d1 ≤ d2 ≤ d1` and `|δ(x,z) − δ(y,z)| ≤ k·δ(x,y)` for `δ = d1 − d2`.
///
/// All hypotheses are checked exhaustively, and the `E`-set containment
/// `E(x,y,ε;d1) ⊂ E(x,y,ε/k;d2)` is verified for every pair afterwards. The
/// hypotheses do not imply the containment in general; a failure is reported
/// as an assertion error carrying the pair and the offending `z`.
pub fn transfer_separation(
    space: &MetricMeasureSpace,
    d1: &MetricMatrix,
    d2: &MetricMatrix,
    k: f64,
    cert: &SeparationCertificate,
) -> Result<SeparationCertificate> {
    let n = space.n();
    check_same_size(n, d1.n())?;
    check_same_size(n, d2.n())?;
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::param("k", format!("must be nonnegative and finite, got {k}")));
    }
    let w = space.weights();
    verify_certificate(d1, w, cert)?;

    let scale = d1.diameter().max(1.0);
    for x in 0..n {
        for y in x + 1..n {
            if d2.get(x, y) > d1.get(x, y) + CHECK_TOL * scale || !(d2.get(x, y) > 0.0) {
                return Err(Error::Precondition {
                    reason: "need 0 < d2 ≤ d1 off the diagonal".into(),
                    witness: vec![x, y],
                });
            }
        }
    }
    let delta = d1.difference(d2)?;
    let vanishing = delta.as_slice().iter().all(|v| *v == 0.0);
    if k == 0.0 {
        if !vanishing {
            return Err(Error::Domain("k = 0 requires d1 = d2".into()));
        }
        return Ok(cert.clone());
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let lhs = (delta.get(x, z) - delta.get(y, z)).abs();
                if lhs > k * delta.get(x, y) + CHECK_TOL * scale {
                    return Err(Error::Precondition {
                        reason: format!(
                            "|δ(x,z) − δ(y,z)| = {lhs} exceeds k·δ(x,y) = {}",
                            k * delta.get(x, y)
                        ),
                        witness: vec![x, y, z],
                    });
                }
            }
        }
    }

    let eps2 = cert.epsilon / k;
    for x in 0..n {
        for y in x + 1..n {
            for z in 0..n {
                if in_e_set(d1.matrix(), x, y, z, cert.epsilon) && !in_e_set(d2.matrix(), x, y, z, eps2) {
                    return Err(Error::Assertion {
                        what: "E-set containment under separation transfer",
                        value: (d2.get(x, z) - d2.get(y, z)).abs(),
                        bound: eps2 * d2.get(x, y),
                        witness: vec![x, y, z],
                    });
                }
            }
        }
    }
    let (mass, witness_pair) = min_mass(d2.matrix(), w, eps2);
    debug_assert!(mass >= cert.c - CHECK_TOL * w.iter().sum::<f64>());
    Ok(SeparationCertificate {
        epsilon: eps2,
        c: cert.c,
        witness_pair,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjectureHypotheses {
    pub ell: f64,
    pub h1_ok: bool,
    pub h2_ok: bool,
    /// Point with the smallest margin `ℓ²·‖ι_d(x)‖² − ‖ι_{d^{1/2}}(x)‖⁴`.
    pub worst_x: usize,
    pub worst_margin: f64,
}

/// Hypotheses `ℓ(ι_d) > 0` and `‖ι_{d^{1/2}}(x)‖₂² < ℓ(ι_d)·‖ι_d(x)‖₂` for all `x`.
///
/// The strict inequality is compared in squared form, with `ℓ²` taken as the
/// minimum of `ρ_d²/d²`, so that equality cases stay exact in floating point.
pub fn conjecture_hypotheses(space: &MetricMeasureSpace) -> Result<ConjectureHypotheses> {
    let n = space.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let d = space.distances();
    let w = space.weights();
    let mut ell_sq = f64::INFINITY;
    for x in 0..n {
        for y in x + 1..n {
            let diff: Vec<f64> = (0..n).map(|z| d.get(x, z) - d.get(y, z)).collect();
            let dxy = d.get(x, y);
            ell_sq = ell_sq.min(weighted_dot(&diff, &diff, w) / (dxy * dxy));
        }
    }
    let ones = vec![1.0; n];
    let mut worst = (f64::INFINITY, 0);
    for x in 0..n {
        let half_sq = weighted_dot(d.row(x), &ones, w);
        let norm_sq = weighted_dot(d.row(x), d.row(x), w);
        let margin = ell_sq * norm_sq - half_sq * half_sq;
        if margin < worst.0 {
            worst = (margin, x);
        }
    }
    let ell = lipschitz_constants(d.matrix(), canonical::canonical_metric(space).matrix())?.lower;
    Ok(ConjectureHypotheses {
        ell,
        h1_ok: ell > 0.0,
        h2_ok: worst.0 > 0.0,
        worst_x: worst.1,
        worst_margin: worst.0,
    })
}
