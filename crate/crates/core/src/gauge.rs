//! The pseudometric `W_d` on metrics bi-Lipschitz equivalent to a base metric `d`.
//!
//! For metrics `σ, φ` on the same points put `δ = σ − φ`,
//! `w(σ,φ)(x,y) = max_z |δ(x,z) − δ(y,z)|` and
//! `W_d(σ,φ) = max_{x≠y} w(σ,φ)(x,y)/d(x,y)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::canonical::{canonical_metric, CHECK_TOL};
use crate::metric::{check_same_size, gauge_constants, MetricMatrix, MetricMeasureSpace, SquareMatrix};
use crate::random::perturbed_metric;
use crate::separation::{in_e_set, verify_certificate, SeparationCertificate};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct WdReport {
    pub value: f64,
    /// `(x, y, z)` attaining the maximum.
    pub witness: (usize, usize, usize),
    pub w_matrix: SquareMatrix,
}

pub fn wd_distance(base: &MetricMatrix, sigma: &MetricMatrix, phi: &MetricMatrix) -> Result<WdReport> {
    let n = base.n();
    check_same_size(n, sigma.n())?;
    check_same_size(n, phi.n())?;
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let delta = sigma.difference(phi)?;
    // per x: w(x, y) for y > x with the maximizing z
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|x| {
            (x + 1..n)
                .map(|y| {
                    let mut best = (0.0_f64, x);
                    for z in 0..n {
                        let v = (delta.get(x, z) - delta.get(y, z)).abs();
                        if v > best.0 {
                            best = (v, z);
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    let mut w_matrix = SquareMatrix::zeros(n);
    let mut value = 0.0;
    let mut witness = (0, 1, 0);
    for (x, row) in rows.into_iter().enumerate() {
        for (off, (w, z)) in row.into_iter().enumerate() {
            let y = x + 1 + off;
            w_matrix.set(x, y, w);
            w_matrix.set(y, x, w);
            let r = w / base.get(x, y);
            if r > value {
                value = r;
                witness = (x, y, z);
            }
        }
    }
    Ok(WdReport {
        value,
        witness,
        w_matrix,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OpennessTransfer {
    pub certificate: SeparationCertificate,
    pub wd: f64,
    /// `ℓ(d,σ)·ε/2`.
    pub radius: f64,
    /// `min σ/d`.
    pub ell_d_sigma: f64,
    /// `min σ/φ`.
    pub ell_phi_sigma: f64,
}

/// Moves a separation certificate `(ε, c)` of `σ` to `φ` when
/// `W_d(σ, φ) < ℓ(d,σ)·ε/2`, where `d` is the metric of `space`. The new
/// certificate is `(ℓ(φ,σ)·ε/2, c)`; the `E`-set containment behind it is
/// verified for every pair.
pub fn openness_transfer(
    space: &MetricMeasureSpace,
    sigma: &MetricMatrix,
    cert: &SeparationCertificate,
    phi: &MetricMatrix,
) -> Result<OpennessTransfer> {
    let d = space.distances();
    let n = d.n();
    check_same_size(n, sigma.n())?;
    check_same_size(n, phi.n())?;
    verify_certificate(sigma, space.weights(), cert)?;
    let ell_d_sigma = gauge_constants(d, sigma)?.lower;
    let radius = ell_d_sigma * cert.epsilon / 2.0;
    let wd = wd_distance(d, sigma, phi)?.value;
    if !(wd < radius) {
        return Err(Error::OutsideRadius {
            measured: wd,
            required: radius,
        });
    }
    let ell_phi_sigma = gauge_constants(phi, sigma)?.lower;
    let eps = ell_phi_sigma * cert.epsilon / 2.0;
    for x in 0..n {
        for y in x + 1..n {
            for z in 0..n {
                let before = in_e_set(sigma.matrix(), x, y, z, cert.epsilon);
                let after = in_e_set(phi.matrix(), x, y, z, eps);
                if before && !after {
                    return Err(Error::Assertion {
                        what: "E-set containment inside the openness radius",
                        value: (phi.get(x, z) - phi.get(y, z)).abs(),
                        bound: eps * phi.get(x, y),
                        witness: vec![x, y, z],
                    });
                }
            }
        }
    }
    let certificate = SeparationCertificate {
        epsilon: eps,
        c: cert.c,
        witness_pair: cert.witness_pair,
    };
    verify_certificate(phi, space.weights(), &certificate).map_err(|e| match e {
        Error::Precondition { witness, .. } => Error::Assertion {
            what: "transferred certificate fails re-verification",
            value: eps,
            bound: cert.c,
            witness,
        },
        other => other,
    })?;
    Ok(OpennessTransfer {
        certificate,
        wd,
        radius,
        ell_d_sigma,
        ell_phi_sigma,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Perturbation {
    pub phi: MetricMatrix,
    pub alpha: f64,
    pub wd: f64,
}

/// Finds `α` with `W_d(σ, closure(σ∘(1 + α·noise)))` within 1% of `target`
/// by bisection on `[0, alpha_max]`.
pub fn perturb_to_target(
    base: &MetricMatrix,
    sigma: &MetricMatrix,
    noise: &SquareMatrix,
    target: f64,
    alpha_max: f64,
) -> Result<Perturbation> {
    if !(target > 0.0) {
        return Err(Error::param("target", format!("must be positive, got {target}")));
    }
    if !(alpha_max > 0.0 && alpha_max < 1.0) {
        return Err(Error::param("alpha_max", format!("must lie in (0, 1), got {alpha_max}")));
    }
    let eval = |alpha: f64| -> Result<Perturbation> {
        let phi = perturbed_metric(sigma, noise, alpha);
        let wd = wd_distance(base, sigma, &phi)?.value;
        Ok(Perturbation { phi, alpha, wd })
    };
    let close = |p: &Perturbation| (p.wd - target).abs() <= 0.01 * target;
    let top = eval(alpha_max)?;
    if close(&top) {
        return Ok(top);
    }
    if top.wd < target {
        return Err(Error::Domain(format!(
            "W_d reaches only {} at α = {alpha_max}, below the target {target}",
            top.wd
        )));
    }
    let (mut lo, mut hi) = (0.0, alpha_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = eval(mid)?;
        if close(&p) {
            return Ok(p);
        }
        if p.wd < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Domain(format!("bisection did not reach W_d = {target} within 1%")))
}

#[derive(Clone, Debug, Serialize)]
pub struct NearIsometryReport {
    /// Whether the space was normalized to unit mass first.
    pub normalized: bool,
    /// Largest `ℓ` with `ℓ·d ≤ ρ_d`.
    pub ell: f64,
    pub wd_d_rho: f64,
    /// `(1 − ℓ)/(1 + ℓ)`, claimed to be at most `W_d(d, ρ_d)`.
    pub lower_claim: f64,
    pub lower_ok: bool,
    /// `(1 − ℓ)/ℓ`, claimed to be at least `W_d(d, ρ_d)`.
    pub upper_claim: f64,
    pub upper_ok: bool,
    /// `1/(1 + r_d) < ℓ`, false when no radius is supplied.
    pub threshold_ok: bool,
}

pub fn near_isometry_report(space: &MetricMeasureSpace, r_d: Option<f64>) -> Result<NearIsometryReport> {
    let normalized = space.total_mass() > 1.0;
    let unit;
    let space = if normalized {
        unit = space.normalized();
        &unit
    } else {
        space
    };
    let d = space.distances();
    let rho = canonical_metric(space);
    let ell = gauge_constants(d, &rho)?.lower;
    let wd_d_rho = wd_distance(d, d, &rho)?.value;
    let lower_claim = (1.0 - ell) / (1.0 + ell);
    let upper_claim = (1.0 - ell) / ell;
    Ok(NearIsometryReport {
        normalized,
        ell,
        wd_d_rho,
        lower_claim,
        lower_ok: lower_claim <= wd_d_rho + CHECK_TOL,
        upper_claim,
        upper_ok: wd_d_rho <= upper_claim + CHECK_TOL,
        threshold_ok: r_d.is_some_and(|r| 1.0 / (1.0 + r) < ell),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::random::symmetric_noise;
    use crate::separation::separation_profile;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wd_examples() {
        let p3 = fixtures::p3();
        let d = p3.distances();
        assert_eq!(wd_distance(d, d, d).unwrap().value, 0.0);
        let t4 = fixtures::t4();
        let dt = t4.distances();
        assert_eq!(wd_distance(dt, dt, &dt.scaled(2.0).unwrap()).unwrap().value, 1.0);
        let rho = canonical_metric(&p3);
        let r = wd_distance(d, d, &rho).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 - (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(r.w_matrix.get(1, 1), 0.0);
    }

    #[test]
    fn openness_examples() {
        let p3 = fixtures::p3();
        let d = p3.distances().clone();
        let cert = separation_profile(&p3).unwrap().best.certificate();
        assert_eq!(cert.epsilon, 1.0);
        let same = openness_transfer(&p3, &d, &cert, &d).unwrap();
        assert_eq!(same.certificate.epsilon, 0.5);
        assert_eq!(same.radius, 0.5);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = symmetric_noise(3, &mut rng, |r| r.random_range(-1.0..=1.0));
        let inside = perturb_to_target(&d, &d, &noise, 0.1, 0.95).unwrap();
        assert!((inside.wd - 0.1).abs() <= 0.001);
        let moved = openness_transfer(&p3, &d, &cert, &inside.phi).unwrap();
        assert_abs_diff_eq!(moved.certificate.c, 2.0 / 3.0, epsilon = 1e-15);

        let outside = perturb_to_target(&d, &d, &noise, 0.6, 0.95).unwrap();
        match openness_transfer(&p3, &d, &cert, &outside.phi) {
            Err(Error::OutsideRadius { measured, required }) => {
                assert!(measured > required);
                assert_eq!(required, 0.5);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn near_isometry_examples() {
        let r = near_isometry_report(&fixtures::p3(), Some(0.3)).unwrap();
        assert!(!r.normalized);
        assert_abs_diff_eq!(r.ell, 0.816496580927726, epsilon = 1e-12);
        assert_abs_diff_eq!(r.wd_d_rho, 0.183503419072274, epsilon = 1e-12);
        assert_abs_diff_eq!(r.lower_claim, 0.101020514433644, epsilon = 1e-12);
        assert_abs_diff_eq!(r.upper_claim, 0.224744871391589, epsilon = 1e-12);
        assert!(r.lower_ok && r.upper_ok && r.threshold_ok);
        assert!(!near_isometry_report(&fixtures::p3(), None).unwrap().threshold_ok);
    }
}
