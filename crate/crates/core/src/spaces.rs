//! Variable-exponent Lebesgue functionals: exponent validation, the
//! modular `∫|f|^{p(x)} dμ` and the Luxemburg norm.

use serde::{Deserialize, Serialize};

use crate::error::SpaceError;
use crate::expr::{golden_min, singular_points, Expr, SingularSet, DEFAULT_SCAN_POINTS};
use crate::interval::Interval;
use crate::measure::{integrate_against, Pointwise, WeightedMeasure};
use crate::quadrature::{integrate, EndpointFlags, QuadOptions, QuadratureResult, Split};

/// Samples at or below this are rejected as `p ≤ 1`.
const P_FLOOR: f64 = 1.0 + 1e-9;
/// An exponent with a sampled value beyond this is treated as unbounded.
const P_CEILING: f64 = 1e6;

/// A validated exponent `p ∈ 𝒫(I)` with sampled bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableExponent {
    #[serde(with = "crate::expr::as_text")]
    pub p: Expr,
    #[serde(with = "crate::expr::as_text")]
    pub p_prime: Expr,
    pub domain: Interval,
    pub p_minus: f64,
    pub p_plus: f64,
    /// Bounds come from sampling, not symbolic optimisation.
    pub numerical: bool,
    /// The infimum reaches 1 only in a limit (an endpoint or a single
    /// refined point), while every grid sample stays above 1.
    pub degenerate_infimum: bool,
    pub singular: SingularSet,
}

impl VariableExponent {
    /// True when `p′` is symbolically zero.
    pub fn is_constant(&self) -> bool {
        self.p_prime.is_zero()
    }

    pub fn at(&self, x: f64) -> f64 {
        self.p.eval_or_nan(x)
    }

    /// Singular points of `p` and `p′` as quadrature splits.
    pub fn splits(&self) -> Vec<Split> {
        self.singular
            .all()
            .into_iter()
            .map(|at| Split {
                at,
                singular: self.p.eval(at).is_err() || self.p_prime.eval(at).is_err(),
            })
            .collect()
    }
}

/// Validate `p` on `domain` with the default sampling grid.
pub fn validate_exponent(p: &Expr, domain: &Interval) -> Result<VariableExponent, SpaceError> {
    validate_exponent_with(p, domain, DEFAULT_SCAN_POINTS)
}

/// Check `1 < p⁻ ≤ p ≤ p⁺ < ∞` by sampling and probe local integrability
/// of `p^p` and `|p′|^p` on a compact exhaustion of `domain`.
pub fn validate_exponent_with(
    p: &Expr,
    domain: &Interval,
    grid_size: usize,
) -> Result<VariableExponent, SpaceError> {
    let out_of_range = |reason: String| SpaceError::ExponentOutOfRange { reason };
    let grid = domain.grid(grid_size.max(16));
    let mut samples: Vec<(f64, f64)> = grid
        .iter()
        .filter_map(|&x| p.eval(x).ok().map(|v| (x, v)))
        .collect();
    if samples.is_empty() {
        return Err(out_of_range(format!(
            "p cannot be evaluated anywhere on {domain}"
        )));
    }
    if let Some(&(x, v)) = samples.iter().find(|(_, v)| *v <= P_FLOOR) {
        return Err(out_of_range(format!("p({x}) = {v} is not above 1")));
    }
    if let Some(&(x, v)) = samples.iter().find(|(_, v)| *v > P_CEILING) {
        return Err(out_of_range(format!("p({x}) = {v} is unbounded")));
    }
    for far in far_points(domain) {
        if let Ok(v) = p.eval(far) {
            if v > P_CEILING {
                return Err(out_of_range(format!(
                    "p grows without bound (p({far}) = {v})"
                )));
            }
        }
    }
    let grid_min = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let grid_max = samples
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);

    // Refine around the extremal cells and include finite endpoint limits.
    let imin = argmin(&samples, |v| v);
    let imax = argmin(&samples, |v| -v);
    let (_, refined_min) = refine(p, &samples, imin, domain, 1.0);
    let (_, refined_max) = refine(p, &samples, imax, domain, -1.0);
    let mut p_minus = grid_min.min(refined_min);
    let mut p_plus = grid_max.max(-refined_max);
    for e in domain.finite_endpoints() {
        if let Ok(v) = p.eval(e) {
            p_minus = p_minus.min(v);
            p_plus = p_plus.max(v);
        }
    }
    samples.clear();
    if p_minus < 1.0 - 1e-12 {
        return Err(out_of_range(format!(
            "refined infimum {p_minus} is below 1"
        )));
    }
    if p_plus > P_CEILING {
        return Err(out_of_range(format!(
            "refined supremum {p_plus} is unbounded"
        )));
    }
    let degenerate_infimum = p_minus <= P_FLOOR;

    let p_prime = p.differentiate();
    let mut singular = singular_points(p, domain, DEFAULT_SCAN_POINTS);
    singular.merge(&singular_points(&p_prime, domain, DEFAULT_SCAN_POINTS));
    let vp = VariableExponent {
        p: p.clone(),
        p_prime,
        domain: *domain,
        p_minus,
        p_plus,
        numerical: true,
        degenerate_infimum,
        singular,
    };
    probe_local_integrability(&vp)?;
    Ok(vp)
}

fn far_points(domain: &Interval) -> Vec<f64> {
    let mut out = Vec::new();
    for k in [3, 6, 9, 12] {
        let r = 10f64.powi(k);
        if domain.hi().is_infinite() {
            out.push(domain.lo().max(0.0) + r);
        }
        if domain.lo().is_infinite() {
            out.push(domain.hi().min(0.0) - r);
        }
    }
    out
}

fn argmin(samples: &[(f64, f64)], key: impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    for (i, s) in samples.iter().enumerate() {
        if key(s.1) < key(samples[best].1) {
            best = i;
        }
    }
    best
}

/// Golden-section refinement of `sign·p` over the cells adjacent to sample `i`.
fn refine(p: &Expr, samples: &[(f64, f64)], i: usize, domain: &Interval, sign: f64) -> (f64, f64) {
    let lo = if i > 0 {
        samples[i - 1].0
    } else {
        domain.lo().max(samples[i].0 - 1.0)
    };
    let hi = if i + 1 < samples.len() {
        samples[i + 1].0
    } else {
        domain.hi().min(samples[i].0 + 1.0)
    };
    let (x, v) = golden_min(|x| sign * p.eval_or_nan(x), lo, hi);
    if v.is_finite() {
        (x, v)
    } else {
        (samples[i].0, sign * samples[i].1)
    }
}

/// The compact exhaustion `I_k = {x ∈ I : dist(x, ∂I) > 1/k, |x| < k}`.
pub fn exhaustion(domain: &Interval, k: f64) -> Option<Interval> {
    let lo = (domain.lo() + 1.0 / k).max(-k);
    let hi = (domain.hi() - 1.0 / k).min(k);
    Interval::closed(lo, hi).ok()
}

fn probe_local_integrability(vp: &VariableExponent) -> Result<(), SpaceError> {
    let p = &vp.p;
    let dp = &vp.p_prime;
    let splits = vp.splits();
    let opts = QuadOptions::default().with_rel_tol(1e-6);
    let checks: [(&str, Box<dyn Fn(f64) -> f64 + Sync>); 2] = [
        (
            "p^p",
            Box::new(|x| {
                let v = p.eval_or_nan(x);
                v.powf(v)
            }),
        ),
        (
            "|p'|^p",
            Box::new(|x| {
                let d = dp.eval_or_nan(x).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d.powf(p.eval_or_nan(x))
                }
            }),
        ),
    ];
    for k in [4.0, 16.0, 64.0] {
        let Some(ik) = exhaustion(&vp.domain, k) else {
            continue;
        };
        for (what, f) in &checks {
            let failed = match integrate(f.as_ref(), &ik, &splits, EndpointFlags::NONE, &opts) {
                Ok(r) => !r.value.is_finite() || r.is_divergent(),
                Err(_) => true,
            };
            if failed {
                return Err(SpaceError::IntegrabilityProbeFailed {
                    what: what.to_string(),
                    on: ik.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// `∫ |f(x)|^{p(x)} μ(dx)` over the intersection of `μ`'s domain with the support of `f`.
pub fn modular(
    f: &dyn Pointwise,
    vp: &VariableExponent,
    mu: &WeightedMeasure,
    opts: &QuadOptions,
) -> Result<QuadratureResult, SpaceError> {
    modular_scaled(f, 1.0, vp, mu, opts)
}

/// `∫ |f(x)/λ|^{p(x)} μ(dx)`.
pub fn modular_scaled(
    f: &dyn Pointwise,
    lambda: f64,
    vp: &VariableExponent,
    mu: &WeightedMeasure,
    opts: &QuadOptions,
) -> Result<QuadratureResult, SpaceError> {
    let p = &vp.p;
    let integrand = |x: f64| -> f64 {
        let v = f.value(x);
        if v == 0.0 {
            0.0
        } else {
            (v / lambda).abs().powf(p.eval_or_nan(x))
        }
    };
    let region = f.support();
    let dom = region
        .and_then(|r| r.intersect(&mu.domain))
        .unwrap_or(mu.domain);
    let mut splits = f.breakpoints(&dom);
    splits.extend(vp.splits());
    let r = integrate_against(&integrand, region, &splits, mu, opts)?;
    if r.is_divergent() {
        return Err(SpaceError::Divergent(format!(
            "modular of f/{lambda} on {dom}"
        )));
    }
    Ok(r)
}

const LAMBDA_MAX: f64 = 1e12;
const LAMBDA_MIN: f64 = 1e-300;

/// Luxemburg norm with respect to Lebesgue measure on the exponent's domain.
pub fn luxemburg_norm(
    f: &dyn Pointwise,
    vp: &VariableExponent,
    opts: &QuadOptions,
) -> Result<f64, SpaceError> {
    luxemburg_norm_in(f, vp, &WeightedMeasure::lebesgue(vp.domain), opts)
}

/// `inf{λ > 0 : ∫|f/λ|^{p(x)} dμ ≤ 1}` by bracketing and bisection.
pub fn luxemburg_norm_in(
    f: &dyn Pointwise,
    vp: &VariableExponent,
    mu: &WeightedMeasure,
    opts: &QuadOptions,
) -> Result<f64, SpaceError> {
    let rho = |lambda: f64| -> Result<f64, SpaceError> {
        Ok(modular_scaled(f, lambda, vp, mu, opts)?.value)
    };
    if rho(1.0)? == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi);
    if rho(1.0)? > 1.0 {
        lo = 1.0;
        hi = 2.0;
        while rho(hi)? > 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > LAMBDA_MAX {
                return Err(SpaceError::NoFiniteBracket(LAMBDA_MAX));
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        while rho(lo)? <= 1.0 {
            hi = lo;
            lo *= 0.5;
            if lo < LAMBDA_MIN {
                return Ok(hi);
            }
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rho(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn unit() -> Interval {
        Interval::open(0.0, 1.0).unwrap()
    }

    #[test]
    fn affine_exponent_bounds_are_endpoint_values() {
        let vp =
            validate_exponent(&parse("x+3").unwrap(), &Interval::open(0.0, 2.0).unwrap()).unwrap();
        assert!((vp.p_minus - 3.0).abs() < 1e-12 && (vp.p_plus - 5.0).abs() < 1e-12);
        assert!(!vp.degenerate_infimum);
        let vp = validate_exponent(&parse("2").unwrap(), &unit()).unwrap();
        assert_eq!((vp.p_minus, vp.p_plus), (2.0, 2.0));
        assert!(vp.is_constant());
    }

    #[test]
    fn rejects_exponents_touching_or_below_one() {
        assert!(matches!(
            validate_exponent(&parse("1").unwrap(), &unit()),
            Err(SpaceError::ExponentOutOfRange { .. })
        ));
        assert!(validate_exponent(&parse("0.5 + x").unwrap(), &unit()).is_err());
        assert!(validate_exponent(
            &parse("x").unwrap(),
            &Interval::open(1.0, f64::INFINITY).unwrap()
        )
        .is_err());
    }

    #[test]
    fn infimum_reached_only_in_the_limit_is_flagged() {
        let vp = validate_exponent(
            &parse("2 - exp(-x^2)").unwrap(),
            &Interval::open(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(vp.degenerate_infimum);
        assert!((vp.p_minus - 1.0).abs() < 1e-12);
        let vp = validate_exponent(
            &parse("2 - exp(-x^2)").unwrap(),
            &Interval::open(0.0, f64::INFINITY).unwrap(),
        )
        .unwrap();
        assert!(vp.degenerate_infimum);
        assert!((vp.p_plus - 2.0).abs() < 1e-9);
    }

    #[test]
    fn modular_examples() {
        let vp = validate_exponent(&parse("2").unwrap(), &unit()).unwrap();
        let mu = WeightedMeasure::lebesgue(unit());
        let o = QuadOptions::default();
        assert_eq!(modular(&|_x: f64| 0.0, &vp, &mu, &o).unwrap().value, 0.0);
        assert!((modular(&|_x: f64| 1.0, &vp, &mu, &o).unwrap().value - 1.0).abs() < 1e-12);
        assert!((modular(&|x: f64| x, &vp, &mu, &o).unwrap().value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn luxemburg_examples() {
        let o = QuadOptions::default();
        let vp = validate_exponent(&parse("x + 2").unwrap(), &unit()).unwrap();
        let n = luxemburg_norm(&|_x: f64| 3.0, &vp, &o).unwrap();
        assert!((n - 3.0).abs() < 1e-8 * 3.0, "{n}");
        let vp2 = validate_exponent(&parse("2").unwrap(), &unit()).unwrap();
        let n = luxemburg_norm(&|x: f64| x, &vp2, &o).unwrap();
        assert!((n - 1.0 / 3f64.sqrt()).abs() < 1e-8, "{n}");
        assert_eq!(luxemburg_norm(&|_x: f64| 0.0, &vp2, &o).unwrap(), 0.0);
    }
}
