use serde::{Deserialize, Serialize};

use super::{HardyInstance, BETA_MARGIN};
use crate::expr::{golden_min, singular_points, Expr, DEFAULT_SCAN_POINTS};
use crate::interval::Interval;

/// Default sampling grid for pointwise conditions.
pub const DEFAULT_CHECK_GRID: usize = 10_000;
/// Pointwise nonnegativity tolerates rounding down to this.
const NONNEG_TOL: f64 = -1e-12;
/// Offset used to sample next to a singular point.
const SINGULAR_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Holds { margin: f64 },
    Violated { x: f64, value: f64 },
    Indeterminate { reason: String },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }

    pub fn violated(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }
}

/// Outcome of a sampled pointwise condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub expression: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub samples: usize,
    /// Samples where the expression could not be evaluated.
    pub skipped: usize,
    /// The extremum was sampled on an unbounded set and may be missed.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub p_minus: f64,
    pub p_plus: f64,
    pub degenerate_infimum: bool,
    pub u_nonnegative: ConditionReport,
    pub crucial_pointwise: ConditionReport,
    pub beta_exceeds_sigma: ConditionReport,
    /// Closed-form sufficient condition attached to a preset.
    pub preset_condition: Option<ConditionReport>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.conditions().iter().all(|c| c.verdict.holds())
    }

    pub fn any_violated(&self) -> bool {
        self.conditions().iter().any(|c| c.verdict.violated())
    }

    pub fn conditions(&self) -> Vec<&ConditionReport> {
        let mut v = vec![
            &self.u_nonnegative,
            &self.crucial_pointwise,
            &self.beta_exceeds_sigma,
        ];
        if let Some(c) = &self.preset_condition {
            v.push(c);
        }
        v
    }
}

/// Interior sample points: a cell-centred grid plus both sides of every
/// singular point.
fn sample_points(domain: &Interval, singular: &[f64], n: usize) -> Vec<f64> {
    let mut pts = domain.grid(n);
    for &s in singular {
        let h = SINGULAR_OFFSET * (1.0 + s.abs());
        for x in [s - h, s + h] {
            if domain.contains_interior(x) {
                pts.push(x);
            }
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts
}

/// Smallest value of `e` over the samples, refined by golden section
/// between the neighbours of the smallest sample. Returns
/// `(x, value, samples, skipped)`.
fn sampled_min(e: &Expr, domain: &Interval, pts: &[f64]) -> (Option<(f64, f64)>, usize, usize) {
    let mut best: Option<(usize, f64)> = None;
    let mut skipped = 0;
    for (i, &x) in pts.iter().enumerate() {
        match e.eval(x) {
            Ok(v) if v.is_finite() => {
                if best.map_or(true, |(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
            _ => skipped += 1,
        }
    }
    let Some((i, v)) = best else {
        return (None, pts.len(), skipped);
    };
    let a = if i > 0 { pts[i - 1] } else { pts[i] };
    let b = if i + 1 < pts.len() {
        pts[i + 1]
    } else {
        pts[i]
    };
    let mut out = (pts[i], v);
    if a < b {
        let (xr, vr) = golden_min(
            |t| e.eval(t).ok().filter(|v| v.is_finite()).unwrap_or(f64::NAN),
            a,
            b,
        );
        if vr < out.1 && domain.contains_interior(xr) {
            out = (xr, vr);
        }
    }
    (Some(out), pts.len(), skipped)
}

fn nonneg_report(
    name: &str,
    e: &Expr,
    domain: &Interval,
    singular: &[f64],
    n: usize,
) -> ConditionReport {
    let pts = sample_points(domain, singular, n);
    let (best, samples, skipped) = sampled_min(e, domain, &pts);
    let verdict = match best {
        None => Verdict::Indeterminate {
            reason: "expression undefined at every sample".into(),
        },
        Some(_) if skipped * 2 > samples => Verdict::Indeterminate {
            reason: format!("expression undefined at {skipped} of {samples} samples"),
        },
        Some((x, v)) if v < NONNEG_TOL => Verdict::Violated { x, value: v },
        Some((_, v)) => Verdict::Holds { margin: v },
    };
    ConditionReport {
        name: name.into(),
        expression: e.to_string(),
        verdict,
        samples,
        skipped,
        approximate: !domain.is_bounded(),
    }
}

/// Sampled check that `e ≥ 0` on the interior of `domain`.
pub fn check_nonneg(e: &Expr, domain: &Interval) -> ConditionReport {
    check_nonneg_with(e, domain, DEFAULT_CHECK_GRID)
}

pub fn check_nonneg_with(e: &Expr, domain: &Interval, grid: usize) -> ConditionReport {
    let singular = singular_points(e, domain, DEFAULT_SCAN_POINTS).all();
    nonneg_report("nonnegative", e, domain, &singular, grid)
}

/// `β > sup σ` with margin [`BETA_MARGIN`]; the supremum is sampled over the
/// closure of the domain.
fn beta_report(inst: &HardyInstance, grid: usize) -> ConditionReport {
    let neg_sigma = Expr::neg(inst.sigma.clone());
    let mut pts = sample_points(&inst.domain, &inst.singular.all(), grid);
    pts.extend(inst.domain.finite_endpoints());
    pts.sort_by(|a, b| a.total_cmp(b));
    let (best, samples, skipped) = sampled_min(&neg_sigma, &inst.domain, &pts);
    let verdict = match best {
        None => Verdict::Indeterminate {
            reason: "sigma undefined at every sample".into(),
        },
        Some((x, v)) => {
            let sup = -v;
            let margin = inst.beta - sup;
            if margin >= BETA_MARGIN {
                Verdict::Holds { margin }
            } else {
                Verdict::Violated { x, value: margin }
            }
        }
    };
    ConditionReport {
        name: "beta-exceeds-sigma".into(),
        expression: format!("{} - ({})", inst.beta, inst.sigma),
        verdict,
        samples,
        skipped,
        approximate: !inst.domain.is_bounded(),
    }
}

/// Check the crucial conditions of `inst` on the default grid.
pub fn check_crucial(inst: &HardyInstance) -> AdmissibilityReport {
    check_crucial_with(inst, None, DEFAULT_CHECK_GRID)
}

/// Check `u ≥ 0`, `Φu + σ|u′|^p ≥ 0`, `β > sup σ` and, when given, a
/// preset's closed-form condition `condition ≥ 0`.
pub fn check_crucial_with(
    inst: &HardyInstance,
    condition: Option<&Expr>,
    grid: usize,
) -> AdmissibilityReport {
    let singular = inst.singular.all();
    let u_nonnegative = nonneg_report("u-nonnegative", &inst.u, &inst.domain, &singular, grid);
    let crucial_pointwise = nonneg_report(
        "crucial-pointwise",
        &inst.crucial_expr(),
        &inst.domain,
        &singular,
        grid,
    );
    let beta_exceeds_sigma = beta_report(inst, grid);
    let preset_condition = condition.map(|c| {
        let mut s = singular.clone();
        s.extend(singular_points(c, &inst.domain, DEFAULT_SCAN_POINTS).all());
        nonneg_report("preset-condition", c, &inst.domain, &s, grid)
    });
    AdmissibilityReport {
        p_minus: inst.vp.p_minus,
        p_plus: inst.vp.p_plus,
        degenerate_infimum: inst.vp.degenerate_infimum,
        u_nonnegative,
        crucial_pointwise,
        beta_exceeds_sigma,
        preset_condition,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn cone(sigma: &str, beta: f64) -> HardyInstance {
        HardyInstance::new(
            Interval::open(-1.0, 1.0).unwrap(),
            parse("2").unwrap(),
            parse("1 - abs(x)").unwrap(),
            Expr::zero(),
            parse(sigma).unwrap(),
            beta,
        )
        .unwrap()
    }

    #[test]
    fn cone_with_unit_sigma_holds_with_unit_margin() {
        let r = check_crucial(&cone("1", 2.0));
        assert!(r.admissible(), "{r:?}");
        match r.beta_exceeds_sigma.verdict {
            Verdict::Holds { margin } => assert!((margin - 1.0).abs() < 1e-15),
            ref v => panic!("{v:?}"),
        }
    }

    #[test]
    fn sigma_above_beta_is_violated() {
        let r = check_crucial(&cone("3", 2.0));
        assert!(r.beta_exceeds_sigma.verdict.violated());
        assert!(!r.admissible());
    }

    #[test]
    fn negative_sigma_breaks_pointwise_condition() {
        let r = check_crucial(&cone("-1", 2.0));
        assert!(r.crucial_pointwise.verdict.violated());
    }

    #[test]
    fn nonneg_examples() {
        let dom = Interval::open(-1.0, 1.0).unwrap();
        assert_eq!(
            check_nonneg(&Expr::zero(), &dom).verdict,
            Verdict::Holds { margin: 0.0 }
        );
        match check_nonneg(&parse("-x^2").unwrap(), &dom).verdict {
            Verdict::Violated { x, value } => {
                assert!(x.abs() > 0.9);
                assert!(value < -0.8);
            }
            v => panic!("{v:?}"),
        }
        assert!(check_nonneg(&parse("x^2").unwrap(), &dom).verdict.holds());
    }

    #[test]
    fn touching_zero_counts_as_holding() {
        let dom = Interval::open(0.0, 3.0).unwrap();
        let e = parse("(x - 1.4142135623730951)^2").unwrap();
        assert!(check_nonneg(&e, &dom).verdict.holds());
    }
}
