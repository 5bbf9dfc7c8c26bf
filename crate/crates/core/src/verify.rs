//! Numerical verification of the Caccioppoli estimate, the Hardy
//! inequality and the two elementary inequalities behind them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuadError, VerifyError};
use crate::instance::{check_crucial, HardyInstance, InstanceDescriptor};
use crate::interval::Interval;
use crate::measure::{integrate_against, WeightedMeasure};
use crate::quadrature::{QuadOptions, QuadratureResult, Split};
use crate::testfn::TestFunction;

/// Tolerance tightening applied once to an indeterminate verdict.
pub const RETRY_FACTOR: f64 = 100.0;

/// `RHS − LHS` of `s₁s₂^{p−1} ≤ s₁^p/(pτ^{p−1}) + ((p−1)/p)τ s₂^p`.
pub fn check_young(s1: f64, s2: f64, p: f64, tau: f64) -> f64 {
    let lhs = s1 * s2.powf(p - 1.0);
    let rhs = s1.powf(p) / (p * tau.powf(p - 1.0)) + (p - 1.0) / p * tau * s2.powf(p);
    rhs - lhs
}

/// `RHS − LHS` of `(s₁+s₂)^p ≤ 2^{(p−1)χ_{s₁≠0}}(s₁^p + s₂^p)`.
pub fn check_sum_power(s1: f64, s2: f64, p: f64) -> f64 {
    let factor = if s1 != 0.0 { 2f64.powf(p - 1.0) } else { 1.0 };
    factor * (s1.powf(p) + s2.powf(p)) - (s1 + s2).powf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    Caccioppoli,
    Hardy,
}

impl Inequality {
    pub fn as_str(self) -> &'static str {
        match self {
            Inequality::Caccioppoli => "caccioppoli",
            Inequality::Hardy => "hardy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub inequality: Inequality,
    pub lhs: QuadratureResult,
    pub rhs_main: QuadratureResult,
    /// Zero for the Caccioppoli estimate and for constant exponents.
    pub rhs_log: QuadratureResult,
    /// `rhs_main + rhs_log − lhs`.
    pub margin: f64,
    pub combined_error: f64,
    pub verdict: VerdictKind,
    /// The verdict came from a second pass at a tightened tolerance.
    pub retried: bool,
    pub rel_tol: f64,
}

impl VerificationReport {
    fn new(
        inequality: Inequality,
        lhs: QuadratureResult,
        rhs_main: QuadratureResult,
        rhs_log: QuadratureResult,
        rel_tol: f64,
    ) -> Self {
        let margin = rhs_main.value + rhs_log.value - lhs.value;
        let combined_error = lhs.error_bound + rhs_main.error_bound + rhs_log.error_bound;
        let verdict = if margin > combined_error || (combined_error == 0.0 && margin >= 0.0) {
            VerdictKind::Pass
        } else if margin < -combined_error {
            VerdictKind::Fail
        } else {
            VerdictKind::Indeterminate
        };
        Self {
            inequality,
            lhs,
            rhs_main,
            rhs_log,
            margin,
            combined_error,
            verdict,
            retried: false,
            rel_tol,
        }
    }

    pub fn rhs_total(&self) -> f64 {
        self.rhs_main.value + self.rhs_log.value
    }
}

/// An instance with its measures built once, for verifying many test
/// functions.
#[derive(Debug, Clone)]
pub struct Verifier {
    pub instance: HardyInstance,
    pub mu1: WeightedMeasure,
    pub mu2: WeightedMeasure,
    pub caccioppoli_weight: WeightedMeasure,
    splits: Vec<Split>,
}

fn quad(side: &'static str) -> impl Fn(QuadError) -> VerifyError {
    move |source| VerifyError::Quadrature { side, source }
}

/// Divergence and non-finite sums become errors instead of verdicts.
fn settled(r: QuadratureResult, side: &'static str) -> Result<QuadratureResult, VerifyError> {
    if r.is_divergent() {
        return Err(VerifyError::Divergent { side });
    }
    if !r.value.is_finite() || !r.error_bound.is_finite() {
        return Err(VerifyError::Quadrature {
            side,
            source: QuadError::NonFinite {
                x: f64::NAN,
                value: r.value,
            },
        });
    }
    Ok(r)
}

impl Verifier {
    pub fn new(instance: &HardyInstance) -> Self {
        let (mu1, mu2) = instance.measures();
        Self {
            caccioppoli_weight: instance.caccioppoli_weight(),
            splits: instance.splits(),
            instance: instance.clone(),
            mu1,
            mu2,
        }
    }

    fn check_support(&self, f: &TestFunction) -> Result<Interval, VerifyError> {
        let s = f.support();
        let d = &self.instance.domain;
        if !(d.contains_interior(s.lo()) && d.contains_interior(s.hi())) {
            return Err(VerifyError::InvalidTestFunction(format!(
                "support {s} is not strictly inside the domain {d}"
            )));
        }
        let n = 257;
        for i in 0..=n {
            let x = s.lo() + (s.hi() - s.lo()) * i as f64 / n as f64;
            let v = f.value(x);
            if !(v >= 0.0) {
                return Err(VerifyError::InvalidTestFunction(format!(
                    "negative or undefined value {v} at {x}"
                )));
            }
        }
        Ok(s)
    }

    fn splits_for(&self, f: &TestFunction, support: &Interval) -> Vec<Split> {
        let mut s = self.splits.clone();
        s.extend(f.breakpoints(&self.instance.domain));
        s.retain(|sp| support.contains(sp.at));
        s
    }

    fn caccioppoli_once(
        &self,
        phi: &TestFunction,
        support: &Interval,
        opts: &QuadOptions,
    ) -> Result<VerificationReport, VerifyError> {
        let splits = self.splits_for(phi, support);
        let p = self.instance.p();
        let lhs = settled(
            integrate_against(&|x| phi.value(x), Some(*support), &splits, &self.mu1, opts)
                .map_err(quad("lhs"))?,
            "lhs",
        )?;
        let rough = |x: f64| phi.rough_term(x, p.eval_or_nan(x));
        let rhs = settled(
            integrate_against(
                &rough,
                Some(*support),
                &splits,
                &self.caccioppoli_weight,
                opts,
            )
            .map_err(quad("rhs"))?,
            "rhs",
        )?;
        Ok(VerificationReport::new(
            Inequality::Caccioppoli,
            lhs,
            rhs,
            QuadratureResult::zero(),
            opts.rel_tol,
        ))
    }

    /// `∫φ dμ₁ ≤ ∫|φ′|^p φ^{1−p} dμ_C` for a nonnegative bump `φ`.
    pub fn caccioppoli(
        &self,
        phi: &TestFunction,
        opts: &QuadOptions,
    ) -> Result<VerificationReport, VerifyError> {
        let support = self.check_support(phi)?;
        let k = phi.edge_exponent();
        if k <= self.instance.vp.p_plus - 1.0 {
            return Err(VerifyError::InvalidTestFunction(format!(
                "edge exponent {k} must exceed p_plus - 1 = {}",
                self.instance.vp.p_plus - 1.0
            )));
        }
        with_retry(opts, |o| self.caccioppoli_once(phi, &support, o))
    }

    /// The three integrals of the Hardy inequality for `ξ`.
    pub fn hardy_integrals(
        &self,
        xi: &TestFunction,
        opts: &QuadOptions,
    ) -> Result<(QuadratureResult, QuadratureResult, QuadratureResult), VerifyError> {
        let support = self.check_support(xi)?;
        self.hardy_integrals_on(xi, &support, opts)
    }

    fn hardy_integrals_on(
        &self,
        xi: &TestFunction,
        support: &Interval,
        opts: &QuadOptions,
    ) -> Result<(QuadratureResult, QuadratureResult, QuadratureResult), VerifyError> {
        let splits = self.splits_for(xi, support);
        let p = self.instance.p();
        let dp = self.instance.p_prime();
        let lhs_f = |x: f64| {
            let v = xi.value(x).abs();
            if v == 0.0 {
                0.0
            } else {
                v.powf(p.eval_or_nan(x))
            }
        };
        let lhs = settled(
            integrate_against(&lhs_f, Some(*support), &splits, &self.mu1, opts)
                .map_err(quad("lhs"))?,
            "lhs",
        )?;
        let main_f = |x: f64| {
            let d = xi.derivative(x).abs();
            if d == 0.0 {
                0.0
            } else {
                d.powf(p.eval_or_nan(x))
            }
        };
        let main = settled(
            integrate_against(&main_f, Some(*support), &splits, &self.mu2, opts)
                .map_err(quad("rhs-main"))?,
            "rhs-main",
        )?;
        let log = if self.instance.vp.is_constant() {
            QuadratureResult::zero()
        } else {
            let log_f = |x: f64| {
                let v = xi.value(x).abs();
                let d = dp.eval_or_nan(x);
                if v == 0.0 || v == 1.0 || d == 0.0 {
                    return 0.0;
                }
                let px = p.eval_or_nan(x);
                (v * v.ln() * d / px).abs().powf(px)
            };
            settled(
                integrate_against(&log_f, Some(*support), &splits, &self.mu2, opts)
                    .map_err(quad("rhs-log"))?,
                "rhs-log",
            )?
        };
        Ok((lhs, main, log))
    }

    /// `∫|ξ|^p dμ₁ ≤ ∫|ξ′|^p dμ₂ + ∫|ξ log ξ|^p |p′|^p/p^p dμ₂`.
    pub fn hardy(
        &self,
        xi: &TestFunction,
        opts: &QuadOptions,
    ) -> Result<VerificationReport, VerifyError> {
        let support = self.check_support(xi)?;
        with_retry(opts, |o| {
            let (lhs, main, log) = self.hardy_integrals_on(xi, &support, o)?;
            Ok(VerificationReport::new(
                Inequality::Hardy,
                lhs,
                main,
                log,
                o.rel_tol,
            ))
        })
    }

    pub fn verify(
        &self,
        which: Inequality,
        f: &TestFunction,
        opts: &QuadOptions,
    ) -> Result<VerificationReport, VerifyError> {
        match which {
            Inequality::Caccioppoli => self.caccioppoli(f, opts),
            Inequality::Hardy => self.hardy(f, opts),
        }
    }
}

fn with_retry(
    opts: &QuadOptions,
    run: impl Fn(&QuadOptions) -> Result<VerificationReport, VerifyError>,
) -> Result<VerificationReport, VerifyError> {
    let first = run(opts)?;
    if first.verdict != VerdictKind::Indeterminate {
        return Ok(first);
    }
    let mut second = run(&opts.tightened(RETRY_FACTOR))?;
    second.retried = true;
    Ok(second)
}

pub fn verify_caccioppoli(
    inst: &HardyInstance,
    phi: &TestFunction,
    opts: &QuadOptions,
) -> Result<VerificationReport, VerifyError> {
    Verifier::new(inst).caccioppoli(phi, opts)
}

pub fn verify_hardy(
    inst: &HardyInstance,
    xi: &TestFunction,
    opts: &QuadOptions,
) -> Result<VerificationReport, VerifyError> {
    Verifier::new(inst).hardy(xi, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    PowerBump,
    Spline,
    /// Alternating power bumps and splines.
    Mixed,
}

/// Finite window of the domain in which random supports are drawn.
pub fn sampling_window(domain: &Interval) -> (f64, f64) {
    let (mut a, mut b) = (domain.lo(), domain.hi());
    if a == f64::NEG_INFINITY {
        a = if b.is_finite() { b - 10.0 } else { -10.0 };
    }
    if b == f64::INFINITY {
        b = a + 10.0;
    }
    let inset = 0.01 * (b - a);
    if domain.lo().is_finite() {
        a += inset;
    }
    if domain.hi().is_finite() {
        b -= inset;
    }
    (a, b)
}

/// Draw `count` test functions from `family` inside the instance's domain.
pub fn generate_family(
    inst: &HardyInstance,
    family: FamilyKind,
    count: usize,
    seed: u64,
) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = sampling_window(&inst.domain);
    let k = inst.vp.p_plus.ceil() + 1.0;
    (0..count)
        .map(|i| {
            let spline = match family {
                FamilyKind::PowerBump => false,
                FamilyKind::Spline => true,
                FamilyKind::Mixed => i % 2 == 1,
            };
            let m = rng.gen_range(a..b);
            let r = (m - a).min(b - m).max(1e-3 * (b - a)) * rng.gen_range(0.2..0.95);
            let (lo, hi) = ((m - r).max(a), (m + r).min(b));
            if spline {
                let n = rng.gen_range(2..=5usize);
                let mut knots: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
                knots.push(lo);
                knots.push(hi);
                knots.sort_by(|x, y| x.total_cmp(y));
                knots.dedup();
                let len = knots.len();
                let values: Vec<f64> = (0..len)
                    .map(|j| {
                        if j == 0 || j == len - 1 {
                            0.0
                        } else {
                            rng.gen_range(0.1..2.0)
                        }
                    })
                    .collect();
                TestFunction::spline(knots, values).expect("generated spline")
            } else {
                let height = rng.gen_range(0.2..2.0);
                TestFunction::power_bump(0.5 * (lo + hi), 0.5 * (hi - lo), height, k)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub instance: InstanceDescriptor,
    pub inequality: Inequality,
    pub test_function: TestFunction,
    pub seed: u64,
    pub index: usize,
    pub margin: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub inequality: Inequality,
    pub family: FamilyKind,
    pub seed: u64,
    pub count: usize,
    pub pass: usize,
    pub fail: usize,
    pub indeterminate: usize,
    /// Cases that could not be evaluated (quadrature or test-function errors).
    pub errors: usize,
    pub retried: usize,
    pub worst_margin: Option<f64>,
    /// Smallest `margin / rhs_total`.
    pub worst_relative_margin: Option<f64>,
    pub evaluations: usize,
    /// Failing, indeterminate and erroring cases, for replay.
    pub witnesses: Vec<Witness>,
}

/// Verify `count` seeded test functions. Refuses to run on an instance whose
/// crucial conditions are violated.
pub fn batch_verify(
    inst: &HardyInstance,
    which: Inequality,
    family: FamilyKind,
    count: usize,
    seed: u64,
    opts: &QuadOptions,
) -> Result<BatchSummary, VerifyError> {
    let mut summary = BatchSummary {
        inequality: which,
        family,
        seed,
        count,
        pass: 0,
        fail: 0,
        indeterminate: 0,
        errors: 0,
        retried: 0,
        worst_margin: None,
        worst_relative_margin: None,
        evaluations: 0,
        witnesses: Vec::new(),
    };
    if count == 0 {
        return Ok(summary);
    }
    let adm = check_crucial(inst);
    if adm.any_violated() {
        let names: Vec<&str> = adm
            .conditions()
            .iter()
            .filter(|c| c.verdict.violated())
            .map(|c| c.name.as_str())
            .collect();
        return Err(VerifyError::Inadmissible(names.join(", ")));
    }
    let verifier = Verifier::new(inst);
    let cases = generate_family(inst, family, count, seed);
    let outcomes: Vec<Result<VerificationReport, VerifyError>> = cases
        .par_iter()
        .map(|f| verifier.verify(which, f, opts))
        .collect();
    for (index, (f, out)) in cases.iter().zip(outcomes).enumerate() {
        let witness = |margin: Option<f64>, error: Option<String>| Witness {
            instance: inst.descriptor.clone(),
            inequality: which,
            test_function: f.clone(),
            seed,
            index,
            margin,
            error,
        };
        match out {
            Ok(r) => {
                summary.evaluations +=
                    r.lhs.evaluations + r.rhs_main.evaluations + r.rhs_log.evaluations;
                summary.retried += r.retried as usize;
                summary.worst_margin =
                    Some(summary.worst_margin.map_or(r.margin, |w| w.min(r.margin)));
                let rel = r.margin / r.rhs_total().abs().max(f64::MIN_POSITIVE);
                summary.worst_relative_margin =
                    Some(summary.worst_relative_margin.map_or(rel, |w| w.min(rel)));
                match r.verdict {
                    VerdictKind::Pass => summary.pass += 1,
                    VerdictKind::Fail => {
                        summary.fail += 1;
                        summary.witnesses.push(witness(Some(r.margin), None));
                    }
                    VerdictKind::Indeterminate => {
                        summary.indeterminate += 1;
                        summary.witnesses.push(witness(Some(r.margin), None));
                    }
                }
            }
            Err(e) => {
                summary.errors += 1;
                summary.witnesses.push(witness(None, Some(e.to_string())));
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{preset, PresetParams};

    #[test]
    fn young_examples() {
        assert_eq!(check_young(1.0, 1.0, 2.0, 1.0), 0.0);
        assert!((check_young(0.0, 5.0, 3.0, 2.0) - 500.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sum_power_examples() {
        assert_eq!(check_sum_power(0.0, 7.0, 2.5), 0.0);
        assert_eq!(check_sum_power(1.0, 1.0, 2.0), 0.0);
    }

    fn cor51() -> HardyInstance {
        preset("cor51", &PresetParams::default()).unwrap().instance
    }

    #[test]
    fn caccioppoli_on_cone_passes() {
        let r = verify_caccioppoli(
            &cor51(),
            &TestFunction::power_bump(0.0, 0.999, 1.0, 3.0),
            &QuadOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, VerdictKind::Pass, "{r:?}");
        assert!(r.lhs.value > 0.0);
    }

    #[test]
    fn zero_test_function_passes_with_zero_margin() {
        let f = TestFunction::power_bump(0.0, 0.5, 0.0, 3.0);
        let inst = cor51();
        let r = verify_caccioppoli(&inst, &f, &QuadOptions::default()).unwrap();
        assert_eq!((r.lhs.value, r.rhs_main.value, r.margin), (0.0, 0.0, 0.0));
        assert_eq!(r.verdict, VerdictKind::Pass);
        let r = verify_hardy(&inst, &f, &QuadOptions::default()).unwrap();
        assert_eq!(r.margin, 0.0);
        assert_eq!(r.verdict, VerdictKind::Pass);
    }

    #[test]
    fn tent_with_cubic_exponent_is_rejected() {
        let params = PresetParams {
            p: Some("3".into()),
            ..Default::default()
        };
        let inst = preset("cor51", &params).unwrap().instance;
        let e = verify_caccioppoli(
            &inst,
            &TestFunction::tent(0.0, 0.5, 1.0),
            &QuadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, VerifyError::InvalidTestFunction(_)));
    }

    #[test]
    fn hardy_on_cone_with_spline_passes_and_log_term_vanishes() {
        let xi =
            TestFunction::spline(vec![-0.8, -0.1, 0.3, 0.7], vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        let r = verify_hardy(&cor51(), &xi, &QuadOptions::default()).unwrap();
        assert_eq!(r.verdict, VerdictKind::Pass);
        assert_eq!(r.rhs_log.value, 0.0);
    }

    #[test]
    fn support_must_lie_inside_domain() {
        let e = verify_hardy(
            &cor51(),
            &TestFunction::power_bump(0.5, 0.6, 1.0, 3.0),
            &QuadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, VerifyError::InvalidTestFunction(_)));
    }

    #[test]
    fn batch_is_deterministic_and_refuses_inadmissible() {
        let inst = cor51();
        let o = QuadOptions::default();
        let a = batch_verify(
            &inst,
            Inequality::Caccioppoli,
            FamilyKind::PowerBump,
            6,
            7,
            &o,
        )
        .unwrap();
        let b = batch_verify(
            &inst,
            Inequality::Caccioppoli,
            FamilyKind::PowerBump,
            6,
            7,
            &o,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pass, 6);
        let empty = batch_verify(&inst, Inequality::Hardy, FamilyKind::Mixed, 0, 7, &o).unwrap();
        assert_eq!((empty.count, empty.pass, empty.worst_margin), (0, 0, None));
        let bad = inst.with_beta(1.0);
        assert!(matches!(
            batch_verify(&bad, Inequality::Hardy, FamilyKind::Mixed, 3, 7, &o),
            Err(VerifyError::Inadmissible(_))
        ));
    }

    #[test]
    fn generated_supports_stay_inside() {
        for name in ["cor51", "cor55", "constp"] {
            let inst = preset(name, &PresetParams::default()).unwrap().instance;
            for f in generate_family(&inst, FamilyKind::Mixed, 40, 3) {
                let s = f.support();
                assert!(
                    inst.domain.contains_interior(s.lo()) && inst.domain.contains_interior(s.hi()),
                    "{name} {s}"
                );
            }
        }
    }
}
