//! Hardy instances `(I, p, u, Φ, σ, β)`: construction, admissibility checks
//! and the weighted measures of the Hardy and Caccioppoli inequalities.

mod checks;
mod presets;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{InstanceError, QuadError};
use crate::expr::{singular_points, Expr, SingularSet, DEFAULT_SCAN_POINTS};
use crate::interval::Interval;
use crate::measure::{zero_set, Gate, GateKind, WeightedMeasure, WhenOff};
use crate::quadrature::{QuadOptions, QuadratureResult, Split};
use crate::spaces::{validate_exponent, VariableExponent};
use crate::testfn::TestFunction;

pub use checks::{
    check_crucial, check_crucial_with, check_nonneg, check_nonneg_with, AdmissibilityReport,
    ConditionReport, Verdict, DEFAULT_CHECK_GRID,
};
pub use presets::{preset, scenario, Preset, PresetParams, PRESET_NAMES, SCENARIO_NAMES};

/// Margin by which `β` must exceed `sup σ`.
pub const BETA_MARGIN: f64 = 1e-9;

/// Enough information to rebuild an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub preset: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub p: String,
    pub u: String,
    pub phi: String,
    pub sigma: String,
    pub beta: f64,
    pub domain: Interval,
}

/// A nonnegative supersolution `u` of `-Δ_{p(x)} u ≥ Φ` together with the
/// parameters `σ(x)` and `β` of the crucial conditions.
#[derive(Debug, Clone)]
pub struct HardyInstance {
    pub domain: Interval,
    pub vp: VariableExponent,
    pub u: Expr,
    pub phi: Expr,
    pub sigma: Expr,
    pub beta: f64,
    pub u_prime: Expr,
    pub u_second: Expr,
    pub singular: SingularSet,
    pub descriptor: InstanceDescriptor,
}

impl HardyInstance {
    /// Build an instance; admissibility is checked separately by [`check_crucial`].
    pub fn new(
        domain: Interval,
        p: Expr,
        u: Expr,
        phi: Expr,
        sigma: Expr,
        beta: f64,
    ) -> Result<Self, InstanceError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(InstanceError::InvalidParams(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        let vp = validate_exponent(&p, &domain)?;
        let u_prime = u.differentiate();
        let u_second = u_prime.differentiate();
        let mut singular = vp.singular.clone();
        for e in [&u, &u_prime, &phi, &sigma] {
            singular.merge(&singular_points(e, &domain, DEFAULT_SCAN_POINTS));
        }
        let descriptor = InstanceDescriptor {
            preset: None,
            params: BTreeMap::new(),
            p: p.to_string(),
            u: u.to_string(),
            phi: phi.to_string(),
            sigma: sigma.to_string(),
            beta,
            domain,
        };
        Ok(Self {
            domain,
            vp,
            u,
            phi,
            sigma,
            beta,
            u_prime,
            u_second,
            singular,
            descriptor,
        })
    }

    pub fn p(&self) -> &Expr {
        &self.vp.p
    }

    pub fn p_prime(&self) -> &Expr {
        &self.vp.p_prime
    }

    /// `Φ·u + σ|u′|^p`, the left side of the first crucial condition.
    pub fn crucial_expr(&self) -> Expr {
        Expr::add(
            Expr::mul(self.phi.clone(), self.u.clone()),
            Expr::mul(self.sigma.clone(), abs_pow(&self.u_prime, self.p())),
        )
    }

    /// Same instance with a different `β`.
    pub fn with_beta(&self, beta: f64) -> Self {
        let mut out = self.clone();
        out.beta = beta;
        out.descriptor.beta = beta;
        out
    }

    /// Quadrature splits: every recorded singular point, flagged when one of
    /// the instance's expressions cannot be evaluated there.
    pub fn splits(&self) -> Vec<Split> {
        self.singular
            .all()
            .into_iter()
            .filter(|x| self.domain.contains_interior(*x))
            .map(|at| {
                let bad = [&self.u, &self.phi, &self.sigma, self.p()]
                    .iter()
                    .any(|e| e.eval(at).is_err());
                Split { at, singular: bad }
            })
            .collect()
    }

    /// `((p−1)/(β−σ))^{p−1}`.
    fn mu2_factor(&self) -> Expr {
        let p = self.p();
        let pm1 = Expr::sub(p.clone(), Expr::one());
        Expr::pow(
            Expr::div(
                pm1.clone(),
                Expr::sub(Expr::constant(self.beta), self.sigma.clone()),
            ),
            pm1,
        )
    }

    /// `u^{p−β−1}`.
    fn u_power(&self) -> Expr {
        Expr::pow(
            self.u.clone(),
            Expr::sub(self.p().clone(), Expr::constant(self.beta + 1.0)),
        )
    }

    /// `μ₂` with the `2^{(p−1)χ_{p′≠0}}` factor and the `χ_{u′≠0}` indicator.
    fn mu2(&self, provenance: &str) -> WeightedMeasure {
        let base = Expr::mul(self.mu2_factor(), self.u_power());
        let p = self.p();
        let gates = if self.p_prime().is_zero() {
            vec![Gate::nonzero(self.u_prime.clone())]
        } else {
            let doubled = Expr::mul(
                Expr::pow(Expr::constant(2.0), Expr::sub(p.clone(), Expr::one())),
                base.clone(),
            );
            return WeightedMeasure::new(
                doubled,
                vec![
                    Gate {
                        predicate: self.p_prime().clone(),
                        kind: GateKind::Nonzero,
                        when_off: WhenOff::Replace(base),
                    },
                    Gate::nonzero(self.u_prime.clone()),
                ],
                self.domain,
                provenance,
            );
        };
        WeightedMeasure::new(base, gates, self.domain, provenance)
    }

    /// Measures of the general Hardy inequality:
    /// `μ₁ = (Φu + σ|u′|^p) u^{−β−1} χ_{u>0}` and
    /// `μ₂ = ((p−1)/(β−σ))^{p−1} 2^{(p−1)χ_{p′≠0}} u^{p−β−1} χ_{u′≠0}`.
    pub fn measures(&self) -> (WeightedMeasure, WeightedMeasure) {
        let d1 = Expr::mul(
            self.crucial_expr(),
            Expr::pow(self.u.clone(), Expr::constant(-self.beta - 1.0)),
        );
        let mu1 = WeightedMeasure::new(
            d1,
            vec![Gate::positive(self.u.clone())],
            self.domain,
            "hardy-general",
        );
        (mu1, self.mu2("hardy-general"))
    }

    /// Right-hand weight of the Caccioppoli estimate,
    /// `(p−1)^{p−1} / (p^p (β−σ)^{p−1}) u^{p−β−1} χ_{u′≠0}`.
    pub fn caccioppoli_weight(&self) -> WeightedMeasure {
        let p = self.p();
        let pm1 = Expr::sub(p.clone(), Expr::one());
        let c = Expr::div(
            Expr::pow(pm1.clone(), pm1.clone()),
            Expr::mul(
                Expr::pow(p.clone(), p.clone()),
                Expr::pow(
                    Expr::sub(Expr::constant(self.beta), self.sigma.clone()),
                    pm1,
                ),
            ),
        );
        WeightedMeasure::new(
            Expr::mul(c, self.u_power()),
            vec![Gate::nonzero(self.u_prime.clone())],
            self.domain,
            "caccioppoli",
        )
    }

    /// Zeros of `u` inside the closed domain, bracketed.
    pub fn zero_set_of_u(&self) -> Result<Vec<f64>, InstanceError> {
        let s = singular_points(&self.u, &self.domain, DEFAULT_SCAN_POINTS);
        if !s.suspected.is_empty() {
            let near: Vec<f64> = s
                .suspected
                .iter()
                .copied()
                .filter(|x| self.u.eval(*x).map(|v| v.abs() < 1e-12).unwrap_or(true))
                .collect();
            if !near.is_empty() {
                return Err(InstanceError::ZeroSetUnresolved {
                    what: "u".into(),
                    near,
                });
            }
        }
        Ok(zero_set(&self.u, &self.domain))
    }
}

/// `|e|^p` with the exponent taken from `p`.
pub(crate) fn abs_pow(e: &Expr, p: &Expr) -> Expr {
    Expr::pow(Expr::abs(e.clone()), p.clone())
}

/// `Φ = −(|u′|^{p−2}u′)′ = −|u′|^{p−2}[p′u′ log|u′| + (p−1)u″]`, the
/// log term omitted when `p′` vanishes identically.
pub fn phi_from_supersolution(p: &Expr, u: &Expr) -> Expr {
    let du = u.differentiate();
    let d2u = du.differentiate();
    let dp = p.differentiate();
    let pm1 = Expr::sub(p.clone(), Expr::one());
    let mut bracket = Expr::mul(pm1, d2u);
    if !dp.is_zero() {
        let log_term = Expr::mul(Expr::mul(dp, du.clone()), Expr::log(Expr::abs(du.clone())));
        bracket = Expr::add(log_term, bracket);
    }
    let weight = Expr::pow(Expr::abs(du), Expr::sub(p.clone(), Expr::constant(2.0)));
    Expr::neg(Expr::mul(weight, bracket))
}

/// `g = σ(u′)² − p′ u u′ log|u′| − (p−1) u u″`.
pub fn g_theorem52(inst: &HardyInstance) -> Expr {
    let u = &inst.u;
    let du = &inst.u_prime;
    let mut g = Expr::mul(inst.sigma.clone(), Expr::powf(du.clone(), 2.0));
    if !inst.p_prime().is_zero() && !du.is_zero() {
        let log_term = Expr::mul(
            Expr::mul(Expr::mul(inst.p_prime().clone(), u.clone()), du.clone()),
            Expr::log(Expr::abs(du.clone())),
        );
        g = Expr::sub(g, log_term);
    }
    let curvature = Expr::mul(
        Expr::mul(Expr::sub(inst.p().clone(), Expr::one()), u.clone()),
        inst.u_second.clone(),
    );
    Expr::sub(g, curvature)
}

/// One-dimensional measures built from `g`:
/// `μ₁ = |u′|^{p−2} u^{−β−1} g χ_{u>0}` and `μ₂` as in [`HardyInstance::measures`].
pub fn measures_theorem52(
    inst: &HardyInstance,
) -> Result<(WeightedMeasure, WeightedMeasure), InstanceError> {
    inst.zero_set_of_u()?;
    let p = inst.p();
    let d1 = Expr::mul(
        Expr::mul(
            Expr::pow(
                Expr::abs(inst.u_prime.clone()),
                Expr::sub(p.clone(), Expr::constant(2.0)),
            ),
            Expr::pow(inst.u.clone(), Expr::constant(-inst.beta - 1.0)),
        ),
        g_theorem52(inst),
    );
    let mu1 = WeightedMeasure::new(
        d1,
        vec![Gate::positive(inst.u.clone())],
        inst.domain,
        "hardy-one-dimensional",
    );
    Ok((mu1, inst.mu2("hardy-one-dimensional")))
}

/// Constant-exponent form: `μ₁` scaled by `K = ((β−σ)/(p−1))^{p−1}` and
/// `μ₂ = u^{p−β−1} χ_{u′≠0}`, i.e. both general measures multiplied by `K`.
pub fn measures_constant_exponent(
    inst: &HardyInstance,
) -> Result<(WeightedMeasure, WeightedMeasure), InstanceError> {
    if !inst.p_prime().is_zero() {
        return Err(InstanceError::InvalidParams(
            "constant-exponent measures need p′ ≡ 0".into(),
        ));
    }
    let p = inst.p();
    let pm1 = Expr::sub(p.clone(), Expr::one());
    let k = Expr::pow(
        Expr::div(
            Expr::sub(Expr::constant(inst.beta), inst.sigma.clone()),
            pm1.clone(),
        ),
        pm1,
    );
    let d1 = Expr::mul(
        k,
        Expr::mul(
            inst.crucial_expr(),
            Expr::pow(inst.u.clone(), Expr::constant(-inst.beta - 1.0)),
        ),
    );
    let mu1 = WeightedMeasure::new(
        d1,
        vec![Gate::positive(inst.u.clone())],
        inst.domain,
        "hardy-constant-exponent",
    );
    let mu2 = WeightedMeasure::new(
        inst.u_power(),
        vec![Gate::nonzero(inst.u_prime.clone())],
        inst.domain,
        "hardy-constant-exponent",
    );
    Ok((mu1, mu2))
}

/// `∫|u′|^{p−2}u′w′ dx − ∫Φw dx` for a nonnegative test function `w`.
pub fn weak_pdi_residual(
    inst: &HardyInstance,
    w: &TestFunction,
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadError> {
    let p = inst.p();
    let flux = Expr::mul(
        Expr::pow(
            Expr::abs(inst.u_prime.clone()),
            Expr::sub(p.clone(), Expr::constant(2.0)),
        ),
        inst.u_prime.clone(),
    );
    let integrand = |x: f64| -> f64 {
        let dw = w.derivative(x);
        let wv = w.value(x);
        let a = if dw == 0.0 {
            0.0
        } else {
            flux.eval_or_nan(x) * dw
        };
        let b = if wv == 0.0 {
            0.0
        } else {
            inst.phi.eval_or_nan(x) * wv
        };
        a - b
    };
    let Some(region) = w.support().intersect(&inst.domain) else {
        return Ok(QuadratureResult::zero());
    };
    let mut splits = inst.splits();
    splits.extend(w.breakpoints(&region));
    crate::quadrature::integrate(
        integrand,
        &region,
        &splits,
        crate::quadrature::EndpointFlags::NONE,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn tent_instance() -> HardyInstance {
        HardyInstance::new(
            Interval::open(-1.0, 1.0).unwrap(),
            parse("2").unwrap(),
            parse("1 - abs(x)").unwrap(),
            Expr::zero(),
            Expr::one(),
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn g_for_exponential_supersolution_factors() {
        let inst = HardyInstance::new(
            Interval::open(0.1, 1.5).unwrap(),
            parse("exp(x)").unwrap(),
            parse("exp(x)").unwrap(),
            Expr::zero(),
            parse("x^2").unwrap(),
            5.0,
        )
        .unwrap();
        let g = g_theorem52(&inst);
        for x in [0.2, 0.5, 0.9, 1.4f64] {
            let oracle = (2.0 * x).exp() * (x * x - x.exp() * x - x.exp() + 1.0);
            let v = g.eval(x).unwrap();
            assert!(
                (v - oracle).abs() <= 1e-12 * oracle.abs(),
                "{x}: {v} vs {oracle}"
            );
        }
    }

    #[test]
    fn g_for_power_supersolution_matches_closed_form() {
        let alpha = 1.7;
        let inst = HardyInstance::new(
            Interval::open(0.2, 3.0).unwrap(),
            parse("x + 2").unwrap(),
            parse("x^1.7").unwrap(),
            Expr::zero(),
            parse("0.5").unwrap(),
            1.0,
        )
        .unwrap();
        let g = g_theorem52(&inst);
        for x in [0.3, 1.0, 2.5f64] {
            let p = x + 2.0;
            let bracket = 0.5 * alpha * alpha
                - x * alpha * (alpha * x.powf(alpha - 1.0)).abs().ln()
                + (p - 1.0) * alpha * (1.0 - alpha);
            let oracle = x.powf(2.0 * alpha - 2.0) * bracket;
            assert!((g.eval(x).unwrap() - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn constant_u_gives_zero_g() {
        let inst = HardyInstance::new(
            Interval::open(0.0, 1.0).unwrap(),
            parse("x + 2").unwrap(),
            parse("3").unwrap(),
            Expr::zero(),
            Expr::zero(),
            1.0,
        )
        .unwrap();
        assert!(g_theorem52(&inst).is_zero());
    }

    #[test]
    fn tent_measures_match_closed_forms() {
        let inst = tent_instance();
        let (mu1, mu2) = inst.measures();
        for x in [-0.7, -0.2, 0.3, 0.9f64] {
            let u = 1.0 - x.abs();
            assert!((mu1.density_at(x) - u.powf(-3.0)).abs() < 1e-12 * u.powf(-3.0));
            // p ≡ 2, σ ≡ 1, β = 2: ((p−1)/(β−σ))^{p−1} = 1 and no doubling for constant p.
            assert!((mu2.density_at(x) - u.powf(-1.0)).abs() < 1e-12 * u.powf(-1.0));
        }
    }

    #[test]
    fn weak_residual_for_tent_supersolution() {
        let inst = tent_instance();
        let o = QuadOptions::default();
        let w = TestFunction::tent(0.0, 0.5, 1.0);
        let r = weak_pdi_residual(&inst, &w, &o).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
        let w = TestFunction::tent(0.5, 0.3, 1.0);
        assert!(weak_pdi_residual(&inst, &w, &o).unwrap().value.abs() < 1e-10);
        let mut strong = inst.clone();
        strong.phi = Expr::constant(1e6);
        assert!(weak_pdi_residual(&strong, &w, &o).unwrap().value < -1e4);
    }
}
