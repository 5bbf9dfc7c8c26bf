use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{phi_from_supersolution, HardyInstance};
use crate::error::InstanceError;
use crate::expr::{parse_with, Bindings, Expr};
use crate::interval::Interval;

pub const PRESET_NAMES: [&str; 6] = ["cor51", "cor53", "cor54", "cor55", "cor64", "constp"];

pub const SCENARIO_NAMES: [&str; 10] = [
    "cor51",
    "cor53",
    "cor54",
    "cor55-triple1",
    "cor55-triple2",
    "cor55-triple3",
    "cor64-linear",
    "cor64-inverse",
    "cor64-rational",
    "constp-hardy",
];

/// Overrides for a preset. Expressions may use the named constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    pub p: Option<String>,
    pub sigma: Option<String>,
    pub beta: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

impl PresetParams {
    fn with(p: &str, sigma: &str, beta: f64, lo: f64, hi: f64, constants: &[(&str, f64)]) -> Self {
        Self {
            p: Some(p.into()),
            sigma: Some(sigma.into()),
            beta: Some(beta),
            lo: Some(lo),
            hi: Some(hi),
            constants: constants.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// A preset instance and the closed-form sufficient condition that comes
/// with it (`condition ≥ 0` on the domain).
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub instance: HardyInstance,
    pub condition: Option<Expr>,
}

struct Resolved {
    bindings: Bindings,
    p: Expr,
    sigma: Option<Expr>,
    beta: f64,
    domain: Interval,
}

fn resolve(
    params: &PresetParams,
    defaults: &[(&str, f64)],
    p: &str,
    sigma: &str,
    beta: f64,
    lo: f64,
    hi: f64,
) -> Result<Resolved, InstanceError> {
    let mut bindings: Bindings = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    bindings.extend(params.constants.clone());
    let p = parse_with(params.p.as_deref().unwrap_or(p), &bindings)?;
    let sigma = match params.sigma.as_deref() {
        Some(s) => Some(parse_with(s, &bindings)?),
        None if sigma.is_empty() => None,
        None => Some(parse_with(sigma, &bindings)?),
    };
    let domain = Interval::open(params.lo.unwrap_or(lo), params.hi.unwrap_or(hi))?;
    Ok(Resolved {
        bindings,
        p,
        sigma,
        beta: params.beta.unwrap_or(beta),
        domain,
    })
}

fn positive(bindings: &Bindings, name: &str) -> Result<f64, InstanceError> {
    let v = bindings[name];
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(InstanceError::InvalidParams(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn on_half_line(domain: &Interval) -> Result<(), InstanceError> {
    if domain.lo() < 0.0 {
        Err(InstanceError::InvalidParams(format!(
            "domain {domain} must lie in (0, inf)"
        )))
    } else {
        Ok(())
    }
}

fn c(v: f64) -> Expr {
    Expr::constant(v)
}

/// Build a named preset. Unknown names yield [`InstanceError::UnknownPreset`].
pub fn preset(name: &str, params: &PresetParams) -> Result<Preset, InstanceError> {
    let x = Expr::x();
    let (instance, condition) = match name {
        "cor51" => {
            let r = resolve(params, &[("M", 1.0)], "2", "1", 2.0, -1.0, 1.0)?;
            let m = positive(&r.bindings, "M")?;
            let domain = Interval::open(params.lo.unwrap_or(-m), params.hi.unwrap_or(m))?;
            let u = Expr::sub(c(m), Expr::abs(x));
            let sigma = r.sigma.unwrap();
            let inst = HardyInstance::new(domain, r.p, u, Expr::zero(), sigma.clone(), r.beta)?;
            (inst, Some(sigma))
        }
        "cor53" => {
            let r = resolve(params, &[("alpha", 2.0)], "x + 3", "2", 3.0, 0.0, 1.0)?;
            on_half_line(&r.domain)?;
            let alpha = r.bindings["alpha"];
            if alpha == 0.0 || !alpha.is_finite() {
                return Err(InstanceError::InvalidParams(format!(
                    "alpha must be nonzero, got {alpha}"
                )));
            }
            let u = Expr::powf(x.clone(), alpha);
            let sigma = r.sigma.unwrap();
            let dp = r.p.differentiate();
            // σα² − p′xα log|αx^{α−1}| + (p−1)α(1−α)
            let mut g = Expr::mul(sigma.clone(), c(alpha * alpha));
            if !dp.is_zero() {
                let slope = Expr::abs(Expr::mul(c(alpha), Expr::powf(x.clone(), alpha - 1.0)));
                g = Expr::sub(
                    g,
                    Expr::mul(
                        Expr::mul(dp, Expr::mul(x.clone(), c(alpha))),
                        Expr::log(slope),
                    ),
                );
            }
            g = Expr::add(
                g,
                Expr::mul(
                    Expr::sub(r.p.clone(), Expr::one()),
                    c(alpha * (1.0 - alpha)),
                ),
            );
            let phi = phi_from_supersolution(&r.p, &u);
            (
                HardyInstance::new(r.domain, r.p, u, phi, sigma, r.beta)?,
                Some(g),
            )
        }
        "cor54" => {
            let r = resolve(
                params,
                &[("a", 1.0)],
                "1.5 + x/(x + 1)",
                "3.5",
                4.5,
                0.1,
                10.0,
            )?;
            on_half_line(&r.domain)?;
            let a = positive(&r.bindings, "a")?;
            let u = Expr::div(c(a), x.clone());
            let sigma = r.sigma.unwrap();
            let dp = r.p.differentiate();
            // σ + p′x log(a/x²) − 2p + 2
            let mut g = sigma.clone();
            if !dp.is_zero() {
                let log = Expr::log(Expr::div(c(a), Expr::powf(x.clone(), 2.0)));
                g = Expr::add(g, Expr::mul(Expr::mul(dp, x.clone()), log));
            }
            g = Expr::add(g, Expr::sub(c(2.0), Expr::mul(c(2.0), r.p.clone())));
            let phi = phi_from_supersolution(&r.p, &u);
            (
                HardyInstance::new(r.domain, r.p, u, phi, sigma, r.beta)?,
                Some(g),
            )
        }
        "cor55" => {
            let s3 = 2.0 * (-1.5f64).exp() + 1.0;
            let r = resolve(
                params,
                &[],
                "2 - exp(-x^2)",
                &format!("{s3:?}"),
                s3 + 1.0,
                0.0,
                f64::INFINITY,
            )?;
            let u = Expr::exp(x.clone());
            let sigma = r.sigma.unwrap();
            // σ − p′x − p + 1
            let g = Expr::add(
                Expr::sub(
                    Expr::sub(sigma.clone(), Expr::mul(r.p.differentiate(), x.clone())),
                    r.p.clone(),
                ),
                Expr::one(),
            );
            let phi = phi_from_supersolution(&r.p, &u);
            (
                HardyInstance::new(r.domain, r.p, u, phi, sigma, r.beta)?,
                Some(g),
            )
        }
        "cor64" => {
            let r = resolve(
                params,
                &[("a", 0.5), ("gamma", 2.0)],
                "x + gamma",
                "",
                12.0,
                0.0,
                1.0,
            )?;
            on_half_line(&r.domain)?;
            let a = positive(&r.bindings, "a")?;
            let u = Expr::div(Expr::powf(x.clone(), a), c(a));
            // σ = β − (2/a)(p − 1) unless overridden
            let pm1 = Expr::sub(r.p.clone(), Expr::one());
            let sigma = r
                .sigma
                .unwrap_or_else(|| Expr::sub(c(r.beta), Expr::mul(c(2.0 / a), pm1.clone())));
            // aβ + (1−a) x p′ log x + (a−3)(p−1)
            let mut cond = Expr::add(c(a * r.beta), Expr::mul(c(a - 3.0), pm1));
            let dp = r.p.differentiate();
            if !dp.is_zero() && a != 1.0 {
                let t = Expr::mul(
                    Expr::mul(c(1.0 - a), x.clone()),
                    Expr::mul(dp, Expr::log(x.clone())),
                );
                cond = Expr::add(cond, t);
            }
            let phi = phi_from_supersolution(&r.p, &u);
            (
                HardyInstance::new(r.domain, r.p, u, phi, sigma, r.beta)?,
                Some(cond),
            )
        }
        "constp" => {
            let r = resolve(params, &[("alpha", 0.5)], "2", "0", 1.0, 0.0, f64::INFINITY)?;
            on_half_line(&r.domain)?;
            if !r.p.differentiate().is_zero() {
                return Err(InstanceError::InvalidParams(format!(
                    "constp needs a constant exponent, got {}",
                    r.p
                )));
            }
            let alpha = r.bindings["alpha"];
            if alpha == 0.0 || !alpha.is_finite() {
                return Err(InstanceError::InvalidParams(format!(
                    "alpha must be nonzero, got {alpha}"
                )));
            }
            let u = Expr::powf(x.clone(), alpha);
            let phi = phi_from_supersolution(&r.p, &u);
            (
                HardyInstance::new(r.domain, r.p, u, phi, r.sigma.unwrap(), r.beta)?,
                None,
            )
        }
        _ => return Err(InstanceError::UnknownPreset(name.to_string())),
    };
    let mut instance = instance;
    instance.descriptor.preset = Some(name.to_string());
    let mut consts: BTreeMap<String, f64> = params.constants.clone();
    for (k, v) in default_constants(name) {
        consts.entry(k.to_string()).or_insert(v);
    }
    instance.descriptor.params = consts;
    Ok(Preset {
        name: name.to_string(),
        instance,
        condition,
    })
}

fn default_constants(name: &str) -> Vec<(&'static str, f64)> {
    match name {
        "cor51" => vec![("M", 1.0)],
        "cor53" | "constp" => vec![("alpha", if name == "constp" { 0.5 } else { 2.0 })],
        "cor54" => vec![("a", 1.0)],
        "cor64" => vec![("a", 0.5), ("gamma", 2.0)],
        _ => vec![],
    }
}

/// The named reproduction scenarios: a preset name and its parameters.
pub fn scenario(name: &str) -> Option<(&'static str, PresetParams)> {
    let inf = f64::INFINITY;
    let s3 = 2.0 * (-1.5f64).exp() + 1.0;
    Some(match name {
        "cor51" => (
            "cor51",
            PresetParams::with("2", "1", 2.0, -1.0, 1.0, &[("M", 1.0)]),
        ),
        "cor53" => (
            "cor53",
            PresetParams::with("x + 3", "2", 3.0, 0.0, 1.0, &[("alpha", 2.0)]),
        ),
        "cor54" => (
            "cor54",
            PresetParams::with("1.5 + x/(x + 1)", "3.5", 4.5, 0.1, 10.0, &[("a", 1.0)]),
        ),
        "cor55-triple1" => (
            "cor55",
            PresetParams::with("1 + d/(abs(x) + 1)", "0", 1.0, -5.0, 5.0, &[("d", 1.0)]),
        ),
        "cor55-triple2" => (
            "cor55",
            PresetParams::with("exp(x)", "(x + 1)*exp(x) - 1 + 0.1", 11.5, 0.1, 1.5, &[]),
        ),
        "cor55-triple3" => (
            "cor55",
            PresetParams::with("2 - exp(-x^2)", &format!("{s3:?}"), s3 + 1.0, 0.0, inf, &[]),
        ),
        "cor64-linear" => (
            "cor64",
            cor64("x + gamma", 12.0, 1.0, &[("a", 0.5), ("gamma", 2.0)]),
        ),
        "cor64-inverse" => (
            "cor64",
            cor64("2 - 1/(x + gamma)", 6.0, inf, &[("a", 0.5), ("gamma", 2.0)]),
        ),
        "cor64-rational" => (
            "cor64",
            cor64(
                "1 + (gamma + d1*x)/(gamma + d2*x)",
                12.0,
                inf,
                &[("a", 0.5), ("gamma", 1.0), ("d1", 2.0), ("d2", 1.0)],
            ),
        ),
        "constp-hardy" => (
            "constp",
            PresetParams::with("2", "0", 1.0, 0.0, inf, &[("alpha", 0.5)]),
        ),
        _ => return None,
    })
}

fn cor64(p: &str, beta: f64, hi: f64, constants: &[(&str, f64)]) -> PresetParams {
    let mut out = PresetParams::with(p, "", beta, 0.0, hi, constants);
    out.sigma = None;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{check_crucial_with, DEFAULT_CHECK_GRID};

    fn checked(name: &str) -> (Preset, crate::instance::AdmissibilityReport) {
        let (preset_name, params) = scenario(name).unwrap();
        let p = preset(preset_name, &params).unwrap();
        let r = check_crucial_with(&p.instance, p.condition.as_ref(), DEFAULT_CHECK_GRID);
        (p, r)
    }

    #[test]
    fn admissible_scenarios() {
        for name in SCENARIO_NAMES.iter().filter(|n| **n != "cor55-triple1") {
            let (_, r) = checked(name);
            assert!(r.admissible(), "{name}: {r:#?}");
        }
    }

    #[test]
    fn zero_sigma_with_decaying_exponent_fails_for_exponential() {
        let (p, r) = checked("cor55-triple1");
        assert!(r.crucial_pointwise.verdict.violated());
        // the closed form −d/(|x|+1)² of the preset condition
        let g = p.condition.unwrap();
        for x in [-3.0, 0.5, 4.0f64] {
            let oracle = -1.0 / (x.abs() + 1.0).powi(2);
            assert!((g.eval(x).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn lowering_sigma_below_the_bound_is_detected() {
        let bounds = [
            ("cor55-triple2", "(x + 1)*exp(x) - 1"),
            ("cor55-triple3", "exp(-x^2)*(2*x^2 - 1) + 1"),
        ];
        for (name, bound) in bounds {
            let (pn, mut params) = scenario(name).unwrap();
            params.sigma = Some(format!("{bound} - 0.05"));
            let p = preset(pn, &params).unwrap();
            let r = check_crucial_with(&p.instance, p.condition.as_ref(), DEFAULT_CHECK_GRID);
            assert!(r.crucial_pointwise.verdict.violated(), "{name}: {r:#?}");
        }
    }

    #[test]
    fn non_positive_parameters_are_rejected() {
        let params = PresetParams {
            constants: [("a".to_string(), -1.0)].into(),
            ..Default::default()
        };
        assert!(matches!(
            preset("cor54", &params),
            Err(InstanceError::InvalidParams(_))
        ));
        let params = PresetParams {
            constants: [("a".to_string(), 0.0)].into(),
            ..Default::default()
        };
        assert!(matches!(
            preset("cor64", &params),
            Err(InstanceError::InvalidParams(_))
        ));
        assert!(matches!(
            preset("nope", &PresetParams::default()),
            Err(InstanceError::UnknownPreset(_))
        ));
    }

    #[test]
    fn defaults_match_scenarios() {
        for (preset_name, scen) in [
            ("cor51", "cor51"),
            ("cor53", "cor53"),
            ("cor54", "cor54"),
            ("cor55", "cor55-triple3"),
            ("cor64", "cor64-linear"),
            ("constp", "constp-hardy"),
        ] {
            let a = preset(preset_name, &PresetParams::default())
                .unwrap()
                .instance;
            let b = preset(preset_name, &scenario(scen).unwrap().1)
                .unwrap()
                .instance;
            assert_eq!(a.descriptor, b.descriptor, "{preset_name}");
        }
    }

    #[test]
    fn sigma_for_power_family_follows_beta() {
        let p = preset("cor64", &PresetParams::default()).unwrap();
        let s = p.instance.sigma.eval(0.5).unwrap();
        assert!((s - (12.0 - 4.0 * 1.5)).abs() < 1e-12);
    }
}
