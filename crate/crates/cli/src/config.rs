//! TOML run configuration with `HARDYLAB_SECTION_KEY` environment overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hardylab_core::instance::{
    phi_from_supersolution, preset, scenario, HardyInstance, Preset, PresetParams,
    DEFAULT_CHECK_GRID, PRESET_NAMES,
};
use hardylab_core::quadrature::QuadOptions;
use hardylab_core::report::{config_hash, ReportError};
use hardylab_core::sharpness::{FamilySpec, ScanFamily};
use hardylab_core::verify::FamilyKind;
use hardylab_core::{parse_with, Bindings, InstanceError, Interval};
use serde::{Deserialize, Deserializer, Serialize};

pub const ENV_PREFIX: &str = "HARDYLAB_";
const SECTIONS: [&str; 6] = [
    "instance",
    "quadrature",
    "check",
    "verification",
    "scan",
    "output",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("environment override {var}: {msg}")]
    Env { var: String, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

fn expr_text<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Text {
        Str(String),
        Int(i64),
        Float(f64),
    }
    Ok(Option::<Text>::deserialize(d)?.map(|t| match t {
        Text::Str(s) => s,
        Text::Int(i) => i.to_string(),
        Text::Float(f) => format!("{f:?}"),
    }))
}

/// Either a named preset (or reproduce scenario) with overrides, or raw
/// expressions. `u` marks the raw form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceSection {
    pub preset: Option<String>,
    #[serde(deserialize_with = "expr_text")]
    pub p: Option<String>,
    #[serde(deserialize_with = "expr_text")]
    pub u: Option<String>,
    /// Defaults to the Φ for which `u` solves the equation exactly.
    #[serde(deserialize_with = "expr_text")]
    pub phi: Option<String>,
    #[serde(deserialize_with = "expr_text")]
    pub sigma: Option<String>,
    pub beta: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub tol: f64,
    pub abs_tol: f64,
    pub depth: u32,
    pub max_evals: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadOptions::default();
        Self {
            tol: q.rel_tol,
            abs_tol: q.abs_tol,
            depth: q.max_depth,
            max_evals: q.max_evals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub grid: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            grid: DEFAULT_CHECK_GRID,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyFamily {
    /// Power bumps for Caccioppoli, bumps and splines for Hardy.
    #[default]
    Default,
    PowerBump,
    Spline,
    Mixed,
}

impl VerifyFamily {
    pub fn caccioppoli(self) -> FamilyKind {
        match self {
            VerifyFamily::Default | VerifyFamily::PowerBump => FamilyKind::PowerBump,
            VerifyFamily::Spline => FamilyKind::Spline,
            VerifyFamily::Mixed => FamilyKind::Mixed,
        }
    }

    pub fn hardy(self) -> FamilyKind {
        match self {
            VerifyFamily::Default | VerifyFamily::Mixed => FamilyKind::Mixed,
            VerifyFamily::PowerBump => FamilyKind::PowerBump,
            VerifyFamily::Spline => FamilyKind::Spline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationSection {
    pub family: VerifyFamily,
    pub count: usize,
    pub seed: u64,
}

impl Default for VerificationSection {
    fn default() -> Self {
        Self {
            family: VerifyFamily::Default,
            count: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub family: ScanFamily,
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Per-parameter `[lo, hi]`; the family's default box when absent.
    #[serde(rename = "box")]
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            family: ScanFamily::HardyCutoff,
            budget: 500,
            restarts: 4,
            seed: 1,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("hardylab-out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub instance: InstanceSection,
    pub quadrature: QuadratureSection,
    pub check: CheckSection,
    pub verification: VerificationSection,
    pub scan: ScanSection,
    pub output: OutputSection,
}

/// Parse an override value as a TOML literal, falling back to a bare string.
fn env_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Apply `HARDYLAB_SECTION_KEY=value` overrides. Constants are addressed as
/// `HARDYLAB_INSTANCE_CONSTANTS_<name>` with the name kept verbatim.
pub fn apply_env(
    table: &mut toml::Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<(), ConfigError> {
    for (var, raw) in vars {
        let Some(rest) = var.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let err = |msg: &str| ConfigError::Env {
            var: var.clone(),
            msg: msg.into(),
        };
        let (section, key) = rest
            .split_once('_')
            .ok_or_else(|| err("expected SECTION_KEY"))?;
        let section = section.to_ascii_lowercase();
        if !SECTIONS.contains(&section.as_str()) {
            return Err(err("unknown section"));
        }
        let entry = table
            .entry(section)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(sec) = entry else {
            return Err(err("section is not a table"));
        };
        let upper = key.to_ascii_uppercase();
        if let Some(name) = upper
            .strip_prefix("CONSTANTS_")
            .map(|_| &key["CONSTANTS_".len()..])
        {
            let consts = sec
                .entry("constants")
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(consts) = consts else {
                return Err(err("constants is not a table"));
            };
            consts.insert(name.to_string(), env_value(&raw));
        } else {
            sec.insert(key.to_ascii_lowercase(), env_value(&raw));
        }
    }
    Ok(())
}

impl Config {
    pub fn from_toml(
        text: &str,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text)?;
        apply_env(&mut table, env)?;
        let cfg: Config = toml::Value::Table(table).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read `path` (or start from defaults) and apply the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.into(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let q = &self.quadrature;
        if !(q.tol > 0.0 && q.tol < 1.0) || !(q.abs_tol > 0.0 && q.abs_tol.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "tolerances must be positive, got tol={} abs_tol={}",
                q.tol, q.abs_tol
            )));
        }
        if q.depth == 0 || q.max_evals == 0 {
            return Err(ConfigError::Invalid(
                "quadrature depth and max_evals must be positive".into(),
            ));
        }
        if self.check.grid < 2 {
            return Err(ConfigError::Invalid(
                "check grid needs at least 2 points".into(),
            ));
        }
        self.scan_spec().validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Digest of everything that affects results; output paths are excluded.
    pub fn hash(&self) -> Result<String, ReportError> {
        config_hash(&Config {
            output: OutputSection::default(),
            ..self.clone()
        })
    }

    pub fn quad_options(&self) -> QuadOptions {
        QuadOptions {
            rel_tol: self.quadrature.tol,
            abs_tol: self.quadrature.abs_tol,
            max_depth: self.quadrature.depth,
            max_evals: self.quadrature.max_evals,
            ..QuadOptions::default()
        }
    }

    pub fn scan_spec(&self) -> FamilySpec {
        let mut spec = FamilySpec::new(self.scan.family, self.scan.restarts, self.scan.seed);
        if let Some(b) = &self.scan.bounds {
            spec.bounds = b.clone();
        }
        spec
    }

    /// Replace the instance section with a reproduce scenario.
    pub fn with_scenario(mut self, name: &str) -> Result<Self, ConfigError> {
        if scenario(name).is_none() {
            return Err(ConfigError::Invalid(format!("unknown scenario {name:?}")));
        }
        self.instance = InstanceSection {
            preset: Some(name.into()),
            ..Default::default()
        };
        Ok(self)
    }

    pub fn build_instance(&self) -> Result<Preset, ConfigError> {
        let s = &self.instance;
        match (&s.preset, &s.u) {
            (Some(_), _) if s.u.is_some() || s.phi.is_some() => Err(ConfigError::Invalid(
                "instance: give either preset or raw u/phi, not both".into(),
            )),
            (Some(name), _) => {
                let (base, mut params) = match scenario(name) {
                    Some((base, params)) => (base, params),
                    None if PRESET_NAMES.contains(&name.as_str()) => {
                        (name.as_str(), PresetParams::default())
                    }
                    None => return Err(InstanceError::UnknownPreset(name.clone()).into()),
                };
                params.p = s.p.clone().or(params.p);
                params.sigma = s.sigma.clone().or(params.sigma);
                params.beta = s.beta.or(params.beta);
                params.lo = s.lo.or(params.lo);
                params.hi = s.hi.or(params.hi);
                params.constants.extend(s.constants.clone());
                Ok(preset(base, &params)?)
            }
            (None, Some(u)) => {
                let bindings: Bindings = s.constants.clone();
                let need = |v: &Option<String>, what: &str| {
                    v.clone().ok_or_else(|| {
                        ConfigError::Invalid(format!("instance: raw form needs {what}"))
                    })
                };
                let p = parse_with(&need(&s.p, "p")?, &bindings).map_err(InstanceError::from)?;
                let u = parse_with(u, &bindings).map_err(InstanceError::from)?;
                let phi = match &s.phi {
                    Some(t) => parse_with(t, &bindings).map_err(InstanceError::from)?,
                    None => phi_from_supersolution(&p, &u),
                };
                let sigma = parse_with(s.sigma.as_deref().unwrap_or("0"), &bindings)
                    .map_err(InstanceError::from)?;
                let beta = s
                    .beta
                    .ok_or_else(|| ConfigError::Invalid("instance: raw form needs beta".into()))?;
                let (lo, hi) = match (s.lo, s.hi) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => {
                        return Err(ConfigError::Invalid(
                            "instance: raw form needs lo and hi".into(),
                        ))
                    }
                };
                let domain = Interval::open(lo, hi).map_err(InstanceError::from)?;
                let mut instance = HardyInstance::new(domain, p, u, phi, sigma, beta)?;
                instance.descriptor.params = s.constants.clone();
                Ok(Preset {
                    name: "raw".into(),
                    instance,
                    condition: None,
                })
            }
            (None, None) => Err(ConfigError::Invalid(
                "instance: set preset or raw expressions (p, u, beta, lo, hi)".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn empty_config_has_documented_defaults() {
        let c = Config::from_toml("", env(&[])).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.verification.count, 50);
        assert_eq!(c.scan.budget, 500);
        assert_eq!(c.quadrature.tol, 1e-8);
    }

    #[test]
    fn infinite_bounds_and_numeric_expressions() {
        let c = Config::from_toml(
            "[instance]\npreset = \"constp\"\np = 2\nlo = 0\nhi = inf\n",
            env(&[]),
        )
        .unwrap();
        assert_eq!(c.instance.hi, Some(f64::INFINITY));
        assert_eq!(c.instance.p.as_deref(), Some("2"));
        let inst = c.build_instance().unwrap().instance;
        assert_eq!(inst.domain.hi(), f64::INFINITY);
    }

    #[test]
    fn environment_overrides_file() {
        let c = Config::from_toml(
            "[verification]\ncount = 7\n",
            env(&[
                ("HARDYLAB_VERIFICATION_COUNT", "3"),
                ("HARDYLAB_INSTANCE_PRESET", "cor53"),
                ("HARDYLAB_INSTANCE_LO", "-inf"),
                ("HARDYLAB_INSTANCE_CONSTANTS_alpha", "2.5"),
                ("HARDYLAB_QUADRATURE_TOL", "1e-9"),
                ("PATH", "/bin"),
            ]),
        )
        .unwrap();
        assert_eq!(c.verification.count, 3);
        assert_eq!(c.instance.preset.as_deref(), Some("cor53"));
        assert_eq!(c.instance.lo, Some(f64::NEG_INFINITY));
        assert_eq!(c.instance.constants["alpha"], 2.5);
        assert_eq!(c.quadrature.tol, 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(Config::from_toml("[bogus]\nx = 1\n", env(&[])).is_err());
        assert!(Config::from_toml("[quadrature]\ntol = 0\n", env(&[])).is_err());
        assert!(Config::from_toml("", env(&[("HARDYLAB_NOPE_X", "1")])).is_err());
        assert!(Config::from_toml("[scan]\nbox = [[1, 0], [0, 1], [0, 1]]\n", env(&[])).is_err());
        let both =
            Config::from_toml("[instance]\npreset = \"cor51\"\nu = \"x\"\n", env(&[])).unwrap();
        assert!(both.build_instance().is_err());
        assert!(Config::default().build_instance().is_err());
        let bad =
            Config::from_toml("[instance]\npreset = \"cor51\"\np = \"2 +\"\n", env(&[])).unwrap();
        assert!(matches!(
            bad.build_instance(),
            Err(ConfigError::Instance(_))
        ));
    }

    #[test]
    fn raw_instance_matches_preset() {
        let raw = "[instance]\np = 2\nu = \"x^0.5\"\nsigma = 0\nbeta = 1\nlo = 0\nhi = inf\n";
        let inst = Config::from_toml(raw, env(&[]))
            .unwrap()
            .build_instance()
            .unwrap()
            .instance;
        let (mu1, mu2) = inst.measures();
        assert!((mu1.density_at(2.0) - 0.25 / 4.0).abs() < 1e-12);
        assert!((mu2.density_at(2.0) - 1.0).abs() < 1e-12);
    }
}
