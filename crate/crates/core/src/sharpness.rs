//! Sharpness scans: minimise `RHS/LHS` of the Hardy inequality over a
//! parameterised test-function family with a bounded downhill simplex.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::VerifyError;
use crate::instance::HardyInstance;
use crate::quadrature::QuadOptions;
use crate::testfn::TestFunction;
use crate::verify::Verifier;

/// `(rhs_main + rhs_log) / lhs` together with the integrals behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub ratio: f64,
    pub lhs: f64,
    pub rhs_main: f64,
    pub rhs_log: f64,
    /// Sum of the three relative error bounds.
    pub relative_error: f64,
}

pub fn ratio_with(
    v: &Verifier,
    xi: &TestFunction,
    opts: &QuadOptions,
) -> Result<Ratio, VerifyError> {
    let (lhs, main, log) = v.hardy_integrals(xi, opts)?;
    if lhs.value <= lhs.error_bound {
        return Err(VerifyError::Vacuous {
            lhs: lhs.value,
            err: lhs.error_bound,
        });
    }
    let rhs = main.value + log.value;
    let rel = |e: f64, v: f64| if v == 0.0 { 0.0 } else { e / v.abs() };
    Ok(Ratio {
        ratio: rhs / lhs.value,
        lhs: lhs.value,
        rhs_main: main.value,
        rhs_log: log.value,
        relative_error: rel(lhs.error_bound, lhs.value)
            + rel(main.error_bound, rhs)
            + rel(log.error_bound, rhs),
    })
}

/// `RHS/LHS` for one test function.
pub fn ratio(
    inst: &HardyInstance,
    xi: &TestFunction,
    opts: &QuadOptions,
) -> Result<f64, VerifyError> {
    Ok(ratio_with(&Verifier::new(inst), xi, opts)?.ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanFamily {
    /// Parameters `eps`, `log10_delta0`, `log10_l`.
    HardyCutoff,
    /// Parameters `center`, `radius`, `height`.
    PowerBump,
}

impl ScanFamily {
    pub fn param_names(self) -> [&'static str; 3] {
        match self {
            ScanFamily::HardyCutoff => ["eps", "log10_delta0", "log10_l"],
            ScanFamily::PowerBump => ["center", "radius", "height"],
        }
    }

    /// Default search box.
    pub fn default_box(self) -> Vec<(f64, f64)> {
        match self {
            ScanFamily::HardyCutoff => vec![(0.0, 0.25), (-40.0, -1.0), (1.0, 40.0)],
            ScanFamily::PowerBump => vec![(0.4, 0.6), (0.1, 0.3), (1.0, 1.0)],
        }
    }

    pub fn build(self, params: &[f64], edge_exponent: f64) -> TestFunction {
        match self {
            ScanFamily::HardyCutoff => TestFunction::hardy_cutoff(
                params[0],
                10f64.powf(params[1]),
                10f64.powf(params[2]),
                edge_exponent,
            ),
            ScanFamily::PowerBump => {
                TestFunction::power_bump(params[0], params[1], params[2], edge_exponent)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: ScanFamily,
    /// Per-parameter `(lo, hi)`; `lo == hi` pins a parameter.
    pub bounds: Vec<(f64, f64)>,
    pub restarts: usize,
    pub seed: u64,
}

impl FamilySpec {
    pub fn new(family: ScanFamily, restarts: usize, seed: u64) -> Self {
        Self {
            family,
            bounds: family.default_box(),
            restarts,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.bounds.len() != 3 {
            return Err(format!(
                "{:?} takes 3 parameters, got {}",
                self.family,
                self.bounds.len()
            ));
        }
        if let Some((lo, hi)) = self
            .bounds
            .iter()
            .find(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(format!("empty or non-finite parameter range [{lo}, {hi}]"));
        }
        if self.restarts == 0 {
            return Err("at least one restart is required".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub restart: usize,
    pub evaluation: usize,
    pub params: Vec<f64>,
    /// `inf` when the point could not be evaluated.
    pub ratio: f64,
    /// Running minimum over the merged trace.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub family: ScanFamily,
    pub param_names: Vec<String>,
    pub best_ratio: f64,
    pub best_params: BTreeMap<String, f64>,
    /// Relative quadrature error of the best evaluation.
    pub best_relative_error: f64,
    /// Every restart met the simplex convergence test within its budget.
    pub converged: bool,
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
}

struct Restart {
    rows: Vec<(Vec<f64>, f64, f64)>,
    converged: bool,
}

const F_TOL: f64 = 1e-12;
const X_TOL: f64 = 1e-10;
const INITIAL_STEP: f64 = 0.25;

/// Bounded Nelder–Mead on the unit cube of the free parameters.
fn nelder_mead(f: &mut dyn FnMut(&[f64]) -> f64, start: Vec<f64>, budget: usize) -> bool {
    let n = start.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> Option<f64> {
        if *evals >= budget {
            return None;
        }
        *evals += 1;
        let v = f(x);
        Some(if v.is_nan() { f64::INFINITY } else { v })
    };
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let Some(f0) = eval(&start, &mut evals) else {
        return false;
    };
    simplex.push((start.clone(), f0));
    if n == 0 {
        return true;
    }
    for i in 0..n {
        let mut x = start.clone();
        x[i] = if x[i] + INITIAL_STEP <= 1.0 {
            x[i] + INITIAL_STEP
        } else {
            x[i] - INITIAL_STEP
        };
        let Some(fx) = eval(&x, &mut evals) else {
            return false;
        };
        simplex.push((x, fx));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[n].1);
        let spread = if fb.is_finite() && fw.is_finite() {
            fw - fb
        } else {
            f64::INFINITY
        };
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= F_TOL * (1.0 + fb.abs()) || diameter <= X_TOL {
            return true;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let xr = toward(1.0);
        let Some(fr) = eval(&xr, &mut evals) else {
            return false;
        };
        if fr < simplex[0].1 {
            let xe = toward(2.0);
            let Some(fe) = eval(&xe, &mut evals) else {
                return false;
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, outside) = if fr < fw {
                (toward(0.5), true)
            } else {
                (toward(-0.5), false)
            };
            let Some(fc) = eval(&xc, &mut evals) else {
                return false;
            };
            if (outside && fc <= fr) || (!outside && fc < fw) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    *x = best
                        .iter()
                        .zip(x.iter())
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    let Some(v) = eval(x, &mut evals) else {
                        return false;
                    };
                    *fx = v;
                }
            }
        }
    }
}

/// Multi-start bounded downhill simplex over `spec`, spending at most
/// `budget` ratio evaluations in total.
pub fn scan(
    inst: &HardyInstance,
    spec: &FamilySpec,
    budget: usize,
    opts: &QuadOptions,
) -> Result<ScanResult, String> {
    spec.validate()?;
    let verifier = Verifier::new(inst);
    let k = inst.vp.p_plus.ceil().max(2.0);
    let free: Vec<usize> = (0..spec.bounds.len())
        .filter(|&i| spec.bounds[i].0 < spec.bounds[i].1)
        .collect();
    let to_params = |u: &[f64]| -> Vec<f64> {
        let mut p: Vec<f64> = spec.bounds.iter().map(|b| b.0).collect();
        for (j, &i) in free.iter().enumerate() {
            let (lo, hi) = spec.bounds[i];
            p[i] = lo + (hi - lo) * u[j];
        }
        p
    };
    let restarts = spec.restarts.min(budget.max(1));
    let runs: Vec<Restart> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let share = budget / restarts + usize::from(r < budget % restarts);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(r as u64));
            let start: Vec<f64> = if r == 0 {
                vec![0.5; free.len()]
            } else {
                (0..free.len()).map(|_| rng.gen_range(0.0..=1.0)).collect()
            };
            let mut rows = Vec::new();
            let mut objective = |u: &[f64]| -> f64 {
                let params = to_params(u);
                let xi = spec.family.build(&params, k);
                let (v, e) = match ratio_with(&verifier, &xi, opts) {
                    Ok(q) => (q.ratio, q.relative_error),
                    Err(_) => (f64::INFINITY, f64::INFINITY),
                };
                rows.push((params, v, e));
                v
            };
            let converged = nelder_mead(&mut objective, start, share);
            Restart { rows, converged }
        })
        .collect();
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut running = f64::INFINITY;
    for (r, run) in runs.iter().enumerate() {
        for (i, (params, v, e)) in run.rows.iter().enumerate() {
            if *v < running {
                running = *v;
                best = Some((*v, params.clone(), *e));
            }
            trace.push(TraceRow {
                restart: r,
                evaluation: i,
                params: params.clone(),
                ratio: *v,
                best_so_far: running,
            });
        }
    }
    let names = spec.family.param_names();
    let (best_ratio, best_params, best_relative_error) = match best {
        Some((v, p, e)) => (v, names.iter().map(|n| n.to_string()).zip(p).collect(), e),
        None => (f64::INFINITY, BTreeMap::new(), f64::INFINITY),
    };
    Ok(ScanResult {
        family: spec.family,
        param_names: names.iter().map(|n| n.to_string()).collect(),
        best_ratio,
        best_params,
        best_relative_error,
        converged: runs.iter().all(|r| r.converged),
        evaluations: trace.len(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{preset, PresetParams};

    fn constp() -> HardyInstance {
        preset("constp", &PresetParams::default()).unwrap().instance
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] - 0.8).powi(2);
        let mut best = f64::INFINITY;
        let mut g = |x: &[f64]| {
            let v = f(x);
            best = best.min(v);
            v
        };
        assert!(nelder_mead(&mut g, vec![0.5, 0.5], 1000));
        assert!(best < 1e-10);
    }

    #[test]
    fn nelder_mead_respects_box() {
        let mut seen = Vec::new();
        let mut g = |x: &[f64]| {
            seen.push(x.to_vec());
            -x[0] - x[1]
        };
        nelder_mead(&mut g, vec![0.5, 0.5], 200);
        assert!(seen.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn ratio_is_scale_invariant_for_constant_exponent() {
        let inst = constp();
        let o = QuadOptions::default();
        let a = ratio(&inst, &TestFunction::power_bump(1.0, 0.5, 1.0, 3.0), &o).unwrap();
        let b = ratio(&inst, &TestFunction::power_bump(1.0, 0.5, 2.0, 3.0), &o).unwrap();
        assert!(a >= 1.0);
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn zero_weight_is_vacuous() {
        // σ = −1 with α = 1/2 makes Φu + σ|u′|^p vanish identically.
        let params = PresetParams {
            sigma: Some("-1".into()),
            ..Default::default()
        };
        let inst = preset("constp", &params).unwrap().instance;
        let e = ratio(
            &inst,
            &TestFunction::power_bump(1.0, 0.5, 1.0, 3.0),
            &QuadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, VerifyError::Vacuous { .. }), "{e:?}");
    }

    #[test]
    fn budget_one_gives_one_row_and_scans_are_deterministic() {
        let inst = constp();
        let spec = FamilySpec::new(ScanFamily::HardyCutoff, 2, 5);
        let o = QuadOptions::default();
        let one = scan(&inst, &spec, 1, &o).unwrap();
        assert_eq!(one.trace.len(), 1);
        let a = scan(&inst, &spec, 30, &o).unwrap();
        let b = scan(&inst, &spec, 30, &o).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.len() <= 30);
        assert!(a
            .trace
            .windows(2)
            .all(|w| w[1].best_so_far <= w[0].best_so_far));
    }

    #[test]
    fn flat_family_stops_at_start() {
        let inst = constp();
        let spec = FamilySpec {
            family: ScanFamily::PowerBump,
            bounds: vec![(1.0, 1.0), (0.5, 0.5), (0.5, 3.0)],
            restarts: 1,
            seed: 1,
        };
        let r = scan(&inst, &spec, 100, &QuadOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.trace.len(), 2);
    }
}
