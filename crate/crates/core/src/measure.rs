//! Weighted measures `d(x) dx` with indicator gates, and the pointwise
//! function abstraction used by every integral in the crate.

use serde::{Deserialize, Serialize};

use crate::error::QuadError;
use crate::expr::{singular_points, Expr, DEFAULT_SCAN_POINTS};
use crate::interval::Interval;
use crate::quadrature::{
    integrate_pieces, panel_bounds, EndpointFlags, Piece, QuadOptions, QuadratureResult, Split,
};

/// Something that can be sampled pointwise on the real line.
///
/// `value` returns NaN where the function is undefined; quadrature turns
/// that into an error instead of silently integrating garbage.
pub trait Pointwise: Sync {
    fn value(&self, x: f64) -> f64;

    /// Closed support, when known to be compact.
    fn support(&self) -> Option<Interval> {
        None
    }

    /// Points inside `domain` where the function is not smooth.
    fn breakpoints(&self, _domain: &Interval) -> Vec<Split> {
        Vec::new()
    }
}

impl Pointwise for Expr {
    fn value(&self, x: f64) -> f64 {
        self.eval_or_nan(x)
    }

    fn breakpoints(&self, domain: &Interval) -> Vec<Split> {
        singular_points(self, domain, DEFAULT_SCAN_POINTS)
            .all()
            .into_iter()
            .map(|at| Split {
                at,
                singular: self.eval(at).is_err(),
            })
            .collect()
    }
}

impl<F: Fn(f64) -> f64 + Sync> Pointwise for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    /// Indicator of `{predicate > 0}`.
    Positive,
    /// Indicator of `{predicate ≠ 0}`.
    Nonzero,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WhenOff {
    Zero,
    /// Switch to another density where the indicator vanishes.
    Replace(Expr),
}

/// An indicator factor such as `χ_{u>0}` or `χ_{p′≠0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub predicate: Expr,
    pub kind: GateKind,
    pub when_off: WhenOff,
}

impl Gate {
    pub fn positive(predicate: Expr) -> Self {
        Self {
            predicate,
            kind: GateKind::Positive,
            when_off: WhenOff::Zero,
        }
    }

    pub fn nonzero(predicate: Expr) -> Self {
        Self {
            predicate,
            kind: GateKind::Nonzero,
            when_off: WhenOff::Zero,
        }
    }

    fn is_on_at(&self, x: f64) -> bool {
        match self.predicate.eval(x) {
            Ok(v) => match self.kind {
                GateKind::Positive => v > 0.0,
                GateKind::Nonzero => v != 0.0,
            },
            Err(_) => false,
        }
    }

    /// State on an open panel whose ends include every zero of the
    /// predicate. A nonzero-gate is off only when the predicate vanishes
    /// identically there; isolated zeros are a null set.
    fn is_on_panel(&self, lo: f64, hi: f64) -> bool {
        let probes = panel_probes(lo, hi);
        match self.kind {
            GateKind::Positive => {
                let mid = probes[probes.len() / 2];
                self.is_on_at(mid)
            }
            GateKind::Nonzero => probes.iter().any(|&x| self.is_on_at(x)),
        }
    }
}

fn panel_probes(lo: f64, hi: f64) -> [f64; 5] {
    let pick = |t: f64| -> f64 {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => lo + t * (hi - lo),
            (true, false) => lo + t / (1.0 - t),
            (false, true) => hi - (1.0 - t) / t,
            (false, false) => (2.0 * t - 1.0) / (1.0 - (2.0 * t - 1.0).powi(2)),
        }
    };
    [0.13, 0.31, 0.5, 0.67, 0.89].map(pick)
}

/// A measure `density(x) dx` on `domain`, with indicator gates.
#[derive(Debug, Clone)]
pub struct WeightedMeasure {
    pub density: Expr,
    pub gates: Vec<Gate>,
    pub domain: Interval,
    /// Zero sets of gate predicates and singular points of the density.
    pub splits: Vec<Split>,
    /// Which construction produced the measure.
    pub provenance: String,
}

impl WeightedMeasure {
    pub fn new(
        density: Expr,
        gates: Vec<Gate>,
        domain: Interval,
        provenance: impl Into<String>,
    ) -> Self {
        let mut pts: Vec<f64> = singular_points(&density, &domain, DEFAULT_SCAN_POINTS).all();
        for g in &gates {
            pts.extend(singular_points(&g.predicate, &domain, DEFAULT_SCAN_POINTS).all());
            pts.extend(zero_set(&g.predicate, &domain));
            if let WhenOff::Replace(e) = &g.when_off {
                pts.extend(singular_points(e, &domain, DEFAULT_SCAN_POINTS).all());
            }
        }
        crate::expr::sort_dedup_points(&mut pts);
        let splits = pts
            .into_iter()
            .filter(|x| domain.contains_interior(*x))
            .map(|at| Split {
                at,
                singular: density.eval(at).is_err(),
            })
            .collect();
        Self {
            density,
            gates,
            domain,
            splits,
            provenance: provenance.into(),
        }
    }

    pub fn lebesgue(domain: Interval) -> Self {
        Self {
            density: Expr::one(),
            gates: Vec::new(),
            domain,
            splits: Vec::new(),
            provenance: "lebesgue".into(),
        }
    }

    /// Density with the gates applied pointwise.
    pub fn density_at(&self, x: f64) -> f64 {
        let mut d = &self.density;
        for g in &self.gates {
            if !g.is_on_at(x) {
                match &g.when_off {
                    WhenOff::Zero => return 0.0,
                    WhenOff::Replace(e) => d = e,
                }
            }
        }
        d.eval_or_nan(x)
    }

    /// The density in force on the open panel `(lo, hi)`, or `None` when a
    /// gate switches the measure off there.
    pub fn density_on_panel(&self, lo: f64, hi: f64) -> Option<&Expr> {
        let mut d = &self.density;
        for g in &self.gates {
            if !g.is_on_panel(lo, hi) {
                match &g.when_off {
                    WhenOff::Zero => return None,
                    WhenOff::Replace(e) => d = e,
                }
            }
        }
        Some(d)
    }

    /// A copy with the density multiplied by a constant.
    pub fn scaled(&self, c: f64, provenance: impl Into<String>) -> Self {
        let scale = |e: &Expr| Expr::mul(Expr::constant(c), e.clone());
        Self {
            density: scale(&self.density),
            gates: self
                .gates
                .iter()
                .map(|g| Gate {
                    when_off: match &g.when_off {
                        WhenOff::Zero => WhenOff::Zero,
                        WhenOff::Replace(e) => WhenOff::Replace(scale(e)),
                    },
                    ..g.clone()
                })
                .collect(),
            domain: self.domain,
            splits: self.splits.clone(),
            provenance: provenance.into(),
        }
    }
}

/// Zeros and sign changes of `e` on `domain` (endpoints included when finite).
pub fn zero_set(e: &Expr, domain: &Interval) -> Vec<f64> {
    let mut grid = domain.finite_endpoints();
    grid.extend(domain.grid(DEFAULT_SCAN_POINTS));
    grid.sort_by(|a, b| a.total_cmp(b));
    let vals: Vec<f64> = grid.iter().map(|&x| e.eval_or_nan(x)).collect();
    let mut out = Vec::new();
    for i in 0..grid.len() {
        if vals[i] == 0.0 {
            out.push(grid[i]);
        }
        if i + 1 < grid.len()
            && vals[i].is_finite()
            && vals[i + 1].is_finite()
            && vals[i] * vals[i + 1] < 0.0
        {
            let (mut a, mut b) = (grid[i], grid[i + 1]);
            let sa = vals[i].signum();
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let v = e.eval_or_nan(m);
                if v == 0.0 || !v.is_finite() {
                    a = m;
                    b = m;
                    break;
                }
                if v.signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out
}

/// `∫ f dμ` over `region ∩ μ.domain`.
///
/// `splits` are merged with the measure's own; a region end is flagged
/// singular when `splits` flags it or the density fails to evaluate there.
/// `f` is evaluated first and the density only where `f ≠ 0`, so a weight
/// that blows up where the test function vanishes does no harm.
pub fn integrate_against(
    f: &(dyn Fn(f64) -> f64 + Sync),
    region: Option<Interval>,
    splits: &[Split],
    mu: &WeightedMeasure,
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadError> {
    let dom = match region {
        Some(r) => match r.intersect(&mu.domain) {
            Some(d) => d,
            None => return Ok(QuadratureResult::zero()),
        },
        None => mu.domain,
    };
    let flagged_at = |x: f64| -> bool {
        splits.iter().any(|s| s.singular && s.at == x) || mu.density.eval(x).is_err()
    };
    let ends = EndpointFlags {
        lo: flagged_at(dom.lo()),
        hi: flagged_at(dom.hi()),
    };
    let mut all: Vec<Split> = splits.to_vec();
    all.extend_from_slice(&mu.splits);
    let bounds = panel_bounds(&dom, &all, ends);
    let mut integrands: Vec<Box<dyn Fn(f64) -> f64 + Sync + '_>> = Vec::with_capacity(bounds.len());
    let mut kept = Vec::with_capacity(bounds.len());
    for &(lo, hi, ls, hs) in &bounds {
        if let Some(d) = mu.density_on_panel(lo, hi) {
            let d = d.clone();
            integrands.push(Box::new(move |x: f64| {
                let a = f(x);
                if a == 0.0 {
                    0.0
                } else {
                    a * d.eval_or_nan(x)
                }
            }));
            kept.push((lo, hi, ls, hs));
        }
    }
    if kept.is_empty() {
        return Ok(QuadratureResult::zero());
    }
    let pieces: Vec<Piece> = kept
        .iter()
        .zip(&integrands)
        .map(|(&(lo, hi, ls, hs), g)| Piece {
            lo,
            hi,
            lo_singular: ls,
            hi_singular: hs,
            f: g.as_ref(),
        })
        .collect();
    integrate_pieces(&pieces, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn gates_switch_per_panel() {
        let dom = Interval::open(-1.0, 1.0).unwrap();
        let mu = WeightedMeasure::new(
            Expr::one(),
            vec![Gate::positive(parse("x").unwrap())],
            dom,
            "test",
        );
        assert_eq!(mu.splits.len(), 1);
        assert!(mu.density_on_panel(-1.0, 0.0).is_none());
        assert!(mu.density_on_panel(0.0, 1.0).is_some());
        assert_eq!(mu.density_at(-0.5), 0.0);
        assert_eq!(mu.density_at(0.5), 1.0);
    }

    #[test]
    fn nonzero_gate_ignores_isolated_zeros_but_not_flat_zeros() {
        let dom = Interval::open(-1.0, 1.0).unwrap();
        let g = Gate {
            predicate: parse("x").unwrap(),
            kind: GateKind::Nonzero,
            when_off: WhenOff::Replace(Expr::constant(7.0)),
        };
        let mu = WeightedMeasure::new(Expr::constant(2.0), vec![g], dom, "test");
        assert_eq!(mu.density_on_panel(-1.0, 1.0), Some(&Expr::constant(2.0)));
        let flat = Gate {
            predicate: Expr::zero(),
            kind: GateKind::Nonzero,
            when_off: WhenOff::Replace(Expr::constant(7.0)),
        };
        let mu = WeightedMeasure::new(Expr::constant(2.0), vec![flat], dom, "test");
        assert_eq!(mu.density_on_panel(-1.0, 1.0), Some(&Expr::constant(7.0)));
        assert_eq!(mu.density_at(0.3), 7.0);
    }

    #[test]
    fn zero_set_brackets_roots_and_endpoints() {
        let z = zero_set(
            &parse("x*(1-x)").unwrap(),
            &Interval::open(0.0, 1.0).unwrap(),
        );
        assert_eq!(z, vec![0.0, 1.0]);
        let z = zero_set(
            &parse("x^2 - 2").unwrap(),
            &Interval::open(0.0, 3.0).unwrap(),
        );
        assert_eq!(z.len(), 1);
        assert!((z[0] - 2f64.sqrt()).abs() < 1e-14);
    }
}
