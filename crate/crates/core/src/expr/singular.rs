use serde::{Deserialize, Serialize};

use super::{Expr, Node};
use crate::interval::Interval;

pub const DEFAULT_SCAN_POINTS: usize = 4096;

/// Points where an expression (or its derivative) may fail to be smooth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SingularSet {
    /// Bracketed and bisected points, sorted.
    pub points: Vec<f64>,
    /// Near-zeros without a sign change (touching zeros); reported but unconfirmed.
    pub suspected: Vec<f64>,
}

impl SingularSet {
    pub fn all(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.points.iter().chain(&self.suspected).copied().collect();
        sort_dedup(&mut v);
        v
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.suspected.is_empty()
    }

    pub fn merge(&mut self, other: &SingularSet) {
        self.points.extend_from_slice(&other.points);
        self.suspected.extend_from_slice(&other.suspected);
        sort_dedup(&mut self.points);
        sort_dedup(&mut self.suspected);
    }
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.retain(|x| x.is_finite());
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())));
}

/// Sub-expressions whose zeros make the surrounding tree non-smooth or undefined.
fn critical_subexpressions(e: &Expr, out: &mut Vec<Expr>) {
    let mut push = |c: Expr| {
        if !c.is_constant() && !out.contains(&c) {
            out.push(c);
        }
    };
    match e.node() {
        Node::Abs(a) | Node::Sgn(a) | Node::Log(a) => push(a.clone()),
        Node::Div(_, b) => push(b.clone()),
        Node::Pow(base, exponent) => {
            let smooth_power = exponent
                .constant_value()
                .map(|c| c.fract() == 0.0 && c >= 0.0)
                .unwrap_or(false);
            if !smooth_power {
                push(base.clone());
            }
        }
        Node::Min(a, b) | Node::Max(a, b) => push(Expr::sub(a.clone(), b.clone())),
        _ => {}
    }
    for c in e.children() {
        critical_subexpressions(c, out);
    }
}

/// Locate kinks, poles and domain boundaries of `e` inside the closure of `domain`.
///
/// Every argument of `abs`, `sgn`, `log`, every denominator, every base of a
/// non-polynomial power and every `min`/`max` difference is scanned on a
/// `scan_points` grid; sign changes are bisected, exact zeros (including at
/// finite endpoints) are kept, and local near-zeros of the magnitude without
/// a sign change are reported as suspected.
pub fn singular_points(e: &Expr, domain: &Interval, scan_points: usize) -> SingularSet {
    let mut crit = Vec::new();
    critical_subexpressions(e, &mut crit);
    let mut set = SingularSet::default();
    if crit.is_empty() {
        return set;
    }
    let n = scan_points.max(8);
    let mut nodes = Vec::with_capacity(n + 2);
    if domain.lo().is_finite() {
        nodes.push(domain.lo());
    }
    nodes.extend(domain.grid(n));
    if domain.hi().is_finite() {
        nodes.push(domain.hi());
    }
    for c in &crit {
        scan_one(c, &nodes, &mut set);
    }
    sort_dedup(&mut set.points);
    sort_dedup(&mut set.suspected);
    let pts = set.points.clone();
    set.suspected
        .retain(|s| !pts.iter().any(|p| (p - s).abs() <= 1e-9 * (1.0 + s.abs())));
    set
}

fn scan_one(c: &Expr, nodes: &[f64], set: &mut SingularSet) {
    let vals: Vec<f64> = nodes.iter().map(|&x| c.eval_or_nan(x)).collect();
    let scale = vals
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..nodes.len() {
        let v = vals[i];
        if v == 0.0 {
            set.points.push(nodes[i]);
        }
        if i + 1 == nodes.len() {
            break;
        }
        let w = vals[i + 1];
        let (a, b) = (nodes[i], nodes[i + 1]);
        if v.is_finite() && w.is_finite() {
            if v * w < 0.0 {
                set.points.push(bisect(|x| c.eval_or_nan(x), a, b, v));
            }
        } else if v.is_finite() != w.is_finite() {
            // Edge of the domain of definition.
            set.points
                .push(bisect_defined(|x| c.eval_or_nan(x), a, b, v.is_finite()));
        }
    }
    // Touching zeros: local minima of |c| that come very close to zero.
    for i in 1..nodes.len().saturating_sub(1) {
        let (l, m, r) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
        if !(l.is_finite() && m.is_finite() && r.is_finite()) || m == 0.0 {
            continue;
        }
        if vals[i - 1] * vals[i] <= 0.0 || vals[i] * vals[i + 1] <= 0.0 {
            continue;
        }
        if m < l && m <= r && m <= 1e-3 * (1.0 + scale) {
            let (xm, fm) = golden_min(|x| c.eval_or_nan(x).abs(), nodes[i - 1], nodes[i + 1]);
            if fm <= 1e-9 * (1.0 + scale) {
                set.suspected.push(xm);
            }
        }
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if !fm.is_finite() {
            // Undefined inside the bracket: stop at the best estimate.
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn bisect_defined(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, left_defined: bool) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m).is_finite() == left_defined {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Golden-section minimisation on `[a, b]`; returns `(argmin, min)`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let nan_high = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut fc = nan_high(f(c));
    let mut fd = nan_high(f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = nan_high(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = nan_high(f(d));
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
