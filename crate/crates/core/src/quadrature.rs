//! Singularity-aware adaptive quadrature on finite and infinite intervals.
//!
//! An integral is cut into panels at the requested split points. Panels
//! whose endpoints are both regular go through global adaptive
//! Gauss–Kronrod (7/15) refinement; a panel with a flagged endpoint, or
//! with an infinite end, is first probed for divergence on dyadic shells
//! and then integrated with the tanh-sinh rule. Panel results are summed in
//! panel order, so the outcome never depends on scheduling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::QuadError;
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of a Gauss–Kronrod segment.
    pub max_depth: u32,
    /// Evaluation budget per panel.
    pub max_evals: usize,
    /// Finest tanh-sinh level (step `2^-level`).
    pub de_max_level: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_depth: 40,
            max_evals: 400_000,
            de_max_level: 10,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..self
        }
    }

    fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0) || self.rel_tol.is_infinite() {
            return Err(QuadError::InvalidTolerance(self.rel_tol));
        }
        if !(self.abs_tol > 0.0) || self.abs_tol.is_infinite() {
            return Err(QuadError::InvalidTolerance(self.abs_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadStatus {
    Converged,
    MaxDepth,
    DivergentSuspected,
}

impl QuadStatus {
    fn worst(self, other: QuadStatus) -> QuadStatus {
        use QuadStatus::*;
        match (self, other) {
            (DivergentSuspected, _) | (_, DivergentSuspected) => DivergentSuspected,
            (MaxDepth, _) | (_, MaxDepth) => MaxDepth,
            _ => Converged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    /// Absolute error estimate; infinite when divergence is suspected.
    pub error_bound: f64,
    pub evaluations: usize,
    pub status: QuadStatus,
    /// Effective tolerance `max(abs_tol, rel_tol * sum |panel values|)`.
    pub tolerance: f64,
}

impl QuadratureResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            error_bound: 0.0,
            evaluations: 0,
            status: QuadStatus::Converged,
            tolerance: 0.0,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == QuadStatus::Converged
    }

    pub fn is_divergent(&self) -> bool {
        self.status == QuadStatus::DivergentSuspected
    }

    /// Sum of two independent integrals.
    pub fn combine(&self, other: &QuadratureResult) -> QuadratureResult {
        QuadratureResult {
            value: self.value + other.value,
            error_bound: self.error_bound + other.error_bound,
            evaluations: self.evaluations + other.evaluations,
            status: self.status.worst(other.status),
            tolerance: self.tolerance + other.tolerance,
        }
    }

    pub fn scaled(&self, c: f64) -> QuadratureResult {
        QuadratureResult {
            value: self.value * c,
            error_bound: self.error_bound * c.abs(),
            tolerance: self.tolerance * c.abs(),
            ..*self
        }
    }
}

/// An interior split point of the integration domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub at: f64,
    /// The integrand may be unbounded or non-smooth in a way that defeats
    /// Gauss–Kronrod next to this point.
    pub singular: bool,
}

impl Split {
    pub fn regular(at: f64) -> Self {
        Self {
            at,
            singular: false,
        }
    }

    pub fn singular(at: f64) -> Self {
        Self { at, singular: true }
    }
}

/// Singularity flags for the two ends of the domain. Infinite ends are
/// always treated as flagged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EndpointFlags {
    pub lo: bool,
    pub hi: bool,
}

impl EndpointFlags {
    pub const NONE: EndpointFlags = EndpointFlags {
        lo: false,
        hi: false,
    };
    pub const BOTH: EndpointFlags = EndpointFlags { lo: true, hi: true };
}

/// One panel with its own integrand.
pub struct Piece<'a> {
    pub lo: f64,
    pub hi: f64,
    pub lo_singular: bool,
    pub hi_singular: bool,
    pub f: &'a (dyn Fn(f64) -> f64 + Sync),
}

/// Integrate `f` over `domain`, splitting at `splits`.
///
/// Split points outside the open domain are ignored; coincident points are
/// merged (a merged point is singular if any copy is).
pub fn integrate<F>(
    f: F,
    domain: &Interval,
    splits: &[Split],
    ends: EndpointFlags,
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(f64) -> f64 + Sync,
{
    let bounds = panel_bounds(domain, splits, ends);
    let pieces: Vec<Piece> = bounds
        .iter()
        .map(|&(lo, hi, ls, hs)| Piece {
            lo,
            hi,
            lo_singular: ls,
            hi_singular: hs,
            f: &f,
        })
        .collect();
    integrate_pieces(&pieces, opts)
}

/// Panel boundaries `(lo, hi, lo_singular, hi_singular)` for a domain and split set.
pub fn panel_bounds(
    domain: &Interval,
    splits: &[Split],
    ends: EndpointFlags,
) -> Vec<(f64, f64, bool, bool)> {
    let mut pts: Vec<Split> = splits
        .iter()
        .copied()
        .filter(|s| s.at.is_finite() && domain.contains_interior(s.at))
        .collect();
    pts.sort_by(|a, b| a.at.total_cmp(&b.at));
    let mut merged: Vec<Split> = Vec::with_capacity(pts.len());
    for s in pts {
        match merged.last_mut() {
            Some(last) if (s.at - last.at).abs() <= 1e-14 * s.at.abs().max(last.at.abs()) => {
                last.singular |= s.singular;
            }
            _ => merged.push(s),
        }
    }
    // The whole line is cut at the origin so that each infinite end gets its own map.
    if !domain.lo().is_finite() && !domain.hi().is_finite() && merged.is_empty() {
        merged.push(Split::regular(0.0));
    }
    let mut out = Vec::with_capacity(merged.len() + 1);
    let mut lo = domain.lo();
    let mut lo_sing = ends.lo || lo.is_infinite();
    for s in &merged {
        out.push((lo, s.at, lo_sing, s.singular));
        lo = s.at;
        lo_sing = s.singular;
    }
    out.push((
        lo,
        domain.hi(),
        lo_sing,
        ends.hi || domain.hi().is_infinite(),
    ));
    out
}

/// Integrate a sequence of panels and sum them in order.
pub fn integrate_pieces(
    pieces: &[Piece],
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadError> {
    opts.validate()?;
    let n = pieces.len().max(1) as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evals = 0;
    let mut abs_sum = 0.0;
    let mut status = QuadStatus::Converged;
    for p in pieces {
        if !(p.lo < p.hi) || p.lo.is_nan() || p.hi.is_nan() {
            return Err(QuadError::BadPanel { lo: p.lo, hi: p.hi });
        }
        let r = integrate_panel(p, opts, opts.abs_tol / n)?;
        value += r.value;
        error += r.error_bound;
        evals += r.evaluations;
        abs_sum += r.value.abs();
        status = status.worst(r.status);
    }
    let tolerance = opts.abs_tol.max(opts.rel_tol * abs_sum);
    if status == QuadStatus::DivergentSuspected {
        error = f64::INFINITY;
    } else if error > tolerance {
        status = QuadStatus::MaxDepth;
    } else {
        status = QuadStatus::Converged;
    }
    Ok(QuadratureResult {
        value,
        error_bound: error,
        evaluations: evals,
        status,
        tolerance,
    })
}

struct PanelResult {
    value: f64,
    error_bound: f64,
    evaluations: usize,
    status: QuadStatus,
}

fn integrate_panel(
    p: &Piece,
    opts: &QuadOptions,
    abs_share: f64,
) -> Result<PanelResult, QuadError> {
    let infinite = p.lo.is_infinite() || p.hi.is_infinite();
    if !infinite && !p.lo_singular && !p.hi_singular {
        return gauss_kronrod_adaptive(p.f, p.lo, p.hi, opts, abs_share);
    }
    let map = UnitMap::new(p.lo, p.hi);
    let g = |t: f64, c: f64| -> Option<f64> {
        let (x, jac) = map.point(t, c)?;
        let v = (p.f)(x);
        Some(if v == 0.0 { 0.0 } else { v * jac })
    };
    let mut evals = 0;
    let mut tail = 0.0;
    let lo_flag = p.lo_singular || p.lo.is_infinite();
    let hi_flag = p.hi_singular || p.hi.is_infinite();
    for (flag, from_hi) in [(lo_flag, false), (hi_flag, true)] {
        if !flag {
            continue;
        }
        let probe = divergence_probe(&g, from_hi, map.resolution(from_hi), map.cutoff(from_hi));
        evals += probe.evaluations;
        tail += probe.tail;
        if probe.divergent {
            return Ok(PanelResult {
                value: probe.sign * f64::INFINITY,
                error_bound: f64::INFINITY,
                evaluations: evals,
                status: QuadStatus::DivergentSuspected,
            });
        }
    }
    let mut r = tanh_sinh(&g, opts, abs_share)?;
    r.evaluations += evals;
    r.value += tail;
    r.error_bound += tail.abs();
    Ok(r)
}

/// Affine or rational map from the unit parameter onto a panel.
///
/// Nodes are handed over as `(t, c)` with `t + c = 1`, where the smaller
/// of the two is exact, so points next to either end keep full relative
/// precision.
struct UnitMap {
    lo: f64,
    hi: f64,
}

impl UnitMap {
    fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn point(&self, t: f64, c: f64) -> Option<(f64, f64)> {
        if t <= 0.0 || c <= 0.0 {
            return None;
        }
        let (x, jac) = match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                let w = self.hi - self.lo;
                let x = if t <= c {
                    self.lo + w * t
                } else {
                    self.hi - w * c
                };
                (x, w)
            }
            // x = lo + t/c
            (true, false) => (self.lo + t / c, 1.0 / (c * c)),
            // x = hi - c/t
            (false, true) => (self.hi - c / t, 1.0 / (t * t)),
            (false, false) => unreachable!("whole-line panels are split at a finite point"),
        };
        if x > self.lo && x < self.hi && x.is_finite() && jac.is_finite() {
            Some((x, jac))
        } else {
            None
        }
    }

    /// Smallest unit offset from the given end that still maps to a distinct point.
    fn resolution(&self, from_hi: bool) -> f64 {
        let end = if from_hi { self.hi } else { self.lo };
        if end.is_infinite() {
            return 1e-36;
        }
        let w = self.hi - self.lo;
        (64.0 * f64::EPSILON * end.abs().max(f64::MIN_POSITIVE) / w).max(1e-36)
    }

    /// Unit offset below which the mapped point rounds onto the given end.
    fn cutoff(&self, from_hi: bool) -> f64 {
        let end = if from_hi { self.hi } else { self.lo };
        if end.is_infinite() {
            return 0.0;
        }
        0.5 * f64::EPSILON * end.abs() / (self.hi - self.lo)
    }
}

// Gauss–Kronrod 7/15 nodes and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7/K15 application on `[a, b]`: `(kronrod, |kronrod - gauss|)`.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { x, value: v })
        }
    };
    let fc = eval(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = eval(c - dx)? + eval(c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    opts: &QuadOptions,
    abs_share: f64,
) -> Result<PanelResult, QuadError> {
    let (v, e) = gk15(f, a, b)?;
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
        depth: 0,
    });
    let mut frozen: Vec<Segment> = Vec::new();
    let mut total_v = v;
    let mut total_e = e;
    let mut status = QuadStatus::Converged;
    loop {
        let target = 0.5 * abs_share.max(opts.rel_tol * total_v.abs());
        if total_e <= target {
            break;
        }
        let Some(seg) = heap.pop() else {
            status = QuadStatus::MaxDepth;
            break;
        };
        if evals + 30 > opts.max_evals {
            heap.push(seg);
            status = QuadStatus::MaxDepth;
            break;
        }
        let m = 0.5 * (seg.a + seg.b);
        let too_narrow =
            !(m > seg.a && m < seg.b) || (seg.b - seg.a) <= 1e-15 * seg.a.abs().max(seg.b.abs());
        if seg.depth >= opts.max_depth || too_narrow {
            frozen.push(seg);
            continue;
        }
        let (v1, e1) = gk15(f, seg.a, m)?;
        let (v2, e2) = gk15(f, m, seg.b)?;
        evals += 30;
        total_v += v1 + v2 - seg.value;
        total_e += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: m,
            value: v1,
            error: e1,
            depth: seg.depth + 1,
        });
        heap.push(Segment {
            a: m,
            b: seg.b,
            value: v2,
            error: e2,
            depth: seg.depth + 1,
        });
    }
    // Re-sum in position order for a result independent of heap history.
    let mut all: Vec<Segment> = heap.into_vec();
    all.extend(frozen);
    all.sort_by(|s, t| s.a.total_cmp(&t.a));
    let value: f64 = all.iter().map(|s| s.value).sum();
    let error: f64 = all.iter().map(|s| s.error).sum();
    Ok(PanelResult {
        value,
        error_bound: error,
        evaluations: evals,
        status,
    })
}

struct Probe {
    divergent: bool,
    sign: f64,
    /// Estimated mass between the end and the last resolvable offset.
    tail: f64,
    evaluations: usize,
}

const PROBE_MAX_SHELLS: usize = 120;
const PROBE_WINDOW: usize = 8;

/// Integrate dyadic shells `[2^-(k+1), 2^-k]` (unit offsets from one end)
/// and flag divergence when the last shells stop decaying.
///
/// For a convergent end the shells also give the power-law rate used to
/// estimate the mass below `cutoff`, the offset under which the mapped
/// point rounds onto the endpoint and the integrand can no longer be sampled.
fn divergence_probe(
    g: &dyn Fn(f64, f64) -> Option<f64>,
    from_hi: bool,
    resolution: f64,
    cutoff: f64,
) -> Probe {
    // Offset `s` from the probed end, expressed as `(t, c)`.
    let at = |s: f64| -> f64 {
        let (t, c) = if from_hi { (1.0 - s, s) } else { (s, 1.0 - s) };
        g(t, c).unwrap_or(0.0)
    };
    let mut shells: Vec<f64> = Vec::new();
    let mut evals = 0;
    for k in 1..=PROBE_MAX_SHELLS {
        let hi = 0.5f64.powi(k as i32);
        let lo = 0.5 * hi;
        if lo < resolution {
            break;
        }
        evals += 15;
        match gk15(&|s| at(s), lo, hi) {
            Ok((v, _)) => shells.push(v),
            Err(_) => {
                return Probe {
                    divergent: true,
                    sign: 1.0,
                    tail: f64::INFINITY,
                    evaluations: evals,
                };
            }
        }
    }
    let n = shells.len();
    let mut probe = Probe {
        divergent: false,
        sign: 1.0,
        tail: 0.0,
        evaluations: evals,
    };
    if n < 2 {
        return probe;
    }
    probe.sign = if shells[n - 1] < 0.0 { -1.0 } else { 1.0 };
    if n > PROBE_WINDOW {
        let tail = &shells[n - PROBE_WINDOW - 1..];
        probe.divergent = tail
            .windows(2)
            .all(|w| w[0] != 0.0 && w[1].abs() >= (1.0 - 1e-6) * w[0].abs());
        if probe.divergent {
            return probe;
        }
    }
    let (prev, last) = (shells[n - 2], shells[n - 1]);
    if last == 0.0 {
        return probe;
    }
    let r = last / prev;
    let hi = 0.5f64.powi(n as i32);
    let lo = 0.5 * hi;
    probe.tail = if r > 0.0 && r < 1.0 {
        let alpha = -r.log2();
        last * (cutoff / hi).powf(alpha) / (1.0 - (lo / hi).powf(alpha))
    } else {
        // No clean power law: charge one shell's worth.
        last.abs() * (cutoff / lo).min(1.0)
    };
    probe
}

const DE_T_MAX: f64 = 6.5;

/// Tanh-sinh on the unit parameter with level doubling.
fn tanh_sinh(
    g: &dyn Fn(f64, f64) -> Option<f64>,
    opts: &QuadOptions,
    abs_share: f64,
) -> Result<PanelResult, QuadError> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut evals = 0;
    // Node at parameter tau: weight and (t, c) with the small side exact.
    let mut node_sum = |tau: f64| -> Result<f64, QuadError> {
        let u = half_pi * tau.abs().sinh();
        let d = 2.0 / (1.0 + (2.0 * u).exp());
        if d == 0.0 {
            return Ok(0.0);
        }
        let w = 0.5 * half_pi * tau.cosh() * d * (2.0 - d);
        let small = 0.5 * d;
        let (t, c) = if tau > 0.0 {
            (1.0 - small, small)
        } else if tau < 0.0 {
            (small, 1.0 - small)
        } else {
            (0.5, 0.5)
        };
        evals += 1;
        match g(t, c) {
            None => Ok(0.0),
            Some(v) if v.is_finite() => Ok(w * v),
            Some(v) => Err(QuadError::NonFinite { x: t, value: v }),
        }
    };
    let mut sum = node_sum(0.0)?;
    let mut tau = 1.0;
    while tau <= DE_T_MAX {
        sum += node_sum(tau)? + node_sum(-tau)?;
        tau += 1.0;
    }
    let mut estimate = sum;
    let mut error = f64::INFINITY;
    let mut status = QuadStatus::MaxDepth;
    for level in 1..=opts.de_max_level {
        let h = 0.5f64.powi(level as i32);
        let mut k = 1.0;
        while k * h <= DE_T_MAX {
            let tau = k * h;
            sum += node_sum(tau)? + node_sum(-tau)?;
            k += 2.0;
        }
        let next = sum * h;
        error = (next - estimate).abs();
        estimate = next;
        let target = 0.5 * abs_share.max(opts.rel_tol * estimate.abs());
        if level >= 3 && error <= target {
            status = QuadStatus::Converged;
            break;
        }
    }
    Ok(PanelResult {
        value: estimate,
        error_bound: error,
        evaluations: evals,
        status,
    })
}
