//! Compactly supported nonnegative test functions with closed-form
//! derivatives.

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::interval::Interval;
use crate::measure::Pointwise;
use crate::quadrature::Split;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `c (1 − ((x−m)/r)²)₊^k`.
    PowerBump {
        center: f64,
        radius: f64,
        height: f64,
        k: f64,
    },
    /// `c (1 − |x−m|/r)₊`.
    Tent {
        center: f64,
        radius: f64,
        height: f64,
    },
    /// Monotone cubic (PCHIP) interpolant through `(knots, values)` with
    /// zero value and zero slope at both ends.
    Spline {
        knots: Vec<f64>,
        values: Vec<f64>,
        slopes: Vec<f64>,
    },
    /// A user expression restricted to `[lo, hi]`.
    Custom {
        #[serde(with = "crate::expr::as_text")]
        expr: Expr,
        #[serde(with = "crate::expr::as_text")]
        derivative: Expr,
        lo: f64,
        hi: f64,
        /// Vanishing order at the ends of the support.
        edge_exponent: f64,
    },
    /// `x^{1/2+ε}` times a cutoff rising on `[δ₀/2, δ₀]`, equal to 1 on
    /// `[δ₀, L]` and falling on `[L, 2L]`; the ramps are `(s(2−s))^k`.
    HardyCutoff {
        eps: f64,
        delta0: f64,
        l: f64,
        k: f64,
    },
}

impl TestFunction {
    pub fn power_bump(center: f64, radius: f64, height: f64, k: f64) -> Self {
        Self::PowerBump {
            center,
            radius,
            height,
            k,
        }
    }

    pub fn tent(center: f64, radius: f64, height: f64) -> Self {
        Self::Tent {
            center,
            radius,
            height,
        }
    }

    pub fn custom(expr: Expr, lo: f64, hi: f64, edge_exponent: f64) -> Self {
        let derivative = expr.differentiate();
        Self::Custom {
            expr,
            derivative,
            lo,
            hi,
            edge_exponent,
        }
    }

    pub fn hardy_cutoff(eps: f64, delta0: f64, l: f64, k: f64) -> Self {
        Self::HardyCutoff { eps, delta0, l, k }
    }

    /// PCHIP hump through the given knots. `values` must be nonnegative
    /// with zeros at both ends.
    pub fn spline(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, String> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(format!(
                "spline needs at least 3 knots and matching values, got {n}"
            ));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("spline knots must increase strictly".into());
        }
        if values[0] != 0.0
            || values[n - 1] != 0.0
            || values.iter().any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err("spline values must be nonnegative and vanish at both ends".into());
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / h[i])
            .collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Ok(Self::Spline {
            knots,
            values,
            slopes,
        })
    }

    /// Closed support.
    pub fn support(&self) -> Interval {
        let (lo, hi) = match self {
            Self::PowerBump { center, radius, .. } | Self::Tent { center, radius, .. } => {
                (center - radius, center + radius)
            }
            Self::Spline { knots, .. } => (knots[0], knots[knots.len() - 1]),
            Self::Custom { lo, hi, .. } => (*lo, *hi),
            Self::HardyCutoff { delta0, l, .. } => (0.5 * delta0, 2.0 * l),
        };
        Interval::closed(lo, hi).expect("test function support")
    }

    /// Order of vanishing at the support ends: `φ ~ dist^k`.
    pub fn edge_exponent(&self) -> f64 {
        match self {
            Self::PowerBump { k, .. } | Self::HardyCutoff { k, .. } => *k,
            Self::Tent { .. } => 1.0,
            Self::Spline { .. } => 2.0,
            Self::Custom { edge_exponent, .. } => *edge_exponent,
        }
    }

    /// Interior points where the function is not smooth.
    fn kinks(&self) -> Vec<f64> {
        match self {
            Self::PowerBump { center, .. } => vec![*center],
            Self::Tent { center, .. } => vec![*center],
            Self::Spline { knots, .. } => knots[1..knots.len() - 1].to_vec(),
            Self::Custom { .. } => Vec::new(),
            Self::HardyCutoff { delta0, l, .. } => {
                let mut v = vec![*delta0, *l];
                let (a, b) = (delta0.log10().ceil() as i32, l.log10().floor() as i32);
                v.extend(
                    (a..=b)
                        .map(|j| 10f64.powi(j))
                        .filter(|x| x > delta0 && x < l),
                );
                v
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::PowerBump {
                center,
                radius,
                height,
                k,
            } => {
                let s = (x - center) / radius;
                let w = 1.0 - s * s;
                if w <= 0.0 {
                    0.0
                } else {
                    height * w.powf(*k)
                }
            }
            Self::Tent {
                center,
                radius,
                height,
            } => {
                let w = 1.0 - ((x - center) / radius).abs();
                if w <= 0.0 {
                    0.0
                } else {
                    height * w
                }
            }
            Self::Spline {
                knots,
                values,
                slopes,
            } => hermite(knots, values, slopes, x).0,
            Self::Custom { expr, lo, hi, .. } => {
                if x <= *lo || x >= *hi {
                    0.0
                } else {
                    expr.eval_or_nan(x)
                }
            }
            Self::HardyCutoff { eps, delta0, l, k } => {
                let (r, _) = ramp(x, *delta0, *l, *k);
                if r == 0.0 {
                    0.0
                } else {
                    x.powf(0.5 + eps) * r
                }
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::PowerBump {
                center,
                radius,
                height,
                k,
            } => {
                let s = (x - center) / radius;
                let w = 1.0 - s * s;
                if w <= 0.0 {
                    0.0
                } else {
                    height * k * w.powf(k - 1.0) * (-2.0 * s / radius)
                }
            }
            Self::Tent {
                center,
                radius,
                height,
            } => {
                let s = (x - center) / radius;
                if s.abs() >= 1.0 || s == 0.0 {
                    0.0
                } else {
                    -s.signum() * height / radius
                }
            }
            Self::Spline {
                knots,
                values,
                slopes,
            } => hermite(knots, values, slopes, x).1,
            Self::Custom {
                derivative, lo, hi, ..
            } => {
                if x <= *lo || x >= *hi {
                    0.0
                } else {
                    derivative.eval_or_nan(x)
                }
            }
            Self::HardyCutoff { eps, delta0, l, k } => {
                let (r, dr) = ramp(x, *delta0, *l, *k);
                if r == 0.0 && dr == 0.0 {
                    return 0.0;
                }
                let a = 0.5 + eps;
                a * x.powf(a - 1.0) * r + x.powf(a) * dr
            }
        }
    }

    /// `|φ′|^p φ^{1−p}`, zero outside the support.
    pub fn rough_term(&self, x: f64, p: f64) -> f64 {
        if let Self::PowerBump {
            center,
            radius,
            height,
            k,
        } = self
        {
            let s = (x - center) / radius;
            let w = 1.0 - s * s;
            if w <= 0.0 || s == 0.0 {
                return 0.0;
            }
            return height * (2.0 * k * s.abs() / radius).powf(p) * w.powf(k - p);
        }
        let v = self.value(x);
        let d = self.derivative(x);
        if v <= 0.0 || d == 0.0 {
            return 0.0;
        }
        d.abs().powf(p) * v.powf(1.0 - p)
    }
}

/// `(s(2−s))^k` on `[0, 1]` and its derivative.
fn ramp_shape(s: f64, k: f64) -> (f64, f64) {
    let q = s * (2.0 - s);
    if q <= 0.0 {
        return (0.0, 0.0);
    }
    (q.powf(k), k * q.powf(k - 1.0) * (2.0 - 2.0 * s))
}

fn ramp(x: f64, delta0: f64, l: f64, k: f64) -> (f64, f64) {
    let a = 0.5 * delta0;
    if x <= a || x >= 2.0 * l {
        (0.0, 0.0)
    } else if x < delta0 {
        let (h, dh) = ramp_shape((x - a) / a, k);
        (h, dh / a)
    } else if x <= l {
        (1.0, 0.0)
    } else {
        let (h, dh) = ramp_shape((2.0 * l - x) / l, k);
        (h, -dh / l)
    }
}

fn hermite(knots: &[f64], values: &[f64], slopes: &[f64], x: f64) -> (f64, f64) {
    let n = knots.len();
    if x <= knots[0] || x >= knots[n - 1] {
        return (0.0, 0.0);
    }
    let i = knots
        .partition_point(|k| *k <= x)
        .saturating_sub(1)
        .min(n - 2);
    let h = knots[i + 1] - knots[i];
    let t = (x - knots[i]) / h;
    let (y0, y1, m0, m1) = (values[i], values[i + 1], slopes[i], slopes[i + 1]);
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1;
    let d = (6.0 * t2 - 6.0 * t) / h * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) / h * y1
        + (3.0 * t2 - 2.0 * t) * m1;
    (v.max(0.0), d)
}

impl Pointwise for TestFunction {
    fn value(&self, x: f64) -> f64 {
        TestFunction::value(self, x)
    }

    fn support(&self) -> Option<Interval> {
        Some(TestFunction::support(self))
    }

    fn breakpoints(&self, domain: &Interval) -> Vec<Split> {
        let s = TestFunction::support(self);
        let mut v: Vec<Split> = self
            .kinks()
            .into_iter()
            .filter(|x| domain.contains_interior(*x))
            .map(Split::regular)
            .collect();
        for e in [s.lo(), s.hi()] {
            if domain.contains_interior(e) {
                v.push(Split::singular(e));
            }
        }
        v
    }
}

impl TestFunction {
    /// Splits for integrating against this function inside `domain`.
    pub fn breakpoints(&self, domain: &Interval) -> Vec<Split> {
        Pointwise::breakpoints(self, domain)
    }
}
