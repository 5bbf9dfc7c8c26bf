use super::{Expr, Node};

/// Exact symbolic derivative with respect to `x`.
///
/// `abs(f)' = sgn(f) f'`, `sgn' = 0`, and `min`/`max` differentiate
/// piecewise through a sign selector, which averages the branches on the
/// kink itself. Kinks are picked up by [`super::singular_points`].
pub(super) fn differentiate(e: &Expr) -> Expr {
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var => Expr::one(),
        Node::Neg(a) => Expr::neg(differentiate(a)),
        Node::Add(a, b) => Expr::add(differentiate(a), differentiate(b)),
        Node::Sub(a, b) => Expr::sub(differentiate(a), differentiate(b)),
        Node::Mul(a, b) => Expr::add(
            Expr::mul(differentiate(a), b.clone()),
            Expr::mul(a.clone(), differentiate(b)),
        ),
        Node::Div(a, b) => {
            let da = differentiate(a);
            let db = differentiate(b);
            if db.is_zero() {
                Expr::div(da, b.clone())
            } else {
                Expr::div(
                    Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                    Expr::powf(b.clone(), 2.0),
                )
            }
        }
        Node::Pow(base, exponent) => pow_rule(base, exponent),
        Node::Exp(a) => Expr::mul(e.clone(), differentiate(a)),
        Node::Log(a) => Expr::div(differentiate(a), a.clone()),
        Node::Abs(a) => Expr::mul(Expr::sgn(a.clone()), differentiate(a)),
        Node::Sgn(_) => Expr::zero(),
        Node::Min(a, b) => {
            let s = Expr::sgn(Expr::sub(a.clone(), b.clone()));
            selector(differentiate(a), differentiate(b), Expr::neg(s))
        }
        Node::Max(a, b) => {
            let s = Expr::sgn(Expr::sub(a.clone(), b.clone()));
            selector(differentiate(a), differentiate(b), s)
        }
    }
}

// (1 + s)/2 · da + (1 − s)/2 · db
fn selector(da: Expr, db: Expr, s: Expr) -> Expr {
    let wa = Expr::mul(Expr::constant(0.5), Expr::add(Expr::one(), s.clone()));
    let wb = Expr::mul(Expr::constant(0.5), Expr::sub(Expr::one(), s));
    Expr::add(Expr::mul(wa, da), Expr::mul(wb, db))
}

fn pow_rule(base: &Expr, exponent: &Expr) -> Expr {
    let dbase = differentiate(base);
    if let Some(c) = exponent.constant_value() {
        // c · base^(c−1) · base'
        return Expr::mul(
            Expr::mul(Expr::constant(c), Expr::powf(base.clone(), c - 1.0)),
            dbase,
        );
    }
    let dexp = differentiate(exponent);
    let whole = Expr::pow(base.clone(), exponent.clone());
    if base.is_constant() {
        // a^g · log(a) · g'
        return Expr::mul(Expr::mul(whole, Expr::log(base.clone())), dexp);
    }
    // f^g · (g' log f + g f'/f)
    Expr::mul(
        whole,
        Expr::add(
            Expr::mul(dexp, Expr::log(base.clone())),
            Expr::div(Expr::mul(exponent.clone(), dbase), base.clone()),
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::super::parse;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn chain_rule_for_gaussian_exponent() {
        let d = parse("2 - exp(-x^2)").unwrap().differentiate();
        for x in [-1.3f64, -0.2, 0.0, 0.7, 2.1] {
            let oracle = 2.0 * x * (-x * x).exp();
            assert!(close(d.eval(x).unwrap(), oracle), "{x}");
        }
    }

    #[test]
    fn tent_supersolution_derivative_is_minus_sign() {
        let d = parse("3 - abs(x)").unwrap().differentiate();
        for x in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            assert_eq!(d.eval(x).unwrap(), -super::super::sgn(x));
        }
    }

    #[test]
    fn constants_and_variable() {
        assert!(parse("3.5").unwrap().differentiate().is_zero());
        assert!(parse("x").unwrap().differentiate().is_one());
        assert!(parse("sgn(x - 1)").unwrap().differentiate().is_zero());
    }

    #[test]
    fn general_power_and_min_max() {
        let d = parse("x^x").unwrap().differentiate();
        let x: f64 = 1.7;
        assert!(close(d.eval(x).unwrap(), x.powf(x) * (x.ln() + 1.0)));
        let d = parse("2^(3*x)").unwrap().differentiate();
        assert!(close(
            d.eval(x).unwrap(),
            2f64.powf(3.0 * x) * 2f64.ln() * 3.0
        ));
        let d = parse("min(x^2, 1)").unwrap().differentiate();
        assert_eq!(d.eval(0.5).unwrap(), 1.0);
        assert_eq!(d.eval(2.0).unwrap(), 0.0);
        let d = parse("max(x^2, 1)").unwrap().differentiate();
        assert_eq!(d.eval(0.5).unwrap(), 0.0);
        assert_eq!(d.eval(2.0).unwrap(), 4.0);
    }
}
