use hardylab_core::expr::{singular_points, Expr, Node};
use hardylab_core::{parse, Interval};
use proptest::prelude::*;

const FD_STEP: f64 = 1e-6;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        3 => Just(Expr::x()),
        2 => (-3.0f64..3.0).prop_map(|c| Expr::constant((c * 8.0).round() / 8.0)),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 2, |inner| {
        let un = |n: fn(Expr) -> Node| move |a: Expr| Expr::from_node(n(a));
        let bin = |n: fn(Expr, Expr) -> Node| move |(a, b): (Expr, Expr)| Expr::from_node(n(a, b));
        prop_oneof![
            inner.clone().prop_map(un(Node::Neg)),
            inner.clone().prop_map(un(Node::Exp)),
            inner.clone().prop_map(un(Node::Log)),
            inner.clone().prop_map(un(Node::Abs)),
            inner.clone().prop_map(un(Node::Sgn)),
            (inner.clone(), inner.clone()).prop_map(bin(Node::Add)),
            (inner.clone(), inner.clone()).prop_map(bin(Node::Sub)),
            (inner.clone(), inner.clone()).prop_map(bin(Node::Mul)),
            (inner.clone(), inner.clone()).prop_map(bin(Node::Div)),
            (inner.clone(), inner.clone()).prop_map(bin(Node::Min)),
            (inner.clone(), inner.clone()).prop_map(bin(Node::Max)),
            (inner.clone(), 0u8..4).prop_map(|(a, k)| Expr::from_node(Node::Pow(
                a,
                Expr::constant([2.0, 3.0, 0.5, -1.5][k as usize])
            ))),
            (inner.clone(), inner).prop_map(bin(Node::Pow)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn derivative_matches_central_difference(e in tree(), x in -2.0f64..2.0) {
        prop_assume!(e.depth() <= 5);
        let d = e.differentiate();
        let (Ok(fp), Ok(fm), Ok(dx)) = (e.eval(x + FD_STEP), e.eval(x - FD_STEP), d.eval(x)) else {
            return Ok(());
        };
        prop_assume!(fp.abs().max(fm.abs()) < 1e4);
        let window = Interval::open(x - 0.5, x + 0.5).unwrap();
        let sing = singular_points(&e, &window, 4096).all();
        prop_assume!(sing.iter().all(|s| (s - x).abs() > 1e-3));
        let fd = (fp - fm) / (2.0 * FD_STEP);
        prop_assert!(
            (dx - fd).abs() <= 1e-4 * (1.0 + dx.abs()),
            "e = {e}, x = {x}, symbolic {dx}, finite difference {fd}"
        );
    }

    #[test]
    fn print_parse_round_trip_is_bit_identical(e in tree()) {
        let again = parse(&e.to_string()).unwrap();
        for i in 0..64 {
            let x = -2.0 + 4.0 * (i as f64 + 0.5) / 64.0;
            match (e.eval(x), again.eval(x)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits(), "{} at {}", e, x),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{e} at {x}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn polynomials_have_no_singular_points(coeffs in prop::collection::vec(-5.0f64..5.0, 1..7)) {
        let mut p = Expr::zero();
        for (k, c) in coeffs.iter().enumerate() {
            p = p + *c * Expr::powf(Expr::x(), k as f64);
        }
        let s = singular_points(&p, &Interval::open(-10.0, 10.0).unwrap(), 4096);
        prop_assert!(s.is_empty(), "{p}: {s:?}");
    }
}
