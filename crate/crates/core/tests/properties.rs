//! Property tests for the exact calculus: ring laws, calculus identities,
//! and quadrature agreement on random inputs.

use proptest::prelude::*;

use torsion_core::radial::RadialExpr;
use torsion_core::rational::{rat, Rat};
use torsion_core::FourierField;

mod quadrature;

fn small_rat() -> impl Strategy<Value = Rat> {
    (-40i64..=40, 1i64..=12).prop_map(|(n, d)| rat(n, d))
}

fn radial_expr() -> impl Strategy<Value = RadialExpr> {
    prop::collection::vec((small_rat(), -3i64..=6, 0u32..=3), 0..5).prop_map(|terms| {
        let mut e = RadialExpr::zero();
        for (c, m, p) in terms {
            e = e.add(&RadialExpr::monomial(c, m, p));
        }
        e
    })
}

/// Nonnegative powers only: integrable against every weight s^{1+n}.
fn integrable_expr() -> impl Strategy<Value = RadialExpr> {
    prop::collection::vec((small_rat(), 0i64..=6, 0u32..=3), 1..6).prop_map(|terms| {
        let mut e = RadialExpr::zero();
        for (c, m, p) in terms {
            e = e.add(&RadialExpr::monomial(c, m, p));
        }
        e
    })
}

fn fourier_field() -> impl Strategy<Value = FourierField> {
    prop::collection::vec((0u32..=6, prop::bool::ANY, radial_expr()), 0..4).prop_map(|modes| {
        let mut f = FourierField::zero();
        for (n, is_sin, e) in modes {
            f = if is_sin && n >= 1 {
                f.add(&FourierField::sin_mode(n, e))
            } else {
                f.add(&FourierField::cos_mode(n, e))
            };
        }
        f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radial_ring_laws(f in radial_expr(), g in radial_expr(), h in radial_expr()) {
        prop_assert_eq!(f.add(&g), g.add(&f));
        prop_assert_eq!(f.mul(&g), g.mul(&f));
        prop_assert_eq!(f.add(&g).add(&h), f.add(&g.add(&h)));
        prop_assert_eq!(f.mul(&g).mul(&h), f.mul(&g.mul(&h)));
        prop_assert_eq!(f.mul(&g.add(&h)), f.mul(&g).add(&f.mul(&h)));
    }

    #[test]
    fn radial_product_rule(f in radial_expr(), g in radial_expr()) {
        let lhs = f.mul(&g).ddr();
        let rhs = f.ddr().mul(&g).add(&f.mul(&g.ddr()));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn ddr_matches_finite_difference(f in radial_expr(), r01 in 0.0f64..1.0) {
        let r = 0.1 + 1.9 * r01;
        let h = 1e-5 * r;
        let df = f.ddr().eval(r).unwrap();
        let fd = (f.eval(r + h).unwrap() - f.eval(r - h).unwrap()) / (2.0 * h);
        let scale = df.abs().max(fd.abs()).max(1.0);
        prop_assert!((df - fd).abs() / scale < 1e-6, "df={df} fd={fd} at r={r}");
    }

    #[test]
    fn cauchy_euler_residual_is_zero(f in integrable_expr(), n in 1u32..=10, c in small_rat()) {
        let a = f.op_i_plus(n, &c).add(&f.op_i_minus(n).unwrap());
        prop_assert!(a.cauchy_euler_residual(n, &f).is_zero());
    }

    #[test]
    fn zero_mode_solution_solves_equation(f in integrable_expr()) {
        // (op_I_avg f)'' + (op_I_avg f)'/r = f exactly
        let a = f.op_i_avg().unwrap();
        prop_assert!(a.cauchy_euler_residual(0, &f).is_zero());
    }

    #[test]
    fn weighted_integral_matches_adaptive_quadrature(f in integrable_expr(), n in 0u32..=8) {
        let exact = torsion_core::rational::rat_to_f64(&f.int01_weighted(n).unwrap());
        let weighted = f.shift(1 + n as i64);
        let quad = quadrature::adaptive_simpson(
            &|s| if s == 0.0 { 0.0 } else { weighted.eval(s).unwrap() },
            0.0, 1.0, 1e-14, 60,
        );
        let tol = 1e-12 * exact.abs().max(1e-3);
        prop_assert!((exact - quad).abs() <= tol, "exact={exact} quad={quad}");
    }

    #[test]
    fn field_product_pointwise(f in fourier_field(), g in fourier_field(), r01 in 0.05f64..1.0, t in 0.0f64..std::f64::consts::TAU) {
        let r = r01;
        let prod = f.product(&g);
        let lhs = prod.eval(r, t).unwrap();
        let rhs = f.eval(r, t).unwrap() * g.eval(r, t).unwrap();
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() / scale < 1e-10, "lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn field_product_commutes_and_distributes(f in fourier_field(), g in fourier_field(), h in fourier_field()) {
        prop_assert_eq!(f.product(&g), g.product(&f));
        prop_assert_eq!(f.product(&g.add(&h)), f.product(&g).add(&f.product(&h)));
    }

    #[test]
    fn dtheta_ddr_commute(f in fourier_field()) {
        prop_assert_eq!(f.dtheta().ddr(), f.ddr().dtheta());
    }

    #[test]
    fn cubic_exponential_envelope_bound(
        c in prop::array::uniform4(0.0f64..50.0),
        rho in 0.05f64..1.0,
    ) {
        // e^{alpha x} (c0 + c1 x + c2 x^2 + c3 x^3) <= [3/(e alpha)]^3 (sum c_j) e^{2 alpha x}
        let alpha = 4.0 / (std::f64::consts::E * rho);
        let cap = (3.0 / (std::f64::consts::E * alpha)).powi(3) * c.iter().sum::<f64>();
        for x in 1..=50 {
            let x = x as f64;
            let f = (alpha * x).exp() * (c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x);
            prop_assert!(f <= cap * (2.0 * alpha * x).exp() * (1.0 + 1e-12), "x = {x}");
        }
    }
}
