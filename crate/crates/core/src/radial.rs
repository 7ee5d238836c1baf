//! Exact calculus on log-polynomial radial expressions.
//!
//! A [`RadialExpr`] is a finite sum of terms `c * r^m * (log r)^p` with
//! rational `c`, integer `m` and `p >= 0`. The ring is closed under the
//! derivative and under the three integral operators the Cauchy-Euler
//! solutions need:
//!
//! - [`RadialExpr::int01_weighted`]: `∫_0^1 f(s) s^{1+n} ds` (exact rational),
//! - [`RadialExpr::op_i_avg`]: `-∫_r^1 s^{-1} (∫_0^s s' f(s') ds') ds`,
//! - [`RadialExpr::op_i_plus`]: `r^n (C - 1/(2n) ∫_r^1 f(s) s^{1-n} ds)`,
//! - [`RadialExpr::op_i_minus`]: `-r^{-n}/(2n) ∫_0^r f(s) s^{1+n} ds`.
//!
//! The only integral table required is `∫ s^a log^p s ds`: for `a = -1` the
//! antiderivative is `log^{p+1}(s)/(p+1)`, otherwise the finite recurrence
//! `J(a,p) = s^{a+1} log^p s/(a+1) - p/(a+1) J(a,p-1)`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rat, parse_rat, rat_int, rat_to_f64, Rat};

/// Behaviour of a radial expression in the limit `r -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OriginClass {
    /// Every term has `m > 0`, or `m = 0` with no log factor.
    BoundedAtOrigin,
    /// Some term diverges as `r -> 0` (negative power or bare log).
    UnboundedAtOrigin,
}

/// Finite sum of `c * r^m * (log r)^p` terms in canonical form.
///
/// Canonical form: the term map holds no zero coefficients, so two equal
/// functions have identical maps and `==` decides exact equality.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct RadialExpr {
    terms: BTreeMap<(i64, u32), Rat>,
}

impl RadialExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(rat_int(1), 0, 0)
    }

    /// Single term `c * r^m * (log r)^p`.
    pub fn monomial(c: Rat, m: i64, p: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((m, p), c);
        }
        Self { terms }
    }

    /// Constant expression.
    pub fn constant(c: Rat) -> Self {
        Self::monomial(c, 0, 0)
    }

    /// The unperturbed disk solution shape `(1 - r^2)/4`.
    pub fn torsion_profile() -> Self {
        let mut e = Self::monomial(Rat::new(1.into(), 4.into()), 0, 0);
        e.add_term(Rat::new((-1).into(), 4.into()), 2, 0);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterate `(m, p, coeff)` in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, u32, &Rat)> {
        self.terms.iter().map(|(&(m, p), c)| (m, p, c))
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of `r^m log^p r` (zero if absent).
    pub fn coeff(&self, m: i64, p: u32) -> Rat {
        self.terms.get(&(m, p)).cloned().unwrap_or_else(Rat::zero)
    }

    fn add_term(&mut self, c: Rat, m: i64, p: u32) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry((m, p)).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&(m, p));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, p, c) in other.terms() {
            out.add_term(c.clone(), m, p);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(k, c)| (*k, -c)).collect();
        Self { terms }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let terms = self.terms.iter().map(|(k, v)| (*k, v * c)).collect();
        Self { terms }
    }

    /// Multiply by the monomial `r^shift` (exponent shift).
    pub fn shift(&self, shift: i64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(&(m, p), c)| ((m + shift, p), c.clone()))
            .collect();
        Self { terms }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, p1, c1) in self.terms() {
            for (m2, p2, c2) in other.terms() {
                out.add_term(c1 * c2, m1 + m2, p1 + p2);
            }
        }
        out
    }

    /// Derivative: `d/dr [r^m log^p r] = m r^{m-1} log^p r + p r^{m-1} log^{p-1} r`.
    pub fn ddr(&self) -> Self {
        let mut out = Self::zero();
        for (m, p, c) in self.terms() {
            out.add_term(c * rat_int(m), m - 1, p);
            if p > 0 {
                out.add_term(c * rat_int(p as i64), m - 1, p - 1);
            }
        }
        out
    }

    /// Exact value of the m-th derivative at `r = 1` (where `log 1 = 0`).
    pub fn deriv_at_one(&self, order: usize) -> Rat {
        let mut f = self.clone();
        for _ in 0..order {
            f = f.ddr();
        }
        f.eval_at_one()
    }

    /// Exact value at `r = 1`: only log-free terms contribute.
    pub fn eval_at_one(&self) -> Rat {
        let mut acc = Rat::zero();
        for (_, p, c) in self.terms() {
            if p == 0 {
                acc += c;
            }
        }
        acc
    }

    pub fn origin_class(&self) -> OriginClass {
        for (m, p, _) in self.terms() {
            if m < 0 || (m == 0 && p > 0) {
                return OriginClass::UnboundedAtOrigin;
            }
        }
        OriginClass::BoundedAtOrigin
    }

    /// Floating evaluation. At `r = 0` returns the origin limit when the
    /// expression is bounded there; errors otherwise and for `r < 0`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::DomainError(format!("negative radius {r}")));
        }
        if r == 0.0 {
            return match self.origin_class() {
                OriginClass::BoundedAtOrigin => Ok(rat_to_f64(&self.coeff(0, 0))),
                OriginClass::UnboundedAtOrigin => Err(Error::DomainError(
                    "evaluation at r = 0 of an expression unbounded at the origin".into(),
                )),
            };
        }
        let lg = r.ln();
        let mut acc = 0.0;
        for (m, p, c) in self.terms() {
            acc += rat_to_f64(c) * r.powi(m as i32) * lg.powi(p as i32);
        }
        Ok(acc)
    }

    /// Complex evaluation with the principal log branch (norm estimates).
    pub fn eval_complex(&self, r: Complex64) -> Complex64 {
        let lg = r.ln();
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, p, c) in self.terms() {
            acc += r.powi(m as i32) * lg.powi(p as i32) * rat_to_f64(c);
        }
        acc
    }

    /// Antiderivative (no integration constant). The `a = -1` power
    /// integrates to `log^{p+1}/(p+1)`; others use the finite recurrence
    /// in the log power.
    pub fn antiderivative(&self) -> Self {
        let mut out = Self::zero();
        for (a, p, c) in self.terms() {
            if a == -1 {
                out.add_term(c / rat_int(p as i64 + 1), 0, p + 1);
            } else {
                // J(a,p) = s^{a+1} [ sum_{i=0}^{p} (-1)^i p!/(p-i)! log^{p-i}(s) / (a+1)^{i+1} ]
                let ap1 = rat_int(a + 1);
                let mut factor = c / &ap1;
                for i in 0..=p {
                    out.add_term(factor.clone(), a + 1, p - i);
                    if i < p {
                        factor = -factor * rat_int((p - i) as i64) / &ap1;
                    }
                }
            }
        }
        out
    }

    /// `∫_0^r f(s) ds` in closed form; errors when the integral diverges
    /// at the origin.
    pub fn integrate_from_zero(&self) -> Result<Self> {
        for (a, p, _) in self.terms() {
            if a <= -1 {
                return Err(Error::NonIntegrable {
                    exponent: a,
                    log_power: p,
                });
            }
        }
        // Every antiderivative term now has strictly positive power, so the
        // boundary value at 0 vanishes.
        Ok(self.antiderivative())
    }

    /// `∫_r^1 f(s) ds` in closed form (constant minus antiderivative).
    pub fn integrate_to_one(&self) -> Self {
        let anti = self.antiderivative();
        let at_one = anti.eval_at_one();
        Self::constant(at_one).sub(&anti)
    }

    /// Exact `∫_0^1 f(s) s^{1+n} ds`.
    pub fn int01_weighted(&self, n: u32) -> Result<Rat> {
        let weighted = self.shift(1 + n as i64);
        Ok(weighted.integrate_from_zero()?.eval_at_one())
    }

    /// Zero-mode solution operator: `-∫_r^1 s^{-1} (∫_0^s s' f(s') ds') ds`.
    pub fn op_i_avg(&self) -> Result<Self> {
        let inner = self.shift(1).integrate_from_zero()?;
        let outer = inner.shift(-1).antiderivative();
        // -(H(1) - H(r)) = H(r) - H(1)
        Ok(outer.sub(&Self::constant(outer.eval_at_one())))
    }

    /// Mode-n outer solution: `r^n (C - 1/(2n) ∫_r^1 f(s) s^{1-n} ds)`.
    pub fn op_i_plus(&self, n: u32, c: &Rat) -> Self {
        debug_assert!(n >= 1);
        let integral = self.shift(1 - n as i64).integrate_to_one();
        let half_inv = Rat::new(1.into(), (2 * n as i64).into());
        let mut out = Self::monomial(c.clone(), n as i64, 0);
        out = out.add(&integral.scale(&-half_inv).shift(n as i64));
        out
    }

    /// Mode-n inner solution: `-r^{-n}/(2n) ∫_0^r f(s) s^{1+n} ds`.
    pub fn op_i_minus(&self, n: u32) -> Result<Self> {
        debug_assert!(n >= 1);
        let integral = self.shift(1 + n as i64).integrate_from_zero()?;
        let half_inv = Rat::new(1.into(), (2 * n as i64).into());
        Ok(integral.scale(&-half_inv).shift(-(n as i64)))
    }

    /// Residual of the Cauchy-Euler operator: `A'' + A'/r - n^2 A / r^2 - f`.
    /// Zero exactly when `A` solves the mode-n equation with source `f`.
    pub fn cauchy_euler_residual(&self, n: u32, source: &Self) -> Self {
        let dd = self.ddr().ddr();
        let d_over_r = self.ddr().shift(-1);
        let zero_order = self.shift(-2).scale(&rat_int(-((n as i64) * (n as i64))));
        dd.add(&d_over_r).add(&zero_order).sub(source)
    }
}

impl fmt::Debug for RadialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialExpr({self})")
    }
}

impl fmt::Display for RadialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, p, c) in self.terms() {
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut pieces: Vec<String> = Vec::new();
            if !mag.is_one() || (m == 0 && p == 0) {
                pieces.push(format_rat(&mag));
            }
            match m {
                0 => {}
                1 => pieces.push("r".into()),
                _ => pieces.push(format!("r^{m}")),
            }
            match p {
                0 => {}
                1 => pieces.push("log r".into()),
                _ => pieces.push(format!("log^{p} r")),
            }
            write!(f, "{}", pieces.join(" "))?;
        }
        Ok(())
    }
}

// --- serde: list of {m, p, c} records with "p/q" coefficient strings ---

#[derive(serde::Serialize, serde::Deserialize)]
struct TermRecord {
    m: i64,
    p: u32,
    c: String,
}

impl serde::Serialize for RadialExpr {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let recs: Vec<TermRecord> = self
            .terms()
            .map(|(m, p, c)| TermRecord { m, p, c: format_rat(c) })
            .collect();
        recs.serialize(ser)
    }
}

impl<'de> serde::Deserialize<'de> for RadialExpr {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let recs = Vec::<TermRecord>::deserialize(de)?;
        let mut out = RadialExpr::zero();
        for r in recs {
            let c = parse_rat(&r.c).map_err(serde::de::Error::custom)?;
            out.add_term(c, r.m, r.p);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn expr(terms: &[(i64, i64, i64, u32)]) -> RadialExpr {
        // (num, den, m, p)
        let mut e = RadialExpr::zero();
        for &(n, d, m, p) in terms {
            e = e.add(&RadialExpr::monomial(rat(n, d), m, p));
        }
        e
    }

    #[test]
    fn add_cancellation_and_identity() {
        let u0 = RadialExpr::torsion_profile();
        let quarter_r2 = RadialExpr::monomial(rat(1, 4), 2, 0);
        assert_eq!(u0.add(&quarter_r2), RadialExpr::constant(rat(1, 4)));
        assert_eq!(u0.add(&RadialExpr::zero()), u0);
        // (9/40) r^4 log r + (-1/8) r^4 stays a two-term map
        let two = expr(&[(9, 40, 4, 1), (-1, 8, 4, 0)]);
        assert_eq!(two.term_count(), 2);
        assert_eq!(two.coeff(4, 1), rat(9, 40));
        assert_eq!(two.coeff(4, 0), rat(-1, 8));
    }

    #[test]
    fn mul_square_and_exponent_addition() {
        let one_minus_r2 = expr(&[(1, 1, 0, 0), (-1, 1, 2, 0)]);
        let sq = one_minus_r2.mul(&one_minus_r2);
        assert_eq!(sq, expr(&[(1, 1, 0, 0), (-2, 1, 2, 0), (1, 1, 4, 0)]));
        let a = RadialExpr::monomial(rat(1, 1), 4, 1);
        let b = RadialExpr::monomial(rat(1, 1), -2, 0);
        assert_eq!(a.mul(&b), RadialExpr::monomial(rat(1, 1), 2, 1));
    }

    #[test]
    fn mul_scalar_gives_first_order_source() {
        // u0 * (-36/5) = -9/5 + (9/5) r^2
        let f = RadialExpr::torsion_profile().scale(&rat(-36, 5));
        assert_eq!(f, expr(&[(-9, 5, 0, 0), (9, 5, 2, 0)]));
    }

    #[test]
    fn ddr_rules() {
        let u0 = RadialExpr::torsion_profile();
        assert_eq!(u0.ddr(), RadialExpr::monomial(rat(-1, 2), 1, 0));
        let r4log = RadialExpr::monomial(rat(1, 1), 4, 1);
        assert_eq!(r4log.ddr(), expr(&[(4, 1, 3, 1), (1, 1, 3, 0)]));
    }

    #[test]
    fn deriv_at_one_values() {
        let u0 = RadialExpr::torsion_profile();
        assert_eq!(u0.deriv_at_one(1), rat(-1, 2));
        let r4log = RadialExpr::monomial(rat(1, 1), 4, 1);
        assert_eq!(r4log.deriv_at_one(0), rat(0, 1));
        // radial part of u_1: (9/40) r^4 log r - r^4/8 + (3/20) r^2
        let a41 = expr(&[(9, 40, 4, 1), (-1, 8, 4, 0), (3, 20, 2, 0)]);
        assert_eq!(a41.deriv_at_one(1), rat(1, 40));
    }

    #[test]
    fn int01_weighted_values() {
        // f = s with weight s: int_0^1 s^2 ds = 1/3
        let f = RadialExpr::monomial(rat(1, 1), 1, 0);
        assert_eq!(f.int01_weighted(0).unwrap(), rat(1, 3));
        // xi_0^{(2)} = (-9/100) s^2 (9 s^2 log s - 5 s^2 + 6)
        let xi = expr(&[(-81, 100, 4, 1), (45, 100, 4, 0), (-54, 100, 2, 0)]);
        assert_eq!(xi.int01_weighted(0).unwrap(), rat(-3, 80));
        assert_eq!(xi.int01_weighted(8).unwrap(), rat(-171, 19600));
    }

    #[test]
    fn int01_weighted_rejects_divergent() {
        let f = RadialExpr::monomial(rat(1, 1), -3, 0);
        assert!(matches!(
            f.int01_weighted(0),
            Err(Error::NonIntegrable { exponent: -2, .. })
        ));
        // s^{-1} log s equally diverges
        let g = RadialExpr::monomial(rat(1, 1), -2, 1);
        assert!(g.int01_weighted(0).is_err());
    }

    #[test]
    fn op_i_avg_values() {
        assert_eq!(RadialExpr::zero().op_i_avg().unwrap(), RadialExpr::zero());
        // f = 1 -> (r^2 - 1)/4
        let one = RadialExpr::one();
        assert_eq!(
            one.op_i_avg().unwrap(),
            expr(&[(1, 4, 2, 0), (-1, 4, 0, 0)])
        );
        // f_0^{(2)} = (53/400)(1-r^2) - (9/100) r^2 (9 r^2 log r - 5 r^2 + 6)
        let f0 = expr(&[
            (53, 400, 0, 0),
            (-53, 400, 2, 0),
            (-81, 100, 4, 1),
            (45, 100, 4, 0),
            (-54, 100, 2, 0),
        ]);
        let got = f0.op_i_avg().unwrap();
        // A_0^{(2)} minus its boundary constant: matches the printed radial
        // part of u_2 once the Dirichlet coefficient -1/3200 is added.
        let shifted = got.add(&RadialExpr::constant(rat(-1, 3200)));
        let want = expr(&[
            (-73, 6400, 0, 0),
            (53, 1600, 2, 0),
            (-269, 6400, 4, 0),
            (1, 50, 6, 0),
            (-9, 400, 6, 1),
        ]);
        assert_eq!(shifted, want);
    }

    #[test]
    fn op_i_plus_values() {
        let r4 = RadialExpr::monomial(rat(1, 1), 4, 0);
        assert_eq!(RadialExpr::zero().op_i_plus(4, &rat(1, 1)), r4);
        let f = expr(&[(-9, 5, 0, 0), (9, 5, 2, 0)]);
        let got = f.op_i_plus(4, &rat(1, 64));
        let want = expr(&[(-31, 320, 4, 0), (9, 80, 2, 0), (9, 40, 4, 1)]);
        assert_eq!(got, want);
    }

    #[test]
    fn op_i_minus_values() {
        assert_eq!(
            RadialExpr::zero().op_i_minus(4).unwrap(),
            RadialExpr::zero()
        );
        let f = expr(&[(-9, 5, 0, 0), (9, 5, 2, 0)]);
        let got = f.op_i_minus(4).unwrap();
        assert_eq!(got, expr(&[(3, 80, 2, 0), (-9, 320, 4, 0)]));
    }

    #[test]
    fn first_order_mode_assembles_exactly() {
        // op_I_plus + op_I_minus reproduces A_4^{(1)}
        let f = expr(&[(-9, 5, 0, 0), (9, 5, 2, 0)]);
        let a4 = f.op_i_plus(4, &rat(1, 64)).add(&f.op_i_minus(4).unwrap());
        let want = expr(&[(9, 40, 4, 1), (-1, 8, 4, 0), (3, 20, 2, 0)]);
        assert_eq!(a4, want);
        // and solves the Cauchy-Euler equation with source f
        assert!(a4.cauchy_euler_residual(4, &f).is_zero());
    }

    #[test]
    fn origin_classification() {
        assert_eq!(
            RadialExpr::torsion_profile().origin_class(),
            OriginClass::BoundedAtOrigin
        );
        let bare_log = RadialExpr::monomial(rat(1, 1), 0, 1);
        assert_eq!(bare_log.origin_class(), OriginClass::UnboundedAtOrigin);
        let neg = RadialExpr::monomial(rat(1, 1), -1, 0);
        assert_eq!(neg.origin_class(), OriginClass::UnboundedAtOrigin);
        let r2log = RadialExpr::monomial(rat(1, 1), 2, 1);
        assert_eq!(r2log.origin_class(), OriginClass::BoundedAtOrigin);
    }

    #[test]
    fn eval_values_and_domain() {
        let u0 = RadialExpr::torsion_profile();
        assert_eq!(u0.eval(1.0).unwrap(), 0.0);
        assert_eq!(u0.eval(0.0).unwrap(), 0.25);
        let r4log = RadialExpr::monomial(rat(1, 1), 4, 1);
        assert_eq!(r4log.eval(1.0).unwrap(), 0.0);
        assert_eq!(r4log.eval(0.0).unwrap(), 0.0);
        let bare_log = RadialExpr::monomial(rat(1, 1), 0, 1);
        assert!(bare_log.eval(0.0).is_err());
        assert!(u0.eval(-1.0).is_err());
    }

    #[test]
    fn eval_matches_horner_style_oracle() {
        // A_4^{(1)} at r = 1/2 against an independent evaluation
        let a4 = expr(&[(9, 40, 4, 1), (-1, 8, 4, 0), (3, 20, 2, 0)]);
        let r: f64 = 0.5;
        let oracle =
            9.0 / 40.0 * r.powi(4) * r.ln() - r.powi(4) / 8.0 + 3.0 / 20.0 * r * r;
        assert!((a4.eval(r).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn display_formatting() {
        let a4 = expr(&[(9, 40, 4, 1), (-1, 8, 4, 0), (3, 20, 2, 0)]);
        assert_eq!(format!("{a4}"), "3/20 r^2 - 1/8 r^4 + 9/40 r^4 log r");
        assert_eq!(format!("{}", RadialExpr::zero()), "0");
    }

    #[test]
    fn serde_round_trip() {
        let a4 = expr(&[(9, 40, 4, 1), (-1, 8, 4, 0), (3, 20, 2, 0)]);
        let json = serde_json::to_string(&a4).unwrap();
        let back: RadialExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(a4, back);
    }
}
