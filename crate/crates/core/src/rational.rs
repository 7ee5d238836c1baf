//! Exact rational scalars and the small combinatorial helpers the
//! closure formulas need.
//!
//! All symbolic coefficients in this crate are [`Rat`] values, i.e.
//! arbitrary-precision reduced fractions with positive denominator.
//! Serialization uses the plain `"p/q"` decimal-string form.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision signed rational. Always reduced, denominator > 0.
pub type Rat = BigRational;

/// `n/d` as a [`Rat`]. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Integer `n` as a [`Rat`].
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parse `"p/q"` or `"p"` (optionally signed) into a [`Rat`].
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let num: BigInt = p.trim().parse().map_err(|e| format!("bad numerator {p:?}: {e}"))?;
            let den: BigInt = q.trim().parse().map_err(|e| format!("bad denominator {q:?}: {e}"))?;
            if den.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Rat::new(num, den))
        }
        None => {
            let num: BigInt = s.parse().map_err(|e| format!("bad rational {s:?}: {e}"))?;
            Ok(Rat::from_integer(num))
        }
    }
}

/// Render as `"p/q"`, or `"p"` when the denominator is one.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Lossy conversion to `f64` (numer/denom division as floats on overflow).
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY * sign_of(r));
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

fn sign_of(r: &Rat) -> f64 {
    if r.is_negative() {
        -1.0
    } else {
        1.0
    }
}

/// `n!` as a big integer.
pub fn factorial(n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    acc
}

/// Binomial coefficient `C(n, k)` as a big integer; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

/// Generalized binomial `C(1/2, m)` as an exact rational.
///
/// `C(1/2, 0) = 1`, and for m >= 1 the product
/// `(1/2)(1/2 - 1)...(1/2 - m + 1) / m!`.
pub fn binomial_half(m: usize) -> Rat {
    if m == 0 {
        return Rat::one();
    }
    let mut acc = rat(1, 2);
    for i in 1..m {
        acc *= rat(1, 2) - rat_int(i as i64);
    }
    acc / Rat::from_integer(factorial(m))
}
