//! Finite trigonometric series with [`RadialExpr`] coefficients.
//!
//! A [`FourierField`] is `a0(r) + sum_n [a_n(r) cos(n t) + b_n(r) sin(n t)]`
//! with finite mode support. Products use the exact product-to-sum
//! identities, so the support of a product is the Minkowski sum of the
//! factors' supports and no spectral truncation ever occurs.
//!
//! [`ThetaField`] restricts the coefficients to constants; it carries the
//! boundary data (`g`, the Dirichlet/Neumann targets, the flattening
//! coefficients of the boundary metric factor).

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::radial::{OriginClass, RadialExpr};
use crate::rational::{rat, rat_int, Rat};

/// Real trigonometric series with log-polynomial radial coefficients.
#[derive(Clone, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct FourierField {
    /// Mode-zero (average) coefficient.
    pub avg: RadialExpr,
    /// `n -> a_n(r)`, n >= 1; no identically-zero entries stored.
    pub cos: BTreeMap<u32, RadialExpr>,
    /// `n -> b_n(r)`, n >= 1; no identically-zero entries stored.
    pub sin: BTreeMap<u32, RadialExpr>,
}

impl FourierField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_avg(avg: RadialExpr) -> Self {
        let mut f = Self::zero();
        f.avg = avg;
        f
    }

    pub fn one() -> Self {
        Self::from_avg(RadialExpr::one())
    }

    /// `expr * cos(n t)` (or the average for `n = 0`).
    pub fn cos_mode(n: u32, expr: RadialExpr) -> Self {
        let mut f = Self::zero();
        f.accumulate_cos(n, expr);
        f
    }

    /// `expr * sin(n t)`; `n = 0` contributes nothing.
    pub fn sin_mode(n: u32, expr: RadialExpr) -> Self {
        let mut f = Self::zero();
        f.accumulate_sin(n as i64, expr);
        f
    }

    pub fn is_zero(&self) -> bool {
        self.avg.is_zero() && self.cos.is_empty() && self.sin.is_empty()
    }

    /// Largest mode index present.
    pub fn max_mode(&self) -> u32 {
        let c = self.cos.keys().next_back().copied().unwrap_or(0);
        let s = self.sin.keys().next_back().copied().unwrap_or(0);
        c.max(s)
    }

    /// Sorted list of modes with a nonzero cos or sin coefficient (0 = avg).
    pub fn support(&self) -> Vec<u32> {
        let mut modes: Vec<u32> = Vec::new();
        if !self.avg.is_zero() {
            modes.push(0);
        }
        for &n in self.cos.keys().chain(self.sin.keys()) {
            modes.push(n);
        }
        modes.sort_unstable();
        modes.dedup();
        modes
    }

    pub fn cos_coeff(&self, n: u32) -> RadialExpr {
        if n == 0 {
            self.avg.clone()
        } else {
            self.cos.get(&n).cloned().unwrap_or_default()
        }
    }

    pub fn sin_coeff(&self, n: u32) -> RadialExpr {
        self.sin.get(&n).cloned().unwrap_or_default()
    }

    fn accumulate_cos(&mut self, n: u32, expr: RadialExpr) {
        if expr.is_zero() {
            return;
        }
        if n == 0 {
            self.avg = self.avg.add(&expr);
        } else {
            let slot = self.cos.entry(n).or_default();
            *slot = slot.add(&expr);
            if slot.is_zero() {
                self.cos.remove(&n);
            }
        }
    }

    /// Signed accumulation: `sin(-n) = -sin(n)`, `sin(0) = 0`.
    fn accumulate_sin(&mut self, n: i64, expr: RadialExpr) {
        if expr.is_zero() || n == 0 {
            return;
        }
        let (idx, expr) = if n < 0 {
            ((-n) as u32, expr.neg())
        } else {
            (n as u32, expr)
        };
        let slot = self.sin.entry(idx).or_default();
        *slot = slot.add(&expr);
        if slot.is_zero() {
            self.sin.remove(&idx);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.avg = out.avg.add(&other.avg);
        for (&n, e) in &other.cos {
            out.accumulate_cos(n, e.clone());
        }
        for (&n, e) in &other.sin {
            out.accumulate_sin(n as i64, e.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        out.avg = out.avg.neg();
        for e in out.cos.values_mut() {
            *e = e.neg();
        }
        for e in out.sin.values_mut() {
            *e = e.neg();
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let mut out = self.clone();
        out.avg = out.avg.scale(c);
        for e in out.cos.values_mut() {
            *e = e.scale(c);
        }
        for e in out.sin.values_mut() {
            *e = e.scale(c);
        }
        out
    }

    /// Multiply every coefficient by a radial expression.
    pub fn mul_radial(&self, r: &RadialExpr) -> Self {
        let mut out = Self::zero();
        out.avg = self.avg.mul(r);
        for (&n, e) in &self.cos {
            out.accumulate_cos(n, e.mul(r));
        }
        for (&n, e) in &self.sin {
            out.accumulate_sin(n as i64, e.mul(r));
        }
        out
    }

    /// Exact product via product-to-sum identities.
    pub fn product(&self, other: &Self) -> Self {
        let half = rat(1, 2);
        let mut out = Self::zero();
        let a_parts = self.parts();
        let b_parts = other.parts();
        for (ka, na, ea) in &a_parts {
            for (kb, nb, eb) in &b_parts {
                let prod = ea.mul(eb).scale(&half);
                if prod.is_zero() {
                    continue;
                }
                let (na, nb) = (*na as i64, *nb as i64);
                match (ka, kb) {
                    (Part::Cos, Part::Cos) => {
                        // cos a cos b = 1/2 cos(a-b) + 1/2 cos(a+b)
                        out.accumulate_cos((na - nb).unsigned_abs() as u32, prod.clone());
                        out.accumulate_cos((na + nb) as u32, prod);
                    }
                    (Part::Sin, Part::Sin) => {
                        // sin a sin b = 1/2 cos(a-b) - 1/2 cos(a+b)
                        out.accumulate_cos((na - nb).unsigned_abs() as u32, prod.clone());
                        out.accumulate_cos((na + nb) as u32, prod.neg());
                    }
                    (Part::Sin, Part::Cos) => {
                        // sin a cos b = 1/2 sin(a+b) + 1/2 sin(a-b)
                        out.accumulate_sin(na + nb, prod.clone());
                        out.accumulate_sin(na - nb, prod);
                    }
                    (Part::Cos, Part::Sin) => {
                        out.accumulate_sin(na + nb, prod.clone());
                        out.accumulate_sin(nb - na, prod);
                    }
                }
            }
        }
        // The avg x avg term went through cos(0)cos(0) = 1/2 + 1/2 cos(0),
        // which the accumulator already folded into a single avg entry.
        out
    }

    fn parts(&self) -> Vec<(Part, u32, RadialExpr)> {
        let mut v = Vec::with_capacity(1 + self.cos.len() + self.sin.len());
        if !self.avg.is_zero() {
            v.push((Part::Cos, 0, self.avg.clone()));
        }
        for (&n, e) in &self.cos {
            v.push((Part::Cos, n, e.clone()));
        }
        for (&n, e) in &self.sin {
            v.push((Part::Sin, n, e.clone()));
        }
        v
    }

    /// Angular derivative: `cos n -> -n sin n`, `sin n -> n cos n`.
    pub fn dtheta(&self) -> Self {
        let mut out = Self::zero();
        for (&n, e) in &self.cos {
            out.accumulate_sin(n as i64, e.scale(&rat_int(-(n as i64))));
        }
        for (&n, e) in &self.sin {
            out.accumulate_cos(n, e.scale(&rat_int(n as i64)));
        }
        out
    }

    /// Radial derivative applied coefficient-wise.
    pub fn ddr(&self) -> Self {
        let mut out = Self::zero();
        out.avg = self.avg.ddr();
        for (&n, e) in &self.cos {
            out.accumulate_cos(n, e.ddr());
        }
        for (&n, e) in &self.sin {
            out.accumulate_sin(n as i64, e.ddr());
        }
        out
    }

    /// Exact polar Laplacian `f'' + f'/r - n^2 f / r^2` mode-wise.
    pub fn laplacian(&self) -> Self {
        let mode_lap = |e: &RadialExpr, n: u32| -> RadialExpr {
            let dd = e.ddr().ddr();
            let d_over_r = e.ddr().shift(-1);
            let angular = e.shift(-2).scale(&rat_int(-((n as i64) * (n as i64))));
            dd.add(&d_over_r).add(&angular)
        };
        let mut out = Self::zero();
        out.avg = mode_lap(&self.avg, 0);
        for (&n, e) in &self.cos {
            out.accumulate_cos(n, mode_lap(e, n));
        }
        for (&n, e) in &self.sin {
            out.accumulate_sin(n as i64, mode_lap(e, n));
        }
        out
    }

    /// Floating evaluation at `(r, theta)`.
    pub fn eval(&self, r: f64, theta: f64) -> Result<f64> {
        let mut acc = self.avg.eval(r)?;
        for (&n, e) in &self.cos {
            acc += e.eval(r)? * (n as f64 * theta).cos();
        }
        for (&n, e) in &self.sin {
            acc += e.eval(r)? * (n as f64 * theta).sin();
        }
        Ok(acc)
    }

    /// ThetaField of exact h-th radial derivatives at `r = 1`.
    pub fn boundary_deriv(&self, h: usize) -> ThetaField {
        let mut out = Self::zero();
        out.avg = RadialExpr::constant(self.avg.deriv_at_one(h));
        for (&n, e) in &self.cos {
            out.accumulate_cos(n, RadialExpr::constant(e.deriv_at_one(h)));
        }
        for (&n, e) in &self.sin {
            out.accumulate_sin(n as i64, RadialExpr::constant(e.deriv_at_one(h)));
        }
        ThetaField(out)
    }

    /// True when every coefficient is bounded as `r -> 0`.
    pub fn bounded_at_origin(&self) -> bool {
        let ok = |e: &RadialExpr| e.origin_class() == OriginClass::BoundedAtOrigin;
        ok(&self.avg) && self.cos.values().all(ok) && self.sin.values().all(ok)
    }
}

#[derive(Clone, Copy)]
enum Part {
    Cos,
    Sin,
}

impl fmt::Debug for FourierField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FourierField({self})")
    }
}

impl fmt::Display for FourierField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        let mut write_part = |f: &mut fmt::Formatter<'_>,
                              expr: &RadialExpr,
                              trig: Option<String>|
         -> fmt::Result {
            if expr.is_zero() {
                return Ok(());
            }
            let single = expr.term_count() == 1;
            let (lead, body) = if single {
                // render "c r^m" inline, pulling the sign out
                let (m, p, c) = expr.terms().next().unwrap();
                let mono = RadialExpr::monomial(c.abs(), m, p);
                (c.is_negative(), format!("{mono}"))
            } else {
                (false, format!("({expr})"))
            };
            if first {
                if lead {
                    write!(f, "-")?;
                }
                first = false;
            } else if lead {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match trig {
                None => write!(f, "{body}"),
                Some(t) => {
                    if body == "1" {
                        write!(f, "{t}")
                    } else {
                        write!(f, "{body} {t}")
                    }
                }
            }
        };
        write_part(f, &self.avg, None)?;
        for (&n, e) in &self.cos {
            write_part(f, e, Some(format!("cos({n}θ)")))?;
        }
        for (&n, e) in &self.sin {
            write_part(f, e, Some(format!("sin({n}θ)")))?;
        }
        Ok(())
    }
}

/// A [`FourierField`] whose coefficients are all constants (no r, no log r).
#[derive(Clone, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ThetaField(FourierField);

impl ThetaField {
    pub fn zero() -> Self {
        Self(FourierField::zero())
    }

    pub fn one() -> Self {
        Self(FourierField::one())
    }

    pub fn constant(c: Rat) -> Self {
        Self(FourierField::from_avg(RadialExpr::constant(c)))
    }

    /// `c cos(n t)`.
    pub fn cos_mode(n: u32, c: Rat) -> Self {
        Self(FourierField::cos_mode(n, RadialExpr::constant(c)))
    }

    /// `c sin(n t)`.
    pub fn sin_mode(n: u32, c: Rat) -> Self {
        Self(FourierField::sin_mode(n, RadialExpr::constant(c)))
    }

    /// Validate and wrap a radially constant field.
    pub fn try_from_field(f: FourierField) -> Result<Self> {
        let is_const = |e: &RadialExpr| {
            e.is_zero() || (e.term_count() == 1 && !e.coeff(0, 0).is_zero())
        };
        if is_const(&f.avg) && f.cos.values().all(is_const) && f.sin.values().all(is_const) {
            Ok(Self(f))
        } else {
            Err(Error::NotThetaField)
        }
    }

    pub fn as_field(&self) -> &FourierField {
        &self.0
    }

    pub fn into_field(self) -> FourierField {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.add(&other.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.sub(&other.0))
    }

    pub fn neg(&self) -> Self {
        Self(self.0.neg())
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self(self.0.scale(c))
    }

    pub fn product(&self, other: &Self) -> Self {
        Self(self.0.product(&other.0))
    }

    pub fn dtheta(&self) -> Self {
        Self(self.0.dtheta())
    }

    /// Exact h-th power by repeated products.
    pub fn pow(&self, h: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..h {
            acc = acc.product(self);
        }
        acc
    }

    pub fn eval(&self, theta: f64) -> f64 {
        // radially constant: any positive radius works
        self.0.eval(1.0, theta).expect("theta field evaluation")
    }

    /// Exact Fourier coefficients `(avg, cos map, sin map)`.
    pub fn extract_coeffs(&self) -> (Rat, BTreeMap<u32, Rat>, BTreeMap<u32, Rat>) {
        let avg = self.0.avg.coeff(0, 0);
        let cos = self.0.cos.iter().map(|(&n, e)| (n, e.coeff(0, 0))).collect();
        let sin = self.0.sin.iter().map(|(&n, e)| (n, e.coeff(0, 0))).collect();
        (avg, cos, sin)
    }

    pub fn avg_coeff(&self) -> Rat {
        self.0.avg.coeff(0, 0)
    }

    pub fn cos_coeff(&self, n: u32) -> Rat {
        if n == 0 {
            self.avg_coeff()
        } else {
            self.0.cos.get(&n).map(|e| e.coeff(0, 0)).unwrap_or_else(Rat::zero)
        }
    }

    pub fn sin_coeff(&self, n: u32) -> Rat {
        self.0.sin.get(&n).map(|e| e.coeff(0, 0)).unwrap_or_else(Rat::zero)
    }

    pub fn support(&self) -> Vec<u32> {
        self.0.support()
    }

    /// Max over a uniform theta grid of `|self|` (diagnostics).
    pub fn sup_on_grid(&self, n_theta: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for i in 0..n_theta {
            let t = 2.0 * std::f64::consts::PI * (i as f64) / (n_theta as f64);
            sup = sup.max(self.eval(t).abs());
        }
        sup
    }
}

impl fmt::Debug for ThetaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ThetaField({})", self.0)
    }
}

impl fmt::Display for ThetaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
