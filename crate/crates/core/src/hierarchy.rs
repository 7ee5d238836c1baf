//! Order-by-order construction of the approximant pair.
//!
//! At each order k the recursion:
//! 1. forms the forcing `F_k = sum_{j=1}^{k-1} w_j u_{k-j}`,
//! 2. evaluates the Dirichlet target `u_k(1,t)` and Neumann target
//!    `d_r u_k(1,t)` from the boundary Taylor expansions,
//! 3. extracts their Fourier coefficients,
//! 4. closes the leading potential coefficients `a_{n,0}, b_{n,0}` so that
//!    both boundary conditions become satisfiable,
//! 5. assembles `u_k` from the bounded Cauchy-Euler solutions.
//!
//! Everything is exact; the boundary identities and the hierarchy equation
//! hold as identities of canonical forms, which `run` asserts before
//! returning.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fourier::{FourierField, ThetaField};
use crate::radial::RadialExpr;
use crate::rational::{factorial, format_rat, rat, rat_int, Rat};

/// Free coefficients `a_{n,m}, b_{n,m}` (1 <= m <= M) of the potential's
/// radial polynomial ansatz, with the decay budget `Gamma`.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FreeCoefficients {
    /// Polynomial degree M of `a_n(r) = sum_{m=0}^M a_{n,m} r^m`.
    pub m_max: usize,
    /// `(n, m) -> a_{n,m}` for n >= 0, 1 <= m <= M; stored as strings in
    /// serialized form, exact rationals here.
    #[serde(with = "free_map_serde")]
    pub a_free: BTreeMap<(u32, usize), Rat>,
    /// `(n, m) -> b_{n,m}` for n >= 1, 1 <= m <= M.
    #[serde(with = "free_map_serde")]
    pub b_free: BTreeMap<(u32, usize), Rat>,
    /// Decay budget: `sum_m |a_{n,m}| <= Gamma e^{-n sigma}`.
    #[serde(with = "crate::serialize::rat_string")]
    pub gamma: Rat,
}

impl FreeCoefficients {
    /// The default choice M = 0: all free coefficients vanish and the
    /// potential is radially independent.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn a(&self, n: u32, m: usize) -> Rat {
        self.a_free.get(&(n, m)).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn b(&self, n: u32, m: usize) -> Rat {
        self.b_free.get(&(n, m)).cloned().unwrap_or_else(Rat::zero)
    }

    /// Check the geometric decay budget at angular radius `sigma`.
    pub fn validate_decay(&self, sigma: f64) -> Result<()> {
        use crate::rational::rat_to_f64;
        let gamma = rat_to_f64(&self.gamma);
        let mut by_mode: BTreeMap<u32, f64> = BTreeMap::new();
        for (&(n, m), c) in &self.a_free {
            if m == 0 || m > self.m_max {
                return Err(Error::InvalidParams(format!(
                    "free coefficient index m = {m} outside 1..={}",
                    self.m_max
                )));
            }
            *by_mode.entry(n).or_default() += rat_to_f64(c).abs();
        }
        for (&n, &sum) in &by_mode {
            if sum > gamma * (-(n as f64) * sigma).exp() + 1e-15 {
                return Err(Error::InvalidParams(format!(
                    "free coefficients at mode {n} exceed Gamma e^(-n sigma)"
                )));
            }
        }
        Ok(())
    }

    fn modes(&self) -> BTreeSet<u32> {
        self.a_free
            .keys()
            .chain(self.b_free.keys())
            .map(|&(n, _)| n)
            .collect()
    }
}

mod free_map_serde {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        n: u32,
        m: usize,
        c: String,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(u32, usize), Rat>,
        ser: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<Entry> = map
            .iter()
            .map(|(&(n, m), c)| Entry { n, m, c: format_rat(c) })
            .collect();
        v.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<BTreeMap<(u32, usize), Rat>, D::Error> {
        let v = Vec::<Entry>::deserialize(de)?;
        let mut map = BTreeMap::new();
        for e in v {
            let c = crate::rational::parse_rat(&e.c).map_err(serde::de::Error::custom)?;
            map.insert((e.n, e.m), c);
        }
        Ok(map)
    }
}

/// Everything produced by a depth-K run: solution orders, potential orders,
/// boundary targets, and the per-mode integration constants.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HierarchyState {
    /// Boundary perturbation profile.
    pub g: ThetaField,
    /// Prescribed normal derivative (1/2 throughout).
    #[serde(with = "crate::serialize::rat_string")]
    pub c_const: Rat,
    /// `u[k]` for k = 0..=K; `u[0]` is the unperturbed profile.
    pub u: Vec<FourierField>,
    /// `w[k]` for k = 0..=K; `w[0]` is identically zero.
    pub w: Vec<FourierField>,
    /// Dirichlet targets `Phi^{(k)}`; index 0 unused (zero).
    pub dirichlet_targets: Vec<ThetaField>,
    /// Neumann targets `Psi^{(k)}`; index 0 unused (zero).
    pub neumann_targets: Vec<ThetaField>,
    /// Cos-side integration constants `C_n^{(k)}` per order.
    pub cn: Vec<BTreeMap<u32, RatBox>>,
    /// Sin-side integration constants `D_n^{(k)}` per order.
    pub dn: Vec<BTreeMap<u32, RatBox>>,
    /// Free-coefficient configuration used for the run.
    pub free: FreeCoefficients,
}

/// Wrapper so constants maps serialize with "p/q" strings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatBox(pub Rat);

impl serde::Serialize for RatBox {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rat(&self.0))
    }
}

impl<'de> serde::Deserialize<'de> for RatBox {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        crate::rational::parse_rat(&s)
            .map(RatBox)
            .map_err(serde::de::Error::custom)
    }
}

impl HierarchyState {
    /// Highest computed order K.
    pub fn order(&self) -> usize {
        self.u.len() - 1
    }

    /// The unperturbed disk solution `(1 - r^2)/4`.
    pub fn u0() -> FourierField {
        FourierField::from_avg(RadialExpr::torsion_profile())
    }

    fn require_order(&self, k: usize) -> Result<()> {
        if k > self.order() {
            return Err(Error::MissingOrder {
                wanted: k,
                have: self.order(),
            });
        }
        Ok(())
    }

    /// Truncated solution `u^[k] = sum_j mu^j u_j` evaluated at (r, theta).
    pub fn eval_u_truncated(&self, k: usize, mu: f64, r: f64, theta: f64) -> Result<f64> {
        self.require_order(k)?;
        let mut acc = 0.0;
        let mut mu_pow = 1.0;
        for j in 0..=k {
            acc += mu_pow * self.u[j].eval(r, theta)?;
            mu_pow *= mu;
        }
        Ok(acc)
    }

    /// Truncated potential `w^[k] = sum_j mu^{j-1} w_j` at (r, theta).
    pub fn eval_w_truncated(&self, k: usize, mu: f64, r: f64, theta: f64) -> Result<f64> {
        self.require_order(k)?;
        let mut acc = 0.0;
        let mut mu_pow = 1.0;
        for j in 1..=k {
            acc += mu_pow * self.w[j].eval(r, theta)?;
            mu_pow *= mu;
        }
        Ok(acc)
    }
}

/// Forcing term `F_k = sum_{j=1}^{k-1} w_j u_{k-j}`; empty for k = 1.
pub fn forcing(state: &HierarchyState, k: usize) -> Result<FourierField> {
    if k == 0 || k > state.u.len() || k > state.w.len() {
        return Err(Error::MissingOrder {
            wanted: k,
            have: state.order(),
        });
    }
    let mut acc = FourierField::zero();
    for j in 1..k {
        acc = acc.add(&state.w[j].product(&state.u[k - j]));
    }
    Ok(acc)
}

/// Dirichlet target `Phi^{(j)} = -sum_{h=1}^{j} (g^h / h!) d_r^h u_{j-h}(1,t)`.
pub fn dirichlet_target(state: &HierarchyState, j: usize) -> Result<ThetaField> {
    if j == 0 || j > state.u.len() {
        return Err(Error::MissingOrder {
            wanted: j,
            have: state.u.len().saturating_sub(1),
        });
    }
    let mut acc = ThetaField::zero();
    let mut g_pow = ThetaField::one();
    for h in 1..=j {
        g_pow = g_pow.product(&state.g);
        let deriv = state.u[j - h].boundary_deriv(h);
        let inv_fact = Rat::new(1.into(), factorial(h));
        acc = acc.add(&g_pow.product(&deriv).scale(&inv_fact));
    }
    Ok(acc.neg())
}

/// Coefficient `C_j(t)` of the expansion of
/// `(1 + mu g) sqrt(1 + 2 mu g + mu^2 (g^2 + g'^2))` in powers of mu.
///
/// `C_0 = 1`; the general term is the double binomial sum with exact
/// `C(1/2, m)` factors.
pub fn flattening_coefficient(g: &ThetaField, j: usize) -> ThetaField {
    if j == 0 {
        return ThetaField::one();
    }
    let gp = g.dtheta();
    let q = g.product(g).add(&gp.product(&gp)); // g^2 + (g')^2
    let two_g = g.scale(&rat_int(2));

    let sqrt_part = |jj: usize| -> ThetaField {
        let mut acc = ThetaField::zero();
        if jj == 0 {
            return ThetaField::one();
        }
        let lo = jj.div_ceil(2);
        for m in lo..=jj {
            let coef = crate::rational::binomial_half(m)
                * Rat::from_integer(crate::rational::binomial(m, jj - m));
            let term = two_g.pow(2 * m - jj).product(&q.pow(jj - m)).scale(&coef);
            acc = acc.add(&term);
        }
        acc
    };

    let mut out = sqrt_part(j);
    out = out.add(&g.product(&sqrt_part(j - 1)));
    out
}

/// Neumann target `Psi^{(j)}`: the boundary expansion of the flattened
/// normal-derivative condition, solved for `d_r u_j(1,t)`.
pub fn neumann_target(state: &HierarchyState, j: usize) -> Result<ThetaField> {
    if j == 0 || j > state.u.len() {
        return Err(Error::MissingOrder {
            wanted: j,
            have: state.u.len().saturating_sub(1),
        });
    }
    let g = &state.g;
    let gp = g.dtheta();
    let mut acc = ThetaField::zero();

    // g' sum_{h=0}^{j-1} g^{j-1-h}/(j-1-h)! d_r^{j-1-h} d_t u_h(1,t)
    for h in 0..j {
        let pow = j - 1 - h;
        let coef = Rat::new(1.into(), factorial(pow));
        let deriv = state.u[h].dtheta().boundary_deriv(pow);
        acc = acc.add(&gp.product(&g.pow(pow)).product(&deriv).scale(&coef));
    }
    // - sum_{h=0}^{j-1} g^{j-h}/(j-h)! d_r^{j-h+1} u_h(1,t)
    for h in 0..j {
        let pow = j - h;
        let coef = Rat::new(1.into(), factorial(pow));
        let deriv = state.u[h].boundary_deriv(pow + 1);
        acc = acc.sub(&g.pow(pow).product(&deriv).scale(&coef));
    }
    // - 2 sum_{h=0}^{j-1} g^{j-h}/(j-1-h)! d_r^{j-h} u_h(1,t)
    for h in 0..j {
        let coef = Rat::new(2.into(), factorial(j - 1 - h));
        let deriv = state.u[h].boundary_deriv(j - h);
        acc = acc.sub(&g.pow(j - h).product(&deriv).scale(&coef));
    }
    // - sum_{h=0}^{j-2} g^{j-h}/(j-2-h)! d_r^{j-h-1} u_h(1,t)
    for h in 0..j.saturating_sub(1) {
        let coef = Rat::new(1.into(), factorial(j - 2 - h));
        let deriv = state.u[h].boundary_deriv(j - h - 1);
        acc = acc.sub(&g.pow(j - h).product(&deriv).scale(&coef));
    }
    // - C C_j
    let cj = flattening_coefficient(g, j);
    acc = acc.sub(&cj.scale(&state.c_const));
    Ok(acc)
}

/// `chi_n = 2 (2+n)(4+n)`, the closure factor of the non-zero modes.
fn chi(n: u32) -> Rat {
    rat_int(2 * (2 + n as i64) * (4 + n as i64))
}

/// Close the potential order `w_k` from the boundary targets and forcing.
///
/// The zero mode uses
/// `a_{0,0} = 16 [ A0' - int_0^1 s xi_0 ds - 1/2 sum_m a_{0,m}/((2+m)(4+m)) ]`,
/// the modes n >= 1
/// `a_{n,0} = chi_n [ An' - n An - int_0^1 xi_n s^{1+n} ds - 1/2 sum_m a_{n,m}/((2+n+m)(4+n+m)) ]`
/// and the same shape for the sin side.
pub fn close_w(
    phi: &ThetaField,
    psi: &ThetaField,
    forcing_field: &FourierField,
    free: &FreeCoefficients,
) -> Result<FourierField> {
    let (_, a_tilde, b_tilde) = phi.extract_coeffs();
    let (a0p, ap_tilde, bp_tilde) = psi.extract_coeffs();

    let mut modes: BTreeSet<u32> = BTreeSet::new();
    modes.extend(a_tilde.keys().copied());
    modes.extend(b_tilde.keys().copied());
    modes.extend(ap_tilde.keys().copied());
    modes.extend(bp_tilde.keys().copied());
    modes.extend(forcing_field.support());
    modes.extend(free.modes());

    let mut w = FourierField::zero();

    // zero mode
    {
        let xi0 = forcing_field.avg.clone();
        let mut bracket = a0p - xi0.int01_weighted(0)?;
        let mut tail = Rat::zero();
        for m in 1..=free.m_max {
            tail += free.a(0, m) / rat_int(((2 + m) * (4 + m)) as i64);
        }
        bracket -= tail * rat(1, 2);
        let a00 = bracket * rat_int(16);
        let mut a0 = RadialExpr::constant(a00);
        for m in 1..=free.m_max {
            a0 = a0.add(&RadialExpr::monomial(free.a(0, m), m as i64, 0));
        }
        if !a0.is_zero() {
            w = w.add(&FourierField::from_avg(a0));
        }
    }

    for &n in modes.iter().filter(|&&n| n > 0) {
        let get = |map: &BTreeMap<u32, Rat>| map.get(&n).cloned().unwrap_or_else(Rat::zero);
        // cos side
        {
            let xi_n = forcing_field.cos_coeff(n);
            let mut bracket =
                get(&ap_tilde) - get(&a_tilde) * rat_int(n as i64) - xi_n.int01_weighted(n)?;
            let mut tail = Rat::zero();
            for m in 1..=free.m_max {
                tail += free.a(n, m) / rat_int(((2 + n as usize + m) * (4 + n as usize + m)) as i64);
            }
            bracket -= tail * rat(1, 2);
            let an0 = bracket * chi(n);
            let mut an = RadialExpr::constant(an0);
            for m in 1..=free.m_max {
                an = an.add(&RadialExpr::monomial(free.a(n, m), m as i64, 0));
            }
            w = w.add(&FourierField::cos_mode(n, an));
        }
        // sin side
        {
            let eta_n = forcing_field.sin_coeff(n);
            let mut bracket =
                get(&bp_tilde) - get(&b_tilde) * rat_int(n as i64) - eta_n.int01_weighted(n)?;
            let mut tail = Rat::zero();
            for m in 1..=free.m_max {
                tail += free.b(n, m) / rat_int(((2 + n as usize + m) * (4 + n as usize + m)) as i64);
            }
            bracket -= tail * rat(1, 2);
            let bn0 = bracket * chi(n);
            let mut bn = RadialExpr::constant(bn0);
            for m in 1..=free.m_max {
                bn = bn.add(&RadialExpr::monomial(free.b(n, m), m as i64, 0));
            }
            w = w.add(&FourierField::sin_mode(n, bn));
        }
    }
    Ok(w)
}

/// Assembled order: the solution field plus its integration constants.
pub struct AssembledOrder {
    pub u: FourierField,
    pub cn: BTreeMap<u32, RatBox>,
    pub dn: BTreeMap<u32, RatBox>,
}

/// Assemble `u_k` from the closed potential and the boundary targets.
///
/// Sources are `f_n = u_0 a_n + xi_n` (cos) and `g_n = u_0 b_n + eta_n`
/// (sin); the zero mode integrates with [`RadialExpr::op_i_avg`], the others
/// combine [`RadialExpr::op_i_plus`] (with `C_n = (An + An'/n)/2`) and
/// [`RadialExpr::op_i_minus`]. The boundary identities are asserted exactly.
pub fn assemble_u(
    phi: &ThetaField,
    psi: &ThetaField,
    w_k: &FourierField,
    forcing_field: &FourierField,
) -> Result<AssembledOrder> {
    let u0 = RadialExpr::torsion_profile();
    let (a0_tilde, a_tilde, b_tilde) = phi.extract_coeffs();
    let (_, ap_tilde, bp_tilde) = psi.extract_coeffs();

    let mut modes: BTreeSet<u32> = BTreeSet::new();
    modes.extend(w_k.support());
    modes.extend(forcing_field.support());
    modes.extend(a_tilde.keys().copied());
    modes.extend(b_tilde.keys().copied());
    modes.extend(ap_tilde.keys().copied());
    modes.extend(bp_tilde.keys().copied());

    let mut u = FourierField::zero();
    let mut cn = BTreeMap::new();
    let mut dn = BTreeMap::new();

    // zero mode
    {
        let f0 = u0.mul(&w_k.avg).add(&forcing_field.avg);
        let a0 = RadialExpr::constant(a0_tilde.clone()).add(&f0.op_i_avg()?);
        if !a0.is_zero() {
            u = u.add(&FourierField::from_avg(a0));
        }
    }

    let get = |map: &BTreeMap<u32, Rat>, n: u32| map.get(&n).cloned().unwrap_or_else(Rat::zero);

    for &n in modes.iter().filter(|&&n| n > 0) {
        // cos side
        let f_n = u0.mul(&w_k.cos_coeff(n)).add(&forcing_field.cos_coeff(n));
        let an_t = get(&a_tilde, n);
        let anp_t = get(&ap_tilde, n);
        if !(f_n.is_zero() && an_t.is_zero() && anp_t.is_zero()) {
            let c_n = (an_t + anp_t / rat_int(n as i64)) * rat(1, 2);
            let a_n = f_n.op_i_plus(n, &c_n).add(&f_n.op_i_minus(n)?);
            cn.insert(n, RatBox(c_n));
            u = u.add(&FourierField::cos_mode(n, a_n));
        }
        // sin side
        let g_n = u0.mul(&w_k.sin_coeff(n)).add(&forcing_field.sin_coeff(n));
        let bn_t = get(&b_tilde, n);
        let bnp_t = get(&bp_tilde, n);
        if !(g_n.is_zero() && bn_t.is_zero() && bnp_t.is_zero()) {
            let d_n = (bn_t + bnp_t / rat_int(n as i64)) * rat(1, 2);
            let b_n = g_n.op_i_plus(n, &d_n).add(&g_n.op_i_minus(n)?);
            dn.insert(n, RatBox(d_n));
            u = u.add(&FourierField::sin_mode(n, b_n));
        }
    }

    if !u.bounded_at_origin() {
        return Err(Error::OriginUnbounded(format!("u = {u}")));
    }
    // boundary closure, exactly
    if u.boundary_deriv(0) != *phi {
        return Err(Error::BoundaryMismatch(format!(
            "u(1,t) = {} != {}",
            u.boundary_deriv(0),
            phi
        )));
    }
    if u.boundary_deriv(1) != *psi {
        return Err(Error::BoundaryMismatch(format!(
            "d_r u(1,t) = {} != {}",
            u.boundary_deriv(1),
            psi
        )));
    }
    Ok(AssembledOrder { u, cn, dn })
}

/// Run the recursion to order K.
///
/// Deterministic in `(g, k_max, free)`; the returned state carries every
/// intermediate object the defect and report layers need.
pub fn run(g: ThetaField, k_max: usize, free: FreeCoefficients) -> Result<HierarchyState> {
    if k_max == 0 {
        return Err(Error::InvalidParams("K must be >= 1".into()));
    }
    let mut state = HierarchyState {
        g,
        c_const: rat(1, 2),
        u: vec![HierarchyState::u0()],
        w: vec![FourierField::zero()],
        dirichlet_targets: vec![ThetaField::zero()],
        neumann_targets: vec![ThetaField::zero()],
        cn: vec![BTreeMap::new()],
        dn: vec![BTreeMap::new()],
        free,
    };
    for k in 1..=k_max {
        let forcing_field = forcing(&state, k)?;
        let phi = dirichlet_target(&state, k)?;
        let psi = neumann_target(&state, k)?;
        let w_k = close_w(&phi, &psi, &forcing_field, &state.free)?;
        let assembled = assemble_u(&phi, &psi, &w_k, &forcing_field)?;

        // hierarchy equation: Delta u_k - w_k u_0 - F_k = 0 exactly
        let residual = assembled
            .u
            .laplacian()
            .sub(&w_k.product(&state.u[0]))
            .sub(&forcing_field);
        if !residual.is_zero() {
            return Err(Error::BoundaryMismatch(format!(
                "hierarchy equation violated at order {k}: residual {residual}"
            )));
        }

        state.u.push(assembled.u);
        state.w.push(w_k);
        state.dirichlet_targets.push(phi);
        state.neumann_targets.push(psi);
        state.cn.push(assembled.cn);
        state.dn.push(assembled.dn);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn g_example() -> ThetaField {
        ThetaField::cos_mode(4, rat(1, 20))
    }

    fn sec8_state(k: usize) -> HierarchyState {
        run(g_example(), k, FreeCoefficients::none()).unwrap()
    }

    #[test]
    fn forcing_first_orders() {
        let state = sec8_state(2);
        assert!(forcing(&state, 1).unwrap().is_zero());
        let f2 = forcing(&state, 2).unwrap();
        // xi_0 = xi_8 = (-9/100) r^2 (9 r^2 log r - 5 r^2 + 6)
        let want = RadialExpr::monomial(rat(-81, 100), 4, 1)
            .add(&RadialExpr::monomial(rat(45, 100), 4, 0))
            .add(&RadialExpr::monomial(rat(-54, 100), 2, 0));
        assert_eq!(f2.avg, want);
        assert_eq!(f2.cos_coeff(8), want);
        assert!(f2.sin.is_empty());
    }

    #[test]
    fn forcing_mode_support_at_k3() {
        let state = sec8_state(3);
        let f3 = forcing(&state, 3).unwrap();
        for n in f3.support() {
            assert!([0u32, 4, 8, 12].contains(&n), "unexpected mode {n}");
        }
    }

    #[test]
    fn dirichlet_target_values() {
        let state = sec8_state(2);
        let phi1 = &state.dirichlet_targets[1];
        assert_eq!(phi1.cos_coeff(4), rat(1, 40));
        assert_eq!(phi1.support(), vec![4]);

        let phi2 = &state.dirichlet_targets[2];
        assert_eq!(phi2.avg_coeff(), rat(-1, 3200));
        assert_eq!(phi2.cos_coeff(8), rat(-1, 3200));
    }

    #[test]
    fn dirichlet_target_zero_g() {
        let state = run(ThetaField::zero(), 3, FreeCoefficients::none()).unwrap();
        for j in 1..=3 {
            assert!(state.dirichlet_targets[j].is_zero());
        }
    }

    #[test]
    fn flattening_coefficients() {
        let g = g_example();
        assert_eq!(flattening_coefficient(&g, 0), ThetaField::one());
        assert_eq!(flattening_coefficient(&g, 1), g.scale(&rat(2, 1)));
        // C_2 = g^2 + (1/2)(g')^2
        let gp = g.dtheta();
        let want = g.product(&g).add(&gp.product(&gp).scale(&rat(1, 2)));
        assert_eq!(flattening_coefficient(&g, 2), want);
    }

    #[test]
    fn neumann_target_values() {
        let state = sec8_state(2);
        let psi1 = &state.neumann_targets[1];
        // Psi^{(1)} = (1/2) g
        assert_eq!(psi1, &g_example().scale(&rat(1, 2)));

        let psi2 = &state.neumann_targets[2];
        assert_eq!(psi2.avg_coeff(), rat(-7, 1600));
        assert_eq!(psi2.cos_coeff(8), rat(-23, 1600));
    }

    #[test]
    fn close_w_first_order() {
        let state = sec8_state(1);
        let w1 = &state.w[1];
        assert_eq!(w1.cos_coeff(4), RadialExpr::constant(rat(-36, 5)));
        assert_eq!(w1.support(), vec![4]);
        assert_eq!(format!("{w1}"), "-36/5 cos(4θ)");
    }

    #[test]
    fn close_w_second_order() {
        let state = sec8_state(2);
        let w2 = &state.w[2];
        assert_eq!(w2.avg, RadialExpr::constant(rat(53, 100)));
        assert_eq!(w2.cos_coeff(8), RadialExpr::constant(rat(-741, 980)));
        assert_eq!(w2.support(), vec![0, 8]);
    }

    #[test]
    fn close_w_all_zero() {
        let w = close_w(
            &ThetaField::zero(),
            &ThetaField::zero(),
            &FourierField::zero(),
            &FreeCoefficients::none(),
        )
        .unwrap();
        assert!(w.is_zero());
    }

    #[test]
    fn assemble_u_first_order() {
        let state = sec8_state(1);
        assert_eq!(state.cn[1].get(&4), Some(&RatBox(rat(1, 64))));
        let a4 = state.u[1].cos_coeff(4);
        let want = RadialExpr::monomial(rat(9, 40), 4, 1)
            .add(&RadialExpr::monomial(rat(-1, 8), 4, 0))
            .add(&RadialExpr::monomial(rat(3, 20), 2, 0));
        assert_eq!(a4, want);
        assert_eq!(state.u[1].support(), vec![4]);
    }

    #[test]
    fn assemble_u_second_order() {
        let state = sec8_state(2);
        assert_eq!(state.cn[2].get(&8), Some(&RatBox(rat(-27, 25600))));
        let a0 = state.u[2].avg.clone();
        assert_eq!(a0.coeff(0, 0), rat(-73, 6400));
        assert_eq!(a0.coeff(2, 0), rat(53, 1600));
        assert_eq!(a0.coeff(4, 0), rat(-269, 6400));
        assert_eq!(a0.coeff(6, 0), rat(1, 50));
        assert_eq!(a0.coeff(6, 1), rat(-9, 400));
        let a8 = state.u[2].cos_coeff(8);
        assert_eq!(a8.coeff(2, 0), rat(247, 78400));
        assert_eq!(a8.coeff(4, 0), rat(2293, 313600));
        assert_eq!(a8.coeff(6, 0), rat(-9, 2450));
        assert_eq!(a8.coeff(6, 1), rat(81, 2800));
        assert_eq!(a8.coeff(8, 0), rat(-2227, 313600));
    }

    #[test]
    fn run_zero_g_gives_unperturbed() {
        let state = run(ThetaField::zero(), 4, FreeCoefficients::none()).unwrap();
        for k in 1..=4 {
            assert!(state.u[k].is_zero(), "u_{k} nonzero");
            assert!(state.w[k].is_zero(), "w_{k} nonzero");
        }
        assert_eq!(state.u[0], HierarchyState::u0());
    }

    #[test]
    fn run_prefix_stability() {
        let one = sec8_state(1);
        let two = sec8_state(2);
        assert_eq!(one.u[1], two.u[1]);
        assert_eq!(one.w[1], two.w[1]);
        assert_eq!(one.dirichlet_targets[1], two.dirichlet_targets[1]);
    }

    #[test]
    fn run_invariants_through_k4() {
        let state = sec8_state(4);
        for k in 1..=4 {
            // hierarchy equation
            let residual = state.u[k]
                .laplacian()
                .sub(&state.w[k].product(&state.u[0]))
                .sub(&forcing(&state, k).unwrap());
            assert!(residual.is_zero(), "hierarchy residual nonzero at {k}");
            // boundary closure
            assert_eq!(state.u[k].boundary_deriv(0), state.dirichlet_targets[k]);
            assert_eq!(state.u[k].boundary_deriv(1), state.neumann_targets[k]);
            // origin boundedness
            assert!(state.u[k].bounded_at_origin());
            // mode support within multiples of 4
            for n in state.u[k].support() {
                assert!(n % 4 == 0 && n <= 4 * k as u32, "mode {n} at order {k}");
            }
        }
    }

    #[test]
    fn truncated_eval_matches_independent_evaluator() {
        // u^[2] at (0.5, 0.3), mu = 0.25, against a separately coded
        // evaluation of the published closed forms
        let state = sec8_state(2);
        let (mu, r, th): (f64, f64, f64) = (0.25, 0.5, 0.3);
        let u0 = (1.0 - r * r) / 4.0;
        let u1 = r * r / 40.0 * (9.0 * r * r * r.ln() - 5.0 * r * r + 6.0) * (4.0 * th).cos();
        let a0 = -73.0 / 6400.0 + 53.0 / 1600.0 * r.powi(2) - 269.0 / 6400.0 * r.powi(4)
            + r.powi(6) / 50.0
            - 9.0 / 400.0 * r.powi(6) * r.ln();
        let a8 = 247.0 / 78400.0 * r.powi(2) + 2293.0 / 313600.0 * r.powi(4)
            - 9.0 / 2450.0 * r.powi(6)
            + 81.0 / 2800.0 * r.powi(6) * r.ln()
            - 2227.0 / 313600.0 * r.powi(8);
        let u2 = a0 + a8 * (8.0 * th).cos();
        let oracle = u0 + mu * u1 + mu * mu * u2;
        let got = state.eval_u_truncated(2, mu, r, th).unwrap();
        assert!((got - oracle).abs() < 1e-12, "got {got}, oracle {oracle}");
    }

    #[test]
    fn boundary_trace_of_u2_vanishes_to_order_two() {
        // u^[2](1 + mu g, t) = O(mu^3) sampled numerically
        let state = sec8_state(2);
        let mu = 1e-3;
        let mut sup: f64 = 0.0;
        for i in 0..64 {
            let t = 2.0 * std::f64::consts::PI * (i as f64) / 64.0;
            let r = 1.0 + mu * state.g.eval(t);
            sup = sup.max(state.eval_u_truncated(2, mu, r, t).unwrap().abs());
        }
        assert!(sup < 1e-8, "boundary trace too large: {sup}");
    }

    #[test]
    fn free_coefficients_decay_check() {
        let mut free = FreeCoefficients {
            m_max: 1,
            gamma: rat(1, 1),
            ..Default::default()
        };
        free.a_free.insert((2, 1), rat(1, 100));
        assert!(free.validate_decay(0.5).is_ok());
        free.a_free.insert((6, 1), rat(1, 2));
        assert!(free.validate_decay(1.0).is_err());
    }

    #[test]
    fn run_with_free_coefficients_still_closes() {
        let mut free = FreeCoefficients {
            m_max: 2,
            gamma: rat(1, 1),
            ..Default::default()
        };
        free.a_free.insert((4, 1), rat(1, 100));
        free.a_free.insert((4, 2), rat(-1, 200));
        free.b_free.insert((4, 1), rat(1, 50));
        let state = run(g_example(), 2, free).unwrap();
        for k in 1..=2 {
            assert_eq!(state.u[k].boundary_deriv(0), state.dirichlet_targets[k]);
            assert_eq!(state.u[k].boundary_deriv(1), state.neumann_targets[k]);
            let residual = state.u[k]
                .laplacian()
                .sub(&state.w[k].product(&state.u[0]))
                .sub(&forcing(&state, k).unwrap());
            assert!(residual.is_zero());
        }
        // M > 0 makes the potential radially dependent
        assert!(state.w[1].cos_coeff(4).term_count() > 1);
    }
}
