//! Defects of a truncated pair: exact mu-series and numeric sups.
//!
//! Three residuals measure how far `(u^[k], w^[k])` is from solving the
//! problem: the equation residual `R = -Δu + mu w u - 1`, the boundary
//! trace `E_D = u|_{r = 1 + mu g}`, and the flattened Neumann residual
//! `E_N`. Each has two independent symbolic routes:
//!
//! - a *direct* expansion that substitutes the truncated series and Taylor
//!   expansions around r = 1 and collects powers of mu;
//! - the *closed-form* tail formulas, which start at mu^{k+1}.
//!
//! The two must agree term by term, and the direct coefficients through
//! order k must vanish identically. Numeric sups over polar grids feed the
//! scaling plots.

use crate::error::{Error, Result};
use crate::fourier::{FourierField, ThetaField};
use crate::hierarchy::{flattening_coefficient, HierarchyState};
use crate::rational::{factorial, rat_int, rat_to_f64, Rat};

/// Polynomial (or truncated) series in mu with exact field coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MuSeries {
    coeffs: Vec<FourierField>,
}

impl MuSeries {
    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![FourierField::zero(); order + 1],
        }
    }

    /// Highest represented power of mu.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, j: usize) -> &FourierField {
        &self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[FourierField] {
        &self.coeffs
    }

    fn accumulate(&mut self, j: usize, f: &FourierField) {
        if j < self.coeffs.len() && !f.is_zero() {
            self.coeffs[j] = self.coeffs[j].add(f);
        }
    }

    /// Indices of nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| i)
            .collect()
    }

    /// True when coefficients `0..=k` are all exactly zero.
    pub fn vanishes_through(&self, k: usize) -> bool {
        self.coeffs.iter().take(k + 1).all(|c| c.is_zero())
    }

    /// Evaluate the truncated series at a numeric `(mu, r, theta)`.
    pub fn eval(&self, mu: f64, r: f64, theta: f64) -> Result<f64> {
        let mut acc = 0.0;
        let mut mu_pow = 1.0;
        for c in &self.coeffs {
            if !c.is_zero() {
                acc += mu_pow * c.eval(r, theta)?;
            }
            mu_pow *= mu;
        }
        Ok(acc)
    }
}

/// Numeric sup-norms of the three defects on a polar grid.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DefectReport {
    pub mu: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// Sup of the equation residual over the deformed disk.
    pub sup_r: f64,
    /// Sup of `|u|` on the deformed boundary.
    pub sup_ed: f64,
    /// Sup of the raw mismatch `|∂_ν u - 1/2|` on the boundary.
    pub sup_en: f64,
    /// Least-squares slope of `log sup_ed` vs `log mu`, filled by sweep
    /// drivers (see [`fit_log_slope`]); absent for a single-mu report.
    pub slope_fit: Option<f64>,
}

/// Direct expansion of `-Δu^[k] + mu w^[k] u^[k] - 1` in powers of mu.
///
/// Exact polynomial of degree 2k; coefficients through order k vanish.
pub fn resolvability_series(state: &HierarchyState, k: usize) -> Result<MuSeries> {
    ensure_order(state, k)?;
    let mut series = MuSeries::zeros(2 * k);
    series.accumulate(0, &state.u[0].laplacian().neg().sub(&FourierField::one()));
    for j in 1..=k {
        series.accumulate(j, &state.u[j].laplacian().neg());
    }
    for j in 1..=k {
        for i in 0..=k {
            series.accumulate(j + i, &state.w[j].product(&state.u[i]));
        }
    }
    Ok(series)
}

/// Closed-form resolvability tail `sum_{n=k+1}^{2k} mu^n sum_j w_{n-j} u_j`.
pub fn resolvability_tail(state: &HierarchyState, k: usize) -> Result<MuSeries> {
    ensure_order(state, k)?;
    let mut series = MuSeries::zeros(2 * k);
    for n in (k + 1)..=(2 * k) {
        for j in (n - k)..=k {
            series.accumulate(n, &state.w[n - j].product(&state.u[j]));
        }
    }
    Ok(series)
}

/// Direct mu-series of the boundary trace `u^[k](1 + mu g, θ)` through
/// `order`.
pub fn dirichlet_series(state: &HierarchyState, k: usize, order: usize) -> Result<MuSeries> {
    ensure_order(state, k)?;
    let mut series = MuSeries::zeros(order);
    let mut g_pow = ThetaField::one();
    let mut powers = Vec::with_capacity(order + 1);
    for _ in 0..=order {
        powers.push(g_pow.clone());
        g_pow = g_pow.product(&state.g);
    }
    for m in 0..=k.min(order) {
        for (h, g_pow) in powers.iter().enumerate().take(order - m + 1) {
            let coef = Rat::new(1.into(), factorial(h));
            let deriv = state.u[m].boundary_deriv(h);
            let term = g_pow.product(&deriv).scale(&coef);
            series.accumulate(m + h, term.as_field());
        }
    }
    Ok(series)
}

/// Closed-form Dirichlet tail
/// `sum_{j>k} mu^j sum_{m=j-k}^{j} (g^m/m!) ∂_r^m u_{j-m}(1,θ)`.
pub fn dirichlet_tail(state: &HierarchyState, k: usize, order: usize) -> Result<MuSeries> {
    ensure_order(state, k)?;
    let mut series = MuSeries::zeros(order);
    for j in (k + 1)..=order {
        for m in (j - k)..=j {
            let coef = Rat::new(1.into(), factorial(m));
            let deriv = state.u[j - m].boundary_deriv(m);
            let term = state.g.pow(m).product(&deriv).scale(&coef);
            series.accumulate(j, term.as_field());
        }
    }
    Ok(series)
}

/// Direct mu-series of the flattened Neumann residual
/// `mu g' ∂_θ u(1+mu g) - (1+mu g)^2 ∂_r u(1+mu g) - C (1+mu g) sqrt(...)`
/// for the truncation `u^[k]`, through `order`.
pub fn neumann_series(state: &HierarchyState, k: usize, order: usize) -> Result<MuSeries> {
    ensure_order(state, k)?;
    let g = &state.g;
    let gp = g.dtheta();
    let mut series = MuSeries::zeros(order);

    let mut powers = Vec::with_capacity(order + 1);
    let mut g_pow = ThetaField::one();
    for _ in 0..=order {
        powers.push(g_pow.clone());
        g_pow = g_pow.product(g);
    }

    for m in 0..=k.min(order) {
        let du_theta = state.u[m].dtheta();
        for (h, g_pow) in powers.iter().enumerate().take(order - m + 1) {
            let coef = Rat::new(1.into(), factorial(h));
            // mu g' * compose(∂_θ u_m): lands at power m + h + 1
            if m + h < order {
                let term = gp
                    .product(g_pow)
                    .product(&du_theta.boundary_deriv(h))
                    .scale(&coef);
                series.accumulate(m + h + 1, term.as_field());
            }
            // -(1 + mu g)^0,1,2 * compose(∂_r u_m)
            let dr = state.u[m].boundary_deriv(h + 1);
            let base = g_pow.product(&dr).scale(&coef);
            series.accumulate(m + h, &base.neg().into_field());
            if m + h < order {
                let two_g = g.scale(&rat_int(2));
                series.accumulate(m + h + 1, &two_g.product(&base).neg().into_field());
            }
            if m + h + 2 <= order {
                let g2 = g.product(g);
                series.accumulate(m + h + 2, &g2.product(&base).neg().into_field());
            }
        }
    }
    // - C sum_j mu^j C_j(θ)
    for j in 0..=order {
        let cj = flattening_coefficient(g, j).scale(&state.c_const);
        series.accumulate(j, &cj.neg().into_field());
    }
    Ok(series)
}

/// Closed-form Neumann tail: the displayed four-sum formula with
/// `u_h ≡ 0` for `h > k`.
pub fn neumann_tail(state: &HierarchyState, k: usize, order: usize) -> Result<MuSeries> {
    ensure_order(state, k)?;
    let g = &state.g;
    let gp = g.dtheta();
    let mut series = MuSeries::zeros(order);
    for j in (k + 1)..=order {
        let mut acc = ThetaField::zero();
        // g' sum_{h=0}^{min(j-1,k)} g^{j-1-h}/(j-1-h)! ∂_r^{j-1-h} ∂_θ u_h
        for h in 0..=k.min(j - 1) {
            let pow = j - 1 - h;
            let coef = Rat::new(1.into(), factorial(pow));
            let deriv = state.u[h].dtheta().boundary_deriv(pow);
            acc = acc.add(&gp.product(&g.pow(pow)).product(&deriv).scale(&coef));
        }
        // - sum_{h=0}^{min(j,k)} g^{j-h}/(j-h)! ∂_r^{j-h+1} u_h
        for h in 0..=k.min(j) {
            let pow = j - h;
            let coef = Rat::new(1.into(), factorial(pow));
            let deriv = state.u[h].boundary_deriv(pow + 1);
            acc = acc.sub(&g.pow(pow).product(&deriv).scale(&coef));
        }
        // - 2g sum_{h=0}^{min(j-1,k)} g^{j-1-h}/(j-1-h)! ∂_r^{j-h} u_h
        for h in 0..=k.min(j - 1) {
            let coef = Rat::new(2.into(), factorial(j - 1 - h));
            let deriv = state.u[h].boundary_deriv(j - h);
            acc = acc.sub(&g.pow(j - h).product(&deriv).scale(&coef));
        }
        // - g^2 sum_{h=0}^{min(j-2,k)} g^{j-2-h}/(j-2-h)! ∂_r^{j-h-1} u_h
        if j >= 2 {
            for h in 0..=k.min(j - 2) {
                let coef = Rat::new(1.into(), factorial(j - 2 - h));
                let deriv = state.u[h].boundary_deriv(j - h - 1);
                acc = acc.sub(&g.pow(j - h).product(&deriv).scale(&coef));
            }
        }
        // - C C_j
        acc = acc.sub(&flattening_coefficient(g, j).scale(&state.c_const));
        series.accumulate(j, acc.as_field());
    }
    Ok(series)
}

/// All three closed-form tails at once.
pub fn closed_form_remainders(
    state: &HierarchyState,
    k: usize,
    order: usize,
) -> Result<(MuSeries, MuSeries, MuSeries)> {
    Ok((
        resolvability_tail(state, k)?,
        dirichlet_tail(state, k, order)?,
        neumann_tail(state, k, order)?,
    ))
}

/// Numeric sups of the three defects for the order-k truncation at a fixed
/// mu, on an `n_r x n_theta` polar grid of the deformed disk.
#[allow(clippy::needless_range_loop)] // parallel mu-power walks over several field arrays
pub fn numeric_defects(
    state: &HierarchyState,
    k: usize,
    mu: f64,
    n_r: usize,
    n_theta: usize,
) -> Result<DefectReport> {
    ensure_order(state, k)?;
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::DomainError(format!("mu = {mu} outside [0, 1]")));
    }
    if n_r < 8 || n_theta < 8 {
        return Err(Error::DomainError("grid sizes must be >= 8".into()));
    }

    // exact fields needed pointwise
    let lap: Vec<FourierField> = state.u[..=k].iter().map(|u| u.laplacian()).collect();
    let dr: Vec<FourierField> = state.u[..=k].iter().map(|u| u.ddr()).collect();
    let dt: Vec<FourierField> = state.u[..=k].iter().map(|u| u.dtheta()).collect();
    let c = rat_to_f64(&state.c_const);

    let mut sup_r: f64 = 0.0;
    let mut sup_ed: f64 = 0.0;
    let mut sup_en: f64 = 0.0;

    for it in 0..n_theta {
        let theta = 2.0 * std::f64::consts::PI * (it as f64) / (n_theta as f64);
        let gt = state.g.eval(theta);
        let gpt = state.g.dtheta().eval(theta);
        let r_edge = 1.0 + mu * gt;

        // equation residual over the radius
        for ir in 0..n_r {
            let r = r_edge * (ir as f64) / ((n_r - 1) as f64);
            let mut lap_u = 0.0;
            let mut u_val = 0.0;
            let mut mu_pow = 1.0;
            for j in 0..=k {
                lap_u += mu_pow * lap[j].eval(r, theta)?;
                u_val += mu_pow * state.u[j].eval(r, theta)?;
                mu_pow *= mu;
            }
            let mut w_val = 0.0;
            let mut mp = 1.0;
            for j in 1..=k {
                w_val += mp * state.w[j].eval(r, theta)?;
                mp *= mu;
            }
            let residual = -lap_u + mu * w_val * u_val - 1.0;
            sup_r = sup_r.max(residual.abs());
        }

        // boundary defects
        let u_b = state.eval_u_truncated(k, mu, r_edge, theta)?;
        sup_ed = sup_ed.max(u_b.abs());

        let mut ur = 0.0;
        let mut ut = 0.0;
        let mut mp = 1.0;
        for j in 0..=k {
            ur += mp * dr[j].eval(r_edge, theta)?;
            ut += mp * dt[j].eval(r_edge, theta)?;
            mp *= mu;
        }
        let one_pg = 1.0 + mu * gt;
        let metric = (one_pg * one_pg + mu * mu * gpt * gpt).sqrt();
        let normal_deriv = (-one_pg * ur + mu / one_pg * gpt * ut) / metric;
        sup_en = sup_en.max((normal_deriv - c).abs());
    }

    Ok(DefectReport {
        mu,
        n_r,
        n_theta,
        sup_r,
        sup_ed,
        sup_en,
        slope_fit: None,
    })
}

/// Symbolically verify a computed state: hierarchy equations, boundary
/// closure, origin boundedness, defect vanishing through the state's order
/// and two-route tail agreement through `order + tail_extra`. Returns a
/// list of violated identities, empty when everything holds.
pub fn validate(state: &HierarchyState, tail_extra: usize) -> Vec<String> {
    let mut violations = Vec::new();
    let k = state.order();
    for j in 1..=k {
        match crate::hierarchy::forcing(state, j) {
            Ok(f) => {
                let residual = state.u[j]
                    .laplacian()
                    .sub(&state.w[j].product(&state.u[0]))
                    .sub(&f);
                if !residual.is_zero() {
                    violations.push(format!("hierarchy equation at order {j}"));
                }
            }
            Err(e) => violations.push(format!("forcing at order {j}: {e}")),
        }
        if state.u[j].boundary_deriv(0) != state.dirichlet_targets[j] {
            violations.push(format!("Dirichlet closure u_{j}(1,t)"));
        }
        if state.u[j].boundary_deriv(1) != state.neumann_targets[j] {
            violations.push(format!("Neumann closure d_r u_{j}(1,t)"));
        }
        if !state.u[j].bounded_at_origin() {
            violations.push(format!("u_{j} unbounded at origin"));
        }
    }
    let order = k + tail_extra;
    let checks: [(&str, Result<(MuSeries, MuSeries)>); 3] = [
        (
            "resolvability",
            resolvability_series(state, k).and_then(|d| Ok((d, resolvability_tail(state, k)?))),
        ),
        (
            "Dirichlet",
            dirichlet_series(state, k, order).and_then(|d| Ok((d, dirichlet_tail(state, k, order)?))),
        ),
        (
            "Neumann",
            neumann_series(state, k, order).and_then(|d| Ok((d, neumann_tail(state, k, order)?))),
        ),
    ];
    for (name, pair) in checks {
        match pair {
            Ok((direct, tail)) => {
                if !direct.vanishes_through(k) {
                    violations.push(format!("{name} defect has a nonzero coefficient <= mu^{k}"));
                }
                for j in 0..=direct.order().min(tail.order()) {
                    if direct.coeff(j) != tail.coeff(j) {
                        violations.push(format!("{name} direct/closed-form mismatch at mu^{j}"));
                    }
                }
            }
            Err(e) => violations.push(format!("{name} series: {e}")),
        }
    }
    violations
}

/// Least-squares slope of `log sup` against `log mu`.
pub fn fit_log_slope(points: &[(f64, f64)]) -> f64 {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(mu, s)| *mu > 0.0 && *s > 0.0)
        .map(|(mu, s)| (mu.ln(), s.ln()))
        .collect();
    let n = data.len() as f64;
    let sx: f64 = data.iter().map(|(x, _)| x).sum();
    let sy: f64 = data.iter().map(|(_, y)| y).sum();
    let sxx: f64 = data.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = data.iter().map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn ensure_order(state: &HierarchyState, k: usize) -> Result<()> {
    if k == 0 || k > state.order() {
        return Err(Error::MissingOrder {
            wanted: k,
            have: state.order(),
        });
    }
    Ok(())
}
