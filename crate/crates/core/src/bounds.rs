//! Quantitative machinery: scheme constants, majorizing sequences, the
//! Catalan closed form, exponential envelopes, optimal truncation order and
//! the super-polynomial error constants.
//!
//! Scalar constants are plain `f64` (they only feed inequalities with wide
//! slack); the recurrence sequences are exact rationals so the demo table
//! reproduces digit for digit.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fourier::{FourierField, ThetaField};
use crate::rational::{binomial, format_rat, rat_to_f64, Rat};

pub const E: f64 = std::f64::consts::E;

/// Analyticity radii, decay budget and normalisation depth.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SchemeParams {
    pub rho: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub k: u32,
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParams(format!("rho = {} not in (0,1]", self.rho)));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "sigma = {} not in (0,1]",
                self.sigma
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParams("gamma must be >= 0".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidParams("K must be >= 1".into()));
        }
        Ok(())
    }
}

/// The per-depth constants of the two coupled recurrences.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct SchemeConstants {
    /// `M = exp(4K/(e rho))`.
    pub m_cal: f64,
    pub w: [f64; 3],
    pub u: [f64; 3],
    /// `Z_i = max(W_i, U_i)`; always equals `U_i` here.
    pub z: [f64; 3],
    /// `a = Z_1 + Z_2 Z_0` with `Z_0 = 1`.
    pub a: f64,
    /// `b = Z_2 + Z_3`.
    pub b: f64,
}

/// Scheme constants at depth `K`.
pub fn scheme_constants(p: &SchemeParams) -> Result<SchemeConstants> {
    p.validate()?;
    let (rho, sigma, gamma, kk) = (p.rho, p.sigma, p.gamma, p.k as f64);
    let m_cal = (4.0 * kk / (E * rho)).exp();

    let quad = 128.0 * kk * kk / (E * E * sigma * sigma) + 48.0 * kk / (E * sigma) + 16.0;
    let cubic = 3456.0 * kk.powi(3) / (E.powi(3) * sigma.powi(3))
        + 768.0 * kk * kk / (E * E * sigma * sigma)
        + 64.0 * kk / (E * sigma);

    let w1 = 3.0 * (quad + 4.0 * gamma);
    let w2 = 3.0 * m_cal * (rho / sigma + m_cal * (kk + 1.0)) * quad + 3.0 * m_cal * cubic;
    let w3 = 3.0 * (4.0 * kk / (E * sigma) + 8.0);

    let u1 = w1 + 6.0;
    let u2 = w2 + 6.0 * m_cal * (1.0 + sigma / rho + m_cal * (kk + 1.0));
    let u3 = w3 + 6.0;

    let z = [w1.max(u1), w2.max(u2), w3.max(u3)];
    Ok(SchemeConstants {
        m_cal,
        w: [w1, w2, w3],
        u: [u1, u2, u3],
        z,
        a: z[0] + z[1],
        b: z[1] + z[2],
    })
}

/// The four coupled sequences, exact.
#[derive(Clone, Debug)]
pub struct SequenceTable {
    pub u: Vec<Rat>,
    pub w: Vec<Rat>,
    pub z: Vec<Rat>,
    pub z_tilde: Vec<Rat>,
    pub a: Rat,
    pub b: Rat,
}

impl serde::Serialize for SequenceTable {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let strings = |v: &[Rat]| -> Vec<String> { v.iter().map(format_rat).collect() };
        let mut st = ser.serialize_struct("SequenceTable", 6)?;
        st.serialize_field("u", &strings(&self.u))?;
        st.serialize_field("w", &strings(&self.w))?;
        st.serialize_field("z", &strings(&self.z))?;
        st.serialize_field("z_tilde", &strings(&self.z_tilde))?;
        st.serialize_field("a", &format_rat(&self.a))?;
        st.serialize_field("b", &format_rat(&self.b))?;
        st.end()
    }
}

/// Run the recurrence system
/// `W_k = W1 + W2 sum_{j<k} U_j + W3 sum_{j=1}^{k-1} W_j U_{k-j}` (and the
/// same shape for `U_k`), the majorant `Z` with componentwise-max constants,
/// and the quadratic majorant `Z~_k = a + b sum Z~_j Z~_{k-j}`.
pub fn recurrence_sequences(w_consts: &[Rat; 3], u_consts: &[Rat; 3], k_max: usize) -> SequenceTable {
    let z_consts: Vec<Rat> = (0..3)
        .map(|i| {
            if w_consts[i] >= u_consts[i] {
                w_consts[i].clone()
            } else {
                u_consts[i].clone()
            }
        })
        .collect();
    let z0 = Rat::one(); // max(W_0, U_0) = U_0 = 1
    let a = &z_consts[0] + &z_consts[1] * &z0;
    let b = &z_consts[1] + &z_consts[2];

    let mut u = vec![Rat::one()];
    let mut w = vec![Rat::zero()];
    let mut z = vec![z0.clone()];
    let mut zt = vec![z0];

    for k in 1..=k_max {
        let sum_u: Rat = u[..k].iter().sum();
        let conv: Rat = (1..k).map(|j| &w[j] * &u[k - j]).sum();
        w.push(&w_consts[0] + &w_consts[1] * &sum_u + &w_consts[2] * &conv);
        u.push(&u_consts[0] + &u_consts[1] * &sum_u + &u_consts[2] * &conv);

        let sum_z: Rat = z[..k].iter().sum();
        let conv_z: Rat = (1..k).map(|j| &z[j] * &z[k - j]).sum();
        z.push(&z_consts[0] + &z_consts[1] * &sum_z + &z_consts[2] * &conv_z);

        let conv_t: Rat = (1..k).map(|j| &zt[j] * &zt[k - j]).sum();
        zt.push(&a + &b * &conv_t);
    }
    SequenceTable {
        u,
        w,
        z,
        z_tilde: zt,
        a,
        b,
    }
}

/// Exact Catalan number `C(2m, m)/(m+1)`.
pub fn catalan(m: usize) -> BigInt {
    binomial(2 * m, m) / BigInt::from(m + 1)
}

/// Closed form of the quadratic majorant recurrence via its generating
/// function `G = a z/(1-z) + b G^2`:
///
/// `Z~_k = sum_{n=1}^{k} Cat(n-1) C(k-1, n-1) a^n b^{n-1}`.
pub fn catalan_closed_form(a: &Rat, b: &Rat, k: usize) -> Rat {
    assert!(k >= 1, "closed form defined for k >= 1");
    let mut acc = Rat::zero();
    let mut a_pow = a.clone();
    let mut b_pow = Rat::one();
    for n in 1..=k {
        let c = Rat::from_integer(catalan(n - 1) * binomial(k - 1, n - 1));
        acc += c * &a_pow * &b_pow;
        a_pow *= a;
        b_pow *= b;
    }
    acc
}

/// K-independent envelope data for `a, b <= B exp(2 alpha K)`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Envelope {
    /// Cubic coefficients `A_0..A_3` of the a-polynomial.
    pub a_coeffs: [f64; 4],
    /// Cubic coefficients `B_0..B_3` of the b-polynomial.
    pub b_coeffs: [f64; 4],
    /// Collected display value of `Theta`.
    pub theta: f64,
    /// `max(sum A_j, sum B_j)` recomputed from the coefficients.
    pub theta_componentwise: f64,
    /// True when the collected display dominates the componentwise max.
    pub theta_display_dominates: bool,
    /// `B = (27/8) Theta rho^3`.
    pub b_script: f64,
    /// `alpha = 4/(e rho)`.
    pub alpha: f64,
}

/// Envelope coefficients, `Theta` and `B` for given radii and `Gamma`.
pub fn exponential_envelope(rho: f64, sigma: f64, gamma: f64) -> Result<Envelope> {
    if rho <= 0.0 || sigma <= 0.0 || gamma < 0.0 {
        return Err(Error::InvalidParams(
            "rho, sigma must be positive; gamma nonnegative".into(),
        ));
    }
    let e = E;
    let a0 = (24.0 * gamma * rho * sigma
        + 24.0 * rho * rho
        + 30.0 * rho * sigma
        + 3.0 * sigma * sigma
        + 108.0 * rho * sigma)
        / (2.0 * rho * sigma);
    let a1 = (27.0 * e * sigma * sigma + 72.0 * rho + 168.0 * sigma + 288.0 * sigma)
        / (2.0 * e * sigma * sigma);
    let a2 = (36.0 * e * sigma * sigma + 96.0 * rho + 672.0 * sigma + 384.0 * sigma)
        / (e * e * sigma.powi(3));
    let a3 = (96.0 * e * sigma + 2592.0) / (e.powi(3) * sigma.powi(3));

    let b0 = (48.0 * rho * rho + 60.0 * rho * sigma + 6.0 * sigma * sigma + 30.0 * rho * sigma)
        / (rho * sigma);
    let b1 = (54.0 * e * sigma * sigma + 144.0 * rho + 336.0 * sigma + 12.0 * sigma)
        / (e * sigma * sigma);
    let b2 = (144.0 * e * sigma * sigma + 384.0 * rho + 2688.0 * sigma) / (e * e * sigma.powi(3));
    let b3 = (384.0 * e * sigma + 10368.0) / (e.powi(3) * sigma.powi(3));

    let theta_display = 144.0
        + 12.0 * gamma
        + 48.0 * rho / sigma
        + 6.0 * sigma / rho
        + 144.0 * rho / (e * sigma * sigma)
        + 492.0 / (e * sigma)
        + 384.0 * rho / (e * e * sigma.powi(3))
        + 3072.0 / (e * e * sigma * sigma)
        + 10368.0 / (e.powi(3) * sigma.powi(3));
    let sum_a = a0 + a1 + a2 + a3;
    let sum_b = b0 + b1 + b2 + b3;
    let theta_componentwise = sum_a.max(sum_b);
    let theta_display_dominates = theta_display >= theta_componentwise * (1.0 - 1e-12);

    Ok(Envelope {
        a_coeffs: [a0, a1, a2, a3],
        b_coeffs: [b0, b1, b2, b3],
        theta: theta_display,
        theta_componentwise,
        theta_display_dominates,
        b_script: 27.0 / 8.0 * theta_display * rho.powi(3),
        alpha: 4.0 / (E * rho),
    })
}

/// Optimal truncation data for the remainder envelope
/// `G(K) = (2 e B^2 mu)^K exp(4 alpha K^2)`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct OptimalOrder {
    /// Real stationary point `K_* = -log(2 e B^2 mu)/(8 alpha)`.
    pub k_star: f64,
    /// `K_opt = ceil(K_*)`.
    pub k_opt: u32,
    /// Envelope value `G(K_opt)`.
    pub g_value: f64,
}

/// Compute `K_*`, `K_opt` and `G(K_opt)`; requires `2 e B^2 mu < 1`.
pub fn optimal_order(b_script: f64, alpha: f64, mu: f64) -> Result<OptimalOrder> {
    if ![mu, alpha, b_script].iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(Error::InvalidParams(
            "mu, alpha, B must be positive".into(),
        ));
    }
    let q = 2.0 * E * b_script * b_script * mu;
    if q >= 1.0 {
        return Err(Error::MuTooLarge {
            mu,
            mu0: 1.0 / (2.0 * E * b_script * b_script),
        });
    }
    let k_star = -q.ln() / (8.0 * alpha);
    let k_opt = k_star.ceil().max(1.0) as u32;
    let g_value = envelope_g(q, alpha, k_opt as f64);
    Ok(OptimalOrder {
        k_star,
        k_opt,
        g_value,
    })
}

/// `G(K) = q^K exp(4 alpha K^2)` with `q = 2 e B^2 mu`.
pub fn envelope_g(q: f64, alpha: f64, k: f64) -> f64 {
    (k * q.ln() + 4.0 * alpha * k * k).exp()
}

/// The error constants of the final super-polynomial bound.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ErrorConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub mu0: f64,
}

/// `C_0 = exp(16/(e rho))`, `C_2 = e rho/64`, `C_3 = 2 e B^2`,
/// `C_1 = C_0 C_3^{-C_2 log C_3}`, `C_4 = 4 exp(4/(rho sigma)) C_3^{-7/16} C_1`,
/// `C_5 = exp(8/(rho sigma)) (rho/sigma + 8 + e rho/2) C_3^{-1} C_1`, and
/// `mu_0 = C_3^{-1} min(C_3^{-1}, exp(-32/(e rho))/2)`.
pub fn error_constants(rho: f64, sigma: f64, b_script: f64) -> Result<ErrorConstants> {
    if rho <= 0.0 || sigma <= 0.0 || b_script <= 0.0 {
        return Err(Error::InvalidParams("rho, sigma, B must be positive".into()));
    }
    let c0 = (16.0 / (E * rho)).exp();
    let c2 = E * rho / 64.0;
    let c3 = 2.0 * E * b_script * b_script;
    let log_c3 = c3.ln();
    let c1 = c0 * (-c2 * log_c3 * log_c3).exp();
    let c4 = 4.0 * (4.0 / (rho * sigma)).exp() * c3.powf(-7.0 / 16.0) * c1;
    let c5 = (8.0 / (rho * sigma)).exp() * (rho / sigma + 8.0 + E * rho / 2.0) / c3 * c1;
    let mu0 = (1.0 / c3) * (1.0 / c3).min(0.5 * (-32.0 / (E * rho)).exp());
    Ok(ErrorConstants {
        c0,
        c1,
        c2,
        c3,
        c4,
        c5,
        mu0,
    })
}

/// The super-polynomial factor `mu^{C_2 (log(1/mu) - 2 log C_3)}`.
pub fn super_poly_factor(mu: f64, c2: f64, c3: f64) -> f64 {
    let l = mu.ln();
    (-c2 * (l * l + 2.0 * l * c3.ln())).exp()
}

/// Final bound for the equation residual: `C_1 * factor(mu)`.
pub fn final_bound(mu: f64, consts: &ErrorConstants) -> f64 {
    consts.c1 * super_poly_factor(mu, consts.c2, consts.c3)
}

/// Rows `(mu, exp(-(log(1/mu))^2))` of the accuracy illustration.
pub fn smallness_table(mus: &[f64]) -> Vec<(f64, f64)> {
    mus.iter()
        .map(|&mu| {
            let l = (1.0 / mu).ln();
            (mu, (-l * l).exp())
        })
        .collect()
}

/// Left-hand sides and printed right-hand sides of the three geometric
/// prerequisite inequalities, for inspection. The sums are evaluated in
/// closed form.
pub fn prerequisite_margins(sigma: f64, k: u32) -> [(f64, f64); 3] {
    let kk = k as f64;
    // gap sigma/(2K) for the first, sigma/(4K) for the half-step ones
    let s0 = |q: f64| q / (1.0 - q);
    let s1 = |q: f64| q / (1.0 - q).powi(2);
    let s2 = |q: f64| q * (1.0 + q) / (1.0 - q).powi(3);
    let s3 = |q: f64| q * (1.0 + 4.0 * q + q * q) / (1.0 - q).powi(4);

    let q1 = (-sigma / (2.0 * kk)).exp();
    let lhs1 = 4.0 * s0(q1) + s1(q1);
    let rhs1 = 2.0 * kk / (E * sigma) + 4.0;

    let q2 = (-sigma / (4.0 * kk)).exp();
    let lhs2 = s2(q2) + 6.0 * s1(q2) + 8.0 * s0(q2);
    let rhs2 = 64.0 * kk * kk / (sigma * E).powi(2) + 24.0 * kk / (sigma * E) + 8.0;

    let lhs3 = s3(q2) + 6.0 * s2(q2) + 8.0 * s1(q2);
    let rhs3 = 1728.0 * kk.powi(3) / (sigma * E).powi(3)
        + 384.0 * kk * kk / (sigma * E).powi(2)
        + 32.0 * kk / (sigma * E);

    [(lhs1, rhs1), (lhs2, rhs2), (lhs3, rhs3)]
}

/// Sampling estimate of the weighted Fourier norm
/// `|a_0|_rho + sum_n (|a_n|_rho + |b_n|_rho) e^{n sigma}`,
/// where `|f|_rho` is the max modulus over the boundary of the
/// rho-neighbourhood of the radial interval `[0, r_max]` in the complex
/// plane. An estimate, not a certified bound.
pub fn norm_estimate(
    field: &FourierField,
    rho: f64,
    sigma: f64,
    r_max: f64,
    n_samples: usize,
) -> f64 {
    let n_samples = n_samples.max(256);
    let radial_sup = |expr: &crate::radial::RadialExpr| -> f64 {
        let mut sup: f64 = 0.0;
        let quarter = n_samples / 4;
        for i in 0..quarter {
            // left semicircle around 0
            let phi = std::f64::consts::PI * (0.5 + (i as f64) / (quarter as f64));
            let z = Complex64::from_polar(rho, phi);
            sup = sup.max(expr.eval_complex(z).norm());
            // right semicircle around r_max
            let phi2 = -std::f64::consts::PI / 2.0
                + std::f64::consts::PI * (i as f64) / (quarter as f64);
            let z2 = Complex64::new(r_max, 0.0) + Complex64::from_polar(rho, phi2);
            sup = sup.max(expr.eval_complex(z2).norm());
            // horizontal segments
            let t = r_max * (i as f64) / (quarter as f64);
            sup = sup.max(expr.eval_complex(Complex64::new(t, rho)).norm());
            sup = sup.max(expr.eval_complex(Complex64::new(t, -rho)).norm());
        }
        sup
    };
    let mut acc = radial_sup(&field.avg);
    for (&n, e) in &field.cos {
        acc += radial_sup(e) * (n as f64 * sigma).exp();
    }
    for (&n, e) in &field.sin {
        acc += radial_sup(e) * (n as f64 * sigma).exp();
    }
    acc
}

/// Largest sigma with `norm <= bound` for the two readings of the
/// smallness hypothesis on `g'`: the weighted Fourier norm and the
/// strip supremum (sampled on the line `Im theta = sigma`).
pub fn sigma_admissibility(g: &ThetaField, bound: f64) -> (f64, f64) {
    let gp = g.dtheta();
    let fourier_norm = |sigma: f64| -> f64 {
        let (a0, cos, sin) = gp.extract_coeffs();
        let mut acc = rat_to_f64(&a0).abs();
        for (n, c) in cos.iter().chain(sin.iter()) {
            acc += rat_to_f64(c).abs() * (*n as f64 * sigma).exp();
        }
        acc
    };
    let strip_sup = |sigma: f64| -> f64 {
        let (a0, cos, sin) = gp.extract_coeffs();
        let mut sup: f64 = 0.0;
        for i in 0..512 {
            let t = 2.0 * std::f64::consts::PI * (i as f64) / 512.0;
            let theta = Complex64::new(t, sigma);
            let mut v = Complex64::new(rat_to_f64(&a0), 0.0);
            for (&n, c) in &cos {
                v += (theta * n as f64).cos() * rat_to_f64(c);
            }
            for (&n, c) in &sin {
                v += (theta * n as f64).sin() * rat_to_f64(c);
            }
            sup = sup.max(v.norm());
        }
        sup
    };
    let bisect = |f: &dyn Fn(f64) -> f64| -> f64 {
        let (mut lo, mut hi) = (0.0f64, 4.0f64);
        if f(lo) > bound {
            return 0.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    (bisect(&fourier_norm), bisect(&strip_sup))
}

/// Everything the report command emits.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundReport {
    pub rho: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub mu: f64,
    pub envelope: Envelope,
    pub k_star: f64,
    pub k_opt: u32,
    pub g_at_k_opt: f64,
    pub constants_at_k_opt: SchemeConstants,
    pub error_constants: ErrorConstants,
    /// `C_1 * mu^{C_2(...)}`: equation-residual bound at the given mu.
    pub bound_resolvability: f64,
    /// `C_4 * mu^{C_2(...)}`.
    pub bound_dirichlet: f64,
    /// `C_5 * mu^{C_2(...)}`.
    pub bound_neumann: f64,
    /// Admissible sigma per the Fourier-norm reading of the g' hypothesis.
    pub sigma_max_fourier: Option<f64>,
    /// Admissible sigma per the strip-supremum reading.
    pub sigma_max_strip: Option<f64>,
    /// Sampling estimate of the g norm (labelled estimate, not certified).
    pub norm_g_estimate: Option<f64>,
}

/// Assemble the full report: envelope first (K-independent), then the
/// optimal order, then the scheme constants instantiated at `K = K_opt`.
pub fn bound_report(
    rho: f64,
    sigma: f64,
    gamma: f64,
    mu: f64,
    g: Option<&ThetaField>,
) -> Result<BoundReport> {
    let envelope = exponential_envelope(rho, sigma, gamma)?;
    let consts = error_constants(rho, sigma, envelope.b_script)?;
    if mu > consts.mu0 {
        return Err(Error::MuTooLarge { mu, mu0: consts.mu0 });
    }
    let opt = optimal_order(envelope.b_script, envelope.alpha, mu)?;
    let scheme = scheme_constants(&SchemeParams {
        rho,
        sigma,
        gamma,
        k: opt.k_opt,
    })?;
    let factor = super_poly_factor(mu, consts.c2, consts.c3);
    let (sf, ss, ng) = match g {
        Some(g) => {
            let (f, s) = sigma_admissibility(g, 0.25);
            let n = norm_estimate(g.as_field(), rho, sigma, 1.0 + mu, 256);
            (Some(f), Some(s), Some(n))
        }
        None => (None, None, None),
    };
    Ok(BoundReport {
        rho,
        sigma,
        gamma,
        mu,
        envelope,
        k_star: opt.k_star,
        k_opt: opt.k_opt,
        g_at_k_opt: opt.g_value,
        constants_at_k_opt: scheme,
        error_constants: consts,
        bound_resolvability: consts.c1 * factor,
        bound_dirichlet: consts.c4 * factor,
        bound_neumann: consts.c5 * factor,
        sigma_max_fourier: sf,
        sigma_max_strip: ss,
        norm_g_estimate: ng,
    })
}

/// Render the demo sequence table as aligned text columns.
pub fn render_table(table: &SequenceTable) -> String {
    let mut out = String::from("k  U_k  W_k  Ztilde_k\n");
    for k in 0..table.u.len() {
        out.push_str(&format!(
            "{}  {}  {}  {}\n",
            k,
            format_rat(&table.u[k]),
            format_rat(&table.w[k]),
            format_rat(&table.z_tilde[k]),
        ));
    }
    out
}

/// Big-integer-exact check that a rational is the integer `n`.
pub fn rat_is_int(r: &Rat, n: i64) -> bool {
    r.denom().is_one() && r.numer() == &BigInt::from(n)
}
