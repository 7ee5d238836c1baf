//! Configuration parsing and command implementations behind the `torsion`
//! binary. Kept in a library so the commands are callable from tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use torsion_core::bounds::{self, BoundReport};
use torsion_core::defects;
use torsion_core::hierarchy::{self, FreeCoefficients, HierarchyState};
use torsion_core::rational::parse_rat;
use torsion_core::ThetaField;

/// Exit codes: 0 ok, 2 config error, 3 assertion/identity failure.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Assertion(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Assertion(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Assertion(_) => EXIT_ASSERTION,
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn assertion_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Assertion(e.to_string())
}

pub type CliResult<T> = Result<T, CliError>;

/// One Fourier mode of the boundary profile, exact amplitudes as strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GMode {
    pub n: u32,
    #[serde(default = "zero_string")]
    pub cos: String,
    #[serde(default = "zero_string")]
    pub sin: String,
}

fn zero_string() -> String {
    "0".into()
}

/// A single free coefficient entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeEntry {
    /// "a" (cos side) or "b" (sin side).
    pub side: String,
    pub n: u32,
    pub m: usize,
    pub c: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_r: 64, n_theta: 128 }
    }
}

/// Problem configuration document. Rational inputs are strings so exact
/// values never pass through floats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub g_modes: Vec<GMode>,
    pub k: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub free_coeffs: Vec<FreeEntry>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

fn default_mu() -> f64 {
    0.25
}
fn default_rho() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    0.1733
}
fn default_gamma() -> f64 {
    0.0
}

impl ProblemConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ProblemConfig = serde_json::from_str(&text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.k < 1 {
            return Err(CliError::Config("k must be >= 1".into()));
        }
        if self.grid.n_r < 8 || self.grid.n_theta < 8 {
            return Err(CliError::Config("grid must be at least 8x8".into()));
        }
        for m in &self.g_modes {
            if m.n < 1 {
                return Err(CliError::Config("g modes must have n >= 1".into()));
            }
            parse_rat(&m.cos).map_err(config_err)?;
            parse_rat(&m.sin).map_err(config_err)?;
        }
        for f in &self.free_coeffs {
            if f.side != "a" && f.side != "b" {
                return Err(CliError::Config(format!("free side {:?} not a/b", f.side)));
            }
            if f.m < 1 || f.m > self.m {
                return Err(CliError::Config(format!(
                    "free coefficient m = {} outside 1..={}",
                    f.m, self.m
                )));
            }
            parse_rat(&f.c).map_err(config_err)?;
        }
        Ok(())
    }

    pub fn g_field(&self) -> CliResult<ThetaField> {
        let mut g = ThetaField::zero();
        for mode in &self.g_modes {
            let c = parse_rat(&mode.cos).map_err(config_err)?;
            let s = parse_rat(&mode.sin).map_err(config_err)?;
            g = g
                .add(&ThetaField::cos_mode(mode.n, c))
                .add(&ThetaField::sin_mode(mode.n, s));
        }
        Ok(g)
    }

    pub fn free(&self) -> CliResult<FreeCoefficients> {
        let mut free = FreeCoefficients {
            m_max: self.m,
            gamma: float_to_rat_ceil(self.gamma),
            ..Default::default()
        };
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for e in &self.free_coeffs {
            let c = parse_rat(&e.c).map_err(config_err)?;
            if e.side == "a" {
                a.insert((e.n, e.m), c);
            } else {
                b.insert((e.n, e.m), c);
            }
        }
        free.a_free = a;
        free.b_free = b;
        free.validate_decay(self.sigma).map_err(config_err)?;
        Ok(free)
    }

    pub fn run_hierarchy(&self, k_override: Option<usize>) -> CliResult<HierarchyState> {
        let k = k_override.unwrap_or(self.k);
        if k < 1 {
            return Err(CliError::Config("k must be >= 1".into()));
        }
        hierarchy::run(self.g_field()?, k, self.free()?).map_err(assertion_err)
    }

    fn out_dir(&self, flag: Option<&Path>) -> CliResult<PathBuf> {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| self.outputs.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

/// Decay budget as a rational with a small safety margin upward.
fn float_to_rat_ceil(x: f64) -> torsion_core::Rat {
    let scaled = (x * 1024.0).ceil() as i64;
    torsion_core::rational::rat(scaled.max(0), 1024)
}

fn write_artifact(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// `solve`: run the hierarchy, emit the exact state document plus a
/// human-readable summary. Returns the summary text.
pub fn cmd_solve(config: &ProblemConfig, out: Option<&Path>, k: Option<usize>) -> CliResult<String> {
    let state = config.run_hierarchy(k)?;
    let dir = config.out_dir(out)?;
    let doc = serde_json::to_string_pretty(&state).map_err(assertion_err)?;
    write_artifact(&dir.join("state.json"), &doc)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "orders computed: K = {}", state.order());
    let _ = writeln!(summary, "g = {}", state.g);
    for j in 1..=state.order() {
        let _ = writeln!(summary, "w_{j} = {}", state.w[j]);
        let _ = writeln!(summary, "u_{j} = {}", state.u[j]);
    }
    write_artifact(&dir.join("summary.txt"), &summary)?;
    Ok(summary)
}

/// `validate`: symbolic identity checks; error lists each violated identity.
pub fn cmd_validate(config: &ProblemConfig, k: Option<usize>) -> CliResult<String> {
    let state = config.run_hierarchy(k)?;
    let violations = defects::validate(&state, 2);
    if violations.is_empty() {
        let mut report = String::new();
        let _ = writeln!(
            report,
            "PASS: all symbolic identities hold exactly through order {}",
            state.order()
        );
        let _ = writeln!(
            report,
            "  hierarchy equations, boundary closure, defect vanishing through mu^{}",
            state.order()
        );
        let _ = writeln!(
            report,
            "  direct expansions equal closed-form tails through mu^{}",
            state.order() + 2
        );
        Ok(report)
    } else {
        Err(CliError::Assertion(format!(
            "FAIL: {} identity violation(s):\n{}",
            violations.len(),
            violations.join("\n")
        )))
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.12e}")
}

/// `defects`: CSV emissions for the boundary curves, the mu sweep and the
/// solution surface.
pub fn cmd_defects(
    config: &ProblemConfig,
    out: Option<&Path>,
    mu_flag: Option<f64>,
    grid: Option<(usize, usize)>,
    sweep: Option<(f64, f64, usize)>,
) -> CliResult<String> {
    let state = config.run_hierarchy(None)?;
    let k = state.order();
    let dir = config.out_dir(out)?;
    let mu = mu_flag.unwrap_or(config.mu);
    let (n_r, n_theta) = grid.unwrap_or((config.grid.n_r, config.grid.n_theta));

    // (theta, E_D(theta), E_N(theta)) at fixed mu
    let mut theta_csv = String::from("theta,e_dirichlet,e_neumann\n");
    let dr: Vec<_> = state.u.iter().map(|u| u.ddr()).collect();
    let dt: Vec<_> = state.u.iter().map(|u| u.dtheta()).collect();
    for i in 0..n_theta {
        let theta = 2.0 * std::f64::consts::PI * (i as f64) / (n_theta as f64);
        let gt = state.g.eval(theta);
        let gpt = state.g.dtheta().eval(theta);
        let r_edge = 1.0 + mu * gt;
        let u_b = state
            .eval_u_truncated(k, mu, r_edge, theta)
            .map_err(assertion_err)?;
        let mut ur = 0.0;
        let mut ut = 0.0;
        let mut mp = 1.0;
        for j in 0..=k {
            ur += mp * dr[j].eval(r_edge, theta).map_err(assertion_err)?;
            ut += mp * dt[j].eval(r_edge, theta).map_err(assertion_err)?;
            mp *= mu;
        }
        let one_pg = 1.0 + mu * gt;
        let metric = (one_pg * one_pg + mu * mu * gpt * gpt).sqrt();
        let normal = (-one_pg * ur + mu / one_pg * gpt * ut) / metric;
        let _ = writeln!(
            theta_csv,
            "{},{},{}",
            format_float(theta),
            format_float(u_b),
            format_float(normal - 0.5)
        );
    }
    write_artifact(&dir.join("defects_theta.csv"), &theta_csv)?;

    // structured single-mu report
    let mut fixed_report =
        defects::numeric_defects(&state, k, mu, n_r, n_theta).map_err(assertion_err)?;

    // (mu, sup_R, sup_ED, sup_EN) sweep
    let (lo, hi, n_sweep) = sweep.unwrap_or((1e-3, 0.5, 30));
    if !(lo > 0.0 && hi > lo) || n_sweep < 2 {
        return Err(CliError::Config(
            "sweep bounds must satisfy 0 < lo < hi, n >= 2".into(),
        ));
    }
    let mut sweep_csv = String::from("mu,sup_r,sup_ed,sup_en\n");
    let mut ed_points = Vec::with_capacity(n_sweep);
    for i in 0..n_sweep {
        let t = i as f64 / (n_sweep - 1) as f64;
        let mu_i = lo * (hi / lo).powf(t);
        let report =
            defects::numeric_defects(&state, k, mu_i, n_r, n_theta).map_err(assertion_err)?;
        ed_points.push((mu_i, report.sup_ed));
        let _ = writeln!(
            sweep_csv,
            "{},{},{},{}",
            format_float(mu_i),
            format_float(report.sup_r),
            format_float(report.sup_ed),
            format_float(report.sup_en)
        );
    }
    write_artifact(&dir.join("defects_sweep.csv"), &sweep_csv)?;
    fixed_report.slope_fit = Some(defects::fit_log_slope(&ed_points));
    write_artifact(
        &dir.join("defects_report.json"),
        &serde_json::to_string_pretty(&fixed_report).map_err(assertion_err)?,
    )?;

    // (r, theta, u) surface grid
    let mut surface_csv = String::from("r,theta,u\n");
    for it in 0..n_theta {
        let theta = 2.0 * std::f64::consts::PI * (it as f64) / (n_theta as f64);
        let r_edge = 1.0 + mu * state.g.eval(theta);
        for ir in 0..n_r {
            let r = r_edge * (ir as f64) / ((n_r - 1) as f64);
            let u = state
                .eval_u_truncated(k, mu, r, theta)
                .map_err(assertion_err)?;
            let _ = writeln!(
                surface_csv,
                "{},{},{}",
                format_float(r),
                format_float(theta),
                format_float(u)
            );
        }
    }
    write_artifact(&dir.join("surface.csv"), &surface_csv)?;

    Ok(format!(
        "wrote defects_theta.csv ({n_theta} rows), defects_sweep.csv ({n_sweep} rows), surface.csv ({} rows) to {}\n",
        n_r * n_theta,
        dir.display()
    ))
}

fn render_bound_report(report: &BoundReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "input: rho = {}, sigma = {}, Gamma = {}, mu = {:e}",
        report.rho, report.sigma, report.gamma, report.mu
    );
    let _ = writeln!(s, "envelope:");
    let _ = writeln!(s, "  alpha = {:.6}", report.envelope.alpha);
    let _ = writeln!(s, "  A coefficients = {:?}", report.envelope.a_coeffs);
    let _ = writeln!(s, "  B coefficients = {:?}", report.envelope.b_coeffs);
    let _ = writeln!(s, "  Theta (collected display) = {:.6e}", report.envelope.theta);
    let _ = writeln!(
        s,
        "  Theta (componentwise max) = {:.6e}",
        report.envelope.theta_componentwise
    );
    let _ = writeln!(
        s,
        "  display dominates componentwise max: {}",
        report.envelope.theta_display_dominates
    );
    let _ = writeln!(s, "  B_script = {:.6e}", report.envelope.b_script);
    let _ = writeln!(s, "optimal order: K_* = {:.4}, K_opt = {}", report.k_star, report.k_opt);
    let _ = writeln!(s, "  envelope G(K_opt) = {:.6e}", report.g_at_k_opt);
    let c = &report.constants_at_k_opt;
    let _ = writeln!(s, "scheme constants at K = K_opt:");
    let _ = writeln!(s, "  M = {:.6e}", c.m_cal);
    let _ = writeln!(s, "  W = [{:.6e}, {:.6e}, {:.6e}]", c.w[0], c.w[1], c.w[2]);
    let _ = writeln!(s, "  U = [{:.6e}, {:.6e}, {:.6e}]", c.u[0], c.u[1], c.u[2]);
    let _ = writeln!(s, "  Z = [{:.6e}, {:.6e}, {:.6e}]", c.z[0], c.z[1], c.z[2]);
    let _ = writeln!(s, "  a = {:.6e}, b = {:.6e}", c.a, c.b);
    let e = &report.error_constants;
    let _ = writeln!(s, "error constants:");
    let _ = writeln!(s, "  C0 = {:.6e}  C1 = {:.6e}  C2 = {:.6e}", e.c0, e.c1, e.c2);
    let _ = writeln!(s, "  C3 = {:.6e}  C4 = {:.6e}  C5 = {:.6e}", e.c3, e.c4, e.c5);
    let _ = writeln!(s, "  mu0 = {:.6e}", e.mu0);
    let _ = writeln!(s, "bounds at mu = {:e}:", report.mu);
    let _ = writeln!(s, "  resolvability <= {:.6e}", report.bound_resolvability);
    let _ = writeln!(s, "  Dirichlet     <= {:.6e}", report.bound_dirichlet);
    let _ = writeln!(s, "  Neumann       <= {:.6e}", report.bound_neumann);
    if let (Some(f), Some(st)) = (report.sigma_max_fourier, report.sigma_max_strip) {
        let _ = writeln!(s, "sigma admissibility for |g'| <= 1/4 (two readings):");
        let _ = writeln!(s, "  Fourier-norm reading: sigma <= {f:.6}");
        let _ = writeln!(s, "  strip-supremum reading: sigma <= {st:.6}");
    }
    if let Some(n) = report.norm_g_estimate {
        let _ = writeln!(s, "norm of g (sampling estimate, not certified): {n:.6e}");
    }
    s
}

/// `bounds`: the full quantitative report, optionally with the demo table
/// and the smallness rows.
pub fn cmd_bounds(
    config: &ProblemConfig,
    out: Option<&Path>,
    mu_flag: Option<f64>,
    with_table1: bool,
    smallness: Option<&str>,
) -> CliResult<String> {
    let g = config.g_field()?;
    let env = bounds::exponential_envelope(config.rho, config.sigma, config.gamma)
        .map_err(assertion_err)?;
    let consts =
        bounds::error_constants(config.rho, config.sigma, env.b_script).map_err(assertion_err)?;
    // the theorem threshold is tiny; report at the requested mu when
    // admissible, otherwise at mu0 with a note
    let mu_req = mu_flag.unwrap_or(config.mu);
    let (mu_used, note) = if mu_req <= consts.mu0 {
        (mu_req, String::new())
    } else {
        (
            consts.mu0,
            format!(
                "note: requested mu = {mu_req:e} exceeds mu0 = {:e}; report evaluated at mu0\n",
                consts.mu0
            ),
        )
    };
    let report = bounds::bound_report(config.rho, config.sigma, config.gamma, mu_used, Some(&g))
        .map_err(assertion_err)?;
    let mut text = note + &render_bound_report(&report);

    if with_table1 {
        text.push('\n');
        text.push_str(&table1_text(9));
    }
    if let Some(spec) = smallness {
        text.push('\n');
        text.push_str(&smallness_text(spec)?);
    }
    let dir = config.out_dir(out)?;
    write_artifact(&dir.join("bounds.txt"), &text)?;
    write_artifact(
        &dir.join("bounds.json"),
        &serde_json::to_string_pretty(&report).map_err(assertion_err)?,
    )?;
    Ok(text)
}

/// Demo-table text with the printed example constants.
pub fn table1_text(k_max: usize) -> String {
    use torsion_core::rational::rat_int;
    let w = [rat_int(1), rat_int(2), rat_int(1)];
    let u = [rat_int(1), rat_int(1), rat_int(2)];
    let table = bounds::recurrence_sequences(&w, &u, k_max);
    let mut s = String::from("recurrence demo (W = (1,2,1), U = (1,1,2), a = 3, b = 4)\n");
    s.push_str(&bounds::render_table(&table));
    s
}

/// Parse "e-2" as exp(-2), otherwise a plain float.
pub fn parse_mu(token: &str) -> CliResult<f64> {
    let t = token.trim();
    if let Some(rest) = t.strip_prefix("e-") {
        let exp: f64 = rest
            .parse()
            .map_err(|_| CliError::Config(format!("bad mu token {t:?}")))?;
        return Ok((-exp).exp());
    }
    t.parse()
        .map_err(|_| CliError::Config(format!("bad mu token {t:?}")))
}

/// Rows (mu, exp(-(log(1/mu))^2)) for a comma-separated mu list.
pub fn smallness_text(spec: &str) -> CliResult<String> {
    let mus: Vec<f64> = spec.split(',').map(parse_mu).collect::<CliResult<Vec<_>>>()?;
    for &mu in &mus {
        if !(0.0 < mu && mu < 1.0) {
            return Err(CliError::Config(format!("mu = {mu} outside (0,1)")));
        }
    }
    let rows = bounds::smallness_table(&mus);
    let mut s = String::from("mu,exp(-(log(1/mu))^2)\n");
    for (mu, v) in rows {
        let _ = writeln!(s, "{},{}", format_float(mu), format_float(v));
    }
    Ok(s)
}

/// Parse "RxT" grid syntax.
pub fn parse_grid(spec: &str) -> CliResult<(usize, usize)> {
    let (r, t) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Config(format!("grid {spec:?} not in RxT form")))?;
    let n_r = r.trim().parse().map_err(config_err)?;
    let n_t = t.trim().parse().map_err(config_err)?;
    if n_r < 8 || n_t < 8 {
        return Err(CliError::Config("grid must be at least 8x8".into()));
    }
    Ok((n_r, n_t))
}

/// Parse "LO:HI:N" sweep syntax.
pub fn parse_sweep(spec: &str) -> CliResult<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("sweep {spec:?} not in LO:HI:N form")));
    }
    let lo = parse_mu(parts[0])?;
    let hi = parse_mu(parts[1])?;
    let n = parts[2].trim().parse().map_err(config_err)?;
    Ok((lo, hi, n))
}
