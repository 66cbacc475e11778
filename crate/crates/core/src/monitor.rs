//! Evaluates every inequality and identity behind the global-continuation
//! argument along a trajectory and assembles a structured verification
//! report. All quantities are rederived from (y, rho, omega); nothing is
//! trusted from the integrator beyond the states themselves.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::physical;
use crate::profile::{aux, rhs, ProfileResult, ProfileState, Sample, Termination};
use crate::series::CoeffTable;

/// Residual ceiling for the three continuation identities (criterion:
/// algebraic consequences of the ODE, anything larger is a bug).
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative mass-identity ceiling (quadrature vs closed form).
pub const MASS_TOL: f64 = 1e-6;
/// Relative entropy-identity ceiling.
pub const ENTROPY_TOL: f64 = 1e-8;
/// Margins within +-this (times a per-flag scale) count as marginal rather
/// than violated; strict inequalities cannot be certified exactly at y -> 0.
const MARGIN_EPS: f64 = 1e-12;

/// The five dynamically propagated bootstrap conditions at one state.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapFlags {
    pub b0: bool,
    pub b025: bool,
    pub b05: bool,
    pub b1: bool,
    pub b3: bool,
    /// Signed left-hand sides: [-rho', rho, omega - omega0,
    /// y^2 omega R - m0 p/rho, (n+1)/(n-2) rho0 Omega - omega0 R].
    pub margins: [f64; 5],
}

impl BootstrapFlags {
    pub fn all(&self) -> bool {
        self.b0 && self.b025 && self.b05 && self.b1 && self.b3
    }
}

/// Evaluate the bootstrap inequalities with raw margins and zero tolerance.
pub fn bootstrap(params: &Params, state: &ProfileState, rhs_values: (f64, f64)) -> BootstrapFlags {
    let (drho, _) = rhs_values;
    let rho0 = params.sonic.rho0;
    let omega0 = params.sonic.omega0;
    let n = params.n as f64;
    let big_r = rho0 - state.rho;
    let big_omega = state.omega - omega0;
    let a = aux(params, state).expect("bootstrap requires a positive state");
    let m0 = params.sonic.m0;
    let margins = [
        -drho,
        state.rho,
        big_omega,
        state.y * state.y * state.omega * big_r - m0 * a.p / state.rho,
        (n + 1.0) / (n - 2.0) * rho0 * big_omega - omega0 * big_r,
    ];
    BootstrapFlags {
        b0: margins[0] > 0.0,
        b025: margins[1] > 0.0,
        b05: margins[2] > 0.0,
        b1: margins[3] > 0.0,
        b3: margins[4] > 0.0,
        margins,
    }
}

/// Constant coefficients of the rho'-identity polynomial in (Omega, R);
/// E is y-dependent and computed per state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoefficientBundle {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn coefficient_bundle(params: &Params) -> CoefficientBundle {
    let n = params.n as f64;
    let gamma = params.gamma;
    let rho0 = params.sonic.rho0;
    let omega0 = params.sonic.omega0;
    let m0 = params.sonic.m0;
    let x2 = params.x_factor() * params.x_factor();
    let four_pi_third = 4.0 * std::f64::consts::PI / (3.0 * omega0);
    CoefficientBundle {
        a: 4.0 * omega0 + (2.0 - gamma) * (n - 6.0 * (gamma - 1.0)) / (2.0 * (n - 3.0 * (2.0 - gamma)))
            - four_pi_third * x2 * rho0,
        b: four_pi_third * x2 * omega0 - n * omega0 / m0 * x2,
        c: 2.0,
        d: four_pi_third * x2,
    }
}

/// The y-dependent E term of the rho'-identity.
pub fn e_term(params: &Params, state: &ProfileState, p: f64) -> f64 {
    let x2 = params.x_factor() * params.x_factor();
    let n = params.n as f64;
    let omega0 = params.sonic.omega0;
    let m0 = params.sonic.m0;
    let big_r = params.sonic.rho0 - state.rho;
    let y2w = state.y * state.y * state.omega;
    x2 * n * omega0 / (m0 * y2w) * (y2w * big_r - m0 * p / state.rho)
}

/// Relative residuals of the three continuation identities plus the
/// quadratic-form slack. Residuals are measured against the largest additive
/// term on either side, so they report accumulated roundoff only.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityResiduals {
    pub b3_identity: f64,
    pub b1_identity: f64,
    pub rhoprime_identity: f64,
    /// A Omega + B R - (n-2) omega0^2/rho0 R, nonnegative while b3 holds
    /// weakly (for gamma above the A-positivity threshold).
    pub ab_slack: f64,
}

pub fn identity_residuals(
    params: &Params,
    state: &ProfileState,
    rhs_values: (f64, f64),
) -> Result<IdentityResiduals> {
    let (drho, domega) = rhs_values;
    let a = aux(params, state)?;
    let y = state.y;
    let rho = state.rho;
    let omega = state.omega;
    let n = params.n as f64;
    let gamma = params.gamma;
    let rho0 = params.sonic.rho0;
    let omega0 = params.sonic.omega0;
    let m0 = params.sonic.m0;
    let big_r = rho0 - rho;
    let big_omega = omega - omega0;
    let rl = drho / rho; // rho'/rho

    // d/dy [ (n+1)/(n-2) rho0 Omega - omega0 R ]
    let lhs_b3 = (n + 1.0) / (n - 2.0) * rho0 * domega + omega0 * drho;
    let t1 = -(rl + 3.0 / y) * ((n + 1.0) / (n - 2.0) * rho0 * big_omega - omega0 * big_r);
    let t2 = 3.0 * omega0 / ((n - 2.0) * y)
        * (-(y * rl) * (rho0 + 2.0 * (n - 2.0) / 3.0 * big_r) - (n - 2.0) * big_r);
    let rhs_b3 = t1 + t2;
    let scale_b3 = lhs_b3
        .abs()
        .max(t1.abs())
        .max(t2.abs())
        .max((n + 1.0) / (n - 2.0) * rho0 * domega.abs())
        .max(omega0 * drho.abs());
    let b3_identity = (lhs_b3 - rhs_b3).abs() / scale_b3.max(1e-300);

    // d/dy [ y^2 omega R - m0 p/rho ] via the pressure-closure chain rule
    let dlog_p_over_rho =
        (gamma - 1.0) * rl + n / 3.0 * (3.0 / y + rl + domega / omega);
    let lhs_b1 = 2.0 * y * omega * big_r + y * y * domega * big_r - y * y * omega * drho
        - m0 * (a.p / rho) * dlog_p_over_rho;
    let swirl = (3.0 * omega0 - 3.0 * omega) / (y * omega);
    let u1 = 2.0 * y * omega * big_r;
    let u2 = y * y * omega * (swirl - rl) * big_r;
    let u3 = -y * y * rho * omega * rl;
    let u4 = -m0 * ((gamma - 1.0) * rl + n / 3.0 * swirl + n / y) * (a.p / rho);
    let rhs_b1 = u1 + u2 + u3 + u4;
    let scale_b1 = [lhs_b1, u1, u2, u3, u4]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let b1_identity = (lhs_b1 - rhs_b1).abs() / scale_b1.max(1e-300);

    // -y rho'/rho = -(y^2/G)(A Omega + B R + C Omega^2 + D R Omega + E)
    let cb = coefficient_bundle(params);
    let e = e_term(params, state, a.p);
    let poly = cb.a * big_omega
        + cb.b * big_r
        + cb.c * big_omega * big_omega
        + cb.d * big_r * big_omega
        + e;
    let lhs_rp = -y * rl;
    let rhs_rp = -(y * y / a.g) * poly;
    let scale_rp = lhs_rp
        .abs()
        .max(rhs_rp.abs())
        .max((y * y / a.g).abs() * (cb.a * big_omega).abs())
        .max((y * y / a.g).abs() * (cb.b * big_r).abs())
        .max((y * y / a.g).abs() * e.abs());
    let rhoprime_identity = (lhs_rp - rhs_rp).abs() / scale_rp.max(1e-300);

    let ab_slack = cb.a * big_omega + cb.b * big_r - (n - 2.0) * omega0 * omega0 / rho0 * big_r;

    Ok(IdentityResiduals {
        b3_identity,
        b1_identity,
        rhoprime_identity,
        ab_slack,
    })
}

/// Uniform-supersonicity summary over a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupersonicMargin {
    /// min over samples with y >= delta of (-G)/(y^2 omega).
    pub g0_estimate: f64,
    pub g0_argmin_y: f64,
    pub omega_upper_observed: f64,
    /// a-priori quadratic-root bound on omega from the continuation lemma.
    pub omega_upper_bound: f64,
    /// min slack of the explicit lower bound on (-G)/(y^2 omega) at samples
    /// where b1 and b3 hold.
    pub lower_bound_min_slack: f64,
}

/// Finite upper bound on omega from the omega'-inequality: the largest root
/// of omega^2 - (3 omega0 + 3 c1 + g) omega + 3 omega0 c1 - g (2-gamma) = 0
/// with c1 the supersonicity constant.
pub fn omega_upper_bound(params: &Params) -> f64 {
    let n = params.n as f64;
    let gamma = params.gamma;
    let omega0 = params.sonic.omega0;
    let c1 = 3.0 * (n - 2.0) * (n - 2.0) * gamma * (gamma - 1.0) * (11.0 - 6.0 * gamma)
        / (2.0 * (n + 1.0) * n * (3.0 * gamma - 4.0) * (3.0 * gamma - 4.0))
        * omega0;
    let g = params.g_factor();
    let b = 3.0 * omega0 + 3.0 * c1 + g;
    let c = 3.0 * omega0 * c1 - g * (2.0 - gamma);
    0.5 * (b + (b * b - 4.0 * c).max(0.0).sqrt())
}

pub fn supersonic_margin(params: &Params, samples: &[Sample], delta: f64) -> SupersonicMargin {
    let n = params.n as f64;
    let gamma = params.gamma;
    let rho0 = params.sonic.rho0;
    let omega0 = params.sonic.omega0;
    let kappa = 3.0 * (n - 2.0) * (n - 2.0) * gamma * (gamma - 1.0) * (11.0 - 6.0 * gamma)
        / (2.0 * n * (2.0 * n - 1.0) * (3.0 * gamma - 4.0) * (3.0 * gamma - 4.0));
    let mut g0 = f64::INFINITY;
    let mut g0_y = f64::NAN;
    let mut omega_max = f64::NEG_INFINITY;
    let mut min_slack = f64::INFINITY;
    for s in samples {
        let y = s.state.y;
        omega_max = omega_max.max(s.state.omega);
        if y < delta {
            continue;
        }
        let ratio = -s.aux.g / (y * y * s.state.omega);
        if ratio < g0 {
            g0 = ratio;
            g0_y = y;
        }
        let flags = bootstrap(params, &s.state, (s.drho_dy, s.domega_dy));
        if flags.b1 && flags.b3 {
            let big_r = rho0 - s.state.rho;
            let bound = (2.0 * n - 1.0) / (n + 1.0) * omega0 / rho0 * big_r * (1.0 - kappa);
            min_slack = min_slack.min(ratio - bound);
        }
    }
    SupersonicMargin {
        g0_estimate: g0,
        g0_argmin_y: g0_y,
        omega_upper_observed: omega_max,
        omega_upper_bound: omega_upper_bound(params),
        lower_bound_min_slack: min_slack,
    }
}

/// S and T polynomials controlling the second-order coefficient signs.
pub fn s_polynomial(n: f64, gamma: f64) -> f64 {
    6.0 * gamma * (gamma - 1.0) * (11.0 - 6.0 * gamma)
        - 3.0 * n * (12.0 * gamma * gamma - 34.0 * gamma + 21.0)
        + n * n * (36.0 * gamma.powi(3) - 30.0 * gamma * gamma - 132.0 * gamma + 133.0)
}

pub fn t_polynomial(n: f64, gamma: f64) -> f64 {
    12.0 * gamma * (gamma - 1.0) * (11.0 - 6.0 * gamma)
        - n * (144.0 * gamma * gamma - 402.0 * gamma + 259.0)
        + n * n * (72.0 * gamma.powi(3) - 132.0 * gamma * gamma - 66.0 * gamma + 133.0)
}

pub fn q2_polynomial(gamma: f64, n: f64) -> f64 {
    (gamma - 1.0) * (n - 2.0) - 2.0 * (n - 2.0) * (n - 2.0) / ((n + 1.0) * (n + 1.0))
        + (n - 2.0) * (n - 2.0) / (2.0 * (3.0 * gamma - 4.0) * (3.0 * gamma - 4.0))
        + 4.0 * (n - 2.0) / (n + 1.0)
        - (n - 1.0)
}

pub fn q3_polynomial(gamma: f64, n: f64) -> f64 {
    let z = (n - 2.0) * (n - 2.0) / (2.0 * (3.0 * gamma - 4.0) * (3.0 * gamma - 4.0));
    z + 4.0 * (n - 2.0) / (n + 1.0) - (n - 1.0)
        + (2.0 * (gamma - 1.0) - 1.0) * (n - 2.0) / (n + 1.0)
        + (gamma - 1.0) * z * 2.0 / 2.0
}

/// Leading coefficients of the b1 and b3 bootstrap margins as y -> 0: both
/// open at order y^(2(n-2)), b1 after scaling out y^2 omega. Positive values
/// certify that the bootstrap inequalities hold near the origin.
pub fn bootstrap_opening(params: &Params, table: &CoeffTable) -> (f64, f64) {
    let n = params.n as f64;
    let rho0 = params.sonic.rho0;
    let omega0 = params.sonic.omega0;
    let p0 = params.sonic.p0;
    let ratio = params.sonic.m0 / (rho0 * omega0);
    let c_b1 = -table.rhobar[2]
        + ratio * ratio * (params.gamma + (n - 3.0) / (n + 1.0)) * p0 * p0 / rho0;
    let c_b3 = (n + 1.0) / (n - 2.0) * rho0 * table.omegabar[2] + omega0 * table.rhobar[2];
    (c_b1, c_b3)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadraticSample {
    pub x: f64,
    pub value: f64,
}

/// Structural positivity record: the quadratic bound sampled on [0, 1], the
/// q2/q3 polynomials and the S/T combination that opens the b3 bootstrap.
#[derive(Debug, Clone, Serialize)]
pub struct StructuralRecord {
    pub q2: f64,
    pub q3: f64,
    pub s_poly: f64,
    pub t_poly: f64,
    /// 9n(2n-1) S - 9n(n+1) T.
    pub st_combination: f64,
    pub quadratic: Vec<QuadraticSample>,
    pub all_positive: bool,
}

pub fn structural_positivity(params: &Params) -> StructuralRecord {
    let n = params.n as f64;
    let gamma = params.gamma;
    let quadratic: Vec<QuadraticSample> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&x| QuadraticSample {
            x,
            value: -gamma * (n - 2.0) * (n - 2.0) / (n + 1.0) * x * x
                + (n - 2.0) * (2.0 / 3.0 * n - gamma) * x
                + n,
        })
        .collect();
    let q2 = q2_polynomial(gamma, n);
    let q3 = q3_polynomial(gamma, n);
    let s = s_polynomial(n, gamma);
    let t = t_polynomial(n, gamma);
    let combo = 9.0 * n * (2.0 * n - 1.0) * s - 9.0 * n * (n + 1.0) * t;
    let all_positive =
        quadratic.iter().all(|q| q.value >= 0.0) && q2 > 0.0 && q3 > 0.0 && combo > 0.0;
    StructuralRecord {
        q2,
        q3,
        s_poly: s,
        t_poly: t,
        st_combination: combo,
        quadratic,
        all_positive,
    }
}

/// Large-y diagnostics. The far-field comparison is informational; the paper
/// proves decay but not a rate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticsRecord {
    pub rho_end_over_rho0: f64,
    pub last_decade_rho_slope: f64,
    pub far_field_slope: f64,
    pub rho_over_far_field_end: f64,
    pub omega_slope_last_decade: f64,
    pub omega_end: f64,
    pub rho_monotone_last_decade: bool,
}

pub fn asymptotics(params: &Params, samples: &[Sample]) -> Result<AsymptoticsRecord> {
    let y_end = samples.last().map(|s| s.state.y).unwrap_or(0.0);
    if y_end < 100.0 {
        return Err(Error::TrajectoryTooShort {
            reached: y_end,
            needed: 100.0,
        });
    }
    let cut = y_end / 10.0;
    let decade: Vec<&Sample> = samples.iter().filter(|s| s.state.y >= cut).collect();
    let fit = |values: &dyn Fn(&Sample) -> f64| -> f64 {
        // least-squares slope of ln v against ln y
        let pts: Vec<(f64, f64)> = decade
            .iter()
            .map(|s| (s.state.y.ln(), values(s).ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let rho_slope = fit(&|s: &Sample| s.state.rho);
    let omega_slope = fit(&|s: &Sample| s.state.omega);
    let ff = physical::far_field(params)?;
    let last = samples.last().unwrap();
    let mut monotone = true;
    for w in decade.windows(2) {
        if w[1].state.rho >= w[0].state.rho {
            monotone = false;
        }
    }
    Ok(AsymptoticsRecord {
        rho_end_over_rho0: last.state.rho / params.sonic.rho0,
        last_decade_rho_slope: rho_slope,
        far_field_slope: ff.rho_exponent,
        rho_over_far_field_end: last.state.rho / ff.rho(last.state.y),
        omega_slope_last_decade: omega_slope,
        omega_end: last.state.omega,
        rho_monotone_last_decade: monotone,
    })
}

/// Mass identity along the samples: cumulative derivative-corrected
/// trapezoid quadrature of 4 pi z^2 rho against the closed form
/// 4 pi y^3 rho omega / (4 - 3 gamma + alpha). `mass_seed` covers [0, y0]
/// (series-integrated). Returns the max relative mismatch.
pub fn mass_identity_residual(params: &Params, samples: &[Sample], mass_seed: f64) -> f64 {
    let f = |s: &Sample| 4.0 * std::f64::consts::PI * s.state.y * s.state.y * s.state.rho;
    let fp = |s: &Sample| {
        4.0 * std::f64::consts::PI
            * (2.0 * s.state.y * s.state.rho + s.state.y * s.state.y * s.drho_dy)
    };
    let mut acc = mass_seed;
    let mut worst: f64 = 0.0;
    let closed0 = physical::mass(params, &samples[0].state);
    worst = worst.max((acc - closed0).abs() / closed0.abs().max(1e-300));
    for w in samples.windows(2) {
        let h = w[1].state.y - w[0].state.y;
        acc += 0.5 * h * (f(&w[0]) + f(&w[1])) + h * h / 12.0 * (fp(&w[0]) - fp(&w[1]));
        let closed = physical::mass(params, &w[1].state);
        worst = worst.max((acc - closed).abs() / closed.abs().max(1e-300));
    }
    worst
}

/// Entropy transport residual p'/p - gamma rho'/rho - (2-gamma) alpha /
/// (y omega), with p' from the pressure-closure chain rule. Returns the max
/// relative residual over samples.
pub fn entropy_residual(params: &Params, samples: &[Sample]) -> f64 {
    let n3 = params.n as f64 / 3.0;
    let scale_term = (2.0 - params.gamma) * params.alpha;
    let mut worst: f64 = 0.0;
    for s in samples {
        let y = s.state.y;
        let rl = s.drho_dy / s.state.rho;
        let wl = s.domega_dy / s.state.omega;
        let p_log = params.gamma * rl + n3 * (3.0 / y + rl + wl);
        let residual = p_log - params.gamma * rl - scale_term / (y * s.state.omega);
        let scale = scale_term / (y * s.state.omega);
        worst = worst.max(residual.abs() / scale.abs().max(1e-300));
    }
    worst
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlagSummary {
    pub min_margin: f64,
    pub argmin_y: f64,
    pub violated: bool,
    pub marginal: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlagsSummary {
    pub b0: FlagSummary,
    pub b025: FlagSummary,
    pub b05: FlagSummary,
    pub b1: FlagSummary,
    pub b3: FlagSummary,
    pub all_hold: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentitySummary {
    pub b3_identity_max_rel: f64,
    pub b1_identity_max_rel: f64,
    pub rhoprime_identity_max_rel: f64,
    pub ab_slack_min: f64,
    pub entropy_max_rel: f64,
    pub mass_max_rel: f64,
    /// min slack of the rho'-lower-bound corollary over samples.
    pub rhoprime_bound_min_slack: f64,
    /// rho0 omega0 - rho omega: must stay nonnegative and nondecreasing.
    pub product_monotone: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunEcho {
    pub order: usize,
    pub y_max: f64,
    pub rel_tol: f64,
    pub rho_floor: f64,
    pub points_per_decade: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

/// Full verification report; serialized as the report JSON.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub params: Params,
    pub handoff: crate::profile::HandoffInfo,
    pub termination: Termination,
    pub flags_summary: FlagsSummary,
    pub identities: IdentitySummary,
    pub supersonic: SupersonicMargin,
    pub structural: StructuralRecord,
    pub asymptotics: Option<AsymptoticsRecord>,
    pub config: RunEcho,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn margin_scales(params: &Params, s: &Sample) -> [f64; 5] {
    let n = params.n as f64;
    let y = s.state.y;
    [
        s.drho_dy.abs() + s.state.rho / y,
        params.sonic.rho0,
        params.sonic.omega0,
        y * y * s.state.omega * params.sonic.rho0 + params.sonic.m0 * s.aux.p / s.state.rho,
        (n + 1.0) / (n - 2.0) * params.sonic.rho0 * params.sonic.omega0,
    ]
}

/// Run every check along a trajectory and assemble the report with a
/// pass/fail verdict. `mass_seed` is the series-integrated mass over
/// [0, y0].
pub fn verify(
    params: &Params,
    result: &ProfileResult,
    mass_seed: f64,
    config: RunEcho,
) -> VerificationReport {
    let samples = &result.samples;
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    // --- bootstrap flags -------------------------------------------------
    let mut mins = [f64::INFINITY; 5];
    let mut argmin = [f64::NAN; 5];
    let mut violated = [false; 5];
    let mut marginal = [false; 5];
    for s in samples {
        let flags = bootstrap(params, &s.state, (s.drho_dy, s.domega_dy));
        let scales = margin_scales(params, s);
        for i in 0..5 {
            let rel = flags.margins[i] / scales[i].max(1e-300);
            if rel < mins[i] {
                mins[i] = rel;
                argmin[i] = s.state.y;
            }
            if rel < -MARGIN_EPS {
                violated[i] = true;
            } else if rel <= MARGIN_EPS {
                marginal[i] = true;
            }
        }
    }
    let mk = |i: usize| FlagSummary {
        min_margin: mins[i],
        argmin_y: argmin[i],
        violated: violated[i],
        marginal: marginal[i],
    };
    let flags_summary = FlagsSummary {
        b0: mk(0),
        b025: mk(1),
        b05: mk(2),
        b1: mk(3),
        b3: mk(4),
        all_hold: !violated.iter().any(|&v| v),
    };
    if violated.iter().any(|&v| v) {
        let names = ["b0 (rho' < 0)", "b0.25 (rho > 0)", "b0.5 (omega > omega0)", "b1", "b3"];
        for i in 0..5 {
            if violated[i] {
                failures.push(format!(
                    "bootstrap {} violated: min margin {:.3e} at y = {:.6e}",
                    names[i], mins[i], argmin[i]
                ));
            }
        }
    }

    // --- identities -------------------------------------------------------
    let mut id_max = [0.0f64; 3];
    let mut ab_min = f64::INFINITY;
    let mut rb_min_slack = f64::INFINITY;
    let four_pi_third = 4.0 * std::f64::consts::PI / (3.0 * params.sonic.omega0);
    let x2 = params.x_factor() * params.x_factor();
    let n = params.n as f64;
    for s in samples {
        if let Ok(res) = identity_residuals(params, &s.state, (s.drho_dy, s.domega_dy)) {
            id_max[0] = id_max[0].max(res.b3_identity);
            id_max[1] = id_max[1].max(res.b1_identity);
            id_max[2] = id_max[2].max(res.rhoprime_identity);
            ab_min = ab_min.min(res.ab_slack);
        }
        // Corollary lower bound on (-G/y^2)(-y rho'/rho)
        let big_r = params.sonic.rho0 - s.state.rho;
        let big_omega = s.state.omega - params.sonic.omega0;
        let lhs = (-s.aux.g / (s.state.y * s.state.y)) * (-s.state.y * s.drho_dy / s.state.rho);
        let rhs_b = (n - 2.0) * params.sonic.omega0 * params.sonic.omega0 / params.sonic.rho0
            * big_r
            + 2.0 * big_omega * big_omega
            + four_pi_third * x2 * big_r * big_omega;
        rb_min_slack = rb_min_slack.min((lhs - rhs_b) / lhs.abs().max(1e-300));
    }
    for (i, name) in ["(E:BTHREEID)", "(E:BONEID)", "(E:RHOPRIMEID)"].iter().enumerate() {
        if id_max[i] > IDENTITY_TOL {
            failures.push(format!(
                "identity {} residual {:.3e} exceeds {IDENTITY_TOL:.0e}",
                name, id_max[i]
            ));
        }
    }
    if params.gamma >= crate::params::a_positivity_threshold(params.n) && ab_min < -1e-12 {
        failures.push(format!("quadratic-form slack negative: {ab_min:.3e}"));
    }
    if rb_min_slack < -MARGIN_EPS {
        failures.push(format!(
            "rho'-lower-bound corollary violated: min slack {rb_min_slack:.3e}"
        ));
    }

    // --- product monotonicity (rho0 omega0 - rho omega) -------------------
    let prod0 = params.sonic.rho0 * params.sonic.omega0;
    let mut product_monotone = true;
    let mut prev = -f64::INFINITY;
    for s in samples {
        let v = prod0 - s.state.rho * s.state.omega;
        if v < -1e-12 * prod0 || v < prev - 1e-12 * prod0 {
            product_monotone = false;
        }
        prev = prev.max(v);
    }
    if !product_monotone {
        failures.push("rho0 omega0 - rho omega not nonnegative/nondecreasing".into());
    }

    let entropy_max = entropy_residual(params, samples);
    if entropy_max > ENTROPY_TOL {
        failures.push(format!(
            "entropy identity residual {entropy_max:.3e} exceeds {ENTROPY_TOL:.0e}"
        ));
    }
    let mass_max = mass_identity_residual(params, samples, mass_seed);
    if mass_max > MASS_TOL {
        failures.push(format!(
            "mass identity residual {mass_max:.3e} exceeds {MASS_TOL:.0e}"
        ));
    }

    let identities = IdentitySummary {
        b3_identity_max_rel: id_max[0],
        b1_identity_max_rel: id_max[1],
        rhoprime_identity_max_rel: id_max[2],
        ab_slack_min: ab_min,
        entropy_max_rel: entropy_max,
        mass_max_rel: mass_max,
        rhoprime_bound_min_slack: rb_min_slack,
        product_monotone,
    };

    // --- supersonicity -----------------------------------------------------
    let supersonic = supersonic_margin(params, samples, result.handoff.y0);
    if !(supersonic.g0_estimate > 0.0) {
        failures.push(format!(
            "uniform supersonicity failed: g0 = {:.3e} at y = {:.6e}",
            supersonic.g0_estimate, supersonic.g0_argmin_y
        ));
    }
    if supersonic.omega_upper_observed >= supersonic.omega_upper_bound {
        failures.push(format!(
            "omega exceeded the a-priori bound: {:.6} >= {:.6}",
            supersonic.omega_upper_observed, supersonic.omega_upper_bound
        ));
    }
    if supersonic.lower_bound_min_slack < -MARGIN_EPS {
        failures.push(format!(
            "explicit (-G) lower bound violated: min slack {:.3e}",
            supersonic.lower_bound_min_slack
        ));
    }
    for s in samples {
        if s.aux.g >= 0.0 {
            failures.push(format!("subsonic sample at y = {:.6e}", s.state.y));
            break;
        }
    }

    // --- structural positivity --------------------------------------------
    let structural = structural_positivity(params);
    if params.first_band && !structural.all_positive {
        failures.push("structural positivity record contains nonpositive entries".into());
    }

    // --- asymptotics --------------------------------------------------------
    let asymptotics_rec = asymptotics(params, samples).ok();
    if let Some(a) = &asymptotics_rec {
        if !a.rho_monotone_last_decade {
            failures.push("rho not strictly decreasing across the last decade".into());
        }
        if a.last_decade_rho_slope >= 0.0 {
            failures.push(format!(
                "last-decade log-slope of rho nonnegative: {:.3e}",
                a.last_decade_rho_slope
            ));
        }
        notes.push(format!(
            "far-field comparison (diagnostic only): slope {:.4} vs reference {:.4}, amplitude ratio {:.4e}",
            a.last_decade_rho_slope, a.far_field_slope, a.rho_over_far_field_end
        ));
    }

    // --- termination --------------------------------------------------------
    match result.termination {
        Termination::ReachedYmax => {}
        Termination::RhoFloor => {
            notes.push("terminated at the density floor: expected decay physics, not a defect".into());
        }
        t => {
            failures.push(format!("termination {:?} is not a successful outcome", t));
        }
    }

    let verdict = Verdict {
        pass: failures.is_empty(),
        failures,
        notes,
    };
    VerificationReport {
        params: *params,
        handoff: result.handoff,
        termination: result.termination,
        flags_summary,
        identities,
        supersonic,
        structural,
        asymptotics: asymptotics_rec,
        config,
        verdict,
    }
}

/// Rebuild Sample rows from stored (y, rho, omega) triples only.
pub fn samples_from_states(params: &Params, states: &[ProfileState]) -> Result<Vec<Sample>> {
    states
        .iter()
        .map(|st| {
            let a = aux(params, st)?;
            let (dr, dw) = rhs(params, st)?;
            Ok(Sample {
                state: *st,
                aux: a,
                drho_dy: dr,
                domega_dy: dw,
            })
        })
        .collect()
}
