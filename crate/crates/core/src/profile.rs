//! Self-similar ODE right-hand side and outward integration from the series
//! handoff point to large y, with dense output on a log-uniform grid and
//! event detection for sonic crossings, density underflow and nonfinite
//! states.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::series::{self, CoeffTable};

/// Relative floor for the sonic denominator, |G| >= floor * y^2 omega^2.
const G_REL_FLOOR: f64 = 1e-14;

/// Point on a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileState {
    pub y: f64,
    pub rho: f64,
    pub omega: f64,
}

/// Auxiliary quantities recomputed from (y, rho, omega).
#[derive(Debug, Clone, Copy)]
pub struct AuxValues {
    pub p: f64,
    pub h: f64,
    pub q: f64,
    pub g: f64,
    pub u: f64,
    pub mass: f64,
}

/// One dense-output sample: state, auxiliaries and the ODE derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub state: ProfileState,
    pub aux: AuxValues,
    pub drho_dy: f64,
    pub domega_dy: f64,
}

/// Why the integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedYmax,
    SonicHit,
    RhoFloor,
    Nonfinite,
    InvariantViolation,
    StepFailure,
}

/// Where the trajectory was seeded from the series.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct HandoffInfo {
    pub y0: f64,
    pub order: usize,
    pub nu: f64,
}

/// Full integration output.
#[derive(Debug, Clone)]
pub struct ProfileResult {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub handoff: HandoffInfo,
}

/// Integration controls. Defaults match the CLI defaults.
#[derive(Debug, Clone, Copy)]
pub struct Controls {
    pub rel_tol: f64,
    pub rho_floor: f64,
    pub points_per_decade: usize,
    pub y_max: f64,
    /// Terminate with InvariantViolation when the trajectory leaves
    /// rho in (0, rho0], omega >= omega0. Disabled for exploratory runs
    /// (far-field checks, out-of-band scans).
    pub enforce_region: bool,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rel_tol: 1e-10,
            rho_floor: 1e-12,
            points_per_decade: 64,
            y_max: 1e3,
            enforce_region: true,
            max_steps: 2_000_000,
        }
    }
}

/// Pressure, h, q, sonic denominator G, fluid velocity u and local mass at a
/// state. Everything is rederived from (y, rho, omega); nothing is cached.
pub fn aux(params: &Params, state: &ProfileState) -> Result<AuxValues> {
    let ProfileState { y, rho, omega } = *state;
    if y <= 0.0 || rho <= 0.0 || omega <= 0.0 {
        return Err(Error::NonPositiveState { y, rho, omega });
    }
    let gamma = params.gamma;
    let alpha = params.alpha;
    let n3 = params.n as f64 / 3.0;
    let x2 = params.x_factor() * params.x_factor();
    let three_omega0 = params.three_omega0();
    // p = rho^gamma (y^3 rho omega)^((2-gamma) alpha / (4-3gamma+alpha)),
    // and the exponent equals n/3 by the selection principle.
    let p = rho.powf(gamma) * (y * y * y * rho * omega).powf(n3);
    let h = 2.0 * omega * omega
        + params.g_factor() * omega
        + params.g_factor() * (2.0 - gamma)
        - 4.0 * std::f64::consts::PI / three_omega0 * x2 * rho * omega;
    let q = (2.0 - gamma) * alpha * x2 * p / (y * rho * omega);
    let g = gamma * x2 * p / rho - y * y * omega * omega;
    let u = 2.0 * y * (omega - (2.0 - gamma)) / (2.0 - alpha);
    let mass = 4.0 * std::f64::consts::PI / three_omega0 * y * y * y * rho * omega;
    Ok(AuxValues { p, h, q, g, u, mass })
}

/// ODE right-hand side: rho' = rho (y h - q)/G and
/// omega' = (4 - 3 gamma + alpha - 3 omega)/y - omega (y h - q)/G.
pub fn rhs(params: &Params, state: &ProfileState) -> Result<(f64, f64)> {
    let a = aux(params, state)?;
    rhs_with_aux(params, state, &a)
}

fn rhs_with_aux(params: &Params, state: &ProfileState, a: &AuxValues) -> Result<(f64, f64)> {
    let ProfileState { y, omega, rho } = *state;
    let floor = G_REL_FLOOR * y * y * omega * omega;
    if a.g.abs() < floor {
        return Err(Error::SonicProximity {
            y,
            g_abs: a.g.abs(),
            floor,
        });
    }
    let slope = (y * a.h - a.q) / a.g;
    let drho = rho * slope;
    let domega = (params.three_omega0() - 3.0 * omega) / y - omega * slope;
    if !drho.is_finite() || !domega.is_finite() {
        return Err(Error::NonPositiveState { y, rho, omega });
    }
    Ok((drho, domega))
}

/// Pick the handoff point: y0 = min(nu/2, largest y where both series tails
/// sit below rel_tol relative to the values), and require G(y0) < 0.
pub fn handoff(table: &CoeffTable, rel_tol: f64) -> Result<(f64, ProfileState)> {
    let cap = if table.nu.is_finite() {
        0.5 * table.nu
    } else {
        1.0
    };
    let tail_ok = |y: f64| -> bool {
        match series::eval(table, y) {
            Ok(e) => {
                e.tail_rho <= rel_tol * e.rho.abs() && e.tail_omega <= rel_tol * e.omega.abs()
            }
            Err(_) => false,
        }
    };
    let y0 = if tail_ok(cap) {
        cap
    } else {
        let mut lo = cap * 1e-8;
        if !tail_ok(lo) {
            return Err(Error::OrderTooLow { rel_tol });
        }
        let mut hi = cap;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if tail_ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let e = series::eval(table, y0)?;
    let state = ProfileState {
        y: y0,
        rho: e.rho,
        omega: e.omega,
    };
    let a = aux(&table.params, &state)?;
    if a.g >= 0.0 {
        return Err(Error::NotSupersonicAtStart { y0, g: a.g });
    }
    Ok((y0, state))
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order weights for the error estimate
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 - -92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

type Vec2 = [f64; 2];

/// Derivative in s = log y of (rho, omega).
fn f_log(params: &Params, s: f64, u: Vec2) -> Result<Vec2> {
    let y = s.exp();
    let state = ProfileState {
        y,
        rho: u[0],
        omega: u[1],
    };
    let (dr, dw) = rhs(params, &state)?;
    Ok([y * dr, y * dw])
}

struct StepOutcome {
    u: Vec2,
    err: f64,
}

/// One DP45 trial step from (s, u) with size h; k1 is the FSAL slope.
fn dp45_step(params: &Params, s: f64, u: Vec2, k1: Vec2, h: f64) -> Result<(StepOutcome, Vec2)> {
    let add = |u: Vec2, terms: &[(f64, Vec2)]| -> Vec2 {
        let mut out = u;
        for &(w, k) in terms {
            out[0] += h * w * k[0];
            out[1] += h * w * k[1];
        }
        out
    };
    let k2 = f_log(params, s + C[1] * h, add(u, &[(A21, k1)]))?;
    let k3 = f_log(params, s + C[2] * h, add(u, &[(A31, k1), (A32, k2)]))?;
    let k4 = f_log(params, s + C[3] * h, add(u, &[(A41, k1), (A42, k2), (A43, k3)]))?;
    let k5 = f_log(
        params,
        s + C[4] * h,
        add(u, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]),
    )?;
    let k6 = f_log(
        params,
        s + C[5] * h,
        add(u, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]),
    )?;
    let u5 = add(u, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
    let k7 = f_log(params, s + h, u5)?;
    let mut err = 0.0f64;
    for i in 0..2 {
        let e = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = 1e-30 + 1e-2 * u[i].abs().max(u5[i].abs());
        err = err.max((e / scale).abs());
    }
    Ok((StepOutcome { u: u5, err }, k7))
}

struct Stepper<'a> {
    params: &'a Params,
    rel_tol: f64,
    h: f64,
    err_prev: f64,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a Params, rel_tol: f64) -> Self {
        Stepper {
            params,
            rel_tol,
            h: 1e-3,
            err_prev: 1.0,
        }
    }

    /// Advance from (s, u, k1) by at most h_cap; returns the accepted
    /// (s_new, u_new, k1_new). Errors bubble up (sonic proximity,
    /// nonpositive state) for the caller to classify.
    fn advance(&mut self, s: f64, u: Vec2, k1: Vec2, h_cap: f64) -> Result<(f64, Vec2, Vec2)> {
        // err is measured against scale 1e-2*|u|, so tolerance 1 corresponds
        // to a relative step error of rel_tol * 1e2 * 1e-2 = rel_tol.
        let tol = self.rel_tol * 1e2;
        loop {
            let h = self.h.min(h_cap);
            if h < 1e-14 {
                return Err(Error::SonicProximity {
                    y: s.exp(),
                    g_abs: 0.0,
                    floor: 0.0,
                });
            }
            let (out, k7) = dp45_step(self.params, s, u, k1, h)?;
            let err_ratio = out.err / tol;
            if err_ratio <= 1.0 || h <= 1e-13 {
                // PI controller (0.7/5, 0.4/5)
                let e_n = err_ratio.max(1e-10);
                let factor = 0.9 * e_n.powf(-0.14) * self.err_prev.powf(0.08);
                self.err_prev = e_n;
                self.h = h * factor.clamp(0.2, 5.0);
                return Ok((s + h, out.u, k7));
            }
            let factor = 0.9 * err_ratio.powf(-0.2);
            self.h = h * factor.clamp(0.1, 1.0);
        }
    }
}

/// Classify a hard stepper error into a termination.
fn classify(err: &Error) -> Termination {
    match err {
        Error::SonicProximity { .. } => Termination::SonicHit,
        Error::NonPositiveState { rho, omega, .. } if !rho.is_finite() || !omega.is_finite() => {
            Termination::Nonfinite
        }
        Error::NonPositiveState { .. } => Termination::InvariantViolation,
        _ => Termination::Nonfinite,
    }
}

/// Integrate outward from state0 to controls.y_max with dense output on a
/// log-uniform y grid. The integration variable is s = log y; every dense
/// sample is an integration endpoint, so no interpolation is involved.
pub fn integrate(
    params: &Params,
    state0: &ProfileState,
    handoff: HandoffInfo,
    controls: &Controls,
) -> ProfileResult {
    let mut samples = Vec::new();
    let push_sample = |samples: &mut Vec<Sample>, state: &ProfileState| -> Result<()> {
        let a = aux(params, state)?;
        let (dr, dw) = rhs_with_aux(params, state, &a)?;
        samples.push(Sample {
            state: *state,
            aux: a,
            drho_dy: dr,
            domega_dy: dw,
        });
        Ok(())
    };

    let s_end = controls.y_max.ln();
    let s0 = state0.y.ln();
    if push_sample(&mut samples, state0).is_err() {
        return ProfileResult {
            samples,
            termination: Termination::SonicHit,
            handoff,
        };
    }
    let g_start = samples[0].aux.g;
    if g_start >= 0.0 {
        return ProfileResult {
            samples,
            termination: Termination::SonicHit,
            handoff,
        };
    }

    let dlog = std::f64::consts::LN_10 / controls.points_per_decade.max(1) as f64;
    let mut stepper = Stepper::new(params, controls.rel_tol);
    let mut s = s0;
    let mut u = [state0.rho, state0.omega];
    let mut k1 = match f_log(params, s, u) {
        Ok(k) => k,
        Err(e) => {
            return ProfileResult {
                samples,
                termination: classify(&e),
                handoff,
            }
        }
    };
    let mut target_idx = 1usize;
    let mut steps = 0usize;

    loop {
        if steps >= controls.max_steps {
            return ProfileResult {
                samples,
                termination: Termination::StepFailure,
                handoff,
            };
        }
        steps += 1;
        let mut target = s0 + target_idx as f64 * dlog;
        if target > s_end - 0.5 * dlog {
            target = s_end;
        }
        let h_cap = target - s;
        let (s_prev, u_prev, k1_prev) = (s, u, k1);
        match stepper.advance(s, u, k1, h_cap) {
            Ok((s_new, u_new, k1_new)) => {
                s = s_new;
                u = u_new;
                k1 = k1_new;
            }
            Err(Error::SonicProximity { .. }) => {
                // locate the crossing inside [s_prev, s_prev + h] by bisection
                let state =
                    locate_sonic(params, &mut stepper, s_prev, u_prev, k1_prev, s_end);
                if let Some(st) = state {
                    let _ = push_sample(&mut samples, &st);
                }
                return ProfileResult {
                    samples,
                    termination: Termination::SonicHit,
                    handoff,
                };
            }
            Err(e) => {
                return ProfileResult {
                    samples,
                    termination: classify(&e),
                    handoff,
                };
            }
        }

        let y = s.exp();
        let state = ProfileState {
            y,
            rho: u[0],
            omega: u[1],
        };
        if !u[0].is_finite() || !u[1].is_finite() {
            return ProfileResult {
                samples,
                termination: Termination::Nonfinite,
                handoff,
            };
        }
        if u[0] < controls.rho_floor {
            let _ = push_sample(&mut samples, &state);
            return ProfileResult {
                samples,
                termination: Termination::RhoFloor,
                handoff,
            };
        }
        // supersonic check at the accepted endpoint
        match aux(params, &state) {
            Ok(a) => {
                if a.g >= -G_REL_FLOOR * y * y * u[1] * u[1] {
                    let st = locate_sonic(params, &mut stepper, s_prev, u_prev, k1_prev, s);
                    if let Some(st) = st {
                        let _ = push_sample(&mut samples, &st);
                    }
                    return ProfileResult {
                        samples,
                        termination: Termination::SonicHit,
                        handoff,
                    };
                }
            }
            Err(_) => {
                return ProfileResult {
                    samples,
                    termination: Termination::InvariantViolation,
                    handoff,
                };
            }
        }
        if controls.enforce_region {
            let rho0 = params.sonic.rho0;
            let omega0 = params.sonic.omega0;
            if u[0] > rho0 * (1.0 + 1e-9) || u[1] < omega0 * (1.0 - 1e-9) || u[0] <= 0.0 {
                let _ = push_sample(&mut samples, &state);
                return ProfileResult {
                    samples,
                    termination: Termination::InvariantViolation,
                    handoff,
                };
            }
        }

        if (s - target).abs() < 1e-12 {
            s = target;
            if push_sample(&mut samples, &state).is_err() {
                return ProfileResult {
                    samples,
                    termination: Termination::SonicHit,
                    handoff,
                };
            }
            if (target - s_end).abs() < 1e-12 {
                return ProfileResult {
                    samples,
                    termination: Termination::ReachedYmax,
                    handoff,
                };
            }
            while s0 + target_idx as f64 * dlog <= target + 1e-12 {
                target_idx += 1;
            }
        }
    }
}

/// Bisect for the sonic crossing inside [s_a, s_b]: each probe re-integrates
/// from the last known-supersonic state, narrowing to 1e-12 relative in y.
fn locate_sonic(
    params: &Params,
    stepper: &mut Stepper,
    s_a: f64,
    u_a: Vec2,
    k1_a: Vec2,
    s_b: f64,
) -> Option<ProfileState> {
    let probe = |s_from: f64, u_from: Vec2, k1_from: Vec2, s_to: f64| -> Option<(Vec2, Vec2)> {
        let mut s = s_from;
        let mut u = u_from;
        let mut k1 = k1_from;
        let mut local = Stepper::new(params, stepper.rel_tol);
        local.h = stepper.h.min((s_to - s_from).abs().max(1e-15));
        let mut guard = 0;
        while s < s_to - 1e-15 {
            guard += 1;
            if guard > 10_000 {
                return None;
            }
            match local.advance(s, u, k1, s_to - s) {
                Ok((s_new, u_new, k1_new)) => {
                    s = s_new;
                    u = u_new;
                    k1 = k1_new;
                }
                Err(_) => return None,
            }
        }
        Some((u, k1))
    };
    let g_of = |s: f64, u: Vec2| -> f64 {
        let state = ProfileState {
            y: s.exp(),
            rho: u[0],
            omega: u[1],
        };
        aux(params, &state).map(|a| a.g).unwrap_or(0.0)
    };
    let mut lo = s_a;
    let mut u_lo = u_a;
    let mut k_lo = k1_a;
    let mut hi = s_b;
    for _ in 0..80 {
        if (hi.exp() - lo.exp()).abs() <= 1e-12 * hi.exp() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match probe(lo, u_lo, k_lo, mid) {
            Some((u_mid, k_mid)) => {
                if g_of(mid, u_mid) < 0.0 {
                    lo = mid;
                    u_lo = u_mid;
                    k_lo = k_mid;
                } else {
                    hi = mid;
                }
            }
            None => {
                hi = mid;
            }
        }
    }
    Some(ProfileState {
        y: lo.exp(),
        rho: u_lo[0],
        omega: u_lo[1],
    })
}

/// Handoff from the series and outward integration in one call.
pub fn solve_profile(
    params: &Params,
    table: &CoeffTable,
    controls: &Controls,
) -> Result<ProfileResult> {
    let (y0, state0) = handoff(table, controls.rel_tol)?;
    let info = HandoffInfo {
        y0,
        order: table.order,
        nu: table.nu,
    };
    Ok(integrate(params, &state0, info, controls))
}

/// Profile CSV: `# implosion-profiles v1 gamma=<g> n=<n> alpha=<a>` header,
/// then `y,rho,omega,u,p,G,mass,drho_dy,domega_dy` rows at 17 significant
/// digits.
pub fn write_profile_csv<W: Write>(
    out: &mut W,
    params: &Params,
    result: &ProfileResult,
) -> std::io::Result<()> {
    writeln!(
        out,
        "# implosion-profiles v1 gamma={:.16e} n={} alpha={:.16e}",
        params.gamma, params.n, params.alpha
    )?;
    writeln!(out, "y,rho,omega,u,p,G,mass,drho_dy,domega_dy")?;
    for s in &result.samples {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.state.y,
            s.state.rho,
            s.state.omega,
            s.aux.u,
            s.aux.p,
            s.aux.g,
            s.aux.mass,
            s.drho_dy,
            s.domega_dy
        )?;
    }
    Ok(())
}

/// Stored profile row as read back from CSV.
#[derive(Debug, Clone, Copy)]
pub struct StoredSample {
    pub y: f64,
    pub rho: f64,
    pub omega: f64,
    pub u: f64,
    pub p: f64,
    pub g: f64,
    pub mass: f64,
    pub drho_dy: f64,
    pub domega_dy: f64,
}

/// Parsed profile file: header parameters and raw rows.
#[derive(Debug, Clone)]
pub struct StoredProfile {
    pub gamma: f64,
    pub n: i64,
    pub alpha: f64,
    pub rows: Vec<StoredSample>,
}

/// Parse a profile CSV produced by [`write_profile_csv`].
pub fn read_profile_csv<R: BufRead>(reader: R) -> Result<StoredProfile> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::MalformedProfile {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::MalformedProfile {
        line: 1,
        message: e.to_string(),
    })?;
    let rest = header
        .strip_prefix("# implosion-profiles v1 ")
        .ok_or_else(|| Error::MalformedProfile {
            line: 1,
            message: "missing `# implosion-profiles v1` header".into(),
        })?;
    let mut gamma = None;
    let mut n = None;
    let mut alpha = None;
    for field in rest.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| Error::MalformedProfile {
            line: 1,
            message: format!("malformed header field `{field}`"),
        })?;
        let parsed: f64 = value.parse().map_err(|_| Error::MalformedProfile {
            line: 1,
            message: format!("unparsable header value `{value}`"),
        })?;
        match key {
            "gamma" => gamma = Some(parsed),
            "n" => n = Some(parsed as i64),
            "alpha" => alpha = Some(parsed),
            _ => {}
        }
    }
    let (gamma, n, alpha) = match (gamma, n, alpha) {
        (Some(g), Some(n), Some(a)) => (g, n, a),
        _ => {
            return Err(Error::MalformedProfile {
                line: 1,
                message: "header must carry gamma, n and alpha".into(),
            })
        }
    };
    let (_, columns) = lines.next().ok_or(Error::MalformedProfile {
        line: 2,
        message: "missing column header".into(),
    })?;
    let columns = columns.map_err(|e| Error::MalformedProfile {
        line: 2,
        message: e.to_string(),
    })?;
    if columns.trim() != "y,rho,omega,u,p,G,mass,drho_dy,domega_dy" {
        return Err(Error::MalformedProfile {
            line: 2,
            message: format!("unexpected column header `{columns}`"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::MalformedProfile {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedProfile {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if fields.len() != 9 {
            return Err(Error::MalformedProfile {
                line: idx + 1,
                message: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        rows.push(StoredSample {
            y: fields[0],
            rho: fields[1],
            omega: fields[2],
            u: fields[3],
            p: fields[4],
            g: fields[5],
            mass: fields[6],
            drho_dy: fields[7],
            domega_dy: fields[8],
        });
    }
    if rows.is_empty() {
        return Err(Error::MalformedProfile {
            line: 3,
            message: "no data rows".into(),
        });
    }
    Ok(StoredProfile {
        gamma,
        n,
        alpha,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series;

    fn reference() -> (Params, CoeffTable) {
        let p = Params::new(5.0 / 3.0, 4).unwrap();
        let t = series::build(p, 30).unwrap();
        (p, t)
    }

    #[test]
    fn aux_rejects_nonpositive() {
        let (p, _) = reference();
        let bad = ProfileState {
            y: 1.0,
            rho: -1.0,
            omega: 0.1,
        };
        assert!(matches!(aux(&p, &bad), Err(Error::NonPositiveState { .. })));
    }

    #[test]
    fn velocity_vanishes_at_far_field_omega() {
        let (p, _) = reference();
        let state = ProfileState {
            y: 7.0,
            rho: 0.01,
            omega: 2.0 - p.gamma,
        };
        let a = aux(&p, &state).unwrap();
        assert!(a.u.abs() < 1e-15);
    }

    #[test]
    fn g_negative_near_origin() {
        let (p, _) = reference();
        for y in [1e-3, 1e-2, 0.1] {
            let state = ProfileState {
                y,
                rho: p.sonic.rho0,
                omega: p.sonic.omega0,
            };
            let a = aux(&p, &state).unwrap();
            assert!(a.g < 0.0, "G({y}) = {}", a.g);
            // G ~ -y^2 omega0^2 + O(y^n)
            let leading = -y * y * p.sonic.omega0 * p.sonic.omega0;
            assert!((a.g - leading).abs() <= 1e-3 * leading.abs(), "G({y}) = {}", a.g);
        }
    }

    #[test]
    fn mass_closed_form() {
        let (p, _) = reference();
        let state = ProfileState {
            y: 2.0,
            rho: 0.01,
            omega: 0.2,
        };
        let a = aux(&p, &state).unwrap();
        let expect = 4.0 * std::f64::consts::PI * 8.0 * 0.01 * 0.2 / p.three_omega0();
        assert!((a.mass - expect).abs() <= 1e-15 * expect);
    }

    #[test]
    fn omega_equation_singular_term_vanishes_at_omega0() {
        let (p, _) = reference();
        let state = ProfileState {
            y: 0.5,
            rho: p.sonic.rho0 * 0.9,
            omega: p.sonic.omega0,
        };
        let a = aux(&p, &state).unwrap();
        let (_, dw) = rhs(&p, &state).unwrap();
        let slope_part = -state.omega * (state.y * a.h - a.q) / a.g;
        assert!(
            (dw - slope_part).abs() <= 1e-12 * slope_part.abs().max(1e-300),
            "1/y term must vanish at omega = omega0"
        );
    }

    #[test]
    fn rhs_matches_series_at_handoff() {
        let (p, t) = reference();
        let (y0, state) = handoff(&t, 1e-10).unwrap();
        let e = series::eval(&t, y0).unwrap();
        let (dr, dw) = rhs(&p, &state).unwrap();
        assert!((dr - e.drho_dy).abs() <= 1e-8 * dr.abs());
        assert!((dw - e.domega_dy).abs() <= 1e-8 * dw.abs().max(dr.abs()));
    }

    #[test]
    fn handoff_basics_and_monotonicity() {
        let (p, t) = reference();
        let (y0, _) = handoff(&t, 1e-10).unwrap();
        assert!(y0 > 0.0 && y0 <= 0.5 * t.nu);
        // tightening rel_tol never increases y0
        let (y0_tight, _) = handoff(&t, 1e-13).unwrap();
        assert!(y0_tight <= y0 + 1e-12);
        // deepening the table shrinks the tails at fixed y, so in the
        // tail-limited regime y0 grows with the order
        let shallow = series::build(p, 10).unwrap();
        let deep = series::build(p, 20).unwrap();
        let (y0_s, _) = handoff(&shallow, 1e-10).unwrap();
        let (y0_d, _) = handoff(&deep, 1e-10).unwrap();
        assert!(y0_s < 0.5 * shallow.nu, "order 10 must be tail-limited here");
        assert!(y0_d > y0_s, "deeper table must not shrink a tail-limited y0");
        let y_probe = 0.4 * t.nu;
        let tail_30 = series::eval(&t, y_probe).unwrap().tail_rho;
        let tail_60 = series::eval(&series::build(p, 60).unwrap(), y_probe)
            .unwrap()
            .tail_rho;
        assert!(tail_60 < tail_30);
    }

    #[test]
    fn integrates_reference_case_to_ymax() {
        let (p, t) = reference();
        let controls = Controls::default();
        let result = solve_profile(&p, &t, &controls).unwrap();
        assert_eq!(result.termination, Termination::ReachedYmax);
        let last = result.samples.last().unwrap();
        assert!((last.state.y - 1e3).abs() < 1e-9 * 1e3);
        // strictly increasing y, strictly decreasing rho, G < 0 throughout
        for w in result.samples.windows(2) {
            assert!(w[1].state.y > w[0].state.y);
            assert!(w[1].state.rho < w[0].state.rho);
        }
        for s in &result.samples {
            assert!(s.aux.g < 0.0);
            assert!(s.drho_dy < 0.0);
            assert!(s.state.omega >= p.sonic.omega0);
        }
        // monotone decay toward zero
        let rho_at = |target: f64| -> f64 {
            result
                .samples
                .iter()
                .min_by(|a, b| {
                    (a.state.y - target)
                        .abs()
                        .total_cmp(&(b.state.y - target).abs())
                })
                .unwrap()
                .state
                .rho
        };
        assert!(rho_at(1e3) < rho_at(1e2) && rho_at(1e2) < rho_at(10.0));
    }

    #[test]
    fn tolerance_self_convergence() {
        let (p, t) = reference();
        let mut c1 = Controls::default();
        c1.rel_tol = 1e-10;
        let mut c2 = Controls::default();
        c2.rel_tol = 5e-11;
        let r1 = solve_profile(&p, &t, &c1).unwrap();
        let r2 = solve_profile(&p, &t, &c2).unwrap();
        let a = r1.samples.last().unwrap().state.rho;
        let b = r2.samples.last().unwrap().state.rho;
        assert!(
            (a - b).abs() / a <= 10.0 * c1.rel_tol,
            "self-convergence: {a} vs {b}"
        );
    }

    #[test]
    fn rho_floor_termination() {
        let (p, t) = reference();
        let mut controls = Controls::default();
        controls.rho_floor = 0.04; // above rho(ymax), forces the event
        let result = solve_profile(&p, &t, &controls).unwrap();
        assert_eq!(result.termination, Termination::RhoFloor);
        assert!(result.samples.last().unwrap().state.rho < 0.04);
    }

    #[test]
    fn dense_grid_spacing() {
        let (p, t) = reference();
        let controls = Controls::default();
        let result = solve_profile(&p, &t, &controls).unwrap();
        let ratio = 10f64.powf(1.0 / controls.points_per_decade as f64);
        for w in result.samples.windows(2).take(10) {
            let r = w[1].state.y / w[0].state.y;
            assert!((r - ratio).abs() < 1e-9, "grid ratio {r}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let (p, t) = reference();
        let mut controls = Controls::default();
        controls.y_max = 50.0;
        let result = solve_profile(&p, &t, &controls).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &p, &result).unwrap();
        let parsed = read_profile_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(parsed.n, 4);
        assert!((parsed.gamma - p.gamma).abs() < 1e-15);
        assert_eq!(parsed.rows.len(), result.samples.len());
        let a = &parsed.rows[3];
        let b = &result.samples[3];
        assert!((a.rho - b.state.rho).abs() <= 1e-16 * b.state.rho);
        assert!((a.g - b.aux.g).abs() <= 1e-15 * b.aux.g.abs());
    }

    #[test]
    fn truncated_csv_rejected() {
        let text = "# implosion-profiles v1 gamma=1.6666 n=4 alpha=1.3333\n";
        let err = read_profile_csv(std::io::BufReader::new(text.as_bytes()));
        assert!(matches!(err, Err(Error::MalformedProfile { .. })));
    }
}
