//! Physical-space reconstruction: the exact far-field power-law solution,
//! fluid velocity and local mass, and the time-dependent fields recovered
//! from a self-similar profile.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::profile::{aux, ProfileResult, ProfileState};
use crate::series::{self, CoeffTable};

/// Exact power-law steady solution describing the y -> infinity behaviour.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FarField {
    pub rhobar_f: f64,
    pub rho_exponent: f64,
    pub p_amplitude: f64,
    pub p_exponent: f64,
    pub omega_f: f64,
}

/// Far-field solution rho_f = rhobar_f y^"(2-alpha)/(gamma-2)", omega_f = 2 - gamma.
pub fn far_field(params: &Params) -> Result<FarField> {
    let gamma = params.gamma;
    let alpha = params.alpha;
    if gamma == alpha {
        return Err(Error::GammaEqualsAlpha { gamma });
    }
    let three_omega0 = params.three_omega0();
    let bracket = 2.0 * std::f64::consts::PI * (2.0 - gamma) * (2.0 - gamma)
        / ((gamma - alpha) * three_omega0);
    let rhobar_f = bracket.powf(-three_omega0 / ((2.0 - gamma) * (4.0 - 3.0 * gamma)))
        * (2.0 - gamma).powf(alpha / (4.0 - 3.0 * gamma));
    Ok(FarField {
        rhobar_f,
        rho_exponent: (2.0 - alpha) / (gamma - 2.0),
        p_amplitude: bracket * rhobar_f * rhobar_f,
        p_exponent: 2.0 * (gamma - alpha) / (gamma - 2.0),
        omega_f: 2.0 - gamma,
    })
}

impl FarField {
    pub fn rho(&self, y: f64) -> f64 {
        self.rhobar_f * y.powf(self.rho_exponent)
    }

    pub fn pressure(&self, y: f64) -> f64 {
        self.p_amplitude * y.powf(self.p_exponent)
    }

    pub fn state(&self, y: f64) -> ProfileState {
        ProfileState {
            y,
            rho: self.rho(y),
            omega: self.omega_f,
        }
    }

    pub fn drho_dy(&self, y: f64) -> f64 {
        self.rho_exponent * self.rho(y) / y
    }
}

/// Fluid velocity u = 2 y (omega - (2 - gamma)) / (2 - alpha); u(0) = 0.
pub fn velocity(params: &Params, state: &ProfileState) -> f64 {
    2.0 * state.y * (state.omega - (2.0 - params.gamma)) / (2.0 - params.alpha)
}

/// Local mass M[rho](y) = 4 pi y^3 rho omega / (4 - 3 gamma + alpha).
pub fn mass(params: &Params, state: &ProfileState) -> f64 {
    4.0 * std::f64::consts::PI / params.three_omega0() * state.y.powi(3) * state.rho * state.omega
}

/// Profile evaluator bridging the series region and the integrated samples:
/// the series is exact inside the handoff radius; beyond it a monotone cubic
/// (Fritsch-Carlson) interpolant on the log-y dense grid is used.
pub struct ProfileInterp<'a> {
    table: &'a CoeffTable,
    y0: f64,
    s: Vec<f64>,
    rho: Pchip,
    omega: Pchip,
}

struct Pchip {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    /// Fritsch-Carlson monotone slopes on an (s, v) grid.
    fn new(s: &[f64], v: &[f64]) -> Pchip {
        let n = v.len();
        let mut slopes = vec![0.0; n];
        if n < 2 {
            return Pchip {
                values: v.to_vec(),
                slopes,
            };
        }
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = v
            .windows(2)
            .zip(&h)
            .map(|(w, hk)| (w[1] - w[0]) / hk)
            .collect();
        slopes[0] = d[0];
        slopes[n - 1] = d[n - 2];
        for k in 1..n - 1 {
            if d[k - 1] * d[k] <= 0.0 {
                slopes[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
            }
        }
        Pchip {
            values: v.to_vec(),
            slopes,
        }
    }

    fn eval(&self, s: &[f64], x: f64) -> f64 {
        let k = match s.binary_search_by(|a| a.total_cmp(&x)) {
            Ok(i) => return self.values[i],
            Err(i) => i.clamp(1, s.len() - 1) - 1,
        };
        let h = s[k + 1] - s[k];
        let t = (x - s[k]) / h;
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        v0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * (t3 - 2.0 * t2 + t)
            + v1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * (t3 - t2)
    }
}

impl<'a> ProfileInterp<'a> {
    pub fn new(table: &'a CoeffTable, result: &ProfileResult) -> Self {
        let s: Vec<f64> = result.samples.iter().map(|p| p.state.y.ln()).collect();
        let rho: Vec<f64> = result.samples.iter().map(|p| p.state.rho).collect();
        let omega: Vec<f64> = result.samples.iter().map(|p| p.state.omega).collect();
        ProfileInterp {
            table,
            y0: result.handoff.y0,
            rho: Pchip::new(&s, &rho),
            omega: Pchip::new(&s, &omega),
            s,
        }
    }

    pub fn y_max(&self) -> f64 {
        self.s.last().map(|s| s.exp()).unwrap_or(self.y0)
    }

    /// State at y: series inside the handoff radius, monotone cubic beyond.
    pub fn eval(&self, y: f64) -> Result<ProfileState> {
        if y < 0.0 {
            return Err(Error::OutOfProfileRange {
                y,
                y_min: 0.0,
                y_max: self.y_max(),
            });
        }
        if y <= self.y0 {
            let e = series::eval(self.table, y)?;
            return Ok(ProfileState {
                y,
                rho: e.rho,
                omega: e.omega,
            });
        }
        let x = y.ln();
        if x > *self.s.last().unwrap_or(&f64::NEG_INFINITY) + 1e-12 {
            return Err(Error::OutOfProfileRange {
                y,
                y_min: 0.0,
                y_max: self.y_max(),
            });
        }
        Ok(ProfileState {
            y,
            rho: self.rho.eval(&self.s, x),
            omega: self.omega.eval(&self.s, x),
        })
    }
}

/// Physical-space fields at one (t, r) point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhysicalSample {
    pub t: f64,
    pub r: f64,
    pub y: f64,
    pub rho_tilde: f64,
    pub u_tilde: f64,
    pub p_tilde: f64,
    pub mass: f64,
}

/// Reconstruct (rho~, u~, p~, M~) at physical (t, r) with t < 0, r > 0 from
/// the self-similar profile: y = r/(-t)^(1/b) and each field carries its
/// (-t) power from the scaling ansatz.
pub fn physical_fields(
    params: &Params,
    interp: &ProfileInterp,
    t: f64,
    r: f64,
) -> Result<PhysicalSample> {
    if !(t < 0.0) || !(r > 0.0) {
        return Err(Error::NonPositiveState {
            y: r,
            rho: t,
            omega: f64::NAN,
        });
    }
    let idx = &params.indices;
    let mt = -t;
    let y = r / mt.powf(1.0 / idx.b);
    let state = interp.eval(y)?;
    let a = if y > 0.0 {
        Some(aux(params, &state)?)
    } else {
        None
    };
    let p = match &a {
        Some(a) => a.p,
        None => {
            // pressure closure at the origin state: p = rho^gamma (y^3 rho omega)^(n/3)
            0.0
        }
    };
    let u = velocity(params, &state);
    let m = mass(params, &state);
    Ok(PhysicalSample {
        t,
        r,
        y,
        rho_tilde: mt.powf(idx.a1 / idx.b) * state.rho,
        u_tilde: mt.powf(idx.a2 / idx.b) * u,
        p_tilde: mt.powf(idx.a3 / idx.b) * p,
        mass: mt.powf((idx.a1 + 3.0) / idx.b) * m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{self, rhs, Controls};

    fn reference() -> (Params, CoeffTable) {
        let p = Params::new(5.0 / 3.0, 4).unwrap();
        let t = series::build(p, 30).unwrap();
        (p, t)
    }

    #[test]
    fn far_field_reference_values() {
        let (p, _) = reference();
        let ff = far_field(&p).unwrap();
        assert!((ff.rho_exponent + 2.0).abs() < 1e-13);
        assert!((ff.omega_f - 1.0 / 3.0).abs() < 1e-15);
        // amplitude 2 pi 3^(4/3), pinned by the pressure closure
        let expect = 2.0 * std::f64::consts::PI * 3f64.powf(4.0 / 3.0);
        assert!(
            (ff.rhobar_f - expect).abs() <= 1e-12 * expect,
            "rhobar_f = {}",
            ff.rhobar_f
        );
    }

    #[test]
    fn far_field_pressure_matches_closure() {
        for (gamma, n) in [(5.0 / 3.0, 4i64), (1.7, 4), (1.8, 6)] {
            let p = Params::new(gamma, n).unwrap();
            let ff = far_field(&p).unwrap();
            for y in [1.0, 10.0, 100.0] {
                let a = aux(&p, &ff.state(y)).unwrap();
                let pf = ff.pressure(y);
                assert!(
                    (a.p - pf).abs() <= 1e-12 * pf,
                    "closure mismatch at gamma={gamma}, y={y}: {} vs {pf}",
                    a.p
                );
            }
        }
    }

    #[test]
    fn far_field_is_exact_solution() {
        for (gamma, n) in [(5.0 / 3.0, 4i64), (1.7, 4), (1.8, 6)] {
            let p = Params::new(gamma, n).unwrap();
            let ff = far_field(&p).unwrap();
            for y in [1.0, 10.0, 100.0] {
                let state = ff.state(y);
                let (dr, dw) = rhs(&p, &state).unwrap();
                let expect = ff.drho_dy(y);
                assert!(
                    (dr - expect).abs() <= 1e-12 * expect.abs(),
                    "rho' mismatch at gamma={gamma}, y={y}"
                );
                // omega' = 0: compare against the magnitude of the two
                // cancelling O(1/y) pieces
                let scale = (p.three_omega0() - 3.0 * ff.omega_f).abs() / y;
                assert!(
                    dw.abs() <= 1e-12 * scale.max(expect.abs()),
                    "omega' = {dw} at gamma={gamma}, y={y}"
                );
            }
        }
    }

    #[test]
    fn velocity_signs_and_zeros() {
        let (p, t) = reference();
        let far = ProfileState {
            y: 5.0,
            rho: 0.01,
            omega: 2.0 - p.gamma,
        };
        assert_eq!(velocity(&p, &far), 0.0);
        let origin = ProfileState {
            y: 0.0,
            rho: p.sonic.rho0,
            omega: p.sonic.omega0,
        };
        assert_eq!(velocity(&p, &origin), 0.0);
        // infall near the centre: omega0 < 2 - gamma in the first band
        let e = series::eval(&t, 0.05).unwrap();
        let near = ProfileState {
            y: 0.05,
            rho: e.rho,
            omega: e.omega,
        };
        assert!(velocity(&p, &near) < 0.0);
    }

    #[test]
    fn mass_zero_at_origin_and_far_field_slope() {
        let (p, _) = reference();
        let origin = ProfileState {
            y: 0.0,
            rho: p.sonic.rho0,
            omega: p.sonic.omega0,
        };
        assert_eq!(mass(&p, &origin), 0.0);
        let ff = far_field(&p).unwrap();
        // M proportional to y^(3 + rho_exponent) = y at (5/3, 4)
        let m1 = mass(&p, &ff.state(50.0));
        let m2 = mass(&p, &ff.state(100.0));
        assert!((m2 / m1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn interp_matches_series_and_samples() {
        let (p, t) = reference();
        let mut controls = Controls::default();
        controls.y_max = 100.0;
        let result = profile::solve_profile(&p, &t, &controls).unwrap();
        let interp = ProfileInterp::new(&t, &result);
        // inside the handoff radius: series values
        let y_in = 0.3 * result.handoff.y0;
        let st = interp.eval(y_in).unwrap();
        let e = series::eval(&t, y_in).unwrap();
        assert_eq!(st.rho, e.rho);
        // at a sample point: exact sample value
        let s = &result.samples[10];
        let st = interp.eval(s.state.y).unwrap();
        assert!((st.rho - s.state.rho).abs() <= 1e-13 * s.state.rho);
        // between samples: close to a re-integrated value
        let y_mid = (result.samples[10].state.y * result.samples[11].state.y).sqrt();
        let st_mid = interp.eval(y_mid).unwrap();
        let mut fine = controls;
        fine.points_per_decade = 1024;
        let dense = profile::solve_profile(&p, &t, &fine).unwrap();
        let closest = dense
            .samples
            .iter()
            .min_by(|a, b| {
                (a.state.y - y_mid)
                    .abs()
                    .total_cmp(&(b.state.y - y_mid).abs())
            })
            .unwrap();
        assert!(
            (st_mid.rho - closest.state.rho).abs() <= 1e-6 * closest.state.rho,
            "interp error {} vs {}",
            st_mid.rho,
            closest.state.rho
        );
        assert!(matches!(
            interp.eval(1e4),
            Err(Error::OutOfProfileRange { .. })
        ));
    }

    #[test]
    fn scaling_equivariance() {
        let (p, t) = reference();
        let mut controls = Controls::default();
        controls.y_max = 100.0;
        let result = profile::solve_profile(&p, &t, &controls).unwrap();
        let interp = ProfileInterp::new(&t, &result);
        let (t0, r0) = (-1.0e-2, 0.5);
        let base = physical_fields(&p, &interp, t0, r0).unwrap();
        for lambda in [0.5f64, 2.0, 10.0] {
            let scaled = physical_fields(
                &p,
                &interp,
                lambda.powf(p.indices.b) * t0,
                lambda * r0,
            )
            .unwrap();
            let expect = lambda.powf(p.indices.a1) * base.rho_tilde;
            assert!(
                (scaled.rho_tilde - expect).abs() <= 1e-12 * expect.abs(),
                "equivariance at lambda={lambda}: {} vs {expect}",
                scaled.rho_tilde
            );
        }
    }

    #[test]
    fn central_density_blows_up() {
        let (p, t) = reference();
        let mut controls = Controls::default();
        controls.y_max = 50.0;
        let result = profile::solve_profile(&p, &t, &controls).unwrap();
        let interp = ProfileInterp::new(&t, &result);
        let r = 1e-6;
        let a = physical_fields(&p, &interp, -1e-2, r).unwrap();
        let b = physical_fields(&p, &interp, -1e-4, r).unwrap();
        // rho~(t, 0) = (-t)^(a1/b) rho0 with a1/b < 0
        assert!(p.indices.a1 / p.indices.b < 0.0);
        assert!(b.rho_tilde > a.rho_tilde);
        let ratio = b.rho_tilde / a.rho_tilde;
        let expect = (1e-4f64 / 1e-2).powf(p.indices.a1 / p.indices.b);
        assert!((ratio - expect).abs() <= 1e-6 * expect);
    }

    #[test]
    fn physical_domain_rejected() {
        let (p, t) = reference();
        let controls = Controls {
            y_max: 20.0,
            ..Controls::default()
        };
        let result = profile::solve_profile(&p, &t, &controls).unwrap();
        let interp = ProfileInterp::new(&t, &result);
        assert!(physical_fields(&p, &interp, 1.0, 0.5).is_err());
        assert!(physical_fields(&p, &interp, -1.0, -0.5).is_err());
    }
}
