//! Cross-module integration checks: the truncated series against the ODE,
//! exact-solution preservation by the integrator, and the conserved-quantity
//! identities along full trajectories.

use implosion_core::params::Params;
use implosion_core::physical::far_field;
use implosion_core::profile::{self, Controls, HandoffInfo, ProfileState, Termination};
use implosion_core::series;

fn reference() -> (Params, series::CoeffTable) {
    let p = Params::new(5.0 / 3.0, 4).unwrap();
    let t = series::build(p, 30).unwrap();
    (p, t)
}

/// Relative residual of the two ODE components on the truncated series at y.
fn series_residual(p: &Params, t: &series::CoeffTable, y: f64) -> f64 {
    let e = series::eval(t, y).unwrap();
    let state = ProfileState {
        y,
        rho: e.rho,
        omega: e.omega,
    };
    let (dr, dw) = profile::rhs(p, &state).unwrap();
    let res_rho = (dr - e.drho_dy).abs() / dr.abs();
    let res_omega = (dw - e.domega_dy).abs() / dw.abs().max(dr.abs());
    res_rho.max(res_omega)
}

#[test]
fn series_ode_residual_small_at_half_radius() {
    let (p, t) = reference();
    let res = series_residual(&p, &t, 0.5 * t.nu);
    assert!(res <= 1e-8, "residual at nu/2: {res:.3e}");
}

#[test]
fn series_ode_residual_slope_exceeds_ten() {
    let (p, t) = reference();
    // fit the log-log slope between 0.55 nu and 0.80 nu, where the residual
    // is far above roundoff and far below the radius boundary
    let mut pts = Vec::new();
    for i in 0..8 {
        let frac = 0.55 + 0.25 * i as f64 / 7.0;
        let y = frac * t.nu;
        let r = series_residual(&p, &t, y);
        if r > 1e-15 {
            pts.push((y.ln(), r.ln()));
        }
    }
    assert!(pts.len() >= 4, "not enough clean residual points");
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!(slope > 10.0, "residual slope {slope}");
}

#[test]
fn far_field_preserved_over_one_decade() {
    for (gamma, n) in [(5.0 / 3.0, 4i64), (1.7, 4), (1.8, 6)] {
        let p = Params::new(gamma, n).unwrap();
        let ff = far_field(&p).unwrap();
        // start deep enough into the supersonic region of the far-field
        let y_start = 30.0;
        let state0 = ff.state(y_start);
        let a = profile::aux(&p, &state0).unwrap();
        assert!(a.g < 0.0, "far-field must be supersonic at y = {y_start}");
        let controls = Controls {
            y_max: 10.0 * y_start,
            enforce_region: false,
            ..Controls::default()
        };
        let info = HandoffInfo {
            y0: y_start,
            order: 0,
            nu: f64::INFINITY,
        };
        let result = profile::integrate(&p, &state0, info, &controls);
        assert_eq!(result.termination, Termination::ReachedYmax);
        for s in &result.samples {
            let expect_rho = ff.rho(s.state.y);
            assert!(
                (s.state.rho - expect_rho).abs() <= 1e-7 * expect_rho,
                "rho drift at gamma={gamma}, y={}: {} vs {expect_rho}",
                s.state.y,
                s.state.rho
            );
            assert!(
                (s.state.omega - ff.omega_f).abs() <= 1e-7 * ff.omega_f,
                "omega drift at gamma={gamma}, y={}",
                s.state.y
            );
        }
    }
}

#[test]
fn mass_quadrature_matches_closed_form_everywhere() {
    use implosion_core::monitor;
    let (p, t) = reference();
    let r = profile::solve_profile(&p, &t, &Controls::default()).unwrap();
    let seed = series::mass_integral(&t, r.handoff.y0).unwrap();
    let worst = monitor::mass_identity_residual(&p, &r.samples, seed);
    assert!(worst <= 1e-6, "mass identity residual {worst:.3e}");
    // the seed itself must agree with the closed form at y0
    let closed = implosion_core::physical::mass(&p, &r.samples[0].state);
    assert!((seed - closed).abs() <= 1e-9 * closed);
}

#[test]
fn entropy_residual_small_everywhere() {
    use implosion_core::monitor;
    let (p, t) = reference();
    let r = profile::solve_profile(&p, &t, &Controls::default()).unwrap();
    let worst = monitor::entropy_residual(&p, &r.samples);
    assert!(worst <= 1e-8, "entropy residual {worst:.3e}");
}

#[test]
fn supersonic_monitor_on_full_trajectory() {
    use implosion_core::monitor;
    let (p, t) = reference();
    let r = profile::solve_profile(&p, &t, &Controls::default()).unwrap();
    let sm = monitor::supersonic_margin(&p, &r.samples, r.handoff.y0);
    assert!(sm.g0_estimate > 0.0);
    assert!(sm.omega_upper_observed < sm.omega_upper_bound);
    assert!(sm.lower_bound_min_slack >= 0.0, "slack {:.3e}", sm.lower_bound_min_slack);
}
