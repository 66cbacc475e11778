//! Scaling algebra: derives the entropy-scaling index alpha and all
//! self-similar exponents from (gamma, n), validates parameter bands, and
//! produces the boundary data at the sonic origin y = 0.
//!
//! The scaling is fixed a priori by the smoothness selection principle:
//! n(gamma, alpha) = 3(2-gamma) alpha / (4 - 3 gamma + alpha) must be an even
//! integer >= 4, which inverts to alpha = n(3 gamma - 4) / (n - 3(2-gamma)).

use serde::Serialize;

use crate::error::{Error, Result};

/// Lower edge of the admissible adiabatic exponents, gamma > 4/3.
pub const GAMMA_MIN: f64 = 4.0 / 3.0;
/// Upper edge, gamma < 2.
pub const GAMMA_MAX: f64 = 2.0;
/// Lower edge of the first band, 19/12.
pub const FIRST_BAND_LO: f64 = 19.0 / 12.0;
/// Upper edge of the first band, 11/6.
pub const FIRST_BAND_HI: f64 = 11.0 / 6.0;

/// Validated (gamma, n) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaN {
    pub gamma: f64,
    pub n: u32,
}

impl GammaN {
    /// Hard validity: gamma strictly inside (4/3, 2) and away from the
    /// singular band endpoints, n even and >= 4.
    pub fn new(gamma: f64, n: i64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= GAMMA_MIN {
            return Err(Error::GammaOutOfBand {
                gamma,
                constraint: "gamma > 4/3",
            });
        }
        if gamma >= GAMMA_MAX {
            return Err(Error::GammaOutOfBand {
                gamma,
                constraint: "gamma < 2",
            });
        }
        if n < 4 {
            return Err(Error::InvalidN {
                n,
                constraint: "n >= 4",
            });
        }
        if n % 2 != 0 {
            return Err(Error::InvalidN {
                n,
                constraint: "n even",
            });
        }
        let n = n as u32;
        if gamma == FIRST_BAND_LO {
            return Err(Error::SingularBandEndpoint {
                gamma,
                endpoint: "19/12",
            });
        }
        if gamma == FIRST_BAND_HI {
            return Err(Error::SingularBandEndpoint {
                gamma,
                endpoint: "11/6",
            });
        }
        if gamma == a_positivity_threshold(n) {
            return Err(Error::SingularBandEndpoint {
                gamma,
                endpoint: "(10+n)/9",
            });
        }
        Ok(GammaN { gamma, n })
    }

    /// First physically reasonable band, gamma in (19/12, 11/6).
    pub fn first_band(&self) -> bool {
        self.gamma > FIRST_BAND_LO && self.gamma < FIRST_BAND_HI
    }

    /// Band covered by the global-existence theorem: n in {4, 6} and
    /// gamma > max{19/12, (10+n)/9}, staying below 11/6.
    pub fn global_theorem_band(&self) -> bool {
        (self.n == 4 || self.n == 6)
            && self.first_band()
            && self.gamma > a_positivity_threshold(self.n)
    }
}

/// Threshold (10+n)/9 above which the continuation coefficient A is nonnegative.
pub fn a_positivity_threshold(n: u32) -> f64 {
    (10.0 + n as f64) / 9.0
}

/// Self-similar exponents derived from (gamma, alpha).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingIndices {
    pub alpha: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b: f64,
}

/// Boundary values at the sonic origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SonicData {
    pub rho0: f64,
    pub omega0: f64,
    pub p0: f64,
    pub m0: f64,
}

/// alpha from the inverted selection principle,
/// alpha = n(3 gamma - 4) / (n - 3(2 - gamma)).
pub fn derive_alpha(gamma: f64, n: i64) -> Result<f64> {
    let gn = GammaN::new(gamma, n)?;
    let nf = gn.n as f64;
    Ok(nf * (3.0 * gamma - 4.0) / (nf - 3.0 * (2.0 - gamma)))
}

/// Forward map n(gamma, alpha) = 3(2 - gamma) alpha / (4 - 3 gamma + alpha).
pub fn forward_n(gamma: f64, alpha: f64) -> f64 {
    3.0 * (2.0 - gamma) * alpha / (4.0 - 3.0 * gamma + alpha)
}

/// All four exponents of the two-parameter scaling family.
pub fn scaling_indices(gamma: f64, alpha: f64) -> ScalingIndices {
    ScalingIndices {
        alpha,
        a1: (alpha - 2.0) / (2.0 - gamma),
        a2: (2.0 * (1.0 - gamma) + alpha) / (2.0 * (2.0 - gamma)),
        a3: 2.0 * (alpha - gamma) / (2.0 - gamma),
        b: (2.0 - alpha) / (2.0 * (2.0 - gamma)),
    }
}

/// Boundary data at the sonic origin. rho0 = 1/(6 pi) and
/// omega0 = (4 - 3 gamma + alpha)/3 are forced by smoothness; p0 is the
/// pressure scale and m0 the bootstrap constant of the continuation argument.
pub fn sonic_data(gamma: f64, n: i64) -> Result<SonicData> {
    let alpha = derive_alpha(gamma, n)?;
    let rho0 = 1.0 / (6.0 * std::f64::consts::PI);
    let omega0 = (4.0 - 3.0 * gamma + alpha) / 3.0;
    let nf = n as f64;
    let p0 = rho0.powf(gamma) * (rho0 * omega0).powf(nf / 3.0);
    let m0 = 3.0 * (nf + 1.0) * nf / (2.0 * (gamma - 1.0) * (11.0 - 6.0 * gamma)) * rho0 * omega0;
    Ok(SonicData {
        rho0,
        omega0,
        p0,
        m0,
    })
}

/// Alternative closed form for omega0 used as a cross-check,
/// omega0 = (3 gamma - 4)(2 - gamma) / (n - 3(2 - gamma)).
pub fn omega0_closed_form(gamma: f64, n: u32) -> f64 {
    (3.0 * gamma - 4.0) * (2.0 - gamma) / (n as f64 - 3.0 * (2.0 - gamma))
}

/// Bundle of everything downstream modules need: the validated pair, the
/// derived scaling indices and the sonic boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub gamma: f64,
    pub n: u32,
    pub alpha: f64,
    pub indices: ScalingIndices,
    pub sonic: SonicData,
    pub first_band: bool,
    pub global_theorem_band: bool,
}

impl Params {
    pub fn new(gamma: f64, n: i64) -> Result<Self> {
        let gn = GammaN::new(gamma, n)?;
        let alpha = derive_alpha(gamma, n)?;
        let indices = scaling_indices(gamma, alpha);
        let sonic = sonic_data(gamma, n)?;
        Ok(Params {
            gamma,
            n: gn.n,
            alpha,
            indices,
            sonic,
            first_band: gn.first_band(),
            global_theorem_band: gn.global_theorem_band(),
        })
    }

    /// 1 - alpha/2, the factor appearing squared throughout the reduction.
    pub fn x_factor(&self) -> f64 {
        1.0 - self.alpha / 2.0
    }

    /// gamma - 1 - alpha/2.
    pub fn g_factor(&self) -> f64 {
        self.gamma - 1.0 - self.alpha / 2.0
    }

    /// 4 - 3 gamma + alpha = 3 omega0.
    pub fn three_omega0(&self) -> f64 {
        4.0 - 3.0 * self.gamma + self.alpha
    }
}

/// One validation check with outcome and context.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Structured diagnostics record: never errors, reports every constraint.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub gamma: f64,
    pub n: i64,
    pub checks: Vec<Check>,
    pub first_band: bool,
    pub global_theorem_band: bool,
    pub all_pass: bool,
    /// Resonant gamma values 4/3 + 1/(2M) for M up to the requested order.
    pub degenerate_gammas: Vec<f64>,
}

/// Evaluate every selection-principle and band constraint for (gamma, n).
/// `order` bounds the list of reported resonance values 4/3 + 1/(2M).
pub fn validate(gamma: f64, n: i64, order: usize) -> Diagnostics {
    let mut checks = Vec::new();
    let n_ok = n >= 4 && n % 2 == 0;
    checks.push(Check {
        name: "n_even_ge_4",
        pass: n_ok,
        detail: format!("n = {n}, selection principle requires n even and >= 4"),
    });
    let gamma_ok = gamma > GAMMA_MIN && gamma < GAMMA_MAX;
    checks.push(Check {
        name: "gamma_band",
        pass: gamma_ok,
        detail: format!("gamma = {gamma} must lie strictly inside (4/3, 2)"),
    });

    let mut first_band = false;
    let mut global_band = false;
    if n_ok && gamma_ok {
        let nf = n as f64;
        let alpha = nf * (3.0 * gamma - 4.0) / (nf - 3.0 * (2.0 - gamma));
        let constraints_ok = alpha > 3.0 * gamma - 4.0 && alpha < gamma && alpha > 0.0 && alpha < 2.0;
        checks.push(Check {
            name: "alpha_constraints",
            pass: constraints_ok,
            detail: format!(
                "alpha = {alpha} must lie in (3 gamma - 4, gamma) = ({}, {gamma})",
                3.0 * gamma - 4.0
            ),
        });
        let supercritical = gamma < (4.0 + alpha) / 3.0;
        checks.push(Check {
            name: "mass_supercritical",
            pass: supercritical,
            detail: format!("gamma = {gamma} must be below (4 + alpha)/3 = {}", (4.0 + alpha) / 3.0),
        });
        let a_pos = gamma >= a_positivity_threshold(n as u32);
        checks.push(Check {
            name: "a_positivity",
            pass: a_pos,
            detail: format!(
                "continuation requires gamma >= (10+n)/9 = {}; reported but not forbidden",
                a_positivity_threshold(n as u32)
            ),
        });
        first_band = gamma > FIRST_BAND_LO && gamma < FIRST_BAND_HI;
        checks.push(Check {
            name: "first_band",
            pass: first_band,
            detail: format!("gamma in (19/12, 11/6) = ({FIRST_BAND_LO}, {FIRST_BAND_HI})"),
        });
        global_band = (n == 4 || n == 6) && first_band && gamma > a_positivity_threshold(n as u32);
        checks.push(Check {
            name: "global_theorem_band",
            pass: global_band,
            detail: format!(
                "global existence proven for n in {{4, 6}} with gamma > max{{19/12, (10+n)/9}} = {}",
                FIRST_BAND_LO.max(a_positivity_threshold(n.max(0) as u32))
            ),
        });
    } else {
        checks.push(Check {
            name: "supercritical_band",
            pass: false,
            detail: "gamma <= 4/3 admits no smooth supersonic implosion profile".to_string(),
        });
    }

    let degenerate_gammas: Vec<f64> = (1..=order.max(1))
        .map(|m| GAMMA_MIN + 1.0 / (2.0 * m as f64))
        .collect();
    let all_pass = checks.iter().all(|c| c.pass);
    Diagnostics {
        gamma,
        n,
        checks,
        first_band,
        global_theorem_band: global_band,
        all_pass,
        degenerate_gammas,
    }
}
