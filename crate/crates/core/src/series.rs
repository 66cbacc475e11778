//! Taylor coefficients of (rhobar, omegabar, Qbar) in the variable
//! x = y^(n-2) at the sonic origin, built through the 2x2 matrix recurrence;
//! convergence-radius estimation and truncated-series evaluation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::params::{Params, GAMMA_MIN};

/// Resonance proximity window in gamma for the near-singular abort.
const RESONANCE_GAMMA_WINDOW: f64 = 1e-8;
/// Relative determinant floor, |det| < floor * ||A||_F^2 aborts.
const DET_REL_FLOOR: f64 = 1e-12;
/// Consecutive all-denormal orders that truncate the table.
const DENORMAL_RUN: usize = 5;
const DENORMAL_FLOOR: f64 = 1e-300;

/// Compensated accumulator for the convolution sums. Coefficients grow like
/// C^M with cancellation inside the source terms; Kahan summation keeps the
/// accumulated rounding at a few ulps.
#[derive(Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Full Cauchy convolution of two equal-length coefficient sequences,
/// truncated to the shared length.
pub fn round_product(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut out = vec![0.0; a.len()];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut acc = KahanSum::default();
        for i in 0..=m {
            acc.add(a[i] * b[m - i]);
        }
        *slot = acc.value();
    }
    Ok(out)
}

/// Trilinear Cauchy convolution, truncated to the shared length.
pub fn round_product3(a: &[f64], b: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if b.len() != c.len() {
        return Err(Error::LengthMismatch {
            left: b.len(),
            right: c.len(),
        });
    }
    let ab = round_product(a, b)?;
    round_product(&ab, c)
}

/// Order-M convolution of two sequences excluding every term that carries an
/// index equal to M, i.e. excluding the (unknown) order-M coefficients.
pub fn square_product(a: &[f64], b: &[f64], m: usize) -> Result<f64> {
    if m == 0 || a.len() < m || b.len() < m {
        return Err(Error::InsufficientOrder {
            requested: m,
            available: a.len().min(b.len()),
        });
    }
    let mut acc = KahanSum::default();
    for i in 0..=m {
        let j = m - i;
        if i == m || j == m {
            continue;
        }
        acc.add(a[i] * b[j]);
    }
    Ok(acc.value())
}

/// Order-M trilinear convolution excluding every index equal to M.
pub fn square_product3(a: &[f64], b: &[f64], c: &[f64], m: usize) -> Result<f64> {
    if m == 0 || a.len() < m || b.len() < m || c.len() < m {
        return Err(Error::InsufficientOrder {
            requested: m,
            available: a.len().min(b.len()).min(c.len()),
        });
    }
    let mut acc = KahanSum::default();
    for i in 0..m {
        for j in 0..m {
            if i + j > m {
                break;
            }
            let k = m - i - j;
            if k == m {
                continue;
            }
            acc.add(a[i] * b[j] * c[k]);
        }
    }
    Ok(acc.value())
}

/// Visit every partition of `m` as a multiplicity vector lam, where
/// lam[k-1] counts the parts equal to k.
fn for_each_partition<F: FnMut(&[usize])>(m: usize, f: &mut F) {
    fn rec<F: FnMut(&[usize])>(rem: usize, max_part: usize, lam: &mut [usize], f: &mut F) {
        if rem == 0 {
            f(lam);
            return;
        }
        let top = rem.min(max_part);
        for k in (1..=top).rev() {
            let mut cnt = 1;
            while k * cnt <= rem {
                lam[k - 1] += cnt;
                rec(rem - k * cnt, k - 1, lam, f);
                lam[k - 1] -= cnt;
                cnt += 1;
            }
        }
    }
    let mut lam = vec![0usize; m];
    rec(m, m, &mut lam, f);
}

/// Order-M Taylor coefficient of (sum_k base[k] x^k)^exponent for real
/// exponent and base[0] > 0, via the Faa di Bruno multi-index sum over
/// integer partitions of M with memoized falling-factorial products.
pub fn power_series_coeff(base: &[f64], exponent: f64, m: usize) -> Result<f64> {
    if base.is_empty() || base.len() <= m {
        return Err(Error::InsufficientOrder {
            requested: m,
            available: base.len().saturating_sub(1),
        });
    }
    if m == 0 {
        return Ok(base[0].powf(exponent));
    }
    // falling[s] = exponent (exponent-1) ... (exponent-s+1)
    let mut falling = vec![1.0; m + 1];
    for s in 1..=m {
        falling[s] = falling[s - 1] * (exponent - (s as f64 - 1.0));
    }
    let mut factorial = vec![1.0; m + 1];
    for s in 1..=m {
        factorial[s] = factorial[s - 1] * s as f64;
    }
    let mut acc = KahanSum::default();
    for_each_partition(m, &mut |lam| {
        let size: usize = lam.iter().sum();
        let mut term = falling[size] * base[0].powf(exponent - size as f64);
        for (k, &mult) in lam.iter().enumerate() {
            if mult > 0 {
                term *= base[k + 1].powi(mult as i32) / factorial[mult];
            }
        }
        acc.add(term);
    });
    Ok(acc.value())
}

/// Order-M coefficient matrix of the recurrence and its determinant.
/// Aborts when gamma sits on (or numerically indistinguishably close to) the
/// resonance gamma = 4/3 + 1/(2M), where the matrix degenerates.
pub fn matrix_am(params: &Params, m: usize) -> Result<([[f64; 2]; 2], f64)> {
    assert!(m >= 1, "matrix_am requires M >= 1");
    let gamma_star = GAMMA_MIN + 1.0 / (2.0 * m as f64);
    let dist = (params.gamma - gamma_star).abs();
    if dist <= RESONANCE_GAMMA_WINDOW {
        return Err(Error::Resonance {
            m,
            gamma: params.gamma,
            gamma_star,
            dist,
        });
    }
    let n = params.n as f64;
    let rho0 = params.sonic.rho0;
    let omega0 = params.sonic.omega0;
    let c = 2.0 / 9.0 * params.x_factor() * params.x_factor();
    let g = params.g_factor();
    let mf = m as f64;
    let a = [
        [
            mf * (n - 2.0) * omega0 * omega0 - c,
            4.0 * rho0 * omega0 + g * rho0 - c * rho0 / omega0,
        ],
        [
            -c * omega0 / rho0,
            -mf * (n - 2.0) * omega0 * omega0 + omega0 * omega0 + g * omega0 - c,
        ],
    ];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let frob_sq = a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1];
    if det.abs() < DET_REL_FLOOR * frob_sq {
        return Err(Error::Resonance {
            m,
            gamma: params.gamma,
            gamma_star,
            dist,
        });
    }
    Ok((a, det))
}

/// Per-order source pair (F_M, G_M).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePair {
    pub f: f64,
    pub g: f64,
}

/// Assemble the order-M source terms from coefficients through M-1 and Qbar
/// through M. `rho`/`omega` must expose indices 0..=M-1 and `q` indices 0..=M.
fn source_terms_raw(params: &Params, rho: &[f64], omega: &[f64], q: &[f64], m: usize) -> SourcePair {
    debug_assert!(rho.len() >= m && omega.len() >= m && q.len() > m && m >= 1);
    let n = params.n as f64;
    let rho0 = rho[0];
    let omega0 = omega[0];
    let g = params.g_factor();
    let c = 2.0 / 9.0 * params.x_factor() * params.x_factor();
    // (n-2) gamma / ((2-gamma) alpha) and 3 gamma / ((2-gamma) alpha)
    let ga = (2.0 - params.gamma) * params.alpha;
    let k_tri = (n - 2.0) * params.gamma / ga;
    let k3 = 3.0 * params.gamma / ga;

    let rww = square_product3(rho, omega, omega, m).expect("depth checked");
    let rw = square_product(rho, omega, m).expect("depth checked");
    let rrw = square_product3(rho, rho, omega, m).expect("depth checked");
    let ww = square_product(omega, omega, m).expect("depth checked");
    let www = square_product3(omega, omega, omega, m).expect("depth checked");

    let mut f = KahanSum::default();
    let mut gsum = KahanSum::default();
    f.add(-2.0 * rww);
    f.add(-g * rw);
    f.add(c * rrw / (rho0 * omega0));
    gsum.add(-3.0 * omega0 * ww);
    gsum.add(www);
    gsum.add(-g * ww);
    gsum.add(c * rww / (rho0 * omega0));

    // round coefficients of omega^2 through order m-1
    let mut w2 = vec![0.0; m];
    for (idx, slot) in w2.iter_mut().enumerate() {
        let mut acc = KahanSum::default();
        for i in 0..=idx {
            acc.add(omega[i] * omega[idx - i]);
        }
        *slot = acc.value();
    }

    // trilinear derivative convolutions: i+j+k = M with j >= 1 (omega_{j-1})
    // and k >= 1 (Qbar_0 = 0), hence i+1 <= M-1.
    for k in 1..=m {
        if q[k] == 0.0 {
            continue;
        }
        for j in 1..=(m - k) {
            let i = m - k - j;
            let weight = (i + 1) as f64 * k_tri * q[k];
            f.add(weight * rho[i + 1] * omega[j - 1]);
            gsum.add(-weight * omega[i + 1] * omega[j - 1]);
        }
    }

    // sum_{i+j=M} rho_i Qbar_j (and omega analog with the entropy correction);
    // j >= 1 since Qbar_0 = 0.
    for j in 1..=m {
        let i = m - j;
        f.add(rho[i] * q[j]);
        gsum.add(omega[i] * q[j]);
        let w2i = if i == 0 {
            omega0 * omega0
        } else {
            let mut acc = KahanSum::default();
            for a in 0..=i {
                acc.add(omega[a] * omega[i - a]);
            }
            acc.value()
        };
        gsum.add(-k3 * (w2i - omega0 * omega[i]) * q[j]);
    }

    // restricted derivative sums with i < M-1
    for i in 0..m.saturating_sub(1) {
        let j = m - i;
        let weight = (i + 1) as f64 * (n - 2.0) * w2[j - 1];
        f.add(-weight * rho[i + 1]);
        gsum.add(weight * omega[i + 1]);
    }

    SourcePair {
        f: f.value(),
        g: gsum.value(),
    }
}

/// Taylor coefficient table of the profile at the sonic origin.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    /// Highest stored order (may be below the requested order if the
    /// denormal-truncation rule fired).
    pub order: usize,
    pub rhobar: Vec<f64>,
    pub omegabar: Vec<f64>,
    pub qbar: Vec<f64>,
    pub pbar: Vec<f64>,
    pub wbar: Vec<f64>,
    pub params: Params,
    /// Estimated convergence radius in y.
    pub nu: f64,
}

/// Public view of the order-M source terms, recomputed from a finished table.
pub fn source_terms(table: &CoeffTable, m: usize) -> Result<SourcePair> {
    if m < 1 || table.order + 1 < m || table.qbar.len() <= m {
        return Err(Error::InsufficientOrder {
            requested: m,
            available: table.order,
        });
    }
    Ok(source_terms_raw(
        &table.params,
        &table.rhobar[..m],
        &table.omegabar[..m],
        &table.qbar[..=m],
        m,
    ))
}

/// Order-M coefficient of rhobar^gamma.
pub fn faa_di_bruno_p(table: &CoeffTable, m: usize) -> Result<f64> {
    power_series_coeff(&table.rhobar[..=m.min(table.order)], table.params.gamma, m)
}

/// Order-M coefficient of (rhobar omegabar)^(n/3 - 1).
pub fn faa_di_bruno_w(table: &CoeffTable, m: usize) -> Result<f64> {
    let upto = m.min(table.order);
    let rw = round_product(&table.rhobar[..=upto], &table.omegabar[..=upto])?;
    power_series_coeff(&rw, table.params.n as f64 / 3.0 - 1.0, m)
}

/// Qbar_M = (2-gamma) alpha (1-alpha/2)^2 sum_{i+j=M, i>0} Pbar_{i-1} Wbar_j.
pub fn q_coeff(table: &CoeffTable, m: usize) -> Result<f64> {
    if m > table.order {
        return Err(Error::InsufficientOrder {
            requested: m,
            available: table.order,
        });
    }
    Ok(q_coeff_raw(&table.params, &table.pbar, &table.wbar, m))
}

fn q_coeff_raw(params: &Params, pbar: &[f64], wbar: &[f64], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let scale = (2.0 - params.gamma) * params.alpha * params.x_factor() * params.x_factor();
    let mut acc = KahanSum::default();
    for i in 1..=m {
        acc.add(pbar[i - 1] * wbar[m - i]);
    }
    scale * acc.value()
}

/// Build the coefficient table through order `m_max` (>= 2). The first-order
/// solve uses the explicit closed forms; the matrix A_M is only guaranteed
/// invertible for M > 1.
pub fn build(params: Params, m_max: usize) -> Result<CoeffTable> {
    assert!(m_max >= 2, "build requires m_max >= 2");
    let n = params.n as f64;
    let rho0 = params.sonic.rho0;
    let omega0 = params.sonic.omega0;
    let p0 = params.sonic.p0;
    let gamma = params.gamma;

    let mut rho = Vec::with_capacity(m_max + 1);
    let mut omega = Vec::with_capacity(m_max + 1);
    let mut q = vec![0.0];
    let mut pbar = Vec::with_capacity(m_max + 1);
    let mut wbar = Vec::with_capacity(m_max + 1);
    let mut rw = Vec::with_capacity(m_max + 1);

    rho.push(rho0);
    omega.push(omega0);
    rw.push(rho0 * omega0);
    pbar.push(rho0.powf(gamma));
    wbar.push((rho0 * omega0).powf(n / 3.0 - 1.0));

    let mut denormal_run = 0usize;
    for m in 1..=m_max {
        let qm = q_coeff_raw(&params, &pbar, &wbar, m);
        q.push(qm);
        let (rho_m, omega_m) = if m == 1 {
            let denom = 2.0 * (gamma - 1.0) * (11.0 - 6.0 * gamma);
            (
                -3.0 * (n + 1.0) * n / denom * p0,
                3.0 * n * (n - 2.0) / denom * (omega0 / rho0) * p0,
            )
        } else {
            let (a, det) = matrix_am(&params, m)?;
            let src = source_terms_raw(&params, &rho, &omega, &q, m);
            (
                (a[1][1] * src.f - a[0][1] * src.g) / det,
                (a[0][0] * src.g - a[1][0] * src.f) / det,
            )
        };
        rho.push(rho_m);
        omega.push(omega_m);
        let mut acc = KahanSum::default();
        for i in 0..=m {
            acc.add(rho[i] * omega[m - i]);
        }
        rw.push(acc.value());
        pbar.push(power_series_coeff(&rho, gamma, m)?);
        wbar.push(power_series_coeff(&rw, n / 3.0 - 1.0, m)?);

        if rho_m.abs() < DENORMAL_FLOOR && omega_m.abs() < DENORMAL_FLOOR {
            denormal_run += 1;
            if denormal_run >= DENORMAL_RUN {
                break;
            }
        } else {
            denormal_run = 0;
        }
    }

    let order = rho.len() - 1;
    let mut table = CoeffTable {
        order,
        rhobar: rho,
        omegabar: omega,
        qbar: q,
        pbar,
        wbar,
        params,
        nu: f64::INFINITY,
    };
    table.nu = radius_estimate(&table);
    Ok(table)
}

/// Convergence-radius estimate nu (in y): reciprocal of the geometric-mean
/// root-test growth rate of |rhobar_M|^(1/M), |omegabar_M|^(1/M) over the
/// top half of the table, mapped through x = y^(n-2). Returns +inf when the
/// tail is identically zero.
pub fn radius_estimate(table: &CoeffTable) -> f64 {
    let m_max = table.order;
    let lo = m_max / 2 + 1;
    let mut log_sum = KahanSum::default();
    let mut count = 0usize;
    for m in lo..=m_max {
        for coeff in [table.rhobar[m].abs(), table.omegabar[m].abs()] {
            if coeff > DENORMAL_FLOOR {
                log_sum.add(coeff.ln() / m as f64);
                count += 1;
            }
        }
    }
    if count == 0 {
        return f64::INFINITY;
    }
    let growth = (log_sum.value() / count as f64).exp();
    let x_rad = 1.0 / growth;
    x_rad.powf(1.0 / (table.params.n as f64 - 2.0))
}

/// Truncated-series evaluation at y together with first derivatives and the
/// last-term tail estimates.
#[derive(Debug, Clone, Copy)]
pub struct SeriesEval {
    pub rho: f64,
    pub omega: f64,
    pub drho_dy: f64,
    pub domega_dy: f64,
    pub tail_rho: f64,
    pub tail_omega: f64,
}

/// Horner evaluation in x = y^(n-2); derivatives by term-wise differentiation
/// with the chain-rule factor (n-2) y^(n-3). Refuses y at or beyond the
/// estimated radius.
pub fn eval(table: &CoeffTable, y: f64) -> Result<SeriesEval> {
    if !y.is_finite() || y.abs() >= table.nu {
        return Err(Error::OutsideRadius { y, nu: table.nu });
    }
    let n = table.params.n as f64;
    let x = y.powi(table.params.n as i32 - 2);
    let mut rho = 0.0;
    let mut omega = 0.0;
    let mut drho_dx = 0.0;
    let mut domega_dx = 0.0;
    for m in (0..=table.order).rev() {
        rho = rho * x + table.rhobar[m];
        omega = omega * x + table.omegabar[m];
        if m >= 1 {
            drho_dx = drho_dx * x + m as f64 * table.rhobar[m];
            domega_dx = domega_dx * x + m as f64 * table.omegabar[m];
        }
    }
    let chain = (n - 2.0) * y.powi(table.params.n as i32 - 3);
    let xm = x.abs().powi(table.order as i32);
    Ok(SeriesEval {
        rho,
        omega,
        drho_dy: drho_dx * chain,
        domega_dy: domega_dx * chain,
        tail_rho: table.rhobar[table.order].abs() * xm,
        tail_omega: table.omegabar[table.order].abs() * xm,
    })
}

/// Exact term-by-term integral of 4 pi z^2 rho(z) from 0 to y, used to seed
/// the mass quadrature inside the series region.
pub fn mass_integral(table: &CoeffTable, y: f64) -> Result<f64> {
    if !y.is_finite() || y.abs() >= table.nu {
        return Err(Error::OutsideRadius { y, nu: table.nu });
    }
    let n = table.params.n as i32;
    let mut acc = KahanSum::default();
    for m in 0..=table.order {
        let power = m as i32 * (n - 2) + 3;
        acc.add(table.rhobar[m] * y.powi(power) / power as f64);
    }
    Ok(4.0 * std::f64::consts::PI * acc.value())
}

impl CoeffTable {
    /// CSV dump: `M,rhobar,omegabar,Qbar,Pbar,Wbar` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "M,rhobar,omegabar,Qbar,Pbar,Wbar")?;
        for m in 0..=self.order {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                m, self.rhobar[m], self.omegabar[m], self.qbar[m], self.pbar[m], self.wbar[m]
            )?;
        }
        Ok(())
    }
}
