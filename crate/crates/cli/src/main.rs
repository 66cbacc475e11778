//! Command-line entry point wiring params -> series -> profile -> monitor ->
//! physical, with reproducible CSV/JSON outputs.
//!
//! Exit codes: 0 on success/verdict pass, 1 on usage or configuration
//! errors, 2 on computational failures (resonance aborts, sonic crossings,
//! invariant violations, failed verification).

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use implosion_core::monitor::{self, RunEcho};
use implosion_core::params::{self, Params};
use implosion_core::physical;
use implosion_core::profile::{self, Controls, HandoffInfo, ProfileResult, ProfileState, Termination};
use implosion_core::series;
use implosion_core::Error;

#[derive(Parser)]
#[command(
    name = "implosion",
    about = "Self-similar supersonic gravitational-implosion profiles of the non-isentropic Euler-Poisson system"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Adiabatic exponent, decimal or fraction p/q (e.g. 5/3)
    #[arg(long)]
    gamma: String,
    /// Regularity index, even integer >= 4
    #[arg(long)]
    n: i64,
    /// Series truncation order
    #[arg(long, default_value_t = 30)]
    order: usize,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Outer edge of the integration in y
    #[arg(long, default_value_t = 1e3)]
    ymax: f64,
    /// Per-step relative tolerance and series handoff tolerance
    #[arg(long = "rel-tol", default_value_t = 1e-10)]
    rel_tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Build the series, integrate to ymax, verify and export profile + report
    Solve {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Profile CSV output path
        #[arg(long, default_value = "profile.csv")]
        out: PathBuf,
        /// Verification report JSON output path
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        /// Run outside the proven global-existence band
        #[arg(long)]
        force: bool,
    },
    /// Dump the Taylor coefficient table as CSV
    Coeffs {
        #[command(flatten)]
        params: ParamArgs,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a gamma range: band flags, coefficient signs, bootstrap margins
    Scan {
        #[arg(long = "gamma-min")]
        gamma_min: String,
        #[arg(long = "gamma-max")]
        gamma_max: String,
        /// Number of grid points
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        n: i64,
        #[arg(long, default_value_t = 30)]
        order: usize,
        /// Allow the range to leave the first band (19/12, 11/6)
        #[arg(long)]
        force: bool,
    },
    /// Re-run all monitor checks on a stored profile CSV
    Verify {
        /// Profile CSV produced by `solve`
        profile: PathBuf,
        /// Optional report JSON output path
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        order: usize,
    },
    /// Reconstruct physical-space fields at (t, r) points
    Fields {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Physical time, strictly negative
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Radii, comma separated or repeated
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        r: Vec<f64>,
    },
}

fn parse_gamma(text: &str) -> Result<f64, String> {
    if let Some((p, q)) = text.split_once('/') {
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| format!("unparsable fraction numerator `{p}`"))?;
        let q: f64 = q
            .trim()
            .parse()
            .map_err(|_| format!("unparsable fraction denominator `{q}`"))?;
        if q == 0.0 {
            return Err("fraction denominator is zero".into());
        }
        Ok(p / q)
    } else {
        text.trim()
            .parse()
            .map_err(|_| format!("unparsable gamma `{text}`"))
    }
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

/// Exit code for a core error: configuration problems are 1, computational
/// aborts are 2.
fn code_for(err: &Error) -> i32 {
    match err {
        Error::GammaOutOfBand { .. }
        | Error::InvalidN { .. }
        | Error::SingularBandEndpoint { .. }
        | Error::OrderTooLow { .. }
        | Error::MalformedProfile { .. } => 1,
        _ => 2,
    }
}

fn make_params(args: &ParamArgs) -> Result<Params, i32> {
    let gamma = parse_gamma(&args.gamma).map_err(|m| fail(1, m))?;
    Params::new(gamma, args.n).map_err(|e| fail(code_for(&e), e))
}

fn cmd_solve(args: ParamArgs, run: RunArgs, out: PathBuf, report: PathBuf, force: bool) -> i32 {
    let params = match make_params(&args) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if !params.global_theorem_band && !force {
        return fail(
            1,
            format!(
                "(gamma = {}, n = {}) lies outside the proven global-existence band \
                 (n in {{4, 6}} and gamma > max{{19/12, (10+n)/9}} = {}); \
                 pass --force to integrate anyway",
                params.gamma,
                params.n,
                (19.0f64 / 12.0).max(params::a_positivity_threshold(params.n))
            ),
        );
    }
    let table = match series::build(params, args.order.max(2)) {
        Ok(t) => t,
        Err(e) => return fail(code_for(&e), e),
    };
    let controls = Controls {
        rel_tol: run.rel_tol,
        y_max: run.ymax,
        ..Controls::default()
    };
    let result = match profile::solve_profile(&params, &table, &controls) {
        Ok(r) => r,
        Err(e) => return fail(code_for(&e), e),
    };
    let seed = match series::mass_integral(&table, result.handoff.y0) {
        Ok(s) => s,
        Err(e) => return fail(code_for(&e), e),
    };
    let echo = RunEcho {
        order: table.order,
        y_max: controls.y_max,
        rel_tol: controls.rel_tol,
        rho_floor: controls.rho_floor,
        points_per_decade: controls.points_per_decade,
    };
    let rep = monitor::verify(&params, &result, seed, echo);

    let mut csv = Vec::new();
    if let Err(e) = profile::write_profile_csv(&mut csv, &params, &result) {
        return fail(1, e);
    }
    if let Err(e) = fs::write(&out, &csv) {
        return fail(1, format!("cannot write {}: {e}", out.display()));
    }
    if let Err(e) = fs::write(&report, rep.to_json()) {
        return fail(1, format!("cannot write {}: {e}", report.display()));
    }
    eprintln!(
        "solve: gamma = {}, n = {}, y0 = {:.6e}, nu = {:.6e}, termination = {:?}",
        params.gamma, params.n, result.handoff.y0, result.handoff.nu, result.termination
    );
    for note in &rep.verdict.notes {
        eprintln!("note: {note}");
    }
    if rep.verdict.pass {
        eprintln!("verdict: pass ({} samples)", result.samples.len());
        0
    } else {
        for f in &rep.verdict.failures {
            eprintln!("failure: {f}");
        }
        2
    }
}

fn cmd_coeffs(args: ParamArgs, out: Option<PathBuf>) -> i32 {
    let params = match make_params(&args) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let order = args.order.max(1);
    let table = match series::build(params, order.max(2)) {
        Ok(t) => t,
        Err(e) => return fail(code_for(&e), e),
    };
    let table = if table.order > order {
        let mut t = table;
        t.order = order;
        t.rhobar.truncate(order + 1);
        t.omegabar.truncate(order + 1);
        t.qbar.truncate(order + 1);
        t.pbar.truncate(order + 1);
        t.wbar.truncate(order + 1);
        t
    } else {
        table
    };
    let mut buf = Vec::new();
    if let Err(e) = table.write_csv(&mut buf) {
        return fail(1, e);
    }
    match out {
        Some(path) => {
            if let Err(e) = fs::write(&path, &buf) {
                return fail(1, format!("cannot write {}: {e}", path.display()));
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(&buf).is_err() {
                return 1;
            }
        }
    }
    0
}

fn sign_char(v: f64) -> &'static str {
    if v > 0.0 {
        "+1"
    } else if v < 0.0 {
        "-1"
    } else {
        "0"
    }
}

fn sanitize(message: &str) -> String {
    message.replace(',', ";")
}

fn scan_row(gamma: f64, n: i64, order: usize) -> String {
    let diag = params::validate(gamma, n, order);
    let base = format!(
        "{gamma:.12e},{},{}",
        diag.first_band, diag.global_theorem_band
    );
    let params = match Params::new(gamma, n) {
        Ok(p) => p,
        Err(e) => return format!("{base},,,,,,,,,,error,{}", sanitize(&e.to_string())),
    };
    let table = match series::build(params, order.max(2)) {
        Ok(t) => t,
        Err(e) => return format!("{base},,,,,,,,,,error,{}", sanitize(&e.to_string())),
    };
    let (c_b1, c_b3) = monitor::bootstrap_opening(&params, &table);
    let signs = format!(
        "{},{},{},{}",
        sign_char(table.rhobar[1]),
        sign_char(table.omegabar[1]),
        sign_char(c_b1),
        sign_char(c_b3)
    );
    let controls = Controls {
        y_max: 10.0,
        enforce_region: false,
        ..Controls::default()
    };
    match profile::solve_profile(&params, &table, &controls) {
        Ok(result) => {
            let mut mins = [f64::INFINITY; 5];
            for s in result.samples.iter().skip(1) {
                let flags = monitor::bootstrap(&params, &s.state, (s.drho_dy, s.domega_dy));
                for i in 0..5 {
                    mins[i] = mins[i].min(flags.margins[i]);
                }
            }
            format!(
                "{base},{signs},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:?},",
                mins[0], mins[1], mins[2], mins[3], mins[4], result.termination
            )
        }
        Err(e) => format!("{base},{signs},,,,,,error,{}", sanitize(&e.to_string())),
    }
}

fn cmd_scan(
    gamma_min: String,
    gamma_max: String,
    steps: usize,
    n: i64,
    order: usize,
    force: bool,
) -> i32 {
    let lo = match parse_gamma(&gamma_min) {
        Ok(g) => g,
        Err(m) => return fail(1, m),
    };
    let hi = match parse_gamma(&gamma_max) {
        Ok(g) => g,
        Err(m) => return fail(1, m),
    };
    if !(lo < hi) || lo <= 4.0 / 3.0 || hi >= 2.0 {
        return fail(1, "scan range must satisfy 4/3 < gamma_min < gamma_max < 2");
    }
    if !force && (lo < params::FIRST_BAND_LO || hi > params::FIRST_BAND_HI) {
        return fail(
            1,
            "scan range leaves the first band (19/12, 11/6); pass --force to explore other bands",
        );
    }
    if steps < 1 {
        return fail(1, "steps must be at least 1");
    }
    let grid: Vec<f64> = if steps == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..steps)
            .map(|i| lo + i as f64 * (hi - lo) / (steps - 1) as f64)
            .collect()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var("IMPLOSION_THREADS") {
        if let Ok(k) = text.parse::<usize>() {
            builder = builder.num_threads(k.max(1));
        }
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return fail(1, e),
    };
    let rows: Vec<String> =
        pool.install(|| grid.par_iter().map(|&g| scan_row(g, n, order)).collect());
    println!(
        "gamma,first_band,global_band,rho1_sign,omega1_sign,b1_lead_sign,b3_lead_sign,min_b0,min_b025,min_b05,min_b1,min_b3,termination,note"
    );
    for row in rows {
        println!("{row}");
    }
    0
}

fn cmd_verify(path: PathBuf, report_out: Option<PathBuf>, order: usize) -> i32 {
    let file = match fs::File::open(&path) {
        Ok(f) => f,
        Err(e) => return fail(1, format!("cannot open {}: {e}", path.display())),
    };
    let stored = match profile::read_profile_csv(std::io::BufReader::new(file)) {
        Ok(s) => s,
        Err(e) => return fail(1, e),
    };
    let params = match Params::new(stored.gamma, stored.n) {
        Ok(p) => p,
        Err(e) => return fail(code_for(&e), e),
    };
    if (stored.alpha - params.alpha).abs() > 1e-12 * params.alpha {
        return fail(
            1,
            format!(
                "header alpha {} inconsistent with derived alpha {}",
                stored.alpha, params.alpha
            ),
        );
    }
    let table = match series::build(params, order.max(2)) {
        Ok(t) => t,
        Err(e) => return fail(code_for(&e), e),
    };

    // recompute everything from (y, rho, omega) only
    let states: Vec<ProfileState> = stored
        .rows
        .iter()
        .map(|r| ProfileState {
            y: r.y,
            rho: r.rho,
            omega: r.omega,
        })
        .collect();
    let samples = match monitor::samples_from_states(&params, &states) {
        Ok(s) => s,
        Err(e) => return fail(2, format!("stored states unusable: {e}")),
    };

    // cross-check the stored derived columns against recomputation
    let mut stored_failures = Vec::new();
    let mut worst = [0.0f64; 6];
    for (row, s) in stored.rows.iter().zip(&samples) {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        worst[0] = worst[0].max(rel(row.u, s.aux.u));
        worst[1] = worst[1].max(rel(row.p, s.aux.p));
        worst[2] = worst[2].max(rel(row.g, s.aux.g));
        worst[3] = worst[3].max(rel(row.mass, s.aux.mass));
        worst[4] = worst[4].max(rel(row.drho_dy, s.drho_dy));
        worst[5] = worst[5].max(rel(row.domega_dy, s.domega_dy));
    }
    for (i, name) in ["u", "p", "G", "mass", "drho_dy", "domega_dy"]
        .iter()
        .enumerate()
    {
        if worst[i] > 1e-12 {
            stored_failures.push(format!(
                "stored column {name} inconsistent with recomputation: rel {:.3e}",
                worst[i]
            ));
        }
    }

    let y0 = states[0].y;
    let seed = match series::mass_integral(&table, y0) {
        Ok(s) => s,
        Err(e) => return fail(2, format!("first sample outside the series radius: {e}")),
    };
    let result = ProfileResult {
        samples,
        termination: Termination::ReachedYmax,
        handoff: HandoffInfo {
            y0,
            order: table.order,
            nu: table.nu,
        },
    };
    let echo = RunEcho {
        order: table.order,
        y_max: states.last().map(|s| s.y).unwrap_or(0.0),
        rel_tol: f64::NAN,
        rho_floor: f64::NAN,
        points_per_decade: 0,
    };
    let mut rep = monitor::verify(&params, &result, seed, echo);
    rep.verdict.failures.extend(stored_failures);
    rep.verdict.pass = rep.verdict.failures.is_empty();

    if let Some(path) = report_out {
        if let Err(e) = fs::write(&path, rep.to_json()) {
            return fail(1, format!("cannot write {}: {e}", path.display()));
        }
    }
    if rep.verdict.pass {
        eprintln!("verify: pass ({} samples)", stored.rows.len());
        0
    } else {
        for f in &rep.verdict.failures {
            eprintln!("failure: {f}");
        }
        2
    }
}

fn cmd_fields(args: ParamArgs, run: RunArgs, t: f64, radii: Vec<f64>) -> i32 {
    let params = match make_params(&args) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if !(t < 0.0) {
        return fail(1, "t must be strictly negative (pre-collapse time)");
    }
    let table = match series::build(params, args.order.max(2)) {
        Ok(t) => t,
        Err(e) => return fail(code_for(&e), e),
    };
    let controls = Controls {
        rel_tol: run.rel_tol,
        y_max: run.ymax,
        ..Controls::default()
    };
    let result = match profile::solve_profile(&params, &table, &controls) {
        Ok(r) => r,
        Err(e) => return fail(code_for(&e), e),
    };
    let interp = physical::ProfileInterp::new(&table, &result);
    let mut rows = Vec::new();
    for &r in &radii {
        match physical::physical_fields(&params, &interp, t, r) {
            Ok(sample) => rows.push(format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                sample.t,
                sample.r,
                sample.y,
                sample.rho_tilde,
                sample.u_tilde,
                sample.p_tilde,
                sample.mass
            )),
            Err(Error::OutOfProfileRange { y, y_max, .. }) => {
                return fail(
                    1,
                    format!(
                        "r = {r} maps to y = {y:.6e} beyond the computed profile \
                         (ymax = {y_max:.6e}); rerun with --ymax at least {:.6e}",
                        y * 1.01
                    ),
                );
            }
            Err(e) => return fail(code_for(&e), e),
        }
    }
    println!("t,r,y,rho_tilde,u_tilde,p_tilde,mass");
    for row in rows {
        println!("{row}");
    }
    0
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Command::Solve {
            params,
            run,
            out,
            report,
            force,
        } => cmd_solve(params, run, out, report, force),
        Command::Coeffs { params, out } => cmd_coeffs(params, out),
        Command::Scan {
            gamma_min,
            gamma_max,
            steps,
            n,
            order,
            force,
        } => cmd_scan(gamma_min, gamma_max, steps, n, order, force),
        Command::Verify {
            profile,
            report,
            order,
        } => cmd_verify(profile, report, order),
        Command::Fields { params, run, t, r } => cmd_fields(params, run, t, r),
    };
    std::process::exit(code);
}
