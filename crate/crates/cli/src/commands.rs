use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ddecert::certificate::{self, build_certificate, corollary_bounds, dissipativity_gap};
use ddecert::discretization::discretize_generator;
use ddecert::io::{load_system, write_json, CertificateReport, CheckReport};
use ddecert::kernel::{dissipativity_lambda, total_variation, LinearDelaySystem};
use ddecert::operator_check::check_dissipativity;
use ddecert::simulation::{
    as_lyapunov_exponent, contraction_report, integrate_dde, mean_square_contraction,
    AdditiveNoise, Diffusion, HistorySegment, LyapunovConfig, MultiplicativeNoise, Nonlinearity,
    SddeProblem, SineDrift, ZeroDrift, ZeroNoise,
};
use ddecert::spectrum::generator_eigenvalues;
use ddecert::{min_mu as optimal_rate, Error, Result, VERSION};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub enum Outcome {
    Pass,
    Fail(String),
}

#[derive(Args, Debug, Serialize)]
pub struct Output {
    /// Directory for report files.
    #[arg(long, default_value = "./out")]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
    result: R,
}

fn emit<C: Serialize, R: Serialize>(
    out: &Output,
    command: &'static str,
    config: &C,
    result: R,
) -> Result<PathBuf> {
    std::fs::create_dir_all(&out.output)?;
    let path = out.output.join(format!("{}.json", command.replace('-', "_")));
    write_json(
        &path,
        &Report {
            tool: "ddecert",
            version: VERSION,
            command,
            config,
            result,
        },
    )?;
    Ok(path)
}

fn write_text(out: &Output, name: &str, text: &str) -> Result<()> {
    std::fs::write(out.output.join(name), text)?;
    Ok(())
}

fn system(path: &Path) -> Result<LinearDelaySystem> {
    load_system(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidArgument(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn parse_vector(text: Option<&str>, dim: usize, what: &str) -> Result<DVector<f64>> {
    let Some(text) = text else {
        return Ok(DVector::from_element(dim, 1.0));
    };
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("{what}: cannot parse {s:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = if values.len() == 1 && dim > 1 {
        vec![values[0]; dim]
    } else {
        values
    };
    if values.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: values.len(),
            context: what.into(),
        });
    }
    Ok(DVector::from_vec(values))
}

fn fail_on_certificate(e: Error) -> Result<Outcome> {
    match e {
        Error::NoCertificate { .. } | Error::RateBelowLambda { .. } => Ok(Outcome::Fail(e.to_string())),
        other => Err(other),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    /// Weight samples per panel in the report.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

#[derive(Serialize)]
struct Uncertified {
    lambda: f64,
    mu: f64,
    gap: Option<f64>,
    certified: bool,
    reason: String,
}

pub fn certify(a: &CertifyArgs) -> Result<Outcome> {
    let sys = system(&a.system)?;
    let lambda = dissipativity_lambda(sys.drift())?;
    let bounds = corollary_bounds(lambda, sys.kernel());
    match build_certificate(&sys, a.mu, a.grid) {
        Ok(cert) => {
            emit(&a.out, "certify", a, CertificateReport::new(&cert, bounds))?;
            Ok(Outcome::Pass)
        }
        Err(e @ (Error::NoCertificate { .. } | Error::RateBelowLambda { .. })) => {
            let gap = dissipativity_gap(lambda, a.mu, sys.kernel()).ok();
            let reason = e.to_string();
            emit(
                &a.out,
                "certify",
                a,
                Uncertified {
                    lambda,
                    mu: a.mu,
                    gap,
                    certified: false,
                    reason: reason.clone(),
                },
            )?;
            Ok(Outcome::Fail(reason))
        }
        Err(e) => Err(e),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct MinMuArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

#[derive(Serialize)]
struct MinMuResult {
    lambda: f64,
    total_variation: f64,
    mu_star: f64,
    tol: f64,
}

pub fn min_mu(a: &MinMuArgs) -> Result<Outcome> {
    let sys = system(&a.system)?;
    let lambda = dissipativity_lambda(sys.drift())?;
    let mu_star = optimal_rate(lambda, sys.kernel(), a.tol)?;
    println!("{mu_star:.16e}");
    emit(
        &a.out,
        "min-mu",
        a,
        MinMuResult {
            lambda,
            total_variation: total_variation(sys.kernel()),
            mu_star,
            tol: a.tol,
        },
    )?;
    Ok(Outcome::Pass)
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

#[derive(Serialize)]
struct BoundsResult {
    lambda: f64,
    total_variation: f64,
    mu_sufficient: f64,
    webb_mu: f64,
    zero_dissipative: bool,
}

pub fn bounds(a: &BoundsArgs) -> Result<Outcome> {
    let sys = system(&a.system)?;
    let lambda = dissipativity_lambda(sys.drift())?;
    let b = corollary_bounds(lambda, sys.kernel());
    emit(
        &a.out,
        "bounds",
        a,
        BoundsResult {
            lambda,
            total_variation: total_variation(sys.kernel()),
            mu_sufficient: b.mu_sufficient,
            webb_mu: b.webb_mu,
            zero_dissipative: b.zero_dissipative,
        },
    )?;
    Ok(Outcome::Pass)
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Nodes per panel.
    #[arg(long, short = 'n', default_value_t = 32)]
    pub nodes: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

pub fn spectrum(a: &SpectrumArgs) -> Result<Outcome> {
    let sys = system(&a.system)?;
    let spec = generator_eigenvalues(&sys, a.nodes)?;
    emit(&a.out, "spectrum", a, &spec)?;
    write_text(&a.out, "spectrum.csv", &spec.to_csv())?;
    Ok(Outcome::Pass)
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, short = 'n', default_value_t = 32)]
    pub nodes: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

pub fn check(a: &CheckArgs) -> Result<Outcome> {
    let sys = system(&a.system)?;
    let cert = match build_certificate(&sys, a.mu, 16) {
        Ok(c) => c,
        Err(e) => return fail_on_certificate(e),
    };
    let disc = discretize_generator(&sys, a.nodes)?;
    let rep = check_dissipativity(&disc, &cert)?;
    let full = CheckReport::new(rep, &disc, &cert);
    let pass = full.pass;
    let margin = full.report.margin;
    emit(&a.out, "check", a, full)?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("dissipativity check failed: margin {margin:e}"))
    })
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Rate of the certificate defining the norm.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    /// Rate compared against in the report; defaults to `--mu`.
    #[arg(long, allow_hyphen_values = true)]
    pub claimed_mu: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_final: f64,
    /// Initial state, comma separated (a single value is broadcast).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Constant initial history; defaults to `--x0`.
    #[arg(long, allow_hyphen_values = true)]
    pub history: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let sys = system(&a.system)?;
    let n = sys.dim();
    let x0 = parse_vector(a.x0.as_deref(), n, "x0")?;
    let past = match &a.history {
        Some(h) => parse_vector(Some(h), n, "history")?,
        None => x0.clone(),
    };
    let mut cert = match build_certificate(&sys, a.mu, 16) {
        Ok(c) => c,
        Err(e) => return fail_on_certificate(e),
    };
    let history = HistorySegment::constant(&past, a.dt)?;
    let mut traj = integrate_dde(&sys, &x0, &history, a.t_final, a.dt)?;
    traj.record_norms(&cert)?;
    if let Some(m) = a.claimed_mu {
        cert.mu = m;
    }
    let rep = contraction_report(&traj, &cert)?;
    let pass = rep.pass;
    let ratio = rep.max_ratio;
    std::fs::create_dir_all(&a.out.output)?;
    write_text(&a.out, "trajectory.csv", &traj.to_csv())?;
    emit(&a.out, "simulate", a, rep)?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("certified decay violated: max ratio {ratio:e}"))
    })
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Additive,
    Multiplicative,
}

#[derive(Args, Debug, Serialize)]
pub struct SddePairArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, value_enum, default_value = "additive")]
    pub noise: NoiseKind,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Amplitude `a` of the drift `a sin(x)`; zero drift when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub sine_drift: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    #[arg(long, default_value_t = 500)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 20.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, allow_hyphen_values = true, default_value = "0")]
    pub x0a: String,
    #[arg(long, allow_hyphen_values = true, default_value = "1")]
    pub x0b: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

pub fn sdde_pair(a: &SddePairArgs) -> Result<Outcome> {
    let sys = system(&a.system)?;
    let n = sys.dim();
    let x0a = parse_vector(Some(&a.x0a), n, "x0a")?;
    let x0b = parse_vector(Some(&a.x0b), n, "x0b")?;
    let sine = a.sine_drift.map(|amplitude| SineDrift { amplitude });
    let nonlinearity: &dyn Nonlinearity = match &sine {
        Some(s) => s,
        None => &ZeroDrift,
    };
    let additive = AdditiveNoise { sigma: a.sigma };
    let multiplicative = MultiplicativeNoise { sigma: a.sigma };
    let diffusion: &dyn Diffusion = match a.noise {
        NoiseKind::None => &ZeroNoise,
        NoiseKind::Additive => &additive,
        NoiseKind::Multiplicative => &multiplicative,
    };
    let problem = SddeProblem {
        system: &sys,
        nonlinearity,
        diffusion,
        dt: a.dt,
        t_final: a.t_final,
    };
    let rep = match mean_square_contraction(&problem, &x0a, &x0b, a.omega, a.paths, a.seed) {
        Ok(r) => r,
        Err(e) => return fail_on_certificate(e),
    };
    std::fs::create_dir_all(&a.out.output)?;
    let mut csv = String::from("t,mean_distance_sq\n");
    for (t, d) in rep.checkpoint_times.iter().zip(&rep.mean_distance_sq) {
        csv.push_str(&format!("{t:.16e},{d:.16e}\n"));
    }
    write_text(&a.out, "sdde_pair.csv", &csv)?;
    let outcome = if rep.pass {
        Outcome::Pass
    } else if rep.blowup {
        Outcome::Fail("pair distance blew up: not contractive".into())
    } else {
        Outcome::Fail(format!(
            "decay rate {:e} (CI upper {:e}) not below -omega = {:e}",
            rep.estimate.rate, rep.estimate.ci_high, -a.omega
        ))
    };
    emit(&a.out, "sdde-pair", a, rep)?;
    Ok(outcome)
}

#[derive(Args, Debug, Serialize)]
pub struct SddeLyapunovArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 50.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 500)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

pub fn sdde_lyapunov(a: &SddeLyapunovArgs) -> Result<Outcome> {
    let rep = as_lyapunov_exponent(&LyapunovConfig {
        b: a.b,
        c: a.c,
        sigma: a.sigma,
        dt: a.dt,
        t_final: a.t_final,
        path_count: a.paths,
        seed: a.seed,
    })?;
    let outcome = if !rep.region.inside {
        Outcome::Fail("stability condition violated".into())
    } else if !rep.stable {
        Outcome::Fail(format!(
            "exponent CI [{:e}, {:e}] does not exclude 0",
            rep.estimate.ci_low, rep.estimate.ci_high
        ))
    } else {
        Outcome::Pass
    };
    emit(&a.out, "sdde-lyapunov", a, rep)?;
    Ok(outcome)
}

#[derive(Args, Debug, Serialize)]
pub struct LyapunovRenormArgs {
    /// JSON file `{"A": [[...]], "C": [[...]]}`; `C` defaults to the identity.
    #[arg(long)]
    pub matrix: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: Output,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RenormInput {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "C", default)]
    c: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct RenormResult {
    q: Vec<Vec<f64>>,
    gamma_lower: f64,
    residual_inf: f64,
}

fn dense(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let c = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || c == 0 || rows.iter().any(|r| r.len() != c) {
        return Err(Error::InvalidArgument(format!("{what}: empty or ragged matrix")));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

pub fn lyapunov_renorm(a: &LyapunovRenormArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.matrix)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", a.matrix.display())))?;
    let input: RenormInput = serde_json::from_str(&text)?;
    let am = dense(&input.a, "A")?;
    let cm = match &input.c {
        Some(c) => dense(c, "C")?,
        None => DMatrix::identity(am.nrows(), am.nrows()),
    };
    let r = match certificate::lyapunov_renorm(&am, &cm) {
        Ok(r) => r,
        Err(e @ (Error::Unstable(_) | Error::Unobservable { .. })) => {
            return Ok(Outcome::Fail(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let res = am.transpose() * &r.q + &r.q * &am + cm.transpose() * &cm;
    let residual_inf = res
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let q = (0..r.q.nrows())
        .map(|i| (0..r.q.ncols()).map(|j| r.q[(i, j)]).collect())
        .collect();
    emit(
        &a.out,
        "lyapunov-renorm",
        a,
        RenormResult {
            q,
            gamma_lower: r.gamma_lower,
            residual_inf,
        },
    )?;
    Ok(Outcome::Pass)
}
