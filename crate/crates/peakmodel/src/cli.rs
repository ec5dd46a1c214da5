//! Command-line front end. Every command reads a JSON [`RunConfig`]; output
//! goes to stdout as JSON or CSV, errors to stderr as `{"code", "message"}`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 schema or usage error,
//! 3 mathematically invalid input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{matrix, Built, ConfigError, RunConfig, ThetaSpec};
use crate::extensions::{
    dispersion_scan, krein_resolvent, peak_graph_residuals, BBranchTriple, ClassicalTriple, LinearRelationFD,
    PeakTriple, Triple,
};
use crate::linalg::{condition_number, hermitian_eigen, rel_diff_vec};
use crate::omega::{IotaDeformation, IotaSpec, OmegaTriple};
use crate::peak::PeakVector;
use crate::samples::Rng;
use crate::verify::{self, Fault, Options, Suite};
use crate::{CMat, CVec, Error, C64};

pub const SEED_ENV: &str = "PEAKMODEL_SEED";

#[derive(Debug, Parser)]
#[command(name = "peakmodel", version, about = "Extensions of singular perturbations on a finite spectral model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the model and report Hermiticity, conditioning and dim ker G_b^*.
    Validate(ConfigArg),
    /// Print the Gram data.
    Gram(ConfigArg),
    /// Evaluate a Weyl function on a grid.
    Weyl(GridArgs),
    /// Apply the resolvent of an extension to a vector.
    Resolvent(ResolventArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Smallest singular value of D - M(z) C on a grid.
    Dispersion(GridArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    config: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Branch {
    Classical,
    Peak,
    B,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct GridArgs {
    config: PathBuf,
    /// `re0:re1:n,im`
    #[arg(long)]
    grid: String,
    #[arg(long, value_enum, default_value = "peak")]
    branch: Branch,
    /// JSON file with `{"C": .., "D": ..}`; overrides the config.
    #[arg(long)]
    theta: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct ResolventArgs {
    config: PathBuf,
    /// `re,im`
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    #[arg(long)]
    theta: Option<PathBuf>,
    /// JSON list of `[re, im]`; a seeded random vector when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "peak")]
    branch: Branch,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Optional config whose model joins the random trials.
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_enum, default_value = "none")]
    fault: Fault,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// A failure that ends the command with an error report.
#[derive(Debug)]
struct Failure {
    exit: i32,
    code: String,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { exit: e.exit_code(), code: e.code().into(), message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        ConfigError::Math(e).into()
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { exit: 2, code: "USAGE".into(), message: msg.into() }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs one command against the given streams and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let seed_env = std::env::var(SEED_ENV).ok();
    match dispatch(cli.command, seed_env.as_deref(), out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "{}", json!({"code": f.code, "message": f.message}));
            f.exit
        }
    }
}

fn dispatch(cmd: Command, seed_env: Option<&str>, out: &mut dyn Write) -> Result<i32, Failure> {
    let env_seed = seed_env
        .map(|s| s.trim().parse::<u64>().map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer"))))
        .transpose()?;
    let text = match cmd {
        Command::Validate(a) => pretty(&validate(&load(&a.config)?)),
        Command::Gram(a) => pretty(&gram(&load(&a.config)?)),
        Command::Weyl(a) => weyl(&load(&a.config)?, &a)?,
        Command::Dispersion(a) => dispersion(&load(&a.config)?, &a)?,
        Command::Resolvent(a) => {
            let seed = env_seed.unwrap_or(a.seed);
            pretty(&resolvent(&load(&a.config)?, &a, seed)?)
        }
        Command::Verify(a) => {
            let built = a.config.as_deref().map(load).transpose()?;
            let opts = Options { suite: a.suite, seed: env_seed.unwrap_or(a.seed), trials: a.trials, fault: a.fault };
            let report = verify::run(&opts, built.as_ref().map(|b| &b.space));
            let text = match a.format {
                Format::Json => pretty(&report),
                Format::Csv => {
                    let mut s = String::from("suite,name,kind,value,tolerance,samples,pass,identity\n");
                    for c in &report.checks {
                        let kind = if c.kind == verify::Kind::Max { "max" } else { "min" };
                        s += &format!(
                            "{},{},{},{:e},{:e},{},{},\"{}\"\n",
                            c.suite, c.name, kind, c.value, c.tolerance, c.samples, c.pass, c.identity
                        );
                    }
                    s
                }
            };
            write_out(out, &text)?;
            return Ok(if report.pass { 0 } else { 1 });
        }
    };
    write_out(out, &text)?;
    Ok(0)
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure { exit: 2, code: "IO".into(), message: e.to_string() })
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure { exit: 2, code: "IO".into(), message: format!("{}: {e}", path.display()) })
}

fn load(path: &Path) -> Result<Built, Failure> {
    Ok(RunConfig::from_json(&read(path)?)?.build()?)
}

fn cmat_json(a: &CMat) -> Vec<Vec<C64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

fn cvec_json(v: &CVec) -> Vec<C64> {
    v.iter().copied().collect()
}

fn validate(b: &Built) -> Value {
    let g = &b.space.gram;
    let s = &b.space.setup;
    json!({
        "valid": true,
        "n": s.n(),
        "m": s.m(),
        "d": s.d(),
        "scaling": s.scaling,
        "hermiticity": g.hermiticity_report(),
        "cond_g": g.cond_g,
        "cond_gmin": condition_number(&g.gmin),
        "dim_ker_gb_star": g.ker_gb_star.ncols(),
        "warnings": s.zs.warnings().iter().chain(&g.warnings).collect::<Vec<_>>(),
    })
}

fn gram(b: &Built) -> Value {
    let g = &b.space.gram;
    json!({
        "m": g.m,
        "d": g.d,
        "Z": g.z,
        "G": cmat_json(&g.g),
        "G_b": cmat_json(&g.gb),
        "G_min": cmat_json(&g.gmin),
        "H_b": cmat_json(&g.hb),
        "Delta": cmat_json(&g.delta),
        "Delta_hat": cmat_json(&g.delta_hat),
        "ker_G_b_star": cmat_json(&g.ker_gb_star),
        "M_cal": cmat_json(&g.m_cal),
        "cond_g": g.cond_g,
        "hermiticity": g.hermiticity_report(),
    })
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Failure> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| usage(format!("{what}: cannot parse '{s}'")))
}

/// `re0:re1:n,im` into `n` equispaced points.
fn parse_grid(spec: &str) -> Result<Vec<C64>, Failure> {
    let bad = || usage(format!("grid '{spec}' is not of the form re0:re1:n,im"));
    let (range, im) = spec.split_once(',').ok_or_else(bad)?;
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, n] = parts[..] else { return Err(bad()) };
    let (a, b, im) = (parse_f64(a, "grid")?, parse_f64(b, "grid")?, parse_f64(im, "grid")?);
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok((0..n)
        .map(|k| {
            let t = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            C64::new(a + (b - a) * t, im)
        })
        .collect())
}

fn parse_point(spec: &str) -> Result<C64, Failure> {
    let (re, im) = spec.split_once(',').unwrap_or((spec, "0"));
    Ok(C64::new(parse_f64(re, "z")?, parse_f64(im, "z")?))
}

fn handle(b: &Built, branch: Branch) -> Result<Box<dyn Triple>, Failure> {
    let sp = &b.space;
    Ok(match branch {
        Branch::Classical => Box::new(ClassicalTriple { setup: sp.setup.clone() }),
        Branch::Peak => {
            if !sp.is_hermitian() {
                return Err(Error::NonHermitian("the peak branch").into());
            }
            Box::new(PeakTriple { space: sp.clone() })
        }
        Branch::B => Box::new(BBranchTriple::new(sp.clone())?),
        Branch::Omega => {
            if !sp.is_hermitian() {
                return Err(Error::NonHermitian("the omega branch").into());
            }
            let spec = b.iota.clone().unwrap_or(IotaSpec::Identity);
            Box::new(OmegaTriple { iota: IotaDeformation::new(sp.clone(), &spec)? })
        }
    })
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Classical => "classical",
        Branch::Peak => "peak",
        Branch::B => "b",
        Branch::Omega => "omega",
    }
}

/// Smallest eigenvalue of `Im M`, relative to `max(|M|, 1)`.
fn im_margin(m: &CMat) -> f64 {
    let im = (m - m.adjoint()) / C64::new(0.0, 2.0);
    hermitian_eigen(&im).0[0] / m.norm().max(1.0)
}

fn load_theta(b: &Built, path: Option<&Path>) -> Result<Option<LinearRelationFD>, Failure> {
    let Some(path) = path else { return Ok(b.theta.clone()) };
    let spec: ThetaSpec = serde_json::from_str(&read(path)?).map_err(|e| ConfigError::Schema(e.to_string()))?;
    let (c, d) = (matrix(&spec.c, "theta.C")?, matrix(&spec.d, "theta.D")?);
    if c.nrows() != b.space.d() || d.shape() != c.shape() {
        return Err(ConfigError::Schema(format!("theta.C and theta.D must both be {} x k", b.space.d())).into());
    }
    Ok(Some(LinearRelationFD::new(c, d)?))
}

fn weyl(b: &Built, a: &GridArgs) -> Result<String, Failure> {
    let grid = parse_grid(&a.grid)?;
    let h = handle(b, a.branch)?;
    let d = b.space.d();
    let rows: Vec<(C64, std::result::Result<CMat, Error>)> = grid.iter().map(|&z| (z, h.weyl(z))).collect();
    Ok(match a.format {
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(z, r)| match r {
                    Ok(m) => json!({"z": z, "M": cmat_json(m), "im_margin": im_margin(m), "skipped": null}),
                    Err(e) => json!({"z": z, "M": null, "im_margin": null, "skipped": e.code()}),
                })
                .collect();
            pretty(&json!({"branch": branch_name(a.branch), "d": d, "rows": rows}))
        }
        Format::Csv => {
            let mut s = String::from("z_re,z_im");
            for i in 0..d {
                for j in 0..d {
                    s += &format!(",m{i}{j}_re,m{i}{j}_im");
                }
            }
            s += ",im_margin,skipped\n";
            for (z, r) in &rows {
                s += &format!("{},{}", z.re, z.im);
                match r {
                    Ok(m) => {
                        for i in 0..d {
                            for j in 0..d {
                                s += &format!(",{},{}", m[(i, j)].re, m[(i, j)].im);
                            }
                        }
                        s += &format!(",{},\n", im_margin(m));
                    }
                    Err(e) => {
                        s += &",".repeat(2 * d * d + 1);
                        s += &format!(",{}\n", e.code());
                    }
                }
            }
            s
        }
    })
}

fn dispersion(b: &Built, a: &GridArgs) -> Result<String, Failure> {
    let grid = parse_grid(&a.grid)?;
    let theta = load_theta(b, a.theta.as_deref())?.ok_or_else(|| usage("dispersion needs a theta"))?;
    let h = handle(b, a.branch)?;
    let pts = dispersion_scan(h.as_ref(), &theta, &grid);
    Ok(match a.format {
        Format::Json => pretty(&json!({"branch": branch_name(a.branch), "rows": pts})),
        Format::Csv => {
            let mut s = String::from("z_re,z_im,sigma_min,skipped\n");
            for p in &pts {
                let sv = p.sigma_min.map(|x| x.to_string()).unwrap_or_default();
                s += &format!("{},{},{},{}\n", p.z.re, p.z.im, sv, p.skipped.unwrap_or(""));
            }
            s
        }
    })
}

fn resolvent(b: &Built, a: &ResolventArgs, seed: u64) -> Result<Value, Failure> {
    let z = parse_point(&a.z)?;
    let theta = load_theta(b, a.theta.as_deref())?.unwrap_or_else(|| b.theta_or_zero());
    let sp = &b.space;
    let h = handle(b, a.branch)?;
    let v: CVec = match &a.input {
        Some(p) => {
            let raw: Vec<C64> = serde_json::from_str(&read(p)?).map_err(|e| ConfigError::Schema(e.to_string()))?;
            if raw.len() != h.dim() {
                return Err(ConfigError::Schema(format!("input has length {}, expected {}", raw.len(), h.dim())).into());
            }
            CVec::from_vec(raw)
        }
        None => Rng::new(seed).cvec(h.dim()),
    };
    let y = krein_resolvent(h.as_ref(), &theta, z, &v)?;
    let (boundary, equation) = match a.branch {
        Branch::Classical => {
            let dense = ClassicalTriple { setup: sp.setup.clone() }.dense_resolvent(&theta, z, &v)?;
            (None, rel_diff_vec(&y, &dense))
        }
        Branch::Peak | Branch::B => {
            let pv = PeakVector::from_flat(sp.n(), &v);
            let ev = if a.branch == Branch::Peak {
                PeakTriple { space: sp.clone() }.resolvent_ev(&theta, z, &pv)?
            } else {
                BBranchTriple::new(sp.clone())?.resolvent_ev(&theta, z, &pv)?
            };
            let r = peak_graph_residuals(sp, &theta, z, &pv, &ev, a.branch == Branch::B)?;
            (Some(r.boundary), r.equation)
        }
        Branch::Omega => {
            let spec = b.iota.clone().unwrap_or(IotaSpec::Identity);
            let (bd, eq) = OmegaTriple { iota: IotaDeformation::new(sp.clone(), &spec)? }.graph_residuals(&theta, z, &v)?;
            (Some(bd), eq)
        }
    };
    let worst = boundary.unwrap_or(0.0).max(equation);
    Ok(json!({
        "branch": branch_name(a.branch),
        "z": z,
        "y": cvec_json(&y),
        "residual": {"boundary": boundary, "equation": equation},
        "ok": worst <= b.tolerances.graph,
    }))
}
