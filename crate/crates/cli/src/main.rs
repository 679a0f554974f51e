use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tonelab::models::ModelDescription;
use tonelab::profiles::Profile;
use tonelab::spectrum::TruncationPolicy;
use tonelab_cli::builtin::{builtin, BUILTIN_NAMES};
use tonelab_cli::emit::{emit, Format};
use tonelab_cli::exit;
use tonelab_cli::spec::{
    BrooksParams, CertifyParams, CompareParams, DomainSpec, Driving, EssParams, ScenarioSpec,
    Space, TaskSpec, ToneParams, ValidationError, VerifyParams,
};
use tonelab_cli::tasks::run_scenario;

#[derive(Parser)]
#[command(
    name = "tonelab",
    version,
    about = "Spectral estimates for radial warped products and submersions"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario file whose model is used when no model flags are given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Base grid size for eigenvalue solves.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Eigensolver tolerance, or residual tolerance for identity checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Integration or sampling horizon.
    #[arg(long, global = true)]
    horizon: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    /// Base dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Base warping function, an expression in t or a preset name.
    #[arg(long)]
    f: Option<String>,
    /// Fiber dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Fiber scale ψ, an expression in t or a preset name.
    #[arg(long)]
    psi: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental tone of a ball or annulus.
    Tone {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, value_enum, default_value_t = Space::Base)]
        space: Space,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        j: usize,
        /// Skip the comparison against higher angular modes.
        #[arg(long)]
        no_mode_check: bool,
    },
    /// Exterior tones and the bottom of the essential spectrum.
    Ess {
        #[command(flatten)]
        model: ModelArgs,
        /// Increasing inner radii, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Space::Base)]
        space: Space,
        /// Carry the base estimate to the total space, sampling fiber volumes up to --horizon.
        #[arg(long)]
        transfer: bool,
        /// Largest exterior length R_cut − R.
        #[arg(long)]
        max_length: Option<f64>,
    },
    /// Discreteness certificate from a driving function on [R*, horizon].
    Certify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Driving::H)]
        driving: Driving,
        #[arg(long)]
        r_star: f64,
        /// Comparison function for the radial driving function.
        #[arg(long)]
        g: Option<String>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Jacobi comparison of the base against a curvature bound K_rad ≤ −G.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        g: String,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Residuals of the submersion identities.
    VerifyIdentities {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "1")]
        a: String,
        #[arg(long, default_value = "t")]
        phi: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        no_sign: bool,
    },
    /// Volume growth rate and the resulting upper bound on the essential spectrum.
    Brooks {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 30_000)]
        steps: usize,
    },
    /// Run a builtin scenario by name or a scenario file.
    Scenario {
        /// One of the builtin names, or a path to a JSON scenario.
        name: String,
    },
    /// Parse an expression and print it with its derivatives.
    ParseProfile {
        expr: String,
        /// Points at which to evaluate, comma separated.
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
    },
}

enum Failure {
    Validation(ValidationError),
    Io(String),
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Failure {
        Failure::Validation(e)
    }
}

fn read_scenario(path: &std::path::Path) -> Result<ScenarioSpec, Failure> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    ScenarioSpec::from_json(&src).map_err(|e| {
        Failure::Validation(ValidationError::new(
            format!("{}: {}", path.display(), e.path),
            e.message,
        ))
    })
}

fn model(global: &Global, args: &ModelArgs) -> Result<ModelDescription, Failure> {
    let mut desc = match &global.config {
        Some(path) => read_scenario(path)?.model,
        None => ModelDescription::base(
            args.n.unwrap_or(2),
            args.f.as_deref().ok_or_else(|| {
                ValidationError::new("--f", "required unless --config supplies a model")
            })?,
        ),
    };
    if let Some(n) = args.n {
        desc.n = n;
    }
    if let Some(f) = &args.f {
        desc.f = f.clone();
    }
    if let Some(m) = args.m {
        desc.m = Some(m);
    }
    if let Some(psi) = &args.psi {
        desc.psi = Some(psi.clone());
    }
    if desc.m.is_some() && desc.psi.is_none() {
        return Err(ValidationError::new("--m", "a fiber dimension needs --psi").into());
    }
    Ok(desc)
}

fn single(name: &str, model: ModelDescription, task: TaskSpec) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        model,
        tasks: vec![task],
    }
}

fn scenario(name: &str) -> Result<ScenarioSpec, Failure> {
    match builtin(name) {
        Some(spec) => Ok(spec?),
        None => {
            let path = std::path::Path::new(name);
            if !path.exists() {
                return Err(ValidationError::new(
                    "scenario",
                    format!(
                        "`{name}` is neither a builtin ({}) nor a file",
                        BUILTIN_NAMES.join(", ")
                    ),
                )
                .into());
            }
            read_scenario(path)
        }
    }
}

/// Applies --grid, --tol and --horizon to every task of a scenario that takes them.
fn override_scenario(spec: &mut ScenarioSpec, g: &Global) {
    for task in &mut spec.tasks {
        match task {
            TaskSpec::Tone(p) => {
                p.grid = g.grid.or(p.grid);
                p.tol = g.tol.or(p.tol);
            }
            TaskSpec::Ess(p) => {
                p.grid = g.grid.or(p.grid);
                p.tol = g.tol.or(p.tol);
                if p.transfer_horizon.is_some() {
                    p.transfer_horizon = g.horizon.or(p.transfer_horizon);
                }
            }
            TaskSpec::Certify(p) => p.horizon = g.horizon.unwrap_or(p.horizon),
            TaskSpec::Compare(p) => p.horizon = g.horizon.unwrap_or(p.horizon),
            TaskSpec::Verify(p) => p.tolerance = g.tol.unwrap_or(p.tolerance),
            TaskSpec::Brooks(p) => p.r_max = g.horizon.unwrap_or(p.r_max),
        }
    }
}

fn build(cli: &Cli) -> Result<ScenarioSpec, Failure> {
    let g = &cli.global;
    Ok(match &cli.command {
        Command::Tone {
            model: m,
            a,
            b,
            space,
            k,
            j,
            no_mode_check,
        } => single(
            "tone",
            model(g, m)?,
            TaskSpec::Tone(ToneParams {
                domain: DomainSpec {
                    a: *a,
                    b: *b,
                    inner: None,
                },
                space: *space,
                k: *k,
                j: *j,
                grid: g.grid,
                tol: g.tol,
                check_modes: !no_mode_check,
            }),
        ),
        Command::Ess {
            model: m,
            radii,
            space,
            transfer,
            max_length,
        } => {
            let mut policy = TruncationPolicy::default();
            if let Some(l) = max_length {
                policy.max_length = *l;
            }
            single(
                "ess",
                model(g, m)?,
                TaskSpec::Ess(EssParams {
                    radii: radii.clone(),
                    space: *space,
                    grid: g.grid,
                    tol: g.tol,
                    policy,
                    transfer_horizon: transfer.then(|| g.horizon.unwrap_or(40.0)),
                }),
            )
        }
        Command::Certify {
            model: m,
            driving,
            r_star,
            g: gg,
            samples,
        } => single(
            "certify",
            model(g, m)?,
            TaskSpec::Certify(CertifyParams {
                driving: *driving,
                r_star: *r_star,
                horizon: g.horizon.unwrap_or(20.0),
                samples: *samples,
                g: gg.clone(),
            }),
        ),
        Command::Compare {
            model: m,
            g: gg,
            step,
        } => single(
            "compare",
            model(g, m)?,
            TaskSpec::Compare(CompareParams {
                g: gg.clone(),
                horizon: g.horizon.unwrap_or(tonelab::comparison::DEFAULT_HORIZON),
                step: step.unwrap_or(tonelab::comparison::DEFAULT_STEP),
                tolerance: g.tol.unwrap_or(1e-6),
            }),
        ),
        Command::VerifyIdentities {
            model: m,
            a,
            phi,
            samples,
            no_sign,
        } => {
            let d = tonelab::identities::IdentityOptions::default();
            single(
                "verify-identities",
                model(g, m)?,
                TaskSpec::Verify(VerifyParams {
                    a: a.clone(),
                    phi: phi.clone(),
                    range: d.range,
                    samples: samples.unwrap_or(d.samples),
                    tolerance: g.tol.unwrap_or(d.tolerance),
                    resolve_sign: !no_sign,
                }),
            )
        }
        Command::Brooks { model: m, steps } => single(
            "brooks",
            model(g, m)?,
            TaskSpec::Brooks(BrooksParams {
                r_max: g.horizon.unwrap_or(30.0),
                steps: *steps,
            }),
        ),
        Command::Scenario { name } => {
            let mut spec = scenario(name)?;
            override_scenario(&mut spec, g);
            spec
        }
        Command::ParseProfile { .. } => unreachable!("handled before scenario construction"),
    })
}

#[derive(Serialize)]
struct ProfileSample {
    t: f64,
    value: f64,
    d1: f64,
    d2: f64,
}

#[derive(Serialize)]
struct ProfileReport {
    source: String,
    expr: String,
    d1: String,
    d2: String,
    samples: Vec<ProfileSample>,
}

fn parse_profile(expr: &str, at: &[f64], format: Format) -> Result<String, Failure> {
    let p = Profile::resolve(expr).map_err(|e| ValidationError::new("expr", e.to_string()))?;
    let samples = at
        .iter()
        .map(|&t| {
            let eval = |r: Result<f64, _>| {
                r.map_err(|e: tonelab::profiles::EvalError| {
                    ValidationError::new(format!("at {t}"), e.to_string())
                })
            };
            Ok(ProfileSample {
                t,
                value: eval(p.value(t))?,
                d1: eval(p.derivative(t))?,
                d2: eval(p.second_derivative(t))?,
            })
        })
        .collect::<Result<Vec<_>, ValidationError>>()?;
    let report = ProfileReport {
        source: p.source().into(),
        expr: p.expr().to_string(),
        d1: p.d1().to_string(),
        d2: p.d2().to_string(),
        samples,
    };
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        Format::Csv => {
            let mut s = String::from("t,value,d1,d2\n");
            for x in &report.samples {
                s += &format!("{},{},{},{}\n", x.t, x.value, x.d1, x.d2);
            }
            s
        }
        Format::Table => {
            let mut s = format!(
                "p(t)   = {}\np'(t)  = {}\np''(t) = {}\n",
                report.expr, report.d1, report.d2
            );
            for x in &report.samples {
                s += &format!(
                    "t = {}: p = {}, p' = {}, p'' = {}\n",
                    x.t, x.value, x.d1, x.d2
                );
            }
            s
        }
    })
}

fn write_text(text: &str, out: Option<&std::path::Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let out = cli.global.out.as_deref();
    if let Command::ParseProfile { expr, at } = &cli.command {
        write_text(&parse_profile(expr, at, cli.global.format)?, out)?;
        return Ok(exit::OK);
    }
    let spec = build(cli)?;
    let start = Instant::now();
    let record = run_scenario(&spec)?;
    eprintln!(
        "{}: {} task(s) in {:.3} s",
        spec.name,
        record.results.len(),
        start.elapsed().as_secs_f64()
    );
    emit(&record, cli.global.format, out).map_err(|e| Failure::Io(e.to_string()))?;
    for r in &record.results {
        if let Some(e) = &r.error {
            eprintln!("task {} failed: {}", r.task, e.message);
        }
    }
    Ok(if record.all_succeeded() {
        exit::OK
    } else {
        exit::TASK_FAILED
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(Failure::Validation(e)) => {
            eprintln!("invalid input: {e}");
            exit::VALIDATION
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            exit::OUTPUT
        }
    };
    ExitCode::from(code as u8)
}
