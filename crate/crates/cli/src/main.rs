//! `ncstokes`: verification suite, single solves, convergence studies and
//! inf-sup estimates for the nonconforming P3 / discontinuous P2 Stokes
//! element on the unit cube.
//!
//! Every option can also be set through an environment variable with the
//! `NCSTOKES_` prefix (`NCSTOKES_OUTER_TOL=1e-8`) or a `key = value` file
//! passed with `--config`. Command-line flags win over the environment,
//! which wins over the file.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ncstokes::analysis::{broken_h1_norm, convergence_study, divergence_check, run_on_mesh, ConvergenceReport};
use ncstokes::assembly::assemble_constrained;
use ncstokes::mesh::{level_mesh, validate};
use ncstokes::reference::ReferenceBubble;
use ncstokes::solver::{infsup_constant, InnerMethod, Preconditioner, SolverConfig};
use ncstokes::{verify, ExactSolution};

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(
    name = "ncstokes",
    version,
    about = "Nonconforming P3 / discontinuous P2 Stokes solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Number of refinement levels (level k has 2^(k-1) cells per axis)
    #[arg(long, global = true, env = "NCSTOKES_LEVELS")]
    levels: Option<usize>,

    /// Relative Schur residual tolerance of the outer iteration
    #[arg(long, global = true, env = "NCSTOKES_OUTER_TOL")]
    outer_tol: Option<f64>,

    /// Relative residual tolerance of inner CG solves
    #[arg(long, global = true, env = "NCSTOKES_INNER_TOL")]
    inner_tol: Option<f64>,

    #[arg(long, global = true, env = "NCSTOKES_MAX_OUTER")]
    max_outer: Option<usize>,

    #[arg(long, global = true, env = "NCSTOKES_MAX_INNER")]
    max_inner: Option<usize>,

    /// Inner velocity solver
    #[arg(long, global = true, value_enum, env = "NCSTOKES_INNER")]
    inner: Option<Inner>,

    #[arg(long, global = true, value_enum, env = "NCSTOKES_FORMAT")]
    format: Option<Format>,

    /// Write the report here instead of stdout
    #[arg(long, global = true, env = "NCSTOKES_OUT")]
    out: Option<PathBuf>,

    #[arg(long, global = true, env = "NCSTOKES_SEED")]
    seed: Option<u64>,

    /// Worker threads for assembly and error integration
    #[arg(long, global = true, env = "NCSTOKES_THREADS")]
    threads: Option<usize>,

    /// File of `key = value` lines with defaults for the options above
    #[arg(long, global = true, env = "NCSTOKES_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bubble, numbering and quadrature self-checks
    Verify {
        /// Highest quadrature degree to self-test
        #[arg(long, default_value_t = 14)]
        quadrature_degree: usize,
        #[arg(long, hide = true)]
        perturb_bubble: bool,
    },
    /// Solve the manufactured problem on one level
    Solve {
        #[arg(long)]
        level: Option<usize>,
    },
    /// Convergence table over levels 1..=levels
    Study,
    /// Discrete inf-sup constant on levels 1..=levels
    Infsup,
    /// Write the mesh of one level in text form
    Mesh {
        #[arg(long)]
        level: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Inner {
    Cholesky,
    Cg,
    CgPlain,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl std::str::FromStr for Inner {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

enum Failure {
    /// Exit status 2.
    Usage(String),
    /// Exit status 1.
    Run(String),
}

impl From<ncstokes::Error> for Failure {
    fn from(e: ncstokes::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

struct Settings {
    levels: usize,
    solver: SolverConfig,
    format: Format,
    out: Option<PathBuf>,
    seed: u64,
    threads: Option<usize>,
}

fn pick<T: std::str::FromStr>(cli: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T, Failure> {
    match cli {
        Some(v) => Ok(v),
        None => Ok(file.get(key).map_err(Failure::Usage)?.unwrap_or(default)),
    }
}

fn resolve(cli: &Cli) -> Result<(Settings, FileConfig), Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let d = SolverConfig::default();
    let inner = match pick(cli.inner, &file, "inner", Inner::Cholesky)? {
        Inner::Cholesky => InnerMethod::Cholesky,
        Inner::Cg => InnerMethod::Cg(Preconditioner::Diagonal),
        Inner::CgPlain => InnerMethod::Cg(Preconditioner::None),
    };
    let solver = SolverConfig {
        outer_tol: pick(cli.outer_tol, &file, "outer_tol", d.outer_tol)?,
        inner_tol: pick(cli.inner_tol, &file, "inner_tol", d.inner_tol)?,
        max_outer: pick(cli.max_outer, &file, "max_outer", d.max_outer)?,
        max_inner: pick(cli.max_inner, &file, "max_inner", d.max_inner)?,
        inner,
    };
    solver.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let levels = pick(cli.levels, &file, "levels", 3)?;
    check_level(levels)?;
    let out = match &cli.out {
        Some(p) => Some(p.clone()),
        None => file.get::<PathBuf>("out").map_err(Failure::Usage)?,
    };
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => file.get("threads").map_err(Failure::Usage)?,
    };
    if threads == Some(0) {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let settings = Settings {
        levels,
        solver,
        format: pick(cli.format, &file, "format", Format::Markdown)?,
        out,
        seed: pick(cli.seed, &file, "seed", 2024)?,
        threads,
    };
    Ok((settings, file))
}

fn check_level(level: usize) -> Result<(), Failure> {
    if (1..=6).contains(&level) {
        Ok(())
    } else {
        Err(Failure::Usage(format!("levels must lie in [1, 6], got {level}")))
    }
}

fn emit(settings: &Settings, text: &str) -> Result<(), Failure> {
    match &settings.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Run(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn render(settings: &Settings, report: &ConvergenceReport) -> Result<String, Failure> {
    Ok(match settings.format {
        Format::Markdown => report.to_markdown(),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv output is UTF-8")
        }
    })
}

fn cmd_verify(settings: &Settings, degree: usize, perturb: bool) -> Result<(), Failure> {
    let max = ncstokes::quadrature::MAX_DEGREE;
    if !(1..=max).contains(&degree) {
        return Err(Failure::Usage(format!(
            "quadrature degree must lie in [1, {max}], got {degree}"
        )));
    }
    let bubble = if perturb {
        let mut comps = ReferenceBubble::standard().components().clone();
        let c = comps[1].coeff([2, 1, 1]);
        comps[1].set_coeff([2, 1, 1], c + ncstokes::poly::rat(1, 1000));
        ReferenceBubble::from_components(comps)
    } else {
        ReferenceBubble::standard()
    };
    let checks = verify::run_suite(&bubble, degree, settings.seed)?;
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!(
            "{} {}: {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    emit(settings, &text)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Run(format!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_solve(settings: &Settings, level: usize) -> Result<(), Failure> {
    check_level(level)?;
    let mesh = level_mesh(level)?;
    let (row, sol) = run_on_mesh(level, &mesh, &settings.solver)?;
    let dofs = ncstokes::spaces::build_velocity_dofs(&mesh);
    let div = divergence_check(&mesh, &dofs, &sol.velocity, 10, settings.seed)?;
    let norm = broken_h1_norm(&mesh, &dofs, &sol.velocity)?;
    eprintln!("max |div u_h| = {div:.3e}, ||u_h||_1,h = {norm:.6e}");
    let mut report = ConvergenceReport::default();
    report.push(row);
    emit(settings, &render(settings, &report)?)
}

fn cmd_study(settings: &Settings) -> Result<(), Failure> {
    let report = convergence_study(settings.levels, &settings.solver);
    emit(settings, &render(settings, &report)?)?;
    if report.all_ok() {
        Ok(())
    } else {
        Err(Failure::Run("some levels failed to solve".into()))
    }
}

fn cmd_infsup(settings: &Settings) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for level in 1..=settings.levels {
        let mesh = level_mesh(level)?;
        let system = assemble_constrained(&mesh, &|x| ExactSolution.forcing(x))?;
        let est = infsup_constant(&system, &settings.solver, settings.seed)?;
        rows.push((level, est));
    }
    let mut text = match settings.format {
        Format::Markdown => {
            "| level | beta_h | ratio | lambda_max | Lanczos steps |\n|---:|---:|---:|---:|---:|\n".to_string()
        }
        Format::Csv => "level,beta_h,ratio,lambda_max,steps\n".to_string(),
    };
    for (i, (level, est)) in rows.iter().enumerate() {
        let ratio = if i == 0 {
            f64::NAN
        } else {
            rows[i - 1].1.beta / est.beta
        };
        let ratio_s = if i == 0 { "-".to_string() } else { format!("{ratio:.3}") };
        text.push_str(&match settings.format {
            Format::Markdown => format!(
                "| {level} | {:.6e} | {ratio_s} | {:.4e} | {} |\n",
                est.beta, est.lambda_max, est.steps
            ),
            Format::Csv => format!(
                "{level},{:.12e},{ratio_s},{:.12e},{}\n",
                est.beta, est.lambda_max, est.steps
            ),
        });
    }
    emit(settings, &text)
}

fn cmd_mesh(settings: &Settings, level: usize) -> Result<(), Failure> {
    check_level(level)?;
    let mesh = level_mesh(level)?;
    let violations = validate(&mesh);
    eprintln!(
        "level {level}: {} vertices, {} edges, {} faces ({} boundary), {} tets, {} violations",
        mesh.num_vertices(),
        mesh.num_edges(),
        mesh.num_faces(),
        mesh.num_boundary_faces(),
        mesh.num_tets(),
        violations.len()
    );
    let mut buf = Vec::new();
    mesh.write_text(&mut buf)?;
    emit(settings, &String::from_utf8(buf).expect("mesh text is UTF-8"))?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Run(
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        ))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (settings, file) = resolve(&cli)?;
    if let Some(t) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Run(e.to_string()))?;
    }
    let file_level = file.get::<usize>("level").map_err(Failure::Usage)?;
    match cli.command {
        Command::Verify {
            quadrature_degree,
            perturb_bubble,
        } => cmd_verify(&settings, quadrature_degree, perturb_bubble),
        Command::Solve { level } => cmd_solve(&settings, level.or(file_level).unwrap_or(2)),
        Command::Study => cmd_study(&settings),
        Command::Infsup => cmd_infsup(&settings),
        Command::Mesh { level } => cmd_mesh(&settings, level.or(file_level).unwrap_or(1)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("NCSTOKES_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
