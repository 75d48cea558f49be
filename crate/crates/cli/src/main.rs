use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polarmap_core::config::Tolerances;
use polarmap_core::error::{Error, Result};
use polarmap_core::exec::Exec;
use polarmap_core::json;
use polarmap_core::suites::{
    blowup_report, default_suites, flow_report, load_immersion, parse_suites, run_suites_on,
    write_trajectory_csv, Report, SuiteConfig,
};
use polarmap_core::surface::Geometry;

#[derive(Parser)]
#[command(name = "polarmap", version, about = "Polar maps of minimal surfaces in S^4: checks, meshes and flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Gallery name (veronese, clifford, geodesic2) or immersion file
    #[arg(long)]
    immersion: String,
    /// JSON file of tolerance overrides
    #[arg(long, env = "POLARMAP_CONFIG")]
    tol_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the default suites for an immersion
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Surface grid AxB
        #[arg(long, default_value = "32x32")]
        grid: String,
        /// Fibre samples per surface point
        #[arg(long, default_value_t = 16)]
        nt: usize,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Run selected suites
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated suites; defaults depend on the immersion
        #[arg(long)]
        suites: Option<String>,
        /// Bundle grid AxBxC
        #[arg(long, default_value = "32x32x16")]
        grid: String,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Export constant-t slices as OBJ plus a k1 sidecar CSV
    Mesh {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        slices: usize,
        /// Surface grid AxB per slice
        #[arg(long, default_value = "64x64")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate the e2 field from a bundle point
    Flow {
        #[command(flatten)]
        common: Common,
        /// Start point "x1,x2,t"
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        length: f64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        /// Trajectory CSV
        #[arg(long, default_value = "trajectory.csv")]
        out: PathBuf,
        /// Report file; stdout when absent
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Blow-up time of v' = v^2 + 1
    Blowup {
        #[arg(long, allow_hyphen_values = true)]
        v0: f64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, env = "POLARMAP_CONFIG")]
        tol_file: Option<PathBuf>,
        /// Profile CSV `s,v`
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Report file; stdout when absent
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bundle points drawn for the finite-difference suites
    #[arg(long, default_value_t = 48)]
    samples: usize,
    /// Run on one thread
    #[arg(long)]
    sequential: bool,
}

fn parse_dims<const N: usize>(text: &str) -> Result<[usize; N]> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let bad = || Error::Config(format!("grid `{text}` is not of the form {}", ["A", "AxB", "AxBxC"][N - 1]));
    if parts.len() != N {
        return Err(bad());
    }
    let mut out = [0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| bad())?;
    }
    Ok(out)
}

fn parse_start(text: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("start `{text}` is not \"x1,x2,t\"")))?;
    <[f64; 3]>::try_from(v).map_err(|_| Error::Config(format!("start `{text}` needs three numbers")))
}

fn tolerances(path: Option<&Path>) -> Result<Tolerances> {
    match path {
        Some(p) => Tolerances::from_json(&std::fs::read_to_string(p).map_err(|e| {
            Error::Io(format!("{}: {e}", p.display()))
        })?),
        None => Ok(Tolerances::default()),
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn summarize(report: &Report) {
    for s in &report.suites {
        eprintln!(
            "{:<9} {:<4} {:<17} max {:.3e}  checked {}  skipped {}",
            s.suite.name(),
            if s.pass { "ok" } else { "FAIL" },
            s.mode,
            s.max_residual,
            s.samples_checked,
            s.samples_skipped
        );
    }
}

fn run_report(common: &Common, grid: [usize; 3], suites: Option<&str>, run: &RunOpts) -> Result<bool> {
    let tolerances = tolerances(common.tol_file.as_deref())?;
    let parsed = suites.map(parse_suites).transpose()?;
    let mut config = SuiteConfig {
        grid,
        tolerances,
        seed: run.seed,
        samples: run.samples,
        exec: if run.sequential { Exec::Sequential } else { Exec::default() },
        ..SuiteConfig::new(common.immersion.clone())
    };
    if let Some(s) = &parsed {
        config.suites = s.clone();
    }
    config.validate()?;
    let spec = load_immersion(&common.immersion, &config.tolerances)?;
    if parsed.is_none() {
        config.suites = default_suites(&spec);
    }
    let report = run_suites_on(&spec, &config)?;
    emit(&report.to_json()?, run.report.as_deref())?;
    summarize(&report);
    Ok(report.all_pass)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analyze { common, grid, nt, run } => {
            let [n1, n2] = parse_dims::<2>(&grid)?;
            run_report(&common, [n1, n2, nt], None, &run)
        }
        Command::Verify { common, suites, grid, run } => {
            let dims = parse_dims::<3>(&grid)?;
            run_report(&common, dims, suites.as_deref(), &run)
        }
        Command::Mesh { common, slices, grid, out } => {
            let tol = tolerances(common.tol_file.as_deref())?;
            let [n1, n2] = parse_dims::<2>(&grid)?;
            let spec = load_immersion(&common.immersion, &tol)?;
            let mesh = Geometry::new(&spec, tol).slice_mesh(slices, n1, n2)?;
            let mut obj = create(&out)?;
            mesh.write_obj(&mut obj)?;
            obj.flush()?;
            let sidecar = out.with_extension("k1.csv");
            let mut csv = create(&sidecar)?;
            mesh.write_k1_csv(&mut csv)?;
            csv.flush()?;
            eprintln!(
                "{} vertices, {} triangles, {} pole rotations -> {}, {}",
                mesh.vertices.len(),
                mesh.triangles.len(),
                mesh.rotations,
                out.display(),
                sidecar.display()
            );
            Ok(true)
        }
        Command::Flow { common, start, length, steps, out, report } => {
            let tol = tolerances(common.tol_file.as_deref())?;
            let start = parse_start(&start)?;
            let spec = load_immersion(&common.immersion, &tol)?;
            let (r, traj) = flow_report(&spec, &tol, start, length, steps)?;
            let mut w = create(&out)?;
            write_trajectory_csv(&traj, &mut w)?;
            w.flush()?;
            emit(&json::to_string(&r).map_err(|e| Error::Io(e.to_string()))?, report.as_deref())?;
            Ok(r.pass)
        }
        Command::Blowup { v0, step, tol_file, out, report } => {
            let tol = tolerances(tol_file.as_deref())?;
            let (r, profile) = blowup_report(v0, step, &tol)?;
            if let Some(path) = out {
                let mut w = create(&path)?;
                writeln!(w, "s,v")?;
                for (s, v) in &profile.profile {
                    writeln!(w, "{s:.16e},{v:.16e}")?;
                }
                w.flush()?;
            }
            emit(&json::to_string(&r).map_err(|e| Error::Io(e.to_string()))?, report.as_deref())?;
            Ok(r.pass)
        }
    }
}

/// 2 for configuration, input and I/O problems, 1 for failed computations.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::Syntax { .. }
        | Error::UnknownIdentifier { .. }
        | Error::Arity(_)
        | Error::Validation(_)
        | Error::UnknownGallery(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
