use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use elastica_recon::constraints::ObstacleMode;
use elastica_recon::curvature::{curvature_report_with, AreaKind};
use elastica_recon::energies::Formulation;
use elastica_recon::experiment::{
    bench, bench_csv, parse_range, sweep_admm, sweep_csv, EpsRule, ExperimentManifest, SweepSpec, TauRule,
};
use elastica_recon::grid::Axis;
use elastica_recon::io;
use elastica_recon::mesh::{extract_isosurface, TriMesh};
use elastica_recon::solvers::{run, CouplingSign, Method, RunInput, SolverConfig, WUpdate};
use elastica_recon::synth::{choose_planes, subsample_slices, Example, SliceRule};
use elastica_recon::Error;

#[derive(Parser)]
#[command(name = "elastica-recon", version, about = "Phase-field surface reconstruction from parallel slices")]
struct Cli {
    /// Worker threads for sweeps; 1 is the deterministic reference mode.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic volume and, optionally, its slice stack.
    Synth(SynthArgs),
    /// Reconstruct a phase field from a slice stack.
    Reconstruct(ReconstructArgs),
    /// Extract the level-set surface of a field.
    Mesh(MeshArgs),
    /// Curvature statistics of a surface.
    Metrics(MetricsArgs),
    /// ADMM sensitivity sweep over (rho, eps*N).
    Sweep(SweepArgs),
    /// Per-iteration wall time against grid size.
    Bench(BenchArgs),
    /// Replay an experiment manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    example: Example,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    /// Number of slices (default: the example's own count).
    #[arg(long)]
    slices: Option<usize>,
    /// Gap range `a:b` in planes (default: the example's own range).
    #[arg(long)]
    gaps: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the slice stack (PGM files and manifest.json).
    #[arg(long)]
    stack: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    stack: PathBuf,
    #[arg(long)]
    formulation: Formulation,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value = "1.5/N")]
    eps_rule: EpsRule,
    #[arg(long, default_value = "eps^4")]
    tau_rule: TauRule,
    #[arg(long, default_value_t = 8.0)]
    rho: f64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    erosion: usize,
    #[arg(long, default_value = "indicator")]
    mode: ObstacleMode,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol_rel: f64,
    #[arg(long, default_value_t = 0.0)]
    tol_energy: f64,
    #[arg(long, default_value = "descent")]
    coupling: CouplingArg,
    #[arg(long, default_value = "exact")]
    w_update: WUpdate,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CouplingArg {
    Descent,
    Reversed,
}

impl From<CouplingArg> for CouplingSign {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Descent => CouplingSign::Descent,
            CouplingArg::Reversed => CouplingSign::Reversed,
        }
    }
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    hist: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "mixed")]
    area: AreaKind,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    example: Example,
    #[arg(long)]
    n: usize,
    /// `a:b:step`
    #[arg(long)]
    rho: String,
    /// `a:b:step`
    #[arg(long)]
    epsn: String,
    #[arg(long, default_value = "eps^3")]
    tau_rule: TauRule,
    #[arg(long)]
    criterion_sigma_gc: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol_rel: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "exact")]
    w_update: WUpdate,
    #[arg(long, default_value = "descent")]
    coupling: CouplingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    example: Example,
    /// Comma-separated grid sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory the manifest's output paths are relative to.
    #[arg(long, default_value = ".")]
    dir: PathBuf,
}

fn write_text(path: &Path, text: &str) -> elastica_recon::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_gaps(s: &str) -> elastica_recon::Result<(usize, usize)> {
    let bad = || Error::Config(format!("--gaps `{s}` is not of the form a:b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn synth(a: SynthArgs) -> elastica_recon::Result<()> {
    let vol = a.example.volume(a.n)?;
    io::write_volume(&a.out, &vol)?;
    println!("{}: {} voxels set on {}³", a.out.display(), vol.count(), a.n);
    if let Some(dir) = &a.stack {
        let rule = match a.example.default_rule(a.seed) {
            SliceRule::Uneven {
                count,
                gap_min,
                gap_max,
                seed,
            } => {
                let (gap_min, gap_max) = match &a.gaps {
                    Some(g) => parse_gaps(g)?,
                    None => (gap_min, gap_max),
                };
                SliceRule::Uneven {
                    count: a.slices.unwrap_or(count),
                    gap_min,
                    gap_max,
                    seed,
                }
            }
            planes => planes,
        };
        let planes = choose_planes(&vol, Axis::Z, &rule)?;
        let stack = subsample_slices(&vol, Axis::Z, &planes)?;
        io::write_stack(dir, &stack)?;
        println!("{}: planes {:?}", dir.display(), planes);
    }
    Ok(())
}

fn reconstruct(a: ReconstructArgs) -> elastica_recon::Result<()> {
    let (stack, report) = io::read_stack(&a.stack)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let eps = a.eps_rule.eps(stack.grid().dims());
    let mut cfg = SolverConfig::new(a.formulation, a.method, eps, a.tau_rule.tau(eps));
    cfg.rho = a.rho;
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    cfg.erosion = a.erosion;
    cfg.obstacle_mode = a.mode;
    cfg.max_iters = a.max_iters;
    cfg.tol_rel = a.tol_rel;
    cfg.tol_energy = a.tol_energy;
    cfg.coupling = a.coupling.into();
    cfg.w_update = a.w_update;
    let result = run(RunInput::Stack(&stack), &cfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    io::write_field(&a.out, &result.final_u)?;
    result.write_trace_csv(&a.trace)?;
    println!(
        "{}: {} iterations ({:?}), eps {eps:.5}, tau {:.3e}",
        a.out.display(),
        result.iters_done,
        result.termination,
        cfg.tau
    );
    Ok(())
}

fn mesh(a: MeshArgs) -> elastica_recon::Result<()> {
    let u = io::read_field(&a.input)?;
    let m = extract_isosurface(&u, a.level);
    m.write_obj(&a.out)?;
    println!(
        "{}: {} vertices, {} triangles, closed {}",
        a.out.display(),
        m.vertices().len(),
        m.triangles().len(),
        m.is_closed()
    );
    Ok(())
}

fn metrics(a: MetricsArgs) -> elastica_recon::Result<()> {
    let m = TriMesh::read_obj(&a.input)?;
    let report = curvature_report_with(&m, a.bins, a.area)?;
    report.write_outputs(&a.out, a.hist.as_deref(), a.csv.as_deref())?;
    let s = report.summary();
    println!("sigma_gc {:.6} sigma_mc {:.6} over {} vertices", s.sigma_gc, s.sigma_mc, s.n_vertices);
    Ok(())
}

fn sweep(a: SweepArgs, threads: usize) -> elastica_recon::Result<()> {
    let mut spec = SweepSpec::new(
        a.example,
        a.n,
        parse_range(&a.rho)?,
        parse_range(&a.epsn)?,
        a.tau_rule,
        a.criterion_sigma_gc,
    );
    spec.seed = a.seed;
    spec.max_iters = a.max_iters;
    spec.tol_rel = a.tol_rel;
    spec.w_update = a.w_update;
    spec.coupling = a.coupling.into();
    spec.threads = threads;
    let cells = sweep_admm(&spec)?;
    for c in &cells {
        if let Some(note) = &c.note {
            eprintln!("rho {} epsN {}: {note}", c.rho, c.epsn);
        }
    }
    write_text(&a.out, &sweep_csv(&cells, &a.tau_rule))?;
    let passed = cells.iter().filter(|c| c.pass).count();
    println!("{}: {passed} of {} cells pass", a.out.display(), cells.len());
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> elastica_recon::Result<()> {
    let rows = bench(a.example, &a.n, a.iters)?;
    write_text(&a.out, &bench_csv(&rows))?;
    for r in &rows {
        println!("n {:4}: {:.3} ms/iteration", r.n, r.mean_ms);
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> elastica_recon::Result<()> {
    let m = ExperimentManifest::read(&a.manifest)?;
    std::fs::create_dir_all(&a.dir).map_err(|e| Error::io(&a.dir, e))?;
    let out = m.run(&a.dir)?;
    println!(
        "{} iterations ({:?}), sigma_gc {:.6}, sigma_mc {:.6}",
        out.run.iters_done, out.run.termination, out.report.sigma_gc, out.report.sigma_mc
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Mesh(a) => mesh(a),
        Command::Metrics(a) => metrics(a),
        Command::Sweep(a) => sweep(a, cli.threads),
        Command::Bench(a) => bench_cmd(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
