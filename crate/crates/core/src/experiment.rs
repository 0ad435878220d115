//! Parameter rules, replayable experiment manifests, the ADMM parameter sweep and the
//! per-iteration timing benchmark.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::{ObstacleMode, SliceStack};
use crate::curvature::{curvature_report, population_std, vertex_curvatures, AreaKind, CurvatureReport};
use crate::energies::Formulation;
use crate::error::{Error, Result};
use crate::grid::{Axis, ScalarField3D};
use crate::io;
use crate::mesh::{extract_isosurface, TriMesh};
use crate::phasefield::PhaseFieldParams;
use crate::solvers::{run_with_observer, Control, CouplingSign, Method, RunInput, SolverConfig, SolverRun, WUpdate};
use crate::synth::{choose_planes, subsample_slices, Example, SliceRule};

/// `ε = c/N`, where `N` is the largest grid dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EpsRule {
    pub c: f64,
}

impl EpsRule {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Config(format!("eps rule constant must be positive, got {c}")));
        }
        Ok(EpsRule { c })
    }

    pub fn eps(&self, dims: [usize; 3]) -> f64 {
        self.c / dims.into_iter().max().unwrap_or(1) as f64
    }
}

impl std::str::FromStr for EpsRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let c = s
            .trim()
            .strip_suffix("/N")
            .and_then(|c| c.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("eps rule `{s}` is not of the form c/N")))?;
        EpsRule::new(c)
    }
}

impl fmt::Display for EpsRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/N", self.c)
    }
}

impl TryFrom<String> for EpsRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EpsRule> for String {
    fn from(r: EpsRule) -> String {
        r.to_string()
    }
}

/// `τ = c·ε^p`, written `eps^p` or `c*eps^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TauRule {
    pub c: f64,
    pub p: f64,
}

impl TauRule {
    pub fn new(c: f64, p: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0 && p.is_finite()) {
            return Err(Error::Config(format!("tau rule needs c > 0 and finite p, got c={c}, p={p}")));
        }
        Ok(TauRule { c, p })
    }

    pub fn tau(&self, eps: f64) -> f64 {
        self.c * eps.powf(self.p)
    }
}

impl std::str::FromStr for TauRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("tau rule `{s}` is not of the form eps^p or c*eps^p"));
        let t = s.trim();
        let (c, rest) = match t.split_once('*') {
            Some((c, rest)) => (c.trim().parse::<f64>().map_err(|_| bad())?, rest.trim()),
            None => (1.0, t),
        };
        let p = rest
            .strip_prefix("eps^")
            .and_then(|p| p.trim().parse::<f64>().ok())
            .ok_or_else(bad)?;
        TauRule::new(c, p)
    }
}

impl fmt::Display for TauRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c == 1.0 {
            write!(f, "eps^{}", self.p)
        } else {
            write!(f, "{}*eps^{}", self.c, self.p)
        }
    }
}

impl TryFrom<String> for TauRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TauRule> for String {
    fn from(r: TauRule) -> String {
        r.to_string()
    }
}

/// Inclusive range `a:b:step` (or a single value).
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("range `{s}` is not of the form a:b:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [a] if a.is_finite() => Ok(vec![a]),
        [a, b, step] if a.is_finite() && b.is_finite() && step > 0.0 && a <= b => {
            // integer stepping keeps 1.5:3:0.1 free of accumulated drift
            let count = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| round12(a + i as f64 * step)).collect())
        }
        _ => Err(bad()),
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Output files of a manifest run, relative to the directory passed to [`ExperimentManifest::run`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifestOutputs {
    pub volume: Option<PathBuf>,
    pub stack: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub histogram: Option<PathBuf>,
    pub vertices: Option<PathBuf>,
}

/// A complete, replayable description of one reconstruction experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub example: Example,
    pub n: usize,
    pub axis: Axis,
    /// Slice selection, including its seed.
    pub slices: SliceRule,
    pub formulation: Formulation,
    pub method: Method,
    pub eps_rule: EpsRule,
    pub tau_rule: TauRule,
    pub rho: f64,
    pub alpha: f64,
    pub erosion: usize,
    pub obstacle_mode: ObstacleMode,
    #[serde(default)]
    pub coupling: CouplingSign,
    #[serde(default)]
    pub w_update: WUpdate,
    pub max_iters: usize,
    pub tol_rel: f64,
    #[serde(default)]
    pub tol_energy: f64,
    pub level: f64,
    pub bins: usize,
    /// Write measured times into the trace; off by default so replays are byte-identical.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub outputs: ManifestOutputs,
}

/// Everything a manifest run produces in memory.
#[derive(Debug, Clone)]
pub struct ManifestOutcome {
    pub stack: SliceStack,
    pub run: SolverRun,
    pub mesh: TriMesh,
    pub report: CurvatureReport,
}

impl ExperimentManifest {
    /// The settings used for the built-in examples: sphere at N=32 with τ=ε⁴, branching
    /// cylinders at N=128 with τ=ε³ (perimeter, Willmore) or 10ε⁴ (elastica); ε=1.5/N.
    pub fn for_example(example: Example, formulation: Formulation, seed: u64) -> Self {
        let (n, tau_rule) = match (example, formulation) {
            (Example::Sphere, _) => (32, TauRule { c: 1.0, p: 4.0 }),
            (Example::Branching, Formulation::Elastica) => (128, TauRule { c: 10.0, p: 4.0 }),
            (Example::Branching, _) => (128, TauRule { c: 1.0, p: 3.0 }),
        };
        ExperimentManifest {
            example,
            n,
            axis: Axis::Z,
            slices: example.default_rule(seed),
            formulation,
            method: Method::Pgdm,
            eps_rule: EpsRule { c: 1.5 },
            tau_rule,
            rho: 1.0,
            alpha: PhaseFieldParams::DEFAULT_ALPHA,
            erosion: 0,
            obstacle_mode: ObstacleMode::Indicator,
            coupling: CouplingSign::Descent,
            w_update: WUpdate::Exact,
            max_iters: 2000,
            tol_rel: 1e-4,
            tol_energy: 0.0,
            level: 0.5,
            bins: 50,
            timing: false,
            outputs: ManifestOutputs::default(),
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let eps = self.eps_rule.eps([self.n; 3]);
        let mut cfg = SolverConfig::new(self.formulation, self.method, eps, self.tau_rule.tau(eps));
        cfg.rho = self.rho;
        cfg.alpha = self.alpha;
        cfg.erosion = self.erosion;
        cfg.obstacle_mode = self.obstacle_mode;
        cfg.coupling = self.coupling;
        cfg.w_update = self.w_update;
        cfg.max_iters = self.max_iters;
        cfg.tol_rel = self.tol_rel;
        cfg.tol_energy = self.tol_energy;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn stack(&self) -> Result<SliceStack> {
        let vol = self.example.volume(self.n)?;
        let planes = choose_planes(&vol, self.axis, &self.slices)?;
        subsample_slices(&vol, self.axis, &planes)
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            field: "manifest".into(),
            detail: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Runs synthesis, reconstruction, meshing and metrics, writing every declared
    /// output under `dir`.
    pub fn run(&self, dir: &Path) -> Result<ManifestOutcome> {
        let cfg = self.solver_config()?;
        let vol = self.example.volume(self.n)?;
        let planes = choose_planes(&vol, self.axis, &self.slices)?;
        let stack = subsample_slices(&vol, self.axis, &planes)?;
        let out = &self.outputs;
        if let Some(p) = &out.volume {
            io::write_volume(&dir.join(p), &vol)?;
        }
        if let Some(p) = &out.stack {
            io::write_stack(&dir.join(p), &stack)?;
        }
        let mut run = run_with_observer(RunInput::Stack(&stack), &cfg, |_| Control::Continue)?;
        if !self.timing {
            for r in &mut run.trace {
                r.wall_ms = 0.0;
            }
        }
        let mesh = extract_isosurface(&run.final_u, self.level);
        let report = curvature_report(&mesh, self.bins)?;
        if let Some(p) = &out.field {
            io::write_field(&dir.join(p), &run.final_u)?;
        }
        if let Some(p) = &out.trace {
            run.write_trace_csv(&dir.join(p))?;
        }
        if let Some(p) = &out.mesh {
            mesh.write_obj(&dir.join(p))?;
        }
        if let Some(p) = &out.report {
            let hist = out.histogram.as_ref().map(|h| dir.join(h));
            let csv = out.vertices.as_ref().map(|c| dir.join(c));
            report.write_outputs(&dir.join(p), hist.as_deref(), csv.as_deref())?;
        }
        Ok(ManifestOutcome {
            stack,
            run,
            mesh,
            report,
        })
    }
}

/// σ_GC of the level set of `u`, or `None` when the extracted surface is empty or not a
/// closed 2-manifold.
pub fn sigma_gc_of_field(u: &ScalarField3D, level: f64) -> Option<f64> {
    let mesh = extract_isosurface(u, level);
    if mesh.is_empty() {
        return None;
    }
    let c = vertex_curvatures(&mesh, AreaKind::Mixed).ok()?;
    let kg: Vec<f64> = c.gaussian.iter().flatten().copied().collect();
    (!kg.is_empty()).then(|| population_std(&kg))
}

/// Grid and run settings of an ADMM sensitivity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub example: Example,
    pub n: usize,
    pub seed: u64,
    pub rhos: Vec<f64>,
    pub epsns: Vec<f64>,
    pub tau_rule: TauRule,
    /// A cell passes when some iterate has `σ_GC < criterion`.
    pub criterion: f64,
    pub max_iters: usize,
    pub tol_rel: f64,
    pub w_update: WUpdate,
    pub coupling: CouplingSign,
    /// Worker threads; 1 runs the cells in order on the calling thread.
    pub threads: usize,
}

impl SweepSpec {
    pub fn new(example: Example, n: usize, rhos: Vec<f64>, epsns: Vec<f64>, tau_rule: TauRule, criterion: f64) -> Self {
        SweepSpec {
            example,
            n,
            seed: 0,
            rhos,
            epsns,
            tau_rule,
            criterion,
            max_iters: 2000,
            tol_rel: 1e-4,
            w_update: WUpdate::Exact,
            coupling: CouplingSign::Descent,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub rho: f64,
    pub epsn: f64,
    pub pass: bool,
    /// Smallest σ_GC seen; the run stops at the first passing iterate.
    pub sigma_gc_best: Option<f64>,
    pub iters: usize,
    pub note: Option<String>,
}

/// Runs ADMM on every `(ρ, ε·N)` cell, meshing every iterate. Cells are returned in
/// row-major order (ρ outer, ε·N inner).
pub fn sweep_admm(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    if spec.rhos.is_empty() || spec.epsns.is_empty() {
        return Err(Error::Config("sweep grids must be non-empty".into()));
    }
    if spec.criterion.is_nan() {
        return Err(Error::Config("sweep criterion is NaN".into()));
    }
    let (_, stack) = spec.example.stack(spec.n, spec.seed)?;
    let cells: Vec<(f64, f64)> = spec
        .rhos
        .iter()
        .flat_map(|&r| spec.epsns.iter().map(move |&e| (r, e)))
        .collect();
    let run_cell = |(rho, epsn): (f64, f64)| sweep_cell(spec, &stack, rho, epsn);

    let threads = spec.threads.max(1).min(cells.len());
    if threads == 1 {
        return cells.into_iter().map(run_cell).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepCell>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&cell) = cells.get(i) else { break };
                let r = run_cell(cell);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

fn sweep_cell(spec: &SweepSpec, stack: &SliceStack, rho: f64, epsn: f64) -> Result<SweepCell> {
    let eps = epsn / spec.n as f64;
    let mut cfg = SolverConfig::new(Formulation::Elastica, Method::Admm, eps, spec.tau_rule.tau(eps));
    cfg.rho = rho;
    cfg.max_iters = spec.max_iters;
    cfg.tol_rel = spec.tol_rel;
    cfg.record_trace = false;
    cfg.w_update = spec.w_update;
    cfg.coupling = spec.coupling;
    let mut best: Option<f64> = None;
    let mut pass = false;
    let outcome = run_with_observer(RunInput::Stack(stack), &cfg, |view| {
        let mut u = view.u_next.clone();
        crate::phasefield::project_in_place(&mut u, view.obstacles);
        if let Some(s) = sigma_gc_of_field(&u, 0.5) {
            best = Some(best.map_or(s, |b: f64| b.min(s)));
            if s < spec.criterion {
                pass = true;
                return Control::Stop;
            }
        }
        Control::Continue
    });
    let (iters, note) = match outcome {
        Ok(run) => (run.iters_done, None),
        Err(Error::Divergence { iter, detail }) => (iter, Some(format!("diverged at iteration {iter}: {detail}"))),
        Err(e) => return Err(e),
    };
    Ok(SweepCell {
        rho,
        epsn,
        pass: pass && note.is_none(),
        sigma_gc_best: best,
        iters,
        note,
    })
}

/// `rho,epsN,tau_rule,pass,sigma_gc_best`; `sigma_gc_best` is empty when no iterate
/// produced a surface.
pub fn sweep_csv(cells: &[SweepCell], tau_rule: &TauRule) -> String {
    let mut out = String::from("rho,epsN,tau_rule,pass,sigma_gc_best\n");
    for c in cells {
        let best = c.sigma_gc_best.map(|s| format!("{s:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", c.rho, c.epsn, tau_rule, u8::from(c.pass), best));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub iters: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Wall time per elastica PGDM iteration on the example's volume with `ε = 1.5/N` and
/// `τ = ε⁴`, unconstrained so that any `N` works. Setup is excluded: timing runs from
/// the end of the first iteration to the end of iteration `iters + 1`.
pub fn bench(example: Example, ns: &[usize], iters: usize) -> Result<Vec<BenchRow>> {
    if iters == 0 || ns.is_empty() {
        return Err(Error::Config("bench needs at least one size and one iteration".into()));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let vol = example.volume(n)?;
        let eps = 1.5 / n as f64;
        let mut cfg = SolverConfig::new(Formulation::Elastica, Method::Pgdm, eps, eps.powi(4));
        cfg.max_iters = iters + 1;
        cfg.tol_rel = 0.0;
        cfg.record_trace = false;
        let mut stamps = Vec::with_capacity(iters + 1);
        run_with_observer(RunInput::Set(&vol), &cfg, |_| {
            stamps.push(Instant::now());
            Control::Continue
        })?;
        let laps: Vec<f64> = stamps.windows(2).map(|w| (w[1] - w[0]).as_secs_f64() * 1e3).collect();
        rows.push(BenchRow {
            n,
            iters: laps.len(),
            mean_ms: laps.iter().sum::<f64>() / laps.len() as f64,
            min_ms: laps.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: laps.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

/// `n,iters,mean_ms,min_ms,max_ms`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,iters,mean_ms,min_ms,max_ms\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.4},{:.4},{:.4}\n", r.n, r.iters, r.mean_ms, r.min_ms, r.max_ms));
    }
    out
}
