//! Projected gradient descent (PGDM) and ADMM iterations with obstacle projection.
//!
//! Every step first clamps the current iterate into the obstacle box, then takes one
//! semi-implicit step whose nonlinear terms are evaluated at the clamped field and
//! whose constant-coefficient part is inverted in Fourier space.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::{build_constraints, ObstacleMode, ObstaclePair, SliceStack};
use crate::energies::{breakdown_with_laplacian, energy_elastica, EnergyBreakdown, Formulation};
use crate::error::{Error, Result};
use crate::grid::{BinaryVolume, ScalarField3D, VectorField3D};
use crate::phasefield::{double_well, init_phase_field, project_in_place, PhaseFieldParams};
use crate::spectral::{check_positive, SpectralPlan, Symbol};

/// Guards the relative-change denominator.
const TINY: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pgdm,
    Admm,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgdm" => Ok(Method::Pgdm),
            "admm" => Ok(Method::Admm),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Sign of the `W″Δu` and `W′W″` curvature-coupling terms in the elastica updates.
///
/// `Descent` follows the negative energy gradient, so the PGDM step is a semi-implicit
/// discretisation of `u_t = −grad ℰε`. `Reversed` flips both terms (and the `W′W″`
/// term of the ADMM `u`-update); it is kept for comparison only, as it destabilises
/// the pure phases `u = 0` and `u = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSign {
    #[default]
    Descent,
    Reversed,
}

impl CouplingSign {
    fn factor(self) -> f64 {
        match self {
            CouplingSign::Descent => 1.0,
            CouplingSign::Reversed => -1.0,
        }
    }
}

/// Form of the ADMM `w`-update.
///
/// The `w`-part of the augmented Lagrangian is
/// `(1/2ε)(ε div w − W′/ε)² + (ρ/2)|∇u − w + λ/ρ|²`. `Exact` minimises it: the
/// minimiser solves `(ρ − ε∇div) w = ρ∇u + λ − ∇W′/ε`, done through its divergence.
/// `Lagrangian` takes one preconditioned descent step on it,
/// `w ← P_w[w − (τ/ε)∇W′(u) − τρ(w − ∇u − λ/ρ)]`, which only moves `w` towards
/// `∇u` at rate `τρ` per iteration. `Literal` uses
/// `w ← P_w[w + (τ/ε)W′(u)Δw + τρ(w − ∇u − λ/ρ)]`, whose explicit `W′Δw` part is
/// unstable once `(τ/ε)|W′|·4π²|ξ|²` exceeds 2 and whose penalty term pushes `w`
/// away from `∇u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WUpdate {
    #[default]
    Exact,
    Lagrangian,
    Literal,
}

impl std::str::FromStr for WUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(WUpdate::Exact),
            "lagrangian" => Ok(WUpdate::Lagrangian),
            "literal" => Ok(WUpdate::Literal),
            other => Err(Error::Config(format!("unknown w-update `{other}`"))),
        }
    }
}

/// Parameters of one solver run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub formulation: Formulation,
    pub method: Method,
    pub eps: f64,
    pub tau: f64,
    /// ADMM penalty; ignored by PGDM.
    pub rho: f64,
    pub max_iters: usize,
    /// Stop when `|E(u_{k+1}) − E(u_k)| < tol_energy`; 0 disables.
    pub tol_energy: f64,
    /// Stop when the relative L² change drops below `tol_rel`; 0 disables.
    pub tol_rel: f64,
    pub obstacle_mode: ObstacleMode,
    pub record_trace: bool,
    /// Fattening exponent: slabs have thickness `ε^alpha`.
    pub alpha: f64,
    /// In-plane erosion of slice masks, in pixels.
    pub erosion: usize,
    pub coupling: CouplingSign,
    #[serde(default)]
    pub w_update: WUpdate,
}

impl SolverConfig {
    pub fn new(formulation: Formulation, method: Method, eps: f64, tau: f64) -> Self {
        SolverConfig {
            formulation,
            method,
            eps,
            tau,
            rho: 1.0,
            max_iters: 2000,
            tol_energy: 0.0,
            tol_rel: 1e-4,
            obstacle_mode: ObstacleMode::Indicator,
            record_trace: true,
            alpha: PhaseFieldParams::DEFAULT_ALPHA,
            erosion: 0,
            coupling: CouplingSign::Descent,
            w_update: WUpdate::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive(&[("eps", self.eps), ("tau", self.tau)])?;
        if self.method == Method::Admm {
            check_positive(&[("rho", self.rho)])?;
            if self.formulation != Formulation::Elastica {
                return Err(Error::Config(format!(
                    "admm is only defined for the elastica formulation, not {}",
                    self.formulation
                )));
            }
        }
        if !(self.tol_energy >= 0.0 && self.tol_rel >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        PhaseFieldParams::new(self.eps, self.alpha)?;
        Ok(())
    }

    pub fn params(&self) -> Result<PhaseFieldParams> {
        PhaseFieldParams::new(self.eps, self.alpha)
    }
}

/// ADMM iterate: the field, the auxiliary gradient and the multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub u: ScalarField3D,
    pub w: VectorField3D,
    pub lambda: VectorField3D,
}

impl AdmmState {
    /// `w₀ = ∇u₀`, `λ₀ = w₀`.
    pub fn initial(plan: &SpectralPlan, u0: ScalarField3D) -> Result<Self> {
        let w = plan.gradient(&u0)?;
        Ok(AdmmState {
            lambda: w.clone(),
            u: u0,
            w,
        })
    }

    /// `‖∇u − w‖₂`.
    pub fn primal_residual(&self, plan: &SpectralPlan) -> Result<f64> {
        let g = plan.gradient(&self.u)?;
        Ok(VectorField3D::axpy(-1.0, &self.w, &g)?.l2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EnergyTol,
    RelTol,
    MaxIters,
    /// Stopped by an observer.
    Interrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub energy: EnergyBreakdown,
    pub rel_err: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub config: SolverConfig,
    pub final_u: ScalarField3D,
    pub iters_done: usize,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    pub warnings: Vec<String>,
}

impl SolverRun {
    /// Writes `iter,perimeter,willmore,total,rel_err,wall_ms`.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iter,perimeter,willmore,total,rel_err,wall_ms\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:.3}\n",
                r.iter,
                r.energy.perimeter_term,
                r.energy.willmore_term,
                r.energy.total,
                r.rel_err,
                r.wall_ms
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// What an observer sees after each iteration.
pub struct IterationView<'a> {
    /// 1-based index of the iteration just completed.
    pub iter: usize,
    /// The projected field the step was taken from.
    pub u_half: &'a ScalarField3D,
    pub u_next: &'a ScalarField3D,
    pub admm: Option<&'a AdmmState>,
    pub obstacles: &'a ObstaclePair,
    pub rel_err: f64,
    pub energy: Option<EnergyBreakdown>,
}

/// Returned by an observer to continue or stop the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// The starting point of a run.
#[derive(Debug, Clone, Copy)]
pub enum RunInput<'a> {
    /// Reconstruction from slices: initial set and obstacles are derived from the stack.
    Stack(&'a SliceStack),
    /// Unconstrained flow (`0 ≤ u ≤ 1`) from an initial set.
    Set(&'a BinaryVolume),
}

/// Cached symbols and parameters for repeated steps on one grid.
pub struct Stepper<'a> {
    plan: &'a SpectralPlan,
    cfg: SolverConfig,
    symbol: Symbol,
    w_symbol: Option<Symbol>,
}

impl<'a> Stepper<'a> {
    pub fn new(plan: &'a SpectralPlan, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let (eps, tau) = (cfg.eps, cfg.tau);
        let (symbol, w_symbol) = match (cfg.method, cfg.formulation) {
            (Method::Admm, _) => (plan.admm_u_symbol(tau, cfg.rho), Some(plan.admm_w_symbol(eps, tau))),
            (Method::Pgdm, Formulation::Elastica) => (plan.pgdm_symbol(eps, tau), None),
            (Method::Pgdm, Formulation::Perimeter) => (plan.perimeter_symbol(eps, tau), None),
            (Method::Pgdm, Formulation::Willmore) => (plan.willmore_symbol(eps, tau), None),
        };
        Ok(Stepper {
            plan,
            cfg,
            symbol,
            w_symbol,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// One PGDM update from an already projected field.
    pub fn pgdm_update(&self, u: &ScalarField3D) -> Result<ScalarField3D> {
        let plan = self.plan;
        let (eps, tau) = (self.cfg.eps, self.cfg.tau);
        let s = self.cfg.coupling.factor();
        let mut rhs = Vec::with_capacity(u.data().len());
        match self.cfg.formulation {
            Formulation::Perimeter => {
                for &v in u.data() {
                    rhs.push(v - tau / eps * double_well(v).w1);
                }
            }
            Formulation::Willmore | Formulation::Elastica => {
                let w1 = u.map(|v| double_well(v).w1);
                let (su, sw) = plan.forward_pair(u, &w1)?;
                let (mut su, mut sw) = (su, sw);
                plan.laplacian_in_place(&mut su)?;
                plan.laplacian_in_place(&mut sw)?;
                let (lap_u, lap_w1) = plan.inverse_pair(su, sw)?;
                let perimeter = self.cfg.formulation == Formulation::Elastica;
                let it = u.data().iter().zip(lap_u.data()).zip(lap_w1.data());
                for ((&v, &lu), &lw) in it {
                    let dw = double_well(v);
                    let mut r = v + tau / eps * lw
                        + s * (tau / eps * dw.w2 * lu - tau / eps.powi(3) * dw.w1 * dw.w2);
                    if perimeter {
                        r -= tau / eps * dw.w1;
                    }
                    rhs.push(r);
                }
            }
        }
        let rhs = ScalarField3D::from_raw(u.spec(), rhs);
        self.plan.filter(&rhs, &self.symbol)
    }

    /// One ADMM update from a state whose `u` is already projected.
    pub fn admm_update(&self, state: &AdmmState) -> Result<AdmmState> {
        let plan = self.plan;
        let (eps, tau, rho) = (self.cfg.eps, self.cfg.tau, self.cfg.rho);
        let s = self.cfg.coupling.factor();
        let AdmmState { u, w, lambda } = state;

        let (wx, wy) = plan.forward_pair(&w.x, &w.y)?;
        let (wz, lx) = plan.forward_pair(&w.z, &lambda.x)?;
        let (ly, lz) = plan.forward_pair(&lambda.y, &lambda.z)?;
        let mut div_w = plan.derivative_spectrum(&wx, 0);
        let mut div_l = plan.derivative_spectrum(&lx, 0);
        for (axis, sw, sl) in [(1, &wy, &ly), (2, &wz, &lz)] {
            for (o, v) in div_w.data_mut().iter_mut().zip(plan.derivative_spectrum(sw, axis).data()) {
                *o += v;
            }
            for (o, v) in div_l.data_mut().iter_mut().zip(plan.derivative_spectrum(sl, axis).data()) {
                *o += v;
            }
        }
        let (div_w, div_l) = plan.inverse_pair(div_w, div_l)?;

        let mut rhs = Vec::with_capacity(u.data().len());
        let it = u.data().iter().zip(div_w.data()).zip(div_l.data());
        for ((&v, &dw_), &dl) in it {
            let dw = double_well(v);
            rhs.push(
                v + tau
                    * (-rho * dw_ + dl - dw.w1 / eps + dw_ * dw.w2 / eps
                        - s * dw.w1 * dw.w2 / eps.powi(3)),
            );
        }
        let u_next = plan.filter(&ScalarField3D::from_raw(u.spec(), rhs), &self.symbol)?;

        let grad_u = plan.gradient(&u_next)?;
        let w1 = u_next.map(|v| double_well(v).w1);
        let mut comps = Vec::with_capacity(3);
        match self.cfg.w_update {
            WUpdate::Exact => {
                let grad_w1 = plan.gradient(&w1)?;
                for d in 0..3 {
                    let (lc, gc, fc) = (
                        lambda.components()[d].data(),
                        grad_u.components()[d].data(),
                        grad_w1.components()[d].data(),
                    );
                    let r = (0..lc.len()).map(|i| rho * gc[i] + lc[i] - fc[i] / eps).collect();
                    comps.push(ScalarField3D::from_raw(u.spec(), r));
                }
                let r = VectorField3D::new(comps.remove(0), comps.remove(0), comps.remove(0))?;
                // div w = (ρ − ε div∇)⁻¹ div r, then w = (r + ε∇ div w)/ρ
                let div_w = plan.filter(&plan.divergence(&r)?, &plan.div_grad_symbol(|k| 1.0 / (rho + eps * k)))?;
                let grad_div = plan.gradient(&div_w)?;
                let w_next = VectorField3D::axpy(eps, &grad_div, &r)?.map_components(|c| c.map(|v| v / rho));
                return Ok(self.finish_admm(lambda, u_next, grad_u, w_next));
            }
            WUpdate::Lagrangian => {
                let grad_w1 = plan.gradient(&w1)?;
                for d in 0..3 {
                    let (wc, lc, gc, fc) = (
                        w.components()[d].data(),
                        lambda.components()[d].data(),
                        grad_u.components()[d].data(),
                        grad_w1.components()[d].data(),
                    );
                    let r = (0..wc.len())
                        .map(|i| wc[i] - tau / eps * fc[i] - tau * rho * (wc[i] - gc[i] - lc[i] / rho))
                        .collect();
                    comps.push(ScalarField3D::from_raw(u.spec(), r));
                }
            }
            WUpdate::Literal => {
                let lap_w = w.map_components(|c| plan.laplacian(c).expect("same grid"));
                for d in 0..3 {
                    let (wc, lc, gc, lapc) = (
                        w.components()[d].data(),
                        lambda.components()[d].data(),
                        grad_u.components()[d].data(),
                        lap_w.components()[d].data(),
                    );
                    let r = (0..wc.len())
                        .map(|i| {
                            wc[i] + tau / eps * w1.data()[i] * lapc[i]
                                + tau * rho * (wc[i] - gc[i] - lc[i] / rho)
                        })
                        .collect();
                    comps.push(ScalarField3D::from_raw(u.spec(), r));
                }
            }
        }
        let z = comps.pop().expect("three components");
        let y = comps.pop().expect("three components");
        let x = comps.pop().expect("three components");
        let rhs_w = VectorField3D::new(x, y, z)?;
        let w_next = plan.filter_vector(&rhs_w, self.w_symbol.as_ref().expect("admm stepper"))?;
        Ok(self.finish_admm(lambda, u_next, grad_u, w_next))
    }

    /// `λ_{k+1} = λ_k + ρ(∇u_{k+1} − w_{k+1})`.
    fn finish_admm(
        &self,
        lambda: &VectorField3D,
        u_next: ScalarField3D,
        grad_u: VectorField3D,
        w_next: VectorField3D,
    ) -> AdmmState {
        let rho = self.cfg.rho;
        let mut lambda_next = lambda.clone();
        for d in 0..3 {
            let (g, wn) = (grad_u.components()[d], w_next.components()[d]);
            let l = match d {
                0 => &mut lambda_next.x,
                1 => &mut lambda_next.y,
                _ => &mut lambda_next.z,
            };
            for ((lv, &gv), &wv) in l.data_mut().iter_mut().zip(g.data()).zip(wn.data()) {
                *lv += rho * (gv - wv);
            }
        }
        AdmmState {
            u: u_next,
            w: w_next,
            lambda: lambda_next,
        }
    }
}

fn diverged(iter: usize, what: &str) -> Error {
    Error::Divergence {
        iter,
        detail: format!("non-finite values in {what}"),
    }
}

/// `u_{k+1}` from `u_k`: projection, then one semi-implicit step.
pub fn pgdm_step(
    u: &ScalarField3D,
    obstacles: &ObstaclePair,
    cfg: &SolverConfig,
    plan: &SpectralPlan,
) -> Result<ScalarField3D> {
    obstacles.check_compatible(u.spec())?;
    let stepper = Stepper::new(plan, *cfg)?;
    let mut half = u.clone();
    project_in_place(&mut half, obstacles);
    let next = stepper.pgdm_update(&half)?;
    if !next.is_finite() {
        return Err(diverged(1, "u"));
    }
    Ok(next)
}

/// `(u, w, λ)_{k+1}` from `(u, w, λ)_k`.
pub fn admm_step(
    state: &AdmmState,
    obstacles: &ObstaclePair,
    cfg: &SolverConfig,
    plan: &SpectralPlan,
) -> Result<AdmmState> {
    if cfg.method != Method::Admm {
        return Err(Error::Config("admm_step needs method = admm".into()));
    }
    obstacles.check_compatible(state.u.spec())?;
    let stepper = Stepper::new(plan, *cfg)?;
    let mut half = state.clone();
    project_in_place(&mut half.u, obstacles);
    let next = stepper.admm_update(&half)?;
    if !(next.u.is_finite() && next.w.is_finite() && next.lambda.is_finite()) {
        return Err(diverged(1, "admm state"));
    }
    Ok(next)
}

fn rel_change(new: &ScalarField3D, old: &ScalarField3D) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &b) in new.data().iter().zip(old.data()) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    // the common voxel-volume weight cancels
    num.sqrt() / den.sqrt().max(TINY)
}

/// Runs to a stopping rule.
pub fn run(input: RunInput<'_>, cfg: &SolverConfig) -> Result<SolverRun> {
    run_with_observer(input, cfg, |_| Control::Continue)
}

/// Runs to a stopping rule, calling `observer` after every iteration.
pub fn run_with_observer(
    input: RunInput<'_>,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&IterationView<'_>) -> Control,
) -> Result<SolverRun> {
    cfg.validate()?;
    let params = cfg.params()?;
    let (e0, obstacles, warnings) = match input {
        RunInput::Stack(stack) => {
            let setup = build_constraints(stack, &params, cfg.erosion, cfg.obstacle_mode)?;
            (setup.initial_set, setup.obstacles, setup.warnings)
        }
        RunInput::Set(set) => (set.clone(), ObstaclePair::unconstrained(set.spec()), Vec::new()),
    };
    let u0 = init_phase_field(&e0, &params)?;
    let plan = SpectralPlan::new(u0.spec());
    let mut run = iterate(&plan, u0, &obstacles, cfg, &mut observer)?;
    run.warnings = warnings;
    Ok(run)
}

/// Iterates from a given field and obstacle pair.
pub fn iterate(
    plan: &SpectralPlan,
    u0: ScalarField3D,
    obstacles: &ObstaclePair,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&IterationView<'_>) -> Control,
) -> Result<SolverRun> {
    obstacles.check_compatible(u0.spec())?;
    let stepper = Stepper::new(plan, *cfg)?;
    let need_energy = cfg.record_trace || cfg.tol_energy > 0.0;
    let objective = |u: &ScalarField3D| -> Result<EnergyBreakdown> { energy_elastica(plan, u, cfg.eps) };
    let mut prev_energy = if cfg.tol_energy > 0.0 {
        Some(objective(&u0)?)
    } else {
        None
    };

    let mut admm = match cfg.method {
        Method::Admm => Some(AdmmState::initial(plan, u0.clone())?),
        Method::Pgdm => None,
    };
    let mut u = u0;
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iters_done = 0;

    for k in 1..=cfg.max_iters {
        let start = Instant::now();
        let mut half = u.clone();
        project_in_place(&mut half, obstacles);
        debug_assert!(obstacles.contains(&half));
        let next = match admm.as_mut() {
            Some(state) => {
                state.u = half.clone();
                let new_state = stepper.admm_update(state)?;
                if !(new_state.w.is_finite() && new_state.lambda.is_finite()) {
                    return Err(diverged(k, "admm auxiliary variables"));
                }
                *state = new_state;
                state.u.clone()
            }
            None => stepper.pgdm_update(&half)?,
        };
        if !next.is_finite() {
            return Err(diverged(k, "u"));
        }
        let rel_err = rel_change(&next, &u);
        let energy = if need_energy {
            let lap = plan.laplacian(&next)?;
            Some(breakdown_with_laplacian(&next, &lap, cfg.eps))
        } else {
            None
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        if let (true, Some(e)) = (cfg.record_trace, energy) {
            trace.push(TraceRecord {
                iter: k,
                energy: e,
                rel_err,
                wall_ms,
            });
        }
        iters_done = k;
        let control = observer(&IterationView {
            iter: k,
            u_half: &half,
            u_next: &next,
            admm: admm.as_ref(),
            obstacles,
            rel_err,
            energy,
        });
        u = next;

        if cfg.tol_energy > 0.0 {
            let e = energy.expect("energy computed when tol_energy > 0");
            let de = (e.objective(cfg.formulation) - prev_energy.expect("set").objective(cfg.formulation)).abs();
            prev_energy = Some(e);
            if de < cfg.tol_energy {
                termination = Termination::EnergyTol;
                break;
            }
        }
        if cfg.tol_rel > 0.0 && rel_err < cfg.tol_rel {
            termination = Termination::RelTol;
            break;
        }
        if control == Control::Stop {
            termination = Termination::Interrupted;
            break;
        }
    }
    project_in_place(&mut u, obstacles);
    Ok(SolverRun {
        config: *cfg,
        final_u: u,
        iters_done,
        trace,
        termination,
        warnings: Vec::new(),
    })
}
