//! Perimeter, Willmore and Euler-Elastica phase-field energies and their L² gradients.
//!
//! With `g = εΔu − W′(u)/ε`:
//!
//! * `𝒫ε(u) = ∫ ε/2 |∇u|² + W(u)/ε`, gradient `W′(u)/ε − εΔu`
//! * `𝒲ε(u) = (1/2ε) ∫ g²`, gradient `Δg − W″(u) g / ε²`
//! * `ℰε = 𝒫ε + 𝒲ε`
//!
//! The Dirichlet term is evaluated as `−∫ u Δu` with the spectral Laplacian, which
//! makes every energy here an exact quadratic/polynomial function of the grid values
//! whose derivative is the gradient returned alongside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField3D;
use crate::phasefield::double_well;
use crate::spectral::SpectralPlan;

/// Which functional a flow minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Perimeter,
    Willmore,
    Elastica,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [
        Formulation::Perimeter,
        Formulation::Willmore,
        Formulation::Elastica,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::Perimeter => "perimeter",
            Formulation::Willmore => "willmore",
            Formulation::Elastica => "elastica",
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perimeter" => Ok(Formulation::Perimeter),
            "willmore" => Ok(Formulation::Willmore),
            "elastica" => Ok(Formulation::Elastica),
            other => Err(Error::Config(format!("unknown formulation `{other}`"))),
        }
    }
}

/// The two parts of the elastica energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub perimeter_term: f64,
    pub willmore_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(perimeter_term: f64, willmore_term: f64) -> Self {
        EnergyBreakdown {
            perimeter_term,
            willmore_term,
            total: perimeter_term + willmore_term,
        }
    }

    /// The value minimised by `formulation`.
    pub fn objective(&self, formulation: Formulation) -> f64 {
        match formulation {
            Formulation::Perimeter => self.perimeter_term,
            Formulation::Willmore => self.willmore_term,
            Formulation::Elastica => self.total,
        }
    }
}

/// Both energy parts from one Laplacian evaluation.
pub fn energy_elastica(plan: &SpectralPlan, u: &ScalarField3D, eps: f64) -> Result<EnergyBreakdown> {
    let lap = plan.laplacian(u)?;
    Ok(breakdown_with_laplacian(u, &lap, eps))
}

pub(crate) fn breakdown_with_laplacian(u: &ScalarField3D, lap: &ScalarField3D, eps: f64) -> EnergyBreakdown {
    let (mut dirichlet, mut well, mut will) = (0.0, 0.0, 0.0);
    for (&v, &l) in u.data().iter().zip(lap.data()) {
        let dw = double_well(v);
        dirichlet -= v * l;
        well += dw.w;
        let g = eps * l - dw.w1 / eps;
        will += g * g;
    }
    let vol = u.spec().voxel_volume();
    EnergyBreakdown::new(
        vol * (0.5 * eps * dirichlet + well / eps),
        vol * will / (2.0 * eps),
    )
}

pub fn energy_perimeter(plan: &SpectralPlan, u: &ScalarField3D, eps: f64) -> Result<f64> {
    Ok(energy_elastica(plan, u, eps)?.perimeter_term)
}

pub fn energy_willmore(plan: &SpectralPlan, u: &ScalarField3D, eps: f64) -> Result<f64> {
    Ok(energy_elastica(plan, u, eps)?.willmore_term)
}

pub fn energy(plan: &SpectralPlan, u: &ScalarField3D, eps: f64, formulation: Formulation) -> Result<f64> {
    Ok(energy_elastica(plan, u, eps)?.objective(formulation))
}

/// `W′(u)/ε − εΔu`.
pub fn grad_perimeter(plan: &SpectralPlan, u: &ScalarField3D, eps: f64) -> Result<ScalarField3D> {
    let lap = plan.laplacian(u)?;
    u.zip_map(&lap, |v, l| double_well(v).w1 / eps - eps * l)
}

/// `Δg − W″(u) g / ε²` with `g = εΔu − W′(u)/ε`.
pub fn grad_willmore(plan: &SpectralPlan, u: &ScalarField3D, eps: f64) -> Result<ScalarField3D> {
    let lap = plan.laplacian(u)?;
    let g = u.zip_map(&lap, |v, l| eps * l - double_well(v).w1 / eps)?;
    let lap_g = plan.laplacian(&g)?;
    let mut out = lap_g;
    for ((o, &v), &gv) in out.data_mut().iter_mut().zip(u.data()).zip(g.data()) {
        *o -= double_well(v).w2 * gv / (eps * eps);
    }
    Ok(out)
}

pub fn grad_elastica(plan: &SpectralPlan, u: &ScalarField3D, eps: f64) -> Result<ScalarField3D> {
    let p = grad_perimeter(plan, u, eps)?;
    let w = grad_willmore(plan, u, eps)?;
    ScalarField3D::axpy(1.0, &p, &w)
}

pub fn gradient(
    plan: &SpectralPlan,
    u: &ScalarField3D,
    eps: f64,
    formulation: Formulation,
) -> Result<ScalarField3D> {
    match formulation {
        Formulation::Perimeter => grad_perimeter(plan, u, eps),
        Formulation::Willmore => grad_willmore(plan, u, eps),
        Formulation::Elastica => grad_elastica(plan, u, eps),
    }
}

/// `c_W = ∫₀¹ √(2W(s)) ds` by composite Simpson quadrature.
pub fn modica_mortola_constant(intervals: usize) -> f64 {
    let n = intervals.max(2) / 2 * 2;
    let f = |s: f64| (2.0 * double_well(s).w).sqrt();
    let h = 1.0 / n as f64;
    let mut sum = f(0.0) + f(1.0);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    sum * h / 3.0
}
