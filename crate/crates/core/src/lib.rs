pub mod constraints;
pub mod curvature;
pub mod distance;
pub mod energies;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
mod mc_tables;
pub mod mesh;
pub mod phasefield;
pub mod solvers;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/phase-fields.md")]
    mod phase_fields {}
    #[doc = include_str!("../../../book/src/energies.md")]
    mod energies {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/curvature.md")]
    mod curvature {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
