//! Linearised polycrystal plasticity: dislocation self-energies, their
//! relaxation, the limit polycrystal problem and semi-discrete recovery.

pub mod config;
pub mod elastostatics;
pub mod polycrystal;
pub mod relaxation;
pub mod run;
pub mod self_energy;
pub mod semi_discrete;
