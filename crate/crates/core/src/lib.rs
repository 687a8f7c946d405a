//! CSTR biofilm reactor model: substrate profiles, reactor dynamics,
//! equilibria and their stability.

pub mod cli;
pub mod dynamics;
pub mod equilibria;
pub mod kinetics;
pub mod numerics;
pub mod stability;
pub mod substrate_bvp;
