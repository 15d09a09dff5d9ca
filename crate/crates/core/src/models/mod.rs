//! Site bases, couplings and lattice Hamiltonians.

mod basis;
mod couplings;
mod hamiltonian;
mod sparse;

pub use basis::{BasisKind, LocalOp, LocalOpName, SiteBasis};
pub use couplings::{effective_couplings, CouplingSet};
pub use hamiltonian::{
    build_bh, build_tj, build_xxz, HamiltonianRep, ModelKind, PrepPotential, Species, Term,
};
pub use sparse::{SectorBasis, SparseOperator};
