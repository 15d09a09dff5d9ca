//! Block-sparse tensors with two-species U(1) charges, matrix-product states
//! and operators, compression and expectation values.

mod compress;
mod dmrg;
mod env;
pub mod fusion;
mod mpo;
mod mps;
mod tensor;

pub use compress::{compress, CompressionReport};
pub(crate) use compress::{compress_raw, compress_raw_with};
pub use dmrg::{dmrg_ground_state, DmrgConfig, DmrgResult};
pub use env::{expectation, mpo_expectation, Measurer, SiteOp};
pub use mpo::{apply_mpo, Mpo};
pub use mps::{entropy_of, site_leg, Mps, SV_FLOOR};
pub use tensor::{BlockTensor, Dir, Leg};
