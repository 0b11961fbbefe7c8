#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod arith;
pub mod cancel;
pub mod engine;
pub mod lattice;
pub mod level;
pub mod pathologies;
pub mod perm;
pub mod sinfty;
pub mod trees;
pub mod witnesses;
