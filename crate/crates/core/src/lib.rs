#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classical;
pub mod cli;
pub mod error;
pub mod expansion;
pub mod fd;
pub mod mass;
pub mod ode;
pub mod output;
pub mod packet;
pub mod pde;
pub mod quadrature;
pub mod riccati;

pub use error::{Error, Result};
