//! Collective communication for the distributed trainer.
//!
//! Workers hold dense ranks and exchange 64-bit float payloads over a
//! [`transport::Transport`]: either in-process channels
//! ([`transport::inproc_mesh`]) or a TCP socket mesh
//! ([`tcp::establish_tcp_mesh`]). On top of point-to-point messaging,
//! [`tree`] provides reduce/broadcast/allreduce with a fixed summation
//! order, so results are bitwise identical across transports and runs.

pub mod error;
pub mod frame;
pub mod tcp;
pub mod transport;
pub mod tree;

pub use error::{CommError, Result};
pub use transport::Transport;
