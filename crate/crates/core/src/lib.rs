//! Exact projective dynamics, ping-pong certification and free-subgroup
//! synthesis over ℚ with archimedean or p-adic absolute values, plus
//! Bass–Serre tree dynamics for amalgams of finite groups.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod pingpong;
pub mod poly;
pub mod projective;
pub mod scalar;
pub mod synthesis;
pub mod tree;
pub mod words;

pub use error::{Error, Result};
