//! Truncated Laurent loops, their involutions, and connection-order forms.

pub mod connection;
pub mod involutions;
pub mod laurent;
pub mod mc;

pub use connection::{extract_connection, extract_connection_unchecked, ConnectionData11};
pub use involutions::{apply_involution, is_in_h, LoopInvolution, Reality};
pub use laurent::{LaurentLoop, Scalar};
