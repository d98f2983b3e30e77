//! Matrix Lie algebras, involutions and their eigenspace decompositions.

pub mod algebra;
pub mod catalog;
pub mod involution;
pub mod octonion;
pub mod pair;
pub mod rank;
pub mod twist;

pub use algebra::LieAlgebraBasis;
pub use catalog::{algebra_from_key, build_algebra, Family};
pub use involution::Involution;
pub use pair::{decompose, Block, PairwiseSymmetricAlgebra, Subspace};
pub use rank::{maximal_abelian_in, rank_of};
