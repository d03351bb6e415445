//! Finite, discrete realisations of Fell bundles over pair groupoids,
//! non-commutative Cartan and diagonal pairs, spatial automorphism groups,
//! groupoid 2-cocycles and the embedding invariant Φ, with numerical checks of
//! every structural property at desk scale.

pub mod algebra;
pub mod cli;
pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod fellbundle;
pub mod groupoid;
pub mod io;
pub mod linalg;
pub mod random;
pub mod subalgebra;

pub use error::{Error, Result};
