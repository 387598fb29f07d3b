//! Lifting elements of SL_n(Z/qZ) to SL_n(Z).
//!
//! The crate covers three directions:
//!
//! * [`lifting`] constructs a lift of any `x ∈ SL_n(Z/qZ)` whose first
//!   `n−1` rows are `O(q log q)` and whose last row is `O(q² log q)`.
//! * [`hardness`] builds diagonal elements whose every lift is provably
//!   large, from small units mod `q²` that have large n-th roots.
//! * [`oracle`] and [`actions`] enumerate SL_n(Z) exhaustively at desk scale
//!   to check those bounds exactly.
//!
//! [`residue`] and [`intmat`] hold the exact arithmetic everything else
//! runs on.

pub mod actions;
pub mod hardness;
pub mod intmat;
pub mod lifting;
pub mod oracle;
pub mod residue;

pub use actions::{DiameterProfile, DistanceRecord, PointA, PointP, Reach, Space};
pub use hardness::{HardInstance, Obstruction, RootSearch, RootWitness};
pub use intmat::{IntMatrix, NormReport};
pub use lifting::{LiftCertificate, LiftConfig};
pub use oracle::{EnumSpec, MinNorm};
pub use residue::{Factorization, Residue, RootFinder};

use num_bigint::BigInt;
use serde::Serializer;

/// Serializes a `BigInt` as a decimal string.
pub fn serialize_bigint<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}
