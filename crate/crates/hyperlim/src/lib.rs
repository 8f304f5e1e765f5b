//! Exact arithmetic for valued hyperfields and their limits.
//!
//! The library is organised bottom up:
//!
//! * [`ogroup`]: lexicographically ordered groups `Z^n`, initial segments
//!   of the nonnegative cone and convex subgroups.
//! * [`groundfield`]: exact base fields (`Q`, `F_p`), truncated multivariate
//!   Laurent series with explicit precision, and rational function expansion.
//! * [`hyperfield`]: canonical hypergroups and hyperfields, Krasner factor
//!   and quotient constructions, axiom checkers with machine checkable
//!   witnesses.
//! * [`rvsort`]: stringent valued hyperfields presented as sequence
//!   structures over a field and an ordered group, with the first order
//!   axiom battery.
//! * [`tower`]: isometric systems of quotient hyperfields and their inverse
//!   limits, including the doubling criterion and empty sum detection.
//! * [`hahn`]: Hahn series over a sequence structure, multiplicative
//!   inversion, leading value projection and Hensel lifting.
//! * [`reconstruct`]: the full pipeline from a tower to a valued field of
//!   Hahn series together with the stage isomorphism checks.

pub mod error;
pub mod report;
pub mod ogroup;
pub mod groundfield;
pub mod hyperfield;
pub mod rvsort;
pub mod tower;
pub mod hahn;
pub mod reconstruct;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
