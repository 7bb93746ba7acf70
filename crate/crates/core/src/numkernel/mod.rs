//! Numerical substrate: sphere points, the chordal metric, polynomials and a
//! multiplicity-aware root finder.

mod index;
mod poly;
mod roots;
mod sphere;

pub use index::PointIndex;
pub use poly::Polynomial;
pub use roots::{roots_with_multiplicity, Root, RootSet, RootTolerances};
pub use sphere::{chordal_distance, SpherePoint};
