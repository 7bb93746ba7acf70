pub mod bimodule;
pub mod error;
pub mod expr;
pub mod io;
pub mod julia;
pub mod measure;
pub mod numkernel;
pub mod ratmap;
pub mod registry;
pub mod transfer;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numkernel::{chordal_distance, Polynomial, SpherePoint};
pub use ratmap::{Budget, CriticalDatum, Fiber, FiberEntry, RationalMap};
pub use transfer::{Observable, TestFunction};
