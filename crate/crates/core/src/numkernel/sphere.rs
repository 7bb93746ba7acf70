use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub const ZERO: SpherePoint = SpherePoint::Finite(Complex64 { re: 0.0, im: 0.0 });

    /// Builds a point from a complex number; non-finite input maps to infinity.
    pub fn new(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0))
    }

    pub fn from_parts(re: f64, im: f64) -> Self {
        Self::new(Complex64::new(re, im))
    }

    /// The point `[a : b]` in homogeneous coordinates.
    pub fn from_ratio(num: Complex64, den: Complex64) -> Self {
        if den == Complex64::new(0.0, 0.0) {
            return SpherePoint::Infinity;
        }
        if num.norm_sqr() <= den.norm_sqr() {
            SpherePoint::new(num / den)
        } else {
            let v = den / num;
            if v == Complex64::new(0.0, 0.0) {
                SpherePoint::Infinity
            } else {
                SpherePoint::new(v.inv())
            }
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(*z),
            SpherePoint::Infinity => None,
        }
    }

    /// `1/z` on the sphere.
    pub fn invert(&self) -> SpherePoint {
        match self {
            SpherePoint::Infinity => SpherePoint::ZERO,
            SpherePoint::Finite(z) if *z == Complex64::new(0.0, 0.0) => SpherePoint::Infinity,
            SpherePoint::Finite(z) => SpherePoint::new(z.inv()),
        }
    }

    /// Image under inverse stereographic projection onto the unit sphere in R³.
    /// Euclidean distance between images equals the chordal distance.
    pub fn to_unit_sphere(&self) -> [f64; 3] {
        match self {
            SpherePoint::Infinity => [0.0, 0.0, 1.0],
            SpherePoint::Finite(z) => {
                let r2 = z.norm_sqr();
                if r2 > 1.0 {
                    // w = 1/z chart keeps precision for large |z|
                    let w = z.inv();
                    let s2 = w.norm_sqr();
                    let den = 1.0 + s2;
                    [2.0 * w.re / den, -2.0 * w.im / den, (1.0 - s2) / den]
                } else {
                    let den = 1.0 + r2;
                    [2.0 * z.re / den, 2.0 * z.im / den, (r2 - 1.0) / den]
                }
            }
        }
    }

    /// Lexicographic order on (re, im) with infinity last.
    pub fn lex_cmp(&self, other: &SpherePoint) -> Ordering {
        match (self, other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => Ordering::Equal,
            (SpherePoint::Infinity, _) => Ordering::Greater,
            (_, SpherePoint::Infinity) => Ordering::Less,
            (SpherePoint::Finite(a), SpherePoint::Finite(b)) => a.re.total_cmp(&b.re).then_with(|| a.im.total_cmp(&b.im)),
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::new(z)
    }
}

impl From<f64> for SpherePoint {
    fn from(x: f64) -> Self {
        SpherePoint::real(x)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Infinity => write!(f, "inf"),
            SpherePoint::Finite(z) if z.im == 0.0 => write!(f, "{}", z.re),
            SpherePoint::Finite(z) if z.im < 0.0 => write!(f, "{}-{}i", z.re, -z.im),
            SpherePoint::Finite(z) => write!(f, "{}+{}i", z.re, z.im),
        }
    }
}

/// Chordal distance on the Riemann sphere, in `[0, 2]`.
pub fn chordal_distance(p: &SpherePoint, q: &SpherePoint) -> f64 {
    match (p, q) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity) | (SpherePoint::Infinity, SpherePoint::Finite(z)) => {
            2.0 / (1.0 + z.norm_sqr()).sqrt()
        }
        (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
            let d = 2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()).sqrt() * (1.0 + w.norm_sqr()).sqrt());
            if d.is_finite() {
                d.min(2.0)
            } else {
                // both moduli overflowed the squares; compare in the 1/z chart
                chordal_distance(&SpherePoint::new(z.inv()), &SpherePoint::new(w.inv()))
            }
        }
    }
}
