use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::{chordal_distance, SpherePoint};
use crate::ratmap::RationalMap;

/// Anything that can be evaluated at a point of the sphere.
pub trait Observable: Send + Sync {
    fn eval(&self, x: &SpherePoint) -> Result<Complex64>;
}

/// Adapter turning a closure on sphere points into an [`Observable`].
pub struct FnObservable<F>(pub F);

impl<F> Observable for FnObservable<F>
where
    F: Fn(&SpherePoint) -> Result<Complex64> + Send + Sync,
{
    fn eval(&self, x: &SpherePoint) -> Result<Complex64> {
        (self.0)(x)
    }
}

impl<T: Observable + ?Sized> Observable for Arc<T> {
    fn eval(&self, x: &SpherePoint) -> Result<Complex64> {
        (**self).eval(x)
    }
}

impl<T: Observable + ?Sized> Observable for &T {
    fn eval(&self, x: &SpherePoint) -> Result<Complex64> {
        (**self).eval(x)
    }
}

/// `Σ c_{j,k} z^j conj(z)^k`, keyed by `(j, k)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonomialTable {
    terms: BTreeMap<(u32, u32), Complex64>,
}

impl MonomialTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_term(mut self, j: u32, k: u32, c: Complex64) -> Self {
        self.add_term(j, k, c);
        self
    }

    pub fn add_term(&mut self, j: u32, k: u32, c: Complex64) {
        let slot = self.terms.entry((j, k)).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
        if *slot == Complex64::new(0.0, 0.0) {
            self.terms.remove(&(j, k));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, Complex64)> + '_ {
        self.terms.iter().map(|(&(j, k), &c)| (j, k, c))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|(j, k)| j + k).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|&(j, k)| j == 0 && k == 0)
    }

    pub fn eval_finite(&self, z: Complex64) -> Complex64 {
        let zb = z.conj();
        self.terms.iter().map(|(&(j, k), &c)| c * z.powu(j) * zb.powu(k)).sum()
    }

    pub fn add(&self, other: &MonomialTable) -> MonomialTable {
        let mut out = self.clone();
        for (j, k, c) in other.terms() {
            out.add_term(j, k, c);
        }
        out
    }

    pub fn mul(&self, other: &MonomialTable) -> MonomialTable {
        let mut out = MonomialTable::new();
        for (j1, k1, c1) in self.terms() {
            for (j2, k2, c2) in other.terms() {
                out.add_term(j1 + j2, k1 + k2, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> MonomialTable {
        let mut out = MonomialTable::new();
        for (j, k, c) in self.terms() {
            out.add_term(j, k, c * s);
        }
        out
    }

    /// Complex conjugate: `conj(c) z^k conj(z)^j`.
    pub fn conj(&self) -> MonomialTable {
        let mut out = MonomialTable::new();
        for (j, k, c) in self.terms() {
            out.add_term(k, j, c.conj());
        }
        out
    }
}

impl fmt::Display for MonomialTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(j, k, c)| {
                let coef = if c.im == 0.0 {
                    format!("{}", c.re)
                } else {
                    format!("({}{:+}i)", c.re, c.im)
                };
                let mut s = coef;
                if j > 0 {
                    s.push_str(&if j == 1 { "*z".to_string() } else { format!("*z^{j}") });
                }
                if k > 0 {
                    s.push_str(&if k == 1 { "*zbar".to_string() } else { format!("*zbar^{k}") });
                }
                s
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Values at atoms with nearest-atom lookup; queries farther than `radius`
/// (chordal) from every atom fail instead of extrapolating.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub points: Vec<SpherePoint>,
    pub values: Vec<Complex64>,
    pub radius: f64,
}

impl Table {
    pub fn lookup(&self, x: &SpherePoint) -> Result<Complex64> {
        let (idx, dist) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, chordal_distance(p, x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or(Error::OutsideTable {
                radius: self.radius,
                distance: f64::INFINITY,
            })?;
        if dist > self.radius {
            return Err(Error::OutsideTable {
                radius: self.radius,
                distance: dist,
            });
        }
        Ok(self.values[idx])
    }
}

type ClosureFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// An element of `C(J_R)` in one of its finite descriptions.
#[derive(Clone)]
pub enum TestFunction {
    Monomials(MonomialTable),
    Tabulated(Table),
    /// A named closure on finite points; undefined at infinity.
    Closure {
        name: String,
        f: ClosureFn,
    },
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction::Monomials(MonomialTable::new().with_term(0, 0, Complex64::new(c, 0.0)))
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `z^j conj(z)^k`
    pub fn monomial(j: u32, k: u32) -> Self {
        TestFunction::Monomials(MonomialTable::new().with_term(j, k, Complex64::new(1.0, 0.0)))
    }

    /// `Re z`
    pub fn re_z() -> Self {
        TestFunction::Monomials(
            MonomialTable::new()
                .with_term(1, 0, Complex64::new(0.5, 0.0))
                .with_term(0, 1, Complex64::new(0.5, 0.0)),
        )
    }

    pub fn closure(name: impl Into<String>, f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        TestFunction::Closure {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Every `z^j conj(z)^k` with `j + k <= max_degree`.
    pub fn monomial_family(max_degree: u32) -> Vec<TestFunction> {
        let mut out = Vec::new();
        for total in 0..=max_degree {
            for j in (0..=total).rev() {
                out.push(TestFunction::monomial(j, total - j));
            }
        }
        out
    }

    pub fn as_monomials(&self) -> Option<&MonomialTable> {
        match self {
            TestFunction::Monomials(m) => Some(m),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Monomials(m) => m.to_string(),
            TestFunction::Tabulated(t) => format!("table[{}]", t.points.len()),
            TestFunction::Closure { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.name())
    }
}

impl Observable for TestFunction {
    fn eval(&self, x: &SpherePoint) -> Result<Complex64> {
        match (self, x) {
            (TestFunction::Tabulated(t), _) => t.lookup(x),
            (TestFunction::Monomials(m), SpherePoint::Finite(z)) => Ok(m.eval_finite(*z)),
            (TestFunction::Monomials(m), SpherePoint::Infinity) if m.is_constant() => Ok(m.eval_finite(Complex64::new(0.0, 0.0))),
            (TestFunction::Closure { f, .. }, SpherePoint::Finite(z)) => Ok(f(*z)),
            _ => Err(Error::EvaluationAtInfinity),
        }
    }
}

/// `α(a) = a ∘ R`.
#[derive(Clone)]
pub struct Pullback<A> {
    pub map: RationalMap,
    pub inner: A,
}

impl<A: Observable> Observable for Pullback<A> {
    fn eval(&self, x: &SpherePoint) -> Result<Complex64> {
        self.inner.eval(&self.map.evaluate(x))
    }
}

/// Pointwise product of two observables.
pub struct Product<A, B>(pub A, pub B);

impl<A: Observable, B: Observable> Observable for Product<A, B> {
    fn eval(&self, x: &SpherePoint) -> Result<Complex64> {
        Ok(self.0.eval(x)? * self.1.eval(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_evaluation() {
        let z = Complex64::new(0.3, 0.4);
        let p = SpherePoint::new(z);
        assert_eq!(TestFunction::monomial(1, 1).eval(&p).unwrap(), z * z.conj());
        assert!((TestFunction::re_z().eval(&p).unwrap() - Complex64::new(0.3, 0.0)).norm() < 1e-16);
        assert_eq!(TestFunction::monomial_family(3).len(), 10);
    }

    #[test]
    fn infinity_is_only_for_constants() {
        assert_eq!(
            TestFunction::constant(2.0).eval(&SpherePoint::Infinity).unwrap(),
            Complex64::new(2.0, 0.0)
        );
        assert!(matches!(
            TestFunction::monomial(1, 0).eval(&SpherePoint::Infinity),
            Err(Error::EvaluationAtInfinity)
        ));
    }

    #[test]
    fn table_refuses_to_extrapolate() {
        let t = TestFunction::Tabulated(Table {
            points: vec![SpherePoint::real(0.0), SpherePoint::real(1.0)],
            values: vec![Complex64::new(5.0, 0.0), Complex64::new(7.0, 0.0)],
            radius: 0.1,
        });
        assert_eq!(t.eval(&SpherePoint::real(0.97)).unwrap(), Complex64::new(7.0, 0.0));
        assert!(matches!(t.eval(&SpherePoint::real(0.5)), Err(Error::OutsideTable { .. })));
    }

    #[test]
    fn table_algebra() {
        let z = MonomialTable::new().with_term(1, 0, Complex64::new(1.0, 0.0));
        let sq = z.mul(&z);
        assert_eq!(sq.terms().collect::<Vec<_>>(), vec![(2, 0, Complex64::new(1.0, 0.0))]);
        let zero = z.add(&z.scale(Complex64::new(-1.0, 0.0)));
        assert_eq!(zero.terms().count(), 0);
        assert_eq!(z.conj().terms().next().unwrap().1, 1);
    }
}
