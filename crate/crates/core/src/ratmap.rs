//! Rational maps as branched self-coverings of the sphere.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{chordal_distance, roots_with_multiplicity, Polynomial, RootTolerances, SpherePoint};

/// Coefficients below this fraction of the largest one are rounding debris.
const TRIM: f64 = 1e-13;
const CRITICAL_MATCH: f64 = 1e-7;

/// Work limits for tree and composition workloads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Largest admissible `d^n` for a depth-`n` preimage tree.
    pub max_nodes: u64,
    /// Largest admissible degree for a composed map.
    pub max_degree: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: 1_000_000,
            max_degree: 256,
        }
    }
}

impl Budget {
    pub fn check_tree(&self, degree: usize, depth: u32) -> Result<()> {
        let needed = (degree as u64).checked_pow(depth).unwrap_or(u64::MAX);
        if needed > self.max_nodes {
            return Err(Error::BudgetExceeded {
                what: "preimage tree nodes",
                needed,
                limit: self.max_nodes,
            });
        }
        Ok(())
    }
}

/// A critical point with its branch index and critical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalDatum {
    pub point: SpherePoint,
    pub branch_index: usize,
    pub critical_value: SpherePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberEntry {
    pub point: SpherePoint,
    /// Local degree of `R^depth` at `point`.
    pub index: u64,
}

/// The preimage set `R^{-depth}(base)` with branch multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub base: SpherePoint,
    pub depth: u32,
    pub entries: Vec<FiberEntry>,
}

impl Fiber {
    /// `Σ index`, which equals `d^depth`.
    pub fn total_index(&self) -> u64 {
        self.entries.iter().map(|e| e.index).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = &SpherePoint> {
        self.entries.iter().map(|e| &e.point)
    }

    /// Entry closest to `x` in the chordal metric.
    pub fn nearest(&self, x: &SpherePoint) -> Option<(&FiberEntry, f64)> {
        self.entries
            .iter()
            .map(|e| (e, chordal_distance(&e.point, x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// `R = P/Q` with `P`, `Q` coprime and `d = max(deg P, deg Q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalMap {
    num: Polynomial,
    den: Polynomial,
    degree: usize,
    roots: RootTolerances,
}

impl RationalMap {
    /// Checked constructor: rejects a zero denominator, constant maps and
    /// numerator/denominator pairs with a common root.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidMap("zero denominator".into()));
        }
        let map = Self::from_parts(num, den);
        if map.degree == 0 {
            return Err(Error::InvalidMap("constant map".into()));
        }
        map.check_coprime()?;
        Ok(map)
    }

    /// The polynomial map `z ↦ p(z)`.
    pub fn polynomial(p: Polynomial) -> Result<Self> {
        Self::new(p, Polynomial::one())
    }

    /// Unchecked constructor for maps known to be coprime (compositions of
    /// coprime maps, registry entries).
    pub(crate) fn from_parts(num: Polynomial, den: Polynomial) -> Self {
        let degree = num.degree().max(den.degree());
        RationalMap {
            num,
            den,
            degree,
            roots: RootTolerances::default(),
        }
    }

    pub fn with_root_tolerances(mut self, tol: RootTolerances) -> Self {
        self.roots = tol;
        self
    }

    fn check_coprime(&self) -> Result<()> {
        if self.den.degree() == 0 || self.num.is_zero() || self.num.degree() == 0 {
            return Ok(());
        }
        let rs = roots_with_multiplicity(&self.den, &self.roots)?;
        for r in &rs.entries {
            let scale = self.num.eval_abs(r.value.norm());
            if self.num.eval(r.value).norm() <= 1e-8 * scale {
                return Err(Error::CommonFactor {
                    near: SpherePoint::new(r.value).to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn root_tolerances(&self) -> &RootTolerances {
        &self.roots
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.degree() == 0
    }

    fn require_dynamic(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(Error::Precondition(format!(
                "dynamical operation needs degree >= 2, map has degree {}",
                self.degree
            )));
        }
        Ok(())
    }

    /// `R(p)`, total on the sphere. Uses the `w = 1/z` chart for `|z| > 1`.
    pub fn evaluate(&self, p: &SpherePoint) -> SpherePoint {
        let d = self.degree;
        match p {
            SpherePoint::Infinity => {
                let a = self.num.coeff(d);
                let b = self.den.coeff(d);
                SpherePoint::from_ratio(a, b)
            }
            SpherePoint::Finite(z) if z.norm_sqr() <= 1.0 => SpherePoint::from_ratio(self.num.eval(*z), self.den.eval(*z)),
            SpherePoint::Finite(z) => {
                // homogeneous coordinates [1 : u], u = 1/z
                let u = z.inv();
                let hom = |p: &Polynomial| (0..=d).rev().fold(Complex64::new(0.0, 0.0), |acc, j| acc * u + p.coeff(d - j));
                // Σ_j c_j u^{d-j}: Horner over j = 0..=d with coefficient c_j at power d-j
                let a = hom(&self.num);
                let b = hom(&self.den);
                SpherePoint::from_ratio(a, b)
            }
        }
    }

    /// `R'(z)` at a finite point.
    pub fn derivative_at(&self, z: Complex64) -> Complex64 {
        let q = self.den.eval(z);
        (self.num.derivative().eval(z) * q - self.num.eval(z) * self.den.derivative().eval(z)) / (q * q)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &RationalMap) -> Result<RationalMap> {
        self.compose_with_budget(inner, &Budget::default())
    }

    pub fn compose_with_budget(&self, inner: &RationalMap, budget: &Budget) -> Result<RationalMap> {
        let d = self.degree;
        let degree = d * inner.degree;
        if degree > budget.max_degree {
            return Err(Error::BudgetExceeded {
                what: "composed map degree",
                needed: degree as u64,
                limit: budget.max_degree as u64,
            });
        }
        let mut upow = vec![Polynomial::one()];
        let mut vpow = vec![Polynomial::one()];
        for k in 1..=d {
            upow.push(&upow[k - 1] * &inner.num);
            vpow.push(&vpow[k - 1] * &inner.den);
        }
        let mut num = Polynomial::zero();
        let mut den = Polynomial::zero();
        for j in 0..=d {
            let term = &upow[j] * &vpow[d - j];
            num = &num + &term.scale(self.num.coeff(j));
            den = &den + &term.scale(self.den.coeff(j));
        }
        let mut out = RationalMap::from_parts(num.trimmed(TRIM), den.trimmed(TRIM));
        out.roots = self.roots;
        Ok(out)
    }

    /// `R^n`; `n = 0` gives the identity.
    pub fn iterate(&self, n: u32) -> Result<RationalMap> {
        self.iterate_with_budget(n, &Budget::default())
    }

    pub fn iterate_with_budget(&self, n: u32, budget: &Budget) -> Result<RationalMap> {
        let mut out = RationalMap::from_parts(Polynomial::z(), Polynomial::one());
        out.roots = self.roots;
        for _ in 0..n {
            out = self.compose_with_budget(&out, budget)?;
        }
        Ok(out)
    }

    /// Finite critical points are roots of `P'Q − PQ'` with `e = mult + 1`;
    /// infinity is examined through `σ∘R∘σ`, `σ(z) = 1/z`.
    pub fn critical_points(&self) -> Result<Vec<CriticalDatum>> {
        self.require_dynamic()?;
        let wronskian = (&(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative())).trimmed(TRIM);
        let mut out = Vec::new();
        if !wronskian.is_zero() {
            for r in roots_with_multiplicity(&wronskian, &self.roots)?.entries {
                let point = SpherePoint::new(r.value);
                out.push(CriticalDatum {
                    point,
                    branch_index: r.multiplicity + 1,
                    critical_value: self.evaluate(&point),
                });
            }
        }
        let e_inf = self.local_degree_at_infinity();
        if e_inf >= 2 {
            out.push(CriticalDatum {
                point: SpherePoint::Infinity,
                branch_index: e_inf,
                critical_value: self.evaluate(&SpherePoint::Infinity),
            });
        }
        Ok(out)
    }

    /// Local degree at infinity from the order of vanishing of the
    /// Wronskian of the conjugated map at `u = 0`.
    fn local_degree_at_infinity(&self) -> usize {
        let d = self.degree;
        let p = self.num.reversed(d);
        let q = self.den.reversed(d);
        // σ∘R∘σ = q/p
        let w = &(&q.derivative() * &p) - &(&q * &p.derivative());
        let scale = w.max_abs_coeff();
        let order = w.coeffs().iter().take_while(|c| c.norm() <= TRIM * scale).count();
        order + 1
    }

    /// Depth-one fiber over `w`. Finite preimages are roots of `P − wQ`
    /// (of `Q − w⁻¹P` when `|w| > 1`); infinity carries whatever degree the
    /// equation loses.
    pub fn preimages(&self, w: &SpherePoint) -> Result<Fiber> {
        let d = self.degree;
        let equation = match w {
            SpherePoint::Finite(z) if z.norm_sqr() <= 1.0 => fiber_equation(&self.num, &self.den, *z),
            SpherePoint::Finite(z) => fiber_equation(&self.den, &self.num, z.inv()),
            SpherePoint::Infinity => self.den.clone(),
        };
        let mut entries = Vec::with_capacity(d);
        if !equation.is_zero() {
            for r in roots_with_multiplicity(&equation, &self.roots)?.entries {
                entries.push(FiberEntry {
                    point: SpherePoint::new(r.value),
                    index: r.multiplicity as u64,
                });
            }
        }
        let finite_total = if equation.is_zero() { 0 } else { equation.degree() };
        if finite_total < d {
            entries.push(FiberEntry {
                point: SpherePoint::Infinity,
                index: (d - finite_total) as u64,
            });
        }
        Ok(Fiber {
            base: *w,
            depth: 1,
            entries,
        })
    }

    /// Local degree at `x`: the index of a critical point within
    /// `CRITICAL_MATCH` (chordal) of `x`, otherwise 1. Matching against the
    /// critical set keeps the answer stable for points that are critical
    /// only up to round-off, where the fiber over `R(x)` has already split.
    pub fn branch_index(&self, x: &SpherePoint) -> Result<u64> {
        if self.degree < 2 {
            return Ok(1);
        }
        Ok(self
            .critical_points()?
            .iter()
            .filter(|c| chordal_distance(&c.point, x) <= CRITICAL_MATCH)
            .map(|c| c.branch_index as u64)
            .max()
            .unwrap_or(1))
    }

    /// Levels `0..=depth` of the preimage tree over `y`. Level `k` lists
    /// `R^{-k}(y)` with indices multiplied along each branch; children of a
    /// node keep the fiber's lexicographic order, so the leaf order is the
    /// depth-first order regardless of how the work is scheduled.
    pub fn preimage_levels(&self, y: &SpherePoint, depth: u32, budget: &Budget) -> Result<Vec<Fiber>> {
        self.require_dynamic()?;
        budget.check_tree(self.degree, depth)?;
        let mut levels = vec![Fiber {
            base: *y,
            depth: 0,
            entries: vec![FiberEntry { point: *y, index: 1 }],
        }];
        for k in 1..=depth {
            let prev = &levels[(k - 1) as usize].entries;
            let children: Vec<Vec<FiberEntry>> = prev
                .par_iter()
                .map(|parent| {
                    let fiber = self.preimages(&parent.point)?;
                    Ok(fiber
                        .entries
                        .into_iter()
                        .map(|e| FiberEntry {
                            point: e.point,
                            index: e.index * parent.index,
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            levels.push(Fiber {
                base: *y,
                depth: k,
                entries: children.into_iter().flatten().collect(),
            });
        }
        Ok(levels)
    }

    /// `R^{-n}(y)` with `e_{R^n}` from the chain rule.
    pub fn preimage_tree(&self, y: &SpherePoint, n: u32) -> Result<Fiber> {
        self.preimage_tree_with_budget(y, n, &Budget::default())
    }

    pub fn preimage_tree_with_budget(&self, y: &SpherePoint, n: u32, budget: &Budget) -> Result<Fiber> {
        Ok(self.preimage_levels(y, n, budget)?.pop().expect("level 0 always present"))
    }

    /// Finite fixed points with their multipliers `R'(z)`.
    pub fn fixed_points(&self) -> Result<Vec<(Complex64, Complex64)>> {
        let eq = (&self.num - &(&Polynomial::z() * &self.den)).trimmed(TRIM);
        if eq.is_zero() {
            return Err(Error::Precondition("identity map has no isolated fixed points".into()));
        }
        Ok(roots_with_multiplicity(&eq, &self.roots)?
            .entries
            .into_iter()
            .map(|r| (r.value, self.derivative_at(r.value)))
            .collect())
    }
}

/// `a − t·b`, dropping top coefficients only when they are cancellation
/// debris relative to the two terms that formed them. A small but exact
/// leading coefficient (huge `1/t`) is kept, so far-out preimages stay finite.
fn fiber_equation(a: &Polynomial, b: &Polynomial, t: Complex64) -> Polynomial {
    let n = a.coeffs().len().max(b.coeffs().len());
    let mut coeffs: Vec<Complex64> = (0..n).map(|k| a.coeff(k) - t * b.coeff(k)).collect();
    while let Some(k) = coeffs.len().checked_sub(1) {
        let formed = a.coeff(k).norm() + (t * b.coeff(k)).norm();
        if coeffs[k].norm() <= TRIM * formed {
            coeffs.pop();
        } else {
            break;
        }
    }
    Polynomial::new(coeffs)
}

impl fmt::Display for RationalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_polynomial() && self.den.coeff(0) == Complex64::new(1.0, 0.0) {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[f64]) -> Polynomial {
        Polynomial::from_real(c)
    }

    #[test]
    fn far_fibers_stay_finite() {
        let t3 = RationalMap::polynomial(poly(&[0.0, -3.0, 0.0, 4.0])).unwrap();
        let x = SpherePoint::new(Complex64::new(-13.88, 23.95));
        let w = t3.evaluate(&t3.evaluate(&x));
        let fiber = t3.preimages(&w).unwrap();
        assert_eq!(fiber.entries.len(), 3);
        assert!(fiber.entries.iter().all(|e| e.index == 1 && !e.point.is_infinite()));
        assert_eq!(t3.iterate(2).unwrap().branch_index(&x).unwrap(), 1);
        // a map with R(∞) = 1: the top coefficient cancels exactly
        let m = RationalMap::new(poly(&[0.0, 0.0, 1.0]), poly(&[1.0, 0.0, 1.0])).unwrap();
        let fiber = m.preimages(&SpherePoint::real(1.0)).unwrap();
        assert_eq!(fiber.total_index(), 2);
        assert!(fiber.entries.iter().any(|e| e.point.is_infinite() && e.index == 2));
    }

    fn z2() -> RationalMap {
        RationalMap::polynomial(poly(&[0.0, 0.0, 1.0])).unwrap()
    }

    fn z2m2() -> RationalMap {
        RationalMap::polynomial(poly(&[-2.0, 0.0, 1.0])).unwrap()
    }

    fn full_shift() -> RationalMap {
        RationalMap::new(poly(&[-1.0, 0.0, 2.0]), poly(&[0.0, 1.0])).unwrap()
    }

    fn p(x: f64, y: f64) -> SpherePoint {
        SpherePoint::from_parts(x, y)
    }

    #[test]
    fn evaluation_at_special_points() {
        assert!(z2m2().evaluate(&SpherePoint::Infinity).is_infinite());
        assert!(full_shift().evaluate(&p(0.0, 0.0)).is_infinite());
        assert!(full_shift().evaluate(&SpherePoint::Infinity).is_infinite());
        let m = RationalMap::new(poly(&[1.0, 3.0]), poly(&[2.0, 0.0, 1.0])).unwrap();
        assert_eq!(m.evaluate(&SpherePoint::Infinity), p(0.0, 0.0));
        let m = RationalMap::new(poly(&[1.0, 0.0, 6.0]), poly(&[2.0, 0.0, 3.0])).unwrap();
        assert_eq!(m.evaluate(&SpherePoint::Infinity), p(2.0, 0.0));
    }

    #[test]
    fn large_arguments_use_the_inverse_chart() {
        let m = full_shift();
        let z = Complex64::new(3e5, -2e5);
        let expect = (z * z * 2.0 - 1.0) / z;
        let got = m.evaluate(&SpherePoint::new(z)).finite().unwrap();
        assert!((got - expect).norm() / expect.norm() < 1e-14);
    }

    #[test]
    fn common_factor_is_rejected() {
        // (z^2 - 1)/(z - 1)
        let err = RationalMap::new(poly(&[-1.0, 0.0, 1.0]), poly(&[-1.0, 1.0]));
        assert!(matches!(err, Err(Error::CommonFactor { .. })));
        assert!(matches!(RationalMap::new(poly(&[1.0]), poly(&[2.0])), Err(Error::InvalidMap(_))));
    }

    #[test]
    fn critical_points_of_quadratics() {
        for m in [z2(), z2m2()] {
            let cps = m.critical_points().unwrap();
            assert_eq!(cps.len(), 2);
            assert_eq!(cps[0].point, p(0.0, 0.0));
            assert_eq!(cps[0].branch_index, 2);
            assert!(cps[1].point.is_infinite());
            assert_eq!(cps[1].branch_index, 2);
        }
    }

    #[test]
    fn fibers() {
        let f = z2().preimages(&p(1.0, 0.0)).unwrap();
        assert_eq!(f.entries.len(), 2);
        assert!(chordal_distance(&f.entries[0].point, &p(-1.0, 0.0)) < 1e-15);
        assert!(chordal_distance(&f.entries[1].point, &p(1.0, 0.0)) < 1e-15);

        let f = z2m2().preimages(&p(-2.0, 0.0)).unwrap();
        assert_eq!(
            f.entries,
            vec![FiberEntry {
                point: p(0.0, 0.0),
                index: 2
            }]
        );

        let f = z2().preimages(&SpherePoint::Infinity).unwrap();
        assert_eq!(
            f.entries,
            vec![FiberEntry {
                point: SpherePoint::Infinity,
                index: 2
            }]
        );
    }

    #[test]
    fn infinity_in_fiber_over_the_value_at_infinity() {
        // R(z) = (z^2+1)/(z^2-4): R(∞) = 1, so the fiber over 1 is {∞ (1), 0 root...}
        let m = RationalMap::new(poly(&[1.0, 0.0, 1.0]), poly(&[-4.0, 0.0, 1.0])).unwrap();
        let f = m.preimages(&p(1.0, 0.0)).unwrap();
        assert_eq!(f.total_index(), 2);
        // P - Q = 5 is constant: both preimages collapse to ∞ with index 2
        assert_eq!(
            f.entries,
            vec![FiberEntry {
                point: SpherePoint::Infinity,
                index: 2
            }]
        );
    }

    #[test]
    fn branch_indices_and_chain_rule() {
        assert_eq!(z2().branch_index(&p(0.0, 0.0)).unwrap(), 2);
        assert_eq!(z2().branch_index(&p(1.0, 0.0)).unwrap(), 1);
        let z4 = z2().iterate(2).unwrap();
        assert_eq!(z4.branch_index(&p(0.0, 0.0)).unwrap(), 4);
    }

    #[test]
    fn trees() {
        let t = z2().preimage_tree(&p(1.0, 0.0), 3).unwrap();
        assert_eq!(t.entries.len(), 8);
        assert!(t.entries.iter().all(|e| e.index == 1));
        for e in &t.entries {
            assert!((e.point.finite().unwrap().norm() - 1.0).abs() < 1e-14);
        }
        let t = z2().preimage_tree(&p(0.0, 0.0), 2).unwrap();
        assert_eq!(
            t.entries,
            vec![FiberEntry {
                point: p(0.0, 0.0),
                index: 4
            }]
        );
    }

    #[test]
    fn tree_budget() {
        let b = Budget {
            max_nodes: 100,
            ..Budget::default()
        };
        let err = z2().preimage_levels(&p(1.0, 0.0), 7, &b);
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn iterates_and_compositions() {
        assert_eq!(z2().iterate(2).unwrap().numerator(), &poly(&[0.0, 0.0, 0.0, 0.0, 1.0]));
        assert_eq!(z2m2().iterate(2).unwrap().numerator(), &poly(&[2.0, 0.0, -4.0, 0.0, 1.0]));
        let c = z2().compose(&z2m2()).unwrap();
        assert_eq!(c.numerator(), &poly(&[4.0, 0.0, -4.0, 0.0, 1.0]));
        let big = Budget {
            max_degree: 8,
            ..Budget::default()
        };
        assert!(matches!(z2().iterate_with_budget(4, &big), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn lattes_has_six_critical_points() {
        let sq = poly(&[1.0, 0.0, 1.0]);
        let m = RationalMap::new(&sq * &sq, poly(&[0.0, -4.0, 0.0, 4.0])).unwrap();
        let cps = m.critical_points().unwrap();
        let total: usize = cps.iter().map(|c| c.branch_index - 1).sum();
        assert_eq!(total, 6);
        assert_eq!(cps.len(), 6);
    }
}
