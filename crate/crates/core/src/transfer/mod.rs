//! Function-level operators: the pullback `α`, the transfer operator `E`,
//! `h = d·E`, the KMS iteration and entropy.

mod function;

pub use function::{FnObservable, MonomialTable, Observable, Product, Pullback, Table, TestFunction};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::WeightedCloud;
use crate::numkernel::SpherePoint;
use crate::ratmap::{Budget, FiberEntry, RationalMap};

/// Node budget for KMS trees: depth 20 must fit for degree 2.
pub const KMS_BUDGET: Budget = Budget {
    max_nodes: 1 << 21,
    max_degree: 256,
};

pub fn alpha<A: Observable>(map: &RationalMap, a: A) -> Pullback<A> {
    Pullback {
        map: map.clone(),
        inner: a,
    }
}

/// `(1/d) Σ_{x ∈ R⁻¹(y)} e(x) a(x)`
pub fn transfer_e(map: &RationalMap, a: &dyn Observable, y: &SpherePoint) -> Result<Complex64> {
    Ok(h_op(map, a, y)? / map.degree() as f64)
}

/// `Σ_{x ∈ R⁻¹(y)} e(x) a(x)`
pub fn h_op(map: &RationalMap, a: &dyn Observable, y: &SpherePoint) -> Result<Complex64> {
    let fiber = map.preimages(y)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for e in &fiber.entries {
        acc += a.eval(&e.point)? * e.index as f64;
    }
    Ok(acc)
}

/// Worst violation over the probes of `E(α(a)b) = a·E(b)`, `E(α(a)) = a`
/// and `E(1) = 1`.
pub fn lemma31_defect(map: &RationalMap, a: &dyn Observable, b: &dyn Observable, probes: &[SpherePoint]) -> Result<f64> {
    let per_probe: Vec<f64> = probes
        .par_iter()
        .map(|y| {
            let fiber = map.preimages(y)?;
            let d = map.degree() as f64;
            let ay = a.eval(y)?;
            let mut lhs = Complex64::new(0.0, 0.0);
            let mut eb = Complex64::new(0.0, 0.0);
            let mut ea = Complex64::new(0.0, 0.0);
            let mut e1 = 0.0;
            for e in &fiber.entries {
                let w = e.index as f64 / d;
                // α(a)(x) = a(R(x)) = a(y) on the fiber, but evaluate it honestly
                let alpha_a = a.eval(&map.evaluate(&e.point))?;
                let bx = b.eval(&e.point)?;
                lhs += alpha_a * bx * w;
                eb += bx * w;
                ea += alpha_a * w;
                e1 += w;
            }
            let scale = 1.0 + ay.norm() * (1.0 + eb.norm());
            Ok([
                (lhs - ay * eb).norm() / scale,
                (ea - ay).norm() / (1.0 + ay.norm()),
                (e1 - 1.0).abs(),
            ]
            .into_iter()
            .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(per_probe.into_iter().fold(0.0, f64::max))
}

/// Values of `(e^{-β}h)^k(a)` on a probe set, `β = log d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub level: u32,
    pub values: Vec<Complex64>,
    /// Larger of the real-part and imaginary-part ranges over the probes.
    pub sup_variation: f64,
}

impl IterationTrace {
    fn new(level: u32, values: Vec<Complex64>) -> Self {
        let range = |f: fn(&Complex64) -> f64| {
            let (lo, hi) = values
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if values.is_empty() {
                0.0
            } else {
                hi - lo
            }
        };
        let sup_variation = range(|c| c.re).max(range(|c| c.im));
        IterationTrace {
            level,
            values,
            sup_variation,
        }
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len().max(1) as f64
    }
}

/// Traces for levels `0..=n`, one trace list per test function. All tests
/// share the per-probe preimage trees. With `stop_below` set, iteration ends
/// after the first level at which every test's variation is below it, and
/// the node budget applies to the deepest level actually built.
pub fn kms_iterate_many(
    map: &RationalMap,
    tests: &[&dyn Observable],
    n: u32,
    probes: &[SpherePoint],
    stop_below: Option<f64>,
    budget: &Budget,
) -> Result<Vec<Vec<IterationTrace>>> {
    if map.degree() < 2 {
        return Err(Error::Precondition("KMS iteration needs degree >= 2".into()));
    }
    let d = map.degree() as f64;
    let mut frontier: Vec<Vec<FiberEntry>> = probes.iter().map(|p| vec![FiberEntry { point: *p, index: 1 }]).collect();
    let mut out: Vec<Vec<IterationTrace>> = vec![Vec::new(); tests.len()];
    for k in 0..=n {
        let values = frontier.iter().map(|level| level_sums(tests, level)).collect::<Result<Vec<_>>>()?;
        if record(&mut out, values, d, k, stop_below) || k == n {
            break;
        }
        // trees are only grown as far as the iteration actually gets
        budget.check_tree(map.degree(), k + 1)?;
        if k + 1 == n {
            // the deepest level is summed on the fly and never stored
            let values = frontier
                .iter()
                .map(|level| child_sums(map, tests, level))
                .collect::<Result<Vec<_>>>()?;
            record(&mut out, values, d, n, stop_below);
            break;
        }
        frontier = frontier.iter().map(|level| expand(map, level)).collect::<Result<_>>()?;
    }
    Ok(out)
}

/// Appends one trace per test from `values[probe][test]`; true once every
/// test is below `stop_below`.
fn record(out: &mut [Vec<IterationTrace>], values: Vec<Vec<Complex64>>, d: f64, k: u32, stop_below: Option<f64>) -> bool {
    let norm = d.powi(k as i32);
    let mut done = true;
    for (t, trace_list) in out.iter_mut().enumerate() {
        let trace = IterationTrace::new(k, values.iter().map(|v| v[t] / norm).collect());
        done &= stop_below.is_some_and(|tol| trace.sup_variation < tol);
        trace_list.push(trace);
    }
    done
}

fn add_into(acc: &mut [Complex64], part: Vec<Complex64>) {
    for (a, s) in acc.iter_mut().zip(part) {
        *a += s;
    }
}

fn weighted_sums(tests: &[&dyn Observable], entries: impl Iterator<Item = FiberEntry>, weight: u64) -> Result<Vec<Complex64>> {
    let mut s = vec![Complex64::new(0.0, 0.0); tests.len()];
    for e in entries {
        let w = (e.index * weight) as f64;
        for (acc, a) in s.iter_mut().zip(tests) {
            *acc += a.eval(&e.point)? * w;
        }
    }
    Ok(s)
}

fn level_sums(tests: &[&dyn Observable], level: &[FiberEntry]) -> Result<Vec<Complex64>> {
    let parts: Vec<Vec<Complex64>> = level
        .par_chunks(4096)
        .map(|chunk| weighted_sums(tests, chunk.iter().copied(), 1))
        .collect::<Result<_>>()?;
    let mut total = vec![Complex64::new(0.0, 0.0); tests.len()];
    for p in parts {
        add_into(&mut total, p);
    }
    Ok(total)
}

/// Sums over the children of `level` without materialising them.
fn child_sums(map: &RationalMap, tests: &[&dyn Observable], level: &[FiberEntry]) -> Result<Vec<Complex64>> {
    let parts: Vec<Vec<Complex64>> = level
        .par_chunks(1024)
        .map(|chunk| {
            let mut s = vec![Complex64::new(0.0, 0.0); tests.len()];
            for parent in chunk {
                let fiber = map.preimages(&parent.point)?;
                add_into(&mut s, weighted_sums(tests, fiber.entries.into_iter(), parent.index)?);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Complex64::new(0.0, 0.0); tests.len()];
    for p in parts {
        add_into(&mut total, p);
    }
    Ok(total)
}

fn expand(map: &RationalMap, level: &[FiberEntry]) -> Result<Vec<FiberEntry>> {
    level
        .par_iter()
        .map(|parent| {
            Ok(map
                .preimages(&parent.point)?
                .entries
                .into_iter()
                .map(|e| FiberEntry {
                    point: e.point,
                    index: e.index * parent.index,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

pub fn kms_iterate(map: &RationalMap, a: &dyn Observable, n: u32, probes: &[SpherePoint], budget: &Budget) -> Result<Vec<IterationTrace>> {
    Ok(kms_iterate_many(map, &[a], n, probes, None, budget)?.pop().unwrap())
}

/// `max_a |∫ e^{-β}h(a) dμ − ∫ a dμ|`; `β` defaults to `log d`.
pub fn kms_defect(map: &RationalMap, cloud: &WeightedCloud, tests: &[&dyn Observable], beta: Option<f64>) -> Result<f64> {
    let d = map.degree() as f64;
    let factor = match beta {
        Some(b) => (-b).exp(),
        None => 1.0 / d,
    };
    let mut worst: f64 = 0.0;
    for a in tests {
        let hs: Vec<Complex64> = cloud
            .atoms
            .par_iter()
            .map(|atom| Ok(h_op(map, *a, &atom.point)? * atom.weight))
            .collect::<Result<_>>()?;
        let lhs: Complex64 = hs.into_iter().sum::<Complex64>() * factor;
        worst = worst.max((lhs - cloud.integrate(*a)?).norm());
    }
    Ok(worst)
}

/// Convergence summary for one test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmsSummary {
    pub test: String,
    pub levels: u32,
    pub sup_variation: f64,
    pub monotone: bool,
    pub limit: Complex64,
    pub reference: Complex64,
    pub limit_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmsReport {
    pub beta: f64,
    pub probes: usize,
    pub max_levels: u32,
    pub outside_hypothesis: bool,
    pub tests: Vec<KmsSummary>,
    pub pass: bool,
}

pub const KMS_VARIATION_TOL: f64 = 1e-6;
pub const KMS_LIMIT_TOL: f64 = 1e-3;
const MONOTONE_SLACK: f64 = 1e-9;

/// Iterates every test until its variation drops below 1e-6 (or
/// `max_levels`), then compares the constant with `∫ a dμ` on `reference`.
/// `monotone` is reported only: on a finite probe set the range need not
/// shrink at every level even though the sup over J does.
pub fn kms_report(
    map: &RationalMap,
    tests: &[TestFunction],
    probes: &[SpherePoint],
    max_levels: u32,
    reference: &WeightedCloud,
    outside_hypothesis: bool,
) -> Result<KmsReport> {
    let refs: Vec<&dyn Observable> = tests.iter().map(|t| t as &dyn Observable).collect();
    let traces = kms_iterate_many(map, &refs, max_levels, probes, Some(KMS_VARIATION_TOL), &KMS_BUDGET)?;
    let mut summaries = Vec::with_capacity(tests.len());
    for (t, trace) in tests.iter().zip(traces) {
        let last = trace.last().expect("level 0 is always present");
        let monotone = trace.windows(2).all(|w| w[1].sup_variation <= w[0].sup_variation + MONOTONE_SLACK);
        let reference = reference.integrate(t)?;
        let limit = last.mean();
        summaries.push(KmsSummary {
            test: t.name(),
            levels: last.level,
            sup_variation: last.sup_variation,
            monotone,
            limit,
            reference,
            limit_gap: (limit - reference).norm(),
        });
    }
    let pass = summaries
        .iter()
        .all(|s| s.sup_variation < KMS_VARIATION_TOL && s.limit_gap < KMS_LIMIT_TOL);
    Ok(KmsReport {
        beta: (map.degree() as f64).ln(),
        probes: probes.len(),
        max_levels,
        outside_hypothesis,
        tests: summaries,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    pub value: f64,
    pub note: String,
}

/// `log d`, the topological entropy. Reported, not estimated.
pub fn entropy(map: &RationalMap) -> Result<Entropy> {
    if map.degree() < 2 {
        return Err(Error::Precondition("entropy is reported for degree >= 2".into()));
    }
    Ok(Entropy {
        value: (map.degree() as f64).ln(),
        note: "theoretical value".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::lyubich_exact;
    use crate::numkernel::Polynomial;

    fn poly(c: &[f64]) -> RationalMap {
        RationalMap::polynomial(Polynomial::from_real(c)).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn alpha_composes() {
        let m = poly(&[-2.0, 0.0, 1.0]);
        let a = alpha(&m, TestFunction::monomial(2, 0));
        let x = Complex64::new(0.3, -0.7);
        let want = (x * x - 2.0) * (x * x - 2.0);
        assert!((a.eval(&SpherePoint::new(x)).unwrap() - want).norm() < 1e-14);
        assert_eq!(alpha(&m, TestFunction::one()).eval(&SpherePoint::Infinity).unwrap(), c(1.0));
    }

    #[test]
    fn transfer_examples() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let one = TestFunction::one();
        assert_eq!(transfer_e(&sq, &one, &SpherePoint::real(0.7)).unwrap(), c(1.0));
        assert!(
            transfer_e(&sq, &TestFunction::monomial(1, 0), &SpherePoint::real(1.0))
                .unwrap()
                .norm()
                < 1e-15
        );
        let m = poly(&[-2.0, 0.0, 1.0]);
        assert_eq!(
            transfer_e(&m, &TestFunction::monomial(2, 0), &SpherePoint::real(-2.0)).unwrap(),
            c(0.0)
        );
        assert_eq!(h_op(&sq, &one, &SpherePoint::real(3.0)).unwrap(), c(2.0));
        let y = Complex64::new(0.4, 0.9);
        let h = h_op(&sq, &TestFunction::monomial(2, 0), &SpherePoint::new(y)).unwrap();
        assert!((h - y * 2.0).norm() < 1e-14);
    }

    #[test]
    fn module_identity() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let probes: Vec<SpherePoint> = (0..100)
            .map(|k| SpherePoint::new(Complex64::from_polar(1.0, k as f64 * 0.0628)))
            .collect();
        let z = TestFunction::monomial(1, 0);
        assert!(lemma31_defect(&sq, &z, &z, &probes).unwrap() < 1e-10);
        let t2 = poly(&[-1.0, 0.0, 2.0]);
        let probes: Vec<SpherePoint> = (0..100).map(|k| SpherePoint::real(-1.0 + k as f64 / 49.5)).collect();
        assert!(lemma31_defect(&t2, &TestFunction::monomial(2, 0), &TestFunction::one(), &probes).unwrap() < 1e-10);
    }

    #[test]
    fn kms_levels() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let probes: Vec<SpherePoint> = (0..8)
            .map(|k| SpherePoint::new(Complex64::from_polar(1.0, 0.3 + k as f64)))
            .collect();
        let traces = kms_iterate(&sq, &TestFunction::monomial(2, 0), 2, &probes, &KMS_BUDGET).unwrap();
        assert_eq!(traces.len(), 3);
        assert!(traces[2].values.iter().all(|v| v.norm() < 1e-14));
        let traces = kms_iterate(&sq, &TestFunction::constant(3.5), 4, &probes, &KMS_BUDGET).unwrap();
        assert!(traces.iter().all(|t| t.sup_variation == 0.0 && (t.mean() - c(3.5)).norm() < 1e-14));
    }

    #[test]
    fn kms_defect_and_beta() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let cloud = lyubich_exact(&sq, &SpherePoint::real(1.0), 10).unwrap();
        let fam = TestFunction::monomial_family(3);
        let tests: Vec<&dyn Observable> = fam.iter().map(|t| t as &dyn Observable).collect();
        assert!(kms_defect(&sq, &cloud, &tests, None).unwrap() < 1e-8);
        let beta = 2f64.ln() + 0.1;
        let one = TestFunction::one();
        let got = kms_defect(&sq, &cloud, &[&one], Some(beta)).unwrap();
        assert!((got - ((-beta).exp() * 2.0 - 1.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_log_degree() {
        assert_eq!(entropy(&poly(&[0.0, 0.0, 1.0])).unwrap().value, 2f64.ln());
        assert_eq!(entropy(&poly(&[0.0, -3.0, 0.0, 4.0])).unwrap().value, 3f64.ln());
    }
}
