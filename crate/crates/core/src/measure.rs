//! Pullback approximations of the measure of maximal entropy.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::julia::{backward_step, stream_rng, DEFAULT_BURN_IN};
use crate::numkernel::{PointIndex, SpherePoint};
use crate::ratmap::{Budget, RationalMap};
use crate::transfer::Observable;

/// Chordal radius within which pushed-forward atoms are identified.
pub const PUSHFORWARD_MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    ExactTree {
        base: SpherePoint,
        depth: u32,
    },
    MonteCarlo {
        base: SpherePoint,
        depth: u32,
        samples: usize,
        seed: u64,
    },
    /// Read back from a file or built by hand.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: SpherePoint,
    pub weight: f64,
}

/// Weights as `numerator / denominator` with integer bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerWeights {
    pub numerators: Vec<u64>,
    pub denominator: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCloud {
    pub atoms: Vec<Atom>,
    pub provenance: Provenance,
    /// Present for tree and Monte-Carlo clouds.
    pub exact: Option<IntegerWeights>,
}

impl WeightedCloud {
    pub fn from_integer(points: Vec<SpherePoint>, numerators: Vec<u64>, denominator: u64, provenance: Provenance) -> Self {
        let atoms = points
            .iter()
            .zip(&numerators)
            .map(|(p, &n)| Atom {
                point: *p,
                weight: n as f64 / denominator as f64,
            })
            .collect();
        WeightedCloud {
            atoms,
            provenance,
            exact: Some(IntegerWeights { numerators, denominator }),
        }
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        WeightedCloud {
            atoms,
            provenance: Provenance::External,
            exact: None,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn points(&self) -> Vec<SpherePoint> {
        self.atoms.iter().map(|a| a.point).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Σ weight·a(atom), summed in atom order.
    pub fn integrate(&self, a: &dyn Observable) -> Result<Complex64> {
        let values: Vec<Complex64> = self
            .atoms
            .par_iter()
            .map(|atom| Ok(a.eval(&atom.point)? * atom.weight))
            .collect::<Result<_>>()?;
        Ok(values.into_iter().sum())
    }
}

/// `μ_n^y`: the depth-`n` tree over `y` with weights `e_{R^n}(x) / d^n`.
pub fn lyubich_exact(map: &RationalMap, y: &SpherePoint, n: u32) -> Result<WeightedCloud> {
    lyubich_exact_with_budget(map, y, n, &Budget::default())
}

pub fn lyubich_exact_with_budget(map: &RationalMap, y: &SpherePoint, n: u32, budget: &Budget) -> Result<WeightedCloud> {
    let fiber = map.preimage_tree_with_budget(y, n, budget)?;
    Ok(exact_from_fiber(map, fiber.entries.iter().map(|e| (e.point, e.index)), *y, n))
}

fn exact_from_fiber(map: &RationalMap, entries: impl Iterator<Item = (SpherePoint, u64)>, y: SpherePoint, n: u32) -> WeightedCloud {
    let (points, nums): (Vec<_>, Vec<_>) = entries.unzip();
    WeightedCloud::from_integer(
        points,
        nums,
        (map.degree() as u64).pow(n),
        Provenance::ExactTree { base: y, depth: n },
    )
}

/// Endpoints of `samples` independent backward walks of length `depth`;
/// walk `i` draws from stream `i` of `seed`.
pub fn lyubich_mc(map: &RationalMap, y: &SpherePoint, depth: u32, samples: usize, seed: u64) -> Result<WeightedCloud> {
    if depth < DEFAULT_BURN_IN {
        return Err(Error::Precondition(format!(
            "walk depth {depth} is below the burn-in of {DEFAULT_BURN_IN} levels"
        )));
    }
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let points: Vec<SpherePoint> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut x = *y;
            for _ in 0..depth {
                x = backward_step(map, &x, &mut rng)?;
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;
    let provenance = Provenance::MonteCarlo {
        base: *y,
        depth,
        samples,
        seed,
    };
    Ok(WeightedCloud::from_integer(points, vec![1; samples], samples as u64, provenance))
}

/// Image measure `R_*μ`, merging atoms that land within the match tolerance.
pub fn pushforward(map: &RationalMap, cloud: &WeightedCloud) -> WeightedCloud {
    let images: Vec<SpherePoint> = cloud.atoms.par_iter().map(|a| map.evaluate(&a.point)).collect();
    let mut reps: Vec<SpherePoint> = Vec::new();
    let mut slot = Vec::with_capacity(images.len());
    // greedy clustering; the index is rebuilt only when a new atom appears
    // far from every existing one, which is rare after the first pass
    let mut index = PointIndex::new(&reps);
    let mut pending: Vec<SpherePoint> = Vec::new();
    for p in &images {
        let hit = index
            .nearest(p)
            .filter(|(_, d)| *d <= PUSHFORWARD_MATCH_TOL)
            .map(|(i, _)| i)
            .or_else(|| {
                pending
                    .iter()
                    .position(|q| crate::numkernel::chordal_distance(p, q) <= PUSHFORWARD_MATCH_TOL)
                    .map(|j| reps.len() + j)
            });
        match hit {
            Some(i) => slot.push(i),
            None => {
                slot.push(reps.len() + pending.len());
                pending.push(*p);
                if pending.len() >= 64 {
                    reps.append(&mut pending);
                    index = PointIndex::new(&reps);
                }
            }
        }
    }
    reps.append(&mut pending);

    let provenance = match cloud.provenance {
        Provenance::ExactTree { base, depth } if depth > 0 => Provenance::ExactTree { base, depth: depth - 1 },
        _ => Provenance::External,
    };
    match &cloud.exact {
        Some(w) => {
            let mut nums = vec![0u64; reps.len()];
            for (i, &s) in slot.iter().enumerate() {
                nums[s] += w.numerators[i];
            }
            let mut out = WeightedCloud::from_integer(reps, nums, w.denominator, provenance);
            if let Provenance::ExactTree { .. } = provenance {
                reduce(&mut out, map.degree() as u64);
            }
            out
        }
        None => {
            let mut weights = vec![0.0; reps.len()];
            for (i, &s) in slot.iter().enumerate() {
                weights[s] += cloud.atoms[i].weight;
            }
            WeightedCloud::from_atoms(
                reps.into_iter()
                    .zip(weights)
                    .map(|(point, weight)| Atom { point, weight })
                    .collect(),
            )
        }
    }
}

/// Divide integer weights by `d` when every numerator allows it.
fn reduce(cloud: &mut WeightedCloud, d: u64) {
    if let Some(w) = &mut cloud.exact {
        if w.denominator % d == 0 && w.numerators.iter().all(|n| n % d == 0) {
            w.denominator /= d;
            for n in &mut w.numerators {
                *n /= d;
            }
        }
    }
}

/// Outcome of comparing `R_*μ_n^y` with `μ_{n-1}^y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardCheck {
    pub depth: u32,
    /// Integer weights agree atom-for-atom.
    pub exact: bool,
    pub atoms: usize,
    /// Largest chordal distance between a pushed atom and its match.
    pub max_match_distance: f64,
}

/// Push every depth-`n` atom forward, match it to its parent level and
/// compare the aggregated integer indices with `d` times the parent index.
pub fn pushforward_identity(map: &RationalMap, y: &SpherePoint, n: u32) -> Result<PushforwardCheck> {
    if n == 0 {
        return Err(Error::Precondition("pushforward identity needs depth >= 1".into()));
    }
    let levels = map.preimage_levels(y, n, &Budget::default())?;
    let parent = &levels[(n - 1) as usize];
    let child = &levels[n as usize];
    let parent_points: Vec<SpherePoint> = parent.points().copied().collect();
    let index = PointIndex::new(&parent_points);
    let matches: Vec<(usize, f64)> = child
        .entries
        .par_iter()
        .map(|e| index.nearest(&map.evaluate(&e.point)).expect("parent level is nonempty"))
        .collect();
    let mut sums = vec![0u64; parent.entries.len()];
    let mut max_match_distance: f64 = 0.0;
    for (e, (i, dist)) in child.entries.iter().zip(&matches) {
        sums[*i] += e.index;
        max_match_distance = max_match_distance.max(*dist);
    }
    let d = map.degree() as u64;
    let exact = parent.entries.iter().zip(&sums).all(|(p, s)| *s == d * p.index);
    Ok(PushforwardCheck {
        depth: n,
        exact,
        atoms: child.entries.len(),
        max_match_distance,
    })
}

/// `max_a |∫ a∘R dμ − ∫ a dμ|`.
pub fn invariance_defect(map: &RationalMap, cloud: &WeightedCloud, tests: &[&dyn Observable]) -> Result<f64> {
    let images = WeightedCloud {
        atoms: cloud
            .atoms
            .par_iter()
            .map(|a| Atom {
                point: map.evaluate(&a.point),
                weight: a.weight,
            })
            .collect(),
        provenance: Provenance::External,
        exact: None,
    };
    let mut worst: f64 = 0.0;
    for a in tests {
        worst = worst.max((images.integrate(*a)? - cloud.integrate(*a)?).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub k: u32,
    pub test: String,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// `|∫a dμ_k^y − ∫a dμ_{k+1}^y|` for `k < n`, test-major within each level.
    pub level_gaps: Vec<GapRecord>,
    /// `|∫a dμ_n^{y₁} − ∫a dμ_n^{y₂}|`, one record per test with `k = n`.
    pub cross_gaps: Vec<GapRecord>,
}

/// Level-to-level and cross-basepoint gaps of the pullback integrals.
pub fn convergence_diagnostic(
    map: &RationalMap,
    y: &SpherePoint,
    n: u32,
    tests: &[(String, &dyn Observable)],
    second_base: Option<&SpherePoint>,
) -> Result<Diagnostic> {
    let mut out = Diagnostic {
        level_gaps: Vec::new(),
        cross_gaps: Vec::new(),
    };
    if n == 0 {
        return Ok(out);
    }
    let integrals = level_integrals(map, y, n, tests)?;
    for k in 0..n as usize {
        for (t, (name, _)) in tests.iter().enumerate() {
            out.level_gaps.push(GapRecord {
                k: k as u32,
                test: name.clone(),
                gap: (integrals[k][t] - integrals[k + 1][t]).norm(),
            });
        }
    }
    if let Some(y2) = second_base {
        let other = lyubich_exact(map, y2, n)?;
        for (t, (name, a)) in tests.iter().enumerate() {
            out.cross_gaps.push(GapRecord {
                k: n,
                test: name.clone(),
                gap: (integrals[n as usize][t] - other.integrate(*a)?).norm(),
            });
        }
    }
    Ok(out)
}

/// `∫ a dμ_k^y` for every level `k ≤ n` and every test.
pub fn level_integrals(map: &RationalMap, y: &SpherePoint, n: u32, tests: &[(String, &dyn Observable)]) -> Result<Vec<Vec<Complex64>>> {
    let levels = map.preimage_levels(y, n, &Budget::default())?;
    levels
        .into_iter()
        .map(|fiber| {
            let depth = fiber.depth;
            let cloud = exact_from_fiber(map, fiber.entries.into_iter().map(|e| (e.point, e.index)), *y, depth);
            tests.iter().map(|(_, a)| cloud.integrate(*a)).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Polynomial;
    use crate::transfer::TestFunction;

    fn poly(c: &[f64]) -> RationalMap {
        RationalMap::polynomial(Polynomial::from_real(c)).unwrap()
    }

    #[test]
    fn exact_tree_atoms() {
        let cloud = lyubich_exact(&poly(&[0.0, 0.0, 1.0]), &SpherePoint::real(1.0), 3).unwrap();
        assert_eq!(cloud.len(), 8);
        assert!(cloud.atoms.iter().all(|a| a.weight == 0.125));
        assert_eq!(cloud.exact.as_ref().unwrap().numerators.iter().sum::<u64>(), 8);

        let cloud = lyubich_exact(&poly(&[-2.0, 0.0, 1.0]), &SpherePoint::real(-2.0), 1).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.atoms[0].weight, 1.0);

        let cloud = lyubich_exact(&poly(&[0.0, 0.0, 1.0]), &SpherePoint::ZERO, 2).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.atoms[0].weight, 1.0);
    }

    #[test]
    fn root_of_unity_symmetry() {
        let cloud = lyubich_exact(&poly(&[0.0, 0.0, 1.0]), &SpherePoint::real(1.0), 5).unwrap();
        let m = cloud.integrate(&TestFunction::monomial(1, 0)).unwrap();
        assert!(m.norm() < 1e-15);
        assert!((cloud.integrate(&TestFunction::one()).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn mc_requires_burn_in() {
        let m = poly(&[0.0, 0.0, 1.0]);
        assert!(matches!(
            lyubich_mc(&m, &SpherePoint::real(0.5), 5, 10, 0),
            Err(Error::Precondition(_))
        ));
        let cloud = lyubich_mc(&m, &SpherePoint::real(0.5), 20, 2000, 0).unwrap();
        assert_eq!(cloud.len(), 2000);
        assert!(cloud.integrate(&TestFunction::monomial(1, 0)).unwrap().norm() < 3.0 / 2000f64.sqrt());
    }

    #[test]
    fn pushforward_drops_one_level() {
        let m = poly(&[0.2, 0.0, 1.0]);
        let y = SpherePoint::real(0.1);
        let check = pushforward_identity(&m, &y, 6).unwrap();
        assert!(check.exact);
        assert!(check.max_match_distance < 1e-9);
        let pushed = pushforward(&m, &lyubich_exact(&m, &y, 6).unwrap());
        let direct = lyubich_exact(&m, &y, 5).unwrap();
        assert_eq!(pushed.len(), direct.len());
        assert_eq!(pushed.exact.as_ref().unwrap().denominator, 32);
    }

    #[test]
    fn diagnostics() {
        let m = poly(&[0.0, 0.0, 1.0]);
        let z = TestFunction::monomial(1, 0);
        let tests: Vec<(String, &dyn Observable)> = vec![("z".into(), &z)];
        let diag = convergence_diagnostic(&m, &SpherePoint::real(1.0), 6, &tests, None).unwrap();
        assert_eq!(diag.level_gaps.len(), 6);
        // level 0 is the base point itself, every deeper level averages to 0
        assert!(diag.level_gaps[1..].iter().all(|g| g.gap < 1e-15));
        assert!(convergence_diagnostic(&m, &SpherePoint::real(1.0), 0, &tests, None)
            .unwrap()
            .level_gaps
            .is_empty());
    }
}
