//! Functions on the graph of `Rⁿ` restricted to the Julia set, their
//! branch-index-weighted inner products, frames and the positivity witnesses.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::julia::{critical_points_in_julia, JuliaCloud, DEFAULT_CRITICAL_TOL};
use crate::numkernel::{chordal_distance, PointIndex, SpherePoint};
use crate::ratmap::{Budget, Fiber, RationalMap};
use crate::transfer::{FnObservable, Observable, TestFunction};

/// A function of `(x, Rⁿ(x))`, stored as a product of observables each
/// evaluated at `R^shift(x)`; `shift == arity` is the second coordinate.
#[derive(Clone)]
pub struct GraphFunction {
    arity: u32,
    factors: Vec<(u32, Arc<dyn Observable>)>,
    name: String,
}

impl std::fmt::Debug for GraphFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GraphFunction(n={}, {})", self.arity, self.name)
    }
}

impl GraphFunction {
    pub fn new(arity: u32, body: impl Observable + 'static, name: impl Into<String>) -> Self {
        assert!(arity >= 1, "graph functions have arity at least 1");
        GraphFunction {
            arity,
            factors: vec![(0, Arc::new(body))],
            name: name.into(),
        }
    }

    pub fn from_test(arity: u32, t: TestFunction) -> Self {
        let name = t.name();
        Self::new(arity, t, name)
    }

    pub fn constant(arity: u32, c: f64) -> Self {
        Self::from_test(arity, TestFunction::constant(c))
    }

    /// `ξ₀ = 1/√d`.
    pub fn xi0(map: &RationalMap) -> Self {
        Self::new(1, TestFunction::constant(1.0 / (map.degree() as f64).sqrt()), "xi0")
    }

    /// Multiply by `obs(R^shift(x))`.
    pub fn with_factor(mut self, shift: u32, obs: Arc<dyn Observable>) -> Self {
        assert!(shift <= self.arity);
        self.factors.push((shift, obs));
        self
    }

    /// Right module action: multiply by `b(y)`.
    pub fn with_right(self, b: Arc<dyn Observable>) -> Self {
        let n = self.arity;
        self.with_factor(n, b)
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Value at `(x, y)` with `y = Rⁿ(x)` supplied by the caller.
    pub fn eval_at(&self, map: &RationalMap, x: &SpherePoint, y: &SpherePoint) -> Result<Complex64> {
        Ok(self.left_value(map, x)? * self.right_value(y)?)
    }

    /// Product of the factors that depend on the second coordinate only.
    pub fn right_value(&self, y: &SpherePoint) -> Result<Complex64> {
        let mut v = Complex64::new(1.0, 0.0);
        for (_, obs) in self.factors.iter().filter(|(s, _)| *s == self.arity) {
            v *= obs.eval(y)?;
        }
        Ok(v)
    }

    /// Product of the remaining factors, evaluated along the orbit of `x`.
    pub fn left_value(&self, map: &RationalMap, x: &SpherePoint) -> Result<Complex64> {
        let mut v = Complex64::new(1.0, 0.0);
        let mut p = *x;
        let mut at = 0;
        let mut left: Vec<&(u32, Arc<dyn Observable>)> = self.factors.iter().filter(|(s, _)| *s < self.arity).collect();
        left.sort_by_key(|(s, _)| *s);
        for (shift, obs) in left {
            while at < *shift {
                p = map.evaluate(&p);
                at += 1;
            }
            v *= obs.eval(&p)?;
        }
        Ok(v)
    }

    pub fn eval(&self, map: &RationalMap, x: &SpherePoint) -> Result<Complex64> {
        let mut y = *x;
        for _ in 0..self.arity {
            y = map.evaluate(&y);
        }
        self.eval_at(map, x, &y)
    }
}

fn check_arity(f: &GraphFunction, g: &GraphFunction) -> Result<u32> {
    if f.arity != g.arity {
        return Err(Error::Precondition(format!("arity mismatch: {} vs {}", f.arity, g.arity)));
    }
    Ok(f.arity)
}

fn fiber_sum(map: &RationalMap, fiber: &Fiber, f: &GraphFunction, g: &GraphFunction) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for e in &fiber.entries {
        acc += f.left_value(map, &e.point)?.conj() * g.left_value(map, &e.point)? * e.index as f64;
    }
    Ok(f.right_value(&fiber.base)?.conj() * acc * g.right_value(&fiber.base)?)
}

/// `(f|g)(y) = Σ_{x ∈ R⁻ⁿ(y)} e_{Rⁿ}(x) conj(f(x)) g(x)`
pub fn inner_product(map: &RationalMap, f: &GraphFunction, g: &GraphFunction, y: &SpherePoint) -> Result<Complex64> {
    let n = check_arity(f, g)?;
    let fiber = map.preimage_tree(y, n)?;
    fiber_sum(map, &fiber, f, g)
}

/// All points of `R⁻ⁿ(y)` over the probes, in probe order.
pub fn fiber_sample(map: &RationalMap, n: u32, probes: &[SpherePoint]) -> Result<Vec<SpherePoint>> {
    let fibers: Vec<Fiber> = probes.par_iter().map(|y| map.preimage_tree(y, n)).collect::<Result<_>>()?;
    Ok(fibers.into_iter().flat_map(|f| f.entries.into_iter().map(|e| e.point)).collect())
}

/// `max |f(x)|` over the sample.
pub fn norm_sup(map: &RationalMap, f: &GraphFunction, sample: &[SpherePoint]) -> Result<f64> {
    let vals: Vec<f64> = sample.par_iter().map(|x| Ok(f.eval(map, x)?.norm())).collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `max_y √(f|f)(y)` over the probes.
pub fn norm_two(map: &RationalMap, f: &GraphFunction, probes: &[SpherePoint]) -> Result<f64> {
    let vals: Vec<f64> = probes
        .par_iter()
        .map(|y| Ok(inner_product(map, f, f, y)?.re.max(0.0).sqrt()))
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `x ↦ Π_k f_k(R^{k-1}(x), R^k(x))` on the graph of `Rⁿ`.
pub fn tensor_embed(map: &RationalMap, fs: &[GraphFunction]) -> Result<GraphFunction> {
    if fs.is_empty() || fs.iter().any(|f| f.arity != 1) {
        return Err(Error::Precondition("tensor_embed takes one or more arity-1 functions".into()));
    }
    let n = fs.len() as u32;
    Budget::default().check_tree(map.degree(), n)?;
    let mut factors = Vec::new();
    for (k, f) in fs.iter().enumerate() {
        for (shift, obs) in &f.factors {
            factors.push((k as u32 + shift, obs.clone()));
        }
    }
    Ok(GraphFunction {
        arity: n,
        factors,
        name: fs.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(" ⊗ "),
    })
}

/// `(f₁⊗…⊗fₙ | g₁⊗…⊗gₙ)(y)` through the interior tensor product:
/// `(f_n | (f_{<n}|g_{<n}) g_n)`, one fiber level at a time.
pub fn nested_inner_product(map: &RationalMap, fs: &[GraphFunction], gs: &[GraphFunction], y: &SpherePoint) -> Result<Complex64> {
    if fs.len() != gs.len() || fs.iter().chain(gs).any(|f| f.arity != 1) {
        return Err(Error::Precondition("nested inner product takes equal-length arity-1 tuples".into()));
    }
    nested(map, fs, gs, y)
}

fn nested(map: &RationalMap, fs: &[GraphFunction], gs: &[GraphFunction], y: &SpherePoint) -> Result<Complex64> {
    let Some(((f, f_rest), (g, g_rest))) = fs.split_last().zip(gs.split_last()) else {
        return Ok(Complex64::new(1.0, 0.0));
    };
    let fiber = map.preimages(y)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for e in &fiber.entries {
        let inner = nested(map, f_rest, g_rest, &e.point)?;
        acc += f.eval_at(map, &e.point, y)?.conj() * inner * g.eval_at(map, &e.point, y)? * e.index as f64;
    }
    Ok(acc)
}

/// Same pairing, summed over the fiber of the composed map `Rⁿ` solved as a
/// single polynomial equation.
pub fn direct_inner_product(map: &RationalMap, fs: &[GraphFunction], gs: &[GraphFunction], y: &SpherePoint) -> Result<Complex64> {
    let f = tensor_embed(map, fs)?;
    let g = tensor_embed(map, gs)?;
    let rn = map.iterate(f.arity)?;
    let fiber = rn.preimages(y)?;
    fiber_sum(map, &fiber, &f, &g)
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Profile equal to 1 on `[0, inner]`, 0 beyond `outer`, smooth between.
fn plateau(dist: f64, inner: f64, outer: f64) -> f64 {
    if dist <= inner {
        1.0
    } else if dist >= outer {
        0.0
    } else {
        smoothstep((outer - dist) / (outer - inner))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoverSpec {
    /// `count` arcs of angular `width` (radians) centred at equally spaced
    /// arguments about `center`. Each bump is 1 on the middle half of its arc.
    Arcs { center: Complex64, count: usize, width: f64 },
    /// Chordal discs; bumps are 1 on the inner half radius.
    Discs { centers: Vec<SpherePoint>, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Frame {
    map: RationalMap,
    cover: CoverSpec,
}

impl Frame {
    pub fn cover(&self) -> &CoverSpec {
        &self.cover
    }

    pub fn len(&self) -> usize {
        match &self.cover {
            CoverSpec::Arcs { count, .. } => *count,
            CoverSpec::Discs { centers, .. } => centers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bumps(&self, x: &SpherePoint) -> Vec<f64> {
        match &self.cover {
            CoverSpec::Arcs { center, count, width } => {
                let Some(z) = x.finite() else {
                    return vec![0.0; *count];
                };
                let theta = (z - center).arg();
                let half = width / 2.0;
                (0..*count)
                    .map(|l| {
                        let c = 2.0 * std::f64::consts::PI * l as f64 / *count as f64;
                        let mut delta = (theta - c).rem_euclid(2.0 * std::f64::consts::PI);
                        if delta > std::f64::consts::PI {
                            delta = 2.0 * std::f64::consts::PI - delta;
                        }
                        plateau(delta, half / 2.0, half)
                    })
                    .collect()
            }
            CoverSpec::Discs { centers, radius } => centers
                .iter()
                .map(|c| plateau(chordal_distance(c, x), radius / 2.0, *radius))
                .collect(),
        }
    }

    /// Partition functions `χ_l(x)`; all zero off the cover.
    pub fn partition(&self, x: &SpherePoint) -> Vec<f64> {
        let mut phi = self.bumps(x);
        let total: f64 = phi.iter().sum();
        if total > 0.0 {
            for p in &mut phi {
                *p /= total;
            }
        }
        phi
    }

    /// `u_l(x) = √χ_l(x)`.
    pub fn members_at(&self, x: &SpherePoint) -> Vec<f64> {
        self.partition(x).into_iter().map(f64::sqrt).collect()
    }

    /// The frame elements as graph functions.
    pub fn members(&self) -> Vec<GraphFunction> {
        (0..self.len())
            .map(|l| {
                let frame = self.clone();
                GraphFunction::new(
                    1,
                    FnObservable(move |x: &SpherePoint| Ok(Complex64::new(frame.members_at(x)[l], 0.0))),
                    format!("u{l}"),
                )
            })
            .collect()
    }

    /// Max over `x` of `|Σ_l u_l(x) (u_l|f)(R(x)) − f(x)|`.
    pub fn reconstruction_defect(&self, f: &GraphFunction, xs: &[SpherePoint]) -> Result<f64> {
        if f.arity != 1 {
            return Err(Error::Precondition("reconstruction is for arity-1 functions".into()));
        }
        let map = &self.map;
        let vals: Vec<f64> = xs
            .par_iter()
            .map(|x| {
                let y = map.evaluate(x);
                let fiber = map.preimages(&y)?;
                let mut coeff = vec![Complex64::new(0.0, 0.0); self.len()];
                for e in &fiber.entries {
                    let u = self.members_at(&e.point);
                    let fx = f.eval_at(map, &e.point, &y)?;
                    for (c, ul) in coeff.iter_mut().zip(&u) {
                        *c += fx * *ul * e.index as f64;
                    }
                }
                let ux = self.members_at(x);
                let recon: Complex64 = ux.iter().zip(&coeff).map(|(u, c)| c * *u).sum();
                Ok((recon - f.eval_at(map, x, &y)?).norm())
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }
}

/// Frame without the critical-point and injectivity checks.
pub fn build_frame_unchecked(map: &RationalMap, cover: CoverSpec) -> Frame {
    Frame { map: map.clone(), cover }
}

/// Probes used to test a cover for injectivity.
pub const FRAME_PROBES: usize = 256;

/// A frame `u_l = √χ_l` for a cover on which `R` is injective. Refuses maps
/// with critical points in the Julia set.
pub fn build_frame(map: &RationalMap, cloud: &JuliaCloud, cover: CoverSpec) -> Result<Frame> {
    let crit = critical_points_in_julia(map, cloud, DEFAULT_CRITICAL_TOL)?;
    if !crit.is_empty() {
        return Err(Error::Precondition(format!(
            "{} critical point(s) in the Julia set, e.g. {}",
            crit.len(),
            crit[0].point
        )));
    }
    let frame = build_frame_unchecked(map, cover);
    for x in &cloud.points {
        if frame.bumps(x).iter().sum::<f64>() <= 0.0 {
            return Err(Error::Precondition(format!("cover misses Julia point {x}")));
        }
    }
    for y in cloud.strided(FRAME_PROBES) {
        let fiber = map.preimages(&y)?;
        let bumps: Vec<Vec<f64>> = fiber.entries.iter().map(|e| frame.bumps(&e.point)).collect();
        for i in 0..bumps.len() {
            for j in i + 1..bumps.len() {
                if let Some(l) = (0..frame.len()).find(|&l| bumps[i][l] > 0.0 && bumps[j][l] > 0.0) {
                    return Err(Error::CoverTooCoarse {
                        piece: l,
                        base: y.to_string(),
                    });
                }
            }
        }
    }
    Ok(frame)
}

/// Max over probes and fiber pairs of `|Σ_l u_l(x)u_l(x') − δ_{x,x'}|`.
pub fn frame_delta_defect(frame: &Frame, probes: &[SpherePoint]) -> Result<f64> {
    let vals: Vec<f64> = probes
        .par_iter()
        .map(|y| {
            let fiber = frame.map.preimages(y)?;
            let us: Vec<Vec<f64>> = fiber.entries.iter().map(|e| frame.members_at(&e.point)).collect();
            let mut worst: f64 = 0.0;
            for i in 0..us.len() {
                for j in 0..us.len() {
                    let s: f64 = us[i].iter().zip(&us[j]).map(|(a, b)| a * b).sum();
                    let delta = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((s - delta).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `max |a|` over the critical points found in the Julia set; zero exactly
/// when `a` lies in the ideal `I_X` (vacuously so when there are none).
pub fn ix_distance(map: &RationalMap, a: &dyn Observable, cloud: &JuliaCloud) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for c in critical_points_in_julia(map, cloud, DEFAULT_CRITICAL_TOL)? {
        worst = worst.max(a.eval(&c.point)?.norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: SpherePoint,
    /// Chordal radius.
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, x: &SpherePoint) -> bool {
        chordal_distance(&self.center, x) <= self.radius
    }
}

/// Least `n ≤ max_n` such that `Rⁿ(V ∩ sample)` is a `net_tol`-net of the
/// sample.
pub fn expansion_time(map: &RationalMap, v: &Disc, sample: &[SpherePoint], net_tol: f64, max_n: u32) -> Result<u32> {
    let mut pts: Vec<SpherePoint> = sample.iter().filter(|x| v.contains(x)).copied().collect();
    if pts.is_empty() {
        return Err(Error::Precondition("the disc contains no sample point".into()));
    }
    for n in 0..=max_n {
        let index = PointIndex::new(&pts);
        if sample.par_iter().all(|x| index.distance(x) <= net_tol) {
            return Ok(n);
        }
        pts = pts.par_iter().map(|x| map.evaluate(x)).collect();
    }
    Err(Error::BudgetExceeded {
        what: "expansion steps",
        needed: max_n as u64 + 1,
        limit: max_n as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessOptions {
    /// Probe count for the report.
    pub probes: usize,
    pub net_tol: f64,
    pub max_n: u32,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions {
            probes: 200,
            net_tol: 0.05,
            max_n: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub norm_a: f64,
    pub eps: f64,
    pub n: u32,
    /// Forward-net expansion time of `V`, when the sample resolves it.
    pub expansion_time: Option<u32>,
    pub x0: SpherePoint,
    pub radius_u: f64,
    pub radius_k: f64,
    pub radius_v: f64,
    pub probes: usize,
    pub min_b: f64,
    pub min_ff: f64,
    pub max_ff: f64,
    pub min_faf: f64,
    pub max_faf: f64,
    pub pass: bool,
}

/// The witness `f = g·b^{-1/2}` together with the data needed to rebuild it.
#[derive(Debug, Clone)]
pub struct Witness {
    pub f: GraphFunction,
    pub report: WitnessReport,
    pub probes: Vec<SpherePoint>,
}

pub const WITNESS_TOL: f64 = 1e-8;

/// Sup of `a` over the sample; the caller extends the sample with every
/// fiber point later evaluated.
fn sup_on(a: &dyn Observable, pts: &[SpherePoint]) -> Result<(f64, SpherePoint)> {
    let vals: Vec<f64> = pts.par_iter().map(|x| Ok(a.eval(x)?.re)).collect::<Result<_>>()?;
    let (i, v) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok((v, pts[i]))
}

/// Bump `g`: 1 on the disc `K`, 0 off `U`, both about `x₀`.
fn bump(x0: SpherePoint, r_k: f64, r_u: f64) -> impl Observable {
    FnObservable(move |x: &SpherePoint| Ok(Complex64::new(plateau(chordal_distance(&x0, x), r_k, r_u), 0.0)))
}

/// A graph function `f` with `(f|f) = 1` and `‖a‖ − ε ≤ (f|af) ≤ ‖a‖` on the
/// probes, following the expansion argument: bump near a maximum of `a`,
/// pushed around the whole Julia set by `Rⁿ`, then normalised.
pub fn simplicity_witness(map: &RationalMap, a: &TestFunction, eps: f64, cloud: &JuliaCloud, opts: &WitnessOptions) -> Result<Witness> {
    let sample = &cloud.points;
    let (mut norm_a, x0) = sup_on(a, sample)?;
    let min_a = sample
        .iter()
        .map(|x| Ok(a.eval(x)?.re))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min_a < 0.0 {
        return Err(Error::Precondition("a must be nonnegative on the Julia sample".into()));
    }
    if !(eps > 0.0 && eps < norm_a) {
        return Err(Error::Precondition(format!("need 0 < eps < ||a|| = {norm_a}, got {eps}")));
    }
    // U: largest dyadic radius on which a stays above ||a|| − ε/2
    let mut r_u = 1.0;
    while sample
        .iter()
        .any(|x| chordal_distance(&x0, x) <= r_u && a.eval(x).map(|v| v.re <= norm_a - eps / 2.0).unwrap_or(true))
    {
        r_u /= 2.0;
        if r_u < 1e-9 {
            return Err(Error::WitnessFailed(
                "no neighbourhood of the maximum keeps a above ||a|| - eps/2".into(),
            ));
        }
    }
    let (r_k, r_v) = (r_u / 3.0, r_u / 9.0);
    let v = Disc { center: x0, radius: r_v };
    // The forward net test needs many sample points inside V, so it is only
    // a starting guess; b ≥ 1 at every probe is what certifies Rⁿ(K) ⊇ J.
    let expansion = expansion_time(map, &v, sample, opts.net_tol, opts.max_n).ok();
    let mut n = expansion.unwrap_or(1).max(1);

    let probes = cloud.strided(opts.probes);
    let g = Arc::new(bump(x0, r_k, r_u));
    loop {
        let budget = Budget::default();
        budget.check_tree(map.degree(), n)?;
        let fibers: Vec<Fiber> = probes.par_iter().map(|y| map.preimage_tree(y, n)).collect::<Result<_>>()?;
        let stats: Vec<(f64, f64)> = fibers
            .par_iter()
            .map(|fib| {
                let mut b = 0.0;
                let mut ag = 0.0;
                for e in &fib.entries {
                    let gx = g.eval(&e.point)?.re;
                    b += e.index as f64 * gx * gx;
                    ag += e.index as f64 * gx * gx * a.eval(&e.point)?.re;
                }
                Ok((b, ag))
            })
            .collect::<Result<_>>()?;
        let min_b = stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        if min_b < 1.0 - 1e-9 {
            // some probe's fiber misses K: the expansion is not complete yet
            if n >= opts.max_n {
                return Err(Error::WitnessFailed(format!("b = (g|g) stays below 1 (min {min_b}) up to n = {n}")));
            }
            n += 1;
            continue;
        }
        let fiber_pts: Vec<SpherePoint> = fibers.iter().flat_map(|f| f.points().copied()).collect();
        norm_a = norm_a.max(sup_on(a, &fiber_pts)?.0);
        let ff: Vec<f64> = stats
            .iter()
            .map(|(b, _)| {
                let s = b.powf(-0.5);
                s * s * b
            })
            .collect();
        let faf: Vec<f64> = stats.iter().map(|(b, ag)| ag / b).collect();
        let fold = |v: &[f64]| {
            (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (min_ff, max_ff) = fold(&ff);
        let (min_faf, max_faf) = fold(&faf);
        let pass = (min_ff - 1.0).abs() <= WITNESS_TOL
            && (max_ff - 1.0).abs() <= WITNESS_TOL
            && min_faf >= norm_a - eps - WITNESS_TOL
            && max_faf <= norm_a + WITNESS_TOL;
        let report = WitnessReport {
            norm_a,
            eps,
            n,
            expansion_time: expansion,
            x0,
            radius_u: r_u,
            radius_k: r_k,
            radius_v: r_v,
            probes: probes.len(),
            min_b,
            min_ff,
            max_ff,
            min_faf,
            max_faf,
            pass,
        };
        if !pass {
            return Err(Error::WitnessFailed(format!("{report:?}")));
        }
        let map_c = map.clone();
        let g_c = g.clone();
        let inv_sqrt_b = FnObservable(move |y: &SpherePoint| {
            let fib = map_c.preimage_tree(y, n)?;
            let mut b = 0.0;
            for e in &fib.entries {
                let gx = g_c.eval(&e.point)?.re;
                b += e.index as f64 * gx * gx;
            }
            Ok(Complex64::new(b.powf(-0.5), 0.0))
        });
        let f = GraphFunction {
            arity: n,
            factors: vec![(0, g.clone() as Arc<dyn Observable>)],
            name: "g*b^-1/2".into(),
        }
        .with_right(Arc::new(inv_sqrt_b));
        return Ok(Witness { f, report, probes });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedReport {
    pub witness: WitnessReport,
    pub min_uau: f64,
    pub max_uau: f64,
    pub norm_two_u: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct NormalizedWitness {
    pub u: GraphFunction,
    pub report: NormalizedReport,
    pub probes: Vec<SpherePoint>,
}

/// `u = f·c^{-1/2}` with `c = (f|af)`, so that `(u|au) = 1` and
/// `‖u‖₂ ≤ (‖a‖ − ε)^{-1/2}`.
pub fn normalized_witness(
    map: &RationalMap,
    a: &TestFunction,
    eps: f64,
    cloud: &JuliaCloud,
    opts: &WitnessOptions,
) -> Result<NormalizedWitness> {
    let w = simplicity_witness(map, a, eps, cloud, opts)?;
    let n = w.report.n;
    let f = w.f.clone();
    let af = f.clone().with_factor(0, Arc::new(a.clone()));
    let map_c = map.clone();
    let c_of = move |y: &SpherePoint| -> Result<f64> {
        let fib = map_c.preimage_tree(y, n)?;
        Ok(fiber_sum(&map_c, &fib, &f, &af)?.re)
    };
    let cs: Vec<f64> = w.probes.par_iter().map(&c_of).collect::<Result<_>>()?;
    let u = w.f.clone().with_right(Arc::new(FnObservable(move |y: &SpherePoint| {
        Ok(Complex64::new(c_of(y)?.powf(-0.5), 0.0))
    })));
    // (u|au)(y) = c(y)/c(y); ‖u‖₂² = sup 1/c(y)
    let uau: Vec<f64> = cs
        .iter()
        .map(|c| {
            let s = c.powf(-0.5);
            s * s * c
        })
        .collect();
    let min_uau = uau.iter().copied().fold(f64::INFINITY, f64::min);
    let max_uau = uau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm_two_u = cs.iter().map(|c| c.powf(-0.5)).fold(0.0, f64::max);
    let bound = (w.report.norm_a - eps).powf(-0.5);
    let pass = (min_uau - 1.0).abs() <= WITNESS_TOL && (max_uau - 1.0).abs() <= WITNESS_TOL && norm_two_u <= bound + WITNESS_TOL;
    let report = NormalizedReport {
        witness: w.report,
        min_uau,
        max_uau,
        norm_two_u,
        bound,
        pass,
    };
    if !pass {
        return Err(Error::WitnessFailed(format!("{report:?}")));
    }
    Ok(NormalizedWitness {
        u,
        report,
        probes: w.probes,
    })
}

/// Recompute `(f|f)`, `(f|af)` (or `(u|au)` and `‖u‖₂`) from fresh fiber
/// trees through [`inner_product`]; returns the worst deviation from the
/// reported bounds, which is zero when the report holds.
pub fn reverify_witness(map: &RationalMap, a: &TestFunction, w: &Witness) -> Result<f64> {
    let af = w.f.clone().with_factor(0, Arc::new(a.clone()));
    let r = &w.report;
    let vals: Vec<f64> = w
        .probes
        .par_iter()
        .map(|y| {
            let ff = inner_product(map, &w.f, &w.f, y)?.re;
            let faf = inner_product(map, &w.f, &af, y)?.re;
            Ok([
                (ff - 1.0).abs() - WITNESS_TOL,
                (r.norm_a - r.eps) - faf - WITNESS_TOL,
                faf - r.norm_a - WITNESS_TOL,
            ]
            .into_iter()
            .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

pub fn reverify_normalized(map: &RationalMap, a: &TestFunction, w: &NormalizedWitness) -> Result<f64> {
    let au = w.u.clone().with_factor(0, Arc::new(a.clone()));
    let vals: Vec<(f64, f64)> = w
        .probes
        .par_iter()
        .map(|y| Ok((inner_product(map, &w.u, &au, y)?.re, inner_product(map, &w.u, &w.u, y)?.re)))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    let mut norm2: f64 = 0.0;
    for (uau, uu) in vals {
        worst = worst.max((uau - 1.0).abs() - WITNESS_TOL);
        norm2 = norm2.max(uu);
    }
    Ok(worst.max(norm2.sqrt() - w.report.bound - WITNESS_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::julia::sample_tree;
    use crate::numkernel::Polynomial;

    fn poly(c: &[f64]) -> RationalMap {
        RationalMap::polynomial(Polynomial::from_real(c)).unwrap()
    }

    fn z() -> GraphFunction {
        GraphFunction::from_test(1, TestFunction::monomial(1, 0))
    }

    #[test]
    fn inner_product_examples() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let y = SpherePoint::real(1.0);
        let one = GraphFunction::constant(1, 1.0);
        assert_eq!(inner_product(&sq, &one, &one, &y).unwrap(), Complex64::new(2.0, 0.0));
        let xi = GraphFunction::xi0(&sq);
        assert!((inner_product(&sq, &xi, &xi, &y).unwrap() - 1.0).norm() < 1e-15);
        assert!((inner_product(&sq, &z(), &z(), &y).unwrap() - 2.0).norm() < 1e-15);
        assert!((norm_two(&sq, &one, &[y]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tensor_routes_agree() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let y = SpherePoint::real(1.0);
        let one = GraphFunction::constant(1, 1.0);
        let e = tensor_embed(&sq, &[one.clone(), one.clone()]).unwrap();
        assert!((inner_product(&sq, &e, &e, &y).unwrap() - 4.0).norm() < 1e-14);
        let pair = [z(), z()];
        let nested = nested_inner_product(&sq, &pair, &pair, &y).unwrap();
        let direct = direct_inner_product(&sq, &pair, &pair, &y).unwrap();
        let tree = {
            let f = tensor_embed(&sq, &pair).unwrap();
            inner_product(&sq, &f, &f, &y).unwrap()
        };
        assert!((nested - direct).norm() < 1e-10);
        assert!((nested - tree).norm() < 1e-10);
    }

    #[test]
    fn frame_on_the_circle() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let cloud = sample_tree(&sq, &SpherePoint::real(1.0), 9).unwrap();
        let cover = CoverSpec::Arcs {
            center: Complex64::new(0.0, 0.0),
            count: 8,
            width: std::f64::consts::PI / 3.0,
        };
        let frame = build_frame(&sq, &cloud, cover).unwrap();
        assert_eq!(frame.members().len(), 8);
        for t in TestFunction::monomial_family(3) {
            let f = GraphFunction::from_test(1, t);
            assert!(frame.reconstruction_defect(&f, &cloud.strided(128)).unwrap() < 1e-9);
        }
        assert!(frame_delta_defect(&frame, &cloud.strided(64)).unwrap() < 1e-10);
        let u = frame.members_at(&SpherePoint::real(1.0));
        let v = frame.members_at(&SpherePoint::real(-1.0));
        assert_eq!(u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>(), 0.0);
    }

    #[test]
    fn coarse_cover_is_refused() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let cloud = sample_tree(&sq, &SpherePoint::real(1.0), 8).unwrap();
        let cover = CoverSpec::Arcs {
            center: Complex64::new(0.0, 0.0),
            count: 2,
            width: 4.0 * std::f64::consts::PI / 3.0,
        };
        assert!(matches!(build_frame(&sq, &cloud, cover.clone()), Err(Error::CoverTooCoarse { .. })));
        let frame = build_frame_unchecked(&sq, cover);
        assert!(frame_delta_defect(&frame, &cloud.strided(32)).unwrap() > 0.1);

        let m = poly(&[-2.0, 0.0, 1.0]);
        let cloud = sample_tree(&m, &SpherePoint::real(1.0), 8).unwrap();
        let cover = CoverSpec::Discs {
            centers: vec![SpherePoint::real(-1.0), SpherePoint::real(1.0)],
            radius: 1.0,
        };
        assert!(matches!(build_frame(&m, &cloud, cover), Err(Error::Precondition(_))));
    }

    #[test]
    fn ideal_membership() {
        let m = poly(&[-2.0, 0.0, 1.0]);
        let cloud = sample_tree(&m, &SpherePoint::real(1.0), 10).unwrap();
        assert!(ix_distance(&m, &TestFunction::monomial(1, 0), &cloud).unwrap() < 1e-12);
        assert!((ix_distance(&m, &TestFunction::one(), &cloud).unwrap() - 1.0).abs() < 1e-15);
        let sq = poly(&[0.0, 0.0, 1.0]);
        let cloud = sample_tree(&sq, &SpherePoint::real(1.0), 8).unwrap();
        assert_eq!(ix_distance(&sq, &TestFunction::one(), &cloud).unwrap(), 0.0);
    }

    #[test]
    fn arc_doubling() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let cloud = sample_tree(&sq, &SpherePoint::real(1.0), 12).unwrap();
        let center = SpherePoint::new(Complex64::from_polar(1.0, 0.3));
        // arc of angular width π/4 about `center`
        let v = Disc {
            center,
            radius: 2.0 * (std::f64::consts::PI / 16.0).sin(),
        };
        assert_eq!(expansion_time(&sq, &v, &cloud.points, 0.02, 10).unwrap(), 3);
        let whole = Disc { center, radius: 2.0 };
        assert_eq!(expansion_time(&sq, &whole, &cloud.points, 0.02, 10).unwrap(), 0);
    }

    #[test]
    fn witness_on_the_circle() {
        let sq = poly(&[0.0, 0.0, 1.0]);
        let cloud = sample_tree(&sq, &SpherePoint::real(1.0), 12).unwrap();
        let a = TestFunction::constant(2.0)
            .as_monomials()
            .unwrap()
            .add(TestFunction::re_z().as_monomials().unwrap());
        let a = TestFunction::Monomials(a);
        let w = simplicity_witness(&sq, &a, 0.2, &cloud, &WitnessOptions::default()).unwrap();
        assert!(w.report.pass);
        assert!(w.report.min_faf >= 2.8 - 1e-8 && w.report.max_faf <= 3.0 + 1e-8);
        assert!(reverify_witness(&sq, &a, &w).unwrap() <= 0.0);
        let u = normalized_witness(&sq, &a, 0.2, &cloud, &WitnessOptions::default()).unwrap();
        assert!(u.report.norm_two_u <= 2.8f64.powf(-0.5) + 1e-8);
        assert!(reverify_normalized(&sq, &a, &u).unwrap() <= 0.0);
        assert!(simplicity_witness(&sq, &a, 3.5, &cloud, &WitnessOptions::default()).is_err());
    }
}
