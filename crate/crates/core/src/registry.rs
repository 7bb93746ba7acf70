//! Catalog of worked examples: map definitions, quoted algebraic facts with
//! anchors, and the numerical checks that can be run on each map.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bimodule::{build_frame, frame_delta_defect, CoverSpec, GraphFunction};
use crate::error::{Error, Result};
use crate::expr::{parse_coefficient_map, parse_complex, parse_map};
use crate::julia::{
    component_count, critical_points_in_julia, default_start, in_main_cardioid, is_star_shaped_circle, mandelbrot_member,
    random_sphere_points, render, sample_inverse_iteration, sample_tree, stream_rng, JuliaCloud, RenderMode, RenderOptions, Window,
    DEFAULT_BURN_IN, DEFAULT_CRITICAL_TOL,
};
use crate::measure::lyubich_exact;
use crate::numkernel::{PointIndex, Polynomial, SpherePoint};
use crate::ratmap::RationalMap;
use crate::transfer::{kms_report, TestFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    #[serde(rename = "where")]
    pub location: String,
    pub quote: String,
}

/// A quoted fact; never computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quoted {
    pub value: String,
    pub anchor: Anchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub default: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub name: String,
    /// Map template; `{n}` or `{c}` is replaced by the parameter.
    pub map: String,
    pub parameter: Option<Parameter>,
    pub julia_description: Quoted,
    pub critical_in_julia: Quoted,
    pub k0: Quoted,
    pub k1: Quoted,
    pub algebra: Quoted,
}

fn records() -> &'static [ExampleRecord] {
    static RECORDS: OnceLock<Vec<ExampleRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| serde_json::from_str(include_str!("../data/examples.json")).expect("example catalog is valid JSON"))
}

pub fn list() -> Vec<&'static str> {
    records().iter().map(|r| r.name.as_str()).collect()
}

pub fn get(name: &str) -> Result<&'static ExampleRecord> {
    records()
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::UnknownExample(name.to_string()))
}

/// `T_n` from `T_{k+1} = 2z T_k − T_{k−1}`.
pub fn chebyshev(n: u32) -> Polynomial {
    let two_z = Polynomial::from_real(&[0.0, 2.0]);
    let (mut prev, mut cur) = (Polynomial::one(), Polynomial::z());
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        let next = &(&two_z * &cur) - &prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// An example together with a concrete parameter value.
#[derive(Debug, Clone)]
pub struct Instance {
    pub record: &'static ExampleRecord,
    pub parameter: Option<String>,
    pub map: RationalMap,
}

impl Instance {
    /// Number of critical points in the Julia set quoted for this instance,
    /// when it is a definite number.
    pub fn quoted_critical_count(&self) -> Option<usize> {
        match self.record.name.as_str() {
            "tchebychev_n" => self.int_param().map(|n| n as usize - 1),
            "quadratic_family" => self.complex_param().filter(|c| in_main_cardioid(*c)).map(|_| 0),
            _ => self.record.critical_in_julia.value.parse().ok(),
        }
    }

    fn int_param(&self) -> Option<u32> {
        self.parameter.as_deref()?.parse().ok()
    }

    fn complex_param(&self) -> Option<Complex64> {
        parse_complex(self.parameter.as_deref()?).ok()
    }
}

/// `name` or `name:param`.
pub fn instance(spec: &str) -> Result<Instance> {
    let (name, param) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim().to_string())),
        None => (spec.trim(), None),
    };
    let record = get(name)?;
    let parameter = match (&record.parameter, param) {
        (None, Some(_)) => return Err(Error::Parse(format!("{name} takes no parameter"))),
        (None, None) => None,
        (Some(p), given) => Some(given.unwrap_or_else(|| p.default.clone())),
    };
    let map = match record.name.as_str() {
        "power_map_n" => {
            let n = parse_degree(parameter.as_deref().unwrap())?;
            RationalMap::polynomial(Polynomial::monomial(n as usize, Complex64::new(1.0, 0.0)))?
        }
        "tchebychev_n" => {
            let n = parse_degree(parameter.as_deref().unwrap())?;
            RationalMap::polynomial(chebyshev(n))?
        }
        "quadratic_family" => {
            let c = parse_complex(parameter.as_deref().unwrap())?;
            RationalMap::polynomial(Polynomial::new(vec![c, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]))?
        }
        _ => parse_map(&record.map)?,
    };
    Ok(Instance { record, parameter, map })
}

fn parse_degree(s: &str) -> Result<u32> {
    match s.parse::<u32>() {
        Ok(n) if (2..=64).contains(&n) => Ok(n),
        _ => Err(Error::Parse(format!("degree parameter must be an integer in 2..=64, got '{s}'"))),
    }
}

/// A registry entry (`name[:param]`), coefficient lists or a map expression.
pub fn resolve_map(spec: &str) -> Result<RationalMap> {
    let name = spec.split(':').next().unwrap_or("").trim();
    if spec.trim_start().starts_with('[') {
        parse_coefficient_map(spec)
    } else if list().contains(&name) {
        Ok(instance(spec)?.map)
    } else {
        parse_map(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub measured: serde_json::Value,
    pub criterion: String,
}

fn check(name: &str, pass: bool, measured: serde_json::Value, criterion: &str) -> CheckResult {
    CheckResult {
        name: name.into(),
        pass,
        measured,
        criterion: criterion.into(),
    }
}

fn failed(name: &str, err: Error) -> CheckResult {
    check(name, false, json!({ "error": err.to_string() }), "no error")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub example: String,
    pub parameter: Option<String>,
    pub map: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random base points for the fiber-sum check.
    pub fiber_points: usize,
    /// Inverse-iteration cloud size for band and covering checks.
    pub cloud_points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            fiber_points: 1000,
            cloud_points: 20_000,
        }
    }
}

/// Tree depth with at most about `2^15` leaves.
fn tree_depth(d: usize) -> u32 {
    ((15.0 * 2f64.ln()) / (d as f64).ln()).floor() as u32
}

fn tree_cloud(map: &RationalMap) -> Result<JuliaCloud> {
    sample_tree(map, &default_start(map)?, tree_depth(map.degree()))
}

fn mc_cloud(map: &RationalMap, opts: &VerifyOptions) -> Result<JuliaCloud> {
    sample_inverse_iteration(map, &default_start(map)?, DEFAULT_BURN_IN, opts.cloud_points, opts.seed)
}

fn fiber_sum_check(map: &RationalMap, opts: &VerifyOptions) -> CheckResult {
    let d = map.degree() as u64;
    let pts = random_sphere_points(opts.fiber_points, opts.seed);
    let bad: Result<Vec<u64>> = pts.par_iter().map(|w| map.preimages(w).map(|f| f.total_index())).collect();
    match bad {
        Ok(totals) => {
            let wrong = totals.iter().filter(|&&t| t != d).count();
            check(
                "fiber_sums",
                wrong == 0,
                json!({ "points": pts.len(), "wrong": wrong }),
                "sum of branch indices equals the degree at every base point",
            )
        }
        Err(e) => failed("fiber_sums", e),
    }
}

fn riemann_hurwitz_check(map: &RationalMap, expected_points: Option<usize>) -> CheckResult {
    match map.critical_points() {
        Ok(crit) => {
            let total: usize = crit.iter().map(|c| c.branch_index - 1).sum();
            let d = map.degree();
            let mut pass = total == 2 * d - 2;
            if let Some(k) = expected_points {
                pass &= crit.len() == k;
            }
            check(
                "riemann_hurwitz",
                pass,
                json!({ "sum_e_minus_1": total, "two_d_minus_2": 2 * d - 2, "distinct_points": crit.len() }),
                "sum of (e - 1) over critical points equals 2d - 2",
            )
        }
        Err(e) => failed("riemann_hurwitz", e),
    }
}

fn critical_count_check(map: &RationalMap, cloud: &JuliaCloud, expected: Option<usize>) -> CheckResult {
    match critical_points_in_julia(map, cloud, DEFAULT_CRITICAL_TOL) {
        Ok(found) => {
            let points: Vec<String> = found.iter().map(|c| c.point.to_string()).collect();
            check(
                "critical_in_julia",
                expected.is_none_or(|k| k == found.len()),
                json!({ "count": found.len(), "points": points, "quoted": expected }),
                "measured count equals the quoted count",
            )
        }
        Err(e) => failed("critical_in_julia", e),
    }
}

/// Every cloud point within `tol` of the real segment `[lo, hi]`.
fn band_check(name: &str, cloud: &JuliaCloud, lo: f64, hi: f64, tol: f64) -> CheckResult {
    let worst = cloud
        .points
        .iter()
        .map(|p| match p.finite() {
            Some(z) => z.im.abs().max(lo - z.re).max(z.re - hi).max(0.0),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    check(
        name,
        worst < tol,
        json!({ "max_distance": worst, "points": cloud.len() }),
        &format!("all samples within {tol:e} of [{lo}, {hi}]"),
    )
}

fn circle_check(cloud: &JuliaCloud) -> CheckResult {
    let worst = cloud
        .points
        .iter()
        .map(|p| p.finite().map(|z| (z.norm() - 1.0).abs()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    check(
        "julia_unit_circle",
        worst < 1e-6,
        json!({ "max_modulus_error": worst, "points": cloud.len() }),
        "all samples satisfy ||z| - 1| < 1e-6",
    )
}

fn frame_check(map: &RationalMap, cloud: &JuliaCloud, cover: CoverSpec) -> CheckResult {
    let run = || -> Result<(usize, f64, f64)> {
        let frame = build_frame(map, cloud, cover)?;
        let xs = cloud.strided(256);
        let mut recon: f64 = 0.0;
        for t in TestFunction::monomial_family(3) {
            recon = recon.max(frame.reconstruction_defect(&GraphFunction::from_test(1, t), &xs)?);
        }
        let delta = frame_delta_defect(&frame, &cloud.strided(256))?;
        Ok((frame.len(), recon, delta))
    };
    match run() {
        Ok((members, recon, delta)) => check(
            "frame",
            recon < 1e-8 && delta < 1e-9,
            json!({ "members": members, "reconstruction_defect": recon, "delta_defect": delta }),
            "frame builds, reconstruction defect < 1e-8, delta defect < 1e-9",
        ),
        Err(e) => failed("frame", e),
    }
}

/// Arcs about `center` on which a degree-`d` map whose fibers are spread
/// evenly in angle stays injective.
pub fn arc_cover(center: Complex64, d: usize) -> CoverSpec {
    CoverSpec::Arcs {
        center,
        count: 4 * d,
        width: 2.0 * PI / (3.0 * d as f64),
    }
}

/// Probes come from the inverse-iteration cloud: strided tree points share
/// their last inverse branches and sit too close together.
fn kms_check(map: &RationalMap, cloud: &JuliaCloud) -> CheckResult {
    let run = || -> Result<serde_json::Value> {
        let probes = cloud.strided(16);
        let outside_hypothesis = !critical_points_in_julia(map, cloud, DEFAULT_CRITICAL_TOL)?.is_empty();
        let depth = tree_depth(map.degree()).min(14);
        let reference = lyubich_exact(map, &probes[0], depth)?;
        let report = kms_report(map, &TestFunction::monomial_family(3), &probes, 20, &reference, outside_hypothesis)?;
        Ok(serde_json::to_value(&report)?)
    };
    match run() {
        Ok(v) => check(
            "kms_convergence",
            v["pass"].as_bool().unwrap_or(false),
            v,
            "sup-variation below 1e-6 within 20 levels and limit within 1e-3 of the pullback integral",
        ),
        Err(e) => failed("kms_convergence", e),
    }
}

fn tent_conjugacy_check(map: &RationalMap) -> CheckResult {
    let phi = |t: f64| SpherePoint::real(2.0 * (PI * t).cos());
    let tent = |t: f64| if t <= 0.5 { 2.0 * t } else { 2.0 - 2.0 * t };
    let worst = (0..=10_000)
        .map(|k| {
            let t = k as f64 / 10_000.0;
            let lhs = map.evaluate(&phi(t)).finite().unwrap();
            let rhs = phi(tent(t)).finite().unwrap();
            (lhs - rhs).norm()
        })
        .fold(0.0, f64::max);
    check(
        "tent_conjugacy",
        worst < 1e-10,
        json!({ "max_defect": worst, "grid": 10_001 }),
        "max |P(phi(t)) - phi(h(t))| < 1e-10 with phi(t) = 2cos(pi t)",
    )
}

fn cardioid_check(opts: &VerifyOptions) -> CheckResult {
    let mut rng = stream_rng(opts.seed, 0xCA4D);
    let mut disagree = 0;
    let mut outside_checked = 0;
    for k in 0..100 {
        use rand::Rng;
        // half the samples inside the cardioid through its parametrisation,
        // half far outside the set
        let c = if k % 2 == 0 {
            let w = Complex64::from_polar(0.999 * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>());
            w / 2.0 - w * w / 4.0
        } else {
            outside_checked += 1;
            Complex64::from_polar(2.0 + 2.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>())
        };
        if mandelbrot_member(c, 1000) != in_main_cardioid(c) {
            disagree += 1;
        }
    }
    check(
        "mandelbrot_vs_cardioid",
        disagree == 0,
        json!({ "samples": 100, "outside_samples": outside_checked, "disagreements": disagree }),
        "membership agrees with the closed-form cardioid on every sample",
    )
}

fn disconnection_check() -> CheckResult {
    let run = || -> Result<(usize, usize)> {
        let inside = crate::expr::parse_map("z^2 + 0.2")?;
        let outside = crate::expr::parse_map("z^2 + 1")?;
        let h = 0.05;
        let a = component_count(&sample_tree(&inside, &default_start(&inside)?, 12)?, h);
        let b = component_count(&sample_tree(&outside, &default_start(&outside)?, 12)?, h);
        Ok((a, b))
    };
    match run() {
        Ok((a, b)) => check(
            "disconnects_outside_m",
            a == 1 && b > 1,
            json!({ "components_c_0.2": a, "components_c_1": b, "h": 0.05 }),
            "one component at c = 0.2, several at c = 1 (outside the Mandelbrot set)",
        ),
        Err(e) => failed("disconnects_outside_m", e),
    }
}

fn topological_circle_check(cloud: &JuliaCloud) -> CheckResult {
    let ok = is_star_shaped_circle(cloud, Complex64::new(0.0, 0.0), 0.05);
    check(
        "topological_circle",
        ok,
        json!({ "points": cloud.len(), "h": 0.05 }),
        "angularly ordered samples form a closed chain with steps below h",
    )
}

/// Points of a near-uniform spiral lattice on the sphere.
pub fn fibonacci_sphere(count: usize) -> Vec<SpherePoint> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            // inverse stereographic projection from the north pole
            if z >= 1.0 {
                SpherePoint::Infinity
            } else {
                SpherePoint::new(Complex64::from_polar(r / (1.0 - z), phi))
            }
        })
        .collect()
}

fn sphere_cover_check(map: &RationalMap, opts: &VerifyOptions) -> CheckResult {
    let run = || -> Result<(f64, f64)> {
        let cloud = sample_inverse_iteration(map, &default_start(map)?, DEFAULT_BURN_IN, 4 * opts.cloud_points, opts.seed)?;
        let index = PointIndex::new(&cloud.points);
        let lattice = fibonacci_sphere(2000);
        let cover = lattice.iter().map(|p| index.distance(p)).fold(0.0, f64::max);
        let forward = cloud
            .strided(2000)
            .iter()
            .map(|p| index.distance(&map.evaluate(p)))
            .fold(0.0, f64::max);
        Ok((cover, forward))
    };
    match run() {
        Ok((cover, forward)) => check(
            "julia_is_sphere",
            cover < 0.05 && forward < 0.05,
            json!({ "covering_radius": cover, "forward_image_gap": forward }),
            "backward-orbit cloud comes within 0.05 of every lattice point on the sphere and is forward invariant",
        ),
        Err(e) => failed("julia_is_sphere", e),
    }
}

fn moment_check(map: &RationalMap, n: u32) -> CheckResult {
    let run = || -> Result<f64> {
        let depth = tree_depth(map.degree()).min(12);
        let cloud = lyubich_exact(map, &SpherePoint::real(0.3), depth)?;
        let mut worst: f64 = 0.0;
        for k in 1..=4u32 {
            // ∫ x^k dx/(π√(1−x²)) = (1/π)∫ cos^k θ dθ over [0, π]
            let oracle = if k % 2 == 1 {
                0.0
            } else {
                binomial(k, k / 2) / 2f64.powi(k as i32)
            };
            let got = cloud.integrate(&TestFunction::monomial(k, 0))?;
            worst = worst.max((got - oracle).norm());
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => check(
            "lyubich_moments",
            w < 1e-2,
            json!({ "max_moment_error": w, "moments": "x^1..x^4", "n": n }),
            "moments of the pullback measure match the arcsine law within 1e-2",
        ),
        Err(e) => failed("lyubich_moments", e),
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn render_check(map: &RationalMap, opts: &VerifyOptions) -> CheckResult {
    let window = Window {
        x_min: -1.6,
        x_max: 1.6,
        y_min: -1.6,
        y_max: 1.6,
    };
    let ro = RenderOptions {
        mode: RenderMode::Density,
        max_iter: 256,
        seed: opts.seed,
        samples: Some(opts.cloud_points),
    };
    match render(map, &window, 128, 128, &ro) {
        Ok(img) => {
            let lit = img.pixels.iter().filter(|&&p| p > 0).count();
            check(
                "rendered",
                lit > 0,
                json!({ "width": 128, "height": 128, "lit_pixels": lit }),
                "density image of the Julia set has lit pixels",
            )
        }
        Err(e) => failed("rendered", e),
    }
}

/// Runs every check listed for the example; failures are collected.
pub fn verify(spec: &str, opts: &VerifyOptions) -> Result<VerifyReport> {
    let inst = instance(spec)?;
    let map = &inst.map;
    let quoted = inst.quoted_critical_count();
    let mut checks = vec![fiber_sum_check(map, opts)];
    let tree = tree_cloud(map);
    let with_tree = |f: &dyn Fn(&JuliaCloud) -> CheckResult, name: &str| match &tree {
        Ok(c) => f(c),
        Err(e) => failed(name, e.clone()),
    };
    let with_mc = |f: &dyn Fn(&JuliaCloud) -> CheckResult, name: &str| match mc_cloud(map, opts) {
        Ok(c) => f(&c),
        Err(e) => failed(name, e),
    };
    match inst.record.name.as_str() {
        "power_map_n" => {
            checks.push(riemann_hurwitz_check(map, None));
            checks.push(with_mc(&circle_check, "julia_unit_circle"));
            checks.push(with_tree(&|c| critical_count_check(map, c, Some(0)), "critical_in_julia"));
            checks.push(with_tree(
                &|c| frame_check(map, c, arc_cover(Complex64::new(0.0, 0.0), map.degree())),
                "frame",
            ));
            checks.push(with_mc(&|c| kms_check(map, c), "kms_convergence"));
        }
        "z2_minus_2" => {
            checks.push(riemann_hurwitz_check(map, None));
            checks.push(with_mc(&|c| band_check("julia_interval", c, -2.0, 2.0, 1e-6), "julia_interval"));
            checks.push(with_tree(
                &|c| {
                    let mut r = critical_count_check(map, c, quoted);
                    let zero_found = critical_points_in_julia(map, c, DEFAULT_CRITICAL_TOL)
                        .is_ok_and(|v| v.iter().any(|d| d.point.finite().is_some_and(|z| z.norm() < 1e-9)));
                    r.pass &= zero_found;
                    r
                },
                "critical_in_julia",
            ));
            checks.push(tent_conjugacy_check(map));
        }
        "quadratic_family" => {
            checks.push(riemann_hurwitz_check(map, None));
            checks.push(cardioid_check(opts));
            checks.push(disconnection_check());
            if let Some(k) = quoted {
                checks.push(with_tree(&|c| critical_count_check(map, c, Some(k)), "critical_in_julia"));
                checks.push(with_tree(&topological_circle_check, "topological_circle"));
                checks.push(with_tree(&|c| frame_check(map, c, arc_cover(Complex64::new(0.0, 0.0), 2)), "frame"));
            }
        }
        "full_shift_example" => {
            let degree_ok = map.degree() == 2;
            checks.push(check("degree", degree_ok, json!(map.degree()), "degree 2"));
            checks.push(riemann_hurwitz_check(map, None));
        }
        "tchebychev_n" => {
            let n = inst.int_param().unwrap_or(3);
            checks.push(riemann_hurwitz_check(map, None));
            checks.push(with_mc(&|c| band_check("julia_interval", c, -1.0, 1.0, 1e-6), "julia_interval"));
            checks.push(with_tree(&|c| critical_count_check(map, c, quoted), "critical_in_julia"));
            checks.push(moment_check(map, n));
        }
        "lattes" => {
            checks.push(riemann_hurwitz_check(map, Some(6)));
            checks.push(with_tree(&|c| critical_count_check(map, c, quoted), "critical_in_julia"));
            checks.push(sphere_cover_check(map, opts));
        }
        "ushiki_gasket" => {
            let degree_ok = map.degree() == 3;
            checks.push(check("degree", degree_ok, json!(map.degree()), "degree 3"));
            checks.push(riemann_hurwitz_check(map, None));
            checks.push(with_tree(&|c| critical_count_check(map, c, quoted), "critical_in_julia"));
            checks.push(render_check(map, opts));
        }
        other => return Err(Error::UnknownExample(other.into())),
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        example: inst.record.name.clone(),
        parameter: inst.parameter.clone(),
        map: map.to_string(),
        checks,
        pass,
    })
}

/// Every catalog entry at its default parameter, in catalog order.
pub fn verify_all(opts: &VerifyOptions) -> Result<Vec<VerifyReport>> {
    list().par_iter().map(|name| verify(name, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog() {
        assert_eq!(
            list(),
            vec![
                "power_map_n",
                "z2_minus_2",
                "quadratic_family",
                "full_shift_example",
                "tchebychev_n",
                "lattes",
                "ushiki_gasket"
            ]
        );
        let r = get("z2_minus_2").unwrap();
        assert_eq!(r.k0.value, "Z");
        for rec in list().into_iter().map(|n| get(n).unwrap()) {
            for q in [&rec.julia_description, &rec.critical_in_julia, &rec.k0, &rec.k1, &rec.algebra] {
                assert!(!q.anchor.location.is_empty() && !q.anchor.quote.is_empty(), "{}", rec.name);
            }
        }
        assert_eq!(get("lattes").unwrap().critical_in_julia.value, "6");
        assert!(matches!(get("nope"), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn chebyshev_recurrence() {
        let t3 = chebyshev(3);
        assert_eq!(t3, Polynomial::from_real(&[0.0, -3.0, 0.0, 4.0]));
        let th = 0.4f64;
        assert!((chebyshev(5).eval(Complex64::new(th.cos(), 0.0)).re - (5.0 * th).cos()).abs() < 1e-13);
    }

    #[test]
    fn instances() {
        assert_eq!(instance("power_map_n:3").unwrap().map.degree(), 3);
        assert_eq!(instance("tchebychev_n").unwrap().quoted_critical_count(), Some(2));
        assert_eq!(instance("quadratic_family:0.2").unwrap().quoted_critical_count(), Some(0));
        assert_eq!(instance("quadratic_family:1").unwrap().quoted_critical_count(), None);
        assert!(instance("lattes:2").is_err());
        assert!(instance("power_map_n:1").is_err());
        assert_eq!(resolve_map("z^2-2").unwrap(), instance("z2_minus_2").unwrap().map);
    }

    #[test]
    fn tent_map_conjugacy() {
        let r = tent_conjugacy_check(&instance("z2_minus_2").unwrap().map);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn sphere_lattice_is_spread() {
        let pts = fibonacci_sphere(500);
        let index = PointIndex::new(&pts);
        for p in fibonacci_sphere(97) {
            assert!(index.distance(&p) < 0.2);
        }
    }
}
