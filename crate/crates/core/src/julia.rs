//! Julia-set sampling, membership heuristics and rendering.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{chordal_distance, PointIndex, SpherePoint};
use crate::ratmap::{Budget, CriticalDatum, RationalMap};

pub const DEFAULT_BURN_IN: u32 = 20;
/// Fixed walker count so clouds do not depend on the thread pool size.
pub const WALKERS: u64 = 16;
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-3;
/// Orbit length used when pulling cloud points back toward a query point.
pub const DEFAULT_REFINE_DEPTH: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    InverseIteration,
    /// All leaves of a depth-`n` preimage tree.
    PreimageTree,
    EscapeBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuliaCloud {
    pub points: Vec<SpherePoint>,
    pub generator: Generator,
    pub seed: u64,
    pub start: SpherePoint,
    /// Burn-in levels for walks, tree depth for trees.
    pub depth: u32,
}

impl JuliaCloud {
    pub fn index(&self) -> PointIndex {
        PointIndex::new(&self.points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `count` points spread evenly through the cloud.
    pub fn strided(&self, count: usize) -> Vec<SpherePoint> {
        if count == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let n = self.points.len();
        (0..count.min(n)).map(|i| self.points[i * n / count.min(n)]).collect()
    }
}

/// One backward step: a preimage of `x` drawn with probability `e(x')/d`.
pub fn backward_step(map: &RationalMap, x: &SpherePoint, rng: &mut impl Rng) -> Result<SpherePoint> {
    let fiber = map.preimages(x)?;
    let d = map.degree() as f64;
    let u: f64 = rng.random::<f64>() * d;
    let mut acc = 0.0;
    for e in &fiber.entries {
        acc += e.index as f64;
        if u < acc {
            return Ok(e.point);
        }
    }
    Ok(fiber.entries.last().expect("fiber is never empty").point)
}

/// Stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A repelling fixed point, which always lies in the Julia set.
pub fn default_start(map: &RationalMap) -> Result<SpherePoint> {
    let best = map
        .fixed_points()?
        .into_iter()
        .filter(|(_, m)| m.norm() > 1.0 + 1e-9)
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()));
    Ok(match best {
        Some((z, _)) => SpherePoint::new(z),
        None => SpherePoint::real(0.5),
    })
}

/// Points uniform on the sphere: height uniform in [-1, 1], longitude
/// uniform, then stereographic projection.
pub fn random_sphere_points(count: usize, seed: u64) -> Vec<SpherePoint> {
    let mut rng = stream_rng(seed, u64::MAX);
    (0..count)
        .map(|_| {
            let h: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - h * h).sqrt() / (1.0 - h);
            SpherePoint::new(Complex64::from_polar(r, phi))
        })
        .collect()
}

/// Seeded backward random walks. Walker `w` uses stream `w` of the seed,
/// discards `burn_in` levels, then emits one point per further level.
/// Walkers are concatenated in order.
pub fn sample_inverse_iteration(map: &RationalMap, start: &SpherePoint, burn_in: u32, count: usize, seed: u64) -> Result<JuliaCloud> {
    if map.degree() < 2 {
        return Err(Error::Precondition("inverse iteration needs degree >= 2".into()));
    }
    let per = count / WALKERS as usize;
    let extra = count % WALKERS as usize;
    let chunks: Vec<Vec<SpherePoint>> = (0..WALKERS)
        .into_par_iter()
        .map(|w| {
            let n = per + usize::from((w as usize) < extra);
            let mut rng = stream_rng(seed, w);
            let mut x = *start;
            for _ in 0..burn_in {
                x = backward_step(map, &x, &mut rng)?;
            }
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                x = backward_step(map, &x, &mut rng)?;
                out.push(x);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(JuliaCloud {
        points: chunks.into_iter().flatten().collect(),
        generator: Generator::InverseIteration,
        seed,
        start: *start,
        depth: burn_in,
    })
}

/// Every leaf of the depth-`depth` preimage tree over `start`.
pub fn sample_tree(map: &RationalMap, start: &SpherePoint, depth: u32) -> Result<JuliaCloud> {
    let fiber = map.preimage_tree_with_budget(start, depth, &Budget::default())?;
    Ok(JuliaCloud {
        points: fiber.entries.into_iter().map(|e| e.point).collect(),
        generator: Generator::PreimageTree,
        seed: 0,
        start: *start,
        depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Escape {
    Escapes { iterations: u32 },
    Bounded,
}

/// `max(2, largest |coefficient| + 1)`, widened for leading coefficients
/// below one.
pub fn default_escape_radius(map: &RationalMap) -> f64 {
    let num = map.numerator();
    let den0 = map.denominator().coeff(0);
    let scale = num.coeffs().iter().map(|c| (c / den0).norm()).fold(0.0, f64::max);
    let lead = (num.leading() / den0).norm();
    2f64.max(scale + 1.0) / lead.min(1.0)
}

pub fn escape_membership(map: &RationalMap, z: Complex64, max_iter: u32, escape_radius: f64) -> Result<Escape> {
    if !map.is_polynomial() {
        return Err(Error::Precondition("escape time needs a polynomial map".into()));
    }
    let p = map.numerator().scale(map.denominator().coeff(0).inv());
    Ok(escape_time(&p, z, max_iter, escape_radius))
}

fn escape_time(p: &crate::numkernel::Polynomial, mut z: Complex64, max_iter: u32, radius: f64) -> Escape {
    let r2 = radius * radius;
    for i in 0..max_iter {
        if z.norm_sqr() > r2 {
            return Escape::Escapes { iterations: i };
        }
        z = p.eval(z);
    }
    if z.norm_sqr() > r2 {
        Escape::Escapes { iterations: max_iter }
    } else {
        Escape::Bounded
    }
}

/// True iff the orbit of 0 under `z² + c` stays within radius 2 for
/// `max_iter` steps.
pub fn mandelbrot_member(c: Complex64, max_iter: u32) -> bool {
    let mut z = Complex64::new(0.0, 0.0);
    for _ in 0..max_iter {
        z = z * z + c;
        if z.norm_sqr() > 4.0 {
            return false;
        }
    }
    true
}

/// Interior of the main cardioid `{w/2 − w²/4 : |w| < 1}`.
pub fn in_main_cardioid(c: Complex64) -> bool {
    // w = 1 − sqrt(1 − 4c) inverts c = w/2 − w²/4
    let w = Complex64::new(1.0, 0.0) - (Complex64::new(1.0, 0.0) - c * 4.0).sqrt();
    w.norm() < 1.0
}

/// Distance from `q` to the cloud after pulling cloud points back along the
/// forward orbit of `q`.
///
/// For each `k ≤ refine_depth` the cloud point nearest `R^k(q)` is pulled
/// back `k` times, each time choosing the preimage closest to the matching
/// orbit point. Preimages of Julia points are Julia points, so this only
/// densifies the cloud near `q`; it never manufactures points off `J`.
pub fn distance_to_julia(map: &RationalMap, cloud: &JuliaCloud, index: &PointIndex, q: &SpherePoint, refine_depth: u32) -> Result<f64> {
    let mut orbit = vec![*q];
    for _ in 0..refine_depth {
        let next = map.evaluate(orbit.last().unwrap());
        orbit.push(next);
    }
    let mut best = f64::INFINITY;
    for k in 0..orbit.len() {
        let Some((i, _)) = index.nearest(&orbit[k]) else {
            return Ok(f64::INFINITY);
        };
        let mut x = cloud.points[i];
        for j in (0..k).rev() {
            let fiber = map.preimages(&x)?;
            x = fiber.nearest(&orbit[j]).map(|(e, _)| e.point).unwrap_or(x);
        }
        best = best.min(chordal_distance(&x, q));
        if best == 0.0 {
            break;
        }
    }
    Ok(best)
}

/// Critical points whose refined distance to the cloud is below `tol`.
pub fn critical_points_in_julia(map: &RationalMap, cloud: &JuliaCloud, tol: f64) -> Result<Vec<CriticalDatum>> {
    if cloud.is_empty() {
        return Err(Error::Precondition("empty Julia cloud".into()));
    }
    let index = cloud.index();
    let mut out = Vec::new();
    for c in map.critical_points()? {
        if distance_to_julia(map, cloud, &index, &c.point, DEFAULT_REFINE_DEPTH)? < tol {
            out.push(c);
        }
    }
    Ok(out)
}

/// Simple-closed-curve heuristic for a cloud that is star-shaped about
/// `center`: ordered by argument, consecutive points (cyclically) are within
/// `h` and the radial function has no jumps, so every point has exactly two
/// neighbours along the curve.
pub fn is_star_shaped_circle(cloud: &JuliaCloud, center: Complex64, h: f64) -> bool {
    let mut pts: Vec<Complex64> = cloud.points.iter().filter_map(|p| p.finite()).collect();
    if pts.len() < 3 || pts.len() != cloud.points.len() {
        return false;
    }
    pts.sort_by(|a, b| (a - center).arg().total_cmp(&(b - center).arg()));
    let n = pts.len();
    (0..n).all(|i| {
        let a = SpherePoint::new(pts[i]);
        let b = SpherePoint::new(pts[(i + 1) % n]);
        chordal_distance(&a, &b) < h
    })
}

/// Number of connected components of the `h`-neighbourhood graph.
pub fn component_count(cloud: &JuliaCloud, h: f64) -> usize {
    let n = cloud.points.len();
    let index = cloud.index();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in index.within(&cloud.points[i], h) {
            let a = find(&mut parent, i);
            let b = find(&mut parent, j);
            if a != b {
                parent[b] = a;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn pixel_center(&self, width: usize, height: usize, col: usize, row: usize) -> Complex64 {
        let dx = (self.x_max - self.x_min) / width as f64;
        let dy = (self.y_max - self.y_min) / height as f64;
        Complex64::new(self.x_min + (col as f64 + 0.5) * dx, self.y_max - (row as f64 + 0.5) * dy)
    }

    /// Pixel containing `z`, if inside the window.
    pub fn pixel_of(&self, width: usize, height: usize, z: Complex64) -> Option<(usize, usize)> {
        let fx = (z.re - self.x_min) / (self.x_max - self.x_min);
        let fy = (self.y_max - z.im) / (self.y_max - self.y_min);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        Some(((fx * width as f64) as usize, (fy * height as f64) as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenderMode {
    /// Escape time for polynomials, density otherwise.
    Auto,
    Escape,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub mode: RenderMode,
    pub max_iter: u32,
    pub seed: u64,
    /// Cloud size for density mode; `None` uses four samples per pixel.
    pub samples: Option<usize>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            mode: RenderMode::Auto,
            max_iter: 256,
            seed: 0,
            samples: None,
        }
    }
}

/// 8-bit grayscale raster, row-major from the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

pub const MAX_PIXELS: u64 = 8192 * 8192;

/// Escape-time image (bounded pixels are 255, escaping pixels are shaded by
/// iteration count below 255) or an inverse-iteration density histogram.
pub fn render(map: &RationalMap, window: &Window, width: usize, height: usize, opts: &RenderOptions) -> Result<GrayImage> {
    let pixels = width as u64 * height as u64;
    if pixels > MAX_PIXELS {
        return Err(Error::BudgetExceeded {
            what: "image pixels",
            needed: pixels,
            limit: MAX_PIXELS,
        });
    }
    if pixels == 0 {
        return Ok(GrayImage {
            width,
            height,
            pixels: Vec::new(),
        });
    }
    let mode = match opts.mode {
        RenderMode::Auto if map.is_polynomial() => RenderMode::Escape,
        RenderMode::Auto => RenderMode::Density,
        m => m,
    };
    match mode {
        RenderMode::Escape => {
            if !map.is_polynomial() {
                return Err(Error::Precondition("escape-time rendering needs a polynomial map".into()));
            }
            let p = map.numerator().scale(map.denominator().coeff(0).inv());
            let radius = default_escape_radius(map);
            let rows: Vec<Vec<u8>> = (0..height)
                .into_par_iter()
                .map(|row| {
                    (0..width)
                        .map(|col| {
                            let z = window.pixel_center(width, height, col, row);
                            match escape_time(&p, z, opts.max_iter, radius) {
                                Escape::Bounded => 255,
                                Escape::Escapes { iterations } => (iterations as u64 * 254 / opts.max_iter.max(1) as u64) as u8,
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(GrayImage {
                width,
                height,
                pixels: rows.concat(),
            })
        }
        _ => {
            let samples = opts.samples.unwrap_or((pixels as usize).saturating_mul(4).min(4_000_000));
            let start = default_start(map)?;
            let cloud = sample_inverse_iteration(map, &start, DEFAULT_BURN_IN, samples, opts.seed)?;
            Ok(density_image(&cloud, window, width, height))
        }
    }
}

/// Log-scaled histogram of cloud points over the window.
pub fn density_image(cloud: &JuliaCloud, window: &Window, width: usize, height: usize) -> GrayImage {
    let mut counts = vec![0u32; width * height];
    for p in &cloud.points {
        if let Some(z) = p.finite() {
            if let Some((c, r)) = window.pixel_of(width, height, z) {
                counts[r * width + c] += 1;
            }
        }
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let pixels = if max == 0 {
        vec![0; width * height]
    } else {
        let lm = (1.0 + max as f64).ln();
        counts
            .iter()
            .map(|&n| {
                if n == 0 {
                    0
                } else {
                    (1.0 + 254.0 * (1.0 + n as f64).ln() / lm).round().min(255.0) as u8
                }
            })
            .collect()
    };
    GrayImage { width, height, pixels }
}
