//! Simultaneous-iteration root finder that reports multiplicities.
//!
//! Roots come out of an Aberth–Ehrlich iteration. Approximations closer than
//! the clustering radius are merged; nearby clusters are then merged further
//! when the Taylor expansion at their common centroid vanishes to rounding
//! level up to the combined order. That second pass is what lets repeated
//! roots of order three or more, which Aberth only resolves to `eps^(1/m)`,
//! come back as a single root with the right multiplicity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use super::sphere::SpherePoint;
use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootTolerances {
    /// Roots closer than `cluster_radius·(1+|r|)` are one root.
    pub cluster_radius: f64,
    /// Accepted relative backward error `|p(r)| / Σ|a_j||r|^j` when the
    /// iteration budget runs out before every root is frozen.
    pub residual: f64,
    pub max_iterations: usize,
}

impl Default for RootTolerances {
    fn default() -> Self {
        RootTolerances {
            cluster_radius: 1e-6,
            residual: 1e-10,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

impl Root {
    pub fn point(&self) -> SpherePoint {
        SpherePoint::new(self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    /// Distinct roots in lexicographic (re, im) order.
    pub entries: Vec<Root>,
    /// `max |p(r)| / |lead(p)|` over the returned roots.
    pub residual_bound: f64,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|r| r.multiplicity).sum()
    }
}

/// All roots of `p` counted with multiplicity.
pub fn roots_with_multiplicity(p: &Polynomial, tol: &RootTolerances) -> Result<RootSet> {
    if p.is_zero() {
        return Err(Error::Precondition("root finding on the zero polynomial".into()));
    }
    let n = p.degree();
    if n == 0 {
        return Ok(RootSet {
            entries: Vec::new(),
            residual_bound: 0.0,
        });
    }

    // Exact zeros at the origin are split off before iterating.
    let zero_mult = p.coeffs().iter().take_while(|c| c.re == 0.0 && c.im == 0.0).count();
    let q = Polynomial::new(p.coeffs()[zero_mult..].to_vec());

    let approximations = match q.degree() {
        0 => Vec::new(),
        1 => vec![-q.coeff(0) / q.coeff(1)],
        2 => quadratic(q.coeff(2), q.coeff(1), q.coeff(0)),
        _ => aberth(&q, tol)?,
    };

    let mut clusters = single_linkage(&approximations, tol.cluster_radius);
    merge_flat_clusters(&q, &mut clusters);
    for cl in clusters.iter_mut() {
        cl.value = polish(&q, cl.value, cl.multiplicity);
    }

    let mut entries: Vec<Root> = clusters;
    if zero_mult > 0 {
        let radius = tol.cluster_radius;
        let mut m = zero_mult;
        entries.retain(|r| {
            if r.value.norm() <= radius {
                m += r.multiplicity;
                false
            } else {
                true
            }
        });
        entries.push(Root {
            value: Complex64::new(0.0, 0.0),
            multiplicity: m,
        });
    }
    entries.sort_by(|a, b| a.value.re.total_cmp(&b.value.re).then_with(|| a.value.im.total_cmp(&b.value.im)));

    let lead = p.leading().norm();
    let residual_bound = entries.iter().map(|r| p.eval(r.value).norm() / lead).fold(0.0, f64::max);

    debug_assert_eq!(entries.iter().map(|r| r.multiplicity).sum::<usize>(), n);
    Ok(RootSet { entries, residual_bound })
}

fn quadratic(a: Complex64, b: Complex64, c: Complex64) -> Vec<Complex64> {
    let disc = b * b - a * c * 4.0;
    let sq = disc.sqrt();
    let plus = b + sq;
    let minus = b - sq;
    let big = if plus.norm_sqr() >= minus.norm_sqr() { plus } else { minus };
    if big.norm_sqr() == 0.0 {
        // b = 0 and disc = 0, so c = 0: double root at the origin
        return vec![Complex64::new(0.0, 0.0); 2];
    }
    let qv = -big / 2.0;
    vec![qv / a, c / qv]
}

fn aberth(q: &Polynomial, tol: &RootTolerances) -> Result<Vec<Complex64>> {
    let n = q.degree();
    let dq = q.derivative();
    let lead = q.leading();
    let center = -q.coeff(n - 1) / (lead * n as f64);
    let mut r0 = (q.eval(center).norm() / lead.norm()).powf(1.0 / n as f64);
    if !(r0.is_finite() && r0 > 0.0) {
        r0 = 1.0;
    }
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            center + Complex64::from_polar(r0 * (1.0 + 1e-3 * k as f64 / n as f64), th)
        })
        .collect();
    let mut frozen = vec![false; n];
    let noise_factor = 8.0 * (n as f64) * EPS;

    for _ in 0..tol.max_iterations {
        let mut active = false;
        for i in 0..n {
            if frozen[i] {
                continue;
            }
            let zi = z[i];
            let pv = q.eval(zi);
            if pv.norm() <= noise_factor * q.eval_abs(zi.norm()) {
                frozen[i] = true;
                continue;
            }
            active = true;
            let dv = dq.eval(zi);
            let mut s = Complex64::new(0.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != i {
                    let diff = zi - zj;
                    if diff.norm_sqr() > 0.0 {
                        s += diff.inv();
                    }
                }
            }
            let denom = dv - pv * s;
            let w = if denom.norm_sqr() > 0.0 {
                pv / denom
            } else {
                Complex64::new(1e-8 * (1.0 + zi.norm()), 0.0)
            };
            let next = zi - w;
            if !(next.re.is_finite() && next.im.is_finite()) {
                continue;
            }
            z[i] = next;
            if w.norm() <= 4.0 * EPS * next.norm() {
                frozen[i] = true;
            }
        }
        if !active {
            return Ok(z);
        }
    }

    let worst = z
        .iter()
        .map(|&zi| q.eval(zi).norm() / q.eval_abs(zi.norm()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if worst <= tol.residual {
        Ok(z)
    } else {
        Err(Error::NonConvergence {
            iterations: tol.max_iterations,
            residual: worst,
        })
    }
}

fn single_linkage(points: &[Complex64], radius: f64) -> Vec<Root> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let r = radius * (1.0 + points[i].norm().max(points[j].norm()));
            if (points[i] - points[j]).norm() <= r {
                let a = find(&mut parent, i);
                let b = find(&mut parent, j);
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut sums: Vec<(Complex64, usize)> = vec![(Complex64::new(0.0, 0.0), 0); n];
    for (i, p) in points.iter().enumerate() {
        let r = find(&mut parent, i);
        sums[r].0 += p;
        sums[r].1 += 1;
    }
    sums.into_iter()
        .filter(|(_, m)| *m > 0)
        .map(|(s, m)| Root {
            value: s / m as f64,
            multiplicity: m,
        })
        .collect()
}

/// True when the Taylor coefficients of `q` at `c` vanish to rounding level
/// for every order below `m`.
fn locally_flat(q: &Polynomial, c: Complex64, m: usize) -> bool {
    let t = q.taylor_at(c);
    let s = q.taylor_abs_scale(c);
    let slack = 1e3 * (q.degree() as f64) * EPS;
    (0..m).all(|k| t[k].norm() <= slack * s[k])
}

fn merge_flat_clusters(q: &Polynomial, clusters: &mut Vec<Root>) {
    loop {
        let mut best: Option<(usize, Vec<usize>, Root)> = None;
        for i in 0..clusters.len() {
            let ci = clusters[i].value;
            let reach = 0.05 * (1.0 + ci.norm());
            let mut nbrs: Vec<usize> = (0..clusters.len())
                .filter(|&j| j != i && (clusters[j].value - ci).norm() <= reach)
                .collect();
            if nbrs.is_empty() {
                continue;
            }
            nbrs.sort_by(|&a, &b| (clusters[a].value - ci).norm().total_cmp(&(clusters[b].value - ci).norm()));
            let mut group = vec![i];
            for &j in &nbrs {
                group.push(j);
                let m: usize = group.iter().map(|&g| clusters[g].multiplicity).sum();
                let centroid = group
                    .iter()
                    .map(|&g| clusters[g].value * clusters[g].multiplicity as f64)
                    .sum::<Complex64>()
                    / m as f64;
                // the raw centroid of a frozen cluster is only eps^(1/m) accurate
                let c = polish(q, centroid, m);
                if (c - centroid).norm() > reach {
                    continue;
                }
                if locally_flat(q, c, m) {
                    // larger multiplicity wins when both readings are admissible
                    let better = best.as_ref().is_none_or(|(_, _, r)| m > r.multiplicity);
                    if better {
                        best = Some((i, group.clone(), Root { value: c, multiplicity: m }));
                    }
                }
            }
        }
        match best {
            None => return,
            Some((_, mut group, merged)) => {
                group.sort_unstable_by(|a, b| b.cmp(a));
                for g in group {
                    clusters.swap_remove(g);
                }
                clusters.push(merged);
            }
        }
    }
}

/// Newton refinement: on `q` for simple roots (in the `1/z` chart outside the
/// unit disc), on `q^{(m-1)}` for an `m`-fold root. Steps that do not reduce
/// the residual are rejected.
fn polish(q: &Polynomial, z: Complex64, m: usize) -> Complex64 {
    if m == 1 && z.norm() > 1.0 {
        let n = q.degree();
        let rev = q.reversed(n);
        let drev = rev.derivative();
        let mut u = z.inv();
        let mut res = rev.eval(u).norm();
        for _ in 0..3 {
            let d = drev.eval(u);
            if d.norm_sqr() == 0.0 {
                break;
            }
            let next = u - rev.eval(u) / d;
            let r = rev.eval(next).norm();
            if r < res && next.norm_sqr() > 0.0 {
                u = next;
                res = r;
            } else {
                break;
            }
        }
        return u.inv();
    }
    let mut f = q.clone();
    for _ in 1..m {
        f = f.derivative();
    }
    let df = f.derivative();
    let mut z = z;
    let mut res = f.eval(z).norm();
    for _ in 0..3 {
        let d = df.eval(z);
        if d.norm_sqr() == 0.0 {
            break;
        }
        let next = z - f.eval(z) / d;
        let r = f.eval(next).norm();
        if r < res {
            z = next;
            res = r;
        } else {
            break;
        }
    }
    z
}
