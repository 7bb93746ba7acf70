use super::sphere::SpherePoint;

/// Static k-d tree over sphere points embedded in R³, so Euclidean distance
/// is chordal distance.
#[derive(Debug, Clone)]
pub struct PointIndex {
    coords: Vec<[f64; 3]>,
    // node layout: implicit balanced tree over `order`
    order: Vec<usize>,
}

impl PointIndex {
    pub fn new(points: &[SpherePoint]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| p.to_unit_sphere()).collect();
        let mut order: Vec<usize> = (0..coords.len()).collect();
        build(&coords, &mut order, 0);
        PointIndex { coords, order }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Index of and chordal distance to the nearest indexed point.
    pub fn nearest(&self, p: &SpherePoint) -> Option<(usize, f64)> {
        if self.coords.is_empty() {
            return None;
        }
        let q = p.to_unit_sphere();
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(&q, 0, self.order.len(), 0, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    pub fn distance(&self, p: &SpherePoint) -> f64 {
        self.nearest(p).map(|(_, d)| d).unwrap_or(f64::INFINITY)
    }

    /// Indices of all points within chordal distance `r` of `p`.
    pub fn within(&self, p: &SpherePoint, r: f64) -> Vec<usize> {
        let q = p.to_unit_sphere();
        let mut out = Vec::new();
        self.collect(&q, r * r, 0, self.order.len(), 0, &mut out);
        out
    }

    fn search(&self, q: &[f64; 3], lo: usize, hi: usize, axis: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let c = &self.coords[idx];
        let d2 = dist2(c, q);
        if d2 < best.1 {
            *best = (idx, d2);
        }
        let diff = q[axis] - c[axis];
        let next = (axis + 1) % 3;
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, next, best);
        if diff * diff < best.1 {
            self.search(q, far.0, far.1, next, best);
        }
    }

    fn collect(&self, q: &[f64; 3], r2: f64, lo: usize, hi: usize, axis: usize, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let c = &self.coords[idx];
        if dist2(c, q) <= r2 {
            out.push(idx);
        }
        let diff = q[axis] - c[axis];
        let next = (axis + 1) % 3;
        if diff < 0.0 || diff * diff <= r2 {
            self.collect(q, r2, lo, mid, next, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.collect(q, r2, mid + 1, hi, next, out);
        }
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn build(coords: &[[f64; 3]], order: &mut [usize], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| coords[a][axis].total_cmp(&coords[b][axis]));
    let (left, right) = order.split_at_mut(mid);
    build(coords, left, (axis + 1) % 3);
    build(coords, &mut right[1..], (axis + 1) % 3);
}
