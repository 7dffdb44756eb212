//! Lower convex hulls of graph point sets: monotone chain in 1D, an
//! incremental 3D hull in 2D.

use crate::grid::Point;
use std::collections::HashMap;

/// Convex envelope of a finite point set `(x_i, v_i)`, i.e. the largest convex
/// function below the data on the convex hull of the `x_i`.
#[derive(Clone, Debug)]
pub enum SliceHull {
    /// Hull vertices sorted by abscissa.
    OneD { xs: Vec<f64>, vs: Vec<f64> },
    TwoD(LowerHull2d),
}

impl SliceHull {
    pub fn build(n: usize, points: &[Point], values: &[f64]) -> Self {
        assert_eq!(points.len(), values.len());
        if n == 1 {
            let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
            let (xs, vs) = lower_chain(&xs, values);
            SliceHull::OneD { xs, vs }
        } else {
            SliceHull::TwoD(LowerHull2d::build(points, values))
        }
    }

    /// Envelope value; `+∞` outside the hull of the abscissae.
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            SliceHull::OneD { xs, vs } => chain_value(xs, vs, x[0]),
            SliceHull::TwoD(h) => h.value(x),
        }
    }

    /// Extreme points of the subdifferential at `x` (two slopes at a 1D
    /// vertex, the incident facet gradients in 2D).
    pub fn subgradients(&self, x: &Point) -> Vec<Point> {
        match self {
            SliceHull::OneD { xs, vs } => chain_subgradients(xs, vs, x[0])
                .into_iter()
                .map(|p| [p, 0.0])
                .collect(),
            SliceHull::TwoD(h) => h.subgradients(x),
        }
    }
}

/// Lower hull by Andrew's monotone chain. Duplicated abscissae keep the lower value.
pub fn lower_chain(xs: &[f64], vs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(vs[a].total_cmp(&vs[b])));
    let mut hx: Vec<f64> = Vec::new();
    let mut hv: Vec<f64> = Vec::new();
    for i in idx {
        let (x, v) = (xs[i], vs[i]);
        if let Some(&last) = hx.last() {
            if x == last {
                continue;
            }
        }
        while hx.len() >= 2 {
            let k = hx.len();
            let (x1, v1, x2, v2) = (hx[k - 2], hv[k - 2], hx[k - 1], hv[k - 1]);
            // drop the middle point unless it lies strictly below the chord
            if (v2 - v1) * (x - x1) >= (v - v1) * (x2 - x1) {
                hx.pop();
                hv.pop();
            } else {
                break;
            }
        }
        hx.push(x);
        hv.push(v);
    }
    (hx, hv)
}

fn chain_segment(xs: &[f64], x: f64) -> Option<usize> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let k = xs.partition_point(|&a| a <= x);
    Some(k.clamp(1, xs.len().max(2) - 1) - 1)
}

fn chain_value(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    if xs.len() == 1 {
        return if x == xs[0] { vs[0] } else { f64::INFINITY };
    }
    match chain_segment(xs, x) {
        None => f64::INFINITY,
        Some(i) => {
            let l = (x - xs[i]) / (xs[i + 1] - xs[i]);
            (1.0 - l) * vs[i] + l * vs[i + 1]
        }
    }
}

fn chain_subgradients(xs: &[f64], vs: &[f64], x: f64) -> Vec<f64> {
    let slope = |i: usize| (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i]);
    let k = xs.len();
    if k < 2 {
        return vec![];
    }
    let tol = 1e-12 * (1.0 + x.abs());
    if let Some(j) = xs.iter().position(|&a| (a - x).abs() <= tol) {
        let mut out = Vec::new();
        if j > 0 {
            out.push(slope(j - 1));
        }
        if j + 1 < k {
            out.push(slope(j));
        }
        return out;
    }
    match chain_segment(xs, x) {
        Some(i) => vec![slope(i)],
        None => vec![],
    }
}

#[derive(Clone, Copy, Debug)]
struct Facet {
    v: [usize; 3],
    normal: [f64; 3],
    alive: bool,
}

/// Downward-facing facets of the 3D hull of `(x, y, v)`, with planar
/// interpolation from the unperturbed values.
#[derive(Clone, Debug)]
pub struct LowerHull2d {
    points: Vec<Point>,
    values: Vec<f64>,
    tris: Vec<[usize; 3]>,
    gradients: Vec<Point>,
    buckets: Buckets,
}

#[derive(Clone, Debug)]
struct Buckets {
    lo: Point,
    size: f64,
    side: usize,
    cells: Vec<Vec<u32>>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Deterministic value in `[0, 1)` from an index (splitmix64).
fn jitter(i: usize) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

impl LowerHull2d {
    pub fn build(points: &[Point], values: &[f64]) -> Self {
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        // Grid data is massively degenerate (coplanar plateaus); a tiny
        // perturbation of the heights fixes the combinatorics only.
        let eps = 1e-10 * scale;
        let p: Vec<[f64; 3]> = points
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (x, v))| [x[0], x[1], v + eps * jitter(i)])
            .collect();
        let facets = hull3d(&p);
        let mut tris = Vec::new();
        let mut gradients = Vec::new();
        for f in facets.iter().filter(|f| f.alive) {
            let len = dot(f.normal, f.normal).sqrt();
            if f.normal[2] < -1e-9 * len {
                let [a, b, c] = f.v;
                tris.push([a, b, c]);
                gradients.push(plane_gradient(
                    [points[a], points[b], points[c]],
                    [values[a], values[b], values[c]],
                ));
            }
        }
        let buckets = Buckets::new(points, &tris);
        LowerHull2d {
            points: points.to_vec(),
            values: values.to_vec(),
            tris,
            gradients,
            buckets,
        }
    }

    pub fn facet_count(&self) -> usize {
        self.tris.len()
    }

    fn barycentric(&self, t: usize, x: &Point) -> [f64; 3] {
        let [a, b, c] = self.tris[t];
        let (pa, pb, pc) = (self.points[a], self.points[b], self.points[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((pb[0] - x[0]) * (pc[1] - x[1]) - (pc[0] - x[0]) * (pb[1] - x[1])) / det;
        let l2 = ((pc[0] - x[0]) * (pa[1] - x[1]) - (pa[0] - x[0]) * (pc[1] - x[1])) / det;
        [l1, l2, 1.0 - l1 - l2]
    }

    fn containing(&self, x: &Point) -> Vec<(usize, [f64; 3])> {
        let mut out = Vec::new();
        for &t in self.buckets.at(x) {
            let l = self.barycentric(t as usize, x);
            if l.iter().all(|&v| v >= -1e-10) {
                out.push((t as usize, l));
            }
        }
        out
    }

    pub fn value(&self, x: &Point) -> f64 {
        let hits = self.containing(x);
        if hits.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::NEG_INFINITY;
        for (t, l) in hits {
            let [a, b, c] = self.tris[t];
            let v = l[0] * self.values[a] + l[1] * self.values[b] + l[2] * self.values[c];
            best = best.max(v);
        }
        best
    }

    pub fn subgradients(&self, x: &Point) -> Vec<Point> {
        self.containing(x)
            .into_iter()
            .map(|(t, _)| self.gradients[t])
            .collect()
    }
}

fn plane_gradient(p: [Point; 3], v: [f64; 3]) -> Point {
    let (d1, d2) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
    let (e1, e2) = (v[1] - v[0], v[2] - v[0]);
    let det = d1[0] * d2[1] - d1[1] * d2[0];
    [(e1 * d2[1] - e2 * d1[1]) / det, (d1[0] * e2 - d2[0] * e1) / det]
}

impl Buckets {
    fn new(points: &[Point], tris: &[[usize; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let side = ((tris.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let size = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / side as f64).max(1e-12);
        let mut cells = vec![Vec::new(); side * side];
        for (t, tri) in tris.iter().enumerate() {
            let mut blo = [f64::INFINITY; 2];
            let mut bhi = [f64::NEG_INFINITY; 2];
            for &v in tri {
                for k in 0..2 {
                    blo[k] = blo[k].min(points[v][k]);
                    bhi[k] = bhi[k].max(points[v][k]);
                }
            }
            let cell = |v: f64, k: usize| (((v - lo[k]) / size).floor().max(0.0) as usize).min(side - 1);
            for i in cell(blo[0] - 1e-9, 0)..=cell(bhi[0] + 1e-9, 0) {
                for j in cell(blo[1] - 1e-9, 1)..=cell(bhi[1] + 1e-9, 1) {
                    cells[i * side + j].push(t as u32);
                }
            }
        }
        Buckets { lo, size, side, cells }
    }

    fn at(&self, x: &Point) -> &[u32] {
        let lim = self.side as f64 + 1e-6;
        let i = (x[0] - self.lo[0]) / self.size;
        let j = (x[1] - self.lo[1]) / self.size;
        if !(-1e-6..lim).contains(&i) || !(-1e-6..lim).contains(&j) {
            return &[];
        }
        let (i, j) = ((i.max(0.0) as usize).min(self.side - 1), (j.max(0.0) as usize).min(self.side - 1));
        &self.cells[i * self.side + j]
    }
}

/// Incremental convex hull in 3D with outward normals. Assumes general
/// position (callers perturb their data).
fn hull3d(p: &[[f64; 3]]) -> Vec<Facet> {
    let n = p.len();
    assert!(n >= 4, "need at least four points");
    // initial tetrahedron from extreme points
    let i0 = 0;
    let far = |from: &dyn Fn(usize) -> f64| (0..n).max_by(|&a, &b| from(a).total_cmp(&from(b))).unwrap();
    let i1 = far(&|i| {
        let d = sub(p[i], p[i0]);
        dot(d, d)
    });
    let i2 = far(&|i| {
        let c = cross(sub(p[i1], p[i0]), sub(p[i], p[i0]));
        dot(c, c)
    });
    let i3 = far(&|i| {
        let nrm = cross(sub(p[i1], p[i0]), sub(p[i2], p[i0]));
        dot(nrm, sub(p[i], p[i0])).abs()
    });
    let mut facets: Vec<Facet> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let centroid = {
        let mut c = [0.0; 3];
        for &i in &[i0, i1, i2, i3] {
            for k in 0..3 {
                c[k] += 0.25 * p[i][k];
            }
        }
        c
    };
    let add = |facets: &mut Vec<Facet>, edges: &mut HashMap<(usize, usize), usize>, mut v: [usize; 3]| {
        let mut normal = cross(sub(p[v[1]], p[v[0]]), sub(p[v[2]], p[v[0]]));
        if dot(normal, sub(centroid, p[v[0]])) > 0.0 {
            v.swap(1, 2);
            normal = [-normal[0], -normal[1], -normal[2]];
        }
        let id = facets.len();
        facets.push(Facet { v, normal, alive: true });
        for k in 0..3 {
            edges.insert((v[k], v[(k + 1) % 3]), id);
        }
    };
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        add(&mut facets, &mut edges, tri);
    }
    let used = [i0, i1, i2, i3];
    let mut visible: Vec<usize> = Vec::new();
    let mut is_visible: Vec<bool> = Vec::new();
    for q in 0..n {
        if used.contains(&q) {
            continue;
        }
        visible.clear();
        is_visible.resize(facets.len(), false);
        for (id, f) in facets.iter().enumerate() {
            if f.alive && dot(f.normal, sub(p[q], p[f.v[0]])) > 0.0 {
                visible.push(id);
                is_visible[id] = true;
            }
        }
        if visible.is_empty() {
            continue;
        }
        let mut horizon = Vec::new();
        for &id in &visible {
            let v = facets[id].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                match edges.get(&(b, a)) {
                    Some(&other) if is_visible[other] => {}
                    _ => horizon.push((a, b)),
                }
            }
        }
        for &id in &visible {
            facets[id].alive = false;
            is_visible[id] = false;
            let v = facets[id].v;
            for k in 0..3 {
                let e = (v[k], v[(k + 1) % 3]);
                if edges.get(&e) == Some(&id) {
                    edges.remove(&e);
                }
            }
        }
        for (a, b) in horizon {
            let v = [a, b, q];
            let normal = cross(sub(p[b], p[a]), sub(p[q], p[a]));
            let id = facets.len();
            facets.push(Facet { v, normal, alive: true });
            for k in 0..3 {
                edges.insert((v[k], v[(k + 1) % 3]), id);
            }
        }
    }
    facets
}
