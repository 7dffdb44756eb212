//! σ-anisotropic dyadic boxes in `Q_1 × [0, 1]`, `Q_1 = [-1/2, 1/2]^n`, and
//! the Calderón–Zygmund selection built on them.
//!
//! Every time interval produced by the subdivision rule has length `2^{-q}`
//! for an integer `q`, so boxes are stored as integer cell ranges and all
//! measures are exact cell counts on the indicator grid.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CzError {
    #[error("|A| = {fraction} |Q_1 x [0,1]| exceeds mu1 = {mu1}")]
    TooDense { fraction: f64, mu1: f64 },
    #[error("mu1 must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("order sigma must lie in (0, 2), got {0}")]
    BadOrder(f64),
    #[error("dimension {0} unsupported")]
    Dimension(usize),
}

/// Number of time pieces for a box of shape `tau`.
pub fn time_split(tau: f64) -> u32 {
    if tau < 2.0 {
        1
    } else if tau < 4.0 {
        2
    } else {
        4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicBox {
    /// Spatial generation: side `r = 2^{-generation}`.
    pub generation: u32,
    /// Time length `2^{-time_level}`.
    pub time_level: u32,
    /// Cube index in `[0, 2^generation)^n` (unused axes are 0).
    pub cube: [u32; 2],
    /// `t_0 = time_index · 2^{-time_level}`.
    pub time_index: u64,
    pub tau: f64,
    pub parent: Option<usize>,
}

impl DyadicBox {
    pub fn root() -> Self {
        DyadicBox {
            generation: 0,
            time_level: 0,
            cube: [0, 0],
            time_index: 0,
            tau: 1.0,
            parent: None,
        }
    }

    pub fn side(&self) -> f64 {
        0.5f64.powi(self.generation as i32)
    }

    pub fn center(&self, n: usize) -> Vec<f64> {
        let r = self.side();
        (0..n).map(|i| -0.5 + (self.cube[i] as f64 + 0.5) * r).collect()
    }

    pub fn t0(&self) -> f64 {
        self.time_index as f64 * self.length()
    }

    pub fn length(&self) -> f64 {
        0.5f64.powi(self.time_level as i32)
    }

    pub fn volume(&self, n: usize) -> f64 {
        self.side().powi(n as i32) * self.length()
    }

    /// True when `other` lies inside `self` (dyadic boxes nest or are disjoint).
    pub fn contains(&self, other: &DyadicBox, n: usize) -> bool {
        if other.generation < self.generation || other.time_level < self.time_level {
            return false;
        }
        let dg = other.generation - self.generation;
        let dq = other.time_level - self.time_level;
        (0..n).all(|i| other.cube[i] >> dg == self.cube[i]) && other.time_index >> dq == self.time_index
    }

    pub fn disjoint(&self, other: &DyadicBox, n: usize) -> bool {
        !self.contains(other, n) && !other.contains(self, n)
    }
}

/// `2^n` spatial halves crossed with `s ∈ {1, 2, 4}` time pieces; `τ' = 2^σ τ / s`.
pub fn subdivide(b: &DyadicBox, n: usize, sigma: f64, parent: Option<usize>) -> Vec<DyadicBox> {
    let s = time_split(b.tau);
    let ds = s.trailing_zeros();
    let tau = 2f64.powf(sigma) * b.tau / s as f64;
    let mut out = Vec::with_capacity((1 << n) * s as usize);
    for c in 0..(1u32 << n) {
        let mut cube = [0, 0];
        for (i, slot) in cube.iter_mut().enumerate().take(n) {
            *slot = 2 * b.cube[i] + ((c >> i) & 1);
        }
        for k in 0..s as u64 {
            out.push(DyadicBox {
                generation: b.generation + 1,
                time_level: b.time_level + ds,
                cube,
                time_index: (b.time_index << ds) + k,
                tau,
                parent,
            });
        }
    }
    out
}

/// Children of `b` lie inside it, are pairwise disjoint and fill it by
/// volume; shapes obey `len = r^σ τ'` with `τ' ∈ [1, 8]`.
pub fn children_partition(b: &DyadicBox, n: usize, sigma: f64) -> bool {
    let kids = subdivide(b, n, sigma, None);
    // volumes in units of the finest child cell: 2^{n dg} spatial x 2^{dq} temporal
    let k0 = &kids[0];
    let cells_per_parent = 1u64 << (n as u32 * (k0.generation - b.generation) + (k0.time_level - b.time_level));
    if kids.len() as u64 != cells_per_parent {
        return false;
    }
    kids.iter().enumerate().all(|(i, x)| {
        let shape = (x.side().powf(sigma) * x.tau - x.length()).abs() <= 1e-12 * x.length();
        shape
            && (1.0..=8.0).contains(&x.tau)
            && b.contains(x, n)
            && kids[i + 1..].iter().all(|y| x.disjoint(y, n))
    })
}

/// Time level of every box of spatial generation `g` (all boxes of one
/// generation share their shape).
pub fn time_level_at(sigma: f64, g: u32) -> u32 {
    let mut b = DyadicBox::root();
    for _ in 0..g {
        b = subdivide(&b, 1, sigma, None)[0];
    }
    b.time_level
}

/// Cells of side `2^{-space_levels}` in space and `2^{-time_levels}` in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub n: usize,
    pub space_levels: u32,
    pub time_levels: u32,
}

impl Resolution {
    /// Time resolution equal to the box length at the finest spatial
    /// generation, so the deepest boxes are single cells.
    pub fn for_sigma(n: usize, space_levels: u32, sigma: f64) -> Self {
        Resolution {
            n,
            space_levels,
            time_levels: time_level_at(sigma, space_levels),
        }
    }

    pub fn space_cells(&self) -> usize {
        1 << self.space_levels
    }

    pub fn time_cells(&self) -> usize {
        1 << self.time_levels
    }

    pub fn len(&self) -> usize {
        self.space_cells().pow(self.n as u32) * self.time_cells()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.space_cells(); self.n];
        d.push(self.time_cells());
        d
    }

    /// Cell range `[lo, hi)` per axis covered by `b`, or `None` below grid scale.
    pub fn cells_of(&self, b: &DyadicBox) -> Option<Vec<(usize, usize)>> {
        if b.generation > self.space_levels || b.time_level > self.time_levels {
            return None;
        }
        let ws = 1usize << (self.space_levels - b.generation);
        let wt = 1usize << (self.time_levels - b.time_level);
        let mut r: Vec<(usize, usize)> = (0..self.n)
            .map(|i| (b.cube[i] as usize * ws, (b.cube[i] as usize + 1) * ws))
            .collect();
        r.push((b.time_index as usize * wt, (b.time_index as usize + 1) * wt));
        Some(r)
    }
}

/// A discrete set `A ⊂ Q_1 × [0, 1]` with summed-area counts.
#[derive(Clone, Debug)]
pub struct Indicator {
    pub res: Resolution,
    pub cells: Vec<bool>,
    prefix: Vec<u32>,
}

impl Indicator {
    /// `cells` in row-major order with time fastest.
    pub fn new(res: Resolution, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), res.len());
        let dims: Vec<usize> = res.dims().iter().map(|d| d + 1).collect();
        let total: usize = dims.iter().product();
        let mut prefix = vec![0u32; total];
        let stride = strides(&dims);
        let inner = res.dims();
        let istride = strides(&inner);
        for (flat, &c) in cells.iter().enumerate() {
            let mut p = 0;
            let mut rem = flat;
            for (d, s) in istride.iter().enumerate() {
                p += (rem / s + 1) * stride[d];
                rem %= s;
            }
            prefix[p] = c as u32;
        }
        // running sums axis by axis
        for (d, &s) in stride.iter().enumerate() {
            for p in 0..total {
                if (p / s) % dims[d] > 0 {
                    prefix[p] += prefix[p - s];
                }
            }
        }
        Indicator { res, cells, prefix }
    }

    pub fn from_fn(res: Resolution, f: impl Fn(&[usize]) -> bool) -> Self {
        let inner = res.dims();
        let istride = strides(&inner);
        let cells = (0..res.len())
            .map(|flat| {
                let mut rem = flat;
                let idx: Vec<usize> = istride
                    .iter()
                    .map(|s| {
                        let v = rem / s;
                        rem %= s;
                        v
                    })
                    .collect();
                f(&idx)
            })
            .collect();
        Indicator::new(res, cells)
    }

    /// Union of random axis-aligned blocks plus scattered cells, filling
    /// roughly `fill` of the cells.
    pub fn random(rng: &mut impl Rng, res: Resolution, fill: f64) -> Self {
        let dims = res.dims();
        let istride = strides(&dims);
        let mut cells = vec![false; res.len()];
        let target = (fill * res.len() as f64) as usize;
        let mut count = 0;
        let mut guard = 0;
        while count < target && guard < 10_000 {
            guard += 1;
            if rng.gen_bool(0.3) {
                let flat = rng.gen_range(0..res.len());
                if !cells[flat] {
                    cells[flat] = true;
                    count += 1;
                }
                continue;
            }
            let ranges: Vec<(usize, usize)> = dims
                .iter()
                .map(|&d| {
                    let w = rng.gen_range(1..=(d / 4).max(1));
                    let lo = rng.gen_range(0..=d - w);
                    (lo, lo + w)
                })
                .collect();
            for_each_cell(&ranges, &istride, |flat| {
                if count < target && !cells[flat] {
                    cells[flat] = true;
                    count += 1;
                }
            });
        }
        Indicator::new(res, cells)
    }

    pub fn count(&self) -> usize {
        *self.prefix.last().unwrap_or(&0) as usize
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.res.len() as f64
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.res.cell_volume()
    }

    /// Cells of `A` inside the half-open cell ranges.
    pub fn count_in(&self, ranges: &[(usize, usize)]) -> usize {
        let dims: Vec<usize> = self.res.dims().iter().map(|d| d + 1).collect();
        let stride = strides(&dims);
        let d = ranges.len();
        let mut total: i64 = 0;
        for corner in 0..(1usize << d) {
            let mut p = 0;
            let mut sign = 1i64;
            for (a, &(lo, hi)) in ranges.iter().enumerate() {
                if corner >> a & 1 == 1 {
                    p += hi * stride[a];
                } else {
                    p += lo * stride[a];
                    sign = -sign;
                }
            }
            total += sign * self.prefix[p] as i64;
        }
        total as usize
    }

    pub fn count_box(&self, b: &DyadicBox) -> Option<usize> {
        self.res.cells_of(b).map(|r| self.count_in(&r))
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for d in (0..dims.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * dims[d + 1];
    }
    s
}

fn for_each_cell(ranges: &[(usize, usize)], stride: &[usize], mut f: impl FnMut(usize)) {
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|r| r.0 >= r.1) {
        return;
    }
    loop {
        f(idx.iter().zip(stride).map(|(i, s)| i * s).sum());
        let mut d = ranges.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < ranges[d].1 {
                break;
            }
            idx[d] = ranges[d].0;
        }
    }
}

/// Output of the selection: every visited box lives in `boxes`; parents are indices into it.
#[derive(Clone, Debug, Serialize)]
pub struct CzCover {
    pub n: usize,
    pub sigma: f64,
    pub mu1: f64,
    pub res: Resolution,
    pub boxes: Vec<DyadicBox>,
    pub selected: Vec<usize>,
    /// Distinct parents of selected boxes.
    pub predecessors: Vec<usize>,
    /// Cells of `A` in grid-scale boxes that could not be split further.
    pub unresolved_cells: usize,
}

/// Subdivide boxes capturing at most `μ₁` of `A`, select those capturing more.
pub fn cz_cover(a: &Indicator, sigma: f64, mu1: f64) -> Result<CzCover, CzError> {
    let n = a.res.n;
    if n != 1 && n != 2 {
        return Err(CzError::Dimension(n));
    }
    if !(mu1 > 0.0 && mu1 < 1.0) {
        return Err(CzError::BadFraction(mu1));
    }
    if !(sigma > 0.0 && sigma < 2.0) {
        return Err(CzError::BadOrder(sigma));
    }
    let frac = a.fraction();
    if frac > mu1 {
        return Err(CzError::TooDense { fraction: frac, mu1 });
    }
    let res = a.res;
    let mut boxes = vec![DyadicBox::root()];
    let mut selected = Vec::new();
    let mut unresolved = 0;
    let mut queue = vec![0usize];
    while let Some(id) = queue.pop() {
        let kids = subdivide(&boxes[id], n, sigma, Some(id));
        let fits = res.cells_of(&kids[0]).is_some();
        if !fits {
            let c = a.count_box(&boxes[id]).unwrap_or(0);
            unresolved += c;
            continue;
        }
        for k in kids {
            let cells = res.cells_of(&k).map(|r| r.iter().map(|(lo, hi)| hi - lo).product::<usize>());
            let hits = a.count_box(&k).unwrap_or(0);
            if hits == 0 {
                continue;
            }
            let kid = boxes.len();
            boxes.push(k);
            if hits as f64 > mu1 * cells.unwrap_or(1) as f64 {
                selected.push(kid);
            } else {
                queue.push(kid);
            }
        }
    }
    if unresolved > 0 {
        log::warn!("{unresolved} cells of A lie in grid-scale boxes below the selection threshold");
    }
    let mut predecessors: Vec<usize> = selected.iter().filter_map(|&j| boxes[j].parent).collect();
    predecessors.sort_unstable();
    predecessors.dedup();
    Ok(CzCover {
        n,
        sigma,
        mu1,
        res,
        boxes,
        selected,
        predecessors,
        unresolved_cells: unresolved,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CzCheck {
    pub tau_in_range: bool,
    pub disjoint: bool,
    /// `|A ∖ ∪K_j|` in cells.
    pub uncovered_cells: usize,
    pub min_selected_fraction: f64,
    pub max_predecessor_fraction: f64,
}

impl CzCheck {
    pub fn holds(&self, mu1: f64) -> bool {
        self.tau_in_range
            && self.disjoint
            && self.uncovered_cells == 0
            && (self.min_selected_fraction > mu1 || self.min_selected_fraction.is_infinite())
            && self.max_predecessor_fraction <= mu1
    }
}

fn fraction_in(a: &Indicator, b: &DyadicBox) -> f64 {
    let r = a.res.cells_of(b).expect("box above grid scale");
    let cells: usize = r.iter().map(|(lo, hi)| hi - lo).product();
    a.count_in(&r) as f64 / cells as f64
}

/// Mark the cells of each box; returns per-cell multiplicity.
fn paint(res: &Resolution, boxes: &[&DyadicBox]) -> Vec<u32> {
    let stride = strides(&res.dims());
    let mut cover = vec![0u32; res.len()];
    for b in boxes {
        if let Some(r) = res.cells_of(b) {
            for_each_cell(&r, &stride, |flat| cover[flat] += 1);
        }
    }
    cover
}

/// Check the three covering properties by direct cell counting.
pub fn verify_cover(a: &Indicator, cover: &CzCover) -> CzCheck {
    let n = cover.n;
    let tau_in_range = cover.boxes.iter().all(|b| (1.0..=8.0).contains(&b.tau));
    let sel: Vec<&DyadicBox> = cover.selected.iter().map(|&j| &cover.boxes[j]).collect();
    let mult = paint(&a.res, &sel);
    let disjoint = mult.iter().all(|&m| m <= 1)
        && sel
            .iter()
            .enumerate()
            .all(|(i, x)| sel[i + 1..].iter().all(|y| x.disjoint(y, n)));
    let uncovered_cells = a.cells.iter().zip(&mult).filter(|(&c, &m)| c && m == 0).count();
    let min_sel = sel.iter().map(|b| fraction_in(a, b)).fold(f64::INFINITY, f64::min);
    let max_pred = cover
        .predecessors
        .iter()
        .map(|&j| fraction_in(a, &cover.boxes[j]))
        .fold(0.0, f64::max);
    CzCheck {
        tau_in_range,
        disjoint,
        uncovered_cells,
        min_selected_fraction: min_sel,
        max_predecessor_fraction: max_pred,
    }
}

/// `K^m = Q × [t_0 + len, t_0 + (m+1) len]` over a base box.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Stack {
    pub base: DyadicBox,
    pub m: u32,
}

impl Stack {
    /// Time cell range `[lo, hi)` of the stack (may run past `t = 1`).
    pub fn time_cells(&self, res: &Resolution) -> (usize, usize) {
        let wt = 1usize << (res.time_levels - self.base.time_level);
        let start = (self.base.time_index as usize + 1) * wt;
        (start, start + self.m as usize * wt)
    }
}

/// Disjoint subfamily of the predecessors covering `A` in measure: coarsest
/// boxes first, dropping anything inside an already kept box.
pub fn thin_predecessors(cover: &CzCover) -> Vec<usize> {
    let n = cover.n;
    let mut order = cover.predecessors.clone();
    order.sort_by_key(|&j| (cover.boxes[j].generation, cover.boxes[j].time_level));
    let mut kept: Vec<usize> = Vec::new();
    for j in order {
        let b = &cover.boxes[j];
        if !kept.iter().any(|&k| cover.boxes[k].contains(b, n)) {
            kept.push(j);
        }
    }
    kept
}

#[derive(Clone, Debug, Serialize)]
pub struct StackBound {
    pub m: u32,
    pub a_measure: f64,
    /// `Σ |A ∩ K̃_j|` over the thinned predecessors.
    pub predecessor_mass: f64,
    pub union_measure: f64,
    /// `(m+1) μ₁ / m · |∪ (K̃_j)^m|`.
    pub bound: f64,
    pub holds: bool,
}

/// Both sides of `|A| ≤ (m+1)μ₁/m |∪(K̃_j)^m|`, counted on the grid.
pub fn stack_union_bound(a: &Indicator, cover: &CzCover, m: u32) -> StackBound {
    assert!(m >= 1);
    let res = a.res;
    let thinned = thin_predecessors(cover);
    let n = cover.n;
    let columns = res.space_cells().pow(n as u32);
    let mut intervals: Vec<Vec<(usize, usize)>> = vec![Vec::new(); columns];
    let mut pred_cells = 0usize;
    for &j in &thinned {
        let b = cover.boxes[j];
        let r = res.cells_of(&b).expect("predecessors lie above grid scale");
        pred_cells += a.count_in(&r);
        let span = Stack { base: b, m }.time_cells(&res);
        let sstride = strides(&vec![res.space_cells(); n]);
        for_each_cell(&r[..n], &sstride, |col| intervals[col].push(span));
    }
    let mut union_cells = 0usize;
    for iv in &mut intervals {
        iv.sort_unstable();
        let mut end = 0usize;
        for &(lo, hi) in iv.iter() {
            let lo = lo.max(end);
            if hi > lo {
                union_cells += hi - lo;
                end = hi;
            }
        }
    }
    let cv = res.cell_volume();
    let union_measure = union_cells as f64 * cv;
    let bound = (m as f64 + 1.0) * cover.mu1 / m as f64 * union_measure;
    let a_measure = a.measure();
    StackBound {
        m,
        a_measure,
        predecessor_mass: pred_cells as f64 * cv,
        union_measure,
        bound,
        holds: a_measure <= bound * (1.0 + 1e-12),
    }
}

#[derive(Serialize)]
struct BoxRecord {
    id: usize,
    parent: Option<usize>,
    center: Vec<f64>,
    r: f64,
    t0: f64,
    tau: f64,
    generation: u32,
    selected: bool,
}

/// The visited tree as a JSON array of box records.
pub fn export_json(cover: &CzCover) -> serde_json::Value {
    let mut sel = vec![false; cover.boxes.len()];
    for &j in &cover.selected {
        sel[j] = true;
    }
    let recs: Vec<BoxRecord> = cover
        .boxes
        .iter()
        .enumerate()
        .map(|(id, b)| BoxRecord {
            id,
            parent: b.parent,
            center: b.center(cover.n),
            r: b.side(),
            t0: b.t0(),
            tau: b.tau,
            generation: b.generation,
            selected: sel[id],
        })
        .collect();
    serde_json::to_value(recs).expect("box records serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn subdivision_shapes() {
        let mut b = DyadicBox::root();
        let kids = subdivide(&b, 1, 1.5, None);
        assert_eq!(kids.len(), 2);
        assert!((kids[0].tau - 2f64.powf(1.5)).abs() < 1e-12);
        b.tau = 3.0;
        let kids = subdivide(&b, 1, 1.5, None);
        assert_eq!(kids.len(), 4);
        assert!((kids[0].tau - 2f64.powf(1.5) * 1.5).abs() < 1e-12);
        b.tau = 6.0;
        let kids = subdivide(&b, 2, 1.99, None);
        assert_eq!(kids.len(), 16);
        assert!((kids[0].tau - 2f64.powf(1.99) * 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_set_selects_nothing() {
        let res = Resolution::for_sigma(1, 5, 1.3);
        let a = Indicator::new(res, vec![false; res.len()]);
        let c = cz_cover(&a, 1.3, 0.5).unwrap();
        assert!(c.selected.is_empty());
        assert!(verify_cover(&a, &c).holds(0.5));
    }

    #[test]
    fn full_set_is_too_dense() {
        let res = Resolution::for_sigma(1, 4, 1.3);
        let a = Indicator::new(res, vec![true; res.len()]);
        assert!(matches!(cz_cover(&a, 1.3, 0.9), Err(CzError::TooDense { .. })));
    }

    #[test]
    fn box_counts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2] {
            let res = Resolution {
                n,
                space_levels: 3,
                time_levels: 4,
            };
            let a = Indicator::random(&mut rng, res, 0.3);
            let dims = res.dims();
            let st = strides(&dims);
            for _ in 0..50 {
                let ranges: Vec<(usize, usize)> = dims
                    .iter()
                    .map(|&d| {
                        let lo = rng.gen_range(0..d);
                        (lo, rng.gen_range(lo + 1..=d))
                    })
                    .collect();
                let mut brute = 0;
                for_each_cell(&ranges, &st, |f| brute += a.cells[f] as usize);
                assert_eq!(a.count_in(&ranges), brute);
            }
        }
    }

    #[test]
    fn a_single_selected_box() {
        // one block filling a dyadic box of generation 2
        let res = Resolution::for_sigma(1, 4, 1.0);
        let target = {
            let mut b = DyadicBox::root();
            for _ in 0..2 {
                b = subdivide(&b, 1, 1.0, None)[0];
            }
            b
        };
        let r = res.cells_of(&target).unwrap();
        let a = Indicator::from_fn(res, |i| (r[0].0..r[0].1).contains(&i[0]) && (r[1].0..r[1].1).contains(&i[1]));
        let c = cz_cover(&a, 1.0, 0.5).unwrap();
        assert_eq!(c.selected.len(), 1);
        assert_eq!(c.boxes[c.selected[0]].generation, 2);
        let sb = stack_union_bound(&a, &c, 1);
        assert!(sb.holds);
    }

    fn tree_partitions(sigma: f64, n: usize, depth: u32) -> bool {
        let mut level = vec![DyadicBox::root()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for b in &level {
                let kids = subdivide(b, n, sigma, None);
                let vol: f64 = kids.iter().map(|k| k.volume(n)).sum();
                if (vol - b.volume(n)).abs() > 1e-15 * b.volume(n).max(1e-300) {
                    return false;
                }
                if !kids.iter().all(|k| b.contains(k, n)) {
                    return false;
                }
                for (i, x) in kids.iter().enumerate() {
                    if kids[i + 1..].iter().any(|y| !x.disjoint(y, n)) {
                        return false;
                    }
                    let expect = (x.side()).powf(sigma) * x.tau;
                    if (expect - x.length()).abs() > 1e-12 * x.length() || !(1.0..=8.0).contains(&x.tau) {
                        return false;
                    }
                }
                next.extend(kids);
            }
            // keep only a few to bound the cost
            next.truncate(64);
            level = next;
        }
        true
    }

    proptest! {
        #[test]
        fn children_partition_parent(sigma in 0.05f64..1.999, n in 1usize..=2) {
            prop_assert!(tree_partitions(sigma, n, 8));
        }

        #[test]
        fn covers_random_sets(seed in any::<u64>(), sigma in 0.3f64..1.99, mu1 in 0.2f64..0.9, n in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let res = Resolution::for_sigma(n, if n == 1 { 5 } else { 3 }, sigma);
            let fill = mu1 * rng.gen_range(0.1..1.0);
            let a = Indicator::random(&mut rng, res, fill);
            let c = cz_cover(&a, sigma, mu1).unwrap();
            let check = verify_cover(&a, &c);
            prop_assert!(check.holds(mu1), "{check:?}");
            for m in [2, 4, 8] {
                prop_assert!(stack_union_bound(&a, &c, m).holds);
            }
        }
    }
}
