//! The envelope value at a point as a linear program,
//! `min Σ λ_i v_i` subject to `Σ λ_i x_i = x`, `Σ λ_i = 1`, `λ ≥ 0`,
//! solved by enumerating basic feasible solutions (at most n+1 nonzero λ).

/// 1D: minimize over chords `(x_i, x_j)` straddling `x`.
pub fn envelope_1d(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..xs.len() {
        if (xs[i] - x).abs() < 1e-13 {
            best = best.min(vs[i]);
        }
        for j in 0..xs.len() {
            if xs[i] < x && xs[j] > x {
                let l = (xs[j] - x) / (xs[j] - xs[i]);
                best = best.min(l * vs[i] + (1.0 - l) * vs[j]);
            }
        }
    }
    best
}

/// 2D: minimize over vertices, segments and triangles containing `x`.
pub fn envelope_2d(ps: &[[f64; 2]], vs: &[f64], x: [f64; 2]) -> f64 {
    let n = ps.len();
    let mut best = f64::INFINITY;
    let eps = 1e-12;
    for i in 0..n {
        if (ps[i][0] - x[0]).abs() < eps && (ps[i][1] - x[1]).abs() < eps {
            best = best.min(vs[i]);
        }
        for j in (i + 1)..n {
            // segment through x
            let d = [ps[j][0] - ps[i][0], ps[j][1] - ps[i][1]];
            let w = [x[0] - ps[i][0], x[1] - ps[i][1]];
            let cross = d[0] * w[1] - d[1] * w[0];
            let len2 = d[0] * d[0] + d[1] * d[1];
            if cross.abs() <= eps * len2.sqrt() {
                let s = (d[0] * w[0] + d[1] * w[1]) / len2;
                if (-eps..=1.0 + eps).contains(&s) {
                    best = best.min((1.0 - s) * vs[i] + s * vs[j]);
                }
            }
            for k in (j + 1)..n {
                let a = ps[i];
                let b = ps[j];
                let c = ps[k];
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                if det.abs() < 1e-14 {
                    continue;
                }
                let l1 = ((b[0] - x[0]) * (c[1] - x[1]) - (c[0] - x[0]) * (b[1] - x[1])) / det;
                let l2 = ((c[0] - x[0]) * (a[1] - x[1]) - (a[0] - x[0]) * (c[1] - x[1])) / det;
                let l3 = 1.0 - l1 - l2;
                if l1 >= -eps && l2 >= -eps && l3 >= -eps {
                    best = best.min(l1 * vs[i] + l2 * vs[j] + l3 * vs[k]);
                }
            }
        }
    }
    best
}
