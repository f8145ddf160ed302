//! Finite-difference weights for first derivatives on arbitrary grids.

/// Weights `w` such that `f'(x0) ≈ Σ w_k f(xs[k])`, exact for polynomials of
/// degree `< xs.len()`. Fornberg's recursion, first derivative only.
pub fn derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n >= 2, "need at least two nodes for a derivative");
    // c[k][d]: weight of node k for derivative order d (d = 0, 1).
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for d in (1..=mn).rev() {
                    c[i][d] = c1 * (d as f64 * c[i - 1][d - 1] - c5 * c[i - 1][d]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for d in (1..=mn).rev() {
                c[j][d] = (c4 * c[j][d] - d as f64 * c[j][d - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// Index window of `points` consecutive samples used to differentiate at
/// sample `j` of a grid with `len` samples: centered when possible, shifted
/// inward at the ends. Even widths lean forward (two points give the forward
/// difference, and the backward one at the last sample).
pub fn window(j: usize, len: usize, points: usize) -> std::ops::Range<usize> {
    let points = points.min(len);
    let start = j.saturating_sub((points - 1) / 2).min(len - points);
    start..start + points
}

/// Differentiation stencil at sample `j`: the window and its weights.
pub fn stencil_at(times: &[f64], j: usize, points: usize) -> (std::ops::Range<usize>, Vec<f64>) {
    let range = window(j, times.len(), points);
    let w = derivative_weights(times[j], &times[range.clone()]);
    (range, w)
}
