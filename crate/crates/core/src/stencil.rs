//! Finite-difference weights on masked grids.

use crate::grid::Grid;

/// Fornberg weights for the m-th derivative at 0 on integer offsets.
pub fn fornberg(offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// A derivative stencil: (grid index, weight) pairs, weights already divided
/// by h^order; `central` marks the full-width symmetric stencil.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub terms: Vec<(usize, f64)>,
    pub central: bool,
}

/// Five-point (fourth order) stencil along `axis`, shifted near holes and
/// edges, falling back to three points when fewer are available.
pub fn stencil(grid: &Grid, valid: &[bool], idx: usize, axis: usize, order: usize) -> Option<Stencil> {
    stencil_width(grid, valid, idx, axis, order, 5)
}

/// As [`stencil`] with an odd nominal width; narrower odd widths are used
/// when the valid run through `idx` is too short.
pub fn stencil_width(grid: &Grid, valid: &[bool], idx: usize, axis: usize, order: usize, width: usize) -> Option<Stencil> {
    assert!(width >= 3 && width % 2 == 1, "stencil width must be odd and at least 3");
    if !valid[idx] {
        return None;
    }
    let max_reach = width - 1;
    let reach = |dir: isize| {
        let mut k = 0;
        while k < max_reach {
            match grid.neighbor(idx, axis, dir * (k as isize + 1)) {
                Some(q) if valid[q] => k += 1,
                _ => break,
            }
        }
        k
    };
    let lo = reach(-1);
    let hi = reach(1);
    let mut w = width;
    while lo + hi < w - 1 {
        if w <= 3 {
            return None;
        }
        w -= 2;
    }
    let half = (w / 2) as isize;
    let start = (-half).max(-(lo as isize)).min(hi as isize - (w as isize - 1));
    let offsets: Vec<isize> = (start..start + w as isize).collect();
    let weights = fornberg(&offsets.iter().map(|&o| o as f64).collect::<Vec<_>>(), order);
    let scale = grid.spacing.powi(order as i32);
    let terms = offsets
        .iter()
        .zip(weights)
        .map(|(&o, wi)| (grid.neighbor(idx, axis, o).unwrap(), wi / scale))
        .collect();
    Some(Stencil { terms, central: w == width && start == -half })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_weights() {
        let w = fornberg(&[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let w2 = fornberg(&[-1.0, 0.0, 1.0], 2);
        assert!((w2[0] - 1.0).abs() < 1e-14 && (w2[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn shifted_stencil_is_fourth_order() {
        let g = Grid::new(1, 1.0, 0.125).unwrap();
        let valid = vec![true; g.len()];
        let f = |x: f64| (1.3 * x).sin();
        for idx in [0, 1, 8, 15, 16] {
            let s = stencil(&g, &valid, idx, 0, 1).unwrap();
            let d: f64 = s.terms.iter().map(|&(q, w)| w * f(g.coord(q))).sum();
            let x = g.coord(idx);
            assert!((d - 1.3 * (1.3 * x).cos()).abs() < 2e-4, "idx {idx}");
        }
    }

    #[test]
    fn seven_point_is_sixth_order() {
        let f = |x: f64| (1.3 * x).sin();
        let mut errs = Vec::new();
        for h in [0.125, 0.0625] {
            let g = Grid::new(1, 1.0, h).unwrap();
            let valid = vec![true; g.len()];
            let idx = g.base_index();
            let s = stencil_width(&g, &valid, idx, 0, 1, 7).unwrap();
            assert!(s.central && s.terms.len() == 7);
            let d: f64 = s.terms.iter().map(|&(q, w)| w * f(g.coord(q))).sum();
            errs.push((d - 1.3).abs());
        }
        assert!(errs[0] / errs[1] > 50.0, "{errs:?}");
        let g = Grid::new(1, 1.0, 0.125).unwrap();
        let s = stencil_width(&g, &vec![true; g.len()], 0, 0, 1, 7).unwrap();
        assert!(!s.central && s.terms.len() == 7);
    }
}
