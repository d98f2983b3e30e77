use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on [-L, L]^dims with an odd number of points per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: usize,
    pub n: usize,
    pub half_width: f64,
    pub spacing: f64,
}

impl Grid {
    pub fn new(dims: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if dims == 0 || !(half_width > 0.0) || !(spacing > 0.0) {
            return Err(Error::Config("grid needs dims >= 1, L > 0, h > 0".into()));
        }
        let steps = 2.0 * half_width / spacing;
        let r = steps.round();
        if (steps - r).abs() > 1e-9 * steps.max(1.0) || (r as usize) % 2 != 0 || r < 4.0 {
            return Err(Error::Config(format!("2L/h = {steps} must be an even integer >= 4")));
        }
        let n = r as usize + 1;
        if n.pow(dims as u32) > 1 << 22 {
            return Err(Error::Config("grid too large".into()));
        }
        Ok(Grid { dims, n, half_width, spacing })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dims];
        for a in (0..self.dims).rev() {
            m[a] = idx % self.n;
            idx /= self.n;
        }
        m
    }

    pub fn index(&self, m: &[usize]) -> usize {
        m.iter().fold(0, |acc, &v| acc * self.n + v)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi(idx).into_iter().map(|i| self.coord(i)).collect()
    }

    pub fn base_index(&self) -> usize {
        self.index(&vec![self.n / 2; self.dims])
    }

    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut m = self.multi(idx);
        let v = m[axis] as isize + offset;
        if v < 0 || v >= self.n as isize {
            return None;
        }
        m[axis] = v as usize;
        Some(self.index(&m))
    }

    /// The grid with half the spacing on the same box.
    pub fn refined(&self) -> Self {
        Grid { dims: self.dims, n: 2 * self.n - 1, half_width: self.half_width, spacing: self.spacing / 2.0 }
    }
}

/// Largest 4-connected (2r-neighbour) set of `valid` points containing `start`.
pub fn connected_component(grid: &Grid, valid: &[bool], start: usize) -> Vec<bool> {
    let mut keep = vec![false; valid.len()];
    if !valid[start] {
        return keep;
    }
    let mut stack = vec![start];
    keep[start] = true;
    while let Some(p) = stack.pop() {
        for axis in 0..grid.dims {
            for off in [-1isize, 1] {
                if let Some(q) = grid.neighbor(p, axis, off) {
                    if valid[q] && !keep[q] {
                        keep[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
    }
    keep
}
