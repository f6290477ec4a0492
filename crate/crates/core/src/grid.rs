use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Largest grid the estimators will classify.
pub const MAX_GRID_CELLS: usize = 4_000_000;
pub const MAX_GRID_DIM: usize = 3;

/// Axis-aligned search box, one `[lo, hi]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchBox {
    pub bounds: Vec<[f64; 2]>,
}

impl SearchBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::invalid("search box needs at least one axis"));
        }
        for [lo, hi] in &bounds {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid(format!("bad box axis [{lo}, {hi}]")));
            }
        }
        Ok(SearchBox { bounds })
    }

    /// The same interval on every axis.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        SearchBox::new(vec![[lo, hi]; dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }
}

/// Regular grid over a box. Cells are stored row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bounds: SearchBox,
    step: f64,
    axes: Vec<Vec<f64>>,
}

fn axis_values(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // Boxes whose ends are multiples of the step get exact multiples
    // (so 0 and 0.5 land on the grid exactly).
    let base = (lo / step).round();
    let aligned = (base * step - lo).abs() <= 1e-9 * step;
    (0..count)
        .map(|i| {
            if aligned {
                (base + i as f64) * step
            } else {
                lo + i as f64 * step
            }
        })
        .collect()
}

impl Grid {
    pub fn new(bounds: &SearchBox, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid(format!("grid step must be > 0, got {step}")));
        }
        if bounds.dim() > MAX_GRID_DIM {
            return Err(Error::invalid(format!(
                "grids are limited to {MAX_GRID_DIM} dimensions"
            )));
        }
        let axes: Vec<Vec<f64>> = bounds
            .bounds
            .iter()
            .map(|&[lo, hi]| axis_values(lo, hi, step))
            .collect();
        let cells = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
        match cells {
            Some(c) if c <= MAX_GRID_CELLS => {}
            _ => return Err(Error::invalid("grid too large; increase the step")),
        }
        Ok(Grid {
            bounds: bounds.clone(),
            step,
            axes,
        })
    }

    pub fn bounds(&self) -> &SearchBox {
        &self.bounds
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % axis.len();
            flat /= axis.len();
        }
        idx
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn point(&self, flat: usize) -> Point {
        let idx = self.unflatten(flat);
        Point::from_vec_unchecked(idx.iter().zip(&self.axes).map(|(&i, a)| a[i]).collect())
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Axis neighbours (at most `2 * dim`).
    pub fn neighbors(&self, flat: usize) -> Vec<usize> {
        let idx = self.unflatten(flat);
        let mut out = Vec::with_capacity(2 * idx.len());
        for k in 0..idx.len() {
            let mut probe = idx.clone();
            if idx[k] > 0 {
                probe[k] = idx[k] - 1;
                out.push(self.flatten(&probe));
            }
            if idx[k] + 1 < self.axes[k].len() {
                probe[k] = idx[k] + 1;
                out.push(self.flatten(&probe));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_axes_hit_exact_multiples() {
        let g = Grid::new(&SearchBox::cube(-2.0, 2.0, 1).unwrap(), 0.01).unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!(g.point(200)[0], 0.0);
        assert_eq!(g.point(250)[0], 0.5);
        assert_eq!(g.point(150)[0], -0.5);
        assert_eq!(g.point(400)[0], 2.0);
    }

    #[test]
    fn row_major_and_neighbors() {
        let g = Grid::new(&SearchBox::new(vec![[0.0, 1.0], [0.0, 2.0]]).unwrap(), 1.0).unwrap();
        assert_eq!(g.shape(), vec![2, 3]);
        assert_eq!(g.point(4).coords(), &[1.0, 1.0]);
        let mut n = g.neighbors(4);
        n.sort();
        assert_eq!(n, vec![1, 3, 5]);
        assert_eq!(g.neighbors(0), vec![3, 1]);
    }

    #[test]
    fn rejects_bad_grids() {
        let b = SearchBox::cube(-1.0, 1.0, 1).unwrap();
        assert!(Grid::new(&b, 0.0).is_err());
        assert!(Grid::new(&SearchBox::cube(-1.0, 1.0, 4).unwrap(), 0.5).is_err());
        assert!(SearchBox::new(vec![[1.0, 0.0]]).is_err());
        assert!(Grid::new(&SearchBox::cube(-1e6, 1e6, 3).unwrap(), 0.01).is_err());
    }
}
