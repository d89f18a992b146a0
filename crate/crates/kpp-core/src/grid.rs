//! Uniform truncation grids for the traveling-wave coordinate.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid endpoints must satisfy left < right, got [{left}, {right}]")]
    EmptyInterval { left: f64, right: f64 },
    #[error("grid needs at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("grid endpoints must be finite")]
    NonFinite,
}

/// Uniform grid on `[left, right]` with `n` nodes, spacing `h = (right-left)/(n-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    left: f64,
    right: f64,
    n: usize,
}

impl Grid {
    pub fn new(left: f64, right: f64, n: usize) -> Result<Self, GridError> {
        if !left.is_finite() || !right.is_finite() {
            return Err(GridError::NonFinite);
        }
        if left >= right {
            return Err(GridError::EmptyInterval { left, right });
        }
        if n < 2 {
            return Err(GridError::TooFewNodes { needed: 2, got: n });
        }
        Ok(Grid { left, right, n })
    }

    /// Grid with spacing as close to `h_target` as the integer node count allows.
    pub fn with_spacing(left: f64, right: f64, h_target: f64) -> Result<Self, GridError> {
        if !h_target.is_finite() || h_target <= 0.0 {
            return Err(GridError::NonFinite);
        }
        let n = ((right - left) / h_target).round() as usize + 1;
        Self::new(left, right, n.max(2))
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.right - self.left) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.left + i as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Index of the last node `<= y`, clamped into `[0, n-2]` so that
    /// `node(i) <= y < node(i+1)` holds for interior `y`.
    pub fn bracket(&self, y: f64) -> usize {
        let raw = ((y - self.left) / self.h()).floor();
        (raw.max(0.0) as usize).min(self.n - 2)
    }

    /// Translate every node by `shift` (used when aligning profiles).
    pub fn translated(&self, shift: f64) -> Grid {
        Grid {
            left: self.left + shift,
            right: self.right + shift,
            n: self.n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_nodes() {
        let g = Grid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.h(), 0.5);
        let ys: Vec<f64> = g.nodes().collect();
        assert_eq!(ys, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn with_spacing_rounds_to_node_count() {
        let g = Grid::with_spacing(-100.0, 400.0, 0.05).unwrap();
        assert_eq!(g.n(), 10001);
        assert!((g.h() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Grid::new(1.0, 1.0, 5).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert!(Grid::new(f64::NAN, 1.0, 5).is_err());
    }

    #[test]
    fn bracket_clamps() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.bracket(-5.0), 0);
        assert_eq!(g.bracket(0.55), 5);
        assert_eq!(g.bracket(5.0), 9);
    }
}
