//! The square search lattice: cell indexing, coordinates and geometric queries.
//!
//! Cells are laid out row-major: index `m` sits in column `m % b` and row
//! `m / b`, with cell `(0, 0)` centred on [`GridSpec::origin`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, in arbitrary length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite(), "non-finite position");
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        distance(self, other)
    }

    /// Point reached by travelling `length` along heading `angle` (radians).
    pub fn offset_polar(&self, length: f64, angle: f64) -> Position {
        Position::new(self.x + length * angle.cos(), self.y + length * angle.sin())
    }
}

/// Euclidean distance between two positions.
pub fn distance(p: &Position, q: &Position) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Index of a grid cell. Only obtainable through a [`GridSpec`], so it is
/// always in range for the grid that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellIndex(usize);

impl CellIndex {
    pub(crate) fn from_raw(index: usize) -> Self {
        CellIndex(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    side_cells: usize,
    cell_pitch: f64,
    origin: Position,
}

impl GridSpec {
    /// A `side_cells × side_cells` lattice with pitch `cell_pitch` and cell
    /// `(0, 0)` at the coordinate origin.
    pub fn new(side_cells: usize, cell_pitch: f64) -> Result<Self> {
        Self::with_origin(side_cells, cell_pitch, Position::new(0.0, 0.0))
    }

    pub fn with_origin(side_cells: usize, cell_pitch: f64, origin: Position) -> Result<Self> {
        if side_cells < 2 {
            return Err(Error::config("grid.side_cells", "must be at least 2"));
        }
        if !(cell_pitch > 0.0 && cell_pitch.is_finite()) {
            return Err(Error::config("grid.cell_pitch", "must be positive and finite"));
        }
        Ok(GridSpec {
            side_cells,
            cell_pitch,
            origin,
        })
    }

    pub fn side_cells(&self) -> usize {
        self.side_cells
    }

    pub fn cell_pitch(&self) -> f64 {
        self.cell_pitch
    }

    pub fn origin(&self) -> Position {
        self.origin
    }

    pub fn cell_count(&self) -> usize {
        self.side_cells * self.side_cells
    }

    /// Physical side length `b·R₀`.
    pub fn side_length(&self) -> f64 {
        self.side_cells as f64 * self.cell_pitch
    }

    pub fn cell(&self, index: usize) -> Result<CellIndex> {
        if index < self.cell_count() {
            Ok(CellIndex(index))
        } else {
            Err(Error::CellOutOfRange {
                index,
                cells: self.cell_count(),
            })
        }
    }

    pub fn cell_at(&self, col: usize, row: usize) -> Result<CellIndex> {
        if col >= self.side_cells || row >= self.side_cells {
            return Err(Error::CellOutOfRange {
                index: row.saturating_mul(self.side_cells).saturating_add(col),
                cells: self.cell_count(),
            });
        }
        Ok(CellIndex(row * self.side_cells + col))
    }

    /// `(column, row)` of a cell.
    pub fn col_row(&self, m: CellIndex) -> (usize, usize) {
        (m.0 % self.side_cells, m.0 / self.side_cells)
    }

    pub fn cell_center(&self, m: CellIndex) -> Position {
        let (col, row) = self.col_row(m);
        Position::new(
            self.origin.x + col as f64 * self.cell_pitch,
            self.origin.y + row as f64 * self.cell_pitch,
        )
    }

    /// Closest cell to `p`. Positions outside the lattice clamp to the
    /// boundary; exact ties go to the smaller index.
    pub fn nearest_cell(&self, p: Position) -> CellIndex {
        let col = self.nearest_axis(p.x - self.origin.x);
        let row = self.nearest_axis(p.y - self.origin.y);
        CellIndex(row * self.side_cells + col)
    }

    fn nearest_axis(&self, offset: f64) -> usize {
        // ceil(v - 0.5) rounds half-way values down, so ties pick the lower cell.
        let v = (offset / self.cell_pitch - 0.5).ceil();
        let max = (self.side_cells - 1) as f64;
        if v.is_nan() {
            return 0;
        }
        v.clamp(0.0, max) as usize
    }

    /// Clamp a position into the lattice's bounding box of cell centres.
    pub fn clamp(&self, p: Position) -> Position {
        let max = (self.side_cells - 1) as f64 * self.cell_pitch;
        Position::new(
            (p.x - self.origin.x).clamp(0.0, max) + self.origin.x,
            (p.y - self.origin.y).clamp(0.0, max) + self.origin.y,
        )
    }

    /// Cells whose centres lie within `radius` of `p` (inclusive), in
    /// ascending index order.
    pub fn cells_within(&self, p: Position, radius: f64) -> Vec<CellIndex> {
        let mut out = Vec::new();
        if radius < 0.0 {
            return out;
        }
        let max = (self.side_cells - 1) as f64;
        let lo = |c: f64| ((c - radius) / self.cell_pitch).floor().clamp(0.0, max) as usize;
        let hi = |c: f64| ((c + radius) / self.cell_pitch).ceil().clamp(0.0, max) as usize;
        let (dx, dy) = (p.x - self.origin.x, p.y - self.origin.y);
        for row in lo(dy)..=hi(dy) {
            for col in lo(dx)..=hi(dx) {
                let m = CellIndex(row * self.side_cells + col);
                if distance(&p, &self.cell_center(m)) <= radius {
                    out.push(m);
                }
            }
        }
        out
    }

    /// The up-to-eight lattice neighbours of `m`, in ascending index order.
    pub fn neighbours(&self, m: CellIndex) -> Vec<CellIndex> {
        let (col, row) = self.col_row(m);
        let b = self.side_cells as isize;
        let mut out = Vec::with_capacity(8);
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (c, r) = (col as isize + dc, row as isize + dr);
                if (0..b).contains(&c) && (0..b).contains(&r) {
                    out.push(CellIndex((r * b + c) as usize));
                }
            }
        }
        out
    }

    /// True when `a` and `b` are the same cell or 8-connected neighbours.
    pub fn is_adjacent_or_same(&self, a: CellIndex, b: CellIndex) -> bool {
        let (ac, ar) = self.col_row(a);
        let (bc, br) = self.col_row(b);
        ac.abs_diff(bc) <= 1 && ar.abs_diff(br) <= 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn default_grid() -> GridSpec {
        GridSpec::new(100, 1.0).unwrap()
    }

    #[test]
    fn cell_center_row_major() {
        let g = default_grid();
        assert_eq!(g.cell_center(g.cell(0).unwrap()), Position::new(0.0, 0.0));
        assert_eq!(g.cell_center(g.cell(1270).unwrap()), Position::new(70.0, 12.0));
        assert_eq!(g.cell_center(g.cell(9999).unwrap()), Position::new(99.0, 99.0));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let g = default_grid();
        assert!(matches!(g.cell(10_000), Err(Error::CellOutOfRange { .. })));
        assert!(g.cell_at(100, 0).is_err());
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert_eq!(GridSpec::new(1, 1.0).unwrap_err().key(), Some("grid.side_cells"));
        assert_eq!(GridSpec::new(10, 0.0).unwrap_err().key(), Some("grid.cell_pitch"));
        assert_eq!(GridSpec::new(10, 1.0).unwrap().cell_count(), 100);
    }

    #[test]
    fn nearest_cell_examples() {
        let g = default_grid();
        assert_eq!(g.nearest_cell(Position::new(0.4, 0.4)), g.cell_at(0, 0).unwrap());
        assert_eq!(g.nearest_cell(Position::new(-5.0, 50.0)), g.cell_at(0, 50).unwrap());
        assert_eq!(g.nearest_cell(Position::new(70.49, 12.49)), g.cell_at(70, 12).unwrap());
        assert_eq!(g.nearest_cell(Position::new(250.0, -3.0)), g.cell_at(99, 0).unwrap());
    }

    #[test]
    fn nearest_cell_ties_go_low() {
        let g = default_grid();
        assert_eq!(g.nearest_cell(Position::new(0.5, 0.5)), g.cell_at(0, 0).unwrap());
        assert_eq!(g.nearest_cell(Position::new(3.5, 0.0)), g.cell_at(3, 0).unwrap());
    }

    #[test]
    fn nearest_cell_with_offset_origin_and_pitch() {
        let g = GridSpec::with_origin(10, 2.5, Position::new(-10.0, 5.0)).unwrap();
        let m = g.cell_at(3, 7).unwrap();
        assert_eq!(g.nearest_cell(g.cell_center(m)), m);
        assert_eq!(g.nearest_cell(Position::new(-10.0 + 3.0 * 2.5 + 1.0, 5.0 + 17.0)), m);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&Position::new(0.0, 0.0), &Position::new(3.0, 4.0)), 5.0);
        let p = Position::new(12.3, -4.5);
        assert_eq!(distance(&p, &p), 0.0);
        assert_abs_diff_eq!(
            distance(&Position::new(70.0, 12.0), &Position::new(35.0, 60.0)),
            59.405,
            epsilon = 1e-3
        );
    }

    #[test]
    fn disc_count_matches_lattice_point_count() {
        // Integer lattice points within radius 9: brute-force count.
        let mut brute = 0;
        for i in -9i32..=9 {
            for j in -9i32..=9 {
                if i * i + j * j <= 81 {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 253);
        let g = default_grid();
        let c = g.cell_center(g.cell_at(50, 50).unwrap());
        assert_eq!(g.cells_within(c, 9.0).len(), 253);
        // A corner only keeps its quarter disc.
        let corner = g.cells_within(Position::new(0.0, 0.0), 9.0);
        assert!(corner.len() < 253 / 3);
        assert!(corner.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn neighbours_and_adjacency() {
        let g = default_grid();
        assert_eq!(g.neighbours(g.cell_at(0, 0).unwrap()).len(), 3);
        assert_eq!(g.neighbours(g.cell_at(5, 0).unwrap()).len(), 5);
        let m = g.cell_at(5, 5).unwrap();
        let n = g.neighbours(m);
        assert_eq!(n.len(), 8);
        assert!(n.iter().all(|&k| g.is_adjacent_or_same(m, k)));
        assert!(!g.is_adjacent_or_same(m, g.cell_at(7, 5).unwrap()));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nearest_inverts_center(side in 2usize..40, pitch in 0.1f64..5.0, idx in 0usize..1600) {
                let g = GridSpec::new(side, pitch).unwrap();
                let m = g.cell(idx % g.cell_count()).unwrap();
                prop_assert_eq!(g.nearest_cell(g.cell_center(m)), m);
            }

            #[test]
            fn triangle_inequality(
                ax in -1e3f64..1e3, ay in -1e3f64..1e3,
                bx in -1e3f64..1e3, by in -1e3f64..1e3,
                cx in -1e3f64..1e3, cy in -1e3f64..1e3,
            ) {
                let (a, b, c) = (Position::new(ax, ay), Position::new(bx, by), Position::new(cx, cy));
                prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-9);
                prop_assert_eq!(distance(&a, &b), distance(&b, &a));
                prop_assert!(distance(&a, &b) >= 0.0);
            }

            #[test]
            fn nearest_is_argmin(x in -20.0f64..120.0, y in -20.0f64..120.0) {
                let g = GridSpec::new(12, 8.5).unwrap();
                let p = Position::new(x, y);
                let best = g.nearest_cell(p);
                let d = distance(&p, &g.cell_center(best));
                for i in 0..g.cell_count() {
                    let m = g.cell(i).unwrap();
                    prop_assert!(distance(&p, &g.cell_center(m)) >= d - 1e-9);
                }
            }
        }
    }
}
