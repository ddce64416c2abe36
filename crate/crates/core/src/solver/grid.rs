use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform MAC grid on `[0, lx] x [0, ly]`.
///
/// Face unknowns are numbered with all vertical faces first, then all
/// horizontal faces. Vertical face `(i, j)`, `i in 0..=nx`, sits at
/// `(i hx, (j + 1/2) hy)`; horizontal face `(i, j)`, `j in 0..=ny`, at
/// `((i + 1/2) hx, j hy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

/// A face on the boundary with its outward normal sign and length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub face: usize,
    /// `+1` when the outward normal points along the face's axis.
    pub sign: f64,
    pub len: f64,
    pub x: f64,
    pub y: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Domain("grid needs at least 2 cells per direction".into()));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Domain("domain lengths must be positive".into()));
        }
        Ok(Grid2D { nx, ny, lx, ly })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_faces(&self) -> usize {
        self.n_xfaces() + self.n_yfaces()
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn yface(&self, i: usize, j: usize) -> usize {
        self.n_xfaces() + j * self.nx + i
    }

    pub fn cell_center(&self, c: usize) -> (f64, f64) {
        let (i, j) = (c % self.nx, c / self.nx);
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// `(is_vertical, i, j)` of a global face index.
    pub fn face_coords(&self, f: usize) -> (bool, usize, usize) {
        if f < self.n_xfaces() {
            (true, f % (self.nx + 1), f / (self.nx + 1))
        } else {
            let g = f - self.n_xfaces();
            (false, g % self.nx, g / self.nx)
        }
    }

    pub fn face_center(&self, f: usize) -> (f64, f64) {
        let (vertical, i, j) = self.face_coords(f);
        if vertical {
            (i as f64 * self.hx(), (j as f64 + 0.5) * self.hy())
        } else {
            ((i as f64 + 0.5) * self.hx(), j as f64 * self.hy())
        }
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        let (vertical, i, j) = self.face_coords(f);
        if vertical {
            i == 0 || i == self.nx
        } else {
            j == 0 || j == self.ny
        }
    }

    /// Control-volume weight of a face: a full cell inside, half at the boundary.
    pub fn face_weight(&self, f: usize) -> f64 {
        let w = self.cell_area();
        if self.is_boundary_face(f) {
            0.5 * w
        } else {
            w
        }
    }

    /// Boundary faces: left, right, bottom, top, each in increasing order.
    pub fn boundary_faces(&self) -> Vec<BoundaryFace> {
        let (hx, hy) = (self.hx(), self.hy());
        let mut out = Vec::with_capacity(2 * (self.nx + self.ny));
        for (i, sign) in [(0, -1.0), (self.nx, 1.0)] {
            for j in 0..self.ny {
                let face = self.xface(i, j);
                let (x, y) = self.face_center(face);
                out.push(BoundaryFace { face, sign, len: hy, x, y });
            }
        }
        for (j, sign) in [(0, -1.0), (self.ny, 1.0)] {
            for i in 0..self.nx {
                let face = self.yface(i, j);
                let (x, y) = self.face_center(face);
                out.push(BoundaryFace { face, sign, len: hx, x, y });
            }
        }
        out
    }

    /// The (one or two) cells next to a face with the derivative of their
    /// divergence with respect to the face value.
    pub fn face_cells(&self, f: usize) -> [(Option<usize>, f64); 2] {
        let (vertical, i, j) = self.face_coords(f);
        if vertical {
            let h = self.hx();
            let left = (i > 0).then(|| self.cell(i - 1, j));
            let right = (i < self.nx).then(|| self.cell(i, j));
            [(left, 1.0 / h), (right, -1.0 / h)]
        } else {
            let h = self.hy();
            let below = (j > 0).then(|| self.cell(i, j - 1));
            let above = (j < self.ny).then(|| self.cell(i, j));
            [(below, 1.0 / h), (above, -1.0 / h)]
        }
    }

    /// Discrete divergence of a face field.
    pub fn div(&self, u: &[f64]) -> Vec<f64> {
        let (hx, hy) = (self.hx(), self.hy());
        let mut d = vec![0.0; self.n_cells()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                d[self.cell(i, j)] = (u[self.xface(i + 1, j)] - u[self.xface(i, j)]) / hx
                    + (u[self.yface(i, j + 1)] - u[self.yface(i, j)]) / hy;
            }
        }
        d
    }

    /// Transpose of [`Grid2D::div`].
    pub fn div_t(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_faces()];
        for (f, o) in out.iter_mut().enumerate() {
            for (c, coef) in self.face_cells(f) {
                if let Some(c) = c {
                    *o += coef * q[c];
                }
            }
        }
        out
    }

    /// Velocity vector at a face: the normal component is the face value,
    /// the tangential one averages the perpendicular faces of the adjacent
    /// cells (four inside, two on the boundary). Returns `(vector, normal axis)`.
    pub fn face_velocity(&self, u: &[f64], f: usize) -> ([f64; 2], usize) {
        let (vertical, i, j) = self.face_coords(f);
        if vertical {
            let mut sum = 0.0;
            let mut cnt = 0.0;
            for ci in [i.checked_sub(1), (i < self.nx).then_some(i)].into_iter().flatten() {
                sum += u[self.yface(ci, j)] + u[self.yface(ci, j + 1)];
                cnt += 2.0;
            }
            ([u[f], sum / cnt], 0)
        } else {
            let mut sum = 0.0;
            let mut cnt = 0.0;
            for cj in [j.checked_sub(1), (j < self.ny).then_some(j)].into_iter().flatten() {
                sum += u[self.xface(i, cj)] + u[self.xface(i + 1, cj)];
                cnt += 2.0;
            }
            ([sum / cnt, u[f]], 1)
        }
    }
}
