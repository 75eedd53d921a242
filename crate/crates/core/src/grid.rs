//! Staggered TMz grid and centered difference operators with periodic wrap.
//!
//! Node families (0-based indices, `h` the cell size):
//!
//! * `Ez` at cell centers `(x_l + (i + 1/2) h, y_b + (j + 1/2) h)`, `nx x ny`;
//! * `Hx` at `(x_l + (i + 1/2) h, y_b + j h)`, `nx x (ny + 1)`;
//! * `Hy` at `(x_l + i h, y_b + (j + 1/2) h)`, `(nx + 1) x ny`.
//!
//! The last row of `Hx` and last column of `Hy` are periodic images of the
//! first ones and are kept equal by [`Field::sync_periodic`].

use std::io::Write;

use rayon::prelude::*;

use crate::geometry::{EmbeddedBoundary, Point, Region};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Hx,
    Hy,
    Ez,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Hx, Family::Hy, Family::Ez];

    pub fn name(self) -> &'static str {
        match self {
            Family::Hx => "Hx",
            Family::Hy => "Hy",
            Family::Ez => "Ez",
        }
    }

    pub fn is_magnetic(self) -> bool {
        !matches!(self, Family::Ez)
    }
}

/// Spatial order of the centered differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            o => Err(Error::Config(format!("stencil order must be 2 or 4, got {o}"))),
        }
    }

    /// `(m, weight)` pairs: the derivative at `p` is
    /// `Σ weight * f(p + (m + 1/2) h) / h`.
    pub fn taps(self) -> &'static [(i64, f64)] {
        const SECOND: [(i64, f64); 2] = [(-1, -1.0), (0, 1.0)];
        const FOURTH: [(i64, f64); 4] = [(-2, 1.0 / 24.0), (-1, -27.0 / 24.0), (0, 27.0 / 24.0), (1, -1.0 / 24.0)];
        match self {
            Self::Second => &SECOND,
            Self::Fourth => &FOURTH,
        }
    }

    /// Number of half-cells the stencil reaches on each side, in whole source nodes.
    pub fn reach(self) -> i64 {
        match self {
            Self::Second => 1,
            Self::Fourth => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredGrid {
    pub x_min: f64,
    pub y_min: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl StaggeredGrid {
    /// Square cells of size `h` covering `[x0, x1] x [y0, y1]`.
    pub fn new(x: (f64, f64), y: (f64, f64), h: f64) -> Result<Self> {
        if !(h > 0.0) || !(x.1 > x.0) || !(y.1 > y.0) {
            return Err(Error::Config(format!("invalid grid: x={x:?} y={y:?} h={h}")));
        }
        let cells = |len: f64| -> Result<usize> {
            let n = (len / h).round();
            if n < 1.0 || ((len / n) - h).abs() > 1e-12 * h.max(1.0) * 1e3 {
                return Err(Error::Config(format!("domain length {len} is not a multiple of h = {h}")));
            }
            Ok(n as usize)
        };
        let nx = cells(x.1 - x.0)?;
        let ny = cells(y.1 - y.0)?;
        let hx = (x.1 - x.0) / nx as f64;
        let hy = (y.1 - y.0) / ny as f64;
        if (hx - hy).abs() > 1e-12 * hx.max(1.0) {
            return Err(Error::Config(format!("cells are not square: {hx} vs {hy}")));
        }
        Ok(Self { x_min: x.0, y_min: y.0, nx, ny, h: hx })
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.nx as f64 * self.h
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.ny as f64 * self.h
    }

    pub fn dims(&self, family: Family) -> (usize, usize) {
        match family {
            Family::Ez => (self.nx, self.ny),
            Family::Hx => (self.nx, self.ny + 1),
            Family::Hy => (self.nx + 1, self.ny),
        }
    }

    /// Half-cell offsets of a family relative to the `(x_min, y_min)` corner.
    pub fn offsets(family: Family) -> (f64, f64) {
        match family {
            Family::Ez => (0.5, 0.5),
            Family::Hx => (0.5, 0.0),
            Family::Hy => (0.0, 0.5),
        }
    }

    pub fn position(&self, family: Family, i: usize, j: usize) -> Point {
        let (ox, oy) = Self::offsets(family);
        Point::new(self.x_min + (i as f64 + ox) * self.h, self.y_min + (j as f64 + oy) * self.h)
    }

    /// Unwrapped position for possibly out-of-range integer indices.
    pub fn position_signed(&self, family: Family, i: i64, j: i64) -> Point {
        let (ox, oy) = Self::offsets(family);
        Point::new(self.x_min + (i as f64 + ox) * self.h, self.y_min + (j as f64 + oy) * self.h)
    }

    /// Canonical storage index of a periodic node (never the duplicated edge).
    pub fn wrap(&self, family: Family, i: i64, j: i64) -> (usize, usize) {
        let wi = i.rem_euclid(self.nx as i64) as usize;
        let wj = j.rem_euclid(self.ny as i64) as usize;
        let _ = family;
        (wi, wj)
    }

    pub fn zeros(&self, family: Family) -> Field {
        let (ni, nj) = self.dims(family);
        Field::zeros(family, ni, nj)
    }

    pub fn sample(&self, family: Family, f: impl Fn(Point) -> f64) -> Field {
        let mut out = self.zeros(family);
        for j in 0..out.nj {
            for i in 0..out.ni {
                out.set(i, j, f(self.position(family, i, j)));
            }
        }
        out
    }

    /// Region of every node of a family (true = `Ω+`).
    pub fn mask(&self, family: Family, boundary: &EmbeddedBoundary) -> Mask {
        let (ni, nj) = self.dims(family);
        let mut plus = vec![false; ni * nj];
        for j in 0..nj {
            for i in 0..ni {
                let (wi, wj) = self.wrap(family, i as i64, j as i64);
                plus[j * ni + i] = boundary.classify(self.position(family, wi, wj)) == Region::Plus;
            }
        }
        Mask { ni, nj, plus }
    }
}

/// Node values of one family, stored row-major with `i` (x) fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub family: Family,
    pub ni: usize,
    pub nj: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(family: Family, ni: usize, nj: usize) -> Self {
        Self { family, ni, nj, data: vec![0.0; ni * nj] }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ni + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.ni + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.ni + i] = v;
    }

    /// Copy the canonical first row/column onto its periodic duplicate.
    pub fn sync_periodic(&mut self) {
        match self.family {
            Family::Hx => {
                let ni = self.ni;
                let last = (self.nj - 1) * ni;
                let (head, tail) = self.data.split_at_mut(last);
                tail[..ni].copy_from_slice(&head[..ni]);
            }
            Family::Hy => {
                for j in 0..self.nj {
                    let v = self.get(0, j);
                    let i = self.ni - 1;
                    self.set(i, j, v);
                }
            }
            Family::Ez => {}
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn apply_mask(&mut self, mask: &Mask) {
        for (v, &p) in self.data.iter_mut().zip(&mask.plus) {
            if !p {
                *v = 0.0;
            }
        }
    }

    /// CSV with columns `x, y, value`, 17 significant digits.
    pub fn write_csv(&self, grid: &StaggeredGrid, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for j in 0..self.nj {
            for i in 0..self.ni {
                let p = grid.position(self.family, i, j);
                writeln!(w, "{:.16e},{:.16e},{:.16e}", p.x, p.y, self.get(i, j))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub ni: usize,
    pub nj: usize,
    pub plus: Vec<bool>,
}

impl Mask {
    #[inline]
    pub fn is_plus(&self, i: usize, j: usize) -> bool {
        self.plus[j * self.ni + i]
    }

    pub fn all_plus(&self) -> bool {
        self.plus.iter().all(|&p| p)
    }
}

/// Region masks for the three families; computed once since `Γ` is static.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub hx: Mask,
    pub hy: Mask,
    pub ez: Mask,
}

impl RegionMasks {
    pub fn new(grid: &StaggeredGrid, boundary: &EmbeddedBoundary) -> Self {
        Self {
            hx: grid.mask(Family::Hx, boundary),
            hy: grid.mask(Family::Hy, boundary),
            ez: grid.mask(Family::Ez, boundary),
        }
    }

    pub fn get(&self, family: Family) -> &Mask {
        match family {
            Family::Hx => &self.hx,
            Family::Hy => &self.hy,
            Family::Ez => &self.ez,
        }
    }
}

/// TMz fields: `E_z` at `t_e`, `H` at `t_h = t_e - Δt/2` between updates.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub hx: Field,
    pub hy: Field,
    pub ez: Field,
    pub t_e: f64,
    pub t_h: f64,
}

impl FieldState {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self { hx: grid.zeros(Family::Hx), hy: grid.zeros(Family::Hy), ez: grid.zeros(Family::Ez), t_e: 0.0, t_h: 0.0 }
    }

    pub fn field(&self, family: Family) -> &Field {
        match family {
            Family::Hx => &self.hx,
            Family::Hy => &self.hy,
            Family::Ez => &self.ez,
        }
    }

    pub fn field_mut(&mut self, family: Family) -> &mut Field {
        match family {
            Family::Hx => &mut self.hx,
            Family::Hy => &mut self.hy,
            Family::Ez => &mut self.ez,
        }
    }

    pub fn apply_masks(&mut self, masks: &RegionMasks) {
        self.hx.apply_mask(&masks.hx);
        self.hy.apply_mask(&masks.hy);
        self.ez.apply_mask(&masks.ez);
    }

    pub fn curl_h_at_ez(&self, grid: &StaggeredGrid, order: StencilOrder) -> Field {
        curl_h_at_ez(grid, &self.hx, &self.hy, order)
    }

    pub fn curl_ez_at_h(&self, grid: &StaggeredGrid, order: StencilOrder) -> (Field, Field) {
        curl_ez_at_h(grid, &self.ez, order)
    }

    pub fn discrete_divergence_h(&self, grid: &StaggeredGrid, order: StencilOrder) -> Field {
        discrete_divergence_h(grid, &self.hx, &self.hy, order)
    }
}

/// `∂_x H_y - ∂_y H_x` at `E_z` nodes, using raw neighbor values.
pub fn curl_h_at_ez(grid: &StaggeredGrid, hx: &Field, hy: &Field, order: StencilOrder) -> Field {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let inv_h = 1.0 / grid.h;
    let taps = order.taps();
    let mut out = grid.zeros(Family::Ez);
    let ni = out.ni;
    out.data.par_chunks_mut(ni).enumerate().for_each(|(j, row)| {
        let j = j as i64;
        for (i, v) in row.iter_mut().enumerate() {
            let i = i as i64;
            let mut dxy = 0.0;
            let mut dyx = 0.0;
            for &(m, w) in taps {
                let si = (i + 1 + m).rem_euclid(nx) as usize;
                dxy += w * hy.get(si, j as usize);
                let sj = (j + 1 + m).rem_euclid(ny) as usize;
                dyx += w * hx.get(i as usize, sj);
            }
            *v = (dxy - dyx) * inv_h;
        }
    });
    out
}

/// `(-∂_y E_z, ∂_x E_z)` at `H_x` and `H_y` nodes.
pub fn curl_ez_at_h(grid: &StaggeredGrid, ez: &Field, order: StencilOrder) -> (Field, Field) {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let inv_h = 1.0 / grid.h;
    let taps = order.taps();
    let mut cx = grid.zeros(Family::Hx);
    let ni = cx.ni;
    cx.data.par_chunks_mut(ni).enumerate().for_each(|(j, row)| {
        let j = j as i64;
        for (i, v) in row.iter_mut().enumerate() {
            let mut d = 0.0;
            for &(m, w) in taps {
                let sj = (j + m).rem_euclid(ny) as usize;
                d += w * ez.get(i, sj);
            }
            *v = -d * inv_h;
        }
    });
    let mut cy = grid.zeros(Family::Hy);
    let ni = cy.ni;
    cy.data.par_chunks_mut(ni).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            let i = i as i64;
            let mut d = 0.0;
            for &(m, w) in taps {
                let si = (i + m).rem_euclid(nx) as usize;
                d += w * ez.get(si, j);
            }
            *v = d * inv_h;
        }
    });
    (cx, cy)
}

/// `∂_x H_x + ∂_y H_y` at cell corners `(x_l + i h, y_b + j h)`, `nx x ny`.
/// The returned field is tagged `Hx` only for storage; its nodes are corners.
pub fn discrete_divergence_h(grid: &StaggeredGrid, hx: &Field, hy: &Field, order: StencilOrder) -> Field {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let inv_h = 1.0 / grid.h;
    let taps = order.taps();
    let mut out = Field::zeros(Family::Hx, grid.nx, grid.ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut d = 0.0;
            for &(m, w) in taps {
                d += w * hx.get((i + m).rem_euclid(nx) as usize, j as usize);
                d += w * hy.get(i as usize, (j + m).rem_euclid(ny) as usize);
            }
            out.set(i as usize, j as usize, d * inv_h);
        }
    }
    out
}
