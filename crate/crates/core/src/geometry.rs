//! Surface geometry: element grid, reflecting unit sets, angles and the
//! element radiation pattern.
//!
//! The surface lies in the y-z plane and faces +x. Elements are numbered
//! 1..=N column-major from the bottom-left element, the same rule used for
//! elements inside a reflecting unit set (RUS).

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Point or displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Returns `None` for a zero-length vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self / n)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl std::fmt::Display for Vec3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Uniform planar array in the y-z plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RisLayout {
    /// Rows (vertical, along z).
    pub n_rows: usize,
    /// Columns (horizontal, along y).
    pub n_cols: usize,
    /// Vertical element spacing in meters.
    pub row_spacing: f64,
    /// Horizontal element spacing in meters.
    pub col_spacing: f64,
    /// Position of the bottom-left element.
    pub origin: Vec3,
}

impl RisLayout {
    pub fn new(n_rows: usize, n_cols: usize, row_spacing: f64, col_spacing: f64) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidInput("layout needs at least one row and column".into()));
        }
        if !(row_spacing > 0.0 && col_spacing > 0.0) {
            return Err(Error::InvalidInput("element spacing must be positive".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_spacing,
            col_spacing,
            origin: Vec3::ZERO,
        })
    }

    /// 64 x 128 elements at 5 mm pitch.
    pub fn baseline() -> Self {
        Self::new(64, 128, 0.005, 0.005).expect("valid default layout")
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical area of one element, `D_h * D_v`.
    pub fn element_area(&self) -> f64 {
        self.row_spacing * self.col_spacing
    }

    /// Position of element `n` (1-based, column-major from bottom-left).
    pub fn element_position(&self, n: usize) -> Result<Vec3> {
        if n == 0 || n > self.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            });
        }
        let (row, col) = ((n - 1) % self.n_rows, (n - 1) / self.n_rows);
        Ok(self.grid_position(row, col))
    }

    fn grid_position(&self, row: usize, col: usize) -> Vec3 {
        self.origin + Vec3::new(0.0, self.col_spacing * col as f64, self.row_spacing * row as f64)
    }

    /// All element positions in index order.
    pub fn positions(&self) -> Vec<Vec3> {
        (0..self.n_cols)
            .flat_map(|col| (0..self.n_rows).map(move |row| (row, col)))
            .map(|(row, col)| self.grid_position(row, col))
            .collect()
    }

    /// 1-based index of the element at `(row, col)` (0-based grid coordinates).
    pub fn index_of(&self, row: usize, col: usize) -> usize {
        col * self.n_rows + row + 1
    }

    pub fn centroid(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                0.0,
                0.5 * self.col_spacing * (self.n_cols - 1) as f64,
                0.5 * self.row_spacing * (self.n_rows - 1) as f64,
            )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    BottomLeft,
    BottomRight,
    TopRight,
    TopLeft,
}

impl Corner {
    /// Rectangle order used by the localization frame.
    pub const ALL: [Corner; 4] = [
        Corner::BottomLeft,
        Corner::BottomRight,
        Corner::TopRight,
        Corner::TopLeft,
    ];
}

/// Rectangular sub-grid of the surface anchored at one of its corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RusSpec {
    pub anchor_corner: Corner,
    pub n_rows: usize,
    pub n_cols: usize,
    pub active: bool,
}

impl RusSpec {
    pub fn new(anchor_corner: Corner, n_rows: usize, n_cols: usize) -> Self {
        Self {
            anchor_corner,
            n_rows,
            n_cols,
            active: true,
        }
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The four corner sets, in rectangle order.
    pub fn corners(n_rows: usize, n_cols: usize) -> [RusSpec; 4] {
        Corner::ALL.map(|c| RusSpec::new(c, n_rows, n_cols))
    }
}

/// Element indices of a RUS, column-major from its own lower-left element.
pub fn rus_elements(layout: &RisLayout, rus: &RusSpec) -> Result<Vec<usize>> {
    if rus.n_rows == 0 || rus.n_cols == 0 || rus.n_rows > layout.n_rows || rus.n_cols > layout.n_cols {
        return Err(Error::RusOutOfBounds {
            rows: rus.n_rows,
            cols: rus.n_cols,
            layout_rows: layout.n_rows,
            layout_cols: layout.n_cols,
        });
    }
    let (row0, col0) = match rus.anchor_corner {
        Corner::BottomLeft => (0, 0),
        Corner::BottomRight => (0, layout.n_cols - rus.n_cols),
        Corner::TopRight => (layout.n_rows - rus.n_rows, layout.n_cols - rus.n_cols),
        Corner::TopLeft => (layout.n_rows - rus.n_rows, 0),
    };
    Ok((0..rus.n_cols)
        .flat_map(|q| (0..rus.n_rows).map(move |r| (row0 + r, col0 + q)))
        .map(|(row, col)| layout.index_of(row, col))
        .collect())
}

/// Centroid of the RUS element positions; the point used as a ranging anchor.
pub fn anchor_point(layout: &RisLayout, rus: &RusSpec) -> Result<Vec3> {
    let idx = rus_elements(layout, rus)?;
    let mut sum = Vec3::ZERO;
    for &n in &idx {
        sum += layout.element_position(n)?;
    }
    Ok(sum / idx.len() as f64)
}

/// Zenith from the surface normal (+x) and azimuth in the y-z plane from +y
/// toward +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angles {
    pub zenith: f64,
    pub azimuth: f64,
}

pub fn angles_between(surface_point: Vec3, target: Vec3) -> Result<Angles> {
    let d = target - surface_point;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let zenith = (d.x / r).clamp(-1.0, 1.0).acos();
    let mut azimuth = d.z.atan2(d.y);
    if azimuth < 0.0 {
        azimuth += 2.0 * PI;
    }
    if azimuth >= 2.0 * PI {
        azimuth = 0.0;
    }
    Ok(Angles { zenith, azimuth })
}

/// Normalized power pattern of one element: `cos^3` over the front
/// hemisphere, zero behind the surface.
pub fn radiation_pattern(a: Angles) -> f64 {
    if a.zenith <= FRAC_PI_2 {
        a.zenith.cos().powi(3).max(0.0)
    } else {
        0.0
    }
}
