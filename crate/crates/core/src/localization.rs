//! Coplanar maximum-likelihood positioning from four rectangle-corner
//! anchors, its Cramér-Rao bound, and two classical baselines.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Tolerance on the rectangle shape, meters.
pub const RECTANGLE_TOLERANCE: f64 = 1e-9;
/// Condition number above which the information matrix counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Four coplanar anchors forming a rectangle, with the rigid frame that maps
/// them to `(0,0,0), (0,a,0), (0,a,b), (0,0,b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorRectangle {
    corners: [Vec3; 4],
    a: f64,
    b: f64,
    /// Canonical axes in world coordinates: plane normal, first side, second side.
    axes: [Vec3; 3],
}

impl AnchorRectangle {
    pub fn new(corners: [Vec3; 4]) -> Result<Self> {
        let [p1, p2, p3, p4] = corners;
        if corners.iter().any(|p| !p.is_finite()) {
            return Err(Error::NotARectangle("non-finite corner".into()));
        }
        let s1 = p2 - p1;
        let s2 = p4 - p1;
        let a = s1.norm();
        let b = s2.norm();
        if a <= RECTANGLE_TOLERANCE || b <= RECTANGLE_TOLERANCE {
            return Err(Error::NotARectangle(format!("degenerate sides a = {a}, b = {b}")));
        }
        let skew = s1.dot(s2) / b;
        if skew.abs() > RECTANGLE_TOLERANCE {
            return Err(Error::NotARectangle(format!(
                "sides are not perpendicular (offset {skew:e} m)"
            )));
        }
        let gap = (p3 - (p2 + s2)).norm();
        if gap > RECTANGLE_TOLERANCE {
            return Err(Error::NotARectangle(format!(
                "third corner off the rectangle by {gap:e} m"
            )));
        }
        let ey = s1 / a;
        let ez = s2 / b;
        let ex = ey.cross(ez);
        Ok(Self {
            corners,
            a,
            b,
            axes: [ex, ey, ez],
        })
    }

    pub fn corners(&self) -> [Vec3; 4] {
        self.corners
    }

    /// Side from anchor 1 to anchor 2.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Side from anchor 1 to anchor 4.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Unit normal of the anchor plane; positive canonical x.
    pub fn normal(&self) -> Vec3 {
        self.axes[0]
    }

    pub fn to_canonical(&self, p: Vec3) -> Vec3 {
        let d = p - self.corners[0];
        Vec3::new(d.dot(self.axes[0]), d.dot(self.axes[1]), d.dot(self.axes[2]))
    }

    pub fn from_canonical(&self, q: Vec3) -> Vec3 {
        self.corners[0] + self.axes[0] * q.x + self.axes[1] * q.y + self.axes[2] * q.z
    }

    /// Anchors in the canonical frame.
    pub fn canonical_corners(&self) -> [Vec3; 4] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, self.a, 0.0),
            Vec3::new(0.0, self.a, self.b),
            Vec3::new(0.0, 0.0, self.b),
        ]
    }

    pub fn distances(&self, p: Vec3) -> [f64; 4] {
        self.corners.map(|c| c.distance(p))
    }
}

/// Measured anchor distances with their assumed error variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    pub values: Vec<f64>,
    pub variance: f64,
}

impl DistanceVector {
    pub fn new(values: Vec<f64>, variance: f64) -> Result<Self> {
        if let Some(bad) = values.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidInput(format!("distance {bad} is not positive")));
        }
        if !(variance >= 0.0) {
            return Err(Error::InvalidInput(format!("variance {variance} is negative")));
        }
        Ok(Self { values, variance })
    }

    fn four(&self) -> Result<[f64; 4]> {
        <[f64; 4]>::try_from(self.values.as_slice()).map_err(|_| Error::LengthMismatch {
            expected: 4,
            found: self.values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Closed-form refined distances from one root of the quartic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub distances: [f64; 4],
    pub branch: Branch,
    /// `sum (d_m - d̂_m)^2` of the refined distances.
    pub objective: f64,
    /// Objective of the other root, if it was admissible.
    pub rejected: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub position: Vec3,
    pub distances: [f64; 4],
    /// `sum (|p - p_m| - d̂_m)^2` at the returned position.
    pub objective: f64,
    pub branch: Option<Branch>,
}

fn objective(d: &[f64; 4], measured: &[f64; 4]) -> f64 {
    d.iter().zip(measured).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Maximum-likelihood distances consistent with a rectangle of anchors:
/// minimizes `sum (d_m - d̂_m)^2` subject to `d1^2 + d3^2 = d2^2 + d4^2`.
pub fn cml_refine_distances(measured: &DistanceVector) -> Result<Refinement> {
    let dh = measured.four()?;
    let k13 = dh[0] * dh[0] + dh[2] * dh[2];
    let k24 = dh[1] * dh[1] + dh[3] * dh[3];
    let root = (k13 * k24).sqrt();
    let candidate = |branch: Branch| -> Option<[f64; 4]> {
        let sign = if branch == Branch::Plus { 1.0 } else { -1.0 };
        let d1 = dh[0] * (k13 + sign * root) / (2.0 * k13);
        let den = 2.0 * d1 - dh[0];
        if d1 <= 0.0 || den <= 0.0 {
            return None;
        }
        Some([d1, dh[1] * d1 / den, dh[2] * d1 / dh[0], dh[3] * d1 / den])
    };
    let plus = candidate(Branch::Plus).map(|d| (d, objective(&d, &dh)));
    let minus = candidate(Branch::Minus).map(|d| (d, objective(&d, &dh)));
    let pick = |(d, j): ([f64; 4], f64), branch, rejected| Refinement {
        distances: d,
        branch,
        objective: j,
        rejected,
    };
    match (plus, minus) {
        (Some(p), Some(m)) if m.1 < p.1 - 1e-12 => Ok(pick(m, Branch::Minus, Some(p.1))),
        (Some(p), m) => Ok(pick(p, Branch::Plus, m.map(|m| m.1))),
        (None, Some(m)) => Ok(pick(m, Branch::Minus, None)),
        (None, None) => Err(Error::NoAdmissibleRoot),
    }
}

/// Position from refined distances in the canonical frame. `None` when
/// every radicand for x is negative.
fn canonical_position(d: &[f64; 4], a: f64, b: f64) -> Option<Vec3> {
    let sq = d.map(|v| v * v);
    let y = (sq[0] - sq[1] - sq[2] + sq[3] + 2.0 * a * a) / (4.0 * a);
    let z = (sq[0] + sq[1] - sq[2] - sq[3] + 2.0 * b * b) / (4.0 * b);
    let anchors = [(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)];
    let mut sum = 0.0;
    let mut count = 0;
    for (s, (ym, zm)) in sq.iter().zip(anchors) {
        let r = s - (y - ym).powi(2) - (z - zm).powi(2);
        if r >= 0.0 {
            sum += r.sqrt();
            count += 1;
        }
    }
    (count > 0).then(|| Vec3::new(sum / count as f64, y, z))
}

/// Closed-form CML position on the front side of the anchor plane.
pub fn cml_position(measured: &DistanceVector, rect: &AnchorRectangle) -> Result<PositionEstimate> {
    let dh = measured.four()?;
    let refined = cml_refine_distances(measured)?;
    let q = canonical_position(&refined.distances, rect.a, rect.b)
        .ok_or_else(|| Error::Localization("every x radicand is negative".into()))?;
    let position = rect.from_canonical(q);
    Ok(PositionEstimate {
        position,
        distances: refined.distances,
        objective: objective(&rect.distances(position), &dh),
        branch: Some(refined.branch),
    })
}

/// Fisher information of the position for range measurements with
/// variance `variance` to each anchor.
pub fn fim(p: Vec3, anchors: &[Vec3], variance: f64) -> Result<Matrix3<f64>> {
    if !(variance > 0.0) {
        return Err(Error::InvalidInput("distance variance must be positive".into()));
    }
    let mut psi = Matrix3::zeros();
    for &m in anchors {
        let d = p - m;
        let r2 = d.norm_squared();
        if r2 == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        let v = Vector3::new(d.x, d.y, d.z);
        psi += v * v.transpose() / (r2 * variance);
    }
    Ok(psi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crlb {
    pub matrix: Matrix3<f64>,
    /// `C_11 + C_22 + C_33`, m^2.
    pub sum: f64,
    pub condition: f64,
}

fn condition_number(psi: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    let eig = psi.symmetric_eigen();
    let (mut lo, mut hi) = (0, 0);
    for i in 0..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[lo] {
            lo = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[hi] {
            hi = i;
        }
    }
    let min = eig.eigenvalues[lo].max(0.0);
    let cond = if min == 0.0 {
        f64::INFINITY
    } else {
        eig.eigenvalues[hi] / min
    };
    (cond, eig.eigenvectors.column(lo).into_owned())
}

/// `Psi^-1` via Cholesky, with its trace.
pub fn crlb(psi: &Matrix3<f64>) -> Result<Crlb> {
    let (condition, null) = condition_number(psi);
    let singular = |condition| {
        let cause = if null.x.abs() > 0.9 {
            "UE lies in the anchor plane: no information along the plane normal"
        } else {
            "anchors and UE do not span three dimensions"
        };
        Error::SingularFim { condition, cause }
    };
    if !(condition <= MAX_CONDITION) {
        return Err(singular(condition));
    }
    let chol = psi.cholesky().ok_or_else(|| singular(condition))?;
    let matrix = chol.inverse();
    Ok(Crlb {
        matrix,
        sum: matrix.trace(),
        condition,
    })
}

/// CRLB of a position given the rectangle anchors.
pub fn position_crlb(p: Vec3, rect: &AnchorRectangle, variance: f64) -> Result<Crlb> {
    crlb(&fim(p, &rect.corners, variance)?)
}

fn positive_x(r: f64) -> Result<f64> {
    if r < 0.0 {
        Err(Error::Localization(format!("negative radicand {r:e} for x")))
    } else {
        Ok(r.sqrt())
    }
}

fn baseline_estimate(q: Vec3, rect: &AnchorRectangle, dh: &[f64; 4]) -> PositionEstimate {
    let position = rect.from_canonical(q);
    let distances = rect.distances(position);
    PositionEstimate {
        position,
        distances,
        objective: objective(&distances, dh),
        branch: None,
    }
}

/// Weighted least squares on squared ranges differenced against anchor 1.
/// `weights` apply to the equations of anchors 2, 3 and 4.
pub fn wls_position(
    measured: &DistanceVector,
    rect: &AnchorRectangle,
    weights: Option<[f64; 3]>,
) -> Result<PositionEstimate> {
    let dh = measured.four()?;
    let w = weights.unwrap_or([1.0; 3]);
    if w.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("WLS weights must be positive".into()));
    }
    let anchors = rect.canonical_corners();
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for m in 1..4 {
        let (ym, zm) = (anchors[m].y, anchors[m].z);
        let row = Vector2::new(2.0 * ym, 2.0 * zm);
        let value = dh[0] * dh[0] - dh[m] * dh[m] + ym * ym + zm * zm;
        normal += row * row.transpose() * w[m - 1];
        rhs += row * value * w[m - 1];
    }
    let yz = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Localization("singular WLS normal equations".into()))?;
    let x = positive_x(dh[0] * dh[0] - yz.x * yz.x - yz.y * yz.y)?;
    Ok(baseline_estimate(Vec3::new(x, yz.x, yz.y), rect, &dh))
}

/// Three-sphere intersection with anchors 1, 2 and 4.
pub fn trilateration_position(measured: &DistanceVector, rect: &AnchorRectangle) -> Result<PositionEstimate> {
    let dh = measured.four()?;
    let (a, b) = (rect.a, rect.b);
    let y = (dh[0] * dh[0] - dh[1] * dh[1] + a * a) / (2.0 * a);
    let z = (dh[0] * dh[0] - dh[3] * dh[3] + b * b) / (2.0 * b);
    let x = positive_x(dh[0] * dh[0] - y * y - z * z)?;
    Ok(baseline_estimate(Vec3::new(x, y, z), rect, &dh))
}
