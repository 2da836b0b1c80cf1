//! Small planar vector and matrix types shared by every module.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// A point of the aerial chart `(x, y)`.
pub type AerialPoint = Vec2;

/// A tangent vector in aerial components.
pub type TangentVector = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2 { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; equals `det[self | o]`.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn lerp(self, o: Vec2, s: f64) -> Vec2 {
        self + (o - self) * s
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// Symmetric 2x2 matrix `[[m11, m12], [m12, m22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        m11: 1.0,
        m12: 0.0,
        m22: 1.0,
    };

    #[inline]
    pub const fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Sym2 { m11, m12, m22 }
    }

    /// `u uᵀ`
    #[inline]
    pub fn outer(u: Vec2) -> Self {
        Sym2::new(u.x * u.x, u.x * u.y, u.y * u.y)
    }

    /// `u wᵀ + w uᵀ`
    #[inline]
    pub fn sym_outer(u: Vec2, w: Vec2) -> Self {
        Sym2::new(2.0 * u.x * w.x, u.x * w.y + u.y * w.x, 2.0 * u.y * w.y)
    }

    #[inline]
    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m11 * v.x + self.m12 * v.y,
            self.m12 * v.x + self.m22 * v.y,
        )
    }

    /// Bilinear form `uᵀ M w`.
    #[inline]
    pub fn form(&self, u: Vec2, w: Vec2) -> f64 {
        u.dot(self.apply(w))
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Sym2::new(self.m22 / d, -self.m12 / d, self.m11 / d))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * self.trace();
        let half_diff = 0.5 * (self.m11 - self.m22);
        let r = half_diff.hypot(self.m12);
        (mean - r, mean + r)
    }

    pub fn max_abs(&self) -> f64 {
        self.m11.abs().max(self.m12.abs()).max(self.m22.abs())
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    #[inline]
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.m11 + o.m11, self.m12 + o.m12, self.m22 + o.m22)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    #[inline]
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.m11 - o.m11, self.m12 - o.m12, self.m22 - o.m22)
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    #[inline]
    fn mul(self, s: f64) -> Sym2 {
        Sym2::new(self.m11 * s, self.m12 * s, self.m22 * s)
    }
}

/// Signed area of a closed polygon (positive when counterclockwise).
pub fn signed_area(points: &[Vec2]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        let q = points[(i + 1) % points.len()];
        acc += p.cross(q);
    }
    0.5 * acc
}

/// Winding number of `polygon` around `p`; zero means outside.
pub fn winding_number(polygon: &[Vec2], p: Vec2) -> i32 {
    let n = polygon.len();
    let mut wn = 0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Orientation of the triple `(a, b, c)` with coordinates snapped to a 1e-12 lattice.
/// Returns +1 for counterclockwise, -1 for clockwise and 0 for collinear.
pub fn orientation(a: Vec2, b: Vec2, c: Vec2) -> i8 {
    let snap = |v: Vec2| Vec2::new(snap_coord(v.x), snap_coord(v.y));
    let (a, b, c) = (snap(a), snap(b), snap(c));
    let d = (b - a).cross(c - a);
    let scale = (b - a).norm() * (c - a).norm();
    if d.abs() <= 4.0 * f64::EPSILON * scale {
        0
    } else if d > 0.0 {
        1
    } else {
        -1
    }
}

#[inline]
fn snap_coord(v: f64) -> f64 {
    (v * 1e12).round() * 1e-12
}

/// Proper intersection of segments `[p1, p2]` and `[q1, q2]`: the segments cross at a single
/// interior point. Touching endpoints and collinear overlaps do not count.
pub fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> Option<Vec2> {
    let o1 = orientation(p1, p2, q1);
    let o2 = orientation(p1, p2, q2);
    let o3 = orientation(q1, q2, p1);
    let o4 = orientation(q1, q2, p2);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        let r = p2 - p1;
        let s = q2 - q1;
        let denom = r.cross(s);
        let u = (q1 - p1).cross(s) / denom;
        Some(p1 + r * u)
    } else {
        None
    }
}
