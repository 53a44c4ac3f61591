//! Fixed-size vector algebra for state space.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// 3x3 real matrix. Used for Jacobians, Hessians and monodromy matrices.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// A point or tangent vector in state space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Right-handed cross product.
    #[inline]
    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction; `None` for (near-)zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

/// Right-handed cross product, free-function form.
#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    a.cross(b)
}

/// Vector triple product a x (b x c), expanded as b<a,c> - c<a,b>.
///
/// Agrees with `cross(a, cross(b, c))`; the expanded form is the algebraic
/// identity behind the perturbation terms and their decay rates.
#[inline]
pub fn triple_expand(a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    b * a.dot(c) - c * a.dot(b)
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec3) {
        *self = *self - rhs;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basis_cross() {
        let e1 = Vec3::new(1.0, 0.0, 0.0);
        let e2 = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(cross(e1, e2), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn self_cross_vanishes() {
        let a = Vec3::new(0.3, -1.7, 2.2);
        assert_eq!(cross(a, a), Vec3::ZERO);
    }

    #[test]
    fn rikitake_gradient_cross() {
        // grad H x grad C for the two-disk dynamo at (1,1,1), beta = 1.
        let gh = Vec3::new(-0.5, 0.5, -1.0);
        let gc = Vec3::new(1.0, 1.0, 2.0);
        let g = cross(gh, gc);
        assert!((g - Vec3::new(2.0, 0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn triple_expand_rikitake_value() {
        // a = grad C, b = grad H, c = grad C: |gc|^2 = 6, <gc,gh> = -2,
        // so a x (b x c) = 6 gh + 2 gc = (-1, 5, -2).
        let gh = Vec3::new(-0.5, 0.5, -1.0);
        let gc = Vec3::new(1.0, 1.0, 2.0);
        let t = triple_expand(gc, gh, gc);
        assert!((t - Vec3::new(-1.0, 5.0, -2.0)).norm() < 1e-14);
    }

    #[test]
    fn triple_expand_degenerate() {
        let a = Vec3::new(0.4, 1.0, -2.0);
        assert_eq!(triple_expand(a, a, a), Vec3::ZERO);
    }

    fn small_vec() -> impl Strategy<Value = Vec3> {
        (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn cross_antisymmetric(a in small_vec(), b in small_vec()) {
            let lhs = cross(a, b);
            let rhs = -cross(b, a);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }

        #[test]
        fn cross_orthogonal_to_factors(a in small_vec(), b in small_vec()) {
            let c = cross(a, b);
            let scale = 1.0 + a.norm() * b.norm() * (a.norm() + b.norm());
            prop_assert!(c.dot(a).abs() <= 1e-12 * scale);
            prop_assert!(c.dot(b).abs() <= 1e-12 * scale);
        }

        #[test]
        fn triple_expand_matches_nested_cross(a in small_vec(), b in small_vec(), c in small_vec()) {
            let direct = cross(a, cross(b, c));
            let expanded = triple_expand(a, b, c);
            let scale = 1.0 + a.norm() * b.norm() * c.norm();
            prop_assert!((direct - expanded).norm() <= 1e-12 * scale);
        }
    }
}
