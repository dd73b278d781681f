//! Planar points, affine vector fields and the switching line `y = 0`.
//!
//! The switching function is fixed to `f(x, y) = y`, so its gradient is
//! `(0, 1)` everywhere and every Lie derivative along `f` reduces to reading
//! the second component of a field.

use serde::{Deserialize, Serialize};

/// A point of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// A point on the switching line.
    pub const fn on_sigma(x: f64) -> Self {
        Self { x, y: 0.0 }
    }

    /// Returns `None` unless both coordinates are finite.
    pub fn try_new(x: f64, y: f64) -> Option<Self> {
        (x.is_finite() && y.is_finite()).then_some(Self { x, y })
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

/// Which half-plane a field governs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// `y >= 0`
    Upper,
    /// `y <= 0`
    Lower,
}

impl Side {
    /// `+1` for the upper half-plane, `-1` for the lower one.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }
}

/// `F(x, y) = (a11 x + a12 y + c1, a21 x + a22 y + c2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineField {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub c1: f64,
    pub c2: f64,
}

impl AffineField {
    pub const ZERO: AffineField = AffineField {
        a11: 0.0,
        a12: 0.0,
        a21: 0.0,
        a22: 0.0,
        c1: 0.0,
        c2: 0.0,
    };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64, c1: f64, c2: f64) -> Self {
        Self {
            a11,
            a12,
            a21,
            a22,
            c1,
            c2,
        }
    }

    pub fn eval(&self, p: Point) -> [f64; 2] {
        debug_assert!(p.is_finite(), "non-finite point {p:?}");
        [
            self.a11 * p.x + self.a12 * p.y + self.c1,
            self.a21 * p.x + self.a22 * p.y + self.c2,
        ]
    }

    /// Lie derivative of the switching function, `<grad f, F>`.
    pub fn lie(&self, p: Point) -> f64 {
        self.eval(p)[1]
    }

    /// Second Lie derivative `F.(F.f)`. The gradient of `F.f` is the constant
    /// row `(a21, a22)`.
    pub fn lie2(&self, p: Point) -> f64 {
        let [u, v] = self.eval(p);
        self.a21 * u + self.a22 * v
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// The unique zero of the field, when the linear part is invertible.
    pub fn equilibrium(&self) -> Option<Point> {
        let det = self.determinant();
        if det == 0.0 {
            return None;
        }
        let x = (-self.c1 * self.a22 + self.c2 * self.a12) / det;
        let y = (-self.a11 * self.c2 + self.a21 * self.c1) / det;
        Point::try_new(x, y)
    }

    pub fn negated(&self) -> AffineField {
        AffineField::new(
            -self.a11, -self.a12, -self.a21, -self.a22, -self.c1, -self.c2,
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.a11, self.a12, self.a21, self.a22, self.c1, self.c2]
            .iter()
            .all(|c| c.is_finite())
    }
}

/// `Z = (X, Y)`: `upper` governs `y >= 0`, `lower` governs `y <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonSmoothSystem {
    pub upper: AffineField,
    pub lower: AffineField,
}

impl NonSmoothSystem {
    pub const fn new(upper: AffineField, lower: AffineField) -> Self {
        Self { upper, lower }
    }

    pub fn field(&self, side: Side) -> &AffineField {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    /// Evaluates the field of the open half-plane containing `p`.
    /// Points on the switching line use the upper field.
    pub fn eval_off_sigma(&self, p: Point) -> [f64; 2] {
        if p.y >= 0.0 {
            self.upper.eval(p)
        } else {
            self.lower.eval(p)
        }
    }
}

pub fn eval(field: &AffineField, p: Point) -> [f64; 2] {
    field.eval(p)
}

pub fn lie(field: &AffineField, p: Point) -> f64 {
    field.lie(p)
}

pub fn lie2(field: &AffineField, p: Point) -> f64 {
    field.lie2(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // upper field of the invisible seed system: (1, -x)
    const SEED_UPPER_INVISIBLE: AffineField = AffineField::new(0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    const SEED_UPPER_VISIBLE: AffineField = AffineField::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0);

    #[test]
    fn eval_seed_upper_field() {
        assert_eq!(SEED_UPPER_INVISIBLE.eval(Point::new(0.3, 0.1)), [1.0, -0.3]);
        assert_eq!(AffineField::ZERO.eval(Point::new(0.7, -0.2)), [0.0, 0.0]);
    }

    #[test]
    fn eval_lower_family_member() {
        // alpha = -1, beta = 0.5: Y = (-(y + beta), -x)
        let y = AffineField::new(0.0, -1.0, -1.0, 0.0, -0.5, 0.0);
        assert_eq!(y.eval(Point::new(0.2, 0.0)), [-0.5, -0.2]);
        assert_eq!(y.lie(Point::new(0.2, 0.0)), -0.2);
    }

    #[test]
    fn lie_derivatives_of_seed_fields() {
        assert_eq!(SEED_UPPER_INVISIBLE.lie(Point::new(0.3, 0.0)), -0.3);
        assert_eq!(SEED_UPPER_INVISIBLE.lie2(Point::ORIGIN), -1.0);
        assert_eq!(SEED_UPPER_VISIBLE.lie2(Point::ORIGIN), 1.0);
        assert_eq!(AffineField::ZERO.lie2(Point::new(3.0, 4.0)), 0.0);
        assert_eq!(SEED_UPPER_INVISIBLE.lie(Point::new(0.0, 0.5)), 0.0);
    }

    #[test]
    fn equilibrium_of_saddle() {
        let y = AffineField::new(0.0, -1.0, -1.0, 0.0, -0.5, 0.0);
        let s = y.equilibrium().unwrap();
        assert_eq!(s, Point::new(0.0, -0.5));
        assert_eq!(y.eval(s), [0.0, 0.0]);
        assert!(SEED_UPPER_INVISIBLE.equilibrium().is_none());
    }

    fn coeff() -> impl Strategy<Value = f64> {
        -2.0f64..2.0
    }

    proptest! {
        #[test]
        fn eval_is_affine(
            a in proptest::array::uniform6(coeff()),
            px in coeff(), py in coeff(), qx in coeff(), qy in coeff(),
        ) {
            let f = AffineField::new(a[0], a[1], a[2], a[3], a[4], a[5]);
            let p = Point::new(px, py);
            let q = Point::new(qx, qy);
            let sum = f.eval(p + q);
            let (fp, fq, f0) = (f.eval(p), f.eval(q), f.eval(Point::ORIGIN));
            for k in 0..2 {
                prop_assert!((sum[k] - fq[k] - fp[k] + f0[k]).abs() < 1e-13);
            }
        }
    }
}
