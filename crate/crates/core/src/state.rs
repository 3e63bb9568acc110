//! Single-target state and range-bearing measurement values.

use std::ops::{Add, Index, Mul, Sub};

use crate::scalar::Scalar;

/// Constant-velocity state `[p_x, v_x, p_y, v_y]` in metres and metres per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State<T>(pub [T; 4]);

impl<T: Scalar> State<T> {
    pub fn new(px: T, vx: T, py: T, vy: T) -> Self {
        State([px, vx, py, vy])
    }

    pub fn zero() -> Self {
        State([T::zero(); 4])
    }

    pub fn from_f64(v: [f64; 4]) -> Self {
        State(v.map(T::of))
    }

    pub fn to_f64(self) -> [f64; 4] {
        self.0.map(Scalar::as_f64)
    }

    #[inline]
    pub fn px(&self) -> T {
        self.0[0]
    }
    #[inline]
    pub fn vx(&self) -> T {
        self.0[1]
    }
    #[inline]
    pub fn py(&self) -> T {
        self.0[2]
    }
    #[inline]
    pub fn vy(&self) -> T {
        self.0[3]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Euclidean distance between the position parts of two states.
    pub fn position_distance(&self, other: &Self) -> T {
        (self.px() - other.px()).hypot(self.py() - other.py())
    }
}

impl<T> Index<usize> for State<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Scalar> Add for State<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        State(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl<T: Scalar> Sub for State<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        State(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl<T: Scalar> Mul<T> for State<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        State(self.0.map(|v| v * rhs))
    }
}

/// Range (m) and bearing (rad, in `(-π, π]`) of a point as seen from the sensor
/// at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<T> {
    pub range: T,
    pub bearing: T,
}

impl<T: Scalar> Measurement<T> {
    pub fn new(range: T, bearing: T) -> Self {
        Measurement { range, bearing }
    }

    /// Cartesian position `(x, y)` this measurement points at.
    pub fn to_cartesian(&self) -> (T, T) {
        (self.range * self.bearing.cos(), self.range * self.bearing.sin())
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle<T: Scalar>(angle: T) -> T {
    let pi = T::of(std::f64::consts::PI);
    let two_pi = pi + pi;
    let mut a = angle % two_pi;
    if a > pi {
        a -= two_pi;
    } else if a <= -pi {
        a += two_pi;
    }
    a
}
