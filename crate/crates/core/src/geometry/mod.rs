//! Billiard tables of discs on the unit torus, plus the lattice and character
//! arithmetic used to build Abelian covers.

mod lattice;
mod table;

pub use lattice::{characters, det, mul, smith_normal_form, Character, CharacterSet, Lattice, Mat2, Snf};
pub use table::{reference_discs, reference_table, validate_table, Candidate, Disc, Table, TableConfig, HORIZON_SLACK};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// A twist `w` in `2πT²`, acting on displacements through `exp(i<w, F>)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Twist(pub [f64; 2]);

impl Twist {
    pub const ZERO: Twist = Twist([0.0, 0.0]);

    pub fn new(w1: f64, w2: f64) -> Self {
        Twist([w1, w2])
    }

    /// `<w, F>` for an integer displacement.
    #[inline]
    pub fn pairing(&self, f: [i8; 2]) -> f64 {
        self.0[0] * f64::from(f[0]) + self.0[1] * f64::from(f[1])
    }

    pub fn norm(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }

    /// Representative in `[0, 2π)²`.
    pub fn canonical(&self) -> Twist {
        Twist(self.0.map(|x| {
            let r = x.rem_euclid(TWO_PI);
            if r >= TWO_PI {
                0.0
            } else {
                r
            }
        }))
    }

    /// Representative in `(-π, π]²`.
    pub fn centered(&self) -> Twist {
        Twist(self.0.map(|x| {
            let r = x.rem_euclid(TWO_PI);
            if r > PI {
                r - TWO_PI
            } else {
                r
            }
        }))
    }

    /// `w^T S w` for a symmetric 2x2 matrix.
    pub fn quadratic_form(&self, s: &[[f64; 2]; 2]) -> f64 {
        let [a, b] = self.0;
        s[0][0] * a * a + (s[0][1] + s[1][0]) * a * b + s[1][1] * b * b
    }
}

impl std::ops::Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist([-self.0[0], -self.0[1]])
    }
}

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
