use serde::{Deserialize, Serialize};

use super::{Twist, TWO_PI};
use crate::error::{Error, Result};

/// Row-major 2x2 integer matrix.
pub type Mat2 = [[i64; 2]; 2];

const IDENTITY: Mat2 = [[1, 0], [0, 1]];

pub fn det(m: &Mat2) -> i64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// A finite-index sublattice of `Z²`, generated by the columns of `matrix`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    matrix: Mat2,
}

impl Lattice {
    pub fn new(matrix: Mat2) -> Result<Self> {
        if det(&matrix) == 0 {
            return Err(Error::SingularLattice(matrix));
        }
        Ok(Lattice { matrix })
    }

    pub fn diagonal(a: i64, b: i64) -> Result<Self> {
        Lattice::new([[a, 0], [0, b]])
    }

    pub fn identity() -> Self {
        Lattice { matrix: IDENTITY }
    }

    /// `NZ × Z`.
    pub fn family_one(n: i64) -> Result<Self> {
        Lattice::diagonal(n, 1)
    }

    /// `(NZ)²`.
    pub fn family_two(n: i64) -> Result<Self> {
        Lattice::diagonal(n, n)
    }

    pub fn matrix(&self) -> Mat2 {
        self.matrix
    }

    /// `|G| = |Z² / Λ| = |det A|`.
    pub fn index(&self) -> usize {
        det(&self.matrix).unsigned_abs() as usize
    }
}

/// `U A V = diag(d)` with `U`, `V` unimodular and `d[0] | d[1]`, both positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Snf {
    pub u: Mat2,
    pub d: [i64; 2],
    pub v: Mat2,
}

impl Snf {
    pub fn diagonal(&self) -> Mat2 {
        [[self.d[0], 0], [0, self.d[1]]]
    }
}

pub fn smith_normal_form(a: Mat2) -> Result<Snf> {
    if det(&a) == 0 {
        return Err(Error::SingularLattice(a));
    }
    let mut m = a;
    let mut u = IDENTITY;
    let mut v = IDENTITY;

    loop {
        // Smallest nonzero entry to the pivot position.
        let (pi, pj) = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .filter(|&(i, j)| m[i][j] != 0)
            .min_by_key(|&(i, j)| m[i][j].abs())
            .expect("nonsingular matrix has a nonzero entry");
        if pi == 1 {
            m.swap(0, 1);
            u.swap(0, 1);
        }
        if pj == 1 {
            for row in m.iter_mut().chain(v.iter_mut()) {
                row.swap(0, 1);
            }
        }

        let p = m[0][0];
        let q = m[1][0].div_euclid(p);
        for j in 0..2 {
            m[1][j] -= q * m[0][j];
            u[1][j] -= q * u[0][j];
        }
        let q = m[0][1].div_euclid(p);
        for row in m.iter_mut() {
            row[1] -= q * row[0];
        }
        for row in v.iter_mut() {
            row[1] -= q * row[0];
        }
        if m[1][0] != 0 || m[0][1] != 0 {
            continue;
        }
        if m[1][1] % m[0][0] != 0 {
            for j in 0..2 {
                m[0][j] += m[1][j];
                u[0][j] += u[1][j];
            }
            continue;
        }
        break;
    }

    for i in 0..2 {
        if m[i][i] < 0 {
            for j in 0..2 {
                m[i][j] = -m[i][j];
                u[i][j] = -u[i][j];
            }
        }
    }
    Ok(Snf { u, d: [m[0][0], m[1][1]], v })
}

/// A character `χ = exp(i<w, ·>)` of `G = Z²/Λ`, stored exactly as
/// `w = 2π num / den` with `num` reduced to `[0, den)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Character {
    pub num: [i64; 2],
    pub den: i64,
}

impl Character {
    /// Representative in `[0, 2π)²`.
    pub fn twist(&self) -> Twist {
        let d = self.den as f64;
        Twist(self.num.map(|n| TWO_PI * n as f64 / d))
    }

    /// Representative with numerators in `(-den/2, den/2]`. Negating a
    /// character negates this twist exactly.
    pub fn centered_twist(&self) -> Twist {
        let d = self.den as f64;
        Twist(self.centered_num().map(|n| TWO_PI * n as f64 / d))
    }

    pub fn centered_num(&self) -> [i64; 2] {
        self.num.map(|n| if 2 * n > self.den { n - self.den } else { n })
    }

    pub fn neg(&self) -> Character {
        Character {
            num: self.num.map(|n| (-n).rem_euclid(self.den)),
            den: self.den,
        }
    }

    pub fn is_self_conjugate(&self) -> bool {
        self.neg() == *self
    }

    /// `<w, λ> / 2π`, exact as a rational with denominator `den`.
    pub fn pairing_num(&self, v: [i64; 2]) -> i64 {
        self.num[0] * v[0] + self.num[1] * v[1]
    }
}

/// The dual group of `Z²/Λ`, canonically ordered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterSet {
    pub lattice: Lattice,
    pub characters: Vec<Character>,
}

impl CharacterSet {
    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    pub fn twists(&self) -> Vec<Twist> {
        self.characters.iter().map(Character::twist).collect()
    }

    pub fn position(&self, c: &Character) -> Option<usize> {
        self.characters.binary_search(c).ok()
    }
}

/// Enumerates `Ĝ` as `w = 2π A^{-T} k mod 2π`, via the Smith form of `A`.
pub fn characters(lattice: &Lattice) -> Result<CharacterSet> {
    let snf = smith_normal_form(lattice.matrix())?;
    let [d1, d2] = snf.d;
    let u = snf.u;
    let mut chars = Vec::with_capacity((d1 * d2) as usize);
    for m1 in 0..d1 {
        for m2 in 0..d2 {
            // w = 2π U^T (m1/d1, m2/d2) = 2π U^T (m1 d2/d1, m2) / d2
            let k = [m1 * (d2 / d1), m2];
            let num = [
                (u[0][0] * k[0] + u[1][0] * k[1]).rem_euclid(d2),
                (u[0][1] * k[0] + u[1][1] * k[1]).rem_euclid(d2),
            ];
            chars.push(Character { num, den: d2 });
        }
    }
    chars.sort();
    Ok(CharacterSet {
        lattice: *lattice,
        characters: chars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;
    use std::f64::consts::PI;

    fn check_snf(a: Mat2, d: [i64; 2]) {
        let s = smith_normal_form(a).unwrap();
        assert_eq!(mul(&mul(&s.u, &a), &s.v), s.diagonal());
        assert_eq!(s.d, d);
        assert_eq!(det(&s.u).abs(), 1);
        assert_eq!(det(&s.v).abs(), 1);
    }

    #[test]
    fn snf_examples() {
        check_snf([[2, 0], [0, 3]], [1, 6]);
        check_snf([[8, 0], [0, 1]], [1, 8]);
        check_snf([[2, 1], [0, 2]], [1, 4]);
        check_snf([[4, 0], [0, 6]], [2, 12]);
        check_snf([[-3, 0], [0, 3]], [3, 3]);
        check_snf([[0, 5], [7, 0]], [1, 35]);
        assert!(matches!(smith_normal_form([[1, 2], [2, 4]]), Err(Error::SingularLattice(_))));
    }

    #[test]
    fn characters_of_diag_2_3() {
        let cs = characters(&Lattice::diagonal(2, 3).unwrap()).unwrap();
        assert_eq!(cs.len(), 6);
        let got: BTreeSet<(i64, i64)> = cs
            .twists()
            .iter()
            .map(|w| ((w.0[0] / PI * 6.0).round() as i64, (w.0[1] / PI * 6.0).round() as i64))
            .collect();
        let mut want = BTreeSet::new();
        for j in 0..2 {
            for k in 0..3 {
                want.insert((6 * j, 4 * k));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn trivial_and_cyclic_lattices() {
        let cs = characters(&Lattice::identity()).unwrap();
        assert_eq!(cs.twists(), vec![Twist::ZERO]);
        let cs = characters(&Lattice::family_one(8).unwrap()).unwrap();
        let want: Vec<Twist> = (0..8).map(|j| Twist::new(TWO_PI * j as f64 / 8.0, 0.0)).collect();
        assert_eq!(cs.twists(), want);
        assert!(Lattice::diagonal(0, 3).is_err());
    }

    #[test]
    fn centered_twist_negates_exactly() {
        let cs = characters(&Lattice::family_two(6).unwrap()).unwrap();
        for c in &cs.characters {
            let n = c.neg();
            let (a, b) = (n.centered_twist(), c.centered_twist());
            for i in 0..2 {
                if 2 * c.num[i] != c.den {
                    assert_eq!(a.0[i], -b.0[i]);
                }
            }
            assert_eq!(n.neg(), *c);
        }
    }

    fn lattice_strategy() -> impl Strategy<Value = Mat2> {
        prop::array::uniform4(-9i64..=9)
            .prop_map(|[a, b, c, d]| [[a, b], [c, d]])
            .prop_filter("nonsingular, |det| <= 64", |m| det(m) != 0 && det(m).abs() <= 64)
    }

    proptest! {
        #[test]
        fn snf_reconstructs(a in lattice_strategy()) {
            let s = smith_normal_form(a).unwrap();
            prop_assert_eq!(mul(&mul(&s.u, &a), &s.v), s.diagonal());
            prop_assert!(s.d[0] > 0 && s.d[1] % s.d[0] == 0);
            prop_assert_eq!(s.d[0] * s.d[1], det(&a).abs());
        }

        #[test]
        fn character_set_is_the_dual_group(a in lattice_strategy()) {
            let lat = Lattice::new(a).unwrap();
            let cs = characters(&lat).unwrap();
            prop_assert_eq!(cs.len(), lat.index());
            let distinct: BTreeSet<_> = cs.characters.iter().collect();
            prop_assert_eq!(distinct.len(), cs.len());
            for c in &cs.characters {
                // Trivial on both generators, exactly.
                for col in 0..2 {
                    prop_assert_eq!(c.pairing_num([a[0][col], a[1][col]]).rem_euclid(c.den), 0);
                    let w = c.twist();
                    let p = w.0[0] * a[0][col] as f64 + w.0[1] * a[1][col] as f64;
                    prop_assert!((p / TWO_PI - (p / TWO_PI).round()).abs() < 1e-12);
                }
                prop_assert!(cs.position(&c.neg()).is_some());
            }
        }
    }
}
