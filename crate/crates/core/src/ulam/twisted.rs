use num_complex::Complex64;

use super::transition::TransitionData;
use crate::geometry::Twist;

/// A square complex operator applied as `y = A x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

/// `exp(i p)`, computed from `|p|` so that `phase(-p) == conj(phase(p))` bit
/// for bit.
#[inline]
pub fn phase(p: f64) -> Complex64 {
    let (s, c) = p.abs().sin_cos();
    Complex64::new(c, if p < 0.0 { -s } else { s })
}

/// Sparse twisted Ulam matrix in compressed-column form. Column `j` is the
/// distribution of `T`-images of cell `j`, weighted by `exp(i<w, F>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedMatrix {
    w: Twist,
    n: usize,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<Complex64>,
}

impl TwistedMatrix {
    pub fn twist(&self) -> Twist {
        self.w
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.rows[r.clone()].iter().map(|&i| i as usize).zip(self.vals[r].iter().copied())
    }

    pub fn column_sum(&self, j: usize) -> Complex64 {
        self.column(j).map(|(_, v)| v).sum()
    }

    /// Row-major dense copy; only sensible for small partitions.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.n]; self.n];
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                d[i][j] += v;
            }
        }
        d
    }
}

impl LinearOperator for TwistedMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (j, xj) in x.iter().enumerate() {
            if *xj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.rows[k] as usize] += self.vals[k] * xj;
            }
        }
    }
}

/// Reweights the tallies into `M(w)` without re-simulation, in `O(nnz)`.
pub fn assemble(transition: &TransitionData, w: Twist) -> TwistedMatrix {
    let n = transition.n_cells();
    let reach = transition.max_displacement();
    // exp(i w_a f) for f in [-reach, reach], built so that negating w conjugates exactly.
    let table = |wa: f64| -> Vec<Complex64> { (-reach..=reach).map(|f| phase(wa * f64::from(f))).collect() };
    let e1 = table(w.0[0]);
    let e2 = table(w.0[1]);
    let scale = 1.0 / f64::from(transition.samples_per_cell());

    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut rows = Vec::with_capacity(transition.nnz());
    let mut vals: Vec<Complex64> = Vec::with_capacity(transition.nnz());
    col_ptr.push(0);
    for j in 0..n {
        let start = rows.len();
        for t in transition.column(j) {
            let z = e1[(i32::from(t.f[0]) + reach) as usize] * e2[(i32::from(t.f[1]) + reach) as usize];
            let v = z * (f64::from(t.count) * scale);
            if rows.len() > start && *rows.last().unwrap() == t.target {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(t.target);
                vals.push(v);
            }
        }
        col_ptr.push(rows.len());
    }
    TwistedMatrix { w, n, col_ptr, rows, vals }
}

/// Dense row-major operator, used by tests and small examples.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub rows: Vec<Vec<Complex64>>,
}

impl DenseOperator {
    pub fn from_real(rows: &[Vec<f64>]) -> Self {
        DenseOperator {
            rows: rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect(),
        }
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_table;
    use crate::ulam::{Partition, TransitionData};

    fn td() -> TransitionData {
        let t = reference_table();
        TransitionData::build(&t, &Partition::new(&t, 10, 10).unwrap(), 40, 11).unwrap()
    }

    #[test]
    fn untwisted_columns_are_stochastic() {
        let td = td();
        let m = assemble(&td, Twist::ZERO);
        for j in 0..m.dim() {
            let s = m.column_sum(j);
            assert!((s.re - 1.0).abs() < 1e-14 && s.im == 0.0);
        }
    }

    #[test]
    fn negated_twist_is_exact_conjugate() {
        let td = td();
        for w in [Twist::new(0.3, -1.1), Twist::new(2.9, 0.0), Twist::new(-0.05, 4.0)] {
            let a = assemble(&td, w);
            let b = assemble(&td, -w);
            assert_eq!(a.rows, b.rows);
            for (x, y) in a.vals.iter().zip(&b.vals) {
                assert_eq!(*x, y.conj());
            }
        }
    }

    #[test]
    fn domination_and_periodicity() {
        let td = td();
        let m0 = assemble(&td, Twist::ZERO);
        let m = assemble(&td, Twist::new(0.7, 1.9));
        assert_eq!(m.rows, m0.rows);
        for (a, b) in m.vals.iter().zip(&m0.vals) {
            assert!(a.norm() <= b.re * (1.0 + 1e-14));
        }
        let full = assemble(&td, Twist::new(std::f64::consts::TAU, std::f64::consts::TAU));
        for (a, b) in full.vals.iter().zip(&m0.vals) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn phase_is_odd_in_the_imaginary_part() {
        for p in [0.0, 1e-9, 0.3, 3.0, 100.0] {
            assert_eq!(phase(-p), phase(p).conj());
        }
    }
}
