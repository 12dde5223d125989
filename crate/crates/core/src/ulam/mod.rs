//! Ulam discretization of the twisted transfer operators
//! `P_w h = P(e^{i<w,F>} h)` and extraction of their leading eigenvalues.

mod arnoldi;
mod partition;
mod transition;
mod twisted;

pub use arnoldi::{cluster, default_start, leading_eigs, ArnoldiOptions, EigenResult, Eigenvalue};
pub use partition::{CellBounds, Partition};
pub use transition::{Tally, TransitionData, MAX_DISCARD_FRACTION};
pub use twisted::{assemble, phase, DenseOperator, LinearOperator, TwistedMatrix};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{Table, Twist};

/// Minimal modulus gap between the leading and second eigenvalue for `λ_w`
/// to count as a well-defined branch.
pub const MIN_GAP: f64 = 0.05;

pub fn build_transition(table: &Table, partition: &Partition, samples_per_cell: u32, seed: u64) -> Result<TransitionData> {
    TransitionData::build(table, partition, samples_per_cell, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub w: Twist,
    pub lambda: Complex64,
    pub multiplicity: usize,
    /// Largest modulus outside the leading cluster (second Ritz value).
    pub second: f64,
    /// `|λ_w| - second`; zero when the leading value is not simple.
    pub gap: f64,
    pub residual: f64,
}

impl CurvePoint {
    pub fn separated(&self) -> bool {
        self.gap > MIN_GAP
    }
}

/// Options for curve sweeps: only the leading value is converged, the gap
/// comes from the second Ritz value of the final projection.
pub fn curve_options(tol: f64) -> ArnoldiOptions {
    ArnoldiOptions {
        how_many: 1,
        rho_cut: 0.5,
        tol,
        ..Default::default()
    }
}

pub fn solve_point(transition: &TransitionData, w: Twist, opts: &ArnoldiOptions) -> Result<CurvePoint> {
    let r = leading_eigs(&assemble(transition, w), opts, None)?;
    Ok(point_from(w, &r))
}

pub(crate) fn point_from(w: Twist, r: &EigenResult) -> CurvePoint {
    let lead = r.leading;
    let second = r.second_modulus();
    let gap = if lead.multiplicity == 1 { lead.value.norm() - second } else { 0.0 };
    CurvePoint {
        w,
        lambda: lead.value,
        multiplicity: lead.multiplicity,
        second,
        gap,
        residual: lead.residual,
    }
}

/// `λ_w` for every twist, flagged (not rejected) where the gap collapses.
/// Each twist is solved from the same start vector, so the output does not
/// depend on how the work is scheduled.
pub fn sweep(transition: &TransitionData, twists: &[Twist], opts: &ArnoldiOptions) -> Result<Vec<CurvePoint>> {
    twists.par_iter().map(|&w| solve_point(transition, w, opts)).collect()
}

/// The leading branch `w ↦ λ_w`; fails on the first twist without a gap.
pub fn lambda_curve(transition: &TransitionData, twists: &[Twist], opts: &ArnoldiOptions) -> Result<Vec<CurvePoint>> {
    let pts = sweep(transition, twists, opts)?;
    if let Some(p) = pts.iter().find(|p| !p.separated()) {
        return Err(Error::GapCollapse { w: p.w, gap: p.gap });
    }
    Ok(pts)
}

/// Bootstrap standard errors `(se(Re λ_w), se(Im λ_w))` over multinomial
/// resamples of the tallies.
pub fn bootstrap_stderr(transition: &TransitionData, twists: &[Twist], replicates: usize, opts: &ArnoldiOptions) -> Result<Vec<[f64; 2]>> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 replicates".into()));
    }
    let samples: Vec<Vec<Complex64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let t = transition.bootstrap(b as u64);
            twists.iter().map(|&w| solve_point(&t, w, opts).map(|p| p.lambda)).collect()
        })
        .collect::<Result<_>>()?;
    let n = replicates as f64;
    Ok((0..twists.len())
        .map(|i| {
            let mean = samples.iter().map(|s| s[i]).sum::<Complex64>() / n;
            let (vr, vi) = samples.iter().fold((0.0, 0.0), |(a, b), s| {
                let d = s[i] - mean;
                (a + d.re * d.re, b + d.im * d.im)
            });
            [(vr / (n - 1.0)).sqrt(), (vi / (n - 1.0)).sqrt()]
        })
        .collect())
}

/// CSV export: `w1, w2, re_lambda, im_lambda, gap, residual`.
pub fn write_curve_csv<W: Write>(mut out: W, points: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(out, "w1,w2,re_lambda,im_lambda,gap,residual")?;
    for p in points {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e}",
            p.w.0[0], p.w.0[1], p.lambda.re, p.lambda.im, p.gap, p.residual
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_table;
    use nalgebra::DMatrix;

    fn small() -> TransitionData {
        let t = reference_table();
        let p = Partition::new(&t, 10, 20).unwrap();
        build_transition(&t, &p, 50, 7).unwrap()
    }

    fn dense_spectrum(m: &TwistedMatrix) -> Vec<Complex64> {
        let d = m.to_dense();
        let n = d.len();
        let a = DMatrix::from_fn(n, n, |i, j| d[i][j]);
        let (_, t) = a.schur().unpack();
        let mut ev: Vec<Complex64> = t.diagonal().iter().copied().collect();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
        ev
    }

    #[test]
    fn arnoldi_matches_dense_solver() {
        let td = small();
        assert_eq!(td.n_cells(), 400);
        for w in [Twist::ZERO, Twist::new(0.3, -0.1), Twist::new(2.0, 1.0)] {
            let m = assemble(&td, w);
            let dense = dense_spectrum(&m);
            let opts = ArnoldiOptions { how_many: 3, rho_cut: 0.05, tol: 1e-11, ..Default::default() };
            let r = leading_eigs(&m, &opts, None).unwrap();
            let mut k = 0;
            for e in &r.eigenvalues {
                for _ in 0..e.multiplicity {
                    let best = dense.iter().map(|z| (z - e.value).norm()).fold(f64::INFINITY, f64::min);
                    assert!(best < 1e-8, "w={w:?} {} vs dense {:?}", e.value, &dense[..4]);
                    k += 1;
                }
            }
            assert!(k >= 1);
            assert!((r.leading.value.norm() - dense[0].norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn untwisted_leading_pair_is_one_and_masses() {
        let t = reference_table();
        let td = build_transition(&t, &Partition::new(&t, 8, 8).unwrap(), 2000, 7).unwrap();
        let opts = ArnoldiOptions { how_many: 1, want_vector: true, ..Default::default() };
        let r = leading_eigs(&assemble(&td, Twist::ZERO), &opts, None).unwrap();
        assert!((r.leading.value - 1.0).norm() < 1e-10);
        let v = r.vector.unwrap();
        let masses = td.partition().masses();
        let total: Complex64 = v.iter().sum();
        // Stationary vector against cell masses: discretization error only.
        let err = v.iter().zip(&masses).map(|(x, m)| (x / total - m).norm()).sum::<f64>();
        assert!(err < 0.05, "L1 distance {err}");
    }

    #[test]
    fn conjugate_twists_give_conjugate_values() {
        let td = small();
        let w = Twist::new(0.2, 0.1);
        let opts = curve_options(1e-11);
        let a = solve_point(&td, w, &opts).unwrap();
        let b = solve_point(&td, -w, &opts).unwrap();
        assert!((a.lambda - b.lambda.conj()).norm() < 1e-9);
        assert!(a.separated());
    }

    #[test]
    fn sweep_and_curve() {
        let td = small();
        let opts = curve_options(1e-10);
        let ws: Vec<Twist> = (0..5).map(|i| Twist::new(0.05 * i as f64, 0.0)).collect();
        let pts = lambda_curve(&td, &ws, &opts).unwrap();
        assert!((pts[0].lambda - 1.0).norm() < 1e-10);
        for pair in pts.windows(2) {
            assert!((pair[0].lambda - pair[1].lambda).norm() < 0.01);
            assert!(pair[1].lambda.re < pair[0].lambda.re);
        }
        let mut out = Vec::new();
        write_curve_csv(&mut out, &pts).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("w1,w2,re_lambda,im_lambda,gap,residual\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn bootstrap_errors_are_finite() {
        let td = small();
        let se = bootstrap_stderr(&td, &[Twist::new(0.2, 0.0)], 4, &curve_options(1e-10)).unwrap();
        assert!(se[0][0] > 0.0 && se[0][0] < 0.05 && se[0][1].is_finite());
        assert!(bootstrap_stderr(&td, &[Twist::ZERO], 1, &curve_options(1e-10)).is_err());
    }
}
