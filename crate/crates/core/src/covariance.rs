//! Diffusion matrix `Σ` of the displacement cocycle, estimated two ways:
//! a truncated Green–Kubo sum and the brute-force CLT covariance of long
//! Birkhoff sums. The two share no code beyond the orbit generator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{collide, sample_mu, PhasePoint, Step};
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::rng::{self, Rng};

pub type Mat2f = [[f64; 2]; 2];

/// Batches used for batch-mean error bars.
pub const BATCHES: usize = 100;
pub const DEFAULT_LAGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub matrix: Mat2f,
    pub stderr: Mat2f,
    pub lags_used: usize,
    pub samples: usize,
    pub discards: usize,
    pub discard_fraction: f64,
    pub seed: u64,
    /// Green–Kubo only: `C_n` for `n = 0..=lags` and their standard errors.
    pub correlations: Vec<Mat2f>,
    pub correlation_stderr: Vec<Mat2f>,
    /// CLT only: `E[S_n / n]` and its standard error.
    pub drift: [f64; 2],
    pub drift_stderr: [f64; 2],
}

impl SigmaEstimate {
    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        sym_eigenvalues(&self.matrix)
    }

    pub fn det(&self) -> f64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }

    /// `‖C_L‖` (max-entry norm) of the last included lag.
    pub fn tail_norm(&self) -> Option<f64> {
        self.correlations.last().map(max_abs)
    }

    /// Bias bound from discarded grazing orbits: `fraction · max|F|²`.
    pub fn discard_bias_bound(&self, max_displacement: i32) -> f64 {
        self.discard_fraction * f64::from(max_displacement * max_displacement)
    }

    pub fn report_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sigma": self.matrix,
            "stderr": self.stderr,
            "lags": self.lags_used,
            "samples": self.samples,
            "discard_fraction": self.discard_fraction,
            "seed": self.seed,
            "tail_norm": self.tail_norm(),
        })
    }

    fn check_positive(self) -> Result<Self> {
        let [lo, _] = self.eigenvalues();
        let err = max_abs(&self.stderr);
        if lo <= 3.0 * err {
            return Err(Error::DegenerateSigma(format!(
                "smallest eigenvalue {lo:.4e} within 3 sigma ({err:.2e}) of zero"
            )));
        }
        Ok(self)
    }
}

pub fn max_abs(m: &Mat2f) -> f64 {
    m.iter().flatten().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn sym_eigenvalues(m: &Mat2f) -> [f64; 2] {
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mean - r, mean + r]
}

/// Orbit from a fresh `μ` sample; restarts (and counts) on grazing hits.
fn fresh_orbit(table: &Table, r: &mut Rng, len: usize) -> Result<(Vec<[i8; 2]>, usize)> {
    let mut discards = 0;
    'restart: loop {
        let mut x: PhasePoint = sample_mu(table, r);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            match collide(table, &x) {
                Ok(Step { next, displacement, .. }) => {
                    out.push(displacement);
                    x = next;
                }
                Err(Error::GrazingCollision { .. }) => {
                    discards += 1;
                    continue 'restart;
                }
                Err(e) => return Err(e),
            }
        }
        return Ok((out, discards));
    }
}

#[derive(Clone)]
struct Accum {
    n: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Accum {
    fn new(dim: usize) -> Self {
        Accum { n: 0, sum: vec![0.0; dim], sumsq: vec![0.0; dim] }
    }

    fn push_batch_mean(&mut self, v: &[f64]) {
        self.n += 1;
        for (i, x) in v.iter().enumerate() {
            self.sum[i] += x;
            self.sumsq[i] += x * x;
        }
    }

    fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }

    fn stderr(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sumsq)
            .map(|(s, q)| {
                let m = s / n;
                ((q / n - m * m).max(0.0) * n / (n - 1.0).max(1.0) / n).sqrt()
            })
            .collect()
    }
}

fn batch_ranges(total: usize) -> Vec<std::ops::Range<usize>> {
    let b = BATCHES.min(total).max(1);
    (0..b).map(|i| (i * total / b)..((i + 1) * total / b)).collect()
}

fn to_mat(v: &[f64]) -> Mat2f {
    [[v[0], v[1]], [v[2], v[3]]]
}

/// Truncated Green–Kubo sum `Σ = C_0 + Σ_{n=1}^{L} (C_n + C_n^T)`,
/// `C_n = E_μ[F (F∘T^n)^T]`.
///
/// Each sample is an orbit of `2 L` collisions from a fresh `μ` point; `C_n`
/// is averaged over the first `L` starting times of the orbit.
pub fn green_kubo_sigma(table: &Table, n_samples: usize, n_lags: usize, seed: u64) -> Result<SigmaEstimate> {
    if n_lags == 0 || n_samples < 2 {
        return Err(Error::InvalidArgument("need n_lags >= 1 and n_samples >= 2".into()));
    }
    let lags = n_lags;
    let len = 2 * lags;
    // Layout per lag n: 4 entries of C_n, then 4 entries of the Σ contribution at the end.
    let dim = 4 * (lags + 1) + 4;
    let batches: Vec<(Vec<f64>, usize)> = batch_ranges(n_samples)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![0.0; dim];
            let mut discards = 0;
            let count = range.len();
            for i in range {
                let mut r = rng::stream(seed, rng::TAG_GREEN_KUBO, i as u64);
                let (f, d) = fresh_orbit(table, &mut r, len)?;
                discards += d;
                let mut c = vec![0.0; 4 * (lags + 1)];
                for t in 0..lags {
                    let a = [f64::from(f[t][0]), f64::from(f[t][1])];
                    for n in 0..=lags {
                        let b = [f64::from(f[t + n][0]), f64::from(f[t + n][1])];
                        c[4 * n] += a[0] * b[0];
                        c[4 * n + 1] += a[0] * b[1];
                        c[4 * n + 2] += a[1] * b[0];
                        c[4 * n + 3] += a[1] * b[1];
                    }
                }
                c.iter_mut().for_each(|x| *x /= lags as f64);
                let mut s = [c[0], c[1], c[2], c[3]];
                for n in 1..=lags {
                    let cn = &c[4 * n..4 * n + 4];
                    s[0] += 2.0 * cn[0];
                    s[1] += cn[1] + cn[2];
                    s[2] += cn[2] + cn[1];
                    s[3] += 2.0 * cn[3];
                }
                for (a, x) in acc.iter_mut().zip(c.iter().chain(s.iter())) {
                    *a += x;
                }
            }
            acc.iter_mut().for_each(|x| *x /= count as f64);
            Ok((acc, discards))
        })
        .collect::<Result<_>>()?;

    let mut stats = Accum::new(dim);
    let mut discards = 0;
    for (b, d) in &batches {
        stats.push_batch_mean(b);
        discards += d;
    }
    let mean = stats.mean();
    let err = stats.stderr();
    let tail = 4 * (lags + 1);
    let est = SigmaEstimate {
        matrix: symmetrize(to_mat(&mean[tail..])),
        stderr: to_mat(&err[tail..]),
        lags_used: lags,
        samples: n_samples,
        discards,
        discard_fraction: discards as f64 / (discards + n_samples) as f64,
        seed,
        correlations: (0..=lags).map(|n| to_mat(&mean[4 * n..4 * n + 4])).collect(),
        correlation_stderr: (0..=lags).map(|n| to_mat(&err[4 * n..4 * n + 4])).collect(),
        drift: [0.0; 2],
        drift_stderr: [0.0; 2],
    };
    est.check_positive()
}

fn symmetrize(m: Mat2f) -> Mat2f {
    let off = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], off], [off, m[1][1]]]
}

/// Brute-force oracle: `Cov(S_n)/n` over independent orbits,
/// `S_n = Σ_{k<n} F∘T^k`.
pub fn clt_sigma(table: &Table, n_orbits: usize, n_steps: usize, seed: u64) -> Result<SigmaEstimate> {
    if n_steps < 100 || n_orbits < 2 {
        return Err(Error::InvalidArgument("need n_steps >= 100 and n_orbits >= 2".into()));
    }
    // Per batch: sums of S (2) and S S^T / n (4).
    let batches: Vec<(Vec<f64>, usize, usize)> = batch_ranges(n_orbits)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![0.0; 6];
            let mut discards = 0;
            let count = range.len();
            for i in range {
                let mut r = rng::stream(seed, rng::TAG_CLT, i as u64);
                let (f, d) = fresh_orbit(table, &mut r, n_steps)?;
                discards += d;
                let s = f.iter().fold([0.0f64; 2], |a, x| [a[0] + f64::from(x[0]), a[1] + f64::from(x[1])]);
                let n = n_steps as f64;
                acc[0] += s[0] / n;
                acc[1] += s[1] / n;
                acc[2] += s[0] * s[0] / n;
                acc[3] += s[0] * s[1] / n;
                acc[4] += s[1] * s[0] / n;
                acc[5] += s[1] * s[1] / n;
            }
            Ok((acc, discards, count))
        })
        .collect::<Result<_>>()?;

    let mut stats = Accum::new(6);
    let mut discards = 0;
    let mut total = [0.0; 6];
    for (b, d, count) in &batches {
        discards += d;
        for (t, x) in total.iter_mut().zip(b) {
            *t += x;
        }
        let means: Vec<f64> = b.iter().map(|x| x / *count as f64).collect();
        stats.push_batch_mean(&means);
    }
    let n = n_orbits as f64;
    let steps = n_steps as f64;
    let m = [total[0] / n, total[1] / n];
    // Sample covariance of S: E[SS^T]/n_steps minus n_steps * mean(S/n)^2, Bessel-corrected.
    let raw = [total[2] / n, total[3] / n, total[4] / n, total[5] / n];
    let corr = n / (n - 1.0);
    let cov = [
        [(raw[0] - steps * m[0] * m[0]) * corr, (raw[1] - steps * m[0] * m[1]) * corr],
        [(raw[2] - steps * m[1] * m[0]) * corr, (raw[3] - steps * m[1] * m[1]) * corr],
    ];
    let err = stats.stderr();
    let est = SigmaEstimate {
        matrix: cov,
        stderr: [[err[2], err[3]], [err[4], err[5]]],
        lags_used: n_steps,
        samples: n_orbits,
        discards,
        discard_fraction: discards as f64 / (discards + n_orbits) as f64,
        seed,
        correlations: Vec::new(),
        correlation_stderr: Vec::new(),
        drift: m,
        drift_stderr: [err[0], err[1]],
    };
    Ok(est)
}
