//! The acceptance suite: eleven checks on the reference table, each reported
//! as a pass/fail line with the numbers behind it.
//!
//! Expensive inputs (transition data, `Σ̂`, `δ`, cover spectra) are computed
//! once on first use and shared between criteria.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::covariance::{clt_sigma, green_kubo_sigma, SigmaEstimate};
use crate::dynamics::{collide, involution, sample_mu, PhasePoint, Step};
use crate::error::{Error, Result};
use crate::geometry::{characters, det, mul, reference_table, smith_normal_form, Lattice, Table, Twist};
use crate::rng;
use crate::spectra::{
    choose_delta, choose_delta0, count_window, cover_spectrum, density_from_spectra, line_fraction_above,
    CoverSpectrum, DeltaChoice, DensityOptions, DensityReport, Family,
};
use crate::ulam::{
    assemble, bootstrap_stderr, build_transition, curve_options, sweep, CurvePoint, Partition, TransitionData, MIN_GAP,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceConfig {
    pub n_phi: usize,
    pub n_s: usize,
    pub samples_per_cell: u32,
    pub seed: u64,
    pub tol: f64,
    pub gk_samples: usize,
    pub gk_lags: usize,
    pub clt_orbits: usize,
    pub clt_steps: usize,
    pub bootstrap_replicates: usize,
    /// Side of the twist grid probed for the automatic `δ`.
    pub delta_grid: usize,
    pub family_one_n: Vec<i64>,
    pub family_two_n: i64,
    pub bins_family_one: usize,
    pub bins_family_two: usize,
    /// Fine grid on `[0, π]` for the family-1 counting oracle.
    pub oracle_points: usize,
    pub refine_factor: usize,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            n_phi: 128,
            n_s: 128,
            samples_per_cell: 200,
            seed: 42,
            tol: 1e-10,
            gk_samples: 400_000,
            gk_lags: 30,
            clt_orbits: 20_000,
            clt_steps: 1_000,
            bootstrap_replicates: 10,
            delta_grid: 16,
            family_one_n: vec![16, 32, 64, 128, 256],
            family_two_n: 64,
            bins_family_one: 8,
            bins_family_two: 4,
            oracle_points: 129,
            refine_factor: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: Option<f64>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} ({}): {} [{:.1}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub const NAMES: [&str; 11] = [
    "exact algebraic invariants",
    "dynamics identities",
    "measure invariance and centering",
    "sigma cross-validation",
    "Nagaev-Guivarc'h expansion",
    "realness and symmetry near 1",
    "numeric aperiodicity",
    "linear counting",
    "density law, family 1",
    "density law, family 2",
    "refinement stability",
];

/// Stated runtime budgets in seconds; `None` where none is given.
pub const BUDGETS: [Option<f64>; 11] = [
    Some(60.0),
    Some(60.0),
    Some(120.0),
    Some(300.0),
    Some(600.0),
    None,
    Some(1800.0),
    None,
    Some(900.0),
    Some(1800.0),
    Some(1200.0),
];

/// Tolerances pinned by the suite.
pub mod tolerance {
    pub const ROUND_TRIP: f64 = 1e-8;
    pub const REFLECTION: f64 = 1e-10;
    pub const SANTALO_REL: f64 = 0.01;
    /// Kolmogorov–Smirnov critical constant at the 1% level.
    pub const KS_1PCT: f64 = 1.63;
    pub const EXPANSION_REL: f64 = 0.10;
    pub const COUNT_INTERVAL: (f64, f64) = (0.1, 1.0);
    pub const COUNT_CAUCHY: f64 = 0.05;
    pub const COUNT_ORACLE: f64 = 0.05;
    pub const FAMILY_ONE_MASS: f64 = 0.10;
    pub const FAMILY_ONE_SUP: f64 = 0.05;
    pub const FAMILY_TWO_FLAT: f64 = 0.15;
}

pub const EXPANSION_RADII: [f64; 4] = [0.05, 0.1, 0.15, 0.2];

/// `|w| ∈ EXPANSION_RADII` in the 8 directions `kπ/4`; index `4r + k`.
pub fn expansion_grid() -> Vec<Twist> {
    EXPANSION_RADII
        .iter()
        .flat_map(|&r| (0..8).map(move |k| Twist::new(r * (k as f64 * FRAC_PI_4).cos(), r * (k as f64 * FRAC_PI_4).sin())))
        .collect()
}

type Shared<T> = OnceLock<Result<T>>;

pub struct Suite {
    pub config: AcceptanceConfig,
    table: OnceLock<Table>,
    transition: Shared<TransitionData>,
    refined: Shared<TransitionData>,
    gk: Shared<SigmaEstimate>,
    clt: Shared<SigmaEstimate>,
    delta: Shared<DeltaChoice>,
    family_one: Shared<Vec<(i64, CoverSpectrum)>>,
    family_two: Shared<DensityReport>,
}

fn shared<T: Clone>(cell: &Shared<T>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(f).as_ref().map_err(Clone::clone)
}

impl Suite {
    pub fn new(config: AcceptanceConfig) -> Self {
        Suite {
            config,
            table: OnceLock::new(),
            transition: OnceLock::new(),
            refined: OnceLock::new(),
            gk: OnceLock::new(),
            clt: OnceLock::new(),
            delta: OnceLock::new(),
            family_one: OnceLock::new(),
            family_two: OnceLock::new(),
        }
    }

    pub fn table(&self) -> &Table {
        self.table.get_or_init(reference_table)
    }

    pub fn transition(&self) -> Result<&TransitionData> {
        shared(&self.transition, || {
            let c = &self.config;
            let p = Partition::new(self.table(), c.n_phi, c.n_s)?;
            build_transition(self.table(), &p, c.samples_per_cell, c.seed)
        })
    }

    pub fn refined(&self) -> Result<&TransitionData> {
        shared(&self.refined, || {
            let c = &self.config;
            let p = Partition::new(self.table(), c.n_phi, c.n_s)?.refined(c.refine_factor);
            build_transition(self.table(), &p, c.samples_per_cell, c.seed)
        })
    }

    pub fn green_kubo(&self) -> Result<&SigmaEstimate> {
        shared(&self.gk, || green_kubo_sigma(self.table(), self.config.gk_samples, self.config.gk_lags, self.config.seed))
    }

    pub fn clt(&self) -> Result<&SigmaEstimate> {
        shared(&self.clt, || clt_sigma(self.table(), self.config.clt_orbits, self.config.clt_steps, self.config.seed))
    }

    pub fn delta(&self) -> Result<&DeltaChoice> {
        shared(&self.delta, || {
            choose_delta(self.transition()?, self.config.delta_grid, self.config.tol).map(|(d, _)| d)
        })
    }

    pub fn delta0(&self) -> Result<f64> {
        Ok(choose_delta0(self.delta()?.delta, &self.green_kubo()?.matrix))
    }

    /// Cut for the family-1 spectra: below `1 - δ` by half the gap margin.
    pub fn count_cut(&self) -> Result<f64> {
        Ok(1.0 - self.delta()?.delta - 0.5 * MIN_GAP)
    }

    pub fn family_one(&self) -> Result<&Vec<(i64, CoverSpectrum)>> {
        shared(&self.family_one, || {
            let td = self.transition()?;
            let cut = self.count_cut()?;
            self.config
                .family_one_n
                .iter()
                .map(|&n| Ok((n, cover_spectrum(td, &Family::One.lattice(n)?, cut, 2, self.config.tol)?)))
                .collect()
        })
    }

    pub fn family_two(&self) -> Result<&DensityReport> {
        shared(&self.family_two, || {
            let d0 = self.delta0()?;
            let n = self.config.family_two_n;
            let cs = cover_spectrum(self.transition()?, &Family::Two.lattice(n)?, 1.0 - 2.0 * d0, 2, self.config.tol)?;
            density_from_spectra(
                Family::Two,
                vec![(n, cs)],
                d0,
                self.config.bins_family_two,
                &self.green_kubo()?.matrix,
                &self.density_options(),
            )
        })
    }

    fn density_options(&self) -> DensityOptions {
        DensityOptions {
            tol: self.config.tol,
            ..Default::default()
        }
    }

    pub fn run(&self, id: u8) -> CriterionResult {
        let start = Instant::now();
        let outcome = match id {
            1 => self.algebraic(),
            2 => self.dynamics(),
            3 => self.measure(),
            4 => self.sigma(),
            5 => self.expansion(self.transition()),
            6 => self.realness(self.transition()),
            7 => self.aperiodicity(),
            8 => self.counting(),
            9 => self.density_one(),
            10 => self.density_two(),
            11 => self.refinement(),
            _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        let idx = usize::from(id).saturating_sub(1).min(10);
        let budget = BUDGETS[idx];
        let (mut passed, mut detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = budget {
            if seconds > b {
                passed = false;
                detail.push_str(&format!("; over budget {b:.0}s"));
            }
        }
        CriterionResult {
            id,
            name: NAMES.get(idx).copied().unwrap_or("unknown").to_string(),
            passed,
            detail,
            seconds,
            budget_seconds: budget,
        }
    }

    pub fn run_all(&self, mut each: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
        (1..=11)
            .map(|id| {
                let r = self.run(id);
                each(&r);
                r
            })
            .collect()
    }

    fn algebraic(&self) -> Result<(bool, String)> {
        let td = self.transition()?;
        let spc = u64::from(td.samples_per_cell());
        let exact_counts = (0..td.n_cells()).all(|j| td.column(j).iter().map(|t| u64::from(t.count)).sum::<u64>() == spc);
        let m0 = assemble(td, Twist::ZERO);
        let col_dev = (0..td.n_cells())
            .map(|j| {
                let s = m0.column_sum(j);
                (s.re - 1.0).abs().max(s.im.abs())
            })
            .fold(0.0, f64::max);

        let mut r = rng::stream(self.config.seed, rng::TAG_ACCEPTANCE, 1);
        let mut conj_exact = true;
        for _ in 0..4 {
            let w = Twist::new(r.random_range(-PI..PI), r.random_range(-PI..PI));
            let (a, b) = (assemble(td, w), assemble(td, -w));
            conj_exact &= (0..td.n_cells()).all(|j| a.column(j).zip(b.column(j)).all(|(x, y)| x.0 == y.0 && x.1 == y.1.conj()));
        }

        let mut lattices_ok = 0;
        let mut snf_ok = 0;
        let mut tried = 0;
        while tried < 50 {
            let a = [[r.random_range(-9i64..=9), r.random_range(-9i64..=9)], [r.random_range(-9i64..=9), r.random_range(-9i64..=9)]];
            let d = det(&a).abs();
            if d == 0 || d > 64 {
                continue;
            }
            tried += 1;
            let l = Lattice::new(a)?;
            if characters(&l)?.len() as i64 == d {
                lattices_ok += 1;
            }
            let s = smith_normal_form(a)?;
            let prod = mul(&mul(&s.u, &a), &s.v);
            if prod == s.diagonal() && det(&s.u).abs() == 1 && det(&s.v).abs() == 1 && s.d[1] % s.d[0] == 0 {
                snf_ok += 1;
            }
        }
        let passed = exact_counts && col_dev <= 1e-14 && conj_exact && lattices_ok == 50 && snf_ok == 50;
        Ok((
            passed,
            format!(
                "integer column totals exact: {exact_counts}; max |column sum - 1| = {col_dev:.1e}; \
                 conjugation exact: {conj_exact}; |Ĝ| = |det A|: {lattices_ok}/50; UAV = D: {snf_ok}/50"
            ),
        ))
    }

    fn fresh_step(&self, r: &mut rng::Rng) -> Result<(PhasePoint, Step)> {
        loop {
            let x = sample_mu(self.table(), r);
            match collide(self.table(), &x) {
                Ok(s) => return Ok((x, s)),
                Err(Error::GrazingCollision { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    fn dynamics(&self) -> Result<(bool, String)> {
        let t = self.table();
        let mut r = rng::stream(self.config.seed, rng::TAG_ACCEPTANCE, 2);
        let (mut worst_rt, mut worst_refl, mut f_ok, mut n) = (0.0f64, 0.0f64, 0, 0);
        while n < 1000 {
            let (x, s) = self.fresh_step(&mut r)?;
            // ι T ι T x = x
            let back = match collide(t, &involution(&s.next)) {
                Ok(b) => b,
                Err(Error::GrazingCollision { .. }) => continue,
                Err(e) => return Err(e),
            };
            // F(ι x) = -F(T^{-1} x), with T^{-1} x found as ι T ι x and checked by applying T.
            let (fi, pre) = match collide(t, &involution(&x)) {
                Ok(a) => (a.displacement, involution(&a.next)),
                Err(Error::GrazingCollision { .. }) => continue,
                Err(e) => return Err(e),
            };
            let fwd = match collide(t, &pre) {
                Ok(a) => a,
                Err(Error::GrazingCollision { .. }) => continue,
                Err(e) => return Err(e),
            };
            n += 1;
            worst_rt = worst_rt.max(involution(&back.next).distance(&x)).max(fwd.next.distance(&x));
            if fi == [-fwd.displacement[0], -fwd.displacement[1]] {
                f_ok += 1;
            }
            worst_refl = worst_refl.max(reflection_defect(t, &x, &s));
        }
        let mut r = rng::stream(self.config.seed, rng::TAG_ACCEPTANCE, 3);
        let (mut total, mut count) = (0.0, 0usize);
        while count < 1_000_000 {
            let (_, mut s) = self.fresh_step(&mut r)?;
            for _ in 0..10_000 {
                total += s.free_path;
                count += 1;
                s = match collide(t, &s.next) {
                    Ok(next) => next,
                    Err(Error::GrazingCollision { .. }) => break,
                    Err(e) => return Err(e),
                };
            }
        }
        let mfp = total / count as f64;
        let santalo = t.mean_free_path();
        let rel = (mfp - santalo).abs() / santalo;
        let passed = worst_rt <= tolerance::ROUND_TRIP && f_ok == 1000 && worst_refl <= tolerance::REFLECTION && rel <= tolerance::SANTALO_REL;
        Ok((
            passed,
            format!(
                "max |ιTιT x - x| = {worst_rt:.1e}; F∘ι = -F∘T⁻¹ on {f_ok}/1000; reflection defect {worst_refl:.1e}; \
                 mean free path {mfp:.5} vs Santaló {santalo:.5} (rel {rel:.2e})"
            ),
        ))
    }

    fn measure(&self) -> Result<(bool, String)> {
        let mut r = rng::stream(self.config.seed, rng::TAG_ACCEPTANCE, 4);
        let n = 100_000;
        let mut u: Vec<f64> = Vec::with_capacity(n);
        while u.len() < n {
            let (_, s) = self.fresh_step(&mut r)?;
            u.push(0.5 * (s.next.theta.sin() + 1.0));
        }
        let ks = ks_uniform(&mut u);
        let ks_crit = tolerance::KS_1PCT / (n as f64).sqrt();

        let m = 1_000_000;
        let mut r = rng::stream(self.config.seed, rng::TAG_ACCEPTANCE, 5);
        let (mut s1, mut s2) = ([0.0f64; 2], [0.0f64; 2]);
        for _ in 0..m {
            let (_, s) = self.fresh_step(&mut r)?;
            for k in 0..2 {
                let f = f64::from(s.displacement[k]);
                s1[k] += f;
                s2[k] += f * f;
            }
        }
        let mf = m as f64;
        let mean = s1.map(|s| s / mf);
        let se = [0, 1].map(|k| ((s2[k] / mf - mean[k] * mean[k]) / mf).sqrt());
        let centered = (0..2).all(|k| mean[k].abs() < 3.0 * se[k]);
        Ok((
            ks < ks_crit && centered,
            format!(
                "pushforward KS {ks:.2e} < {ks_crit:.2e}: {}; mean F = ({:.2e}, {:.2e}) ± ({:.1e}, {:.1e})",
                ks < ks_crit,
                mean[0],
                mean[1],
                se[0],
                se[1]
            ),
        ))
    }

    fn sigma(&self) -> Result<(bool, String)> {
        let g = self.green_kubo()?;
        let c = self.clt()?;
        let mut agree = true;
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let comb = g.stderr[i][j].hypot(c.stderr[i][j]);
                let z = (g.matrix[i][j] - c.matrix[i][j]).abs() / comb;
                worst = worst.max(z);
                agree &= z <= 3.0;
            }
        }
        let pd = g.eigenvalues()[0] > 0.0 && c.eigenvalues()[0] > 0.0;
        let off = g.matrix[0][1].abs() <= 3.0 * g.stderr[0][1];
        let diag_z = (g.matrix[0][0] - g.matrix[1][1]).abs() / g.stderr[0][0].hypot(g.stderr[1][1]);
        let passed = agree && pd && off && diag_z <= 3.0;
        Ok((
            passed,
            format!(
                "GK {:?} vs CLT {:?}: worst |z| = {worst:.2}; positive definite: {pd}; \
                 Σ12 = {:.1e} ± {:.1e}; Σ11 - Σ22 at {diag_z:.2} sigma",
                round_mat(&g.matrix),
                round_mat(&c.matrix),
                g.matrix[0][1],
                g.stderr[0][1]
            ),
        ))
    }

    fn expansion_points(&self, td: &TransitionData) -> Result<Vec<CurvePoint>> {
        sweep(td, &expansion_grid(), &curve_options(self.config.tol))
    }

    fn expansion(&self, td: Result<&TransitionData>) -> Result<(bool, String)> {
        let td = td?;
        let sigma = self.green_kubo()?.matrix;
        let pts = self.expansion_points(td)?;
        let mut worst: f64 = 0.0;
        let (mut num, mut den) = (0.0, 0.0);
        let separated = pts.iter().all(CurvePoint::separated);
        for p in &pts {
            let q = 0.5 * p.w.quadratic_form(&sigma);
            let res = (1.0 - p.lambda.re) - q;
            worst = worst.max(res.abs() / q);
            let w3 = p.w.norm().powi(3);
            num += res.abs() * w3;
            den += w3 * w3;
        }
        let cubic = num / den;
        let passed = separated && worst <= tolerance::EXPANSION_REL && cubic > 0.0 && cubic.is_finite();
        Ok((
            passed,
            format!(
                "max |(1-λ_w) - wᵀΣw/2| / (wᵀΣw/2) = {worst:.4} over {} twists; cubic coefficient {cubic:.3e}; gaps separated: {separated}",
                pts.len()
            ),
        ))
    }

    fn realness(&self, td: Result<&TransitionData>) -> Result<(bool, String)> {
        let td = td?;
        let delta = self.delta()?.delta;
        let opts = curve_options(self.config.tol);
        let grid = expansion_grid();
        let pts = self.expansion_points(td)?;
        // Directions k and k+4 are opposite, so one bootstrap serves both.
        let reps: Vec<Twist> = grid.iter().enumerate().filter(|(i, _)| i % 8 < 4).map(|(_, w)| *w).collect();
        let se = bootstrap_stderr(td, &reps, self.config.bootstrap_replicates, &opts)?;
        let se_of = |i: usize| se[(i / 8) * 4 + (i % 8) % 4][1];
        let (mut tested, mut ok_im, mut ok_sym) = (0, 0, 0);
        let mut worst: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if p.lambda.norm() <= 1.0 - delta {
                continue;
            }
            tested += 1;
            let tol_im = self.config.tol + 3.0 * se_of(i);
            worst = worst.max(p.lambda.im.abs() / tol_im);
            if p.lambda.im.abs() <= tol_im {
                ok_im += 1;
            }
            let j = (i / 8) * 8 + (i % 8 + 4) % 8;
            // λ_w - λ_{-w} = 2i Im λ_w under the exact symmetry; its bootstrap error is 2 se(Im).
            if (p.lambda - pts[j].lambda).norm() <= self.config.tol + 3.0 * 2.0 * se_of(i) {
                ok_sym += 1;
            }
        }
        let passed = tested > 0 && ok_im == tested && ok_sym == tested;
        Ok((
            passed,
            format!(
                "δ = {delta:.4}; {tested} twists in the window; |Im λ| within tol + 3 se: {ok_im}/{tested} \
                 (worst ratio {worst:.2}); λ_w = λ_-w: {ok_sym}/{tested}; {} bootstrap replicates",
                self.config.bootstrap_replicates
            ),
        ))
    }

    fn aperiodicity(&self) -> Result<(bool, String)> {
        let rep = self.family_two()?;
        let (_, cs) = &rep.spectra[0];
        let zero = cs.entries.iter().find(|e| e.character.num == [0, 0]).map(|e| e.leading.value);
        let (at, top) = cs.max_off_zero().ok_or_else(|| Error::InvalidArgument("trivial grid".into()))?;
        let gap = 1.0 - top;
        let one = zero.is_some_and(|z| (z - 1.0).norm() < 1e-10);
        Ok((
            gap > 0.0 && one,
            format!(
                "{}x{} grid: λ_0 = 1: {one}; max_(w≠0) |λ_w| = {top:.8} at ({:.4}, {:.4}); gap = {gap:.3e}",
                self.config.family_two_n, self.config.family_two_n, at.0[0], at.0[1]
            ),
        ))
    }

    fn counting(&self) -> Result<(bool, String)> {
        let delta = self.delta()?.delta;
        let spectra = self.family_one()?;
        let mut ratios = Vec::new();
        for (n, cs) in spectra {
            let c = count_window(cs, delta, crate::spectra::REAL_AXIS_TOL)?;
            ratios.push((*n, c.count as f64 / *n as f64));
        }
        let td = self.transition()?;
        let m = self.config.oracle_points.max(2);
        let ts: Vec<Twist> = (0..m).map(|i| Twist::new(PI * i as f64 / (m - 1) as f64, 0.0)).collect();
        let curve = sweep(td, &ts, &curve_options(self.config.tol))?;
        let samples: Vec<(f64, f64)> = curve.iter().map(|p| (p.w.0[0], p.lambda.norm())).collect();
        let oracle = line_fraction_above(&samples, 1.0 - delta);
        let (lo, hi) = tolerance::COUNT_INTERVAL;
        let in_interval = ratios.iter().all(|r| r.1 >= lo && r.1 <= hi);
        let k = ratios.len();
        let (last, prev) = (ratios[k - 1].1, ratios[k.saturating_sub(2)].1);
        let cauchy = (last - prev).abs() / last;
        let limit = (last - oracle).abs() / oracle;
        let passed = in_interval && k >= 2 && cauchy <= tolerance::COUNT_CAUCHY && limit <= tolerance::COUNT_ORACLE;
        let list: Vec<String> = ratios.iter().map(|(n, r)| format!("{n}:{r:.4}")).collect();
        Ok((
            passed,
            format!(
                "δ = {delta:.4}; count/N = [{}] in [{lo}, {hi}]: {in_interval}; last step {cauchy:.4}; oracle {oracle:.4} (rel {limit:.4})",
                list.join(", ")
            ),
        ))
    }

    fn density_one(&self) -> Result<(bool, String)> {
        let d0 = self.delta0()?;
        let sigma = self.green_kubo()?.matrix;
        let spectra = self.family_one()?;
        let last = spectra.last().cloned().ok_or_else(|| Error::InvalidArgument("no family-1 sizes".into()))?;
        let rep = density_from_spectra(Family::One, vec![last], d0, self.config.bins_family_one, &sigma, &self.density_options())?;
        let row = &rep.rows[0];
        let rel = (row.window_mass - row.theory_window_mass).abs() / row.theory_window_mass;
        let passed = rel <= tolerance::FAMILY_ONE_MASS && row.sup_cdf <= tolerance::FAMILY_ONE_SUP;
        Ok((
            passed,
            format!(
                "N = {}, δ₀ = {d0:.5}: window mass {:.5} vs (1/π)√(2δ₀/Σ11) = {:.5} (rel {rel:.4}); sup CDF distance {:.4}",
                row.n, row.window_mass, row.theory_window_mass, row.sup_cdf
            ),
        ))
    }

    fn density_two(&self) -> Result<(bool, String)> {
        let rep = self.family_two()?;
        let row = &rep.rows[0];
        let dens: Vec<String> = row
            .bins
            .iter()
            .map(|b| format!("{:.2}", b.empirical_mass / (b.right - b.left)))
            .collect();
        let theory = crate::spectra::family_two_density(&rep.sigma);
        Ok((
            row.bins.len() >= 2 && row.interior_deviation <= tolerance::FAMILY_TWO_FLAT,
            format!(
                "N = {}, δ₀ = {:.5}: bin densities [{}] vs 1/(2π√det Σ) = {theory:.2}; worst interior deviation {:.4}",
                row.n,
                rep.delta0,
                dens.join(", "),
                row.interior_deviation
            ),
        ))
    }

    fn refinement(&self) -> Result<(bool, String)> {
        let td = self.refined()?;
        let (p5, d5) = self.expansion(Ok(td))?;
        let (p6, d6) = self.realness(Ok(td))?;
        // λ at w = (0.2, 0) on both partitions.
        let w = Twist::new(0.2, 0.0);
        let opts = curve_options(self.config.tol);
        let a = crate::ulam::solve_point(self.transition()?, w, &opts)?.lambda;
        let b = crate::ulam::solve_point(td, w, &opts)?.lambda;
        let shift = (a - b).norm() / a.norm();
        Ok((
            p5 && p6,
            format!(
                "{}x{} cells: [5] {}: {d5}; [6] {}: {d6}; λ(0.2,0) shift {shift:.2e}",
                td.partition().n_phi(),
                td.partition().n_s(),
                pass_word(p5),
                pass_word(p6)
            ),
        ))
    }
}

fn pass_word(p: bool) -> &'static str {
    if p {
        "pass"
    } else {
        "fail"
    }
}

fn round_mat(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    m.map(|r| r.map(|x| (x * 1e5).round() / 1e5))
}

/// `|v_out - reflect(v_in)|` at the collision `x → s.next`, with the incoming
/// direction rebuilt from the two positions alone.
pub fn reflection_defect(t: &Table, x: &PhasePoint, s: &Step) -> f64 {
    let p0 = x.position(t);
    let d = t.discs()[s.next.obstacle];
    let shift = [f64::from(s.displacement[0]), f64::from(s.displacement[1])];
    let (sin, cos) = s.next.phi.sin_cos();
    let n = [cos, sin];
    let p1 = [d.center[0] + shift[0] + d.radius * cos, d.center[1] + shift[1] + d.radius * sin];
    let v = [p1[0] - p0[0], p1[1] - p0[1]];
    let len = v[0].hypot(v[1]);
    let v = [v[0] / len, v[1] / len];
    let vn = v[0] * n[0] + v[1] * n[1];
    let reflected = [v[0] - 2.0 * vn * n[0], v[1] - 2.0 * vn * n[1]];
    let (so, co) = (s.next.phi + s.next.theta).sin_cos();
    (reflected[0] - co).hypot(reflected[1] - so).max((len - s.free_path).abs())
}

/// One-sample Kolmogorov–Smirnov statistic against U(0, 1); sorts `u`.
pub fn ks_uniform(u: &mut [f64]) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Convenience for callers that only want the complex leading values.
pub fn leading_values(points: &[CurvePoint]) -> Vec<Complex64> {
    points.iter().map(|p| p.lambda).collect()
}
