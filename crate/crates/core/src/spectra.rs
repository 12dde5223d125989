//! Cover spectra `Sp(P_Λ) = ∪_χ Sp(P_{Λ,χ})`, their spectral measures, window
//! counts near 1, and empirical densities against the closed-form laws.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{sym_eigenvalues, Mat2f, SigmaEstimate};
use crate::error::{Error, Result};
use crate::geometry::{characters, Character, Lattice, Twist};
use crate::ulam::{assemble, leading_eigs, ArnoldiOptions, Eigenvalue, TransitionData, MIN_GAP};

/// Cut used when probing sub-leading moduli for the automatic `δ`. It sits
/// above the `-1/√2` cluster of the untwisted matrix, which converges slowly
/// and never matters for the window.
pub const DELTA_PROBE_CUT: f64 = 0.75;
/// Twist radius inside which the quadratic expansion of `1 - λ_w` is used for
/// the automatic `δ₀`.
pub const DELTA0_RADIUS: f64 = 1.0;
/// Imaginary parts below this count as real in window checks. The default
/// budgets leave a Monte Carlo drift of order `1e-4 |w|` in `Im λ_w`.
pub const REAL_AXIS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverEntry {
    pub character: Character,
    /// Canonical representative in `[0, 2π)²`.
    pub w: Twist,
    /// Outermost eigenvalue, whether or not it clears the cut.
    pub leading: Eigenvalue,
    /// Largest modulus outside the leading cluster.
    pub second: f64,
    /// Eigenvalues above the cut with multiplicities.
    pub eigenvalues: Vec<Eigenvalue>,
}

impl CoverEntry {
    pub fn gap(&self) -> f64 {
        if self.leading.multiplicity == 1 {
            self.leading.value.norm() - self.second
        } else {
            0.0
        }
    }

    /// Largest modulus that is not a separated leading eigenvalue.
    pub fn sub_leading(&self) -> f64 {
        if self.gap() > MIN_GAP {
            self.second
        } else {
            self.leading.value.norm()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSpectrum {
    pub lattice: Lattice,
    pub rho_cut: f64,
    pub tol: f64,
    pub how_many: usize,
    /// One entry per character, in canonical character order.
    pub entries: Vec<CoverEntry>,
}

impl CoverSpectrum {
    pub fn group_size(&self) -> usize {
        self.entries.len()
    }

    /// Exact check of `(w, λ) ↦ (-w, conj λ)`.
    pub fn is_conjugate_closed(&self) -> bool {
        let mut all: Vec<(Character, [u64; 2], usize)> = Vec::new();
        for e in &self.entries {
            for v in &e.eigenvalues {
                all.push((e.character, [v.value.re.to_bits(), (v.value.im + 0.0).to_bits()], v.multiplicity));
            }
        }
        all.sort();
        self.entries.iter().all(|e| {
            e.eigenvalues.iter().all(|v| {
                // `+ 0.0` folds `-0.0` into `0.0` for real values
                let key = (e.character.neg(), [v.value.re.to_bits(), (-v.value.im + 0.0).to_bits()], v.multiplicity);
                all.binary_search(&key).is_ok()
            })
        })
    }

    /// `max_{w ≠ 0} |λ_w|` over the entries.
    pub fn max_off_zero(&self) -> Option<(Twist, f64)> {
        self.entries
            .iter()
            .filter(|e| e.character.num != [0, 0])
            .map(|e| (e.w, e.leading.value.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Makes the spectrum of a real matrix exactly conjugation closed: complex
/// values are paired with their nearest conjugate and both replaced by the
/// averaged pair; an unpaired value gets its conjugate appended.
fn close_real_spectrum(vals: &mut Vec<Eigenvalue>, tol: f64) {
    let real_tol = 10.0 * tol;
    let mut out: Vec<Eigenvalue> = Vec::with_capacity(vals.len() + 1);
    let mut used = vec![false; vals.len()];
    for i in 0..vals.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let v = vals[i];
        if v.value.im.abs() <= real_tol {
            out.push(Eigenvalue { value: Complex64::new(v.value.re, 0.0), ..v });
            continue;
        }
        let partner = (0..vals.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (vals[a].value - v.value.conj()).norm().total_cmp(&(vals[b].value - v.value.conj()).norm()))
            .filter(|&j| (vals[j].value - v.value.conj()).norm() < 1e3 * real_tol);
        let z = match partner {
            Some(j) => {
                used[j] = true;
                0.5 * (v.value + vals[j].value.conj())
            }
            None => v.value,
        };
        let top = Complex64::new(z.re, z.im.abs());
        out.push(Eigenvalue { value: top, ..v });
        out.push(Eigenvalue { value: top.conj(), ..v });
    }
    out.sort_by(|a, b| b.value.norm().total_cmp(&a.value.norm()).then(b.value.re.total_cmp(&a.value.re)).then(b.value.im.total_cmp(&a.value.im)));
    *vals = out;
}

fn solve_character(transition: &TransitionData, c: &Character, opts: &ArnoldiOptions) -> Result<CoverEntry> {
    let m = assemble(transition, c.centered_twist());
    let r = leading_eigs(&m, opts, None).map_err(|e| Error::Character {
        w: c.twist(),
        source: Box::new(e),
    })?;
    let second = r.second_modulus();
    let mut eigenvalues = r.eigenvalues;
    let mut leading = r.leading;
    if c.is_self_conjugate() {
        close_real_spectrum(&mut eigenvalues, opts.tol);
        if leading.value.im.abs() <= 10.0 * opts.tol {
            leading.value.im = 0.0;
        } else {
            leading.value.im = leading.value.im.abs();
        }
    }
    Ok(CoverEntry {
        character: *c,
        w: c.twist(),
        leading,
        second,
        eigenvalues,
    })
}

fn conjugate_entry(e: &CoverEntry, c: Character) -> CoverEntry {
    let conj = |v: &Eigenvalue| Eigenvalue { value: v.value.conj(), ..*v };
    CoverEntry {
        character: c,
        w: c.twist(),
        leading: conj(&e.leading),
        second: e.second,
        eigenvalues: e.eigenvalues.iter().map(conj).collect(),
    }
}

/// Eigenvalues above `rho_cut` (at most `how_many` per character) of every
/// twisted matrix `M(w)`, `w ∈ Ĝ`. Only one of each pair `{w, -w}` is
/// solved; the partner gets the conjugate values, which is exact because
/// `M(-w) = conj M(w)` entrywise.
pub fn cover_spectrum(transition: &TransitionData, lattice: &Lattice, rho_cut: f64, how_many: usize, tol: f64) -> Result<CoverSpectrum> {
    let set = characters(lattice)?;
    let opts = ArnoldiOptions {
        how_many,
        rho_cut,
        tol,
        ..Default::default()
    };
    let reps: Vec<usize> = (0..set.len())
        .filter(|&i| {
            let c = set.characters[i];
            set.position(&c.neg()).is_some_and(|j| i <= j)
        })
        .collect();
    let solved: Vec<CoverEntry> = reps
        .par_iter()
        .map(|&i| solve_character(transition, &set.characters[i], &opts))
        .collect::<Result<_>>()?;
    let mut entries: Vec<Option<CoverEntry>> = vec![None; set.len()];
    for (e, &i) in solved.into_iter().zip(&reps) {
        let partner = e.character.neg();
        if partner != e.character {
            let j = set.position(&partner).expect("dual group is closed under negation");
            entries[j] = Some(conjugate_entry(&e, partner));
        }
        entries[i] = Some(e);
    }
    Ok(CoverSpectrum {
        lattice: *lattice,
        rho_cut,
        tol,
        how_many,
        entries: entries.into_iter().map(|e| e.expect("every character solved")).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    /// `(position, multiplicity / |G|)`.
    pub atoms: Vec<(Complex64, f64)>,
    pub rho_cut: f64,
}

impl SpectralMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `ν({|z| > r})`.
    pub fn mass_outside(&self, r: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0.norm() > r).map(|a| a.1).sum()
    }

    /// `ν` of the real segment `[a, b]`, positions taken by real part.
    pub fn mass_on_segment(&self, a: f64, b: f64) -> f64 {
        self.atoms.iter().filter(|z| z.0.re >= a && z.0.re <= b).map(|z| z.1).sum()
    }
}

/// `ν_Λ = |G|^{-1} Σ_w ν_w`.
pub fn spectral_measure(cs: &CoverSpectrum) -> SpectralMeasure {
    let g = cs.group_size() as f64;
    SpectralMeasure {
        atoms: cs
            .entries
            .iter()
            .flat_map(|e| e.eigenvalues.iter().map(move |v| (v.value, v.multiplicity as f64 / g)))
            .collect(),
        rho_cut: cs.rho_cut,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowCount {
    pub delta: f64,
    /// Eigenvalues with `|z| > 1 - δ`, with multiplicity.
    pub count: usize,
    /// Of those, how many have `Re z ∈ [1-δ, 1]` and `|Im z| ≤ imag_tol`.
    pub near_real: usize,
    pub imag_tol: f64,
}

pub fn count_window(cs: &CoverSpectrum, delta: f64, imag_tol: f64) -> Result<WindowCount> {
    if !(delta > 0.0 && delta < 1.0 - cs.rho_cut) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} must lie in (0, {})",
            1.0 - cs.rho_cut
        )));
    }
    let r = 1.0 - delta;
    let (mut count, mut near_real) = (0, 0);
    for v in cs.entries.iter().flat_map(|e| &e.eigenvalues) {
        if v.value.norm() > r {
            count += v.multiplicity;
            if v.value.im.abs() <= imag_tol && v.value.re >= r && v.value.re <= 1.0 + 10.0 * cs.tol {
                near_real += v.multiplicity;
            }
        }
    }
    Ok(WindowCount {
        delta,
        count,
        near_real,
        imag_tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub delta: f64,
    /// Largest modulus on the probe grid outside the separated leading branch.
    pub sub_leading: f64,
    pub at: Twist,
    pub margin: f64,
    pub grid: usize,
}

/// Picks `δ` so that `{|z| > 1-δ}` sees only the separated leading branch:
/// `δ = 1 - max_w s(w) - MIN_GAP` over an `n × n` twist grid, where `s(w)`
/// is the second modulus, or `|λ_w|` itself when the gap has collapsed.
pub fn choose_delta(transition: &TransitionData, grid: usize, tol: f64) -> Result<(DeltaChoice, CoverSpectrum)> {
    let n = grid as i64;
    let cs = cover_spectrum(transition, &Lattice::family_two(n)?, DELTA_PROBE_CUT, 2, tol)?;
    Ok((delta_from_probe(&cs, grid)?, cs))
}

pub fn delta_from_probe(cs: &CoverSpectrum, grid: usize) -> Result<DeltaChoice> {
    let (at, s) = cs
        .entries
        .iter()
        .map(|e| (e.w, e.sub_leading()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidArgument("empty probe grid".into()))?;
    let delta = 1.0 - s - MIN_GAP;
    if delta <= 0.0 {
        return Err(Error::WindowTooWide(format!("sub-leading modulus {s:.4} leaves no window")));
    }
    Ok(DeltaChoice {
        delta,
        sub_leading: s,
        at,
        margin: MIN_GAP,
        grid,
    })
}

/// `δ₀ = min(δ/2, σ_max r₀²/2)`: the window where the quadratic expansion of
/// `1 - λ_w` holds, kept inside the counting window.
pub fn choose_delta0(delta: f64, sigma: &Mat2f) -> f64 {
    let top = sym_eigenvalues(sigma)[1];
    (0.5 * delta).min(0.5 * top * DELTA0_RADIUS * DELTA0_RADIUS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `Λ_N = NZ × Z`.
    One,
    /// `Λ_N = (NZ)²`.
    Two,
}

impl Family {
    pub fn lattice(self, n: i64) -> Result<Lattice> {
        match self {
            Family::One => Lattice::family_one(n),
            Family::Two => Lattice::family_two(n),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Family::One => 1,
            Family::Two => 2,
        }
    }

    /// Theory mass of `[a, b] ⊂ [1-δ₀, 1]`.
    pub fn theory_mass(self, sigma: &Mat2f, a: f64, b: f64) -> f64 {
        match self {
            Family::One => {
                let s = sigma[0][0];
                (2.0 / s).sqrt() / std::f64::consts::PI * ((1.0 - a).max(0.0).sqrt() - (1.0 - b).max(0.0).sqrt())
            }
            Family::Two => (b - a) * family_two_density(sigma),
        }
    }

    /// Theory CDF on the window, normalized to one at `x = 1`.
    pub fn theory_cdf(self, delta0: f64, x: f64) -> f64 {
        let y = ((1.0 - x) / delta0).clamp(0.0, 1.0);
        match self {
            Family::One => 1.0 - y.sqrt(),
            Family::Two => 1.0 - y,
        }
    }
}

pub fn family_one_window_mass(sigma: &Mat2f, delta0: f64) -> f64 {
    (2.0 * delta0 / sigma[0][0]).sqrt() / std::f64::consts::PI
}

pub fn family_two_density(sigma: &Mat2f) -> f64 {
    let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
    1.0 / (2.0 * std::f64::consts::PI * det.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub empirical_mass: f64,
    pub theory_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub n: i64,
    pub group_size: usize,
    pub atoms: usize,
    pub window_mass: f64,
    pub theory_window_mass: f64,
    pub bins: Vec<Bin>,
    /// Sup distance between the normalized empirical and theory CDFs.
    pub sup_cdf: f64,
    /// Largest relative deviation of bin density from theory over bins not
    /// touching `x = 1`.
    pub interior_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub family: Family,
    pub delta0: f64,
    pub n_bins: usize,
    pub sigma: Mat2f,
    pub rows: Vec<DensityRow>,
    #[serde(skip)]
    pub spectra: Vec<(i64, CoverSpectrum)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub tol: f64,
    pub imag_tol: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            tol: 1e-10,
            imag_tol: REAL_AXIS_TOL,
        }
    }
}

/// Histogram of `ν_N` on `[1-δ₀, 1]` against the closed-form laws, for
/// each `N`. The cover spectra use cut `1 - 2δ₀` and two eigenvalues per
/// character, so a second eigenvalue entering the window is caught.
pub fn density_profile(
    transition: &TransitionData,
    family: Family,
    n_list: &[i64],
    delta0: f64,
    bins: usize,
    sigma: &SigmaEstimate,
    opts: &DensityOptions,
) -> Result<DensityReport> {
    let mut spectra = Vec::with_capacity(n_list.len());
    for &n in n_list {
        spectra.push((n, cover_spectrum(transition, &family.lattice(n)?, 1.0 - 2.0 * delta0, 2, opts.tol)?));
    }
    density_from_spectra(family, spectra, delta0, bins, &sigma.matrix, opts)
}

/// As [`density_profile`] on precomputed cover spectra; each must resolve
/// every eigenvalue above `1 - δ₀`.
pub fn density_from_spectra(
    family: Family,
    spectra: Vec<(i64, CoverSpectrum)>,
    delta0: f64,
    bins: usize,
    sigma: &Mat2f,
    opts: &DensityOptions,
) -> Result<DensityReport> {
    if !(delta0 > 0.0 && delta0 < 0.5) || bins == 0 {
        return Err(Error::InvalidArgument(format!("need delta0 in (0, 0.5) and bins >= 1, got {delta0}, {bins}")));
    }
    let mut rows = Vec::with_capacity(spectra.len());
    for (n, cs) in &spectra {
        if cs.rho_cut >= 1.0 - delta0 {
            return Err(Error::InvalidArgument(format!("cover cut {} does not resolve the window", cs.rho_cut)));
        }
        rows.push(density_row(cs, family, *n, delta0, bins, sigma, opts)?);
    }
    Ok(DensityReport {
        family,
        delta0,
        n_bins: bins,
        sigma: *sigma,
        rows,
        spectra,
    })
}

/// `(2π)^{-1} Leb{t ∈ [-π, π] : |λ(t)| > r}` from samples `(t_i, |λ(t_i)|)`
/// on `[0, π]`, using `|λ(-t)| = |λ(t)|` and linear interpolation between
/// samples.
pub fn line_fraction_above(samples: &[(f64, f64)], r: f64) -> f64 {
    let mut len = 0.0;
    for pair in samples.windows(2) {
        let ((t0, m0), (t1, m1)) = (pair[0], pair[1]);
        let (a, b) = (m0 - r, m1 - r);
        len += if a > 0.0 && b > 0.0 {
            t1 - t0
        } else if a > 0.0 || b > 0.0 {
            let cross = t0 + (t1 - t0) * a / (a - b);
            if a > 0.0 { cross - t0 } else { t1 - cross }
        } else {
            0.0
        };
    }
    2.0 * len / crate::geometry::TWO_PI
}

fn density_row(cs: &CoverSpectrum, family: Family, n: i64, delta0: f64, bins: usize, sigma: &Mat2f, opts: &DensityOptions) -> Result<DensityRow> {
    let lo = 1.0 - delta0;
    let g = cs.group_size() as f64;
    let mut xs: Vec<(f64, f64)> = Vec::new();
    for e in &cs.entries {
        let in_window: Vec<&Eigenvalue> = e.eigenvalues.iter().filter(|v| v.value.norm() > lo).collect();
        if in_window.is_empty() {
            continue;
        }
        if e.gap() <= MIN_GAP || in_window.len() > 1 {
            return Err(Error::WindowTooWide(format!(
                "w = {:?}: leading eigenvalue not separated inside the window (gap {:.4})",
                e.w,
                e.gap()
            )));
        }
        let v = in_window[0];
        if v.value.im.abs() > opts.imag_tol {
            return Err(Error::WindowTooWide(format!("w = {:?}: complex eigenvalue {} in the window", e.w, v.value)));
        }
        if v.value.re >= lo {
            xs.push((v.value.re.min(1.0), v.multiplicity as f64 / g));
        }
    }
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let width = delta0 / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|k| {
            let left = lo + k as f64 * width;
            let right = if k + 1 == bins { 1.0 } else { lo + (k + 1) as f64 * width };
            Bin {
                left,
                right,
                empirical_mass: 0.0,
                theory_mass: family.theory_mass(sigma, left, right),
            }
        })
        .collect();
    for &(x, m) in &xs {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        out[k].empirical_mass += m;
    }
    let window_mass: f64 = xs.iter().map(|a| a.1).sum();
    let theory_window_mass = family.theory_mass(sigma, lo, 1.0);

    let mut sup: f64 = 0.0;
    if window_mass > 0.0 {
        let mut acc = 0.0;
        for &(x, m) in &xs {
            let th = family.theory_cdf(delta0, x);
            sup = sup.max((acc / window_mass - th).abs());
            acc += m;
            sup = sup.max((acc / window_mass - th).abs());
        }
    } else {
        sup = 1.0;
    }
    let interior_deviation = out[..bins.saturating_sub(1)]
        .iter()
        .map(|b| (b.empirical_mass - b.theory_mass).abs() / b.theory_mass)
        .fold(0.0, f64::max);
    Ok(DensityRow {
        n,
        group_size: cs.group_size(),
        atoms: xs.len(),
        window_mass,
        theory_window_mass,
        bins: out,
        sup_cdf: sup,
        interior_deviation,
    })
}

/// `resonances.csv`: `N, w1, w2, re, im, multiplicity, residual`.
pub fn write_resonances_csv<W: Write>(mut out: W, spectra: &[(i64, CoverSpectrum)]) -> std::io::Result<()> {
    writeln!(out, "N,w1,w2,re,im,multiplicity,residual")?;
    for (n, cs) in spectra {
        for e in &cs.entries {
            for v in &e.eigenvalues {
                writeln!(
                    out,
                    "{n},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.6e}",
                    e.w.0[0], e.w.0[1], v.value.re, v.value.im, v.multiplicity, v.residual
                )?;
            }
        }
    }
    Ok(())
}

/// `density.csv`: `N, bin_left, bin_right, empirical_mass, theory_mass`.
pub fn write_density_csv<W: Write>(mut out: W, report: &DensityReport) -> std::io::Result<()> {
    writeln!(out, "N,bin_left,bin_right,empirical_mass,theory_mass")?;
    for row in &report.rows {
        for b in &row.bins {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                row.n, b.left, b.right, b.empirical_mass, b.theory_mass
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_table;
    use crate::ulam::{build_transition, curve_options, Partition};

    fn small() -> TransitionData {
        let t = reference_table();
        let p = Partition::new(&t, 12, 12).unwrap();
        build_transition(&t, &p, 100, 3).unwrap()
    }

    #[test]
    fn trivial_cover_is_the_untwisted_matrix() {
        let td = small();
        let cs = cover_spectrum(&td, &Lattice::identity(), 0.5, 2, 1e-11).unwrap();
        assert_eq!(cs.group_size(), 1);
        assert!((cs.entries[0].leading.value - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        let c = count_window(&cs, 0.02, REAL_AXIS_TOL).unwrap();
        assert_eq!(c.count, 1);
        assert_eq!(c.near_real, 1);
        let nu = spectral_measure(&cs);
        assert!(nu.mass_outside(0.99) == 1.0);
    }

    #[test]
    fn covers_are_conjugate_closed() {
        let td = small();
        for lat in [Lattice::diagonal(2, 1).unwrap(), Lattice::family_two(4).unwrap()] {
            let cs = cover_spectrum(&td, &lat, 0.6, 2, 1e-10).unwrap();
            assert_eq!(cs.group_size(), lat.index());
            assert!(cs.is_conjugate_closed(), "{lat:?}");
        }
    }

    #[test]
    fn cover_leading_values_match_the_curve() {
        let td = small();
        let n = 8;
        let cs = cover_spectrum(&td, &Lattice::family_one(n).unwrap(), 0.5, 1, 1e-11).unwrap();
        let ws: Vec<Twist> = cs.entries.iter().map(|e| e.character.centered_twist()).collect();
        let pts = crate::ulam::sweep(&td, &ws, &curve_options(1e-11)).unwrap();
        for (e, p) in cs.entries.iter().zip(&pts) {
            let z = p.lambda;
            assert!((e.leading.value.re - z.re).abs() < 1e-9, "{:?}: {} vs {}", e.w, e.leading.value, z);
            assert!((e.leading.value.im.abs() - z.im.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn transposed_families_count_alike() {
        let td = small();
        let a = cover_spectrum(&td, &Lattice::diagonal(6, 1).unwrap(), 0.5, 2, 1e-11).unwrap();
        let b = cover_spectrum(&td, &Lattice::diagonal(1, 6).unwrap(), 0.5, 2, 1e-11).unwrap();
        let ca = count_window(&a, 0.1, REAL_AXIS_TOL).unwrap();
        let cb = count_window(&b, 0.1, REAL_AXIS_TOL).unwrap();
        assert!(ca.count >= 1 && cb.count >= 1);
        assert!(ca.count.abs_diff(cb.count) <= 1, "{ca:?} {cb:?}");
    }

    #[test]
    fn window_outside_the_cut_is_rejected() {
        let td = small();
        let cs = cover_spectrum(&td, &Lattice::identity(), 0.9, 1, 1e-10).unwrap();
        assert!(count_window(&cs, 0.2, REAL_AXIS_TOL).is_err());
        assert!(count_window(&cs, 0.0, REAL_AXIS_TOL).is_err());
    }

    #[test]
    fn theory_laws_integrate_to_the_window_mass() {
        let sigma = [[0.032, 0.0], [0.0, 0.033]];
        let d0 = 0.016;
        let total = Family::One.theory_mass(&sigma, 1.0 - d0, 1.0);
        assert!((total - family_one_window_mass(&sigma, d0)).abs() < 1e-15);
        let parts: f64 = (0..8)
            .map(|k| Family::One.theory_mass(&sigma, 1.0 - d0 + k as f64 * d0 / 8.0, 1.0 - d0 + (k + 1) as f64 * d0 / 8.0))
            .sum();
        assert!((parts - total).abs() < 1e-14);
        assert!((Family::Two.theory_mass(&sigma, 1.0 - d0, 1.0) - d0 * family_two_density(&sigma)).abs() < 1e-15);
        for f in [Family::One, Family::Two] {
            assert_eq!(f.theory_cdf(d0, 1.0 - d0), 0.0);
            assert_eq!(f.theory_cdf(d0, 1.0), 1.0);
        }
    }

    #[test]
    fn delta0_rule() {
        let sigma = [[0.03, 0.0], [0.0, 0.04]];
        assert_eq!(choose_delta0(0.036, &sigma), 0.018);
        assert!((choose_delta0(0.5, &sigma) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn line_fraction() {
        let flat: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64 * std::f64::consts::PI / 10.0, 0.5)).collect();
        assert_eq!(line_fraction_above(&flat, 0.4), 1.0);
        assert_eq!(line_fraction_above(&flat, 0.6), 0.0);
        // |λ(t)| = 1 - t/π crosses r at t = π(1 - r)
        let ramp: Vec<(f64, f64)> = (0..=10).map(|k| {
            let t = k as f64 * std::f64::consts::PI / 10.0;
            (t, 1.0 - t / std::f64::consts::PI)
        }).collect();
        assert!((line_fraction_above(&ramp, 0.75) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn close_real_spectrum_pairs_values() {
        let e = |re: f64, im: f64| Eigenvalue { value: Complex64::new(re, im), multiplicity: 1, residual: 0.0 };
        let mut v = vec![e(0.9, 1e-13), e(0.5, 0.2 + 1e-9), e(0.5, -0.2), e(0.3, 0.1)];
        close_real_spectrum(&mut v, 1e-10);
        assert_eq!(v.len(), 5);
        assert_eq!(v[0].value, Complex64::new(0.9, 0.0));
        assert_eq!(v[1].value, v[2].value.conj());
        assert!(v.iter().any(|z| z.value == Complex64::new(0.3, -0.1)));
    }
}
