//! Subcommand bodies. Each returns `Ok(true)` on success, `Ok(false)` when a
//! check ran but failed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use num_complex::Complex64;
use serde_json::{json, Value};

use resonances_core::acceptance::{AcceptanceConfig, Suite};
use resonances_core::covariance::{clt_sigma, green_kubo_sigma, SigmaEstimate};
use resonances_core::dynamics::{lifted_drift, orbit as run_orbit, sample_mu, write_orbit_csv, PhasePoint};
use resonances_core::geometry::{Lattice, Table, Twist, TWO_PI};
use resonances_core::report::{write_json, CAVEAT};
use resonances_core::rng;
use resonances_core::spectra::{
    choose_delta, choose_delta0, count_window, cover_spectrum, density_from_spectra, line_fraction_above,
    spectral_measure, write_density_csv, write_resonances_csv, DensityOptions, Family,
};
use resonances_core::ulam::{build_transition, curve_options, sweep, write_curve_csv, Partition, TransitionData, MIN_GAP};

use crate::config::{config_error, ExperimentConfig};
use crate::plot;
use crate::Global;

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    global: &'a Global,
    start: Instant,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a ExperimentConfig, global: &'a Global) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        Ok(Ctx { cfg, global, start: Instant::now() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn budget(&self, what: &str) -> Result<()> {
        if let Some(m) = self.global.budget_minutes {
            if self.start.elapsed().as_secs_f64() > 60.0 * m {
                return Err(anyhow!("budget of {m} minutes exhausted before {what}"));
            }
        }
        Ok(())
    }

    fn table(&self) -> Result<Table> {
        Ok(self.cfg.table.build()?)
    }

    /// Loads the cached tallies from the output directory when they match
    /// the requested table, partition, sample count and seed.
    fn transition(&self, table: &Table) -> Result<TransitionData> {
        let c = self.cfg;
        let partition = Partition::new(table, c.n_phi, c.n_s)?;
        if let Some(max) = self.global.max_cells {
            if partition.n_cells() > max {
                return Err(config_error(format!("partition has {} cells, above --max-cells {max}", partition.n_cells())));
            }
        }
        let cache = self.path(&format!("transition-{}x{}-{}-{}.ulam", c.n_phi, c.n_s, c.samples_per_cell, c.seed));
        if let Ok(f) = File::open(&cache) {
            if let Ok(td) = TransitionData::read_from(std::io::BufReader::new(f)) {
                if td.table_hash() == table.geometry_hash()
                    && td.partition() == &partition
                    && td.samples_per_cell() == c.samples_per_cell
                    && td.seed() == c.seed
                {
                    return Ok(td);
                }
            }
        }
        self.budget("building transition data")?;
        let td = build_transition(table, &partition, c.samples_per_cell, c.seed)?;
        td.write_to(BufWriter::new(File::create(&cache)?))?;
        Ok(td)
    }

    fn sigma(&self, table: &Table) -> Result<SigmaEstimate> {
        let s = &self.cfg.sigma;
        Ok(green_kubo_sigma(table, s.gk_samples, s.gk_lags, self.cfg.seed)?)
    }

    fn envelope(&self, command: &str, mut body: Value) -> Value {
        let obj = body.as_object_mut().expect("report bodies are objects");
        obj.insert("command".into(), json!(command));
        obj.insert("seed".into(), json!(self.cfg.seed));
        obj.insert("table_seed".into(), json!(self.cfg.table.seed));
        obj.insert("caveat".into(), json!(CAVEAT));
        obj.insert("config".into(), self.cfg.to_json());
        obj.insert("runtime_seconds".into(), json!(self.start.elapsed().as_secs_f64()));
        body
    }

    fn write_report(&self, name: &str, command: &str, body: Value) -> Result<()> {
        let v = self.envelope(command, body);
        write_json(&self.path(name), &v)?;
        Ok(())
    }
}

fn csv_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn validate(cfg: &ExperimentConfig, global: &Global) -> Result<bool> {
    let ctx = Ctx::new(cfg, global)?;
    let t = ctx.table()?;
    let cands: Vec<usize> = (0..t.discs().len()).map(|k| t.candidates(k).len()).collect();
    println!(
        "valid table: {} discs, tau_min {:.6}, tau_max {:.6} (sampled over {} rays)",
        t.discs().len(),
        t.tau_min(),
        t.tau_max(),
        cfg.table.horizon_samples
    );
    ctx.write_report(
        "validate.json",
        "validate",
        json!({
            "tau_min": t.tau_min(),
            "tau_max": t.tau_max(),
            "flight_bound": t.flight_bound(),
            "mean_free_path": t.mean_free_path(),
            "free_area": t.free_area(),
            "perimeter": t.total_perimeter(),
            "max_displacement": t.max_displacement(),
            "candidates_per_obstacle": cands,
            "geometry_hash": format!("{:016x}", t.geometry_hash()),
        }),
    )?;
    Ok(true)
}

pub fn orbit(cfg: &ExperimentConfig, global: &Global) -> Result<bool> {
    let ctx = Ctx::new(cfg, global)?;
    let t = ctx.table()?;
    let x = match cfg.orbit.start {
        Some((k, phi, theta)) => {
            if k >= t.discs().len() || theta.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(config_error(format!("orbit start ({k}, {phi}, {theta}) is not a phase point")));
            }
            PhasePoint::new(k, phi.rem_euclid(TWO_PI), theta)
        }
        None => sample_mu(&t, &mut rng::stream(cfg.seed, rng::TAG_ORBIT, 0)),
    };
    if cfg.orbit.steps == 0 {
        return Err(config_error("orbit.steps must be at least 1"));
    }
    let steps = run_orbit(&t, &x, cfg.orbit.steps)?;
    let mut f = csv_file(&ctx.path("orbit.csv"))?;
    write_orbit_csv(&mut f, &x, &steps)?;
    f.flush()?;
    let mfp = steps.iter().map(|s| s.free_path).sum::<f64>() / steps.len() as f64;
    println!("orbit: {} steps, drift {:?}, mean free path {mfp:.5}", steps.len(), lifted_drift(&steps));
    ctx.write_report(
        "orbit.json",
        "orbit",
        json!({
            "start": x,
            "steps": steps.len(),
            "drift": lifted_drift(&steps),
            "mean_free_path": mfp,
            "santalo_mean_free_path": t.mean_free_path(),
        }),
    )?;
    Ok(true)
}

pub fn sigma(cfg: &ExperimentConfig, global: &Global) -> Result<bool> {
    let ctx = Ctx::new(cfg, global)?;
    let t = ctx.table()?;
    let gk = ctx.sigma(&t)?;
    let s = &cfg.sigma;
    let clt = clt_sigma(&t, s.clt_orbits, s.clt_steps, cfg.seed)?;
    let z: Vec<Vec<f64>> = (0..2)
        .map(|i| (0..2).map(|j| (gk.matrix[i][j] - clt.matrix[i][j]) / gk.stderr[i][j].hypot(clt.stderr[i][j])).collect())
        .collect();
    println!("green-kubo sigma {:?} (stderr {:?})", gk.matrix, gk.stderr);
    println!("clt sigma         {:?} (stderr {:?})", clt.matrix, clt.stderr);
    ctx.write_report(
        "sigma.json",
        "sigma",
        json!({
            "green_kubo": gk.report_json(),
            "clt": clt.report_json(),
            "clt_drift": clt.drift,
            "clt_drift_stderr": clt.drift_stderr,
            "z_scores": z,
            "discard_bias_bound": gk.discard_bias_bound(t.max_displacement()),
        }),
    )?;
    Ok(true)
}

pub fn curve(cfg: &ExperimentConfig, global: &Global) -> Result<bool> {
    let ctx = Ctx::new(cfg, global)?;
    let t = ctx.table()?;
    let td = ctx.transition(&t)?;
    let c = &cfg.curve;
    let twists: Vec<Twist> = match c.grid {
        Some(n) if n > 0 => (0..n)
            .flat_map(|j| (0..n).map(move |k| Twist::new(TWO_PI * j as f64 / n as f64, TWO_PI * k as f64 / n as f64)))
            .collect(),
        Some(_) => return Err(config_error("curve.grid must be positive")),
        None => {
            let norm = c.direction[0].hypot(c.direction[1]);
            if norm == 0.0 || c.points < 2 {
                return Err(config_error("curve needs a nonzero direction and at least 2 points"));
            }
            let d = [c.direction[0] / norm, c.direction[1] / norm];
            (0..c.points)
                .map(|i| {
                    let s = c.radius * i as f64 / (c.points - 1) as f64;
                    Twist::new(s * d[0], s * d[1])
                })
                .collect()
        }
    };
    ctx.budget("the twist sweep")?;
    let pts = sweep(&td, &twists, &curve_options(cfg.tol))?;
    let mut f = csv_file(&ctx.path("curve.csv"))?;
    write_curve_csv(&mut f, &pts)?;
    f.flush()?;
    let flagged: Vec<Twist> = pts.iter().filter(|p| !p.separated()).map(|p| p.w).collect();
    let mut body = json!({
        "points": pts.len(),
        "gap_collapsed": flagged,
        "min_gap_required": MIN_GAP,
    });
    let off_zero = pts
        .iter()
        .filter(|p| p.w.centered().norm() > 0.0)
        .map(|p| p.lambda.norm())
        .fold(0.0, f64::max);
    body["max_modulus_off_zero"] = json!(off_zero);
    if c.grid.is_none() {
        let sigma = ctx.sigma(&t)?;
        let s: Vec<f64> = pts.iter().map(|p| p.w.norm()).collect();
        let measured: Vec<f64> = pts.iter().map(|p| 1.0 - p.lambda.re).collect();
        let predicted: Vec<f64> = pts.iter().map(|p| 0.5 * p.w.quadratic_form(&sigma.matrix)).collect();
        plot::curve(&ctx.path("curve.svg"), &s, &measured, &predicted)?;
        body["sigma"] = json!(sigma.matrix);
    }
    println!("curve: {} twists, {} with collapsed gap", pts.len(), flagged.len());
    ctx.write_report("curve.json", "curve", body)?;
    Ok(true)
}

pub fn cover(cfg: &ExperimentConfig, global: &Global) -> Result<bool> {
    let ctx = Ctx::new(cfg, global)?;
    let t = ctx.table()?;
    let lattice = Lattice::new(cfg.lattice)?;
    let td = ctx.transition(&t)?;
    ctx.budget("the cover spectrum")?;
    let cs = cover_spectrum(&td, &lattice, cfg.rho_cut, cfg.how_many, cfg.tol)?;
    let g = cs.group_size() as i64;
    let mut f = csv_file(&ctx.path("resonances.csv"))?;
    write_resonances_csv(&mut f, &[(g, cs.clone())])?;
    f.flush()?;
    let nu = spectral_measure(&cs);
    let values: Vec<Complex64> = nu.atoms.iter().map(|a| a.0).collect();
    plot::spectrum(&ctx.path("cover.svg"), &values, cfg.rho_cut)?;
    let mut body = json!({
        "lattice": cfg.lattice,
        "group_size": g,
        "rho_cut": cfg.rho_cut,
        "eigenvalues": values.len(),
        "measure_mass": nu.total_mass(),
        "conjugate_closed": cs.is_conjugate_closed(),
        "max_modulus_off_zero": cs.max_off_zero().map(|m| m.1),
    });
    if let Some(delta) = cfg.delta.value()? {
        let c = count_window(&cs, delta, cfg.imag_tol)?;
        body["window"] = json!(c);
    }
    println!("cover: |G| = {g}, {} eigenvalues above {}", values.len(), cfg.rho_cut);
    ctx.write_report("report.json", "cover", body)?;
    Ok(true)
}

pub fn density(cfg: &ExperimentConfig, global: &Global) -> Result<bool> {
    let ctx = Ctx::new(cfg, global)?;
    let t = ctx.table()?;
    let family = if cfg.family == 1 { Family::One } else { Family::Two };
    let td = ctx.transition(&t)?;
    let sigma = ctx.sigma(&t)?;
    ctx.budget("choosing the window")?;
    let delta_choice = match cfg.delta.value()? {
        Some(d) => json!({"delta": d, "rule": "fixed"}),
        None => serde_json::to_value(choose_delta(&td, cfg.delta_grid, cfg.tol)?.0)?,
    };
    let delta = delta_choice["delta"].as_f64().expect("delta is numeric");
    let delta0 = cfg.delta0.value()?.unwrap_or_else(|| choose_delta0(delta, &sigma.matrix));
    if !(delta > 0.0 && delta < 1.0 && delta0 > 0.0 && delta0 < 0.5) {
        return Err(config_error(format!("need 0 < delta < 1 and 0 < delta0 < 0.5, got {delta}, {delta0}")));
    }
    let cut = (1.0 - delta - 0.5 * MIN_GAP).min(1.0 - 2.0 * delta0).max(1e-3);

    let mut spectra = Vec::new();
    let mut counts = Vec::new();
    for &n in &cfg.n_list {
        ctx.budget(&format!("N = {n}"))?;
        let cs = cover_spectrum(&td, &family.lattice(n)?, cut, 2, cfg.tol)?;
        let c = count_window(&cs, delta, cfg.imag_tol)?;
        println!("N = {n}: |G| = {}, window count {} ({} near the real axis)", cs.group_size(), c.count, c.near_real);
        counts.push(json!({"N": n, "group_size": cs.group_size(), "count": c.count, "near_real": c.near_real,
                           "count_per_N": c.count as f64 / n as f64}));
        spectra.push((n, cs));
    }
    let mut f = csv_file(&ctx.path("resonances.csv"))?;
    write_resonances_csv(&mut f, &spectra)?;
    f.flush()?;
    let opts = DensityOptions { tol: cfg.tol, imag_tol: cfg.imag_tol };
    let report = density_from_spectra(family, spectra, delta0, cfg.bins, &sigma.matrix, &opts)?;
    let mut f = csv_file(&ctx.path("density.csv"))?;
    write_density_csv(&mut f, &report)?;
    f.flush()?;
    if let Some(row) = report.rows.last() {
        let bins: Vec<_> = row.bins.iter().map(|b| (b.left, b.right, b.empirical_mass, b.theory_mass)).collect();
        plot::density(&ctx.path("density.svg"), &format!("family {}, N = {}", family.number(), row.n), &bins)?;
    }
    let mut body = json!({
        "family": family.number(),
        "sigma": sigma.report_json(),
        "delta": delta_choice,
        "delta0": delta0,
        "counts": counts,
        "fit": report.rows.iter().map(|r| json!({
            "N": r.n, "atoms": r.atoms, "window_mass": r.window_mass, "theory_window_mass": r.theory_window_mass,
            "sup_cdf": r.sup_cdf, "interior_deviation": r.interior_deviation,
        })).collect::<Vec<_>>(),
    });
    if family == Family::One {
        ctx.budget("the counting oracle")?;
        let m = 129;
        let ts: Vec<Twist> = (0..m).map(|i| Twist::new(std::f64::consts::PI * i as f64 / (m - 1) as f64, 0.0)).collect();
        let pts = sweep(&td, &ts, &curve_options(cfg.tol))?;
        let samples: Vec<(f64, f64)> = pts.iter().map(|p| (p.w.0[0], p.lambda.norm())).collect();
        body["count_oracle"] = json!(line_fraction_above(&samples, 1.0 - delta));
    }
    ctx.write_report("report.json", "density", body)?;
    Ok(true)
}

pub fn check(cfg: &ExperimentConfig, global: &Global, only: Option<&[u8]>) -> Result<bool> {
    let ctx = Ctx::new(cfg, global)?;
    let s = &cfg.sigma;
    let ac = AcceptanceConfig {
        n_phi: cfg.n_phi,
        n_s: cfg.n_s,
        samples_per_cell: cfg.samples_per_cell,
        seed: cfg.seed,
        tol: cfg.tol,
        gk_samples: s.gk_samples,
        gk_lags: s.gk_lags,
        clt_orbits: s.clt_orbits,
        clt_steps: s.clt_steps,
        delta_grid: cfg.delta_grid,
        ..AcceptanceConfig::default()
    };
    let suite = Suite::new(ac);
    let ids: Vec<u8> = only.map_or_else(|| (1..=11).collect(), <[u8]>::to_vec);
    if let Some(bad) = ids.iter().find(|&&i| !(1..=11).contains(&i)) {
        return Err(config_error(format!("no criterion {bad}")));
    }
    let mut results = Vec::new();
    for id in ids {
        let r = suite.run(id);
        println!("{}", r.line());
        results.push(r);
    }
    let passed = results.iter().all(|r| r.passed);
    ctx.write_report(
        "acceptance.json",
        "check",
        json!({ "passed": passed, "criteria": results, "acceptance_config": suite.config }),
    )?;
    Ok(passed)
}
