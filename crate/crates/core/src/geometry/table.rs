use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::dot;
use crate::dynamics;
use crate::error::{Error, Result};
use crate::rng;

/// Relative slack added to the sampled horizon when enumerating obstacle
/// translates for collision solving.
pub const HORIZON_SLACK: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disc {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Disc { center, radius }
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * PI * self.radius
    }

    fn check(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius < 0.5) {
            return Err(Error::InvalidDisc(format!("radius {} not in (0, 1/2)", self.radius)));
        }
        if self.center.iter().any(|c| !(0.0..1.0).contains(c)) {
            return Err(Error::InvalidDisc(format!("center {:?} not in [0,1)^2", self.center)));
        }
        Ok(())
    }
}

/// An obstacle translate `Γ_{j,p}` seen from the center of a source obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub disc: usize,
    pub shift: [i8; 2],
    /// Center of the translate relative to the source center.
    pub center: [f64; 2],
    pub radius: f64,
    /// Lower bound on any flight from the source obstacle to this translate.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Hit {
    pub candidate: usize,
    pub t: f64,
}

/// A validated table: discs on the unit torus with their free-path bounds.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    discs: Vec<Disc>,
    tau_min: f64,
    tau_max: f64,
    total_perimeter: f64,
    #[serde(skip)]
    flight_bound: f64,
    #[serde(skip)]
    candidates: Vec<Vec<Candidate>>,
}

impl Table {
    /// Builds a table with an externally asserted horizon `tau_max`, checking
    /// only the overlap condition. Collisions are solved against all
    /// translates reachable within `tau_max * (1 + HORIZON_SLACK)`.
    pub fn with_horizon(discs: Vec<Disc>, tau_max: f64) -> Result<Table> {
        if discs.is_empty() {
            return Err(Error::InvalidDisc("empty disc list".into()));
        }
        if !(tau_max > 0.0 && tau_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau_max {tau_max} must be positive")));
        }
        for d in &discs {
            d.check()?;
        }
        let tau_min = min_separation(&discs)?;
        let flight_bound = tau_max * (1.0 + HORIZON_SLACK);
        let candidates = (0..discs.len())
            .map(|k| enumerate_candidates(&discs, k, flight_bound))
            .collect();
        Ok(Table {
            total_perimeter: discs.iter().map(Disc::perimeter).sum(),
            discs,
            tau_min,
            tau_max,
            flight_bound,
            candidates,
        })
    }

    pub fn discs(&self) -> &[Disc] {
        &self.discs
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn flight_bound(&self) -> f64 {
        self.flight_bound
    }

    pub fn total_perimeter(&self) -> f64 {
        self.total_perimeter
    }

    pub fn max_radius(&self) -> f64 {
        self.discs.iter().map(|d| d.radius).fold(0.0, f64::max)
    }

    pub fn candidates(&self, source: usize) -> &[Candidate] {
        &self.candidates[source]
    }

    /// Area of the billiard domain `Q` (unit torus minus the discs).
    pub fn free_area(&self) -> f64 {
        1.0 - self.discs.iter().map(|d| PI * d.radius * d.radius).sum::<f64>()
    }

    /// Santaló's mean free path `π |Q| / |∂Q|`.
    pub fn mean_free_path(&self) -> f64 {
        PI * self.free_area() / self.total_perimeter
    }

    /// Largest possible `|F|_∞` given the candidate set.
    pub fn max_displacement(&self) -> i32 {
        self.candidates
            .iter()
            .flatten()
            .map(|c| i32::from(c.shift[0].abs().max(c.shift[1].abs())))
            .max()
            .unwrap_or(0)
    }

    /// FNV-1a over the disc data; identifies the geometry in binary containers.
    pub fn geometry_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for d in &self.discs {
            for x in [d.center[0], d.center[1], d.radius] {
                for b in x.to_bits().to_le_bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    /// First obstacle translate hit by the ray `origin + t dir`, `t > t_eps`.
    /// `origin` is relative to the center of obstacle `source`.
    pub(crate) fn cast(&self, source: usize, origin: [f64; 2], dir: [f64; 2], t_eps: f64) -> Option<Hit> {
        cast_ray(&self.candidates[source], origin, dir, t_eps)
    }
}

pub(crate) fn cast_ray(candidates: &[Candidate], origin: [f64; 2], dir: [f64; 2], t_eps: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (idx, c) in candidates.iter().enumerate() {
        if let Some(b) = best {
            if c.gap >= b.t {
                break;
            }
        }
        let d = [origin[0] - c.center[0], origin[1] - c.center[1]];
        let b = dot(d, dir);
        if b >= 0.0 {
            continue;
        }
        let q = dot(d, d) - c.radius * c.radius;
        let disc = b * b - q;
        if disc < 0.0 {
            continue;
        }
        // Entry root of t^2 + 2bt + q, written without cancellation.
        let t = q / (-b + disc.sqrt());
        if t > t_eps && best.is_none_or(|h| t < h.t) {
            best = Some(Hit { candidate: idx, t });
        }
    }
    best
}

fn min_separation(discs: &[Disc]) -> Result<f64> {
    let mut tau_min = f64::INFINITY;
    for (i, a) in discs.iter().enumerate() {
        for (j, b) in discs.iter().enumerate().skip(i) {
            for px in -1..=1 {
                for py in -1..=1 {
                    if i == j && px == 0 && py == 0 {
                        continue;
                    }
                    let dx = b.center[0] + f64::from(px) - a.center[0];
                    let dy = b.center[1] + f64::from(py) - a.center[1];
                    let sep = dx.hypot(dy) - a.radius - b.radius;
                    if sep <= 0.0 {
                        return Err(Error::Overlap { first: i, second: j, separation: sep });
                    }
                    tau_min = tau_min.min(sep);
                }
            }
        }
    }
    Ok(tau_min)
}

fn enumerate_candidates(discs: &[Disc], source: usize, bound: f64) -> Vec<Candidate> {
    let r_max = discs.iter().map(|d| d.radius).fold(0.0, f64::max);
    let reach = (bound + 2.0 * r_max).ceil() as i32 + 1;
    let src = discs[source];
    let mut out = Vec::new();
    for (j, d) in discs.iter().enumerate() {
        for px in -reach..=reach {
            for py in -reach..=reach {
                if j == source && px == 0 && py == 0 {
                    continue;
                }
                let center = [
                    d.center[0] + f64::from(px) - src.center[0],
                    d.center[1] + f64::from(py) - src.center[1],
                ];
                let gap = center[0].hypot(center[1]) - src.radius - d.radius;
                if gap <= bound {
                    out.push(Candidate {
                        disc: j,
                        shift: [px as i8, py as i8],
                        center,
                        radius: d.radius,
                        gap,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    out
}

/// Checks non-overlap and certifies finite horizon by sampling
/// `horizon_samples` Liouville-distributed rays. A ray with no obstacle within
/// `horizon_cap` rejects the table.
pub fn validate_table(discs: &[Disc], horizon_samples: usize, horizon_cap: f64, seed: u64) -> Result<Table> {
    if !(horizon_cap > 0.0) {
        return Err(Error::InvalidArgument("horizon_cap must be positive".into()));
    }
    let probe = Table::with_horizon(discs.to_vec(), horizon_cap / (1.0 + HORIZON_SLACK))?;
    let t_eps = dynamics::T_EPS_REL * probe.tau_min();
    let flights: Vec<Option<f64>> = (0..horizon_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, rng::TAG_HORIZON, i as u64);
            let x = dynamics::sample_mu(&probe, &mut r);
            let (origin, dir) = dynamics::ray_of(&probe, &x);
            probe.cast(x.obstacle, origin, dir, t_eps).map(|h| h.t).filter(|t| *t <= horizon_cap)
        })
        .collect();
    let mut tau_max: f64 = probe.tau_min();
    for f in flights {
        match f {
            Some(t) => tau_max = tau_max.max(t),
            None => return Err(Error::Horizon { cap: horizon_cap }),
        }
    }
    Table::with_horizon(discs.to_vec(), tau_max)
}

/// The default geometry: a disc of radius 0.4 at the origin and one of radius
/// 0.25 at the cell center.
pub fn reference_discs() -> Vec<Disc> {
    vec![Disc::new([0.0, 0.0], 0.4), Disc::new([0.5, 0.5], 0.25)]
}

/// Validated reference table with default horizon parameters.
pub fn reference_table() -> Table {
    let cfg = TableConfig::reference();
    cfg.build().expect("reference table is valid")
}

fn default_horizon_samples() -> usize {
    100_000
}

fn default_horizon_cap() -> f64 {
    5.0
}

fn default_seed() -> u64 {
    42
}

/// Table config file: a list of discs plus validation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub discs: Vec<Disc>,
    #[serde(default = "default_horizon_samples")]
    pub horizon_samples: usize,
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl TableConfig {
    pub fn reference() -> Self {
        TableConfig {
            discs: reference_discs(),
            horizon_samples: default_horizon_samples(),
            horizon_cap: default_horizon_cap(),
            seed: default_seed(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("table config serializes")
    }

    pub fn build(&self) -> Result<Table> {
        validate_table(&self.discs, self.horizon_samples, self.horizon_cap, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_table_is_valid() {
        let t = validate_table(&reference_discs(), 20_000, 5.0, 1).unwrap();
        let expected = 0.5f64.hypot(0.5) - 0.65;
        assert!((t.tau_min() - expected).abs() < 1e-12);
        assert!(t.tau_max() > t.tau_min() && t.tau_max() < 2.0);
    }

    #[test]
    fn single_small_disc_has_infinite_horizon() {
        let err = validate_table(&[Disc::new([0.5, 0.5], 0.25)], 100_000, 5.0, 42).unwrap_err();
        assert!(matches!(err, Error::Horizon { .. }), "{err}");
    }

    #[test]
    fn overlapping_discs_are_rejected() {
        let err = validate_table(&[Disc::new([0.0, 0.0], 0.3), Disc::new([0.25, 0.0], 0.3)], 10, 5.0, 0)
            .unwrap_err();
        assert!(matches!(err, Error::Overlap { first: 0, second: 1, .. }), "{err}");
    }

    #[test]
    fn overlap_through_the_cell_wall() {
        let err = validate_table(&[Disc::new([0.05, 0.5], 0.2), Disc::new([0.9, 0.5], 0.2)], 10, 5.0, 0)
            .unwrap_err();
        assert!(matches!(err, Error::Overlap { .. }));
    }

    #[test]
    fn bad_radius_and_empty_list() {
        assert!(matches!(
            Table::with_horizon(vec![Disc::new([0.5, 0.5], 0.5)], 1.0),
            Err(Error::InvalidDisc(_))
        ));
        assert!(Table::with_horizon(vec![], 1.0).is_err());
        assert!(validate_table(&reference_discs(), 10, 0.0, 0).is_err());
    }

    #[test]
    fn tau_min_matches_brute_force_boundary_search() {
        let discs = vec![Disc::new([0.1, 0.2], 0.15), Disc::new([0.55, 0.7], 0.2), Disc::new([0.8, 0.15], 0.1)];
        let t = Table::with_horizon(discs.clone(), 1.0).unwrap();
        // Minimize |a(s) - b(u)| over boundary parametrizations, coarse grid then refinement.
        let point = |d: &Disc, shift: [f64; 2], s: f64| {
            [d.center[0] + shift[0] + d.radius * s.cos(), d.center[1] + shift[1] + d.radius * s.sin()]
        };
        let mut best = f64::INFINITY;
        for (i, a) in discs.iter().enumerate() {
            for (j, b) in discs.iter().enumerate() {
                for px in -1..=1 {
                    for py in -1..=1 {
                        if i == j && px == 0 && py == 0 {
                            continue;
                        }
                        let sh = [f64::from(px), f64::from(py)];
                        let dist = |s: f64, u: f64| {
                            let p = point(a, [0.0, 0.0], s);
                            let q = point(b, sh, u);
                            (p[0] - q[0]).hypot(p[1] - q[1])
                        };
                        let n = 200;
                        let (mut bs, mut bu, mut bd) = (0.0, 0.0, f64::INFINITY);
                        for k in 0..n {
                            for l in 0..n {
                                let s = 2.0 * PI * k as f64 / n as f64;
                                let u = 2.0 * PI * l as f64 / n as f64;
                                let dd = dist(s, u);
                                if dd < bd {
                                    (bs, bu, bd) = (s, u, dd);
                                }
                            }
                        }
                        let mut h = 2.0 * PI / n as f64;
                        while h > 1e-12 {
                            let mut improved = false;
                            for (ds, du) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                                let dd = dist(bs + ds, bu + du);
                                if dd < bd {
                                    (bs, bu, bd) = (bs + ds, bu + du, dd);
                                    improved = true;
                                }
                            }
                            if !improved {
                                h *= 0.5;
                            }
                        }
                        best = best.min(bd);
                    }
                }
            }
        }
        assert!((t.tau_min() - best).abs() < 1e-9, "{} vs {}", t.tau_min(), best);
    }

    #[test]
    fn validation_is_seed_deterministic() {
        let a = validate_table(&reference_discs(), 5_000, 5.0, 9).unwrap();
        let b = validate_table(&reference_discs(), 5_000, 5.0, 9).unwrap();
        assert_eq!(a.tau_max(), b.tau_max());
    }

    #[test]
    fn config_round_trip() {
        let cfg = TableConfig::reference();
        let back = TableConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        let partial = TableConfig::from_toml("[[discs]]\ncenter = [0.5, 0.5]\nradius = 0.3\n").unwrap();
        assert_eq!(partial.horizon_samples, 100_000);
        assert!(TableConfig::from_toml("discs = 3").is_err());
    }
}
