//! The collision map `T`, its time reversal, the displacement cocycle `F` and
//! Liouville sampling.
//!
//! Coordinates: a phase point on obstacle `k` sits at `c_k + r_k (cos φ, sin φ)`
//! and leaves along the outward normal rotated counterclockwise by `θ`. Arc
//! length is `ℓ = r_k φ`; reports use `φ`.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{cross, dot, Table, TWO_PI};

/// Self-intersection guard, relative to `tau_min`.
pub const T_EPS_REL: f64 = 1e-9;
/// Outgoing angles within this distance of `±π/2` are reported as grazing.
pub const GRAZING_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub obstacle: usize,
    pub phi: f64,
    pub theta: f64,
}

impl PhasePoint {
    pub fn new(obstacle: usize, phi: f64, theta: f64) -> Self {
        PhasePoint { obstacle, phi, theta }
    }

    /// Position on the torus lift, relative to the source cell.
    pub fn position(&self, table: &Table) -> [f64; 2] {
        let d = table.discs()[self.obstacle];
        [d.center[0] + d.radius * self.phi.cos(), d.center[1] + d.radius * self.phi.sin()]
    }

    /// Distance on `M` treating `φ` as periodic; used by round-trip checks.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        if self.obstacle != other.obstacle {
            return f64::INFINITY;
        }
        let dphi = (self.phi - other.phi).rem_euclid(TWO_PI);
        dphi.min(TWO_PI - dphi).max((self.theta - other.theta).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub next: PhasePoint,
    /// `F` at the source point.
    pub displacement: [i8; 2],
    pub free_path: f64,
}

/// Time reversal `ι(φ, θ) = (φ, -θ)`.
#[inline]
pub fn involution(x: &PhasePoint) -> PhasePoint {
    PhasePoint { theta: -x.theta, ..*x }
}

/// Ray origin (relative to the obstacle center) and unit direction.
#[inline]
pub(crate) fn ray_of(table: &Table, x: &PhasePoint) -> ([f64; 2], [f64; 2]) {
    let r = table.discs()[x.obstacle].radius;
    let (s, c) = x.phi.sin_cos();
    let (sd, cd) = (x.phi + x.theta).sin_cos();
    ([r * c, r * s], [cd, sd])
}

/// One application of the collision map, lifted to `Z²`.
pub fn collide(table: &Table, x: &PhasePoint) -> Result<Step> {
    let (origin, dir) = ray_of(table, x);
    let t_eps = T_EPS_REL * table.tau_min();
    let hit = table.cast(x.obstacle, origin, dir, t_eps).ok_or(Error::HorizonViolation {
        obstacle: x.obstacle,
        bound: table.flight_bound(),
    })?;
    let cand = table.candidates(x.obstacle)[hit.candidate];
    let y = [
        origin[0] + hit.t * dir[0] - cand.center[0],
        origin[1] + hit.t * dir[1] - cand.center[1],
    ];
    let len = y[0].hypot(y[1]);
    let normal = [y[0] / len, y[1] / len];
    let phi = normal[1].atan2(normal[0]).rem_euclid(TWO_PI);
    // Outgoing v' = v - 2<v,n>n, so cross(n, v') = cross(n, v) and <n, v'> = -<n, v>.
    let incoming = dot(normal, dir);
    let theta = cross(normal, dir).atan2(-incoming);
    debug_assert!({
        let out = [dir[0] - 2.0 * incoming * normal[0], dir[1] - 2.0 * incoming * normal[1]];
        (dot(out, normal) + dot(dir, normal)).abs() < 1e-10
    });
    if theta.abs() > FRAC_PI_2 - GRAZING_EPS {
        return Err(Error::GrazingCollision { obstacle: cand.disc, theta });
    }
    Ok(Step {
        next: PhasePoint { obstacle: cand.disc, phi: if phi >= TWO_PI { 0.0 } else { phi }, theta },
        displacement: cand.shift,
        free_path: hit.t,
    })
}

/// `T^{-1} = ι T ι`. The displacement returned is `-F(T^{-1} x) = F(ι x)`,
/// so that `T_Λ^{-1}(x, p) = (T^{-1} x, p + displacement)`.
pub fn inverse_collide(table: &Table, x: &PhasePoint) -> Result<Step> {
    let step = collide(table, &involution(x))?;
    Ok(Step { next: involution(&step.next), ..step })
}

/// Draws from the Liouville measure `cos θ dℓ dθ / (2 Σ|γ_k|)`.
pub fn sample_mu<R: rand::Rng + ?Sized>(table: &Table, rng: &mut R) -> PhasePoint {
    let discs = table.discs();
    let mut pick = rng.random::<f64>() * table.total_perimeter();
    let mut obstacle = discs.len() - 1;
    for (k, d) in discs.iter().enumerate() {
        if pick < d.perimeter() {
            obstacle = k;
            break;
        }
        pick -= d.perimeter();
    }
    let phi = rng.random::<f64>() * TWO_PI;
    let s = 2.0 * rng.random::<f64>() - 1.0;
    PhasePoint { obstacle, phi, theta: s.asin() }
}

/// Samples `x ~ μ` and applies `T`, resampling on grazing hits.
/// Returns the step, its source and the number of discarded draws.
pub fn sample_step<R: rand::Rng + ?Sized>(table: &Table, rng: &mut R) -> Result<(PhasePoint, Step, usize)> {
    let mut discards = 0;
    loop {
        let x = sample_mu(table, rng);
        match collide(table, &x) {
            Ok(s) => return Ok((x, s, discards)),
            Err(Error::GrazingCollision { .. }) => discards += 1,
            Err(e) => return Err(e),
        }
    }
}

pub fn orbit(table: &Table, x: &PhasePoint, n: usize) -> Result<Vec<Step>> {
    if n == 0 {
        return Err(Error::InvalidArgument("orbit length must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut cur = *x;
    for step in 0..n {
        let s = collide(table, &cur).map_err(|e| Error::Orbit { step, source: Box::new(e) })?;
        cur = s.next;
        out.push(s);
    }
    Ok(out)
}

/// Orbit dump: `step, obstacle, phi, theta, F1, F2, tau`, one row per source point.
pub fn write_orbit_csv<W: Write>(mut w: W, start: &PhasePoint, steps: &[Step]) -> std::io::Result<()> {
    writeln!(w, "step,obstacle,phi,theta,F1,F2,tau")?;
    let mut cur = *start;
    for (k, s) in steps.iter().enumerate() {
        writeln!(
            w,
            "{k},{},{:.17e},{:.17e},{},{},{:.17e}",
            cur.obstacle, cur.phi, cur.theta, s.displacement[0], s.displacement[1], s.free_path
        )?;
        cur = s.next;
    }
    Ok(())
}

/// Lifts `T` to the `Z²` cover and accumulates the cell drift.
pub fn lifted_drift(steps: &[Step]) -> [i64; 2] {
    steps.iter().fold([0, 0], |acc, s| {
        [acc[0] + i64::from(s.displacement[0]), acc[1] + i64::from(s.displacement[1])]
    })
}
