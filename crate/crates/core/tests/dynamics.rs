use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use resonances_core::acceptance::ks_uniform;
use resonances_core::dynamics::{collide, orbit, sample_mu, PhasePoint};
use resonances_core::geometry::reference_table;
use resonances_core::rng::{stream, TAG_TEST};
use resonances_core::Table;

/// Signed distance from `p` to the nearest obstacle translate, and that
/// translate as `(disc, shift)`.
fn nearest(t: &Table, p: [f64; 2]) -> (f64, usize, [i64; 2]) {
    let mut best = (f64::INFINITY, 0, [0, 0]);
    for (k, d) in t.discs().iter().enumerate() {
        let q = [p[0] - d.center[0], p[1] - d.center[1]];
        let shift = [q[0].round(), q[1].round()];
        let dist = (q[0] - shift[0]).hypot(q[1] - shift[1]) - d.radius;
        if dist < best.0 {
            best = (dist, k, [shift[0] as i64, shift[1] as i64]);
        }
    }
    best
}

/// Marches the outgoing ray in steps of `1e-6` until it enters an obstacle,
/// then bisects the crossing.
fn march(t: &Table, x: &PhasePoint) -> (f64, usize, [i64; 2]) {
    let o = x.position(t);
    let dir = [(x.phi + x.theta).cos(), (x.phi + x.theta).sin()];
    let at = |s: f64| [o[0] + s * dir[0], o[1] + s * dir[1]];
    let h = 1e-6;
    let mut s = h;
    while nearest(t, at(s)).0 > 0.0 {
        s += h;
        assert!(s < 10.0, "ray escaped");
    }
    let (mut lo, mut hi) = (s - h, s);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if nearest(t, at(mid)).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, disc, shift) = nearest(t, at(hi));
    (hi, disc, shift)
}

fn check_against_marcher(t: &Table, x: &PhasePoint) {
    let step = collide(t, x).unwrap();
    let (tau, disc, shift) = march(t, x);
    assert!((step.free_path - tau).abs() < 1e-8, "{x:?}: tau {} vs {}", step.free_path, tau);
    assert_eq!(step.next.obstacle, disc, "{x:?}");
    assert_eq!([i64::from(step.displacement[0]), i64::from(step.displacement[1])], shift, "{x:?}");
}

#[test]
fn collide_agrees_with_a_ray_marcher() {
    let t = reference_table();
    check_against_marcher(&t, &PhasePoint::new(0, 0.3, 0.7));
    let mut rng = stream(5, TAG_TEST, 0);
    for _ in 0..20 {
        let x = PhasePoint::new(rng.random_range(0..2), rng.random::<f64>() * 2.0 * PI, (rng.random::<f64>() - 0.5) * 2.8);
        check_against_marcher(&t, &x);
    }
}

#[test]
fn liouville_sampling_is_uniform_in_sin_theta() {
    let t = reference_table();
    let mut rng = stream(11, TAG_TEST, 1);
    let n = 1_000_000;
    let mut u = Vec::with_capacity(n);
    let mut on_first = 0usize;
    for _ in 0..n {
        let x = sample_mu(&t, &mut rng);
        assert!(x.theta.abs() <= FRAC_PI_2 && (0.0..2.0 * PI).contains(&x.phi));
        u.push(0.5 * (x.theta.sin() + 1.0));
        on_first += usize::from(x.obstacle == 0);
    }
    let ks = ks_uniform(&mut u);
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS {ks}");
    let p = 0.4 / 0.65;
    let freq = on_first as f64 / n as f64;
    assert!((freq - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{freq} vs {p}");
}

#[test]
fn orbit_mean_free_path_matches_santalo() {
    let t = reference_table();
    let exact = PI * (1.0 - PI * (0.4f64.powi(2) + 0.25f64.powi(2))) / (2.0 * PI * 0.65);
    assert!((t.mean_free_path() - exact).abs() < 1e-14);
    let steps = orbit(&t, &PhasePoint::new(0, 0.3, 0.7), 1_000_000).unwrap();
    let mean = steps.iter().map(|s| s.free_path).sum::<f64>() / steps.len() as f64;
    assert!((mean - exact).abs() / exact < 1e-2, "{mean} vs {exact}");
    assert!(steps.iter().all(|s| s.free_path >= t.tau_min() - 1e-12));
}
