use resonances_core::geometry::reference_table;
use resonances_core::ulam::{bootstrap_stderr, build_transition, curve_options, sweep, Partition, TransitionData};
use resonances_core::Twist;

fn transition(spc: u32, seed: u64) -> TransitionData {
    let t = reference_table();
    let p = Partition::new(&t, 24, 24).unwrap();
    build_transition(&t, &p, spc, seed).unwrap()
}

#[test]
fn doubling_the_samples_stays_within_bootstrap_error() {
    let ws = [Twist::new(0.3, 0.0), Twist::new(0.0, 0.6), Twist::new(0.5, 0.5)];
    let opts = curve_options(1e-11);
    let coarse = transition(200, 1);
    let fine = transition(400, 2);
    let a = sweep(&coarse, &ws, &opts).unwrap();
    let b = sweep(&fine, &ws, &opts).unwrap();
    // both builds carry sampling noise, so compare against the error of the
    // difference; three twists at two sigma each would fail too often
    let se_a = bootstrap_stderr(&coarse, &ws, 20, &opts).unwrap();
    let se_b = bootstrap_stderr(&fine, &ws, 20, &opts).unwrap();
    for i in 0..ws.len() {
        let d = (a[i].lambda.re - b[i].lambda.re).abs();
        let se = se_a[i][0].hypot(se_b[i][0]);
        assert!(d < 3.0 * se, "w = {:?}: {d:e} vs se {se:e}", ws[i]);
    }
}

#[test]
fn transition_container_round_trips() {
    let td = transition(20, 4);
    let mut buf = Vec::new();
    td.write_to(&mut buf).unwrap();
    let back = TransitionData::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.total_count(), td.total_count());
    for j in 0..td.n_cells() {
        assert_eq!(back.column(j), td.column(j));
    }
}

