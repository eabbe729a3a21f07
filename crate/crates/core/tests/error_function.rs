use proptest::prelude::*;
use smart_rule::error_function::uniform_grid;
use smart_rule::{bayes_binary, concave_envelope, majority_error, monotone_gap, taylor_coeff};

fn odd_ns() -> impl Iterator<Item = u64> {
    (0..=20).map(|k| 2 * k + 1)
}

#[test]
fn gap_identity_and_monotone_decrease() {
    let grid = uniform_grid(1001);
    for n in odd_ns() {
        for &p in &grid {
            let (l, l2) = (majority_error(p, n).unwrap(), majority_error(p, n + 2).unwrap());
            assert!((l - l2 - monotone_gap(p, n).unwrap()).abs() <= 1e-12, "p = {p}, n = {n}");
            assert!(l2 <= l + 1e-15, "p = {p}, n = {n}");
        }
    }
}

#[test]
fn uniform_convergence_to_bayes() {
    let grid = uniform_grid(1001);
    let sup = |n: u64| {
        grid.iter()
            .map(|&p| majority_error(p, n).unwrap() - bayes_binary(p).unwrap())
            .fold(f64::MIN, f64::max)
    };
    let ns: Vec<u64> = odd_ns().chain([101, 1001, 2001, 5001]).collect();
    let sups: Vec<f64> = ns.iter().map(|&n| sup(n)).collect();
    for w in sups.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "{sups:?}");
    }
    for (&n, &s) in ns.iter().zip(&sups) {
        if n >= 1000 {
            assert!(s < 0.02, "n = {n}: {s}");
        }
    }
}

#[test]
fn expansion_at_zero() {
    // C(2k + 1, k) for k = 1, 2, 3
    for (n, c) in [(3u64, 3u128), (5, 10), (7, 35)] {
        assert_eq!(taylor_coeff(n).unwrap(), c);
        let p: f64 = 1e-3;
        let ratio = (majority_error(p, n).unwrap() - p) / p.powi((n / 2 + 1) as i32);
        assert!((ratio / c as f64 - 1.0).abs() < 0.05, "n = {n}: {ratio}");
    }
}

#[test]
fn envelope_is_minimal_at_grid_resolution() {
    for n in [3u64, 5, 9, 21] {
        let env = concave_envelope(n, 1025).unwrap();
        let knots = env.knots();
        for &(x, y) in &knots[1..knots.len() - 1] {
            // every knot sits on the graph, so lowering it loses majorization
            let l = majority_error(x, n).unwrap();
            assert!((y - l).abs() <= 1e-15, "n = {n}, x = {x}");
            assert!(y - 1e-6 < l);
        }
        for &p in &uniform_grid(1025) {
            assert!(env.eval(p) >= majority_error(p, n).unwrap() - 1e-15);
        }
        assert!(env.is_concave(1e-12));
    }
}

#[test]
fn envelope_eventually_below_small_n() {
    let target: Vec<(f64, f64)> = uniform_grid(4097)
        .into_iter()
        .filter(|p| (0.1..=0.9).contains(p))
        .map(|p| (p, majority_error(p, 3).unwrap()))
        .collect();
    let found = (5..=1001u64).step_by(2).find(|&big_n| {
        let env = concave_envelope(big_n, 4097).unwrap();
        target.iter().all(|&(p, l)| env.eval(p) <= l)
    });
    assert!(found.is_some());
}

proptest! {
    #[test]
    fn symmetric_and_bounded(p in 0.0..=1.0f64, k in 0u64..60) {
        let n = 2 * k + 1;
        let l = majority_error(p, n).unwrap();
        prop_assert!((l - majority_error(1.0 - p, n).unwrap()).abs() <= 1e-12);
        prop_assert!(l >= bayes_binary(p).unwrap() - 1e-15);
        prop_assert!(l <= 0.5 + 1e-15);
    }
}
