//! Exact rational re-check of the certified `N`: the mixture of envelope
//! and error function at `N` stays below `L(p, n)` on the whole grid, and
//! `N - 2` does not.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use smart_rule::{find_n, FindNOptions};

type Q = BigRational;

const GRID: usize = 4097;

fn binom_row(n: u64) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for j in 0..n {
        let next = &row[j as usize] * BigInt::from(n - j) / BigInt::from(j + 1);
        row.push(next);
    }
    row
}

/// `P[Bin(n, p) = j]` for `j = 0..=n`.
fn pmf(p: &Q, n: u64) -> Vec<Q> {
    let c = binom_row(n);
    let q = Q::one() - p;
    let mut pw = vec![Q::one()];
    let mut qw = vec![Q::one()];
    for _ in 0..n {
        pw.push(pw.last().unwrap() * p);
        qw.push(qw.last().unwrap() * &q);
    }
    (0..=n as usize)
        .map(|j| Q::from_integer(c[j].clone()) * &pw[j] * &qw[n as usize - j])
        .collect()
}

/// `p + (1 - 2p) P[Bin(n, p) >= (n + 1) / 2]`.
fn err(p: &Q, n: u64) -> Q {
    let tail: Q = pmf(p, n).into_iter().skip(n as usize / 2 + 1).sum();
    p + (Q::one() - p * Q::from_integer(2.into())) * tail
}

fn inside(p: &Q, big_n: u64, t: &Q) -> Q {
    let lo = t * Q::from_integer(big_n.into());
    let hi = (Q::one() - t) * Q::from_integer(big_n.into());
    pmf(p, big_n)
        .into_iter()
        .enumerate()
        .filter(|(x, _)| {
            let x = Q::from_integer((*x as u64).into());
            lo < x && x < hi
        })
        .map(|(_, v)| v)
        .sum()
}

fn grid() -> Vec<Q> {
    (0..GRID)
        .map(|j| Q::new((j as u64).into(), ((GRID - 1) as u64).into()))
        .collect()
}

/// Upper hull of `(x_j, y_j)` evaluated back at every `x_j`.
fn hull_values(xs: &[Q], ys: &[Q]) -> Vec<Q> {
    let mut h: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            // drop b unless it lies strictly above the chord a -> i
            let cross = (&xs[b] - &xs[a]) * (&ys[i] - &ys[a]) - (&ys[b] - &ys[a]) * (&xs[i] - &xs[a]);
            if !cross.is_negative() {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    let mut out = Vec::with_capacity(xs.len());
    for w in h.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a..b {
            let s = (&xs[i] - &xs[a]) / (&xs[b] - &xs[a]);
            out.push(&ys[a] + s * (&ys[b] - &ys[a]));
        }
    }
    out.push(ys[xs.len() - 1].clone());
    out
}

/// Largest excess of the mixture over `L(p, n)` on the grid.
fn max_excess(n: u64, t: f64, big_n: u64) -> Q {
    let t = Q::from_float(t).unwrap();
    let xs = grid();
    let l_big: Vec<Q> = xs.iter().map(|p| err(p, big_n)).collect();
    let env = hull_values(&xs, &l_big);
    let mut worst: Option<Q> = None;
    for (i, p) in xs.iter().enumerate() {
        let b = inside(p, big_n, &t);
        let lhs = &b * &env[i] + (Q::one() - &b) * &l_big[i];
        let excess = lhs - err(p, n);
        if worst.as_ref().is_none_or(|w| &excess > w) {
            worst = Some(excess);
        }
    }
    worst.unwrap()
}

fn slack() -> Q {
    Q::new(1.into(), 1_000_000_000.into())
}

#[test]
fn certified_n_passes_and_predecessor_fails() {
    for (n, t, expected) in [(5u64, 0.1, 11u64), (9, 0.2, 21)] {
        let found = find_n(n, t, &FindNOptions::default()).unwrap();
        assert_eq!(found.big_n, expected, "find_N({n}, {t})");
        assert!(max_excess(n, t, found.big_n) <= slack(), "N = {} fails exactly", found.big_n);
        assert!(max_excess(n, t, found.big_n - 2) > slack(), "N - 2 = {} passes", found.big_n - 2);
    }
}

#[test]
fn floor_cases_pass_exactly() {
    // the search starts at n + 2, so these are minimal by construction
    for (n, t) in [(1u64, 0.25), (1, 0.3), (3, 0.25), (5, 0.2)] {
        let found = find_n(n, t, &FindNOptions::default()).unwrap();
        assert_eq!(found.big_n, n + 2);
        let exact = max_excess(n, t, found.big_n);
        assert!(exact <= slack());
        // the floating-point search saw the same worst case
        assert!((exact.to_f64().unwrap() - found.worst_excess).abs() < 1e-12);
    }
}
