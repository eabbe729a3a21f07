//! The majority-vote error polynomial `L(p, n)` and the objects derived from
//! it: the gap between consecutive odd sample sizes, the Bayes error, the
//! concave envelope, binomial window probabilities, and the search for the
//! sample size `N(n, t)` at which refining a cell is safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cut-off below which binomial terms are dropped.
const TERM_CUTOFF: f64 = 1e-18;

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

fn check_odd(n: u64) -> Result<()> {
    if n % 2 == 1 {
        Ok(())
    } else {
        Err(Error::EvenSampleSize(n))
    }
}

/// Probability mass of `Bin(n, p)` on the window of counts where it is not
/// negligible. Terms are generated outward from the mode by the ratio
/// recurrence and normalised, so nothing overflows or underflows for large `n`.
#[derive(Debug, Clone)]
pub struct BinomialWindow {
    /// Smallest count represented.
    pub lo: u64,
    pub mass: Vec<f64>,
}

impl BinomialWindow {
    pub fn new(n: u64, p: f64) -> Self {
        if p <= 0.0 {
            return BinomialWindow { lo: 0, mass: vec![1.0] };
        }
        if p >= 1.0 {
            return BinomialWindow { lo: n, mass: vec![1.0] };
        }
        let q = 1.0 - p;
        let odds = p / q;
        let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;

        let mut upper = vec![1.0];
        let mut term = 1.0;
        let mut i = mode;
        while i < n {
            term *= ((n - i) as f64) / ((i + 1) as f64) * odds;
            if term < TERM_CUTOFF {
                break;
            }
            upper.push(term);
            i += 1;
        }
        let mut lower = Vec::new();
        let mut term = 1.0;
        let mut i = mode;
        while i > 0 {
            term *= (i as f64) / ((n - i + 1) as f64) / odds;
            if term < TERM_CUTOFF {
                break;
            }
            lower.push(term);
            i -= 1;
        }
        let lo = mode - lower.len() as u64;
        let mut mass: Vec<f64> = lower.into_iter().rev().collect();
        mass.extend(upper);
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        BinomialWindow { lo, mass }
    }

    fn hi(&self) -> u64 {
        self.lo + self.mass.len() as u64 - 1
    }

    /// `P[lo_count <= X <= hi_count]`.
    pub fn range(&self, lo_count: u64, hi_count: u64) -> f64 {
        if hi_count < lo_count || hi_count < self.lo || lo_count > self.hi() {
            return 0.0;
        }
        let a = (lo_count.max(self.lo) - self.lo) as usize;
        let b = (hi_count.min(self.hi()) - self.lo) as usize;
        self.mass[a..=b].iter().sum()
    }

    /// `P[X >= count]`.
    pub fn upper_tail(&self, count: u64) -> f64 {
        self.range(count, u64::MAX)
    }
}

/// `L(p, n)` from an already computed window of `Bin(n, p)`.
fn majority_error_from(window: &BinomialWindow, p: f64, n: u64) -> f64 {
    let k = (n - 1) / 2;
    // p * P[X <= k] + (1 - p) * P[X >= k + 1], rearranged
    let upper = window.upper_tail(k + 1);
    p + (1.0 - 2.0 * p) * upper
}

/// Expected error of predicting a Bernoulli(`p`) label by the majority vote
/// of `n` independent labels, `n` odd.
pub fn majority_error(p: f64, n: u64) -> Result<f64> {
    check_probability(p)?;
    check_odd(n)?;
    Ok(majority_error_from(&BinomialWindow::new(n, p), p, n))
}

/// `L*(p) = min(p, 1 - p)`.
pub fn bayes_binary(p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(p.min(1.0 - p))
}

/// `L(p, n) - L(p, n + 2) = C(n, k) (2p - 1)^2 p^(k+1) (1 - p)^(k+1)`.
pub fn monotone_gap(p: f64, n: u64) -> Result<f64> {
    check_probability(p)?;
    check_odd(n)?;
    let k = (n - 1) / 2;
    let pq = p * (1.0 - p);
    // C(n, k) (pq)^k built factor by factor stays bounded by 2^n / 4^k
    let mut acc = pq;
    for j in 1..=k {
        acc *= ((n - k + j) as f64) / (j as f64) * pq;
    }
    Ok((2.0 * p - 1.0).powi(2) * acc)
}

/// Coefficient `C(2k+1, k)` of `p^(k+1)` in the expansion of `L(p, 2k+1)`
/// at zero. Undefined for `n = 1`, where `L(p, 1) = 2p - 2p^2`.
pub fn taylor_coeff(n: u64) -> Result<u128> {
    check_odd(n)?;
    if n == 1 {
        return Err(Error::NoExpansionForOne);
    }
    let k = (n - 1) / 2;
    binomial_coefficient(n, k)
        .ok_or_else(|| Error::InvalidArgument(format!("C({n}, {k}) overflows u128")))
}

/// Exact `C(n, k)` when it fits in a `u128`.
pub fn binomial_coefficient(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for j in 0..k {
        // c * (n - j) is divisible by (j + 1) after the multiplication
        c = c.checked_mul((n - j) as u128)? / (j as u128 + 1);
    }
    Some(c)
}

/// Smallest count strictly above `t * big_n`, computed without trusting the
/// rounding of the product.
fn first_count_above(t: f64, big_n: u64) -> u64 {
    let nf = big_n as f64;
    let mut f = (t * nf).floor();
    if t.mul_add(nf, -f) < 0.0 {
        f -= 1.0;
    }
    while t.mul_add(nf, -(f + 1.0)) >= 0.0 {
        f += 1.0;
    }
    (f + 1.0).max(0.0) as u64
}

fn check_window_args(p: f64, big_n: u64, t: f64) -> Result<()> {
    check_probability(p)?;
    if big_n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if !(t > 0.0 && t < 0.5) {
        return Err(Error::InvalidArgument(format!("t = {t} is outside (0, 1/2)")));
    }
    Ok(())
}

/// Counts `x` with `t N < x < (1 - t) N`, written as `t N < x` and
/// `t N < N - x` so that both bounds use the same product.
fn inside_counts(big_n: u64, t: f64) -> Option<(u64, u64)> {
    let lo = first_count_above(t, big_n);
    if 2 * lo > big_n {
        None
    } else {
        Some((lo, big_n - lo))
    }
}

fn binomial_inside_from(window: &BinomialWindow, big_n: u64, t: f64) -> f64 {
    match inside_counts(big_n, t) {
        Some((lo, hi)) => window.range(lo, hi),
        None => 0.0,
    }
}

/// `P[t N < Bin(N, p) < (1 - t) N]` with strict inequalities.
pub fn binomial_inside(p: f64, big_n: u64, t: f64) -> Result<f64> {
    check_window_args(p, big_n, t)?;
    Ok(binomial_inside_from(&BinomialWindow::new(big_n, p), big_n, t))
}

/// Uniform grid `j / (size - 1)` on `[0, 1]`.
pub fn uniform_grid(size: usize) -> Vec<f64> {
    let last = (size - 1) as f64;
    (0..size).map(|j| j as f64 / last).collect()
}

/// A concave piecewise-linear function on `[0, 1]` given by its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearEnvelope {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinearEnvelope {
    /// Upper concave hull of points sorted by strictly increasing abscissa.
    pub fn upper_hull(points: &[(f64, f64)]) -> Self {
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for &b in points {
            while hull.len() >= 2 {
                let o = hull[hull.len() - 2];
                let a = hull[hull.len() - 1];
                let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(b);
        }
        PiecewiseLinearEnvelope { knots: hull }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, p: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|&(x, _)| x <= p);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[k.len() - 1].1;
        }
        let (x0, y0) = k[i - 1];
        let (x1, y1) = k[i];
        if p == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (p - x0) / (x1 - x0)
    }

    /// Values at every point of a sorted grid, in one linear sweep.
    pub fn eval_sorted(&self, grid: &[f64]) -> Vec<f64> {
        let k = &self.knots;
        let mut seg = 0;
        grid.iter()
            .map(|&p| {
                while seg + 2 < k.len() && k[seg + 1].0 <= p {
                    seg += 1;
                }
                let (x0, y0) = k[seg];
                if k.len() == 1 || p <= x0 {
                    return y0;
                }
                let (x1, y1) = k[seg + 1];
                if p >= x1 {
                    return y1;
                }
                y0 + (y1 - y0) * (p - x0) / (x1 - x0)
            })
            .collect()
    }

    /// Slopes between consecutive knots never increase by more than `tol`.
    pub fn is_concave(&self, tol: f64) -> bool {
        let slopes: Vec<f64> = self
            .knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        slopes.windows(2).all(|s| s[1] - s[0] <= tol)
    }
}

/// Smallest grid accepted by [`concave_envelope`].
pub const MIN_ENVELOPE_GRID: usize = (1 << 10) + 1;

/// Default grid used to certify the refinement inequality.
pub const CERTIFICATION_GRID: usize = (1 << 12) + 1;

/// Concave envelope of `L(., n)` sampled on a uniform grid.
pub fn concave_envelope(n: u64, grid_size: usize) -> Result<PiecewiseLinearEnvelope> {
    check_odd(n)?;
    if grid_size < MIN_ENVELOPE_GRID {
        return Err(Error::InvalidArgument(format!(
            "envelope grid must have at least {MIN_ENVELOPE_GRID} points, got {grid_size}"
        )));
    }
    let points: Vec<(f64, f64)> = uniform_grid(grid_size)
        .into_iter()
        .map(|p| (p, majority_error_from(&BinomialWindow::new(n, p), p, n)))
        .collect();
    Ok(PiecewiseLinearEnvelope::upper_hull(&points))
}

/// Pointwise ingredients of the refinement inequality
/// `inside * env(p, N) + (1 - inside) * L(p, N) <= L(p, n)`.
#[derive(Debug, Clone)]
pub struct KeyInequalityGrid {
    pub grid: Vec<f64>,
    /// Left-hand side at each grid point.
    pub lhs: Vec<f64>,
    /// `L(p, n)` at each grid point.
    pub rhs: Vec<f64>,
}

impl KeyInequalityGrid {
    pub fn evaluate(n: u64, t: f64, big_n: u64, grid_size: usize) -> Result<Self> {
        let rhs = error_on_grid(n, grid_size)?;
        Self::evaluate_with_rhs(rhs, t, big_n, grid_size)
    }

    fn evaluate_with_rhs(rhs: Vec<f64>, t: f64, big_n: u64, grid_size: usize) -> Result<Self> {
        check_odd(big_n)?;
        check_window_args(0.5, big_n, t)?;
        let grid = uniform_grid(grid_size);
        let (errors, inside): (Vec<f64>, Vec<f64>) = grid
            .iter()
            .map(|&p| {
                let w = BinomialWindow::new(big_n, p);
                (majority_error_from(&w, p, big_n), binomial_inside_from(&w, big_n, t))
            })
            .unzip();
        let points: Vec<(f64, f64)> = grid.iter().copied().zip(errors.iter().copied()).collect();
        let envelope = PiecewiseLinearEnvelope::upper_hull(&points).eval_sorted(&grid);
        let lhs = inside
            .iter()
            .zip(&envelope)
            .zip(&errors)
            .map(|((b, e), l)| b * e + (1.0 - b) * l)
            .collect();
        Ok(KeyInequalityGrid { grid, lhs, rhs })
    }

    /// Largest `lhs - rhs` over the grid and where it occurs.
    pub fn worst_excess(&self) -> (f64, f64) {
        let mut worst = (f64::NEG_INFINITY, 0.0);
        for ((p, l), r) in self.grid.iter().zip(&self.lhs).zip(&self.rhs) {
            let excess = l - r;
            if excess > worst.0 {
                worst = (excess, *p);
            }
        }
        worst
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.worst_excess().0 <= slack
    }
}

fn error_on_grid(n: u64, grid_size: usize) -> Result<Vec<f64>> {
    check_odd(n)?;
    Ok(uniform_grid(grid_size)
        .into_iter()
        .map(|p| majority_error_from(&BinomialWindow::new(n, p), p, n))
        .collect())
}

/// Search settings for [`find_n`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FindNOptions {
    pub grid_size: usize,
    pub slack: f64,
    /// Largest `N` tried before giving up.
    pub cap: u64,
}

impl Default for FindNOptions {
    fn default() -> Self {
        FindNOptions {
            grid_size: CERTIFICATION_GRID,
            slack: 1e-9,
            cap: 100_000,
        }
    }
}

/// A certified `N(n, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindNResult {
    pub n: u64,
    pub t: f64,
    pub big_n: u64,
    /// `max(0, max_p lhs - rhs)`: how much of the slack was consumed.
    pub slack_used: f64,
    /// Worst `lhs - rhs` on the grid (negative when strictly satisfied).
    pub worst_excess: f64,
    pub worst_p: f64,
    pub grid_size: usize,
    /// Lipschitz bound on how far the inequality can move between grid
    /// points, from `|dL/dp| <= 2N` on both sides: `(2n + 2N) h / 2`.
    pub between_grid_bound: f64,
}

/// Smallest odd `N >= n + 2` for which the refinement inequality holds at
/// every grid point up to `options.slack`. The predicate is only known to be
/// eventually true, so candidates are scanned upward in steps of two.
pub fn find_n(n: u64, t: f64, options: &FindNOptions) -> Result<FindNResult> {
    check_odd(n)?;
    check_window_args(0.5, 1, t)?;
    let rhs = error_on_grid(n, options.grid_size)?;
    let mut best: Option<(u64, f64)> = None;
    let mut big_n = n + 2;
    while big_n <= options.cap {
        let grid = KeyInequalityGrid::evaluate_with_rhs(rhs.clone(), t, big_n, options.grid_size)?;
        let (excess, worst_p) = grid.worst_excess();
        if excess <= options.slack {
            let h = 1.0 / (options.grid_size - 1) as f64;
            return Ok(FindNResult {
                n,
                t,
                big_n,
                slack_used: excess.max(0.0),
                worst_excess: excess,
                worst_p,
                grid_size: options.grid_size,
                between_grid_bound: (2 * n + 2 * big_n) as f64 * h / 2.0,
            });
        }
        if best.is_none_or(|(_, v)| excess < v) {
            best = Some((big_n, excess));
        }
        big_n += 2;
    }
    Err(Error::SearchCapExceeded { cap: options.cap, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Majority-vote error by enumerating every label string.
    fn enumerate_error(p: f64, n: u32) -> f64 {
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let w = mask.count_ones();
            let weight = p.powi(w as i32) * (1.0 - p).powi((n - w) as i32);
            let vote_one = 2 * w > n;
            total += weight * if vote_one { 1.0 - p } else { p };
        }
        total
    }

    #[test]
    fn majority_error_examples() {
        assert_abs_diff_eq!(majority_error(0.1, 1).unwrap(), 0.18, epsilon = 1e-15);
        for n in [1, 3, 5, 41, 999] {
            assert_abs_diff_eq!(majority_error(0.5, n).unwrap(), 0.5, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(majority_error(0.1, 3).unwrap(), 0.1224, epsilon = 1e-15);
        assert_eq!(majority_error(0.1, 4), Err(Error::EvenSampleSize(4)));
        assert_eq!(majority_error(1.1, 3), Err(Error::InvalidProbability(1.1)));
    }

    #[test]
    fn majority_error_matches_enumeration() {
        for n in [1u32, 3, 5, 7, 9, 11, 13] {
            for j in 0..=20 {
                let p = j as f64 / 20.0;
                assert_abs_diff_eq!(
                    majority_error(p, n as u64).unwrap(),
                    enumerate_error(p, n),
                    epsilon = 1e-13
                );
            }
        }
    }

    #[test]
    fn bayes_examples() {
        assert_eq!(bayes_binary(0.3).unwrap(), 0.3);
        assert_eq!(bayes_binary(0.5).unwrap(), 0.5);
        assert_eq!(bayes_binary(1.0).unwrap(), 0.0);
        assert!(bayes_binary(-0.01).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(monotone_gap(0.5, 7).unwrap(), 0.0);
        assert_eq!(monotone_gap(0.0, 7).unwrap(), 0.0);
        assert_abs_diff_eq!(monotone_gap(0.1, 1).unwrap(), 0.0576, epsilon = 1e-15);
        let direct = majority_error(0.1, 1).unwrap() - majority_error(0.1, 3).unwrap();
        assert_abs_diff_eq!(monotone_gap(0.1, 1).unwrap(), direct, epsilon = 1e-15);
    }

    #[test]
    fn taylor_examples() {
        assert_eq!(taylor_coeff(3).unwrap(), 3);
        assert_eq!(taylor_coeff(5).unwrap(), 10);
        assert_eq!(taylor_coeff(7).unwrap(), 35);
        assert_eq!(taylor_coeff(1), Err(Error::NoExpansionForOne));
        assert_eq!(binomial_coefficient(10, 3), Some(120));
    }

    #[test]
    fn inside_examples() {
        // Bin(3, 1/2) lands on 1 or 2 with probability 3/8 each
        assert_abs_diff_eq!(binomial_inside(0.5, 3, 0.25).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(binomial_inside(0.0, 10, 0.2).unwrap(), 0.0);
        assert_eq!(binomial_inside(1.0, 10, 0.2).unwrap(), 0.0);
        // boundary counts are excluded: t N = 2 exactly for N = 10, t = 0.2
        assert_eq!(inside_counts(10, 0.2), Some((3, 7)));
        assert_eq!(inside_counts(4, 0.25), Some((2, 2)));
        assert_eq!(inside_counts(2, 0.49), Some((1, 1)));
        assert_eq!(inside_counts(1, 0.3), None);
        assert!(binomial_inside(0.5, 0, 0.2).is_err());
        assert!(binomial_inside(0.5, 3, 0.5).is_err());
    }

    #[test]
    fn window_is_normalised_for_large_n() {
        for &(n, p) in &[(10_000u64, 0.37), (1000, 1e-3), (1000, 0.999), (50_000, 0.5)] {
            let w = BinomialWindow::new(n, p);
            let total: f64 = w.mass.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            let mean: f64 = w
                .mass
                .iter()
                .enumerate()
                .map(|(i, m)| (w.lo + i as u64) as f64 * m)
                .sum();
            assert_abs_diff_eq!(mean, n as f64 * p, epsilon = 1e-8 * n as f64);
        }
    }

    #[test]
    fn envelope_examples() {
        let grid = uniform_grid(MIN_ENVELOPE_GRID);
        let env1 = concave_envelope(1, MIN_ENVELOPE_GRID).unwrap();
        for &p in &grid {
            assert_abs_diff_eq!(env1.eval(p), 2.0 * p * (1.0 - p), epsilon = 1e-15);
        }
        let env3 = concave_envelope(3, MIN_ENVELOPE_GRID).unwrap();
        assert_eq!(env3.eval(0.0), 0.0);
        // chord to (0.2, 0.2624) already gives 0.1312 at p = 0.1
        assert!(env3.eval(0.1) >= 0.1312 - 1e-12);
        assert!(env3.eval(0.1) > majority_error(0.1, 3).unwrap());
        assert!(env3.is_concave(1e-12));
        assert!(concave_envelope(3, 100).is_err());
    }

    #[test]
    fn eval_sorted_matches_eval() {
        let env = concave_envelope(5, MIN_ENVELOPE_GRID).unwrap();
        let grid = uniform_grid(3001);
        let fast = env.eval_sorted(&grid);
        for (p, v) in grid.iter().zip(fast) {
            assert_abs_diff_eq!(env.eval(*p), v, epsilon = 1e-15);
        }
    }

    #[test]
    fn key_inequality_endpoints_and_centre() {
        let g = KeyInequalityGrid::evaluate(3, 0.25, 11, MIN_ENVELOPE_GRID).unwrap();
        assert_eq!(g.lhs[0], 0.0);
        assert_eq!(g.rhs[0], 0.0);
        let mid = MIN_ENVELOPE_GRID / 2;
        assert_abs_diff_eq!(g.grid[mid], 0.5);
        assert!(g.lhs[mid] <= 0.5 + 1e-12);
    }

    #[test]
    fn find_n_rejects_bad_arguments() {
        let o = FindNOptions::default();
        assert!(find_n(2, 0.25, &o).is_err());
        assert!(find_n(3, 0.6, &o).is_err());
        let tight = FindNOptions { cap: 5, ..o };
        match find_n(7, 0.01, &tight) {
            Err(Error::SearchCapExceeded { cap, .. }) => assert_eq!(cap, 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
